use std::collections::{BTreeMap, HashMap, HashSet};

use super::config::{node_key, AdversaryKind, AdversarySpec, Role, SimConfig};
use super::light::{InclusionProof, LightChain, LightError, LightOutcome};
use super::metrics::{Metrics, ReorgRecord, TipChange};
use crate::chain::{
    block_data_len, seal_pow, AppendOutcome, Block, BlockError, ChainParams, ChainStore, NodeFork, PublishTicket,
    ValidationRules,
};
use crate::consensus::Model;
use crate::crypto::{sha256, Address, Digest32, HashStream, KeyPair, PublicKey, USER_ADDRESS_VERSION};
use crate::ledger::{build_transaction, Mempool, OutPoint, Transaction, TxKind, TxOutput};

#[derive(Debug, Clone)]
enum Message {
    Block(Block),
    Tx(Transaction),
    GetBlock(Digest32),
    GetChain,
    Chain(Vec<Block>),
}

impl Message {
    /// Delivery order within a tick for the same destination.
    fn rank(&self) -> u8 {
        match self {
            Message::Block(_) => 0,
            Message::Chain(_) => 1,
            Message::GetBlock(_) => 2,
            Message::GetChain => 3,
            Message::Tx(_) => 4,
        }
    }
}

#[derive(Debug, Clone)]
struct Envelope {
    from: usize,
    to: usize,
    msg: Message,
}

/// One simulated participant.
#[derive(Debug, Clone)]
pub struct Node {
    pub name: String,
    pub role: Role,
    pub address: Address,
    key: KeyPair,
    store: Option<ChainStore>,
    light: Option<LightChain>,
    pub mempool: Mempool,
    online: bool,
    peers: Vec<usize>,
    seen_blocks: HashSet<Digest32>,
    /// Blocks waiting for a parent, keyed by the parent hash.
    orphans: HashMap<Digest32, Vec<Block>>,
    rng: HashStream,
    attempts: f64,
    /// Outpoints this node's wallet has spent: the spending transaction
    /// and the tick it was made.
    wallet_spent: HashMap<OutPoint, (Digest32, u64)>,
    /// Light node submissions waiting for a live full peer.
    outbox: Vec<Transaction>,
    published_on: Option<Digest32>,
    ticket: Option<(Digest32, PublishTicket)>,
}

impl Node {
    pub fn store(&self) -> Option<&ChainStore> {
        self.store.as_ref()
    }

    pub fn light(&self) -> Option<&LightChain> {
        self.light.as_ref()
    }

    pub fn is_online(&self) -> bool {
        self.online
    }

    pub fn key(&self) -> &KeyPair {
        &self.key
    }

    pub fn height(&self) -> u64 {
        match (&self.store, &self.light) {
            (Some(s), _) => s.height(),
            (None, Some(l)) => l.height(),
            _ => 0,
        }
    }

    pub fn tip_hash(&self) -> Digest32 {
        match (&self.store, &self.light) {
            (Some(s), _) => s.tip_hash(),
            (None, Some(l)) => l.tip_hash(),
            _ => Digest32::ZERO,
        }
    }

    pub fn hash_attempts(&self) -> u64 {
        self.attempts.round() as u64
    }

    pub fn pending_outbox(&self) -> usize {
        self.outbox.len()
    }
}

#[derive(Debug, Clone)]
struct Attack {
    node: usize,
    spec: AdversarySpec,
    victim: Option<PublicKey>,
    secret: Option<ChainStore>,
    /// Height the public chain had when the secret branch was started.
    base: u64,
    /// Top of the last released branch; later attacks never fork below it.
    floor: u64,
    withheld: Vec<(u64, Block)>,
}

/// Result of a finished run.
#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub metrics: Metrics,
    pub log: Vec<String>,
}

impl SimOutcome {
    pub fn log_hash(&self) -> Digest32 {
        log_digest(&self.log)
    }
}

fn log_digest(log: &[String]) -> Digest32 {
    let mut bytes = Vec::new();
    for l in log {
        bytes.extend_from_slice(l.as_bytes());
        bytes.push(b'\n');
    }
    sha256(&bytes)
}

/// Ticks a wallet waits before it stops trusting a spend it cannot see.
pub const WALLET_RETRY_TICKS: u64 = 30;

fn contract_ok(store: &ChainStore, tx: &Transaction) -> bool {
    match tx.kind {
        TxKind::ContractDeploy | TxKind::ContractCall => store.state().contracts.check(tx).is_ok(),
        _ => true,
    }
}

fn short(h: &Digest32) -> String {
    h.to_hex()[..16].to_owned()
}

pub struct Simulation {
    cfg: SimConfig,
    params: ChainParams,
    tick: u64,
    nodes: Vec<Node>,
    queue: BTreeMap<(u64, u8, Address, u64), Envelope>,
    seq: u64,
    latency_rng: HashStream,
    hash_rate: f64,
    shares: Vec<f64>,
    /// Node indices in address order; simultaneous actions follow it.
    order: Vec<usize>,
    reference: usize,
    attack: Option<Attack>,
    workload_turn: usize,
    created: HashMap<Digest32, u64>,
    unconfirmed: BTreeMap<Digest32, u64>,
    produced: Vec<Digest32>,
    metrics: Metrics,
    log: Vec<String>,
}

impl Simulation {
    /// Set up every node at genesis. `cfg` should already be validated.
    pub fn new(cfg: SimConfig) -> Self {
        let params = cfg.chain_params();
        let base_rules = ValidationRules::from_params(&params);
        let n = cfg.nodes.len();
        let links: Vec<Vec<usize>> = match &cfg.topology.links {
            None => (0..n).map(|i| (0..n).filter(|j| *j != i).collect()).collect(),
            Some(pairs) => {
                let mut l = vec![Vec::new(); n];
                for [a, b] in pairs {
                    let (a, b) = (cfg.index_of(a).expect("validated"), cfg.index_of(b).expect("validated"));
                    if a != b && !l[a].contains(&b) {
                        l[a].push(b);
                        l[b].push(a);
                    }
                }
                l.iter_mut().for_each(|v| v.sort_unstable());
                l
            }
        };
        let nodes: Vec<Node> = cfg
            .nodes
            .iter()
            .zip(links)
            .map(|(spec, peers)| {
                let mut rules = base_rules;
                if let Some(f) = &cfg.fork {
                    rules = rules.with_fork(NodeFork {
                        activation_height: f.activation_height,
                        new_version: f.new_rule_version.unwrap_or(params.rule_version + 1),
                        kind: f.kind,
                        adopter: f.adopters.contains(&spec.name),
                    });
                }
                let store = ChainStore::new(params.clone(), rules).expect("validated genesis");
                let (store, light) = if spec.role == Role::Lightweight {
                    (None, Some(LightChain::new(store.genesis().header.clone())))
                } else {
                    (Some(store), None)
                };
                let key = node_key(&spec.name);
                Node {
                    name: spec.name.clone(),
                    role: spec.role,
                    address: key.address(USER_ADDRESS_VERSION),
                    key,
                    store,
                    light,
                    mempool: Mempool::new(),
                    online: spec.is_online(0),
                    peers,
                    seen_blocks: HashSet::new(),
                    orphans: HashMap::new(),
                    rng: HashStream::new(&cfg.seed.to_be_bytes(), format!("race:{}", spec.name).as_bytes()),
                    attempts: 0.0,
                    wallet_spent: HashMap::new(),
                    outbox: Vec::new(),
                    published_on: None,
                    ticket: None,
                }
            })
            .collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|i| nodes[*i].address);
        let reference = cfg
            .nodes
            .iter()
            .position(|n| n.role != Role::Lightweight)
            .unwrap_or(0);
        let hash_rate = cfg
            .consensus
            .hash_rate
            .unwrap_or_else(|| cfg.initial_target().expected_attempts() / cfg.consensus.target_spacing.max(1) as f64);
        let attack = cfg.adversary.as_ref().map(|a| Attack {
            node: cfg.index_of(&a.node).expect("validated"),
            spec: a.clone(),
            victim: a.victim.as_ref().map(|v| node_key(v).public_key().clone()),
            secret: None,
            base: 0,
            floor: 0,
            withheld: Vec::new(),
        });
        let metrics = Metrics {
            seed: cfg.seed,
            ..Default::default()
        };
        Self {
            shares: cfg.effective_shares(),
            latency_rng: HashStream::from_u64(cfg.seed, b"latency"),
            params,
            tick: 0,
            nodes,
            queue: BTreeMap::new(),
            seq: 0,
            hash_rate,
            order,
            reference,
            attack,
            workload_turn: 0,
            created: HashMap::new(),
            unconfirmed: BTreeMap::new(),
            produced: Vec::new(),
            metrics,
            log: Vec::new(),
            cfg,
        }
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn params(&self) -> &ChainParams {
        &self.params
    }

    /// Next tick to run.
    pub fn now(&self) -> u64 {
        self.tick
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, name: &str) -> Option<&Node> {
        self.nodes.iter().find(|n| n.name == name)
    }

    pub fn key_of(&self, name: &str) -> Option<&KeyPair> {
        self.node(name).map(|n| &n.key)
    }

    pub fn log(&self) -> &[String] {
        &self.log
    }

    pub fn metrics(&self) -> &Metrics {
        &self.metrics
    }

    fn idx(&self, name: &str) -> usize {
        self.cfg.index_of(name).unwrap_or_else(|| panic!("no node named {name}"))
    }

    fn emit(&mut self, node: Option<usize>, event: &str, fields: &[(&str, String)]) {
        let mut line = format!("t={} node={} event={event}", self.tick, node.map_or("-", |i| &self.nodes[i].name));
        for (k, v) in fields {
            line.push(' ');
            line.push_str(k);
            line.push('=');
            line.push_str(v);
        }
        self.log.push(line);
    }

    fn partitioned(&self, a: usize, b: usize) -> bool {
        let (na, nb) = (&self.nodes[a].name, &self.nodes[b].name);
        self.cfg.topology.partitions.iter().any(|p| {
            (p.start..p.end).contains(&self.tick) && {
                let ga = p.groups.iter().position(|g| g.contains(na));
                let gb = p.groups.iter().position(|g| g.contains(nb));
                ga != gb || ga.is_none()
            }
        })
    }

    fn delay(&mut self, from: usize, to: usize) -> u64 {
        let t = &self.cfg.topology;
        if let Some(m) = &t.matrix {
            return m[from][to].max(1);
        }
        let j = t.jitter;
        let d = if j == 0 {
            t.latency
        } else {
            (t.latency + self.latency_rng.next_below(2 * j + 1)).saturating_sub(j)
        };
        d.max(1)
    }

    fn send(&mut self, from: usize, to: usize, msg: Message) {
        if from == to || self.partitioned(from, to) {
            return;
        }
        let at = self.tick + self.delay(from, to);
        let key = (at, msg.rank(), self.nodes[to].address, self.seq);
        self.seq += 1;
        self.queue.insert(key, Envelope { from, to, msg });
    }

    fn broadcast(&mut self, from: usize, except: Option<usize>, msg: &Message) {
        let peers = self.nodes[from].peers.clone();
        for p in peers {
            if Some(p) != except {
                self.send(from, p, msg.clone());
            }
        }
    }

    fn is_attacker(&self, i: usize, kind: AdversaryKind) -> bool {
        self.attack.as_ref().is_some_and(|a| a.node == i && a.spec.kind == kind)
    }

    fn victim_tx(&self, tx: &Transaction) -> bool {
        let Some(v) = self.attack.as_ref().and_then(|a| a.victim.as_ref()) else {
            return false;
        };
        tx.inputs.iter().any(|i| i.public_key == *v)
    }

    /// Gossip `tx` from node `name` as if its wallet had created it.
    pub fn submit(&mut self, name: &str, tx: Transaction) {
        let i = self.idx(name);
        self.originate_tx(i, tx);
    }

    /// Put `tx` into node `name`'s mempool without telling anyone.
    pub fn submit_private(&mut self, name: &str, tx: Transaction) -> bool {
        let i = self.idx(name);
        let id = tx.tx_id();
        let node = &mut self.nodes[i];
        let Some(store) = &node.store else {
            return false;
        };
        if !contract_ok(store, &tx) {
            return false;
        }
        let ok = node.mempool.add(tx, &store.state().utxo).is_ok();
        if ok {
            self.track_tx(id);
        }
        ok
    }

    fn track_tx(&mut self, id: Digest32) {
        if !self.created.contains_key(&id) {
            self.created.insert(id, self.tick);
            self.unconfirmed.insert(id, self.tick);
            self.metrics.transactions_created += 1;
        }
    }

    fn originate_tx(&mut self, i: usize, tx: Transaction) {
        let id = tx.tx_id();
        self.track_tx(id);
        if self.nodes[i].role == Role::Lightweight {
            self.emit(Some(i), "light_submit", &[("tx", short(&id))]);
            self.nodes[i].outbox.push(tx);
            self.flush_outbox(i);
        } else {
            self.receive_tx(i, None, tx);
        }
    }

    fn live_full_peer(&self, i: usize) -> Option<usize> {
        self.nodes[i]
            .peers
            .iter()
            .copied()
            .find(|p| self.nodes[*p].online && self.nodes[*p].store.is_some() && !self.partitioned(i, *p))
    }

    fn flush_outbox(&mut self, i: usize) {
        if self.nodes[i].outbox.is_empty() || !self.nodes[i].online {
            return;
        }
        if self.live_full_peer(i).is_none() {
            return;
        }
        let txs = std::mem::take(&mut self.nodes[i].outbox);
        for tx in txs {
            let msg = Message::Tx(tx);
            let peers: Vec<usize> = self.nodes[i]
                .peers
                .iter()
                .copied()
                .filter(|p| self.nodes[*p].store.is_some())
                .collect();
            for p in peers {
                self.send(i, p, msg.clone());
            }
        }
    }

    /// Depth of `tx_id` as proven to light node `name` by its first live
    /// full peer.
    pub fn light_confirmation(&self, name: &str, tx_id: &Digest32) -> Result<u64, LightError> {
        let i = self.idx(name);
        let light = self.nodes[i].light.as_ref().expect("light node");
        let peer = self.live_full_peer(i).ok_or(LightError::NotOnChain(*tx_id))?;
        let store = self.nodes[peer].store.as_ref().expect("full peer");
        let proof = InclusionProof::from_store(store, tx_id).ok_or(LightError::NotOnChain(*tx_id))?;
        light.confirm(tx_id, &proof)
    }

    fn receive_tx(&mut self, i: usize, from: Option<usize>, tx: Transaction) {
        let id = tx.tx_id();
        let node = &mut self.nodes[i];
        let Some(store) = &node.store else {
            return;
        };
        // Pool membership doubles as the relay filter. A transaction that
        // left the pool may come back, for instance after a reorganisation.
        if node.mempool.contains(&id) {
            return;
        }
        if !contract_ok(store, &tx) {
            return;
        }
        if node.mempool.add(tx.clone(), &store.state().utxo).is_err() {
            return;
        }
        if self.is_attacker(i, AdversaryKind::Censorship) && self.victim_tx(&tx) {
            return;
        }
        self.broadcast(i, from, &Message::Tx(tx));
    }

    fn receive_blocks(&mut self, i: usize, from: Option<usize>, blocks: Vec<Block>, own: bool) {
        let mut work: Vec<Block> = blocks.into_iter().rev().collect();
        while let Some(block) = work.pop() {
            let hash = block.hash();
            if !own && !self.nodes[i].seen_blocks.insert(hash) {
                continue;
            }
            self.nodes[i].seen_blocks.insert(hash);
            let accepted = if self.nodes[i].store.is_some() {
                self.full_accept(i, from, block, own)
            } else {
                self.light_accept(i, from, block)
            };
            if accepted {
                if let Some(children) = self.nodes[i].orphans.remove(&hash) {
                    for c in children.into_iter().rev() {
                        self.nodes[i].seen_blocks.remove(&c.hash());
                        work.push(c);
                    }
                }
            }
        }
    }

    fn buffer_orphan(&mut self, i: usize, from: Option<usize>, block: Block) {
        let parent = block.header.prev_hash;
        self.nodes[i].orphans.entry(parent).or_default().push(block);
        if let Some(f) = from {
            self.send(i, f, Message::GetBlock(parent));
        }
    }

    fn reject(&mut self, i: usize, hash: &Digest32, reason: &str) {
        self.emit(Some(i), "reject", &[("hash", short(hash)), ("reason", reason.to_owned())]);
        *self
            .metrics
            .rejections
            .entry((self.nodes[i].name.clone(), reason.to_owned()))
            .or_default() += 1;
    }

    fn tip_changed(&mut self, i: usize) {
        let (height, hash) = (self.nodes[i].height(), self.nodes[i].tip_hash());
        self.metrics.tip_history.push(TipChange {
            tick: self.tick,
            node: self.nodes[i].name.clone(),
            height,
            hash,
        });
    }

    fn record_reorg(&mut self, i: usize, depth: u64, fork_height: u64) {
        if self.attack.as_ref().is_some_and(|a| a.node == i) {
            return;
        }
        self.metrics.reorgs.push(ReorgRecord {
            tick: self.tick,
            node: self.nodes[i].name.clone(),
            depth,
            fork_height,
        });
    }

    fn full_accept(&mut self, i: usize, from: Option<usize>, block: Block, own: bool) -> bool {
        let hash = block.hash();
        let node = &mut self.nodes[i];
        let store = node.store.as_mut().expect("full node");
        let outcome = store.append_block(block.clone());
        store.update_mempool(&mut node.mempool, &outcome);
        match &outcome {
            AppendOutcome::Rejected(BlockError::UnknownParent(_)) => {
                self.buffer_orphan(i, from, block);
                return false;
            }
            AppendOutcome::Rejected(BlockError::Duplicate) => return false,
            AppendOutcome::Rejected(e) => {
                self.reject(i, &hash, e.code());
                return false;
            }
            AppendOutcome::Extended { height, .. } => {
                self.emit(Some(i), "extended", &[("height", height.to_string()), ("hash", short(&hash))]);
                self.tip_changed(i);
            }
            AppendOutcome::SideBranch { height, .. } => {
                self.emit(Some(i), "side", &[("height", height.to_string()), ("hash", short(&hash))]);
            }
            AppendOutcome::Reorganized(r) => {
                let tip = self.nodes[i].tip_hash();
                self.emit(
                    Some(i),
                    "reorg",
                    &[
                        ("depth", r.depth().to_string()),
                        ("fork_height", r.fork_height.to_string()),
                        ("height", self.nodes[i].height().to_string()),
                        ("hash", short(&tip)),
                    ],
                );
                let (d, f) = (r.depth(), r.fork_height);
                self.record_reorg(i, d, f);
                self.tip_changed(i);
            }
        }
        self.maybe_checkpoint(i);
        let withholding = self.is_attacker(i, AdversaryKind::Withholding);
        let msg = Message::Block(block);
        if own {
            if withholding {
                let at = self.tick + self.attack.as_ref().expect("attacker").spec.delay_ticks;
                if let Message::Block(b) = msg {
                    self.attack.as_mut().expect("attacker").withheld.push((at, b));
                }
            } else {
                self.broadcast(i, None, &msg);
            }
        } else if !withholding && !self.is_attacker(i, AdversaryKind::MajorityReorg) {
            self.broadcast(i, from, &msg);
        }
        true
    }

    fn light_accept(&mut self, i: usize, from: Option<usize>, block: Block) -> bool {
        let hash = block.hash();
        let light = self.nodes[i].light.as_mut().expect("light node");
        match light.accept(block.header.clone()) {
            Ok(o) => {
                let h = light.height();
                match o {
                    LightOutcome::Extended => {
                        self.emit(Some(i), "light_extended", &[("height", h.to_string()), ("hash", short(&hash))]);
                        self.tip_changed(i);
                    }
                    LightOutcome::Side => {}
                    LightOutcome::Reorganized { depth } => {
                        self.emit(Some(i), "light_reorg", &[("depth", depth.to_string()), ("height", h.to_string())]);
                        self.tip_changed(i);
                    }
                }
                true
            }
            Err(LightError::UnknownParent) => {
                self.buffer_orphan(i, from, block);
                false
            }
            Err(LightError::Duplicate) => false,
            Err(e) => {
                let reason = match e {
                    LightError::BadLink => "bad_link",
                    _ => "bad_proof",
                };
                self.reject(i, &hash, reason);
                false
            }
        }
    }

    fn maybe_checkpoint(&mut self, i: usize) {
        let Some(d) = self.cfg.chain.checkpoint_depth else {
            return;
        };
        let store = self.nodes[i].store.as_mut().expect("full node");
        if store.height() >= d {
            let h = store.height() - d;
            if store.checkpoint().is_none_or(|(c, _)| h > c) {
                let _ = store.set_checkpoint(h);
            }
        }
    }

    fn deliver(&mut self, env: Envelope) {
        let Envelope { from, to, msg } = env;
        if !self.nodes[to].online {
            return;
        }
        match msg {
            Message::Block(b) => self.receive_blocks(to, Some(from), vec![b], false),
            Message::Chain(bs) => self.receive_blocks(to, Some(from), bs, false),
            Message::Tx(tx) => self.receive_tx(to, Some(from), tx),
            Message::GetBlock(h) => {
                if self.is_attacker(to, AdversaryKind::Withholding) {
                    return;
                }
                if let Some(b) = self.nodes[to].store.as_ref().and_then(|s| s.block(&h)).cloned() {
                    self.send(to, from, Message::Block(b));
                }
            }
            Message::GetChain => {
                if self.is_attacker(to, AdversaryKind::Withholding) {
                    return;
                }
                if let Some(s) = &self.nodes[to].store {
                    let blocks: Vec<Block> = s.main_chain().skip(1).cloned().collect();
                    self.send(to, from, Message::Chain(blocks));
                }
            }
        }
    }

    fn request_chain(&mut self, i: usize) {
        let peers = self.nodes[i].peers.clone();
        for p in peers {
            self.send(i, p, Message::GetChain);
        }
    }

    fn churn(&mut self) {
        let t = self.tick;
        for i in 0..self.nodes.len() {
            let up = self.cfg.nodes[i].is_online(t);
            if up != self.nodes[i].online {
                self.nodes[i].online = up;
                self.emit(Some(i), if up { "online" } else { "offline" }, &[]);
                if up {
                    self.request_chain(i);
                }
            }
        }
        let mut healed = false;
        for (k, p) in self.cfg.topology.partitions.clone().iter().enumerate() {
            if p.start == t {
                self.emit(None, "partition_start", &[("index", k.to_string())]);
            }
            if p.end == t {
                self.emit(None, "partition_end", &[("index", k.to_string())]);
                healed = true;
            }
        }
        if healed {
            for i in 0..self.nodes.len() {
                if self.nodes[i].online {
                    self.request_chain(i);
                }
            }
        }
    }

    fn wallet_view(&self, i: usize) -> Option<usize> {
        if self.nodes[i].store.is_some() {
            Some(i)
        } else {
            self.live_full_peer(i)
        }
    }

    /// Signed transfer from node `from` paying `amount` to `to`, using coins
    /// its wallet has no live spend for. A spend stops counting once it has
    /// been out of the pool and off the chain for [`WALLET_RETRY_TICKS`].
    /// Marks the inputs as spent.
    pub fn make_transfer(&mut self, from: &str, to: &Address, amount: u64, fee: u64) -> Option<Transaction> {
        let i = self.idx(from);
        let view = self.wallet_view(i)?;
        let vstore = self.nodes[view].store.as_ref().expect("full view");
        let vpool = &self.nodes[view].mempool;
        let utxo = &vstore.state().utxo;
        let node = &self.nodes[i];
        let now = self.tick;
        let live = |op: &OutPoint| {
            node.wallet_spent.get(op).is_some_and(|(tx, at)| {
                now < at + WALLET_RETRY_TICKS || vpool.contains(tx) || vstore.state().tx_height(tx).is_some()
            })
        };
        let need = amount.checked_add(fee)?;
        let mut got = 0u64;
        let mut spend = Vec::new();
        for (op, e) in utxo.owned_by(&node.address) {
            if e.locked || live(op) {
                continue;
            }
            got = got.saturating_add(e.output.amount);
            spend.push(*op);
            if got >= need {
                break;
            }
        }
        if got < need {
            return None;
        }
        let tx = build_transaction(&spend, &[(*to, amount)], fee, std::slice::from_ref(&node.key), utxo).ok()?;
        let id = tx.tx_id();
        self.nodes[i].wallet_spent.extend(spend.into_iter().map(|op| (op, (id, now))));
        Some(tx)
    }

    fn workload(&mut self) {
        let w = self.cfg.workload.clone();
        if w.tx_interval == 0 || self.tick < w.start || !(self.tick - w.start).is_multiple_of(w.tx_interval) {
            return;
        }
        let senders: Vec<usize> = if w.senders.is_empty() {
            (0..self.nodes.len()).filter(|i| self.cfg.nodes[*i].balance > 0).collect()
        } else {
            w.senders.iter().map(|s| self.idx(s)).collect()
        };
        if senders.is_empty() {
            return;
        }
        let s = senders[self.workload_turn % senders.len()];
        self.workload_turn += 1;
        if !self.nodes[s].online {
            return;
        }
        let r = (s + 1) % self.nodes.len();
        let to = self.nodes[r].address;
        let name = self.nodes[s].name.clone();
        match self.make_transfer(&name, &to, w.amount, w.fee) {
            Some(tx) => {
                let id = tx.tx_id();
                self.emit(
                    Some(s),
                    "tx_created",
                    &[("tx", short(&id)), ("to", self.nodes[r].name.clone()), ("amount", w.amount.to_string())],
                );
                self.originate_tx(s, tx);
            }
            None => self.emit(Some(s), "tx_skipped", &[]),
        }
    }

    fn release_withheld(&mut self) {
        let Some(a) = self.attack.as_mut() else {
            return;
        };
        let t = self.tick;
        let (due, keep): (Vec<_>, Vec<_>) = std::mem::take(&mut a.withheld).into_iter().partition(|(at, _)| *at <= t);
        a.withheld = keep;
        let node = a.node;
        for (_, b) in due {
            self.emit(Some(node), "release", &[("hash", short(&b.hash()))]);
            self.broadcast(node, None, &Message::Block(b));
        }
    }

    fn select_txs(&self, i: usize, store: &ChainStore, height: u64, reward_to: &Address) -> (Vec<Transaction>, u64) {
        let node = &self.nodes[i];
        let coinbase_len = block_data_len(&[Transaction::coinbase(
            height,
            vec![TxOutput {
                amount: u64::MAX,
                recipient: *reward_to,
            }],
        )]);
        let budget = store.rules().size_limit(height).saturating_sub(coinbase_len) as usize;
        let censor = self.is_attacker(i, AdversaryKind::Censorship);
        let mut contracts = store.state().contracts.clone();
        let txs = node.mempool.select(budget, |tx| {
            if censor && self.victim_tx(tx) {
                return false;
            }
            // Deploys change later checks: run each through a scratch registry.
            match tx.kind {
                TxKind::ContractDeploy => contracts.deploy(tx).is_ok(),
                TxKind::ContractCall => contracts.check(tx).is_ok(),
                _ => true,
            }
        });
        let fees = txs
            .iter()
            .map(|t| node.mempool.get(&t.tx_id()).map_or(0, |p| p.fee))
            .sum();
        (txs, fees)
    }

    fn producer_store(&self, i: usize, secret: bool) -> &ChainStore {
        if secret {
            self.attack.as_ref().and_then(|a| a.secret.as_ref()).expect("secret branch")
        } else {
            self.nodes[i].store.as_ref().expect("full node")
        }
    }

    fn produce_pow(&mut self, i: usize) {
        let share = self.shares[i];
        if share <= 0.0 {
            return;
        }
        let rate = share * self.hash_rate;
        self.nodes[i].attempts += rate;
        let secret_mode = self.is_attacker(i, AdversaryKind::MajorityReorg);
        if secret_mode && self.attack.as_ref().expect("attacker").secret.is_none() {
            self.start_secret_branch();
        }
        let target = self.producer_store(i, secret_mode).next_target().expect("pow chain");
        let p = 1.0 - (-rate / target.expected_attempts()).exp();
        if self.nodes[i].rng.next_unit() >= p {
            return;
        }
        let start = self.nodes[i].rng.next_u64();
        let store = self.producer_store(i, secret_mode);
        let height = store.height() + 1;
        let addr = self.nodes[i].address;
        let (txs, fees) = if secret_mode {
            (Vec::new(), 0)
        } else {
            self.select_txs(i, store, height, &addr)
        };
        let ts = self.tick.max(store.tip().header.timestamp + 1);
        let block = store.candidate(txs, fees, addr, ts);
        let (block, _) = seal_pow(block.clone(), start, u64::MAX)
            .or_else(|_| seal_pow(block, 0, start))
            .expect("target reachable");
        let hash = block.hash();
        self.produced.push(hash);
        self.metrics.blocks_produced += 1;
        if secret_mode {
            self.emit(Some(i), "produce_secret", &[("height", height.to_string()), ("hash", short(&hash))]);
            let a = self.attack.as_mut().expect("attacker");
            let out = a.secret.as_mut().expect("secret branch").append_block(block);
            debug_assert!(matches!(out, AppendOutcome::Extended { .. }));
        } else {
            self.publish_own(i, block);
        }
    }

    fn publish_own(&mut self, i: usize, block: Block) {
        let hash = block.hash();
        self.emit(
            Some(i),
            "produce",
            &[
                ("height", block.height().to_string()),
                ("hash", short(&hash)),
                ("txs", (block.transactions.len() - 1).to_string()),
            ],
        );
        let bad: Vec<Digest32> = match self.nodes[i].store.as_ref().expect("full").precheck(&block) {
            Err(BlockError::Tx { index, .. }) | Err(BlockError::Contract { index, .. }) => {
                vec![block.transactions[index].tx_id()]
            }
            _ => Vec::new(),
        };
        for id in bad {
            self.nodes[i].mempool.remove(&id);
        }
        self.receive_blocks(i, None, vec![block], true);
    }

    fn produce_signed(&mut self, i: usize) {
        let t = self.tick;
        let node = &self.nodes[i];
        let store = node.store.as_ref().expect("publisher is full");
        let tip = store.tip_hash();
        if node.published_on == Some(tip) {
            return;
        }
        let ticket = match &node.ticket {
            Some((h, tk)) if *h == tip && tk.timestamp >= t => Some(tk.clone()),
            _ => store.next_ticket(&node.address, t),
        };
        let Some(ticket) = ticket else {
            return;
        };
        self.nodes[i].ticket = Some((tip, ticket.clone()));
        if ticket.timestamp != t {
            return;
        }
        let store = self.nodes[i].store.as_ref().expect("publisher is full");
        let addr = self.nodes[i].address;
        let (txs, fees) = self.select_txs(i, store, store.height() + 1, &addr);
        let block = store.signed_block(&self.nodes[i].key, &ticket, txs, fees);
        self.nodes[i].published_on = Some(tip);
        self.produced.push(block.hash());
        self.metrics.blocks_produced += 1;
        self.publish_own(i, block);
    }

    fn start_secret_branch(&mut self) {
        let a = self.attack.as_ref().expect("attacker");
        let public = self.nodes[a.node].store.as_ref().expect("full");
        let base = public.height().saturating_sub(a.spec.secret_depth).max(a.floor.min(public.height()));
        let mut secret = ChainStore::new(public.params().clone(), *public.rules()).expect("genesis");
        for h in 1..=base {
            let b = public.block_at(h).expect("on chain").clone();
            secret.append_block(b);
        }
        let node = a.node;
        let a = self.attack.as_mut().expect("attacker");
        a.secret = Some(secret);
        a.base = base;
        self.emit(Some(node), "attack_start", &[("base", base.to_string())]);
    }

    fn attack_check(&mut self) {
        let Some(a) = self.attack.as_ref() else {
            return;
        };
        if a.spec.kind != AdversaryKind::MajorityReorg {
            return;
        }
        let Some(secret) = &a.secret else {
            return;
        };
        let node = a.node;
        let public_h = self.nodes[node].height();
        let secret_h = secret.height();
        if secret_h > public_h && secret_h > a.base {
            let blocks: Vec<Block> = (a.base + 1..=secret_h)
                .map(|h| secret.block_at(h).expect("secret chain").clone())
                .collect();
            self.emit(
                Some(node),
                "attack_release",
                &[("blocks", blocks.len().to_string()), ("height", secret_h.to_string())],
            );
            for b in &blocks {
                self.broadcast(node, None, &Message::Block(b.clone()));
            }
            self.receive_blocks(node, None, blocks, true);
            let a = self.attack.as_mut().expect("attacker");
            a.secret = None;
            a.floor = secret_h;
        } else if public_h > secret_h + a.spec.give_up {
            self.emit(Some(node), "attack_abandon", &[("secret_height", secret_h.to_string())]);
            self.attack.as_mut().expect("attacker").secret = None;
        }
    }

    fn track_confirmations(&mut self) {
        let Some(store) = self.nodes[self.reference].store.as_ref() else {
            return;
        };
        let done: Vec<(Digest32, u64)> = self
            .unconfirmed
            .iter()
            .filter(|(id, _)| store.is_confirmed(id))
            .map(|(id, t)| (*id, *t))
            .collect();
        for (id, t) in done {
            self.unconfirmed.remove(&id);
            self.metrics.confirmation_latency.insert(id, self.tick - t);
        }
    }

    fn full_indices(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|i| self.nodes[*i].store.is_some()).collect()
    }

    /// Whether the shorter tip of `a` and `b` lies on the longer chain.
    fn compatible(&self, a: usize, b: usize) -> bool {
        let (sa, sb) = (self.nodes[a].store.as_ref().unwrap(), self.nodes[b].store.as_ref().unwrap());
        let (short, long) = if sa.height() <= sb.height() { (sa, sb) } else { (sb, sa) };
        long.hash_at(short.height()) == Some(short.tip_hash())
    }

    pub fn agreement_fraction(&self) -> f64 {
        let full = self.full_indices();
        let mut pairs = 0u64;
        let mut agree = 0u64;
        for (k, a) in full.iter().enumerate() {
            for b in &full[k + 1..] {
                pairs += 1;
                agree += u64::from(self.compatible(*a, *b));
            }
        }
        if pairs == 0 {
            1.0
        } else {
            agree as f64 / pairs as f64
        }
    }

    /// Run one tick.
    pub fn step(&mut self) {
        self.run_tick(true);
    }

    /// Run `ticks` more ticks with block production and the workload
    /// switched off, so messages in flight settle.
    pub fn drain(&mut self, ticks: u64) {
        for _ in 0..ticks {
            self.run_tick(false);
        }
    }

    fn run_tick(&mut self, produce: bool) {
        self.churn();
        while let Some(entry) = self.queue.first_entry() {
            if entry.key().0 > self.tick {
                break;
            }
            let env = entry.remove();
            self.deliver(env);
        }
        for i in 0..self.nodes.len() {
            self.flush_outbox(i);
        }
        self.release_withheld();
        let order = if produce { self.order.clone() } else { Vec::new() };
        if produce {
            self.workload();
        }
        let model = self.params.consensus.model();
        for i in order {
            if !self.nodes[i].online || self.nodes[i].role != Role::Publishing {
                continue;
            }
            if model == Model::Pow {
                self.produce_pow(i);
            } else {
                self.produce_signed(i);
            }
        }
        self.attack_check();
        self.track_confirmations();
        let a = self.agreement_fraction();
        self.metrics.agreement.push((self.tick, a));
        self.tick += 1;
    }

    /// Run ticks until `tick` has been simulated (exclusive bound).
    pub fn run_until(&mut self, tick: u64) {
        while self.tick < tick {
            self.step();
        }
    }

    /// Conservation per full node: `(name, UTXO total, genesis plus
    /// height × subsidy)`.
    pub fn conservation(&self) -> Vec<(String, u128, u128)> {
        self.nodes
            .iter()
            .filter_map(|n| {
                let s = n.store.as_ref()?;
                let issued = self.params.genesis_total() + s.height() as u128 * self.params.block_subsidy as u128;
                Some((n.name.clone(), s.state().utxo.total(), issued))
            })
            .collect()
    }

    fn fork_split(&self) -> bool {
        let full = self.full_indices();
        for (k, a) in full.iter().enumerate() {
            for b in &full[k + 1..] {
                if self.compatible(*a, *b) {
                    continue;
                }
                let (sa, sb) = (self.nodes[*a].store.as_ref().unwrap(), self.nodes[*b].store.as_ref().unwrap());
                let mut fork = sa.height().min(sb.height());
                while fork > 0 && sa.hash_at(fork) != sb.hash_at(fork) {
                    fork -= 1;
                }
                if sa.height() >= fork + 5 && sb.height() >= fork + 5 {
                    return true;
                }
            }
        }
        false
    }

    /// Run to the configured duration and collect metrics.
    pub fn finish(mut self) -> SimOutcome {
        self.run_until(self.cfg.duration);
        let reference = self.nodes[self.reference].store.as_ref().expect("full reference");
        let on_chain: HashSet<Digest32> = reference.main_chain().map(|b| b.hash()).collect();
        self.metrics.orphan_count = self.produced.iter().filter(|h| !on_chain.contains(h)).count() as u64;
        self.metrics.ticks = self.tick;
        self.metrics.fork_split = self.fork_split();
        self.metrics.hash_attempts = self.nodes.iter().map(|n| (n.name.clone(), n.hash_attempts())).collect();
        for n in &self.nodes {
            let line = format!(
                "t={} node={} event=final height={} hash={}",
                self.tick,
                n.name,
                n.height(),
                short(&n.tip_hash())
            );
            self.log.push(line);
        }
        SimOutcome {
            metrics: self.metrics,
            log: self.log,
        }
    }
}

/// Run a scenario start to finish.
pub fn run_scenario(cfg: SimConfig) -> SimOutcome {
    Simulation::new(cfg).finish()
}
