//! Scenario files. Nodes are named; each name seeds the node's key, so a
//! scenario never needs to spell out addresses.

use serde::Deserialize;
use thiserror::Error;

use crate::chain::{Allocation, ChainParams, ForkKind};
use crate::consensus::{
    ConsensusParams, Model, PoaParams, PoetParams, PosChainParams, PosCoinAgeParams, PowParams, RoundRobinParams,
    Target,
};
use crate::crypto::{sha256_parts, Address, KeyPair, USER_ADDRESS_VERSION};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub seed: u64,
    /// Ticks to simulate.
    pub duration: u64,
    #[serde(default)]
    pub chain: ChainSection,
    #[serde(default)]
    pub consensus: ConsensusSection,
    pub nodes: Vec<NodeSpec>,
    #[serde(default)]
    pub topology: Topology,
    #[serde(default)]
    pub fork: Option<ForkSpec>,
    #[serde(default)]
    pub adversary: Option<AdversarySpec>,
    #[serde(default)]
    pub workload: Workload,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainSection {
    pub confirmation_depth: u64,
    pub block_subsidy: u64,
    pub max_block_data_bytes: u64,
    pub rule_version: u16,
    /// When set, every full node pins the block this far below its tip.
    pub checkpoint_depth: Option<u64>,
}

impl Default for ChainSection {
    fn default() -> Self {
        let p = ChainParams::default();
        Self {
            confirmation_depth: p.confirmation_depth,
            block_subsidy: p.block_subsidy,
            max_block_data_bytes: p.max_block_data_bytes,
            rule_version: p.rule_version,
            checkpoint_depth: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConsensusSection {
    pub model: Model,
    /// PoW: the initial target is 2^(256 − target_bits).
    pub target_bits: u32,
    pub retarget_interval: u64,
    pub target_spacing: u64,
    /// PoW: network-wide hashes per tick. Defaults to one block per
    /// `target_spacing` at the initial target.
    pub hash_rate: Option<f64>,
    pub block_interval: u64,
    pub age_threshold: u64,
    pub weight_cap: u64,
    pub timeout: u64,
    pub max_reputation: u32,
    pub mean_wait: u64,
}

impl Default for ConsensusSection {
    fn default() -> Self {
        Self {
            model: Model::Pow,
            target_bits: 8,
            retarget_interval: 16,
            target_spacing: 10,
            hash_rate: None,
            block_interval: 10,
            age_threshold: 30,
            weight_cap: u64::MAX,
            timeout: 5,
            max_reputation: 100,
            mean_wait: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Full,
    Publishing,
    Lightweight,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub name: String,
    #[serde(default = "default_role")]
    pub role: Role,
    /// PoW: fraction of network hash rate.
    #[serde(default)]
    pub hash_share: f64,
    /// Genesis stake, locked.
    #[serde(default)]
    pub stake: u64,
    /// Genesis spendable funds.
    #[serde(default)]
    pub balance: u64,
    /// PoA reputation.
    #[serde(default)]
    pub reputation: u32,
    /// `[from, to)` tick intervals during which the node is down.
    #[serde(default)]
    pub offline: Vec<[u64; 2]>,
}

fn default_role() -> Role {
    Role::Full
}

impl NodeSpec {
    pub fn is_online(&self, tick: u64) -> bool {
        !self.offline.iter().any(|[a, b]| (*a..*b).contains(&tick))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Partition {
    pub start: u64,
    pub end: u64,
    /// Messages only flow within a group while the partition lasts.
    pub groups: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Topology {
    /// Base one-way delay in ticks.
    pub latency: u64,
    /// Each delivery adds a uniform draw from `-jitter..=jitter`.
    pub jitter: u64,
    /// Full `nodes × nodes` delay matrix; overrides `latency` and `jitter`.
    pub matrix: Option<Vec<Vec<u64>>>,
    /// Peer links by name. Every pair is linked when absent.
    pub links: Option<Vec<[String; 2]>>,
    pub partitions: Vec<Partition>,
}

impl Default for Topology {
    fn default() -> Self {
        Self {
            latency: 1,
            jitter: 0,
            matrix: None,
            links: None,
            partitions: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForkSpec {
    pub activation_height: u64,
    pub new_rule_version: Option<u16>,
    pub adopters: Vec<String>,
    pub kind: ForkKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdversaryKind {
    /// Mine a secret branch from `secret_depth` blocks back and release it
    /// once it is strictly longer than the public chain.
    MajorityReorg,
    /// Hold own blocks back `delay_ticks` and never relay others' blocks.
    Withholding,
    /// Leave the victim's transactions out of own blocks and do not relay them.
    Censorship,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdversarySpec {
    pub kind: AdversaryKind,
    /// The publishing node under adversarial control.
    pub node: String,
    /// PoW: replaces the node's hash share; honest shares are rescaled.
    pub controlled_share: Option<f64>,
    #[serde(default = "default_secret_depth")]
    pub secret_depth: u64,
    /// Restart the attack when the public chain leads the secret branch
    /// by more than this many blocks.
    #[serde(default = "default_give_up")]
    pub give_up: u64,
    #[serde(default = "default_delay")]
    pub delay_ticks: u64,
    pub victim: Option<String>,
}

fn default_secret_depth() -> u64 {
    3
}

fn default_give_up() -> u64 {
    6
}

fn default_delay() -> u64 {
    5
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Workload {
    /// Ticks between generated transfers; 0 disables the workload.
    pub tx_interval: u64,
    pub amount: u64,
    pub fee: u64,
    /// Senders, taken in turn. Defaults to every node with a balance.
    pub senders: Vec<String>,
    pub start: u64,
}

impl Default for Workload {
    fn default() -> Self {
        Self {
            tx_interval: 0,
            amount: 1,
            fee: 1,
            senders: Vec::new(),
            start: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    pub key: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("scenario does not parse: {0}")]
    Parse(String),
    #[error("invalid scenario:{}", .0.iter().map(|i| format!("\n  {}: {}", i.key, i.message)).collect::<String>())]
    Invalid(Vec<ConfigIssue>),
}

impl ConfigError {
    pub fn issues(&self) -> &[ConfigIssue] {
        match self {
            ConfigError::Invalid(v) => v,
            ConfigError::Parse(_) => &[],
        }
    }
}

/// Key for a named scenario node.
pub fn node_key(name: &str) -> KeyPair {
    let seed = sha256_parts(&[b"node-key", name.as_bytes()]);
    KeyPair::from_seed(&seed.0).expect("hash output is a valid scalar with overwhelming probability")
}

pub fn node_address(name: &str) -> Address {
    node_key(name).address(USER_ADDRESS_VERSION)
}

impl SimConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: SimConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.name == name)
    }

    pub fn publishers(&self) -> impl Iterator<Item = &NodeSpec> {
        self.nodes.iter().filter(|n| n.role == Role::Publishing)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut issues = Vec::new();
        let mut bad = |key: String, message: &str| {
            issues.push(ConfigIssue {
                key,
                message: message.to_owned(),
            })
        };
        if self.duration == 0 {
            bad("duration".into(), "must be at least 1 tick");
        }
        if self.nodes.is_empty() {
            bad("nodes".into(), "at least one node is required");
        }
        for (i, n) in self.nodes.iter().enumerate() {
            if n.name.is_empty() {
                bad(format!("nodes[{i}].name"), "must not be empty");
            }
            if self.nodes[..i].iter().any(|m| m.name == n.name) {
                bad(format!("nodes[{i}].name"), "duplicate node name");
            }
            if !(0.0..=1.0).contains(&n.hash_share) {
                bad(format!("nodes[{i}].hash_share"), "must lie in [0, 1]");
            }
            if n.role != Role::Publishing && (n.hash_share > 0.0 || n.reputation > 0) {
                bad(format!("nodes[{i}].role"), "only publishing nodes take hash_share or reputation");
            }
            for (j, [a, b]) in n.offline.iter().enumerate() {
                if a >= b {
                    bad(format!("nodes[{i}].offline[{j}]"), "interval must be [from, to) with from < to");
                }
            }
        }
        let publishers: Vec<&NodeSpec> = self.publishers().collect();
        if publishers.is_empty() {
            bad("nodes".into(), "at least one publishing node is required");
        }
        let c = &self.consensus;
        match c.model {
            Model::Pow => {
                let sum: f64 = publishers.iter().map(|n| n.hash_share).sum();
                if !publishers.is_empty() && (sum - 1.0).abs() > 1e-6 {
                    bad("nodes[].hash_share".into(), "publisher shares must sum to 1");
                }
                if c.target_bits > 64 {
                    bad("consensus.target_bits".into(), "at most 64 bits in the simulator");
                }
                if c.hash_rate.is_some_and(|r| r.is_nan() || r <= 0.0) {
                    bad("consensus.hash_rate".into(), "must be positive");
                }
            }
            Model::PosChain | Model::PosCoinage => {
                if self.nodes.iter().all(|n| n.stake == 0) {
                    bad("nodes[].stake".into(), "stake models need some genesis stake");
                }
            }
            Model::Poa => {
                if publishers.iter().all(|n| n.reputation == 0) {
                    bad("nodes[].reputation".into(), "at least one authority needs positive reputation");
                }
                for (i, n) in self.nodes.iter().enumerate() {
                    if n.reputation > c.max_reputation {
                        bad(format!("nodes[{i}].reputation"), "above consensus.max_reputation");
                    }
                }
            }
            Model::RoundRobin | Model::Poet => {}
        }
        let t = &self.topology;
        if t.latency == 0 {
            bad("topology.latency".into(), "must be at least 1 tick");
        }
        if t.jitter >= t.latency.max(1) {
            bad("topology.jitter".into(), "must be below latency so delays stay at least 1 tick");
        }
        if let Some(m) = &t.matrix {
            if m.len() != self.nodes.len() || m.iter().any(|r| r.len() != self.nodes.len()) {
                bad("topology.matrix".into(), "must be nodes × nodes");
            }
            for (i, row) in m.iter().enumerate() {
                for (j, d) in row.iter().enumerate() {
                    if i != j && *d == 0 {
                        bad(format!("topology.matrix[{i}][{j}]"), "must be at least 1 tick");
                    }
                }
            }
        }
        for (i, [a, b]) in t.links.iter().flatten().enumerate() {
            for (side, n) in [(0, a), (1, b)] {
                if self.index_of(n).is_none() {
                    bad(format!("topology.links[{i}][{side}]"), "unknown node");
                }
            }
        }
        for (i, p) in t.partitions.iter().enumerate() {
            if p.start >= p.end {
                bad(format!("topology.partitions[{i}]"), "start must precede end");
            }
            for (g, group) in p.groups.iter().enumerate() {
                for (k, n) in group.iter().enumerate() {
                    if self.index_of(n).is_none() {
                        bad(format!("topology.partitions[{i}].groups[{g}][{k}]"), "unknown node");
                    }
                }
            }
        }
        if let Some(f) = &self.fork {
            for (i, n) in f.adopters.iter().enumerate() {
                if self.index_of(n).is_none() {
                    bad(format!("fork.adopters[{i}]"), "unknown node");
                }
            }
            if f.activation_height == 0 {
                bad("fork.activation_height".into(), "must be above genesis");
            }
            if f.new_rule_version == Some(self.chain.rule_version) {
                bad("fork.new_rule_version".into(), "must differ from chain.rule_version");
            }
        }
        if let Some(a) = &self.adversary {
            match self.index_of(&a.node) {
                None => bad("adversary.node".into(), "unknown node"),
                Some(i) if self.nodes[i].role != Role::Publishing => {
                    bad("adversary.node".into(), "must be a publishing node")
                }
                _ => {}
            }
            if let Some(s) = a.controlled_share {
                if !(0.0..=1.0).contains(&s) {
                    bad("adversary.controlled_share".into(), "must lie in [0, 1]");
                }
                if publishers.len() < 2 && s < 1.0 {
                    bad("adversary.controlled_share".into(), "needs at least one honest publisher");
                }
            }
            if a.kind == AdversaryKind::MajorityReorg && c.model != Model::Pow {
                bad("adversary.kind".into(), "majority_reorg needs consensus.model = \"pow\"");
            }
            if a.kind == AdversaryKind::Censorship {
                match &a.victim {
                    None => bad("adversary.victim".into(), "censorship needs a victim"),
                    Some(v) if self.index_of(v).is_none() => bad("adversary.victim".into(), "unknown node"),
                    _ => {}
                }
            }
        }
        for (i, s) in self.workload.senders.iter().enumerate() {
            if self.index_of(s).is_none() {
                bad(format!("workload.senders[{i}]"), "unknown node");
            }
        }
        let params = self.chain_params();
        for (key, message) in params.problems() {
            if !key.starts_with("consensus.publishers") && !key.starts_with("consensus.authorities") {
                bad(key, &message);
            }
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(issues))
        }
    }

    pub fn initial_target(&self) -> Target {
        Target::from_bits(self.consensus.target_bits)
    }

    /// Hash shares after applying the adversary's controlled share.
    pub fn effective_shares(&self) -> Vec<f64> {
        let mut shares: Vec<f64> = self
            .nodes
            .iter()
            .map(|n| if n.role == Role::Publishing { n.hash_share } else { 0.0 })
            .collect();
        if let Some((i, c)) = self
            .adversary
            .as_ref()
            .and_then(|a| Some((self.index_of(&a.node)?, a.controlled_share?)))
        {
            let honest: f64 = shares.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, s)| s).sum();
            for (j, s) in shares.iter_mut().enumerate() {
                if j == i {
                    *s = c;
                } else if honest > 0.0 {
                    *s *= (1.0 - c) / honest;
                }
            }
        }
        shares
    }

    /// Chain parameters every node starts from.
    pub fn chain_params(&self) -> ChainParams {
        let c = &self.consensus;
        let publishers: Vec<Address> = self.publishers().map(|n| node_address(&n.name)).collect();
        let consensus = match c.model {
            Model::Pow => ConsensusParams::Pow(PowParams {
                target: self.initial_target(),
                retarget_interval: c.retarget_interval,
                target_spacing: c.target_spacing,
            }),
            Model::PosChain => ConsensusParams::PosChain(PosChainParams {
                block_interval: c.block_interval,
            }),
            Model::PosCoinage => ConsensusParams::PosCoinage(PosCoinAgeParams {
                age_threshold: c.age_threshold,
                weight_cap: c.weight_cap,
                block_interval: c.block_interval,
            }),
            Model::RoundRobin => ConsensusParams::RoundRobin(RoundRobinParams {
                publishers,
                timeout: c.timeout,
                block_interval: c.block_interval,
            }),
            Model::Poa => ConsensusParams::Poa(PoaParams {
                authorities: self
                    .publishers()
                    .map(|n| (node_address(&n.name), n.reputation))
                    .collect(),
                max_reputation: c.max_reputation,
                block_interval: c.block_interval,
            }),
            Model::Poet => ConsensusParams::Poet(PoetParams {
                publishers,
                mean_wait: c.mean_wait,
            }),
        };
        let mut genesis_allocation = Vec::new();
        for n in &self.nodes {
            let address = node_address(&n.name);
            if n.balance > 0 {
                genesis_allocation.push(Allocation {
                    address,
                    amount: n.balance,
                    staked: false,
                });
            }
            if n.stake > 0 {
                genesis_allocation.push(Allocation {
                    address,
                    amount: n.stake,
                    staked: true,
                });
            }
        }
        ChainParams {
            confirmation_depth: self.chain.confirmation_depth,
            block_subsidy: self.chain.block_subsidy,
            max_block_data_bytes: self.chain.max_block_data_bytes,
            rule_version: self.chain.rule_version,
            seed: self.seed,
            genesis_allocation,
            consensus,
        }
    }
}
