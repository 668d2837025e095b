//! `blocklab`: wallet keys, the string puzzle, a local chain file, contract
//! tooling and scenario runs. One summary line on stdout per command;
//! diagnostics go to stderr. The exit code says how a command ended.

mod local;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use blocklab::chain::{split_chain_records, verify_encoded_blocks, PersistError, VerifyError};
use blocklab::contracts::asm::{assemble, disassemble};
use blocklab::contracts::Bytecode;
use blocklab::crypto::keystore::{KeyStore, KeyStoreError};
use blocklab::crypto::{solve_string_puzzle, solve_string_puzzle_pooled, Address, KeyPair, PuzzleError, USER_ADDRESS_VERSION};
use blocklab::ledger::balance;
use blocklab::netsim::{load_scenario, ConfigError, Simulation};
use clap::{Parser, Subcommand};

pub const EXIT_NOT_FOUND: u8 = 1;
pub const EXIT_VERIFY: u8 = 2;
pub const EXIT_IO: u8 = 3;
pub const EXIT_CONFIG: u8 = 4;

#[derive(Debug)]
pub struct Fail {
    code: u8,
    msg: String,
}

impl Fail {
    pub fn new(code: u8, msg: impl fmt::Display) -> Self {
        Self {
            code,
            msg: msg.to_string(),
        }
    }

    pub fn io(path: &Path, e: impl fmt::Display) -> Self {
        Self::new(EXIT_IO, format!("{}: {e}", path.display()))
    }

    pub fn config(msg: impl fmt::Display) -> Self {
        Self::new(EXIT_CONFIG, msg)
    }
}

impl From<KeyStoreError> for Fail {
    fn from(e: KeyStoreError) -> Self {
        match e {
            KeyStoreError::DuplicateLabel(_) | KeyStoreError::Key(_) => Fail::config(e),
            _ => Fail::new(EXIT_IO, format!("key store: {e}")),
        }
    }
}

type CmdResult = Result<(), Fail>;

#[derive(Parser)]
#[command(name = "blocklab", version, about = "Blockchain engine and network simulator")]
struct Cli {
    /// Key store, chain parameters and chain file live here.
    #[arg(long, global = true, default_value = "blocklab-data")]
    data_dir: PathBuf,
    /// Reports and build products go here.
    #[arg(long, global = true, default_value = "blocklab-out")]
    output_dir: PathBuf,
    /// More diagnostics on stderr.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Create a key and print its address.
    Keygen {
        /// 32-byte seed in hex; random when absent.
        #[arg(long)]
        seed: Option<String>,
        #[arg(long)]
        label: Option<String>,
    },
    /// Print "unlocked staked" for an address or key label.
    Balance { who: String },
    /// Search for the first nonce whose sha256(prefix ‖ nonce) has `zeros` leading hex zeros.
    Puzzle {
        prefix: String,
        zeros: u32,
        start: u64,
        end: Option<u64>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    #[command(subcommand)]
    Chain(ChainCmd),
    /// Run a scenario and write its CSVs and event log.
    Sim {
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Assemble contract source into a bytecode file.
    Asm {
        source: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print bytecode as assembly.
    Disasm { bytecode: PathBuf },
    /// Deploy a bytecode file on the local chain.
    Deploy {
        bytecode: PathBuf,
        #[arg(long)]
        from: String,
        #[arg(long, default_value_t = 10)]
        fee: u64,
    },
    /// Call a deployed contract on the local chain.
    Call {
        contract: String,
        #[arg(long)]
        from: String,
        #[arg(long, default_value_t = 1)]
        fee: u64,
        /// Comma-separated input words.
        #[arg(long, value_delimiter = ',')]
        input: Vec<u64>,
    },
}

#[derive(Subcommand)]
enum ChainCmd {
    /// Write genesis. Without --params every stored key is funded.
    Init {
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        fund: u64,
    },
    /// Replay the chain file under full validation.
    Verify,
    /// One line per block: height, hash, transactions, publisher.
    Inspect,
    /// Print the tip height and hash.
    Tip,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: &Cli) -> CmdResult {
    let data = &cli.data_dir;
    match &cli.cmd {
        Cmd::Keygen { seed, label } => keygen(data, seed.as_deref(), label.as_deref()),
        Cmd::Balance { who } => {
            let keys = local::keys(data)?;
            let addr = resolve_address(&keys, who)?;
            let b = match local::try_open(data)? {
                Some(store) => balance(&addr, &store.state().utxo),
                None => Default::default(),
            };
            println!("{} {}", b.unlocked, b.locked_stake);
            Ok(())
        }
        Cmd::Puzzle {
            prefix,
            zeros,
            start,
            end,
            workers,
        } => puzzle(prefix, *zeros, *start, *end, *workers),
        Cmd::Chain(c) => chain(cli, c),
        Cmd::Sim { scenario, out, seed } => sim(cli, scenario, out.as_deref(), *seed),
        Cmd::Asm { source, out } => {
            let text = std::fs::read_to_string(source).map_err(|e| Fail::io(source, e))?;
            let code = assemble(&text).map_err(|e| Fail::config(format!("{}: {e}", source.display())))?;
            let out = match out {
                Some(p) => p.clone(),
                None => {
                    let stem = source.file_stem().unwrap_or_default().to_string_lossy().into_owned();
                    cli.output_dir.join(format!("{stem}.bc"))
                }
            };
            if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| Fail::io(dir, e))?;
            }
            let bytes = code.encode();
            blocklab::fsutil::write_atomic(&out, &bytes).map_err(|e| Fail::io(&out, e))?;
            println!("instructions={} bytes={} path={}", code.len(), bytes.len(), out.display());
            Ok(())
        }
        Cmd::Disasm { bytecode } => {
            let code = read_bytecode(bytecode)?;
            print!("{}", disassemble(&code));
            Ok(())
        }
        Cmd::Deploy { bytecode, from, fee } => {
            let code = read_bytecode(bytecode)?;
            local::deploy(data, from, &code, *fee)
        }
        Cmd::Call {
            contract,
            from,
            fee,
            input,
        } => {
            let addr: Address = contract
                .parse()
                .map_err(|e| Fail::config(format!("contract address: {e}")))?;
            local::call(data, from, &addr, input, *fee)
        }
    }
}

fn read_bytecode(path: &Path) -> Result<Bytecode, Fail> {
    let bytes = std::fs::read(path).map_err(|e| Fail::io(path, e))?;
    Bytecode::parse(&bytes).map_err(|e| Fail::new(EXIT_IO, format!("{}: {e}", path.display())))
}

fn resolve_address(keys: &KeyStore, who: &str) -> Result<Address, Fail> {
    if let Some(r) = keys.by_label(who) {
        return Ok(r.address());
    }
    who.parse::<Address>()
        .map_err(|e| Fail::new(EXIT_NOT_FOUND, format!("{who:?} is neither a key label nor an address: {e}")))
}

fn keygen(data: &Path, seed: Option<&str>, label: Option<&str>) -> CmdResult {
    let seed: [u8; 32] = match seed {
        Some(h) => hex::decode(h.trim_start_matches("0x"))
            .ok()
            .and_then(|v| v.try_into().ok())
            .ok_or_else(|| Fail::config("seed must be 64 hex characters"))?,
        None => rand::random(),
    };
    let key = KeyPair::from_seed(&seed).map_err(Fail::config)?;
    let mut keys = local::keys(data)?;
    let address = key.address(USER_ADDRESS_VERSION);
    if let Some(r) = keys.by_address(&address) {
        if label.is_none_or(|l| l == r.label) {
            println!("{address} {}", r.label);
            return Ok(());
        }
    }
    let label = label.map(str::to_owned).unwrap_or_else(|| format!("key{}", keys.records().len()));
    keys.insert(&label, key, USER_ADDRESS_VERSION)?;
    local::save_keys(data, &keys)?;
    println!("{address} {label}");
    Ok(())
}

fn puzzle(prefix: &str, zeros: u32, start: u64, end: Option<u64>, workers: usize) -> CmdResult {
    let t = Instant::now();
    let found = if workers > 1 {
        let outcome = solve_string_puzzle_pooled(prefix, zeros, start, end.unwrap_or(u64::MAX), workers)
            .map_err(|e: PuzzleError| Fail::config(e))?;
        outcome.lowest_nonce().ok_or_else(|| {
            Fail::new(EXIT_NOT_FOUND, format!("no solution in {start}..={}", end.unwrap_or(u64::MAX)))
        })?
    } else {
        match solve_string_puzzle(prefix, zeros, start, end) {
            Ok(s) => s,
            Err(e @ PuzzleError::NotFound { .. }) => return Err(Fail::new(EXIT_NOT_FOUND, e)),
            Err(e) => return Err(Fail::config(e)),
        }
    };
    println!(
        "nonce={} digest={} attempts={} elapsed_ms={}",
        found.nonce,
        found.digest,
        found.attempts,
        t.elapsed().as_millis()
    );
    Ok(())
}

fn chain(cli: &Cli, c: &ChainCmd) -> CmdResult {
    let data = &cli.data_dir;
    match c {
        ChainCmd::Init { params, fund } => local::init(data, params.as_deref(), *fund),
        ChainCmd::Verify => {
            let params = local::params(data)?;
            let path = local::chain_path(data);
            let bytes = std::fs::read(&path).map_err(|e| Fail::io(&path, e))?;
            let records = split_chain_records(&bytes).map_err(|e| Fail::io(&path, e))?;
            if let Some(i) = records.iter().position(|r| !r.checksum_ok) {
                return Err(Fail::new(
                    EXIT_VERIFY,
                    format!("broken at height {i}: record checksum mismatch at offset {}", records[i].offset),
                ));
            }
            let bodies: Vec<Vec<u8>> = records.into_iter().map(|r| r.body).collect();
            let rules = blocklab::chain::ValidationRules::from_params(&params);
            match verify_encoded_blocks(&bodies, &params, &rules, None) {
                Ok(r) => {
                    println!("ok blocks={} height={} tip={}", r.blocks, r.tip_height, r.tip_hash);
                    Ok(())
                }
                Err(e @ VerifyError::Empty) => Err(Fail::new(EXIT_IO, e)),
                Err(e) => Err(Fail::new(EXIT_VERIFY, format!("broken at height {}: {e}", e.height().unwrap_or(0)))),
            }
        }
        ChainCmd::Inspect => {
            let store = local::open(data)?;
            for b in store.main_chain() {
                let publisher = b.transactions[0]
                    .outputs
                    .first()
                    .map_or_else(|| "-".to_owned(), |o| o.recipient.to_hex());
                println!("{} {} {} {publisher}", b.height(), b.hash(), b.transactions.len());
            }
            Ok(())
        }
        ChainCmd::Tip => {
            let store = local::open(data)?;
            println!("{} {}", store.height(), store.tip_hash());
            Ok(())
        }
    }
}

fn sim(cli: &Cli, scenario: &Path, out: Option<&Path>, seed: Option<u64>) -> CmdResult {
    let mut cfg = load_scenario(scenario).map_err(|e| match e {
        ConfigError::Parse(m) if m.starts_with(&scenario.display().to_string()) => Fail::new(EXIT_IO, m),
        other => Fail::config(other),
    })?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let out = out.map(Path::to_path_buf).unwrap_or_else(|| cli.output_dir.clone());
    let outcome = Simulation::new(cfg).finish();
    outcome.write_outputs(&out).map_err(|e| Fail::io(&out, e))?;
    if cli.verbose > 0 {
        eprintln!("wrote {} event lines under {}", outcome.log.len(), out.display());
    }
    println!("{} events_sha256={}", outcome.metrics.summary_line(), outcome.log_hash());
    Ok(())
}

impl From<PersistError> for Fail {
    fn from(e: PersistError) -> Self {
        if e.is_corruption() {
            Fail::new(EXIT_IO, format!("chain file: {e}"))
        } else {
            Fail::new(EXIT_VERIFY, format!("chain file: {e}"))
        }
    }
}
