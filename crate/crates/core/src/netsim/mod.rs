//! Deterministic discrete-time network simulator. Every random choice comes
//! from a hash stream keyed by the scenario seed, so a seed replays exactly.

pub mod config;
pub mod light;
pub mod metrics;
pub mod sim;

use std::io;
use std::path::Path;

pub use config::{
    node_address, node_key, AdversaryKind, AdversarySpec, ConfigError, ConfigIssue, ForkSpec, NodeSpec, Partition,
    Role, SimConfig, Topology, Workload,
};
pub use light::{InclusionProof, LightChain, LightError, LightOutcome};
pub use metrics::{Metrics, ReorgRecord, TipChange};
pub use sim::{run_scenario, Node, SimOutcome, Simulation};

impl SimOutcome {
    /// CSV metrics plus `events.log` under `dir`.
    pub fn write_outputs(&self, dir: &Path) -> io::Result<()> {
        self.metrics.write_csvs(dir)?;
        let mut text = String::new();
        for l in &self.log {
            text.push_str(l);
            text.push('\n');
        }
        crate::fsutil::write_atomic(&dir.join("events.log"), text.as_bytes())
    }
}

pub fn load_scenario(path: &Path) -> Result<SimConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Parse(format!("{}: {e}", path.display())))?;
    SimConfig::from_toml(&text)
}
