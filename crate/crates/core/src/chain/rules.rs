use serde::{Deserialize, Serialize};

use super::params::ChainParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForkKind {
    /// Adopters tighten the size rule; everyone else still accepts their blocks.
    Soft,
    /// Adopters require a new rule version; other nodes reject it as unknown.
    Hard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeFork {
    pub activation_height: u64,
    pub new_version: u16,
    pub kind: ForkKind,
    pub adopter: bool,
}

/// One node's block acceptance rules. Nodes in the same network may differ
/// here; that is how protocol forks appear.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ValidationRules {
    pub base_version: u16,
    pub max_block_data_bytes: u64,
    pub fork: Option<NodeFork>,
}

impl ValidationRules {
    pub fn from_params(params: &ChainParams) -> Self {
        Self {
            base_version: params.rule_version,
            max_block_data_bytes: params.max_block_data_bytes,
            fork: None,
        }
    }

    pub fn with_fork(mut self, fork: NodeFork) -> Self {
        self.fork = Some(fork);
        self
    }

    fn active(&self, height: u64) -> Option<&NodeFork> {
        self.fork
            .as_ref()
            .filter(|f| f.adopter && height >= f.activation_height)
    }

    pub fn size_limit(&self, height: u64) -> u64 {
        match self.active(height) {
            Some(f) if f.kind == ForkKind::Soft => self.max_block_data_bytes / 2,
            _ => self.max_block_data_bytes,
        }
    }

    /// Version this node stamps on a block it publishes at `height`.
    pub fn publish_version(&self, height: u64) -> u16 {
        match self.active(height) {
            Some(f) if f.kind == ForkKind::Hard => f.new_version,
            _ => self.base_version,
        }
    }

    /// The only version this node accepts at `height`.
    pub fn accepts_version(&self, height: u64, version: u16) -> bool {
        version == self.publish_version(height)
    }
}
