use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigUint;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::crypto::{Address, Digest32};

/// 256-bit big-endian threshold. A header hash meets it when, read as a
/// big-endian integer, it is strictly below.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Target(pub [u8; 32]);

impl Target {
    /// 2^256 − 1, the easiest target: every hash but all-ones passes.
    pub const MAX: Target = Target([0xff; 32]);

    /// 2^(256 − bits). `bits` of zero gives [`Target::MAX`].
    pub fn from_bits(bits: u32) -> Target {
        if bits == 0 {
            return Target::MAX;
        }
        assert!(bits <= 256, "difficulty beyond 256 bits");
        Self::from_biguint(&(BigUint::from(1u8) << (256 - bits)))
    }

    /// Target requiring `zeros` leading zero hex digits.
    pub fn from_leading_zeros(zeros: u32) -> Target {
        Self::from_bits(4 * zeros)
    }

    pub fn to_biguint(&self) -> BigUint {
        BigUint::from_bytes_be(&self.0)
    }

    /// Clamped into `[1, 2^256 − 1]`.
    pub fn from_biguint(v: &BigUint) -> Target {
        let max = Target::MAX.to_biguint();
        if *v > max {
            return Target::MAX;
        }
        let v = if *v == BigUint::from(0u8) { BigUint::from(1u8) } else { v.clone() };
        let bytes = v.to_bytes_be();
        let mut out = [0u8; 32];
        out[32 - bytes.len()..].copy_from_slice(&bytes);
        Target(out)
    }

    pub fn is_met_by(&self, hash: &Digest32) -> bool {
        hash.0 < self.0
    }

    /// Expected hashes per success, 2^256 / (target + 1).
    pub fn expected_attempts(&self) -> f64 {
        let t = self.0.iter().fold(0f64, |acc, b| acc * 256.0 + *b as f64) + 1.0;
        2f64.powi(256) / t
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl fmt::Debug for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Target({})", self.to_hex())
    }
}

impl Serialize for Target {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Target {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let mut out = [0u8; 32];
        hex::decode_to_slice(s.trim_start_matches("0x"), &mut out)
            .map_err(|e| serde::de::Error::custom(format!("target must be 64 hex chars: {e}")))?;
        if out == [0u8; 32] {
            return Err(serde::de::Error::custom("target must be positive"));
        }
        Ok(Target(out))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowParams {
    pub target: Target,
    pub retarget_interval: u64,
    pub target_spacing: u64,
}

impl Default for PowParams {
    fn default() -> Self {
        Self {
            target: Target::MAX,
            retarget_interval: 16,
            target_spacing: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PosChainParams {
    /// Ticks between a parent and the first slot for its child; also the
    /// slot length.
    pub block_interval: u64,
}

impl Default for PosChainParams {
    fn default() -> Self {
        Self { block_interval: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PosCoinAgeParams {
    /// Age in blocks before a stake entry may win.
    pub age_threshold: u64,
    /// Upper bound on one entry's amount × age weight.
    pub weight_cap: u64,
    pub block_interval: u64,
}

impl Default for PosCoinAgeParams {
    fn default() -> Self {
        Self {
            age_threshold: 30,
            weight_cap: u64::MAX,
            block_interval: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoundRobinParams {
    pub publishers: Vec<Address>,
    /// Ticks a turn lasts before the next publisher may step in.
    pub timeout: u64,
    pub block_interval: u64,
}

impl Default for RoundRobinParams {
    fn default() -> Self {
        Self {
            publishers: Vec::new(),
            timeout: 5,
            block_interval: 10,
        }
    }
}

pub const DEFAULT_MAX_REPUTATION: u32 = 100;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoaParams {
    pub authorities: BTreeMap<Address, u32>,
    pub max_reputation: u32,
    pub block_interval: u64,
}

impl Default for PoaParams {
    fn default() -> Self {
        Self {
            authorities: BTreeMap::new(),
            max_reputation: DEFAULT_MAX_REPUTATION,
            block_interval: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoetParams {
    pub publishers: Vec<Address>,
    pub mean_wait: u64,
}

impl Default for PoetParams {
    fn default() -> Self {
        Self {
            publishers: Vec::new(),
            mean_wait: 10,
        }
    }
}

/// Publisher-selection model and its settings. In config files the variant
/// is chosen by `model`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ConsensusParams {
    Pow(PowParams),
    PosChain(PosChainParams),
    PosCoinage(PosCoinAgeParams),
    RoundRobin(RoundRobinParams),
    Poa(PoaParams),
    Poet(PoetParams),
}

impl Default for ConsensusParams {
    fn default() -> Self {
        ConsensusParams::Pow(PowParams::default())
    }
}

/// One byte identifying the model inside a header's consensus tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[repr(u8)]
pub enum Model {
    Pow = 0,
    PosChain = 1,
    PosCoinage = 2,
    RoundRobin = 3,
    Poa = 4,
    Poet = 5,
}

impl Model {
    pub fn from_byte(b: u8) -> Option<Model> {
        Some(match b {
            0 => Model::Pow,
            1 => Model::PosChain,
            2 => Model::PosCoinage,
            3 => Model::RoundRobin,
            4 => Model::Poa,
            5 => Model::Poet,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Model::Pow => "pow",
            Model::PosChain => "pos_chain",
            Model::PosCoinage => "pos_coinage",
            Model::RoundRobin => "round_robin",
            Model::Poa => "poa",
            Model::Poet => "poet",
        }
    }
}

impl ConsensusParams {
    pub fn model(&self) -> Model {
        match self {
            ConsensusParams::Pow(_) => Model::Pow,
            ConsensusParams::PosChain(_) => Model::PosChain,
            ConsensusParams::PosCoinage(_) => Model::PosCoinage,
            ConsensusParams::RoundRobin(_) => Model::RoundRobin,
            ConsensusParams::Poa(_) => Model::Poa,
            ConsensusParams::Poet(_) => Model::Poet,
        }
    }

    /// Ticks from parent timestamp to the child's first slot, and the slot
    /// length, for the slot-based models.
    pub fn slot_timing(&self) -> Option<(u64, u64)> {
        match self {
            ConsensusParams::PosChain(p) => Some((p.block_interval, p.block_interval)),
            ConsensusParams::PosCoinage(p) => Some((p.block_interval, p.block_interval)),
            ConsensusParams::RoundRobin(p) => Some((p.block_interval, p.timeout)),
            ConsensusParams::Poa(p) => Some((p.block_interval, p.block_interval)),
            ConsensusParams::Pow(_) | ConsensusParams::Poet(_) => None,
        }
    }

    /// Configuration problems, as (key, message) pairs.
    pub fn problems(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        let mut bad = |k: &str, m: &str| out.push((format!("consensus.{k}"), m.to_owned()));
        match self {
            ConsensusParams::Pow(p) => {
                if p.retarget_interval == 0 {
                    bad("retarget_interval", "must be at least 1");
                }
                if p.target_spacing == 0 {
                    bad("target_spacing", "must be at least 1");
                }
            }
            ConsensusParams::PosChain(p) if p.block_interval == 0 => {
                bad("block_interval", "must be at least 1")
            }
            ConsensusParams::PosCoinage(p) => {
                if p.block_interval == 0 {
                    bad("block_interval", "must be at least 1");
                }
                if p.weight_cap == 0 {
                    bad("weight_cap", "must be positive");
                }
            }
            ConsensusParams::RoundRobin(p) => {
                if p.publishers.is_empty() {
                    bad("publishers", "permissioned model needs at least one publisher");
                }
                if p.timeout == 0 || p.block_interval == 0 {
                    bad("timeout", "timeout and block_interval must be at least 1");
                }
            }
            ConsensusParams::Poa(p) => {
                if p.authorities.is_empty() {
                    bad("authorities", "permissioned model needs at least one authority");
                }
                if p.authorities.values().any(|r| *r > p.max_reputation) {
                    bad("authorities", "reputation above max_reputation");
                }
                if p.block_interval == 0 {
                    bad("block_interval", "must be at least 1");
                }
            }
            ConsensusParams::Poet(p) => {
                if p.publishers.is_empty() {
                    bad("publishers", "permissioned model needs at least one publisher");
                }
                if p.mean_wait == 0 {
                    bad("mean_wait", "must be at least 1");
                }
            }
            _ => {}
        }
        out
    }
}
