//! Checks that need more than the header itself: slot timing, the expected
//! PoW target, and who may sign a block in a given slot.

use thiserror::Error;

use super::params::{ConsensusParams, Model, PowParams, Target};
use super::poet::{poet_verify, wait_ticks, PoetCertificate};
use super::pow::pow_retarget;
use super::select::{
    pos_select_chain, pos_select_coin_age, poa_select, round_robin_slot, NoPublisher, StakeView,
};
use super::tag::{verify_header_signature, ConsensusTag};
use crate::chain::BlockHeader;
use crate::crypto::{sha256_parts, Address, Digest32, HashStream};
use crate::ledger::OutPoint;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConsensusError {
    #[error("consensus tag does not decode")]
    BadTag,
    #[error("tag is for {got}, chain runs {expected}")]
    WrongModel { expected: &'static str, got: &'static str },
    #[error("header carries the wrong target")]
    WrongTarget,
    #[error("header hash does not meet the target")]
    InsufficientWork,
    #[error("publisher signature does not verify")]
    BadSignature,
    #[error("timestamp {timestamp} is before the first slot at {earliest}")]
    TooEarly { timestamp: u64, earliest: u64 },
    #[error("{publisher} is not eligible in slot {slot}")]
    NotEligible { publisher: Address, slot: u64 },
    #[error("no publisher is eligible in slot {0}")]
    NoPublisher(u64),
    #[error("wait certificate is invalid")]
    BadCertificate,
}

impl ConsensusError {
    pub fn code(&self) -> &'static str {
        match self {
            ConsensusError::BadTag => "bad_tag",
            ConsensusError::WrongModel { .. } => "wrong_model",
            ConsensusError::WrongTarget => "wrong_target",
            ConsensusError::InsufficientWork => "insufficient_work",
            ConsensusError::BadSignature => "bad_signature",
            ConsensusError::TooEarly { .. } => "too_early",
            ConsensusError::NotEligible { .. } => "not_eligible",
            ConsensusError::NoPublisher(_) => "no_publisher",
            ConsensusError::BadCertificate => "bad_certificate",
        }
    }
}

/// Slot a child with `timestamp` falls in, for slot-based models.
pub fn slot_index(interval: u64, slot_len: u64, parent_ts: u64, timestamp: u64) -> Result<u64, ConsensusError> {
    let earliest = parent_ts + interval;
    if timestamp < earliest {
        return Err(ConsensusError::TooEarly { timestamp, earliest });
    }
    Ok((timestamp - earliest) / slot_len.max(1))
}

/// First timestamp of `slot` after a parent at `parent_ts`.
pub fn slot_start(interval: u64, slot_len: u64, parent_ts: u64, slot: u64) -> u64 {
    parent_ts + interval + slot * slot_len.max(1)
}

/// Uniform draw for slot `slot` on top of `prev_hash`; every node that agrees
/// on the parent computes the same value.
pub fn selection_draw(seed: u64, prev_hash: &Digest32, slot: u64) -> f64 {
    let key = sha256_parts(&[&seed.to_be_bytes(), &prev_hash.0, &slot.to_be_bytes()]);
    HashStream::new(&key.0, b"select").next_unit()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotWinner {
    pub publisher: Address,
    /// Stake entries whose coin age restarts when this block is adopted.
    pub reset: Vec<OutPoint>,
}

/// Who may publish in `slot` on top of `parent`. Only the stake models read
/// `stakes`.
pub fn slot_publisher(
    params: &ConsensusParams,
    seed: u64,
    stakes: &StakeView,
    parent: &BlockHeader,
    slot: u64,
) -> Result<SlotWinner, NoPublisher> {
    let height = parent.height + 1;
    let rand = || selection_draw(seed, &parent.hash(), slot);
    let plain = |publisher| SlotWinner {
        publisher,
        reset: Vec::new(),
    };
    match params {
        ConsensusParams::PosChain(_) => pos_select_chain(stakes, rand()).map(plain),
        ConsensusParams::PosCoinage(p) => pos_select_coin_age(stakes, p, height + slot, rand()).map(|w| SlotWinner {
            publisher: w.winner,
            reset: w.reset,
        }),
        ConsensusParams::Poa(p) => poa_select(p, rand()).map(plain),
        ConsensusParams::RoundRobin(p) => round_robin_slot(p, height, slot).map(plain).ok_or(NoPublisher),
        ConsensusParams::Pow(_) | ConsensusParams::Poet(_) => Err(NoPublisher),
    }
}

/// Target carried by `parent`'s tag, or the configured one for genesis.
pub fn parent_target(params: &PowParams, parent: &BlockHeader) -> Target {
    match ConsensusTag::decode(&parent.consensus_tag) {
        Ok(ConsensusTag::Pow { target }) => target,
        _ => params.target,
    }
}

/// Heights of the headers a retarget at `height` reads, or `None` if the
/// target carries over unchanged.
pub fn retarget_window(params: &PowParams, height: u64) -> Option<std::ops::RangeInclusive<u64>> {
    let iv = params.retarget_interval.max(1);
    (height > 0 && height.is_multiple_of(iv)).then(|| height.saturating_sub(1 + iv)..=height - 1)
}

/// Target a block at `parent.height + 1` must carry. `window` holds the
/// headers named by [`retarget_window`], oldest first.
pub fn expected_target(params: &PowParams, parent: &BlockHeader, window: &[BlockHeader]) -> Target {
    let old = parent_target(params, parent);
    match retarget_window(params, parent.height + 1) {
        Some(_) => pow_retarget(window, params, &old),
        None => old,
    }
}

/// Checks that need only the header, its parent and the parameters. Returns
/// the decoded tag. Stake eligibility is left to the caller.
pub fn check_header_consensus(
    header: &BlockHeader,
    parent: &BlockHeader,
    params: &ConsensusParams,
    seed: u64,
    pow_window: &[BlockHeader],
) -> Result<ConsensusTag, ConsensusError> {
    let tag = ConsensusTag::decode(&header.consensus_tag).map_err(|_| ConsensusError::BadTag)?;
    if tag.model() != params.model() {
        return Err(ConsensusError::WrongModel {
            expected: params.model().name(),
            got: tag.model().name(),
        });
    }
    if let ConsensusParams::Pow(p) = params {
        let ConsensusTag::Pow { target } = &tag else {
            return Err(ConsensusError::BadTag);
        };
        if *target != expected_target(p, parent, pow_window) {
            return Err(ConsensusError::WrongTarget);
        }
        if !target.is_met_by(&header.hash()) {
            return Err(ConsensusError::InsufficientWork);
        }
        return Ok(tag);
    }
    if !verify_header_signature(header, &tag) {
        return Err(ConsensusError::BadSignature);
    }
    let publisher = tag.publisher().expect("signed tag");
    match params {
        ConsensusParams::Poet(p) => {
            let ConsensusTag::Signed { extra, .. } = &tag else {
                unreachable!()
            };
            let cert = PoetCertificate::decode(extra).map_err(|_| ConsensusError::BadCertificate)?;
            let ok = cert.node == publisher
                && p.publishers.contains(&publisher)
                && cert.draw_index == header.height - 1
                && poet_verify(&cert, seed, p.mean_wait);
            if !ok {
                return Err(ConsensusError::BadCertificate);
            }
            let earliest = parent.timestamp + wait_ticks(&cert);
            if header.timestamp < earliest {
                return Err(ConsensusError::TooEarly {
                    timestamp: header.timestamp,
                    earliest,
                });
            }
        }
        _ => {
            let (iv, len) = params.slot_timing().expect("slot model");
            let slot = slot_index(iv, len, parent.timestamp, header.timestamp)?;
            if params.model() != Model::PosChain && params.model() != Model::PosCoinage {
                let w = slot_publisher(params, seed, &StakeView::default(), parent, slot)
                    .map_err(|_| ConsensusError::NoPublisher(slot))?;
                if w.publisher != publisher {
                    return Err(ConsensusError::NotEligible { publisher, slot });
                }
            }
        }
    }
    Ok(tag)
}

/// Stake-model eligibility against the stake view at the parent. Returns the
/// entries whose age resets.
pub fn check_stake_eligibility(
    header: &BlockHeader,
    parent: &BlockHeader,
    params: &ConsensusParams,
    seed: u64,
    stakes: &StakeView,
) -> Result<Vec<OutPoint>, ConsensusError> {
    let Some((iv, len)) = params.slot_timing() else {
        return Ok(Vec::new());
    };
    if !matches!(params.model(), Model::PosChain | Model::PosCoinage) {
        return Ok(Vec::new());
    }
    let tag = ConsensusTag::decode(&header.consensus_tag).map_err(|_| ConsensusError::BadTag)?;
    let publisher = tag.publisher().ok_or(ConsensusError::BadTag)?;
    let slot = slot_index(iv, len, parent.timestamp, header.timestamp)?;
    let w = slot_publisher(params, seed, stakes, parent, slot).map_err(|_| ConsensusError::NoPublisher(slot))?;
    if w.publisher != publisher {
        return Err(ConsensusError::NotEligible { publisher, slot });
    }
    Ok(w.reset)
}
