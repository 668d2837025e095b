use num_bigint::BigUint;

use super::params::{PowParams, Target};
use crate::chain::BlockHeader;
use crate::crypto::PuzzleError;

pub fn pow_check(header: &BlockHeader, target: &Target) -> bool {
    target.is_met_by(&header.hash())
}

/// Scan nonces `start..=end` in ascending order and return the first header
/// that meets `target`, with the number of hashes tried.
pub fn pow_mine(
    template: &BlockHeader,
    target: &Target,
    start: u64,
    end: u64,
) -> Result<(BlockHeader, u64), PuzzleError> {
    if end < start {
        return Err(PuzzleError::EmptyRange { start, end });
    }
    let mut h = template.clone();
    let mut attempts = 0u64;
    let mut nonce = start;
    loop {
        h.nonce = nonce;
        attempts += 1;
        if pow_check(&h, target) {
            return Ok((h, attempts));
        }
        if nonce == end {
            return Err(PuzzleError::NotFound { start, end, attempts });
        }
        nonce += 1;
    }
}

/// New target from a window of consecutive headers (oldest first):
/// `old × elapsed / expected`, where `expected = gaps × spacing`, clamped to
/// a factor of four either way and into `(0, 2^256)`. A window with fewer
/// than two headers leaves the target unchanged.
pub fn pow_retarget(window: &[BlockHeader], params: &PowParams, old: &Target) -> Target {
    if window.len() < 2 {
        return *old;
    }
    let first = window.first().expect("len >= 2").timestamp;
    let last = window.last().expect("len >= 2").timestamp;
    let elapsed = last.saturating_sub(first);
    let expected = (window.len() as u64 - 1) * params.target_spacing;
    retarget_ratio(old, elapsed, expected)
}

/// `old × elapsed / expected` with the ×4 / ÷4 clamp.
pub fn retarget_ratio(old: &Target, elapsed: u64, expected: u64) -> Target {
    let old_v = old.to_biguint();
    let raw = &old_v * BigUint::from(elapsed) / BigUint::from(expected.max(1));
    let lo = &old_v / 4u8;
    let hi = &old_v * 4u8;
    let clamped = raw.clamp(lo, hi);
    Target::from_biguint(&clamped)
}
