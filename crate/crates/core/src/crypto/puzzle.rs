//! The string-and-nonce hash puzzle: find the first nonce such that
//! `sha256(prefix ‖ decimal(nonce))` starts with a given number of zero hex
//! digits.

use sha2::{Digest as _, Sha256};
use thiserror::Error;

use super::digest::{Digest32, DIGEST_LEN};

pub const MAX_DIFFICULTY: u32 = (DIGEST_LEN * 2) as u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PuzzleSolution {
    pub nonce: u64,
    pub digest: Digest32,
    /// Hashes computed, counting the successful one.
    pub attempts: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PuzzleError {
    #[error("difficulty {0} exceeds {MAX_DIFFICULTY} hex digits")]
    DifficultyTooHigh(u32),
    #[error("end nonce {end} precedes start nonce {start}")]
    EmptyRange { start: u64, end: u64 },
    #[error("no solution in nonces {start}..={end} ({attempts} attempts)")]
    NotFound { start: u64, end: u64, attempts: u64 },
}

/// True when `digest` has at least `difficulty` leading zero hex digits.
#[inline]
pub fn meets_difficulty(digest: &[u8; DIGEST_LEN], difficulty: u32) -> bool {
    let full = (difficulty / 2) as usize;
    if digest[..full].iter().any(|&b| b != 0) {
        return false;
    }
    difficulty.is_multiple_of(2) || digest[full] < 0x10
}

/// Scan nonces upward from `start` through `end` (inclusive; `None` means
/// `u64::MAX`) and return the first solution.
pub fn solve_string_puzzle(
    prefix: &str,
    difficulty: u32,
    start: u64,
    end: Option<u64>,
) -> Result<PuzzleSolution, PuzzleError> {
    if difficulty > MAX_DIFFICULTY {
        return Err(PuzzleError::DifficultyTooHigh(difficulty));
    }
    let end = end.unwrap_or(u64::MAX);
    if end < start {
        return Err(PuzzleError::EmptyRange { start, end });
    }
    let base = Sha256::new_with_prefix(prefix.as_bytes());
    let mut digits = itoa::Buffer::new();
    let mut nonce = start;
    loop {
        let mut h = base.clone();
        h.update(digits.format(nonce).as_bytes());
        let out: [u8; DIGEST_LEN] = h.finalize().into();
        if meets_difficulty(&out, difficulty) {
            return Ok(PuzzleSolution {
                nonce,
                digest: Digest32(out),
                attempts: nonce - start + 1,
            });
        }
        if nonce == end {
            return Err(PuzzleError::NotFound {
                start,
                end,
                attempts: end - start + 1,
            });
        }
        nonce += 1;
    }
}

/// Outcome of splitting one nonce range across several cooperating miners.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolOutcome {
    /// Inclusive sub-range assigned to each worker.
    pub ranges: Vec<(u64, u64)>,
    /// First solution inside each worker's sub-range, if any.
    pub per_worker: Vec<Option<PuzzleSolution>>,
}

impl PoolOutcome {
    /// Solution with the smallest nonce across all workers. Equal to the
    /// single-scan answer over the whole range.
    pub fn lowest_nonce(&self) -> Option<PuzzleSolution> {
        self.per_worker.iter().flatten().min_by_key(|s| s.nonce).copied()
    }

    /// The worker that would finish first if all hash at the same rate:
    /// fewest attempts, ties to the lower worker index.
    pub fn first_finisher(&self) -> Option<(usize, PuzzleSolution)> {
        self.per_worker
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.map(|s| (i, s)))
            .min_by_key(|(i, s)| (s.attempts, *i))
    }
}

/// Equal-width contiguous split of `start..=end`; the last worker absorbs the remainder.
pub fn split_range(start: u64, end: u64, workers: usize) -> Vec<(u64, u64)> {
    assert!(workers > 0, "need at least one worker");
    assert!(end >= start, "empty range");
    let total = (end - start) as u128 + 1;
    let width = total / workers as u128;
    let mut ranges = Vec::with_capacity(workers);
    let mut lo = start as u128;
    for i in 0..workers {
        let hi = if i + 1 == workers {
            end as u128
        } else {
            (lo + width).saturating_sub(1).max(lo)
        };
        ranges.push((lo as u64, hi as u64));
        lo = hi + 1;
        if lo > end as u128 {
            break;
        }
    }
    ranges
}

/// Pooled mining: each worker scans its own sub-range on a separate thread.
pub fn solve_string_puzzle_pooled(
    prefix: &str,
    difficulty: u32,
    start: u64,
    end: u64,
    workers: usize,
) -> Result<PoolOutcome, PuzzleError> {
    if difficulty > MAX_DIFFICULTY {
        return Err(PuzzleError::DifficultyTooHigh(difficulty));
    }
    if end < start {
        return Err(PuzzleError::EmptyRange { start, end });
    }
    let ranges = split_range(start, end, workers);
    let per_worker = std::thread::scope(|scope| {
        let handles: Vec<_> = ranges
            .iter()
            .map(|&(lo, hi)| {
                scope.spawn(move || solve_string_puzzle(prefix, difficulty, lo, Some(hi)).ok())
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("puzzle worker panicked"))
            .collect()
    });
    Ok(PoolOutcome { ranges, per_worker })
}
