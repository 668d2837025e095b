use std::collections::BTreeMap;

use thiserror::Error;

use super::params::{PoaParams, PosCoinAgeParams, RoundRobinParams};
use crate::crypto::Address;
use crate::ledger::{OutPoint, UtxoSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("no eligible publisher")]
pub struct NoPublisher;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StakeEntry {
    pub outpoint: OutPoint,
    pub address: Address,
    pub staked_amount: u64,
    pub stake_height: u64,
    /// Height coin age is counted from; the stake height until the entry
    /// wins, then the height it won at.
    pub age_origin: u64,
}

/// Locked outputs, ordered by (address, outpoint).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct StakeView {
    pub entries: Vec<StakeEntry>,
}

impl StakeView {
    pub fn from_utxo(utxo: &UtxoSet, age_origins: &BTreeMap<OutPoint, u64>) -> Self {
        let mut entries: Vec<StakeEntry> = utxo
            .iter()
            .filter(|(_, e)| e.locked && e.output.amount > 0)
            .map(|(op, e)| StakeEntry {
                outpoint: *op,
                address: e.output.recipient,
                staked_amount: e.output.amount,
                stake_height: e.created_height,
                age_origin: age_origins.get(op).copied().unwrap_or(e.created_height),
            })
            .collect();
        entries.sort_by_key(|a| (a.address, a.outpoint));
        Self { entries }
    }

    pub fn total(&self) -> u128 {
        self.entries.iter().map(|e| e.staked_amount as u128).sum()
    }

    /// Summed stake per address, in address order.
    pub fn by_address(&self) -> Vec<(Address, u128)> {
        aggregate(self.entries.iter().map(|e| (e.address, e.staked_amount as u128)))
    }
}

fn aggregate(items: impl Iterator<Item = (Address, u128)>) -> Vec<(Address, u128)> {
    let mut m: BTreeMap<Address, u128> = BTreeMap::new();
    for (a, w) in items {
        *m.entry(a).or_default() += w;
    }
    m.into_iter().filter(|(_, w)| *w > 0).collect()
}

/// Map a `[0, 1)` draw to 53 integer bits so selection is exact integer math.
pub fn draw_bits(rand: f64) -> u64 {
    let x = (rand * (1u64 << 53) as f64) as u64;
    x.min((1u64 << 53) - 1)
}

/// `⌊draw × total / 2^53⌋` without overflow for any u128 total below 2^75·2^53.
fn scale(draw: u64, total: u128) -> u128 {
    let hi = total >> 53;
    let lo = total & ((1u128 << 53) - 1);
    draw as u128 * hi + ((draw as u128 * lo) >> 53)
}

/// Cumulative-weight pick over `weights` in the order given. Entries with
/// zero weight are never chosen.
pub fn weighted_pick(weights: &[(Address, u128)], draw: u64) -> Result<Address, NoPublisher> {
    let total: u128 = weights.iter().map(|(_, w)| *w).sum();
    if total == 0 {
        return Err(NoPublisher);
    }
    let point = scale(draw, total);
    let mut acc = 0u128;
    for (a, w) in weights {
        acc += w;
        if point < acc {
            return Ok(*a);
        }
    }
    unreachable!("point below total")
}

/// Chance of selection equals share of total stake.
pub fn pos_select_chain(stakes: &StakeView, rand: f64) -> Result<Address, NoPublisher> {
    weighted_pick(&stakes.by_address(), draw_bits(rand))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoinAgeWin {
    pub winner: Address,
    /// The winner's entries that contributed weight; their age resets.
    pub reset: Vec<OutPoint>,
}

pub fn coin_age_weight(entry: &StakeEntry, params: &PosCoinAgeParams, now: u64) -> u128 {
    let age = now.saturating_sub(entry.age_origin);
    if age < params.age_threshold {
        return 0;
    }
    (entry.staked_amount as u128 * age as u128).min(params.weight_cap as u128)
}

/// Select by `min(amount × age, cap)` over entries at least
/// `age_threshold` blocks old at height `now`.
pub fn pos_select_coin_age(
    stakes: &StakeView,
    params: &PosCoinAgeParams,
    now: u64,
    rand: f64,
) -> Result<CoinAgeWin, NoPublisher> {
    let weights = aggregate(
        stakes
            .entries
            .iter()
            .map(|e| (e.address, coin_age_weight(e, params, now))),
    );
    let winner = weighted_pick(&weights, draw_bits(rand))?;
    let reset = stakes
        .entries
        .iter()
        .filter(|e| e.address == winner && coin_age_weight(e, params, now) > 0)
        .map(|e| e.outpoint)
        .collect();
    Ok(CoinAgeWin { winner, reset })
}

/// Turn order with timeout skips: `publishers[height mod n]`, walking
/// forward past publishers that are not live.
pub fn round_robin_publisher(
    params: &RoundRobinParams,
    height: u64,
    live: impl Fn(&Address) -> bool,
) -> Result<Address, NoPublisher> {
    let n = params.publishers.len() as u64;
    (0..n)
        .map(|j| params.publishers[((height + j) % n) as usize])
        .find(|a| live(a))
        .ok_or(NoPublisher)
}

/// Publisher whose turn it is in slot `slot` after the parent of a block at
/// `height`: every slot boundary passes the turn on by one.
pub fn round_robin_slot(params: &RoundRobinParams, height: u64, slot: u64) -> Option<Address> {
    let n = params.publishers.len() as u64;
    (n > 0).then(|| params.publishers[((height + slot) % n) as usize])
}

pub fn poa_select(params: &PoaParams, rand: f64) -> Result<Address, NoPublisher> {
    let weights: Vec<(Address, u128)> = params
        .authorities
        .iter()
        .map(|(a, r)| (*a, *r as u128))
        .collect();
    weighted_pick(&weights, draw_bits(rand))
}

/// Shift one authority's reputation by `delta`, clamped to `[0, max]`.
/// Unknown addresses are left out.
pub fn poa_adjust(params: &PoaParams, address: &Address, delta: i64) -> PoaParams {
    let mut out = params.clone();
    if let Some(r) = out.authorities.get_mut(address) {
        let v = (*r as i64).saturating_add(delta).clamp(0, params.max_reputation as i64);
        *r = v as u32;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{sha256, HashStream, KeyPair};

    fn addr(n: u8) -> Address {
        KeyPair::from_seed(&[n; 32]).unwrap().address(0)
    }

    fn view(stakes: &[(Address, u64, u64)]) -> StakeView {
        let mut entries: Vec<StakeEntry> = stakes
            .iter()
            .enumerate()
            .map(|(i, (a, amt, h))| StakeEntry {
                outpoint: OutPoint::new(sha256(&[i as u8]), 0),
                address: *a,
                staked_amount: *amt,
                stake_height: *h,
                age_origin: *h,
            })
            .collect();
        entries.sort_by_key(|a| (a.address, a.outpoint));
        StakeView { entries }
    }

    #[test]
    fn single_staker_always_wins() {
        let v = view(&[(addr(1), 5, 0)]);
        for r in [0.0, 0.5, 0.999_999] {
            assert_eq!(pos_select_chain(&v, r).unwrap(), addr(1));
        }
        assert_eq!(pos_select_chain(&StakeView::default(), 0.3), Err(NoPublisher));
    }

    #[test]
    fn scaling_stakes_keeps_choices() {
        let a = view(&[(addr(1), 3, 0), (addr(2), 7, 0), (addr(3), 11, 0)]);
        let b = view(&[(addr(1), 3000, 0), (addr(2), 7000, 0), (addr(3), 11000, 0)]);
        let mut s = HashStream::from_u64(9, b"scale");
        for _ in 0..2000 {
            let r = s.next_unit();
            assert_eq!(pos_select_chain(&a, r), pos_select_chain(&b, r));
        }
    }

    #[test]
    fn weighted_pick_boundaries() {
        let w = vec![(addr(1), 1u128), (addr(2), 0), (addr(3), 1)];
        assert_eq!(weighted_pick(&w, 0).unwrap(), addr(1));
        assert_eq!(weighted_pick(&w, (1 << 52) - 1).unwrap(), addr(1));
        assert_eq!(weighted_pick(&w, 1 << 52).unwrap(), addr(3));
        assert_eq!(weighted_pick(&w, (1 << 53) - 1).unwrap(), addr(3));
        let huge = vec![(addr(1), u128::MAX >> 60), (addr(2), u128::MAX >> 60)];
        assert_eq!(weighted_pick(&huge, (1 << 53) - 1).unwrap(), addr(2));
    }

    #[test]
    fn coin_age_threshold_cap_and_reset() {
        let p = PosCoinAgeParams {
            age_threshold: 30,
            weight_cap: 1000,
            block_interval: 10,
        };
        let v = view(&[(addr(1), 100, 0)]);
        assert_eq!(pos_select_coin_age(&v, &p, 29, 0.1), Err(NoPublisher));
        let win = pos_select_coin_age(&v, &p, 30, 0.1).unwrap();
        assert_eq!(win.winner, addr(1));
        assert_eq!(win.reset, vec![v.entries[0].outpoint]);
        assert_eq!(coin_age_weight(&v.entries[0], &p, 30), 1000);
        let mut after = v.clone();
        after.entries[0].age_origin = 30;
        assert_eq!(pos_select_coin_age(&after, &p, 59, 0.1), Err(NoPublisher));
        assert!(pos_select_coin_age(&after, &p, 60, 0.1).is_ok());
    }

    #[test]
    fn round_robin_order_and_skips() {
        let p = RoundRobinParams {
            publishers: vec![addr(1), addr(2), addr(3)],
            ..Default::default()
        };
        let all: Vec<_> = (0..4).map(|h| round_robin_publisher(&p, h, |_| true).unwrap()).collect();
        assert_eq!(all, vec![addr(1), addr(2), addr(3), addr(1)]);
        assert_eq!(round_robin_publisher(&p, 1, |a| *a != addr(2)).unwrap(), addr(3));
        for h in 0..6 {
            assert_eq!(round_robin_publisher(&p, h, |a| *a == addr(3)).unwrap(), addr(3));
        }
        assert_eq!(round_robin_publisher(&p, 0, |_| false), Err(NoPublisher));
        assert_eq!(round_robin_slot(&p, 1, 1), Some(addr(3)));
    }

    #[test]
    fn poa_zero_and_clamp() {
        let mut p = PoaParams::default();
        p.authorities.insert(addr(1), 0);
        p.authorities.insert(addr(2), 10);
        let mut s = HashStream::from_u64(1, b"poa");
        for _ in 0..500 {
            assert_eq!(poa_select(&p, s.next_unit()).unwrap(), addr(2));
        }
        let q = poa_adjust(&p, &addr(2), -200);
        assert_eq!(q.authorities[&addr(2)], 0);
        assert_eq!(poa_select(&q, 0.5), Err(NoPublisher));
        assert_eq!(poa_adjust(&p, &addr(2), 500).authorities[&addr(2)], 100);
    }
}
