//! Publisher selection for each supported model.

pub mod engine;
pub mod params;
pub mod poet;
pub mod pow;
pub mod select;
pub mod tag;

pub use engine::{
    check_header_consensus, check_stake_eligibility, expected_target, parent_target, retarget_window,
    selection_draw, slot_index, slot_publisher, slot_start, ConsensusError, SlotWinner,
};
pub use params::{
    ConsensusParams, Model, PoaParams, PoetParams, PosChainParams, PosCoinAgeParams, PowParams,
    RoundRobinParams, Target,
};
pub use poet::{poet_draw, poet_verify, poet_winner, wait_ticks, PoetCertificate};
pub use pow::{pow_check, pow_mine, pow_retarget, retarget_ratio};
pub use select::{
    coin_age_weight, draw_bits, poa_adjust, poa_select, pos_select_chain, pos_select_coin_age,
    round_robin_publisher, round_robin_slot, weighted_pick, CoinAgeWin, NoPublisher, StakeEntry, StakeView,
};
pub use tag::{sign_header, verify_header_signature, ConsensusTag};
