//! Constructions and checkers for braided poly-tangles, engulfing
//! certificates, isotopy schedulers and exhaustion bookkeeping.

pub mod braid;
pub mod tangle;
pub mod engulf;
pub mod isotopy;
pub mod exhaustion;
pub mod labeling;
pub mod export;
pub mod cli;
