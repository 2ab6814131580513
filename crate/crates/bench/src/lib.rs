//! Fixtures shared by the benchmarks.

use gmud::channel::{self, ChannelEnsembleSpec};
use gmud::CMatrix;

/// Two users behind two-tap channels, drawn from a fixed seed.
pub fn siso_pair(trial: u64) -> Vec<CMatrix> {
    let spec = ChannelEnsembleSpec::siso(2, 2, 2024).expect("valid ensemble");
    channel::draw_matrices(&spec, trial).expect("draw succeeds")
}

/// `users` users behind `paths`-tap channels.
pub fn siso_users(users: usize, paths: usize, trial: u64) -> Vec<CMatrix> {
    let spec = ChannelEnsembleSpec::siso(users, paths, 2024).expect("valid ensemble");
    channel::draw_matrices(&spec, trial).expect("draw succeeds")
}
