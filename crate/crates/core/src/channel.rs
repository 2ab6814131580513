//! Channel models: the convolution (Toeplitz) matrix of a multipath SISO
//! channel and seeded Rayleigh draws for both the multipath and the MIMO
//! flat-fading ensembles.

use crate::error::{Error, Result};
use crate::numkit::{self, CMatrix, C64};
use crate::streams::{self, Domain};

/// Impulse response `h[0..M]` of one user's SISO channel.
#[derive(Clone, Debug, PartialEq)]
pub struct MultipathChannel {
    pub taps: Vec<C64>,
    pub user_index: usize,
}

impl MultipathChannel {
    pub fn new(taps: Vec<C64>, user_index: usize) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::invalid_argument("channel needs at least one tap"));
        }
        if taps.iter().any(|t| !t.is_finite()) {
            return Err(Error::invalid_argument("channel taps must be finite"));
        }
        Ok(Self { taps, user_index })
    }

    pub fn paths(&self) -> usize {
        self.taps.len()
    }

    pub fn toeplitz(&self) -> CMatrix {
        toeplitz(self)
    }
}

/// `(2M−1)×M` matrix whose column `j` is the impulse response delayed by `j`
/// samples, so that `toeplitz(h)·x` is the full linear convolution `h * x`.
pub fn toeplitz(ch: &MultipathChannel) -> CMatrix {
    let m = ch.paths();
    CMatrix::from_fn(2 * m - 1, m, |i, j| match i.checked_sub(j) {
        Some(lag) if lag < m => ch.taps[lag],
        _ => C64::new(0.0, 0.0),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChannelKind {
    /// Single-antenna users behind an `paths`-tap frequency-selective channel.
    SisoMultipath { paths: usize },
    /// `rx`×`tx` flat-fading MIMO channel per user.
    MimoFlat { tx: usize, rx: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ChannelEnsembleSpec {
    pub kind: ChannelKind,
    pub users: usize,
    pub seed: u64,
}

impl ChannelEnsembleSpec {
    /// Equal-gain multipath ensemble; requires at least as many paths as users.
    pub fn siso(users: usize, paths: usize, seed: u64) -> Result<Self> {
        if users == 0 || paths == 0 {
            return Err(Error::invalid_argument("users and paths must be positive"));
        }
        if paths < users {
            return Err(Error::invalid_argument(format!(
                "multipath precoding needs paths M >= users K, got M = {paths}, K = {users}"
            )));
        }
        Ok(Self {
            kind: ChannelKind::SisoMultipath { paths },
            users,
            seed,
        })
    }

    pub fn mimo(users: usize, tx: usize, rx: usize, seed: u64) -> Result<Self> {
        if users == 0 || tx == 0 || rx == 0 {
            return Err(Error::invalid_argument(
                "users and antenna counts must be positive",
            ));
        }
        Ok(Self {
            kind: ChannelKind::MimoFlat { tx, rx },
            users,
            seed,
        })
    }

    /// Number of transmit dimensions the precoder works with.
    pub fn transmit_dim(&self) -> usize {
        match self.kind {
            ChannelKind::SisoMultipath { paths } => paths,
            ChannelKind::MimoFlat { tx, .. } => tx,
        }
    }
}

/// One channel per user with i.i.d. `CN(0, 1/M)` taps (unit total power).
pub fn draw_siso_multipath(
    spec: &ChannelEnsembleSpec,
    trial: u64,
) -> Result<Vec<MultipathChannel>> {
    let ChannelKind::SisoMultipath { paths } = spec.kind else {
        return Err(Error::invalid_argument(
            "draw_siso_multipath called on a MIMO ensemble",
        ));
    };
    let variance = 1.0 / paths as f64;
    (0..spec.users)
        .map(|user| {
            let mut rng = streams::derive(spec.seed, Domain::SisoTaps, trial, user as u64);
            let taps = (0..paths)
                .map(|_| streams::complex_gaussian(&mut rng, variance))
                .collect();
            MultipathChannel::new(taps, user)
        })
        .collect()
}

/// One `rx`×`tx` matrix per user with i.i.d. `CN(0, 1)` entries.
pub fn draw_mimo_flat(spec: &ChannelEnsembleSpec, trial: u64) -> Result<Vec<CMatrix>> {
    let ChannelKind::MimoFlat { tx, rx } = spec.kind else {
        return Err(Error::invalid_argument(
            "draw_mimo_flat called on a multipath ensemble",
        ));
    };
    (0..spec.users)
        .map(|user| {
            let mut rng = streams::derive(spec.seed, Domain::MimoEntries, trial, user as u64);
            let data = (0..rx * tx)
                .map(|_| streams::complex_gaussian(&mut rng, 1.0))
                .collect();
            CMatrix::new(rx, tx, data)
        })
        .collect()
}

/// Per-user channel matrices of either kind (Toeplitz for multipath).
pub fn draw_matrices(spec: &ChannelEnsembleSpec, trial: u64) -> Result<Vec<CMatrix>> {
    match spec.kind {
        ChannelKind::SisoMultipath { .. } => Ok(draw_siso_multipath(spec, trial)?
            .iter()
            .map(toeplitz)
            .collect()),
        ChannelKind::MimoFlat { .. } => draw_mimo_flat(spec, trial),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConditionStats {
    pub median: f64,
    pub mean: f64,
    /// Number of matrices aggregated (trials × users).
    pub samples: usize,
}

/// Median and mean condition number over `trials` draws of every user.
pub fn condition_stats(spec: &ChannelEnsembleSpec, trials: u64) -> Result<ConditionStats> {
    if trials == 0 {
        return Err(Error::invalid_argument(
            "condition_stats needs at least one trial",
        ));
    }
    let mut conds = Vec::with_capacity(trials as usize * spec.users);
    for trial in 0..trials {
        for h in draw_matrices(spec, trial)? {
            conds.push(numkit::condition_number(&h)?);
        }
    }
    let mean = conds.iter().sum::<f64>() / conds.len() as f64;
    conds.sort_by(f64::total_cmp);
    let n = conds.len();
    let median = if n % 2 == 1 {
        conds[n / 2]
    } else {
        0.5 * (conds[n / 2 - 1] + conds[n / 2])
    };
    Ok(ConditionStats {
        median,
        mean,
        samples: n,
    })
}
