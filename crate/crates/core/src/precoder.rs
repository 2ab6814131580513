//! Multi-user precoding from per-user GMUD beams.
//!
//! Each user `k` contributes the beam `q_k(r_k, θ_k)` scaled by a power
//! factor `α_k`; the precoding matrix is `G = [α_1 q_1, …, α_K q_K]` with
//! `Σ α_k² = 1`. The first rotated component of user `k`'s received block has
//! inverse SINR
//!
//! ```text
//! 1/SINR_k = Σ_{l≠k} α_l² |q_kᴴ q_l|² / α_k²  +  σ² γ̄ / (α_k² r_k²),   γ̄ = Σ α_i²
//! ```
//!
//! [`optimize`] searches `(r_k, θ_k, α_k)` on a deterministic grid followed by
//! coordinate-wise refinement; [`svd_baseline`] steers every user along its
//! principal right singular vector with equal power.

use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::gmud::{self, Decomposer, GmudParams};
use crate::numkit::{self, CMatrix, C64};

/// Grid resolution of the precoder search.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OptimizerConfig {
    pub n_r: usize,
    pub n_theta: usize,
    pub n_power: usize,
    pub refine_iters: usize,
    pub refine_shrink: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            n_r: 8,
            n_theta: 16,
            n_power: 9,
            refine_iters: 2,
            refine_shrink: 0.25,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_r < 2 || self.n_theta < 2 || self.n_power < 2 {
            return Err(Error::invalid_parameter(format!(
                "optimizer grid counts must be >= 2, got n_r={} n_theta={} n_power={}",
                self.n_r, self.n_theta, self.n_power
            )));
        }
        if !(self.refine_shrink > 0.0 && self.refine_shrink < 1.0) {
            return Err(Error::invalid_parameter(format!(
                "refine_shrink must lie in (0, 1), got {}",
                self.refine_shrink
            )));
        }
        Ok(())
    }
}

/// Criterion minimized by the search.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Objective {
    #[default]
    SumInvSinr,
    /// Maximize the smallest SINR (minimize the largest inverse SINR).
    MaxMinSinr,
    /// Maximize the sum of SINRs.
    SumSinr,
}

impl Objective {
    pub fn cost(self, inv_sinr: &[f64]) -> f64 {
        match self {
            Objective::SumInvSinr => inv_sinr.iter().sum(),
            Objective::MaxMinSinr => inv_sinr.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            Objective::SumSinr => -inv_sinr.iter().map(|v| 1.0 / v).sum::<f64>(),
        }
    }
}

/// Beam parameters and amplitude `α` of one user.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UserParams {
    pub r: f64,
    pub theta: f64,
    pub power: f64,
}

#[derive(Clone, Debug)]
pub struct PrecoderSolution {
    /// `M×K` precoding matrix, column `k` is `α_k q_k`.
    pub g: CMatrix,
    pub per_user: Vec<UserParams>,
    /// Expected transmit normalization `Σ α_k²`.
    pub gamma_avg: f64,
    pub predicted_inv_sinr: Vec<f64>,
    /// Objective value at the returned point.
    pub cost: f64,
    /// Objective after the grid stage and after each refinement pass.
    pub cost_history: Vec<f64>,
}

impl PrecoderSolution {
    pub fn users(&self) -> usize {
        self.per_user.len()
    }

    /// Unit-norm beam of user `k`.
    pub fn beam(&self, k: usize) -> Vec<C64> {
        let alpha = self.per_user[k].power;
        self.g.column(k).iter().map(|z| z / alpha).collect()
    }
}

pub(crate) fn beam_overlap(a: &[C64], b: &[C64]) -> f64 {
    numkit::inner(a, b).norm_sqr()
}

/// Per-user inverse SINRs from beam overlaps, gains and squared amplitudes.
/// Shared by every evaluation path so that identical inputs give identical bits.
fn assemble_inv_sinr(
    out: &mut [f64],
    overlap: impl Fn(usize, usize) -> f64,
    gains: &[f64],
    power2: &[f64],
    sigma2: f64,
) {
    let k_users = gains.len();
    let gamma_avg: f64 = power2.iter().sum();
    for k in 0..k_users {
        let interference: f64 = (0..k_users)
            .filter(|&l| l != k)
            .map(|l| power2[l] * overlap(k, l))
            .sum();
        out[k] = interference / power2[k] + sigma2 * gamma_avg / (power2[k] * gains[k] * gains[k]);
    }
}

fn decomposers(channels: &[CMatrix]) -> Result<Vec<Decomposer>> {
    let Some(first) = channels.first() else {
        return Err(Error::invalid_argument("need at least one user channel"));
    };
    let m = first.cols();
    if let Some(bad) = channels.iter().find(|h| h.cols() != m) {
        return Err(Error::invalid_argument(format!(
            "all channels must share {m} transmit dimensions, found {}",
            bad.cols()
        )));
    }
    if channels.len() > m {
        return Err(Error::invalid_argument(format!(
            "{} users exceed {m} transmit dimensions",
            channels.len()
        )));
    }
    channels.iter().map(Decomposer::new).collect()
}

fn check_params(params: &[UserParams], users: usize, sigma2: f64) -> Result<()> {
    if params.len() != users {
        return Err(Error::invalid_argument(format!(
            "{} parameter sets for {users} users",
            params.len()
        )));
    }
    if !(sigma2 >= 0.0) {
        return Err(Error::invalid_parameter(format!(
            "noise variance must be >= 0, got {sigma2}"
        )));
    }
    for (k, p) in params.iter().enumerate() {
        if !(p.r > 0.0) || !(p.power > 0.0) {
            return Err(Error::invalid_parameter(format!(
                "user {k}: gain r = {} and amplitude = {} must both be positive",
                p.r, p.power
            )));
        }
    }
    Ok(())
}

/// Predicted inverse SINR of every user.
pub fn inv_sinr_per_user(
    channels: &[CMatrix],
    params: &[UserParams],
    sigma2: f64,
) -> Result<Vec<f64>> {
    let decomposers = decomposers(channels)?;
    check_params(params, channels.len(), sigma2)?;
    let beams = params
        .iter()
        .zip(&decomposers)
        .map(|(p, d)| d.beam(GmudParams::new(p.r, p.theta)?))
        .collect::<Result<Vec<_>>>()?;
    let gains: Vec<f64> = params.iter().map(|p| p.r).collect();
    let power2: Vec<f64> = params.iter().map(|p| p.power * p.power).collect();
    let mut out = vec![0.0; params.len()];
    assemble_inv_sinr(
        &mut out,
        |k, l| beam_overlap(&beams[k], &beams[l]),
        &gains,
        &power2,
        sigma2,
    );
    Ok(out)
}

/// Sum of per-user inverse SINRs, the default search objective.
pub fn inv_sinr_sum(channels: &[CMatrix], params: &[UserParams], sigma2: f64) -> Result<f64> {
    Ok(inv_sinr_per_user(channels, params, sigma2)?.iter().sum())
}

/// `n` points from `lo` to `hi` inclusive; the last point is exactly `hi`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            if i + 1 == n {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            }
        })
        .collect()
}

/// `θ_i = 2π i / n`, `i < n`.
pub fn theta_grid(n: usize) -> Vec<f64> {
    (0..n).map(|i| TAU * i as f64 / n as f64).collect()
}

/// Squared amplitudes on the simplex: every composition of `n + 1` into
/// `users` positive parts, in lexicographic order, divided by `n + 1`.
/// For two users this is `α₁² ∈ {1/(n+1), …, n/(n+1)}`.
pub fn power_grid(users: usize, n: usize) -> Vec<Vec<f64>> {
    fn compose(rest: usize, slots: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if slots == 1 {
            prefix.push(rest);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for part in 1..=(rest - (slots - 1)) {
            prefix.push(part);
            compose(rest - part, slots - 1, prefix, out);
            prefix.pop();
        }
    }
    let total = n + 1;
    if users > total {
        return Vec::new();
    }
    let mut parts = Vec::new();
    compose(total, users, &mut Vec::new(), &mut parts);
    parts
        .into_iter()
        .map(|p| p.into_iter().map(|x| x as f64 / total as f64).collect())
        .collect()
}

/// The SVD-precoding operating point: `r_k = λ_1`, `θ_k = 0`, equal power.
fn svd_point(decomposers: &[Decomposer]) -> Vec<UserParams> {
    let power = (1.0 / decomposers.len() as f64).sqrt();
    decomposers
        .iter()
        .map(|d| UserParams {
            r: d.r_interval().1,
            theta: 0.0,
            power,
        })
        .collect()
}

struct Search<'a> {
    decomposers: &'a [Decomposer],
    sigma2: f64,
    objective: Objective,
    scratch: Vec<f64>,
}

impl Search<'_> {
    fn cost_of_beams(&mut self, beams: &[Vec<C64>], gains: &[f64], power2: &[f64]) -> f64 {
        assemble_inv_sinr(
            &mut self.scratch,
            |k, l| beam_overlap(&beams[k], &beams[l]),
            gains,
            power2,
            self.sigma2,
        );
        self.objective.cost(&self.scratch)
    }

    fn cost_of(&mut self, params: &[UserParams]) -> Result<f64> {
        let beams = params
            .iter()
            .zip(self.decomposers)
            .map(|(p, d)| d.beam(GmudParams::new(p.r, p.theta)?))
            .collect::<Result<Vec<_>>>()?;
        let gains: Vec<f64> = params.iter().map(|p| p.r).collect();
        let power2: Vec<f64> = params.iter().map(|p| p.power * p.power).collect();
        Ok(self.cost_of_beams(&beams, &gains, &power2))
    }
}

/// Minimizes the sum of inverse SINRs over `(r_k, θ_k, α_k)`.
pub fn optimize(
    channels: &[CMatrix],
    sigma2: f64,
    config: &OptimizerConfig,
) -> Result<PrecoderSolution> {
    optimize_with(channels, sigma2, config, Objective::SumInvSinr)
}

/// Grid search plus coordinate refinement for any [`Objective`].
///
/// The grid visits `(r_1, θ_1, r_2, θ_2, …, power)` in lexicographic order
/// with the power split varying fastest, and a point replaces the incumbent
/// only if strictly better, so ties go to the earliest grid point. The SVD
/// operating point is evaluated after the grid, which guarantees the result
/// is never worse than SVD precoding even when it is off-grid.
///
/// Refinement pass `p` re-searches each coordinate in turn on the same
/// number of points spread over a window of `refine_shrink^p` times the full
/// coordinate range, centred on the incumbent.
pub fn optimize_with(
    channels: &[CMatrix],
    sigma2: f64,
    config: &OptimizerConfig,
    objective: Objective,
) -> Result<PrecoderSolution> {
    config.validate()?;
    if !(sigma2 >= 0.0) {
        return Err(Error::invalid_parameter(format!(
            "noise variance must be >= 0, got {sigma2}"
        )));
    }
    let decomposers = decomposers(channels)?;
    let users = decomposers.len();
    let mut search = Search {
        decomposers: &decomposers,
        sigma2,
        objective,
        scratch: vec![0.0; users],
    };

    // Per-user beam tables indexed by r_index * n_theta + theta_index.
    let thetas = theta_grid(config.n_theta);
    let mut r_grids = Vec::with_capacity(users);
    let mut tables: Vec<Vec<Vec<C64>>> = Vec::with_capacity(users);
    for d in &decomposers {
        let (lo, hi) = d.r_interval();
        let rs = linspace(lo, hi, config.n_r);
        let mut table = Vec::with_capacity(config.n_r * config.n_theta);
        for &r in &rs {
            for &theta in &thetas {
                table.push(d.beam(GmudParams::new(r, theta)?)?);
            }
        }
        r_grids.push(rs);
        tables.push(table);
    }
    let cells = config.n_r * config.n_theta;

    // Pairwise overlap tables, overlaps[k][l][a * cells + b] for k < l.
    let mut overlaps = vec![vec![Vec::new(); users]; users];
    for k in 0..users {
        for l in (k + 1)..users {
            let mut t = Vec::with_capacity(cells * cells);
            for a in &tables[k] {
                for b in &tables[l] {
                    t.push(beam_overlap(a, b));
                }
            }
            overlaps[k][l] = t;
        }
    }

    // Amplitudes are what a solution stores, so evaluate their squares rather
    // than the grid shares to keep reported and recomputed costs bit-identical.
    let amplitudes: Vec<Vec<f64>> = power_grid(users, config.n_power)
        .into_iter()
        .map(|p| p.into_iter().map(f64::sqrt).collect())
        .collect();
    let powers: Vec<Vec<f64>> = amplitudes
        .iter()
        .map(|a| a.iter().map(|x| x * x).collect())
        .collect();
    let mut best_cost = f64::INFINITY;
    let mut best: Option<(Vec<usize>, usize)> = None;
    let mut idx = vec![0usize; users];
    let mut gains = vec![0.0; users];
    let mut inv = vec![0.0; users];
    'grid: loop {
        for k in 0..users {
            gains[k] = r_grids[k][idx[k] / config.n_theta];
        }
        let overlap = |k: usize, l: usize| {
            let (a, b) = if k < l { (k, l) } else { (l, k) };
            overlaps[a][b][idx[a] * cells + idx[b]]
        };
        for (pi, power2) in powers.iter().enumerate() {
            assemble_inv_sinr(&mut inv, overlap, &gains, power2, sigma2);
            let cost = objective.cost(&inv);
            if cost < best_cost {
                best_cost = cost;
                best = Some((idx.clone(), pi));
            }
        }
        // advance the mixed-radix counter, last user fastest
        for k in (0..users).rev() {
            idx[k] += 1;
            if idx[k] < cells {
                continue 'grid;
            }
            idx[k] = 0;
        }
        break;
    }

    let mut incumbent: Vec<UserParams> = match &best {
        Some((cell_idx, pi)) => (0..users)
            .map(|k| UserParams {
                r: r_grids[k][cell_idx[k] / config.n_theta],
                theta: thetas[cell_idx[k] % config.n_theta],
                power: amplitudes[*pi][k],
            })
            .collect(),
        None => svd_point(&decomposers),
    };
    if best.is_none() {
        best_cost = search.cost_of(&incumbent)?;
    }

    let svd_params = svd_point(&decomposers);
    let svd_cost = search.cost_of(&svd_params)?;
    if svd_cost < best_cost {
        best_cost = svd_cost;
        incumbent = svd_params;
    }

    let mut history = vec![best_cost];
    for pass in 1..=config.refine_iters {
        let width = config.refine_shrink.powi(pass as i32);
        for k in 0..users {
            let (lo, hi) = decomposers[k].r_interval();
            let centre = incumbent[k].r;
            let half = 0.5 * width * (hi - lo);
            let candidates = linspace((centre - half).max(lo), (centre + half).min(hi), config.n_r);
            for r in candidates {
                let mut trial = incumbent.clone();
                trial[k].r = r;
                let cost = search.cost_of(&trial)?;
                if cost < best_cost {
                    best_cost = cost;
                    incumbent = trial;
                }
            }

            let centre = incumbent[k].theta;
            let half = 0.5 * width * TAU;
            for theta in linspace(centre - half, centre + half, config.n_theta) {
                let mut trial = incumbent.clone();
                trial[k].theta = gmud::wrap_angle(theta);
                let cost = search.cost_of(&trial)?;
                if cost < best_cost {
                    best_cost = cost;
                    incumbent = trial;
                }
            }
        }
        // Move one user's share of power, rescaling the others proportionally.
        for k in 0..users.saturating_sub(1) {
            let current = incumbent[k].power * incumbent[k].power;
            let half = 0.5 * width;
            let floor = 0.5 / (config.n_power + 1) as f64 * width;
            let lo = (current - half).max(floor);
            let hi = (current + half).min(1.0 - floor);
            if !(hi > lo) {
                continue;
            }
            let base = incumbent.clone();
            for share in linspace(lo, hi, config.n_power) {
                let rest = (1.0 - share) / (1.0 - current);
                let mut trial = base.clone();
                for (j, p) in trial.iter_mut().enumerate() {
                    let p2 = if j == k {
                        share
                    } else {
                        p.power * p.power * rest
                    };
                    p.power = p2.sqrt();
                }
                let cost = search.cost_of(&trial)?;
                if cost < best_cost {
                    best_cost = cost;
                    incumbent = trial;
                }
            }
        }
        history.push(best_cost);
    }

    build_solution(&decomposers, incumbent, sigma2, best_cost, history)
}

fn build_solution(
    decomposers: &[Decomposer],
    per_user: Vec<UserParams>,
    sigma2: f64,
    cost: f64,
    cost_history: Vec<f64>,
) -> Result<PrecoderSolution> {
    let users = per_user.len();
    let m = decomposers[0].svd().v.rows();
    let mut g = CMatrix::zeros(m, users);
    let mut beams = Vec::with_capacity(users);
    for (k, (p, d)) in per_user.iter().zip(decomposers).enumerate() {
        let q = d.beam(GmudParams::new(p.r, p.theta)?)?;
        let col: Vec<C64> = q.iter().map(|z| z * p.power).collect();
        g.set_column(k, &col);
        beams.push(q);
    }
    let gains: Vec<f64> = per_user.iter().map(|p| p.r).collect();
    let power2: Vec<f64> = per_user.iter().map(|p| p.power * p.power).collect();
    let mut predicted = vec![0.0; users];
    assemble_inv_sinr(
        &mut predicted,
        |k, l| beam_overlap(&beams[k], &beams[l]),
        &gains,
        &power2,
        sigma2,
    );
    Ok(PrecoderSolution {
        g,
        per_user,
        gamma_avg: power2.iter().sum(),
        predicted_inv_sinr: predicted,
        cost,
        cost_history,
    })
}

/// Principal right singular vector per user with equal power; the predicted
/// inverse SINRs use the same formula as the GMUD search.
pub fn svd_baseline(channels: &[CMatrix], sigma2: f64) -> Result<PrecoderSolution> {
    svd_baseline_with(channels, sigma2, Objective::SumInvSinr)
}

pub fn svd_baseline_with(
    channels: &[CMatrix],
    sigma2: f64,
    objective: Objective,
) -> Result<PrecoderSolution> {
    if !(sigma2 >= 0.0) {
        return Err(Error::invalid_parameter(format!(
            "noise variance must be >= 0, got {sigma2}"
        )));
    }
    let decomposers = decomposers(channels)?;
    let params = svd_point(&decomposers);
    let mut search = Search {
        decomposers: &decomposers,
        sigma2,
        objective,
        scratch: vec![0.0; params.len()],
    };
    let cost = search.cost_of(&params)?;
    build_solution(&decomposers, params, sigma2, cost, vec![cost])
}

/// `x = G u / √γ` with `γ = ‖G u‖²`, so that `‖x‖ = 1`.
pub fn normalize_and_transmit(g: &CMatrix, u: &CMatrix) -> Result<(CMatrix, f64)> {
    if u.frobenius_norm() == 0.0 {
        return Err(Error::invalid_argument("symbol vector is zero"));
    }
    let gu = g.matmul(u)?;
    let gamma = gu.as_slice().iter().map(|z| z.norm_sqr()).sum::<f64>();
    if !(gamma > 0.0) {
        return Err(Error::degenerate("precoded block has zero energy"));
    }
    Ok((gu.scale(C64::new(1.0 / gamma.sqrt(), 0.0)), gamma))
}
