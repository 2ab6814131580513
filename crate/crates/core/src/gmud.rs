//! Generalized multi-unitary decomposition.
//!
//! Starting from `H = U Λ Vᴴ`, a pair of Givens rotations `W` (left) and `X`
//! (right) turns `Λ` into a lower-triangular block whose leading entry is a
//! prescribed gain `r ∈ [λ_min, λ_max]`:
//!
//! ```text
//! R = Wᴴ Λ X = [ r   0  ]
//!              [ z1  z2 ]
//!              [ 0   0  ]
//! ```
//!
//! Diagonal phase rotations `M₁ = diag(e^{jθ}, 1, …)` and `M₂ = diag(e^{jθ}, 1)`
//! commute through `Λ`, so every `θ` yields a different unitary pair
//! `P = U M₁ W`, `Q = V M₂ X` around the same `R`. The first column of `Q` is
//! the transmission beam of a user.

use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::numkit::{self, CMatrix, SvdResult, C64};

/// Separation below which the two singular values of a rotation pair are
/// treated as equal.
pub const DEGENERATE_GAP: f64 = 1e-12;

/// Tolerance on `r` lying inside the singular-value interval.
pub const INTERVAL_TOL: f64 = 1e-12;

/// Required agreement between `r` and `λ` when the pair is degenerate.
pub const DEGENERATE_R_TOL: f64 = 1e-9;

/// Leading gain `r` of `R` and the phase-rotation direction `θ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GmudParams {
    pub r: f64,
    pub theta: f64,
}

impl GmudParams {
    /// `theta` is wrapped into `[0, 2π)`.
    pub fn new(r: f64, theta: f64) -> Result<Self> {
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::invalid_parameter(format!(
                "gain r must be positive, got {r}"
            )));
        }
        if !theta.is_finite() {
            return Err(Error::invalid_parameter(format!(
                "theta must be finite, got {theta}"
            )));
        }
        Ok(Self {
            r,
            theta: wrap_angle(theta),
        })
    }
}

pub(crate) fn wrap_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if t >= TAU {
        0.0
    } else {
        t
    }
}

/// Givens coefficients of the left (`a`, `b`) and right (`c`, `s`) rotations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RotationCoeffs {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub s: f64,
}

impl RotationCoeffs {
    pub const IDENTITY: RotationCoeffs = RotationCoeffs {
        a: 1.0,
        b: 0.0,
        c: 1.0,
        s: 0.0,
    };
}

/// Solves `a·c·λ₁ + b·s·λ₂ = r`, `a·s·λ₁ − b·c·λ₂ = 0` with `a² + b² = 1` and
/// `c² + s² = 1`, taking the non-negative branch of every coefficient.
pub fn rotation_coeffs(lambda1: f64, lambda2: f64, r: f64) -> Result<RotationCoeffs> {
    if !(lambda1 > 0.0) || !lambda1.is_finite() {
        return Err(Error::invalid_argument(format!(
            "largest singular value must be positive, got {lambda1}"
        )));
    }
    if !(lambda2 >= 0.0) || lambda2 > lambda1 {
        return Err(Error::invalid_argument(format!(
            "singular values must satisfy 0 <= lambda2 <= lambda1, got ({lambda1}, {lambda2})"
        )));
    }
    if lambda1 - lambda2 <= DEGENERATE_GAP {
        if (r - lambda1).abs() > DEGENERATE_R_TOL {
            return Err(Error::invalid_parameter(format!(
                "equal singular values {lambda1}: r must equal them, got {r}"
            )));
        }
        return Ok(RotationCoeffs::IDENTITY);
    }
    let tol = INTERVAL_TOL * lambda1.max(1.0);
    if !(r > 0.0) || r < lambda2 - tol || r > lambda1 + tol {
        return Err(Error::invalid_parameter(format!(
            "r = {r} outside singular-value interval [{lambda2}, {lambda1}]"
        )));
    }
    let r = r.clamp(lambda2, lambda1);

    // Factored differences keep precision when r sits near an endpoint.
    let denom = (lambda1 - lambda2) * (lambda1 + lambda2);
    let a = ((r - lambda2) * (r + lambda2) / denom).sqrt();
    let b = ((lambda1 - r) * (lambda1 + r) / denom).sqrt();
    let c = lambda1 / r * a;
    let s = lambda2 / r * b;
    Ok(RotationCoeffs { a, b, c, s })
}

/// The remaining entries `(z1, z2)` of the 2×2 lower-triangular block.
pub fn r_elements(coeffs: RotationCoeffs, lambda1: f64, lambda2: f64) -> (f64, f64) {
    let RotationCoeffs { a, b, c, s } = coeffs;
    let z1 = b * c * lambda1 - a * s * lambda2;
    let z2 = b * s * lambda1 + a * c * lambda2;
    (z1, z2)
}

/// One member `(P, R, Q)` of the decomposition family, `H = P R Qᴴ`.
#[derive(Clone, Debug)]
pub struct GmudFactors {
    pub p: CMatrix,
    pub r: CMatrix,
    pub q: CMatrix,
    pub params: GmudParams,
    /// Singular values of the decomposed matrix, descending.
    pub singular_values: Vec<f64>,
}

impl GmudFactors {
    pub fn z1(&self) -> f64 {
        self.r[(1, 0)].re
    }

    pub fn z2(&self) -> f64 {
        self.r[(1, 1)].re
    }

    pub fn reconstruct(&self) -> CMatrix {
        &(&self.p * &self.r) * &self.q.adjoint()
    }

    pub fn beam(&self) -> CMatrix {
        self.q.column_matrix(0)
    }
}

/// A matrix with its SVD cached, so that many `(r, θ)` members of the
/// family can be generated cheaply.
#[derive(Clone, Debug)]
pub struct Decomposer {
    svd: SvdResult,
    rows: usize,
    cols: usize,
}

impl Decomposer {
    pub fn new(h: &CMatrix) -> Result<Self> {
        if h.rows() < h.cols() {
            return Err(Error::invalid_argument(format!(
                "GMUD needs at least as many rows as columns, got {}x{}",
                h.rows(),
                h.cols()
            )));
        }
        Ok(Self {
            svd: numkit::svd(h)?,
            rows: h.rows(),
            cols: h.cols(),
        })
    }

    pub fn svd(&self) -> &SvdResult {
        &self.svd
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.svd.singular_values
    }

    /// Admissible range `[λ_min, λ_max]` of the leading gain.
    pub fn r_interval(&self) -> (f64, f64) {
        (self.svd.smallest(), self.svd.largest())
    }

    /// Adjacent singular-value pair `(i, i+1)` bracketing `r`, together with
    /// the rotation coefficients pinning `r` in that plane.
    fn bracket(&self, r: f64) -> Result<(usize, RotationCoeffs)> {
        bracket(&self.svd.singular_values, r)
    }

    /// Full factors. Only two-column matrices have the closed-form
    /// structure; use [`gmud_general`] for more columns.
    pub fn factors(&self, params: GmudParams) -> Result<GmudFactors> {
        if self.cols != 2 {
            return Err(Error::invalid_argument(format!(
                "2x2 GMUD needs exactly two columns, got {}",
                self.cols
            )));
        }
        let (l1, l2) = (self.svd.singular_values[0], self.svd.singular_values[1]);
        let coeffs = rotation_coeffs(l1, l2, params.r)?;
        let (z1, z2) = r_elements(coeffs, l1, l2);

        let m1 = phase_rotation(self.rows, params.theta);
        let m2 = phase_rotation(2, params.theta);
        let w = left_givens(self.rows, coeffs);
        let x = right_givens(2, coeffs);

        let p = &(&self.svd.u * &m1) * &w;
        let q = &(&self.svd.v * &m2) * &x;
        let mut r = CMatrix::zeros(self.rows, 2);
        r[(0, 0)] = C64::new(params.r, 0.0);
        r[(1, 0)] = C64::new(z1, 0.0);
        r[(1, 1)] = C64::new(z2, 0.0);

        Ok(GmudFactors {
            p,
            r,
            q,
            params,
            singular_values: self.svd.singular_values.clone(),
        })
    }

    /// Transmission beam `e^{jθ}·c·v_i − s·v_{i+1}`, the first column of `Q`.
    ///
    /// For two columns this is the first column of [`Self::factors`]; wider
    /// matrices rotate in the plane of the singular pair bracketing `r`, which
    /// is the first step of [`gmud_general`].
    pub fn beam(&self, params: GmudParams) -> Result<Vec<C64>> {
        if self.cols == 1 {
            // Single transmit dimension: only the phase is free.
            let lambda = self.svd.singular_values[0];
            if (params.r - lambda).abs() > DEGENERATE_R_TOL * lambda.max(1.0) {
                return Err(Error::invalid_parameter(format!(
                    "single-column channel admits only r = {lambda}, got {}",
                    params.r
                )));
            }
            return Ok(vec![
                C64::from_polar(1.0, params.theta) * self.svd.v[(0, 0)],
            ]);
        }
        let (i, coeffs) = self.bracket(params.r)?;
        let phase = C64::from_polar(1.0, params.theta);
        let v = &self.svd.v;
        Ok((0..self.cols)
            .map(|row| phase * coeffs.c * v[(row, i)] - coeffs.s * v[(row, i + 1)])
            .collect())
    }
}

fn bracket(lambdas: &[f64], r: f64) -> Result<(usize, RotationCoeffs)> {
    let hi = lambdas[0];
    let lo = *lambdas.last().expect("non-empty spectrum");
    let tol = INTERVAL_TOL * hi.max(1.0);
    if !(r > 0.0) || r > hi + tol || r < lo - tol {
        return Err(Error::invalid_parameter(format!(
            "r = {r} outside singular-value interval [{lo}, {hi}]"
        )));
    }
    let i = (0..lambdas.len() - 1)
        .find(|&i| lambdas[i + 1] <= r)
        .unwrap_or(lambdas.len() - 2);
    let coeffs = rotation_coeffs(lambdas[i], lambdas[i + 1], r)?;
    Ok((i, coeffs))
}

/// `diag(e^{jθ}, 1, …, 1)`.
pub fn phase_rotation(n: usize, theta: f64) -> CMatrix {
    let mut m = CMatrix::identity(n);
    m[(0, 0)] = C64::from_polar(1.0, theta);
    m
}

/// `W` with the real 2×2 block `[[a, b], [−b, a]]` in the top-left corner.
pub fn left_givens(n: usize, coeffs: RotationCoeffs) -> CMatrix {
    givens_block(n, coeffs.a, coeffs.b)
}

/// `X` with the real 2×2 block `[[c, s], [−s, c]]` in the top-left corner.
pub fn right_givens(n: usize, coeffs: RotationCoeffs) -> CMatrix {
    givens_block(n, coeffs.c, coeffs.s)
}

fn givens_block(n: usize, cos: f64, sin: f64) -> CMatrix {
    let mut m = CMatrix::identity(n);
    m[(0, 0)] = C64::new(cos, 0.0);
    m[(0, 1)] = C64::new(sin, 0.0);
    m[(1, 0)] = C64::new(-sin, 0.0);
    m[(1, 1)] = C64::new(cos, 0.0);
    m
}

/// Factorization of a `P_dim`×2 matrix with leading gain `params.r`.
pub fn gmud_2x2(h: &CMatrix, params: GmudParams) -> Result<GmudFactors> {
    if h.cols() != 2 || h.rows() < 2 {
        return Err(Error::invalid_argument(format!(
            "gmud_2x2 needs a P x 2 matrix with P >= 2, got {}x{}",
            h.rows(),
            h.cols()
        )));
    }
    Decomposer::new(h)?.factors(params)
}

/// First column of `Q` for the member `(r, θ)` of `h`'s family.
pub fn beam(h: &CMatrix, params: GmudParams) -> Result<CMatrix> {
    let q = Decomposer::new(h)?.beam(params)?;
    Ok(CMatrix::from_fn(q.len(), 1, |i, _| q[i]))
}

/// Lower-triangular-block factorization with a prescribed diagonal.
///
/// Each step pins the next target on the diagonal by rotating in the plane
/// of the singular pair that brackets it, then recomputes the SVD of the
/// trailing block and continues. `thetas[k]` rotates the phase of step `k`.
pub fn gmud_general(h: &CMatrix, diag_targets: &[f64], thetas: &[f64]) -> Result<GmudFactors> {
    let (rows, cols) = h.shape();
    if cols > rows {
        return Err(Error::invalid_argument(format!(
            "gmud_general needs columns <= rows, got {rows}x{cols}"
        )));
    }
    if diag_targets.len() != cols || thetas.len() != cols {
        return Err(Error::invalid_argument(format!(
            "expected {cols} diagonal targets and phases, got {} and {}",
            diag_targets.len(),
            thetas.len()
        )));
    }
    if let Some(bad) = diag_targets.iter().find(|t| !(**t > 0.0) || !t.is_finite()) {
        return Err(Error::invalid_parameter(format!(
            "diagonal target {bad} is not positive"
        )));
    }
    let svd = numkit::svd(h)?;
    check_majorization(diag_targets, &svd.singular_values)?;

    let (p, r, q) = deflate(h, diag_targets, thetas, 0)?;
    Ok(GmudFactors {
        p,
        r,
        q,
        params: GmudParams::new(diag_targets[0], thetas[0])?,
        singular_values: svd.singular_values,
    })
}

/// Multiplicative majorization: sorted prefix products of the targets must
/// not exceed those of the singular values, with equal full products.
fn check_majorization(targets: &[f64], lambdas: &[f64]) -> Result<()> {
    let mut sorted = targets.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let (mut lhs, mut rhs) = (0.0, 0.0);
    let k = sorted.len();
    for n in 0..k {
        lhs += sorted[n].ln();
        rhs += lambdas[n].ln();
        let slack = 1e-9 * (n + 1) as f64;
        if n + 1 < k && lhs > rhs + slack {
            return Err(Error::invalid_parameter(format!(
                "diagonal targets violate majorization at prefix {}: product {:.6e} > {:.6e}",
                n + 1,
                lhs.exp(),
                rhs.exp()
            )));
        }
        if n + 1 == k && (lhs - rhs).abs() > slack {
            return Err(Error::invalid_parameter(format!(
                "product of diagonal targets {:.6e} differs from product of singular values {:.6e} (prefix {})",
                lhs.exp(),
                rhs.exp(),
                k
            )));
        }
    }
    Ok(())
}

fn deflate(
    a: &CMatrix,
    targets: &[f64],
    thetas: &[f64],
    depth: usize,
) -> Result<(CMatrix, CMatrix, CMatrix)> {
    let (m, n) = a.shape();
    let svd = numkit::svd(a)?;
    let lambdas = &svd.singular_values;

    if n == 1 {
        let lambda = lambdas[0];
        if (targets[0] - lambda).abs() > DEGENERATE_R_TOL * lambda.max(1.0) {
            return Err(Error::invalid_parameter(format!(
                "final diagonal target {} cannot match remaining singular value {lambda}",
                targets[0]
            )));
        }
        let p = &svd.u * &phase_rotation(m, thetas[0]);
        let q = &svd.v * &phase_rotation(1, thetas[0]);
        let r = CMatrix::diag_embed(&[lambda], m, 1)?;
        return Ok((p, r, q));
    }

    let target = targets[0];
    let (i, coeffs) = bracket(lambdas, target).map_err(|e| match e {
        Error::InvalidParameter(msg) => {
            Error::invalid_parameter(format!("diagonal target {}: {msg}", depth + 1))
        }
        other => other,
    })?;
    let (z1, z2) = r_elements(coeffs, lambdas[i], lambdas[i + 1]);

    // Move the bracketing pair to the front; other columns keep their order.
    let mut order: Vec<usize> = vec![i, i + 1];
    order.extend((0..n).filter(|&k| k != i && k != i + 1));
    let u_perm = CMatrix::from_fn(m, m, |row, col| {
        let src = if col < n { order[col] } else { col };
        svd.u[(row, src)]
    });
    let v_perm = CMatrix::from_fn(n, n, |row, col| svd.v[(row, order[col])]);

    let p1 = &(&u_perm * &phase_rotation(m, thetas[0])) * &left_givens(m, coeffs);
    let q1 = &(&v_perm * &phase_rotation(n, thetas[0])) * &right_givens(n, coeffs);

    let mut r1 = CMatrix::zeros(m, n);
    r1[(0, 0)] = C64::new(target, 0.0);
    r1[(1, 0)] = C64::new(z1, 0.0);
    r1[(1, 1)] = C64::new(z2, 0.0);
    for (k, &src) in order.iter().enumerate().skip(2) {
        r1[(k, k)] = C64::new(lambdas[src], 0.0);
    }

    let trailing = r1.block(1, 1, m - 1, n - 1);
    let spill = r1.block(1, 0, m - 1, 1);
    let (p_sub, r_sub, q_sub) = deflate(&trailing, &targets[1..], &thetas[1..], depth + 1)?;

    let p = &p1 * &block_diag_one(&p_sub);
    let q = &q1 * &block_diag_one(&q_sub);
    let spill = &p_sub.adjoint() * &spill;
    let mut r = CMatrix::zeros(m, n);
    r[(0, 0)] = C64::new(target, 0.0);
    for row in 1..m {
        r[(row, 0)] = spill[(row - 1, 0)];
        for col in 1..n {
            r[(row, col)] = r_sub[(row - 1, col - 1)];
        }
    }
    Ok((p, r, q))
}

/// `diag(1, B)`.
fn block_diag_one(b: &CMatrix) -> CMatrix {
    let (m, n) = b.shape();
    CMatrix::from_fn(m + 1, n + 1, |i, j| match (i, j) {
        (0, 0) => C64::new(1.0, 0.0),
        (0, _) | (_, 0) => C64::new(0.0, 0.0),
        _ => b[(i - 1, j - 1)],
    })
}
