//! Link-level simulation of one precoded block: Gray-mapped symbols, the
//! block channel `y_k = H_k x + n_k`, the linear MMSE receiver, and error and
//! SINR bookkeeping.

use rand::Rng;

use crate::error::{Error, Result};
use crate::gmud::GmudFactors;
use crate::numkit::{self, CMatrix, C64};
use crate::precoder::normalize_and_transmit;
use crate::streams;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Modulation {
    Qpsk,
    Qam16,
}

impl Modulation {
    pub fn bits_per_symbol(self) -> usize {
        match self {
            Modulation::Qpsk => 2,
            Modulation::Qam16 => 4,
        }
    }
}

/// Unit-energy constellation. `points[label]` is the symbol for the bit
/// pattern `label`, most significant bit first.
///
/// QPSK: bit 0 picks the sign of the in-phase part and bit 1 the quadrature
/// part, `0 → +`, so `00 → (1 + j)/√2`. 16QAM: bits 0–1 and 2–3 each select a
/// level on one axis through the Gray code `00 → +3, 01 → +1, 11 → −1,
/// 10 → −3`, scaled by `1/√10`.
#[derive(Clone, Debug, PartialEq)]
pub struct Constellation {
    pub kind: Modulation,
    pub points: Vec<C64>,
    pub bits_per_symbol: usize,
}

fn gray_level(bits: usize) -> f64 {
    match bits {
        0b00 => 3.0,
        0b01 => 1.0,
        0b11 => -1.0,
        _ => -3.0,
    }
}

impl Constellation {
    pub fn new(kind: Modulation) -> Self {
        let bits_per_symbol = kind.bits_per_symbol();
        let points = match kind {
            Modulation::Qpsk => {
                let a = 0.5f64.sqrt();
                (0..4)
                    .map(|label| {
                        let i = if label & 0b10 == 0 { a } else { -a };
                        let q = if label & 0b01 == 0 { a } else { -a };
                        C64::new(i, q)
                    })
                    .collect()
            }
            Modulation::Qam16 => {
                let scale = 10f64.sqrt().recip();
                (0..16)
                    .map(|label| {
                        C64::new(
                            gray_level(label >> 2) * scale,
                            gray_level(label & 0b11) * scale,
                        )
                    })
                    .collect()
            }
        };
        Self {
            kind,
            points,
            bits_per_symbol,
        }
    }

    fn label_of(&self, bits: &[u8]) -> usize {
        bits.iter()
            .fold(0, |acc, &b| (acc << 1) | usize::from(b & 1))
    }

    pub fn modulate(&self, bits: &[u8]) -> Result<Vec<C64>> {
        if !bits.len().is_multiple_of(self.bits_per_symbol) {
            return Err(Error::invalid_argument(format!(
                "{} bits do not fill whole {}-bit symbols",
                bits.len(),
                self.bits_per_symbol
            )));
        }
        Ok(bits
            .chunks_exact(self.bits_per_symbol)
            .map(|chunk| self.points[self.label_of(chunk)])
            .collect())
    }

    /// Label of the nearest constellation point.
    pub fn slice(&self, z: C64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (label, p) in self.points.iter().enumerate() {
            let d = (z - p).norm_sqr();
            if d < best_d {
                best_d = d;
                best = label;
            }
        }
        best
    }

    pub fn demodulate(&self, estimates: &[C64]) -> Vec<u8> {
        let n = self.bits_per_symbol;
        let mut out = Vec::with_capacity(estimates.len() * n);
        for &z in estimates {
            let label = self.slice(z);
            for b in (0..n).rev() {
                out.push(((label >> b) & 1) as u8);
            }
        }
        out
    }
}

/// One transmitted block and what every user received.
#[derive(Clone, Debug)]
pub struct Transmission {
    pub x: CMatrix,
    pub gamma: f64,
    pub received: Vec<CMatrix>,
}

/// `y_k = H_k (G u / √γ) + n_k` for every user, with `n_k ~ CN(0, σ² I)`.
pub fn transmit_block<R: Rng + ?Sized>(
    channels: &[CMatrix],
    g: &CMatrix,
    u: &CMatrix,
    sigma2: f64,
    rng: &mut R,
) -> Result<Transmission> {
    if !(sigma2 >= 0.0) {
        return Err(Error::invalid_parameter(format!(
            "noise variance must be >= 0, got {sigma2}"
        )));
    }
    let (x, gamma) = normalize_and_transmit(g, u)?;
    let received = channels
        .iter()
        .map(|h| {
            let mut y = h.matmul(&x)?;
            if sigma2 > 0.0 {
                for i in 0..y.rows() {
                    y[(i, 0)] += streams::complex_gaussian(rng, sigma2);
                }
            }
            Ok(y)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Transmission { x, gamma, received })
}

/// `H̃ = H G / √γ`.
pub fn effective_channel(h: &CMatrix, g: &CMatrix, gamma: f64) -> Result<CMatrix> {
    if !(gamma > 0.0) {
        return Err(Error::invalid_parameter(format!(
            "normalization gamma must be positive, got {gamma}"
        )));
    }
    Ok(h.matmul(g)?.scale(C64::new(gamma.sqrt().recip(), 0.0)))
}

/// MMSE estimate together with the end-to-end gain `F H̃` of the filter
/// `F = (H̃ᴴH̃ + σ²I)⁻¹ H̃ᴴ`.
#[derive(Clone, Debug)]
pub struct MmseOutput {
    pub estimate: CMatrix,
    pub gains: CMatrix,
}

pub fn mmse_detect(y: &CMatrix, h_eff: &CMatrix, sigma2: f64) -> Result<MmseOutput> {
    let k = h_eff.cols();
    let hh = h_eff.adjoint();
    let mut normal = &hh * h_eff;
    for i in 0..k {
        normal[(i, i)] += sigma2;
    }
    // Solve for the estimate and the gain matrix in one factorization.
    let hy = hh.matmul(y)?;
    let hhh = &hh * h_eff;
    let rhs = CMatrix::from_fn(
        k,
        1 + k,
        |i, j| if j == 0 { hy[(i, 0)] } else { hhh[(i, j - 1)] },
    );
    let sol = numkit::hermitian_solve(&normal, &rhs)?;
    Ok(MmseOutput {
        estimate: sol.block(0, 0, k, 1),
        gains: sol.block(0, 1, k, k),
    })
}

/// `û = (H̃ᴴH̃ + σ²I)⁻¹ H̃ᴴ y_k` with `H̃ = H_k G / √γ`; user `k` keeps entry `k`.
pub fn mmse_estimate(
    y: &CMatrix,
    h: &CMatrix,
    g: &CMatrix,
    gamma: f64,
    sigma2: f64,
) -> Result<CMatrix> {
    let h_eff = effective_channel(h, g, gamma)?;
    Ok(mmse_detect(y, &h_eff, sigma2)?.estimate)
}

/// User `k`'s noiseless received block rebuilt from its decomposition
/// `H_k = P R Qᴴ`:
///
/// ```text
/// y_k = P [ r·t₁ ; z₁·t₁ + z₂·t₂ ; 0 ] / √γ,   t_i = Σ_l (q_iᴴ g_l) u_l
/// ```
///
/// where `t₁` carries the desired symbol plus the interference seen through
/// the user's beam and the second component mixes both users' symbols.
pub fn rotated_received(
    factors: &GmudFactors,
    g: &CMatrix,
    u: &CMatrix,
    gamma: f64,
) -> Result<CMatrix> {
    if factors.q.cols() != 2 || g.rows() != 2 || u.rows() != g.cols() {
        return Err(Error::invalid_argument(
            "rotated form needs two transmit dimensions",
        ));
    }
    let q1 = factors.q.column(0);
    let q2 = factors.q.column(1);
    let (mut t1, mut t2) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
    for l in 0..g.cols() {
        let gl = g.column(l);
        t1 += numkit::inner(&q1, &gl) * u[(l, 0)];
        t2 += numkit::inner(&q2, &gl) * u[(l, 0)];
    }
    let mut rotated = CMatrix::zeros(factors.p.rows(), 1);
    rotated[(0, 0)] = t1 * factors.params.r;
    rotated[(1, 0)] = t1 * factors.z1() + t2 * factors.z2();
    let y = factors.p.matmul(&rotated)?;
    Ok(y.scale(C64::new(gamma.sqrt().recip(), 0.0)))
}

/// Per-user outcome of one block.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct UserRecord {
    pub bit_errors: u64,
    pub symbol_error: bool,
    /// `|(F H̃)_kk u_k|²`, the desired term at the MMSE output.
    pub signal_power: f64,
    /// `|û_k − (F H̃)_kk u_k|²`, interference plus noise at the MMSE output.
    pub residual_power: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BlockRecord {
    pub users: Vec<UserRecord>,
}

/// Sends one block of random symbols and detects every user's own symbol.
pub fn run_block<R: Rng + ?Sized>(
    channels: &[CMatrix],
    g: &CMatrix,
    constellation: &Constellation,
    sigma2: f64,
    rng: &mut R,
) -> Result<BlockRecord> {
    let users = g.cols();
    if channels.len() != users {
        return Err(Error::invalid_argument(format!(
            "{} channels for a {users}-user precoder",
            channels.len()
        )));
    }
    let nbits = constellation.bits_per_symbol;
    let bits: Vec<u8> = (0..users * nbits)
        .map(|_| u8::from(rng.random::<bool>()))
        .collect();
    let symbols = constellation.modulate(&bits)?;
    let u = CMatrix::column_vector(&symbols)?;
    let tx = transmit_block(channels, g, &u, sigma2, rng)?;

    let mut records = Vec::with_capacity(users);
    for (k, (h, y)) in channels.iter().zip(&tx.received).enumerate() {
        let h_eff = effective_channel(h, g, tx.gamma)?;
        let out = mmse_detect(y, &h_eff, sigma2)?;
        let estimate = out.estimate[(k, 0)];
        let direct = out.gains[(k, k)] * symbols[k];
        let detected = constellation.demodulate(&[estimate]);
        let sent = &bits[k * nbits..(k + 1) * nbits];
        let bit_errors = detected.iter().zip(sent).filter(|(a, b)| a != b).count() as u64;
        records.push(UserRecord {
            bit_errors,
            symbol_error: bit_errors > 0,
            signal_power: direct.norm_sqr(),
            residual_power: (estimate - direct).norm_sqr(),
        });
    }
    Ok(BlockRecord { users: records })
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinkResult {
    pub bit_errors: u64,
    pub bits_sent: u64,
    pub symbol_errors: u64,
    pub symbols_sent: u64,
    /// Mean desired power over mean residual power at each user's MMSE output.
    pub measured_sinr_per_user: Vec<f64>,
}

impl LinkResult {
    pub fn ber(&self) -> f64 {
        self.bit_errors as f64 / self.bits_sent as f64
    }

    pub fn ser(&self) -> f64 {
        self.symbol_errors as f64 / self.symbols_sent as f64
    }
}

/// Aggregates block records into error counts and measured SINRs.
pub fn measure(records: &[BlockRecord], bits_per_symbol: usize) -> Result<LinkResult> {
    let Some(first) = records.first() else {
        return Err(Error::invalid_argument("measure needs at least one block"));
    };
    let users = first.users.len();
    let mut signal = vec![0.0; users];
    let mut residual = vec![0.0; users];
    let mut result = LinkResult::default();
    for block in records {
        if block.users.len() != users {
            return Err(Error::invalid_argument("blocks disagree on user count"));
        }
        for (k, rec) in block.users.iter().enumerate() {
            result.bit_errors += rec.bit_errors;
            result.bits_sent += bits_per_symbol as u64;
            result.symbol_errors += u64::from(rec.symbol_error);
            result.symbols_sent += 1;
            signal[k] += rec.signal_power;
            residual[k] += rec.residual_power;
        }
    }
    result.measured_sinr_per_user = signal.iter().zip(&residual).map(|(s, r)| s / r).collect();
    Ok(result)
}
