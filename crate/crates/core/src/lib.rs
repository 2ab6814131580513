//! Generalized multi-unitary decomposition (GMUD) and GMUD-based multi-user
//! precoding for single-carrier transmission over frequency-selective SISO
//! channels.
//!
//! The crate is layered bottom-up:
//!
//! - [`numkit`]: small dense complex matrices, SVD, Hermitian solves.
//! - [`gmud`]: the `H = P R Qᴴ` factorization family with a prescribed
//!   leading gain `r` and phase parameter `θ`, plus per-user beams.
//! - [`channel`]: Toeplitz convolution matrices and seeded fading draws.
//! - [`precoder`]: sum-of-inverse-SINR cost, grid search, SVD baseline.
//! - [`link`]: modulation, block transmission, MMSE reception, error counts.
//! - [`sim`]: experiment configuration, parallel SNR sweeps, CSV output.

// `!(x > 0.0)` style guards deliberately reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod error;
pub mod gmud;
pub mod link;
pub mod numkit;
pub mod precoder;
pub mod sim;
pub mod streams;

pub use error::{ConfigError, Error, Result};
pub use numkit::{CMatrix, SvdResult, C64};
