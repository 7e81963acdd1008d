//! Quantization-aware linear precoding for the MU-MIMO downlink when the
//! precoder travels over a capacity-limited fronthaul.
//!
//! * [`model`]: system instances, channel draws and the MSE of a precoder.
//! * [`quantizer`]: uniform mid-rise quantizers and their Gaussian step design.
//! * [`precoders`]: Wiener filter and MRT precoders, receiver scalings and the
//!   quantize-then-rescale baseline.
//! * [`qap`]: the quantization-aware precoder as an integer quadratic program
//!   and its exact solvers.
//! * [`evaluation`]: Monte Carlo sum-rate sweeps.

pub mod error;
pub mod evaluation;
pub mod matrix;
pub mod model;
pub mod precoders;
pub mod qap;
pub mod quantizer;

pub use error::{Error, Result};
pub use matrix::{ComplexMatrix, ComplexMatrixDoc};
pub use model::{mse_closed_form, mse_monte_carlo, RngSeed, SystemDims, SystemInstance};
pub use num_complex::Complex64;
pub use precoders::{Alphabet, Beta, PrecoderMatrix};
pub use quantizer::QuantizerSpec;
pub use evaluation::{run_kl_tradeoff, run_sweep, sum_rate, RateReport, RateRow, SchemeId, SweepConfig};
