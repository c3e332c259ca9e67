//! Dense linear algebra, FFT, deterministic RNG, and a small symmetric
//! eigensolver. Everything is `f64` and single-threaded; all operations are
//! pure functions over their inputs.

mod eig;
mod fft;
pub(crate) mod matrix;
mod rng;

pub use eig::symmetric_eigh_topk;
pub use fft::{direct_causal_conv, fft_causal_conv, fft_inplace};
pub use matrix::Matrix;
pub use rng::RngStream;
