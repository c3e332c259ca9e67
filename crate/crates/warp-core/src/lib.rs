//! Weight-space linear RNN for sequence modeling.
//!
//! The hidden state of the recurrence is the flattened weight vector of a
//! small self-decoding MLP (the "root" network). The state evolves linearly,
//! `theta_t = A theta_{t-1} + B dx_t`, and is decoded by evaluating the root
//! network at the normalized time `tau = t/(T-1)`. Training runs either as a
//! step-by-step recurrent scan (with optional teacher forcing) or as a causal
//! convolution with the kernel `(B, AB, A^2 B, ...)` computed via FFTs.

pub mod dynamics;
pub mod error;
pub mod evalkit;
pub mod gradengine;
pub mod numkit;
pub mod rootnet;
pub mod trainer;
pub mod warpcell;

pub use error::WarpError;
