//! Complex angular momentum analysis of state-to-state integral cross sections.
//!
//! S-matrix elements sampled at real energies and integer total angular
//! momenta are continued into the complex J and E planes by continued-fraction
//! rational interpolation. Poles found there are linked into Regge and
//! complex-energy trajectories, and the integral cross section is split into
//! per-trajectory resonance terms, a smooth background integral and a
//! residual via the Mulholland formula.

pub mod bridge;
pub mod error;
pub mod mulholland;
pub mod pade;
pub mod poly;
pub mod quadrature;
pub mod scatter;
pub mod synth;
pub mod trajectory;

pub use error::{Error, Result};
pub use num_complex::Complex64;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Shortest round-trip scientific notation with at least four significant
/// digits in the mantissa.
pub fn fmt_sci(x: f64) -> String {
    if x.is_nan() {
        return "nan".to_string();
    }
    let s = format!("{x:e}");
    let mantissa = s.split('e').next().unwrap_or("");
    let digits = mantissa.chars().filter(char::is_ascii_digit).count();
    if digits < 4 && x.is_finite() {
        format!("{x:.3e}")
    } else {
        s
    }
}
