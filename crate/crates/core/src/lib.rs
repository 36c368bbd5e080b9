//! Quantum wave mixing in a cascaded source→probe pair of two-level emitters.
//!
//! All quantities are dimensionless with the probe decay rate as the unit.

pub mod cascade;
pub mod numfmt;
pub mod ode;
pub mod oracle;
pub mod params;
pub mod probe;
pub mod quad;
pub mod source;
pub mod spectral;

pub use num_complex::Complex64;
pub use params::{ComplexAmplitude, InvalidParam, RabiConvention, RegimeFlags, SystemParams, ValidatedParams};
