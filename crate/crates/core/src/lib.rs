//! Forward model and analysis tools for an optical cavity collectively
//! coupled to an ensemble of multi-level atoms.
//!
//! * [`model`]: domain types, unit conversion, ladders built from level splittings.
//! * [`response`]: susceptibility and normalized transmission spectra.
//! * [`modes`]: the arrowhead mode matrix, its eigenmodes, characteristic
//!   polynomial and branch tracking versus cavity detuning.
//! * [`dynamics`]: time integration of the linearized equations of motion.
//! * [`analysis`]: peak finding, peak-to-mode matching, spectrum distances.
//! * [`fit`]: damped least-squares fits of the forward model to spectra.
//!
//! All frequencies are in units of the excited-state decay rate Γ.

pub mod analysis;
pub mod dynamics;
pub mod error;
pub mod fit;
pub mod model;
pub mod modes;
pub mod par;
pub mod response;

pub use error::{Error, Result};
pub use par::Execution;
