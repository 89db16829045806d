//! Forward simulation of far-field scattering from internal point sources and
//! susceptibility reconstruction by RKHS regression of the scattering amplitude.
//!
//! Pipeline: [`scene`] builds phantoms and geometry, [`forward`] produces the
//! amplitude matrix `A(r1, r2_hat)`, [`rkhs`] fits a Sobolev-kernel surrogate to
//! it, and [`inversion`] turns the surrogate's Laplacian into `eta`.

// NaN-rejecting checks are written as `!(x > 0.0)` on purpose
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod array_file;
pub mod error;
pub mod forward;
pub mod greens;
pub mod inversion;
pub mod numeric;
pub mod rkhs;
pub mod scene;

pub use error::{Error, Result};
pub use forward::{FieldSolution, ScatteringData};
pub use greens::{AccuracyMode, Wavenumber};
pub use inversion::ReconstructedField;
pub use numeric::Point;
pub use rkhs::{RepresenterModel, SobolevKernel, SobolevKernelSpec};
pub use scene::{DetectorSet, SourceSet, SusceptibilityField, VoxelGrid};
