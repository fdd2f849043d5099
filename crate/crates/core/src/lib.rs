//! Numerical laboratory for packing radii, Dirichlet p-Laplacian
//! eigenvalues and min-max spectra on finite geodesic metric measure spaces.

pub mod error;
pub mod fakespec;
pub mod generators;
pub mod morrey;
mod linalg;
pub mod packing;
pub mod penergy;
pub mod space;
pub mod sweep;

pub use error::{Error, Result};
pub use space::{FunctionOnSpace, MetricMeasureSpace};
