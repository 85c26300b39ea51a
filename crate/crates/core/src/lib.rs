//! Shape optimization on moving triangle meshes.
//!
//! The crate is organized bottom-up:
//!
//! * [`mesh`]: triangle meshes, benchmark generators, the additive retraction
//!   `x -> x + V(x)` and the nodal-identity vector transport.
//! * [`fem`]: P1/P2/Taylor-Hood spaces, sparse assembly and direct solves.
//! * [`shape`]: shape derivatives as dual vectors, the elasticity inner
//!   product that defines the Steklov-Poincare metric, gradient deformations
//!   and a finite-difference oracle.
//! * [`optimize`]: the descent driver with gradient descent, L-BFGS and five
//!   nonlinear conjugate gradient directions.
//! * [`problems`]: the Poisson, EIT and Stokes benchmark functionals.

pub mod error;
pub mod fem;
pub mod mesh;
pub mod optimize;
pub mod problems;
pub mod shape;

pub use error::{Error, Result};
pub use mesh::{NodalField, TriMesh};
pub use optimize::{Method, NcgVariant};
pub use problems::ShapeFunctional;
pub use shape::{InnerProductOperator, ShapeDerivative};
