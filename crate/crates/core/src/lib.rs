//! Variational energies, explicit microstructures and scaling laws for
//! folding and delamination of compressed thin films.

pub mod constructions;
pub mod energies;
pub mod error;
pub mod fields;
pub mod optimize;
pub mod scaling;
pub mod stability;
pub mod sum;

pub use error::{Error, Result};
pub use fields::{BoundarySpec, EdgeCondition, Grid, ScalarField, SymTensorField, VectorField2};
pub use energies::{EnergyBreakdown, EnergyParams, FunctionalKind, State};
