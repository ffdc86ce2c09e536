//! Area-preserving projections for 2D vorticity advection on structured grids.
//!
//! Vorticity is advected with a finite-difference Jacobian and periodically
//! projected back towards the set of rearrangements of its initial state,
//! either by rank-matching cell values ([`rearrange`]) or by relabelling
//! contour values so the area enclosed by each contour is restored
//! ([`relabel`], built on [`areafn`]).

pub mod areafn;
pub mod contour;
pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod grid;
pub mod rearrange;
pub mod relabel;
pub mod schemes;

pub use areafn::{AreaConfig, AreaFunction};
pub use error::{Error, Result};
pub use grid::{Analytic, Grid, ScalarField};
pub use schemes::{JacobianKind, Mode, Projection, SchemeConfig};
