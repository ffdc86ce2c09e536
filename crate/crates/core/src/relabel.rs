//! Vorticity relabelling: send each vertex value to the initial level that
//! enclosed the same area, `w_i -> A0^{-1}(A_t(w_i))`.

use rayon::prelude::*;

use crate::areafn::{AreaConfig, AreaFunction};
use crate::error::Result;
use crate::grid::ScalarField;

/// Relabels the interior vertices of `omega` through the current area
/// function and the inverse of `initial`; boundary vertices keep the
/// Dirichlet value.
pub fn relabel_project(
    omega: &ScalarField,
    initial: &AreaFunction,
    budget: usize,
    use_richardson: bool,
) -> Result<ScalarField> {
    let cfg = AreaConfig {
        budget,
        richardson: use_richardson,
    };
    cfg.validate()?;
    let current = cfg.tabulate(omega);
    relabel_with(omega, initial, &current)
}

/// Relabelling with a precomputed current area function.
pub fn relabel_with(
    omega: &ScalarField,
    initial: &AreaFunction,
    current: &AreaFunction,
) -> Result<ScalarField> {
    let values: Vec<f64> = omega
        .values()
        .par_iter()
        .map(|&w| initial.invert(current.evaluate(w)))
        .collect();
    let mut out = ScalarField::from_values(*omega.grid(), values)?;
    out.apply_boundary();
    Ok(out)
}
