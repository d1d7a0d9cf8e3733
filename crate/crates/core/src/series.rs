//! Helpers shared by everything that post-processes checkpoint sequences:
//! finite-difference time derivatives and residual norms.

use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::fornberg_weights;

/// Levels excluded at each end of the normal interval when a residual is
/// measured; the one-sided stencils there are only first-order accurate for
/// composed operators.
pub const RESIDUAL_SKIP: usize = 2;

/// `(index, weight)` pairs for the `order`-th time derivative at `times[idx]`,
/// using `order + 2` consecutive checkpoints: centered where possible,
/// one-sided at the ends.
pub fn derivative_weights(times: &[f64], idx: usize, order: usize) -> Result<Vec<(usize, f64)>> {
    let width = order + 2;
    if times.len() < width {
        return Err(Error::TooFewCheckpoints {
            need: width,
            have: times.len(),
        });
    }
    let start = idx
        .saturating_sub(width / 2)
        .min(times.len() - width);
    let c = fornberg_weights(times[idx], &times[start..start + width], order);
    Ok(c[order]
        .iter()
        .enumerate()
        .map(|(i, &w)| (start + i, w))
        .collect())
}

/// Time derivative of a checkpointed field sequence at `idx`.
pub fn time_derivative(
    times: &[f64],
    fields: &[&Field],
    idx: usize,
    order: usize,
) -> Result<Field> {
    let weights = derivative_weights(times, idx, order)?;
    let mut out = Field::zeros(fields[idx].grid());
    for (i, w) in weights {
        out.axpy(w, fields[i]);
    }
    Ok(out)
}

/// Unweighted `L^2` norm over the interior levels
/// `RESIDUAL_SKIP..nz - RESIDUAL_SKIP`.
pub fn interior_norm(f: &Field) -> f64 {
    let grid = f.grid();
    let nz = grid.nz();
    let mut mask = vec![1.0; nz];
    for j in 0..RESIDUAL_SKIP.min(nz) {
        mask[j] = 0.0;
        mask[nz - 1 - j] = 0.0;
    }
    let masked = f.scale_by_profile(&mask);
    masked.inner_product(&masked).unwrap_or(0.0).max(0.0).sqrt()
}

/// `sqrt(sum |r_i|^2)` over components measured by [`interior_norm`].
pub fn interior_norm_all(fields: &[Field]) -> f64 {
    fields
        .iter()
        .map(|f| interior_norm(f).powi(2))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_differentiate_quadratics_exactly() {
        let times = [0.0, 0.1, 0.25, 0.3, 0.5];
        for idx in 0..times.len() {
            let w = derivative_weights(&times, idx, 1).unwrap();
            let d: f64 = w.iter().map(|&(i, c)| c * times[i] * times[i]).sum();
            assert!((d - 2.0 * times[idx]).abs() < 1e-12, "{idx}: {d}");
            let w2 = derivative_weights(&times, idx, 2).unwrap();
            let d2: f64 = w2.iter().map(|&(i, c)| c * times[i].powi(3)).sum();
            assert!((d2 - 6.0 * times[idx]).abs() < 1e-9, "{idx}: {d2}");
        }
    }

    #[test]
    fn too_few_checkpoints() {
        assert!(matches!(
            derivative_weights(&[0.0, 1.0], 0, 1),
            Err(Error::TooFewCheckpoints { need: 3, have: 2 })
        ));
    }
}
