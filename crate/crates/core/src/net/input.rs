use crate::error::{Error, Result};
use crate::grid::{ComplexGrid, C64};

/// Divide by the largest modulus so the result peaks at exactly 1.
pub fn normalize_input(field: &ComplexGrid) -> Result<ComplexGrid> {
    let m = field.max_modulus();
    if !(m > 0.0) || !m.is_finite() {
        return Err(Error::Degenerate(format!(
            "cannot normalize a field with maximum modulus {m}"
        )));
    }
    Ok(field.map(|z| z / m))
}

/// In-place variant on a raw slice; returns the divisor.
pub(crate) fn normalize_slice(v: &mut [C64]) -> Result<f64> {
    let m = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if !(m > 0.0) || !m.is_finite() {
        return Err(Error::Degenerate(format!(
            "cannot normalize a patch with maximum modulus {m}"
        )));
    }
    v.iter_mut().for_each(|z| *z /= m);
    Ok(m)
}

/// Row-major flattening of `vec(d)·vec(d)ᴴ`.
pub fn covariance_input(patch: &[C64]) -> Vec<C64> {
    let mut out = Vec::with_capacity(patch.len() * patch.len());
    covariance_into(patch, &mut out);
    out
}

pub(crate) fn covariance_into(patch: &[C64], out: &mut Vec<C64>) {
    out.clear();
    for a in patch {
        for b in patch {
            out.push(a * b.conj());
        }
    }
}
