use crate::error::{shape_err, Result};
use crate::grid::{diff_axis, diff_axis_adjoint, ComplexGrid, C64};

use super::cross::CrossDiffSet;
use super::gradient::PhaseGradientTarget;

/// Added under the square root of each norm when differentiating, so the
/// gradient stays finite at zero residual.
pub const NORM_EPSILON: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ObjectiveValue {
    pub dc1: f64,
    pub dc2: f64,
    pub total: f64,
}

/// Gradient of the objective with respect to `U′` and `U″`.
#[derive(Clone, Debug, PartialEq)]
pub struct ObjectiveGradient {
    pub d_re: Vec<f64>,
    pub d_im: Vec<f64>,
}

fn check(cross: &CrossDiffSet, targets: &PhaseGradientTarget, n: usize) -> Result<()> {
    if cross.geom.dims() != targets.geom.dims() || cross.mask.len() != n {
        return Err(shape_err(format!(
            "objective pieces disagree: field {n} px, cross {:?}, targets {:?}",
            cross.geom.dims(),
            targets.geom.dims()
        )));
    }
    Ok(())
}

/// Objective and gradient at `U = U′ + iU″`.
pub fn dual_dc_objective(
    u: &ComplexGrid,
    cross: &CrossDiffSet,
    targets: &PhaseGradientTarget,
    lambda: f64,
) -> Result<(ObjectiveValue, ObjectiveGradient)> {
    let n = u.len();
    check(cross, targets, n)?;
    let mut params: Vec<f64> = u.data().iter().map(|z| z.re).collect();
    params.extend(u.data().iter().map(|z| z.im));
    let mut grad = vec![0.0; 2 * n];
    let value = evaluate(&params, cross, targets, lambda, &mut grad);
    let d_im = grad.split_off(n);
    Ok((value, ObjectiveGradient { d_re: grad, d_im }))
}

/// Core evaluation over the packed parameter vector `[U′, U″]`; `grad` is
/// overwritten.
pub(crate) fn evaluate(
    params: &[f64],
    cross: &CrossDiffSet,
    targets: &PhaseGradientTarget,
    lambda: f64,
    grad: &mut [f64],
) -> ObjectiveValue {
    let n = params.len() / 2;
    let (u_re, u_im) = params.split_at(n);
    grad.iter_mut().for_each(|g| *g = 0.0);
    let mask = &cross.mask;

    let mut dc1 = 0.0;
    let mut sens = vec![0.0; n];
    for pair in &cross.pairs {
        let mut sq = 0.0;
        for i in 0..n {
            if !mask[i] {
                sens[i] = 0.0;
                continue;
            }
            let theta = u_re[i] * pair.e + u_im[i] * pair.f;
            let (s, c) = theta.sin_cos();
            let r = pair.ratio[i];
            sq += (r - C64::new(c, s)).norm_sqr();
            // Im(R·e^{−iθ})
            sens[i] = r.im * c - r.re * s;
        }
        dc1 += sq.sqrt();
        let norm = (sq + NORM_EPSILON).sqrt();
        for i in 0..n {
            let g = -sens[i] / norm;
            grad[i] += g * pair.e;
            grad[n + i] += g * pair.f;
        }
    }

    let mut dc2 = 0.0;
    let geom = &cross.geom;
    for (comp, field) in [u_re, u_im].into_iter().enumerate() {
        let tgt = if comp == 0 { &targets.re } else { &targets.im };
        for axis in 0..geom.ndim() {
            let mut res = diff_axis(field, geom, axis);
            for i in 0..n {
                res[i] = if mask[i] { res[i] - tgt[axis][i] } else { 0.0 };
            }
            let sq = res.iter().map(|r| r * r).sum::<f64>();
            dc2 += sq.sqrt();
            let norm = (sq + NORM_EPSILON).sqrt();
            if lambda != 0.0 {
                res.iter_mut().for_each(|r| *r *= lambda / norm);
                let adj = diff_axis_adjoint(&res, geom, axis);
                for i in 0..n {
                    grad[comp * n + i] += adj[i];
                }
            }
        }
    }
    ObjectiveValue {
        dc1,
        dc2,
        total: dc1 + lambda * dc2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Grid, GridGeom};
    use crate::rng::stream_rng;
    use crate::synth::{encode_phase_series, EncodeConfig};
    use crate::unwrap::{cross_phase_ratios, wrapped_phase_gradient, GradientStencil};
    use rand::Rng as _;
    use std::f64::consts::PI;

    fn setup(u: &ComplexGrid, scale: Option<f64>) -> (CrossDiffSet, PhaseGradientTarget) {
        let cfg = EncodeConfig {
            phase_scale: scale,
            ..Default::default()
        };
        let s = encode_phase_series(u, &cfg).unwrap().0;
        (
            cross_phase_ratios(&s, None).unwrap(),
            wrapped_phase_gradient(&s, GradientStencil::Angle).unwrap(),
        )
    }

    fn smooth_field(n: usize) -> ComplexGrid {
        let g = GridGeom::square(n, n, 1.0).unwrap();
        Grid::from_fn(g.clone(), |i| {
            let c = g.coords(i);
            let (y, x) = (c[0] as f64, c[1] as f64);
            C64::new(0.5 * x - 0.2 * y + 0.03 * x * y, 0.3 * y + 0.1 * x)
        })
    }

    #[test]
    fn both_terms_vanish_at_truth() {
        let u = smooth_field(10);
        let (c, t) = setup(&u, None);
        let (v, _) = dual_dc_objective(&u, &c, &t, 1000.0).unwrap();
        assert!(v.dc1 < 1e-10, "{}", v.dc1);
        assert!(v.dc2 < 1e-10, "{}", v.dc2);
    }

    #[test]
    fn global_pi_shift_is_a_gauge_for_even_offsets() {
        let u = smooth_field(8);
        let (c, t) = setup(&u, Some(4.0 * PI));
        let shifted = u.map(|z| z + C64::new(2.0 * PI, 0.0));
        let (a, _) = dual_dc_objective(&u, &c, &t, 1000.0).unwrap();
        let (b, _) = dual_dc_objective(&shifted, &c, &t, 1000.0).unwrap();
        assert!((a.total - b.total).abs() < 1e-9);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let g = GridGeom::square(8, 8, 1.0).unwrap();
        let mut rng = stream_rng(11, 0);
        for trial in 0..6 {
            let truth = Grid::from_fn(g.clone(), |_| C64::new(rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0)));
            let (c, t) = setup(&truth, None);
            let u = Grid::from_fn(g.clone(), |_| C64::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)));
            let lambda = if trial % 2 == 0 { 0.0 } else { 1000.0 };
            let (_, grad) = dual_dc_objective(&u, &c, &t, lambda).unwrap();
            let h = 1e-5;
            for i in 0..g.len() {
                for comp in 0..2 {
                    let bump = |d: f64| {
                        let mut v = u.clone();
                        if comp == 0 {
                            v.data_mut()[i].re += d;
                        } else {
                            v.data_mut()[i].im += d;
                        }
                        dual_dc_objective(&v, &c, &t, lambda).unwrap().0.total
                    };
                    let fd = (bump(h) - bump(-h)) / (2.0 * h);
                    let an = if comp == 0 { grad.d_re[i] } else { grad.d_im[i] };
                    let err = (fd - an).abs() / an.abs().max(1e-3);
                    assert!(err < 1e-4, "trial {trial} px {i} comp {comp}: fd {fd} an {an}");
                }
            }
        }
    }
}
