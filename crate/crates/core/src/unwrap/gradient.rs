use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{diff_axis, GridGeom, C64};
use crate::synth::PhaseOffsetSeries;

/// How the true phase derivative is read off a wrapped image.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradientStencil {
    /// Half the angle of `e(x+1)·conj(e(x−1))` (one-sided at edges). Equals
    /// the centered difference of the unwrapped phase whenever that
    /// difference stays below π.
    #[default]
    Angle,
    /// `Im(D e · conj e)` with `D` the centered difference of the phasor
    /// itself. Shrinks a slope `s` to `sin s`.
    Phasor,
}

/// Least-squares estimates of `∂U′` and `∂U″` along each axis, in radians
/// per pixel. `re[a]` / `im[a]` hold axis `a` in storage order.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseGradientTarget {
    pub geom: GridGeom,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

/// `(HᵀH)⁻¹Hᵀ` for rows `(cos φ_j, −sin φ_j)`, as two row vectors.
pub(crate) fn encoding_pseudo_inverse(offsets: &[f64]) -> Result<[Vec<f64>; 2]> {
    let (mut a, mut b, mut d) = (0.0, 0.0, 0.0);
    for &o in offsets {
        let (c, s) = (o.cos(), -o.sin());
        a += c * c;
        b += c * s;
        d += s * s;
    }
    let det = a * d - b * b;
    if det <= 1e-10 * (a + d) * (a + d) {
        return Err(Error::RankDeficient {
            offsets: offsets.to_vec(),
        });
    }
    let rows = offsets
        .iter()
        .map(|&o| {
            let (c, s) = (o.cos(), -o.sin());
            ((d * c - b * s) / det, (-b * c + a * s) / det)
        })
        .unzip::<_, _, Vec<f64>, Vec<f64>>();
    Ok([rows.0, rows.1])
}

fn unit(z: C64) -> C64 {
    let n = z.norm();
    if n > 0.0 {
        z / n
    } else {
        C64::new(0.0, 0.0)
    }
}

fn axis_derivative(img: &[C64], geom: &GridGeom, axis: usize, stencil: GradientStencil) -> Vec<f64> {
    match stencil {
        GradientStencil::Angle => {
            let n = geom.dims()[axis];
            let s = geom.stride(axis);
            (0..img.len())
                .map(|idx| {
                    let c = (idx / s) % n;
                    if c == 0 {
                        (img[idx + s] * img[idx].conj()).arg()
                    } else if c == n - 1 {
                        (img[idx] * img[idx - s].conj()).arg()
                    } else {
                        0.5 * (img[idx + s] * img[idx - s].conj()).arg()
                    }
                })
                .collect()
        }
        GradientStencil::Phasor => {
            let e: Vec<C64> = img.iter().map(|&z| unit(z)).collect();
            diff_axis(&e, geom, axis)
                .iter()
                .zip(&e)
                .map(|(de, e)| (de * e.conj()).im)
                .collect()
        }
    }
}

pub fn wrapped_phase_gradient(
    series: &PhaseOffsetSeries,
    stencil: GradientStencil,
) -> Result<PhaseGradientTarget> {
    let [pinv_re, pinv_im] = encoding_pseudo_inverse(series.offsets())?;
    let geom = series.images()[0].geom().clone();
    let n = geom.len();
    let mut re = Vec::with_capacity(geom.ndim());
    let mut im = Vec::with_capacity(geom.ndim());
    for axis in 0..geom.ndim() {
        let mut tr = vec![0.0; n];
        let mut ti = vec![0.0; n];
        for (j, img) in series.images().iter().enumerate() {
            let g = axis_derivative(img.data(), &geom, axis, stencil);
            for i in 0..n {
                tr[i] += pinv_re[j] * g[i];
                ti[i] += pinv_im[j] * g[i];
            }
        }
        re.push(tr);
        im.push(ti);
    }
    Ok(PhaseGradientTarget { geom, re, im })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::synth::{encode_phase_series, even_offsets, EncodeConfig};
    use std::f64::consts::PI;

    fn ramp_series(slope: f64, background: f64) -> PhaseOffsetSeries {
        let g = GridGeom::square(9, 12, 1.0).unwrap();
        let u = Grid::from_fn(g.clone(), |i| C64::new(slope * g.coords(i)[1] as f64, 0.0));
        let cfg = EncodeConfig {
            phase_scale: None,
            background_phase: background,
            ..Default::default()
        };
        encode_phase_series(&u, &cfg).unwrap().0
    }

    #[test]
    fn ramp_slope_recovered_by_both_stencils() {
        let slope = 0.4 * PI;
        let s = ramp_series(slope, 0.0);
        let g = s.images()[0].geom().clone();
        let angle = wrapped_phase_gradient(&s, GradientStencil::Angle).unwrap();
        let phasor = wrapped_phase_gradient(&s, GradientStencil::Phasor).unwrap();
        for idx in 0..g.len() {
            if !g.is_interior(idx) {
                continue;
            }
            // the 4-offset ramp along x only moves U′
            assert!((angle.re[1][idx] - slope).abs() < 1e-12);
            assert!(angle.im[1][idx].abs() < 1e-12);
            assert!(angle.re[0][idx].abs() < 1e-12);
            // sin(kh)/h response of the phasor difference, per offset; the
            // offsets at ±π/2 see no U′ and contribute nothing
            let expect = 0.5 * (slope.sin() + slope.sin());
            assert!((phasor.re[1][idx] - expect).abs() < 1e-6, "{}", phasor.re[1][idx]);
        }
    }

    #[test]
    fn wrapped_ramp_has_no_jumps() {
        let s = ramp_series(0.4 * PI, 0.0);
        let t = wrapped_phase_gradient(&s, GradientStencil::Angle).unwrap();
        assert!(t.re[1].iter().all(|&v| (v - 0.4 * PI).abs() < 1e-12));
    }

    #[test]
    fn constant_field_and_background_phase() {
        let s = ramp_series(0.0, 0.0);
        let t = wrapped_phase_gradient(&s, GradientStencil::Angle).unwrap();
        assert!(t.re.iter().chain(&t.im).flatten().all(|&v| v.abs() < 1e-15));

        let a = wrapped_phase_gradient(&ramp_series(0.3, 0.0), GradientStencil::Phasor).unwrap();
        let b = wrapped_phase_gradient(&ramp_series(0.3, 1.1), GradientStencil::Phasor).unwrap();
        for (x, y) in a.re.iter().flatten().zip(b.re.iter().flatten()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_offsets_are_rejected() {
        let g = GridGeom::square(3, 3, 1.0).unwrap();
        let u = Grid::filled(g, C64::new(0.0, 0.0));
        let cfg = EncodeConfig {
            offsets: vec![0.0, PI],
            ..Default::default()
        };
        let s = encode_phase_series(&u, &cfg).unwrap().0;
        match wrapped_phase_gradient(&s, GradientStencil::Angle) {
            Err(Error::RankDeficient { offsets }) => assert_eq!(offsets, vec![0.0, PI]),
            other => panic!("{other:?}"),
        }
        assert!(encoding_pseudo_inverse(&even_offsets(3)).is_ok());
    }
}
