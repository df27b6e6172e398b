use crate::grid::C64;

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `σ(|z| + a)·e^{i·arg z}`, with `arg 0 = 0`.
#[inline]
pub fn mod_sigmoid(z: C64, a: f64) -> C64 {
    let rho = z.norm_sqr().sqrt();
    let s = sigmoid(rho + a);
    if rho > 0.0 {
        z * (s / rho)
    } else {
        C64::new(s, 0.0)
    }
}

/// Pull an output gradient `g` (with `dL = Re(conj(g)·dh)`) back through
/// `h = mod_sigmoid(z, a)`. Returns the gradient with respect to `z` and the
/// derivative with respect to `a`.
#[inline]
pub(crate) fn mod_sigmoid_backward(z: C64, a: f64, g: C64) -> (C64, f64) {
    let rho = z.norm_sqr().sqrt();
    let s = sigmoid(rho + a);
    let ds = s * (1.0 - s);
    if rho > 0.0 {
        let u = z / rho;
        // gradient in the local (radial, tangential) frame of z
        let w = u.conj() * g;
        let local = C64::new(ds * w.re, s / rho * w.im);
        (u * local, ds * w.re)
    } else {
        (g * ds, ds * g.re)
    }
}
