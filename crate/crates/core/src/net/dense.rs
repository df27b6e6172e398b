use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand_distr::{Distribution, Normal};

use crate::error::{config_err, shape_err, Result};
use crate::grid::C64;
use crate::rng::Rng;

use super::activation::{mod_sigmoid, mod_sigmoid_backward};

/// Layer output widths of the wavenumber regressor.
pub const LAYER_WIDTHS: [usize; 9] = [60, 50, 40, 30, 20, 15, 10, 6, 1];

/// Fully connected complex network. Every layer but the last is followed by
/// modSigmoid; the scalar output is the modulus of the final neuron.
///
/// Parameters live in one flat vector, layer by layer, each layer laid out
/// as `A` (row-major, out×in), `B`, bias re, bias im, activation bias `a`.
/// The last layer carries an `a` block too so every layer has the same
/// shape; it is never used.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexDenseNet {
    input_dim: usize,
    widths: Vec<usize>,
    params: Vec<f64>,
}

#[derive(Clone, Copy, Debug)]
struct LayerSpan {
    n_in: usize,
    n_out: usize,
    a: usize,
    b: usize,
    br: usize,
    bi: usize,
    act: usize,
    end: usize,
}

fn layer_spans(input_dim: usize, widths: &[usize]) -> Vec<LayerSpan> {
    let mut spans = Vec::with_capacity(widths.len());
    let (mut n_in, mut off) = (input_dim, 0);
    for &n_out in widths {
        let w = n_out * n_in;
        let s = LayerSpan {
            n_in,
            n_out,
            a: off,
            b: off + w,
            br: off + 2 * w,
            bi: off + 2 * w + n_out,
            act: off + 2 * w + 2 * n_out,
            end: off + 2 * w + 3 * n_out,
        };
        off = s.end;
        n_in = n_out;
        spans.push(s);
    }
    spans
}

/// Intermediate values kept for the backward pass.
struct Tape {
    /// Input of each layer as (re, im), batch × n_in.
    inputs: Vec<(Array2<f64>, Array2<f64>)>,
    /// Pre-activation of each layer.
    pre: Vec<(Array2<f64>, Array2<f64>)>,
}

impl ComplexDenseNet {
    /// All-zero network.
    pub fn zeros(input_dim: usize, widths: &[usize]) -> Result<Self> {
        if input_dim == 0 || widths.is_empty() || widths.contains(&0) {
            return Err(config_err(format!(
                "invalid network shape: input {input_dim}, widths {widths:?}"
            )));
        }
        if *widths.last().unwrap() != 1 {
            return Err(config_err("the last layer must have a single neuron"));
        }
        let n = layer_spans(input_dim, widths).last().unwrap().end;
        Ok(Self {
            input_dim,
            widths: widths.to_vec(),
            params: vec![0.0; n],
        })
    }

    /// `A`, `B` ~ N(0, 1/(2·fan_in)); biases and activation offsets start at 0.
    pub fn random(input_dim: usize, widths: &[usize], rng: &mut Rng) -> Result<Self> {
        let mut net = Self::zeros(input_dim, widths)?;
        for s in layer_spans(input_dim, widths) {
            let normal = Normal::new(0.0, (0.5 / s.n_in as f64).sqrt()).expect("positive std");
            for p in &mut net.params[s.a..s.br] {
                *p = normal.sample(rng);
            }
        }
        Ok(net)
    }

    pub fn from_params(input_dim: usize, widths: &[usize], params: Vec<f64>) -> Result<Self> {
        let mut net = Self::zeros(input_dim, widths)?;
        if params.len() != net.params.len() {
            return Err(shape_err(format!(
                "network needs {} parameters, got {}",
                net.params.len(),
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(config_err("network parameters must be finite"));
        }
        net.params = params;
        Ok(net)
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    fn check_batch(&self, xr: &ArrayView2<f64>, xi: &ArrayView2<f64>) -> Result<()> {
        if xr.dim() != xi.dim() || xr.ncols() != self.input_dim {
            return Err(shape_err(format!(
                "network expects {} inputs, got re {:?} / im {:?}",
                self.input_dim,
                xr.dim(),
                xi.dim()
            )));
        }
        Ok(())
    }

    fn run(&self, xr: ArrayView2<f64>, xi: ArrayView2<f64>, keep: bool) -> (Array1<f64>, Option<Tape>) {
        let spans = layer_spans(self.input_dim, &self.widths);
        let last = spans.len() - 1;
        let mut tape = Tape {
            inputs: Vec::new(),
            pre: Vec::new(),
        };
        let mut hr = xr.to_owned();
        let mut hi = xi.to_owned();
        for (l, s) in spans.iter().enumerate() {
            let a = ArrayView2::from_shape((s.n_out, s.n_in), &self.params[s.a..s.b]).unwrap();
            let b = ArrayView2::from_shape((s.n_out, s.n_in), &self.params[s.b..s.br]).unwrap();
            let br = ArrayView2::from_shape((1, s.n_out), &self.params[s.br..s.bi]).unwrap();
            let bi = ArrayView2::from_shape((1, s.n_out), &self.params[s.bi..s.act]).unwrap();
            let mut zr = hr.dot(&a.t()) - hi.dot(&b.t());
            let mut zi = hi.dot(&a.t()) + hr.dot(&b.t());
            zr += &br;
            zi += &bi;
            if keep {
                tape.inputs.push((hr, hi));
            }
            if l == last {
                let out = zr.iter().zip(zi.iter()).map(|(&r, &i)| r.hypot(i)).collect();
                if keep {
                    tape.pre.push((zr, zi));
                }
                return (out, keep.then_some(tape));
            }
            let act = &self.params[s.act..s.end];
            let mut nr = Array2::zeros(zr.dim());
            let mut ni = Array2::zeros(zi.dim());
            for (((hr_row, hi_row), zr_row), zi_row) in nr
                .as_slice_mut()
                .unwrap()
                .chunks_exact_mut(s.n_out)
                .zip(ni.as_slice_mut().unwrap().chunks_exact_mut(s.n_out))
                .zip(zr.as_slice().unwrap().chunks_exact(s.n_out))
                .zip(zi.as_slice().unwrap().chunks_exact(s.n_out))
            {
                for j in 0..s.n_out {
                    let h = mod_sigmoid(C64::new(zr_row[j], zi_row[j]), act[j]);
                    hr_row[j] = h.re;
                    hi_row[j] = h.im;
                }
            }
            if keep {
                tape.pre.push((zr, zi));
            }
            hr = nr;
            hi = ni;
        }
        unreachable!("network has at least one layer")
    }

    /// Outputs for a batch given as separate real and imaginary matrices
    /// (batch × input_dim).
    pub fn forward_batch(&self, xr: ArrayView2<f64>, xi: ArrayView2<f64>) -> Result<Vec<f64>> {
        self.check_batch(&xr, &xi)?;
        Ok(self.run(xr, xi, false).0.to_vec())
    }

    pub fn forward(&self, x: &[C64]) -> Result<f64> {
        let (xr, xi) = split(x);
        Ok(self.forward_batch(xr.view(), xi.view())?[0])
    }

    /// Mean squared error over the batch and its gradient (written into
    /// `grad`, same layout as the parameters).
    pub fn loss_and_grad(
        &self,
        xr: ArrayView2<f64>,
        xi: ArrayView2<f64>,
        targets: &[f64],
        grad: &mut [f64],
    ) -> Result<f64> {
        self.check_batch(&xr, &xi)?;
        let batch = xr.nrows();
        if targets.len() != batch || grad.len() != self.params.len() {
            return Err(shape_err(format!(
                "batch of {batch} with {} targets and {} gradient slots",
                targets.len(),
                grad.len()
            )));
        }
        let (y, tape) = self.run(xr, xi, true);
        let tape = tape.unwrap();
        let spans = layer_spans(self.input_dim, &self.widths);
        let last = spans.len() - 1;
        let inv = 1.0 / batch as f64;

        let mut loss = 0.0;
        let (zr, zi) = &tape.pre[last];
        let mut gr = Array2::<f64>::zeros((batch, 1));
        let mut gi = Array2::<f64>::zeros((batch, 1));
        for n in 0..batch {
            let r = y[n] - targets[n];
            loss += r * r;
            if y[n] > 0.0 {
                let c = 2.0 * r * inv / y[n];
                gr[[n, 0]] = c * zr[[n, 0]];
                gi[[n, 0]] = c * zi[[n, 0]];
            }
        }
        loss *= inv;

        for l in (0..spans.len()).rev() {
            let s = spans[l];
            if l != last {
                // gr/gi hold dL/dh; map through the activation
                let (zr, zi) = &tape.pre[l];
                let act = &self.params[s.act..s.end];
                let gact = &mut grad[s.act..s.end];
                gact.iter_mut().for_each(|g| *g = 0.0);
                let gr_s = gr.as_slice_mut().unwrap();
                let gi_s = gi.as_slice_mut().unwrap();
                let (zr_s, zi_s) = (zr.as_slice().unwrap(), zi.as_slice().unwrap());
                for k in 0..gr_s.len() {
                    let j = k % s.n_out;
                    let (gz, ga) = mod_sigmoid_backward(
                        C64::new(zr_s[k], zi_s[k]),
                        act[j],
                        C64::new(gr_s[k], gi_s[k]),
                    );
                    gr_s[k] = gz.re;
                    gi_s[k] = gz.im;
                    gact[j] += ga;
                }
            } else {
                grad[s.act..s.end].iter_mut().for_each(|g| *g = 0.0);
            }
            let (xr_l, xi_l) = &tape.inputs[l];
            let da = gr.t().dot(xr_l) + gi.t().dot(xi_l);
            let db = gi.t().dot(xr_l) - gr.t().dot(xi_l);
            copy_into(&mut grad[s.a..s.b], &da);
            copy_into(&mut grad[s.b..s.br], &db);
            copy_into(&mut grad[s.br..s.bi], &gr.sum_axis(Axis(0)));
            copy_into(&mut grad[s.bi..s.act], &gi.sum_axis(Axis(0)));
            if l > 0 {
                let a = ArrayView2::from_shape((s.n_out, s.n_in), &self.params[s.a..s.b]).unwrap();
                let b = ArrayView2::from_shape((s.n_out, s.n_in), &self.params[s.b..s.br]).unwrap();
                let nr = gr.dot(&a) + gi.dot(&b);
                let ni = gi.dot(&a) - gr.dot(&b);
                gr = nr;
                gi = ni;
            }
        }
        Ok(loss)
    }

    /// Gradient of `(forward(x) − target)²` for one input.
    pub fn backward(&self, x: &[C64], target: f64) -> Result<Vec<f64>> {
        let (xr, xi) = split(x);
        let mut g = vec![0.0; self.params.len()];
        self.loss_and_grad(xr.view(), xi.view(), &[target], &mut g)?;
        Ok(g)
    }
}

fn split(x: &[C64]) -> (Array2<f64>, Array2<f64>) {
    let n = x.len();
    (
        Array2::from_shape_fn((1, n), |(_, j)| x[j].re),
        Array2::from_shape_fn((1, n), |(_, j)| x[j].im),
    )
}

fn copy_into<D: ndarray::Dimension>(dst: &mut [f64], src: &ndarray::Array<f64, D>) {
    for (d, s) in dst.iter_mut().zip(src.iter()) {
        *d = *s;
    }
}
