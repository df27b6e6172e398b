//! Finite-difference Helmholtz phantoms.
//!
//! Solves `∇²u + κ(r)²u = 0` on a 2D grid with a 5-point stencil. The local
//! wavenumber follows the traveling-wave convention used everywhere else in
//! the crate: `κ = k′ + i·k″` with `(k′ − i·k″)² = ρω²/G*`, so waves
//! `exp(iκ n̂·r)` decay along their direction of travel. One edge (or one
//! interior pixel) carries a Dirichlet excitation; every other edge uses the
//! first-order absorbing condition `∂u/∂n = iκu`.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{config_err, shape_err, Error, Result};
use crate::grid::{ComplexGrid, Grid, GridGeom, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Edge {
    Left,
    Right,
    Top,
    Bottom,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Source {
    Edge { edge: Edge, amplitude: [f64; 2] },
    /// Interior pixel given as `[y, x]`.
    Point { pixel: [usize; 2], amplitude: [f64; 2] },
}

impl Source {
    fn amplitude(&self) -> C64 {
        let a = match self {
            Source::Edge { amplitude, .. } | Source::Point { amplitude, .. } => amplitude,
        };
        C64::new(a[0], a[1])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Region {
    pub name: String,
    /// Complex shear modulus `[G′, G″]` in Pa.
    pub modulus: [f64; 2],
}

/// A labelled material layout with its excitation.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneSpec {
    pub labels: Grid<usize>,
    pub regions: Vec<Region>,
    /// kg/m³
    pub density: f64,
    pub frequency_hz: f64,
    pub source: Source,
}

impl SceneSpec {
    pub fn omega(&self) -> f64 {
        TAU * self.frequency_hz
    }

    pub fn validate(&self) -> Result<()> {
        if self.regions.is_empty() {
            return Err(config_err("scene has no regions"));
        }
        if let Some(&l) = self.labels.data().iter().find(|&&l| l >= self.regions.len()) {
            return Err(config_err(format!("label {l} has no region")));
        }
        for r in &self.regions {
            if !(r.modulus[0] > 0.0) || r.modulus[1] < 0.0 {
                return Err(config_err(format!(
                    "region {} needs G' > 0 and G'' >= 0, got {:?}",
                    r.name, r.modulus
                )));
            }
        }
        if !(self.density > 0.0) {
            return Err(config_err("density must be positive"));
        }
        if !(self.frequency_hz > 0.0) {
            return Err(config_err("frequency must be positive"));
        }
        Ok(())
    }

    /// Traveling-wave wavenumber κ (rad/m) of a region.
    pub fn region_wavenumber(&self, region: usize) -> C64 {
        let [gr, gi] = self.regions[region].modulus;
        wavenumber_for_modulus(C64::new(gr, gi), self.density, self.omega())
    }

    pub fn region_mask(&self, region: usize) -> Vec<bool> {
        self.labels.data().iter().map(|&l| l == region).collect()
    }

    /// Ground-truth modulus maps (G′, G″) in Pa.
    pub fn modulus_maps(&self) -> (Grid<f64>, Grid<f64>) {
        (
            self.labels.map(|&l| self.regions[l].modulus[0]),
            self.labels.map(|&l| self.regions[l].modulus[1]),
        )
    }
}

/// κ = k′ + i·k″ with `(k′ − i·k″)² = ρω²/G*`.
pub fn wavenumber_for_modulus(modulus: C64, density: f64, omega: f64) -> C64 {
    ((density / modulus).sqrt() * omega).conj()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Inclusion {
    pub name: String,
    /// Centre `[y, x]` in mm from the grid origin pixel.
    pub center_mm: [f64; 2],
    pub radius_mm: f64,
    pub modulus: [f64; 2],
}

/// JSON description of a circular-inclusion phantom.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhantomConfig {
    pub dims: [usize; 2],
    pub spacing_mm: f64,
    pub density: f64,
    pub frequency_hz: f64,
    pub background: [f64; 2],
    pub inclusions: Vec<Inclusion>,
    pub source: Source,
}

impl Default for PhantomConfig {
    /// Background 2+0.2i kPa with two 10 mm inclusions of 4+0.48i and
    /// 6+0.84i kPa, excited from the left edge.
    fn default() -> Self {
        let dims = [96, 96];
        let spacing = 1.5;
        let mid_y = (dims[0] as f64 - 1.0) * spacing / 2.0;
        let width = (dims[1] as f64 - 1.0) * spacing;
        Self {
            dims,
            spacing_mm: spacing,
            density: 1000.0,
            frequency_hz: 60.0,
            background: [2000.0, 200.0],
            inclusions: vec![
                Inclusion {
                    name: "inclusion1".into(),
                    center_mm: [mid_y, width * 0.35],
                    radius_mm: 10.0,
                    modulus: [4000.0, 480.0],
                },
                Inclusion {
                    name: "inclusion2".into(),
                    center_mm: [mid_y, width * 0.7],
                    radius_mm: 10.0,
                    modulus: [6000.0, 840.0],
                },
            ],
            source: Source::Edge {
                edge: Edge::Left,
                amplitude: [1.0, 0.0],
            },
        }
    }
}

impl PhantomConfig {
    pub fn geom(&self) -> Result<GridGeom> {
        GridGeom::square(self.dims[0], self.dims[1], self.spacing_mm)
    }

    /// Rasterize to a scene: region 0 is the background, region `i` the
    /// i-th inclusion (later inclusions win on overlap).
    pub fn scene(&self) -> Result<SceneSpec> {
        let geom = self.geom()?;
        let mut regions = vec![Region {
            name: "background".into(),
            modulus: self.background,
        }];
        regions.extend(self.inclusions.iter().map(|inc| Region {
            name: inc.name.clone(),
            modulus: inc.modulus,
        }));
        let h = self.spacing_mm;
        let labels = Grid::from_fn(geom.clone(), |idx| {
            let c = geom.coords(idx);
            let (y, x) = (c[0] as f64 * h, c[1] as f64 * h);
            self.inclusions
                .iter()
                .enumerate()
                .rev()
                .find(|(_, inc)| {
                    let dy = y - inc.center_mm[0];
                    let dx = x - inc.center_mm[1];
                    (dy * dy + dx * dx).sqrt() <= inc.radius_mm
                })
                .map_or(0, |(i, _)| i + 1)
        });
        let scene = SceneSpec {
            labels,
            regions,
            density: self.density,
            frequency_hz: self.frequency_hz,
            source: self.source.clone(),
        };
        scene.validate()?;
        Ok(scene)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Relative residual ‖b − Au‖/‖b‖ at which iteration stops.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 200_000,
        }
    }
}

/// Outcome of a converged solve.
#[derive(Clone, Debug)]
pub struct HelmholtzSolution {
    pub field: ComplexGrid,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Discretized operator. Interior rows are scaled by `h_ref²` so all
/// coefficients are O(1); Dirichlet rows are identity.
struct Operator {
    geom: GridGeom,
    kappa: Vec<C64>,
    dirichlet: Vec<bool>,
    inv_h2: [f64; 2],
    h: [f64; 2],
    row_scale: f64,
}

impl Operator {
    fn new(scene: &SceneSpec, geom: &GridGeom) -> Result<Self> {
        let kappa: Vec<C64> = (0..scene.regions.len())
            .map(|r| scene.region_wavenumber(r))
            .collect();
        let kappa = scene.labels.data().iter().map(|&l| kappa[l]).collect();
        let (ny, nx) = (geom.ny(), geom.nx());
        let dirichlet = (0..geom.len())
            .map(|idx| {
                let (y, x) = (idx / nx, idx % nx);
                match &scene.source {
                    Source::Edge { edge, .. } => match edge {
                        Edge::Left => x == 0,
                        Edge::Right => x == nx - 1,
                        Edge::Top => y == 0,
                        Edge::Bottom => y == ny - 1,
                    },
                    Source::Point { pixel, .. } => pixel[0] == y && pixel[1] == x,
                }
            })
            .collect();
        let h = [geom.spacing_m(0), geom.spacing_m(1)];
        let h_ref = h[0].min(h[1]);
        Ok(Self {
            geom: geom.clone(),
            kappa,
            dirichlet,
            inv_h2: [1.0 / (h[0] * h[0]), 1.0 / (h[1] * h[1])],
            h,
            row_scale: h_ref * h_ref,
        })
    }

    /// Row of the continuous (unscaled) operator applied to `u` at `idx`,
    /// with ghost points from the absorbing condition on boundary rows.
    fn helmholtz_row(&self, u: &[C64], idx: usize) -> C64 {
        let dims = self.geom.dims();
        let k = self.kappa[idx];
        let mut acc = k * k * u[idx];
        for axis in 0..2 {
            let n = dims[axis];
            let s = self.geom.stride(axis);
            let c = (idx / s) % n;
            let centre = u[idx];
            let (lo, hi) = if c == 0 {
                let hi = u[idx + s];
                (hi + C64::i() * k * (2.0 * self.h[axis]) * centre, hi)
            } else if c == n - 1 {
                let lo = u[idx - s];
                (lo, lo + C64::i() * k * (2.0 * self.h[axis]) * centre)
            } else {
                (u[idx - s], u[idx + s])
            };
            acc += (lo + hi - centre * 2.0) * self.inv_h2[axis];
        }
        acc
    }

    fn apply(&self, u: &[C64], out: &mut [C64]) {
        for idx in 0..u.len() {
            out[idx] = if self.dirichlet[idx] {
                u[idx]
            } else {
                self.helmholtz_row(u, idx) * self.row_scale
            };
        }
    }

    fn diagonal(&self) -> Vec<C64> {
        let dims = self.geom.dims();
        (0..self.geom.len())
            .map(|idx| {
                if self.dirichlet[idx] {
                    return C64::new(1.0, 0.0);
                }
                let k = self.kappa[idx];
                let mut d = k * k;
                for axis in 0..2 {
                    let n = dims[axis];
                    let c = (idx / self.geom.stride(axis)) % n;
                    d -= 2.0 * self.inv_h2[axis];
                    if c == 0 || c == n - 1 {
                        d += C64::i() * k * (2.0 * self.h[axis]) * self.inv_h2[axis];
                    }
                }
                d * self.row_scale
            })
            .collect()
    }
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Jacobi-preconditioned BiCGSTAB for `A x = b`.
fn bicgstab(op: &Operator, b: &[C64], config: &SolverConfig) -> Result<(Vec<C64>, usize, f64)> {
    let n = b.len();
    let inv_diag: Vec<C64> = op.diagonal().iter().map(|d| d.inv()).collect();
    let b_norm = norm(b);
    let mut x = vec![C64::new(0.0, 0.0); n];
    if b_norm == 0.0 {
        return Ok((x, 0, 0.0));
    }
    let mut r = b.to_vec();
    let mut r_hat = r.clone();
    let mut p = vec![C64::new(0.0, 0.0); n];
    let mut v = p.clone();
    let mut p_hat = p.clone();
    let mut s_hat = p.clone();
    let mut t = p.clone();
    let (mut rho_old, mut alpha, mut omega) = (C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(1.0, 0.0));
    let mut rel = 1.0;

    for it in 1..=config.max_iterations {
        let rho = dot(&r_hat, &r);
        if rho.norm() < 1e-300 {
            // breakdown: restart the shadow residual
            r_hat.copy_from_slice(&r);
            rho_old = C64::new(1.0, 0.0);
            alpha = rho_old;
            omega = rho_old;
            p.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
            v.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
            continue;
        }
        let beta = (rho / rho_old) * (alpha / omega);
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
            p_hat[i] = inv_diag[i] * p[i];
        }
        op.apply(&p_hat, &mut v);
        alpha = rho / dot(&r_hat, &v);
        // r becomes s in place
        for i in 0..n {
            r[i] -= alpha * v[i];
            x[i] += alpha * p_hat[i];
        }
        rel = norm(&r) / b_norm;
        if rel <= config.tolerance {
            return Ok((x, it, rel));
        }
        for i in 0..n {
            s_hat[i] = inv_diag[i] * r[i];
        }
        op.apply(&s_hat, &mut t);
        let tt = dot(&t, &t).re;
        omega = if tt > 0.0 { dot(&t, &r) / tt } else { C64::new(0.0, 0.0) };
        for i in 0..n {
            x[i] += omega * s_hat[i];
            r[i] -= omega * t[i];
        }
        rel = norm(&r) / b_norm;
        if !rel.is_finite() {
            return Err(Error::NonFinite {
                stage: "helmholtz solve",
                iteration: it,
            });
        }
        if rel <= config.tolerance {
            return Ok((x, it, rel));
        }
        if omega.norm() == 0.0 {
            r_hat.copy_from_slice(&r);
            rho_old = C64::new(1.0, 0.0);
            alpha = rho_old;
            omega = rho_old;
            p.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
            v.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
            continue;
        }
        rho_old = rho;
    }
    Err(Error::NonConvergence {
        iterations: config.max_iterations,
        residual: rel,
    })
}

/// Solve the phantom wavefield for `scene` sampled on `geom`.
pub fn solve_helmholtz_phantom(
    scene: &SceneSpec,
    geom: &GridGeom,
    config: &SolverConfig,
) -> Result<HelmholtzSolution> {
    scene.validate()?;
    if geom.ndim() != 2 {
        return Err(shape_err("the phantom solver is 2D only"));
    }
    if scene.labels.geom().dims() != geom.dims() {
        return Err(shape_err(format!(
            "scene labels {:?} do not cover grid {:?}",
            scene.labels.geom().dims(),
            geom.dims()
        )));
    }
    if geom.dims().iter().any(|&d| d < 3) {
        return Err(shape_err("phantom grids need at least 3 pixels per axis"));
    }
    if let Source::Point { pixel, .. } = &scene.source {
        if pixel[0] >= geom.ny() || pixel[1] >= geom.nx() {
            return Err(config_err(format!("source pixel {pixel:?} is outside the grid")));
        }
    }
    let op = Operator::new(scene, geom)?;
    let amp = scene.source.amplitude();
    let b: Vec<C64> = op
        .dirichlet
        .iter()
        .map(|&d| if d { amp } else { C64::new(0.0, 0.0) })
        .collect();
    let (x, iterations, relative_residual) = bicgstab(&op, &b, config)?;
    Ok(HelmholtzSolution {
        field: Grid::from_vec(geom.clone(), x)?,
        iterations,
        relative_residual,
    })
}

/// `‖∇²u + κ²u‖ / ‖κ²u‖` over pixels that are neither Dirichlet nor on the
/// grid boundary.
pub fn interior_residual(scene: &SceneSpec, u: &ComplexGrid) -> Result<f64> {
    let op = Operator::new(scene, u.geom())?;
    let (mut num, mut den) = (0.0, 0.0);
    for idx in 0..u.len() {
        if op.dirichlet[idx] || !u.geom().is_interior(idx) {
            continue;
        }
        num += op.helmholtz_row(u.data(), idx).norm_sqr();
        den += (op.kappa[idx] * op.kappa[idx] * u.data()[idx]).norm_sqr();
    }
    Ok((num / den).sqrt())
}
