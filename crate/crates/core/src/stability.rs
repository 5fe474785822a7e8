//! Linear stability of FSRK schemes.
//!
//! For the test equation `y' = Σ λ_l y` every sub-flow is a scalar
//! multiplication, so one step multiplies `y` by
//! `R(z_1..z_N) = Π_k Π_l R[k][l](alpha[k][l] z_l)` with `z_l = λ_l dt`.
//! Regions are scanned in the standard `z = λ dt` plane.

use std::collections::VecDeque;
use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coef::Coef;
use crate::error::{FsrkError, Result};
use crate::gark::FsrkScheme;
use crate::tableau::ScalarStabilityFunction;

/// `R[k][l]` together with its argument scale `alpha[k][l]`.
#[derive(Clone, Debug)]
pub struct Factor {
    pub stage: usize,
    pub operator: usize,
    pub alpha: Coef,
    pub tableau: String,
    pub function: ScalarStabilityFunction,
    a: Vec<Vec<f64>>,
}

impl Factor {
    pub fn eval(&self, z_l: Complex64) -> Complex64 {
        if self.alpha.is_zero() {
            return Complex64::new(1.0, 0.0);
        }
        self.function.eval(z_l * self.alpha.to_f64())
    }

    /// `|det(I - alpha z A)|` for this factor's sub-integrator.
    pub fn resolvent_det(&self, z_l: Complex64) -> f64 {
        let s = self.a.len();
        let scale = z_l * self.alpha.to_f64();
        let m = DMatrix::<Complex64>::from_fn(s, s, |i, j| {
            let id = if i == j { 1.0 } else { 0.0 };
            Complex64::new(id, 0.0) - scale * self.a[i][j]
        });
        m.determinant().norm()
    }

    pub fn a_norm(&self) -> f64 {
        self.a
            .iter()
            .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug)]
pub struct ProductStabilityFunction {
    pub scheme: String,
    pub operators: usize,
    /// Application order: stage outer, operator inner.
    pub factors: Vec<Factor>,
}

pub fn product_stability(scheme: &FsrkScheme) -> ProductStabilityFunction {
    let mut factors = Vec::with_capacity(scheme.stages() * scheme.operators());
    for k in 0..scheme.stages() {
        for l in scheme.splitting.stage_sequence(k) {
            let t = &scheme.integrators[k][l];
            factors.push(Factor {
                stage: k,
                operator: l,
                alpha: scheme.alpha(k, l),
                tableau: t.name.clone(),
                function: t.stability_function(),
                a: t.a_f64(),
            });
        }
    }
    ProductStabilityFunction {
        scheme: scheme.label(),
        operators: scheme.operators(),
        factors,
    }
}

impl ProductStabilityFunction {
    pub fn eval(&self, z: &[Complex64]) -> Result<Complex64> {
        if z.len() != self.operators {
            return Err(FsrkError::Dimension(format!(
                "expected {} arguments, got {}",
                self.operators,
                z.len()
            )));
        }
        Ok(self.factors.iter().map(|f| f.eval(z[f.operator])).product())
    }

    pub fn eval_ray(&self, ray: &RayRestriction, z: Complex64) -> Complex64 {
        self.factors
            .iter()
            .map(|f| f.eval(z * ray.weights[f.operator]))
            .product()
    }

    /// Poles in the per-operator variable `z_l`: `1 / (alpha mu)` for each
    /// nonzero eigenvalue `mu` of a sub-integrator's `A`. Coincident poles
    /// of one operator are merged; the list is sorted by real part.
    pub fn poles(&self) -> Vec<Pole> {
        let mut out: Vec<Pole> = Vec::new();
        for f in &self.factors {
            let alpha = f.alpha.to_f64();
            if f.alpha.is_zero() {
                continue;
            }
            for mu in eigenvalues(&f.a) {
                if mu.norm() <= 1e-12 {
                    continue;
                }
                let z = 1.0 / (mu * alpha);
                let z = Complex64::new(
                    z.re,
                    if z.im.abs() <= 1e-12 * z.norm() {
                        0.0
                    } else {
                        z.im
                    },
                );
                match out.iter_mut().find(|p| {
                    p.operator == f.operator && (p.z - z).norm() <= 1e-8 * (1.0 + z.norm())
                }) {
                    Some(p) => {
                        p.multiplicity += 1;
                        if !p.stages.contains(&f.stage) {
                            p.stages.push(f.stage);
                        }
                    }
                    None => out.push(Pole {
                        z,
                        operator: f.operator,
                        stages: vec![f.stage],
                        multiplicity: 1,
                    }),
                }
            }
        }
        out.sort_by(|a, b| a.z.re.total_cmp(&b.z.re).then(a.z.im.total_cmp(&b.z.im)));
        out
    }
}

/// Eigenvalues of a tableau matrix: the diagonal when lower triangular,
/// otherwise a dense Schur decomposition with defective-cluster noise
/// flushed to zero.
fn eigenvalues(a: &[Vec<f64>]) -> Vec<Complex64> {
    let s = a.len();
    if (0..s).all(|i| (i + 1..s).all(|j| a[i][j] == 0.0)) {
        return (0..s).map(|i| Complex64::new(a[i][i], 0.0)).collect();
    }
    let m = DMatrix::<f64>::from_fn(s, s, |i, j| a[i][j]);
    let scale = m.amax().max(1.0);
    m.complex_eigenvalues()
        .iter()
        .map(|mu| {
            if mu.norm() <= 1e-6 * scale {
                Complex64::new(0.0, 0.0)
            } else {
                *mu
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pole {
    pub z: Complex64,
    pub operator: usize,
    pub stages: Vec<usize>,
    pub multiplicity: usize,
}

/// `z_l = w_l z`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RayRestriction {
    pub weights: Vec<f64>,
}

impl RayRestriction {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.iter().all(|w| *w == 0.0) {
            return Err(FsrkError::Invalid(
                "ray needs at least one nonzero weight".into(),
            ));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(FsrkError::Invalid("ray weights must be finite".into()));
        }
        Ok(RayRestriction { weights })
    }

    pub fn args(&self, z: Complex64) -> Vec<Complex64> {
        self.weights.iter().map(|w| z * w).collect()
    }

    /// Poles of `f` mapped onto the single ray variable.
    pub fn poles(&self, f: &ProductStabilityFunction) -> Vec<Pole> {
        let mut out: Vec<Pole> = Vec::new();
        for p in f.poles() {
            let w = self.weights[p.operator];
            if w == 0.0 {
                continue;
            }
            let z = p.z / w;
            match out
                .iter_mut()
                .find(|q| (q.z - z).norm() <= 1e-8 * (1.0 + z.norm()))
            {
                Some(q) => {
                    q.multiplicity += p.multiplicity;
                    for s in p.stages {
                        if !q.stages.contains(&s) {
                            q.stages.push(s);
                        }
                    }
                }
                None => out.push(Pole { z, ..p }),
            }
        }
        out.sort_by(|a, b| a.z.re.total_cmp(&b.z.re).then(a.z.im.total_cmp(&b.z.im)));
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Intercept {
    Finite(f64),
    /// `|R| < 1` on the whole sampled negative axis.
    Unbounded,
}

impl Intercept {
    pub fn finite(self) -> Option<f64> {
        match self {
            Intercept::Finite(x) => Some(x),
            Intercept::Unbounded => None,
        }
    }
}

/// Sampled range of the negative real axis, `-10^e` for `e` in this range.
pub const INTERCEPT_DECADES: (i32, i32) = (-6, 6);
const SAMPLES_PER_DECADE: usize = 400;
/// Unstable intervals around a pole narrower than this fraction of the
/// pole's modulus are treated as punctures.
pub const PUNCTURE_FRACTION: f64 = 0.1;

/// Most negative `x*` with `|R| < 1` on `(x*, 0)`, ignoring narrow pole
/// punctures.
pub fn real_axis_intercept(
    f: &ProductStabilityFunction,
    ray: &RayRestriction,
) -> Result<Intercept> {
    let abs_r = |x: f64| {
        let v = f.eval_ray(ray, Complex64::new(x, 0.0)).norm();
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    let stable = |x: f64| abs_r(x) < 1.0;
    let (e0, e1) = INTERCEPT_DECADES;
    let n = (e1 - e0) as usize * SAMPLES_PER_DECADE;
    let xs: Vec<f64> = (0..=n)
        .map(|i| -(10f64).powf(e0 as f64 + i as f64 / SAMPLES_PER_DECADE as f64))
        .collect();
    if !stable(xs[0]) {
        return Err(FsrkError::DegenerateRay);
    }
    let poles: Vec<f64> = ray
        .poles(f)
        .iter()
        .filter(|p| p.z.re < 0.0 && p.z.im.abs() <= 1e-9 * p.z.norm())
        .map(|p| p.z.re)
        .collect();

    let mut i = 0;
    while i < n {
        if stable(xs[i + 1]) {
            i += 1;
            continue;
        }
        let left_edge = bisect(&stable, xs[i], xs[i + 1]);
        // walk to the far side of the unstable interval
        let mut j = i + 1;
        while j <= n && !stable(xs[j]) {
            j += 1;
        }
        if j > n {
            return Ok(Intercept::Finite(left_edge));
        }
        let right_edge = bisect(&|x| !stable(x), xs[j - 1], xs[j]);
        let width = (left_edge - right_edge).abs();
        let punctured = poles
            .iter()
            .any(|&p| p <= left_edge && p >= right_edge && width < PUNCTURE_FRACTION * p.abs());
        if !punctured {
            return Ok(Intercept::Finite(left_edge));
        }
        i = j;
    }
    Ok(Intercept::Unbounded)
}

/// Finds the switch of `pred` between `a` (true) and `b` (false) to 1e-6
/// relative.
fn bisect(pred: &dyn Fn(f64) -> bool, mut a: f64, mut b: f64) -> f64 {
    while (a - b).abs() > 1e-12 * a.abs().max(b.abs()) {
        let m = 0.5 * (a + b);
        if pred(m) {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Polar sample of the open left half-plane.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HalfPlaneSample {
    pub samples: usize,
    pub unstable: Vec<Complex64>,
    pub max_abs_r: f64,
}

/// Evaluates `|R|` at `n_r` log-spaced radii in `[r_min, r_max]` times
/// `n_theta` angles strictly inside `(pi/2, 3pi/2)`.
pub fn sample_left_half_plane(
    f: &ProductStabilityFunction,
    ray: &RayRestriction,
    (r_min, r_max): (f64, f64),
    n_r: usize,
    n_theta: usize,
) -> HalfPlaneSample {
    let radii: Vec<f64> = (0..n_r)
        .map(|i| r_min * (r_max / r_min).powf(i as f64 / (n_r.max(2) - 1) as f64))
        .collect();
    let rows: Vec<(Vec<Complex64>, f64)> = radii
        .par_iter()
        .map(|&r| {
            let mut bad = Vec::new();
            let mut max: f64 = 0.0;
            for j in 0..n_theta {
                let theta = std::f64::consts::FRAC_PI_2
                    + std::f64::consts::PI * (j as f64 + 0.5) / n_theta as f64;
                let z = Complex64::from_polar(r, theta);
                let v = f.eval_ray(ray, z).norm();
                let v = if v.is_finite() { v } else { f64::INFINITY };
                max = max.max(v);
                if v >= 1.0 {
                    bad.push(z);
                }
            }
            (bad, max)
        })
        .collect();
    HalfPlaneSample {
        samples: n_r * n_theta,
        unstable: rows.iter().flat_map(|r| r.0.iter().copied()).collect(),
        max_abs_r: rows.iter().map(|r| r.1).fold(0.0, f64::max),
    }
}

/// Rectangular grid; `n_re x n_im` points including the corners.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
    pub n_re: usize,
    pub n_im: usize,
}

pub const DEFAULT_RESOLUTION: usize = 801;

impl GridSpec {
    pub fn new(re: (f64, f64), im: (f64, f64), n_re: usize, n_im: usize) -> Result<Self> {
        if n_re < 2 || n_im < 2 {
            return Err(FsrkError::Invalid(format!(
                "grid resolution {n_re}x{n_im} is below 2x2"
            )));
        }
        if !(re.0 < re.1 && im.0 < im.1) || ![re.0, re.1, im.0, im.1].iter().all(|x| x.is_finite())
        {
            return Err(FsrkError::Invalid(
                "grid ranges must be finite and increasing".into(),
            ));
        }
        Ok(GridSpec {
            re_min: re.0,
            re_max: re.1,
            im_min: im.0,
            im_max: im.1,
            n_re,
            n_im,
        })
    }

    /// `[-x_max, 1] x [-x_max, x_max]`, with `x_max` 1.5 times the larger of
    /// the finite intercept and the most negative left-half-plane pole.
    pub fn auto(f: &ProductStabilityFunction, ray: &RayRestriction) -> GridSpec {
        let intercept = real_axis_intercept(f, ray)
            .ok()
            .and_then(Intercept::finite)
            .map(f64::abs);
        let pole = ray
            .poles(f)
            .iter()
            .filter(|p| p.z.re < 0.0)
            .map(|p| p.z.re.abs())
            .fold(None, |m: Option<f64>, x| Some(m.map_or(x, |m| m.max(x))));
        let extent = match (intercept, pole) {
            (Some(a), Some(b)) => a.max(b),
            (Some(a), None) | (None, Some(a)) => a,
            (None, None) => 10.0 / 1.5,
        };
        let x_max = 1.5 * extent;
        GridSpec {
            re_min: -x_max,
            re_max: 1.0,
            im_min: -x_max,
            im_max: x_max,
            n_re: DEFAULT_RESOLUTION,
            n_im: DEFAULT_RESOLUTION,
        }
    }

    pub fn re(&self, j: usize) -> f64 {
        self.re_min + (self.re_max - self.re_min) * j as f64 / (self.n_re - 1) as f64
    }

    pub fn im(&self, i: usize) -> f64 {
        self.im_min + (self.im_max - self.im_min) * i as f64 / (self.n_im - 1) as f64
    }

    pub fn d_re(&self) -> f64 {
        (self.re_max - self.re_min) / (self.n_re - 1) as f64
    }

    pub fn d_im(&self) -> f64 {
        (self.im_max - self.im_min) / (self.n_im - 1) as f64
    }
}

/// `|R|` on a grid along a ray. Points are stored row-major with the
/// imaginary index outer.
#[derive(Clone, Debug)]
pub struct RegionScan {
    pub scheme: String,
    pub ray: RayRestriction,
    pub grid: GridSpec,
    pub abs_r: Vec<f64>,
    pub stable: Vec<bool>,
    /// Stable components are numbered from 1; unstable points carry 0.
    pub component: Vec<u32>,
    pub components: u32,
    pub poles: Vec<Pole>,
    /// Poles that fall inside the grid.
    pub poles_in_grid: Vec<Pole>,
    pub intercept: Option<Intercept>,
}

pub fn scan_region(
    f: &ProductStabilityFunction,
    ray: &RayRestriction,
    grid: GridSpec,
) -> RegionScan {
    let abs_r: Vec<f64> = (0..grid.n_im)
        .into_par_iter()
        .flat_map_iter(|i| {
            let im = grid.im(i);
            (0..grid.n_re).map(move |j| {
                let v = f.eval_ray(ray, Complex64::new(grid.re(j), im)).norm();
                if v.is_finite() {
                    v
                } else {
                    f64::INFINITY
                }
            })
        })
        .collect();
    let stable: Vec<bool> = abs_r.iter().map(|v| *v < 1.0).collect();
    let (component, components) = label_components(&stable, grid.n_re, grid.n_im, true);
    let poles = ray.poles(f);
    let poles_in_grid = poles
        .iter()
        .filter(|p| {
            (grid.re_min..=grid.re_max).contains(&p.z.re)
                && (grid.im_min..=grid.im_max).contains(&p.z.im)
        })
        .cloned()
        .collect();
    RegionScan {
        scheme: f.scheme.clone(),
        ray: ray.clone(),
        grid,
        abs_r,
        stable,
        component,
        components,
        poles,
        poles_in_grid,
        intercept: real_axis_intercept(f, ray).ok(),
    }
}

/// 4-connected labelling of cells whose mask equals `target`, from 1.
fn label_components(mask: &[bool], nx: usize, ny: usize, target: bool) -> (Vec<u32>, u32) {
    let mut label = vec![0u32; mask.len()];
    let mut next = 0;
    let mut queue = VecDeque::new();
    for start in 0..mask.len() {
        if mask[start] != target || label[start] != 0 {
            continue;
        }
        next += 1;
        label[start] = next;
        queue.push_back(start);
        while let Some(p) = queue.pop_front() {
            for q in neighbours(p, nx, ny) {
                if mask[q] == target && label[q] == 0 {
                    label[q] = next;
                    queue.push_back(q);
                }
            }
        }
    }
    (label, next)
}

fn neighbours(p: usize, nx: usize, ny: usize) -> impl Iterator<Item = usize> {
    let (i, j) = (p / nx, p % nx);
    let mut v = [None; 4];
    if j > 0 {
        v[0] = Some(p - 1);
    }
    if j + 1 < nx {
        v[1] = Some(p + 1);
    }
    if i > 0 {
        v[2] = Some(p - nx);
    }
    if i + 1 < ny {
        v[3] = Some(p + nx);
    }
    v.into_iter().flatten()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hole {
    pub re_range: (f64, f64),
    pub im_range: (f64, f64),
    pub cells: usize,
    pub nearest_pole: Option<Complex64>,
    pub max_abs_r: f64,
}

impl Hole {
    pub fn contains(&self, z: Complex64, slack: f64) -> bool {
        z.re >= self.re_range.0 - slack
            && z.re <= self.re_range.1 + slack
            && z.im >= self.im_range.0 - slack
            && z.im <= self.im_range.1 + slack
    }
}

impl RegionScan {
    pub fn index(&self, i_im: usize, j_re: usize) -> usize {
        i_im * self.grid.n_re + j_re
    }

    /// Label of the stable component holding the grid point just left of
    /// the origin, if any.
    pub fn main_component(&self) -> Option<u32> {
        let g = &self.grid;
        if !(g.re_min < 0.0 && g.re_max >= 0.0 && g.im_min <= 0.0 && g.im_max >= 0.0) {
            return None;
        }
        let i = ((0.0 - g.im_min) / g.d_im()).round() as usize;
        let j = (0..g.n_re).rev().find(|&j| g.re(j) < 0.0)?;
        let c = self.component[self.index(i.min(g.n_im - 1), j)];
        (c != 0).then_some(c)
    }

    /// Unstable components that avoid the grid boundary and are surrounded
    /// only by the main stable component.
    pub fn detect_holes(&self) -> Vec<Hole> {
        let Some(main) = self.main_component() else {
            return Vec::new();
        };
        let (nx, ny) = (self.grid.n_re, self.grid.n_im);
        let unstable: Vec<bool> = self.stable.iter().map(|s| !s).collect();
        let (label, count) = label_components(&unstable, nx, ny, true);
        let mut cells: Vec<Vec<usize>> = vec![Vec::new(); count as usize];
        for (p, &l) in label.iter().enumerate() {
            if l != 0 {
                cells[l as usize - 1].push(p);
            }
        }
        let mut holes = Vec::new();
        for members in cells {
            let on_boundary = members.iter().any(|&p| {
                let (i, j) = (p / nx, p % nx);
                i == 0 || j == 0 || i + 1 == ny || j + 1 == nx
            });
            if on_boundary {
                continue;
            }
            let enclosed = members
                .iter()
                .flat_map(|&p| neighbours(p, nx, ny))
                .all(|q| !self.stable[q] || self.component[q] == main);
            if !enclosed {
                continue;
            }
            let mut re_range = (f64::INFINITY, f64::NEG_INFINITY);
            let mut im_range = (f64::INFINITY, f64::NEG_INFINITY);
            let mut max_abs_r: f64 = 0.0;
            for &p in &members {
                let (re, im) = (self.grid.re(p % nx), self.grid.im(p / nx));
                re_range = (re_range.0.min(re), re_range.1.max(re));
                im_range = (im_range.0.min(im), im_range.1.max(im));
                max_abs_r = max_abs_r.max(self.abs_r[p]);
            }
            let centre = Complex64::new(
                0.5 * (re_range.0 + re_range.1),
                0.5 * (im_range.0 + im_range.1),
            );
            let nearest_pole = self
                .poles
                .iter()
                .map(|p| p.z)
                .min_by(|a, b| (a - centre).norm().total_cmp(&(b - centre).norm()));
            holes.push(Hole {
                re_range,
                im_range,
                cells: members.len(),
                nearest_pole,
                max_abs_r,
            });
        }
        holes
    }

    /// CSV with header `re,im,absR,stable,component`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["re", "im", "absR", "stable", "component"])?;
        for i in 0..self.grid.n_im {
            for j in 0..self.grid.n_re {
                let p = self.index(i, j);
                w.write_record(&[
                    self.grid.re(j).to_string(),
                    self.grid.im(i).to_string(),
                    self.abs_r[p].to_string(),
                    u8::from(self.stable[p]).to_string(),
                    self.component[p].to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn metadata(&self) -> ScanMetadata {
        ScanMetadata {
            scheme: self.scheme.clone(),
            ray: self.ray.weights.clone(),
            grid: self.grid,
            poles: self.poles.clone(),
            intercept: self.intercept,
            holes: self.detect_holes(),
            stable_components: self.components,
        }
    }
}

/// Sidecar written next to a region CSV.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScanMetadata {
    pub scheme: String,
    pub ray: Vec<f64>,
    pub grid: GridSpec,
    pub poles: Vec<Pole>,
    pub intercept: Option<Intercept>,
    pub holes: Vec<Hole>,
    pub stable_components: u32,
}
