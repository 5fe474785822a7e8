//! Built-in additive test problems.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{FsrkError, Result};
use crate::integrator::{
    integrate, reference_scheme, AdditiveOdeProblem, IntegrationResult, Summed,
};

/// Decoupled complex modes `y_m' = Σ_l λ[m][l] y_m`, stored as
/// `[re_1, im_1, re_2, im_2, ..]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagonalLinearProblem {
    /// `lambdas[m][l]`: rate of mode `m` under operator `l`.
    pub lambdas: Vec<Vec<Complex64>>,
    pub y0: Vec<Complex64>,
    pub span: (f64, f64),
}

impl DiagonalLinearProblem {
    pub fn new(lambdas: Vec<Vec<Complex64>>, y0: Vec<Complex64>, span: (f64, f64)) -> Result<Self> {
        let n = lambdas.first().map_or(0, Vec::len);
        if n == 0 || lambdas.iter().any(|r| r.len() != n) {
            return Err(FsrkError::Dimension(
                "every mode needs one rate per operator".into(),
            ));
        }
        if y0.len() != lambdas.len() {
            return Err(FsrkError::Dimension(format!(
                "{} modes but {} initial values",
                lambdas.len(),
                y0.len()
            )));
        }
        Ok(DiagonalLinearProblem { lambdas, y0, span })
    }

    pub fn modes(&self) -> usize {
        self.lambdas.len()
    }

    pub fn exact(&self, t: f64) -> Vec<f64> {
        let dt = t - self.span.0;
        self.lambdas
            .iter()
            .zip(&self.y0)
            .flat_map(|(lam, y0)| {
                let y = y0 * (lam.iter().sum::<Complex64>() * dt).exp();
                [y.re, y.im]
            })
            .collect()
    }
}

fn pack(y: &[Complex64]) -> Vec<f64> {
    y.iter().flat_map(|v| [v.re, v.im]).collect()
}

impl AdditiveOdeProblem for DiagonalLinearProblem {
    fn dim(&self) -> usize {
        2 * self.modes()
    }

    fn operators(&self) -> usize {
        self.lambdas[0].len()
    }

    fn eval(&self, op: usize, _t: f64, y: &[f64], out: &mut [f64]) {
        for (m, lam) in self.lambdas.iter().enumerate() {
            let v = lam[op] * Complex64::new(y[2 * m], y[2 * m + 1]);
            out[2 * m] = v.re;
            out[2 * m + 1] = v.im;
        }
    }

    fn jacobian(&self, op: usize, _t: f64, _y: &[f64], out: &mut DMatrix<f64>) -> bool {
        out.fill(0.0);
        for (m, lam) in self.lambdas.iter().enumerate() {
            let (r, i) = (2 * m, 2 * m + 1);
            out[(r, r)] = lam[op].re;
            out[(r, i)] = -lam[op].im;
            out[(i, r)] = lam[op].im;
            out[(i, i)] = lam[op].re;
        }
        true
    }

    fn is_linear(&self, _op: usize) -> bool {
        true
    }

    fn initial_state(&self) -> Vec<f64> {
        pack(&self.y0)
    }

    fn span(&self) -> (f64, f64) {
        self.span
    }

    fn name(&self) -> String {
        "diagonal-linear".into()
    }
}

/// The scalar test equation `y' = Σ_l λ_l y`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearSplitProblem {
    pub lambda: Vec<Complex64>,
    pub y0: Complex64,
    pub span: (f64, f64),
}

impl LinearSplitProblem {
    pub fn as_diagonal(&self) -> DiagonalLinearProblem {
        DiagonalLinearProblem {
            lambdas: vec![self.lambda.clone()],
            y0: vec![self.y0],
            span: self.span,
        }
    }

    pub fn exact(&self, t: f64) -> Vec<f64> {
        self.as_diagonal().exact(t)
    }
}

impl AdditiveOdeProblem for LinearSplitProblem {
    fn dim(&self) -> usize {
        2
    }

    fn operators(&self) -> usize {
        self.lambda.len()
    }

    fn eval(&self, op: usize, _t: f64, y: &[f64], out: &mut [f64]) {
        let v = self.lambda[op] * Complex64::new(y[0], y[1]);
        out[0] = v.re;
        out[1] = v.im;
    }

    fn jacobian(&self, op: usize, _t: f64, _y: &[f64], out: &mut DMatrix<f64>) -> bool {
        let l = self.lambda[op];
        out[(0, 0)] = l.re;
        out[(0, 1)] = -l.im;
        out[(1, 0)] = l.im;
        out[(1, 1)] = l.re;
        true
    }

    fn is_linear(&self, _op: usize) -> bool {
        true
    }

    fn initial_state(&self) -> Vec<f64> {
        vec![self.y0.re, self.y0.im]
    }

    fn span(&self) -> (f64, f64) {
        self.span
    }

    fn name(&self) -> String {
        "linear-split".into()
    }
}

/// `λ_l = total * fractions[l]`, `y(0) = 1` on `[0, 1]`.
pub fn linear_split(total: f64, fractions: &[f64]) -> Result<LinearSplitProblem> {
    let sum: f64 = fractions.iter().sum();
    if fractions.is_empty() || (sum - 1.0).abs() > 1e-12 {
        return Err(FsrkError::Invalid(format!(
            "split fractions must sum to 1, got {sum}"
        )));
    }
    Ok(LinearSplitProblem {
        lambda: fractions
            .iter()
            .map(|f| Complex64::new(total * f, 0.0))
            .collect(),
        y0: Complex64::new(1.0, 0.0),
        span: (0.0, 1.0),
    })
}

/// Logistic growth `y' = r y - r y^2` split into growth and saturation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticSplit {
    pub rate: f64,
    pub y0: f64,
    pub span: (f64, f64),
}

impl Default for LogisticSplit {
    fn default() -> Self {
        LogisticSplit {
            rate: 1.0,
            y0: 0.2,
            span: (0.0, 1.0),
        }
    }
}

impl LogisticSplit {
    pub fn exact(&self, t: f64) -> Vec<f64> {
        let e = (-self.rate * (t - self.span.0)).exp();
        vec![1.0 / (1.0 + (1.0 / self.y0 - 1.0) * e)]
    }
}

impl AdditiveOdeProblem for LogisticSplit {
    fn dim(&self) -> usize {
        1
    }

    fn operators(&self) -> usize {
        2
    }

    fn eval(&self, op: usize, _t: f64, y: &[f64], out: &mut [f64]) {
        out[0] = match op {
            0 => self.rate * y[0],
            _ => -self.rate * y[0] * y[0],
        };
    }

    fn jacobian(&self, op: usize, _t: f64, y: &[f64], out: &mut DMatrix<f64>) -> bool {
        out[(0, 0)] = match op {
            0 => self.rate,
            _ => -2.0 * self.rate * y[0],
        };
        true
    }

    fn is_linear(&self, op: usize) -> bool {
        op == 0
    }

    fn initial_state(&self) -> Vec<f64> {
        vec![self.y0]
    }

    fn span(&self) -> (f64, f64) {
        self.span
    }

    fn name(&self) -> String {
        "logistic".into()
    }
}

/// `y' = cos t - y`: a time-dependent forcing and a linear decay.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForcedDecay {
    pub y0: f64,
    pub span: (f64, f64),
}

impl Default for ForcedDecay {
    fn default() -> Self {
        ForcedDecay {
            y0: 1.0,
            span: (0.0, 2.0),
        }
    }
}

impl ForcedDecay {
    pub fn exact(&self, t: f64) -> Vec<f64> {
        let t0 = self.span.0;
        // y = (cos t + sin t)/2 + K e^{-t}
        let k = (self.y0 - 0.5 * (t0.cos() + t0.sin())) * t0.exp();
        vec![0.5 * (t.cos() + t.sin()) + k * (-t).exp()]
    }
}

impl AdditiveOdeProblem for ForcedDecay {
    fn dim(&self) -> usize {
        1
    }

    fn operators(&self) -> usize {
        2
    }

    fn eval(&self, op: usize, t: f64, y: &[f64], out: &mut [f64]) {
        out[0] = match op {
            0 => t.cos(),
            _ => -y[0],
        };
    }

    fn jacobian(&self, op: usize, _t: f64, _y: &[f64], out: &mut DMatrix<f64>) -> bool {
        out[(0, 0)] = if op == 0 { 0.0 } else { -1.0 };
        true
    }

    fn is_linear(&self, _op: usize) -> bool {
        true
    }

    fn initial_state(&self) -> Vec<f64> {
        vec![self.y0]
    }

    fn span(&self) -> (f64, f64) {
        self.span
    }

    fn name(&self) -> String {
        "forced-decay".into()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BrusselatorParams {
    pub alpha: f64,
    pub beta: f64,
    pub d1: f64,
    pub d2: f64,
    pub t_end: f64,
}

impl Default for BrusselatorParams {
    fn default() -> Self {
        BrusselatorParams {
            alpha: 0.6,
            beta: 2.0,
            d1: 1.0 / 40.0,
            d2: 1.0 / 40.0,
            t_end: 80.0,
        }
    }
}

/// 1D Brusselator by central differences on `[0, 1]` with pinned Dirichlet
/// ends. Operator 0 is diffusion, operator 1 the reaction. The state is
/// `[T_1..T_nx, C_1..C_nx]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BrusselatorMol {
    pub nx: usize,
    pub dx: f64,
    pub params: BrusselatorParams,
}

pub fn brusselator(nx: usize, params: BrusselatorParams) -> Result<BrusselatorMol> {
    if nx < 3 {
        return Err(FsrkError::Dimension(format!(
            "Brusselator needs at least 3 grid points, got {nx}"
        )));
    }
    Ok(BrusselatorMol {
        nx,
        dx: 1.0 / (nx - 1) as f64,
        params,
    })
}

impl BrusselatorMol {
    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.dx
    }

    /// Closed-form eigenvalues of the diffusion Jacobian, ascending. Each
    /// interior mode appears once per species; pinned boundary rows add
    /// four zeros.
    pub fn diffusion_spectrum(&self) -> Vec<f64> {
        let m = (self.nx - 1) as f64;
        let mut out = Vec::with_capacity(2 * self.nx);
        for d in [self.params.d1, self.params.d2] {
            let scale = 4.0 * d / (self.dx * self.dx);
            for j in 1..self.nx - 1 {
                let s = (j as f64 * std::f64::consts::PI / (2.0 * m)).sin();
                out.push(-scale * s * s);
            }
            out.extend([0.0, 0.0]);
        }
        out.sort_by(f64::total_cmp);
        out
    }

    /// Diffusion eigenvalues from a dense eigendecomposition, ascending.
    pub fn diffusion_spectrum_dense(&self) -> Vec<f64> {
        let n = self.dim();
        let mut j = DMatrix::zeros(n, n);
        self.jacobian(0, 0.0, &vec![0.0; n], &mut j);
        let mut out: Vec<f64> = j.complex_eigenvalues().iter().map(|z| z.re).collect();
        out.sort_by(f64::total_cmp);
        out
    }

    /// Eigenvalues of the 2x2 reaction Jacobian at every interior point.
    pub fn reaction_spectrum(&self, y: &[f64]) -> Result<Vec<Complex64>> {
        if y.len() != self.dim() {
            return Err(FsrkError::Dimension(format!(
                "state has length {}, expected {}",
                y.len(),
                self.dim()
            )));
        }
        let beta = self.params.beta;
        let mut out = Vec::with_capacity(2 * (self.nx - 2));
        for i in 1..self.nx - 1 {
            let (t, c) = (y[i], y[self.nx + i]);
            let m = [
                [-(beta + 1.0) + 2.0 * t * c, t * t],
                [beta - 2.0 * t * c, -t * t],
            ];
            out.extend(eig2(m));
        }
        Ok(out)
    }

    /// Unsplit reference trajectory sampled at `samples` equally spaced
    /// times on the span, with substeps no longer than `max_dt`.
    pub fn reference_samples(&self, samples: usize, max_dt: f64) -> Result<IntegrationResult> {
        let (t0, t1) = self.span();
        let interval = (t1 - t0) / (samples.max(2) - 1) as f64;
        let sub = (interval / max_dt).ceil().max(1.0) as usize;
        integrate(
            &reference_scheme(),
            &Summed(self),
            interval / sub as f64,
            sub,
        )
    }

    /// Reaction eigenvalues along [`reference_samples`](Self::reference_samples).
    pub fn reaction_spectrum_along_reference(
        &self,
        samples: usize,
        max_dt: f64,
    ) -> Result<Vec<Complex64>> {
        let r = self.reference_samples(samples, max_dt)?;
        let mut out = Vec::new();
        for y in &r.states {
            out.extend(self.reaction_spectrum(y)?);
        }
        Ok(out)
    }
}

/// The element with the most negative real part.
pub fn most_negative_real(values: &[Complex64]) -> Option<Complex64> {
    values.iter().copied().min_by(|a, b| a.re.total_cmp(&b.re))
}

fn eig2(m: [[f64; 2]; 2]) -> [Complex64; 2] {
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = Complex64::new(tr * tr / 4.0 - det, 0.0).sqrt();
    [tr / 2.0 - disc, tr / 2.0 + disc]
}

impl AdditiveOdeProblem for BrusselatorMol {
    fn dim(&self) -> usize {
        2 * self.nx
    }

    fn operators(&self) -> usize {
        2
    }

    fn eval(&self, op: usize, _t: f64, y: &[f64], out: &mut [f64]) {
        let nx = self.nx;
        let p = &self.params;
        out[0] = 0.0;
        out[nx - 1] = 0.0;
        out[nx] = 0.0;
        out[2 * nx - 1] = 0.0;
        match op {
            0 => {
                let (k1, k2) = (p.d1 / (self.dx * self.dx), p.d2 / (self.dx * self.dx));
                for i in 1..nx - 1 {
                    out[i] = k1 * (y[i - 1] - 2.0 * y[i] + y[i + 1]);
                    let j = nx + i;
                    out[j] = k2 * (y[j - 1] - 2.0 * y[j] + y[j + 1]);
                }
            }
            _ => {
                for i in 1..nx - 1 {
                    let (t, c) = (y[i], y[nx + i]);
                    let t2c = t * t * c;
                    out[i] = p.alpha - (p.beta + 1.0) * t + t2c;
                    out[nx + i] = p.beta * t - t2c;
                }
            }
        }
    }

    fn jacobian(&self, op: usize, _t: f64, y: &[f64], out: &mut DMatrix<f64>) -> bool {
        let nx = self.nx;
        let p = &self.params;
        out.fill(0.0);
        match op {
            0 => {
                let (k1, k2) = (p.d1 / (self.dx * self.dx), p.d2 / (self.dx * self.dx));
                for i in 1..nx - 1 {
                    for (off, k) in [(0, k1), (nx, k2)] {
                        let r = off + i;
                        out[(r, r - 1)] = k;
                        out[(r, r)] = -2.0 * k;
                        out[(r, r + 1)] = k;
                    }
                }
            }
            _ => {
                for i in 1..nx - 1 {
                    let (t, c) = (y[i], y[nx + i]);
                    let (ti, ci) = (i, nx + i);
                    out[(ti, ti)] = -(p.beta + 1.0) + 2.0 * t * c;
                    out[(ti, ci)] = t * t;
                    out[(ci, ti)] = p.beta - 2.0 * t * c;
                    out[(ci, ci)] = -t * t;
                }
            }
        }
        true
    }

    fn is_linear(&self, op: usize) -> bool {
        op == 0
    }

    fn initial_state(&self) -> Vec<f64> {
        let p = &self.params;
        let mut y = vec![0.0; self.dim()];
        for i in 0..self.nx {
            let x = self.x(i);
            y[i] = p.alpha + x * (1.0 - x);
            y[self.nx + i] = p.beta / p.alpha + x * x * (1.0 - x);
        }
        y
    }

    fn span(&self) -> (f64, f64) {
        (0.0, self.params.t_end)
    }

    fn name(&self) -> String {
        format!("brusselator(nx={})", self.nx)
    }
}
