//! FSRK time stepping as a sequence of sub-flows.
//!
//! Stage `k` advances operator `l` (in the stage's application order) by one
//! step of `integrators[k][l]` with step `alpha[k][l] * dt`, starting on the
//! operator's own clock `t + Σ_{i<k} alpha[i][l] dt`. Negative `alpha` gives
//! a backward sub-step; `alpha = 0` is skipped.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::coef::Coef;
use crate::error::{FsrkError, Result};
use crate::gark::FsrkScheme;

/// `y' = Σ_l f_l(t, y)`.
///
/// Evaluators must be pure: independent trajectories may run concurrently
/// against one problem value.
pub trait AdditiveOdeProblem: Sync {
    fn dim(&self) -> usize;
    fn operators(&self) -> usize;
    /// Writes `f_op(t, y)` into `out`.
    fn eval(&self, op: usize, t: f64, y: &[f64], out: &mut [f64]);
    /// Writes `∂f_op/∂y` into `out` and returns `true`, or returns `false`
    /// to request finite differences.
    fn jacobian(&self, _op: usize, _t: f64, _y: &[f64], _out: &mut DMatrix<f64>) -> bool {
        false
    }
    /// `true` when `f_op` is affine in `y` with a Jacobian that does not
    /// depend on `t` or `y`; stage matrices are then factored once per
    /// step size and reused.
    fn is_linear(&self, _op: usize) -> bool {
        false
    }
    fn initial_state(&self) -> Vec<f64>;
    fn span(&self) -> (f64, f64);
    fn name(&self) -> String {
        "problem".into()
    }
}

/// Newton tolerance: `‖G‖∞ <= NEWTON_RTOL (1 + ‖Y‖∞)`.
pub const NEWTON_RTOL: f64 = 1e-10;
pub const NEWTON_MAX_ITER: usize = 25;
/// Stage matrices `I - h a J` whose inverse norm estimate exceeds this are
/// treated as singular.
pub const SINGULAR_RESOLVENT: f64 = 1e5;
/// Sup-norm beyond which a trajectory counts as diverged.
pub const DIVERGENCE_THRESHOLD: f64 = 1e10;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewtonStats {
    pub solves: usize,
    pub iterations: usize,
    pub max_iterations: usize,
    pub jacobian_evals: usize,
}

#[derive(Clone, Debug)]
struct SubMethod {
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    c: Vec<f64>,
    alpha: f64,
    skip: bool,
}

/// Reusable stepping state for one scheme.
#[derive(Clone, Debug)]
pub struct Stepper {
    operators: usize,
    sequences: Vec<Vec<usize>>,
    subs: Vec<Vec<SubMethod>>,
    /// `clock[k][l] = Σ_{i<k} alpha[i][l]`.
    clock: Vec<Vec<f64>>,
    pub stats: NewtonStats,
    k: Vec<Vec<f64>>,
    base: Vec<f64>,
    factors: LuCache,
}

type Lu = nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>;

/// Factored `I - h a J` for linear operators, keyed by `(op, h a)`.
#[derive(Clone, Debug, Default)]
struct LuCache {
    entries: Vec<(usize, u64, Lu)>,
}

impl LuCache {
    const CAPACITY: usize = 8;

    fn find(&self, op: usize, h_eff: f64) -> Option<&Lu> {
        self.entries
            .iter()
            .find(|e| e.0 == op && e.1 == h_eff.to_bits())
            .map(|e| &e.2)
    }

    fn insert(&mut self, op: usize, h_eff: f64, lu: Lu) {
        if self.entries.len() == Self::CAPACITY {
            self.entries.remove(0);
        }
        self.entries.push((op, h_eff.to_bits(), lu));
    }
}

impl Stepper {
    pub fn new(scheme: &FsrkScheme) -> Result<Self> {
        let scheme = FsrkScheme::new(scheme.splitting.clone(), scheme.integrators.clone())?;
        let (s, n) = (scheme.stages(), scheme.operators());
        let mut subs = Vec::with_capacity(s);
        let mut clock = vec![vec![0.0; n]; s];
        let mut acc = vec![Coef::ZERO; n];
        for k in 0..s {
            let mut row = Vec::with_capacity(n);
            for l in 0..n {
                let t = &scheme.integrators[k][l];
                if !t.is_diagonally_implicit() {
                    return Err(FsrkError::Invalid(format!(
                        "tableau `{}` is not diagonally implicit; only explicit and DIRK sub-integrators can be stepped",
                        t.name
                    )));
                }
                let alpha = scheme.alpha(k, l);
                clock[k][l] = acc[l].to_f64();
                acc[l] += alpha;
                row.push(SubMethod {
                    a: t.a_f64(),
                    b: t.b_f64(),
                    c: t.c_f64(),
                    alpha: alpha.to_f64(),
                    skip: alpha.is_zero(),
                });
            }
            subs.push(row);
        }
        let max_stages = subs.iter().flatten().map(|m| m.b.len()).max().unwrap_or(1);
        Ok(Stepper {
            operators: n,
            sequences: (0..s).map(|k| scheme.splitting.stage_sequence(k)).collect(),
            subs,
            clock,
            stats: NewtonStats::default(),
            k: vec![Vec::new(); max_stages],
            base: Vec::new(),
            factors: LuCache::default(),
        })
    }

    /// Advances `y` from `t` to `t + dt` in place.
    pub fn step<P: AdditiveOdeProblem + ?Sized>(
        &mut self,
        problem: &P,
        t: f64,
        y: &mut [f64],
        dt: f64,
    ) -> Result<()> {
        if problem.operators() != self.operators {
            return Err(FsrkError::Dimension(format!(
                "scheme has {} operators, problem `{}` has {}",
                self.operators,
                problem.name(),
                problem.operators()
            )));
        }
        if y.len() != problem.dim() {
            return Err(FsrkError::Dimension(format!(
                "state has length {}, problem dimension is {}",
                y.len(),
                problem.dim()
            )));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(FsrkError::Invalid(format!(
                "step size must be positive, got {dt}"
            )));
        }
        let n = y.len();
        for kv in &mut self.k {
            kv.resize(n, 0.0);
        }
        self.base.resize(n, 0.0);
        for (k, seq) in self.sequences.iter().enumerate() {
            for &l in seq {
                let m = &self.subs[k][l];
                if m.skip {
                    continue;
                }
                let h = m.alpha * dt;
                let tau = t + self.clock[k][l] * dt;
                let ws = Workspace {
                    k: &mut self.k,
                    base: &mut self.base,
                    stats: &mut self.stats,
                    factors: &mut self.factors,
                };
                sub_step(problem, l, m, tau, h, y, ws).map_err(|e| match e {
                    FsrkError::StageSolve {
                        rk_stage,
                        residual,
                        reason,
                        ..
                    } => FsrkError::StageSolve {
                        stage: k + 1,
                        operator: l + 1,
                        rk_stage,
                        residual,
                        reason,
                    },
                    other => other,
                })?;
            }
        }
        Ok(())
    }
}

struct Workspace<'a> {
    k: &'a mut [Vec<f64>],
    base: &'a mut [f64],
    stats: &'a mut NewtonStats,
    factors: &'a mut LuCache,
}

fn sub_step<P: AdditiveOdeProblem + ?Sized>(
    problem: &P,
    op: usize,
    m: &SubMethod,
    tau: f64,
    h: f64,
    y: &mut [f64],
    ws: Workspace<'_>,
) -> Result<()> {
    let Workspace {
        k: kbuf,
        base,
        stats,
        factors,
    } = ws;
    let s = m.b.len();
    for i in 0..s {
        base.copy_from_slice(y);
        for j in 0..i {
            let a = m.a[i][j];
            if a != 0.0 {
                for (bv, kv) in base.iter_mut().zip(&kbuf[j]) {
                    *bv += h * a * kv;
                }
            }
        }
        let ti = tau + m.c[i] * h;
        let aii = m.a[i][i];
        if aii != 0.0 {
            let cache = problem.is_linear(op).then_some(&mut *factors);
            let stage = newton_stage(problem, op, base, ti, h * aii, stats, cache)
                .map_err(|e| with_rk_stage(e, i + 1))?;
            problem.eval(op, ti, &stage, &mut kbuf[i]);
        } else {
            problem.eval(op, ti, base, &mut kbuf[i]);
        }
    }
    for i in 0..s {
        let w = h * m.b[i];
        if w != 0.0 {
            for (yv, kv) in y.iter_mut().zip(&kbuf[i]) {
                *yv += w * kv;
            }
        }
    }
    Ok(())
}

fn with_rk_stage(e: FsrkError, rk_stage: usize) -> FsrkError {
    match e {
        FsrkError::StageSolve {
            stage,
            operator,
            residual,
            reason,
            ..
        } => FsrkError::StageSolve {
            stage,
            operator,
            rk_stage,
            residual,
            reason,
        },
        other => other,
    }
}

/// Solves `Y = base + h_eff f_op(t, Y)` by Newton's method.
///
/// `h_eff` is `a_ii` times the signed sub-step and may be negative. The
/// returned error carries operator `op + 1` and placeholder stage indices
/// that [`Stepper::step`] fills in.
pub fn solve_implicit_stage<P: AdditiveOdeProblem + ?Sized>(
    problem: &P,
    op: usize,
    base: &[f64],
    t: f64,
    h_eff: f64,
    stats: &mut NewtonStats,
) -> Result<Vec<f64>> {
    newton_stage(problem, op, base, t, h_eff, stats, None)
}

fn newton_stage<P: AdditiveOdeProblem + ?Sized>(
    problem: &P,
    op: usize,
    base: &[f64],
    t: f64,
    h_eff: f64,
    stats: &mut NewtonStats,
    mut cache: Option<&mut LuCache>,
) -> Result<Vec<f64>> {
    let n = base.len();
    let fail = |residual: f64, reason: String| FsrkError::StageSolve {
        stage: 0,
        operator: op + 1,
        rk_stage: 0,
        residual,
        reason,
    };
    let mut y = base.to_vec();
    let mut f = vec![0.0; n];
    let mut jac = DMatrix::<f64>::zeros(n, n);
    stats.solves += 1;
    let mut residual = f64::INFINITY;
    for iter in 0..=NEWTON_MAX_ITER {
        problem.eval(op, t, &y, &mut f);
        let g = DVector::from_iterator(n, (0..n).map(|i| y[i] - h_eff * f[i] - base[i]));
        residual = g.amax();
        let scale = y.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if !residual.is_finite() {
            return Err(fail(residual, "non-finite residual".into()));
        }
        if residual <= NEWTON_RTOL * (1.0 + scale) {
            stats.iterations += iter;
            stats.max_iterations = stats.max_iterations.max(iter);
            return Ok(y);
        }
        if iter == NEWTON_MAX_ITER {
            break;
        }
        let hit = cache
            .as_deref()
            .is_some_and(|c| c.find(op, h_eff).is_some());
        let delta = if hit {
            let lu = cache
                .as_deref()
                .and_then(|c| c.find(op, h_eff))
                .expect("cached factor");
            lu.solve(&g)
        } else {
            if !problem.jacobian(op, t, &y, &mut jac) {
                finite_difference_jacobian(problem, op, t, &y, &f, &mut jac);
            }
            stats.jacobian_evals += 1;
            let mut mtx = -h_eff * &jac;
            for i in 0..n {
                mtx[(i, i)] += 1.0;
            }
            let lu = mtx.lu();
            let est = resolvent_norm_estimate(&lu, &g);
            if est > SINGULAR_RESOLVENT {
                return Err(fail(
                    residual,
                    format!(
                        "stage matrix I - h*a*J is near-singular (inverse norm estimate {est:.3e})"
                    ),
                ));
            }
            let d = lu.solve(&g);
            if let Some(c) = cache.as_deref_mut() {
                c.insert(op, h_eff, lu);
            }
            d
        };
        let delta = delta.ok_or_else(|| fail(residual, "singular stage matrix".into()))?;
        for i in 0..n {
            y[i] -= delta[i];
        }
    }
    stats.iterations += NEWTON_MAX_ITER;
    stats.max_iterations = stats.max_iterations.max(NEWTON_MAX_ITER);
    Err(fail(
        residual,
        format!("Newton did not converge in {NEWTON_MAX_ITER} iterations"),
    ))
}

/// Lower estimate of `‖M^{-1}‖∞` from the LU pivots and a few probe solves.
fn resolvent_norm_estimate(
    lu: &nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    rhs: &DVector<f64>,
) -> f64 {
    let u = lu.u();
    let min_pivot = u
        .diagonal()
        .iter()
        .fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if min_pivot == 0.0 {
        return f64::INFINITY;
    }
    let n = rhs.len();
    let mut est = 1.0 / min_pivot;
    let probes = [
        DVector::from_element(n, 1.0),
        DVector::from_fn(n, |i, _| if i % 2 == 0 { 1.0 } else { -1.0 }),
        rhs.clone(),
    ];
    for b in probes {
        let bn = b.amax();
        if bn == 0.0 {
            continue;
        }
        match lu.solve(&b) {
            Some(x) => est = est.max(x.amax() / bn),
            None => return f64::INFINITY,
        }
    }
    est
}

/// Forward differences with step `sqrt(eps) (1 + |y_j|)`.
pub fn finite_difference_jacobian<P: AdditiveOdeProblem + ?Sized>(
    problem: &P,
    op: usize,
    t: f64,
    y: &[f64],
    f0: &[f64],
    out: &mut DMatrix<f64>,
) {
    let n = y.len();
    let mut yp = y.to_vec();
    let mut fp = vec![0.0; n];
    for j in 0..n {
        let h = f64::EPSILON.sqrt() * (1.0 + y[j].abs());
        yp[j] = y[j] + h;
        problem.eval(op, t, &yp, &mut fp);
        for i in 0..n {
            out[(i, j)] = (fp[i] - f0[i]) / h;
        }
        yp[j] = y[j];
    }
}

/// One step from `(t, y)`.
pub fn step<P: AdditiveOdeProblem + ?Sized>(
    scheme: &FsrkScheme,
    problem: &P,
    t: f64,
    y: &[f64],
    dt: f64,
) -> Result<Vec<f64>> {
    let mut out = y.to_vec();
    Stepper::new(scheme)?.step(problem, t, &mut out, dt)?;
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IntegrationResult {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub steps: usize,
    pub newton: NewtonStats,
    pub diverged: bool,
    pub divergence_time: Option<f64>,
}

impl IntegrationResult {
    pub fn final_state(&self) -> &[f64] {
        self.states.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn final_time(&self) -> f64 {
        self.times.last().copied().unwrap_or(f64::NAN)
    }

    /// CSV with header `t,y1,..,yn`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let n = self.states.first().map_or(0, Vec::len);
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("y{i}")));
        w.write_record(&header)?;
        for (t, y) in self.times.iter().zip(&self.states) {
            let mut rec = vec![t.to_string()];
            rec.extend(y.iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn metadata(&self, scheme: &FsrkScheme, problem: &str, dt: f64) -> RunMetadata {
        RunMetadata {
            scheme: scheme.label(),
            problem: problem.to_string(),
            dt,
            steps: self.steps,
            final_time: self.final_time(),
            newton: self.newton,
            diverged: self.diverged,
            divergence_time: self.divergence_time,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunMetadata {
    pub scheme: String,
    pub problem: String,
    pub dt: f64,
    pub steps: usize,
    pub final_time: f64,
    pub newton: NewtonStats,
    pub diverged: bool,
    pub divergence_time: Option<f64>,
}

/// Step count for a span: the last step is shortened when `dt` does not
/// divide the span to within `1e-9` relative.
pub fn step_count(span: f64, dt: f64) -> usize {
    if span <= 0.0 {
        return 0;
    }
    let q = span / dt;
    let r = q.round();
    if (q - r).abs() <= 1e-9 * q.max(1.0) {
        r as usize
    } else {
        q.ceil() as usize
    }
}

/// Integrates over the problem's span, keeping every `stride`-th state
/// (and always the last). `observer` sees every accepted step.
pub fn integrate_observed<P, F>(
    scheme: &FsrkScheme,
    problem: &P,
    dt: f64,
    stride: usize,
    mut observer: F,
) -> Result<IntegrationResult>
where
    P: AdditiveOdeProblem + ?Sized,
    F: FnMut(usize, f64, &[f64]),
{
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(FsrkError::Invalid(format!(
            "step size must be positive, got {dt}"
        )));
    }
    let stride = stride.max(1);
    let (t0, t_end) = problem.span();
    let n_steps = step_count(t_end - t0, dt);
    let mut stepper = Stepper::new(scheme)?;
    let mut y = problem.initial_state();
    let mut t = t0;
    let mut res = IntegrationResult {
        times: vec![t0],
        states: vec![y.clone()],
        steps: 0,
        newton: NewtonStats::default(),
        diverged: false,
        divergence_time: None,
    };
    observer(0, t, &y);
    for i in 1..=n_steps {
        let h = if i == n_steps { t_end - t } else { dt };
        stepper.step(problem, t, &mut y, h)?;
        t = if i == n_steps {
            t_end
        } else {
            t0 + i as f64 * dt
        };
        res.steps = i;
        observer(i, t, &y);
        let norm = y.iter().fold(0.0_f64, |m, v| {
            if v.is_finite() {
                m.max(v.abs())
            } else {
                f64::INFINITY
            }
        });
        if norm > DIVERGENCE_THRESHOLD {
            res.diverged = true;
            res.divergence_time = Some(t);
        }
        if res.diverged || i % stride == 0 || i == n_steps {
            res.times.push(t);
            res.states.push(y.clone());
        }
        if res.diverged {
            break;
        }
    }
    res.newton = stepper.stats;
    Ok(res)
}

pub fn integrate<P: AdditiveOdeProblem + ?Sized>(
    scheme: &FsrkScheme,
    problem: &P,
    dt: f64,
    stride: usize,
) -> Result<IntegrationResult> {
    integrate_observed(scheme, problem, dt, stride, |_, _, _| {})
}

/// All operators of `P` folded into one.
pub struct Summed<'a, P: ?Sized>(pub &'a P);

impl<P: AdditiveOdeProblem + ?Sized> AdditiveOdeProblem for Summed<'_, P> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn operators(&self) -> usize {
        1
    }

    fn eval(&self, _op: usize, t: f64, y: &[f64], out: &mut [f64]) {
        let mut tmp = vec![0.0; out.len()];
        out.iter_mut().for_each(|v| *v = 0.0);
        for l in 0..self.0.operators() {
            self.0.eval(l, t, y, &mut tmp);
            for (o, v) in out.iter_mut().zip(&tmp) {
                *o += v;
            }
        }
    }

    fn jacobian(&self, _op: usize, t: f64, y: &[f64], out: &mut DMatrix<f64>) -> bool {
        let n = y.len();
        out.fill(0.0);
        let mut tmp = DMatrix::zeros(n, n);
        for l in 0..self.0.operators() {
            if !self.0.jacobian(l, t, y, &mut tmp) {
                return false;
            }
            *out += &tmp;
        }
        true
    }

    fn is_linear(&self, _op: usize) -> bool {
        (0..self.0.operators()).all(|l| self.0.is_linear(l))
    }

    fn initial_state(&self) -> Vec<f64> {
        self.0.initial_state()
    }

    fn span(&self) -> (f64, f64) {
        self.0.span()
    }

    fn name(&self) -> String {
        format!("{} (unsplit)", self.0.name())
    }
}

/// Substeps per step of the unsplit third-order reference.
pub const REFERENCE_REFINEMENT: usize = 64;

/// Unsplit Kutta third-order scheme used for reference trajectories.
pub fn reference_scheme() -> FsrkScheme {
    let split = crate::splitting::catalogue_splitting("Godunov", 1).expect("catalogue entry");
    let rk3 = crate::tableau::catalogue("RK3", None).expect("catalogue entry");
    FsrkScheme::uniform(split, vec![rk3]).expect("valid scheme")
}

/// Unsplit RK3 trajectory at `dt / 64`, sampled every `stride` coarse steps.
pub fn reference_trajectory<P: AdditiveOdeProblem + ?Sized>(
    problem: &P,
    dt: f64,
    stride: usize,
) -> Result<IntegrationResult> {
    integrate(
        &reference_scheme(),
        &Summed(problem),
        dt / REFERENCE_REFINEMENT as f64,
        stride.max(1).saturating_mul(REFERENCE_REFINEMENT),
    )
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub dts: Vec<f64>,
    pub errors: Vec<f64>,
    pub order: f64,
    /// Smallest-`dt` error is within `1e2 eps` of zero.
    pub precision_floor: bool,
}

/// Least-squares slope of `log(error at T)` against `log(dt)`, with the
/// error measured in the sup norm against `exact`.
pub fn convergence_order<P: AdditiveOdeProblem + ?Sized>(
    scheme: &FsrkScheme,
    problem: &P,
    exact: &[f64],
    dts: &[f64],
) -> Result<ConvergenceReport> {
    if dts.len() < 3 {
        return Err(FsrkError::Invalid(format!(
            "convergence study needs at least 3 step sizes, got {}",
            dts.len()
        )));
    }
    let ratio = dts[1] / dts[0];
    if dts
        .windows(2)
        .any(|w| ((w[1] / w[0]) - ratio).abs() > 1e-6 * ratio.abs() || w[1] == w[0])
    {
        return Err(FsrkError::Invalid(
            "step sizes must form a geometric progression".into(),
        ));
    }
    let mut errors = Vec::with_capacity(dts.len());
    for &dt in dts {
        let r = integrate(scheme, problem, dt, usize::MAX)?;
        if r.diverged {
            return Err(FsrkError::Invalid(format!("run with dt = {dt} diverged")));
        }
        let err = r
            .final_state()
            .iter()
            .zip(exact)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        errors.push(err);
    }
    let xs: Vec<f64> = dts.iter().map(|d| d.ln()).collect();
    let ys: Vec<f64> = errors
        .iter()
        .map(|e| e.max(f64::MIN_POSITIVE).ln())
        .collect();
    let order = least_squares_slope(&xs, &ys);
    let smallest = dts
        .iter()
        .zip(&errors)
        .min_by(|a, b| a.0.total_cmp(b.0))
        .map_or(0.0, |p| *p.1);
    Ok(ConvergenceReport {
        dts: dts.to_vec(),
        errors,
        order,
        precision_floor: smallest < 1e2 * f64::EPSILON,
    })
}

pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}
