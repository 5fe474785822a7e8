mod common;

use common::*;
use fsrk::integrator::{
    convergence_order, reference_trajectory, step_count, AdditiveOdeProblem, NewtonStats,
};
use fsrk::problems::{ForcedDecay, LogisticSplit};
use fsrk::splitting::SplittingMethod;
use fsrk::tableau::sdirk22_gamma;
use fsrk::{
    brusselator, build_extended, integrate, linear_split, product_stability, step,
    BrusselatorParams, Coef, FsrkScheme, LinearSplitProblem,
};
use num_complex::Complex64;

fn closed_50_50(z: f64, g: f64) -> f64 {
    (12.5 * z * z + 5.0 * z + 1.0).powi(2) * (10.0 * z - 20.0 * g * z + 1.0)
        / (10.0 * g * z - 1.0).powi(2)
}

fn closed_90_10(z: f64, g: f64) -> f64 {
    (40.5 * z * z + 9.0 * z + 1.0).powi(2) * (2.0 * z - 4.0 * g * z + 1.0)
        / (2.0 * g * z - 1.0).powi(2)
}

/// One step on `y' = (λ1 + λ2) y` reproduces the stability function at
/// `z = -dt`, `z_l = |λ_l| z`.
#[test]
fn strang_heun_sdirk_single_step_matches_closed_form() {
    let s = scheme("Strang", &["Heun", "SDIRK22"]);
    let g = sdirk22_gamma();
    for (lams, closed) in [
        ([-10.0, -10.0], closed_50_50 as fn(f64, f64) -> f64),
        ([-18.0, -2.0], closed_90_10),
    ] {
        let p = linear_split(
            lams.iter().sum(),
            &[
                lams[0] / lams.iter().sum::<f64>(),
                lams[1] / lams.iter().sum::<f64>(),
            ],
        )
        .unwrap();
        for dt in [0.01, 0.05, 0.2] {
            let y = step(&s, &p, 0.0, &[1.0, 0.0], dt).unwrap();
            let want = closed(-dt, g);
            assert!((y[0] - want).abs() < 1e-12, "dt {dt}: {} vs {want}", y[0]);
            assert!(y[1].abs() < 1e-14);
        }
    }
}

#[test]
fn three_operator_step_matches_both_stability_forms() {
    let s = os3_example();
    let lams = [
        Complex64::new(-1.3, 0.4),
        Complex64::new(-0.2, -2.0),
        Complex64::new(-0.7, 0.0),
    ];
    let p = LinearSplitProblem {
        lambda: lams.to_vec(),
        y0: Complex64::new(1.0, 0.0),
        span: (0.0, 1.0),
    };
    let ext = build_extended(&s).unwrap();
    let f = product_stability(&s);
    for dt in [0.02, 0.1, 0.3] {
        let z: Vec<Complex64> = lams.iter().map(|l| l * dt).collect();
        let y = step(&s, &p, 0.0, &[1.0, 0.0], dt).unwrap();
        let got = Complex64::new(y[0], y[1]);
        let ark = ext.ark_stability_eval(&z).unwrap();
        let prod = f.eval(&z).unwrap();
        assert!((got - ark).norm() < 1e-12, "dt {dt}: {got} vs {ark}");
        assert!((got - prod).norm() < 1e-12, "dt {dt}: {got} vs {prod}");
    }
}

/// SDIRK22 stage values on a scalar linear problem, solved by hand.
#[test]
fn sdirk_stages_by_hand() {
    let s = scheme("Godunov", &["SDIRK22", "FE"]);
    let p = linear_split(-4.0, &[1.0, 0.0]).unwrap();
    let (g, h, lam) = (sdirk22_gamma(), 0.1, -4.0);
    let k1 = 1.0 / (1.0 - g * h * lam);
    let k2 = (1.0 + (1.0 - g) * h * lam * k1) / (1.0 - g * h * lam);
    let want = 1.0 + h * lam * ((1.0 - g) * k1 + g * k2);
    let y = step(&s, &p, 0.0, &[1.0, 0.0], h).unwrap();
    assert!((y[0] - want).abs() < 1e-13);
}

/// `y' = cos t - y` with the forcing on operator 1: each operator must see
/// its own clock for the orders to hold.
#[test]
fn non_autonomous_orders() {
    let p = ForcedDecay::default();
    let exact = p.exact(p.span.1);
    let dts: Vec<f64> = (0..4).map(|k| 0.1 / f64::powi(2.0, k)).collect();
    for (split, ops, order) in [
        ("Godunov", ["FE", "BE"], 1.0),
        ("Strang", ["Heun", "SDIRK22"], 2.0),
        ("Ruth", ["RK3", "SDIRK23"], 3.0),
    ] {
        let r = convergence_order(&scheme(split, &ops), &p, &exact, &dts).unwrap();
        assert!((r.order - order).abs() < 0.2, "{split}: {r:?}");
    }
}

#[test]
fn implicit_nonlinear_operator_converges() {
    let p = LogisticSplit::default();
    let exact = p.exact(p.span.1);
    let dts: Vec<f64> = (0..4).map(|k| 0.1 / f64::powi(2.0, k)).collect();
    let r =
        convergence_order(&scheme("Strang", &["SDIRK22", "SDIRK23"]), &p, &exact, &dts).unwrap();
    assert!((r.order - 2.0).abs() < 0.2, "{r:?}");
}

#[test]
fn zero_weight_stage_is_identity() {
    let alpha = vec![
        vec![Coef::frac(1, 1), Coef::ZERO],
        vec![Coef::ZERO, Coef::frac(1, 1)],
    ];
    let split = SplittingMethod::new("Godunov", alpha, Some(1)).unwrap();
    let s = FsrkScheme::uniform(split, vec![tab("BE"), tab("BE")]).unwrap();
    let only_first = linear_split(-3.0, &[1.0, 0.0]).unwrap();
    let y = step(&s, &only_first, 0.0, &[1.0, 0.0], 0.1).unwrap();
    assert!((y[0] - 1.0 / 1.3).abs() < 1e-14);
}

#[test]
fn runs_are_deterministic() {
    let s = os3_example();
    let p = LinearSplitProblem {
        lambda: vec![
            Complex64::new(-1.0, 3.0),
            Complex64::new(-0.5, 0.0),
            Complex64::new(0.0, -1.0),
        ],
        y0: Complex64::new(0.5, 0.5),
        span: (0.0, 2.0),
    };
    let a = integrate(&s, &p, 0.01, 7).unwrap();
    let b = integrate(&s, &p, 0.01, 7).unwrap();
    assert_eq!(a.states, b.states);
    assert_eq!(a.times, b.times);
    assert_eq!(a.steps, 200);
    assert_eq!(a.final_time(), 2.0);
}

#[test]
fn integration_records_stride_and_endpoint() {
    let s = scheme("Strang", &["Heun", "Heun"]);
    let p = linear_split(-1.0, &[0.5, 0.5]).unwrap();
    let r = integrate(&s, &p, 0.1, 3).unwrap();
    assert_eq!(step_count(1.0, 0.1), 10);
    assert_eq!(r.times.first(), Some(&0.0));
    assert_eq!(r.times.last(), Some(&1.0));
    assert_eq!(r.times.len(), r.states.len());
    assert_eq!(r.newton, NewtonStats::default());
    let mut out = Vec::new();
    r.write_csv(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert!(text.starts_with("t,y1,y2\n"));
}

/// Hides the linearity hint so every stage refactors its Newton matrix.
struct Opaque<P>(P);

impl<P: AdditiveOdeProblem> AdditiveOdeProblem for Opaque<P> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn operators(&self) -> usize {
        self.0.operators()
    }
    fn eval(&self, op: usize, t: f64, y: &[f64], out: &mut [f64]) {
        self.0.eval(op, t, y, out)
    }
    fn jacobian(&self, op: usize, t: f64, y: &[f64], out: &mut nalgebra::DMatrix<f64>) -> bool {
        self.0.jacobian(op, t, y, out)
    }
    fn initial_state(&self) -> Vec<f64> {
        self.0.initial_state()
    }
    fn span(&self) -> (f64, f64) {
        self.0.span()
    }
}

#[test]
fn factor_reuse_on_linear_operators() {
    let params = BrusselatorParams {
        t_end: 0.5,
        ..BrusselatorParams::default()
    };
    let p = brusselator(21, params).unwrap();
    let s = scheme("Strang", &["SDIRK22", "Heun"]);
    let fast = integrate(&s, &p, 0.01, 1).unwrap();
    let slow = integrate(&s, &Opaque(p.clone()), 0.01, 1).unwrap();
    for (a, b) in fast.states.iter().zip(&slow.states) {
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() < 1e-10);
        }
    }
    // one factor per distinct h a_ii, plus the shortened last step
    assert!(fast.newton.jacobian_evals <= 4, "{:?}", fast.newton);
    assert_eq!(slow.newton.jacobian_evals, slow.newton.iterations);
}

/// `y' = (A1 + A2 + A3) y` with pairwise non-commuting 2x2 blocks, so the
/// splitting error does not cancel.
struct MatrixSplit;

const BLOCKS: [[[f64; 2]; 2]; 3] = [
    [[0.0, 1.0], [-1.0, 0.0]],
    [[-0.5, 0.3], [0.0, -0.2]],
    [[0.1, 0.0], [0.4, -0.6]],
];

impl AdditiveOdeProblem for MatrixSplit {
    fn dim(&self) -> usize {
        2
    }
    fn operators(&self) -> usize {
        3
    }
    fn eval(&self, op: usize, _t: f64, y: &[f64], out: &mut [f64]) {
        let m = BLOCKS[op];
        out[0] = m[0][0] * y[0] + m[0][1] * y[1];
        out[1] = m[1][0] * y[0] + m[1][1] * y[1];
    }
    fn initial_state(&self) -> Vec<f64> {
        vec![1.0, 0.5]
    }
    fn span(&self) -> (f64, f64) {
        (0.0, 1.0)
    }
}

#[test]
fn three_operator_splitting_orders() {
    let p = MatrixSplit;
    let exact = reference_trajectory(&p, 1e-3, usize::MAX)
        .unwrap()
        .final_state()
        .to_vec();
    let dts: Vec<f64> = (0..4).map(|k| 0.1 / f64::powi(2.0, k)).collect();
    for (split, order) in [("Godunov", 1.0), ("StrangUnmerged", 2.0), ("OS3_32", 2.0)] {
        let s = scheme(split, &["RK3", "RK3", "RK3"]);
        let r = convergence_order(&s, &p, &exact, &dts).unwrap();
        assert!((r.order - order).abs() < 0.2, "{split}: {r:?}");
    }
}
