use fsrk::integrator::{finite_difference_jacobian, AdditiveOdeProblem};
use fsrk::problems::most_negative_real;
use fsrk::{brusselator, linear_split, BrusselatorParams, DiagonalLinearProblem};
use nalgebra::DMatrix;
use num_complex::Complex64;

#[test]
fn diffusion_spectrum_dense_matches_closed_form() {
    for nx in [3, 5, 21, 64, 201] {
        let p = brusselator(nx, BrusselatorParams::default()).unwrap();
        let closed = p.diffusion_spectrum();
        let dense = p.diffusion_spectrum_dense();
        assert_eq!(closed.len(), dense.len());
        let scale = closed[0].abs().max(1.0);
        for (a, b) in closed.iter().zip(&dense) {
            assert!((a - b).abs() <= 1e-8 * scale, "nx {nx}: {a} vs {b}");
        }
    }
}

#[test]
fn reaction_spectrum_at_fixed_point() {
    let params = BrusselatorParams::default();
    let p = brusselator(11, params).unwrap();
    let (t, c) = (params.alpha, params.beta / params.alpha);
    let mut y = vec![t; 11];
    y.extend(vec![c; 11]);
    // J = [[beta - 1, alpha^2], [-beta, -alpha^2]]
    let tr = params.beta - 1.0 - t * t;
    let det = t * t;
    let im = (det - tr * tr / 4.0).sqrt();
    let spec = p.reaction_spectrum(&y).unwrap();
    assert_eq!(spec.len(), 18);
    for z in &spec {
        assert!((z.re - tr / 2.0).abs() < 1e-13);
        assert!((z.im.abs() - im).abs() < 1e-13);
    }
    let mut f = vec![0.0; 22];
    p.eval(1, 0.0, &y, &mut f);
    assert!(f.iter().all(|v| v.abs() < 1e-14));
}

#[test]
fn brusselator_boundaries_stay_pinned() {
    let p = brusselator(9, BrusselatorParams::default()).unwrap();
    let y = p.initial_state();
    for op in 0..2 {
        let mut f = vec![1.0; p.dim()];
        p.eval(op, 0.0, &y, &mut f);
        assert_eq!([f[0], f[8], f[9], f[17]], [0.0; 4]);
    }
    let mut j = DMatrix::zeros(p.dim(), p.dim());
    assert!(p.jacobian(1, 0.0, &y, &mut j));
    for row in [0, 8, 9, 17] {
        assert!(j.row(row).iter().all(|v| *v == 0.0));
    }
}

#[test]
fn analytic_jacobians_match_differences() {
    let p = brusselator(7, BrusselatorParams::default()).unwrap();
    let y: Vec<f64> = (0..p.dim()).map(|i| 1.0 + 0.1 * (i as f64).sin()).collect();
    let n = p.dim();
    for op in 0..2 {
        let (mut ja, mut jf) = (DMatrix::zeros(n, n), DMatrix::zeros(n, n));
        p.jacobian(op, 0.0, &y, &mut ja);
        let mut f0 = vec![0.0; n];
        p.eval(op, 0.0, &y, &mut f0);
        finite_difference_jacobian(&p, op, 0.0, &y, &f0, &mut jf);
        assert!((ja - jf).amax() < 1e-5);
    }
}

#[test]
fn diagonal_problem_exact_solution() {
    let lam = vec![vec![Complex64::new(-1.0, 2.0), Complex64::new(0.5, -1.0)]];
    let p = DiagonalLinearProblem::new(lam, vec![Complex64::new(1.0, 1.0)], (0.0, 2.0)).unwrap();
    let want = Complex64::new(1.0, 1.0) * (Complex64::new(-0.5, 1.0) * 2.0).exp();
    let y = p.exact(2.0);
    assert!((Complex64::new(y[0], y[1]) - want).norm() < 1e-14);
    assert!(
        DiagonalLinearProblem::new(vec![vec![Complex64::new(1.0, 0.0)]], vec![], (0.0, 1.0))
            .is_err()
    );
}

#[test]
fn split_fractions_must_sum_to_one() {
    assert!(linear_split(-2.0, &[0.3, 0.6]).is_err());
    let p = linear_split(-2.0, &[0.25, 0.75]).unwrap();
    assert_eq!(
        p.lambda,
        vec![Complex64::new(-0.5, 0.0), Complex64::new(-1.5, 0.0)]
    );
}

#[test]
fn most_negative_picks_real_part() {
    let v = [
        Complex64::new(-1.0, 5.0),
        Complex64::new(-3.0, -1.0),
        Complex64::new(0.0, 0.0),
    ];
    assert_eq!(most_negative_real(&v), Some(v[1]));
    assert_eq!(most_negative_real(&[]), None);
}
