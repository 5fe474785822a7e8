//! Polynomials with [`Coef`] coefficients, lowest degree first.

use num_complex::Complex64;

use crate::coef::Coef;

#[derive(Clone, Debug, PartialEq)]
pub struct Poly(pub Vec<Coef>);

impl Poly {
    pub fn one() -> Self {
        Poly(vec![Coef::ONE])
    }

    /// Drops trailing coefficients that are exactly zero (or, for reals,
    /// below `1e-13` relative to the largest coefficient).
    pub fn trimmed(mut self) -> Self {
        let scale = self
            .0
            .iter()
            .map(|c| c.to_f64().abs())
            .fold(0.0_f64, f64::max)
            .max(1.0);
        while self.0.len() > 1 {
            let last = self.0[self.0.len() - 1];
            let negligible = match last {
                Coef::Exact(_) => last.is_zero(),
                Coef::Real(x) => x.abs() <= 1e-13 * scale,
            };
            if !negligible {
                break;
            }
            self.0.pop();
        }
        self
    }

    pub fn degree(&self) -> usize {
        self.0.len().saturating_sub(1)
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.0
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + c.to_f64())
    }

    pub fn eval_real(&self, x: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, c| acc * x + c.to_f64())
    }
}

/// Coefficients of `det(I - z M)` via the Faddeev-LeVerrier recursion.
///
/// With `p(λ) = det(λI - M) = Σ c_k λ^{n-k}` we have
/// `det(I - zM) = Σ c_k z^k`. The recursion only divides by integers, so a
/// rational matrix yields exact coefficients.
pub fn det_i_minus_z(m: &[Vec<Coef>]) -> Poly {
    let n = m.len();
    let mut coeffs = Vec::with_capacity(n + 1);
    coeffs.push(Coef::ONE);
    // M_k = M * M_{k-1} + c_{k-1} I, starting from M_0 = 0.
    let mut mk = vec![vec![Coef::ZERO; n]; n];
    for k in 1..=n {
        let prod = matmul(m, &mk);
        let c_prev = coeffs[k - 1];
        for i in 0..n {
            for j in 0..n {
                mk[i][j] = prod[i][j];
            }
            mk[i][i] += c_prev;
        }
        let am = matmul(m, &mk);
        let trace: Coef = (0..n).map(|i| am[i][i]).sum();
        coeffs.push(-trace / Coef::int(k as i64));
    }
    Poly(coeffs).trimmed()
}

fn matmul(a: &[Vec<Coef>], b: &[Vec<Coef>]) -> Vec<Vec<Coef>> {
    let n = a.len();
    let p = b.first().map_or(0, Vec::len);
    let mut out = vec![vec![Coef::ZERO; p]; n];
    for i in 0..n {
        for (k, aik) in a[i].iter().enumerate() {
            if aik.is_zero() && aik.is_exact() {
                continue;
            }
            for j in 0..p {
                out[i][j] += *aik * b[k][j];
            }
        }
    }
    out
}
