//! Runge-Kutta Butcher tableaux: validation, a small catalogue, scalar
//! stability functions and low-order classical order checks.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coef::{Coef, CoefMatrix, REAL_TOL};
use crate::error::{FsrkError, Result};
use crate::poly::{det_i_minus_z, Poly};

/// One Runge-Kutta method `(A, b, c)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ButcherTableau {
    pub name: String,
    #[serde(rename = "A")]
    pub a: CoefMatrix,
    pub b: Vec<Coef>,
    pub c: Vec<Coef>,
    /// Free parameter of a parametrised family, kept for reference.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Coef>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    Empty,
    Shape(String),
    /// `c[row]` differs from the sum of row `row` of `A`.
    RowSum {
        row: usize,
        c: f64,
        row_sum: f64,
        defect: f64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Empty => write!(f, "tableau has no stages"),
            Violation::Shape(s) => write!(f, "shape: {s}"),
            Violation::RowSum {
                row,
                c,
                row_sum,
                defect,
            } => write!(
                f,
                "row {} : c = {c} but sum of A row = {row_sum} (defect {defect:.3e})",
                row + 1
            ),
        }
    }
}

impl ButcherTableau {
    /// Builds a tableau, checking only that the shapes agree.
    pub fn new(name: impl Into<String>, a: CoefMatrix, b: Vec<Coef>, c: Vec<Coef>) -> Result<Self> {
        let t = ButcherTableau {
            name: name.into(),
            a,
            b,
            c,
            gamma: None,
        };
        if let Some(v) = t.shape_violation() {
            return Err(FsrkError::Dimension(v.to_string()));
        }
        Ok(t)
    }

    /// Builds a tableau whose abscissae are the row sums of `A`.
    pub fn from_ab(name: impl Into<String>, a: CoefMatrix, b: Vec<Coef>) -> Result<Self> {
        let c = a.iter().map(|row| row.iter().copied().sum()).collect();
        Self::new(name, a, b, c)
    }

    pub fn stages(&self) -> usize {
        self.b.len()
    }

    fn shape_violation(&self) -> Option<Violation> {
        let s = self.b.len();
        if s == 0 {
            return Some(Violation::Empty);
        }
        if self.c.len() != s || self.a.len() != s {
            return Some(Violation::Shape(format!(
                "A has {} rows, b has {} entries, c has {} entries",
                self.a.len(),
                s,
                self.c.len()
            )));
        }
        if let Some((i, row)) = self.a.iter().enumerate().find(|(_, r)| r.len() != s) {
            return Some(Violation::Shape(format!(
                "row {} of A has {} entries, expected {s}",
                i + 1,
                row.len()
            )));
        }
        None
    }

    /// Lists every broken invariant; an empty list means the tableau is valid.
    pub fn validate(&self) -> Vec<Violation> {
        if let Some(v) = self.shape_violation() {
            return vec![v];
        }
        self.a
            .iter()
            .zip(&self.c)
            .enumerate()
            .filter_map(|(row, (a_row, c))| {
                let sum: Coef = a_row.iter().copied().sum();
                if sum.approx_eq(c, REAL_TOL) {
                    None
                } else {
                    Some(Violation::RowSum {
                        row,
                        c: c.to_f64(),
                        row_sum: sum.to_f64(),
                        defect: (sum - *c).to_f64().abs(),
                    })
                }
            })
            .collect()
    }

    /// Strictly lower-triangular `A`.
    pub fn is_explicit(&self) -> bool {
        self.a
            .iter()
            .enumerate()
            .all(|(i, row)| row[i..].iter().all(Coef::is_zero))
    }

    /// Lower-triangular `A` (explicit or diagonally implicit).
    pub fn is_diagonally_implicit(&self) -> bool {
        self.a
            .iter()
            .enumerate()
            .all(|(i, row)| row[i + 1..].iter().all(Coef::is_zero))
    }

    pub fn a_f64(&self) -> Vec<Vec<f64>> {
        crate::coef::to_f64_matrix(&self.a)
    }

    pub fn b_f64(&self) -> Vec<f64> {
        self.b.iter().map(Coef::to_f64).collect()
    }

    pub fn c_f64(&self) -> Vec<f64> {
        self.c.iter().map(Coef::to_f64).collect()
    }

    /// `R(z) = det(I - zA + z 1 b) / det(I - zA)`.
    pub fn stability_function(&self) -> ScalarStabilityFunction {
        let s = self.stages();
        let a_minus_1b: CoefMatrix = (0..s)
            .map(|i| (0..s).map(|j| self.a[i][j] - self.b[j]).collect())
            .collect();
        ScalarStabilityFunction {
            numerator: det_i_minus_z(&a_minus_1b),
            denominator: det_i_minus_z(&self.a),
            source: self.name.clone(),
        }
    }

    /// Largest `p <= up_to` (`up_to` clamped to 1..=3) for which all
    /// classical order conditions up to order `p` hold.
    pub fn classical_order(&self, up_to: usize) -> usize {
        let up_to = up_to.clamp(1, 3);
        let s = self.stages();
        let b = &self.b;
        let c = &self.c;
        let holds = |lhs: Coef, num: i64, den: i64| lhs.approx_eq(&Coef::frac(num, den), REAL_TOL);
        let dot = |u: &[Coef], v: &[Coef]| -> Coef { u.iter().zip(v).map(|(x, y)| *x * *y).sum() };

        let mut order = 0;
        if holds(b.iter().copied().sum(), 1, 1) {
            order = 1;
        }
        if order == 1 && up_to >= 2 && holds(dot(b, c), 1, 2) {
            order = 2;
        }
        if order == 2 && up_to >= 3 {
            let c2: Vec<Coef> = c.iter().map(|x| *x * *x).collect();
            let ac: Vec<Coef> = (0..s).map(|i| dot(&self.a[i], c)).collect();
            if holds(dot(b, &c2), 1, 3) && holds(dot(b, &ac), 1, 6) {
                order = 3;
            }
        }
        order
    }

    /// Scales every entry of `A` and `b` by `alpha`; `c` follows as row sums.
    pub fn scaled(&self, alpha: Coef) -> ButcherTableau {
        ButcherTableau {
            name: self.name.clone(),
            a: self
                .a
                .iter()
                .map(|r| r.iter().map(|x| alpha * *x).collect())
                .collect(),
            b: self.b.iter().map(|x| alpha * *x).collect(),
            c: self.c.iter().map(|x| alpha * *x).collect(),
            gamma: self.gamma,
        }
    }
}

/// Rational stability function `R(z) = P(z) / Q(z)` of one tableau.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarStabilityFunction {
    pub numerator: Poly,
    pub denominator: Poly,
    /// Name of the tableau the function was derived from.
    pub source: String,
}

impl ScalarStabilityFunction {
    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.numerator.eval(z) / self.denominator.eval(z)
    }

    pub fn is_polynomial(&self) -> bool {
        self.denominator.degree() == 0
    }
}

/// Names accepted by [`catalogue`].
pub const CATALOGUE: &[&str] = &[
    "FE",
    "BE",
    "Heun",
    "CrankNicolson",
    "RK3",
    "SDIRK22",
    "SDIRK",
    "SDIRK23",
];

/// `γ = (2 - √2)/2`, the L-stable two-stage second-order SDIRK value.
pub fn sdirk22_gamma() -> f64 {
    (2.0 - std::f64::consts::SQRT_2) / 2.0
}

/// `γ = (3 + √3)/6`, the two-stage third-order SDIRK value.
pub fn sdirk23_gamma() -> f64 {
    (3.0 + 3.0_f64.sqrt()) / 6.0
}

fn m(rows: &[&[Coef]]) -> CoefMatrix {
    rows.iter().map(|r| r.to_vec()).collect()
}

/// Two-stage SDIRK family `c = [γ, 1-γ]`, `A = [[γ, 0], [1-2γ, γ]]`,
/// `b = [1/2, 1/2]`.
pub fn sdirk_family(gamma: Coef) -> ButcherTableau {
    let one = Coef::ONE;
    let z = Coef::ZERO;
    let two = Coef::int(2);
    let half = Coef::frac(1, 2);
    ButcherTableau {
        name: "SDIRK".into(),
        a: m(&[&[gamma, z], &[one - two * gamma, gamma]]),
        b: vec![half, half],
        c: vec![gamma, one - gamma],
        gamma: Some(gamma),
    }
}

/// Looks up a tableau by name (case-insensitive). `gamma` is required by
/// the `SDIRK` family and ignored otherwise.
pub fn catalogue(name: &str, gamma: Option<Coef>) -> Result<ButcherTableau> {
    let z = Coef::ZERO;
    let one = Coef::ONE;
    let half = Coef::frac(1, 2);
    let key = name
        .trim()
        .to_ascii_lowercase()
        .replace(['-', '_', ' '], "");
    let t = match key.as_str() {
        "fe" | "forwardeuler" => ButcherTableau::new("FE", m(&[&[z]]), vec![one], vec![z])?,
        "be" | "backwardeuler" => ButcherTableau::new("BE", m(&[&[one]]), vec![one], vec![one])?,
        "heun" => ButcherTableau::new(
            "Heun",
            m(&[&[z, z], &[one, z]]),
            vec![half, half],
            vec![z, one],
        )?,
        "cranknicolson" | "cn" | "trapezoidal" => ButcherTableau::new(
            "CrankNicolson",
            m(&[&[z, z], &[half, half]]),
            vec![half, half],
            vec![z, one],
        )?,
        "rk3" | "kutta3" => {
            let a = m(&[&[z, z, z], &[half, z, z], &[-one, Coef::int(2), z]]);
            let b = vec![Coef::frac(1, 6), Coef::frac(2, 3), Coef::frac(1, 6)];
            ButcherTableau::new("RK3", a, b, vec![z, half, one])?
        }
        "sdirk22" => {
            // Stiffly accurate form; same stability function as the family
            // member with this γ.
            let g = Coef::real(sdirk22_gamma());
            ButcherTableau {
                name: "SDIRK22".into(),
                a: m(&[&[g, z], &[one - g, g]]),
                b: vec![one - g, g],
                c: vec![g, one],
                gamma: Some(g),
            }
        }
        "sdirk23" => {
            let mut t = sdirk_family(Coef::real(sdirk23_gamma()));
            t.name = "SDIRK23".into();
            t
        }
        "sdirk" | "sdirkγ" | "sdirkgamma" => {
            let g = gamma.ok_or_else(|| {
                FsrkError::Invalid("SDIRK family requires a gamma parameter".into())
            })?;
            sdirk_family(g)
        }
        _ => {
            return Err(FsrkError::CatalogueMiss {
                kind: "tableau",
                name: name.to_string(),
                available: CATALOGUE.iter().map(|s| s.to_string()).collect(),
            })
        }
    };
    Ok(t)
}
