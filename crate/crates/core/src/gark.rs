//! Extended (GARK/ARK-form) Butcher tableaux of fractional-step
//! Runge-Kutta schemes.
//!
//! Rows are ordered stage-major, then by the order in which operators are
//! applied within the stage, then by RK stage. Each operator `l` owns one
//! `S x S` block `A[l]`, a weight row `b[l]` and abscissae `c[l]`:
//!
//! * inside splitting stage `k`, the rows of operator `l` carry
//!   `alpha[k][l] * Ã`, and rows of operators applied later in the same stage
//!   carry `alpha[k][l] * 1 b̃`;
//! * every row of a later stage carries `alpha[j][l] * 1 b̃` in the columns of
//!   operator `l` at stage `j`;
//! * `c[l]` is the accumulated fraction `Σ_{i<k} alpha[i][l]`, plus
//!   `alpha[k][l] * c̃` on the operator's own rows and the full `Σ_{i<=k}`
//!   on rows applied after it.
//!
//! Skipped sub-steps (`alpha = 0`) keep their rows; their blocks are zero.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coef::{zeros, Coef, CoefMatrix, REAL_TOL};
use crate::error::{FsrkError, Result};
use crate::splitting::SplittingMethod;
use crate::tableau::ButcherTableau;

/// A splitting method plus the RK method used for every (stage, operator).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FsrkScheme {
    pub splitting: SplittingMethod,
    /// `integrators[k][l]` advances operator `l` at splitting stage `k`.
    pub integrators: Vec<Vec<ButcherTableau>>,
}

impl FsrkScheme {
    pub fn new(splitting: SplittingMethod, integrators: Vec<Vec<ButcherTableau>>) -> Result<Self> {
        splitting.check_shape()?;
        let (s, n) = (splitting.stages(), splitting.operators());
        if integrators.len() != s {
            return Err(FsrkError::Dimension(format!(
                "integrator grid has {} rows, splitting `{}` has {s} stages",
                integrators.len(),
                splitting.name
            )));
        }
        for (k, row) in integrators.iter().enumerate() {
            if row.len() != n {
                return Err(FsrkError::Dimension(format!(
                    "integrator grid row {} has {} entries, splitting has {n} operators",
                    k + 1,
                    row.len()
                )));
            }
            for (l, t) in row.iter().enumerate() {
                let v = t.validate();
                if !v.is_empty() {
                    let msgs: Vec<String> = v.iter().map(ToString::to_string).collect();
                    return Err(FsrkError::Invalid(format!(
                        "tableau `{}` at stage {}, operator {}: {}",
                        t.name,
                        k + 1,
                        l + 1,
                        msgs.join("; ")
                    )));
                }
            }
        }
        Ok(FsrkScheme {
            splitting,
            integrators,
        })
    }

    /// Uses `per_operator[l]` for operator `l` at every stage.
    pub fn uniform(splitting: SplittingMethod, per_operator: Vec<ButcherTableau>) -> Result<Self> {
        let grid = vec![per_operator; splitting.stages()];
        Self::new(splitting, grid)
    }

    pub fn stages(&self) -> usize {
        self.splitting.stages()
    }

    pub fn operators(&self) -> usize {
        self.splitting.operators()
    }

    pub fn alpha(&self, k: usize, l: usize) -> Coef {
        self.splitting.alpha[k][l]
    }

    /// `Σ_k Σ_l s̃[k][l]`.
    pub fn total_stages(&self) -> usize {
        self.integrators
            .iter()
            .flatten()
            .map(ButcherTableau::stages)
            .sum()
    }

    pub fn label(&self) -> String {
        let names: Vec<String> = (0..self.operators())
            .map(|l| {
                let mut col: Vec<&str> = self
                    .integrators
                    .iter()
                    .map(|r| r[l].name.as_str())
                    .collect();
                col.dedup();
                col.join("/")
            })
            .collect();
        format!("{}({})", self.splitting.name, names.join("+"))
    }
}

/// Position of one intermediate stage value `Y[k][l]_i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StageIndex {
    pub stage: usize,
    pub operator: usize,
    pub rk_stage: usize,
}

impl StageIndex {
    /// 1-based label `Y[k,l,i]`.
    pub fn label(&self) -> String {
        format!(
            "Y{},{},{}",
            self.stage + 1,
            self.operator + 1,
            self.rk_stage + 1
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowOrdering {
    /// Stage-major, operators in application order.
    Application,
    /// Operator-major, then stage (González-Pinto layout).
    ByOperator,
    Custom,
}

/// The per-operator blocks `(A[l], b[l], c[l])` of one FSRK step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtendedTableau {
    pub total_stages: usize,
    pub operators: usize,
    pub ordering: RowOrdering,
    /// Global row index -> stage value it holds.
    pub rows: Vec<StageIndex>,
    /// Operator application order within each splitting stage.
    pub sequences: Vec<Vec<usize>>,
    /// `partial_sums[k][p]`: rows of stage `k` used by the first `p + 1`
    /// operators in application order.
    pub partial_sums: Vec<Vec<usize>>,
    #[serde(rename = "A")]
    pub a: Vec<CoefMatrix>,
    pub b: Vec<Vec<Coef>>,
    pub c: Vec<Vec<Coef>>,
}

/// Builds the extended tableau of `scheme`.
pub fn build_extended(scheme: &FsrkScheme) -> Result<ExtendedTableau> {
    let scheme = FsrkScheme::new(scheme.splitting.clone(), scheme.integrators.clone())?;
    let (s, n) = (scheme.stages(), scheme.operators());
    let total = scheme.total_stages();

    // Row ranges per (k, l) in application order.
    let mut rows = Vec::with_capacity(total);
    let mut block_start = vec![vec![0usize; n]; s];
    let mut stage_end = vec![0usize; s];
    let mut partial_sums = Vec::with_capacity(s);
    let sequences: Vec<Vec<usize>> = (0..s).map(|k| scheme.splitting.stage_sequence(k)).collect();
    // position[k][l]: where operator l is applied within stage k
    let mut position = vec![vec![0usize; n]; s];
    for k in 0..s {
        let mut acc = 0;
        let mut sums = Vec::with_capacity(n);
        for (p, &l) in sequences[k].iter().enumerate() {
            position[k][l] = p;
            block_start[k][l] = rows.len();
            for i in 0..scheme.integrators[k][l].stages() {
                rows.push(StageIndex {
                    stage: k,
                    operator: l,
                    rk_stage: i,
                });
            }
            acc += scheme.integrators[k][l].stages();
            sums.push(acc);
        }
        stage_end[k] = rows.len();
        partial_sums.push(sums);
    }

    let mut a = vec![zeros(total, total); n];
    let mut b = vec![vec![Coef::ZERO; total]; n];
    let mut c = vec![vec![Coef::ZERO; total]; n];

    for l in 0..n {
        let mut before = Coef::ZERO; // Σ_{i<k} alpha[i][l]
        for k in 0..s {
            let alpha = scheme.alpha(k, l);
            let t = &scheme.integrators[k][l];
            let st = t.stages();
            let cols = block_start[k][l]..block_start[k][l] + st;
            let after = before + alpha;

            // own rows: alpha * Ã, later rows of this and later stages: alpha * 1 b̃
            for (i, row) in cols.clone().enumerate() {
                for (j, col) in cols.clone().enumerate() {
                    a[l][row][col] = alpha * t.a[i][j];
                }
            }
            for row in cols.end..total {
                for (j, col) in cols.clone().enumerate() {
                    a[l][row][col] = alpha * t.b[j];
                }
            }
            for (j, col) in cols.clone().enumerate() {
                b[l][col] = alpha * t.b[j];
            }

            let stage_rows = if k == 0 { 0 } else { stage_end[k - 1] }..stage_end[k];
            for row in stage_rows {
                let p = position[k][rows[row].operator];
                c[l][row] = match p.cmp(&position[k][l]) {
                    std::cmp::Ordering::Less => before,
                    std::cmp::Ordering::Equal => before + alpha * t.c[rows[row].rk_stage],
                    std::cmp::Ordering::Greater => after,
                };
            }
            before = after;
        }
    }

    Ok(ExtendedTableau {
        total_stages: total,
        operators: n,
        ordering: RowOrdering::Application,
        rows,
        sequences,
        partial_sums,
        a,
        b,
        c,
    })
}

/// The compact tableau: one `S x S` matrix whose column `j` is taken from
/// the block of the operator that owns stage value `j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompactTableau {
    pub total_stages: usize,
    pub operators: usize,
    pub rows: Vec<StageIndex>,
    #[serde(rename = "A")]
    pub a: CoefMatrix,
    pub b: Vec<Coef>,
    /// Per-operator abscissae, as in the extended form.
    pub c: Vec<Vec<Coef>>,
}

pub fn build_compact(scheme: &FsrkScheme) -> Result<CompactTableau> {
    Ok(build_extended(scheme)?.compact())
}

/// Result of the internal-consistency check.
#[derive(Clone, Debug, PartialEq)]
pub struct Consistency {
    pub consistent: bool,
    /// First `(row, l, l')` whose row sums differ, 0-based.
    pub witness: Option<(usize, usize, usize)>,
}

impl ExtendedTableau {
    pub fn compact(&self) -> CompactTableau {
        let s = self.total_stages;
        let a = (0..s)
            .map(|i| {
                (0..s)
                    .map(|j| self.a[self.rows[j].operator][i][j])
                    .collect()
            })
            .collect();
        let b = (0..s).map(|j| self.b[self.rows[j].operator][j]).collect();
        CompactTableau {
            total_stages: s,
            operators: self.operators,
            rows: self.rows.clone(),
            a,
            b,
            c: self.c.clone(),
        }
    }

    /// Row `i` of `A[l]` summed.
    pub fn row_sum(&self, l: usize, i: usize) -> Coef {
        self.a[l][i].iter().copied().sum()
    }

    /// All operators' row sums agree on every row.
    pub fn check_internal_consistency(&self) -> Consistency {
        for i in 0..self.total_stages {
            let first = self.row_sum(0, i);
            for l in 1..self.operators {
                if !self.row_sum(l, i).approx_eq(&first, REAL_TOL) {
                    return Consistency {
                        consistent: false,
                        witness: Some((i, 0, l)),
                    };
                }
            }
        }
        Consistency {
            consistent: true,
            witness: None,
        }
    }

    /// Applies a row/column permutation: new row `r` is old row `perm[r]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<ExtendedTableau> {
        let s = self.total_stages;
        let mut seen = vec![false; s];
        if perm.len() != s
            || perm
                .iter()
                .any(|&p| p >= s || std::mem::replace(&mut seen[p], true))
        {
            return Err(FsrkError::Dimension(format!("not a permutation of 0..{s}")));
        }
        let a = self
            .a
            .iter()
            .map(|m| {
                perm.iter()
                    .map(|&i| perm.iter().map(|&j| m[i][j]).collect())
                    .collect()
            })
            .collect();
        let pick = |v: &Vec<Coef>| perm.iter().map(|&j| v[j]).collect();
        let rows: Vec<StageIndex> = perm.iter().map(|&i| self.rows[i]).collect();
        let ordering = if is_application_order(&rows) {
            RowOrdering::Application
        } else if is_operator_order(&rows) {
            RowOrdering::ByOperator
        } else {
            RowOrdering::Custom
        };
        Ok(ExtendedTableau {
            total_stages: s,
            operators: self.operators,
            ordering,
            rows,
            sequences: self.sequences.clone(),
            partial_sums: self.partial_sums.clone(),
            a,
            b: self.b.iter().map(pick).collect(),
            c: self.c.iter().map(pick).collect(),
        })
    }

    /// Groups rows by operator, then stage, then RK stage.
    pub fn reorder_by_operator(&self) -> ExtendedTableau {
        let mut perm: Vec<usize> = (0..self.total_stages).collect();
        perm.sort_by_key(|&r| {
            let x = self.rows[r];
            (x.operator, x.stage, x.rk_stage)
        });
        self.permuted(&perm).expect("sorting yields a permutation")
    }

    /// Undoes [`reorder_by_operator`](Self::reorder_by_operator) or any
    /// other permutation.
    pub fn restore_application_order(&self) -> ExtendedTableau {
        let mut perm: Vec<usize> = (0..self.total_stages).collect();
        perm.sort_by_key(|&r| self.application_key(self.rows[r]));
        self.permuted(&perm).expect("sorting yields a permutation")
    }

    fn application_key(&self, x: StageIndex) -> (usize, usize, usize) {
        let pos = self.sequences[x.stage]
            .iter()
            .position(|&o| o == x.operator)
            .unwrap_or(x.operator);
        (x.stage, pos, x.rk_stage)
    }

    /// `1 + (Σ z_l b[l]) (I - Σ z_l A[l])^{-1} 1`, by dense LU.
    pub fn ark_stability_eval(&self, z: &[Complex64]) -> Result<Complex64> {
        if z.len() != self.operators {
            return Err(FsrkError::Dimension(format!(
                "expected {} arguments, got {}",
                self.operators,
                z.len()
            )));
        }
        let s = self.total_stages;
        let mut m = DMatrix::<Complex64>::identity(s, s);
        let mut w = vec![Complex64::new(0.0, 0.0); s];
        for (l, zl) in z.iter().enumerate() {
            for i in 0..s {
                for j in 0..s {
                    let x = self.a[l][i][j];
                    if !x.is_zero() {
                        m[(i, j)] -= zl * x.to_f64();
                    }
                }
                w[i] += zl * self.b[l][i].to_f64();
            }
        }
        let norm1 = column_norm1(&m);
        let inv = m
            .clone()
            .lu()
            .try_inverse()
            .ok_or_else(|| FsrkError::PoleProximity {
                z: z.to_vec(),
                condition: f64::INFINITY,
            })?;
        let condition = norm1 * column_norm1(&inv);
        if !condition.is_finite() || condition >= 1e14 {
            return Err(FsrkError::PoleProximity {
                z: z.to_vec(),
                condition,
            });
        }
        let mut r = Complex64::new(1.0, 0.0);
        for i in 0..s {
            let xi: Complex64 = (0..s).map(|j| inv[(i, j)]).sum();
            r += w[i] * xi;
        }
        Ok(r)
    }

    /// Aligned text dump of every operator block, `c[l] | A[l]` over `b[l]`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for l in 0..self.operators {
            let _ = writeln!(out, "operator {} : c[{0}] | A[{0}]", l + 1);
            let cols = vec![self.c[l].clone()];
            out.push_str(&render(&self.rows, &cols, &self.a[l], &self.b[l]));
            out.push('\n');
        }
        out
    }
}

impl CompactTableau {
    /// Aligned text dump `c[1] .. c[N] | A` over `b`, with dashed lines
    /// between splitting stages.
    pub fn to_text(&self) -> String {
        render(&self.rows, &self.c, &self.a, &self.b)
    }
}

fn is_application_order(rows: &[StageIndex]) -> bool {
    rows.windows(2).all(|w| w[0].stage <= w[1].stage)
}

fn is_operator_order(rows: &[StageIndex]) -> bool {
    rows.windows(2).all(|w| {
        (w[0].operator, w[0].stage, w[0].rk_stage) < (w[1].operator, w[1].stage, w[1].rk_stage)
    })
}

fn column_norm1(m: &DMatrix<Complex64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|x| x.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn render(rows: &[StageIndex], c_cols: &[Vec<Coef>], a: &CoefMatrix, b: &[Coef]) -> String {
    let s = rows.len();
    let cell = |x: &Coef| {
        if x.is_zero() {
            "0".to_string()
        } else {
            x.to_string()
        }
    };
    let label_w = rows.iter().map(|r| r.label().len()).max().unwrap_or(0);
    let c_w = c_cols
        .iter()
        .flatten()
        .map(|x| cell(x).len())
        .max()
        .unwrap_or(1);
    let a_w = a
        .iter()
        .flatten()
        .chain(b.iter())
        .map(|x| cell(x).len())
        .max()
        .unwrap_or(1);

    let mut out = String::new();
    let line = |out: &mut String, label: &str, cs: Vec<String>, xs: Vec<String>| {
        let mut l = format!("{label:<label_w$} |");
        for c in cs {
            let _ = write!(l, " {c:>c_w$}");
        }
        l.push_str(" |");
        for x in xs {
            let _ = write!(l, " {x:>a_w$}");
        }
        out.push_str(l.trim_end());
        out.push('\n');
    };
    let width = label_w + 2 + c_cols.len() * (c_w + 1) + 2 + s * (a_w + 1);
    for i in 0..s {
        if i > 0 && rows[i].stage != rows[i - 1].stage {
            out.push_str(&"-".repeat(width));
            out.push('\n');
        }
        let cs = c_cols.iter().map(|col| cell(&col[i])).collect();
        let xs = a[i].iter().map(cell).collect();
        line(&mut out, &rows[i].label(), cs, xs);
    }
    out.push_str(&"=".repeat(width));
    out.push('\n');
    let blanks = c_cols.iter().map(|_| String::new()).collect();
    line(&mut out, "b", blanks, b.iter().map(cell).collect());
    out
}
