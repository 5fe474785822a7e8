//! Operator-splitting coefficient tables.
//!
//! A method with `s` stages and `N` operators is the table `alpha[k][l]`:
//! at stage `k` operator `l` is advanced over `alpha[k][l] * dt`. Within a
//! stage the operators are applied in `sequence[k]` order (a permutation of
//! `0..N`, identity unless stated), which lets symmetric compositions such as
//! Strang splitting be written with few stages for any `N`.

use serde::{Deserialize, Serialize};

use crate::coef::{Coef, CoefMatrix};
use crate::error::{FsrkError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplittingMethod {
    pub name: String,
    /// Declared classical order, if known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<u32>,
    pub alpha: CoefMatrix,
    /// Per-stage application order (0-based operator indices). Empty means
    /// every stage applies operators `0, 1, ..., N-1`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sequence: Vec<Vec<usize>>,
}

/// Names accepted by [`catalogue_splitting`].
pub const SPLITTING_CATALOGUE: &[&str] = &[
    "Godunov",
    "GodunovAdjoint",
    "Strang",
    "StrangUnmerged",
    "Ruth",
    "OS3_32",
];

impl SplittingMethod {
    pub fn new(name: impl Into<String>, alpha: CoefMatrix, order: Option<u32>) -> Result<Self> {
        let m = SplittingMethod {
            name: name.into(),
            order,
            alpha,
            sequence: Vec::new(),
        };
        m.check_shape()?;
        Ok(m)
    }

    pub fn with_sequence(mut self, sequence: Vec<Vec<usize>>) -> Result<Self> {
        self.sequence = sequence;
        self.check_shape()?;
        Ok(self)
    }

    pub fn stages(&self) -> usize {
        self.alpha.len()
    }

    pub fn operators(&self) -> usize {
        self.alpha.first().map_or(0, Vec::len)
    }

    pub fn check_shape(&self) -> Result<()> {
        let n = self.operators();
        if self.alpha.is_empty() || n == 0 {
            return Err(FsrkError::Dimension(
                "splitting table must have at least one stage and one operator".into(),
            ));
        }
        if let Some(k) = self.alpha.iter().position(|r| r.len() != n) {
            return Err(FsrkError::Dimension(format!(
                "stage {} has {} coefficients, expected {n}",
                k + 1,
                self.alpha[k].len()
            )));
        }
        if !self.sequence.is_empty() {
            if self.sequence.len() != self.stages() {
                return Err(FsrkError::Dimension(format!(
                    "sequence lists {} stages, table has {}",
                    self.sequence.len(),
                    self.stages()
                )));
            }
            for (k, seq) in self.sequence.iter().enumerate() {
                let mut seen = vec![false; n];
                for &l in seq {
                    if l >= n || std::mem::replace(&mut seen[l], true) {
                        return Err(FsrkError::Dimension(format!(
                            "stage {} sequence {seq:?} is not a permutation of 0..{n}",
                            k + 1
                        )));
                    }
                }
                if seq.len() != n {
                    return Err(FsrkError::Dimension(format!(
                        "stage {} sequence {seq:?} is not a permutation of 0..{n}",
                        k + 1
                    )));
                }
            }
        }
        Ok(())
    }

    /// Operators of stage `k` in the order they are applied.
    pub fn stage_sequence(&self, k: usize) -> Vec<usize> {
        if self.sequence.is_empty() {
            (0..self.operators()).collect()
        } else {
            self.sequence[k].clone()
        }
    }

    pub fn has_default_sequence(&self) -> bool {
        (0..self.stages()).all(|k| {
            self.stage_sequence(k)
                .iter()
                .enumerate()
                .all(|(i, &l)| i == l)
        })
    }

    /// `Σ_k alpha[k][l]` for every operator.
    pub fn column_sums(&self) -> Vec<Coef> {
        (0..self.operators())
            .map(|l| self.alpha.iter().map(|r| r[l]).sum())
            .collect()
    }

    /// Operators whose coefficients do not sum to one, with the sum.
    pub fn consistency_defects(&self) -> Vec<(usize, Coef)> {
        self.column_sums()
            .into_iter()
            .enumerate()
            .filter(|(_, s)| !s.approx_eq(&Coef::ONE, crate::coef::REAL_TOL))
            .collect()
    }

    pub fn is_consistent(&self) -> bool {
        self.consistency_defects().is_empty()
    }

    /// Every sub-flow `(operator, fraction)` in application order, zero
    /// fractions dropped. Two tables with the same sequence define the same
    /// composition.
    pub fn flow_sequence(&self) -> Vec<(usize, Coef)> {
        (0..self.stages())
            .flat_map(|k| {
                self.stage_sequence(k)
                    .into_iter()
                    .map(move |l| (l, self.alpha[k][l]))
            })
            .filter(|(_, a)| !a.is_zero())
            .collect()
    }

    /// The method applying the same sub-flows in reverse: stages are taken
    /// last to first and each stage's operators are applied in reverse.
    pub fn adjoint(&self) -> SplittingMethod {
        let alpha: CoefMatrix = self.alpha.iter().rev().cloned().collect();
        let sequence: Vec<Vec<usize>> = (0..self.stages())
            .rev()
            .map(|k| self.stage_sequence(k).into_iter().rev().collect())
            .collect();
        let mut adj = SplittingMethod {
            name: adjoint_name(&self.name),
            order: self.order,
            alpha,
            sequence,
        };
        if adj.has_default_sequence() {
            adj.sequence.clear();
        }
        adj
    }

    /// `Φ*_{dt/2} ∘ Φ_{dt/2}` for a one-stage method `Φ`. With `merged`, the
    /// two adjacent half steps of the last-applied operator become one full
    /// step in stage one and a skipped (zero) entry in stage two.
    pub fn compose_halved(&self, merged: bool) -> Result<SplittingMethod> {
        if self.stages() != 1 {
            return Err(FsrkError::Invalid(format!(
                "compose_halved needs a one-stage method, `{}` has {} stages",
                self.name,
                self.stages()
            )));
        }
        let n = self.operators();
        let half = Coef::frac(1, 2);
        let first: Vec<Coef> = self.alpha[0].iter().map(|a| half * *a).collect();
        let mut second = first.clone();
        let mut row1 = first;
        let seq1 = self.stage_sequence(0);
        let seq2: Vec<usize> = seq1.iter().rev().copied().collect();
        if merged && n >= 2 {
            let last = seq1[n - 1];
            row1[last] = self.alpha[0][last];
            second[last] = Coef::ZERO;
        }
        let name = if merged { "Strang" } else { "StrangUnmerged" };
        let mut out = SplittingMethod {
            name: name.into(),
            order: Some(2),
            alpha: vec![row1, second],
            sequence: vec![seq1, seq2],
        };
        if out.has_default_sequence() {
            out.sequence.clear();
        }
        Ok(out)
    }
}

fn adjoint_name(name: &str) -> String {
    match name.strip_suffix("Adjoint") {
        Some(base) => base.to_string(),
        None => format!("{name}Adjoint"),
    }
}

fn row(xs: &[(i64, i64)]) -> Vec<Coef> {
    xs.iter().map(|&(p, q)| Coef::frac(p, q)).collect()
}

/// Looks up a splitting method for `n` operators.
pub fn catalogue_splitting(name: &str, n: usize) -> Result<SplittingMethod> {
    if n == 0 {
        return Err(FsrkError::Dimension(
            "operator count must be positive".into(),
        ));
    }
    let need = |want: usize| -> Result<()> {
        if n == want {
            Ok(())
        } else {
            Err(FsrkError::Dimension(format!(
                "{name} is defined for N = {want}, got N = {n}"
            )))
        }
    };
    let key = name
        .trim()
        .to_ascii_lowercase()
        .replace(['-', '_', ' '], "");
    let godunov = || SplittingMethod::new("Godunov", vec![vec![Coef::ONE; n]], Some(1));
    let m = match key.as_str() {
        "godunov" | "lietrotter" => godunov()?,
        "godunovadjoint" | "lietrotteradjoint" => godunov()?.adjoint(),
        "strang" | "strangmarchuk" => {
            if n < 2 {
                return Err(FsrkError::Dimension(format!(
                    "{name} needs N >= 2, got N = {n}"
                )));
            }
            godunov()?.compose_halved(true)?
        }
        "strangunmerged" => godunov()?.compose_halved(false)?,
        "ruth" => {
            need(2)?;
            SplittingMethod::new(
                "Ruth",
                vec![
                    row(&[(7, 24), (2, 3)]),
                    row(&[(3, 4), (-2, 3)]),
                    row(&[(-1, 24), (1, 1)]),
                ],
                Some(3),
            )?
        }
        "os332" | "os3(3,2)" => {
            need(3)?;
            SplittingMethod::new(
                "OS3_32",
                vec![
                    row(&[(1, 3), (1, 1), (1, 4)]),
                    row(&[(1, 3), (-1, 2), (1, 1)]),
                    row(&[(1, 3), (1, 2), (-1, 4)]),
                ],
                Some(2),
            )?
        }
        _ => {
            return Err(FsrkError::CatalogueMiss {
                kind: "splitting method",
                name: name.to_string(),
                available: SPLITTING_CATALOGUE.iter().map(|s| s.to_string()).collect(),
            })
        }
    };
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(p: i64, q: i64) -> Coef {
        Coef::frac(p, q)
    }

    #[test]
    fn ruth_and_os3_tables() {
        let ruth = catalogue_splitting("Ruth", 2).unwrap();
        assert_eq!(
            ruth.alpha,
            vec![
                vec![f(7, 24), f(2, 3)],
                vec![f(3, 4), f(-2, 3)],
                vec![f(-1, 24), f(1, 1)]
            ]
        );
        let os = catalogue_splitting("OS3_32", 3).unwrap();
        assert_eq!(
            os.alpha,
            vec![
                vec![f(1, 3), f(1, 1), f(1, 4)],
                vec![f(1, 3), f(-1, 2), f(1, 1)],
                vec![f(1, 3), f(1, 2), f(-1, 4)]
            ]
        );
        assert!(catalogue_splitting("Ruth", 3).is_err());
        assert!(catalogue_splitting("OS3_32", 2).is_err());
    }

    #[test]
    fn godunov_and_strang() {
        assert_eq!(
            catalogue_splitting("Godunov", 2).unwrap().alpha,
            vec![vec![Coef::ONE, Coef::ONE]]
        );
        let s = catalogue_splitting("Strang", 3).unwrap();
        assert_eq!(
            s.alpha,
            vec![
                vec![f(1, 2), f(1, 2), f(1, 1)],
                vec![f(1, 2), f(1, 2), f(0, 1)]
            ]
        );
        assert_eq!(s.stage_sequence(1), vec![2, 1, 0]);
        assert!(catalogue_splitting("Strang", 1).is_err());
    }

    #[test]
    fn every_catalogue_table_is_consistent() {
        for (name, n) in [
            ("Godunov", 1),
            ("Godunov", 4),
            ("GodunovAdjoint", 3),
            ("Strang", 2),
            ("Strang", 5),
            ("StrangUnmerged", 3),
            ("Ruth", 2),
            ("OS3_32", 3),
        ] {
            let m = catalogue_splitting(name, n).unwrap();
            assert!(
                m.is_consistent(),
                "{name} N={n}: {:?}",
                m.consistency_defects()
            );
            assert!(m.column_sums().iter().all(|s| s.is_exact()));
        }
    }

    #[test]
    fn unknown_splitting() {
        let e = catalogue_splitting("Yoshida", 2).unwrap_err().to_string();
        assert!(e.contains("Ruth"));
    }

    #[test]
    fn adjoint_of_godunov_reverses_operators() {
        let g = catalogue_splitting("Godunov", 2).unwrap();
        let a = g.adjoint();
        assert_eq!(a.alpha, g.alpha);
        assert_eq!(a.stage_sequence(0), vec![1, 0]);
        assert_eq!(a.flow_sequence(), vec![(1, Coef::ONE), (0, Coef::ONE)]);
        assert_eq!(a.adjoint(), g);
    }

    #[test]
    fn strang_is_self_adjoint() {
        for n in 2..5 {
            let s = catalogue_splitting("Strang", n).unwrap();
            assert_eq!(s.adjoint().flow_sequence(), s.flow_sequence());
        }
    }

    #[test]
    fn single_operator_adjoint_is_identity() {
        let g = catalogue_splitting("Godunov", 1).unwrap();
        assert_eq!(g.adjoint().alpha, g.alpha);
        assert!(g.adjoint().sequence.is_empty());
    }

    #[test]
    fn compose_halved_variants() {
        let g2 = catalogue_splitting("Godunov", 2).unwrap();
        assert_eq!(
            g2.compose_halved(true).unwrap().alpha,
            vec![vec![f(1, 2), f(1, 1)], vec![f(1, 2), f(0, 1)]]
        );
        assert_eq!(
            g2.compose_halved(false).unwrap().alpha,
            vec![vec![f(1, 2), f(1, 2)], vec![f(1, 2), f(1, 2)]]
        );
        let g1 = catalogue_splitting("Godunov", 1).unwrap();
        assert_eq!(
            g1.compose_halved(true).unwrap().alpha,
            vec![vec![f(1, 2)], vec![f(1, 2)]]
        );
        assert!(catalogue_splitting("Ruth", 2)
            .unwrap()
            .compose_halved(true)
            .is_err());
    }

    #[test]
    fn compose_of_adjoint_godunov_merges_first_operator() {
        let ga = catalogue_splitting("GodunovAdjoint", 3).unwrap();
        let s = ga.compose_halved(true).unwrap();
        // applied: 2,1,0 at half steps (operator 0 merged), then 0,1,2
        assert_eq!(
            s.flow_sequence(),
            vec![
                (2, f(1, 2)),
                (1, f(1, 2)),
                (0, f(1, 1)),
                (1, f(1, 2)),
                (2, f(1, 2))
            ]
        );
        assert!(s.is_consistent());
    }

    #[test]
    fn bad_sequences_are_rejected() {
        let g = catalogue_splitting("Godunov", 2).unwrap();
        assert!(g.clone().with_sequence(vec![vec![0, 0]]).is_err());
        assert!(g.clone().with_sequence(vec![vec![0]]).is_err());
        assert!(g.with_sequence(vec![vec![1, 0], vec![0, 1]]).is_err());
        assert!(SplittingMethod::new(
            "ragged",
            vec![vec![Coef::ONE], vec![Coef::ONE, Coef::ZERO]],
            None
        )
        .is_err());
    }

    #[test]
    fn yoshida_data_file_is_consistent() {
        let text = include_str!("../data/yoshida4.json");
        let m: SplittingMethod = serde_json::from_str(text).unwrap();
        m.check_shape().unwrap();
        assert_eq!(m.operators(), 2);
        assert!(m.is_consistent(), "{:?}", m.consistency_defects());
    }

    #[test]
    fn json_keeps_rationals() {
        let m = catalogue_splitting("Ruth", 2).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert!(s.contains("\"-1/24\""));
        assert_eq!(serde_json::from_str::<SplittingMethod>(&s).unwrap(), m);
    }
}
