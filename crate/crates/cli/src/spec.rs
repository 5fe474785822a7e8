//! Scheme description files.
//!
//! ```json
//! {
//!   "splitting": "Strang",
//!   "integrators": [["Heun", {"name": "SDIRK", "gamma": "1/2"}]]
//! }
//! ```
//!
//! `splitting` is a catalogue name or an inline table
//! `{"name", "alpha", "sequence"?, "order"?}` with 0-based operator indices in
//! `sequence`. `integrators` is either a single row (one method per operator,
//! reused at every stage) or one row per splitting stage.

use std::path::Path;

use anyhow::{bail, Context};
use fsrk::splitting::catalogue_splitting;
use fsrk::tableau::catalogue;
use fsrk::{ButcherTableau, Coef, FsrkScheme, SplittingMethod};
use serde::Deserialize;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSpecFile {
    pub splitting: SplittingSpec,
    pub integrators: Vec<Vec<MethodSpec>>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum SplittingSpec {
    Named(String),
    Inline {
        name: String,
        alpha: Vec<Vec<Coef>>,
        #[serde(default)]
        sequence: Vec<Vec<usize>>,
        #[serde(default)]
        order: Option<u32>,
    },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum MethodSpec {
    Named(String),
    Parameterised {
        name: String,
        #[serde(default)]
        gamma: Option<Coef>,
    },
}

impl MethodSpec {
    fn resolve(&self) -> fsrk::Result<ButcherTableau> {
        match self {
            MethodSpec::Named(n) => catalogue(n, None),
            MethodSpec::Parameterised { name, gamma } => catalogue(name, *gamma),
        }
    }
}

impl SchemeSpecFile {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text)
            .with_context(|| format!("parsing scheme file {}", path.display()))
    }

    pub fn build(&self) -> anyhow::Result<FsrkScheme> {
        let Some(width) = self.integrators.first().map(Vec::len) else {
            bail!("scheme file lists no integrators");
        };
        let split = match &self.splitting {
            SplittingSpec::Named(n) => catalogue_splitting(n, width)?,
            SplittingSpec::Inline {
                name,
                alpha,
                sequence,
                order,
            } => SplittingMethod::new(name.clone(), alpha.clone(), *order)?
                .with_sequence(sequence.clone())?,
        };
        let grid = self
            .integrators
            .iter()
            .map(|row| {
                row.iter()
                    .map(MethodSpec::resolve)
                    .collect::<fsrk::Result<Vec<_>>>()
            })
            .collect::<fsrk::Result<Vec<_>>>()?;
        let scheme = if grid.len() == 1 && split.stages() != 1 {
            FsrkScheme::uniform(split, grid.into_iter().next().unwrap_or_default())?
        } else {
            FsrkScheme::new(split, grid)?
        };
        Ok(scheme)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> SchemeSpecFile {
        serde_json::from_str(s).unwrap()
    }

    #[test]
    fn uniform_row_expands() {
        let s = parse(r#"{"splitting": "Ruth", "integrators": [["RK3", "SDIRK23"]]}"#)
            .build()
            .unwrap();
        assert_eq!(s.stages(), 3);
        assert_eq!(s.integrators[2][1].name, "SDIRK23");
    }

    #[test]
    fn gamma_parameter() {
        let s = parse(r#"{"splitting": "Strang", "integrators": [["Heun", {"name": "SDIRK", "gamma": "1/2"}]]}"#)
            .build()
            .unwrap();
        assert_eq!(s.integrators[0][1].a[0][0], Coef::frac(1, 2));
    }

    #[test]
    fn inline_alpha() {
        let s = parse(
            r#"{"splitting": {"name": "Lie", "alpha": [["1", "1"]], "order": 1}, "integrators": [["FE", "BE"]]}"#,
        )
        .build()
        .unwrap();
        assert_eq!(s.label(), "Lie(FE+BE)");
    }

    #[test]
    fn mismatched_grid_is_rejected() {
        let err = parse(r#"{"splitting": "Strang", "integrators": [["FE", "FE"], ["FE"]]}"#)
            .build()
            .unwrap_err();
        assert!(err.downcast_ref::<fsrk::FsrkError>().is_some());
    }

    #[test]
    fn unknown_method() {
        assert!(
            parse(r#"{"splitting": "Godunov", "integrators": [["Nope", "FE"]]}"#)
                .build()
                .is_err()
        );
    }
}
