#![allow(dead_code)]

use fsrk::splitting::catalogue_splitting;
use fsrk::tableau::{catalogue, sdirk_family};
use fsrk::{Coef, FsrkScheme};

pub fn tab(name: &str) -> fsrk::ButcherTableau {
    catalogue(name, None).unwrap()
}

/// Same tableau for an operator at every stage.
pub fn scheme(split: &str, ops: &[&str]) -> FsrkScheme {
    let tabs = ops.iter().map(|n| tab(n)).collect();
    FsrkScheme::uniform(catalogue_splitting(split, ops.len()).unwrap(), tabs).unwrap()
}

/// OS3_32 with FE/BE/Heun on operator 1, CN/BE/FE on operator 2 and
/// BE/BE/FE on operator 3 across the three stages.
pub fn os3_example() -> FsrkScheme {
    let split = catalogue_splitting("OS3_32", 3).unwrap();
    let grid = vec![
        vec![tab("FE"), tab("CrankNicolson"), tab("BE")],
        vec![tab("BE"), tab("BE"), tab("BE")],
        vec![tab("Heun"), tab("FE"), tab("FE")],
    ];
    FsrkScheme::new(split, grid).unwrap()
}

/// Strang with an SDIRK family member on diffusion (operator 1) and Heun
/// on the reaction (operator 2).
pub fn strang_sdirk_heun(gamma: Coef) -> FsrkScheme {
    FsrkScheme::uniform(
        catalogue_splitting("Strang", 2).unwrap(),
        vec![sdirk_family(gamma), tab("Heun")],
    )
    .unwrap()
}

pub fn five_schemes() -> Vec<(&'static str, FsrkScheme)> {
    vec![
        ("Godunov FE/FE", scheme("Godunov", &["FE", "FE"])),
        (
            "Strang Heun/SDIRK22",
            scheme("Strang", &["Heun", "SDIRK22"]),
        ),
        ("Strang Heun/Heun", scheme("Strang", &["Heun", "Heun"])),
        ("Ruth RK3/SDIRK23", scheme("Ruth", &["RK3", "SDIRK23"])),
        ("OS3_32 mixed", os3_example()),
    ]
}

pub fn c(s: &str) -> Coef {
    s.parse().unwrap()
}
