#![allow(dead_code)]

use std::sync::OnceLock;

use tpa_select::{DressedSystem, LevelScheme, SystemParams};

pub fn paper_system() -> &'static DressedSystem {
    static SYSTEM: OnceLock<DressedSystem> = OnceLock::new();
    SYSTEM.get_or_init(|| DressedSystem::new(SystemParams::paper_defaults()).expect("default system diagonalizes"))
}

/// Level scheme with `γ_e = γ_f / 2`.
pub fn paper_scheme(gamma_f: f64) -> LevelScheme {
    paper_system().level_scheme(gamma_f / 2.0, gamma_f).unwrap()
}

/// Published eigenenergies, three significant figures.
pub const TABLE_ENERGIES: [f64; 8] = [-2.04e-2, 0.698, 0.979, 1.26, 1.58, 1.97, 2.00, 2.37];

/// Published dipole table. Rows g, e1, e2, e3, f1..f4; columns in the same order.
pub const TABLE_DIPOLES: [[f64; 8]; 8] = [
    [0.0, 1.09, 1.61e-3, 0.939, 0.0, 0.0, 0.0, 0.0],
    [1.09, 0.0, 0.0, 0.0, 0.891, 0.475, 0.705, 0.125],
    [1.61e-3, 0.0, 0.0, 0.0, 0.757, -7.95e-2, -7.34e-2, 0.688],
    [0.939, 0.0, 0.0, 0.0, -0.205, 0.515, 0.706, -0.779],
    [0.0, 0.891, 0.757, -0.205, 0.0, 0.0, 0.0, 0.0],
    [0.0, 0.475, -7.95e-2, 0.515, 0.0, 0.0, 0.0, 0.0],
    [0.0, 0.705, -7.34e-2, 0.706, 0.0, 0.0, 0.0, 0.0],
    [0.0, 0.125, 0.688, -0.779, 0.0, 0.0, 0.0, 0.0],
];

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Tracked eigenenergies from an independent dense diagonalization
/// (LAPACK `syevd`) of the same Hamiltonian, n_max = 15.
pub const REFERENCE_ENERGIES: [f64; 8] = [
    -0.020399953477482444,
    0.6980743782464409,
    0.9792828614417634,
    1.2622136346951591,
    1.5803157082245978,
    1.9688276563775053,
    2.0,
    2.370381197370486,
];

/// Non-zero dipole blocks from the same reference run, same sign convention.
pub const REFERENCE_DIPOLES_GE: [f64; 3] = [1.0856491136829547, 0.0016070438807854089, 0.9393439267806808];

pub const REFERENCE_DIPOLES_EF: [[f64; 4]; 3] = [
    [
        0.89133433005604,
        0.4751655745168824,
        0.704821513169745,
        0.1251760750022057,
    ],
    [
        0.7570007167060137,
        -0.07945500922897532,
        -0.07339921595665984,
        0.6879324986851906,
    ],
    [
        -0.20476991053931706,
        0.5151749475578357,
        0.7059462421737045,
        -0.7792086492863289,
    ],
];
