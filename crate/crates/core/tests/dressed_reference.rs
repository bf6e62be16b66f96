mod common;

use nalgebra::DMatrix;
use tpa_select::dressed::{
    build_hamiltonian, classify_manifolds, convergence_check, diagonalize, product_basis, DressedSystem,
};
use tpa_select::{Error, SystemParams};

use common::{
    paper_system, REFERENCE_DIPOLES_EF, REFERENCE_DIPOLES_GE, REFERENCE_ENERGIES, TABLE_DIPOLES, TABLE_ENERGIES,
};

#[test]
fn tabulated_energies() {
    let e = paper_system().tracked_energies();
    for (i, (got, want)) in e.iter().zip(TABLE_ENERGIES).enumerate() {
        assert!((got - want).abs() <= 0.005, "state {i}: {got} vs {want}");
    }
}

#[test]
fn tabulated_dipoles() {
    let d = &paper_system().dipoles;
    assert_eq!(d.labels, ["g", "e1", "e2", "e3", "f1", "f2", "f3", "f4"]);
    for r in 0..8 {
        for s in 0..8 {
            let (got, want) = (d.get(r, s), TABLE_DIPOLES[r][s]);
            assert!((got - want).abs() <= 0.005, "mu[{r}][{s}] = {got}, table {want}");
        }
    }
}

#[test]
fn matches_reference_diagonalization() {
    let sys = paper_system();
    for (got, want) in sys.tracked_energies().iter().zip(REFERENCE_ENERGIES) {
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }
    let scheme = common::paper_scheme(0.01);
    for j in 0..3 {
        assert!((scheme.dipoles_ge[j] - REFERENCE_DIPOLES_GE[j]).abs() < 1e-10);
        for k in 0..4 {
            assert!((scheme.dipoles_ef[j][k] - REFERENCE_DIPOLES_EF[j][k]).abs() < 1e-10);
        }
    }
}

#[test]
fn level_scheme_energies_are_relative_to_ground() {
    let scheme = common::paper_scheme(0.01);
    let e = REFERENCE_ENERGIES;
    for j in 0..3 {
        assert!((scheme.energies_e[j] - (e[1 + j] - e[0])).abs() < 1e-12);
    }
    for k in 0..4 {
        assert!((scheme.energies_f[k] - (e[4 + k] - e[0])).abs() < 1e-12);
    }
}

fn pauli_lowering() -> DMatrix<f64> {
    // Basis (g, e): σ|e> = |g>.
    DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0])
}

fn annihilation(n_max: usize) -> DMatrix<f64> {
    let n = n_max + 1;
    DMatrix::from_fn(n, n, |r, c| if c == r + 1 { (c as f64).sqrt() } else { 0.0 })
}

/// Hamiltonian assembled from Kronecker products of single-mode operators,
/// in the order atom 1 ⊗ atom 2 ⊗ cavity.
fn kronecker_hamiltonian(w: [f64; 2], w0: f64, g: [f64; 2], n_max: usize) -> DMatrix<f64> {
    let id2 = DMatrix::<f64>::identity(2, 2);
    let idc = DMatrix::<f64>::identity(n_max + 1, n_max + 1);
    let s = pauli_lowering();
    let b = annihilation(n_max);
    let sigma = [s.kronecker(&id2).kronecker(&idc), id2.kronecker(&s).kronecker(&idc)];
    let field = id2.kronecker(&id2).kronecker(&b);
    let x = &field + field.transpose();
    let mut h = field.transpose() * &field * w0;
    for n in 0..2 {
        let sn = &sigma[n];
        h += sn.transpose() * sn * w[n];
        h += (sn + sn.transpose()) * &x * g[n];
    }
    h
}

#[test]
fn hamiltonian_matches_kronecker_construction() {
    for (w, g) in [([0.8, 1.2], [0.14, 0.14]), ([0.9, 1.05], [0.03, 0.2])] {
        let params = SystemParams {
            atom_frequencies: w.to_vec(),
            couplings: g.to_vec(),
            ..SystemParams::paper_defaults()
        };
        let h = build_hamiltonian(&params).unwrap();
        let reference = kronecker_hamiltonian(w, 1.0, g, params.n_max);
        assert!((&h - &reference).amax() < 1e-14);
    }
}

#[test]
fn converged_at_fifteen_photons() {
    let report = convergence_check(&SystemParams::paper_defaults()).unwrap();
    assert!(report.passed, "{report:?}");
    assert_eq!(report.reference_n_max, 20);
}

#[test]
fn two_photon_truncation_is_flagged() {
    let report = convergence_check(&SystemParams::paper_defaults().with_n_max(2)).unwrap();
    assert!(!report.passed);
    assert!(report.max_drift > report.threshold);
}

#[test]
fn three_atom_manifold_sizes() {
    let params = SystemParams {
        atom_frequencies: vec![0.85, 1.0, 1.15],
        couplings: vec![0.05, 0.05, 0.05],
        n_max: 8,
        ..SystemParams::paper_defaults()
    };
    let h = build_hamiltonian(&params).unwrap();
    let spectrum = diagonalize(&h, product_basis(3, params.n_max)).unwrap();
    let a = classify_manifolds(&spectrum).unwrap();
    assert_eq!((a.n_intermediate(), a.n_final()), (4, 7));
}

#[test]
fn sign_convention_holds() {
    let sys = paper_system();
    let d = &sys.dipoles;
    for j in 1..=3 {
        assert!(d.get(0, j) >= 0.0);
    }
    for k in 4..8 {
        assert!(d.get(1, k) >= 0.0);
    }
    assert_eq!(d.entries, d.entries.transpose());
}

#[test]
fn stored_spectrum_rebuilds_identically() {
    let sys = paper_system();
    let json = serde_json::to_string(sys).unwrap();
    let back: DressedSystem<f64> = serde_json::from_str(&json).unwrap();
    assert_eq!(&back, sys);
    let rebuilt = DressedSystem::from_spectrum(back.params.clone(), back.spectrum.clone()).unwrap();
    assert_eq!(rebuilt.dipoles.entries, sys.dipoles.entries);
    assert!(rebuilt.dipoles.signs.iter().all(|&s| s == 1));
}

#[test]
fn strong_coupling_cannot_be_classified() {
    let params = SystemParams {
        couplings: vec![0.6, 0.6],
        ..SystemParams::paper_defaults()
    };
    assert!(matches!(
        DressedSystem::new(params),
        Err(Error::ManifoldAmbiguity { .. })
    ));
}
