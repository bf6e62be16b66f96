mod common;

use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;

use tpa_select::pulse::{sample_wavefunction, schmidt};
use tpa_select::response::overlap_matrix;
use tpa_select::selective::{indistinctive_populations, metric_norm, populations, selectivity, solve_selective};
use tpa_select::{Cplx, FrequencyGrid, GriddedWavefunction, LevelScheme, OverlapMatrix};

use common::paper_scheme;

fn c(re: f64, im: f64) -> Cplx<f64> {
    Cplx::new(re, im)
}

/// Normalized Gram matrix of `n` random complex vectors in `n + 2`
/// dimensions; positive definite with probability one.
fn gram(n: usize, raw: &[f64]) -> DMatrix<Cplx<f64>> {
    let m = n + 2;
    let b = DMatrix::from_fn(n, m, |r, s| c(raw[2 * (r * m + s)], raw[2 * (r * m + s) + 1]));
    let g = &b * b.adjoint();
    let d: Vec<f64> = (0..n).map(|i| g[(i, i)].re.sqrt()).collect();
    DMatrix::from_fn(
        n,
        n,
        |r, s| {
            if r == s {
                c(1.0, 0.0)
            } else {
                g[(r, s)] / (d[r] * d[s])
            }
        },
    )
}

fn overlap_strategy() -> impl Strategy<Value = (OverlapMatrix, usize)> {
    (2usize..=5)
        .prop_flat_map(|n| (Just(n), prop::collection::vec(-1.0f64..1.0, 2 * n * (n + 2)), 0..n))
        .prop_filter_map("well conditioned", |(n, raw, t)| {
            let g = gram(n, &raw);
            let min = SymmetricEigen::new(g.clone()).eigenvalues.min();
            (min > 1e-3).then(|| (OverlapMatrix::from_normalized(g).unwrap(), t))
        })
}

fn rayleigh(m: &OverlapMatrix, v: &[Cplx<f64>], target: usize) -> f64 {
    let p = populations(m, v);
    let signed: f64 = p
        .iter()
        .enumerate()
        .map(|(k, x)| if k == target { *x } else { -x })
        .sum();
    signed / metric_norm(m, v)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn optimum_beats_random_probes(
        (m, t) in overlap_strategy(),
        probes in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 10), 32),
    ) {
        let sol = solve_selective(&m, t).unwrap();
        for raw in probes {
            let v: Vec<Cplx<f64>> = (0..m.dim()).map(|i| c(raw[2 * i], raw[2 * i + 1])).collect();
            if metric_norm(&m, &v) > 1e-8 {
                prop_assert!(rayleigh(&m, &v, t) <= sol.lambda + 1e-9);
            }
        }
    }

    #[test]
    fn eigenvalue_equals_functional((m, t) in overlap_strategy()) {
        let sol = solve_selective(&m, t).unwrap();
        prop_assert!(sol.lambda > 0.0);
        prop_assert!((sol.functional() - sol.lambda).abs() < 1e-9);
        prop_assert!((metric_norm(&m, &sol.coefficients) - 1.0).abs() < 1e-9);
        prop_assert!(sol.populations.iter().all(|&p| p >= 0.0));
        prop_assert!(sol.populations[t] <= 1.0 + 1e-9);
    }

    #[test]
    fn relabeling_final_states_permutes_populations(
        (m, t) in overlap_strategy(),
        seed in any::<u64>(),
    ) {
        let n = m.dim();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut s = seed;
        for i in (1..n).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (s >> 33) as usize % (i + 1));
        }
        // New label perm[i] refers to old state i.
        let mut pm = DMatrix::from_element(n, n, c(0.0, 0.0));
        for i in 0..n {
            for j in 0..n {
                pm[(perm[i], perm[j])] = m.get(i, j);
            }
        }
        let pm = OverlapMatrix::from_normalized(pm).unwrap();
        let (a, b) = (solve_selective(&m, t).unwrap(), solve_selective(&pm, perm[t]).unwrap());
        prop_assert!((a.lambda - b.lambda).abs() < 1e-9);
        for i in 0..n {
            prop_assert!((a.populations[i] - b.populations[perm[i]]).abs() < 1e-9);
        }
    }

    #[test]
    fn rephasing_states_leaves_populations_unchanged(
        (m, t) in overlap_strategy(),
        phases in prop::collection::vec(0.0f64..std::f64::consts::TAU, 5),
    ) {
        let n = m.dim();
        let u: Vec<Cplx<f64>> = phases.iter().take(n).map(|&p| Cplx::from_polar(1.0, p)).collect();
        let rm = DMatrix::from_fn(n, n, |j, k| u[j] * m.get(j, k) * u[k].conj());
        let rm = OverlapMatrix::from_normalized(rm).unwrap();
        let (a, b) = (solve_selective(&m, t).unwrap(), solve_selective(&rm, t).unwrap());
        prop_assert!((a.lambda - b.lambda).abs() < 1e-9);
        for k in 0..n {
            prop_assert!((a.populations[k] - b.populations[k]).abs() < 1e-9);
        }
    }

    #[test]
    fn two_state_optimum_is_analytic(r in 0.0f64..0.95, phase in 0.0f64..std::f64::consts::TAU) {
        let a = Cplx::from_polar(r, phase);
        let m = OverlapMatrix::from_normalized(DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), a, a.conj(), c(1.0, 0.0)])).unwrap();
        let sol = solve_selective(&m, 0).unwrap();
        let exact = (1.0 - r * r).sqrt();
        prop_assert!((sol.lambda - exact).abs() < 1e-10);
        // Brute force over a mesh of unit vectors (cos θ, e^{iφ} sin θ).
        let mut best = f64::NEG_INFINITY;
        for i in 0..=200 {
            let th = std::f64::consts::FRAC_PI_2 * i as f64 / 200.0;
            for j in 0..64 {
                let ph = std::f64::consts::TAU * j as f64 / 64.0;
                let v = [c(th.cos(), 0.0), Cplx::from_polar(th.sin(), ph)];
                if metric_norm(&m, &v) > 1e-12 {
                    best = best.max(rayleigh(&m, &v, 0));
                }
            }
        }
        prop_assert!(best <= exact + 1e-9);
        prop_assert!(exact - best < 0.01, "mesh {best} vs {exact}");
    }
}

fn flip_final(scheme: &LevelScheme, k: usize) -> LevelScheme {
    let mut s = scheme.clone();
    for row in &mut s.dipoles_ef {
        row[k] = -row[k];
    }
    s
}

fn flip_intermediate(scheme: &LevelScheme, j: usize) -> LevelScheme {
    let mut s = scheme.clone();
    s.dipoles_ge[j] = -s.dipoles_ge[j];
    for x in &mut s.dipoles_ef[j] {
        *x = -*x;
    }
    s
}

fn rescale(scheme: &LevelScheme, factor: f64) -> LevelScheme {
    let mut s = scheme.clone();
    s.dipoles_ge.iter_mut().for_each(|x| *x *= factor);
    s.dipoles_ef.iter_mut().flatten().for_each(|x| *x *= factor);
    s
}

fn observables(scheme: &LevelScheme) -> (Vec<f64>, f64, f64) {
    let m = overlap_matrix(scheme).unwrap();
    let sol = solve_selective(&m, 1).unwrap();
    let s_sel = selectivity(&sol.populations, 1, 2).unwrap();
    let s_ind = selectivity(&indistinctive_populations(&m, 1).unwrap(), 1, 2).unwrap();
    (sol.populations, s_sel, s_ind)
}

fn assert_same(a: &(Vec<f64>, f64, f64), b: &(Vec<f64>, f64, f64)) -> Result<(), TestCaseError> {
    for (x, y) in a.0.iter().zip(&b.0) {
        prop_assert!((x - y).abs() < 1e-9, "{x} vs {y}");
    }
    prop_assert!((a.1 - b.1).abs() < 1e-9);
    prop_assert!((a.2 - b.2).abs() < 1e-9);
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn dipole_sign_choices_do_not_matter(gamma_f in 0.01f64..0.1, k in 0usize..4, j in 0usize..3) {
        let s = paper_scheme(gamma_f);
        let base = observables(&s);
        assert_same(&base, &observables(&flip_final(&s, k)))?;
        assert_same(&base, &observables(&flip_intermediate(&s, j)))?;
    }

    #[test]
    fn dipole_scale_does_not_matter(gamma_f in 0.01f64..0.1, factor in 0.2f64..5.0) {
        let s = paper_scheme(gamma_f);
        assert_same(&observables(&s), &observables(&rescale(&s, factor)))?;
    }
}

fn random_wavefunction(n: usize, raw: &[f64]) -> GriddedWavefunction {
    // Below the sampling minimum; the decomposition itself does not care.
    let grid = FrequencyGrid {
        omega_min: 0.0,
        omega_max: 1.0,
        n_points: n,
    };
    let mut psi = GriddedWavefunction {
        grid,
        amplitudes: DMatrix::from_fn(n, n, |a, b| c(raw[2 * (a * n + b)], raw[2 * (a * n + b) + 1])),
    };
    psi.normalize();
    psi
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn schmidt_weights_are_normalized(raw in prop::collection::vec(-1.0f64..1.0, 2 * 16 * 16)) {
        let psi = random_wavefunction(16, &raw);
        let sd = schmidt(&psi);
        prop_assert!((sd.weight_sum() - 1.0).abs() < 1e-10);
        prop_assert!(sd.weights.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(sd.orthonormality_error(16) < 1e-9);
        prop_assert!(sd.schmidt_number() >= 1.0 - 1e-12);
        // Reassembling every mode pair recovers the state.
        let mut rebuilt = DMatrix::from_element(16, 16, c(0.0, 0.0));
        for (i, &r) in sd.weights.iter().enumerate() {
            rebuilt += (sd.modes_1.column(i) * sd.modes_2.column(i).transpose()).map(|z| z * r);
        }
        let err = (&rebuilt - &psi.amplitudes).iter().fold(0.0f64, |a, z| a.max(z.norm()));
        prop_assert!(err < 1e-9);
    }

    #[test]
    fn swapping_photons_keeps_the_weights(raw in prop::collection::vec(-1.0f64..1.0, 2 * 12 * 12)) {
        let psi = random_wavefunction(12, &raw);
        let swapped = GriddedWavefunction { grid: psi.grid, amplitudes: psi.amplitudes.transpose() };
        let (a, b) = (schmidt(&psi), schmidt(&swapped));
        for (x, y) in a.weights.iter().zip(&b.weights) {
            prop_assert!((x - y).abs() < 1e-10);
        }
    }
}

fn toy_scheme(e: [f64; 2], f: f64, widths: [f64; 2]) -> LevelScheme {
    LevelScheme {
        energies_e: e.to_vec(),
        energies_f: vec![f],
        widths_e: vec![widths[0]; 2],
        widths_f: vec![widths[1]],
        dipoles_ge: vec![1.0, 0.6],
        dipoles_ef: vec![vec![0.8], vec![-0.5]],
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn sampled_states_are_exchange_symmetric(
        e1 in 0.8f64..1.0,
        e2 in 1.05f64..1.2,
        f in 1.9f64..2.2,
        gamma in 0.05f64..0.1,
    ) {
        let s = toy_scheme([e1, e2], f, [gamma / 2.0, gamma]);
        let grid = FrequencyGrid::new(-1.0, 4.0, 96).unwrap();
        let psi = sample_wavefunction(&s, &[c(1.0, 0.0)], &grid).unwrap();
        let scale = psi.amplitudes.iter().fold(0.0f64, |a, z| a.max(z.norm()));
        prop_assert!(psi.transposition_asymmetry() <= 1e-12 * scale);
    }
}
