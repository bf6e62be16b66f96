mod common;

use std::sync::OnceLock;

use tpa_select::experiments::{default_grid, run_optimal_panels};
use tpa_select::pulse::{population_of, populations_of, sample_wavefunction, schmidt};
use tpa_select::response::overlap_matrix;
use tpa_select::selective::{indistinctive_populations, solve_selective};
use tpa_select::{Cplx, FrequencyGrid, PanelDataset, ScenarioConfig};

use common::{paper_scheme, paper_system, rel_err};

/// f1 and f2 panels at γ_f = 0.01 on the default 512-point grid.
fn narrow_panels() -> &'static PanelDataset {
    static DATA: OnceLock<PanelDataset> = OnceLock::new();
    DATA.get_or_init(|| {
        let config = ScenarioConfig {
            targets: vec![0, 1],
            ..ScenarioConfig::default()
        };
        run_optimal_panels(&config, paper_system()).unwrap()
    })
}

fn nearest(grid: &FrequencyGrid, w: f64) -> usize {
    ((w - grid.omega_min) / grid.spacing()).round() as usize
}

#[test]
fn lowest_final_state_peaks_on_resonant_paths() {
    let data = narrow_panels();
    let s = &data.scheme;
    let psi = &data.panels[0].wavefunction;
    let peaks = psi.peaks(4, 0.05);
    assert!(!peaks.is_empty());
    let h = data.grid.spacing();
    let top = &peaks[0];
    assert!((top.omega1 + top.omega2 - s.energies_f[0]).abs() < 3.0 * h, "{top:?}");
    let at = |x: f64, j: usize| (x - s.energies_e[j]).abs() < 3.0 * h;
    assert!(
        [0, 2].iter().any(|&j| at(top.omega1, j) || at(top.omega2, j)),
        "{top:?} not at an e1 or e3 resonance"
    );
    // Both orderings of the photons appear.
    let mirrored = peaks
        .iter()
        .any(|p| (p.omega1 - top.omega2).abs() < 2.0 * h && (p.omega2 - top.omega1).abs() < 2.0 * h);
    assert!(mirrored, "{peaks:?}");
}

#[test]
fn optimal_pulse_is_entangled() {
    let panel = &narrow_panels().panels[0];
    let r1_sq = panel.leading_weight_sq();
    assert!((r1_sq - 0.4056).abs() < 0.01, "r1^2 = {r1_sq}");
    assert!(panel.schmidt_number > 2.0);
    assert!((panel.schmidt_weight_sum - 1.0).abs() < 1e-10);
}

#[test]
fn separable_pulse_spills_into_the_off_resonant_corner() {
    let data = narrow_panels();
    let panel = &data.panels[0];
    let e1 = data.scheme.energies_e[0];
    let i = nearest(&data.grid, e1);
    let entangled = panel.wavefunction.intensity()[(i, i)];
    let classical = panel.classical_pulse.intensity()[(i, i)];
    let peak = panel.classical_pulse.intensity().max();
    assert!(
        classical > 10.0 * entangled,
        "classical {classical}, entangled {entangled}"
    );
    assert!(classical > 0.05 * peak, "classical {classical}, peak {peak}");
}

#[test]
fn gridded_populations_match_the_closed_form() {
    let data = narrow_panels();
    for panel in &data.panels {
        let t = panel.target;
        let (q, p) = (&panel.entangled_quadrature, &panel.entangled);
        assert!(rel_err(q[t], p[t]) < 0.01, "f{}: {} vs {}", t + 1, q[t], p[t]);
        for k in 0..4 {
            assert!(
                (q[k] - p[k]).abs() < 0.01 * p[t],
                "f{} leak into f{}: {} vs {}",
                t + 1,
                k + 1,
                q[k],
                p[k]
            );
        }
    }
}

#[test]
fn single_response_state_reproduces_overlap_populations() {
    let s = paper_scheme(0.05);
    let m = overlap_matrix(&s).unwrap();
    let grid = default_grid(&s, 512);
    for j in [0, 1] {
        let mut c = vec![Cplx::new(0.0, 0.0); 4];
        c[j] = Cplx::new(1.0, 0.0);
        let psi = sample_wavefunction(&s, &c, &grid).unwrap();
        let want = indistinctive_populations(&m, j).unwrap();
        let got = populations_of(&s, &psi).unwrap();
        assert!(rel_err(got[j], 1.0) < 0.01, "f{}: {}", j + 1, got[j]);
        for k in 0..4 {
            assert!(
                (got[k] - want[k]).abs() < 0.01,
                "f{} -> f{}: {} vs {}",
                j + 1,
                k + 1,
                got[k],
                want[k]
            );
        }
    }
}

#[test]
fn halving_the_spacing_barely_moves_populations() {
    let s = paper_scheme(0.05);
    let m = overlap_matrix(&s).unwrap();
    let coarse = default_grid(&s, 256);
    let fine = FrequencyGrid::new(coarse.omega_min, coarse.omega_max, 2 * coarse.n_points - 1).unwrap();
    let sol = solve_selective(&m, 1).unwrap();
    let pc = populations_of(&s, &sample_wavefunction(&s, &sol.coefficients, &coarse).unwrap()).unwrap();
    let pf = populations_of(&s, &sample_wavefunction(&s, &sol.coefficients, &fine).unwrap()).unwrap();
    for k in 0..4 {
        assert!(
            (pc[k] - pf[k]).abs() < 0.01 * pf[1],
            "f{}: {} vs {}",
            k + 1,
            pc[k],
            pf[k]
        );
    }
}

#[test]
fn symmetric_state_has_matching_mode_pairs() {
    let panel = &narrow_panels().panels[1];
    let psi = &panel.wavefunction;
    let scale = psi.amplitudes.iter().fold(0.0f64, |a, z| a.max(z.norm()));
    assert!(psi.transposition_asymmetry() < 1e-10 * scale);
    let sd = schmidt(psi);
    assert!(sd.orthonormality_error(4) < 1e-9);
    for i in 0..2 {
        let (a, b) = (sd.modes_1.column(i), sd.modes_2.column(i));
        let inner = a.dotc(&b).norm() * sd.spacing;
        assert!((inner - 1.0).abs() < 1e-6, "mode {i}: |<phi|psi>| = {inner}");
    }
}

#[test]
fn classical_pulse_population_uses_the_same_quadrature() {
    let data = narrow_panels();
    let panel = &data.panels[1];
    let direct = population_of(&data.scheme, 1, &panel.classical_pulse).unwrap();
    assert_eq!(direct, panel.classical[1]);
    assert!(panel.entangled_over_classical() > 1.0);
}
