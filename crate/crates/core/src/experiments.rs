//! Scenario runs: optimal pulses for every target at one linewidth, and
//! the selectivity sweep over linewidths.

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dressed::{DressedSystem, SystemParams};
use crate::error::{Error, Result};
use crate::pulse::{
    classical_pulse, population_of, populations_of, sample_wavefunction, schmidt, FrequencyGrid, GriddedWavefunction,
};
use crate::response::{overlap_matrix, LevelScheme, OverlapMatrix};
use crate::scalar::Real;
use crate::selective::{indistinctive_populations, selectivity, solve_selective, SelectiveSolution};

pub const DEFAULT_GAMMA_F: f64 = 0.01;
pub const DEFAULT_GAMMA_E_RATIO: f64 = 0.5;
pub const DEFAULT_GRID_POINTS: usize = 512;

/// Grid spacing in units of the narrowest linewidth.
pub const GRID_SPACING_PER_WIDTH: f64 = 0.8;

/// Minimum distance between the outermost resonances and the grid edge, in
/// units of the broadest linewidth.
pub const GRID_EDGE_WIDTHS: f64 = 20.0;

/// Number of Schmidt weights kept in panel summaries.
pub const REPORTED_SCHMIDT_WEIGHTS: usize = 16;

/// Target and contrast pair of the selectivity sweep (`f2` against `f3`).
pub const SWEEP_TARGET: usize = 1;
pub const SWEEP_CONTRAST: usize = 2;

/// Linewidth sweep `min, min + step, ..., max`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", deny_unknown_fields)]
pub struct SweepSpec<T: Real> {
    pub min: T,
    pub max: T,
    pub step: T,
}

impl<T: Real> SweepSpec<T> {
    pub fn default_range() -> Self {
        Self {
            min: T::lit(0.01),
            max: T::lit(0.10),
            step: T::lit(0.005),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |x: T| x.is_finite() && x > T::zero();
        if !(ok(self.min) && ok(self.max) && ok(self.step)) {
            return Err(Error::invalid("sweep", "min, max and step must be finite and positive"));
        }
        if self.max < self.min {
            return Err(Error::invalid("sweep", "max must not be below min"));
        }
        Ok(())
    }

    /// Sample points; `max` is included when it lies on the step lattice
    /// up to rounding.
    pub fn values(&self) -> Vec<T> {
        let span = ((self.max - self.min) / self.step).as_f64();
        let count = (span + 1e-9).floor() as usize + 1;
        (0..count).map(|i| self.min + self.step * T::lit(i as f64)).collect()
    }
}

/// Everything needed to run a scenario.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig<T: Real> {
    pub system: SystemParams<T>,
    pub gamma_f: T,
    /// `γ_e = gamma_e_ratio · γ_f`.
    pub gamma_e_ratio: T,
    /// Zero-based final-state indices.
    pub targets: Vec<usize>,
    pub grid_points: usize,
    pub omega_min: Option<T>,
    pub omega_max: Option<T>,
    pub sweep: Option<SweepSpec<T>>,
}

impl<T: Real> Default for ScenarioConfig<T> {
    fn default() -> Self {
        Self {
            system: SystemParams::paper_defaults(),
            gamma_f: T::lit(DEFAULT_GAMMA_F),
            gamma_e_ratio: T::lit(DEFAULT_GAMMA_E_RATIO),
            targets: vec![0, 1, 2, 3],
            grid_points: DEFAULT_GRID_POINTS,
            omega_min: None,
            omega_max: None,
            sweep: None,
        }
    }
}

impl<T: Real> ScenarioConfig<T> {
    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        let positive = |field: &str, x: T| {
            if x.is_finite() && x > T::zero() {
                Ok(())
            } else {
                Err(Error::invalid(field, format!("must be finite and positive, got {x}")))
            }
        };
        positive("gamma_f", self.gamma_f)?;
        positive("gamma_e_ratio", self.gamma_e_ratio)?;
        if self.targets.is_empty() {
            return Err(Error::invalid("targets", "at least one target is required"));
        }
        if self.grid_points < crate::pulse::MIN_GRID_POINTS {
            return Err(Error::invalid(
                "grid_points",
                format!(
                    "need at least {}, got {}",
                    crate::pulse::MIN_GRID_POINTS,
                    self.grid_points
                ),
            ));
        }
        match (self.omega_min, self.omega_max) {
            (Some(lo), Some(hi)) if !(lo.is_finite() && hi.is_finite() && hi > lo) => {
                return Err(Error::invalid("omega_max", "must exceed omega_min"));
            }
            (Some(_), None) | (None, Some(_)) => {
                return Err(Error::invalid(
                    "omega_min",
                    "omega_min and omega_max must be given together",
                ));
            }
            _ => {}
        }
        if let Some(s) = &self.sweep {
            s.validate()?;
        }
        Ok(())
    }

    pub fn gamma_e(&self) -> T {
        self.gamma_f * self.gamma_e_ratio
    }

    pub fn with_gamma_f(&self, gamma_f: T) -> Self {
        Self {
            gamma_f,
            ..self.clone()
        }
    }

    /// Explicit window if configured, otherwise [`default_grid`].
    pub fn grid_for(&self, scheme: &LevelScheme<T>) -> Result<FrequencyGrid<T>> {
        match (self.omega_min, self.omega_max) {
            (Some(lo), Some(hi)) => FrequencyGrid::new(lo, hi, self.grid_points),
            _ => Ok(default_grid(scheme, self.grid_points)),
        }
    }

    fn check_targets(&self, n_f: usize) -> Result<()> {
        match self.targets.iter().find(|&&t| t >= n_f) {
            Some(&t) => Err(Error::Config {
                field: "targets".into(),
                reason: format!("f{} requested but the system has {n_f} final levels", t + 1),
            }),
            None => Ok(()),
        }
    }
}

/// Grid for a scheme: spacing `0.8 × min γ`, centred on the resonance span,
/// and at least `20 × max γ` of margin beyond the outermost resonance.
///
/// The window is not clipped at zero frequency: the response states are
/// defined over the whole real line, and clipping truncates their tails.
pub fn default_grid<T: Real>(scheme: &LevelScheme<T>, n_points: usize) -> FrequencyGrid<T> {
    let n_points = n_points.max(crate::pulse::MIN_GRID_POINTS);
    let res = scheme.resonances();
    let lo = res.iter().fold(res[0].1, |a, (_, w)| a.min(*w));
    let hi = res.iter().fold(res[0].1, |a, (_, w)| a.max(*w));
    let span = hi - lo;
    let width = T::lit((n_points - 1) as f64 * GRID_SPACING_PER_WIDTH) * scheme.min_width();
    let margin = ((width - span) * T::lit(0.5)).max(T::lit(GRID_EDGE_WIDTHS) * scheme.max_width());
    FrequencyGrid {
        omega_min: lo - margin,
        omega_max: hi + margin,
        n_points,
    }
}

/// Optimal pulse for one target, its separable approximation and what both
/// excite.
#[derive(Clone, Debug)]
pub struct Panel<T: Real> {
    pub target: usize,
    pub solution: SelectiveSolution<T>,
    /// Closed-form populations of the entangled optimum.
    pub entangled: Vec<T>,
    /// Same populations, by quadrature of the gridded wavefunction.
    pub entangled_quadrature: Vec<T>,
    pub classical: Vec<T>,
    /// Populations reached by the target's own response state.
    pub indistinctive: Vec<T>,
    /// Leading Schmidt weights `r_j`.
    pub schmidt_weights: Vec<T>,
    pub schmidt_weight_sum: T,
    pub schmidt_number: T,
    pub wavefunction: GriddedWavefunction<T>,
    pub classical_pulse: GriddedWavefunction<T>,
}

impl<T: Real> Panel<T> {
    pub fn leading_weight_sq(&self) -> T {
        self.schmidt_weights.first().map_or(T::zero(), |&r| r * r)
    }

    /// Target population of the entangled pulse over that of the
    /// separable one.
    pub fn entangled_over_classical(&self) -> T {
        self.entangled[self.target] / self.classical[self.target]
    }
}

/// Results for every requested target at one linewidth.
#[derive(Clone, Debug)]
pub struct PanelDataset<T: Real> {
    pub gamma_f: T,
    pub gamma_e: T,
    pub scheme: LevelScheme<T>,
    pub overlaps: OverlapMatrix<T>,
    pub grid: FrequencyGrid<T>,
    pub panels: Vec<Panel<T>>,
}

fn panel<T: Real>(
    scheme: &LevelScheme<T>,
    overlaps: &OverlapMatrix<T>,
    grid: &FrequencyGrid<T>,
    target: usize,
) -> Result<Panel<T>> {
    let solution = solve_selective(overlaps, target)?;
    let wavefunction = sample_wavefunction(scheme, &solution.coefficients, grid)?;
    let entangled_quadrature = populations_of(scheme, &wavefunction)?;
    let sd = schmidt(&wavefunction);
    let classical_pulse = classical_pulse(&sd, grid)?;
    let classical = populations_of(scheme, &classical_pulse)?;
    Ok(Panel {
        target,
        entangled: solution.populations.clone(),
        indistinctive: indistinctive_populations(overlaps, target)?,
        solution,
        entangled_quadrature,
        classical,
        schmidt_weights: sd.weights.iter().take(REPORTED_SCHMIDT_WEIGHTS).copied().collect(),
        schmidt_weight_sum: sd.weight_sum(),
        schmidt_number: sd.schmidt_number(),
        wavefunction,
        classical_pulse,
    })
}

/// Selective optimum, gridded wavefunction, Schmidt analysis and separable
/// pulse for every configured target at the configured linewidth.
pub fn run_optimal_panels<T: Real>(config: &ScenarioConfig<T>, system: &DressedSystem<T>) -> Result<PanelDataset<T>> {
    config.validate()?;
    let scheme = system.level_scheme(config.gamma_e(), config.gamma_f)?;
    config.check_targets(scheme.n_f())?;
    let overlaps = overlap_matrix(&scheme)?;
    let grid = config.grid_for(&scheme)?;
    grid.check_coverage(&scheme)?;
    info!(
        "panels at gamma_f = {}: grid [{}, {}] x {}",
        config.gamma_f, grid.omega_min, grid.omega_max, grid.n_points
    );
    let panels = config
        .targets
        .par_iter()
        .map(|&t| panel(&scheme, &overlaps, &grid, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(PanelDataset {
        gamma_f: config.gamma_f,
        gamma_e: config.gamma_e(),
        scheme,
        overlaps,
        grid,
        panels,
    })
}

/// Selectivities at one linewidth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SweepPoint<T: Real> {
    pub gamma_f: T,
    pub gamma_e: T,
    pub s_selective: T,
    pub s_classical: T,
    pub s_indistinctive: T,
    pub ratio_selective: T,
    pub ratio_classical: T,
    /// Leading Schmidt weight squared of the selective optimum.
    pub leading_weight_sq: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SweepResult<T: Real> {
    pub target: usize,
    pub contrast: usize,
    pub grid_points: usize,
    pub points: Vec<SweepPoint<T>>,
    /// Empirical violations of expected behaviour, one line each.
    pub findings: Vec<String>,
}

fn strictly_decreasing<T: Real>(v: &[T]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

fn strictly_increasing<T: Real>(v: &[T]) -> bool {
    v.windows(2).all(|w| w[1] > w[0])
}

impl<T: Real> SweepResult<T> {
    pub fn gammas(&self) -> Vec<T> {
        self.points.iter().map(|p| p.gamma_f).collect()
    }

    pub fn column(&self, f: impl Fn(&SweepPoint<T>) -> T) -> Vec<T> {
        self.points.iter().map(f).collect()
    }

    pub fn selective_decreasing(&self) -> bool {
        strictly_decreasing(&self.column(|p| p.s_selective))
    }

    pub fn classical_decreasing(&self) -> bool {
        strictly_decreasing(&self.column(|p| p.s_classical))
    }

    pub fn indistinctive_decreasing(&self) -> bool {
        strictly_decreasing(&self.column(|p| p.s_indistinctive))
    }

    pub fn ratio_increasing(&self) -> bool {
        strictly_increasing(&self.column(|p| p.ratio_selective))
    }
}

fn sweep_point<T: Real>(config: &ScenarioConfig<T>, system: &DressedSystem<T>, gamma_f: T) -> Result<SweepPoint<T>> {
    let gamma_e = gamma_f * config.gamma_e_ratio;
    let scheme = system.level_scheme(gamma_e, gamma_f)?;
    let m = overlap_matrix(&scheme)?;
    let (t, c) = (SWEEP_TARGET, SWEEP_CONTRAST);
    let sol = solve_selective(&m, t)?;
    let s_selective = selectivity(&sol.populations, t, c)?;
    let s_indistinctive = selectivity(&indistinctive_populations(&m, t)?, t, c)?;

    // Explicit windows are tied to one linewidth; the sweep always adapts.
    let grid = default_grid(&scheme, config.grid_points);
    let psi = sample_wavefunction(&scheme, &sol.coefficients, &grid)?;
    let sd = schmidt(&psi);
    let pulse = classical_pulse(&sd, &grid)?;
    let p_t = population_of(&scheme, t, &pulse)?;
    let p_c = population_of(&scheme, c, &pulse)?;
    let mut pair = vec![T::zero(); scheme.n_f()];
    pair[t] = p_t;
    pair[c] = p_c;
    let s_classical = selectivity(&pair, t, c)?;

    Ok(SweepPoint {
        gamma_f,
        gamma_e,
        s_selective,
        s_classical,
        s_indistinctive,
        ratio_selective: s_selective / s_indistinctive,
        ratio_classical: s_classical / s_indistinctive,
        leading_weight_sq: sd.weights[0] * sd.weights[0],
    })
}

/// Selectivity of `f2` against `f3` for the selective optimum, its
/// separable approximation and the indistinctive optimum, at every sweep
/// linewidth. Points run in parallel; output order follows the sweep.
pub fn run_selectivity_sweep<T: Real>(config: &ScenarioConfig<T>, system: &DressedSystem<T>) -> Result<SweepResult<T>> {
    config.validate()?;
    let spec = config.sweep.ok_or_else(|| Error::Config {
        field: "sweep".into(),
        reason: "sweep bounds are required".into(),
    })?;
    let n_f = system.assignment.n_final();
    if n_f <= SWEEP_CONTRAST {
        return Err(Error::IndexOutOfRange {
            what: "final levels",
            index: SWEEP_CONTRAST,
            len: n_f,
        });
    }
    let gammas = spec.values();
    info!(
        "sweep over {} linewidths, {} grid points",
        gammas.len(),
        config.grid_points
    );
    let points = gammas
        .par_iter()
        .map(|&g| sweep_point(config, system, g))
        .collect::<Result<Vec<_>>>()?;

    let mut result = SweepResult {
        target: SWEEP_TARGET,
        contrast: SWEEP_CONTRAST,
        grid_points: config.grid_points,
        points,
        findings: Vec::new(),
    };
    for p in &result.points {
        if p.ratio_selective < T::one() {
            result.findings.push(format!(
                "selective optimum less selective than indistinctive at gamma_f = {}: ratio {}",
                p.gamma_f, p.ratio_selective
            ));
        }
    }
    let checks = [
        (
            result.selective_decreasing(),
            "selective selectivity is not monotonically decreasing",
        ),
        (
            result.classical_decreasing(),
            "classical selectivity is not monotonically decreasing",
        ),
        (
            result.indistinctive_decreasing(),
            "indistinctive selectivity is not monotonically decreasing",
        ),
        (
            result.ratio_increasing(),
            "selective/indistinctive ratio is not monotonically increasing",
        ),
    ];
    for (ok, msg) in checks {
        if !ok {
            result.findings.push(msg.to_string());
        }
    }
    for f in &result.findings {
        warn!("{f}");
    }
    Ok(result)
}
