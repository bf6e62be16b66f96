//! Configuration files, the dressed-system cache, run manifests and the
//! JSON/CSV writers behind the command-line tool.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dressed::{ConvergenceReport, DressedSystem, SystemParams, DEFAULT_MAX_DIMENSION};
use crate::error::{Error, Result};
use crate::experiments::{PanelDataset, ScenarioConfig, SweepResult, SweepSpec};
use crate::pulse::{FrequencyGrid, Peak};
use crate::response::LevelScheme;

/// Overrides the dressed-system cache location.
pub const CACHE_DIR_ENV: &str = "SELECTIVE_TPA_CACHE_DIR";

/// On-disk configuration. Every key is optional; omitted keys take the
/// built-in defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atom_frequencies: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cavity_frequency: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub couplings: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_dimension: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_f: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_e_ratio: Option<f64>,
    /// Final-state labels, `"f1"` to `"fN"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub targets: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec<f64>>,
}

/// `"f3"` (or `"F3"`, or `"3"`) to zero-based index 2.
pub fn parse_target(label: &str) -> Result<usize> {
    let digits = label.trim().trim_start_matches(['f', 'F']);
    match digits.parse::<usize>() {
        Ok(k) if k >= 1 => Ok(k - 1),
        _ => Err(Error::Config {
            field: "targets".into(),
            reason: format!("expected a final-state label like \"f1\", got {label:?}"),
        }),
    }
}

pub fn target_label(index: usize) -> String {
    format!("f{}", index + 1)
}

impl ConfigFile {
    /// Fills defaults and validates.
    pub fn resolve(&self) -> Result<ScenarioConfig<f64>> {
        let defaults = ScenarioConfig::<f64>::default();
        let sys = &defaults.system;
        let system = SystemParams {
            atom_frequencies: self
                .atom_frequencies
                .clone()
                .unwrap_or_else(|| sys.atom_frequencies.clone()),
            cavity_frequency: self.cavity_frequency.unwrap_or(sys.cavity_frequency),
            couplings: self.couplings.clone().unwrap_or_else(|| sys.couplings.clone()),
            n_max: self.n_max.unwrap_or(sys.n_max),
            max_dimension: self.max_dimension.unwrap_or(DEFAULT_MAX_DIMENSION),
        };
        let targets = match &self.targets {
            Some(labels) => labels.iter().map(|l| parse_target(l)).collect::<Result<Vec<_>>>()?,
            None => defaults.targets.clone(),
        };
        let config = ScenarioConfig {
            system,
            gamma_f: self.gamma_f.unwrap_or(defaults.gamma_f),
            gamma_e_ratio: self.gamma_e_ratio.unwrap_or(defaults.gamma_e_ratio),
            targets,
            grid_points: self.grid_points.unwrap_or(defaults.grid_points),
            omega_min: self.omega_min,
            omega_max: self.omega_max,
            sweep: self.sweep,
        };
        config.validate()?;
        Ok(config)
    }

    /// Fully populated file describing `config`.
    pub fn from_config(config: &ScenarioConfig<f64>) -> Self {
        Self {
            atom_frequencies: Some(config.system.atom_frequencies.clone()),
            cavity_frequency: Some(config.system.cavity_frequency),
            couplings: Some(config.system.couplings.clone()),
            n_max: Some(config.system.n_max),
            max_dimension: Some(config.system.max_dimension),
            gamma_f: Some(config.gamma_f),
            gamma_e_ratio: Some(config.gamma_e_ratio),
            targets: Some(config.targets.iter().map(|&t| target_label(t)).collect()),
            grid_points: Some(config.grid_points),
            omega_min: config.omega_min,
            omega_max: config.omega_max,
            sweep: config.sweep,
        }
    }
}

/// Parses and validates a JSON configuration document.
pub fn parse_config_str(text: &str) -> Result<ScenarioConfig<f64>> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: ConfigFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let field = if path == "." { "config".to_string() } else { path };
        Error::Config {
            field,
            reason: e.into_inner().to_string(),
        }
    })?;
    file.resolve()
}

pub fn parse_config(path: &Path) -> Result<ScenarioConfig<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config_str(&text)
}

/// Canonical JSON of the fully resolved configuration.
pub fn serialize_config(config: &ScenarioConfig<f64>) -> String {
    serde_json::to_string_pretty(&ConfigFile::from_config(config)).expect("config serializes")
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Content hash of the resolved configuration.
pub fn config_hash(config: &ScenarioConfig<f64>) -> String {
    sha256_hex(serialize_config(config).as_bytes())
}

/// Content hash of the Hamiltonian inputs, used as the cache key.
pub fn system_hash(params: &SystemParams<f64>) -> String {
    sha256_hex(serde_json::to_string(params).expect("params serialize").as_bytes())
}

/// Numerical tolerances in force for a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub manifold: f64,
    pub sign_convention: f64,
    pub convergence: f64,
    pub cholesky_pivot_floor: f64,
    pub positivity: f64,
    pub grid_spacing_per_width: f64,
    pub grid_edge_widths: f64,
    pub coverage_margin_widths: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            manifold: crate::dressed::MANIFOLD_TOLERANCE,
            sign_convention: crate::dressed::SIGN_CONVENTION_THRESHOLD,
            convergence: crate::dressed::CONVERGENCE_THRESHOLD,
            cholesky_pivot_floor: crate::selective::CHOLESKY_PIVOT_FLOOR,
            positivity: crate::selective::POSITIVITY_TOLERANCE,
            grid_spacing_per_width: crate::experiments::GRID_SPACING_PER_WIDTH,
            grid_edge_widths: crate::experiments::GRID_EDGE_WIDTHS,
            coverage_margin_widths: crate::pulse::COVERAGE_MARGIN_WIDTHS,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub system_hash: String,
    pub tool_version: String,
    pub timestamp: String,
    pub config: ConfigFile,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub grids: Vec<FrequencyGrid<f64>>,
    pub tolerances: Tolerances,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub convergence: Option<ConvergenceReport>,
    pub cache: CacheStatus,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub findings: Vec<String>,
    pub files: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, config: &ScenarioConfig<f64>, cache: CacheStatus) -> Self {
        Self {
            command: command.to_string(),
            config_hash: config_hash(config),
            system_hash: system_hash(&config.system),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: chrono::Utc::now().to_rfc3339(),
            config: ConfigFile::from_config(config),
            grids: Vec::new(),
            tolerances: Tolerances::default(),
            convergence: None,
            cache,
            findings: Vec::new(),
            files: Vec::new(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CacheStatus {
    Disabled,
    Hit,
    Miss,
}

/// Dressed-system cache: one JSON document per distinct `SystemParams`.
#[derive(Clone, Debug)]
pub struct DressedCache {
    pub dir: PathBuf,
}

impl DressedCache {
    /// Directory from the environment override, else a temp-dir default.
    pub fn from_env() -> Self {
        let dir = std::env::var_os(CACHE_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| std::env::temp_dir().join("tpa-select-cache"));
        Self { dir }
    }

    pub fn path_for(&self, params: &SystemParams<f64>) -> PathBuf {
        self.dir.join(format!("dressed-{}.json", system_hash(params)))
    }

    /// Cached system for `params`, if present and matching. Unreadable or
    /// stale entries are treated as misses.
    pub fn load(&self, params: &SystemParams<f64>) -> Option<DressedSystem<f64>> {
        let text = fs::read_to_string(self.path_for(params)).ok()?;
        let system: DressedSystem<f64> = serde_json::from_str(&text).ok()?;
        (system.params == *params).then_some(system)
    }

    pub fn store(&self, system: &DressedSystem<f64>) -> Result<()> {
        fs::create_dir_all(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
        let path = self.path_for(&system.params);
        let tmp = path.with_extension(format!("json.tmp{}", std::process::id()));
        fs::write(&tmp, serde_json::to_vec(system)?).map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))
    }

    /// Loads from the cache or diagonalizes and stores. A failed store is
    /// logged and otherwise ignored.
    pub fn load_or_build(&self, params: &SystemParams<f64>) -> Result<(DressedSystem<f64>, CacheStatus)> {
        if let Some(system) = self.load(params) {
            return Ok((system, CacheStatus::Hit));
        }
        let system = DressedSystem::new(params.clone())?;
        if let Err(e) = self.store(&system) {
            log::warn!("could not write dressed-system cache: {e}");
        }
        Ok((system, CacheStatus::Miss))
    }
}

/// Dressed system for `params`, through the cache unless disabled.
pub fn dressed_system(
    params: &SystemParams<f64>,
    cache: Option<&DressedCache>,
) -> Result<(DressedSystem<f64>, CacheStatus)> {
    match cache {
        Some(c) => c.load_or_build(params),
        None => Ok((DressedSystem::new(params.clone())?, CacheStatus::Disabled)),
    }
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

pub fn write_json<V: Serialize>(path: &Path, value: &V) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

fn finish(path: &Path, r: std::io::Result<()>) -> Result<()> {
    r.map_err(|e| Error::io(path, e))
}

/// Tracked eigenenergies and dipoles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelsReport {
    pub labels: Vec<String>,
    /// Absolute eigenenergies in units of the cavity frequency.
    pub energies: Vec<f64>,
    /// Expectation value of the excitation number, per tracked state.
    pub excitations: Vec<f64>,
    /// Row `r` holds `μ_{r s}` for every tracked `s`.
    pub dipoles: Vec<Vec<f64>>,
    pub signs: Vec<i8>,
    pub dimension: usize,
}

impl LevelsReport {
    pub fn new(system: &DressedSystem<f64>) -> Self {
        let tracked = system.assignment.tracked();
        let n = tracked.len();
        Self {
            labels: system.assignment.labels(),
            energies: system.tracked_energies(),
            excitations: tracked
                .iter()
                .map(|&i| system.spectrum.excitation_expectation(i))
                .collect(),
            dipoles: (0..n)
                .map(|r| (0..n).map(|s| system.dipoles.get(r, s)).collect())
                .collect(),
            signs: system.dipoles.signs.clone(),
            dimension: system.spectrum.dimension(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlapReport {
    pub gamma_f: f64,
    pub gamma_e: f64,
    pub labels: Vec<String>,
    /// Unnormalized `Σ_kk`.
    pub norms: Vec<f64>,
    /// `M_jk` as `[re, im]`.
    pub matrix: Vec<Vec<[f64; 2]>>,
}

impl OverlapReport {
    pub fn new(dataset: &PanelDataset<f64>) -> Self {
        let m = &dataset.overlaps;
        let n = m.dim();
        Self {
            gamma_f: dataset.gamma_f,
            gamma_e: dataset.gamma_e,
            labels: (0..n).map(target_label).collect(),
            norms: m.norms.clone(),
            matrix: (0..n)
                .map(|j| (0..n).map(|k| [m.get(j, k).re, m.get(j, k).im]).collect())
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionReport {
    pub target: String,
    pub gamma_f: f64,
    pub lambda: f64,
    pub coefficients: Vec<[f64; 2]>,
    pub populations: Vec<f64>,
    pub indistinctive_populations: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub pulse: Option<PulseReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseReport {
    pub quadrature_populations: Vec<f64>,
    pub classical_populations: Vec<f64>,
    pub schmidt_weights: Vec<f64>,
    pub schmidt_weight_sum: f64,
    pub schmidt_number: f64,
    pub entangled_over_classical: f64,
    pub peaks: Vec<Peak<f64>>,
    pub classical_peaks: Vec<Peak<f64>>,
}

const PEAK_LIMIT: usize = 8;
const PEAK_FLOOR: f64 = 0.01;

fn solution_reports(dataset: &PanelDataset<f64>, with_pulse: bool) -> Vec<SolutionReport> {
    dataset
        .panels
        .iter()
        .map(|p| SolutionReport {
            target: target_label(p.target),
            gamma_f: dataset.gamma_f,
            lambda: p.solution.lambda,
            coefficients: p.solution.coefficients.iter().map(|z| [z.re, z.im]).collect(),
            populations: p.entangled.clone(),
            indistinctive_populations: p.indistinctive.clone(),
            pulse: with_pulse.then(|| PulseReport {
                quadrature_populations: p.entangled_quadrature.clone(),
                classical_populations: p.classical.clone(),
                schmidt_weights: p.schmidt_weights.clone(),
                schmidt_weight_sum: p.schmidt_weight_sum,
                schmidt_number: p.schmidt_number,
                entangled_over_classical: p.entangled_over_classical(),
                peaks: p.wavefunction.peaks(PEAK_LIMIT, PEAK_FLOOR),
                classical_peaks: p.classical_pulse.peaks(PEAK_LIMIT, PEAK_FLOOR),
            }),
        })
        .collect()
}

/// `levels.json`. Returns the file names written.
pub fn write_levels(dir: &Path, system: &DressedSystem<f64>) -> Result<Vec<String>> {
    write_json(&dir.join("levels.json"), &LevelsReport::new(system))?;
    Ok(vec!["levels.json".into()])
}

pub fn write_level_scheme(dir: &Path, scheme: &LevelScheme<f64>) -> Result<Vec<String>> {
    write_json(&dir.join("level_scheme.json"), scheme)?;
    Ok(vec!["level_scheme.json".into()])
}

/// `overlaps.json` and `solution_f{k}.json`; with `with_pulse`, also the
/// gridded wavefunctions, classical pulses and `populations.csv`.
pub fn write_panels(dir: &Path, dataset: &PanelDataset<f64>, with_pulse: bool) -> Result<Vec<String>> {
    let mut files = Vec::new();
    write_json(&dir.join("overlaps.json"), &OverlapReport::new(dataset))?;
    files.push("overlaps.json".to_string());
    for (report, panel) in solution_reports(dataset, with_pulse).iter().zip(&dataset.panels) {
        let name = format!("solution_{}.json", report.target);
        write_json(&dir.join(&name), report)?;
        files.push(name);
        if with_pulse {
            let name = format!("wavefunction_{}.csv", report.target);
            let path = dir.join(&name);
            let mut w = create(&path)?;
            let title = format!(
                "selective optimal two-photon wavefunction, target {}, gamma_f = {}",
                report.target, dataset.gamma_f
            );
            finish(
                &path,
                panel.wavefunction.write_csv(&mut w, &title).and_then(|_| w.flush()),
            )?;
            files.push(name);

            let name = format!("classical_{}.csv", report.target);
            let path = dir.join(&name);
            let mut w = create(&path)?;
            let title = format!(
                "separable pulse from leading Schmidt pair, target {}, gamma_f = {}",
                report.target, dataset.gamma_f
            );
            finish(
                &path,
                panel.classical_pulse.write_csv(&mut w, &title).and_then(|_| w.flush()),
            )?;
            files.push(name);
        }
    }
    if with_pulse {
        let path = dir.join("populations.csv");
        let mut w = create(&path)?;
        finish(&path, write_populations_csv(&mut w, dataset).and_then(|_| w.flush()))?;
        files.push("populations.csv".into());
    }
    Ok(files)
}

/// One row per target: entangled (closed form and quadrature), classical
/// and indistinctive populations of every final state.
pub fn write_populations_csv<W: Write>(mut w: W, dataset: &PanelDataset<f64>) -> std::io::Result<()> {
    let n = dataset.scheme.n_f();
    writeln!(
        w,
        "# final-state populations per target, gamma_f = {}, gamma_e = {}",
        dataset.gamma_f, dataset.gamma_e
    )?;
    writeln!(w, "# entangled_*: closed form; quadrature_*: entangled pulse on the grid; classical_*: leading Schmidt pair on the grid;")?;
    writeln!(
        w,
        "# indistinctive_*: target response state alone; r1_sq: leading Schmidt weight squared"
    )?;
    let mut header = vec![
        "target".to_string(),
        "lambda".into(),
        "r1_sq".into(),
        "entangled_over_classical".into(),
    ];
    for prefix in ["entangled", "quadrature", "classical", "indistinctive"] {
        header.extend((0..n).map(|k| format!("{prefix}_{}", target_label(k))));
    }
    writeln!(w, "{}", header.join(","))?;
    for p in &dataset.panels {
        let mut row = vec![
            target_label(p.target),
            p.solution.lambda.to_string(),
            p.leading_weight_sq().to_string(),
            p.entangled_over_classical().to_string(),
        ];
        for v in [&p.entangled, &p.entangled_quadrature, &p.classical, &p.indistinctive] {
            row.extend(v.iter().map(|x| x.to_string()));
        }
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn write_sweep_csv<W: Write>(mut w: W, sweep: &SweepResult<f64>) -> std::io::Result<()> {
    writeln!(
        w,
        "# selectivity of {} against {} versus final-state linewidth",
        target_label(sweep.target),
        target_label(sweep.contrast)
    )?;
    writeln!(
        w,
        "# s_*: |p_a - p_b| / (p_a + p_b); ratio_*: s_* / s_indistinctive; grid_points = {}",
        sweep.grid_points
    )?;
    writeln!(
        w,
        "gamma_f,gamma_e,s_selective,s_classical,s_indistinctive,ratio_selective,ratio_classical,leading_weight_sq"
    )?;
    for p in &sweep.points {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            p.gamma_f,
            p.gamma_e,
            p.s_selective,
            p.s_classical,
            p.s_indistinctive,
            p.ratio_selective,
            p.ratio_classical,
            p.leading_weight_sq
        )?;
    }
    Ok(())
}

pub fn write_sweep(dir: &Path, sweep: &SweepResult<f64>) -> Result<Vec<String>> {
    let path = dir.join("sweep.csv");
    let mut w = create(&path)?;
    finish(&path, write_sweep_csv(&mut w, sweep).and_then(|_| w.flush()))?;
    Ok(vec!["sweep.csv".into()])
}

pub fn write_manifest(dir: &Path, manifest: &RunManifest) -> Result<()> {
    write_json(&dir.join("manifest.json"), manifest)
}

/// Machine-readable error report for standard error.
pub fn error_json(e: &Error) -> String {
    serde_json::json!({
        "error": e.kind(),
        "message": e.to_string(),
        "exit_code": e.exit_code(),
    })
    .to_string()
}
