use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use tpa_select::dressed::convergence_check;
use tpa_select::experiments::{run_optimal_panels, run_selectivity_sweep, SweepSpec};
use tpa_select::io::{
    self, dressed_system, parse_config, parse_target, target_label, write_level_scheme, write_levels, write_manifest,
    write_panels, write_sweep, DressedCache, RunManifest,
};
use tpa_select::{DressedSystem, Result, ScenarioConfig};

/// Optimal entangled and separable two-photon pulses for selective
/// excitation of cavity bipolaritons.
#[derive(Parser, Debug)]
#[command(name = "tpa-select", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// JSON configuration; omitted keys take the built-in defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Grid points per frequency axis.
    #[arg(long, global = true)]
    grid_points: Option<usize>,
    /// Always rediagonalize instead of using the dressed-system cache.
    #[arg(long, global = true)]
    no_cache: bool,
    /// Final state(s) to target, e.g. `--target f2`; repeatable.
    #[arg(long, global = true)]
    target: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Diagonalize the atom-cavity Hamiltonian; writes tracked energies and dipoles.
    Diagonalize,
    /// Write the spectroscopic level scheme at the configured linewidths.
    Levels,
    /// Solve for the selective optimum of each target.
    Optimize,
    /// Selective optimum plus Schmidt analysis and separable pulse.
    Classical,
    /// Selectivity of f2 against f3 over a linewidth range.
    Sweep,
    /// Rerun a pinned scenario.
    Reproduce {
        #[arg(value_enum)]
        figure: Figure,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Figure {
    /// Optimal and separable pulses at gamma_f = 0.01.
    Fig2,
    /// Same at gamma_f = 0.1.
    Fig3,
    /// Selectivity sweep over gamma_f in [0.01, 0.10].
    Fig4,
}

fn load_config(common: &Common) -> Result<ScenarioConfig> {
    let mut config = match &common.config {
        Some(path) => parse_config(path)?,
        None => ScenarioConfig::default(),
    };
    if let Some(n) = common.grid_points {
        config.grid_points = n;
    }
    if !common.target.is_empty() {
        config.targets = common.target.iter().map(|t| parse_target(t)).collect::<Result<_>>()?;
    }
    config.validate()?;
    Ok(config)
}

struct Run<'a> {
    common: &'a Common,
    config: ScenarioConfig,
    system: DressedSystem,
    manifest: RunManifest,
}

impl<'a> Run<'a> {
    fn start(name: &str, common: &'a Common, config: ScenarioConfig) -> Result<Self> {
        let cache = (!common.no_cache).then(DressedCache::from_env);
        let (system, status) = dressed_system(&config.system, cache.as_ref())?;
        let manifest = RunManifest::new(name, &config, status);
        Ok(Self {
            common,
            config,
            system,
            manifest,
        })
    }

    fn out(&self) -> &Path {
        &self.common.out
    }

    fn finish(mut self) -> Result<()> {
        self.manifest.files.push("manifest.json".into());
        write_manifest(self.out(), &self.manifest)?;
        println!("wrote {} files to {}", self.manifest.files.len(), self.out().display());
        Ok(())
    }
}

fn diagonalize(run: &mut Run) -> Result<()> {
    let report = convergence_check(&run.config.system)?;
    let levels = io::LevelsReport::new(&run.system);
    for (label, e) in levels.labels.iter().zip(&levels.energies) {
        println!("{label:>3}  {e:.6}");
    }
    println!(
        "truncation n_max = {}: drift {:.2e} against n_max = {} ({})",
        report.n_max,
        report.max_drift,
        report.reference_n_max,
        if report.passed { "converged" } else { "NOT converged" }
    );
    run.manifest.convergence = Some(report);
    let files = write_levels(run.out(), &run.system)?;
    run.manifest.files.extend(files);
    Ok(())
}

fn levels(run: &mut Run) -> Result<()> {
    let scheme = run.system.level_scheme(run.config.gamma_e(), run.config.gamma_f)?;
    let mut files = write_levels(run.out(), &run.system)?;
    files.extend(write_level_scheme(run.out(), &scheme)?);
    run.manifest.files.extend(files);
    Ok(())
}

fn panels(run: &mut Run, with_pulse: bool) -> Result<()> {
    let dataset = run_optimal_panels(&run.config, &run.system)?;
    for p in &dataset.panels {
        let t = p.target;
        if with_pulse {
            println!(
                "{}: lambda {:.6}  p_target {:.6}  classical {:.6}  ratio {:.4}  r1^2 {:.4}",
                target_label(t),
                p.solution.lambda,
                p.entangled[t],
                p.classical[t],
                p.entangled_over_classical(),
                p.leading_weight_sq()
            );
        } else {
            println!(
                "{}: lambda {:.6}  p_target {:.6}",
                target_label(t),
                p.solution.lambda,
                p.entangled[t]
            );
        }
    }
    run.manifest.grids.push(dataset.grid);
    let mut files = write_levels(run.out(), &run.system)?;
    files.extend(write_panels(run.out(), &dataset, with_pulse)?);
    run.manifest.files.extend(files);
    Ok(())
}

fn sweep(run: &mut Run) -> Result<()> {
    if run.config.sweep.is_none() {
        run.config.sweep = Some(SweepSpec::default_range());
        run.manifest.config = io::ConfigFile::from_config(&run.config);
        run.manifest.config_hash = io::config_hash(&run.config);
    }
    let result = run_selectivity_sweep(&run.config, &run.system)?;
    println!("gamma_f   S_sel     S_cl      S_ind     ratio");
    for p in &result.points {
        println!(
            "{:.4}    {:.5}   {:.5}   {:.5}   {:.3}",
            p.gamma_f, p.s_selective, p.s_classical, p.s_indistinctive, p.ratio_selective
        );
    }
    for f in &result.findings {
        println!("finding: {f}");
    }
    run.manifest.findings = result.findings.clone();
    let files = write_sweep(run.out(), &result)?;
    run.manifest.files.extend(files);
    Ok(())
}

fn execute(cli: &Cli) -> Result<()> {
    let mut config = load_config(&cli.common)?;
    let name = match &cli.command {
        Command::Diagonalize => "diagonalize".to_string(),
        Command::Levels => "levels".to_string(),
        Command::Optimize => "optimize".to_string(),
        Command::Classical => "classical".to_string(),
        Command::Sweep => "sweep".to_string(),
        Command::Reproduce { figure } => {
            match figure {
                Figure::Fig2 => config.gamma_f = 0.01,
                Figure::Fig3 => config.gamma_f = 0.1,
                Figure::Fig4 => config.sweep = Some(SweepSpec::default_range()),
            }
            config.validate()?;
            format!("reproduce {figure:?}").to_lowercase()
        }
    };
    let mut run = Run::start(&name, &cli.common, config)?;
    match &cli.command {
        Command::Diagonalize => diagonalize(&mut run)?,
        Command::Levels => levels(&mut run)?,
        Command::Optimize => panels(&mut run, false)?,
        Command::Classical => panels(&mut run, true)?,
        Command::Sweep => sweep(&mut run)?,
        Command::Reproduce { figure } => match figure {
            Figure::Fig2 | Figure::Fig3 => panels(&mut run, true)?,
            Figure::Fig4 => sweep(&mut run)?,
        },
    }
    run.finish()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", io::error_json(&e));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
