use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use pidoc_core::harness::{
    emit_plot_data_from_dir, run_one, run_sweep, ConfigOverrides, Profile, SweepKind, SweepSpec, SweepValue,
    TablePreset, DESK_MAX_ITERS, TABLE_FILE,
};
use pidoc_core::{ExperimentConfig, LambdaMode, RunRecord};

/// Train a network to steer the van der Pol oscillator onto a sinusoid.
#[derive(Parser)]
#[command(name = "pidoc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one configuration.
    Run(Common),
    /// Train a preset or custom sweep and write `table.csv`.
    Sweep {
        #[arg(long)]
        kind: SweepKind,
        /// Custom sweep value; repeat for several. Defaults to the preset.
        #[arg(long = "value")]
        values: Vec<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Write the `figdata/` bundle for a run or sweep directory.
    Plotdata {
        #[arg(long)]
        from: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    /// Flat key-value config file; every key can also be set by flag.
    #[arg(long)]
    config: PathBuf,
    /// `desk` caps the optimizer at 5000 iterations.
    #[arg(long)]
    profile: Option<Profile>,
    #[arg(long)]
    seed: Option<u64>,
    /// Run sweep cells one at a time so wall times are comparable. Single runs are always serial.
    #[arg(long)]
    serial: bool,
    #[command(flatten)]
    overrides: OverrideArgs,
}

#[derive(Args)]
struct OverrideArgs {
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    x0: Option<f64>,
    #[arg(long)]
    v0: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    n_points: Option<usize>,
    #[arg(long)]
    rtol: Option<f64>,
    #[arg(long)]
    atol: Option<f64>,
    #[arg(long)]
    amplitude: Option<f64>,
    /// A non-negative number or `inf`.
    #[arg(long)]
    lambda: Option<LambdaMode>,
    /// `DEPTHxWIDTH` or a comma-separated size list such as `1,30,30,1`.
    #[arg(long)]
    layers: Option<String>,
    #[arg(long)]
    memory: Option<usize>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    grad_tol: Option<f64>,
    #[arg(long)]
    f_rel_tol: Option<f64>,
    #[arg(long)]
    wolfe_c1: Option<f64>,
    #[arg(long)]
    wolfe_c2: Option<f64>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

impl Common {
    fn overrides(&self) -> Result<ConfigOverrides> {
        let file = ConfigOverrides::from_file(&self.config)?;
        let o = &self.overrides;
        let flags = ConfigOverrides {
            mu: o.mu,
            x0: o.x0,
            v0: o.v0,
            t_end: o.t_end,
            n_points: o.n_points,
            rtol: o.rtol,
            atol: o.atol,
            amplitude: o.amplitude,
            lambda: o.lambda,
            layers: o.layers.clone(),
            seed: self.seed,
            profile: self.profile,
            memory: o.memory,
            max_iters: o.max_iters,
            grad_tol: o.grad_tol,
            f_rel_tol: o.f_rel_tol,
            wolfe_c1: o.wolfe_c1,
            wolfe_c2: o.wolfe_c2,
            output_dir: o.output_dir.clone(),
        };
        Ok(file.merge(flags))
    }
}

fn warn_desk(cfg: &ExperimentConfig) {
    if cfg.profile == Profile::Desk && cfg.optimizer.max_iters > DESK_MAX_ITERS {
        eprintln!(
            "warning: desk profile caps the optimizer at {DESK_MAX_ITERS} iterations; \
             wall-clock columns are not comparable to full-budget runs"
        );
    }
}

fn print_record(dir: &Path, rec: &RunRecord) {
    let s = &rec.summary;
    println!("{}", dir.display());
    println!("  iterations    {} ({:?})", s.iterations, s.termination);
    println!("  final loss    {:.6e}", s.final_loss.total);
    println!("  abs mean err  {:.6e}", s.abs_mean_err);
    println!("  mean loss     {:.6e}", s.mean_loss);
    println!("  wall time     {:.2} s", rec.timing.wall_time);
}

fn run(common: &Common) -> Result<()> {
    let cfg = common.overrides()?.build()?;
    warn_desk(&cfg);
    let rec = run_one(&cfg).with_context(|| format!("run failed; see {}", cfg.output_dir.display()))?;
    print_record(&cfg.output_dir, &rec);
    Ok(())
}

fn sweep(kind: SweepKind, values: &[String], common: &Common) -> Result<()> {
    let overrides = common.overrides()?;
    let mut base = overrides.build()?;
    if overrides.output_dir.is_none() {
        base.output_dir = PathBuf::from("runs").join(kind.to_string());
    }
    warn_desk(&base);
    let mut spec = if values.is_empty() {
        TablePreset::for_kind(kind, &base).sweep(base)
    } else {
        let parsed = values
            .iter()
            .map(|v| SweepValue::parse(kind, v))
            .collect::<pidoc_core::Result<Vec<_>>>()?;
        SweepSpec::new(kind, parsed, base)?
    };
    spec.serial = common.serial;
    let outcome = run_sweep(&spec)?;
    let root = &spec.base.output_dir;
    print!("{}", std::fs::read_to_string(root.join(TABLE_FILE))?);
    let failed: Vec<_> = outcome.meta.cells.iter().filter(|c| c.error.is_some()).collect();
    for cell in &failed {
        eprintln!(
            "cell {} failed: {}",
            cell.value.label(),
            cell.error.as_deref().unwrap_or_default()
        );
    }
    if failed.len() == outcome.meta.cells.len() {
        bail!("every cell failed");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(common) => run(common),
        Command::Sweep { kind, values, common } => sweep(*kind, values, common),
        Command::Plotdata { from } => emit_plot_data_from_dir(from).map_err(Into::into).map(|files| {
            for f in files {
                println!("{}", f.display());
            }
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
