//! Thin command-line front end; all logic lives in the library's
//! `runner` module.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use zigzag_mc::runner::{
    self, Experiment, FigureKind, RawConfig, RunnerError,
};

#[derive(Parser)]
#[command(
    name = "zigzag-mc",
    about = "Hamiltonian and Markovian zigzag samplers for (truncated) Gaussian targets",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the two-sampler duel and report relative ESS per event.
    Duel(CommonArgs),
    /// Estimate coupled-path divergence probabilities over a dt grid.
    Couple {
        #[command(flatten)]
        common: CommonArgs,
        /// Refreshment intervals as multiples of nu_min^{-1/2}(Phi).
        #[arg(long, value_delimiter = ',')]
        grid_rel: Option<Vec<f64>>,
        /// Horizon as a multiple of nu_min^{-1/2}(Phi).
        #[arg(long)]
        horizon_rel: Option<f64>,
    },
    /// Emit plot data for one of the diagnostic figures.
    Figure {
        /// Which figure's data to produce.
        #[arg(value_enum)]
        kind: FigureArg,
        #[command(flatten)]
        common: CommonArgs,
        /// Velocity-switch events to record per sampler.
        #[arg(long)]
        segments: Option<u64>,
        /// Starting position, broadcast to every coordinate.
        #[arg(long)]
        x0: Option<f64>,
    },
    /// Report nu_min(Phi) and the derived base integration time.
    Eigen(CommonArgs),
    /// Run one sampler and write samples plus diagnostics.
    Sample(CommonArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FigureArg {
    Trajectory,
    #[value(name = "sq-distance")]
    SqDistance,
    Traceplot,
}

impl From<FigureArg> for FigureKind {
    fn from(value: FigureArg) -> Self {
        match value {
            FigureArg::Trajectory => FigureKind::Trajectory,
            FigureArg::SqDistance => FigureKind::SqDistance,
            FigureArg::Traceplot => FigureKind::Traceplot,
        }
    }
}

#[derive(Args)]
struct CommonArgs {
    /// TOML configuration file; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Root seed for all RNG streams.
    #[arg(long)]
    seed: Option<u64>,
    /// Independent replicates.
    #[arg(long)]
    replicates: Option<u64>,
    /// Output directory for CSV files.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Target family: compound-symmetric, ar1, or file.
    #[arg(long)]
    family: Option<String>,
    /// Target dimension (synthetic families).
    #[arg(long)]
    dim: Option<usize>,
    /// Target correlation (synthetic families).
    #[arg(long)]
    rho: Option<f64>,
    /// Orthant: none, positive, or explicit tokens like "+1 -1 *".
    #[arg(long)]
    orthant: Option<String>,
    /// Target file (family = file).
    #[arg(long)]
    target_file: Option<PathBuf>,
    /// Sampler: zigzag-nuts, hzz-fixed-t, or markovian.
    #[arg(long)]
    sampler: Option<String>,
    /// Samples / transitions to draw.
    #[arg(long)]
    samples: Option<u64>,
    /// Relative base integration time for NUTS and Markovian spacing.
    #[arg(long)]
    t_rel: Option<f64>,
    /// Relative integration time for the fixed-T Hamiltonian sampler.
    #[arg(long)]
    fixed_t_rel: Option<f64>,
    /// NUTS doubling cap.
    #[arg(long)]
    max_depth: Option<u32>,
    /// Fraction of samples discarded as burn-in.
    #[arg(long)]
    burn_in: Option<f64>,
    /// Cap on the event-matched Markovian arm's sample count.
    #[arg(long)]
    markovian_max_samples: Option<u64>,
}

impl CommonArgs {
    fn experiment(&self) -> Result<Experiment, RunnerError> {
        let mut raw = match &self.config {
            Some(path) => RawConfig::from_file(path)?,
            None => RawConfig::default(),
        };
        if self.family.is_some() {
            raw.target.family = self.family.clone();
        }
        if self.dim.is_some() {
            raw.target.dim = self.dim;
        }
        if self.rho.is_some() {
            raw.target.rho = self.rho;
        }
        if self.orthant.is_some() {
            raw.target.orthant = self.orthant.clone();
        }
        if let Some(path) = &self.target_file {
            raw.target.family = Some("file".into());
            raw.target.path = Some(path.clone());
        }
        if self.sampler.is_some() {
            raw.run.sampler = self.sampler.clone();
        }
        if self.samples.is_some() {
            raw.run.samples = self.samples;
        }
        if self.t_rel.is_some() {
            raw.run.t_rel = self.t_rel;
        }
        if self.fixed_t_rel.is_some() {
            raw.run.fixed_t_rel = self.fixed_t_rel;
        }
        if self.max_depth.is_some() {
            raw.run.max_depth = self.max_depth;
        }
        if self.burn_in.is_some() {
            raw.run.burn_in = self.burn_in;
        }
        if self.markovian_max_samples.is_some() {
            raw.run.markovian_max_samples = self.markovian_max_samples;
        }
        if self.seed.is_some() {
            raw.run.seed = self.seed;
        }
        if self.replicates.is_some() {
            raw.run.replicates = self.replicates;
        }
        if self.out_dir.is_some() {
            raw.run.out_dir = self.out_dir.clone();
        }
        Ok(Experiment::resolve(raw)?)
    }
}

fn run() -> Result<(), RunnerError> {
    match Cli::parse().command {
        Command::Duel(common) => {
            let exp = common.experiment()?;
            let summaries = runner::run_duel(&exp)?;
            println!("duel complete; outputs in {}", exp.out_dir.display());
            for s in summaries {
                println!(
                    "  {}: relative ESS/event (zigzag-nuts vs markovian) = {:.3}",
                    s.series, s.relative
                );
            }
        }
        Command::Couple {
            common,
            grid_rel,
            horizon_rel,
        } => {
            let mut exp = common.experiment()?;
            if let Some(grid) = grid_rel {
                exp.coupling_grid_rel = grid;
            }
            if let Some(h) = horizon_rel {
                exp.coupling_horizon_rel = h;
            }
            if let Some(r) = common.replicates {
                exp.coupling_replicates = r;
            }
            let rows = runner::run_coupling(&exp)?;
            println!("coupling study complete; outputs in {}", exp.out_dir.display());
            for row in rows {
                println!(
                    "  dt = {:.6}: {}/{} diverged (p = {:.4} +- {:.4})",
                    row.delta_t, row.n_diverged, row.replicates, row.p_hat, row.std_err
                );
            }
        }
        Command::Figure {
            kind,
            common,
            segments,
            x0,
        } => {
            let mut exp = common.experiment()?;
            if let Some(s) = segments {
                exp.figure_segments = s;
            }
            if x0.is_some() {
                exp.figure_x0 = x0;
            }
            let path = runner::run_figure(&exp, kind.into())?;
            println!("figure data written to {}", path.display());
        }
        Command::Eigen(common) => {
            let exp = common.experiment()?;
            let est = runner::run_eigen(&exp)?;
            println!(
                "nu_min = {:.9e} ({} matvecs, converged = {}); delta_t = {:.9e}",
                est.nu_min,
                est.iterations_used,
                est.converged,
                est.nu_min.powf(-0.5) * exp.t_rel
            );
        }
        Command::Sample(common) => {
            let exp = common.experiment()?;
            let chain = runner::run_sample(&exp)?;
            println!(
                "{}: {} samples, {} events, {:.2}s; outputs in {}",
                chain.sampler,
                chain.n_samples(),
                chain.total_events(),
                chain.wall_seconds,
                exp.out_dir.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}
