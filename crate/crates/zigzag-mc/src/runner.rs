//! Experiment runner: configuration, seeding, sampler duels, the coupling
//! study, and figure-data emission.
//!
//! All randomness flows from one root seed through counter-split streams,
//! and every output is CSV with a header row and floats printed with 17
//! significant digits, so identical configurations give byte-identical
//! files.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::Deserialize;
use thiserror::Error;

use crate::coupling::{self, CouplingError};
use crate::diagnostics::{self, ChainOutput, DiagnosticsError, SeriesSpec};
use crate::hamiltonian::{EventKind, HzzSim, HzzState, SimError};
use crate::markovian::{MzzSim, MzzState, RngUniforms};
use crate::model::{
    self, Constraint, ModelError, PrecisionOp, TruncatedGaussianTarget,
};
use crate::nuts::{nuts_transition, NutsConfig};
use crate::rng::{laplace, stream_rng};

/// RNG stream indices reserved by the runner. Replicate r uses streams
/// `CHAIN_STREAM_BASE + 2r` and `+ 2r + 1` for its two duel arms.
const EIGEN_STREAM: u64 = u64::MAX;
const FIGURE_STREAM: u64 = u64::MAX - 1;
const CHAIN_STREAM_BASE: u64 = 1;

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Coupling(#[from] CouplingError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{0}")]
    Parse(String),
    #[error("field `{field}`: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        message: message.into(),
    }
}

// ---------------------------------------------------------------------------
// Configuration

/// On-disk configuration. Every field can also be set from the command line;
/// flags win over the file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(default)]
    pub target: RawTarget,
    #[serde(default)]
    pub run: RawRun,
    #[serde(default)]
    pub coupling: RawCoupling,
    #[serde(default)]
    pub figure: RawFigure,
}

#[derive(Debug, Default, Deserialize, Clone)]
#[serde(deny_unknown_fields)]
pub struct RawTarget {
    /// "compound-symmetric", "ar1", or "file".
    pub family: Option<String>,
    pub dim: Option<usize>,
    pub rho: Option<f64>,
    pub path: Option<PathBuf>,
    /// "none", "positive", or explicit whitespace-separated tokens from
    /// {+1, -1, *}.
    pub orthant: Option<String>,
}

#[derive(Debug, Default, Deserialize, Clone)]
#[serde(deny_unknown_fields)]
pub struct RawRun {
    pub sampler: Option<String>,
    pub t_rel: Option<f64>,
    pub fixed_t_rel: Option<f64>,
    pub samples: Option<u64>,
    pub markovian_max_samples: Option<u64>,
    pub burn_in: Option<f64>,
    pub max_depth: Option<u32>,
    pub seed: Option<u64>,
    pub replicates: Option<u64>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize, Clone)]
#[serde(deny_unknown_fields)]
pub struct RawCoupling {
    /// Refreshment intervals as multiples of nu_min^{-1/2}(Phi).
    pub grid_rel: Option<Vec<f64>>,
    /// Horizon as a multiple of nu_min^{-1/2}(Phi).
    pub horizon_rel: Option<f64>,
    pub replicates: Option<u64>,
}

#[derive(Debug, Default, Deserialize, Clone)]
#[serde(deny_unknown_fields)]
pub struct RawFigure {
    /// Velocity-switch events to record per sampler.
    pub segments: Option<u64>,
    /// Starting position, broadcast to every coordinate.
    pub x0: Option<f64>,
    /// Explicit unit projection vector for the traceplot.
    pub projection: Option<Vec<f64>>,
}

impl RawConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path)
            .map_err(|e| ConfigError::Parse(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        // toml errors carry line/column context in their Display output.
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SamplerKind {
    ZigzagNuts,
    HzzFixedT,
    Markovian,
}

impl SamplerKind {
    pub fn parse(name: &str) -> Result<Self, ConfigError> {
        match name {
            "zigzag-nuts" => Ok(SamplerKind::ZigzagNuts),
            "hzz-fixed-t" => Ok(SamplerKind::HzzFixedT),
            "markovian" => Ok(SamplerKind::Markovian),
            other => Err(invalid(
                "run.sampler",
                format!("unknown sampler `{other}` (expected zigzag-nuts, hzz-fixed-t, or markovian)"),
            )),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SamplerKind::ZigzagNuts => "zigzag-nuts",
            SamplerKind::HzzFixedT => "hzz-fixed-t",
            SamplerKind::Markovian => "markovian",
        }
    }
}

/// Fully resolved experiment settings.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub target: TruncatedGaussianTarget,
    pub sampler: SamplerKind,
    pub t_rel: f64,
    pub fixed_t_rel: f64,
    pub samples: u64,
    pub markovian_max_samples: u64,
    pub burn_in: f64,
    pub max_depth: u32,
    pub seed: u64,
    pub replicates: u64,
    pub out_dir: PathBuf,
    pub coupling_grid_rel: Vec<f64>,
    pub coupling_horizon_rel: f64,
    pub coupling_replicates: u64,
    pub figure_segments: u64,
    pub figure_x0: Option<f64>,
    pub figure_projection: Option<Vec<f64>>,
}

impl Experiment {
    pub fn resolve(raw: RawConfig) -> Result<Self, ConfigError> {
        let target = build_target(&raw.target)?;

        let sampler = match raw.run.sampler.as_deref() {
            Some(name) => SamplerKind::parse(name)?,
            None => SamplerKind::ZigzagNuts,
        };
        let t_rel = raw.run.t_rel.unwrap_or(0.1);
        if !(t_rel > 0.0) {
            return Err(invalid("run.t_rel", "must be positive"));
        }
        let fixed_t_rel = raw.run.fixed_t_rel.unwrap_or(std::f64::consts::SQRT_2);
        if !(fixed_t_rel > 0.0) {
            return Err(invalid("run.fixed_t_rel", "must be positive"));
        }
        let samples = raw.run.samples.unwrap_or(2500);
        if samples == 0 {
            return Err(invalid("run.samples", "must be positive"));
        }
        let markovian_max_samples = raw.run.markovian_max_samples.unwrap_or(10 * samples);
        if markovian_max_samples == 0 {
            return Err(invalid("run.markovian_max_samples", "must be positive"));
        }
        let burn_in = raw.run.burn_in.unwrap_or(0.1);
        if !(0.0..1.0).contains(&burn_in) {
            return Err(invalid("run.burn_in", "must lie in [0, 1)"));
        }
        let seed = raw
            .run
            .seed
            .ok_or_else(|| invalid("run.seed", "required for reproducibility"))?;
        let replicates = raw.run.replicates.unwrap_or(1);
        if replicates == 0 {
            return Err(invalid("run.replicates", "must be positive"));
        }
        let out_dir = raw.run.out_dir.unwrap_or_else(|| PathBuf::from("out"));

        let coupling_grid_rel = raw
            .coupling
            .grid_rel
            .unwrap_or_else(|| vec![0.4, 0.2, 0.1, 0.05]);
        if coupling_grid_rel.is_empty() || coupling_grid_rel.iter().any(|&g| !(g > 0.0)) {
            return Err(invalid("coupling.grid_rel", "entries must be positive"));
        }
        let coupling_horizon_rel = raw.coupling.horizon_rel.unwrap_or(4.0);
        if !(coupling_horizon_rel > 0.0) {
            return Err(invalid("coupling.horizon_rel", "must be positive"));
        }
        let coupling_replicates = raw.coupling.replicates.unwrap_or(1000);
        if coupling_replicates == 0 {
            return Err(invalid("coupling.replicates", "must be positive"));
        }

        let figure_segments = raw.figure.segments.unwrap_or(100_000);
        if figure_segments == 0 {
            return Err(invalid("figure.segments", "must be positive"));
        }

        Ok(Experiment {
            target,
            sampler,
            t_rel,
            fixed_t_rel,
            samples,
            markovian_max_samples,
            burn_in,
            max_depth: raw.run.max_depth.unwrap_or(10),
            seed,
            replicates,
            out_dir,
            coupling_grid_rel,
            coupling_horizon_rel,
            coupling_replicates,
            figure_segments,
            figure_x0: raw.figure.x0,
            figure_projection: raw.figure.projection,
        })
    }

    /// Base integration time nu_min^{-1/2}(Phi) * t_rel on a dedicated
    /// stream, so chains see identical tuning across replicates.
    pub fn delta_t(&self) -> Result<f64, ModelError> {
        let mut rng = stream_rng(self.seed, EIGEN_STREAM);
        model::base_integration_time(self.target.precision(), self.t_rel, &mut rng)
    }

    fn untruncated_width(&self) -> Result<f64, ModelError> {
        let mut rng = stream_rng(self.seed, EIGEN_STREAM);
        let est = model::min_eigenvalue(
            self.target.precision(),
            model::DEFAULT_LANCZOS_TOL,
            model::DEFAULT_LANCZOS_MAX_MATVECS,
            &mut rng,
        );
        if !est.converged {
            return Err(ModelError::EigenvalueNotConverged(est.iterations_used));
        }
        Ok(est.nu_min.powf(-0.5))
    }
}

fn build_target(raw: &RawTarget) -> Result<TruncatedGaussianTarget, ConfigError> {
    let family = raw.family.as_deref().unwrap_or("compound-symmetric");
    match family {
        "compound-symmetric" | "ar1" => {
            if raw.path.is_some() {
                return Err(invalid(
                    "target.path",
                    "only valid with family = \"file\"; exactly one target source is allowed",
                ));
            }
            let dim = raw
                .dim
                .ok_or_else(|| invalid("target.dim", "required for synthetic families"))?;
            let rho = raw
                .rho
                .ok_or_else(|| invalid("target.rho", "required for synthetic families"))?;
            let base = if family == "compound-symmetric" {
                TruncatedGaussianTarget::compound_symmetric(dim, rho)
            } else {
                TruncatedGaussianTarget::ar1(dim, rho)
            }
            .map_err(|e| invalid("target", e.to_string()))?;
            apply_orthant(base, raw.orthant.as_deref())
        }
        "file" => {
            if raw.dim.is_some() || raw.rho.is_some() {
                return Err(invalid(
                    "target.dim/target.rho",
                    "not valid with family = \"file\"; exactly one target source is allowed",
                ));
            }
            if raw.orthant.is_some() {
                return Err(invalid(
                    "target.orthant",
                    "file targets carry their own orthant line",
                ));
            }
            let path = raw
                .path
                .as_ref()
                .ok_or_else(|| invalid("target.path", "required for family = \"file\""))?;
            TruncatedGaussianTarget::load(path).map_err(|e| invalid("target.path", e.to_string()))
        }
        other => Err(invalid(
            "target.family",
            format!("unknown family `{other}` (expected compound-symmetric, ar1, or file)"),
        )),
    }
}

fn apply_orthant(
    target: TruncatedGaussianTarget,
    orthant: Option<&str>,
) -> Result<TruncatedGaussianTarget, ConfigError> {
    match orthant.map(str::trim) {
        None | Some("none") => Ok(target),
        Some("positive") => Ok(target.with_positive_orthant()),
        Some(tokens) => {
            let mut constraints = Vec::new();
            for tok in tokens.split_whitespace() {
                constraints.push(match tok {
                    "+1" => Constraint::Positive,
                    "-1" => Constraint::Negative,
                    "*" => Constraint::Free,
                    other => {
                        return Err(invalid(
                            "target.orthant",
                            format!("token must be +1, -1, or *, got `{other}`"),
                        ))
                    }
                });
            }
            target
                .with_orthant(constraints)
                .map_err(|e| invalid("target.orthant", e.to_string()))
        }
    }
}

// ---------------------------------------------------------------------------
// Chain drivers

/// Zigzag-NUTS chain: one sample per transition, burn-in discarded.
pub fn run_nuts_chain<R: Rng + ?Sized>(
    target: &TruncatedGaussianTarget,
    delta_t: f64,
    max_depth: u32,
    n_total: u64,
    burn_in: f64,
    rng: &mut R,
) -> Result<ChainOutput, SimError> {
    let start = Instant::now();
    let config = NutsConfig::new(delta_t).with_max_depth(max_depth);
    let burn = (burn_in * n_total as f64).floor() as u64;
    let d = target.dim();
    let mut x = target.default_start();
    let mut samples = Vec::new();
    let mut events_per_sample = Vec::new();
    for i in 0..n_total {
        let (next, stats) = nuts_transition(&x, target, &config, rng)?;
        x = next;
        if i >= burn {
            samples.extend_from_slice(&x);
            events_per_sample.push(stats.events());
        }
    }
    Ok(ChainOutput {
        sampler: "zigzag-nuts".into(),
        dim: d,
        samples,
        events_per_sample,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Fixed-integration-time Hamiltonian zigzag: full momentum refreshment,
/// then exact dynamics for `t_fixed`; samples are the refresh-boundary
/// states.
pub fn run_fixed_t_chain<R: Rng + ?Sized>(
    target: &TruncatedGaussianTarget,
    t_fixed: f64,
    n_total: u64,
    burn_in: f64,
    rng: &mut R,
) -> Result<ChainOutput, SimError> {
    let start = Instant::now();
    let burn = (burn_in * n_total as f64).floor() as u64;
    let d = target.dim();
    let x0 = target.default_start();
    let mut state = HzzState::new(x0, vec![1.0; d], target)?;
    let mut sim = HzzSim::new(target);
    let mut samples = Vec::new();
    let mut events_per_sample = Vec::new();
    for i in 0..n_total {
        state.refresh_momentum(target, rng);
        let counts = sim.run(&mut state, t_fixed, |_, _| {})?;
        if i >= burn {
            samples.extend_from_slice(&state.x);
            events_per_sample.push(counts.total());
        }
    }
    Ok(ChainOutput {
        sampler: "hzz-fixed-t".into(),
        dim: d,
        samples,
        events_per_sample,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Markovian zigzag sampled every `delta_t` of process time.
pub fn run_markovian_chain<R: Rng + ?Sized>(
    target: &TruncatedGaussianTarget,
    delta_t: f64,
    n_total: u64,
    burn_in: f64,
    rng: &mut R,
) -> Result<ChainOutput, SimError> {
    run_markovian_driver(target, delta_t, StopRule::Samples(n_total), burn_in, rng)
}

/// Markovian zigzag run until its velocity-switch events match another
/// chain's budget (the duel's event-matched arm), capped at `max_samples`.
pub fn run_markovian_chain_event_matched<R: Rng + ?Sized>(
    target: &TruncatedGaussianTarget,
    delta_t: f64,
    target_events: u64,
    max_samples: u64,
    burn_in: f64,
    rng: &mut R,
) -> Result<ChainOutput, SimError> {
    run_markovian_driver(
        target,
        delta_t,
        StopRule::Events {
            target_events,
            max_samples,
        },
        burn_in,
        rng,
    )
}

enum StopRule {
    Samples(u64),
    Events { target_events: u64, max_samples: u64 },
}

fn run_markovian_driver<R: Rng + ?Sized>(
    target: &TruncatedGaussianTarget,
    delta_t: f64,
    stop: StopRule,
    burn_in: f64,
    rng: &mut R,
) -> Result<ChainOutput, SimError> {
    let start = Instant::now();
    let d = target.dim();
    let x0 = target.default_start();
    let v0: Vec<f64> = (0..d).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let mut state = MzzState::new(x0, v0, target)?;
    let mut sim = MzzSim::new(target);
    let mut samples = Vec::new();
    let mut events_per_sample = Vec::new();
    let mut total_events = 0u64;
    loop {
        let mut uniforms = RngUniforms(rng);
        let counts = sim.run(&mut state, delta_t, &mut uniforms, |_, _| {})?;
        samples.extend_from_slice(&state.x);
        events_per_sample.push(counts.total());
        total_events += counts.total();
        let done = match stop {
            StopRule::Samples(n) => events_per_sample.len() as u64 >= n,
            StopRule::Events {
                target_events,
                max_samples,
            } => {
                // Overshoot the budget so the post-burn-in share matches it.
                let goal = target_events as f64 / (1.0 - burn_in);
                total_events as f64 >= goal || events_per_sample.len() as u64 >= max_samples
            }
        };
        if done {
            break;
        }
    }
    let n = events_per_sample.len() as u64;
    let burn = (burn_in * n as f64).floor() as usize;
    Ok(ChainOutput {
        sampler: "markovian".into(),
        dim: d,
        samples: samples.split_off(burn * d),
        events_per_sample: events_per_sample.split_off(burn),
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

// ---------------------------------------------------------------------------
// CSV plumbing

/// 17 significant digits: parses back to the identical f64.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> std::io::Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut file = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(file, "{}", header.join(","))?;
    for row in rows {
        writeln!(file, "{}", row.join(","))?;
    }
    file.flush()
}

/// Parses a CSV emitted by this module back into header and rows.
pub fn parse_csv(text: &str) -> Option<(Vec<String>, Vec<Vec<String>>)> {
    let mut lines = text.lines();
    let header = lines.next()?.split(',').map(str::to_string).collect();
    let rows = lines
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    Some((header, rows))
}

// ---------------------------------------------------------------------------
// Subcommand entry points

/// Per-series duel outcome, averaged over replicates.
#[derive(Clone, Debug)]
pub struct DuelSummary {
    pub series: String,
    pub nuts_ess_per_event: f64,
    pub markovian_ess_per_event: f64,
    pub relative: f64,
}

struct DuelReplicate {
    nuts: ChainOutput,
    markovian: ChainOutput,
}

fn duel_replicate(exp: &Experiment, delta_t: f64, replicate: u64) -> Result<DuelReplicate, SimError> {
    let mut nuts_rng = stream_rng(exp.seed, CHAIN_STREAM_BASE + 2 * replicate);
    let nuts = run_nuts_chain(
        &exp.target,
        delta_t,
        exp.max_depth,
        exp.samples,
        exp.burn_in,
        &mut nuts_rng,
    )?;
    let target_events: u64 = nuts.total_events();
    let mut markovian_rng = stream_rng(exp.seed, CHAIN_STREAM_BASE + 2 * replicate + 1);
    let markovian = run_markovian_chain_event_matched(
        &exp.target,
        delta_t,
        target_events,
        exp.markovian_max_samples,
        exp.burn_in,
        &mut markovian_rng,
    )?;
    Ok(DuelReplicate { nuts, markovian })
}

fn duel_series(target: &TruncatedGaussianTarget) -> Vec<(String, Option<Vec<f64>>)> {
    let mut series = vec![("x1".to_string(), None)];
    if matches!(
        target.precision(),
        PrecisionOp::CompoundSymmetric { .. }
    ) {
        let d = target.dim();
        let u = vec![1.0 / (d as f64).sqrt(); d];
        series.push(("pc".to_string(), Some(u)));
    }
    series
}

/// Runs the two-sampler duel and writes samples, per-replicate diagnostics,
/// and the relative ESS-per-event summary. Returns the summary rows.
pub fn run_duel(exp: &Experiment) -> Result<Vec<DuelSummary>, RunnerError> {
    let delta_t = exp.delta_t()?;
    let replicates: Vec<DuelReplicate> = (0..exp.replicates)
        .into_par_iter()
        .map(|r| duel_replicate(exp, delta_t, r))
        .collect::<Result<_, _>>()?;

    let series = duel_series(&exp.target);

    // Per-replicate diagnostics rows.
    let mut diag_rows: Vec<Vec<String>> = Vec::new();
    let mut sums: Vec<[f64; 2]> = vec![[0.0; 2]; series.len()];
    for (r, rep) in replicates.iter().enumerate() {
        for (s, (name, projection)) in series.iter().enumerate() {
            for (k, chain) in [&rep.nuts, &rep.markovian].into_iter().enumerate() {
                let spec = match projection {
                    Some(u) => SeriesSpec::Projection(u),
                    None => SeriesSpec::Coordinate(0),
                };
                let values = spec.extract(chain)?;
                let ess = diagnostics::ess(&values)?.value;
                let events = chain.total_events();
                let per_event = ess / events as f64;
                sums[s][k] += per_event;
                diag_rows.push(vec![
                    r.to_string(),
                    chain.sampler.clone(),
                    name.clone(),
                    fmt_float(ess),
                    events.to_string(),
                    fmt_float(per_event),
                ]);
            }
        }
    }
    write_csv(
        &exp.out_dir.join("diagnostics.csv"),
        &["replicate", "sampler", "series", "ess", "events", "ess_per_event"],
        &diag_rows,
    )?;

    // Replicate 0 samples, one file per sampler.
    let first = &replicates[0];
    for chain in [&first.nuts, &first.markovian] {
        write_samples_csv(
            &exp.out_dir.join(format!("samples_{}.csv", chain.sampler)),
            chain,
        )?;
    }

    let mut summaries = Vec::new();
    let mut summary_rows = Vec::new();
    let n = exp.replicates as f64;
    for (s, (name, _)) in series.iter().enumerate() {
        let nuts_mean = sums[s][0] / n;
        let markovian_mean = sums[s][1] / n;
        let relative = nuts_mean / markovian_mean;
        summary_rows.push(vec![
            name.clone(),
            fmt_float(nuts_mean),
            fmt_float(markovian_mean),
            fmt_float(relative),
        ]);
        summaries.push(DuelSummary {
            series: name.clone(),
            nuts_ess_per_event: nuts_mean,
            markovian_ess_per_event: markovian_mean,
            relative,
        });
    }
    write_csv(
        &exp.out_dir.join("summary.csv"),
        &[
            "series",
            "nuts_ess_per_event",
            "markovian_ess_per_event",
            "relative_ess_per_event",
        ],
        &summary_rows,
    )?;
    Ok(summaries)
}

fn write_samples_csv(path: &Path, chain: &ChainOutput) -> std::io::Result<()> {
    let mut header: Vec<String> = vec!["sample".into(), "events".into()];
    header.extend((1..=chain.dim).map(|j| format!("x{j}")));
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<String>> = (0..chain.n_samples())
        .map(|i| {
            let mut row = Vec::with_capacity(chain.dim + 2);
            row.push(i.to_string());
            row.push(chain.events_per_sample[i].to_string());
            row.extend(chain.sample(i).iter().map(|&x| fmt_float(x)));
            row
        })
        .collect();
    write_csv(path, &header_refs, &rows)
}

/// Runs the coupling study over the configured grid and writes
/// divergence.csv. Returns the table rows.
pub fn run_coupling(exp: &Experiment) -> Result<Vec<coupling::DivergenceRow>, RunnerError> {
    if !exp.target.is_untruncated() {
        return Err(ConfigError::Invalid {
            field: "target.orthant".into(),
            message: "the coupling study requires an untruncated Gaussian: \
                      the refreshment-limit construction assumes a smooth potential"
                .into(),
        }
        .into());
    }
    let width = exp.untruncated_width()?;
    let grid: Vec<f64> = exp.coupling_grid_rel.iter().map(|g| g * width).collect();
    let horizon = exp.coupling_horizon_rel * width;
    let x0 = exp.target.default_start();
    let d = exp.target.dim();
    let v0: Vec<f64> = (0..d).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let rows = coupling::divergence_rate(
        &x0,
        &v0,
        &grid,
        horizon,
        &exp.target,
        exp.coupling_replicates,
        exp.seed,
    )?;
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                fmt_float(r.delta_t),
                r.replicates.to_string(),
                r.n_diverged.to_string(),
                fmt_float(r.p_hat),
                fmt_float(r.std_err),
            ]
        })
        .collect();
    write_csv(
        &exp.out_dir.join("divergence.csv"),
        &["delta_t", "replicates", "n_diverged", "p_hat", "std_err"],
        &csv_rows,
    )?;
    Ok(rows)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FigureKind {
    Trajectory,
    SqDistance,
    Traceplot,
}

impl FigureKind {
    pub fn parse(name: &str) -> Result<Self, ConfigError> {
        match name {
            "trajectory" => Ok(FigureKind::Trajectory),
            "sq-distance" => Ok(FigureKind::SqDistance),
            "traceplot" => Ok(FigureKind::Traceplot),
            other => Err(invalid(
                "figure",
                format!("unknown figure name `{other}` (expected trajectory, sq-distance, or traceplot)"),
            )),
        }
    }
}

/// Emits plot data for one of the diagnostic figures. Returns the output
/// path.
pub fn run_figure(exp: &Experiment, kind: FigureKind) -> Result<PathBuf, RunnerError> {
    match kind {
        FigureKind::Trajectory => run_event_figure(exp, false),
        FigureKind::SqDistance => run_event_figure(exp, true),
        FigureKind::Traceplot => run_traceplot(exp),
    }
}

fn figure_start(exp: &Experiment) -> Result<Vec<f64>, RunnerError> {
    let x0 = match exp.figure_x0 {
        Some(value) => vec![value; exp.target.dim()],
        None => exp.target.default_start(),
    };
    if !exp.target.contains(&x0) {
        return Err(ConfigError::Invalid {
            field: "figure.x0".into(),
            message: "starting position lies outside the target support".into(),
        }
        .into());
    }
    Ok(x0)
}

/// Shared driver for the trajectory and squared-distance figures: both
/// zigzags run without refreshment from the same position and velocity,
/// recording one row per velocity-switch event.
fn run_event_figure(exp: &Experiment, sq_distance: bool) -> Result<PathBuf, RunnerError> {
    let x0 = figure_start(exp)?;
    let d = exp.target.dim();
    let n_events = exp.figure_segments;
    let mut rng = stream_rng(exp.seed, FIGURE_STREAM);
    let p0: Vec<f64> = (0..d).map(|_| laplace(&mut rng)).collect();
    let v0: Vec<f64> = p0.iter().map(|&p| if p >= 0.0 { 1.0 } else { -1.0 }).collect();

    // Chunked simulation until the event budget is met; the chunk length
    // adapts to the observed event rate.
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut record =
        |sampler: &str, idx: u64, time: f64, x: &[f64]| {
            if sq_distance {
                rows.push(vec![
                    sampler.to_string(),
                    idx.to_string(),
                    fmt_float(time),
                    fmt_float(diagnostics::squared_distance(x, &x0)),
                ]);
            } else {
                let x2 = if d > 1 { x[1] } else { x[0] };
                rows.push(vec![
                    sampler.to_string(),
                    idx.to_string(),
                    fmt_float(time),
                    fmt_float(x[0]),
                    fmt_float(x2),
                ]);
            }
        };

    // Hamiltonian path (no refreshment).
    {
        let mut state = HzzState::new(x0.clone(), p0.clone(), &exp.target)?;
        let mut sim = HzzSim::new(&exp.target);
        let mut count = 0u64;
        record("hamiltonian", 0, 0.0, &state.x);
        let mut chunk = 1.0;
        while count < n_events {
            let before = count;
            sim.run(&mut state, chunk, |rec, s| {
                if rec.kind != EventKind::SegmentEnd && count < n_events {
                    count += 1;
                    record("hamiltonian", count, rec.time, &s.x);
                }
            })?;
            if count == before {
                chunk *= 2.0;
            }
        }
    }

    // Markovian path with the same starting velocity.
    {
        let mut state = MzzState::new(x0.clone(), v0, &exp.target)?;
        let mut sim = MzzSim::new(&exp.target);
        let mut count = 0u64;
        record("markovian", 0, 0.0, &state.x);
        let mut chunk = 1.0;
        while count < n_events {
            let before = count;
            let mut uniforms = RngUniforms(&mut rng);
            sim.run(&mut state, chunk, &mut uniforms, |rec, s| {
                if rec.kind != EventKind::SegmentEnd && count < n_events {
                    count += 1;
                    record("markovian", count, rec.time, &s.x);
                }
            })?;
            if count == before {
                chunk *= 2.0;
            }
        }
    }

    let (name, header): (&str, Vec<&str>) = if sq_distance {
        // The benchmark is the expected squared distance to an independent
        // draw; emitted as its own row with event index 0.
        rows.push(vec![
            "benchmark".into(),
            "0".into(),
            fmt_float(0.0),
            fmt_float(diagnostics::expected_squared_distance(&exp.target, &x0)?),
        ]);
        (
            "sq_distance.csv",
            vec!["sampler", "event", "time", "sq_distance"],
        )
    } else {
        ("trajectory.csv", vec!["sampler", "event", "time", "x1", "x2"])
    };
    let path = exp.out_dir.join(name);
    write_csv(&path, &header, &rows)?;
    Ok(path)
}

fn run_traceplot(exp: &Experiment) -> Result<PathBuf, RunnerError> {
    let d = exp.target.dim();
    let projection: Vec<f64> = match (&exp.figure_projection, exp.target.precision()) {
        (Some(u), _) => {
            if u.len() != d {
                return Err(ConfigError::Invalid {
                    field: "figure.projection".into(),
                    message: format!("expected {d} entries, got {}", u.len()),
                }
                .into());
            }
            u.clone()
        }
        // Principal component of the compound-symmetric family.
        (None, PrecisionOp::CompoundSymmetric { .. }) => vec![1.0 / (d as f64).sqrt(); d],
        (None, _) => {
            let mut e1 = vec![0.0; d];
            e1[0] = 1.0;
            e1
        }
    };

    let delta_t = exp.delta_t()?;
    let mut nuts_rng = stream_rng(exp.seed, CHAIN_STREAM_BASE);
    let nuts = run_nuts_chain(
        &exp.target,
        delta_t,
        exp.max_depth,
        exp.samples,
        exp.burn_in,
        &mut nuts_rng,
    )?;
    let mut markovian_rng = stream_rng(exp.seed, CHAIN_STREAM_BASE + 1);
    let markovian = run_markovian_chain_event_matched(
        &exp.target,
        delta_t,
        nuts.total_events(),
        exp.markovian_max_samples,
        exp.burn_in,
        &mut markovian_rng,
    )?;

    let mut rows = Vec::new();
    for chain in [&nuts, &markovian] {
        let series = diagnostics::project(chain, &projection)?;
        let mut cumulative = 0u64;
        for (i, value) in series.iter().enumerate() {
            cumulative += chain.events_per_sample[i];
            rows.push(vec![
                chain.sampler.clone(),
                i.to_string(),
                cumulative.to_string(),
                fmt_float(*value),
            ]);
        }
    }
    let path = exp.out_dir.join("traceplot.csv");
    write_csv(
        &path,
        &["sampler", "sample", "cumulative_events", "projection"],
        &rows,
    )?;
    Ok(path)
}

/// Smallest-eigenvalue report plus the derived base integration time;
/// written to eigen.csv.
pub fn run_eigen(exp: &Experiment) -> Result<model::SpectralEstimate, RunnerError> {
    let mut rng = stream_rng(exp.seed, EIGEN_STREAM);
    let est = model::min_eigenvalue(
        exp.target.precision(),
        model::DEFAULT_LANCZOS_TOL,
        model::DEFAULT_LANCZOS_MAX_MATVECS,
        &mut rng,
    );
    let delta_t = est.nu_min.powf(-0.5) * exp.t_rel;
    write_csv(
        &exp.out_dir.join("eigen.csv"),
        &["dim", "nu_min", "matvecs", "converged", "t_rel", "delta_t"],
        &[vec![
            exp.target.dim().to_string(),
            fmt_float(est.nu_min),
            est.iterations_used.to_string(),
            est.converged.to_string(),
            fmt_float(exp.t_rel),
            fmt_float(delta_t),
        ]],
    )?;
    Ok(est)
}

/// Runs the configured sampler once and writes samples.csv plus
/// diagnostics.csv (first coordinates and, when defined, the
/// compound-symmetric principal component).
pub fn run_sample(exp: &Experiment) -> Result<ChainOutput, RunnerError> {
    let mut rng = stream_rng(exp.seed, CHAIN_STREAM_BASE);
    let chain = match exp.sampler {
        SamplerKind::ZigzagNuts => {
            let delta_t = exp.delta_t()?;
            run_nuts_chain(
                &exp.target,
                delta_t,
                exp.max_depth,
                exp.samples,
                exp.burn_in,
                &mut rng,
            )?
        }
        SamplerKind::HzzFixedT => {
            let width = exp.untruncated_width()?;
            run_fixed_t_chain(
                &exp.target,
                exp.fixed_t_rel * width,
                exp.samples,
                exp.burn_in,
                &mut rng,
            )?
        }
        SamplerKind::Markovian => {
            let delta_t = exp.delta_t()?;
            run_markovian_chain(&exp.target, delta_t, exp.samples, exp.burn_in, &mut rng)?
        }
    };

    write_samples_csv(&exp.out_dir.join("samples.csv"), &chain)?;

    let mut rows = Vec::new();
    let events = chain.total_events();
    let mut push_series = |name: String, spec: SeriesSpec<'_>| -> Result<(), RunnerError> {
        let values = spec.extract(&chain)?;
        let ess = diagnostics::ess(&values)?.value;
        rows.push(vec![
            chain.sampler.clone(),
            name,
            fmt_float(ess),
            events.to_string(),
            fmt_float(ess / events.max(1) as f64),
        ]);
        Ok(())
    };
    for j in 0..chain.dim.min(8) {
        push_series(format!("x{}", j + 1), SeriesSpec::Coordinate(j))?;
    }
    if matches!(exp.target.precision(), PrecisionOp::CompoundSymmetric { .. }) && chain.dim > 1 {
        let u = vec![1.0 / (chain.dim as f64).sqrt(); chain.dim];
        push_series("pc".to_string(), SeriesSpec::Projection(&u))?;
    }
    write_csv(
        &exp.out_dir.join("diagnostics.csv"),
        &["sampler", "series", "ess", "events", "ess_per_event"],
        &rows,
    )?;
    Ok(chain)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use tempfile::tempdir;

    fn base_config(seed: u64, out_dir: &Path) -> RawConfig {
        let mut raw = RawConfig::default();
        raw.target.family = Some("compound-symmetric".into());
        raw.target.dim = Some(2);
        raw.target.rho = Some(0.5);
        raw.target.orthant = Some("positive".into());
        raw.run.seed = Some(seed);
        raw.run.samples = Some(400);
        raw.run.out_dir = Some(out_dir.to_path_buf());
        raw
    }

    #[test]
    fn config_round_trip_and_defaults() {
        let text = r#"
            [target]
            family = "compound-symmetric"
            dim = 4
            rho = 0.9
            orthant = "positive"

            [run]
            seed = 7
        "#;
        let raw = RawConfig::from_toml_str(text).unwrap();
        let exp = Experiment::resolve(raw).unwrap();
        assert_eq!(exp.target.dim(), 4);
        assert_eq!(exp.sampler, SamplerKind::ZigzagNuts);
        assert_relative_eq!(exp.t_rel, 0.1);
        assert_eq!(exp.samples, 2500);
        assert_eq!(exp.max_depth, 10);
        assert_eq!(exp.coupling_grid_rel, vec![0.4, 0.2, 0.1, 0.05]);
        assert_eq!(exp.coupling_replicates, 1000);
    }

    #[test]
    fn config_validation_names_fields() {
        let mut raw = RawConfig::default();
        raw.target.family = Some("compound-symmetric".into());
        raw.target.dim = Some(2);
        raw.target.rho = Some(0.5);
        // Missing seed.
        let err = Experiment::resolve(raw).unwrap_err();
        assert!(err.to_string().contains("run.seed"), "{err}");

        let mut raw = RawConfig::default();
        raw.target.family = Some("nope".into());
        raw.run.seed = Some(1);
        let err = Experiment::resolve(raw).unwrap_err();
        assert!(err.to_string().contains("target.family"), "{err}");

        // Two target sources at once.
        let mut raw = RawConfig::default();
        raw.target.family = Some("ar1".into());
        raw.target.dim = Some(2);
        raw.target.rho = Some(0.5);
        raw.target.path = Some("x.txt".into());
        raw.run.seed = Some(1);
        assert!(Experiment::resolve(raw).is_err());

        // Zero replicates.
        let mut raw = RawConfig::default();
        raw.target.family = Some("compound-symmetric".into());
        raw.target.dim = Some(2);
        raw.target.rho = Some(0.5);
        raw.run.seed = Some(1);
        raw.coupling.replicates = Some(0);
        let err = Experiment::resolve(raw).unwrap_err();
        assert!(err.to_string().contains("coupling.replicates"), "{err}");
    }

    #[test]
    fn toml_parse_errors_carry_position() {
        let err = RawConfig::from_toml_str("[target]\ndim = \"abc\"").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line"), "{msg}");
    }

    #[test]
    fn duel_outputs_are_deterministic_and_round_trip() {
        let dir = tempdir().unwrap();
        let exp = Experiment::resolve(base_config(1, dir.path())).unwrap();
        let first = run_duel(&exp).unwrap();
        let bytes_a = fs::read(dir.path().join("summary.csv")).unwrap();
        let diag_a = fs::read(dir.path().join("diagnostics.csv")).unwrap();

        let second = run_duel(&exp).unwrap();
        let bytes_b = fs::read(dir.path().join("summary.csv")).unwrap();
        let diag_b = fs::read(dir.path().join("diagnostics.csv")).unwrap();
        assert_eq!(bytes_a, bytes_b);
        assert_eq!(diag_a, diag_b);
        assert_eq!(first.len(), second.len());

        // Round trip: parse and re-emit the samples file identically.
        let text = fs::read_to_string(dir.path().join("samples_zigzag-nuts.csv")).unwrap();
        let (header, rows) = parse_csv(&text).unwrap();
        let mut rebuilt = header.join(",") + "\n";
        for row in &rows {
            // Re-parse and re-format the float columns.
            let mut cells = Vec::new();
            for (i, cell) in row.iter().enumerate() {
                if i < 2 {
                    cells.push(cell.clone());
                } else {
                    cells.push(fmt_float(cell.parse::<f64>().unwrap()));
                }
            }
            rebuilt.push_str(&cells.join(","));
            rebuilt.push('\n');
        }
        assert_eq!(text, rebuilt);
    }

    #[test]
    fn replicate_streams_are_order_independent() {
        let dir = tempdir().unwrap();
        let mut raw = base_config(3, dir.path());
        raw.run.samples = Some(200);
        raw.run.replicates = Some(3);
        let exp = Experiment::resolve(raw).unwrap();
        let delta_t = exp.delta_t().unwrap();
        // Replicates computed in any order give identical chains.
        let forward: Vec<u64> = (0..3)
            .map(|r| duel_replicate(&exp, delta_t, r).unwrap().nuts.total_events())
            .collect();
        let backward: Vec<u64> = (0..3)
            .rev()
            .map(|r| duel_replicate(&exp, delta_t, r).unwrap().nuts.total_events())
            .collect();
        assert_eq!(forward, vec![backward[2], backward[1], backward[0]]);
    }

    #[test]
    fn coupling_rejects_truncated_targets() {
        let dir = tempdir().unwrap();
        let exp = Experiment::resolve(base_config(5, dir.path())).unwrap();
        let err = run_coupling(&exp).unwrap_err();
        assert!(
            err.to_string().contains("untruncated"),
            "unexpected message: {err}"
        );
    }

    #[test]
    fn coupling_writes_expected_schema() {
        let dir = tempdir().unwrap();
        let mut raw = base_config(7, dir.path());
        raw.target.orthant = None;
        raw.coupling.replicates = Some(120);
        raw.coupling.grid_rel = Some(vec![0.1, 0.05]);
        raw.coupling.horizon_rel = Some(1.0);
        let exp = Experiment::resolve(raw).unwrap();
        let rows = run_coupling(&exp).unwrap();
        assert_eq!(rows.len(), 2);
        let text = fs::read_to_string(dir.path().join("divergence.csv")).unwrap();
        let (header, data) = parse_csv(&text).unwrap();
        assert_eq!(
            header,
            vec!["delta_t", "replicates", "n_diverged", "p_hat", "std_err"]
        );
        assert_eq!(data.len(), 2);
    }

    #[test]
    fn figure_outputs_exist_with_documented_schemas() {
        let dir = tempdir().unwrap();
        let mut raw = base_config(9, dir.path());
        raw.target.orthant = None;
        raw.figure.segments = Some(200);
        raw.run.samples = Some(50);
        let exp = Experiment::resolve(raw).unwrap();

        let path = run_figure(&exp, FigureKind::Trajectory).unwrap();
        let (header, rows) = parse_csv(&fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(header, vec!["sampler", "event", "time", "x1", "x2"]);
        // Both samplers with the configured number of events plus the start.
        assert_eq!(rows.len(), 2 * (200 + 1));

        let path = run_figure(&exp, FigureKind::SqDistance).unwrap();
        let (header, rows) = parse_csv(&fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(header, vec!["sampler", "event", "time", "sq_distance"]);
        let benchmark: Vec<_> = rows.iter().filter(|r| r[0] == "benchmark").collect();
        assert_eq!(benchmark.len(), 1);
        // trace(Sigma) + |mean - x0|^2 = 2 for the 2-D unit-variance target
        // started at the mean.
        let value: f64 = benchmark[0][3].parse().unwrap();
        assert_relative_eq!(value, 2.0, max_relative = 1e-12);

        let path = run_figure(&exp, FigureKind::Traceplot).unwrap();
        let (header, _) = parse_csv(&fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(
            header,
            vec!["sampler", "sample", "cumulative_events", "projection"]
        );
    }

    #[test]
    fn eigen_reports_the_analytic_value() {
        let dir = tempdir().unwrap();
        let mut raw = base_config(11, dir.path());
        raw.target.dim = Some(64);
        raw.target.rho = Some(0.9);
        let exp = Experiment::resolve(raw).unwrap();
        let est = run_eigen(&exp).unwrap();
        assert!(est.converged);
        assert_relative_eq!(
            est.nu_min,
            1.0 / (1.0 + 63.0 * 0.9),
            max_relative = 1e-6
        );
        assert!(dir.path().join("eigen.csv").exists());
    }

    #[test]
    fn sample_runs_each_sampler() {
        for sampler in ["zigzag-nuts", "hzz-fixed-t", "markovian"] {
            let dir = tempdir().unwrap();
            let mut raw = base_config(13, dir.path());
            raw.run.sampler = Some(sampler.into());
            raw.run.samples = Some(60);
            let exp = Experiment::resolve(raw).unwrap();
            let chain = run_sample(&exp).unwrap();
            assert_eq!(chain.sampler, sampler);
            assert!(chain.n_samples() >= 50);
            assert!(dir.path().join("samples.csv").exists());
            assert!(dir.path().join("diagnostics.csv").exists());
        }
    }

    #[test]
    fn float_formatting_round_trips() {
        for &x in &[
            0.0,
            1.0,
            -1.0,
            std::f64::consts::PI,
            1.234_567_890_123_456_7e-300,
            -9.87e250,
            f64::MIN_POSITIVE,
        ] {
            let s = fmt_float(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{s}");
        }
    }
}
