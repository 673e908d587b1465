//! End-to-end verification and export, plus the command-line front end.
//!
//! Labels are 0-based in the library and 1-based on the command line and in
//! reports. Exit codes: 0 robust, 1 falsified, 2 unknown, 3 error.

use std::io::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use num_rational::BigRational;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::encode::{
    build_cliques, encode_lp, encode_milp, encode_standard, encode_tightened, objective_targeted,
    trace_assignment, write_lp_format, write_mps, EncodeError, PerturbationRegion, RegionKind,
};
use crate::model::{
    load_inputs, load_model, prepare, stabilize_over_box, FoldedBnn, ModelError, RawBnn,
};
use crate::oracle::{
    exact_verify_with_cap, relative_improvement, sample_minimizer, sample_region, OracleError,
};
use crate::poly::Coefficient;
use crate::sdp::{assemble_moment_sdp, to_sdpa, write_sdpa, SdpError};
use crate::solver::{
    rigorous_lower_bound, solve_lp, solve_sdp, SolveError, SolveOptions, SolveResult,
};

pub const EXIT_ROBUST: i32 = 0;
pub const EXIT_FALSIFIED: i32 = 1;
pub const EXIT_UNKNOWN: i32 = 2;
pub const EXIT_ERROR: i32 = 3;

const MPS_NOTE: &str = "exported MPS/LP files embed no sign-determination margin; external MILP solvers may add one (e.g. 1e-7)";

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Sdp(#[from] SdpError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("{0}")]
    Input(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("JSON: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    Linf,
    L2,
}

impl Norm {
    pub fn region_kind(self) -> RegionKind {
        match self {
            Norm::Linf => RegionKind::LinfBall,
            Norm::L2 => RegionKind::L2BallBox,
        }
    }

    /// Pixel-unit radius per unit of the `[-1, 1]` scale: `δ∞ = 127.5 ε`, `δ2 = 255 ε`.
    pub fn pixel_factor(self) -> f64 {
        match self {
            Norm::Linf => 127.5,
            Norm::L2 => 255.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Lp,
    Sdp1,
    Sdp1Tight,
    Oracle,
    SampleUb,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportKind {
    Sdpa,
    Mps,
    Lp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SdpEncoding {
    Standard,
    Tightened,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyConfig {
    pub norm: Norm,
    /// Radius on the `[-1, 1]` input scale.
    pub eps: f64,
    pub method: Method,
    /// True label, 0-based; taken from the forward pass when absent.
    pub label: Option<usize>,
    pub solve: SolveOptions,
    /// Falsification samples (and the metric upper bound).
    pub samples: usize,
    pub metrics: bool,
    pub parallel: bool,
    pub cap: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            norm: Norm::Linf,
            eps: 0.0,
            method: Method::Sdp1Tight,
            label: None,
            solve: SolveOptions::default(),
            samples: 1000,
            metrics: false,
            parallel: false,
            cap: crate::oracle::DEFAULT_CAP,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetStatus {
    /// The objective is constant over the region and evaluated exactly.
    Constant,
    Solved(crate::solver::SolveStatus),
    Exact,
    Sampled,
}

#[derive(Clone, Debug, Serialize)]
pub struct TargetReport {
    /// 1-based target label.
    pub k: usize,
    pub method: Method,
    pub lambda_rig: Option<f64>,
    pub lambda: Option<f64>,
    pub status: TargetStatus,
    pub iterations: Option<usize>,
    pub wall_time_s: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Robust,
    Falsified,
    Unknown,
}

impl Verdict {
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Robust => EXIT_ROBUST,
            Verdict::Falsified => EXIT_FALSIFIED,
            Verdict::Unknown => EXIT_UNKNOWN,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Witness {
    pub input: Vec<f64>,
    /// 1-based label assigned by the network.
    pub label: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct TargetMetrics {
    pub k: usize,
    pub tau_lp: Option<f64>,
    pub tau_sdp: Option<f64>,
    pub ub: f64,
    pub relative_improvement: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerdictReport {
    pub model_digest: String,
    pub input_id: String,
    /// 1-based true label.
    pub true_label: usize,
    pub norm: Norm,
    pub eps: f64,
    pub targets: Vec<TargetReport>,
    pub verdict: Verdict,
    pub witness: Option<Witness>,
    pub metrics: Option<Vec<TargetMetrics>>,
    pub seed: u64,
    pub options: VerifyConfig,
    pub notes: Vec<String>,
}

/// SHA-256 of the canonical JSON serialization.
pub fn model_digest(raw: &RawBnn) -> String {
    hex::encode(Sha256::digest(raw.to_json().as_bytes()))
}

fn check_input(net: &FoldedBnn, x: &[f64]) -> Result<(), CliError> {
    if x.len() != net.input_dim() {
        return Err(CliError::Input(format!(
            "input has {} entries, model expects {}",
            x.len(),
            net.input_dim()
        )));
    }
    if let Some(i) = x.iter().position(|v| !(-1.0..=1.0).contains(v)) {
        return Err(CliError::Input(format!(
            "input entry {} = {} outside [-1, 1]; pixel data needs --pixels",
            i + 1,
            x[i]
        )));
    }
    Ok(())
}

/// Network specialized to the region, or `None` when some layer is constant
/// over it (then every objective is constant there).
fn specialize(net: &FoldedBnn, region: &PerturbationRegion) -> Result<Option<FoldedBnn>, CliError> {
    match stabilize_over_box(net, region.lower(), region.upper()) {
        Ok(n) => Ok(Some(n)),
        Err(ModelError::LayerFullyStabilized { .. }) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn exact_value_at_center(
    net: &FoldedBnn,
    center: &[f64],
    ybar: usize,
    k: usize,
) -> Result<BigRational, CliError> {
    let trace = net.forward(center)?;
    let f = objective_targeted(net, ybar, k)?.poly.to_rational();
    let assign = trace_assignment(&trace.input, &trace.activations);
    f.eval_with(|v| assign(v).map(BigRational::from_f64))
        .map_err(|e| CliError::Input(e.to_string()))
}

fn solved(
    method: Method,
    r: &SolveResult,
    lambda_rig: f64,
    started: Instant,
    k: usize,
) -> TargetReport {
    TargetReport {
        k: k + 1,
        method,
        lambda_rig: Some(lambda_rig),
        lambda: Some(r.primal_objective),
        status: TargetStatus::Solved(r.status),
        iterations: Some(r.iterations),
        wall_time_s: started.elapsed().as_secs_f64(),
    }
}

struct TargetOutcome {
    report: TargetReport,
    witness: Option<Witness>,
}

fn run_target(
    net: &FoldedBnn,
    live: Option<&FoldedBnn>,
    region: &PerturbationRegion,
    ybar: usize,
    k: usize,
    cfg: &VerifyConfig,
) -> Result<TargetOutcome, CliError> {
    let started = Instant::now();
    let Some(live) = live else {
        let value = exact_value_at_center(net, region.center(), ybar, k)?;
        let lambda = crate::solver::floor_f64(&value);
        return Ok(TargetOutcome {
            report: TargetReport {
                k: k + 1,
                method: cfg.method,
                lambda_rig: Some(lambda),
                lambda: Some(value.to_f64()),
                status: TargetStatus::Constant,
                iterations: None,
                wall_time_s: started.elapsed().as_secs_f64(),
            },
            witness: None,
        });
    };
    let objective = objective_targeted(live, ybar, k)?;
    let mut witness = None;
    let report = match cfg.method {
        Method::Lp => {
            let inst = encode_lp(live, region, &objective)?;
            let r = solve_lp(&inst, &cfg.solve)?;
            let b = rigorous_lower_bound(&r, &inst, &[])?;
            solved(cfg.method, &r, b.lambda_rig, started, k)
        }
        Method::Sdp1 | Method::Sdp1Tight => {
            let inst = if cfg.method == Method::Sdp1 {
                encode_standard(live, region, &objective)?
            } else {
                encode_tightened(live, region, &objective)?
            };
            let cliques = build_cliques(live);
            let r = solve_sdp(&inst, &cliques, &cfg.solve)?;
            let b = rigorous_lower_bound(&r, &inst, &cliques)?;
            solved(cfg.method, &r, b.lambda_rig, started, k)
        }
        Method::Oracle => {
            let ex = exact_verify_with_cap(live, region, &objective.poly, cfg.cap)?;
            if let Some(w) = ex.witness {
                let label = live.forward(&w)?.label;
                if label != ybar {
                    witness = Some(Witness {
                        input: w,
                        label: label + 1,
                    });
                }
            }
            TargetReport {
                k: k + 1,
                method: cfg.method,
                lambda_rig: Some(ex.tau),
                lambda: Some(ex.tau),
                status: TargetStatus::Exact,
                iterations: None,
                wall_time_s: started.elapsed().as_secs_f64(),
            }
        }
        Method::SampleUb => {
            let s = sample_minimizer(live, region, &objective.poly, cfg.samples, cfg.solve.seed)?;
            if s.label != ybar {
                witness = Some(Witness {
                    input: s.point,
                    label: s.label + 1,
                });
            }
            TargetReport {
                k: k + 1,
                method: cfg.method,
                lambda_rig: None,
                lambda: Some(s.value),
                status: TargetStatus::Sampled,
                iterations: None,
                wall_time_s: started.elapsed().as_secs_f64(),
            }
        }
    };
    Ok(TargetOutcome { report, witness })
}

fn target_metrics(
    live: &FoldedBnn,
    region: &PerturbationRegion,
    ybar: usize,
    k: usize,
    cfg: &VerifyConfig,
) -> Result<TargetMetrics, CliError> {
    let objective = objective_targeted(live, ybar, k)?;
    let lp = solve_lp(&encode_lp(live, region, &objective)?, &cfg.solve)?;
    let cliques = build_cliques(live);
    let sdp = solve_sdp(
        &encode_tightened(live, region, &objective)?,
        &cliques,
        &cfg.solve,
    )?;
    let ub = sample_minimizer(
        live,
        region,
        &objective.poly,
        cfg.samples.max(1),
        cfg.solve.seed,
    )?
    .value;
    let tau_lp = lp.is_optimal().then_some(lp.primal_objective);
    let tau_sdp = sdp.is_optimal().then_some(sdp.primal_objective);
    let relative = match (tau_lp, tau_sdp) {
        (Some(l), Some(s)) => relative_improvement(s, l, ub),
        _ => None,
    };
    Ok(TargetMetrics {
        k: k + 1,
        tau_lp,
        tau_sdp,
        ub,
        relative_improvement: relative,
    })
}

/// Runs every target `k != ȳ` in ascending order and aggregates the verdict.
pub fn verify(
    raw: &RawBnn,
    input: &[f64],
    input_id: &str,
    cfg: &VerifyConfig,
) -> Result<VerdictReport, CliError> {
    cfg.solve.validate()?;
    let net = prepare(raw)?;
    check_input(&net, input)?;
    let region = PerturbationRegion::new(cfg.norm.region_kind(), input.to_vec(), cfg.eps)?;
    let center = net.forward(input)?;
    let ybar = cfg.label.unwrap_or(center.label);
    if ybar >= net.output_dim() {
        return Err(EncodeError::LabelOutOfRange {
            label: ybar,
            outputs: net.output_dim(),
        }
        .into());
    }
    let live = specialize(&net, &region)?;
    let targets: Vec<usize> = (0..net.output_dim()).filter(|&k| k != ybar).collect();
    let run = |&k: &usize| run_target(&net, live.as_ref(), &region, ybar, k, cfg);
    let outcomes: Vec<TargetOutcome> = if cfg.parallel {
        targets.par_iter().map(run).collect::<Result<_, _>>()?
    } else {
        targets.iter().map(run).collect::<Result<_, _>>()?
    };

    let mut witness = (center.label != ybar).then(|| Witness {
        input: input.to_vec(),
        label: center.label + 1,
    });
    for o in &outcomes {
        if witness.is_none() {
            witness = o.witness.clone();
        }
    }
    if witness.is_none() && cfg.method != Method::SampleUb {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.solve.seed);
        for _ in 0..cfg.samples {
            let x = sample_region(&region, &mut rng);
            let label = net.forward(&x)?.label;
            if label != ybar {
                witness = Some(Witness {
                    input: x,
                    label: label + 1,
                });
                break;
            }
        }
    }
    let reports: Vec<TargetReport> = outcomes.into_iter().map(|o| o.report).collect();
    let verdict = if witness.is_some() {
        Verdict::Falsified
    } else if reports
        .iter()
        .all(|r| r.lambda_rig.is_some_and(|l| l > 0.0))
    {
        Verdict::Robust
    } else {
        Verdict::Unknown
    };
    let metrics = match (cfg.metrics, live.as_ref()) {
        (true, Some(live)) => Some(
            targets
                .iter()
                .map(|&k| target_metrics(live, &region, ybar, k, cfg))
                .collect::<Result<Vec<_>, _>>()?,
        ),
        _ => None,
    };
    let mut notes = vec![MPS_NOTE.to_string()];
    if live.is_none() {
        notes.push(
            "some layer is constant over the region; objectives evaluated exactly at the center"
                .into(),
        );
    }
    Ok(VerdictReport {
        model_digest: model_digest(raw),
        input_id: input_id.to_string(),
        true_label: ybar + 1,
        norm: cfg.norm,
        eps: cfg.eps,
        targets: reports,
        verdict,
        witness,
        metrics,
        seed: cfg.solve.seed,
        options: cfg.clone(),
        notes,
    })
}

#[derive(Clone, Debug)]
pub struct ExportConfig {
    pub norm: Norm,
    pub eps: f64,
    pub label: Option<usize>,
    /// Target label, 0-based; the smallest `k != ȳ` when absent.
    pub target: Option<usize>,
    pub kind: ExportKind,
    pub encoding: SdpEncoding,
    /// MPS/LP: keep integrality (MILP) rather than the LP relaxation.
    pub integral: bool,
}

/// Writes the requested exchange file for one targeted instance.
pub fn export(
    raw: &RawBnn,
    input: &[f64],
    cfg: &ExportConfig,
    out: &mut impl std::io::Write,
) -> Result<(), CliError> {
    let net = prepare(raw)?;
    check_input(&net, input)?;
    let region = PerturbationRegion::new(cfg.norm.region_kind(), input.to_vec(), cfg.eps)?;
    let ybar = cfg.label.unwrap_or(net.forward(input)?.label);
    let target = match cfg.target {
        Some(k) => k,
        None => (0..net.output_dim())
            .find(|&k| k != ybar)
            .ok_or_else(|| CliError::Input("network has a single output".into()))?,
    };
    let live = specialize(&net, &region)?.ok_or(SdpError::NothingToExport)?;
    let objective = objective_targeted(&live, ybar, target)?;
    match cfg.kind {
        ExportKind::Sdpa => {
            let inst = match cfg.encoding {
                SdpEncoding::Standard => encode_standard(&live, &region, &objective)?,
                SdpEncoding::Tightened => encode_tightened(&live, &region, &objective)?,
            };
            let msdp = assemble_moment_sdp(&inst, &build_cliques(&live))?;
            write_sdpa(&to_sdpa(&msdp)?, out)?;
        }
        ExportKind::Mps | ExportKind::Lp => {
            let inst = if cfg.integral {
                encode_milp(&live, &region, &objective, None)?
            } else {
                encode_lp(&live, &region, &objective)?
            };
            if cfg.kind == ExportKind::Mps {
                write_mps(&inst, out)?;
            } else {
                write_lp_format(&inst, out)?;
            }
        }
    }
    Ok(())
}

#[derive(Debug, Parser)]
#[command(
    name = "bnn-verify",
    version,
    about = "Robustness certification for binarized neural networks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, clap::Args)]
pub struct InstanceArgs {
    /// Model JSON file.
    #[arg(long)]
    pub model: PathBuf,
    /// Input file: whitespace/comma separated values, one input per line.
    #[arg(long)]
    pub input: PathBuf,
    /// Row of the input file to use (0-based).
    #[arg(long, default_value_t = 0)]
    pub input_index: usize,
    /// Input values are pixels in [0, 255], mapped by x = p / 127.5 - 1.
    #[arg(long)]
    pub pixels: bool,
    /// True label, 1-based. Defaults to the network's prediction.
    #[arg(long)]
    pub label: Option<usize>,
    #[arg(long, value_enum)]
    pub norm: Norm,
    /// Perturbation radius on the [-1, 1] scale (pixel units with --pixel-scale).
    #[arg(long)]
    pub eps: f64,
    /// Read --eps in pixel units: linf eps = delta / 127.5, l2 eps = delta / 255.
    #[arg(long)]
    pub pixel_scale: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Certify or falsify robustness against every target label.
    Verify {
        #[command(flatten)]
        instance: InstanceArgs,
        #[arg(long, value_enum, default_value = "sdp1-tight")]
        method: Method,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, default_value_t = 50_000)]
        max_iter: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Samples for falsification and for the metric upper bound.
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        /// Add tau_lp, tau_sdp, sampled ub and relative improvement per target.
        #[arg(long)]
        metrics: bool,
        /// Process targets concurrently (results merged in target order).
        #[arg(long)]
        parallel: bool,
        /// Disable solver data scaling.
        #[arg(long)]
        no_scaling: bool,
        /// Hidden-neuron cap for the oracle.
        #[arg(long, default_value_t = crate::oracle::DEFAULT_CAP)]
        cap: usize,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Write an SDPA (moment relaxation) or MPS/LP (linear encoding) file.
    Export {
        #[command(flatten)]
        instance: InstanceArgs,
        #[arg(long, value_enum)]
        kind: ExportKind,
        #[arg(long)]
        out: PathBuf,
        /// Target label, 1-based. Defaults to the smallest label other than the true one.
        #[arg(long)]
        target: Option<usize>,
        #[arg(long, value_enum, default_value = "tightened")]
        encoding: SdpEncoding,
        /// Export the LP relaxation instead of the MILP.
        #[arg(long)]
        relaxed: bool,
    },
}

struct Loaded {
    raw: RawBnn,
    input: Vec<f64>,
    input_id: String,
    eps: f64,
    label: Option<usize>,
}

fn one_based(label: Option<usize>, what: &str) -> Result<Option<usize>, CliError> {
    match label {
        Some(0) => Err(CliError::Input(format!("{what} is 1-based; got 0"))),
        other => Ok(other.map(|l| l - 1)),
    }
}

fn load(args: &InstanceArgs) -> Result<Loaded, CliError> {
    let raw = load_model(&args.model)?;
    let inputs = load_inputs(&args.input)?;
    let mut input = inputs.get(args.input_index).cloned().ok_or_else(|| {
        CliError::Input(format!(
            "input file has {} rows, index {} requested",
            inputs.len(),
            args.input_index
        ))
    })?;
    if args.pixels {
        input.iter_mut().for_each(|p| *p = *p / 127.5 - 1.0);
    }
    let eps = if args.pixel_scale {
        args.eps / args.norm.pixel_factor()
    } else {
        args.eps
    };
    Ok(Loaded {
        raw,
        input,
        input_id: format!("{}#{}", args.input.display(), args.input_index),
        eps,
        label: one_based(args.label, "--label")?,
    })
}

fn write_file(path: &PathBuf, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Executes a parsed command; returns the process exit code.
pub fn run(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Verify {
            instance,
            method,
            tol,
            max_iter,
            seed,
            samples,
            metrics,
            parallel,
            no_scaling,
            cap,
            json,
        } => {
            let l = load(&instance)?;
            let cfg = VerifyConfig {
                norm: instance.norm,
                eps: l.eps,
                method,
                label: l.label,
                solve: SolveOptions {
                    tol,
                    max_iter,
                    scaling: !no_scaling,
                    seed,
                },
                samples,
                metrics,
                parallel,
                cap,
            };
            let report = verify(&l.raw, &l.input, &l.input_id, &cfg)?;
            let text = serde_json::to_string_pretty(&report)?;
            match json {
                Some(path) => {
                    write_file(&path, text.as_bytes())?;
                    println!("verdict: {:?}", report.verdict);
                }
                None => println!("{text}"),
            }
            Ok(report.verdict.exit_code())
        }
        Command::Export {
            instance,
            kind,
            out,
            target,
            encoding,
            relaxed,
        } => {
            let l = load(&instance)?;
            let cfg = ExportConfig {
                norm: instance.norm,
                eps: l.eps,
                label: l.label,
                target: one_based(target, "--target")?,
                kind,
                encoding,
                integral: !relaxed,
            };
            let mut buf = Vec::new();
            export(&l.raw, &l.input, &cfg, &mut buf)?;
            write_file(&out, &buf)?;
            Ok(0)
        }
    }
}

/// Parses `args` (including the program name) and runs; errors print to
/// stderr and map to [`EXIT_ERROR`].
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { 0 };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(std::io::stderr(), "error: {e}");
            EXIT_ERROR
        }
    }
}
