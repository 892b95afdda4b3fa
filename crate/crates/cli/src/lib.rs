//! Command-line front end: argument parsing, report assembly and JSON output.

pub mod report;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use riemann_core::catalog;
use riemann_core::conformal::{conformal_scaling_check, einstein_check};
use riemann_core::curvature::PointGeometry;
use riemann_core::decomposition::{is_conformally_flat, ricci_decompose, DEFAULT_CONFORMAL_TOLERANCE};
use riemann_core::input::{parse_metric_file, parse_params, parse_point};
use riemann_core::kaehler::sample_check;
use riemann_core::meigen::{
    closed_form_conformally_flat, frame_tensor_at, ricci_eigenpairs, solve_meigen, SolverConfig,
};
use riemann_core::metric::{MetricField, Signature};
use riemann_core::tensor::{Rank3, Rank4};
use riemann_core::{Error, ErrorClass};

use report::*;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_METRIC: i32 = 3;
pub const EXIT_SOLVER: i32 = 4;
pub const EXIT_INTERNAL: i32 = 5;

/// Tolerance for the Einstein verdict in reports.
const EINSTEIN_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Parser)]
#[command(name = "riemann", version, about = "Curvature and M-eigenvalue reports for metrics")]
struct Cli {
    /// Compact JSON output (the default).
    #[arg(long, global = true, conflicts_with = "pretty")]
    json: bool,
    /// Indented JSON output.
    #[arg(long, global = true)]
    pretty: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Full curvature report at a point.
    Report {
        #[command(flatten)]
        metric: MetricArgs,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// M-eigentriples of the frame curvature tensor.
    Eigen {
        #[command(flatten)]
        metric: MetricArgs,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Ricci decomposition norms and the conformal-flatness verdict.
    Decompose {
        #[command(flatten)]
        metric: MetricArgs,
    },
    /// Compares the metric with its constant rescaling c^2 g.
    ConformalCheck {
        #[command(flatten)]
        metric: MetricArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        factor: f64,
        /// Relative tolerance of every scaling assertion.
        #[arg(long, default_value_t = 1e-8)]
        tolerance: f64,
    },
    /// Samples the complex eigen-identity of a constant holomorphic curvature model.
    KahlerCheck {
        #[arg(long)]
        n: usize,
        #[arg(long, allow_negative_numbers = true)]
        c: f64,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Use a random Hermitian form instead of the identity.
        #[arg(long)]
        random_form: bool,
    },
    /// Reconstructs a hidden random curvature tensor from its biquadratic form.
    Reconstruct {
        #[arg(long)]
        dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Args)]
struct MetricArgs {
    /// Catalog metric name, e.g. sphere_3 or de_sitter_static.
    #[arg(long, required_unless_present = "metric_file", conflicts_with = "metric_file")]
    metric: Option<String>,
    /// JSON metric file.
    #[arg(long)]
    metric_file: Option<PathBuf>,
    /// Parameter assignments `k=v`, repeatable or comma separated.
    #[arg(long = "param", value_name = "K=V")]
    params: Vec<String>,
    /// Comma-separated coordinates.
    #[arg(long, allow_hyphen_values = true)]
    point: String,
}

#[derive(Debug, Args)]
struct SolverArgs {
    #[arg(long, default_value_t = 64)]
    starts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
    #[arg(long)]
    shift: Option<f64>,
    /// Keep one triple per vector pair instead of one per eigenvalue.
    #[arg(long)]
    distinct_vectors: bool,
}

impl SolverArgs {
    fn config(&self) -> SolverConfig {
        SolverConfig {
            tolerance: self.tol,
            max_iterations: self.max_iter,
            starts: self.starts,
            seed: self.seed,
            shift: self.shift,
            distinct_vectors: self.distinct_vectors,
            ..SolverConfig::default()
        }
    }
}

/// Result of one invocation: exit code and the text for standard output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
}

pub fn exit_code(class: ErrorClass) -> i32 {
    match class {
        ErrorClass::Usage => EXIT_USAGE,
        ErrorClass::Metric => EXIT_METRIC,
        ErrorClass::Solver => EXIT_SOLVER,
        ErrorClass::Internal => EXIT_INTERNAL,
    }
}

fn to_json<T: Serialize>(value: &T, pretty: bool) -> String {
    let mut s = if pretty {
        serde_json::to_string_pretty(value)
    } else {
        serde_json::to_string(value)
    }
    .expect("reports serialize");
    s.push('\n');
    s
}

pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                return Outcome { code: EXIT_OK, stdout: e.to_string() };
            }
            let rendered = e.to_string();
            let first = rendered
                .lines()
                .take_while(|l| !l.trim().is_empty())
                .map(str::trim)
                .collect::<Vec<_>>()
                .join(" ");
            let first = first.trim_start_matches("error: ").to_string();
            let report = ErrorReport {
                code: "usage".into(),
                message: first,
                context: BTreeMap::from([("kind".to_string(), format!("{:?}", e.kind()))]),
            };
            return Outcome { code: EXIT_USAGE, stdout: to_json(&report, false) };
        }
    };
    let pretty = cli.pretty;
    let name = command_name(&cli.command);
    let mut context = BTreeMap::from([("command".to_string(), name.to_string())]);
    match dispatch(&cli.command, name, &mut context) {
        Ok(value) => Outcome { code: EXIT_OK, stdout: render(&value, pretty) },
        Err(e) => {
            context.insert("class".into(), format!("{:?}", e.class()).to_lowercase());
            let report = ErrorReport { code: e.code().into(), message: e.to_string(), context };
            Outcome { code: exit_code(e.class()), stdout: to_json(&report, pretty) }
        }
    }
}

enum Document {
    Report(Box<CurvatureReport>),
    Eigen(EigenReport),
    Decompose(DecomposeReport),
    Conformal(ConformalReport),
    Kaehler(KaehlerReport),
    Reconstruct(ReconstructReport),
}

fn render(doc: &Document, pretty: bool) -> String {
    match doc {
        Document::Report(r) => to_json(r, pretty),
        Document::Eigen(r) => to_json(r, pretty),
        Document::Decompose(r) => to_json(r, pretty),
        Document::Conformal(r) => to_json(r, pretty),
        Document::Kaehler(r) => to_json(r, pretty),
        Document::Reconstruct(r) => to_json(r, pretty),
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Report { .. } => "report",
        Command::Eigen { .. } => "eigen",
        Command::Decompose { .. } => "decompose",
        Command::ConformalCheck { .. } => "conformal-check",
        Command::KahlerCheck { .. } => "kahler-check",
        Command::Reconstruct { .. } => "reconstruct",
    }
}

fn dispatch(command: &Command, name: &str, context: &mut BTreeMap<String, String>) -> Result<Document, Error> {
    let header = Header::new(name);
    Ok(match command {
        Command::Report { metric, solver } => {
            let (m, desc, p) = load(metric, context)?;
            Document::Report(Box::new(curvature_report(header, &m, desc, p, &solver.config())?))
        }
        Command::Eigen { metric, solver } => {
            let (m, desc, p) = load(metric, context)?;
            let geo = PointGeometry::compute(&m, &p)?;
            let (meigen, warnings) = eigen_section(&m, &p, &geo, &solver.config())?;
            Document::Eigen(EigenReport { header, metric: desc, point: p, meigen, warnings })
        }
        Command::Decompose { metric } => {
            let (m, desc, p) = load(metric, context)?;
            let geo = PointGeometry::compute(&m, &p)?;
            let decomposition = decomposition_section(&geo)?;
            Document::Decompose(DecomposeReport {
                header,
                metric: desc,
                point: p,
                scalar_r: geo.ricci.scalar,
                decomposition,
            })
        }
        Command::ConformalCheck { metric, solver, factor, tolerance } => {
            let (m, desc, p) = load(metric, context)?;
            if tolerance.is_nan() || *tolerance <= 0.0 {
                return Err(Error::InvalidArgument("tolerance must be positive".into()));
            }
            let config = solver.config();
            let scaling = conformal_scaling_check(&m, &p, *factor, &config, *tolerance)?;
            Document::Conformal(ConformalReport { header, metric: desc, point: p, config, scaling })
        }
        Command::KahlerCheck { n, c, samples, seed, random_form } => {
            if *n > 16 {
                return Err(Error::InvalidArgument(format!("complex dimension {n} exceeds 16")));
            }
            if *samples > 100_000 {
                return Err(Error::InvalidArgument(format!("{samples} samples exceeds 100000")));
            }
            let result = sample_check(*n, *c, *samples, *seed, *random_form)?;
            Document::Kaehler(KaehlerReport { header, result })
        }
        Command::Reconstruct { dim, seed } => {
            let result = riemann_core::meigen::reconstruction_round_trip(*dim, *seed)?;
            Document::Reconstruct(ReconstructReport { header, result })
        }
    })
}

fn load(
    args: &MetricArgs,
    context: &mut BTreeMap<String, String>,
) -> Result<(MetricField, MetricDescriptor, Vec<f64>), Error> {
    context.insert("point".into(), args.point.clone());
    let params = parse_params(&args.params)?;
    let point = parse_point(&args.point)?;
    let (metric, source, sha256) = match (&args.metric, &args.metric_file) {
        (Some(name), _) => {
            context.insert("metric".into(), name.clone());
            (catalog::get_metric(name, &params)?, MetricSource::Catalog, None)
        }
        (None, Some(path)) => {
            context.insert("metric_file".into(), path.display().to_string());
            let bytes = std::fs::read(path)
                .map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", path.display())))?;
            let text = String::from_utf8(bytes.clone())
                .map_err(|_| Error::MetricFile("metric file is not UTF-8".into()))?;
            let file = parse_metric_file(&text)?;
            let digest = Sha256::digest(&bytes);
            let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
            (file.build("file", &params)?, MetricSource::File, Some(hex))
        }
        (None, None) => return Err(Error::InvalidArgument("--metric or --metric-file is required".into())),
    };
    metric.check_point(&point)?;
    let desc = MetricDescriptor {
        source,
        name: metric.name().to_string(),
        sha256,
        parameters: metric.parameters().clone(),
        coordinates: metric.coordinates().to_vec(),
        signature: metric.signature(),
    };
    Ok((metric, desc, point))
}

fn rows(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().map(|v| v + 0.0).collect()).collect()
}

fn threshold(scale: f64) -> f64 {
    1e-12 * scale.max(1.0)
}

fn entries4(t: &Rank4) -> Vec<Entry> {
    t.nonzero_entries(threshold(t.max_abs()))
        .into_iter()
        .map(|(i, value)| Entry { index: i.to_vec(), value })
        .collect()
}

fn entries3(t: &Rank3) -> Vec<Entry> {
    let m = t.dim();
    let cut = threshold(t.max_abs());
    let mut out = Vec::new();
    for c in 0..m {
        for a in 0..m {
            for b in 0..m {
                let value = t[(c, a, b)];
                if value.abs() > cut {
                    out.push(Entry { index: vec![c, a, b], value });
                }
            }
        }
    }
    out
}

fn decomposition_section(geo: &PointGeometry) -> Result<DecompositionSection, Error> {
    let d = ricci_decompose(&geo.lowered, &geo.metric, &geo.ricci)?;
    Ok(DecompositionSection {
        norms: d.norms,
        conformal: is_conformally_flat(&d, DEFAULT_CONFORMAL_TOLERANCE),
        reassembly_error: d.reassembled().max_abs_diff(&geo.lowered.components),
        max_weyl_trace: d.max_weyl_trace(&geo.inverse),
    })
}

const CLOSED_FORM_WARNING: &str =
    "closed form applied with the corrected scalar term: zeta = ((m-1)(lambda+mu) - R)/((m-1)(m-2))";
const LORENTZIAN_WARNING: &str =
    "lorentzian signature: M-eigenvectors are unit in the Euclidean frame norm; causal characters recorded per vector";

fn eigen_section(
    metric: &MetricField,
    p: &[f64],
    geo: &PointGeometry,
    config: &SolverConfig,
) -> Result<(EigenSection, Vec<String>), Error> {
    let (t, frame) = frame_tensor_at(metric, p)?;
    let outcome = solve_meigen(&t, &frame.signs, config)?;
    let mut warnings = Vec::new();
    let mut closed = Vec::new();
    let mut ricci_eigenvalues = None;
    let riemannian = metric.signature() == Signature::Riemannian;
    if !riemannian {
        warnings.push(LORENTZIAN_WARNING.to_string());
    }
    if let Ok(pairs) = ricci_eigenpairs(&geo.ricci, &geo.metric, metric.signature()) {
        ricci_eigenvalues = Some(pairs.values.clone());
        if riemannian && metric.dim() >= 3 {
            let d = ricci_decompose(&geo.lowered, &geo.metric, &geo.ricci)?;
            if is_conformally_flat(&d, DEFAULT_CONFORMAL_TOLERANCE).conformally_flat {
                // the closed form is certified in the Ricci eigenframe
                let pt = riemann_core::meigen::to_frame(&geo.lowered.components, &pairs.frame);
                closed = closed_form_conformally_flat(&pairs, geo.ricci.scalar, &pt)?;
                warnings.push(CLOSED_FORM_WARNING.to_string());
            }
        }
    }
    Ok((
        EigenSection {
            config: config.clone(),
            frame_signs: frame.signs.clone(),
            ricci_eigenvalues,
            closed_form: closed,
            iterative: outcome.triples,
            starts: outcome.starts,
            converged: outcome.converged,
            discarded: outcome.discarded,
            explored: outcome.explored,
        },
        warnings,
    ))
}

fn curvature_report(
    header: Header,
    metric: &MetricField,
    desc: MetricDescriptor,
    p: Vec<f64>,
    config: &SolverConfig,
) -> Result<CurvatureReport, Error> {
    let geo = PointGeometry::compute(metric, &p)?;
    let mut warnings = Vec::new();
    let decomposition = if metric.dim() >= 3 {
        Some(decomposition_section(&geo)?)
    } else {
        warnings.push("Ricci decomposition needs dimension >= 3".to_string());
        None
    };
    let (meigen, eigen_warnings) = eigen_section(metric, &p, &geo, config)?;
    warnings.extend(eigen_warnings);
    Ok(CurvatureReport {
        header,
        metric: desc,
        point: p,
        metric_tensor: rows(&geo.metric),
        inverse_metric: rows(&geo.inverse),
        christoffel: entries3(&geo.christoffel),
        riemann_mixed: entries4(&geo.mixed.components),
        riemann_lowered: entries4(&geo.lowered.components),
        ricci: rows(&geo.ricci.lowered),
        scalar_r: geo.ricci.scalar,
        decomposition,
        einstein: einstein_check(&geo.ricci, &geo.metric, EINSTEIN_TOLERANCE),
        meigen,
        warnings,
    })
}
