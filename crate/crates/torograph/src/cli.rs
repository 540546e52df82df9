//! Command-line front end.
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::{json, Map, Value};
use torograph_core::linalg::{condition_number, Matrix};
use torograph_core::sine::{cvm_lrt_select, cvm_sample, CvmDagModel, LrtOptions};
use torograph_core::stereo::{
    isn_ci_query, isn_fit, isn_log_density, isn_sample, isnpn_fit, isnpn_log_density, stability_select,
    CoordinateTransform, IsnParams, ModelKind, StabilityOptions, DEFAULT_EPSILON,
};
use torograph_core::wrapped::{
    partial_correlations, unwrapped_edge_select, wn_fit_approx_mle, wn_sample, Initialization, WindingTruncation,
    WnParams,
};
use torograph_core::{circular_summary, AngleMatrix, Dag, EdgeRecord, EdgeReport, UndirectedGraph};

use crate::error::{CliError, Result};
use crate::format::{parse_graph_json, Graph, GraphDocument};
use crate::input::{angles_to_csv, export_ramachandran, ingest_csv, resolve_column, AngleUnit};
use crate::output::write_atomic;
use crate::report::{edge_entries, matrix_json, number, vector_json, DataShape, FitReportDocument, StabilitySection};

#[derive(Debug, Clone, Parser)]
#[command(
    name = "torograph",
    version,
    about = "Graphical models for angular data on the torus"
)]
pub struct RunConfig {
    /// On failure, also print a JSON error document on standard output.
    #[arg(long, global = true)]
    pub error_json: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Wrapped Normal fit with Holm-corrected partial correlation tests.
    FitWn(FitWnArgs),
    /// Inverse stereographic Normal fit with stability selection.
    FitIsn(StabilityArgs),
    /// Inverse stereographic nonparanormal fit with stability selection.
    FitIsnpn(StabilityArgs),
    /// Conditional von Mises DAG with likelihood ratio edge selection.
    FitCvmDag(CvmArgs),
    /// Draw a sample from one of the model families.
    Simulate(SimulateArgs),
    /// Conditional independence query against a fitted report or a graph.
    CiQuery(CiQueryArgs),
    /// Per-column circular summaries and Ramachandran scatter export.
    Summary(SummaryArgs),
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// CSV with a header row of column names.
    #[arg(long)]
    pub input: PathBuf,
    /// Input angles are in degrees (default radians).
    #[arg(long)]
    pub degrees: bool,
}

impl InputArgs {
    fn load(&self) -> Result<AngleMatrix> {
        ingest_csv(&self.input, AngleUnit::from_degrees_flag(self.degrees))
    }

    fn echo(&self, config: &mut Map<String, Value>) {
        config.insert("input".into(), json!(self.input.display().to_string()));
        config.insert("degrees".into(), json!(self.degrees));
    }
}

#[derive(Debug, Clone, Args)]
pub struct FitWnArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Output directory for report.json, graph.json and graph.dot.
    #[arg(long)]
    pub output: PathBuf,
    /// Family-wise significance level of the edge tests.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Winding numbers range over {-r, ..., r} per coordinate.
    #[arg(long, default_value_t = 1)]
    pub truncation: u32,
}

#[derive(Debug, Clone, Args)]
pub struct StabilityArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = 50)]
    pub repeats: usize,
    /// Minimum selection frequency for an edge.
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    /// Comma-separated penalties; by default a log-spaced grid is derived from the data.
    #[arg(long, value_delimiter = ',')]
    pub rho_grid: Option<Vec<f64>>,
    /// Size of the default penalty grid.
    #[arg(long, default_value_t = 20)]
    pub grid_size: usize,
    /// θ = π is moved to −π + ε before projecting.
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub epsilon: f64,
}

#[derive(Debug, Clone, Args)]
pub struct CvmArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub output: PathBuf,
    /// Node ordering as comma-separated column names or 1-based indices.
    #[arg(long, value_delimiter = ',')]
    pub ordering: Option<Vec<String>>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Holm-adjust the likelihood ratio p-values.
    #[arg(long)]
    pub holm: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimModel {
    Wn,
    Isn,
    Cvm,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub model: SimModel,
    /// Number of coordinates when no parameter file is given.
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub seed: u64,
    /// JSON parameter file; without it a chain-structured default is used.
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Write degrees instead of radians.
    #[arg(long)]
    pub degrees: bool,
    /// CSV destination; standard output when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CiQueryArgs {
    /// report.json from fit-isn or fit-isnpn; the query reads its covariance.
    #[arg(long, required_unless_present = "graph", conflicts_with = "graph")]
    pub report: Option<PathBuf>,
    /// Undirected graph JSON; the query is graph separation.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub a: Vec<String>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub c: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    pub s: Vec<String>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SummaryArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub output: PathBuf,
    /// Column pairs for the Ramachandran export, e.g. `phi1:psi1,phi2:psi2`.
    #[arg(long, value_delimiter = ',')]
    pub pairs: Vec<String>,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Diagnostics go to `stderr`; query and simulation
/// results without an output path, and `--error-json` documents, to `stdout`.
pub fn execute<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let error_json = args.iter().any(|a| a == "--error-json");
    let config = match RunConfig::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{e}");
                return 0;
            }
            let _ = write!(stderr, "{}", e.render());
            if error_json {
                let msg = e.to_string();
                let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
                let _ = writeln!(stdout, "{}", CliError::config(first).to_json());
            }
            return crate::error::EXIT_CONFIG;
        }
    };
    match run(&config, stdout, stderr) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            if config.error_json {
                let _ = writeln!(stdout, "{}", e.to_json());
            }
            e.exit_code()
        }
    }
}

pub fn run(config: &RunConfig, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    match &config.command {
        Command::FitWn(a) => fit_wn(a),
        Command::FitIsn(a) => fit_stereo(a, ModelKind::Isn, stderr),
        Command::FitIsnpn(a) => fit_stereo(a, ModelKind::Isnpn, stderr),
        Command::FitCvmDag(a) => fit_cvm(a),
        Command::Simulate(a) => simulate(a, stdout),
        Command::CiQuery(a) => ci_query(a, stdout),
        Command::Summary(a) => summary(a, stderr),
    }
}

/// Applies TOROGRAPH_THREADS to the global rayon pool. Unset leaves the
/// default; anything but a positive integer is a configuration error.
pub fn configure_threads() -> Result<Option<usize>> {
    let Ok(raw) = std::env::var("TOROGRAPH_THREADS") else {
        return Ok(None);
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| CliError::config(format!("TOROGRAPH_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::config(format!("cannot size the thread pool: {e}")))?;
    Ok(Some(threads))
}

fn check_unit_interval(name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(CliError::config(format!("--{name} must lie in [0, 1], got {v}")));
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, text.as_bytes())
}

fn write_graph(dir: &Path, graph: &Graph, report: &EdgeReport) -> Result<()> {
    let doc = GraphDocument::new(graph).annotate(report);
    write_text(&dir.join("graph.json"), &doc.to_json())?;
    write_text(&dir.join("graph.dot"), &doc.to_dot())
}

fn report_doc(model: &str, seed: Option<u64>, config: Map<String, Value>, data: &AngleMatrix) -> FitReportDocument {
    FitReportDocument {
        model: model.to_owned(),
        version: env!("CARGO_PKG_VERSION").to_owned(),
        seed,
        config,
        data: DataShape {
            n: data.n(),
            p: data.p(),
            labels: data.column_names().to_vec(),
        },
        parameters: Map::new(),
        log_likelihood: f64::NAN,
        edges: Vec::new(),
        stability: None,
        diagnostics: Map::new(),
    }
}

fn fit_wn(args: &FitWnArgs) -> Result<()> {
    check_unit_interval("alpha", args.alpha)?;
    let data = args.input.load()?;
    let mut config = Map::new();
    config.insert("command".into(), json!("fit-wn"));
    args.input.echo(&mut config);
    config.insert("alpha".into(), number(args.alpha));
    config.insert("truncation".into(), json!(args.truncation));

    let trunc = WindingTruncation::new(args.truncation, data.p())?;
    let fit = wn_fit_approx_mle(&data, trunc)?;
    let (graph, edges) = unwrapped_edge_select(&fit.params, data.n(), args.alpha)?;
    let graph = graph.relabel(data.column_names().to_vec())?;

    let mut doc = report_doc("wn", None, config, &data);
    doc.parameters.insert("mu".into(), vector_json(fit.params.mu()));
    doc.parameters.insert("sigma".into(), matrix_json(fit.params.sigma()));
    doc.parameters.insert(
        "partial_correlations".into(),
        matrix_json(&partial_correlations(fit.params.sigma())?),
    );
    doc.log_likelihood = fit.log_likelihood;
    doc.edges = edge_entries(&edges);
    let d = &mut doc.diagnostics;
    d.insert("converged".into(), json!(true));
    d.insert("iterations".into(), json!(fit.iterations));
    d.insert("gradient_norm".into(), number(fit.gradient_norm));
    let init = match fit.initialization {
        Initialization::Moments => "moments",
        Initialization::Identity => "identity",
    };
    d.insert("initialization".into(), json!(init));
    d.insert("condition_number".into(), number(condition_number(fit.params.sigma())));
    d.insert("truncation_points".into(), json!(trunc.len()));
    d.insert(
        "truncation_saturation".into(),
        fit.saturation.map_or(Value::Null, number),
    );
    d.insert("saturation_warning".into(), json!(fit.saturation_warning()));

    write_text(&args.output.join("report.json"), &doc.to_json())?;
    write_graph(&args.output, &Graph::Undirected(graph), &edges)
}

fn fit_stereo(args: &StabilityArgs, kind: ModelKind, stderr: &mut dyn Write) -> Result<()> {
    check_unit_interval("threshold", args.threshold)?;
    let data = args.input.load()?;
    let name = match kind {
        ModelKind::Isn => "isn",
        ModelKind::Isnpn => "isnpn",
    };
    let mut config = Map::new();
    config.insert("command".into(), json!(format!("fit-{name}")));
    args.input.echo(&mut config);
    config.insert("folds".into(), json!(args.folds));
    config.insert("repeats".into(), json!(args.repeats));
    config.insert("threshold".into(), number(args.threshold));
    config.insert(
        "rho_grid".into(),
        args.rho_grid.as_deref().map_or(Value::Null, vector_json),
    );
    config.insert("grid_size".into(), json!(args.grid_size));
    config.insert("epsilon".into(), number(args.epsilon));

    let mut doc = report_doc(name, Some(args.seed), config, &data);
    let (params, log_likelihood) = match kind {
        ModelKind::Isn => {
            let params = isn_fit(&data, args.epsilon)?;
            let ll = data
                .rows()
                .map(|r| isn_log_density(r, &params))
                .sum::<torograph_core::Result<f64>>()?;
            (params, ll)
        }
        ModelKind::Isnpn => {
            let model = isnpn_fit(&data, args.epsilon)?;
            let ll = data
                .rows()
                .map(|r| isnpn_log_density(r, &model))
                .sum::<torograph_core::Result<f64>>()?;
            let transforms: Vec<Value> = model
                .transform()
                .coordinates()
                .iter()
                .map(|c| match c {
                    CoordinateTransform::Identity => json!("identity"),
                    CoordinateTransform::Piecewise(pl) => {
                        let (x, y) = pl.knots();
                        json!({"x": vector_json(x), "y": vector_json(y)})
                    }
                })
                .collect();
            doc.parameters.insert("transforms".into(), Value::Array(transforms));
            doc.parameters.insert(
                "winsorization".into(),
                model.transform().delta().map_or(Value::Null, number),
            );
            (model.params().clone(), ll)
        }
    };
    doc.parameters.insert("mu".into(), vector_json(params.mu()));
    doc.parameters.insert("sigma".into(), matrix_json(params.sigma()));
    doc.parameters.insert("epsilon".into(), number(params.epsilon()));
    doc.log_likelihood = log_likelihood;

    let opts = StabilityOptions {
        folds: args.folds,
        repeats: args.repeats,
        threshold: args.threshold,
        rho_grid: args.rho_grid.clone(),
        grid_size: args.grid_size,
        seed: args.seed,
        epsilon: args.epsilon,
        ..StabilityOptions::new(args.seed)
    };
    let (graph, stab) = stability_select(&data, kind, &opts)?;
    if stab.failed_repeats > 0 {
        let _ = writeln!(
            stderr,
            "warning: {} of {} repeats failed and were left out of the frequencies",
            stab.failed_repeats, args.repeats
        );
    }
    let pc = partial_correlations(params.sigma())?;
    let edges = EdgeReport {
        records: stab
            .frequencies()
            .into_iter()
            .map(|(i, j, f)| EdgeRecord {
                i,
                j,
                statistic: f64::NAN,
                p_value: f64::NAN,
                adjusted_p: f64::NAN,
                selected: graph.has_edge(i, j),
                stability_frequency: Some(f),
                weight: Some(pc[(i, j)]),
            })
            .collect(),
    };
    doc.edges = edge_entries(&edges);
    doc.stability = Some(StabilitySection::new(&stab, args.folds, args.repeats));
    let d = &mut doc.diagnostics;
    d.insert("condition_number".into(), number(condition_number(params.sigma())));
    d.insert("converged".into(), json!(true));

    write_text(&args.output.join("report.json"), &doc.to_json())?;
    write_graph(&args.output, &Graph::Undirected(graph), &edges)
}

fn fit_cvm(args: &CvmArgs) -> Result<()> {
    let Some(tokens) = &args.ordering else {
        return Err(CliError::config(
            "fit-cvm-dag requires --ordering: the node ordering must be known in advance",
        ));
    };
    if !(0.0..1.0).contains(&args.alpha) {
        return Err(CliError::config(format!(
            "--alpha must lie in [0, 1), got {}",
            args.alpha
        )));
    }
    let data = args.input.load()?;
    let ordering = tokens
        .iter()
        .map(|t| resolve_column(data.column_names(), t))
        .collect::<Result<Vec<_>>>()?;
    let mut config = Map::new();
    config.insert("command".into(), json!("fit-cvm-dag"));
    args.input.echo(&mut config);
    config.insert("ordering".into(), json!(tokens));
    config.insert("alpha".into(), number(args.alpha));
    config.insert("holm".into(), json!(args.holm));

    let options = LrtOptions {
        alpha: args.alpha,
        holm: args.holm,
        candidates: None,
    };
    let selection = cvm_lrt_select(&data, &ordering, &options)?;
    let model = &selection.model;
    let labels = data.column_names();
    let mut doc = report_doc("cvm-dag", None, config, &data);
    doc.parameters.insert(
        "ordering".into(),
        json!(ordering.iter().map(|&v| &labels[v]).collect::<Vec<_>>()),
    );
    doc.parameters.insert("mu".into(), vector_json(model.mu()));
    doc.parameters.insert("kappa".into(), vector_json(model.kappa()));
    let lambda: Vec<Value> = model
        .dag()
        .edges()
        .into_iter()
        .map(|(i, j)| json!({"parent": labels[i], "child": labels[j], "value": number(model.coefficient(i, j))}))
        .collect();
    doc.parameters.insert("lambda".into(), Value::Array(lambda));
    doc.log_likelihood = selection.log_likelihood;
    doc.edges = edge_entries(&selection.report);
    doc.diagnostics.insert("converged".into(), json!(true));

    write_text(&args.output.join("report.json"), &doc.to_json())?;
    write_graph(
        &args.output,
        &Graph::Directed(selection.dag().clone()),
        &selection.report,
    )
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GaussianParamsFile {
    mu: Vec<f64>,
    sigma: Vec<Vec<f64>>,
    #[serde(default)]
    labels: Option<Vec<String>>,
}

/// Vertices are 1-based; `lambda[j]` pairs with `parents[j]`.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CvmParamsFile {
    ordering: Vec<usize>,
    parents: Vec<Vec<usize>>,
    mu: Vec<f64>,
    kappa: Vec<f64>,
    lambda: Vec<Vec<f64>>,
    #[serde(default)]
    labels: Option<Vec<String>>,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::parse(&path.display().to_string(), e.to_string()))
}

fn default_labels(p: usize) -> Vec<String> {
    (1..=p).map(|j| format!("x{j}")).collect()
}

fn matrix_from_rows(rows: &[Vec<f64>], p: usize) -> Result<Matrix> {
    if rows.len() != p || rows.iter().any(|r| r.len() != p) {
        return Err(CliError::config(format!("sigma must be {p}x{p}")));
    }
    Ok(Matrix::from_fn(p, p, |i, j| rows[i][j]))
}

/// Σ = s·Ω⁻¹ for the chain precision with unit diagonal and −0.4 between
/// neighbours.
fn chain_covariance(p: usize, scale: f64) -> Result<Matrix> {
    let omega = Matrix::from_fn(p, p, |i, j| {
        if i == j {
            1.0
        } else if i.abs_diff(j) == 1 {
            -0.4
        } else {
            0.0
        }
    });
    Ok(torograph_core::linalg::inverse_spd(&omega)? * scale)
}

fn gaussian_params(args: &SimulateArgs, scale: f64) -> Result<(Vec<f64>, Matrix, Vec<String>)> {
    match &args.params {
        Some(path) => {
            let f: GaussianParamsFile = read_json(path)?;
            let p = f.mu.len();
            check_p(args.p, p)?;
            let labels = f.labels.unwrap_or_else(|| default_labels(p));
            Ok((f.mu, matrix_from_rows(&f.sigma, p)?, labels))
        }
        None => {
            let p = required_p(args.p)?;
            Ok((vec![0.0; p], chain_covariance(p, scale)?, default_labels(p)))
        }
    }
}

fn check_p(requested: Option<usize>, actual: usize) -> Result<()> {
    match requested {
        Some(p) if p != actual => Err(CliError::config(format!(
            "--p {p} disagrees with the parameter file (p = {actual})"
        ))),
        _ => Ok(()),
    }
}

fn required_p(p: Option<usize>) -> Result<usize> {
    match p {
        Some(p) if p >= 1 => Ok(p),
        Some(_) => Err(CliError::config("--p must be at least 1")),
        None => Err(CliError::config("simulate needs --p or --params")),
    }
}

fn relabel(data: AngleMatrix, labels: Vec<String>) -> Result<AngleMatrix> {
    Ok(AngleMatrix::from_radians(
        data.n(),
        data.p(),
        data.as_slice().to_vec(),
        labels,
    )?)
}

fn simulate(args: &SimulateArgs, stdout: &mut dyn Write) -> Result<()> {
    if args.n == 0 {
        return Err(CliError::config("--n must be at least 1"));
    }
    let data = match args.model {
        SimModel::Wn => {
            let (mu, sigma, labels) = gaussian_params(args, 0.5)?;
            relabel(wn_sample(&WnParams::new(mu, sigma)?, args.n, args.seed)?.angles, labels)?
        }
        SimModel::Isn => {
            let (mu, sigma, labels) = gaussian_params(args, 1.0)?;
            relabel(
                isn_sample(&IsnParams::new(mu, sigma, DEFAULT_EPSILON)?, args.n, args.seed)?,
                labels,
            )?
        }
        SimModel::Cvm => {
            let model = match &args.params {
                Some(path) => {
                    let f: CvmParamsFile = read_json(path)?;
                    let p = f.mu.len();
                    check_p(args.p, p)?;
                    let zero_based = |v: &[usize]| -> Result<Vec<usize>> {
                        v.iter()
                            .map(|&k| k.checked_sub(1).ok_or_else(|| CliError::config("vertices are 1-based")))
                            .collect()
                    };
                    let ordering = zero_based(&f.ordering)?;
                    let parents = f.parents.iter().map(|pa| zero_based(pa)).collect::<Result<Vec<_>>>()?;
                    let labels = f.labels.unwrap_or_else(|| default_labels(p));
                    // The DAG keeps parents in ordering order; realign the coefficients.
                    let dag = Dag::new(ordering, parents.clone(), labels)?;
                    let mut lambda = Vec::with_capacity(p);
                    for (j, given) in parents.iter().enumerate() {
                        if f.lambda.get(j).map(Vec::len) != Some(given.len()) {
                            return Err(CliError::config(format!(
                                "lambda for node {} does not match its parents",
                                j + 1
                            )));
                        }
                        let coef = dag
                            .parents(j)
                            .iter()
                            .map(|pa| f.lambda[j][given.iter().position(|x| x == pa).expect("same set")])
                            .collect();
                        lambda.push(coef);
                    }
                    CvmDagModel::new(dag, f.mu, f.kappa, lambda)?
                }
                None => {
                    let p = required_p(args.p)?;
                    let parents = (0..p).map(|j| if j == 0 { vec![] } else { vec![j - 1] }).collect();
                    let dag = Dag::new((0..p).collect(), parents, default_labels(p))?;
                    let lambda = (0..p).map(|j| if j == 0 { vec![] } else { vec![1.0] }).collect();
                    CvmDagModel::new(dag, vec![0.0; p], vec![2.0; p], lambda)?
                }
            };
            cvm_sample(&model, args.n, args.seed)
        }
    };
    let bytes = angles_to_csv(&data, AngleUnit::from_degrees_flag(args.degrees))?;
    match &args.output {
        Some(path) => write_atomic(path, &bytes),
        None => stdout
            .write_all(&bytes)
            .map_err(|e| CliError::io(Path::new("<stdout>"), e)),
    }
}

fn ci_query(args: &CiQueryArgs, stdout: &mut dyn Write) -> Result<()> {
    let (labels, method, sigma_or_graph) = if let Some(path) = &args.report {
        let doc: Value = read_json(path)?;
        let bad = || {
            CliError::parse(
                &path.display().to_string(),
                "report has no data.labels and parameters.sigma",
            )
        };
        let labels: Vec<String> = serde_json::from_value(doc["data"]["labels"].clone()).map_err(|_| bad())?;
        let rows: Vec<Vec<f64>> = serde_json::from_value(doc["parameters"]["sigma"].clone()).map_err(|_| bad())?;
        let sigma = matrix_from_rows(&rows, labels.len())?;
        (labels, "precision", Ok(sigma))
    } else {
        let path = args.graph.as_ref().expect("clap enforces one source");
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let graph = match parse_graph_json(&text)? {
            Graph::Undirected(g) => g,
            Graph::Directed(_) => return Err(CliError::config("separation queries need an undirected graph")),
        };
        (graph.labels().to_vec(), "separation", Err(graph))
    };
    let resolve =
        |tokens: &[String]| -> Result<Vec<usize>> { tokens.iter().map(|t| resolve_column(&labels, t)).collect() };
    let (a, c, s) = (resolve(&args.a)?, resolve(&args.c)?, resolve(&args.s)?);
    let independent = match &sigma_or_graph {
        Ok(sigma) => isn_ci_query(sigma, &a, &c, &s)?,
        Err(graph) => separates(graph, &a, &c, &s)?,
    };
    let names = |idx: &[usize]| idx.iter().map(|&k| labels[k].clone()).collect::<Vec<_>>();
    let answer = json!({
        "a": names(&a),
        "c": names(&c),
        "s": names(&s),
        "method": method,
        "independent": independent,
    });
    let text = format!("{}\n", serde_json::to_string_pretty(&answer).expect("plain JSON"));
    match &args.output {
        Some(path) => write_text(path, &text),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| CliError::io(Path::new("<stdout>"), e)),
    }
}

fn separates(graph: &UndirectedGraph, a: &[usize], c: &[usize], s: &[usize]) -> Result<bool> {
    Ok(graph.separates(a, c, s)?)
}

fn summary(args: &SummaryArgs, stderr: &mut dyn Write) -> Result<()> {
    let data = args.input.load()?;
    let pairs = args
        .pairs
        .iter()
        .map(|spec| match spec.split_once(':') {
            Some((a, b)) if !a.is_empty() && !b.is_empty() => Ok((a.to_owned(), b.to_owned())),
            _ => Err(CliError::config(format!(
                "column pair must look like phi:psi, got {spec:?}"
            ))),
        })
        .collect::<Result<Vec<_>>>()?;
    let s = circular_summary(&data)?;
    let columns: Vec<Value> = data
        .column_names()
        .iter()
        .enumerate()
        .map(|(j, name)| {
            json!({
                "name": name,
                "mean_direction": number(s.mean_direction[j].radians()),
                "mean_resultant_length": number(s.mean_resultant_length[j]),
                "mardia_variance": number(s.mardia_variance[j]),
                "circular_variance": number(s.circular_variance[j]),
            })
        })
        .collect();
    let mut config = Map::new();
    config.insert("command".into(), json!("summary"));
    args.input.echo(&mut config);
    config.insert("pairs".into(), json!(args.pairs));
    let doc = json!({
        "version": env!("CARGO_PKG_VERSION"),
        "config": config,
        "n": data.n(),
        "p": data.p(),
        "columns": columns,
    });
    write_text(
        &args.output.join("summary.json"),
        &format!("{}\n", serde_json::to_string_pretty(&doc).expect("plain JSON")),
    )?;
    if !export_ramachandran(&data, &pairs, &args.output.join("ramachandran.csv"))? {
        let _ = writeln!(
            stderr,
            "warning: no column pairs requested; Ramachandran export skipped"
        );
    }
    Ok(())
}
