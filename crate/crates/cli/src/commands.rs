//! Subcommand bodies. Each one merges flags over an optional config file,
//! validates the result against the shipped schema, then hands typed values
//! to `covert_core`.

use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use covert_core::budget::{converse_log_ratio, gamma_achievable, l_theoretical, normalized_gaps};
use covert_core::colored::{parse_matrix_csv, parse_matrix_json, whiten, ROUND_TRIP_TOLERANCE};
use covert_core::nalgebra::{DMatrix, DVector};
use covert_core::simkit::{run_coupled, run_sweep, SweepConfig, SweepReport};
use covert_core::{BudgetSpec, ChannelKind, CodingExperiment, ColoredNoiseModel, Decoder, GGParams, LStatus};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{CliError, CliResult};
use crate::schema::{merge, validate};
use crate::store::{run_id, IndexEntry, Store};

/// Largest KL mismatch tolerated by the whitening check.
pub const KL_GAP_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name,
            passed,
            detail: detail.into(),
        }
    }
}

/// JSON document (already carrying `checks` and `passed`) plus a CSV view.
pub struct Report {
    pub json: Value,
    pub csv: String,
    pub passed: bool,
}

impl Report {
    fn new(command: &str, body: Value, checks: Vec<Check>, csv: String) -> Self {
        let passed = checks.iter().all(|c| c.passed);
        let mut json = json!({ "command": command });
        merge(&mut json, body);
        json["checks"] = serde_json::to_value(&checks).expect("checks serialize");
        json["passed"] = Value::Bool(passed);
        Self { json, csv, passed }
    }
}

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn parse_json(path: &Path, text: &str) -> CliResult<Value> {
    serde_json::from_str(text).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        message: format!("not valid JSON: {e}"),
    })
}

/// File values overlaid by flag values, validated against `#/$defs/<def>`.
fn resolve(def: &str, file: Option<&Path>, flags: Value) -> CliResult<Value> {
    let mut config = match file {
        Some(path) => parse_json(path, &read_text(path)?)?,
        None => json!({}),
    };
    merge(&mut config, flags);
    validate(def, &config)?;
    Ok(config)
}

fn typed<T: DeserializeOwned>(config: &Value) -> CliResult<T> {
    serde_json::from_value(config.clone()).map_err(|e| CliError::Usage(format!("configuration rejected: {e}")))
}

fn csv_text<R: Serialize>(rows: &[R]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("in-memory CSV writes succeed");
    }
    String::from_utf8(w.into_inner().expect("in-memory CSV flushes")).expect("CSV is UTF-8")
}

/// `Some(true)` for a set switch, `None` otherwise so file values survive.
fn switch(on: bool) -> Option<bool> {
    on.then_some(true)
}

fn non_empty(v: &[f64]) -> Option<&[f64]> {
    (!v.is_empty()).then_some(v)
}

#[derive(Debug, Args)]
pub struct DistArgs {
    /// JSON parameter block (`#/$defs/dist`); flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Density at each listed point.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pdf: Vec<f64>,
    /// Distribution function at each listed point.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    cdf: Vec<f64>,
    /// Differential entropy in nats.
    #[arg(long)]
    entropy: bool,
    /// `E|Z|^p`.
    #[arg(long)]
    moment_p: bool,
    /// `E Z^2`.
    #[arg(long)]
    second_moment: bool,
    /// Draw this many samples.
    #[arg(long)]
    sample: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Deserialize)]
struct DistConfig {
    noise: GGParams,
    #[serde(default)]
    pdf: Vec<f64>,
    #[serde(default)]
    cdf: Vec<f64>,
    #[serde(default)]
    entropy: bool,
    #[serde(default)]
    moment_p: bool,
    #[serde(default)]
    second_moment: bool,
    sample: Option<usize>,
    #[serde(default)]
    seed: u64,
}

#[derive(Serialize)]
struct DistCsvRow {
    quantity: &'static str,
    argument: Option<f64>,
    value: f64,
}

pub fn dist(args: &DistArgs) -> CliResult<Report> {
    let flags = json!({
        "noise": { "p": args.p, "alpha": args.alpha },
        "pdf": non_empty(&args.pdf),
        "cdf": non_empty(&args.cdf),
        "entropy": switch(args.entropy),
        "moment_p": switch(args.moment_p),
        "second_moment": switch(args.second_moment),
        "sample": args.sample,
        "seed": args.seed,
    });
    let config = resolve("dist", args.config.as_deref(), flags)?;
    let c: DistConfig = typed(&config)?;
    let noise = c.noise;
    // With no query at all, report the scalar summaries.
    let summaries = !(c.entropy || c.moment_p || c.second_moment) && c.pdf.is_empty() && c.cdf.is_empty() && c.sample.is_none();
    let mut body = json!({ "config": config, "noise": noise });
    let mut rows = Vec::new();
    let mut scalar = |name: &'static str, value: f64, body: &mut Value| {
        body[name] = json!(value);
        rows.push(DistCsvRow {
            quantity: name,
            argument: None,
            value,
        });
    };
    if c.entropy || summaries {
        scalar("entropy", noise.entropy(), &mut body);
    }
    if c.moment_p || summaries {
        scalar("moment_p", noise.abs_moment_p(), &mut body);
    }
    if c.second_moment || summaries {
        scalar("second_moment", noise.second_moment(), &mut body);
    }
    for (name, points, f) in [
        ("pdf", &c.pdf, GGParams::pdf as fn(&GGParams, f64) -> f64),
        ("cdf", &c.cdf, GGParams::cdf),
    ] {
        if points.is_empty() {
            continue;
        }
        let values: Vec<Value> = points
            .iter()
            .map(|&z| {
                let value = f(&noise, z);
                rows.push(DistCsvRow {
                    quantity: name,
                    argument: Some(z),
                    value,
                });
                json!({ "z": z, "value": value })
            })
            .collect();
        body[name] = Value::Array(values);
    }
    if let Some(count) = c.sample {
        let sample = noise.sample(count, c.seed)?;
        for (i, &v) in sample.values.iter().enumerate() {
            rows.push(DistCsvRow {
                quantity: "sample",
                argument: Some(i as f64),
                value: v,
            });
        }
        body["sample"] = serde_json::to_value(&sample).expect("samples serialize");
    }
    Ok(Report::new("dist", body, Vec::new(), csv_text(&rows)))
}

#[derive(Debug, Args)]
pub struct BudgetArgs {
    /// JSON parameter block (`#/$defs/budget`); flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Total divergence budget in nats.
    #[arg(long)]
    delta: Option<f64>,
    /// Blocklength.
    #[arg(long)]
    n: Option<u64>,
    /// `gg_memoryless` (default) or `gaussian_memory`.
    #[arg(long)]
    channel: Option<String>,
    /// Also show the rate figures in bits.
    #[arg(long)]
    bits: bool,
}

#[derive(Deserialize)]
struct BudgetConfig {
    noise: GGParams,
    delta: f64,
    n: u64,
    #[serde(default = "default_channel")]
    channel: ChannelKind,
}

fn default_channel() -> ChannelKind {
    ChannelKind::GgMemoryless
}

#[derive(Serialize)]
struct BudgetCsvRow {
    p: f64,
    alpha: f64,
    delta: f64,
    n: u64,
    gamma_n: f64,
    log_ratio: f64,
    per_symbol_kl: f64,
    total_kl: f64,
    rate_cap_nats: f64,
    normalized_rate: f64,
    gamma_converse_max: f64,
    l_theoretical: f64,
    l_status: LStatus,
}

pub fn budget(args: &BudgetArgs) -> CliResult<Report> {
    let flags = json!({
        "noise": { "p": args.p, "alpha": args.alpha },
        "delta": args.delta,
        "n": args.n,
        "channel": args.channel,
    });
    let config = resolve("budget", args.config.as_deref(), flags)?;
    let c: BudgetConfig = typed(&config)?;
    let spec = BudgetSpec::new(c.noise, c.delta, c.n)?;
    let result = gamma_achievable(&spec);
    let converse_log = converse_log_ratio(&spec);
    let gamma_converse_max = c.noise.alpha() * converse_log.exp();
    let (l_value, l_status) = l_theoretical(&c.noise, c.channel);
    let mut body = json!({
        "config": config,
        "result": result,
        "gamma_converse_max": gamma_converse_max,
        "converse_log_ratio": converse_log,
        "normalized_gaps": normalized_gaps(&spec),
        "l_theoretical": { "value": l_value, "status": l_status },
    });
    if args.bits {
        let ln2 = std::f64::consts::LN_2;
        body["bits"] = json!({
            "rate_cap": result.rate_cap_nats / ln2,
            "normalized_rate": result.normalized_rate / ln2,
            "l_theoretical": l_value / ln2,
        });
    }
    let checks = vec![
        Check::new(
            "total_kl_within_budget",
            result.total_kl <= c.delta * (1.0 + 1e-12),
            format!("n D = {:e}, delta = {:e}", result.total_kl, c.delta),
        ),
        Check::new(
            "converse_dominates",
            converse_log >= result.log_ratio,
            format!("ln(gamma/alpha): achievable {:e}, converse {:e}", result.log_ratio, converse_log),
        ),
    ];
    let csv = csv_text(&[BudgetCsvRow {
        p: c.noise.p(),
        alpha: c.noise.alpha(),
        delta: c.delta,
        n: c.n,
        gamma_n: result.gamma_n,
        log_ratio: result.log_ratio,
        per_symbol_kl: result.per_symbol_kl,
        total_kl: result.total_kl,
        rate_cap_nats: result.rate_cap_nats,
        normalized_rate: result.normalized_rate,
        gamma_converse_max,
        l_theoretical: l_value,
        l_status,
    }]);
    Ok(Report::new("budget", body, checks, csv))
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// JSON parameter block (`#/$defs/sweep`); flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// Comma-separated, strictly increasing blocklengths.
    #[arg(long, value_delimiter = ',')]
    n_list: Vec<u64>,
    /// Target block error probability.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Monte Carlo trials per codebook size.
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// `threshold` or `maximum_likelihood`.
    #[arg(long)]
    decoder: Option<String>,
    #[arg(long)]
    threshold_gamma: Option<f64>,
    /// Trials of the warden test per blocklength.
    #[arg(long)]
    warden_trials: Option<u64>,
    /// Fail unless normalized rates are positive, increasing and capped by the formula.
    #[arg(long)]
    require_trend: bool,
    /// Result directory.
    #[arg(long, env = "COVERT_OUT_DIR", default_value = "covert-results")]
    out: PathBuf,
}

pub fn sweep(args: &SweepArgs) -> CliResult<Report> {
    let flags = json!({
        "noise": { "p": args.p, "alpha": args.alpha },
        "delta": args.delta,
        "n_list": (!args.n_list.is_empty()).then_some(&args.n_list),
        "epsilon": args.epsilon,
        "trials": args.trials,
        "seed": args.seed,
        "decoder": args.decoder,
        "threshold_gamma": args.threshold_gamma,
        "warden_trials": args.warden_trials,
        "require_trend": switch(args.require_trend),
    });
    let config = resolve("sweep", args.config.as_deref(), flags)?;
    let require_trend = config.get("require_trend").and_then(Value::as_bool).unwrap_or(false);
    let mut core_config = config.clone();
    core_config.as_object_mut().expect("validated config is an object").remove("require_trend");
    let sweep: SweepConfig = typed(&core_config)?;
    sweep.validate()?;

    let store = Store::open(&args.out)?;
    let id = run_id("sweep", &config);
    if let Some(mut stored) = store.load(&id)? {
        eprintln!("run {id} already stored under {}; not recomputed", store.root().display());
        let passed = stored.get("passed").and_then(Value::as_bool).unwrap_or(false);
        let csv = read_text(&store.run_path(&id, "csv"))?;
        stored["resumed"] = Value::Bool(true);
        record(&store, &id, &sweep, passed)?;
        return Ok(Report {
            json: stored,
            csv,
            passed,
        });
    }

    let report = run_logged(&sweep)?;
    let mut checks = vec![Check::new(
        "rows_complete",
        report.rows.iter().all(|r| r.failure.is_none()),
        format!("{} of {} blocklengths estimated", report.rows.iter().filter(|r| r.estimate.is_some()).count(), report.rows.len()),
    )];
    if require_trend {
        checks.push(Check::new(
            "trend",
            report.trend_holds(),
            "normalized rates positive, increasing in n and at most the formula cap",
        ));
    }
    let wardens: Vec<_> = report.rows.iter().filter_map(|r| r.warden).collect();
    if !wardens.is_empty() {
        checks.push(Check::new(
            "warden_pinsker",
            wardens.iter().all(|w| w.consistent_with_pinsker()),
            "P_FA + P_MD interval reaches the Pinsker bound at every n",
        ));
    }
    let csv = report.to_csv()?;
    let files = json!({
        "json": store.run_path(&id, "json"),
        "csv": store.run_path(&id, "csv"),
        "plot_data": store.run_path(&id, "dat"),
        "gnuplot": store.run_path(&id, "gp"),
    });
    let body = json!({ "run_id": id, "config": config, "report": report, "files": files, "resumed": false });
    let out = Report::new("sweep", body, checks, csv);

    let mut stored = out.json.clone();
    stored.as_object_mut().expect("report is an object").remove("resumed");
    store.write_atomic(&store.run_path(&id, "csv"), &out.csv)?;
    store.write_atomic(&store.run_path(&id, "dat"), &report.plot_data())?;
    store.write_atomic(&store.run_path(&id, "gp"), &report.gnuplot_script(&format!("{id}.dat")))?;
    // The JSON file marks the run complete, so it goes last.
    store.write_atomic(&store.run_path(&id, "json"), &serde_json::to_string_pretty(&stored).expect("report serializes"))?;
    record(&store, &id, &sweep, out.passed)?;
    Ok(out)
}

/// Runs the sweep one blocklength at a time with a log line per point.
fn run_logged(config: &SweepConfig) -> CliResult<SweepReport> {
    let mut rows = Vec::with_capacity(config.n_list.len());
    let mut head = None;
    for &n in &config.n_list {
        let single = SweepConfig {
            n_list: vec![n],
            ..config.clone()
        };
        let mut part = run_sweep(&single)?;
        let row = part.rows.remove(0);
        match (&row.estimate, &row.failure) {
            (Some(e), _) => eprintln!(
                "n = {n}: |M| = {}, normalized rate {:.4} (formula {:.4}), status {:?}",
                e.message_count, e.normalized, row.theory_normalized, e.status
            ),
            (None, Some(f)) => eprintln!("n = {n}: failed: {f}"),
            (None, None) => eprintln!("n = {n}: no estimate"),
        }
        rows.push(row);
        head.get_or_insert((part.l_theoretical, part.l_status));
    }
    let (l_theoretical, l_status) = head.expect("n_list is non-empty after validation");
    Ok(SweepReport {
        config: config.clone(),
        l_theoretical,
        l_status,
        rows,
    })
}

fn record(store: &Store, id: &str, config: &SweepConfig, passed: bool) -> CliResult<bool> {
    store.record(IndexEntry {
        run_id: id.to_string(),
        command: "sweep".into(),
        p: config.noise.p(),
        alpha: config.noise.alpha(),
        delta: config.delta,
        n_list: config.n_list.iter().map(u64::to_string).collect::<Vec<_>>().join(";"),
        seed: config.seed,
        passed,
        file: format!("runs/{id}.json"),
    })
}

#[derive(Debug, Args)]
pub struct WhitenArgs {
    /// JSON parameter block (`#/$defs/whiten`); flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// AR(1) covariance `rho^|i-j|` with this correlation.
    #[arg(long, allow_negative_numbers = true, requires = "n", conflicts_with = "matrix")]
    ar1: Option<f64>,
    /// Dimension of the AR(1) covariance.
    #[arg(long)]
    n: Option<u64>,
    /// Covariance matrix file, `.json` or headerless `.csv`.
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// Mean vector as a JSON array; zero when absent.
    #[arg(long)]
    mu: Option<PathBuf>,
    /// Per-symbol input power of the Gaussian input used in the divergence check.
    #[arg(long)]
    input_power: Option<f64>,
    /// Run this many coupled white/colored decoding trials.
    #[arg(long)]
    trials: Option<u64>,
    /// Codebook size of the coupled trials.
    #[arg(long)]
    messages: Option<u64>,
    /// Budget of the coupled trials' code.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    decoder: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Deserialize)]
#[serde(rename_all = "snake_case")]
enum MatrixSource {
    Ar1 { rho: f64, n: usize },
    File(PathBuf),
}

#[derive(Deserialize)]
struct WhitenConfig {
    matrix: MatrixSource,
    mu_file: Option<PathBuf>,
    #[serde(default = "default_input_power")]
    input_power: f64,
    trials: Option<u64>,
    #[serde(default = "default_messages")]
    messages: u64,
    #[serde(default = "default_delta")]
    delta: f64,
    #[serde(default = "default_whiten_decoder")]
    decoder: Decoder,
    #[serde(default)]
    seed: u64,
}

fn default_input_power() -> f64 {
    0.01
}

fn default_messages() -> u64 {
    4
}

fn default_delta() -> f64 {
    0.5
}

fn default_whiten_decoder() -> Decoder {
    Decoder::MaximumLikelihood
}

/// Reads a matrix file, naming the offending row and column on failure.
fn load_matrix(path: &Path) -> CliResult<DMatrix<f64>> {
    let text = read_text(path)?;
    let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let located = |row: usize, column: usize, message: String| CliError::Schema {
        instance: format!("{}: row {row}, column {column}", path.display()),
        schema: "/$defs/matrix_file".into(),
        message,
    };
    if is_csv {
        return parse_matrix_csv(&text).map_err(|e| match e {
            covert_core::Error::MatrixEntry { row, column, reason } => located(row, column, reason),
            other => other.into(),
        });
    }
    let value = parse_json(path, &text)?;
    let rows = match value {
        Value::Object(mut map) if map.contains_key("rows") => map.remove("rows").expect("checked"),
        other => other,
    };
    validate("matrix_file", &rows).map_err(|e| match e {
        CliError::Schema { instance, schema, message } => {
            let mut parts = instance.trim_start_matches('/').split('/').map(str::parse::<usize>);
            match (parts.next(), parts.next()) {
                (Some(Ok(row)), Some(Ok(column))) => located(row, column, message),
                (Some(Ok(row)), None) => located(row, 0, message),
                _ => CliError::Schema {
                    instance: format!("{}: {instance}", path.display()),
                    schema,
                    message,
                },
            }
        }
        other => other,
    })?;
    parse_matrix_json(&rows.to_string()).map_err(|e| match e {
        covert_core::Error::MatrixEntry { row, column, reason } => located(row, column, reason),
        other => other.into(),
    })
}

fn load_vector(path: &Path) -> CliResult<Vec<f64>> {
    let value = parse_json(path, &read_text(path)?)?;
    validate("vector_file", &value).map_err(|e| match e {
        CliError::Schema { instance, schema, message } => CliError::Schema {
            instance: format!("{}: {instance}", path.display()),
            schema,
            message,
        },
        other => other,
    })?;
    typed(&value)
}

pub fn whiten_cmd(args: &WhitenArgs) -> CliResult<Report> {
    let matrix = match (args.ar1, &args.matrix) {
        (Some(rho), _) => json!({ "ar1": { "rho": rho, "n": args.n } }),
        (None, Some(file)) => json!({ "file": file }),
        (None, None) => Value::Null,
    };
    let flags = json!({
        "matrix": matrix,
        "mu_file": args.mu,
        "input_power": args.input_power,
        "trials": args.trials,
        "messages": args.messages,
        "delta": args.delta,
        "decoder": args.decoder,
        "seed": args.seed,
    });
    let mut config = match args.config.as_deref() {
        Some(path) => parse_json(path, &read_text(path)?)?,
        None => json!({}),
    };
    // A matrix given on the command line replaces the file's choice outright.
    if !flags["matrix"].is_null() {
        config.as_object_mut().map(|o| o.remove("matrix"));
    }
    merge(&mut config, flags);
    validate("whiten", &config)?;
    let c: WhitenConfig = typed(&config)?;

    let model = match &c.matrix {
        MatrixSource::Ar1 { rho, n } => {
            let ar1 = ColoredNoiseModel::ar1(*n, *rho)?;
            match &c.mu_file {
                Some(path) => ColoredNoiseModel::gaussian(DVector::from_vec(load_vector(path)?), ar1.covariance())?,
                None => ar1,
            }
        }
        MatrixSource::File(path) => {
            let sigma = load_matrix(path)?;
            let mu = match &c.mu_file {
                Some(p) => DVector::from_vec(load_vector(p)?),
                None => DVector::zeros(sigma.nrows()),
            };
            ColoredNoiseModel::gaussian(mu, sigma)?
        }
    };
    let transport = whiten(&model)?;
    let n = transport.dimension();
    let identity = transport.forward_matrix() == &DMatrix::<f64>::identity(n, n);
    let residual = transport.round_trip_residual();
    let input_cov = DMatrix::<f64>::identity(n, n) * c.input_power;
    let (kl_colored, kl_white) = transport.kl_invariance_check(&input_cov)?;
    let gap = (kl_colored - kl_white).abs();

    let mut checks = vec![
        Check::new(
            "round_trip",
            residual <= ROUND_TRIP_TOLERANCE,
            format!("||A A^-1 - I||_F = {residual:e}"),
        ),
        Check::new(
            "kl_invariance",
            gap <= KL_GAP_TOLERANCE,
            format!("|kl_colored - kl_white| = {gap:e}"),
        ),
    ];
    let mut body = json!({
        "config": config,
        "dimension": n,
        "condition_number": transport.condition_number(),
        "round_trip_residual": residual,
        "identity": identity,
        "kl": { "input_power": c.input_power, "kl_colored": kl_colored, "kl_white": kl_white, "gap": gap },
    });
    let mut csv_rows = vec![
        ("dimension", n as f64),
        ("condition_number", transport.condition_number()),
        ("round_trip_residual", residual),
        ("identity", f64::from(u8::from(identity))),
        ("kl_colored", kl_colored),
        ("kl_white", kl_white),
        ("kl_gap", gap),
    ];
    if let Some(trials) = c.trials {
        let budget = BudgetSpec::new(GGParams::standard_normal(), c.delta, n as u64)?;
        let exp = CodingExperiment::new(budget, c.messages, trials, c.seed)?.with_decoder(c.decoder);
        let coupled = run_coupled(&exp, &transport)?;
        checks.push(Check::new(
            "coupled_decisions_identical",
            coupled.all_identical(),
            format!("{} of {} trials decided identically", coupled.identical_decisions, coupled.trials),
        ));
        csv_rows.push(("coupled_identical", coupled.identical_decisions as f64));
        csv_rows.push(("coupled_trials", coupled.trials as f64));
        body["coupled"] = serde_json::to_value(coupled).expect("report serializes");
    }
    #[derive(Serialize)]
    struct Row {
        quantity: &'static str,
        value: f64,
    }
    let rows: Vec<Row> = csv_rows.into_iter().map(|(quantity, value)| Row { quantity, value }).collect();
    Ok(Report::new("whiten", body, checks, csv_text(&rows)))
}
