//! Command-line front end. `run` does the work and returns the process exit
//! code; errors map to 2 (config), 3 (data / I/O) and 4 (numeric).

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::cca::CcaTransform;
use crate::config::{DatasetSource, PipelineConfig};
use crate::error::{Error, Result};
use crate::matrixio::{load_dataset, load_matrix, save_dataset, MatrixFormat};
use crate::mcca::MccaPlan;
use crate::metrics::MetricsReport;
use crate::netspec::{analyze, parse_stack, preset, StackRow};
use crate::noise::{gen_classification, ClassTaskSpec};
use crate::pipeline::{compare_arms, load_data, noise_sweep_on, run_on, ArmResult, PipelineOutcome, SweepRow};
use crate::svm::SvmModel;

#[derive(Debug, Parser)]
#[command(name = "mvfusion", version, about = "Multi-view CCA fusion, linear SVM and evaluation toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Text,
    Csv,
    JsonLines,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MatrixFileFormat {
    Csv,
    Fmat,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    /// Overrides `[run] seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides `[run] output_dir`.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
    pub format: OutputFormat,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the configured synthetic dataset and write manifests.
    Synth {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum, default_value_t = MatrixFileFormat::Csv)]
        matrix_format: MatrixFileFormat,
    },
    /// Fuse, train, evaluate and write the report, plan and model.
    Pipeline {
        #[command(flatten)]
        run: RunArgs,
        /// Also evaluate single views, unfused stacking, the CCA pair and MCCA.
        #[arg(long)]
        compare: bool,
    },
    /// Train on clean data and evaluate on noise-corrupted test patches.
    NoiseSweep {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Conv-stack parameter counts and receptive fields.
    Netspec {
        /// Named comparison: 3x3-vs-7x7 or 3x3-vs-5x5.
        #[arg(long)]
        preset: Option<String>,
        /// Stack descriptor `k:d[:stride]`; repeatable.
        #[arg(long = "stack", value_name = "K:D[:S]")]
        stacks: Vec<String>,
        /// Channel count K.
        #[arg(short = 'K', long, default_value_t = 64)]
        channels: u64,
        #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
        format: OutputFormat,
    },
    /// Print a serialized artifact (matrix, transform, plan, model, dataspec,
    /// manifest) as text.
    Inspect {
        path: PathBuf,
        #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
        format: OutputFormat,
    },
}

/// Parses `args`, runs the command, and returns the exit code. Errors are
/// written to `err`.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = if e.use_stderr() {
                write!(err, "{e}")
            } else {
                write!(out, "{e}")
            };
            return code;
        }
    };
    match run(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Synth { run, matrix_format } => cmd_synth(run, *matrix_format, out),
        Command::Pipeline { run, compare } => cmd_pipeline(run, *compare, out),
        Command::NoiseSweep { run } => cmd_noise_sweep(run, out),
        Command::Netspec {
            preset,
            stacks,
            channels,
            format,
        } => cmd_netspec(preset.as_deref(), stacks, *channels, *format, out),
        Command::Inspect { path, format } => cmd_inspect(path, *format, out),
    }
}

fn emit(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes())
        .map_err(|e| Error::io("<stdout>", e))
}

fn write_file(dir: &Path, name: &str, bytes: impl AsRef<[u8]>) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn resolve_config(run: &RunArgs) -> Result<PipelineConfig> {
    let mut cfg = PipelineConfig::load(&run.config)?;
    if let Some(seed) = run.seed {
        cfg = cfg.with_seed(seed);
    }
    if let Some(dir) = &run.out {
        cfg.output_dir = dir.clone();
    }
    Ok(cfg)
}

fn json_line(value: &impl Serialize) -> String {
    let mut s = serde_json::to_string(value).expect("plain data serializes");
    s.push('\n');
    s
}

fn cmd_synth(run: &RunArgs, matrix_format: MatrixFileFormat, out: &mut dyn Write) -> Result<()> {
    let cfg = resolve_config(run)?;
    let DatasetSource::Generator { spec, .. } = &cfg.dataset else {
        return Err(Error::Config("synth needs a generator dataset, not manifests".into()));
    };
    let data = gen_classification(spec).map_err(|e| e.in_stage("noise_sim", "generate"))?;
    let dir = &cfg.output_dir;
    create_dir(dir)?;
    let format = match matrix_format {
        MatrixFileFormat::Csv => MatrixFormat::Csv,
        MatrixFileFormat::Fmat => MatrixFormat::Fmat,
    };
    let train = save_dataset(&data.train, dir, "train", format).map_err(|e| e.in_stage("matrixio", "write train"))?;
    let test = save_dataset(&data.test, dir, "test", format).map_err(|e| e.in_stage("matrixio", "write test"))?;
    let dataspec = write_file(dir, "dataset.dataspec", spec.to_dataspec())?;
    let files = [("train_manifest", train), ("test_manifest", test), ("dataspec", dataspec)];
    let text = match run.format {
        OutputFormat::Text => files
            .iter()
            .map(|(k, p)| format!("{k}: {}\n", p.display()))
            .collect(),
        OutputFormat::Csv => {
            let mut s = String::from("artifact,path\n");
            for (k, p) in &files {
                let _ = writeln!(s, "{k},{}", p.display());
            }
            s
        }
        OutputFormat::JsonLines => files
            .iter()
            .map(|(k, p)| json_line(&json!({"artifact": k, "path": p})))
            .collect(),
    };
    emit(out, &text)
}

/// Machine-readable run summary.
#[derive(Debug, Serialize)]
pub struct Summary<'a> {
    pub accuracy: f64,
    pub fusion: String,
    pub views: &'a [usize],
    pub fused_dim: usize,
    pub seeds: Seeds,
    pub report: &'a MetricsReport,
    pub config: &'a PipelineConfig,
    pub effective_config: String,
}

#[derive(Debug, Serialize)]
pub struct Seeds {
    pub run: u64,
    pub dataset: Option<u64>,
    pub svm: u64,
}

pub fn summary<'a>(cfg: &'a PipelineConfig, outcome: &'a PipelineOutcome) -> Summary<'a> {
    Summary {
        accuracy: outcome.accuracy(),
        fusion: outcome.fusion.method.to_string(),
        views: &outcome.fusion.views,
        fused_dim: outcome.model.dim(),
        seeds: Seeds {
            run: cfg.seed,
            dataset: match &cfg.dataset {
                DatasetSource::Generator { spec, .. } => Some(spec.seed),
                DatasetSource::Manifests { .. } => None,
            },
            svm: cfg.svm.seed,
        },
        report: &outcome.report,
        config: cfg,
        effective_config: cfg.to_text(),
    }
}

fn report_lines(report: &MetricsReport, format: OutputFormat) -> String {
    match format {
        OutputFormat::Text => report.to_text(),
        OutputFormat::Csv => report.to_csv(),
        OutputFormat::JsonLines => {
            let mut s = String::new();
            for (name, m) in report.class_names.iter().zip(&report.per_class) {
                s.push_str(&json_line(&json!({"class": name, "metrics": m})));
            }
            s.push_str(&json_line(&json!({"class": "OVERALL", "metrics": report.overall})));
            s
        }
    }
}

fn arms_text(arms: &[ArmResult], format: OutputFormat) -> String {
    let views = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(" ");
    match format {
        OutputFormat::Text => {
            let mut s = format!("{:<16} {:<6} {:<10} {:>9}\n", "arm", "fusion", "views", "accuracy");
            for a in arms {
                let _ = writeln!(s, "{:<16} {:<6} {:<10} {:>9.6}", a.arm, a.fusion.to_string(), views(&a.views), a.accuracy);
            }
            s
        }
        OutputFormat::Csv => arms_csv(arms),
        OutputFormat::JsonLines => arms.iter().map(json_line).collect(),
    }
}

fn arms_csv(arms: &[ArmResult]) -> String {
    let mut s = String::from("arm,fusion,views,accuracy\n");
    for a in arms {
        let v: Vec<String> = a.views.iter().map(usize::to_string).collect();
        let _ = writeln!(s, "{},{},{},{:?}", a.arm, a.fusion, v.join(" "), a.accuracy);
    }
    s
}

fn cmd_pipeline(run: &RunArgs, compare: bool, out: &mut dyn Write) -> Result<()> {
    let cfg = resolve_config(run)?;
    let data = load_data(&cfg)?;
    let outcome = run_on(&cfg, &data)?;
    let dir = &cfg.output_dir;
    create_dir(dir)?;
    write_file(dir, "report.csv", outcome.report.to_csv())?;
    write_file(dir, "report.txt", outcome.report.to_text())?;
    write_file(dir, "effective.conf", cfg.to_text())?;
    write_file(dir, "model.svmm", outcome.model.to_bytes())?;
    write_file(dir, "history.csv", outcome.model.history_csv())?;
    if let Some(plan) = &outcome.fusion.plan {
        write_file(dir, "plan.mcca", plan.to_bytes())?;
    }
    let mut json = serde_json::to_string_pretty(&summary(&cfg, &outcome)).expect("plain data serializes");
    json.push('\n');
    write_file(dir, "summary.json", json)?;

    let mut text = report_lines(&outcome.report, run.format);
    if compare {
        let arms = compare_arms(&cfg, &data)?;
        write_file(dir, "comparison.csv", arms_csv(&arms))?;
        if run.format == OutputFormat::Text {
            text.push('\n');
        }
        text.push_str(&arms_text(&arms, run.format));
    }
    emit(out, &text)
}

fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("level,accuracy\n");
    for r in rows {
        let _ = writeln!(s, "{:?},{:?}", r.level, r.accuracy);
    }
    s
}

fn cmd_noise_sweep(run: &RunArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = resolve_config(run)?;
    let data = load_data(&cfg)?;
    let rows = noise_sweep_on(&cfg, &data)?;
    let dir = &cfg.output_dir;
    create_dir(dir)?;
    write_file(dir, "noise_sweep.csv", sweep_csv(&rows))?;
    let mut dat = String::from("# noise_percent accuracy_percent\n");
    for r in &rows {
        let _ = writeln!(dat, "{} {}", r.level * 100.0, r.accuracy * 100.0);
    }
    write_file(dir, "noise_sweep.dat", dat)?;
    write_file(dir, "effective.conf", cfg.to_text())?;
    let text = match run.format {
        OutputFormat::Text => {
            let mut s = format!("{:>7} {:>9}\n", "level", "accuracy");
            for r in &rows {
                let _ = writeln!(s, "{:>6.2}% {:>9.6}", r.level * 100.0, r.accuracy);
            }
            s
        }
        OutputFormat::Csv => sweep_csv(&rows),
        OutputFormat::JsonLines => rows.iter().map(json_line).collect(),
    };
    emit(out, &text)
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// `49/27` style reduced fraction of the parameter ratio.
pub fn exact_ratio(row: &StackRow, first: &StackRow) -> String {
    let g = gcd(row.params, first.params).max(1);
    format!("{}/{}", row.params / g, first.params / g)
}

pub fn netspec_table(rows: &[StackRow], format: OutputFormat) -> String {
    let first = &rows[0];
    match format {
        OutputFormat::Text => {
            let mut s = format!(
                "{:<28} {:>9} {:>12} {:>15} {:>9} {:>7} {:>9}\n",
                "stack", "symbolic", "params", "receptive_field", "ratio", "exact", "more"
            );
            for r in rows {
                let _ = writeln!(
                    s,
                    "{:<28} {:>9} {:>12} {:>15} {:>9.4} {:>7} {:>8.1}%",
                    r.spec.to_string(),
                    r.symbolic,
                    r.params,
                    r.receptive_field,
                    r.ratio_to_first,
                    exact_ratio(r, first),
                    (r.ratio_to_first - 1.0) * 100.0
                );
            }
            s
        }
        OutputFormat::Csv => {
            let mut s = String::from(
                "filter_size,depth,channels,stride,symbolic,params,receptive_field,ratio_to_first,exact_ratio\n",
            );
            for r in rows {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{},{:?},{}",
                    r.spec.filter_size,
                    r.spec.depth,
                    r.spec.channels,
                    r.spec.stride,
                    r.symbolic,
                    r.params,
                    r.receptive_field,
                    r.ratio_to_first,
                    exact_ratio(r, first)
                );
            }
            s
        }
        OutputFormat::JsonLines => rows.iter().map(json_line).collect(),
    }
}

fn cmd_netspec(
    preset_name: Option<&str>,
    stacks: &[String],
    channels: u64,
    format: OutputFormat,
    out: &mut dyn Write,
) -> Result<()> {
    let mut specs = match preset_name {
        Some(name) => preset(name, channels)?,
        None => Vec::new(),
    };
    for s in stacks {
        specs.push(parse_stack(s, channels)?);
    }
    if specs.is_empty() {
        specs = preset("3x3-vs-7x7", channels)?;
    }
    let rows = analyze(&specs).map_err(|e| e.in_stage("netspec", "analyze"))?;
    emit(out, &netspec_table(&rows, format))
}

fn matrix_text(m: &nalgebra::DMatrix<f64>) -> String {
    let mut s = String::new();
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        let _ = writeln!(s, "{}", cells.join(","));
    }
    s
}

/// Describes one artifact, detected by its magic bytes or header line.
pub fn inspect_bytes(path: &Path, bytes: &[u8], format: OutputFormat) -> Result<String> {
    let record = |kind: &str, fields: serde_json::Value, body: String| match format {
        OutputFormat::JsonLines => {
            let mut obj = fields;
            obj["kind"] = json!(kind);
            json_line(&obj)
        }
        _ => {
            let mut s = format!("kind: {kind}\n");
            if let Some(map) = fields.as_object() {
                for (k, v) in map {
                    let _ = writeln!(s, "{k}: {}", v.to_string().trim_matches('"'));
                }
            }
            s.push_str(&body);
            s
        }
    };
    if bytes.starts_with(b"FMAT1\0") {
        let m = load_matrix(path, MatrixFormat::Fmat)?;
        let data = m.data();
        return Ok(match format {
            OutputFormat::Csv => matrix_text(data),
            _ => record("matrix", json!({"rows": data.nrows(), "cols": data.ncols()}), matrix_text(data)),
        });
    }
    if bytes.starts_with(b"CCAT1\0") {
        let t = CcaTransform::from_bytes(bytes)?;
        return Ok(record(
            "cca_transform",
            json!({"p": t.p(), "q": t.q(), "r": t.r(), "ridge_rel": t.ridge, "gamma": t.gamma.as_slice()}),
            format!("a:\n{}b:\n{}", matrix_text(&t.a), matrix_text(&t.b)),
        ));
    }
    if bytes.starts_with(b"MCCA1\0") {
        let plan = MccaPlan::from_bytes(bytes)?;
        let stages: Vec<_> = plan
            .stages
            .iter()
            .map(|s| {
                json!({
                    "left": s.left,
                    "right": s.right,
                    "output": s.output,
                    "output_rank": s.output_rank,
                    "gamma": s.transform.as_ref().map(|t| t.gamma.as_slice().to_vec()),
                })
            })
            .collect();
        return Ok(match format {
            OutputFormat::JsonLines => record(
                "mcca_plan",
                json!({"lambda": plan.lambda(), "fuse_mode": plan.fuse_mode, "input_ranks": plan.input_ranks,
                       "input_dims": plan.input_dims, "stages": stages}),
                String::new(),
            ),
            _ => record(
                "mcca_plan",
                json!({"lambda": plan.lambda(), "fuse_mode": plan.fuse_mode}),
                plan.describe(),
            ),
        });
    }
    if bytes.starts_with(b"SVMM1\0") {
        let model = SvmModel::from_bytes(bytes)?;
        return Ok(record(
            "svm_model",
            json!({"classes": model.classes(), "dim": model.dim(), "loss": model.loss}),
            format!("weights (last column is the bias):\n{}", matrix_text(&model.weights)),
        ));
    }
    let text = std::str::from_utf8(bytes).map_err(|_| Error::Parse(format!("{}: unknown binary artifact", path.display())))?;
    if text.starts_with("DATASPEC1") {
        let spec = ClassTaskSpec::from_dataspec(text)?;
        let mut fields = serde_json::Map::new();
        for (k, v) in spec.properties() {
            fields.insert(k, json!(v));
        }
        return Ok(record("dataspec", serde_json::Value::Object(fields), String::new()));
    }
    if path.extension().is_some_and(|e| e == "manifest") {
        let ds = load_dataset(path)?;
        let views: Vec<_> = ds
            .views
            .iter()
            .map(|v| json!({"name": v.name, "dim": v.p()}))
            .collect();
        return Ok(record(
            "dataset",
            json!({"samples": ds.n(), "class_count": ds.class_count, "views": views}),
            String::new(),
        ));
    }
    if path.extension().is_some_and(|e| e == "csv") {
        if let Ok(m) = load_matrix(path, MatrixFormat::Csv) {
            let data = m.data();
            return Ok(match format {
                OutputFormat::Csv => matrix_text(data),
                _ => record("matrix", json!({"rows": data.nrows(), "cols": data.ncols()}), matrix_text(data)),
            });
        }
    }
    Err(Error::Parse(format!("{}: unrecognized artifact", path.display())))
}

fn cmd_inspect(path: &Path, format: OutputFormat, out: &mut dyn Write) -> Result<()> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let text = inspect_bytes(path, &bytes, format).map_err(|e| e.in_stage("cli", "inspect"))?;
    emit(out, &text)
}
