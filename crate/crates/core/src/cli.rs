//! Command-line front end.
//!
//! Values come from an optional JSON config file and from flags; a flag wins
//! over the file. Output is rendered completely before anything is written,
//! and files are replaced atomically, so a failed run leaves no output.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::baseline::resource_compare;
use crate::basis::BellLabel;
use crate::epp::{run_epp, Mode, NoiseModel};
use crate::error::{Error, Result};
use crate::nbsa::{nbsa_classify, nbsa_truth_table, truth_table_text};
use crate::practical::{
    dispersive_epp_run, factorization_overlap, linspace, simplex_grid, sweep, sweep_csv, time_avg_ff, FiberGeometry,
    FluctuationModel, FluctuationSpec,
};

pub const DEFAULT_TRIALS: u64 = 10_000;
pub const DEFAULT_FF_SAMPLES: usize = 1001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Exhaustive,
    Sampled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

#[derive(Debug, Parser)]
#[command(name = "hyperepp", version, about = "Deterministic hyperentanglement purification simulator")]
struct Cli {
    /// JSON config with keys noise, fluctuation, geometry, baseline, output.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Debug, Default, Args)]
struct NoiseArgs {
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    b: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    d: Option<f64>,
    #[arg(long = "dphi-s")]
    dphi_s: Option<f64>,
    #[arg(long = "dphi-f")]
    dphi_f: Option<f64>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long)]
    trials: Option<u64>,
}

#[derive(Debug, Default, Args)]
struct FluctuationArgs {
    /// constant, uniform-jitter, sinusoid or user-series
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    amplitude: Option<f64>,
    #[arg(long)]
    period: Option<f64>,
    /// Comma-separated absolute phases for user-series.
    #[arg(long, value_delimiter = ',')]
    values: Option<Vec<f64>>,
    #[arg(long)]
    base: Option<f64>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Debug, Default, Args)]
struct GeometryArgs {
    #[arg(long = "l-a1")]
    l_a1: Option<f64>,
    #[arg(long = "l-a2")]
    l_a2: Option<f64>,
    #[arg(long = "l-b1")]
    l_b1: Option<f64>,
    #[arg(long = "l-b2")]
    l_b2: Option<f64>,
    #[arg(long)]
    omega1: Option<f64>,
    #[arg(long)]
    omega2: Option<f64>,
    #[arg(long)]
    v: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Full purification run.
    #[command(allow_negative_numbers = true)]
    Epp(NoiseArgs),
    /// Purification under dispersion, with optional phase compensation.
    #[command(allow_negative_numbers = true)]
    Dispersive {
        #[command(flatten)]
        noise: NoiseArgs,
        #[arg(long, value_enum)]
        compensation: Option<Switch>,
    },
    /// Bell-state analysis truth table, or one classification.
    Nbsa {
        #[arg(long)]
        table: bool,
        #[arg(long)]
        input: Option<BellLabel>,
    },
    /// Bit-flip fidelity law against simulation.
    #[command(allow_negative_numbers = true)]
    Sweep {
        #[command(flatten)]
        noise: NoiseArgs,
        #[arg(long, default_value = "dphi_s")]
        param: String,
        #[arg(long, default_value_t = 0.0)]
        from: f64,
        #[arg(long, default_value_t = std::f64::consts::PI)]
        to: f64,
        #[arg(long, default_value_t = 13)]
        steps: usize,
        /// Use an n×n×n simplex grid instead of the single noise point.
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Time-averaged fidelity under a fluctuating frequency phase.
    #[command(allow_negative_numbers = true)]
    Ff(FluctuationArgs),
    /// Exact versus factorized fiber state.
    Factorize(GeometryArgs),
    /// Recursive purification resource count.
    Baseline {
        #[arg(long)]
        f0: Option<f64>,
        #[arg(long)]
        target: Option<f64>,
    },
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    #[serde(default)]
    noise: NoiseSection,
    fluctuation: Option<FluctuationSection>,
    #[serde(default)]
    geometry: GeometrySection,
    #[serde(default)]
    baseline: BaselineSection,
    #[serde(default)]
    output: OutputSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct NoiseSection {
    a: Option<f64>,
    b: Option<f64>,
    c: Option<f64>,
    d: Option<f64>,
    dphi_s: Option<f64>,
    dphi_f: Option<f64>,
    mode: Option<ModeArg>,
    trials: Option<u64>,
    seed: Option<u64>,
    compensation: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FluctuationSection {
    model: Option<String>,
    delta: Option<f64>,
    amplitude: Option<f64>,
    period: Option<f64>,
    values: Option<Vec<f64>>,
    base: Option<f64>,
    horizon: Option<f64>,
    samples: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeometrySection {
    l_a1: Option<f64>,
    l_a2: Option<f64>,
    l_b1: Option<f64>,
    l_b2: Option<f64>,
    omega1: Option<f64>,
    omega2: Option<f64>,
    v: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct BaselineSection {
    f0: Option<f64>,
    target: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputSection {
    path: Option<PathBuf>,
    format: Option<Format>,
}

/// A fully resolved command.
#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Epp { noise: NoiseModel, mode: Mode },
    Dispersive { noise: NoiseModel, mode: Mode, compensation: bool },
    Nbsa { input: Option<BellLabel> },
    Sweep { points: Vec<[f64; 4]>, dphi_s: Vec<f64>, dphi_f: f64 },
    Ff { spec: FluctuationSpec },
    Factorize { geometry: FiberGeometry },
    Baseline { f0: f64, target: f64 },
}

/// Everything needed to produce one report.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub command: Command,
    pub format: Format,
    pub out: Option<PathBuf>,
}

fn pick<T>(flag: Option<T>, file: Option<T>) -> Option<T> {
    flag.or(file)
}

fn required(value: Option<f64>, name: &str) -> Result<f64> {
    value.ok_or_else(|| Error::InvalidArgument(format!("missing required value {name}")))
}

fn resolve_noise(args: &NoiseArgs, file: &NoiseSection) -> Result<NoiseModel> {
    let w = [
        pick(args.a, file.a),
        pick(args.b, file.b),
        pick(args.c, file.c),
        pick(args.d, file.d),
    ];
    let [a, b, c, d] = if w.iter().all(Option::is_none) {
        [1.0, 0.0, 0.0, 0.0]
    } else {
        w.map(|x| x.unwrap_or(0.0))
    };
    let noise = NoiseModel::new(a, b, c, d)?.with_dispersion(
        pick(args.dphi_s, file.dphi_s).unwrap_or(0.0),
        pick(args.dphi_f, file.dphi_f).unwrap_or(0.0),
    );
    noise.validate()?;
    Ok(noise)
}

fn resolve_mode(args: &NoiseArgs, file: &NoiseSection, seed: Option<u64>) -> Result<Mode> {
    match pick(args.mode, file.mode).unwrap_or(ModeArg::Exhaustive) {
        ModeArg::Exhaustive => Ok(Mode::Exhaustive),
        ModeArg::Sampled => {
            let trials = pick(args.trials, file.trials).unwrap_or(DEFAULT_TRIALS);
            if trials == 0 {
                return Err(Error::InvalidArgument("sampled mode needs trials > 0".into()));
            }
            Ok(Mode::Sampled {
                seed: pick(seed, file.seed).unwrap_or(0),
                trials,
            })
        }
    }
}

fn resolve_fluctuation(args: &FluctuationArgs, file: &FluctuationSection, default_base: f64) -> Result<FluctuationSpec> {
    let kind = pick(args.model.clone(), file.model.clone()).unwrap_or_else(|| "constant".into());
    let model = match kind.as_str() {
        "constant" => FluctuationModel::Constant,
        "uniform-jitter" => FluctuationModel::UniformJitter {
            delta: required(pick(args.delta, file.delta), "delta")?,
        },
        "sinusoid" => FluctuationModel::Sinusoid {
            amplitude: required(pick(args.amplitude, file.amplitude), "amplitude")?,
            period: required(pick(args.period, file.period), "period")?,
        },
        "user-series" => FluctuationModel::UserSeries {
            values: pick(args.values.clone(), file.values.clone()).unwrap_or_default(),
        },
        other => return Err(Error::InvalidArgument(format!("unknown fluctuation model {other:?}"))),
    };
    FluctuationSpec::new(
        model,
        pick(args.base, file.base).unwrap_or(default_base),
        pick(args.horizon, file.horizon).unwrap_or(1.0),
        pick(args.samples, file.samples).unwrap_or(DEFAULT_FF_SAMPLES),
    )
}

fn resolve_geometry(args: &GeometryArgs, file: &GeometrySection) -> Result<FiberGeometry> {
    let g = FiberGeometry {
        l_a1: required(pick(args.l_a1, file.l_a1), "l_a1")?,
        l_a2: required(pick(args.l_a2, file.l_a2), "l_a2")?,
        l_b1: required(pick(args.l_b1, file.l_b1), "l_b1")?,
        l_b2: required(pick(args.l_b2, file.l_b2), "l_b2")?,
        omega1: required(pick(args.omega1, file.omega1), "omega1")?,
        omega2: required(pick(args.omega2, file.omega2), "omega2")?,
        v: required(pick(args.v, file.v), "v")?,
    };
    g.validate()?;
    Ok(g)
}

fn load_config(path: Option<&Path>) -> Result<FileConfig> {
    match path {
        None => Ok(FileConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p)?;
            Ok(serde_json::from_str(&text)?)
        }
    }
}

fn resolve(cli: Cli) -> Result<ScenarioConfig> {
    let file = load_config(cli.config.as_deref())?;
    let with_fluctuation = |noise: NoiseModel| -> Result<NoiseModel> {
        match &file.fluctuation {
            None => Ok(noise),
            Some(f) => {
                let spec = resolve_fluctuation(&FluctuationArgs::default(), f, noise.dphi_f)?;
                let noise = noise.with_fluctuation(spec);
                noise.validate()?;
                Ok(noise)
            }
        }
    };
    let (command, default_format) = match &cli.command {
        Sub::Epp(n) => (
            Command::Epp {
                noise: with_fluctuation(resolve_noise(n, &file.noise)?)?,
                mode: resolve_mode(n, &file.noise, cli.seed)?,
            },
            Format::Json,
        ),
        Sub::Dispersive { noise, compensation } => (
            Command::Dispersive {
                noise: with_fluctuation(resolve_noise(noise, &file.noise)?)?,
                mode: resolve_mode(noise, &file.noise, cli.seed)?,
                compensation: match compensation {
                    Some(s) => *s == Switch::On,
                    None => file.noise.compensation.unwrap_or(true),
                },
            },
            Format::Json,
        ),
        Sub::Nbsa { table, input } => {
            if *table && input.is_some() {
                return Err(Error::InvalidArgument("--table and --input are exclusive".into()));
            }
            (Command::Nbsa { input: *input }, Format::Json)
        }
        Sub::Sweep {
            noise,
            param,
            from,
            to,
            steps,
            grid,
        } => {
            if param != "dphi_s" {
                return Err(Error::InvalidArgument(format!("sweep parameter {param:?} is not supported; use dphi_s")));
            }
            let base = resolve_noise(noise, &file.noise)?;
            let points = match grid {
                Some(n) => simplex_grid(*n)?,
                None => vec![[base.a, base.b, base.c, base.d]],
            };
            (
                Command::Sweep {
                    points,
                    dphi_s: linspace(*from, *to, *steps)?,
                    dphi_f: base.dphi_f,
                },
                Format::Csv,
            )
        }
        Sub::Ff(args) => {
            let empty = FluctuationSection::default();
            let section = file.fluctuation.as_ref().unwrap_or(&empty);
            let base = file.noise.dphi_f.unwrap_or(0.0);
            (
                Command::Ff {
                    spec: resolve_fluctuation(args, section, base)?,
                },
                Format::Json,
            )
        }
        Sub::Factorize(args) => (
            Command::Factorize {
                geometry: resolve_geometry(args, &file.geometry)?,
            },
            Format::Json,
        ),
        Sub::Baseline { f0, target } => (
            Command::Baseline {
                f0: required(pick(*f0, file.baseline.f0), "f0")?,
                target: required(pick(*target, file.baseline.target), "target")?,
            },
            Format::Csv,
        ),
    };
    Ok(ScenarioConfig {
        command,
        format: pick(cli.format, file.output.format).unwrap_or(default_format),
        out: pick(cli.out, file.output.path),
    })
}

fn json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn single_row_csv<T: Serialize>(row: &T) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.serialize(row)?;
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Runs the command and renders its report.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<String> {
    match &cfg.command {
        Command::Epp { noise, mode } => {
            let r = run_epp(noise, *mode)?;
            match cfg.format {
                Format::Json => json(&r),
                Format::Csv => r.to_csv(),
                Format::Text => Ok(r.to_text()),
            }
        }
        Command::Dispersive {
            noise,
            mode,
            compensation,
        } => {
            let r = dispersive_epp_run(noise, *compensation, *mode)?;
            match cfg.format {
                Format::Json => json(&r),
                Format::Csv => r.to_csv(),
                Format::Text => Ok(r.to_text()),
            }
        }
        Command::Nbsa { input: Some(l) } => {
            let r = nbsa_classify(*l)?;
            match cfg.format {
                Format::Json => json(&r),
                Format::Csv => {
                    let mut w = csv::Writer::from_writer(Vec::new());
                    w.write_record(["round1_modes", "round2_modes", "probability", "classified"])?;
                    for b in &r.branches {
                        w.write_record([
                            b.round1_modes.clone(),
                            b.round2_modes.clone(),
                            b.probability.to_string(),
                            b.classified.to_string(),
                        ])?;
                    }
                    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
                    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
                }
                Format::Text => Ok(format!("{} classified as {} on {} branches\n", l, r.label, r.branches.len())),
            }
        }
        Command::Nbsa { input: None } => {
            let rows = nbsa_truth_table()?;
            match cfg.format {
                Format::Json => json(&rows),
                Format::Text => Ok(truth_table_text(&rows)),
                Format::Csv => {
                    let mut w = csv::Writer::from_writer(Vec::new());
                    w.write_record(["input", "round1_equal", "round2_equal", "classified", "branches", "total_probability"])?;
                    for r in &rows {
                        w.write_record([
                            r.input.to_string(),
                            r.round1_equal.to_string(),
                            r.round2_equal.to_string(),
                            r.classified.to_string(),
                            r.branches.len().to_string(),
                            r.total_probability.to_string(),
                        ])?;
                    }
                    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
                    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
                }
            }
        }
        Command::Sweep { points, dphi_s, dphi_f } => {
            let rows = sweep(points, dphi_s, *dphi_f)?;
            match cfg.format {
                Format::Json => json(&rows),
                Format::Csv => sweep_csv(&rows),
                Format::Text => {
                    let mut s = format!(
                        "{:>6} {:>6} {:>6} {:>6} {:>8} {:>8} {:>14} {:>14} {:>10}\n",
                        "a", "b", "c", "d", "dphi_s", "dphi_f", "F_formula", "F_simulated", "abs_error"
                    );
                    for r in &rows {
                        s.push_str(&format!(
                            "{:>6.3} {:>6.3} {:>6.3} {:>6.3} {:>8.4} {:>8.4} {:>14.12} {:>14.12} {:>10.2e}\n",
                            r.a, r.b, r.c, r.d, r.dphi_s, r.dphi_f, r.f_formula, r.f_simulated, r.abs_error
                        ));
                    }
                    Ok(s)
                }
            }
        }
        Command::Ff { spec } => {
            let r = time_avg_ff(spec)?;
            match cfg.format {
                Format::Json => json(&r),
                Format::Csv => single_row_csv(&FfRow {
                    f_f: r.f_f,
                    samples: r.samples,
                }),
                Format::Text => Ok(format!("F_f = {:.12} over {} samples\n", r.f_f, r.samples)),
            }
        }
        Command::Factorize { geometry } => {
            let r = factorization_overlap(geometry)?;
            match cfg.format {
                Format::Json => json(&r),
                Format::Csv => single_row_csv(&FactorizeRow {
                    overlap: r.overlap,
                    dphi_s: r.dphi_s,
                    dphi_f: r.dphi_f,
                    residual_phase: r.residual_phase,
                    condition: r.condition,
                }),
                Format::Text => Ok(format!(
                    "overlap {:.12}\nresidual phase {:.6}\ndphi_s {:.6}  dphi_f {:.6}\ncondition {:.6}\n",
                    r.overlap, r.residual_phase, r.dphi_s, r.dphi_f, r.condition
                )),
            }
        }
        Command::Baseline { f0, target } => {
            let r = resource_compare(*f0, *target)?;
            match cfg.format {
                Format::Json => json(&r),
                Format::Csv => r.recursive.to_csv(),
                Format::Text => {
                    let t = &r.recursive;
                    let mut s = format!("{:>5} {:>12} {:>12} {:>12} {:>14}\n", "round", "F_before", "F_after", "p_success", "pairs");
                    for row in &t.rounds {
                        s.push_str(&format!(
                            "{:>5} {:>12.9} {:>12.9} {:>12.9} {:>14.6}\n",
                            row.round, row.f_before, row.f_after, row.p_success, row.cumulative_expected_pairs
                        ));
                    }
                    s.push_str(&format!(
                        "recursive: {} rounds, {:.6} expected pairs\ndeterministic: {} pair, fidelity {}\n",
                        t.rounds.len(),
                        t.pairs_consumed_expected,
                        r.deterministic.hyperentangled_pairs,
                        r.deterministic.output_fidelity
                    ));
                    Ok(s)
                }
            }
        }
    }
}

#[derive(Serialize)]
struct FfRow {
    #[serde(rename = "F_f")]
    f_f: f64,
    samples: usize,
}

#[derive(Serialize)]
struct FactorizeRow {
    overlap: f64,
    dphi_s: f64,
    dphi_f: f64,
    residual_phase: f64,
    condition: f64,
}

/// Writes `text` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("output path {} has no file name", path.display())))?;
    let tmp = dir.join(format!(".{}.{}.tmp", name.to_string_lossy(), std::process::id()));
    let result = fs::write(&tmp, text).and_then(|_| fs::rename(&tmp, path));
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result?)
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    kind: &'a str,
    message: String,
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    error: ErrorBody<'a>,
}

fn report_error(kind: &str, message: String) {
    let body = ErrorReport {
        error: ErrorBody { kind, message },
    };
    let text = serde_json::to_string(&body).expect("error report serializes");
    let _ = writeln!(std::io::stderr(), "{text}");
}

/// Parses `args`, runs the scenario and writes the result. Returns the
/// process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            report_error("usage", e.render().to_string().trim_end().to_string());
            return 2;
        }
    };
    let outcome = resolve(cli).and_then(|cfg| {
        let text = run_scenario(&cfg)?;
        match &cfg.out {
            Some(path) => write_atomic(path, &text),
            None => {
                let mut out = std::io::stdout().lock();
                out.write_all(text.as_bytes())?;
                Ok(out.flush()?)
            }
        }
    });
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            report_error(e.kind(), e.to_string());
            1
        }
    }
}
