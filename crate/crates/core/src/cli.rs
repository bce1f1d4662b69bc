//! `downwash` command line.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use downwash_core::config::ExperimentConfig;
use downwash_core::error::Error;
use downwash_core::learning::{evaluate, train, Dataset, EvalMetrics, Model, ModelKind, TrainConfig};
use downwash_core::pipeline::{
    collect_stage, derive_seed, export_field_grid, held_out_dataset, sample_efficiency_sweep, sequential_train,
    tracking_metrics, Compensation, Comparison, Episode, FlightLog, Hover, Plane, TrackingMetrics,
};

#[derive(Parser, Debug)]
#[command(name = "downwash", version, about = "Leader/follower downwash simulation, learning and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Experiment configuration (JSON); defaults are used when omitted.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory, created if needed.
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum CompensationArg {
    None,
    Oracle,
    Model,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum PlaneArg {
    TopDown,
    Sagittal,
    Both,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum KindArg {
    Equivariant,
    Shallow,
    Deep,
}

impl From<KindArg> for ModelKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Equivariant => ModelKind::Equivariant,
            KindArg::Shallow => ModelKind::ShallowNonequiv,
            KindArg::Deep => ModelKind::DeepNonequiv,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fly one episode and log it.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = CompensationArg::None)]
        compensation: CompensationArg,
        /// Model artifact used with `--compensation model`.
        #[arg(long, value_name = "PATH")]
        model: Option<PathBuf>,
        /// Fly without any downwash.
        #[arg(long)]
        no_field: bool,
    },
    /// Collect one stage of training data.
    Collect {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = clap::value_parser!(u8).range(0..=2))]
        stage: u8,
        /// Previous stage's model; required for stages 1 and 2.
        #[arg(long, value_name = "PATH")]
        prev_model: Option<PathBuf>,
        /// Dataset of earlier stages to prepend.
        #[arg(long, value_name = "PATH")]
        prior: Option<PathBuf>,
    },
    /// Train a model on a dataset.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "PATH")]
        data: PathBuf,
        #[arg(long, value_enum)]
        kind: Option<KindArg>,
    },
    /// Validation RMSE and closed-loop tracking for one or more models.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long = "model", value_name = "PATH", required = true)]
        models: Vec<PathBuf>,
        /// Validation dataset; collected with the staged procedure when omitted.
        #[arg(long, value_name = "PATH")]
        data: Option<PathBuf>,
    },
    /// Validation RMSE against flight-time budget for every model kind.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Full staged training set; collected when omitted.
        #[arg(long, value_name = "PATH")]
        data: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        validation: Option<PathBuf>,
    },
    /// Force predictions on a grid around the leader.
    ExportField {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "PATH", conflicts_with = "oracle", required_unless_present = "oracle")]
        model: Option<PathBuf>,
        /// Export the ground-truth field instead of a model.
        #[arg(long)]
        oracle: bool,
        #[arg(long, value_enum, default_value_t = PlaneArg::Both)]
        plane: PlaneArg,
    },
    /// Staged collection and training end to end, then deployment.
    Pipeline {
        #[command(flatten)]
        common: Common,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate { .. } => "simulate",
            Command::Collect { .. } => "collect",
            Command::Train { .. } => "train",
            Command::Eval { .. } => "eval",
            Command::Sweep { .. } => "sweep",
            Command::ExportField { .. } => "export-field",
            Command::Pipeline { .. } => "pipeline",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Simulate { common, .. }
            | Command::Collect { common, .. }
            | Command::Train { common, .. }
            | Command::Eval { common, .. }
            | Command::Sweep { common, .. }
            | Command::ExportField { common, .. }
            | Command::Pipeline { common } => common,
        }
    }
}

enum Failure {
    Usage(String),
    Config(Error),
    Run(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::MissingPreviousModel { .. } => Failure::Usage(e.to_string()),
            e => Failure::Run(e),
        }
    }
}

impl Failure {
    fn report(&self) -> ExitCode {
        match self {
            Failure::Usage(msg) => {
                eprintln!("error: {msg}");
                ExitCode::from(2)
            }
            Failure::Config(e) => {
                eprintln!("error: configuration: {e}");
                ExitCode::from(3)
            }
            Failure::Run(e) if e.is_numerical() => {
                eprintln!("error: numerical failure: {e}");
                ExitCode::from(4)
            }
            Failure::Run(e) => {
                eprintln!("error: {e}");
                ExitCode::from(1)
            }
        }
    }
}

type CliResult<T> = Result<T, Failure>;

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Output directory plus a record of what went into it.
struct Run {
    out: PathBuf,
    inputs: Vec<serde_json::Value>,
    outputs: Vec<String>,
}

impl Run {
    fn new(out: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(out).map_err(Error::from)?;
        Ok(Self { out: out.to_path_buf(), inputs: Vec::new(), outputs: Vec::new() })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.outputs.push(name.to_string());
        self.out.join(name)
    }

    fn input(&mut self, path: &Path) -> CliResult<()> {
        let bytes = std::fs::read(path).map_err(Error::from)?;
        self.inputs.push(json!({ "path": path.display().to_string(), "sha256": sha256_hex(&bytes) }));
        Ok(())
    }

    fn write_with(&mut self, name: &str, f: impl FnOnce(&mut dyn Write) -> downwash_core::Result<()>) -> CliResult<()> {
        let path = self.path(name);
        let mut w = std::io::BufWriter::new(std::fs::File::create(path).map_err(Error::from)?);
        f(&mut w)?;
        w.flush().map_err(Error::from)?;
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let text = serde_json::to_string_pretty(value).map_err(Error::from)?;
        self.write_with(name, |w| Ok(writeln!(w, "{text}")?))
    }

    fn load_model(&mut self, path: &Path) -> CliResult<Model> {
        self.input(path)?;
        Ok(Model::load(path)?)
    }

    fn load_dataset(&mut self, path: &Path) -> CliResult<Dataset> {
        self.input(path)?;
        Ok(Dataset::load(path)?)
    }

    fn finish(mut self, command: &str, args: &[String], seed: u64, config: &ExperimentConfig) -> CliResult<()> {
        let config_path = self.path("config.json");
        std::fs::write(&config_path, config.to_json() + "\n").map_err(Error::from)?;
        let mut outputs = Vec::new();
        for name in &self.outputs {
            let bytes = std::fs::read(self.out.join(name)).map_err(Error::from)?;
            outputs.push(json!({ "file": name, "sha256": sha256_hex(&bytes) }));
        }
        let manifest = json!({
            "tool": "downwash",
            "version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "args": args,
            "seed": seed,
            "config_sha256": config.sha256(),
            "inputs": self.inputs,
            "outputs": outputs,
        });
        let text = serde_json::to_string_pretty(&manifest).map_err(Error::from)?;
        std::fs::write(self.out.join("manifest.json"), text + "\n").map_err(Error::from)?;
        Ok(())
    }
}

fn load_config(path: Option<&Path>) -> CliResult<ExperimentConfig> {
    match path {
        None => Ok(ExperimentConfig::default()),
        Some(p) => ExperimentConfig::load(p).map_err(Failure::Config),
    }
}

fn write_log(run: &mut Run, name: &str, log: &FlightLog) -> CliResult<()> {
    run.write_with(name, |w| log.write_csv(w))
}

const EVAL_HEADER: &str = "model,kind,parameters,val_rmse,val_rmse_lateral,val_rmse_vertical,\
pos_lateral_mean,pos_vertical_mean,pos_3d_mean,pos_3d_max,vel_lateral_mean,vel_vertical_mean,vel_3d_mean";

fn eval_row(name: &str, kind: &str, params: usize, m: &EvalMetrics, t: &TrackingMetrics) -> String {
    format!(
        "{name},{kind},{params},{},{},{},{},{},{},{},{},{},{}",
        m.rmse,
        m.rmse_lateral,
        m.rmse_vertical,
        t.position.lateral.mean,
        t.position.vertical.mean,
        t.position.total.mean,
        t.position.total.max,
        t.velocity.lateral.mean,
        t.velocity.vertical.mean,
        t.velocity.total.mean,
    )
}

/// Comparison table: validation RMSE plus transect tracking errors for each
/// model, with the uncompensated flight (zero predictor) as the first row.
fn eval_table(
    cfg: &ExperimentConfig,
    models: &[(String, Model)],
    validation: &Dataset,
    seed: u64,
) -> CliResult<(String, Vec<Comparison>)> {
    let gains = cfg.gains()?;
    let deployment = &cfg.trajectories.deployment;
    let mut lines = vec![EVAL_HEADER.to_string()];
    let mut comparisons = Vec::new();
    for (i, (name, model)) in models.iter().enumerate() {
        let c = deployment.transect(model, &cfg.field, &gains, cfg.vehicle, seed)?;
        if i == 0 {
            let zero = downwash_core::learning::model::zero_like(model);
            lines.push(eval_row("none", "none", 0, &evaluate(&zero, validation), &c.baseline));
        }
        lines.push(eval_row(name, model.kind().name(), model.parameter_count(), &evaluate(model, validation), &c.compensated));
        comparisons.push(c);
    }
    Ok((lines.join("\n") + "\n", comparisons))
}

fn comparison_json(c: &Comparison) -> serde_json::Value {
    json!({
        "baseline": c.baseline,
        "compensated": c.compensated,
        "position_reduction": c.position_reduction,
        "vertical_reduction": c.vertical_reduction,
        "velocity_reduction": c.velocity_reduction,
    })
}

fn run(cli: Cli, args: &[String]) -> CliResult<()> {
    let common = cli.command.common().clone();
    let cfg = load_config(common.config.as_deref())?;
    let seed = common.seed;
    let mut run = Run::new(&common.out)?;
    if let Some(p) = &common.config {
        run.input(p)?;
    }
    let gains = cfg.gains()?;
    let ctx = cfg.context(&gains);
    let kind = cfg.model.kind;
    let mode = cfg.model.mode;
    match &cli.command {
        Command::Simulate { compensation, model, no_field, .. } => {
            let loaded = match (compensation, model) {
                (CompensationArg::Model, Some(p)) => Some(run.load_model(p)?),
                (CompensationArg::Model, None) => {
                    return Err(Failure::Usage("--compensation model requires --model".into()))
                }
                (_, Some(_)) => return Err(Failure::Usage("--model is only used with --compensation model".into())),
                _ => None,
            };
            let comp = match (compensation, &loaded) {
                (CompensationArg::Oracle, _) => Compensation::Oracle,
                (CompensationArg::Model, Some(m)) => Compensation::Model(m),
                _ => Compensation::None,
            };
            let d = &cfg.trajectories.deployment;
            let leader = Hover { p0: d.leader };
            let log = Episode {
                leader: &leader,
                follower: &cfg.trajectories.simulate.follower,
                compensation: comp,
                field: if *no_field { None } else { Some(cfg.field) },
                gains: &gains,
                vehicle: cfg.vehicle,
                duration: cfg.trajectories.simulate.duration,
                dt: d.dt,
                noise_sigma: d.noise_sigma,
                seed,
                hold_model: d.hold_model,
            }
            .run()?;
            write_log(&mut run, "flight_log.csv", &log)?;
            run.write_json("metrics.json", &tracking_metrics(&log))?;
        }
        Command::Collect { stage, prev_model, prior, .. } => {
            let prev = prev_model.as_deref().map(|p| run.load_model(p)).transpose()?;
            let prior = match prior {
                Some(p) => run.load_dataset(p)?,
                None => Dataset::default(),
            };
            let data = collect_stage(&ctx, *stage, prev.as_ref(), &prior, seed)?;
            run.write_with(&format!("dataset_stage{stage}.csv"), |w| data.write_csv(w))?;
        }
        Command::Train { data, kind: k, .. } => {
            let data = run.load_dataset(data)?;
            let kind = k.map(ModelKind::from).unwrap_or(kind);
            let model_seed = derive_seed(seed, 0);
            let mut model = Model::new(kind, mode, model_seed);
            let tc = TrainConfig { seed: model_seed, ..cfg.train.clone() };
            let outcome = train(&mut model, &data, &tc)?;
            let path = run.path("model.json");
            model.save(&path, Some(&tc))?;
            run.write_with("train_history.csv", |w| {
                writeln!(w, "epoch,loss")?;
                for (i, l) in outcome.history.iter().enumerate() {
                    writeln!(w, "{i},{l}")?;
                }
                Ok(())
            })?;
            run.write_json("train_metrics.json", &evaluate(&model, &data))?;
        }
        Command::Eval { models, data, .. } => {
            let mut loaded = Vec::new();
            for p in models {
                let name = p.file_stem().map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned());
                loaded.push((name, run.load_model(p)?));
            }
            let validation = match data {
                Some(p) => run.load_dataset(p)?,
                None => held_out_dataset(&ctx, kind, mode, &cfg.train, seed)?,
            };
            let (table, comparisons) = eval_table(&cfg, &loaded, &validation, seed)?;
            run.write_with("eval.csv", |w| Ok(w.write_all(table.as_bytes())?))?;
            let deployment: Vec<_> = comparisons.iter().map(comparison_json).collect();
            run.write_json("eval.json", &json!({ "validation_rows": validation.len(), "transect": deployment }))?;
            print!("{table}");
        }
        Command::Sweep { data, validation, .. } => {
            let full = match data {
                Some(p) => run.load_dataset(p)?,
                None => sequential_train(&ctx, kind, mode, &cfg.train, seed)?.final_dataset().clone(),
            };
            let validation = match validation {
                Some(p) => run.load_dataset(p)?,
                None => held_out_dataset(&ctx, kind, mode, &cfg.train, seed)?,
            };
            let table =
                sample_efficiency_sweep(&full, &validation, cfg.plan.stage_duration, &cfg.sweep, &cfg.train, seed)?;
            run.write_with("sweep.csv", |w| table.write_csv(w))?;
            run.write_json("sweep.json", &table)?;
        }
        Command::ExportField { model, plane, .. } => {
            let loaded = model.as_deref().map(|p| run.load_model(p)).transpose()?;
            let planes: &[Plane] = match plane {
                PlaneArg::TopDown => &[Plane::TopDown],
                PlaneArg::Sagittal => &[Plane::Sagittal],
                PlaneArg::Both => &[Plane::TopDown, Plane::Sagittal],
            };
            for p in planes {
                let (spec, name) = match p {
                    Plane::TopDown => (&cfg.export.top_down, "field_top_down.csv"),
                    Plane::Sagittal => (&cfg.export.sagittal, "field_sagittal.csv"),
                };
                let spec = downwash_core::pipeline::GridSpec { plane: *p, ..spec.clone() };
                let grid = match &loaded {
                    Some(m) => export_field_grid(m, &spec)?,
                    None => export_field_grid(&cfg.field, &spec)?,
                };
                run.write_with(name, |w| grid.write_csv(w))?;
            }
        }
        Command::Pipeline { .. } => {
            let staged = sequential_train(&ctx, kind, mode, &cfg.train, seed)?;
            let validation = held_out_dataset(&ctx, kind, mode, &cfg.train, seed)?;
            run.write_with("dataset.csv", |w| staged.final_dataset().write_csv(w))?;
            run.write_with("validation.csv", |w| validation.write_csv(w))?;
            let mut stage_lines = vec!["stage,train_rows,val_rmse,val_rmse_lateral,val_rmse_vertical".to_string()];
            for (i, (m, d)) in staged.models.iter().zip(&staged.datasets).enumerate() {
                let path = run.path(&format!("model_m{i}.json"));
                m.save(&path, Some(&cfg.train))?;
                let e = evaluate(m, &validation);
                stage_lines.push(format!("{i},{},{},{},{}", d.len(), e.rmse, e.rmse_lateral, e.rmse_vertical));
            }
            let stage_table = stage_lines.join("\n") + "\n";
            run.write_with("staged_validation.csv", |w| Ok(w.write_all(stage_table.as_bytes())?))?;
            let m2 = staged.deployment_model();
            let d = &cfg.trajectories.deployment;
            let transect = d.transect(m2, &cfg.field, &gains, cfg.vehicle, seed)?;
            let lemniscate = d.lemniscate(m2, &cfg.field, &gains, cfg.vehicle, seed)?;
            for (name, c) in [("transect", &transect), ("lemniscate", &lemniscate)] {
                if let Some((base, comp)) = &c.logs {
                    write_log(&mut run, &format!("{name}_uncompensated.csv"), base)?;
                    write_log(&mut run, &format!("{name}_compensated.csv"), comp)?;
                }
            }
            run.write_json(
                "deployment.json",
                &json!({ "transect": comparison_json(&transect), "lemniscate": comparison_json(&lemniscate) }),
            )?;
            print!("{stage_table}");
        }
    }
    run.finish(cli.command.name(), args, seed, &cfg)
}

pub fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli, &args[1..]) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => f.report(),
    }
}
