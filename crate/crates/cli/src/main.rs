//! `ltsp`: phantom generation, training, inference, evaluation and gradient
//! checks for the two-stage slice-propagation network.
//!
//! Every artifact-producing command writes `manifest.txt` into its output
//! directory before anything else. Failures print one line,
//! `error category=<name> message=<text>`, and exit with the category code.

mod data;
mod manifest;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use ltsp_core::kv::KvReader;
use ltsp_core::metrics::{evaluate_with, DEFAULT_BRANCH_THRESHOLD};
use ltsp_core::model::{load_checkpoint, save_checkpoint, Ablation, LtspNet};
use ltsp_core::phantom::{make_phantom, TreeSpec};
use ltsp_core::pipeline::{
    epoch_means, run_gradcheck, sliding_window_infer, train_from, GradcheckConfig, StepLog, SlidingWindowPlan,
    TrainConfig, TrainObserver,
};
use ltsp_tensor::OpKind;
use ltsp_core::volio::{normalize_hu, read_graph, read_volume, write_graph, write_volume};
use ltsp_core::{CoreError, ErrorCategory};

use data::{list_cases, CaseFiles};
use manifest::{Format, RunManifest};

const CHECKPOINT_FILE: &str = "model.ckpt";
const LOG_FILE: &str = "train.log";
const CONFIG_FILE: &str = "config.txt";
const REPORT_FILE: &str = "report.txt";

#[derive(Parser, Debug)]
#[command(name = "ltsp", version, about = "Slice-propagation airway segmentation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate synthetic airway phantoms.
    Phantom(PhantomArgs),
    /// Train a network on a phantom directory.
    Train(TrainArgs),
    /// Sliding-window inference on one volume.
    Infer(InferArgs),
    /// Score a predicted mask against ground truth.
    Eval(EvalArgs),
    /// Finite-difference check of every parameter group.
    Gradcheck(GradcheckArgs),
}

#[derive(Args, Debug)]
struct PhantomArgs {
    /// Tree spec (key = value); defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed of the first phantom; phantom i uses seed + i.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    count: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Training config (key = value); defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory written by `ltsp phantom`.
    #[arg(long)]
    data: PathBuf,
    /// Train on the first N cases only.
    #[arg(long)]
    cases: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = parse_ablation)]
    ablation: Option<Ablation>,
    /// Continue from this checkpoint instead of a fresh init.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct InferArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Intensity volume, raw HU or normalized.
    #[arg(long)]
    input: PathBuf,
    /// Inference config; the only key is `stride`.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Window stride in voxels; half the cube by default.
    #[arg(long)]
    stride: Option<usize>,
    #[arg(long, value_parser = parse_ablation)]
    ablation: Option<Ablation>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    #[arg(long)]
    graph: PathBuf,
    /// Centerline coverage at which a branch counts as detected.
    #[arg(long, default_value_t = DEFAULT_BRANCH_THRESHOLD)]
    threshold: f64,
    /// Also write the report and a manifest here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    samples: usize,
    /// Also write the table and a manifest here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Negative control: corrupt the backward rule of one op kind.
    #[arg(long, hide = true, value_parser = parse_op)]
    inject_fault: Option<OpKind>,
}

fn parse_ablation(s: &str) -> Result<Ablation, String> {
    s.parse().map_err(|e: CoreError| e.to_string())
}

fn parse_op(s: &str) -> Result<OpKind, String> {
    Ok(match s {
        "conv" => OpKind::Conv,
        "maxpool" => OpKind::MaxPool,
        "batchnorm" => OpKind::BatchNorm,
        "relu" => OpKind::Relu,
        "sigmoid" => OpKind::Sigmoid,
        "tanh" => OpKind::Tanh,
        "softmax" => OpKind::Softmax,
        "upsample" => OpKind::Upsample,
        _ => return Err(format!("unknown op {s:?}")),
    })
}

fn read_text(path: &Path) -> Result<String, CoreError> {
    fs::read_to_string(path).map_err(|e| CoreError::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<(), CoreError> {
    fs::write(path, text).map_err(|e| CoreError::io(path, e))
}

fn cmd_phantom(a: PhantomArgs) -> Result<()> {
    let spec = match &a.config {
        Some(p) => TreeSpec::from_kv(&read_text(p)?)?,
        None => TreeSpec::default(),
    };
    let base = a.seed.unwrap_or(spec.seed);
    let mut m = RunManifest::new("phantom", &a.out);
    m.config = a.config.clone();
    m.seed = Some(base);
    m.inputs.push(("count", a.count.to_string()));
    m.formats = vec![Format::Volume, Format::Graph, Format::Kv];
    m.write()?;
    for i in 0..a.count {
        let case_spec = spec.with_seed(base + i);
        let p = make_phantom(&case_spec).with_context(|| format!("phantom with seed {}", base + i))?;
        let files = CaseFiles::for_index(&a.out, i);
        write_volume(&p.intensity, &files.intensity)?;
        write_volume(&p.mask, &files.mask)?;
        write_graph(&p.graph, &files.graph)?;
        write_text(&files.spec, &case_spec.to_kv())?;
    }
    println!("wrote {} phantoms to {}", a.count, a.out.display());
    Ok(())
}

/// Appends step lines to the log and reports epoch means on stderr.
struct LogObserver {
    out: BufWriter<File>,
    path: PathBuf,
    epoch_losses: Vec<StepLog>,
}

impl TrainObserver for LogObserver {
    fn on_step(&mut self, log: &StepLog) -> ltsp_core::Result<()> {
        self.epoch_losses.push(*log);
        writeln!(self.out, "{log}").map_err(|e| CoreError::io(&self.path, e))
    }

    fn on_epoch(&mut self, epoch: usize, _net: &LtspNet<f32>) -> ltsp_core::Result<()> {
        let mean = epoch_means(&self.epoch_losses).last().copied().unwrap_or(f64::NAN);
        eprintln!("epoch {epoch} mean_loss {mean:.6}");
        self.epoch_losses.clear();
        self.out.flush().map_err(|e| CoreError::io(&self.path, e))
    }
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => TrainConfig::from_kv(&read_text(p)?)?,
        None => TrainConfig::default(),
    };
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    if let Some(ab) = a.ablation {
        cfg.ablation = ab;
    }
    let mut files = list_cases(&a.data)?;
    if let Some(n) = a.cases {
        if n == 0 || n > files.len() {
            return Err(CoreError::Config(format!("--cases {n} but {} cases available", files.len())).into());
        }
        files.truncate(n);
    }
    if files.is_empty() {
        return Err(CoreError::Config(format!("no cases in {}", a.data.display())).into());
    }

    let mut m = RunManifest::new("train", &a.out);
    m.config = a.config.clone();
    m.seed = Some(cfg.seed);
    m.inputs.push(("data", a.data.display().to_string()));
    m.inputs.push(("cases", files.len().to_string()));
    m.inputs.push(("ablation", cfg.ablation.to_string()));
    if let Some(c) = &a.checkpoint {
        m.inputs.push(("checkpoint", c.display().to_string()));
    }
    m.formats = vec![Format::Kv, Format::StepLog, Format::Checkpoint];
    m.write()?;
    write_text(&a.out.join(CONFIG_FILE), &cfg.to_kv())?;

    let cases = files.iter().map(CaseFiles::load).collect::<ltsp_core::Result<Vec<_>>>()?;
    let net = match &a.checkpoint {
        Some(p) => {
            let mut net = load_checkpoint(p)?;
            if net.config() != &cfg.net {
                return Err(CoreError::Config("checkpoint network config differs from the training config".into()).into());
            }
            net.set_ablation(cfg.ablation);
            net
        }
        None => LtspNet::new(cfg.net.clone(), cfg.ablation, cfg.seed)?,
    };
    let log_path = a.out.join(LOG_FILE);
    let file = File::create(&log_path).map_err(|e| CoreError::io(&log_path, e))?;
    let mut observer = LogObserver {
        out: BufWriter::new(file),
        path: log_path,
        epoch_losses: Vec::new(),
    };
    let outcome = train_from(net, &cases, &cfg, &mut observer)?;
    save_checkpoint(&outcome.net, a.out.join(CHECKPOINT_FILE))?;
    println!("trained {} steps; checkpoint {}", outcome.log.len(), a.out.join(CHECKPOINT_FILE).display());
    Ok(())
}

fn infer_stride(a: &InferArgs, cube: usize) -> Result<usize, CoreError> {
    let from_config = match &a.config {
        Some(p) => {
            let mut kv = KvReader::parse(&read_text(p)?)?;
            let stride = kv.take("stride")?;
            kv.finish()?;
            stride
        }
        None => None,
    };
    Ok(a.stride.or(from_config).unwrap_or((cube / 2).max(1)))
}

fn cmd_infer(a: InferArgs) -> Result<()> {
    let mut net = load_checkpoint(&a.checkpoint)?;
    if let Some(ab) = a.ablation {
        net.set_ablation(ab);
    }
    let cube = net.config().cube;
    let stride = infer_stride(&a, cube)?;
    let mut m = RunManifest::new("infer", &a.out);
    m.config = a.config.clone();
    m.inputs.push(("checkpoint", a.checkpoint.display().to_string()));
    m.inputs.push(("volume", a.input.display().to_string()));
    m.inputs.push(("stride", stride.to_string()));
    m.inputs.push(("ablation", net.ablation().to_string()));
    m.formats = vec![Format::Volume];
    m.write()?;

    let raw = read_volume(&a.input)?;
    let volume = if raw.is_normalized() { raw } else { normalize_hu(&raw)? };
    let plan = SlidingWindowPlan::new(volume.extents(), [cube; 3], [stride; 3])?;
    let (prob, pred) = sliding_window_infer(&mut net, &volume, &plan)?;
    write_volume(&prob, a.out.join("prob.vol"))?;
    write_volume(&pred, a.out.join("pred.vol"))?;
    println!("{} windows; {} foreground voxels", plan.windows().len(), pred.count_foreground()?);
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    if let Some(out) = &a.out {
        let mut m = RunManifest::new("eval", out);
        m.inputs.push(("pred", a.pred.display().to_string()));
        m.inputs.push(("gt", a.gt.display().to_string()));
        m.inputs.push(("graph", a.graph.display().to_string()));
        m.inputs.push(("threshold", a.threshold.to_string()));
        m.formats = vec![Format::Report];
        m.write()?;
    }
    let pred = read_volume(&a.pred)?;
    let gt = read_volume(&a.gt)?;
    let graph = read_graph(&a.graph)?;
    let report = evaluate_with(&pred, &gt, &graph, a.threshold)?;
    if let Some(out) = &a.out {
        write_text(&out.join(REPORT_FILE), &report.to_string())?;
    }
    print!("{report}");
    Ok(())
}

fn cmd_gradcheck(a: GradcheckArgs) -> Result<()> {
    let cfg = GradcheckConfig {
        seed: a.seed,
        samples_per_group: a.samples,
        fault: a.inject_fault,
        ..GradcheckConfig::default()
    };
    if let Some(out) = &a.out {
        let mut m = RunManifest::new("gradcheck", out);
        m.seed = Some(a.seed);
        m.inputs.push(("samples", a.samples.to_string()));
        if let Some(op) = a.inject_fault {
            m.inputs.push(("fault", format!("{op:?}")));
        }
        m.write()?;
    }
    let report = run_gradcheck(&cfg)?;
    if let Some(out) = &a.out {
        write_text(&out.join("gradcheck.txt"), &report.to_string())?;
    }
    print!("{report}");
    if !report.passed() {
        let names: Vec<_> = report.failing().iter().map(|g| g.name()).collect();
        return Err(CoreError::Numeric(format!("gradient check failed for {}", names.join(", "))).into());
    }
    Ok(())
}

fn category(err: &anyhow::Error) -> ErrorCategory {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<CoreError>() {
            return e.category();
        }
        if cause.is::<std::io::Error>() {
            return ErrorCategory::Io;
        }
    }
    ErrorCategory::Config
}

fn fail(category: ErrorCategory, message: &str) -> ExitCode {
    let message = message.split_whitespace().collect::<Vec<_>>().join(" ");
    eprintln!("error category={} message={message}", category.name());
    ExitCode::from(category.code() as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            return fail(ErrorCategory::Config, first.trim_start_matches("error: "));
        }
    };
    let result = match cli.command {
        Command::Phantom(a) => cmd_phantom(a),
        Command::Train(a) => cmd_train(a),
        Command::Infer(a) => cmd_infer(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Gradcheck(a) => cmd_gradcheck(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(category(&e), &format!("{e:#}")),
    }
}
