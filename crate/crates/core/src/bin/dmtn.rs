use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dmtn::corpus::{encode_stories, load_task, resolve_data_root, DATA_ROOT_ENV};
use dmtn::harness::{
    check_component, evaluate, export_gate_trace, load_checkpoint, prepare_task, save_checkpoint, train_from,
    GradCheckTarget, GRADCHECK_TOLERANCE,
};
use dmtn::model::{init_params, parse_key_values, Architecture, ModelConfig};
use dmtn::scoring::ScorerKind;
use dmtn::{Error, Result};

#[derive(Parser)]
#[command(name = "dmtn", version, about = "Memory networks with tensor attention gates on bAbI")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model on one task and save a checkpoint.
    Train(TrainArgs),
    /// Score a checkpoint on a task's test split.
    Eval(DataArgs),
    /// Write the gate trace of one test question as CSV.
    Inspect {
        #[command(flatten)]
        data: DataArgs,
        /// 0-based position in the test split.
        #[arg(long)]
        index: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare analytic and finite-difference gradients.
    Gradcheck {
        #[arg(long, default_value = "ntn2")]
        scorer: ScorerKind,
        /// Add the three-way term to an NTN gate.
        #[arg(long)]
        three_way: bool,
        /// scorer, gru, model, memn2n or all.
        #[arg(long, default_value = "scorer")]
        component: String,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

#[derive(Args)]
struct DataArgs {
    #[arg(long)]
    ckpt: PathBuf,
    /// bAbI root; falls back to $BABI_ROOT.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    task: u8,
}

#[derive(Args)]
struct TrainArgs {
    /// bAbI root; falls back to $BABI_ROOT.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    task: u8,
    /// key=value file; flags win over its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<Architecture>,
    #[arg(long)]
    scorer: Option<ScorerKind>,
    #[arg(long)]
    hops: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    slices: Option<usize>,
    #[arg(long)]
    embed: Option<usize>,
    #[arg(long)]
    gate_hidden: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    l2: Option<f64>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    clip: Option<f64>,
    #[arg(long)]
    tied: Option<bool>,
    #[arg(long)]
    out: PathBuf,
}

impl TrainArgs {
    fn flag_pairs(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        let mut push = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                out.push((k.to_string(), v));
            }
        };
        push("model", self.model.map(|m| m.to_string()));
        push("scorer", self.scorer.map(|s| s.to_string()));
        push("hops", self.hops.map(|v| v.to_string()));
        push("hidden", self.hidden.map(|v| v.to_string()));
        push("slices", self.slices.map(|v| v.to_string()));
        push("embed", self.embed.map(|v| v.to_string()));
        push("gate_hidden", self.gate_hidden.map(|v| v.to_string()));
        push("epochs", self.epochs.map(|v| v.to_string()));
        push("l2", self.l2.map(|v| v.to_string()));
        push("dropout", self.dropout.map(|v| v.to_string()));
        push("lr", self.lr.map(|v| v.to_string()));
        push("batch", self.batch.map(|v| v.to_string()));
        push("seed", self.seed.map(|v| v.to_string()));
        push("clip", self.clip.map(|v| v.to_string()));
        push("tied", self.tied.map(|v| v.to_string()));
        out
    }

    /// File entries first, then flags; unset keys take the chosen model's defaults.
    fn config(&self) -> Result<ModelConfig> {
        let mut pairs = match &self.config {
            Some(path) => parse_key_values(&fs::read_to_string(path)?)?,
            None => Vec::new(),
        };
        pairs.extend(self.flag_pairs());
        let model = match pairs.iter().rev().find(|(k, _)| k == "model") {
            Some((_, v)) => v.parse()?,
            None => Architecture::Dmtn,
        };
        let mut cfg = ModelConfig::for_model(model);
        for (k, v) in &pairs {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn data_root(explicit: Option<&Path>) -> Result<PathBuf> {
    resolve_data_root(explicit)
        .ok_or_else(|| Error::Config(format!("no data root: pass --data or set {DATA_ROOT_ENV}")))
}

fn run_train(args: &TrainArgs) -> Result<ExitCode> {
    let cfg = args.config()?;
    let task = prepare_task(&data_root(args.data.as_deref())?, args.task)?;
    eprintln!(
        "task {}: {} train / {} test questions, vocabulary {}",
        task.task,
        task.train.len(),
        task.test.len(),
        task.vocab.len()
    );
    let params = init_params(&cfg, task.vocab.len())?;
    let out = train_from(&cfg, params, &task.train, |e| {
        println!("epoch {} step {} loss {:.6} train_accuracy {:.2}", e.epoch, e.step, e.loss, e.accuracy);
    })?;
    save_checkpoint(&args.out, &out.params, &cfg, &task.vocab)?;
    let report = evaluate(&out.params, &cfg, &task.test, task.task)?;
    println!("{}", report.to_json());
    Ok(ExitCode::SUCCESS)
}

fn run_eval(args: &DataArgs) -> Result<ExitCode> {
    let ckpt = load_checkpoint(&args.ckpt)?;
    let data = load_task(&data_root(args.data.as_deref())?, args.task)?;
    let test = encode_stories(&data.test, &ckpt.vocab)?;
    let report = evaluate(&ckpt.params, &ckpt.config, &test, args.task)?;
    println!("{}", report.to_json());
    Ok(if report.passed { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn run_inspect(args: &DataArgs, index: usize, out: &Path) -> Result<ExitCode> {
    let ckpt = load_checkpoint(&args.ckpt)?;
    let data = load_task(&data_root(args.data.as_deref())?, args.task)?;
    let test = encode_stories(&data.test, &ckpt.vocab)?;
    let sample = test
        .get(index)
        .ok_or_else(|| Error::Argument(format!("index {index} out of range for {} test questions", test.len())))?;
    let trace = export_gate_trace(&ckpt.params, &ckpt.config, &ckpt.vocab, sample, out)?;
    eprintln!("wrote {} hops x {} facts to {}", trace.hops(), trace.facts(), out.display());
    Ok(ExitCode::SUCCESS)
}

fn gradcheck_targets(scorer: ScorerKind, three_way: bool, component: &str) -> Result<Vec<GradCheckTarget>> {
    let scorer = match (scorer, three_way) {
        (s, false) => s,
        (ScorerKind::Ntn2 | ScorerKind::Ntn3, true) => ScorerKind::Ntn3,
        (s, true) => return Err(Error::Config(format!("--three-way applies to NTN gates, not `{s}`"))),
    };
    Ok(match component {
        "scorer" => vec![GradCheckTarget::Scorer(scorer)],
        "gru" => vec![GradCheckTarget::Gru],
        "model" => vec![GradCheckTarget::Episodic(scorer)],
        "memn2n" => vec![GradCheckTarget::MemN2N],
        "all" => GradCheckTarget::all(),
        other => return Err(Error::Config(format!("unknown component `{other}`"))),
    })
}

fn run_gradcheck(scorer: ScorerKind, three_way: bool, component: &str, seed: u64) -> Result<ExitCode> {
    let mut worst: f64 = 0.0;
    for target in gradcheck_targets(scorer, three_way, component)? {
        let report = check_component(target, seed)?;
        println!(
            "{target}: max relative error {:.3e} over {} entries",
            report.max_relative_error, report.entries_checked
        );
        worst = worst.max(report.max_relative_error);
    }
    println!("max_relative_error={worst:e}");
    Ok(if worst <= GRADCHECK_TOLERANCE { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train(args) => run_train(args),
        Command::Eval(args) => run_eval(args),
        Command::Inspect { data, index, out } => run_inspect(data, *index, out),
        Command::Gradcheck { scorer, three_way, component, seed } => {
            run_gradcheck(*scorer, *three_way, component, *seed)
        }
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::from(2)
    })
}
