use std::fs;
use std::io::{self, BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde_json::json;

use skelmap::classify::{evaluate, train_pipeline, MapKind, PipelineModel};
use skelmap::config::{LayoutName, RunConfig};
use skelmap::dataset::{self, JsonlReader};
use skelmap::persist::{self, TrainingMetadata};
use skelmap::segment::StreamState;
use skelmap::skeleton::SkeletonTopology;
use skelmap::som::Lattice;
use skelmap::synth::{self, SynthParams};
use skelmap::Error;

#[derive(Parser)]
#[command(name = "skelmap", version, about = "Skeleton action recognition with hierarchical self-organizing maps")]
struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model on a dataset directory.
    Train(TrainArgs),
    /// Evaluate a model on a dataset directory.
    Eval(EvalArgs),
    /// Recognize actions in a JSON-lines frame stream.
    Stream(StreamArgs),
    /// Dump model internals as CSV.
    Inspect(InspectArgs),
    /// Write a synthetic labeled dataset.
    Synth(SynthArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory of MSR skeleton .txt files and/or .jsonl sequences.
    #[arg(long)]
    data: PathBuf,
    /// Model file to write.
    #[arg(long)]
    out: PathBuf,
    /// Training report (JSON); printed to stdout when omitted.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Master seed; overrides every stage seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    map: Option<MapArg>,
    #[arg(long)]
    dynamics_order: Option<u8>,
    #[arg(long)]
    train_fraction: Option<f64>,
    #[arg(long)]
    split_seed: Option<u64>,
    #[arg(long)]
    layout: Option<LayoutArg>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// `test` re-creates the held-out split recorded in the model.
    #[arg(long, value_enum, default_value_t = SplitArg::All)]
    split: SplitArg,
    /// Evaluation report (JSON); printed to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    layout: Option<LayoutArg>,
}

#[derive(Args)]
struct StreamArgs {
    #[arg(long)]
    model: PathBuf,
    /// JSON-lines frames; standard input when omitted or `-`.
    #[arg(long)]
    input: Option<PathBuf>,
    /// TOML run configuration providing the `[segment]` table.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    consecutive: Option<usize>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    min_keys: Option<usize>,
}

#[derive(Args)]
struct InspectArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, value_enum)]
    what: InspectWhat,
    #[arg(long, value_enum, default_value_t = LayerArg::First)]
    layer: LayerArg,
    /// Dataset whose pattern vectors are dumped (`--what patterns`).
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    layout: Option<LayoutArg>,
    /// CSV output; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 5)]
    classes: usize,
    #[arg(long, default_value_t = 40)]
    per_class: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Standard deviation of the joint noise in meters.
    #[arg(long, default_value_t = SynthParams::default().noise)]
    noise: f64,
    #[arg(long, value_enum, default_value_t = FormatArg::Msr)]
    format: FormatArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum MapArg {
    Som,
    Gg,
}

#[derive(Clone, Copy, ValueEnum)]
enum LayoutArg {
    Msr20,
    Msr40,
}

impl From<LayoutArg> for LayoutName {
    fn from(l: LayoutArg) -> Self {
        match l {
            LayoutArg::Msr20 => LayoutName::Msr20,
            LayoutArg::Msr40 => LayoutName::Msr40,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SplitArg {
    All,
    Test,
}

#[derive(Clone, Copy, ValueEnum)]
enum InspectWhat {
    Weights,
    Patterns,
    Umatrix,
}

#[derive(Clone, Copy, ValueEnum)]
enum LayerArg {
    First,
    Second,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Msr,
    Jsonl,
}

/// A failure with its process exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl ToString) -> Self {
        Self {
            code: 2,
            message: message.to_string(),
        }
    }

    fn data(message: impl ToString) -> Self {
        Self {
            code: 3,
            message: message.to_string(),
        }
    }

    fn internal(message: impl ToString) -> Self {
        Self {
            code: 4,
            message: message.to_string(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) => Failure::config(e),
            Error::Logic(_) => Failure::internal(e),
            _ => Failure::data(e),
        }
    }
}

type CliResult<T> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match cli.command {
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Stream(a) => stream(a),
        Command::Inspect(a) => inspect(a),
        Command::Synth(a) => synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("skelmap: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn load_config(path: Option<&Path>) -> CliResult<RunConfig> {
    match path {
        Some(p) => Ok(RunConfig::load(p)?),
        None => Ok(RunConfig::default()),
    }
}

/// Writes to `path` atomically, or to standard output.
fn emit(path: Option<&Path>, text: &str) -> CliResult<()> {
    match path {
        Some(p) => persist::write_atomic(p, text.as_bytes()).map_err(|e| Failure::data(format!("{}: {e}", p.display()))),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(Failure::internal)
        }
    }
}

fn to_json(value: &impl serde::Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

fn train(a: TrainArgs) -> CliResult<()> {
    let mut cfg = load_config(a.config.as_deref())?;
    if let Some(s) = a.seed {
        cfg.seed = Some(s);
    }
    if let Some(m) = a.map {
        cfg.pipeline.first_map.kind = match m {
            MapArg::Som => MapKind::Som,
            MapArg::Gg => MapKind::Gg,
        };
    }
    if let Some(d) = a.dynamics_order {
        cfg.pipeline.dynamics_order = d;
    }
    if let Some(f) = a.train_fraction {
        cfg.data.train_fraction = f;
    }
    if let Some(s) = a.split_seed {
        cfg.data.split_seed = s;
    }
    if let Some(l) = a.layout {
        cfg.data.layout = l.into();
    }
    cfg.validate()?;
    let pipeline = cfg.effective_pipeline();

    let topology = SkeletonTopology::kinect20();
    let all = dataset::load_dataset_dir(&a.data, &topology, &cfg.data.layout.layout())?;
    let (train, test) = dataset::split_dataset(&all, cfg.data.train_fraction, cfg.data.split_seed)?;
    info!("{} sequences: {} train, {} test", all.len(), train.len(), test.len());
    let model = train_pipeline(&train, &topology, &pipeline)?;
    let evaluation = if test.is_empty() { None } else { Some(evaluate(&model, &test)?) };
    let metadata = TrainingMetadata {
        config: pipeline,
        train_fraction: cfg.data.train_fraction,
        split_seed: cfg.data.split_seed,
        dataset_hash: persist::dataset_hash(&all),
    };
    persist::save_model(&a.out, &model, Some(&metadata)).map_err(|e| Failure::data(format!("{}: {e}", a.out.display())))?;
    let report = json!({
        "model": a.out,
        "accuracy": evaluation.as_ref().map(|e| e.accuracy),
        "train_accuracy": model.report.train_accuracy,
        "train_sequences": train.len(),
        "test_sequences": test.len(),
        "labels": model.output.label_set,
        "dataset_hash": metadata.dataset_hash,
        "training": model.report,
        "evaluation": evaluation,
    });
    emit(a.report.as_deref(), &to_json(&report))
}

fn eval(a: EvalArgs) -> CliResult<()> {
    let (model, metadata) = persist::load_model(&a.model)?;
    let topology = &model.topology;
    let layout = a.layout.map(LayoutName::from).unwrap_or_default().layout();
    let all = dataset::load_dataset_dir(&a.data, topology, &layout)?;
    let test = match a.split {
        SplitArg::All => all,
        SplitArg::Test => {
            let meta = metadata.ok_or_else(|| Failure::data("model carries no training split to re-create"))?;
            if persist::dataset_hash(&all) != meta.dataset_hash {
                return Err(Failure::data("dataset differs from the one the model was trained on"));
            }
            dataset::split_dataset(&all, meta.train_fraction, meta.split_seed)?.1
        }
    };
    let report = evaluate(&model, &test)?;
    emit(a.out.as_deref(), &to_json(&report))
}

fn stream(a: StreamArgs) -> CliResult<()> {
    let mut params = load_config(a.config.as_deref())?.segment;
    if let Some(v) = a.theta {
        params.theta = v;
    }
    if let Some(v) = a.consecutive {
        params.consecutive = v;
    }
    if let Some(v) = a.window {
        params.window = v;
    }
    if let Some(v) = a.min_keys {
        params.min_keys = v;
    }
    params.validate().map_err(Failure::config)?;
    let (model, _) = persist::load_model(&a.model)?;
    let input: Box<dyn BufRead> = match a.input.as_deref() {
        None => Box::new(io::stdin().lock()),
        Some(p) if p == Path::new("-") => Box::new(io::stdin().lock()),
        Some(p) => Box::new(io::BufReader::new(
            fs::File::open(p).map_err(|e| Failure::data(format!("{}: {e}", p.display())))?,
        )),
    };
    let mut state = StreamState::new(&model, params)?;
    let mut reader = JsonlReader::new(model.topology.joint_count());
    let mut out = BufWriter::new(io::stdout().lock());
    let mut write_event = |e: &skelmap::RecognitionEvent| -> CliResult<()> {
        let line = serde_json::to_string(e).expect("event serializes");
        writeln!(out, "{line}").and_then(|_| out.flush()).map_err(Failure::internal)
    };
    for line in input.lines() {
        let line = line.map_err(Failure::data)?;
        if let Some((_, frame)) = reader.parse_line(&line)? {
            if let Some(e) = state.push_frame(&frame)? {
                write_event(&e)?;
            }
        }
    }
    for e in state.finish()? {
        write_event(&e)?;
    }
    Ok(())
}

fn lattice_csv(l: &Lattice) -> String {
    let mut s = String::from("row,col");
    for k in 0..l.dim() {
        s.push_str(&format!(",w{k}"));
    }
    s.push('\n');
    for n in 0..l.len() {
        let (r, c) = l.coords(n);
        s.push_str(&format!("{r},{c}"));
        for w in l.weight(n) {
            s.push_str(&format!(",{w}"));
        }
        s.push('\n');
    }
    s
}

fn umatrix_csv(l: &Lattice) -> String {
    let mut s = String::from("row,col,distance\n");
    for (n, d) in l.u_matrix().into_iter().enumerate() {
        let (r, c) = l.coords(n);
        s.push_str(&format!("{r},{c},{d}\n"));
    }
    s
}

fn patterns_csv(model: &PipelineModel, data: &Path, layout: LayoutName) -> CliResult<String> {
    let ds = dataset::load_dataset_dir(data, &model.topology, &layout.layout())?;
    let mut s = String::from("source,label");
    for k in 0..model.key_points {
        s.push_str(&format!(",r{k},c{k}"));
    }
    s.push('\n');
    for seq in &ds.sequences {
        s.push_str(&format!("{},{}", seq.source_id, seq.label.as_deref().unwrap_or("")));
        for v in model.pattern_of(seq)? {
            s.push_str(&format!(",{v}"));
        }
        s.push('\n');
    }
    Ok(s)
}

fn inspect(a: InspectArgs) -> CliResult<()> {
    let (model, _) = persist::load_model(&a.model)?;
    let layer = match a.layer {
        LayerArg::First => &model.first_map,
        LayerArg::Second => &model.second_map,
    };
    let csv = match a.what {
        InspectWhat::Weights => lattice_csv(layer),
        InspectWhat::Umatrix => umatrix_csv(layer),
        InspectWhat::Patterns => {
            let data = a.data.as_deref().ok_or_else(|| Failure::config("--what patterns needs --data"))?;
            patterns_csv(&model, data, a.layout.map(LayoutName::from).unwrap_or_default())?
        }
    };
    emit(a.out.as_deref(), &csv)
}

fn synth(a: SynthArgs) -> CliResult<()> {
    let params = SynthParams {
        classes: a.classes,
        per_class: a.per_class,
        seed: a.seed,
        noise: a.noise,
        ..SynthParams::default()
    };
    let ds = synth::generate(&params).map_err(Failure::config)?;
    match a.format {
        FormatArg::Msr => dataset::write_dataset_dir(&a.out, &ds, &LayoutName::Msr20.layout())?,
        FormatArg::Jsonl => {
            fs::create_dir_all(&a.out).map_err(Failure::data)?;
            for seq in &ds.sequences {
                let name = seq.source_id.replace(".txt", ".jsonl");
                fs::write(a.out.join(name), dataset::write_jsonl(&seq.frames)).map_err(Failure::data)?;
            }
        }
    }
    info!("wrote {} sequences to {}", ds.len(), a.out.display());
    Ok(())
}
