use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Subcommand};
use mas_core::activation::{tri_relu_identity_check, ActivationKind};
use mas_core::distance::{d_as_coupling, default_padding, padded_wasserstein_k};
use mas_core::exact::{
    degenerate_k1_embedding, dimension_bounds, onehot_mas, projection_dim, random_projection_mas, refute_erdos_szekeres,
    refute_maximal_singleton, verify_mas, verify_mas_with, EmbeddingMatrix, Extent, LogBase, VerifyOptions,
};
use mas_core::index::{build_index, BuildOptions, Index};
use mas_core::lab::{
    lipschitz_perturbation_sweep, run_holder_experiment, run_lipschitz_experiment, run_separation_experiment,
    run_sphere_relu_experiment, to_csv, ExperimentConfig, Scenario,
};
use mas_core::masnet::{
    evaluate_containment, fit_monotone_function, generate_monotone_dataset, generate_synthetic, read_jsonl, train,
    write_jsonl, Architecture, BetaParam, ContainmentPair, Dataset, FitConfig, LossKind, MasNet, MonotoneTarget,
    Optimizer, Outer, SyntheticConfig, TrainConfig, Variant,
};
use mas_core::seed::{derive_seed, with_threads};
use mas_core::weak::{midpoint_sweep, midpoint_witness, set_transformer_nonmonotone_demo};
use mas_core::{Error, GroundSpec, RealMultiset};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{self, FileConfig, ModelSection};
use crate::{Cli, Command, Format};

pub struct CliError {
    pub kind: &'static str,
    pub message: String,
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let kind = match &e {
            Error::GroundMismatch { .. } => "ground_mismatch",
            Error::DimMismatch { .. } => "dim_mismatch",
            Error::EnumerationTooLarge { .. } => "enumeration_too_large",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Precondition(_) => "precondition",
            Error::PadOrSwap { .. } => "pad_or_swap",
            Error::AttemptsExhausted { .. } => "attempts_exhausted",
            Error::NotMonotone { .. } => "not_monotone",
            Error::NotMas(_) => "not_mas",
            Error::Diverged { .. } => "diverged",
            Error::NoData => "no_data",
            Error::DuplicateId(_) => "duplicate_id",
            Error::CheckpointMismatch { .. } => "checkpoint_mismatch",
            Error::Format(_) => "malformed_file",
            Error::Io(_) => "io",
            Error::Json(_) => "malformed_json",
        };
        Self {
            kind,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> CliError {
    CliError {
        kind: "invalid_argument",
        message: message.into(),
    }
}

type CliResult<T = ()> = Result<T, CliError>;

/// Resolved global options.
struct Ctx {
    seed: u64,
    output: Option<PathBuf>,
    format: Format,
    file: FileConfig,
}

impl Ctx {
    fn emit(&self, text: &str) -> CliResult {
        match &self.output {
            Some(path) => std::fs::write(path, text).map_err(|e| Error::Io(e).into()),
            None => {
                let mut out = std::io::stdout().lock();
                out.write_all(text.as_bytes()).map_err(Error::Io)?;
                Ok(())
            }
        }
    }

    /// Writes `result` as JSON with the effective configuration under `"config"`.
    fn emit_json(&self, result: impl Serialize, config: Value) -> CliResult {
        let mut v = serde_json::to_value(result).map_err(Error::Json)?;
        match &mut v {
            Value::Object(map) => {
                map.insert("config".into(), config);
            }
            other => {
                v = json!({ "result": other.take(), "config": config });
            }
        }
        let mut text = serde_json::to_string_pretty(&v).map_err(Error::Json)?;
        text.push('\n');
        self.emit(&text)
    }

    fn json_only(&self, command: &str) -> CliResult {
        if self.format == Format::Csv {
            return Err(usage(format!("{command} has no CSV output; use --format json")));
        }
        Ok(())
    }

    fn announce_seed(&self) {
        eprintln!("seed: {}", self.seed);
    }
}

pub fn run(cli: Cli) -> CliResult {
    let file = config::load(cli.global.config.as_deref()).map_err(|m| CliError {
        kind: "malformed_file",
        message: m,
    })?;
    let threads = cli.global.threads.or(file.threads).unwrap_or(1);
    if threads == 0 {
        return Err(usage("--threads must be at least 1"));
    }
    let ctx = Ctx {
        seed: cli.global.seed.or(file.seed).unwrap_or(0),
        output: cli.global.output,
        format: cli.global.format.or(file.format).unwrap_or(Format::Json),
        file,
    };
    let command = cli.command;
    with_threads(threads, move || dispatch(&ctx, command))
}

fn dispatch(ctx: &Ctx, command: Command) -> CliResult {
    match command {
        Command::Verify(a) => verify(ctx, a),
        Command::Refute(a) => refute(ctx, a),
        Command::Embed(a) => embed(ctx, a),
        Command::Distance(a) => distance(ctx, a),
        Command::SeparationExperiment(a) => separation(ctx, a),
        Command::Holder(a) => holder(ctx, a),
        Command::Lipschitz(a) => lipschitz(ctx, a),
        Command::Train(a) => train_cmd(ctx, a),
        Command::Eval(a) => eval_cmd(ctx, a),
        Command::FitMonotone(a) => fit_cmd(ctx, a),
        Command::Index(IndexCommand::Build(a)) => index_build(ctx, a),
        Command::Index(IndexCommand::Query(a)) => index_query(ctx, a),
        Command::Bounds(a) => bounds(ctx, a),
        Command::Demo(d) => demo(ctx, d),
    }
}

/// Inline JSON when the argument starts with `[` or `{`, otherwise a file path.
fn json_arg(text: &str) -> CliResult<Value> {
    let trimmed = text.trim_start();
    let body = if trimmed.starts_with('[') || trimmed.starts_with('{') {
        text.to_string()
    } else {
        std::fs::read_to_string(text).map_err(|e| usage(format!("cannot read {text}: {e}")))?
    };
    serde_json::from_str(&body).map_err(|e| Error::Format(format!("{text}: {e}")).into())
}

fn multiset_arg(text: &str) -> CliResult<RealMultiset> {
    serde_json::from_value(json_arg(text)?).map_err(|e| Error::Format(format!("{text}: {e}")).into())
}

fn list<T: std::str::FromStr>(text: &str) -> CliResult<Vec<T>> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    text.split(',')
        .map(|p| p.trim().parse().map_err(|_| usage(format!("cannot parse list entry '{p}'"))))
        .collect()
}

// ---------------------------------------------------------------- exact

#[derive(Debug, Args)]
pub struct EmbeddingArg {
    /// `onehot:N` or a JSON file `{"m", "n", "rows"}`.
    #[arg(long)]
    pub embedding: String,
}

fn load_embedding(spec: &str) -> CliResult<EmbeddingMatrix> {
    if let Some(n) = spec.strip_prefix("onehot:") {
        let n = n.parse().map_err(|_| usage(format!("bad ground size in '{spec}'")))?;
        return Ok(onehot_mas(n)?);
    }
    serde_json::from_value(json_arg(spec)?).map_err(|e| Error::Format(format!("{spec}: {e}")).into())
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub embedding: EmbeddingArg,
    /// Largest multiset cardinality.
    #[arg(long)]
    pub k: usize,
    /// Slack added to every dominance comparison.
    #[arg(long, default_value_t = 0.0)]
    pub slack: f64,
}

fn verify(ctx: &Ctx, a: VerifyArgs) -> CliResult {
    ctx.json_only("verify")?;
    let e = load_embedding(&a.embedding.embedding)?;
    let verdict = verify_mas_with(&e, a.k, VerifyOptions { slack: a.slack, ..Default::default() })?;
    ctx.emit_json(verdict, json!({ "embedding": a.embedding.embedding, "k": a.k, "slack": a.slack }))
}

#[derive(Debug, Args)]
pub struct RefuteArgs {
    #[command(flatten)]
    pub embedding: EmbeddingArg,
    /// Cardinality bound used by the maximal-singleton argument.
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    /// `maximal-singleton` or `erdos-szekeres`.
    #[arg(long, default_value = "erdos-szekeres")]
    pub method: String,
}

fn refute(ctx: &Ctx, a: RefuteArgs) -> CliResult {
    ctx.json_only("refute")?;
    let e = load_embedding(&a.embedding.embedding)?;
    let witness = match a.method.as_str() {
        "maximal-singleton" => refute_maximal_singleton(&e, a.k)?,
        "erdos-szekeres" => refute_erdos_szekeres(&e)?,
        m => return Err(usage(format!("unknown method '{m}', expected maximal-singleton or erdos-szekeres"))),
    };
    let verified = match &witness {
        Some(w) => w.is_separability_violation(&e)?,
        None => false,
    };
    ctx.emit_json(
        json!({ "refuted": witness.is_some(), "witness": witness, "verified": verified }),
        json!({ "embedding": a.embedding.embedding, "k": a.k, "method": a.method }),
    )
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub k: usize,
    /// Rows; defaults to ⌈(k+2)^(k+2) ln n⌉.
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long, default_value_t = 20)]
    pub max_attempts: usize,
    /// Also run the brute-force verifier on the result.
    #[arg(long)]
    pub verify: bool,
}

fn embed(ctx: &Ctx, a: EmbedArgs) -> CliResult {
    ctx.json_only("embed")?;
    ctx.announce_seed();
    let m = a.m.unwrap_or_else(|| projection_dim(a.n, a.k));
    let (e, attempts) = random_projection_mas(a.n, a.k, m, ctx.seed, a.max_attempts)?;
    let verified = if a.verify { Some(verify_mas(&e, a.k)?.is_mas) } else { None };
    ctx.emit_json(
        json!({ "embedding": e, "attempts": attempts, "verified": verified }),
        json!({ "n": a.n, "k": a.k, "m": m, "max_attempts": a.max_attempts, "seed": ctx.seed }),
    )
}

// ---------------------------------------------------------------- distance

#[derive(Debug, Args)]
pub struct DistanceArgs {
    /// Multiset S as inline JSON (list of points) or a file.
    #[arg(long)]
    pub s: String,
    #[arg(long)]
    pub t: String,
    /// Also report the padded Wasserstein distance for cardinality bound k.
    #[arg(long)]
    pub k: Option<usize>,
    /// Norm bound of the ground set, used to place the padding point.
    #[arg(long, default_value_t = 1.0)]
    pub bound: f64,
}

fn distance(ctx: &Ctx, a: DistanceArgs) -> CliResult {
    ctx.json_only("distance")?;
    let (s, t) = (multiset_arg(&a.s)?, multiset_arg(&a.t)?);
    let coupling = d_as_coupling(&s, &t)?;
    let w_k = match a.k {
        Some(k) => Some(padded_wasserstein_k(&s, &t, k, &default_padding(s.dim(), a.bound))?),
        None => None,
    };
    ctx.emit_json(
        json!({ "d_as": coupling.total_cost, "coupling": coupling.map, "w_k": w_k }),
        json!({ "k": a.k, "bound": a.bound }),
    )
}

// ---------------------------------------------------------------- lab

#[derive(Debug, Args)]
pub struct LabArgs {
    #[arg(long)]
    pub num_pairs: Option<usize>,
    #[arg(long)]
    pub num_controls: Option<usize>,
    #[arg(long)]
    pub num_param_draws: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    /// Comma-separated list of output dimensions.
    #[arg(long)]
    pub m_list: Option<String>,
    /// Point dimension.
    #[arg(long)]
    pub d: Option<usize>,
    /// Half-width of the cube ground set.
    #[arg(long)]
    pub bound: Option<f64>,
    /// `hat`, `tri` or `relu`.
    #[arg(long)]
    pub activation: Option<String>,
    #[arg(long)]
    pub epsilon_min: Option<f64>,
    #[arg(long)]
    pub epsilon_max: Option<f64>,
}

fn experiment_config(ctx: &Ctx, a: &LabArgs) -> CliResult<ExperimentConfig> {
    let mut cfg = ctx.file.experiment.clone().unwrap_or_default();
    cfg.seed = ctx.seed;
    if let Some(v) = a.num_pairs {
        cfg.num_pairs = v;
    }
    if let Some(v) = a.num_controls {
        cfg.num_controls = v;
    }
    if let Some(v) = a.num_param_draws {
        cfg.num_param_draws = v;
    }
    if let Some(v) = a.k {
        cfg.k = v;
    }
    if let Some(v) = &a.m_list {
        cfg.m_list = list(v)?;
    }
    if a.d.is_some() || a.bound.is_some() {
        cfg.ground = match cfg.ground {
            GroundSpec::Cube { d, bound } => GroundSpec::Cube {
                d: a.d.unwrap_or(d),
                bound: a.bound.unwrap_or(bound),
            },
            GroundSpec::Sphere { d } => GroundSpec::Sphere { d: a.d.unwrap_or(d) },
            g => g,
        };
    }
    if let Some(v) = &a.activation {
        cfg.activation = ActivationKind::parse(v)?;
    }
    if let Some(v) = a.epsilon_min {
        cfg.epsilon_min = v;
    }
    if let Some(v) = a.epsilon_max {
        cfg.epsilon_max = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn emit_lab(ctx: &Ctx, cfg: &ExperimentConfig, report: impl Serialize, pairs: &[mas_core::lab::PairReport]) -> CliResult {
    match ctx.format {
        Format::Csv => ctx.emit(&to_csv(cfg, pairs)),
        Format::Json => ctx.emit_json(report, serde_json::to_value(cfg).map_err(Error::Json)?),
    }
}

fn separation(ctx: &Ctx, a: LabArgs) -> CliResult {
    ctx.announce_seed();
    let cfg = experiment_config(ctx, &a)?;
    let r = run_separation_experiment(&cfg)?;
    emit_lab(ctx, &cfg, &r, &r.pairs)
}

#[derive(Debug, Args)]
pub struct HolderArgs {
    #[command(flatten)]
    pub lab: LabArgs,
    /// Use ReLU coordinates on the unit sphere instead of hats on a cube.
    #[arg(long)]
    pub sphere_relu: bool,
}

fn holder(ctx: &Ctx, a: HolderArgs) -> CliResult {
    ctx.announce_seed();
    let mut cfg = experiment_config(ctx, &a.lab)?;
    let r = if a.sphere_relu {
        cfg.scenario = Scenario::ReluSphere;
        cfg.ground = GroundSpec::Sphere { d: cfg.dim() };
        cfg.activation = ActivationKind::Relu;
        run_sphere_relu_experiment(&cfg)?
    } else {
        run_holder_experiment(&cfg)?
    };
    emit_lab(ctx, &cfg, &r, &r.pairs)
}

#[derive(Debug, Args)]
pub struct LipschitzArgs {
    #[command(flatten)]
    pub lab: LabArgs,
    /// Instead of random pairs, perturb random sets by each of these
    /// comma-separated displacements.
    #[arg(long)]
    pub sweep: Option<String>,
    /// Base sets for the sweep.
    #[arg(long, default_value_t = 20)]
    pub bases: usize,
}

fn lipschitz(ctx: &Ctx, a: LipschitzArgs) -> CliResult {
    ctx.announce_seed();
    let cfg = experiment_config(ctx, &a.lab)?;
    if let Some(eps) = &a.sweep {
        ctx.json_only("lipschitz --sweep")?;
        let rows = lipschitz_perturbation_sweep(&cfg, a.bases, &list::<f64>(eps)?)?;
        let mut c = serde_json::to_value(&cfg).map_err(Error::Json)?;
        c["bases"] = json!(a.bases);
        return ctx.emit_json(json!({ "sweep": rows }), c);
    }
    let r = run_lipschitz_experiment(&cfg)?;
    emit_lab(ctx, &cfg, &r, &r.pairs)
}

// ---------------------------------------------------------------- masnet

#[derive(Debug, Args)]
pub struct DataArgs {
    /// JSON-lines file of containment pairs; synthetic data is generated when absent.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub num_pairs: Option<usize>,
    #[arg(long)]
    pub s_size: Option<usize>,
    #[arg(long)]
    pub t_size: Option<usize>,
    /// Point dimension.
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub noise_std: Option<f64>,
    #[arg(long)]
    pub pos_ratio: Option<f64>,
    /// Write the generated pairs here as JSON lines.
    #[arg(long)]
    pub save_data: Option<PathBuf>,
}

fn synthetic_config(ctx: &Ctx, a: &DataArgs) -> SyntheticConfig {
    let mut c = ctx.file.data.clone().unwrap_or_default();
    c.seed = derive_seed(ctx.seed, &[1]);
    c.num_pairs = a.num_pairs.unwrap_or(c.num_pairs);
    c.s_size = a.s_size.unwrap_or(c.s_size);
    c.t_size = a.t_size.unwrap_or(c.t_size);
    c.d = a.d.unwrap_or(c.d);
    c.noise_std = a.noise_std.unwrap_or(c.noise_std);
    c.pos_ratio = a.pos_ratio.unwrap_or(c.pos_ratio);
    c
}

fn load_pairs(path: &Path) -> CliResult<Vec<ContainmentPair>> {
    let f = std::fs::File::open(path).map_err(|e| usage(format!("cannot open {}: {e}", path.display())))?;
    Ok(read_jsonl(BufReader::new(f))?)
}

/// Pairs and a JSON description of where they came from.
fn obtain_pairs(ctx: &Ctx, a: &DataArgs) -> CliResult<(Vec<ContainmentPair>, Value)> {
    let (pairs, desc) = match &a.data {
        Some(path) => (load_pairs(path)?, json!({ "file": path })),
        None => {
            let c = synthetic_config(ctx, a);
            (generate_synthetic(&c)?, serde_json::to_value(&c).map_err(Error::Json)?)
        }
    };
    if let Some(out) = &a.save_data {
        let f = std::fs::File::create(out).map_err(Error::Io)?;
        let mut w = std::io::BufWriter::new(f);
        write_jsonl(&pairs, &mut w)?;
        w.flush().map_err(Error::Io)?;
    }
    Ok((pairs, desc))
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// `relu_mas`, `hat_mas` or `tri_mas`.
    #[arg(long)]
    pub variant: Option<String>,
    /// Output dimension of the pooled embedding.
    #[arg(long)]
    pub m: Option<usize>,
    /// Comma-separated hidden widths of the inner map; empty for a single affine layer.
    #[arg(long)]
    pub hidden: Option<String>,
    /// Comma-separated hidden widths of a monotone outer map.
    #[arg(long)]
    pub outer_hidden: Option<String>,
    /// Output width of the monotone outer map; without it the outer map is the identity.
    #[arg(long)]
    pub out_dim: Option<usize>,
}

fn architecture(ctx: &Ctx, a: &ModelArgs, d: usize, default_out: Option<usize>) -> CliResult<Architecture> {
    let sec: ModelSection = ctx.file.model.clone().unwrap_or_default();
    let variant = Variant::parse(a.variant.as_deref().or(sec.variant.as_deref()).unwrap_or("hat_mas"))?;
    let m = a.m.or(sec.m).unwrap_or(16);
    let mut arch = Architecture::new(d, m, variant);
    if let Some(h) = &a.hidden {
        arch.hidden = list(h)?;
    } else if let Some(h) = sec.hidden {
        arch.hidden = h;
    }
    let outer_hidden = match &a.outer_hidden {
        Some(h) => Some(list(h)?),
        None => sec.outer_hidden,
    };
    if let Some(out_dim) = a.out_dim.or(sec.out_dim).or(default_out) {
        arch.outer = Outer::Monotone {
            hidden: outer_hidden.unwrap_or_default(),
            out_dim,
        };
    } else if outer_hidden.is_some() {
        return Err(usage("--outer-hidden needs --out-dim"));
    }
    if let Some(b) = sec.beta_param.as_deref() {
        arch.beta_param = match b {
            "abs" => BetaParam::Abs,
            "elu" => BetaParam::Elu,
            b => return Err(usage(format!("unknown beta_param '{b}', expected abs or elu"))),
        };
    }
    arch.upsilon = sec.upsilon.unwrap_or(arch.upsilon);
    arch.tau = sec.tau.unwrap_or(arch.tau);
    arch.validate()?;
    Ok(arch)
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Training margin.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Slack of the dominance test used for dev and test accuracy.
    #[arg(long)]
    pub delta_eval: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    /// `adam` or `sgd`.
    #[arg(long)]
    pub optimizer: Option<String>,
    /// `separating` (default) or `verbatim` for the negative-pair hinge term.
    #[arg(long)]
    pub loss: Option<String>,
    /// Write the trained checkpoint here.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
}

fn train_config(ctx: &Ctx, a: &TrainArgs) -> CliResult<TrainConfig> {
    let mut c = ctx.file.train.clone().unwrap_or_default();
    c.seed = derive_seed(ctx.seed, &[3]);
    c.epochs = a.epochs.unwrap_or(c.epochs);
    c.lr = a.lr.unwrap_or(c.lr);
    c.delta = a.delta.unwrap_or(c.delta);
    c.delta_eval = a.delta_eval.unwrap_or(c.delta_eval);
    c.batch_size = a.batch_size.unwrap_or(c.batch_size);
    c.patience = a.patience.unwrap_or(c.patience);
    if let Some(o) = a.optimizer.as_deref() {
        c.optimizer = match o {
            "adam" => Optimizer::default(),
            "sgd" => Optimizer::Sgd,
            o => return Err(usage(format!("unknown optimizer '{o}', expected adam or sgd"))),
        };
    }
    if let Some(l) = a.loss.as_deref() {
        c.loss = match l {
            "separating" => LossKind::Separating,
            "verbatim" => LossKind::Verbatim,
            l => return Err(usage(format!("unknown loss '{l}', expected separating or verbatim"))),
        };
    }
    c.validate()?;
    Ok(c)
}

fn train_cmd(ctx: &Ctx, a: TrainArgs) -> CliResult {
    ctx.announce_seed();
    let cfg = train_config(ctx, &a)?;
    let (pairs, data_desc) = obtain_pairs(ctx, &a.data)?;
    let d = pairs.first().map(|p| p.t.dim()).ok_or(Error::NoData)?;
    let arch = architecture(ctx, &a.model, d, None)?;
    let model = MasNet::new(arch.clone(), derive_seed(ctx.seed, &[2]))?;
    let data = Dataset::from_pairs(pairs);
    let (trained, history) = train(&model, &data, &cfg)?;
    if let Some(path) = &a.checkpoint {
        std::fs::write(path, trained.to_json()).map_err(Error::Io)?;
    }
    let test = if data.test.is_empty() {
        None
    } else {
        Some(evaluate_containment(&trained, &data.test, cfg.delta_eval)?)
    };
    let config = json!({ "seed": ctx.seed, "data": data_desc, "model": arch, "train": cfg });
    if ctx.format == Format::Csv {
        let mut out = format!("# config: {config}\nepoch,train_loss,dev_loss,dev_accuracy,monotone_ok\n");
        for e in &history.epochs {
            out.push_str(&format!("{},{},{},{},{}\n", e.epoch, e.train_loss, e.dev_loss, e.dev_accuracy, e.monotone_ok));
        }
        return ctx.emit(&out);
    }
    ctx.emit_json(
        json!({ "history": history, "test": test, "checkpoint_hash": trained.checkpoint_hash() }),
        config,
    )
}

fn load_model(path: &Path) -> CliResult<MasNet> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    Ok(MasNet::from_json(&text)?)
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 0.0)]
    pub delta_eval: f64,
    /// `train`, `dev`, `test` or `all`.
    #[arg(long, default_value = "test")]
    pub split: String,
}

fn eval_cmd(ctx: &Ctx, a: EvalArgs) -> CliResult {
    ctx.json_only("eval")?;
    let model = load_model(&a.checkpoint)?;
    let (pairs, data_desc) = obtain_pairs(ctx, &a.data)?;
    let data = Dataset::from_pairs(pairs.clone());
    let chosen = match a.split.as_str() {
        "train" => data.train,
        "dev" => data.dev,
        "test" => data.test,
        "all" => pairs,
        s => return Err(usage(format!("unknown split '{s}'"))),
    };
    let e = evaluate_containment(&model, &chosen, a.delta_eval)?;
    ctx.emit_json(
        e,
        json!({ "checkpoint_hash": model.checkpoint_hash(), "data": data_desc, "split": a.split, "delta_eval": a.delta_eval }),
    )
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// `cardinality`, `constant`, `hat_coverage` or `relu_max`.
    #[arg(long, default_value = "hat_coverage")]
    pub target: String,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 2000)]
    pub num_sets: usize,
    #[arg(long, default_value_t = 10)]
    pub max_size: usize,
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
}

fn fit_cmd(ctx: &Ctx, a: FitArgs) -> CliResult {
    ctx.json_only("fit-monotone")?;
    ctx.announce_seed();
    let target = MonotoneTarget::builtin(&a.target, a.d, derive_seed(ctx.seed, &[4]))?;
    let data = generate_monotone_dataset(&target, a.num_sets, a.max_size, a.d, derive_seed(ctx.seed, &[1]))?;
    let arch = architecture(ctx, &a.model, a.d, Some(1))?;
    if arch.out_dim() != 1 {
        return Err(usage("fit-monotone needs a scalar model (--out-dim 1)"));
    }
    let model = MasNet::new(arch.clone(), derive_seed(ctx.seed, &[2]))?;
    let mut cfg: FitConfig = ctx.file.fit.clone().unwrap_or_default();
    cfg.seed = derive_seed(ctx.seed, &[3]);
    cfg.epochs = a.epochs.unwrap_or(cfg.epochs);
    cfg.lr = a.lr.unwrap_or(cfg.lr);
    cfg.batch_size = a.batch_size.unwrap_or(cfg.batch_size);
    let (fitted, report) = fit_monotone_function(&model, &data, &cfg)?;
    if let Some(path) = &a.checkpoint {
        std::fs::write(path, fitted.to_json()).map_err(Error::Io)?;
    }
    ctx.emit_json(
        report,
        json!({ "seed": ctx.seed, "target": target, "num_sets": a.num_sets, "max_size": a.max_size, "d": a.d, "model": arch, "fit": cfg }),
    )
}

// ---------------------------------------------------------------- index

#[derive(Debug, Subcommand)]
pub enum IndexCommand {
    /// Embed a corpus of targets once and store the vectors.
    Build(IndexBuildArgs),
    /// Targets whose stored vector dominates F(S), optionally re-verified exactly.
    Query(IndexQueryArgs),
}

#[derive(Debug, Args)]
pub struct IndexBuildArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// JSON lines `{"id": ..., "set": [[...], ...]}`.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Index file to write.
    #[arg(long)]
    pub index: PathBuf,
    /// Do not store raw targets (disables exact re-verification).
    #[arg(long)]
    pub no_targets: bool,
    #[arg(long, default_value_t = 0.0)]
    pub delta_eval: f64,
    /// Build timestamp recorded in the header, seconds since the epoch.
    #[arg(long, default_value_t = 0)]
    pub built_at: u64,
}

#[derive(serde::Deserialize)]
struct CorpusLine {
    id: String,
    set: RealMultiset,
}

fn index_build(ctx: &Ctx, a: IndexBuildArgs) -> CliResult {
    ctx.json_only("index build")?;
    let model = load_model(&a.checkpoint)?;
    let f = std::fs::File::open(&a.corpus).map_err(|e| usage(format!("cannot open {}: {e}", a.corpus.display())))?;
    let mut corpus = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(Error::Io)?;
        if line.trim().is_empty() {
            continue;
        }
        let c: CorpusLine =
            serde_json::from_str(&line).map_err(|e| Error::Format(format!("corpus line {}: {e}", i + 1)))?;
        corpus.push((c.id, c.set));
    }
    let opts = BuildOptions {
        store_targets: !a.no_targets,
        delta_eval: a.delta_eval,
        built_at: a.built_at,
    };
    let index = build_index(&model, &corpus, opts)?;
    index.save(&a.index)?;
    ctx.emit_json(
        json!({ "entries": index.len(), "model_ref": index.header.model_ref, "m": index.header.m, "d": index.header.d }),
        json!({ "index": a.index, "corpus": a.corpus, "store_targets": opts.store_targets, "delta_eval": a.delta_eval, "built_at": a.built_at }),
    )
}

#[derive(Debug, Args)]
pub struct IndexQueryArgs {
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Query multiset as inline JSON or a file.
    #[arg(long)]
    pub set: String,
    /// Dominance slack; defaults to the value stored in the index.
    #[arg(long)]
    pub delta_eval: Option<f64>,
    /// Keep only hits that are exact sub-multisets up to --tol.
    #[arg(long)]
    pub verify: bool,
    #[arg(long, default_value_t = 0.0)]
    pub tol: f64,
}

fn index_query(ctx: &Ctx, a: IndexQueryArgs) -> CliResult {
    ctx.json_only("index query")?;
    let model = load_model(&a.checkpoint)?;
    let index = Index::load_for(&a.index, &model)?;
    let s = multiset_arg(&a.set)?;
    let delta = a.delta_eval.unwrap_or(index.header.delta_eval);
    let hits = index.query(&model, &s, delta, a.verify.then_some(a.tol))?;
    ctx.emit_json(
        json!({ "hits": hits }),
        json!({ "index": a.index, "delta_eval": delta, "verify": a.verify, "tol": a.tol }),
    )
}

// ---------------------------------------------------------------- bounds and demos

#[derive(Debug, Args)]
pub struct BoundsArgs {
    /// Ground-set size, or `inf`.
    #[arg(long)]
    pub n: String,
    /// Cardinality bound, or `inf`.
    #[arg(long)]
    pub k: String,
    /// Logarithm used in the upper bound: `e`, `2` or `10`.
    #[arg(long, default_value = "e")]
    pub log_base: String,
}

fn bounds(ctx: &Ctx, a: BoundsArgs) -> CliResult {
    ctx.json_only("bounds")?;
    let b = dimension_bounds(Extent::parse(&a.n)?, Extent::parse(&a.k)?, LogBase::parse(&a.log_base)?)?;
    ctx.emit_json(b, json!({ "n": a.n, "k": a.k, "log_base": a.log_base }))
}

#[derive(Debug, Subcommand)]
pub enum DemoCommand {
    /// Monotone activations cannot separate {(x+y)/2} from {x, y}; hats can.
    #[command(name = "prop6", visible_alias = "midpoint")]
    Midpoint(MidpointArgs),
    /// Sum-pooled attention is not monotone: adding the zero vector lowers an output.
    #[command(name = "prop7", visible_alias = "attention")]
    Attention(AttentionArgs),
    /// TRI equals its two-layer ReLU form on a grid.
    TriIdentity(TriArgs),
    /// The two-dimensional MAS embedding of sets of at most one real number.
    K1(K1Args),
}

#[derive(Debug, Args)]
pub struct MidpointArgs {
    /// Comma-separated point x.
    #[arg(long, default_value = "0,0")]
    pub x: String,
    #[arg(long, default_value = "1,0")]
    pub y: String,
    #[arg(long, default_value_t = 10_000)]
    pub draws: usize,
}

#[derive(Debug, Args)]
pub struct AttentionArgs {
    #[arg(long, default_value_t = 3)]
    pub d: usize,
}

#[derive(Debug, Args)]
pub struct TriArgs {
    #[arg(long, default_value_t = -1.0)]
    pub from: f64,
    #[arg(long, default_value_t = 2.0)]
    pub to: f64,
    #[arg(long, default_value_t = 3001)]
    pub points: usize,
}

#[derive(Debug, Args)]
pub struct K1Args {
    /// Grid points in [-1, 1].
    #[arg(long, default_value_t = 41)]
    pub points: usize,
}

fn demo(ctx: &Ctx, d: DemoCommand) -> CliResult {
    ctx.json_only("demo")?;
    match d {
        DemoCommand::Midpoint(a) => {
            ctx.announce_seed();
            let (x, y) = (list::<f64>(&a.x)?, list::<f64>(&a.y)?);
            let (s, t) = midpoint_witness(&x, &y)?;
            let relu = midpoint_sweep(&x, &y, ActivationKind::Relu, a.draws, ctx.seed)?;
            let hat = midpoint_sweep(&x, &y, ActivationKind::Tri, a.draws, ctx.seed)?;
            ctx.emit_json(
                json!({ "s": s, "t": t, "relu_separations": relu, "tri_separations": hat }),
                json!({ "x": x, "y": y, "draws": a.draws, "seed": ctx.seed }),
            )
        }
        DemoCommand::Attention(a) => {
            ctx.announce_seed();
            let demo = set_transformer_nonmonotone_demo(a.d, ctx.seed)?;
            ctx.emit_json(demo, json!({ "d": a.d, "seed": ctx.seed }))
        }
        DemoCommand::TriIdentity(a) => {
            if a.points < 2 || !(a.from < a.to) {
                return Err(usage("need at least 2 points and from < to"));
            }
            let step = (a.to - a.from) / (a.points - 1) as f64;
            let grid: Vec<f64> = (0..a.points).map(|i| a.from + step * i as f64).collect();
            ctx.emit_json(
                json!({ "max_abs_deviation": tri_relu_identity_check(&grid) }),
                json!({ "from": a.from, "to": a.to, "points": a.points }),
            )
        }
        DemoCommand::K1(a) => {
            if a.points < 2 {
                return Err(usage("need at least 2 grid points"));
            }
            let mut sets: Vec<Option<f64>> = vec![None];
            sets.extend((0..a.points).map(|i| Some(-1.0 + 2.0 * i as f64 / (a.points - 1) as f64)));
            let images: Vec<[f64; 2]> = sets.iter().map(|x| degenerate_k1_embedding(*x)).collect::<Result<_, _>>()?;
            let mut violations = 0;
            for (i, s) in sets.iter().enumerate() {
                for (j, t) in sets.iter().enumerate() {
                    let subset = s.is_none() || s == t;
                    let dominated = images[i][0] <= images[j][0] && images[i][1] <= images[j][1];
                    violations += usize::from(subset != dominated);
                }
            }
            ctx.emit_json(
                json!({ "is_mas": violations == 0, "checked_pairs": sets.len() * sets.len(), "violations": violations }),
                json!({ "points": a.points }),
            )
        }
    }
}
