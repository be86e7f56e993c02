use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context as _, Result};
use clap::Args;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use spikeflag_core::data::{patch, DEFAULT_PATCH_SIZE};
use spikeflag_core::encoding::raster::write_pgm;
use spikeflag_core::hpo::{
    read_report_rows, read_trials, repeat_eval, run_search, select_best, summarize_report, write_report_rows,
    write_summary_csv, BudgetCaps, MethodSummary, ReportRow, SearchConfig, TrialRecord,
};
use spikeflag_core::metrics::evaluate;
use spikeflag_core::pipeline::{evaluate_model, prepare_items};
use spikeflag_core::snn::{read_checkpoint, write_checkpoint, write_history_csv, DEFAULT_HIDDEN_WIDTH};
use spikeflag_core::{
    load_dataset, normalize, Dataset, EncodingConfig, EncodingMethod, Experiment, GeneratorConfig, Method, Metric,
    TrialParams,
};

use crate::config::{defaults_of, load_section, resolve, sidecar, usage, RunManifest};

pub struct Context {
    pub config: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
}

impl Context {
    /// Flags over the `[name]` config table over `defaults`.
    fn settings<T>(&self, name: &str, defaults: &T, flags: &impl Serialize) -> Result<T>
    where
        T: Serialize + DeserializeOwned,
    {
        let section = load_section(self.config.as_deref(), name)?;
        resolve(defaults_of(defaults)?, section, flags)
    }

    fn write_manifest(&self, manifest: &RunManifest, default: Option<PathBuf>) -> Result<()> {
        match self.manifest.clone().or(default) {
            Some(path) => manifest.write(&path),
            None => Ok(()),
        }
    }
}

fn required<'a, T>(value: &'a Option<T>, flag: &str) -> Result<&'a T> {
    value.as_ref().ok_or_else(|| usage(format!("missing --{flag}")))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |x| format!("{x:.4}"))
}

// ---------------------------------------------------------------- generate

#[derive(Args, Serialize)]
pub struct GenerateArgs {
    /// Output directory for the dataset.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_train: Option<usize>,
    #[arg(long)]
    n_test: Option<usize>,
    #[arg(long)]
    freq_channels: Option<usize>,
    #[arg(long)]
    time_steps: Option<usize>,
    #[arg(long)]
    target_contamination: Option<f64>,
    #[arg(long)]
    noise_sigma: Option<f64>,
    /// Start from the 420/140 x 512x512 preset instead of the desk-scale default.
    #[arg(long)]
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    hera_scale: bool,
}

#[derive(Serialize, Deserialize)]
struct GenerateSettings {
    out: Option<PathBuf>,
    #[serde(flatten)]
    generator: GeneratorConfig,
}

pub fn generate(ctx: &Context, args: GenerateArgs) -> Result<()> {
    let section = load_section(ctx.config.as_deref(), "generate")?;
    let hera = args.hera_scale || section.get("hera_scale").and_then(|v| v.as_bool()).unwrap_or(false);
    let mut section = section;
    section.remove("hera_scale");
    let base = GenerateSettings {
        out: None,
        generator: if hera {
            GeneratorConfig::hera_scale()
        } else {
            GeneratorConfig::default()
        },
    };
    let mut flags = defaults_of(&args)?;
    flags.remove("hera_scale");
    let s: GenerateSettings = resolve(defaults_of(&base)?, section, &flags)?;
    let out = required(&s.out, "out")?.clone();
    s.generator.validate()?;

    create_dir(&out)?;
    let manifest = RunManifest::new("generate", &s)?
        .seed("generator", s.generator.seed)
        .artifact("dataset", &out.join("manifest.toml"));
    ctx.write_manifest(&manifest, Some(out.join("run_manifest.toml")))?;

    let (ds, dm) = s.generator.generate_to(&out)?;
    println!(
        "contamination {:.4} (target {:.4} +/- {:.4}), {} train + {} test spectrograms of {}x{}",
        dm.contamination_fraction,
        s.generator.target_contamination,
        s.generator.contamination_tolerance,
        ds.train.len(),
        ds.test.len(),
        s.generator.freq_channels,
        s.generator.time_steps,
    );
    Ok(())
}

// ---------------------------------------------------------------- encode

#[derive(Args, Serialize)]
pub struct EncodeArgs {
    /// Dataset directory or manifest.
    #[arg(long)]
    data: Option<PathBuf>,
    /// latency, rate, delta, sf-first, sf-direct or sf-latency.
    #[arg(long)]
    method: Option<EncodingMethod>,
    #[arg(long)]
    exposure: Option<usize>,
    /// train or test.
    #[arg(long)]
    split: Option<String>,
    /// Index of the spectrogram within the split.
    #[arg(long)]
    item: Option<usize>,
    /// Encode only this patch (row-major tile index) instead of the whole spectrogram.
    #[arg(long)]
    patch: Option<usize>,
    #[arg(long)]
    patch_size: Option<usize>,
    /// Seed for the rate encoder.
    #[arg(long)]
    seed: Option<u64>,
    /// Write a binary PGM raster here.
    #[arg(long)]
    raster: Option<PathBuf>,
    /// Write the spike train here (TOML header plus a `.bin` of 0/1 bytes, slot-major).
    #[arg(long)]
    spikes: Option<PathBuf>,
}

#[derive(Serialize, Deserialize)]
struct EncodeSettings {
    data: Option<PathBuf>,
    method: EncodingMethod,
    exposure: usize,
    split: String,
    item: usize,
    patch: Option<usize>,
    patch_size: usize,
    seed: u64,
    raster: Option<PathBuf>,
    spikes: Option<PathBuf>,
}

#[derive(Serialize)]
struct SpikeHeader {
    method: EncodingMethod,
    channels: usize,
    steps: usize,
    exposure: usize,
    data: String,
}

pub fn encode(ctx: &Context, args: EncodeArgs) -> Result<()> {
    let defaults = EncodeSettings {
        data: None,
        method: EncodingMethod::Latency,
        exposure: EncodingConfig::default().exposure,
        split: "test".into(),
        item: 0,
        patch: None,
        patch_size: DEFAULT_PATCH_SIZE,
        seed: 0,
        raster: None,
        spikes: None,
    };
    let s = ctx.settings("encode", &defaults, &args)?;
    let data = required(&s.data, "data")?;
    if s.raster.is_none() && s.spikes.is_none() {
        return Err(usage("nothing to write: pass --raster and/or --spikes"));
    }
    let enc = EncodingConfig::new(s.method, s.exposure);
    enc.validate()?;

    let mut manifest = RunManifest::new("encode", &s)?.seed("encoder", s.seed);
    for (name, path) in [("raster", &s.raster), ("spikes", &s.spikes)] {
        if let Some(p) = path {
            manifest = manifest.artifact(name, p);
        }
    }
    let primary = s.raster.as_ref().or(s.spikes.as_ref()).map(|p| sidecar(p));
    ctx.write_manifest(&manifest, primary)?;

    let ds = load_dataset(data)?;
    let items = match s.split.as_str() {
        "train" => &ds.train,
        "test" => &ds.test,
        other => return Err(usage(format!("unknown split `{other}`"))),
    };
    let item = items.get(s.item).ok_or_else(|| {
        usage(format!(
            "{} split has {} items, no index {}",
            s.split,
            items.len(),
            s.item
        ))
    })?;
    let spec = normalize(&item.spectrogram)?;
    let (values, channels, steps) = match s.patch {
        None => (spec.values().to_vec(), spec.freq_channels(), spec.time_steps()),
        Some(k) => {
            let tiles = patch(&spec, &item.mask, s.patch_size)?;
            let tile = tiles
                .into_iter()
                .nth(k)
                .ok_or_else(|| usage(format!("no patch {k} at size {}", s.patch_size)))?;
            (tile.values, tile.size, tile.size)
        }
    };
    let train = enc.encode_input(&values, channels, steps, s.seed)?;

    if let Some(path) = &s.raster {
        write_pgm(path, &train)?;
    }
    if let Some(path) = &s.spikes {
        let bin = path.with_extension("bin");
        let header = SpikeHeader {
            method: s.method,
            channels: train.channels(),
            steps: train.steps(),
            exposure: train.exposure(),
            data: bin.file_name().unwrap_or_default().to_string_lossy().into_owned(),
        };
        fs::write(&bin, train.as_slice()).with_context(|| format!("writing {}", bin.display()))?;
        fs::write(path, toml::to_string(&header)?).with_context(|| format!("writing {}", path.display()))?;
    }
    println!(
        "{} spikes over {} channels x {} slots",
        train.count(),
        train.channels(),
        train.slots()
    );
    Ok(())
}

// ---------------------------------------------------------------- shared experiment settings

#[derive(Args, Serialize)]
pub struct ExperimentArgs {
    /// Dataset directory or manifest.
    #[arg(long)]
    data: Option<PathBuf>,
    /// latency, rate, delta, sf-first, sf-direct, sf-latency or ann.
    #[arg(long)]
    method: Option<Method>,
    #[arg(long)]
    patch_size: Option<usize>,
    #[arg(long)]
    hidden_width: Option<usize>,
    /// Initial learning rate.
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    lr_patience: Option<usize>,
    #[arg(long)]
    stop_patience: Option<usize>,
    #[arg(long)]
    validation_fraction: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct ExperimentSettings {
    data: Option<PathBuf>,
    method: Method,
    patch_size: usize,
    hidden_width: usize,
    lr: f64,
    lr_patience: usize,
    stop_patience: usize,
    validation_fraction: f64,
}

impl Default for ExperimentSettings {
    fn default() -> Self {
        let t = spikeflag_core::TrainingConfig::default();
        Self {
            data: None,
            method: Method::Snn(EncodingMethod::Latency),
            patch_size: DEFAULT_PATCH_SIZE,
            hidden_width: DEFAULT_HIDDEN_WIDTH,
            lr: t.initial_lr,
            lr_patience: t.lr_patience,
            stop_patience: t.stop_patience,
            validation_fraction: t.validation_fraction,
        }
    }
}

impl ExperimentSettings {
    fn load(&self) -> Result<(Dataset, Experiment)> {
        let ds = load_dataset(required(&self.data, "data")?)?;
        let mut exp = Experiment::new(&ds, self.patch_size)?;
        exp.hidden_width = self.hidden_width;
        exp.training.initial_lr = self.lr;
        exp.training.lr_patience = self.lr_patience;
        exp.training.stop_patience = self.stop_patience;
        exp.training.validation_fraction = self.validation_fraction;
        exp.training.validate()?;
        Ok((ds, exp))
    }
}

#[derive(Args, Serialize)]
pub struct ParamArgs {
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Membrane decay.
    #[arg(long)]
    beta: Option<f64>,
    /// Simulation slots per time step; ignored by delta and ann.
    #[arg(long)]
    exposure: Option<usize>,
}

#[derive(Serialize, Deserialize)]
struct ParamSettings {
    batch_size: usize,
    epochs: usize,
    beta: f64,
    exposure: Option<usize>,
}

const DEFAULT_EXPOSURE: usize = 6;

impl Default for ParamSettings {
    fn default() -> Self {
        Self {
            batch_size: 36,
            epochs: 44,
            beta: 0.727,
            exposure: None,
        }
    }
}

impl ParamSettings {
    fn params(&mut self, method: Method) -> Result<TrialParams> {
        if !method.uses_exposure() {
            self.exposure = None;
        } else if self.exposure.is_none() {
            self.exposure = Some(DEFAULT_EXPOSURE);
        }
        let p = TrialParams {
            batch_size: self.batch_size,
            epochs: self.epochs,
            beta: self.beta,
            exposure: self.exposure,
        };
        p.validate(method)?;
        Ok(p)
    }
}

// ---------------------------------------------------------------- train

#[derive(Args, Serialize)]
pub struct TrainArgs {
    #[command(flatten)]
    #[serde(flatten)]
    exp: ExperimentArgs,
    #[command(flatten)]
    #[serde(flatten)]
    params: ParamArgs,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for model.toml, model.bin and history.csv.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Default, Serialize, Deserialize)]
struct TrainSettings {
    #[serde(flatten)]
    exp: ExperimentSettings,
    #[serde(flatten)]
    params: ParamSettings,
    seed: u64,
    out: Option<PathBuf>,
}

pub fn train(ctx: &Context, args: TrainArgs) -> Result<()> {
    let mut s: TrainSettings = ctx.settings("train", &TrainSettings::default(), &args)?;
    let out = required(&s.out, "out")?.clone();
    required(&s.exp.data, "data")?;
    let method = s.exp.method;
    let params = s.params.params(method)?;

    create_dir(&out)?;
    let (model_path, history_path) = (out.join("model.toml"), out.join("history.csv"));
    let manifest = RunManifest::new("train", &s)?
        .seed("train", s.seed)
        .artifact("checkpoint", &model_path)
        .artifact("history", &history_path);
    ctx.write_manifest(&manifest, Some(out.join("run_manifest.toml")))?;

    let (_, exp) = s.exp.load()?;
    let run = exp.run(method, &params, s.seed, &BudgetCaps::default())?;
    write_checkpoint(&model_path, &run.checkpoint)?;
    write_history_csv(&history_path, &run.history.epochs)?;
    let m = run.metrics;
    println!(
        "{method}: {} epochs (kept {}), accuracy {:.4} auroc {} auprc {} f1 {:.4}",
        run.history.epochs.len(),
        run.history.best_epoch,
        m.accuracy,
        fmt_opt(m.auroc),
        fmt_opt(m.auprc),
        m.f1
    );
    Ok(())
}

// ---------------------------------------------------------------- eval

#[derive(Args, Serialize)]
pub struct EvalArgs {
    /// Dataset directory or manifest; the test split is scored.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Checkpoint header written by `train`.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Score the predictor that never flags anything.
    #[arg(long)]
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    silent: bool,
    /// Seed for stochastic encoders.
    #[arg(long)]
    seed: Option<u64>,
    /// CSV record file to append the result to.
    #[arg(long)]
    records: Option<PathBuf>,
}

#[derive(Default, Serialize, Deserialize)]
struct EvalSettings {
    data: Option<PathBuf>,
    model: Option<PathBuf>,
    silent: bool,
    seed: u64,
    records: Option<PathBuf>,
}

pub fn eval(ctx: &Context, args: EvalArgs) -> Result<()> {
    let s: EvalSettings = ctx.settings("eval", &EvalSettings::default(), &args)?;
    let data = required(&s.data, "data")?;
    if s.silent == s.model.is_some() {
        return Err(usage("pass exactly one of --model and --silent"));
    }
    let mut manifest = RunManifest::new("eval", &s)?.seed("eval", s.seed);
    if let Some(r) = &s.records {
        manifest = manifest.artifact("records", r);
    }
    ctx.write_manifest(&manifest, s.records.as_deref().map(sidecar))?;

    let ds = load_dataset(data)?;
    let (name, m) = match &s.model {
        Some(path) => {
            let ckpt = read_checkpoint(path)?;
            let items = prepare_items(&ds.test, ckpt.patch_size)?;
            (
                ckpt.model.name().to_owned(),
                evaluate_model(&ckpt.model, &items, s.seed)?,
            )
        }
        None => {
            let truth: Vec<bool> = ds.test.iter().flat_map(|i| i.mask.flags().iter().copied()).collect();
            let n = truth.len();
            (
                "silent".to_owned(),
                evaluate(&vec![false; n], &vec![0.0; n], &truth, None)?,
            )
        }
    };
    println!(
        "{name}: accuracy {:.4} auroc {} auprc {} f1 {:.4} over {} pixels",
        m.accuracy,
        fmt_opt(m.auroc),
        fmt_opt(m.auprc),
        m.f1,
        m.n_pixels
    );
    if let Some(path) = &s.records {
        let mut rows = if path.exists() {
            read_report_rows(path)?
        } else {
            Vec::new()
        };
        rows.push(ReportRow {
            method: name,
            seed: s.seed,
            accuracy: m.accuracy,
            auroc: m.auroc,
            auprc: m.auprc,
            f1: m.f1,
        });
        write_report_rows(path, &rows)?;
    }
    Ok(())
}

// ---------------------------------------------------------------- search

#[derive(Args, Serialize)]
pub struct SearchArgs {
    #[command(flatten)]
    #[serde(flatten)]
    exp: ExperimentArgs,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    master_seed: Option<u64>,
    #[arg(long, env = "SPIKEFLAG_WORKERS")]
    workers: Option<usize>,
    /// Cap on epochs per trial.
    #[arg(long)]
    max_epochs: Option<usize>,
    /// Cap on training patches per trial.
    #[arg(long)]
    max_train_patches: Option<usize>,
    /// Output directory; an existing trials.jsonl there is resumed.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize, Deserialize)]
struct SearchSettings {
    #[serde(flatten)]
    exp: ExperimentSettings,
    trials: usize,
    master_seed: u64,
    workers: usize,
    max_epochs: Option<usize>,
    max_train_patches: Option<usize>,
    out: Option<PathBuf>,
}

impl Default for SearchSettings {
    fn default() -> Self {
        Self {
            exp: ExperimentSettings::default(),
            trials: 10,
            master_seed: 0,
            workers: 1,
            max_epochs: None,
            max_train_patches: None,
            out: None,
        }
    }
}

fn print_trials(trials: &[TrialRecord]) {
    println!("trial  batch  epochs  beta    E    accuracy  auroc   auprc   f1");
    for t in trials {
        let e = t.params.exposure.map_or_else(|| "-".into(), |e| e.to_string());
        match &t.metrics {
            Some(m) => println!(
                "{:<5}  {:<5}  {:<6}  {:<6.3}  {:<3}  {:<8.4}  {:<6}  {:<6}  {:.4}",
                t.index,
                t.params.batch_size,
                t.params.epochs,
                t.params.beta,
                e,
                m.accuracy,
                fmt_opt(m.auroc),
                fmt_opt(m.auprc),
                m.f1
            ),
            None => println!(
                "{:<5}  {:<5}  {:<6}  {:<6.3}  {:<3}  failed: {}",
                t.index,
                t.params.batch_size,
                t.params.epochs,
                t.params.beta,
                e,
                t.error.as_deref().unwrap_or("?")
            ),
        }
    }
}

pub fn search(ctx: &Context, args: SearchArgs) -> Result<()> {
    let s: SearchSettings = ctx.settings("search", &SearchSettings::default(), &args)?;
    let out = required(&s.out, "out")?.clone();
    required(&s.exp.data, "data")?;
    let cfg = SearchConfig {
        n_trials: s.trials,
        method: s.exp.method,
        master_seed: s.master_seed,
        caps: BudgetCaps {
            max_epochs: s.max_epochs,
            max_train_patches: s.max_train_patches,
        },
        workers: s.workers,
    };
    cfg.validate()?;

    create_dir(&out)?;
    let (store, selection_path) = (out.join("trials.jsonl"), out.join("selection.toml"));
    let manifest = RunManifest::new("search", &s)?
        .seed("master", s.master_seed)
        .artifact("trials", &store)
        .artifact("selection", &selection_path);
    ctx.write_manifest(&manifest, Some(out.join("run_manifest.toml")))?;

    let (_, exp) = s.exp.load()?;
    let trials = run_search(&exp, &cfg, Some(&store))?;
    print_trials(&trials);
    let selection = select_best(&trials)?;
    fs::write(&selection_path, toml::to_string(&selection)?)
        .with_context(|| format!("writing {}", selection_path.display()))?;
    for (metric, idx) in &selection.champions {
        println!("best {}: trial {idx}", metric.name());
    }
    println!("pareto front: {:?}", selection.front);
    Ok(())
}

// ---------------------------------------------------------------- repeat

#[derive(Args, Serialize)]
pub struct RepeatArgs {
    #[command(flatten)]
    #[serde(flatten)]
    exp: ExperimentArgs,
    #[command(flatten)]
    #[serde(flatten)]
    params: ParamArgs,
    /// Number of runs.
    #[arg(long)]
    n: Option<usize>,
    /// Run i uses seed master_seed + i.
    #[arg(long)]
    master_seed: Option<u64>,
    /// Take method and parameters from the champion of this trial store.
    #[arg(long)]
    from_search: Option<PathBuf>,
    /// Metric whose champion `--from-search` picks: accuracy, auroc, auprc or f1.
    #[arg(long)]
    metric: Option<String>,
    /// Output directory for records.csv and summary.csv.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize, Deserialize)]
struct RepeatSettings {
    #[serde(flatten)]
    exp: ExperimentSettings,
    #[serde(flatten)]
    params: ParamSettings,
    n: usize,
    master_seed: u64,
    from_search: Option<PathBuf>,
    metric: Metric,
    out: Option<PathBuf>,
}

impl Default for RepeatSettings {
    fn default() -> Self {
        Self {
            exp: ExperimentSettings::default(),
            params: ParamSettings::default(),
            n: 5,
            master_seed: 0,
            from_search: None,
            metric: Metric::F1,
            out: None,
        }
    }
}

pub fn repeat(ctx: &Context, args: RepeatArgs) -> Result<()> {
    let mut s: RepeatSettings = ctx.settings("repeat", &RepeatSettings::default(), &args)?;
    let out = required(&s.out, "out")?.clone();
    required(&s.exp.data, "data")?;
    if let Some(store) = &s.from_search {
        let trials = read_trials(store)?;
        let selection = select_best(&trials)?;
        let idx = selection.champions[&s.metric];
        let champ = trials
            .iter()
            .find(|t| t.index == idx)
            .expect("champion is a stored trial");
        s.exp.method = champ.method;
        s.params = ParamSettings {
            batch_size: champ.params.batch_size,
            epochs: champ.params.epochs,
            beta: champ.params.beta,
            exposure: champ.params.exposure,
        };
    }
    let method = s.exp.method;
    let params = s.params.params(method)?;

    create_dir(&out)?;
    let (records, summary_path) = (out.join("records.csv"), out.join("summary.csv"));
    let manifest = RunManifest::new("repeat", &s)?
        .seed("master", s.master_seed)
        .artifact("records", &records)
        .artifact("summary", &summary_path);
    ctx.write_manifest(&manifest, Some(out.join("run_manifest.toml")))?;

    let (_, exp) = s.exp.load()?;
    let result = repeat_eval(&exp, method, &params, s.n, s.master_seed, &BudgetCaps::default())?;
    for r in result.runs.iter().filter(|r| r.metrics.is_none()) {
        eprintln!("seed {} failed: {}", r.seed, r.error.as_deref().unwrap_or("?"));
    }
    write_report_rows(&records, &result.rows())?;
    write_summary_csv(&summary_path, std::slice::from_ref(&result.summary))?;
    print_summary(std::slice::from_ref(&result.summary));
    Ok(())
}

// ---------------------------------------------------------------- report

#[derive(Args, Serialize)]
pub struct ReportArgs {
    /// Record CSV files written by `eval` or `repeat`.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    records: Vec<PathBuf>,
    /// Write the summary table as CSV here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Default, Serialize, Deserialize)]
struct ReportSettings {
    records: Vec<PathBuf>,
    out: Option<PathBuf>,
}

fn print_summary(summaries: &[MethodSummary]) {
    let cell = |s: &MethodSummary, m: Metric| {
        s.stats
            .get(&m)
            .map_or_else(|| "n/a".into(), |st| format!("{:.4} ± {:.4}", st.mean, st.std))
    };
    println!(
        "{:<12} {:>4}  {:<17}  {:<17}  {:<17}  {:<17}",
        "method", "runs", "accuracy", "auroc", "auprc", "f1"
    );
    for s in summaries {
        println!(
            "{:<12} {:>4}  {:<17}  {:<17}  {:<17}  {:<17}",
            s.method,
            s.runs,
            cell(s, Metric::Accuracy),
            cell(s, Metric::Auroc),
            cell(s, Metric::Auprc),
            cell(s, Metric::F1)
        );
    }
}

pub fn report(ctx: &Context, args: ReportArgs) -> Result<()> {
    let s: ReportSettings = ctx.settings("report", &ReportSettings::default(), &args)?;
    if s.records.is_empty() {
        return Err(usage("no record files given"));
    }
    let mut manifest = RunManifest::new("report", &s)?;
    if let Some(out) = &s.out {
        manifest = manifest.artifact("summary", out);
    }
    ctx.write_manifest(&manifest, s.out.as_deref().map(sidecar))?;

    let mut rows = Vec::new();
    for path in &s.records {
        rows.extend(read_report_rows(path)?);
    }
    let summaries = summarize_report(&rows)?;
    if let Some(out) = &s.out {
        write_summary_csv(out, &summaries)?;
    }
    print_summary(&summaries);
    Ok(())
}
