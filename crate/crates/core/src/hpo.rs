//! Seeded random hyperparameter search, multi-metric selection and the
//! repeat-trial evaluation protocol.
//!
//! Search trials are appended to a JSON-lines store as they finish, so an
//! interrupted search resumes where it stopped.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Patch, DEFAULT_PATCH_SIZE};
use crate::encoding::{EncodingConfig, EncodingMethod, MAX_EXPOSURE};
use crate::error::{Error, Result};
use crate::metrics::{EvalRecord, Metric};
use crate::pipeline::{evaluate_model, prepare_items, Model, PreparedItem};
use crate::snn::{
    ann_train, train, AnnNetwork, Checkpoint, History, Network, NetworkConfig, TrainingConfig, DEFAULT_HIDDEN_WIDTH,
};

pub const BATCH_SIZE_RANGE: (usize, usize) = (16, 128);
pub const EPOCH_RANGE: (usize, usize) = (5, 100);
pub const BETA_RANGE: (f64, f64) = (0.5, 0.99);
pub const EXPOSURE_RANGE: (usize, usize) = (1, MAX_EXPOSURE);

/// Environment variable holding the default search worker count.
pub const WORKERS_ENV: &str = "SPIKEFLAG_WORKERS";

/// A flagging method: a spiking network with an encoder, or the ANN baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Method {
    Snn(EncodingMethod),
    Ann,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Snn(m) => m.as_str(),
            Method::Ann => "ann",
        }
    }

    pub fn uses_exposure(&self) -> bool {
        !matches!(self, Method::Ann | Method::Snn(EncodingMethod::Delta))
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "ann" {
            return Ok(Method::Ann);
        }
        s.parse().map(Method::Snn)
    }
}

impl From<Method> for String {
    fn from(m: Method) -> Self {
        m.as_str().to_owned()
    }
}

impl TryFrom<String> for Method {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialParams {
    pub batch_size: usize,
    pub epochs: usize,
    pub beta: f64,
    /// Absent for delta-modulation and the ANN.
    pub exposure: Option<usize>,
}

impl TrialParams {
    pub fn validate(&self, method: Method) -> Result<()> {
        let in_range = |v: usize, (lo, hi): (usize, usize)| (lo..=hi).contains(&v);
        if !in_range(self.batch_size, BATCH_SIZE_RANGE) || !in_range(self.epochs, EPOCH_RANGE) {
            return Err(Error::Config(format!(
                "batch size {} or epochs {} out of range",
                self.batch_size, self.epochs
            )));
        }
        if !(BETA_RANGE.0..=BETA_RANGE.1).contains(&self.beta) {
            return Err(Error::Config(format!("beta {} out of range", self.beta)));
        }
        match (method, self.exposure) {
            (Method::Snn(m), Some(e)) if method.uses_exposure() => {
                if e < m.min_exposure().max(EXPOSURE_RANGE.0) || e > EXPOSURE_RANGE.1 {
                    return Err(Error::Config(format!("exposure {e} out of range for {m}")));
                }
            }
            (_, None) if !method.uses_exposure() => {}
            _ => {
                return Err(Error::Config(format!(
                    "exposure must be {} for {method}",
                    if method.uses_exposure() { "set" } else { "absent" }
                )))
            }
        }
        Ok(())
    }
}

/// Execution limits applied on top of sampled parameters.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BudgetCaps {
    pub max_epochs: Option<usize>,
    /// Train on a seeded random subset of this many patches.
    pub max_train_patches: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub n_trials: usize,
    pub method: Method,
    pub master_seed: u64,
    #[serde(default)]
    pub caps: BudgetCaps,
    pub workers: usize,
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trials == 0 || self.workers == 0 {
            return Err(Error::Config("n_trials and workers must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub index: usize,
    pub method: Method,
    pub params: TrialParams,
    pub seed: u64,
    /// `None` when the trial failed.
    pub metrics: Option<EvalRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub epochs_run: usize,
    pub wall_time_seconds: f64,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `index` in a search.
pub fn trial_seed(master_seed: u64, index: usize) -> u64 {
    splitmix(master_seed ^ splitmix(index as u64))
}

/// Draws the parameters of trial `index`: integers uniform over their
/// inclusive ranges, beta uniform.
pub fn sample_trial(method: Method, master_seed: u64, index: usize) -> TrialParams {
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(master_seed, index));
    let batch_size = rng.random_range(BATCH_SIZE_RANGE.0..=BATCH_SIZE_RANGE.1);
    let epochs = rng.random_range(EPOCH_RANGE.0..=EPOCH_RANGE.1);
    let beta = rng.random_range(BETA_RANGE.0..=BETA_RANGE.1);
    let exposure = match method {
        Method::Snn(m) if method.uses_exposure() => {
            Some(rng.random_range(m.min_exposure().max(EXPOSURE_RANGE.0)..=EXPOSURE_RANGE.1))
        }
        _ => None,
    };
    TrialParams {
        batch_size,
        epochs,
        beta,
        exposure,
    }
}

/// Prepared train patches and test items plus the fixed parts of every run.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub train: Vec<Patch>,
    pub test: Vec<PreparedItem>,
    pub patch_size: usize,
    pub hidden_width: usize,
    /// Learning rate, patience and validation settings; batch size, epochs
    /// and seed are overridden per run.
    pub training: TrainingConfig,
    /// Encoder thresholds; method, exposure and seed are overridden per run.
    pub encoding: EncodingConfig,
}

/// Result of one train-and-evaluate run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub checkpoint: Checkpoint,
    pub history: History,
    pub metrics: EvalRecord,
}

impl Experiment {
    pub fn new(dataset: &Dataset, patch_size: usize) -> Result<Self> {
        if dataset.train.is_empty() || dataset.test.is_empty() {
            return Err(Error::Argument("dataset needs train and test items".into()));
        }
        Ok(Self {
            train: prepare_items(&dataset.train, patch_size)?
                .into_iter()
                .flat_map(|p| p.patches)
                .collect(),
            test: prepare_items(&dataset.test, patch_size)?,
            patch_size,
            hidden_width: DEFAULT_HIDDEN_WIDTH,
            training: TrainingConfig::default(),
            encoding: EncodingConfig::default(),
        })
    }

    pub fn with_default_patch(dataset: &Dataset) -> Result<Self> {
        Self::new(dataset, DEFAULT_PATCH_SIZE)
    }

    /// Trains a fresh model with `params` and `seed` and scores it on the test items.
    pub fn run(&self, method: Method, params: &TrialParams, seed: u64, caps: &BudgetCaps) -> Result<RunOutcome> {
        params.validate(method)?;
        let training = TrainingConfig {
            batch_size: params.batch_size,
            max_epochs: caps.max_epochs.map_or(params.epochs, |c| c.min(params.epochs)),
            seed,
            ..self.training.clone()
        };
        let subset;
        let patches: &[Patch] = match caps.max_train_patches {
            Some(n) if n < self.train.len() => {
                let mut idx: Vec<usize> = (0..self.train.len()).collect();
                idx.shuffle(&mut ChaCha8Rng::seed_from_u64(splitmix(seed ^ 0x5EED)));
                idx.truncate(n);
                idx.sort_unstable();
                subset = idx.into_iter().map(|i| self.train[i].clone()).collect::<Vec<_>>();
                &subset
            }
            _ => &self.train,
        };
        let p = self.patch_size;
        let (model, history) = match method {
            Method::Snn(m) => {
                let encoding = EncodingConfig {
                    method: m,
                    exposure: params.exposure.unwrap_or(1),
                    rng_seed: seed,
                    ..self.encoding.clone()
                };
                let mut cfg = NetworkConfig::for_method(m, p, params.beta);
                cfg.hidden_width = self.hidden_width;
                let mut network = Network::new(cfg, seed)?;
                let history = train(&mut network, patches, &training, &encoding)?;
                (Model::Snn { network, encoding }, history)
            }
            Method::Ann => {
                let mut ann = AnnNetwork::new(p, self.hidden_width, seed)?;
                let history = ann_train(&mut ann, patches, &training)?;
                (Model::Ann(ann), history)
            }
        };
        let metrics = evaluate_model(&model, &self.test, seed)?;
        Ok(RunOutcome {
            checkpoint: Checkpoint {
                model,
                patch_size: p,
                seed,
                epoch: history.best_epoch,
            },
            history,
            metrics,
        })
    }
}

/// Loads trial records from a JSON-lines store. A torn final line (from an
/// interrupted write) is dropped.
pub fn read_trials(path: &Path) -> Result<Vec<TrialRecord>> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(Error::io(path, e)),
    };
    let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    let complete = text.ends_with('\n');
    let mut out = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        match serde_json::from_str(line) {
            Ok(rec) => out.push(rec),
            Err(_) if i + 1 == lines.len() && !complete => break,
            Err(e) => return Err(Error::format(path, format!("line {}: {e}", i + 1))),
        }
    }
    Ok(out)
}

fn append_line(path: &Path, rec: &TrialRecord) -> Result<()> {
    let mut line = serde_json::to_string(rec).map_err(|e| Error::format(path, e.to_string()))?;
    line.push('\n');
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    f.write_all(line.as_bytes()).map_err(|e| Error::io(path, e))?;
    f.sync_data().map_err(|e| Error::io(path, e))
}

/// Rewrites a store without a torn final line, so appends start on a fresh line.
fn repair_store(path: &Path, records: &[TrialRecord]) -> Result<()> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(_) => return Ok(()),
    };
    if text.is_empty() || text.ends_with('\n') {
        return Ok(());
    }
    let mut body = String::new();
    for rec in records {
        body.push_str(&serde_json::to_string(rec).map_err(|e| Error::format(path, e.to_string()))?);
        body.push('\n');
    }
    fs::write(path, body).map_err(|e| Error::io(path, e))
}

fn run_trial(exp: &Experiment, cfg: &SearchConfig, index: usize) -> TrialRecord {
    let params = sample_trial(cfg.method, cfg.master_seed, index);
    let seed = trial_seed(cfg.master_seed, index);
    let start = Instant::now();
    let result = exp.run(cfg.method, &params, seed, &cfg.caps);
    let (metrics, error, epochs_run) = match result {
        Ok(o) => (Some(o.metrics), None, o.history.epochs.len()),
        Err(e) => (None, Some(e.to_string()), 0),
    };
    TrialRecord {
        index,
        method: cfg.method,
        params,
        seed,
        metrics,
        error,
        epochs_run,
        wall_time_seconds: start.elapsed().as_secs_f64(),
    }
}

/// Runs the trials of `cfg` missing from `store` (all of them without a
/// store) and returns every record sorted by trial index. Failed trials are
/// recorded with their error and the search continues.
pub fn run_search(exp: &Experiment, cfg: &SearchConfig, store: Option<&Path>) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    let mut done = match store {
        Some(path) => read_trials(path)?,
        None => Vec::new(),
    };
    if let Some(path) = store {
        repair_store(path, &done)?;
    }
    for rec in &done {
        if rec.method != cfg.method || rec.seed != trial_seed(cfg.master_seed, rec.index) {
            return Err(Error::Search(format!(
                "record {} in the store belongs to a different search",
                rec.index
            )));
        }
    }
    let have: HashSet<usize> = done.iter().map(|r| r.index).collect();
    let pending: Vec<usize> = (0..cfg.n_trials).filter(|i| !have.contains(i)).collect();
    let next = AtomicUsize::new(0);
    let sink = Mutex::new((Vec::new(), None::<Error>));
    std::thread::scope(|s| {
        for _ in 0..cfg.workers.min(pending.len()) {
            s.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::SeqCst);
                let Some(&index) = pending.get(k) else { break };
                let rec = run_trial(exp, cfg, index);
                let mut guard = sink.lock().unwrap_or_else(|e| e.into_inner());
                if let Some(path) = store {
                    if let Err(e) = append_line(path, &rec) {
                        guard.1.get_or_insert(e);
                    }
                }
                guard.0.push(rec);
            });
        }
    });
    let (fresh, err) = sink.into_inner().unwrap_or_else(|e| e.into_inner());
    if let Some(e) = err {
        return Err(e);
    }
    done.extend(fresh);
    done.retain(|r| r.index < cfg.n_trials);
    done.sort_by_key(|r| r.index);
    Ok(done)
}

/// Per-metric champions and the Pareto front, as trial indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub champions: BTreeMap<Metric, usize>,
    pub front: Vec<usize>,
}

/// Metric vector for maximization; undefined areas count as worst.
pub fn metric_vector(rec: &EvalRecord) -> [f64; 4] {
    Metric::ALL.map(|m| rec.get(m).unwrap_or(f64::NEG_INFINITY))
}

/// True when `a` is at least as good as `b` everywhere and better somewhere.
pub fn dominates(a: &[f64; 4], b: &[f64; 4]) -> bool {
    a.iter().zip(b).all(|(x, y)| x >= y) && a.iter().zip(b).any(|(x, y)| x > y)
}

/// Champions (argmax per metric, ties to the earlier trial) and the
/// non-dominated set over the successful trials.
pub fn select_best(trials: &[TrialRecord]) -> Result<Selection> {
    let mut ok: Vec<(usize, [f64; 4])> = trials
        .iter()
        .filter_map(|t| t.metrics.as_ref().map(|m| (t.index, metric_vector(m))))
        .collect();
    if ok.is_empty() {
        return Err(Error::Search("no successful trials".into()));
    }
    ok.sort_by_key(|(i, _)| *i);
    let mut champions = BTreeMap::new();
    for (k, metric) in Metric::ALL.into_iter().enumerate() {
        let mut best = ok[0];
        for cand in &ok[1..] {
            if cand.1[k] > best.1[k] {
                best = *cand;
            }
        }
        champions.insert(metric, best.0);
    }
    let front = ok
        .iter()
        .filter(|(_, v)| !ok.iter().any(|(_, w)| dominates(w, v)))
        .map(|(i, _)| *i)
        .collect();
    Ok(Selection { champions, front })
}

/// Mean and sample standard deviation (two passes); the deviation is 0 for a
/// single value.
pub fn mean_std(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::Argument("no values to summarize".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Ok((mean, 0.0));
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    Ok((mean, (ss / (n - 1.0)).sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricStats {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

/// One row of a per-run record file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: String,
    pub seed: u64,
    pub accuracy: f64,
    pub auroc: Option<f64>,
    pub auprc: Option<f64>,
    pub f1: f64,
}

impl ReportRow {
    pub fn new(method: Method, seed: u64, m: &EvalRecord) -> Self {
        Self {
            method: method.to_string(),
            seed,
            accuracy: m.accuracy,
            auroc: m.auroc,
            auprc: m.auprc,
            f1: m.f1,
        }
    }

    fn get(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::Accuracy => Some(self.accuracy),
            Metric::Auroc => self.auroc,
            Metric::Auprc => self.auprc,
            Metric::F1 => Some(self.f1),
        }
    }
}

/// Mean and deviation of each metric for one method. A metric undefined in
/// every run has no entry.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub method: String,
    pub runs: usize,
    pub stats: BTreeMap<Metric, MetricStats>,
}

fn summarize_rows(method: &str, rows: &[&ReportRow]) -> Result<MethodSummary> {
    let mut stats = BTreeMap::new();
    for metric in Metric::ALL {
        let vals: Vec<f64> = rows.iter().filter_map(|r| r.get(metric)).collect();
        if !vals.is_empty() {
            let (mean, std) = mean_std(&vals)?;
            stats.insert(
                metric,
                MetricStats {
                    mean,
                    std,
                    n: vals.len(),
                },
            );
        }
    }
    Ok(MethodSummary {
        method: method.to_owned(),
        runs: rows.len(),
        stats,
    })
}

/// Groups rows by method (sorted by name) and summarizes each group.
pub fn summarize_report(rows: &[ReportRow]) -> Result<Vec<MethodSummary>> {
    let mut groups: BTreeMap<&str, Vec<&ReportRow>> = BTreeMap::new();
    for r in rows {
        groups.entry(r.method.as_str()).or_default().push(r);
    }
    groups.into_iter().map(|(m, rs)| summarize_rows(m, &rs)).collect()
}

pub fn write_report_rows(path: &Path, rows: &[ReportRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::format(path, e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_report_rows(path: &Path) -> Result<Vec<ReportRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    r.deserialize()
        .map(|row| row.map_err(|e| Error::format(path, e.to_string())))
        .collect()
}

/// Writes the summary table: one row per method with `<metric>_mean` and
/// `<metric>_std` columns; undefined metrics are left empty.
pub fn write_summary_csv(path: &Path, summaries: &[MethodSummary]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    let mut header = vec!["method".to_owned(), "runs".to_owned()];
    for m in Metric::ALL {
        header.push(format!("{}_mean", m.name()));
        header.push(format!("{}_std", m.name()));
    }
    w.write_record(&header)
        .map_err(|e| Error::format(path, e.to_string()))?;
    for s in summaries {
        let mut row = vec![s.method.clone(), s.runs.to_string()];
        for m in Metric::ALL {
            match s.stats.get(&m) {
                Some(st) => {
                    row.push(st.mean.to_string());
                    row.push(st.std.to_string());
                }
                None => row.extend([String::new(), String::new()]),
            }
        }
        w.write_record(&row).map_err(|e| Error::format(path, e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatRun {
    pub seed: u64,
    pub metrics: Option<EvalRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepeatSummary {
    pub method: Method,
    pub params: TrialParams,
    pub runs: Vec<RepeatRun>,
    pub summary: MethodSummary,
}

impl RepeatSummary {
    pub fn rows(&self) -> Vec<ReportRow> {
        self.runs
            .iter()
            .filter_map(|r| r.metrics.as_ref().map(|m| ReportRow::new(self.method, r.seed, m)))
            .collect()
    }
}

/// Fraction of failed repeats above which the protocol aborts.
pub const MAX_REPEAT_FAILURE: f64 = 0.2;

/// Independent train-and-evaluate runs with seeds `master_seed + i`.
pub fn repeat_eval(
    exp: &Experiment,
    method: Method,
    params: &TrialParams,
    n_repeats: usize,
    master_seed: u64,
    caps: &BudgetCaps,
) -> Result<RepeatSummary> {
    let seeds: Vec<u64> = (0..n_repeats as u64).map(|i| master_seed.wrapping_add(i)).collect();
    repeat_with_seeds(exp, method, params, &seeds, caps)
}

/// [`repeat_eval`] over an explicit seed list.
pub fn repeat_with_seeds(
    exp: &Experiment,
    method: Method,
    params: &TrialParams,
    seeds: &[u64],
    caps: &BudgetCaps,
) -> Result<RepeatSummary> {
    if seeds.is_empty() {
        return Err(Error::Argument("n_repeats must be at least 1".into()));
    }
    params.validate(method)?;
    let runs: Vec<RepeatRun> = seeds
        .iter()
        .map(|&seed| match exp.run(method, params, seed, caps) {
            Ok(o) => RepeatRun {
                seed,
                metrics: Some(o.metrics),
                error: None,
            },
            Err(e) => RepeatRun {
                seed,
                metrics: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    let failed: Vec<&RepeatRun> = runs.iter().filter(|r| r.metrics.is_none()).collect();
    if failed.len() as f64 > MAX_REPEAT_FAILURE * runs.len() as f64 {
        let detail: Vec<String> = failed
            .iter()
            .map(|r| format!("seed {}: {}", r.seed, r.error.as_deref().unwrap_or("?")))
            .collect();
        return Err(Error::Search(format!(
            "{} of {} repeats failed: {}",
            failed.len(),
            runs.len(),
            detail.join("; ")
        )));
    }
    let rows: Vec<ReportRow> = runs
        .iter()
        .filter_map(|r| r.metrics.as_ref().map(|m| ReportRow::new(method, r.seed, m)))
        .collect();
    let summary = summarize_rows(method.as_str(), &rows.iter().collect::<Vec<_>>())?;
    Ok(RepeatSummary {
        method,
        params: params.clone(),
        runs,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn rec(index: usize, v: [f64; 4]) -> TrialRecord {
        TrialRecord {
            index,
            method: Method::Snn(EncodingMethod::Latency),
            params: sample_trial(Method::Snn(EncodingMethod::Latency), 0, index),
            seed: trial_seed(0, index),
            metrics: Some(EvalRecord {
                accuracy: v[0],
                auroc: Some(v[1]),
                auprc: Some(v[2]),
                f1: v[3],
                n_pixels: 10,
            }),
            error: None,
            epochs_run: 1,
            wall_time_seconds: 0.0,
        }
    }

    #[test]
    fn samples_stay_in_range() {
        for method in [
            Method::Snn(EncodingMethod::Latency),
            Method::Snn(EncodingMethod::Rate),
            Method::Snn(EncodingMethod::Delta),
            Method::Snn(EncodingMethod::SfDirect),
            Method::Ann,
        ] {
            for i in 0..10_000 {
                let p = sample_trial(method, 3, i);
                p.validate(method).unwrap();
            }
        }
    }

    #[test]
    fn sampling_is_reproducible() {
        let m = Method::Snn(EncodingMethod::Rate);
        let a: Vec<_> = (0..50).map(|i| sample_trial(m, 11, i)).collect();
        let b: Vec<_> = (0..50).map(|i| sample_trial(m, 11, i)).collect();
        assert_eq!(a, b);
        assert_ne!(a, (0..50).map(|i| sample_trial(m, 12, i)).collect::<Vec<_>>());
    }

    #[test]
    fn beta_mean_is_the_range_midpoint() {
        let m = Method::Snn(EncodingMethod::Latency);
        let mean = (0..10_000).map(|i| sample_trial(m, 0, i).beta).sum::<f64>() / 10_000.0;
        assert!((mean - 0.745).abs() < 0.01, "mean beta {mean}");
    }

    #[test]
    fn exposure_is_absent_for_delta() {
        let m = Method::Snn(EncodingMethod::Delta);
        assert!((0..100).all(|i| sample_trial(m, 0, i).exposure.is_none()));
        let bad = TrialParams {
            exposure: Some(4),
            ..sample_trial(m, 0, 0)
        };
        assert!(bad.validate(m).is_err());
    }

    #[test]
    fn method_names_round_trip() {
        for s in ["latency", "rate", "delta", "ann", "sf-first"] {
            assert_eq!(s.parse::<Method>().unwrap().to_string(), s);
        }
        assert!("bogus".parse::<Method>().is_err());
        let json = serde_json::to_string(&Method::Ann).unwrap();
        assert_eq!(json, "\"ann\"");
    }

    #[test]
    fn single_trial_is_every_champion() {
        let sel = select_best(&[rec(4, [0.9, 0.8, 0.5, 0.4])]).unwrap();
        assert!(sel.champions.values().all(|i| *i == 4));
        assert_eq!(sel.front, vec![4]);
    }

    #[test]
    fn dominated_trials_leave_the_front() {
        let sel = select_best(&[rec(0, [0.9, 0.9, 0.9, 0.9]), rec(1, [0.8, 0.8, 0.8, 0.8])]).unwrap();
        assert_eq!(sel.front, vec![0]);
    }

    #[test]
    fn ties_go_to_the_earlier_trial() {
        let sel = select_best(&[rec(2, [0.9, 0.5, 0.5, 0.5]), rec(1, [0.9, 0.6, 0.4, 0.5])]).unwrap();
        assert_eq!(sel.champions[&Metric::Accuracy], 1);
        assert_eq!(sel.champions[&Metric::Auprc], 2);
    }

    #[test]
    fn failed_trials_are_skipped_and_all_failed_is_an_error() {
        let mut failed = rec(0, [1.0; 4]);
        failed.metrics = None;
        failed.error = Some("non-finite loss".into());
        assert!(select_best(std::slice::from_ref(&failed)).is_err());
        let sel = select_best(&[failed, rec(1, [0.1; 4])]).unwrap();
        assert_eq!(sel.front, vec![1]);
    }

    #[test]
    fn undefined_areas_rank_last() {
        let mut a = rec(0, [0.9, 0.0, 0.0, 0.5]);
        a.metrics.as_mut().unwrap().auroc = None;
        let b = rec(1, [0.9, 0.1, 0.0, 0.5]);
        let sel = select_best(&[a, b]).unwrap();
        assert_eq!(sel.champions[&Metric::Auroc], 1);
        assert_eq!(sel.front, vec![1]);
    }

    proptest! {
        #[test]
        fn front_matches_brute_force(vals in prop::collection::vec(prop::array::uniform4(0u8..4), 1..12)) {
            let trials: Vec<TrialRecord> = vals
                .iter()
                .enumerate()
                .map(|(i, v)| rec(i, v.map(|x| x as f64 / 4.0)))
                .collect();
            let sel = select_best(&trials).unwrap();
            let vecs: Vec<[f64; 4]> = vals.iter().map(|v| v.map(|x| x as f64 / 4.0)).collect();
            let mut oracle = Vec::new();
            for i in 0..vecs.len() {
                let mut dominated = false;
                for j in 0..vecs.len() {
                    let ge = (0..4).all(|k| vecs[j][k] >= vecs[i][k]);
                    let gt = (0..4).any(|k| vecs[j][k] > vecs[i][k]);
                    dominated |= ge && gt;
                }
                if !dominated {
                    oracle.push(i);
                }
            }
            prop_assert_eq!(sel.front, oracle);
        }
    }

    #[test]
    fn mean_std_against_two_pass_oracle() {
        let v = [0.91, 0.87, 0.95, 0.89, 0.93];
        let (m, s) = mean_std(&v).unwrap();
        let mut sum = 0.0;
        for x in v {
            sum += x;
        }
        let mean = sum / 5.0;
        let mut sq = 0.0;
        for x in v {
            sq += (x - mean) * (x - mean);
        }
        assert!((m - mean).abs() < 1e-12);
        assert!((s - (sq / 4.0).sqrt()).abs() < 1e-12);
        assert_eq!(mean_std(&[0.4]).unwrap(), (0.4, 0.0));
        assert!(mean_std(&[]).is_err());
    }

    #[test]
    fn report_groups_and_sorts_by_method() {
        let row = |m: &str, seed, a| ReportRow {
            method: m.into(),
            seed,
            accuracy: a,
            auroc: None,
            auprc: Some(a / 2.0),
            f1: a,
        };
        let rows = vec![row("rate", 0, 0.5), row("latency", 0, 0.9), row("rate", 1, 0.7)];
        let s = summarize_report(&rows).unwrap();
        assert_eq!(s[0].method, "latency");
        assert_eq!(s[1].runs, 2);
        assert!((s[1].stats[&Metric::Accuracy].mean - 0.6).abs() < 1e-12);
        assert!(!s[1].stats.contains_key(&Metric::Auroc));
    }

    #[test]
    fn trial_store_round_trip_and_torn_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trials.jsonl");
        assert!(read_trials(&path).unwrap().is_empty());
        append_line(&path, &rec(0, [0.5; 4])).unwrap();
        append_line(&path, &rec(1, [0.6; 4])).unwrap();
        let mut text = fs::read_to_string(&path).unwrap();
        text.push_str("{\"index\": 2, \"meth");
        fs::write(&path, &text).unwrap();
        let got = read_trials(&path).unwrap();
        assert_eq!(got, vec![rec(0, [0.5; 4]), rec(1, [0.6; 4])]);
        repair_store(&path, &got).unwrap();
        assert!(fs::read_to_string(&path).unwrap().ends_with("}\n"));
    }

    #[test]
    fn stored_metrics_are_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trials.jsonl");
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let recs: Vec<TrialRecord> = (0..200).map(|i| rec(i, [(); 4].map(|_| rng.random::<f64>()))).collect();
        for r in &recs {
            append_line(&path, r).unwrap();
        }
        assert_eq!(read_trials(&path).unwrap(), recs);
    }
}
