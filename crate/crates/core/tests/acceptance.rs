//! Acceptance suite. Runs every criterion in order, prints one PASS/FAIL line
//! for each and exits non-zero if any failed.

use std::collections::BTreeSet;
use std::fs::OpenOptions;
use std::io::Write;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spikeflag_core::encoding::step_forward::{self, ExposureMode};
use spikeflag_core::encoding::{delta, latency, rate};
use spikeflag_core::hpo::{
    mean_std, metric_vector, read_trials, repeat_eval, run_search, select_best, BudgetCaps, RepeatSummary,
    SearchConfig, TrialRecord,
};
use spikeflag_core::metrics::{accuracy, auprc, auroc, evaluate, f1};
use spikeflag_core::pipeline::{evaluate_model, Model};
use spikeflag_core::snn::{bptt_grads, ResetGrad, Sample, SpikeFn};
use spikeflag_core::*;

type Outcome = Result<String, String>;

struct Desk {
    dataset: Dataset,
    exp: Experiment,
}

fn desk() -> Desk {
    let dataset = generate_synthetic(&GeneratorConfig::default()).expect("default generator");
    let exp = Experiment::with_default_patch(&dataset).expect("experiment");
    Desk { dataset, exp }
}

fn check(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(start: Instant, limit: Duration) -> Result<(), String> {
    let took = start.elapsed();
    check(
        took < limit,
        format!("took {:.1}s, limit {}s", took.as_secs_f64(), limit.as_secs()),
    )
}

fn random_mask(rng: &mut ChaCha8Rng, n: usize) -> Vec<bool> {
    let p = rng.random_range(0.0..0.5);
    (0..n).map(|_| rng.random_bool(p)).collect()
}

fn encoders() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (c, t) = (32, 32);
    for case in 0..500 {
        let mask = random_mask(&mut rng, c * t);
        let values: Vec<f32> = (0..c * t).map(|_| rng.random()).collect();
        let e = rng.random_range(2..=64);

        let input = latency::encode(&values, c, t, e).map_err(|x| x.to_string())?;
        for ch in 0..c {
            for step in 0..t {
                let window: Vec<bool> = input.window(ch, step).collect();
                check(
                    window.iter().filter(|s| **s).count() == 1,
                    format!("case {case}: latency input not one-hot"),
                )?;
                let x = values[ch * t + step] as f64;
                let expect = ((1.0 - x) * (e - 1) as f64).round() as usize;
                check(window[expect], format!("case {case}: latency slot for {x} at E={e}"))?;
            }
        }
        let target = latency::encode_target(&mask, c, t, e).map_err(|x| x.to_string())?;
        check(
            target.count() == c * t,
            format!("case {case}: latency target not one-hot"),
        )?;
        check(
            latency::decode(&target).flags == mask,
            format!("case {case}: latency round trip"),
        )?;

        let counts = rate::encode_target(&mask, c, t, e, 0.8, 0.2);
        let decoded: Vec<bool> = counts
            .counts
            .iter()
            .map(|k| rate::decode_count(*k, e, 0.75).0)
            .collect();
        check(decoded == mask, format!("case {case}: rate round trip at E={e}"))?;

        let edges = delta::encode_target(&mask, c, t);
        check(
            delta::decode(&edges, c).flags == mask,
            format!("case {case}: delta round trip"),
        )?;

        let signal: Vec<f32> = (0..t).map(|_| rng.random()).collect();
        let mut base = 0.0f64;
        let mut oracle = Vec::new();
        for x in &signal {
            let x = *x as f64;
            oracle.push(if x > base + 0.1 {
                base += 0.1;
                1
            } else if x < base - 0.1 {
                base -= 0.1;
                -1
            } else {
                0
            });
        }
        for mode in [ExposureMode::First, ExposureMode::Direct, ExposureMode::Latency] {
            let train = step_forward::encode(&signal, 1, t, 0.1, mode, e).map_err(|x| x.to_string())?;
            for (step, o) in oracle.iter().enumerate() {
                for (ch, fired) in [(0, *o == 1), (1, *o == -1)] {
                    let got: Vec<bool> = train.window(ch, step).collect();
                    let want: Vec<bool> = (0..e)
                        .map(|k| match mode {
                            ExposureMode::First => fired && k == 0,
                            ExposureMode::Direct => fired,
                            ExposureMode::Latency => k == if fired { 0 } else { e - 1 },
                        })
                        .collect();
                    check(got == want, format!("case {case}: step-forward {mode} step {step}"))?;
                }
            }
        }
    }
    within(start, Duration::from_secs(60))?;
    Ok("500 cases".into())
}

fn gradients() -> Outcome {
    let start = Instant::now();
    let cfg = NetworkConfig {
        input_width: 8,
        hidden_width: 16,
        output_width: 8,
        beta: 0.8,
        threshold: 1.0,
        surrogate_slope: 2.0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    // four simulation slots each: rate at E=1 over 4 steps, latency at E=4 over 1
    for (method, e, steps) in [(EncodingMethod::Rate, 1, 4), (EncodingMethod::Latency, 4, 1)] {
        let mut net = Network::new(cfg.clone(), rng.random()).map_err(|x| x.to_string())?;
        for p in net.parameters_mut() {
            p.iter_mut().for_each(|w| *w *= 2.0);
        }
        let enc = EncodingConfig::new(method, e);
        let values: Vec<f32> = (0..8 * steps).map(|_| rng.random()).collect();
        let flags: Vec<bool> = values.iter().map(|v| *v > 0.6).collect();
        let sample = Sample {
            input: enc.encode_input(&values, 8, steps, 3).map_err(|x| x.to_string())?,
            target: enc.encode_target(&flags, 8, steps).map_err(|x| x.to_string())?,
            valid: None,
        };
        let loss = LossConfig::for_method(method);
        let (_, grads) = bptt_grads(
            &net,
            std::slice::from_ref(&sample),
            &loss,
            SpikeFn::Relaxed,
            ResetGrad::Attached,
        )
        .map_err(|x| x.to_string())?;
        let eval = |n: &Network| {
            let out = n.continuous_relaxation_forward(&sample.input).unwrap();
            loss.loss(&out, &sample.target, None).unwrap()
        };
        let h = 1e-5;
        for _ in 0..120 {
            let tensor = rng.random_range(0..4);
            let i = rng.random_range(0..net.parameters()[tensor].len());
            let mut plus = net.clone();
            plus.parameters_mut()[tensor][i] += h;
            let mut minus = net.clone();
            minus.parameters_mut()[tensor][i] -= h;
            let fd = (eval(&plus) - eval(&minus)) / (2.0 * h);
            let an = grads.0[tensor][i];
            // absolute floor for coordinates whose gradient is essentially zero
            let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-6);
            worst = worst.max(rel);
            checked += 1;
        }
    }
    check(
        worst < 1e-4,
        format!("max relative error {worst:.2e} over {checked} coordinates"),
    )?;
    within(start, Duration::from_secs(60))?;
    Ok(format!("max relative error {worst:.2e} over {checked} coordinates"))
}

fn oracle_auroc(scores: &[f64], labels: &[bool]) -> f64 {
    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.push(f64::INFINITY);
    thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
    thresholds.dedup();
    let pos = labels.iter().filter(|l| **l).count() as f64;
    let neg = labels.len() as f64 - pos;
    let points: Vec<(f64, f64)> = thresholds
        .iter()
        .map(|th| {
            let tp = scores.iter().zip(labels).filter(|(s, l)| **s >= *th && **l).count() as f64;
            let fp = scores.iter().zip(labels).filter(|(s, l)| **s >= *th && !**l).count() as f64;
            (fp / neg, tp / pos)
        })
        .collect();
    points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
        .sum()
}

fn oracle_auprc(scores: &[f64], labels: &[bool]) -> f64 {
    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
    thresholds.dedup();
    let pos = labels.iter().filter(|l| **l).count() as f64;
    let mut prev = 0.0;
    let mut area = 0.0;
    for th in thresholds {
        let tp = scores.iter().zip(labels).filter(|(s, l)| **s >= th && **l).count() as f64;
        let flagged = scores.iter().filter(|s| **s >= th).count() as f64;
        area += (tp / pos - prev) * (tp / flagged);
        prev = tp / pos;
    }
    area
}

fn pairwise_auroc(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (sp, _) in scores.iter().zip(labels).filter(|(_, l)| **l) {
        for (sn, _) in scores.iter().zip(labels).filter(|(_, l)| !**l) {
            pairs += 1.0;
            wins += if sp > sn {
                1.0
            } else if sp == sn {
                0.5
            } else {
                0.0
            };
        }
    }
    wins / pairs
}

fn metric_oracles() -> Outcome {
    let start = Instant::now();
    let fixed = auroc(&[0.9, 0.8, 0.4, 0.2], &[true, false, true, false]).map_err(|x| x.to_string())?;
    check((fixed - 0.75).abs() < 1e-12, format!("fixed case AUROC {fixed}"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut compared = 0;
    for case in 0..1000 {
        let n = rng.random_range(1..=10);
        let labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.4)).collect();
        // a coarse grid forces tied scores
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..6) as f64 / 5.0).collect();
        let pred: Vec<bool> = scores.iter().map(|s| *s >= 0.5).collect();
        let tp = (0..n).filter(|i| pred[*i] && labels[*i]).count() as f64;
        let fp = (0..n).filter(|i| pred[*i] && !labels[*i]).count() as f64;
        let fn_ = (0..n).filter(|i| !pred[*i] && labels[*i]).count() as f64;
        let correct = (0..n).filter(|i| pred[*i] == labels[*i]).count() as f64;
        let naive_f1 = if tp == 0.0 {
            0.0
        } else {
            2.0 * tp / (2.0 * tp + fp + fn_)
        };
        let acc = accuracy(&pred, &labels).map_err(|x| x.to_string())?;
        let f = f1(&pred, &labels).map_err(|x| x.to_string())?;
        check(
            (acc - correct / n as f64).abs() < 1e-12,
            format!("case {case}: accuracy"),
        )?;
        check(
            (f - naive_f1).abs() < 1e-12,
            format!("case {case}: f1 {f} vs {naive_f1}"),
        )?;
        let pos = labels.iter().filter(|l| **l).count();
        if pos > 0 {
            let got = auprc(&scores, &labels).map_err(|x| x.to_string())?;
            let want = oracle_auprc(&scores, &labels);
            check(
                (got - want).abs() < 1e-12,
                format!("case {case}: auprc {got} vs {want}"),
            )?;
        } else {
            check(
                auprc(&scores, &labels).is_err(),
                format!("case {case}: auprc defined without positives"),
            )?;
        }
        if pos > 0 && pos < n {
            let got = auroc(&scores, &labels).map_err(|x| x.to_string())?;
            let want = oracle_auroc(&scores, &labels);
            let pairwise = pairwise_auroc(&scores, &labels);
            check(
                (got - want).abs() < 1e-12 && (got - pairwise).abs() < 1e-12,
                format!("case {case}: auroc {got} vs {want} / {pairwise}"),
            )?;
            compared += 1;
        } else {
            check(
                auroc(&scores, &labels).is_err(),
                format!("case {case}: auroc defined with one class"),
            )?;
        }
    }
    within(start, Duration::from_secs(60))?;
    Ok(format!(
        "1000 cases, {compared} with both classes; fixed case AUROC 0.75"
    ))
}

fn end_to_end(desk: &Desk) -> Outcome {
    let start = Instant::now();
    let mut exp = desk.exp.clone();
    exp.training.initial_lr = 2e-3;
    let params = TrialParams {
        batch_size: 16,
        epochs: 100,
        beta: 0.727,
        exposure: Some(6),
    };
    let out = exp
        .run(Method::Snn(EncodingMethod::Latency), &params, 0, &BudgetCaps::default())
        .map_err(|x| x.to_string())?;
    let m = out.metrics;
    let auroc = m.auroc.unwrap_or(f64::NAN);
    let line = format!(
        "accuracy {:.4} AUROC {:.4} AUPRC {:.4} F1 {:.4} in {:.0}s",
        m.accuracy,
        auroc,
        m.auprc.unwrap_or(f64::NAN),
        m.f1,
        start.elapsed().as_secs_f64()
    );
    check(m.accuracy >= 0.95 && auroc >= 0.85 && m.f1 >= 0.50, line.clone())?;
    within(start, Duration::from_secs(30 * 60))?;
    Ok(line)
}

fn latency_champion() -> TrialParams {
    TrialParams {
        batch_size: 36,
        epochs: 44,
        beta: 0.727,
        exposure: Some(6),
    }
}

fn rate_champion() -> TrialParams {
    TrialParams {
        batch_size: 107,
        epochs: 50,
        beta: 0.599,
        exposure: Some(1),
    }
}

fn f1_values(s: &RepeatSummary) -> Vec<f64> {
    s.runs.iter().filter_map(|r| r.metrics.map(|m| m.f1)).collect()
}

fn ordering(latency: &RepeatSummary, rate: &RepeatSummary) -> Outcome {
    let (lat, _) = mean_std(&f1_values(latency)).map_err(|x| x.to_string())?;
    let rate_f1 = f1_values(rate);
    let (rt, _) = mean_std(&rate_f1).map_err(|x| x.to_string())?;
    let best_rate = rate_f1.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let line = format!("mean F1 latency {lat:.4}, rate {rt:.4} (max {best_rate:.4}) over 5 seeds");
    check(lat > rt, format!("{line}: latency not ahead"))?;
    check(rt < 0.3, format!("{line}: rate F1 not below 0.3"))?;
    Ok(line)
}

fn pareto_oracle(trials: &[TrialRecord]) -> BTreeSet<usize> {
    let ok: Vec<(usize, [f64; 4])> = trials
        .iter()
        .filter_map(|t| t.metrics.as_ref().map(|m| (t.index, metric_vector(m))))
        .collect();
    let mut front = BTreeSet::new();
    for (i, a) in &ok {
        let beaten = ok.iter().any(|(_, b)| {
            let ge = (0..4).all(|k| b[k] >= a[k]);
            let gt = (0..4).any(|k| b[k] > a[k]);
            ge && gt
        });
        if !beaten {
            front.insert(*i);
        }
    }
    front
}

fn search_smoke(desk: &Desk) -> Outcome {
    let dir = tempfile::tempdir().map_err(|x| x.to_string())?;
    let store = dir.path().join("trials.jsonl");
    let caps = BudgetCaps {
        max_epochs: Some(2),
        max_train_patches: Some(48),
    };
    let mut cfg = SearchConfig {
        n_trials: 6,
        method: Method::Snn(EncodingMethod::Latency),
        master_seed: 11,
        caps,
        workers: 2,
    };
    run_search(&desk.exp, &cfg, Some(&store)).map_err(|x| x.to_string())?;
    // an interrupted write leaves a torn last line
    let mut f = OpenOptions::new()
        .append(true)
        .open(&store)
        .map_err(|x| x.to_string())?;
    f.write_all(b"{\"index\": 6, \"meth").map_err(|x| x.to_string())?;
    drop(f);
    cfg.n_trials = 10;
    let resumed = run_search(&desk.exp, &cfg, Some(&store)).map_err(|x| x.to_string())?;
    let stored = read_trials(&store).map_err(|x| x.to_string())?;
    check(
        resumed.len() == 10 && stored.len() == 10,
        format!("{} records, {} stored", resumed.len(), stored.len()),
    )?;
    let indices: BTreeSet<usize> = stored.iter().map(|r| r.index).collect();
    check(indices == (0..10).collect(), "store indices are not 0..10")?;
    for r in &resumed {
        let p = &r.params;
        let e = p.exposure.unwrap_or(0);
        check(
            (16..=128).contains(&p.batch_size)
                && (5..=100).contains(&p.epochs)
                && (0.5..=0.99).contains(&p.beta)
                && (2..=64).contains(&e),
            format!("trial {} outside the search ranges", r.index),
        )?;
    }

    let fresh = run_search(&desk.exp, &cfg, None).map_err(|x| x.to_string())?;
    for (a, b) in fresh.iter().zip(&resumed) {
        check(
            a.index == b.index && a.params == b.params && a.seed == b.seed && a.metrics == b.metrics,
            format!("trial {} differs between a fresh and a resumed search", a.index),
        )?;
    }

    let sel = select_best(&resumed).map_err(|x| x.to_string())?;
    check(sel.champions.len() == 4, format!("{} champions", sel.champions.len()))?;
    let front: BTreeSet<usize> = sel.front.iter().copied().collect();
    let oracle = pareto_oracle(&resumed);
    check(front == oracle, format!("front {front:?}, oracle {oracle:?}"))?;
    Ok(format!("10 trials resumed after 6; front {front:?}"))
}

fn repeat_protocol(summary: &RepeatSummary) -> Outcome {
    check(summary.runs.len() == 5, format!("{} runs", summary.runs.len()))?;
    let rows = summary.rows();
    for metric in Metric::ALL {
        let vals: Vec<f64> = rows
            .iter()
            .filter_map(|r| match metric {
                Metric::Accuracy => Some(r.accuracy),
                Metric::Auroc => r.auroc,
                Metric::Auprc => r.auprc,
                Metric::F1 => Some(r.f1),
            })
            .collect();
        let st = summary
            .summary
            .stats
            .get(&metric)
            .ok_or_else(|| format!("{} missing", metric.name()))?;
        let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        check(
            st.mean >= lo && st.mean <= hi,
            format!("{} mean {} outside [{lo}, {hi}]", metric.name(), st.mean),
        )?;
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        check(
            (st.std - var.sqrt()).abs() < 1e-12,
            format!("{} std {} vs {}", metric.name(), st.std, var.sqrt()),
        )?;
    }
    let f1 = summary.summary.stats[&Metric::F1];
    Ok(format!("F1 {:.4} +/- {:.4} over {} runs", f1.mean, f1.std, f1.n))
}

fn silent_baseline(desk: &Desk) -> Outcome {
    let cfg = NetworkConfig::for_method(EncodingMethod::Latency, 32, 0.727);
    let model = Model::Snn {
        network: Network::zeros(cfg).map_err(|x| x.to_string())?,
        encoding: EncodingConfig::new(EncodingMethod::Latency, 6),
    };
    let m = evaluate_model(&model, &desk.exp.test, 0).map_err(|x| x.to_string())?;
    let contamination = desk.dataset.contamination().map_err(|x| x.to_string())?;
    let truth: Vec<bool> = desk.dataset.test.iter().flat_map(|i| i.mask.flags().to_vec()).collect();
    let silent = vec![false; truth.len()];
    let direct = evaluate(&silent, &vec![0.0; truth.len()], &truth, None).map_err(|x| x.to_string())?;
    let line = format!(
        "accuracy {:.4}, 1 - contamination {:.4} (dataset), {:.4} (target)",
        m.accuracy,
        1.0 - contamination,
        1.0 - 0.0276
    );
    check(
        m.accuracy == direct.accuracy,
        format!("{line}: network and direct all-false disagree"),
    )?;
    check((m.accuracy - (1.0 - contamination)).abs() <= 0.01, line.clone())?;
    check((m.accuracy - (1.0 - 0.0276)).abs() <= 0.01, line.clone())?;
    check(m.accuracy > 0.9, line.clone())?;
    Ok(line)
}

fn main() -> ExitCode {
    let mut failed = 0;
    let mut report = |n: usize, name: &str, outcome: Outcome| {
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {n} [{tag}] {name}: {detail}");
        let _ = std::io::stdout().flush();
    };

    report(1, "encoder invariants", encoders());
    report(2, "gradient check", gradients());
    report(3, "metric oracles", metric_oracles());

    let desk = desk();
    report(4, "desk-scale latency", end_to_end(&desk));

    let caps = BudgetCaps::default();
    let latency = repeat_eval(
        &desk.exp,
        Method::Snn(EncodingMethod::Latency),
        &latency_champion(),
        5,
        0,
        &caps,
    );
    let rate = repeat_eval(
        &desk.exp,
        Method::Snn(EncodingMethod::Rate),
        &rate_champion(),
        5,
        0,
        &caps,
    );
    let ordering_outcome = match (&latency, &rate) {
        (Ok(l), Ok(r)) => ordering(l, r),
        (Err(e), _) | (_, Err(e)) => Err(e.to_string()),
    };
    report(5, "latency ahead of rate", ordering_outcome);
    report(6, "search smoke", search_smoke(&desk));
    report(
        7,
        "repeat protocol",
        latency.map_err(|e| e.to_string()).and_then(|s| repeat_protocol(&s)),
    );
    report(8, "silent predictor", silent_baseline(&desk));

    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
