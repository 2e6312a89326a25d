use std::collections::BTreeMap;

use super::{
    eval_seed, finite, mean_std, par_map, point_seed, replicate_seed, summary_row, summary_table, threshold_finder, Env,
    ExperimentError, Scan, SweepResult, Table,
};
use crate::nncore::{evaluate, train, Ideal, Metrics, Mlp, NnError, TrainConfig};
use crate::nonideal::{
    DecayConfig, NoiseConfig, NonIdealContext, NonIdealityConfig, QuantMode, QuantizerConfig,
};

/// A grid point either yields a value or a failure message for its row.
/// Divergence and non-finite metrics are per-point; anything else aborts.
type Point<T> = Result<T, String>;

fn point<T>(r: Result<T, ExperimentError>) -> Result<Point<T>, ExperimentError> {
    match r {
        Ok(v) => Ok(Ok(v)),
        Err(e @ ExperimentError::NonFinite(_)) | Err(e @ ExperimentError::Nn(NnError::Diverged { .. })) => {
            Ok(Err(e.to_string()))
        }
        Err(e) => Err(e),
    }
}

fn status<T>(p: &Point<T>) -> String {
    match p {
        Ok(_) => "ok".into(),
        Err(msg) => format!("failed: {msg}"),
    }
}

fn fmt_opt(p: &Point<f64>) -> String {
    p.as_ref().map(|v| v.to_string()).unwrap_or_default()
}

fn accuracy(net: &Mlp, env: &Env, ctx: &mut impl crate::nncore::Context) -> Result<f64, ExperimentError> {
    let m = evaluate(net, &env.mnist().test, ctx)?;
    finite("accuracy", m.accuracy)
}

fn train_with(env: &Env, cfg: &TrainConfig, ctx: &mut impl crate::nncore::Context) -> Result<Mlp, ExperimentError> {
    Ok(train(&env.cfg.layer_dims, &env.mnist().train, cfg, ctx)?.0)
}

/// Groups ok values by key, in key order.
fn grouped<K: Ord + Clone>(items: impl IntoIterator<Item = (K, Point<f64>)>) -> BTreeMap<K, Vec<f64>> {
    let mut map: BTreeMap<K, Vec<f64>> = BTreeMap::new();
    for (k, v) in items {
        let entry = map.entry(k).or_default();
        if let Ok(v) = v {
            entry.push(v);
        }
    }
    map
}

fn push_mean(summary: &mut Table, metric: &str, condition: &str, xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        summary_row(summary, metric, condition, "", None, 0);
        return None;
    }
    let (m, s) = mean_std(xs);
    summary_row(summary, metric, condition, m, s, xs.len());
    Some(m)
}

fn push_threshold(summary: &mut Table, metric: &str, condition: &str, r: Result<f64, ExperimentError>) -> Option<f64> {
    match r {
        Ok(v) => {
            summary_row(summary, metric, condition, v, None, 0);
            Some(v)
        }
        Err(e) => {
            summary_row(summary, metric, condition, format!("none: {e}"), None, 0);
            None
        }
    }
}

pub fn train_baseline(env: &Env) -> Result<SweepResult, ExperimentError> {
    let cfg = env.cfg;
    let reps: Vec<usize> = (0..cfg.replicates).collect();
    let runs: Vec<Point<(u64, Metrics, f64)>> = par_map(&reps, |&r| {
        let seed = replicate_seed(cfg.seed, r);
        point((|| {
            let (net, curve) = train(&cfg.layer_dims, &env.mnist().train, &env.train_cfg(seed), &mut Ideal)?;
            let m = evaluate(&net, &env.mnist().test, &mut Ideal)?;
            finite("accuracy", m.accuracy)?;
            Ok((seed, m, curve.last().copied().unwrap_or(f64::NAN)))
        })())
    })
    .into_iter()
    .collect::<Result<_, _>>()?;

    let mut header = vec!["replicate", "train_seed", "accuracy", "min_class_accuracy", "mean_nll", "final_batch_loss"];
    let class_cols: Vec<String> = (0..cfg.layer_dims[cfg.layer_dims.len() - 1])
        .map(|c| format!("class_{c}"))
        .collect();
    header.extend(class_cols.iter().map(|s| s.as_str()));
    header.push("status");
    let mut results = Table::new(&header);
    for (r, run) in runs.iter().enumerate() {
        let mut row = vec![r.to_string(), replicate_seed(cfg.seed, r).to_string()];
        match run {
            Ok((_, m, loss)) => {
                row.extend([m.accuracy, m.min_class_accuracy(), m.mean_nll, *loss].map(|v| v.to_string()));
                row.extend(m.per_class.iter().map(|v| v.to_string()));
            }
            Err(_) => row.extend(std::iter::repeat_n(String::new(), 4 + class_cols.len())),
        }
        row.push(status(run));
        results.push(row);
    }

    let ok: Vec<&(u64, Metrics, f64)> = runs.iter().filter_map(|r| r.as_ref().ok()).collect();
    let mut summary = summary_table();
    push_mean(&mut summary, "accuracy", "ideal", &ok.iter().map(|r| r.1.accuracy).collect::<Vec<_>>());
    let mins: Vec<f64> = ok.iter().map(|r| r.1.min_class_accuracy()).collect();
    push_mean(&mut summary, "min_class_accuracy", "ideal", &mins);
    if !mins.is_empty() {
        let worst = mins.iter().copied().fold(f64::INFINITY, f64::min);
        summary_row(&mut summary, "worst_class_accuracy", "ideal", worst, None, mins.len());
    }
    for (c, name) in class_cols.iter().enumerate() {
        push_mean(&mut summary, "class_accuracy", name, &ok.iter().map(|r| r.1.per_class[c]).collect::<Vec<_>>());
    }
    Ok(SweepResult {
        results,
        summary,
        extra: Vec::new(),
    })
}

fn mode_name(m: QuantMode) -> &'static str {
    match m {
        QuantMode::InferenceOnly => "inference-only",
        QuantMode::TrainAndInference => "train-and-inference",
    }
}

pub fn sweep_bits(env: &Env) -> Result<SweepResult, ExperimentError> {
    let cfg = env.cfg;
    let b = &cfg.bits;
    let reps: Vec<usize> = (0..cfg.replicates).collect();
    let tc = |r: usize| TrainConfig {
        epochs: b.epochs,
        ..env.train_cfg(replicate_seed(cfg.seed, r))
    };
    // Unquantized networks, reused by every inference-only point.
    let bases: Vec<Option<Point<Mlp>>> = if b.modes.contains(&QuantMode::InferenceOnly) {
        par_map(&reps, |&r| point(train_with(env, &tc(r), &mut Ideal)).map(Some))
            .into_iter()
            .collect::<Result<_, _>>()?
    } else {
        vec![None; reps.len()]
    };
    let base_acc: Vec<Point<f64>> = par_map(&bases, |base| match base {
        Some(Ok(net)) => point(accuracy(net, env, &mut Ideal)),
        Some(Err(e)) => Ok(Err(e.clone())),
        None => Ok(Err("not trained".into())),
    })
    .into_iter()
    .collect::<Result<_, _>>()?;

    let mut points = Vec::new();
    for &mode in &b.modes {
        for &bits in &b.bits {
            for &r in &reps {
                points.push((mode, bits, r));
            }
        }
    }
    let accs: Vec<Point<f64>> = par_map(&points, |&(mode, bits, r)| {
        let nic = NonIdealityConfig {
            quantizer: QuantizerConfig {
                bits: Some(bits),
                mode,
                w_max: b.w_max,
            },
            ..Default::default()
        };
        let net = match mode {
            QuantMode::InferenceOnly => match &bases[r] {
                Some(Ok(net)) => net.clone(),
                Some(Err(e)) => return Ok(Err(e.clone())),
                None => unreachable!("base trained when inference-only is swept"),
            },
            QuantMode::TrainAndInference => {
                let mut ctx = NonIdealContext::training(nic.clone(), point_seed(cfg.seed, 2 << 32));
                match point(train_with(env, &tc(r), &mut ctx))? {
                    Ok(net) => net,
                    Err(e) => return Ok(Err(e)),
                }
            }
        };
        point(accuracy(&nic.inference_weights(&net), env, &mut Ideal))
    })
    .into_iter()
    .collect::<Result<_, _>>()?;

    let mut results = Table::new(&["mode", "bits", "replicate", "train_seed", "accuracy", "status"]);
    for (&(mode, bits, r), acc) in points.iter().zip(&accs) {
        results.push(vec![
            mode_name(mode).into(),
            bits.to_string(),
            r.to_string(),
            replicate_seed(cfg.seed, r).to_string(),
            fmt_opt(acc),
            status(acc),
        ]);
    }

    let mut summary = summary_table();
    if bases.iter().any(Option::is_some) {
        let ok: Vec<f64> = base_acc.iter().filter_map(|a| a.as_ref().ok().copied()).collect();
        push_mean(&mut summary, "accuracy", "unquantized", &ok);
    }
    let groups = grouped(points.iter().zip(&accs).map(|(&(m, bits, _), a)| ((mode_name(m), bits), a.clone())));
    for (&(mode, bits), xs) in &groups {
        push_mean(&mut summary, "accuracy", &format!("mode={mode};bits={bits}"), xs);
    }
    for &mode in &b.modes {
        let name = mode_name(mode);
        let mut curve: Vec<(u32, f64)> = groups
            .iter()
            .filter(|((m, _), xs)| *m == name && !xs.is_empty())
            .map(|(&(_, bits), xs)| (bits, mean_std(xs).0))
            .collect();
        curve.sort_by_key(|c| c.0);
        let cond = format!("mode={name}");
        match curve.iter().find(|c| c.1 >= b.target_accuracy) {
            Some(&(bits, _)) => summary_row(&mut summary, "first_bits_at_target", &cond, bits, None, cfg.replicates),
            None => summary_row(&mut summary, "first_bits_at_target", &cond, "none", None, cfg.replicates),
        }
    }
    Ok(SweepResult {
        results,
        summary,
        extra: Vec::new(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Net {
    Naive,
    Trained,
}

impl Net {
    fn name(self) -> &'static str {
        match self {
            Net::Naive => "noise-naive",
            Net::Trained => "noise-trained",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Axis {
    Optical,
    PdTia,
}

impl Axis {
    fn name(self) -> &'static str {
        match self {
            Axis::Optical => "optical",
            Axis::PdTia => "pd-tia",
        }
    }
}

pub fn sweep_noise(env: &Env) -> Result<SweepResult, ExperimentError> {
    let cfg = env.cfg;
    let ns = &cfg.noise;
    let reps: Vec<usize> = (0..cfg.replicates).collect();
    let nic = |noise: NoiseConfig| NonIdealityConfig {
        noise,
        insertion_loss: ns.insertion_loss,
        ..Default::default()
    };
    let nets_spec: Vec<(Net, usize)> = [Net::Naive, Net::Trained]
        .iter()
        .flat_map(|&n| reps.iter().map(move |&r| (n, r)))
        .collect();
    let nets: Vec<Point<Mlp>> = par_map(&nets_spec, |&(net, r)| {
        let seed = replicate_seed(cfg.seed, r);
        point(match net {
            Net::Naive => train_with(env, &TrainConfig { epochs: ns.naive_epochs, ..env.train_cfg(seed) }, &mut Ideal),
            Net::Trained => {
                let mut ctx = NonIdealContext::training(
                    nic(NoiseConfig::detector(ns.trained_pd_tia)),
                    point_seed(cfg.seed, (2 << 32) + r as u64),
                );
                train_with(env, &TrainConfig { epochs: ns.trained_epochs, ..env.train_cfg(seed) }, &mut ctx)
            }
        })
    })
    .into_iter()
    .collect::<Result<_, _>>()?;
    let net_of = |n: Net, r: usize| &nets[nets_spec.iter().position(|&s| s == (n, r)).expect("net trained")];

    let mut points: Vec<(Net, Axis, f64, usize)> = Vec::new();
    for net in [Net::Naive, Net::Trained] {
        for (axis, levels) in [(Axis::Optical, &ns.optical_levels), (Axis::PdTia, &ns.pd_tia_levels)] {
            for &level in levels {
                for &r in &reps {
                    points.push((net, axis, level, r));
                }
            }
        }
    }
    let indexed: Vec<(usize, (Net, Axis, f64, usize))> = points.iter().copied().enumerate().collect();
    let accs: Vec<Point<f64>> = par_map(&indexed, |&(i, (net, axis, level, r))| {
        let model = match net_of(net, r) {
            Ok(m) => m,
            Err(e) => return Ok(Err(e.clone())),
        };
        let noise = match axis {
            Axis::Optical => NoiseConfig::optical(level),
            Axis::PdTia => NoiseConfig::detector(level),
        };
        let mut ctx = NonIdealContext::inference(nic(noise), cfg.train.batch_size, eval_seed(cfg.seed, i));
        point(accuracy(model, env, &mut ctx))
    })
    .into_iter()
    .collect::<Result<_, _>>()?;

    let mut results = Table::new(&["network", "noise", "level", "replicate", "train_seed", "eval_seed", "accuracy", "status"]);
    for ((i, (net, axis, level, r)), acc) in indexed.iter().zip(&accs) {
        results.push(vec![
            net.name().into(),
            axis.name().into(),
            level.to_string(),
            r.to_string(),
            replicate_seed(cfg.seed, *r).to_string(),
            eval_seed(cfg.seed, *i).to_string(),
            fmt_opt(acc),
            status(acc),
        ]);
    }

    // Levels are sorted, so grid index keeps curve order.
    let mut summary = summary_table();
    let mut pd_thresholds = BTreeMap::new();
    for net in [Net::Naive, Net::Trained] {
        let baseline_xs: Vec<f64> = reps
            .iter()
            .filter_map(|&r| match net_of(net, r) {
                Ok(m) => accuracy(m, env, &mut Ideal).ok(),
                Err(_) => None,
            })
            .collect();
        let Some(baseline) = push_mean(&mut summary, "baseline_accuracy", net.name(), &baseline_xs) else {
            continue;
        };
        for (axis, levels) in [(Axis::Optical, &ns.optical_levels), (Axis::PdTia, &ns.pd_tia_levels)] {
            let mut curve = Vec::new();
            for &level in levels {
                let xs: Vec<f64> = points
                    .iter()
                    .zip(&accs)
                    .filter(|((n, a, l, _), _)| *n == net && *a == axis && *l == level)
                    .filter_map(|(_, acc)| acc.as_ref().ok().copied())
                    .collect();
                let cond = format!("network={};noise={};level={level}", net.name(), axis.name());
                if let Some(m) = push_mean(&mut summary, "accuracy", &cond, &xs) {
                    curve.push((level, m));
                }
            }
            let cond = format!("network={};noise={}", net.name(), axis.name());
            let t = push_threshold(
                &mut summary,
                "threshold",
                &cond,
                threshold_finder(&curve, baseline, ns.degradation, Scan::Ascending),
            );
            if axis == Axis::PdTia {
                pd_thresholds.insert(net, t);
            }
            if axis == Axis::Optical {
                let drop_within = curve
                    .iter()
                    .filter(|c| c.0 <= ns.flat_optical_level)
                    .map(|c| baseline - c.1)
                    .fold(f64::NEG_INFINITY, f64::max);
                summary_row(&mut summary, "max_drop_up_to_flat_level", &cond, drop_within, None, cfg.replicates);
                if let Some(c) = curve.iter().find(|c| c.0 > ns.flat_optical_level) {
                    summary_row(
                        &mut summary,
                        "drop_beyond_flat_level",
                        &format!("{cond};level={}", c.0),
                        baseline - c.1,
                        None,
                        cfg.replicates,
                    );
                }
            }
        }
    }
    if let (Some(Some(naive)), Some(Some(trained))) = (pd_thresholds.get(&Net::Naive), pd_thresholds.get(&Net::Trained)) {
        summary_row(&mut summary, "pd_threshold_ratio", "noise-trained/noise-naive", trained / naive, None, cfg.replicates);
    }
    Ok(SweepResult {
        results,
        summary,
        extra: Vec::new(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Decay {
    Without,
    With,
}

impl Decay {
    fn name(self) -> &'static str {
        match self {
            Decay::Without => "trained-without",
            Decay::With => "trained-with",
        }
    }
}

pub fn sweep_retention(env: &Env) -> Result<SweepResult, ExperimentError> {
    let cfg = env.cfg;
    let rs = &cfg.retention;
    let reps: Vec<usize> = (0..cfg.replicates).collect();
    let decay = |ratio: f64| DecayConfig {
        tau_ret: ratio * rs.latency,
        t_latency: rs.latency,
        refresh: rs.refresh,
        in_training: true,
    };
    let tc = |batch: usize, r: usize| TrainConfig {
        batch_size: batch,
        ..env.train_cfg(replicate_seed(cfg.seed, r))
    };

    // Ideal networks: baselines for every batch size, and the
    // trained-without network.
    let mut ideal_batches: Vec<usize> = rs.batch_sizes.clone();
    if rs.include_trained_without {
        ideal_batches.push(rs.without_batch_size);
    }
    ideal_batches.sort_unstable();
    ideal_batches.dedup();
    let ideal_spec: Vec<(usize, usize)> = ideal_batches
        .iter()
        .flat_map(|&b| reps.iter().map(move |&r| (b, r)))
        .collect();
    let ideal: Vec<Point<(Mlp, f64)>> = par_map(&ideal_spec, |&(b, r)| {
        point((|| {
            let net = train_with(env, &tc(b, r), &mut Ideal)?;
            let acc = accuracy(&net, env, &mut Ideal)?;
            Ok((net, acc))
        })())
    })
    .into_iter()
    .collect::<Result<_, _>>()?;
    let ideal_of = |b: usize, r: usize| &ideal[ideal_spec.iter().position(|&s| s == (b, r)).expect("ideal trained")];

    let mut points: Vec<(Decay, usize, f64, usize)> = Vec::new();
    if rs.include_trained_without {
        for &ratio in &rs.ratios {
            for &r in &reps {
                points.push((Decay::Without, rs.without_batch_size, ratio, r));
            }
        }
    }
    for &b in &rs.batch_sizes {
        for &ratio in &rs.ratios {
            for &r in &reps {
                points.push((Decay::With, b, ratio, r));
            }
        }
    }
    let indexed: Vec<(usize, (Decay, usize, f64, usize))> = points.iter().copied().enumerate().collect();
    let accs: Vec<Point<f64>> = par_map(&indexed, |&(i, (mode, b, ratio, r))| {
        let nic = NonIdealityConfig {
            decay: Some(decay(ratio)),
            ..Default::default()
        };
        let trained;
        let net = match mode {
            Decay::Without => match ideal_of(b, r) {
                Ok((net, _)) => net,
                Err(e) => return Ok(Err(e.clone())),
            },
            Decay::With => {
                let mut ctx = NonIdealContext::training(nic.clone(), point_seed(cfg.seed, (2 << 32) + i as u64));
                trained = match point(train_with(env, &tc(b, r), &mut ctx))? {
                    Ok(n) => n,
                    Err(e) => return Ok(Err(e)),
                };
                &trained
            }
        };
        let mut ctx = NonIdealContext::inference(nic, b, eval_seed(cfg.seed, i));
        point(accuracy(net, env, &mut ctx))
    })
    .into_iter()
    .collect::<Result<_, _>>()?;

    let mut results = Table::new(&["mode", "batch_size", "ratio", "replicate", "train_seed", "accuracy", "status"]);
    for (&(b, r), p) in ideal_spec.iter().zip(&ideal) {
        let acc = p.as_ref().map(|x| x.1).map_err(|e| e.clone());
        results.push(vec![
            "ideal".into(),
            b.to_string(),
            String::new(),
            r.to_string(),
            replicate_seed(cfg.seed, r).to_string(),
            fmt_opt(&acc),
            status(&acc),
        ]);
    }
    for (&(mode, b, ratio, r), acc) in points.iter().zip(&accs) {
        results.push(vec![
            mode.name().into(),
            b.to_string(),
            ratio.to_string(),
            r.to_string(),
            replicate_seed(cfg.seed, r).to_string(),
            fmt_opt(acc),
            status(acc),
        ]);
    }

    let mut summary = summary_table();
    let mut baselines = BTreeMap::new();
    for &b in &ideal_batches {
        let xs: Vec<f64> = reps
            .iter()
            .filter_map(|&r| ideal_of(b, r).as_ref().ok().map(|x| x.1))
            .collect();
        if let Some(m) = push_mean(&mut summary, "baseline_accuracy", &format!("batch={b}"), &xs) {
            baselines.insert(b, m);
        }
    }
    let mut curves: Vec<(Decay, usize)> = Vec::new();
    if rs.include_trained_without {
        curves.push((Decay::Without, rs.without_batch_size));
    }
    curves.extend(rs.batch_sizes.iter().map(|&b| (Decay::With, b)));
    for (mode, b) in curves {
        let mut curve = Vec::new();
        for &ratio in &rs.ratios {
            let xs: Vec<f64> = points
                .iter()
                .zip(&accs)
                .filter(|((m, pb, pr, _), _)| *m == mode && *pb == b && *pr == ratio)
                .filter_map(|(_, a)| a.as_ref().ok().copied())
                .collect();
            let cond = format!("mode={};batch={b};ratio={ratio}", mode.name());
            if let Some(m) = push_mean(&mut summary, "accuracy", &cond, &xs) {
                curve.push((ratio, m));
            }
        }
        let cond = format!("mode={};batch={b}", mode.name());
        match baselines.get(&b) {
            Some(&base) => {
                push_threshold(
                    &mut summary,
                    "threshold_ratio",
                    &cond,
                    threshold_finder(&curve, base, rs.degradation, Scan::Descending),
                );
            }
            None => summary_row(&mut summary, "threshold_ratio", &cond, "none: no baseline", None, 0),
        }
    }
    Ok(SweepResult {
        results,
        summary,
        extra: Vec::new(),
    })
}
