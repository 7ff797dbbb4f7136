use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use secbeam::nets::ActorVariant;
use secbeam::secrecy::Paradigm;
use secbeam::trainer::stats::Summary;
use secbeam::trainer::{
    compare_with, evaluate_policy, final_eval_seed, measure_latency, train_with, CompareEntry, EvaluationReport,
    LatencyReport, MetricsLog, MetricsRow, MetricsSummary, Policy, RunResult, TrainingConfig, METRICS_HEADER,
    REWARD_WINDOW,
};
use secbeam::{Actor, Error};

use crate::cli::{CompareArgs, EvalArgs, LatencyArgs, PlotArgs, PlotKind, TrainArgs};
use crate::figures::{box_svg, curves_svg, latency_table, smooth, CurveGroup};

const EVAL_HEADER: &str = "episode,reward,mean_asr,mean_excess,satisfaction_prob,worst_sample_reward";

/// A config file as read from disk, with the hash of its exact bytes.
pub struct LoadedConfig {
    pub path: PathBuf,
    pub bytes: Vec<u8>,
    pub sha256: String,
    pub config: TrainingConfig,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

pub fn load_config(path: &Path) -> Result<LoadedConfig> {
    let bytes = fs::read(path).map_err(Error::from).with_context(|| format!("reading config {}", path.display()))?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| Error::config("config", "file is not UTF-8"))
        .with_context(|| format!("in config {}", path.display()))?;
    let config = TrainingConfig::from_json(&text).with_context(|| format!("in config {}", path.display()))?;
    Ok(LoadedConfig {
        path: path.to_path_buf(),
        sha256: sha256_hex(&bytes),
        bytes,
        config,
    })
}

fn parse_variant(s: &str) -> Result<ActorVariant> {
    Ok(s.trim().parse::<ActorVariant>()?)
}

fn parse_paradigm(s: &str) -> Result<Paradigm> {
    Ok(s.trim().parse::<Paradigm>()?)
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into())
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(Error::from).with_context(|| format!("creating {}", dir.display()))?;
        }
    }
    fs::write(path, contents).map_err(Error::from).with_context(|| format!("writing {}", path.display()))
}

fn progress(row: &MetricsRow, epochs: usize) {
    if let Some(e) = row.eval_reward {
        eprintln!(
            "epoch {}/{epochs}  reward {:.4}  critic {:.4}  actor {:.4}  eval {e:.4}",
            row.epoch, row.reward, row.critic_loss, row.actor_loss
        );
    }
}

pub fn eval_csv(report: &EvaluationReport) -> String {
    let mut out = format!("{EVAL_HEADER}\n");
    for (i, b) in report.breakdowns.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            i, b.reward, b.mean_asr, b.mean_excess, b.satisfaction_prob, b.worst_sample_reward
        ));
    }
    out
}

fn summary_line(label: &str, s: &Summary) -> String {
    format!(
        "{label}: mean {:.4}  variance {:.4}  min {:.4}  q1 {:.4}  median {:.4}  q3 {:.4}  max {:.4}  (n = {})",
        s.mean, s.variance, s.min, s.q1, s.median, s.q3, s.max, s.count
    )
}

fn curve_points(log: &MetricsLog) -> Vec<(usize, f64)> {
    log.rows.iter().map(|r| (r.epoch, r.reward)).collect()
}

#[derive(Serialize)]
struct TrainManifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config_file: String,
    config_sha256: &'a str,
    master_seed: u64,
    actor_variant: ActorVariant,
    paradigm: Paradigm,
    threads: usize,
    files: BTreeMap<&'static str, &'static str>,
    resolved_config: &'a TrainingConfig,
    training: MetricsSummary,
    final_eval: Summary,
}

pub fn train(args: &TrainArgs) -> Result<()> {
    let loaded = load_config(&args.config)?;
    let mut cfg = loaded.config.clone();
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    if let Some(v) = &args.variant {
        cfg.actor_variant = parse_variant(v)?;
    }
    if let Some(p) = &args.paradigm {
        cfg.paradigm.paradigm = parse_paradigm(p)?;
    }
    cfg.validate()?;
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| Path::new("runs").join(stem(&args.config)).join(format!("seed-{}", cfg.master_seed)));

    let mut rows = Vec::new();
    let result = train_with(&cfg, |row| {
        if !args.quiet {
            progress(row, cfg.epochs);
        }
        rows.push(row.clone());
    });
    let outcome = match result {
        Ok(o) => o,
        Err(e) => {
            if !rows.is_empty() {
                let partial = out.join("metrics.partial.csv");
                MetricsLog { rows }.write_csv(&partial)?;
                eprintln!("wrote completed epochs to {}", partial.display());
            }
            return Err(e.into());
        }
    };

    write(&out.join("config.json"), &loaded.bytes)?;
    write(&out.join("resolved_config.json"), cfg.to_json())?;
    write(&out.join("metrics.csv"), outcome.metrics.to_csv())?;
    write(&out.join("eval.csv"), eval_csv(&outcome.final_eval))?;
    outcome.actor.save(out.join("actor.bin"))?;
    outcome.critic.save(out.join("critic.bin"))?;
    let label = cfg.actor_variant.name().to_string();
    let curves = curves_svg(
        &[CurveGroup {
            label: label.clone(),
            runs: vec![smooth(&curve_points(&outcome.metrics), REWARD_WINDOW)],
        }],
        &format!("Training reward, {} paradigm", cfg.paradigm.paradigm.name()),
        "reward (bps/Hz)",
    );
    write(&out.join("curves.svg"), curves)?;
    let boxes = box_svg(
        &[(label, outcome.final_eval.rewards.clone())],
        "Inference reward",
        "reward (bps/Hz)",
    );
    write(&out.join("box.svg"), boxes)?;

    let files = BTreeMap::from([
        ("config", "config.json"),
        ("resolved_config", "resolved_config.json"),
        ("metrics", "metrics.csv"),
        ("eval", "eval.csv"),
        ("actor", "actor.bin"),
        ("critic", "critic.bin"),
        ("curves", "curves.svg"),
        ("box", "box.svg"),
    ]);
    let manifest = TrainManifest {
        tool: "secbeam",
        version: env!("CARGO_PKG_VERSION"),
        command: "train",
        config_file: loaded.path.display().to_string(),
        config_sha256: &loaded.sha256,
        master_seed: cfg.master_seed,
        actor_variant: cfg.actor_variant,
        paradigm: cfg.paradigm.paradigm,
        threads: rayon::current_num_threads(),
        files,
        resolved_config: &cfg,
        training: outcome.metrics.summary(REWARD_WINDOW),
        final_eval: outcome.final_eval.summary,
    };
    write(&out.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    println!("{}", summary_line("final evaluation", &outcome.final_eval.summary));
    println!("wrote {}", out.display());
    Ok(())
}

pub fn eval(args: &EvalArgs) -> Result<()> {
    let mut cfg = load_config(&args.config)?.config;
    if let Some(p) = &args.paradigm {
        cfg.paradigm.paradigm = parse_paradigm(p)?;
    }
    let episodes = args.episodes.unwrap_or(cfg.final_eval_episodes);
    let seed = args.seed.unwrap_or_else(|| final_eval_seed(cfg.master_seed));
    let actor;
    let (policy, label) = match &args.actor {
        Some(path) => {
            actor = Actor::load(path).with_context(|| format!("loading {}", path.display()))?;
            cfg.actor_variant = actor.variant();
            if *actor.config() != cfg.actor_config() {
                return Err(Error::config("network", "parameter file was built for a different network shape or scenario").into());
            }
            (Policy::Actor(&actor), actor.variant().name())
        }
        None => (Policy::ZeroBeamformer, "zero_beamformer"),
    };
    cfg.validate()?;
    let report = evaluate_policy(policy, episodes, &cfg, seed)?;
    if let Some(out) = &args.out {
        write(out, eval_csv(&report))?;
    }
    println!(
        "{} under the {} paradigm",
        summary_line(label, &report.summary),
        cfg.paradigm.paradigm.name()
    );
    Ok(())
}

#[derive(Serialize)]
struct CompareManifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config_file: String,
    config_sha256: &'a str,
    paradigm: Paradigm,
    variants: Vec<ActorVariant>,
    seeds: &'a [u64],
    threads: usize,
    files: BTreeMap<&'static str, &'static str>,
}

pub fn compare(args: &CompareArgs) -> Result<()> {
    let loaded = load_config(&args.config)?;
    let mut base = loaded.config.clone();
    if let Some(p) = &args.paradigm {
        base.paradigm.paradigm = parse_paradigm(p)?;
    }
    let variants = args.variants.iter().map(|v| parse_variant(v)).collect::<Result<Vec<_>>>()?;
    let entries: Vec<CompareEntry> = variants
        .iter()
        .map(|&v| {
            CompareEntry::new(TrainingConfig {
                actor_variant: v,
                ..base.clone()
            })
        })
        .collect();
    let mut labels: Vec<&str> = variants.iter().map(|v| v.name()).collect();
    labels.sort_unstable();
    if labels.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::config("variants", "variants must be distinct").into());
    }
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| Path::new("runs").join(format!("compare-{}", stem(&args.config))));

    let quiet = args.quiet;
    let mut write_err = None;
    let cmp = compare_with(&entries, &args.seeds, |run: &RunResult| {
        if !quiet {
            eprintln!(
                "{} seed {}: final eval mean {:.4}, variance {:.4}",
                run.label, run.seed, run.final_eval.summary.mean, run.final_eval.summary.variance
            );
        }
        let dir = out.join(&run.label).join(format!("seed-{}", run.seed));
        let res = write(&dir.join("metrics.csv"), run.metrics.to_csv()).and_then(|_| write(&dir.join("eval.csv"), eval_csv(&run.final_eval)));
        if let Err(e) = res {
            write_err.get_or_insert(e);
        }
    })?;
    if let Some(e) = write_err {
        return Err(e);
    }

    write(&out.join("config.json"), &loaded.bytes)?;
    write(&out.join("comparison.csv"), cmp.to_csv())?;
    let groups: Vec<CurveGroup> = entries
        .iter()
        .map(|e| CurveGroup {
            label: e.label.clone(),
            runs: cmp
                .runs
                .iter()
                .filter(|r| r.label == e.label)
                .map(|r| smooth(&curve_points(&r.metrics), args.smooth))
                .collect(),
        })
        .collect();
    let paradigm = base.paradigm.paradigm.name();
    write(
        &out.join("curves.svg"),
        curves_svg(&groups, &format!("Training reward, {paradigm} paradigm"), "reward (bps/Hz)"),
    )?;
    let pooled: Vec<(String, Vec<f64>)> = entries
        .iter()
        .map(|e| {
            let v = cmp
                .runs
                .iter()
                .filter(|r| r.label == e.label)
                .flat_map(|r| r.final_eval.rewards.iter().copied())
                .collect();
            (e.label.clone(), v)
        })
        .collect();
    write(
        &out.join("box.svg"),
        box_svg(&pooled, &format!("Inference reward, {paradigm} paradigm"), "reward (bps/Hz)"),
    )?;
    let mut files = BTreeMap::from([
        ("config", "config.json"),
        ("comparison", "comparison.csv"),
        ("curves", "curves.svg"),
        ("box", "box.svg"),
    ]);
    let timings: Vec<(String, Vec<f64>)> = entries
        .iter()
        .map(|e| {
            let t = cmp
                .runs
                .iter()
                .filter(|r| r.label == e.label)
                .flat_map(|r| r.metrics.rows.iter().filter_map(|row| row.iter_seconds))
                .collect();
            (e.label.clone(), t)
        })
        .collect();
    if timings.iter().all(|(_, t)| !t.is_empty()) {
        write(&out.join("latency.md"), latency_table(&timings, reference_row(&timings)))?;
        files.insert("latency", "latency.md");
    }
    let manifest = CompareManifest {
        tool: "secbeam",
        version: env!("CARGO_PKG_VERSION"),
        command: "compare",
        config_file: loaded.path.display().to_string(),
        config_sha256: &loaded.sha256,
        paradigm: base.paradigm.paradigm,
        variants,
        seeds: &args.seeds,
        threads: rayon::current_num_threads(),
        files,
    };
    write(&out.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    for row in cmp.rows.iter().filter(|r| r.seed.is_none()) {
        let imp = row
            .relative_improvement
            .map(|x| format!("{:+.1}%", 100.0 * x))
            .unwrap_or_else(|| "n/a".into());
        println!(
            "{}: median final eval {:.4}, pooled variance {:.4}, vs reference {imp}",
            row.label, row.final_eval_reward, row.eval_variance
        );
    }
    println!("wrote {}", out.display());
    Ok(())
}

/// The MLP diffusion row when present, otherwise the first.
fn reference_row(rows: &[(String, Vec<f64>)]) -> usize {
    rows.iter()
        .position(|(l, _)| l == ActorVariant::MlpDiffusion.name())
        .unwrap_or(0)
}

/// Default plot label: `metrics.csv` and `eval.csv` are named after the
/// nearest ancestor directory that is not a `seed-N` directory.
pub fn default_label(path: &Path) -> String {
    let name = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    if name == "metrics.csv" || name == "eval.csv" {
        for dir in path.ancestors().skip(1) {
            let d = dir.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            let is_seed = d.strip_prefix("seed-").is_some_and(|n| !n.is_empty() && n.bytes().all(|b| b.is_ascii_digit()));
            if !d.is_empty() && !is_seed {
                return d;
            }
        }
    }
    stem(path)
}

/// Evaluation rewards from either a metrics CSV (`eval_reward` column) or a
/// per-episode CSV (`reward` column).
fn eval_rewards(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(Error::from).with_context(|| format!("reading {}", path.display()))?;
    let first = text.lines().next().unwrap_or("");
    if first.trim_end() == METRICS_HEADER {
        let log = MetricsLog::from_csv(&text).with_context(|| format!("in {}", path.display()))?;
        return Ok(log.eval_points().into_iter().map(|p| p.1).collect());
    }
    if first.trim_end() != EVAL_HEADER {
        return Err(Error::Metrics("line 1: unrecognized header".into())).with_context(|| format!("in {}", path.display()));
    }
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let reward = line
            .split(',')
            .nth(1)
            .and_then(|f| f.trim().parse::<f64>().ok())
            .filter(|r| r.is_finite() && line.split(',').count() == 6)
            .ok_or_else(|| Error::Metrics(format!("line {}: expected six fields with a numeric reward", i + 1)))
            .with_context(|| format!("in {}", path.display()))?;
        out.push(reward);
    }
    Ok(out)
}

fn grouped<T>(labels: &[String], items: Vec<T>) -> Vec<(String, Vec<T>)> {
    let mut groups: Vec<(String, Vec<T>)> = Vec::new();
    for (label, item) in labels.iter().zip(items) {
        match groups.iter_mut().find(|g| &g.0 == label) {
            Some(g) => g.1.push(item),
            None => groups.push((label.clone(), vec![item])),
        }
    }
    groups
}

pub fn plot(args: &PlotArgs) -> Result<()> {
    let labels: Vec<String> = if args.labels.is_empty() {
        args.metrics.iter().map(|p| default_label(p)).collect()
    } else if args.labels.len() == args.metrics.len() {
        args.labels.clone()
    } else {
        return Err(Error::config(
            "labels",
            format!("{} labels given for {} files", args.labels.len(), args.metrics.len()),
        )
        .into());
    };
    let read_log = |p: &PathBuf| MetricsLog::read_csv(p).with_context(|| format!("in {}", p.display()));
    let output = match args.kind {
        PlotKind::Curves => {
            let logs = args.metrics.iter().map(read_log).collect::<Result<Vec<_>>>()?;
            let runs: Vec<Vec<(usize, f64)>> = logs.iter().map(|l| smooth(&curve_points(l), args.smooth)).collect();
            let groups: Vec<CurveGroup> = grouped(&labels, runs)
                .into_iter()
                .map(|(label, runs)| CurveGroup { label, runs })
                .collect();
            curves_svg(&groups, args.title.as_deref().unwrap_or("Training reward"), "reward (bps/Hz)")
        }
        PlotKind::Box => {
            let values = args.metrics.iter().map(|p| eval_rewards(p)).collect::<Result<Vec<_>>>()?;
            let groups: Vec<(String, Vec<f64>)> = grouped(&labels, values)
                .into_iter()
                .map(|(l, v)| (l, v.concat()))
                .collect();
            if let Some((l, _)) = groups.iter().find(|g| g.1.is_empty()) {
                bail!(Error::config("metrics", format!("no evaluation rewards for {l}")));
            }
            box_svg(&groups, args.title.as_deref().unwrap_or("Inference reward"), "reward (bps/Hz)")
        }
        PlotKind::Latency => {
            let logs = args.metrics.iter().map(read_log).collect::<Result<Vec<_>>>()?;
            let times: Vec<Vec<f64>> = logs
                .iter()
                .map(|l| l.rows.iter().filter_map(|r| r.iter_seconds).collect())
                .collect();
            let groups: Vec<(String, Vec<f64>)> = grouped(&labels, times)
                .into_iter()
                .map(|(l, v)| (l, v.concat()))
                .collect();
            if let Some((l, _)) = groups.iter().find(|g| g.1.is_empty()) {
                bail!(Error::config("metrics", format!("{l} has no iter_seconds values (record_wall_clock was off)")));
            }
            latency_table(&groups, reference_row(&groups))
        }
    };
    match &args.out {
        Some(p) => write(p, output),
        None => {
            print!("{output}");
            Ok(())
        }
    }
}

pub fn latency(args: &LatencyArgs) -> Result<()> {
    let mut cfg = load_config(&args.config)?.config;
    if let Some(b) = args.batch_size {
        cfg.batch_size = b;
    }
    let variants = if args.variants.is_empty() {
        ActorVariant::ALL.to_vec()
    } else {
        args.variants.iter().map(|v| parse_variant(v)).collect::<Result<Vec<_>>>()?
    };
    let mut reports: Vec<LatencyReport> = Vec::new();
    for v in variants {
        let c = TrainingConfig {
            actor_variant: v,
            ..cfg.clone()
        };
        c.validate()?;
        let r = measure_latency(&c, args.iterations)?;
        eprintln!("{}: {:.6} s/iter", v.name(), r.mean_seconds);
        reports.push(r);
    }
    let rows: Vec<(String, Vec<f64>)> = reports
        .iter()
        .map(|r| (r.variant.name().to_string(), r.samples.clone()))
        .collect();
    let mut table = format!(
        "Per-iteration seconds, batch {}, {} timed iterations after {} warm-up, {} threads\n\n",
        cfg.batch_size,
        args.iterations,
        secbeam::trainer::LATENCY_WARMUP,
        rayon::current_num_threads()
    );
    table.push_str(&latency_table(&rows, reference_row(&rows)));
    if let Some(p) = &args.json {
        write(p, serde_json::to_string_pretty(&reports)?)?;
    }
    match &args.out {
        Some(p) => write(p, table),
        None => {
            print!("{table}");
            Ok(())
        }
    }
}

