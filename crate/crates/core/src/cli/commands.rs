use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::Serialize;
use serde_json::{Map, Value};

use super::config::{count, parse_value, read_config_object, required, take};
use super::manifest::{digest, ensure_readable, ensure_writable, manifest_path, sibling, RunManifest, MANIFEST_VERSION};
use super::report::{emit_report, fmt_f64, read_report_csv, ReportFormat};
use super::{BenchArgs, Cli, Command, EvalArgs, ReportArgs, SimulateArgs, SynthArgs, SystemsAction, TrainArgs};
use crate::error::{Error, Result};
use crate::estim::{benchmark_rmse, BenchConfig, DerivativeSource, FitMethod};
use crate::eval::{ate_trend, discretize_at_median, latent_r2, partition_accuracy, AteSlice, AteTrend};
use crate::multiview::{
    block_distance_medians, encode_batch, generate_multiview_dataset_with, read_dataset, train_identifier,
    write_dataset, IdentifierModel, SynthOptions, TrainConfig,
};
use crate::rng;
use crate::solver::{integrate, write_trajectories, TimeGrid};
use crate::systems::{catalog, lookup, sample_parameters, CATALOG_VERSION};

struct Ctx {
    config: Option<PathBuf>,
    force: bool,
    threads: usize,
}

/// Bookkeeping shared by every command that writes files.
struct Run<'a> {
    ctx: &'a Ctx,
    command: &'static str,
    start: Instant,
    seeds: BTreeMap<String, u64>,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

impl<'a> Run<'a> {
    /// Resolve paths before any work: inputs must exist, outputs and the manifest must not.
    fn new(ctx: &'a Ctx, command: &'static str, inputs: Vec<PathBuf>, outputs: Vec<PathBuf>) -> Result<Self> {
        ensure_readable(&inputs.iter().map(PathBuf::as_path).collect::<Vec<_>>())?;
        let mut all = outputs.clone();
        all.push(manifest_path(&outputs[0]));
        ensure_writable(&all, ctx.force)?;
        Ok(Self {
            ctx,
            command,
            start: Instant::now(),
            seeds: BTreeMap::new(),
            inputs,
            outputs,
        })
    }

    fn seed(&mut self, root: u64, tag: &str) -> u64 {
        let s = rng::stage_seed(root, tag);
        self.seeds.insert(tag.to_string(), s);
        s
    }

    fn finish(self, config: &impl Serialize) -> Result<()> {
        let manifest = RunManifest {
            manifest_version: MANIFEST_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").into(),
            command: self.command.into(),
            config: serde_json::to_value(config)?,
            catalog_version: CATALOG_VERSION.into(),
            seeds: self.seeds,
            threads: self.ctx.threads,
            wall_time_s: self.start.elapsed().as_secs_f64(),
            inputs: self.inputs.iter().map(|p| digest(p)).collect::<Result<_>>()?,
            outputs: self.outputs.iter().map(|p| digest(p)).collect::<Result<_>>()?,
        };
        manifest.write(&manifest_path(&self.outputs[0]))
    }
}

fn thread_count(flag: Option<i64>) -> Result<Option<usize>> {
    if let Some(t) = flag {
        return count("threads", t, 1).map(Some);
    }
    match std::env::var("DYNIDENT_THREADS") {
        Ok(v) => {
            let t: i64 = v.trim().parse().map_err(|_| Error::config("threads", format!("DYNIDENT_THREADS=`{v}` is not an integer")))?;
            count("threads", t, 1).map(Some)
        }
        Err(_) => Ok(None),
    }
}

pub(super) fn dispatch(cli: Cli) -> Result<()> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = thread_count(cli.threads)? {
        builder = builder.num_threads(t);
    }
    let pool = builder.build().map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    let ctx = Ctx {
        config: cli.config,
        force: cli.force,
        threads: pool.current_num_threads(),
    };
    pool.install(|| match cli.command {
        Command::Systems { action: SystemsAction::List } => systems_list(),
        Command::Simulate(a) => simulate(&ctx, &a),
        Command::Bench(a) => bench(&ctx, &a),
        Command::SynthMv(a) => synth_mv(&ctx, &a),
        Command::TrainMv(a) => train_mv(&ctx, &a),
        Command::Eval(a) => eval(&ctx, &a),
        Command::Report(a) => report(&ctx, &a),
    })
}

/// Config file (or manifest) values overlaid by the flags that were given.
fn layered(ctx: &Ctx, command: &str, flags: &impl Serialize) -> Result<Map<String, Value>> {
    let mut obj = match &ctx.config {
        Some(p) => read_config_object(p, command)?,
        None => Map::new(),
    };
    if let Value::Object(f) = serde_json::to_value(flags)? {
        for (k, v) in f {
            if !v.is_null() {
                obj.insert(k, v);
            }
        }
    }
    Ok(obj)
}

fn systems_list() -> Result<()> {
    let mut out = String::from("id\tname\td\tN\tlinear_in_theta\n");
    for s in catalog() {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            s.id,
            s.name,
            s.state_dim,
            s.param_dim,
            s.is_linear_in_theta()
        ));
    }
    print!("{out}");
    Ok(())
}

#[derive(Serialize)]
struct SimulateRun {
    system: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    theta: Option<Vec<f64>>,
    draws: usize,
    seed: u64,
    noise: f64,
    t_max: f64,
    points: usize,
    out: PathBuf,
}

fn simulate(ctx: &Ctx, flags: &SimulateArgs) -> Result<()> {
    let a: SimulateArgs = parse_value(Value::Object(layered(ctx, "simulate", flags)?), "")?;
    let system = lookup(&required("system", a.system)?).map_err(|e| Error::config("system", e.to_string()))?;
    let theta = a.theta.map(|l| l.0);
    let draws = count("draws", a.draws.unwrap_or(1), 1)?;
    if let Some(th) = &theta {
        if th.len() != system.param_dim {
            return Err(Error::config("theta", format!("expected {} values, got {}", system.param_dim, th.len())));
        }
        if draws != 1 {
            return Err(Error::config("draws", "an explicit theta gives exactly one trajectory"));
        }
    }
    let noise = a.noise.unwrap_or(0.0);
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::config("noise", "must be finite and non-negative"));
    }
    let cfg = SimulateRun {
        system: system.id.clone(),
        theta,
        draws,
        seed: a.seed.unwrap_or(0),
        noise,
        t_max: a.t_max.unwrap_or(system.t_max),
        points: count("points", a.points.unwrap_or(system.grid_points as i64), 2)?,
        out: required("out", a.out)?,
    };
    let grid = TimeGrid::uniform(0.0, cfg.t_max, cfg.points).map_err(|e| Error::config("t_max", e.to_string()))?;
    let mut run = Run::new(ctx, "simulate", vec![], vec![cfg.out.clone()])?;
    let thetas = match &cfg.theta {
        Some(th) => vec![th.clone()],
        None => {
            let s = run.seed(cfg.seed, &format!("simulate/{}", system.id));
            sample_parameters(system, cfg.draws, s)?.into_iter().map(|d| d.theta).collect()
        }
    };
    let noise_stream = run.seed(cfg.seed, &format!("noise/{}", system.id));
    let normal = Normal::new(0.0, cfg.noise.max(f64::MIN_POSITIVE)).map_err(|e| Error::invalid(e.to_string()))?;
    let trajs = thetas
        .iter()
        .enumerate()
        .map(|(i, th)| {
            let tr = integrate(system, th, &system.initial_state, &grid)?;
            if cfg.noise == 0.0 {
                return Ok(tr);
            }
            let mut r = rng::rng_from(rng::item_seed(noise_stream, i as u64));
            let noisy = tr.states().iter().map(|v| v + normal.sample(&mut r)).collect();
            tr.with_states(noisy)
        })
        .collect::<Result<Vec<_>>>()?;
    write_trajectories(&cfg.out, &trajs)?;
    run.finish(&cfg)
}

#[derive(Serialize)]
struct BenchRun {
    systems: Vec<String>,
    draws: usize,
    method: FitMethod,
    noise: f64,
    seed: u64,
    derivatives: DerivativeSource,
    #[serde(skip_serializing_if = "Option::is_none")]
    t_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    points: Option<usize>,
    out: PathBuf,
}

fn bench(ctx: &Ctx, flags: &BenchArgs) -> Result<()> {
    let a: BenchArgs = parse_value(Value::Object(layered(ctx, "bench", flags)?), "")?;
    let systems = required("systems", a.systems)?.0;
    for id in &systems {
        lookup(id).map_err(|e| Error::config("systems", e.to_string()))?;
    }
    let cfg = BenchRun {
        systems,
        draws: count("draws", a.draws.unwrap_or(100), 1)?,
        method: a.method.unwrap_or(FitMethod::DerivativeMatching),
        noise: a.noise.unwrap_or(0.0),
        seed: a.seed.unwrap_or(0),
        derivatives: a.derivatives.unwrap_or(DerivativeSource::Exact),
        t_max: a.t_max,
        points: a.points.map(|p| count("points", p, 3)).transpose()?,
        out: required("out", a.out)?,
    };
    if !(cfg.noise >= 0.0 && cfg.noise.is_finite()) {
        return Err(Error::config("noise", "must be finite and non-negative"));
    }
    if cfg.t_max.is_some() != cfg.points.is_some() {
        return Err(Error::config("t_max", "t_max and points must be given together"));
    }
    if ReportFormat::from_path(&cfg.out)? != ReportFormat::Csv {
        return Err(Error::config("out", "bench writes a .csv report"));
    }
    let md = sibling(&cfg.out, "md");
    let mut run = Run::new(ctx, "bench", vec![], vec![cfg.out.clone(), md.clone()])?;
    for id in &cfg.systems {
        for stage in ["draws", "noise", "restarts"] {
            run.seed(cfg.seed, &format!("{stage}/{id}"));
        }
    }
    let mut bc = BenchConfig::new(cfg.systems.clone(), cfg.draws, cfg.method, cfg.seed);
    bc.noise = cfg.noise;
    bc.derivatives = cfg.derivatives;
    bc.horizon = cfg.t_max.zip(cfg.points);
    let reports = benchmark_rmse(&bc)?;
    emit_report(&reports, ReportFormat::Csv, &cfg.out)?;
    emit_report(&reports, ReportFormat::Md, &md)?;
    run.finish(&cfg)
}

#[derive(Serialize)]
struct SynthRun {
    system: String,
    shared: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    secondary: Option<Vec<usize>>,
    pairs: usize,
    seed: u64,
    jitter: f64,
    out: PathBuf,
}

fn synth_mv(ctx: &Ctx, flags: &SynthArgs) -> Result<()> {
    let a: SynthArgs = parse_value(Value::Object(layered(ctx, "synth-mv", flags)?), "")?;
    let system = lookup(&required("system", a.system)?).map_err(|e| Error::config("system", e.to_string()))?;
    let cfg = SynthRun {
        system: system.id.clone(),
        shared: required("shared", a.shared)?.0,
        secondary: a.secondary.map(|l| l.0),
        pairs: count("pairs", a.pairs.unwrap_or(2000), 1)?,
        seed: a.seed.unwrap_or(0),
        jitter: a.jitter.unwrap_or(0.0),
        out: required("out", a.out)?,
    };
    let mut run = Run::new(ctx, "synth-mv", vec![], vec![cfg.out.clone()])?;
    run.seed(cfg.seed, &format!("multiview/{}", system.id));
    let opts = SynthOptions {
        shared: cfg.shared.clone(),
        secondary: cfg.secondary.clone(),
        jitter: cfg.jitter,
    };
    let pairs = generate_multiview_dataset_with(system, &opts, cfg.pairs, cfg.seed)?;
    write_dataset(&cfg.out, &pairs)?;
    run.finish(&cfg)
}

#[derive(Serialize)]
struct TrainRun<'a> {
    data: &'a Path,
    out: &'a Path,
    #[serde(flatten)]
    train: &'a TrainConfig,
}

fn train_mv(ctx: &Ctx, flags: &TrainArgs) -> Result<()> {
    let mut obj = layered(ctx, "train-mv", flags)?;
    let data: PathBuf = required("data", take(&mut obj, "data")?)?;
    let out: PathBuf = required("out", take(&mut obj, "out")?)?;
    let cfg: TrainConfig = parse_value(Value::Object(obj), "")?;
    cfg.validate()?;
    let curve_path = sibling(&out, "loss.csv");
    let mut run = Run::new(ctx, "train-mv", vec![data.clone()], vec![out.clone(), curve_path.clone()])?;
    run.seed(cfg.seed, "init");
    run.seed(cfg.seed, "shuffle");
    let pairs = read_dataset(&data)?;
    let (model, curve) = train_identifier(&pairs, &cfg)?;
    model.save(&out)?;
    let mut csv = String::from("epoch,total,alignment,sufficiency\n");
    for e in &curve {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            e.epoch,
            fmt_f64(e.total),
            fmt_f64(e.alignment),
            fmt_f64(e.sufficiency)
        ));
    }
    fs::write(&curve_path, csv).map_err(|e| Error::io(&curve_path, e))?;
    run.finish(&TrainRun {
        data: &data,
        out: &out,
        train: &cfg,
    })
}

#[derive(Serialize)]
struct EvalRun {
    model: PathBuf,
    data: PathBuf,
    report: PathBuf,
    seed: u64,
    ate_slices: usize,
}

/// Rows of the long-form evaluation table.
struct Table {
    rows: Vec<(String, String, String, f64)>,
}

impl Table {
    fn push(&mut self, section: &str, row: impl Into<String>, col: impl Into<String>, v: f64) {
        self.rows.push((section.into(), row.into(), col.into(), v));
    }
}

/// Outcomes for the ATE series are synthetic: the treatment is confounded by the first
/// shared parameter `c` (standardized) and `Y = τ_k·T + c + ε`, with `τ_k = 1 + 0.1·k` in
/// slice `k`. Adjusting for the latents recovers `τ_k` only if they carry `c`.
fn synthetic_ate(z: &DMatrix<f64>, conf: &[f64], slices: usize, pairs: usize, views: usize, seed: u64) -> Result<AteTrend> {
    let mean = conf.iter().sum::<f64>() / conf.len() as f64;
    let sd = (conf.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / conf.len() as f64).sqrt().max(1e-12);
    let per = pairs / slices;
    let slices: Vec<AteSlice> = (0..slices)
        .map(|k| {
            let rows: Vec<usize> = (k * per * views..(k + 1) * per * views).collect();
            let tau = 1.0 + 0.1 * k as f64;
            let mut y = Vec::with_capacity(rows.len());
            let mut t = Vec::with_capacity(rows.len());
            for &i in &rows {
                let mut r = rng::rng_from(rng::item_seed(seed, i as u64));
                let c = (conf[i] - mean) / sd;
                let ti = r.random_bool(1.0 / (1.0 + (-c).exp()));
                let eps: f64 = StandardNormal.sample(&mut r);
                y.push(tau * f64::from(u8::from(ti)) + c + eps);
                t.push(ti);
            }
            AteSlice {
                label: format!("slice{k}"),
                y,
                t,
                x: DMatrix::from_fn(rows.len(), z.ncols(), |i, j| z[(rows[i], j)]),
            }
        })
        .collect();
    ate_trend(&slices)
}

fn eval(ctx: &Ctx, flags: &EvalArgs) -> Result<()> {
    let a: EvalArgs = parse_value(Value::Object(layered(ctx, "eval", flags)?), "")?;
    let cfg = EvalRun {
        model: required("model", a.model)?,
        data: required("data", a.data)?,
        report: required("report", a.report)?,
        seed: a.seed.unwrap_or(0),
        ate_slices: count("ate_slices", a.ate_slices.unwrap_or(2), 0)?,
    };
    if ReportFormat::from_path(&cfg.report).map_err(|_| Error::config("report", "must end in .csv"))? != ReportFormat::Csv {
        return Err(Error::config("report", "must end in .csv"));
    }
    if cfg.ate_slices == 1 {
        return Err(Error::config("ate_slices", "an ATE series needs 0 or at least 2 slices"));
    }
    let md = sibling(&cfg.report, "md");
    let mut run = Run::new(ctx, "eval", vec![cfg.model.clone(), cfg.data.clone()], vec![cfg.report.clone(), md.clone()])?;
    run.seed(cfg.seed, "split");
    let ate_seed = run.seed(cfg.seed, "ate");
    let model = IdentifierModel::load(&cfg.model)?;
    let pairs = read_dataset(&cfg.data)?;
    let n_views = pairs[0].views.len();
    let views: Vec<_> = pairs.iter().flat_map(|p| p.views.iter().cloned()).collect();
    let thetas: Vec<Vec<f64>> = views
        .iter()
        .map(|v| v.theta_truth.clone().ok_or_else(|| Error::Format("evaluation data must record theta for every view".into())))
        .collect::<Result<_>>()?;
    let n_theta = thetas[0].len();
    let latents = encode_batch(&model, &views)?;
    let z = DMatrix::from_fn(latents.len(), model.layout.latent_dim, |i, j| latents[i][j]);
    let targets = DMatrix::from_fn(thetas.len(), n_theta, |i, j| thetas[i][j]);
    let layout = &model.layout;

    let mut table = Table { rows: Vec::new() };
    let labels: Vec<Vec<usize>> = (0..n_theta).map(|j| discretize_at_median(targets.column(j).as_slice())).collect();
    let acc = partition_accuracy(&z, layout, &labels, cfg.seed)?;
    for (b, row) in acc.accuracy.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            table.push("accuracy", format!("block{b}"), format!("theta{j}"), *v);
        }
    }
    for w in &acc.warnings {
        eprintln!("warning: {w}");
    }
    for (b, idx) in layout.blocks.iter().enumerate() {
        let block = DMatrix::from_fn(z.nrows(), idx.len(), |i, j| z[(i, idx[j])]);
        let r2 = latent_r2(&block, &targets, cfg.seed)?;
        for (j, v) in r2.per_component.iter().enumerate() {
            table.push("r2", format!("block{b}"), format!("theta{j}"), *v);
        }
    }
    for (b, d) in block_distance_medians(&model, &pairs)?.iter().enumerate() {
        table.push("block_distance", format!("block{b}"), "median", *d);
    }
    let per_slice = if cfg.ate_slices > 0 { pairs.len() / cfg.ate_slices * n_views } else { 0 };
    if cfg.ate_slices > 0 && per_slice < 50 {
        eprintln!("warning: ATE series skipped: {per_slice} rows per slice, AIPW needs at least 50");
    } else if cfg.ate_slices > 0 {
        let conf: Vec<f64> = thetas.iter().map(|t| t[pairs[0].shared_indices[0]]).collect();
        let trend = synthetic_ate(&z, &conf, cfg.ate_slices, pairs.len(), n_views, ate_seed)?;
        for (k, r) in trend.results.iter().enumerate() {
            let label = &trend.labels[k];
            table.push("ate", label.clone(), "ate_true", 1.0 + 0.1 * k as f64);
            table.push("ate", label.clone(), "ate_hat", r.ate_hat);
            table.push("ate", label.clone(), "se_hat", r.se_hat);
            table.push("ate", label.clone(), "change_ratio", trend.change_ratios[k]);
            table.push("ate", label.clone(), "isotonic", trend.isotonic[k]);
        }
    }

    let mut csv = String::from("section,row,column,value\n");
    for (s, r, c, v) in &table.rows {
        csv.push_str(&format!("{s},{r},{c},{}\n", fmt_f64(*v)));
    }
    fs::write(&cfg.report, csv).map_err(|e| Error::io(&cfg.report, e))?;
    fs::write(&md, render_eval_markdown(&table)).map_err(|e| Error::io(&md, e))?;
    run.finish(&cfg)
}

fn render_eval_markdown(t: &Table) -> String {
    let titles = [
        ("accuracy", "Held-out accuracy of median-split θ from each latent block"),
        ("r2", "Held-out R² of θ from each latent block"),
        ("block_distance", "Median distance between views 0 and 1 per block"),
        ("ate", "AIPW ATE series on synthetic outcomes, latents as covariates"),
    ];
    let mut out = String::from("# Evaluation\n");
    for (section, title) in titles {
        let rows: Vec<_> = t.rows.iter().filter(|r| r.0 == section).collect();
        if rows.is_empty() {
            continue;
        }
        let mut cols: Vec<&str> = Vec::new();
        let mut names: Vec<&str> = Vec::new();
        for r in &rows {
            if !cols.contains(&r.2.as_str()) {
                cols.push(&r.2);
            }
            if !names.contains(&r.1.as_str()) {
                names.push(&r.1);
            }
        }
        out.push_str(&format!("\n## {title}\n\n| | {} |\n|---|{}\n", cols.join(" | "), "---|".repeat(cols.len())));
        for n in names {
            let cells: Vec<String> = cols
                .iter()
                .map(|c| {
                    rows.iter()
                        .find(|r| r.1 == n && r.2 == *c)
                        .map_or(String::new(), |r| format!("{:.3}", r.3))
                })
                .collect();
            out.push_str(&format!("| {n} | {} |\n", cells.join(" | ")));
        }
    }
    out
}

#[derive(Serialize)]
struct ReportRun {
    inputs: Vec<PathBuf>,
    out: PathBuf,
}

fn report(ctx: &Ctx, flags: &ReportArgs) -> Result<()> {
    let a: ReportArgs = parse_value(Value::Object(layered(ctx, "report", flags)?), "")?;
    let cfg = ReportRun {
        inputs: required("inputs", a.inputs)?.0,
        out: required("out", a.out)?,
    };
    if cfg.inputs.is_empty() {
        return Err(Error::config("inputs", "at least one report CSV is required"));
    }
    let format = ReportFormat::from_path(&cfg.out)?;
    let run = Run::new(ctx, "report", cfg.inputs.clone(), vec![cfg.out.clone()])?;
    let mut reports = Vec::new();
    for p in &cfg.inputs {
        reports.extend(read_report_csv(p)?);
    }
    emit_report(&reports, format, &cfg.out)?;
    run.finish(&cfg)
}
