use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use kagnn::fitfn::{run_fit, sweep_k, Arm, FitResult, FitTask, Target};
use kagnn::gradcheck::{self, GradcheckConfig};
use kagnn::model::Model;
use kagnn::molgraph::{graph_to_json, EdgeKind, Label, MolecularGraph};
use kagnn::params::Params;
use kagnn::train::{
    evaluate, train_repeated, DatasetSummary, RepeatedReport, SplitSource, SplitSpec, TrainConfig, DEFAULT_RATIOS,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::data::{self, Format, Source};
use crate::{Cli, CliError, Command, EvalArgs, FeaturizeArgs, FitfnArgs, GradcheckArgs, SweepArgs, TrainArgs, TrainFlags};

type Result<T> = std::result::Result<T, CliError>;

pub fn run(cli: Cli) -> Result<()> {
    let dir = cli.data_dir.as_deref();
    match cli.command {
        Command::Featurize(a) => featurize(a, dir),
        Command::Train(a) => train(a, dir, cli.threads),
        Command::Eval(a) => eval(a, dir),
        Command::Fitfn(a) => fitfn(a, cli.threads),
        Command::Gradcheck(a) => gradcheck(a),
        Command::Sweep(a) => sweep(a, dir, cli.threads),
    }
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CliError::Data(format!("{}: {e}", parent.display())))?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// Wall-clock data lives here so every other JSON output is reproducible.
fn write_metadata(out: &Path, command: &str, threads: usize, extra: Value) -> Result<()> {
    let meta = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "finished_unix": unix_now(),
        "threads": threads,
        "timing": extra,
    });
    write(&out.join("metadata.json"), &pretty(&meta))
}

fn featurize(a: FeaturizeArgs, dir: Option<&Path>) -> Result<()> {
    if !(a.cutoff >= 0.0 && a.cutoff.is_finite()) {
        return Err(CliError::Usage(format!("--cutoff must be finite and >= 0, got {}", a.cutoff)));
    }
    let input = data::resolve(&a.input, dir);
    let format = a.format.unwrap_or_else(|| Format::infer(&input));
    let graphs = data::featurize(&input, format, a.cutoff)?;
    let mut out = String::new();
    for g in &graphs {
        out.push_str(&graph_to_json(g));
        out.push('\n');
    }
    write(&a.output, &out)?;
    let s = DatasetSummary::of(&graphs);
    println!(
        "featurized {} molecules: {} covalent edges, {} cutoff edges (cutoff {} Å)",
        s.n_graphs, s.covalent_edges, s.cutoff_edges, a.cutoff
    );
    Ok(())
}

/// Defaults, then `base`, then the config file, then explicit flags.
pub fn build_config(base: &serde_json::Map<String, Value>, flags: &TrainFlags) -> Result<TrainConfig> {
    let mut value = serde_json::to_value(TrainConfig::default()).expect("config serializes");
    let obj = value.as_object_mut().expect("object");
    obj.extend(base.clone());
    if let Some(path) = &flags.config {
        let file: Value = serde_json::from_slice(&data::read(path)?)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let Value::Object(fields) = file else {
            return Err(CliError::Usage(format!("{}: config must be a JSON object", path.display())));
        };
        obj.extend(fields);
    }
    let mut set = |key: &str, v: Option<Value>| {
        if let Some(v) = v {
            obj.insert(key.to_string(), v);
        }
    };
    set("cutoff", flags.cutoff.map(Value::from));
    set("K", flags.k.map(Value::from));
    set("n_layers", flags.layers.map(Value::from));
    set("batch_size", flags.batch_size.map(Value::from));
    set("learning_rate", flags.lr.map(Value::from));
    set("epochs", flags.epochs.map(Value::from));
    set("seed", flags.seed.map(Value::from));
    set("variant", flags.variant.map(|v| serde_json::to_value(v).expect("variant")));
    set("hidden_dim", flags.hidden.map(Value::from));
    set("patience", flags.patience.map(Value::from));
    let config: TrainConfig =
        serde_json::from_value(value).map_err(|e| CliError::Usage(format!("config: {e}")))?;
    config.validate()?;
    Ok(config)
}

fn split_source(split: Option<&Path>, dir: Option<&Path>) -> Result<SplitSource> {
    match split {
        None => Ok(SplitSource::Random { ratios: DEFAULT_RATIOS }),
        Some(p) => {
            let p = data::resolve(p, dir);
            let spec = SplitSpec::from_json(&data::read(&p)?).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
            Ok(SplitSource::Fixed(spec))
        }
    }
}

struct Trained {
    report: RepeatedReport,
    models: Vec<Model>,
    splits: Vec<SplitSpec>,
}

fn train_on(graphs: &[MolecularGraph], config: &TrainConfig, source: &SplitSource, repeats: usize) -> Result<Trained> {
    if let SplitSource::Fixed(s) = source {
        s.validate(graphs.len())?;
    }
    let (report, models) = train_repeated(graphs, config, source, repeats)?;
    let splits = (0..repeats)
        .map(|r| match source {
            SplitSource::Fixed(s) => Ok(s.clone()),
            SplitSource::Random { ratios } => {
                kagnn::train::random_split(graphs.len(), *ratios, config.seed.wrapping_add(r as u64))
            }
        })
        .collect::<kagnn::Result<Vec<_>>>()?;
    Ok(Trained { report, models, splits })
}

fn train(a: TrainArgs, dir: Option<&Path>, threads: usize) -> Result<()> {
    let config = build_config(&Default::default(), &a.flags)?;
    if a.repeats == 0 {
        return Err(CliError::Usage("--repeats must be positive".into()));
    }
    let data_path = data::resolve(&a.data, dir);
    let (graphs, source_kind) = data::load_dataset(&data_path, config.cutoff)?;
    if source_kind == Source::Graphs && a.flags.cutoff.is_some() {
        log::warn!("--cutoff has no effect on pre-featurized graphs");
    }
    let source = split_source(a.split.as_deref(), dir)?;
    let start = Instant::now();
    let trained = train_on(&graphs, &config, &source, a.repeats)?;

    write(&a.out.join("config.json"), &pretty(&config))?;
    write(&a.out.join("report.json"), &pretty(&trained.report))?;
    for (r, ((run, model), split)) in trained.report.runs.iter().zip(&trained.models).zip(&trained.splits).enumerate() {
        write(&a.out.join(format!("epochs_{r}.csv")), &run.epochs_csv())?;
        write(&a.out.join(format!("checkpoint_{r}.json")), &model.to_checkpoint_json())?;
        write(&a.out.join(format!("split_{r}.json")), &split.to_json())?;
    }
    let per_run: Vec<f64> = trained.report.runs.iter().map(|r| r.wall_clock.as_secs_f64()).collect();
    write_metadata(&a.out, "train", threads, json!({"total_secs": start.elapsed().as_secs_f64(), "run_secs": per_run}))?;

    let first = &trained.report.runs[0];
    println!(
        "{} runs: test ROC-AUC {:.4} ± {:.4} | {} parameters | {} graphs, {} covalent + {} cutoff edges | split {:?}",
        trained.report.runs.len(),
        trained.report.test_auc_mean,
        trained.report.test_auc_std,
        first.parameter_count,
        first.dataset.n_graphs,
        first.dataset.covalent_edges,
        first.dataset.cutoff_edges,
        first.split_provenance
    );
    Ok(())
}

fn eval(a: EvalArgs, dir: Option<&Path>) -> Result<()> {
    let ckpt = data::resolve(&a.checkpoint, dir);
    let model = Model::from_checkpoint_json(&data::read(&ckpt)?).map_err(|e| CliError::Data(format!("{}: {e}", ckpt.display())))?;
    let cutoff = a.cutoff.unwrap_or(model.config().cutoff);
    let (graphs, _) = data::load_dataset(&data::resolve(&a.data, dir), cutoff)?;
    let selected: Vec<&MolecularGraph> = match split_source(a.split.as_deref(), dir)? {
        SplitSource::Fixed(s) => {
            s.validate(graphs.len())?;
            s.test.iter().map(|&i| &graphs[i]).collect()
        }
        SplitSource::Random { .. } => graphs.iter().collect(),
    };
    let m = evaluate(&model, &selected)?;
    let labels: Vec<&[Label]> = selected.iter().map(|g| g.labels.as_slice()).collect();
    let doc = json!({
        "n_graphs": selected.len(),
        "n_labeled": labels.iter().map(|l| l.iter().filter(|x| x.is_some()).count()).sum::<usize>(),
        "roc_auc": m.mean,
        "per_task": m.per_task,
        "parameter_count": model.parameter_count(),
    });
    if let Some(out) = &a.out {
        write(out, &pretty(&doc))?;
    }
    println!("ROC-AUC {:.4} on {} graphs ({} parameters)", m.mean, selected.len(), model.parameter_count());
    Ok(())
}

#[derive(Serialize)]
struct FitSummaryRow {
    target: String,
    arm: Arm,
    #[serde(rename = "K")]
    harmonics: Option<usize>,
    seed: u64,
    train_mse: f64,
    test_mse: f64,
    threshold: Option<f64>,
    parameter_count: usize,
    steps: usize,
}

impl FitSummaryRow {
    fn of(r: &FitResult) -> Self {
        Self {
            target: r.task.target.name(),
            arm: r.arm,
            harmonics: (r.arm == Arm::FourierKan).then_some(r.task.harmonics),
            seed: r.seed,
            train_mse: r.train_mse,
            test_mse: r.test_mse,
            threshold: if r.arm == Arm::FourierKan && r.task.harmonics == r.task.target.reference_k() {
                r.task.target.threshold()
            } else {
                None
            },
            parameter_count: r.parameter_count,
            steps: r.epochs,
        }
    }
}

fn fitfn(a: FitfnArgs, threads: usize) -> Result<()> {
    let start = Instant::now();
    let targets: Vec<Target> = if a.target.eq_ignore_ascii_case("all") {
        Target::STANDARD_TARGETS.to_vec()
    } else {
        vec![a.target.parse()?]
    };
    let customize = |t: Target, k: usize| {
        let mut task = FitTask::new(t, k);
        if let Some(s) = a.steps {
            task.steps = s;
        }
        if let Some(n) = a.samples {
            task.n_samples = n;
        }
        if let Some(lr) = a.lr {
            task.learning_rate = lr;
        }
        if let Some(noise) = a.noise {
            task.noise_std = noise;
        }
        task
    };

    let mut results = Vec::new();
    if let Some(ks) = &a.sweep_k {
        let target = if a.target.eq_ignore_ascii_case("all") { Target::Polynomial } else { targets[0] };
        let kmax = ks.iter().copied().max().unwrap_or(1);
        let task = FitTask {
            n_samples: a.samples.unwrap_or_else(|| kagnn::fitfn::default_samples(kmax)),
            ..customize(target, kmax)
        };
        results.extend(sweep_k(&task, ks, a.seed)?);
    } else {
        let mut runs = Vec::new();
        for t in targets {
            let task = customize(t, a.k.unwrap_or_else(|| t.reference_k()));
            runs.push((task.clone(), Arm::FourierKan));
            if !a.kan_only {
                runs.push((task, Arm::Mlp));
            }
        }
        results.extend(kagnn::parallel::try_map(&runs, |(task, arm)| run_fit(task, *arm, a.seed))?);
    }

    let mut rows = Vec::new();
    for r in &results {
        let arm = match r.arm {
            Arm::FourierKan => format!("kan_k{}", r.task.harmonics),
            Arm::Mlp => "mlp".to_string(),
        };
        write(&a.out.join(format!("{}_{arm}.csv", r.task.target.name())), &r.predictions_csv())?;
        let row = FitSummaryRow::of(r);
        println!(
            "{:<14} {:<10} train MSE {:.3e}  test MSE {:.3e}{}",
            row.target,
            arm,
            row.train_mse,
            row.test_mse,
            row.threshold
                .map(|t| format!("  (threshold {t:.0e}: {})", if row.test_mse < t { "pass" } else { "FAIL" }))
                .unwrap_or_default()
        );
        rows.push(row);
    }
    write(&a.out.join("summary.json"), &pretty(&json!({ "fits": rows })))?;
    write_metadata(&a.out, "fitfn", threads, json!({"total_secs": start.elapsed().as_secs_f64()}))?;
    Ok(())
}

fn gradcheck(a: GradcheckArgs) -> Result<()> {
    let mut config = GradcheckConfig::default();
    if let Some(s) = a.seed {
        config.seed = s;
    }
    if let Some(k) = a.k {
        config.harmonics = k;
    }
    if let Some(h) = a.hidden {
        config.hidden_dim = h;
    }
    if let Some(l) = a.layers {
        config.n_layers = l;
    }
    if let Some(g) = a.graphs {
        config.graphs = g;
    }
    if let Some(c) = a.coords {
        config.coords_per_tensor = c;
    }
    if a.full {
        config.coords_per_tensor = 0;
    }
    config.corrupt = a.corrupt;
    let start = Instant::now();
    let report = gradcheck::run(&config)?;
    print!("{}", report.table());
    println!("{} in {:.1?}", if report.passed { "PASS" } else { "FAIL" }, start.elapsed());
    if let Some(out) = &a.out {
        write(out, &pretty(&report))?;
    }
    if report.passed {
        Ok(())
    } else {
        let failed: Vec<&str> = report.groups.iter().filter(|g| !g.passed).map(|g| g.group.as_str()).collect();
        Err(CliError::Numeric(format!("gradient check failed for {}", failed.join(", "))))
    }
}

/// Values swept one at a time around `base`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxes {
    #[serde(rename = "K", default)]
    pub harmonics: Vec<usize>,
    #[serde(default)]
    pub cutoff: Vec<f64>,
    #[serde(default)]
    pub batch_size: Vec<usize>,
    #[serde(default)]
    pub learning_rate: Vec<f64>,
    #[serde(default)]
    pub n_layers: Vec<usize>,
}

impl Default for SweepAxes {
    fn default() -> Self {
        Self {
            harmonics: (1..=5).collect(),
            cutoff: (0..=5).map(f64::from).collect(),
            batch_size: vec![32, 64, 128],
            learning_rate: vec![1e-4, 1e-3],
            n_layers: vec![1, 2, 3],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepManifest {
    /// Training fields applied on top of the defaults (and under CLI flags).
    #[serde(default)]
    pub base: serde_json::Map<String, Value>,
    #[serde(default = "one")]
    pub repeats: usize,
    #[serde(default)]
    pub axes: SweepAxes,
}

fn one() -> usize {
    1
}

#[derive(Serialize)]
struct SweepRow {
    axis: &'static str,
    value: f64,
    test_auc_mean: f64,
    test_auc_std: f64,
    parameter_count: usize,
    covalent_edges: usize,
    cutoff_edges: usize,
}

fn sweep(a: SweepArgs, dir: Option<&Path>, threads: usize) -> Result<()> {
    let manifest: SweepManifest = match &a.manifest {
        Some(p) => serde_json::from_slice(&data::read(p)?).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?,
        None => SweepManifest {
            base: Default::default(),
            repeats: 1,
            axes: SweepAxes::default(),
        },
    };
    if manifest.repeats == 0 {
        return Err(CliError::Usage("manifest repeats must be positive".into()));
    }
    let base = build_config(&manifest.base, &a.flags)?;
    let data_path = data::resolve(&a.data, dir);
    let source = split_source(a.split.as_deref(), dir)?;
    let start = Instant::now();

    let mut configs: Vec<(&'static str, f64, TrainConfig)> = Vec::new();
    let ax = &manifest.axes;
    configs.extend(ax.harmonics.iter().map(|&k| ("K", k as f64, TrainConfig { harmonics: k, ..base.clone() })));
    configs.extend(ax.cutoff.iter().map(|&c| ("cutoff", c, TrainConfig { cutoff: c, ..base.clone() })));
    configs.extend(ax.batch_size.iter().map(|&b| ("batch_size", b as f64, TrainConfig { batch_size: b, ..base.clone() })));
    configs.extend(ax.learning_rate.iter().map(|&l| ("learning_rate", l, TrainConfig { learning_rate: l, ..base.clone() })));
    configs.extend(ax.n_layers.iter().map(|&n| ("n_layers", n as f64, TrainConfig { n_layers: n, ..base.clone() })));

    let mut cache: Vec<(u64, Vec<MolecularGraph>, Source)> = Vec::new();
    let mut rows = Vec::new();
    let mut csv = String::from("axis,value,test_auc_mean,test_auc_std,parameter_count,covalent_edges,cutoff_edges\n");
    for (axis, value, config) in configs {
        config.validate().map_err(|e| CliError::from_core(e).context(&format!("sweep {axis}={value}")))?;
        let key = config.cutoff.to_bits();
        if !cache.iter().any(|(k, _, _)| *k == key) {
            let (g, s) = data::load_dataset(&data_path, config.cutoff)?;
            if s == Source::Graphs && !ax.cutoff.is_empty() {
                return Err(CliError::Usage("a cutoff sweep needs molecule input, not featurized graphs".into()));
            }
            cache.push((key, g, s));
        }
        let graphs = &cache.iter().find(|(k, _, _)| *k == key).expect("cached").1;
        let trained = train_on(graphs, &config, &source, manifest.repeats)
            .map_err(|e| e.context(&format!("sweep {axis}={value}")))?;
        let first = &trained.report.runs[0];
        let row = SweepRow {
            axis,
            value,
            test_auc_mean: trained.report.test_auc_mean,
            test_auc_std: trained.report.test_auc_std,
            parameter_count: first.parameter_count,
            covalent_edges: graphs.iter().map(|g| g.count_edges(EdgeKind::Covalent)).sum(),
            cutoff_edges: graphs.iter().map(|g| g.count_edges(EdgeKind::Cutoff)).sum(),
        };
        println!(
            "{axis}={value}: test ROC-AUC {:.4} ± {:.4}, {} parameters, {} covalent + {} cutoff edges",
            row.test_auc_mean, row.test_auc_std, row.parameter_count, row.covalent_edges, row.cutoff_edges
        );
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            row.axis, row.value, row.test_auc_mean, row.test_auc_std, row.parameter_count, row.covalent_edges, row.cutoff_edges
        ));
        rows.push(row);
    }
    write(&a.out.join("sweep.json"), &pretty(&json!({"base": base, "repeats": manifest.repeats, "runs": rows})))?;
    write(&a.out.join("sweep.csv"), &csv)?;
    write_metadata(&a.out, "sweep", threads, json!({"total_secs": start.elapsed().as_secs_f64()}))?;
    Ok(())
}

