use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;

use super::{Cli, CliError, Command};
use crate::archive::load_weights;
use crate::bench::bench;
use crate::config::Config;
use crate::dataset::{Dataset, Sample};
use crate::dsp::{preprocess, synth_ecg_with, LeadSelection, PreprocessConfig, SynthOptions};
use crate::eval::{cross_validate, evaluate, roc_csv, EvalReport, Predictions};
use crate::io::{
    build_manifest, emit_header, load_record, make_splits, read_cache, write_cache, write_signal,
    Assignment, Encoding, Header, LabelMap, LeadInfo, Manifest, SplitMode, SplitPlan,
};
use crate::model::{count_params, ModelConfig, ModelParams, Variant};
use crate::tensor::{Rng, Stream, Tensor};
use crate::train::fit;

type Result<T> = std::result::Result<T, CliError>;

pub(super) fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Synth {
            out,
            per_class,
            classes,
            duration,
            fs,
            encoding,
        } => synth(cli, out, *per_class, classes.as_deref(), *duration, *fs, encoding),
        Command::Ingest => ingest(cli),
        Command::Preprocess => preprocess_cmd(cli),
        Command::Train => train(cli),
        Command::Eval { weights, split } => eval_cmd(cli, weights, split),
        Command::Crossval => crossval(cli),
        Command::Infer {
            weights,
            inputs,
            top_k,
        } => infer(cli, weights, inputs, *top_k),
        Command::Ablate => ablate(cli),
        Command::Bench {
            weights,
            input,
            runs,
        } => bench_cmd(cli, weights, input, *runs),
        Command::Export { weights, out } => export(weights, out),
    }
}

fn load_config(cli: &Cli) -> Result<Config> {
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => return Err(CliError::Config("this command needs --config".into())),
    };
    cfg.apply_overrides(cli.seed, cli.leads, cli.variant);
    cfg.validate()?;
    Ok(cfg)
}

/// Config for commands that can run without one.
fn config_or_default(cli: &Cli) -> Result<Config> {
    if cli.config.is_some() {
        return load_config(cli);
    }
    let mut cfg = Config::default();
    cfg.apply_overrides(cli.seed, cli.leads, cli.variant);
    Ok(cfg)
}

fn label_map(cfg: &Config) -> Result<LabelMap> {
    Ok(match &cfg.data.label_map {
        Some(p) => LabelMap::load(p)?,
        None => LabelMap::default(),
    })
}

/// Create `<root>/<timestamp>_seed<seed>`, adding a counter when the name is
/// taken. Existing directories are never reused.
pub fn create_run_dir(root: Option<&Path>, seed: u64) -> Result<PathBuf> {
    let root = root.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("runs"));
    std::fs::create_dir_all(&root)?;
    let stamp = chrono::Local::now().format("%Y%m%d-%H%M%S");
    for n in 0.. {
        let name = if n == 0 {
            format!("{stamp}_seed{seed}")
        } else {
            format!("{stamp}_seed{seed}_{n}")
        };
        let dir = root.join(name);
        match std::fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e.into()),
        }
    }
    unreachable!()
}

fn new_run(cli: &Cli, cfg: &Config) -> Result<PathBuf> {
    let dir = create_run_dir(cli.run_dir.as_deref(), cfg.train.seed)?;
    std::fs::write(dir.join("config.toml"), cfg.to_toml())?;
    println!("run directory: {}", dir.display());
    Ok(dir)
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn synth(
    cli: &Cli,
    out: &Path,
    per_class: usize,
    classes: Option<&str>,
    duration: f64,
    fs: u32,
    encoding: &str,
) -> Result<()> {
    let cfg = config_or_default(cli)?;
    let map = label_map(&cfg)?;
    let encoding: Encoding = encoding.parse()?;
    let picked: Vec<usize> = match classes {
        None => (0..map.num_classes()).collect(),
        Some(list) => list
            .split(',')
            .map(|a| {
                map.class_names
                    .iter()
                    .position(|n| n == a.trim())
                    .ok_or_else(|| CliError::Config(format!("unknown class {a:?}")))
            })
            .collect::<Result<_>>()?,
    };
    let leads = cli.leads.unwrap_or(12);
    let seed = cli.seed.unwrap_or(0);
    let opts = SynthOptions {
        leads,
        ..Default::default()
    };
    std::fs::create_dir_all(out)?;
    let ext = match encoding {
        Encoding::Int16Interleaved => "dat",
        Encoding::F32ChannelMajor => "f32",
    };
    let jobs: Vec<(usize, usize)> = picked
        .iter()
        .flat_map(|&c| (0..per_class).map(move |i| (c, i)))
        .collect();
    jobs.par_iter().try_for_each(|&(class, i)| -> Result<()> {
        let id = format!("S{class}{i:05}");
        let rec_seed = seed.wrapping_mul(1_000_003).wrapping_add((class * 100_000 + i) as u64);
        let rec = synth_ecg_with(class, fs, duration, rec_seed, &opts);
        let file = format!("{id}.{ext}");
        let names = ["I", "II", "III", "aVR", "aVL", "aVF", "V1", "V2", "V3", "V4", "V5", "V6"];
        let header = Header {
            id: id.clone(),
            n_leads: leads,
            fs,
            n_samples: rec.samples(),
            leads: (0..leads)
                .map(|l| LeadInfo {
                    file: file.clone(),
                    gain: 1000.0,
                    name: names.get(l).map_or(format!("L{l}"), |s| s.to_string()),
                })
                .collect(),
            codes: vec![map.code_for(class).unwrap_or("0").to_string()],
        };
        write(&out.join(format!("{id}.hea")), &emit_header(&header))?;
        write_signal(&out.join(&file), &rec.signal, encoding, &vec![1000.0; leads])?;
        Ok(())
    })?;
    println!("wrote {} synthetic records to {}", jobs.len(), out.display());
    Ok(())
}

fn ingest(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    let map = label_map(&cfg)?;
    let (manifest, skips) = build_manifest(&cfg.data.data_dir, &map)?;
    std::fs::create_dir_all(&cfg.data.work_dir)?;
    manifest.save(&cfg.data.manifest_path())?;
    write(&cfg.data.work_dir.join("skipped.csv"), &skips.to_csv())?;
    for (p, reason) in &skips.skipped {
        warn!("skipped {p}: {reason}");
    }
    let holdout = make_splits(&manifest, cfg.data.split_seed, SplitMode::Holdout)?;
    holdout.save(&cfg.data.holdout_path())?;
    let kfold = make_splits(&manifest, cfg.data.split_seed, SplitMode::KFold(cfg.data.folds))?;
    kfold.save(&cfg.data.kfold_path())?;
    println!(
        "{} records ({} skipped) -> {}",
        manifest.len(),
        skips.skipped.len(),
        cfg.data.manifest_path().display()
    );
    for (name, n) in manifest.class_names.iter().zip(&manifest.class_counts) {
        println!("  {name:>5} {n}");
    }
    Ok(())
}

fn load_manifest(cfg: &Config, map: &LabelMap) -> Result<Manifest> {
    let path = cfg.data.manifest_path();
    if !path.exists() {
        return Err(CliError::Data(format!(
            "manifest {} not found; run `ingest` first",
            path.display()
        )));
    }
    Ok(Manifest::load(&path, map.class_names.clone())?)
}

fn preprocess_cmd(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    let map = label_map(&cfg)?;
    let manifest = load_manifest(&cfg, &map)?;
    let cache = cfg.data.cache_dir();
    std::fs::create_dir_all(&cache)?;
    // leads are selected when the cache is read, so one cache serves both modes
    let pcfg = PreprocessConfig {
        lead_selection: LeadSelection::All,
        ..cfg.preprocess.clone()
    };
    manifest.rows.par_iter().try_for_each(|row| -> Result<()> {
        let rec = load_record(Path::new(&row.path), &map)?;
        let rows = preprocess(&rec.signal, rec.fs, &pcfg)?;
        write_cache(&cache.join(format!("{}.ecgs", row.id)), &rows, pcfg.target_fs)?;
        Ok(())
    })?;
    println!("cached {} records in {}", manifest.len(), cache.display());
    Ok(())
}

struct Data {
    manifest: Manifest,
    dataset: Dataset,
}

fn load_data(cfg: &Config, map: &LabelMap) -> Result<Data> {
    let manifest = load_manifest(cfg, map)?;
    let cache = cfg.data.cache_dir();
    if !cache.exists() {
        return Err(CliError::Data(format!(
            "cache {} not found; run `preprocess` first",
            cache.display()
        )));
    }
    let dataset = Dataset::from_cache(&manifest, &cache)?.select_leads(&cfg.preprocess.lead_selection)?;
    Ok(Data { manifest, dataset })
}

fn plan(cfg: &Config, manifest: &Manifest, mode: SplitMode) -> Result<SplitPlan> {
    let path = match mode {
        SplitMode::Holdout => cfg.data.holdout_path(),
        SplitMode::KFold(_) => cfg.data.kfold_path(),
    };
    if path.exists() {
        Ok(SplitPlan::load(&path, cfg.data.split_seed)?)
    } else {
        Ok(make_splits(manifest, cfg.data.split_seed, mode)?)
    }
}

fn subset(data: &Dataset, plan: &SplitPlan, which: Assignment) -> Dataset {
    data.select(&plan.ids(which))
}

fn model_config(cfg: &Config, data: &Dataset, map: &LabelMap) -> Result<ModelConfig> {
    let (leads, t) = data
        .input_shape()
        .ok_or_else(|| CliError::Data("dataset is empty".into()))?;
    let mc = cfg.model_config(leads, &map.class_names);
    mc.validate()?;
    if t % mc.pool_factor() != 0 {
        return Err(CliError::Config(format!(
            "preprocess.target_len {t} must be a multiple of {}",
            mc.pool_factor()
        )));
    }
    Ok(mc)
}

fn write_report(dir: &Path, stem: &str, report: &EvalReport, pred: &Predictions) -> Result<()> {
    let names: Vec<String> = report.classes.iter().map(|c| c.name.clone()).collect();
    write(&dir.join(format!("{stem}.json")), &report.to_json())?;
    write(&dir.join(format!("{stem}.csv")), &report.to_csv())?;
    write(
        &dir.join(format!("{stem}_confusion.csv")),
        &report.confusion.to_csv(&names),
    )?;
    write(&dir.join(format!("{stem}_roc.csv")), &roc_csv(pred, &names))?;
    Ok(())
}

fn print_report(report: &EvalReport) {
    println!("{:>6} {:>9} {:>9} {:>9} {:>9} {:>7}", "class", "precision", "recall", "f1", "auc", "support");
    for c in &report.classes {
        let auc = c.auc.map_or("-".to_string(), |a| format!("{a:.4}"));
        println!(
            "{:>6} {:>9.4} {:>9.4} {:>9.4} {:>9} {:>7}",
            c.name, c.precision, c.recall, c.f1, auc, c.support
        );
    }
    let auc = report.macro_auc.map_or("-".to_string(), |a| format!("{a:.4}"));
    println!(
        "{:>6} {:>9.4} {:>9.4} {:>9.4} {:>9} {:>7}",
        "macro", report.macro_precision, report.macro_recall, report.macro_f1, auc, report.total
    );
}

fn train(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    let map = label_map(&cfg)?;
    let Data { manifest, dataset } = load_data(&cfg, &map)?;
    let plan = plan(&cfg, &manifest, SplitMode::Holdout)?;
    let (tr, va, te) = (
        subset(&dataset, &plan, Assignment::Train),
        subset(&dataset, &plan, Assignment::Val),
        subset(&dataset, &plan, Assignment::Test),
    );
    let mc = model_config(&cfg, &dataset, &map)?;
    let dir = new_run(cli, &cfg)?;
    info!(
        "training {} ({} parameters) on {} / {} / {} records",
        mc.variant_kind(),
        count_params(&mc),
        tr.len(),
        va.len(),
        te.len()
    );
    let params = ModelParams::<f32>::build(&mc, &mut Rng::new(cfg.train.seed, Stream::Init))?;
    let out = fit(params, &tr, &va, &cfg.train, Some(&dir))?;
    std::fs::write(
        dir.join("runlog.json"),
        serde_json::to_string_pretty(&out.log).expect("log serializes"),
    )?;
    if let Some(b) = out.log.best() {
        println!(
            "best epoch {} (val macro-F1 {:.4}); stopped: {}",
            b.epoch, b.val_macro_f1, out.log.stop_reason
        );
    }
    if !te.is_empty() {
        let (report, pred) = evaluate(&out.best, &te, &cfg.eval, "test", "best")?;
        write_report(&dir, "test_report", &report, &pred)?;
        print_report(&report);
    }
    Ok(())
}

fn eval_cmd(cli: &Cli, weights: &Path, split: &str) -> Result<()> {
    let cfg = load_config(cli)?;
    let map = label_map(&cfg)?;
    let params = load_weights(weights)?;
    let Data { manifest, dataset } = load_data(&cfg, &map)?;
    let data = match split {
        "all" => dataset,
        s => {
            let which: Assignment = s.parse().map_err(CliError::Config)?;
            let plan = plan(&cfg, &manifest, SplitMode::Holdout)?;
            subset(&dataset, &plan, which)
        }
    };
    let dir = new_run(cli, &cfg)?;
    let (report, pred) = evaluate(&params, &data, &cfg.eval, split, &weights.display().to_string())?;
    write_report(&dir, &format!("{split}_report"), &report, &pred)?;
    print_report(&report);
    Ok(())
}

fn crossval(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    let map = label_map(&cfg)?;
    let Data { manifest, dataset } = load_data(&cfg, &map)?;
    let plan = plan(&cfg, &manifest, SplitMode::KFold(cfg.data.folds))?;
    let folds: Vec<usize> = dataset
        .samples
        .iter()
        .map(|s| match plan.assignment.get(&s.id) {
            Some(Assignment::Fold(f)) => Ok(*f),
            _ => Err(CliError::Data(format!("{} has no fold in the split plan", s.id))),
        })
        .collect::<Result<_>>()?;
    let mc = model_config(&cfg, &dataset, &map)?;
    let dir = new_run(cli, &cfg)?;
    let cv = cross_validate(&dataset, &folds, &mc, &cfg.train, &cfg.eval, Some(&dir))?;
    let mut summary = String::from("fold,macro_f1\n");
    for (f, r) in cv.folds.iter().enumerate() {
        write(&dir.join(format!("fold_{f:02}")).join("test_report.json"), &r.to_json())?;
        summary.push_str(&format!("{f},{:.6}\n", r.macro_f1));
        println!("fold {f}: macro-F1 {:.4}", r.macro_f1);
    }
    summary.push_str(&format!("mean,{:.6}\nstd,{:.6}\n", cv.mean_macro_f1, cv.std_macro_f1));
    write(&dir.join("cv_summary.csv"), &summary)?;
    write(
        &dir.join("cv_report.json"),
        &serde_json::to_string_pretty(&cv).expect("report serializes"),
    )?;
    println!("mean macro-F1 {:.4} (std {:.4})", cv.mean_macro_f1, cv.std_macro_f1);
    Ok(())
}

/// Model input `[1, leads, t]` from a header (run through the pipeline) or
/// a cache file (used as stored).
fn load_input(path: &Path, cfg: &Config, map: &LabelMap) -> Result<(String, Tensor<f32>)> {
    let rows = match path.extension().and_then(|e| e.to_str()) {
        Some("ecgs") => read_cache(path)?.0,
        Some("hea") => {
            let rec = load_record(path, map)?;
            preprocess(&rec.signal, rec.fs, &cfg.preprocess)?
        }
        _ => {
            return Err(CliError::Data(format!(
                "{}: expected a .hea header or .ecgs cache file",
                path.display()
            )))
        }
    };
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let s = Sample::from_rows(&id, &rows, 0);
    let shape = [1, s.x.shape()[0], s.x.shape()[1]];
    Ok((id, s.x.reshape(&shape).expect("same length")))
}

fn infer(cli: &Cli, weights: &Path, inputs: &[PathBuf], top_k: usize) -> Result<()> {
    let cfg = config_or_default(cli)?;
    let map = label_map(&cfg)?;
    let params = load_weights(weights)?;
    for path in inputs {
        let (id, x) = load_input(path, &cfg, &map)?;
        let probs = crate::model::predict(&params, &x)?;
        let mut ranked: Vec<(usize, f32)> = probs.data().iter().copied().enumerate().collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let top: Vec<String> = ranked
            .iter()
            .take(top_k.max(1))
            .map(|&(c, p)| format!("{}={p:.6}", params.config().class_name(c)))
            .collect();
        println!("{id}\t{}", top.join("\t"));
    }
    Ok(())
}

fn ablate(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    let map = label_map(&cfg)?;
    let Data { manifest, dataset } = load_data(&cfg, &map)?;
    let plan = plan(&cfg, &manifest, SplitMode::Holdout)?;
    let (tr, va, te) = (
        subset(&dataset, &plan, Assignment::Train),
        subset(&dataset, &plan, Assignment::Val),
        subset(&dataset, &plan, Assignment::Test),
    );
    let base = model_config(&cfg, &dataset, &map)?;
    let dir = new_run(cli, &cfg)?;
    let mut table = String::from("variant,params,macro_f1\n");
    for v in Variant::ALL {
        let mc = base.variant(v);
        let vdir = dir.join(v.name());
        std::fs::create_dir_all(&vdir)?;
        let params = ModelParams::<f32>::build(&mc, &mut Rng::new(cfg.train.seed, Stream::Init))?;
        let out = fit(params, &tr, &va, &cfg.train, Some(&vdir))?;
        let test = if te.is_empty() { &va } else { &te };
        let (report, pred) = evaluate(&out.best, test, &cfg.eval, "test", v.name())?;
        write_report(&vdir, "test_report", &report, &pred)?;
        let line = format!("{},{},{:.6}\n", v.name(), count_params(&mc), report.macro_f1);
        print!("{line}");
        table.push_str(&line);
    }
    write(&dir.join("ablation.csv"), &table)?;
    Ok(())
}

fn bench_cmd(cli: &Cli, weights: &Path, input: &Path, runs: usize) -> Result<()> {
    let cfg = config_or_default(cli)?;
    let map = label_map(&cfg)?;
    let params = load_weights(weights)?;
    let (_, x) = load_input(input, &cfg, &map)?;
    let size = std::fs::metadata(weights)?.len();
    let report = bench(&params, &x, runs, size)?;
    print!("{}", report.to_text());
    println!("(reference point only: 0.174 s/sample and a 3.66 MB model on a constrained edge device)");
    let dir = new_run(cli, &cfg)?;
    write(
        &dir.join("bench.json"),
        &serde_json::to_string_pretty(&report).expect("report serializes"),
    )?;
    Ok(())
}

fn export(weights: &Path, out: &Path) -> Result<()> {
    let params = load_weights(weights)?;
    let tensors: BTreeMap<String, serde_json::Value> = params
        .to_named()
        .into_iter()
        .map(|(n, t)| {
            (
                n,
                serde_json::json!({ "shape": t.shape(), "data": t.data() }),
            )
        })
        .collect();
    let doc = serde_json::json!({ "config": params.config(), "tensors": tensors });
    write(out, &serde_json::to_string(&doc).expect("json"))?;
    println!("exported {} tensors to {}", params.to_named().len(), out.display());
    Ok(())
}
