use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use mpisentinel_core::corpus::{
    build_manifest, ingest_corrbench, ingest_mbi, read_manifest, write_manifest, AliasTable, CompileStatus, Compiler, CompilerCommand, Manifest,
    OptLevel, Provenance, Suite, DEFAULT_TIMEOUT_SECS, MBI_HEADER_PATTERN,
};
use mpisentinel_core::embed::{embed_with, seed_vocabulary, write_cache, CacheMeta, EmbedConfig, Normalization, EMBED_DIM, HALF_DIM};
use mpisentinel_core::eval::{
    ablation, label_space, prepare_dataset, run_scenario, train_fold, Backend, EvalError, FoldModel, LabelMode, Scenario, ScenarioKind, ScenarioOptions,
    SpecificityFormula,
};
use mpisentinel_core::gnn::{self, GnnConfig, GnnError, GnnModel};
use mpisentinel_core::tabular::{GaConfig, TabularError, TabularModel};
use mpisentinel_core::{build_graph, parse_ir, ErrorLabel, IrModule};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{overlay, Overlay};
use crate::{emit, read_overlay, AblateArgs, CliError, EmbedArgs, EvaluateArgs, EvaluateOpts, GraphArgs, IngestArgs, ModelOpts, PredictArgs, TrainArgs};

type Outcome = Result<u8, CliError>;

fn set_jobs(jobs: Option<usize>) -> Result<(), CliError> {
    if let Some(n) = jobs {
        if n == 0 {
            return Err(CliError::usage("config", "--jobs must be at least 1"));
        }
        // Fails only if the pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

/// Parses a value through the serde names of `T` so flags and report JSON
/// spell enums the same way.
fn parse_enum<T: DeserializeOwned>(flag: &str, s: &str) -> Result<T, CliError> {
    serde_json::from_value(Value::String(s.to_string())).map_err(|_| CliError::usage("config", format!("invalid value `{s}` for --{flag}")))
}

fn parse_str<T: FromStr<Err = String>>(s: &str) -> Result<T, CliError> {
    s.parse().map_err(|e: String| CliError::usage("config", e))
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::internal("io", format!("{}: {e}", path.display())))
}

/// Writes to stdout; a closed pipe (`| head`) is not an error.
fn out(text: &str) {
    use std::io::Write;
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn print_json(v: &impl Serialize) {
    out(&(serde_json::to_string_pretty(v).expect("output serializes") + "\n"));
}

fn load_manifest(path: &Path) -> Result<Manifest, CliError> {
    read_manifest(path).map_err(|e| CliError::usage("manifest", e.to_string()))
}

fn eval_error(e: EvalError) -> CliError {
    let kind = match &e {
        EvalError::InvalidConfig(_) => "InvalidConfig",
        EvalError::SuiteMissing(_) => "SuiteMissing",
        EvalError::LabelAbsent(_) => "LabelAbsent",
        EvalError::TooFewSamples { .. } => "TooFewSamples",
        EvalError::Tabular(TabularError::InvalidConfig(_)) | EvalError::Gnn(GnnError::InvalidConfig(_)) => "InvalidConfig",
        _ => "internal",
    };
    let exit = if kind == "internal" { 3 } else { 2 };
    CliError { exit, kind, message: e.to_string() }
}

/// Drops unset fields so an echoed config only lists real values.
fn echo(v: &impl Serialize) -> Value {
    let mut v = serde_json::to_value(v).expect("options serialize");
    if let Value::Object(m) = &mut v {
        m.retain(|_, x| !x.is_null());
    }
    v
}

// ---------- ingest ----------

pub fn ingest(a: IngestArgs) -> Outcome {
    let opts = overlay(&a.opts, &read_overlay(a.config.as_deref())?)?;
    set_jobs(opts.jobs)?;
    let suite_name = opts.suite.as_deref().ok_or_else(|| CliError::usage("config", "--suite is required"))?;
    let suite: Suite = parse_str(suite_name)?;
    let dir = opts.dir.as_deref().ok_or_else(|| CliError::usage("config", "--dir is required"))?;
    let dir = dir.canonicalize().map_err(|e| CliError::usage("io", format!("{}: {e}", dir.display())))?;
    if !dir.is_dir() {
        return Err(CliError::usage("io", format!("{}: not a directory", dir.display())));
    }
    let opt_levels: Vec<OptLevel> = match &opts.opt {
        Some(v) if !v.is_empty() => v.iter().map(|s| parse_str(s)).collect::<Result<_, _>>()?,
        _ => vec![OptLevel::O0],
    };
    let compiler = match opts.compiler_cmd.as_deref() {
        None | Some("none") | Some("") => Compiler::Prebuilt,
        Some(t) => Compiler::Command(CompilerCommand { template: t.to_string(), timeout_secs: opts.timeout_secs.unwrap_or(DEFAULT_TIMEOUT_SECS) }),
    };
    let pattern_text = opts.header_pattern.clone().unwrap_or_else(|| MBI_HEADER_PATTERN.to_string());
    let entries = match suite {
        Suite::Mbi => {
            let pattern = regex::Regex::new(&pattern_text).map_err(|e| CliError::usage("config", format!("--header-pattern: {e}")))?;
            let mut aliases = AliasTable::mbi_default();
            if let Some(p) = &opts.aliases {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::usage("config", format!("{}: {e}", p.display())))?;
                aliases.0.extend(AliasTable::from_json(&text).map_err(|e| CliError::usage("config", e.to_string()))?.0);
            }
            ingest_mbi(&dir, &pattern, &aliases)
        }
        Suite::CorrBench => ingest_corrbench(&dir),
        Suite::Other => return Err(CliError::usage("config", "--suite must be mbi or corrbench")),
    }
    .map_err(|e| CliError::usage("io", e.to_string()))?;
    if entries.is_empty() {
        emit("warning", "EmptyCorpus", &format!("no files under {}", dir.display()));
    }

    let ir_dir = opts.ir_dir.clone().unwrap_or_else(|| a.out.parent().unwrap_or(Path::new(".")).join("ir"));
    let provenance = Provenance {
        suites: BTreeMap::from([(suite.to_string(), dir.display().to_string())]),
        compiler: Some(match &compiler {
            Compiler::Prebuilt => "none".to_string(),
            Compiler::Command(c) => c.template.clone(),
        }),
        opt_levels: opt_levels.clone(),
        header_pattern: (suite == Suite::Mbi).then_some(pattern_text),
    };
    let jobs = opts.jobs.unwrap_or_else(rayon::current_num_threads);
    let mut manifest = build_manifest(&entries, &opt_levels, &compiler, &ir_dir, jobs, provenance);

    if a.append && a.out.exists() {
        let mut old = load_manifest(&a.out)?;
        old.samples.retain(|s| s.suite != suite);
        old.samples.append(&mut manifest.samples);
        old.provenance.suites.extend(manifest.provenance.suites);
        for o in manifest.provenance.opt_levels {
            if !old.provenance.opt_levels.contains(&o) {
                old.provenance.opt_levels.push(o);
            }
        }
        old.provenance.compiler = manifest.provenance.compiler;
        old.provenance.header_pattern = old.provenance.header_pattern.or(manifest.provenance.header_pattern);
        manifest = old;
    }
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CliError::internal("io", format!("{}: {e}", parent.display())))?;
    }
    write_manifest(&manifest, &a.out).map_err(|e| CliError::internal("io", e.to_string()))?;

    let mine: Vec<_> = manifest.samples.iter().filter(|s| s.suite == suite).collect();
    let mut labels: BTreeMap<String, usize> = BTreeMap::new();
    for s in mine.iter().filter(|s| s.label.is_some()) {
        *labels.entry(s.label.unwrap().to_string()).or_default() += 1;
    }
    print_json(&json!({
        "manifest": a.out.display().to_string(),
        "suite": suite,
        "sources": entries.len(),
        "samples": mine.len(),
        "compiled": mine.iter().filter(|s| s.status == CompileStatus::Ok).count(),
        "compile_errors": mine.iter().filter(|s| s.is_compile_failure()).count(),
        "quarantined": mine.iter().filter(|s| s.quarantined.is_some()).count(),
        "labels": labels,
    }));
    Ok(0)
}

// ---------- evaluate / ablate ----------

fn only_suite(m: &Manifest) -> Option<Suite> {
    let mut suites: Vec<Suite> = m.samples.iter().map(|s| s.suite).collect();
    suites.sort();
    suites.dedup();
    (suites.len() == 1).then(|| suites[0])
}

/// Fills defaults into `m` and builds the matching options.
fn resolve_model(m: &mut ModelOpts) -> Result<(Backend, LabelMode, ScenarioOptions), CliError> {
    let backend = parse_enum("backend", m.backend.get_or_insert_with(|| "ir2vec-dt".into()))?;
    let labels = parse_enum("labels", m.labels.get_or_insert_with(|| "binary".into()))?;
    let normalization: Normalization = parse_enum("normalization", m.normalization.get_or_insert_with(|| "none".into()))?;
    let ga = match m.ga.get_or_insert_with(|| "off".into()).as_str() {
        "on" => true,
        "off" => false,
        other => return Err(CliError::usage("config", format!("invalid value `{other}` for --ga (expected on or off)"))),
    };
    let gd = GaConfig::default();
    let gn = GnnConfig::default();
    let ga_config = GaConfig { population: *m.ga_population.get_or_insert(gd.population), generations: *m.ga_generations.get_or_insert(gd.generations), ..gd };
    let gnn = GnnConfig { epochs: *m.epochs.get_or_insert(gn.epochs), batch_size: *m.batch_size.get_or_insert(gn.batch_size), ..gn };
    let embed = EmbedConfig { seed: *m.embed_seed.get_or_insert(0), ..EmbedConfig::default() };
    let opt_level = m.opt.as_deref().map(parse_str::<OptLevel>).transpose()?;
    let options = ScenarioOptions { normalization, opt_level, ga, ga_config, seed: *m.seed.get_or_insert(0), gnn, embed, ..ScenarioOptions::default() };
    Ok((backend, labels, options))
}

struct Resolved {
    manifest: Manifest,
    manifest_path: PathBuf,
    scenario: Scenario,
    /// Effective options, echoed into the report.
    echo: Value,
}

fn resolve_evaluation(mut o: EvaluateOpts) -> Result<Resolved, CliError> {
    set_jobs(o.jobs)?;
    let manifest_path = o.manifest.clone().ok_or_else(|| CliError::usage("config", "--manifest is required"))?;
    let manifest = load_manifest(&manifest_path)?;
    let kind = match o.scenario.get_or_insert_with(|| "intra".into()).as_str() {
        "intra" => {
            let suite = match &o.suite {
                Some(s) => parse_str(s)?,
                None => {
                    let s = only_suite(&manifest).ok_or_else(|| CliError::usage("config", "intra scenario needs --suite when the manifest has several suites"))?;
                    o.suite = Some(s.key().to_string());
                    s
                }
            };
            ScenarioKind::Intra { suite }
        }
        "mix" => ScenarioKind::Mix,
        "cross" => {
            let get = |v: &Option<String>, flag: &str| v.as_deref().ok_or_else(|| CliError::usage("config", format!("cross scenario needs --{flag}"))).and_then(parse_str);
            ScenarioKind::Cross { train: get(&o.train_suite, "train-suite")?, validate: get(&o.validate_suite, "validate-suite")? }
        }
        other => return Err(CliError::usage("config", format!("invalid value `{other}` for --scenario (expected intra, mix or cross)"))),
    };
    let (backend, label_mode, mut options) = resolve_model(&mut o.model)?;
    options.folds = *o.folds.get_or_insert(10);
    options.specificity = parse_enum::<SpecificityFormula>("specificity-formula", o.specificity_formula.get_or_insert_with(|| "standard".into()))?;
    let scenario = Scenario { kind, backend, label_mode, options };
    scenario.validate().map_err(eval_error)?;
    // Thread count never changes results, so it is not part of the echo.
    o.jobs = None;
    Ok(Resolved { manifest, manifest_path, scenario, echo: echo(&o) })
}

fn base_dir(manifest: &Path) -> Option<&Path> {
    manifest.parent().filter(|p| !p.as_os_str().is_empty())
}

pub fn evaluate(a: EvaluateArgs) -> Outcome {
    let opts = overlay(&a.opts, &read_overlay(a.config.as_deref())?)?;
    let r = resolve_evaluation(opts)?;
    let mut report = run_scenario(&r.manifest, base_dir(&r.manifest_path), &r.scenario).map_err(eval_error)?;
    report.provenance.invocation = Some(r.echo);
    let text = report.to_json() + "\n";
    match &a.report {
        Some(p) => {
            write_file(p, &text)?;
            print_json(&json!({ "report": p.display().to_string(), "aggregate": report.aggregate, "dataset": report.dataset }));
        }
        None => out(&text),
    }
    if let Some(p) = &a.csv {
        write_file(p, &report.to_csv())?;
    }
    if report.runtime_errors() > 0 {
        emit("warning", "RuntimeErrors", &format!("{} samples failed; see the report's failures list", report.runtime_errors()));
        return Ok(1);
    }
    Ok(0)
}

pub fn ablate(a: AblateArgs) -> Outcome {
    let mut file: Overlay = read_overlay(a.config.as_deref())?;
    let mut exclude = a.exclude.clone();
    if let Some(v) = file.remove("exclude") {
        if exclude.is_empty() {
            exclude = serde_json::from_value(v).map_err(|e| CliError::usage("config", format!("exclude: {e}")))?;
        }
    }
    if exclude.is_empty() {
        return Err(CliError::usage("config", "give at least one --exclude label"));
    }
    let labels: Vec<ErrorLabel> = exclude
        .iter()
        .map(|s| ErrorLabel::from_str(s).map_err(|e| CliError::usage("UnknownLabel", format!("unknown label `{}`", e.0))))
        .collect::<Result<_, _>>()?;
    let opts = overlay(&a.opts, &file)?;
    let r = resolve_evaluation(opts)?;
    let mut report = ablation(&r.manifest, base_dir(&r.manifest_path), &labels, &r.scenario).map_err(eval_error)?;
    let mut inv = r.echo;
    inv["exclude"] = json!(exclude);
    report.provenance.invocation = Some(inv);
    let text = report.to_json() + "\n";
    match &a.report {
        Some(p) => {
            write_file(p, &text)?;
            print_json(&json!({ "report": p.display().to_string(), "rows": report.rows }));
        }
        None => out(&text),
    }
    if report.aggregate.counts.re > 0 {
        return Ok(1);
    }
    Ok(0)
}

// ---------- train / predict ----------

/// On-disk model of either backend.
#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "backend")]
pub enum SavedModel {
    #[serde(rename = "ir2vec-dt")]
    IrVecDt { embed: EmbedConfig, model: TabularModel },
    #[serde(rename = "gnn")]
    Gnn { checkpoint: Value },
}

pub fn train(a: TrainArgs) -> Outcome {
    set_jobs(a.jobs)?;
    let mut m = overlay(&a.model, &read_overlay(a.config.as_deref())?)?;
    let (backend, label_mode, options) = resolve_model(&mut m)?;
    let manifest = load_manifest(&a.manifest)?;
    let kind = match &a.suite {
        Some(s) => ScenarioKind::Intra { suite: parse_str(s)? },
        None => ScenarioKind::Mix,
    };
    let scenario = Scenario { kind, backend, label_mode, options };
    let ds = prepare_dataset(&manifest, base_dir(&a.manifest), &scenario).map_err(eval_error)?;
    if ds.is_empty() {
        return Err(CliError::usage("EmptyDataset", "manifest has no evaluable samples"));
    }
    let space = label_space(&ds, &scenario);
    let all: Vec<usize> = (0..ds.len()).collect();
    let saved = match train_fold(&ds, &all, &scenario, &space, scenario.options.seed).map_err(eval_error)? {
        FoldModel::Tabular(model) => SavedModel::IrVecDt { embed: scenario.options.embed, model },
        FoldModel::Gnn(model) => SavedModel::Gnn { checkpoint: serde_json::from_str(&model.to_json()).expect("checkpoint is JSON") },
    };
    write_file(&a.out, &(serde_json::to_string_pretty(&saved).expect("model serializes") + "\n"))?;
    let skipped: usize = ds.feature_failures.values().map(Vec::len).sum();
    print_json(&json!({ "model": a.out.display().to_string(), "backend": backend, "samples": ds.len(), "skipped": skipped, "classes": space, "config": echo(&m) }));
    Ok(0)
}

fn read_ir(path: &Path) -> Result<IrModule, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::usage("io", format!("{}: {e}", path.display())))?;
    parse_ir(&text).map_err(|e| CliError::usage("ParseError", format!("{}: {e}", path.display())))
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|x| (x - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

pub fn predict(a: PredictArgs) -> Outcome {
    let text = std::fs::read_to_string(&a.model).map_err(|e| CliError::usage("io", format!("{}: {e}", a.model.display())))?;
    let saved: SavedModel = serde_json::from_str(&text).map_err(|e| CliError::usage("IncompatibleModel", format!("{}: {e}", a.model.display())))?;
    let module = read_ir(&a.ir)?;
    let out = match saved {
        SavedModel::IrVecDt { embed, model } => {
            let vocab = seed_vocabulary(embed.seed, HALF_DIM);
            let v = embed_with(&module, &vocab, &embed.weights, &embed.flow, &a.ir.display().to_string());
            let (label, counts) = model.explain(&v.values).map_err(|e| CliError::usage("IncompatibleModel", e.to_string()))?;
            let leaf: BTreeMap<String, usize> = model.label_space.iter().map(|l| l.to_string()).zip(counts).collect();
            json!({ "backend": "ir2vec-dt", "ir": a.ir.display().to_string(), "label": label, "leaf_counts": leaf })
        }
        SavedModel::Gnn { checkpoint } => {
            let model = GnnModel::from_json(&checkpoint.to_string()).map_err(|e| CliError::usage("IncompatibleModel", e.to_string()))?;
            let g = build_graph(&module).map_err(|e| CliError::usage("ParseError", e.to_string()))?;
            if g.nodes.is_empty() {
                return Err(CliError::usage("EmptyGraph", GnnError::EmptyGraph.to_string()));
            }
            let logits = gnn::forward(&model, &g).map_err(|e| CliError::usage("IncompatibleModel", e.to_string()))?;
            let probs = softmax(&logits);
            let best = (0..probs.len()).fold(0, |b, i| if probs[i] > probs[b] { i } else { b });
            let p: BTreeMap<String, f64> = model.label_space.iter().map(|l| l.to_string()).zip(probs).collect();
            json!({ "backend": "gnn", "ir": a.ir.display().to_string(), "label": model.label_space[best], "probabilities": p })
        }
    };
    print_json(&out);
    Ok(0)
}

// ---------- embed / graph ----------

pub fn embed(a: EmbedArgs) -> Outcome {
    let cfg = EmbedConfig { seed: a.seed, ..EmbedConfig::default() };
    let vocab = seed_vocabulary(cfg.seed, HALF_DIM);
    let mut vectors = Vec::with_capacity(a.ir.len());
    for p in &a.ir {
        let module = read_ir(p)?;
        let v = embed_with(&module, &vocab, &cfg.weights, &cfg.flow, &p.display().to_string());
        if let Some(w) = &v.warning {
            emit("warning", "NotConverged", &format!("{}: {w:?}", p.display()));
        }
        vectors.push(v);
    }
    match &a.out {
        Some(path) => {
            write_cache(path, &vectors, &CacheMeta::new(&cfg, EMBED_DIM, Normalization::None)).map_err(|e| CliError::internal("io", e.to_string()))?;
            print_json(&json!({ "cache": path.display().to_string(), "rows": vectors.len(), "dim": EMBED_DIM }));
        }
        None => print_json(&vectors),
    }
    Ok(0)
}

pub fn graph(a: GraphArgs) -> Outcome {
    let module = read_ir(&a.ir)?;
    let g = build_graph(&module).map_err(|e| CliError::usage("ParseError", e.to_string()))?;
    match &a.out {
        Some(p) => {
            g.write(p).map_err(|e| CliError::internal("io", e.to_string()))?;
            print_json(&json!({ "graph": p.display().to_string(), "nodes": g.nodes.len(), "edges": g.edges.len() }));
        }
        None => out(&(g.to_json() + "\n")),
    }
    Ok(0)
}
