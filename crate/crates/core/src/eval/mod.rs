//! Cross-validation harness: folds, Intra/Mix/Cross scenarios, metrics,
//! per-label tables and label-exclusion ablations.

mod metrics;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Manifest, OptLevel, Provenance, Suite};
use crate::embed::{embed_with, seed_vocabulary, EmbedConfig, Normalization, SeedVocab, HALF_DIM};
use crate::folds::stratified_folds;
use crate::gnn::{self, GnnConfig, GnnError, GnnModel};
use crate::graph::{build_graph, ProgramGraph};
use crate::labels::{to_binary, BinaryLabel, ClassLabel, ErrorLabel};
use crate::tabular::{fit_model, GaConfig, LabeledVectors, TabularError, TabularModel, TabularOptions};

pub use metrics::{confusion, metrics, metrics_with, ConfusionCounts, MetricsReport, SpecificityFormula};

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("{predictions} predictions for {truth} truth labels")]
    LengthMismatch { predictions: usize, truth: usize },
    #[error("{samples} samples cannot fill {k} folds")]
    TooFewSamples { samples: usize, k: usize },
    #[error("manifest has no samples of suite {0}")]
    SuiteMissing(Suite),
    #[error("manifest has no samples labelled {0}")]
    LabelAbsent(ErrorLabel),
    #[error("invalid scenario: {0}")]
    InvalidConfig(String),
    #[error("excluded label {label} found in training fold {fold}")]
    Leakage { label: ErrorLabel, fold: usize },
    #[error(transparent)]
    Tabular(#[from] TabularError),
    #[error(transparent)]
    Gnn(#[from] GnnError),
}

// ---------- folds ----------

/// `k` disjoint partitions of sample ids, each sorted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub folds: Vec<Vec<String>>,
}

fn check_k(n: usize, k: usize) -> Result<(), EvalError> {
    if k < 2 {
        return Err(EvalError::InvalidConfig(format!("fold count must be at least 2, got {k}")));
    }
    if n < k {
        return Err(EvalError::TooFewSamples { samples: n, k });
    }
    Ok(())
}

/// Stratified by label; see [`stratified_folds`] for the assignment rule.
pub fn make_folds<L: Ord>(samples: &[(L, String)], k: usize, seed: u64) -> Result<FoldPlan, EvalError> {
    check_k(samples.len(), k)?;
    let keys: Vec<(&L, &str)> = samples.iter().map(|(l, id)| (l, id.as_str())).collect();
    let folds = stratified_folds(&keys, k, seed)
        .into_iter()
        .map(|f| {
            let mut ids: Vec<String> = f.into_iter().map(|i| samples[i].1.clone()).collect();
            ids.sort();
            ids
        })
        .collect();
    Ok(FoldPlan { folds })
}

// ---------- scenario ----------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ScenarioKind {
    Intra { suite: Suite },
    Mix,
    Cross { train: Suite, validate: Suite },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    #[serde(rename = "ir2vec-dt")]
    IrVecDt,
    Gnn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LabelMode {
    Binary,
    ErrorType,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioOptions {
    pub normalization: Normalization,
    /// Restricts samples to one optimization level; `None` keeps all.
    pub opt_level: Option<OptLevel>,
    pub ga: bool,
    pub ga_config: GaConfig,
    pub seed: u64,
    pub folds: usize,
    pub gnn: GnnConfig,
    pub embed: EmbedConfig,
    pub specificity: SpecificityFormula,
}

impl Default for ScenarioOptions {
    fn default() -> Self {
        Self {
            normalization: Normalization::None,
            opt_level: None,
            ga: false,
            ga_config: GaConfig::default(),
            seed: 0,
            folds: 10,
            gnn: GnnConfig::default(),
            embed: EmbedConfig::default(),
            specificity: SpecificityFormula::Standard,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub backend: Backend,
    pub label_mode: LabelMode,
    pub options: ScenarioOptions,
}

impl Scenario {
    pub fn new(kind: ScenarioKind, backend: Backend, label_mode: LabelMode) -> Self {
        Self { kind, backend, label_mode, options: ScenarioOptions::default() }
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        if matches!(self.kind, ScenarioKind::Cross { .. }) && self.label_mode != LabelMode::Binary {
            return Err(EvalError::InvalidConfig("cross-suite scenarios only support binary labels".into()));
        }
        if !matches!(self.kind, ScenarioKind::Cross { .. }) {
            check_k(usize::MAX, self.options.folds)?;
        }
        Ok(())
    }

    fn class_of(&self, label: ErrorLabel) -> ClassLabel {
        match self.label_mode {
            LabelMode::Binary => to_binary(label).into(),
            LabelMode::ErrorType => label.into(),
        }
    }

    fn suites(&self, manifest: &Manifest) -> Vec<Suite> {
        match self.kind {
            ScenarioKind::Intra { suite } => vec![suite],
            ScenarioKind::Cross { train, validate } => {
                let mut v = vec![train, validate];
                v.dedup();
                v
            }
            ScenarioKind::Mix => manifest.samples.iter().map(|s| s.suite).collect::<BTreeSet<_>>().into_iter().collect(),
        }
    }
}

/// Maps a predicted class back to the binary decision.
pub fn class_to_binary(c: &ClassLabel) -> BinaryLabel {
    if c.as_str() == BinaryLabel::Correct.name() {
        BinaryLabel::Correct
    } else {
        BinaryLabel::Incorrect
    }
}

// ---------- dataset ----------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleFailure {
    pub id: String,
    pub stage: String,
    pub message: String,
}

#[derive(Debug, Clone)]
pub enum Features {
    Vectors(Vec<Vec<f64>>),
    Graphs(Vec<ProgramGraph>),
}

/// Evaluable samples of the scenario's suites with precomputed features.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub ids: Vec<String>,
    pub labels: Vec<ErrorLabel>,
    pub suites: Vec<Suite>,
    pub features: Features,
    /// Per suite: labelled samples without IR.
    pub compile_errors: BTreeMap<Suite, u64>,
    /// Per suite: samples whose IR could not be read, parsed or encoded.
    pub feature_failures: BTreeMap<Suite, Vec<SampleFailure>>,
    pub quarantined: u64,
}

fn resolve(base: Option<&Path>, p: &Path) -> PathBuf {
    match base {
        Some(b) if p.is_relative() => b.join(p),
        _ => p.to_path_buf(),
    }
}

enum Feature {
    Vector(Vec<f64>),
    Graph(ProgramGraph),
}

fn sample_feature(ir: &Path, backend: Backend, vocab: &SeedVocab, embed: &EmbedConfig, id: &str) -> Result<Feature, String> {
    let text = std::fs::read_to_string(ir).map_err(|e| format!("{}: {e}", ir.display()))?;
    let module = crate::ir::parse_ir(&text).map_err(|e| e.to_string())?;
    match backend {
        Backend::IrVecDt => Ok(Feature::Vector(embed_with(&module, vocab, &embed.weights, &embed.flow, id).values)),
        Backend::Gnn => {
            let g = build_graph(&module).map_err(|e| e.to_string())?;
            if g.nodes.is_empty() {
                return Err(GnnError::EmptyGraph.to_string());
            }
            Ok(Feature::Graph(g))
        }
    }
}

/// Loads and encodes the scenario's samples; relative IR paths resolve
/// against `base`.
pub fn prepare_dataset(manifest: &Manifest, base: Option<&Path>, scenario: &Scenario) -> Result<Dataset, EvalError> {
    let suites = scenario.suites(manifest);
    for s in &suites {
        if !manifest.samples.iter().any(|x| x.suite == *s) {
            return Err(EvalError::SuiteMissing(*s));
        }
    }
    let opt = scenario.options.opt_level;
    let chosen: Vec<_> = manifest.samples.iter().filter(|s| suites.contains(&s.suite) && opt.is_none_or(|o| o == s.opt)).collect();
    let vocab = seed_vocabulary(scenario.options.embed.seed, HALF_DIM);
    let mut ds = Dataset {
        ids: Vec::new(),
        labels: Vec::new(),
        suites: Vec::new(),
        features: match scenario.backend {
            Backend::IrVecDt => Features::Vectors(Vec::new()),
            Backend::Gnn => Features::Graphs(Vec::new()),
        },
        compile_errors: BTreeMap::new(),
        feature_failures: BTreeMap::new(),
        quarantined: 0,
    };
    let evaluable: Vec<_> = chosen
        .iter()
        .filter(|s| {
            if s.quarantined.is_some() || s.label.is_none() {
                ds.quarantined += 1;
                false
            } else if s.is_compile_failure() {
                *ds.compile_errors.entry(s.suite).or_default() += 1;
                false
            } else {
                s.is_evaluable()
            }
        })
        .collect();
    let computed: Vec<Result<Feature, String>> = evaluable
        .par_iter()
        .map(|s| {
            let ir = s.ir.as_ref().ok_or_else(|| "sample has no IR path".to_string())?;
            sample_feature(&resolve(base, ir), scenario.backend, &vocab, &scenario.options.embed, &s.id)
        })
        .collect();
    for (s, f) in evaluable.iter().zip(computed) {
        match f {
            Ok(f) => {
                ds.ids.push(s.id.clone());
                ds.labels.push(s.label.expect("evaluable samples are labelled"));
                ds.suites.push(s.suite);
                match (&mut ds.features, f) {
                    (Features::Vectors(v), Feature::Vector(x)) => v.push(x),
                    (Features::Graphs(v), Feature::Graph(g)) => v.push(g),
                    _ => unreachable!("feature kind follows the backend"),
                }
            }
            Err(message) => ds.feature_failures.entry(s.suite).or_default().push(SampleFailure { id: s.id.clone(), stage: "features".into(), message }),
        }
    }
    Ok(ds)
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    fn errors_for(&self, suites: &[Suite]) -> (u64, u64) {
        let ce = suites.iter().map(|s| self.compile_errors.get(s).copied().unwrap_or(0)).sum();
        let re = suites.iter().map(|s| self.feature_failures.get(s).map_or(0, |v| v.len() as u64)).sum();
        (ce, re)
    }

    fn failures_for(&self, suites: &[Suite]) -> Vec<SampleFailure> {
        suites.iter().flat_map(|s| self.feature_failures.get(s).cloned().unwrap_or_default()).collect()
    }
}

// ---------- training ----------

#[derive(Debug, Clone)]
pub enum FoldModel {
    Tabular(TabularModel),
    Gnn(GnnModel),
}

impl FoldModel {
    pub fn predict(&self, ds: &Dataset, i: usize) -> Result<ClassLabel, String> {
        match (self, &ds.features) {
            (FoldModel::Tabular(m), Features::Vectors(v)) => m.predict(&v[i]).map_err(|e| e.to_string()),
            (FoldModel::Gnn(m), Features::Graphs(g)) => gnn::predict_gnn(m, &g[i]).map_err(|e| e.to_string()),
            _ => Err("model and features belong to different backends".into()),
        }
    }

    pub fn feature_subset(&self) -> Option<Vec<usize>> {
        match self {
            FoldModel::Tabular(m) => m.feature_subset.as_ref().map(|s| s.indices.clone()),
            FoldModel::Gnn(_) => None,
        }
    }
}

/// Sorted classes of the whole dataset, shared by every fold's model.
pub fn label_space(ds: &Dataset, scenario: &Scenario) -> Vec<ClassLabel> {
    ds.labels.iter().map(|&l| scenario.class_of(l)).collect::<BTreeSet<_>>().into_iter().collect()
}

/// Fits one model on the rows `train` only.
pub fn train_fold(ds: &Dataset, train: &[usize], scenario: &Scenario, space: &[ClassLabel], seed: u64) -> Result<FoldModel, EvalError> {
    let classes: Vec<ClassLabel> = train.iter().map(|&i| scenario.class_of(ds.labels[i])).collect();
    match &ds.features {
        Features::Vectors(v) => {
            let rows = train.iter().map(|&i| v[i].clone()).collect();
            let ids = train.iter().map(|&i| ds.ids[i].clone()).collect();
            let data = LabeledVectors::with_label_space(rows, classes, ids, space.to_vec())?;
            let opts = TabularOptions {
                normalization: scenario.options.normalization,
                ga: scenario.options.ga.then(|| GaConfig { rng_seed: seed, ..scenario.options.ga_config.clone() }),
            };
            Ok(FoldModel::Tabular(fit_model(&data, &opts, seed)?.0))
        }
        Features::Graphs(g) => {
            let cfg = GnnConfig { rng_seed: seed, ..scenario.options.gnn.clone() };
            let data: Vec<(&ProgramGraph, ClassLabel)> = train.iter().zip(classes).map(|(&i, c)| (&g[i], c)).collect();
            let model = GnnModel::for_graphs(cfg.clone(), data.iter().map(|d| d.0), space.to_vec())?;
            Ok(FoldModel::Gnn(gnn::train(model, &data, &cfg)?.0))
        }
    }
}

// ---------- reports ----------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub truth: ErrorLabel,
    /// `None` when prediction failed (counted as a runtime error).
    pub predicted: Option<ClassLabel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub seed: u64,
    pub train_size: usize,
    pub validation_ids: Vec<String>,
    pub feature_subset: Option<Vec<usize>>,
    pub metrics: MetricsReport,
    pub predictions: Vec<Prediction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRow {
    pub label: ErrorLabel,
    pub total: u64,
    pub correct: u64,
    /// `None` when the label never appears in validation.
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub evaluable: usize,
    pub compile_errors: u64,
    pub runtime_errors: u64,
    pub quarantined: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportProvenance {
    pub manifest: Provenance,
    pub stratified_folds: bool,
    pub aggregation: String,
    /// Effective front-end configuration, set by callers such as the CLI.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub invocation: Option<serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub report_version: u32,
    pub scenario: Scenario,
    pub provenance: ReportProvenance,
    pub dataset: DatasetSummary,
    pub folds: Vec<FoldReport>,
    pub aggregate: MetricsReport,
    pub per_label: Vec<LabelRow>,
    pub failures: Vec<SampleFailure>,
}

impl ScenarioReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Runtime errors, including samples whose features could not be built.
    pub fn runtime_errors(&self) -> u64 {
        self.aggregate.counts.re
    }

    /// One line per fold plus a final `aggregate` line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("fold,tp,tn,fp,fn,ce,to,re,accuracy\n");
        let rows = self.folds.iter().map(|f| (f.fold.to_string(), &f.metrics)).chain([("aggregate".to_string(), &self.aggregate)]);
        for (name, m) in rows {
            let c = m.counts;
            let acc = m.accuracy.map_or(String::new(), |a| format!("{a}"));
            out.push_str(&format!("{name},{},{},{},{},{},{},{},{acc}\n", c.tp, c.tn, c.fp, c.fn_, c.ce, c.to, c.re));
        }
        out
    }
}

fn provenance(manifest: &Manifest) -> ReportProvenance {
    ReportProvenance { manifest: manifest.provenance.clone(), stratified_folds: true, aggregation: "micro (counts summed over folds)".into(), invocation: None }
}

struct Split {
    train: Vec<usize>,
    validate: Vec<usize>,
    seed: u64,
}

fn kfold_splits(ds: &Dataset, k: usize, seed: u64) -> Result<Vec<Split>, EvalError> {
    check_k(ds.len(), k)?;
    let keys: Vec<(ErrorLabel, &str)> = ds.labels.iter().copied().zip(ds.ids.iter().map(String::as_str)).collect();
    let folds = stratified_folds(&keys, k, seed);
    Ok(folds
        .into_iter()
        .enumerate()
        .map(|(f, validate)| {
            let mut is_val = vec![false; ds.len()];
            validate.iter().for_each(|&i| is_val[i] = true);
            let train = (0..ds.len()).filter(|&i| !is_val[i]).collect();
            Split { train, validate, seed: seed.wrapping_add(f as u64) }
        })
        .collect())
}

fn run_split(ds: &Dataset, split: &Split, fold: usize, scenario: &Scenario, space: &[ClassLabel]) -> Result<FoldReport, EvalError> {
    let model = train_fold(ds, &split.train, scenario, space, split.seed)?;
    let mut counts = ConfusionCounts::default();
    let mut predictions = Vec::with_capacity(split.validate.len());
    for &i in &split.validate {
        let truth = ds.labels[i];
        let predicted = model.predict(ds, i).ok();
        match &predicted {
            Some(p) => counts.record(class_to_binary(p), to_binary(truth)),
            None => counts.re += 1,
        }
        predictions.push(Prediction { id: ds.ids[i].clone(), truth, predicted });
    }
    let mut validation_ids: Vec<String> = split.validate.iter().map(|&i| ds.ids[i].clone()).collect();
    validation_ids.sort();
    Ok(FoldReport {
        fold,
        seed: split.seed,
        train_size: split.train.len(),
        validation_ids,
        feature_subset: model.feature_subset(),
        metrics: metrics_with(&counts, scenario.options.specificity),
        predictions,
    })
}

fn per_label_table(scenario: &Scenario, present: &BTreeSet<ErrorLabel>, folds: &[FoldReport]) -> Vec<LabelRow> {
    let mut rows: BTreeMap<ErrorLabel, (u64, u64)> = present.iter().map(|&l| (l, (0, 0))).collect();
    for p in folds.iter().flat_map(|f| &f.predictions) {
        let e = rows.entry(p.truth).or_default();
        e.0 += 1;
        if p.predicted.as_ref() == Some(&scenario.class_of(p.truth)) {
            e.1 += 1;
        }
    }
    rows.into_iter()
        .map(|(label, (total, correct))| LabelRow { label, total, correct, accuracy: (total > 0).then(|| correct as f64 / total as f64) })
        .collect()
}

/// Runs one scenario end to end. Per-sample failures are recorded as
/// runtime errors instead of aborting.
pub fn run_scenario(manifest: &Manifest, base: Option<&Path>, scenario: &Scenario) -> Result<ScenarioReport, EvalError> {
    scenario.validate()?;
    let ds = prepare_dataset(manifest, base, scenario)?;
    let space = label_space(&ds, scenario);
    let (splits, validate_suites) = match scenario.kind {
        ScenarioKind::Cross { train, validate } => {
            let pick = |s: Suite| (0..ds.len()).filter(|&i| ds.suites[i] == s).collect::<Vec<_>>();
            let split = Split { train: pick(train), validate: pick(validate), seed: scenario.options.seed };
            (vec![split], vec![validate])
        }
        _ => (kfold_splits(&ds, scenario.options.folds, scenario.options.seed)?, scenario.suites(manifest)),
    };
    let folds: Vec<FoldReport> = splits
        .par_iter()
        .enumerate()
        .map(|(f, s)| run_split(&ds, s, f, scenario, &space))
        .collect::<Result<_, _>>()?;

    let (ce, feature_re) = ds.errors_for(&validate_suites);
    let mut total = ConfusionCounts { ce, re: feature_re, ..Default::default() };
    for f in &folds {
        total += f.metrics.counts;
    }
    let present: BTreeSet<ErrorLabel> = ds.labels.iter().copied().collect();
    let mut failures = ds.failures_for(&validate_suites);
    for p in folds.iter().flat_map(|f| &f.predictions).filter(|p| p.predicted.is_none()) {
        failures.push(SampleFailure { id: p.id.clone(), stage: "predict".into(), message: "prediction failed".into() });
    }
    Ok(ScenarioReport {
        report_version: REPORT_VERSION,
        scenario: scenario.clone(),
        provenance: provenance(manifest),
        dataset: DatasetSummary { evaluable: ds.len(), compile_errors: ce, runtime_errors: total.re, quarantined: ds.quarantined },
        per_label: per_label_table(scenario, &present, &folds),
        aggregate: metrics_with(&total, scenario.options.specificity),
        folds,
        failures,
    })
}

// ---------- ablation ----------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub label: ErrorLabel,
    pub total: u64,
    pub predicted_incorrect: u64,
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationFold {
    pub fold: usize,
    pub train_size: usize,
    /// Always zero; recorded so the exclusion can be audited.
    pub excluded_in_training: usize,
    pub validation_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub report_version: u32,
    pub scenario: Scenario,
    pub provenance: ReportProvenance,
    pub excluded: Vec<ErrorLabel>,
    pub rows: Vec<AblationRow>,
    pub folds: Vec<AblationFold>,
    pub aggregate: MetricsReport,
}

impl AblationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// k-fold protocol in binary mode with every `excluded` sample removed from
/// each training fold but kept for validation.
pub fn ablation(manifest: &Manifest, base: Option<&Path>, excluded: &[ErrorLabel], scenario: &Scenario) -> Result<AblationReport, EvalError> {
    let excluded: Vec<ErrorLabel> = excluded.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    if excluded.is_empty() || excluded.len() > 2 {
        return Err(EvalError::InvalidConfig("exclude one or two labels".into()));
    }
    if excluded.contains(&ErrorLabel::Correct) {
        return Err(EvalError::InvalidConfig("the Correct label cannot be excluded".into()));
    }
    if matches!(scenario.kind, ScenarioKind::Cross { .. }) {
        return Err(EvalError::InvalidConfig("ablation runs the k-fold protocol; use intra or mix".into()));
    }
    let scenario = Scenario { label_mode: LabelMode::Binary, ..scenario.clone() };
    scenario.validate()?;
    let ds = prepare_dataset(manifest, base, &scenario)?;
    if let Some(&l) = excluded.iter().find(|l| !ds.labels.contains(l)) {
        return Err(EvalError::LabelAbsent(l));
    }
    let space = label_space(&ds, &scenario);
    let mut splits = kfold_splits(&ds, scenario.options.folds, scenario.options.seed)?;
    for s in &mut splits {
        s.train.retain(|&i| !excluded.contains(&ds.labels[i]));
    }
    for (f, s) in splits.iter().enumerate() {
        if let Some(&i) = s.train.iter().find(|&&i| excluded.contains(&ds.labels[i])) {
            return Err(EvalError::Leakage { label: ds.labels[i], fold: f });
        }
    }
    let reports: Vec<FoldReport> = splits
        .par_iter()
        .enumerate()
        .map(|(f, s)| run_split(&ds, s, f, &scenario, &space))
        .collect::<Result<_, _>>()?;
    let mut total = ConfusionCounts::default();
    let mut tally: BTreeMap<ErrorLabel, (u64, u64)> = excluded.iter().map(|&l| (l, (0, 0))).collect();
    for p in reports.iter().flat_map(|r| &r.predictions) {
        if let Some(t) = tally.get_mut(&p.truth) {
            t.0 += 1;
            if p.predicted.as_ref().map(class_to_binary) == Some(BinaryLabel::Incorrect) {
                t.1 += 1;
            }
        }
    }
    for r in &reports {
        total += r.metrics.counts;
    }
    Ok(AblationReport {
        report_version: REPORT_VERSION,
        excluded: excluded.clone(),
        rows: tally
            .into_iter()
            .map(|(label, (n, hit))| AblationRow { label, total: n, predicted_incorrect: hit, accuracy: (n > 0).then(|| hit as f64 / n as f64) })
            .collect(),
        folds: reports
            .iter()
            .zip(&splits)
            .map(|(r, s)| AblationFold {
                fold: r.fold,
                train_size: s.train.len(),
                excluded_in_training: s.train.iter().filter(|&&i| excluded.contains(&ds.labels[i])).count(),
                validation_ids: r.validation_ids.clone(),
            })
            .collect(),
        aggregate: metrics_with(&total, scenario.options.specificity),
        provenance: provenance(manifest),
        scenario,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ten_samples_ten_singletons() {
        let s: Vec<(u8, String)> = (0..10).map(|i| (0, format!("s{i}"))).collect();
        let plan = make_folds(&s, 10, 1).unwrap();
        assert!(plan.folds.iter().all(|f| f.len() == 1));
    }

    #[test]
    fn balanced_labels_split_five_five() {
        let s: Vec<(u8, String)> = (0..100).map(|i| ((i % 2) as u8, format!("s{i:03}"))).collect();
        let plan = make_folds(&s, 10, 4).unwrap();
        for f in &plan.folds {
            let odd = f.iter().filter(|id| id[1..].parse::<u32>().unwrap() % 2 == 1).count();
            assert_eq!((f.len(), odd), (10, 5));
        }
    }

    #[test]
    fn mbi_sized_folds() {
        let s: Vec<(u8, String)> = (0..1861).map(|i| ((i % 9) as u8, format!("s{i:04}"))).collect();
        let plan = make_folds(&s, 10, 0).unwrap();
        assert!(plan.folds.iter().all(|f| f.len() == 186 || f.len() == 187));
    }

    #[test]
    fn too_few_and_bad_k() {
        let s: Vec<(u8, String)> = (0..3).map(|i| (0, format!("s{i}"))).collect();
        assert!(matches!(make_folds(&s, 4, 0), Err(EvalError::TooFewSamples { samples: 3, k: 4 })));
        assert!(matches!(make_folds(&s, 1, 0), Err(EvalError::InvalidConfig(_))));
    }

    #[test]
    fn cross_requires_binary() {
        let s = Scenario::new(ScenarioKind::Cross { train: Suite::Mbi, validate: Suite::CorrBench }, Backend::IrVecDt, LabelMode::ErrorType);
        assert!(matches!(s.validate(), Err(EvalError::InvalidConfig(_))));
    }

    #[test]
    fn scenario_json_round_trip() {
        let s = Scenario::new(ScenarioKind::Intra { suite: Suite::Mbi }, Backend::Gnn, LabelMode::ErrorType);
        let back: Scenario = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(back, s);
    }
}
