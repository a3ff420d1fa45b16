mod common;

use std::collections::BTreeSet;

use mpisentinel_core::corpus::{CompileStatus, Manifest, Suite};
use mpisentinel_core::embed::{Normalization, NormalizationStrategy};
use mpisentinel_core::eval::*;
use mpisentinel_core::tabular::GaConfig;
use mpisentinel_core::{BinaryLabel, ErrorLabel};
use proptest::prelude::*;

fn close(a: Option<f64>, b: f64) -> bool {
    a.is_some_and(|a| (a - b).abs() <= 0.0005)
}

#[test]
fn table_two_counts_give_published_metrics() {
    use BinaryLabel::*;
    let mut preds = Vec::new();
    let mut truth = Vec::new();
    for (n, p, t) in [(1043, Incorrect, Incorrect), (664, Correct, Correct), (81, Incorrect, Correct), (73, Correct, Incorrect)] {
        preds.extend(std::iter::repeat(p).take(n));
        truth.extend(std::iter::repeat(t).take(n));
    }
    let c = confusion(&preds, &truth, (0, 0, 0)).unwrap();
    assert_eq!(c, ConfusionCounts::new(1043, 664, 81, 73, 0, 0, 0));
    let m = metrics(&c);
    assert!(close(m.recall, 0.935) && close(m.precision, 0.928) && close(m.f1, 0.931) && close(m.accuracy, 0.917), "{m:?}");
}

#[test]
fn table_three_counts_give_published_metrics() {
    let m = metrics(&ConfusionCounts::new(859, 738, 4, 102, 0, 157, 1));
    assert!(close(m.conclusiveness, 0.915) && close(m.specificity, 0.995) && close(m.overall_accuracy, 0.858), "{m:?}");
    let lit = metrics_with(&m.counts, SpecificityFormula::PaperLiteral);
    assert!(close(lit.specificity, 0.005));
}

fn recompute_ok(m: &MetricsReport) {
    let c = m.counts;
    let all = (c.total() + c.errors()) as f64;
    let check = |got: Option<f64>, num: f64, den: f64| match got {
        Some(v) => assert!((v - num / den).abs() < 1e-9),
        None => assert_eq!(den, 0.0),
    };
    check(m.recall, c.tp as f64, (c.tp + c.fn_) as f64);
    check(m.precision, c.tp as f64, (c.tp + c.fp) as f64);
    check(m.accuracy, (c.tp + c.tn) as f64, c.total() as f64);
    check(m.overall_accuracy, (c.tp + c.tn) as f64, all);
    check(m.coverage.map(|x| 1.0 - x), c.ce as f64, all);
    check(m.conclusiveness.map(|x| 1.0 - x), c.errors() as f64, all);
    if let (Some(p), Some(r), Some(f)) = (m.precision, m.recall, m.f1) {
        assert!((f - 2.0 * p * r / (p + r)).abs() < 1e-9);
    }
}

fn intra(backend: Backend, mode: LabelMode) -> Scenario {
    Scenario::new(ScenarioKind::Intra { suite: Suite::Mbi }, backend, mode)
}

#[test]
fn single_coordinate_separates_synthetic_binary_labels() {
    let m = common::synthetic_manifest();
    let ds = prepare_dataset(&m, None, &intra(Backend::IrVecDt, LabelMode::Binary)).unwrap();
    let Features::Vectors(rows) = &ds.features else { panic!() };
    let separating = (0..rows[0].len()).find(|&j| {
        let (mut c, mut i): (Vec<f64>, Vec<f64>) = (vec![], vec![]);
        for (r, l) in rows.iter().zip(&ds.labels) {
            if l.is_correct() { c.push(r[j]) } else { i.push(r[j]) }
        }
        let max = |v: &[f64]| v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = |v: &[f64]| v.iter().cloned().fold(f64::INFINITY, f64::min);
        max(&c) < min(&i) || max(&i) < min(&c)
    });
    assert!(separating.is_some());
}

#[test]
fn intra_dt_is_perfect_on_separable_corpus() {
    let m = common::synthetic_manifest();
    for mode in [LabelMode::Binary, LabelMode::ErrorType] {
        let r = run_scenario(&m, None, &intra(Backend::IrVecDt, mode)).unwrap();
        assert_eq!(r.aggregate.accuracy, Some(1.0), "{mode:?}");
        assert_eq!(r.dataset.evaluable, 60);
        assert!(r.per_label.iter().all(|row| row.accuracy == Some(1.0)));
        recompute_ok(&r.aggregate);
        r.folds.iter().for_each(|f| recompute_ok(&f.metrics));
    }
}

#[test]
fn intra_dt_with_ga_and_index_scaling() {
    let m = common::synthetic_manifest();
    let mut s = intra(Backend::IrVecDt, LabelMode::ErrorType);
    s.options.ga = true;
    s.options.ga_config = GaConfig::small(0);
    s.options.normalization = Normalization::Index;
    let r = run_scenario(&m, None, &s).unwrap();
    assert_eq!(r.aggregate.accuracy, Some(1.0));
    assert!(r.folds.iter().all(|f| f.feature_subset.as_ref().is_some_and(|v| v.len() == 5)));
}

#[test]
fn no_leakage_by_recomputation() {
    let m = common::synthetic_manifest();
    let mut s = intra(Backend::IrVecDt, LabelMode::Binary);
    s.options.ga = true;
    s.options.ga_config = GaConfig::small(0);
    s.options.normalization = Normalization::Index;
    let r = run_scenario(&m, None, &s).unwrap();
    let ds = prepare_dataset(&m, None, &s).unwrap();
    let space = label_space(&ds, &s);
    let Features::Vectors(rows) = &ds.features else { panic!() };
    for f in &r.folds {
        let val: BTreeSet<&str> = f.validation_ids.iter().map(String::as_str).collect();
        let train: Vec<usize> = (0..ds.len()).filter(|&i| !val.contains(ds.ids[i].as_str())).collect();
        assert_eq!(train.len(), f.train_size);
        assert!(train.iter().all(|&i| !val.contains(ds.ids[i].as_str())));
        let FoldModel::Tabular(model) = train_fold(&ds, &train, &s, &space, f.seed).unwrap() else { panic!() };
        assert_eq!(model.feature_subset.map(|x| x.indices), f.feature_subset);
        let train_rows: Vec<Vec<f64>> = train.iter().map(|&i| rows[i].clone()).collect();
        assert_eq!(model.normalization, Normalization::Index.fit(&train_rows));
        assert!(matches!(model.normalization, NormalizationStrategy::Index(_)));
    }
}

#[test]
fn reports_are_byte_identical() {
    let m = common::synthetic_manifest();
    let mut s = Scenario::new(ScenarioKind::Mix, Backend::IrVecDt, LabelMode::ErrorType);
    s.options.ga = true;
    s.options.ga_config = GaConfig::small(3);
    let a = run_scenario(&m, None, &s).unwrap().to_json();
    let b = run_scenario(&m, None, &s).unwrap().to_json();
    assert_eq!(a, b);
}

#[test]
fn cross_with_same_suite_is_resubstitution() {
    let m = common::synthetic_manifest();
    let s = Scenario::new(ScenarioKind::Cross { train: Suite::CorrBench, validate: Suite::CorrBench }, Backend::IrVecDt, LabelMode::Binary);
    let r = run_scenario(&m, None, &s).unwrap();
    assert_eq!(r.folds.len(), 1);
    let ds = prepare_dataset(&m, None, &s).unwrap();
    let all: Vec<usize> = (0..ds.len()).collect();
    let model = train_fold(&ds, &all, &s, &label_space(&ds, &s), s.options.seed).unwrap();
    let mut want = ConfusionCounts::default();
    for i in all {
        want.record(class_to_binary(&model.predict(&ds, i).unwrap()), ds.labels[i].to_binary());
    }
    assert_eq!(r.aggregate.counts, want);
    assert_eq!(r.folds[0].train_size, ds.len());
}

#[test]
fn labels_absent_from_validation_are_null() {
    let m = common::synthetic_manifest();
    let s = Scenario::new(ScenarioKind::Cross { train: Suite::Mbi, validate: Suite::CorrBench }, Backend::IrVecDt, LabelMode::Binary);
    let r = run_scenario(&m, None, &s).unwrap();
    let row = r.per_label.iter().find(|r| r.label == ErrorLabel::CallOrdering).unwrap();
    assert_eq!((row.total, row.accuracy), (0, None));
    let json: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
    let rows = json["per_label"].as_array().unwrap();
    assert!(rows.iter().any(|r| r["label"] == "CallOrdering" && r["accuracy"].is_null()));
    assert!(r.per_label.iter().filter(|r| r.total > 0).all(|r| r.accuracy.is_some()));
}

#[test]
fn missing_suite_and_bad_configs() {
    let mut m = common::synthetic_manifest();
    m.samples.retain(|s| s.suite == Suite::Mbi);
    let s = Scenario::new(ScenarioKind::Intra { suite: Suite::CorrBench }, Backend::IrVecDt, LabelMode::Binary);
    assert!(matches!(run_scenario(&m, None, &s), Err(EvalError::SuiteMissing(Suite::CorrBench))));
    let s = Scenario::new(ScenarioKind::Cross { train: Suite::Mbi, validate: Suite::CorrBench }, Backend::IrVecDt, LabelMode::ErrorType);
    assert!(matches!(run_scenario(&m, None, &s), Err(EvalError::InvalidConfig(_))));
}

#[test]
fn compile_and_runtime_errors_are_counted() {
    let mut m = common::synthetic_manifest();
    let dir = tempfile::tempdir().unwrap();
    let broken = dir.path().join("broken.ll");
    std::fs::write(&broken, "define i32 @f( {").unwrap();
    let mbi: Vec<usize> = m.samples.iter().enumerate().filter(|(_, s)| s.suite == Suite::Mbi).map(|(i, _)| i).collect();
    m.samples[mbi[0]].ir = None;
    m.samples[mbi[0]].status = CompileStatus::CompileError { message: "error: boom".into() };
    m.samples[mbi[1]].ir = Some(broken);
    let r = run_scenario(&m, None, &intra(Backend::IrVecDt, LabelMode::Binary)).unwrap();
    assert_eq!((r.aggregate.counts.ce, r.aggregate.counts.re), (1, 1));
    assert_eq!(r.dataset.evaluable, 58);
    assert_eq!(r.failures.len(), 1);
    assert_eq!(r.failures[0].id, m.samples[mbi[1]].id);
    recompute_ok(&r.aggregate);
}

#[test]
fn gnn_samples_with_empty_graphs_are_runtime_errors() {
    let mut m = common::synthetic_manifest();
    m.samples.retain(|s| s.suite == Suite::CorrBench);
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.ll");
    std::fs::write(&empty, "").unwrap();
    m.samples[0].ir = Some(empty);
    let mut s = Scenario::new(ScenarioKind::Cross { train: Suite::CorrBench, validate: Suite::CorrBench }, Backend::Gnn, LabelMode::Binary);
    s.options.gnn.epochs = 1;
    let r = run_scenario(&m, None, &s).unwrap();
    assert_eq!(r.aggregate.counts.re, 1);
    assert!(r.failures[0].message.contains("no nodes"));
}

// ---------- ablation ----------

/// Points every sample of `from` at the IR of samples labelled `like`, so
/// their embeddings coincide.
fn alias_ir(m: &mut Manifest, from: ErrorLabel, like: ErrorLabel) {
    let donors: Vec<_> = m.samples.iter().filter(|s| s.label == Some(like)).map(|s| s.ir.clone()).collect();
    for (s, ir) in m.samples.iter_mut().filter(|s| s.label == Some(from)).zip(donors.into_iter().cycle()) {
        s.ir = ir;
    }
}

fn nearest_training_label(ds: &Dataset, i: usize, exclude: ErrorLabel) -> ErrorLabel {
    let Features::Vectors(rows) = &ds.features else { panic!() };
    let d = |j: usize| rows[i].iter().zip(&rows[j]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    let j = (0..ds.len()).filter(|&j| ds.labels[j] != exclude).min_by(|&a, &b| d(a).total_cmp(&d(b))).unwrap();
    assert_eq!(d(j), 0.0);
    ds.labels[j]
}

#[test]
fn ablation_detects_label_sharing_an_incorrect_pattern() {
    let mut m = common::synthetic_manifest();
    alias_ir(&mut m, ErrorLabel::LocalConcurrency, ErrorLabel::CallOrdering);
    let s = intra(Backend::IrVecDt, LabelMode::ErrorType);
    let ds = prepare_dataset(&m, None, &s).unwrap();
    for i in (0..ds.len()).filter(|&i| ds.labels[i] == ErrorLabel::LocalConcurrency) {
        assert_eq!(nearest_training_label(&ds, i, ErrorLabel::LocalConcurrency), ErrorLabel::CallOrdering);
    }
    let r = ablation(&m, None, &[ErrorLabel::LocalConcurrency], &s).unwrap();
    assert_eq!(r.scenario.label_mode, LabelMode::Binary);
    assert_eq!(r.rows.len(), 1);
    assert_eq!(r.rows[0].accuracy, Some(1.0));
    assert!(r.folds.iter().all(|f| f.excluded_in_training == 0));
}

#[test]
fn ablation_misses_label_mirroring_correct_code() {
    let mut m = common::synthetic_manifest();
    alias_ir(&mut m, ErrorLabel::GlobalConcurrency, ErrorLabel::Correct);
    let s = intra(Backend::IrVecDt, LabelMode::Binary);
    let ds = prepare_dataset(&m, None, &s).unwrap();
    for i in (0..ds.len()).filter(|&i| ds.labels[i] == ErrorLabel::GlobalConcurrency) {
        assert_eq!(nearest_training_label(&ds, i, ErrorLabel::GlobalConcurrency), ErrorLabel::Correct);
    }
    let r = ablation(&m, None, &[ErrorLabel::GlobalConcurrency], &s).unwrap();
    assert_eq!(r.rows[0].accuracy, Some(0.0));
}

#[test]
fn ablation_with_two_labels_and_errors() {
    let m = common::synthetic_manifest();
    let s = intra(Backend::IrVecDt, LabelMode::Binary);
    let r = ablation(&m, None, &[ErrorLabel::GlobalConcurrency, ErrorLabel::CallOrdering], &s).unwrap();
    assert_eq!(r.rows.iter().map(|r| r.label).collect::<Vec<_>>(), [ErrorLabel::CallOrdering, ErrorLabel::GlobalConcurrency]);
    assert!(r.rows.iter().all(|r| r.total == 12));
    let validated: usize = r.folds.iter().map(|f| f.validation_ids.len()).sum();
    assert_eq!(validated, 60);
    for f in &r.folds {
        let excluded_val = f.validation_ids.iter().filter(|id| id.contains("CallOrdering") || id.contains("GlobalConcurrency")).count();
        assert_eq!(f.excluded_in_training, 0);
        assert_eq!(f.train_size, 60 - f.validation_ids.len() - (24 - excluded_val));
    }
    assert!(matches!(ablation(&m, None, &[ErrorLabel::Correct], &s), Err(EvalError::InvalidConfig(_))));
    assert!(matches!(ablation(&m, None, &[ErrorLabel::ArgError], &s), Err(EvalError::LabelAbsent(ErrorLabel::ArgError))));
}

// ---------- fold properties ----------

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn folds_are_disjoint_covering_and_stratified(
        counts in prop::collection::vec(1usize..40, 1..6),
        k in 2usize..12,
        seed in any::<u64>(),
    ) {
        let samples: Vec<(usize, String)> = counts
            .iter()
            .enumerate()
            .flat_map(|(l, &n)| (0..n).map(move |i| (l, format!("L{l}-{i}"))))
            .collect();
        prop_assume!(samples.len() >= k);
        let plan = make_folds(&samples, k, seed).unwrap();
        prop_assert_eq!(plan.folds.len(), k);
        let mut seen = BTreeSet::new();
        for f in &plan.folds {
            for id in f {
                prop_assert!(seen.insert(id.clone()), "duplicate {}", id);
            }
        }
        prop_assert_eq!(seen.len(), samples.len());
        for l in 0..counts.len() {
            let per: Vec<usize> = plan.folds.iter().map(|f| f.iter().filter(|id| id.starts_with(&format!("L{l}-"))).count()).collect();
            prop_assert!(per.iter().max().unwrap() - per.iter().min().unwrap() <= 1);
        }
        let sizes: Vec<usize> = plan.folds.iter().map(Vec::len).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        prop_assert_eq!(make_folds(&samples, k, seed).unwrap(), plan);
    }
}
