//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and fails if any criterion fails.

use std::io::Write as _;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::Rng as _;
use seqmia::config::RunConfig;
use seqmia::data::{generate_synthetic, split, SplitSpec};
use seqmia::eval::ablation::run_ablation;
use seqmia::eval::{auc_oracle, roc, AblationAxis, AblationGrid, AblationRow};
use seqmia::nn::{
    encode_mlp, gradient_check, Activation, Architecture, ClassificationObjective, Matrix, MlpModel,
    RnnAttentionModel, SequenceObjective, SgdConfig,
};
use seqmia::pipeline::{run_pipeline, DistillConfig};
use seqmia::rng::rng_from_seed;
use seqmia::run::{list_files, verify_run, Run, RunStore, RunSummary};
use seqmia::signals::{abs_corr_matrix, clfa, decline_rate, metric_entropy, metric_loss, metric_max, metric_mentropy,
    metric_sd, Metric, MetricSequenceMatrix, MetricSet, PosteriorVector};

const SEEDS: [u64; 3] = [1, 2, 3];

struct Outcome {
    id: u32,
    title: &'static str,
    pass: bool,
    detail: String,
}

fn line(o: &Outcome) -> String {
    format!(
        "criterion {} {:<28} {}  {}",
        o.id,
        o.title,
        if o.pass { "PASS" } else { "FAIL" },
        o.detail
    )
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = rng_from_seed(seed);
    let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
    Matrix::new(rows, cols, data).unwrap()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn numerical_core() -> Outcome {
    let start = Instant::now();
    let mut failures = Vec::new();

    let x = random_matrix(8, 12, 1);
    let labels: Vec<usize> = (0..8).map(|i| i % 4).collect();
    let mut mlp_worst = 0.0f64;
    for act in [Activation::Relu, Activation::Tanh] {
        let model = MlpModel::new(Architecture::new(vec![12, 10, 7, 4], act), 2).unwrap();
        let obj = ClassificationObjective::new(&x, &labels).unwrap();
        for i in 0..labels.len() {
            mlp_worst = mlp_worst.max(gradient_check(&model, &obj, i));
        }
    }
    if mlp_worst >= 1e-4 {
        failures.push(format!("mlp gradient {mlp_worst:.2e}"));
    }

    let rnn = RnnAttentionModel::new(5, 8, 6, 3).unwrap();
    let seqs: Vec<Matrix> = (0..4).map(|i| random_matrix(7, 5, 10 + i)).collect();
    let seq_labels = vec![0, 1, 1, 0];
    let obj = SequenceObjective {
        sequences: &seqs,
        labels: &seq_labels,
    };
    let rnn_worst = (0..4).map(|i| gradient_check(&rnn, &obj, i)).fold(0.0, f64::max);
    if rnn_worst >= 1e-4 {
        failures.push(format!("rnn gradient {rnn_worst:.2e}"));
    }

    let mut rng = rng_from_seed(4);
    let mut auc_worst = 0.0f64;
    for trial in 0..250 {
        let n = rng.random_range(2..120);
        let levels = rng.random_range(2..(n + 2));
        let mut truth: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
        truth[0] = true;
        truth[1] = false;
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..levels) as f64 / levels as f64).collect();
        let r = roc(&scores, &truth, &[0.01]).unwrap();
        let o = auc_oracle(&scores, &truth).unwrap();
        auc_worst = auc_worst.max((r.auc - o).abs());
        if trial == 0 && !r.auc.is_finite() {
            failures.push("non-finite auc".into());
        }
    }
    if auc_worst > 1e-9 {
        failures.push(format!("auc vs oracle {auc_worst:.2e}"));
    }

    let p = |v: Vec<f64>, y| PosteriorVector::new(v, y).unwrap();
    let ref3 = p(vec![0.7, 0.2, 0.1], 0);
    let uniform = p(vec![0.25; 4], 0);
    let examples = [
        ("loss one-hot", metric_loss(&p(vec![1.0, 0.0, 0.0], 0)), 0.0, 1e-12),
        ("loss uniform", metric_loss(&uniform), 4f64.ln(), 1e-12),
        ("loss ref", metric_loss(&ref3), 0.356675, 1e-5),
        ("max ref", metric_max(&p(vec![0.1, 0.7, 0.2], 0)), 0.7, 1e-12),
        ("max uniform", metric_max(&uniform), 0.25, 1e-12),
        ("max one-hot", metric_max(&p(vec![0.0, 1.0], 0)), 1.0, 1e-12),
        ("sd uniform", metric_sd(&uniform), 0.0, 1e-12),
        ("sd one-hot", metric_sd(&p(vec![1.0, 0.0], 0)), 0.5, 1e-12),
        ("sd ref", metric_sd(&ref3), 0.262467, 1e-5),
        ("entropy one-hot", metric_entropy(&p(vec![0.0, 1.0, 0.0], 1)), 0.0, 1e-9),
        ("entropy uniform2", metric_entropy(&p(vec![0.5, 0.5], 0)), std::f64::consts::LN_2, 1e-12),
        ("entropy ref", metric_entropy(&ref3), 0.801819, 1e-5),
        ("mentropy correct", metric_mentropy(&p(vec![1.0, 0.0, 0.0], 0)), 0.0, 1e-9),
        ("mentropy wrong", metric_mentropy(&p(vec![0.0, 1.0, 0.0], 0)), 27.631021, 1e-5),
        ("mentropy ref", metric_mentropy(&ref3), 0.162167, 1e-5),
        ("clfa constant", clfa(&[0.3; 5]), 0.0, 1e-12),
        ("clfa ref", clfa(&[1.0, 0.5, 0.7, 0.6]), 0.8, 1e-12),
        ("clfa monotone", clfa(&[0.1, 0.4, 0.9, 1.5]), 1.4, 1e-12),
        ("decline constant", decline_rate(&[0.5; 4], 3).unwrap(), 0.0, 1e-12),
        ("decline ref", decline_rate(&[2.0, 1.0, 0.0], 2).unwrap(), 1.0, 1e-12),
    ];
    for (name, got, want, tol) in examples {
        if !close(got, want, tol) {
            failures.push(format!("{name}: {got} vs {want}"));
        }
    }
    if decline_rate(&[1.0, 2.0, 3.0], 2).unwrap() >= 0.0 {
        failures.push("decline of an increasing sequence is not negative".into());
    }
    let rows = Matrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 4.0], vec![-1.0, -2.0, -3.0]]).unwrap();
    let set = MetricSet::new([Metric::Loss, Metric::Max, Metric::Sd]).unwrap();
    let corr = abs_corr_matrix(&MetricSequenceMatrix::new(rows, set, 0).unwrap());
    for (name, got, want, tol) in [
        ("corr self", corr.get(0, 0), 1.0, 1e-12),
        ("corr negation", corr.get(0, 2), 1.0, 1e-12),
        ("corr ref", corr.get(0, 1), 0.98198, 1e-4),
    ] {
        if !close(got, want, tol) {
            failures.push(format!("{name}: {got} vs {want}"));
        }
    }

    let elapsed = start.elapsed();
    if elapsed > Duration::from_secs(60) {
        failures.push(format!("runtime {elapsed:.1?}"));
    }
    Outcome {
        id: 1,
        title: "numerical core",
        pass: failures.is_empty(),
        detail: format!(
            "mlp grad {mlp_worst:.1e}, rnn grad {rnn_worst:.1e}, auc dev {auc_worst:.1e} over 250 trials, {} examples, {elapsed:.1?}{}",
            examples.len() + 4,
            if failures.is_empty() { String::new() } else { format!("; {}", failures.join("; ")) }
        ),
    }
}

fn distillation_contract() -> Outcome {
    let start = Instant::now();
    let data = generate_synthetic(6, 40, 80, 0.3, 11).unwrap();
    let spec = SplitSpec {
        target_train: 80,
        target_test: 80,
        shadow_train: 80,
        shadow_test: 80,
        distill: 120,
        seed: 12,
    };
    let splits = split(data.len(), &spec).unwrap();
    let mut relabelled = data.clone();
    for &r in &splits.distill {
        relabelled.labels[r] = (relabelled.labels[r] + 1 + r % 5) % 6;
    }
    let arch = Architecture::new(vec![40, 24, 6], Activation::Relu);
    let sgd = SgdConfig::new(0.05, 16, 15, 13);
    let distill = DistillConfig {
        epochs: 8,
        learning_rate: 0.1,
        batch_size: 16,
        seed: 14,
        lr_decay: None,
        alpha: 1.0,
    };
    let a = run_pipeline(&data, &splits, &arch, &sgd, &sgd, &distill).unwrap();
    let b = run_pipeline(&relabelled, &splits, &arch, &sgd, &sgd, &distill).unwrap();
    let bytes = |s: &seqmia::pipeline::SnapshotSeries| s.snapshots().iter().map(encode_mlp).collect::<Vec<_>>();
    let changed = splits.distill.iter().filter(|&&r| data.labels[r] != relabelled.labels[r]).count();
    let same = bytes(&a.target_series) == bytes(&b.target_series) && bytes(&a.shadow_series) == bytes(&b.shadow_series);
    let elapsed = start.elapsed();
    Outcome {
        id: 2,
        title: "distillation contract",
        pass: same && changed == splits.distill.len() && elapsed < Duration::from_secs(120),
        detail: format!(
            "{changed} distillation labels changed, {} snapshots per series {}, {elapsed:.1?}",
            a.target_series.len(),
            if same { "bit-identical" } else { "DIFFER" }
        ),
    }
}

fn full_run(root: &Path, master: u64) -> RunSummary {
    let store = RunStore::new(root);
    let id = format!("seed{master}");
    let mut run = Run::open(&store, &id, RunConfig::canonical(master)).unwrap();
    run.run_all().unwrap();
    let report = verify_run(&run);
    assert!(report.passed(), "verify failed for {id}:\n{report}");
    serde_json::from_slice(&std::fs::read(run.dir().join("reports/summary.json")).unwrap()).unwrap()
}

fn attack<'a>(s: &'a RunSummary, name: &str) -> &'a seqmia::run::AttackSummary {
    s.attacks.iter().find(|a| a.name == name).unwrap_or_else(|| panic!("no attack {name}"))
}

fn tpr1(a: &seqmia::run::AttackSummary) -> f64 {
    a.tpr_at_fpr.iter().find(|(l, _)| *l == 0.01).map(|p| p.1).unwrap()
}

fn med(runs: &[RunSummary], name: &str, f: impl Fn(&seqmia::run::AttackSummary) -> f64) -> f64 {
    median(runs.iter().map(|s| f(attack(s, name))).collect())
}

fn canonical_experiment(runs: &[RunSummary], elapsed: Duration) -> Outcome {
    let mut failures = Vec::new();
    for s in runs {
        let m = &s.models;
        if m.target_train_accuracy < 0.99 || m.target_train_accuracy - m.target_test_accuracy < 0.2 {
            failures.push(format!(
                "seed {} target regime {:.3}/{:.3}",
                s.config.seeds.master, m.target_train_accuracy, m.target_test_accuracy
            ));
        }
        let expected = ["seqmia", "seqmia_loss", "loss_set", "loss_set_shuffled", "multi_metric_set", "mba_entropy",
            "mba_mentropy", "st"];
        if s.attacks.iter().map(|a| a.name.as_str()).collect::<Vec<_>>() != expected {
            failures.push("report does not list every attack".into());
        }
    }
    let auc = |n| med(runs, n, |a| a.auc);
    let (seq, seq_loss, set) = (auc("seqmia"), auc("seqmia_loss"), auc("loss_set"));
    let (t_seq, t_set) = (med(runs, "seqmia", tpr1), med(runs, "loss_set", tpr1));
    if seq < set + 0.01 {
        failures.push("seqmia AUC margin over loss set < 0.01".into());
    }
    if t_seq <= t_set {
        failures.push("seqmia TPR@1% not above loss set".into());
    }
    if seq <= seq_loss - 0.005 || seq_loss <= set - 0.005 {
        failures.push("ordering multi-metric > loss sequence > loss set violated".into());
    }
    if elapsed > Duration::from_secs(30 * 60) {
        failures.push(format!("runtime {elapsed:.0?}"));
    }
    Outcome {
        id: 3,
        title: "canonical desk experiment",
        pass: failures.is_empty(),
        detail: format!(
            "median AUC seqmia {seq:.4} / seqmia_loss {seq_loss:.4} / loss_set {set:.4}; TPR@1%FPR {t_seq:.4} vs {t_set:.4}; {elapsed:.0?}{}",
            if failures.is_empty() { String::new() } else { format!("; {}", failures.join("; ")) }
        ),
    }
}

fn serialization_control(runs: &[RunSummary]) -> Outcome {
    let ba = |n| med(runs, n, |a| a.calibrated_balanced_accuracy);
    let (ordered, shuffled) = (ba("loss_set"), ba("loss_set_shuffled"));
    let ba_delta = (ordered - shuffled).abs();
    let seq = med(runs, "seqmia", |a| a.auc);
    let sh_auc = med(runs, "loss_set_shuffled", |a| a.auc);
    let (t_seq, t_sh) = (med(runs, "seqmia", tpr1), med(runs, "loss_set_shuffled", tpr1));
    let pass = ba_delta < 0.03 && seq >= sh_auc + 0.01 && t_seq > t_sh;
    Outcome {
        id: 4,
        title: "serialization control",
        pass,
        detail: format!(
            "loss-set balanced acc {ordered:.4} vs shuffled {shuffled:.4} (delta {ba_delta:.4}); seqmia AUC {seq:.4} vs shuffled {sh_auc:.4}, TPR@1%FPR {t_seq:.4} vs {t_sh:.4}"
        ),
    }
}

fn signal_statistics(run: &RunSummary) -> Outcome {
    let (m, n) = (&run.signals.members, &run.signals.nonmembers);
    let (cm, cn) = (m.clfa_of(Metric::Loss).unwrap(), n.clfa_of(Metric::Loss).unwrap());
    let (rm, rn) = (m.corr(Metric::Loss, Metric::Sd).unwrap(), n.corr(Metric::Loss, Metric::Sd).unwrap());
    Outcome {
        id: 5,
        title: "signal statistics",
        pass: cm < cn && rm >= rn,
        detail: format!("loss CLFA members {cm:.4} < non-members {cn:.4}; |corr(loss,sd)| members {rm:.4} >= non-members {rn:.4}"),
    }
}

fn ablation_trends() -> Outcome {
    let start = Instant::now();
    let base = RunConfig::canonical(SEEDS[0]);
    let rows_for = |axis| -> Vec<AblationRow> { run_ablation(&AblationGrid::new(axis, &base), &base) };
    let epochs = rows_for(AblationAxis::DistillEpochs);
    let sizes = rows_for(AblationAxis::TrainSize);
    let mut failures: Vec<String> = epochs
        .iter()
        .chain(&sizes)
        .filter_map(|r| r.error.as_ref().map(|e| format!("{}={} failed: {e}", r.axis, r.value)))
        .collect();
    let auc_at = |v: &str| epochs.iter().find(|r| r.value == v).map_or(f64::NAN, |r| r.auc);
    let (a5, a30) = (auc_at("5"), auc_at("30"));
    if a30.is_nan() || a30 < a5 - 0.005 {
        failures.push("AUC at 30 epochs below AUC at 5 epochs by more than 0.005".into());
    }
    let mut by_gap: Vec<&AblationRow> = sizes.iter().collect();
    by_gap.sort_by(|a, b| a.overfitting_level.total_cmp(&b.overfitting_level));
    let inversions = by_gap.windows(2).filter(|w| w[1].auc.is_nan() || w[1].auc < w[0].auc).count();
    if sizes.len() != 3 || inversions > 1 {
        failures.push(format!("{inversions} inversions across train sizes"));
    }
    let elapsed = start.elapsed();
    if elapsed > Duration::from_secs(60 * 60) {
        failures.push(format!("runtime {elapsed:.0?}"));
    }
    let trend: Vec<String> = by_gap
        .iter()
        .map(|r| format!("n={} gap {:.3} auc {:.4}", r.value, r.overfitting_level, r.auc))
        .collect();
    Outcome {
        id: 6,
        title: "ablation trends",
        pass: failures.is_empty(),
        detail: format!(
            "AUC n=5 {a5:.4}, n=30 {a30:.4}; {}; {inversions} inversions; {elapsed:.0?}{}",
            trend.join(", "),
            if failures.is_empty() { String::new() } else { format!("; {}", failures.join("; ")) }
        ),
    }
}

fn compared_files(dir: &Path) -> Vec<String> {
    list_files(dir)
        .unwrap()
        .into_iter()
        .filter(|p| p == "manifest.json" || p.starts_with("scores/") || p.starts_with("reports/"))
        .collect()
}

fn reproducibility(first_root: &Path, first: &RunSummary) -> Outcome {
    let second_root = tempfile::tempdir().unwrap();
    let second = full_run(second_root.path(), SEEDS[0]);
    let id = format!("seed{}", SEEDS[0]);
    let (a, b) = (first_root.join(&id), second_root.path().join(&id));
    let files = compared_files(&a);
    let mut differing: Vec<String> = files
        .iter()
        .filter(|f| std::fs::read(a.join(f)).ok() != std::fs::read(b.join(f)).ok())
        .cloned()
        .collect();
    if files != compared_files(&b) {
        differing.push("file lists differ".into());
    }
    let verified = [first_root, second_root.path()].iter().all(|root| {
        let store = RunStore::new(*root);
        Run::open_existing(&store, &id).map(|r| verify_run(&r).passed()).unwrap_or(false)
    });
    Outcome {
        id: 7,
        title: "reproducibility",
        pass: differing.is_empty() && verified && first == &second,
        detail: format!(
            "{} files compared, {} differ; verify {} on both roots",
            files.len(),
            differing.len(),
            if verified { "passes" } else { "FAILS" }
        ),
    }
}

#[test]
fn acceptance() {
    let mut outcomes = Vec::new();
    // Written to the stderr handle directly so the lines survive libtest's
    // output capture.
    let mut report = |o: Outcome| {
        let _ = writeln!(std::io::stderr().lock(), "{}", line(&o));
        outcomes.push(o);
    };
    report(numerical_core());
    report(distillation_contract());

    let roots: Vec<tempfile::TempDir> = SEEDS.iter().map(|_| tempfile::tempdir().unwrap()).collect();
    let start = Instant::now();
    let runs: Vec<RunSummary> = SEEDS.iter().zip(&roots).map(|(&s, r)| full_run(r.path(), s)).collect();
    let elapsed = start.elapsed();
    report(canonical_experiment(&runs, elapsed));
    report(serialization_control(&runs));
    report(signal_statistics(&runs[0]));
    report(ablation_trends());
    report(reproducibility(roots[0].path(), &runs[0]));

    let failed: Vec<String> = outcomes.iter().filter(|o| !o.pass).map(|o| o.id.to_string()).collect();
    assert!(failed.is_empty(), "failed criteria: {}", failed.join(", "));
}
