use std::path::PathBuf;

use seqmia::config::RunConfig;
use seqmia::eval::{parse_roc_csv, AblationAxis};
use seqmia::run::{verify_run, EvaluationRecord, Run, RunStore, Stage, StageOutcome};
use seqmia::signals::SequenceSet;
use seqmia::Error;

fn smoke() -> RunConfig {
    RunConfig::load(&PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/smoke.toml")).unwrap()
}

#[test]
fn artifacts_have_expected_shapes() {
    let root = tempfile::tempdir().unwrap();
    let store = RunStore::new(root.path());
    let cfg = smoke();
    let mut run = Run::open(&store, "s", cfg.clone()).unwrap();
    run.run_all().unwrap();
    let dir = run.dir().to_path_buf();

    let seqs = SequenceSet::decode(&std::fs::read(dir.join("sequences/target.sqs")).unwrap()).unwrap();
    assert_eq!(seqs.shape(), Some((5, cfg.distill.epochs + 1)));
    assert_eq!(seqs.len(), 80);
    assert_eq!(seqs.iter().filter(|(_, m)| *m).count(), 40);

    let snaps = std::fs::read_dir(dir.join("snapshots/target")).unwrap().count();
    assert_eq!(snaps, cfg.distill.epochs + 1);

    let eval: EvaluationRecord = serde_json::from_slice(&std::fs::read(dir.join("reports/evaluation.json")).unwrap()).unwrap();
    for e in &eval.evaluations {
        let text = std::fs::read_to_string(dir.join(format!("reports/roc/{}.csv", e.name))).unwrap();
        assert_eq!(parse_roc_csv(&text).unwrap(), e.report.roc_points);
    }
    let header = std::fs::read_to_string(dir.join("scores/seqmia.target.csv")).unwrap();
    assert!(header.starts_with("sample_id,true_membership,score,attack_name\n"));
    let att = std::fs::read_to_string(dir.join("scores/attention.csv")).unwrap();
    assert!(att.starts_with("timestep,member_mean,nonmember_mean\n"));
    assert_eq!(att.lines().count(), cfg.distill.epochs + 2);
    let report = std::fs::read_to_string(dir.join("reports/report.md")).unwrap();
    for name in ["seqmia", "loss_set", "mba_entropy", "st"] {
        assert!(report.contains(&format!("| {name} |")), "{name} missing from report");
    }
    assert!(verify_run(&run).passed());
}

#[test]
fn ablation_stage_feeds_the_report() {
    let root = tempfile::tempdir().unwrap();
    let store = RunStore::new(root.path());
    let mut cfg = smoke();
    cfg.eval.ablation.axes = vec![AblationAxis::DistillEpochs];
    let mut run = Run::open(&store, "ab", cfg).unwrap();
    let stages: Vec<Stage> = run.run_all().unwrap().into_iter().map(|(s, _)| s).collect();
    assert!(stages.contains(&Stage::Ablate));
    let csv = std::fs::read_to_string(run.dir().join("reports/ablation.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(std::fs::read_to_string(run.dir().join("reports/report.md")).unwrap().contains("## Ablations"));
    assert!(verify_run(&run).passed());
}

#[test]
fn rebuilt_stage_with_identical_bytes_keeps_downstream_cached() {
    let root = tempfile::tempdir().unwrap();
    let store = RunStore::new(root.path());
    let mut run = Run::open(&store, "re", smoke()).unwrap();
    run.run_all().unwrap();
    std::fs::remove_file(run.dir().join("models/train.json")).unwrap();
    assert!(matches!(run.ensure_current(Stage::Train), Err(Error::Io { .. })));
    assert_eq!(run.run_stage(Stage::Train).unwrap(), StageOutcome::Ran);
    for stage in [Stage::Distill, Stage::Sequences, Stage::Attack, Stage::Evaluate, Stage::Report] {
        assert_eq!(run.run_stage(stage).unwrap(), StageOutcome::Cached, "{stage}");
    }
}
