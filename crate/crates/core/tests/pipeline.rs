use std::path::Path;

use lprom::experiment::{
    compare_modes, ExperimentConfig, ExperimentRegistry, MeshConfig, ParamSet, Pipeline, Scale, Stage, StageStatus,
};
use lprom::metrics::{ErrorReport, ParamErrors};

fn tiny(out: &Path) -> ExperimentConfig {
    let mut c = ExperimentRegistry::standard()
        .get("adv1d-inhomogeneous")
        .unwrap()
        .config(Scale::Desk);
    c.mesh = MeshConfig::Uniform {
        left: 0.0,
        right: 2.5,
        cells: 40,
    };
    c.train_params = ParamSet::Grid {
        axes: vec![vec![0.0, 0.5], vec![2.0, 4.0]],
    };
    c.test_params = ParamSet::List {
        points: vec![vec![0.25, 3.0]],
    };
    c.t_end = 0.5;
    c.t_train = 0.5;
    c.orders = vec![3];
    c.network.basis_hidden = vec![6, 6];
    c.network.coeff_hidden = vec![6];
    c.network.train.epochs = 3;
    c.timing_cells.clear();
    c.out_dir = out.to_path_buf();
    c
}

fn files(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|x| x == "csv" || x == "bin") {
                let rel = p.strip_prefix(root).unwrap().display().to_string();
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn repeated_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [a.path(), b.path()] {
        let mut p = Pipeline::new(tiny(dir)).unwrap();
        let m = p.run(&Stage::ALL).unwrap();
        assert!(m.failures.is_empty(), "{:?}", m.failures);
        assert!(m.stages.values().all(|s| *s == StageStatus::Ok));
    }
    let fa = files(a.path());
    let fb = files(b.path());
    assert!(fa.iter().any(|(n, _)| n.ends_with("order_table.csv")));
    assert!(fa.iter().any(|(n, _)| n.ends_with("mu0_errors.csv")));
    assert_eq!(fa.len(), fb.len());
    for ((na, da), (nb, db)) in fa.iter().zip(&fb) {
        assert_eq!(na, nb);
        assert!(da == db, "{na} differs between runs");
    }
    let ma = std::fs::read_to_string(a.path().join("models/lp_r3_c0.json")).unwrap();
    let mb = std::fs::read_to_string(b.path().join("models/lp_r3_c0.json")).unwrap();
    assert_eq!(ma, mb);
}

#[test]
fn manifest_survives_reopening_only_with_the_same_config() {
    let dir = tempfile::tempdir().unwrap();
    let mut p = Pipeline::new(tiny(dir.path())).unwrap();
    p.run(&[Stage::Snapshots]).unwrap();
    let hash = p.manifest().config_hash.clone();
    let again = Pipeline::new(tiny(dir.path())).unwrap();
    assert_eq!(again.manifest().stages.get(&Stage::Snapshots), Some(&StageStatus::Ok));
    let mut changed = tiny(dir.path());
    changed.seed += 1;
    let fresh = Pipeline::new(changed).unwrap();
    assert_ne!(fresh.manifest().config_hash, hash);
    assert!(fresh.manifest().stages.is_empty());
}

#[test]
fn per_item_failures_are_recorded_without_aborting() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny(dir.path());
    // 4 training parameters × 3 recorded steps cannot support a rank-60 POD basis
    cfg.t_train = 0.25;
    cfg.orders = vec![3, 60];
    cfg.modes = vec!["pod".into()];
    let mut p = Pipeline::new(cfg).unwrap();
    p.run(&[Stage::Snapshots, Stage::Pod]).unwrap();
    assert_eq!(p.manifest().stages[&Stage::Pod], StageStatus::Partial);
    let f = &p.manifest().failures;
    assert!(f.iter().any(|r| r.stage == "pod" && r.item.contains("r=60")), "{f:?}");
    assert!(p.artifacts.pod(3, 0).is_file());
}

#[test]
fn missing_inputs_fail_the_stage() {
    let dir = tempfile::tempdir().unwrap();
    let mut p = Pipeline::new(tiny(dir.path())).unwrap();
    assert!(p.run_stage(Stage::Compare).is_err());
    assert_eq!(p.manifest().stages[&Stage::Compare], StageStatus::Failed);
}

#[test]
fn unknown_experiment_lists_the_registry() {
    let err = match ExperimentRegistry::standard().get("no-such-run") {
        Err(e) => e.to_string(),
        Ok(_) => panic!("lookup should fail"),
    };
    for id in ExperimentRegistry::standard().ids() {
        assert!(err.contains(id), "{err}");
    }
}

fn report(mode: &str, r: usize, errors: &[f64], window_end: f64, mu: f64) -> ErrorReport {
    let n = errors.len();
    let times: Vec<f64> = (0..n).map(|i| window_end * i as f64 / (n - 1) as f64).collect();
    let p = ParamErrors {
        mu: vec![mu],
        times,
        l2: errors.to_vec(),
        relative: errors.to_vec(),
    };
    ErrorReport::new(mode, r, 10, vec![p]).unwrap()
}

#[test]
fn comparison_ranks_modes_per_order() {
    let reps = vec![
        report("pod", 5, &[0.1, 0.3], 1.0, 0.2),
        report("lp-galerkin", 5, &[0.01, 0.02], 1.0, 0.2),
        report("learning", 5, &[0.2, 0.1], 1.0, 0.2),
        report("pod", 10, &[0.01, 0.05], 1.0, 0.2),
        report("lp-galerkin", 10, &[0.01, 0.06], 1.0, 0.2),
    ];
    let cmp = compare_modes(&reps).unwrap();
    assert_eq!(cmp.ranking[0], (5, vec!["lp-galerkin".into(), "learning".into(), "pod".into()]));
    assert_eq!(cmp.ranking[1], (10, vec!["pod".into(), "lp-galerkin".into()]));
    assert_eq!(cmp.rows.len(), 5);
    let lp5 = cmp.rows.iter().find(|r| r.order == 5 && r.mode == "lp-galerkin").unwrap();
    assert!((lp5.average - 0.02).abs() < 1e-15);
}

#[test]
fn comparison_rejects_mismatched_windows_and_parameters() {
    let a = report("pod", 5, &[0.1, 0.3], 1.0, 0.2);
    let b = report("lp-galerkin", 5, &[0.1, 0.3], 0.5, 0.2);
    let err = compare_modes(&[a.clone(), b]).unwrap_err().to_string();
    assert!(err.contains("window"), "{err}");
    let c = report("lp-galerkin", 5, &[0.1, 0.3], 1.0, 0.7);
    assert!(compare_modes(&[a, c]).is_err());
    assert!(compare_modes(&[]).is_err());
}
