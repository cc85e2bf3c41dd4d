use std::path::Path;

use bohmflow::statefile::{load_state, StateSpec};
use bohmflow::{run_experiment, Experiment, ExperimentConfig, RunError};
use bohmflow_core::Superposition;
use serde_json::Value;
use sha2::{Digest, Sha256};

fn config(e: Experiment, overrides: &[&str]) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(e);
    for o in overrides {
        c.set_pair(o).unwrap();
    }
    c
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn rows(path: &Path) -> (String, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().to_string();
    (header, lines.map(|l| l.split(',').map(str::to_string).collect()).collect())
}

#[test]
fn every_experiment_writes_its_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let shortened: [(Experiment, &[&str]); 10] = [
        (Experiment::NodalTrajectory, &["t_end=5"]),
        (Experiment::NodalKinematics, &["dt=0.01"]),
        (Experiment::ComplexPortrait, &["field_points=5"]),
        (Experiment::HopfTransition, &["t_start=9.5", "t_end=9.62", "dt=0.06", "tolerance=1e-2"]),
        (Experiment::TrajectoryVsNode, &["t_end=12"]),
        (Experiment::TrajectoryFamilies, &["t_end=3"]),
        (Experiment::Scattering, &["t_end=5"]),
        (Experiment::Foliation, &["manifolds=true", "r_grid=2 4"]),
        (Experiment::PerturbedDiffusion, &["t_end=10"]),
        (Experiment::PowerLaw, &["t_end=10"]),
    ];
    for (e, o) in shortened {
        let out = dir.path().join(e.name());
        let m = run_experiment(&config(e, o), &out).unwrap_or_else(|err| panic!("{e}: {err}"));
        assert_eq!(m.experiment, e.name());
        assert!(!m.files.is_empty());
        assert!(out.join("manifest.json").exists());
        for f in &m.files {
            let bytes = std::fs::read(out.join(&f.path)).unwrap();
            assert_eq!(bytes.len(), f.bytes);
            let digest: String = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
            assert_eq!(digest, f.sha256, "{e}/{}", f.path);
        }
        assert!(m.files.iter().any(|f| f.path.ends_with(".svg")), "{e} has no preview");
    }
}

#[test]
fn node_path_lies_on_the_sphere() {
    let dir = tempfile::tempdir().unwrap();
    run_experiment(&config(Experiment::NodalTrajectory, &[]), dir.path()).unwrap();
    let (header, data) = rows(&dir.path().join("node_path.csv"));
    assert_eq!(header, "t,x1,x2,x3,c");
    assert_eq!(data.len(), 24901);
    assert_eq!(data[0][0].parse::<f64>().unwrap(), 1.0);
    assert_eq!(data.last().unwrap()[0].parse::<f64>().unwrap(), 250.0);
    for r in &data {
        let x: Vec<f64> = r[1..4].iter().map(|c| c.parse().unwrap()).collect();
        let rr = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        assert!((rr - 4.23).abs() < 1e-12);
        assert!(r[4].parse::<f64>().unwrap() > 0.0);
    }
}

#[test]
fn scattering_outputs_one_early_event() {
    let dir = tempfile::tempdir().unwrap();
    run_experiment(&config(Experiment::Scattering, &["t_end=20"]), dir.path()).unwrap();
    let s = json(&dir.path().join("summary.json"));
    let events = s["events_in_window"].as_array().unwrap();
    assert_eq!(events.len(), 1);
    let t = events[0]["t_jump"].as_f64().unwrap();
    assert!((1.5..=2.5).contains(&t), "{t}");

    let (header, metrics) = rows(&dir.path().join("metrics.csv"));
    assert_eq!(header, "t,a,cumulative,chi,distance");
    assert_eq!(metrics.len(), 2000);
    let (header, dev) = rows(&dir.path().join("deviation.csv"));
    assert_eq!(header, "t,xi,log_xi,stretching_raw");
    assert_eq!(dev.len(), 2001);
    assert_eq!(dev[0][3], "");
    // a_k = ln(xi_k / xi_{k-1})
    for k in [1, 500, 1999] {
        let xi = |i: usize| dev[i][1].parse::<f64>().unwrap();
        let a: f64 = dev[k][3].parse().unwrap();
        assert!((a - (xi(k) / xi(k - 1)).ln()).abs() < 1e-12);
        assert_eq!(dev[k][3], metrics[k - 1][1]);
    }
}

#[test]
fn output_is_independent_of_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(Experiment::TrajectoryFamilies, &["t_end=4"]);
    let run = |threads: usize, name: &str| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| run_experiment(&cfg, &dir.path().join(name)).unwrap())
    };
    let one = run(1, "one");
    let four = run(4, "four");
    assert_eq!(one.files, four.files);
    assert_eq!(one.config_digest, four.config_digest);
}

#[test]
fn offset_convention_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let m = run_experiment(&config(Experiment::TrajectoryFamilies, &["t_end=2"]), dir.path()).unwrap();
    assert!(m.conventions.iter().any(|(k, _)| k == "offset_direction"));
    let fams = json(&dir.path().join("families.json"));
    assert_eq!(fams["members"].as_array().unwrap().len(), 8);

    let flipped = run_experiment(
        &config(Experiment::TrajectoryFamilies, &["t_end=2", "offset_sign=-1"]),
        &dir.path().join("flipped"),
    )
    .unwrap();
    assert_ne!(m.files[0].sha256, flipped.files[0].sha256);
    assert!(matches!(
        run_experiment(&config(Experiment::TrajectoryFamilies, &["offset_sign=0"]), &dir.path().join("bad")),
        Err(RunError::InvalidValue { .. })
    ));
}

#[test]
fn perturbed_run_moves_off_the_sphere() {
    let dir = tempfile::tempdir().unwrap();
    run_experiment(&config(Experiment::PerturbedDiffusion, &[]), dir.path()).unwrap();
    let s = json(&dir.path().join("summary.json"));
    assert!(s["delta_r_max"].as_f64().unwrap() > 1e-2);
}

#[test]
fn power_law_control_stays_on_sphere() {
    let dir = tempfile::tempdir().unwrap();
    run_experiment(&config(Experiment::PowerLaw, &["a4_grid=0.05 0.1", "t_end=20"]), dir.path()).unwrap();
    let f = json(&dir.path().join("fit.json"));
    assert!(f["base_control_delta_r_max"].as_f64().unwrap() < 1e-6);
    assert_eq!(f["points"].as_array().unwrap().len(), 2);
    assert!(f["fit"]["exponent"].is_number());
}

#[test]
fn numeric_failures_carry_context() {
    let dir = tempfile::tempdir().unwrap();
    // t = 0 puts every nodal direction component at zero
    let e = run_experiment(&config(Experiment::ComplexPortrait, &["t=0"]), dir.path()).unwrap_err();
    match e {
        RunError::Numeric { context, .. } => assert!(context.contains("t = 0"), "{context}"),
        other => panic!("{other}"),
    }
}

#[test]
fn state_names_resolve() {
    assert_eq!(load_state("base").unwrap(), Superposition::base());
    let p = load_state("perturbed:0.1").unwrap();
    assert_eq!(p, Superposition::perturbed(0.1).unwrap());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.state");
    std::fs::write(&path, StateSpec::from_superposition(&p).to_text()).unwrap();
    assert_eq!(load_state(path.to_str().unwrap()).unwrap().terms(), p.terms());
    assert!(matches!(load_state("perturbed:x"), Err(RunError::InvalidValue { .. })));
    assert!(matches!(load_state("/nonexistent/state"), Err(RunError::Io { .. })));
}
