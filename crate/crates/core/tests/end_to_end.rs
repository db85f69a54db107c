use hdts_core::experiments::{run_experiment, ExperimentConfig};
use hdts_core::gboot::simultaneous_ci;
use hdts_core::io::{read_panel, write_panel};
use hdts_core::longrun::{sigma_tilde, BlockPlan};
use hdts_core::model::simulate;
use hdts_core::{ProcessSpec, RngContract};

#[test]
fn file_round_trip_preserves_results() {
    let spec = ProcessSpec::linear(6, 1.0, 30, 2, 0.4);
    let panel = simulate(&spec, 250, RngContract::new(40)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    for name in ["panel.csv", "panel.bin"] {
        let path = dir.path().join(name);
        write_panel(&panel, &path).unwrap();
        let back = read_panel(&path).unwrap();
        assert_eq!(back.data, panel.data);
        let plan = BlockPlan::default_for(250).unwrap();
        assert_eq!(sigma_tilde(&back, &plan).unwrap().sigma, sigma_tilde(&panel, &plan).unwrap().sigma);
        let a = simultaneous_ci(&back, 0.9, None, 1000, RngContract::new(1)).unwrap();
        let b = simultaneous_ci(&panel, 0.9, None, 1000, RngContract::new(1)).unwrap();
        assert_eq!(a.intervals, b.intervals);
    }
}

#[test]
fn experiment_artifacts_are_byte_identical() {
    let cfg = ExperimentConfig::from_toml(
        r#"
kind = "coverage"
seed = 11
replications = 200
draws = 1000

[spec]
family = "linear"
p = 3
alpha = 1.0
truncation = 20
bandwidth = 1
cross_decay = 0.3

[grid]
n = [120]
theta = [0.8, 0.9]
"#,
    )
    .unwrap();
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let f1 = run_experiment(&cfg).unwrap().write_artifacts(d1.path()).unwrap();
    let f2 = run_experiment(&cfg).unwrap().write_artifacts(d2.path()).unwrap();
    assert_eq!(f1.len(), 2);
    for (a, b) in f1.iter().zip(&f2) {
        assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    }
    let csv = std::fs::read_to_string(&f1[0]).unwrap();
    assert_eq!(csv.lines().count(), 3);
}
