use manova::ensembles::EntryDistribution;
use manova::harness::{counting_experiment, ExperimentKind, ExperimentPlan};
use manova::laws::ModelParams;

#[test]
fn counting_error_falls_with_n() {
    let mut plan = ExperimentPlan::new(
        ExperimentKind::Counting,
        ModelParams::new(2.0, 2.0).unwrap(),
        EntryDistribution::ComplexGaussian,
        7,
        250,
        0.05,
        10,
    );
    plan.n_list = vec![250, 1000];
    plan.threads = 4;
    let out = counting_experiment(&plan).unwrap();
    let small = out.runs[0].summary.median("counting_max_abs_error").unwrap();
    let large = out.runs[1].summary.median("counting_max_abs_error").unwrap();
    assert!(large < small, "n=250 {small}, n=1000 {large}");
    let rel = out.runs[1].summary.median("counting_max_rel_error").unwrap();
    assert!(rel <= 0.15, "{rel}");
}
