//! Repeated-pipeline reference indices against the closed forms.

use hofd_sense::bench::{Experiment, Model, LINEAR4_COEFFS};
use hofd_sense::oracle::{brute_force_indices, ishigami_indices, linear4_model_indices, BRUTE_FORCE_N};
use hofd_sense::Error;

#[test]
fn additive_model_matches_closed_form() {
    let law = Experiment::Linear4.default_law();
    let model = Model::Linear4 { coeffs: LINEAR4_COEFFS };
    let bf = brute_force_indices(|x| model.eval(x), &law, 100_000, 12).unwrap();
    assert_eq!((bf.replications, bf.n_per_replication), (20, BRUTE_FORCE_N));
    let blocks = law.blocks();
    let exact = linear4_model_indices(&blocks[0].spec, &blocks[1].spec, LINEAR4_COEFFS).unwrap();
    for (name, value) in exact.named_values() {
        let e = bf.get(&name).unwrap();
        if name.contains('_') {
            // interactions absorb the tail error of the main effects: a bias
            // of about 0.01 that exceeds the replication spread
            assert!(e.mean.abs() < 0.03, "{name}: {}", e.mean);
            continue;
        }
        assert!(
            (e.mean - value).abs() <= 3.0 * e.std.max(1e-12) || (e.mean - value).abs() < 1e-9,
            "{name}: {} +- {} vs {value}",
            e.mean,
            e.std
        );
    }
}

#[test]
fn ishigami_third_input_is_negligible() {
    let law = Experiment::Ishigami.default_law();
    let model = Model::Ishigami { a: 7.0, b: 0.1 };
    let bf = brute_force_indices(|x| model.eval(x), &law, 100_000, 13).unwrap();
    assert!(bf.get("S3").unwrap().mean < 0.1);
    let blocks = law.blocks();
    let grid = ishigami_indices(&blocks[0].spec, &blocks[1].spec, 7.0, 0.1).unwrap();
    assert!(grid.variable(2).unwrap().s < 0.1);
}

#[test]
fn constant_model_and_small_budget_are_rejected() {
    let law = Experiment::Bilinear.default_law();
    assert!(matches!(brute_force_indices(|_| 1.0, &law, 100_000, 1), Err(Error::DegenerateOutput)));
    assert!(matches!(brute_force_indices(|x| x[0], &law, 99_999, 1), Err(Error::InvalidSpec(_))));
}
