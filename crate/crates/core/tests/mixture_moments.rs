//! Monte Carlo checks of the closed-form moments behind the oracles, and of
//! the certified density lower bound.

mod common;

use common::density_ratio;
use hofd_sense::bench::{Experiment, Model, LINEAR4_COEFFS};
use hofd_sense::distributions::{check_c2_gaussian, GaussianMixtureSpec, IpdvLaw};
use hofd_sense::oracle::{bilinear_model_indices, ishigami_indices, linear4_model_indices};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const N_MC: usize = 1_000_000;

fn mean_and_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

fn variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n
}

fn bilinear_pair() -> GaussianMixtureSpec {
    GaussianMixtureSpec::centered_pair(0.2, 0.5, 0.5, 0.4).unwrap()
}

#[test]
fn mixture_covariance_and_fourth_moment() {
    let law = IpdvLaw::single(bilinear_pair()).unwrap();
    let cols = law.sample_columns(N_MC, 17).unwrap();
    let cross: Vec<f64> = cols[0].iter().zip(&cols[1]).map(|(a, b)| a * b).collect();
    let (cov, _) = mean_and_se(&cross);
    assert!((cov - 0.32).abs() < 0.01, "cov {cov}");
    // E[X1^2 X2^2] = V1 V2 + 2 Cov^2 in each Gaussian component
    let expected = 0.2 * 1.0 + 0.8 * (0.5 * 0.5 + 2.0 * 0.4 * 0.4);
    let sq: Vec<f64> = cross.iter().map(|v| v * v).collect();
    let (m, se) = mean_and_se(&sq);
    assert!((m - expected).abs() < 5.0 * se, "{m} vs {expected} (se {se})");
}

#[test]
fn bilinear_output_variance() {
    let spec = bilinear_pair();
    let oracle = bilinear_model_indices(&spec).unwrap();
    let law = IpdvLaw::single(spec).unwrap();
    let y = law.sample(N_MC, 5, |x| Model::Bilinear.eval(x)).unwrap();
    let v = variance(y.y());
    assert!((v - oracle.total_variance).abs() < 0.02, "{v} vs {}", oracle.total_variance);
    assert!((oracle.total_variance - 2.3936).abs() < 1e-12);
}

#[test]
fn linear4_output_variance_and_first_index() {
    let law = Experiment::Linear4.default_law();
    let blocks = law.blocks();
    let oracle = linear4_model_indices(&blocks[0].spec, &blocks[1].spec, LINEAR4_COEFFS).unwrap();
    assert!((oracle.total_variance - 48.656).abs() < 1e-9);
    assert!((oracle.variable(0).unwrap().s - 19.8 / 48.656).abs() < 1e-12);
    let model = Model::Linear4 { coeffs: LINEAR4_COEFFS };
    let sample = law.sample(N_MC, 8, |x| model.eval(x)).unwrap();
    let v = variance(sample.y());
    assert!((v - 48.656).abs() < 0.3, "{v}");
}

#[test]
fn ishigami_output_variance() {
    let law = Experiment::Ishigami.default_law();
    let blocks = law.blocks();
    for a in [3.0, 7.0] {
        let oracle = ishigami_indices(&blocks[0].spec, &blocks[1].spec, a, 0.1).unwrap();
        let model = Model::Ishigami { a, b: 0.1 };
        let sample = law.sample(N_MC, 21, |x| model.eval(x)).unwrap();
        let y = sample.y();
        let v = variance(y);
        // standard error of a variance estimate from the fourth central moment
        let n = y.len() as f64;
        let m = y.iter().sum::<f64>() / n;
        let m4 = y.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
        let se = ((m4 - v * v) / n).sqrt();
        assert!((v - oracle.total_variance).abs() < 5.0 * se, "a={a}: {v} vs {}", oracle.total_variance);
    }
}

#[test]
fn certified_bound_survives_density_ratio_scan() {
    let cases = [
        (0.2, [[0.5, 0.4], [0.4, 0.5]]),
        (0.2, [[0.7, 0.37], [0.37, 0.3]]),
        (0.2, [[0.15, 0.3], [0.3, 0.85]]),
        (0.5, [[0.8, -0.2], [-0.2, 0.6]]),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for (alpha, om) in cases {
        let spec = GaussianMixtureSpec::centered_pair(alpha, om[0][0], om[1][1], om[0][1]).unwrap();
        let report = check_c2_gaussian(&spec).unwrap();
        let m = report.bound_m.expect("admissible");
        let cols = IpdvLaw::single(spec).unwrap().sample_columns(50_000, 3).unwrap();
        let mut worst = f64::INFINITY;
        for i in 0..100_000 {
            let x = if i < 50_000 {
                [cols[0][i], cols[1][i]]
            } else {
                [rng.random_range(-6.0..6.0), rng.random_range(-6.0..6.0)]
            };
            worst = worst.min(density_ratio(alpha, om, x));
        }
        assert!(worst >= m * (1.0 - 1e-12), "alpha={alpha} {om:?}: ratio {worst} below M={m}");
    }
}
