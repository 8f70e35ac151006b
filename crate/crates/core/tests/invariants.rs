//! Property-based invariants of the smoother, the decomposition and the indices.

use hofd_sense::distributions::{GaussianMixtureSpec, IpdvLaw, PairStructure, SampleSet};
use hofd_sense::hofd::{hofd_bivariate, ipdv_decompose, GaussSeidelConfig};
use hofd_sense::indices::generalized_indices;
use hofd_sense::smoother::{loo_conditional_mean, SmootherConfig};
use proptest::prelude::*;

fn sample(rho: f64, coeffs: [f64; 4], n: usize, seed: u64) -> SampleSet {
    let spec = GaussianMixtureSpec::centered_pair(0.3, 0.5, 0.5, rho).unwrap();
    IpdvLaw::single(spec)
        .unwrap()
        .sample(n, seed, |x| coeffs[0] + coeffs[1] * x[0] + coeffs[2] * x[1].sin() + coeffs[3] * x[0] * x[1])
        .unwrap()
}

fn coeffs() -> impl Strategy<Value = [f64; 4]> {
    (-3.0..3.0f64, 0.2..3.0f64, 0.2..3.0f64, -2.0..2.0f64).prop_map(|(a, b, c, d)| [a, b, c, d])
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn components_reconstruct_and_indices_sum_to_one(
        rho in -0.4..0.4f64,
        c in coeffs(),
        seed in any::<u64>(),
    ) {
        let s = sample(rho, c, 150, seed);
        let (t, _) = hofd_bivariate(s.column(0), s.column(1), s.y(), &GaussSeidelConfig::default()).unwrap();
        let scale = s.y().iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for (r, y) in t.reconstruct().iter().zip(s.y()) {
            prop_assert!((r - y).abs() <= 1e-12 * scale);
        }
        let d = ipdv_decompose(&s, &PairStructure::consecutive(2).unwrap(), &GaussSeidelConfig::default()).unwrap();
        let report = generalized_indices(&d, s.y()).unwrap();
        prop_assert!((report.sum_all - 1.0).abs() < 1e-12, "sum {}", report.sum_all);
    }

    #[test]
    fn indices_are_invariant_under_affine_output_maps(
        c in coeffs(),
        a in prop_oneof![0.01..100.0f64, -100.0..-0.01f64],
        b in -50.0..50.0f64,
        seed in any::<u64>(),
    ) {
        let s = sample(0.4, c, 150, seed);
        let moved = s.with_output(s.y().iter().map(|v| a * v + b).collect()).unwrap();
        let pairs = PairStructure::consecutive(2).unwrap();
        let cfg = GaussSeidelConfig::default();
        let r0 = generalized_indices(&ipdv_decompose(&s, &pairs, &cfg).unwrap(), s.y()).unwrap();
        let r1 = generalized_indices(&ipdv_decompose(&moved, &pairs, &cfg).unwrap(), moved.y()).unwrap();
        for ((n0, v0), (_, v1)) in r0.named_values().into_iter().zip(r1.named_values()) {
            prop_assert!((v0 - v1).abs() < 1e-8, "{n0}: {v0} vs {v1}");
        }
    }

    #[test]
    fn row_permutation_permutes_components(
        c in coeffs(),
        seed in any::<u64>(),
        shift in 1usize..149,
    ) {
        let s = sample(0.3, c, 150, seed);
        let n = s.n();
        let perm: Vec<usize> = (0..n).map(|k| (k * 7 + shift) % n).collect();
        let pick = |v: &[f64]| perm.iter().map(|&k| v[k]).collect::<Vec<f64>>();
        let cfg = GaussSeidelConfig::default();
        let (t, _) = hofd_bivariate(s.column(0), s.column(1), s.y(), &cfg).unwrap();
        let (tp, _) = hofd_bivariate(&pick(s.column(0)), &pick(s.column(1)), &pick(s.y()), &cfg).unwrap();
        for (a, b) in [(&t.eta1, &tp.eta1), (&t.eta2, &tp.eta2), (&t.eta12, &tp.eta12)] {
            for (u, v) in pick(a).iter().zip(b) {
                prop_assert!((u - v).abs() < 1e-8, "{u} vs {v}");
            }
        }
    }

    #[test]
    fn leave_one_out_smoother_is_linear(
        seed in any::<u64>(),
        a in -5.0..5.0f64,
        b in -5.0..5.0f64,
        degree in 0usize..3,
    ) {
        let s = sample(0.4, [0.0, 1.0, 1.0, 1.0], 120, seed);
        let (x1, x2) = (s.column(0), s.column(1));
        let y1: Vec<f64> = x1.iter().map(|v| v.cos()).collect();
        let y2: Vec<f64> = x1.iter().zip(x2).map(|(u, v)| u * v).collect();
        let mix: Vec<f64> = y1.iter().zip(&y2).map(|(p, q)| a * p + b * q).collect();
        let cfg = SmootherConfig { degree, ..SmootherConfig::guarded() };
        let f = |y: &[f64]| loo_conditional_mean(&[x1, x2], y, &cfg).unwrap();
        let (m1, m2, mm) = (f(&y1), f(&y2), f(&mix));
        for k in 0..s.n() {
            let expected = a * m1[k] + b * m2[k];
            prop_assert!((mm[k] - expected).abs() < 1e-8 * (1.0 + expected.abs()));
        }
    }
}
