//! Leave-one-out local linear smoothing of a noisy sine, compared with the
//! plain in-sample fit.

use hofd_sense::smoother::{loo_conditional_mean, LooSmoother, SmootherConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> hofd_sense::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let n = 400;
    let x: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
    let y: Vec<f64> = x.iter().map(|v| v.sin() + 0.3 * rng.random_range(-1.0..1.0)).collect();

    let cfg = SmootherConfig::default();
    let loo = loo_conditional_mean(&[&x], &y, &cfg)?;
    let op = LooSmoother::fit(&[&x], &cfg)?;
    assert!(loo.iter().zip(op.apply(&y)).all(|(a, b)| (a - b).abs() < 1e-9));

    let cv = loo.iter().zip(&y).map(|(f, t)| (f - t).powi(2)).sum::<f64>() / n as f64;
    let err = loo.iter().zip(&x).map(|(f, v)| (f - v.sin()).powi(2)).sum::<f64>() / n as f64;
    println!("bandwidth {:.4}", op.bandwidths()[0]);
    println!("leave-one-out CV error {cv:.4}, error against sin(x) {err:.4}");
    Ok(())
}
