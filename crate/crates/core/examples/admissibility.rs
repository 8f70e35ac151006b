//! Certifies the density lower-bound condition for a few Gaussian mixtures.

use hofd_sense::distributions::{check_c2_gaussian, GaussianMixtureSpec};

fn main() -> hofd_sense::Result<()> {
    let cases = [
        ("bilinear pair", GaussianMixtureSpec::centered_pair(0.2, 0.5, 0.5, 0.4)?),
        ("linear4 second pair", GaussianMixtureSpec::centered_pair(0.2, 0.7, 0.3, 0.37)?),
        ("wide second component", GaussianMixtureSpec::centered_pair(0.2, 1.5, 0.5, 0.1)?),
    ];
    for (name, spec) in &cases {
        let report = check_c2_gaussian(spec)?;
        match report.bound_m {
            Some(m) => println!("{name}: admissible, M = {m:.6}"),
            None => println!("{name}: rejected ({})", report.details),
        }
    }
    Ok(())
}
