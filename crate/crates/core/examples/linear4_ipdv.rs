//! Two independent correlated pairs: the two-stage pipeline on
//! `Y = 5 X1 + 4 X2 + 3 X3 + 2 X4` with pairs (X1, X3) and (X2, X4).

use hofd_sense::bench::{Experiment, Model, LINEAR4_COEFFS};
use hofd_sense::hofd::{ipdv_decompose, GaussSeidelConfig};
use hofd_sense::indices::generalized_indices;
use hofd_sense::oracle::linear4_model_indices;

fn main() -> hofd_sense::Result<()> {
    let law = Experiment::Linear4.default_law();
    let model = Model::Linear4 { coeffs: LINEAR4_COEFFS };
    let sample = law.sample(1000, 1, |x| model.eval(x))?;
    let decomposition = ipdv_decompose(&sample, &law.pair_structure(), &GaussSeidelConfig::default())?;
    let report = generalized_indices(&decomposition, sample.y())?;
    let blocks = law.blocks();
    let oracle = linear4_model_indices(&blocks[0].spec, &blocks[1].spec, LINEAR4_COEFFS)?;
    for v in &report.variables {
        let o = oracle.variable(v.column).expect("same columns");
        println!(
            "X{}: S = {:.4} (Sv {:.4}, Sc {:.4})   exact {:.4}",
            v.column + 1,
            v.s,
            v.s_v,
            v.s_c,
            o.s
        );
    }
    for p in &report.pairs {
        println!("X{}X{} interaction: {:.4}", p.columns.0 + 1, p.columns.1 + 1, p.s12);
    }
    println!("between pairs {:.4}, sum {:.15}", report.between_pairs, report.sum_all);
    Ok(())
}
