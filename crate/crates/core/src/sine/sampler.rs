//! Exact von Mises sampling (Best–Fisher wrapped-Cauchy envelope) and
//! ancestral sampling of conditional von Mises DAGs.
use core::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::angle::{wrap_unchecked, AngleMatrix};
use crate::prelude::*;

use super::{CvmDagModel, VonMisesParams};

/// Above this concentration the Normal approximation N(μ, 1/κ) is used; the
/// envelope constants lose precision there.
const NORMAL_LIMIT: f64 = 1e6;

pub fn sample_von_mises<R: Rng + ?Sized>(rng: &mut R, params: &VonMisesParams) -> f64 {
    let mu = params.mu.radians();
    let kappa = params.kappa;
    if kappa < 1e-12 {
        return wrap_unchecked(PI * (2.0 * rng.random::<f64>() - 1.0));
    }
    if kappa > NORMAL_LIMIT {
        let z: f64 = rng.sample(StandardNormal);
        return wrap_unchecked(mu + z / kappa.sqrt());
    }
    let tau = 1.0 + (1.0 + 4.0 * kappa * kappa).sqrt();
    let rho = (tau - (2.0 * tau).sqrt()) / (2.0 * kappa);
    let r = (1.0 + rho * rho) / (2.0 * rho);
    let f = loop {
        let u1: f64 = rng.random();
        let u2: f64 = rng.random();
        let z = (PI * u1).cos();
        let f = (1.0 + r * z) / (r + z);
        let c = kappa * (r - f);
        if c * (2.0 - c) - u2 > 0.0 || (c / u2).ln() + 1.0 - c >= 0.0 {
            break f;
        }
    };
    let offset = f.clamp(-1.0, 1.0).acos();
    if rng.random_bool(0.5) {
        wrap_unchecked(mu + offset)
    } else {
        wrap_unchecked(mu - offset)
    }
}

/// Draws `n` rows by visiting nodes in the model's ordering. Deterministic for
/// a fixed seed.
pub fn cvm_sample(model: &CvmDagModel, n: usize, seed: u64) -> AngleMatrix {
    let p = model.p();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = vec![0.0; n * p];
    for row in values.chunks_exact_mut(p) {
        for &j in model.dag().ordering() {
            let cond = model.conditional(j, row);
            row[j] = sample_von_mises(&mut rng, &cond);
        }
    }
    AngleMatrix::from_radians(n, p, values, model.dag().labels().to_vec())
        .expect("sampled angles are finite and the labels come from a valid DAG")
}
