#![allow(dead_code)]

use adaptometer_core::sampling::PrimeSample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub struct Truth {
    pub intercept: f64,
    pub same_conv: f64,
    pub ln_freq: f64,
    pub ln_size: f64,
    pub conv_sd: f64,
    pub speaker_sd: f64,
}

/// Sample rows from a logistic model with normal conversation and speaker
/// intercepts.
pub fn simulate(seed: u64, convs: usize, rows_per_speaker: usize, truth: &Truth) -> Vec<PrimeSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let conv_re = Normal::new(0.0, truth.conv_sd.max(1e-300)).unwrap();
    let spk_re = Normal::new(0.0, truth.speaker_sd.max(1e-300)).unwrap();
    let mut out = Vec::new();
    for c in 0..convs {
        let bc = conv_re.sample(&mut rng);
        for s in ["A", "B"] {
            let bs = spk_re.sample(&mut rng);
            for _ in 0..rows_per_speaker {
                let same: u8 = rng.random_range(0..2);
                let f: f64 = rng.random_range(-2.0..2.0);
                let z: f64 = rng.random_range(-1.0..1.0);
                let eta = truth.intercept
                    + truth.same_conv * same as f64
                    + truth.ln_freq * f
                    + truth.ln_size * z
                    + bc
                    + bs;
                let prime = (rng.random::<f64>() < 1.0 / (1.0 + (-eta).exp())) as u8;
                out.push(PrimeSample {
                    prime,
                    same_conv: same,
                    ln_freq: f,
                    ln_size: z,
                    conv_id: format!("c{c:03}"),
                    speaker_id: s.into(),
                    rule: format!("R{}→x", out.len() % 11),
                });
            }
        }
    }
    out
}
