#![allow(dead_code)]

use fibercorr::fluct::{AdjointField, PerturbationField};
use fibercorr::lattice::{TemporalGrid, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Smooth random complex samples: a few plane waves under a Gaussian envelope.
pub fn smooth_random(grid: &TemporalGrid, rng: &mut ChaCha8Rng, envelope: f64) -> Vec<C64> {
    let modes: Vec<(f64, C64)> = (0..6)
        .map(|_| {
            (
                rng.gen_range(-3.0..3.0),
                C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
            )
        })
        .collect();
    grid.taus()
        .into_iter()
        .map(|t| {
            let env = (-(t / envelope).powi(2)).exp();
            modes.iter().map(|&(w, a)| a * C64::cis(w * t)).sum::<C64>() * env
        })
        .collect()
}

pub fn random_fields(grid: &TemporalGrid, seed: u64) -> (PerturbationField, AdjointField) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = PerturbationField::new(*grid, smooth_random(grid, &mut rng, 6.0), smooth_random(grid, &mut rng, 6.0))
        .expect("grid matches");
    let f = AdjointField::new(*grid, smooth_random(grid, &mut rng, 6.0), smooth_random(grid, &mut rng, 6.0))
        .expect("grid matches");
    (v, f)
}

/// `sqrt(mean (a - b)^2) / max(a)`.
pub fn relative_rms(a: &[f64], b: &[f64]) -> f64 {
    let peak = a.iter().cloned().fold(0.0, f64::max);
    let ms = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64;
    ms.sqrt() / peak
}
