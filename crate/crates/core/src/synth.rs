//! Seeded synthetic datasets for tests, benchmarks and demos.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::Dataset;

/// Binary labels drawn at random with features on a coarse grid of `levels`
/// values, so duplicates and ties are common.
pub fn random_grid(seed: u64, n: usize, d: usize, levels: u32) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Dataset::empty(d);
    let mut row = vec![0.0; d];
    for _ in 0..n {
        for v in row.iter_mut() {
            *v = f64::from(rng.gen_range(0..levels)) * 0.5 - 3.0;
        }
        // Loosely tied to the first feature so trees find real splits.
        let p = if row[0] > 0.0 { 0.8 } else { 0.25 };
        let y = f64::from(u8::from(rng.gen_bool(p)));
        data.push_row(y, &row).expect("generated rows are finite");
    }
    data
}

/// Gaussian features with label `[w·x > 0]` for a fixed weight vector that
/// leans on the first two features. Rows closer than `margin` to the
/// hyperplane are redrawn, so the classes are linearly separable.
pub fn separable(seed: u64, n: usize, d: usize, margin: f64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w: Vec<f64> = (0..d).map(|j| match j {
        0 => 1.0,
        1 => 0.5,
        _ => 0.05,
    }).collect();
    let mut data = Dataset::empty(d);
    let mut row = vec![0.0; d];
    while data.len() < n {
        for v in row.iter_mut() {
            // Sum of uniforms: cheap, bounded, roughly bell-shaped.
            *v = (0..4).map(|_| rng.gen_range(-1.0..1.0)).sum::<f64>();
        }
        let s: f64 = row.iter().zip(&w).map(|(x, w)| x * w).sum();
        if s.abs() < margin {
            continue;
        }
        data.push_row(f64::from(u8::from(s > 0.0)), &row).expect("finite");
    }
    data
}

/// Uniform features in `[-1, 1)` with random binary labels.
pub fn uniform(seed: u64, n: usize, d: usize) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Dataset::empty(d);
    let mut row = vec![0.0; d];
    for _ in 0..n {
        for v in row.iter_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        data.push_row(f64::from(u8::from(rng.gen_bool(0.5))), &row).expect("finite");
    }
    data
}
