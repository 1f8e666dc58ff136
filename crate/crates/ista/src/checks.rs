//! Randomized self-checks runnable from the command line.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use ista_core::oracle::{matching_kernel_oracle, naive_sta_tensor};
use ista_core::{Codebook, DescriptorGrid, Resolution};

use crate::error::Result;

pub const DEFAULT_TRIALS: usize = 50;
pub const LINEARIZATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub passed: usize,
    pub failed: usize,
    pub worst_relative_error: f64,
}

impl SuiteReport {
    pub fn ok(&self) -> bool {
        self.failed == 0
    }
}

pub fn random_unit(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-6 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

pub fn random_grid(rng: &mut ChaCha8Rng, id: &str, h: usize, w: usize, d: usize) -> DescriptorGrid {
    let values = (0..h * w).flat_map(|_| random_unit(rng, d)).collect();
    DescriptorGrid::new(id, Resolution::R512, h, w, d, values).expect("finite random grid")
}

/// Codebook with Gaussian centers.
pub fn random_codebook(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Codebook {
    let centers = (0..n * d).map(|_| StandardNormal.sample(rng)).collect();
    Codebook::new(centers, d, 0, None).expect("distinct random centers")
}

/// One instance of the identity `⟨vec T_a, vec T_b⟩ = Σ k(x_r, y_s)·k(x_u, y_v)`;
/// returns the relative error.
pub fn linearization_trial(seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=4);
    let d = rng.gen_range(1..=6);
    let cb = random_codebook(&mut rng, n, d);
    let grid = |rng: &mut ChaCha8Rng, id| {
        let (h, w) = (rng.gen_range(1..=4), rng.gen_range(1..=4));
        random_grid(rng, id, h, w, d)
    };
    let a = grid(&mut rng, "a");
    let b = grid(&mut rng, "b");
    let ta = naive_sta_tensor(&a, &cb, 1, false)?;
    let tb = naive_sta_tensor(&b, &cb, 1, false)?;
    let lhs: f64 = ta.iter().zip(&tb).map(|(x, y)| x * y).sum();
    let rhs = matching_kernel_oracle(&a, &b, &cb, 1, false)?;
    let scale = lhs.abs().max(rhs.abs());
    Ok(if scale == 0.0 { 0.0 } else { (lhs - rhs).abs() / scale })
}

pub fn linearization_suite(trials: usize, seed: u64) -> Result<SuiteReport> {
    let mut report = SuiteReport {
        passed: 0,
        failed: 0,
        worst_relative_error: 0.0,
    };
    for t in 0..trials as u64 {
        let err = linearization_trial(seed.wrapping_add(t))?;
        report.worst_relative_error = report.worst_relative_error.max(err);
        if err <= LINEARIZATION_TOLERANCE {
            report.passed += 1;
        } else {
            report.failed += 1;
        }
    }
    Ok(report)
}
