//! Hard-assignment visual codebook (Lloyd's k-means with k-means++ seeding).

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Error, Result};

pub const DEFAULT_CODEBOOK_SIZE: usize = 32;

/// N cluster centers of dimension D.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    dim: usize,
    centers: Vec<f64>,
    seed: u64,
    inertia: Option<f64>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

fn count_distinct(data: &[f64], dim: usize) -> usize {
    let mut rows: Vec<&[f64]> = data.chunks_exact(dim).collect();
    rows.sort_by(|a, b| lex_cmp(a, b));
    rows.dedup_by(|a, b| lex_cmp(a, b).is_eq());
    rows.len()
}

impl Codebook {
    /// Wraps explicit centers (flat, N·D values).
    pub fn new(centers: Vec<f64>, dim: usize, seed: u64, inertia: Option<f64>) -> Result<Self> {
        if dim == 0 || centers.is_empty() || centers.len() % dim != 0 {
            return Err(Error::Validation(format!(
                "{} center values do not form whole vectors of dimension {dim}",
                centers.len()
            )));
        }
        if centers.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("codebook center has non-finite entry".into()));
        }
        let mut rows: Vec<&[f64]> = centers.chunks_exact(dim).collect();
        rows.sort_by(|a, b| lex_cmp(a, b));
        if rows.windows(2).any(|w| lex_cmp(w[0], w[1]).is_eq()) {
            return Err(Error::Validation("codebook has duplicate centers".into()));
        }
        Ok(Self {
            dim,
            centers,
            seed,
            inertia,
        })
    }

    /// Fits `n` centers on row-major `data` (rows of length `dim`).
    ///
    /// Deterministic for a given row order and seed. Every cluster owns at
    /// least one training row on return.
    pub fn fit(data: &[f64], dim: usize, n: usize, seed: u64, max_iters: usize) -> Result<Self> {
        if dim == 0 || data.len() % dim != 0 {
            return Err(Error::Fit(format!(
                "{} values do not form rows of dimension {dim}",
                data.len()
            )));
        }
        if data.is_empty() {
            return Err(Error::Fit("no training descriptors".into()));
        }
        if n == 0 || max_iters == 0 {
            return Err(Error::Fit("codebook size and max_iters must be positive".into()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Fit("training descriptors contain non-finite values".into()));
        }
        let distinct = count_distinct(data, dim);
        if distinct < n {
            return Err(Error::Fit(format!(
                "{distinct} distinct descriptors, need at least {n}"
            )));
        }

        let rows: Vec<&[f64]> = data.chunks_exact(dim).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut centers = plus_plus_init(&rows, dim, n, &mut rng);

        let (mut labels, mut dists) = assign_all(&rows, &centers, dim);
        for _ in 0..max_iters {
            update_centers(&rows, &labels, &mut centers, dim, n);
            let (new_labels, new_dists) = assign_all(&rows, &centers, dim);
            let changed = new_labels != labels;
            labels = new_labels;
            dists = new_dists;
            if !changed {
                break;
            }
        }
        repair_empty(&rows, &mut labels, &mut dists, &mut centers, dim, n)?;

        let inertia = dists.iter().sum();
        Self::new(centers, dim, seed, Some(inertia))
            .map_err(|e| Error::Fit(format!("fitted codebook invalid: {e}")))
    }

    pub fn len(&self) -> usize {
        self.centers.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Sum of squared distances to the assigned centers on the fit data, if known.
    pub fn inertia(&self) -> Option<f64> {
        self.inertia
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn center(&self, k: usize) -> &[f64] {
        &self.centers[k * self.dim..(k + 1) * self.dim]
    }

    /// Index of the nearest center; ties go to the lowest index.
    pub fn assign(&self, x: &[f64]) -> Result<usize> {
        check_dim("codebook assignment", self.dim, x.len())?;
        Ok(self.assign_unchecked(x))
    }

    pub(crate) fn assign_unchecked(&self, x: &[f64]) -> usize {
        nearest(x, &self.centers, self.dim).0
    }
}

fn nearest(x: &[f64], centers: &[f64], dim: usize) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (k, c) in centers.chunks_exact(dim).enumerate() {
        let d = sq_dist(x, c);
        if d < best.1 {
            best = (k, d);
        }
    }
    best
}

fn plus_plus_init(rows: &[&[f64]], dim: usize, n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut centers = Vec::with_capacity(n * dim);
    let first = rng.gen_range(0..rows.len());
    centers.extend_from_slice(rows[first]);
    let mut d2: Vec<f64> = rows.iter().map(|r| sq_dist(r, rows[first])).collect();
    for _ in 1..n {
        let total: f64 = d2.iter().sum();
        // distinct rows >= n guarantees some row is still uncovered
        let target = rng.gen::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = None;
        for (i, &w) in d2.iter().enumerate() {
            if w <= 0.0 {
                continue;
            }
            acc += w;
            pick = Some(i);
            if acc > target {
                break;
            }
        }
        let pick = pick.expect("positive total weight");
        centers.extend_from_slice(rows[pick]);
        for (d, r) in d2.iter_mut().zip(rows) {
            *d = d.min(sq_dist(r, rows[pick]));
        }
    }
    centers
}

fn assign_all(rows: &[&[f64]], centers: &[f64], dim: usize) -> (Vec<usize>, Vec<f64>) {
    rows.iter().map(|r| nearest(r, centers, dim)).unzip()
}

fn update_centers(rows: &[&[f64]], labels: &[usize], centers: &mut [f64], dim: usize, n: usize) {
    let mut sums = vec![0.0; n * dim];
    let mut counts = vec![0usize; n];
    for (r, &k) in rows.iter().zip(labels) {
        counts[k] += 1;
        for (s, v) in sums[k * dim..(k + 1) * dim].iter_mut().zip(r.iter()) {
            *s += v;
        }
    }
    for k in 0..n {
        // empty clusters keep their center until repair
        if counts[k] > 0 {
            let c = counts[k] as f64;
            for (dst, s) in centers[k * dim..(k + 1) * dim]
                .iter_mut()
                .zip(&sums[k * dim..(k + 1) * dim])
            {
                *dst = s / c;
            }
        }
    }
}

/// Reseeds empty clusters from the row farthest from its own center.
fn repair_empty(
    rows: &[&[f64]],
    labels: &mut Vec<usize>,
    dists: &mut Vec<f64>,
    centers: &mut [f64],
    dim: usize,
    n: usize,
) -> Result<()> {
    for _ in 0..=n {
        let mut counts = vec![0usize; n];
        labels.iter().for_each(|&k| counts[k] += 1);
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return Ok(());
        };
        let far = (0..rows.len())
            .filter(|&i| counts[labels[i]] > 1 && dists[i] > 0.0)
            .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)))
            .ok_or_else(|| Error::Fit("cannot repair empty cluster".into()))?;
        centers[empty * dim..(empty + 1) * dim].copy_from_slice(rows[far]);
        let (l, d) = assign_all(rows, centers, dim);
        *labels = l;
        *dists = d;
    }
    Err(Error::Fit("empty-cluster repair did not converge".into()))
}

/// Seeded uniform choice of at most `cap` of `count` row indices, ascending.
pub fn subsample_indices(count: usize, cap: usize, seed: u64) -> Vec<usize> {
    if count <= cap {
        return (0..count).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = index::sample(&mut rng, count, cap).into_vec();
    picked.sort_unstable();
    picked
}

/// Seeded uniform subsample of at most `cap` rows, keeping their original order.
pub fn subsample_rows(data: &[f64], dim: usize, cap: usize, seed: u64) -> Vec<f64> {
    subsample_indices(data.len() / dim, cap, seed)
        .into_iter()
        .flat_map(|i| data[i * dim..(i + 1) * dim].iter().copied())
        .collect()
}
