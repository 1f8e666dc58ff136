//! Spatially-coupled pair tensors.
//!
//! For every ordered cluster pair `(k, l)` the training corpus yields a mean
//! outer product `E[x_r x_uᵀ]` over neighbouring descriptors `x_r ∈ C_k`,
//! `x_u ∈ Ω(x_r) ∩ C_l`. Its SVD gives a pair eigenspace; an image is encoded
//! by summing projected outer products and subtracting the projected mean
//! once per observed pair.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use nalgebra::DMatrix;

use crate::codebook::Codebook;
use crate::error::{check_dim, Error, Result};
use crate::grid::DescriptorGrid;
use crate::linalg::svd_sorted;

pub const DEFAULT_RADIUS: usize = 1;
pub const DEFAULT_MIN_PAIR_COUNT: u64 = 100;

/// Ragged block layout of a signature: one `r×r` block per ordered pair
/// `(k, l)`, row-major over pairs, pairs of rank 0 taking no space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairLayout {
    clusters: usize,
    ranks: Vec<usize>,
    offsets: Vec<usize>,
    total_dim: usize,
}

impl PairLayout {
    pub fn new(clusters: usize, ranks: Vec<usize>) -> Result<Self> {
        check_dim("pair layout", clusters * clusters, ranks.len())?;
        let mut offsets = Vec::with_capacity(ranks.len());
        let mut total = 0;
        for r in &ranks {
            offsets.push(total);
            total += r * r;
        }
        Ok(Self {
            clusters,
            ranks,
            offsets,
            total_dim: total,
        })
    }

    pub fn clusters(&self) -> usize {
        self.clusters
    }

    pub fn total_dim(&self) -> usize {
        self.total_dim
    }

    pub fn rank(&self, k: usize, l: usize) -> usize {
        self.ranks[k * self.clusters + l]
    }

    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }

    pub fn max_rank(&self) -> usize {
        self.ranks.iter().copied().max().unwrap_or(0)
    }

    /// Flat range of block `(k, l)` in a signature vector.
    pub fn block_range(&self, k: usize, l: usize) -> Range<usize> {
        let p = k * self.clusters + l;
        let start = self.offsets[p];
        start..start + self.ranks[p] * self.ranks[p]
    }

    /// Pairs with a nonzero block, in layout order.
    pub fn live_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.clusters;
        (0..n * n)
            .filter(move |&p| self.ranks[p] > 0)
            .map(move |p| (p / n, p % n))
    }
}

/// Running sums `Σ x_r x_uᵀ` and pair counts per ordered cluster pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairStatistics {
    clusters: usize,
    dim: usize,
    sums: Vec<f64>,
    counts: Vec<u64>,
}

impl PairStatistics {
    pub fn new(clusters: usize, dim: usize) -> Self {
        Self {
            clusters,
            dim,
            sums: vec![0.0; clusters * clusters * dim * dim],
            counts: vec![0; clusters * clusters],
        }
    }

    /// Rebuilds statistics from stored sums (pair-major, each `D×D` row-major).
    pub fn from_parts(clusters: usize, dim: usize, sums: Vec<f64>, counts: Vec<u64>) -> Result<Self> {
        check_dim("pair statistics counts", clusters * clusters, counts.len())?;
        check_dim("pair statistics sums", clusters * clusters * dim * dim, sums.len())?;
        if sums.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("pair statistics contain non-finite sums".into()));
        }
        let d2 = dim * dim;
        for (p, &c) in counts.iter().enumerate() {
            if c == 0 && sums[p * d2..(p + 1) * d2].iter().any(|&v| v != 0.0) {
                return Err(Error::Validation(format!(
                    "pair {} has zero count but a nonzero sum",
                    p
                )));
            }
        }
        Ok(Self {
            clusters,
            dim,
            sums,
            counts,
        })
    }

    /// Statistics of a grid stream; the merge order follows the stream order.
    pub fn from_grids<'a>(
        grids: impl IntoIterator<Item = &'a DescriptorGrid>,
        codebook: &Codebook,
        radius: usize,
    ) -> Result<Self> {
        let mut stats = Self::new(codebook.len(), codebook.dim());
        let mut any = false;
        for g in grids {
            stats.accumulate(g, codebook, radius)?;
            any = true;
        }
        if !any {
            return Err(Error::Argument("no grids to accumulate".into()));
        }
        Ok(stats)
    }

    /// Statistics of a single grid.
    pub fn of_grid(grid: &DescriptorGrid, codebook: &Codebook, radius: usize) -> Result<Self> {
        let mut stats = Self::new(codebook.len(), codebook.dim());
        stats.accumulate(grid, codebook, radius)?;
        Ok(stats)
    }

    /// Adds every ordered neighbour pair of `grid` to the running sums.
    pub fn accumulate(&mut self, grid: &DescriptorGrid, codebook: &Codebook, radius: usize) -> Result<()> {
        check_dim("grid depth vs codebook", codebook.dim(), grid.depth())?;
        check_dim("codebook size vs statistics", self.clusters, codebook.len())?;
        check_dim("grid depth vs statistics", self.dim, grid.depth())?;
        if radius == 0 {
            return Err(Error::Argument("neighborhood radius must be >= 1".into()));
        }
        let d = self.dim;
        let n = self.clusters;
        let labels: Vec<usize> = grid.descriptors().map(|x| codebook.assign_unchecked(x)).collect();

        // Σ_u x_r x_uᵀ over neighbours in one cluster is x_r (Σ_u x_u)ᵀ.
        let mut neigh_sum = vec![0.0; n * d];
        let mut neigh_count = vec![0u64; n];
        let mut touched = Vec::with_capacity(n);
        for r in 0..grid.len() {
            let k = labels[r];
            grid.for_each_neighbor(r, radius, false, |u| {
                let l = labels[u];
                if neigh_count[l] == 0 {
                    touched.push(l);
                }
                neigh_count[l] += 1;
                for (s, v) in neigh_sum[l * d..(l + 1) * d].iter_mut().zip(grid.descriptor(u)) {
                    *s += v;
                }
            });
            touched.sort_unstable();
            let xr = grid.descriptor(r);
            for &l in &touched {
                let p = k * n + l;
                self.counts[p] += neigh_count[l];
                let block = &mut self.sums[p * d * d..(p + 1) * d * d];
                let su = &neigh_sum[l * d..(l + 1) * d];
                for (i, &a) in xr.iter().enumerate() {
                    if a != 0.0 {
                        for (dst, &b) in block[i * d..(i + 1) * d].iter_mut().zip(su) {
                            *dst += a * b;
                        }
                    }
                }
                neigh_count[l] = 0;
                neigh_sum[l * d..(l + 1) * d].iter_mut().for_each(|v| *v = 0.0);
            }
            touched.clear();
        }
        Ok(())
    }

    /// Entrywise addition of another partial result.
    pub fn merge(&mut self, other: &PairStatistics) -> Result<()> {
        check_dim("merged statistics clusters", self.clusters, other.clusters)?;
        check_dim("merged statistics depth", self.dim, other.dim)?;
        self.sums.iter_mut().zip(&other.sums).for_each(|(a, b)| *a += b);
        self.counts.iter_mut().zip(&other.counts).for_each(|(a, b)| *a += b);
        Ok(())
    }

    pub fn clusters(&self) -> usize {
        self.clusters
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self, k: usize, l: usize) -> u64 {
        self.counts[k * self.clusters + l]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn sums(&self) -> &[f64] {
        &self.sums
    }

    /// `Σ x_r x_uᵀ` for pair `(k, l)`, row-major `D×D`.
    pub fn sum_matrix(&self, k: usize, l: usize) -> &[f64] {
        let d2 = self.dim * self.dim;
        let p = k * self.clusters + l;
        &self.sums[p * d2..(p + 1) * d2]
    }

    /// Mean pair tensor for `(k, l)`, or `None` when the pair was never seen.
    pub fn mean_matrix(&self, k: usize, l: usize) -> Option<DMatrix<f64>> {
        let c = self.count(k, l);
        (c > 0).then(|| {
            DMatrix::from_row_slice(self.dim, self.dim, self.sum_matrix(k, l)) / c as f64
        })
    }
}

/// SVD factors of one pair's mean tensor, truncated to the retained rank.
#[derive(Debug, Clone, PartialEq)]
pub struct PairComponent {
    /// Training pair count `|S_kl|`.
    pub count: u64,
    /// Retained singular values, descending.
    pub singular_values: Vec<f64>,
    /// Retained left singular vectors, column after column (`rank · D`).
    pub u: Vec<f64>,
    /// Retained right singular vectors, column after column (`rank · D`).
    pub v: Vec<f64>,
}

impl PairComponent {
    pub fn empty(count: u64) -> Self {
        Self {
            count,
            singular_values: Vec::new(),
            u: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    pub fn u_column(&self, i: usize, dim: usize) -> &[f64] {
        &self.u[i * dim..(i + 1) * dim]
    }

    pub fn v_column(&self, i: usize, dim: usize) -> &[f64] {
        &self.v[i * dim..(i + 1) * dim]
    }
}

/// Per-pair eigenspaces with adaptive ranks: the fitted encoder model.
#[derive(Debug, Clone, PartialEq)]
pub struct PairBasis {
    clusters: usize,
    dim: usize,
    pairs: Vec<PairComponent>,
    layout: PairLayout,
}

/// Smallest rank whose squared-singular-value energy reaches `target`.
pub fn rank_for_variance(singular_values: &[f64], target: f64) -> usize {
    let total: f64 = singular_values.iter().map(|s| s * s).sum();
    if total <= 0.0 {
        return 0;
    }
    let goal = target * total * (1.0 - 1e-12);
    let mut acc = 0.0;
    for (i, s) in singular_values.iter().enumerate() {
        acc += s * s;
        if acc >= goal {
            return i + 1;
        }
    }
    singular_values.len()
}

impl PairBasis {
    /// Fits the basis: SVD of every mean tensor, rank chosen per pair so that
    /// the retained σ² energy reaches `variance_target`. Pairs seen fewer than
    /// `min_pair_count` times get rank 0.
    pub fn fit(stats: &PairStatistics, variance_target: f64, min_pair_count: u64) -> Result<Self> {
        if !(variance_target > 0.0 && variance_target <= 1.0) {
            return Err(Error::Argument(format!(
                "variance target must lie in (0, 1], got {variance_target}"
            )));
        }
        let (n, d) = (stats.clusters, stats.dim);
        let mut pairs = Vec::with_capacity(n * n);
        for k in 0..n {
            for l in 0..n {
                let count = stats.count(k, l);
                let mean = match stats.mean_matrix(k, l) {
                    Some(m) if count >= min_pair_count.max(1) => m,
                    _ => {
                        pairs.push(PairComponent::empty(count));
                        continue;
                    }
                };
                let svd = svd_sorted(&mean)?;
                let rank = rank_for_variance(&svd.singular_values, variance_target);
                let mut comp = PairComponent::empty(count);
                for i in 0..rank {
                    comp.singular_values.push(svd.singular_values[i]);
                    comp.u.extend(svd.u.column(i).iter());
                    comp.v.extend(svd.v.column(i).iter());
                }
                debug_assert_eq!(comp.u.len(), rank * d);
                pairs.push(comp);
            }
        }
        Self::from_pairs(n, d, pairs)
    }

    pub fn from_pairs(clusters: usize, dim: usize, pairs: Vec<PairComponent>) -> Result<Self> {
        check_dim("pair basis entries", clusters * clusters, pairs.len())?;
        for (p, c) in pairs.iter().enumerate() {
            let r = c.rank();
            if r > dim || c.u.len() != r * dim || c.v.len() != r * dim {
                return Err(Error::Validation(format!(
                    "pair {p}: rank {r} inconsistent with factor sizes"
                )));
            }
            if c.singular_values.windows(2).any(|w| w[0] < w[1])
                || c.singular_values.iter().any(|s| !s.is_finite() || *s < 0.0)
            {
                return Err(Error::Validation(format!(
                    "pair {p}: singular values must be finite, nonnegative and descending"
                )));
            }
            if c.u.iter().chain(&c.v).any(|x| !x.is_finite()) {
                return Err(Error::Validation(format!("pair {p}: non-finite factor")));
            }
        }
        let layout = PairLayout::new(clusters, pairs.iter().map(PairComponent::rank).collect())?;
        Ok(Self {
            clusters,
            dim,
            pairs,
            layout,
        })
    }

    pub fn clusters(&self) -> usize {
        self.clusters
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn layout(&self) -> &PairLayout {
        &self.layout
    }

    pub fn pair(&self, k: usize, l: usize) -> &PairComponent {
        &self.pairs[k * self.clusters + l]
    }

    pub fn pairs(&self) -> &[PairComponent] {
        &self.pairs
    }

    /// Encodes one grid into its centered, projected pair blocks:
    /// `block_kl = Σ (Uᵀ x_r)(Vᵀ x_u)ᵀ − n_kl · diag(L)`.
    pub fn encode(&self, grid: &DescriptorGrid, codebook: &Codebook, radius: usize) -> Result<RawSignature> {
        check_dim("grid depth vs basis", self.dim, grid.depth())?;
        check_dim("codebook depth vs basis", self.dim, codebook.dim())?;
        check_dim("codebook size vs basis", self.clusters, codebook.len())?;
        if radius == 0 {
            return Err(Error::Argument("neighborhood radius must be >= 1".into()));
        }
        let (n, d) = (self.clusters, self.dim);
        let layout = &self.layout;
        let mut values = vec![0.0; layout.total_dim()];
        let mut pair_counts = vec![0u64; n * n];
        let labels: Vec<usize> = grid.descriptors().map(|x| codebook.assign_unchecked(x)).collect();

        let max_rank = layout.max_rank();
        let mut left = vec![0.0; max_rank];
        let mut right = vec![0.0; max_rank];
        for r in 0..grid.len() {
            let k = labels[r];
            let xr = grid.descriptor(r);
            grid.for_each_neighbor(r, radius, false, |u| {
                let l = labels[u];
                let p = k * n + l;
                pair_counts[p] += 1;
                let comp = &self.pairs[p];
                let rank = comp.rank();
                if rank == 0 {
                    return;
                }
                let xu = grid.descriptor(u);
                for i in 0..rank {
                    left[i] = crate::linalg::dot(comp.u_column(i, d), xr);
                    right[i] = crate::linalg::dot(comp.v_column(i, d), xu);
                }
                let block = &mut values[layout.block_range(k, l)];
                for i in 0..rank {
                    let a = left[i];
                    for (dst, &b) in block[i * rank..(i + 1) * rank].iter_mut().zip(&right[..rank]) {
                        *dst += a * b;
                    }
                }
            });
        }
        for (k, l) in layout.live_pairs() {
            let p = k * n + l;
            let count = pair_counts[p] as f64;
            if count == 0.0 {
                continue;
            }
            let comp = &self.pairs[p];
            let rank = comp.rank();
            let block = &mut values[layout.block_range(k, l)];
            for i in 0..rank {
                block[i * rank + i] -= count * comp.singular_values[i];
            }
        }
        RawSignature::new(grid.image_id(), layout.clone(), values)
    }
}

/// Concatenated per-pair blocks of one image, laid out by a [`PairLayout`].
#[derive(Debug, Clone, PartialEq)]
pub struct RawSignature {
    image_id: String,
    layout: PairLayout,
    values: Vec<f64>,
}

impl RawSignature {
    pub fn new(image_id: impl Into<String>, layout: PairLayout, values: Vec<f64>) -> Result<Self> {
        check_dim("raw signature length", layout.total_dim(), values.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("raw signature has non-finite entries".into()));
        }
        Ok(Self {
            image_id: image_id.into(),
            layout,
            values,
        })
    }

    pub fn image_id(&self) -> &str {
        &self.image_id
    }

    pub fn layout(&self) -> &PairLayout {
        &self.layout
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn block(&self, k: usize, l: usize) -> &[f64] {
        &self.values[self.layout.block_range(k, l)]
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Resolution;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn one_center_codebook(d: usize) -> Codebook {
        let mut c = vec![0.0; d];
        c[0] = 1.0;
        Codebook::new(c, d, 0, None).unwrap()
    }

    #[test]
    fn two_cell_grid_counts_both_orientations() {
        let xa = [0.6, 0.8, 0.0];
        let xb = [0.0, 0.6, 0.8];
        let g = DescriptorGrid::new("g", Resolution::R512, 1, 2, 3, [xa, xb].concat()).unwrap();
        let s = PairStatistics::of_grid(&g, &one_center_codebook(3), 1).unwrap();
        assert_eq!(s.count(0, 0), 2);
        let m = s.sum_matrix(0, 0);
        for i in 0..3 {
            for j in 0..3 {
                let want = xa[i] * xb[j] + xb[i] * xa[j];
                assert!((m[i * 3 + j] - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn single_cell_grid_has_no_pairs() {
        let g = DescriptorGrid::new("g", Resolution::R512, 1, 1, 2, vec![1.0, 0.0]).unwrap();
        let s = PairStatistics::of_grid(&g, &one_center_codebook(2), 1).unwrap();
        assert!(s.counts().iter().all(|&c| c == 0));
        assert!(s.sums().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn depth_mismatch_is_rejected() {
        let g = DescriptorGrid::new("g", Resolution::R512, 1, 1, 2, vec![1.0, 0.0]).unwrap();
        assert!(matches!(
            PairStatistics::of_grid(&g, &one_center_codebook(3), 1),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    fn stats_with_mean(mean: &[f64], d: usize) -> PairStatistics {
        PairStatistics::from_parts(1, d, mean.to_vec(), vec![1]).unwrap()
    }

    #[test]
    fn rank_one_mean_keeps_one_component() {
        let b = PairBasis::fit(&stats_with_mean(&[2.0, 0.0, 0.0, 0.0], 2), 0.8, 1).unwrap();
        let c = b.pair(0, 0);
        assert_eq!(c.rank(), 1);
        assert!((c.singular_values[0] - 2.0).abs() < 1e-12);
        assert!((c.u[0].abs() - 1.0).abs() < 1e-12 && c.u[1].abs() < 1e-12);
        assert!((c.v[0].abs() - 1.0).abs() < 1e-12 && c.v[1].abs() < 1e-12);
    }

    #[test]
    fn energy_ratio_selects_rank() {
        assert_eq!(rank_for_variance(&[3.0, 1.0], 0.9), 1);
        assert_eq!(rank_for_variance(&[3.0, 1.0], 0.91), 2);
        assert_eq!(rank_for_variance(&[0.0, 0.0], 0.5), 0);
        let b = PairBasis::fit(&stats_with_mean(&[3.0, 0.0, 0.0, 1.0], 2), 0.9, 1).unwrap();
        assert_eq!(b.pair(0, 0).rank(), 1);
    }

    #[test]
    fn full_target_reconstructs_random_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let m: Vec<f64> = (0..64).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b = PairBasis::fit(&stats_with_mean(&m, 8), 1.0, 1).unwrap();
        let c = b.pair(0, 0);
        assert_eq!(c.rank(), 8);
        let mut err = 0.0;
        for i in 0..8 {
            for j in 0..8 {
                let rec: f64 = (0..8)
                    .map(|q| c.u_column(q, 8)[i] * c.singular_values[q] * c.v_column(q, 8)[j])
                    .sum();
                err += (rec - m[i * 8 + j]).powi(2);
            }
        }
        assert!(err.sqrt() <= 1e-9);
    }

    #[test]
    fn unseen_and_rare_pairs_get_rank_zero() {
        let stats = PairStatistics::from_parts(2, 1, vec![1.0, 0.0, 0.0, 5.0], vec![1, 0, 0, 5]).unwrap();
        let b = PairBasis::fit(&stats, 1.0, 2).unwrap();
        assert_eq!(b.layout().ranks(), &[0, 0, 0, 1]);
        assert_eq!(b.layout().total_dim(), 1);
        assert!(PairBasis::fit(&stats, 0.0, 1).is_err());
        assert!(PairBasis::fit(&stats, 1.5, 1).is_err());
    }

    #[test]
    fn ranks_grow_with_variance_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m: Vec<f64> = (0..36).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let stats = stats_with_mean(&m, 6);
        let mut last = 0;
        for t in [0.1, 0.3, 0.5, 0.7, 0.8, 0.9, 0.95, 0.99, 1.0] {
            let r = PairBasis::fit(&stats, t, 1).unwrap().pair(0, 0).rank();
            assert!(r >= last);
            last = r;
        }
    }

    #[test]
    fn single_pair_block_is_projected_outer_product_minus_singular_values() {
        // two clusters along e0 / e1; one (0,1) and one (1,0) pair in a 1x2 grid
        let cb = Codebook::new(vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0], 3, 0, None).unwrap();
        let xr = [0.8, 0.0, 0.6];
        let xu = [0.0, 0.6, 0.8];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let sums: Vec<f64> = (0..4 * 9).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let stats = PairStatistics::from_parts(2, 3, sums, vec![3, 3, 3, 3]).unwrap();
        let basis = PairBasis::fit(&stats, 1.0, 1).unwrap();
        let g = DescriptorGrid::new("g", Resolution::R512, 1, 2, 3, [xr, xu].concat()).unwrap();
        let sig = basis.encode(&g, &cb, 1).unwrap();
        let c = basis.pair(0, 1);
        let r = c.rank();
        let block = sig.block(0, 1);
        for i in 0..r {
            for j in 0..r {
                let a = crate::linalg::dot(c.u_column(i, 3), &xr);
                let b = crate::linalg::dot(c.v_column(j, 3), &xu);
                let want = a * b - if i == j { c.singular_values[i] } else { 0.0 };
                assert!((block[i * r + j] - want).abs() < 1e-12);
            }
        }
        // no (0,0) pairs in the image: block stays zero
        assert!(sig.block(0, 0).iter().all(|&v| v == 0.0));
    }
}
