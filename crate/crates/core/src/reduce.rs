//! Two-stage, inner-product-preserving dimension reduction.
//!
//! Both stages learn a low-rank approximation of the sample Gram matrix
//! `G = S Sᵀ = V L Vᵀ` and project a vector `s` as `L^{-1/2} Vᵀ S s`. On the
//! fit samples this reproduces `G` exactly when nothing is truncated. The
//! first stage works block by block (a block-diagonal projection, never
//! materialized); the second acts on the concatenated block outputs and may
//! additionally whiten. The block stage never whitens.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::ops::Range;

use nalgebra::DMatrix;

use crate::aggregation::RawSignature;
use crate::error::{check_dim, Error, Result};
use crate::linalg::symmetric_eigen_sorted;

pub const DEFAULT_KEEP_RATIO: f64 = 0.4;
/// Eigenvalues below this fraction of the largest are treated as null.
pub const NULL_EIGEN_RATIO: f64 = 1e-10;

/// Row-major dense matrix, the unit of the reduction model files.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Projection {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        check_dim("projection matrix size", rows * cols, data.len())?;
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("projection has non-finite entries".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = crate::linalg::dot(self.row(i), x);
        }
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim("projection input", self.cols, x.len())?;
        let mut out = alloc::vec![0.0; self.rows];
        self.apply_into(x, &mut out);
        Ok(out)
    }
}

/// How the principal directions of a sample set are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GramRoute {
    /// Eigendecompose the `m×m` Gram matrix `S Sᵀ`.
    Gram,
    /// Eigendecompose the `q×q` scatter matrix `Sᵀ S`.
    Scatter,
    /// Whichever of the two is smaller.
    Auto,
}

/// Principal directions (orthonormal rows) and their eigenvalues.
pub struct Principal {
    pub directions: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
}

/// Leading principal directions of the rows of `samples` (`m × q`), at most
/// `max_components`, null components dropped. Each direction is signed so
/// its largest-magnitude entry is positive.
pub fn principal_directions(samples: &DMatrix<f64>, max_components: usize, route: GramRoute) -> Result<Principal> {
    let (m, q) = samples.shape();
    let use_gram = match route {
        GramRoute::Gram => true,
        GramRoute::Scatter => false,
        GramRoute::Auto => m <= q,
    };
    let eig = if use_gram {
        symmetric_eigen_sorted(&(samples * samples.transpose()))?
    } else {
        symmetric_eigen_sorted(&(samples.transpose() * samples))?
    };
    let top = eig.values.first().copied().unwrap_or(0.0);
    let live = eig
        .values
        .iter()
        .take_while(|&&v| top > 0.0 && v > NULL_EIGEN_RATIO * top)
        .count();
    let keep = live.min(max_components);
    let mut directions = DMatrix::zeros(keep, q);
    for i in 0..keep {
        let mut row = if use_gram {
            (samples.transpose() * eig.vectors.column(i)).transpose() / libm::sqrt(eig.values[i])
        } else {
            eig.vectors.column(i).transpose().into_owned()
        };
        let lead = row.iter().copied().fold(0.0f64, |best, x| {
            if libm::fabs(x) > libm::fabs(best) {
                x
            } else {
                best
            }
        });
        if lead < 0.0 {
            row = -row;
        }
        directions.set_row(i, &row);
    }
    Ok(Principal {
        directions,
        eigenvalues: eig.values[..keep].to_vec(),
    })
}

fn stack_rows<'a>(rows: impl ExactSizeIterator<Item = &'a [f64]>, width: usize) -> DMatrix<f64> {
    let m = rows.len();
    let mut s = DMatrix::zeros(m, width);
    for (i, r) in rows.enumerate() {
        for (j, &v) in r.iter().enumerate() {
            s[(i, j)] = v;
        }
    }
    s
}

fn to_projection(directions: &DMatrix<f64>, scale: Option<&[f64]>) -> Projection {
    let (rows, cols) = directions.shape();
    let mut data = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        let f = scale.map_or(1.0, |s| 1.0 / libm::sqrt(s[i]));
        data.extend(directions.row(i).iter().map(|v| v * f));
    }
    Projection { rows, cols, data }
}

/// `ceil(keep_ratio · dim)`, robust to the ratio's binary representation.
pub fn kept_dimension(keep_ratio: f64, dim: usize) -> usize {
    let raw = keep_ratio * dim as f64;
    let r = libm::round(raw);
    if libm::fabs(raw - r) < 1e-9 {
        r as usize
    } else {
        libm::ceil(raw) as usize
    }
}

/// Per-pair projections forming a block-diagonal reduction of raw signatures.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockProjection {
    blocks: Vec<Projection>,
}

/// Output of the block stage, keeping track of which pair each slice came from.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockReduced {
    image_id: String,
    clusters: usize,
    pairs: Vec<(usize, usize)>,
    offsets: Vec<usize>,
    values: Vec<f64>,
}

impl BlockReduced {
    pub fn image_id(&self) -> &str {
        &self.image_id
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    fn range(&self, i: usize) -> Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }
}

impl BlockProjection {
    pub fn from_blocks(blocks: Vec<Projection>) -> Self {
        Self { blocks }
    }

    pub fn blocks(&self) -> &[Projection] {
        &self.blocks
    }

    pub fn output_dim(&self) -> usize {
        self.blocks.iter().map(Projection::rows).sum()
    }

    pub fn input_dim(&self) -> usize {
        self.blocks.iter().map(Projection::cols).sum()
    }

    /// Fits one projection per live pair from normalized sample signatures.
    ///
    /// Returns the model and one message per block whose output dimension
    /// had to be capped below `ceil(keep_ratio · r²)`.
    pub fn fit(samples: &[RawSignature], keep_ratio: f64) -> Result<(Self, Vec<String>)> {
        if !(keep_ratio > 0.0 && keep_ratio <= 1.0) {
            return Err(Error::Argument(format!("keep ratio must lie in (0, 1], got {keep_ratio}")));
        }
        if samples.len() < 2 {
            return Err(Error::Argument(format!(
                "block reduction needs at least 2 samples, got {}",
                samples.len()
            )));
        }
        let layout = samples[0].layout();
        if let Some(bad) = samples.iter().find(|s| s.layout() != layout) {
            return Err(Error::Layout(format!(
                "sample {} does not share the layout of {}",
                bad.image_id(),
                samples[0].image_id()
            )));
        }
        let mut blocks = Vec::new();
        let mut notes = Vec::new();
        for (k, l) in layout.live_pairs() {
            let q = layout.rank(k, l).pow(2);
            let s = stack_rows(samples.iter().map(|sig| sig.block(k, l)), q);
            let want = kept_dimension(keep_ratio, q);
            let pc = principal_directions(&s, want, GramRoute::Auto)?;
            let got = pc.directions.nrows();
            if got < want {
                notes.push(format!(
                    "pair ({k},{l}): kept {got} of {want} requested components ({} samples)",
                    samples.len()
                ));
            }
            blocks.push(to_projection(&pc.directions, None));
        }
        Ok((Self { blocks }, notes))
    }

    /// Applies each block projection to its slice and concatenates the results.
    pub fn apply(&self, sig: &RawSignature) -> Result<BlockReduced> {
        let layout = sig.layout();
        let pairs: Vec<(usize, usize)> = layout.live_pairs().collect();
        if pairs.len() != self.blocks.len() {
            return Err(Error::Layout(format!(
                "signature has {} blocks, projection has {}",
                pairs.len(),
                self.blocks.len()
            )));
        }
        let mut offsets = Vec::with_capacity(pairs.len() + 1);
        let mut values = alloc::vec![0.0; self.output_dim()];
        let mut at = 0;
        for (p, &(k, l)) in self.blocks.iter().zip(&pairs) {
            let block = sig.block(k, l);
            if block.len() != p.cols() {
                return Err(Error::Layout(format!(
                    "pair ({k},{l}) has {} components, projection expects {}",
                    block.len(),
                    p.cols()
                )));
            }
            offsets.push(at);
            p.apply_into(block, &mut values[at..at + p.rows()]);
            at += p.rows();
        }
        offsets.push(at);
        Ok(BlockReduced {
            image_id: sig.image_id().into(),
            clusters: layout.clusters(),
            pairs,
            offsets,
            values,
        })
    }
}

/// Dense reduction applied after the block stage, optionally whitening.
#[derive(Debug, Clone, PartialEq)]
pub struct FullProjection {
    matrix: Projection,
    whiten: bool,
    eigenvalues: Vec<f64>,
}

impl FullProjection {
    pub fn new(matrix: Projection, whiten: bool, eigenvalues: Vec<f64>) -> Self {
        Self {
            matrix,
            whiten,
            eigenvalues,
        }
    }

    /// Fits the projection on vectors produced by the block stage. With
    /// `whiten`, component `i` is scaled by `λ_i^{-1/2}` so every component
    /// has the same mean square over the fit samples.
    pub fn fit(samples: &[Vec<f64>], target_dim: usize, whiten: bool) -> Result<(Self, Vec<String>)> {
        if target_dim == 0 {
            return Err(Error::Argument("target dimension must be positive".into()));
        }
        let first = samples
            .first()
            .ok_or_else(|| Error::Argument("full reduction needs samples".into()))?;
        let width = first.len();
        if let Some(bad) = samples.iter().position(|s| s.len() != width) {
            return Err(Error::DimensionMismatch {
                context: "full reduction sample",
                expected: width,
                actual: samples[bad].len(),
            });
        }
        let s = stack_rows(samples.iter().map(Vec::as_slice), width);
        let pc = principal_directions(&s, target_dim, GramRoute::Auto)?;
        let mut notes = Vec::new();
        if pc.directions.nrows() < target_dim {
            notes.push(format!(
                "full reduction: kept {} of {target_dim} requested components ({} samples)",
                pc.directions.nrows(),
                samples.len()
            ));
        }
        let matrix = to_projection(&pc.directions, whiten.then_some(pc.eigenvalues.as_slice()));
        Ok((
            Self {
                matrix,
                whiten,
                eigenvalues: pc.eigenvalues,
            },
            notes,
        ))
    }

    pub fn matrix(&self) -> &Projection {
        &self.matrix
    }

    pub fn whiten(&self) -> bool {
        self.whiten
    }

    /// Gram eigenvalues of the retained components; empty for loaded models.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn input_dim(&self) -> usize {
        self.matrix.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn apply(&self, v: &[f64], renorm: bool) -> Result<Vec<f64>> {
        let mut out = self.matrix.apply(v)?;
        if renorm {
            crate::normalize::l2_normalize(&mut out, crate::normalize::DEFAULT_EPSILON);
        }
        Ok(out)
    }
}

/// Anything laid out as per-pair blocks, for similarity diagnostics.
pub trait PairBlocks {
    fn clusters(&self) -> usize;
    /// `(k, l, block)` in layout order.
    fn blocks(&self) -> Vec<(usize, usize, &[f64])>;
}

impl PairBlocks for RawSignature {
    fn clusters(&self) -> usize {
        self.layout().clusters()
    }

    fn blocks(&self) -> Vec<(usize, usize, &[f64])> {
        self.layout()
            .live_pairs()
            .map(|(k, l)| (k, l, self.block(k, l)))
            .collect()
    }
}

impl PairBlocks for BlockReduced {
    fn clusters(&self) -> usize {
        self.clusters
    }

    fn blocks(&self) -> Vec<(usize, usize, &[f64])> {
        self.pairs
            .iter()
            .enumerate()
            .map(|(i, &(k, l))| (k, l, &self.values[self.range(i)]))
            .collect()
    }
}
