//! Brute-force references for the pair-tensor embedding.
//!
//! Both functions are quadratic (or worse) in the grid size and exist to
//! check the fast paths at test scale: the inner product of two explicit
//! 4th-order tensors must equal the matching kernel evaluated pair by pair.

use alloc::vec;
use alloc::vec::Vec;

use crate::codebook::Codebook;
use crate::error::{check_dim, Error, Result};
use crate::grid::DescriptorGrid;
use crate::linalg::dot;

/// Largest tensor `naive_sta_tensor` agrees to materialize.
pub const MAX_TENSOR_ENTRIES: usize = 10_000_000;

fn neighbours(grid: &DescriptorGrid, radius: usize, include_center: bool) -> Vec<Vec<usize>> {
    (0..grid.len())
        .map(|r| {
            let mut out = Vec::new();
            grid.for_each_neighbor(r, radius, include_center, |u| out.push(u));
            out
        })
        .collect()
}

/// Explicit `Σ_r Σ_{u∈Ω(r)} h(x_r) ⊗ h(x_u) ⊗ x_r ⊗ x_u`, flattened `(k, l, i, j)`.
pub fn naive_sta_tensor(
    grid: &DescriptorGrid,
    codebook: &Codebook,
    radius: usize,
    include_center: bool,
) -> Result<Vec<f64>> {
    check_dim("grid depth vs codebook", codebook.dim(), grid.depth())?;
    if radius == 0 {
        return Err(Error::Argument("neighborhood radius must be >= 1".into()));
    }
    let (n, d) = (codebook.len(), grid.depth());
    let size = n
        .checked_mul(n)
        .and_then(|v| v.checked_mul(d * d))
        .unwrap_or(usize::MAX);
    if size > MAX_TENSOR_ENTRIES {
        return Err(Error::Resource {
            requested: size,
            limit: MAX_TENSOR_ENTRIES,
        });
    }
    let mut t = vec![0.0; size];
    let labels: Vec<usize> = grid.descriptors().map(|x| codebook.assign_unchecked(x)).collect();
    for (r, omega) in neighbours(grid, radius, include_center).iter().enumerate() {
        for &u in omega {
            let base = (labels[r] * n + labels[u]) * d * d;
            let (xr, xu) = (grid.descriptor(r), grid.descriptor(u));
            for i in 0..d {
                for j in 0..d {
                    t[base + i * d + j] += xr[i] * xu[j];
                }
            }
        }
    }
    Ok(t)
}

/// Descriptor similarity `⟨h(x), h(y)⟩ · ⟨x, y⟩`.
fn codebook_kernel(la: usize, lb: usize, x: &[f64], y: &[f64]) -> f64 {
    if la == lb {
        dot(x, y)
    } else {
        0.0
    }
}

/// Matching kernel between spatially coupled descriptor pairs of two grids,
/// evaluated term by term.
pub fn matching_kernel_oracle(
    a: &DescriptorGrid,
    b: &DescriptorGrid,
    codebook: &Codebook,
    radius: usize,
    include_center: bool,
) -> Result<f64> {
    check_dim("grid depths", a.depth(), b.depth())?;
    check_dim("grid depth vs codebook", codebook.dim(), a.depth())?;
    if radius == 0 {
        return Err(Error::Argument("neighborhood radius must be >= 1".into()));
    }
    let la: Vec<usize> = a.descriptors().map(|x| codebook.assign_unchecked(x)).collect();
    let lb: Vec<usize> = b.descriptors().map(|x| codebook.assign_unchecked(x)).collect();
    let na = neighbours(a, radius, include_center);
    let nb = neighbours(b, radius, include_center);
    let mut total = 0.0;
    for r in 0..a.len() {
        for s in 0..b.len() {
            let outer = codebook_kernel(la[r], lb[s], a.descriptor(r), b.descriptor(s));
            if outer == 0.0 {
                continue;
            }
            for &u in &na[r] {
                for &v in &nb[s] {
                    total += outer * codebook_kernel(la[u], lb[v], a.descriptor(u), b.descriptor(v));
                }
            }
        }
    }
    Ok(total)
}
