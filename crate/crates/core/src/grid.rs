//! Descriptor grids: one image at one resolution, as an H×W map of D-vectors.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

/// Input resolution of the image a grid was extracted from (longer side, pixels).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Resolution {
    R512,
    R1024,
    Custom(u32),
}

impl Resolution {
    pub fn from_pixels(pixels: u32) -> Self {
        match pixels {
            512 => Resolution::R512,
            1024 => Resolution::R1024,
            p => Resolution::Custom(p),
        }
    }

    pub fn pixels(self) -> u32 {
        match self {
            Resolution::R512 => 512,
            Resolution::R1024 => 1024,
            Resolution::Custom(p) => p,
        }
    }
}

impl fmt::Display for Resolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.pixels())
    }
}

/// A cell of a descriptor grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GridPosition {
    pub y: usize,
    pub x: usize,
}

impl GridPosition {
    pub const fn new(y: usize, x: usize) -> Self {
        Self { y, x }
    }
}

/// Local descriptors of one image, row-major (y, then x, then channel).
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorGrid {
    image_id: String,
    resolution: Resolution,
    height: usize,
    width: usize,
    depth: usize,
    values: Vec<f64>,
}

impl DescriptorGrid {
    pub fn new(
        image_id: impl Into<String>,
        resolution: Resolution,
        height: usize,
        width: usize,
        depth: usize,
        values: Vec<f64>,
    ) -> Result<Self> {
        if height == 0 || width == 0 || depth == 0 {
            return Err(Error::Validation(format!(
                "grid dimensions must be positive, got {height}x{width}x{depth}"
            )));
        }
        let expected = height
            .checked_mul(width)
            .and_then(|hw| hw.checked_mul(depth))
            .ok_or_else(|| Error::Validation("grid size overflows".into()))?;
        if values.len() != expected {
            return Err(Error::Validation(format!(
                "expected {expected} values for {height}x{width}x{depth}, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "non-finite value {} at flat index {i}",
                values[i]
            )));
        }
        Ok(Self {
            image_id: image_id.into(),
            resolution,
            height,
            width,
            depth,
            values,
        })
    }

    /// Builds a grid from per-cell vectors given in row-major order.
    pub fn from_rows(
        image_id: impl Into<String>,
        resolution: Resolution,
        height: usize,
        width: usize,
        cells: &[Vec<f64>],
    ) -> Result<Self> {
        let depth = cells.first().map_or(0, Vec::len);
        if cells.iter().any(|c| c.len() != depth) {
            return Err(Error::Validation("cells have differing depths".into()));
        }
        let values = cells.iter().flatten().copied().collect();
        Self::new(image_id, resolution, height, width, depth, values)
    }

    pub fn image_id(&self) -> &str {
        &self.image_id
    }

    pub fn resolution(&self) -> Resolution {
        self.resolution
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn len(&self) -> usize {
        self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn with_image_id(mut self, image_id: impl Into<String>) -> Self {
        self.image_id = image_id.into();
        self
    }

    pub fn index_of(&self, p: GridPosition) -> usize {
        p.y * self.width + p.x
    }

    pub fn position_of(&self, index: usize) -> GridPosition {
        GridPosition::new(index / self.width, index % self.width)
    }

    /// Descriptor stored at flat cell index `index`.
    pub fn descriptor(&self, index: usize) -> &[f64] {
        &self.values[index * self.depth..(index + 1) * self.depth]
    }

    pub fn descriptor_at(&self, p: GridPosition) -> &[f64] {
        self.descriptor(self.index_of(p))
    }

    pub fn descriptors(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.depth)
    }

    pub fn contains(&self, p: GridPosition) -> bool {
        p.y < self.height && p.x < self.width
    }

    /// Scales every cell to unit l2 norm; zero cells stay zero.
    pub fn normalize_descriptors(&mut self) {
        for cell in self.values.chunks_exact_mut(self.depth) {
            let n = libm::sqrt(cell.iter().map(|v| v * v).sum::<f64>());
            if n > 0.0 {
                cell.iter_mut().for_each(|v| *v /= n);
            }
        }
    }

    pub fn normalized(mut self) -> Self {
        self.normalize_descriptors();
        self
    }

    /// True when every cell has unit norm (within `tol`) or is exactly zero.
    pub fn is_normalized(&self, tol: f64) -> bool {
        self.descriptors().all(|cell| {
            let sq: f64 = cell.iter().map(|v| v * v).sum();
            sq == 0.0 || libm::fabs(libm::sqrt(sq) - 1.0) <= tol
        })
    }

    /// Positions within Chebyshev distance `radius` of `p`, excluding `p`, row-major.
    pub fn neighborhood(&self, p: GridPosition, radius: usize) -> Result<Vec<GridPosition>> {
        self.neighborhood_with(p, radius, false)
    }

    /// Like [`neighborhood`](Self::neighborhood), optionally keeping `p` itself.
    pub fn neighborhood_with(
        &self,
        p: GridPosition,
        radius: usize,
        include_center: bool,
    ) -> Result<Vec<GridPosition>> {
        if !self.contains(p) {
            return Err(Error::Argument(format!(
                "position ({}, {}) outside {}x{} grid",
                p.y, p.x, self.height, self.width
            )));
        }
        if radius == 0 {
            return Err(Error::Argument("neighborhood radius must be >= 1".into()));
        }
        let mut out = Vec::with_capacity((2 * radius + 1) * (2 * radius + 1));
        self.for_each_neighbor(self.index_of(p), radius, include_center, |q| {
            out.push(self.position_of(q))
        });
        Ok(out)
    }

    /// Visits flat indices of the neighborhood of cell `index` in row-major order.
    pub(crate) fn for_each_neighbor(
        &self,
        index: usize,
        radius: usize,
        include_center: bool,
        mut f: impl FnMut(usize),
    ) {
        let p = self.position_of(index);
        let y0 = p.y.saturating_sub(radius);
        let y1 = (p.y + radius).min(self.height - 1);
        let x0 = p.x.saturating_sub(radius);
        let x1 = (p.x + radius).min(self.width - 1);
        for y in y0..=y1 {
            for x in x0..=x1 {
                if !include_center && y == p.y && x == p.x {
                    continue;
                }
                f(y * self.width + x);
            }
        }
    }
}
