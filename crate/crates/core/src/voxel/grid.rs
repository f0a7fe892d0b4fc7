use std::fmt;

use super::VoxelError;

/// Cubic binary occupancy grid.
///
/// Voxel `(x, y, z)` lives at flat index `x + d·(y + d·z)`, the same order
/// the file format uses, so `x` varies fastest.
#[derive(Clone, PartialEq, Eq)]
pub struct VoxelGrid {
    resolution: usize,
    occupancy: Vec<bool>,
    meta: Option<String>,
}

impl fmt::Debug for VoxelGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VoxelGrid")
            .field("resolution", &self.resolution)
            .field("occupied", &self.count())
            .field("meta", &self.meta)
            .finish()
    }
}

impl VoxelGrid {
    /// Empty grid of side `resolution` (must be positive).
    pub fn new(resolution: usize) -> Self {
        assert!(resolution > 0, "voxel grid resolution must be positive");
        Self {
            resolution,
            occupancy: vec![false; resolution.pow(3)],
            meta: None,
        }
    }

    pub fn from_occupancy(resolution: usize, occupancy: Vec<bool>) -> Result<Self, VoxelError> {
        if resolution == 0 || resolution.checked_pow(3) != Some(occupancy.len()) {
            return Err(VoxelError::Contract(format!(
                "{} occupancy values for resolution {resolution}",
                occupancy.len()
            )));
        }
        Ok(Self {
            resolution,
            occupancy,
            meta: None,
        })
    }

    pub fn from_fn(resolution: usize, mut f: impl FnMut(usize, usize, usize) -> bool) -> Self {
        let mut grid = Self::new(resolution);
        let d = resolution;
        for z in 0..d {
            for y in 0..d {
                for x in 0..d {
                    grid.occupancy[x + d * (y + d * z)] = f(x, y, z);
                }
            }
        }
        grid
    }

    /// Solid axis-aligned box covering `lo..hi` (half-open) on each axis.
    pub fn solid_box(resolution: usize, lo: [usize; 3], hi: [usize; 3]) -> Self {
        Self::from_fn(resolution, |x, y, z| {
            (lo[0]..hi[0]).contains(&x) && (lo[1]..hi[1]).contains(&y) && (lo[2]..hi[2]).contains(&z)
        })
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.occupancy.len()
    }

    pub fn is_empty(&self) -> bool {
        !self.occupancy.iter().any(|&v| v)
    }

    pub fn occupancy(&self) -> &[bool] {
        &self.occupancy
    }

    pub fn meta(&self) -> Option<&str> {
        self.meta.as_deref()
    }

    pub fn with_meta(mut self, meta: impl Into<String>) -> Self {
        self.meta = Some(meta.into());
        self
    }

    pub fn set_meta(&mut self, meta: Option<String>) {
        self.meta = meta;
    }

    /// Appends `note` to the meta string, `;`-separated.
    pub fn push_meta(&mut self, note: &str) {
        self.meta = Some(match self.meta.take() {
            Some(m) if !m.is_empty() => format!("{m};{note}"),
            _ => note.to_string(),
        });
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.resolution * (y + self.resolution * z)
    }

    #[inline]
    pub fn coords(&self, index: usize) -> [usize; 3] {
        let d = self.resolution;
        [index % d, (index / d) % d, index / (d * d)]
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> bool {
        self.occupancy[self.index(x, y, z)]
    }

    /// Like [`get`](Self::get) but false outside the grid.
    pub fn get_signed(&self, x: isize, y: isize, z: isize) -> bool {
        let d = self.resolution as isize;
        if x < 0 || y < 0 || z < 0 || x >= d || y >= d || z >= d {
            return false;
        }
        self.get(x as usize, y as usize, z as usize)
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, z: usize, value: bool) {
        let i = self.index(x, y, z);
        self.occupancy[i] = value;
    }

    pub fn set_index(&mut self, index: usize, value: bool) {
        self.occupancy[index] = value;
    }

    /// Number of occupied voxels.
    pub fn count(&self) -> usize {
        self.occupancy.iter().filter(|&&v| v).count()
    }

    pub fn occupied(&self) -> impl Iterator<Item = [usize; 3]> + '_ {
        self.occupancy
            .iter()
            .enumerate()
            .filter(|(_, &v)| v)
            .map(|(i, _)| self.coords(i))
    }

    /// Number of voxels where the two grids disagree.
    pub fn hamming(&self, other: &VoxelGrid) -> Result<usize, VoxelError> {
        self.check_same(other)?;
        Ok(self
            .occupancy
            .iter()
            .zip(&other.occupancy)
            .filter(|(a, b)| a != b)
            .count())
    }

    /// True when every occupied voxel of `self` is occupied in `other`.
    pub fn is_subset_of(&self, other: &VoxelGrid) -> bool {
        self.resolution == other.resolution
            && self.occupancy.iter().zip(&other.occupancy).all(|(&a, &b)| !a || b)
    }

    pub fn complement(&self) -> VoxelGrid {
        Self {
            resolution: self.resolution,
            occupancy: self.occupancy.iter().map(|v| !v).collect(),
            meta: self.meta.clone(),
        }
    }

    /// Occupancy as `0.0`/`1.0` in flat index order.
    pub fn to_f32(&self) -> Vec<f32> {
        self.occupancy.iter().map(|&v| v as u8 as f32).collect()
    }

    pub(crate) fn check_same(&self, other: &VoxelGrid) -> Result<(), VoxelError> {
        if self.resolution != other.resolution {
            return Err(VoxelError::ResolutionMismatch {
                left: self.resolution,
                right: other.resolution,
            });
        }
        Ok(())
    }
}

/// Replicates each voxel into a `factor³` block.
pub fn upsample_nearest(grid: &VoxelGrid, factor: usize) -> VoxelGrid {
    assert!(factor >= 1, "upsample factor must be at least 1");
    let d = grid.resolution();
    let out = VoxelGrid::from_fn(d * factor, |x, y, z| grid.get(x / factor, y / factor, z / factor));
    match grid.meta() {
        Some(m) => out.with_meta(m),
        None => out,
    }
}

/// Real-valued cubic volume in the same index order as [`VoxelGrid`].
#[derive(Clone, Debug, PartialEq)]
pub struct ProbVolume {
    resolution: usize,
    values: Vec<f32>,
}

impl ProbVolume {
    pub fn new(resolution: usize, values: Vec<f32>) -> Result<Self, VoxelError> {
        if resolution == 0 || resolution.checked_pow(3) != Some(values.len()) {
            return Err(VoxelError::Contract(format!(
                "{} values for volume resolution {resolution}",
                values.len()
            )));
        }
        Ok(Self { resolution, values })
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> f32 {
        let d = self.resolution;
        self.values[x + d * (y + d * z)]
    }

    /// Occupied where the value is strictly above `threshold`.
    pub fn binarize(&self, threshold: f32) -> VoxelGrid {
        VoxelGrid {
            resolution: self.resolution,
            occupancy: self.values.iter().map(|&v| v > threshold).collect(),
            meta: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_is_x_fastest() {
        let g = VoxelGrid::new(4);
        assert_eq!(g.index(1, 0, 0), 1);
        assert_eq!(g.index(0, 1, 0), 4);
        assert_eq!(g.index(0, 0, 1), 16);
        assert_eq!(g.coords(g.index(3, 2, 1)), [3, 2, 1]);
    }

    #[test]
    fn upsample_identity_block_and_count() {
        let g = VoxelGrid::from_fn(5, |x, y, z| (x * 7 + y * 3 + z) % 4 == 0);
        assert_eq!(upsample_nearest(&g, 1), g);

        let mut one = VoxelGrid::new(3);
        one.set(1, 2, 0, true);
        let up = upsample_nearest(&one, 4);
        assert_eq!(up.count(), 64);
        assert!(up.occupied().all(|[x, y, z]| (4..8).contains(&x) && (8..12).contains(&y) && z < 4));

        assert_eq!(upsample_nearest(&g, 3).count(), g.count() * 27);
    }

    #[test]
    fn hamming_and_subset() {
        let a = VoxelGrid::solid_box(6, [1, 1, 1], [3, 3, 3]);
        let b = VoxelGrid::solid_box(6, [1, 1, 1], [4, 4, 4]);
        assert_eq!(a.hamming(&b).unwrap(), 27 - 8);
        assert!(a.is_subset_of(&b));
        assert!(!b.is_subset_of(&a));
        assert_eq!(a.hamming(&a.complement()).unwrap(), 216);
        assert!(a.hamming(&VoxelGrid::new(5)).is_err());
    }

    #[test]
    fn binarize_is_strict() {
        let v = ProbVolume::new(1, vec![0.5]).unwrap();
        assert!(v.binarize(0.5).is_empty());
        assert_eq!(v.binarize(0.49).count(), 1);
    }
}
