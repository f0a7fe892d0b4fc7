//! Thin-slab decomposition of a low-resolution grid along `+x` and the
//! inverse stacking of high-resolution images.
//!
//! A slab for step `t` holds `c` consecutive `x`-slices centered at
//! `floor(t / (d_h / d_l))`. Slab voxel `(i, j, k)` is grid voxel
//! `(center + k − c/2, i, j)`, stored at `(i·d_l + j)·c + k`, i.e. with the
//! thickness axis innermost. Images are `d×d` with pixel `(i, j)` at
//! `i·d + j` and map to voxel `(t, i, j)` when stacked.

use super::{ProbVolume, VoxelError, VoxelGrid};

/// Slicing axis. Grids are PCA-aligned first, so the first principal
/// component is always `+x`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SliceAxis {
    X,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SliceStep {
    /// Source slice index of the middle slice.
    pub center: usize,
    /// `d_l·d_l·c` occupancy values, thickness innermost.
    pub slab: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SliceSequence {
    pub steps: Vec<SliceStep>,
    pub axis: SliceAxis,
    pub d_l: usize,
    pub d_h: usize,
    pub c: usize,
}

impl SliceStep {
    /// Source indices of the slab's slices; negative or `≥ d_l` entries are
    /// zero padding.
    pub fn indices(&self, c: usize) -> Vec<isize> {
        let half = (c / 2) as isize;
        (-half..=half).map(|o| self.center as isize + o).collect()
    }
}

impl SliceSequence {
    /// Slice `k` of step `t` as a `d_l×d_l` image.
    pub fn slice(&self, t: usize, k: usize) -> Vec<bool> {
        let slab = &self.steps[t].slab;
        (0..self.d_l * self.d_l).map(|p| slab[p * self.c + k]).collect()
    }

    /// All slabs as `0/1` values in step order, ready to batch as
    /// `[d_h, 1, d_l, d_l, c]`.
    pub fn to_f32(&self) -> Vec<f32> {
        self.steps
            .iter()
            .flat_map(|s| s.slab.iter().map(|&v| v as u8 as f32))
            .collect()
    }
}

/// Splits `grid` into `d_h` overlapping slabs of `c` slices.
pub fn slice_volume(grid: &VoxelGrid, d_h: usize, c: usize) -> Result<SliceSequence, VoxelError> {
    let d_l = grid.resolution();
    if d_h < d_l || d_h % d_l != 0 {
        return Err(VoxelError::Contract(format!("d_h {d_h} is not a multiple of d_l {d_l}")));
    }
    if c % 2 == 0 {
        return Err(VoxelError::Contract(format!("slab thickness {c} must be odd")));
    }
    let ratio = d_h / d_l;
    let half = (c / 2) as isize;
    let steps = (0..d_h)
        .map(|t| {
            let center = t / ratio;
            let mut slab = vec![false; d_l * d_l * c];
            for (k, offset) in (-half..=half).enumerate() {
                let x = center as isize + offset;
                if x < 0 || x >= d_l as isize {
                    continue;
                }
                for i in 0..d_l {
                    for j in 0..d_l {
                        slab[(i * d_l + j) * c + k] = grid.get(x as usize, i, j);
                    }
                }
            }
            SliceStep { center, slab }
        })
        .collect();
    Ok(SliceSequence {
        steps,
        axis: SliceAxis::X,
        d_l,
        d_h,
        c,
    })
}

/// Stacks `d` images of `d×d` values into a volume, image `t` becoming the
/// plane `x = t`.
pub fn assemble_slices<I: AsRef<[f32]>>(images: &[I]) -> Result<ProbVolume, VoxelError> {
    let d = images.len();
    if d == 0 {
        return Err(VoxelError::Contract("no images to assemble".into()));
    }
    if let Some((t, bad)) = images.iter().enumerate().find(|(_, im)| im.as_ref().len() != d * d) {
        return Err(VoxelError::Contract(format!(
            "image {t} has {} pixels, expected {}",
            bad.as_ref().len(),
            d * d
        )));
    }
    let mut values = vec![0.0f32; d * d * d];
    for (t, image) in images.iter().enumerate() {
        let image = image.as_ref();
        for i in 0..d {
            for j in 0..d {
                values[t + d * (i + d * j)] = image[i * d + j];
            }
        }
    }
    ProbVolume::new(d, values)
}

/// Plane `x = t` of `grid` as an image.
pub fn plane(grid: &VoxelGrid, t: usize) -> Vec<f32> {
    let d = grid.resolution();
    let mut image = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            image[i * d + j] = grid.get(t, i, j) as u8 as f32;
        }
    }
    image
}

/// Nearest-neighbour in-plane enlargement of a `d×d` image.
pub fn upsample_image(image: &[bool], d: usize, factor: usize) -> Vec<f32> {
    let n = d * factor;
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = image[(i / factor) * d + j / factor] as u8 as f32;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::voxel::upsample_nearest;

    #[test]
    fn boundary_steps_are_zero_padded() {
        let g = VoxelGrid::from_fn(32, |_, _, _| true);
        let seq = slice_volume(&g, 128, 5).unwrap();
        assert_eq!(seq.steps.len(), 128);

        let first = &seq.steps[0];
        assert_eq!(first.indices(5), vec![-2, -1, 0, 1, 2]);
        assert!(seq.slice(0, 0).iter().all(|v| !v));
        assert!(seq.slice(0, 1).iter().all(|v| !v));
        assert!(seq.slice(0, 2).iter().all(|&v| v));

        let last = &seq.steps[127];
        assert_eq!(last.center, 31);
        assert_eq!(last.indices(5), vec![29, 30, 31, 32, 33]);
        assert!(seq.slice(127, 3).iter().all(|v| !v));
        assert!(seq.slice(127, 4).iter().all(|v| !v));
        assert!(seq.slice(127, 2).iter().all(|&v| v));
    }

    #[test]
    fn empty_grid_gives_empty_slabs() {
        let seq = slice_volume(&VoxelGrid::new(8), 32, 5).unwrap();
        assert!(seq.steps.iter().all(|s| s.slab.iter().all(|v| !v)));
    }

    #[test]
    fn contract_violations() {
        let g = VoxelGrid::new(8);
        assert!(slice_volume(&g, 20, 5).is_err());
        assert!(slice_volume(&g, 32, 4).is_err());
        assert!(assemble_slices(&[vec![0.0f32; 4], vec![0.0; 4]]).is_ok());
        assert!(assemble_slices(&[vec![0.0f32; 4], vec![0.0; 3]]).is_err());
        assert!(assemble_slices::<Vec<f32>>(&[]).is_err());
    }

    #[test]
    fn constant_images_fill_planes() {
        let images: Vec<Vec<f32>> = (0..4).map(|t| vec![t as f32 + 0.5; 16]).collect();
        let v = assemble_slices(&images).unwrap();
        for t in 0..4 {
            for i in 0..4 {
                for j in 0..4 {
                    assert_eq!(v.get(t, i, j), t as f32 + 0.5);
                }
            }
        }
    }

    #[test]
    fn single_pixel_lands_at_step_row_column() {
        let mut images = vec![vec![0.0f32; 36]; 6];
        images[4][2 * 6 + 5] = 1.0;
        let v = assemble_slices(&images).unwrap().binarize(0.5);
        assert_eq!(v.occupied().collect::<Vec<_>>(), vec![[4, 2, 5]]);
    }

    #[test]
    fn upsampled_centers_reassemble_upsampled_grid() {
        let g = VoxelGrid::from_fn(8, |x, y, z| (x + 2 * y + 3 * z) % 5 < 2);
        let seq = slice_volume(&g, 32, 5).unwrap();
        let images: Vec<Vec<f32>> = (0..32).map(|t| upsample_image(&seq.slice(t, 2), 8, 4)).collect();
        let v = assemble_slices(&images).unwrap().binarize(0.5);
        assert_eq!(v, upsample_nearest(&g, 4));
    }

    #[test]
    fn plane_matches_assembly() {
        let g = VoxelGrid::from_fn(6, |x, y, z| (x * y + z) % 3 == 0);
        let images: Vec<Vec<f32>> = (0..6).map(|t| plane(&g, t)).collect();
        assert_eq!(assemble_slices(&images).unwrap().binarize(0.5), g);
    }
}
