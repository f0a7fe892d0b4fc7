//! Occupancy grids, the `VOXG` file format, mesh voxelization, principal-axis
//! alignment and slab slicing.

mod grid;
pub mod io;
mod mesh;
mod pca;
mod slices;

pub use grid::{upsample_nearest, ProbVolume, VoxelGrid};
pub use io::{read_grid, write_grid};
pub use mesh::{tri_box_overlap, voxelize_mesh, Fill, Mesh};
pub use pca::{apply_rotation, grid_center, moments, off_diagonal_ratio, pca_align, principal_axes, Alignment, DEGENERATE_GAP};
pub use slices::{assemble_slices, plane, slice_volume, upsample_image, SliceAxis, SliceSequence, SliceStep};

use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum VoxelError {
    #[error("{0}")]
    Contract(String),
    #[error("resolution mismatch: {left} vs {right}")]
    ResolutionMismatch { left: usize, right: usize },
    #[error("bad magic {0:?}, expected \"VOXG\"")]
    BadMagic([u8; 4]),
    #[error("unsupported voxel file version {0}")]
    UnsupportedVersion(u32),
    #[error("truncated voxel file: expected {expected} bytes, got {got}")]
    Truncated { expected: usize, got: usize },
    #[error("voxel file resolution {0} is zero or exceeds the supported maximum")]
    ResolutionOverflow(u32),
    #[error("malformed voxel file: {0}")]
    Malformed(String),
    #[error("mesh line {line}: {message}")]
    MeshParse { line: usize, message: String },
    #[error("mesh has no triangles")]
    EmptyMesh,
    #[error("alignment undefined: {0}")]
    AlignmentUndefined(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl VoxelError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        VoxelError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[cfg(test)]
mod properties;
