//! Procedural shapes, corruption protocols and dataset manifests.

mod corrupt;
mod dataset;
mod shapes;

pub use corrupt::{
    inject_random_noise, simulate_scan, CorruptionKind, CorruptionSpec, ViewDirection, SCAN_THICKNESS,
};
pub use dataset::{
    build_dataset, generate_dataset, generate_samples, Dataset, DatasetSpec, Manifest, ManifestRecord, Sample,
    Split, MANIFEST_NAME,
};
pub use shapes::{generate_shape, Category, ShapeDims, ShapeRecipe, MARGIN, MIN_RESOLUTION, UNITS};

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::voxel::VoxelError;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{0}")]
    Contract(String),
    #[error("{0}")]
    Parse(String),
    #[error(transparent)]
    Voxel(#[from] VoxelError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl DataError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        DataError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
