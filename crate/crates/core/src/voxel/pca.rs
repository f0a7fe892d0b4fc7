//! Principal-axis alignment of occupancy grids.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};

use super::{VoxelError, VoxelGrid};

/// Eigenvalues closer than this fraction of the largest are treated as equal.
pub const DEGENERATE_GAP: f64 = 1e-3;

/// Result of [`pca_align`].
#[derive(Clone, Debug)]
pub struct Alignment {
    pub grid: VoxelGrid,
    /// Rows are the principal directions in descending eigenvalue order;
    /// aligned offsets are `rotation · (p − pivot)`. Orthonormal, possibly
    /// with determinant −1 when the moment-based signs require a reflection.
    pub rotation: Matrix3<f64>,
    /// Source point moved to [`grid_center`] by the alignment.
    pub pivot: Vector3<f64>,
    /// Descending covariance eigenvalues.
    pub eigenvalues: [f64; 3],
    /// Some eigenvalues were within [`DEGENERATE_GAP`] of each other and
    /// their directions were taken from the coordinate axes.
    pub degenerate: bool,
}

/// Centroid and covariance of occupied voxel centers.
pub fn moments(grid: &VoxelGrid) -> (Vector3<f64>, Matrix3<f64>, usize) {
    let mut n = 0usize;
    let mut sum = Vector3::zeros();
    for [x, y, z] in grid.occupied() {
        sum += Vector3::new(x as f64 + 0.5, y as f64 + 0.5, z as f64 + 0.5);
        n += 1;
    }
    if n == 0 {
        return (Vector3::zeros(), Matrix3::zeros(), 0);
    }
    let centroid = sum / n as f64;
    let mut cov = Matrix3::zeros();
    for [x, y, z] in grid.occupied() {
        let p = Vector3::new(x as f64 + 0.5, y as f64 + 0.5, z as f64 + 0.5) - centroid;
        cov += p * p.transpose();
    }
    (centroid, cov / n as f64, n)
}

/// Principal directions of `grid` with sign and degeneracy rules applied.
pub fn principal_axes(grid: &VoxelGrid) -> Result<(Matrix3<f64>, [f64; 3], bool), VoxelError> {
    let (centroid, cov, n) = moments(grid);
    if n < 3 {
        return Err(VoxelError::AlignmentUndefined(format!("{n} occupied voxels")));
    }
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.map(|i| eig.eigenvalues[i]);
    if values[1] <= values[0] * 1e-12 {
        return Err(VoxelError::AlignmentUndefined("occupied voxels are collinear".into()));
    }
    let mut axes: [Vector3<f64>; 3] = order.map(|i| eig.eigenvectors.column(i).into_owned());

    // Group near-equal eigenvalues; inside a group the basis is arbitrary, so
    // take it from the coordinate axes instead.
    let tol = DEGENERATE_GAP * values[0];
    let mut degenerate = false;
    let mut start = 0;
    while start < 3 {
        let mut end = start + 1;
        while end < 3 && values[end - 1] - values[end] <= tol {
            end += 1;
        }
        if end - start > 1 {
            degenerate = true;
            snap_group(&mut axes, start, end);
        }
        start = end;
    }

    let points: Vec<Vector3<f64>> = grid
        .occupied()
        .map(|[x, y, z]| Vector3::new(x as f64 + 0.5, y as f64 + 0.5, z as f64 + 0.5) - centroid)
        .collect();
    for axis in axes.iter_mut() {
        let m3: f64 = points.iter().map(|p| p.dot(axis).powi(3)).sum();
        let scale: f64 = points.iter().map(|p| p.dot(axis).abs().powi(3)).sum();
        let flip = if m3.abs() <= 1e-9 * scale.max(1e-12) {
            // symmetric along this axis: point toward the dominant +axis
            let k = axis.iamax();
            axis[k] < 0.0
        } else {
            m3 < 0.0
        };
        if flip {
            *axis = -*axis;
        }
    }
    let rotation = Matrix3::from_rows(&[axes[0].transpose(), axes[1].transpose(), axes[2].transpose()]);
    Ok((rotation, values, degenerate))
}

/// Replaces `axes[start..end]` with an orthonormal basis of the same subspace
/// built from the coordinate axes that project most strongly onto it.
fn snap_group(axes: &mut [Vector3<f64>; 3], start: usize, end: usize) {
    let span: Vec<Vector3<f64>> = axes[start..end].to_vec();
    let project = |v: Vector3<f64>| span.iter().fold(Vector3::zeros(), |acc, s| acc + s * s.dot(&v));
    let mut candidates: Vec<(f64, Vector3<f64>)> = (0..3)
        .map(|k| {
            let p = project(Vector3::ith(k, 1.0));
            (p.norm(), p)
        })
        .collect();
    // stable: ties keep x before y before z
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut basis: Vec<Vector3<f64>> = Vec::new();
    for (_, c) in candidates {
        if basis.len() == end - start {
            break;
        }
        let mut v = c;
        for b in &basis {
            v -= b * b.dot(&v);
        }
        if v.norm() > 1e-6 {
            basis.push(v.normalize());
        }
    }
    axes[start..end].copy_from_slice(&basis);
}

/// Rotates `grid` so its principal directions map to `+x, +y, +z`.
///
/// The pivot is the occupied centroid rounded to the nearest voxel corner; it
/// lands on the grid center `floor(d/2)` in every axis. Axis permutations and
/// reflections therefore map voxel centers onto voxel centers.
/// Each output voxel takes the value of the source voxel containing its
/// pre-image; sources outside the grid count as empty.
pub fn pca_align(grid: &VoxelGrid) -> Result<Alignment, VoxelError> {
    let (rotation, eigenvalues, degenerate) = principal_axes(grid)?;
    let (centroid, _, _) = moments(grid);
    let pivot = centroid.map(f64::round);
    let mut out = apply_rotation(grid, &rotation, &pivot, &grid_center(grid.resolution()));
    out.set_meta(grid.meta().map(str::to_string));
    if degenerate {
        out.push_meta("pca:degenerate-eigenvalues");
    }
    Ok(Alignment {
        grid: out,
        rotation,
        pivot,
        eigenvalues,
        degenerate,
    })
}

/// Resamples `grid` under `q = rotation · (p − from) + to` with nearest-voxel
/// pull: output voxel `q` reads source voxel `floor(from + rotationᵀ(q − to))`.
pub fn apply_rotation(
    grid: &VoxelGrid,
    rotation: &Matrix3<f64>,
    from: &Vector3<f64>,
    to: &Vector3<f64>,
) -> VoxelGrid {
    let inverse = rotation.transpose();
    VoxelGrid::from_fn(grid.resolution(), |x, y, z| {
        let q = Vector3::new(x as f64 + 0.5, y as f64 + 0.5, z as f64 + 0.5);
        let p = from + inverse * (q - to);
        // nudge off exact cell faces so rounding is consistent
        let c = p.map(|v| (v + 1e-9).floor() as isize);
        grid.get_signed(c[0], c[1], c[2])
    })
}

/// Corner nearest the middle of a `d`-grid, where [`pca_align`] puts the centroid.
pub fn grid_center(d: usize) -> Vector3<f64> {
    Vector3::repeat((d / 2) as f64)
}

/// Off-diagonal mass of the occupied covariance relative to its trace.
pub fn off_diagonal_ratio(grid: &VoxelGrid) -> f64 {
    let (_, cov, _) = moments(grid);
    let off = cov[(0, 1)].abs() + cov[(0, 2)].abs() + cov[(1, 2)].abs();
    off / cov.trace().max(f64::MIN_POSITIVE)
}
