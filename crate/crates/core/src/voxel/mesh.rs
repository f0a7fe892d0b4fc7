//! Triangle meshes in a minimal OFF dialect and their voxelization.
//!
//! Accepted text: an optional `OFF` line, a `vertices faces [edges]` count
//! line, one `x y z` line per vertex, then one `n i0 i1 ... ` line per face.
//! Polygons with more than three corners are fan-triangulated. `#` starts a
//! comment; blank lines are ignored.

use std::collections::VecDeque;
use std::fs;
use std::path::Path;

use super::{VoxelError, VoxelGrid};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<[f64; 3]>,
    pub triangles: Vec<[usize; 3]>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fill {
    /// Voxels touched by a triangle.
    Surface,
    /// Surface plus everything not reachable from outside.
    Solid,
}

impl Mesh {
    pub fn parse_off(text: &str) -> Result<Mesh, VoxelError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());

        let err = |line: usize, message: String| VoxelError::MeshParse { line, message };
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| err(text.lines().count().max(1), format!("unexpected end of file, expected {what}")))
        };

        let (mut line, mut content) = next("counts")?;
        if content.eq_ignore_ascii_case("off") {
            (line, content) = next("counts")?;
        }
        let counts: Vec<usize> = content
            .split_whitespace()
            .map(|t| t.parse())
            .collect::<Result<_, _>>()
            .map_err(|e| err(line, format!("bad count line {content:?}: {e}")))?;
        if counts.len() < 2 {
            return Err(err(line, "count line needs vertex and face counts".into()));
        }
        let (nv, nf) = (counts[0], counts[1]);

        let mut mesh = Mesh::default();
        for _ in 0..nv {
            let (line, content) = next("vertex")?;
            let v: Vec<f64> = content
                .split_whitespace()
                .map(|t| t.parse())
                .collect::<Result<_, _>>()
                .map_err(|e| err(line, format!("bad vertex {content:?}: {e}")))?;
            if v.len() != 3 {
                return Err(err(line, format!("vertex needs 3 coordinates, got {}", v.len())));
            }
            if v.iter().any(|c| !c.is_finite()) {
                return Err(err(line, "non-finite vertex coordinate".into()));
            }
            mesh.vertices.push([v[0], v[1], v[2]]);
        }
        for _ in 0..nf {
            let (line, content) = next("face")?;
            let idx: Vec<usize> = content
                .split_whitespace()
                .map(|t| t.parse())
                .collect::<Result<_, _>>()
                .map_err(|e| err(line, format!("bad face {content:?}: {e}")))?;
            let Some((&n, corners)) = idx.split_first() else {
                return Err(err(line, "empty face".into()));
            };
            if n < 3 || corners.len() != n {
                return Err(err(line, format!("face declares {n} corners, lists {}", corners.len())));
            }
            if let Some(bad) = corners.iter().find(|&&i| i >= nv) {
                return Err(err(line, format!("vertex index {bad} out of range ({nv} vertices)")));
            }
            for k in 1..n - 1 {
                mesh.triangles.push([corners[0], corners[k], corners[k + 1]]);
            }
        }
        if let Some((line, _)) = lines.next() {
            return Err(err(line, "unexpected content after last face".into()));
        }
        Ok(mesh)
    }

    pub fn read_off(path: impl AsRef<Path>) -> Result<Mesh, VoxelError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| VoxelError::io(path, e))?;
        Self::parse_off(&text)
    }

    pub fn to_off(&self) -> String {
        let mut s = format!("OFF\n{} {} 0\n", self.vertices.len(), self.triangles.len());
        for v in &self.vertices {
            s.push_str(&format!("{} {} {}\n", v[0], v[1], v[2]));
        }
        for t in &self.triangles {
            s.push_str(&format!("3 {} {} {}\n", t[0], t[1], t[2]));
        }
        s
    }

    /// Axis-aligned unit cube `[0,1]³` as 12 triangles.
    pub fn unit_cube() -> Mesh {
        let vertices = (0..8)
            .map(|i| [(i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64])
            .collect();
        let quads = [
            [0, 2, 3, 1],
            [4, 5, 7, 6],
            [0, 1, 5, 4],
            [2, 6, 7, 3],
            [0, 4, 6, 2],
            [1, 3, 7, 5],
        ];
        let triangles = quads
            .iter()
            .flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]])
            .collect();
        Mesh { vertices, triangles }
    }

    pub fn bounds(&self) -> Option<([f64; 3], [f64; 3])> {
        let first = *self.vertices.first()?;
        Some(self.vertices.iter().fold((first, first), |(lo, hi), v| {
            (
                [lo[0].min(v[0]), lo[1].min(v[1]), lo[2].min(v[2])],
                [hi[0].max(v[0]), hi[1].max(v[1]), hi[2].max(v[2])],
            )
        }))
    }
}

/// Inset from the one-voxel margin so faces lying exactly on the fitted
/// bounds do not touch the neighbouring voxel layer.
const INSET: f64 = 1e-6;

/// Rasterizes `mesh` into a `resolution³` grid.
///
/// The mesh is scaled uniformly so its longest bounding-box side spans
/// `resolution − 2` voxels and centered, leaving at least one empty voxel
/// layer on every face of the grid.
pub fn voxelize_mesh(mesh: &Mesh, resolution: usize, fill: Fill) -> Result<VoxelGrid, VoxelError> {
    if mesh.triangles.is_empty() {
        return Err(VoxelError::EmptyMesh);
    }
    if resolution < 3 {
        return Err(VoxelError::Contract(format!("resolution {resolution} leaves no room inside the margin")));
    }
    let (lo, hi) = mesh.bounds().ok_or(VoxelError::EmptyMesh)?;
    let extent = (0..3).map(|a| hi[a] - lo[a]).fold(0.0, f64::max);
    if !(extent > 0.0 && extent.is_finite()) {
        return Err(VoxelError::Contract("mesh bounding box is degenerate".into()));
    }
    let d = resolution as f64;
    let scale = (d - 2.0 - 2.0 * INSET) / extent;
    let map = |p: [f64; 3]| -> [f64; 3] {
        std::array::from_fn(|a| d / 2.0 + (p[a] - (lo[a] + hi[a]) / 2.0) * scale)
    };

    let mut grid = VoxelGrid::new(resolution);
    for tri in &mesh.triangles {
        let v = tri.map(|i| map(mesh.vertices[i]));
        let mut range = [(0usize, 0usize); 3];
        for (a, r) in range.iter_mut().enumerate() {
            let tmin = v[0][a].min(v[1][a]).min(v[2][a]);
            let tmax = v[0][a].max(v[1][a]).max(v[2][a]);
            let first = (tmin.floor() as isize - 1).max(0) as usize;
            let last = (tmax.floor() as isize + 1).min(resolution as isize - 1) as usize;
            *r = (first, last);
        }
        for z in range[2].0..=range[2].1 {
            for y in range[1].0..=range[1].1 {
                for x in range[0].0..=range[0].1 {
                    if grid.get(x, y, z) {
                        continue;
                    }
                    let center = [x as f64 + 0.5, y as f64 + 0.5, z as f64 + 0.5];
                    if tri_box_overlap(center, 0.5, v) {
                        grid.set(x, y, z, true);
                    }
                }
            }
        }
    }
    if fill == Fill::Solid {
        fill_interior(&mut grid);
    }
    Ok(grid)
}

/// Marks every voxel not 6-connected to the grid boundary through empty
/// voxels.
fn fill_interior(grid: &mut VoxelGrid) {
    let d = grid.resolution();
    let mut outside = vec![false; grid.len()];
    let mut queue = VecDeque::new();
    for z in 0..d {
        for y in 0..d {
            for x in 0..d {
                let border = [x, y, z].iter().any(|&c| c == 0 || c == d - 1);
                let i = grid.index(x, y, z);
                if border && !grid.occupancy()[i] {
                    outside[i] = true;
                    queue.push_back([x, y, z]);
                }
            }
        }
    }
    while let Some(p) = queue.pop_front() {
        for (axis, delta) in [(0, -1isize), (0, 1), (1, -1), (1, 1), (2, -1), (2, 1)] {
            let c = p[axis] as isize + delta;
            if c < 0 || c >= d as isize {
                continue;
            }
            let mut q = p;
            q[axis] = c as usize;
            let i = grid.index(q[0], q[1], q[2]);
            if !outside[i] && !grid.occupancy()[i] {
                outside[i] = true;
                queue.push_back(q);
            }
        }
    }
    for (i, out) in outside.into_iter().enumerate() {
        if !out {
            grid.set_index(i, true);
        }
    }
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Separating-axis overlap test between a cube (center, half side) and a
/// triangle. Touching counts as overlap.
pub fn tri_box_overlap(center: [f64; 3], half: f64, tri: [[f64; 3]; 3]) -> bool {
    let v = tri.map(|p| sub(p, center));
    let edges = [sub(v[1], v[0]), sub(v[2], v[1]), sub(v[0], v[2])];

    // nine edge × box-axis directions
    for e in edges {
        for a in 0..3 {
            let mut axis = [0.0; 3];
            axis[a] = 1.0;
            let n = cross(axis, e);
            if separated(n, &v, half) {
                return false;
            }
        }
    }
    // box face normals
    for a in 0..3 {
        let lo = v[0][a].min(v[1][a]).min(v[2][a]);
        let hi = v[0][a].max(v[1][a]).max(v[2][a]);
        if lo > half || hi < -half {
            return false;
        }
    }
    // triangle plane
    let normal = cross(edges[0], edges[1]);
    let r = half * (normal[0].abs() + normal[1].abs() + normal[2].abs());
    dot(normal, v[0]).abs() <= r
}

fn separated(axis: [f64; 3], v: &[[f64; 3]; 3], half: f64) -> bool {
    let r = half * (axis[0].abs() + axis[1].abs() + axis[2].abs());
    if r == 0.0 {
        return false;
    }
    let p = v.map(|q| dot(axis, q));
    let lo = p[0].min(p[1]).min(p[2]);
    let hi = p[0].max(p[1]).max(p[2]);
    lo > r || hi < -r
}
