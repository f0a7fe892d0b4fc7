//! Random deletion and single-view scan corruption.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::voxel::VoxelGrid;

use super::DataError;

/// Voxels kept per ray by [`simulate_scan`], counting the first hit.
pub const SCAN_THICKNESS: usize = 2;

/// Ray direction of a simulated scan; `+x` rays enter at `x = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ViewDirection {
    pub axis: usize,
    pub positive: bool,
}

impl ViewDirection {
    pub const ALL: [ViewDirection; 6] = [
        ViewDirection { axis: 0, positive: true },
        ViewDirection { axis: 0, positive: false },
        ViewDirection { axis: 1, positive: true },
        ViewDirection { axis: 1, positive: false },
        ViewDirection { axis: 2, positive: true },
        ViewDirection { axis: 2, positive: false },
    ];
}

impl fmt::Display for ViewDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.positive { '+' } else { '-' };
        write!(f, "{sign}{}", ['x', 'y', 'z'][self.axis])
    }
}

impl FromStr for ViewDirection {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ViewDirection::ALL
            .into_iter()
            .find(|d| d.to_string() == s)
            .ok_or_else(|| DataError::Parse(format!("bad view direction {s:?}, expected one of ±x ±y ±z")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CorruptionKind {
    RandomDeletion { fraction: f64 },
    SingleViewScan { direction: ViewDirection },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorruptionSpec {
    pub kind: CorruptionKind,
    pub seed: u64,
}

impl CorruptionSpec {
    pub fn deletion(fraction: f64, seed: u64) -> Result<Self, DataError> {
        if !(0.0..=1.0).contains(&fraction) {
            return Err(DataError::Contract(format!("noise fraction {fraction} outside [0, 1]")));
        }
        Ok(Self {
            kind: CorruptionKind::RandomDeletion { fraction },
            seed,
        })
    }

    pub fn scan(direction: ViewDirection) -> Self {
        Self {
            kind: CorruptionKind::SingleViewScan { direction },
            seed: 0,
        }
    }

    /// Same corruption, reseeded for one sample.
    pub fn for_sample(&self, sample_seed: u64) -> Self {
        Self {
            seed: self.seed ^ sample_seed,
            ..*self
        }
    }

    pub fn apply(&self, grid: &VoxelGrid) -> VoxelGrid {
        match self.kind {
            CorruptionKind::RandomDeletion { fraction } => inject_random_noise(grid, fraction, self.seed),
            CorruptionKind::SingleViewScan { direction } => simulate_scan(grid, direction),
        }
    }
}

/// `deletion:<fraction>:<seed>` or `scan:<direction>`.
impl fmt::Display for CorruptionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            CorruptionKind::RandomDeletion { fraction } => write!(f, "deletion:{fraction}:{}", self.seed),
            CorruptionKind::SingleViewScan { direction } => write!(f, "scan:{direction}"),
        }
    }
}

impl FromStr for CorruptionSpec {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || DataError::Parse(format!("bad corruption {s:?}, expected deletion:<p>:<seed> or scan:<dir>"));
        match parts.as_slice() {
            ["deletion", p, seed] => {
                let p = p.parse().map_err(|_| bad())?;
                let seed = seed.parse().map_err(|_| bad())?;
                CorruptionSpec::deletion(p, seed)
            }
            ["deletion", p] => CorruptionSpec::deletion(p.parse().map_err(|_| bad())?, 0),
            ["scan", dir] => Ok(CorruptionSpec::scan(dir.parse()?)),
            _ => Err(bad()),
        }
    }
}

/// Deletes each occupied voxel independently with probability `fraction`.
pub fn inject_random_noise(grid: &VoxelGrid, fraction: f64, seed: u64) -> VoxelGrid {
    assert!((0.0..=1.0).contains(&fraction), "noise fraction {fraction} outside [0, 1]");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = grid.clone();
    for (i, &occupied) in grid.occupancy().iter().enumerate() {
        if occupied && rng.random::<f64>() < fraction {
            out.set_index(i, false);
        }
    }
    out
}

/// Orthographic single-view capture: along every ray keep the first
/// [`SCAN_THICKNESS`] occupied voxels and clear the rest.
pub fn simulate_scan(grid: &VoxelGrid, direction: ViewDirection) -> VoxelGrid {
    let d = grid.resolution();
    let mut out = VoxelGrid::new(d);
    out.set_meta(grid.meta().map(str::to_string));
    let (u_axis, v_axis) = match direction.axis {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    for u in 0..d {
        for v in 0..d {
            let mut kept = 0;
            for step in 0..d {
                let w = if direction.positive { step } else { d - 1 - step };
                let mut p = [0usize; 3];
                p[direction.axis] = w;
                p[u_axis] = u;
                p[v_axis] = v;
                if grid.get(p[0], p[1], p[2]) {
                    out.set(p[0], p[1], p[2], true);
                    kept += 1;
                    if kept == SCAN_THICKNESS {
                        break;
                    }
                }
            }
        }
    }
    out
}
