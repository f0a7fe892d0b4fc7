//! Procedural furniture-like solids.
//!
//! Every shape lives in a continuous cube of [`UNITS`] lattice units per edge
//! and is rasterized by sampling voxel centers, so one recipe gives
//! geometrically consistent grids at any resolution. Legs, poles and lamp
//! shades are round, which leaves sub-voxel detail for high resolutions.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::voxel::VoxelGrid;

use super::DataError;

/// Lattice units per cube edge.
pub const UNITS: f64 = 64.0;
/// Shapes keep at least this many units of empty border (one voxel at 16³).
pub const MARGIN: u32 = 4;
/// Smallest resolution shapes are defined for.
pub const MIN_RESOLUTION: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Category {
    Box,
    Table,
    Chair,
    LShape,
    Lamp,
}

impl Category {
    pub const ALL: [Category; 5] = [
        Category::Box,
        Category::Table,
        Category::Chair,
        Category::LShape,
        Category::Lamp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Category::Box => "box",
            Category::Table => "table",
            Category::Chair => "chair",
            Category::LShape => "lshape",
            Category::Lamp => "lamp",
        }
    }

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&c| c == self).unwrap()
    }

    /// Human-readable sampling ranges, in lattice units.
    pub fn ranges(self) -> &'static str {
        match self {
            Category::Box => "size_x 28..=48 size_y 16..=36 size_z 12..=28 (step 4)",
            Category::Table => "top_x 36..=52 top_y 24..=36 thickness 4..=8 height 24..=40 leg_radius 3..=5 (flat extents step 4)",
            Category::Chair => {
                "seat_x 24..=32 seat_y 24..=32 seat_height 16..=24 thickness 4..=8 back_height 16..=28 leg_radius 3..=4 (flat extents step 4)"
            }
            Category::LShape => "long 36..=52 short 20..=32 width 8..=16 thickness 8..=12 (step 4)",
            Category::Lamp => {
                "base_radius 8..=12 base_height 4..=8 pole_radius 3..=4 height 40..=52 shade_bottom 10..=16 shade_top 4..=8 shade_height 8..=16 (heights step 4)"
            }
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Category {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Category::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| DataError::Parse(format!("unknown category {s:?}")))
    }
}

/// Per-category dimensions in lattice units.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShapeDims {
    Box {
        size: [u32; 3],
    },
    Table {
        top: [u32; 2],
        thickness: u32,
        height: u32,
        leg_radius: u32,
    },
    Chair {
        seat: [u32; 2],
        seat_height: u32,
        thickness: u32,
        back_height: u32,
        leg_radius: u32,
    },
    LShape {
        long: u32,
        short: u32,
        width: u32,
        thickness: u32,
    },
    Lamp {
        base_radius: u32,
        base_height: u32,
        pole_radius: u32,
        height: u32,
        shade_bottom: u32,
        shade_top: u32,
        shade_height: u32,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ShapeRecipe {
    pub category: Category,
    pub dims: ShapeDims,
    pub seed: u64,
}

impl ShapeRecipe {
    /// Centered box with the given extents in lattice units.
    pub fn boxed(size: [u32; 3]) -> Self {
        Self {
            category: Category::Box,
            dims: ShapeDims::Box { size },
            seed: 0,
        }
    }

    /// Draws dimensions from the category's ranges. Flat extents are
    /// multiples of 4 units; radii are free.
    pub fn sample(category: Category, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |lo: u32, hi: u32, step: u32| step * rng.random_range(lo.div_ceil(step)..=hi / step);
        let dims = match category {
            Category::Box => ShapeDims::Box {
                size: [draw(28, 48, 4), draw(16, 36, 4), draw(12, 28, 4)],
            },
            Category::Table => {
                let top = [draw(36, 52, 4), draw(24, 36, 4)];
                let thickness = draw(4, 8, 4);
                let height = draw(24, 40, 4);
                ShapeDims::Table {
                    top,
                    thickness,
                    height,
                    leg_radius: draw(3, 5, 1),
                }
            }
            Category::Chair => {
                let seat = [draw(24, 32, 4), draw(24, 32, 4)];
                let seat_height = draw(16, 24, 4);
                let thickness = draw(4, 8, 4);
                let back_height = draw(16, 28, 4);
                ShapeDims::Chair {
                    seat,
                    seat_height,
                    thickness,
                    back_height,
                    leg_radius: draw(3, 4, 1),
                }
            }
            Category::LShape => ShapeDims::LShape {
                long: draw(36, 52, 4),
                short: draw(20, 32, 4),
                width: draw(8, 16, 4),
                thickness: draw(8, 12, 4),
            },
            Category::Lamp => {
                let base_radius = draw(8, 12, 1);
                let base_height = draw(4, 8, 4);
                let pole_radius = draw(3, 4, 1);
                let height = draw(40, 52, 4);
                let shade_bottom = draw(10, 16, 1);
                let shade_top = draw(4, 8, 1);
                let shade_height = draw(8, 16, 4);
                ShapeDims::Lamp {
                    base_radius,
                    base_height,
                    pole_radius,
                    height,
                    shade_bottom,
                    shade_top,
                    shade_height,
                }
            }
        };
        Self { category, dims, seed }
    }

    /// Half-extents of the bounding box in lattice units.
    fn half_extents(&self) -> [f64; 3] {
        let h = |v: u32| v as f64 / 2.0;
        match self.dims {
            ShapeDims::Box { size } => size.map(h),
            ShapeDims::Table { top, height, .. } => [h(top[0]), h(top[1]), h(height)],
            ShapeDims::Chair {
                seat,
                seat_height,
                back_height,
                ..
            } => [h(seat[0]), h(seat[1]), h(seat_height + back_height)],
            ShapeDims::LShape { long, short, thickness, .. } => [h(long), h(short), h(thickness)],
            ShapeDims::Lamp {
                base_radius,
                height,
                shade_bottom,
                ..
            } => {
                let r = base_radius.max(shade_bottom) as f64;
                [r, r, h(height)]
            }
        }
    }

    /// Translation that puts every flat face on a multiple of 4 units, which
    /// is a voxel face at every supported resolution.
    fn shift(&self) -> [f64; 3] {
        self.half_extents().map(|h| if h.rem_euclid(4.0) == 2.0 { 2.0 } else { 0.0 })
    }

    fn validate(&self) -> Result<(), DataError> {
        let limit = UNITS / 2.0 - MARGIN as f64;
        let half = self.half_extents();
        let shift = self.shift();
        if (0..3).any(|a| half[a] <= 0.0 || half[a] + shift[a] > limit) {
            return Err(DataError::Contract(format!(
                "{} recipe {:?} does not fit inside the {MARGIN}-unit margin",
                self.category, self.dims
            )));
        }
        let ok = match self.dims {
            ShapeDims::Table { thickness, height, leg_radius, top } => {
                thickness < height && 4 * leg_radius < top[0].min(top[1])
            }
            ShapeDims::Chair {
                seat,
                thickness,
                seat_height,
                leg_radius,
                ..
            } => thickness < seat_height && 4 * leg_radius < seat[0].min(seat[1]) && thickness < seat[0],
            ShapeDims::LShape { long, short, width, .. } => width < long && width < short,
            ShapeDims::Lamp {
                base_height,
                height,
                shade_height,
                pole_radius,
                shade_top,
                base_radius,
                ..
            } => base_height + shade_height < height && pole_radius < base_radius && shade_top > 0,
            ShapeDims::Box { .. } => true,
        };
        if !ok {
            return Err(DataError::Contract(format!("inconsistent {} recipe {:?}", self.category, self.dims)));
        }
        Ok(())
    }

    /// Point membership with `p` relative to the cube center, lattice units.
    fn contains(&self, p: [f64; 3]) -> bool {
        let [hx, hy, hz] = self.half_extents();
        let in_box = |p: [f64; 3], lo: [f64; 3], hi: [f64; 3]| (0..3).all(|a| p[a] >= lo[a] && p[a] < hi[a]);
        let z0 = -hz;
        match self.dims {
            ShapeDims::Box { .. } => in_box(p, [-hx, -hy, -hz], [hx, hy, hz]),
            ShapeDims::Table {
                thickness,
                leg_radius,
                ..
            } => {
                let t = thickness as f64;
                let r = leg_radius as f64;
                if in_box(p, [-hx, -hy, hz - t], [hx, hy, hz]) {
                    return true;
                }
                let legs = leg_centers(hx - 1.5 * r, hy - 1.5 * r);
                p[2] >= z0 && p[2] < hz - t && in_any_disc(p, &legs, r)
            }
            ShapeDims::Chair {
                seat_height,
                thickness,
                leg_radius,
                ..
            } => {
                let t = thickness as f64;
                let r = leg_radius as f64;
                let seat_top = z0 + seat_height as f64;
                if in_box(p, [-hx, -hy, seat_top - t], [hx, hy, seat_top]) {
                    return true;
                }
                // backrest along the -x edge
                if in_box(p, [-hx, -hy, seat_top], [-hx + t, hy, hz]) {
                    return true;
                }
                let legs = leg_centers(hx - 1.5 * r, hy - 1.5 * r);
                p[2] >= z0 && p[2] < seat_top - t && in_any_disc(p, &legs, r)
            }
            ShapeDims::LShape { width, .. } => {
                let w = width as f64;
                in_box(p, [-hx, -hy, -hz], [hx, -hy + w, hz]) || in_box(p, [-hx, -hy, -hz], [-hx + w, hy, hz])
            }
            ShapeDims::Lamp {
                base_radius,
                base_height,
                pole_radius,
                shade_bottom,
                shade_top,
                shade_height,
                ..
            } => {
                let rho = (p[0] * p[0] + p[1] * p[1]).sqrt();
                let z = p[2] - z0;
                let top = 2.0 * hz;
                let shade_start = top - shade_height as f64;
                if z < 0.0 || z >= top {
                    return false;
                }
                if z < base_height as f64 {
                    return rho < base_radius as f64;
                }
                if z >= shade_start {
                    let s = (z - shade_start) / shade_height as f64;
                    let radius = shade_bottom as f64 + s * (shade_top as f64 - shade_bottom as f64);
                    return rho < radius;
                }
                rho < pole_radius as f64
            }
        }
    }
}

fn leg_centers(ox: f64, oy: f64) -> [[f64; 2]; 4] {
    [[-ox, -oy], [ox, -oy], [-ox, oy], [ox, oy]]
}

fn in_any_disc(p: [f64; 3], centers: &[[f64; 2]], r: f64) -> bool {
    centers.iter().any(|c| {
        let dx = p[0] - c[0];
        let dy = p[1] - c[1];
        dx * dx + dy * dy < r * r
    })
}

/// Rasterizes `recipe` at `resolution³` by sampling voxel centers.
pub fn generate_shape(recipe: &ShapeRecipe, resolution: usize) -> Result<VoxelGrid, DataError> {
    if resolution < MIN_RESOLUTION {
        return Err(DataError::Contract(format!(
            "resolution {resolution} is below the minimum {MIN_RESOLUTION}"
        )));
    }
    recipe.validate()?;
    let unit = UNITS / resolution as f64;
    let shift = recipe.shift();
    let center = |i: usize, a: usize| (i as f64 + 0.5) * unit - UNITS / 2.0 - shift[a];
    let grid = VoxelGrid::from_fn(resolution, |x, y, z| recipe.contains([center(x, 0), center(y, 1), center(z, 2)]));
    if grid.is_empty() {
        return Err(DataError::Contract(format!(
            "{} recipe {:?} is empty at resolution {resolution}",
            recipe.category, recipe.dims
        )));
    }
    Ok(grid.with_meta(format!("{}:{}", recipe.category, recipe.seed)))
}
