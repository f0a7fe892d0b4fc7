use nalgebra::{Matrix3, Rotation3, Vector3};
use proptest::prelude::*;

use super::*;

fn arb_grid(max_d: usize) -> impl Strategy<Value = VoxelGrid> {
    (1..=max_d).prop_flat_map(|d| {
        proptest::collection::vec(any::<bool>(), d * d * d)
            .prop_map(move |occ| VoxelGrid::from_occupancy(d, occ).unwrap())
    })
}

/// Hammer: a bar along x with a wider head at the low end. Skewed along x,
/// mirror-symmetric in y and z, so its covariance is diagonal.
fn hammer(d: usize, len: usize, width: usize, depth: usize, foot: usize) -> VoxelGrid {
    let lo = (d - len) / 2;
    let mut g = VoxelGrid::solid_box(d, [lo, 8, 10], [lo + len, 8 + width, 10 + depth]);
    for x in lo..lo + foot {
        for y in 6..8 + width + 2 {
            for z in 10..10 + depth {
                g.set(x, y, z, true);
            }
        }
    }
    g
}

fn signed_permutation(g: &VoxelGrid, perm: [usize; 3], flip: [bool; 3]) -> VoxelGrid {
    let d = g.resolution();
    let mut out = VoxelGrid::new(d);
    for p in g.occupied() {
        let q: [usize; 3] = std::array::from_fn(|a| {
            let v = p[perm[a]];
            if flip[a] { d - 1 - v } else { v }
        });
        out.set(q[0], q[1], q[2], true);
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn file_round_trip_is_exact(g in arb_grid(12)) {
        let bytes = io::encode(&g);
        prop_assert_eq!(bytes.len(), io::encoded_len(g.resolution()));
        let back = io::decode(&bytes).unwrap();
        prop_assert_eq!(back.occupancy(), g.occupancy());
        prop_assert_eq!(io::encode(&back), bytes);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn slab_centers_reconstruct_grid(g in arb_grid(8), ratio in 1usize..4, half in 0usize..3) {
        let d = g.resolution();
        let c = 2 * half + 1;
        let seq = slice_volume(&g, d * ratio, c).unwrap();
        prop_assert_eq!(seq.steps.len(), d * ratio);
        let mut rebuilt = VoxelGrid::new(d);
        for t in (0..d * ratio).step_by(ratio) {
            let center = seq.steps[t].center;
            let image = seq.slice(t, half);
            for i in 0..d {
                for j in 0..d {
                    rebuilt.set(center, i, j, image[i * d + j]);
                }
            }
        }
        prop_assert_eq!(rebuilt, g);
    }

    #[test]
    fn slab_indices_follow_center_rule(d in 2usize..10, ratio in 1usize..5) {
        let seq = slice_volume(&VoxelGrid::new(d), d * ratio, 5).unwrap();
        for (t, step) in seq.steps.iter().enumerate() {
            let center = (t / ratio) as isize;
            prop_assert_eq!(step.indices(5), vec![center - 2, center - 1, center, center + 1, center + 2]);
        }
    }

    #[test]
    fn upsample_scales_count(g in arb_grid(6), factor in 1usize..4) {
        let up = upsample_nearest(&g, factor);
        prop_assert_eq!(up.resolution(), g.resolution() * factor);
        prop_assert_eq!(up.count(), g.count() * factor.pow(3));
    }

    #[test]
    fn solid_contains_surface(seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        // random tetrahedron
        let vertices: Vec<[f64; 3]> = (0..4).map(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0))).collect();
        let mesh = Mesh { vertices, triangles: vec![[0, 1, 2], [0, 3, 1], [1, 3, 2], [2, 3, 0]] };
        let surface = voxelize_mesh(&mesh, 12, Fill::Surface).unwrap();
        let solid = voxelize_mesh(&mesh, 12, Fill::Solid).unwrap();
        prop_assert!(surface.is_subset_of(&solid));
        prop_assert!(!surface.is_empty());
        prop_assert_eq!(voxelize_mesh(&mesh, 12, Fill::Solid).unwrap(), solid);
    }

    #[test]
    fn surface_voxels_touch_the_triangle(seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let vertices: Vec<[f64; 3]> = (0..3).map(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0))).collect();
        let mesh = Mesh { vertices, triangles: vec![[0, 1, 2]] };
        let d = 16usize;
        let g = voxelize_mesh(&mesh, d, Fill::Surface).unwrap();
        prop_assert!(!g.is_empty());

        // rebuild the fitted triangle independently
        let (lo, hi) = mesh.bounds().unwrap();
        let extent = (0..3).map(|a| hi[a] - lo[a]).fold(0.0, f64::max);
        let scale = (d as f64 - 2.0 - 2e-6) / extent;
        let tri: [[f64; 3]; 3] = std::array::from_fn(|k| {
            std::array::from_fn(|a| d as f64 / 2.0 + (mesh.vertices[k][a] - (lo[a] + hi[a]) / 2.0) * scale)
        });
        let e1 = Vector3::from(tri[1]) - Vector3::from(tri[0]);
        let e2 = Vector3::from(tri[2]) - Vector3::from(tri[0]);
        let n = e1.cross(&e2).normalize();
        for [x, y, z] in g.occupied() {
            let c = Vector3::new(x as f64 + 0.5, y as f64 + 0.5, z as f64 + 0.5);
            prop_assert!(tri_box_overlap([c.x, c.y, c.z], 0.5, tri));
            let dist = (c - Vector3::from(tri[0])).dot(&n).abs();
            prop_assert!(dist <= 3f64.sqrt(), "voxel {:?} is {} from the plane", [x, y, z], dist);
        }
    }

    #[test]
    fn aligned_covariance_is_nearly_diagonal(
        a in 0.0f64..std::f64::consts::PI,
        b in 0.0f64..std::f64::consts::PI,
        c in 0.0f64..std::f64::consts::PI,
        ext in (9.0f64..12.0, 5.0f64..7.0, 2.0f64..3.5),
    ) {
        let d = 32usize;
        let r = Rotation3::from_euler_angles(a, b, c);
        let half = Vector3::new(ext.0, ext.1, ext.2);
        let center = Vector3::new(16.0, 16.0, 16.0);
        let g = VoxelGrid::from_fn(d, |x, y, z| {
            let p = Vector3::new(x as f64 + 0.5, y as f64 + 0.5, z as f64 + 0.5) - center;
            let q = r.inverse() * p;
            (0..3).all(|k| q[k].abs() <= half[k])
        });
        let aligned = pca_align(&g).unwrap();
        prop_assert!(!aligned.degenerate);
        let ratio = off_diagonal_ratio(&aligned.grid);
        prop_assert!(ratio < 0.05, "off-diagonal ratio {}", ratio);
        let rot = aligned.rotation;
        prop_assert!((rot * rot.transpose() - Matrix3::identity()).norm() < 1e-9);
    }

    #[test]
    fn alignment_is_idempotent(
        len in 12usize..18, width in 3usize..6, depth in 2usize..3, foot in 2usize..4,
        perm_index in 0usize..6, flips in any::<[bool; 3]>(),
    ) {
        let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let base = hammer(32, len, width, depth, foot);
        let g = signed_permutation(&base, perms[perm_index], flips);
        let first = pca_align(&g).unwrap();
        prop_assert!(!first.degenerate);
        let second = pca_align(&first.grid).unwrap();
        prop_assert!((second.rotation - Matrix3::identity()).norm() < 1e-6, "{}", second.rotation);
        prop_assert_eq!(first.grid.count(), g.count());
    }
}

