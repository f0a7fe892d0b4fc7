//! Corrupt one procedural shape by random deletion and by single-view scans,
//! and print a middle slice of each.
//!
//! cargo run --release --example corrupt_and_scan -- [category] [seed]

use shape_inpaint::data::{generate_shape, inject_random_noise, simulate_scan, Category, ShapeRecipe, ViewDirection};
use shape_inpaint::voxel::VoxelGrid;

fn show(grid: &VoxelGrid, x: usize) {
    let d = grid.resolution();
    for y in (0..d).rev() {
        let row: String = (0..d).map(|z| if grid.get(x, y, z) { '#' } else { '.' }).collect();
        println!("  {row}");
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let category: Category = args.first().map(|s| s.parse()).transpose()?.unwrap_or(Category::ALL[0]);
    let seed: u64 = args.get(1).map(|s| s.parse()).transpose()?.unwrap_or(3);

    let shape = generate_shape(&ShapeRecipe::sample(category, seed), 16)?;
    let mid = 8;
    println!("{category} seed {seed}: {} voxels, slice x = {mid}", shape.count());
    show(&shape, mid);

    for f in [0.3, 0.6] {
        let noisy = inject_random_noise(&shape, f, seed);
        println!("deletion {f}: {} voxels", noisy.count());
    }
    for dir in ViewDirection::ALL {
        let scan = simulate_scan(&shape, dir);
        println!("scan {dir}: {} voxels", scan.count());
    }
    let scan = simulate_scan(&shape, "+z".parse()?);
    println!("scan +z, slice x = {mid}");
    show(&scan, mid);
    Ok(())
}
