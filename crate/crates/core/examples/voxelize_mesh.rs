//! Voxelize a mesh (an OFF file, or a built-in tilted slab), align it to its
//! principal axes and write the grid.
//!
//! cargo run --release --example voxelize_mesh -- [mesh.off] [resolution] [out.voxg]

use shape_inpaint::voxel::{pca_align, voxelize_mesh, write_grid, Fill, Mesh};

fn slab() -> Mesh {
    let mut mesh = Mesh::unit_cube();
    for v in &mut mesh.vertices {
        let [x, y, z] = [v[0] * 3.0, v[1] * 1.0, v[2] * 0.5];
        let (s, c) = 0.5f64.sin_cos();
        *v = [c * x - s * y, s * x + c * y, z];
    }
    mesh
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mesh = match args.first() {
        Some(path) => Mesh::read_off(path)?,
        None => slab(),
    };
    let d: usize = args.get(1).map(|s| s.parse()).transpose()?.unwrap_or(32);
    println!("{} vertices, {} triangles", mesh.vertices.len(), mesh.triangles.len());

    let surface = voxelize_mesh(&mesh, d, Fill::Surface)?;
    let solid = voxelize_mesh(&mesh, d, Fill::Solid)?;
    println!("{d}³: surface {} voxels, solid {}", surface.count(), solid.count());

    let aligned = pca_align(&solid)?;
    println!("eigenvalues {:?}", aligned.eigenvalues);
    println!("aligned grid keeps {} voxels", aligned.grid.count());

    let out = args.get(2).map(String::as_str).unwrap_or("aligned.voxg");
    write_grid(out, &aligned.grid)?;
    println!("wrote {out}");
    Ok(())
}
