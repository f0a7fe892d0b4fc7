//! Walk the latent space between two held-out shapes of a trained desk
//! model and print the occupancy of each decoded step.
//!
//! cargo run --release --example interpolate -- [model-dir]
//! (train one first with the train_desk example)

use shape_inpaint::data::{generate_dataset, Category, CorruptionSpec, DatasetSpec};
use shape_inpaint::eval::{interpolate_latent, reconstruction_error};
use shape_inpaint::nets::{EdGanConfig, HybridModel, LrcnConfig, Scale};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "runs/desk/model".into());
    let model = HybridModel::load(&dir, EdGanConfig::new(Scale::Desk), LrcnConfig::new(Scale::Desk))?;

    let ds = generate_dataset(&DatasetSpec {
        n: 10,
        categories: vec![Category::ALL[0], Category::ALL[1]],
        d_l: 16,
        d_h: 64,
        corruption: CorruptionSpec::deletion(0.0, 0)?,
        seed: 5,
    })?;
    let a = ds.samples.iter().find(|s| s.category == Category::ALL[0]).ok_or("no shape a")?;
    let b = ds.samples.iter().find(|s| s.category == Category::ALL[1]).ok_or("no shape b")?;
    println!("from {} ({} voxels) to {} ({} voxels)", a.id, a.low.count(), b.id, b.low.count());

    let gammas: Vec<f64> = (0..=8).rev().map(|k| k as f64 / 8.0).collect();
    for step in interpolate_latent(&model, &a.low, &b.low, &gammas)? {
        println!(
            "gamma {:.3}: {:>4} voxels, distance to a {:.4}, to b {:.4}",
            step.gamma,
            step.grid.count(),
            reconstruction_error(&step.grid, &a.low)?,
            reconstruction_error(&step.grid, &b.low)?
        );
    }
    Ok(())
}
