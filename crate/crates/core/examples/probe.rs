//! Linear probe of shape category from latent codes of a trained desk model,
//! against a shuffled-label baseline.
//!
//! cargo run --release --example probe -- [model-dir]

use shape_inpaint::data::{generate_dataset, Category, CorruptionSpec, DatasetSpec, Split};
use shape_inpaint::eval::{extract_latents, linear_probe, shuffled_baseline, ProbeConfig};
use shape_inpaint::nets::{EdGanConfig, HybridModel, LrcnConfig, Scale};
use shape_inpaint::voxel::VoxelGrid;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "runs/desk/model".into());
    let model = HybridModel::load(&dir, EdGanConfig::new(Scale::Desk), LrcnConfig::new(Scale::Desk))?;

    let ds = generate_dataset(&DatasetSpec {
        n: 200,
        categories: Category::ALL.to_vec(),
        d_l: 16,
        d_h: 64,
        corruption: CorruptionSpec::deletion(0.0, 0)?,
        seed: 21,
    })?;
    let grids: Vec<&VoxelGrid> = ds.samples.iter().map(|s| &s.low).collect();
    let features = extract_latents(&model, &grids)?;
    let labels: Vec<usize> = ds.samples.iter().map(|s| s.category.index()).collect();
    let train: Vec<bool> = ds.samples.iter().map(|s| s.split == Split::Train).collect();

    let cfg = ProbeConfig::default();
    let probe = linear_probe(&features, &labels, &train, &cfg)?;
    let baseline = shuffled_baseline(&features, &labels, &train, &cfg, 20)?;
    println!("{} features per shape, {} classes", features[0].len(), probe.classes);
    println!("train accuracy {:.3}, test accuracy {:.3}", probe.train_accuracy, probe.test_accuracy);
    println!("shuffled-label baseline {:.3} (ratio {:.2})", baseline, probe.test_accuracy / baseline);
    Ok(())
}
