//! Generate a handful of shapes, train a very small model for a few epochs,
//! and complete one held-out shape.
//!
//! cargo run --release --example quickstart

use shape_inpaint::data::{generate_dataset, Category, CorruptionSpec, DatasetSpec};
use shape_inpaint::eval::{reconstruction_error, upsampled_error};
use shape_inpaint::nets::{hybrid_forward, Scale, THRESHOLD};
use shape_inpaint::train::{TrainConfig, Trainer};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = TrainConfig::new(Scale::Desk);
    cfg.lrcn.d_h = 32;
    cfg.edgan.channels = [4, 8, 16];
    cfg.lrcn.channels = [4, 8, 16];
    cfg.lrcn.feature_dim = 32;
    cfg.lrcn.hidden_dim = 32;
    for (stage, epochs) in [(&mut cfg.reconstruction, 10), (&mut cfg.adversarial, 5), (&mut cfg.upsampler, 5), (&mut cfg.joint, 1)] {
        stage.epochs = epochs;
    }
    cfg.reconstruction.lr = 1e-3;
    cfg.upsampler.lr = 3e-3;

    let ds = generate_dataset(&DatasetSpec {
        n: 20,
        categories: Category::ALL.to_vec(),
        d_l: 16,
        d_h: 32,
        corruption: CorruptionSpec::deletion(0.3, 1)?,
        seed: 1,
    })?;
    let train = ds.train();
    println!("{} training shapes, {} held out", train.len(), ds.test().len());

    let mut trainer = Trainer::from_config(cfg)?;
    trainer.on_epoch(Box::new(|stage, epoch, loss| println!("stage {stage:<2} epoch {epoch:>2} loss {loss:.4}")));
    trainer.train_all(&train)?;
    let (model, _) = trainer.into_parts();

    let sample = ds.test()[0];
    let out = hybrid_forward(&model, &sample.corrupted, THRESHOLD)?;
    println!("completing {}", sample.id);
    println!("  corrupted input, upsampled: {:.4}", upsampled_error(&sample.corrupted, &sample.high)?);
    println!("  low-res completion, upsampled: {:.4}", upsampled_error(&out.low.binarize(THRESHOLD), &sample.high)?);
    println!("  hybrid output: {:.4}", reconstruction_error(&out.high.binarize(THRESHOLD), &sample.high)?);
    Ok(())
}
