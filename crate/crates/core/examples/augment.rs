//! Domain-randomization augmentations on a square image, with replay.
//!
//! Usage: `cargo run --example augment -- [out_dir]`

use std::path::PathBuf;

use aae_pose::augment::{augment, composite_background, procedural_background, replay, AugmentConfig};
use aae_pose::rng::Rng;
use aae_pose::toy::{draw_square, SquareSpec};

fn main() -> aae_pose::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "augment_out".into()));
    std::fs::create_dir_all(&dir)?;
    let clean = draw_square(&SquareSpec::new(0.4, [0.0, 0.0], 0.3), 64)?;
    let cfg = AugmentConfig::default();
    let mut rng = Rng::seed_from_u64(3);
    for i in 0..6 {
        let backdrop = procedural_background(64, 64, 1, 8, &mut rng);
        let input = composite_background(&clean, &backdrop)?;
        let (out, log) = augment(&input, &cfg, &mut rng);
        assert_eq!(replay(&input, &log), out);
        let names: Vec<String> = log.iter().map(|op| format!("{op:?}")).collect();
        println!("sample {i}: {}", names.join(", "));
        out.save_png(dir.join(format!("sample_{i}.png")))?;
    }
    clean.save_png(dir.join("clean.png"))?;
    println!("wrote {}", dir.display());
    Ok(())
}
