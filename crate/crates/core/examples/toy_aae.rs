//! Train the rotating-squares autoencoder and fit its latent traces.
//!
//! Usage: `cargo run --release --example toy_aae -- [iterations] [seed] [input] [target]`
//! Input `d` with target `a` is the augmented autoencoder; equal
//! distributions give a plain autoencoder.

use aae_pose::toy::{analyze_latent, train, Distribution, TrainConfig};

fn main() -> aae_pose::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, default: &str| args.get(i).cloned().unwrap_or_else(|| default.to_string());
    let cfg = TrainConfig {
        iterations: arg(0, "2000")
            .parse()
            .map_err(|_| aae_pose::Error::Config("iterations".into()))?,
        seed: arg(1, "0")
            .parse()
            .map_err(|_| aae_pose::Error::Config("seed".into()))?,
        ..TrainConfig::default()
    };
    let input: Distribution = arg(2, "d").parse()?;
    let target: Distribution = arg(3, "a").parse()?;

    let result = train(&cfg, input, target, None)?;
    for (it, loss) in &result.losses {
        if it % 1000 == 0 {
            println!("iteration {it:5}: loss {loss:.2}");
        }
    }
    let report = analyze_latent(
        &result.model,
        40,
        &[Distribution::A, Distribution::B, Distribution::C],
        cfg.seed,
    )?;
    for f in &report.fits {
        match f.fit {
            Some(s) => println!(
                "({}) z{}: omega {:.3}, R2 {:.3}",
                f.distribution,
                f.dim + 1,
                s.omega,
                s.r2
            ),
            None => println!("({}) z{}: constant", f.distribution, f.dim + 1),
        }
    }
    for (d, gap) in &report.coincidence_gap {
        println!("gap ({d}) vs (a): {gap:.3}");
    }
    Ok(())
}
