//! Exact cosine kNN over a random codebook, its scale invariance and throughput.

use std::time::Instant;

use aae_pose::codebook::{Codebook, CodebookEntry, LatentCode};
use aae_pose::geom::{Rotation3, Vec2};
use aae_pose::rng::Rng;

fn random_code(rng: &mut Rng, dim: usize) -> LatentCode {
    LatentCode::new((0..dim).map(|_| rng.normal() as f32).collect()).expect("finite code")
}

fn main() -> aae_pose::Result<()> {
    let dim = 128;
    let mut rng = Rng::seed_from_u64(7);
    let entries = (0..10_000)
        .map(|_| CodebookEntry::new(random_code(&mut rng, dim), &Rotation3::identity(), 100.0, Vec2::zeros()))
        .collect();
    let cb = Codebook::from_entries(dim, entries)?;

    let q = random_code(&mut rng, dim);
    let hits = cb.knn_query(&q, 5)?;
    for (idx, sim) in &hits {
        println!("entry {idx:5}  cosine {sim:.5}");
    }
    let ranking = |hits: &[(usize, f64)]| hits.iter().map(|h| h.0).collect::<Vec<_>>();
    for s in [0.1f32, 2.5] {
        assert_eq!(ranking(&cb.knn_query(&q.scaled(s), 5)?), ranking(&hits));
    }
    println!("ranking unchanged for query scales 0.1 and 2.5");

    let queries: Vec<LatentCode> = (0..200).map(|_| random_code(&mut rng, dim)).collect();
    let t = Instant::now();
    for q in &queries {
        cb.knn_query(q, 10)?;
    }
    let secs = t.elapsed().as_secs_f64();
    println!(
        "{:.0} queries/s against {} entries",
        queries.len() as f64 / secs,
        cb.len()
    );
    Ok(())
}
