//! Train SkipGram embeddings on plain random-walk sequences over a
//! two-clique graph and check that the learned geometry separates the
//! cliques.

use fedwalk::embedding::{train, SkipGramConfig};
use fedwalk::privacy::RandomSource;

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

fn main() -> fedwalk::Result<()> {
    // Synthetic corpus: walks stay inside one clique of 5 vertices.
    let mut rng = RandomSource::new(3, 0);
    let mut corpus = Vec::new();
    for walk_id in 0..400 {
        let base = if walk_id % 2 == 0 { 0 } else { 5 };
        let mut walk = Vec::with_capacity(20);
        let mut current = base + rng.uniform_index(5);
        walk.push(current);
        for _ in 1..20 {
            // move to any other vertex of the same clique
            let mut next = base + rng.uniform_index(5);
            while next == current {
                next = base + rng.uniform_index(5);
            }
            current = next;
            walk.push(current);
        }
        corpus.push(walk);
    }

    let config = SkipGramConfig {
        dim: 16,
        window: 4,
        negatives: 5,
        epochs: 3,
        ..SkipGramConfig::default()
    };
    let mut train_rng = RandomSource::new(3, 1);
    let embeddings = train(&corpus, 10, &config, &mut train_rng)?;

    let mut within = Vec::new();
    let mut across = Vec::new();
    for u in 0..10 {
        for v in (u + 1)..10 {
            let c = cosine(embeddings.input_row(u), embeddings.input_row(v));
            if (u < 5) == (v < 5) {
                within.push(c);
            } else {
                across.push(c);
            }
        }
    }
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    println!("mean cosine within cliques: {:+.3}", mean(&within));
    println!("mean cosine across cliques: {:+.3}", mean(&across));
    assert!(mean(&within) > mean(&across) + 0.5);
    println!("cliques are separated in embedding space");
    Ok(())
}
