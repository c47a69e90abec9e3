//! The two differential-privacy primitives in isolation: Laplace noise on
//! count vectors and the exponential mechanism over scored candidates.

use fedwalk::privacy::{exponential_sample, laplace_sample, noise_counts, RandomSource};

fn main() -> fedwalk::Result<()> {
    let mut rng = RandomSource::new(7, 0);

    // Laplace(0, 1/eps): sample moments vs the analytic variance 2/eps^2.
    for eps in [0.5, 1.0, 2.0] {
        let n = 200_000;
        let (mut sum, mut sq) = (0.0, 0.0);
        for _ in 0..n {
            let x = laplace_sample(eps, &mut rng)?;
            sum += x;
            sq += x * x;
        }
        let mean = sum / n as f64;
        let var = sq / n as f64 - mean * mean;
        println!(
            "laplace eps={eps}: mean {mean:+.4}, variance {var:.4} (analytic {:.4})",
            2.0 / (eps * eps)
        );
    }

    // Noised per-bin neighbor counts, as each device publishes them.
    let counts = [3, 0, 5, 1];
    let noised = noise_counts(&counts, 1.0, &mut rng)?;
    println!("\ncounts {counts:?} -> noised {noised:?}");
    println!(
        "estimated degree {:.3} (true 9)",
        noised.iter().sum::<f64>()
    );

    // Exponential mechanism: higher epsilon concentrates on the best score.
    let scores = [0.0, -1.0, -3.0];
    for eps in [0.0, 0.5, 2.0] {
        let mut hits = [0u32; 3];
        for _ in 0..100_000 {
            hits[exponential_sample(&scores, eps, &mut rng)?] += 1;
        }
        let freq: Vec<f64> = hits.iter().map(|&h| h as f64 / 100_000.0).collect();
        println!("exponential eps={eps}: frequencies {freq:?}");
    }
    Ok(())
}
