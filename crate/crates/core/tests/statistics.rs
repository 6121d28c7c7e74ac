//! Monte Carlo checks against closed-form distributions.

use std::collections::HashMap;

use statrs::distribution::{ChiSquared, ContinuousCDF};

use arna::dpf::select_outgoing;
use arna::resample::{systematic_indices, systematic_resample, weighted_mean, WeightedEnsemble};
use arna::rng::stream;
use arna::statemodel::StateVector;
use arna::topology::randomize_ring;

fn chi_square_p(counts: &[u64], expected: f64) -> f64 {
    let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let dist = ChiSquared::new((counts.len() - 1) as f64).unwrap();
    1.0 - dist.cdf(stat)
}

#[test]
fn fisher_yates_is_uniform_over_24_permutations() {
    let draws = 100_000u64;
    let mut rng = stream(2024, 0);
    let mut buckets: HashMap<Vec<usize>, u64> = HashMap::new();
    for _ in 0..draws {
        *buckets.entry(randomize_ring(4, &mut rng).unwrap().order().to_vec()).or_default() += 1;
    }
    assert_eq!(buckets.len(), 24);
    let counts: Vec<u64> = buckets.into_values().collect();
    let p = chi_square_p(&counts, draws as f64 / 24.0);
    assert!(p > 1e-3, "p = {p}");
}

#[test]
fn systematic_offspring_means() {
    // Three live particles padded with zero-weight slots so each draw has N = 10.
    let mut weights = vec![0.0; 10];
    weights[..3].copy_from_slice(&[0.5, 0.3, 0.2]);
    let mut rng = stream(5, 0);
    let trials = 100_000;
    let mut counts = [0u64; 3];
    for _ in 0..trials {
        for i in systematic_indices(&weights, &mut rng) {
            counts[i] += 1;
        }
    }
    for (c, expected) in counts.iter().zip([5.0, 3.0, 2.0]) {
        let mean = *c as f64 / trials as f64;
        assert!((mean - expected).abs() <= 0.01 * expected, "{mean} vs {expected}");
    }
}

#[test]
fn systematic_resampling_is_unbiased() {
    let xs = [0.0, 1.0, 2.5, 4.0, 7.0, 9.0];
    let w = [0.05, 0.3, 0.1, 0.25, 0.2, 0.1];
    let states: Vec<StateVector> = xs.iter().map(|&x| StateVector::new(x, 0.0, 0.0, 0.0, 0.0)).collect();
    let e = WeightedEnsemble::new(states.clone(), w.to_vec()).unwrap();
    let target = weighted_mean(&states, &w).x;
    let mut rng = stream(6, 0);
    let reps = 100_000;
    let means: Vec<f64> = (0..reps)
        .map(|_| {
            let r = systematic_resample(&e, &mut rng);
            r.states().iter().map(|s| s.x).sum::<f64>() / r.len() as f64
        })
        .collect();
    let mean = means.iter().sum::<f64>() / reps as f64;
    let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
    let se = (var / reps as f64).sqrt();
    assert!((mean - target).abs() <= 3.0 * se, "mean {mean}, target {target}, se {se}");
}

#[test]
fn select_outgoing_inclusion_probability() {
    let mut rng = stream(8, 0);
    let trials = 100_000u64;
    let mut hits = [0u64; 10];
    for _ in 0..trials {
        let (out, rest) = select_outgoing((0..10).collect::<Vec<usize>>(), 3, &mut rng).unwrap();
        assert_eq!(rest.len(), 7);
        for i in out {
            hits[i] += 1;
        }
    }
    let sigma = (0.3f64 * 0.7 / trials as f64).sqrt();
    for h in hits {
        let freq = h as f64 / trials as f64;
        assert!((freq - 0.3).abs() <= 3.0 * sigma, "{freq}");
    }
}
