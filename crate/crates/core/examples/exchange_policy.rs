//! Fixed (RNA) and adaptive (ARNA) exchange counts as the effective PE count grows.
//!
//! cargo run --release --example exchange_policy

use arna::dpf::{pe_eff, ExchangePolicy, GlobalReduction};

fn main() {
    let (n_p, m) = (40, 24);
    let policies = [
        ("RNA-10%", ExchangePolicy::Fixed { ratio: 0.1 }),
        ("RNA-50%", ExchangePolicy::Fixed { ratio: 0.5 }),
        ("ARNA", ExchangePolicy::Adaptive { cutoff: 0.99 }),
    ];
    println!("N_p = {n_p}, M = {m}");
    println!("{:>8} {:>8} {:>8} {:>8}", "pe_eff", policies[0].0, policies[1].0, policies[2].0);
    for pe in [1.0, 2.0, 6.0, 12.5, 18.0, 23.0, 23.8, 24.0] {
        let previous = GlobalReduction::initial(pe);
        let counts: Vec<usize> = policies.iter().map(|(_, p)| p.exchange_count(n_p, m, &previous)).collect();
        println!("{pe:>8.1} {:>8} {:>8} {:>8}", counts[0], counts[1], counts[2]);
    }

    println!("\npe_eff of a few weight-sum vectors:");
    for w in [vec![1.0; 4], vec![1.0, 0.0, 0.0, 0.0], vec![0.5, 0.5, 0.0, 0.0], vec![3.0, 1.0]] {
        println!("  {w:?} -> {:.3}", pe_eff(&w).unwrap());
    }
}
