//! Fixed and randomized rings and how particles travel along them.
//!
//! cargo run --release --example ring_topology

use arna::dpf::{exchange_step, PeState};
use arna::rng::{pe_stream, stream};
use arna::statemodel::StateVector;
use arna::topology::{identity_ring, randomize_ring};

fn main() {
    let ring = identity_ring(6).unwrap();
    println!("identity ring {:?}: successor(5) = {}", ring.order(), ring.successor(5).unwrap());

    let mut rng = stream(1, 0);
    for k in 0..4 {
        let r = randomize_ring(6, &mut rng).unwrap();
        let edges: Vec<String> = (0..6).map(|pe| format!("{pe}->{}", r.successor(pe).unwrap())).collect();
        println!("iteration {k}: order {:?}  edges {}", r.order(), edges.join(" "));
    }

    // Tag each particle with its origin PE and ship two particles per PE
    // along a shuffled ring.
    let mut pes: Vec<PeState> = (0..4)
        .map(|id| PeState::new(id, vec![StateVector::new(id as f64, 0.0, 0.0, 0.0, 0.0); 5], 0.0, pe_stream(3, id)))
        .collect();
    let r = randomize_ring(4, &mut rng).unwrap();
    let traffic = exchange_step(&mut pes, &r, 2).unwrap();
    println!("\nafter exchanging 2 particles on ring {:?}:", r.order());
    for pe in &pes {
        let origins: Vec<usize> = pe.states().map(|s| s.x as usize).collect();
        println!("  PE {} holds particles from {:?}", pe.id, origins);
    }
    println!("traffic: {} messages, {} particles, {} bytes", traffic.messages, traffic.particles, traffic.bytes);
}
