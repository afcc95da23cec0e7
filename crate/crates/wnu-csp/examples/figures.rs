//! Consistency notions on the three small instances over the five-element
//! domain: 1-consistency, cycle consistency, linkedness, fragmentation, and
//! the linked-component congruences.
//! Run with: cargo run --example figures

use wnu_csp::consistency::{
    cycle_consistency_reduce, instance_profile, linked_components, Reduction,
};
use wnu_csp::presets::{figure1, figure2, figure3};

fn main() {
    for (name, (inst, names)) in
        [("figure1", figure1()), ("figure2", figure2()), ("figure3", figure3())]
    {
        println!("=== {} ===", name);
        let p = instance_profile(&inst);
        println!(
            "1-consistent: {}  cycle-consistent: {}  linked: {}  fragmented: {}",
            p.one_consistent, p.cycle_consistent, p.linked, p.fragmented
        );
        for i in 0..inst.n {
            let lc = linked_components(&inst, i);
            let blocks: Vec<Vec<&str>> = lc
                .blocks
                .iter()
                .map(|b| b.iter().map(|&e| names[e].as_str()).collect())
                .collect();
            println!("linked components of x{}: {:?}", i, blocks);
        }
        match cycle_consistency_reduce(&inst) {
            Reduction::Unchanged => println!("cycle consistency: fixpoint"),
            Reduction::NoSolution => println!("cycle consistency: empties a domain"),
            Reduction::Reduced { var, new_domain, .. } => {
                println!("cycle consistency: reduces x{} to {:?}", var, new_domain)
            }
        }
        println!();
    }
}
