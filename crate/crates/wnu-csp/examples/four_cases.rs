//! Four-case classification of every nontrivial subuniverse of each template
//! algebra, together with the congruence lattice of the full domain.
//! Run with: cargo run --example four_cases

use std::collections::BTreeSet;

use wnu_csp::algebra::{
    classify_four_cases, enumerate_congruences, restrict_language, subuniverses, wnu_profile,
    FourCaseWitness,
};
use wnu_csp::presets::{template, TEMPLATE_NAMES};

fn main() {
    for name in TEMPLATE_NAMES {
        let lang = template(name).unwrap();
        let profile = wnu_profile(&lang.wnu);
        println!(
            "=== {} (base {}, arity {}, special WNU: {}) ===",
            name, lang.base, lang.wnu.arity, profile.special
        );
        let full: BTreeSet<usize> = (0..lang.base).collect();
        for c in enumerate_congruences(&full, &lang.wnu) {
            println!(
                "congruence {:?}{}",
                c.congruence.blocks,
                if c.maximal { " (maximal)" } else { "" }
            );
        }
        for d in subuniverses(&full, &lang.wnu) {
            if d.len() < 2 {
                continue;
            }
            let gamma = restrict_language(&lang, &d);
            let case = match classify_four_cases(&d, &lang.wnu, &gamma).unwrap() {
                FourCaseWitness::BinaryAbsorbing { b, .. } => {
                    format!("binary absorbing B = {:?}", b)
                }
                FourCaseWitness::Central { c, .. } => format!("central C = {:?}", c),
                FourCaseWitness::PcQuotient { sigma, .. } => {
                    format!("PC quotient, sigma = {:?}", sigma.blocks)
                }
                FourCaseWitness::LinearQuotient(lq) => {
                    format!("linear quotient, primes {:?}", lq.primes)
                }
            };
            println!("subuniverse {:?}: {}", d, case);
        }
        println!();
    }
}
