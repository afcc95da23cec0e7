//! Seeded random corpus over every template: the solver must agree with
//! brute force and every emitted trace must pass the semantic checker.
//! Run with: cargo run --example random_agreement

use std::collections::BTreeMap;
use std::time::Instant;

use wnu_csp::certkit::{verify_trace, CheckMode};
use wnu_csp::model::brute_force_solve;
use wnu_csp::presets::{gen_instance, template, TEMPLATE_NAMES};
use wnu_csp::solver::{solve, Answer, SolveConfig};

fn main() {
    let cfg = SolveConfig::default();
    for name in TEMPLATE_NAMES {
        let lang = template(name).unwrap();
        let mut kinds: BTreeMap<String, usize> = BTreeMap::new();
        let t0 = Instant::now();
        let count = 150;
        for seed in 0..count {
            let n = 2 + (seed % 3) as usize;
            let inst = gen_instance(&lang, n, 0.3, seed);
            let out = solve(&inst, &lang, &cfg).unwrap();
            let sat = matches!(out.answer, Answer::Solution(_));
            let brute = brute_force_solve(&inst, 1 << 20).unwrap();
            assert_eq!(sat, !brute.is_empty(), "{} seed {} disagreement", name, seed);
            for s in &out.trace.steps {
                *kinds.entry(s.body.kind().to_string()).or_default() += 1;
            }
            let v = verify_trace(&inst, &lang, &out.trace, CheckMode::Semantic, 1 << 20).unwrap();
            assert!(v.accept, "{} seed {} rejected: {:?}", name, seed, v.steps.last());
        }
        println!(
            "{}: {} instances ok in {:?}; step kinds {:?}",
            name,
            count,
            t0.elapsed(),
            kinds
        );
    }
}
