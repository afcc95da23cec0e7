//! The two worked examples over the Z2 sum language plus a Z4 chain that
//! drives the linear case through weakening and equation discovery.
//! Run with: cargo run --example worked_examples

use wnu_csp::certkit::{serialize_trace, verify_trace, CheckMode};
use wnu_csp::presets::{example1, example2, example_linear};
use wnu_csp::solver::{solve, Answer, SolveConfig};

fn main() {
    let cfg = SolveConfig::default();
    for (name, (inst, lang)) in [
        ("example1 (x+y=1, y+z=1, x=0, z=1)", example1()),
        ("example2 (x+y=1, y+z=1)", example2()),
        ("example_linear (Z4 coset chain)", example_linear()),
    ] {
        println!("=== {} ===", name);
        let out = solve(&inst, &lang, &cfg).unwrap();
        match &out.answer {
            Answer::Solution(h) => println!("answer: solution {:?}", h),
            Answer::NoSolution => println!("answer: no solution"),
        }
        println!("trace:");
        print!("{}", serialize_trace(&out.trace));
        for mode in [CheckMode::Witness, CheckMode::Semantic] {
            let v = verify_trace(&inst, &lang, &out.trace, mode, 1 << 20).unwrap();
            println!("{:?} check: {}", mode, if v.accept { "ACCEPT" } else { "REJECT" });
        }
        println!();
    }
}
