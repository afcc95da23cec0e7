//! What the checker catches: solve an instance, then corrupt the trace in a
//! few ways and watch each corruption get rejected.
//! Run with: cargo run --example trace_tampering

use wnu_csp::certkit::{verify_trace, CheckMode, ReduceAction, StepBody};
use wnu_csp::presets::example2;
use wnu_csp::solver::{solve, SolveConfig};

fn main() {
    let (inst, lang) = example2();
    let out = solve(&inst, &lang, &SolveConfig::default()).unwrap();
    let genuine = out.trace;
    let v = verify_trace(&inst, &lang, &genuine, CheckMode::Semantic, 1 << 20).unwrap();
    println!("genuine trace: {}", if v.accept { "ACCEPT" } else { "REJECT" });

    // flip the answer
    let mut t = genuine.clone();
    let last = t.steps.len() - 1;
    t.steps[last].body = StepBody::Answer { value: "no".into(), assignment: None };
    report("flipped answer", &inst, &lang, &t);

    // claim a reduction that never happened
    let mut t = genuine.clone();
    t.steps.insert(
        0,
        wnu_csp::certkit::TraceStep {
            input: t.digest.clone(),
            output: t.digest.clone(),
            body: StepBody::Cc { action: ReduceAction::Reduce { var: 0, domain: vec![0] } },
        },
    );
    report("fabricated cc reduction", &inst, &lang, &t);

    // overstate the solution-space dimension
    let mut t = genuine.clone();
    for s in &mut t.steps {
        if let StepBody::LinGauss { dim, .. } = &mut s.body {
            *dim = dim.map(|d| d + 1);
        }
    }
    report("wrong dimension", &inst, &lang, &t);
}

fn report(
    what: &str,
    inst: &wnu_csp::model::Instance,
    lang: &wnu_csp::model::Language,
    t: &wnu_csp::certkit::Trace,
) {
    let v = verify_trace(inst, lang, t, CheckMode::Witness, 1 << 20).unwrap();
    let reason = v
        .steps
        .last()
        .map(|r| format!("{:?}", r.status))
        .unwrap_or_default();
    println!("{}: {} ({})", what, if v.accept { "ACCEPT" } else { "REJECT" }, reason);
}
