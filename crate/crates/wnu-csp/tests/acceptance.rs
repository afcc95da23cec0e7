//! The twelve acceptance criteria, one test and one pass line each.

use std::collections::BTreeSet;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wnu_csp::algebra::{
    classify_four_cases, find_linear_quotient, is_polymorphism, restrict_language, subuniverses,
};
use wnu_csp::certkit::{
    cnf_satisfiable, emit_cnf, instance_digest, verify_trace, CheckMode, ReduceAction, StepBody,
    Trace, TraceStep,
};
use wnu_csp::consistency::{
    cycle_consistency_reduce, instance_profile, linked_components, Reduction,
};
use wnu_csp::linear::{
    affine_hull, apply_elementary, build_linear_system, factorize_instance, gauss_solve,
    linear_case_solve, ElementaryOp, LinOutcome, LinStep, LinearSystem, PrimeSystem, Row,
};
use wnu_csp::model::{brute_force_solve, Instance, Language};
use wnu_csp::presets::{
    example1, example2, example_linear, figure1, figure2, figure3, gen_instance, template,
    TEMPLATE_NAMES,
};
use wnu_csp::solver::{solve, Answer, SolveConfig};

fn corpus(lang: &Language, count: u64) -> impl Iterator<Item = Instance> + '_ {
    // n ≤ 4 variables, ≤ 3 constraints
    (0..count).map(move |seed| gen_instance(lang, 2 + (seed % 3) as usize, 0.25, seed))
}

#[test]
fn ac01_example1_unsatisfiable() {
    let t0 = Instant::now();
    let (inst, lang) = example1();
    let out = solve(&inst, &lang, &SolveConfig::default()).unwrap();
    assert_eq!(out.answer, Answer::NoSolution);
    assert!(!cnf_satisfiable(&emit_cnf(&inst), 20).unwrap());
    assert!(brute_force_solve(&inst, 1 << 20).unwrap().is_empty());
    assert!(t0.elapsed().as_secs_f64() < 1.0);
    println!("AC1 example 1 unsatisfiable three ways: pass");
}

#[test]
fn ac02_example2_two_solutions_rank_two() {
    let t0 = Instant::now();
    let (inst, lang) = example2();
    let sols = brute_force_solve(&inst, 1 << 20).unwrap();
    assert_eq!(sols, vec![vec![0, 1, 0], vec![1, 0, 1]]);
    let quotients: Vec<_> = inst
        .domains
        .iter()
        .map(|d| find_linear_quotient(d, &lang.wnu).unwrap().unwrap())
        .collect();
    let fz = factorize_instance(&inst, quotients).unwrap();
    let sys = build_linear_system(&fz).unwrap();
    assert_eq!(sys.systems.len(), 1);
    assert_eq!(sys.systems[0].p, 2);
    let (ech, space) = gauss_solve(&sys);
    assert_eq!(ech.systems[0].rows.len(), 2); // rank 2
    assert_eq!(space.as_ref().map(|s| s.dim()), Some(1));
    let a = solve(&inst, &lang, &SolveConfig::default()).unwrap();
    let b = solve(&inst, &lang, &SolveConfig::default()).unwrap();
    assert_eq!(a.answer, b.answer);
    assert!(matches!(&a.answer, Answer::Solution(h) if sols.contains(h)));
    assert!(t0.elapsed().as_secs_f64() < 1.0);
    println!("AC2 example 2 solutions and rank-2 system: pass");
}

#[test]
fn ac03_figure1_profile() {
    let (mut inst, _) = figure1();
    let p = instance_profile(&inst);
    assert!(p.cycle_consistent && !p.linked);
    assert_eq!(
        linked_components(&inst, 0).blocks,
        vec![BTreeSet::from([0]), BTreeSet::from([1])]
    );
    // adding (d,c) to E^{21} links the two components
    inst.edges.get_mut(&(2, 1)).unwrap().insert((3, 2));
    assert!(instance_profile(&inst).linked);
    println!("AC3 figure 1 profile and linking edge: pass");
}

#[test]
fn ac04_figure2_profile() {
    let (inst, _) = figure2();
    let p = instance_profile(&inst);
    assert!(p.linked && !p.cycle_consistent);
    assert_eq!(cycle_consistency_reduce(&inst), Reduction::NoSolution);
    assert!(brute_force_solve(&inst, 1 << 20).unwrap().is_empty());
    println!("AC4 figure 2 propagation failure: pass");
}

#[test]
fn ac05_figure3_linked_components() {
    let (inst, _) = figure3();
    assert_eq!(
        linked_components(&inst, 0).blocks,
        vec![BTreeSet::from([0, 4]), BTreeSet::from([1])]
    );
    assert_eq!(
        linked_components(&inst, 1).blocks,
        vec![BTreeSet::from([0, 4]), BTreeSet::from([2])]
    );
    assert_eq!(
        linked_components(&inst, 2).blocks,
        vec![BTreeSet::from([1]), BTreeSet::from([3])]
    );
    println!("AC5 figure 3 linked components: pass");
}

#[test]
fn ac06_master_soundness_on_corpus() {
    let t0 = Instant::now();
    let cfg = SolveConfig::default();
    let mut checked = 0usize;
    for name in TEMPLATE_NAMES {
        let lang = template(name).unwrap();
        for inst in corpus(&lang, 1000) {
            let out = solve(&inst, &lang, &cfg).unwrap();
            // semantic mode brute-checks sol(W_i) ≠ ∅ ⇒ sol(W_{i+1}) ≠ ∅
            // for every step that changes the instance
            let v = verify_trace(&inst, &lang, &out.trace, CheckMode::Semantic, 1 << 20).unwrap();
            assert!(v.accept, "{}: {:?}", name, v.steps.last());
            assert!(v.unchecked.is_empty());
            checked += 1;
        }
    }
    assert!(checked >= 7000);
    assert!(t0.elapsed().as_secs() < 600);
    println!("AC6 master soundness on {} instances: pass", checked);
}

#[test]
fn ac07_solver_oracle_agreement() {
    let cfg = SolveConfig::default();
    let mut checked = 0usize;
    for name in TEMPLATE_NAMES {
        let lang = template(name).unwrap();
        for inst in corpus(&lang, 1000) {
            let out = solve(&inst, &lang, &cfg).unwrap();
            let sat = matches!(out.answer, Answer::Solution(_));
            let brute = brute_force_solve(&inst, 1 << 20).unwrap();
            assert_eq!(sat, !brute.is_empty(), "{} disagreement", name);
            if let Answer::Solution(h) = &out.answer {
                assert!(brute.contains(h));
            }
            checked += 1;
        }
    }
    println!("AC7 solver/oracle agreement on {} instances: pass", checked);
}

fn enumerate_rows(rows: &[Row], d: usize, p: usize) -> BTreeSet<Vec<usize>> {
    let mut out = BTreeSet::new();
    let total = p.pow(d as u32);
    for k in 0..total {
        let mut v = Vec::with_capacity(d);
        let mut rest = k;
        for _ in 0..d {
            v.push(rest % p);
            rest /= p;
        }
        let ok = rows.iter().all(|r| {
            r.coeffs.iter().zip(&v).map(|(&c, &x)| c * x).sum::<usize>() % p == r.rhs
        });
        if ok {
            out.insert(v);
        }
    }
    out
}

#[test]
fn ac08_gauss_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for p in [2usize, 3, 5] {
        for d in 1..=4usize {
            for _ in 0..30 {
                let nrows = rng.gen_range(0..=d + 1);
                let rows: Vec<Row> = (0..nrows)
                    .map(|_| Row {
                        coeffs: (0..d).map(|_| rng.gen_range(0..p)).collect(),
                        rhs: rng.gen_range(0..p),
                    })
                    .collect();
                let sys = LinearSystem {
                    systems: vec![PrimeSystem { p, cols: (0..d).collect(), rows: rows.clone() }],
                };
                let (_, space) = gauss_solve(&sys);
                let expect = enumerate_rows(&rows, d, p);
                let got: BTreeSet<Vec<usize>> = match &space {
                    Some(s) => s.points(1 << 20).unwrap().into_iter().collect(),
                    None => BTreeSet::new(),
                };
                assert_eq!(got, expect, "p={} d={}", p, d);
                // each elementary operation keeps the solution set
                if !rows.is_empty() {
                    let i = rng.gen_range(0..rows.len());
                    let j = rng.gen_range(0..rows.len());
                    let mut ops = vec![
                        ElementaryOp::Swap(i, j),
                        ElementaryOp::Scale(i, 1 + rng.gen_range(0..p - 1)),
                    ];
                    if i != j {
                        // row addition is elementary only between distinct rows
                        ops.push(ElementaryOp::AddMul(i, j, rng.gen_range(0..p)));
                    }
                    for op in ops {
                        let mut m = rows.clone();
                        apply_elementary(&mut m, p, op);
                        assert_eq!(enumerate_rows(&m, d, p), expect, "{:?}", op);
                    }
                }
            }
        }
    }
    println!("AC8 gaussian elimination against enumeration: pass");
}

#[test]
fn ac09_invariant_relations_are_affine() {
    for name in ["z2", "z3"] {
        let lang = template(name).unwrap();
        for rel in &lang.binary {
            let pts: BTreeSet<Vec<usize>> = rel.iter().map(|&(a, b)| vec![a, b]).collect();
            let (hull, _, exact) = affine_hull(&pts, lang.base).unwrap();
            assert!(exact, "{}: {:?} is not an affine subspace", name, rel);
            assert_eq!(hull.size(), rel.len());
        }
    }
    let z2 = template("z2").unwrap();
    assert_eq!(z2.binary.len(), 11);
    println!("AC9 invariant relations are affine, 11 over Z2: pass");
}

#[test]
fn ac10_four_cases_total() {
    for name in TEMPLATE_NAMES {
        let lang = template(name).unwrap();
        let full: BTreeSet<usize> = (0..lang.base).collect();
        for d in subuniverses(&full, &lang.wnu) {
            if d.len() < 2 {
                continue;
            }
            let gamma = restrict_language(&lang, &d);
            classify_four_cases(&d, &lang.wnu, &gamma)
                .unwrap_or_else(|e| panic!("{} on {:?}: {}", name, d, e));
        }
    }
    println!("AC10 four-cases classification total: pass");
}

#[test]
fn ac11_linked_relation_is_invariant() {
    let mut checked = 0usize;
    for name in TEMPLATE_NAMES {
        let lang = template(name).unwrap();
        for inst in corpus(&lang, 200) {
            if !instance_profile(&inst).cycle_consistent {
                continue;
            }
            for i in 0..inst.n {
                let tuples: BTreeSet<Vec<usize>> = linked_components(&inst, i)
                    .pair_relation()
                    .into_iter()
                    .map(|(a, b)| vec![a, b])
                    .collect();
                assert!(
                    is_polymorphism(&lang.wnu, &tuples),
                    "{}: linked relation of x{} not invariant",
                    name,
                    i
                );
                checked += 1;
            }
        }
    }
    assert!(checked > 0);
    println!("AC11 linked relations invariant on {} checks: pass", checked);
}

// -- AC12: the adversarial suite ---------------------------------------------

fn rejected(inst: &Instance, lang: &Language, trace: &Trace) -> bool {
    !verify_trace(inst, lang, trace, CheckMode::Witness, 1 << 20).unwrap().accept
}

fn accepted(inst: &Instance, lang: &Language, trace: &Trace) -> bool {
    verify_trace(inst, lang, trace, CheckMode::Witness, 1 << 20).unwrap().accept
}

fn solver_trace(inst: &Instance, lang: &Language) -> Trace {
    solve(inst, lang, &SolveConfig::default()).unwrap().trace
}

fn trace_with(name: &str, kind: &str) -> (Instance, Language, Trace) {
    let lang = template(name).unwrap();
    for seed in 0..500u64 {
        let inst = gen_instance(&lang, 2 + (seed % 3) as usize, 0.5, seed);
        let trace = solver_trace(&inst, &lang);
        if trace.steps.iter().any(|s| s.body.kind() == kind) {
            return (inst, lang, trace);
        }
    }
    panic!("no {} trace over {}", kind, name);
}

fn linear_hand_trace() -> (Instance, Language, Trace) {
    let (inst, lang) = example_linear();
    let quotients: Vec<_> = inst
        .domains
        .iter()
        .map(|d| find_linear_quotient(d, &lang.wnu).unwrap().unwrap())
        .collect();
    let d = instance_digest(&inst);
    let mut steps = Vec::new();
    let mut sub = |i: &Instance| Ok(brute_force_solve(i, 1 << 20)?.into_iter().next());
    let out = linear_case_solve(&inst, &lang, &quotients, &mut sub, &mut |s| {
        let body = match s {
            LinStep::Factor { quotients } => StepBody::LinFactor { quotients },
            LinStep::Gauss { systems, consistent, dim } => {
                StepBody::LinGauss { systems, consistent, dim }
            }
            LinStep::Weaken { edge } => StepBody::LinWeaken { edge },
            LinStep::EqAdd { prime, rows, method } => {
                StepBody::LinEqAdd { prime, rows, method: method.to_string() }
            }
        };
        steps.push(TraceStep { input: d.clone(), output: d.clone(), body });
    }, 1 << 16)
    .unwrap();
    let h = match out {
        LinOutcome::Solution(h) => h,
        LinOutcome::NoSolution => panic!("expected a solution"),
    };
    steps.push(TraceStep {
        input: d.clone(),
        output: d.clone(),
        body: StepBody::Answer { value: "yes".into(), assignment: Some(h) },
    });
    (inst, lang, Trace { digest: d, steps })
}

#[test]
fn ac12_checker_adversarial_suite() {
    let mut kinds_mutated: BTreeSet<&str> = BTreeSet::new();

    // cc: misreport the reduced domain
    let (inst, lang) = example_linear();
    let mut t = solver_trace(&inst, &lang);
    assert!(accepted(&inst, &lang, &t));
    t.steps[0].body = StepBody::Cc { action: ReduceAction::Reduce { var: 0, domain: vec![0] } };
    assert!(rejected(&inst, &lang, &t));
    kinds_mutated.insert("cc");

    // irr and weak: fabricate reductions on a stable instance
    let (inst, lang) = example2();
    let genuine = solver_trace(&inst, &lang);
    assert!(accepted(&inst, &lang, &genuine));
    for body in [
        StepBody::Irr { action: ReduceAction::Reduce { var: 0, domain: vec![0] } },
        StepBody::Weak { action: ReduceAction::Empty },
    ] {
        let mut t = genuine.clone();
        let kind = body.kind();
        t.steps.insert(0, TraceStep {
            input: t.digest.clone(),
            output: t.digest.clone(),
            body,
        });
        assert!(rejected(&inst, &lang, &t));
        kinds_mutated.insert(kind);
    }

    // ba, cr, pc: corrupt the witness of a genuine reduction
    for (name, kind) in [("meet2", "ba"), ("selfdual2", "cr"), ("rps", "pc")] {
        let (inst, lang, mut t) = trace_with(name, kind);
        assert!(accepted(&inst, &lang, &t));
        let idx = t.steps.iter().position(|s| s.body.kind() == kind).unwrap();
        match &mut t.steps[idx].body {
            StepBody::Ba { b, .. } => b.clear(),
            StepBody::Cr { transcripts, .. } => transcripts.clear(),
            StepBody::Pc { block, .. } => block.clear(),
            _ => unreachable!(),
        }
        assert!(rejected(&inst, &lang, &t));
        kinds_mutated.insert(kind);
    }

    // lin_factor and lin_gauss: corrupt the linear bookkeeping
    let mut t = genuine.clone();
    let idx = t.steps.iter().position(|s| s.body.kind() == "lin_factor").unwrap();
    t.steps[idx].body = StepBody::LinFactor { quotients: Vec::new() };
    assert!(rejected(&inst, &lang, &t));
    kinds_mutated.insert("lin_factor");

    let mut t = genuine.clone();
    let idx = t.steps.iter().position(|s| s.body.kind() == "lin_gauss").unwrap();
    if let StepBody::LinGauss { dim, .. } = &mut t.steps[idx].body {
        *dim = dim.map(|d| d + 1);
    }
    assert!(rejected(&inst, &lang, &t));
    kinds_mutated.insert("lin_gauss");

    // lin_weaken and lin_eq_add: corrupt the weakening loop
    let (linst, llang, ltrace) = linear_hand_trace();
    assert!(accepted(&linst, &llang, &ltrace));
    let mut t = ltrace.clone();
    let idx = t.steps.iter().position(|s| s.body.kind() == "lin_weaken").unwrap();
    if let StepBody::LinWeaken { edge } = &mut t.steps[idx].body {
        *edge = (2, 0);
    }
    assert!(rejected(&linst, &llang, &t));
    kinds_mutated.insert("lin_weaken");

    let mut t = ltrace.clone();
    let idx = t.steps.iter().position(|s| s.body.kind() == "lin_eq_add").unwrap();
    if let StepBody::LinEqAdd { rows, prime, .. } = &mut t.steps[idx].body {
        rows[0].rhs = (rows[0].rhs + 1) % *prime;
    }
    assert!(rejected(&linst, &llang, &t));
    kinds_mutated.insert("lin_eq_add");

    // oracle: claim satisfiability with a bogus assignment
    let (inst, lang) = example1();
    let cfg = SolveConfig { max_depth: 0, ..SolveConfig::default() };
    let mut t = solve(&inst, &lang, &cfg).unwrap().trace;
    assert!(accepted(&inst, &lang, &t));
    t.steps[0].body = StepBody::Oracle { result: "sat".into(), assignment: Some(vec![0, 0, 0]) };
    assert!(rejected(&inst, &lang, &t));
    kinds_mutated.insert("oracle");

    // answer: flip both directions
    let (inst, lang) = example2();
    let mut t = solver_trace(&inst, &lang);
    let last = t.steps.len() - 1;
    t.steps[last].body = StepBody::Answer { value: "no".into(), assignment: None };
    assert!(rejected(&inst, &lang, &t));
    let (inst, lang) = example1();
    let mut t = solver_trace(&inst, &lang);
    let last = t.steps.len() - 1;
    t.steps[last].body =
        StepBody::Answer { value: "yes".into(), assignment: Some(vec![0, 1, 0]) };
    assert!(rejected(&inst, &lang, &t));
    kinds_mutated.insert("answer");

    let all = [
        "cc", "irr", "weak", "ba", "cr", "pc", "lin_factor", "lin_gauss", "lin_weaken",
        "lin_eq_add", "oracle", "answer",
    ];
    for kind in all {
        assert!(kinds_mutated.contains(kind), "missing mutation for {}", kind);
    }
    println!("AC12 adversarial suite, {} step kinds mutated: pass", kinds_mutated.len());
}
