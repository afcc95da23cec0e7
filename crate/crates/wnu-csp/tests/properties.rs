//! Randomized invariants: reductions never lose solutions, weakening only
//! relaxes, traces survive serialization, and the generator is deterministic.

use std::collections::BTreeSet;

use proptest::prelude::*;
use wnu_csp::certkit::{parse_trace, serialize_trace};
use wnu_csp::consistency::{cycle_consistency_reduce, weaken_constraints, Reduction};
use wnu_csp::linear::{affine_hull, echelonize, Row};
use wnu_csp::model::{brute_force_solve, validate_instance};
use wnu_csp::presets::{gen_instance, template, TEMPLATE_NAMES};
use wnu_csp::solver::{solve, SolveConfig};

fn template_and_seed() -> impl Strategy<Value = (usize, u64, usize)> {
    (0..TEMPLATE_NAMES.len(), any::<u64>(), 2usize..=4)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn generator_is_deterministic_and_valid((t, seed, n) in template_and_seed()) {
        let lang = template(TEMPLATE_NAMES[t]).unwrap();
        let a = gen_instance(&lang, n, 0.4, seed);
        let b = gen_instance(&lang, n, 0.4, seed);
        prop_assert_eq!(&a, &b);
        prop_assert!(validate_instance(&a, &lang).is_empty());
    }

    #[test]
    fn cycle_consistency_preserves_solutions((t, seed, n) in template_and_seed()) {
        let lang = template(TEMPLATE_NAMES[t]).unwrap();
        let inst = gen_instance(&lang, n, 0.4, seed);
        let before = brute_force_solve(&inst, 1 << 20).unwrap();
        match cycle_consistency_reduce(&inst) {
            Reduction::NoSolution => prop_assert!(before.is_empty()),
            Reduction::Reduced { instance, .. } => {
                let after = brute_force_solve(&instance, 1 << 20).unwrap();
                prop_assert_eq!(before, after);
            }
            Reduction::Unchanged => {}
        }
    }

    #[test]
    fn weakening_only_relaxes((t, seed, n) in template_and_seed()) {
        let lang = template(TEMPLATE_NAMES[t]).unwrap();
        let inst = gen_instance(&lang, n, 0.4, seed);
        let weak = weaken_constraints(&inst, None, &lang);
        for h in brute_force_solve(&inst, 1 << 20).unwrap() {
            prop_assert!(weak.is_solution(&h));
        }
    }

    #[test]
    fn traces_survive_serialization((t, seed, n) in template_and_seed()) {
        let lang = template(TEMPLATE_NAMES[t]).unwrap();
        let inst = gen_instance(&lang, n, 0.4, seed);
        let out = solve(&inst, &lang, &SolveConfig::default()).unwrap();
        let parsed = parse_trace(&serialize_trace(&out.trace)).unwrap();
        prop_assert_eq!(parsed, out.trace);
    }

    #[test]
    fn affine_hull_contains_and_is_idempotent(
        p in prop::sample::select(vec![2usize, 3, 5]),
        pts in prop::collection::btree_set(prop::collection::vec(0usize..5, 3), 1..12),
    ) {
        let pts: BTreeSet<Vec<usize>> =
            pts.into_iter().map(|v| v.into_iter().map(|x| x % p).collect()).collect();
        let (hull, rows, exact) = affine_hull(&pts, p).unwrap();
        for v in &pts {
            prop_assert!(hull.contains(v));
            for r in &rows {
                let lhs: usize =
                    r.coeffs.iter().zip(v).map(|(&c, &x)| c * x).sum::<usize>() % p;
                prop_assert_eq!(lhs, r.rhs);
            }
        }
        prop_assert_eq!(exact, hull.size() == pts.len());
        let members: BTreeSet<Vec<usize>> = hull.members().into_iter().collect();
        let (hull2, _, exact2) = affine_hull(&members, p).unwrap();
        prop_assert!(exact2);
        prop_assert_eq!(hull2.size(), hull.size());
    }

    #[test]
    fn echelonization_preserves_solution_sets(
        p in prop::sample::select(vec![2usize, 3, 5]),
        raw in prop::collection::vec((prop::collection::vec(0usize..5, 3), 0usize..5), 0..5),
    ) {
        let d = 3;
        let rows: Vec<Row> = raw
            .into_iter()
            .map(|(coeffs, rhs)| Row {
                coeffs: coeffs.into_iter().map(|c| c % p).collect(),
                rhs: rhs % p,
            })
            .collect();
        let solutions = |rows: &[Row]| -> BTreeSet<Vec<usize>> {
            let mut out = BTreeSet::new();
            for k in 0..p.pow(d as u32) {
                let mut v = Vec::new();
                let mut rest = k;
                for _ in 0..d {
                    v.push(rest % p);
                    rest /= p;
                }
                if rows.iter().all(|r| {
                    r.coeffs.iter().zip(&v).map(|(&c, &x)| c * x).sum::<usize>() % p == r.rhs
                }) {
                    out.insert(v);
                }
            }
            out
        };
        let before = solutions(&rows);
        let mut ech = rows.clone();
        let pivots = echelonize(&mut ech, p);
        prop_assert_eq!(solutions(&ech), before);
        // echelon shape: pivot columns strictly increase
        for w in pivots.windows(2) {
            prop_assert!(w[0] < w[1]);
        }
    }
}
