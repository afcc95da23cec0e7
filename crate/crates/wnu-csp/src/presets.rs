//! Built-in template algebras and small worked instances.

use std::collections::BTreeSet;
use std::sync::OnceLock;

use crate::algebra::{build_invariant_language, OperationTable};
use crate::model::{Instance, Language};

fn names(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

// Relation enumeration for the four-element bases takes a couple of seconds,
// so each built language is constructed once per process.
fn cached(cell: &'static OnceLock<Language>, build: impl FnOnce() -> Language) -> Language {
    cell.get_or_init(build).clone()
}

/// Z2 with the 3-ary group sum x+y+z.  Elements are named a (=0) and b (=1).
pub fn z2_language() -> Language {
    static CELL: OnceLock<Language> = OnceLock::new();
    cached(&CELL, || {
        let wnu = OperationTable::from_fn(2, 3, |x| x.iter().sum::<usize>() % 2);
        build_invariant_language(2, &wnu, Some(names(&["a", "b"]))).unwrap()
    })
}

/// Z3 with the 4-ary sum.  A 3-ary sum over Z3 is no WNU-admissible choice
/// here: each prime of the domain must divide arity-1.
pub fn z3_language() -> Language {
    static CELL: OnceLock<Language> = OnceLock::new();
    cached(&CELL, || {
        let wnu = OperationTable::from_fn(3, 4, |x| x.iter().sum::<usize>() % 3);
        build_invariant_language(3, &wnu, Some(names(&["0", "1", "2"]))).unwrap()
    })
}

/// Two-element meet semilattice with x∧y∧z.
pub fn meet2_language() -> Language {
    static CELL: OnceLock<Language> = OnceLock::new();
    cached(&CELL, || {
        let wnu = OperationTable::from_fn(2, 3, |x| *x.iter().min().unwrap());
        build_invariant_language(2, &wnu, Some(names(&["0", "1"]))).unwrap()
    })
}

/// Z2×Z2 (encoded 0..3 as bit pairs) with the 3-ary sum, i.e. bitwise xor.
pub fn z2z2_language() -> Language {
    static CELL: OnceLock<Language> = OnceLock::new();
    cached(&CELL, || {
        let wnu = OperationTable::from_fn(4, 3, |x| x.iter().fold(0, |a, &b| a ^ b));
        build_invariant_language(4, &wnu, Some(names(&["00", "01", "10", "11"]))).unwrap()
    })
}

/// Z4 with the 5-ary sum.  Not simple: the mod-2 congruence is its minimal
/// linear congruence, with factor Z2.
pub fn z4_language() -> Language {
    static CELL: OnceLock<Language> = OnceLock::new();
    cached(&CELL, || {
        let wnu = OperationTable::from_fn(4, 5, |x| x.iter().sum::<usize>() % 4);
        build_invariant_language(4, &wnu, Some(names(&["0", "1", "2", "3"]))).unwrap()
    })
}

/// A self-dual non-linear two-element algebra: the 5-ary symmetric operation
/// whose value depends on the number of ones, (0,1,1,0,0,1).
pub fn selfdual2_language() -> Language {
    static CELL: OnceLock<Language> = OnceLock::new();
    cached(&CELL, || {
        let profile = [0usize, 1, 1, 0, 0, 1];
        let wnu = OperationTable::from_fn(2, 5, move |x| profile[x.iter().sum::<usize>()]);
        build_invariant_language(2, &wnu, Some(names(&["0", "1"]))).unwrap()
    })
}

/// Rock-paper-scissors: the three-element cyclic tournament, r(x,y) = the
/// winner of x and y.  A binary special WNU whose algebra is simple, has no
/// binary absorption or center, and is not affine — the polynomially complete
/// showcase.
pub fn rps_language() -> Language {
    static CELL: OnceLock<Language> = OnceLock::new();
    cached(&CELL, || {
        let beats = |x: usize, y: usize| (x, y) == (0, 1) || (x, y) == (1, 2) || (x, y) == (2, 0);
        let wnu = OperationTable::from_fn(3, 2, move |a| {
            if a[0] == a[1] || beats(a[0], a[1]) {
                a[0]
            } else {
                a[1]
            }
        });
        build_invariant_language(3, &wnu, Some(names(&["rock", "scissors", "paper"]))).unwrap()
    })
}

pub const TEMPLATE_NAMES: &[&str] = &["z2", "z3", "meet2", "z2z2", "z4", "selfdual2", "rps"];

pub fn template(name: &str) -> Option<Language> {
    match name {
        "z2" => Some(z2_language()),
        "z3" => Some(z3_language()),
        "meet2" => Some(meet2_language()),
        "z2z2" => Some(z2z2_language()),
        "z4" => Some(z4_language()),
        "selfdual2" => Some(selfdual2_language()),
        "rps" => Some(rps_language()),
        _ => None,
    }
}

// ---------------------------------------------------------------------------
// Worked instances

fn dom(list: &[usize]) -> BTreeSet<usize> {
    list.iter().cloned().collect()
}

/// Path x0 → x1 → x2 over Z2, both edges carrying the singleton {(a,b)}.
/// Equivalent to the inconsistent system x1 = b, x1 = a.  No solution.
pub fn example1() -> (Instance, Language) {
    let lang = z2_language();
    let mut inst = Instance::new(3, vec![dom(&[0, 1]); 3]);
    inst.add_edge(0, 1, [(0, 1)]);
    inst.add_edge(1, 2, [(0, 1)]);
    (inst, lang)
}

/// The same path with both edges carrying x+y=1.  Exactly two solutions,
/// (a,b,a) and (b,a,b).
pub fn example2() -> (Instance, Language) {
    let lang = z2_language();
    let mut inst = Instance::new(3, vec![dom(&[0, 1]); 3]);
    inst.add_edge(0, 1, [(0, 1), (1, 0)]);
    inst.add_edge(1, 2, [(0, 1), (1, 0)]);
    (inst, lang)
}

/// Z4 instance whose linear case needs the full iterative loop: the factor
/// system has dimension 1, but only one parity class carries solutions and
/// the system cannot see which.  Coset constraints x0+x1=1, x0=x1+3 pin x1 to
/// x0+1 with 2·x0 = 0, and the mirrored pair on (x0,x2) repeats the
/// obstruction so that one weakening is adopted before equations are added.
/// Solutions: (0,1,1) and (2,3,3).
pub fn example_linear() -> (Instance, Language) {
    let lang = z4_language();
    let mut inst = Instance::new(3, vec![dom(&[0, 1, 2, 3]); 3]);
    inst.add_edge(0, 1, (0..4).map(|a| (a, (5 - a) % 4)));
    inst.add_edge(1, 0, (0..4).map(|b| (b, (b + 3) % 4)));
    inst.add_edge(0, 2, (0..4).map(|a| (a, (5 - a) % 4)));
    inst.add_edge(2, 0, (0..4).map(|c| (c, (c + 3) % 4)));
    (inst, lang)
}

// The figure instances use a five-element base with letter names
// a,b,c,d,e = 0,1,2,3,4.  Their relations are not tied to a template
// algebra; where an operation is required the conservative dual
// discriminator below serves as the WNU.
fn figure_names() -> Vec<String> {
    names(&["a", "b", "c", "d", "e"])
}

/// Dual discriminator: y if y=z, else x.  A conservative special WNU, so
/// every subset of the base is a subuniverse.
fn dual_discriminator(base: usize) -> OperationTable {
    OperationTable::from_fn(base, 3, |x| if x[1] == x[2] { x[1] } else { x[0] })
}

pub fn figure_language() -> Language {
    let base = 5;
    let mut unary = Vec::new();
    for mask in 1u32..(1 << base) {
        unary.push((0..base).filter(|&e| mask & (1 << e) != 0).collect());
    }
    unary.sort_by_key(|r: &BTreeSet<usize>| (r.len(), r.clone()));
    // the relations the figure instances actually use, so that they validate
    let mut binary: BTreeSet<BTreeSet<(usize, usize)>> = BTreeSet::new();
    let wnu = dual_discriminator(base);
    for (inst, _) in [figure1(), figure2(), figure3()] {
        for rel in inst.edges.values() {
            binary.insert(rel.clone());
            // invariant one-pair deletions, so perturbed figures validate too
            for p in rel {
                let mut sub = rel.clone();
                sub.remove(p);
                if !sub.is_empty() && crate::algebra::preserves_pairs(&wnu, &sub) {
                    binary.insert(sub);
                }
            }
        }
    }
    let mut binary: Vec<_> = binary.into_iter().collect();
    binary.sort_by_key(|r| (r.len(), r.iter().cloned().collect::<Vec<_>>()));
    Language {
        base,
        element_names: figure_names(),
        wnu: dual_discriminator(base),
        unary,
        binary,
    }
}

/// Cycle-consistent but not linked: no path connects a and b within D_0.
pub fn figure1() -> (Instance, Vec<String>) {
    let mut inst = Instance::new(3, vec![dom(&[0, 1]), dom(&[0, 2]), dom(&[1, 3])]);
    inst.add_edge(0, 1, [(0, 0), (1, 2)]);
    inst.add_edge(2, 1, [(3, 0), (1, 2)]);
    inst.add_edge(2, 0, [(3, 0), (1, 1)]);
    (inst, figure_names())
}

/// Linked but not cycle-consistent; propagation empties R(0,1).
pub fn figure2() -> (Instance, Vec<String>) {
    let mut inst = Instance::new(3, vec![dom(&[0, 1]), dom(&[0, 2]), dom(&[1, 3])]);
    inst.add_edge(0, 1, [(0, 2), (1, 0)]);
    inst.add_edge(2, 1, [(3, 0), (1, 2)]);
    inst.add_edge(2, 0, [(3, 0), (1, 1)]);
    (inst, figure_names())
}

/// Cycle-consistent with non-trivial linked components {a,e} | {b} on D_0.
pub fn figure3() -> (Instance, Vec<String>) {
    let mut inst = Instance::new(
        3,
        vec![dom(&[0, 1, 4]), dom(&[0, 2, 4]), dom(&[1, 3])],
    );
    inst.add_edge(0, 1, [(0, 0), (4, 4), (1, 2)]);
    inst.add_edge(2, 1, [(3, 0), (3, 4), (1, 2)]);
    inst.add_edge(2, 0, [(3, 0), (3, 4), (1, 1)]);
    (inst, figure_names())
}

pub fn figure3_language() -> Language {
    figure_language()
}

/// Seeded random instance over a template language. Edge count scales with
/// `density` (clamped to at least one); unary restrictions that would empty a
/// relation are skipped, so the result always passes `validate_instance`.
pub fn gen_instance(lang: &Language, n: usize, density: f64, seed: u64) -> Instance {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let n = n.max(2);
    let mut inst = Instance::new(n, vec![(0..lang.base).collect(); n]);
    let pairs = n * (n - 1);
    let edges = ((density * pairs as f64).round() as usize).clamp(1, pairs);
    for _ in 0..edges {
        let i = rng.gen_range(0..n);
        let mut j = rng.gen_range(0..n);
        if i == j {
            j = (j + 1) % n;
        }
        let rel = &lang.binary[rng.gen_range(0..lang.binary.len())];
        inst.add_edge(i, j, rel.iter().cloned());
    }
    for v in 0..n {
        if rng.gen_bool(0.3) {
            let r = &lang.unary[rng.gen_range(0..lang.unary.len())];
            let d: BTreeSet<usize> = inst.domains[v].intersection(r).cloned().collect();
            if d.is_empty() {
                continue;
            }
            let cand = inst.restrict(v, &d).expect("subset of the domain");
            if cand.edges.values().all(|rel| !rel.is_empty()) {
                inst = cand;
            }
        }
    }
    inst
}
