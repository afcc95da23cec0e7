//! Consistency reductions: cycle-consistency propagation, linked components,
//! irreducibility reduction, and weaker-instance reduction.

use std::collections::{BTreeMap, BTreeSet};

use crate::algebra::{enumerate_congruences, Congruence};
use crate::model::{Elem, Instance, Language, Pair};
use crate::Result;

/// Outcome of a reduction pass.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Reduction {
    Unchanged,
    Reduced {
        /// first variable whose domain shrank (or the first variable when only
        /// edge relations shrank)
        var: usize,
        new_domain: BTreeSet<Elem>,
        instance: Instance,
    },
    NoSolution,
}

impl Reduction {
    pub fn reduced_instance(&self) -> Option<&Instance> {
        match self {
            Reduction::Reduced { instance, .. } => Some(instance),
            _ => None,
        }
    }
}

/// Sub-solver callback: decides solvability of an instance.
pub type SolveCheck<'a> = dyn FnMut(&Instance) -> Result<bool> + 'a;

// ---------------------------------------------------------------------------
// Cycle consistency

/// The full propagation pipeline: pairwise relations initialized from the
/// constraints, 1-consistency, triangle propagation to fixpoint, projection
/// and rebuild.  NoSolution iff some projected domain empties.
pub fn cycle_consistency_reduce(inst: &Instance) -> Reduction {
    let n = inst.n;
    if n == 0 {
        return Reduction::Unchanged;
    }
    // R0: all ordered pairs, intersected with constraints (both directions);
    // diagonal on (i,i)
    let mut r: BTreeMap<(usize, usize), BTreeSet<Pair>> = BTreeMap::new();
    for i in 0..n {
        for j in 0..n {
            let mut set = BTreeSet::new();
            for &a in &inst.domains[i] {
                for &b in &inst.domains[j] {
                    if i == j && a != b {
                        continue;
                    }
                    let mut ok = true;
                    if let Some(e) = inst.edges.get(&(i, j)) {
                        ok &= e.contains(&(a, b));
                    }
                    if let Some(e) = inst.edges.get(&(j, i)) {
                        ok &= e.contains(&(b, a));
                    }
                    if ok {
                        set.insert((a, b));
                    }
                }
            }
            r.insert((i, j), set);
        }
    }
    loop {
        let mut changed = false;
        // 1-consistency: a survives in Pr(i) iff it has support on every pair
        let mut pr: Vec<BTreeSet<Elem>> = Vec::with_capacity(n);
        for i in 0..n {
            let mut keep = BTreeSet::new();
            'elem: for &a in inst.domains[i].iter() {
                if !r[&(i, i)].contains(&(a, a)) {
                    continue;
                }
                for j in 0..n {
                    if !r[&(i, j)].iter().any(|&(x, _)| x == a) {
                        continue 'elem;
                    }
                }
                keep.insert(a);
            }
            pr.push(keep);
        }
        for (&(i, j), rel) in r.iter_mut() {
            let before = rel.len();
            rel.retain(|&(a, b)| pr[i].contains(&a) && pr[j].contains(&b));
            changed |= rel.len() != before;
        }
        // triangle propagation: (a,b) on (i,j) must extend through every k
        loop {
            let mut round = false;
            let snapshot = r.clone();
            for (&(i, j), rel) in r.iter_mut() {
                let before = rel.len();
                rel.retain(|&(a, b)| {
                    (0..n).all(|k| {
                        pr[k].iter().any(|&c| {
                            snapshot[&(i, k)].contains(&(a, c))
                                && snapshot[&(k, j)].contains(&(c, b))
                        })
                    })
                });
                round |= rel.len() != before;
            }
            if !round {
                break;
            }
            changed = true;
        }
        if !changed {
            break;
        }
    }
    // projections and rebuild
    let pr_cc: Vec<BTreeSet<Elem>> = (0..n)
        .map(|i| {
            inst.domains[i]
                .iter()
                .filter(|&&a| r[&(i, i)].contains(&(a, a)))
                .cloned()
                .collect()
        })
        .collect();
    if pr_cc.iter().any(|d| d.is_empty()) {
        return Reduction::NoSolution;
    }
    let mut out = inst.clone();
    out.domains = pr_cc;
    for (&(i, j), rel) in out.edges.iter_mut() {
        *rel = r[&(i, j)].clone();
    }
    if out == *inst {
        return Reduction::Unchanged;
    }
    let var = (0..n)
        .find(|&i| out.domains[i] != inst.domains[i])
        .unwrap_or(0);
    let new_domain = out.domains[var].clone();
    Reduction::Reduced { var, new_domain, instance: out }
}

// ---------------------------------------------------------------------------
// Linked components

/// Partition of D_i under the reachability relation: a,b linked iff some
/// undirected path through the constraints connects them.  Union-find over
/// (variable, element) nodes.
pub fn linked_components(inst: &Instance, i: usize) -> Congruence {
    let mut nodes: Vec<(usize, Elem)> = Vec::new();
    for (v, d) in inst.domains.iter().enumerate() {
        for &a in d {
            nodes.push((v, a));
        }
    }
    let idx: BTreeMap<(usize, Elem), usize> =
        nodes.iter().enumerate().map(|(k, &n)| (n, k)).collect();
    let mut parent: Vec<usize> = (0..nodes.len()).collect();
    fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (&(u, v), rel) in &inst.edges {
        for &(a, b) in rel {
            if let (Some(&x), Some(&y)) = (idx.get(&(u, a)), idx.get(&(v, b))) {
                let (rx, ry) = (find(&mut parent, x), find(&mut parent, y));
                if rx != ry {
                    let (lo, hi) = if rx < ry { (rx, ry) } else { (ry, rx) };
                    parent[hi] = lo;
                }
            }
        }
    }
    let mut groups: BTreeMap<usize, BTreeSet<Elem>> = BTreeMap::new();
    for &a in &inst.domains[i] {
        let root = find(&mut parent, idx[&(i, a)]);
        groups.entry(root).or_default().insert(a);
    }
    Congruence::from_blocks(groups.into_values().collect())
}

pub fn variable_occurs_in_edge(inst: &Instance, i: usize) -> bool {
    inst.edges.keys().any(|&(a, b)| a == i || b == i)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InstanceProfile {
    pub one_consistent: bool,
    pub cycle_consistent: bool,
    pub linked: bool,
    pub fragmented: bool,
}

fn one_consistent(inst: &Instance) -> bool {
    if inst.domains.iter().any(|d| d.is_empty()) {
        return false;
    }
    for (&(i, j), rel) in &inst.edges {
        let ok = inst.domains[i]
            .iter()
            .all(|&a| rel.iter().any(|&(x, _)| x == a))
            && inst.domains[j]
                .iter()
                .all(|&b| rel.iter().any(|&(_, y)| y == b));
        if !ok {
            return false;
        }
    }
    true
}

fn fragmented(inst: &Instance) -> bool {
    if inst.n <= 1 {
        return false;
    }
    let mut parent: Vec<usize> = (0..inst.n).collect();
    fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for &(i, j) in inst.edges.keys() {
        let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
        if ri != rj {
            parent[ri.max(rj)] = ri.min(rj);
        }
    }
    let roots: BTreeSet<usize> = (0..inst.n).map(|i| find(&mut parent, i)).collect();
    roots.len() > 1
}

pub fn instance_profile(inst: &Instance) -> InstanceProfile {
    let linked = (0..inst.n)
        .filter(|&i| variable_occurs_in_edge(inst, i))
        .all(|i| linked_components(inst, i).blocks.len() <= 1);
    InstanceProfile {
        one_consistent: one_consistent(inst),
        cycle_consistent: cycle_consistency_reduce(inst) == Reduction::Unchanged,
        linked,
        fragmented: fragmented(inst),
    }
}

// ---------------------------------------------------------------------------
// Irreducibility

/// Witness data for an irreducibility step: the anchor (variable, maximal
/// congruence) and the propagated partitions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IrrWitness {
    pub anchor: usize,
    pub sigma: Congruence,
    pub partitions: BTreeMap<usize, Congruence>,
}

/// Partition induced on the target domain of an edge: two elements are
/// related iff they have σ-related supports across the relation.
fn induced_pairs(
    rel: &BTreeSet<Pair>,
    sigma: &Congruence,
    target: &BTreeSet<Elem>,
    source_is_first: bool,
) -> BTreeSet<Pair> {
    let mut out = BTreeSet::new();
    for &a in target {
        for &b in target {
            let hit = rel.iter().any(|&(x1, y1)| {
                let (sa, ta) = if source_is_first { (x1, y1) } else { (y1, x1) };
                if ta != a {
                    return false;
                }
                rel.iter().any(|&(x2, y2)| {
                    let (sb, tb) = if source_is_first { (x2, y2) } else { (y2, x2) };
                    tb == b && sigma.related(sa, sb)
                })
            });
            if hit {
                out.insert((a, b));
            }
        }
    }
    out
}

/// The propagated-partition fixpoint from one anchor congruence: partitions
/// spread along edges, but only into (or onto) domains where the induced
/// partition stays proper (at least two classes).
pub fn propagate_partitions(
    inst: &Instance,
    anchor: usize,
    sigma: &Congruence,
) -> BTreeMap<usize, Congruence> {
    let mut parts: BTreeMap<usize, Congruence> = BTreeMap::new();
    parts.insert(anchor, sigma.clone());
    loop {
        let mut changed = false;
        let keys: Vec<usize> = parts.keys().cloned().collect();
        for j in keys {
            let sigma_j = parts[&j].clone();
            for (&(u, v), rel) in &inst.edges {
                let (k, source_first) = if u == j && v != j {
                    (v, true)
                } else if v == j && u != j {
                    (u, false)
                } else {
                    continue;
                };
                let tau = induced_pairs(rel, &sigma_j, &inst.domains[k], source_first);
                let mut pairs = tau;
                if let Some(existing) = parts.get(&k) {
                    pairs.extend(existing.pair_relation());
                }
                let merged = Congruence::from_pairs(&inst.domains[k], &pairs);
                if merged.blocks.len() < 2 {
                    continue; // conflation to a single class: not proper
                }
                if parts.get(&k) != Some(&merged) {
                    parts.insert(k, merged);
                    changed = true;
                }
            }
        }
        if !changed {
            return parts;
        }
    }
}

/// Irreducibility reduction: anchors (variable, maximal congruence) in
/// canonical order; the propagated subinstance's solution set must be
/// subdirect, otherwise the first offending variable is reduced.
pub fn irreducibility_reduce(
    inst: &Instance,
    lang: &Language,
    solve: &mut SolveCheck,
) -> Result<(Reduction, Option<IrrWitness>)> {
    for i in 0..inst.n {
        if inst.domains[i].len() < 2 {
            continue;
        }
        let congs = enumerate_congruences(&inst.domains[i], &lang.wnu);
        for info in congs.iter().filter(|c| c.maximal) {
            let sigma = &info.congruence;
            let parts = propagate_partitions(inst, i, sigma);
            let vars: BTreeSet<usize> = parts.keys().cloned().collect();
            let sub = inst.project(&vars);
            for &k in &vars {
                let mut surviving = BTreeSet::new();
                for &b in &inst.domains[k] {
                    let restricted = sub.restrict(k, &BTreeSet::from([b]))?;
                    if solve(&restricted)? {
                        surviving.insert(b);
                    }
                }
                if surviving.len() == inst.domains[k].len() {
                    continue;
                }
                let witness = IrrWitness {
                    anchor: i,
                    sigma: sigma.clone(),
                    partitions: parts.clone(),
                };
                if surviving.is_empty() {
                    return Ok((Reduction::NoSolution, Some(witness)));
                }
                let reduced = inst.restrict(k, &surviving)?;
                return Ok((
                    Reduction::Reduced { var: k, new_domain: surviving, instance: reduced },
                    Some(witness),
                ));
            }
        }
    }
    Ok((Reduction::Unchanged, None))
}

// ---------------------------------------------------------------------------
// Weaker constraints

fn full_product(a: &BTreeSet<Elem>, b: &BTreeSet<Elem>) -> BTreeSet<Pair> {
    a.iter().flat_map(|&x| b.iter().map(move |&y| (x, y))).collect()
}

fn has_dummy_coordinate(rel: &BTreeSet<Pair>, di: &BTreeSet<Elem>, dj: &BTreeSet<Elem>) -> bool {
    let pr1: BTreeSet<Elem> = rel.iter().map(|&(a, _)| a).collect();
    let pr2: BTreeSet<Elem> = rel.iter().map(|&(_, b)| b).collect();
    // first coordinate dummy: R = D_i × pr2(R)
    let dummy1 = di.iter().all(|&a| pr2.iter().all(|&b| rel.contains(&(a, b))));
    let dummy2 = dj.iter().all(|&b| pr1.iter().all(|&a| rel.contains(&(a, b))));
    dummy1 || dummy2
}

/// Replace the selected edges by the intersection of all their weaker
/// constraints: the projections (arity-1 weaker constraints, kept on the edge
/// since domains never change) and every non-dummy binary relation of Γ
/// restricted to D_i×D_j strictly containing the relation, excluding the full
/// relation.  An edge whose only cover is the full relation is deleted.
pub fn weaken_constraints(
    inst: &Instance,
    which: Option<(usize, usize)>,
    lang: &Language,
) -> Instance {
    let mut out = inst.clone();
    let keys: Vec<(usize, usize)> = inst
        .edges
        .keys()
        .filter(|&&k| which.is_none() || which == Some(k))
        .cloned()
        .collect();
    for (i, j) in keys {
        let rel = &inst.edges[&(i, j)];
        let di = &inst.domains[i];
        let dj = &inst.domains[j];
        let full = full_product(di, dj);
        let pr1: BTreeSet<Elem> = rel.iter().map(|&(a, _)| a).collect();
        let pr2: BTreeSet<Elem> = rel.iter().map(|&(_, b)| b).collect();
        let mut weak = full_product(&pr1, &pr2);
        for cand in &lang.binary {
            let restricted: BTreeSet<Pair> = cand
                .iter()
                .filter(|&&(a, b)| di.contains(&a) && dj.contains(&b))
                .cloned()
                .collect();
            if restricted.len() <= rel.len() || !rel.is_subset(&restricted) {
                continue;
            }
            if restricted == full || has_dummy_coordinate(&restricted, di, dj) {
                continue;
            }
            weak = weak.intersection(&restricted).cloned().collect();
        }
        if weak == full {
            out.edges.remove(&(i, j));
        } else {
            out.edges.insert((i, j), weak);
        }
    }
    out
}

/// Weaker-instance reduction: the solution set of the simultaneously weakened
/// instance must be subdirect; otherwise reduce the first offending variable
/// (NoSolution when every value of it fails).
pub fn weaker_instance_reduce(
    inst: &Instance,
    lang: &Language,
    solve: &mut SolveCheck,
) -> Result<Reduction> {
    let weak = weaken_constraints(inst, None, lang);
    for i in 0..inst.n {
        let mut surviving = BTreeSet::new();
        for &b in &inst.domains[i] {
            let restricted = weak.restrict(i, &BTreeSet::from([b]))?;
            if solve(&restricted)? {
                surviving.insert(b);
            }
        }
        if surviving.len() == inst.domains[i].len() {
            continue;
        }
        if surviving.is_empty() {
            return Ok(Reduction::NoSolution);
        }
        let reduced = inst.restrict(i, &surviving)?;
        return Ok(Reduction::Reduced { var: i, new_domain: surviving, instance: reduced });
    }
    Ok(Reduction::Unchanged)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::brute_force_solve;
    use crate::presets;

    fn brute_check<'a>() -> impl FnMut(&Instance) -> Result<bool> + 'a {
        |inst: &Instance| Ok(!brute_force_solve(inst, 1 << 20)?.is_empty())
    }

    // element codes used by the figure presets
    const A: usize = 0;
    const B: usize = 1;
    const C: usize = 2;
    const D: usize = 3;
    const E: usize = 4;

    #[test]
    fn figure1_profile_and_linked_classes() {
        let (inst, _) = presets::figure1();
        let p = instance_profile(&inst);
        assert!(p.one_consistent);
        assert!(p.cycle_consistent);
        assert!(!p.linked);
        assert!(!p.fragmented);
        let lc = linked_components(&inst, 0);
        assert_eq!(
            lc.blocks,
            vec![BTreeSet::from([A]), BTreeSet::from([B])]
        );
        // adding (d,c) to E^{21} links the instance
        let mut linked = inst.clone();
        linked.edges.get_mut(&(2, 1)).unwrap().insert((D, C));
        let p2 = instance_profile(&linked);
        assert!(p2.linked);
    }

    #[test]
    fn figure2_profile_and_cc_failure() {
        let (inst, _) = presets::figure2();
        let p = instance_profile(&inst);
        assert!(p.one_consistent);
        assert!(!p.cycle_consistent);
        assert!(p.linked);
        assert!(!p.fragmented);
        assert_eq!(cycle_consistency_reduce(&inst), Reduction::NoSolution);
        assert!(brute_force_solve(&inst, 1 << 20).unwrap().is_empty());
    }

    #[test]
    fn figure3_linked_partitions() {
        let (inst, _) = presets::figure3();
        assert_eq!(
            linked_components(&inst, 0).blocks,
            vec![BTreeSet::from([A, E]), BTreeSet::from([B])]
        );
        assert_eq!(
            linked_components(&inst, 1).blocks,
            vec![BTreeSet::from([A, E]), BTreeSet::from([C])]
        );
        assert_eq!(
            linked_components(&inst, 2).blocks,
            vec![BTreeSet::from([B]), BTreeSet::from([D])]
        );
    }

    #[test]
    fn cc_reduce_is_idempotent_and_keeps_fixpoints() {
        let (fig1, _) = presets::figure1();
        assert_eq!(cycle_consistency_reduce(&fig1), Reduction::Unchanged);
        // all-full relations are a fixpoint
        let (mut full, _) = presets::example2();
        for rel in full.edges.values_mut() {
            *rel = [(0, 0), (0, 1), (1, 0), (1, 1)].into_iter().collect();
        }
        assert_eq!(cycle_consistency_reduce(&full), Reduction::Unchanged);
        // Example 1 is not 1-consistent: x1 needs both an incoming and an
        // outgoing edge, which no value provides
        let (ex1, _) = presets::example1();
        assert_eq!(cycle_consistency_reduce(&ex1), Reduction::NoSolution);
    }

    #[test]
    fn cc_reduction_preserves_solutions() {
        // a reducible but satisfiable instance: x0 -> x1 with E = {(a,b)},
        // full domains; CC trims to singletons
        let (mut inst, _) = presets::example1();
        inst.edges.remove(&(1, 2));
        let red = cycle_consistency_reduce(&inst);
        match red {
            Reduction::Reduced { ref instance, .. } => {
                assert_eq!(instance.domains[0], BTreeSet::from([0]));
                assert_eq!(instance.domains[1], BTreeSet::from([1]));
                let before = brute_force_solve(&inst, 1 << 20).unwrap();
                let after = brute_force_solve(instance, 1 << 20).unwrap();
                assert!(!before.is_empty());
                assert_eq!(before.is_empty(), after.is_empty());
                // idempotence
                assert_eq!(cycle_consistency_reduce(instance), Reduction::Unchanged);
            }
            other => panic!("expected reduction, got {:?}", other),
        }
    }

    #[test]
    fn fragmented_flag() {
        let (mut inst, _) = presets::example2();
        inst.n = 4;
        inst.domains.push(BTreeSet::from([0, 1]));
        // edges (0,1),(1,2) leave variable 3 isolated
        assert!(instance_profile(&inst).fragmented);
    }

    #[test]
    fn figure3_irreducibility_unchanged() {
        let (inst, _) = presets::figure3();
        // the anchor partition {{a,e},{b}} on D_0 propagates to the whole
        // instance whose solution set is subdirect
        let sigma = Congruence::from_blocks(vec![BTreeSet::from([A, E]), BTreeSet::from([B])]);
        let parts = propagate_partitions(&inst, 0, &sigma);
        assert_eq!(parts.len(), 3);
        assert_eq!(
            parts[&1].blocks,
            vec![BTreeSet::from([A, E]), BTreeSet::from([C])]
        );
        assert_eq!(
            parts[&2].blocks,
            vec![BTreeSet::from([B]), BTreeSet::from([D])]
        );
        let sols = brute_force_solve(&inst, 1 << 20).unwrap();
        assert_eq!(
            sols,
            vec![vec![A, A, D], vec![B, C, B], vec![E, E, D]]
        );
    }

    #[test]
    fn figure3_variant_reduces() {
        // removing (b,c) from E^{21} makes x2=b unsupported in the projection
        let (mut inst, _) = presets::figure3();
        inst.edges.get_mut(&(2, 1)).unwrap().remove(&(B, C));
        // the variant is no longer cycle-consistent as given; restore a
        // comparable state by checking the irreducibility pass directly
        let lang = presets::figure3_language();
        let mut cb = brute_check();
        let (red, witness) = irreducibility_reduce(&inst, &lang, &mut cb).unwrap();
        match red {
            Reduction::Reduced { var, new_domain, ref instance } => {
                // x0 = b is the first value (in variable order) that no longer
                // extends; the reduction must keep every actual solution
                assert_eq!(var, 0);
                assert_eq!(new_domain, BTreeSet::from([A, E]));
                let before = brute_force_solve(&inst, 1 << 20).unwrap();
                let after = brute_force_solve(instance, 1 << 20).unwrap();
                assert_eq!(before, after);
                assert_eq!(after.len(), 2);
            }
            other => panic!("expected reduction, got {:?}", other),
        }
        assert!(witness.is_some());
    }

    #[test]
    fn weaken_z2_singleton_keeps_relation() {
        let (inst, lang) = presets::example1();
        let weak = weaken_constraints(&inst, None, &lang);
        // covers {x=0}∩{y=1} (the projections) and {x+y=1}; intersection is
        // the original singleton
        assert_eq!(weak.edges[&(0, 1)], BTreeSet::from([(0, 1)]));
        assert_eq!(weak.edges[&(1, 2)], BTreeSet::from([(0, 1)]));
    }

    #[test]
    fn weaken_z2_coset_deletes_edge() {
        let (inst, lang) = presets::example2();
        let weak = weaken_constraints(&inst, None, &lang);
        // x+y=1 has no proper non-full cover in the Z2 language
        assert!(weak.edges.is_empty());
        // absent edge: weakening is the identity
        let again = weaken_constraints(&weak, Some((0, 1)), &lang);
        assert_eq!(again, weak);
    }

    #[test]
    fn weaker_instance_reduce_outcomes() {
        // edgeless weakening: every value extends
        let (inst, lang) = presets::example2();
        let mut cb = brute_check();
        assert_eq!(
            weaker_instance_reduce(&inst, &lang, &mut cb).unwrap(),
            Reduction::Unchanged
        );
        // Example 1: the weak instance equals the instance (singleton
        // constraints are kept by the cover intersection), so no value of x0
        // extends at all
        let (ex1, lang1) = presets::example1();
        let mut cb = brute_check();
        assert_eq!(
            weaker_instance_reduce(&ex1, &lang1, &mut cb).unwrap(),
            Reduction::NoSolution
        );
    }

    #[test]
    fn linked_relation_is_congruence_on_cc_instances() {
        // cycle-consistent instance over the Z2 language
        let (inst, lang) = presets::example2();
        assert!(instance_profile(&inst).cycle_consistent);
        for i in 0..inst.n {
            let lc = linked_components(&inst, i);
            assert!(lc.is_congruence(&lang.wnu), "variable {}", i);
        }
    }
}
