//! The linear case: factorization by minimal linear congruences, affine hulls
//! over prime fields, Gaussian elimination, and the iterative equation-adding
//! loop.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::algebra::LinearQuotient;
use crate::consistency::weaken_constraints;
use crate::model::{Assignment, Instance, Language};
use crate::{Error, Result};

/// Sub-solver callback: returns a solution of the given instance, if any.
pub type SubSolve<'a> = dyn FnMut(&Instance) -> Result<Option<Assignment>> + 'a;

// ---------------------------------------------------------------------------
// Factorization

/// An instance quotiented variable-wise by minimal linear congruences,
/// together with the coordinates z assigned to each variable: variable i
/// occupies z positions var_offsets[i] .. var_offsets[i+1], one per prime of
/// its signature.
#[derive(Clone, Debug)]
pub struct FactorizedInstance {
    pub quotients: Vec<LinearQuotient>,
    /// block-index instance: domains are 0..#blocks, edges hold block pairs
    /// (E1, E2) with (E1 × E2) ∩ R ≠ ∅
    pub factor: Instance,
    pub var_offsets: Vec<usize>,
    /// prime of every global z coordinate
    pub z_primes: Vec<usize>,
}

impl FactorizedInstance {
    pub fn n(&self) -> usize {
        self.quotients.len()
    }

    pub fn nz(&self) -> usize {
        self.z_primes.len()
    }

    /// canonical map: element of D_i → block index
    pub fn h_c(&self, var: usize, a: usize) -> usize {
        self.quotients[var]
            .sigma
            .block_index_of(a)
            .expect("element outside carrier")
    }

    /// z coordinates of a block of variable `var`
    pub fn coords(&self, var: usize, block: usize) -> &[usize] {
        &self.quotients[var].iso[block]
    }

    /// block of variable `var` with the given residue vector
    pub fn block_of_coords(&self, var: usize, v: &[usize]) -> Option<usize> {
        self.quotients[var].iso.iter().position(|w| w == v)
    }

    /// restrict every domain of `inst` to the block named by the global
    /// z vector
    pub fn restrict_to_point(&self, inst: &Instance, z: &[usize]) -> Result<Instance> {
        let mut cur = inst.clone();
        for i in 0..self.n() {
            let lo = self.var_offsets[i];
            let hi = self.var_offsets[i + 1];
            let block = self.block_of_coords(i, &z[lo..hi]).ok_or_else(|| {
                Error::Internal(format!("no block of variable {} has coordinates {:?}", i, &z[lo..hi]))
            })?;
            cur = cur.restrict(i, &self.quotients[i].factor.blocks[block])?;
        }
        Ok(cur)
    }
}

pub fn factorize_instance(
    inst: &Instance,
    quotients: Vec<LinearQuotient>,
) -> Result<FactorizedInstance> {
    if quotients.len() != inst.n {
        return Err(Error::Precondition(
            "one linear quotient per variable required".into(),
        ));
    }
    for (i, q) in quotients.iter().enumerate() {
        if q.sigma.carrier != inst.domains[i] {
            return Err(Error::Precondition(format!(
                "congruence carrier of variable {} differs from its domain",
                i
            )));
        }
    }
    let domains: Vec<BTreeSet<usize>> = quotients
        .iter()
        .map(|q| (0..q.factor.blocks.len()).collect())
        .collect();
    let mut factor = Instance::new(inst.n, domains);
    for (&(i, j), rel) in &inst.edges {
        let pairs: BTreeSet<(usize, usize)> = rel
            .iter()
            .map(|&(a, b)| {
                (
                    quotients[i].sigma.block_index_of(a).expect("tuple outside domain"),
                    quotients[j].sigma.block_index_of(b).expect("tuple outside domain"),
                )
            })
            .collect();
        factor.add_edge(i, j, pairs);
    }
    let mut var_offsets = vec![0usize];
    let mut z_primes = Vec::new();
    for q in &quotients {
        z_primes.extend(q.primes.iter().cloned());
        var_offsets.push(z_primes.len());
    }
    Ok(FactorizedInstance { quotients, factor, var_offsets, z_primes })
}

// ---------------------------------------------------------------------------
// Affine sets and hulls

/// Nonempty affine subset of Z_p^len: particular point plus a linearly
/// independent basis.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AffineSet {
    pub p: usize,
    pub len: usize,
    pub point: Vec<usize>,
    pub basis: Vec<Vec<usize>>,
}

impl AffineSet {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn size(&self) -> usize {
        self.p.pow(self.dim() as u32)
    }

    /// all members, deterministic order (mixed-radix over basis coefficients)
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::with_capacity(self.size());
        let d = self.dim();
        let mut coef = vec![0usize; d];
        loop {
            let mut v = self.point.clone();
            for (c, b) in coef.iter().zip(&self.basis) {
                for (slot, &x) in v.iter_mut().zip(b) {
                    *slot = (*slot + c * x) % self.p;
                }
            }
            out.push(v);
            let mut k = d;
            loop {
                if k == 0 {
                    return out;
                }
                k -= 1;
                coef[k] += 1;
                if coef[k] < self.p {
                    break;
                }
                coef[k] = 0;
            }
        }
    }

    pub fn contains(&self, v: &[usize]) -> bool {
        self.members().iter().any(|m| m == v)
    }
}

/// One linear equation coeffs · z = rhs over Z_p.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Row {
    pub coeffs: Vec<usize>,
    pub rhs: usize,
}

fn inv_mod(a: usize, p: usize) -> usize {
    // p prime, a != 0
    let mut r = 1usize;
    let mut b = a % p;
    let mut e = p - 2;
    while e > 0 {
        if e & 1 == 1 {
            r = r * b % p;
        }
        b = b * b % p;
        e >>= 1;
    }
    r
}

/// Reduce a vector against a reduced echelon basis; returns the remainder.
fn reduce_against(v: &[usize], basis: &[(usize, Vec<usize>)], p: usize) -> Vec<usize> {
    let mut v = v.to_vec();
    for (pivot, b) in basis {
        let c = v[*pivot];
        if c != 0 {
            for (slot, &x) in v.iter_mut().zip(b) {
                *slot = (*slot + (p - c) * x) % p;
            }
        }
    }
    v
}

/// Affine hull of a nonempty point set over Z_p: the lexicographically least
/// point, a basis of the difference span, the defining equations (a basis of
/// the null space with right sides row·point), and whether the input already
/// equals its hull.
pub fn affine_hull(
    points: &BTreeSet<Vec<usize>>,
    p: usize,
) -> Option<(AffineSet, Vec<Row>, bool)> {
    let point = points.iter().next()?.clone();
    let len = point.len();
    // reduced echelon basis of {s - point}, keyed by pivot column
    let mut basis: Vec<(usize, Vec<usize>)> = Vec::new();
    for s in points {
        let diff: Vec<usize> = s
            .iter()
            .zip(&point)
            .map(|(&a, &b)| (a + p - b) % p)
            .collect();
        let mut rem = reduce_against(&diff, &basis, p);
        if let Some(pivot) = rem.iter().position(|&x| x != 0) {
            let inv = inv_mod(rem[pivot], p);
            for x in rem.iter_mut() {
                *x = *x * inv % p;
            }
            // back-reduce existing rows and keep the basis reduced
            for (_, b) in basis.iter_mut() {
                let c = b[pivot];
                if c != 0 {
                    for (slot, &x) in b.iter_mut().zip(&rem) {
                        *slot = (*slot + (p - c) * x) % p;
                    }
                }
            }
            basis.push((pivot, rem));
            basis.sort_by_key(|(piv, _)| *piv);
        }
    }
    let dim = basis.len();
    let pivots: BTreeSet<usize> = basis.iter().map(|(piv, _)| *piv).collect();
    // null space of the span: one row per free column
    let mut rows = Vec::new();
    for free in 0..len {
        if pivots.contains(&free) {
            continue;
        }
        let mut coeffs = vec![0usize; len];
        coeffs[free] = 1;
        for (piv, b) in &basis {
            // row orthogonal to every basis vector: coefficient at the pivot
            // column balances the free-column entry
            coeffs[*piv] = (p - b[free]) % p;
        }
        let rhs = coeffs
            .iter()
            .zip(&point)
            .map(|(&c, &x)| c * x)
            .sum::<usize>()
            % p;
        rows.push(Row { coeffs, rhs });
    }
    let exact = points.len() == p.pow(dim as u32);
    let set = AffineSet {
        p,
        len,
        point,
        basis: basis.into_iter().map(|(_, b)| b).collect(),
    };
    Some((set, rows, exact))
}

// ---------------------------------------------------------------------------
// Linear systems and elimination

/// Augmented matrix over one prime; columns are labeled with global z ids.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrimeSystem {
    pub p: usize,
    pub cols: Vec<usize>,
    pub rows: Vec<Row>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct LinearSystem {
    /// one augmented matrix per prime, ascending
    pub systems: Vec<PrimeSystem>,
}

/// The three elementary row operations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ElementaryOp {
    Swap(usize, usize),
    /// multiply row by a nonzero scalar
    Scale(usize, usize),
    /// add scalar · source row to destination row
    AddMul(usize, usize, usize),
}

pub fn apply_elementary(rows: &mut [Row], p: usize, op: ElementaryOp) {
    match op {
        ElementaryOp::Swap(a, b) => rows.swap(a, b),
        ElementaryOp::Scale(r, c) => {
            debug_assert!(c % p != 0);
            for x in rows[r].coeffs.iter_mut() {
                *x = *x * c % p;
            }
            rows[r].rhs = rows[r].rhs * c % p;
        }
        ElementaryOp::AddMul(dst, src, c) => {
            let src_row = rows[src].clone();
            for (slot, &x) in rows[dst].coeffs.iter_mut().zip(&src_row.coeffs) {
                *slot = (*slot + c * x) % p;
            }
            rows[dst].rhs = (rows[dst].rhs + c * src_row.rhs) % p;
        }
    }
}

/// Reduced row-echelon form via elementary operations.  Returns pivot columns.
pub fn echelonize(rows: &mut Vec<Row>, p: usize) -> Vec<usize> {
    let ncols = rows.first().map(|r| r.coeffs.len()).unwrap_or(0);
    let mut pivots = Vec::new();
    let mut next = 0usize;
    for col in 0..ncols {
        let Some(pr) = (next..rows.len()).find(|&r| rows[r].coeffs[col] != 0) else {
            continue;
        };
        if pr != next {
            apply_elementary(rows, p, ElementaryOp::Swap(next, pr));
        }
        let inv = inv_mod(rows[next].coeffs[col], p);
        if inv != 1 {
            apply_elementary(rows, p, ElementaryOp::Scale(next, inv));
        }
        for r in 0..rows.len() {
            if r != next && rows[r].coeffs[col] != 0 {
                let c = (p - rows[r].coeffs[col]) % p;
                apply_elementary(rows, p, ElementaryOp::AddMul(r, next, c));
            }
        }
        pivots.push(col);
        next += 1;
        if next == rows.len() {
            break;
        }
    }
    pivots
}

/// Per-prime affine solution sets of a linear system, with the column labels.
#[derive(Clone, Debug)]
pub struct SolutionSpace {
    pub per_prime: Vec<(Vec<usize>, AffineSet)>,
    pub nz: usize,
}

impl SolutionSpace {
    pub fn dim(&self) -> usize {
        self.per_prime.iter().map(|(_, a)| a.dim()).sum()
    }

    pub fn size(&self) -> usize {
        self.per_prime.iter().map(|(_, a)| a.size()).product()
    }

    fn scatter(&self, parts: &[Vec<usize>]) -> Vec<usize> {
        let mut z = vec![0usize; self.nz];
        for ((cols, _), part) in self.per_prime.iter().zip(parts) {
            for (&c, &v) in cols.iter().zip(part) {
                z[c] = v;
            }
        }
        z
    }

    /// φ(0,...,0): the particular point
    pub fn base_point(&self) -> Vec<usize> {
        let parts: Vec<Vec<usize>> = self.per_prime.iter().map(|(_, a)| a.point.clone()).collect();
        self.scatter(&parts)
    }

    /// φ(0) together with every φ(e_i): base plus one basis vector each
    pub fn generators(&self) -> Vec<Vec<usize>> {
        let mut out = vec![self.base_point()];
        for (k, (_, a)) in self.per_prime.iter().enumerate() {
            for b in &a.basis {
                let mut parts: Vec<Vec<usize>> =
                    self.per_prime.iter().map(|(_, s)| s.point.clone()).collect();
                for (slot, (&pt, &x)) in parts[k].iter_mut().zip(a.point.iter().zip(b)) {
                    *slot = (pt + x) % a.p;
                }
                out.push(self.scatter(&parts));
            }
        }
        out
    }

    /// all global z vectors, deterministic order
    pub fn points(&self, cap: usize) -> Result<Vec<Vec<usize>>> {
        if self.size() > cap {
            return Err(Error::Resource(format!(
                "solution space has {} points, cap {}",
                self.size(),
                cap
            )));
        }
        // cartesian product of the per-prime member lists
        let mut parts_list: Vec<Vec<Vec<usize>>> = vec![Vec::new()];
        for (_, a) in &self.per_prime {
            let mut next = Vec::new();
            for prefix in &parts_list {
                for m in a.members() {
                    let mut p2 = prefix.clone();
                    p2.push(m);
                    next.push(p2);
                }
            }
            parts_list = next;
        }
        Ok(parts_list.iter().map(|parts| self.scatter(parts)).collect())
    }
}

// ---------------------------------------------------------------------------

pub fn build_linear_system(fz: &FactorizedInstance) -> Result<LinearSystem> {
    let mut primes: Vec<usize> = fz.z_primes.clone();
    primes.sort_unstable();
    primes.dedup();
    let mut systems = Vec::new();
    for p in primes {
        let cols: Vec<usize> = (0..fz.nz()).filter(|&z| fz.z_primes[z] == p).collect();
        let col_pos: BTreeMap<usize, usize> =
            cols.iter().enumerate().map(|(k, &z)| (z, k)).collect();
        let mut rows = Vec::new();
        for (&(i, j), rel) in &fz.factor.edges {
            // z coordinates of this prime contributed by the two variables
            let mut local: Vec<usize> = Vec::new();
            for var in [i, j] {
                for z in fz.var_offsets[var]..fz.var_offsets[var + 1] {
                    if fz.z_primes[z] == p {
                        local.push(z);
                    }
                }
            }
            if local.is_empty() {
                continue;
            }
            let points: BTreeSet<Vec<usize>> = rel
                .iter()
                .map(|&(bi, bj)| {
                    let mut v = Vec::with_capacity(local.len());
                    for (var, block) in [(i, bi), (j, bj)] {
                        for (off, z) in
                            (fz.var_offsets[var]..fz.var_offsets[var + 1]).enumerate()
                        {
                            if fz.z_primes[z] == p {
                                v.push(fz.coords(var, block)[off]);
                            }
                        }
                    }
                    v
                })
                .collect();
            let Some((_, eqs, exact)) = affine_hull(&points, p) else {
                return Err(Error::Internal("edge with empty relation in the factor".into()));
            };
            if !exact {
                return Err(Error::Internal(format!(
                    "factored relation of edge ({}, {}) is not an affine subspace",
                    i, j
                )));
            }
            for eq in eqs {
                let mut coeffs = vec![0usize; cols.len()];
                for (&z, &c) in local.iter().zip(&eq.coeffs) {
                    let k = col_pos[&z];
                    coeffs[k] = (coeffs[k] + c) % p;
                }
                rows.push(Row { coeffs, rhs: eq.rhs });
            }
        }
        systems.push(PrimeSystem { p, cols, rows });
    }
    Ok(LinearSystem { systems })
}

/// Solve the system: reduced echelon form per prime, inconsistency check,
/// particular solution (free variables zero) and kernel basis.  Returns the
/// echelonized system alongside the solution set.
pub fn gauss_solve(sys: &LinearSystem) -> (LinearSystem, Option<SolutionSpace>) {
    let mut echelon = sys.clone();
    let mut per_prime = Vec::new();
    let mut nz = 0usize;
    let mut inconsistent = false;
    for ps in &mut echelon.systems {
        nz = nz.max(ps.cols.iter().map(|&z| z + 1).max().unwrap_or(0));
        let p = ps.p;
        let ncols = ps.cols.len();
        let rows = &mut ps.rows;
        let pivots = echelonize(rows, p);
        if rows
            .iter()
            .any(|r| r.coeffs.iter().all(|&c| c == 0) && r.rhs != 0)
        {
            inconsistent = true;
            continue;
        }
        let pivot_set: BTreeSet<usize> = pivots.iter().cloned().collect();
        let mut point = vec![0usize; ncols];
        for (k, &col) in pivots.iter().enumerate() {
            point[col] = rows[k].rhs;
        }
        let mut basis = Vec::new();
        for free in 0..ncols {
            if pivot_set.contains(&free) {
                continue;
            }
            let mut b = vec![0usize; ncols];
            b[free] = 1;
            for (k, &col) in pivots.iter().enumerate() {
                b[col] = (p - rows[k].coeffs[free]) % p;
            }
            basis.push(b);
        }
        per_prime.push((ps.cols.clone(), AffineSet { p, len: ncols, point, basis }));
    }
    let space = if inconsistent {
        None
    } else {
        Some(SolutionSpace { per_prime, nz })
    };
    (echelon, space)
}

// ---------------------------------------------------------------------------
// The iterative linear-case loop

#[derive(Clone, Debug)]
pub enum LinOutcome {
    Solution(Assignment),
    NoSolution,
}

/// Trace events emitted by the loop, in order.
#[derive(Clone, Debug)]
pub enum LinStep {
    Factor { quotients: Vec<LinearQuotient> },
    Gauss { systems: Vec<PrimeSystem>, consistent: bool, dim: Option<usize> },
    Weaken { edge: (usize, usize) },
    EqAdd { prime: usize, rows: Vec<Row>, method: &'static str },
}

/// Gauss-solve the base system extended by extra per-prime rows.
pub fn gauss_with_extra(
    base: &LinearSystem,
    extra: &[(usize, Vec<Row>)],
) -> (LinearSystem, Option<SolutionSpace>) {
    let mut sys = base.clone();
    for (p, rows) in extra {
        if let Some(ps) = sys.systems.iter_mut().find(|ps| ps.p == *p) {
            ps.rows.extend(rows.iter().cloned());
        }
    }
    gauss_solve(&sys)
}

pub fn linear_case_solve(
    inst: &Instance,
    lang: &Language,
    quotients: &[LinearQuotient],
    subsolve: &mut SubSolve,
    emit: &mut dyn FnMut(LinStep),
    point_cap: usize,
) -> Result<LinOutcome> {
    let fz = factorize_instance(inst, quotients.to_vec())?;
    emit(LinStep::Factor { quotients: quotients.to_vec() });
    let base = build_linear_system(&fz)?;
    let mut extra: Vec<(usize, Vec<Row>)> = Vec::new();
    let (sys, space) = gauss_with_extra(&base, &extra);
    let Some(mut space) = space else {
        emit(LinStep::Gauss { systems: sys.systems, consistent: false, dim: None });
        return Ok(LinOutcome::NoSolution);
    };
    emit(LinStep::Gauss {
        systems: sys.systems,
        consistent: true,
        dim: Some(space.dim()),
    });
    let initial_dim = space.dim();
    for _iteration in 0..=initial_dim {
        // try the particular solution φ(0,...,0)
        let candidate = fz.restrict_to_point(inst, &space.base_point())?;
        if let Some(h) = subsolve(&candidate)? {
            if !inst.is_solution(&h) {
                return Err(Error::Internal("sub-solver returned a non-solution".into()));
            }
            return Ok(LinOutcome::Solution(h));
        }
        if space.dim() == 0 {
            // the unique factor point failed
            return Ok(LinOutcome::NoSolution);
        }
        // weaken constraints in lexicographic edge order, stopping at the
        // maximal still-not-closing instance: the last one in which some
        // generator point φ(0)/φ(e_i) remains unsolvable
        let gens = space.generators();
        let mut cur = inst.clone();
        let edge_keys: Vec<(usize, usize)> = cur.edges.keys().cloned().collect();
        for e in edge_keys {
            let cand = weaken_constraints(&cur, Some(e), lang);
            let mut all_solvable = true;
            for g in &gens {
                let restricted = fz.restrict_to_point(&cand, g)?;
                if subsolve(&restricted)?.is_none() {
                    all_solvable = false;
                    break;
                }
            }
            if all_solvable {
                break;
            }
            cur = cand;
            emit(LinStep::Weaken { edge: e });
        }
        // exact factor-solution set of the weakened instance inside the
        // current space, by enumeration
        let mut solvable: BTreeSet<Vec<usize>> = BTreeSet::new();
        for z in space.points(point_cap)? {
            let restricted = fz.restrict_to_point(&cur, &z)?;
            if subsolve(&restricted)?.is_some() {
                solvable.insert(z);
            }
        }
        if solvable.is_empty() {
            return Ok(LinOutcome::NoSolution);
        }
        // project onto each prime's columns and add the hull equations
        for ps in &base.systems {
            let pts: BTreeSet<Vec<usize>> = solvable
                .iter()
                .map(|z| ps.cols.iter().map(|&c| z[c]).collect())
                .collect();
            let (_, rows, exact) = affine_hull(&pts, ps.p).expect("nonempty");
            if !exact {
                return Err(Error::Internal(
                    "factor-solution set of the weakened instance is not affine".into(),
                ));
            }
            if !rows.is_empty() {
                emit(LinStep::EqAdd { prime: ps.p, rows: rows.clone(), method: "enumerated-hull" });
                extra.push((ps.p, rows));
            }
        }
        let (sys, next) = gauss_with_extra(&base, &extra);
        let Some(next) = next else {
            emit(LinStep::Gauss { systems: sys.systems, consistent: false, dim: None });
            return Ok(LinOutcome::NoSolution);
        };
        if next.dim() >= space.dim() {
            return Err(Error::Internal(
                "equation addition did not reduce the dimension".into(),
            ));
        }
        emit(LinStep::Gauss { systems: sys.systems, consistent: true, dim: Some(next.dim()) });
        space = next;
    }
    Err(Error::Internal("linear-case iteration bound exceeded".into()))
}
