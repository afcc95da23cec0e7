//! Reduction-trace schema, the independent per-step checker, and the DIMACS
//! CNF emitter for ¬HOM.
//!
//! A trace is newline-delimited JSON: a header record carrying the format
//! version and the digest of the initial instance, then one record per step.
//! Digests chain: every step names the digest of the instance it consumes and
//! the digest of the instance it produces; annotation steps (the linear
//! bookkeeping, oracle calls, the final answer) leave the instance unchanged.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::algebra::{
    discriminator, discriminator_preserves_gamma_diag, find_binary_absorption,
    find_central_subuniverse, find_linear_quotient, restrict_language, restrict_op,
    sg_closure_pairs, Congruence, LinearQuotient, SubOp,
};
use crate::consistency::{
    cycle_consistency_reduce, irreducibility_reduce, weaken_constraints, weaker_instance_reduce,
    Reduction,
};
use crate::linear::{
    affine_hull, build_linear_system, factorize_instance, gauss_with_extra, FactorizedInstance,
    LinearSystem, PrimeSystem, Row, SolutionSpace,
};
use crate::model::{
    brute_force_solve, canonical_instance_json, Assignment, Instance, Language,
};
use crate::{Error, Result};

pub const TRACE_FORMAT: &str = "wnu-csp-trace/1";

/// sha256 of the canonical instance serialization, lowercase hex
pub fn instance_digest(inst: &Instance) -> String {
    let mut h = Sha256::new();
    h.update(canonical_instance_json(inst).as_bytes());
    let out = h.finalize();
    out.iter().map(|b| format!("{:02x}", b)).collect()
}

// ---------------------------------------------------------------------------
// Schema

/// Outcome of one deterministic reduction pass (cc, irr, weak).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum ReduceAction {
    Reduce { var: usize, domain: Vec<usize> },
    Empty,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepBody {
    Cc {
        #[serde(flatten)]
        action: ReduceAction,
    },
    Irr {
        #[serde(flatten)]
        action: ReduceAction,
    },
    Weak {
        #[serde(flatten)]
        action: ReduceAction,
    },
    Ba {
        var: usize,
        b: Vec<usize>,
        t: SubOp,
    },
    Cr {
        var: usize,
        c: Vec<usize>,
        s: SubOp,
        /// per excluded element a, the generated subuniverse
        /// Sg({a}×C ∪ C×{a}) that avoids (a,a)
        transcripts: Vec<(usize, Vec<(usize, usize)>)>,
    },
    Pc {
        var: usize,
        sigma: Vec<Vec<usize>>,
        disc: Vec<usize>,
        block: Vec<usize>,
    },
    LinFactor {
        quotients: Vec<LinearQuotient>,
    },
    LinGauss {
        systems: Vec<PrimeSystem>,
        consistent: bool,
        dim: Option<usize>,
    },
    LinWeaken {
        edge: (usize, usize),
    },
    LinEqAdd {
        prime: usize,
        rows: Vec<Row>,
        method: String,
    },
    Oracle {
        result: String,
        #[serde(skip_serializing_if = "Option::is_none")]
        assignment: Option<Vec<usize>>,
    },
    Answer {
        value: String,
        #[serde(skip_serializing_if = "Option::is_none")]
        assignment: Option<Vec<usize>>,
    },
}

impl StepBody {
    pub fn kind(&self) -> &'static str {
        match self {
            StepBody::Cc { .. } => "cc",
            StepBody::Irr { .. } => "irr",
            StepBody::Weak { .. } => "weak",
            StepBody::Ba { .. } => "ba",
            StepBody::Cr { .. } => "cr",
            StepBody::Pc { .. } => "pc",
            StepBody::LinFactor { .. } => "lin_factor",
            StepBody::LinGauss { .. } => "lin_gauss",
            StepBody::LinWeaken { .. } => "lin_weaken",
            StepBody::LinEqAdd { .. } => "lin_eq_add",
            StepBody::Oracle { .. } => "oracle",
            StepBody::Answer { .. } => "answer",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub input: String,
    pub output: String,
    #[serde(flatten)]
    pub body: StepBody,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Header {
    format: String,
    digest: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub digest: String,
    pub steps: Vec<TraceStep>,
}

pub fn serialize_trace(trace: &Trace) -> String {
    let mut out = String::new();
    let header = Header { format: TRACE_FORMAT.to_string(), digest: trace.digest.clone() };
    out.push_str(&serde_json::to_string(&header).unwrap());
    out.push('\n');
    for s in &trace.steps {
        out.push_str(&serde_json::to_string(s).unwrap());
        out.push('\n');
    }
    out
}

pub fn parse_trace(text: &str) -> Result<Trace> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let head = lines
        .next()
        .ok_or_else(|| Error::Parse("empty trace".into()))?;
    let header: Header =
        serde_json::from_str(head).map_err(|e| Error::Parse(format!("header: {}", e)))?;
    if header.format != TRACE_FORMAT {
        return Err(Error::Parse(format!("unknown trace format {:?}", header.format)));
    }
    let mut steps = Vec::new();
    for (k, line) in lines.enumerate() {
        let step: TraceStep = serde_json::from_str(line)
            .map_err(|e| Error::Parse(format!("step {}: {}", k, e)))?;
        steps.push(step);
    }
    let mut prev = header.digest.clone();
    for (k, s) in steps.iter().enumerate() {
        if s.input != prev {
            return Err(Error::Parse(format!("digest chain broken at step {}", k)));
        }
        prev = s.output.clone();
    }
    Ok(Trace { digest: header.digest, steps })
}

// ---------------------------------------------------------------------------
// Verdicts

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckMode {
    Witness,
    Semantic,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StepStatus {
    WitnessOk,
    WitnessFail(String),
    SemanticsOk,
    SemanticsFail(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepReport {
    pub index: usize,
    pub kind: String,
    pub status: StepStatus,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Verdict {
    pub accept: bool,
    pub steps: Vec<StepReport>,
    /// steps whose semantic check exceeded the oracle cap
    pub unchecked: Vec<usize>,
}

// ---------------------------------------------------------------------------
// Checker

/// State of the factor-side bookkeeping while walking a linear segment.
struct LinSegment {
    fz: FactorizedInstance,
    base: LinearSystem,
    extra: Vec<(usize, Vec<Row>)>,
    space: Option<SolutionSpace>,
    /// weakened scratch copy, reset to the chain instance at every gauss
    scratch: Instance,
    /// lexicographic edge cursor of the weakening loop
    edge_keys: Vec<(usize, usize)>,
    next_edge: usize,
}

struct Checker<'a> {
    lang: &'a Language,
    original: &'a Instance,
    cap: usize,
    cur: Instance,
    lin: Option<LinSegment>,
    /// last terminal evidence seen, used to justify the final answer
    last: Option<StepBody>,
}

impl<'a> Checker<'a> {
    fn brute_has(&self, inst: &Instance) -> Result<bool> {
        Ok(!brute_force_solve(inst, self.cap)?.is_empty())
    }

    fn sub_first(&self, inst: &Instance) -> Result<Option<Assignment>> {
        Ok(brute_force_solve(inst, self.cap)?.into_iter().next())
    }

    fn check_reduce(
        &mut self,
        action: &ReduceAction,
        replayed: Reduction,
    ) -> std::result::Result<(), String> {
        match (action, replayed) {
            (ReduceAction::Empty, Reduction::NoSolution) => Ok(()),
            (
                ReduceAction::Reduce { var, domain },
                Reduction::Reduced { var: rv, new_domain, instance },
            ) => {
                let dom: Vec<usize> = new_domain.iter().cloned().collect();
                if *var != rv || *domain != dom {
                    return Err(format!(
                        "replay reduced variable {} to {:?}, step claims {} to {:?}",
                        rv, dom, var, domain
                    ));
                }
                self.cur = instance;
                Ok(())
            }
            (_, Reduction::Unchanged) => Err("replay left the instance unchanged".into()),
            _ => Err("replay outcome does not match the recorded action".into()),
        }
    }

    /// preconditions shared by the ba and cr reductions
    fn check_stable(&self) -> std::result::Result<(), String> {
        if cycle_consistency_reduce(&self.cur) != Reduction::Unchanged {
            return Err("instance is not cycle-consistent".into());
        }
        let mut probe = |i: &Instance| self.brute_has(i);
        match irreducibility_reduce(&self.cur, self.lang, &mut probe) {
            Ok((Reduction::Unchanged, _)) => Ok(()),
            Ok(_) => Err("instance is not irreducible".into()),
            Err(e) => Err(format!("irreducibility replay failed: {}", e)),
        }
    }

    fn check_subop_polymorphism(
        &self,
        d: &BTreeSet<usize>,
        op: &SubOp,
    ) -> std::result::Result<(), String> {
        let elems: Vec<usize> = d.iter().cloned().collect();
        if op.elems != elems {
            return Err("witness operation is not indexed by the domain".into());
        }
        if op.op.base != elems.len() {
            return Err("witness table base differs from the domain size".into());
        }
        let expected = elems.len().pow(op.op.arity as u32);
        if op.op.table.len() != expected || op.op.table.iter().any(|&v| v >= elems.len()) {
            return Err("witness table is malformed".into());
        }
        let gamma = restrict_language(self.lang, d);
        for r in &gamma.unary {
            if !op.preserves_unary_elems(r) {
                return Err("not a polymorphism: a unary relation is violated".into());
            }
        }
        for r in &gamma.binary {
            if !op.preserves_pairs_elems(r) {
                return Err("not a polymorphism: a binary relation is violated".into());
            }
        }
        Ok(())
    }

    fn check_step(&mut self, step: &TraceStep) -> std::result::Result<(), String> {
        if step.input != instance_digest(&self.cur) {
            return Err("input digest does not match the current instance".into());
        }
        match &step.body {
            StepBody::Cc { action } => {
                let replayed = cycle_consistency_reduce(&self.cur);
                self.check_reduce(action, replayed)?;
            }
            StepBody::Irr { action } => {
                let cur = self.cur.clone();
                let mut probe = |i: &Instance| self.brute_has(i);
                let (replayed, _) = irreducibility_reduce(&cur, self.lang, &mut probe)
                    .map_err(|e| format!("irreducibility replay failed: {}", e))?;
                self.check_reduce(action, replayed)?;
            }
            StepBody::Weak { action } => {
                let cur = self.cur.clone();
                let mut probe = |i: &Instance| self.brute_has(i);
                let replayed = weaker_instance_reduce(&cur, self.lang, &mut probe)
                    .map_err(|e| format!("weaker-instance replay failed: {}", e))?;
                self.check_reduce(action, replayed)?;
            }
            StepBody::Ba { var, b, t } => {
                let d = &self.cur.domains[*var];
                let bset: BTreeSet<usize> = b.iter().cloned().collect();
                if bset.is_empty() || !bset.is_subset(d) || &bset == d {
                    return Err("B is not a proper nonempty subset of the domain".into());
                }
                let belems: Vec<usize> = bset.iter().cloned().collect();
                if restrict_op(&self.lang.wnu, &belems).is_err() {
                    return Err("B is not a subuniverse".into());
                }
                if t.op.arity != 2 {
                    return Err("T must be binary".into());
                }
                self.check_subop_polymorphism(d, t)?;
                for &a in d {
                    for &x in &bset {
                        if !bset.contains(&t.eval_elems(&[a, x]))
                            || !bset.contains(&t.eval_elems(&[x, a]))
                        {
                            return Err("absorption violated".into());
                        }
                    }
                }
                self.check_stable()?;
                self.cur = self
                    .cur
                    .restrict(*var, &bset)
                    .map_err(|e| format!("restriction failed: {}", e))?;
            }
            StepBody::Cr { var, c, s, transcripts } => {
                let d = self.cur.domains[*var].clone();
                let cset: BTreeSet<usize> = c.iter().cloned().collect();
                if cset.is_empty() || !cset.is_subset(&d) || cset == d {
                    return Err("C is not a proper nonempty subset of the domain".into());
                }
                let celems: Vec<usize> = cset.iter().cloned().collect();
                if restrict_op(&self.lang.wnu, &celems).is_err() {
                    return Err("C is not a subuniverse".into());
                }
                if s.op.arity != 3 {
                    return Err("S must be ternary".into());
                }
                self.check_subop_polymorphism(&d, s)?;
                for &a in &d {
                    for &x in &cset {
                        for &y in &cset {
                            let outs =
                                [s.eval_elems(&[x, y, a]), s.eval_elems(&[x, a, y]), s.eval_elems(&[a, x, y])];
                            if outs.iter().any(|o| !cset.contains(o)) {
                                return Err("ternary absorption violated".into());
                            }
                        }
                    }
                }
                let excluded: Vec<usize> = d.difference(&cset).cloned().collect();
                let recorded: BTreeMap<usize, Vec<(usize, usize)>> =
                    transcripts.iter().cloned().collect();
                if recorded.len() != excluded.len()
                    || excluded.iter().any(|a| !recorded.contains_key(a))
                {
                    return Err("transcripts do not cover D \\ C".into());
                }
                for &a in &excluded {
                    let mut seed: BTreeSet<(usize, usize)> = BTreeSet::new();
                    for &x in &cset {
                        seed.insert((a, x));
                        seed.insert((x, a));
                    }
                    let sg = sg_closure_pairs(&self.lang.wnu, &seed);
                    let replayed: Vec<(usize, usize)> = sg.iter().cloned().collect();
                    if recorded[&a] != replayed {
                        return Err(format!("Sg transcript for {} does not replay", a));
                    }
                    if sg.contains(&(a, a)) {
                        return Err(format!("({},{}) lies in the generated subuniverse", a, a));
                    }
                }
                self.check_stable()?;
                self.cur = self
                    .cur
                    .restrict(*var, &cset)
                    .map_err(|e| format!("restriction failed: {}", e))?;
            }
            StepBody::Pc { var, sigma, disc, block } => {
                for (i, d) in self.cur.domains.clone().iter().enumerate() {
                    if d.len() < 2 {
                        continue;
                    }
                    let gamma = restrict_language(self.lang, d);
                    match find_binary_absorption(d, &self.lang.wnu, &gamma) {
                        Ok(None) => {}
                        Ok(Some(_)) => {
                            return Err(format!("domain of variable {} has binary absorption", i))
                        }
                        Err(e) => return Err(format!("absorption detector failed: {}", e)),
                    }
                    match find_central_subuniverse(d, &self.lang.wnu, &gamma) {
                        Ok(None) => {}
                        Ok(Some(_)) => {
                            return Err(format!("domain of variable {} has a center", i))
                        }
                        Err(e) => return Err(format!("center detector failed: {}", e)),
                    }
                }
                let d = self.cur.domains[*var].clone();
                let blocks: Vec<BTreeSet<usize>> =
                    sigma.iter().map(|b| b.iter().cloned().collect()).collect();
                let union: BTreeSet<usize> = blocks.iter().flatten().cloned().collect();
                let total: usize = blocks.iter().map(|b| b.len()).sum();
                if union != d || total != d.len() {
                    return Err("sigma does not partition the domain".into());
                }
                let cong = Congruence { carrier: d.clone(), blocks: blocks.clone() };
                if !cong.is_congruence(&self.lang.wnu) {
                    return Err("sigma is not a congruence".into());
                }
                if cong.is_nabla() {
                    return Err("sigma must be proper".into());
                }
                if disc != &discriminator(blocks.len()).table {
                    return Err("witness operation is not the discriminator".into());
                }
                let gamma = restrict_language(self.lang, &d);
                if !discriminator_preserves_gamma_diag(&cong, &gamma) {
                    return Err("discriminator does not preserve the factored language".into());
                }
                let bset: BTreeSet<usize> = block.iter().cloned().collect();
                if !blocks.contains(&bset) {
                    return Err("E is not a block of sigma".into());
                }
                self.cur = self
                    .cur
                    .restrict(*var, &bset)
                    .map_err(|e| format!("restriction failed: {}", e))?;
            }
            StepBody::LinFactor { quotients } => {
                if quotients.len() != self.cur.n {
                    return Err("one quotient per variable required".into());
                }
                for (i, q) in quotients.iter().enumerate() {
                    let expect = find_linear_quotient(&self.cur.domains[i], &self.lang.wnu)
                        .map_err(|e| format!("linear-quotient replay failed: {}", e))?
                        .ok_or_else(|| format!("domain of variable {} has no linear quotient", i))?;
                    if *q != expect {
                        return Err(format!(
                            "quotient of variable {} is not the minimal linear congruence",
                            i
                        ));
                    }
                }
                let fz = factorize_instance(&self.cur, quotients.clone())
                    .map_err(|e| format!("factorization failed: {}", e))?;
                let base = build_linear_system(&fz)
                    .map_err(|e| format!("system construction failed: {}", e))?;
                self.lin = Some(LinSegment {
                    fz,
                    base,
                    extra: Vec::new(),
                    space: None,
                    scratch: self.cur.clone(),
                    edge_keys: Vec::new(),
                    next_edge: 0,
                });
            }
            StepBody::LinGauss { systems, consistent, dim } => {
                let cur = self.cur.clone();
                let lin = self
                    .lin
                    .as_mut()
                    .ok_or_else(|| "gauss step outside a linear segment".to_string())?;
                let (ech, space) = gauss_with_extra(&lin.base, &lin.extra);
                if &ech.systems != systems {
                    return Err("echelon systems do not replay".into());
                }
                if *consistent != space.is_some() {
                    return Err("consistency flag does not replay".into());
                }
                if *dim != space.as_ref().map(|s| s.dim()) {
                    return Err("dimension does not replay".into());
                }
                lin.scratch = cur;
                lin.edge_keys = lin.scratch.edges.keys().cloned().collect();
                lin.next_edge = 0;
                lin.space = space;
            }
            StepBody::LinWeaken { edge } => {
                let cand = {
                    let lin = self
                        .lin
                        .as_ref()
                        .ok_or_else(|| "weaken step outside a linear segment".to_string())?;
                    let space = lin
                        .space
                        .as_ref()
                        .ok_or_else(|| "weaken step without a solution space".to_string())?;
                    if lin.next_edge >= lin.edge_keys.len()
                        || lin.edge_keys[lin.next_edge] != *edge
                    {
                        return Err("weakened edge is out of canonical order".into());
                    }
                    let cand = weaken_constraints(&lin.scratch, Some(*edge), self.lang);
                    let mut all = true;
                    for g in space.generators() {
                        let restricted = lin
                            .fz
                            .restrict_to_point(&cand, &g)
                            .map_err(|e| format!("block restriction failed: {}", e))?;
                        if !self.brute_has(&restricted).map_err(|e| e.to_string())? {
                            all = false;
                            break;
                        }
                    }
                    if all {
                        return Err("weakening past the maximal non-closing instance".into());
                    }
                    cand
                };
                let lin = self.lin.as_mut().unwrap();
                lin.scratch = cand;
                lin.next_edge += 1;
            }
            StepBody::LinEqAdd { prime, rows, method } => {
                if method != "enumerated-hull" {
                    return Err(format!("unknown equation-discovery method {:?}", method));
                }
                let lin = self
                    .lin
                    .as_ref()
                    .ok_or_else(|| "equation step outside a linear segment".to_string())?;
                let space = lin
                    .space
                    .as_ref()
                    .ok_or_else(|| "equation step without a solution space".to_string())?;
                // the weakening loop must have stopped correctly: either all
                // edges were weakened or the next candidate closes every
                // generator point
                if lin.next_edge < lin.edge_keys.len() {
                    let cand = weaken_constraints(
                        &lin.scratch,
                        Some(lin.edge_keys[lin.next_edge]),
                        self.lang,
                    );
                    for g in space.generators() {
                        let restricted = lin
                            .fz
                            .restrict_to_point(&cand, &g)
                            .map_err(|e| format!("block restriction failed: {}", e))?;
                        if !self.brute_has(&restricted).map_err(|e| e.to_string())? {
                            return Err("weakening stopped before the maximal non-closing instance"
                                .into());
                        }
                    }
                }
                let mut solvable: BTreeSet<Vec<usize>> = BTreeSet::new();
                for z in space
                    .points(self.cap)
                    .map_err(|e| format!("solution space too large: {}", e))?
                {
                    let restricted = lin
                        .fz
                        .restrict_to_point(&lin.scratch, &z)
                        .map_err(|e| format!("block restriction failed: {}", e))?;
                    if self.sub_first(&restricted).map_err(|e| e.to_string())?.is_some() {
                        solvable.insert(z);
                    }
                }
                if solvable.is_empty() {
                    return Err("the weakened instance has no factor solutions".into());
                }
                let ps = lin
                    .base
                    .systems
                    .iter()
                    .find(|ps| ps.p == *prime)
                    .ok_or_else(|| format!("no system over prime {}", prime))?;
                let pts: BTreeSet<Vec<usize>> = solvable
                    .iter()
                    .map(|z| ps.cols.iter().map(|&c| z[c]).collect())
                    .collect();
                let (_, expect, exact) = affine_hull(&pts, *prime).expect("nonempty");
                if !exact {
                    return Err("factor-solution set is not an affine subspace".into());
                }
                if rows != &expect {
                    return Err("added equations are not the affine hull of the solutions".into());
                }
                let lin = self.lin.as_mut().unwrap();
                lin.extra.push((*prime, rows.clone()));
            }
            StepBody::Oracle { result, assignment } => match result.as_str() {
                "sat" => {
                    let h = assignment
                        .as_ref()
                        .ok_or_else(|| "sat oracle step without assignment".to_string())?;
                    if !self.cur.is_solution(h) {
                        return Err("oracle assignment is not a solution".into());
                    }
                }
                "unsat" => {
                    if assignment.is_some() {
                        return Err("unsat oracle step carries an assignment".into());
                    }
                    if self.brute_has(&self.cur).map_err(|e| e.to_string())? {
                        return Err("oracle claims unsat but a solution exists".into());
                    }
                }
                other => return Err(format!("unknown oracle result {:?}", other)),
            },
            StepBody::Answer { value, assignment } => match value.as_str() {
                "yes" => {
                    let h = assignment
                        .as_ref()
                        .ok_or_else(|| "positive answer without assignment".to_string())?;
                    if !self.original.is_solution(h) {
                        return Err("answer assignment does not solve the instance".into());
                    }
                }
                "no" => {
                    if assignment.is_some() {
                        return Err("negative answer carries an assignment".into());
                    }
                    self.check_no_justified()?;
                }
                other => return Err(format!("unknown answer value {:?}", other)),
            },
        }
        if step.output != instance_digest(&self.cur) {
            return Err("output digest does not match the produced instance".into());
        }
        self.last = Some(step.body.clone());
        Ok(())
    }

    /// A "no" answer must be backed by terminal evidence: an emptiness
    /// reduction, an unsat oracle, an inconsistent system, or an exhausted
    /// (possibly weakened) candidate set.
    fn check_no_justified(&mut self) -> std::result::Result<(), String> {
        match &self.last {
            Some(StepBody::Cc { action: ReduceAction::Empty })
            | Some(StepBody::Irr { action: ReduceAction::Empty })
            | Some(StepBody::Weak { action: ReduceAction::Empty }) => Ok(()),
            Some(StepBody::Oracle { result, .. }) if result == "unsat" => Ok(()),
            Some(StepBody::LinGauss { consistent: false, .. }) => Ok(()),
            Some(StepBody::LinGauss { consistent: true, .. })
            | Some(StepBody::LinWeaken { .. })
            | Some(StepBody::LinEqAdd { .. }) => {
                // the remaining candidate points must all fail on the scratch
                // (weakened) instance — emptiness of the solvable set
                let lin = self
                    .lin
                    .as_ref()
                    .ok_or_else(|| "no linear segment to justify the answer".to_string())?;
                let space = lin
                    .space
                    .as_ref()
                    .ok_or_else(|| "no solution space to justify the answer".to_string())?;
                for z in space
                    .points(self.cap)
                    .map_err(|e| format!("solution space too large: {}", e))?
                {
                    let restricted = lin
                        .fz
                        .restrict_to_point(&lin.scratch, &z)
                        .map_err(|e| format!("block restriction failed: {}", e))?;
                    if self.brute_has(&restricted).map_err(|e| e.to_string())? {
                        return Err("a candidate factor point is still solvable".into());
                    }
                }
                Ok(())
            }
            _ => Err("negative answer lacks terminal evidence".into()),
        }
    }
}

pub fn verify_trace(
    inst: &Instance,
    lang: &Language,
    trace: &Trace,
    mode: CheckMode,
    oracle_cap: usize,
) -> Result<Verdict> {
    if trace.digest != instance_digest(inst) {
        return Err(Error::Rejected(
            "trace header digest does not match the instance".into(),
        ));
    }
    let mut checker = Checker {
        lang,
        original: inst,
        cap: oracle_cap,
        cur: inst.clone(),
        lin: None,
        last: None,
    };
    let mut reports = Vec::new();
    let mut unchecked = Vec::new();
    for (index, step) in trace.steps.iter().enumerate() {
        let kind = step.body.kind().to_string();
        if matches!(step.body, StepBody::Answer { .. }) && index + 1 != trace.steps.len() {
            reports.push(StepReport {
                index,
                kind,
                status: StepStatus::WitnessFail("answer step is not final".into()),
            });
            return Ok(Verdict { accept: false, steps: reports, unchecked });
        }
        let before = checker.cur.clone();
        match checker.check_step(step) {
            Err(reason) => {
                reports.push(StepReport { index, kind, status: StepStatus::WitnessFail(reason) });
                return Ok(Verdict { accept: false, steps: reports, unchecked });
            }
            Ok(()) => {}
        }
        if mode == CheckMode::Semantic && before != checker.cur {
            let sem = (
                brute_force_solve(&before, oracle_cap),
                brute_force_solve(&checker.cur, oracle_cap),
            );
            match sem {
                (Ok(b), Ok(a)) => {
                    if !b.is_empty() && a.is_empty() {
                        let lost = b.into_iter().next().unwrap();
                        reports.push(StepReport {
                            index,
                            kind,
                            status: StepStatus::SemanticsFail(format!(
                                "solution {:?} is lost by this step",
                                lost
                            )),
                        });
                        return Ok(Verdict { accept: false, steps: reports, unchecked });
                    }
                    reports.push(StepReport { index, kind, status: StepStatus::SemanticsOk });
                }
                _ => {
                    unchecked.push(index);
                    reports.push(StepReport { index, kind, status: StepStatus::WitnessOk });
                }
            }
        } else {
            reports.push(StepReport { index, kind, status: StepStatus::WitnessOk });
        }
    }
    Ok(Verdict { accept: true, steps: reports, unchecked })
}

// ---------------------------------------------------------------------------
// CNF

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CnfDocument {
    pub nvars: usize,
    pub clauses: Vec<Vec<i64>>,
    /// "var k = h(i,a)" lines, in variable order
    pub comments: Vec<String>,
}

/// CNF for "Θ has a homomorphism": variables h(i,a) numbered lexicographically
/// from 1; at-least-one and pairwise at-most-one clauses per variable, one
/// conflict clause per edge and forbidden pair.  ¬HOM is a tautology iff the
/// CNF is unsatisfiable.
pub fn emit_cnf(inst: &Instance) -> CnfDocument {
    let mut id: BTreeMap<(usize, usize), i64> = BTreeMap::new();
    let mut comments = Vec::new();
    for (i, d) in inst.domains.iter().enumerate() {
        for &a in d {
            let k = id.len() as i64 + 1;
            id.insert((i, a), k);
            comments.push(format!("var {} = h({},{})", k, i, a));
        }
    }
    let mut clauses = Vec::new();
    for (i, d) in inst.domains.iter().enumerate() {
        let vars: Vec<i64> = d.iter().map(|&a| id[&(i, a)]).collect();
        clauses.push(vars.clone());
        for x in 0..vars.len() {
            for y in x + 1..vars.len() {
                clauses.push(vec![-vars[x], -vars[y]]);
            }
        }
    }
    for (&(i, j), rel) in &inst.edges {
        for &a in &inst.domains[i] {
            for &b in &inst.domains[j] {
                if !rel.contains(&(a, b)) {
                    clauses.push(vec![-id[&(i, a)], -id[&(j, b)]]);
                }
            }
        }
    }
    CnfDocument { nvars: id.len(), clauses, comments }
}

pub fn cnf_to_dimacs(doc: &CnfDocument) -> String {
    let mut out = String::new();
    for c in &doc.comments {
        out.push_str("c ");
        out.push_str(c);
        out.push('\n');
    }
    out.push_str(&format!("p cnf {} {}\n", doc.nvars, doc.clauses.len()));
    for clause in &doc.clauses {
        for lit in clause {
            out.push_str(&format!("{} ", lit));
        }
        out.push_str("0\n");
    }
    out
}

/// Count satisfying assignments by enumeration.  Desk scale only.
pub fn cnf_count_solutions(doc: &CnfDocument, max_vars: usize) -> Result<usize> {
    if doc.nvars > max_vars {
        return Err(Error::Resource(format!(
            "{} variables exceed the enumeration bound {}",
            doc.nvars, max_vars
        )));
    }
    let mut count = 0usize;
    for mask in 0u64..(1u64 << doc.nvars) {
        let ok = doc.clauses.iter().all(|clause| {
            clause.iter().any(|&lit| {
                let v = lit.unsigned_abs() as usize - 1;
                let set = mask & (1 << v) != 0;
                (lit > 0) == set
            })
        });
        if ok {
            count += 1;
        }
    }
    Ok(count)
}

pub fn cnf_satisfiable(doc: &CnfDocument, max_vars: usize) -> Result<bool> {
    Ok(cnf_count_solutions(doc, max_vars)? > 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::find_linear_quotient;
    use crate::linear::{linear_case_solve, LinOutcome, LinStep};
    use crate::presets::{example1, example2, example_linear, gen_instance, template};
    use crate::solver::{solve, SolveConfig};

    fn solver_trace(inst: &Instance, lang: &Language) -> Trace {
        solve(inst, lang, &SolveConfig::default()).unwrap().trace
    }

    fn assert_accepted(inst: &Instance, lang: &Language, trace: &Trace) {
        for mode in [CheckMode::Witness, CheckMode::Semantic] {
            let v = verify_trace(inst, lang, trace, mode, 1 << 20).unwrap();
            assert!(v.accept, "{:?} rejected: {:?}", mode, v.steps.last());
        }
    }

    fn assert_rejected(inst: &Instance, lang: &Language, trace: &Trace, needle: &str) {
        let v = verify_trace(inst, lang, trace, CheckMode::Witness, 1 << 20).unwrap();
        assert!(!v.accept, "expected rejection ({})", needle);
        match &v.steps.last().unwrap().status {
            StepStatus::WitnessFail(msg) | StepStatus::SemanticsFail(msg) => {
                assert!(msg.contains(needle), "unexpected reason {:?}", msg)
            }
            ok => panic!("expected failure, got {:?}", ok),
        }
    }

    /// first seeded instance whose solver trace contains the given step kind
    fn trace_with(name: &str, kind: &str) -> (Instance, Language, Trace) {
        let lang = template(name).unwrap();
        for seed in 0..500u64 {
            let inst = gen_instance(&lang, 2 + (seed % 3) as usize, 0.5, seed);
            let trace = solver_trace(&inst, &lang);
            if trace.steps.iter().any(|s| s.body.kind() == kind) {
                return (inst, lang, trace);
            }
        }
        panic!("no {} trace found over {}", kind, name);
    }

    /// linear trace with weakening and equation discovery, assembled from the
    /// linear case run directly on the unreduced instance
    fn linear_hand_trace() -> (Instance, Language, Trace) {
        let (inst, lang) = example_linear();
        let quotients: Vec<_> = inst
            .domains
            .iter()
            .map(|d| find_linear_quotient(d, &lang.wnu).unwrap().unwrap())
            .collect();
        let d = instance_digest(&inst);
        let mut steps = Vec::new();
        let mut sub =
            |i: &Instance| Ok(brute_force_solve(i, 1 << 20)?.into_iter().next());
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
    fn traces_round_trip_through_ndjson() {
        for (inst, lang) in [example1(), example2(), example_linear()] {
            let trace = solver_trace(&inst, &lang);
            let text = serialize_trace(&trace);
            assert_eq!(parse_trace(&text).unwrap(), trace);
        }
    }

    #[test]
    fn parse_rejects_malformed_traces() {
        let (inst, lang) = example2();
        let trace = solver_trace(&inst, &lang);
        let text = serialize_trace(&trace);

        assert!(matches!(parse_trace(""), Err(Error::Parse(_))));
        let bad_format = text.replacen(TRACE_FORMAT, "some-other-format/9", 1);
        let e = parse_trace(&bad_format).unwrap_err();
        assert!(e.to_string().contains("unknown trace format"));

        let mut broken = trace.clone();
        broken.steps[1].input = "0".repeat(64);
        let e = parse_trace(&serialize_trace(&broken)).unwrap_err();
        assert!(e.to_string().contains("digest chain broken at step 1"));

        let mut lines: Vec<&str> = text.lines().collect();
        let bogus = format!(
            "{{\"input\":\"{}\",\"output\":\"{}\",\"kind\":\"bogus\"}}",
            trace.digest, trace.digest
        );
        lines.insert(1, &bogus);
        assert!(matches!(parse_trace(&lines.join("\n")), Err(Error::Parse(_))));
    }

    #[test]
    fn header_digest_must_match_the_instance() {
        let (inst, lang) = example2();
        let mut trace = solver_trace(&inst, &lang);
        trace.digest = "0".repeat(64);
        assert!(matches!(
            verify_trace(&inst, &lang, &trace, CheckMode::Witness, 1 << 20),
            Err(Error::Rejected(_))
        ));
    }

    #[test]
    fn answer_step_must_be_final() {
        let (inst, lang) = example2();
        let mut trace = solver_trace(&inst, &lang);
        let last = trace.steps.last().unwrap().clone();
        trace.steps.push(last);
        assert_rejected(&inst, &lang, &trace, "answer step is not final");
    }

    #[test]
    fn mutated_cc_step_is_rejected() {
        let (inst, lang) = example_linear();
        let mut trace = solver_trace(&inst, &lang);
        assert_eq!(trace.steps[0].body.kind(), "cc");
        trace.steps[0].body = StepBody::Cc {
            action: ReduceAction::Reduce { var: 0, domain: vec![0] },
        };
        assert_rejected(&inst, &lang, &trace, "step claims");
    }

    #[test]
    fn inserted_irr_step_is_rejected() {
        let (inst, lang) = example2();
        let mut trace = solver_trace(&inst, &lang);
        trace.steps.insert(0, TraceStep {
            input: trace.digest.clone(),
            output: trace.digest.clone(),
            body: StepBody::Irr { action: ReduceAction::Reduce { var: 0, domain: vec![0] } },
        });
        assert_rejected(&inst, &lang, &trace, "unchanged");
    }

    #[test]
    fn inserted_weak_step_is_rejected() {
        let (inst, lang) = example2();
        let mut trace = solver_trace(&inst, &lang);
        trace.steps.insert(0, TraceStep {
            input: trace.digest.clone(),
            output: trace.digest.clone(),
            body: StepBody::Weak { action: ReduceAction::Empty },
        });
        assert_rejected(&inst, &lang, &trace, "unchanged");
    }

    #[test]
    fn mutated_ba_step_is_rejected() {
        let (inst, lang, mut trace) = trace_with("meet2", "ba");
        assert_accepted(&inst, &lang, &trace);
        let idx = trace.steps.iter().position(|s| s.body.kind() == "ba").unwrap();
        if let StepBody::Ba { b, .. } = &mut trace.steps[idx].body {
            b.clear();
        }
        assert_rejected(&inst, &lang, &trace, "proper nonempty subset");
    }

    #[test]
    fn mutated_cr_step_is_rejected() {
        let (inst, lang, mut trace) = trace_with("selfdual2", "cr");
        assert_accepted(&inst, &lang, &trace);
        let idx = trace.steps.iter().position(|s| s.body.kind() == "cr").unwrap();
        if let StepBody::Cr { transcripts, .. } = &mut trace.steps[idx].body {
            transcripts.clear();
        }
        assert_rejected(&inst, &lang, &trace, "transcripts do not cover");
    }

    #[test]
    fn mutated_pc_step_is_rejected() {
        let (inst, lang, mut trace) = trace_with("rps", "pc");
        assert_accepted(&inst, &lang, &trace);
        let idx = trace.steps.iter().position(|s| s.body.kind() == "pc").unwrap();
        if let StepBody::Pc { block, .. } = &mut trace.steps[idx].body {
            block.clear();
        }
        assert_rejected(&inst, &lang, &trace, "not a block of sigma");
    }

    #[test]
    fn mutated_lin_factor_step_is_rejected() {
        let (inst, lang) = example2();
        let mut trace = solver_trace(&inst, &lang);
        let idx = trace.steps.iter().position(|s| s.body.kind() == "lin_factor").unwrap();
        trace.steps[idx].body = StepBody::LinFactor { quotients: Vec::new() };
        assert_rejected(&inst, &lang, &trace, "one quotient per variable");
    }

    #[test]
    fn mutated_lin_gauss_step_is_rejected() {
        let (inst, lang) = example2();
        let mut trace = solver_trace(&inst, &lang);
        let idx = trace.steps.iter().position(|s| s.body.kind() == "lin_gauss").unwrap();
        if let StepBody::LinGauss { dim, .. } = &mut trace.steps[idx].body {
            *dim = dim.map(|d| d + 1);
        }
        assert_rejected(&inst, &lang, &trace, "dimension does not replay");
    }

    #[test]
    fn linear_hand_trace_is_accepted() {
        let (inst, lang, trace) = linear_hand_trace();
        let kinds: Vec<_> = trace.steps.iter().map(|s| s.body.kind()).collect();
        assert!(kinds.contains(&"lin_weaken"));
        assert!(kinds.contains(&"lin_eq_add"));
        assert_accepted(&inst, &lang, &trace);
    }

    #[test]
    fn mutated_lin_weaken_step_is_rejected() {
        let (inst, lang, mut trace) = linear_hand_trace();
        let idx = trace.steps.iter().position(|s| s.body.kind() == "lin_weaken").unwrap();
        if let StepBody::LinWeaken { edge } = &mut trace.steps[idx].body {
            *edge = (2, 0);
        }
        assert_rejected(&inst, &lang, &trace, "canonical order");
    }

    #[test]
    fn mutated_lin_eq_add_step_is_rejected() {
        let (inst, lang, mut trace) = linear_hand_trace();
        let idx = trace.steps.iter().position(|s| s.body.kind() == "lin_eq_add").unwrap();
        if let StepBody::LinEqAdd { rows, prime, .. } = &mut trace.steps[idx].body {
            rows[0].rhs = (rows[0].rhs + 1) % *prime;
        }
        assert_rejected(&inst, &lang, &trace, "affine hull");
    }

    #[test]
    fn mutated_oracle_step_is_rejected() {
        let (inst, lang) = example1();
        let cfg = SolveConfig { max_depth: 0, ..SolveConfig::default() };
        let mut trace = solve(&inst, &lang, &cfg).unwrap().trace;
        assert_eq!(trace.steps[0].body.kind(), "oracle");
        trace.steps[0].body = StepBody::Oracle {
            result: "sat".into(),
            assignment: Some(vec![0, 0, 0]),
        };
        assert_rejected(&inst, &lang, &trace, "not a solution");
    }

    #[test]
    fn flipped_answers_are_rejected() {
        let (inst, lang) = example2();
        let mut trace = solver_trace(&inst, &lang);
        let last = trace.steps.len() - 1;
        trace.steps[last].body = StepBody::Answer { value: "no".into(), assignment: None };
        assert_rejected(&inst, &lang, &trace, "still solvable");

        let (inst, lang) = example1();
        let mut trace = solver_trace(&inst, &lang);
        let last = trace.steps.len() - 1;
        trace.steps[last].body = StepBody::Answer {
            value: "yes".into(),
            assignment: Some(vec![0, 1, 0]),
        };
        assert_rejected(&inst, &lang, &trace, "does not solve");
    }

    #[test]
    fn cnf_encoding_of_the_examples() {
        let (inst, _) = example1();
        let doc = emit_cnf(&inst);
        assert_eq!(doc.nvars, 6);
        assert_eq!(doc.clauses.len(), 12);
        assert!(!cnf_satisfiable(&doc, 20).unwrap());
        let dimacs = cnf_to_dimacs(&doc);
        assert!(dimacs.contains("p cnf 6 12"));
        assert!(dimacs.contains("c var 1 = h(0,"));

        let (inst, _) = example2();
        let doc = emit_cnf(&inst);
        let count = cnf_count_solutions(&doc, 20).unwrap();
        let brute = brute_force_solve(&inst, 1 << 20).unwrap();
        assert!(count > 0);
        assert_eq!(count, brute.len());
    }

    #[test]
    fn edgeless_cnf_is_satisfiable() {
        let inst = Instance::new(2, vec![BTreeSet::from([0, 1]), BTreeSet::from([0])]);
        let doc = emit_cnf(&inst);
        assert!(cnf_satisfiable(&doc, 20).unwrap());
        assert_eq!(cnf_count_solutions(&doc, 20).unwrap(), 2);
    }
}
