//! Orchestration of the full algorithm: consistency reductions, the four-case
//! domain reductions, the linear case, recursion with budgets, and the
//! brute-force oracle, all logged as a checkable trace.

use std::collections::BTreeMap;
use std::sync::Mutex;

use crate::algebra::{
    classify_four_cases, find_linear_quotient, restrict_language, FourCaseWitness, LinearQuotient,
};
use crate::certkit::{instance_digest, ReduceAction, StepBody, Trace, TraceStep};
use crate::consistency::{
    cycle_consistency_reduce, irreducibility_reduce, weaker_instance_reduce, Reduction,
};
use crate::linear::{linear_case_solve, LinOutcome, LinStep};
use crate::model::{brute_force_solve, validate_instance, Assignment, Instance, Language};
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct SolveConfig {
    /// recursion budget; at depth 0 the oracle substitutes
    pub max_depth: usize,
    /// domain-size product at or below which the main path hands over to the
    /// oracle immediately
    pub brute_threshold: usize,
    /// domain-size product at or below which internal solvability probes
    /// (irreducibility, weaker-instance, linear sub-solves) use brute force
    /// instead of recursion
    pub sub_brute_threshold: usize,
    /// enumeration cap for the brute-force oracle
    pub oracle_cap: usize,
    /// cap on enumerated factor points in the linear case
    pub point_cap: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            max_depth: 8,
            brute_threshold: 1,
            sub_brute_threshold: 4096,
            oracle_cap: 1 << 20,
            point_cap: 1 << 16,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Answer {
    Solution(Assignment),
    NoSolution,
}

#[derive(Clone, Debug)]
pub struct SolveOutcome {
    pub answer: Answer,
    pub trace: Trace,
}

// Classification is a pure function of (Ω, Γ, D); memoized process-wide since
// the polynomial-completeness decision is the one expensive detector.
type ClassKey = (Vec<usize>, String, Vec<usize>);
static CLASS_CACHE: Mutex<BTreeMap<ClassKey, FourCaseWitness>> = Mutex::new(BTreeMap::new());

fn language_fingerprint(lang: &Language) -> String {
    use sha2::{Digest, Sha256};
    let mut h = Sha256::new();
    h.update(serde_json::to_string(&(&lang.unary, &lang.binary)).unwrap().as_bytes());
    h.finalize().iter().map(|b| format!("{:02x}", b)).collect()
}

fn classify_cached(
    lang: &Language,
    fingerprint: &str,
    d: &std::collections::BTreeSet<usize>,
) -> Result<FourCaseWitness> {
    let key: ClassKey = (
        lang.wnu.table.clone(),
        fingerprint.to_string(),
        d.iter().cloned().collect(),
    );
    if let Some(w) = CLASS_CACHE.lock().unwrap().get(&key) {
        return Ok(w.clone());
    }
    let gamma = restrict_language(lang, d);
    let w = classify_four_cases(d, &lang.wnu, &gamma)?;
    CLASS_CACHE.lock().unwrap().insert(key, w.clone());
    Ok(w)
}

fn step(input: String, output: String, body: StepBody) -> TraceStep {
    TraceStep { input, output, body }
}

fn reduce_action(var: usize, dom: &std::collections::BTreeSet<usize>) -> ReduceAction {
    ReduceAction::Reduce { var, domain: dom.iter().cloned().collect() }
}

struct Ctx<'a> {
    lang: &'a Language,
    cfg: &'a SolveConfig,
    fingerprint: String,
}

impl<'a> Ctx<'a> {
    /// solvability probe for the reduction operators and the linear loop
    fn probe(&self, inst: &Instance, depth: usize) -> Result<Option<Assignment>> {
        if inst.domain_product() <= self.cfg.sub_brute_threshold {
            Ok(brute_force_solve(inst, self.cfg.oracle_cap)?.into_iter().next())
        } else {
            solve_rec(self, inst, depth.saturating_sub(1)).map(|(sol, _)| sol)
        }
    }
}

fn solve_rec(
    ctx: &Ctx,
    inst: &Instance,
    depth: usize,
) -> Result<(Option<Assignment>, Vec<TraceStep>)> {
    let mut steps: Vec<TraceStep> = Vec::new();
    let mut cur = inst.clone();
    if depth == 0 || cur.domain_product() <= ctx.cfg.brute_threshold {
        let sols = brute_force_solve(&cur, ctx.cfg.oracle_cap)?;
        let d = instance_digest(&cur);
        let first = sols.into_iter().next();
        steps.push(step(
            d.clone(),
            d,
            StepBody::Oracle {
                result: if first.is_some() { "sat" } else { "unsat" }.to_string(),
                assignment: first.clone(),
            },
        ));
        return Ok((first, steps));
    }
    loop {
        // (1) cycle consistency
        match cycle_consistency_reduce(&cur) {
            Reduction::NoSolution => {
                let d = instance_digest(&cur);
                steps.push(step(d.clone(), d, StepBody::Cc { action: ReduceAction::Empty }));
                return Ok((None, steps));
            }
            Reduction::Reduced { var, new_domain, instance } => {
                steps.push(step(
                    instance_digest(&cur),
                    instance_digest(&instance),
                    StepBody::Cc { action: reduce_action(var, &new_domain) },
                ));
                cur = instance;
                continue;
            }
            Reduction::Unchanged => {}
        }
        // (2) irreducibility
        let mut check = |i: &Instance| ctx.probe(i, depth).map(|s| s.is_some());
        let (red, _) = irreducibility_reduce(&cur, ctx.lang, &mut check)?;
        match red {
            Reduction::NoSolution => {
                let d = instance_digest(&cur);
                steps.push(step(d.clone(), d, StepBody::Irr { action: ReduceAction::Empty }));
                return Ok((None, steps));
            }
            Reduction::Reduced { var, new_domain, instance } => {
                steps.push(step(
                    instance_digest(&cur),
                    instance_digest(&instance),
                    StepBody::Irr { action: reduce_action(var, &new_domain) },
                ));
                cur = instance;
                continue;
            }
            Reduction::Unchanged => {}
        }
        // (3) weaker instance
        let mut check = |i: &Instance| ctx.probe(i, depth).map(|s| s.is_some());
        match weaker_instance_reduce(&cur, ctx.lang, &mut check)? {
            Reduction::NoSolution => {
                let d = instance_digest(&cur);
                steps.push(step(d.clone(), d, StepBody::Weak { action: ReduceAction::Empty }));
                return Ok((None, steps));
            }
            Reduction::Reduced { var, new_domain, instance } => {
                steps.push(step(
                    instance_digest(&cur),
                    instance_digest(&instance),
                    StepBody::Weak { action: reduce_action(var, &new_domain) },
                ));
                cur = instance;
                continue;
            }
            Reduction::Unchanged => {}
        }
        // (4) four-case reduction on the first variable whose classification
        // is not linear; (5) the linear case once only linear cases remain
        let multi: Vec<usize> = (0..cur.n).filter(|&i| cur.domains[i].len() > 1).collect();
        if multi.is_empty() {
            // (6) read off the assignment
            let h: Assignment = cur.domains.iter().map(|d| *d.iter().next().unwrap()).collect();
            if !cur.is_solution(&h) {
                return Err(Error::Internal(
                    "cycle-consistent singleton instance fails its own edges".into(),
                ));
            }
            return Ok((Some(h), steps));
        }
        // classify every multi-element domain up front: absorption beats a
        // central subuniverse beats a PC quotient, across all variables
        let mut witnesses: Vec<(usize, FourCaseWitness)> = Vec::new();
        for &i in &multi {
            witnesses.push((i, classify_cached(ctx.lang, &ctx.fingerprint, &cur.domains[i])?));
        }
        let rank = |w: &FourCaseWitness| match w {
            FourCaseWitness::BinaryAbsorbing { .. } => 0,
            FourCaseWitness::Central { .. } => 1,
            FourCaseWitness::PcQuotient { .. } => 2,
            FourCaseWitness::LinearQuotient(_) => 3,
        };
        witnesses.sort_by_key(|(i, w)| (rank(w), *i));
        let mut acted = false;
        for (i, witness) in witnesses {
            match witness {
                FourCaseWitness::BinaryAbsorbing { b, t } => {
                    let next = cur.restrict(i, &b)?;
                    steps.push(step(
                        instance_digest(&cur),
                        instance_digest(&next),
                        StepBody::Ba {
                            var: i,
                            b: b.iter().cloned().collect(),
                            t,
                        },
                    ));
                    cur = next;
                    acted = true;
                    break;
                }
                FourCaseWitness::Central { c, s, transcripts } => {
                    let next = cur.restrict(i, &c)?;
                    steps.push(step(
                        instance_digest(&cur),
                        instance_digest(&next),
                        StepBody::Cr {
                            var: i,
                            c: c.iter().cloned().collect(),
                            s,
                            transcripts: transcripts
                                .into_iter()
                                .map(|(a, sg)| (a, sg.into_iter().collect()))
                                .collect(),
                        },
                    ));
                    cur = next;
                    acted = true;
                    break;
                }
                FourCaseWitness::PcQuotient { sigma, p } => {
                    // blocks in canonical order via recursion; the first
                    // exploration is kept when every block fails
                    let mut first_failure: Option<(TraceStep, Vec<TraceStep>)> = None;
                    for block in &sigma.blocks {
                        let next = cur.restrict(i, block)?;
                        let pc_step = step(
                            instance_digest(&cur),
                            instance_digest(&next),
                            StepBody::Pc {
                                var: i,
                                sigma: sigma
                                    .blocks
                                    .iter()
                                    .map(|b| b.iter().cloned().collect())
                                    .collect(),
                                disc: p.table.clone(),
                                block: block.iter().cloned().collect(),
                            },
                        );
                        let (sol, sub_steps) = solve_rec(ctx, &next, depth - 1)?;
                        if let Some(h) = sol {
                            steps.push(pc_step);
                            steps.extend(sub_steps);
                            return Ok((Some(h), steps));
                        }
                        if first_failure.is_none() {
                            first_failure = Some((pc_step, sub_steps));
                        }
                    }
                    let (pc_step, sub_steps) = first_failure.expect("congruence has blocks");
                    steps.push(pc_step);
                    steps.extend(sub_steps);
                    return Ok((None, steps));
                }
                FourCaseWitness::LinearQuotient(_) => continue,
            }
        }
        if acted {
            continue;
        }
        // (5) every multi-element domain is in the linear case
        let quotients: Vec<LinearQuotient> = cur
            .domains
            .iter()
            .map(|d| {
                find_linear_quotient(d, &ctx.lang.wnu)?.ok_or_else(|| {
                    Error::Internal("classified linear domain lost its linear quotient".into())
                })
            })
            .collect::<Result<_>>()?;
        let d0 = instance_digest(&cur);
        let mut lin_steps: Vec<TraceStep> = Vec::new();
        let mut sub = |i: &Instance| ctx.probe(i, depth);
        let out = linear_case_solve(
            &cur,
            ctx.lang,
            &quotients,
            &mut sub,
            &mut |s: LinStep| {
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
                lin_steps.push(step(d0.clone(), d0.clone(), body));
            },
            ctx.cfg.point_cap,
        )?;
        steps.extend(lin_steps);
        return match out {
            LinOutcome::Solution(h) => Ok((Some(h), steps)),
            LinOutcome::NoSolution => Ok((None, steps)),
        };
    }
}

pub fn solve(inst: &Instance, lang: &Language, cfg: &SolveConfig) -> Result<SolveOutcome> {
    let report = validate_instance(inst, lang);
    if !report.is_empty() {
        return Err(Error::Precondition(report.join("; ")));
    }
    let ctx = Ctx { lang, cfg, fingerprint: language_fingerprint(lang) };
    let (sol, mut steps) = solve_rec(&ctx, inst, cfg.max_depth)?;
    let digest = instance_digest(inst);
    let tail = steps.last().map(|s| s.output.clone()).unwrap_or_else(|| digest.clone());
    let answer = match sol {
        Some(h) => {
            if !inst.is_solution(&h) {
                return Err(Error::Internal("solver produced a non-solution".into()));
            }
            steps.push(step(
                tail.clone(),
                tail,
                StepBody::Answer { value: "yes".to_string(), assignment: Some(h.clone()) },
            ));
            Answer::Solution(h)
        }
        None => {
            steps.push(step(
                tail.clone(),
                tail,
                StepBody::Answer { value: "no".to_string(), assignment: None },
            ));
            Answer::NoSolution
        }
    };
    Ok(SolveOutcome { answer, trace: Trace { digest, steps } })
}
