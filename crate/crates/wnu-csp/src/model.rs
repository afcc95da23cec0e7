//! Data model: relational structures, instances, assignments, file formats.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::algebra::OperationTable;
use crate::{Error, Result};

pub type Elem = usize;
pub type Pair = (Elem, Elem);
pub type Assignment = Vec<Elem>;

/// A constraint language: all unary and binary relations preserved by the
/// WNU operation, over a common base set {0, .., base-1}.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Language {
    pub base: usize,
    pub element_names: Vec<String>,
    pub wnu: OperationTable,
    pub unary: Vec<BTreeSet<Elem>>,
    pub binary: Vec<BTreeSet<Pair>>,
}

impl Language {
    pub fn has_binary(&self, rel: &BTreeSet<Pair>) -> bool {
        self.binary.iter().any(|r| r == rel)
    }

    pub fn has_unary(&self, rel: &BTreeSet<Elem>) -> bool {
        self.unary.iter().any(|r| r == rel)
    }

    pub fn element_name(&self, e: Elem) -> String {
        self.element_names
            .get(e)
            .cloned()
            .unwrap_or_else(|| e.to_string())
    }
}

/// A CSP instance: an input digraph on variables 0..n together with a domain
/// per variable and a binary relation per edge.  Both (i,j) and (j,i) may
/// carry edges with independent relations; self-loops are allowed.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Instance {
    pub n: usize,
    pub domains: Vec<BTreeSet<Elem>>,
    pub edges: BTreeMap<(usize, usize), BTreeSet<Pair>>,
}

impl Instance {
    pub fn new(n: usize, domains: Vec<BTreeSet<Elem>>) -> Self {
        assert_eq!(domains.len(), n);
        Instance {
            n,
            domains,
            edges: BTreeMap::new(),
        }
    }

    pub fn add_edge(&mut self, from: usize, to: usize, tuples: impl IntoIterator<Item = Pair>) {
        self.edges.insert((from, to), tuples.into_iter().collect());
    }

    pub fn is_solution(&self, h: &[Elem]) -> bool {
        if h.len() != self.n {
            return false;
        }
        for i in 0..self.n {
            if !self.domains[i].contains(&h[i]) {
                return false;
            }
        }
        self.edges
            .iter()
            .all(|(&(i, j), rel)| rel.contains(&(h[i], h[j])))
    }

    /// Replace D_i by a subset and intersect every incident edge relation with
    /// the new domain product.  The empty subset is allowed and signals "no
    /// solution" downstream.
    pub fn restrict(&self, i: usize, sub: &BTreeSet<Elem>) -> Result<Instance> {
        if !sub.is_subset(&self.domains[i]) {
            return Err(Error::Precondition(format!(
                "restriction {:?} is not a subset of domain {} = {:?}",
                sub, i, self.domains[i]
            )));
        }
        let mut out = self.clone();
        out.domains[i] = sub.clone();
        for (&(a, b), rel) in out.edges.iter_mut() {
            rel.retain(|&(x, y)| {
                (a != i || sub.contains(&x)) && (b != i || sub.contains(&y))
            });
        }
        Ok(out)
    }

    /// Induced subinstance on a variable subset: same domains, edges of the
    /// input digraph with both endpoints inside the set.  Variables keep their
    /// indices (the instance still ranges over 0..n; dropped variables become
    /// unconstrained with their full domain).
    pub fn project(&self, vars: &BTreeSet<usize>) -> Instance {
        let mut out = self.clone();
        out.edges
            .retain(|&(i, j), _| vars.contains(&i) && vars.contains(&j));
        out
    }

    pub fn domain_product(&self) -> usize {
        self.domains
            .iter()
            .map(|d| d.len())
            .fold(1usize, |acc, k| acc.saturating_mul(k))
    }

    pub fn all_singleton(&self) -> bool {
        self.domains.iter().all(|d| d.len() == 1)
    }

    /// Variables adjacent to i in the undirected view of the input digraph,
    /// with the list of edge keys connecting them.
    pub fn incident_edges(&self, i: usize) -> Vec<(usize, usize)> {
        self.edges
            .keys()
            .filter(|&&(a, b)| a == i || b == i)
            .cloned()
            .collect()
    }
}

/// Diagnostic validity report; empty report = valid.
pub fn validate_instance(inst: &Instance, lang: &Language) -> Vec<String> {
    let mut report = Vec::new();
    if inst.domains.len() != inst.n {
        report.push(format!(
            "domain list has {} entries for {} variables",
            inst.domains.len(),
            inst.n
        ));
        return report;
    }
    for (i, d) in inst.domains.iter().enumerate() {
        if d.is_empty() {
            report.push(format!("domain {} is empty", i));
        }
        if d.iter().any(|&e| e >= lang.base) {
            report.push(format!("domain {} has out-of-range element", i));
        }
        if !d.is_empty() && d.iter().all(|&e| e < lang.base) && !lang.has_unary(d) {
            report.push(format!("domain {} = {:?} is not a relation of the language", i, d));
        }
    }
    for (&(i, j), rel) in &inst.edges {
        if i >= inst.n || j >= inst.n {
            report.push(format!("edge ({},{}) has a variable out of range", i, j));
            continue;
        }
        if rel.is_empty() {
            report.push(format!("edge ({},{}) has an empty tuple set", i, j));
            continue;
        }
        for &(a, b) in rel {
            if !inst.domains[i].contains(&a) || !inst.domains[j].contains(&b) {
                report.push(format!("edge ({},{}) tuple ({},{}) out of domain", i, j, a, b));
            }
        }
        if rel.iter().any(|&(a, b)| a >= lang.base || b >= lang.base) {
            continue;
        }
        if !lang.has_binary(rel) {
            // Distinguish "not Ω-invariant" from "missing from the list".
            let closed = crate::algebra::sg_closure_pairs(&lang.wnu, rel);
            if &closed != rel {
                report.push(format!("edge ({},{}) relation is not Ω-invariant", i, j));
            } else {
                report.push(format!("edge ({},{}) relation is not in the language", i, j));
            }
        }
    }
    report
}

/// Exact enumeration of all solutions.  `cap` bounds the product of domain
/// sizes.
pub fn brute_force_solve(inst: &Instance, cap: usize) -> Result<Vec<Assignment>> {
    if inst.domain_product() > cap {
        return Err(Error::Resource(format!(
            "domain product {} exceeds oracle cap {}",
            inst.domain_product(),
            cap
        )));
    }
    let mut out = Vec::new();
    let doms: Vec<Vec<Elem>> = inst.domains.iter().map(|d| d.iter().cloned().collect()).collect();
    if doms.iter().any(|d| d.is_empty()) {
        return Ok(out);
    }
    let mut idx = vec![0usize; inst.n];
    'outer: loop {
        let h: Assignment = (0..inst.n).map(|i| doms[i][idx[i]]).collect();
        if inst.is_solution(&h) {
            out.push(h);
        }
        for i in (0..inst.n).rev() {
            idx[i] += 1;
            if idx[i] < doms[i].len() {
                continue 'outer;
            }
            idx[i] = 0;
        }
        break;
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// File format

#[derive(Serialize, Deserialize)]
struct WnuFile {
    arity: usize,
    table: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct EdgeFile {
    from: usize,
    to: usize,
    tuples: Vec<[usize; 2]>,
}

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    base_size: usize,
    element_names: Vec<String>,
    wnu: WnuFile,
    unary: Vec<Vec<usize>>,
    binary: Vec<Vec<[usize; 2]>>,
    n: usize,
    domains: Vec<Vec<usize>>,
    edges: Vec<EdgeFile>,
}

pub fn parse_instance(text: &str) -> Result<(Instance, Language)> {
    let file: InstanceFile = serde_json::from_str(text)
        .map_err(|e| Error::Parse(format!("line {}, column {}: {}", e.line(), e.column(), e)))?;
    let l = file.base_size;
    if l == 0 {
        return Err(Error::Parse("base_size must be at least 1".into()));
    }
    let wnu = OperationTable::new(l, file.wnu.arity, file.wnu.table)
        .map_err(|e| Error::Parse(format!("wnu table: {}", e)))?;
    let mut names = file.element_names;
    while names.len() < l {
        names.push(names.len().to_string());
    }
    let unary: Vec<BTreeSet<Elem>> = file
        .unary
        .iter()
        .map(|r| r.iter().cloned().collect())
        .collect();
    let binary: Vec<BTreeSet<Pair>> = file
        .binary
        .iter()
        .map(|r| r.iter().map(|t| (t[0], t[1])).collect())
        .collect();
    for r in &unary {
        if r.iter().any(|&e| e >= l) {
            return Err(Error::Parse("unary relation element out of range".into()));
        }
    }
    for r in &binary {
        if r.iter().any(|&(a, b)| a >= l || b >= l) {
            return Err(Error::Parse("binary relation element out of range".into()));
        }
    }
    let lang = Language {
        base: l,
        element_names: names,
        wnu,
        unary,
        binary,
    };
    if file.domains.len() != file.n {
        return Err(Error::Parse(format!(
            "expected {} domains, found {}",
            file.n,
            file.domains.len()
        )));
    }
    let domains: Vec<BTreeSet<Elem>> = file
        .domains
        .iter()
        .map(|d| d.iter().cloned().collect())
        .collect();
    for (i, d) in domains.iter().enumerate() {
        if d.iter().any(|&e| e >= l) {
            return Err(Error::Parse(format!("domain {}: element out of range", i)));
        }
    }
    let mut inst = Instance::new(file.n, domains);
    for e in &file.edges {
        if e.from >= file.n || e.to >= file.n {
            return Err(Error::Parse(format!(
                "edge ({},{}): variable out of range",
                e.from, e.to
            )));
        }
        if e.tuples.iter().any(|t| t[0] >= l || t[1] >= l) {
            return Err(Error::Parse(format!(
                "edge ({},{}): element out of range",
                e.from, e.to
            )));
        }
        inst.add_edge(e.from, e.to, e.tuples.iter().map(|t| (t[0], t[1])));
    }
    Ok((inst, lang))
}

pub fn serialize_instance(inst: &Instance, lang: &Language) -> String {
    let file = InstanceFile {
        base_size: lang.base,
        element_names: lang.element_names.clone(),
        wnu: WnuFile {
            arity: lang.wnu.arity,
            table: lang.wnu.table.clone(),
        },
        unary: lang.unary.iter().map(|r| r.iter().cloned().collect()).collect(),
        binary: lang
            .binary
            .iter()
            .map(|r| r.iter().map(|&(a, b)| [a, b]).collect())
            .collect(),
        n: inst.n,
        domains: inst.domains.iter().map(|d| d.iter().cloned().collect()).collect(),
        edges: inst
            .edges
            .iter()
            .map(|(&(from, to), rel)| EdgeFile {
                from,
                to,
                tuples: rel.iter().map(|&(a, b)| [a, b]).collect(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&file).expect("instance serialization cannot fail")
}

/// Canonical instance-only JSON used for trace digests.
pub fn canonical_instance_json(inst: &Instance) -> String {
    #[derive(Serialize)]
    struct Inst<'a> {
        n: usize,
        domains: Vec<Vec<usize>>,
        edges: Vec<(usize, usize, Vec<[usize; 2]>)>,
        #[serde(skip)]
        _p: std::marker::PhantomData<&'a ()>,
    }
    let v = Inst {
        n: inst.n,
        domains: inst.domains.iter().map(|d| d.iter().cloned().collect()).collect(),
        edges: inst
            .edges
            .iter()
            .map(|(&(i, j), rel)| (i, j, rel.iter().map(|&(a, b)| [a, b]).collect()))
            .collect(),
        _p: std::marker::PhantomData,
    };
    serde_json::to_string(&v).expect("instance serialization cannot fail")
}
