//! Ontology quality metrics: size counts, is-a structural cohesion and a
//! semiotic checklist.

use std::collections::HashSet;
use std::fmt::Write as _;

use serde::Serialize;

use crate::report::fmt_num;
use crate::taxonomy::{normalize_term, Taxonomy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SizeMetrics {
    pub size_c: usize,
    pub size_i: usize,
    pub size_a: usize,
    pub size_r: usize,
    pub size_total: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StructuralMetrics {
    pub n_rn: usize,
    pub n_ln: usize,
    pub max_spl: usize,
    pub n_ic: usize,
    pub tnrnr: usize,
    pub anrnr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SemioticReport {
    pub lawfulness: bool,
    pub richness: usize,
    pub interpretability: bool,
    pub consistency: bool,
    pub clarity: bool,
    pub comprehensiveness: usize,
    pub accuracy: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OntologyMetrics {
    pub size: SizeMetrics,
    pub structure: StructuralMetrics,
    pub semiotic: SemioticReport,
}

pub fn size_metrics(t: &Taxonomy) -> SizeMetrics {
    let size_c = t.concepts().len();
    let size_i = t.instances().len();
    let size_a = t.attributes().len();
    let size_r = t.relations().len();
    SizeMetrics {
        size_c,
        size_i,
        size_a,
        size_r,
        size_total: size_c + size_i + size_a + size_r,
    }
}

/// Concepts in an order where every parent precedes its children.
fn topological_order(t: &Taxonomy) -> Option<Vec<usize>> {
    let n = t.concepts().len();
    let mut pending: Vec<usize> = t.concepts().iter().map(|c| c.parents.len()).collect();
    let mut order: Vec<usize> = (0..n).filter(|&c| pending[c] == 0).collect();
    let mut head = 0;
    while head < order.len() {
        let c = order[head];
        head += 1;
        for &child in t.children(c) {
            pending[child] -= 1;
            if pending[child] == 0 {
                order.push(child);
            }
        }
    }
    (order.len() == n).then_some(order)
}

pub fn structural_metrics(t: &Taxonomy) -> StructuralMetrics {
    let concepts = t.concepts();
    let n = concepts.len();
    let roots: Vec<usize> = (0..n).filter(|&c| concepts[c].parents.is_empty()).collect();
    let n_ln = (0..n).filter(|&c| t.children(c).is_empty()).count();

    let mut has_instance = vec![false; n];
    for inst in t.instances() {
        has_instance[inst.concept] = true;
    }
    let n_ic = roots
        .iter()
        .filter(|&&c| c != t.root() && t.children(c).is_empty() && !has_instance[c])
        .count();

    // Longest downward path from each node, filled in reverse topological order.
    let order = topological_order(t).expect("validated taxonomy is acyclic");
    let mut height = vec![0usize; n];
    for &c in order.iter().rev() {
        height[c] = t
            .children(c)
            .iter()
            .map(|&k| height[k] + 1)
            .max()
            .unwrap_or(0);
    }
    let max_spl = roots.iter().map(|&r| height[r]).max().unwrap_or(0);

    let mut reached = vec![false; n];
    let mut stack = roots.clone();
    while let Some(c) = stack.pop() {
        if !reached[c] {
            reached[c] = true;
            stack.extend(t.children(c));
        }
    }
    let tnrnr = reached.iter().filter(|&&r| r).count();
    let n_rn = roots.len();

    StructuralMetrics {
        n_rn,
        n_ln,
        max_spl,
        n_ic,
        tnrnr,
        anrnr: if n_rn == 0 { 0.0 } else { tnrnr as f64 / n_rn as f64 },
    }
}

pub fn semiotic_report(t: &Taxonomy, accuracy_attested: bool) -> SemioticReport {
    let names: Vec<&str> = t.concepts().iter().map(|c| c.name.as_str()).collect();

    let unique = |keys: Vec<String>| {
        let mut seen = HashSet::new();
        keys.into_iter().all(|k| seen.insert(k))
    };
    let interpretability = names.iter().all(|n| !n.is_empty())
        && t.instances().iter().all(|i| !i.term.trim().is_empty())
        && unique(names.iter().map(|n| n.to_string()).collect());
    let single_owner = unique(t.instances().iter().map(|i| normalize_term(&i.term)).collect());
    let consistency = topological_order(t).is_some() && single_owner;
    let clarity = unique(names.iter().map(|n| n.to_lowercase()).collect());

    let kinds = [
        true,
        t.concepts().len() > 1,
        !t.instances().is_empty(),
        !t.relations().is_empty(),
        !t.attributes().is_empty(),
    ];

    SemioticReport {
        lawfulness: true,
        richness: kinds.iter().filter(|&&k| k).count(),
        interpretability,
        consistency,
        clarity,
        comprehensiveness: size_metrics(t).size_total,
        accuracy: accuracy_attested,
    }
}

pub fn ontology_metrics(t: &Taxonomy, accuracy_attested: bool) -> OntologyMetrics {
    OntologyMetrics {
        size: size_metrics(t),
        structure: structural_metrics(t),
        semiotic: semiotic_report(t, accuracy_attested),
    }
}

impl OntologyMetrics {
    /// Aligned plain-text rendering.
    pub fn to_table(&self) -> String {
        let pass = |b: bool| if b { "pass" } else { "fail" }.to_string();
        let rows: Vec<(&str, &str, String)> = vec![
            ("size", "size_c", self.size.size_c.to_string()),
            ("size", "size_i", self.size.size_i.to_string()),
            ("size", "size_a", self.size.size_a.to_string()),
            ("size", "size_r", self.size.size_r.to_string()),
            ("size", "size_total", self.size.size_total.to_string()),
            ("structure", "n_rn", self.structure.n_rn.to_string()),
            ("structure", "n_ln", self.structure.n_ln.to_string()),
            ("structure", "max_spl", self.structure.max_spl.to_string()),
            ("structure", "n_ic", self.structure.n_ic.to_string()),
            ("structure", "tnrnr", self.structure.tnrnr.to_string()),
            ("structure", "anrnr", fmt_num(self.structure.anrnr)),
            ("semiotic", "lawfulness", pass(self.semiotic.lawfulness)),
            ("semiotic", "richness", self.semiotic.richness.to_string()),
            ("semiotic", "interpretability", pass(self.semiotic.interpretability)),
            ("semiotic", "consistency", pass(self.semiotic.consistency)),
            ("semiotic", "clarity", pass(self.semiotic.clarity)),
            ("semiotic", "comprehensiveness", self.semiotic.comprehensiveness.to_string()),
            ("semiotic", "accuracy", pass(self.semiotic.accuracy)),
        ];
        let w0 = rows.iter().map(|r| r.0.len()).max().unwrap_or(0);
        let w1 = rows.iter().map(|r| r.1.len()).max().unwrap_or(0);
        let mut out = String::new();
        for (group, name, value) in rows {
            let _ = writeln!(out, "{group:<w0$}  {name:<w1$}  {value}");
        }
        out
    }
}
