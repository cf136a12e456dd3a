//! Intervention-effect queries on cluster graphs and d-separation queries on
//! Markov ordering graphs.

use std::collections::VecDeque;

use serde::Serialize;
use thiserror::Error;

use crate::model::{Ident, SymbolKind};
use crate::ordering::{ClusterGraph, MarkovDag};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QueryError {
    #[error("unknown vertex `{0}`")]
    UnknownVertex(String),
    #[error("unknown cluster `{0}`")]
    UnknownCluster(String),
    #[error("vertex `{0}` occurs in more than one of the query sets")]
    OverlappingSets(String),
    #[error("`{name}` is not a valid target: {reason}")]
    InvalidTarget { name: String, reason: String },
}

/// Resolves a vertex name. Besides exact names, the figure-style aliases
/// `v_<s>` (for `X_<s>`) and `w_<s>` (for `U_<s>`) are accepted.
pub fn resolve_vertex(
    name: &str,
    lookup: impl Fn(&str) -> Option<usize>,
) -> Result<usize, QueryError> {
    if let Some(i) = lookup(name) {
        return Ok(i);
    }
    let alias = if let Some(rest) = name.strip_prefix("v_") {
        Some(format!("X_{rest}"))
    } else {
        name.strip_prefix("w_").map(|rest| format!("U_{rest}"))
    };
    alias
        .and_then(|a| lookup(&a))
        .ok_or_else(|| QueryError::UnknownVertex(name.to_string()))
}

/// Clusters reachable from `start` (inclusive) along cluster-level edges.
pub fn reachable_clusters(co: &ClusterGraph, start: usize) -> Vec<bool> {
    let succ = co.cluster_successors();
    let mut seen = vec![false; co.clusters().len()];
    seen[start] = true;
    let mut queue = VecDeque::from([start]);
    while let Some(c) = queue.pop_front() {
        for &d in &succ[c] {
            if !seen[d] {
                seen[d] = true;
                queue.push_back(d);
            }
        }
    }
    seen
}

/// True iff `cl(x) = cl(y)` or a sequence of clusters leads from `cl(x)` to
/// `cl(y)`, each step an edge from a member of one cluster into the next.
pub fn cluster_reachable_idx(co: &ClusterGraph, x: usize, y: usize) -> bool {
    reachable_clusters(co, co.cluster_of(x))[co.cluster_of(y)]
}

pub fn cluster_reachable(co: &ClusterGraph, x: &str, y: &str) -> Result<bool, QueryError> {
    let xi = resolve_vertex(x, |n| co.vertex_index(n))?;
    let yi = resolve_vertex(y, |n| co.vertex_index(n))?;
    Ok(cluster_reachable_idx(co, xi, yi))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Intervention {
    Soft,
    Perfect,
}

/// Endogenous variables split by whether the intervention generically
/// affects them. The effects hold for all but a measure-zero set of
/// parameter values, so the field is named accordingly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EffectReport {
    pub target: Ident,
    pub intervention: Intervention,
    pub generically_affected: Vec<Ident>,
    pub unaffected: Vec<Ident>,
}

fn report(
    co: &ClusterGraph,
    target: Ident,
    intervention: Intervention,
    reached: &[bool],
) -> EffectReport {
    let mut affected = Vec::new();
    let mut unaffected = Vec::new();
    for (i, v) in co.vertices().iter().enumerate() {
        if v.kind != SymbolKind::Variable {
            continue;
        }
        if reached[co.cluster_of(i)] {
            affected.push(v.name.clone());
        } else {
            unaffected.push(v.name.clone());
        }
    }
    EffectReport {
        target,
        intervention,
        generically_affected: affected,
        unaffected,
    }
}

/// Effects of a soft intervention on an equation, parameter or exogenous
/// variable.
pub fn soft_intervention_effects(co: &ClusterGraph, target: &str) -> Result<EffectReport, QueryError> {
    let t = resolve_vertex(target, |n| co.vertex_index(n))?;
    let vertex = &co.vertices()[t];
    if vertex.kind == SymbolKind::Variable {
        return Err(QueryError::InvalidTarget {
            name: target.to_string(),
            reason: "soft interventions target equations, parameters or exogenous variables"
                .into(),
        });
    }
    let reached = reachable_clusters(co, co.cluster_of(t));
    Ok(report(co, vertex.name.clone(), Intervention::Soft, &reached))
}

/// Resolves `C<i>` or the name of any member vertex to a cluster index.
pub fn resolve_cluster(co: &ClusterGraph, spec: &str) -> Result<usize, QueryError> {
    if let Some(i) = spec
        .strip_prefix('C')
        .and_then(|d| d.parse::<usize>().ok())
        .filter(|&i| i < co.clusters().len())
    {
        return Ok(i);
    }
    resolve_vertex(spec, |n| co.vertex_index(n))
        .map(|v| co.cluster_of(v))
        .map_err(|_| QueryError::UnknownCluster(spec.to_string()))
}

/// Effects of pinning every variable of a cluster to a constant.
pub fn perfect_intervention_effects(
    co: &ClusterGraph,
    cluster: usize,
) -> Result<EffectReport, QueryError> {
    if cluster >= co.clusters().len() {
        return Err(QueryError::UnknownCluster(format!("C{cluster}")));
    }
    if !co.is_endogenous(cluster) {
        return Err(QueryError::InvalidTarget {
            name: co.cluster_name(cluster),
            reason: "exogenous and parameter singletons contain no equations".into(),
        });
    }
    let reached = reachable_clusters(co, cluster);
    Ok(report(co, co.cluster_name(cluster), Intervention::Perfect, &reached))
}

fn resolve_set(mo: &MarkovDag, names: &[&str]) -> Result<Vec<usize>, QueryError> {
    names
        .iter()
        .map(|n| resolve_vertex(n, |s| mo.vertex_index(s)))
        .collect()
}

/// d-separation of `x` and `y` given `z` by name.
pub fn d_separated(
    mo: &MarkovDag,
    x: &[&str],
    y: &[&str],
    z: &[&str],
) -> Result<bool, QueryError> {
    let (xs, ys, zs) = (resolve_set(mo, x)?, resolve_set(mo, y)?, resolve_set(mo, z)?);
    let mut owner = vec![0u8; mo.len()];
    for (tag, set) in [(1u8, &xs), (2, &ys), (3, &zs)] {
        for &v in set {
            if owner[v] != 0 && owner[v] != tag {
                return Err(QueryError::OverlappingSets(mo.vertices()[v].name.clone()));
            }
            owner[v] = tag;
        }
    }
    Ok(d_separated_idx(mo, &xs, &ys, &zs))
}

/// d-separation by reachability in the moralized ancestral graph of
/// `x ∪ y ∪ z` with `z` removed. Sets must be disjoint.
pub fn d_separated_idx(mo: &MarkovDag, x: &[usize], y: &[usize], z: &[usize]) -> bool {
    let n = mo.len();
    let mut ancestral = vec![false; n];
    let mut stack: Vec<usize> = x.iter().chain(y).chain(z).copied().collect();
    while let Some(v) = stack.pop() {
        if !ancestral[v] {
            ancestral[v] = true;
            stack.extend(mo.parents(v).iter().copied());
        }
    }
    let mut adj = vec![Vec::new(); n];
    for v in (0..n).filter(|&v| ancestral[v]) {
        let ps = mo.parents(v);
        for (i, &p) in ps.iter().enumerate() {
            adj[p].push(v);
            adj[v].push(p);
            for &q in &ps[i + 1..] {
                adj[p].push(q);
                adj[q].push(p);
            }
        }
    }
    let mut blocked = vec![false; n];
    for &v in z {
        blocked[v] = true;
    }
    let mut target = vec![false; n];
    for &v in y {
        target[v] = true;
    }
    let mut seen = blocked.clone();
    let mut queue: VecDeque<usize> = VecDeque::new();
    for &v in x {
        if !seen[v] {
            seen[v] = true;
            queue.push_back(v);
        }
    }
    while let Some(v) = queue.pop_front() {
        if target[v] {
            return false;
        }
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                queue.push_back(w);
            }
        }
    }
    true
}

/// One singleton-pair query of the implied independence table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IndependenceRow {
    pub x: Ident,
    pub y: Ident,
    pub given: Vec<Ident>,
    pub separated: bool,
}

/// Default conditioning-set bound for [`implied_independence_table`].
pub const DEFAULT_MAX_CONDITIONING: usize = 1;

/// All queries `x ⟂ y | Z` over vertex pairs `x` before `y` (vertex order)
/// and conditioning sets of size at most `max_conditioning` drawn from the
/// remaining vertices, smallest sets first, lexicographic within a size.
pub fn implied_independence_table(mo: &MarkovDag, max_conditioning: usize) -> Vec<IndependenceRow> {
    let n = mo.len();
    let name = |i: usize| mo.vertices()[i].name.clone();
    let mut rows = Vec::new();
    for x in 0..n {
        for y in x + 1..n {
            let rest: Vec<usize> = (0..n).filter(|&v| v != x && v != y).collect();
            for k in 0..=max_conditioning.min(rest.len()) {
                for_each_subset(&rest, k, &mut |z| {
                    rows.push(IndependenceRow {
                        x: name(x),
                        y: name(y),
                        given: z.iter().map(|&v| name(v)).collect(),
                        separated: d_separated_idx(mo, &[x], &[y], z),
                    });
                });
            }
        }
    }
    rows
}

/// Calls `f` on every `k`-subset of `items` in lexicographic order.
pub fn for_each_subset(items: &[usize], k: usize, f: &mut dyn FnMut(&[usize])) {
    let mut idx: Vec<usize> = (0..k).collect();
    let mut buf = vec![0usize; k];
    if k > items.len() {
        return;
    }
    loop {
        for (b, &i) in buf.iter_mut().zip(&idx) {
            *b = items[i];
        }
        f(&buf);
        // Advance to the next combination.
        let mut pos = k;
        loop {
            if pos == 0 {
                return;
            }
            pos -= 1;
            if idx[pos] != pos + items.len() - k {
                break;
            }
            if pos == 0 {
                return;
            }
        }
        idx[pos] += 1;
        for j in pos + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}
