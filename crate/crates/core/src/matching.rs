//! Bipartite matchings between variables and equations.
//!
//! Maximum matchings come from Hopcroft–Karp with adjacency visited in
//! declaration order, so results are reproducible. Perfect matchings can be
//! enumerated exhaustively by alternating-cycle splitting, and deficient
//! graphs yield a Hall certificate.

use std::collections::VecDeque;

use serde::Serialize;
use thiserror::Error;

use crate::model::{BipartiteView, Ident};

/// Enumeration cap used when callers have no better bound.
pub const DEFAULT_ENUMERATION_LIMIT: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MatchingError {
    #[error("the graph has a perfect matching, so there is no deficiency witness")]
    PerfectMatchingExists,
    #[error("pair ({variable}, {equation}) is not an edge of the graph")]
    NotAnEdge { variable: usize, equation: usize },
    #[error("vertex used twice in matching")]
    SharedEndpoint,
}

/// A set of (variable, equation) index pairs with no shared endpoints.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Matching {
    var_to_eq: Vec<Option<usize>>,
    eq_to_var: Vec<Option<usize>>,
}

impl Matching {
    pub fn empty(n_variables: usize, n_equations: usize) -> Self {
        Matching {
            var_to_eq: vec![None; n_variables],
            eq_to_var: vec![None; n_equations],
        }
    }

    /// Builds a matching from pairs, checking it against `g`.
    pub fn from_pairs(g: &BipartiteView, pairs: &[(usize, usize)]) -> Result<Self, MatchingError> {
        let mut m = Matching::empty(g.n_variables(), g.n_equations());
        for &(v, f) in pairs {
            if v >= g.n_variables() || f >= g.n_equations() || !g.has_edge(v, f) {
                return Err(MatchingError::NotAnEdge {
                    variable: v,
                    equation: f,
                });
            }
            if m.var_to_eq[v].is_some() || m.eq_to_var[f].is_some() {
                return Err(MatchingError::SharedEndpoint);
            }
            m.var_to_eq[v] = Some(f);
            m.eq_to_var[f] = Some(v);
        }
        Ok(m)
    }

    /// Builds a matching from named pairs on `g`.
    pub fn from_named<S: AsRef<str>>(
        g: &BipartiteView,
        pairs: &[(S, S)],
    ) -> Result<Self, MatchingError> {
        let mut idx = Vec::with_capacity(pairs.len());
        for (v, f) in pairs {
            match (g.variable_index(v.as_ref()), g.equation_index(f.as_ref())) {
                (Some(vi), Some(fi)) => idx.push((vi, fi)),
                _ => {
                    return Err(MatchingError::NotAnEdge {
                        variable: usize::MAX,
                        equation: usize::MAX,
                    })
                }
            }
        }
        Matching::from_pairs(g, &idx)
    }

    pub fn len(&self) -> usize {
        self.var_to_eq.iter().filter(|x| x.is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn equation_of(&self, variable: usize) -> Option<usize> {
        self.var_to_eq[variable]
    }

    pub fn variable_of(&self, equation: usize) -> Option<usize> {
        self.eq_to_var[equation]
    }

    /// Matched pairs sorted by variable index.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.var_to_eq
            .iter()
            .enumerate()
            .filter_map(|(v, f)| f.map(|f| (v, f)))
            .collect()
    }

    pub fn named_pairs(&self, g: &BipartiteView) -> Vec<(Ident, Ident)> {
        self.pairs()
            .into_iter()
            .map(|(v, f)| (g.variables()[v].clone(), g.equations()[f].clone()))
            .collect()
    }

    fn set(&mut self, v: usize, f: usize) {
        self.var_to_eq[v] = Some(f);
        self.eq_to_var[f] = Some(v);
    }
}

/// Maximum-cardinality matching (Hopcroft–Karp).
pub fn maximum_matching(g: &BipartiteView) -> Matching {
    let nv = g.n_variables();
    let nf = g.n_equations();
    let mut m = Matching::empty(nv, nf);
    const INF: usize = usize::MAX;
    let mut dist = vec![INF; nv];
    let mut queue = VecDeque::new();
    loop {
        // BFS layering from free variables.
        queue.clear();
        for v in 0..nv {
            if m.var_to_eq[v].is_none() {
                dist[v] = 0;
                queue.push_back(v);
            } else {
                dist[v] = INF;
            }
        }
        let mut found = false;
        while let Some(v) = queue.pop_front() {
            for &f in g.variable_neighbors(v) {
                match m.eq_to_var[f] {
                    None => found = true,
                    Some(u) if dist[u] == INF => {
                        dist[u] = dist[v] + 1;
                        queue.push_back(u);
                    }
                    Some(_) => {}
                }
            }
        }
        if !found {
            break;
        }
        // Layered DFS, iterative, one augmenting path per free variable.
        let mut next = vec![0usize; nv];
        for root in 0..nv {
            if m.var_to_eq[root].is_some() {
                continue;
            }
            let mut stack = vec![root];
            let mut path_eqs: Vec<usize> = Vec::new();
            while let Some(&v) = stack.last() {
                let adj = g.variable_neighbors(v);
                if next[v] == adj.len() {
                    dist[v] = INF;
                    stack.pop();
                    path_eqs.pop();
                    continue;
                }
                let f = adj[next[v]];
                next[v] += 1;
                match m.eq_to_var[f] {
                    None => {
                        path_eqs.push(f);
                        for (&u, &e) in stack.iter().zip(&path_eqs) {
                            m.set(u, e);
                        }
                        break;
                    }
                    Some(u) if dist[u] == dist[v] + 1 => {
                        path_eqs.push(f);
                        stack.push(u);
                    }
                    Some(_) => {}
                }
            }
        }
    }
    m
}

/// True iff `m` covers every variable and every equation of `g`.
pub fn is_perfect(g: &BipartiteView, m: &Matching) -> bool {
    g.n_variables() == g.n_equations() && m.len() == g.n_variables()
}

/// Perfect matchings of `g`, sorted, with a flag set when `limit` cut the
/// enumeration short.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Enumeration {
    pub matchings: Vec<Matching>,
    pub truncated: bool,
}

/// Enumerates perfect matchings by splitting on alternating cycles: given a
/// perfect matching M and a matched edge e on an M-alternating cycle, the
/// perfect matchings either contain e (recurse with e forced, starting from M)
/// or avoid it (recurse without e, starting from M shifted along the cycle).
pub fn enumerate_perfect_matchings(g: &BipartiteView, limit: usize) -> Enumeration {
    let limit = limit.max(1);
    let start = maximum_matching(g);
    if !is_perfect(g, &start) {
        return Enumeration {
            matchings: Vec::new(),
            truncated: false,
        };
    }
    let nv = g.n_variables();
    let mut state = SplitState {
        g,
        allowed: (0..nv)
            .map(|v| g.variable_neighbors(v).to_vec())
            .collect(),
        out: Vec::new(),
        limit,
        truncated: false,
    };
    state.split(start, vec![false; nv]);
    let mut matchings = state.out;
    matchings.sort();
    Enumeration {
        matchings,
        truncated: state.truncated,
    }
}

struct SplitState<'a> {
    g: &'a BipartiteView,
    allowed: Vec<Vec<usize>>,
    out: Vec<Matching>,
    limit: usize,
    truncated: bool,
}

impl SplitState<'_> {
    fn split(&mut self, m: Matching, fixed: Vec<bool>) {
        if self.out.len() >= self.limit {
            self.truncated = true;
            return;
        }
        let nv = self.g.n_variables();
        let cycle = (0..nv)
            .filter(|&v| !fixed[v])
            .find_map(|v| self.alternating_cycle(&m, v).map(|c| (v, c)));
        let Some((v, cycle)) = cycle else {
            self.out.push(m);
            return;
        };
        let f = m.equation_of(v).expect("perfect matching");

        // Branch 1: keep (v, f); every other edge at v or f becomes unusable.
        let saved = self.allowed.clone();
        for u in 0..nv {
            if u == v {
                self.allowed[u] = vec![f];
            } else {
                self.allowed[u].retain(|&e| e != f);
            }
        }
        let mut fixed_with = fixed.clone();
        fixed_with[v] = true;
        self.split(m.clone(), fixed_with);
        self.allowed = saved;

        // Branch 2: drop (v, f) and continue from the shifted matching.
        self.allowed[v].retain(|&e| e != f);
        let mut shifted = m;
        for &(u, e) in &cycle {
            shifted.set(u, e);
        }
        self.split(shifted, fixed);
        self.allowed[v].push(f);
        self.allowed[v].sort_unstable();
    }

    /// Finds an alternating cycle through the matched edge at `v0`: a path
    /// v0 -> f' -> M(f') -> ... -> M(v0) over unmatched allowed edges.
    /// Returns the new (variable, equation) assignment along the cycle.
    fn alternating_cycle(&self, m: &Matching, v0: usize) -> Option<Vec<(usize, usize)>> {
        let target = m.equation_of(v0)?;
        let nv = self.g.n_variables();
        // parent[u] = (previous variable, equation used) for BFS over variables.
        let mut parent: Vec<Option<(usize, usize)>> = vec![None; nv];
        let mut seen = vec![false; nv];
        seen[v0] = true;
        let mut queue = VecDeque::from([v0]);
        while let Some(u) = queue.pop_front() {
            for &e in &self.allowed[u] {
                if Some(e) == m.equation_of(u) {
                    continue;
                }
                if e == target {
                    let mut assign = vec![(u, e)];
                    let mut cur = u;
                    while cur != v0 {
                        let (prev, via) = parent[cur].expect("bfs parent");
                        assign.push((prev, via));
                        cur = prev;
                    }
                    return Some(assign);
                }
                let w = m.variable_of(e).expect("perfect matching");
                if !seen[w] {
                    seen[w] = true;
                    parent[w] = Some((u, e));
                    queue.push_back(w);
                }
            }
        }
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Equations,
    Variables,
}

/// Hall-condition certificate: `members` on one side whose neighbourhood
/// (`neighbors`, other side) is strictly smaller.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeficiencyWitness {
    pub side: Side,
    pub members: Vec<usize>,
    pub neighbors: Vec<usize>,
}

impl DeficiencyWitness {
    pub fn member_names(&self, g: &BipartiteView) -> Vec<Ident> {
        let names = match self.side {
            Side::Equations => g.equations(),
            Side::Variables => g.variables(),
        };
        self.members.iter().map(|&i| names[i].clone()).collect()
    }

    pub fn neighbor_names(&self, g: &BipartiteView) -> Vec<Ident> {
        let names = match self.side {
            Side::Equations => g.variables(),
            Side::Variables => g.equations(),
        };
        self.neighbors.iter().map(|&i| names[i].clone()).collect()
    }
}

/// Returns a set of equations with fewer neighbouring variables than
/// members. When every equation can be matched but variables are left over,
/// the certificate is on the variable side instead.
pub fn deficiency_witness(g: &BipartiteView) -> Result<DeficiencyWitness, MatchingError> {
    let m = maximum_matching(g);
    if is_perfect(g, &m) {
        return Err(MatchingError::PerfectMatchingExists);
    }
    if let Some(f0) = (0..g.n_equations()).find(|&f| m.variable_of(f).is_none()) {
        let (members, neighbors) = alternating_reach(
            f0,
            g.n_equations(),
            g.n_variables(),
            |f| g.equation_neighbors(f),
            |v| m.equation_of(v),
        );
        return Ok(DeficiencyWitness {
            side: Side::Equations,
            members,
            neighbors,
        });
    }
    let v0 = (0..g.n_variables())
        .find(|&v| m.equation_of(v).is_none())
        .expect("non-perfect matching leaves a vertex free");
    let (members, neighbors) = alternating_reach(
        v0,
        g.n_variables(),
        g.n_equations(),
        |v| g.variable_neighbors(v),
        |f| m.variable_of(f),
    );
    Ok(DeficiencyWitness {
        side: Side::Variables,
        members,
        neighbors,
    })
}

/// Vertices reachable from a free vertex by alternating paths, split by side.
fn alternating_reach<'a>(
    start: usize,
    n_same: usize,
    n_other: usize,
    adj: impl Fn(usize) -> &'a [usize],
    mate: impl Fn(usize) -> Option<usize>,
) -> (Vec<usize>, Vec<usize>) {
    let mut same = vec![false; n_same];
    let mut other = vec![false; n_other];
    same[start] = true;
    let mut queue = VecDeque::from([start]);
    while let Some(x) = queue.pop_front() {
        for &y in adj(x) {
            if other[y] {
                continue;
            }
            other[y] = true;
            // The matching is maximum, so every reached vertex is matched.
            if let Some(z) = mate(y) {
                if !same[z] {
                    same[z] = true;
                    queue.push_back(z);
                }
            }
        }
    }
    let collect = |flags: Vec<bool>| {
        flags
            .into_iter()
            .enumerate()
            .filter_map(|(i, b)| b.then_some(i))
            .collect()
    };
    (collect(same), collect(other))
}
