//! Causal ordering and Markov ordering graphs.
//!
//! Vertex indices in [`OrientedGraph`] and [`ClusterGraph`] follow one
//! convention: variables first, then equations, then exogenous variables,
//! then parameters, each in declaration order.

use std::collections::{BTreeSet, BinaryHeap};
use std::cmp::Reverse;

use serde::Serialize;
use thiserror::Error;

use crate::matching::{deficiency_witness, is_perfect, maximum_matching, Matching};
use crate::model::{bipartite_of, BipartiteView, Ident, IncidenceModel, SymbolKind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OrderingError {
    #[error("no perfect matching; these vertices violate Hall's condition: {}", witness.join(", "))]
    NoPerfectMatching { witness: Vec<Ident> },
    #[error("matching is not perfect on this graph")]
    NotPerfect,
}

/// Kind of a vertex in ordering graphs.
pub type VertexKind = SymbolKind;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Vertex {
    pub name: Ident,
    pub kind: VertexKind,
}

/// Bipartite graph oriented by a perfect matching: `f -> v` for matched
/// pairs, `v -> f` for every other incidence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrientedGraph {
    vertices: Vec<Vertex>,
    n_variables: usize,
    edges: Vec<(usize, usize)>,
}

impl OrientedGraph {
    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    /// Directed edges, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn named_edges(&self) -> Vec<(Ident, Ident)> {
        self.edges
            .iter()
            .map(|&(a, b)| (self.vertices[a].name.clone(), self.vertices[b].name.clone()))
            .collect()
    }

    pub fn n_variables(&self) -> usize {
        self.n_variables
    }

    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.vertices.len()];
        for &(a, b) in &self.edges {
            adj[a].push(b);
        }
        adj
    }
}

/// Orients `g` by the perfect matching `m`.
pub fn orient(g: &BipartiteView, m: &Matching) -> Result<OrientedGraph, OrderingError> {
    if !is_perfect(g, m) {
        return Err(OrderingError::NotPerfect);
    }
    let nv = g.n_variables();
    let mut vertices: Vec<Vertex> = g
        .variables()
        .iter()
        .map(|v| Vertex {
            name: v.clone(),
            kind: SymbolKind::Variable,
        })
        .collect();
    vertices.extend(g.equations().iter().map(|f| Vertex {
        name: f.clone(),
        kind: SymbolKind::Equation,
    }));
    let mut edges: Vec<(usize, usize)> = g
        .edges()
        .into_iter()
        .map(|(v, f)| {
            if m.equation_of(v) == Some(f) {
                (nv + f, v)
            } else {
                (v, nv + f)
            }
        })
        .collect();
    edges.sort_unstable();
    Ok(OrientedGraph {
        vertices,
        n_variables: nv,
        edges,
    })
}

/// Strongly connected components (iterative Tarjan). Returns a component id
/// per vertex; ids are assigned in reverse topological order of the
/// condensation, as Tarjan produces them.
pub fn tarjan_scc(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    const UNSEEN: usize = usize::MAX;
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut comp = vec![UNSEEN; n];
    let mut stack = Vec::new();
    let mut call: Vec<(usize, usize)> = Vec::new();
    let mut counter = 0;
    let mut n_comp = 0;
    for root in 0..n {
        if index[root] != UNSEEN {
            continue;
        }
        call.push((root, 0));
        index[root] = counter;
        low[root] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&mut (v, ref mut next)) = call.last_mut() {
            if *next < adj[v].len() {
                let w = adj[v][*next];
                *next += 1;
                if index[w] == UNSEEN {
                    index[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                loop {
                    let w = stack.pop().expect("tarjan stack");
                    on_stack[w] = false;
                    comp[w] = n_comp;
                    if w == v {
                        break;
                    }
                }
                n_comp += 1;
            }
        }
    }
    comp
}

/// A cluster: sorted vertex indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cluster {
    pub members: Vec<usize>,
}

/// Directed cluster graph: a partition of all vertices into clusters plus
/// edges `z -> C` from vertices to clusters not containing them.
///
/// Clusters are numbered in a topological order: exogenous singletons,
/// parameter singletons, then endogenous clusters in Kahn order with ties
/// broken by smallest member index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterGraph {
    vertices: Vec<Vertex>,
    clusters: Vec<Cluster>,
    cluster_of: Vec<usize>,
    edges: Vec<(usize, usize)>,
}

impl ClusterGraph {
    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    /// `(vertex, cluster)` edges, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn cluster_of(&self, vertex: usize) -> usize {
        self.cluster_of[vertex]
    }

    pub fn cluster_name(&self, cluster: usize) -> String {
        format!("C{cluster}")
    }

    pub fn vertex_index(&self, name: &str) -> Option<usize> {
        self.vertices.iter().position(|v| v.name == name)
    }

    pub fn member_names(&self, cluster: usize) -> Vec<Ident> {
        self.clusters[cluster]
            .members
            .iter()
            .map(|&i| self.vertices[i].name.clone())
            .collect()
    }

    /// Clusters containing at least one equation.
    pub fn is_endogenous(&self, cluster: usize) -> bool {
        self.clusters[cluster]
            .members
            .iter()
            .any(|&i| self.vertices[i].kind == SymbolKind::Equation)
    }

    /// Cluster-level successors: `C -> C'` whenever some member of `C` has an
    /// edge into `C'`.
    pub fn cluster_successors(&self) -> Vec<BTreeSet<usize>> {
        let mut succ = vec![BTreeSet::new(); self.clusters.len()];
        for &(z, c) in &self.edges {
            succ[self.cluster_of[z]].insert(c);
        }
        succ
    }

    /// Edges as sorted name sets, for comparisons that ignore numbering.
    pub fn labeled(&self) -> LabeledClusterGraph {
        let clusters = self
            .clusters
            .iter()
            .map(|c| c.members.iter().map(|&i| self.vertices[i].name.clone()).collect())
            .collect();
        let edges = self
            .edges
            .iter()
            .map(|&(z, c)| {
                (
                    self.vertices[z].name.clone(),
                    self.clusters[c]
                        .members
                        .iter()
                        .map(|&i| self.vertices[i].name.clone())
                        .collect(),
                )
            })
            .collect();
        LabeledClusterGraph { clusters, edges }
    }
}

/// Cluster graph keyed by names only.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledClusterGraph {
    pub clusters: BTreeSet<BTreeSet<Ident>>,
    pub edges: BTreeSet<(Ident, BTreeSet<Ident>)>,
}

/// Runs the causal ordering algorithm with a maximum matching found
/// internally.
pub fn causal_ordering(model: &IncidenceModel) -> Result<ClusterGraph, OrderingError> {
    let g = bipartite_of(model);
    let m = maximum_matching(&g);
    if !is_perfect(&g, &m) {
        let w = deficiency_witness(&g).expect("matching is not perfect");
        return Err(OrderingError::NoPerfectMatching {
            witness: w.member_names(&g),
        });
    }
    causal_ordering_with(model, &m)
}

/// Runs the causal ordering algorithm with the given perfect matching of the
/// model's bipartite graph.
pub fn causal_ordering_with(
    model: &IncidenceModel,
    m: &Matching,
) -> Result<ClusterGraph, OrderingError> {
    let g = bipartite_of(model);
    let oriented = orient(&g, m)?;
    let nv = g.n_variables();
    let nf = g.n_equations();
    let nw = model.exogenous().len();
    let np = model.parameters().len();
    let n_endo = nv + nf;

    // Clusters are SCCs merged with their matched partners. Non-trivial SCCs
    // are closed under the matching already, so this only pairs up singleton
    // variables with their singleton equations.
    let comp = tarjan_scc(&oriented.adjacency());
    let mut link: Vec<usize> = (0..n_endo).collect();
    fn find(link: &mut [usize], mut x: usize) -> usize {
        while link[x] != x {
            link[x] = link[link[x]];
            x = link[x];
        }
        x
    }
    for v in 0..nv {
        let f = m.equation_of(v).expect("perfect matching") + nv;
        let (a, b) = (find(&mut link, comp[v]), find(&mut link, comp[f]));
        if a != b {
            link[b] = a;
        }
    }
    let root: Vec<usize> = (0..n_endo).map(|i| find(&mut link, comp[i])).collect();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut group_of_root = std::collections::HashMap::new();
    for (i, &r) in root.iter().enumerate() {
        let gid = *group_of_root.entry(r).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[gid].push(i);
    }
    let mut endo_cluster = vec![0usize; n_endo];
    for (gid, members) in groups.iter().enumerate() {
        for &i in members {
            endo_cluster[i] = gid;
        }
    }

    // Edges between endogenous groups.
    let mut group_edges: BTreeSet<(usize, usize)> = BTreeSet::new();
    for (v, f) in g.edges() {
        let (cv, cf) = (endo_cluster[v], endo_cluster[nv + f]);
        if cv != cf {
            group_edges.insert((v, cf));
        }
    }

    // Topological order of endogenous groups (Kahn, smallest member first).
    let ng = groups.len();
    let mut indeg = vec![0usize; ng];
    let mut succ: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); ng];
    for &(v, c) in &group_edges {
        if succ[endo_cluster[v]].insert(c) {
            indeg[c] += 1;
        }
    }
    let mut heap: BinaryHeap<Reverse<(usize, usize)>> = (0..ng)
        .filter(|&c| indeg[c] == 0)
        .map(|c| Reverse((groups[c][0], c)))
        .collect();
    let mut order = Vec::with_capacity(ng);
    while let Some(Reverse((_, c))) = heap.pop() {
        order.push(c);
        for &d in &succ[c] {
            indeg[d] -= 1;
            if indeg[d] == 0 {
                heap.push(Reverse((groups[d][0], d)));
            }
        }
    }
    debug_assert_eq!(order.len(), ng, "cluster graph must be acyclic");

    let mut vertices = oriented.vertices.clone();
    vertices.extend(model.exogenous().iter().map(|w| Vertex {
        name: w.name.clone(),
        kind: SymbolKind::Exogenous,
    }));
    vertices.extend(model.parameters().iter().map(|p| Vertex {
        name: p.name.clone(),
        kind: SymbolKind::Parameter,
    }));

    let mut clusters = Vec::with_capacity(nw + np + ng);
    let mut cluster_of = vec![0usize; n_endo + nw + np];
    for i in n_endo..n_endo + nw + np {
        cluster_of[i] = clusters.len();
        clusters.push(Cluster { members: vec![i] });
    }
    let mut renumber = vec![0usize; ng];
    for &c in &order {
        renumber[c] = clusters.len();
        for &i in &groups[c] {
            cluster_of[i] = clusters.len();
        }
        clusters.push(Cluster {
            members: groups[c].clone(),
        });
    }

    let mut edges: BTreeSet<(usize, usize)> = group_edges
        .into_iter()
        .map(|(v, c)| (v, renumber[c]))
        .collect();
    for (fi, f) in model.equations().iter().enumerate() {
        let target = cluster_of[nv + fi];
        for &w in &f.exogenous {
            edges.insert((n_endo + w, target));
        }
        for &p in &f.parameters {
            edges.insert((n_endo + nw + p, target));
        }
    }

    Ok(ClusterGraph {
        vertices,
        clusters,
        cluster_of,
        edges: edges.into_iter().collect(),
    })
}

/// DAG over endogenous and exogenous variables with `x -> y` whenever the
/// cluster graph has `x -> cl(y)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarkovDag {
    vertices: Vec<Vertex>,
    edges: Vec<(usize, usize)>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
}

impl MarkovDag {
    /// Builds a DAG from raw parts. Panics if an edge is out of range.
    pub fn new(vertices: Vec<Vertex>, edges: Vec<(usize, usize)>) -> Self {
        let n = vertices.len();
        let mut edges = edges;
        edges.sort_unstable();
        edges.dedup();
        let mut parents = vec![Vec::new(); n];
        let mut children = vec![Vec::new(); n];
        for &(a, b) in &edges {
            assert!(a < n && b < n, "edge out of range");
            children[a].push(b);
            parents[b].push(a);
        }
        MarkovDag {
            vertices,
            edges,
            parents,
            children,
        }
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn named_edges(&self) -> Vec<(Ident, Ident)> {
        self.edges
            .iter()
            .map(|&(a, b)| (self.vertices[a].name.clone(), self.vertices[b].name.clone()))
            .collect()
    }

    pub fn parents(&self, v: usize) -> &[usize] {
        &self.parents[v]
    }

    pub fn children(&self, v: usize) -> &[usize] {
        &self.children[v]
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertex_index(&self, name: &str) -> Option<usize> {
        self.vertices.iter().position(|v| v.name == name)
    }

    pub fn is_acyclic(&self) -> bool {
        let comp = tarjan_scc(&self.children);
        let mut seen = BTreeSet::new();
        comp.iter().all(|c| seen.insert(*c)) && self.edges.iter().all(|(a, b)| a != b)
    }
}

/// Markov ordering graph from the cluster graph.
pub fn markov_from_clusters(co: &ClusterGraph) -> MarkovDag {
    let keep: Vec<usize> = (0..co.vertices.len())
        .filter(|&i| {
            matches!(
                co.vertices[i].kind,
                SymbolKind::Variable | SymbolKind::Exogenous
            )
        })
        .collect();
    let mut new_index = vec![usize::MAX; co.vertices.len()];
    for (k, &i) in keep.iter().enumerate() {
        new_index[i] = k;
    }
    let vertices = keep.iter().map(|&i| co.vertices[i].clone()).collect();
    let mut edges = Vec::new();
    for &(x, c) in &co.edges {
        if new_index[x] == usize::MAX {
            continue;
        }
        for &y in &co.clusters[c].members {
            if co.vertices[y].kind == SymbolKind::Variable {
                edges.push((new_index[x], new_index[y]));
            }
        }
    }
    MarkovDag::new(vertices, edges)
}

pub fn markov_ordering(model: &IncidenceModel) -> Result<MarkovDag, OrderingError> {
    causal_ordering(model).map(|co| markov_from_clusters(&co))
}
