//! Independent oracles shared by the integration tests. None of these call
//! into the algorithms they check.

#![allow(dead_code)]

use cmf_core::model::{BipartiteView, EquationSpec, IncidenceModel, SymbolKind};
use cmf_core::ordering::{MarkovDag, Vertex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Size of a maximum matching by exhaustive search over the equations.
pub fn brute_force_matching(n_vars: usize, adj: &[Vec<usize>]) -> usize {
    fn go(f: usize, adj: &[Vec<usize>], used: &mut Vec<bool>) -> usize {
        if f == adj.len() {
            return 0;
        }
        let mut best = go(f + 1, adj, used);
        for &v in &adj[f] {
            if !used[v] {
                used[v] = true;
                best = best.max(1 + go(f + 1, adj, used));
                used[v] = false;
            }
        }
        best
    }
    go(0, adj, &mut vec![false; n_vars])
}

/// Random bipartite graph as equation adjacency lists.
pub fn random_bipartite(rng: &mut ChaCha8Rng, max_side: usize, density: f64) -> (usize, Vec<Vec<usize>>) {
    let nv = rng.random_range(0..=max_side);
    let nf = rng.random_range(0..=max_side);
    let adj = (0..nf)
        .map(|_| (0..nv).filter(|_| rng.random_bool(density)).collect())
        .collect();
    (nv, adj)
}

pub fn view(nv: usize, adj: &[Vec<usize>]) -> BipartiteView {
    let edges: Vec<(usize, usize)> = adj
        .iter()
        .enumerate()
        .flat_map(|(f, vs)| vs.iter().map(move |&v| (v, f)))
        .collect();
    BipartiteView::new(
        (0..nv).map(|i| format!("X_{i}")).collect(),
        (0..adj.len()).map(|i| format!("f_{i}")).collect(),
        &edges,
    )
}

/// Square structure-only model with a planted perfect matching, random
/// extra incidences and a few exogenous inputs.
pub fn random_matchable_model(rng: &mut ChaCha8Rng, max_n: usize) -> IncidenceModel {
    let n = rng.random_range(1..=max_n);
    let mut planted: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        planted.swap(i, rng.random_range(0..=i));
    }
    let n_exo = rng.random_range(0..=3);
    let density = rng.random_range(0.1..0.6);
    let mut b = IncidenceModel::builder("random");
    for i in 0..n {
        b = b.variable(format!("X_{i}"));
    }
    for j in 0..n_exo {
        b = b.exogenous(format!("U_{j}"), None);
    }
    for (f, &pv) in planted.iter().enumerate() {
        let mut syms = vec![format!("X_{pv}")];
        syms.extend((0..n).filter(|&v| v != pv && rng.random_bool(density)).map(|v| format!("X_{v}")));
        syms.extend((0..n_exo).filter(|_| rng.random_bool(0.3)).map(|j| format!("U_{j}")));
        b = b.equation(EquationSpec::depends(format!("f_{f}"), syms));
    }
    b.build().expect("random model is well formed")
}

/// Random DAG on `n` vertices, edges only from lower to higher index.
pub fn random_dag(rng: &mut ChaCha8Rng, n: usize, density: f64) -> MarkovDag {
    let vertices = (0..n)
        .map(|i| Vertex {
            name: format!("V{i}"),
            kind: SymbolKind::Variable,
        })
        .collect();
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.random_bool(density) {
                edges.push((a, b));
            }
        }
    }
    MarkovDag::new(vertices, edges)
}

/// d-separation by enumerating every simple path between `x` and `y` in the
/// skeleton and testing each for being active given `z`.
pub fn dsep_by_paths(dag: &MarkovDag, x: usize, y: usize, z: &[usize]) -> bool {
    let n = dag.len();
    let mut in_z = vec![false; n];
    for &v in z {
        in_z[v] = true;
    }
    // A vertex "has a descendant in z" if it or any descendant is in z.
    let mut desc_in_z = vec![false; n];
    for v in 0..n {
        let mut stack = vec![v];
        let mut seen = vec![false; n];
        while let Some(u) = stack.pop() {
            if seen[u] {
                continue;
            }
            seen[u] = true;
            if in_z[u] {
                desc_in_z[v] = true;
                break;
            }
            stack.extend(dag.children(u).iter().copied());
        }
    }
    let has_edge = |a: usize, b: usize| dag.children(a).contains(&b);
    let mut path = vec![x];
    let mut on_path = vec![false; n];
    on_path[x] = true;

    fn extend(
        path: &mut Vec<usize>,
        on_path: &mut Vec<bool>,
        y: usize,
        n: usize,
        active: &dyn Fn(&[usize]) -> bool,
        adjacent: &dyn Fn(usize, usize) -> bool,
    ) -> bool {
        let last = *path.last().unwrap();
        if last == y {
            return active(path);
        }
        for next in 0..n {
            if !on_path[next] && adjacent(last, next) {
                path.push(next);
                on_path[next] = true;
                let found = extend(path, on_path, y, n, active, adjacent);
                on_path[next] = false;
                path.pop();
                if found {
                    return true;
                }
            }
        }
        false
    }

    let active = |p: &[usize]| {
        p.windows(3).all(|w| {
            let (a, b, c) = (w[0], w[1], w[2]);
            let collider = has_edge(a, b) && has_edge(c, b);
            if collider {
                desc_in_z[b]
            } else {
                !in_z[b]
            }
        })
    };
    let adjacent = |a: usize, b: usize| has_edge(a, b) || has_edge(b, a);
    !extend(&mut path, &mut on_path, y, n, &active, &adjacent)
}

/// Equilibrium of the basic viral model in closed form: `(X_T, X_I)`.
pub fn viral_basic_closed_form(u_sigma: f64, u_f: f64, u_delta: f64, d_t: f64, beta: f64) -> (f64, f64) {
    let x_t = u_delta / (u_f * beta);
    let x_i = (u_sigma - d_t * x_t) / (beta * x_t);
    (x_t, x_i)
}

/// Equilibrium of the two-equation linear model: `(X_1, X_2)`.
pub fn intro_closed_form(u_1: f64, u_2: f64, p_1: f64, p_2: f64) -> (f64, f64) {
    let x_1 = u_1 / p_1;
    (x_1, -(x_1 + u_2) / p_2)
}

pub fn param(model: &IncidenceModel, name: &str) -> f64 {
    model
        .parameters()
        .iter()
        .find(|p| p.name == name)
        .and_then(|p| p.value)
        .unwrap_or_else(|| panic!("parameter {name} has a value"))
}

pub fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(f64::MIN_POSITIVE)
}
