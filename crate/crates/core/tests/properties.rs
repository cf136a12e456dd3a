mod common;

use std::collections::BTreeSet;

use cmf_core::expr::{BinOp, Expr};
use cmf_core::extension::check_self_regulating;
use cmf_core::matching::{enumerate_perfect_matchings, is_perfect, maximum_matching};
use cmf_core::model::{bipartite_of, Distribution, DynamicalModel, EquationBody, EquationSpec, IncidenceModel, SymbolKind};
use cmf_core::ordering::{causal_ordering_with, markov_from_clusters, orient, ClusterGraph};
use cmf_core::parser::to_cmf;
use cmf_core::{causal_ordering, parse, ModelSet};
use proptest::collection::vec;
use proptest::option;
use proptest::prelude::*;
use rand::Rng;

fn symbol(i: usize, nv: usize, nw: usize) -> String {
    if i < nv {
        format!("X_{i}")
    } else if i < nv + nw {
        format!("U_{}", i - nv)
    } else {
        format!("p_{}", i - nv - nw)
    }
}

fn expr(nv: usize, nw: usize, np: usize) -> impl Strategy<Value = Expr> {
    let n = nv + nw + np;
    // Negative literals print as `-c`, which reads back as a negation.
    let leaf = prop_oneof![
        (0.0f64..1e6).prop_map(Expr::num),
        (0..n).prop_map(move |i| Expr::sym(symbol(i, nv, nw))),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        let op = prop_oneof![
            Just(BinOp::Add),
            Just(BinOp::Sub),
            Just(BinOp::Mul),
            Just(BinOp::Div),
            Just(BinOp::Pow),
        ];
        prop_oneof![
            inner.clone().prop_map(Expr::neg),
            (op, inner.clone(), inner).prop_map(|(op, a, b)| Expr::binary(op, a, b)),
        ]
    })
}

fn law() -> impl Strategy<Value = Option<Distribution>> {
    option::of(prop_oneof![
        (-3.0f64..3.0, 0.01f64..2.0).prop_map(|(mu, sigma)| Distribution::LogNormal { mu, sigma }),
        (0.01f64..5.0, 0.1f64..5.0).prop_map(|(lo, w)| Distribution::Uniform { lo, hi: lo + w }),
    ])
}

fn model() -> impl Strategy<Value = IncidenceModel> {
    (1..5usize, 0..4usize, 0..3usize).prop_flat_map(|(nv, nw, np)| {
        let n = nv + nw + np;
        let body = prop_oneof![
            expr(nv, nw, np).prop_map(EquationBody::Residual),
            vec(0..n, 1..5).prop_map(move |ix| {
                let set: BTreeSet<usize> = ix.into_iter().collect();
                EquationBody::Depends(set.into_iter().map(|i| symbol(i, nv, nw)).collect())
            }),
        ];
        (
            vec(law(), nw),
            vec(option::of(-10.0f64..10.0), np),
            vec(body, 1..6),
            vec(any::<bool>(), nv),
        )
            .prop_map(move |(laws, values, bodies, positive)| {
                let mut b = IncidenceModel::builder("m");
                for i in 0..nv {
                    b = b.variable(symbol(i, nv, nw));
                }
                for (j, l) in laws.into_iter().enumerate() {
                    b = b.exogenous(symbol(nv + j, nv, nw), l);
                }
                for (k, v) in values.into_iter().enumerate() {
                    b = b.parameter(symbol(nv + nw + k, nv, nw), v);
                }
                for (f, body) in bodies.into_iter().enumerate() {
                    b = b.equation(EquationSpec {
                        name: format!("f_{f}"),
                        body,
                    });
                }
                for (i, p) in positive.into_iter().enumerate() {
                    if p {
                        b = b.positive(symbol(i, nv, nw));
                    }
                }
                b.build().unwrap()
            })
    })
}

/// Checks the structural invariants of a cluster graph against its model.
fn check_clusters(model: &IncidenceModel, co: &ClusterGraph) {
    let n = co.vertices().len();
    let mut owner = vec![usize::MAX; n];
    for (c, cl) in co.clusters().iter().enumerate() {
        for &v in &cl.members {
            assert_eq!(owner[v], usize::MAX, "vertex in two clusters");
            owner[v] = c;
            assert_eq!(co.cluster_of(v), c);
        }
        let count = |k: SymbolKind| cl.members.iter().filter(|&&v| co.vertices()[v].kind == k).count();
        let (vars, eqs) = (count(SymbolKind::Variable), count(SymbolKind::Equation));
        if co.is_endogenous(c) {
            assert!(vars >= 1 && vars == eqs);
        } else {
            assert_eq!(cl.members.len(), 1);
        }
    }
    assert!(owner.iter().all(|&c| c != usize::MAX), "clusters cover all vertices");
    assert_eq!(
        n,
        model.variables().len() + model.equations().len() + model.exogenous().len() + model.parameters().len()
    );

    // Every edge z -> C stems from z occurring in an equation of C.
    for &(z, c) in co.edges() {
        assert_ne!(co.cluster_of(z), c);
        let name = &co.vertices()[z].name;
        let feeds = co.clusters()[c].members.iter().any(|&v| {
            let vx = &co.vertices()[v];
            vx.kind == SymbolKind::Equation && {
                let f = model.equations().iter().find(|f| f.name == vx.name).unwrap();
                let names: Vec<&str> = f
                    .variables
                    .iter()
                    .map(|&i| model.variables()[i].as_str())
                    .chain(f.exogenous.iter().map(|&i| model.exogenous()[i].name.as_str()))
                    .chain(f.parameters.iter().map(|&i| model.parameters()[i].name.as_str()))
                    .collect();
                names.contains(&name.as_str())
            }
        });
        assert!(feeds, "edge {name} -> C{c}");
    }

    // The cluster-level graph is acyclic.
    let succ = co.cluster_successors();
    let mut indeg = vec![0usize; succ.len()];
    for s in &succ {
        for &d in s {
            indeg[d] += 1;
        }
    }
    let mut ready: Vec<usize> = (0..succ.len()).filter(|&c| indeg[c] == 0).collect();
    let mut done = 0;
    while let Some(c) = ready.pop() {
        done += 1;
        for &d in &succ[c] {
            indeg[d] -= 1;
            if indeg[d] == 0 {
                ready.push(d);
            }
        }
    }
    assert_eq!(done, succ.len(), "cluster graph has a cycle");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn serialized_models_parse_back(m in model()) {
        let set = ModelSet { models: vec![m], ..ModelSet::default() };
        let text = to_cmf(&set);
        let back = parse(&text);
        prop_assert!(back.is_ok(), "{text}\n{back:?}");
        prop_assert_eq!(back.unwrap(), set, "{}", text);
    }

    #[test]
    fn expressions_print_and_parse_back(e in expr(2, 1, 1)) {
        let text = e.to_string();
        prop_assert_eq!(cmf_core::parser::parse_expr(&text).unwrap(), e, "{}", text);
    }

    #[test]
    fn orientation_follows_the_matching(seed in any::<u64>()) {
        let model = common::random_matchable_model(&mut common::rng(seed), 8);
        let g = bipartite_of(&model);
        let m = maximum_matching(&g);
        let o = orient(&g, &m).unwrap();
        let nv = g.n_variables();
        prop_assert_eq!(o.edges().len(), g.edges().len());
        // Vertices are variables first, then equations.
        for (v, f) in g.edges() {
            let matched = m.equation_of(v) == Some(f);
            let expected = if matched { (nv + f, v) } else { (v, nv + f) };
            prop_assert!(o.edges().contains(&expected));
        }
        for v in 0..nv {
            let incoming = o.edges().iter().filter(|&&(_, b)| b == v).count();
            prop_assert_eq!(incoming, 1);
        }
    }

    #[test]
    fn cluster_and_markov_invariants(seed in any::<u64>()) {
        let model = common::random_matchable_model(&mut common::rng(seed), 8);
        let co = causal_ordering(&model).unwrap();
        check_clusters(&model, &co);
        let mo = markov_from_clusters(&co);
        prop_assert!(mo.is_acyclic());
        // x -> y in the Markov graph iff x -> cl(y) in the cluster graph.
        for (i, v) in mo.vertices().iter().enumerate() {
            for &p in mo.parents(i) {
                prop_assert_eq!(v.kind, SymbolKind::Variable);
                let x = co.vertex_index(&mo.vertices()[p].name).unwrap();
                let y = co.vertex_index(&v.name).unwrap();
                prop_assert!(co.edges().contains(&(x, co.cluster_of(y))));
            }
        }
    }

    #[test]
    fn orientations_differ_only_within_cycles(seed in any::<u64>()) {
        let model = common::random_matchable_model(&mut common::rng(seed), 7);
        let g = bipartite_of(&model);
        let all = enumerate_perfect_matchings(&g, 64).matchings;
        let co = causal_ordering(&model).unwrap();
        let nv = g.n_variables();
        // Oriented-graph index to cluster-graph index.
        let to_co = |i: usize| {
            let name = if i < nv { &g.variables()[i] } else { &g.equations()[i - nv] };
            co.vertex_index(name).unwrap()
        };
        let first: BTreeSet<(usize, usize)> = orient(&g, &all[0]).unwrap().edges().iter().copied().collect();
        for m in &all[1..] {
            let other: BTreeSet<(usize, usize)> = orient(&g, m).unwrap().edges().iter().copied().collect();
            for &(a, b) in first.symmetric_difference(&other) {
                prop_assert_eq!(co.cluster_of(to_co(a)), co.cluster_of(to_co(b)));
            }
            prop_assert_eq!(causal_ordering_with(&model, m).unwrap().labeled(), co.labeled());
        }
    }

    #[test]
    fn self_regulating_dynamics_have_a_perfect_matching(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let n = rng.random_range(1..=8);
        let mut b = DynamicalModel::builder("d");
        for i in 0..n {
            b = b.variable(format!("X_{i}"));
        }
        b = b.exogenous("U", None);
        for i in 0..n {
            let mut syms = vec![format!("X_{i}")];
            syms.extend((0..n).filter(|&j| j != i && rng.random_bool(0.4)).map(|j| format!("X_{j}")));
            if rng.random_bool(0.5) {
                syms.push("U".into());
            }
            b = b.ode(format!("X_{i}"), EquationBody::Depends(syms)).self_regulating(format!("X_{i}"));
        }
        let d = b.build().unwrap();
        let (model, natural) = d.equilibrium().unwrap();
        let g = bipartite_of(&model);
        prop_assert!(is_perfect(&g, &maximum_matching(&g)));
        prop_assert_eq!(natural.len(), n);
        prop_assert!(check_self_regulating(&d, &d).applicable);
    }
}
