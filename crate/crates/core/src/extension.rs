//! Robustness of causal predictions under model extensions.
//!
//! The checkers are one-directional: a failed condition means "no
//! guarantee", never "prediction violated", because the underlying results
//! are sufficient conditions only.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::matching::{deficiency_witness, is_perfect, maximum_matching, Side};
use crate::model::{
    bipartite_of, equilibrium_of, extension_bipartite, merged_model, BipartiteView,
    DynamicalModel, ExtensionSpec, Ident, ModelError,
};
use crate::ordering::{orient, tarjan_scc, ClusterGraph, MarkovDag};
use crate::query::{
    cluster_reachable_idx, d_separated_idx, for_each_subset, resolve_vertex, QueryError,
};

/// Default cap on enumerated cycles.
pub const DEFAULT_MAX_CYCLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    PresencePreservation,
    AbsencePreservation,
    SelfRegulation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Guarantee {
    /// Ancestral relations of the base cluster graph survive.
    PresenceAncestral,
    /// d-connections of the base Markov ordering graph survive.
    PresenceDconn,
    /// Absent ancestral relations stay absent.
    AbsenceAncestral,
    /// d-separations of the base Markov ordering graph survive.
    AbsenceDconn,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Certificate {
    Matching { pairs: Vec<(Ident, Ident)> },
    HallWitness { side: Side, members: Vec<Ident>, neighbors: Vec<Ident> },
    Adjacency { pairs: Vec<(Ident, Ident)> },
    NotSelfRegulating { variables: Vec<Ident> },
    MissingVariables { variables: Vec<Ident> },
    None,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Condition {
    pub name: String,
    pub holds: bool,
    pub certificate: Certificate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RobustnessVerdict {
    pub check: Check,
    pub applicable: bool,
    pub conditions: Vec<Condition>,
    pub guarantees: Vec<Guarantee>,
    /// Perfect matching of the extended graph (base matching plus extension
    /// matching) when the matching conditions hold.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extended_matching: Option<Vec<(Ident, Ident)>>,
}

impl RobustnessVerdict {
    fn new(check: Check, conditions: Vec<Condition>, granted: &[Guarantee]) -> Self {
        let applicable = conditions.iter().all(|c| c.holds);
        RobustnessVerdict {
            check,
            applicable,
            conditions,
            guarantees: if applicable { granted.to_vec() } else { Vec::new() },
            extended_matching: None,
        }
    }

    pub fn condition(&self, name: &str) -> Option<&Condition> {
        self.conditions.iter().find(|c| c.name == name)
    }
}

fn matching_condition(name: &str, g: &BipartiteView) -> (Condition, Option<Vec<(Ident, Ident)>>) {
    let m = maximum_matching(g);
    if is_perfect(g, &m) {
        let pairs = m.named_pairs(g);
        (
            Condition {
                name: name.into(),
                holds: true,
                certificate: Certificate::Matching {
                    pairs: pairs.clone(),
                },
            },
            Some(pairs),
        )
    } else {
        let w = deficiency_witness(g).expect("not perfect");
        (
            Condition {
                name: name.into(),
                holds: false,
                certificate: Certificate::HallWitness {
                    side: w.side,
                    members: w.member_names(g),
                    neighbors: w.neighbor_names(g),
                },
            },
            None,
        )
    }
}

fn matching_conditions(ext: &ExtensionSpec) -> (Vec<Condition>, Option<Vec<(Ident, Ident)>>) {
    let (base, m) = matching_condition("base_perfect_matching", &bipartite_of(ext.base()));
    let (plus, m_plus) = matching_condition("extension_perfect_matching", &extension_bipartite(ext));
    let union = match (m, m_plus) {
        (Some(mut a), Some(b)) => {
            a.extend(b);
            a.sort();
            Some(a)
        }
        _ => None,
    };
    (vec![base, plus], union)
}

/// Checks whether the base graph and the extension graph both have perfect
/// matchings. If so, ancestral relations and d-connections of the base
/// model are preserved, and the union of the two matchings is a perfect
/// matching of the extended graph.
pub fn check_presence_preservation(ext: &ExtensionSpec) -> RobustnessVerdict {
    let (conditions, union) = matching_conditions(ext);
    let mut v = RobustnessVerdict::new(
        Check::PresencePreservation,
        conditions,
        &[Guarantee::PresenceAncestral, Guarantee::PresenceDconn],
    );
    if v.applicable {
        v.extended_matching = union;
    }
    v
}

/// Presence conditions plus: no added variable occurs in a base equation.
/// Promoted symbols count, since they occur in base equations by definition.
pub fn check_absence_preservation(ext: &ExtensionSpec) -> RobustnessVerdict {
    let (mut conditions, union) = matching_conditions(ext);
    let added: BTreeSet<&str> = ext.added_variables().iter().map(String::as_str).collect();
    let base_eqs: BTreeSet<&str> = ext.base().equations().iter().map(|f| f.name.as_str()).collect();
    let pairs: Vec<(Ident, Ident)> = match merged_model(ext) {
        Ok(merged) => merged
            .var_edges()
            .into_iter()
            .filter(|(v, f)| added.contains(v) && base_eqs.contains(f))
            .map(|(v, f)| (v.to_string(), f.to_string()))
            .collect(),
        // ExtensionSpec construction already validated the merge.
        Err(_) => unreachable!("validated extension"),
    };
    conditions.push(Condition {
        name: "no_added_variable_in_base_equations".into(),
        holds: pairs.is_empty(),
        certificate: if pairs.is_empty() {
            Certificate::None
        } else {
            Certificate::Adjacency { pairs }
        },
    });
    let mut v = RobustnessVerdict::new(
        Check::AbsencePreservation,
        conditions,
        &[Guarantee::AbsenceAncestral, Guarantee::AbsenceDconn],
    );
    if v.applicable {
        v.extended_matching = union;
    }
    v
}

fn selfreg_condition(name: &str, dynamics: &DynamicalModel) -> Condition {
    let missing: Vec<Ident> = dynamics
        .variables()
        .iter()
        .enumerate()
        .filter(|(i, _)| !dynamics.is_self_regulating(*i))
        .map(|(_, v)| v.clone())
        .collect();
    if !missing.is_empty() {
        return Condition {
            name: name.into(),
            holds: false,
            certificate: Certificate::NotSelfRegulating { variables: missing },
        };
    }
    // Every variable occurs in its own equation, so the natural labelling is
    // a perfect matching of the equilibrium graph.
    let (_, natural) = equilibrium_of(dynamics, &BTreeMap::new())
        .expect("dynamics without positivity reduction always has an equilibrium model");
    debug_assert_eq!(natural.len(), dynamics.variables().len());
    Condition {
        name: name.into(),
        holds: true,
        certificate: Certificate::Matching { pairs: natural },
    }
}

/// If all variables of the base and extended dynamics are self-regulating,
/// presence of ancestral relations and d-connections is guaranteed.
pub fn check_self_regulating(base: &DynamicalModel, extended: &DynamicalModel) -> RobustnessVerdict {
    let missing: Vec<Ident> = base
        .variables()
        .iter()
        .filter(|v| !extended.variables().contains(v))
        .cloned()
        .collect();
    let contained = Condition {
        name: "extension_contains_base_variables".into(),
        holds: missing.is_empty(),
        certificate: if missing.is_empty() {
            Certificate::None
        } else {
            Certificate::MissingVariables { variables: missing }
        },
    };
    RobustnessVerdict::new(
        Check::SelfRegulation,
        vec![
            contained,
            selfreg_condition("base_self_regulating", base),
            selfreg_condition("extension_self_regulating", extended),
        ],
        &[Guarantee::PresenceAncestral, Guarantee::PresenceDconn],
    )
}

/// A directed cycle of the naturally matched, oriented equilibrium graph,
/// listed from its smallest vertex.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FeedbackCycle {
    pub vertices: Vec<Ident>,
    pub base_variables: Vec<Ident>,
    pub other_variables: Vec<Ident>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FeedbackReport {
    /// Cycles through both base and non-base variables.
    pub cycles: Vec<FeedbackCycle>,
    /// Number of cycles enumerated before filtering.
    pub examined: usize,
    pub truncated: bool,
}

/// Detects feedback loops of the extended dynamics that involve variables
/// both inside and outside `base_vars`.
///
/// The equilibrium graph is augmented with every natural pair `(X_i, f_i)`
/// and oriented by that natural matching; simple cycles are enumerated with
/// Johnson's algorithm up to `max_cycles`.
pub fn detect_new_feedback(
    extended: &DynamicalModel,
    base_vars: &[&str],
    max_cycles: usize,
) -> Result<FeedbackReport, ModelError> {
    let (model, _) = extended.equilibrium()?;
    let mut base = vec![false; model.variables().len()];
    for name in base_vars {
        let i = model
            .variables()
            .iter()
            .position(|v| v == name)
            .ok_or_else(|| ModelError::UnknownVariable(name.to_string()))?;
        base[i] = true;
    }
    let g = bipartite_of(&model);
    let mut edges = g.edges();
    edges.extend((0..g.n_variables()).map(|i| (i, i)));
    let b_nat = BipartiteView::new(g.variables().to_vec(), g.equations().to_vec(), &edges);
    let pairs: Vec<(usize, usize)> = (0..g.n_variables()).map(|i| (i, i)).collect();
    let m_nat = crate::matching::Matching::from_pairs(&b_nat, &pairs).expect("natural pairs are edges");
    let oriented = orient(&b_nat, &m_nat).expect("natural matching is perfect");
    let (cycles, truncated) = simple_cycles(&oriented.adjacency(), max_cycles);
    let nv = g.n_variables();
    let examined = cycles.len();
    let crossing = cycles
        .into_iter()
        .filter_map(|c| {
            let vars: Vec<usize> = c.iter().copied().filter(|&i| i < nv).collect();
            let (inside, outside): (Vec<usize>, Vec<usize>) = vars.iter().partition(|&&i| base[i]);
            if inside.is_empty() || outside.is_empty() {
                return None;
            }
            let name = |i: usize| oriented.vertices()[i].name.clone();
            Some(FeedbackCycle {
                vertices: c.iter().map(|&i| name(i)).collect(),
                base_variables: inside.into_iter().map(name).collect(),
                other_variables: outside.into_iter().map(name).collect(),
            })
        })
        .collect();
    Ok(FeedbackReport {
        cycles: crossing,
        examined,
        truncated,
    })
}

/// Johnson's algorithm for elementary circuits. Each cycle starts at its
/// smallest vertex. Stops after `cap` cycles and reports truncation.
pub fn simple_cycles(adj: &[Vec<usize>], cap: usize) -> (Vec<Vec<usize>>, bool) {
    let n = adj.len();
    let mut out = Vec::new();
    for s in 0..n {
        // Strongly connected component of s in the subgraph induced by >= s.
        let sub: Vec<Vec<usize>> = (0..n)
            .map(|v| {
                if v < s {
                    Vec::new()
                } else {
                    adj[v].iter().copied().filter(|&w| w >= s).collect()
                }
            })
            .collect();
        let comp = tarjan_scc(&sub);
        let in_comp: Vec<bool> = (0..n).map(|v| v >= s && comp[v] == comp[s]).collect();
        if !sub[s].iter().any(|&w| in_comp[w]) {
            continue;
        }
        let mut j = Johnson {
            adj: &sub,
            in_comp: &in_comp,
            blocked: vec![false; n],
            b: vec![BTreeSet::new(); n],
            path: Vec::new(),
            out: &mut out,
            cap,
            start: s,
        };
        j.circuit(s);
        if out.len() >= cap {
            return (out, true);
        }
    }
    (out, false)
}

struct Johnson<'a> {
    adj: &'a [Vec<usize>],
    in_comp: &'a [bool],
    blocked: Vec<bool>,
    b: Vec<BTreeSet<usize>>,
    path: Vec<usize>,
    out: &'a mut Vec<Vec<usize>>,
    cap: usize,
    start: usize,
}

impl Johnson<'_> {
    fn unblock(&mut self, u: usize) {
        let mut stack = vec![u];
        while let Some(x) = stack.pop() {
            if self.blocked[x] {
                self.blocked[x] = false;
                stack.extend(std::mem::take(&mut self.b[x]));
            }
        }
    }

    fn circuit(&mut self, v: usize) -> bool {
        if self.out.len() >= self.cap {
            return false;
        }
        let mut found = false;
        self.path.push(v);
        self.blocked[v] = true;
        for &w in &self.adj[v] {
            if !self.in_comp[w] || self.out.len() >= self.cap {
                continue;
            }
            if w == self.start {
                self.out.push(self.path.clone());
                found = true;
            } else if !self.blocked[w] && self.circuit(w) {
                found = true;
            }
        }
        if found {
            self.unblock(v);
        } else {
            for &w in &self.adj[v] {
                if self.in_comp[w] {
                    self.b[w].insert(v);
                }
            }
        }
        self.path.pop();
        found
    }
}

/// Accepts `"X_I"` or `["X_I", "X_T"]`.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize, Serialize)]
#[serde(untagged)]
pub enum VertexSet {
    One(Ident),
    Many(Vec<Ident>),
}

impl VertexSet {
    pub fn names(&self) -> Vec<&str> {
        match self {
            VertexSet::One(s) => vec![s.as_str()],
            VertexSet::Many(v) => v.iter().map(String::as_str).collect(),
        }
    }
}

/// An observed (in)dependence between vertex sets.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize, Serialize)]
pub struct Observation {
    pub x: VertexSet,
    pub y: VertexSet,
    #[serde(default = "empty_set")]
    pub given: VertexSet,
    pub independent: bool,
}

fn empty_set() -> VertexSet {
    VertexSet::Many(Vec::new())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FindingKind {
    ExtensionContainsNonSelfRegulatingVariable,
    ExtensionIntroducesNewFeedbackLoop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Assumption {
    Faithfulness,
    SubmodelCorrectness,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Finding {
    pub observation: usize,
    pub x: Vec<Ident>,
    pub y: Vec<Ident>,
    pub given: Vec<Ident>,
    pub kinds: Vec<FindingKind>,
    pub assumptions: Vec<Assumption>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DiagnosisReport {
    pub findings: Vec<Finding>,
    pub examined: usize,
}

/// Flags observed independences that the base Markov ordering graph
/// predicts to be dependences. Under faithfulness and a correct submodel,
/// such an observation means the true system extends the base model with
/// a non-self-regulating variable and with a new feedback loop.
pub fn diagnose(base_mo: &MarkovDag, observations: &[Observation]) -> Result<DiagnosisReport, QueryError> {
    let mut findings = Vec::new();
    for (k, obs) in observations.iter().enumerate() {
        let resolve = |set: &VertexSet| -> Result<Vec<usize>, QueryError> {
            set.names()
                .into_iter()
                .map(|n| resolve_vertex(n, |s| base_mo.vertex_index(s)))
                .collect()
        };
        let (xs, ys, zs) = (resolve(&obs.x)?, resolve(&obs.y)?, resolve(&obs.given)?);
        let mut owner = vec![0u8; base_mo.len()];
        for (tag, set) in [(1u8, &xs), (2, &ys), (3, &zs)] {
            for &v in set.iter() {
                if owner[v] != 0 && owner[v] != tag {
                    return Err(QueryError::OverlappingSets(base_mo.vertices()[v].name.clone()));
                }
                owner[v] = tag;
            }
        }
        if xs.is_empty() || ys.is_empty() {
            return Err(QueryError::InvalidTarget {
                name: format!("observation {k}"),
                reason: "x and y must be non-empty".into(),
            });
        }
        if obs.independent && !d_separated_idx(base_mo, &xs, &ys, &zs) {
            let names = |set: &[usize]| -> Vec<Ident> {
                set.iter().map(|&v| base_mo.vertices()[v].name.clone()).collect()
            };
            findings.push(Finding {
                observation: k,
                x: names(&xs),
                y: names(&ys),
                given: names(&zs),
                kinds: vec![
                    FindingKind::ExtensionContainsNonSelfRegulatingVariable,
                    FindingKind::ExtensionIntroducesNewFeedbackLoop,
                ],
                assumptions: vec![Assumption::Faithfulness, Assumption::SubmodelCorrectness],
            });
        }
    }
    Ok(DiagnosisReport {
        findings,
        examined: observations.len(),
    })
}

/// A change between a base and an extended graph for one query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RelationChange {
    pub x: Ident,
    pub y: Ident,
    pub given: Vec<Ident>,
}

/// Ancestral relations `x ⤳ y` between base vertices whose presence
/// differs between the base and extended cluster graphs. `rename` maps base
/// names to extended names (promotions). Returns `(lost, gained)`.
pub fn compare_ancestral(
    base: &ClusterGraph,
    extended: &ClusterGraph,
    rename: &dyn Fn(&str) -> String,
) -> (Vec<RelationChange>, Vec<RelationChange>) {
    let map: Vec<usize> = base
        .vertices()
        .iter()
        .map(|v| {
            extended
                .vertex_index(&rename(&v.name))
                .expect("base vertex present in extension")
        })
        .collect();
    let mut lost = Vec::new();
    let mut gained = Vec::new();
    let n = base.vertices().len();
    for x in 0..n {
        for y in 0..n {
            if x == y {
                continue;
            }
            let before = cluster_reachable_idx(base, x, y);
            let after = cluster_reachable_idx(extended, map[x], map[y]);
            if before != after {
                let change = RelationChange {
                    x: base.vertices()[x].name.clone(),
                    y: base.vertices()[y].name.clone(),
                    given: Vec::new(),
                };
                if before {
                    lost.push(change);
                } else {
                    gained.push(change);
                }
            }
        }
    }
    (lost, gained)
}

/// d-connection queries over base vertices (all pairs, conditioning sets
/// up to `max_conditioning`) whose verdict differs between the base and the
/// extended Markov ordering graph. Returns `(lost, gained)` d-connections.
pub fn compare_d_connections(
    base: &MarkovDag,
    extended: &MarkovDag,
    rename: &dyn Fn(&str) -> String,
    max_conditioning: usize,
) -> (Vec<RelationChange>, Vec<RelationChange>) {
    let map: Vec<usize> = base
        .vertices()
        .iter()
        .map(|v| {
            extended
                .vertex_index(&rename(&v.name))
                .expect("base vertex present in extension")
        })
        .collect();
    let n = base.len();
    let mut lost = Vec::new();
    let mut gained = Vec::new();
    for x in 0..n {
        for y in x + 1..n {
            let rest: Vec<usize> = (0..n).filter(|&v| v != x && v != y).collect();
            for k in 0..=max_conditioning.min(rest.len()) {
                for_each_subset(&rest, k, &mut |z| {
                    let before = d_separated_idx(base, &[x], &[y], z);
                    let z_ext: Vec<usize> = z.iter().map(|&v| map[v]).collect();
                    let after = d_separated_idx(extended, &[map[x]], &[map[y]], &z_ext);
                    if before != after {
                        let change = RelationChange {
                            x: base.vertices()[x].name.clone(),
                            y: base.vertices()[y].name.clone(),
                            given: z.iter().map(|&v| base.vertices()[v].name.clone()).collect(),
                        };
                        if before {
                            gained.push(change);
                        } else {
                            lost.push(change);
                        }
                    }
                });
            }
        }
    }
    (lost, gained)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{BinOp, Expr};
    use crate::model::{EquationBody, EquationSpec, IncidenceModel, SymbolKind};

    fn base() -> IncidenceModel {
        IncidenceModel::builder("base")
            .variables(["x"])
            .exogenous("u", None)
            .equation(EquationSpec::depends("f", ["x", "u"]))
            .build()
            .unwrap()
    }

    #[test]
    fn empty_extension_is_vacuously_fine() {
        let ext = ExtensionSpec::builder("noop", base()).build().unwrap();
        let p = check_presence_preservation(&ext);
        assert!(p.applicable);
        assert_eq!(p.guarantees, vec![Guarantee::PresenceAncestral, Guarantee::PresenceDconn]);
        let a = check_absence_preservation(&ext);
        assert!(a.applicable);
        assert_eq!(a.guarantees, vec![Guarantee::AbsenceAncestral, Guarantee::AbsenceDconn]);
    }

    #[test]
    fn promoted_symbol_counts_as_adjacent() {
        let ext = ExtensionSpec::builder("e", base())
            .promote("u", "y")
            .equation(EquationSpec::depends("g", ["y"]))
            .build()
            .unwrap();
        let a = check_absence_preservation(&ext);
        assert!(!a.applicable);
        assert!(a.guarantees.is_empty());
        assert_eq!(
            a.condition("no_added_variable_in_base_equations").unwrap().certificate,
            Certificate::Adjacency {
                pairs: vec![("y".into(), "f".into())]
            }
        );
        assert!(check_presence_preservation(&ext).applicable);
    }

    #[test]
    fn johnson_counts_cycles_of_complete_digraph() {
        // K3 has 2 three-cycles and 3 two-cycles.
        let adj = vec![vec![1, 2], vec![0, 2], vec![0, 1]];
        let (cycles, truncated) = simple_cycles(&adj, 100);
        assert_eq!(cycles.len(), 5);
        assert!(!truncated);
        let (few, truncated) = simple_cycles(&adj, 2);
        assert_eq!(few.len(), 2);
        assert!(truncated);
    }

    fn decay(name: &str, var: &str, input: &str) -> DynamicalModel {
        DynamicalModel::builder(name)
            .variable(var)
            .exogenous(input, None)
            .ode(
                var,
                EquationBody::Residual(Expr::binary(
                    BinOp::Sub,
                    Expr::sym(input),
                    Expr::sym(var),
                )),
            )
            .self_regulating(var)
            .build()
            .unwrap()
    }

    #[test]
    fn self_regulating_decay_is_applicable() {
        let b = decay("b", "x", "u");
        let e = DynamicalModel::builder("e")
            .variable("x")
            .variable("y")
            .exogenous("u", None)
            .ode("x", EquationBody::Depends(vec!["x".into(), "u".into()]))
            .ode("y", EquationBody::Depends(vec!["y".into(), "x".into()]))
            .self_regulating("x")
            .self_regulating("y")
            .build()
            .unwrap();
        let v = check_self_regulating(&b, &e);
        assert!(v.applicable, "{v:?}");
        let report = detect_new_feedback(&e, &["x"], DEFAULT_MAX_CYCLES).unwrap();
        assert!(report.cycles.is_empty());
    }

    #[test]
    fn diagnose_flags_only_contradicted_independences() {
        let mo = MarkovDag::new(
            vec![
                crate::ordering::Vertex {
                    name: "U".into(),
                    kind: SymbolKind::Exogenous,
                },
                crate::ordering::Vertex {
                    name: "X".into(),
                    kind: SymbolKind::Variable,
                },
            ],
            vec![(0, 1)],
        );
        let obs: Vec<Observation> = serde_json::from_str(
            r#"[{"x": "U", "y": ["X"], "independent": true},
                {"x": "U", "y": "X", "given": [], "independent": false}]"#,
        )
        .unwrap();
        let report = diagnose(&mo, &obs).unwrap();
        assert_eq!(report.findings.len(), 1);
        assert_eq!(report.findings[0].observation, 0);
        let bad: Vec<Observation> =
            serde_json::from_str(r#"[{"x": "U", "y": "U", "independent": true}]"#).unwrap();
        assert!(diagnose(&mo, &bad).is_err());
    }
}
