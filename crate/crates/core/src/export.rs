//! Deterministic DOT and JSON serialization of ordering graphs.

use std::fmt::Write as _;

use serde::Serialize;

use crate::model::SymbolKind;
use crate::ordering::{ClusterGraph, MarkovDag, OrientedGraph, Vertex};

pub const JSON_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Dot,
    Json,
}

/// Any graph produced by the ordering engine.
#[derive(Debug, Clone, Copy)]
pub enum Graph<'a> {
    Oriented(&'a OrientedGraph),
    Clusters(&'a ClusterGraph),
    Markov(&'a MarkovDag),
}

pub fn export(graph: Graph<'_>, format: Format) -> String {
    match (graph, format) {
        (Graph::Oriented(g), Format::Dot) => oriented_dot(g),
        (Graph::Oriented(g), Format::Json) => oriented_json(g),
        (Graph::Clusters(g), Format::Dot) => cluster_dot(g),
        (Graph::Clusters(g), Format::Json) => cluster_json(g),
        (Graph::Markov(g), Format::Dot) => markov_dot(g),
        (Graph::Markov(g), Format::Json) => markov_json(g),
    }
}

fn quote(name: &str) -> String {
    format!("\"{}\"", name.replace('\\', "\\\\").replace('"', "\\\""))
}

fn node_attrs(kind: SymbolKind) -> &'static str {
    match kind {
        SymbolKind::Variable => "",
        SymbolKind::Equation => " [shape=box]",
        SymbolKind::Exogenous => " [style=dashed]",
        SymbolKind::Parameter => " [shape=point, xlabel=LABEL]",
    }
}

fn node_line(out: &mut String, indent: &str, v: &Vertex) {
    let attrs = node_attrs(v.kind).replace("LABEL", &quote(&v.name));
    let _ = writeln!(out, "{indent}{}{attrs};", quote(&v.name));
}

pub fn oriented_dot(g: &OrientedGraph) -> String {
    let mut out = String::from("digraph oriented {\n");
    for v in g.vertices() {
        node_line(&mut out, "  ", v);
    }
    for &(a, b) in g.edges() {
        let _ = writeln!(
            out,
            "  {} -> {};",
            quote(&g.vertices()[a].name),
            quote(&g.vertices()[b].name)
        );
    }
    out.push_str("}\n");
    out
}

/// Endogenous clusters become `subgraph cluster_Ci` boxes; an edge into a
/// cluster points at its first member and is clipped at the box.
pub fn cluster_dot(g: &ClusterGraph) -> String {
    let mut out = String::from("digraph causal_ordering {\n  compound=true;\n");
    for (c, cluster) in g.clusters().iter().enumerate() {
        if g.is_endogenous(c) {
            let name = g.cluster_name(c);
            let _ = writeln!(out, "  subgraph cluster_{name} {{");
            let _ = writeln!(out, "    label={};", quote(&name));
            for &i in &cluster.members {
                node_line(&mut out, "    ", &g.vertices()[i]);
            }
            out.push_str("  }\n");
        } else {
            for &i in &cluster.members {
                node_line(&mut out, "  ", &g.vertices()[i]);
            }
        }
    }
    for &(z, c) in g.edges() {
        let head = g.clusters()[c].members[0];
        let _ = writeln!(
            out,
            "  {} -> {} [lhead=cluster_{}];",
            quote(&g.vertices()[z].name),
            quote(&g.vertices()[head].name),
            g.cluster_name(c)
        );
    }
    out.push_str("}\n");
    out
}

pub fn markov_dot(g: &MarkovDag) -> String {
    let mut out = String::from("digraph markov_ordering {\n");
    for v in g.vertices() {
        node_line(&mut out, "  ", v);
    }
    for &(a, b) in g.edges() {
        let _ = writeln!(
            out,
            "  {} -> {};",
            quote(&g.vertices()[a].name),
            quote(&g.vertices()[b].name)
        );
    }
    out.push_str("}\n");
    out
}

#[derive(Serialize)]
struct JsonEdge<'a> {
    from: &'a str,
    to: &'a str,
}

#[derive(Serialize)]
struct JsonVertex<'a> {
    name: &'a str,
    kind: SymbolKind,
}

#[derive(Serialize)]
struct JsonCluster<'a> {
    id: String,
    members: Vec<&'a str>,
}

#[derive(Serialize)]
struct ClusterDoc<'a> {
    clusters: Vec<JsonCluster<'a>>,
    edges: Vec<JsonEdge<'a>>,
    version: u32,
}

#[derive(Serialize)]
struct DirectedDoc<'a> {
    vertices: Vec<JsonVertex<'a>>,
    edges: Vec<JsonEdge<'a>>,
    version: u32,
}

/// Pretty JSON with a trailing newline, the format of every JSON document
/// the crate emits.
pub fn to_pretty<T: Serialize>(doc: &T) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("documents serialize");
    s.push('\n');
    s
}

/// `{"clusters":[...],"edges":[...],"version":1}`, edges pointing at
/// cluster ids.
pub fn cluster_json(g: &ClusterGraph) -> String {
    let name = |i: usize| g.vertices()[i].name.as_str();
    let ids: Vec<String> = (0..g.clusters().len()).map(|c| g.cluster_name(c)).collect();
    let doc = ClusterDoc {
        clusters: g
            .clusters()
            .iter()
            .zip(&ids)
            .map(|(cl, id)| JsonCluster {
                id: id.clone(),
                members: cl.members.iter().map(|&i| name(i)).collect(),
            })
            .collect(),
        edges: g
            .edges()
            .iter()
            .map(|&(z, c)| JsonEdge {
                from: name(z),
                to: ids[c].as_str(),
            })
            .collect(),
        version: JSON_VERSION,
    };
    to_pretty(&doc)
}

fn directed_json(vertices: &[Vertex], edges: &[(usize, usize)]) -> String {
    let doc = DirectedDoc {
        vertices: vertices
            .iter()
            .map(|v| JsonVertex {
                name: &v.name,
                kind: v.kind,
            })
            .collect(),
        edges: edges
            .iter()
            .map(|&(a, b)| JsonEdge {
                from: &vertices[a].name,
                to: &vertices[b].name,
            })
            .collect(),
        version: JSON_VERSION,
    };
    to_pretty(&doc)
}

pub fn oriented_json(g: &OrientedGraph) -> String {
    directed_json(g.vertices(), g.edges())
}

pub fn markov_json(g: &MarkovDag) -> String {
    directed_json(g.vertices(), g.edges())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{EquationSpec, IncidenceModel};
    use crate::ordering::{causal_ordering, markov_from_clusters};

    #[test]
    fn empty_model_exports_empty_digraph() {
        let m = IncidenceModel::builder("empty").build().unwrap();
        let co = causal_ordering(&m).unwrap();
        let mo = markov_from_clusters(&co);
        assert_eq!(markov_dot(&mo), "digraph markov_ordering {\n}\n");
        assert_eq!(
            cluster_dot(&co),
            "digraph causal_ordering {\n  compound=true;\n}\n"
        );
        let v: serde_json::Value = serde_json::from_str(&cluster_json(&co)).unwrap();
        assert_eq!(v["version"], 1);
        assert_eq!(v["clusters"].as_array().unwrap().len(), 0);
    }

    #[test]
    fn intro_cluster_dot_has_two_boxes() {
        let m = IncidenceModel::builder("intro")
            .variables(["v1", "v2"])
            .exogenous("w1", None)
            .exogenous("w2", None)
            .parameter("p1", None)
            .parameter("p2", None)
            .equation(EquationSpec::depends("f1", ["p1", "v1", "w1"]))
            .equation(EquationSpec::depends("f2", ["p2", "v2", "v1", "w2"]))
            .build()
            .unwrap();
        let dot = cluster_dot(&causal_ordering(&m).unwrap());
        assert_eq!(dot.matches("subgraph cluster_").count(), 2);
        assert!(dot.contains("\"w1\" [style=dashed];"));
        assert!(dot.contains("\"p1\" [shape=point, xlabel=\"p1\"];"));
        assert!(dot.contains("\"v1\" -> \"v2\" [lhead=cluster_C5];"));
        // Keys appear in schema order.
        let json = cluster_json(&causal_ordering(&m).unwrap());
        let (c, e, v) = (
            json.find("\"clusters\"").unwrap(),
            json.find("\"edges\"").unwrap(),
            json.find("\"version\"").unwrap(),
        );
        assert!(c < e && e < v);
    }

    #[test]
    fn names_are_quoted_and_escaped() {
        assert_eq!(quote("f_I+"), "\"f_I+\"");
        assert_eq!(quote("a\"b"), "\"a\\\"b\"");
    }
}
