//! Writes a [`ModelSet`] back out as `.cmf` text.

use std::fmt::Write;

use super::ModelSet;
use crate::model::{Distribution, DynamicalModel, EquationBody, Exogenous, ExtensionSpec, IncidenceModel, Parameter};

/// Canonical text for a model set. Parsing the output yields an equal set.
pub fn to_cmf(set: &ModelSet) -> String {
    let mut out = String::new();
    for m in &set.models {
        write_model(&mut out, m);
    }
    for e in &set.extensions {
        write_extension(&mut out, e);
    }
    for d in &set.dynamics {
        write_dynamics(&mut out, d);
    }
    out
}

fn list<S: AsRef<str>>(names: &[S]) -> String {
    names.iter().map(|s| s.as_ref()).collect::<Vec<_>>().join(", ")
}

fn write_names<S: AsRef<str>>(out: &mut String, keyword: &str, names: &[S]) {
    if !names.is_empty() {
        let _ = writeln!(out, "  {keyword} {}", list(names));
    }
}

fn write_exogenous(out: &mut String, exo: &[Exogenous]) {
    for w in exo {
        match w.law {
            None => {
                let _ = writeln!(out, "  exo {}", w.name);
            }
            Some(Distribution::LogNormal { mu, sigma }) => {
                let _ = writeln!(out, "  exo {} ~ LogNormal({mu}, {sigma})", w.name);
            }
            Some(Distribution::Uniform { lo, hi }) => {
                let _ = writeln!(out, "  exo {} ~ Uniform({lo}, {hi})", w.name);
            }
        }
    }
}

fn write_parameters(out: &mut String, params: &[Parameter]) {
    for p in params {
        match p.value {
            Some(v) => {
                let _ = writeln!(out, "  param {} = {v}", p.name);
            }
            None => {
                let _ = writeln!(out, "  param {}", p.name);
            }
        }
    }
}

fn body_text(body: &EquationBody) -> String {
    match body {
        EquationBody::Residual(e) => format!("{e} = 0"),
        EquationBody::Depends(names) => format!("depends({})", list(names)),
    }
}

fn write_model(out: &mut String, m: &IncidenceModel) {
    let _ = writeln!(out, "model {} {{", m.name());
    write_names(out, "var", m.variables());
    write_exogenous(out, m.exogenous());
    write_parameters(out, m.parameters());
    for (i, f) in m.equations().iter().enumerate() {
        let _ = writeln!(out, "  eq {}: {}", f.name, body_text(&m.equation_body(i)));
    }
    let positive: Vec<&str> = m.positive_variables().collect();
    write_names(out, "positive", &positive);
    out.push_str("}\n\n");
}

fn write_extension(out: &mut String, e: &ExtensionSpec) {
    let _ = writeln!(out, "extend {} of {} {{", e.name(), e.base().name());
    // Promotion targets are listed too; the parser keeps explicitly declared
    // targets in place, so the order of added variables survives.
    write_names(out, "var", e.added_variables());
    write_exogenous(out, e.added_exogenous());
    write_parameters(out, e.added_parameters());
    for p in e.promotions() {
        if p.from == p.to {
            let _ = writeln!(out, "  promote {}", p.from);
        } else {
            let _ = writeln!(out, "  promote {} -> {}", p.from, p.to);
        }
    }
    for f in e.added_equations() {
        let _ = writeln!(out, "  eq {}: {}", f.name, body_text(&f.body));
    }
    write_names(out, "positive", e.positive());
    out.push_str("}\n\n");
}

fn write_dynamics(out: &mut String, d: &DynamicalModel) {
    let _ = writeln!(out, "dynamics {} {{", d.name());
    write_names(out, "var", d.variables());
    write_exogenous(out, d.exogenous());
    write_parameters(out, d.parameters());
    for ode in d.odes() {
        match &ode.body {
            EquationBody::Residual(e) => {
                let _ = writeln!(out, "  ddt {} = {e}", ode.variable);
            }
            EquationBody::Depends(names) => {
                let _ = writeln!(out, "  ddt {} depends({})", ode.variable, list(names));
            }
        }
    }
    let flagged = |f: &dyn Fn(usize) -> bool| -> Vec<&str> {
        (0..d.variables().len())
            .filter(|&i| f(i))
            .map(|i| d.variables()[i].as_str())
            .collect()
    };
    write_names(out, "selfreg", &flagged(&|i| d.is_self_regulating(i)));
    write_names(out, "positive", &flagged(&|i| d.is_positive(i)));
    out.push_str("}\n\n");
}
