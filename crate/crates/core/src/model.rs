//! Equation systems, model extensions and dynamical models.
//!
//! An [`IncidenceModel`] records which endogenous variables, exogenous random
//! variables and parameters occur in each equation. Everything downstream
//! (matchings, causal ordering, Markov ordering) consumes the endogenous part
//! of that incidence as a [`BipartiteView`].

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::Expr;

pub type Ident = String;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("identifier `{0}` is declared more than once")]
    DuplicateIdentifier(Ident),
    #[error("equation `{equation}` refers to undeclared symbol `{symbol}`")]
    UnknownSymbol { equation: Ident, symbol: Ident },
    #[error("`{0}` is not a declared endogenous variable")]
    UnknownVariable(Ident),
    #[error("invalid distribution for `{symbol}`: {reason}")]
    InvalidDistribution { symbol: Ident, reason: String },
    #[error("cannot drop the positive factor `{variable}`: its right-hand side is not a product with `{variable}` as a factor")]
    NotFactorable { variable: Ident },
    #[error("variable `{0}` is marked self-regulating but does not occur in its own time derivative")]
    SelfRegulationInconsistent(Ident),
    #[error("variable `{0}` has no time derivative")]
    MissingOde(Ident),
    #[error("variable `{0}` has more than one time derivative")]
    DuplicateOde(Ident),
    #[error("invalid promotion of `{symbol}`: {reason}")]
    InvalidPromotion { symbol: Ident, reason: String },
}

/// Law of an exogenous random variable. Only strictly positive families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law")]
pub enum Distribution {
    LogNormal { mu: f64, sigma: f64 },
    Uniform { lo: f64, hi: f64 },
}

impl Distribution {
    /// Law used for exogenous variables without an annotation.
    pub const DEFAULT: Distribution = Distribution::LogNormal {
        mu: 0.0,
        sigma: 0.25,
    };

    pub fn validate(&self, symbol: &str) -> Result<(), ModelError> {
        let bad = |reason: &str| {
            Err(ModelError::InvalidDistribution {
                symbol: symbol.to_string(),
                reason: reason.to_string(),
            })
        };
        match *self {
            Distribution::LogNormal { mu, sigma } => {
                if !mu.is_finite() || !sigma.is_finite() || sigma <= 0.0 {
                    return bad("LogNormal needs finite mu and sigma > 0");
                }
            }
            Distribution::Uniform { lo, hi } => {
                if !lo.is_finite() || !hi.is_finite() || lo <= 0.0 || hi <= lo {
                    return bad("Uniform needs 0 < lo < hi (strictly positive support)");
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymbolKind {
    Variable,
    Equation,
    Exogenous,
    Parameter,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Exogenous {
    pub name: Ident,
    pub law: Option<Distribution>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Parameter {
    pub name: Ident,
    pub value: Option<f64>,
}

/// How an equation is given: as a residual expression (`residual = 0`) or
/// as a bare dependency list.
#[derive(Debug, Clone, PartialEq)]
pub enum EquationBody {
    Residual(Expr),
    Depends(Vec<Ident>),
}

impl EquationBody {
    fn symbols(&self) -> Vec<Ident> {
        match self {
            EquationBody::Residual(e) => e.symbols_in_order(),
            EquationBody::Depends(d) => {
                let mut seen = BTreeSet::new();
                d.iter().filter(|s| seen.insert(*s)).cloned().collect()
            }
        }
    }

    fn rename(&self, map: &BTreeMap<Ident, Ident>) -> EquationBody {
        match self {
            EquationBody::Residual(e) => EquationBody::Residual(e.rename(map)),
            EquationBody::Depends(d) => EquationBody::Depends(
                d.iter()
                    .map(|s| map.get(s).cloned().unwrap_or_else(|| s.clone()))
                    .collect(),
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquationSpec {
    pub name: Ident,
    pub body: EquationBody,
}

impl EquationSpec {
    pub fn residual(name: impl Into<Ident>, expr: Expr) -> Self {
        EquationSpec {
            name: name.into(),
            body: EquationBody::Residual(expr),
        }
    }

    pub fn depends<I, S>(name: impl Into<Ident>, symbols: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<Ident>,
    {
        EquationSpec {
            name: name.into(),
            body: EquationBody::Depends(symbols.into_iter().map(Into::into).collect()),
        }
    }
}

/// An equation together with its resolved incidence (indices into the
/// owning model's declaration lists, ascending).
#[derive(Debug, Clone, PartialEq)]
pub struct Equation {
    pub name: Ident,
    pub residual: Option<Expr>,
    pub variables: Vec<usize>,
    pub exogenous: Vec<usize>,
    pub parameters: Vec<usize>,
}

/// Equation system with endogenous, exogenous and parameter incidence.
#[derive(Debug, Clone, PartialEq)]
pub struct IncidenceModel {
    name: Ident,
    variables: Vec<Ident>,
    positive: Vec<bool>,
    exogenous: Vec<Exogenous>,
    parameters: Vec<Parameter>,
    equations: Vec<Equation>,
}

#[derive(Debug, Clone, Default)]
pub struct ModelBuilder {
    name: Ident,
    variables: Vec<Ident>,
    positive: Vec<Ident>,
    exogenous: Vec<Exogenous>,
    parameters: Vec<Parameter>,
    equations: Vec<EquationSpec>,
}

impl ModelBuilder {
    pub fn new(name: impl Into<Ident>) -> Self {
        ModelBuilder {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn variable(mut self, name: impl Into<Ident>) -> Self {
        self.variables.push(name.into());
        self
    }

    pub fn variables<I, S>(mut self, names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<Ident>,
    {
        self.variables.extend(names.into_iter().map(Into::into));
        self
    }

    pub fn exogenous(mut self, name: impl Into<Ident>, law: Option<Distribution>) -> Self {
        self.exogenous.push(Exogenous {
            name: name.into(),
            law,
        });
        self
    }

    pub fn parameter(mut self, name: impl Into<Ident>, value: Option<f64>) -> Self {
        self.parameters.push(Parameter {
            name: name.into(),
            value,
        });
        self
    }

    pub fn equation(mut self, spec: EquationSpec) -> Self {
        self.equations.push(spec);
        self
    }

    /// Requires strictly positive equilibrium values for `name`.
    pub fn positive(mut self, name: impl Into<Ident>) -> Self {
        self.positive.push(name.into());
        self
    }

    pub fn build(self) -> Result<IncidenceModel, ModelError> {
        fn declare<'a>(
            table: &mut HashMap<&'a str, (SymbolKind, usize)>,
            name: &'a str,
            kind: SymbolKind,
            idx: usize,
        ) -> Result<(), ModelError> {
            if table.insert(name, (kind, idx)).is_some() {
                Err(ModelError::DuplicateIdentifier(name.to_string()))
            } else {
                Ok(())
            }
        }
        let mut table: HashMap<&str, (SymbolKind, usize)> = HashMap::new();
        for (i, v) in self.variables.iter().enumerate() {
            declare(&mut table, v, SymbolKind::Variable, i)?;
        }
        for (i, w) in self.exogenous.iter().enumerate() {
            declare(&mut table, &w.name, SymbolKind::Exogenous, i)?;
        }
        for (i, p) in self.parameters.iter().enumerate() {
            declare(&mut table, &p.name, SymbolKind::Parameter, i)?;
        }
        for (i, f) in self.equations.iter().enumerate() {
            declare(&mut table, &f.name, SymbolKind::Equation, i)?;
        }
        for w in &self.exogenous {
            if let Some(law) = &w.law {
                law.validate(&w.name)?;
            }
        }

        let mut equations = Vec::with_capacity(self.equations.len());
        for spec in &self.equations {
            let mut eq = Equation {
                name: spec.name.clone(),
                residual: match &spec.body {
                    EquationBody::Residual(e) => Some(e.clone()),
                    EquationBody::Depends(_) => None,
                },
                variables: Vec::new(),
                exogenous: Vec::new(),
                parameters: Vec::new(),
            };
            for sym in spec.body.symbols() {
                match table.get(sym.as_str()) {
                    Some((SymbolKind::Variable, i)) => eq.variables.push(*i),
                    Some((SymbolKind::Exogenous, i)) => eq.exogenous.push(*i),
                    Some((SymbolKind::Parameter, i)) => eq.parameters.push(*i),
                    _ => {
                        return Err(ModelError::UnknownSymbol {
                            equation: spec.name.clone(),
                            symbol: sym,
                        })
                    }
                }
            }
            eq.variables.sort_unstable();
            eq.exogenous.sort_unstable();
            eq.parameters.sort_unstable();
            equations.push(eq);
        }

        let mut positive = vec![false; self.variables.len()];
        for p in &self.positive {
            match table.get(p.as_str()) {
                Some((SymbolKind::Variable, i)) => positive[*i] = true,
                _ => return Err(ModelError::UnknownVariable(p.clone())),
            }
        }

        Ok(IncidenceModel {
            name: self.name,
            variables: self.variables,
            positive,
            exogenous: self.exogenous,
            parameters: self.parameters,
            equations,
        })
    }
}

impl IncidenceModel {
    pub fn builder(name: impl Into<Ident>) -> ModelBuilder {
        ModelBuilder::new(name)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn variables(&self) -> &[Ident] {
        &self.variables
    }

    pub fn exogenous(&self) -> &[Exogenous] {
        &self.exogenous
    }

    pub fn parameters(&self) -> &[Parameter] {
        &self.parameters
    }

    pub fn equations(&self) -> &[Equation] {
        &self.equations
    }

    pub fn is_positive(&self, variable: usize) -> bool {
        self.positive[variable]
    }

    pub fn positive_variables(&self) -> impl Iterator<Item = &str> {
        self.variables
            .iter()
            .zip(&self.positive)
            .filter(|(_, p)| **p)
            .map(|(v, _)| v.as_str())
    }

    /// Kind and declaration index of an identifier.
    pub fn lookup(&self, name: &str) -> Option<(SymbolKind, usize)> {
        if let Some(i) = self.variables.iter().position(|v| v == name) {
            return Some((SymbolKind::Variable, i));
        }
        if let Some(i) = self.equations.iter().position(|f| f.name == name) {
            return Some((SymbolKind::Equation, i));
        }
        if let Some(i) = self.exogenous.iter().position(|w| w.name == name) {
            return Some((SymbolKind::Exogenous, i));
        }
        self.parameters
            .iter()
            .position(|p| p.name == name)
            .map(|i| (SymbolKind::Parameter, i))
    }

    pub fn has_residuals(&self) -> bool {
        self.equations.iter().all(|f| f.residual.is_some())
    }

    /// Endogenous incidence as (variable, equation) name pairs.
    pub fn var_edges(&self) -> Vec<(&str, &str)> {
        self.edges_of(|f| &f.variables, |i| self.variables[i].as_str())
    }

    pub fn exo_edges(&self) -> Vec<(&str, &str)> {
        self.edges_of(|f| &f.exogenous, |i| self.exogenous[i].name.as_str())
    }

    pub fn param_edges(&self) -> Vec<(&str, &str)> {
        self.edges_of(|f| &f.parameters, |i| self.parameters[i].name.as_str())
    }

    fn edges_of<'a>(
        &'a self,
        pick: impl Fn(&'a Equation) -> &'a Vec<usize>,
        name: impl Fn(usize) -> &'a str,
    ) -> Vec<(&'a str, &'a str)> {
        let mut out: Vec<(usize, usize)> = Vec::new();
        for (fi, f) in self.equations.iter().enumerate() {
            out.extend(pick(f).iter().map(|&s| (s, fi)));
        }
        out.sort_unstable();
        out.into_iter()
            .map(|(s, fi)| (name(s), self.equations[fi].name.as_str()))
            .collect()
    }

    /// Body of equation `idx` in terms of identifiers.
    pub fn equation_body(&self, idx: usize) -> EquationBody {
        let f = &self.equations[idx];
        match &f.residual {
            Some(e) => EquationBody::Residual(e.clone()),
            None => {
                let mut deps: Vec<Ident> =
                    f.variables.iter().map(|&i| self.variables[i].clone()).collect();
                deps.extend(f.exogenous.iter().map(|&i| self.exogenous[i].name.clone()));
                deps.extend(f.parameters.iter().map(|&i| self.parameters[i].name.clone()));
                EquationBody::Depends(deps)
            }
        }
    }

    fn to_builder(&self) -> ModelBuilder {
        ModelBuilder {
            name: self.name.clone(),
            variables: self.variables.clone(),
            positive: self.positive_variables().map(str::to_string).collect(),
            exogenous: self.exogenous.clone(),
            parameters: self.parameters.clone(),
            equations: (0..self.equations.len())
                .map(|i| EquationSpec {
                    name: self.equations[i].name.clone(),
                    body: self.equation_body(i),
                })
                .collect(),
        }
    }
}

/// The endogenous bipartite graph of a model: variables, equations and
/// the variable-equation incidence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BipartiteView {
    variables: Vec<Ident>,
    equations: Vec<Ident>,
    eq_adj: Vec<Vec<usize>>,
    var_adj: Vec<Vec<usize>>,
}

impl BipartiteView {
    /// Builds a view from index edges `(variable, equation)`.
    pub fn new(variables: Vec<Ident>, equations: Vec<Ident>, edges: &[(usize, usize)]) -> Self {
        let mut eq_adj = vec![Vec::new(); equations.len()];
        let mut var_adj = vec![Vec::new(); variables.len()];
        for &(v, f) in edges {
            assert!(v < variables.len() && f < equations.len(), "edge out of range");
            eq_adj[f].push(v);
            var_adj[v].push(f);
        }
        for l in eq_adj.iter_mut().chain(var_adj.iter_mut()) {
            l.sort_unstable();
            l.dedup();
        }
        BipartiteView {
            variables,
            equations,
            eq_adj,
            var_adj,
        }
    }

    /// Builds a view from named edges; unknown names yield an error.
    pub fn from_named<S: AsRef<str>>(
        variables: &[S],
        equations: &[S],
        edges: &[(S, S)],
    ) -> Result<Self, ModelError> {
        let vars: Vec<Ident> = variables.iter().map(|s| s.as_ref().to_string()).collect();
        let eqs: Vec<Ident> = equations.iter().map(|s| s.as_ref().to_string()).collect();
        let mut idx = Vec::with_capacity(edges.len());
        for (v, f) in edges {
            let vi = vars
                .iter()
                .position(|x| x == v.as_ref())
                .ok_or_else(|| ModelError::UnknownVariable(v.as_ref().to_string()))?;
            let fi = eqs
                .iter()
                .position(|x| x == f.as_ref())
                .ok_or_else(|| ModelError::UnknownSymbol {
                    equation: f.as_ref().to_string(),
                    symbol: f.as_ref().to_string(),
                })?;
            idx.push((vi, fi));
        }
        Ok(BipartiteView::new(vars, eqs, &idx))
    }

    pub fn variables(&self) -> &[Ident] {
        &self.variables
    }

    pub fn equations(&self) -> &[Ident] {
        &self.equations
    }

    pub fn n_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn n_equations(&self) -> usize {
        self.equations.len()
    }

    /// Variables adjacent to equation `f`, ascending.
    pub fn equation_neighbors(&self, f: usize) -> &[usize] {
        &self.eq_adj[f]
    }

    /// Equations adjacent to variable `v`, ascending.
    pub fn variable_neighbors(&self, v: usize) -> &[usize] {
        &self.var_adj[v]
    }

    pub fn has_edge(&self, v: usize, f: usize) -> bool {
        self.eq_adj[f].binary_search(&v).is_ok()
    }

    /// All edges `(variable, equation)` sorted by variable then equation.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.var_adj
            .iter()
            .enumerate()
            .flat_map(|(v, fs)| fs.iter().map(move |&f| (v, f)))
            .collect()
    }

    pub fn named_edges(&self) -> Vec<(Ident, Ident)> {
        self.edges()
            .into_iter()
            .map(|(v, f)| (self.variables[v].clone(), self.equations[f].clone()))
            .collect()
    }

    pub fn variable_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v == name)
    }

    pub fn equation_index(&self, name: &str) -> Option<usize> {
        self.equations.iter().position(|f| f == name)
    }
}

/// The endogenous bipartite graph of `model`; exogenous variables and
/// parameters are left out.
pub fn bipartite_of(model: &IncidenceModel) -> BipartiteView {
    let edges: Vec<(usize, usize)> = model
        .equations
        .iter()
        .enumerate()
        .flat_map(|(fi, f)| f.variables.iter().map(move |&v| (v, fi)))
        .collect();
    BipartiteView::new(
        model.variables.clone(),
        model.equations.iter().map(|f| f.name.clone()).collect(),
        &edges,
    )
}

/// A base exogenous variable or parameter that becomes endogenous in an
/// extension, possibly under a new name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Promotion {
    pub from: Ident,
    pub to: Ident,
}

/// Addition of equations (and variables) to a base model.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtensionSpec {
    name: Ident,
    base: IncidenceModel,
    added_variables: Vec<Ident>,
    added_exogenous: Vec<Exogenous>,
    added_parameters: Vec<Parameter>,
    added_equations: Vec<EquationSpec>,
    promotions: Vec<Promotion>,
    positive: Vec<Ident>,
}

#[derive(Debug, Clone)]
pub struct ExtensionBuilder {
    spec: ExtensionSpec,
}

impl ExtensionBuilder {
    pub fn variable(mut self, name: impl Into<Ident>) -> Self {
        self.spec.added_variables.push(name.into());
        self
    }

    pub fn exogenous(mut self, name: impl Into<Ident>, law: Option<Distribution>) -> Self {
        self.spec.added_exogenous.push(Exogenous {
            name: name.into(),
            law,
        });
        self
    }

    pub fn parameter(mut self, name: impl Into<Ident>, value: Option<f64>) -> Self {
        self.spec.added_parameters.push(Parameter {
            name: name.into(),
            value,
        });
        self
    }

    pub fn equation(mut self, spec: EquationSpec) -> Self {
        self.spec.added_equations.push(spec);
        self
    }

    /// Promotes base symbol `from` to the endogenous variable `to`. The new
    /// variable joins the added variables if not already declared.
    pub fn promote(mut self, from: impl Into<Ident>, to: impl Into<Ident>) -> Self {
        self.spec.promotions.push(Promotion {
            from: from.into(),
            to: to.into(),
        });
        self
    }

    pub fn positive(mut self, name: impl Into<Ident>) -> Self {
        self.spec.positive.push(name.into());
        self
    }

    pub fn build(mut self) -> Result<ExtensionSpec, ModelError> {
        let base = &self.spec.base;
        for p in &self.spec.promotions {
            match base.lookup(&p.from) {
                Some((SymbolKind::Exogenous | SymbolKind::Parameter, _)) => {}
                _ => {
                    return Err(ModelError::InvalidPromotion {
                        symbol: p.from.clone(),
                        reason: "not an exogenous variable or parameter of the base model"
                            .into(),
                    })
                }
            }
            if p.to != p.from && base.lookup(&p.to).is_some() {
                return Err(ModelError::InvalidPromotion {
                    symbol: p.from.clone(),
                    reason: format!("target `{}` already names a base symbol", p.to),
                });
            }
        }
        let mut seen = BTreeSet::new();
        for p in &self.spec.promotions {
            if !seen.insert(p.from.clone()) {
                return Err(ModelError::DuplicateIdentifier(p.from.clone()));
            }
        }
        for p in self.spec.promotions.clone() {
            if !self.spec.added_variables.contains(&p.to) {
                self.spec.added_variables.push(p.to.clone());
            }
        }
        let promoted_targets: BTreeSet<&str> =
            self.spec.promotions.iter().map(|p| p.to.as_str()).collect();
        for v in &self.spec.added_variables {
            if base.lookup(v).is_some() && !promoted_targets.contains(v.as_str()) {
                return Err(ModelError::DuplicateIdentifier(v.clone()));
            }
        }
        // Full validation happens by building the merged model once.
        merged_model(&self.spec)?;
        Ok(self.spec)
    }
}

impl ExtensionSpec {
    pub fn builder(name: impl Into<Ident>, base: IncidenceModel) -> ExtensionBuilder {
        ExtensionBuilder {
            spec: ExtensionSpec {
                name: name.into(),
                base,
                added_variables: Vec::new(),
                added_exogenous: Vec::new(),
                added_parameters: Vec::new(),
                added_equations: Vec::new(),
                promotions: Vec::new(),
                positive: Vec::new(),
            },
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn base(&self) -> &IncidenceModel {
        &self.base
    }

    /// `V_+`, including promotion targets.
    pub fn added_variables(&self) -> &[Ident] {
        &self.added_variables
    }

    pub fn added_exogenous(&self) -> &[Exogenous] {
        &self.added_exogenous
    }

    pub fn added_parameters(&self) -> &[Parameter] {
        &self.added_parameters
    }

    pub fn added_equations(&self) -> &[EquationSpec] {
        &self.added_equations
    }

    pub fn promotions(&self) -> &[Promotion] {
        &self.promotions
    }

    pub fn positive(&self) -> &[Ident] {
        &self.positive
    }

    /// Map from promoted base names to their endogenous names.
    pub fn renaming(&self) -> BTreeMap<Ident, Ident> {
        self.promotions
            .iter()
            .map(|p| (p.from.clone(), p.to.clone()))
            .collect()
    }

    /// Name under which a base vertex appears in the extended model.
    pub fn extended_name<'a>(&'a self, base_name: &'a str) -> &'a str {
        self.promotions
            .iter()
            .find(|p| p.from == base_name)
            .map(|p| p.to.as_str())
            .unwrap_or(base_name)
    }
}

/// `B_+`: the added variables (promotion targets included) against the
/// added equations. Base variables occurring in added equations are treated
/// as exogenous and left out.
pub fn extension_bipartite(ext: &ExtensionSpec) -> BipartiteView {
    let renaming = ext.renaming();
    let vars = ext.added_variables.clone();
    let eqs: Vec<Ident> = ext.added_equations.iter().map(|f| f.name.clone()).collect();
    let mut edges = Vec::new();
    for (fi, f) in ext.added_equations.iter().enumerate() {
        for sym in f.body.rename(&renaming).symbols() {
            if let Some(vi) = vars.iter().position(|v| *v == sym) {
                edges.push((vi, fi));
            }
        }
    }
    BipartiteView::new(vars, eqs, &edges)
}

/// `B_ext`: base and added equations over base and added variables, with
/// promoted symbols turned into endogenous variables throughout.
pub fn merged_model(ext: &ExtensionSpec) -> Result<IncidenceModel, ModelError> {
    let renaming = ext.renaming();
    let base = ext.base.to_builder();
    let mut b = ModelBuilder::new(ext.name.clone()).variables(base.variables);
    b = b.variables(ext.added_variables.iter().cloned());
    for w in base
        .exogenous
        .into_iter()
        .filter(|w| !renaming.contains_key(&w.name))
        .chain(ext.added_exogenous.iter().cloned())
    {
        b = b.exogenous(w.name, w.law);
    }
    for p in base
        .parameters
        .into_iter()
        .filter(|p| !renaming.contains_key(&p.name))
        .chain(ext.added_parameters.iter().cloned())
    {
        b = b.parameter(p.name, p.value);
    }
    for f in base.equations.into_iter().chain(ext.added_equations.iter().cloned()) {
        b = b.equation(EquationSpec {
            name: f.name,
            body: f.body.rename(&renaming),
        });
    }
    for p in base.positive.into_iter().chain(ext.positive.iter().cloned()) {
        b = b.positive(p);
    }
    b.build()
}

/// Right-hand side of `dX/dt` in a canonical first-order system.
#[derive(Debug, Clone, PartialEq)]
pub struct Ode {
    pub variable: Ident,
    pub body: EquationBody,
}

/// First-order ODE system in canonical form, one derivative per variable.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicalModel {
    name: Ident,
    variables: Vec<Ident>,
    odes: Vec<Ode>,
    exogenous: Vec<Exogenous>,
    parameters: Vec<Parameter>,
    self_regulating: Vec<bool>,
    positive: Vec<bool>,
}

#[derive(Debug, Clone, Default)]
pub struct DynamicsBuilder {
    name: Ident,
    variables: Vec<Ident>,
    odes: Vec<Ode>,
    exogenous: Vec<Exogenous>,
    parameters: Vec<Parameter>,
    self_regulating: Vec<Ident>,
    positive: Vec<Ident>,
}

impl DynamicsBuilder {
    pub fn variable(mut self, name: impl Into<Ident>) -> Self {
        self.variables.push(name.into());
        self
    }

    pub fn exogenous(mut self, name: impl Into<Ident>, law: Option<Distribution>) -> Self {
        self.exogenous.push(Exogenous {
            name: name.into(),
            law,
        });
        self
    }

    pub fn parameter(mut self, name: impl Into<Ident>, value: Option<f64>) -> Self {
        self.parameters.push(Parameter {
            name: name.into(),
            value,
        });
        self
    }

    pub fn ode(mut self, variable: impl Into<Ident>, body: EquationBody) -> Self {
        self.odes.push(Ode {
            variable: variable.into(),
            body,
        });
        self
    }

    pub fn self_regulating(mut self, variable: impl Into<Ident>) -> Self {
        self.self_regulating.push(variable.into());
        self
    }

    pub fn positive(mut self, variable: impl Into<Ident>) -> Self {
        self.positive.push(variable.into());
        self
    }

    pub fn build(self) -> Result<DynamicalModel, ModelError> {
        let mut declared = BTreeSet::new();
        for name in self
            .variables
            .iter()
            .chain(self.exogenous.iter().map(|w| &w.name))
            .chain(self.parameters.iter().map(|p| &p.name))
        {
            if !declared.insert(name.as_str()) {
                return Err(ModelError::DuplicateIdentifier(name.clone()));
            }
        }
        for w in &self.exogenous {
            if let Some(law) = &w.law {
                law.validate(&w.name)?;
            }
        }
        let var_index = |name: &str| self.variables.iter().position(|v| v == name);
        let mut odes: Vec<Option<Ode>> = vec![None; self.variables.len()];
        for ode in &self.odes {
            let i = var_index(&ode.variable)
                .ok_or_else(|| ModelError::UnknownVariable(ode.variable.clone()))?;
            if odes[i].is_some() {
                return Err(ModelError::DuplicateOde(ode.variable.clone()));
            }
            for sym in ode.body.symbols() {
                if !declared.contains(sym.as_str()) {
                    return Err(ModelError::UnknownSymbol {
                        equation: natural_label(&ode.variable),
                        symbol: sym,
                    });
                }
            }
            odes[i] = Some(ode.clone());
        }
        let odes: Vec<Ode> = odes
            .into_iter()
            .zip(&self.variables)
            .map(|(o, v)| o.ok_or_else(|| ModelError::MissingOde(v.clone())))
            .collect::<Result<_, _>>()?;

        let mut self_regulating = vec![false; self.variables.len()];
        for v in &self.self_regulating {
            let i = var_index(v).ok_or_else(|| ModelError::UnknownVariable(v.clone()))?;
            if !odes[i].body.symbols().contains(v) {
                return Err(ModelError::SelfRegulationInconsistent(v.clone()));
            }
            self_regulating[i] = true;
        }
        let mut positive = vec![false; self.variables.len()];
        for v in &self.positive {
            let i = var_index(v).ok_or_else(|| ModelError::UnknownVariable(v.clone()))?;
            positive[i] = true;
        }
        Ok(DynamicalModel {
            name: self.name,
            variables: self.variables,
            odes,
            exogenous: self.exogenous,
            parameters: self.parameters,
            self_regulating,
            positive,
        })
    }
}

/// Natural label of the equilibrium equation derived from `dX/dt`:
/// `X_i` becomes `f_i`, any other name `v` becomes `f_v`.
pub fn natural_label(variable: &str) -> Ident {
    match variable.strip_prefix("X_") {
        Some(rest) => format!("f_{rest}"),
        None => format!("f_{variable}"),
    }
}

impl DynamicalModel {
    pub fn builder(name: impl Into<Ident>) -> DynamicsBuilder {
        DynamicsBuilder {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn variables(&self) -> &[Ident] {
        &self.variables
    }

    pub fn odes(&self) -> &[Ode] {
        &self.odes
    }

    pub fn exogenous(&self) -> &[Exogenous] {
        &self.exogenous
    }

    pub fn parameters(&self) -> &[Parameter] {
        &self.parameters
    }

    pub fn is_self_regulating(&self, variable: usize) -> bool {
        self.self_regulating[variable]
    }

    pub fn is_positive(&self, variable: usize) -> bool {
        self.positive[variable]
    }

    /// Declared positivity flags as a map, for [`equilibrium_of`].
    pub fn positivity(&self) -> BTreeMap<Ident, bool> {
        self.variables
            .iter()
            .cloned()
            .zip(self.positive.iter().copied())
            .collect()
    }

    /// Equilibrium model under the declared positivity flags.
    pub fn equilibrium(&self) -> Result<(IncidenceModel, Vec<(Ident, Ident)>), ModelError> {
        equilibrium_of(self, &self.positivity())
    }

    /// All symbols occurring in the derivative of `variable`.
    pub fn ode_symbols(&self, variable: usize) -> Vec<Ident> {
        self.odes[variable].body.symbols()
    }
}

/// Equilibrium equations of a dynamical model under the natural labelling.
///
/// For every variable with `positivity[v] == true` the derivative must have
/// the form `h(X)*X_v`; the factor `X_v` is dropped and the equation is
/// labelled `f_v+`. Also returns the natural matching edges `(v_i, f_i)`
/// that survive in the equilibrium incidence.
pub fn equilibrium_of(
    dynamics: &DynamicalModel,
    positivity: &BTreeMap<Ident, bool>,
) -> Result<(IncidenceModel, Vec<(Ident, Ident)>), ModelError> {
    for (v, on) in positivity {
        if *on && !dynamics.variables.contains(v) {
            return Err(ModelError::UnknownVariable(v.clone()));
        }
    }
    let mut b = ModelBuilder::new(dynamics.name.clone()).variables(dynamics.variables.clone());
    for w in &dynamics.exogenous {
        b = b.exogenous(w.name.clone(), w.law);
    }
    for p in &dynamics.parameters {
        b = b.parameter(p.name.clone(), p.value);
    }
    let mut labels = Vec::with_capacity(dynamics.variables.len());
    for (v, ode) in dynamics.variables.iter().zip(&dynamics.odes) {
        let reduce = positivity.get(v).copied().unwrap_or(false);
        let (label, body) = if reduce {
            let reduced = match &ode.body {
                EquationBody::Residual(e) => e.divide_out_symbol(v),
                EquationBody::Depends(_) => None,
            }
            .ok_or_else(|| ModelError::NotFactorable {
                variable: v.clone(),
            })?;
            b = b.positive(v.clone());
            (
                format!("{}+", natural_label(v)),
                EquationBody::Residual(reduced),
            )
        } else {
            (natural_label(v), ode.body.clone())
        };
        labels.push(label.clone());
        b = b.equation(EquationSpec { name: label, body });
    }
    let model = b.build()?;
    let natural = model
        .equations
        .iter()
        .enumerate()
        .filter(|(i, f)| f.variables.contains(i))
        .map(|(i, _)| (dynamics.variables[i].clone(), labels[i].clone()))
        .collect();
    Ok((model, natural))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::BinOp;

    fn s(n: &str) -> Expr {
        Expr::sym(n)
    }

    fn intro() -> IncidenceModel {
        IncidenceModel::builder("intro")
            .variables(["v1", "v2"])
            .exogenous("w1", None)
            .exogenous("w2", None)
            .parameter("p1", Some(2.0))
            .parameter("p2", Some(0.5))
            .equation(EquationSpec::depends("f1", ["p1", "v1", "w1"]))
            .equation(EquationSpec::depends("f2", ["p2", "v2", "v1", "w2"]))
            .build()
            .unwrap()
    }

    #[test]
    fn intro_bipartite_edges() {
        let view = bipartite_of(&intro());
        let edges = view.named_edges();
        let expected: Vec<(Ident, Ident)> = [("v1", "f1"), ("v1", "f2"), ("v2", "f2")]
            .iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect();
        assert_eq!(edges, expected);
        assert_eq!(intro().exo_edges(), vec![("w1", "f1"), ("w2", "f2")]);
    }

    #[test]
    fn empty_model_has_empty_view() {
        let m = IncidenceModel::builder("empty").build().unwrap();
        let v = bipartite_of(&m);
        assert_eq!(v.n_variables(), 0);
        assert_eq!(v.n_equations(), 0);
        assert!(v.edges().is_empty());
    }

    #[test]
    fn identifiers_must_be_disjoint() {
        let err = IncidenceModel::builder("m")
            .variable("x")
            .exogenous("x", None)
            .build()
            .unwrap_err();
        assert_eq!(err, ModelError::DuplicateIdentifier("x".into()));
    }

    #[test]
    fn undeclared_symbol_is_rejected() {
        let err = IncidenceModel::builder("m")
            .variable("x")
            .equation(EquationSpec::depends("f", ["x", "y"]))
            .build()
            .unwrap_err();
        assert!(matches!(err, ModelError::UnknownSymbol { symbol, .. } if symbol == "y"));
    }

    #[test]
    fn distributions_need_positive_support() {
        assert!(Distribution::Uniform { lo: 0.0, hi: 1.0 }.validate("u").is_err());
        assert!(Distribution::Uniform { lo: 0.5, hi: 1.0 }.validate("u").is_ok());
        assert!(Distribution::LogNormal { mu: -1.0, sigma: 0.0 }.validate("u").is_err());
    }

    #[test]
    fn extension_with_no_overlap_is_disjoint_union() {
        let ext = ExtensionSpec::builder("ext", intro())
            .variable("z")
            .exogenous("u", None)
            .equation(EquationSpec::depends("g", ["z", "u"]))
            .build()
            .unwrap();
        let merged = merged_model(&ext).unwrap();
        let mut expected = bipartite_of(&intro()).named_edges();
        expected.push(("z".into(), "g".into()));
        assert_eq!(bipartite_of(&merged).named_edges(), expected);
        let plus = extension_bipartite(&ext);
        assert_eq!(plus.named_edges(), vec![("z".to_string(), "g".to_string())]);
    }

    #[test]
    fn empty_extension_has_empty_extension_graph() {
        let ext = ExtensionSpec::builder("noop", intro()).build().unwrap();
        let plus = extension_bipartite(&ext);
        assert_eq!((plus.n_variables(), plus.n_equations()), (0, 0));
    }

    #[test]
    fn promotion_turns_exogenous_edge_into_variable_edge() {
        let ext = ExtensionSpec::builder("ext", intro())
            .promote("w2", "v3")
            .equation(EquationSpec::depends("f3", ["v3", "v2"]))
            .build()
            .unwrap();
        let merged = merged_model(&ext).unwrap();
        assert!(merged.var_edges().contains(&("v3", "f2")));
        assert!(merged.exogenous().iter().all(|w| w.name != "w2"));
        let plus = extension_bipartite(&ext);
        assert_eq!(plus.named_edges(), vec![("v3".to_string(), "f3".to_string())]);
    }

    #[test]
    fn bad_promotions_and_collisions_are_rejected() {
        let err = ExtensionSpec::builder("ext", intro())
            .promote("v1", "v9")
            .build()
            .unwrap_err();
        assert!(matches!(err, ModelError::InvalidPromotion { .. }));
        let err = ExtensionSpec::builder("ext", intro())
            .variable("v1")
            .build()
            .unwrap_err();
        assert_eq!(err, ModelError::DuplicateIdentifier("v1".into()));
        let err = ExtensionSpec::builder("ext", intro())
            .variable("z")
            .equation(EquationSpec::depends("f1", ["z"]))
            .build()
            .unwrap_err();
        assert_eq!(err, ModelError::DuplicateIdentifier("f1".into()));
    }

    fn one_var_decay() -> DynamicalModel {
        // dx/dt = -x + u
        DynamicalModel::builder("decay")
            .variable("x")
            .exogenous("u", None)
            .ode(
                "x",
                EquationBody::Residual(Expr::binary(BinOp::Add, Expr::neg(s("x")), s("u"))),
            )
            .self_regulating("x")
            .build()
            .unwrap()
    }

    #[test]
    fn one_variable_ode_equilibrium() {
        let (m, nat) = one_var_decay().equilibrium().unwrap();
        assert_eq!(m.var_edges(), vec![("x", "f_x")]);
        assert_eq!(nat, vec![("x".to_string(), "f_x".to_string())]);
    }

    #[test]
    fn positivity_requires_factored_form() {
        let mut flags = BTreeMap::new();
        flags.insert("x".to_string(), true);
        let err = equilibrium_of(&one_var_decay(), &flags).unwrap_err();
        assert_eq!(err, ModelError::NotFactorable { variable: "x".into() });
    }

    #[test]
    fn selfreg_needs_own_variable() {
        let err = DynamicalModel::builder("d")
            .variable("x")
            .exogenous("u", None)
            .ode("x", EquationBody::Depends(vec!["u".into()]))
            .self_regulating("x")
            .build()
            .unwrap_err();
        assert_eq!(err, ModelError::SelfRegulationInconsistent("x".into()));
        let err = DynamicalModel::builder("d")
            .variable("x")
            .variable("y")
            .ode("x", EquationBody::Depends(vec!["x".into()]))
            .build()
            .unwrap_err();
        assert_eq!(err, ModelError::MissingOde("y".into()));
    }
}
