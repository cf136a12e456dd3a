//! The `.cmf` model description language.
//!
//! ```text
//! file      = { block } ;
//! block     = ( "model" | "dynamics" ) IDENT "{" { item } "}"
//!           | "extend" IDENT "of" IDENT "{" { item } "}" ;
//! item      = ( "var" names
//!             | "exo" names [ "~" IDENT "(" number { "," number } ")" ]
//!             | "param" IDENT [ "=" number ] { "," IDENT [ "=" number ] }
//!             | "eq" IDENT [ "+" ] ":" ( expr "=" expr | depends )
//!             | "ddt" IDENT ( "=" expr | depends )
//!             | "selfreg" names | "positive" names
//!             | "promote" IDENT [ "->" IDENT ] ) [ ";" ] ;
//! depends   = "depends" "(" [ names ] ")" ;
//! names     = IDENT { "," IDENT } ;
//! expr      = term { ( "+" | "-" ) term } ;
//! term      = unary { ( "*" | "/" ) unary } ;
//! unary     = "-" unary | power ;
//! power     = atom [ "^" unary ] ;
//! atom      = NUMBER | IDENT | "(" expr ")" ;
//! number    = [ "-" ] NUMBER ;
//! ```
//!
//! `#` starts a comment running to the end of the line. Line breaks carry no
//! meaning.

mod lexer;
mod serialize;
mod syntax;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

use crate::expr::{BinOp, Expr};
use crate::model::{
    merged_model, Distribution, DynamicalModel, EquationBody, EquationSpec, ExtensionSpec,
    IncidenceModel, ModelBuilder, ModelError,
};

pub use serialize::to_cmf;
pub use syntax::{parse_expr, parse_file, Block, BlockKind, BodySyntax, Item, ModelFile, Name};

/// 1-based source position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{pos}: {message}")]
pub struct ParseError {
    pub pos: Pos,
    pub message: String,
}

fn err_at<T>(pos: Pos, message: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError {
        pos,
        message: message.into(),
    })
}

/// Every block of a file after lowering.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModelSet {
    pub models: Vec<IncidenceModel>,
    pub extensions: Vec<ExtensionSpec>,
    pub dynamics: Vec<DynamicalModel>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LookupError {
    #[error("no block named `{0}`")]
    NotFound(String),
    #[error("`{name}` is a {found} block, expected {wanted}")]
    WrongKind {
        name: String,
        found: &'static str,
        wanted: &'static str,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl ModelSet {
    pub fn model(&self, name: &str) -> Option<&IncidenceModel> {
        self.models.iter().find(|m| m.name() == name)
    }

    pub fn extension(&self, name: &str) -> Option<&ExtensionSpec> {
        self.extensions.iter().find(|e| e.name() == name)
    }

    pub fn dynamical(&self, name: &str) -> Option<&DynamicalModel> {
        self.dynamics.iter().find(|d| d.name() == name)
    }

    fn kind_of(&self, name: &str) -> Option<&'static str> {
        if self.model(name).is_some() {
            Some("model")
        } else if self.extension(name).is_some() {
            Some("extend")
        } else if self.dynamical(name).is_some() {
            Some("dynamics")
        } else {
            None
        }
    }

    /// The equation system a block stands for: a model as written, an
    /// extension merged with its base, or the equilibrium equations of a
    /// dynamical model under its declared positivity flags.
    pub fn incidence_model(&self, name: &str) -> Result<IncidenceModel, LookupError> {
        if let Some(m) = self.model(name) {
            return Ok(m.clone());
        }
        if let Some(e) = self.extension(name) {
            return Ok(merged_model(e)?);
        }
        if let Some(d) = self.dynamical(name) {
            return Ok(d.equilibrium()?.0);
        }
        Err(LookupError::NotFound(name.to_string()))
    }

    pub fn require_extension(&self, name: &str) -> Result<&ExtensionSpec, LookupError> {
        self.extension(name).ok_or_else(|| self.wrong(name, "an extend block"))
    }

    pub fn require_dynamics(&self, name: &str) -> Result<&DynamicalModel, LookupError> {
        self.dynamical(name).ok_or_else(|| self.wrong(name, "a dynamics block"))
    }

    fn wrong(&self, name: &str, wanted: &'static str) -> LookupError {
        match self.kind_of(name) {
            Some(found) => LookupError::WrongKind {
                name: name.to_string(),
                found,
                wanted,
            },
            None => LookupError::NotFound(name.to_string()),
        }
    }

    /// Block names in file-kind order: models, extensions, dynamics.
    pub fn names(&self) -> Vec<&str> {
        self.models
            .iter()
            .map(|m| m.name())
            .chain(self.extensions.iter().map(|e| e.name()))
            .chain(self.dynamics.iter().map(|d| d.name()))
            .collect()
    }
}

/// Parses and lowers a document.
pub fn parse(src: &str) -> Result<ModelSet, ParseError> {
    lower(&parse_file(src)?)
}

fn residual_of(lhs: &Expr, rhs: &Expr) -> Expr {
    match rhs {
        Expr::Num(x) if *x == 0.0 => lhs.clone(),
        _ => Expr::binary(BinOp::Sub, lhs.clone(), rhs.clone()),
    }
}

fn body_of(body: &BodySyntax) -> EquationBody {
    match body {
        BodySyntax::Equals(l, r) => EquationBody::Residual(residual_of(l, r)),
        BodySyntax::Depends(names) => {
            EquationBody::Depends(names.iter().map(|n| n.text.clone()).collect())
        }
    }
}

fn body_symbols(body: &BodySyntax) -> Vec<(String, Pos)> {
    match body {
        BodySyntax::Equals(l, r) => l
            .symbols_in_order()
            .into_iter()
            .chain(r.symbols_in_order())
            .map(|s| (s, Pos::default()))
            .collect(),
        BodySyntax::Depends(names) => names.iter().map(|n| (n.text.clone(), n.pos)).collect(),
    }
}

fn law_of(law: &syntax::LawSyntax, symbol: &str) -> Result<Distribution, ParseError> {
    let pos = law.family.pos;
    let d = match (law.family.text.as_str(), law.args.as_slice()) {
        ("LogNormal", &[mu, sigma]) => Distribution::LogNormal { mu, sigma },
        ("Uniform", &[lo, hi]) => Distribution::Uniform { lo, hi },
        ("LogNormal" | "Uniform", args) => {
            return err_at(pos, format!("`{}` takes 2 arguments, got {}", law.family.text, args.len()))
        }
        (other, _) => {
            return err_at(
                pos,
                format!("unknown distribution `{other}` (expected LogNormal or Uniform)"),
            )
        }
    };
    d.validate(symbol).map_err(|e| ParseError {
        pos,
        message: e.to_string(),
    })?;
    Ok(d)
}

/// Declarations collected from a block, with positions for diagnostics.
#[derive(Default)]
struct Scope {
    declared: HashMap<String, Pos>,
    variables: Vec<String>,
    exogenous: Vec<(String, Option<Distribution>)>,
    parameters: Vec<(String, Option<f64>)>,
}

impl Scope {
    fn declare(&mut self, name: &Name) -> Result<(), ParseError> {
        if let Some(prev) = self.declared.get(&name.text) {
            return err_at(
                name.pos,
                format!("`{}` is already declared at {prev}", name.text),
            );
        }
        self.declared.insert(name.text.clone(), name.pos);
        Ok(())
    }

    /// Collects `var`, `exo` and `param` items.
    fn collect(block: &Block) -> Result<Scope, ParseError> {
        let mut scope = Scope::default();
        for (_, item) in &block.items {
            match item {
                Item::Var(names) => {
                    for n in names {
                        scope.declare(n)?;
                        scope.variables.push(n.text.clone());
                    }
                }
                Item::Exo(names, law) => {
                    for n in names {
                        scope.declare(n)?;
                        let law = law.as_ref().map(|l| law_of(l, &n.text)).transpose()?;
                        scope.exogenous.push((n.text.clone(), law));
                    }
                }
                Item::Param(params) => {
                    for (n, value) in params {
                        scope.declare(n)?;
                        scope.parameters.push((n.text.clone(), *value));
                    }
                }
                _ => {}
            }
        }
        Ok(scope)
    }
}

fn check_symbols(
    body: &BodySyntax,
    item_pos: Pos,
    owner: &str,
    known: &dyn Fn(&str) -> bool,
) -> Result<(), ParseError> {
    for (sym, pos) in body_symbols(body) {
        if !known(&sym) {
            let at = if pos == Pos::default() { item_pos } else { pos };
            return err_at(at, format!("`{owner}` refers to undeclared symbol `{sym}`"));
        }
    }
    Ok(())
}

fn model_error(pos: Pos, e: ModelError) -> ParseError {
    ParseError {
        pos,
        message: e.to_string(),
    }
}

/// Resolves names and builds model-core values from a parsed file.
pub fn lower(file: &ModelFile) -> Result<ModelSet, ParseError> {
    let mut seen: HashMap<&str, Pos> = HashMap::new();
    for b in &file.blocks {
        if let Some(prev) = seen.insert(&b.name.text, b.name.pos) {
            return err_at(
                b.name.pos,
                format!("block `{}` is already defined at {prev}", b.name.text),
            );
        }
    }
    let mut set = ModelSet::default();
    for b in file.blocks.iter().filter(|b| b.kind == BlockKind::Model) {
        set.models.push(lower_model(b)?);
    }
    for b in file.blocks.iter().filter(|b| b.kind == BlockKind::Extend) {
        let base_name = b.base.as_ref().expect("extend blocks name a base");
        let base = set.model(&base_name.text).cloned().ok_or_else(|| ParseError {
            pos: base_name.pos,
            message: format!("`{}` is not a model block", base_name.text),
        })?;
        set.extensions.push(lower_extension(b, base)?);
    }
    for b in file.blocks.iter().filter(|b| b.kind == BlockKind::Dynamics) {
        set.dynamics.push(lower_dynamics(b)?);
    }
    Ok(set)
}

fn lower_model(block: &Block) -> Result<IncidenceModel, ParseError> {
    let mut scope = Scope::collect(block)?;
    let mut builder = ModelBuilder::new(block.name.text.clone())
        .variables(scope.variables.iter().cloned());
    for (w, law) in &scope.exogenous {
        builder = builder.exogenous(w.clone(), *law);
    }
    for (p, value) in &scope.parameters {
        builder = builder.parameter(p.clone(), *value);
    }
    let symbols: BTreeSet<String> = scope.declared.keys().cloned().collect();
    for (pos, item) in &block.items {
        match item {
            Item::Eq { name, body } => {
                scope.declare(name)?;
                check_symbols(body, *pos, &name.text, &|s| symbols.contains(s))?;
                builder = builder.equation(EquationSpec {
                    name: name.text.clone(),
                    body: body_of(body),
                });
            }
            Item::Positive(names) => {
                for n in names {
                    if !scope.variables.contains(&n.text) {
                        return err_at(n.pos, format!("`{}` is not a declared variable", n.text));
                    }
                    builder = builder.positive(n.text.clone());
                }
            }
            _ => {}
        }
    }
    builder.build().map_err(|e| model_error(block.name.pos, e))
}

fn lower_extension(block: &Block, base: IncidenceModel) -> Result<ExtensionSpec, ParseError> {
    let mut scope = Scope::collect(block)?;
    let promoted: BTreeSet<&str> = block
        .items
        .iter()
        .filter_map(|(_, item)| match item {
            Item::Promote { from, to } => Some(to.as_ref().unwrap_or(from).text.as_str()),
            _ => None,
        })
        .collect();
    for v in &scope.variables {
        if base.lookup(v).is_some() && !promoted.contains(v.as_str()) {
            return err_at(
                scope.declared[v],
                format!("`{v}` is already declared in base model `{}`", base.name()),
            );
        }
    }
    let mut builder = ExtensionSpec::builder(block.name.text.clone(), base.clone());
    for v in &scope.variables {
        builder = builder.variable(v.clone());
    }
    for (w, law) in &scope.exogenous {
        builder = builder.exogenous(w.clone(), *law);
    }
    for (p, value) in &scope.parameters {
        builder = builder.parameter(p.clone(), *value);
    }
    let mut targets: BTreeMap<String, Pos> = BTreeMap::new();
    for (pos, item) in &block.items {
        if let Item::Promote { from, to } = item {
            let to = to.as_ref().unwrap_or(from);
            if base.lookup(&from.text).is_none() {
                return err_at(from.pos, format!("`{}` is not declared in base model `{}`", from.text, base.name()));
            }
            targets.insert(to.text.clone(), *pos);
            builder = builder.promote(from.text.clone(), to.text.clone());
        }
    }
    let known = |s: &str| {
        scope.declared.contains_key(s) || base.lookup(s).is_some() || targets.contains_key(s)
    };
    let mut eq_names: Vec<Name> = Vec::new();
    for (pos, item) in &block.items {
        match item {
            Item::Eq { name, body } => {
                check_symbols(body, *pos, &name.text, &known)?;
                eq_names.push(name.clone());
                builder = builder.equation(EquationSpec {
                    name: name.text.clone(),
                    body: body_of(body),
                });
            }
            Item::Positive(names) => {
                for n in names {
                    if !scope.variables.contains(&n.text) && !targets.contains_key(&n.text) {
                        return err_at(n.pos, format!("`{}` is not a variable of this extension", n.text));
                    }
                    builder = builder.positive(n.text.clone());
                }
            }
            _ => {}
        }
    }
    for n in &eq_names {
        scope.declare(n)?;
        if base.lookup(&n.text).is_some() {
            return err_at(n.pos, format!("`{}` is already declared in base model `{}`", n.text, base.name()));
        }
    }
    builder.build().map_err(|e| model_error(block.name.pos, e))
}

fn lower_dynamics(block: &Block) -> Result<DynamicalModel, ParseError> {
    let scope = Scope::collect(block)?;
    let mut builder = DynamicalModel::builder(block.name.text.clone());
    for v in &scope.variables {
        builder = builder.variable(v.clone());
    }
    for (w, law) in &scope.exogenous {
        builder = builder.exogenous(w.clone(), *law);
    }
    for (p, value) in &scope.parameters {
        builder = builder.parameter(p.clone(), *value);
    }
    let mut odes: HashMap<&str, (Pos, Vec<String>)> = HashMap::new();
    for (pos, item) in &block.items {
        if let Item::Ddt { var, body } = item {
            if !scope.variables.contains(&var.text) {
                return err_at(var.pos, format!("`{}` is not a declared variable", var.text));
            }
            if odes.contains_key(var.text.as_str()) {
                return err_at(*pos, format!("`{}` already has a time derivative", var.text));
            }
            let owner = format!("d{}/dt", var.text);
            check_symbols(body, *pos, &owner, &|s| scope.declared.contains_key(s))?;
            odes.insert(
                &var.text,
                (*pos, body_symbols(body).into_iter().map(|(s, _)| s).collect()),
            );
            builder = builder.ode(var.text.clone(), body_of(body));
        }
    }
    for v in &scope.variables {
        if !odes.contains_key(v.as_str()) {
            return err_at(scope.declared[v], format!("`{v}` has no time derivative (`ddt {v} = ...`)"));
        }
    }
    for (_, item) in &block.items {
        match item {
            Item::Selfreg(names) => {
                for n in names {
                    match odes.get(n.text.as_str()) {
                        None => {
                            return err_at(n.pos, format!("`{}` is not a declared variable", n.text))
                        }
                        Some((_, syms)) if !syms.contains(&n.text) => {
                            return err_at(
                                n.pos,
                                format!(
                                    "`{}` is marked self-regulating but does not occur in its own time derivative",
                                    n.text
                                ),
                            )
                        }
                        Some(_) => builder = builder.self_regulating(n.text.clone()),
                    }
                }
            }
            Item::Positive(names) => {
                for n in names {
                    if !scope.variables.contains(&n.text) {
                        return err_at(n.pos, format!("`{}` is not a declared variable", n.text));
                    }
                    builder = builder.positive(n.text.clone());
                }
            }
            _ => {}
        }
    }
    let dynamics = builder.build().map_err(|e| model_error(block.name.pos, e))?;
    // Surface factorization problems at parse time rather than at first use.
    dynamics
        .equilibrium()
        .map_err(|e| model_error(block.name.pos, e))?;
    Ok(dynamics)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = "
        model viral_basic {
          var X_T, X_I
          exo U_sigma, U_f, U_delta
          param d_T = 0.05, beta = 1
          eq f_T: U_sigma - d_T*X_T - beta*X_T*X_I = 0
          eq f_I+: U_f*beta*X_T - U_delta = 0
          positive X_I
        }";

    #[test]
    fn lowers_viral_basic() {
        let set = parse(BASIC).unwrap();
        let m = set.model("viral_basic").unwrap();
        assert_eq!(m.variables().len(), 2);
        assert_eq!(m.exogenous().len(), 3);
        assert_eq!(m.parameters().len(), 2);
        assert_eq!(m.equations().len(), 2);
        assert_eq!(m.var_edges(), vec![("X_T", "f_T"), ("X_T", "f_I+"), ("X_I", "f_T")]);
        assert_eq!(m.exo_edges(), vec![("U_sigma", "f_T"), ("U_f", "f_I+"), ("U_delta", "f_I+")]);
        assert_eq!(
            m.param_edges(),
            vec![("d_T", "f_T"), ("beta", "f_T"), ("beta", "f_I+")]
        );
    }

    #[test]
    fn structure_only_equation() {
        let set = parse("model m { var X_a; exo U_b; eq f: depends(X_a, U_b) }").unwrap();
        let m = set.model("m").unwrap();
        assert!(m.equations()[0].residual.is_none());
        assert_eq!(m.exo_edges(), vec![("U_b", "f")]);
    }

    #[test]
    fn undeclared_symbol_is_located() {
        let err = parse("model m {\n var x\n eq f: x - y = 0\n}").unwrap_err();
        assert_eq!(err.pos, Pos { line: 3, col: 2 });
        assert!(err.message.contains("`y`"));
        let err = parse("model m { var x; eq f: depends(x,\n q) }").unwrap_err();
        assert_eq!(err.pos, Pos { line: 2, col: 2 });
    }

    #[test]
    fn duplicates_are_located() {
        let err = parse("model m { var x\n exo x }").unwrap_err();
        assert_eq!(err.pos, Pos { line: 2, col: 6 });
        let err = parse("model m { }\nmodel m { }").unwrap_err();
        assert_eq!(err.pos.line, 2);
    }

    #[test]
    fn selfreg_must_appear_in_own_derivative() {
        let err = parse("dynamics d { var x; exo u; ddt x = u; selfreg x }").unwrap_err();
        assert!(err.message.contains("self-regulating"));
    }

    #[test]
    fn extension_must_name_a_model() {
        let err = parse("extend e of nowhere { }").unwrap_err();
        assert!(err.message.contains("not a model block"));
    }

    #[test]
    fn distributions_are_checked() {
        let err = parse("model m { exo u ~ Uniform(-1, 1) }").unwrap_err();
        assert!(err.message.contains("Uniform"));
        let err = parse("model m { exo u ~ Gamma(1, 1) }").unwrap_err();
        assert!(err.message.contains("unknown distribution"));
        let set = parse("model m { exo u, v ~ LogNormal(-0.5, 0.1) }").unwrap();
        assert_eq!(
            set.model("m").unwrap().exogenous()[1].law,
            Some(Distribution::LogNormal { mu: -0.5, sigma: 0.1 })
        );
    }

    #[test]
    fn round_trip_through_serializer() {
        let set = parse(BASIC).unwrap();
        let text = to_cmf(&set);
        assert_eq!(parse(&text).unwrap(), set, "{text}");
    }
}
