//! Sampling equilibria and testing the independences a Markov ordering
//! graph predicts.
//!
//! Each draw samples the exogenous inputs from their laws, then solves the
//! residual system by damped Newton from several positive starting points.
//! When a dynamical model is supplied, draws Newton cannot solve are
//! integrated to steady state and polished. Draw `i` uses a ChaCha8 stream
//! derived from `(seed, i)`, so results do not depend on scheduling.

mod newton;
mod ode;
mod pattern;
mod stats;

use std::fmt::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, LogNormal, Uniform};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::expr::CompiledExpr;
use crate::model::{Distribution, DynamicalModel, EquationBody, Ident, IncidenceModel};
use crate::num::Scalar;

pub use newton::{default_tolerance, lu_solve, NewtonFailure, NewtonSolution, NewtonSolver};
pub use ode::SteadyState;
pub use pattern::{pattern_check, pattern_check_with, pattern_from_samples, PatternOptions, PatternReport, PatternRow};
pub use stats::{
    rank, test_independence, test_independence_with, IndependenceVerdict, Method, TestOptions,
    DEFAULT_ALPHA, DEFAULT_PERMUTATIONS,
};

/// Positive multiples of the all-ones vector tried as Newton starting points.
pub const START_SCALES: [f64; 5] = [1.0, 0.5, 2.0, 0.2, 5.0];

/// Largest fraction of failed draws tolerated before sampling is abandoned.
pub const MAX_FAILURE_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LabError {
    #[error("equation `{0}` has no residual expression")]
    MissingResidual(String),
    #[error("parameter `{0}` has no value")]
    MissingParameterValue(String),
    #[error("invalid distribution for `{symbol}`: {reason}")]
    InvalidDistribution { symbol: String, reason: String },
    #[error("dynamics `{dynamics}` cannot back model `{model}`: {reason}")]
    DynamicsMismatch {
        model: String,
        dynamics: String,
        reason: String,
    },
    #[error("{failed} of {total} draws did not reach an admissible equilibrium")]
    TooManyFailures { failed: usize, total: usize },
    #[error("no column named `{0}`")]
    UnknownColumn(String),
    #[error("column `{0}` is constant")]
    ConstantColumn(String),
    #[error("conditioning sets are limited to 2 variables, got {0}")]
    ConditioningTooLarge(usize),
    #[error("`{0}` appears more than once in the query")]
    RepeatedColumn(String),
    #[error("need at least {needed} converged draws, have {have}")]
    TooFewDraws { needed: usize, have: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DrawStatus {
    /// Newton converged from the start point with this index into
    /// [`START_SCALES`].
    Newton { start: usize },
    /// Integration of the dynamics reached a steady state that Newton then
    /// polished.
    Steady,
    /// No admissible root was found.
    Failed,
}

impl DrawStatus {
    pub fn converged(self) -> bool {
        !matches!(self, DrawStatus::Failed)
    }

    fn label(self) -> &'static str {
        match self {
            DrawStatus::Newton { .. } => "newton",
            DrawStatus::Steady => "steady",
            DrawStatus::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Draw<T> {
    pub exogenous: Vec<T>,
    /// Equilibrium values, absent when the draw failed.
    pub variables: Option<Vec<T>>,
    /// Largest absolute residual at the reported equilibrium.
    pub residual: Option<T>,
    pub status: DrawStatus,
}

/// Sampled exogenous inputs and the equilibria they induce.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleSet<T> {
    pub model: Ident,
    pub seed: u64,
    pub exogenous: Vec<Ident>,
    pub variables: Vec<Ident>,
    pub draws: Vec<Draw<T>>,
}

impl<T: Scalar> SampleSet<T> {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn converged(&self) -> impl Iterator<Item = &Draw<T>> {
        self.draws.iter().filter(|d| d.status.converged())
    }

    pub fn n_converged(&self) -> usize {
        self.converged().count()
    }

    pub fn n_failed(&self) -> usize {
        self.len() - self.n_converged()
    }

    /// Identifiers in column order: exogenous first, then endogenous.
    pub fn columns(&self) -> Vec<&str> {
        self.exogenous
            .iter()
            .chain(&self.variables)
            .map(String::as_str)
            .collect()
    }

    /// Values of a column over converged draws, in draw order.
    pub fn column(&self, name: &str) -> Result<Vec<T>, LabError> {
        if let Some(i) = self.exogenous.iter().position(|w| w == name) {
            return Ok(self.converged().map(|d| d.exogenous[i]).collect());
        }
        if let Some(i) = self.variables.iter().position(|v| v == name) {
            return Ok(self
                .converged()
                .map(|d| d.variables.as_ref().expect("converged draws carry values")[i])
                .collect());
        }
        Err(LabError::UnknownColumn(name.to_string()))
    }

    /// CSV with one row per draw. The header lists the identifiers followed by
    /// a `status` column; endogenous fields are empty for failed draws.
    pub fn to_csv(&self) -> String {
        let mut out = self.columns().join(",");
        out.push_str(",status\n");
        for d in &self.draws {
            let mut fields: Vec<String> = d.exogenous.iter().map(|v| v.to_string()).collect();
            match &d.variables {
                Some(vals) => fields.extend(vals.iter().map(|v| v.to_string())),
                None => fields.extend(std::iter::repeat_n(String::new(), self.variables.len())),
            }
            fields.push(d.status.label().to_string());
            let _ = writeln!(out, "{}", fields.join(","));
        }
        out
    }
}

impl<T: Scalar + Serialize> SampleSet<T> {
    pub fn to_json(&self) -> String {
        crate::export::to_pretty(self)
    }
}

/// Knobs for [`sample_equilibria_with`].
#[derive(Debug, Clone, Copy)]
pub struct SampleOptions<'a, T> {
    pub solver: NewtonSolver<T>,
    /// Dynamics used for the steady-state fallback. Its variables must be the
    /// model's variables and its exogenous symbols must be among the model's.
    pub dynamics: Option<&'a DynamicalModel>,
    pub steady_state: SteadyState<T>,
    pub max_failure_fraction: f64,
}

impl<T: Scalar> Default for SampleOptions<'_, T> {
    fn default() -> Self {
        SampleOptions {
            solver: NewtonSolver::default(),
            dynamics: None,
            steady_state: SteadyState::default(),
            max_failure_fraction: MAX_FAILURE_FRACTION,
        }
    }
}

/// Residual system `F(x; u) = 0` compiled against `[x | u | p]` slots.
struct Compiled<T> {
    programs: Vec<CompiledExpr>,
    n_vars: usize,
    params: Vec<T>,
}

impl<T: Scalar> Compiled<T> {
    fn eval(&self, x: &[T], exo: &[T], out: &mut [T], slots: &mut Vec<T>, stack: &mut Vec<T>) {
        slots.clear();
        slots.extend_from_slice(x);
        slots.extend_from_slice(exo);
        slots.extend_from_slice(&self.params);
        for (o, p) in out.iter_mut().zip(&self.programs) {
            *o = p.eval(slots, stack);
        }
    }
}

fn compile_model<T: Scalar>(model: &IncidenceModel) -> Result<Compiled<T>, LabError> {
    let params = model
        .parameters()
        .iter()
        .map(|p| {
            p.value
                .map(T::lit)
                .ok_or_else(|| LabError::MissingParameterValue(p.name.clone()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let n_vars = model.variables().len();
    let n_exo = model.exogenous().len();
    let slot_of = |s: &str| -> Option<usize> {
        use crate::model::SymbolKind::*;
        match model.lookup(s)? {
            (Variable, i) => Some(i),
            (Exogenous, i) => Some(n_vars + i),
            (Parameter, i) => Some(n_vars + n_exo + i),
            (Equation, _) => None,
        }
    };
    let programs = model
        .equations()
        .iter()
        .map(|f| {
            let expr = f
                .residual
                .as_ref()
                .ok_or_else(|| LabError::MissingResidual(f.name.clone()))?;
            Ok(expr.compile(slot_of).expect("model symbols are resolved at build time"))
        })
        .collect::<Result<Vec<_>, LabError>>()?;
    Ok(Compiled {
        programs,
        n_vars,
        params,
    })
}

/// Dynamics rewritten onto the model's variable and exogenous order.
fn compile_dynamics<T: Scalar>(
    model: &IncidenceModel,
    dynamics: &DynamicalModel,
) -> Result<Compiled<T>, LabError> {
    let mismatch = |reason: String| LabError::DynamicsMismatch {
        model: model.name().to_string(),
        dynamics: dynamics.name().to_string(),
        reason,
    };
    let mut dv: Vec<&str> = dynamics.variables().iter().map(String::as_str).collect();
    let mut mv: Vec<&str> = model.variables().iter().map(String::as_str).collect();
    dv.sort_unstable();
    mv.sort_unstable();
    if dv != mv {
        return Err(mismatch("variable sets differ".into()));
    }
    let n_vars = model.variables().len();
    let n_exo = model.exogenous().len();
    let mut params = Vec::new();
    for p in dynamics.parameters() {
        params.push(T::lit(p.value.ok_or_else(|| LabError::MissingParameterValue(p.name.clone()))?));
    }
    let slot_of = |s: &str| -> Option<usize> {
        if let Some(i) = model.variables().iter().position(|v| v == s) {
            return Some(i);
        }
        if let Some(i) = dynamics.parameters().iter().position(|p| p.name == s) {
            return Some(n_vars + n_exo + i);
        }
        model.exogenous().iter().position(|w| w.name == s).map(|i| n_vars + i)
    };
    let mut programs = Vec::with_capacity(n_vars);
    for v in model.variables() {
        let ode = dynamics
            .odes()
            .iter()
            .find(|o| &o.variable == v)
            .expect("variable sets were compared");
        let expr = match &ode.body {
            EquationBody::Residual(e) => e,
            EquationBody::Depends(_) => {
                return Err(mismatch(format!("derivative of `{v}` has no expression")))
            }
        };
        programs.push(expr.compile(slot_of).map_err(|s| {
            mismatch(format!("`{s}` in the derivative of `{v}` is not a model exogenous symbol"))
        })?);
    }
    Ok(Compiled {
        programs,
        n_vars,
        params,
    })
}

fn sample_law(law: Distribution, rng: &mut ChaCha8Rng) -> f64 {
    match law {
        Distribution::LogNormal { mu, sigma } => LogNormal::new(mu, sigma)
            .expect("validated distribution")
            .sample(rng),
        Distribution::Uniform { lo, hi } => Uniform::new(lo, hi)
            .expect("validated distribution")
            .sample(rng),
    }
}

fn validate_laws(model: &IncidenceModel) -> Result<Vec<Distribution>, LabError> {
    model
        .exogenous()
        .iter()
        .map(|w| {
            let law = w.law.unwrap_or(Distribution::DEFAULT);
            law.validate(&w.name)
                .map_err(|e| LabError::InvalidDistribution {
                    symbol: w.name.clone(),
                    reason: e.to_string(),
                })?;
            Ok(law)
        })
        .collect()
}

/// Samples `n` equilibria with default options.
pub fn sample_equilibria<T: Scalar>(
    model: &IncidenceModel,
    n: usize,
    seed: u64,
) -> Result<SampleSet<T>, LabError> {
    sample_equilibria_with(model, n, seed, &SampleOptions::default())
}

pub fn sample_equilibria_with<T: Scalar>(
    model: &IncidenceModel,
    n: usize,
    seed: u64,
    options: &SampleOptions<'_, T>,
) -> Result<SampleSet<T>, LabError> {
    let laws = validate_laws(model)?;
    let system = compile_model::<T>(model)?;
    let flow = options
        .dynamics
        .map(|d| compile_dynamics::<T>(model, d))
        .transpose()?;
    let positive: Vec<usize> = (0..system.n_vars).filter(|&i| model.is_positive(i)).collect();
    let draws: Vec<Draw<T>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let exo: Vec<T> = laws.iter().map(|&l| T::lit(sample_law(l, &mut rng))).collect();
            solve_draw(&system, flow.as_ref(), &positive, exo, options)
        })
        .collect();
    let failed = draws.iter().filter(|d| !d.status.converged()).count();
    if n > 0 && failed as f64 > options.max_failure_fraction * n as f64 {
        return Err(LabError::TooManyFailures { failed, total: n });
    }
    Ok(SampleSet {
        model: model.name().to_string(),
        seed,
        exogenous: model.exogenous().iter().map(|w| w.name.clone()).collect(),
        variables: model.variables().to_vec(),
        draws,
    })
}

fn solve_draw<T: Scalar>(
    system: &Compiled<T>,
    flow: Option<&Compiled<T>>,
    positive: &[usize],
    exo: Vec<T>,
    options: &SampleOptions<'_, T>,
) -> Draw<T> {
    let admissible = |x: &[T]| positive.iter().all(|&i| x[i] > T::zero());
    let mut slots = Vec::new();
    let mut stack = Vec::new();
    let mut newton = |x0: &[T]| {
        options.solver.solve(
            |x, out| system.eval(x, &exo, out, &mut slots, &mut stack),
            x0,
        )
    };
    for (start, &scale) in START_SCALES.iter().enumerate() {
        let x0 = vec![T::lit(scale); system.n_vars];
        if let Ok(sol) = newton(&x0) {
            if admissible(&sol.x) {
                return Draw {
                    exogenous: exo.clone(),
                    variables: Some(sol.x),
                    residual: Some(sol.residual),
                    status: DrawStatus::Newton { start },
                };
            }
        }
    }
    if let Some(flow) = flow {
        let mut fslots = Vec::new();
        let mut fstack = Vec::new();
        let x0 = vec![T::one(); system.n_vars];
        let steady = options
            .steady_state
            .integrate(|x, out| flow.eval(x, &exo, out, &mut fslots, &mut fstack), &x0);
        if let Some(x) = steady {
            if let Ok(sol) = newton(&x) {
                if admissible(&sol.x) {
                    return Draw {
                        exogenous: exo.clone(),
                        variables: Some(sol.x),
                        residual: Some(sol.residual),
                        status: DrawStatus::Steady,
                    };
                }
            }
        }
    }
    Draw {
        exogenous: exo,
        variables: None,
        residual: None,
        status: DrawStatus::Failed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn empty_sample() {
        let m = fixtures::intro().incidence_model("intro").unwrap();
        let s = sample_equilibria::<f64>(&m, 0, 1).unwrap();
        assert!(s.is_empty());
        assert_eq!(s.to_csv(), "U_1,U_2,X_1,X_2,status\n");
    }

    #[test]
    fn structure_only_models_cannot_be_sampled() {
        let m = fixtures::cyclic().incidence_model("cyclic").unwrap();
        assert_eq!(
            sample_equilibria::<f64>(&m, 5, 1).unwrap_err(),
            LabError::MissingResidual("f_1".into())
        );
    }

    #[test]
    fn same_seed_same_samples() {
        let m = fixtures::viral().incidence_model("viral_basic").unwrap();
        let a = sample_equilibria::<f64>(&m, 50, 7).unwrap();
        let b = sample_equilibria::<f64>(&m, 50, 7).unwrap();
        let c = sample_equilibria::<f64>(&m, 50, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        // A prefix of a larger run is the smaller run.
        let d = sample_equilibria::<f64>(&m, 20, 7).unwrap();
        assert_eq!(&a.draws[..20], &d.draws[..]);
    }

    #[test]
    fn too_many_failures_is_an_error() {
        let set = crate::parser::parse(
            "model m { var x; exo u; eq f: x*x + u = 0 }",
        )
        .unwrap();
        let m = set.model("m").unwrap();
        assert!(matches!(
            sample_equilibria::<f64>(m, 10, 1),
            Err(LabError::TooManyFailures { failed: 10, total: 10 })
        ));
    }

    #[test]
    fn steady_state_fallback_recovers_draws() {
        // Two Newton steps are too few from most starts, but plenty from
        // the end point of the integrated dynamics.
        let set = crate::parser::parse(
            "model m { var x; exo u; eq f: x^3 - u^3 = 0; positive x }
             dynamics d { var x; exo u; ddt x = u^3 - x^3; selfreg x }",
        )
        .unwrap();
        let m = set.model("m").unwrap();
        let solver = NewtonSolver {
            max_iterations: 2,
            ..NewtonSolver::default()
        };
        let plain = SampleOptions {
            solver,
            max_failure_fraction: 1.0,
            ..SampleOptions::default()
        };
        let plain = sample_equilibria_with::<f64>(m, 40, 3, &plain).unwrap();
        assert!(plain.n_failed() > 0);
        let backed = SampleOptions {
            solver,
            dynamics: set.dynamical("d"),
            ..SampleOptions::default()
        };
        let backed = sample_equilibria_with::<f64>(m, 40, 3, &backed).unwrap();
        assert_eq!(backed.n_failed(), 0);
        assert!(backed.draws.iter().any(|d| d.status == DrawStatus::Steady));
        for d in backed.converged() {
            let (x, u) = (d.variables.as_ref().unwrap()[0], d.exogenous[0]);
            assert!((x - u).abs() < 1e-9);
        }
    }

    #[test]
    fn csv_has_one_row_per_draw() {
        let m = fixtures::intro().incidence_model("intro").unwrap();
        let s = sample_equilibria::<f64>(&m, 3, 1).unwrap();
        let csv = s.to_csv();
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.lines().skip(1).all(|l| l.ends_with(",newton") && l.split(',').count() == 5));
    }
}
