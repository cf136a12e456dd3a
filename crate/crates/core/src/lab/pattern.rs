//! Checks sampled equilibria against the independences a Markov ordering
//! graph implies.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use super::stats::{permutation_test, rank};
use super::{sample_equilibria_with, LabError, Method, SampleOptions, SampleSet, DEFAULT_PERMUTATIONS};
use crate::model::{DynamicalModel, Ident, IncidenceModel};
use crate::num::Scalar;
use crate::ordering::MarkovDag;
use crate::query::{implied_independence_table, DEFAULT_MAX_CONDITIONING};

#[derive(Debug, Clone, Copy)]
pub struct PatternOptions<'a> {
    pub max_conditioning: usize,
    pub method: Method,
    pub permutations: usize,
    pub dynamics: Option<&'a DynamicalModel>,
}

impl Default for PatternOptions<'_> {
    fn default() -> Self {
        PatternOptions {
            max_conditioning: DEFAULT_MAX_CONDITIONING,
            method: Method::SpearmanPermutation,
            permutations: DEFAULT_PERMUTATIONS,
            dynamics: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PatternRow {
    pub x: Ident,
    pub y: Ident,
    pub given: Vec<Ident>,
    /// d-separated in the Markov ordering graph.
    pub predicted_independent: bool,
    /// Independence not rejected by the permutation test.
    pub observed_independent: bool,
    pub statistic: f64,
    pub p_value: f64,
    pub agree: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PatternReport {
    pub model: Ident,
    pub n: usize,
    pub seed: u64,
    pub alpha: f64,
    pub converged: usize,
    pub failed: usize,
    pub disagreements: usize,
    pub rows: Vec<PatternRow>,
}

impl PatternReport {
    pub fn row(&self, x: &str, y: &str, given: &[&str]) -> Option<&PatternRow> {
        self.rows.iter().find(|r| {
            ((r.x == x && r.y == y) || (r.x == y && r.y == x))
                && r.given.len() == given.len()
                && given.iter().all(|g| r.given.iter().any(|h| h == g))
        })
    }
}

/// Samples `n` equilibria of `model` and tests every query of the implied
/// independence table of `mo`. Disagreements are reported, not raised.
pub fn pattern_check(
    model: &IncidenceModel,
    mo: &MarkovDag,
    n: usize,
    seed: u64,
    alpha: f64,
) -> Result<PatternReport, LabError> {
    pattern_check_with::<f64>(model, mo, n, seed, alpha, &PatternOptions::default())
}

pub fn pattern_check_with<T: Scalar>(
    model: &IncidenceModel,
    mo: &MarkovDag,
    n: usize,
    seed: u64,
    alpha: f64,
    options: &PatternOptions<'_>,
) -> Result<PatternReport, LabError> {
    let sample_options = SampleOptions::<T> {
        dynamics: options.dynamics,
        ..SampleOptions::default()
    };
    let samples = sample_equilibria_with(model, n, seed, &sample_options)?;
    pattern_from_samples(&samples, mo, alpha, options)
}

/// Runs the implied independence table of `mo` against existing samples.
/// Query `i` draws its permutations from stream `i` of the sample seed.
pub fn pattern_from_samples<T: Scalar>(
    samples: &SampleSet<T>,
    mo: &MarkovDag,
    alpha: f64,
    options: &PatternOptions<'_>,
) -> Result<PatternReport, LabError> {
    if options.max_conditioning > 2 {
        return Err(LabError::ConditioningTooLarge(options.max_conditioning));
    }
    let table = implied_independence_table(mo, options.max_conditioning);
    let mut columns: HashMap<&str, Vec<T>> = HashMap::new();
    for v in mo.vertices() {
        let c = samples.column(&v.name)?;
        if c.windows(2).all(|w| w[0] == w[1]) {
            return Err(LabError::ConstantColumn(v.name.clone()));
        }
        let c = match options.method {
            Method::SpearmanPermutation => rank(&c),
            Method::PartialCorrelation => c,
        };
        columns.insert(v.name.as_str(), c);
    }
    let have = samples.n_converged();
    let needed = options.max_conditioning + 3;
    if !table.is_empty() && have < needed {
        return Err(LabError::TooFewDraws { needed, have });
    }
    let rows: Vec<PatternRow> = table
        .par_iter()
        .enumerate()
        .map(|(i, q)| {
            let z: Vec<Vec<T>> = q.given.iter().map(|g| columns[g.as_str()].clone()).collect();
            let (p_value, statistic) = permutation_test(
                &columns[q.x.as_str()],
                &columns[q.y.as_str()],
                &z,
                options.permutations,
                samples.seed,
                i as u64,
            );
            let observed_independent = p_value >= alpha;
            PatternRow {
                x: q.x.clone(),
                y: q.y.clone(),
                given: q.given.clone(),
                predicted_independent: q.separated,
                observed_independent,
                statistic,
                p_value,
                agree: observed_independent == q.separated,
            }
        })
        .collect();
    Ok(PatternReport {
        model: samples.model.clone(),
        n: samples.len(),
        seed: samples.seed,
        alpha,
        converged: have,
        failed: samples.n_failed(),
        disagreements: rows.iter().filter(|r| !r.agree).count(),
        rows,
    })
}
