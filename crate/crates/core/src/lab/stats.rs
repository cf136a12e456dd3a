//! Permutation tests of (conditional) independence between sample columns.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{lu_solve, LabError, SampleSet};
use crate::model::Ident;
use crate::num::Scalar;

pub const DEFAULT_PERMUTATIONS: usize = 2000;
pub const DEFAULT_ALPHA: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Pearson correlation of rank residuals after regressing out the ranks
    /// of the conditioning columns.
    #[default]
    SpearmanPermutation,
    /// The same on raw values.
    PartialCorrelation,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestOptions {
    pub method: Method,
    pub alpha: f64,
    pub permutations: usize,
    pub seed: u64,
}

impl Default for TestOptions {
    fn default() -> Self {
        TestOptions {
            method: Method::SpearmanPermutation,
            alpha: DEFAULT_ALPHA,
            permutations: DEFAULT_PERMUTATIONS,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndependenceVerdict {
    pub x: Ident,
    pub y: Ident,
    pub given: Vec<Ident>,
    pub method: Method,
    /// Partial correlation of the residuals.
    pub statistic: f64,
    pub p_value: f64,
    pub alpha: f64,
    pub permutations: usize,
    /// Independence was rejected at `alpha`.
    pub rejected: bool,
}

impl IndependenceVerdict {
    pub fn independent(&self) -> bool {
        !self.rejected
    }
}

/// Ranks starting at 1, ties sharing their average rank.
pub fn rank<T: Scalar>(values: &[T]) -> Vec<T> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(std::cmp::Ordering::Equal));
    let mut ranks = vec![T::zero(); values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = T::lit((i + j) as f64 / 2.0 + 1.0);
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Residual of `y` after least squares on an intercept and `z`.
pub fn residualize<T: Scalar>(y: &[T], z: &[Vec<T>]) -> Vec<T> {
    let n = y.len();
    let k = z.len() + 1;
    let col = |j: usize, i: usize| if j == 0 { T::one() } else { z[j - 1][i] };
    let mut gram = vec![T::zero(); k * k];
    let mut rhs = vec![T::zero(); k];
    for i in 0..n {
        for a in 0..k {
            let ca = col(a, i);
            rhs[a] = rhs[a] + ca * y[i];
            for b in 0..k {
                gram[a * k + b] = gram[a * k + b] + ca * col(b, i);
            }
        }
    }
    if !lu_solve(&mut gram, &mut rhs, k) {
        // Collinear conditioning columns: fall back to centring only.
        let mean = y.iter().fold(T::zero(), |s, &v| s + v) / T::lit(n as f64);
        return y.iter().map(|&v| v - mean).collect();
    }
    (0..n)
        .map(|i| y[i] - (0..k).fold(T::zero(), |s, j| s + rhs[j] * col(j, i)))
        .collect()
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |s, (&x, &y)| s + x * y)
}

fn is_constant<T: Scalar>(v: &[T]) -> bool {
    v.windows(2).all(|w| w[0] == w[1])
}

/// Tests `x ⟂ y | given` on the converged draws of `samples`.
pub fn test_independence<T: Scalar>(
    samples: &SampleSet<T>,
    x: &str,
    y: &str,
    given: &[&str],
    method: Method,
    alpha: f64,
) -> Result<IndependenceVerdict, LabError> {
    let options = TestOptions {
        method,
        alpha,
        seed: samples.seed,
        ..TestOptions::default()
    };
    test_independence_with(samples, x, y, given, &options)
}

pub fn test_independence_with<T: Scalar>(
    samples: &SampleSet<T>,
    x: &str,
    y: &str,
    given: &[&str],
    options: &TestOptions,
) -> Result<IndependenceVerdict, LabError> {
    if given.len() > 2 {
        return Err(LabError::ConditioningTooLarge(given.len()));
    }
    let mut names = vec![x, y];
    names.extend_from_slice(given);
    for (i, a) in names.iter().enumerate() {
        if names[..i].contains(a) {
            return Err(LabError::RepeatedColumn(a.to_string()));
        }
    }
    let mut columns = Vec::with_capacity(names.len());
    for name in &names {
        let c = samples.column(name)?;
        if is_constant(&c) {
            return Err(LabError::ConstantColumn(name.to_string()));
        }
        columns.push(c);
    }
    let needed = given.len() + 3;
    if columns[0].len() < needed {
        return Err(LabError::TooFewDraws {
            needed,
            have: columns[0].len(),
        });
    }
    if options.method == Method::SpearmanPermutation {
        columns = columns.iter().map(|c| rank(c)).collect();
    }
    let (p_value, statistic) = permutation_test(
        &columns[0],
        &columns[1],
        &columns[2..],
        options.permutations,
        options.seed,
        0,
    );
    Ok(IndependenceVerdict {
        x: x.to_string(),
        y: y.to_string(),
        given: given.iter().map(|s| s.to_string()).collect(),
        method: options.method,
        statistic,
        p_value,
        alpha: options.alpha,
        permutations: options.permutations,
        rejected: p_value < options.alpha,
    })
}

/// Two-sided permutation p-value `(1 + #{|r*| >= |r|}) / (B + 1)` for the
/// correlation of the residuals of `x` and `y` on `z`.
pub(crate) fn permutation_test<T: Scalar>(
    x: &[T],
    y: &[T],
    z: &[Vec<T>],
    permutations: usize,
    seed: u64,
    stream: u64,
) -> (f64, f64) {
    let rx = residualize(x, z);
    let mut ry = residualize(y, z);
    let denom = (dot(&rx, &rx) * dot(&ry, &ry)).sqrt();
    if !(denom > T::zero()) {
        return (1.0, 0.0);
    }
    let r = dot(&rx, &ry) / denom;
    let observed = r.abs();
    // Ties within rounding of the observed statistic count as exceedances.
    let slack = observed * T::epsilon() * T::lit(64.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut exceed = 0usize;
    for _ in 0..permutations {
        ry.shuffle(&mut rng);
        if (dot(&rx, &ry) / denom).abs() + slack >= observed {
            exceed += 1;
        }
    }
    let p = (1 + exceed) as f64 / (permutations + 1) as f64;
    (p, r.to_f64_lossy())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lab::{Draw, DrawStatus};

    fn samples(cols: &[(&str, Vec<f64>)]) -> SampleSet<f64> {
        let n = cols[0].1.len();
        SampleSet {
            model: "t".into(),
            seed: 11,
            exogenous: cols.iter().map(|c| c.0.to_string()).collect(),
            variables: vec![],
            draws: (0..n)
                .map(|i| Draw {
                    exogenous: cols.iter().map(|c| c.1[i]).collect(),
                    variables: Some(vec![]),
                    residual: Some(0.0),
                    status: DrawStatus::Newton { start: 0 },
                })
                .collect(),
        }
    }

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random::<f64>()).collect()
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(rank(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn residuals_are_orthogonal_to_regressors() {
        let z = noise(200, 1);
        let y: Vec<f64> = z.iter().zip(noise(200, 2)).map(|(a, b)| 3.0 * a + b).collect();
        let r = residualize(&y, &[z.clone()]);
        assert!(dot(&r, &z).abs() < 1e-9);
        assert!(r.iter().sum::<f64>().abs() < 1e-9);
    }

    #[test]
    fn copy_is_rejected_with_smallest_p() {
        let x = noise(300, 3);
        let s = samples(&[("a", x.clone()), ("b", x)]);
        let v = test_independence(&s, "a", "b", &[], Method::SpearmanPermutation, 0.01).unwrap();
        assert!(v.rejected);
        assert_eq!(v.p_value, 1.0 / (DEFAULT_PERMUTATIONS as f64 + 1.0));
        assert!((v.statistic - 1.0).abs() < 1e-12);
    }

    #[test]
    fn independent_noise_is_not_rejected() {
        let s = samples(&[("a", noise(500, 4)), ("b", noise(500, 5))]);
        let v = test_independence(&s, "a", "b", &[], Method::PartialCorrelation, 0.01).unwrap();
        assert!(!v.rejected && (0.0..=1.0).contains(&v.p_value), "{v:?}");
    }

    #[test]
    fn conditioning_removes_a_common_cause() {
        let z = noise(800, 6);
        let a: Vec<f64> = z.iter().zip(noise(800, 7)).map(|(z, e)| z + 0.3 * e).collect();
        let b: Vec<f64> = z.iter().zip(noise(800, 8)).map(|(z, e)| z + 0.3 * e).collect();
        let s = samples(&[("a", a), ("b", b), ("z", z)]);
        for method in [Method::SpearmanPermutation, Method::PartialCorrelation] {
            assert!(test_independence(&s, "a", "b", &[], method, 0.01).unwrap().rejected);
        }
        let v = test_independence(&s, "a", "b", &["z"], Method::PartialCorrelation, 0.01).unwrap();
        assert!(!v.rejected, "{v:?}");
    }

    #[test]
    fn input_errors() {
        let s = samples(&[("a", noise(50, 9)), ("c", vec![1.0; 50])]);
        let err = |r: Result<IndependenceVerdict, LabError>| r.unwrap_err();
        assert_eq!(
            err(test_independence(&s, "a", "c", &[], Method::default(), 0.01)),
            LabError::ConstantColumn("c".into())
        );
        assert_eq!(
            err(test_independence(&s, "a", "q", &[], Method::default(), 0.01)),
            LabError::UnknownColumn("q".into())
        );
        assert_eq!(
            err(test_independence(&s, "a", "a", &[], Method::default(), 0.01)),
            LabError::RepeatedColumn("a".into())
        );
        assert_eq!(
            err(test_independence(&s, "a", "c", &["a", "c", "a"], Method::default(), 0.01)),
            LabError::ConditioningTooLarge(3)
        );
    }

    #[test]
    fn derandomized_by_seed() {
        let s = samples(&[("a", noise(100, 10)), ("b", noise(100, 11))]);
        let v1 = test_independence(&s, "a", "b", &[], Method::default(), 0.01).unwrap();
        let v2 = test_independence(&s, "a", "b", &[], Method::default(), 0.01).unwrap();
        assert_eq!(v1, v2);
    }
}
