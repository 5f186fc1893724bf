//! Rearrangement oracle.
//!
//! Each marginal is discretized on the midpoint grid `p_j = (j - 1/2)/m`, and
//! columns are repeatedly re-sorted counter-monotonically against the sum of
//! the others. Row sums that flatten out as `m` grows indicate mixability;
//! a variance that stalls at a positive level indicates the opposite.
//!
//! Starting from the sorted (comonotone) matrix traps the sweeps in a local
//! optimum when columns are scaled copies of one another, so
//! [`mixability_probe`] first applies a seeded [`scramble`].

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::distributions::{log_transform_inverse, DistributionSpec, Support};
use crate::error::{MixError, Result};
use crate::mixability::{decide, MixProblem, OuterFn, PhiShape, PhiSpec, Verdict};
use crate::rng::{child_id, stream};

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_SWEEPS: usize = 1000;
/// Tail trim used for infinite-variance families when none is given.
pub const DEFAULT_HEAVY_TRIM: f64 = 0.001;

/// `m x n` quantile matrix, stored by column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileMatrix {
    pub m: usize,
    pub trim: f64,
    pub columns: Vec<Vec<f64>>,
}

impl QuantileMatrix {
    pub fn n(&self) -> usize {
        self.columns.len()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.m).map(|j| self.columns.iter().map(|c| c[j]).sum()).collect()
    }
}

/// Midpoint grid probability of row `j` (zero-based).
pub fn grid_point(j: usize, m: usize) -> f64 {
    (j as f64 + 0.5) / m as f64
}

pub fn build_matrix(marginals: &[DistributionSpec], alphas: &[f64], m: usize, trim: f64) -> Result<QuantileMatrix> {
    if marginals.len() != alphas.len() {
        return Err(MixError::Arity(format!(
            "{} marginals and {} weights",
            marginals.len(),
            alphas.len()
        )));
    }
    if m < 2 {
        return Err(MixError::InvalidParameter(format!("grid size m must be >= 2, got {m}")));
    }
    if !(0.0..0.5).contains(&trim) {
        return Err(MixError::InvalidParameter(format!("trim must lie in [0, 0.5), got {trim}")));
    }
    if trim == 0.0 {
        if let Some(d) = marginals.iter().find(|d| !d.variance().is_finite()) {
            return Err(MixError::Precondition(format!(
                "{} marginal with {} generator has infinite variance; a positive trim is required",
                d.kind_name(),
                d.generator().family_name()
            )));
        }
    }
    let columns = marginals
        .iter()
        .zip(alphas)
        .map(|(d, &a)| {
            (0..m)
                .map(|j| d.quantile((1.0 - 2.0 * trim) * grid_point(j, m) + trim).map(|q| a * q))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(QuantileMatrix { m, trim, columns })
}

/// Permutes every column independently; column `i` uses stream `child_id(0, i)` of `seed`.
pub fn scramble(q: &mut QuantileMatrix, seed: u64) {
    for (i, col) in q.columns.iter_mut().enumerate() {
        col.shuffle(&mut stream(seed, child_id(0, i as u64)));
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RAReport {
    pub m: usize,
    pub n: usize,
    pub trim: f64,
    /// Population variance of the row sums.
    pub variance: f64,
    pub range: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Row-sum variance after each sweep, starting with the input.
    pub history: Vec<f64>,
}

fn variance_and_range(s: &[f64]) -> (f64, f64) {
    let m = s.len() as f64;
    let mean = s.iter().sum::<f64>() / m;
    let var = s.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / m;
    let (lo, hi) = s
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    (var, hi - lo)
}

/// Reorders `col` to be counter-monotone to `other`; returns whether anything moved.
fn counter_sort(col: &mut [f64], other: &[f64]) -> bool {
    let m = col.len();
    let mut order: Vec<usize> = (0..m).collect();
    // stable: ties in `other` keep their current row order
    order.sort_by(|&a, &b| other[a].total_cmp(&other[b]));
    let mut values = col.to_vec();
    values.sort_by(|a, b| b.total_cmp(a));
    let mut changed = false;
    for (rank, &row) in order.iter().enumerate() {
        if col[row] != values[rank] {
            changed = true;
            col[row] = values[rank];
        }
    }
    changed
}

pub fn ra_minimize(q: &mut QuantileMatrix, tol: f64, max_sweeps: usize) -> RAReport {
    let m = q.m;
    let mut sums = q.row_sums();
    let (mut var, _) = variance_and_range(&sums);
    let mut history = vec![var];
    let mut iterations = 0;
    let mut converged = var == 0.0;
    let mut other = vec![0.0; m];
    while !converged && iterations < max_sweeps {
        let mut changed = false;
        for col in q.columns.iter_mut() {
            for j in 0..m {
                other[j] = sums[j] - col[j];
            }
            if counter_sort(col, &other) {
                changed = true;
                for j in 0..m {
                    sums[j] = other[j] + col[j];
                }
            }
        }
        // recompute from scratch so rounding in the running sums does not accumulate
        sums = q.row_sums();
        iterations += 1;
        let (next, _) = variance_and_range(&sums);
        history.push(next);
        let improvement = if var > 0.0 { (var - next) / var } else { 0.0 };
        var = next;
        converged = !changed || var == 0.0 || improvement < tol;
    }
    let (variance, range) = variance_and_range(&sums);
    RAReport {
        m,
        n: q.n(),
        trim: q.trim,
        variance,
        range,
        iterations,
        converged,
        history,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeEntry {
    pub m: usize,
    pub variance: f64,
    pub range: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub trim: f64,
    pub seed: u64,
    pub entries: Vec<ProbeEntry>,
    /// Verdict of the weighted scale condition, when it applies to the inputs.
    pub analytic_verdict: Option<Verdict>,
    pub analytic_margin: Option<f64>,
}

impl ProbeReport {
    pub fn variances(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.variance).collect()
    }
}

/// Scrambles the matrix with `seed`, then rearranges with default settings.
pub fn ra_scrambled(q: &mut QuantileMatrix, seed: u64) -> RAReport {
    scramble(q, seed);
    ra_minimize(q, DEFAULT_TOL, DEFAULT_MAX_SWEEPS)
}

/// Runs the oracle on each grid size of `schedule`. Log-family marginals are
/// probed through their logarithms. A zero `trim` is replaced by
/// [`DEFAULT_HEAVY_TRIM`] when some marginal has infinite variance.
pub fn mixability_probe(
    marginals: &[DistributionSpec],
    alphas: &[f64],
    schedule: &[usize],
    trim: f64,
    seed: u64,
) -> Result<ProbeReport> {
    if schedule.windows(2).any(|w| w[0] >= w[1]) {
        return Err(MixError::InvalidParameter("grid schedule must be increasing".into()));
    }
    let reals = marginals
        .iter()
        .map(|d| match d.support() {
            Support::RealLine => Ok(d.clone()),
            Support::Positive => log_transform_inverse(d, 1.0),
        })
        .collect::<Result<Vec<_>>>()?;
    let trim = if trim == 0.0 && reals.iter().any(|d| !d.variance().is_finite()) {
        DEFAULT_HEAVY_TRIM
    } else {
        trim
    };
    let mut entries = Vec::with_capacity(schedule.len());
    for &m in schedule {
        let mut q = build_matrix(&reals, alphas, m, trim)?;
        let r = ra_scrambled(&mut q, seed);
        entries.push(ProbeEntry {
            m,
            variance: r.variance,
            range: r.range,
            iterations: r.iterations,
            converged: r.converged,
        });
    }
    let phi = PhiSpec::new(PhiShape::WeightedSum, OuterFn::Identity, alphas.to_vec())?;
    let decision = decide(&MixProblem {
        marginals: reals,
        phi,
    })
    .ok();
    Ok(ProbeReport {
        trim,
        seed,
        entries,
        analytic_verdict: decision.as_ref().map(|d| d.verdict),
        analytic_margin: decision.map(|d| d.margin),
    })
}
