//! Numerical verification of couplings and identities.
//!
//! Constancy of phi is operationalized as `max |phi(x) - C| <= 1e-8 (1 + |C|)`
//! over all draws. Marginals are checked with the Kolmogorov-Smirnov sup
//! distance, variances against `-2 psi'(0) sigma^2`.

use serde::{Deserialize, Serialize};

use crate::couplings::{independent_coupling, Construction, ConstructionKind, Draws, MixSampler};
use crate::distributions::{DistributionSpec, Elliptical1D};
use crate::error::{MixError, Result};
use crate::generator::DensityGenerator;
use crate::mixability::CenterSet;

/// Relative constancy tolerance.
pub const CONSTANCY_RTOL: f64 = 1e-8;
/// A negative control must miss the claimed center by this many tolerances.
pub const CONTROL_FACTOR: f64 = 1e6;
/// KS pass threshold `KS_COEF / sqrt(n)`; `0.006` at `n = 1e5`.
pub const KS_COEF: f64 = 1.897;
/// Right-side values at or below `EQ26_ZERO_TOL * psi` count as nonpositive,
/// absorbing the rounding of `cos(pi/2)`.
pub const EQ26_ZERO_TOL: f64 = 1e-12;
pub const EQ26_GRID_POINTS: usize = 1000;

pub fn ks_threshold(n: usize) -> f64 {
    KS_COEF / (n as f64).sqrt()
}

/// Sup distance between the empirical CDF of `samples` and `cdf`.
pub fn ks_against<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<f64> {
    if samples.is_empty() {
        return Err(MixError::InvalidParameter("KS statistic needs at least one sample".into()));
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in s.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    Ok(d)
}

pub fn ks_statistic(samples: &[f64], d: &DistributionSpec) -> Result<f64> {
    ks_against(samples, |x| d.cdf(x))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsEntry {
    pub index: usize,
    pub kind: String,
    pub statistic: f64,
    pub threshold: f64,
    pub pass: bool,
}

/// Summary of the signed aggregate for switch constructions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchSupport {
    pub magnitude: f64,
    /// Observed `[min, max]` of the signed aggregate on each branch.
    pub plus_range: Option<[f64; 2]>,
    pub minus_range: Option<[f64; 2]>,
    pub plus_frequency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstancyReport {
    pub n_samples: usize,
    pub seed: u64,
    pub center: CenterSet,
    pub max_deviation: Option<f64>,
    pub tolerance: Option<f64>,
    pub observed_min: f64,
    pub observed_max: f64,
    pub pass: Option<bool>,
    pub switch: Option<SwitchSupport>,
}

fn switch_magnitude(c: &Construction) -> Option<f64> {
    match c {
        Construction::BernoulliSwitch { nus, .. } => Some(nus.iter().sum()),
        Construction::ProductExp { inner } => switch_magnitude(inner),
        _ => None,
    }
}

fn range_of(values: impl Iterator<Item = f64>) -> Option<[f64; 2]> {
    values.fold(None, |acc, v| match acc {
        None => Some([v, v]),
        Some([lo, hi]) => Some([lo.min(v), hi.max(v)]),
    })
}

/// Constancy of phi over a set of draws.
pub fn constancy_of_draws(sampler: &MixSampler, draws: &Draws, seed: u64) -> ConstancyReport {
    let phi = sampler.phi();
    let values: Vec<f64> = draws.rows.iter().map(|x| phi.eval(x)).collect();
    let [observed_min, observed_max] = range_of(values.iter().copied()).unwrap_or([f64::NAN, f64::NAN]);
    let center = sampler.center();
    let (max_deviation, tolerance) = match center {
        CenterSet::Point(c) => (
            Some(values.iter().map(|v| (v - c).abs()).fold(0.0, f64::max)),
            Some(CONSTANCY_RTOL * (1.0 + c.abs())),
        ),
        CenterSet::Interval { lo, hi } => (
            Some(values.iter().map(|&v| (lo - v).max(v - hi).max(0.0)).fold(0.0, f64::max)),
            Some(CONSTANCY_RTOL * (1.0 + lo.abs().max(hi.abs()))),
        ),
        CenterSet::Unknown => (None, None),
    };
    let pass = max_deviation.zip(tolerance).map(|(d, t)| d <= t);
    let switch = match (&draws.branches, switch_magnitude(&sampler.certificate().construction)) {
        (Some(branches), Some(magnitude)) => {
            let signed: Vec<f64> = draws.rows.iter().map(|x| phi.linear_part(x)).collect();
            let pick = |b: bool| range_of(signed.iter().zip(branches).filter(|(_, &s)| s == b).map(|(v, _)| *v));
            let plus = branches.iter().filter(|b| **b).count();
            Some(SwitchSupport {
                magnitude,
                plus_range: pick(true),
                minus_range: pick(false),
                plus_frequency: plus as f64 / branches.len().max(1) as f64,
            })
        }
        _ => None,
    };
    ConstancyReport {
        n_samples: draws.rows.len(),
        seed,
        center,
        max_deviation,
        tolerance,
        observed_min,
        observed_max,
        pass,
        switch,
    }
}

pub fn constancy_check(sampler: &MixSampler, n: usize, seed: u64) -> Result<ConstancyReport> {
    if n == 0 {
        return Err(MixError::InvalidParameter("constancy check needs n >= 1".into()));
    }
    Ok(constancy_of_draws(sampler, &sampler.sample(n, seed), seed))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentCheck {
    pub name: String,
    pub expected: Option<f64>,
    pub observed: Option<f64>,
    pub standard_error: Option<f64>,
    pub pass: Option<bool>,
    pub skipped: Option<String>,
}

impl MomentCheck {
    fn skipped(name: String, reason: String) -> Self {
        Self {
            name,
            expected: None,
            observed: None,
            standard_error: None,
            pass: None,
            skipped: Some(reason),
        }
    }

    pub fn relative_error(&self) -> Option<f64> {
        Some((self.observed? - self.expected?).abs() / self.expected?.abs())
    }
}

fn variance_check(name: String, expected: f64, samples: &[f64]) -> MomentCheck {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let (m2, m4) = samples.iter().fold((0.0, 0.0), |(a, b), x| {
        let d2 = (x - mean).powi(2);
        (a + d2, b + d2 * d2)
    });
    let var = m2 / (n - 1.0);
    let se = ((m4 / n - (m2 / n).powi(2)) / n).max(0.0).sqrt();
    MomentCheck {
        name,
        expected: Some(expected),
        observed: Some(var),
        standard_error: Some(se),
        pass: Some((var - expected).abs() <= 3.0 * se),
        skipped: None,
    }
}

/// Sample variance against `-2 psi'(0) sigma^2`, within three standard errors.
pub fn moment_check(d: &Elliptical1D, samples: &[f64]) -> MomentCheck {
    let name = format!("variance[{}]", d.gen.family_name());
    match d.gen.char_generator().psi_prime_at_zero() {
        Some(dpsi) if samples.len() >= 2 => variance_check(name, -2.0 * dpsi * d.sigma * d.sigma, samples),
        Some(_) => MomentCheck::skipped(name, "need at least two samples".into()),
        None => MomentCheck::skipped(name, format!("{} generator has no finite variance", d.gen.family_name())),
    }
}

/// Variance check for any marginal law.
pub fn moment_check_spec(index: usize, d: &DistributionSpec, samples: &[f64]) -> MomentCheck {
    if let DistributionSpec::Elliptical(e) = d {
        let mut c = moment_check(e, samples);
        c.name = format!("variance[x{}]", index + 1);
        return c;
    }
    let name = format!("variance[x{}]", index + 1);
    match d.variance().value() {
        Some(v) if v.is_finite() && samples.len() >= 2 => variance_check(name, v, samples),
        _ => MomentCheck::skipped(name, format!("{} marginal has no finite variance", d.kind_name())),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Eq26Point {
    pub t: f64,
    /// `cos(t nu) psi(sigma^2 t^2 / 2)`
    pub right_side: f64,
    /// Characteristic function of the marginal at `t`. Positive for normal
    /// scale mixtures, though it may underflow to zero for large `t`.
    pub left_side: f64,
}

/// Numerical demonstration that a normal scale-mixture marginal cannot carry
/// a two-bump density: the right side reaches zero on the grid while the left
/// side stays positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Eq26Record {
    pub nu: f64,
    pub sigma: f64,
    pub generator: String,
    pub psi_infty: bool,
    pub grid_points: usize,
    pub witness: Eq26Point,
    pub witness_count: usize,
    pub min_right_side: Eq26Point,
    /// `None` when positivity of the left side is not implied by the generator.
    pub contradiction: Option<bool>,
    pub caveat: Option<String>,
}

/// `n` evenly spaced points on `[0, 2 pi / nu]`.
pub fn default_eq26_grid(nu: f64) -> Vec<f64> {
    let top = 2.0 * std::f64::consts::PI / nu;
    (0..EQ26_GRID_POINTS)
        .map(|k| top * k as f64 / (EQ26_GRID_POINTS - 1) as f64)
        .collect()
}

pub fn eq26_evaluate(nu: f64, sigma: f64, gen: &DensityGenerator, t: f64) -> Eq26Point {
    let psi = gen.char_generator();
    Eq26Point {
        t,
        right_side: (t * nu).cos() * psi.psi(sigma * sigma * t * t / 2.0),
        left_side: psi.psi(sigma * sigma * t * t),
    }
}

pub fn eq26_contradiction(nu: f64, sigma: f64, gen: &DensityGenerator, grid: &[f64]) -> Result<Eq26Record> {
    if !(nu > 0.0) || !nu.is_finite() {
        return Err(MixError::InvalidParameter(format!("nu must be positive, got {nu}")));
    }
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(MixError::InvalidParameter(format!("sigma must be positive, got {sigma}")));
    }
    if grid.is_empty() {
        return Err(MixError::InvalidParameter("t grid is empty".into()));
    }
    let psi_infty = gen.char_generator().psi_infty();
    let points: Vec<Eq26Point> = grid.iter().map(|&t| eq26_evaluate(nu, sigma, gen, t)).collect();
    let nonpositive = |p: &Eq26Point| {
        let scale = gen.char_generator().psi(sigma * sigma * p.t * p.t / 2.0).abs();
        p.right_side <= EQ26_ZERO_TOL * scale
    };
    let witnesses: Vec<&Eq26Point> = points.iter().filter(|p| nonpositive(p)).collect();
    let Some(&witness) = witnesses.first() else {
        return Err(MixError::WidenGrid {
            suggested_t: std::f64::consts::FRAC_PI_2 / nu,
        });
    };
    let min_right_side = points
        .iter()
        .min_by(|a, b| a.right_side.total_cmp(&b.right_side))
        .unwrap()
        .clone();
    let (contradiction, caveat) = if psi_infty {
        (Some(true), None)
    } else {
        (
            None,
            Some(format!(
                "{} generator is not declared a normal scale mixture; left-side positivity is not implied",
                gen.family_name()
            )),
        )
    };
    Ok(Eq26Record {
        nu,
        sigma,
        generator: gen.family_name().to_string(),
        psi_infty,
        grid_points: grid.len(),
        witness: witness.clone(),
        witness_count: witnesses.len(),
        min_right_side,
        contradiction,
        caveat,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub construction: ConstructionKind,
    pub n_samples: usize,
    pub seed: u64,
    pub ks_per_marginal: Vec<KsEntry>,
    pub constancy: ConstancyReport,
    pub constancy_max_dev: Option<f64>,
    pub center_observed: [f64; 2],
    pub moment_checks: Vec<MomentCheck>,
    /// Constancy of an independent coupling of the same marginals, which must fail.
    pub negative_control: Option<ConstancyReport>,
    pub negative_control_pass: Option<bool>,
    pub eq26: Option<Eq26Record>,
    pub all_pass: bool,
}

fn switch_marginal(c: &Construction) -> Option<(f64, f64, DensityGenerator)> {
    match c {
        Construction::BernoulliSwitch { plus, .. } => match plus.as_ref() {
            Construction::GaussianDegenerate { mus, sigmas, .. } => mus
                .iter()
                .zip(sigmas)
                .find(|(m, _)| **m > 0.0)
                .map(|(&m, &s)| (m, s, DensityGenerator::Normal)),
            Construction::ScaleMixture {
                mus, sigmas, generator, ..
            } => mus
                .iter()
                .zip(sigmas)
                .find(|(m, _)| **m > 0.0)
                .map(|(&m, &s)| (m, s, generator.clone())),
            _ => None,
        },
        _ => None,
    }
}

/// Runs the full battery on `n` draws: per-marginal KS, constancy, variances,
/// an independent negative control and, for switch constructions, the
/// characteristic-function demonstration for the offset of the first bump.
pub fn verify(sampler: &MixSampler, n: usize, seed: u64) -> Result<VerificationReport> {
    if n < 2 {
        return Err(MixError::InvalidParameter("verification needs n >= 2".into()));
    }
    let draws = sampler.sample(n, seed);
    let threshold = ks_threshold(n);
    let mut column = vec![0.0; n];
    let mut ks_per_marginal = Vec::with_capacity(sampler.dim());
    let mut moment_checks = Vec::with_capacity(sampler.dim());
    for (i, d) in sampler.marginals().iter().enumerate() {
        for (c, row) in column.iter_mut().zip(&draws.rows) {
            *c = row[i];
        }
        let statistic = ks_statistic(&column, d)?;
        ks_per_marginal.push(KsEntry {
            index: i,
            kind: d.kind_name().to_string(),
            statistic,
            threshold,
            pass: statistic < threshold,
        });
        moment_checks.push(moment_check_spec(i, d, &column));
    }
    let constancy = constancy_of_draws(sampler, &draws, seed);

    let (negative_control, negative_control_pass) = if sampler.kind() == ConstructionKind::Independent {
        (None, None)
    } else {
        let control = independent_coupling(
            sampler.marginals().to_vec(),
            sampler.phi().clone(),
            sampler.certificate().inner_center,
        )?;
        let report = constancy_check(&control, n, seed)?;
        let pass = report
            .max_deviation
            .zip(report.tolerance)
            .map(|(d, t)| d >= CONTROL_FACTOR * t);
        (Some(report), pass)
    };

    let eq26 = match switch_marginal(&sampler.certificate().construction) {
        Some((nu, sigma, gen)) if gen.char_generator().psi_infty() => {
            Some(eq26_contradiction(nu, sigma, &gen, &default_eq26_grid(nu))?)
        }
        _ => None,
    };

    let all_pass = ks_per_marginal.iter().all(|k| k.pass)
        && constancy.pass.unwrap_or(false)
        && moment_checks.iter().all(|m| m.pass.unwrap_or(true))
        && negative_control_pass.unwrap_or(true)
        && eq26.as_ref().is_none_or(|e| e.contradiction == Some(true));

    Ok(VerificationReport {
        construction: sampler.kind(),
        n_samples: n,
        seed,
        ks_per_marginal,
        constancy_max_dev: constancy.max_deviation,
        center_observed: [constancy.observed_min, constancy.observed_max],
        constancy,
        moment_checks,
        negative_control,
        negative_control_pass,
        eq26,
        all_pass,
    })
}
