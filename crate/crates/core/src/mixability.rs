//! Mixability decisions and center sets.
//!
//! For marginals `Ell_1(mu_i, sigma_i^2, psi)` sharing one generator, the tuple
//! is mixable for the weighted sum `sum(alpha_i x_i)` exactly when the weighted
//! scales `w_i = alpha_i sigma_i` satisfy `sum(w) >= 2 max(w)`. Log-elliptical
//! tuples reduce to this case by taking logarithms.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::distributions::{log_transform_inverse, DistributionSpec, Elliptical1D, Support};
use crate::error::{MixError, Result};
use crate::generator::DensityGenerator;

/// Inner aggregate of a phi function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhiShape {
    /// `sum(alpha_i x_i)`
    WeightedSum,
    /// `|sum(alpha_i x_i)|`
    AbsWeightedSum,
    /// `prod(x_i^alpha_i)`
    WeightedLogProduct,
    /// `|log prod(x_i^alpha_i)|`
    AbsWeightedLogProduct,
}

impl PhiShape {
    pub fn support(self) -> Support {
        match self {
            PhiShape::WeightedSum | PhiShape::AbsWeightedSum => Support::RealLine,
            _ => Support::Positive,
        }
    }

    pub fn is_abs(self) -> bool {
        matches!(self, PhiShape::AbsWeightedSum | PhiShape::AbsWeightedLogProduct)
    }

    /// The sum shape obtained after taking logarithms of the coordinates.
    pub fn to_sum(self) -> PhiShape {
        match self {
            PhiShape::WeightedLogProduct => PhiShape::WeightedSum,
            PhiShape::AbsWeightedLogProduct => PhiShape::AbsWeightedSum,
            s => s,
        }
    }

    pub fn to_product(self) -> PhiShape {
        match self {
            PhiShape::WeightedSum => PhiShape::WeightedLogProduct,
            PhiShape::AbsWeightedSum => PhiShape::AbsWeightedLogProduct,
            s => s,
        }
    }
}

/// Outer function applied to the aggregate (the `h`/`g` of the phi family).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OuterFn {
    Identity,
    Square,
    Abs,
    Exp,
    Negate,
}

impl OuterFn {
    pub fn apply(self, v: f64) -> f64 {
        match self {
            OuterFn::Identity => v,
            OuterFn::Square => v * v,
            OuterFn::Abs => v.abs(),
            OuterFn::Exp => v.exp(),
            OuterFn::Negate => -v,
        }
    }

    pub fn is_injective(self) -> bool {
        matches!(self, OuterFn::Identity | OuterFn::Exp | OuterFn::Negate)
    }

    /// Image of a center set under the function.
    pub fn image(self, set: CenterSet) -> CenterSet {
        match set {
            CenterSet::Unknown => CenterSet::Unknown,
            CenterSet::Point(v) => CenterSet::Point(self.apply(v)),
            CenterSet::Interval { lo, hi } => match self {
                OuterFn::Identity => set,
                OuterFn::Exp => CenterSet::interval(lo.exp(), hi.exp()),
                OuterFn::Negate => CenterSet::interval(-hi, -lo),
                OuterFn::Abs | OuterFn::Square => {
                    let (a, b) = (self.apply(lo), self.apply(hi));
                    let top = a.max(b);
                    let bottom = if lo <= 0.0 && hi >= 0.0 { 0.0 } else { a.min(b) };
                    CenterSet::interval(bottom, top)
                }
            },
        }
    }
}

/// Supermodular target `outer(shape(alpha, x))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PhiRepr")]
pub struct PhiSpec {
    pub shape: PhiShape,
    pub outer: OuterFn,
    pub alphas: Vec<f64>,
}

#[derive(Deserialize)]
struct PhiRepr {
    shape: PhiShape,
    outer: OuterFn,
    alphas: Vec<f64>,
}

impl TryFrom<PhiRepr> for PhiSpec {
    type Error = MixError;
    fn try_from(r: PhiRepr) -> Result<Self> {
        PhiSpec::new(r.shape, r.outer, r.alphas)
    }
}

impl PhiSpec {
    pub fn new(shape: PhiShape, outer: OuterFn, alphas: Vec<f64>) -> Result<Self> {
        if alphas.is_empty() {
            return Err(MixError::Arity("phi.alphas must not be empty".into()));
        }
        if let Some(a) = alphas.iter().find(|a| !(**a > 0.0) || !a.is_finite()) {
            return Err(MixError::InvalidParameter(format!(
                "phi.alphas must all be positive and finite, got {a}"
            )));
        }
        Ok(Self { shape, outer, alphas })
    }

    pub fn sum(n: usize) -> Self {
        Self {
            shape: PhiShape::WeightedSum,
            outer: OuterFn::Identity,
            alphas: vec![1.0; n],
        }
    }

    pub fn arity(&self) -> usize {
        self.alphas.len()
    }

    /// `sum(alpha_i x_i)` for sum shapes, `sum(alpha_i log x_i)` for product shapes.
    pub fn linear_part(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.alphas.len());
        match self.shape.support() {
            Support::RealLine => self.alphas.iter().zip(x).map(|(a, v)| a * v).sum(),
            Support::Positive => self.alphas.iter().zip(x).map(|(a, v)| a * v.ln()).sum(),
        }
    }

    /// Value of the aggregate before the outer function.
    pub fn inner(&self, x: &[f64]) -> f64 {
        let l = self.linear_part(x);
        match self.shape {
            PhiShape::WeightedSum => l,
            PhiShape::AbsWeightedSum | PhiShape::AbsWeightedLogProduct => l.abs(),
            PhiShape::WeightedLogProduct => l.exp(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.outer.apply(self.inner(x))
    }

    /// Maps a center set of the linear part to the corresponding set of phi values.
    pub fn center_from_linear(&self, linear: CenterSet) -> CenterSet {
        let inner = match self.shape {
            PhiShape::WeightedSum => linear,
            PhiShape::AbsWeightedSum | PhiShape::AbsWeightedLogProduct => OuterFn::Abs.image(linear),
            PhiShape::WeightedLogProduct => OuterFn::Exp.image(linear),
        };
        self.outer.image(inner)
    }

    /// Whether the sum condition is also necessary for this phi.
    pub fn is_injective(&self) -> bool {
        !self.shape.is_abs() && self.outer.is_injective()
    }
}

/// A set of centers. Intervals with `lo == hi` collapse to points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "CenterRepr", try_from = "CenterRepr")]
pub enum CenterSet {
    Point(f64),
    Interval { lo: f64, hi: f64 },
    Unknown,
}

#[derive(Serialize, Deserialize)]
struct CenterRepr {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lo: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    hi: Option<f64>,
}

impl From<CenterSet> for CenterRepr {
    fn from(c: CenterSet) -> Self {
        match c {
            CenterSet::Point(v) => CenterRepr {
                kind: "point".into(),
                lo: Some(v),
                hi: Some(v),
            },
            CenterSet::Interval { lo, hi } => CenterRepr {
                kind: "interval".into(),
                lo: Some(lo),
                hi: Some(hi),
            },
            CenterSet::Unknown => CenterRepr {
                kind: "unknown".into(),
                lo: None,
                hi: None,
            },
        }
    }
}

impl TryFrom<CenterRepr> for CenterSet {
    type Error = MixError;
    fn try_from(r: CenterRepr) -> Result<Self> {
        let bound = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| MixError::InvalidParameter(format!("center_set.{name} is required")))
        };
        match r.kind.as_str() {
            "point" => Ok(CenterSet::Point(bound(r.lo, "lo")?)),
            "interval" => {
                let (lo, hi) = (bound(r.lo, "lo")?, bound(r.hi, "hi")?);
                if lo > hi {
                    return Err(MixError::InvalidParameter("center_set.lo exceeds hi".into()));
                }
                Ok(CenterSet::interval(lo, hi))
            }
            "unknown" => Ok(CenterSet::Unknown),
            k => Err(MixError::InvalidParameter(format!("center_set.kind: unknown kind {k:?}"))),
        }
    }
}

impl CenterSet {
    pub fn interval(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi);
        if lo == hi {
            CenterSet::Point(lo)
        } else {
            CenterSet::Interval { lo, hi }
        }
    }

    pub fn bounds(&self) -> Option<(f64, f64)> {
        match *self {
            CenterSet::Point(v) => Some((v, v)),
            CenterSet::Interval { lo, hi } => Some((lo, hi)),
            CenterSet::Unknown => None,
        }
    }

    pub fn point(&self) -> Option<f64> {
        match *self {
            CenterSet::Point(v) => Some(v),
            _ => None,
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        self.bounds().is_some_and(|(lo, hi)| lo <= v && v <= hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Mixable,
    Boundary,
    NotMixable,
}

impl Verdict {
    /// Mixable or on the boundary (the condition holds with equality).
    pub fn holds(self) -> bool {
        !matches!(self, Verdict::NotMixable)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub verdict: Verdict,
    /// `sum(alpha_i sigma_i) - 2 max(alpha_i sigma_i)`
    pub margin: f64,
}

/// Relative tolerance below which the margin counts as zero.
pub const BOUNDARY_RTOL: f64 = 1e-12;

/// Evaluates `sum(w) - 2 max(w)` for `w_i = alpha_i sigma_i`.
pub fn check_condition(alphas: &[f64], sigmas: &[f64]) -> Result<Condition> {
    if alphas.len() != sigmas.len() {
        return Err(MixError::Arity(format!(
            "{} alphas for {} scales",
            alphas.len(),
            sigmas.len()
        )));
    }
    if alphas.len() < 2 {
        return Err(MixError::Arity(format!(
            "mixability needs at least two marginals, got {}",
            alphas.len()
        )));
    }
    if let Some(v) = alphas.iter().chain(sigmas).find(|v| !(**v > 0.0) || !v.is_finite()) {
        return Err(MixError::InvalidParameter(format!(
            "alphas and sigmas must be positive and finite, got {v}"
        )));
    }
    let w: Vec<f64> = alphas.iter().zip(sigmas).map(|(a, s)| a * s).collect();
    Ok(condition_for_weights(&w))
}

pub(crate) fn condition_for_weights(w: &[f64]) -> Condition {
    let total: f64 = w.iter().sum();
    let max = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let margin = total - 2.0 * max;
    let verdict = if margin.abs() <= BOUNDARY_RTOL * max {
        Verdict::Boundary
    } else if margin > 0.0 {
        Verdict::Mixable
    } else {
        Verdict::NotMixable
    };
    let margin = if verdict == Verdict::Boundary { 0.0 } else { margin };
    Condition { verdict, margin }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixProblem {
    pub marginals: Vec<DistributionSpec>,
    pub phi: PhiSpec,
}

/// Whether the condition is necessary and sufficient or only sufficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Qualifier {
    Iff,
    SufficientOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub verdict: Verdict,
    pub margin: f64,
    pub qualifier: Qualifier,
    pub weights: Vec<f64>,
    pub center_set: CenterSet,
    pub explanation: String,
}

fn common_generator<'a>(gens: impl Iterator<Item = &'a DensityGenerator>) -> Result<&'a DensityGenerator> {
    let mut gens = gens;
    let first = gens
        .next()
        .ok_or_else(|| MixError::Arity("no marginals".into()))?;
    if gens.any(|g| g != first) {
        return Err(MixError::Unsupported(
            "marginals must share one generator for the scale criterion".into(),
        ));
    }
    Ok(first)
}

/// Center set of the signed weighted sum for elliptical marginals, as far as
/// closed forms are known.
fn linear_center(marginals: &[Elliptical1D], alphas: &[f64]) -> CenterSet {
    let shift: f64 = marginals.iter().zip(alphas).map(|(m, a)| a * m.mu).sum();
    if marginals.iter().all(|m| m.gen.finite_mean()) {
        return CenterSet::Point(shift);
    }
    let cauchy_like = marginals.iter().all(|m| match m.gen {
        DensityGenerator::Cauchy => true,
        DensityGenerator::StudentT { df } => df == 1.0,
        _ => false,
    });
    let w: Vec<f64> = marginals.iter().zip(alphas).map(|(m, a)| a * m.sigma).collect();
    let equal = w.iter().all(|v| (v - w[0]).abs() <= 1e-12 * w[0]);
    if cauchy_like && equal {
        let half = w[0] * ((marginals.len() - 1) as f64).ln() / PI;
        CenterSet::interval(shift - half, shift + half)
    } else {
        CenterSet::Unknown
    }
}

/// Decides phi-joint mixability by reduction to the weighted scale condition.
pub fn decide(problem: &MixProblem) -> Result<Decision> {
    let phi = &problem.phi;
    let n = problem.marginals.len();
    if phi.arity() != n {
        return Err(MixError::Arity(format!("{} alphas for {n} marginals", phi.arity())));
    }
    if n < 2 {
        return Err(MixError::Arity(format!("mixability needs at least two marginals, got {n}")));
    }
    let support = problem.marginals[0].support();
    if problem.marginals.iter().any(|m| m.support() != support) {
        return Err(MixError::Unsupported(
            "marginals mix real-line and positive families".into(),
        ));
    }
    if support != phi.shape.support() {
        return Err(MixError::Unsupported(format!(
            "phi shape {:?} does not match marginal support {:?}",
            phi.shape, support
        )));
    }
    let reals: Vec<DistributionSpec> = match support {
        Support::RealLine => problem.marginals.clone(),
        Support::Positive => problem
            .marginals
            .iter()
            .map(|m| log_transform_inverse(m, 1.0))
            .collect::<Result<_>>()?,
    };
    let gen = common_generator(reals.iter().map(|m| m.generator()))?;
    let sigmas: Vec<f64> = reals.iter().map(|m| m.sigma()).collect();
    let cond = check_condition(&phi.alphas, &sigmas)?;
    let weights: Vec<f64> = phi.alphas.iter().zip(&sigmas).map(|(a, s)| a * s).collect();
    let via_logs = if support == Support::Positive {
        "after taking logarithms, "
    } else {
        ""
    };

    if reals.iter().all(|m| matches!(m, DistributionSpec::Elliptical(_))) {
        let ell: Vec<Elliptical1D> = reals
            .iter()
            .map(|m| match m {
                DistributionSpec::Elliptical(e) => e.clone(),
                _ => unreachable!(),
            })
            .collect();
        let qualifier = if phi.is_injective() {
            Qualifier::Iff
        } else {
            Qualifier::SufficientOnly
        };
        let center_set = if cond.verdict.holds() {
            phi.center_from_linear(linear_center(&ell, &phi.alphas))
        } else {
            CenterSet::Unknown
        };
        let explanation = format!(
            "{via_logs}{} marginals with common {} generator; weighted scales {:?} give \
             sum - 2*max = {}; the condition is {} for this phi",
            n,
            gen.family_name(),
            weights,
            cond.margin,
            match qualifier {
                Qualifier::Iff => "necessary and sufficient",
                Qualifier::SufficientOnly => "sufficient (outer aggregate is not injective)",
            }
        );
        return Ok(Decision {
            verdict: cond.verdict,
            margin: cond.margin,
            qualifier,
            weights,
            center_set,
            explanation,
        });
    }

    if reals.iter().all(|m| matches!(m, DistributionSpec::TwoBump(_))) {
        if !phi.shape.is_abs() {
            return Err(MixError::Unsupported(
                "two-bump marginals are handled only for absolute-value aggregates".into(),
            ));
        }
        if !gen.is_unimodal() {
            return Err(MixError::Unsupported(
                "switch construction requires a unimodal generator".into(),
            ));
        }
        let offset: f64 = reals
            .iter()
            .zip(&phi.alphas)
            .map(|(m, a)| match m {
                DistributionSpec::TwoBump(t) => a * t.nu,
                _ => unreachable!(),
            })
            .sum();
        let center_set = if cond.verdict.holds() {
            CenterSet::Point(phi.outer.apply(offset))
        } else {
            CenterSet::Unknown
        };
        let explanation = format!(
            "{via_logs}{n} two-bump marginals with common unimodal {} generator; weighted scales {:?} \
             give sum - 2*max = {}; switching between a plus and minus joint mix fixes |aggregate| = {}; \
             the condition is sufficient",
            gen.family_name(),
            weights,
            cond.margin,
            offset
        );
        return Ok(Decision {
            verdict: cond.verdict,
            margin: cond.margin,
            qualifier: Qualifier::SufficientOnly,
            weights,
            center_set,
            explanation,
        });
    }

    Err(MixError::Unsupported(
        "marginals mix elliptical and two-bump families".into(),
    ))
}

/// Unique center `sum(alpha_i mu_i)` when every marginal has a finite mean.
pub fn joint_center(marginals: &[Elliptical1D], alphas: &[f64]) -> Result<CenterSet> {
    if marginals.len() != alphas.len() {
        return Err(MixError::Arity(format!(
            "{} alphas for {} marginals",
            alphas.len(),
            marginals.len()
        )));
    }
    if let Some(m) = marginals.iter().find(|m| !m.gen.finite_mean()) {
        return Err(MixError::Precondition(format!(
            "{} marginal has no finite mean; use the interval center operations",
            m.gen.family_name()
        )));
    }
    Ok(CenterSet::Point(
        marginals.iter().zip(alphas).map(|(m, a)| a * m.mu).sum(),
    ))
}

fn check_arity(n: usize) -> Result<()> {
    if n < 2 {
        Err(MixError::Arity(format!("center sets need n >= 2, got {n}")))
    } else {
        Ok(())
    }
}

fn cauchy_half_width(n: usize, sigma: f64) -> f64 {
    sigma * ((n - 1) as f64).ln() / PI
}

/// Centers of the sum of `n` copies of Cauchy(mu, sigma):
/// `[n mu - sigma log(n-1) / pi, n mu + sigma log(n-1) / pi]`.
pub fn cauchy_center_interval(n: usize, mu: f64, sigma: f64) -> Result<CenterSet> {
    check_arity(n)?;
    if !(sigma > 0.0) {
        return Err(MixError::InvalidParameter(format!("sigma must be positive, got {sigma}")));
    }
    let half = cauchy_half_width(n, sigma);
    let mid = n as f64 * mu;
    Ok(CenterSet::interval(mid - half, mid + half))
}

/// `[0, (sigma log(n-1)/pi + n mu)^2]` for `phi = (x_1 + ... + x_n)^2`.
pub fn phi_square_center_set(n: usize, mu: f64, sigma: f64) -> Result<CenterSet> {
    let (_, hi) = cauchy_center_interval(n, mu, sigma)?.bounds().expect("interval");
    Ok(CenterSet::interval(0.0, hi * hi))
}

/// Product centers of `n` copies of log-Cauchy(mu, sigma).
pub fn log_cauchy_product_interval(n: usize, mu: f64, sigma: f64) -> Result<CenterSet> {
    Ok(OuterFn::Exp.image(cauchy_center_interval(n, mu, sigma)?))
}

/// Center `outer(sum(nu_i))` certified by the switch construction.
pub fn switch_center(nus: &[f64], outer: OuterFn) -> Result<CenterSet> {
    if let Some(v) = nus.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
        return Err(MixError::InvalidParameter(format!("nus must be finite and >= 0, got {v}")));
    }
    Ok(CenterSet::Point(outer.apply(nus.iter().sum())))
}
