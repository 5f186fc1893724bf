//! Univariate families: elliptical, symmetric two-bump mixtures of an
//! elliptical law at `+nu` and `-nu`, and their exponentiated (log-) versions.

use rand::RngCore;
use rand_distr::{ChiSquared, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{MixError, Result};
use crate::generator::{generator_admissible, DensityGenerator, Moment};
use crate::numeric::{brent, integrate, QuadOptions};
use crate::rng::{fair_bit, open_unit, stream};

fn check_scale(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(MixError::InvalidParameter(format!(
            "sigma must be positive and finite, got {sigma}"
        )))
    }
}

fn check_location(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(MixError::InvalidParameter(format!("{name} must be finite, got {v}")))
    }
}

fn check_probability(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(MixError::Domain(format!("probability must lie in (0, 1), got {p}")))
    }
}

/// Draw from the standardized member of `gen`.
fn std_draw<R: RngCore + ?Sized>(gen: &DensityGenerator, rng: &mut R) -> f64 {
    match gen {
        DensityGenerator::StudentT { df } => {
            // Exact normal / chi-square representation; inverse-CDF inversion of
            // the incomplete beta is two orders of magnitude slower.
            let z = DensityGenerator::Normal.std_quantile(open_unit(rng));
            let chi = ChiSquared::new(*df).expect("df validated at construction");
            let g: f64 = chi.sample(rng);
            z * (df / g).sqrt()
        }
        _ => gen.std_quantile(open_unit(rng)),
    }
}

/// `E[exp(t Z)]` for the standardized member, when finite.
fn std_mgf(gen: &DensityGenerator, t: f64) -> Option<f64> {
    match gen {
        DensityGenerator::Normal => Some((0.5 * t * t).exp()),
        DensityGenerator::Laplace => (t.abs() < std::f64::consts::SQRT_2).then(|| 1.0 / (1.0 - 0.5 * t * t)),
        DensityGenerator::StudentT { .. } | DensityGenerator::Cauchy => None,
        DensityGenerator::Custom(table) => {
            let radius = table.points().last().map(|(u, _)| u.sqrt()).unwrap_or(0.0);
            let c = gen.normalizer();
            integrate(|z| c * gen.eval(z * z) * (t * z).exp(), -radius, radius, QuadOptions::default()).ok()
        }
    }
}

/// `Ell_1(mu, sigma^2, gen)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EllipticalRepr")]
pub struct Elliptical1D {
    pub mu: f64,
    pub sigma: f64,
    #[serde(rename = "generator")]
    pub gen: DensityGenerator,
}

#[derive(Deserialize)]
struct EllipticalRepr {
    mu: f64,
    sigma: f64,
    generator: DensityGenerator,
}

impl TryFrom<EllipticalRepr> for Elliptical1D {
    type Error = MixError;
    fn try_from(r: EllipticalRepr) -> Result<Self> {
        Elliptical1D::new(r.mu, r.sigma, r.generator)
    }
}

impl Elliptical1D {
    pub fn new(mu: f64, sigma: f64, gen: DensityGenerator) -> Result<Self> {
        check_location("mu", mu)?;
        check_scale(sigma)?;
        Ok(Self { mu, sigma, gen })
    }

    pub fn normal(mu: f64, sigma: f64) -> Result<Self> {
        Self::new(mu, sigma, DensityGenerator::Normal)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.gen.std_pdf((x - self.mu) / self.sigma) / self.sigma
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.gen.std_cdf((x - self.mu) / self.sigma)
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        check_probability(p)?;
        Ok(self.mu + self.sigma * self.gen.std_quantile(p))
    }

    pub fn draw<R: RngCore + ?Sized>(&self, rng: &mut R) -> f64 {
        self.mu + self.sigma * std_draw(&self.gen, rng)
    }

    pub fn mean(&self) -> Moment {
        if self.gen.finite_mean() {
            Moment::Finite(self.mu)
        } else {
            Moment::Undefined
        }
    }

    pub fn variance(&self) -> Moment {
        match self.gen.std_variance() {
            Moment::Finite(v) => Moment::Finite(v * self.sigma * self.sigma),
            Moment::Undefined => Moment::Undefined,
        }
    }
}

/// Normalizing constant `C` of the two-bump density
/// `(C / (2 sigma)) [f((x - nu)^2 / sigma^2) + f((x + nu)^2 / sigma^2)]`.
pub fn two_bump_normalizer(nu: f64, sigma: f64, gen: &DensityGenerator) -> Result<f64> {
    if !(nu >= 0.0) || !nu.is_finite() {
        return Err(MixError::InvalidParameter(format!("nu must be finite and >= 0, got {nu}")));
    }
    check_scale(sigma)?;
    let adm = generator_admissible(gen);
    if !adm.admissible {
        return Err(MixError::InadmissibleGenerator(
            adm.reason.unwrap_or_else(|| "integrability condition fails".into()),
        ));
    }
    Ok(gen.normalizer())
}

/// Equal mixture of `Ell_1(nu, sigma^2)` and `Ell_1(-nu, sigma^2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TwoBumpRepr")]
pub struct TwoBump {
    pub nu: f64,
    pub sigma: f64,
    #[serde(rename = "generator")]
    pub gen: DensityGenerator,
    #[serde(skip_serializing)]
    pub c_norm: f64,
}

#[derive(Deserialize)]
struct TwoBumpRepr {
    nu: f64,
    sigma: f64,
    generator: DensityGenerator,
}

impl TryFrom<TwoBumpRepr> for TwoBump {
    type Error = MixError;
    fn try_from(r: TwoBumpRepr) -> Result<Self> {
        TwoBump::new(r.nu, r.sigma, r.generator)
    }
}

impl TwoBump {
    pub fn new(nu: f64, sigma: f64, gen: DensityGenerator) -> Result<Self> {
        let c_norm = two_bump_normalizer(nu, sigma, &gen)?;
        Ok(Self { nu, sigma, gen, c_norm })
    }

    pub fn component(&self, sign: f64) -> Elliptical1D {
        Elliptical1D {
            mu: sign * self.nu,
            sigma: self.sigma,
            gen: self.gen.clone(),
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let a = (x - self.nu) / self.sigma;
        let b = (x + self.nu) / self.sigma;
        self.c_norm / (2.0 * self.sigma) * (self.gen.eval(a * a) + self.gen.eval(b * b))
    }

    pub fn cdf(&self, x: f64) -> f64 {
        0.5 * (self.gen.std_cdf((x - self.nu) / self.sigma) + self.gen.std_cdf((x + self.nu) / self.sigma))
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        check_probability(p)?;
        if self.nu == 0.0 {
            return Ok(self.sigma * self.gen.std_quantile(p));
        }
        // F(x) is squeezed between the two component CDFs, so the root lies in
        // [sigma q - nu, sigma q + nu] with q the standardized quantile.
        let q = self.sigma * self.gen.std_quantile(p);
        let (lo, hi) = (q - self.nu, q + self.nu);
        let g = |x: f64| {
            if p < 0.5 {
                self.cdf(x) - p
            } else {
                (1.0 - p) - self.sf(x)
            }
        };
        brent(g, lo, hi, 1e-14, 400)
            .ok_or_else(|| MixError::NumericalFailure(format!("two-bump quantile bracket failed at p = {p}")))
    }

    fn sf(&self, x: f64) -> f64 {
        0.5 * (self.gen.std_sf((x - self.nu) / self.sigma) + self.gen.std_sf((x + self.nu) / self.sigma))
    }

    pub fn draw<R: RngCore + ?Sized>(&self, rng: &mut R) -> f64 {
        let sign = if fair_bit(rng) { 1.0 } else { -1.0 };
        sign * self.nu + self.sigma * std_draw(&self.gen, rng)
    }

    pub fn mean(&self) -> Moment {
        if self.gen.finite_mean() {
            Moment::Finite(0.0)
        } else {
            Moment::Undefined
        }
    }

    pub fn variance(&self) -> Moment {
        match self.gen.std_variance() {
            Moment::Finite(v) => Moment::Finite(v * self.sigma * self.sigma + self.nu * self.nu),
            Moment::Undefined => Moment::Undefined,
        }
    }
}

/// Law of `exp(Y)` with `Y ~ Ell_1(mu, sigma^2, gen)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EllipticalRepr")]
pub struct LogElliptical1D {
    pub mu: f64,
    pub sigma: f64,
    #[serde(rename = "generator")]
    pub gen: DensityGenerator,
}

impl TryFrom<EllipticalRepr> for LogElliptical1D {
    type Error = MixError;
    fn try_from(r: EllipticalRepr) -> Result<Self> {
        LogElliptical1D::new(r.mu, r.sigma, r.generator)
    }
}

impl LogElliptical1D {
    pub fn new(mu: f64, sigma: f64, gen: DensityGenerator) -> Result<Self> {
        check_location("mu", mu)?;
        check_scale(sigma)?;
        Ok(Self { mu, sigma, gen })
    }

    pub fn underlying(&self) -> Elliptical1D {
        Elliptical1D {
            mu: self.mu,
            sigma: self.sigma,
            gen: self.gen.clone(),
        }
    }
}

/// Law of `exp(Y)` with `Y` two-bump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TwoBumpRepr")]
pub struct LogTwoBump {
    pub nu: f64,
    pub sigma: f64,
    #[serde(rename = "generator")]
    pub gen: DensityGenerator,
    #[serde(skip_serializing)]
    pub c_norm: f64,
}

impl TryFrom<TwoBumpRepr> for LogTwoBump {
    type Error = MixError;
    fn try_from(r: TwoBumpRepr) -> Result<Self> {
        LogTwoBump::new(r.nu, r.sigma, r.generator)
    }
}

impl LogTwoBump {
    pub fn new(nu: f64, sigma: f64, gen: DensityGenerator) -> Result<Self> {
        let c_norm = two_bump_normalizer(nu, sigma, &gen)?;
        Ok(Self { nu, sigma, gen, c_norm })
    }

    pub fn underlying(&self) -> TwoBump {
        TwoBump {
            nu: self.nu,
            sigma: self.sigma,
            gen: self.gen.clone(),
            c_norm: self.c_norm,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Support {
    RealLine,
    Positive,
}

/// Tagged univariate family, serialized with a `kind` field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistributionSpec {
    Elliptical(Elliptical1D),
    TwoBump(TwoBump),
    LogElliptical(LogElliptical1D),
    LogTwoBump(LogTwoBump),
}

impl From<Elliptical1D> for DistributionSpec {
    fn from(d: Elliptical1D) -> Self {
        DistributionSpec::Elliptical(d)
    }
}
impl From<TwoBump> for DistributionSpec {
    fn from(d: TwoBump) -> Self {
        DistributionSpec::TwoBump(d)
    }
}
impl From<LogElliptical1D> for DistributionSpec {
    fn from(d: LogElliptical1D) -> Self {
        DistributionSpec::LogElliptical(d)
    }
}
impl From<LogTwoBump> for DistributionSpec {
    fn from(d: LogTwoBump) -> Self {
        DistributionSpec::LogTwoBump(d)
    }
}

fn require_positive(x: f64) -> Result<f64> {
    if x > 0.0 {
        Ok(x.ln())
    } else {
        Err(MixError::Domain(format!(
            "log-family density is defined only for x > 0, got {x}"
        )))
    }
}

impl DistributionSpec {
    pub fn generator(&self) -> &DensityGenerator {
        match self {
            DistributionSpec::Elliptical(d) => &d.gen,
            DistributionSpec::TwoBump(d) => &d.gen,
            DistributionSpec::LogElliptical(d) => &d.gen,
            DistributionSpec::LogTwoBump(d) => &d.gen,
        }
    }

    pub fn sigma(&self) -> f64 {
        match self {
            DistributionSpec::Elliptical(d) => d.sigma,
            DistributionSpec::TwoBump(d) => d.sigma,
            DistributionSpec::LogElliptical(d) => d.sigma,
            DistributionSpec::LogTwoBump(d) => d.sigma,
        }
    }

    pub fn support(&self) -> Support {
        match self {
            DistributionSpec::Elliptical(_) | DistributionSpec::TwoBump(_) => Support::RealLine,
            _ => Support::Positive,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            DistributionSpec::Elliptical(_) => "elliptical",
            DistributionSpec::TwoBump(_) => "two_bump",
            DistributionSpec::LogElliptical(_) => "log_elliptical",
            DistributionSpec::LogTwoBump(_) => "log_two_bump",
        }
    }

    /// Symmetric about zero (`f(x) = f(-x)`).
    pub fn is_symmetric(&self) -> bool {
        match self {
            DistributionSpec::Elliptical(d) => d.mu == 0.0,
            DistributionSpec::TwoBump(_) => true,
            _ => false,
        }
    }

    pub fn pdf(&self, x: f64) -> Result<f64> {
        match self {
            DistributionSpec::Elliptical(d) => Ok(d.pdf(x)),
            DistributionSpec::TwoBump(d) => Ok(d.pdf(x)),
            DistributionSpec::LogElliptical(d) => {
                let y = require_positive(x)?;
                Ok(d.underlying().pdf(y) / x)
            }
            DistributionSpec::LogTwoBump(d) => {
                let y = require_positive(x)?;
                Ok(d.underlying().pdf(y) / x)
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            DistributionSpec::Elliptical(d) => d.cdf(x),
            DistributionSpec::TwoBump(d) => d.cdf(x),
            DistributionSpec::LogElliptical(d) => {
                if x > 0.0 {
                    d.underlying().cdf(x.ln())
                } else {
                    0.0
                }
            }
            DistributionSpec::LogTwoBump(d) => {
                if x > 0.0 {
                    d.underlying().cdf(x.ln())
                } else {
                    0.0
                }
            }
        }
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        match self {
            DistributionSpec::Elliptical(d) => d.quantile(p),
            DistributionSpec::TwoBump(d) => d.quantile(p),
            DistributionSpec::LogElliptical(d) => d.underlying().quantile(p).map(f64::exp),
            DistributionSpec::LogTwoBump(d) => d.underlying().quantile(p).map(f64::exp),
        }
    }

    pub fn draw<R: RngCore + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            DistributionSpec::Elliptical(d) => d.draw(rng),
            DistributionSpec::TwoBump(d) => d.draw(rng),
            DistributionSpec::LogElliptical(d) => d.underlying().draw(rng).exp(),
            DistributionSpec::LogTwoBump(d) => d.underlying().draw(rng).exp(),
        }
    }

    /// `n` independent draws, reproducible from `seed` (stream 0).
    pub fn sample(&self, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = stream(seed, 0);
        (0..n).map(|_| self.draw(&mut rng)).collect()
    }

    pub fn mean(&self) -> Moment {
        match self {
            DistributionSpec::Elliptical(d) => d.mean(),
            DistributionSpec::TwoBump(d) => d.mean(),
            DistributionSpec::LogElliptical(d) => match std_mgf(&d.gen, d.sigma) {
                Some(m) => Moment::Finite(d.mu.exp() * m),
                None => Moment::Undefined,
            },
            DistributionSpec::LogTwoBump(d) => match std_mgf(&d.gen, d.sigma) {
                Some(m) => Moment::Finite(d.nu.cosh() * m),
                None => Moment::Undefined,
            },
        }
    }

    pub fn variance(&self) -> Moment {
        match self {
            DistributionSpec::Elliptical(d) => d.variance(),
            DistributionSpec::TwoBump(d) => d.variance(),
            DistributionSpec::LogElliptical(d) => match (std_mgf(&d.gen, d.sigma), std_mgf(&d.gen, 2.0 * d.sigma)) {
                (Some(m1), Some(m2)) => Moment::Finite((2.0 * d.mu).exp() * (m2 - m1 * m1)),
                _ => Moment::Undefined,
            },
            DistributionSpec::LogTwoBump(d) => match (std_mgf(&d.gen, d.sigma), std_mgf(&d.gen, 2.0 * d.sigma)) {
                (Some(m1), Some(m2)) => {
                    let mean = d.nu.cosh() * m1;
                    Moment::Finite((2.0 * d.nu).cosh() * m2 - mean * mean)
                }
                _ => Moment::Undefined,
            },
        }
    }
}

/// Exponentiates a real-line family: `Y` becomes `X = exp(Y / alpha)`, so the
/// output law `F` satisfies `F(x) = G(alpha log x)` for the input law `G`.
pub fn log_transform(d: &DistributionSpec, alpha: f64) -> Result<DistributionSpec> {
    check_alpha(alpha)?;
    match d {
        DistributionSpec::Elliptical(e) => {
            Ok(LogElliptical1D::new(e.mu / alpha, e.sigma / alpha, e.gen.clone())?.into())
        }
        DistributionSpec::TwoBump(t) => Ok(LogTwoBump::new(t.nu / alpha, t.sigma / alpha, t.gen.clone())?.into()),
        _ => Err(MixError::Precondition(format!(
            "log_transform expects a real-line family, got {}",
            d.kind_name()
        ))),
    }
}

/// Inverse of [`log_transform`]: `X` positive becomes `alpha log X`.
pub fn log_transform_inverse(d: &DistributionSpec, alpha: f64) -> Result<DistributionSpec> {
    check_alpha(alpha)?;
    match d {
        DistributionSpec::LogElliptical(e) => {
            Ok(Elliptical1D::new(alpha * e.mu, alpha * e.sigma, e.gen.clone())?.into())
        }
        DistributionSpec::LogTwoBump(t) => Ok(TwoBump::new(alpha * t.nu, alpha * t.sigma, t.gen.clone())?.into()),
        _ => Err(MixError::Precondition(format!(
            "log_transform_inverse expects a log family, got {}",
            d.kind_name()
        ))),
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(MixError::InvalidParameter(format!("alpha must be positive, got {alpha}")))
    }
}
