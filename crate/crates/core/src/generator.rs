//! Density generators and characteristic generators of one-dimensional
//! elliptical laws.
//!
//! A density generator `f` defines the standardized density `c * f(z^2)` on the
//! real line, where `1 / c = \int_0^\infty u^{-1/2} f(u) du`. The matching
//! characteristic generator `psi` satisfies `E[exp(i t Z)] = psi(t^2)`.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use statrs::function::erf::{erfc, erfc_inv};
use statrs::function::gamma::ln_gamma;

use crate::error::{MixError, Result};
use crate::numeric::{brent, integrate, integrate_to_infinity, QuadOptions};

/// A moment that may fail to exist.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "value", rename_all = "snake_case")]
pub enum Moment {
    Finite(f64),
    Undefined,
}

impl Moment {
    pub fn value(self) -> Option<f64> {
        match self {
            Moment::Finite(v) => Some(v),
            Moment::Undefined => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Moment::Finite(_))
    }
}

/// Monotone (Fritsch-Carlson) interpolant of a tabulated density generator.
///
/// Below the first knot the generator is held at its first value; beyond the
/// last knot it is zero, so the standardized law has support `|z| <= sqrt(u_last)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorTable {
    u: Vec<f64>,
    f: Vec<f64>,
    slopes: Vec<f64>,
    psi_infty: bool,
    // Derived once at construction.
    norm: f64,
    knots_z: Vec<f64>,
    prefix: Vec<f64>,
    second_moment: f64,
}

impl GeneratorTable {
    pub fn new(points: Vec<(f64, f64)>, psi_infty: bool) -> Result<Self> {
        if points.len() < 2 {
            return Err(MixError::InvalidParameter(
                "generator table needs at least two points".into(),
            ));
        }
        for w in points.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(MixError::InvalidParameter(
                    "generator table u values must be strictly increasing".into(),
                ));
            }
        }
        if points.iter().any(|&(u, f)| !(u >= 0.0) || !u.is_finite() || !(f >= 0.0) || !f.is_finite()) {
            return Err(MixError::InvalidParameter(
                "generator table needs finite u >= 0 and f(u) >= 0".into(),
            ));
        }
        let (u, f): (Vec<f64>, Vec<f64>) = points.into_iter().unzip();
        let slopes = pchip_slopes(&u, &f);
        let mut table = GeneratorTable {
            u,
            f,
            slopes,
            psi_infty,
            norm: 0.0,
            knots_z: Vec::new(),
            prefix: Vec::new(),
            second_moment: 0.0,
        };
        table.finish()?;
        Ok(table)
    }

    fn finish(&mut self) -> Result<()> {
        let mut knots = vec![0.0];
        knots.extend(self.u.iter().filter(|&&u| u > 0.0).map(|u| u.sqrt()));
        let opts = QuadOptions::default();
        let mut prefix = vec![0.0];
        let mut m2 = 0.0;
        for w in knots.windows(2) {
            let part = integrate(|z| self.eval(z * z), w[0], w[1], opts)
                .map_err(|e| MixError::NumericalFailure(format!("generator table integral: {e:?}")))?;
            prefix.push(prefix.last().unwrap() + part);
            m2 += integrate(|z| z * z * self.eval(z * z), w[0], w[1], opts)
                .map_err(|e| MixError::NumericalFailure(format!("generator table moment: {e:?}")))?;
        }
        let half_mass = *prefix.last().unwrap();
        if !(half_mass > 0.0) {
            return Err(MixError::InadmissibleGenerator(
                "tabulated generator has zero mass".into(),
            ));
        }
        self.norm = 1.0 / (2.0 * half_mass);
        self.second_moment = 2.0 * self.norm * m2;
        self.knots_z = knots;
        self.prefix = prefix;
        Ok(())
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.u.iter().copied().zip(self.f.iter().copied())
    }

    pub fn psi_infty(&self) -> bool {
        self.psi_infty
    }

    pub fn eval(&self, u: f64) -> f64 {
        let n = self.u.len();
        if u <= self.u[0] {
            return self.f[0];
        }
        if u > self.u[n - 1] {
            return 0.0;
        }
        let k = match self.u.binary_search_by(|x| x.total_cmp(&u)) {
            Ok(k) => return self.f[k],
            Err(k) => k - 1,
        };
        let h = self.u[k + 1] - self.u[k];
        let t = (u - self.u[k]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        (h00 * self.f[k] + h10 * h * self.slopes[k] + h01 * self.f[k + 1] + h11 * h * self.slopes[k + 1]).max(0.0)
    }

    fn support_radius(&self) -> f64 {
        self.u[self.u.len() - 1].sqrt()
    }

    fn is_nonincreasing(&self) -> bool {
        self.f.windows(2).all(|w| w[1] <= w[0])
    }

    /// `c * \int_0^z f(t^2) dt` for `z >= 0`.
    fn half_cdf(&self, z: f64) -> f64 {
        let z = z.min(self.support_radius());
        let k = match self.knots_z.binary_search_by(|x| x.total_cmp(&z)) {
            Ok(k) => return self.norm * self.prefix[k],
            Err(k) => k - 1,
        };
        let rest = integrate(|t| self.eval(t * t), self.knots_z[k], z, QuadOptions::default()).unwrap_or(0.0);
        self.norm * (self.prefix[k] + rest)
    }
}

fn pchip_slopes(u: &[f64], f: &[f64]) -> Vec<f64> {
    let n = u.len();
    let h: Vec<f64> = u.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|k| (f[k + 1] - f[k]) / h[k]).collect();
    let mut d = vec![0.0; n];
    d[0] = delta[0];
    d[n - 1] = delta[n - 2];
    for k in 1..n - 1 {
        if delta[k - 1] * delta[k] > 0.0 {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            d[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
        }
    }
    d
}

/// Density generator `f` of a one-dimensional elliptical family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GeneratorRepr", into = "GeneratorRepr")]
pub enum DensityGenerator {
    Normal,
    StudentT { df: f64 },
    Cauchy,
    /// Laplace law scaled so that the unit member has variance one.
    Laplace,
    Custom(GeneratorTable),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct GeneratorRepr {
    family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    df: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    table: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    psi_infty: Option<bool>,
}

impl TryFrom<GeneratorRepr> for DensityGenerator {
    type Error = MixError;

    fn try_from(r: GeneratorRepr) -> Result<Self> {
        match r.family.as_str() {
            "normal" => Ok(DensityGenerator::Normal),
            "cauchy" => Ok(DensityGenerator::Cauchy),
            "laplace" => Ok(DensityGenerator::Laplace),
            "student_t" => {
                let df = r
                    .df
                    .ok_or_else(|| MixError::InvalidParameter("generator.df is required for student_t".into()))?;
                DensityGenerator::student_t(df)
            }
            "custom" => {
                let table = r
                    .table
                    .ok_or_else(|| MixError::InvalidParameter("generator.table is required for custom".into()))?;
                let points = table.into_iter().map(|[u, f]| (u, f)).collect();
                Ok(DensityGenerator::Custom(GeneratorTable::new(
                    points,
                    r.psi_infty.unwrap_or(false),
                )?))
            }
            other => Err(MixError::InvalidParameter(format!(
                "generator.family: unknown family {other:?}"
            ))),
        }
    }
}

impl From<DensityGenerator> for GeneratorRepr {
    fn from(g: DensityGenerator) -> Self {
        let mut r = GeneratorRepr {
            family: g.family_name().to_string(),
            df: None,
            table: None,
            psi_infty: None,
        };
        match g {
            DensityGenerator::StudentT { df } => r.df = Some(df),
            DensityGenerator::Custom(t) => {
                r.table = Some(t.points().map(|(u, f)| [u, f]).collect());
                r.psi_infty = Some(t.psi_infty);
            }
            _ => {}
        }
        r
    }
}

impl DensityGenerator {
    pub fn student_t(df: f64) -> Result<Self> {
        if !(df > 0.0) || !df.is_finite() {
            return Err(MixError::InvalidParameter(format!(
                "generator.df must be a positive finite number, got {df}"
            )));
        }
        Ok(DensityGenerator::StudentT { df })
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            DensityGenerator::Normal => "normal",
            DensityGenerator::StudentT { .. } => "student_t",
            DensityGenerator::Cauchy => "cauchy",
            DensityGenerator::Laplace => "laplace",
            DensityGenerator::Custom(_) => "custom",
        }
    }

    /// `f(u)` for `u >= 0`.
    pub fn eval(&self, u: f64) -> f64 {
        match self {
            DensityGenerator::Normal => (-0.5 * u).exp(),
            DensityGenerator::StudentT { df } => (1.0 + u / df).powf(-0.5 * (df + 1.0)),
            DensityGenerator::Cauchy => 1.0 / (1.0 + u),
            DensityGenerator::Laplace => (-(2.0 * u).sqrt()).exp(),
            DensityGenerator::Custom(t) => t.eval(u),
        }
    }

    /// Normalizing constant `c` of the standardized density `c * f(z^2)`.
    pub fn normalizer(&self) -> f64 {
        match self {
            DensityGenerator::Normal => 1.0 / (2.0 * PI).sqrt(),
            DensityGenerator::StudentT { df } => {
                (ln_gamma(0.5 * (df + 1.0)) - ln_gamma(0.5 * df)).exp() / (df * PI).sqrt()
            }
            DensityGenerator::Cauchy => 1.0 / PI,
            DensityGenerator::Laplace => 1.0 / SQRT_2,
            DensityGenerator::Custom(t) => t.norm,
        }
    }

    pub fn std_pdf(&self, z: f64) -> f64 {
        self.normalizer() * self.eval(z * z)
    }

    pub fn std_cdf(&self, z: f64) -> f64 {
        match self {
            DensityGenerator::Normal => 0.5 * erfc(-z / SQRT_2),
            DensityGenerator::Cauchy => 0.5 + z.atan() / PI,
            DensityGenerator::Laplace => {
                if z < 0.0 {
                    0.5 * (SQRT_2 * z).exp()
                } else {
                    1.0 - 0.5 * (-SQRT_2 * z).exp()
                }
            }
            DensityGenerator::StudentT { df } => {
                if z.is_infinite() {
                    return if z > 0.0 { 1.0 } else { 0.0 };
                }
                let x = df / (df + z * z);
                let tail = 0.5 * beta_reg(0.5 * df, 0.5, x);
                if z < 0.0 {
                    tail
                } else {
                    1.0 - tail
                }
            }
            DensityGenerator::Custom(t) => {
                let h = t.half_cdf(z.abs());
                if z < 0.0 {
                    0.5 - h
                } else {
                    0.5 + h
                }
            }
        }
    }

    /// Upper tail `1 - F(z)`, accurate for large `z`.
    pub fn std_sf(&self, z: f64) -> f64 {
        self.std_cdf(-z)
    }

    pub fn std_quantile(&self, p: f64) -> f64 {
        match self {
            DensityGenerator::Normal => -SQRT_2 * erfc_inv(2.0 * p),
            DensityGenerator::Cauchy => (PI * (p - 0.5)).tan(),
            DensityGenerator::Laplace => {
                let b = 1.0 / SQRT_2;
                if p < 0.5 {
                    b * (2.0 * p).ln()
                } else {
                    -b * (2.0 * (1.0 - p)).ln()
                }
            }
            DensityGenerator::StudentT { .. } | DensityGenerator::Custom(_) => self.numeric_quantile(p),
        }
    }

    fn numeric_quantile(&self, p: f64) -> f64 {
        if p == 0.5 {
            return 0.0;
        }
        // Symmetric law: solve in the upper half using the tail, which keeps
        // precision for p near 0 or 1.
        let q = p.min(1.0 - p);
        let mut hi = match self {
            DensityGenerator::Custom(t) => t.support_radius(),
            _ => 1.0,
        };
        while self.std_sf(hi) > q && hi < 1e300 {
            hi *= 2.0;
        }
        let z = brent(|z| self.std_sf(z) - q, 0.0, hi, 1e-14, 400).unwrap_or(hi);
        if p < 0.5 {
            -z
        } else {
            z
        }
    }

    pub fn finite_mean(&self) -> bool {
        match self {
            DensityGenerator::StudentT { df } => *df > 1.0,
            DensityGenerator::Cauchy => false,
            _ => true,
        }
    }

    /// Variance of the standardized member (`-2 psi'(0)`).
    pub fn std_variance(&self) -> Moment {
        match self {
            DensityGenerator::Normal | DensityGenerator::Laplace => Moment::Finite(1.0),
            DensityGenerator::StudentT { df } if *df > 2.0 => Moment::Finite(df / (df - 2.0)),
            DensityGenerator::StudentT { .. } | DensityGenerator::Cauchy => Moment::Undefined,
            DensityGenerator::Custom(t) => Moment::Finite(t.second_moment),
        }
    }

    pub fn is_unimodal(&self) -> bool {
        match self {
            DensityGenerator::Custom(t) => t.is_nonincreasing(),
            _ => true,
        }
    }

    pub fn char_generator(&self) -> CharGenerator {
        CharGenerator {
            family: self.clone(),
        }
    }
}

/// Characteristic generator `psi`: the standardized member has characteristic
/// function `psi(t^2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CharGenerator {
    family: DensityGenerator,
}

impl CharGenerator {
    pub fn family(&self) -> &DensityGenerator {
        &self.family
    }

    pub fn psi(&self, s: f64) -> f64 {
        match &self.family {
            DensityGenerator::Normal => (-0.5 * s).exp(),
            DensityGenerator::Cauchy => (-s.sqrt()).exp(),
            DensityGenerator::Laplace => 1.0 / (1.0 + 0.5 * s),
            DensityGenerator::StudentT { df } => student_t_psi(*df, s),
            DensityGenerator::Custom(t) => {
                let c = t.norm;
                let w = s.sqrt();
                let mut total = 0.0;
                for k in t.knots_z.windows(2) {
                    total += integrate(|z| (w * z).cos() * t.eval(z * z), k[0], k[1], QuadOptions::default())
                        .unwrap_or_else(|e| e.estimate);
                }
                2.0 * c * total
            }
        }
    }

    /// `psi'(0)` when finite.
    pub fn psi_prime_at_zero(&self) -> Option<f64> {
        self.family.std_variance().value().map(|v| -0.5 * v)
    }

    /// Declared membership in the class of generators valid in every dimension
    /// (the normal scale mixtures).
    pub fn psi_infty(&self) -> bool {
        match &self.family {
            DensityGenerator::Custom(t) => t.psi_infty,
            _ => true,
        }
    }
}

// psi(s) = E[exp(-s W / 2)] with W = df / chi2(df).
fn student_t_psi(df: f64, s: f64) -> f64 {
    if s == 0.0 {
        return 1.0;
    }
    let a = 0.5 * df;
    let log_norm = -a * 2f64.ln() - ln_gamma(a);
    integrate_to_infinity(
        |g| {
            if g <= 0.0 {
                return 0.0;
            }
            (log_norm + (a - 1.0) * g.ln() - 0.5 * g - 0.5 * s * df / g).exp()
        },
        0.0,
        QuadOptions {
            abs_tol: 1e-13,
            rel_tol: 1e-12,
            max_intervals: 4000,
        },
    )
    .unwrap_or_else(|e| e.estimate)
}

/// Outcome of the integrability test `0 < \int_0^\infty u^{-1/2} f(u) du < \infty`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Admissibility {
    pub admissible: bool,
    pub integral: Option<f64>,
    pub reason: Option<String>,
}

/// Numerically tests the integrability condition for an arbitrary generator.
///
/// The range is split at `u = 1`; `[0, 1]` is mapped by `u = v^2` and `[1, inf)`
/// by `u = v^{-2}`.
pub fn admissibility_of<F: Fn(f64) -> f64>(f: F) -> Admissibility {
    let probe = (-30..=30).map(|k| 2f64.powi(k));
    if let Some(u) = probe.clone().find(|&u| !(f(u) >= 0.0)) {
        return Admissibility {
            admissible: false,
            integral: None,
            reason: Some(format!("generator is negative or undefined at u = {u}")),
        };
    }
    let opts = QuadOptions::default();
    let near = integrate(|v| 2.0 * f(v * v), 0.0, 1.0, opts);
    let far = integrate(
        |v| {
            let y = 2.0 * f(1.0 / (v * v)) / (v * v);
            if y.is_nan() { 0.0 } else { y }
        },
        0.0,
        1.0,
        opts,
    );
    match (near, far) {
        (Ok(a), Ok(b)) => {
            let total = a + b;
            if total > 0.0 && total.is_finite() {
                Admissibility {
                    admissible: true,
                    integral: Some(total),
                    reason: None,
                }
            } else {
                Admissibility {
                    admissible: false,
                    integral: Some(total),
                    reason: Some("integral is not strictly positive".into()),
                }
            }
        }
        (Err(e), _) => Admissibility {
            admissible: false,
            integral: None,
            reason: Some(format!(
                "integral over (0, 1] did not converge (estimate {:.3e}, error {:.3e})",
                e.estimate, e.error
            )),
        },
        (_, Err(e)) => Admissibility {
            admissible: false,
            integral: None,
            reason: Some(format!(
                "integral over [1, inf) did not converge (estimate {:.3e}, error {:.3e})",
                e.estimate, e.error
            )),
        },
    }
}

pub fn generator_admissible(gen: &DensityGenerator) -> Admissibility {
    admissibility_of(|u| gen.eval(u))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table_normal() -> DensityGenerator {
        let pts = (0..=400).map(|k| {
            let u = k as f64 * 0.1;
            (u, (-0.5 * u).exp())
        });
        DensityGenerator::Custom(GeneratorTable::new(pts.collect(), true).unwrap())
    }

    #[test]
    fn normal_generator_integral() {
        let a = generator_admissible(&DensityGenerator::Normal);
        assert!(a.admissible);
        assert!((a.integral.unwrap() - (2.0 * PI).sqrt()).abs() < 1e-9);
    }

    #[test]
    fn cauchy_generator_integral() {
        let a = generator_admissible(&DensityGenerator::Cauchy);
        assert!(a.admissible);
        assert!((a.integral.unwrap() - PI).abs() < 1e-9);
    }

    #[test]
    fn reciprocal_is_inadmissible() {
        let a = admissibility_of(|u| 1.0 / u);
        assert!(!a.admissible);
        assert!(a.reason.is_some());
    }

    #[test]
    fn negative_generator_rejected() {
        assert!(!admissibility_of(|u| 1.0 - u).admissible);
    }

    #[test]
    fn normalizer_is_reciprocal_integral() {
        for g in [
            DensityGenerator::Normal,
            DensityGenerator::Cauchy,
            DensityGenerator::Laplace,
            DensityGenerator::StudentT { df: 3.0 },
            DensityGenerator::StudentT { df: 7.5 },
        ] {
            let i = generator_admissible(&g).integral.unwrap();
            assert!((g.normalizer() * i - 1.0).abs() < 1e-9, "{g:?}");
        }
    }

    #[test]
    fn student_t_with_one_df_is_cauchy() {
        let t = DensityGenerator::StudentT { df: 1.0 };
        for z in [-3.0, -0.5, 0.0, 0.7, 5.0] {
            assert!((t.std_cdf(z) - DensityGenerator::Cauchy.std_cdf(z)).abs() < 1e-12);
        }
        let psi = t.char_generator();
        for s in [0.1, 1.0, 4.0] {
            assert!((psi.psi(s) - (-s.sqrt()).exp()).abs() < 1e-8, "s={s}");
        }
    }

    #[test]
    fn std_quantiles_invert_cdf() {
        for g in [
            DensityGenerator::Normal,
            DensityGenerator::Cauchy,
            DensityGenerator::Laplace,
            DensityGenerator::StudentT { df: 3.0 },
            DensityGenerator::StudentT { df: 0.7 },
        ] {
            for k in 1..100 {
                let p = k as f64 / 100.0;
                let z = g.std_quantile(p);
                assert!((g.std_cdf(z) - p).abs() < 1e-10, "{g:?} p={p}");
            }
        }
    }

    #[test]
    fn tabulated_normal_tracks_closed_form() {
        let g = table_normal();
        assert!((g.normalizer() - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-5);
        for z in [-2.0, -0.3, 0.0, 1.1, 4.0] {
            assert!((g.std_cdf(z) - DensityGenerator::Normal.std_cdf(z)).abs() < 1e-5);
        }
        assert!((g.std_variance().value().unwrap() - 1.0).abs() < 1e-4);
        assert!((g.char_generator().psi(1.0) - (-0.5f64).exp()).abs() < 1e-5);
        assert!(g.is_unimodal());
    }

    #[test]
    fn table_rejects_malformed_input() {
        assert!(GeneratorTable::new(vec![(0.0, 1.0)], false).is_err());
        assert!(GeneratorTable::new(vec![(1.0, 1.0), (0.5, 1.0)], false).is_err());
        assert!(GeneratorTable::new(vec![(0.0, -1.0), (1.0, 0.0)], false).is_err());
        assert!(GeneratorTable::new(vec![(0.0, 0.0), (1.0, 0.0)], false).is_err());
    }

    #[test]
    fn psi_prime_matches_variance() {
        let t = DensityGenerator::StudentT { df: 3.0 }.char_generator();
        assert_eq!(t.psi_prime_at_zero(), Some(-1.5));
        assert_eq!(DensityGenerator::Cauchy.char_generator().psi_prime_at_zero(), None);
        assert_eq!(DensityGenerator::Normal.char_generator().psi_prime_at_zero(), Some(-0.5));
    }

    #[test]
    fn generator_json_shape() {
        let g: DensityGenerator = serde_json::from_str(r#"{"family":"student_t","df":3}"#).unwrap();
        assert_eq!(g, DensityGenerator::StudentT { df: 3.0 });
        let e = serde_json::from_str::<DensityGenerator>(r#"{"family":"stable"}"#).unwrap_err();
        assert!(e.to_string().contains("generator.family"));
    }
}
