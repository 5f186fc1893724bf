//! Explicit couplings whose aggregate is almost surely constant.
//!
//! The base construction is a degenerate Gaussian vector: a correlation matrix
//! `R` with `R w = 0` for the weighted scales `w_i = alpha_i sigma_i` makes
//! `sum(alpha_i sigma_i V_i)` vanish identically for `V ~ N(0, R)`. Multiplying
//! by an independent mixing variable gives the same degeneracy for every normal
//! scale mixture. Two such mixes at `+nu` and `-nu`, glued by a fair switch,
//! fix the absolute aggregate; exponentiating coordinates turns sums into
//! products.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::RngCore;
use rand_distr::{ChiSquared, Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::distributions::{log_transform, log_transform_inverse, DistributionSpec, Elliptical1D, Support, TwoBump};
use crate::error::{MixError, Result};
use crate::generator::{generator_admissible, DensityGenerator};
use crate::mixability::{condition_for_weights, decide, CenterSet, MixProblem, OuterFn, PhiShape, PhiSpec, Verdict};
use crate::rng::{child_id, fair_bit, stream, StreamRng};

/// Certificate tolerances.
pub const MIN_EIGEN_TOL: f64 = -1e-10;
pub const KERNEL_TOL: f64 = 1e-10;
/// Eigenvalues below this are treated as zero in the square-root factor.
pub const EIGEN_CLAMP: f64 = 1e-12;

const PROJECTION_MAX_ITER: usize = 10_000;
const PROJECTION_TARGET: f64 = 1e-11;

/// Correlation matrix `R` (row-major) annihilating the weight vector `w`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationCertificate {
    pub n: usize,
    pub r: Vec<f64>,
    pub weights: Vec<f64>,
}

impl CorrelationCertificate {
    fn from_matrix(r: &DMatrix<f64>, w: &[f64]) -> Self {
        let n = r.nrows();
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(0.5 * (r[(i, j)] + r[(j, i)]));
            }
        }
        Self {
            n,
            r: data,
            weights: w.to_vec(),
        }
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, &self.r)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.matrix().symmetric_eigenvalues().min()
    }

    /// `||R w||_inf / ||w||_inf`
    pub fn kernel_residual(&self) -> f64 {
        let rw = self.matrix() * DVector::from_column_slice(&self.weights);
        rw.amax() / self.weights.iter().fold(0.0f64, |a, b| a.max(b.abs()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.r.len() != self.n * self.n || self.weights.len() != self.n || self.n < 2 {
            return Err(MixError::CertificateInvalid(format!(
                "shape mismatch: n = {}, {} matrix entries, {} weights",
                self.n,
                self.r.len(),
                self.weights.len()
            )));
        }
        if self.weights.iter().any(|w| !(*w > 0.0)) {
            return Err(MixError::CertificateInvalid("weights must be positive".into()));
        }
        let m = self.matrix();
        for i in 0..self.n {
            if (m[(i, i)] - 1.0).abs() > KERNEL_TOL {
                return Err(MixError::CertificateInvalid(format!("diagonal entry {i} is {}", m[(i, i)])));
            }
            for j in 0..i {
                if (m[(i, j)] - m[(j, i)]).abs() > KERNEL_TOL {
                    return Err(MixError::CertificateInvalid(format!("not symmetric at ({i}, {j})")));
                }
            }
        }
        let min_eig = self.min_eigenvalue();
        if min_eig < MIN_EIGEN_TOL {
            return Err(MixError::CertificateInvalid(format!(
                "negative eigenvalue {min_eig:e}"
            )));
        }
        let res = self.kernel_residual();
        if res > KERNEL_TOL {
            return Err(MixError::CertificateInvalid(format!("|R w|/|w| = {res:e}")));
        }
        Ok(())
    }

    /// Square-root factor `L` with `L L' = R`, built from the eigendecomposition
    /// with small eigenvalues clamped to zero; columns are projected onto the
    /// orthogonal complement of `w`.
    pub fn sqrt_factor(&self) -> DMatrix<f64> {
        let eig = SymmetricEigen::new(self.matrix());
        let n = self.n;
        let mut l = eig.eigenvectors.clone();
        for k in 0..n {
            let lambda = eig.eigenvalues[k];
            let s = if lambda < EIGEN_CLAMP { 0.0 } else { lambda.sqrt() };
            for i in 0..n {
                l[(i, k)] *= s;
            }
        }
        let w = DVector::from_column_slice(&self.weights);
        let ww = w.dot(&w);
        let wl = w.transpose() * &l;
        l - (&w * wl) / ww
    }
}

fn validate_weights(w: &[f64]) -> Result<()> {
    if w.len() < 2 {
        return Err(MixError::Arity(format!("need at least two weights, got {}", w.len())));
    }
    if let Some(v) = w.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
        return Err(MixError::InvalidParameter(format!("weights must be positive, got {v}")));
    }
    Ok(())
}

// Projection onto {X PSD, X w = 0}: restrict to the complement of w, then
// clip eigenvalues.
fn project_psd_kernel(x: &DMatrix<f64>, proj: &DMatrix<f64>) -> DMatrix<f64> {
    let y = proj * x * proj;
    let y = 0.5 * (&y + y.transpose());
    let eig = SymmetricEigen::new(y);
    let clipped = eig.eigenvalues.map(|v| v.max(0.0));
    let z = &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
    proj * z * proj
}

fn unit_diagonal(mut x: DMatrix<f64>) -> DMatrix<f64> {
    for i in 0..x.nrows() {
        x[(i, i)] = 1.0;
    }
    x
}

fn residual(r: &DMatrix<f64>, w: &DVector<f64>) -> f64 {
    let kern = (r * w).amax() / w.amax();
    let neg = (-r.symmetric_eigenvalues().min()).max(0.0);
    kern.max(neg)
}

/// Correlation matrix `R` with `R w = 0`.
///
/// Equal weights use the equicorrelation `-1/(n-1)`; on the boundary
/// `sum(w) = 2 max(w)` the solution is rank one and unique. Otherwise Dykstra's
/// alternating projections between `{R PSD, R w = 0}` and `{diag(R) = 1}` run
/// to a residual of `1e-11`.
pub fn gaussian_mix_correlation(w: &[f64]) -> Result<CorrelationCertificate> {
    validate_weights(w)?;
    let cond = condition_for_weights(w);
    let n = w.len();
    if cond.verdict == Verdict::NotMixable {
        return Err(MixError::Infeasible { margin: cond.margin });
    }
    if w.iter().all(|v| (v - w[0]).abs() <= 1e-15 * w[0]) {
        let rho = -1.0 / (n as f64 - 1.0);
        let r = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { rho });
        return Ok(CorrelationCertificate::from_matrix(&r, w));
    }
    if cond.verdict == Verdict::Boundary {
        let imax = (0..n).max_by(|&a, &b| w[a].total_cmp(&w[b])).unwrap();
        let s: Vec<f64> = (0..n).map(|i| if i == imax { -1.0 } else { 1.0 }).collect();
        let r = DMatrix::from_fn(n, n, |i, j| s[i] * s[j]);
        return Ok(CorrelationCertificate::from_matrix(&r, w));
    }

    let wv = DVector::from_column_slice(w);
    let proj = DMatrix::identity(n, n) - (&wv * wv.transpose()) / wv.dot(&wv);
    let target = DMatrix::from_fn(n, n, |i, j| proj[(i, j)] / (proj[(i, i)] * proj[(j, j)]).sqrt());
    let mut y = target;
    let mut correction = DMatrix::zeros(n, n);
    let mut last = f64::INFINITY;
    for _ in 0..PROJECTION_MAX_ITER {
        let shifted = &y - &correction;
        let x = project_psd_kernel(&shifted, &proj);
        correction = &x - &shifted;
        y = unit_diagonal(x);
        last = residual(&y, &wv);
        if last <= PROJECTION_TARGET {
            return Ok(CorrelationCertificate::from_matrix(&y, w));
        }
    }
    Err(MixError::NumericalFailure(format!(
        "alternating projections did not converge in {PROJECTION_MAX_ITER} iterations (residual {last:e})"
    )))
}

/// Law of the mixing variable `W` in `X = mu + sqrt(W) sigma Z`.
#[derive(Debug, Clone, Copy, PartialEq)]
enum MixingLaw {
    Unit,
    /// `W = df / chi2(df)`
    InverseChiSquare(f64),
    /// `W ~ Exp(1)`, which yields the unit-variance Laplace law.
    Exponential,
}

impl MixingLaw {
    fn for_generator(gen: &DensityGenerator) -> Result<Self> {
        match gen {
            DensityGenerator::Normal => Ok(MixingLaw::Unit),
            DensityGenerator::StudentT { df } => Ok(MixingLaw::InverseChiSquare(*df)),
            DensityGenerator::Cauchy => Ok(MixingLaw::InverseChiSquare(1.0)),
            DensityGenerator::Laplace => Ok(MixingLaw::Exponential),
            DensityGenerator::Custom(_) => Err(MixError::Unsupported(
                "no mixing-variable sampler for tabulated generators".into(),
            )),
        }
    }

    fn draw<R: RngCore + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            MixingLaw::Unit => 1.0,
            MixingLaw::InverseChiSquare(df) => {
                let g: f64 = ChiSquared::new(df).expect("positive df").sample(rng);
                df / g
            }
            MixingLaw::Exponential => Exp1.sample(rng),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstructionKind {
    GaussianDegenerate,
    ScaleMixture,
    BernoulliSwitch,
    ProductExp,
    NegationPair,
    /// Independent coordinates; a negative control for verification.
    Independent,
}

/// Serializable description of a coupling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "construction", rename_all = "snake_case")]
pub enum Construction {
    GaussianDegenerate {
        mus: Vec<f64>,
        sigmas: Vec<f64>,
        correlation: CorrelationCertificate,
    },
    ScaleMixture {
        mus: Vec<f64>,
        sigmas: Vec<f64>,
        generator: DensityGenerator,
        correlation: CorrelationCertificate,
    },
    BernoulliSwitch {
        nus: Vec<f64>,
        plus: Box<Construction>,
    },
    ProductExp {
        inner: Box<Construction>,
    },
    NegationPair {
        marginal: DistributionSpec,
    },
    Independent {
        marginals: Vec<DistributionSpec>,
    },
}

impl Construction {
    pub fn kind(&self) -> ConstructionKind {
        match self {
            Construction::GaussianDegenerate { .. } => ConstructionKind::GaussianDegenerate,
            Construction::ScaleMixture { .. } => ConstructionKind::ScaleMixture,
            Construction::BernoulliSwitch { .. } => ConstructionKind::BernoulliSwitch,
            Construction::ProductExp { .. } => ConstructionKind::ProductExp,
            Construction::NegationPair { .. } => ConstructionKind::NegationPair,
            Construction::Independent { .. } => ConstructionKind::Independent,
        }
    }
}

/// Coupling plus the claim it certifies: the marginal laws, the phi function
/// and the set of values phi takes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingCertificate {
    pub kind: ConstructionKind,
    pub construction: Construction,
    pub marginals: Vec<DistributionSpec>,
    pub phi: PhiSpec,
    /// Values of `phi.linear_part`; unknown for switch constructions, whose
    /// signed aggregate takes two values.
    pub linear_center: CenterSet,
    /// Values of the aggregate before the outer function.
    pub inner_center: CenterSet,
    pub center: CenterSet,
}

#[derive(Debug, Clone)]
enum Plan {
    Linear {
        mus: Vec<f64>,
        sigmas: Vec<f64>,
        factor: DMatrix<f64>,
        mixing: MixingLaw,
    },
    Switch {
        plus: Box<Plan>,
    },
    Exp {
        inner: Box<Plan>,
    },
    Negation {
        marginal: DistributionSpec,
    },
    Independent {
        marginals: Vec<DistributionSpec>,
    },
}

impl Plan {
    fn compile(c: &Construction) -> Result<Plan> {
        Ok(match c {
            Construction::GaussianDegenerate { mus, sigmas, correlation } => {
                Self::linear(mus, sigmas, correlation, &DensityGenerator::Normal)?
            }
            Construction::ScaleMixture {
                mus,
                sigmas,
                generator,
                correlation,
            } => Self::linear(mus, sigmas, correlation, generator)?,
            Construction::BernoulliSwitch { plus, .. } => Plan::Switch {
                plus: Box::new(Plan::compile(plus)?),
            },
            Construction::ProductExp { inner } => Plan::Exp {
                inner: Box::new(Plan::compile(inner)?),
            },
            Construction::NegationPair { marginal } => Plan::Negation {
                marginal: marginal.clone(),
            },
            Construction::Independent { marginals } => Plan::Independent {
                marginals: marginals.clone(),
            },
        })
    }

    fn linear(mus: &[f64], sigmas: &[f64], cert: &CorrelationCertificate, gen: &DensityGenerator) -> Result<Plan> {
        cert.validate()?;
        if mus.len() != cert.n || sigmas.len() != cert.n {
            return Err(MixError::CertificateInvalid(format!(
                "{} locations and {} scales for a {}-dimensional certificate",
                mus.len(),
                sigmas.len(),
                cert.n
            )));
        }
        Ok(Plan::Linear {
            mus: mus.to_vec(),
            sigmas: sigmas.to_vec(),
            factor: cert.sqrt_factor(),
            mixing: MixingLaw::for_generator(gen)?,
        })
    }

    fn runner(&self, seed: u64, id: u64) -> Runner<'_> {
        match self {
            Plan::Linear { .. } | Plan::Negation { .. } | Plan::Independent { .. } => Runner::Leaf {
                plan: self,
                rng: stream(seed, id),
            },
            Plan::Switch { plus } => Runner::Switch {
                bit: stream(seed, child_id(id, 0)),
                plus: Box::new(plus.runner(seed, child_id(id, 1))),
                minus: Box::new(plus.runner(seed, child_id(id, 2))),
            },
            Plan::Exp { inner } => Runner::Exp {
                inner: Box::new(inner.runner(seed, id)),
            },
        }
    }
}

enum Runner<'a> {
    Leaf { plan: &'a Plan, rng: StreamRng },
    Switch {
        bit: StreamRng,
        plus: Box<Runner<'a>>,
        minus: Box<Runner<'a>>,
    },
    Exp { inner: Box<Runner<'a>> },
}

impl Runner<'_> {
    fn draw(&mut self, out: &mut [f64]) -> Option<bool> {
        match self {
            Runner::Leaf { plan, rng } => {
                match plan {
                    Plan::Linear {
                        mus,
                        sigmas,
                        factor,
                        mixing,
                    } => {
                        let n = mus.len();
                        let z = DVector::from_fn(n, |_, _| StandardNormal.sample(rng));
                        let v = factor * z;
                        let scale = mixing.draw(rng).sqrt();
                        for i in 0..n {
                            out[i] = mus[i] + sigmas[i] * scale * v[i];
                        }
                    }
                    Plan::Negation { marginal } => {
                        let x = marginal.draw(rng);
                        out[0] = x;
                        out[1] = -x;
                    }
                    Plan::Independent { marginals } => {
                        for (o, m) in out.iter_mut().zip(marginals) {
                            *o = m.draw(rng);
                        }
                    }
                    _ => unreachable!("composite plans have composite runners"),
                }
                None
            }
            Runner::Switch { bit, plus, minus } => {
                if fair_bit(bit) {
                    plus.draw(out);
                    Some(true)
                } else {
                    minus.draw(out);
                    out.iter_mut().for_each(|v| *v = -*v);
                    Some(false)
                }
            }
            Runner::Exp { inner } => {
                let branch = inner.draw(out);
                out.iter_mut().for_each(|v| *v = v.exp());
                branch
            }
        }
    }
}

/// Draws of a coupling: one row per draw, and for switch constructions the
/// branch taken by each draw (`true` for the plus branch).
#[derive(Debug, Clone, PartialEq)]
pub struct Draws {
    pub rows: Vec<Vec<f64>>,
    pub branches: Option<Vec<bool>>,
}

/// Draws per shard; shard `k` of seed `s` uses stream id `k` at the root.
pub const SHARD_SIZE: usize = 8192;

/// A compiled coupling.
#[derive(Debug, Clone)]
pub struct MixSampler {
    cert: CouplingCertificate,
    plan: Plan,
}

impl MixSampler {
    pub fn from_certificate(cert: CouplingCertificate) -> Result<Self> {
        if cert.marginals.len() != cert.phi.arity() {
            return Err(MixError::CertificateInvalid(format!(
                "{} marginals for phi of arity {}",
                cert.marginals.len(),
                cert.phi.arity()
            )));
        }
        if cert.kind != cert.construction.kind() {
            return Err(MixError::CertificateInvalid("kind does not match construction".into()));
        }
        let plan = Plan::compile(&cert.construction)?;
        Ok(Self { cert, plan })
    }

    pub fn certificate(&self) -> &CouplingCertificate {
        &self.cert
    }

    pub fn kind(&self) -> ConstructionKind {
        self.cert.kind
    }

    pub fn marginals(&self) -> &[DistributionSpec] {
        &self.cert.marginals
    }

    pub fn phi(&self) -> &PhiSpec {
        &self.cert.phi
    }

    pub fn center(&self) -> CenterSet {
        self.cert.center
    }

    pub fn dim(&self) -> usize {
        self.cert.marginals.len()
    }

    /// Same coupling judged by a different outer function.
    pub fn with_outer(&self, outer: OuterFn) -> Self {
        let mut s = self.clone();
        s.cert.phi.outer = outer;
        s.cert.center = outer.image(s.cert.inner_center);
        s
    }

    /// Same coupling judged by another phi with the same weights and support.
    /// Switch constructions only fix the absolute aggregate.
    pub fn with_phi(&self, phi: PhiSpec) -> Result<Self> {
        let current = &self.cert.phi;
        if phi.alphas != current.alphas || phi.shape.support() != current.shape.support() {
            return Err(MixError::Precondition(
                "phi must keep the weights and support of the coupling".into(),
            ));
        }
        let inner_center = match self.cert.linear_center {
            CenterSet::Unknown if phi.shape.is_abs() && current.shape.is_abs() => self.cert.inner_center,
            CenterSet::Unknown => {
                return Err(MixError::Unsupported(format!(
                    "{:?} coupling only fixes the absolute aggregate",
                    self.cert.kind
                )))
            }
            linear => PhiSpec {
                outer: OuterFn::Identity,
                ..phi.clone()
            }
            .center_from_linear(linear),
        };
        let mut s = self.clone();
        s.cert.center = phi.outer.image(inner_center);
        s.cert.inner_center = inner_center;
        s.cert.phi = phi;
        Ok(s)
    }

    /// Whether draws are tagged with a switch branch.
    pub fn has_switch(&self) -> bool {
        fn walk(p: &Plan) -> bool {
            match p {
                Plan::Switch { .. } => true,
                Plan::Exp { inner } => walk(inner),
                _ => false,
            }
        }
        walk(&self.plan)
    }

    /// Draws `count` rows of shard `shard`.
    pub fn sample_shard(&self, seed: u64, shard: u64, count: usize) -> Draws {
        let mut runner = self.plan.runner(seed, shard);
        let n = self.dim();
        let switch = self.has_switch();
        let mut rows = Vec::with_capacity(count);
        let mut branches = switch.then(|| Vec::with_capacity(count));
        for _ in 0..count {
            let mut row = vec![0.0; n];
            let b = runner.draw(&mut row);
            if let (Some(bs), Some(b)) = (branches.as_mut(), b) {
                bs.push(b);
            }
            rows.push(row);
        }
        Draws { rows, branches }
    }

    /// `n` draws, reproducible from `seed` and independent of how shards are scheduled.
    pub fn sample(&self, n: usize, seed: u64) -> Draws {
        let mut rows = Vec::with_capacity(n);
        let mut branches = self.has_switch().then(|| Vec::with_capacity(n));
        let mut shard = 0u64;
        while rows.len() < n {
            let count = SHARD_SIZE.min(n - rows.len());
            let d = self.sample_shard(seed, shard, count);
            rows.extend(d.rows);
            if let (Some(all), Some(b)) = (branches.as_mut(), d.branches) {
                all.extend(b);
            }
            shard += 1;
        }
        Draws { rows, branches }
    }
}

fn check_lengths(name: &str, v: &[f64], n: usize) -> Result<()> {
    if v.len() == n {
        Ok(())
    } else {
        Err(MixError::Arity(format!("{} {name} for {n} coordinates", v.len())))
    }
}

fn linear_construction(
    cert: &CorrelationCertificate,
    sigmas: &[f64],
    mus: &[f64],
    gen: &DensityGenerator,
) -> Result<(Construction, PhiSpec, f64)> {
    cert.validate()?;
    check_lengths("sigmas", sigmas, cert.n)?;
    check_lengths("mus", mus, cert.n)?;
    if !gen.char_generator().psi_infty() {
        return Err(MixError::Unsupported(format!(
            "the {} generator is not declared a normal scale mixture",
            gen.family_name()
        )));
    }
    MixingLaw::for_generator(gen)?;
    let alphas: Vec<f64> = cert.weights.iter().zip(sigmas).map(|(w, s)| w / s).collect();
    let phi = PhiSpec::new(PhiShape::WeightedSum, OuterFn::Identity, alphas)?;
    let center = phi.alphas.iter().zip(mus).map(|(a, m)| a * m).sum();
    let construction = match gen {
        DensityGenerator::Normal => Construction::GaussianDegenerate {
            mus: mus.to_vec(),
            sigmas: sigmas.to_vec(),
            correlation: cert.clone(),
        },
        _ => Construction::ScaleMixture {
            mus: mus.to_vec(),
            sigmas: sigmas.to_vec(),
            generator: gen.clone(),
            correlation: cert.clone(),
        },
    };
    Ok((construction, phi, center))
}

/// Joint mix of `Ell_1(mu_i, sigma_i^2, gen)` marginals for a normal scale
/// mixture `gen`: `X = mu + sqrt(W) D L Z`. The weights are `alpha_i = w_i / sigma_i`.
pub fn scale_mixture_sampler(
    cert: &CorrelationCertificate,
    sigmas: &[f64],
    mus: &[f64],
    gen: &DensityGenerator,
) -> Result<MixSampler> {
    let (construction, phi, center) = linear_construction(cert, sigmas, mus, gen)?;
    let marginals = mus
        .iter()
        .zip(sigmas)
        .map(|(&m, &s)| Elliptical1D::new(m, s, gen.clone()).map(DistributionSpec::from))
        .collect::<Result<Vec<_>>>()?;
    MixSampler::from_certificate(CouplingCertificate {
        kind: construction.kind(),
        construction,
        marginals,
        phi,
        linear_center: CenterSet::Point(center),
        inner_center: CenterSet::Point(center),
        center: CenterSet::Point(center),
    })
}

pub fn gaussian_mix_sampler(cert: &CorrelationCertificate, sigmas: &[f64], mus: &[f64]) -> Result<MixSampler> {
    scale_mixture_sampler(cert, sigmas, mus, &DensityGenerator::Normal)
}

/// Switch construction: a plus-branch mix `Y` with `Y_i ~ Ell_1(nu_i/alpha_i, sigma_i^2)`
/// and `sum(alpha_i Y_i) = sum(nu)`, its independent mirror `Z = -Y'`, and a
/// fair independent bit choosing between them. Marginals are two-bump laws and
/// `|sum(alpha_i X_i)| = sum(nu)` on every draw.
pub fn bernoulli_switch(nus: &[f64], sigmas: &[f64], alphas: &[f64], gen: &DensityGenerator) -> Result<MixSampler> {
    let n = nus.len();
    check_lengths("sigmas", sigmas, n)?;
    check_lengths("alphas", alphas, n)?;
    if let Some(v) = nus.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
        return Err(MixError::InvalidParameter(format!("nus must be finite and >= 0, got {v}")));
    }
    let adm = generator_admissible(gen);
    if !adm.admissible {
        return Err(MixError::InadmissibleGenerator(adm.reason.unwrap_or_default()));
    }
    if !gen.is_unimodal() {
        return Err(MixError::Unsupported("switch construction requires a unimodal generator".into()));
    }
    let cond = crate::mixability::check_condition(alphas, sigmas)?;
    if !cond.verdict.holds() {
        return Err(MixError::Infeasible { margin: cond.margin });
    }
    let w: Vec<f64> = alphas.iter().zip(sigmas).map(|(a, s)| a * s).collect();
    let corr = gaussian_mix_correlation(&w)?;
    let offsets: Vec<f64> = nus.iter().zip(alphas).map(|(v, a)| v / a).collect();
    let (plus, _, _) = linear_construction(&corr, sigmas, &offsets, gen)?;
    let marginals = offsets
        .iter()
        .zip(sigmas)
        .map(|(&v, &s)| TwoBump::new(v, s, gen.clone()).map(DistributionSpec::from))
        .collect::<Result<Vec<_>>>()?;
    let magnitude: f64 = nus.iter().sum();
    let phi = PhiSpec::new(PhiShape::AbsWeightedSum, OuterFn::Identity, alphas.to_vec())?;
    MixSampler::from_certificate(CouplingCertificate {
        kind: ConstructionKind::BernoulliSwitch,
        construction: Construction::BernoulliSwitch {
            nus: nus.to_vec(),
            plus: Box::new(plus),
        },
        marginals,
        phi,
        linear_center: CenterSet::Unknown,
        inner_center: CenterSet::Point(magnitude),
        center: CenterSet::Point(magnitude),
    })
}

/// Exponentiates every coordinate of a sum mix, giving a product mix of the
/// log-family images.
pub fn product_mix(inner: &MixSampler) -> Result<MixSampler> {
    if inner.marginals().iter().any(|m| m.support() != Support::RealLine) {
        return Err(MixError::Precondition("product_mix needs real-line marginals".into()));
    }
    let marginals = inner
        .marginals()
        .iter()
        .map(|m| log_transform(m, 1.0))
        .collect::<Result<Vec<_>>>()?;
    let src = inner.certificate();
    let mut phi = src.phi.clone();
    phi.shape = phi.shape.to_product();
    let inner_center = match src.phi.shape {
        PhiShape::WeightedSum => OuterFn::Exp.image(src.inner_center),
        _ => src.inner_center,
    };
    MixSampler::from_certificate(CouplingCertificate {
        kind: ConstructionKind::ProductExp,
        construction: Construction::ProductExp {
            inner: Box::new(src.construction.clone()),
        },
        marginals,
        center: phi.outer.image(inner_center),
        phi,
        linear_center: src.linear_center,
        inner_center,
    })
}

/// `(X, -X)` for a law symmetric about zero.
pub fn negation_pair(d: &DistributionSpec) -> Result<MixSampler> {
    if !d.is_symmetric() {
        return Err(MixError::Precondition(format!(
            "negation pair needs a law symmetric about 0, got {}",
            d.kind_name()
        )));
    }
    MixSampler::from_certificate(CouplingCertificate {
        kind: ConstructionKind::NegationPair,
        construction: Construction::NegationPair { marginal: d.clone() },
        marginals: vec![d.clone(), d.clone()],
        phi: PhiSpec::sum(2),
        linear_center: CenterSet::Point(0.0),
        inner_center: CenterSet::Point(0.0),
        center: CenterSet::Point(0.0),
    })
}

/// Builds a coupling for `problem` that makes its phi constant: a scale-mixture
/// mix for elliptical marginals, the switch construction for two-bump
/// marginals, exponentiated for log families.
pub fn construct(problem: &MixProblem) -> Result<MixSampler> {
    let decision = decide(problem)?;
    if !decision.verdict.holds() {
        return Err(MixError::Infeasible {
            margin: decision.margin,
        });
    }
    let log = problem.phi.shape.support() == Support::Positive;
    let reals = problem
        .marginals
        .iter()
        .map(|m| if log { log_transform_inverse(m, 1.0) } else { Ok(m.clone()) })
        .collect::<Result<Vec<_>>>()?;
    let alphas = &problem.phi.alphas;
    let sigmas: Vec<f64> = reals.iter().map(|m| m.sigma()).collect();
    let gen = reals[0].generator().clone();
    let sum = match &reals[0] {
        DistributionSpec::Elliptical(_) => {
            let mus: Vec<f64> = reals
                .iter()
                .map(|m| match m {
                    DistributionSpec::Elliptical(e) => Ok(e.mu),
                    _ => Err(MixError::Unsupported("marginals mix elliptical and two-bump laws".into())),
                })
                .collect::<Result<_>>()?;
            let w: Vec<f64> = alphas.iter().zip(&sigmas).map(|(a, s)| a * s).collect();
            scale_mixture_sampler(&gaussian_mix_correlation(&w)?, &sigmas, &mus, &gen)?
        }
        _ => {
            let nus: Vec<f64> = reals
                .iter()
                .zip(alphas)
                .map(|(m, a)| match m {
                    DistributionSpec::TwoBump(t) => Ok(a * t.nu),
                    _ => Err(MixError::Unsupported("marginals mix elliptical and two-bump laws".into())),
                })
                .collect::<Result<_>>()?;
            bernoulli_switch(&nus, &sigmas, alphas, &gen)?
        }
    };
    let sampler = if log { product_mix(&sum)? } else { sum };
    sampler.with_phi(problem.phi.clone())
}

/// Independent coordinates carrying a (false) claimed center; used as a
/// negative control.
pub fn independent_coupling(marginals: Vec<DistributionSpec>, phi: PhiSpec, claimed: CenterSet) -> Result<MixSampler> {
    MixSampler::from_certificate(CouplingCertificate {
        kind: ConstructionKind::Independent,
        construction: Construction::Independent {
            marginals: marginals.clone(),
        },
        marginals,
        center: phi.outer.image(claimed),
        phi,
        linear_center: CenterSet::Unknown,
        inner_center: claimed,
    })
}
