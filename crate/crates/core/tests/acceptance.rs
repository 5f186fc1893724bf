//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any failure.

mod common;

use std::f64::consts::{LN_2, PI};
use std::time::{Duration, Instant};

use mixkit::couplings::{bernoulli_switch, gaussian_mix_correlation, gaussian_mix_sampler, negation_pair, product_mix};
use mixkit::distributions::{DistributionSpec, Elliptical1D, TwoBump};
use mixkit::generator::DensityGenerator;
use mixkit::mixability::{
    cauchy_center_interval, check_condition, decide, log_cauchy_product_interval, CenterSet, MixProblem, OuterFn,
    PhiSpec, Verdict,
};
use mixkit::rearrange::{build_matrix, ra_minimize, ra_scrambled, DEFAULT_MAX_SWEEPS, DEFAULT_TOL};
use mixkit::verify::{constancy_check, eq26_contradiction, ks_against, ks_statistic, moment_check};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_digits(got: f64, want: f64) -> bool {
    (got - want).abs() <= 1e-12 * want.abs().max(1e-300)
}

fn normals(sigmas: &[f64]) -> Vec<DistributionSpec> {
    sigmas.iter().map(|&s| Elliptical1D::normal(0.0, s).unwrap().into()).collect()
}

fn column(rows: &[Vec<f64>], i: usize) -> Vec<f64> {
    rows.iter().map(|r| r[i]).collect()
}

fn c1_decision_table() -> Outcome {
    let cases: [(&[f64], &[f64], Verdict); 3] = [
        (&[1.0, 1.0, 1.0], &[1.0, 1.0, 2.0], Verdict::Boundary),
        (&[1.0, 1.0, 1.0], &[1.0, 1.0, 3.0], Verdict::NotMixable),
        (&[1.0, 2.0, 1.0, 1.0], &[1.0, 1.0, 1.0, 1.0], Verdict::Mixable),
    ];
    let start = Instant::now();
    let verdicts: Vec<Verdict> = cases
        .iter()
        .map(|(a, s, _)| check_condition(a, s).map(|c| c.verdict))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    for ((a, s, want), got) in cases.iter().zip(&verdicts) {
        ensure(got == want, || format!("alpha {a:?} sigma {s:?}: {got:?}, expected {want:?}"))?;
        let phi = PhiSpec::new(mixkit::mixability::PhiShape::WeightedSum, OuterFn::Identity, a.to_vec()).unwrap();
        let d = decide(&MixProblem {
            marginals: normals(s),
            phi,
        })
        .map_err(|e| e.to_string())?;
        ensure(d.verdict == *want, || format!("decide disagrees on sigma {s:?}"))?;
    }
    ensure(elapsed < Duration::from_millis(1), || format!("took {elapsed:?}"))?;
    Ok(format!("boundary / not_mixable / mixable in {elapsed:?}"))
}

fn c2_cauchy_interval() -> Outcome {
    let half = LN_2 / PI;
    let (lo, hi) = cauchy_center_interval(3, 0.0, 1.0)
        .map_err(|e| e.to_string())?
        .bounds()
        .ok_or("n = 3 interval missing")?;
    ensure(within_digits(lo, -half) && within_digits(hi, half), || {
        format!("[{lo}, {hi}] vs +-{half}")
    })?;
    let two = cauchy_center_interval(2, 0.0, 1.0).map_err(|e| e.to_string())?;
    ensure(two == CenterSet::Point(0.0), || format!("n = 2 gives {two:?}"))?;
    Ok(format!("[{lo:.15}, {hi:.15}], n = 2 -> {{0}}"))
}

fn c3_gaussian_mix() -> Outcome {
    let start = Instant::now();
    let eq = gaussian_mix_correlation(&[1.0, 1.0, 1.0]).map_err(|e| e.to_string())?;
    let m = eq.matrix();
    for i in 0..3 {
        for j in 0..3 {
            let want = if i == j { 1.0 } else { -0.5 };
            ensure(m[(i, j)] == want, || format!("R[{i}][{j}] = {}", m[(i, j)]))?;
        }
    }
    let cert = gaussian_mix_correlation(&[1.0, 1.0, 2.0]).map_err(|e| e.to_string())?;
    let (res, eig) = (cert.kernel_residual(), cert.min_eigenvalue());
    ensure(res <= 1e-10, || format!("|Rw| = {res:e}"))?;
    ensure(eig >= -1e-10, || format!("min eigenvalue {eig:e}"))?;
    let s = gaussian_mix_sampler(&cert, &[1.0, 1.0, 2.0], &[0.0; 3]).map_err(|e| e.to_string())?;
    let rows = s.sample(100_000, 3).rows;
    let worst = rows.iter().map(|r| r.iter().sum::<f64>().abs()).fold(0.0, f64::max);
    ensure(worst < 1e-8, || format!("max |sum| = {worst:e}"))?;
    let mut ks_max = 0.0f64;
    for (i, d) in s.marginals().iter().enumerate() {
        ks_max = ks_max.max(ks_statistic(&column(&rows, i), d).map_err(|e| e.to_string())?);
    }
    ensure(ks_max < 0.006, || format!("KS {ks_max}"))?;
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(5), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "|Rw| = {res:.1e}, min eig = {eig:.1e}, max |sum| = {worst:.1e}, max KS = {ks_max:.4} in {elapsed:.2?}"
    ))
}

/// CDF of `exp(-(x^2 + nu^2)/2) cosh(nu x) / sqrt(2 pi)` by cumulative Simpson
/// on a fine grid, interpolated linearly.
struct CoshCdf {
    lo: f64,
    h: f64,
    table: Vec<f64>,
}

impl CoshCdf {
    fn new(nu: f64) -> Self {
        let f = |x: f64| (-(x * x + nu * nu) / 2.0).exp() * (nu * x).cosh() / (2.0 * PI).sqrt();
        let (lo, hi, h) = (-14.0, 14.0, 1e-3);
        let steps = ((hi - lo) / h) as usize;
        let mut table = vec![0.0; steps + 1];
        for k in 0..steps {
            let a = lo + k as f64 * h;
            table[k + 1] = table[k] + h / 6.0 * (f(a) + 4.0 * f(a + h / 2.0) + f(a + h));
        }
        Self { lo, h, table }
    }

    fn cdf(&self, x: f64) -> f64 {
        let pos = (x - self.lo) / self.h;
        if pos <= 0.0 {
            return 0.0;
        }
        let k = pos.floor() as usize;
        if k + 1 >= self.table.len() {
            return 1.0;
        }
        let t = pos - k as f64;
        self.table[k] * (1.0 - t) + self.table[k + 1] * t
    }
}

fn c4_example_switch() -> Outcome {
    let s = bernoulli_switch(&[1.0; 3], &[1.0; 3], &[1.0; 3], &DensityGenerator::Normal)
        .map_err(|e| e.to_string())?
        .with_outer(OuterFn::Square);
    ensure(s.center() == CenterSet::Point(9.0), || format!("center {:?}", s.center()))?;
    let rows = s.sample(100_000, 4).rows;
    let worst = rows
        .iter()
        .map(|r| (r.iter().sum::<f64>().powi(2) - 9.0).abs())
        .fold(0.0, f64::max);
    ensure(worst <= 1e-10, || format!("max |(sum)^2 - 9| = {worst:e}"))?;
    let cosh = CoshCdf::new(1.0);
    let mut ks_max = 0.0f64;
    for i in 0..3 {
        ks_max = ks_max.max(ks_against(&column(&rows, i), |x| cosh.cdf(x)).map_err(|e| e.to_string())?);
    }
    ensure(ks_max < 0.006, || format!("KS vs cosh density {ks_max}"))?;

    let bump: DistributionSpec = TwoBump::new(1.0, 1.0, DensityGenerator::Normal).unwrap().into();
    let pair = negation_pair(&bump).map_err(|e| e.to_string())?.with_outer(OuterFn::Square);
    ensure(pair.center() == CenterSet::Point(0.0), || format!("pair center {:?}", pair.center()))?;
    let r = constancy_check(&pair, 100_000, 4).map_err(|e| e.to_string())?;
    ensure(r.pass == Some(true), || format!("negation pair constancy {r:?}"))?;
    Ok(format!(
        "max |(sum)^2 - 9| = {worst:.1e}, max KS = {ks_max:.4}, pair center 0 (dev {:.1e})",
        r.max_deviation.unwrap_or(f64::NAN)
    ))
}

/// Pinned row-sum variance of the sorted sigma = (1, 1, 5) normal matrix at m = 64.
const FLOOR_115_M64: f64 = 8.822_805_426_241;

fn c5_rearrangement() -> Outcome {
    let start = Instant::now();
    let mut q = build_matrix(&normals(&[1.0; 3]), &[1.0; 3], 256, 0.0).map_err(|e| e.to_string())?;
    let mixable = ra_scrambled(&mut q, 0).variance;
    ensure(mixable < 1e-3, || format!("3x N(0,1) variance {mixable:e}"))?;

    let mut q = build_matrix(&normals(&[1.0, 1.0, 5.0]), &[1.0; 3], 64, 0.0).map_err(|e| e.to_string())?;
    let floor = ra_minimize(&mut q, DEFAULT_TOL, DEFAULT_MAX_SWEEPS).variance;
    ensure(floor >= FLOOR_115_M64 * (1.0 - 1e-9), || format!("(1,1,5) variance {floor}"))?;

    let cases = common::battery(50, 17);
    let mut agree = 0;
    for (k, case) in cases.iter().enumerate() {
        let out = common::run_case(case, k as u64);
        if out.oracle_mixable == out.analytic_mixable {
            agree += 1;
        }
    }
    ensure(agree == cases.len(), || format!("battery agreement {agree}/{}", cases.len()))?;
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(30), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "N(0,1)x3 variance {mixable:.2e}, (1,1,5) floor {floor:.6}, battery {agree}/50 in {elapsed:.2?}"
    ))
}

fn c6_log_duality() -> Outcome {
    let cert = gaussian_mix_correlation(&[1.0, 1.0, 1.0]).map_err(|e| e.to_string())?;
    let p = product_mix(&gaussian_mix_sampler(&cert, &[1.0; 3], &[0.0; 3]).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let worst = p
        .sample(100_000, 6)
        .rows
        .iter()
        .map(|r| (r.iter().product::<f64>() - 1.0).abs())
        .fold(0.0, f64::max);
    ensure(worst <= 1e-8, || format!("max |prod - 1| = {worst:e}"))?;
    let (lo, hi) = log_cauchy_product_interval(3, 0.0, 1.0)
        .map_err(|e| e.to_string())?
        .bounds()
        .ok_or("interval missing")?;
    let half = LN_2 / PI;
    ensure(within_digits(lo, (-half).exp()) && within_digits(hi, half.exp()), || {
        format!("[{lo}, {hi}]")
    })?;
    Ok(format!("max |prod - 1| = {worst:.1e}, interval [{lo:.15}, {hi:.15}]"))
}

fn c7_char_function_contradiction() -> Outcome {
    let r = eq26_contradiction(1.0, 1.0, &DensityGenerator::Normal, &[PI / 2.0, PI]).map_err(|e| e.to_string())?;
    ensure(r.witness_count == 2, || format!("{} of 2 grid points nonpositive", r.witness_count))?;
    ensure(r.psi_infty && r.contradiction == Some(true), || format!("{r:?}"))?;
    let at_pi = mixkit::verify::eq26_evaluate(1.0, 1.0, &DensityGenerator::Normal, PI);
    println!("    record: {}", serde_json::to_string(&r).unwrap());
    Ok(format!(
        "right side {:.1e} at pi/2, {:.6} at pi; left side {:.6} > 0",
        r.witness.right_side, at_pi.right_side, at_pi.left_side
    ))
}

fn c8_moment_identity() -> Outcome {
    let d = Elliptical1D::normal(0.0, 2.0).unwrap();
    let s = DistributionSpec::from(d.clone()).sample(1_000_000, 8);
    let c = moment_check(&d, &s);
    let expected = c.expected.ok_or("no expected variance")?;
    ensure(expected == 4.0, || format!("-2 psi'(0) sigma^2 = {expected}"))?;
    let rel = c.relative_error().ok_or("no observation")?;
    ensure(rel < 0.01, || format!("relative error {rel}"))?;
    Ok(format!("observed {:.5} vs 4 (rel err {rel:.2e})", c.observed.unwrap()))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 8] = [
        ("1 decision table", c1_decision_table),
        ("2 cauchy center interval", c2_cauchy_interval),
        ("3 gaussian degenerate mix", c3_gaussian_mix),
        ("4 switch construction end to end", c4_example_switch),
        ("5 rearrangement cross-check", c5_rearrangement),
        ("6 log-elliptical duality", c6_log_duality),
        ("7 characteristic-function contradiction", c7_char_function_contradiction),
        ("8 moment identity", c8_moment_identity),
    ];
    let start = Instant::now();
    let mut failed = 0;
    for (name, run) in criteria {
        match run() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!("acceptance: {}/8 passed in {:.2?}", 8 - failed, start.elapsed());
    if failed > 0 {
        std::process::exit(1);
    }
}
