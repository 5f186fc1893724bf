mod common;

use mixkit::distributions::{log_transform, DistributionSpec, Elliptical1D, TwoBump};
use mixkit::generator::{DensityGenerator, GeneratorTable};
use mixkit::verify::ks_statistic;
use std::f64::consts::{FRAC_PI_2, PI};

/// Composite Simpson rule over the whole line through `x = c + s tan(theta)`.
fn simpson_line<F: Fn(f64) -> f64>(f: F, c: f64, s: f64, panels: usize) -> f64 {
    let h = PI / panels as f64;
    let g = |theta: f64| {
        let x = c + s * theta.tan();
        let sec = 1.0 / theta.cos();
        f(x) * s * sec * sec
    };
    // heavy tails keep the mapped integrand finite at the endpoints
    let edge = FRAC_PI_2 - 1e-12;
    let mut acc = g(-edge) + g(edge);
    for k in 1..panels {
        let theta = -FRAC_PI_2 + k as f64 * h;
        acc += if k % 2 == 1 { 4.0 } else { 2.0 } * g(theta);
    }
    acc * h / 3.0
}

#[test]
fn two_bump_cauchy_normalizer_matches_x_space_integral() {
    let (nu, sigma) = (2.0, 3.0);
    let cauchy = |u: f64| 1.0 / (1.0 + u);
    let mass = simpson_line(
        |x| (cauchy(((x - nu) / sigma).powi(2)) + cauchy(((x + nu) / sigma).powi(2))) / (2.0 * sigma),
        0.0,
        sigma,
        200_000,
    );
    let oracle = 1.0 / mass;
    assert!((oracle - 1.0 / PI).abs() < 1e-9, "{oracle}");
    let c = mixkit::distributions::two_bump_normalizer(nu, sigma, &DensityGenerator::Cauchy).unwrap();
    assert!((c - oracle).abs() < 1e-9);
    assert!((c - 1.0 / PI).abs() < 1e-15);
}

fn density_zoo() -> Vec<DistributionSpec> {
    let table = GeneratorTable::new(
        (0..=200).map(|k| {
            let u = k as f64 * 0.2;
            (u, (-u / 2.0).exp())
        })
        .collect(),
        false,
    )
    .unwrap();
    vec![
        Elliptical1D::normal(0.3, 1.7).unwrap().into(),
        Elliptical1D::new(-1.0, 0.5, DensityGenerator::StudentT { df: 5.0 }).unwrap().into(),
        Elliptical1D::new(0.0, 2.0, DensityGenerator::Cauchy).unwrap().into(),
        Elliptical1D::new(1.0, 1.0, DensityGenerator::Laplace).unwrap().into(),
        Elliptical1D::new(0.0, 1.0, DensityGenerator::Custom(table)).unwrap().into(),
        TwoBump::new(1.5, 0.8, DensityGenerator::Normal).unwrap().into(),
        TwoBump::new(2.0, 1.0, DensityGenerator::StudentT { df: 3.0 }).unwrap().into(),
    ]
}

#[test]
fn densities_integrate_to_one() {
    for d in density_zoo() {
        let mass = simpson_line(|x| d.pdf(x).unwrap(), 0.0, d.sigma(), 400_000);
        assert!((mass - 1.0).abs() < 1e-6, "{} {}: {mass}", d.kind_name(), d.generator().family_name());
    }
    let log = log_transform(&Elliptical1D::normal(0.0, 0.5).unwrap().into(), 1.0).unwrap();
    // integrate the positive law through x = exp(y)
    let mass = simpson_line(
        |y| {
            let x = y.exp();
            if x > 0.0 && x.is_finite() { log.pdf(x).unwrap() * x } else { 0.0 }
        },
        0.0,
        0.5,
        400_000,
    );
    assert!((mass - 1.0).abs() < 1e-6, "{mass}");
}

#[test]
fn centered_laws_are_symmetric() {
    let laws: Vec<DistributionSpec> = vec![
        TwoBump::new(1.5, 0.8, DensityGenerator::Normal).unwrap().into(),
        TwoBump::new(0.7, 2.0, DensityGenerator::Laplace).unwrap().into(),
        Elliptical1D::new(0.0, 1.0, DensityGenerator::StudentT { df: 2.5 }).unwrap().into(),
    ];
    for d in laws {
        for k in 0..1000 {
            let x = k as f64 * 0.01;
            let (a, b) = (d.pdf(x).unwrap(), d.pdf(-x).unwrap());
            assert!((a - b).abs() <= 1e-15 * a.max(1e-300), "{x}");
            assert!((d.cdf(x) + d.cdf(-x) - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn two_bump_normal_is_the_cosh_density() {
    for nu in [0.5, 1.0, 2.0] {
        let d = TwoBump::new(nu, 1.0, DensityGenerator::Normal).unwrap();
        for k in -400..=400 {
            let x = k as f64 * 0.02;
            let closed = (-(x * x + nu * nu) / 2.0).exp() * (nu * x).cosh() / (2.0 * PI).sqrt();
            assert!((d.pdf(x) - closed).abs() <= 1e-12 * closed, "nu {nu} x {x}");
        }
    }
}

#[test]
fn sampling_self_consistency() {
    let n = 100_000;
    for d in density_zoo() {
        let s = d.sample(n, 11);
        let ks = ks_statistic(&s, &d).unwrap();
        assert!(ks < 0.006, "{} {}: {ks}", d.kind_name(), d.generator().family_name());
    }
}

#[test]
fn ks_self_consistency_across_seeds() {
    let laws: Vec<DistributionSpec> = vec![
        Elliptical1D::normal(0.0, 1.0).unwrap().into(),
        Elliptical1D::new(0.0, 1.0, DensityGenerator::Cauchy).unwrap().into(),
        TwoBump::new(1.0, 1.0, DensityGenerator::Laplace).unwrap().into(),
        log_transform(&Elliptical1D::normal(0.0, 1.0).unwrap().into(), 1.0).unwrap(),
    ];
    let n = 1000;
    for d in laws {
        let passes = (0..100u64)
            .filter(|&seed| ks_statistic(&d.sample(n, seed), &d).unwrap() < common::ks_critical(n))
            .count();
        // 95 is the expected count; 89 is its binomial three-sigma lower bound
        assert!(passes >= 89, "{}: {passes} of 100", d.kind_name());
    }
}

#[test]
fn normal_variance_matches_generator_derivative() {
    let d = Elliptical1D::normal(0.0, 2.0).unwrap();
    let s = DistributionSpec::from(d.clone()).sample(1_000_000, 8);
    let c = mixkit::verify::moment_check(&d, &s);
    assert!(c.relative_error().unwrap() < 0.01);
    assert_eq!(c.pass, Some(true));
}
