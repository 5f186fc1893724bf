mod common;

use mixkit::distributions::{DistributionSpec, Elliptical1D};
use mixkit::mixability::Verdict;
use mixkit::rearrange::{build_matrix, mixability_probe, ra_minimize, ra_scrambled, DEFAULT_MAX_SWEEPS, DEFAULT_TOL};

fn normals(sigmas: &[f64]) -> Vec<DistributionSpec> {
    sigmas.iter().map(|&s| Elliptical1D::normal(0.0, s).unwrap().into()).collect()
}

#[test]
fn non_mixable_floor_is_pinned() {
    let mut q = build_matrix(&normals(&[1.0, 1.0, 5.0]), &[1.0; 3], 64, 0.0).unwrap();
    // column spreads: the largest cannot be cancelled by the other two
    let sd: Vec<f64> = q
        .columns
        .iter()
        .map(|c| (c.iter().map(|x| x * x).sum::<f64>() / 64.0).sqrt())
        .collect();
    let bound = (sd[2] - sd[0] - sd[1]).powi(2);
    let r = ra_minimize(&mut q, DEFAULT_TOL, DEFAULT_MAX_SWEEPS);
    assert!(r.variance >= bound * (1.0 - 1e-12));
    assert!((r.variance - 8.822_805_426_241).abs() < 1e-9, "{}", r.variance);
}

#[test]
fn scrambling_escapes_the_comonotone_trap() {
    // mixable, but sweeps from the sorted matrix stall at (2 - 1.8)^2
    let mut sorted = build_matrix(&normals(&[1.0, 1.0, 1.8]), &[1.0; 3], 256, 0.0).unwrap();
    let mut scrambled = sorted.clone();
    let stuck = ra_minimize(&mut sorted, DEFAULT_TOL, DEFAULT_MAX_SWEEPS).variance;
    assert!((stuck - 0.04).abs() < 2e-3, "{stuck}");
    assert!(ra_scrambled(&mut scrambled, 0).variance < 1e-3);
}

#[test]
fn probe_reports_analytic_verdict_for_log_families() {
    let logs: Vec<DistributionSpec> = normals(&[1.0; 3])
        .iter()
        .map(|d| mixkit::distributions::log_transform(d, 1.0).unwrap())
        .collect();
    let p = mixability_probe(&logs, &[1.0; 3], &[16, 64], 0.0, 3).unwrap();
    assert_eq!(p.analytic_verdict, Some(Verdict::Mixable));
    assert!(p.entries[1].variance < p.entries[0].variance);
}

#[test]
fn battery_agrees_with_condition() {
    let cases = common::battery(50, 17);
    let mixable = cases.iter().filter(|c| c.verdict.holds()).count();
    assert!(mixable > 5 && mixable < 45, "unbalanced battery: {mixable} mixable");
    for (k, case) in cases.iter().enumerate() {
        let out = common::run_case(case, k as u64);
        assert_eq!(
            out.oracle_mixable, out.analytic_mixable,
            "case {k}: sigmas {:?} alphas {:?} variance {:e} boundary {:e}",
            case.sigmas, case.alphas, out.variance, out.boundary_variance
        );
    }
}
