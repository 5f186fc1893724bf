#![allow(dead_code)]

use mixkit::distributions::{DistributionSpec, Elliptical1D};
use mixkit::generator::DensityGenerator;
use mixkit::mixability::{check_condition, Verdict};
use mixkit::rearrange::{build_matrix, ra_scrambled};
use rand::Rng;

/// `sum(w) - 2 max(w)` must be at least this fraction of `max(w)` in magnitude.
pub const BATTERY_SEPARATION: f64 = 0.3;
pub const BATTERY_M: usize = 256;

pub struct BatteryCase {
    pub generator: DensityGenerator,
    pub alphas: Vec<f64>,
    pub sigmas: Vec<f64>,
    pub verdict: Verdict,
}

impl BatteryCase {
    pub fn marginals(&self, sigmas: &[f64]) -> Vec<DistributionSpec> {
        sigmas
            .iter()
            .map(|&s| Elliptical1D::new(0.0, s, self.generator.clone()).unwrap().into())
            .collect()
    }

    /// Same tuple with the largest weighted scale shrunk or grown onto the boundary.
    pub fn boundary_sigmas(&self) -> Vec<f64> {
        let w: Vec<f64> = self.alphas.iter().zip(&self.sigmas).map(|(a, s)| a * s).collect();
        let imax = (0..w.len()).max_by(|&a, &b| w[a].total_cmp(&w[b])).unwrap();
        let others: f64 = w.iter().enumerate().filter(|(i, _)| *i != imax).map(|(_, v)| v).sum();
        let mut s = self.sigmas.clone();
        s[imax] = others / self.alphas[imax];
        s
    }
}

/// Seeded battery of elliptical tuples with `n` in {3, 4, 5}, kept away from
/// the boundary of the weighted scale condition.
pub fn battery(count: usize, seed: u64) -> Vec<BatteryCase> {
    let gens = [
        DensityGenerator::Normal,
        DensityGenerator::Laplace,
        DensityGenerator::StudentT { df: 5.0 },
    ];
    let mut rng = mixkit::rng::stream(seed, 0);
    (0..count)
        .map(|k| loop {
            let n = rng.random_range(3..=5);
            let alphas: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
            let sigmas: Vec<f64> = (0..n).map(|_| rng.random_range(0.3..3.0)).collect();
            let c = check_condition(&alphas, &sigmas).unwrap();
            let wmax = alphas.iter().zip(&sigmas).map(|(a, s)| a * s).fold(0.0, f64::max);
            if c.margin.abs() >= BATTERY_SEPARATION * wmax {
                break BatteryCase {
                    generator: gens[k % gens.len()].clone(),
                    alphas,
                    sigmas,
                    verdict: c.verdict,
                };
            }
        })
        .collect()
}

pub struct BatteryOutcome {
    pub variance: f64,
    pub boundary_variance: f64,
    pub oracle_mixable: bool,
    pub analytic_mixable: bool,
}

/// Oracle verdict: mixable when the row-sum variance at `m = 256` is below ten
/// times that of the boundary twin of the same tuple.
pub fn run_case(case: &BatteryCase, seed: u64) -> BatteryOutcome {
    let mut q = build_matrix(&case.marginals(&case.sigmas), &case.alphas, BATTERY_M, 0.0).unwrap();
    let variance = ra_scrambled(&mut q, seed).variance;
    let mut qb = build_matrix(&case.marginals(&case.boundary_sigmas()), &case.alphas, BATTERY_M, 0.0).unwrap();
    let boundary_variance = ra_scrambled(&mut qb, seed).variance;
    BatteryOutcome {
        variance,
        boundary_variance,
        oracle_mixable: variance < 10.0 * boundary_variance,
        analytic_mixable: case.verdict.holds(),
    }
}

/// Two-sided Kolmogorov-Smirnov critical value at the 5% level.
pub fn ks_critical(n: usize) -> f64 {
    1.358 / (n as f64).sqrt()
}
