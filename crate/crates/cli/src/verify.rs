// SPDX-License-Identifier: Apache-2.0

//! Named invariant suites, each reporting one record per check.

use std::fmt;

use num_rational::Ratio;
use qlitho_core::deposition::{brute_force_rate, profile, BruteForce, Normalization};
use qlitho_core::fock::{MixedState, PureState};
use qlitho_core::imperfections::{
    degradation_report, lossy_mixture, lower_order_profile, LossModel,
};
use qlitho_core::planner::{partition_table, pixel_center, ChainSpec, PixelAddress, PixelLayout};
use qlitho_core::{presets, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    SumToOne,
    ZeroCenters,
    TableOne,
    Oracle,
    ChainBound,
    LossLaw,
    LowerOrder,
    All,
}

impl Suite {
    const EACH: [Suite; 7] = [
        Suite::SumToOne,
        Suite::ZeroCenters,
        Suite::TableOne,
        Suite::Oracle,
        Suite::ChainBound,
        Suite::LossLaw,
        Suite::LowerOrder,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::SumToOne => "sum-to-one",
            Suite::ZeroCenters => "zero-centers",
            Suite::TableOne => "table-one",
            Suite::Oracle => "oracle",
            Suite::ChainBound => "chain-bound",
            Suite::LossLaw => "loss-law",
            Suite::LowerOrder => "lower-order",
            Suite::All => "all",
        }
    }
}

/// One named check: `value` is compared against `tolerance` (`value <
/// tolerance` passes) unless the check is boolean.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub suite: &'static str,
    pub case: String,
    pub pass: bool,
    pub value: f64,
    pub tolerance: f64,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "suite={} case=\"{}\" status={} value={:.3e} tolerance={:.1e}",
            self.suite,
            self.case,
            if self.pass { "pass" } else { "fail" },
            self.value,
            self.tolerance
        )
    }
}

fn below(suite: &'static str, case: String, value: f64, tolerance: f64) -> Check {
    Check {
        suite,
        case,
        pass: value < tolerance,
        value,
        tolerance,
    }
}

fn holds(suite: &'static str, case: String, ok: bool) -> Check {
    Check {
        suite,
        case,
        pass: ok,
        value: if ok { 0.0 } else { 1.0 },
        tolerance: 0.5,
    }
}

pub fn run_suite(suite: Suite, n: Option<u32>) -> Result<Vec<Check>> {
    match suite {
        Suite::All => {
            let mut all = Vec::new();
            for s in Suite::EACH {
                all.extend(run_suite(s, n)?);
            }
            Ok(all)
        }
        Suite::SumToOne => sum_to_one(),
        Suite::ZeroCenters => zero_centers(),
        Suite::TableOne => table_one(n),
        Suite::Oracle => oracle(),
        Suite::ChainBound => Ok(chain_bound()),
        Suite::LossLaw => loss_law(),
        Suite::LowerOrder => lower_order(),
    }
}

/// Largest `|Σ_p Δ_p(x) - 1|` over the single-pixel family of a geometry.
pub fn completeness_deviation(g: &qlitho_core::fock::Geometry, samples: usize) -> Result<f64> {
    let layout = PixelLayout::of(g)?;
    let grid = layout.period_grid(samples)?;
    let plans = (1..=layout.count)
        .map(|p| presets::pattern(g, &[p]))
        .collect::<Result<Vec<_>>>()?;
    Ok((0..grid.samples)
        .map(|i| {
            let x = grid.x(i);
            (plans.iter().map(|pl| pl.closed_form_rate(x)).sum::<f64>() - 1.0).abs()
        })
        .fold(0.0, f64::max))
}

fn sum_to_one() -> Result<Vec<Check>> {
    presets::pixel_family_geometries()?
        .into_iter()
        .map(|(name, g)| {
            Ok(below(
                "sum-to-one",
                name,
                completeness_deviation(&g, 2048)?,
                1e-9,
            ))
        })
        .collect()
}

/// Largest rate of any single-pixel plan at another pixel's center.
pub fn off_center_maximum(g: &qlitho_core::fock::Geometry) -> Result<f64> {
    let layout = PixelLayout::of(g)?;
    let centers = (1..=layout.count)
        .map(|p| pixel_center(&layout, PixelAddress::new(p)))
        .collect::<Result<Vec<_>>>()?;
    let mut worst: f64 = 0.0;
    for p in 1..=layout.count {
        let plan = presets::pattern(g, &[p])?;
        for (q, c) in centers.iter().enumerate() {
            if q + 1 != p {
                worst = worst.max(plan.closed_form_rate(*c));
            }
        }
    }
    Ok(worst)
}

fn zero_centers() -> Result<Vec<Check>> {
    presets::pixel_family_geometries()?
        .into_iter()
        .map(|(name, g)| Ok(below("zero-centers", name, off_center_maximum(&g)?, 1e-12)))
        .collect()
}

fn table_one(n: Option<u32>) -> Result<Vec<Check>> {
    let halves: Vec<u32> = match n {
        Some(n) => vec![n],
        None => (1..=5).collect(),
    };
    let mut checks = Vec::new();
    for n in halves {
        for row in partition_table(n)? {
            let k = row.n1 as i64;
            let rest = (2 * n) as i64 - k + 1;
            let ok = row.pixels as i64 == (k + 1) * rest
                && row.feature_size == Ratio::new(1, 2 * (k + 1))
                && row.period == Ratio::new(rest, 2);
            checks.push(holds("table-one", format!("N={n} n={k}"), ok));
        }
    }
    Ok(checks)
}

/// Largest peak-normalized difference between the two engines.
pub fn oracle_error(plan: &qlitho_core::planner::ExposurePlan, samples: usize) -> Result<f64> {
    let m = plan.geometry().total_photons();
    let grid = plan.layout()?.period_grid(samples)?;
    let closed = profile(&plan.closed_form(m)?, &grid, Normalization::PeakUnity)?;
    let brute = profile(&plan.brute_force(m)?, &grid, Normalization::PeakUnity)?;
    Ok(closed
        .values
        .iter()
        .zip(&brute.values)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

fn oracle() -> Result<Vec<Check>> {
    presets::oracle_cases()?
        .into_iter()
        .map(|(name, plan)| Ok(below("oracle", name, oracle_error(&plan, 2048)?, 1e-9)))
        .collect()
}

fn chain_bound() -> Vec<Check> {
    let mut checks = Vec::new();
    for m in 2..=8u32 {
        for n in 1..m {
            let p = ChainSpec::new(n, m).expect("n < m").pixel_count();
            let equal = ((m - n + 1) * (n + 1)) as u64;
            let strict = m - n < 2 || p > equal;
            let ok = p == (1u64 << (m - n)) * (n as u64 + 1) && p >= equal && strict;
            checks.push(holds(
                "chain-bound",
                format!("N={n} M={m} P={p} partition={equal}"),
                ok,
            ));
        }
    }
    checks
}

/// Largest relative deviation of the lossy full-order rate from `η^M` times
/// the ideal rate.
pub fn loss_law_error(photons: u32, eta: f64, points: usize) -> Result<f64> {
    let g = presets::grazing(photons)?;
    let state = PureState::product(&g);
    let mix = lossy_mixture(&state, &LossModel::uniform(eta)?)?;
    let factor = eta.powi(photons as i32);
    let mut worst: f64 = 0.0;
    for i in 0..points {
        let x = 0.5 * i as f64 / points as f64;
        let ideal = brute_force_rate(&state, x, photons)?;
        let lossy = brute_force_rate(&mix, x, photons)?;
        if ideal > 1e-300 {
            worst = worst.max((lossy / (factor * ideal) - 1.0).abs());
        }
    }
    Ok(worst)
}

fn loss_law() -> Result<Vec<Check>> {
    Ok(vec![below(
        "loss-law",
        "grazing N=4 eta=0.9 factor 0.6561".into(),
        loss_law_error(4, 0.9, 64)?,
        1e-12,
    )])
}

/// FWHM and top-harmonic ratio for each absorption order `1..=M` of the
/// grazing `M`-photon state peaked on pixel `pixel`.
pub fn lower_order_series(photons: u32, pixel: usize, samples: usize) -> Result<Vec<(f64, f64)>> {
    let g = presets::grazing(photons)?;
    let plan = presets::pattern(&g, &[pixel])?;
    let layout = plan.layout()?;
    let grid = layout.period_grid(samples)?;
    let state: MixedState = plan.mixed_state()?;
    let reference = profile(
        &BruteForce::new(state.clone(), photons)?,
        &grid,
        Normalization::PeakUnity,
    )?;
    (1..=photons)
        .map(|k| {
            let prof = if k == photons {
                reference.clone()
            } else {
                lower_order_profile(&state, k, &grid)?
            };
            let r = degradation_report(&prof, &reference, &layout, &plan.targets())?;
            Ok((r.fwhm, r.top_harmonic_ratio))
        })
        .collect()
}

fn lower_order() -> Result<Vec<Check>> {
    let series = lower_order_series(4, 3, 2049)?;
    let mut checks = Vec::new();
    for k in (1..4).rev() {
        let (wider, narrower) = (series[k - 1].0, series[k].0);
        checks.push(holds(
            "lower-order",
            format!("fwhm K={k} ({wider:.4}) > K={} ({narrower:.4})", k + 1),
            wider > narrower,
        ));
    }
    checks.push(below(
        "lower-order",
        "top harmonic absent at K=3".into(),
        series[2].1,
        1e-9,
    ));
    checks.push(holds(
        "lower-order",
        format!("top harmonic present at K=4 (ratio {:.3e})", series[3].1),
        series[3].1 > 1e-3,
    ));
    Ok(checks)
}
