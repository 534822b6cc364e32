// SPDX-License-Identifier: Apache-2.0

use proptest::prelude::*;

use qlitho_core::deposition::{brute_force_rate, profile, Normalization};
use qlitho_core::fock::{Geometry, MixedState, PureState};
use qlitho_core::imperfections::{
    degradation_report, lossy_mixture, lower_order_profile, DegradationReport, LossModel,
};
use qlitho_core::planner::{
    chain_geometry, entry_state, phases_for_pixel, PixelAddress, PixelLayout,
};
use qlitho_core::presets;

fn small_geometry() -> impl Strategy<Value = Geometry> {
    prop::sample::select(vec![
        presets::grazing(1).unwrap(),
        presets::grazing(4).unwrap(),
        presets::pairs_3_3().unwrap(),
        chain_geometry(2, 4).unwrap(),
    ])
}

fn shifted_state(g: &Geometry, x: f64) -> PureState {
    entry_state(g, &qlitho_core::planner::phases_for_position(g, x)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn loss_mixture_is_normalized(g in small_geometry(), eta in 0.0f64..=1.0, x in 0.0f64..1.0) {
        let mix = lossy_mixture(&shifted_state(&g, x), &LossModel::uniform(eta).unwrap()).unwrap();
        prop_assert!((mix.total_weight() - 1.0).abs() < 1e-12);
        for (w, c) in mix.components() {
            prop_assert!(*w >= 0.0);
            prop_assert!((c.norm_sq() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn loss_scales_rate_by_eta_power(g in small_geometry(), eta in 0.05f64..=1.0, x in -1.0f64..1.0, kx in 0.0f64..1.0) {
        let m = g.total_photons();
        let k = 1 + (kx * m as f64) as u32 % m;
        let state = shifted_state(&g, 0.1);
        let mix = lossy_mixture(&state, &LossModel::uniform(eta).unwrap()).unwrap();
        let ideal = brute_force_rate(&state, x, k).unwrap();
        let lossy = brute_force_rate(&mix, x, k).unwrap();
        prop_assert!((lossy - eta.powi(k as i32) * ideal).abs() <= 1e-12 * ideal.max(1e-300) + 1e-300);
    }

    // Losing one photon and absorbing the remaining M-1 deposits like
    // absorbing M-1 photons from the intact state.
    #[test]
    fn single_loss_branch_matches_lower_order(g in small_geometry(), eta in 0.05f64..0.95, x in -1.0f64..1.0) {
        let m = g.total_photons();
        prop_assume!(m >= 2);
        let state = shifted_state(&g, 0.3);
        let mix = lossy_mixture(&state, &LossModel::uniform(eta).unwrap()).unwrap();
        let branch: Vec<(f64, PureState)> = mix
            .components()
            .iter()
            .filter(|(_, c)| c.amplitudes().keys().all(|o| o.total() == m - 1))
            .cloned()
            .collect();
        let weight: f64 = branch.iter().map(|(w, _)| w).sum();
        prop_assert!((weight - m as f64 * (1.0 - eta) * eta.powi(m as i32 - 1)).abs() < 1e-12);
        let branch_rate: f64 = branch
            .iter()
            .map(|(w, c)| w * brute_force_rate(c, x, m - 1).unwrap())
            .sum();
        let ideal = brute_force_rate(&state, x, m - 1).unwrap();
        let expected = (1.0 - eta) * eta.powi(m as i32 - 1) * ideal;
        prop_assert!((branch_rate - expected).abs() <= 1e-9 * expected.max(1e-12));
    }
}

fn reports(g: &Geometry, pixel: usize, samples: usize) -> Vec<DegradationReport> {
    let layout = PixelLayout::of(g).unwrap();
    let target = PixelAddress::new(pixel);
    let state =
        MixedState::pure(entry_state(g, &phases_for_pixel(g, &layout, target).unwrap()).unwrap());
    let grid = layout.period_grid(samples).unwrap();
    let m = g.total_photons();
    let reference = profile(
        &qlitho_core::deposition::BruteForce::new(state.clone(), m).unwrap(),
        &grid,
        Normalization::PeakUnity,
    )
    .unwrap();
    (1..=m)
        .map(|k| {
            let prof = if k == m {
                reference.clone()
            } else {
                lower_order_profile(&state, k, &grid).unwrap()
            };
            degradation_report(&prof, &reference, &layout, &[target]).unwrap()
        })
        .collect()
}

#[test]
fn degradation_is_monotone_in_order() {
    let r = reports(&presets::grazing(4).unwrap(), 3, 2001);
    for k in 1..r.len() {
        assert!(r[k].fwhm < r[k - 1].fwhm, "fwhm K={} vs K={}", k + 1, k);
        assert!(r[k].exposure_penalty <= r[k - 1].exposure_penalty + 1e-12);
    }
    assert!(!r[3].missing_top_harmonic);
    assert!(r[2].missing_top_harmonic);
    assert!(r[3].exposure_penalty < 1e-12);
}

#[test]
fn multi_pair_state_degrades_more() {
    let two_mode = reports(&presets::grazing(4).unwrap(), 3, 2001);
    let six_mode = reports(&chain_geometry(2, 4).unwrap(), 7, 4801);
    let rise = |r: &[DegradationReport]| r[2].off_target_fraction - r[3].off_target_fraction;
    assert!(six_mode[2].off_target_fraction > two_mode[2].off_target_fraction);
    assert!(rise(&six_mode) > rise(&two_mode));
}

#[test]
fn trench_modulation_is_about_a_tenth() {
    let plan = presets::trench().unwrap();
    let layout = plan.layout().unwrap();
    let grid = layout.period_grid(4001).unwrap();
    let prof = profile(
        &plan.closed_form(10).unwrap(),
        &grid,
        Normalization::PeakUnity,
    )
    .unwrap();
    let r = degradation_report(&prof, &prof, &layout, &plan.targets()).unwrap();
    assert!((0.05..=0.15).contains(&r.unwanted_modulation), "{r}");
}
