// SPDX-License-Identifier: Apache-2.0

//! Linear loss, lower-order absorption and the resolution / exposure-penalty
//! metrics used to compare degraded profiles with the ideal one.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;

use crate::deposition::{
    fourier_harmonics, profile, BruteForce, DepositionProfile, Normalization, SamplingGrid,
};
use crate::error::{Error, Result};
use crate::fock::{MixedState, Occupation, PureState, NORM_TOLERANCE};
use crate::planner::{pixel_center, PixelAddress, PixelLayout};

/// Per-mode transmission between the state source and the film.
#[derive(Debug, Clone, PartialEq)]
pub struct LossModel {
    uniform: f64,
    per_mode: BTreeMap<usize, f64>,
}

impl LossModel {
    pub fn uniform(transmission: f64) -> Result<Self> {
        check_transmission(transmission)?;
        Ok(LossModel {
            uniform: transmission,
            per_mode: BTreeMap::new(),
        })
    }

    /// Overrides the transmission of mode `mode` (occupation-vector position).
    pub fn with_mode(mut self, mode: usize, transmission: f64) -> Result<Self> {
        check_transmission(transmission)?;
        self.per_mode.insert(mode, transmission);
        Ok(self)
    }

    pub fn transmission(&self, mode: usize) -> f64 {
        self.per_mode.get(&mode).copied().unwrap_or(self.uniform)
    }
}

fn check_transmission(t: f64) -> Result<()> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(Error::Transmission(t))
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Enumerates every loss pattern `l ≤ n` below `limit`, odometer style.
fn for_each_pattern(limit: &[u32], mut f: impl FnMut(&[u32])) {
    let mut l = vec![0u32; limit.len()];
    loop {
        f(&l);
        let mut m = 0;
        loop {
            if m == l.len() {
                return;
            }
            if l[m] < limit[m] {
                l[m] += 1;
                break;
            }
            l[m] = 0;
            m += 1;
        }
    }
}

/// Exact outcome mixture of independent per-photon loss.
///
/// Each photon in mode `m` survives with probability `η_m`. Loss patterns are
/// orthogonal in the traced-out environment, so each pattern is one mixture
/// component with amplitude factors `√(C(n,l) η^(n-l) (1-η)^l)`. Components
/// that coincide up to a global phase are merged.
pub fn lossy_mixture(state: &PureState, loss: &LossModel) -> Result<MixedState> {
    let modes = state.geometry().mode_count();
    let eta: Vec<f64> = (0..modes).map(|m| loss.transmission(m)).collect();
    let mut branches: BTreeMap<Vec<u32>, BTreeMap<Occupation, Complex64>> = BTreeMap::new();
    for (occ, amp) in state.amplitudes() {
        let n = occ.counts();
        for_each_pattern(n, |l| {
            let mut factor = 1.0;
            for m in 0..modes {
                let kept = n[m] - l[m];
                factor *= (binomial(n[m], l[m])
                    * eta[m].powi(kept as i32)
                    * (1.0 - eta[m]).powi(l[m] as i32))
                .sqrt();
            }
            if factor == 0.0 {
                return;
            }
            let out: Vec<u32> = n.iter().zip(l).map(|(a, b)| a - b).collect();
            *branches
                .entry(l.to_vec())
                .or_default()
                .entry(Occupation::new(out))
                .or_default() += amp * factor;
        });
    }

    let mut components: Vec<(f64, PureState)> = Vec::new();
    for amplitudes in branches.into_values() {
        let branch = PureState::unnormalized(state.geometry().clone(), amplitudes)?;
        let weight = branch.norm_sq();
        if weight <= 0.0 {
            continue;
        }
        let normalized = branch.normalize()?.canonical_phase();
        match components
            .iter_mut()
            .find(|(_, s)| same_state(s, &normalized))
        {
            Some((w, _)) => *w += weight,
            None => components.push((weight, normalized)),
        }
    }
    let total: f64 = components.iter().map(|(w, _)| w).sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::BadWeights { sum: total });
    }
    // Remove accumulated rounding so the mixture invariant holds at 1e-12.
    for (w, _) in components.iter_mut() {
        *w /= total;
    }
    MixedState::new(components)
}

fn same_state(a: &PureState, b: &PureState) -> bool {
    a.support_len() == b.support_len()
        && a.amplitudes()
            .iter()
            .all(|(o, v)| (b.amplitude(o) - v).norm() <= NORM_TOLERANCE)
}

/// Peak-normalized brute-force profile for absorption order `1 ≤ K < M`.
pub fn lower_order_profile(
    state: &MixedState,
    order: u32,
    grid: &SamplingGrid,
) -> Result<DepositionProfile> {
    let photons = state
        .components()
        .first()
        .map(|(_, s)| s.geometry().total_photons())
        .unwrap_or(0);
    if order < 1 || order >= photons {
        return Err(Error::LowerOrder { order, photons });
    }
    let src = BruteForce::new(state.clone(), order)?;
    profile(&src, grid, Normalization::PeakUnity)
}

/// Resolution and exposure-penalty summary of one profile.
#[derive(Debug, Clone, PartialEq)]
pub struct DegradationReport {
    /// Full width at half maximum of the dominant peak (wavelengths).
    pub fwhm: f64,
    /// Largest rate at a non-target pixel center, relative to the peak.
    pub exposure_penalty: f64,
    /// Largest rate inside off-target pixels whose neighbours are also off
    /// target, or the deepest dip inside exposed pixels flanked by exposed
    /// pixels, whichever is larger; relative to the peak.
    pub unwanted_modulation: f64,
    /// Fraction of the deposited dose that lands outside the target pixels.
    pub off_target_fraction: f64,
    /// Index of the highest harmonic present in the reference.
    pub top_harmonic: usize,
    /// Magnitude of that harmonic relative to the DC component.
    pub top_harmonic_ratio: f64,
    pub missing_top_harmonic: bool,
}

impl fmt::Display for DegradationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "fwhm={:.16e} penalty={:.16e} modulation={:.16e} off_target={:.16e} top_harmonic={} top_harmonic_ratio={:.16e} missing_top_harmonic={}",
            self.fwhm,
            self.exposure_penalty,
            self.unwanted_modulation,
            self.off_target_fraction,
            self.top_harmonic,
            self.top_harmonic_ratio,
            self.missing_top_harmonic
        )
    }
}

/// Harmonics below this fraction of DC count as absent.
pub const HARMONIC_FLOOR: f64 = 1e-9;

/// Full width at half maximum of the dominant peak, linearly interpolated.
/// Profiles covering whole periods are treated as periodic.
pub fn fwhm(profile: &DepositionProfile, period: f64) -> Result<f64> {
    let v = &profile.values;
    let peak_i = profile.argmax();
    let peak = v[peak_i];
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    if !(peak > 0.0) || peak - min <= 1e-12 * peak {
        return Err(Error::FlatProfile);
    }
    let half = 0.5 * peak;
    let step = profile.grid.step();
    let periods = profile.grid.span() / period;
    let periodic = (periods - periods.round()).abs() < 1e-9 && periods.round() >= 1.0;
    // Periodic samples exclude the duplicated endpoint.
    let n = if periodic { v.len() - 1 } else { v.len() };
    let at = |k: isize| -> Option<f64> {
        if periodic {
            Some(v[k.rem_euclid(n as isize) as usize])
        } else if k >= 0 && (k as usize) < n {
            Some(v[k as usize])
        } else {
            None
        }
    };
    let side = |dir: isize| -> Result<f64> {
        let mut k = peak_i as isize;
        for _ in 0..n {
            let next = k + dir;
            let b = at(next).ok_or(Error::FlatProfile)?;
            if b < half {
                let a = at(k).expect("visited");
                let frac = (a - half) / (a - b);
                return Ok(((k - peak_i as isize) as f64 + dir as f64 * frac).abs() * step);
            }
            k = next;
        }
        Err(Error::FlatProfile)
    };
    Ok(side(-1)? + side(1)?)
}

fn interval_extremes(profile: &DepositionProfile, lo: f64, hi: f64) -> (f64, f64) {
    let mut max = profile.value_at(lo).max(profile.value_at(hi));
    let mut min = profile.value_at(lo).min(profile.value_at(hi));
    for (i, v) in profile.values.iter().enumerate() {
        let x = profile.grid.x(i);
        if x > lo && x < hi {
            max = max.max(*v);
            min = min.min(*v);
        }
    }
    (min, max)
}

/// Compares `profile` with `reference` on the pixel grid of `layout`.
///
/// Both profiles must share one grid spanning whole pattern periods.
/// `targets` are the exposed pixels.
pub fn degradation_report(
    profile: &DepositionProfile,
    reference: &DepositionProfile,
    layout: &PixelLayout,
    targets: &[PixelAddress],
) -> Result<DegradationReport> {
    if profile.grid != reference.grid {
        return Err(Error::DegenerateGrid(
            "profile and reference grids differ".into(),
        ));
    }
    let period = layout.period_f64();
    let width = layout.width_f64();
    let peak = profile.max();
    let width_of_peak = fwhm(profile, period)?;

    let primary: Vec<usize> = targets
        .iter()
        .filter(|t| !t.intermediate)
        .map(|t| t.index)
        .collect();
    let near_intermediate = |p: usize| {
        targets
            .iter()
            .filter(|t| t.intermediate)
            .any(|t| p == t.index || p == t.index % layout.count + 1)
    };
    let exposed = |p: usize| primary.contains(&p);
    let wrap = |p: isize| ((p - 1).rem_euclid(layout.count as isize) + 1) as usize;

    let mut penalty: f64 = 0.0;
    let mut modulation: f64 = 0.0;
    for p in 1..=layout.count {
        let neighbours_same = exposed(wrap(p as isize - 1)) == exposed(p)
            && exposed(wrap(p as isize + 1)) == exposed(p);
        let lo = (p - 1) as f64 * width;
        let (min, max) = interval_extremes(profile, lo, lo + width);
        if exposed(p) {
            if neighbours_same {
                modulation = modulation.max(1.0 - min / peak);
            }
            continue;
        }
        if near_intermediate(p) {
            continue;
        }
        let center = pixel_center(layout, PixelAddress::new(p))?;
        penalty = penalty.max(profile.value_at(center) / peak);
        if neighbours_same {
            modulation = modulation.max(max / peak);
        }
    }

    // Integrated dose over one period, duplicated endpoint dropped.
    let n = profile.values.len() - 1;
    let mut inside = 0.0;
    let mut total = 0.0;
    for i in 0..n {
        let x = profile.grid.x(i);
        let v = profile.values[i];
        total += v;
        let pixel = ((x - profile.grid.x_min).rem_euclid(period) / width).floor() as usize + 1;
        if exposed(pixel.min(layout.count)) {
            inside += v;
        }
    }
    let off_target_fraction = if total > 0.0 {
        1.0 - inside / total
    } else {
        0.0
    };

    let harmonics =
        (profile.grid.samples - 1) / (2 * (profile.grid.span() / period).round() as usize);
    let count = harmonics.clamp(1, 512);
    let reference_h = fourier_harmonics(reference, period, count)?;
    let profile_h = fourier_harmonics(profile, period, count)?;
    let top_harmonic = reference_h
        .iter()
        .rposition(|h| *h > 1e-6 * reference_h[0])
        .unwrap_or(0);
    let top_harmonic_ratio = profile_h[top_harmonic] / profile_h[0];

    Ok(DegradationReport {
        fwhm: width_of_peak,
        exposure_penalty: penalty,
        unwanted_modulation: modulation,
        off_target_fraction,
        top_harmonic,
        top_harmonic_ratio,
        missing_top_harmonic: top_harmonic > 0 && top_harmonic_ratio < HARMONIC_FLOOR,
    })
}
