// SPDX-License-Identifier: Apache-2.0

//! Deposition-rate profiles.
//!
//! Two independent routes compute the multi-photon deposition rate:
//!
//! * [`brute_force_rate`] propagates a Fock-space state to the film position,
//!   applies `ê^K` and takes the squared norm. It works for any absorption
//!   order `K` and for mixtures.
//! * [`closed_form_rate`] evaluates the full-order (`K = M`) rate of a product
//!   of reciprocal binomial pairs as a product of normalized Dirichlet kernels,
//!   `Π_j D_{N_j}(4π s_j x - φ_j) / (N_j + 1)²`, whose global peak is exactly 1.
//!
//! The two agree up to one positive constant, [`full_order_peak`].

use std::f64::consts::PI;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::fock::{Geometry, MixedState, PureState};

/// Uniform sampling of `[x_min, x_max]` (wavelength units), endpoints included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub samples: usize,
}

impl SamplingGrid {
    pub fn new(x_min: f64, x_max: f64, samples: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite()) || x_min >= x_max {
            return Err(Error::DegenerateGrid(format!(
                "need x_min < x_max, got [{x_min}, {x_max}]"
            )));
        }
        if samples < 2 {
            return Err(Error::DegenerateGrid(format!(
                "need at least 2 samples, got {samples}"
            )));
        }
        Ok(SamplingGrid {
            x_min,
            x_max,
            samples,
        })
    }

    pub fn step(&self) -> f64 {
        (self.x_max - self.x_min) / (self.samples - 1) as f64
    }

    pub fn span(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn x(&self, i: usize) -> f64 {
        if i + 1 == self.samples {
            self.x_max
        } else {
            self.x_min + i as f64 * self.step()
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.samples).map(|i| self.x(i)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    Raw,
    #[serde(rename = "peak")]
    PeakUnity,
    #[serde(rename = "pixelsum")]
    PixelSumUnity,
}

impl FromStr for Normalization {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "raw" => Ok(Normalization::Raw),
            "peak" => Ok(Normalization::PeakUnity),
            "pixelsum" => Ok(Normalization::PixelSumUnity),
            other => Err(format!(
                "unknown normalization `{other}` (raw, peak, pixelsum)"
            )),
        }
    }
}

impl Normalization {
    pub fn as_str(self) -> &'static str {
        match self {
            Normalization::Raw => "raw",
            Normalization::PeakUnity => "peak",
            Normalization::PixelSumUnity => "pixelsum",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DepositionProfile {
    pub grid: SamplingGrid,
    pub values: Vec<f64>,
    pub normalization: Normalization,
}

impl DepositionProfile {
    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        best
    }

    /// Linear interpolation at `x`, clamped to the grid.
    pub fn value_at(&self, x: f64) -> f64 {
        let g = &self.grid;
        let t = ((x - g.x_min) / g.step()).clamp(0.0, (g.samples - 1) as f64);
        let i = (t.floor() as usize).min(g.samples - 2);
        let f = t - i as f64;
        self.values[i] * (1.0 - f) + self.values[i + 1] * f
    }

    /// Divides by the maximum sample.
    pub fn peak_normalized(&self) -> Result<DepositionProfile> {
        let m = self.max();
        if !(m > 0.0) {
            return Err(Error::Normalization("profile is identically zero".into()));
        }
        Ok(DepositionProfile {
            grid: self.grid,
            values: self.values.iter().map(|v| v / m).collect(),
            normalization: Normalization::PeakUnity,
        })
    }
}

/// `D_N(θ) / (N + 1)²` with `D_N(θ) = sin²((N+1)θ/2) / sin²(θ/2)`.
///
/// `θ` is first reduced to `(-π, π]` so that the removable singularity at
/// multiples of 2π is approached with full relative precision.
pub fn dirichlet_normalized(photons: u32, theta: f64) -> f64 {
    let t = theta - 2.0 * PI * (theta / (2.0 * PI)).round();
    let half = 0.5 * t;
    let den = half.sin();
    if den.abs() < 1e-9 {
        return 1.0;
    }
    let n1 = photons as f64 + 1.0;
    let num = (n1 * half).sin();
    (num * num) / (den * den * n1 * n1)
}

/// Full-order deposition rate of the product state with relative phases
/// `phases` (one per pair), normalized so that the global peak is 1.
pub fn closed_form_rate(geometry: &Geometry, phases: &[f64], x: f64) -> f64 {
    debug_assert_eq!(phases.len(), geometry.pairs().len());
    geometry
        .pairs()
        .iter()
        .zip(phases)
        .map(|(p, phi)| dirichlet_normalized(p.photons, 4.0 * PI * p.scaling * x - phi))
        .product()
}

/// A pure or mixed state, borrowed.
#[derive(Debug, Clone, Copy)]
pub enum Ensemble<'a> {
    Pure(&'a PureState),
    Mixed(&'a MixedState),
}

impl<'a> From<&'a PureState> for Ensemble<'a> {
    fn from(s: &'a PureState) -> Self {
        Ensemble::Pure(s)
    }
}

impl<'a> From<&'a MixedState> for Ensemble<'a> {
    fn from(s: &'a MixedState) -> Self {
        Ensemble::Mixed(s)
    }
}

/// `‖ê^K U(x) |ψ⟩‖²`, weight-averaged over mixture components.
///
/// Distinguishable final states are summed incoherently because the squared
/// norm adds their probabilities.
pub fn brute_force_rate<'a>(ensemble: impl Into<Ensemble<'a>>, x: f64, order: u32) -> Result<f64> {
    match ensemble.into() {
        Ensemble::Pure(s) => Ok(s.propagate(x).apply_absorption(order)?.norm_sq()),
        Ensemble::Mixed(m) => {
            let mut total = 0.0;
            for (w, s) in m.components() {
                total += w * s.propagate(x).apply_absorption(order)?.norm_sq();
            }
            Ok(total)
        }
    }
}

fn ln_factorial(n: u32) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// Brute-force full-order rate at the constructive-interference peak of the
/// product state: `(M!)² Π_j (N_j+1)² / (W^M Π_j 𝒩_j)`.
///
/// Every basis vector of a product of reciprocal binomial states maps onto the
/// vacuum with the same coefficient `M! / √(W^M Π 𝒩_j)`, so the peak is that
/// coefficient times the number of basis vectors, squared.
pub fn full_order_peak(geometry: &Geometry) -> f64 {
    let m = geometry.total_photons();
    let w = geometry.mode_count() as f64;
    let mut ln = 2.0 * ln_factorial(m) - m as f64 * w.ln();
    for p in geometry.pairs() {
        let n = p.photons;
        let inv_binom_sum: f64 = (0..=n)
            .map(|k| (ln_factorial(k) + ln_factorial(n - k) - ln_factorial(n)).exp())
            .sum();
        let ln_norm = ln_factorial(n) + inv_binom_sum.ln();
        ln += 2.0 * (n as f64 + 1.0).ln() - ln_norm;
    }
    ln.exp()
}

/// Anything that yields a deposition rate at a film position.
pub trait RateSource: Sync {
    fn rate(&self, x: f64) -> f64;

    /// Factor that maps raw rates onto the pixel-sum scale, where every
    /// exposed pixel contributes its canonical single-pixel profile at unit
    /// weight. `None` when no such scale exists (lower-order absorption).
    fn pixel_sum_scale(&self) -> Option<f64>;
}

/// Closed-form full-order rate of a weighted family of phase settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedForm {
    geometry: Geometry,
    entries: Vec<(f64, Vec<f64>)>,
}

impl ClosedForm {
    /// Refuses `order != M`: there is no closed form for lower-order absorption.
    pub fn new(geometry: Geometry, entries: Vec<(f64, Vec<f64>)>, order: u32) -> Result<Self> {
        let photons = geometry.total_photons();
        if order != photons {
            return Err(Error::ClosedFormOrder { order, photons });
        }
        if let Some((_, bad)) = entries
            .iter()
            .find(|(_, p)| p.len() != geometry.pairs().len())
        {
            return Err(Error::GeometryMismatch(format!(
                "{} phases for {} pairs",
                bad.len(),
                geometry.pairs().len()
            )));
        }
        Ok(ClosedForm { geometry, entries })
    }

    pub fn single(geometry: Geometry, phases: Vec<f64>) -> Result<Self> {
        let order = geometry.total_photons();
        Self::new(geometry, vec![(1.0, phases)], order)
    }
}

impl RateSource for ClosedForm {
    fn rate(&self, x: f64) -> f64 {
        self.entries
            .iter()
            .map(|(w, ph)| w * closed_form_rate(&self.geometry, ph, x))
            .sum()
    }

    fn pixel_sum_scale(&self) -> Option<f64> {
        Some(self.entries.len() as f64)
    }
}

/// Brute-force rate of an ensemble for absorption order `K`.
#[derive(Debug, Clone, PartialEq)]
pub struct BruteForce {
    ensemble: MixedState,
    order: u32,
    pixels: usize,
}

impl BruteForce {
    pub fn new(ensemble: MixedState, order: u32) -> Result<Self> {
        if order == 0 {
            return Err(Error::ZeroOrder);
        }
        Ok(BruteForce {
            ensemble,
            order,
            pixels: 1,
        })
    }

    /// Number of equally weighted pixel states the ensemble mixes; used by
    /// the pixel-sum normalization.
    pub fn with_pixel_count(mut self, pixels: usize) -> Self {
        self.pixels = pixels;
        self
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn ensemble(&self) -> &MixedState {
        &self.ensemble
    }
}

impl RateSource for BruteForce {
    fn rate(&self, x: f64) -> f64 {
        brute_force_rate(&self.ensemble, x, self.order).expect("order checked at construction")
    }

    fn pixel_sum_scale(&self) -> Option<f64> {
        let geometry = self.ensemble.components()[0].1.geometry();
        (self.order == geometry.total_photons())
            .then(|| self.pixels as f64 / full_order_peak(geometry))
    }
}

/// Samples `source` over `grid` with the default execution strategy.
pub fn profile(
    source: &dyn RateSource,
    grid: &SamplingGrid,
    normalization: Normalization,
) -> Result<DepositionProfile> {
    profile_with(source, grid, normalization, Exec::default())
}

pub fn profile_with(
    source: &dyn RateSource,
    grid: &SamplingGrid,
    normalization: Normalization,
    exec: Exec,
) -> Result<DepositionProfile> {
    let grid = SamplingGrid::new(grid.x_min, grid.x_max, grid.samples)?;
    let values: Vec<f64> = exec.map_indexed(grid.samples, |i| source.rate(grid.x(i)).max(0.0));
    let raw = DepositionProfile {
        grid,
        values,
        normalization: Normalization::Raw,
    };
    match normalization {
        Normalization::Raw => Ok(raw),
        Normalization::PeakUnity => raw.peak_normalized(),
        Normalization::PixelSumUnity => {
            let scale = source.pixel_sum_scale().ok_or_else(|| {
                Error::Normalization("pixel-sum scale requires full-order absorption".into())
            })?;
            Ok(DepositionProfile {
                grid,
                values: raw.values.iter().map(|v| v * scale).collect(),
                normalization: Normalization::PixelSumUnity,
            })
        }
    }
}

/// Separable two-axis deposition: `values[i * ny + j] = px[i] · py[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile2d {
    pub x: SamplingGrid,
    pub y: SamplingGrid,
    pub values: Vec<f64>,
    pub normalization: Normalization,
}

impl Profile2d {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.y.samples + j]
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `(i, j)` of the largest value.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (k, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = k;
            }
        }
        (best / self.y.samples, best % self.y.samples)
    }

    /// Element-wise `self + weight · other` on the same grids.
    pub fn add_scaled(&mut self, other: &Profile2d, weight: f64) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += weight * b;
        }
    }
}

pub fn profile_2d(px: &DepositionProfile, py: &DepositionProfile) -> Result<Profile2d> {
    if px.normalization != py.normalization {
        return Err(Error::Normalization(format!(
            "axis profiles use different normalizations ({} vs {})",
            px.normalization.as_str(),
            py.normalization.as_str()
        )));
    }
    let mut values = Vec::with_capacity(px.values.len() * py.values.len());
    for a in &px.values {
        values.extend(py.values.iter().map(|b| a * b));
    }
    Ok(Profile2d {
        x: px.grid,
        y: py.grid,
        values,
        normalization: px.normalization,
    })
}

/// Magnitudes `|c_h|`, `h = 0..count`, of the Fourier series of the profile
/// with respect to `fundamental_period`.
///
/// The grid must cover an integer number of periods; its duplicated right
/// endpoint is dropped so the remaining samples are exactly periodic.
pub fn fourier_harmonics(
    profile: &DepositionProfile,
    fundamental_period: f64,
    count: usize,
) -> Result<Vec<f64>> {
    let span = profile.grid.span();
    let periods = span / fundamental_period;
    let whole = periods.round();
    if whole < 1.0 || (periods - whole).abs() > 1e-9 * periods.max(1.0) {
        return Err(Error::NonCommensurate {
            span,
            period: fundamental_period,
        });
    }
    let whole = whole as usize;
    let n = profile.grid.samples - 1;
    if count == 0 || 2 * (count - 1) * whole >= n {
        return Err(Error::DegenerateGrid(format!(
            "{n} samples cannot resolve {count} harmonics over {whole} periods"
        )));
    }
    let samples = &profile.values[..n];
    Ok((0..count)
        .map(|h| {
            let k = (h * whole) as f64;
            let sum: Complex64 = samples
                .iter()
                .enumerate()
                .map(|(i, v)| v * Complex64::cis(-2.0 * PI * k * i as f64 / n as f64))
                .sum();
            sum.norm() / n as f64
        })
        .collect())
}
