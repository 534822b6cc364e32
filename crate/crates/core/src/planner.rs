// SPDX-License-Identifier: Apache-2.0

//! Pixel addressing and exposure planning.
//!
//! A geometry's first pair sets the pixel width `1 / (2 (N₁+1) s₁)`; the
//! pattern repeats with the least common period of all excited pairs. A pixel
//! is exposed by shifting pair `j` by `φ_j = 4π s_j x_p (mod 2π)`, where `x_p`
//! is the pixel center, which moves the closed-form peak onto `x_p`.
//! Patterns are statistical mixtures of such single-pixel settings.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::deposition::{
    closed_form_rate, profile_2d, BruteForce, ClosedForm, DepositionProfile, Normalization,
    Profile2d, SamplingGrid,
};
use crate::error::{Error, Result};
use crate::fock::{Geometry, MixedState, ModePair, PureState};

const TAU: f64 = 2.0 * PI;

/// Pixel grid of the optimal chain: one `N`-photon pair at grazing incidence
/// plus `D = M - N` single-photon pairs at scalings `2^-(i-1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChainSpec {
    pub resolution_photons: u32,
    pub doubling_pairs: u32,
}

impl ChainSpec {
    pub fn new(resolution_photons: u32, total_photons: u32) -> Result<Self> {
        if resolution_photons < 1 || total_photons < resolution_photons {
            return Err(Error::ChainPhotons {
                resolution: resolution_photons,
                total: total_photons,
            });
        }
        Ok(ChainSpec {
            resolution_photons,
            doubling_pairs: total_photons - resolution_photons,
        })
    }

    /// `2^D (N + 1)`.
    pub fn pixel_count(&self) -> u64 {
        (1u64 << self.doubling_pairs) * (self.resolution_photons as u64 + 1)
    }

    /// `1 / (2 (N + 1))` wavelengths.
    pub fn pixel_width(&self) -> Ratio<i64> {
        Ratio::new(1, 2 * (self.resolution_photons as i64 + 1))
    }

    /// `2^(D-1)` wavelengths (half a wavelength without doubling pairs).
    pub fn period(&self) -> Ratio<i64> {
        Ratio::new(1i64 << self.doubling_pairs, 2)
    }

    pub fn geometry(&self) -> Geometry {
        let mut pairs = vec![ModePair::new(1, self.resolution_photons, 1.0).expect("valid pair")];
        for i in 2..=self.doubling_pairs + 1 {
            pairs.push(ModePair::new(i, 1, 0.5f64.powi(i as i32 - 1)).expect("valid pair"));
        }
        Geometry::new(pairs).expect("distinct indices")
    }
}

/// Chain geometry for resolution photons `N` and total photons `M`.
pub fn chain_geometry(resolution_photons: u32, total_photons: u32) -> Result<Geometry> {
    Ok(ChainSpec::new(resolution_photons, total_photons)?.geometry())
}

/// Best rational approximation with denominator below 2^20.
fn rational_scaling(s: f64) -> Result<Ratio<i64>> {
    let (mut h0, mut h1) = (0i64, 1i64);
    let (mut k0, mut k1) = (1i64, 0i64);
    let mut r = s;
    for _ in 0..64 {
        let a = r.floor();
        let ai = a as i64;
        let (h2, k2) = (ai * h1 + h0, ai * k1 + k0);
        if k2 > 1 << 20 {
            break;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        if ((h1 as f64 / k1 as f64) - s).abs() <= 1e-12 * s {
            return Ok(Ratio::new(h1, k1));
        }
        let frac = r - a;
        if frac < 1e-15 {
            break;
        }
        r = 1.0 / frac;
    }
    if k1 != 0 && ((h1 as f64 / k1 as f64) - s).abs() <= 1e-12 * s {
        return Ok(Ratio::new(h1, k1));
    }
    Err(Error::Incommensurate(format!(
        "scaling {s} is not a small rational"
    )))
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

fn lcm_ratio(a: Ratio<i64>, b: Ratio<i64>) -> Ratio<i64> {
    let num = a.numer() / gcd(*a.numer(), *b.numer()) * b.numer();
    Ratio::new(num, gcd(*a.denom(), *b.denom()))
}

/// Pixel width, pattern period and pixel count of a geometry, exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PixelLayout {
    pub width: Ratio<i64>,
    pub period: Ratio<i64>,
    pub count: usize,
}

impl PixelLayout {
    pub fn of(geometry: &Geometry) -> Result<Self> {
        let first = geometry
            .pairs()
            .first()
            .ok_or_else(|| Error::Incommensurate("empty geometry".into()))?;
        let s1 = rational_scaling(first.scaling)?;
        let width = Ratio::new(1, 2 * (first.photons as i64 + 1)) / s1;
        let mut period: Option<Ratio<i64>> = None;
        for p in geometry.pairs().iter().filter(|p| p.photons > 0) {
            let own = Ratio::new(1, 2) / rational_scaling(p.scaling)?;
            period = Some(match period {
                Some(acc) => lcm_ratio(acc, own),
                None => own,
            });
        }
        let period = period.unwrap_or_else(|| Ratio::new(1, 2) / s1);
        let count = period / width;
        if !count.is_integer() || *count.numer() < 1 {
            return Err(Error::Incommensurate(format!(
                "period {period} is not a whole number of {width}-wide pixels"
            )));
        }
        Ok(PixelLayout {
            width,
            period,
            count: *count.numer() as usize,
        })
    }

    pub fn width_f64(&self) -> f64 {
        *self.width.numer() as f64 / *self.width.denom() as f64
    }

    pub fn period_f64(&self) -> f64 {
        *self.period.numer() as f64 / *self.period.denom() as f64
    }

    /// Grid over one period with `samples` points.
    pub fn period_grid(&self, samples: usize) -> Result<SamplingGrid> {
        SamplingGrid::new(0.0, self.period_f64(), samples)
    }
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
pub enum Axis {
    #[default]
    X,
    Y,
}

/// 1-based pixel number along one axis; `intermediate` shifts the center by
/// half a pixel towards `index + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PixelAddress {
    pub index: usize,
    pub axis: Axis,
    pub intermediate: bool,
}

impl PixelAddress {
    pub fn new(index: usize) -> Self {
        PixelAddress {
            index,
            axis: Axis::X,
            intermediate: false,
        }
    }

    pub fn intermediate(index: usize) -> Self {
        PixelAddress {
            intermediate: true,
            ..Self::new(index)
        }
    }

    pub fn on(self, axis: Axis) -> Self {
        PixelAddress { axis, ..self }
    }

    /// Any integer label, reduced into `1..=count` (pixel `count` ≡ 0).
    pub fn wrapped(label: i64, count: usize) -> Self {
        Self::new((label - 1).rem_euclid(count as i64) as usize + 1)
    }
}

pub fn pixel_center(layout: &PixelLayout, address: PixelAddress) -> Result<f64> {
    if address.index < 1 || address.index > layout.count {
        return Err(Error::PixelOutOfRange {
            index: address.index as i64,
            count: layout.count,
        });
    }
    let mut center = (Ratio::from_integer(address.index as i64) - Ratio::new(1, 2)) * layout.width;
    if address.intermediate {
        center += layout.width / 2;
    }
    Ok(*center.numer() as f64 / *center.denom() as f64)
}

/// Relative phases `φ_j = 4π s_j x_p mod 2π` that put the closed-form peak on
/// the pixel center.
pub fn phases_for_pixel(
    geometry: &Geometry,
    layout: &PixelLayout,
    address: PixelAddress,
) -> Result<Vec<f64>> {
    let center = pixel_center(layout, address)?;
    Ok(phases_for_position(geometry, center))
}

pub fn phases_for_position(geometry: &Geometry, x: f64) -> Vec<f64> {
    geometry
        .pairs()
        .iter()
        .map(|p| (2.0 * TAU * p.scaling * x).rem_euclid(TAU))
        .collect()
}

/// Two-pair labels `(ℓ₁, ℓ₂)` with `p ≡ ℓ₁ + (N₁+1) ℓ₂ (mod (N₁+1)(N₂+1))`,
/// `ℓ₁ ∈ 1..=N₁+1`, `ℓ₂ ∈ 1..=N₂+1`.
pub fn ell_indices(pixel: usize, n1: u32, n2: u32) -> Result<(u32, u32)> {
    let (a, b) = (n1 as usize + 1, n2 as usize + 1);
    if pixel < 1 || pixel > a * b {
        return Err(Error::PixelOutOfRange {
            index: pixel as i64,
            count: a * b,
        });
    }
    let l1 = (pixel - 1) % a + 1;
    let l2 = ((pixel - l1) / a) % b;
    let l2 = if l2 == 0 { b } else { l2 };
    Ok((l1 as u32, l2 as u32))
}

/// Inverse of [`ell_indices`].
pub fn pixel_from_ell(l1: u32, l2: u32, n1: u32, n2: u32) -> usize {
    let (a, b) = (n1 as i64 + 1, n2 as i64 + 1);
    PixelAddress::wrapped(l1 as i64 + a * l2 as i64, (a * b) as usize).index
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanEntry {
    pub weight: f64,
    pub phases: Vec<f64>,
    pub target: Option<PixelAddress>,
}

/// Weighted family of relative-phase settings over one geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct ExposurePlan {
    geometry: Geometry,
    entries: Vec<PlanEntry>,
}

/// Product state with relative phases `φ_j` applied as `exp(-i φ_j n_+j)`,
/// i.e. a delay of mode `+j`, which moves the deposition peak to `+x`.
pub fn entry_state(geometry: &Geometry, phases: &[f64]) -> Result<PureState> {
    let mut state = PureState::product(geometry);
    for (p, phi) in geometry.pairs().iter().zip(phases) {
        state = state.apply_pair_phase(p.index, -phi)?;
    }
    Ok(state)
}

impl ExposurePlan {
    pub fn new(geometry: Geometry, entries: Vec<PlanEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptyPattern);
        }
        let sum: f64 = entries.iter().map(|e| e.weight).sum();
        if entries.iter().any(|e| !(e.weight > 0.0)) || (sum - 1.0).abs() > 1e-12 {
            return Err(Error::BadWeights { sum });
        }
        if let Some(e) = entries
            .iter()
            .find(|e| e.phases.len() != geometry.pairs().len())
        {
            return Err(Error::GeometryMismatch(format!(
                "{} phases for {} pairs",
                e.phases.len(),
                geometry.pairs().len()
            )));
        }
        Ok(ExposurePlan { geometry, entries })
    }

    /// Plan from explicit `(weight, phases)` settings; weights are rescaled to
    /// sum to one.
    pub fn from_phases(geometry: Geometry, settings: Vec<(f64, Vec<f64>)>) -> Result<Self> {
        let sum: f64 = settings.iter().map(|(w, _)| w).sum();
        if !(sum > 0.0) {
            return Err(Error::BadWeights { sum });
        }
        let entries = settings
            .into_iter()
            .filter(|(w, _)| *w > 0.0)
            .map(|(w, phases)| PlanEntry {
                weight: w / sum,
                phases,
                target: None,
            })
            .collect();
        Self::new(geometry, entries)
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn entries(&self) -> &[PlanEntry] {
        &self.entries
    }

    pub fn targets(&self) -> Vec<PixelAddress> {
        self.entries.iter().filter_map(|e| e.target).collect()
    }

    pub fn layout(&self) -> Result<PixelLayout> {
        PixelLayout::of(&self.geometry)
    }

    /// Closed-form source; fails unless `order` equals the photon number.
    pub fn closed_form(&self, order: u32) -> Result<ClosedForm> {
        ClosedForm::new(
            self.geometry.clone(),
            self.entries
                .iter()
                .map(|e| (e.weight, e.phases.clone()))
                .collect(),
            order,
        )
    }

    pub fn mixed_state(&self) -> Result<MixedState> {
        let components = self
            .entries
            .iter()
            .map(|e| Ok((e.weight, entry_state(&self.geometry, &e.phases)?)))
            .collect::<Result<Vec<_>>>()?;
        MixedState::new(components)
    }

    pub fn brute_force(&self, order: u32) -> Result<BruteForce> {
        Ok(BruteForce::new(self.mixed_state()?, order)?.with_pixel_count(self.entries.len()))
    }

    /// Weighted closed-form rate at `x`.
    pub fn closed_form_rate(&self, x: f64) -> f64 {
        self.entries
            .iter()
            .map(|e| e.weight * closed_form_rate(&self.geometry, &e.phases, x))
            .sum()
    }

    /// Serialized form; phases are stored in turns (units of 2π).
    pub fn to_toml(&self) -> String {
        let file = PlanFile {
            pair: self.geometry.pairs().to_vec(),
            entry: self
                .entries
                .iter()
                .map(|e| EntryFile::from_entry(e, &self.geometry))
                .collect(),
        };
        toml::to_string(&file).expect("plan serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let file: PlanFile = toml::from_str(text).map_err(|e| Error::Parse {
            line: toml_line(text, &e),
            message: e.message().to_string(),
        })?;
        let geometry = Geometry::new(file.pair)?;
        let entries = file.entry.into_iter().map(EntryFile::into_entry).collect();
        Self::new(geometry, entries)
    }
}

pub(crate) fn toml_line(text: &str, e: &toml::de::Error) -> usize {
    e.span()
        .map(|s| text[..s.start.min(text.len())].lines().count().max(1))
        .unwrap_or(0)
}

#[derive(Debug, Serialize, Deserialize)]
struct PlanFile {
    pair: Vec<ModePair>,
    entry: Vec<EntryFile>,
}

#[derive(Debug, Serialize, Deserialize)]
struct EntryFile {
    weight: f64,
    phases_turns: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    target: Option<usize>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    intermediate: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ell: Option<[u32; 2]>,
}

impl EntryFile {
    fn from_entry(e: &PlanEntry, geometry: &Geometry) -> Self {
        let pairs = geometry.pairs();
        let ell = match (e.target, pairs) {
            (Some(t), [a, b]) if !t.intermediate => ell_indices(t.index, a.photons, b.photons)
                .ok()
                .map(|(x, y)| [x, y]),
            _ => None,
        };
        EntryFile {
            weight: e.weight,
            phases_turns: e.phases.iter().map(|p| p / TAU).collect(),
            target: e.target.map(|t| t.index),
            intermediate: e.target.is_some_and(|t| t.intermediate),
            ell,
        }
    }

    fn into_entry(self) -> PlanEntry {
        PlanEntry {
            weight: self.weight,
            phases: self.phases_turns.iter().map(|t| t * TAU).collect(),
            target: self.target.map(|i| PixelAddress {
                index: i,
                axis: Axis::X,
                intermediate: self.intermediate,
            }),
        }
    }
}

/// A pixel to expose, optionally with a grayscale weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Target {
    pub address: PixelAddress,
    pub weight: Option<f64>,
}

impl From<PixelAddress> for Target {
    fn from(address: PixelAddress) -> Self {
        Target {
            address,
            weight: None,
        }
    }
}

impl From<usize> for Target {
    fn from(index: usize) -> Self {
        PixelAddress::new(index).into()
    }
}

/// One entry per distinct target pixel. Unweighted targets count 1; weights are
/// rescaled to sum to one and zero-weight targets are dropped.
pub fn plan_pattern(geometry: &Geometry, targets: &[Target]) -> Result<ExposurePlan> {
    if targets.is_empty() {
        return Err(Error::EmptyPattern);
    }
    let layout = PixelLayout::of(geometry)?;
    let mut merged: BTreeMap<PixelAddress, f64> = BTreeMap::new();
    for t in targets {
        let w = t.weight.unwrap_or(1.0);
        if !(w >= 0.0) || !w.is_finite() {
            return Err(Error::BadWeights { sum: w });
        }
        pixel_center(&layout, t.address)?;
        *merged.entry(t.address).or_default() += w;
    }
    let sum: f64 = merged.values().sum();
    if !(sum > 0.0) {
        return Err(Error::EmptyPattern);
    }
    let entries = merged
        .into_iter()
        .filter(|(_, w)| *w > 0.0)
        .map(|(address, w)| {
            Ok(PlanEntry {
                weight: w / sum,
                phases: phases_for_pixel(geometry, &layout, address)?,
                target: Some(address),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ExposurePlan::new(geometry.clone(), entries)
}

/// Equal-weight plan over every primary pixel the plan does not expose.
pub fn negative_plan(plan: &ExposurePlan) -> Result<ExposurePlan> {
    let layout = plan.layout()?;
    let mut exposed = vec![false; layout.count + 1];
    for e in plan.entries() {
        match e.target {
            Some(t) if !t.intermediate => exposed[t.index] = true,
            Some(_) => {
                return Err(Error::Negative(
                    "intermediate pixels have no complement".into(),
                ))
            }
            None => return Err(Error::Negative("plan entry has no pixel address".into())),
        }
    }
    let complement: Vec<Target> = (1..=layout.count)
        .filter(|&p| !exposed[p])
        .map(Target::from)
        .collect();
    if complement.is_empty() {
        return Err(Error::Negative("plan already covers every pixel".into()));
    }
    plan_pattern(plan.geometry(), &complement)
}

/// One row of the two-pair photon partition table for `2N` photons.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PartitionRow {
    pub n1: u32,
    pub n2: u32,
    pub pixels: u64,
    /// Pixel width in wavelengths.
    pub feature_size: Ratio<i64>,
    /// Fundamental period in wavelengths.
    pub period: Ratio<i64>,
}

/// Partitions `(n, 2N - n)` with pair 2 at `s₂ = 1/(2N - n + 1)`, from
/// `n = 2N` down to `n = 0`.
pub fn partition_table(n: u32) -> Result<Vec<PartitionRow>> {
    if n < 1 {
        return Err(Error::ChainPhotons {
            resolution: n,
            total: 2 * n,
        });
    }
    let total = 2 * n;
    (0..=total)
        .rev()
        .map(|n1| {
            let n2 = total - n1;
            let geometry = Geometry::new(vec![
                ModePair::new(1, n1, 1.0)?,
                ModePair::with_inverse_scaling(2, n2, n2 + 1)?,
            ])?;
            let layout = PixelLayout::of(&geometry)?;
            Ok(PartitionRow {
                n1,
                n2,
                pixels: layout.count as u64,
                feature_size: layout.width,
                period: layout.period,
            })
        })
        .collect()
}

/// Two-axis pixel `(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pixel2d {
    pub x: PixelAddress,
    pub y: PixelAddress,
}

impl Pixel2d {
    pub fn new(x: usize, y: usize) -> Self {
        Pixel2d {
            x: PixelAddress::new(x),
            y: PixelAddress::new(y).on(Axis::Y),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanEntry2d {
    pub weight: f64,
    pub x_phases: Vec<f64>,
    pub y_phases: Vec<f64>,
    pub target: Pixel2d,
}

/// Mixture of independent X and Y settings; each entry exposes the product
/// peak at its `(x, y)` pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct ExposurePlan2d {
    pub x_geometry: Geometry,
    pub y_geometry: Geometry,
    pub entries: Vec<PlanEntry2d>,
}

pub fn plan_pattern_2d(
    x_geometry: &Geometry,
    y_geometry: &Geometry,
    targets: &[Pixel2d],
) -> Result<ExposurePlan2d> {
    if targets.is_empty() {
        return Err(Error::EmptyPattern);
    }
    let (lx, ly) = (PixelLayout::of(x_geometry)?, PixelLayout::of(y_geometry)?);
    let mut distinct = targets.to_vec();
    distinct.sort();
    distinct.dedup();
    let w = 1.0 / distinct.len() as f64;
    let entries = distinct
        .into_iter()
        .map(|t| {
            Ok(PlanEntry2d {
                weight: w,
                x_phases: phases_for_pixel(x_geometry, &lx, t.x)?,
                y_phases: phases_for_pixel(y_geometry, &ly, t.y)?,
                target: t,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExposurePlan2d {
        x_geometry: x_geometry.clone(),
        y_geometry: y_geometry.clone(),
        entries,
    })
}

/// Pixels set in a 0/1 bitmap; row `r` is Y pixel `r + 1`, column `c` is X
/// pixel `c + 1`.
pub fn bitmap_targets(rows: &[Vec<bool>]) -> Vec<Pixel2d> {
    rows.iter()
        .enumerate()
        .flat_map(|(r, row)| {
            row.iter()
                .enumerate()
                .filter(|(_, on)| **on)
                .map(move |(c, _)| Pixel2d::new(c + 1, r + 1))
        })
        .collect()
}

/// Adds an intermediate pixel at the shared corner of every diagonally
/// adjacent pair of targets, smoothing diagonal lines.
pub fn with_intermediate_fill(targets: &[Pixel2d]) -> Vec<Pixel2d> {
    let primary: std::collections::BTreeSet<(usize, usize)> = targets
        .iter()
        .filter(|t| !t.x.intermediate && !t.y.intermediate)
        .map(|t| (t.x.index, t.y.index))
        .collect();
    let mut out = targets.to_vec();
    for &(x, y) in &primary {
        let corner = |cx: usize, cy: usize| Pixel2d {
            x: PixelAddress::intermediate(cx),
            y: PixelAddress::intermediate(cy).on(Axis::Y),
        };
        if primary.contains(&(x + 1, y + 1)) {
            out.push(corner(x, y));
        }
        if y > 1 && primary.contains(&(x + 1, y - 1)) {
            out.push(corner(x, y - 1));
        }
    }
    out.sort();
    out.dedup();
    out
}

impl ExposurePlan2d {
    /// Closed-form two-axis deposition `Σ_e w_e Δx_e(x) Δy_e(y)`.
    pub fn profile(
        &self,
        x_grid: &SamplingGrid,
        y_grid: &SamplingGrid,
        normalization: Normalization,
    ) -> Result<Profile2d> {
        let axis =
            |g: &Geometry, phases: &[f64], grid: &SamplingGrid| -> Result<DepositionProfile> {
                let src = ClosedForm::single(g.clone(), phases.to_vec())?;
                crate::deposition::profile(&src, grid, Normalization::Raw)
            };
        let mut total: Option<Profile2d> = None;
        for e in &self.entries {
            let px = axis(&self.x_geometry, &e.x_phases, x_grid)?;
            let py = axis(&self.y_geometry, &e.y_phases, y_grid)?;
            let p = profile_2d(&px, &py)?;
            match total.as_mut() {
                Some(t) => t.add_scaled(&p, e.weight),
                None => {
                    let mut first = p.clone();
                    first.values.iter_mut().for_each(|v| *v *= e.weight);
                    total = Some(first);
                }
            }
        }
        let mut total = total.ok_or(Error::EmptyPattern)?;
        match normalization {
            Normalization::Raw => {}
            Normalization::PeakUnity => {
                let m = total.max();
                if !(m > 0.0) {
                    return Err(Error::Normalization("profile is identically zero".into()));
                }
                total.values.iter_mut().for_each(|v| *v /= m);
            }
            Normalization::PixelSumUnity => {
                let n = self.entries.len() as f64;
                total.values.iter_mut().for_each(|v| *v *= n);
            }
        }
        total.normalization = normalization;
        Ok(total)
    }

    pub fn to_toml(&self) -> String {
        #[derive(Serialize)]
        struct File<'a> {
            x_pair: &'a [ModePair],
            y_pair: &'a [ModePair],
            entry: Vec<Entry2dFile>,
        }
        let file = File {
            x_pair: self.x_geometry.pairs(),
            y_pair: self.y_geometry.pairs(),
            entry: self
                .entries
                .iter()
                .map(|e| Entry2dFile {
                    weight: e.weight,
                    x_phases_turns: e.x_phases.iter().map(|p| p / TAU).collect(),
                    y_phases_turns: e.y_phases.iter().map(|p| p / TAU).collect(),
                    x_target: e.target.x.index,
                    y_target: e.target.y.index,
                    x_intermediate: e.target.x.intermediate,
                    y_intermediate: e.target.y.intermediate,
                })
                .collect(),
        };
        toml::to_string(&file).expect("plan serializes")
    }
}

#[derive(Debug, Serialize)]
struct Entry2dFile {
    weight: f64,
    x_phases_turns: Vec<f64>,
    y_phases_turns: Vec<f64>,
    x_target: usize,
    y_target: usize,
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    x_intermediate: bool,
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    y_intermediate: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_pair(n1: u32, n2: u32) -> Geometry {
        Geometry::new(vec![
            ModePair::new(1, n1, 1.0).unwrap(),
            ModePair::with_inverse_scaling(2, n2, n2 + 1).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn chain_shapes() {
        let g = chain_geometry(3, 3).unwrap();
        assert_eq!(g.pairs().len(), 1);

        let g = chain_geometry(4, 7).unwrap();
        let photons: Vec<u32> = g.pairs().iter().map(|p| p.photons).collect();
        let scalings: Vec<f64> = g.pairs().iter().map(|p| p.scaling).collect();
        assert_eq!(photons, vec![4, 1, 1, 1]);
        assert_eq!(scalings, vec![1.0, 0.5, 0.25, 0.125]);
        let layout = PixelLayout::of(&g).unwrap();
        assert_eq!(layout.count, 40);
        assert_eq!(layout.period, Ratio::from_integer(4));

        let spec = ChainSpec::new(4, 7).unwrap();
        assert_eq!(spec.pixel_count(), 40);
        assert_eq!(
            spec.pixel_width() * Ratio::from_integer(spec.pixel_count() as i64),
            spec.period()
        );

        assert!(chain_geometry(5, 4).is_err());
        assert!(chain_geometry(0, 4).is_err());
    }

    #[test]
    fn chain_beats_equal_partition() {
        let chain = PixelLayout::of(&chain_geometry(3, 6).unwrap()).unwrap();
        let equal = PixelLayout::of(&two_pair(3, 3)).unwrap();
        assert_eq!((chain.count, equal.count), (32, 16));
    }

    #[test]
    fn pixel_centers() {
        let layout = PixelLayout::of(&two_pair(3, 3)).unwrap();
        assert_eq!(
            pixel_center(&layout, PixelAddress::new(1)).unwrap(),
            1.0 / 16.0
        );
        assert_eq!(pixel_center(&layout, PixelAddress::new(6)).unwrap(), 0.6875);
        assert_eq!(
            pixel_center(&layout, PixelAddress::intermediate(6)).unwrap(),
            0.6875 + 1.0 / 16.0
        );
        assert!(pixel_center(&layout, PixelAddress::new(0)).is_err());
        assert!(pixel_center(&layout, PixelAddress::new(17)).is_err());
    }

    #[test]
    fn grazing_phase_matches_single_pair_shift() {
        // φ₁ = 2π(ℓ - 1/2)/(N + 1) for N = 3.
        let g = two_pair(3, 3);
        let layout = PixelLayout::of(&g).unwrap();
        for l in 1..=4usize {
            let phases = phases_for_pixel(&g, &layout, PixelAddress::new(l)).unwrap();
            let expected = TAU * (l as f64 - 0.5) / 4.0;
            assert!((phases[0] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn ell_labels() {
        assert_eq!(ell_indices(6, 3, 3).unwrap(), (2, 1));
        assert_eq!(ell_indices(4, 3, 3).unwrap(), (4, 4));
        assert_eq!(pixel_from_ell(4, 4, 3, 3), 4);
        for p in 1..=16 {
            let (a, b) = ell_indices(p, 3, 3).unwrap();
            assert_eq!(pixel_from_ell(a, b, 3, 3), p);
        }
        assert!(ell_indices(17, 3, 3).is_err());
    }

    #[test]
    fn ell_phases_agree_with_center_rule() {
        // Pair-2 shift 2π[ℓ₂ + (ℓ₁ - 1/2)/(N₁+1)]/(N₂+1) written with ℓ labels.
        let g = two_pair(3, 3);
        let layout = PixelLayout::of(&g).unwrap();
        for p in 1..=16 {
            let (l1, l2) = ell_indices(p, 3, 3).unwrap();
            let phases = phases_for_pixel(&g, &layout, PixelAddress::new(p)).unwrap();
            let expected = (TAU * (l2 as f64 + (l1 as f64 - 0.5) / 4.0) / 4.0).rem_euclid(TAU);
            let d = (phases[1] - expected).rem_euclid(TAU);
            assert!(d < 1e-12 || TAU - d < 1e-12, "pixel {p}");
        }
    }

    #[test]
    fn pattern_plans() {
        let g = two_pair(3, 3);
        assert_eq!(plan_pattern(&g, &[]), Err(Error::EmptyPattern));
        let plan = plan_pattern(&g, &[6.into()]).unwrap();
        assert_eq!(plan.entries().len(), 1);
        assert!(plan_pattern(&g, &[17.into()]).is_err());

        let weighted = plan_pattern(
            &g,
            &[
                Target {
                    address: PixelAddress::new(2),
                    weight: Some(3.0),
                },
                Target {
                    address: PixelAddress::new(5),
                    weight: Some(1.0),
                },
                Target {
                    address: PixelAddress::new(9),
                    weight: Some(0.0),
                },
            ],
        )
        .unwrap();
        assert_eq!(weighted.entries().len(), 2);
        assert!((weighted.entries()[0].weight - 0.75).abs() < 1e-15);
    }

    #[test]
    fn negatives() {
        let g = two_pair(3, 3);
        let plan = plan_pattern(&g, &[6.into()]).unwrap();
        let neg = negative_plan(&plan).unwrap();
        assert_eq!(neg.entries().len(), 15);
        let back = negative_plan(&neg).unwrap();
        assert_eq!(back.targets(), plan.targets());

        let all: Vec<Target> = (1..=16).map(Target::from).collect();
        assert!(negative_plan(&plan_pattern(&g, &all).unwrap()).is_err());
    }

    #[test]
    fn table_rows_follow_formulas() {
        for n in 1..=4u32 {
            let rows = partition_table(n).unwrap();
            assert_eq!(rows.len(), 2 * n as usize + 1);
            assert_eq!(rows[0].pixels, 2 * n as u64 + 1);
            assert_eq!(rows[0].feature_size, Ratio::new(1, 4 * n as i64 + 2));
            assert_eq!(rows[0].period, Ratio::new(1, 2));
            let row1 = rows.iter().find(|r| r.n1 == 1).unwrap();
            assert_eq!(row1.pixels, 4 * n as u64);
            assert_eq!(row1.feature_size, Ratio::new(1, 4));
            assert_eq!(row1.period, Ratio::from_integer(n as i64));
            for r in &rows {
                let mirror = rows.iter().find(|m| m.n1 == r.n2).unwrap();
                assert_eq!(r.pixels, mirror.pixels);
                assert_eq!(
                    r.feature_size * Ratio::from_integer(r.pixels as i64),
                    r.period
                );
            }
        }
    }

    #[test]
    fn plan_toml_round_trip() {
        let g = two_pair(3, 3);
        let plan = plan_pattern(&g, &[6.into(), 11.into()]).unwrap();
        let text = plan.to_toml();
        assert!(text.contains("ell = [2, 1]"));
        let back = ExposurePlan::from_toml(&text).unwrap();
        assert_eq!(back.targets(), plan.targets());
        for (a, b) in back.entries().iter().zip(plan.entries()) {
            for (x, y) in a.phases.iter().zip(&b.phases) {
                assert!((x - y).abs() < 1e-14);
            }
        }
        assert!(matches!(
            ExposurePlan::from_toml("pair = 3\n[[entry]"),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn wraparound_labels() {
        assert_eq!(PixelAddress::wrapped(0, 16).index, 16);
        assert_eq!(PixelAddress::wrapped(20, 16).index, 4);
        assert_eq!(PixelAddress::wrapped(-1, 16).index, 15);
    }

    #[test]
    fn intermediate_fill_on_diagonal() {
        let filled =
            with_intermediate_fill(&[Pixel2d::new(2, 2), Pixel2d::new(3, 3), Pixel2d::new(4, 2)]);
        let inter: Vec<_> = filled
            .iter()
            .filter(|t| t.x.intermediate)
            .map(|t| (t.x.index, t.y.index))
            .collect();
        assert_eq!(inter, vec![(2, 2), (3, 2)]);
    }

    #[test]
    fn bitmap_reading() {
        let t = bitmap_targets(&[vec![false, true], vec![true, false]]);
        assert_eq!(t, vec![Pixel2d::new(2, 1), Pixel2d::new(1, 2)]);
    }
}
