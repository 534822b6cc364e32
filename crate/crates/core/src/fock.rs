// SPDX-License-Identifier: Apache-2.0

//! Sparse multi-mode Fock-space states.
//!
//! A [`Geometry`] is an ordered list of counter-propagating [`ModePair`]s along
//! one film axis. Every pair contributes two modes, stored in an
//! [`Occupation`] as `[n(+1), n(-1), n(+2), n(-2), ...]`. States keep only
//! their non-zero amplitudes, keyed by occupation vector, so chain states with
//! many single-photon pairs stay small.
//!
//! Phase convention: at film position `x` (in wavelengths) pair `j` picks up
//! `exp(i 2π s_j x (n_+ - n_-))`. Global phases are dropped throughout.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance on `‖ψ‖² - 1` for states tagged as normalized.
pub const NORM_TOLERANCE: f64 = 1e-12;

/// One counter-propagating beam pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModePair {
    /// 1-based pair label `j`.
    pub index: u32,
    /// Total photon number `N_j` shared by modes `+j` and `-j`.
    pub photons: u32,
    /// In-plane wavevector scaling `s_j = sin θ_j`, in `(0, 1]`.
    pub scaling: f64,
}

impl ModePair {
    pub fn new(index: u32, photons: u32, scaling: f64) -> Result<Self> {
        if index == 0 {
            return Err(Error::InvalidPair("pair index must be positive".into()));
        }
        if !(scaling > 0.0 && scaling <= 1.0) {
            return Err(Error::InvalidPair(format!(
                "scaling must lie in (0, 1], got {scaling}"
            )));
        }
        Ok(ModePair {
            index,
            photons,
            scaling,
        })
    }

    /// Pair whose beams hit the film at `± arcsin(1/k)`.
    pub fn with_inverse_scaling(index: u32, photons: u32, k: u32) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidPair("scaling 1/0".into()));
        }
        Self::new(index, photons, 1.0 / k as f64)
    }
}

/// The mode pairs of one film axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pairs: Vec<ModePair>,
}

impl Geometry {
    pub fn new(pairs: Vec<ModePair>) -> Result<Self> {
        let mut seen: Vec<u32> = pairs.iter().map(|p| p.index).collect();
        seen.sort_unstable();
        let dups: Vec<u32> = seen
            .windows(2)
            .filter(|w| w[0] == w[1])
            .map(|w| w[0])
            .collect();
        if !dups.is_empty() {
            return Err(Error::OverlappingPairs(dups));
        }
        for p in &pairs {
            ModePair::new(p.index, p.photons, p.scaling)?;
        }
        Ok(Geometry { pairs })
    }

    /// Pairs labelled `1..` in order from `(photons, scaling)` tuples.
    pub fn from_spec(spec: &[(u32, f64)]) -> Result<Self> {
        let pairs = spec
            .iter()
            .enumerate()
            .map(|(i, &(n, s))| ModePair::new(i as u32 + 1, n, s))
            .collect::<Result<Vec<_>>>()?;
        Self::new(pairs)
    }

    pub fn pairs(&self) -> &[ModePair] {
        &self.pairs
    }

    /// `M`, the sum of the per-pair photon numbers.
    pub fn total_photons(&self) -> u32 {
        self.pairs.iter().map(|p| p.photons).sum()
    }

    /// `W = 2 × pairs`.
    pub fn mode_count(&self) -> usize {
        2 * self.pairs.len()
    }

    /// Position of pair `index` within this geometry.
    pub fn position(&self, index: u32) -> Option<usize> {
        self.pairs.iter().position(|p| p.index == index)
    }

    pub fn concat(&self, other: &Geometry) -> Result<Geometry> {
        let overlap: Vec<u32> = self
            .pairs
            .iter()
            .filter(|p| other.position(p.index).is_some())
            .map(|p| p.index)
            .collect();
        if !overlap.is_empty() {
            return Err(Error::OverlappingPairs(overlap));
        }
        let mut pairs = self.pairs.clone();
        pairs.extend_from_slice(&other.pairs);
        Ok(Geometry { pairs })
    }
}

/// Per-mode photon counts, laid out `[n(+1), n(-1), n(+2), n(-2), ...]`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Occupation(Vec<u32>);

impl Occupation {
    pub fn new(counts: Vec<u32>) -> Self {
        Occupation(counts)
    }

    pub fn vacuum(modes: usize) -> Self {
        Occupation(vec![0; modes])
    }

    pub fn counts(&self) -> &[u32] {
        &self.0
    }

    pub fn total(&self) -> u32 {
        self.0.iter().sum()
    }

    /// `(n_+j, n_-j)` for the pair at `position`.
    pub fn pair(&self, position: usize) -> (u32, u32) {
        (self.0[2 * position], self.0[2 * position + 1])
    }

    pub fn pair_totals(&self) -> Vec<u32> {
        self.0.chunks(2).map(|c| c[0] + c[1]).collect()
    }

    fn concat(&self, other: &Occupation) -> Occupation {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Occupation(v)
    }
}

impl fmt::Display for Occupation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, n) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{n}")?;
        }
        Ok(())
    }
}

/// A (possibly unnormalized) pure state over the modes of a [`Geometry`].
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    geometry: Geometry,
    amplitudes: BTreeMap<Occupation, Complex64>,
    normalized: bool,
}

impl PureState {
    /// Normalized state; rejects inputs whose squared norm is off by more
    /// than [`NORM_TOLERANCE`].
    pub fn new(geometry: Geometry, amplitudes: BTreeMap<Occupation, Complex64>) -> Result<Self> {
        let state = Self::unnormalized(geometry, amplitudes)?;
        let n = state.norm_sq();
        if (n - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::NotNormalized { norm_sq: n });
        }
        Ok(PureState {
            normalized: true,
            ..state
        })
    }

    /// Arbitrary vector, tagged as unnormalized.
    pub fn unnormalized(
        geometry: Geometry,
        amplitudes: BTreeMap<Occupation, Complex64>,
    ) -> Result<Self> {
        let modes = geometry.mode_count();
        if let Some(bad) = amplitudes.keys().find(|o| o.0.len() != modes) {
            return Err(Error::GeometryMismatch(format!(
                "occupation [{bad}] has {} modes, geometry has {modes}",
                bad.0.len()
            )));
        }
        Ok(PureState {
            geometry,
            amplitudes,
            normalized: false,
        })
    }

    /// The vacuum of every mode in `geometry`.
    pub fn vacuum(geometry: Geometry) -> Self {
        let mut amplitudes = BTreeMap::new();
        amplitudes.insert(
            Occupation::vacuum(geometry.mode_count()),
            Complex64::new(1.0, 0.0),
        );
        PureState {
            geometry,
            amplitudes,
            normalized: true,
        }
    }

    /// Two-mode reciprocal binomial state with amplitudes `∝ √(n!(N-n)!)` on
    /// `|n⟩_+ ⊗ |N-n⟩_-`.
    pub fn reciprocal_binomial(pair: ModePair) -> Self {
        let n_total = pair.photons;
        // n!(N-n)! / N! = 1 / C(N, n), which avoids factorial overflow.
        let inv_binom: Vec<f64> = (0..=n_total).map(|n| 1.0 / binomial(n_total, n)).collect();
        let norm: f64 = inv_binom.iter().sum();
        let amplitudes = inv_binom
            .iter()
            .enumerate()
            .map(|(n, w)| {
                let n = n as u32;
                (
                    Occupation(vec![n, n_total - n]),
                    Complex64::new((w / norm).sqrt(), 0.0),
                )
            })
            .collect();
        PureState {
            geometry: Geometry { pairs: vec![pair] },
            amplitudes,
            normalized: true,
        }
    }

    /// Tensor product of reciprocal binomial states, one per pair.
    pub fn product(geometry: &Geometry) -> Self {
        let mut pairs = geometry.pairs.iter();
        let first = match pairs.next() {
            Some(p) => Self::reciprocal_binomial(*p),
            None => return Self::vacuum(geometry.clone()),
        };
        pairs.fold(first, |acc, p| {
            acc.tensor(&Self::reciprocal_binomial(*p))
                .expect("geometry pair indices are unique")
        })
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn amplitude(&self, occupation: &Occupation) -> Complex64 {
        self.amplitudes.get(occupation).copied().unwrap_or_default()
    }

    pub fn amplitudes(&self) -> &BTreeMap<Occupation, Complex64> {
        &self.amplitudes
    }

    pub fn support_len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm_sq(&self) -> f64 {
        self.amplitudes.values().map(|a| a.norm_sqr()).sum()
    }

    fn map_phases<F>(&self, phase: F) -> PureState
    where
        F: Fn(&Occupation) -> f64,
    {
        let amplitudes = self
            .amplitudes
            .iter()
            .map(|(o, a)| (o.clone(), a * Complex64::cis(phase(o))))
            .collect();
        PureState {
            geometry: self.geometry.clone(),
            amplitudes,
            normalized: self.normalized,
        }
    }

    /// Free propagation to film position `x` (wavelength units).
    pub fn propagate(&self, x: f64) -> PureState {
        let freqs: Vec<f64> = self
            .geometry
            .pairs
            .iter()
            .map(|p| 2.0 * PI * p.scaling * x)
            .collect();
        self.map_phases(|o| {
            freqs
                .iter()
                .enumerate()
                .map(|(j, w)| {
                    let (plus, minus) = o.pair(j);
                    w * (plus as f64 - minus as f64)
                })
                .sum()
        })
    }

    /// Relative phase `exp(i φ n_+j)` on pair `index`.
    pub fn apply_pair_phase(&self, index: u32, phase: f64) -> Result<PureState> {
        let pos = self
            .geometry
            .position(index)
            .ok_or(Error::UnknownPair(index))?;
        Ok(self.map_phases(|o| phase * o.pair(pos).0 as f64))
    }

    pub fn tensor(&self, other: &PureState) -> Result<PureState> {
        let geometry = self.geometry.concat(&other.geometry)?;
        let mut amplitudes = BTreeMap::new();
        for (oa, a) in &self.amplitudes {
            for (ob, b) in &other.amplitudes {
                amplitudes.insert(oa.concat(ob), a * b);
            }
        }
        Ok(PureState {
            geometry,
            amplitudes,
            normalized: self.normalized && other.normalized,
        })
    }

    /// One application of `ê = W^{-1/2} Σ_m â_m`.
    fn lower(&self) -> PureState {
        let scale = 1.0 / (self.geometry.mode_count() as f64).sqrt();
        let mut out: BTreeMap<Occupation, Complex64> = BTreeMap::new();
        for (occ, amp) in &self.amplitudes {
            for (m, &n) in occ.0.iter().enumerate() {
                if n == 0 {
                    continue;
                }
                let mut next = occ.clone();
                next.0[m] -= 1;
                *out.entry(next).or_default() += amp * ((n as f64).sqrt() * scale);
            }
        }
        PureState {
            geometry: self.geometry.clone(),
            amplitudes: out,
            normalized: false,
        }
    }

    /// `ê^K |ψ⟩`; the result is unnormalized and its squared norm is the
    /// `K`-photon absorption probability up to a constant.
    pub fn apply_absorption(&self, order: u32) -> Result<PureState> {
        if order == 0 {
            return Err(Error::ZeroOrder);
        }
        let mut state = self.lower();
        for _ in 1..order {
            if state.amplitudes.is_empty() {
                break;
            }
            state = state.lower();
        }
        Ok(state)
    }

    /// `α·self + β·other` over the same geometry, unnormalized.
    pub fn superpose(
        &self,
        alpha: Complex64,
        other: &PureState,
        beta: Complex64,
    ) -> Result<PureState> {
        if self.geometry != other.geometry {
            return Err(Error::GeometryMismatch(
                "superposing different geometries".into(),
            ));
        }
        let mut amplitudes: BTreeMap<Occupation, Complex64> = self
            .amplitudes
            .iter()
            .map(|(o, a)| (o.clone(), a * alpha))
            .collect();
        for (o, b) in &other.amplitudes {
            *amplitudes.entry(o.clone()).or_default() += b * beta;
        }
        Ok(PureState {
            geometry: self.geometry.clone(),
            amplitudes,
            normalized: false,
        })
    }

    /// Rescaled to unit norm. Fails on the zero vector.
    pub fn normalize(&self) -> Result<PureState> {
        let n = self.norm_sq();
        if n <= 0.0 {
            return Err(Error::Normalization("zero vector".into()));
        }
        let inv = 1.0 / n.sqrt();
        Ok(PureState {
            geometry: self.geometry.clone(),
            amplitudes: self
                .amplitudes
                .iter()
                .map(|(o, a)| (o.clone(), a * inv))
                .collect(),
            normalized: true,
        })
    }

    /// Canonical text form: one `occupation | re im` row per basis vector,
    /// sorted by occupation, preceded by `# pair index photons scaling` lines.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for p in &self.geometry.pairs {
            out.push_str(&format!(
                "# pair {} {} {:.16e}\n",
                p.index, p.photons, p.scaling
            ));
        }
        for (o, a) in &self.amplitudes {
            out.push_str(&format!("{o} | {:.16e} {:.16e}\n", a.re, a.im));
        }
        out
    }

    /// Inverse of [`PureState::to_text`]; the result is tagged normalized when
    /// its norm is within tolerance.
    pub fn from_text(text: &str) -> Result<PureState> {
        let mut pairs = Vec::new();
        let mut amplitudes = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let err = |message: &str| Error::Parse {
                line: line_no,
                message: message.to_string(),
            };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("# pair") {
                let f: Vec<&str> = rest.split_whitespace().collect();
                if f.len() != 3 {
                    return Err(err("expected `# pair index photons scaling`"));
                }
                let index = f[0].parse().map_err(|_| err("bad pair index"))?;
                let photons = f[1].parse().map_err(|_| err("bad photon number"))?;
                let scaling = f[2].parse().map_err(|_| err("bad scaling"))?;
                pairs.push(ModePair::new(index, photons, scaling)?);
                continue;
            }
            if line.starts_with('#') {
                continue;
            }
            let (occ, amp) = line.split_once('|').ok_or_else(|| err("missing `|`"))?;
            let counts = occ
                .split_whitespace()
                .map(|t| t.parse::<u32>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| err("bad occupation"))?;
            let parts: Vec<f64> = amp
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| err("bad amplitude"))?;
            if parts.len() != 2 {
                return Err(err("expected real and imaginary parts"));
            }
            amplitudes.insert(Occupation(counts), Complex64::new(parts[0], parts[1]));
        }
        let state = PureState::unnormalized(Geometry::new(pairs)?, amplitudes)?;
        if (state.norm_sq() - 1.0).abs() <= NORM_TOLERANCE {
            Ok(PureState {
                normalized: true,
                ..state
            })
        } else {
            Ok(state)
        }
    }

    /// Global phase fixed so the first non-zero amplitude is real positive.
    pub(crate) fn canonical_phase(&self) -> PureState {
        let lead = self
            .amplitudes
            .values()
            .find(|a| a.norm_sqr() > 0.0)
            .copied();
        match lead {
            Some(a) => {
                let rot = a.conj() / a.norm();
                PureState {
                    geometry: self.geometry.clone(),
                    amplitudes: self
                        .amplitudes
                        .iter()
                        .map(|(o, v)| (o.clone(), v * rot))
                        .collect(),
                    normalized: self.normalized,
                }
            }
            None => self.clone(),
        }
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Statistical mixture of normalized pure states.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedState {
    components: Vec<(f64, PureState)>,
}

impl MixedState {
    pub fn new(components: Vec<(f64, PureState)>) -> Result<Self> {
        let sum: f64 = components.iter().map(|(w, _)| w).sum();
        if components.is_empty()
            || components.iter().any(|(w, _)| !(*w >= 0.0))
            || (sum - 1.0).abs() > NORM_TOLERANCE
        {
            return Err(Error::BadWeights { sum });
        }
        for (_, s) in &components {
            let n = s.norm_sq();
            if (n - 1.0).abs() > NORM_TOLERANCE {
                return Err(Error::NotNormalized { norm_sq: n });
            }
        }
        Ok(MixedState { components })
    }

    pub fn pure(state: PureState) -> Self {
        MixedState {
            components: vec![(1.0, state)],
        }
    }

    pub fn components(&self) -> &[(f64, PureState)] {
        &self.components
    }

    pub fn total_weight(&self) -> f64 {
        self.components.iter().map(|(w, _)| w).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn pair(n: u32) -> ModePair {
        ModePair::new(1, n, 1.0).unwrap()
    }

    fn occ(v: &[u32]) -> Occupation {
        Occupation::new(v.to_vec())
    }

    #[test]
    fn reciprocal_binomial_small_cases() {
        let s0 = PureState::reciprocal_binomial(pair(0));
        assert_eq!(s0.support_len(), 1);
        assert_eq!(s0.amplitude(&occ(&[0, 0])), c(1.0, 0.0));

        let s1 = PureState::reciprocal_binomial(pair(1));
        let h = 0.5f64.sqrt();
        assert!((s1.amplitude(&occ(&[1, 0])).re - h).abs() < 1e-15);
        assert!((s1.amplitude(&occ(&[0, 1])).re - h).abs() < 1e-15);

        // n!(2-n)! = 2, 1, 2 and the normalizer is 5.
        let s2 = PureState::reciprocal_binomial(pair(2));
        let r5 = 5f64.sqrt();
        assert!((s2.amplitude(&occ(&[0, 2])).re - 2f64.sqrt() / r5).abs() < 1e-15);
        assert!((s2.amplitude(&occ(&[1, 1])).re - 1.0 / r5).abs() < 1e-15);
        assert!((s2.amplitude(&occ(&[2, 0])).re - 2f64.sqrt() / r5).abs() < 1e-15);
        assert!(s2.is_normalized());
    }

    #[test]
    fn propagate_quarter_wave() {
        let s = PureState::reciprocal_binomial(pair(1)).propagate(0.25);
        let h = 0.5f64.sqrt();
        let a = s.amplitude(&occ(&[1, 0]));
        let b = s.amplitude(&occ(&[0, 1]));
        assert!((a - c(0.0, h)).norm() < 1e-15);
        assert!((b - c(0.0, -h)).norm() < 1e-15);
        assert_eq!(
            PureState::reciprocal_binomial(pair(3)).propagate(0.0),
            PureState::reciprocal_binomial(pair(3))
        );
    }

    #[test]
    fn propagation_is_periodic_in_inverse_scaling() {
        let p = ModePair::new(1, 3, 0.25).unwrap();
        let s = PureState::reciprocal_binomial(p);
        let x = 0.3137;
        let a = s.propagate(x).canonical_phase();
        let b = s.propagate(x + 1.0 / p.scaling).canonical_phase();
        for (o, v) in a.amplitudes() {
            assert!((v - b.amplitude(o)).norm() < 1e-12);
        }
    }

    #[test]
    fn pair_phase_pi_flips_odd_terms() {
        let s = PureState::reciprocal_binomial(pair(3));
        let t = s.apply_pair_phase(1, PI).unwrap();
        for n in 0..=3u32 {
            let o = occ(&[n, 3 - n]);
            let expected = s.amplitude(&o) * if n % 2 == 0 { 1.0 } else { -1.0 };
            assert!((t.amplitude(&o) - expected).norm() < 1e-15);
        }
        assert_eq!(s.apply_pair_phase(1, 0.0).unwrap(), s);
        assert_eq!(s.apply_pair_phase(7, 1.0), Err(Error::UnknownPair(7)));
    }

    #[test]
    fn full_turn_is_global_phase() {
        let s = PureState::reciprocal_binomial(pair(4));
        let t = s.apply_pair_phase(1, 2.0 * PI).unwrap();
        for (o, a) in s.amplitudes() {
            assert!((t.amplitude(o) - a).norm() < 1e-14);
        }
    }

    #[test]
    fn tensor_products() {
        let a = PureState::reciprocal_binomial(pair(1));
        let b = PureState::reciprocal_binomial(ModePair::new(2, 1, 0.5).unwrap());
        let t = a.tensor(&b).unwrap();
        assert_eq!(t.support_len(), 4);
        for v in t.amplitudes().values() {
            assert!((v.re - 0.5).abs() < 1e-15);
        }
        assert_eq!(t.geometry().mode_count(), 4);

        let vac = PureState::reciprocal_binomial(ModePair::new(2, 0, 1.0).unwrap());
        let tv = a.tensor(&vac).unwrap();
        assert_eq!(
            tv.amplitude(&occ(&[1, 0, 0, 0])),
            a.amplitude(&occ(&[1, 0]))
        );
        assert_eq!(tv.geometry().pairs().len(), 2);

        assert!(matches!(a.tensor(&a), Err(Error::OverlappingPairs(_))));
    }

    #[test]
    fn absorption_single_photon() {
        let g = Geometry::new(vec![pair(1)]).unwrap();
        let mut amps = BTreeMap::new();
        amps.insert(occ(&[1, 0]), c(1.0, 0.0));
        let s = PureState::new(g, amps).unwrap();
        let out = s.apply_absorption(1).unwrap();
        assert!(!out.is_normalized());
        assert_eq!(out.support_len(), 1);
        assert!((out.amplitude(&occ(&[0, 0])).re - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(s.apply_absorption(2).unwrap().norm_sq(), 0.0);
        assert_eq!(s.apply_absorption(0), Err(Error::ZeroOrder));
    }

    #[test]
    fn absorption_two_photon_hand_sum() {
        // ê² on (√2, 1, √2)/√5: vacuum coefficients √2, 2, √2 from (a+ + a-)²,
        // times 1/2 from W = 2, gives 3/√5 and norm² 9/5.
        let s = PureState::reciprocal_binomial(pair(2)).propagate(0.0);
        let r5 = 5f64.sqrt();
        let expected = 0.5
            * ((2f64.sqrt() / r5) * 2f64.sqrt()
                + (1.0 / r5) * 2.0
                + (2f64.sqrt() / r5) * 2f64.sqrt());
        let out = s.apply_absorption(2).unwrap();
        assert!((out.norm_sq() - expected * expected).abs() < 1e-14);
        assert!((out.norm_sq() - 1.8).abs() < 1e-14);
    }

    #[test]
    fn norm_sq_trivia() {
        assert!((PureState::reciprocal_binomial(pair(5)).norm_sq() - 1.0).abs() < 1e-15);
        let g = Geometry::new(vec![pair(1)]).unwrap();
        assert_eq!(
            PureState::unnormalized(g, BTreeMap::new())
                .unwrap()
                .norm_sq(),
            0.0
        );
    }

    #[test]
    fn construction_rejects_bad_norm() {
        let g = Geometry::new(vec![pair(1)]).unwrap();
        let mut amps = BTreeMap::new();
        amps.insert(occ(&[1, 0]), c(0.9, 0.0));
        assert!(matches!(
            PureState::new(g.clone(), amps.clone()),
            Err(Error::NotNormalized { .. })
        ));
        amps.insert(occ(&[1, 0, 0]), c(0.1, 0.0));
        assert!(matches!(
            PureState::unnormalized(g, amps),
            Err(Error::GeometryMismatch(_))
        ));
    }

    #[test]
    fn invalid_pairs_rejected() {
        assert!(ModePair::new(1, 2, 0.0).is_err());
        assert!(ModePair::new(1, 2, 1.5).is_err());
        assert!(ModePair::new(0, 2, 1.0).is_err());
        let p = pair(1);
        assert!(matches!(
            Geometry::new(vec![p, p]),
            Err(Error::OverlappingPairs(_))
        ));
    }

    #[test]
    fn text_round_trip() {
        let g = Geometry::from_spec(&[(2, 1.0), (1, 0.5)]).unwrap();
        let s = PureState::product(&g)
            .propagate(0.123)
            .apply_pair_phase(2, 0.7)
            .unwrap();
        let text = s.to_text();
        let back = PureState::from_text(&text).unwrap();
        assert_eq!(back, s);
        assert!(back.is_normalized());
        assert!(matches!(
            PureState::from_text("1 0 | 1.0"),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn mixture_validation() {
        let s = PureState::reciprocal_binomial(pair(1));
        assert!(MixedState::new(vec![(0.5, s.clone()), (0.5, s.clone())]).is_ok());
        assert!(MixedState::new(vec![(0.7, s.clone()), (0.5, s.clone())]).is_err());
        assert!(MixedState::new(vec![(-0.5, s.clone()), (1.5, s)]).is_err());
    }
}
