// SPDX-License-Identifier: Apache-2.0

//! Stochastic film exposure.
//!
//! Each pixel holds `G` grains on a uniform lattice. On every shot an
//! unexposed grain at `x` flips with probability `q·Δ(x)`, `Δ` being the
//! ensemble deposition rate; exposed grains stay exposed. The shot at which a
//! grain first flips is geometric, so after `S` shots it is exposed with
//! probability `1 - (1 - qΔ)^S`. One uniform draw per grain decides this by
//! inversion, which keeps results monotone in both `S` and `q` for a fixed
//! seed.
//!
//! Random streams are ChaCha8, one stream per `(trial, pixel)` derived from
//! the master seed, so results do not depend on scheduling.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::deposition::RateSource;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::planner::{ExposurePlan, PixelLayout};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilmModel {
    /// Grains per pixel, `G`.
    pub grains_per_pixel: u32,
    /// Flip probability of a grain for one shot at unit deposition rate, `q`.
    pub absorb_prob: f64,
}

impl FilmModel {
    pub fn new(grains_per_pixel: u32, absorb_prob: f64) -> Result<Self> {
        // The lattice spacing width/G must be below the pixel width.
        if grains_per_pixel < 2 {
            return Err(Error::Film(format!(
                "grains must be smaller than a pixel (G = {grains_per_pixel})"
            )));
        }
        if !(absorb_prob > 0.0 && absorb_prob <= 1.0) {
            return Err(Error::Film(format!(
                "absorption probability {absorb_prob} outside (0, 1]"
            )));
        }
        Ok(FilmModel {
            grains_per_pixel,
            absorb_prob,
        })
    }

    /// Grain positions of pixel `p` (1-based).
    pub fn grain_positions(&self, layout: &PixelLayout, pixel: usize) -> Vec<f64> {
        let w = layout.width_f64();
        let start = (pixel - 1) as f64 * w;
        let g = self.grains_per_pixel as f64;
        (0..self.grains_per_pixel)
            .map(|i| start + (i as f64 + 0.5) / g * w)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExposureResult {
    /// Exposed-grain counts, `counts[trial][pixel - 1]`.
    pub counts: Vec<Vec<u32>>,
    /// Mean count per pixel across trials.
    pub per_pixel_mean: Vec<f64>,
    /// Sample standard deviation per pixel across trials (0 for one trial).
    pub per_pixel_std: Vec<f64>,
    pub shots_used: u64,
    pub seed: u64,
}

impl ExposureResult {
    pub fn trials(&self) -> usize {
        self.counts.len()
    }

    /// Variance-to-mean ratio of pixel `p` (1-based).
    pub fn fano(&self, pixel: usize) -> f64 {
        let s = self.per_pixel_std[pixel - 1];
        s * s / self.per_pixel_mean[pixel - 1]
    }

    /// Record-style text: a header, then `pixel mean std counts...` rows.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# shots {}", self.shots_used);
        let _ = writeln!(out, "# seed {}", self.seed);
        let _ = writeln!(out, "# trials {}", self.trials());
        out.push_str("pixel,mean,std,counts\n");
        for p in 0..self.per_pixel_mean.len() {
            let counts: Vec<String> = self.counts.iter().map(|t| t[p].to_string()).collect();
            let _ = writeln!(
                out,
                "{},{:.16e},{:.16e},{}",
                p + 1,
                self.per_pixel_mean[p],
                self.per_pixel_std[p],
                counts.join(" ")
            );
        }
        out
    }
}

/// Per-shot flip probability `q·Δ` at every grain, pixel by pixel.
fn grain_probabilities(
    rate: &dyn RateSource,
    layout: &PixelLayout,
    film: &FilmModel,
) -> Result<Vec<Vec<f64>>> {
    let mut all = Vec::with_capacity(layout.count);
    for p in 1..=layout.count {
        let probs: Vec<f64> = film
            .grain_positions(layout, p)
            .into_iter()
            .map(|x| film.absorb_prob * rate.rate(x))
            .collect();
        if let Some(&bad) = probs.iter().find(|v| **v > 1.0 + 1e-12) {
            return Err(Error::ProbabilityOverflow(bad));
        }
        all.push(probs.into_iter().map(|v| v.clamp(0.0, 1.0)).collect());
    }
    Ok(all)
}

/// `1 - (1 - p)^shots`.
fn exposed_probability(p: f64, shots: u64) -> f64 {
    if p >= 1.0 {
        return if shots > 0 { 1.0 } else { 0.0 };
    }
    -(shots as f64 * (-p).ln_1p()).exp_m1()
}

fn stream_rng(seed: u64, trial: usize, pixel: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((trial as u64) << 32) | pixel as u64);
    rng
}

fn grain_flags(probs: &[f64], shots: u64, seed: u64, trial: usize, pixel: usize) -> Vec<bool> {
    let mut rng = stream_rng(seed, trial, pixel);
    probs
        .iter()
        .map(|p| {
            let u: f64 = rng.random();
            u < exposed_probability(*p, shots)
        })
        .collect()
}

/// `trials` independent exposures of one period of the pattern.
pub fn simulate_trials(
    rate: &dyn RateSource,
    layout: &PixelLayout,
    film: &FilmModel,
    shots: u64,
    seed: u64,
    trials: usize,
    exec: Exec,
) -> Result<ExposureResult> {
    if trials == 0 {
        return Err(Error::Film("at least one trial is required".into()));
    }
    let probs = grain_probabilities(rate, layout, film)?;
    let pixels = layout.count;
    let flat: Vec<u32> = exec.map_indexed(trials * pixels, |k| {
        let (trial, p) = (k / pixels, k % pixels);
        grain_flags(&probs[p], shots, seed, trial, p + 1)
            .into_iter()
            .filter(|f| *f)
            .count() as u32
    });
    let counts: Vec<Vec<u32>> = flat.chunks(pixels).map(|c| c.to_vec()).collect();
    let n = trials as f64;
    let per_pixel_mean: Vec<f64> = (0..pixels)
        .map(|p| counts.iter().map(|t| t[p] as f64).sum::<f64>() / n)
        .collect();
    let per_pixel_std = (0..pixels)
        .map(|p| {
            if trials < 2 {
                return 0.0;
            }
            let m = per_pixel_mean[p];
            let ss: f64 = counts.iter().map(|t| (t[p] as f64 - m).powi(2)).sum();
            (ss / (n - 1.0)).sqrt()
        })
        .collect();
    Ok(ExposureResult {
        counts,
        per_pixel_mean,
        per_pixel_std,
        shots_used: shots,
        seed,
    })
}

/// One exposure of `plan` using its closed-form full-order deposition rate.
pub fn simulate(
    plan: &ExposurePlan,
    film: &FilmModel,
    shots: u64,
    seed: u64,
) -> Result<ExposureResult> {
    let layout = plan.layout()?;
    let source = plan.closed_form(plan.geometry().total_photons())?;
    simulate_trials(&source, &layout, film, shots, seed, 1, Exec::default())
}

/// Per-grain exposure flags of trial 0, for rendering.
pub fn grain_bitmap(
    rate: &dyn RateSource,
    layout: &PixelLayout,
    film: &FilmModel,
    shots: u64,
    seed: u64,
) -> Result<Vec<Vec<bool>>> {
    let probs = grain_probabilities(rate, layout, film)?;
    Ok(probs
        .iter()
        .enumerate()
        .map(|(p, pr)| grain_flags(pr, shots, seed, 0, p + 1))
        .collect())
}

/// Expected exposed-grain count per pixel after `shots`.
pub fn expected_counts(
    rate: &dyn RateSource,
    layout: &PixelLayout,
    film: &FilmModel,
    shots: u64,
) -> Result<Vec<f64>> {
    Ok(grain_probabilities(rate, layout, film)?
        .iter()
        .map(|pr| pr.iter().map(|p| exposed_probability(*p, shots)).sum())
        .collect())
}

/// Smallest `S` with `G (1 - (1 - q·peak)^S) ≥ target_mean`.
pub fn required_shots(
    target_mean: f64,
    absorb_prob: f64,
    peak_rate: f64,
    grains: u32,
) -> Result<u64> {
    if target_mean <= 0.0 {
        return Ok(0);
    }
    let p = absorb_prob * peak_rate;
    let g = grains as f64;
    if !(p > 0.0) || target_mean > g || (target_mean == g && p < 1.0) {
        return Err(Error::Unreachable {
            target: target_mean,
            grains,
        });
    }
    if p > 1.0 + 1e-12 {
        return Err(Error::ProbabilityOverflow(p));
    }
    let meets = |s: u64| g * exposed_probability(p, s) >= target_mean;
    let guess = ((1.0 - target_mean / g).ln() / (-p).ln_1p())
        .ceil()
        .max(1.0) as u64;
    let mut s = guess.saturating_sub(2).max(1);
    while !meets(s) {
        s += 1;
    }
    while s > 1 && meets(s - 1) {
        s -= 1;
    }
    Ok(s)
}

/// Smallest shot count whose expected count in `pixel` reaches `target_mean`.
pub fn shots_for_pixel_mean(
    rate: &dyn RateSource,
    layout: &PixelLayout,
    film: &FilmModel,
    pixel: usize,
    target_mean: f64,
) -> Result<u64> {
    let probs = grain_probabilities(rate, layout, film)?;
    let pr = probs
        .get(pixel.wrapping_sub(1))
        .ok_or(Error::PixelOutOfRange {
            index: pixel as i64,
            count: layout.count,
        })?;
    let expected = |s: u64| pr.iter().map(|p| exposed_probability(*p, s)).sum::<f64>();
    let reachable = pr.iter().filter(|p| **p > 0.0).count() as f64;
    if target_mean > reachable {
        return Err(Error::Unreachable {
            target: target_mean,
            grains: film.grains_per_pixel,
        });
    }
    let mut hi = 1u64;
    while expected(hi) < target_mean {
        hi = hi.checked_mul(2).ok_or(Error::Unreachable {
            target: target_mean,
            grains: film.grains_per_pixel,
        })?;
    }
    let mut lo = 0u64;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if expected(mid) >= target_mean {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}
