// SPDX-License-Identifier: Apache-2.0

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use qlitho_core::deposition::{profile, BruteForce, DepositionProfile, Normalization, RateSource};
use qlitho_core::export::{profile_2d_csv, profile_csv};
use qlitho_core::exposure::{grain_bitmap, shots_for_pixel_mean, simulate_trials, FilmModel};
use qlitho_core::fock::MixedState;
use qlitho_core::imperfections::{degradation_report, lossy_mixture};
use qlitho_core::planner::{
    bitmap_targets, negative_plan, partition_table, pixel_center, plan_pattern, plan_pattern_2d,
    with_intermediate_fill, ExposurePlan, PixelAddress, Target,
};
use qlitho_core::Exec;

use crate::config::{Engine, RunConfig};
use crate::output::{commented, header, write_atomic, CliError};
use crate::verify::{run_suite, Suite};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "QLITHO_OUT_DIR";

#[derive(Debug, Parser)]
#[command(
    name = "qlitho",
    version,
    about = "Entangled-state sub-wavelength lithography simulator"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Run configuration (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory; overrides the config and the environment.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Random seed; overrides the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Deposition-rate profiles.
    Rate {
        #[arg(long, value_enum)]
        engine: Option<Engine>,
        /// raw, peak or pixelsum.
        #[arg(long)]
        normalize: Option<String>,
        /// Also write the two-axis product profile.
        #[arg(long)]
        two_d: bool,
    },
    /// Exposure plan for a pixel pattern.
    Plan {
        /// Pixel list: indices separated by spaces or commas; `7+` is the
        /// intermediate pixel after 7, `7:0.5` sets a weight.
        #[arg(long, value_name = "FILE", conflicts_with = "bitmap")]
        pattern: Option<PathBuf>,
        /// Two-axis 0/1 bitmap, one row per Y pixel.
        #[arg(long, value_name = "FILE")]
        bitmap: Option<PathBuf>,
        /// Fill diagonal steps of a bitmap with intermediate pixels.
        #[arg(long, requires = "bitmap")]
        fill: bool,
        /// Also emit the complementary plan.
        #[arg(long)]
        negative: bool,
    },
    /// Monte Carlo film exposure.
    Expose {
        /// Dump per-grain exposure flags of the first trial.
        #[arg(long)]
        grains: bool,
    },
    /// Invariant verification suites.
    Verify {
        #[arg(long, value_enum, default_value = "all")]
        suite: Suite,
        /// Half photon number for the partition-table suite (default 1..=5).
        #[arg(long)]
        n: Option<u32>,
    },
    /// Two-pair photon partition table for `2N` photons.
    Table {
        #[arg(long)]
        n: u32,
    },
}

fn load_config(common: &Common) -> Result<(RunConfig, String), CliError> {
    let path = common
        .config
        .as_ref()
        .ok_or_else(|| CliError::Validation("--config is required for this command".into()))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("reading {}: {e}", path.display())))?;
    let config = RunConfig::parse(&text)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    Ok((config, text))
}

fn out_dir(common: &Common, config: Option<&RunConfig>) -> PathBuf {
    common
        .out
        .clone()
        .or_else(|| config.and_then(|c| c.output.dir.clone()).map(PathBuf::from))
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

/// Runs one command and returns its standard output.
pub fn run(cli: Cli) -> Result<String, CliError> {
    match &cli.command {
        Command::Rate {
            engine,
            normalize,
            two_d,
        } => {
            let (mut config, _) = load_config(&cli.common)?;
            if let Some(e) = engine {
                config.output.engine = Some(*e);
            }
            if let Some(n) = normalize {
                n.parse::<Normalization>().map_err(CliError::Validation)?;
                config.output.normalize = Some(n.clone());
            }
            let dir = out_dir(&cli.common, Some(&config));
            config.output.dir = Some(dir.display().to_string());
            cmd_rate(&config, &dir, *two_d)
        }
        Command::Plan {
            pattern,
            bitmap,
            fill,
            negative,
        } => {
            let (mut config, _) = load_config(&cli.common)?;
            let dir = out_dir(&cli.common, Some(&config));
            config.output.dir = Some(dir.display().to_string());
            match bitmap {
                Some(b) => cmd_plan_bitmap(&config, &dir, b, *fill),
                None => cmd_plan(&config, &dir, pattern.as_deref(), *negative),
            }
        }
        Command::Expose { grains } => {
            let (mut config, _) = load_config(&cli.common)?;
            if let (Some(seed), Some(film)) = (cli.common.seed, config.film.as_mut()) {
                film.seed = seed;
            }
            let dir = out_dir(&cli.common, Some(&config));
            config.output.dir = Some(dir.display().to_string());
            cmd_expose(&config, &dir, *grains)
        }
        Command::Verify { suite, n } => {
            let checks = run_suite(*suite, *n).map_err(CliError::from)?;
            let mut out = String::new();
            for c in &checks {
                let _ = writeln!(out, "{c}");
            }
            let failed = checks.iter().filter(|c| !c.pass).count();
            let _ = writeln!(out, "summary checks={} failed={failed}", checks.len());
            if failed > 0 {
                print!("{out}");
                return Err(CliError::Verification(format!(
                    "{failed} of {} checks failed",
                    checks.len()
                )));
            }
            Ok(out)
        }
        Command::Table { n } => {
            let text = table_csv(*n)?;
            if let Some(dir) = &cli.common.out {
                write_atomic(dir, &format!("table_n{n}.csv"), &text)?;
            }
            Ok(text)
        }
    }
}

pub fn table_csv(n: u32) -> Result<String, CliError> {
    let mut out = String::from("n1,n2,pixels,feature_size_lambda,period_lambda\n");
    for row in partition_table(n)? {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            row.n1, row.n2, row.pixels, row.feature_size, row.period
        );
    }
    Ok(out)
}

fn order_of(config: &RunConfig, plan: &ExposurePlan) -> u32 {
    config
        .absorption
        .order
        .unwrap_or_else(|| plan.geometry().total_photons())
}

/// Closed form scaled by the strict-absorber loss factor `η^M`.
struct LossyClosedForm {
    inner: qlitho_core::deposition::ClosedForm,
    factor: f64,
}

impl RateSource for LossyClosedForm {
    fn rate(&self, x: f64) -> f64 {
        self.factor * self.inner.rate(x)
    }
    fn pixel_sum_scale(&self) -> Option<f64> {
        self.inner.pixel_sum_scale()
    }
}

fn closed_source(config: &RunConfig, plan: &ExposurePlan) -> Result<LossyClosedForm, CliError> {
    let m = plan.geometry().total_photons();
    let inner = plan.closed_form(order_of(config, plan))?;
    let eta = config.absorption.loss.unwrap_or(1.0);
    Ok(LossyClosedForm {
        inner,
        factor: eta.powi(m as i32),
    })
}

fn brute_source(config: &RunConfig, plan: &ExposurePlan) -> Result<BruteForce, CliError> {
    let order = order_of(config, plan);
    let ideal = plan.mixed_state()?;
    let ensemble = match config.loss()? {
        None => ideal,
        Some(loss) => {
            let mut parts = Vec::new();
            for (w, s) in ideal.components() {
                for (v, c) in lossy_mixture(s, &loss)?.components() {
                    parts.push((w * v, c.clone()));
                }
            }
            MixedState::new(parts)?
        }
    };
    Ok(BruteForce::new(ensemble, order)?.with_pixel_count(plan.entries().len()))
}

fn max_abs_difference(a: &DepositionProfile, b: &DepositionProfile) -> Result<f64, CliError> {
    let (a, b) = (a.peak_normalized()?, b.peak_normalized()?);
    Ok(a.values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max))
}

fn cmd_rate(config: &RunConfig, dir: &Path, two_d: bool) -> Result<String, CliError> {
    let plan = config.plan()?;
    let layout = plan.layout()?;
    let grid = config.grid(layout.period_f64())?;
    let norm = config.normalization();
    let engine = config.output.engine.unwrap_or_default();
    let head = header("rate", &config.to_toml());
    let mut out = String::new();

    let closed = match engine {
        Engine::Closed | Engine::Both => {
            Some(profile(&closed_source(config, &plan)?, &grid, norm)?)
        }
        Engine::Brute => None,
    };
    let brute = match engine {
        Engine::Brute | Engine::Both => Some(profile(&brute_source(config, &plan)?, &grid, norm)?),
        Engine::Closed => None,
    };
    for (name, p) in [("closed", &closed), ("brute", &brute)] {
        if let Some(p) = p {
            let mut h = head.clone();
            h.push(format!("engine {name}"));
            let path = write_atomic(dir, &format!("profile_{name}.csv"), &profile_csv(p, &h))?;
            let _ = writeln!(out, "wrote {}", path.display());
        }
    }
    if let (Some(c), Some(b)) = (&closed, &brute) {
        let _ = writeln!(out, "max_abs_difference={:.6e}", max_abs_difference(c, b)?);
    }
    if two_d {
        let targets = config.targets_2d()?;
        let p2 = plan_pattern_2d(plan.geometry(), plan.geometry(), &targets)?;
        let prof = p2.profile(&grid, &grid, norm)?;
        let path = write_atomic(dir, "profile_2d.csv", &profile_2d_csv(&prof, &head))?;
        let _ = writeln!(out, "wrote {}", path.display());
    }
    Ok(out)
}

/// Parses a pixel list: `6`, `7+` (intermediate after 7), `7:0.5` (weight).
pub fn parse_pattern(text: &str) -> Result<Vec<Target>, CliError> {
    let mut targets = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("");
        for tok in line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
        {
            let bad =
                || CliError::Validation(format!("pattern line {}: bad pixel {tok:?}", ln + 1));
            let (pix, weight) = match tok.split_once(':') {
                Some((p, w)) => (p, Some(w.parse::<f64>().map_err(|_| bad())?)),
                None => (tok, None),
            };
            let (pix, intermediate) = match pix.strip_suffix('+') {
                Some(p) => (p, true),
                None => (pix, false),
            };
            let index: usize = pix.parse().map_err(|_| bad())?;
            let address = if intermediate {
                PixelAddress::intermediate(index)
            } else {
                PixelAddress::new(index)
            };
            targets.push(Target { address, weight });
        }
    }
    if targets.is_empty() {
        return Err(CliError::Validation("pattern is empty".into()));
    }
    Ok(targets)
}

/// Parses a 0/1 bitmap; `1`, `#` and `X` are set, `0`, `.` and `_` are not.
pub fn parse_bitmap(text: &str) -> Result<Vec<Vec<bool>>, CliError> {
    let rows: Vec<Vec<bool>> = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim()
                .chars()
                .filter(|c| !c.is_whitespace())
                .map(|c| match c {
                    '1' | '#' | 'X' => Ok(true),
                    '0' | '.' | '_' => Ok(false),
                    _ => Err(CliError::Validation(format!(
                        "bitmap line {}: unexpected {c:?}",
                        i + 1
                    ))),
                })
                .collect()
        })
        .collect::<Result<_, _>>()?;
    if rows.iter().all(|r| r.iter().all(|b| !b)) {
        return Err(CliError::Validation("bitmap has no set pixels".into()));
    }
    Ok(rows)
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("reading {}: {e}", path.display())))
}

fn plan_grid(
    config: &RunConfig,
    period: f64,
) -> Result<qlitho_core::deposition::SamplingGrid, CliError> {
    if config.grid.is_some() {
        Ok(config.grid(period)?)
    } else {
        Ok(qlitho_core::deposition::SamplingGrid::new(
            0.0, period, 2049,
        )?)
    }
}

fn cmd_plan(
    config: &RunConfig,
    dir: &Path,
    pattern: Option<&Path>,
    negative: bool,
) -> Result<String, CliError> {
    let plan = match pattern {
        Some(p) => plan_pattern(&config.geometry()?, &parse_pattern(&read(p)?)?)?,
        None => config.plan()?,
    };
    let layout = plan.layout()?;
    let grid = plan_grid(config, layout.period_f64())?;
    let head = header("plan", &config.to_toml());
    let mut out = String::new();

    let m = plan.geometry().total_photons();
    let predicted = profile(&plan.closed_form(m)?, &grid, Normalization::PeakUnity)?;
    let report = degradation_report(&predicted, &predicted, &layout, &plan.targets())?;
    let files = [
        (
            "plan.toml",
            format!("{}{}", commented(&head), plan.to_toml()),
        ),
        ("plan_profile.csv", profile_csv(&predicted, &head)),
        ("plan_report.txt", format!("{}{report}\n", commented(&head))),
    ];
    for (name, text) in files {
        let path = write_atomic(dir, name, &text)?;
        let _ = writeln!(out, "wrote {}", path.display());
    }
    let _ = writeln!(
        out,
        "entries={} pixels={}",
        plan.entries().len(),
        layout.count
    );
    for e in plan.entries() {
        let label = match e.target {
            Some(t) if t.intermediate => format!("{}+", t.index),
            Some(t) => t.index.to_string(),
            None => "-".into(),
        };
        let _ = write!(out, "entry target={label} weight={:.6}", e.weight);
        if let (Some(t), [a, b]) = (e.target, plan.geometry().pairs()) {
            if !t.intermediate {
                let (l1, l2) = qlitho_core::planner::ell_indices(t.index, a.photons, b.photons)?;
                let _ = write!(out, " ell=({l1},{l2})");
            }
        }
        let _ = writeln!(out);
    }
    let _ = writeln!(
        out,
        "penalty={:.6e} modulation={:.6e} off_target={:.6e}",
        report.exposure_penalty, report.unwanted_modulation, report.off_target_fraction
    );

    if negative {
        let neg = negative_plan(&plan)?;
        let neg_profile = profile(&neg.closed_form(m)?, &grid, Normalization::Raw)?;
        let pos_raw = profile(&plan.closed_form(m)?, &grid, Normalization::Raw)?;
        // Single-pixel profiles add up to one.
        let (np, nn) = (plan.entries().len() as f64, neg.entries().len() as f64);
        let deviation = pos_raw
            .values
            .iter()
            .zip(&neg_profile.values)
            .map(|(a, b)| (np * a + nn * b - 1.0).abs())
            .fold(0.0, f64::max);
        let neg_head = {
            let mut h = head.clone();
            h.push("negative".into());
            h
        };
        for (name, text) in [
            (
                "negative_plan.toml",
                format!("{}{}", commented(&neg_head), neg.to_toml()),
            ),
            (
                "negative_profile.csv",
                profile_csv(&neg_profile.peak_normalized()?, &neg_head),
            ),
        ] {
            let path = write_atomic(dir, name, &text)?;
            let _ = writeln!(out, "wrote {}", path.display());
        }
        let _ = writeln!(out, "negative entries={}", neg.entries().len());
        let _ = writeln!(
            out,
            "sum_check max_deviation={deviation:.3e} status={}",
            pass(deviation < 1e-9)
        );
    }
    Ok(out)
}

fn pass(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "fail"
    }
}

fn cmd_plan_bitmap(
    config: &RunConfig,
    dir: &Path,
    bitmap: &Path,
    fill: bool,
) -> Result<String, CliError> {
    let g = config.geometry()?;
    let mut targets = bitmap_targets(&parse_bitmap(&read(bitmap)?)?);
    if fill {
        targets = with_intermediate_fill(&targets);
    }
    let plan = plan_pattern_2d(&g, &g, &targets)?;
    let period = qlitho_core::planner::PixelLayout::of(&g)?.period_f64();
    let grid = if config.grid.is_some() {
        config.grid(period)?
    } else {
        qlitho_core::deposition::SamplingGrid::new(0.0, period, 257)?
    };
    let head = header("plan --bitmap", &config.to_toml());
    let prof = plan.profile(&grid, &grid, Normalization::PeakUnity)?;
    let mut out = String::new();
    for (name, text) in [
        (
            "plan2d.toml",
            format!("{}{}", commented(&head), plan.to_toml()),
        ),
        ("plan2d_profile.csv", profile_2d_csv(&prof, &head)),
    ] {
        let path = write_atomic(dir, name, &text)?;
        let _ = writeln!(out, "wrote {}", path.display());
    }
    let _ = writeln!(out, "entries={}", plan.entries.len());
    Ok(out)
}

fn cmd_expose(config: &RunConfig, dir: &Path, grains: bool) -> Result<String, CliError> {
    let spec = config
        .film
        .as_ref()
        .ok_or_else(|| CliError::Validation("config has no [film] section".into()))?;
    let plan = config.plan()?;
    let layout = plan.layout()?;
    let m = plan.geometry().total_photons();
    if order_of(config, &plan) != m {
        return Err(CliError::Validation(
            "expose requires full-order absorption".into(),
        ));
    }
    let source = closed_source(config, &plan)?;
    let film = FilmModel::new(spec.grains, spec.absorb_prob)?;
    let shots = match (spec.shots, spec.target_mean) {
        (Some(s), _) => s,
        (None, Some(mean)) => {
            let brightest = brightest_target(&plan, &source)?;
            shots_for_pixel_mean(&source, &layout, &film, brightest, mean)?
        }
        (None, None) => {
            return Err(CliError::Validation(
                "[film] needs shots or target_mean".into(),
            ))
        }
    };
    let result = simulate_trials(
        &source,
        &layout,
        &film,
        shots,
        spec.seed,
        spec.trials,
        Exec::default(),
    )?;
    let head = header("expose", &config.to_toml());
    let mut out = String::new();
    let path = write_atomic(
        dir,
        "exposure.txt",
        &format!("{}{}", commented(&head), result.to_text()),
    )?;
    let _ = writeln!(out, "wrote {}", path.display());
    if grains {
        let flags = grain_bitmap(&source, &layout, &film, shots, spec.seed)?;
        let body: String = flags
            .iter()
            .map(|row| {
                row.iter()
                    .map(|f| if *f { '1' } else { '0' })
                    .chain(['\n'])
                    .collect::<String>()
            })
            .collect();
        let path = write_atomic(dir, "grains.txt", &format!("{}{body}", commented(&head)))?;
        let _ = writeln!(out, "wrote {}", path.display());
    }
    let _ = writeln!(
        out,
        "shots={shots} seed={} trials={}",
        spec.seed, spec.trials
    );
    for p in 1..=layout.count {
        let _ = writeln!(
            out,
            "pixel={p} mean={:.4} std={:.4}",
            result.per_pixel_mean[p - 1],
            result.per_pixel_std[p - 1]
        );
    }
    Ok(out)
}

fn brightest_target(plan: &ExposurePlan, source: &dyn RateSource) -> Result<usize, CliError> {
    let layout = plan.layout()?;
    let mut best = (1usize, f64::NEG_INFINITY);
    for p in 1..=layout.count {
        let r = source.rate(pixel_center(&layout, PixelAddress::new(p))?);
        if r > best.1 {
            best = (p, r);
        }
    }
    Ok(best.0)
}
