// SPDX-License-Identifier: Apache-2.0

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use proptest::prelude::*;

use qlitho_cli::config::{
    AbsorptionSpec, EntrySpec, FilmSpec, GeometrySpec, GridSpec, OutputSpec, PairSpec, PlanSpec,
    RunConfig, Scaling,
};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn qlitho(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qlitho"))
        .args(args)
        .env("QLITHO_OUT_DIR", out)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

const PAIRS: &str = r#"
[[geometry.pair]]
photons = 3
scaling = 1.0

[[geometry.pair]]
photons = 3
scaling = "1/4"

[[plan.entry]]
target = 6

[grid]
samples = 257
"#;

fn field(text: &str, key: &str) -> f64 {
    let tail = text
        .split(&format!("{key}="))
        .nth(1)
        .unwrap_or_else(|| panic!("{key} missing in {text}"));
    tail.split_whitespace().next().unwrap().parse().unwrap()
}

#[test]
fn rate_both_engines_agree() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("pairs_3_3_pixel6.toml");
    let o = qlitho(
        &[
            "rate",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            tmp.path().to_str().unwrap(),
        ],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(field(&stdout(&o), "max_abs_difference") < 1e-9);
    let csv = std::fs::read_to_string(tmp.path().join("profile_brute.csv")).unwrap();
    assert!(csv.starts_with("# qlitho rate\n"));
    assert!(csv.contains("# engine brute\n"));
    let body: Vec<&str> = csv.lines().skip_while(|l| l.starts_with('#')).collect();
    assert_eq!(body[0], "x_lambda,rate");
    assert_eq!(body.len(), 2049);
}

#[test]
fn closed_form_refuses_lower_order() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.toml",
        &format!("{PAIRS}\n[absorption]\norder = 5\n"),
    );
    let o = qlitho(
        &[
            "rate",
            "--config",
            cfg.to_str().unwrap(),
            "--engine",
            "closed",
        ],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(
        stderr(&o).contains("closed form requires full-order absorption"),
        "{}",
        stderr(&o)
    );
    let o = qlitho(
        &[
            "rate",
            "--config",
            cfg.to_str().unwrap(),
            "--engine",
            "brute",
        ],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(tmp.path().join("profile_brute.csv").exists());
}

#[test]
fn empty_grid_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.toml",
        &PAIRS.replace("samples = 257", "samples = 0"),
    );
    let o = qlitho(&["rate", "--config", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 14"), "{}", stderr(&o));
}

#[test]
fn unknown_suite_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let o = qlitho(&["verify", "--suite", "nonsense"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_reports_per_check() {
    let tmp = tempfile::tempdir().unwrap();
    let o = qlitho(&["verify", "--suite", "table-one", "--n", "2"], tmp.path());
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(
        text.lines().filter(|l| l.contains("status=pass")).count(),
        5
    );
    assert!(text.contains("summary checks=5 failed=0"));
    let o = qlitho(&["verify", "--suite", "sum-to-one"], tmp.path());
    assert!(o.status.success());
    for line in stdout(&o).lines().filter(|l| l.starts_with("suite=")) {
        assert!(field(line, "value") < 1e-9);
    }
}

#[test]
fn plan_labels_and_negative() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", PAIRS);
    let pattern = write_config(tmp.path(), "p.txt", "6\n");
    let o = qlitho(
        &[
            "plan",
            "--config",
            cfg.to_str().unwrap(),
            "--pattern",
            pattern.to_str().unwrap(),
            "--negative",
        ],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(
        text.contains("entry target=6 weight=1.000000 ell=(2,1)"),
        "{text}"
    );
    assert!(text.contains("negative entries=15"));
    assert!(text.contains("status=pass"));
    assert!(field(&text, "max_deviation") < 1e-9);
    let plan = std::fs::read_to_string(tmp.path().join("plan.toml")).unwrap();
    let body: String = plan
        .lines()
        .filter(|l| !l.starts_with('#'))
        .collect::<Vec<_>>()
        .join("\n");
    let parsed = qlitho_core::planner::ExposurePlan::from_toml(&body).unwrap();
    assert_eq!(
        parsed.targets(),
        vec![qlitho_core::planner::PixelAddress::new(6)]
    );
}

#[test]
fn plan_rejects_out_of_range_pixels() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", PAIRS);
    let pattern = write_config(tmp.path(), "p.txt", "3, 17\n");
    let o = qlitho(
        &[
            "plan",
            "--config",
            cfg.to_str().unwrap(),
            "--pattern",
            pattern.to_str().unwrap(),
        ],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn trench_plan_penalty_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("trench.toml");
    let o = qlitho(
        &[
            "plan",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            tmp.path().to_str().unwrap(),
        ],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let m = field(&stdout(&o), "modulation");
    assert!((0.05..=0.15).contains(&m), "{m}");
}

#[test]
fn bitmap_plan_and_two_axis_rate() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.toml",
        &PAIRS.replace("samples = 257", "samples = 33"),
    );
    let bitmap = write_config(tmp.path(), "b.txt", "1000\n0100\n0010\n");
    let o = qlitho(
        &[
            "plan",
            "--config",
            cfg.to_str().unwrap(),
            "--bitmap",
            bitmap.to_str().unwrap(),
            "--fill",
        ],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("entries=5"));
    let o = qlitho(
        &["rate", "--config", cfg.to_str().unwrap(), "--two-d"],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(tmp.path().join("profile_2d.csv")).unwrap();
    let body: Vec<&str> = csv.lines().skip_while(|l| l.starts_with('#')).collect();
    assert_eq!(body[0], "x_lambda,y_lambda,rate");
    assert_eq!(body.len(), 1 + 33 * 33);
}

#[test]
fn expose_is_deterministic_per_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let text =
        format!("{PAIRS}\n[film]\ngrains = 500\nabsorb_prob = 0.05\nshots = 20\ntrials = 3\n");
    let cfg = write_config(tmp.path(), "c.toml", &text);
    let run = |seed: &str, dir: &Path| {
        let o = qlitho(
            &[
                "expose",
                "--config",
                cfg.to_str().unwrap(),
                "--seed",
                seed,
                "--grains",
            ],
            dir,
        );
        assert!(o.status.success(), "{}", stderr(&o));
        let text = std::fs::read_to_string(dir.join("exposure.txt")).unwrap();
        assert!(text.contains(&format!("# seed = {seed}")));
        text.lines()
            .filter(|l| !l.starts_with('#'))
            .collect::<Vec<_>>()
            .join("\n")
    };
    let (a, b, c) = (
        tmp.path().join("a"),
        tmp.path().join("b"),
        tmp.path().join("c"),
    );
    let ra = run("11", &a);
    assert_eq!(ra, run("11", &b));
    assert_ne!(ra, run("12", &c));
    assert!(a.join("grains.txt").exists());
}

#[test]
fn table_matches_partition_formulas() {
    let tmp = tempfile::tempdir().unwrap();
    let o = qlitho(&["table", "--n", "3"], tmp.path());
    assert!(o.status.success());
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "n1,n2,pixels,feature_size_lambda,period_lambda");
    assert_eq!(rows[1], "6,0,7,1/14,1/2");
    assert_eq!(rows[6], "1,5,12,1/4,3");
    assert_eq!(rows.len(), 8);
}

fn pair_strategy() -> impl Strategy<Value = PairSpec> {
    (
        1u32..6,
        prop_oneof![
            (1u32..9).prop_map(|k| (Some(Scaling::Text(format!("1/{k}"))), None)),
            (0.05f64..1.0).prop_map(|s| (Some(Scaling::Value(s)), None)),
            (1.0f64..90.0).prop_map(|a| (None, Some(a))),
        ],
    )
        .prop_map(|(photons, (scaling, angle_deg))| PairSpec {
            photons,
            scaling,
            angle_deg,
        })
}

fn entry_strategy() -> impl Strategy<Value = EntrySpec> {
    prop_oneof![
        (1usize..20, any::<bool>(), prop::option::of(0.0f64..3.0)).prop_map(|(t, i, w)| {
            EntrySpec {
                target: Some(t),
                intermediate: i,
                weight: w,
                ..Default::default()
            }
        }),
        (
            prop::collection::vec(0.0f64..1.0, 1..4),
            prop::option::of(0.0f64..3.0)
        )
            .prop_map(|(p, w)| EntrySpec {
                phases_turns: Some(p),
                weight: w,
                ..Default::default()
            }),
    ]
}

proptest! {
    #[test]
    fn config_round_trips(
        pairs in prop::collection::vec(pair_strategy(), 1..4),
        entries in prop::collection::vec(entry_strategy(), 1..5),
        samples in 2usize..5000,
        order in prop::option::of(1u32..8),
        loss in prop::option::of(0.0f64..=1.0),
        film in prop::option::of((2u32..100_000, 0.001f64..1.0, prop::option::of(1u64..1000), any::<u64>(), 1usize..300)),
        normalize in prop::option::of(prop::sample::select(vec!["raw", "peak", "pixelsum"])),
    ) {
        let config = RunConfig {
            geometry: GeometrySpec { pair: pairs },
            plan: PlanSpec { entry: entries },
            grid: Some(GridSpec { samples, x_min: None, x_max: Some(2.5) }),
            absorption: AbsorptionSpec { order, loss },
            film: film.map(|(grains, absorb_prob, shots, seed, trials)| FilmSpec {
                grains,
                absorb_prob,
                shots,
                target_mean: None,
                seed,
                trials,
            }),
            output: OutputSpec { dir: Some("out".into()), normalize: normalize.map(String::from), engine: None },
        };
        let text = config.to_toml();
        let parsed = RunConfig::parse(&text).unwrap();
        prop_assert_eq!(&parsed, &config);
        prop_assert_eq!(parsed.to_toml(), text);
    }
}
