use std::path::Path;
use std::process::Command;

use cf_power::continuous::DEFAULT_GRID;
use cf_power::rate::expected_rate;
use cf_power::Marginal;
use cf_power::{AsymmetricPolicy, Policy, SymmetricPolicy};
use cf_power_cli::config::{
    load_config, parse_config, preset, to_toml, write_config, Algorithm, ConfigError,
    ExperimentConfig, ModelSpec, PolicyKind, PRESET_NAMES,
};
use cf_power_cli::reproduce::report_thresholds;
use cf_power_cli::sweep::{
    dump_name, dump_policies, run_sweep, write_csv, PolicyDump, PolicyRecord, SweepRow, CSV_HEADER,
};
use proptest::prelude::*;

fn configs_dir() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/configs"))
}

fn cfpower(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_cfpower"))
        .args(args)
        .output()
        .unwrap()
}

#[test]
fn example1_preset_joint_probabilities() {
    let cfg = preset("example1").unwrap();
    let model = cfg.discrete_model().unwrap();
    assert_eq!(model.users(), 2);
    assert_eq!(model.num_states(), 4);
    for (got, want) in model.probs().iter().zip([0.48, 0.12, 0.32, 0.08]) {
        assert!((got - want).abs() < 1e-12);
    }
}

#[test]
fn example2_preset_marginal() {
    let cfg = preset("example2").unwrap();
    let ModelSpec::Discrete { marginals } = &cfg.model else {
        panic!("discrete preset expected")
    };
    assert_eq!(marginals[0].probs, vec![0.1175, 0.2760, 0.6065]);
    assert_eq!(cfg.discrete_model().unwrap().num_states(), 9);
}

#[test]
fn shipped_configs_match_presets() {
    for name in PRESET_NAMES {
        let cfg = load_config(&configs_dir().join(format!("{name}.toml"))).unwrap();
        assert_eq!(cfg, preset(name).unwrap(), "{name}");
    }
}

#[test]
fn probabilities_summing_to_point_nine_are_rejected_with_a_line() {
    let src = r#"
a = [1, 1]
pbar_grid = [1.0]
algorithms = ["A1"]
policy_kind = "symmetric"

[model]
kind = "discrete"

[[model.marginals]]
values = [1.0, 2.0]
probs = [0.5, 0.4]

[[model.marginals]]
values = [1.0]
probs = [1.0]
"#;
    match parse_config(src) {
        Err(ConfigError::Invalid {
            field,
            line,
            message,
        }) => {
            assert_eq!(field, "model.marginals");
            assert_eq!(line, Some(10));
            assert!(message.contains("sum"), "{message}");
        }
        other => panic!("expected a validation error, got {other:?}"),
    }
}

#[test]
fn syntax_errors_report_their_line() {
    let err = parse_config("a = [1, 1]\npbar_grid = [1.0,\n").unwrap_err();
    assert!(matches!(err, ConfigError::Parse(_)));
    assert!(err.to_string().contains("line"), "{err}");
}

#[test]
fn grid_and_algorithm_validation() {
    let mut cfg = preset("example1").unwrap();
    cfg.algorithms.clear();
    assert!(
        matches!(run_sweep(&cfg), Err(ConfigError::Invalid { ref field, .. }) if field == "algorithms")
    );

    let mut cfg = preset("example1").unwrap();
    cfg.pbar_grid = vec![1.0, 1.0];
    assert!(cfg.validate().is_err());
    cfg.pbar_grid = vec![];
    assert!(cfg.validate().is_err());
    cfg.pbar_grid = vec![0.0, 1.0];
    assert!(cfg.validate().is_err());

    let mut cfg = preset("example1").unwrap();
    cfg.a = vec![1, 1, 1];
    assert!(cfg.validate().is_err());
}

#[test]
fn exhaustive_caps_are_checked_at_load() {
    let mut cfg = preset("example3").unwrap();
    cfg.algorithms.push(Algorithm::A3);
    assert!(cfg.validate().is_err());

    let mut cfg = preset("example2").unwrap();
    cfg.policy_kind = PolicyKind::Asymmetric;
    cfg.validate().unwrap();
    cfg.model = ModelSpec::Discrete {
        marginals: vec![Marginal::new(vec![0.5, 1.0, 1.5, 2.0], vec![0.25; 4]); 2],
    };
    assert!(cfg.validate().is_err());

    let mut cfg = preset("gaussian").unwrap();
    cfg.algorithms.push(Algorithm::A3);
    assert!(cfg.validate().is_err());
}

#[test]
fn two_state_asymmetric_a3_row() {
    let mut cfg = preset("remark").unwrap();
    cfg.algorithms = vec![Algorithm::A3];
    let cells = run_sweep(&cfg).unwrap();
    assert_eq!(cells.len(), 1);
    let rate = cells[0].row.expected_rate.unwrap();
    assert!((rate - 0.4102).abs() < 5e-3, "{rate}");
}

#[test]
fn example1_water_filling_is_exact_above_threshold() {
    let mut cfg = preset("example1").unwrap();
    cfg.pbar_grid = cf_power_cli::config::step_grid(2.2, 5.0);
    cfg.algorithms = vec![Algorithm::A1, Algorithm::A3];
    let cells = run_sweep(&cfg).unwrap();
    for pair in cells.chunks(2) {
        assert_eq!(pair[0].row.pbar, pair[1].row.pbar);
        let (a1, a3) = (
            pair[0].row.expected_rate.unwrap(),
            pair[1].row.expected_rate.unwrap(),
        );
        assert!(
            (a1 - a3).abs() <= 1e-6,
            "{}: {a1} vs {a3}",
            pair[0].row.pbar
        );
    }
}

#[test]
fn thresholds_of_discrete_presets() {
    for (name, want, tol) in [
        ("example1", 2.09, 0.01),
        ("example2", 5.02, 0.01),
        ("example3", 13.05, 0.05),
    ] {
        let t = report_thresholds(name, &preset(name).unwrap()).unwrap();
        assert!((t.pbar - want).abs() <= tol, "{name}: {}", t.pbar);
    }
}

#[test]
fn rows_are_ordered_and_deterministic() {
    let mut cfg = preset("remark").unwrap();
    cfg.pbar_grid = vec![0.5, 1.0, 2.0];
    let strip = |rows: Vec<cf_power_cli::sweep::Cell>| -> Vec<SweepRow> {
        rows.into_iter()
            .map(|c| SweepRow {
                wall_ms: 0.0,
                ..c.row
            })
            .collect()
    };
    let first = strip(run_sweep(&cfg).unwrap());
    let second = strip(run_sweep(&cfg).unwrap());
    assert_eq!(first, second);
    let order: Vec<(f64, Algorithm)> = first.iter().map(|r| (r.pbar, r.algorithm_id)).collect();
    let expected: Vec<(f64, Algorithm)> = cfg
        .pbar_grid
        .iter()
        .flat_map(|&p| cfg.algorithms.iter().map(move |&a| (p, a)))
        .collect();
    assert_eq!(order, expected);
}

#[test]
fn csv_has_header_and_six_digits() {
    let mut cfg = preset("example1").unwrap();
    cfg.pbar_grid = vec![0.87];
    let rows: Vec<SweepRow> = run_sweep(&cfg)
        .unwrap()
        .into_iter()
        .map(|c| c.row)
        .collect();
    let mut buf = Vec::new();
    write_csv(&rows, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), CSV_HEADER.join(","));
    let a3 = lines.find(|l| l.contains(",A3,")).unwrap();
    let fields: Vec<&str> = a3.split(',').collect();
    assert_eq!(fields[0], "0.870000");
    assert_eq!(fields[2], "symmetric");
    assert_eq!(fields[3], "0.266260");
    assert_eq!(fields[4], "0111");
    assert_eq!(fields[8], "");
}

fn recompute(cfg: &ExperimentConfig, record: &PolicyRecord) -> f64 {
    let model = cfg.discrete_model().unwrap();
    let a = cfg.coefficients().unwrap();
    let PolicyDump::Discrete { powers } = &record.policy else {
        panic!("discrete dump expected")
    };
    let policy = match record.policy_kind {
        PolicyKind::Symmetric => {
            Policy::Symmetric(SymmetricPolicy::new(powers[0].clone()).unwrap())
        }
        _ => Policy::Asymmetric(AsymmetricPolicy::from_rows(powers.clone()).unwrap()),
    };
    expected_rate(&model, &a, &policy).unwrap()
}

#[test]
fn dumped_policies_reproduce_their_rates() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["example2", "remark"] {
        let mut cfg = preset(name).unwrap();
        cfg.pbar_grid = vec![0.7, 1.5, 2.0];
        let cells = run_sweep(&cfg).unwrap();
        let sub = dir.path().join(name);
        dump_policies(&cells, &sub).unwrap();
        for (i, cell) in cells.iter().enumerate() {
            let record = cell.policy.as_ref().unwrap();
            let text = std::fs::read_to_string(sub.join(dump_name(i, record))).unwrap();
            let loaded: PolicyRecord = serde_json::from_str(&text).unwrap();
            assert_eq!(&loaded, record);
            let rate = recompute(&cfg, &loaded);
            assert!((rate - cell.row.expected_rate.unwrap()).abs() <= 1e-9);
        }
    }
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("rows.csv");

    let ok = cfpower(&[
        "--preset",
        "example1",
        "--quiet",
        "--out",
        out.to_str().unwrap(),
        "solve",
        "--pbar",
        "1.0",
    ]);
    assert_eq!(
        ok.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&ok.stderr)
    );
    assert_eq!(std::fs::read_to_string(&out).unwrap().lines().count(), 5);

    let bad_path = dir.path().join("bad.toml");
    std::fs::write(&bad_path, "a = [1, 1]\npbar_grid = []\n").unwrap();
    let bad = cfpower(&["--config", bad_path.to_str().unwrap(), "sweep"]);
    assert_eq!(bad.status.code(), Some(2));
    assert_eq!(
        cfpower(&["--preset", "nope", "sweep"]).status.code(),
        Some(2)
    );

    // One bisection step with a tight tolerance cannot land in the budget window.
    let mut cfg = preset("example1").unwrap();
    cfg.pbar_grid = vec![1.0];
    cfg.bisection.max_iter = 1;
    cfg.bisection.power_tol = 1e-12;
    let failing = dir.path().join("failing.toml");
    write_config(&cfg, &failing).unwrap();
    let run = cfpower(&[
        "--config",
        failing.to_str().unwrap(),
        "--quiet",
        "--out",
        out.to_str().unwrap(),
        "sweep",
    ]);
    assert_eq!(run.status.code(), Some(3));
    let csv = std::fs::read_to_string(&out).unwrap();
    assert!(
        csv.lines()
            .any(|l| l.contains(",A1,") && l.contains("bisection")),
        "{csv}"
    );
    assert!(csv.lines().any(|l| l.contains(",A0,") && l.ends_with(',')));
}

#[test]
fn binary_thresholds_and_reproduce() {
    let t = cfpower(&["thresholds"]);
    assert_eq!(t.status.code(), Some(0));
    let text = String::from_utf8(t.stdout).unwrap();
    assert!(
        text.contains("example1") && text.contains("2.0892"),
        "{text}"
    );

    let r = cfpower(&["reproduce", "remark"]);
    assert_eq!(r.status.code(), Some(0));
    let text = String::from_utf8(r.stdout).unwrap();
    assert!(
        text.lines().filter(|l| l.starts_with("PASS")).count() >= 3,
        "{text}"
    );
    assert!(!text.contains("FAIL"));
}

fn arb_marginal() -> impl Strategy<Value = Marginal> {
    prop::collection::vec((0.01f64..5.0, 1u32..100), 1..4).prop_map(|pairs| {
        let total: u32 = pairs.iter().map(|p| p.1).sum();
        Marginal::new(
            pairs.iter().map(|p| p.0).collect(),
            pairs
                .iter()
                .map(|p| f64::from(p.1) / f64::from(total))
                .collect(),
        )
    })
}

fn arb_config() -> impl Strategy<Value = ExperimentConfig> {
    (
        any::<u64>(),
        prop::collection::vec(1i64..4, 2),
        prop::collection::vec(0.01f64..3.0, 1..6),
        prop::sample::subsequence(
            vec![Algorithm::A0, Algorithm::A1, Algorithm::A2, Algorithm::A3],
            1..=4,
        ),
        prop_oneof![Just(PolicyKind::Symmetric), Just(PolicyKind::Asymmetric)],
        prop::collection::vec(arb_marginal(), 2),
        (1e-9f64..1e-2, 1usize..500, 0.01f64..1.0, 1u8..=2),
    )
        .prop_map(
            |(seed, a, steps, algorithms, policy_kind, marginals, (tol, iters, step, ordering))| {
                let mut pbar = 0.0;
                let pbar_grid = steps
                    .into_iter()
                    .map(|s| {
                        pbar += s;
                        pbar
                    })
                    .collect();
                let mut cfg = preset("example1").unwrap();
                cfg.seed = seed;
                cfg.a = a;
                cfg.pbar_grid = pbar_grid;
                cfg.algorithms = algorithms;
                cfg.policy_kind = policy_kind;
                cfg.model = ModelSpec::Discrete { marginals };
                cfg.bisection.power_tol = tol;
                cfg.bisection.max_iter = iters;
                cfg.nlp.seed = seed;
                cfg.shaping.step = step;
                cfg.shaping.ordering = cf_power::OrderingMethod::from_index(ordering).unwrap();
                cfg
            },
        )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn config_round_trips(cfg in arb_config()) {
        let text = to_toml(&cfg).unwrap();
        let back = parse_config(&text).unwrap();
        prop_assert_eq!(back, cfg);
    }
}

#[test]
fn gaussian_config_defaults_grid() {
    let src = "a = [1, 1]\npbar_grid = [1.0]\nalgorithms = [\"A1\"]\npolicy_kind = \"continuous\"\n[model]\nkind = \"gaussian\"\n";
    let cfg = parse_config(src).unwrap();
    assert_eq!(cfg.model, ModelSpec::Gaussian { grid: DEFAULT_GRID });
}
