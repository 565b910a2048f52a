use std::path::Path;
use std::process::Command;

use qmetro::methods::Variant;
use qmetro::problem::Direction;
use qmetro_cli::config::MethodKind;
use qmetro_cli::tables::{self, NoRow, PlotTables};
use qmetro_cli::{emit_plot_data, persist, run, ExperimentConfig, RunResult, RESULT_FILE};

fn config(text: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml_str(text).unwrap()
}

fn small_phase() -> RunResult {
    let c = config("case = \"phase\"\nn_h = 120\nn_o = [2, 3, 4]\nmethods = [\"m1\", \"m2\", \"m3\"]\nvariants = [\"general\", \"ppt\"]\n");
    run(&c, 1e-9).unwrap()
}

fn score(r: &RunResult, method: MethodKind, variant: Variant, n_o: usize) -> f64 {
    r.cells.iter().find(|c| c.method == method && c.variant == variant && c.n_o == n_o).unwrap().score.unwrap()
}

#[test]
fn negative_sigma_is_rejected() {
    let err = ExperimentConfig::from_toml_str(
        "case = \"phase\"\nn_o = [2]\nmethods = [\"m2\"]\n[prior]\nkind = \"gaussian\"\nmu = 3.0\nsigma = -1.0\n",
    )
    .unwrap_err();
    let msg = format!("{err:#}");
    assert!(msg.contains("prior.sigma"), "{msg}");
}

#[test]
fn phase_sweep_is_complete_and_ordered() {
    let r = small_phase();
    assert_eq!(r.failures(), 0);
    assert_eq!(r.cells.len(), 3 * 3 * 2);
    for c in &r.cells {
        assert_eq!(c.direction, Direction::Maximize);
        let p = c.protocol.as_ref().unwrap();
        assert!(p.tester_violation < 1e-7);
        assert!(p.realization_deviation.unwrap() < 1e-6);
        assert!((p.outcome_probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-7);
        assert_eq!(p.povm_ranks.len(), c.n_o.min(p.estimators.len()));
    }
    for n in 2..=4 {
        let m2 = score(&r, MethodKind::M2, Variant::General, n);
        let m3 = score(&r, MethodKind::M3, Variant::General, n);
        assert!(m3 >= m2 - 1e-9);
        // a qutrit probe is its own auxiliary for a phase: PPT costs nothing here
        assert!((score(&r, MethodKind::M3, Variant::Ppt, n) - m3).abs() < 1e-6);
    }
    // the seesaw plateau of the qutrit phase problem
    let plateau = 0.5 * (1.0 + (std::f64::consts::PI / 4.0).cos());
    assert!((score(&r, MethodKind::M3, Variant::General, 4) - plateau).abs() < 2e-3);
}

#[test]
fn tables_round_trip_and_normalize() {
    let r = small_phase();
    let dir = tempfile::tempdir().unwrap();
    persist(&r, dir.path()).unwrap();

    let back: RunResult =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join(RESULT_FILE)).unwrap()).unwrap();
    assert_eq!(back.cells.len(), r.cells.len());
    assert_eq!(back.config, r.config);

    let emitted = emit_plot_data(&r);
    let read = PlotTables::read(dir.path()).unwrap();
    assert_eq!(read, emitted);
    assert_eq!(read.score_vs_n_o.len(), r.cells.len());

    let header = |name: &str| {
        let text = std::fs::read_to_string(dir.path().join(name)).unwrap();
        text.lines().next().unwrap().to_string()
    };
    assert_eq!(header(tables::SCORE_VS_N_O), tables::SCORE_VS_N_O_COLUMNS.join(","));
    assert_eq!(header(tables::SCORE_VS_T), tables::SCORE_VS_T_COLUMNS.join(","));
    assert_eq!(header(tables::P0_VS_T), tables::P0_COLUMNS.join(","));

    let mut peaks = std::collections::BTreeMap::<(MethodKind, String), f64>::new();
    for row in &read.score_vs_n_o {
        let NoRow { method, variant, normalized_score, .. } = row;
        let peak = peaks.entry((*method, format!("{variant:?}"))).or_insert(0.0);
        *peak = peak.max(*normalized_score);
    }
    assert_eq!(peaks.len(), 6);
    assert!(peaks.values().all(|&m| m == 1.0), "{peaks:?}");
}

#[test]
fn same_seed_reproduces_scores() {
    let c = config(
        "case = \"thermometry\"\nreward = \"msle\"\nn_h = 200\nn_o = [3]\nmethods = [\"m3\"]\n\
         variants = [\"general\", \"ppt\", \"product\"]\nseed = 3\n[thermometry]\ntimes = [0.3, 0.8]\n",
    );
    let a = run(&c, 1e-9).unwrap();
    let b = run(&c, 1e-9).unwrap();
    assert_eq!(a.failures(), 0);
    assert_eq!(a.cells.len(), 6);
    for (x, y) in a.cells.iter().zip(&b.cells) {
        assert!((x.score.unwrap() - y.score.unwrap()).abs() < 1e-7);
    }
    // costs: product ≥ PPT ≥ general
    for t in [0.3, 0.8] {
        let s = |v| a.cells.iter().find(|c| c.variant == v && c.t == Some(t)).unwrap().score.unwrap();
        assert!(s(Variant::Product) >= s(Variant::Ppt) - 1e-7);
        assert!(s(Variant::Ppt) >= s(Variant::General) - 1e-7);
    }
    let p0 = emit_plot_data(&a).p0_vs_t;
    assert!(p0.iter().all(|r| r.schmidt_p0.is_some_and(|p| (0.5 - 1e-9..=1.0 + 1e-9).contains(&p))));
}

#[test]
fn thermometry_methods_converge() {
    let c = config(
        "case = \"thermometry\"\nn_o = [2, 4, 8, 20]\nmethods = [\"m1\", \"m2\", \"m3\"]\n[thermometry]\ntimes = [0.05]\n",
    );
    let r = run(&c, 1e-9).unwrap();
    assert_eq!(r.failures(), 0);
    let s = |m, n| score(&r, m, Variant::General, n);
    for n in [2, 4, 8, 20] {
        assert!(s(MethodKind::M3, n) <= s(MethodKind::M2, n) + 1e-9);
    }
    assert!(s(MethodKind::M2, 20) - s(MethodKind::M3, 20) < 1e-3);
    assert!(s(MethodKind::M1, 20) > s(MethodKind::M3, 20));
}

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qmetro"))
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = write(dir.path(), "good.toml", "case = \"phase\"\nn_h = 40\nn_o = [2]\nmethods = [\"m2\"]\n");
    let out = dir.path().join("out");
    let status =
        binary().arg("run").arg(&good).arg("--out").arg(&out).args(["--threads", "2", "--seed", "5"]).status().unwrap();
    assert!(status.success());
    let result: RunResult = serde_json::from_str(&std::fs::read_to_string(out.join(RESULT_FILE)).unwrap()).unwrap();
    assert_eq!(result.config.seed, 5);

    let bad = write(
        dir.path(),
        "bad.toml",
        "case = \"phase\"\nn_o = [2]\nmethods = [\"m2\"]\n[prior]\nkind = \"gaussian\"\nmu = 0.0\nsigma = -2.0\n",
    );
    let output = binary().arg("run").arg(&bad).arg("--out").arg(dir.path().join("bad")).output().unwrap();
    assert!(!output.status.success());
    assert!(String::from_utf8_lossy(&output.stderr).contains("prior.sigma"));

    // a solver that cannot converge fails every cell, and the run still writes its record
    let failing = binary()
        .arg("run")
        .arg(&good)
        .arg("--out")
        .arg(dir.path().join("failing"))
        .env(qmetro_cli::SOLVER_TOL_ENV, "1e-300")
        .status()
        .unwrap();
    assert_eq!(failing.code(), Some(1));
    let result: RunResult =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("failing").join(RESULT_FILE)).unwrap()).unwrap();
    assert!(result.cells.iter().all(|c| c.error.is_some()));
}
