use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use cbrq::cli::{cmd_backtest, cmd_build, cmd_errors, cmd_ingest, cmd_neighbors, cmd_sweep, load_returns};
use cbrq::synthetic::{daily_price_csv, regime_dataset, RegimeSpec};
use cbrq::{ReturnSeries, RunConfig, Variant, YearMonth};

/// Daily price files for a small regime dataset, plus `DUP` (G000 a year
/// ahead, so each G000 case repeats a DUP case anchored 12 months earlier)
/// and `GAPPY` (one month missing).
fn write_prices(dir: &Path) -> Vec<ReturnSeries> {
    fs::create_dir_all(dir).unwrap();
    let mut data = regime_dataset(
        &RegimeSpec {
            assets: 10,
            months: 48,
            ..Default::default()
        },
        77,
    );
    let g0 = &data[0];
    let dup = ReturnSeries::new("DUP", g0.start, g0.returns[12..].to_vec()).unwrap();
    data.push(dup);
    for s in &data {
        fs::write(dir.join(format!("{}.csv", s.asset_id)), daily_price_csv(s, 20.0)).unwrap();
    }
    let gappy = daily_price_csv(&data[1], 30.0)
        .lines()
        .filter(|l| !l.starts_with("2006-03"))
        .collect::<Vec<_>>()
        .join("\n");
    fs::write(dir.join("GAPPY.csv"), gappy).unwrap();
    data
}

fn config(root: &Path, out: &str) -> RunConfig {
    RunConfig {
        data_dir: root.join("prices"),
        output_dir: root.join(out),
        runs: 4,
        ..Default::default()
    }
}

#[test]
fn pipeline_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let data = write_prices(&tmp.path().join("prices"));
    let cfg = config(tmp.path(), "out");

    let ingest = cmd_ingest(&cfg).unwrap();
    assert_eq!(ingest.accepted.len(), 11);
    assert_eq!(ingest.rejected.len(), 1);
    assert_eq!(ingest.rejected[0].0, "GAPPY");
    let rejects = fs::read_to_string(cfg.output_dir.join("rejects.csv")).unwrap();
    assert!(rejects.starts_with("ticker,reason\nGAPPY,"));
    assert!(rejects.contains("2006-03"));

    let loaded = load_returns(&cfg).unwrap();
    let g0 = loaded.iter().find(|s| s.asset_id == "G000").unwrap();
    for (a, b) in g0.returns.iter().zip(&data[0].returns) {
        assert!((a - b).abs() < 1e-9);
    }

    let base = cmd_build(&cfg).unwrap();
    assert_eq!(base.len(), 10 * (48 - 12) + (36 - 12));
    assert!(cfg.output_dir.join("casebase.jsonl").exists());
    assert!(cfg.output_dir.join("build.config.json").exists());

    let errors = cmd_errors(&cfg).unwrap();
    assert_eq!(errors.rows.len(), 6 * 5);
    let table = fs::read_to_string(cfg.output_dir.join("errors.txt")).unwrap();
    for v in Variant::ALL {
        assert!(table.contains(v.as_str()));
    }

    let (sweep, hist) = cmd_sweep(&cfg).unwrap();
    assert_eq!(sweep.points.len(), 21);
    assert!(sweep.argmin().is_some());
    assert!(hist.total() > 0);
    assert!(cfg.output_dir.join("sweep.csv").exists());
    assert!(cfg.output_dir.join("histogram.csv").exists());

    let outcome = cmd_backtest(&cfg).unwrap();
    assert_eq!(outcome.summary.variants.len(), 6);
    assert_eq!(outcome.summary.runs, 4);
    let runs = fs::read_to_string(cfg.output_dir.join("backtest_summary.csv")).unwrap();
    assert_eq!(runs.lines().count(), 1 + 6 * 4);
    assert!(cfg.output_dir.join("ledgers/ProposedAdjusted/full.csv").exists());
    assert!(cfg.output_dir.join("ledgers/ProposedAdjusted/run_003.csv").exists());

    let query = YearMonth::new(2008, 6).unwrap();
    let rows = cmd_neighbors(&cfg, "G000", query, Variant::ProposedAdjusted).unwrap();
    let top = &rows[0];
    assert_eq!((top.kind, top.rank, top.ticker.as_str()), ("most", 1, "DUP"));
    assert_eq!(top.anchor, query.offset(-12));
    assert!((top.score - 1.0).abs() < 1e-9);
    assert_eq!(rows.iter().filter(|r| r.kind == "least").count(), cfg.k);
    assert!(rows.iter().all(|r| r.anchor < query));
    assert!(cfg.output_dir.join("neighbors.csv").exists());
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    write_prices(&tmp.path().join("prices"));
    let outputs: Vec<Vec<Vec<u8>>> = ["a", "b"]
        .iter()
        .map(|out| {
            let cfg = RunConfig {
                jobs: if *out == "a" { 1 } else { 3 },
                ..config(tmp.path(), out)
            };
            cmd_ingest(&cfg).unwrap();
            cmd_build(&cfg).unwrap();
            cmd_errors(&cfg).unwrap();
            cmd_sweep(&cfg).unwrap();
            cmd_backtest(&cfg).unwrap();
            ["casebase.jsonl", "errors.csv", "sweep.csv", "histogram.csv", "backtest_summary.csv", "bootstrap.json"]
                .iter()
                .map(|f| fs::read(cfg.output_dir.join(f)).unwrap())
                .collect()
        })
        .collect();
    assert_eq!(outputs[0], outputs[1]);
}

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_cbrq"));
    cmd.env_remove("CBRQ_CONFIG");
    cmd
}

fn code(cmd: &mut Command) -> i32 {
    cmd.output().unwrap().status.code().unwrap()
}

fn path_arg(p: PathBuf) -> String {
    p.to_string_lossy().into_owned()
}

#[test]
fn binary_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    assert_eq!(code(&mut bin()), 1);
    assert_eq!(code(bin().arg("--help")), 0);
    assert_eq!(code(bin().args(["errors", "--w", "1.5"])), 1);
    assert_eq!(code(bin().args(["errors", "--config", &path_arg(root.join("missing.json"))])), 1);
    assert_eq!(code(bin().args(["errors", "--variants", "Nope"])), 1);

    fs::create_dir_all(root.join("empty")).unwrap();
    let empty = ["--data-dir".to_string(), path_arg(root.join("empty"))];
    assert_eq!(code(bin().arg("ingest").args(&empty)), 1);

    write_prices(&root.join("prices"));
    let out = path_arg(root.join("out"));
    let common = ["--data-dir".to_string(), path_arg(root.join("prices")), "--output-dir".into(), out];
    let ingest = bin().arg("ingest").args(&common).output().unwrap();
    assert_eq!(ingest.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&ingest.stdout).contains("11 accepted, 1 rejected"));
    assert_eq!(code(bin().arg("build").args(&common)), 0);
    assert_eq!(
        code(bin().arg("neighbors").args(&common).args(["--asset", "NOPE", "--month", "2008-06"])),
        2
    );
    let nb = bin()
        .arg("neighbors")
        .args(&common)
        .args(["--asset", "G000", "--month", "2008-06", "--variant", "proposedadjusted"])
        .output()
        .unwrap();
    assert_eq!(nb.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&nb.stdout).lines().next().unwrap().contains("DUP"));

    fs::write(root.join("out/returns/BAD.csv"), "ticker,year,month,return\nBAD,2005,x,0.1\n").unwrap();
    fs::remove_file(root.join("out/casebase.jsonl")).unwrap();
    assert_eq!(code(bin().arg("build").args(&common)), 2);
}

#[test]
fn config_file_and_env_are_honoured() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    write_prices(&root.join("prices"));
    let cfg_path = root.join("cfg.json");
    let json = serde_json::json!({
        "data_dir": root.join("prices"),
        "output_dir": root.join("out"),
        "window": 6,
    });
    fs::write(&cfg_path, json.to_string()).unwrap();
    let status = bin()
        .arg("ingest")
        .env("CBRQ_CONFIG", &cfg_path)
        .output()
        .unwrap()
        .status;
    assert_eq!(status.code(), Some(0));
    let built = bin()
        .args(["build", "--config", &path_arg(cfg_path.clone()), "--window", "8"])
        .output()
        .unwrap();
    assert_eq!(built.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&built.stdout).trim(), format!("{} cases", 10 * 40 + 28));
    let sidecar: serde_json::Value =
        serde_json::from_slice(&fs::read(root.join("out/build.config.json")).unwrap()).unwrap();
    assert_eq!(sidecar["window"], 8);

    fs::write(&cfg_path, r#"{"windw": 6}"#).unwrap();
    assert_eq!(code(bin().args(["build", "--config", &path_arg(cfg_path)])), 1);
}
