use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use polarscope::report::RunReport;

const SMALL: &str = "seed = 3\nclusters = 3\nusers_per_cluster = 120\ndays = 21\nrate = 3.0\n";

fn polarscope(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polarscope"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn synth(dir: &Path) -> PathBuf {
    std::fs::create_dir_all(dir).unwrap();
    let scenario = dir.join("scenario.toml");
    std::fs::write(&scenario, SMALL).unwrap();
    let data = dir.join("data");
    let out = polarscope(&["synth", "--scenario", scenario.to_str().unwrap(), "--out", data.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    data
}

fn run_args<'a>(data: &'a Path, out: &'a Path) -> Vec<String> {
    let p = |n: &str| data.join(n).to_str().unwrap().to_string();
    vec![
        "--events".into(),
        p("events.csv"),
        "--toxicity".into(),
        p("toxicity.csv"),
        "--terms".into(),
        p("terms.txt"),
        "--out".into(),
        out.to_str().unwrap().into(),
        "--max-lag".into(),
        "5".into(),
        "-q".into(),
    ]
}

fn run(cmd: &str, args: &[String], extra: &[&str]) -> Output {
    let mut all: Vec<&str> = vec![cmd];
    all.extend(args.iter().map(String::as_str));
    all.extend(extra);
    polarscope(&all)
}

fn report(out: &Path) -> RunReport {
    RunReport::read(&out.join("report.json")).unwrap()
}

fn stage_status(r: &RunReport, name: &str) -> String {
    r.stage(name).map_or("absent".into(), |s| s.status.clone())
}

/// Every output file except the report, by relative path.
fn outputs(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else if path.file_name().unwrap() != "report.json" {
                files.insert(path.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&path).unwrap());
            }
        }
    }
    files
}

#[test]
fn full_run_writes_every_output() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synth(tmp.path());
    let out = tmp.path().join("run");
    let res = run("run", &run_args(&data, &out), &[]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    for f in [
        "users.csv",
        "windows.csv",
        "scree.csv",
        "assignment.csv",
        "clusters.csv",
        "granger.csv",
        "granger_lags.csv",
        "mann_whitney.csv",
        "log_odds.csv",
        "series/pair_C1_C2.csv",
        "series/toxicity_C1.csv",
        "cache/decompositions.bin",
        "cache/embedding.bin",
    ] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let r = report(&out);
    assert_eq!(r.status, "ok");
    assert_eq!(r.counts.clusters, Some(3));
    assert!(r.flags.numeric_failures.is_empty());
    assert!(!out.join(".polarscope.lock").exists());
}

#[test]
fn second_run_is_cached_and_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synth(tmp.path());
    let out = tmp.path().join("run");
    let args = run_args(&data, &out);
    assert!(run("run", &args, &[]).status.success());
    let first = outputs(&out);
    assert!(run("run", &args, &[]).status.success());
    let r = report(&out);
    for stage in ["embed", "cluster", "series", "stats"] {
        assert_eq!(stage_status(&r, stage), "cached", "{stage}");
    }
    assert_eq!(first, outputs(&out));
}

#[test]
fn changing_tau_reruns_only_downstream_stages() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synth(tmp.path());
    let out = tmp.path().join("run");
    let args = run_args(&data, &out);
    assert!(run("run", &args, &[]).status.success());
    assert!(run("run", &args, &["--tau", "0.5"]).status.success());
    let r = report(&out);
    assert_eq!(stage_status(&r, "embed"), "cached");
    for stage in ["cluster", "series", "stats"] {
        assert_eq!(stage_status(&r, stage), "ran", "{stage}");
    }

    assert!(run("run", &args, &["--tau", "0.5", "--alpha", "0.01"]).status.success());
    let r = report(&out);
    for stage in ["embed", "cluster", "series"] {
        assert_eq!(stage_status(&r, stage), "cached", "{stage}");
    }
    assert_eq!(stage_status(&r, "stats"), "ran");
}

#[test]
fn fresh_and_cached_embeddings_agree_after_a_window_change() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synth(tmp.path());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(run("run", &run_args(&data, &a), &["--kwin", "10"]).status.success());
    assert!(run("run", &run_args(&data, &a), &[]).status.success());
    assert_eq!(stage_status(&report(&a), "embed"), "ran");
    assert!(run("run", &run_args(&data, &b), &[]).status.success());
    assert_eq!(outputs(&a), outputs(&b));
}

#[test]
fn synth_is_byte_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let a = synth(&tmp.path().join("a"));
    let b = synth(&tmp.path().join("b"));
    for f in ["events.csv", "toxicity.csv", "terms.txt", "truth.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let c = tmp.path().join("c");
    let scenario = tmp.path().join("a/scenario.toml");
    let out = polarscope(&["synth", "--scenario", scenario.to_str().unwrap(), "--out", c.to_str().unwrap(), "--seed", "4"]);
    assert!(out.status.success());
    assert_ne!(std::fs::read(a.join("events.csv")).unwrap(), std::fs::read(c.join("events.csv")).unwrap());
}

#[test]
fn invalid_configuration_exits_2_and_lists_every_problem() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let res = polarscope(&["run", "--out", out.to_str().unwrap(), "--ksample", "40", "--alpha", "2", "-q"]);
    assert_eq!(res.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&res.stderr);
    for field in ["events", "k_sample", "alpha"] {
        assert!(stderr.contains(field), "{field} not reported: {stderr}");
    }
    let r = report(&out);
    assert_eq!(r.status, "failed");
    assert_eq!(r.error.unwrap().exit_code, 2);
}

#[test]
fn missing_input_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let missing = tmp.path().join("nope.csv");
    let res = polarscope(&["ingest", "--events", missing.to_str().unwrap(), "--out", out.to_str().unwrap(), "-q"]);
    assert_eq!(res.status.code(), Some(3));
    let r = report(&out);
    assert_eq!(r.error.unwrap().stage, "ingest");
}

#[test]
fn missing_toxicity_halts_at_the_join() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synth(tmp.path());
    let out = tmp.path().join("run");
    let events = data.join("events.csv");
    let res = polarscope(&["series", "--events", events.to_str().unwrap(), "--out", out.to_str().unwrap(), "-q"]);
    assert_eq!(res.status.code(), Some(2));
    let r = report(&out);
    assert_eq!(r.error.as_ref().unwrap().stage, "join_toxicity");
    assert_eq!(stage_status(&r, "cluster"), "ran");
    assert!(out.join("assignment.csv").is_file());
    assert!(!out.join("granger.csv").exists());
    assert!(r.warnings.iter().any(|w| w.contains("term")));
}

#[test]
fn partial_commands_stop_at_their_stage() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synth(tmp.path());
    let out = tmp.path().join("run");
    assert!(run("embed", &run_args(&data, &out), &[]).status.success());
    let r = report(&out);
    assert_eq!(stage_status(&r, "embed"), "ran");
    assert_eq!(stage_status(&r, "cluster"), "absent");
    assert!(out.join("scree.csv").is_file());
    assert!(!out.join("assignment.csv").exists());
}

#[test]
fn flags_override_file_which_overrides_preset() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synth(tmp.path());
    let out = tmp.path().join("run");
    let cfg = tmp.path().join("cfg.toml");
    std::fs::write(&cfg, "tau = 0.25\nmax_lag = 4\nmin_matches = 1\n").unwrap();
    let args = run_args(&data, &out);
    let res = run("ingest", &args, &["--preset", "ukraine", "--config", cfg.to_str().unwrap(), "--tau", "0.5"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let r = report(&out);
    assert_eq!(r.config.tau, 0.5);
    assert_eq!(r.config.min_matches, 1);
    assert_eq!(r.config.max_lag, 5);
    assert_eq!(r.config.clip, None);
}

#[test]
fn unknown_config_keys_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.toml");
    std::fs::write(&cfg, "taw = 3\n").unwrap();
    let out = tmp.path().join("run");
    let res = polarscope(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "-q"]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn report_command_prints_the_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synth(tmp.path());
    let out = tmp.path().join("run");
    assert!(run("run", &run_args(&data, &out), &[]).status.success());
    let res = polarscope(&["report", out.to_str().unwrap()]);
    assert!(res.status.success());
    let text = String::from_utf8_lossy(&res.stdout);
    assert!(text.contains("`run`: ok"), "{text}");
    let res = polarscope(&["report", out.to_str().unwrap(), "--json"]);
    let json: serde_json::Value = serde_json::from_slice(&res.stdout).unwrap();
    assert_eq!(json["status"], "ok");
}

#[test]
fn concurrent_run_on_the_same_directory_is_refused() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synth(tmp.path());
    let out = tmp.path().join("run");
    std::fs::create_dir_all(&out).unwrap();
    std::fs::write(out.join(".polarscope.lock"), "").unwrap();
    let res = run("ingest", &run_args(&data, &out), &[]);
    assert!(!res.status.success());
    assert!(out.join(".polarscope.lock").exists());
}

#[test]
fn header_only_event_file_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synth(tmp.path());
    let text = std::fs::read_to_string(data.join("events.csv")).unwrap();
    let empty = tmp.path().join("empty.csv");
    std::fs::write(&empty, format!("{}\n", text.lines().next().unwrap())).unwrap();
    let out = tmp.path().join("run");
    let res = polarscope(&["ingest", "--events", empty.to_str().unwrap(), "--out", out.to_str().unwrap(), "-q"]);
    assert_eq!(res.status.code(), Some(3));
}
