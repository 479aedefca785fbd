use polarscope::config::RunConfig;
use polarscope::pipeline::{run_pipeline, Stage};
use polarscope::synth::{generate_to_dir, Coupling, ScenarioSpec};

fn granger_significant(spec: &ScenarioSpec, window_days: u32) -> (usize, usize) {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    generate_to_dir(spec, &data).unwrap();
    let cfg = RunConfig {
        events: Some(data.join("events.csv")),
        toxicity: Some(data.join("toxicity.csv")),
        terms: Some(data.join("terms.txt")),
        out_dir: dir.path().join("run"),
        max_lag: 7,
        window_days,
        ..RunConfig::default()
    };
    let (report, art) = run_pipeline(&cfg, Stage::Stats, "test");
    art.unwrap();
    let stats = report.stats.unwrap();
    (stats.significant, stats.tests)
}

fn scenario(seed: u64) -> ScenarioSpec {
    ScenarioSpec {
        seed,
        clusters: 3,
        users_per_cluster: 300,
        days: 120,
        ..ScenarioSpec::default()
    }
}

#[test]
fn null_scenario_stays_within_the_familywise_rate() {
    // Bonferroni keeps the expected number of runs with any rejection at or below 0.05 per run.
    let runs = 10;
    let flagged = (1..=runs).filter(|&s| granger_significant(&scenario(s), 7).0 > 0).count();
    assert!(flagged <= 1, "{flagged} of {runs} null runs had a significant Granger test");
}

#[test]
fn null_scenario_with_daily_windows_stays_within_the_familywise_rate() {
    let runs = 10;
    let flagged = (1..=runs).filter(|&s| granger_significant(&scenario(s), 1).0 > 0).count();
    assert!(flagged <= 1, "{flagged} of {runs} null runs had a significant Granger test");
}

#[test]
fn planted_toxicity_coupling_is_found_end_to_end() {
    let mut spec = scenario(11);
    spec.toxicity.noise = 0.08;
    spec.coupling = vec![Coupling {
        source: 0,
        target: 1,
        lag: 3,
        coefficient: 0.9,
    }];
    let (significant, tests) = granger_significant(&spec, 7);
    assert!(tests > 0);
    assert!(significant > 0);
}
