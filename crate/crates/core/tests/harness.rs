use std::path::Path;

use mmcoop::harness::{
    emit_outputs, run_baseline_comparison, run_scenario, steady_state_error, summarize, summarize_paired, write_csv,
    ControllerKind, Mode, RunSummary, ScenarioConfig, TimeSeries,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn csv_bytes(series: &TimeSeries) -> Vec<u8> {
    let mut out = Vec::new();
    write_csv(series, &mut out).unwrap();
    out
}

fn configs_dir() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs"))
}

#[test]
fn shipped_configs_match_builtin_scenarios() {
    let weak = ScenarioConfig::load(configs_dir().join("table2_weak.json")).unwrap();
    assert_eq!(weak, ScenarioConfig::table2());
    let complete = ScenarioConfig::load(configs_dir().join("table2_complete.json")).unwrap();
    assert_eq!(complete, ScenarioConfig::table2_complete());
    let mut embodied = ScenarioConfig::load(configs_dir().join("table2_embodied.json")).unwrap();
    assert!(embodied.model.as_ref().unwrap().exists());
    embodied.model = None;
    assert_eq!(embodied, ScenarioConfig::table2_embodied());
}

#[test]
fn same_seed_same_bytes_and_different_seed_differs() {
    let cfg = ScenarioConfig::table2().with_seed(11);
    let a = csv_bytes(&run_scenario(&cfg).unwrap());
    let b = csv_bytes(&run_scenario(&cfg).unwrap());
    assert_eq!(a, b);
    let c = csv_bytes(&run_scenario(&cfg.with_seed(12)).unwrap());
    assert_ne!(a, c);
}

#[test]
fn record_count_and_csv_rows() {
    let cfg = ScenarioConfig::table2();
    let series = run_scenario(&cfg).unwrap();
    assert_eq!(series.records.len(), 1501);
    let text = String::from_utf8(csv_bytes(&series)).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,robot,ex,ey,hx,hy,href_x,href_y,err_norm,ux,uy");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 1501 * 5);
    assert_eq!(rows.iter().filter(|r| r.split(',').nth(1) == Some("0")).count(), 1501);
}

#[test]
fn outputs_round_trip_and_empty_series() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ScenarioConfig::table2();
    let series = run_scenario(&cfg).unwrap();
    let summary = summarize(&series, &cfg.metrics);
    let files = emit_outputs(&series, &summary, dir.path()).unwrap();
    assert!(files.iter().all(|f| f.exists()));
    let back: RunSummary = serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(back, summary);

    let empty = TimeSeries::empty(Mode::Planar, 5, 0.04, 40.0);
    let empty_summary = summarize(&empty, &cfg.metrics);
    assert_eq!(empty_summary.convergence_time, None);
    assert_eq!(empty_summary.steady_state_error, None);
    assert_eq!(empty_summary.max_error, None);
    let out = dir.path().join("empty");
    emit_outputs(&empty, &empty_summary, &out).unwrap();
    let csv = std::fs::read_to_string(out.join("timeseries.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1);
}

#[test]
fn undisturbed_start_stays_at_equilibrium() {
    for ctrl in [ControllerKind::Proposed, ControllerKind::LeaderFollower] {
        let cfg = ScenarioConfig::table2().without_disturbance().with_controller(ctrl);
        let series = run_scenario(&cfg).unwrap();
        let worst = series.max_errors().fold(0.0, f64::max);
        assert!(worst < 1e-9, "{ctrl:?}: {worst}");
    }
}

#[test]
fn uncorrected_errors_grow_well_beyond_steady_state() {
    let seed = 5;
    let controlled = run_scenario(&ScenarioConfig::table2().with_seed(seed)).unwrap();
    let steady = steady_state_error(&controlled, 5.0).unwrap();
    let open = run_scenario(&ScenarioConfig::table2().with_seed(seed).with_controller(ControllerKind::None)).unwrap();
    let at_onset = open.records.iter().find(|r| (r.t - 40.0).abs() < 1e-9).unwrap().max_error;
    assert!(at_onset > 5.0 * steady, "{at_onset} vs {steady}");
}

#[test]
fn correction_reduces_max_and_windowed_error() {
    let cfg = ScenarioConfig::table2().with_seed(3);
    let on = run_scenario(&cfg).unwrap();
    let off = run_scenario(&cfg.clone().with_controller(ControllerKind::None)).unwrap();
    let s = summarize_paired(&on, &off, &cfg.metrics);
    let red = s.reduction.unwrap();
    assert!(red.max_pct.iter().all(|p| *p > 0.0), "{red:?}");
    assert!(red.mean_pct.iter().all(|p| *p > 0.0), "{red:?}");
    let off_s = summarize(&off, &cfg.metrics);
    assert!(s.window_mean_error.unwrap() < off_s.window_mean_error.unwrap());
}

#[test]
fn steady_state_of_half_normal_noise() {
    let sigma: f64 = 0.3;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let normal = Normal::new(0.0, sigma).unwrap();
    let norms: Vec<f64> = (0..1000).map(|_| normal.sample(&mut rng).abs()).collect();
    let series = TimeSeries::from_error_norms(0.04, 0.0, &norms);
    let window = 500.0 * 0.04;
    let got = steady_state_error(&series, window - 1e-6).unwrap();
    let expected = sigma * (2.0 / std::f64::consts::PI).sqrt();
    assert!((got - expected).abs() < 0.05 * expected, "{got} vs {expected}");
}

#[test]
fn comparison_uses_zero_delay_and_matched_seeds() {
    let cmp = run_baseline_comparison(&ScenarioConfig::table2().with_seed(4)).unwrap();
    assert!(cmp.proposed.convergence_time.unwrap() < cmp.leader_follower.convergence_time.unwrap());
    let proposed_max = cmp.proposed.axis_errors.as_ref().unwrap().max.clone();
    assert!(proposed_max.iter().all(|m| m.is_finite()));
}

#[test]
fn embodied_scenario_converges_and_is_deterministic() {
    let cfg = ScenarioConfig::table2_embodied();
    let a = run_scenario(&cfg).unwrap();
    assert_eq!(a.dim, 6);
    assert!(a.warnings.is_empty());
    let s = summarize(&a, &cfg.metrics);
    assert!(s.convergence_time.is_some());
    let off = run_scenario(&cfg.clone().with_controller(ControllerKind::None)).unwrap();
    assert!(s.steady_state_error.unwrap() < summarize(&off, &cfg.metrics).steady_state_error.unwrap());
    let text = String::from_utf8(csv_bytes(&a)).unwrap();
    assert!(text.starts_with("t,robot,ex,ey,ez,ewx,ewy,ewz,hfx,hfy,hfz,htx,hty,htz,"));
    assert_eq!(csv_bytes(&run_scenario(&cfg).unwrap()), text.into_bytes());
}

#[test]
fn uncertified_gains_warn() {
    let series = run_scenario(&ScenarioConfig::table2().with_delay_bound(5.0)).unwrap();
    assert_eq!(series.warnings.len(), 1);
    assert!(run_scenario(&ScenarioConfig::table2()).unwrap().warnings.is_empty());
}

#[test]
fn lyapunov_recording_decays_after_onset() {
    let mut cfg = ScenarioConfig::table2().with_seed(2);
    cfg.record_lyapunov = true;
    let series = run_scenario(&cfg).unwrap();
    let v: Vec<f64> = series.records.iter().filter(|r| r.t >= 40.0 + 1e-9).map(|r| r.lyapunov.unwrap().v).collect();
    assert!(v.len() > 400);
    assert!(v.last().unwrap() < &v[0]);
}
