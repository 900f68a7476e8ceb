//! Configuration loading, studies and result files.

use std::fs;
use std::path::Path;

use spinctrl::dynamics::Prism;
use spinctrl::experiments::persist::{run_id, write_run, write_sweep};
use spinctrl::experiments::{
    gamma_sweep, grid_initializers, load_config, parse_config, run_optimization,
};
use spinctrl::Error;

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut entries: Vec<_> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    entries.sort();
    for path in entries {
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        if path.is_dir() {
            out.extend(read_dir_sorted(&path).into_iter().map(|(n, b)| (format!("{name}/{n}"), b)));
        } else {
            out.push((name, fs::read(&path).unwrap()));
        }
    }
    out
}

#[test]
fn config_file_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    fs::write(&path, r#"{"p": 2, "filter": {"gamma": "5 /us"}, "prism": {"upper": ["6 uT", 6, "0.007 mT"]}}"#).unwrap();
    let cfg = load_config(Some(&path), &["filter.gamma=60".into()]).unwrap();
    assert_eq!(cfg.p, 2);
    assert_eq!(cfg.filter.gamma, 60.0);
    assert_eq!(cfg.prism.upper, [6.0, 6.0, 7.0]);
    assert_eq!(cfg.hyperfine_table().len(), 2);

    let missing = load_config(Some(&dir.path().join("absent.json")), &[]).unwrap_err();
    assert!(matches!(missing, Error::Io { .. }));
}

#[test]
fn parse_errors_carry_a_position() {
    let err = parse_config("{\n  \"p\": 1,\n  \"steps\": ,\n}", &[]).unwrap_err();
    let text = err.to_string();
    assert!(text.contains("line 3"), "{text}");
}

#[test]
fn bad_unit_suffix_is_rejected_with_the_key() {
    let err = parse_config(r#"{"t_final": "0.5 kg"}"#, &[]).unwrap_err();
    assert!(matches!(err, Error::InvalidConfig { ref key, .. } if key == "t_final"), "{err}");
}

#[test]
fn resolved_config_replays_identically() {
    let cfg = parse_config("{}", &["filter.gamma=2".into(), "steps=100".into()]).unwrap();
    let reloaded = parse_config(&cfg.to_json_pretty(), &[]).unwrap();
    assert_eq!(cfg, reloaded);
    assert_eq!(run_id(&cfg), run_id(&reloaded));
    let a = run_optimization(&cfg).unwrap();
    let b = run_optimization(&reloaded).unwrap();
    assert_eq!(a.report, b.report);
}

#[test]
fn identical_configs_write_identical_files() {
    let cfg = parse_config("{}", &["steps=100".into(), "optimizer=gpm".into()]).unwrap();
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    write_run(d1.path(), &run_optimization(&cfg).unwrap()).unwrap();
    write_run(d2.path(), &run_optimization(&cfg).unwrap()).unwrap();
    let (a, b) = (read_dir_sorted(d1.path()), read_dir_sorted(d2.path()));
    let names: Vec<_> = a.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(
        names,
        ["config.json", "control.csv", "cost_history.csv", "field.csv", "report.json", "switching.csv"]
    );
    assert_eq!(a, b);
    let control = String::from_utf8(a[1].1.clone()).unwrap();
    assert!(control.starts_with("t,u_x,u_y,u_z\n0,"));
    assert_eq!(control.lines().count(), 101);
}

#[test]
fn single_gamma_sweep_reproduces_the_standalone_run() {
    let cfg = parse_config("{}", &["filter.gamma=5".into()]).unwrap();
    let sweep = gamma_sweep(&cfg, &[5.0]).unwrap();
    let alone = run_optimization(&cfg).unwrap();
    assert_eq!(sweep.rows.len(), 2);
    assert_eq!(sweep.rows[0].cost.to_bits(), alone.report.final_cost.value().to_bits());
    assert_eq!(sweep.runs[0].report, alone.report);
    assert_eq!(sweep.baseline().gamma, None);

    let dir = tempfile::tempdir().unwrap();
    write_sweep(dir.path(), &cfg, &sweep).unwrap();
    let table = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let lines: Vec<_> = table.lines().collect();
    assert_eq!(lines[0], "gamma,J,status,iterations");
    assert!(lines[1].starts_with("5,"));
    assert!(lines[2].starts_with("none,"));
}

#[test]
fn grid_initializers_match_the_formula() {
    let prism = Prism::new([3.0, 3.0, -2.0], [6.0, 6.0, 2.0]).unwrap();
    let grid = grid_initializers([6.0, 6.0, -1.0], 0.5, &prism);
    assert_eq!(grid.len(), 27);
    let at = |i, j, k| grid.iter().find(|g| g.index == [i, j, k]).unwrap().value;
    assert_eq!(at(1, 1, 1), [6.0, 6.0, -1.0]);
    assert_eq!(at(2, 2, 2), [5.5, 5.5, -1.5]);
    // Clipped at the upper face.
    assert_eq!(at(0, 0, 0), [6.0, 6.0, -0.5]);
}
