//! Scenario bundles on disk: round trips and the errors bad files produce.

use std::fs;
use std::path::{Path, PathBuf};

use h2grid::io::{load_bundle, read_schedule, write_bundle, write_schedule, IoError};
use h2grid::{run_rolling, synth, Mode, RollingOptions, Scenario};

fn data_dir(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn copy_of(s: &Scenario) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    write_bundle(dir.path(), s).unwrap();
    dir
}

fn edit(path: &Path, f: impl FnOnce(String) -> String) {
    let text = fs::read_to_string(path).unwrap();
    fs::write(path, f(text)).unwrap();
}

#[test]
fn written_bundles_read_back_identically() {
    for s in [synth::tutorial(), synth::case33_24()] {
        let dir = copy_of(&s);
        assert_eq!(load_bundle(dir.path()).unwrap(), s, "{}", s.name);
    }
}

#[test]
fn shipped_bundles_match_the_built_in_scenarios() {
    assert_eq!(load_bundle(&data_dir("tutorial")).unwrap(), synth::tutorial());
    assert_eq!(load_bundle(&data_dir("case33_24")).unwrap(), synth::case33_24());
}

#[test]
fn a_short_series_is_reported_with_its_file() {
    let dir = copy_of(&synth::tutorial());
    let f = dir.path().join("dn_load.csv");
    edit(&f, |t| t.lines().take(2).map(|l| format!("{l}\n")).collect());
    match load_bundle(dir.path()).unwrap_err() {
        IoError::Length { file, expected, got, .. } => {
            assert!(file.ends_with("dn_load.csv"));
            assert_eq!((expected, got), (2, 1));
        }
        other => panic!("unexpected {other}"),
    }
}

#[test]
fn a_truncated_row_is_reported_with_its_line() {
    let dir = copy_of(&synth::tutorial());
    let f = dir.path().join("dn_load.csv");
    edit(&f, |t| {
        let mut lines: Vec<&str> = t.lines().collect();
        let last = lines.pop().unwrap();
        lines.push(&last[..last.len() / 2]);
        lines.join("\n")
    });
    let err = load_bundle(dir.path()).unwrap_err();
    match &err {
        IoError::Parse { file, line, .. } => {
            assert!(file.ends_with("dn_load.csv"));
            assert_eq!(*line, 3);
        }
        other => panic!("unexpected {other}"),
    }
    let rec = err.to_record();
    assert_eq!(rec["line"], 3);
    assert!(rec["file"].as_str().unwrap().ends_with("dn_load.csv"));
}

#[test]
fn a_negative_resistance_fails_validation() {
    let dir = copy_of(&synth::tutorial());
    let f = dir.path().join("distribution.json");
    edit(&f, |t| t.replacen("\"resistance\": 0.01", "\"resistance\": -0.01", 1));
    match load_bundle(dir.path()).unwrap_err() {
        IoError::Invalid(list) => assert!(list.iter().any(|m| m.contains("1-2") && m.contains("impedance")), "{list:?}"),
        other => panic!("unexpected {other}"),
    }
}

#[test]
fn a_column_in_the_wrong_unit_is_rejected() {
    let dir = copy_of(&synth::tutorial());
    let f = dir.path().join("dn_load.csv");
    edit(&f, |t| t.replacen("p_2 [MW]", "p_2 [kW]", 1));
    match load_bundle(dir.path()).unwrap_err() {
        IoError::Unit { expected, found, .. } => assert_eq!((expected.as_str(), found.as_str()), ("MW", "kW")),
        other => panic!("unexpected {other}"),
    }
}

#[test]
fn broken_json_points_at_the_spot() {
    let dir = copy_of(&synth::tutorial());
    let f = dir.path().join("fleet.json");
    edit(&f, |t| t.replacen('{', "{,", 1));
    match load_bundle(dir.path()).unwrap_err() {
        IoError::Parse { file, line, column, .. } => {
            assert!(file.ends_with("fleet.json"));
            assert_eq!((line, column), (1, 2));
        }
        other => panic!("unexpected {other}"),
    }
}

#[test]
fn a_missing_file_is_an_io_error() {
    let dir = copy_of(&synth::tutorial());
    fs::remove_file(dir.path().join("wind.csv")).unwrap();
    assert!(matches!(load_bundle(dir.path()).unwrap_err(), IoError::Io { .. }));
}

#[test]
fn schedules_read_back_identically() {
    let s = synth::tutorial();
    let opts = RollingOptions {
        mode: Mode::Perfect,
        ..RollingOptions::default()
    };
    let run = run_rolling(&s, &opts).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_schedule(dir.path(), &run.solution).unwrap();
    assert_eq!(read_schedule(&dir.path().join("schedule.json")).unwrap(), run.solution);
    let csv = fs::read_to_string(dir.path().join("schedule.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + s.horizon());
}
