use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn grbsim(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_grbsim"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("spawn grbsim")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn goldens_then_run_each_config() {
    let dir = tempfile::tempdir().unwrap();
    let o = grbsim(&["goldens", "--out-dir", "g"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 8);

    for fig in ["fig1", "fig2", "fig3", "fig4"] {
        let conf = format!("g/{fig}.conf");
        let o = grbsim(&["run", "--config", &conf], dir.path());
        assert!(o.status.success(), "{fig}: {}", stderr(&o));
        let text = stdout(&o);
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with("scenario_id,protocol,nodes,"));
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row[0], fig);
        assert_eq!(row[1], "grb");
        assert_eq!(row[9], "1", "{fig} pdr");
    }
}

#[test]
fn protocol_override_and_csv_file() {
    let dir = tempfile::tempdir().unwrap();
    assert!(grbsim(&["goldens", "--out-dir", "."], dir.path()).status.success());
    let o = grbsim(
        &[
            "run",
            "--config",
            "fig1.conf",
            "--protocol",
            "greedy",
            "--seed",
            "4",
            "--out",
            "r.csv",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).is_empty());
    let csv = fs::read_to_string(dir.path().join("r.csv")).unwrap();
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[1], "greedy");
    assert_eq!(row[6], "4");
    assert_eq!(row[9], "0");
}

#[test]
fn trace_output_is_written() {
    let dir = tempfile::tempdir().unwrap();
    assert!(grbsim(&["goldens", "--out-dir", "."], dir.path()).status.success());
    let conf = fs::read_to_string(dir.path().join("fig2.conf")).unwrap();
    fs::write(dir.path().join("t.conf"), format!("{conf}trace_output = t.trace\n")).unwrap();
    let o = grbsim(&["run", "--config", "t.conf"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let trace = fs::read_to_string(dir.path().join("t.trace")).unwrap();
    assert!(trace.lines().any(|l| l.contains(" rx backtrack ")));
}

#[test]
fn planarize_reports_pathologies() {
    let dir = tempfile::tempdir().unwrap();
    assert!(grbsim(&["goldens", "--out-dir", "."], dir.path()).status.success());

    let o = grbsim(&["planarize", "--topology", "fig2.topo", "--method", "gg"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let line = stdout(&o);
    assert!(!line.contains("unidirectional=0"), "{line}");

    let o = grbsim(
        &["planarize", "--topology", "fig4.topo", "--method", "gg", "--report"],
        dir.path(),
    );
    assert!(o.status.success());
    let report = stdout(&o);
    assert!(report.contains("crossing edge pairs: "), "{report}");
    assert!(!report.contains("crossing edge pairs: 0"), "{report}");

    let o = grbsim(
        &["planarize", "--topology", "fig3.topo", "--method", "rng", "--report"],
        dir.path(),
    );
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("method: rng"));
}

#[test]
fn matrix_writes_runs_and_aggregates() {
    let dir = tempfile::tempdir().unwrap();
    let o = grbsim(
        &[
            "matrix",
            "--preset",
            "table3-50-densityrow",
            "--seeds",
            "1,2",
            "--out",
            "m.csv",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("m.csv")).unwrap();
    let seeds: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').nth(6).unwrap()).collect();
    assert_eq!(seeds, ["1", "2", "mean", "std"]);
}

#[test]
fn errors_exit_nonzero_with_message() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.conf"), "protocol = grb\npause_time = -1\n").unwrap();
    let cases: [&[&str]; 4] = [
        &["run", "--config", "missing.conf"],
        &["run", "--config", "bad.conf"],
        &["matrix", "--preset", "no-such-preset", "--seeds", "1"],
        &["planarize", "--topology", "missing.topo"],
    ];
    for args in cases {
        let o = grbsim(args, dir.path());
        assert!(!o.status.success(), "{args:?}");
        assert!(stderr(&o).starts_with("error: "), "{args:?}: {}", stderr(&o));
    }
}
