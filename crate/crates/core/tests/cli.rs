use std::path::Path;
use std::process::{Command, Output};

fn mapber(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mapber"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn curves_csv_layout() {
    let o = mapber(&["curves", "--delta", "1", "--snr-db", "4:8:2"]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "snr_db,mfb,replica,theta0,regime");
    assert_eq!(lines.len(), 4);
    for line in &lines[1..] {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells.len(), 5);
        let v: Vec<f64> = cells[1..4].iter().map(|c| c.parse().unwrap()).collect();
        assert!(v[2] >= v[1] && v[1] >= v[0], "{line}");
        assert_eq!(cells[4], "UniqueCritical");
    }
    assert!(!text.contains('\r'));
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let path = dir.path().join(name);
        let o = mapber(&[
            "simulate",
            "--snr-db",
            "6,10",
            "--n",
            "8",
            "--trials",
            "200",
            "--seed",
            "11",
            "--detectors",
            "map,bro,mf",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert_eq!(
            o.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&o.stderr)
        );
        std::fs::read(path).unwrap()
    };
    let a = run("a.csv");
    assert_eq!(a, run("b.csv"));
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("snr_db,detector,n,trials,ber_hat,ci_lo,ci_hi\n"));
    assert_eq!(text.lines().count(), 7);
    // Only the committed file remains; the temporary is gone.
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 2);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(mapber(&["simulate", "--n", "8"]).status.code(), Some(2));
    assert_eq!(mapber(&["curves", "--delta", "-1"]).status.code(), Some(2));
    assert_eq!(
        mapber(&["curves", "--format", "xml"]).status.code(),
        Some(2)
    );
    assert_eq!(mapber(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(
        mapber(&["simulate", "--seed", "1", "--n", "30", "--detectors", "map"])
            .status
            .code(),
        Some(2)
    );
    let o = mapber(&[
        "curves",
        "--snr-db",
        "10",
        "--out",
        "/nonexistent/dir/x.csv",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!Path::new("/nonexistent/dir/x.csv").exists());
}

#[test]
fn json_has_schema_and_command() {
    let o = mapber(&["curves", "--snr-db", "10", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["schema"], 1);
    assert_eq!(v["command"], "curves");
    assert_eq!(v["rows"].as_array().unwrap().len(), 1);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# run\ndelta = 2\nsnr_db = 4,6\n").unwrap();
    let from_file = stdout(&mapber(&["curves", "--config", cfg.to_str().unwrap()]));
    assert_eq!(from_file.lines().count(), 3);
    let overridden = stdout(&mapber(&[
        "curves",
        "--config",
        cfg.to_str().unwrap(),
        "--snr-db",
        "6",
    ]));
    assert_eq!(overridden.lines().count(), 2);
    assert_eq!(overridden.lines().nth(1), from_file.lines().nth(2));
    std::fs::write(&cfg, "bogus = 1\n").unwrap();
    assert_eq!(
        mapber(&["curves", "--config", cfg.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn verify_props_single_check() {
    let o = mapber(&["verify-props", "--check", "H-sqrt3"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(
        text.starts_with("H-sqrt3: measured 0.925082 vs threshold 0.9251 PASS"),
        "{text}"
    );
    assert_eq!(
        mapber(&["verify-props", "--check", "nope"]).status.code(),
        Some(2)
    );
}

#[test]
fn ao_sample_rows() {
    let o = mapber(&[
        "ao-sample",
        "--sigma2",
        "0.1",
        "--n",
        "400",
        "--trials",
        "3",
        "--seed",
        "2",
        "--alpha-step",
        "0.5",
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("trial,alpha,ao_value,ell_value"));
    // alpha in {0.5, 1, 1.5, 2} for each of 3 trials.
    assert_eq!(lines.count(), 12);
    assert_eq!(
        mapber(&["ao-sample", "--snr-db", "4,8", "--seed", "1"])
            .status
            .code(),
        Some(2)
    );
}
