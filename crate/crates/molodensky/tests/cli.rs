use std::process::Command;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_molodensky"));
    c.env("RUST_LOG", "warn");
    c
}

#[test]
fn gen_mesh_writes_text_format() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cube.txt");
    let out = bin().args(["gen-mesh", "--shape", "cube", "--level", "1", "--out"]).arg(&path).output().unwrap();
    assert!(out.status.success());
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().next(), Some("26 48"));
}

#[test]
fn eigs_csv() {
    let out = bin().args(["eigs", "--level", "1", "--modes", "4"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "j,lambda_j");
    // Modes 0..=4.
    assert_eq!(rows.len(), 6);
    let l1: f64 = rows[2].split(',').nth(1).unwrap().parse().unwrap();
    assert!((l1 - 2.0).abs() < 0.2);
}

#[test]
fn run_writes_report_and_config_block() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "level=0\nmax_iter=2\n").unwrap();
    let mut data = Vec::new();
    for k in 0..2 {
        let csv = dir.path().join(format!("r{k}.csv"));
        let out = bin().args(["run", "--config"]).arg(&cfg).arg("--out").arg(&csv).output().unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let text = std::fs::read_to_string(&csv).unwrap();
        assert!(text.lines().any(|l| l == "# level=0"));
        assert!(text.lines().any(|l| l == "# theta0=2.6"));
        let rows: Vec<String> = text
            .lines()
            .filter(|l| !l.starts_with('#'))
            .skip(1)
            .map(|l| l.rsplit_once(',').unwrap().0.to_string())
            .collect();
        assert_eq!(rows.len(), 2);
        data.push(rows);
    }
    assert_eq!(data[0], data[1]);
}

#[test]
fn errors_exit_nonzero_with_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "theta0=3\nbogus=1\n").unwrap();
    let out = bin().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    let lines: Vec<&str> = err.lines().filter(|l| l.starts_with("error:")).collect();
    assert_eq!(lines.len(), 1, "{err}");
    assert!(lines[0].contains("line 2") && lines[0].contains("bogus"), "{err}");

    let out = bin().args(["gen-mesh", "--level", "9"]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8(out.stderr).unwrap().contains("exceeds"));
}
