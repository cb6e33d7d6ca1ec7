use std::process::Command;

fn ddlr() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ddlr"))
}

#[test]
fn json_report_on_generated_problem() {
    let out = ddlr()
        .args(["--gen", "lap2d:20,20", "--np", "4", "--rank", "4", "--csolve", "direct"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["n"], 400);
    assert_eq!(v["solve"]["converged"], true);
    assert!(v["true_residual"].as_f64().unwrap() < 1e-5);
}

#[test]
fn csv_report_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.csv");
    let status = ddlr()
        .args(["--gen", "lap2d:16,16", "--prec", "ras", "--report", "csv", "--out"])
        .arg(&path)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("matrix,np,rk,nz,its,p_t,i_t"));
    assert_eq!(lines.next().unwrap().split(',').count(), 7);
}

#[test]
fn matrix_market_input() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.mtx");
    let n = 50;
    let mut text = format!("%%MatrixMarket matrix coordinate real symmetric\n{n} {n} {}\n", 2 * n - 1);
    for i in 1..=n {
        text += &format!("{i} {i} 2.5\n");
        if i > 1 {
            text += &format!("{i} {} -1\n", i - 1);
        }
    }
    std::fs::write(&path, text).unwrap();
    let out = ddlr().arg("--matrix").arg(&path).args(["--np", "2", "--rank", "1"]).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["n"], n);
}

#[test]
fn bad_arguments_exit_with_two() {
    let out = ddlr().args(["--gen", "lap2d:8,8", "--alpha", "-1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = ddlr().args(["--prec", "nonsense"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
