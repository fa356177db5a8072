use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_lidar-cbf");

fn cli(args: &[&str], cwd: &Path) -> Output {
    Command::new(BIN)
        .args(args)
        .current_dir(cwd)
        .env_remove("LIDAR_CBF_OUT")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const TRAJ: &str = "t,x,y,ux,uy,h_hat,true_sdf,constraint_active
0,0.0,0.0,0.5,0,1,1,0
0.02,0.01,0.0,0.5,0,1,1,0
0.04,0.02,0.0,0.5,0,1,1,1
";

#[test]
fn start_inside_obstacle_fails_offline() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("bad.toml"),
        "goal = [2.8, 1.0]\n[[start]]\npoint = [1.6, 1.0]\n[[obstacle]]\nkind = \"circle\"\ncenter = [1.6, 1.0]\nradius = 0.3\n",
    )
    .unwrap();
    let out = cli(&["run", "--scenario", "bad.toml", "--mode", "offline", "--output-dir", "out"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("start outside learned safe set"), "{}", stderr(&out));
}

#[test]
fn overrides_reach_the_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(
        &[
            "run", "--scenario", "single_circle", "--mode", "ground-truth",
            "--override", "control.gamma=2.0", "--output-dir", "out",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["control"]["gamma"], 2.0);
    assert!(dir.path().join("out/case_00/ground_truth.csv").exists());
}

#[test]
fn output_dir_defaults_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(BIN)
        .args(["run", "--scenario", "single_circle", "--mode", "ground-truth"])
        .current_dir(dir.path())
        .env("LIDAR_CBF_OUT", "from_env")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(dir.path().join("from_env/summary.json").exists());
}

#[test]
fn eval_of_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("a.csv"), TRAJ).unwrap();
    std::fs::write(dir.path().join("b.csv"), TRAJ).unwrap();
    let out = cli(&["eval", "a.csv", "b.csv", "--case", "07"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("R = 1.000000"), "{text}");
    assert!(text.contains("F = 0.000000"), "{text}");
    cli(&["eval", "a.csv", "b.csv"], dir.path());
    let report = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    let lines: Vec<&str> = report.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("07,a,b,"));
}

#[test]
fn eval_rejects_a_single_row() {
    let dir = tempfile::tempdir().unwrap();
    let one: String = TRAJ.lines().take(2).map(|l| format!("{l}\n")).collect();
    std::fs::write(dir.path().join("a.csv"), TRAJ).unwrap();
    std::fs::write(dir.path().join("one.csv"), one).unwrap();
    let out = cli(&["eval", "a.csv", "one.csv"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("at least 2 points"), "{}", stderr(&out));
}

#[test]
fn eval_reports_the_malformed_row() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("a.csv"), TRAJ).unwrap();
    std::fs::write(dir.path().join("bad.csv"), TRAJ.replace("0.02,0.01,0.0", "0.02,oops,0.0")).unwrap();
    let out = cli(&["eval", "a.csv", "bad.csv"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains("row 3") && err.contains("oops"), "{err}");
}

#[test]
fn table_of_an_empty_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(&["table", "."], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = std::fs::read_to_string(dir.path().join("table.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1, "{csv}");
}

#[test]
fn table_of_one_case_with_a_missing_mode() {
    let dir = tempfile::tempdir().unwrap();
    let case = dir.path().join("case_00");
    std::fs::create_dir(&case).unwrap();
    std::fs::write(case.join("offline.csv"), TRAJ).unwrap();
    std::fs::write(case.join("ground_truth.csv"), TRAJ).unwrap();
    let out = cli(&["table", "."], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = std::fs::read_to_string(dir.path().join("table.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 3, "{csv}");
    assert!(rows[0].starts_with("case,"));
    assert!(rows[1].contains("absent"));
    assert!(rows[2].starts_with("Average"));
}

#[test]
fn sdf_dump() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(&["sdf", "--scenario", "single_circle", "--spacing", "0.1", "--output", "g.csv"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = std::fs::read_to_string(dir.path().join("g.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("x,y,sdf"));
    assert_eq!(csv.lines().count(), 1 + 33 * 21);
}

#[test]
fn full_run_of_one_case() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(&["run", "--scenario", "single_circle", "--seed", "7", "--output-dir", "out"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let case = dir.path().join("out/case_00");
    for mode in ["ground_truth", "offline", "online_aggregate", "online_instant"] {
        assert!(case.join(format!("{mode}.csv")).exists(), "{mode}");
    }
    for file in ["online_aggregate_levelset.csv", "online_instant_levelset.csv"] {
        assert!(case.join(file).exists(), "{file}");
    }
    for file in ["offline_levelset.csv", "offline_model.csv", "offline_training_set.csv", "metrics.csv"] {
        assert!(dir.path().join("out").join(file).exists(), "{file}");
    }
    let table = std::fs::read_to_string(dir.path().join("out/table.csv")).unwrap();
    assert_eq!(table.lines().count(), 3, "{table}");
    assert!(!table.contains("absent"));
}
