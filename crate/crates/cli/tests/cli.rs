use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn fastflow(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fastflow"))
        .args(args)
        .current_dir(dir)
        .env_remove("FASTFLOW_JOBS")
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL: &str = "\
# small corridor used by the golden files
kind = corridor
seed = 11
width = 20
height = 6
density = 0.25
rounds = 40
warmup = 20
";

fn workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("small.cfg"), SMALL).unwrap();
    dir
}

fn golden(name: &str) -> String {
    fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)).unwrap()
}

#[test]
fn run_writes_metrics_matching_golden() {
    let dir = workspace();
    let o = fastflow(&["run", "small.cfg", "--seed", "42", "--out", "a", "--snapshot-every", "10"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("rounds=40 agents=20"));
    let metrics = fs::read_to_string(dir.path().join("a/metrics.csv")).unwrap();
    assert_eq!(metrics, golden("run_seed42_metrics.csv"));
    assert_eq!(metrics.lines().filter(|l| !l.starts_with('#')).count(), 1 + 3 * 40);
    let frame = fs::read_to_string(dir.path().join("a/frames/000040.txt")).unwrap();
    assert_eq!(frame, golden("run_seed42_frame40.txt"));
    assert_eq!(fs::read_dir(dir.path().join("a/frames")).unwrap().count(), 4);

    let again = fastflow(&["run", "small.cfg", "--seed", "42", "--out", "b", "--snapshot-every", "10"], dir.path());
    assert!(again.status.success());
    assert_eq!(fs::read(dir.path().join("b/metrics.csv")).unwrap(), metrics.as_bytes());
}

#[test]
fn fd_matches_golden_and_ignores_job_count() {
    let dir = workspace();
    let o = fastflow(&["fd", "small.cfg", "--densities", "0.0,0.1,0.3", "--seeds", "3", "--out", "fd1"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("fd1/fd.csv")).unwrap();
    assert_eq!(csv, golden("fd.csv"));
    assert_eq!(fs::read_to_string(dir.path().join("fd1/fd.dat")).unwrap(), golden("fd.dat"));
    let zero_row = csv.lines().find(|l| l.starts_with("0.000000,")).unwrap();
    assert!(zero_row.starts_with("0.000000,0.000000,0.000000,"));

    let o = Command::new(env!("CARGO_BIN_EXE_fastflow"))
        .args(["fd", "small.cfg", "--densities", "0.0,0.1,0.3", "--seeds", "3", "--out", "fd2"])
        .current_dir(dir.path())
        .env("FASTFLOW_JOBS", "3")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read_to_string(dir.path().join("fd2/fd.csv")).unwrap(), csv);
}

#[test]
fn fd_range_syntax_counts_rows() {
    let dir = workspace();
    fs::write(dir.path().join("tiny.cfg"), "kind = corridor\nseed = 1\nwidth = 8\nheight = 4\nrounds = 3\nwarmup = 0\n").unwrap();
    let o = fastflow(&["fd", "tiny.cfg", "--densities", "0.05..0.6 step 0.05", "--seeds", "2", "--out", "o"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("o/fd.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(rows.len(), 12);
    assert!(rows.iter().all(|r| r.ends_with(",2")));
}

#[test]
fn sweep_writes_one_curve_per_value_and_a_long_table() {
    let dir = workspace();
    let o = fastflow(
        &["sweep", "small.cfg", "--param", "kf", "--values", "0,0.4,0.8", "--densities", "0.1,0.2", "--seeds", "2", "--out", "s"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    for v in ["0", "0.4", "0.8"] {
        assert!(dir.path().join(format!("s/fd_kf_{v}.csv")).exists());
        assert!(dir.path().join(format!("s/fd_kf_{v}.dat")).exists());
    }
    let long = fs::read_to_string(dir.path().join("s/sweep.csv")).unwrap();
    let mut lines = long.lines().filter(|l| !l.starts_with('#'));
    assert_eq!(
        lines.next().unwrap(),
        "param,value,density,mean_flow,std_flow,mean_speed,mean_lane_order,deadlock_fraction,n_seeds"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 6);
    assert!(rows[0].starts_with("kf,0,0.100000,"));
    assert!(rows[5].starts_with("kf,0.8,0.200000,"));

    let o = fastflow(
        &["sweep", "small.cfg", "--param", "n_max", "--values", "4,12,24", "--densities", "0.1", "--seeds", "1", "--out", "n"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("n/fd_n_max_24.csv").exists());
}

#[test]
fn render_prints_one_character_per_cell() {
    let dir = workspace();
    fs::write(dir.path().join("one.map"), "...\n...\n").unwrap();
    fs::write(dir.path().join("map.cfg"), "kind = map\nseed = 1\nmap_path = one.map\ndensity = 0\n").unwrap();
    let o = fastflow(&["render", "map.cfg"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(String::from_utf8_lossy(&o.stdout), "...\n...\n");

    fs::write(dir.path().join("one.map"), ".>.\n...\n").unwrap();
    let o = fastflow(&["render", "map.cfg"], dir.path());
    assert_eq!(String::from_utf8_lossy(&o.stdout).lines().next(), Some(".>."));

    let o = fastflow(&["render", "small.cfg", "--rounds", "5"], dir.path());
    let text = String::from_utf8_lossy(&o.stdout).into_owned();
    assert_eq!(text.lines().count(), 6);
    assert!(text.lines().all(|l| l.chars().count() == 20));
    assert_eq!(text.lines().next().unwrap(), "#".repeat(20));
}

#[test]
fn config_errors_exit_one_and_name_the_key() {
    let dir = workspace();
    fs::write(dir.path().join("bad.cfg"), "kind = corridor\nseed = 1\ndensity = 1.5\n").unwrap();
    let o = fastflow(&["run", "bad.cfg", "--out", "x"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("density") && stderr(&o).contains("line 3"), "{}", stderr(&o));

    fs::write(dir.path().join("bad.cfg"), "kind = corridor\nseed = 1\nbogus = 2\n").unwrap();
    let o = fastflow(&["fd", "bad.cfg", "--densities", "0.1", "--seeds", "1"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("bogus"));

    let o = fastflow(&["sweep", "small.cfg", "--param", "speed", "--values", "1", "--densities", "0.1", "--seeds", "1"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--param"));

    let o = fastflow(&["fd", "small.cfg", "--densities", "zero", "--seeds", "1"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--densities"));

    let o = fastflow(&["run"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn io_errors_exit_two_with_the_path() {
    let dir = workspace();
    let o = fastflow(&["run", "missing.cfg"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("missing.cfg"));

    fs::write(dir.path().join("map.cfg"), "kind = map\nseed = 1\nmap_path = nowhere.map\n").unwrap();
    let o = fastflow(&["render", "map.cfg"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nowhere.map"));

    fs::write(dir.path().join("blocker"), "a file, not a directory").unwrap();
    let o = fastflow(&["run", "small.cfg", "--out", "blocker/out"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn empty_corridor_has_zero_flow() {
    let dir = workspace();
    fs::write(dir.path().join("empty.cfg"), "kind = corridor\nseed = 3\ndensity = 0\nrounds = 10\nwarmup = 0\n").unwrap();
    let o = fastflow(&["run", "empty.cfg", "--out", "e"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("e/metrics.csv")).unwrap();
    for row in csv.lines().filter(|l| !l.starts_with('#')).skip(1) {
        assert_eq!(row.split(',').nth(4), Some("0.000000"), "{row}");
    }
}
