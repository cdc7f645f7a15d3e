use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;
use virodyn::grid::read_field_csv;

const RATES: &str = "gamma = 0.001\nN = 1000\nmu_T = 0.1\nmu_I = 0.5\nmu_V = 10\nd_V = 1\n";

fn scenario(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

fn virodyn(cmd: &str, scenario: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_virodyn"))
        .arg(cmd)
        .arg(scenario)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn eigen_constant_r0_two() {
    let tmp = TempDir::new().unwrap();
    let sc = scenario(tmp.path(), "s.txt", &format!("{RATES}n = 16\nalpha.mode = constant\nalpha.r0 = 2\n"));
    let out = tmp.path().join("out");
    let o = virodyn("eigen", &sc, &out);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o), "lambda0=10\n");
    let rows = csv_rows(&out.join("eigen.csv"));
    assert_eq!(rows[0], ["lambda0", "iterations", "residual"]);
    assert!((rows[1][0].parse::<f64>().unwrap() - 10.0).abs() < 1e-8);
    let phi = read_field_csv(BufReader::new(fs::File::open(out.join("phi.csv")).unwrap())).unwrap();
    assert_eq!(phi.spec().n(), 16);
    assert!(phi.min() > 0.0);
}

#[test]
fn missing_mu_v_is_an_input_error() {
    let tmp = TempDir::new().unwrap();
    let body = RATES.replace("mu_V = 10\n", "") + "alpha.mode = constant\nalpha.r0 = 2\n";
    let sc = scenario(tmp.path(), "s.txt", &body);
    let o = virodyn("eigen", &sc, tmp.path());
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("mu_V"), "{err}");
    assert_eq!(err.lines().count(), 1);
}

#[test]
fn unknown_key_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let sc = scenario(tmp.path(), "s.txt", &format!("{RATES}alpha.mode = constant\nalpha.r0 = 2\nmu_Z = 3\n"));
    let o = virodyn("eigen", &sc, tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("mu_Z"));
}

#[test]
fn missing_scenario_file_and_bad_subcommand() {
    let tmp = TempDir::new().unwrap();
    let o = virodyn("eigen", &tmp.path().join("nope.txt"), tmp.path());
    assert_eq!(o.status.code(), Some(2));
    let sc = scenario(tmp.path(), "s.txt", RATES);
    let o = virodyn("frobnicate", &sc, tmp.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn solver_failure_exits_one() {
    let tmp = TempDir::new().unwrap();
    let sc = scenario(
        tmp.path(),
        "s.txt",
        &format!("{RATES}n = 16\nalpha.mode = random\nrandom.source_fraction = 0.5\neigen.max_iter = 1\n"),
    );
    let o = virodyn("eigen", &sc, tmp.path());
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stderr(&o).contains("did not converge"));
}

#[test]
fn sweep_matches_closed_form() {
    let tmp = TempDir::new().unwrap();
    let sc = scenario(tmp.path(), "s.txt", &format!("{RATES}n = 8\n"));
    let o = virodyn("sweep", &sc, tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = csv_rows(&tmp.path().join("sweep.csv"));
    assert_eq!(rows[0], ["alpha", "r0", "lambda0", "branch", "mean_T", "mean_I", "mean_V"]);
    assert_eq!(rows.len(), 32);
    for r in &rows[1..] {
        let r0: f64 = r[1].parse().unwrap();
        let v: f64 = r[6].parse().unwrap();
        let expect = (100.0 * (r0 - 1.0)).max(0.0);
        if r[3] == "uninfected" {
            assert_eq!(v, 0.0);
            assert!(r0 <= 1.0 + 1e-12);
        } else {
            assert!((v - expect).abs() <= 1e-6 * expect, "{r:?}");
        }
    }
}

#[test]
fn steady_constant_fields() {
    let tmp = TempDir::new().unwrap();
    let sc = scenario(tmp.path(), "s.txt", &format!("{RATES}n = 16\nalpha.mode = constant\nalpha.r0 = 1.5\n"));
    let o = virodyn("steady", &sc, tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("branch=infected lambda0=5 "));
    let rows = csv_rows(&tmp.path().join("steady.csv"));
    assert_eq!(rows[0], ["branch", "lambda0", "iterations", "residual"]);
    assert_eq!(rows[1][0], "infected");
    let read = |name: &str| read_field_csv(BufReader::new(fs::File::open(tmp.path().join(name)).unwrap())).unwrap();
    assert!((read("V.csv").mean() - 50.0).abs() < 1e-6);
    assert!((read("T.csv").mean() - 10.0).abs() < 1e-8);
    assert!((read("I.csv").mean() - 1.0).abs() < 1e-8);
}

#[test]
fn evolve_outputs_and_determinism() {
    let tmp = TempDir::new().unwrap();
    let body = format!(
        "{RATES}n = 16\nalpha.mode = constant\nalpha.r0 = 1.5\nevolve.dt = 0.005\nevolve.t_end = 0.5\n\
         evolve.record_every = 20\nevolve.probes = 8:8;0:3\nevolve.inoculum.width = 0.15\nevolve.snapshots = true\n"
    );
    // dt above the reaction bound is refused as input
    let bad = scenario(tmp.path(), "bad.txt", &body.replace("evolve.dt = 0.005", "evolve.dt = 0.05"));
    assert_eq!(virodyn("evolve", &bad, tmp.path()).status.code(), Some(2));

    let body = body.replace("evolve.dt = 0.005", "evolve.dt = 0.005\nevolve.scheme = lie");
    let sc = scenario(tmp.path(), "s.txt", &body);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let o = virodyn("evolve", &sc, &a);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(virodyn("evolve", &sc, &b).status.success());
    for name in ["probes.csv", "phase.csv", "norms.csv", "summary.txt", "final_V.csv", "snapshot_0005_V.csv"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    let probes = csv_rows(&a.join("probes.csv"));
    assert_eq!(probes[0], ["t", "site", "T", "I", "V"]);
    // 6 recording times, two sites plus the mean
    assert_eq!(probes.len(), 1 + 6 * 3);
    assert!(probes.iter().any(|r| r[1] == "8:8"));
    assert!(probes.iter().any(|r| r[1] == "mean"));
    assert_eq!(csv_rows(&a.join("phase.csv"))[0], ["t", "site", "T", "V"]);
    let summary = fs::read_to_string(a.join("summary.txt")).unwrap();
    assert!(summary.contains("scheme=lie"));
    assert!(summary.contains("region_violated=false"));
    assert!(summary.contains("m1=1.5"));
}

#[test]
fn evolve_scalar_runs() {
    let tmp = TempDir::new().unwrap();
    let sc = scenario(
        tmp.path(),
        "s.txt",
        &format!("{RATES}n = 16\nalpha.mode = constant\nalpha.r0 = 1.5\nevolve.dt = 0.002\nevolve.t_end = 0.2\nevolve.inoculum.width = 0.2\n"),
    );
    let o = virodyn("evolve-scalar", &sc, tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let summary = fs::read_to_string(tmp.path().join("summary.txt")).unwrap();
    assert!(summary.contains("model=scalar"));
}

#[test]
fn stability_report_csv() {
    let tmp = TempDir::new().unwrap();
    let sc = scenario(
        tmp.path(),
        "s.txt",
        &format!("{RATES}alpha.mode = constant\nalpha.r0 = 1.5\nstability.max_index = 6\n"),
    );
    let o = virodyn("stability", &sc, tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("verdict=stable"));
    let rows = csv_rows(&tmp.path().join("stability.csv"));
    assert_eq!(
        rows[0],
        ["m1", "m2", "lambda_k", "b", "c", "d", "re_root1", "re_root2", "re_root3", "stable"]
    );
    assert!(rows[1..].iter().all(|r| r[9] == "1"));

    let het = scenario(
        tmp.path(),
        "h.txt",
        &format!("{RATES}n = 16\nalpha.mode = random\nrandom.source_fraction = 0.5\n"),
    );
    assert_eq!(virodyn("stability", &het, tmp.path()).status.code(), Some(2));
}

#[test]
fn homogenize_study() {
    let tmp = TempDir::new().unwrap();
    let sc = scenario(
        tmp.path(),
        "s.txt",
        &format!("{RATES}homogenize.epsilons = 1/2, 1/4\nhomogenize.resolution = 2\n"),
    );
    let o = virodyn("homogenize", &sc, tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(tmp.path().join("homogenize.csv")).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# M="));
    assert_eq!(lines.next().unwrap(), "epsilon,lambda0_eps,sup_dist,iterations");
    assert_eq!(lines.count(), 2);
    assert!(tmp.path().join("V_k4.csv").exists());
    assert!(tmp.path().join("R0_k2.csv").exists());
}

#[test]
fn random_field_round_trip() {
    let tmp = TempDir::new().unwrap();
    let body = format!("{RATES}n = 16\nseed = 11\nrandom.source_fraction = 0.26\n");
    let sc = scenario(tmp.path(), "s.txt", &body);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(virodyn("random-field", &sc, &a).status.success());
    assert!(virodyn("random-field", &sc, &b).status.success());
    assert_eq!(fs::read(a.join("R0.csv")).unwrap(), fs::read(b.join("R0.csv")).unwrap());

    // the written map feeds back in as an R0 field, relative to the scenario
    let reuse = scenario(
        tmp.path(),
        "reuse.txt",
        &format!("{RATES}n = 16\nalpha.mode = csv\nalpha.path = a/R0.csv\nalpha.quantity = r0\n"),
    );
    let o = virodyn("eigen", &reuse, &tmp.path().join("c"));
    assert!(o.status.success(), "{}", stderr(&o));
    let direct = scenario(
        tmp.path(),
        "direct.txt",
        &format!("{body}alpha.mode = random\n"),
    );
    let d = virodyn("eigen", &direct, &tmp.path().join("d"));
    assert_eq!(stdout(&o), stdout(&d));

    let wrong = scenario(
        tmp.path(),
        "wrong.txt",
        &format!("{RATES}n = 32\nalpha.mode = csv\nalpha.path = a/R0.csv\nalpha.quantity = r0\n"),
    );
    assert_eq!(virodyn("eigen", &wrong, tmp.path()).status.code(), Some(2));
}

#[test]
fn shipped_scenarios_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut seen = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let sc = virodyn_cli::Scenario::from_file(&path).unwrap();
        sc.rates().unwrap();
        sc.grid().unwrap();
        if sc.get("alpha.mode").is_some() {
            sc.params().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        }
        seen += 1;
    }
    assert!(seen >= 5);
}
