use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mssa::network::models::HEAT_SHOCK_MODEL;
use tempfile::TempDir;

fn mssa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mssa"))
        .args(args)
        .env_remove("MSSA_SEED")
        .output()
        .expect("binary runs")
}

fn write(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn heat_shock_file(dir: &TempDir) -> PathBuf {
    write(dir, "heatshock.toml", HEAT_SHOCK_MODEL)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

const BIRTH_DEATH: &str = r#"species = ["A"]
initial_state = [0]
N0 = 1
theta = 2.0

[[reactions]]
reactants = {}
products = { A = 1 }
rate_base = 1.0
rate_theta_exponent = 1
beta = 0

[[reactions]]
reactants = { A = 1 }
products = {}
rate_base = 1.0
rate_theta_exponent = 0
beta = 0
"#;

#[test]
fn validate_exit_codes() {
    let dir = TempDir::new().unwrap();
    let ok = mssa(&["validate", s(&heat_shock_file(&dir))]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(!stdout(&ok).contains("WARN"));

    let dimer = BIRTH_DEATH
        .replacen("reactants = {}", "reactants = { A = 2 }", 1)
        .replacen(
            "A = 1 }\nrate_base = 1.0\nrate_theta_exponent = 1",
            "A = 3 }\nrate_base = 1.0\nrate_theta_exponent = 1",
            1,
        );
    let warned = mssa(&["validate", s(&write(&dir, "dimer.toml", &dimer))]);
    assert_eq!(warned.status.code(), Some(2));
    let report = stdout(&warned);
    assert!(
        report.contains("WARN linear-growth") && report.contains("2 A -> 3 A"),
        "{report}"
    );

    let broken = mssa(&[
        "validate",
        s(&write(
            &dir,
            "broken.toml",
            "species = [\"A\"\ninitial_state = 3",
        )),
    ]);
    assert_eq!(broken.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&broken.stderr).contains("line"));

    let missing = mssa(&["validate", s(&dir.path().join("nope.toml"))]);
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn sens_constant_output_is_zero_after_one_block() {
    let dir = TempDir::new().unwrap();
    let out = mssa(&[
        "sens",
        s(&heat_shock_file(&dir)),
        "--method",
        "reduced",
        "--f",
        "7",
        "--no-timing",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let csv = stdout(&out);
    assert!(csv.ends_with('\n') && !csv.contains('\r'));
    let r = rows(&csv);
    assert_eq!(
        r[0],
        [
            "method",
            "f",
            "theta",
            "h",
            "t",
            "N",
            "value",
            "halfwidth95",
            "samples",
            "wall_seconds",
            "seed",
            "converged"
        ]
    );
    assert_eq!(r[1][0], "cfd-reduced");
    assert_eq!(r[1][6].parse::<f64>().unwrap(), 0.0);
    assert_eq!(r[1][8], "1000");
}

#[test]
fn sens_reduced_heat_shock() {
    let dir = TempDir::new().unwrap();
    let model = heat_shock_file(&dir);
    let out = mssa(&[
        "sens",
        s(&model),
        "--method",
        "reduced",
        "--f",
        "x3",
        "--h",
        "0.01",
        "--t",
        "1",
        "--rel-halfwidth",
        "0.05",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let r = rows(&stdout(&out));
    let (value, hw): (f64, f64) = (r[1][6].parse().unwrap(), r[1][7].parse().unwrap());
    assert!((value - 4.1972).abs() <= hw + 0.03, "{value} ± {hw}");
    // 17 significant digits.
    assert_eq!(
        r[1][6]
            .split('e')
            .next()
            .unwrap()
            .replace(['-', '.'], "")
            .len(),
        17
    );
}

#[test]
fn sens_non_convergence_still_writes_rows() {
    let dir = TempDir::new().unwrap();
    let target = dir.path().join("out.csv");
    let out = mssa(&[
        "sens",
        s(&heat_shock_file(&dir)),
        "--method",
        "cfd",
        "--N",
        "20",
        "--f",
        "x3",
        "--rel-halfwidth",
        "0.001",
        "--max-samples",
        "1000",
        "--out",
        s(&target),
    ]);
    assert_eq!(out.status.code(), Some(3));
    let r = rows(&std::fs::read_to_string(&target).unwrap());
    assert_eq!(r.len(), 2);
    assert_eq!((r[1][0].as_str(), r[1][11].as_str()), ("cfd-full", "false"));
}

#[test]
fn sens_both_appends_gap_rows() {
    let dir = TempDir::new().unwrap();
    let out = mssa(&[
        "sens",
        s(&heat_shock_file(&dir)),
        "--method",
        "both",
        "--N",
        "20,40",
        "--f",
        "x3",
        "--rel-halfwidth",
        "0.3",
        "--no-timing",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let methods: Vec<String> = rows(&stdout(&out))
        .into_iter()
        .skip(1)
        .map(|r| r[0].clone())
        .collect();
    assert_eq!(
        methods,
        ["cfd-reduced", "cfd-full", "cfd-full", "gap", "gap"]
    );
}

#[test]
fn expression_errors_exit_1() {
    let dir = TempDir::new().unwrap();
    let model = heat_shock_file(&dir);
    for expr in ["x9", "S1 +", "Q"] {
        let out = mssa(&["sens", s(&model), "--f", expr]);
        assert_eq!(out.status.code(), Some(1), "{expr}");
    }
}

#[test]
fn reduction_failure_exits_4() {
    let dir = TempDir::new().unwrap();
    let model = write(&dir, "bd.toml", BIRTH_DEATH);
    assert_eq!(mssa(&["reduce", s(&model)]).status.code(), Some(4));
    assert_eq!(
        mssa(&["sens", s(&model), "--method", "reduced", "--f", "A"])
            .status
            .code(),
        Some(4)
    );
}

#[test]
fn reduce_report_lists_scales_and_rates() {
    let dir = TempDir::new().unwrap();
    let out = mssa(&["reduce", s(&heat_shock_file(&dir))]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(
        text.contains(
            "# gamma1 = 0\n# gamma2 = 1\n# fast reactions = [1, 2]\n# gamma2 reactions = [3]\n"
        ),
        "{text}"
    );
    let table: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(table[0], "S1+S2,S3,theta,rate1,drate1");
    let last: Vec<f64> = table
        .last()
        .unwrap()
        .split(',')
        .map(|x| x.parse().unwrap())
        .collect();
    assert_eq!(&last[..2], &[20.0, 0.0]);
    assert!((last[3] - 100.0 / 3.0).abs() < 1e-12);
}

#[test]
fn oracle_table_and_comparison() {
    let dir = TempDir::new().unwrap();
    let model = heat_shock_file(&dir);
    let out = mssa(&[
        "oracle",
        s(&model),
        "--N",
        "20",
        "--v",
        "3,0",
        "--t-grid",
        "0,0.5",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let r = rows(&stdout(&out));
    assert_eq!(r[0], ["t", "state", "beta", "survival", "rho3"]);
    assert_eq!(r.len(), 1 + 2 * 4);
    let beta0: f64 = r[1..5].iter().map(|x| x[2].parse::<f64>().unwrap()).sum();
    assert_eq!(beta0, 1.0);

    let cmp = mssa(&[
        "oracle",
        s(&model),
        "--compare",
        "--N",
        "5",
        "--f",
        "x3",
        "--t",
        "0.2",
        "--samples",
        "200",
    ]);
    assert_eq!(cmp.status.code(), Some(0));
    let names: Vec<String> = rows(&stdout(&cmp))
        .into_iter()
        .map(|r| r[0].clone())
        .collect();
    assert_eq!(names, ["estimator", "full", "w-process", "difference"]);
}

#[test]
fn simulate_is_deterministic_and_env_seed_wins() {
    let dir = TempDir::new().unwrap();
    let model = heat_shock_file(&dir);
    let args = [
        "simulate",
        s(&model),
        "--N",
        "20",
        "--t",
        "0.5",
        "--seed",
        "3",
    ];
    let a = mssa(&args);
    let b = mssa(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert!(stdout(&a).starts_with("time,S1,S2,S3\n0.0000000000000000e0,20,0,0\n"));

    let est = |seed: &str, env: Option<&str>| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_mssa"));
        c.args([
            "simulate",
            s(&model),
            "--N",
            "20",
            "--samples",
            "300",
            "--f",
            "x3",
            "--seed",
            seed,
        ]);
        match env {
            Some(v) => c.env("MSSA_SEED", v),
            None => c.env_remove("MSSA_SEED"),
        };
        c.output().unwrap().stdout
    };
    assert_eq!(est("1", Some("9")), est("9", None));
    assert_ne!(est("1", None), est("9", None));
}

#[test]
fn threads_flag_does_not_change_results() {
    let dir = TempDir::new().unwrap();
    let model = heat_shock_file(&dir);
    let run = |threads: &str| {
        mssa(&[
            "--threads",
            threads,
            "sens",
            s(&model),
            "--f",
            "x1",
            "--rel-halfwidth",
            "0.2",
            "--no-timing",
        ])
        .stdout
    };
    assert_eq!(run("1"), run("3"));
}
