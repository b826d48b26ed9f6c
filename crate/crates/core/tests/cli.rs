use std::process::Command;

fn pie(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_pie")).args(args).output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn data(name: &str) -> String {
    format!("{}/data/{name}.pde", env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn convert_reports_the_constraint() {
    let (code, out, _) = pie(&["convert", &data("periodic_reaction_diffusion")]);
    assert_eq!(code, 0);
    assert!(out.contains("m=1, K: ∫v₁=0"));
    assert!(out.contains("[That]"));
}

#[test]
fn exit_codes() {
    assert_eq!(pie(&["reproduce", "--table", "3"]).0, 64);
    assert_eq!(pie(&[]).0, 64);
    assert_eq!(pie(&["--version"]).0, 0);
    let (code, _, err) = pie(&["convert", "/nonexistent/spec.pde"]);
    assert_eq!(code, 65);
    assert!(err.starts_with("error:"));
    let (code, out, _) = pie(&["certify", &data("periodic_reaction_diffusion"), "--alpha", "20"]);
    assert_eq!(code, 2);
    assert!(out.contains("infeasible"));
}

#[test]
fn spectrum_mirror_is_tab_separated() {
    let dir = std::env::temp_dir().join(format!("pie-spectrum-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("spectrum.tsv");
    let (code, out, _) = pie(&["spectrum", &data("dirichlet_heat"), "--count", "3", "--out", path.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(out.contains("alpha[spectral, N=16] = 9.869604"));
    let tsv = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = tsv.lines().collect();
    assert_eq!(lines[0], "re\tim\tvisible");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("-9.869604\t"));
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn simulate_writes_a_trajectory_file() {
    let dir = std::env::temp_dir().join(format!("pie-simulate-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("traj.csv");
    let (code, out, _) = pie(&[
        "simulate",
        &data("dirichlet_heat"),
        "--t-end",
        "0.2",
        "--dt",
        "1e-3",
        "--init",
        "poly:0,1,-1",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{out}");
    let rate: f64 = out
        .lines()
        .find_map(|l| l.split(" = ").nth(1).filter(|_| l.starts_with("alpha[simulation")))
        .unwrap()
        .parse()
        .unwrap();
    assert!((rate - std::f64::consts::PI.powi(2)).abs() < 0.05, "{rate}");
    let csv = std::fs::read_to_string(&path).unwrap();
    assert_eq!(csv.lines().count(), 202);
    std::fs::remove_dir_all(dir).unwrap();
}
