use std::path::Path;
use std::process::Command;

fn weakhom(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_weakhom")).args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stdout).into(), String::from_utf8_lossy(&out.stderr).into())
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn data_rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

#[test]
fn periodic_writes_one_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "[material]\nkind = \"inclusion\"\n");
    let out = dir.path().join("out");
    let (code, stdout, _) = weakhom(&["periodic", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(stdout.contains("periodic tensor"));
    let text = std::fs::read_to_string(out.join("periodic.csv")).unwrap();
    assert!(text.starts_with("# schema: weakhom-csv v1\n# command: periodic\n"));
    let rows = data_rows(&out.join("periodic.csv"));
    let periodic: Vec<_> = rows.iter().filter(|r| r[0] == "periodic").collect();
    assert_eq!(periodic.len(), 4);
    let a00: f64 = periodic[0][3].parse().unwrap();
    assert!(a00 > 27.0 && a00 < 52.0, "{a00}");
    assert!(out.join("manifest.toml").exists());
}

#[test]
fn oned_table_holds_the_limits() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "[material]\nkind = \"oned\"\npieces = [[1.0, 2.0, 1.0]]\n[law]\neta = [0.1]\n");
    let out = dir.path().join("out");
    let (code, stdout, _) = weakhom(&["oned", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(stdout.contains("0.6666666667") && stdout.contains("0.2222222222"), "{stdout}");
    let row = &data_rows(&out.join("oned.csv"))[0];
    assert!((row[2].parse::<f64>().unwrap() - 2.0 / 3.0).abs() < 1e-15);
    assert!((row[3].parse::<f64>().unwrap() - 2.0 / 9.0).abs() < 1e-15);
}

#[test]
fn figure_gives_one_row_per_size() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        "[material]\nkind = \"inclusion\"\n[law]\nkind = \"clipped-gaussian\"\neta = [0.1]\n[sweep]\ncells = [5, 10, 15, 20]\nrealizations = 10\n",
    );
    let out = dir.path().join("out");
    let (code, _, err) = weakhom(&["figure", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let rows = data_rows(&out.join("figure.csv"));
    assert_eq!(rows.len(), 4);
    for r in &rows {
        let v: Vec<f64> = r[2..].iter().map(|x| x.parse().unwrap()).collect();
        // mc min <= mean <= max, and every curve sits below the periodic value
        assert!(v[4] <= v[3] && v[3] <= v[5]);
        assert!(v[1] < v[0] && v[2] < v[1] && v[3] < v[0]);
    }
}

#[test]
fn config_errors_exit_one_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "[material]\nkind = \"inclusion\"\n\n[sweep]\ncells = [5, 3]\n");
    let (code, _, err) = weakhom(&["mc", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(err.contains("c.toml:5"), "{err}");
    let cfg = write(dir.path(), "d.toml", "[material]\nkind = \"sphere\"\n");
    assert_eq!(weakhom(&["periodic", "--config", &cfg]).0, 1);
    let cfg = write(dir.path(), "e.toml", "[material]\nkind = \"inclusion\"\n");
    let (code, _, err) = weakhom(&["oned", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code, 1, "{err}");
    assert_eq!(weakhom(&["--config", &cfg]).0, 1);
    assert_eq!(weakhom(&["bogus", "--config", &cfg]).0, 1);
    assert_eq!(weakhom(&["periodic", "--config", "/nonexistent.toml"]).0, 1);
}

#[test]
fn corrector_route_without_moments_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "[material]\nkind = \"inclusion\"\n[law]\nkind = \"bernoulli\"\n[sweep]\nroute = \"corrector\"\n");
    let (code, _, err) = weakhom(&["expand", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(err.contains("c.toml:6"), "{err}");
}

#[test]
fn budget_caps_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    // the full N = 5..80 protocol with 40 realizations
    let cells: Vec<String> = (1..=16).map(|k| (5 * k).to_string()).collect();
    let big = format!("[material]\nkind = \"inclusion\"\n[sweep]\ncells = [{}]\nrealizations = 40\n", cells.join(", "));
    let cfg = write(dir.path(), "big.toml", &big);
    assert_eq!(weakhom(&["mc", "--config", &cfg, "--out", out.to_str().unwrap()]).0, 3);
    let cfg = write(dir.path(), "cut.toml", "[material]\nkind = \"inclusion\"\n[solver]\nper_cell = 4\n[sweep]\ncells = [5]\npair_budget = 3\nroute = \"defect\"\n");
    let (code, _, err) = weakhom(&["expand", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 3, "{err}");
    // results up to the cap are still written
    let diag = data_rows(&out.join("expansion_diagnostics.csv"));
    assert!(diag.iter().any(|r| r[1] == "2" && r[4] == "3" && r[6] == "true"));
}

#[test]
fn seed_flag_overrides_config_and_lands_in_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        "[material]\nkind = \"inclusion\"\n[law]\nkind = \"bernoulli\"\neta = [0.5]\n[solver]\nper_cell = 4\n[sweep]\ncells = [3]\nrealizations = 3\nseed = 1\n",
    );
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(weakhom(&["mc", "--config", &cfg, "--out", a.to_str().unwrap()]).0, 0);
    assert_eq!(weakhom(&["mc", "--config", &cfg, "--out", b.to_str().unwrap(), "--seed", "2"]).0, 0);
    let manifest = std::fs::read_to_string(b.join("manifest.toml")).unwrap();
    assert!(manifest.contains("seed = 2"));
    assert_ne!(std::fs::read(a.join("mc_realizations.csv")).unwrap(), std::fs::read(b.join("mc_realizations.csv")).unwrap());
    // re-running the manifest without a subcommand reproduces the files
    let c = dir.path().join("c");
    let m = b.join("manifest.toml");
    assert_eq!(weakhom(&["--config", m.to_str().unwrap(), "--out", c.to_str().unwrap(), "--threads", "3"]).0, 0);
    for f in ["mc_realizations.csv", "mc_aggregate.csv", "mc_diagnostics.csv", "manifest.toml"] {
        assert_eq!(std::fs::read(b.join(f)).unwrap(), std::fs::read(c.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn custom_raster_and_custom_law() {
    let dir = tempfile::tempdir().unwrap();
    let mut base = String::new();
    let mut pert = String::new();
    for p in 0..16 {
        let v = if p % 4 < 2 { 3.0 } else { 1.0 };
        base.push_str(&format!("{v} 0 0 {v}\n"));
        pert.push_str(if p < 8 { "0.5 0 0 0.5\n" } else { "0 0 0 0\n" });
    }
    write(dir.path(), "base.txt", &base);
    write(dir.path(), "pert.txt", &pert);
    let cfg = write(
        dir.path(),
        "c.toml",
        "[material]\nkind = \"custom-raster\"\ndim = 2\nbase_file = \"base.txt\"\nperturbation_file = \"pert.txt\"\n\
         [law]\nkind = \"custom\"\nterms = [[1, 1.0, 0, 1.0], [1, 0.0, 0, -1.0]]\nmoments = { mean_b0 = 1.0, var_b0 = 0.0, mean_b0_sq = 1.0 }\n\
         [solver]\nper_cell = 4\n[sweep]\ncells = [3]\n",
    );
    let out = dir.path().join("out");
    let (code, _, err) = weakhom(&["expand", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let rows = data_rows(&out.join("expansion.csv"));
    assert!(rows.iter().any(|r| r[0] == "defect-order-1"));
    assert!(rows.iter().any(|r| r[0] == "corrector-route"));
}
