//! End-to-end runs of the `drr` binary.

use std::path::Path;
use std::process::{Command, Output};

use drr::dataset::{load_csv, CsvOptions};
use drr::eval::mae;

fn drr(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_drr")).args(args).current_dir(cwd).output().unwrap()
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn write_parabola(path: &Path, n: usize) {
    let rows: String = (0..n)
        .map(|i| {
            let t = -1.0 + 2.0 * i as f64 / (n - 1) as f64;
            format!("{t},{}\n", t * t)
        })
        .collect();
    std::fs::write(path, rows).unwrap();
}

#[test]
fn fit_then_reconstruct_parabola_from_one_coordinate() {
    let dir = tempfile::tempdir().unwrap();
    write_parabola(&dir.path().join("p.csv"), 200);
    let report = ok(&drr(&["fit", "--input", "p.csv", "--model", "p.drr", "--method", "drr"], dir.path()));
    assert!(report.starts_with("dim,score_variance,coordinate_variance,sigma,gamma\n"));
    assert_eq!(report.lines().count(), 3);
    ok(&drr(&["reconstruct", "--model", "p.drr", "--input", "p.csv", "--k", "1", "--output", "r.csv"], dir.path()));
    let opts = CsvOptions::default();
    let x = load_csv(dir.path().join("p.csv"), &opts).unwrap();
    let r = load_csv(dir.path().join("r.csv"), &opts).unwrap();
    assert!(mae(&x, &r) < 1e-3, "MAE {}", mae(&x, &r));
}

#[test]
fn transform_and_invert_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    write_parabola(&dir.path().join("p.csv"), 80);
    ok(&drr(&["fit", "--input", "p.csv", "--model", "m.drr", "--method", "ppa", "--degree", "2"], dir.path()));
    ok(&drr(&["transform", "--model", "m.drr", "--input", "p.csv", "--output", "c.csv"], dir.path()));
    ok(&drr(&["invert", "--model", "m.drr", "--input", "c.csv", "--output", "back.csv"], dir.path()));
    let opts = CsvOptions::default();
    let x = load_csv(dir.path().join("p.csv"), &opts).unwrap();
    let back = load_csv(dir.path().join("back.csv"), &opts).unwrap();
    assert!(x.max_abs_diff(&back) < 1e-8);
}

#[test]
fn wrong_column_count_names_expected_dimension() {
    let dir = tempfile::tempdir().unwrap();
    write_parabola(&dir.path().join("p.csv"), 50);
    ok(&drr(&["fit", "--input", "p.csv", "--model", "p.drr", "--method", "pca"], dir.path()));
    std::fs::write(dir.path().join("three.csv"), "1,2,3\n4,5,6\n").unwrap();
    let out = drr(&["transform", "--model", "p.drr", "--input", "three.csv"], dir.path());
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("expected 2"), "{err}");
}

#[test]
fn seeded_fits_are_bit_reproducible_and_inputs_untouched() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("p.csv");
    write_parabola(&input, 120);
    let before = std::fs::read(&input).unwrap();
    for name in ["a.drr", "b.drr"] {
        ok(&drr(&["fit", "--input", "p.csv", "--model", name, "--seed", "5", "--cv-max", "80"], dir.path()));
    }
    let (a, b) = (std::fs::read(dir.path().join("a.drr")).unwrap(), std::fs::read(dir.path().join("b.drr")).unwrap());
    // the model path itself is recorded in the metadata
    let strip = |v: &[u8]| String::from_utf8_lossy(v).replace("a.drr", "X").replace("b.drr", "X").into_bytes();
    assert_eq!(strip(&a), strip(&b));
    assert_eq!(std::fs::read(&input).unwrap(), before);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    write_parabola(&dir.path().join("p.csv"), 60);
    std::fs::write(dir.path().join("run.conf"), "# run settings\nmethod = ppa\ndegree = 2\n").unwrap();
    ok(&drr(&["fit", "--config", "run.conf", "--input", "p.csv", "--model", "m.drr"], dir.path()));
    let head = std::fs::read(dir.path().join("m.drr")).unwrap();
    assert!(String::from_utf8_lossy(&head).contains("\nmethod=ppa\n"));
    ok(&drr(&["fit", "--config", "run.conf", "--method", "pca", "--input", "p.csv", "--model", "m.drr"], dir.path()));
    let head = std::fs::read(dir.path().join("m.drr")).unwrap();
    assert!(String::from_utf8_lossy(&head).contains("\nmethod=pca\n"));

    std::fs::write(dir.path().join("bad.conf"), "method = ppa\nfolds = many\n").unwrap();
    let out = drr(&["fit", "--config", "bad.conf", "--input", "p.csv", "--model", "m.drr"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn evaluation_tables_have_headers() {
    let dir = tempfile::tempdir().unwrap();
    write_parabola(&dir.path().join("p.csv"), 60);
    ok(&drr(&["fit", "--input", "p.csv", "--model", "pca.drr", "--method", "pca"], dir.path()));
    ok(&drr(&["fit", "--input", "p.csv", "--model", "ppa.drr", "--method", "ppa"], dir.path()));
    let table = ok(&drr(&["eval-reconstruction", "--input", "p.csv", "--model", "pca.drr", "--model", "ppa.drr"], dir.path()));
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "model,method,k,mae,mse,rel_mae,rel_mse");
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("pca.drr,pca,1,") && lines[1].ends_with(",100,100"));

    let rows: String = (0..60).map(|i| format!("{},{},{}\n", i % 7, (i * 3) % 5, i % 2)).collect();
    std::fs::write(dir.path().join("cls.csv"), rows).unwrap();
    let table = ok(&drr(&["eval-classify", "--input", "cls.csv", "--methods", "pca", "--ks", "1,2"], dir.path()));
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "method,seed,k,metric,value");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("raw,0,2,error,"));

    let manifold = ok(&drr(&["gen-manifold", "--n-samples", "7", "--seed", "3"], dir.path()));
    assert!(manifold.starts_with("x,y,z,u,v\n"));
    assert_eq!(manifold.lines().count(), 8);
}

#[test]
fn help_succeeds_and_unknown_flags_fail() {
    let dir = tempfile::tempdir().unwrap();
    let help = ok(&drr(&["--help"], dir.path()));
    for verb in [
        "fit",
        "transform",
        "invert",
        "reconstruct",
        "eval-reconstruction",
        "eval-classify",
        "eval-retrieve",
        "gen-manifold",
        "benchmark-manifolds",
    ] {
        assert!(help.contains(verb), "{verb} missing from help");
    }
    assert_eq!(drr(&["fit", "--bogus"], dir.path()).status.code(), Some(2));
    assert!(!drr(&["reconstruct", "--model", "nope.drr", "--input", "nope.csv"], dir.path()).status.success());
}
