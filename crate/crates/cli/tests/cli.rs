use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn ifmsim(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ifmsim"))
        .args(args)
        .current_dir(dir)
        .env_remove("IFMSIM_OUT")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = ifmsim(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    v.sort();
    v
}

fn read_json(path: PathBuf) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn seeded_runs_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    ok(
        tmp.path(),
        &["bell", "--seed", "42", "--out", "a", "--quiet"],
    );
    ok(
        tmp.path(),
        &["--seed", "42", "--quiet", "bell", "--out", "b"],
    );
    let (a, b) = (files(&tmp.path().join("a")), files(&tmp.path().join("b")));
    let names: Vec<&str> = a.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(
        names,
        [
            "config.toml",
            "counts.csv",
            "fits.csv",
            "manifest.json",
            "summary.json",
            "summary.txt"
        ]
    );
    assert_eq!(a, b);

    ok(
        tmp.path(),
        &["bell", "--seed", "43", "--out", "c", "--quiet"],
    );
    let c = std::fs::read(tmp.path().join("c/counts.csv")).unwrap();
    assert_ne!(c, a[1].1);
}

#[test]
fn written_config_reproduces_the_run() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        tmp.path(),
        "in.toml",
        "seed = 7\n[noise]\ncontrast = 0.8\nflipper_efficiencies = []\n[scan.bell]\nfine_points = 8\n",
    );
    ok(
        tmp.path(),
        &["bell", "--config", &cfg, "--out", "first", "--quiet"],
    );
    ok(
        tmp.path(),
        &[
            "bell",
            "--config",
            "first/config.toml",
            "--out",
            "second",
            "--quiet",
        ],
    );
    assert_eq!(
        files(&tmp.path().join("first")),
        files(&tmp.path().join("second"))
    );

    let manifest = read_json(tmp.path().join("first/manifest.json"));
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["subcommand"], "bell");
    assert_eq!(manifest["seed_stream"], 1);
    assert_eq!(manifest["config"]["noise"]["contrast"], 0.8);
    assert_eq!(manifest["config"]["scan"]["bell"]["fine_points"], 8);
}

#[test]
fn fit_reproduces_in_run_analysis() {
    let tmp = TempDir::new().unwrap();
    let rocking = write(
        tmp.path(),
        "rocking.toml",
        "[scan.rocking]\ndouble_peak = true\nmonochromator = \"triple_fold\"\n",
    );
    let cases: [(&str, &[&str], &[&str]); 6] = [
        ("bell", &[], &["fits.csv"]),
        ("temperature", &[], &["fits.csv", "temperature.csv"]),
        ("raster", &[], &["fits.csv", "contrast_map.csv"]),
        ("rocking", &["--config", &rocking], &["peaks.csv"]),
        ("two-flipper", &[], &[]),
        ("larmor-cal", &[], &[]),
    ];
    for (sub, extra, tables) in cases {
        let run_dir = format!("run-{sub}");
        let fit_dir = format!("fit-{sub}");
        let mut args = vec![sub, "--seed", "5", "--out", &run_dir, "--quiet"];
        args.extend_from_slice(extra);
        ok(tmp.path(), &args);
        let counts = format!("{run_dir}/counts.csv");
        let mut args = vec!["fit", "--counts", &counts, "--out", &fit_dir, "--quiet"];
        args.extend_from_slice(extra);
        ok(tmp.path(), &args);

        let run = tmp.path().join(&run_dir);
        let fit = tmp.path().join(&fit_dir);
        for name in tables.iter().chain(&["counts.csv"]) {
            assert_eq!(
                std::fs::read(run.join(name)).unwrap(),
                std::fs::read(fit.join(name)).unwrap(),
                "{sub}: {name}"
            );
        }
        // every result the offline fit reports equals the in-run value
        let run_summary = read_json(run.join("summary.json"));
        let fit_summary = read_json(fit.join("summary.json"));
        let fit_map = fit_summary.as_object().unwrap();
        assert!(fit_map.len() > 3, "{sub}: {fit_summary}");
        for (key, value) in fit_map {
            assert_eq!(&run_summary[key], value, "{sub}: {key}");
        }
    }
}

#[test]
fn fit_accepts_peak_count() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "c.toml", "[scan.rocking]\ndouble_peak = true\n");
    ok(
        tmp.path(),
        &["rocking", "--config", &cfg, "--out", "r", "--quiet"],
    );
    ok(
        tmp.path(),
        &[
            "fit",
            "--counts",
            "r/counts.csv",
            "--peaks",
            "2",
            "--out",
            "f",
            "--quiet",
        ],
    );
    let s = read_json(tmp.path().join("f/summary.json"));
    assert_eq!(s["n_peaks"], 2);
    let sep = s["peak_separation_rad"].as_f64().unwrap();
    let sigma = s["peak_separation_sigma_rad"].as_f64().unwrap();
    assert!((sep - 2.3e-5).abs() < 3.0 * sigma, "{sep} ± {sigma}");
}

#[test]
fn empty_config_equals_defaults() {
    let tmp = TempDir::new().unwrap();
    let empty = write(tmp.path(), "empty.toml", "");
    ok(
        tmp.path(),
        &["two-flipper", "--config", &empty, "--out", "a", "--quiet"],
    );
    ok(tmp.path(), &["two-flipper", "--out", "b", "--quiet"]);
    assert_eq!(files(&tmp.path().join("a")), files(&tmp.path().join("b")));
    let manifest = read_json(tmp.path().join("a/manifest.json"));
    assert_eq!(manifest["seed"], 1);
    assert_eq!(manifest["config"]["beam"]["wavelength_m"], 1.92e-10);
    assert_eq!(manifest["config"]["noise"]["polarization"], 0.993);
}

#[test]
fn output_directory_precedence() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "c.toml", "output_dir = \"from-config\"\n");
    let run = |extra: &[&str], env: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_ifmsim"));
        cmd.args(["two-flipper", "--quiet", "--config", &cfg])
            .args(extra)
            .current_dir(tmp.path());
        match env {
            Some(v) => cmd.env("IFMSIM_OUT", v),
            None => cmd.env_remove("IFMSIM_OUT"),
        };
        assert!(cmd.status().unwrap().success());
    };
    run(&[], None);
    assert!(tmp.path().join("from-config/summary.txt").exists());
    run(&[], Some("from-env"));
    assert!(tmp.path().join("from-env/summary.txt").exists());
    run(&["--out", "from-flag"], Some("from-env-2"));
    assert!(tmp.path().join("from-flag/summary.txt").exists());
    assert!(!tmp.path().join("from-env-2").exists());

    ok(tmp.path(), &["two-flipper", "--quiet"]);
    assert!(tmp.path().join("ifmsim-out/manifest.json").exists());
}

#[test]
fn seed_flag_overrides_config() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "c.toml", "seed = 99\n");
    ok(
        tmp.path(),
        &["two-flipper", "--config", &cfg, "--out", "a", "--quiet"],
    );
    ok(
        tmp.path(),
        &[
            "two-flipper",
            "--config",
            &cfg,
            "--seed",
            "3",
            "--out",
            "b",
            "--quiet",
        ],
    );
    assert_eq!(read_json(tmp.path().join("a/manifest.json"))["seed"], 99);
    assert_eq!(read_json(tmp.path().join("b/manifest.json"))["seed"], 3);
}

#[test]
fn summary_printed_unless_quiet() {
    let tmp = TempDir::new().unwrap();
    let loud = ok(tmp.path(), &["bell", "--out", "a"]);
    let text = String::from_utf8(loud.stdout).unwrap();
    assert!(
        text.contains("\ns = ")
            && text.contains("s_sigma = ")
            && text.contains("n_sigma_violation = ")
    );
    assert_eq!(
        text,
        std::fs::read_to_string(tmp.path().join("a/summary.txt")).unwrap()
    );
    let quiet = ok(tmp.path(), &["bell", "--out", "b", "--quiet"]);
    assert!(quiet.stdout.is_empty());
}

#[test]
fn usage_errors_exit_one() {
    let tmp = TempDir::new().unwrap();
    for args in [
        &[][..],
        &["launch"],
        &["bell", "--seed", "-1"],
        &["bell", "--bogus"],
        &["fit"],
    ] {
        let out = ifmsim(tmp.path(), args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
    }
    for args in [&["--help"][..], &["--version"], &["bell", "--help"]] {
        let out = ifmsim(tmp.path(), args);
        assert_eq!(out.status.code(), Some(0), "{args:?}");
        assert!(!out.stdout.is_empty());
    }
}

#[test]
fn runtime_errors_exit_two() {
    let tmp = TempDir::new().unwrap();
    let range = write(tmp.path(), "range.toml", "[noise]\ncontrast = 1.3\n");
    let out = ifmsim(tmp.path(), &["bell", "--config", &range, "--out", "x"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("noise.contrast"), "{}", stderr(&out));
    assert!(!tmp.path().join("x").exists());

    let dup = write(
        tmp.path(),
        "dup.toml",
        "[noise]\ncontrast = 0.5\ncontrast = 0.6\n",
    );
    let out = ifmsim(tmp.path(), &["bell", "--config", &dup]);
    assert_eq!(out.status.code(), Some(2));
    assert!(
        stderr(&out).to_lowercase().contains("duplicate"),
        "{}",
        stderr(&out)
    );

    let unknown = write(tmp.path(), "unknown.toml", "[counting]\nbase_rate = 5.0\n");
    let out = ifmsim(tmp.path(), &["bell", "--config", &unknown]);
    assert_eq!(out.status.code(), Some(2));
    assert!(
        stderr(&out).contains("counting") && stderr(&out).contains("base_rate"),
        "{}",
        stderr(&out)
    );

    let out = ifmsim(tmp.path(), &["bell", "--config", "missing.toml"]);
    assert_eq!(out.status.code(), Some(2));

    let out = ifmsim(tmp.path(), &["fit", "--counts", "missing.csv"]);
    assert_eq!(out.status.code(), Some(2));

    let bad = write(
        tmp.path(),
        "bad.csv",
        "detector,alpha_rad,chi_rad,time_s,counts\nO,0,0,1,12\nO,0,zero,1,3\n",
    );
    let out = ifmsim(tmp.path(), &["fit", "--counts", &bad]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));

    let no_flippers = write(
        tmp.path(),
        "nf.toml",
        "[noise]\nflipper_efficiencies = []\n",
    );
    let out = ifmsim(tmp.path(), &["two-flipper", "--config", &no_flippers]);
    assert_eq!(out.status.code(), Some(2));
}
