use std::path::Path;
use std::process::{Command, Output};

use hsstv_core::HsCube;
use tempfile::TempDir;

fn hsstv(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hsstv"))
        .current_dir(dir)
        .env_remove("HSSTV_THREADS")
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn table(path: &Path) -> toml::Table {
    std::fs::read_to_string(path).unwrap().parse().unwrap()
}

fn float(t: &toml::Table, section: &str, key: &str) -> f64 {
    let v = &t[section][key];
    v.as_float()
        .or_else(|| v.as_integer().map(|i| i as f64))
        .unwrap()
}

#[test]
fn missing_truth_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let out = hsstv(dir.path(), &["simulate", "--truth", "nope.hsc"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("nope.hsc"), "{}", stderr(&out));

    let out = hsstv(dir.path(), &["simulate"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn simulate_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let args = |out: &'static str| {
        [
            "simulate",
            "--preset",
            "fuse-r2",
            "--synthetic",
            "textured:8x8x6",
            "--seed",
            "7",
            "--out",
            out,
        ]
    };
    assert_eq!(code(&hsstv(dir.path(), &args("a"))), 0);
    assert_eq!(code(&hsstv(dir.path(), &args("b"))), 0);
    for file in ["truth.hsc", "v.hsc", "g.hsc"] {
        let a = std::fs::read(dir.path().join("a").join(file)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file}");
    }
    let g = HsCube::load(dir.path().join("a/g.hsc")).unwrap();
    assert_eq!((g.nv(), g.nh(), g.bands()), (8, 8, 4));

    let other = hsstv(
        dir.path(),
        &[
            "simulate",
            "--preset",
            "fuse-r2",
            "--synthetic",
            "textured:8x8x6",
            "--seed",
            "8",
            "--out",
            "c",
        ],
    );
    assert_eq!(code(&other), 0);
    assert_ne!(
        std::fs::read(dir.path().join("a/v.hsc")).unwrap(),
        std::fs::read(dir.path().join("c/v.hsc")).unwrap()
    );
}

#[test]
fn preset_weights_are_recorded() {
    let dir = TempDir::new().unwrap();
    let out = hsstv(
        dir.path(),
        &[
            "simulate",
            "--preset",
            "pan-r2",
            "--synthetic",
            "blocks:8x8x4",
            "--out",
            "s",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let meta = table(&dir.path().join("s/meta.toml"));
    assert_eq!(float(&meta, "problem", "omega"), 0.01);
    assert_eq!(float(&meta, "problem", "lambda"), 0.04);
    assert_eq!(float(&meta, "problem", "rho"), 1.0);
    assert_eq!(meta["problem"]["p"].as_integer(), Some(2));
    assert_eq!(float(&meta, "degradation", "sigma_g"), 0.02);
    assert!(float(&meta, "simulation", "epsilon_oracle") > 0.0);
}

#[test]
fn weights_outside_tuned_ranges_warn() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("c.toml"), "[problem]\nomega = 0.5\n").unwrap();
    let out = hsstv(
        dir.path(),
        &[
            "simulate",
            "--config",
            "c.toml",
            "--synthetic",
            "blocks:8x8x4",
            "--out",
            "s",
        ],
    );
    assert_eq!(code(&out), 0);
    assert!(
        stderr(&out).contains("omega = 0.5 is outside"),
        "{}",
        stderr(&out)
    );
}

fn write_quadrant_truth(path: &Path) -> HsCube {
    let spectra = [
        [0.2, 0.3, 0.4],
        [0.7, 0.6, 0.5],
        [0.5, 0.5, 0.2],
        [0.1, 0.8, 0.3],
    ];
    let mut data = vec![0.0; 48];
    for k in 0..3 {
        for c in 0..4 {
            for r in 0..4 {
                data[k * 16 + c * 4 + r] = spectra[2 * (r / 2) + c / 2][k];
            }
        }
    }
    let cube = HsCube::new(data, 4, 4, 3).unwrap();
    cube.save(path).unwrap();
    cube
}

#[test]
fn noiseless_pipeline_recovers_truth() {
    let dir = TempDir::new().unwrap();
    let truth = write_quadrant_truth(&dir.path().join("truth.hsc"));
    let config = "\
[paths]
truth = \"truth.hsc\"
[degradation]
ratio = 1
sigma_v = 0.0
sigma_g = 0.0
blur = \"identity\"
[response]
range = [1, 2]
[problem]
lambda = 0.001
rho = 0.001
[solver]
rel_tol = 1e-8
";
    std::fs::write(dir.path().join("exact.toml"), config).unwrap();
    let sim = hsstv(
        dir.path(),
        &["simulate", "--config", "exact.toml", "--out", "sim"],
    );
    assert_eq!(code(&sim), 0, "{}", stderr(&sim));
    let fuse = hsstv(
        dir.path(),
        &[
            "fuse",
            "--config",
            "exact.toml",
            "--input",
            "sim",
            "--out",
            "fz",
        ],
    );
    assert_eq!(code(&fuse), 0, "{}", stderr(&fuse));
    // lambda and rho sit below the tuned range
    assert!(stderr(&fuse).contains("lambda = 0.001 is outside"));

    let u = HsCube::load(dir.path().join("fz/u.hsc")).unwrap();
    let err: f64 = u
        .data()
        .iter()
        .zip(truth.data())
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    let norm = truth.data().iter().map(|x| x * x).sum::<f64>().sqrt();
    assert!(err / norm < 1e-3, "relative error {:e}", err / norm);

    let manifest = table(&dir.path().join("fz/manifest.toml"));
    assert_eq!(manifest["run"]["status"].as_str(), Some("converged"));
    assert_eq!(float(&manifest, "run", "epsilon"), 0.0);

    let ev = hsstv(
        dir.path(),
        &[
            "evaluate",
            "--config",
            "exact.toml",
            "--estimate",
            "fz/u.hsc",
            "--out",
            "ev",
        ],
    );
    assert_eq!(code(&ev), 0, "{}", stderr(&ev));
    let csv = std::fs::read_to_string(dir.path().join("ev/metrics.csv")).unwrap();
    let psnr: f64 = csv
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert!(psnr > 60.0, "{csv}");
}

#[test]
fn desk_scale_fusion_via_cli() {
    let dir = TempDir::new().unwrap();
    let sim = hsstv(
        dir.path(),
        &[
            "simulate",
            "--preset",
            "pan-r2",
            "--synthetic",
            "blocks:32x32x16",
            "--out",
            "sim",
        ],
    );
    assert_eq!(code(&sim), 0, "{}", stderr(&sim));
    let fuse = hsstv(
        dir.path(),
        &[
            "fuse", "--preset", "pan-r2", "--gamma", "auto", "--input", "sim", "--out", "fz",
        ],
    );
    assert_eq!(code(&fuse), 0, "{}", stderr(&fuse));

    let trace = std::fs::read_to_string(dir.path().join("fz/trace.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(lines.next(), Some("iter,objective,rel_change,v_gap,g_gap"));
    let last: f64 = lines
        .last()
        .unwrap()
        .split(',')
        .nth(2)
        .unwrap()
        .parse()
        .unwrap();
    assert!(last < 1e-4, "{last:e}");

    // auto steps satisfy the squared condition with margin
    let manifest = table(&dir.path().join("fz/manifest.toml"));
    let (g1, g2, norm) = (
        float(&manifest, "run", "gamma1"),
        float(&manifest, "run", "gamma2"),
        float(&manifest, "run", "norm_estimate"),
    );
    assert!(g1 * g2 * norm * norm <= 1.0 / 1.01f64.powi(2) + 1e-12);

    let ev = hsstv(
        dir.path(),
        &[
            "evaluate",
            "--estimate",
            "fz/u.hsc",
            "--truth",
            "sim/truth.hsc",
            "--per-band",
            "--out",
            "ev",
        ],
    );
    assert_eq!(code(&ev), 0, "{}", stderr(&ev));
    let per_band = std::fs::read_to_string(dir.path().join("ev/per_band.csv")).unwrap();
    assert_eq!(per_band.lines().count(), 17);

    // the manifest reproduces the run exactly
    let again = hsstv(
        dir.path(),
        &["fuse", "--config", "fz/manifest.toml", "--out", "fz2"],
    );
    assert_eq!(code(&again), 0, "{}", stderr(&again));
    for file in ["u.hsc", "q.hsc", "trace.csv"] {
        assert_eq!(
            std::fs::read(dir.path().join("fz").join(file)).unwrap(),
            std::fs::read(dir.path().join("fz2").join(file)).unwrap(),
            "{file}"
        );
    }
}

#[test]
fn evaluate_identical_cubes() {
    let dir = TempDir::new().unwrap();
    write_quadrant_truth(&dir.path().join("t.hsc"));
    let out = hsstv(
        dir.path(),
        &[
            "evaluate",
            "--estimate",
            "t.hsc",
            "--truth",
            "t.hsc",
            "--out",
            "ev",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv = std::fs::read_to_string(dir.path().join("ev/metrics.csv")).unwrap();
    assert_eq!(csv, "psnr_db,sam_deg,ergas\ninf,0,0\n");
}

#[test]
fn malformed_cube_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    write_quadrant_truth(&dir.path().join("t.hsc"));
    let bytes = std::fs::read(dir.path().join("t.hsc")).unwrap();
    std::fs::write(dir.path().join("cut.hsc"), &bytes[..bytes.len() - 5]).unwrap();
    let out = hsstv(
        dir.path(),
        &[
            "evaluate",
            "--estimate",
            "cut.hsc",
            "--truth",
            "t.hsc",
            "--out",
            "ev",
        ],
    );
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("byte offset"), "{}", stderr(&out));
}

#[test]
fn dimension_mismatch_is_reported() {
    let dir = TempDir::new().unwrap();
    write_quadrant_truth(&dir.path().join("t.hsc"));
    HsCube::new(vec![0.5; 12], 2, 2, 3)
        .unwrap()
        .save(dir.path().join("small.hsc"))
        .unwrap();
    let out = hsstv(
        dir.path(),
        &[
            "evaluate",
            "--estimate",
            "small.hsc",
            "--truth",
            "t.hsc",
            "--out",
            "ev",
        ],
    );
    assert_eq!(code(&out), 2);
    assert!(
        stderr(&out).contains("dimension mismatch"),
        "{}",
        stderr(&out)
    );
}

#[test]
fn check_passes_and_names_a_perturbed_operator() {
    let dir = TempDir::new().unwrap();
    let ok = hsstv(dir.path(), &["check"]);
    assert_eq!(code(&ok), 0, "{}", String::from_utf8_lossy(&ok.stdout));

    let bad = hsstv(dir.path(), &["check", "--perturb-adjoint", "B"]);
    assert_eq!(code(&bad), 1);
    let stdout = String::from_utf8_lossy(&bad.stdout);
    assert!(stdout.contains("FAIL adjoint B ["), "{stdout}");
    assert!(!stdout.contains("FAIL adjoint D ["), "{stdout}");
}

#[test]
fn bad_arguments_are_usage_errors() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&hsstv(dir.path(), &["fuse", "--gamma", "0.1"])), 2);
    assert_eq!(code(&hsstv(dir.path(), &["fuse", "--preset", "pan-r3"])), 2);
    assert_eq!(code(&hsstv(dir.path(), &["bogus"])), 2);

    let out = Command::new(env!("CARGO_BIN_EXE_hsstv"))
        .current_dir(dir.path())
        .env("HSSTV_THREADS", "zero")
        .arg("check")
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
}

#[test]
fn oracle_radii_need_metadata() {
    let dir = TempDir::new().unwrap();
    let sim = hsstv(
        dir.path(),
        &["simulate", "--synthetic", "blocks:8x8x4", "--out", "sim"],
    );
    assert_eq!(code(&sim), 0);
    std::fs::remove_file(dir.path().join("sim/meta.toml")).unwrap();
    let out = hsstv(dir.path(), &["fuse", "--input", "sim", "--out", "fz"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("oracle radii"), "{}", stderr(&out));

    std::fs::write(
        dir.path().join("blind.toml"),
        "[problem]\nradii = \"blind\"\n",
    )
    .unwrap();
    let out = hsstv(
        dir.path(),
        &[
            "fuse",
            "--config",
            "blind.toml",
            "--input",
            "sim",
            "--out",
            "fz",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
}
