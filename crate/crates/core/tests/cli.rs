use std::path::Path;
use std::process::Command;

use fibercorr::config::parse_config;
use fibercorr::output::{read_matrix_binary, read_ppm, Metrics};
use fibercorr::scenarios::Scenario;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_fibercorr"));
    c.arg("--quiet");
    c
}

fn metrics(dir: &Path) -> Metrics {
    Metrics::parse(&std::fs::read_to_string(dir.join("metrics.txt")).unwrap())
}

const LINEAR: &str = "\
[model]
kind = manakov
[initial]
u0 = 1
[fiber]
length = 1
[grid]
n_points = 512
n_steps = 50
";

const SMALL_PAIR: &str = "\
[model]
kind = manakov
[initial]
shape = pair
u0 = 2
t_sep = 3
d_omega = 1
[fiber]
length = 1
[dispersion]
modulation = sine
period = 1.3
[grid]
n_points = 512
[slots]
time_start = -10
time_end = 10
time_count = 20
[measure]
kinds = xy, complete
";

#[test]
fn squeeze_on_linear_fiber_reports_unity() {
    let dir = tempfile::tempdir().unwrap();
    // A linear fiber has no Kerr terms; emulate it with vanishing power.
    let cfg = dir.path().join("c.ini");
    std::fs::write(&cfg, LINEAR.replace("u0 = 1", "u0 = 1e-9")).unwrap();
    let out = dir.path().join("out");
    let st = bin().args(["squeeze", "--config"]).arg(&cfg).arg("--out").arg(&out).status().unwrap();
    assert!(st.success());
    let m = metrics(&out);
    assert!((m.get_f64("r_min").unwrap() - 1.0).abs() < 1e-9);
    assert!((m.get_f64("r_max").unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn correlate_writes_matrices_and_heatmaps() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.ini");
    std::fs::write(&cfg, SMALL_PAIR).unwrap();
    let out = dir.path().join("out");
    let st = bin()
        .args(["correlate", "--kind", "xy", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(st.success());
    let m = read_matrix_binary(&out.join("corr_xy.bin")).unwrap();
    assert_eq!(m.len(), 20);
    assert!(!out.join("corr_complete.bin").exists());
    let (w, h, _) = read_ppm(&out.join("corr_xy.ppm")).unwrap();
    assert_eq!((w, h), (240, 240));
    assert!(metrics(&out).get("corr.xy.inter.min").is_some());
}

#[test]
fn propagate_and_spectrum_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.ini");
    std::fs::write(&cfg, SMALL_PAIR).unwrap();
    let out = dir.path().join("p");
    let st = bin()
        .args(["propagate", "--trajectory-stride", "50", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(st.success());
    for f in ["intensity_map.ppm", "intensity_map.csv", "spectrum.csv", "output_field.csv", "trajectory.bin", "metrics.txt"] {
        assert!(out.join(f).exists(), "{f}");
    }
    assert!(metrics(&out).get("r_min").is_none());
    let out = dir.path().join("s");
    let st = bin().args(["spectrum", "--config"]).arg(&cfg).arg("--out").arg(&out).status().unwrap();
    assert!(st.success());
    assert!(metrics(&out).get("spectral_maxima").is_some());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.ini");
    std::fs::write(&bad, "[model]\nkind = manakov\n[initial]\nu0 = 2\n[fiber]\nlength = 1\n[dispersion]\nmodulation = sine\nperiod = 0\n").unwrap();
    let out = bin().args(["squeeze", "--config"]).arg(&bad).args(["--out", "x"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("dispersion.period"));

    let blow = dir.path().join("blow.ini");
    std::fs::write(
        &blow,
        "[model]\nkind = manakov\n[initial]\nu0 = 1e200\n[fiber]\nlength = 1\n[grid]\nn_points = 256\nn_steps = 3\n",
    )
    .unwrap();
    let out = bin().args(["propagate", "--config"]).arg(&blow).arg("--out").arg(dir.path().join("b")).output().unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));

    let out = bin().args(["scenario", "fig99", "--out"]).arg(dir.path().join("s")).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = bin().args(["frobnicate"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn scenario_list_and_config_export() {
    let out = bin().args(["scenario", "--list"]).output().unwrap();
    let names: Vec<String> = String::from_utf8(out.stdout).unwrap().lines().map(String::from).collect();
    assert_eq!(names.len(), 12);
    assert!(names.contains(&"fig4_5_mod".to_string()));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fig7c.ini");
    assert!(bin().args(["scenario", "fig7c", "--print-config"]).arg(&path).status().unwrap().success());
    let cfg = parse_config(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(cfg, Scenario::Fig7c.config());
}

#[test]
fn scenario_bundle_is_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let run = |threads: &str, name: &str| {
        let out = dir.path().join(name);
        let st = bin()
            .env("RAYON_NUM_THREADS", threads)
            .args(["scenario", "fig1", "--n-points", "512", "--steps", "300", "--time-count", "40", "--out"])
            .arg(&out)
            .status()
            .unwrap();
        assert!(st.success());
        out
    };
    let a = run("1", "a");
    let b = run("4", "b");
    let mut files: Vec<_> = std::fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    files.sort();
    for f in ["intensity_map.ppm", "spectrum.csv", "metrics.txt", "corr_complete.ppm", "spec_p0_complete.bin"] {
        assert!(files.iter().any(|x| x == f), "{f} missing");
    }
    for f in files {
        assert_eq!(std::fs::read(a.join(&f)).unwrap(), std::fs::read(b.join(&f)).unwrap(), "{f:?} differs");
    }
}

#[test]
fn convert_produces_a_runnable_config() {
    let dir = tempfile::tempdir().unwrap();
    let phys = dir.path().join("phys.ini");
    std::fs::write(
        &phys,
        "[fiber]\nmodel = manakov\nlength = 2000\ngamma = 2e-3\na_eff = 5e-11\n\
         [pulse]\nt0 = 1e-12\npeak_power = 1.6\n\
         [dispersion]\nbeta2_avg = -2e-26\nmodulation = sine\nperiod = 650\n",
    )
    .unwrap();
    let out = dir.path().join("norm.ini");
    assert!(bin().args(["convert", "--config"]).arg(&phys).arg("--out").arg(&out).status().unwrap().success());
    let text = std::fs::read_to_string(&out).unwrap();
    let scale = |key: &str| -> f64 {
        let line = text.lines().find(|l| l.starts_with(&format!("# scale: {key} = "))).unwrap();
        line.rsplit(' ').next().unwrap().parse().unwrap()
    };
    assert!((scale("length_unit_m") - 50.0).abs() < 1e-12);
    // |beta2| / (2 gamma T0^2) = 2e-26 / (4e-27)
    assert!((scale("power_unit_w") - 5.0).abs() < 1e-12);
    let cfg = parse_config(&text).unwrap();
    assert!((cfg.length - 40.0).abs() < 1e-12);
    assert!((cfg.dispersion.modulation.period - 13.0).abs() < 1e-12);
    assert!((cfg.initial.u0() - (1.6f64 / 5.0).sqrt()).abs() < 1e-12);
}
