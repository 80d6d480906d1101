use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const SMALL: &str = r#"
name = "small"
stages = ["spectrum", "stats", "pr", "scars"]

[geometry]
kind = "quarter_stadium"
m_right = 16
n_top = 8

[coins]
alpha = "pi/4"
beta = "pi/3"

[pr]
window = [20.0, 80.0]

[scars]
pr_window = [20.0, 80.0]
"#;

fn aqw(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aqw")).args(args).output().unwrap()
}

fn write_config(dir: &Path, file: &str, text: &str) -> PathBuf {
    let p = dir.join(file);
    fs::write(&p, text).unwrap();
    p
}

fn run(config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", "-c", config.to_str().unwrap(), "-o", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    aqw(&args)
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv" || e == "json") && !p.ends_with("manifest.json"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

#[test]
fn full_run_writes_manifest_and_sidecars() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "small.toml", SMALL);
    let out = tmp.path().join("out");
    let o = run(&cfg, &out, &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let dir = out.join("small");
    let m = manifest(&dir);
    let hash = m["config_hash"].as_str().unwrap();
    assert_eq!(hash.len(), 64);
    assert_eq!(m["completed"], serde_json::json!(["spectrum", "stats", "pr", "scars"]));
    assert_eq!(m["cache"], "miss");
    let artifacts = m["artifacts"].as_array().unwrap();
    assert!(!artifacts.is_empty());
    for a in artifacts {
        let path = dir.join(a["path"].as_str().unwrap());
        assert!(path.exists(), "{}", path.display());
        if path.extension().unwrap() == "csv" {
            let sidecar: Value = serde_json::from_str(&fs::read_to_string(path.with_extension("json")).unwrap()).unwrap();
            assert_eq!(sidecar["config_hash"], hash);
        }
    }
    let fit: Value = serde_json::from_str(&fs::read_to_string(dir.join("brody_fit.json")).unwrap()).unwrap();
    let delta = fit["data"]["fit"]["delta"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&delta));
    let pr: Value = serde_json::from_str(&fs::read_to_string(dir.join("pr_summary.json")).unwrap()).unwrap();
    let dim = pr["data"]["dimension"].as_u64().unwrap() as usize;
    assert_eq!(dim, 2 * pr["data"]["site_count"].as_u64().unwrap() as usize);
    let phases = fs::read_to_string(dir.join("eigenphases.csv")).unwrap();
    assert_eq!(phases.lines().count(), 1 + dim);
}

#[test]
fn rerun_hits_cache_and_reproduces_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "small.toml", SMALL);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let cache = tmp.path().join("cache");
    let cache_arg = ["--cache-dir", cache.to_str().unwrap()];

    assert_eq!(code(&run(&cfg, &a, &cache_arg)), 0);
    let o = run(&cfg, &b, &cache_arg);
    assert_eq!(code(&o), 0);
    assert!(stderr(&o).contains("cache hit"), "{}", stderr(&o));
    assert_eq!(manifest(&b.join("small"))["cache"], "hit");
    assert_eq!(csv_files(&a.join("small")), csv_files(&b.join("small")));

    // a damaged cache entry is replaced, with a warning, and changes nothing
    let entry = fs::read_dir(&cache).unwrap().next().unwrap().unwrap().path();
    let mut bytes = fs::read(&entry).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0xff;
    fs::write(&entry, bytes).unwrap();
    let c = tmp.path().join("c");
    let o = run(&cfg, &c, &cache_arg);
    assert_eq!(code(&o), 0);
    assert!(stderr(&o).contains("warning"), "{}", stderr(&o));
    assert_eq!(manifest(&c.join("small"))["cache"], "recomputed");
    assert_eq!(csv_files(&a.join("small")), csv_files(&c.join("small")));
}

#[test]
fn config_errors_exit_with_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cases = [
        ("odd.toml", SMALL.replace("m_right = 16", "m_right = 15")),
        ("angle.toml", SMALL.replace("beta = \"pi/3\"", "beta = \"pi\"")),
        ("unknown.toml", format!("{SMALL}\nbogus = 3\n")),
        ("stage.toml", SMALL.replace("\"scars\"]", "\"plot\"]")),
        ("orbits.toml", SMALL.replace("[scars]", "[scars]\norbit_file = \"missing.toml\"")),
        ("cap.toml", format!("{SMALL}\n[spectrum]\nmax_dimension = 100\n")),
    ];
    for (file, text) in cases {
        let cfg = write_config(tmp.path(), file, &text);
        let o = run(&cfg, &out, &[]);
        assert_eq!(code(&o), 2, "{file}: {}", stderr(&o));
    }
    assert_eq!(code(&run(&tmp.path().join("absent.toml"), &out, &[])), 2);
    assert_eq!(code(&aqw(&["run"])), 2);
    assert_eq!(code(&aqw(&["frobnicate"])), 2);
}

#[test]
fn other_failures_exit_with_3_and_record_the_stage() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "small.toml", SMALL);
    let blocker = tmp.path().join("not_a_dir");
    fs::write(&blocker, "x").unwrap();
    let out = tmp.path().join("out");
    let o = run(&cfg, &out, &["--cache-dir", blocker.to_str().unwrap()]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    let m = manifest(&out.join("small"));
    assert_eq!(m["failed"]["stage"], "spectrum");
    assert!(m["completed"].as_array().unwrap().is_empty());
}

#[test]
fn evolve_writes_one_frame_per_snapshot() {
    let tmp = tempfile::tempdir().unwrap();
    let text = r#"
        name = "walk"
        stages = ["evolve"]
        [geometry]
        kind = "rectangle"
        m_right = 20
        n_top = 10
        [coins]
        alpha = 0.7853981633974483
        beta = "pi/3"
        [evolution]
        steps = 12
        snapshots = [0, 5, 12]
        keep_amplitudes = true
    "#;
    let cfg = write_config(tmp.path(), "walk.toml", text);
    let out = tmp.path().join("out");
    let o = aqw(&["evolve", "-c", cfg.to_str().unwrap(), "-o", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let dir = out.join("walk");
    for t in [0, 5, 12] {
        let stem = format!("evolve_rectangle_20x10_a0.7854_b1.0472_t{t:04}");
        for ext in ["csv", "json", "png"] {
            assert!(dir.join(format!("{stem}.{ext}")).exists(), "{stem}.{ext}");
        }
        let csv = fs::read_to_string(dir.join(format!("{stem}.csv"))).unwrap();
        let total: f64 = csv.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(dir.join(format!("{stem}_amplitudes.csv")).exists());
    }
    // the evolve stage alone never touches the eigensolver
    assert!(manifest(&dir)["cache"].is_null());
}

#[test]
fn compare_reports_zero_deltas_against_itself() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "small.toml", SMALL);
    let out = tmp.path().join("out");
    assert_eq!(code(&run(&cfg, &out, &[])), 0);
    let dir = out.join("small");
    let o = aqw(&["compare", dir.to_str().unwrap(), cfg.to_str().unwrap(), "-o", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report = String::from_utf8(o.stdout).unwrap();
    assert!(report.contains("mean_pr") && report.contains("brody_delta") && report.contains("scarring"));
    let json: Value =
        serde_json::from_str(&fs::read_to_string(out.join("compare_small_vs_small.json")).unwrap()).unwrap();
    for row in json["rows"].as_array().unwrap() {
        assert_eq!(row["delta"], 0.0, "{row}");
    }

    let partial = write_config(
        tmp.path(),
        "partial.toml",
        &SMALL.replace("name = \"small\"", "name = \"partial\"").replace(", \"scars\"]", "]"),
    );
    assert_eq!(code(&run(&partial, &out, &[])), 0);
    let o = aqw(&[
        "compare",
        dir.to_str().unwrap(),
        out.join("partial").to_str().unwrap(),
        "-o",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn workers_run_independent_configs() {
    let tmp = tempfile::tempdir().unwrap();
    let a = write_config(tmp.path(), "a.toml", SMALL);
    let b = write_config(
        tmp.path(),
        "b.toml",
        &SMALL.replace("name = \"small\"", "name = \"other\"").replace("beta = \"pi/3\"", "beta = \"pi/4\""),
    );
    let out = tmp.path().join("out");
    let o = aqw(&[
        "run",
        "-c",
        a.to_str().unwrap(),
        "-c",
        b.to_str().unwrap(),
        "-o",
        out.to_str().unwrap(),
        "--workers",
        "2",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(out.join("small/manifest.json").exists() && out.join("other/manifest.json").exists());
    assert_eq!(fs::read_dir(out.join("cache")).unwrap().count(), 2);

    let o = aqw(&["run", "-c", a.to_str().unwrap(), "-c", a.to_str().unwrap(), "-o", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}

#[test]
fn selftest_passes() {
    let o = aqw(&["selftest", "--seed", "11", "--trials", "5"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.lines().count() >= 5);
    assert!(text.lines().all(|l| l.starts_with("PASS")));
}

#[test]
fn presets_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("presets");
    let mut n = 0;
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        let name = p.file_name().unwrap().to_string_lossy().into_owned();
        if name.starts_with("orbits") {
            continue;
        }
        // the selftest subcommand loads the configuration for its seed
        let o = aqw(&["selftest", "--trials", "1", "-c", p.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{name}: {}", stderr(&o));
        n += 1;
    }
    assert_eq!(n, 6);
}
