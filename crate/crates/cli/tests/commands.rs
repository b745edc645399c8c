use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;
use slowfast::integrate::read_path_file;
use slowfast_cli::output::{read_manifest, sha256_hex};

const SMALL: &str = r#"
seed_base = 7
[spaces]
slow_dim = 8
fast_dim = 8
[integrator]
step = 0.00048828125
[plan]
mc_paths = 40
"#;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn scratch(name: &str) -> PathBuf {
    let d = Path::new(env!("CARGO_TARGET_TMPDIR")).join(format!("cli-{name}"));
    let _ = fs::remove_dir_all(&d);
    fs::create_dir_all(&d).unwrap();
    d
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.toml");
    fs::write(&p, text).unwrap();
    p
}

fn slowfast(args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_slowfast")).args(args).output().unwrap();
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

fn results(dir: &Path) -> Value {
    serde_json::from_slice(&fs::read(dir.join("results.json")).unwrap()).unwrap()
}

#[test]
fn conditions_on_defaults_pass_all_five_checks() {
    let d = scratch("conditions");
    let out = d.join("out");
    let r = slowfast(&["conditions", "--out", out.to_str().unwrap()]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stdout.contains("conditions: pass"));
    let checks = results(&out)["results"]["checks"].as_array().unwrap().clone();
    assert_eq!(checks.len(), 5);
    assert!(checks.iter().all(|c| c["passed"] == true && c["violations"] == 0));
}

#[test]
fn short_pullback_horizon_fails_with_a_hint() {
    let d = scratch("short");
    let cfg = write_config(&d, "[measure]\nhorizon = 0.1\n");
    let r = slowfast(&["measure", "--config", cfg.to_str().unwrap(), "--out", d.join("out").to_str().unwrap()]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("hint: set [measure] horizon to at least"), "{}", r.stderr);
    assert!(!r.stdout.contains("pass"));
}

#[test]
fn config_errors_exit_one() {
    let d = scratch("badkey");
    let cfg = write_config(&d, "[plan]\nepsilonn = 0.1\n");
    let r = slowfast(&["simulate", "--config", cfg.to_str().unwrap(), "--out", d.join("out").to_str().unwrap()]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("did you mean `epsilon`"), "{}", r.stderr);
    assert!(!d.join("out").exists());
}

#[test]
fn converge_is_byte_identical_across_thread_counts() {
    let d = scratch("threads");
    let cfg = write_config(&d, SMALL);
    let c = cfg.to_str().unwrap();
    let (a, b) = (d.join("a"), d.join("b"));
    assert_eq!(slowfast(&["converge", "--config", c, "--threads", "1", "--out", a.to_str().unwrap()]).code, 0);
    assert_eq!(slowfast(&["converge", "--config", c, "--threads", "8", "--out", b.to_str().unwrap()]).code, 0);
    assert_eq!(fs::read(a.join("results.json")).unwrap(), fs::read(b.join("results.json")).unwrap());
    let timing: Value = serde_json::from_slice(&fs::read(a.join("timing.json")).unwrap()).unwrap();
    assert_eq!(timing["per_eps_seconds"].as_array().unwrap().len(), 3);
    let text = fs::read_to_string(a.join("results.json")).unwrap();
    assert!(!text.contains("seconds") && !text.contains("wall"));
}

#[test]
fn manifest_lists_every_file_with_its_hash() {
    let d = scratch("manifest");
    let cfg = write_config(&d, &format!("{SMALL}\n[output]\nwrite_paths = true\n"));
    let out = d.join("out");
    assert_eq!(slowfast(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]).code, 0);
    let m = read_manifest(&out).unwrap();
    let mut on_disk = Vec::new();
    for sub in ["", "tables", "paths"] {
        for e in fs::read_dir(out.join(sub)).unwrap() {
            let e = e.unwrap();
            if e.file_type().unwrap().is_file() && e.file_name() != "manifest.json" {
                let rel = if sub.is_empty() { e.file_name().into_string().unwrap() } else { format!("{sub}/{}", e.file_name().into_string().unwrap()) };
                on_disk.push(rel);
            }
        }
    }
    on_disk.sort();
    let listed: Vec<String> = m.files.iter().map(|f| f.path.clone()).collect();
    assert_eq!(listed, on_disk);
    for f in &m.files {
        let bytes = fs::read(out.join(&f.path)).unwrap();
        assert_eq!(sha256_hex(&bytes), f.sha256);
        assert_eq!(bytes.len() as u64, f.bytes);
    }
    let path = read_path_file(fs::File::open(out.join("paths/coupled.bin")).unwrap()).unwrap();
    assert_eq!(path.seeds.seed, results(&out)["results"]["seeds"]["seed"].as_u64().unwrap());
}

#[test]
fn verify_accepts_a_faithful_rerun_and_catches_tampering() {
    let d = scratch("verify");
    let cfg = write_config(&d, SMALL);
    let (c, out) = (cfg.to_str().unwrap(), d.join("out"));
    let o = out.to_str().unwrap();
    assert_eq!(slowfast(&["converge", "--config", c, "--out", o]).code, 0);
    let r = slowfast(&["converge", "--config", c, "--out", o, "--verify"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stdout.contains("verified"));

    let r = slowfast(&["converge", "--config", c, "--out", o, "--verify", "--seed", "8"]);
    assert_eq!(r.code, 1);

    let results = out.join("results.json");
    let text = fs::read_to_string(&results).unwrap().replace("\"paths\": 40", "\"paths\": 41");
    fs::write(&results, text).unwrap();
    let r = slowfast(&["converge", "--config", c, "--out", o, "--verify"]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("results.json"), "{}", r.stderr);
}

#[test]
fn flagged_reports_exit_two_without_a_pass_line() {
    let d = scratch("flagged");
    let text = format!("{SMALL}\n[apcheck]\ntaus = [3.141592653589793]\nparticles = 1000\n");
    let cfg = write_config(&d, &text.replace("mc_paths = 40", "mc_paths = 40\nx_amplitude = 10.0"));
    let out = d.join("out");
    let r = slowfast(&["apcheck", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(r.code, 2, "{}{}", r.stdout, r.stderr);
    assert!(r.stdout.contains("flagged"));
    assert!(!r.stdout.contains("pass"));
    assert_eq!(results(&out)["results"]["measure"]["passed"], false);
}

#[test]
fn seed_override_changes_the_run() {
    let d = scratch("seed");
    let cfg = write_config(&d, SMALL);
    let c = cfg.to_str().unwrap();
    let (a, b) = (d.join("a"), d.join("b"));
    assert_eq!(slowfast(&["simulate", "--config", c, "--out", a.to_str().unwrap()]).code, 0);
    assert_eq!(slowfast(&["simulate", "--config", c, "--seed", "8", "--out", b.to_str().unwrap()]).code, 0);
    let (ra, rb) = (results(&a), results(&b));
    assert_eq!(ra["seed_base"], 7);
    assert_eq!(rb["seed_base"], 8);
    assert_ne!(ra["config_hash"], rb["config_hash"]);
    assert_ne!(ra["results"]["x_final"], rb["results"]["x_final"]);
}

#[test]
fn every_subcommand_runs_on_a_small_config() {
    let d = scratch("all");
    let cfg = write_config(&d, &format!("{SMALL}\n[khasminskii]\neps = 0.01\n"));
    for cmd in ["simulate", "frozen", "measure", "average", "khasminskii", "apcheck"] {
        let out = d.join(cmd);
        let r = slowfast(&[cmd, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert!(r.code == 0 || r.code == 2, "{cmd}: {}", r.stderr);
        let doc = results(&out);
        assert_eq!(doc["command"], cmd);
        assert!(out.join("manifest.json").exists());
    }
}
