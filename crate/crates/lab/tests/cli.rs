use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
[damping]
amplitude = 1.0
shape = { kind = "boundary_collar", width = 0.1 }

[numerics]
nx = 12
modes = 6
t_end = 1.0
dt = 0.01

[gcc]
sampler = { kind = "grid", nx = 6, ndir = 12 }

[resolvent]
points = 4

[observability]
check_states = 2

[lame]
eps = [0.1, 0.01]
"#;

const KINDS: [&str; 8] = [
    "trace",
    "gcc",
    "simulate",
    "spectrum",
    "resolvent",
    "observability",
    "lame",
    "diagnostics",
];

fn hypstokes(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hypstokes"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    out.sort();
    out
}

#[test]
fn every_subcommand_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("small.toml");
    fs::write(&cfg, SMALL).unwrap();
    for kind in KINDS {
        let mut runs = Vec::new();
        for rep in 0..2 {
            let out = tmp.path().join(format!("{kind}-{rep}"));
            let o = hypstokes(&[kind, cfg.to_str().unwrap(), "-o", out.to_str().unwrap()]);
            assert!(o.status.success(), "{kind}: {}", String::from_utf8_lossy(&o.stderr));
            runs.push(files(&out));
        }
        assert!(!runs[0].is_empty());
        assert_eq!(runs[0], runs[1], "{kind} output differs between runs");
    }
}

#[test]
fn gcc_square_collar_is_fully_covered() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("gcc.toml");
    fs::write(
        &cfg,
        "experiment = \"gcc\"\n[damping]\namplitude = 1.0\nshape = { kind = \"boundary_collar\", width = 0.1 }\n[gcc]\nhorizon = 2.0\nsampler = { kind = \"grid\", nx = 8, ndir = 16 }\n",
    )
    .unwrap();
    let o = hypstokes(&["gcc", cfg.to_str().unwrap(), "-o", tmp.path().to_str().unwrap()]);
    assert!(o.status.success());
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("gcc.json")).unwrap()).unwrap();
    assert_eq!(v["report"]["covered_fraction"].as_f64(), Some(1.0));
    assert_eq!(v["config"]["experiment"], "gcc");
}

#[test]
fn undamped_simulation_has_constant_energy() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("sim.toml");
    fs::write(&cfg, "[numerics]\nnx = 12\nmodes = 4\nt_end = 1.0\ndt = 0.01\n").unwrap();
    let o = hypstokes(&["simulate", cfg.to_str().unwrap(), "-o", tmp.path().to_str().unwrap()]);
    assert!(o.status.success());
    let text = fs::read_to_string(tmp.path().join("energy.csv")).unwrap();
    assert!(text.starts_with("# hypstokes-lab"));
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let e: Vec<f64> = rdr
        .records()
        .map(|r| r.unwrap()[1].parse().unwrap())
        .collect();
    assert_eq!(e.len(), 101);
    assert!(e.iter().all(|x| (x - e[0]).abs() <= 1e-12 * e[0]));
}

#[test]
fn config_errors_exit_with_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    fs::write(&cfg, "[numerics]\nnx = 12\ndt = -0.5\n").unwrap();
    let o = hypstokes(&["simulate", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&o.stderr);
    assert!(msg.contains("numerics.dt") && msg.contains("line 3"), "{msg}");

    fs::write(&cfg, "experiment = \"gcc\"\n").unwrap();
    let o = hypstokes(&["trace", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    let o = hypstokes(&["trace", tmp.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn numeric_failures_exit_with_3() {
    // more modes than the discrete divergence-free space holds
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("many.toml");
    fs::write(&cfg, "[numerics]\nnx = 4\nmodes = 50\n").unwrap();
    let o = hypstokes(&["spectrum", cfg.to_str().unwrap(), "-o", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}
