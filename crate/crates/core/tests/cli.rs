use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn dyndepth(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dyndepth"))
        .args(args)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn config_prints_effective_settings() {
    let o = dyndepth(&[
        "config",
        "--seed",
        "9",
        "--loss-mode",
        "temporal",
        "--weight-mode",
        "sum-up",
    ]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("seed = 9"));
    assert!(text.contains("loss_mode = \"temporal\""));
    assert!(text.contains("weight_mode = \"sum-up\""));
}

#[test]
fn config_problems_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("unknown.toml", "bogus = 1\n"),
        ("syntax.toml", "seed = \n"),
        ("invalid.toml", "[optim]\nstep_size = -1.0\n"),
        ("scenes.toml", "scenes = 0\n"),
        ("missing.toml", "[scene]\nfile = \"nowhere.toml\"\n"),
    ];
    for (name, body) in cases {
        let p = dir.path().join(name);
        fs::write(&p, body).unwrap();
        let o = dyndepth(&["--config", path(&p), "config"]);
        assert_eq!(code(&o), 2, "{name}: {}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(
        code(&dyndepth(&[
            "--config",
            path(&dir.path().join("absent.toml")),
            "config"
        ])),
        2
    );
}

#[test]
fn simulate_then_eval_ground_truth() {
    let dir = tempfile::tempdir().unwrap();
    let o = dyndepth(&["simulate", "--seed", "4", "--out", path(dir.path())]);
    assert_eq!(code(&o), 0);
    let gt = dir.path().join("scene_0004/gt_depth.pgm");
    let o = dyndepth(&["eval", "--pred", path(&gt), "--gt", path(&gt)]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().nth(1).unwrap(), "0.0,0.0,0.0,0.0,1.0,1.0,1.0");
}

#[test]
fn contract_violations_exit_with_3() {
    let dir = tempfile::tempdir().unwrap();
    dyndepth(&["simulate", "--out", path(dir.path())]);
    let gt = dir.path().join("scene_0000/gt_depth.pgm");

    let small = dir.path().join("small.pgm");
    fs::write(&small, b"P5\n2 2\n65535\n\x00\x01\x00\x01\x00\x01\x00\x01").unwrap();
    fs::write(dir.path().join("small.pgm.scale"), "meters_per_unit = 1.0\n").unwrap();
    let o = dyndepth(&["eval", "--pred", path(&small), "--gt", path(&gt)]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));

    let o = dyndepth(&["loss", "--depth", path(&small)]);
    assert_eq!(code(&o), 3);

    let garbage = dir.path().join("garbage.pgm");
    fs::write(&garbage, b"not an image").unwrap();
    let o = dyndepth(&["eval", "--pred", path(&garbage), "--gt", path(&gt)]);
    assert_eq!(code(&o), 3);
}

#[test]
fn unknown_flags_are_rejected() {
    assert_ne!(code(&dyndepth(&["optimize", "--loss-mode", "nonsense"])), 0);
    assert_ne!(code(&dyndepth(&["frobnicate"])), 0);
}
