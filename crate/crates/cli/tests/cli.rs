use std::path::Path;
use std::process::Command;

fn roachlab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_roachlab"))
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn simulate_writes_identical_files_twice() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "run.toml",
        "[grid]\nn = 32\n[time]\nt_end = 0.1\nseries_every = 10\n[ic]\nseed = 4\nnoise_amplitude = 0.01\n",
    );
    let out = tmp.path().join("out");
    let mut outputs = Vec::new();
    for _ in 0..2 {
        let st = roachlab()
            .args(["simulate", "--quiet", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap();
        assert!(st.success());
        assert!(out.join("series.csv").exists() && out.join("series.gp").exists());
        outputs.push(std::fs::read(out.join("snapshot_000.csv")).unwrap());
        std::fs::remove_dir_all(&out).unwrap();
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn seed_flag_changes_the_noise() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "run.toml",
        "[grid]\nn = 16\n[time]\nt_end = 0.01\n[ic]\nnoise_amplitude = 0.01\n",
    );
    let mut outputs = Vec::new();
    for seed in ["1", "2"] {
        let out = tmp.path().join(seed);
        let st = roachlab()
            .args(["simulate", "--quiet", "--seed", seed, "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap();
        assert!(st.success());
        outputs.push(std::fs::read_to_string(out.join("snapshot_000.csv")).unwrap());
    }
    assert_ne!(outputs[0], outputs[1]);
    assert!(outputs[1].contains("# seed = 2"));
}

#[test]
fn validation_error_exits_1_and_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "bad.toml", "[model]\neps = 0.0\n");
    let out = tmp.path().join("never");
    let res = roachlab()
        .args(["linstab", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("eps"));
    assert!(!out.exists());
}

#[test]
fn noise_without_a_seed_exits_1() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "noisy.toml", "[ic]\nnoise_amplitude = 0.01\n");
    let res = roachlab().args(["simulate", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("seed"));
}

#[test]
fn unknown_key_exits_1() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "bad.toml", "[grid]\ncells = 3\n");
    let res = roachlab().args(["simulate", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("cells"));
}

#[test]
fn numerical_failure_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    // Crank-Nicolson with a large step overshoots below zero on a rough profile
    let cfg = write(
        tmp.path(),
        "cn.toml",
        "[grid]\nn = 256\n[time]\ndt = 0.5\nt_end = 1.0\nscheme = \"imex-cn\"\n[ic]\nseed = 1\nnoise_amplitude = 1.0\nnoise_target = \"all\"\n",
    );
    let out = tmp.path().join("o");
    let res = roachlab()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(res.status.code(), Some(2), "{}", String::from_utf8_lossy(&res.stderr));
    assert!(String::from_utf8_lossy(&res.stderr).contains("positivity"));
    assert!(!out.exists());
}

#[test]
fn neutral_curve_and_linstab_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "nsc.toml",
        "[neutral]\nmodes = [1, 2]\nparam_steps = 100\nd_steps = 100\n[linstab]\nsteps = 11\n",
    );
    for (cmd, file) in [("neutral-curve", "neutral.csv"), ("linstab", "linstab.csv")] {
        let out = tmp.path().join(cmd);
        let st = roachlab()
            .args([cmd, "--quiet", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap();
        assert!(st.success());
        let text = std::fs::read_to_string(out.join(file)).unwrap();
        assert!(text.starts_with("# command: "));
    }
}

#[test]
fn eps_sweep_has_a_slopes_footer() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "sweep.toml",
        "[sweep]\nn = 16\ndt = 1e-4\nt_end = 0.05\neps = [0.1, 0.01, 0.001]\n",
    );
    let out = tmp.path().join("s");
    let st = roachlab()
        .args(["eps-sweep", "--quiet", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(st.success());
    let text = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert!(text.lines().last().unwrap().starts_with("# slopes: gap_u="));
    assert!(text.contains("eps,gap_u_L2,gap_v_L2,defect_L2,rel21_residual"));
}

#[test]
fn continue_writes_branch_and_event_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "cont.toml",
        "[model]\nkind = \"rd3-growth\"\n[grid]\nn = 32\n[continuation]\nstart = 7.5\nguess = \"constant\"\ndirection = \"down\"\nparam_min = 6.0\nparam_max = 8.0\nds = 0.05\nds_max = 0.2\n",
    );
    let out = tmp.path().join("c");
    let res = roachlab()
        .args(["continue", "--quiet", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let events = std::fs::read_to_string(out.join("events.csv")).unwrap();
    assert!(events.lines().any(|l| l.starts_with("0,pitchfork,6.98")), "{events}");
    let branches = std::fs::read_to_string(out.join("branches.csv")).unwrap();
    assert!(branches.contains(",pitchfork\n"));
}

#[test]
fn shipped_configs_are_valid() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let text = std::fs::read_to_string(&path).unwrap();
            roachlab::config::parse_config(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            seen += 1;
        }
    }
    assert!(seen >= 5);
}
