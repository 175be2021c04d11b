use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn oamem(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oamem")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut all: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    all.sort();
    all
}

fn quick_config(dir: &Path) -> String {
    write(
        dir,
        "quick.conf",
        "# short runs\nsimulate.duration_s = 0.02\ncorrelation.duration_s = 5\ntomography.shots = 500\n",
    )
}

#[test]
fn simulate_then_analyze() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = quick_config(tmp.path());
    let sim = tmp.path().join("sim");
    let out = oamem(&["--config", &cfg, "--seed", "5", "--out", sim.to_str().unwrap(), "simulate"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(sim.join("timetags.csv").exists());
    assert!(sim.join("simulation.json").exists());

    let ana = tmp.path().join("ana");
    let out = oamem(&["--out", ana.to_str().unwrap(), "analyze", sim.join("timetags.csv").to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["histogram.csv", "g2.csv", "analysis.json", "alpha.json"] {
        assert!(ana.join(name).exists(), "{name} missing");
    }
    let summary: String = fs::read_to_string(ana.join("analysis.json")).unwrap();
    assert!(summary.contains("peak_g2"));
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = quick_config(tmp.path());
    for cmd in ["simulate", "tomography", "interference", "image"] {
        let a = tmp.path().join(format!("{cmd}-a"));
        let b = tmp.path().join(format!("{cmd}-b"));
        for dir in [&a, &b] {
            let out = oamem(&["--config", &cfg, "--seed", "42", "--out", dir.to_str().unwrap(), cmd]);
            assert_eq!(code(&out), 0, "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
        }
        assert_eq!(files(&a), files(&b), "{cmd} outputs differ");
    }
}

#[test]
fn seeds_change_simulated_tags() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = quick_config(tmp.path());
    let run = |seed: &str| {
        let dir = tmp.path().join(format!("s{seed}"));
        assert_eq!(code(&oamem(&["--config", &cfg, "--seed", seed, "--out", dir.to_str().unwrap(), "simulate"])), 0);
        fs::read(dir.join("timetags.csv")).unwrap()
    };
    assert_ne!(run("1"), run("2"));
}

#[test]
fn every_subcommand_writes_its_files() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = quick_config(tmp.path());
    let expected: [(&str, &[&str]); 4] = [
        ("correlation", &["g2_vs_storage.csv", "decay_fit.json"]),
        ("image", &["input_profile.csv", "retrieved_profile.csv", "input.pgm", "retrieved.pgm", "metrics.json"]),
        ("tomography", &["tomography_data.json", "chi.json", "fidelities.json"]),
        (
            "interference",
            &[
                "pattern_theta22.5.pgm",
                "pattern_theta67.5.pgm",
                "pattern_theta112.5.pgm",
                "pattern_theta157.5.pgm",
                "fringe.csv",
                "visibility.json",
            ],
        ),
    ];
    for (cmd, names) in expected {
        let dir = tmp.path().join(cmd);
        let out = oamem(&["--config", &cfg, "--out", dir.to_str().unwrap(), cmd]);
        assert_eq!(code(&out), 0, "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
        for name in names {
            assert!(dir.join(name).exists(), "{cmd}: {name} missing");
        }
    }
}

#[test]
fn tomography_round_trips_through_measured_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = quick_config(tmp.path());
    let first = tmp.path().join("first");
    assert_eq!(code(&oamem(&["--config", &cfg, "--out", first.to_str().unwrap(), "tomography"])), 0);
    let second = tmp.path().join("second");
    let data = first.join("tomography_data.json");
    let out = oamem(&["--out", second.to_str().unwrap(), "tomography", "--input", data.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read(first.join("chi.json")).unwrap(), fs::read(second.join("chi.json")).unwrap());
}

#[test]
fn config_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    let out_dir = out_dir.to_str().unwrap();
    let cases = [
        ("unknown.conf", "source.colour = 3\n"),
        ("syntax.conf", "this line has no equals sign\n"),
        ("value.conf", "memory.eta0 = lots\n"),
        ("range.conf", "memory.eta0 = 1.5\n"),
        ("both.conf", "source.pair_rate = 1000\nsource.target_peak_g2 = 50\n"),
        ("seeds.conf", "seeds = \n"),
    ];
    for (name, text) in cases {
        let path = write(tmp.path(), name, text);
        let out = oamem(&["--config", &path, "--out", out_dir, "image"]);
        assert_eq!(code(&out), 2, "{name}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
    }
    let missing = tmp.path().join("missing.conf");
    assert_eq!(code(&oamem(&["--config", missing.to_str().unwrap(), "image"])), 2);
}

#[test]
fn error_messages_carry_the_config_line() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write(tmp.path(), "bad.conf", "# header\n\nbeam.l = 1\nbeam.waist_mm = wide\n");
    let out = oamem(&["--config", &path, "image"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 4"), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn data_errors_exit_3() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    let out_dir = out_dir.to_str().unwrap();
    let cases = [
        ("malformed.csv", "channel,t_ns\n1,10\n2,ten\n"),
        ("header.csv", "time,channel\n10,1\n"),
        ("unsorted.csv", "channel,t_ns\n1,10\n2,5\n"),
        ("short.csv", "channel,t_ns\n1\n"),
    ];
    for (name, text) in cases {
        let path = write(tmp.path(), name, text);
        let out = oamem(&["--out", out_dir, "analyze", &path]);
        assert_eq!(code(&out), 3, "{name}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let missing = tmp.path().join("nope.csv");
    assert_eq!(code(&oamem(&["--out", out_dir, "analyze", missing.to_str().unwrap()])), 3);

    let bad_json = write(tmp.path(), "counts.json", "{\"H\": {\"H\": {\"clicks\": 5}}}");
    assert_eq!(code(&oamem(&["--out", out_dir, "tomography", "--input", &bad_json])), 3);
}

#[test]
fn sparse_correlation_run_is_a_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write(tmp.path(), "sparse.conf", "correlation.duration_s = 0.001\n");
    let out = oamem(&["--config", &path, "--out", tmp.path().join("o").to_str().unwrap(), "correlation"]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("insufficient statistics"));
}

#[test]
fn malformed_row_reports_its_line() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write(tmp.path(), "bad.csv", "channel,t_ns\n1,10\n1,20\nx,30\n");
    let out = oamem(&["--out", tmp.path().join("o").to_str().unwrap(), "analyze", &path]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 4"), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn empty_input_warns_and_succeeds() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("o");
    for (name, text) in [("empty.csv", ""), ("header_only.csv", "channel,t_ns\n")] {
        let path = write(tmp.path(), name, text);
        let out = oamem(&["--out", dir.to_str().unwrap(), "analyze", &path]);
        assert_eq!(code(&out), 0, "{name}");
        assert!(String::from_utf8_lossy(&out.stderr).contains("warning"), "{name}");
        assert_eq!(fs::read_to_string(dir.join("histogram.csv")).unwrap(), "tau_ns,counts\n");
    }
}

#[test]
fn usage_errors_are_reported_by_clap() {
    let out = oamem(&["frobnicate"]);
    assert_ne!(code(&out), 0);
    let out = oamem(&["--help"]);
    assert_eq!(code(&out), 0);
    for cmd in ["simulate", "analyze", "correlation", "image", "tomography", "interference"] {
        assert!(String::from_utf8_lossy(&out.stdout).contains(cmd), "{cmd} missing from help");
    }
}
