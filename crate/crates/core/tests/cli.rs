use std::path::Path;
use std::process::{Command, Output};

fn limsup(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_limsup")).current_dir(dir).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn farey_generation_and_dimension() {
    let dir = tempfile::tempdir().unwrap();
    let o = limsup(dir.path(), &["gen", "farey", "--q-max", "300", "--out", "f.txt"]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(dir.path().join("f.txt")).unwrap();
    assert_eq!(text.lines().next(), Some("1 0 1"));

    let o = limsup(dir.path(), &["dim", "--seq", "f.txt", "--delta", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    let row: Vec<&str> = out.lines().nth(1).unwrap().split(',').collect();
    let est: f64 = row[3].parse().unwrap();
    assert!((est - 0.5).abs() <= 0.05, "{est}");
}

#[test]
fn extraction_verbs_write_csv() {
    let dir = tempfile::tempdir().unwrap();
    limsup(dir.path(), &["gen", "farey", "--q-max", "100", "--out", "f.txt"]);
    for mode in ["weakly-redundant", "lower", "upper", "conditioned"] {
        let o = limsup(dir.path(), &["extract", mode, "--seq", "f.txt", "--k-max", "6"]);
        assert!(matches!(o.status.code(), Some(0 | 2)), "{mode}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(stdout(&o).starts_with("index,radius,mass_lo,mass_hi,ratio,kept_by\n"), "{mode}");
    }
    let o = limsup(dir.path(), &["redundancy", "--seq", "f.txt", "--k-max", "6"]);
    assert!(stdout(&o).starts_with("k,count,J_k"));
    let o = limsup(dir.path(), &["cover", "--seq", "f.txt", "--target", "0.5"]);
    assert!(matches!(o.status.code(), Some(0 | 2)));
    let o = limsup(dir.path(), &["bc-check", "--seq", "f.txt", "--ball", "1 0.5 0.25", "--q-max", "50"]);
    assert!(stdout(&o).starts_with("Q,S_Q,P_Q,ratio"));
}

#[test]
fn content_of_a_box() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("s.txt"), "box 0 1\n").unwrap();
    let o = limsup(dir.path(), &["content", "--set", "s.txt", "--s", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let v: f64 = out.lines().nth(1).unwrap().split(',').nth(2).unwrap().parse().unwrap();
    assert!((v - 1.0).abs() < 1e-9);
}

#[test]
fn errors_exit_one_and_flags_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = limsup(dir.path(), &["gen", "random", "--n", "10"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--seed"));
    let o = limsup(dir.path(), &["dim", "--seq", "missing.txt"]);
    assert_eq!(o.status.code(), Some(1));
    // The IFS orbit starts with a ball of radius above 1.
    let o = limsup(dir.path(), &["gen", "ifs", "--measure", "cantor:0.5", "--depth", "3"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning: radius above 1"));
}

#[test]
fn pipeline_and_rerun() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("run.toml"),
        "name='r'\nseed=11\n[generator]\nkind='random'\nn=2000\na=1.0\ndim=1\n[measure]\nkind='lebesgue'\n[pipeline]\nweakly_redundant=true\nk_max=8\n",
    )
    .unwrap();
    let o = limsup(dir.path(), &["pipeline", "--config", "run.toml", "--out", "a"]);
    assert!(matches!(o.status.code(), Some(0 | 2)), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("a/manifest.toml").exists());
    let o = limsup(dir.path(), &["pipeline", "--rerun", "a/manifest.toml", "--out", "b"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));

    // A changed seed on the command line changes the outputs.
    let o = limsup(dir.path(), &["pipeline", "--config", "run.toml", "--seed", "12", "--out", "c"]);
    assert!(matches!(o.status.code(), Some(0 | 2)));
    assert_ne!(
        std::fs::read(dir.path().join("a/sequence.csv")).unwrap(),
        std::fs::read(dir.path().join("c/sequence.csv")).unwrap()
    );
}
