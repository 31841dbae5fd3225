use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn actsum(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_actsum")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

fn s(p: &Path) -> String {
    p.display().to_string()
}

#[test]
fn user_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = s(tmp.path());
    let bad_key = actsum(&["gen-data", "--set", "no_such_key=1", "--out-dir", &out]);
    assert_eq!(code(&bad_key), 2);
    assert!(String::from_utf8_lossy(&bad_key.stderr).contains("no_such_key"));

    assert_eq!(code(&actsum(&["gen-data", "--kind", "video", "--out-dir", &out])), 2);
    assert_eq!(code(&actsum(&["train", "--input", &s(&tmp.path().join("missing.a3dc")), "--out-dir", &out])), 2);
    assert_eq!(code(&actsum(&["recognize", "--input", &out, "--out-dir", &out])), 2);

    let conf = tmp.path().join("bad.conf");
    fs::write(&conf, "seed = 1\nepochs = many\n").unwrap();
    let bad_file = actsum(&["gen-data", "-c", &s(&conf), "--out-dir", &out]);
    assert_eq!(code(&bad_file), 2);
    assert!(String::from_utf8_lossy(&bad_file.stderr).contains("line 2"));
}

#[test]
fn unknown_subcommand_is_rejected_by_the_parser() {
    assert_eq!(code(&actsum(&["fly"])), 2);
}

#[test]
fn gen_data_and_summarize_are_repeatable() {
    let tmp = tempfile::tempdir().unwrap();
    for run in ["a", "b"] {
        let root = tmp.path().join(run);
        let o = actsum(&["gen-data", "--kind", "shots", "--seed", "4", "--set", "shot_frames=20", "--out-dir", &s(&root.join("shots"))]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let summary = root.join("in.json");
        fs::write(&summary, r#"{"video":"v","fps":25.0,"labels":["a","b"],"subjects":[{"id":0,"kind":"shot","events":[{"action":"b","start":0,"end":20,"confidence":0.75}]}]}"#).unwrap();
        assert!(actsum(&["summarize", "--input", &s(&summary), "--out-dir", &s(&root.join("sum"))]).status.success());
    }
    for f in ["shots/shots.json", "shots/frames/frame_00000.ppm", "sum/summary.json", "sum/summary.svg"] {
        let (a, b) = (tmp.path().join("a").join(f), tmp.path().join("b").join(f));
        assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap(), "{f}");
    }
}
