use std::path::PathBuf;
use std::process::Command;

use serde_json::Value;

fn data(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "data", name].iter().collect();
    p.to_string_lossy().into_owned()
}

fn run(args: &[&str], inputs: &[&str]) -> (i32, Value, Vec<u8>) {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_hdflow"));
    cmd.args(args);
    for i in inputs {
        cmd.arg("--input").arg(i);
    }
    let out = cmd.output().expect("binary runs");
    let v: Value = if out.stdout.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
            panic!("{e}: {}", String::from_utf8_lossy(&out.stdout));
        })
    };
    (out.status.code().unwrap(), v, out.stdout)
}

fn tmp(name: &str) -> String {
    let dir = std::env::temp_dir().join(format!("hdflow-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name).to_string_lossy().into_owned()
}

#[test]
fn validate_bundled_cover() {
    let (code, v, _) = run(&["validate"], &[&data("p1_cover.json")]);
    assert_eq!(code, 0);
    assert_eq!(v["schema"], "hdflow.report/1");
    assert_eq!(v["ok"], true);
}

#[test]
fn validate_rejects_unknown_schema() {
    let p = tmp("junk.json");
    std::fs::write(&p, r#"{"schema": "nope/1"}"#).unwrap();
    let (code, v, _) = run(&["validate"], &[&p]);
    assert_eq!(code, 1);
    assert_eq!(v["verdict"], "input-error");
}

#[test]
fn cohomology_of_o_minus_two() {
    let (code, v, _) = run(&["cohomology"], &[&data("p1_cover.json"), &data("o_minus_2.json")]);
    assert_eq!(code, 0);
    assert_eq!(v["dims"]["0"], 0);
    assert_eq!(v["dims"]["1"], 1);
    assert_eq!(v["classes"]["1"]["basis"].as_array().unwrap().len(), 1);
}

#[test]
fn window_flag_does_not_change_dimensions() {
    let ins = [data("p1_cover.json"), data("o_minus_2.json")];
    let ins: Vec<&str> = ins.iter().map(|s| s.as_str()).collect();
    let (code, v, _) = run(&["cohomology", "--window", "2,1"], &ins);
    assert_eq!(code, 0);
    assert_eq!(v["dims"]["1"], 1);
    let (code, v, _) = run(&["cohomology", "--window", "0,1"], &ins);
    assert_eq!(code, 1);
    assert_eq!(v["verdict"], "input-error");
}

#[test]
fn obstructions_and_les() {
    let base = [data("p1_cover.json"), data("filtered_sum.json")];
    let base: Vec<&str> = base.iter().map(|s| s.as_str()).collect();
    for kind in ["filtered", "hodge"] {
        let (code, v, _) = run(&["obstruct", kind], &base);
        assert_eq!(code, 0, "{v}");
        assert_eq!(v["obstruction"]["schema"], "hdflow.class/1");
        assert!(v["cocycle_checks"].as_array().unwrap().iter().all(|c| c["ok"] == true));
    }
    let (code, v, _) = run(&["obstruct", "graded-higgs"], &[&data("p1_cover.json"), &data("higgs_nilpotent.json")]);
    assert_eq!(code, 0, "{v}");
    // a Higgs bundle is not a filtered de Rham bundle
    let (code, _, _) = run(&["obstruct", "filtered"], &[&data("p1_cover.json"), &data("higgs_nilpotent.json")]);
    assert_eq!(code, 1);
    let (code, v, _) = run(&["les"], &base);
    assert_eq!(code, 0);
    assert_eq!(v["exact"], true);
}

#[test]
fn act_then_diff_round_trip() {
    let base = [data("p1_cover.json"), data("filtered_sum.json")];
    let out = tmp("act.json");
    let (code, _, _) = run(&["act", "--group", "filtered", "--seed", "11", "--out", &out], &[&base[0], &base[1]]);
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let (l1, l2) = (tmp("l1.json"), tmp("l2.json"));
    std::fs::write(&l1, v["lift"].to_string()).unwrap();
    std::fs::write(&l2, v["result"].to_string()).unwrap();
    let (code, d, _) = run(&["diff", "--group", "filtered"], &[&base[0], &base[1], &l1, &l2]);
    assert_eq!(code, 0, "{d}");
    assert_eq!(d["coordinates"], v["epsilon"]);
    let (code, d, _) = run(&["diff", "--group", "filtered"], &[&base[0], &base[1], &l1, &l1]);
    assert_eq!(code, 0);
    assert!(d["coordinates"].as_array().unwrap().iter().all(|c| c.as_array().unwrap().iter().all(|x| x == 0)));
}

#[test]
fn act_with_explicit_coordinates() {
    let base = [data("p1_cover.json"), data("filtered_sum.json")];
    let (code, v, _) = run(&["act", "--group", "filtered", "--coords", "[1, [0, 1], 2]"], &[&base[0], &base[1]]);
    assert_eq!(code, 0, "{v}");
    assert_eq!(v["epsilon"], serde_json::json!([[1, 0], [0, 1], [2, 0]]));
    let (code, _, _) = run(&["act", "--group", "filtered", "--coords", "[1]"], &[&base[0], &base[1]]);
    assert_eq!(code, 1);
}

#[test]
fn inverse_cartier_on_legendre() {
    let (code, v, _) = run(&["ic"], &[&data("legendre_supersingular_cover2.json"), &data("legendre_supersingular_higgs.json")]);
    assert_eq!(code, 0);
    assert_eq!(v["bundle"]["rank"], 2);
}

#[test]
fn supersingular_legendre_flow_lifts() {
    let f = data("flow_legendre_supersingular.json");
    let (code, v, _) = run(&["flow-verify"], &[&f]);
    assert_eq!((code, v["verdict"].as_str()), (0, Some("periodic")));
    let (code, v, _) = run(&["ordinarity"], &[&f]);
    assert_eq!(code, 0);
    assert_eq!((v["dim_gr"].as_u64(), v["dim_t"].as_u64(), v["dim_c"].as_u64()), (Some(0), Some(1), Some(1)));
    let (code, v, _) = run(&["flow-lift", "--level", "3"], &[&f]);
    assert_eq!(code, 0, "{v}");
    assert_eq!(v["steps"].as_array().unwrap().len(), 2);
    assert_eq!(v["flow"]["level"], 3);
}

#[test]
fn ordinary_legendre_is_a_verdict() {
    let f = data("flow_legendre_ordinary.json");
    for cmd in ["flow-verify", "ordinarity", "flow-lift"] {
        let (code, v, _) = run(&[cmd], &[&f]);
        assert_eq!(code, 2, "{cmd}");
        assert_eq!(v["verdict"], "not-periodic");
    }
}

#[test]
fn reports_are_byte_identical() {
    let f = data("flow_theta_zero.json");
    let (_, _, a) = run(&["flow-lift"], &[&f]);
    let (_, _, b) = run(&["flow-lift"], &[&f]);
    assert_eq!(a, b);
    let base = [data("p1_cover.json"), data("filtered_sum.json")];
    let args = ["act", "--group", "bare", "--seed", "3"];
    let (_, _, a) = run(&args, &[&base[0], &base[1]]);
    let (_, _, b) = run(&args, &[&base[0], &base[1]]);
    assert_eq!(a, b);
}
