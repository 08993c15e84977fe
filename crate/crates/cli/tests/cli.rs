use std::process::Command;

use serde_json::Value;

fn data(name: &str) -> String {
    format!("{}/tests/data/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn run(args: &[&str]) -> (String, i32) {
    let out = Command::new(env!("CARGO_BIN_EXE_sphex")).args(args).output().unwrap();
    (String::from_utf8(out.stdout).unwrap(), out.status.code().unwrap())
}

fn run_json(args: &[&str]) -> (Value, i32) {
    let (s, code) = run(args);
    (serde_json::from_str(&s).unwrap_or_else(|e| panic!("{e}: {s}")), code)
}

#[test]
fn check_exit_codes() {
    let (v, code) = run_json(&["check", "--input", &data("equilateral.json")]);
    assert_eq!(code, 0);
    assert_eq!(v["schema"], "sphex/1");
    assert_eq!(v["h1"], "true");
    assert_eq!(v["subsets"].as_array().unwrap().len(), 7);

    let (_, code) = run(&["check", "--input", &data("disjoint.json")]);
    assert_eq!(code, 2);

    let (v, code) = run_json(&["check", "--input", &data("near_tangent.json")]);
    assert_eq!(code, 3);
    let names: Vec<&str> = v["indeterminate"].as_array().unwrap().iter().map(|x| x.as_str().unwrap()).collect();
    assert!(names.contains(&"{1,2}"), "{names:?}");
}

#[test]
fn check_params_form() {
    let (a, _) = run_json(&["check", "--input", &data("equilateral.json")]);
    let (b, code) = run_json(&["check", "--params", &data("equilateral_params.json")]);
    assert_eq!(code, 0);
    assert_eq!(a["verdict"], b["verdict"]);
    let (_, code) = run(&["check", "--params", &data("equilateral.json")]);
    assert_eq!(code, 1);
}

#[test]
fn lens_volume_is_exact() {
    let (v, code) = run_json(&["volume", "--input", &data("lens.json"), "--chamber", "--+"]);
    assert_eq!(code, 0);
    assert_eq!(v["exact"], true);
    assert!((v["value"].as_f64().unwrap() - 1.22837).abs() < 1e-5);
}

#[test]
fn equilateral_volume_closed_matches_mc() {
    let (closed, _) = run_json(&["volume", "--input", &data("equilateral.json"), "--chamber", "---"]);
    assert_eq!(closed["exact"], true);
    let v = closed["value"].as_f64().unwrap();
    assert!((v - 0.08344988342901152).abs() < 1e-12);
    let (mc, _) = run_json(&["volume", "--input", &data("equilateral.json"), "--chamber", "---", "--mc"]);
    assert_eq!(mc["exact"], false);
    assert_eq!(mc["samples"], 1_000_000);
    let (m, s) = (mc["value"].as_f64().unwrap(), mc["std_error"].as_f64().unwrap());
    assert!((m - v).abs() <= 3.0 * s, "{m} +- {s} vs {v}");
    let (faces, _) = run_json(&["volume", "--input", &data("equilateral.json"), "--faces"]);
    // three arcs and three vertex pairs
    assert_eq!(faces["faces"].as_array().unwrap().len(), 6);
}

#[test]
fn sphere_area() {
    let (v, code) = run_json(&["volume", "--input", &data("small_circles.json"), "--model", "sphere"]);
    assert_eq!(code, 0);
    assert!((v["value"].as_f64().unwrap() - 1.359902637746087).abs() < 1e-12);
}

#[test]
fn theorem_i_report_has_constant_term() {
    let (v, code) = run_json(&["identity", "--input", &data("equilateral.json"), "--which", "thmI"]);
    assert_eq!(code, 0);
    let r = &v["reports"][0];
    assert_eq!(r["pass"], true);
    let terms = r["terms"].as_array().unwrap();
    let det = terms.iter().find(|t| t["label"] == "determinant").unwrap();
    // sqrt(-B(0123))/2 for side 1.5, unit radii
    assert!((det["value"].as_f64().unwrap() - 1.948557158514987).abs() < 1e-9);
}

#[test]
fn lemma5_hundred_points() {
    let (v, code) = run_json(&["identity", "--input", &data("equilateral.json"), "--which", "lemma5"]);
    assert_eq!(code, 0);
    assert_eq!(v["passed"], 100);
    assert_eq!(v["total"], 100);
}

#[test]
fn other_identities() {
    for which in ["prop4", "prop6"] {
        let (v, code) = run_json(&["identity", "--input", &data("equilateral.json"), "--which", which]);
        assert_eq!(code, 0, "{which}");
        assert_eq!(v["passed"], v["total"]);
    }
    let (_, code) = run(&["identity", "--input", &data("hole.json"), "--which", "thmII", "--samples", "10"]);
    assert_eq!(code, 0);
    let (_, code) = run(&["identity", "--input", &data("hole.json"), "--which", "decomposition", "--samples", "200000"]);
    assert_eq!(code, 0);
    let (_, code) = run(&["identity", "--input", &data("small_circles.json"), "--which", "gaussbonnet", "--samples", "200000"]);
    assert_eq!(code, 0);
}

#[test]
fn prop6_tangent_exit_4() {
    let (v, code) = run_json(&["identity", "--input", &data("tangent.json"), "--which", "prop6"]);
    assert_eq!(code, 4);
    assert_eq!(v["error"]["kind"], "numerical");
    assert!(v["error"]["message"].as_str().unwrap().contains("tangen"));
}

#[test]
fn hypothesis_failure_exit_2() {
    let (_, code) = run(&["identity", "--input", &data("disjoint.json"), "--which", "thmI", "--samples", "10"]);
    assert_eq!(code, 2);
}

#[test]
fn variation_rows() {
    let (v, code) = run_json(&["variation", "--input", &data("lens.json"), "--chamber", "--+", "--param", "rho2:1,2"]);
    assert_eq!(code, 0);
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0]["pass"], true);
    assert!(rows[0]["fd_value"].is_number() && rows[0]["formula_value"].is_number());

    let (v, code) = run_json(&["variation", "--input", &data("equilateral.json")]);
    assert_eq!(code, 0);
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| r["pass"] == true));
}

#[test]
fn variation_noise_row() {
    let (v, code) = run_json(&["variation", "--input", &data("equilateral.json"), "--eps", "1e-12", "--mc", "--param", "r2:1", "--samples", "100000"]);
    assert_eq!(code, 4);
    let row = &v["rows"][0];
    assert_eq!(row["pass"], false);
    assert!(row["error"]["message"].as_str().unwrap().contains("noise dominates"));
}

#[test]
fn variation_sphere_model() {
    let (v, code) = run_json(&["variation", "--input", &data("small_circles.json"), "--model", "sphere"]);
    assert_eq!(code, 0);
    assert_eq!(v["rows"].as_array().unwrap().len(), 6);
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(run(&["volume"]).1, 1);
    assert_eq!(run(&["bogus"]).1, 1);
    assert_eq!(run(&["check", "--input", "/nonexistent.json"]).1, 1);
    assert_eq!(run(&["volume", "--input", &data("equilateral.json"), "--chamber", "-+"]).1, 1);
    assert_eq!(run(&["variation", "--input", &data("equilateral.json"), "--eps", "-1"]).1, 1);
    assert_eq!(run(&["variation", "--input", &data("equilateral.json"), "--param", "a:1,0"]).1, 1);
    assert_eq!(run(&["identity", "--input", &data("equilateral.json"), "--which", "nope"]).1, 1);
    assert_eq!(run(&["volume", "--input", &data("equilateral.json"), "--samples", "0"]).1, 1);
}

#[test]
fn csv_text_and_out_file() {
    let (csv, code) = run(&["variation", "--input", &data("equilateral.json"), "--format", "csv"]);
    assert_eq!(code, 0);
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[0].starts_with("parameter,fd_value"));
    assert_eq!(lines.len(), 7);
    assert!(lines[2].starts_with("r2:2,"));
    assert!(lines[4].starts_with("\"rho2:1,2\","));

    let (text, _) = run(&["check", "--input", &data("equilateral.json"), "--format", "text"]);
    assert!(text.contains("verdict true"));

    let out = std::env::temp_dir().join(format!("sphex-cli-test-{}.json", std::process::id()));
    let (stdout, code) = run(&["volume", "--input", &data("lens.json"), "--chamber", "--+", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["schema"], "sphex/1");
    let _ = std::fs::remove_file(out);
}

#[test]
fn same_seed_same_bytes() {
    let args = ["volume", "--input", &data("tetrahedron.json"), "--samples", "100000", "--seed", "7"];
    assert_eq!(run(&args), run(&args));
    let other = ["volume", "--input", &data("tetrahedron.json"), "--samples", "100000", "--seed", "8"];
    assert_ne!(run(&args).0, run(&other).0);
}
