use std::path::Path;

use lac::config::RunConfig;
use lac::imageio;
use lac::nmds::MdsSolution;
use lac::similarity::SimilarityMatrix;
use lac::synth;
use serde_json::Value;

fn run(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = lac::cli::run(std::iter::once("lac").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn ok(args: &[&str]) -> String {
    let (code, out, err) = run(args);
    assert_eq!(code, 0, "lac {}: {err}", args.join(" "));
    out
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

fn write_faces(dir: &Path, n: usize) -> String {
    let faces = dir.join("faces");
    std::fs::create_dir_all(&faces).unwrap();
    for (id, img) in synth::face_set(n, 2, 128).unwrap() {
        imageio::save_pgm(&img, faces.join(format!("{id}.pgm"))).unwrap();
    }
    faces.to_string_lossy().into_owned()
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(&[]).0, 1);
    assert_eq!(run(&["frobnicate"]).0, 1);
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = run(&["sim", "--measure", "pixel", "--images", "x", "--patch", "4", "--out", &p(dir.path(), "m.csv")]);
    assert_eq!(code, 1);
    assert!(err.contains("odd"), "{err}");
    let bad = p(dir.path(), "bad.toml");
    std::fs::write(&bad, "patch = 4\n").unwrap();
    let (code, _, err) = run(&["--config", &bad, "triads", "--ids", "a,b,c", "--out", &p(dir.path(), "t.json")]);
    assert_eq!(code, 1, "{err}");
    assert!(!dir.path().join("t.json").exists());
}

#[test]
fn data_errors_exit_two_and_write_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let faces = write_faces(d, 4);
    let graphs = d.join("graphs");
    std::fs::create_dir_all(&graphs).unwrap();
    let (code, _, err) = run(&["code", "--images", &faces, "--graphs", &graphs.to_string_lossy(), "--out", &p(d, "codes")]);
    assert_eq!(code, 2);
    assert!(err.contains("c0_0"), "missing graph should name the face: {err}");
    assert!(!d.join("codes").exists() || std::fs::read_dir(d.join("codes")).unwrap().next().is_none());

    let (code, _, err) = run(&["spearman", "--x", &p(d, "nope.csv"), "--y", &p(d, "nope.csv")]);
    assert_eq!(code, 2, "{err}");
}

#[test]
fn face_pipeline_artifacts_carry_the_config_hash() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let faces = write_faces(d, 4);
    let config = p(d, "run.toml");
    std::fs::write(&config, "seed = 5\n[grid]\nspacing = 9.0\n").unwrap();
    let expected = RunConfig::from_toml("seed = 5\n[grid]\nspacing = 9.0\n", Path::new("run.toml")).unwrap().hash();

    ok(&["--config", &config, "code", "--images", &faces, "--out", &p(d, "codes")]);
    let code_json: Value = serde_json::from_str(&std::fs::read_to_string(d.join("codes/c1_0.code.json")).unwrap()).unwrap();
    assert_eq!(code_json["config_hash"], Value::String(expected.clone()));
    let sidecar: Value = serde_json::from_str(&std::fs::read_to_string(d.join("codes/config.json")).unwrap()).unwrap();
    assert_eq!(sidecar["config_hash"], Value::String(expected.clone()));
    assert_eq!(sidecar["config"]["grid"]["spacing"], 9.0);

    ok(&["--config", &config, "sim", "--codes", &p(d, "codes"), "--out", &p(d, "lac.csv")]);
    let text = std::fs::read_to_string(d.join("lac.csv")).unwrap();
    assert!(text.contains(&format!("config={expected}")), "{text}");
    let m = SimilarityMatrix::load(d.join("lac.csv")).unwrap();
    assert_eq!(m.len(), 4);
    assert!(d.join("lac.csv.config.json").exists());

    // a flag override changes the hash
    ok(&["--config", &config, "sim", "--measure", "pixel", "--images", &faces, "--grid-spacing", "10", "--out", &p(d, "pix.csv")]);
    let pix = std::fs::read_to_string(d.join("pix.csv")).unwrap();
    assert!(!pix.contains(&format!("config={expected}")));

    let out = ok(&["spearman", "--x", &p(d, "lac.csv"), "--y", &p(d, "pix.csv")]);
    assert!(out.contains("spearman rho"), "{out}");
}

#[test]
fn triads_predict_and_concordance() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let faces = write_faces(d, 5);
    ok(&["code", "--images", &faces, "--out", &p(d, "codes")]);
    ok(&["sim", "--codes", &p(d, "codes"), "--out", &p(d, "lac.csv")]);
    ok(&["triads", "--matrix", &p(d, "lac.csv"), "--seed", "3", "--out", &p(d, "plan.json")]);
    let plan: Value = serde_json::from_str(&std::fs::read_to_string(d.join("plan.json")).unwrap()).unwrap();
    // 5 targets x 6 pairs plus 5 x 4 catch triads
    assert_eq!(plan["trials"].as_array().unwrap().len(), 50);

    ok(&["predict", "--matrix", &p(d, "lac.csv"), "--trials", &p(d, "plan.json"), "--out", &p(d, "model.json")]);
    let model: Value = serde_json::from_str(&std::fs::read_to_string(d.join("model.json")).unwrap()).unwrap();
    assert_eq!(model["trials"].as_array().unwrap().len(), 30);
    assert!(model["tag"].as_str().unwrap().starts_with("config="));

    let out = ok(&["concord", &p(d, "model.json"), &p(d, "model.json")]);
    assert!(out.contains("100.00%"), "{out}");

    let out = ok(&["bootstrap", &p(d, "model.json"), &p(d, "model.json"), "--model", &p(d, "model.json"), "--replicates", "100"]);
    assert!(out.contains("difference"), "{out}");
    let (code, _, _) = run(&["bootstrap", &p(d, "model.json"), "--model", &p(d, "model.json"), "--replicates", "10"]);
    assert_eq!(code, 1);
}

#[test]
fn bootstrap_of_plain_values() {
    let dir = tempfile::tempdir().unwrap();
    let values = p(dir.path(), "v.txt");
    std::fs::write(&values, "1 2 3\n4,5\n6\n").unwrap();
    let json = p(dir.path(), "b.json");
    ok(&["bootstrap", "--values", &values, "--statistic", "mean", "--replicates", "500", "--seed", "1", "--json", &json]);
    let report: Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    let mean = &report["results"][0];
    assert_eq!(mean["statistic"], "mean");
    assert_eq!(mean["result"]["estimate"], 3.5);
    assert!(mean["result"]["standard_error"].as_f64().unwrap() > 0.0);
}

#[test]
fn mds_and_projection() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let faces = write_faces(d, 8);
    ok(&["code", "--images", &faces, "--out", &p(d, "codes")]);
    ok(&["sim", "--codes", &p(d, "codes"), "--out", &p(d, "lac.csv")]);
    ok(&["mds", "--matrix", &p(d, "lac.csv"), "--dims", "2", "--restarts", "3", "--out", &p(d, "mds.json"), "--projection", &p(d, "proj.csv")]);
    let sol = MdsSolution::from_json(&std::fs::read_to_string(d.join("mds.json")).unwrap(), Path::new("mds.json")).unwrap();
    assert_eq!((sol.dims, sol.points.len(), sol.restarts), (2, 8, 3));
    let proj = std::fs::read_to_string(d.join("proj.csv")).unwrap();
    assert_eq!(proj.lines().filter(|l| !l.starts_with('#')).count(), 9);
}

#[test]
fn render_writes_maps_and_kernels() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let faces = write_faces(d, 1);
    let image = format!("{faces}/c0_0.pgm");
    ok(&["render", "--image", &image, "--channels", "0,17", "--out-dir", &p(d, "r"), "--montage", "--dump-kernels", &p(d, "k.csv")]);
    for name in ["c0_0_c0_real.pgm", "c0_0_c0_amp.pgm", "c0_0_c17_real.pgm", "c0_0_c17_amp.pgm", "c0_0_montage.pgm"] {
        let img = imageio::load_image(d.join("r").join(name)).unwrap();
        assert!(img.width() > 0, "{name}");
    }
    let header = std::fs::read(d.join("r/c0_0_c0_real.pgm")).unwrap();
    assert!(String::from_utf8_lossy(&header[..80]).contains("config="));
    assert_eq!(std::fs::read_to_string(d.join("k.csv")).unwrap().lines().count(), 1 + 36);

    let (code, _, err) = run(&["render", "--image", &image, "--channels", "18", "--out-dir", &p(d, "r2")]);
    assert_eq!(code, 2, "{err}");
    assert!(!d.join("r2").exists() || std::fs::read_dir(d.join("r2")).unwrap().next().is_none());
}
