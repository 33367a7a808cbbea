use std::path::Path;
use std::process::{Command, Output};

use cdrs_core::grids::{read_tensor, ScalarMap};
use cdrs_core::scoring::{label_to_score, score_to_label};
use cdrs_core::{MaskClass, SceneManifest};

fn cdrs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cdrs")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = cdrs(args);
    assert!(
        out.status.success(),
        "cdrs {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn small_scene(dir: &Path) -> String {
    let scene = dir.join("scene");
    ok(&["synth", "--out-dir", p(&scene), "--size", "32", "--images", "3", "--square", "6"]);
    p(&scene.join("manifest.json")).to_string()
}

fn map(path: &Path) -> ScalarMap {
    read_tensor(path).unwrap().into_scalar().unwrap()
}

#[test]
fn identity_flags_quantize_the_input() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = small_scene(dir.path());
    let out = dir.path().join("id");
    ok(&["refine", &manifest, "--out-dir", p(&out), "--alpha", "1", "--lambda", "0", "--k", "40"]);
    let m = SceneManifest::read(&manifest).unwrap();
    for i in 0..m.len() {
        let input = map(&m.resolve(m.images[i].score.as_ref().unwrap()));
        let refined = map(&out.join(format!("map_{i:03}.fmap")));
        for (&a, &b) in input.data().iter().zip(refined.data()) {
            let q = label_to_score(score_to_label(a as f64, 30).unwrap(), 30).unwrap() as f32;
            assert_eq!(q, b);
        }
    }
}

#[test]
fn ml_flag_matches_zero_lambda_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = small_scene(dir.path());
    let (a, b) = (dir.path().join("ml"), dir.path().join("l0"));
    ok(&["refine", &manifest, "--out-dir", p(&a), "--ml", "--k", "40"]);
    ok(&["refine", &manifest, "--out-dir", p(&b), "--lambda", "0", "--k", "40"]);
    for i in 0..3 {
        let name = format!("map_{i:03}.fmap");
        assert_eq!(std::fs::read(a.join(&name)).unwrap(), std::fs::read(b.join(&name)).unwrap());
    }
}

#[test]
fn refine_then_eval_improves_on_the_noisy_input() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = small_scene(dir.path());
    let out = dir.path().join("refined");
    ok(&["refine", &manifest, "--out-dir", p(&out), "--k", "60", "--threshold", "0.5", "--dump-png8", "--dump-stages"]);
    assert!(out.join("mask_000.pgm").exists() && out.join("map_002.pgm").exists());
    assert!(out.join("stages/ha_001.fmap").exists() && out.join("stages/ml_000.fmap").exists());

    let json = |name: &str, maps: Option<&Path>| {
        let path = dir.path().join(name);
        let mut args = vec!["eval", &manifest, "--json", p(&path)];
        if let Some(m) = maps {
            args.extend(["--maps", p(m)]);
        }
        let table = ok(&args);
        assert!(table.contains("J img \\ set"));
        std::fs::read_to_string(path).unwrap()
    };
    let noisy = json("noisy.json", None);
    let refined = json("refined.json", Some(&out));
    assert_eq!(refined, json("again.json", Some(&out)));
    let mean = |s: &str| -> f64 {
        let key = "\"mean_per_set\": ";
        let at = s.find(key).unwrap() + key.len();
        s[at..].split(|c: char| c == ',' || c == '\n').next().unwrap().trim().parse().unwrap()
    };
    assert!(mean(&refined) >= mean(&noisy) + 0.1, "{} vs {}", mean(&refined), mean(&noisy));
}

#[test]
fn sweep_writes_one_row_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = small_scene(dir.path());
    let csv = ok(&["sweep", &manifest, "--param", "alpha", "--values", "0,0.2,1", "--k", "40"]);
    let lines: Vec<_> = csv.lines().collect();
    assert_eq!(lines[0], "value,mean_per_image,mean_per_set");
    assert_eq!(lines.len(), 4);
    assert!(lines[2].starts_with("0.2,"));
}

#[test]
fn geoscore_separates_the_moving_square() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = small_scene(dir.path());
    let out = dir.path().join("geo");
    ok(&["geoscore", &manifest, "--out-dir", p(&out)]);
    let derived = SceneManifest::read(out.join("manifest.json")).unwrap();
    let truths = derived.load_masks((32, 32)).unwrap();
    let (mut dynamic, mut background) = ((0.0, 0), (0.0, 0));
    for (i, t) in truths.iter().enumerate() {
        let s = derived.load_score(i, (32, 32)).unwrap();
        for (&v, &c) in s.data().iter().zip(t.data()) {
            match c {
                MaskClass::Dynamic => dynamic = (dynamic.0 + v as f64, dynamic.1 + 1),
                MaskClass::Static => background = (background.0 + v as f64, background.1 + 1),
                MaskClass::DontCare => {}
            }
        }
    }
    let (d, b) = (dynamic.0 / dynamic.1 as f64, background.0 / background.1 as f64);
    assert!(d > b + 0.3, "square {d} background {b}");
}

#[test]
fn identical_images_score_near_zero() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("scene");
    ok(&["synth", "--out-dir", p(&scene), "--static", "--size", "32", "--images", "2", "--salt", "0"]);
    let mut m = SceneManifest::read(scene.join("manifest.json")).unwrap();
    m.images[1] = m.images[0].clone();
    let text: String = (0..40).map(|k| format!("{0} {1} {0} {1}\n", 3 + (k * 7) % 26, 2 + (k * 11) % 28)).collect();
    std::fs::write(scene.join("same.txt"), text).unwrap();
    m.matches[0].path = "same.txt".into();
    m.write(scene.join("same.json")).unwrap();
    let out = dir.path().join("geo");
    ok(&["geoscore", p(&scene.join("same.json")), "--out-dir", p(&out)]);
    for i in 0..2 {
        assert!(map(&out.join(format!("score_{i:03}.fmap"))).mean() < 0.01);
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(cdrs(&["--help"]).status.code(), Some(0));
    assert_eq!(cdrs(&["refine", "--bogus"]).status.code(), Some(1));
    assert_eq!(cdrs(&["sweep", "m.json", "--param", "beta", "--values", "1"]).status.code(), Some(1));

    let manifest = small_scene(dir.path());
    let out = p(&dir.path().join("o")).to_string();
    assert_eq!(cdrs(&["refine", &manifest, "--out-dir", &out, "--alpha", "3"]).status.code(), Some(1));
    let missing = cdrs(&["refine", "/nonexistent/manifest.json", "--out-dir", &out]);
    assert_eq!(missing.status.code(), Some(2));

    // dropping a pair's match record is a data error that names the pair
    let mut m = SceneManifest::read(&manifest).unwrap();
    m.matches.retain(|r| (r.reference, r.other) != (1, 2));
    let partial = dir.path().join("scene/partial.json");
    m.write(&partial).unwrap();
    let res = cdrs(&["geoscore", p(&partial), "--out-dir", &out]);
    assert_eq!(res.status.code(), Some(2));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("(1, 2)"), "{err}");
}
