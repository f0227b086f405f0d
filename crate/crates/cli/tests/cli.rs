use std::fs;
use std::path::Path;
use std::process::Command;

use attngap::encoder::{encode, gen_lane_scene, image_seed, RefEncoderConfig};
use attngap::io::{read_image, write_srgt, Manifest, ManifestEntry, SrgtTensor};
use attngap::metric::default_stages;
use attngap_cli::run;
use tempfile::TempDir;

fn attngap(args: &[&str]) -> (i32, String, String) {
    let mut full = vec!["attngap"];
    full.extend_from_slice(args);
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run(full, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth(dir: &Path, kind: &str, count: usize, seed: u64) {
    let (code, _, err) = attngap(&["synth", "--kind", kind, "--count", &count.to_string(), "--seed", &seed.to_string(), "--out", p(dir)]);
    assert_eq!(code, 0, "{err}");
}

fn dir_contents(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn self_compare_scores_one_at_every_stage() {
    let tmp = TempDir::new().unwrap();
    let lanes = tmp.path().join("lanes");
    synth(&lanes, "lane", 6, 3);
    let manifest = lanes.join("manifest.yaml");
    let s = scores(&["compare", "--a", p(&manifest), "--b", p(&manifest), "--encoder", "reference"]);
    assert_eq!(s, [1.0; 3]);
}

#[test]
fn mismatched_exclusion_between_cached_profiles_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let lanes = tmp.path().join("lanes");
    synth(&lanes, "lane", 3, 1);
    let (pa, pb) = (tmp.path().join("a.json"), tmp.path().join("b.json"));
    let base = ["profile", "--set", p(&lanes), "--encoder", "reference"];
    assert_eq!(attngap(&[&base[..], &["--out", p(&pa)]].concat()).0, 0);
    assert_eq!(attngap(&[&base[..], &["--out", p(&pb), "--exclude-below", "90"]].concat()).0, 0);
    let (code, out, err) = attngap(&["compare", "--a", p(&pa), "--b", p(&pb)]);
    assert_eq!(code, 5);
    assert!(out.is_empty());
    assert_eq!(err.lines().count(), 1);
    assert!(err.starts_with("error kind=config code=5 msg="), "{err}");
}

#[test]
fn cached_profiles_reproduce_direct_scores() {
    let tmp = TempDir::new().unwrap();
    let (lanes, noise) = (tmp.path().join("lanes"), tmp.path().join("noise"));
    synth(&lanes, "lane", 4, 5);
    synth(&noise, "noise", 4, 6);
    let direct = attngap(&["compare", "--a", p(&lanes), "--b", p(&noise), "--encoder", "reference"]);
    let (pa, pn) = (tmp.path().join("a.json"), tmp.path().join("n.json"));
    attngap(&["profile", "--set", p(&lanes), "--encoder", "reference", "--out", p(&pa)]);
    attngap(&["profile", "--set", p(&noise), "--encoder", "reference", "--out", p(&pn)]);
    let cached = attngap(&["compare", "--a", p(&pa), "--b", p(&pn)]);
    assert_eq!(direct.0, 0);
    assert_eq!(direct.1, cached.1);
}

// Dumps the reference encoder's activations for a synthesized set as SRGT,
// the way an exporter would, and returns the tensor manifest's path.
fn dump_activations(dir: &Path, name: &str, count: usize) -> std::path::PathBuf {
    let enc = RefEncoderConfig::with_seed(0);
    let mut entries = Vec::new();
    for i in 0..count {
        let id = format!("img_{i:04}");
        let img = read_image(dir.join(format!("{id}.ppm"))).unwrap();
        let mut tensors = indexmap::IndexMap::new();
        for (stage, t) in encode(&img.to_tensor(), &enc).unwrap() {
            let file = format!("{id}_{stage}.srgt");
            let values: Vec<f32> = t.data().iter().map(|&v| v as f32).collect();
            let (c, h, w) = t.shape();
            let shape = vec![1, c as u32, h as u32, w as u32];
            write_srgt(dir.join(&file), &SrgtTensor::from_f32(shape, &values).unwrap()).unwrap();
            tensors.insert(stage, file.into());
        }
        entries.push(ManifestEntry { id: id.clone(), tensors, image: Some(format!("{id}.ppm").into()) });
    }
    let path = dir.join("acts.yaml");
    fs::write(&path, Manifest::new(name, default_stages(), entries).to_yaml()).unwrap();
    path
}

fn scores(args: &[&str]) -> Vec<f64> {
    let (code, out, err) = attngap(args);
    assert_eq!(code, 0, "{err}");
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    ["E2", "E3", "E4"].iter().map(|s| v["pairs"][0]["scores"][s].as_f64().unwrap()).collect()
}

#[test]
fn manifest_mode_matches_reference_mode_scores() {
    let tmp = TempDir::new().unwrap();
    let (lanes, noise) = (tmp.path().join("lanes"), tmp.path().join("noise"));
    synth(&lanes, "lane", 4, 2);
    synth(&noise, "noise", 4, 9);
    let (acts_l, acts_n) = (dump_activations(&lanes, "lane", 4), dump_activations(&noise, "noise", 4));

    let via_tensors = scores(&["compare", "--a", p(&acts_l), "--b", p(&acts_n)]);
    let via_encoder = scores(&["compare", "--a", p(&lanes), "--b", p(&noise), "--encoder", "reference"]);
    // f32 storage perturbs activations slightly; a quantization level may flip
    for (t, e) in via_tensors.iter().zip(&via_encoder) {
        assert!((t - e).abs() < 1e-2, "{via_tensors:?} vs {via_encoder:?}");
    }
    assert_eq!(scores(&["compare", "--a", p(&acts_l), "--b", p(&acts_l)]), [1.0; 3]);

    // a manifest-built profile does not compare against a reference-built one
    let pa = tmp.path().join("acts.json");
    assert_eq!(attngap(&["profile", "--set", p(&acts_l), "--out", p(&pa)]).0, 0);
    let (code, _, _) = attngap(&["compare", "--a", p(&pa), "--b", p(&noise), "--encoder", "reference"]);
    assert_eq!(code, 5);
}

#[test]
fn image_only_sets_need_the_reference_encoder() {
    let tmp = TempDir::new().unwrap();
    synth(tmp.path(), "noise", 2, 0);
    let (code, _, err) = attngap(&["compare", "--a", p(tmp.path()), "--b", p(tmp.path())]);
    assert_eq!(code, 5, "{err}");
}

#[test]
fn synth_is_deterministic_and_loads() {
    let tmp = TempDir::new().unwrap();
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    synth(&a, "lane", 5, 42);
    synth(&b, "lane", 5, 42);
    synth(&c, "lane", 5, 43);
    assert_eq!(dir_contents(&a), dir_contents(&b));
    assert_ne!(dir_contents(&a), dir_contents(&c));
    let m = attngap::io::load_manifest(a.join("manifest.yaml")).unwrap();
    assert_eq!(m.images.len(), 5);
    assert!(!m.has_tensors());
    let first = read_image(a.join("img_0000.ppm")).unwrap();
    let expected = gen_lane_scene(image_seed(42, 0), 64, 64).unwrap();
    for (x, y) in first.pixels().iter().zip(expected.pixels()) {
        assert!((x - y).abs() <= 0.5 / 255.0 + 1e-12);
    }
}

#[test]
fn synth_count_zero_is_an_empty_set_error() {
    let tmp = TempDir::new().unwrap();
    let (code, _, err) = attngap(&["synth", "--kind", "noise", "--count", "0", "--out", p(tmp.path())]);
    assert_eq!(code, 7);
    assert!(err.contains("empty set"));
}

#[test]
fn hist_conserves_mass_and_is_stable() {
    let tmp = TempDir::new().unwrap();
    synth(tmp.path(), "lane", 3, 8);
    let args = ["hist", "--set", p(tmp.path()), "--encoder", "reference"];
    let (code, out, err) = attngap(&args);
    assert_eq!(code, 0, "{err}");
    assert_eq!(out, attngap(&args).1);

    let mut rdr = csv::Reader::from_reader(out.as_bytes());
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 3 * 256);
    for stage in ["E2", "E3", "E4"] {
        let rows: Vec<_> = rows.iter().filter(|r| &r[0] == stage).collect();
        assert_eq!(rows.len(), 256);
        let mut all = 0.0;
        for (bin, r) in rows.iter().enumerate() {
            assert_eq!(r[1].parse::<usize>().unwrap(), bin);
            assert_eq!(&r[2], if bin <= 100 { "1" } else { "0" });
            assert_eq!(&r[4], "3");
            all += r[3].parse::<f64>().unwrap();
        }
        // every pixel of the 64x64 map lands in exactly one bin
        assert!((all * 3.0 - 3.0 * 4096.0).abs() < 1e-9, "{stage}: {all}");
    }
}

#[test]
fn hist_participating_mass_matches_pixel_count() {
    use attngap::metric::{quantize, MetricConfig};
    use attngap::tensor::attention_map;
    let tmp = TempDir::new().unwrap();
    synth(tmp.path(), "noise", 2, 4);
    let (_, out, _) = attngap(&["hist", "--set", p(tmp.path()), "--encoder", "reference", "--stages", "E3"]);
    let participating: f64 = csv::Reader::from_reader(out.as_bytes())
        .records()
        .map(Result::unwrap)
        .filter(|r| &r[2] == "0")
        .map(|r| r[3].parse::<f64>().unwrap())
        .sum();

    let cfg = MetricConfig::default();
    let enc = RefEncoderConfig::with_seed(0);
    let mut pixels = 0usize;
    for i in 0..2 {
        let img = read_image(tmp.path().join(format!("img_{i:04}.ppm"))).unwrap();
        let stages = encode(&img.to_tensor(), &enc).unwrap();
        let att = attention_map(&stages[1].1, 64, 64, cfg.temperature).unwrap();
        pixels += quantize(&att).data().iter().filter(|&&q| q > 100).count();
    }
    assert!((participating * 2.0 - pixels as f64).abs() < 1e-9);
}

#[test]
fn fid_files() {
    let tmp = TempDir::new().unwrap();
    let write = |name: &str, rows: u32, cols: u32, values: &[f32]| {
        let path = tmp.path().join(name);
        write_srgt(&path, &SrgtTensor::from_f32(vec![rows, cols], values).unwrap()).unwrap();
        path
    };
    let base: Vec<f32> = (0..1000).map(|i| (i % 10) as f32).collect();
    let shifted: Vec<f32> = base.iter().map(|v| v + 1.0).collect();
    let a = write("a.srgt", 1000, 1, &base);
    let b = write("b.srgt", 1000, 1, &shifted);
    let wide = write("wide.srgt", 500, 2, &base);
    let one = write("one.srgt", 1, 1, &[0.0]);

    let (code, out, _) = attngap(&["fid", p(&a), p(&a)]);
    assert_eq!((code, out.as_str()), (0, "0.000000\n"));
    let (code, out, _) = attngap(&["fid", p(&a), p(&b)]);
    assert_eq!(code, 0);
    assert!((out.trim().parse::<f64>().unwrap() - 1.0).abs() < 1e-6, "{out}");
    assert_eq!(attngap(&["fid", p(&a), p(&wide)]).0, 8);
    assert_eq!(attngap(&["fid", p(&one), p(&one)]).0, 7);
    assert_eq!(attngap(&["fid", p(&a), p(&tmp.path().join("missing.srgt"))]).0, 3);
    fs::write(tmp.path().join("junk.srgt"), b"JUNKJUNKJUNK").unwrap();
    assert_eq!(attngap(&["fid", p(&a), p(&tmp.path().join("junk.srgt"))]).0, 4);
}

#[test]
fn compare_writes_both_formats() {
    let tmp = TempDir::new().unwrap();
    let lanes = tmp.path().join("lanes");
    synth(&lanes, "lane", 2, 0);
    let out_dir = tmp.path().join("out");
    let (code, _, err) = attngap(&["compare", "--a", p(&lanes), "--b", p(&lanes), "--encoder", "reference", "--format", "json,csv", "--out", p(&out_dir)]);
    assert_eq!(code, 0, "{err}");
    let csv = fs::read_to_string(out_dir.join("report.csv")).unwrap();
    assert!(csv.starts_with("set_a,set_b,E2,E3,E4,fingerprint\nlane,lane,1.0000,1.0000,1.0000,"));
    assert!(out_dir.join("report.json").is_file());
    let (code, _, _) = attngap(&["compare", "--a", p(&lanes), "--b", p(&lanes), "--encoder", "reference", "--format", "json,csv"]);
    assert_eq!(code, 2);
}

#[test]
fn binary_reports_exit_codes() {
    let tmp = TempDir::new().unwrap();
    let exe = env!("CARGO_BIN_EXE_attngap");
    let ok = Command::new(exe).args(["synth", "--kind", "lane", "--count", "1", "--out"]).arg(tmp.path()).output().unwrap();
    assert!(ok.status.success());
    let missing = Command::new(exe).args(["compare", "--a", "/nonexistent/x", "--b", "/nonexistent/y"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(3));
    let stderr = String::from_utf8(missing.stderr).unwrap();
    assert!(stderr.starts_with("error kind=io code=3 msg="), "{stderr}");
    let usage = Command::new(exe).arg("frobnicate").output().unwrap();
    assert_eq!(usage.status.code(), Some(2));
}
