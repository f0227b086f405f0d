//! Cross-module checks: files written by one part of the crate are read by
//! another and give the same numbers as the in-memory path.

use attngap::encoder::{encode, gen_lane_scene, gen_noise, image_seed, RefEncoderConfig};
use attngap::io::{decode_pnm, encode_ppm, load_manifest, read_srgt, write_srgt, Manifest, ManifestEntry, SrgtTensor};
use attngap::metric::{build_profile, compare_profiles, default_stages, MetricConfig, StageSample};
use attngap::{ImageSetProfile, RgbImage};

fn samples(images: &[RgbImage], enc: &RefEncoderConfig) -> Vec<StageSample> {
    images
        .iter()
        .enumerate()
        .flat_map(|(i, img)| {
            encode(&img.to_tensor(), enc).unwrap().into_iter().map(move |(stage, tensor)| StageSample {
                image_id: format!("{i}"),
                stage,
                tensor,
                input_size: Some((img.height(), img.width())),
            })
        })
        .collect()
}

fn profile(name: &str, images: &[RgbImage], enc: &RefEncoderConfig) -> ImageSetProfile {
    build_profile(name, samples(images, enc), &default_stages(), &MetricConfig::default()).unwrap()
}

#[test]
fn tensors_read_back_from_a_manifest_rebuild_the_same_profile() {
    let dir = tempfile::tempdir().unwrap();
    let enc = RefEncoderConfig::with_seed(2);
    let images: Vec<_> = (0..3).map(|i| gen_lane_scene(image_seed(7, i), 64, 64).unwrap()).collect();
    let direct = profile("set", &images, &enc);

    let mut entries = Vec::new();
    for (i, img) in images.iter().enumerate() {
        let mut tensors = indexmap::IndexMap::new();
        for (stage, t) in encode(&img.to_tensor(), &enc).unwrap() {
            // u8 would lose precision; f32 is what exporters write
            let values: Vec<f32> = t.data().iter().map(|&v| v as f32).collect();
            let (c, h, w) = t.shape();
            let file = format!("{i}_{stage}.srgt");
            write_srgt(dir.path().join(&file), &SrgtTensor::from_f32(vec![c as u32, h as u32, w as u32], &values).unwrap()).unwrap();
            tensors.insert(stage, file.into());
        }
        entries.push(ManifestEntry { id: format!("{i}"), tensors, image: None });
    }
    let path = dir.path().join("m.yaml");
    std::fs::write(&path, Manifest::new("set", default_stages(), entries).to_yaml()).unwrap();

    let m = load_manifest(&path).unwrap();
    let mut from_files = Vec::new();
    for e in &m.images {
        for (stage, file) in &e.tensors {
            from_files.push(StageSample {
                image_id: e.id.clone(),
                stage: stage.clone(),
                tensor: read_srgt(m.resolve(file)).unwrap().to_tensor3().unwrap(),
                input_size: Some((64, 64)),
            });
        }
    }
    let rebuilt = build_profile("set", from_files, &m.stages, &MetricConfig::default()).unwrap();
    let report = compare_profiles(&direct, &rebuilt).unwrap();
    for (stage, d) in report.scores {
        assert!((d - 1.0).abs() < 1e-6, "{stage}: {d}");
    }
}

#[test]
fn ppm_round_trip_keeps_the_ordering() {
    // Lane and noise sets written to PPM and decoded again still rank the
    // same way: quantizing pixels to 8 bits is not what the score measures.
    let enc = RefEncoderConfig::with_seed(0);
    let through_ppm = |imgs: Vec<RgbImage>| -> Vec<RgbImage> {
        imgs.iter().map(|i| decode_pnm(&encode_ppm(i)).unwrap()).collect()
    };
    let a = through_ppm((0..16).map(|i| gen_lane_scene(image_seed(1, i), 64, 64).unwrap()).collect());
    let b = through_ppm((0..16).map(|i| gen_lane_scene(image_seed(2, i), 64, 64).unwrap()).collect());
    let n = through_ppm((0..16).map(|i| gen_noise(image_seed(3, i), 64, 64).unwrap()).collect());
    let (pa, pb, pn) = (profile("a", &a, &enc), profile("b", &b, &enc), profile("n", &n, &enc));
    let ll = compare_profiles(&pa, &pb).unwrap().scores;
    let ln = compare_profiles(&pa, &pn).unwrap().scores;
    for ((stage, x), (_, y)) in ll.iter().zip(&ln) {
        assert!(x > y, "{stage}: lane/lane {x} vs lane/noise {y}");
    }
}

#[test]
fn profile_json_round_trip_compares_identically() {
    let enc = RefEncoderConfig::with_seed(1);
    let imgs: Vec<_> = (0..2).map(|i| gen_noise(i, 32, 32).unwrap()).collect();
    let p = profile("noise", &imgs, &enc);
    let back: ImageSetProfile = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
    back.validate().unwrap();
    assert_eq!(compare_profiles(&p, &back).unwrap().scores, compare_profiles(&p, &p).unwrap().scores);
}
