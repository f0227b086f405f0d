use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use attngap::encoder::{gen_lane_scene, gen_noise, image_seed};
use attngap::fid::{fid_from_features, FeatureMatrix};
use attngap::io::{read_srgt, Dtype, write_ppm, write_report, Manifest, ManifestEntry, Report};
use attngap::metric::{compare_profiles, default_stages, ImageSetProfile, BIN_COUNT};

use crate::sets::{load_profile, profile_to_json};
use crate::{CliError, CompareArgs, ErrorKind, HistArgs, ProfileArgs, SynthArgs, SynthKind};

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::new(ErrorKind::Io, format!("{}: {e}", path.display())))
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| CliError::new(ErrorKind::Io, format!("{}: {e}", path.display())))
}

fn emit(out: Option<&Path>, stdout: &mut dyn Write, bytes: &[u8]) -> Result<(), CliError> {
    match out {
        Some(path) => write_file(path, bytes),
        None => stdout
            .write_all(bytes)
            .map_err(|e| CliError::new(ErrorKind::Io, format!("stdout: {e}"))),
    }
}

/// Scores set A against every set B and writes one report per format.
pub fn cmd_compare(args: &CompareArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    if args.out.is_none() && args.format.len() > 1 {
        return Err(CliError::new(ErrorKind::Usage, "several formats need --out <dir>"));
    }
    let a = load_profile(&args.a, &args.run)?;
    let mut loaded: Vec<(PathBuf, ImageSetProfile)> = vec![(args.a.clone(), a.clone())];
    let mut pairs = Vec::with_capacity(args.b.len());
    for path in &args.b {
        let b = match loaded.iter().find(|(p, _)| p == path) {
            Some((_, p)) => p.clone(),
            None => {
                let p = load_profile(path, &args.run)?;
                loaded.push((path.clone(), p.clone()));
                p
            }
        };
        pairs.push(compare_profiles(&a, &b)?);
    }
    let report = Report::new(a.config().clone(), pairs)?;
    match &args.out {
        None => emit(None, stdout, &write_report(&report, args.format[0])?),
        Some(dir) => {
            create_dir(dir)?;
            for &fmt in &args.format {
                let path = dir.join(format!("report.{}", fmt.extension()));
                write_file(&path, &write_report(&report, fmt)?)?;
            }
            Ok(())
        }
    }
}

/// Builds a profile and writes it as JSON that `compare` accepts as a set.
pub fn cmd_profile(args: &ProfileArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let p = load_profile(&args.set, &args.run)?;
    emit(args.out.as_deref(), stdout, &profile_to_json(&p))
}

/// Averaged histograms as CSV: `stage,bin,excluded,mean_count,image_count,fingerprint`.
pub fn cmd_hist(args: &HistArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let p = load_profile(&args.set, &args.run)?;
    let csv_err = |e: csv::Error| CliError::new(ErrorKind::Io, e.to_string());
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["stage", "bin", "excluded", "mean_count", "image_count", "fingerprint"])
        .map_err(csv_err)?;
    let count = p.image_count().to_string();
    for (stage, h) in p.stages() {
        for bin in 0..BIN_COUNT {
            w.write_record([
                stage.as_str(),
                &bin.to_string(),
                if h.is_excluded(bin) { "1" } else { "0" },
                &h.bins()[bin].to_string(),
                &count,
                p.config_fingerprint(),
            ])
            .map_err(csv_err)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| CliError::new(ErrorKind::Io, e.to_string()))?;
    emit(args.out.as_deref(), stdout, &bytes)
}

/// Six significant digits; zero prints as `0.000000`.
pub fn format_fid(v: f64) -> String {
    if v == 0.0 {
        return "0.000000".into();
    }
    let magnitude = v.abs().log10().floor() as i32;
    if (-4..6).contains(&magnitude) {
        let precision = (5 - magnitude) as usize;
        format!("{v:.precision$}")
    } else {
        format!("{v:.5e}")
    }
}

fn features(path: &Path) -> Result<FeatureMatrix, CliError> {
    let t = read_srgt(path)?;
    if t.dtype() != Dtype::F32 || t.shape().len() != 2 {
        return Err(CliError::new(
            ErrorKind::Shape,
            format!("{}: expected 2-D f32 features, got {:?} {:?}", path.display(), t.dtype(), t.shape()),
        ));
    }
    Ok(FeatureMatrix::from_row_major(t.shape()[0] as usize, t.shape()[1] as usize, &t.to_f64())?)
}

/// Prints the Fréchet distance between two feature files.
pub fn cmd_fid(a: &Path, b: &Path, stdout: &mut dyn Write) -> Result<(), CliError> {
    let fa = features(a)?;
    let fb = features(b)?;
    let d = fid_from_features(&fa, &fb)?;
    emit(None, stdout, format!("{}\n", format_fid(d)).as_bytes())
}

/// Writes `count` images named `img_NNNN.ppm` plus `manifest.yaml`.
pub fn cmd_synth(args: &SynthArgs) -> Result<(), CliError> {
    if args.count == 0 {
        return Err(CliError::new(ErrorKind::Input, "empty set: --count must be at least 1"));
    }
    let (h, w) = args.size;
    create_dir(&args.out)?;
    let digits = (args.count - 1).to_string().len().max(4);
    let mut entries = Vec::with_capacity(args.count);
    for i in 0..args.count {
        let seed = image_seed(args.seed, i as u64);
        let img = match args.kind {
            SynthKind::Lane => gen_lane_scene(seed, h, w)?,
            SynthKind::Noise => gen_noise(seed, h, w)?,
        };
        let id = format!("img_{i:0digits$}");
        let file = PathBuf::from(format!("{id}.ppm"));
        write_ppm(args.out.join(&file), &img)?;
        entries.push(ManifestEntry {
            id,
            tensors: Default::default(),
            image: Some(file),
        });
    }
    let name = args.name.clone().unwrap_or_else(|| match args.kind {
        SynthKind::Lane => "lane".into(),
        SynthKind::Noise => "noise".into(),
    });
    let manifest = Manifest::new(name, default_stages(), entries);
    write_file(&args.out.join("manifest.yaml"), manifest.to_yaml().as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fid_formatting() {
        assert_eq!(format_fid(0.0), "0.000000");
        assert_eq!(format_fid(1.0), "1.00000");
        assert_eq!(format_fid(0.98765432), "0.987654");
        assert_eq!(format_fid(123.456789), "123.457");
        assert_eq!(format_fid(1234567.0), "1.23457e6");
        assert_eq!(format_fid(0.00001234567), "1.23457e-5");
    }
}
