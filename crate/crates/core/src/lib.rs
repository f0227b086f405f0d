//! Measure the gap between two image sets by comparing how an encoder
//! distributes its attention over them.
//!
//! For every image and encoder stage the crate builds a spatial attention
//! map from the stage's activations ([`tensor::attention_map`]), quantizes it
//! to 8 bits, and bins it into an intensity histogram. Averaging those
//! histograms over a set gives an [`metric::ImageSetProfile`]; two profiles are
//! scored per stage by histogram correlation ([`metric::compare_profiles`]).
//! A Fréchet-distance baseline over feature vectors lives in [`fid`].
//!
//! ```
//! use attngap::encoder::{encode, gen_lane_scene, RefEncoderConfig};
//! use attngap::metric::{build_profile, compare_profiles, default_stages, MetricConfig, StageSample};
//!
//! let cfg = MetricConfig::default();
//! let enc = RefEncoderConfig::with_seed(1);
//! let samples = (0..4).flat_map(|i| {
//!     let img = gen_lane_scene(i, 64, 64).unwrap();
//!     encode(&img.to_tensor(), &enc).unwrap().into_iter().map(move |(stage, tensor)| StageSample {
//!         image_id: format!("lane{i}"),
//!         stage,
//!         tensor,
//!         input_size: Some((64, 64)),
//!     })
//! });
//! let profile = build_profile("lanes", samples, &default_stages(), &cfg).unwrap();
//! let report = compare_profiles(&profile, &profile).unwrap();
//! assert!(report.scores.iter().all(|(_, d)| (d - 1.0).abs() < 1e-12));
//! ```

pub mod encoder;
pub mod fid;
pub mod io;
pub mod metric;
pub mod tensor;

pub use encoder::{EncoderError, RefEncoderConfig, RgbImage};
pub use fid::{FidError, GaussianStats};
pub use io::FormatError;
pub use metric::{ImageSetProfile, IntensityHistogram, MetricConfig, MetricError, SimilarityReport, StageId};
pub use tensor::{AttentionMap, Map2, Tensor3, TensorError};

// The guide's and the README's code listings compile and run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/attention.md")]
    mod attention {}
    #[doc = include_str!("../../../book/src/histograms.md")]
    mod histograms {}
    #[doc = include_str!("../../../book/src/fid.md")]
    mod fid {}
    #[doc = include_str!("../../../book/src/reference_encoder.md")]
    mod reference_encoder {}
    #[doc = include_str!("../../../book/src/formats.md")]
    mod formats {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
