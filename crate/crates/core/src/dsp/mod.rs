//! Online acoustic feature extraction: framing, conditioning, spectrum,
//! fBank, MFCC, differentials, splicing, sliding CMVN, affine transforms,
//! and multi-stream mixing.

pub mod components;
pub mod dct;
pub mod extractor;
pub mod fft;
pub mod framing;
pub mod mel;
pub mod ops;
pub mod window;

pub use components::{
    pcm_to_f64, FeatureExtractorStage, FeatureOpStage, FeaturePipeline, FrameCutterStage,
    MixtureStage, MixtureStream,
};
pub use dct::Dct;
pub use extractor::{
    BaseFeatureKind, FrameFeatureExtractor, IdentityHook, NoiseGateHook, SpectralHook,
};
pub use fft::SpectrumAnalyzer;
pub use framing::{FrameConfig, FrameCutter, WindowKind};
pub use mel::{hz_to_mel, mel_to_hz, MelBank, MelConfig, LOG_FLOOR};
pub use ops::{
    cascade_flush, cascade_push, concat_streams, AffineOp, AffineTransform, DeltaAppender,
    FeatureOp, SlidingCmvn, Splicer, STD_FLOOR,
};
pub use window::{make_window, FrameConditioner};
