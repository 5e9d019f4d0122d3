//! Spectral front-ends: STFT/ISTFT, the detector's input representations,
//! mel filterbanks with pseudo-inverse inversion, and Griffin-Lim phase
//! retrieval.

mod filter;
mod griffin_lim;
mod linalg;
mod matrix;
mod mel;
mod repr;
mod stft;

pub use filter::lowpass;
pub use griffin_lim::{griffin_lim, GriffinLimConfig, GriffinLimOutput};
pub use linalg::{pseudo_inverse, symmetric_eigen, PseudoInverse};
pub use matrix::Matrix;
pub use mel::{hz_to_mel, mel_to_hz, MelFilterbank};
pub use repr::{parse_kinds, retained_bins, to_representation, RepKind, SpectralRep, DB_EPSILON, DB_FLOOR};
pub use stft::{stft_clip, Spectrogram, Stft, StftConfig, Window};
