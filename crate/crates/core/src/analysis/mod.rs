//! Waveform storage and comparison metrics.

mod chatter;
mod metrics;
mod spectrum;
mod waveform;

pub use chatter::{blocked_spans, chattering_index, dcm_error_table, ChatterIndex, DcmColumn, DcmTable};
pub use metrics::{mean, median_spacing, relative_error, resample, rms};
pub use spectrum::{fft_spectrum, fft_spectrum_with, Spectrum, Taper};
pub use waveform::Waveform;
