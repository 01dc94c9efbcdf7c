//! Single-level separable 3D discrete wavelet transform.
//!
//! Each axis is processed with half-sample symmetric extension, full
//! convolution and decimation keeping odd output indices, which gives
//! `floor((N + L_f − 1) / 2)` coefficients per axis (130 for N = 256 with
//! the 6-tap Coiflet).

mod filter;
mod transform;

pub use filter::WaveletFilter;
pub use transform::{
    analysis_1d, coarse_len, dwt3_forward, dwt3_forward_with, dwt3_inverse, dwt3_inverse_coarse_only,
    dwt3_inverse_with, synthesis_1d, CoeffVolume, Extension, DETAIL_BANDS,
};
