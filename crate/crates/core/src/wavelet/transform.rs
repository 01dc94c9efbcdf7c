use rayon::prelude::*;

use super::WaveletFilter;
use crate::error::{Error, Result};
use crate::volume::Volume;

/// Detail band labels in storage order. Letters give the (x, y, z) filter,
/// `L` low-pass and `H` high-pass; the coarse band is `LLL`.
pub const DETAIL_BANDS: [&str; 7] = ["LLH", "LHL", "LHH", "HLL", "HLH", "HHL", "HHH"];

/// Boundary handling. Only `Symmetric` is used by the pipeline; `Periodic`
/// makes the transform orthogonal and exists for energy checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Extension {
    #[default]
    Symmetric,
    #[doc(hidden)]
    Periodic,
}

/// Single-level decomposition of a volume.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffVolume {
    pub coarse: Volume,
    /// Seven detail volumes in [`DETAIL_BANDS`] order, if retained.
    pub details: Option<Vec<Volume>>,
    pub source_dims: [usize; 3],
    pub filter: WaveletFilter,
}

/// Coefficients per axis for a length-`n` signal.
pub fn coarse_len(n: usize, filter_len: usize, ext: Extension) -> usize {
    match ext {
        Extension::Symmetric => (n + filter_len - 1) / 2,
        Extension::Periodic => n / 2,
    }
}

#[inline]
fn symmetric_index(mut i: isize, n: isize) -> usize {
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= n {
            i = 2 * n - 1 - i;
        } else {
            return i as usize;
        }
    }
}

/// One-dimensional analysis step, returning `(approximation, detail)`.
pub fn analysis_1d(signal: &[f64], filter: &WaveletFilter, ext: Extension) -> (Vec<f64>, Vec<f64>) {
    let n = signal.len();
    let f = filter.len();
    let out = coarse_len(n, f, ext);
    let mut lo = vec![0.0; out];
    let mut hi = vec![0.0; out];
    for i in 0..out {
        let mut a = 0.0;
        let mut d = 0.0;
        for j in 0..f {
            let t = 2 * i as isize + 1 - j as isize;
            let x = match ext {
                Extension::Symmetric => signal[symmetric_index(t, n as isize)],
                Extension::Periodic => signal[t.rem_euclid(n as isize) as usize],
            };
            a += filter.dec_lo[j] * x;
            d += filter.dec_hi[j] * x;
        }
        lo[i] = a;
        hi[i] = d;
    }
    (lo, hi)
}

/// One-dimensional synthesis step recovering `n` samples.
pub fn synthesis_1d(
    lo: &[f64],
    hi: Option<&[f64]>,
    n: usize,
    filter: &WaveletFilter,
    ext: Extension,
) -> Vec<f64> {
    let f = filter.len();
    let mut out = vec![0.0; n];
    match ext {
        Extension::Symmetric => {
            for (t, o) in out.iter_mut().enumerate() {
                let mut acc = 0.0;
                // taps k = t + f − 2 − 2i must fall inside [0, f)
                let i_max = ((t + f - 2) / 2).min(lo.len().saturating_sub(1));
                for i in t / 2..=i_max {
                    let k = t + f - 2 - 2 * i;
                    acc += filter.rec_lo[k] * lo[i];
                    if let Some(hi) = hi {
                        acc += filter.rec_hi[k] * hi[i];
                    }
                }
                *o = acc;
            }
        }
        Extension::Periodic => {
            // adjoint of the periodic analysis operator
            for i in 0..lo.len() {
                for j in 0..f {
                    let t = (2 * i as isize + 1 - j as isize).rem_euclid(n as isize) as usize;
                    out[t] += filter.dec_lo[j] * lo[i];
                    if let Some(hi) = hi {
                        out[t] += filter.dec_hi[j] * hi[i];
                    }
                }
            }
        }
    }
    out
}

fn strides(dims: [usize; 3]) -> [usize; 3] {
    [1, dims[0], dims[0] * dims[1]]
}

/// Start offsets of every line running along `axis`.
fn line_starts(dims: [usize; 3], axis: usize) -> Vec<(usize, usize)> {
    let (a, b) = ((axis + 1) % 3, (axis + 2) % 3);
    let mut out = Vec::with_capacity(dims[a] * dims[b]);
    for ib in 0..dims[b] {
        for ia in 0..dims[a] {
            out.push((ia, ib));
        }
    }
    out
}

fn offset(dims: [usize; 3], axis: usize, ia: usize, ib: usize) -> usize {
    let s = strides(dims);
    ia * s[(axis + 1) % 3] + ib * s[(axis + 2) % 3]
}

fn analyze_axis(vol: &Volume, axis: usize, filter: &WaveletFilter, ext: Extension) -> (Volume, Volume) {
    let dims = vol.dims();
    let n = dims[axis];
    let out_len = coarse_len(n, filter.len(), ext);
    let mut out_dims = dims;
    out_dims[axis] = out_len;
    let starts = line_starts(dims, axis);
    let stride = strides(dims)[axis];
    let src = vol.as_slice();
    let lines: Vec<(Vec<f64>, Vec<f64>)> = starts
        .par_iter()
        .map(|&(ia, ib)| {
            let base = offset(dims, axis, ia, ib);
            let line: Vec<f64> = (0..n).map(|t| src[base + t * stride]).collect();
            analysis_1d(&line, filter, ext)
        })
        .collect();
    let mut lo = Volume::zeros(out_dims);
    let mut hi = Volume::zeros(out_dims);
    let out_stride = strides(out_dims)[axis];
    for (&(ia, ib), (l, h)) in starts.iter().zip(lines) {
        let base = offset(out_dims, axis, ia, ib);
        for t in 0..out_len {
            lo.as_mut_slice()[base + t * out_stride] = l[t];
            hi.as_mut_slice()[base + t * out_stride] = h[t];
        }
    }
    (lo, hi)
}

fn synthesize_axis(
    lo: &Volume,
    hi: Option<&Volume>,
    axis: usize,
    n: usize,
    filter: &WaveletFilter,
    ext: Extension,
) -> Volume {
    let dims = lo.dims();
    let len = dims[axis];
    let mut out_dims = dims;
    out_dims[axis] = n;
    let starts = line_starts(dims, axis);
    let stride = strides(dims)[axis];
    let lines: Vec<Vec<f64>> = starts
        .par_iter()
        .map(|&(ia, ib)| {
            let base = offset(dims, axis, ia, ib);
            let l: Vec<f64> = (0..len).map(|t| lo.as_slice()[base + t * stride]).collect();
            let h: Option<Vec<f64>> =
                hi.map(|hv| (0..len).map(|t| hv.as_slice()[base + t * stride]).collect());
            synthesis_1d(&l, h.as_deref(), n, filter, ext)
        })
        .collect();
    let mut out = Volume::zeros(out_dims);
    let out_stride = strides(out_dims)[axis];
    for (&(ia, ib), line) in starts.iter().zip(lines) {
        let base = offset(out_dims, axis, ia, ib);
        for (t, v) in line.into_iter().enumerate() {
            out.as_mut_slice()[base + t * out_stride] = v;
        }
    }
    out
}

pub fn dwt3_forward(volume: &Volume, filter: &WaveletFilter) -> Result<CoeffVolume> {
    dwt3_forward_with(volume, filter, Extension::Symmetric)
}

pub fn dwt3_forward_with(volume: &Volume, filter: &WaveletFilter, ext: Extension) -> Result<CoeffVolume> {
    let dims = volume.dims();
    for &n in &dims {
        if n < filter.len() {
            return Err(Error::InvalidArgument(format!(
                "volume side {n} is shorter than the {}-tap {} filter",
                filter.len(),
                filter.name
            )));
        }
        if ext == Extension::Periodic && n % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "periodic extension needs even sides, got {n}"
            )));
        }
    }
    if volume.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("wavelet input volume".into()));
    }
    // band index = 4·hx + 2·hy + hz
    let mut bands = vec![volume.clone()];
    for axis in 0..3 {
        bands = bands
            .iter()
            .flat_map(|b| {
                let (l, h) = analyze_axis(b, axis, filter, ext);
                [l, h]
            })
            .collect();
    }
    let mut bands = bands.into_iter();
    let coarse = bands.next().expect("eight bands");
    Ok(CoeffVolume {
        coarse,
        details: Some(bands.collect()),
        source_dims: dims,
        filter: filter.clone(),
    })
}

pub fn dwt3_inverse(coeffs: &CoeffVolume) -> Result<Volume> {
    dwt3_inverse_with(coeffs, Extension::Symmetric)
}

pub fn dwt3_inverse_with(coeffs: &CoeffVolume, ext: Extension) -> Result<Volume> {
    let filter = &coeffs.filter;
    let expected: Vec<usize> = coeffs
        .source_dims
        .iter()
        .map(|&n| coarse_len(n, filter.len(), ext))
        .collect();
    if coeffs.coarse.dims().as_slice() != expected.as_slice() {
        return Err(Error::ShapeMismatch(format!(
            "coarse band {:?} does not match a source of {:?} (expected {:?})",
            coeffs.coarse.dims(),
            coeffs.source_dims,
            expected
        )));
    }
    if let Some(details) = &coeffs.details {
        if details.len() != 7 {
            return Err(Error::ShapeMismatch(format!(
                "expected 7 detail bands, got {}",
                details.len()
            )));
        }
        if let Some((i, d)) = details
            .iter()
            .enumerate()
            .find(|(_, d)| d.dims() != coeffs.coarse.dims())
        {
            return Err(Error::ShapeMismatch(format!(
                "detail band {} has shape {:?}, coarse has {:?}",
                DETAIL_BANDS[i],
                d.dims(),
                coeffs.coarse.dims()
            )));
        }
    }
    let mut bands: Vec<Option<&Volume>> = vec![Some(&coeffs.coarse)];
    match &coeffs.details {
        Some(d) => bands.extend(d.iter().map(Some)),
        None => bands.extend(std::iter::repeat_n(None, 7)),
    }
    // undo z, then y, then x; pairs (2k, 2k+1) differ only in the last axis
    let mut current: Vec<Option<Volume>> = bands.into_iter().map(|b| b.cloned()).collect();
    for axis in (0..3).rev() {
        let n = coeffs.source_dims[axis];
        current = current
            .chunks(2)
            .map(|pair| {
                let lo = pair[0].as_ref().expect("low band always present");
                Some(synthesize_axis(lo, pair[1].as_ref(), axis, n, filter, ext))
            })
            .collect();
    }
    Ok(current.pop().flatten().expect("single output"))
}

/// Inverse with every detail band set to zero.
pub fn dwt3_inverse_coarse_only(
    coarse: &Volume,
    source_dims: [usize; 3],
    filter: &WaveletFilter,
) -> Result<Volume> {
    let zeros = vec![Volume::zeros(coarse.dims()); 7];
    dwt3_inverse(&CoeffVolume {
        coarse: coarse.clone(),
        details: Some(zeros),
        source_dims,
        filter: filter.clone(),
    })
}
