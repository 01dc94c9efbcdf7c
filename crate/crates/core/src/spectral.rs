//! Dataset SVD of coarse wavelet coefficients.
//!
//! Rows of the dataset matrix `X` (n × m) are flattened coarse volumes. Since
//! m ≫ n in practice, the decomposition goes through the n × n Gram matrix:
//! `X Xᵀ = U Λ Uᵀ`, `σ = √λ`, `V = Xᵀ U Σ⁻¹`. Spectral features are the rows
//! of `U_d Σ_d`, equivalently `X V_d`.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::volume::Volume;

/// Eigenvalues of `X Xᵀ` below `λ_max · RANK_FLOOR` are treated as zero.
pub const RANK_FLOOR: f64 = 1e-12;

/// Half-width of the normalized feature range.
pub const FEATURE_RANGE: f64 = 3.0;

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetMatrix {
    /// n × m, one flattened coarse volume per row.
    pub data: DMatrix<f64>,
    pub mesh_ids: Vec<String>,
    pub coarse_dims: [usize; 3],
}

impl DatasetMatrix {
    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn cols(&self) -> usize {
        self.data.ncols()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.data.row(i).iter().copied().collect()
    }

    pub fn row_volume(&self, i: usize) -> Volume {
        unflatten(self.row(i), self.coarse_dims).expect("row length matches coarse dims")
    }
}

/// Flattening follows [`Volume`]'s x-fastest storage order.
pub fn flatten(volume: &Volume) -> Vec<f64> {
    volume.as_slice().to_vec()
}

pub fn unflatten(values: Vec<f64>, dims: [usize; 3]) -> Result<Volume> {
    Volume::from_vec(dims, values)
}

pub fn stack_coefficients(volumes: &[Volume], mesh_ids: Vec<String>) -> Result<DatasetMatrix> {
    let first = volumes
        .first()
        .ok_or_else(|| Error::Empty("no coefficient volumes to stack".into()))?;
    if mesh_ids.len() != volumes.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} ids for {} volumes",
            mesh_ids.len(),
            volumes.len()
        )));
    }
    let dims = first.dims();
    for (i, v) in volumes.iter().enumerate() {
        if v.dims() != dims {
            return Err(Error::ShapeMismatch(format!(
                "sample {i} ({}) has coarse shape {:?}, expected {:?}",
                mesh_ids[i],
                v.dims(),
                dims
            )));
        }
        if v.as_slice().iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("sample {i} ({})", mesh_ids[i])));
        }
    }
    let m = first.len();
    let data = DMatrix::from_fn(volumes.len(), m, |i, j| volumes[i].as_slice()[j]);
    if m < volumes.len() {
        log::warn!("dataset has more samples ({}) than coefficients ({m})", volumes.len());
    }
    Ok(DatasetMatrix {
        data,
        mesh_ids,
        coarse_dims: dims,
    })
}

/// Truncated right singular vectors: the stored dictionary.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralBasis {
    /// m × d, orthonormal columns.
    pub v: DMatrix<f64>,
    /// d singular values, descending.
    pub singular_values: Vec<f64>,
    pub coarse_dims: [usize; 3],
    pub n_samples: usize,
    /// Side length of the SDF grids the coefficients came from, if known.
    pub source_resolution: Option<usize>,
    /// Wavelet filter name, if known.
    pub filter: Option<String>,
}

impl SpectralBasis {
    pub fn rank(&self) -> usize {
        self.v.ncols()
    }

    pub fn coefficient_len(&self) -> usize {
        self.v.nrows()
    }

    /// Content hash of the basis vectors and singular values.
    pub fn basis_id(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.v.nrows() as u64).to_le_bytes());
        h.update((self.v.ncols() as u64).to_le_bytes());
        for x in self.v.iter().chain(&self.singular_values) {
            h.update(x.to_le_bytes());
        }
        let digest = h.finalize();
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    /// ‖VᵀV − I‖∞ (entrywise max).
    pub fn orthonormality_error(&self) -> f64 {
        let gram = self.v.transpose() * &self.v;
        let d = gram.nrows();
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((gram[(i, j)] - target).abs());
            }
        }
        worst
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralFeatures {
    /// n × d, rows are per-shape features.
    pub alpha: DMatrix<f64>,
    pub basis_id: String,
}

#[derive(Debug, Clone)]
pub struct SpectralFit {
    pub features: SpectralFeatures,
    pub basis: SpectralBasis,
    /// All singular values above the rank floor, descending.
    pub spectrum: Vec<f64>,
    /// Rank that was asked for; `basis.rank()` may be smaller after capping.
    pub requested_rank: usize,
}

fn gram_matrix(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let rows: Vec<Vec<f64>> = (0..n).map(|i| x.row(i).iter().copied().collect()).collect();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let dots: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| rows[i].iter().zip(&rows[j]).map(|(a, b)| a * b).sum())
        .collect();
    let mut g = DMatrix::zeros(n, n);
    for (&(i, j), &v) in pairs.iter().zip(&dots) {
        g[(i, j)] = v;
        g[(j, i)] = v;
    }
    g
}

/// Truncated SVD of `x` at rank `d` through the Gram matrix.
///
/// A `d` above the numerical rank is capped (with a warning). Each basis
/// column is sign-normalized so its largest-magnitude entry is positive.
pub fn fit_svd(x: &DatasetMatrix, d: usize) -> Result<SpectralFit> {
    if d == 0 {
        return Err(Error::InvalidArgument("rank d must be at least 1".into()));
    }
    if x.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("dataset matrix".into()));
    }
    let n = x.rows();
    if n > x.cols() {
        log::warn!("n = {n} exceeds m = {}; Gram route still exact", x.cols());
    }

    let eig = SymmetricEigen::new(gram_matrix(&x.data));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let lambda_max = eig.eigenvalues[order[0]];
    if !(lambda_max > 0.0) {
        return Err(Error::RankDeficient {
            rank: 0,
            message: "dataset matrix is numerically zero".into(),
        });
    }
    let floor = lambda_max * RANK_FLOOR;
    let spectrum: Vec<f64> = order
        .iter()
        .map(|&k| eig.eigenvalues[k])
        .take_while(|&l| l > floor)
        .map(f64::sqrt)
        .collect();
    let rank = spectrum.len();
    let kept = if d > rank {
        log::warn!("requested rank {d} exceeds numerical rank {rank}; capping");
        rank
    } else {
        d
    };

    let mut u = DMatrix::from_fn(n, kept, |i, k| eig.eigenvectors[(i, order[k])]);
    let mut v = x.data.transpose() * &u;
    for k in 0..kept {
        let inv = 1.0 / spectrum[k];
        v.column_mut(k).iter_mut().for_each(|e| *e *= inv);
        let mut pivot = 0usize;
        for (j, e) in v.column(k).iter().enumerate() {
            if e.abs() > v[(pivot, k)].abs() {
                pivot = j;
            }
        }
        if v[(pivot, k)] < 0.0 {
            v.column_mut(k).neg_mut();
            u.column_mut(k).neg_mut();
        }
    }
    let singular_values = spectrum[..kept].to_vec();
    let alpha = DMatrix::from_fn(n, kept, |i, k| u[(i, k)] * singular_values[k]);
    let basis = SpectralBasis {
        v,
        singular_values,
        coarse_dims: x.coarse_dims,
        n_samples: n,
        source_resolution: None,
        filter: None,
    };
    Ok(SpectralFit {
        features: SpectralFeatures {
            alpha,
            basis_id: basis.basis_id(),
        },
        basis,
        spectrum,
        requested_rank: d,
    })
}

/// Squared Frobenius residual of the rank-`d` truncation: `Σ_{i>d} σ_i²`.
pub fn truncation_error(singular_values: &[f64], d: usize) -> f64 {
    singular_values.iter().skip(d).fold(0.0, |acc, s| acc + s * s)
}

/// Projects a coarse volume onto the basis: `flatten(c) · V_d`.
pub fn encode(coarse: &Volume, basis: &SpectralBasis) -> Result<Vec<f64>> {
    if coarse.dims() != basis.coarse_dims {
        return Err(Error::ShapeMismatch(format!(
            "volume {:?} does not match basis coarse shape {:?}",
            coarse.dims(),
            basis.coarse_dims
        )));
    }
    let c = coarse.as_slice();
    Ok((0..basis.rank())
        .map(|k| basis.v.column(k).iter().zip(c).map(|(a, b)| a * b).sum())
        .collect())
}

/// Reconstructs coarse coefficients `α · V_dᵀ`.
pub fn decode(alpha: &[f64], basis: &SpectralBasis) -> Result<Volume> {
    if alpha.len() != basis.rank() {
        return Err(Error::ShapeMismatch(format!(
            "feature length {} does not match basis rank {}",
            alpha.len(),
            basis.rank()
        )));
    }
    if alpha.iter().any(|a| !a.is_finite()) {
        return Err(Error::NonFinite("feature vector".into()));
    }
    let m = basis.coefficient_len();
    let mut out = vec![0.0; m];
    for (k, &a) in alpha.iter().enumerate() {
        for (o, &v) in out.iter_mut().zip(basis.v.column(k).iter()) {
            *o += a * v;
        }
    }
    unflatten(out, basis.coarse_dims)
}

/// Per-dimension affine map between feature extremes and `[−3, 3]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationParams {
    pub alpha_min: Vec<f64>,
    pub alpha_max: Vec<f64>,
    /// Dimensions with `alpha_min == alpha_max`.
    pub degenerate: Vec<bool>,
}

impl NormalizationParams {
    pub fn from_extremes(alpha_min: Vec<f64>, alpha_max: Vec<f64>) -> Result<Self> {
        if alpha_min.len() != alpha_max.len() {
            return Err(Error::ShapeMismatch("alpha_min and alpha_max lengths differ".into()));
        }
        if let Some(i) = (0..alpha_min.len()).find(|&i| !(alpha_min[i] <= alpha_max[i])) {
            return Err(Error::InvalidArgument(format!(
                "alpha_min[{i}] = {} exceeds alpha_max[{i}] = {}",
                alpha_min[i], alpha_max[i]
            )));
        }
        let degenerate = alpha_min.iter().zip(&alpha_max).map(|(a, b)| a == b).collect();
        Ok(NormalizationParams {
            alpha_min,
            alpha_max,
            degenerate,
        })
    }

    pub fn dim(&self) -> usize {
        self.alpha_min.len()
    }

    /// Denormalization slopes `(α_max − α_min) / 6`, zero on degenerate dims.
    pub fn slopes(&self) -> Vec<f64> {
        self.alpha_min
            .iter()
            .zip(&self.alpha_max)
            .map(|(lo, hi)| (hi - lo) / (2.0 * FEATURE_RANGE))
            .collect()
    }

    pub fn normalize(&self, alpha: &[f64]) -> Result<Vec<f64>> {
        self.check_len(alpha.len())?;
        Ok(alpha
            .iter()
            .enumerate()
            .map(|(i, &a)| {
                if self.degenerate[i] {
                    0.0
                } else {
                    let (lo, hi) = (self.alpha_min[i], self.alpha_max[i]);
                    let t = (a - lo) / (hi - lo);
                    2.0 * FEATURE_RANGE * t - FEATURE_RANGE
                }
            })
            .collect())
    }

    pub fn denormalize(&self, alpha_hat: &[f64]) -> Result<Vec<f64>> {
        self.check_len(alpha_hat.len())?;
        Ok(alpha_hat
            .iter()
            .enumerate()
            .map(|(i, &a)| {
                let (lo, hi) = (self.alpha_min[i], self.alpha_max[i]);
                if self.degenerate[i] {
                    lo
                } else {
                    let t = (a + FEATURE_RANGE) / (2.0 * FEATURE_RANGE);
                    (1.0 - t) * lo + t * hi
                }
            })
            .collect())
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(Error::ShapeMismatch(format!(
                "feature length {len} does not match normalization dimension {}",
                self.dim()
            )));
        }
        Ok(())
    }
}

/// Normalizes every column of `alpha` (n × d) to `[−3, 3]`.
pub fn normalize_features(alpha: &DMatrix<f64>) -> Result<(DMatrix<f64>, NormalizationParams)> {
    if alpha.nrows() == 0 {
        return Err(Error::Empty("no feature rows".into()));
    }
    if alpha.nrows() < 2 {
        log::warn!("a single feature row makes every dimension degenerate");
    }
    let d = alpha.ncols();
    let alpha_min: Vec<f64> = (0..d).map(|k| alpha.column(k).min()).collect();
    let alpha_max: Vec<f64> = (0..d).map(|k| alpha.column(k).max()).collect();
    let params = NormalizationParams::from_extremes(alpha_min, alpha_max)?;
    let mut out = DMatrix::zeros(alpha.nrows(), d);
    for i in 0..alpha.nrows() {
        let row: Vec<f64> = alpha.row(i).iter().copied().collect();
        for (k, v) in params.normalize(&row)?.into_iter().enumerate() {
            out[(i, k)] = v;
        }
    }
    Ok((out, params))
}

pub fn denormalize_features(alpha_hat: &[f64], params: &NormalizationParams) -> Result<Vec<f64>> {
    params.denormalize(alpha_hat)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stacks_rows_in_order() {
        let vols: Vec<Volume> = (0..3).map(|i| Volume::filled([2; 3], i as f64)).collect();
        let x = stack_coefficients(&vols, vec!["a".into(), "b".into(), "c".into()]).unwrap();
        assert_eq!((x.rows(), x.cols()), (3, 8));
        assert_eq!(x.row(2), vec![2.0; 8]);
    }

    #[test]
    fn mismatched_shape_names_sample() {
        let vols = vec![Volume::zeros([2; 3]), Volume::zeros([3; 3])];
        let err = stack_coefficients(&vols, vec!["a".into(), "bad".into()]).unwrap_err();
        assert!(err.to_string().contains("bad"));
    }

    #[test]
    fn truncation_error_examples() {
        assert_eq!(truncation_error(&[3.0, 2.0, 1.0], 1), 5.0);
        assert_eq!(truncation_error(&[3.0, 2.0, 1.0], 3), 0.0);
        assert_eq!(truncation_error(&[3.0, 2.0, 1.0], 0), 14.0);
    }

    #[test]
    fn single_row_has_rank_one() {
        let v = Volume::from_fn([2; 3], |x, y, z| (x + 2 * y + 3 * z) as f64 + 1.0);
        let x = stack_coefficients(&[v], vec!["only".into()]).unwrap();
        let fit = fit_svd(&x, 1).unwrap();
        assert_eq!(fit.spectrum.len(), 1);
    }

    #[test]
    fn zero_matrix_is_rank_deficient() {
        let x = stack_coefficients(&[Volume::zeros([2; 3])], vec!["z".into()]).unwrap();
        assert!(matches!(fit_svd(&x, 1), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn normalization_endpoints() {
        let alpha = DMatrix::from_row_slice(3, 2, &[-1.0, 5.0, 0.0, 5.0, 1.0, 5.0]);
        let (norm, p) = normalize_features(&alpha).unwrap();
        assert_eq!(norm.column(0).iter().copied().collect::<Vec<_>>(), vec![-3.0, 0.0, 3.0]);
        assert_eq!(norm.column(1).iter().copied().collect::<Vec<_>>(), vec![0.0; 3]);
        assert_eq!(p.degenerate, vec![false, true]);
        assert_eq!(p.denormalize(&[-3.0, 1.7]).unwrap(), vec![-1.0, 5.0]);
        assert_eq!(p.denormalize(&[3.0, 0.0]).unwrap(), vec![1.0, 5.0]);
        assert_eq!(p.denormalize(&[0.0, 0.0]).unwrap(), vec![0.0, 5.0]);
        assert!(p.denormalize(&[0.0]).is_err());
    }
}
