use nalgebra::{DMatrix, SymmetricEigen};

use super::chamfer::DistanceMatrix;
use crate::error::{Error, Result};

/// Kernel bandwidth choice.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Bandwidth {
    /// Median of the squared off-diagonal distances.
    #[default]
    Median,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionEmbedding {
    /// N × k diffusion coordinates at time 1.
    pub coords: DMatrix<f64>,
    /// k nontrivial eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    pub epsilon: f64,
    /// Set when every distance is zero; coordinates are then all zero.
    pub degenerate: bool,
}

fn median(mut values: Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 { values[n / 2] } else { 0.5 * (values[n / 2 - 1] + values[n / 2]) })
}

/// Diffusion-map embedding of a distance matrix with `k` nontrivial eigenpairs.
///
/// The kernel `exp(−D²/ε)` is row-normalized into a Markov matrix `P`, whose
/// spectrum is obtained from the symmetric conjugate `D^{-1/2} K D^{-1/2}`.
/// Right eigenvectors are scaled so the trivial one is constant 1, then each
/// is sign-normalized so its largest-magnitude entry is positive.
pub fn diffusion_map(d: &DistanceMatrix, k: usize, bandwidth: Bandwidth) -> Result<DiffusionEmbedding> {
    let n = d.len();
    if k == 0 || k >= n {
        return Err(Error::InvalidArgument(format!(
            "diffusion map needs 1 ≤ k < N, got k = {k}, N = {n}"
        )));
    }
    let squared: Vec<f64> = d.off_diagonal().map(|v| v * v).collect();
    let epsilon = match bandwidth {
        Bandwidth::Fixed(e) if e.is_finite() && e > 0.0 => e,
        Bandwidth::Fixed(e) => {
            return Err(Error::InvalidArgument(format!("bandwidth {e} must be positive and finite")));
        }
        Bandwidth::Median => match median(squared.clone()) {
            Some(m) if m > 0.0 => m,
            _ => match median(squared.iter().copied().filter(|&v| v > 0.0).collect()) {
                Some(m) => {
                    log::warn!("median squared distance is zero; using median of positive entries");
                    m
                }
                None => {
                    log::warn!("all distances are zero; diffusion embedding is degenerate");
                    return Ok(DiffusionEmbedding {
                        coords: DMatrix::zeros(n, k),
                        eigenvalues: vec![0.0; k],
                        epsilon: 0.0,
                        degenerate: true,
                    });
                }
            },
        },
    };

    let kernel = DMatrix::from_fn(n, n, |i, j| {
        let v = d.get(i, j);
        (-(v * v) / epsilon).exp()
    });
    for i in 0..n {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| kernel[(i, j)]).sum();
        if off == 0.0 {
            return Err(Error::DegenerateKernel(format!(
                "row {i} has no kernel mass off the diagonal at ε = {epsilon:e}"
            )));
        }
    }
    let degree: Vec<f64> = (0..n).map(|i| kernel.row(i).sum()).collect();
    let inv_sqrt: Vec<f64> = degree.iter().map(|g| 1.0 / g.sqrt()).collect();
    let sym = DMatrix::from_fn(n, n, |i, j| {
        // Average the two products so the matrix is exactly symmetric.
        let a = inv_sqrt[i] * kernel[(i, j)] * inv_sqrt[j];
        let b = inv_sqrt[j] * kernel[(j, i)] * inv_sqrt[i];
        0.5 * (a + b)
    });
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));

    let total: f64 = degree.iter().sum();
    let mut coords = DMatrix::zeros(n, k);
    let mut eigenvalues = Vec::with_capacity(k);
    for (c, &idx) in order.iter().skip(1).take(k).enumerate() {
        let lambda = eig.eigenvalues[idx];
        let mut psi: Vec<f64> = (0..n)
            .map(|i| eig.eigenvectors[(i, idx)] * total.sqrt() * inv_sqrt[i])
            .collect();
        let pivot = (0..n).fold(0, |p, i| if psi[i].abs() > psi[p].abs() { i } else { p });
        if psi[pivot] < 0.0 {
            psi.iter_mut().for_each(|v| *v = -*v);
        }
        for i in 0..n {
            coords[(i, c)] = lambda * psi[i];
        }
        eigenvalues.push(lambda);
    }
    Ok(DiffusionEmbedding {
        coords,
        eigenvalues,
        epsilon,
        degenerate: false,
    })
}
