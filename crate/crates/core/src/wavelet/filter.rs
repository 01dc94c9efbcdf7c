use std::fmt;

use crate::error::{Error, Result};

/// Orthogonal two-channel filter bank.
#[derive(Clone, PartialEq)]
pub struct WaveletFilter {
    pub name: &'static str,
    pub dec_lo: Vec<f64>,
    pub dec_hi: Vec<f64>,
    pub rec_lo: Vec<f64>,
    pub rec_hi: Vec<f64>,
}

impl fmt::Debug for WaveletFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "WaveletFilter({}, {} taps)", self.name, self.len())
    }
}

impl WaveletFilter {
    /// Builds the bank from reconstruction low-pass taps using the usual
    /// quadrature-mirror relations.
    fn from_rec_lo(name: &'static str, rec_lo: Vec<f64>) -> Self {
        let dec_lo: Vec<f64> = rec_lo.iter().rev().copied().collect();
        let rec_hi: Vec<f64> = dec_lo
            .iter()
            .enumerate()
            .map(|(k, &h)| if k % 2 == 0 { h } else { -h })
            .collect();
        let dec_hi = rec_hi.iter().rev().copied().collect();
        WaveletFilter {
            name,
            dec_lo,
            dec_hi,
            rec_lo,
            rec_hi,
        }
    }

    /// Coiflet of order 1 (6 taps), closed form in √7.
    pub fn coif1() -> Self {
        let s7 = 7f64.sqrt();
        let k = 16.0 * std::f64::consts::SQRT_2;
        Self::from_rec_lo(
            "coif1",
            vec![
                (1.0 - s7) / k,
                (5.0 + s7) / k,
                (14.0 + 2.0 * s7) / k,
                (14.0 - 2.0 * s7) / k,
                (1.0 - s7) / k,
                (-3.0 + s7) / k,
            ],
        )
    }

    pub fn haar() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self::from_rec_lo("haar", vec![h, h])
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "coif1" => Ok(Self::coif1()),
            "haar" => Ok(Self::haar()),
            other => Err(Error::InvalidArgument(format!(
                "unknown wavelet {other:?} (expected coif1 or haar)"
            ))),
        }
    }

    pub fn len(&self) -> usize {
        self.dec_lo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dec_lo.is_empty()
    }
}
