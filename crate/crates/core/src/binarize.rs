//! Bi-level thresholding of grayscale images.

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::imagegrid::{BinaryImage, GrayImage, Label, Polarity};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    Otsu,
    Manual(u8),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThresholdConfig {
    pub mode: ThresholdMode,
    pub polarity: Polarity,
}

impl ThresholdConfig {
    pub fn otsu() -> Self {
        Self { mode: ThresholdMode::Otsu, polarity: Polarity::DarkBackground }
    }

    pub fn manual(threshold: u8) -> Self {
        Self { mode: ThresholdMode::Manual(threshold), polarity: Polarity::DarkBackground }
    }

    pub fn with_polarity(self, polarity: Polarity) -> Self {
        Self { polarity, ..self }
    }
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        Self::otsu()
    }
}

/// Otsu's threshold over the 256-bin histogram.
///
/// Pixels `<= t` form the low class. Candidates are compared exactly: the
/// between-class variance is proportional to `(S0*N - S*w0)^2 / (w0*w1)`,
/// where `w0`/`w1` are the class weights, `S0` the low-class intensity sum,
/// `S` the total sum and `N` the pixel count. Ties go to the smallest `t`.
pub fn otsu_threshold(img: &GrayImage) -> Result<u8> {
    otsu_from_histogram(&img.histogram())
}

pub fn otsu_from_histogram(hist: &[u64; 256]) -> Result<u8> {
    let total: u64 = hist.iter().sum();
    if total == 0 {
        return Err(Error::EmptyInput);
    }
    let total_sum: u128 = hist.iter().enumerate().map(|(i, &h)| i as u128 * h as u128).sum();

    let mut best: Option<(u8, BigUint, BigUint)> = None;
    let mut w0: u64 = 0;
    let mut s0: u128 = 0;
    for (t, &count) in hist.iter().enumerate() {
        w0 += count;
        s0 += t as u128 * count as u128;
        if w0 == 0 {
            continue;
        }
        let w1 = total - w0;
        if w1 == 0 {
            break;
        }
        let lhs = s0 * total as u128;
        let rhs = total_sum * w0 as u128;
        let diff = lhs.abs_diff(rhs);
        let num = BigUint::from(diff) * BigUint::from(diff);
        let den = BigUint::from(w0) * BigUint::from(w1);
        let better = match &best {
            None => true,
            Some((_, best_num, best_den)) => &num * best_den > best_num * &den,
        };
        if better {
            best = Some((t as u8, num, den));
        }
    }
    match best {
        Some((t, _, _)) => Ok(t),
        None => {
            let level = hist.iter().position(|&h| h > 0).unwrap_or(0) as u8;
            Err(Error::DegenerateHistogram(level))
        }
    }
}

/// Resolves the threshold from `cfg` and splits `img` into two labels.
pub fn binarize(img: &GrayImage, cfg: &ThresholdConfig) -> Result<BinaryImage> {
    let t = match cfg.mode {
        ThresholdMode::Otsu => otsu_threshold(img)?,
        ThresholdMode::Manual(t) => t,
    };
    let labels = img
        .pixels()
        .iter()
        .map(|&p| {
            let foreground = match cfg.polarity {
                Polarity::DarkBackground => p > t,
                Polarity::LightBackground => p <= t,
            };
            if foreground {
                Label::Foreground
            } else {
                Label::Background
            }
        })
        .collect();
    BinaryImage::new(img.rows(), img.cols(), labels, t, cfg.polarity)
}
