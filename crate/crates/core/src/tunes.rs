//! Main-frequency (tune) estimation from turn-by-turn data.
//!
//! The series is mean-subtracted, Hann-windowed and zero-padded before the
//! FFT; the peak bin is refined by a parabola through the log magnitudes of
//! its neighbours. Frequencies are in units of the sampling rate and folded
//! into `[0, 0.5]`, so `Q` and `1 - Q` are indistinguishable.

use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shortest series accepted by the estimators.
pub const MIN_SAMPLES: usize = 64;

const PADDING: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyEstimate {
    pub frequency: f64,
    /// True when the series has no variation; `frequency` is then 0.
    pub degenerate: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tunes {
    pub qx: f64,
    pub qy: f64,
    pub degenerate_x: bool,
    pub degenerate_y: bool,
}

/// Dominant normalized frequency of `series`.
pub fn estimate_frequency(series: &[f64]) -> Result<FrequencyEstimate> {
    let n = series.len();
    if n < MIN_SAMPLES {
        return Err(Error::InvalidParameter(format!(
            "tune estimation needs at least {MIN_SAMPLES} samples, got {n}"
        )));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("series contains non-finite values".into()));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let spread = series.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
    if spread <= 1e-14 * mean.abs() {
        return Ok(FrequencyEstimate {
            frequency: 0.0,
            degenerate: true,
        });
    }

    let len = n.next_power_of_two() * PADDING;
    let mut buf = vec![Complex::new(0.0, 0.0); len];
    for (i, v) in series.iter().enumerate() {
        let w = 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64).cos();
        buf[i].re = (v - mean) * w;
    }
    FftPlanner::new().plan_fft_forward(len).process(&mut buf);

    let half = len / 2;
    let mag: Vec<f64> = buf[..=half].iter().map(|c| c.norm()).collect();
    let peak = (1..=half)
        .max_by(|&a, &b| mag[a].total_cmp(&mag[b]))
        .unwrap_or(0);
    let mut offset = 0.0;
    if peak > 0 && peak < half {
        let (a, b, c) = (mag[peak - 1], mag[peak], mag[peak + 1]);
        if a > 0.0 && b > 0.0 && c > 0.0 {
            let (la, lb, lc) = (a.ln(), b.ln(), c.ln());
            let denom = la - 2.0 * lb + lc;
            if denom != 0.0 {
                offset = 0.5 * (la - lc) / denom;
            }
        }
    }
    let f = (peak as f64 + offset) / len as f64;
    Ok(FrequencyEstimate {
        frequency: fold(f),
        degenerate: false,
    })
}

fn fold(f: f64) -> f64 {
    let f = f.rem_euclid(1.0);
    if f > 0.5 {
        1.0 - f
    } else {
        f
    }
}

/// Horizontal and vertical tunes from the `x` and `y` turn series.
pub fn estimate_tunes(x: &[f64], y: &[f64]) -> Result<Tunes> {
    let fx = estimate_frequency(x)?;
    let fy = estimate_frequency(y)?;
    Ok(Tunes {
        qx: fx.frequency,
        qy: fy.frequency,
        degenerate_x: fx.degenerate,
        degenerate_y: fy.degenerate,
    })
}
