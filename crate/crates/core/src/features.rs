//! Amplitude, phase and Doppler feature domains.
//!
//! Each CSI frame becomes a `[544][3][7]` block. Channels 0–3 describe the
//! amplitude (instantaneous value plus trailing-window dispersion), 4–5 the
//! sanitized phase and its inter-RRU differential, and 6 the Doppler shift
//! estimated from the phase change between adjacent frames.

use std::f64::consts::PI;

use crate::csi::{
    amplitude, channel, raw_phase, CsiFrame, FeatureTensor, FEATURE_ROW_LEN, N_FEATURES, N_RRUS,
    N_SUBCARRIERS,
};
use crate::error::{Error, Result};

const TWO_PI: f64 = 2.0 * PI;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowConfig {
    pub window_len: usize,
    pub epsilon: f64,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            window_len: 25,
            epsilon: 1e-9,
        }
    }
}

impl WindowConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_len < 2 {
            return Err(Error::invalid(format!(
                "window length must be at least 2, got {}",
                self.window_len
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::invalid("window epsilon must be a positive real"));
        }
        Ok(())
    }
}

/// Which slice of the feature channels a model encoder consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Domain {
    Amplitude,
    Phase,
    Doppler,
}

impl Domain {
    pub const ALL: [Domain; 3] = [Domain::Amplitude, Domain::Phase, Domain::Doppler];

    pub fn channels(self) -> &'static [usize] {
        match self {
            Domain::Amplitude => &[
                channel::AMPLITUDE,
                channel::NORM_STD,
                channel::MAD,
                channel::IQR,
            ],
            Domain::Phase => &[channel::PHASE, channel::PHASE_DIFF],
            Domain::Doppler => &[channel::DOPPLER],
        }
    }

    /// Flattened encoder input length for a given subcarrier × rru grid.
    pub fn input_dim(self, cells: usize) -> usize {
        self.channels().len() * cells
    }

    pub fn name(self) -> &'static str {
        match self {
            Domain::Amplitude => "amp",
            Domain::Phase => "phase",
            Domain::Doppler => "dop",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowStats {
    pub nstd: f64,
    pub mad: f64,
    pub iqr: f64,
}

/// Normalized standard deviation, median absolute deviation and
/// interquartile range of a window.
pub fn window_stats(series: &[f64], epsilon: f64) -> Result<WindowStats> {
    if series.len() < 2 {
        return Err(Error::invalid(format!(
            "window_stats needs at least 2 samples, got {}",
            series.len()
        )));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("window_stats input must be finite"));
    }
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let var = series.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let nstd = var.sqrt() / (mean.abs() + epsilon);

    let mut sorted = series.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = quantile_sorted(&sorted, 0.5);
    let mut dev: Vec<f64> = sorted.iter().map(|x| (x - median).abs()).collect();
    dev.sort_by(f64::total_cmp);
    let mad = quantile_sorted(&dev, 0.5);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    Ok(WindowStats { nstd, mad, iqr })
}

/// Linear interpolation between order statistics.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

/// Principal value in `(-π, π]`.
pub fn wrap_phase(x: f64) -> f64 {
    x + TWO_PI * ((PI - x) / TWO_PI).floor()
}

/// Removes 2π jumps so that consecutive differences lie in `(-π, π]`.
///
/// Each output equals its input plus an integer multiple of 2π.
pub fn unwrap(phase: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(phase.len());
    let mut turns = 0.0;
    for (i, &x) in phase.iter().enumerate() {
        if i > 0 {
            let d = x - phase[i - 1];
            turns += ((PI - d) / TWO_PI).floor();
        }
        out.push(x + TWO_PI * turns);
    }
    out
}

/// Least-squares line `phi ≈ slope·k + intercept` over `k = 0..n`.
pub fn linear_fit(phi: &[f64]) -> Result<(f64, f64)> {
    if phi.len() < 2 {
        return Err(Error::invalid(format!(
            "linear fit needs at least 2 samples, got {}",
            phi.len()
        )));
    }
    let n = phi.len() as f64;
    let k_mean = (n - 1.0) / 2.0;
    let p_mean = phi.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (k, &p) in phi.iter().enumerate() {
        let dk = k as f64 - k_mean;
        sxy += dk * (p - p_mean);
        sxx += dk * dk;
    }
    let slope = sxy / sxx;
    Ok((slope, p_mean - slope * k_mean))
}

/// Residual after removing the least-squares line over the index axis.
pub fn linear_detrend(phi: &[f64]) -> Result<Vec<f64>> {
    let (slope, intercept) = linear_fit(phi)?;
    Ok(phi
        .iter()
        .enumerate()
        .map(|(k, &p)| p - (slope * k as f64 + intercept))
        .collect())
}

pub fn phase_differential(phi_a: f64, phi_b: f64) -> f64 {
    wrap_phase(phi_a - phi_b)
}

/// Doppler shift in Hz from the phase change over `dt` seconds.
pub fn doppler(phi_prev: f64, phi_cur: f64, dt: f64) -> Result<f64> {
    if !(dt > 0.0) {
        return Err(Error::invalid(format!("doppler needs dt > 0, got {dt}")));
    }
    Ok(wrap_phase(phi_cur - phi_prev) / (TWO_PI * dt))
}

/// Unwrapped and detrended phase along the subcarrier axis, laid out
/// `[subcarrier][rru]`.
pub fn sanitized_phase(raw: &[f64]) -> Result<Vec<f64>> {
    let mut out = vec![0.0; N_SUBCARRIERS * N_RRUS];
    let mut series = vec![0.0; N_SUBCARRIERS];
    for r in 0..N_RRUS {
        for (k, s) in series.iter_mut().enumerate() {
            *s = raw[k * N_RRUS + r];
        }
        let clean = linear_detrend(&unwrap(&series))?;
        for (k, v) in clean.into_iter().enumerate() {
            out[k * N_RRUS + r] = v;
        }
    }
    Ok(out)
}

pub fn extract_features(frames: &[CsiFrame], cfg: &WindowConfig) -> Result<FeatureTensor> {
    cfg.validate()?;
    let n = frames.len();
    if n < 2 {
        return Err(Error::invalid(format!(
            "feature extraction needs at least 2 frames, got {n}"
        )));
    }
    let cells = N_SUBCARRIERS * N_RRUS;
    let amps: Vec<Vec<f64>> = frames.iter().map(amplitude).collect();
    let raws: Vec<Vec<f64>> = frames.iter().map(raw_phase).collect::<Result<_>>()?;

    let mut data = vec![0.0; n * FEATURE_ROW_LEN];
    let mut window = Vec::with_capacity(cfg.window_len);
    for i in 0..n {
        let row = &mut data[i * FEATURE_ROW_LEN..(i + 1) * FEATURE_ROW_LEN];
        let clean = sanitized_phase(&raws[i])?;
        // Frame 0 borrows frame 1's two-sample window.
        let end = i.max(1);
        let start = (end + 1).saturating_sub(cfg.window_len);
        let dt = if i > 0 {
            frames[i].timestamp() - frames[i - 1].timestamp()
        } else {
            0.0
        };

        for cell in 0..cells {
            let r = cell % N_RRUS;
            let out = &mut row[cell * N_FEATURES..(cell + 1) * N_FEATURES];
            out[channel::AMPLITUDE] = amps[i][cell];

            window.clear();
            window.extend((start..=end).map(|j| amps[j][cell]));
            let stats = window_stats(&window, cfg.epsilon)?;
            out[channel::NORM_STD] = stats.nstd;
            out[channel::MAD] = stats.mad;
            out[channel::IQR] = stats.iqr;

            out[channel::PHASE] = clean[cell];
            let partner = cell - r + (r + 1) % N_RRUS;
            out[channel::PHASE_DIFF] = phase_differential(clean[cell], clean[partner]);

            out[channel::DOPPLER] = if i == 0 {
                0.0
            } else {
                doppler(raws[i - 1][cell], raws[i][cell], dt)?
            };
        }
    }
    FeatureTensor::new(n, data)
}
