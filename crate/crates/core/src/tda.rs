//! Direct time-domain averaging and the metrics used to compare averages.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{check_dim, Error, Result};
use crate::synth::RecordSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TdaSource {
    DirectAverage,
    Model1Estimate,
    Model2Estimate,
}

/// One averaged revolution waveform.
#[derive(Debug, Clone, PartialEq)]
pub struct TdaSignal {
    samples: Vec<f64>,
    source: TdaSource,
}

impl TdaSignal {
    pub fn new(samples: Vec<f64>, source: TdaSource) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::validation("samples", "signal is empty"));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::validation("samples", "signal has non-finite values"));
        }
        Ok(Self { samples, source })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn points_per_rev(&self) -> usize {
        self.samples.len()
    }

    pub fn source(&self) -> TdaSource {
        self.source
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }
}

/// Accuracy of an estimated average against the direct one.
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    /// 100 * sum|e(k)| / sum|desired(k)|; lower is better.
    pub eta_sim_percent: f64,
    pub n_points: usize,
    pub per_sample_error: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticMetrics {
    pub kurtosis: f64,
    pub peak: f64,
}

impl DiagnosticMetrics {
    pub fn of(signal: &TdaSignal) -> Result<Self> {
        Ok(Self {
            kurtosis: kurtosis(signal)?,
            peak: peak_value(signal)?,
        })
    }
}

/// Mean of the first `use_first_n` revolutions at each angular position.
pub fn direct_tda(rs: &RecordSet, use_first_n: usize) -> Result<TdaSignal> {
    if use_first_n == 0 || use_first_n > rs.frame_count() {
        return Err(Error::validation(
            "use_first_n",
            format!("{use_first_n} is outside 1..={}", rs.frame_count()),
        ));
    }
    average_frames(
        rs.frames()[..use_first_n].iter().map(|f| &f[..]),
        rs.points_per_rev(),
    )
    .and_then(|s| TdaSignal::new(s, TdaSource::DirectAverage))
}

/// Elementwise mean of equally long frames.
pub fn average_frames<'a>(
    frames: impl IntoIterator<Item = &'a [f64]>,
    points_per_rev: usize,
) -> Result<Vec<f64>> {
    let mut acc = vec![0.0; points_per_rev];
    let mut count = 0usize;
    for f in frames {
        check_dim("frame length", points_per_rev, f.len())?;
        for (a, s) in acc.iter_mut().zip(f) {
            *a += s;
        }
        count += 1;
    }
    if count == 0 {
        return Err(Error::validation("frames", "nothing to average"));
    }
    let inv = count as f64;
    acc.iter_mut().for_each(|a| *a /= inv);
    Ok(acc)
}

/// e(k) = desired(k) - achieved(k).
pub fn fit_error(desired: &TdaSignal, achieved: &TdaSignal) -> Result<Vec<f64>> {
    check_dim(
        "fit_error",
        desired.points_per_rev(),
        achieved.points_per_rev(),
    )?;
    Ok(desired
        .samples
        .iter()
        .zip(&achieved.samples)
        .map(|(d, a)| d - a)
        .collect())
}

pub fn eta_sim(desired: &TdaSignal, achieved: &TdaSignal) -> Result<FitReport> {
    let err = fit_error(desired, achieved)?;
    let denom: f64 = desired.samples.iter().map(|d| d.abs()).sum();
    if denom == 0.0 {
        return Err(Error::UndefinedMetric(
            "eta_sim of an all-zero desired signal",
        ));
    }
    let num: f64 = err.iter().map(|e| e.abs()).sum();
    Ok(FitReport {
        eta_sim_percent: 100.0 * num / denom,
        n_points: err.len(),
        per_sample_error: err,
    })
}

/// Raw standardized fourth moment m4 / m2^2 with population moments.
pub fn kurtosis(signal: &TdaSignal) -> Result<f64> {
    let x = signal.samples();
    if x.len() < 4 {
        return Err(Error::validation(
            "signal",
            "kurtosis needs at least 4 samples",
        ));
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let (m2, m4) = x.iter().fold((0.0, 0.0), |(m2, m4), v| {
        let d = (v - mean) * (v - mean);
        (m2 + d, m4 + d * d)
    });
    let (m2, m4) = (m2 / n, m4 / n);
    if m2 == 0.0 {
        return Err(Error::UndefinedMetric("kurtosis of a zero-variance signal"));
    }
    Ok(m4 / (m2 * m2))
}

/// Largest absolute sample.
pub fn peak_value(signal: &TdaSignal) -> Result<f64> {
    Ok(signal.samples().iter().fold(0.0_f64, |m, v| m.max(v.abs())))
}

/// One-sided DFT magnitudes for bins `0..=N/2`, scaled by `1/N`.
///
/// Bin `k` corresponds to shaft order `k` because each signal spans one
/// revolution.
pub fn magnitude_spectrum(signal: &TdaSignal) -> Result<Vec<f64>> {
    let n = signal.points_per_rev();
    if n < 2 {
        return Err(Error::validation(
            "signal",
            "spectrum needs at least 2 samples",
        ));
    }
    let mut buf: Vec<Complex<f64>> = signal
        .samples()
        .iter()
        .map(|&s| Complex::new(s, 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    Ok(buf[..=n / 2].iter().map(|c| c.norm() * scale).collect())
}
