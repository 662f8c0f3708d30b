//! Orthonormal Daubechies-2 fast wavelet transform.
//!
//! Signals are extended by half-sample mirroring to a multiple of `2^depth`
//! and then transformed with periodic (circular) convolution on the padded
//! buffer, which keeps the transform exactly orthonormal there.

use crate::error::{Error, Result};
use crate::series::TimeSeries;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq)]
pub struct WaveletFilter {
    pub lowpass: Vec<f64>,
    pub highpass: Vec<f64>,
}

impl WaveletFilter {
    /// Builds the quadrature-mirror pair from a lowpass filter:
    /// `g_k = (-1)^k d_{L-1-k}`.
    pub fn from_lowpass(lowpass: Vec<f64>) -> Self {
        let len = lowpass.len();
        let highpass = (0..len)
            .map(|k| {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                sign * lowpass[len - 1 - k]
            })
            .collect();
        Self { lowpass, highpass }
    }

    pub fn len(&self) -> usize {
        self.lowpass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lowpass.is_empty()
    }
}

/// The 4-tap Daubechies filter with two vanishing moments.
pub fn build_db2_filter() -> WaveletFilter {
    let s3 = 3f64.sqrt();
    let norm = 4.0 * 2f64.sqrt();
    WaveletFilter::from_lowpass(vec![
        (1.0 + s3) / norm,
        (3.0 + s3) / norm,
        (3.0 - s3) / norm,
        (1.0 - s3) / norm,
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PadMode {
    /// Length was already a multiple of `2^depth`.
    None,
    /// Half-sample mirror extension at the right end.
    Symmetric,
}

/// Coarse approximation plus detail bands, ordered coarsest first.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalePyramid {
    pub base: Vec<f64>,
    pub details: Vec<Vec<f64>>,
    pub original_length: usize,
    pub pad_mode: PadMode,
    pub dt: f64,
}

impl ScalePyramid {
    pub fn depth(&self) -> usize {
        self.details.len()
    }

    pub fn padded_length(&self) -> usize {
        self.base.len() << self.depth()
    }

    /// Multiplies every coefficient by `alpha`.
    pub fn scaled(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        out.base.iter_mut().for_each(|c| *c *= alpha);
        for band in &mut out.details {
            band.iter_mut().for_each(|c| *c *= alpha);
        }
        out
    }

    /// Same structure with every coefficient set to zero.
    pub fn zeroed(&self) -> Self {
        self.scaled(0.0)
    }

    pub fn energy(&self) -> f64 {
        let base: f64 = self.base.iter().map(|c| c * c).sum();
        let details: f64 = self.details.iter().flatten().map(|c| c * c).sum();
        base + details
    }

    fn validate(&self) -> Result<()> {
        if self.base.is_empty() {
            return Err(Error::InvalidBands("empty approximation band".into()));
        }
        let mut expected = self.base.len();
        for (i, band) in self.details.iter().enumerate() {
            if band.len() != expected {
                return Err(Error::InvalidBands(format!(
                    "detail band {i} has {} coefficients, expected {expected}",
                    band.len()
                )));
            }
            expected *= 2;
        }
        if self.padded_length() < self.original_length {
            return Err(Error::InvalidBands(format!(
                "padded length {} shorter than original length {}",
                self.padded_length(),
                self.original_length
            )));
        }
        Ok(())
    }
}

fn analysis_step(signal: &[f64], filter: &WaveletFilter) -> (Vec<f64>, Vec<f64>) {
    let n = signal.len();
    let half = n / 2;
    let mut approx = vec![0.0; half];
    let mut detail = vec![0.0; half];
    for k in 0..half {
        let mut a = 0.0;
        let mut d = 0.0;
        for (i, (lo, hi)) in filter.lowpass.iter().zip(&filter.highpass).enumerate() {
            let x = signal[(2 * k + i) % n];
            a += lo * x;
            d += hi * x;
        }
        approx[k] = a;
        detail[k] = d;
    }
    (approx, detail)
}

fn synthesis_step(approx: &[f64], detail: &[f64], filter: &WaveletFilter) -> Vec<f64> {
    let n = approx.len() * 2;
    let mut out = vec![0.0; n];
    for k in 0..approx.len() {
        for (i, (lo, hi)) in filter.lowpass.iter().zip(&filter.highpass).enumerate() {
            out[(2 * k + i) % n] += lo * approx[k] + hi * detail[k];
        }
    }
    out
}

fn symmetric_pad(values: &[f64], target: usize) -> Vec<f64> {
    let n = values.len();
    let mut out = Vec::with_capacity(target);
    out.extend_from_slice(values);
    for i in 0..target - n {
        out.push(values[n - 1 - (i % n)]);
    }
    out
}

fn check_depth(len: usize, depth: usize) -> Result<()> {
    let needed = 1usize << depth;
    if len < needed || len == 0 {
        return Err(Error::InsufficientSamples { depth, needed, got: len });
    }
    Ok(())
}

pub fn decompose(signal: &TimeSeries, depth: usize, filter: &WaveletFilter) -> Result<ScalePyramid> {
    if depth == 0 {
        return Err(Error::InvalidParameter("decomposition depth must be >= 1".into()));
    }
    check_depth(signal.len(), depth)?;
    let block = 1usize << depth;
    let n = signal.len();
    let padded_len = n.div_ceil(block) * block;
    let (mut current, pad_mode) = if padded_len == n {
        (signal.values.clone(), PadMode::None)
    } else {
        (symmetric_pad(&signal.values, padded_len), PadMode::Symmetric)
    };

    let mut details = Vec::with_capacity(depth);
    for _ in 0..depth {
        let (approx, detail) = analysis_step(&current, filter);
        details.push(detail);
        current = approx;
    }
    details.reverse();
    Ok(ScalePyramid {
        base: current,
        details,
        original_length: n,
        pad_mode,
        dt: signal.dt,
    })
}

pub fn reconstruct(pyramid: &ScalePyramid, filter: &WaveletFilter) -> Result<TimeSeries> {
    pyramid.validate()?;
    let mut current = pyramid.base.clone();
    for band in &pyramid.details {
        current = synthesis_step(&current, band, filter);
    }
    current.truncate(pyramid.original_length);
    Ok(TimeSeries::new(pyramid.dt, current))
}

/// Scale `[-j]` representation on the original sampling grid: the finest
/// `j` detail bands are removed. `j = 0` returns the input unchanged.
pub fn project_to_scale(signal: &TimeSeries, j: usize, filter: &WaveletFilter) -> Result<TimeSeries> {
    if j == 0 {
        check_depth(signal.len(), 0)?;
        return Ok(signal.clone());
    }
    let mut pyramid = decompose(signal, j, filter)?;
    for band in &mut pyramid.details {
        band.iter_mut().for_each(|c| *c = 0.0);
    }
    reconstruct(&pyramid, filter)
}

/// Reconstruction of a single detail band (index into `pyramid.details`,
/// coarsest first) with every other coefficient zeroed.
pub fn detail_component(pyramid: &ScalePyramid, band: usize, filter: &WaveletFilter) -> Result<TimeSeries> {
    if band >= pyramid.details.len() {
        return Err(Error::InvalidBands(format!("no detail band {band}")));
    }
    let mut isolated = pyramid.zeroed();
    isolated.details[band].clone_from(&pyramid.details[band]);
    reconstruct(&isolated, filter)
}
