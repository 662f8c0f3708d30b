use serde::{Deserialize, Serialize};

/// Uniformly sampled scalar signal starting at t = 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub dt: f64,
    pub values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(dt: f64, values: Vec<f64>) -> Self {
        Self { dt, values }
    }

    pub fn zeros(dt: f64, len: usize) -> Self {
        Self::new(dt, vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.time(i)).collect()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::new(self.dt, self.values.iter().copied().map(f).collect())
    }

    /// Linear interpolation at time `t`, clamped to the end samples.
    pub fn interpolate(&self, t: f64) -> f64 {
        let n = self.len();
        if n == 0 {
            return 0.0;
        }
        let s = t / self.dt;
        if s <= 0.0 {
            return self.values[0];
        }
        let i = s.floor() as usize;
        if i + 1 >= n {
            return self.values[n - 1];
        }
        let w = s - i as f64;
        self.values[i] * (1.0 - w) + self.values[i + 1] * w
    }

    pub fn max_abs_diff(&self, other: &TimeSeries) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}
