//! Log-spaced radial grids and sampled radial functions.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default smallest radius of a profile grid.
pub const DEFAULT_R_MIN: f64 = 1e-4;
/// Default node count of a profile grid.
pub const DEFAULT_NODES: usize = 2048;

/// Strictly increasing radii in `(0, 1]` with one finite value per node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    radii: Vec<f64>,
    values: Vec<f64>,
}

/// `count` log-spaced radii from `r_min` to `r_max` inclusive.
pub fn log_spaced(r_min: f64, r_max: f64, count: usize) -> Result<Vec<f64>> {
    if !(r_min > 0.0 && r_min < r_max && r_max.is_finite()) {
        return Err(Error::InvalidGrid(format!("need 0 < r_min < r_max, got [{r_min}, {r_max}]")));
    }
    if count < 2 {
        return Err(Error::InvalidGrid("need at least two nodes".into()));
    }
    let (a, b) = (r_min.ln(), r_max.ln());
    let h = (b - a) / (count - 1) as f64;
    let mut radii: Vec<f64> = (0..count).map(|i| (a + h * i as f64).exp()).collect();
    radii[0] = r_min;
    radii[count - 1] = r_max;
    Ok(radii)
}

impl RadialGrid {
    pub fn new(radii: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if radii.len() != values.len() {
            return Err(Error::InvalidGrid(format!("{} radii but {} values", radii.len(), values.len())));
        }
        if radii.is_empty() {
            return Err(Error::InvalidGrid("empty grid".into()));
        }
        if radii[0] <= 0.0 || radii[radii.len() - 1] > 1.0 {
            return Err(Error::InvalidGrid("radii must lie in (0, 1]".into()));
        }
        if radii.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid("radii must be strictly increasing".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid(format!("non-finite value at r = {}", radii[i])));
        }
        Ok(Self { radii, values })
    }

    /// Samples `f` on `count` log-spaced nodes of `[r_min, 1]`.
    pub fn sample<F: Fn(f64) -> f64>(r_min: f64, count: usize, f: F) -> Result<Self> {
        Self::sample_on(log_spaced(r_min, 1.0, count)?, f)
    }

    pub fn sample_on<F: Fn(f64) -> f64>(radii: Vec<f64>, f: F) -> Result<Self> {
        let values = radii.iter().map(|&r| f(r)).collect();
        Self::new(radii, values)
    }

    /// Samples a fallible function; the first error aborts.
    pub fn try_sample_on<F: Fn(f64) -> Result<f64>>(radii: Vec<f64>, f: F) -> Result<Self> {
        let values = radii.iter().map(|&r| f(r)).collect::<Result<Vec<_>>>()?;
        Self::new(radii, values)
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }

    pub fn r_min(&self) -> f64 {
        self.radii[0]
    }

    pub fn r_max(&self) -> f64 {
        self.radii[self.radii.len() - 1]
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.radii.iter().copied().zip(self.values.iter().copied())
    }

    /// Applies `f(r, value)` node-wise.
    pub fn map<F: Fn(f64, f64) -> f64>(&self, f: F) -> Result<Self> {
        let values = self.iter().map(|(r, v)| f(r, v)).collect();
        Self::new(self.radii.clone(), values)
    }

    /// Keeps nodes with `lo <= r <= hi`.
    pub fn restrict(&self, lo: f64, hi: f64) -> Result<Self> {
        let (radii, values): (Vec<f64>, Vec<f64>) = self.iter().filter(|&(r, _)| r >= lo && r <= hi).unzip();
        Self::new(radii, values)
    }

    /// Uniform step in `log r`, if the grid is log-spaced to relative precision `rel`.
    pub fn log_step(&self, rel: f64) -> Option<f64> {
        if self.len() < 2 {
            return None;
        }
        let h = (self.r_max().ln() - self.r_min().ln()) / (self.len() - 1) as f64;
        let uniform = self.radii.windows(2).all(|w| ((w[1].ln() - w[0].ln()) - h).abs() <= rel * h);
        uniform.then_some(h)
    }

    /// Index of the node equal to `r` up to relative precision `1e-9`.
    pub fn node_index(&self, r: f64) -> Option<usize> {
        let i = self.radii.partition_point(|&x| x < r);
        [i.checked_sub(1), Some(i)]
            .into_iter()
            .flatten()
            .filter(|&j| j < self.len())
            .find(|&j| (self.radii[j] - r).abs() <= 1e-9 * r)
    }

    /// Positive values interpolated linearly in `(log r, log value)`; outside the
    /// grid the end segments are extended as power laws.
    pub fn interpolate_positive(&self, r: f64) -> f64 {
        let n = self.len();
        if n == 1 {
            return self.values[0];
        }
        let i = self.radii.partition_point(|&x| x < r).clamp(1, n - 1);
        let (r0, r1) = (self.radii[i - 1], self.radii[i]);
        let (v0, v1) = (self.values[i - 1], self.values[i]);
        let t = (r.ln() - r0.ln()) / (r1.ln() - r0.ln());
        (v0.ln() + t * (v1.ln() - v0.ln())).exp()
    }

    /// Slope of `log value` against `log r` over the first two nodes.
    pub fn inner_log_slope(&self) -> Option<f64> {
        (self.len() >= 2 && self.values[0] > 0.0 && self.values[1] > 0.0)
            .then(|| (self.values[1].ln() - self.values[0].ln()) / (self.radii[1].ln() - self.radii[0].ln()))
    }

    /// Writes `r,value` rows with a header line.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "r,value")?;
        for (r, v) in self.iter() {
            writeln!(out, "{r:.17e},{v:.17e}")?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv output is ascii")
    }

    /// Parses the two-column format written by [`RadialGrid::write_csv`].
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut radii = Vec::new();
        let mut values = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (lineno == 0 && line.starts_with('r')) {
                continue;
            }
            let mut cols = line.split(',');
            let parse = |c: Option<&str>| -> Result<f64> {
                c.ok_or_else(|| Error::Parse(format!("line {}: missing column", lineno + 1)))?
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("line {}: bad number", lineno + 1)))
            };
            radii.push(parse(cols.next())?);
            values.push(parse(cols.next())?);
        }
        Self::new(radii, values)
    }
}
