//! Binned, single-channel time series.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceKind {
    /// Detected rate density (ns⁻¹ per unit excitation) or a derived ratio.
    Intensity,
    /// Integer photon counts per bin.
    Counts,
}

/// One analyzer channel on a uniform bin grid.
///
/// `valid[i] == false` marks a bin with no defined value (e.g. a ratio with
/// zero denominator); its entry in `values` is meaningless.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeTrace {
    pub channel: String,
    pub bin_edges: Vec<f64>,
    pub values: Vec<f64>,
    pub valid: Vec<bool>,
    pub kind: TraceKind,
}

impl TimeTrace {
    /// Build from samples taken at uniformly spaced bin centres.
    pub fn from_centers(
        channel: impl Into<String>,
        centers: &[f64],
        values: Vec<f64>,
        bin_width: f64,
    ) -> Result<Self> {
        if centers.len() != values.len() {
            return Err(Error::BinMismatch(format!(
                "{} centres but {} values",
                centers.len(),
                values.len()
            )));
        }
        if !(bin_width > 0.0) {
            return Err(Error::invalid("bin_width", "must be > 0"));
        }
        for w in centers.windows(2) {
            if ((w[1] - w[0]) - bin_width).abs() > 1e-9 * bin_width.max(1.0) {
                return Err(Error::BinMismatch(format!(
                    "non-uniform sample spacing {} vs bin width {bin_width}",
                    w[1] - w[0]
                )));
            }
        }
        let mut bin_edges: Vec<f64> = centers.iter().map(|c| c - 0.5 * bin_width).collect();
        if let Some(last) = centers.last() {
            bin_edges.push(last + 0.5 * bin_width);
        }
        let n = values.len();
        Ok(Self {
            channel: channel.into(),
            bin_edges,
            values,
            valid: vec![true; n],
            kind: TraceKind::Intensity,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn bin_width(&self) -> f64 {
        if self.bin_edges.len() < 2 {
            0.0
        } else {
            self.bin_edges[1] - self.bin_edges[0]
        }
    }

    pub fn centers(&self) -> Vec<f64> {
        self.bin_edges
            .windows(2)
            .map(|w| 0.5 * (w[0] + w[1]))
            .collect()
    }

    pub fn get(&self, i: usize) -> Option<f64> {
        self.valid[i].then(|| self.values[i])
    }

    /// `(centre, value)` for valid bins.
    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.bin_edges
            .windows(2)
            .zip(self.values.iter().zip(&self.valid))
            .filter(|(_, (_, ok))| **ok)
            .map(|(w, (v, _))| (0.5 * (w[0] + w[1]), *v))
    }

    /// Bins whose centre lies in `[t_min, t_max]`.
    pub fn window(&self, t_min: f64, t_max: f64) -> Self {
        let centers = self.centers();
        let idx: Vec<usize> = (0..self.len())
            .filter(|&i| centers[i] >= t_min && centers[i] <= t_max)
            .collect();
        let (Some(&first), Some(&last)) = (idx.first(), idx.last()) else {
            return Self {
                channel: self.channel.clone(),
                bin_edges: Vec::new(),
                values: Vec::new(),
                valid: Vec::new(),
                kind: self.kind,
            };
        };
        Self {
            channel: self.channel.clone(),
            bin_edges: self.bin_edges[first..=last + 1].to_vec(),
            values: self.values[first..=last].to_vec(),
            valid: self.valid[first..=last].to_vec(),
            kind: self.kind,
        }
    }

    /// Sum of valid bin values times the bin width.
    pub fn integral(&self) -> f64 {
        self.points().map(|(_, v)| v).sum::<f64>() * self.bin_width()
    }

    pub fn same_bins(&self, other: &Self) -> bool {
        self.bin_edges.len() == other.bin_edges.len()
            && self
                .bin_edges
                .iter()
                .zip(&other.bin_edges)
                .all(|(a, b)| (a - b).abs() <= 1e-12 * a.abs().max(1.0))
    }

    pub fn renamed(mut self, channel: impl Into<String>) -> Self {
        self.channel = channel.into();
        self
    }
}
