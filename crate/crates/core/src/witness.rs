//! Witness quantities computed from a [`ProbabilityTable`].
//!
//! Tables are 0-indexed. The determinant witness uses preparations 0..4 and
//! measurements 0..2: `W[k][l] = p(d | 2k, l) − p(d | 2k+1, l)`. The dimension
//! witness uses preparations 0..3:
//!
//! ```text
//! I_DW = ⟨D_00⟩ + ⟨D_01⟩ + ⟨D_10⟩ − ⟨D_11⟩ − ⟨D_20⟩,   ⟨D_ij⟩ = p(e|i,j) − p(d|i,j)
//! ```

use std::io;

use serde::{Deserialize, Serialize};

use crate::scenario::ProbabilityTable;
use crate::{Error, Result};

pub type Matrix2 = [[f64; 2]; 2];

/// Classical bound on `|det W|` for two-dimensional messages.
pub const DET_CLASSICAL_BOUND: f64 = 0.0;

/// Classical bound on `I_DW` for two-dimensional messages.
pub const IDW_CLASSICAL_BOUND: f64 = 3.0;

/// `(i, j, sign)` for each term of `I_DW`.
pub const IDW_TERMS: [(usize, usize, f64); 5] = [
    (0, 0, 1.0),
    (0, 1, 1.0),
    (1, 0, 1.0),
    (1, 1, -1.0),
    (2, 0, -1.0),
];

pub fn witness_matrix(t: &ProbabilityTable) -> Result<Matrix2> {
    t.require_shape(4, 2)?;
    let mut w = [[0.0; 2]; 2];
    for (k, row) in w.iter_mut().enumerate() {
        for (l, entry) in row.iter_mut().enumerate() {
            *entry = t.get(2 * k, l)?.p_d - t.get(2 * k + 1, l)?.p_d;
        }
    }
    Ok(w)
}

pub fn det2(m: &Matrix2) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

/// `|det W|`
pub fn det_abs(t: &ProbabilityTable) -> Result<f64> {
    witness_matrix(t).map(|w| det2(&w).abs())
}

pub fn dimension_witness(t: &ProbabilityTable) -> Result<f64> {
    t.require_shape(3, 2)?;
    IDW_TERMS
        .iter()
        .map(|&(i, j, s)| t.get(i, j).map(|c| s * c.correlator()))
        .sum()
}

/// `R = max((I_DW − 3)/4, 0)`
pub fn retrocausality(i_dw: f64) -> f64 {
    ((i_dw - IDW_CLASSICAL_BOUND) / 4.0).max(0.0)
}

/// How many standard errors `value` sits above `bound`, floored at zero.
pub fn sigma_violation(value: f64, std_err: f64, bound: f64) -> Result<f64> {
    if std_err.is_nan() || std_err <= 0.0 {
        return Err(Error::Domain(format!(
            "standard error must be positive, got {std_err}"
        )));
    }
    Ok(((value - bound) / std_err).max(0.0))
}

/// Bootstrap summary attached to a report built from counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Uncertainties {
    pub resamples: usize,
    pub det_abs_mean: Option<f64>,
    pub det_abs_se: Option<f64>,
    pub i_dw_mean: Option<f64>,
    pub i_dw_se: Option<f64>,
    pub r_se: Option<f64>,
}

/// Witness values for one table. A quantity is `None` when the table is too
/// small for it, or (for the σ fields) when no uncertainty is available.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessReport {
    pub det_abs: Option<f64>,
    pub i_dw: Option<f64>,
    pub r: Option<f64>,
    pub sigma_det: Option<f64>,
    pub sigma_idw: Option<f64>,
    pub uncertainties: Option<Uncertainties>,
}

#[derive(Serialize)]
struct ReportRow {
    det_abs: Option<f64>,
    det_abs_se: Option<f64>,
    sigma_det: Option<f64>,
    i_dw: Option<f64>,
    i_dw_se: Option<f64>,
    sigma_idw: Option<f64>,
    r: Option<f64>,
    r_se: Option<f64>,
    resamples: Option<usize>,
}

impl WitnessReport {
    /// Point values with no error bars.
    pub fn analytic(t: &ProbabilityTable) -> Self {
        let det_abs = det_abs(t).ok();
        let i_dw = dimension_witness(t).ok();
        WitnessReport {
            det_abs,
            i_dw,
            r: i_dw.map(retrocausality),
            sigma_det: None,
            sigma_idw: None,
            uncertainties: None,
        }
    }

    /// Attaches standard errors and derives the σ-violation figures.
    pub fn with_uncertainties(mut self, u: Uncertainties) -> Self {
        let sigma = |v: Option<f64>, se: Option<f64>, bound| match (v, se) {
            (Some(v), Some(se)) => sigma_violation(v, se, bound).ok(),
            _ => None,
        };
        self.sigma_det = sigma(self.det_abs, u.det_abs_se, DET_CLASSICAL_BOUND);
        self.sigma_idw = sigma(self.i_dw, u.i_dw_se, IDW_CLASSICAL_BOUND);
        self.uncertainties = Some(u);
        self
    }

    /// Writes the report as a one-row CSV with a header; empty fields are `None`.
    pub fn write_csv<W: io::Write>(&self, writer: W) -> Result<()> {
        let u = self.uncertainties.as_ref();
        let mut w = csv::Writer::from_writer(writer);
        w.serialize(ReportRow {
            det_abs: self.det_abs,
            det_abs_se: u.and_then(|u| u.det_abs_se),
            sigma_det: self.sigma_det,
            i_dw: self.i_dw,
            i_dw_se: u.and_then(|u| u.i_dw_se),
            sigma_idw: self.sigma_idw,
            r: self.r,
            r_se: u.and_then(|u| u.r_se),
            resamples: u.map(|u| u.resamples),
        })?;
        w.flush()?;
        Ok(())
    }
}
