//! Finite-count runs: sampling, frequency estimation and bootstrap errors.
//!
//! Every random draw comes from a ChaCha8 generator seeded with the run seed
//! and switched to a dedicated stream:
//!
//! * stream `SAMPLE_STREAM_BASE + k` draws the outcomes of cell `k`
//!   (row-major), and stream `SAMPLE_STREAM_BASE − 1` allocates trials to
//!   cells when settings are drawn per trial;
//! * stream `r` draws bootstrap resample `r`.
//!
//! Cells and resamples can therefore run in parallel and in any order without
//! changing the result.

use std::io;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::scenario::{CellProbs, ProbabilityTable};
use crate::witness::{det_abs, dimension_witness, retrocausality, Uncertainties, WitnessReport};
use crate::{Error, Result};

pub const SAMPLE_STREAM_BASE: u64 = 1 << 32;
pub const DEFAULT_RESAMPLES: usize = 10_000;
pub const MIN_RESAMPLES: usize = 100;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountCell {
    pub n_e: u64,
    pub n_d: u64,
    pub n_none: u64,
}

impl CountCell {
    pub fn n_trials(&self) -> u64 {
        self.n_e + self.n_d + self.n_none
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountTable {
    n_prep: usize,
    n_meas: usize,
    cells: Vec<CountCell>,
}

#[derive(Serialize, Deserialize)]
struct CountRow {
    i: usize,
    j: usize,
    n_e: u64,
    n_d: u64,
    n_none: u64,
}

impl CountTable {
    pub fn new(n_prep: usize, n_meas: usize, cells: Vec<CountCell>) -> Result<Self> {
        if n_prep == 0 || n_meas == 0 || cells.len() != n_prep * n_meas {
            return Err(Error::Domain(format!(
                "{} count cells do not form a non-empty {n_prep}x{n_meas} table",
                cells.len()
            )));
        }
        Ok(CountTable {
            n_prep,
            n_meas,
            cells,
        })
    }

    pub fn n_prep(&self) -> usize {
        self.n_prep
    }

    pub fn n_meas(&self) -> usize {
        self.n_meas
    }

    pub fn cells(&self) -> &[CountCell] {
        &self.cells
    }

    pub fn get(&self, i: usize, j: usize) -> Option<&CountCell> {
        (i < self.n_prep && j < self.n_meas).then(|| &self.cells[i * self.n_meas + j])
    }

    pub fn write_csv<W: io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for (k, c) in self.cells.iter().enumerate() {
            w.serialize(CountRow {
                i: k / self.n_meas,
                j: k % self.n_meas,
                n_e: c.n_e,
                n_d: c.n_d,
                n_none: c.n_none,
            })?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads `i,j,n_e,n_d,n_none` rows. Every `(i, j)` of the implied
    /// rectangle must appear exactly once; row order is free.
    pub fn read_csv<R: io::Read>(reader: R) -> Result<Self> {
        let rows = csv::Reader::from_reader(reader)
            .deserialize()
            .collect::<std::result::Result<Vec<CountRow>, _>>()?;
        let n_prep = rows.iter().map(|r| r.i + 1).max().unwrap_or(0);
        let n_meas = rows.iter().map(|r| r.j + 1).max().unwrap_or(0);
        if rows.len() != n_prep * n_meas {
            return Err(Error::Domain(format!(
                "{} rows cannot cover a {n_prep}x{n_meas} count table",
                rows.len()
            )));
        }
        let mut cells = vec![None; rows.len()];
        for r in rows {
            let slot = &mut cells[r.i * n_meas + r.j];
            if slot.is_some() {
                return Err(Error::Domain(format!(
                    "duplicate row for cell ({}, {})",
                    r.i, r.j
                )));
            }
            *slot = Some(CountCell {
                n_e: r.n_e,
                n_d: r.n_d,
                n_none: r.n_none,
            });
        }
        CountTable::new(
            n_prep,
            n_meas,
            cells.into_iter().map(Option::unwrap).collect(),
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SettingOrder {
    /// Every setting pair gets exactly `trials_per_setting` trials.
    #[default]
    RoundRobin,
    /// Settings are drawn uniformly per trial; only the total is fixed.
    RandomPerTrial,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPlan")]
pub struct RunPlan {
    pub trials_per_setting: u64,
    pub seed: u64,
    #[serde(default)]
    pub setting_order: SettingOrder,
}

#[derive(Deserialize)]
struct RawPlan {
    trials_per_setting: u64,
    seed: u64,
    #[serde(default)]
    setting_order: SettingOrder,
}

impl TryFrom<RawPlan> for RunPlan {
    type Error = Error;

    fn try_from(p: RawPlan) -> Result<Self> {
        RunPlan::new(p.trials_per_setting, p.seed, p.setting_order)
    }
}

impl RunPlan {
    pub fn new(trials_per_setting: u64, seed: u64, setting_order: SettingOrder) -> Result<Self> {
        if trials_per_setting == 0 {
            return Err(Error::Domain(
                "trials_per_setting must be at least 1".into(),
            ));
        }
        Ok(RunPlan {
            trials_per_setting,
            seed,
            setting_order,
        })
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn binomial(rng: &mut ChaCha8Rng, n: u64, p: f64) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    Binomial::new(n, p)
        .expect("p checked to lie in (0, 1)")
        .sample(rng)
}

/// Splits `n` trials over outcomes `(e, d, none)` by sequential binomials.
fn multinomial3(rng: &mut ChaCha8Rng, n: u64, p: &CellProbs) -> CountCell {
    let n_e = binomial(rng, n, p.p_e);
    let rest = 1.0 - p.p_e;
    let n_d = if rest > 0.0 {
        binomial(rng, n - n_e, p.p_d / rest)
    } else {
        0
    };
    CountCell {
        n_e,
        n_d,
        n_none: n - n_e - n_d,
    }
}

/// Draws a finite run from `t`.
pub fn sample(t: &ProbabilityTable, plan: &RunPlan) -> CountTable {
    let n_cells = t.cells().len();
    let trials: Vec<u64> = match plan.setting_order {
        SettingOrder::RoundRobin => vec![plan.trials_per_setting; n_cells],
        SettingOrder::RandomPerTrial => {
            let mut rng = stream_rng(plan.seed, SAMPLE_STREAM_BASE - 1);
            let mut left = plan.trials_per_setting * n_cells as u64;
            (0..n_cells)
                .map(|k| {
                    let n = binomial(&mut rng, left, 1.0 / (n_cells - k) as f64);
                    left -= n;
                    n
                })
                .collect()
        }
    };
    let cells = t
        .cells()
        .par_iter()
        .zip(trials)
        .enumerate()
        .map(|(k, (p, n))| {
            let mut rng = stream_rng(plan.seed, SAMPLE_STREAM_BASE + k as u64);
            multinomial3(&mut rng, n, p)
        })
        .collect();
    CountTable {
        n_prep: t.n_prep(),
        n_meas: t.n_meas(),
        cells,
    }
}

/// Observed frequencies. Under fair sampling the denominators are the
/// detected counts `n_e + n_d`; otherwise all trials.
pub fn estimate(c: &CountTable, fair_sampling: bool) -> Result<ProbabilityTable> {
    let mut cells = Vec::with_capacity(c.cells.len());
    for (k, cell) in c.cells.iter().enumerate() {
        let (i, j) = (k / c.n_meas, k % c.n_meas);
        let n = cell.n_trials();
        if n == 0 {
            return Err(Error::InsufficientStatistics { i, j });
        }
        let probs = if fair_sampling {
            let detected = cell.n_e + cell.n_d;
            if detected == 0 {
                return Err(Error::InsufficientStatistics { i, j });
            }
            CellProbs {
                p_e: cell.n_e as f64 / detected as f64,
                p_d: cell.n_d as f64 / detected as f64,
                p_none: 0.0,
            }
        } else {
            CellProbs {
                p_e: cell.n_e as f64 / n as f64,
                p_d: cell.n_d as f64 / n as f64,
                p_none: cell.n_none as f64 / n as f64,
            }
        };
        cells.push(probs);
    }
    ProbabilityTable::new(c.n_prep, c.n_meas, cells)
}

fn mean_and_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var.sqrt())
}

/// Witness values from observed counts, with parametric-bootstrap errors.
///
/// Each resample redraws every cell multinomially from its observed raw
/// frequencies with the same trial count, then re-estimates the table.
/// Point values come from the observed counts; the report also carries the
/// bootstrap means.
pub fn bootstrap_report(
    c: &CountTable,
    resamples: usize,
    seed: u64,
    fair_sampling: bool,
) -> Result<WitnessReport> {
    if resamples < MIN_RESAMPLES {
        return Err(Error::Domain(format!(
            "need at least {MIN_RESAMPLES} resamples, got {resamples}"
        )));
    }
    let observed = estimate(c, fair_sampling)?;
    let raw = estimate(c, false)?;

    let draws = (0..resamples)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(seed, r as u64);
            let cells = c
                .cells
                .iter()
                .zip(raw.cells())
                .map(|(cell, p)| multinomial3(&mut rng, cell.n_trials(), p))
                .collect();
            let t = estimate(
                &CountTable {
                    n_prep: c.n_prep,
                    n_meas: c.n_meas,
                    cells,
                },
                fair_sampling,
            )?;
            Ok((det_abs(&t).ok(), dimension_witness(&t).ok()))
        })
        .collect::<Result<Vec<_>>>()?;

    let dets: Vec<f64> = draws.iter().filter_map(|d| d.0).collect();
    let idws: Vec<f64> = draws.iter().filter_map(|d| d.1).collect();
    let rs: Vec<f64> = idws.iter().map(|&x| retrocausality(x)).collect();
    let summary = |xs: &[f64]| (!xs.is_empty()).then(|| mean_and_sd(xs));
    let (det, idw, r) = (summary(&dets), summary(&idws), summary(&rs));

    Ok(
        WitnessReport::analytic(&observed).with_uncertainties(Uncertainties {
            resamples,
            det_abs_mean: det.map(|s| s.0),
            det_abs_se: det.map(|s| s.1),
            i_dw_mean: idw.map(|s| s.0),
            i_dw_se: idw.map(|s| s.1),
            r_se: r.map(|s| s.1),
        }),
    )
}
