//! Causal classical hidden-variable models of the prepare-and-measure box pair.
//!
//! A deterministic strategy of dimension `d` encodes each preparation `i` into
//! a message `m < d` and decodes `(m, j)` into an outcome. Shared randomness
//! gives convex mixtures of these; linear witnesses are therefore maximized
//! at a deterministic vertex and certified by exhaustive enumeration. The
//! determinant witness is not linear and is handled in [`search`].

mod retro;
pub mod search;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::scenario::{CellProbs, ProbabilityTable};
use crate::witness::IDW_TERMS;
use crate::{Error, Result};

pub use retro::{
    enumerate_informed, informed_max_linear, retrocausal_max_linear, retrocausal_value,
    InformedStrategy, RetrocausalStrategy,
};
pub use search::{classical_max_det, DetBound, DetCertificate, DetModel, DetSearch};

/// Largest enumeration any oracle will attempt.
pub const DEFAULT_ENUMERATION_CAP: u64 = 10_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    E,
    D,
}

impl Outcome {
    fn from_bit(bit: bool) -> Self {
        if bit {
            Outcome::D
        } else {
            Outcome::E
        }
    }

    fn cell(self) -> CellProbs {
        match self {
            Outcome::E => CellProbs {
                p_e: 1.0,
                p_d: 0.0,
                p_none: 0.0,
            },
            Outcome::D => CellProbs {
                p_e: 0.0,
                p_d: 1.0,
                p_none: 0.0,
            },
        }
    }
}

/// Anything that can be evaluated into a [`ProbabilityTable`].
pub trait Strategy {
    fn table(&self, n_prep: usize, n_meas: usize) -> Result<ProbabilityTable>;
}

pub fn strategy_table(s: &impl Strategy, n_prep: usize, n_meas: usize) -> Result<ProbabilityTable> {
    s.table(n_prep, n_meas)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeterministicStrategy {
    dim: usize,
    encode: Vec<usize>,
    /// `decode[m][j]`
    decode: Vec<Vec<Outcome>>,
}

impl DeterministicStrategy {
    pub fn new(dim: usize, encode: Vec<usize>, decode: Vec<Vec<Outcome>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Domain("message dimension must be at least 1".into()));
        }
        if let Some(&m) = encode.iter().find(|&&m| m >= dim) {
            return Err(Error::Domain(format!(
                "encoder emits message {m} but d = {dim}"
            )));
        }
        let n_meas = decode.first().map_or(0, Vec::len);
        if decode.len() != dim || decode.iter().any(|row| row.len() != n_meas) {
            return Err(Error::Domain(format!(
                "decoder must have {dim} rows of equal length"
            )));
        }
        Ok(DeterministicStrategy {
            dim,
            encode,
            decode,
        })
    }

    /// The strategy that answers `outcome` regardless of input.
    pub fn constant(outcome: Outcome, n_prep: usize, n_meas: usize) -> Self {
        DeterministicStrategy {
            dim: 1,
            encode: vec![0; n_prep],
            decode: vec![vec![outcome; n_meas]],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn encode(&self) -> &[usize] {
        &self.encode
    }

    pub fn decode(&self) -> &[Vec<Outcome>] {
        &self.decode
    }

    pub fn outcome(&self, i: usize, j: usize) -> Result<Outcome> {
        let n_meas = self.decode[0].len();
        match self.encode.get(i) {
            Some(&m) if j < n_meas => Ok(self.decode[m][j]),
            _ => Err(Error::IndexOutOfRange {
                i,
                j,
                n_prep: self.encode.len(),
                n_meas,
            }),
        }
    }
}

impl Strategy for DeterministicStrategy {
    fn table(&self, n_prep: usize, n_meas: usize) -> Result<ProbabilityTable> {
        ProbabilityTable::from_fn(n_prep, n_meas, |i, j| self.outcome(i, j).map(Outcome::cell))
    }
}

/// Shared-randomness mixture of deterministic strategies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixedStrategy {
    components: Vec<(f64, DeterministicStrategy)>,
}

impl MixedStrategy {
    pub fn new(components: Vec<(f64, DeterministicStrategy)>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Domain(
                "a mixture needs at least one component".into(),
            ));
        }
        if components.iter().any(|(w, _)| w.is_nan() || *w < 0.0) {
            return Err(Error::Domain("mixture weights must be non-negative".into()));
        }
        let total: f64 = components.iter().map(|(w, _)| w).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!(
                "mixture weights sum to {total}, not 1"
            )));
        }
        Ok(MixedStrategy { components })
    }

    pub fn pure(s: DeterministicStrategy) -> Self {
        MixedStrategy {
            components: vec![(1.0, s)],
        }
    }

    pub fn components(&self) -> &[(f64, DeterministicStrategy)] {
        &self.components
    }
}

impl Strategy for MixedStrategy {
    fn table(&self, n_prep: usize, n_meas: usize) -> Result<ProbabilityTable> {
        let tables = self
            .components
            .iter()
            .map(|(w, s)| s.table(n_prep, n_meas).map(|t| (*w, t)))
            .collect::<Result<Vec<_>>>()?;
        ProbabilityTable::mix(tables.iter().map(|(w, t)| (*w, t)))
    }
}

/// A witness of the form `Σ c_e(i,j) p_e(i,j) + c_d(i,j) p_d(i,j)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearWitness {
    n_prep: usize,
    n_meas: usize,
    coef_e: Vec<f64>,
    coef_d: Vec<f64>,
}

impl LinearWitness {
    pub fn new(n_prep: usize, n_meas: usize, coef_e: Vec<f64>, coef_d: Vec<f64>) -> Result<Self> {
        let n = n_prep * n_meas;
        if n == 0 || coef_e.len() != n || coef_d.len() != n {
            return Err(Error::Domain(format!(
                "coefficients must cover the {n_prep}x{n_meas} table"
            )));
        }
        Ok(LinearWitness {
            n_prep,
            n_meas,
            coef_e,
            coef_d,
        })
    }

    /// `Σ sign · ⟨D_ij⟩` over the listed cells.
    pub fn correlator_sum(
        n_prep: usize,
        n_meas: usize,
        terms: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let mut coef_e = vec![0.0; n_prep * n_meas];
        let mut coef_d = vec![0.0; n_prep * n_meas];
        for &(i, j, s) in terms {
            if i >= n_prep || j >= n_meas {
                return Err(Error::IndexOutOfRange {
                    i,
                    j,
                    n_prep,
                    n_meas,
                });
            }
            coef_e[i * n_meas + j] += s;
            coef_d[i * n_meas + j] -= s;
        }
        LinearWitness::new(n_prep, n_meas, coef_e, coef_d)
    }

    /// `I_DW` on a 3×2 table.
    pub fn dimension_witness() -> Self {
        LinearWitness::correlator_sum(3, 2, &IDW_TERMS).expect("I_DW terms fit a 3x2 table")
    }

    pub fn zero(n_prep: usize, n_meas: usize) -> Self {
        let n = n_prep * n_meas;
        LinearWitness {
            n_prep,
            n_meas,
            coef_e: vec![0.0; n],
            coef_d: vec![0.0; n],
        }
    }

    pub fn n_prep(&self) -> usize {
        self.n_prep
    }

    pub fn n_meas(&self) -> usize {
        self.n_meas
    }

    pub fn value(&self, t: &ProbabilityTable) -> Result<f64> {
        t.require_shape(self.n_prep, self.n_meas)?;
        let mut acc = 0.0;
        for i in 0..self.n_prep {
            for j in 0..self.n_meas {
                let c = t.get(i, j)?;
                let k = i * self.n_meas + j;
                acc += self.coef_e[k] * c.p_e + self.coef_d[k] * c.p_d;
            }
        }
        Ok(acc)
    }

    /// Value on a deterministic outcome assignment, without building a table.
    fn value_of(&self, outcome: impl Fn(usize, usize) -> Outcome) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.n_prep {
            for j in 0..self.n_meas {
                let k = i * self.n_meas + j;
                acc += match outcome(i, j) {
                    Outcome::E => self.coef_e[k],
                    Outcome::D => self.coef_d[k],
                };
            }
        }
        acc
    }
}

/// `d^n_prep · 2^(d·n_meas)`, refusing anything above `cap`.
pub fn strategy_count(dim: usize, n_prep: usize, n_meas: usize, cap: u64) -> Result<u64> {
    let encoders = checked_pow(dim as u128, n_prep);
    let decoders = dim
        .checked_mul(n_meas)
        .and_then(|bits| checked_pow(2, bits));
    let count = encoders.zip(decoders).and_then(|(a, b)| a.checked_mul(b));
    match count {
        Some(c) if c <= cap as u128 => Ok(c as u64),
        Some(c) => Err(Error::EnumerationCap {
            count: c.to_string(),
            cap,
        }),
        None => Err(Error::EnumerationCap {
            count: "more than 2^128".into(),
            cap,
        }),
    }
}

pub(crate) fn checked_pow(base: u128, exp: usize) -> Option<u128> {
    u32::try_from(exp).ok().and_then(|e| base.checked_pow(e))
}

/// Digits of `index` in base `dim`, least significant first.
pub(crate) fn digits(mut index: u64, dim: usize, len: usize) -> Vec<usize> {
    (0..len)
        .map(|_| {
            let m = (index % dim as u64) as usize;
            index /= dim as u64;
            m
        })
        .collect()
}

pub(crate) fn decoder_from_bits(bits: u64, dim: usize, n_meas: usize) -> Vec<Vec<Outcome>> {
    (0..dim)
        .map(|m| {
            (0..n_meas)
                .map(|j| Outcome::from_bit(bits >> (m * n_meas + j) & 1 == 1))
                .collect()
        })
        .collect()
}

fn strategy_at(index: u64, dim: usize, n_prep: usize, n_meas: usize) -> DeterministicStrategy {
    let n_dec = 1u64 << (dim * n_meas);
    DeterministicStrategy {
        dim,
        encode: digits(index / n_dec, dim, n_prep),
        decode: decoder_from_bits(index % n_dec, dim, n_meas),
    }
}

/// Every deterministic strategy of dimension `dim`, each exactly once.
pub fn enumerate_deterministic(
    dim: usize,
    n_prep: usize,
    n_meas: usize,
    cap: u64,
) -> Result<impl Iterator<Item = DeterministicStrategy>> {
    if dim == 0 {
        return Err(Error::Domain("message dimension must be at least 1".into()));
    }
    let count = strategy_count(dim, n_prep, n_meas, cap)?;
    Ok((0..count).map(move |k| strategy_at(k, dim, n_prep, n_meas)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearBound {
    pub value: f64,
    pub argmax: DeterministicStrategy,
    pub strategies_checked: u64,
}

/// Exact classical maximum of a linear witness over dimension-`dim` mixtures.
pub fn classical_max_linear(w: &LinearWitness, dim: usize) -> Result<LinearBound> {
    classical_max_linear_capped(w, dim, DEFAULT_ENUMERATION_CAP)
}

pub fn classical_max_linear_capped(w: &LinearWitness, dim: usize, cap: u64) -> Result<LinearBound> {
    if dim == 0 {
        return Err(Error::Domain("message dimension must be at least 1".into()));
    }
    let (n_prep, n_meas) = (w.n_prep, w.n_meas);
    let count = strategy_count(dim, n_prep, n_meas, cap)?;
    let (value, index) = (0..count)
        .into_par_iter()
        .map(|k| {
            let s = strategy_at(k, dim, n_prep, n_meas);
            (w.value_of(|i, j| s.decode[s.encode[i]][j]), k)
        })
        .reduce(|| (f64::NEG_INFINITY, u64::MAX), better_of);
    Ok(LinearBound {
        value,
        argmax: strategy_at(index, dim, n_prep, n_meas),
        strategies_checked: count,
    })
}

/// Max-reduction with ties going to the lower index, so results do not
/// depend on how the work was split.
pub(crate) fn better_of(a: (f64, u64), b: (f64, u64)) -> (f64, u64) {
    if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
        b
    } else {
        a
    }
}
