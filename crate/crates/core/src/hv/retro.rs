//! Retrocausal models: with probability `leak` the encoder also learns Bob's
//! setting `j` before choosing its message.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    better_of, checked_pow, classical_max_linear, decoder_from_bits, digits, LinearWitness,
    MixedStrategy, Outcome, Strategy, DEFAULT_ENUMERATION_CAP,
};
use crate::scenario::ProbabilityTable;
use crate::{Error, Result};

/// A deterministic strategy whose encoder sees `(i, j)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InformedStrategy {
    dim: usize,
    /// `encode[i][j]`
    encode: Vec<Vec<usize>>,
    decode: Vec<Vec<Outcome>>,
}

impl InformedStrategy {
    pub fn new(dim: usize, encode: Vec<Vec<usize>>, decode: Vec<Vec<Outcome>>) -> Result<Self> {
        if dim == 0 || decode.len() != dim {
            return Err(Error::Domain(format!("decoder must have {dim} rows")));
        }
        if encode.iter().flatten().any(|&m| m >= dim) {
            return Err(Error::Domain(format!(
                "encoder emits a message ≥ d = {dim}"
            )));
        }
        Ok(InformedStrategy {
            dim,
            encode,
            decode,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn outcome(&self, i: usize, j: usize) -> Option<Outcome> {
        let m = *self.encode.get(i)?.get(j)?;
        self.decode.get(m)?.get(j).copied()
    }
}

impl Strategy for InformedStrategy {
    fn table(&self, n_prep: usize, n_meas: usize) -> Result<ProbabilityTable> {
        ProbabilityTable::from_fn(n_prep, n_meas, |i, j| {
            self.outcome(i, j)
                .map(Outcome::cell)
                .ok_or(Error::IndexOutOfRange {
                    i,
                    j,
                    n_prep: self.encode.len(),
                    n_meas: self.decode[0].len(),
                })
        })
    }
}

fn informed_count(dim: usize, n_prep: usize, n_meas: usize, cap: u64) -> Result<u64> {
    let enc = checked_pow(dim as u128, n_prep * n_meas);
    let dec = checked_pow(2, dim * n_meas);
    match enc.zip(dec).and_then(|(a, b)| a.checked_mul(b)) {
        Some(c) if c <= cap as u128 => Ok(c as u64),
        c => Err(Error::EnumerationCap {
            count: c.map_or("more than 2^128".into(), |c| c.to_string()),
            cap,
        }),
    }
}

fn informed_at(index: u64, dim: usize, n_prep: usize, n_meas: usize) -> InformedStrategy {
    let n_dec = 1u64 << (dim * n_meas);
    let flat = digits(index / n_dec, dim, n_prep * n_meas);
    InformedStrategy {
        dim,
        encode: flat.chunks(n_meas).map(<[usize]>::to_vec).collect(),
        decode: decoder_from_bits(index % n_dec, dim, n_meas),
    }
}

pub fn enumerate_informed(
    dim: usize,
    n_prep: usize,
    n_meas: usize,
    cap: u64,
) -> Result<impl Iterator<Item = InformedStrategy>> {
    if dim == 0 {
        return Err(Error::Domain("message dimension must be at least 1".into()));
    }
    let count = informed_count(dim, n_prep, n_meas, cap)?;
    Ok((0..count).map(move |k| informed_at(k, dim, n_prep, n_meas)))
}

/// Best value of `w` when the encoder always knows `j`.
pub fn informed_max_linear(w: &LinearWitness, dim: usize) -> Result<(f64, InformedStrategy)> {
    if dim == 0 {
        return Err(Error::Domain("message dimension must be at least 1".into()));
    }
    let (n_prep, n_meas) = (w.n_prep(), w.n_meas());
    let count = informed_count(dim, n_prep, n_meas, DEFAULT_ENUMERATION_CAP)?;
    let (value, index) = (0..count)
        .into_par_iter()
        .map(|k| {
            let s = informed_at(k, dim, n_prep, n_meas);
            let v = w.value_of(|i, j| s.decode[s.encode[i][j]][j]);
            (v, k)
        })
        .reduce(|| (f64::NEG_INFINITY, u64::MAX), better_of);
    Ok((value, informed_at(index, dim, n_prep, n_meas)))
}

/// A causal strategy that, with probability `leak`, is replaced by an
/// informed one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetrocausalStrategy {
    pub causal: MixedStrategy,
    pub informed: InformedStrategy,
    leak: f64,
}

impl RetrocausalStrategy {
    pub fn new(causal: MixedStrategy, informed: InformedStrategy, leak: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&leak) {
            return Err(Error::Domain(format!(
                "leak probability {leak} outside [0, 1]"
            )));
        }
        Ok(RetrocausalStrategy {
            causal,
            informed,
            leak,
        })
    }

    pub fn leak(&self) -> f64 {
        self.leak
    }
}

impl Strategy for RetrocausalStrategy {
    fn table(&self, n_prep: usize, n_meas: usize) -> Result<ProbabilityTable> {
        let causal = self.causal.table(n_prep, n_meas)?;
        let informed = self.informed.table(n_prep, n_meas)?;
        ProbabilityTable::mix([(1.0 - self.leak, &causal), (self.leak, &informed)])
    }
}

/// Value of `w` on this particular strategy.
pub fn retrocausal_value(w: &LinearWitness, s: &RetrocausalStrategy) -> Result<f64> {
    w.value(&s.table(w.n_prep(), w.n_meas())?)
}

/// The best retrocausal strategy at a given leak: optimal causal and optimal
/// informed parts, mixed.
pub fn retrocausal_max_linear(
    w: &LinearWitness,
    dim: usize,
    leak: f64,
) -> Result<(f64, RetrocausalStrategy)> {
    let causal = classical_max_linear(w, dim)?;
    let (_, informed) = informed_max_linear(w, dim)?;
    let s = RetrocausalStrategy::new(MixedStrategy::pure(causal.argmax), informed, leak)?;
    Ok((retrocausal_value(w, &s)?, s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::witness::retrocausality;

    const TOL: f64 = 1e-12;

    #[test]
    fn informed_enumeration_count() {
        assert_eq!(
            enumerate_informed(2, 3, 2, DEFAULT_ENUMERATION_CAP)
                .unwrap()
                .count(),
            1024
        );
    }

    #[test]
    fn informed_d2_saturates_dimension_witness() {
        let (v, s) = informed_max_linear(&LinearWitness::dimension_witness(), 2).unwrap();
        assert_eq!(v, 5.0);
        let t = s.table(3, 2).unwrap();
        assert_eq!(crate::witness::dimension_witness(&t).unwrap(), 5.0);
    }

    #[test]
    fn leak_interpolates_linearly() {
        let w = LinearWitness::dimension_witness();
        let (v0, _) = retrocausal_max_linear(&w, 2, 0.0).unwrap();
        let (v1, _) = retrocausal_max_linear(&w, 2, 1.0).unwrap();
        let (vh, _) = retrocausal_max_linear(&w, 2, 0.5).unwrap();
        assert!((v0 - 3.0).abs() < TOL);
        assert!((v1 - 5.0).abs() < TOL);
        assert!((vh - 4.0).abs() < TOL);
    }

    #[test]
    fn zero_leak_is_the_causal_value() {
        let w = LinearWitness::dimension_witness();
        for (k, causal) in super::super::enumerate_deterministic(2, 3, 2, DEFAULT_ENUMERATION_CAP)
            .unwrap()
            .enumerate()
            .step_by(9)
        {
            let informed = enumerate_informed(2, 3, 2, DEFAULT_ENUMERATION_CAP)
                .unwrap()
                .nth(k * 7)
                .unwrap();
            let expected = w.value(&causal.table(3, 2).unwrap()).unwrap();
            let s = RetrocausalStrategy::new(MixedStrategy::pure(causal), informed, 0.0).unwrap();
            assert!((retrocausal_value(&w, &s).unwrap() - expected).abs() < TOL);
        }
    }

    #[test]
    fn measure_never_exceeds_leak() {
        let w = LinearWitness::dimension_witness();
        for k in 0..=20 {
            let leak = k as f64 / 20.0;
            let (v, _) = retrocausal_max_linear(&w, 2, leak).unwrap();
            assert!(retrocausality(v) <= leak + TOL, "leak {leak}: I_DW {v}");
        }
    }

    #[test]
    fn leak_out_of_range_is_rejected() {
        let w = LinearWitness::dimension_witness();
        assert!(retrocausal_max_linear(&w, 2, 1.5).is_err());
    }
}
