//! Classical maximum of `|det W|`.
//!
//! `|det W|` is not linear in the table, so mixtures have to be searched
//! rather than read off the vertices. Two randomness models are offered:
//!
//! * [`DetModel::IndependentDevices`]: preparation and measurement boxes each
//!   mix over their own deterministic rules with private randomness. This is
//!   the model the determinant witness certifies. For `d = 2`,
//!   `p(d|i,j) = r₀(j) + q(i)·(r₁(j) − r₀(j))` makes `W` rank one, so
//!   `det W = 0` identically.
//! * [`DetModel::SharedRandomness`]: arbitrary convex mixtures of joint
//!   deterministic strategies. Here `|det W|` is not bounded by zero at
//!   `d = 2`; the model is kept to exhibit that.
//!
//! The search is random-restart coordinate ascent on the weight simplices:
//! each step moves a fraction of one component's weight onto another and
//! keeps the best improving move. Restart `k` draws from its own ChaCha
//! stream, so results do not depend on thread scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    better_of, checked_pow, decoder_from_bits, digits, enumerate_deterministic, strategy_count,
    DeterministicStrategy, MixedStrategy, Outcome, Strategy, DEFAULT_ENUMERATION_CAP,
};
use crate::scenario::{CellProbs, ProbabilityTable};
use crate::witness::det_abs;
use crate::{Error, Result};

const N_PREP: usize = 4;
const N_MEAS: usize = 2;
const WEIGHT_FLOOR: f64 = 1e-12;
const MOVE_FRACTIONS: [f64; 4] = [1.0, 0.5, 0.25, 0.125];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetModel {
    IndependentDevices,
    SharedRandomness,
}

#[derive(Clone, Debug)]
pub struct DetSearch {
    pub dim: usize,
    pub restarts: usize,
    /// Coordinate-ascent moves per restart.
    pub steps: usize,
    pub seed: u64,
    pub model: DetModel,
    pub cap: u64,
}

impl DetSearch {
    pub fn new(dim: usize, restarts: usize, seed: u64) -> Self {
        DetSearch {
            dim,
            restarts,
            seed,
            ..DetSearch::default()
        }
    }
}

impl Default for DetSearch {
    fn default() -> Self {
        DetSearch {
            dim: 2,
            restarts: 10_000,
            steps: 60,
            seed: 0,
            model: DetModel::IndependentDevices,
            cap: DEFAULT_ENUMERATION_CAP,
        }
    }
}

/// A weighted component of a mixture certificate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Weighted<T> {
    pub weight: f64,
    pub rule: T,
}

/// The mixture that achieved [`DetBound::mixture_max`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum DetCertificate {
    IndependentDevices {
        dim: usize,
        encoders: Vec<Weighted<Vec<usize>>>,
        decoders: Vec<Weighted<Vec<Vec<Outcome>>>>,
    },
    SharedRandomness {
        mixture: MixedStrategy,
    },
}

impl DetCertificate {
    /// The 4×2 table this mixture produces.
    pub fn table(&self) -> Result<ProbabilityTable> {
        match self {
            DetCertificate::SharedRandomness { mixture } => mixture.table(N_PREP, N_MEAS),
            DetCertificate::IndependentDevices {
                dim,
                encoders,
                decoders,
            } => {
                let mut q = vec![[0.0; N_PREP]; *dim];
                for e in encoders {
                    for (i, &m) in e.rule.iter().enumerate() {
                        q[m][i] += e.weight;
                    }
                }
                let mut r = vec![[0.0; N_MEAS]; *dim];
                for d in decoders {
                    for (m, row) in d.rule.iter().enumerate() {
                        for (j, &o) in row.iter().enumerate() {
                            if o == Outcome::D {
                                r[m][j] += d.weight;
                            }
                        }
                    }
                }
                ProbabilityTable::from_fn(N_PREP, N_MEAS, |i, j| {
                    let p_d: f64 = (0..*dim)
                        .map(|m| q[m][i] * r[m][j])
                        .sum::<f64>()
                        .clamp(0.0, 1.0);
                    Ok(CellProbs {
                        p_e: 1.0 - p_d,
                        p_d,
                        p_none: 0.0,
                    })
                })
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetBound {
    /// `max(vertex_max, mixture_max)`
    pub value: f64,
    pub vertex_max: f64,
    pub vertex_argmax: DeterministicStrategy,
    pub vertices_checked: u64,
    pub mixture_max: f64,
    pub mixture: DetCertificate,
    pub restarts: usize,
    pub model: DetModel,
}

/// Classical `|det W|` maximum: exhaustive over deterministic strategies, then
/// a seeded mixture search in the chosen randomness model.
pub fn classical_max_det(search: &DetSearch) -> Result<DetBound> {
    if search.dim < 2 {
        return Err(Error::Domain(format!(
            "determinant search needs d ≥ 2, got {}",
            search.dim
        )));
    }
    let (vertex_max, vertex_argmax, vertices_checked) = vertex_search(search)?;
    let (mixture_max, mixture) = match search.model {
        DetModel::IndependentDevices => {
            let landscape = Independent::new(search.dim, search.cap)?;
            let (_, weights) = climb(&landscape, search);
            let cert = landscape.certificate(&weights);
            (det_abs(&cert.table()?)?, cert)
        }
        DetModel::SharedRandomness => {
            let landscape = Shared::new(search.dim, search.cap)?;
            let (_, weights) = climb(&landscape, search);
            let cert = landscape.certificate(&weights[0])?;
            (det_abs(&cert.table()?)?, cert)
        }
    };
    Ok(DetBound {
        value: vertex_max.max(mixture_max),
        vertex_max,
        vertex_argmax,
        vertices_checked,
        mixture_max,
        mixture,
        restarts: search.restarts,
        model: search.model,
    })
}

/// `p_d` bits of a deterministic strategy, cell `(i, j)` at bit `i·2 + j`.
fn pd_bits(s: &DeterministicStrategy) -> u8 {
    let mut bits = 0u8;
    for i in 0..N_PREP {
        for j in 0..N_MEAS {
            if s.decode[s.encode[i]][j] == Outcome::D {
                bits |= 1 << (i * N_MEAS + j);
            }
        }
    }
    bits
}

fn det_of_bits(bits: u8) -> i32 {
    let p = |i: usize, j: usize| i32::from(bits >> (i * N_MEAS + j) & 1);
    let w = |k: usize, l: usize| p(2 * k, l) - p(2 * k + 1, l);
    w(0, 0) * w(1, 1) - w(0, 1) * w(1, 0)
}

fn vertex_search(search: &DetSearch) -> Result<(f64, DeterministicStrategy, u64)> {
    let count = strategy_count(search.dim, N_PREP, N_MEAS, search.cap)?;
    let (best, index) = (0..count)
        .into_par_iter()
        .map(|k| {
            let s = super::strategy_at(k, search.dim, N_PREP, N_MEAS);
            (f64::from(det_of_bits(pd_bits(&s)).abs()), k)
        })
        .reduce(|| (f64::NEG_INFINITY, u64::MAX), better_of);
    Ok((
        best,
        super::strategy_at(index, search.dim, N_PREP, N_MEAS),
        count,
    ))
}

/// A product of weight simplices with an objective that can be updated in
/// place when weight moves between two components of one block.
trait Landscape: Sync {
    type State: Clone;

    fn block_sizes(&self) -> Vec<usize>;
    fn init(&self, weights: &[Vec<f64>]) -> Self::State;
    /// Moves `delta` of weight in `block` from component `from` to `to`.
    fn shift(&self, state: &mut Self::State, block: usize, from: usize, to: usize, delta: f64);
    fn value(&self, state: &Self::State) -> f64;
}

fn det_from_pd(pd: &[[f64; N_MEAS]; N_PREP]) -> f64 {
    let w = |k: usize, l: usize| pd[2 * k][l] - pd[2 * k + 1][l];
    (w(0, 0) * w(1, 1) - w(0, 1) * w(1, 0)).abs()
}

/// Independent boxes: block 0 weights deterministic encoders, block 1
/// deterministic decoders.
struct Independent {
    dim: usize,
    encoders: Vec<Vec<usize>>,
    decoders: Vec<u64>,
}

#[derive(Clone)]
struct IndependentState {
    /// `q[m][i]` = P(message m | preparation i)
    q: Vec<[f64; N_PREP]>,
    /// `r[m][j]` = P(outcome d | message m, measurement j)
    r: Vec<[f64; N_MEAS]>,
}

impl Independent {
    fn new(dim: usize, cap: u64) -> Result<Self> {
        let n_enc = checked_pow(dim as u128, N_PREP).filter(|&n| n <= cap as u128);
        let n_dec = checked_pow(2, dim * N_MEAS).filter(|&n| n <= cap as u128);
        let (Some(n_enc), Some(n_dec)) = (n_enc, n_dec) else {
            return Err(Error::EnumerationCap {
                count: format!("{dim}^{N_PREP} encoders × 2^{} decoders", dim * N_MEAS),
                cap,
            });
        };
        Ok(Independent {
            dim,
            encoders: (0..n_enc as u64).map(|k| digits(k, dim, N_PREP)).collect(),
            decoders: (0..n_dec as u64).collect(),
        })
    }

    fn certificate(&self, weights: &[Vec<f64>]) -> DetCertificate {
        DetCertificate::IndependentDevices {
            dim: self.dim,
            encoders: weights[0]
                .iter()
                .enumerate()
                .filter(|(_, &w)| w > WEIGHT_FLOOR)
                .map(|(a, &w)| Weighted {
                    weight: w,
                    rule: self.encoders[a].clone(),
                })
                .collect(),
            decoders: weights[1]
                .iter()
                .enumerate()
                .filter(|(_, &w)| w > WEIGHT_FLOOR)
                .map(|(b, &w)| Weighted {
                    weight: w,
                    rule: decoder_from_bits(self.decoders[b], self.dim, N_MEAS),
                })
                .collect(),
        }
    }
}

impl Landscape for Independent {
    type State = IndependentState;

    fn block_sizes(&self) -> Vec<usize> {
        vec![self.encoders.len(), self.decoders.len()]
    }

    fn init(&self, weights: &[Vec<f64>]) -> IndependentState {
        let mut state = IndependentState {
            q: vec![[0.0; N_PREP]; self.dim],
            r: vec![[0.0; N_MEAS]; self.dim],
        };
        for (a, &w) in weights[0].iter().enumerate() {
            for (i, &m) in self.encoders[a].iter().enumerate() {
                state.q[m][i] += w;
            }
        }
        for (b, &w) in weights[1].iter().enumerate() {
            add_decoder(&mut state.r, self.decoders[b], w);
        }
        state
    }

    fn shift(
        &self,
        state: &mut IndependentState,
        block: usize,
        from: usize,
        to: usize,
        delta: f64,
    ) {
        if block == 0 {
            for i in 0..N_PREP {
                state.q[self.encoders[from][i]][i] -= delta;
                state.q[self.encoders[to][i]][i] += delta;
            }
        } else {
            add_decoder(&mut state.r, self.decoders[from], -delta);
            add_decoder(&mut state.r, self.decoders[to], delta);
        }
    }

    fn value(&self, state: &IndependentState) -> f64 {
        let mut pd = [[0.0; N_MEAS]; N_PREP];
        for (i, row) in pd.iter_mut().enumerate() {
            for (j, p) in row.iter_mut().enumerate() {
                *p = (0..self.dim).map(|m| state.q[m][i] * state.r[m][j]).sum();
            }
        }
        det_from_pd(&pd)
    }
}

fn add_decoder(r: &mut [[f64; N_MEAS]], bits: u64, w: f64) {
    for (m, row) in r.iter_mut().enumerate() {
        for (j, p) in row.iter_mut().enumerate() {
            if bits >> (m * N_MEAS + j) & 1 == 1 {
                *p += w;
            }
        }
    }
}

/// Shared randomness: one block over the distinct deterministic tables.
struct Shared {
    vertices: Vec<(u8, DeterministicStrategy)>,
}

impl Shared {
    fn new(dim: usize, cap: u64) -> Result<Self> {
        let mut seen = [false; 256];
        let mut vertices = Vec::new();
        for s in enumerate_deterministic(dim, N_PREP, N_MEAS, cap)? {
            let bits = pd_bits(&s);
            if !seen[bits as usize] {
                seen[bits as usize] = true;
                vertices.push((bits, s));
            }
        }
        Ok(Shared { vertices })
    }

    fn certificate(&self, weights: &[f64]) -> Result<DetCertificate> {
        let kept: Vec<(f64, DeterministicStrategy)> = weights
            .iter()
            .zip(&self.vertices)
            .filter(|(&w, _)| w > WEIGHT_FLOOR)
            .map(|(&w, (_, s))| (w, s.clone()))
            .collect();
        let total: f64 = kept.iter().map(|(w, _)| w).sum();
        let mixture = MixedStrategy::new(kept.into_iter().map(|(w, s)| (w / total, s)).collect())?;
        Ok(DetCertificate::SharedRandomness { mixture })
    }
}

impl Landscape for Shared {
    type State = [[f64; N_MEAS]; N_PREP];

    fn block_sizes(&self) -> Vec<usize> {
        vec![self.vertices.len()]
    }

    fn init(&self, weights: &[Vec<f64>]) -> Self::State {
        let mut pd = [[0.0; N_MEAS]; N_PREP];
        for (&w, &(bits, _)) in weights[0].iter().zip(&self.vertices) {
            add_bits(&mut pd, bits, w);
        }
        pd
    }

    fn shift(&self, pd: &mut Self::State, _block: usize, from: usize, to: usize, delta: f64) {
        add_bits(pd, self.vertices[from].0, -delta);
        add_bits(pd, self.vertices[to].0, delta);
    }

    fn value(&self, pd: &Self::State) -> f64 {
        det_from_pd(pd)
    }
}

fn add_bits(pd: &mut [[f64; N_MEAS]; N_PREP], bits: u8, w: f64) {
    for (i, row) in pd.iter_mut().enumerate() {
        for (j, p) in row.iter_mut().enumerate() {
            if bits >> (i * N_MEAS + j) & 1 == 1 {
                *p += w;
            }
        }
    }
}

/// Even restarts start from a dense Dirichlet(1) point, odd ones from a random
/// mixture of at most three components.
fn random_start(rng: &mut ChaCha8Rng, size: usize, sparse: bool) -> Vec<f64> {
    let mut w = vec![0.0; size];
    if sparse {
        let k = rng.random_range(1..=3.min(size));
        for _ in 0..k {
            let e: f64 = Exp1.sample(rng);
            w[rng.random_range(0..size)] += e;
        }
    } else {
        for x in w.iter_mut() {
            *x = Exp1.sample(rng);
        }
    }
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    w
}

fn climb_once<L: Landscape>(
    landscape: &L,
    search: &DetSearch,
    restart: usize,
) -> (f64, Vec<Vec<f64>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(search.seed);
    rng.set_stream(restart as u64);
    let sizes = landscape.block_sizes();
    let mut weights: Vec<Vec<f64>> = sizes
        .iter()
        .map(|&n| random_start(&mut rng, n, restart % 2 == 1))
        .collect();
    let mut state = landscape.init(&weights);
    let mut current = landscape.value(&state);

    for _ in 0..search.steps {
        let block = rng.random_range(0..sizes.len());
        let n = sizes[block];
        if n < 2 {
            continue;
        }
        let support: Vec<usize> = (0..n).filter(|&a| weights[block][a] > 0.0).collect();
        let from = support[rng.random_range(0..support.len())];
        let mut to = rng.random_range(0..n - 1);
        if to >= from {
            to += 1;
        }
        let mut best: Option<(f64, f64)> = None;
        for frac in MOVE_FRACTIONS {
            let delta = weights[block][from] * frac;
            landscape.shift(&mut state, block, from, to, delta);
            let v = landscape.value(&state);
            landscape.shift(&mut state, block, to, from, delta);
            if v > best.map_or(current, |b| b.0) {
                best = Some((v, delta));
            }
        }
        if let Some((v, delta)) = best {
            landscape.shift(&mut state, block, from, to, delta);
            weights[block][from] = (weights[block][from] - delta).max(0.0);
            weights[block][to] += delta;
            current = v;
        }
    }
    (current, weights)
}

fn climb<L: Landscape>(landscape: &L, search: &DetSearch) -> (f64, Vec<Vec<f64>>) {
    let restarts = search.restarts.max(1);
    let (value, index) = (0..restarts)
        .into_par_iter()
        .map(|k| (climb_once(landscape, search, k).0, k as u64))
        .reduce(|| (f64::NEG_INFINITY, u64::MAX), better_of);
    // Replaying the winning restart is cheaper than carrying every weight vector.
    let (replayed, weights) = climb_once(landscape, search, index as usize);
    debug_assert_eq!(replayed, value);
    (value, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn search(dim: usize, restarts: usize, model: DetModel) -> DetSearch {
        DetSearch {
            dim,
            restarts,
            model,
            ..DetSearch::default()
        }
    }

    #[test]
    fn exact_bit_determinant_matches_table_route() {
        for s in enumerate_deterministic(3, N_PREP, N_MEAS, DEFAULT_ENUMERATION_CAP)
            .unwrap()
            .step_by(37)
        {
            let t = s.table(N_PREP, N_MEAS).unwrap();
            assert_eq!(
                f64::from(det_of_bits(pd_bits(&s)).abs()),
                det_abs(&t).unwrap()
            );
        }
    }

    #[test]
    fn d2_independent_devices_have_null_determinant() {
        let b = classical_max_det(&search(2, 2_000, DetModel::IndependentDevices)).unwrap();
        assert_eq!(b.vertex_max, 0.0);
        assert_eq!(b.vertices_checked, 256);
        assert!(b.mixture_max <= 1e-9, "{}", b.mixture_max);
    }

    #[test]
    fn d2_shared_randomness_breaks_the_null() {
        // Two deterministic d=2 strategies, mixed half and half, already give |det W| = 1.
        let b = classical_max_det(&search(2, 500, DetModel::SharedRandomness)).unwrap();
        assert_eq!(b.vertex_max, 0.0);
        assert!(b.mixture_max > 0.99, "{}", b.mixture_max);
    }

    #[test]
    fn larger_dimensions_reach_the_entry_bound() {
        // Frozen from exhaustive enumeration: d=3 → 1, d=4 → 2 (entries are ±1 freely).
        let b3 = classical_max_det(&search(3, 50, DetModel::IndependentDevices)).unwrap();
        let b4 = classical_max_det(&search(4, 50, DetModel::IndependentDevices)).unwrap();
        assert_eq!(b3.vertex_max, 1.0);
        assert_eq!(b4.vertex_max, 2.0);
        assert_eq!(b4.value, 2.0);
    }

    #[test]
    fn certificate_reproduces_reported_value() {
        let b = classical_max_det(&search(3, 200, DetModel::IndependentDevices)).unwrap();
        assert_eq!(det_abs(&b.mixture.table().unwrap()).unwrap(), b.mixture_max);
        let json = serde_json::to_string(&b).unwrap();
        let back: DetBound = serde_json::from_str(&json).unwrap();
        assert_eq!(back.mixture_max, b.mixture_max);
    }

    #[test]
    fn search_is_seed_deterministic() {
        let s = DetSearch {
            seed: 42,
            ..search(3, 300, DetModel::SharedRandomness)
        };
        assert_eq!(
            classical_max_det(&s).unwrap(),
            classical_max_det(&s).unwrap()
        );
    }

    #[test]
    fn dimension_one_is_rejected() {
        assert!(classical_max_det(&search(1, 1, DetModel::IndependentDevices)).is_err());
    }

    #[test]
    fn independent_tables_are_rank_one_at_d2() {
        let landscape = Independent::new(2, DEFAULT_ENUMERATION_CAP).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let weights: Vec<Vec<f64>> = landscape
                .block_sizes()
                .iter()
                .map(|&n| random_start(&mut rng, n, false))
                .collect();
            let t = landscape.certificate(&weights).table().unwrap();
            assert!(det_abs(&t).unwrap() < 1e-12);
        }
    }
}
