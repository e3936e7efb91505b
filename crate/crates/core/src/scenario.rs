//! Experiment configuration and exact outcome probabilities.
//!
//! Outcome `e` is Bob's projector onto `(|H⟩ + e^{iβ}|V⟩)/√2` and outcome `d`
//! onto `(|H⟩ − e^{iβ}|V⟩)/√2`. With interference visibility `V` and detection
//! efficiency `η` a cell reads
//!
//! ```text
//! p_e = η (1 + V cos(α − β)) / 2
//! p_d = η (1 − V cos(α − β)) / 2
//! p_none = 1 − η
//! ```
//!
//! Probabilities are per heralded trial. Under fair sampling the no-click
//! outcome is discarded and each cell is renormalized over `e` and `d`.

use std::io;

use serde::{Deserialize, Serialize};

use crate::qcore::{born, phase_ket, prepare_remote, Ket2, Ket4, Phase};
use crate::{Error, Result};

/// Tolerance on `p_e + p_d + p_none = 1` when building a table.
const SUM_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellProbs {
    pub p_e: f64,
    pub p_d: f64,
    pub p_none: f64,
}

impl CellProbs {
    /// `⟨D⟩ = p_e − p_d`
    pub fn correlator(&self) -> f64 {
        self.p_e - self.p_d
    }

    pub fn detected(&self) -> f64 {
        self.p_e + self.p_d
    }

    fn check(&self) -> bool {
        let ps = [self.p_e, self.p_d, self.p_none];
        ps.iter()
            .all(|p| p.is_finite() && *p >= -SUM_TOL && *p <= 1.0 + SUM_TOL)
            && (ps.iter().sum::<f64>() - 1.0).abs() < SUM_TOL
    }
}

/// Outcome probabilities for every (preparation, measurement) pair, row-major
/// in the preparation index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityTable {
    n_prep: usize,
    n_meas: usize,
    cells: Vec<CellProbs>,
}

#[derive(Serialize, Deserialize)]
struct TableRow {
    i: usize,
    j: usize,
    p_e: f64,
    p_d: f64,
    p_none: f64,
}

impl ProbabilityTable {
    pub fn new(n_prep: usize, n_meas: usize, cells: Vec<CellProbs>) -> Result<Self> {
        if n_prep == 0 || n_meas == 0 || cells.len() != n_prep * n_meas {
            return Err(Error::Domain(format!(
                "{} cells do not form a non-empty {n_prep}x{n_meas} table",
                cells.len()
            )));
        }
        if let Some(k) = cells.iter().position(|c| !c.check()) {
            return Err(Error::Domain(format!(
                "cell ({}, {}) is not a probability distribution: {:?}",
                k / n_meas,
                k % n_meas,
                cells[k]
            )));
        }
        Ok(ProbabilityTable {
            n_prep,
            n_meas,
            cells,
        })
    }

    pub fn from_fn(
        n_prep: usize,
        n_meas: usize,
        mut f: impl FnMut(usize, usize) -> Result<CellProbs>,
    ) -> Result<Self> {
        let mut cells = Vec::with_capacity(n_prep * n_meas);
        for i in 0..n_prep {
            for j in 0..n_meas {
                cells.push(f(i, j)?);
            }
        }
        ProbabilityTable::new(n_prep, n_meas, cells)
    }

    pub fn n_prep(&self) -> usize {
        self.n_prep
    }

    pub fn n_meas(&self) -> usize {
        self.n_meas
    }

    pub fn cells(&self) -> &[CellProbs] {
        &self.cells
    }

    pub fn get(&self, i: usize, j: usize) -> Result<&CellProbs> {
        if i >= self.n_prep || j >= self.n_meas {
            return Err(Error::IndexOutOfRange {
                i,
                j,
                n_prep: self.n_prep,
                n_meas: self.n_meas,
            });
        }
        Ok(&self.cells[i * self.n_meas + j])
    }

    /// Iterates `(i, j, cell)`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, &CellProbs)> + '_ {
        let m = self.n_meas;
        self.cells
            .iter()
            .enumerate()
            .map(move |(k, c)| (k / m, k % m, c))
    }

    pub fn require_shape(&self, need_prep: usize, need_meas: usize) -> Result<()> {
        if self.n_prep < need_prep || self.n_meas < need_meas {
            return Err(Error::Shape {
                n_prep: self.n_prep,
                n_meas: self.n_meas,
                need_prep,
                need_meas,
            });
        }
        Ok(())
    }

    /// Keeps only detected events, renormalizing each cell over `e` and `d`.
    pub fn postselect(&self) -> Result<Self> {
        let mut cells = Vec::with_capacity(self.cells.len());
        for (i, j, c) in self.iter() {
            let total = c.detected();
            if total <= 0.0 {
                return Err(Error::InsufficientStatistics { i, j });
            }
            cells.push(CellProbs {
                p_e: c.p_e / total,
                p_d: c.p_d / total,
                p_none: 0.0,
            });
        }
        ProbabilityTable::new(self.n_prep, self.n_meas, cells)
    }

    /// Convex combination `Σ wₖ tableₖ`; weights must sum to one.
    pub fn mix<'a>(parts: impl IntoIterator<Item = (f64, &'a ProbabilityTable)>) -> Result<Self> {
        let mut acc: Option<(usize, usize, Vec<CellProbs>)> = None;
        for (w, t) in parts {
            let (n, m, cells) = acc.get_or_insert_with(|| {
                let zero = CellProbs {
                    p_e: 0.0,
                    p_d: 0.0,
                    p_none: 0.0,
                };
                (t.n_prep, t.n_meas, vec![zero; t.cells.len()])
            });
            if (*n, *m) != (t.n_prep, t.n_meas) {
                return Err(Error::Domain(
                    "cannot mix tables of different shapes".into(),
                ));
            }
            for (dst, src) in cells.iter_mut().zip(&t.cells) {
                dst.p_e += w * src.p_e;
                dst.p_d += w * src.p_d;
                dst.p_none += w * src.p_none;
            }
        }
        let (n, m, cells) = acc.ok_or_else(|| Error::Domain("empty mixture".into()))?;
        ProbabilityTable::new(n, m, cells)
    }

    pub fn write_csv<W: io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for (i, j, c) in self.iter() {
            w.serialize(TableRow {
                i,
                j,
                p_e: c.p_e,
                p_d: c.p_d,
                p_none: c.p_none,
            })?;
        }
        w.flush()?;
        Ok(())
    }
}

/// A prepare-and-measure configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScenarioConfig", into = "ScenarioConfig")]
pub struct Scenario {
    alphas: Vec<Phase>,
    betas: Vec<Phase>,
    visibility: f64,
    efficiency: f64,
    fair_sampling: bool,
}

/// On-disk form of [`Scenario`], with phases in units of π.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub alphas_pi: Vec<f64>,
    pub betas_pi: Vec<f64>,
    #[serde(default = "one")]
    pub visibility: f64,
    #[serde(default = "one")]
    pub efficiency: f64,
    #[serde(default)]
    pub fair_sampling: bool,
}

fn one() -> f64 {
    1.0
}

impl TryFrom<ScenarioConfig> for Scenario {
    type Error = Error;

    fn try_from(c: ScenarioConfig) -> Result<Self> {
        Scenario::new(
            c.alphas_pi.into_iter().map(Phase::from_pi).collect(),
            c.betas_pi.into_iter().map(Phase::from_pi).collect(),
            c.visibility,
            c.efficiency,
            c.fair_sampling,
        )
    }
}

impl From<Scenario> for ScenarioConfig {
    fn from(s: Scenario) -> Self {
        ScenarioConfig {
            alphas_pi: s.alphas.iter().map(|a| a.as_pi()).collect(),
            betas_pi: s.betas.iter().map(|b| b.as_pi()).collect(),
            visibility: s.visibility,
            efficiency: s.efficiency,
            fair_sampling: s.fair_sampling,
        }
    }
}

fn check_params(visibility: f64, efficiency: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&visibility) {
        return Err(Error::Domain(format!(
            "visibility {visibility} outside [0, 1]"
        )));
    }
    if !(efficiency > 0.0 && efficiency <= 1.0) {
        return Err(Error::Domain(format!(
            "efficiency {efficiency} outside (0, 1]"
        )));
    }
    Ok(())
}

impl Scenario {
    pub fn new(
        alphas: Vec<Phase>,
        betas: Vec<Phase>,
        visibility: f64,
        efficiency: f64,
        fair_sampling: bool,
    ) -> Result<Self> {
        if alphas.is_empty() || betas.is_empty() {
            return Err(Error::Domain(
                "need at least one preparation and one measurement".into(),
            ));
        }
        check_params(visibility, efficiency)?;
        Ok(Scenario {
            alphas,
            betas,
            visibility,
            efficiency,
            fair_sampling,
        })
    }

    /// Settings of the determinant witness: α ∈ {0, π, −π/2, π/2}, β ∈ {π/2, 0}.
    pub fn witness_matrix_settings() -> Self {
        Scenario::ideal(&[0.0, 1.0, -0.5, 0.5], &[0.5, 0.0])
    }

    /// Settings of the dimension witness: α ∈ {π/4, 3π/4, −π/2}, β ∈ {π/2, 0}.
    pub fn dimension_witness_settings() -> Self {
        Scenario::ideal(&[0.25, 0.75, -0.5], &[0.5, 0.0])
    }

    fn ideal(alphas_pi: &[f64], betas_pi: &[f64]) -> Self {
        Scenario {
            alphas: alphas_pi.iter().copied().map(Phase::from_pi).collect(),
            betas: betas_pi.iter().copied().map(Phase::from_pi).collect(),
            visibility: 1.0,
            efficiency: 1.0,
            fair_sampling: false,
        }
    }

    pub fn with_visibility(mut self, visibility: f64) -> Result<Self> {
        check_params(visibility, self.efficiency)?;
        self.visibility = visibility;
        Ok(self)
    }

    pub fn with_efficiency(mut self, efficiency: f64) -> Result<Self> {
        check_params(self.visibility, efficiency)?;
        self.efficiency = efficiency;
        Ok(self)
    }

    pub fn with_fair_sampling(mut self, on: bool) -> Self {
        self.fair_sampling = on;
        self
    }

    pub fn alphas(&self) -> &[Phase] {
        &self.alphas
    }

    pub fn betas(&self) -> &[Phase] {
        &self.betas
    }

    pub fn visibility(&self) -> f64 {
        self.visibility
    }

    pub fn efficiency(&self) -> f64 {
        self.efficiency
    }

    pub fn fair_sampling(&self) -> bool {
        self.fair_sampling
    }
}

/// Exact probabilities for one setting pair.
pub fn quantum_cell(
    alpha: Phase,
    beta: Phase,
    visibility: f64,
    efficiency: f64,
) -> Result<CellProbs> {
    check_params(visibility, efficiency)?;
    let fringe = visibility * (alpha.radians() - beta.radians()).cos();
    Ok(CellProbs {
        p_e: efficiency * (1.0 + fringe) / 2.0,
        p_d: efficiency * (1.0 - fringe) / 2.0,
        p_none: 1.0 - efficiency,
    })
}

/// Per-trial probabilities including no-clicks, ignoring the fair-sampling flag.
pub fn raw_probability_table(s: &Scenario) -> Result<ProbabilityTable> {
    ProbabilityTable::from_fn(s.alphas.len(), s.betas.len(), |i, j| {
        quantum_cell(s.alphas[i], s.betas[j], s.visibility, s.efficiency)
    })
}

/// The table an analysis sees: raw, or postselected when fair sampling is on.
pub fn probability_table(s: &Scenario) -> Result<ProbabilityTable> {
    let raw = raw_probability_table(s)?;
    if s.fair_sampling {
        raw.postselect()
    } else {
        Ok(raw)
    }
}

/// Same contract as [`probability_table`], with Bob's states prepared by
/// heralding on `pair` instead of directly.
///
/// Visibility mixes Bob's conditional state with white noise,
/// `ρ = V |ψ⟩⟨ψ| + (1 − V) I/2`.
pub fn heralded_table(s: &Scenario, pair: &Ket4) -> Result<ProbabilityTable> {
    let bob_states: Vec<Ket2> = s
        .alphas
        .iter()
        .map(|&a| prepare_remote(pair, a).map(|(_, k)| k))
        .collect::<Result<_>>()?;
    let (v, eta) = (s.visibility, s.efficiency);
    let raw = ProbabilityTable::from_fn(s.alphas.len(), s.betas.len(), |i, j| {
        let plus = phase_ket(s.betas[j]);
        let minus = phase_ket(s.betas[j].shifted(std::f64::consts::PI));
        let bob = &bob_states[i];
        Ok(CellProbs {
            p_e: eta * (v * born(bob, &plus) + (1.0 - v) / 2.0),
            p_d: eta * (v * born(bob, &minus) + (1.0 - v) / 2.0),
            p_none: 1.0 - eta,
        })
    })?;
    if s.fair_sampling {
        raw.postselect()
    } else {
        Ok(raw)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4, PI, SQRT_2};

    const TOL: f64 = 1e-12;

    fn assert_tables_close(a: &ProbabilityTable, b: &ProbabilityTable) {
        assert_eq!((a.n_prep(), a.n_meas()), (b.n_prep(), b.n_meas()));
        for (x, y) in a.cells().iter().zip(b.cells()) {
            assert!((x.p_e - y.p_e).abs() < TOL, "{x:?} vs {y:?}");
            assert!((x.p_d - y.p_d).abs() < TOL, "{x:?} vs {y:?}");
            assert!((x.p_none - y.p_none).abs() < TOL, "{x:?} vs {y:?}");
        }
    }

    #[test]
    fn aligned_phases_always_give_e() {
        let c = quantum_cell(Phase::new(0.0), Phase::new(0.0), 1.0, 1.0).unwrap();
        assert!((c.p_e - 1.0).abs() < TOL && c.p_d.abs() < TOL && c.p_none.abs() < TOL);
    }

    #[test]
    fn cell_correlator_matches_born_rule() {
        let (a, b) = (Phase::new(FRAC_PI_4), Phase::new(FRAC_PI_2));
        let c = quantum_cell(a, b, 1.0, 1.0).unwrap();
        let oracle =
            born(&phase_ket(a), &phase_ket(b)) - born(&phase_ket(a), &phase_ket(b.shifted(PI)));
        assert!((c.correlator() - oracle).abs() < TOL);
        assert!((c.correlator() - std::f64::consts::FRAC_1_SQRT_2).abs() < TOL);
    }

    #[test]
    fn opposite_phases_always_give_d() {
        let c = quantum_cell(Phase::new(-FRAC_PI_2), Phase::new(FRAC_PI_2), 1.0, 1.0).unwrap();
        assert!(c.p_e.abs() < TOL && (c.p_d - 1.0).abs() < TOL);
    }

    #[test]
    fn cell_rejects_bad_parameters() {
        let z = Phase::new(0.0);
        assert!(quantum_cell(z, z, 1.1, 1.0).is_err());
        assert!(quantum_cell(z, z, -0.1, 1.0).is_err());
        assert!(quantum_cell(z, z, 1.0, 0.0).is_err());
        assert!(quantum_cell(z, z, 1.0, 1.5).is_err());
        assert!(Scenario::new(vec![], vec![z], 1.0, 1.0, false).is_err());
    }

    #[test]
    fn zero_visibility_washes_out_fringes() {
        let s = Scenario::witness_matrix_settings()
            .with_visibility(0.0)
            .unwrap()
            .with_efficiency(0.4)
            .unwrap();
        for c in probability_table(&s).unwrap().cells() {
            assert!((c.p_e - 0.2).abs() < TOL && (c.p_d - 0.2).abs() < TOL);
        }
    }

    #[test]
    fn dimension_witness_correlators() {
        let s = Scenario::dimension_witness_settings().with_fair_sampling(true);
        let t = probability_table(&s).unwrap();
        let d = |i, j| t.get(i, j).unwrap().correlator();
        let h = FRAC_1_SQRT_2;
        let want = [(0, 0, h), (0, 1, h), (1, 0, h), (1, 1, -h), (2, 0, -1.0)];
        for (i, j, v) in want {
            assert!((d(i, j) - v).abs() < TOL, "⟨D_{i}{j}⟩ = {}", d(i, j));
        }
        let sum = d(0, 0) + d(0, 1) + d(1, 0) - d(1, 1) - d(2, 0);
        assert!((sum - (1.0 + 2.0 * SQRT_2)).abs() < TOL);
    }

    #[test]
    fn fair_sampling_is_efficiency_independent() {
        let base = Scenario::witness_matrix_settings()
            .with_visibility(0.9)
            .unwrap();
        let a = probability_table(&base.clone().with_fair_sampling(true)).unwrap();
        let b = probability_table(&base.with_efficiency(0.3).unwrap().with_fair_sampling(true))
            .unwrap();
        assert_tables_close(&a, &b);
        assert!(a.cells().iter().all(|c| c.p_none == 0.0));
    }

    #[test]
    fn heralded_phi_plus_equals_direct() {
        for s in [
            Scenario::witness_matrix_settings(),
            Scenario::dimension_witness_settings(),
        ] {
            let s = s
                .with_visibility(0.8)
                .unwrap()
                .with_efficiency(0.6)
                .unwrap();
            assert_tables_close(
                &heralded_table(&s, &Ket4::phi_plus()).unwrap(),
                &probability_table(&s).unwrap(),
            );
        }
    }

    #[test]
    fn heralded_product_state_gives_no_interference() {
        let s = Scenario::witness_matrix_settings()
            .with_efficiency(0.7)
            .unwrap();
        let pair = Ket4::product(&Ket2::H, &Ket2::H);
        for c in heralded_table(&s, &pair).unwrap().cells() {
            assert!((c.p_e - 0.35).abs() < TOL && (c.p_d - 0.35).abs() < TOL);
        }
    }

    #[test]
    fn heralded_zero_branch_propagates() {
        // Alice already in |+⟩: the "−" herald needed for α = π never fires.
        let pair = Ket4::product(&phase_ket(Phase::new(0.0)), &Ket2::H);
        let err = heralded_table(&Scenario::witness_matrix_settings(), &pair).unwrap_err();
        assert!(matches!(err, Error::ZeroProbabilityBranch(_)));
    }

    #[test]
    fn config_round_trip() {
        let json = r#"{"alphas_pi":[0,1,-0.5,0.5],"betas_pi":[0.5,0],"visibility":0.9,"efficiency":0.5,"fair_sampling":true}"#;
        let s: Scenario = serde_json::from_str(json).unwrap();
        assert_eq!(s.alphas().len(), 4);
        assert!((s.alphas()[2].radians() + FRAC_PI_2).abs() < TOL);
        let back: Scenario = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_tables_close(
            &probability_table(&s).unwrap(),
            &probability_table(&back).unwrap(),
        );

        let bad = r#"{"alphas_pi":[0],"betas_pi":[0],"visibility":2}"#;
        assert!(serde_json::from_str::<Scenario>(bad).is_err());
    }

    #[test]
    fn postselect_rejects_empty_cells() {
        let c = CellProbs {
            p_e: 0.0,
            p_d: 0.0,
            p_none: 1.0,
        };
        let t = ProbabilityTable::new(1, 1, vec![c]).unwrap();
        assert!(matches!(
            t.postselect(),
            Err(Error::InsufficientStatistics { i: 0, j: 0 })
        ));
    }

    proptest! {
        #[test]
        fn cells_are_distributions_and_correlator_is_analytic(
            alpha in -PI..PI, beta in -PI..PI, v in 0.0f64..=1.0, eta in 0.01f64..=1.0,
        ) {
            let (a, b) = (Phase::new(alpha), Phase::new(beta));
            let c = quantum_cell(a, b, v, eta).unwrap();
            prop_assert!([c.p_e, c.p_d, c.p_none].iter().all(|p| (-TOL..=1.0 + TOL).contains(p)));
            prop_assert!((c.p_e + c.p_d + c.p_none - 1.0).abs() < TOL);
            let born_route = born(&phase_ket(a), &phase_ket(b)) - born(&phase_ket(a), &phase_ket(b.shifted(PI)));
            prop_assert!((c.correlator() - eta * v * born_route).abs() < TOL);
        }
    }
}
