//! One- and two-qubit pure states in the polarization basis.
//!
//! `|H⟩` and `|V⟩` stand for the upper and lower interferometer paths. States
//! are only ever compared through Born statistics; global phases carry no
//! meaning here.
//!
//! # Heralded preparation
//!
//! Alice's electro-optic modulator multiplies the `|V⟩` amplitude of her photon
//! by `e^{iφ_A}` and a polarizing beam splitter then projects it onto
//! `(|H⟩ ± |V⟩)/√2`. For `|Φ⁺⟩ = (|HH⟩ + |VV⟩)/√2` this leaves Bob's photon in
//! `(|H⟩ ± e^{iφ_A}|V⟩)/√2`, each outcome with probability 1/2. A preparation
//! label `α` is realized by the pair (EOM phase, outcome) below; see
//! [`herald_setting`].
//!
//! | EOM phase `φ_A` | outcome | prepared `α` |
//! |-----------------|---------|--------------|
//! | 0               | `+`     | 0            |
//! | 0               | `−`     | π            |
//! | π/2             | `+`     | π/2          |
//! | π/2             | `−`     | −π/2         |
//!
//! Other labels (e.g. π/4, 3π/4) use `φ_A = α mod π` in the same way.

use std::f64::consts::{FRAC_1_SQRT_2, PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Normalization tolerance for constructed states.
pub const NORM_TOL: f64 = 1e-12;

/// Heralding branches below this probability are treated as impossible.
pub const BRANCH_EPS: f64 = 1e-15;

/// A phase shift in radians, stored canonically in `(−π, π]`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(from = "f64", into = "f64")]
pub struct Phase(f64);

impl Phase {
    pub fn new(radians: f64) -> Self {
        let r = radians.rem_euclid(TAU);
        Phase(if r > PI { r - TAU } else { r })
    }

    /// A phase given as a multiple of π, e.g. `from_pi(-0.5)` for `−π/2`.
    pub fn from_pi(multiple: f64) -> Self {
        Phase::new(multiple * PI)
    }

    pub fn radians(self) -> f64 {
        self.0
    }

    pub fn as_pi(self) -> f64 {
        self.0 / PI
    }

    pub fn shifted(self, by: f64) -> Self {
        Phase::new(self.0 + by)
    }
}

impl From<f64> for Phase {
    fn from(radians: f64) -> Self {
        Phase::new(radians)
    }
}

impl From<Phase> for f64 {
    fn from(p: Phase) -> f64 {
        p.0
    }
}

/// Outcome of a measurement in the diagonal basis `(|H⟩ ± |V⟩)/√2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// A normalized single-photon polarization state `a_H|H⟩ + a_V|V⟩`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ket2 {
    h: Complex64,
    v: Complex64,
}

impl Ket2 {
    pub const H: Ket2 = Ket2 {
        h: Complex64::new(1.0, 0.0),
        v: Complex64::new(0.0, 0.0),
    };
    pub const V: Ket2 = Ket2 {
        h: Complex64::new(0.0, 0.0),
        v: Complex64::new(1.0, 0.0),
    };

    /// Builds a state from arbitrary (non-zero) amplitudes, rescaling to unit norm.
    pub fn normalize(h: Complex64, v: Complex64) -> Result<Self> {
        let norm = (h.norm_sqr() + v.norm_sqr()).sqrt();
        if !norm.is_finite() || norm < BRANCH_EPS {
            return Err(Error::Domain(format!(
                "cannot normalize amplitudes ({h}, {v})"
            )));
        }
        Ok(Ket2 {
            h: h / norm,
            v: v / norm,
        })
    }

    pub fn h(&self) -> Complex64 {
        self.h
    }

    pub fn v(&self) -> Complex64 {
        self.v
    }

    pub fn norm_sqr(&self) -> f64 {
        self.h.norm_sqr() + self.v.norm_sqr()
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &Ket2) -> Complex64 {
        self.h.conj() * other.h + self.v.conj() * other.v
    }

    /// The state orthogonal to `self` (up to global phase).
    pub fn orthogonal(&self) -> Ket2 {
        Ket2 {
            h: -self.v.conj(),
            v: self.h.conj(),
        }
    }
}

/// `(|H⟩ + e^{iφ}|V⟩)/√2`
pub fn phase_ket(phi: Phase) -> Ket2 {
    Ket2 {
        h: Complex64::new(FRAC_1_SQRT_2, 0.0),
        v: Complex64::from_polar(FRAC_1_SQRT_2, phi.radians()),
    }
}

/// Probability of finding `state` in `basis_ket`, `|⟨basis|state⟩|²`.
pub fn born(state: &Ket2, basis_ket: &Ket2) -> f64 {
    basis_ket.inner(state).norm_sqr().clamp(0.0, 1.0)
}

/// A normalized two-photon state, Alice's photon first.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ket4 {
    /// Amplitudes for HH, HV, VH, VV.
    amps: [Complex64; 4],
}

impl Ket4 {
    pub const HH: usize = 0;
    pub const HV: usize = 1;
    pub const VH: usize = 2;
    pub const VV: usize = 3;

    pub fn normalize(amps: [Complex64; 4]) -> Result<Self> {
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !norm.is_finite() || norm < BRANCH_EPS {
            return Err(Error::Domain(
                "cannot normalize a zero two-photon state".into(),
            ));
        }
        Ok(Ket4 {
            amps: amps.map(|a| a / norm),
        })
    }

    /// `(|HH⟩ + |VV⟩)/√2`
    pub fn phi_plus() -> Self {
        let s = Complex64::new(FRAC_1_SQRT_2, 0.0);
        let z = Complex64::new(0.0, 0.0);
        Ket4 { amps: [s, z, z, s] }
    }

    /// `(|HV⟩ + |VH⟩)/√2`, what the source emits before the half-wave plate.
    pub fn psi_plus() -> Self {
        let s = Complex64::new(FRAC_1_SQRT_2, 0.0);
        let z = Complex64::new(0.0, 0.0);
        Ket4 { amps: [z, s, s, z] }
    }

    pub fn product(alice: &Ket2, bob: &Ket2) -> Self {
        Ket4 {
            amps: [
                alice.h * bob.h,
                alice.h * bob.v,
                alice.v * bob.h,
                alice.v * bob.v,
            ],
        }
    }

    pub fn amplitudes(&self) -> [Complex64; 4] {
        self.amps
    }

    /// A half-wave plate on Bob's photon swapping `|H⟩ ↔ |V⟩`.
    pub fn flip_bob(&self) -> Self {
        let [hh, hv, vh, vv] = self.amps;
        Ket4 {
            amps: [hv, hh, vv, vh],
        }
    }
}

/// Heralds Bob's photon by a measurement on Alice's.
///
/// Alice's `|V⟩` component is phase-shifted by `alice_phase`, then her photon is
/// projected onto `(|H⟩ ± |V⟩)/√2`. Returns the probability of `alice_outcome`
/// and Bob's normalized conditional state.
pub fn herald(pair: &Ket4, alice_phase: Phase, alice_outcome: Sign) -> Result<(f64, Ket2)> {
    let shift = Complex64::from_polar(1.0, alice_phase.radians());
    let s = alice_outcome.factor();
    let [hh, hv, vh, vv] = pair.amps;
    // ⟨±|_A applied to the phase-shifted pair
    let bob_h = (hh + s * shift * vh) * FRAC_1_SQRT_2;
    let bob_v = (hv + s * shift * vv) * FRAC_1_SQRT_2;
    let p = bob_h.norm_sqr() + bob_v.norm_sqr();
    if p < BRANCH_EPS {
        return Err(Error::ZeroProbabilityBranch(p));
    }
    let norm = p.sqrt();
    Ok((
        p,
        Ket2 {
            h: bob_h / norm,
            v: bob_v / norm,
        },
    ))
}

/// The (EOM phase, outcome) pair that realizes preparation label `alpha`.
pub fn herald_setting(alpha: Phase) -> (Phase, Sign) {
    let a = alpha.radians();
    let eom = a.rem_euclid(PI);
    let half_turns = ((a - eom) / PI).round() as i64;
    let sign = if half_turns.rem_euclid(2) == 0 {
        Sign::Plus
    } else {
        Sign::Minus
    };
    (Phase::new(eom), sign)
}

/// Heralds the branch labelled `alpha` per [`herald_setting`].
pub fn prepare_remote(pair: &Ket4, alpha: Phase) -> Result<(f64, Ket2)> {
    let (eom, sign) = herald_setting(alpha);
    herald(pair, eom, sign)
}
