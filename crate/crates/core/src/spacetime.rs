//! Lab-frame causality checks on an experiment's event schedule.
//!
//! Positions are in meters, times in nanoseconds. The five conditions:
//!
//! | id | condition |
//! |----|-----------|
//! | C1 | `bob_choice` space-like from `alice_choice` and from `alice_measurement` |
//! | C2 | `alice_measurement` space-like from `bob_measurement` |
//! | C3 | `alice_choice` and `bob_choice` space-like from `pair_emission` |
//! | C4 | Bob's basis is chosen after Alice's: `t(alice_choice) < t(bob_choice)` |
//! | C5 | each measurement happens no earlier than the photon can arrive through its fiber |
//!
//! Fiber links are named `source_alice` and `source_bob`. A link without a
//! length falls back to the straight-line distance; a link without a speed
//! uses [`DEFAULT_FIBER_SPEED`].

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// `c` in meters per nanosecond.
pub const SPEED_OF_LIGHT_M_PER_NS: f64 = 0.299_792_458;

/// Relative tolerance on the interval below which events count as light-like.
pub const LIGHTLIKE_REL_TOL: f64 = 1e-6;

/// Signal speed in standard single-mode fiber, as a fraction of `c`.
pub const DEFAULT_FIBER_SPEED: f64 = 0.68;

pub const PAIR_EMISSION: &str = "pair_emission";
pub const ALICE_CHOICE: &str = "alice_choice";
pub const ALICE_MEASUREMENT: &str = "alice_measurement";
pub const BOB_CHOICE: &str = "bob_choice";
pub const BOB_MEASUREMENT: &str = "bob_measurement";
pub const LINK_ALICE: &str = "source_alice";
pub const LINK_BOB: &str = "source_bob";

const REQUIRED: [&str; 5] = [
    PAIR_EMISSION,
    ALICE_CHOICE,
    ALICE_MEASUREMENT,
    BOB_CHOICE,
    BOB_MEASUREMENT,
];

const LAB_GEOMETRY: &str = include_str!("../fixtures/lab_geometry.json");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub label: String,
    #[serde(rename = "xyz")]
    pub position: [f64; 3],
    #[serde(rename = "t_ns")]
    pub time_ns: f64,
}

impl Event {
    pub fn new(label: impl Into<String>, position: [f64; 3], time_ns: f64) -> Self {
        Event {
            label: label.into(),
            position,
            time_ns,
        }
    }

    fn distance_m(&self, other: &Event) -> f64 {
        self.position
            .iter()
            .zip(&other.position)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Separation {
    SpaceLike,
    TimeLike,
    LightLike,
}

impl fmt::Display for Separation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Separation::SpaceLike => "space-like",
            Separation::TimeLike => "time-like",
            Separation::LightLike => "light-like",
        })
    }
}

/// `c²Δt² − |Δx|²` in m².
pub fn interval_m2(a: &Event, b: &Event) -> f64 {
    let ct = SPEED_OF_LIGHT_M_PER_NS * (a.time_ns - b.time_ns);
    let dx = a.distance_m(b);
    ct * ct - dx * dx
}

pub fn interval(a: &Event, b: &Event) -> Separation {
    let ct = SPEED_OF_LIGHT_M_PER_NS * (a.time_ns - b.time_ns);
    let dx = a.distance_m(b);
    let s2 = ct * ct - dx * dx;
    if s2.abs() <= LIGHTLIKE_REL_TOL * (ct * ct + dx * dx) {
        Separation::LightLike
    } else if s2 > 0.0 {
        Separation::TimeLike
    } else {
        Separation::SpaceLike
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSchedule", into = "RawSchedule")]
pub struct Schedule {
    events: Vec<Event>,
    fibers: BTreeMap<String, f64>,
    media: BTreeMap<String, f64>,
    note: Option<String>,
}

#[derive(Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSchedule {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    note: Option<String>,
    events: Vec<Event>,
    /// Fiber lengths in meters.
    #[serde(default)]
    fibers: BTreeMap<String, f64>,
    /// Signal speeds as fractions of `c`.
    #[serde(default)]
    media: BTreeMap<String, f64>,
}

impl TryFrom<RawSchedule> for Schedule {
    type Error = Error;

    fn try_from(r: RawSchedule) -> Result<Self> {
        Schedule::new(r.events, r.fibers, r.media).map(|mut s| {
            s.note = r.note;
            s
        })
    }
}

impl From<Schedule> for RawSchedule {
    fn from(s: Schedule) -> Self {
        RawSchedule {
            note: s.note,
            events: s.events,
            fibers: s.fibers,
            media: s.media,
        }
    }
}

impl Schedule {
    pub fn new(
        events: Vec<Event>,
        fibers: BTreeMap<String, f64>,
        media: BTreeMap<String, f64>,
    ) -> Result<Self> {
        for (k, e) in events.iter().enumerate() {
            if e.position
                .iter()
                .chain([&e.time_ns])
                .any(|x| !x.is_finite())
            {
                return Err(Error::InvalidSchedule(format!(
                    "event `{}` has non-finite coordinates",
                    e.label
                )));
            }
            if events[..k].iter().any(|o| o.label == e.label) {
                return Err(Error::InvalidSchedule(format!(
                    "duplicate event `{}`",
                    e.label
                )));
            }
        }
        if let Some((name, v)) = media.iter().find(|(_, &v)| !(v > 0.0 && v <= 1.0)) {
            return Err(Error::InvalidSchedule(format!(
                "speed {v} of `{name}` outside (0, 1]"
            )));
        }
        if let Some((name, l)) = fibers.iter().find(|(_, &l)| !(l.is_finite() && l >= 0.0)) {
            return Err(Error::InvalidSchedule(format!(
                "fiber `{name}` has invalid length {l}"
            )));
        }
        let schedule = Schedule {
            events,
            fibers,
            media,
            note: None,
        };
        for label in REQUIRED {
            schedule.event(label)?;
        }
        Ok(schedule)
    }

    /// The bundled feasible timing on the 46 m / 28 m / 33 m geometry.
    pub fn lab_geometry() -> Self {
        serde_json::from_str(LAB_GEOMETRY).expect("bundled fixture is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn event(&self, label: &str) -> Result<&Event> {
        self.events
            .iter()
            .find(|e| e.label == label)
            .ok_or_else(|| Error::MissingEvent(label.to_string()))
    }

    pub fn event_mut(&mut self, label: &str) -> Result<&mut Event> {
        self.events
            .iter_mut()
            .find(|e| e.label == label)
            .ok_or_else(|| Error::MissingEvent(label.to_string()))
    }

    /// Earliest arrival delay through `link` from the source to `endpoint`, ns.
    fn transit_ns(&self, link: &str, endpoint: &Event) -> Result<f64> {
        let length = match self.fibers.get(link) {
            Some(&l) => l,
            None => self.event(PAIR_EMISSION)?.distance_m(endpoint),
        };
        let speed = self.media.get(link).copied().unwrap_or(DEFAULT_FIBER_SPEED);
        Ok(length / (speed * SPEED_OF_LIGHT_M_PER_NS))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionCheck {
    pub id: String,
    pub description: String,
    pub passed: bool,
    /// Slack in ns; negative when violated.
    pub margin_ns: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub conditions: Vec<ConditionCheck>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.conditions.iter().all(|c| c.passed)
    }

    pub fn condition(&self, id: &str) -> Option<&ConditionCheck> {
        self.conditions.iter().find(|c| c.id == id)
    }
}

/// Slack before `a` and `b` would become causally connected, ns.
fn spacelike_margin(a: &Event, b: &Event) -> f64 {
    a.distance_m(b) / SPEED_OF_LIGHT_M_PER_NS - (a.time_ns - b.time_ns).abs()
}

fn spacelike_check(id: &str, description: &str, pairs: &[(&Event, &Event)]) -> ConditionCheck {
    ConditionCheck {
        id: id.into(),
        description: description.into(),
        passed: pairs
            .iter()
            .all(|(a, b)| interval(a, b) == Separation::SpaceLike),
        margin_ns: pairs
            .iter()
            .map(|(a, b)| spacelike_margin(a, b))
            .fold(f64::INFINITY, f64::min),
    }
}

pub fn validate(s: &Schedule) -> Result<ValidationReport> {
    let emission = s.event(PAIR_EMISSION)?;
    let a_choice = s.event(ALICE_CHOICE)?;
    let a_meas = s.event(ALICE_MEASUREMENT)?;
    let b_choice = s.event(BOB_CHOICE)?;
    let b_meas = s.event(BOB_MEASUREMENT)?;

    let ordering = b_choice.time_ns - a_choice.time_ns;
    let arrival = (a_meas.time_ns - emission.time_ns - s.transit_ns(LINK_ALICE, a_meas)?)
        .min(b_meas.time_ns - emission.time_ns - s.transit_ns(LINK_BOB, b_meas)?);

    Ok(ValidationReport {
        conditions: vec![
            spacelike_check(
                "C1",
                "Bob's setting choice is space-like from Alice's choice and measurement",
                &[(b_choice, a_choice), (b_choice, a_meas)],
            ),
            spacelike_check(
                "C2",
                "Alice's and Bob's measurements are space-like separated",
                &[(a_meas, b_meas)],
            ),
            spacelike_check(
                "C3",
                "both setting choices are outside the light cone of the pair emission",
                &[(a_choice, emission), (b_choice, emission)],
            ),
            ConditionCheck {
                id: "C4".into(),
                description: "Bob's basis is chosen after Alice's (delayed choice)".into(),
                passed: ordering > 0.0,
                margin_ns: ordering,
            },
            ConditionCheck {
                id: "C5".into(),
                description:
                    "each measurement happens after its photon can arrive through the fiber".into(),
                passed: arrival >= 0.0,
                margin_ns: arrival,
            },
        ],
    })
}
