//! Mission data model, the survey-plan builder and the `QGC WPL 110`
//! waypoint file format.

mod wpl;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::Trajectory;
use crate::geo::{pixel_to_geo, GeoPoint, GeoReference, PixelPoint};

pub use self::wpl::{parse_wpl, parse_wpl_with, serialize_wpl, ParseOptions, WPL_HEADER};

/// Coordinate frame: absolute altitude.
pub const FRAME_GLOBAL: u8 = 0;
/// Coordinate frame: altitude relative to home.
pub const FRAME_GLOBAL_RELATIVE_ALT: u8 = 3;

/// Fraction of the image size, from the top-left corner, at which the home
/// position sits.
pub const HOME_FRACTION: f64 = 0.10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MissionError {
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("line {line}: unsupported waypoint file version '{found}', expected '{WPL_HEADER}'")]
    UnsupportedVersion { line: usize, found: String },
    #[error("line {line}: expected {expected} tab-separated columns, found {found}")]
    ColumnCount {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: sequence gap, expected seq {expected} but found {found}")]
    SequenceGap {
        line: usize,
        expected: u32,
        found: u32,
    },
    #[error("line {line}: unknown command code {code}")]
    UnknownCommand { line: usize, code: u16 },
    #[error("invalid mission: {0}")]
    Invalid(#[from] PlanViolation),
    #[error("mission has no targets")]
    EmptyMission,
    #[error("altitude must be positive and finite, got {0}")]
    InvalidAltitude(f64),
}

/// A broken mission-plan invariant.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanViolation {
    #[error("plan has no items")]
    NoItems,
    #[error("item {index} has seq {seq}, sequence numbers must run 0..n-1")]
    NonContiguousSeq { index: usize, seq: u32 },
    #[error("item 0 must be the home position")]
    FirstNotHome,
    #[error("home pseudo-item found at seq {seq}, only seq 0 may be home")]
    HomeMisplaced { seq: u32 },
    #[error("exactly the first item must be marked current (seq {seq} violates this)")]
    CurrentFlag { seq: u32 },
    #[error("seq {seq} has negative or non-finite altitude")]
    BadAltitude { seq: u32 },
    #[error("waypoint at seq {seq} precedes any takeoff")]
    WaypointBeforeTakeoff { seq: u32 },
    #[error("plan must end with LAND (optionally preceded by RETURN_TO_LAUNCH)")]
    MissingLand,
}

/// Base action vocabulary, numbered as in the MAVLink common command set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ActionKind {
    /// Seq-0 pseudo-item carrying the home position, encoded as command 16.
    Home,
    Takeoff,
    Waypoint,
    ReturnToLaunch,
    Land,
    /// Unrecognised command kept verbatim by lenient parsing; treated like a
    /// waypoint.
    Other(u16),
}

impl ActionKind {
    pub const NAV_WAYPOINT: u16 = 16;
    pub const NAV_RETURN_TO_LAUNCH: u16 = 20;
    pub const NAV_LAND: u16 = 21;
    pub const NAV_TAKEOFF: u16 = 22;

    pub fn code(self) -> u16 {
        match self {
            ActionKind::Home | ActionKind::Waypoint => Self::NAV_WAYPOINT,
            ActionKind::ReturnToLaunch => Self::NAV_RETURN_TO_LAUNCH,
            ActionKind::Land => Self::NAV_LAND,
            ActionKind::Takeoff => Self::NAV_TAKEOFF,
            ActionKind::Other(code) => code,
        }
    }

    /// Decodes a command code for an item past seq 0.
    pub fn from_code(code: u16) -> Option<Self> {
        match code {
            Self::NAV_WAYPOINT => Some(ActionKind::Waypoint),
            Self::NAV_RETURN_TO_LAUNCH => Some(ActionKind::ReturnToLaunch),
            Self::NAV_LAND => Some(ActionKind::Land),
            Self::NAV_TAKEOFF => Some(ActionKind::Takeoff),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ActionKind::Home => "HOME",
            ActionKind::Takeoff => "TAKEOFF",
            ActionKind::Waypoint => "WAYPOINT",
            ActionKind::ReturnToLaunch => "RETURN_TO_LAUNCH",
            ActionKind::Land => "LAND",
            ActionKind::Other(_) => "OTHER",
        }
    }
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActionKind::Other(code) => write!(f, "OTHER({code})"),
            kind => f.write_str(kind.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionItem {
    pub seq: u32,
    pub is_current: bool,
    pub frame: u8,
    pub command: ActionKind,
    pub params: [f64; 4],
    pub position: GeoPoint,
    /// Meters; relative to home in frame 3.
    pub altitude_m: f64,
}

impl MissionItem {
    fn new(seq: u32, command: ActionKind, position: GeoPoint, altitude_m: f64) -> Self {
        Self {
            seq,
            is_current: seq == 0,
            frame: if command == ActionKind::Home {
                FRAME_GLOBAL
            } else {
                FRAME_GLOBAL_RELATIVE_ALT
            },
            command,
            params: [0.0; 4],
            position,
            altitude_m,
        }
    }

    // Ground stations write 0/0 for commands that act at the current position.
    fn has_position(&self) -> bool {
        !(self.position.lat == 0.0 && self.position.lon == 0.0)
    }
}

/// Ordered list of mission items whose first entry is the home position.
///
/// Construction guarantees a non-empty list with contiguous sequence numbers
/// and a home item at seq 0; [`MissionPlan::validate`] checks the remaining
/// flight invariants.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MissionPlan {
    items: Vec<MissionItem>,
}

impl MissionPlan {
    pub fn from_items(items: Vec<MissionItem>) -> Result<Self, PlanViolation> {
        if items.is_empty() {
            return Err(PlanViolation::NoItems);
        }
        for (index, item) in items.iter().enumerate() {
            if item.seq as usize != index {
                return Err(PlanViolation::NonContiguousSeq {
                    index,
                    seq: item.seq,
                });
            }
            if index > 0 && item.command == ActionKind::Home {
                return Err(PlanViolation::HomeMisplaced { seq: item.seq });
            }
        }
        if items[0].command != ActionKind::Home {
            return Err(PlanViolation::FirstNotHome);
        }
        Ok(Self { items })
    }

    /// Plan holding nothing but the home position.
    pub fn home_only(home: GeoPoint) -> Self {
        Self {
            items: vec![MissionItem::new(0, ActionKind::Home, home, 0.0)],
        }
    }

    pub fn items(&self) -> &[MissionItem] {
        &self.items
    }

    pub fn into_items(self) -> Vec<MissionItem> {
        self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn home(&self) -> GeoPoint {
        self.items[0].position
    }

    pub fn count(&self, kind: ActionKind) -> usize {
        self.items.iter().filter(|i| i.command == kind).count()
    }

    /// Checks the invariants of a flyable mission: only the first item is
    /// current, altitudes are non-negative, a TAKEOFF precedes every
    /// WAYPOINT, and the plan ends with LAND, optionally after
    /// RETURN_TO_LAUNCH.
    pub fn validate(&self) -> Result<(), PlanViolation> {
        let mut took_off = false;
        for item in &self.items {
            if item.is_current != (item.seq == 0) {
                return Err(PlanViolation::CurrentFlag { seq: item.seq });
            }
            if !(item.altitude_m.is_finite() && item.altitude_m >= 0.0) {
                return Err(PlanViolation::BadAltitude { seq: item.seq });
            }
            match item.command {
                ActionKind::Takeoff => took_off = true,
                ActionKind::Waypoint | ActionKind::Other(_) if !took_off => {
                    return Err(PlanViolation::WaypointBeforeTakeoff { seq: item.seq })
                }
                _ => {}
            }
        }
        match self.items.last().map(|i| i.command) {
            Some(ActionKind::Land) => Ok(()),
            _ => Err(PlanViolation::MissingLand),
        }
    }
}

/// Home position: the point 10% of the width and height in from the
/// top-left image corner.
pub fn make_home(reference: &GeoReference) -> GeoPoint {
    let p = PixelPoint {
        x: HOME_FRACTION * f64::from(reference.width_px()),
        y: HOME_FRACTION * f64::from(reference.height_px()),
    };
    pixel_to_geo(p, reference).expect("home pixel lies inside every reference")
}

/// HOME, TAKEOFF at home, one WAYPOINT per target in the given order,
/// RETURN_TO_LAUNCH, LAND.
pub fn build_survey_plan(
    targets: &[GeoPoint],
    home: GeoPoint,
    altitude_m: f64,
) -> Result<MissionPlan, MissionError> {
    if targets.is_empty() {
        return Err(MissionError::EmptyMission);
    }
    if !(altitude_m.is_finite() && altitude_m > 0.0) {
        return Err(MissionError::InvalidAltitude(altitude_m));
    }
    let mut items = Vec::with_capacity(targets.len() + 4);
    items.push(MissionItem::new(0, ActionKind::Home, home, 0.0));
    items.push(MissionItem::new(1, ActionKind::Takeoff, home, altitude_m));
    for &target in targets {
        let seq = items.len() as u32;
        items.push(MissionItem::new(
            seq,
            ActionKind::Waypoint,
            target,
            altitude_m,
        ));
    }
    let seq = items.len() as u32;
    items.push(MissionItem::new(
        seq,
        ActionKind::ReturnToLaunch,
        GeoPoint { lat: 0.0, lon: 0.0 },
        0.0,
    ));
    items.push(MissionItem::new(
        seq + 1,
        ActionKind::Land,
        GeoPoint { lat: 0.0, lon: 0.0 },
        0.0,
    ));
    let plan = MissionPlan::from_items(items)?;
    plan.validate()?;
    Ok(plan)
}

/// Ground track of a plan: home, the takeoff point when it carries one,
/// every waypoint, and home again for RETURN_TO_LAUNCH. LAND adds nothing.
/// Consecutive repeats are collapsed.
pub fn extract_trajectory(plan: &MissionPlan) -> Trajectory {
    let home = plan.home();
    let mut points = Vec::with_capacity(plan.len());
    for item in plan.items() {
        match item.command {
            ActionKind::Home => points.push(item.position),
            ActionKind::Takeoff => {
                if item.has_position() {
                    points.push(item.position);
                }
            }
            ActionKind::Waypoint | ActionKind::Other(_) => points.push(item.position),
            ActionKind::ReturnToLaunch => points.push(home),
            ActionKind::Land => {}
        }
    }
    Trajectory::collapsing(points).expect("home keeps every trajectory non-empty")
}
