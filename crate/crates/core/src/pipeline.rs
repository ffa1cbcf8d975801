//! Instruction to mission: goal extraction, object pointing, georeferencing
//! and action generation, chained in that order.

use std::fmt;
use std::fs;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{haversine_m, pixel_to_geo, GeoError, GeoPoint, GeoReference};
use crate::mission::{
    build_survey_plan, make_home, parse_wpl, ActionKind, MissionError, MissionPlan, WPL_HEADER,
};
use crate::models::{
    extract_goals, language_model, locate_objects, pointing_model, ChatPrompt, ChatTask, GoalSet,
    GroundedPoints, Instruction, LanguageModel, ModelError, PointingModel, ProviderConfig,
};

/// Default flight altitude in meters.
pub const DEFAULT_ALTITUDE_M: f64 = 100.0;

/// Maximum coordinate difference, in degrees, for an LLM-written waypoint to
/// count as one of the requested targets. Waypoint files keep eight
/// decimals.
pub const WAYPOINT_MATCH_TOLERANCE_DEG: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Input,
    Goals,
    Grounding,
    Georeference,
    Actions,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Input => "input",
            Stage::Goals => "goals",
            Stage::Grounding => "grounding",
            Stage::Georeference => "georeference",
            Stage::Actions => "actions",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error("invalid request: {0}")]
    Input(String),
    #[error("{stage} stage failed: {source}")]
    Model {
        stage: Stage,
        #[source]
        source: ModelError,
    },
    #[error("georeference stage failed: {0}")]
    Georeference(#[from] GeoError),
    #[error("no objects were found, refusing to emit an empty mission")]
    EmptyMission,
    #[error("action generation produced an unusable waypoint file: {source}")]
    ActionGeneration {
        #[source]
        source: MissionError,
        raw: String,
    },
    #[error("generated plan rejected: {reason}")]
    RejectedPlan { reason: String, raw: String },
}

impl PipelineError {
    pub fn stage(&self) -> Stage {
        match self {
            PipelineError::Input(_) => Stage::Input,
            PipelineError::Model { stage, .. } => *stage,
            PipelineError::Georeference(_) => Stage::Georeference,
            PipelineError::EmptyMission
            | PipelineError::ActionGeneration { .. }
            | PipelineError::RejectedPlan { .. } => Stage::Actions,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionMode {
    /// TAKEOFF, nearest-neighbor ordered WAYPOINTs, RTL, LAND.
    #[default]
    Template,
    /// Ask a language model for the waypoint file, then validate it.
    Llm,
}

#[derive(Debug, Clone)]
pub struct MissionRequest {
    pub instruction: Instruction,
    pub image_path: PathBuf,
    pub reference: GeoReference,
    pub altitude_m: f64,
    pub goal_provider: ProviderConfig,
    pub grounding_provider: ProviderConfig,
    pub action_provider: ProviderConfig,
    pub action_mode: ActionMode,
}

impl MissionRequest {
    /// Request served entirely by the mock provider at the default altitude.
    pub fn with_mocks(
        instruction: Instruction,
        image_path: impl Into<PathBuf>,
        reference: GeoReference,
    ) -> Self {
        Self {
            instruction,
            image_path: image_path.into(),
            reference,
            altitude_m: DEFAULT_ALTITUDE_M,
            goal_provider: ProviderConfig::mock(),
            grounding_provider: ProviderConfig::mock(),
            action_provider: ProviderConfig::mock(),
            action_mode: ActionMode::Template,
        }
    }
}

/// Model handles for one or more pipeline runs.
#[derive(Clone)]
pub struct Providers {
    pub goals: Arc<dyn LanguageModel>,
    pub grounding: Arc<dyn PointingModel>,
    pub actions: Arc<dyn LanguageModel>,
}

impl Providers {
    pub fn from_configs(
        goals: &ProviderConfig,
        grounding: &ProviderConfig,
        actions: &ProviderConfig,
    ) -> Result<Self, PipelineError> {
        let model_err = |stage| move |source| PipelineError::Model { stage, source };
        Ok(Self {
            goals: language_model(goals).map_err(model_err(Stage::Goals))?,
            grounding: pointing_model(grounding).map_err(model_err(Stage::Grounding))?,
            actions: language_model(actions).map_err(model_err(Stage::Actions))?,
        })
    }

    pub fn for_request(request: &MissionRequest) -> Result<Self, PipelineError> {
        Self::from_configs(
            &request.goal_provider,
            &request.grounding_provider,
            &request.action_provider,
        )
    }
}

/// Wall-clock time spent per stage, in milliseconds.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub goals_ms: f64,
    pub grounding_ms: f64,
    pub georeference_ms: f64,
    pub actions_ms: f64,
}

/// Everything a run produced, stage by stage.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineTrace {
    pub instruction: Instruction,
    pub goals: GoalSet,
    pub grounded: GroundedPoints,
    /// Geographic position of every in-bounds detection, in detection order.
    pub geo_points: Vec<GeoPoint>,
    pub home: GeoPoint,
    pub action_mode: ActionMode,
    pub plan: MissionPlan,
    pub timings: StageTimings,
}

impl PipelineTrace {
    pub fn to_json(&self) -> serde_json::Result<String> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }

    /// JSON without the timing block; identical across runs with the mock
    /// provider.
    pub fn to_json_without_timings(&self) -> serde_json::Result<String> {
        let mut value = serde_json::to_value(self)?;
        if let Some(map) = value.as_object_mut() {
            map.remove("timings");
        }
        serde_json::to_string_pretty(&value)
    }
}

/// Greedy nearest-neighbor tour from `home` by great-circle distance. Ties
/// go to the point listed first.
pub fn order_waypoints(points: &[GeoPoint], home: GeoPoint) -> Vec<GeoPoint> {
    let mut remaining: Vec<GeoPoint> = points.to_vec();
    let mut ordered = Vec::with_capacity(points.len());
    let mut current = home;
    while !remaining.is_empty() {
        let mut best = 0;
        let mut best_d = haversine_m(current, remaining[0]);
        for (i, &p) in remaining.iter().enumerate().skip(1) {
            let d = haversine_m(current, p);
            if d < best_d {
                best = i;
                best_d = d;
            }
        }
        current = remaining.remove(best);
        ordered.push(current);
    }
    ordered
}

/// Deterministic plan: targets ordered by [`order_waypoints`], then
/// [`build_survey_plan`].
pub fn template_plan(
    points: &[GeoPoint],
    home: GeoPoint,
    altitude_m: f64,
) -> Result<MissionPlan, MissionError> {
    build_survey_plan(&order_waypoints(points, home), home, altitude_m)
}

pub fn action_prompt(points: &[GeoPoint], home: GeoPoint, altitude_m: f64) -> ChatPrompt<'_> {
    let mut user = format!(
        "Action vocabulary (MAVLink command codes): HOME pseudo-item at seq 0 = 16, TAKEOFF = 22, \
WAYPOINT = 16, RETURN_TO_LAUNCH = 20, LAND = 21.\n\
File grammar: first line `{WPL_HEADER}`, then one line per item with 12 tab-separated columns \
`seq current frame command param1 param2 param3 param4 latitude longitude altitude autocontinue`. \
seq runs from 0 without gaps; only seq 0 has current = 1; seq 0 uses frame 0, all others frame 3; \
latitude and longitude have 8 decimals, every other number 6; autocontinue is 1.\n\
Home: {:.8}, {:.8}\n\
Altitude: {altitude_m:.1} m above home for takeoff and every waypoint.\n\
Targets (latitude, longitude):\n",
        home.lat, home.lon
    );
    for (i, p) in points.iter().enumerate() {
        user.push_str(&format!("{}. {:.8}, {:.8}\n", i + 1, p.lat, p.lon));
    }
    user.push_str(
        "Take off at home, fly to every target exactly once in an efficient order, \
return to launch, and land.",
    );
    ChatPrompt {
        system: "You plan UAV missions. Reply with the waypoint file only, without commentary or code fences."
            .to_string(),
        user,
        task: ChatTask::Actions {
            points,
            home,
            altitude_m,
        },
    }
}

fn strip_code_fence(raw: &str) -> &str {
    let trimmed = raw.trim();
    match trimmed.strip_prefix("```") {
        Some(rest) => {
            let body = rest.split_once('\n').map_or("", |(_, b)| b);
            body.trim_end().strip_suffix("```").unwrap_or(body).trim()
        }
        None => trimmed,
    }
}

fn close(a: GeoPoint, b: GeoPoint) -> bool {
    (a.lat - b.lat).abs() <= WAYPOINT_MATCH_TOLERANCE_DEG
        && (a.lon - b.lon).abs() <= WAYPOINT_MATCH_TOLERANCE_DEG
}

/// Checks an externally written plan against the request: flight
/// invariants, home position, and one WAYPOINT per target.
fn check_generated_plan(
    plan: &MissionPlan,
    points: &[GeoPoint],
    home: GeoPoint,
) -> Result<(), String> {
    plan.validate().map_err(|v| v.to_string())?;
    if !close(plan.home(), home) {
        return Err(format!(
            "home {} differs from the required home {}",
            plan.home(),
            home
        ));
    }
    let waypoints: Vec<GeoPoint> = plan
        .items()
        .iter()
        .filter(|i| i.command == ActionKind::Waypoint)
        .map(|i| i.position)
        .collect();
    if waypoints.len() != points.len() {
        return Err(format!(
            "plan has {} waypoints for {} targets",
            waypoints.len(),
            points.len()
        ));
    }
    let mut used = vec![false; waypoints.len()];
    for target in points {
        match (0..waypoints.len()).find(|&i| !used[i] && close(waypoints[i], *target)) {
            Some(i) => used[i] = true,
            None => return Err(format!("target {target} is not visited")),
        }
    }
    Ok(())
}

/// Has the language model write the mission file, then parses and
/// validates it before accepting it.
pub fn generate_actions_llm(
    points: &[GeoPoint],
    home: GeoPoint,
    altitude_m: f64,
    provider: &dyn LanguageModel,
) -> Result<MissionPlan, PipelineError> {
    let raw = provider
        .complete(&action_prompt(points, home, altitude_m))
        .map_err(|source| PipelineError::Model {
            stage: Stage::Actions,
            source,
        })?;
    let plan =
        parse_wpl(strip_code_fence(&raw)).map_err(|source| PipelineError::ActionGeneration {
            source,
            raw: raw.clone(),
        })?;
    check_generated_plan(&plan, points, home)
        .map_err(|reason| PipelineError::RejectedPlan { reason, raw })?;
    Ok(plan)
}

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1000.0
}

/// Runs every stage for one request. Nothing is written to disk.
pub fn run_pipeline(
    request: &MissionRequest,
    providers: &Providers,
) -> Result<PipelineTrace, PipelineError> {
    if !(request.altitude_m.is_finite() && request.altitude_m > 0.0) {
        return Err(PipelineError::Input(format!(
            "altitude must be positive, got {}",
            request.altitude_m
        )));
    }
    let image = fs::read(&request.image_path).map_err(|e| {
        PipelineError::Input(format!(
            "cannot read image {}: {e}",
            request.image_path.display()
        ))
    })?;
    let mut timings = StageTimings::default();

    let start = Instant::now();
    let goals =
        extract_goals(&request.instruction, providers.goals.as_ref()).map_err(|source| {
            PipelineError::Model {
                stage: Stage::Goals,
                source,
            }
        })?;
    timings.goals_ms = elapsed_ms(start);

    let start = Instant::now();
    let grounded = locate_objects(
        &goals,
        &image,
        Some(&request.image_path),
        &request.reference,
        providers.grounding.as_ref(),
    )
    .map_err(|source| match source {
        ModelError::Image(_) | ModelError::ImageSize { .. } => {
            PipelineError::Input(source.to_string())
        }
        source => PipelineError::Model {
            stage: Stage::Grounding,
            source,
        },
    })?;
    timings.grounding_ms = elapsed_ms(start);

    let start = Instant::now();
    let geo_points = grounded
        .all_points()
        .map(|p| pixel_to_geo(p, &request.reference))
        .collect::<Result<Vec<_>, _>>()?;
    timings.georeference_ms = elapsed_ms(start);
    if geo_points.is_empty() {
        return Err(PipelineError::EmptyMission);
    }

    let start = Instant::now();
    let home = make_home(&request.reference);
    let plan = match request.action_mode {
        ActionMode::Template => {
            template_plan(&geo_points, home, request.altitude_m).map_err(|e| match e {
                MissionError::EmptyMission => PipelineError::EmptyMission,
                other => PipelineError::Input(other.to_string()),
            })?
        }
        ActionMode::Llm => generate_actions_llm(
            &geo_points,
            home,
            request.altitude_m,
            providers.actions.as_ref(),
        )?,
    };
    timings.actions_ms = elapsed_ms(start);

    Ok(PipelineTrace {
        instruction: request.instruction.clone(),
        goals,
        grounded,
        geo_points,
        home,
        action_mode: request.action_mode,
        plan,
        timings,
    })
}
