//! Clients for the goal-extraction language model and the object-pointing
//! vision-language model, their response parsers, and a fixture-backed mock.

mod http;
pub mod markup;
mod mock;

use std::collections::HashSet;
use std::io::Cursor;
use std::path::{Path, PathBuf};
use std::sync::{Arc, OnceLock};

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{GeoPoint, GeoReference, PixelPoint};

pub use self::http::HttpChatClient;
pub use self::markup::{parse_point_markup, MarkedPoint, PointMarkup};
pub use self::mock::{MockProvider, DETECTIONS_SUFFIX};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("instruction is empty")]
    EmptyInstruction,
    #[error("provider request failed after {attempts} attempt(s): {message}")]
    Provider { message: String, attempts: u32 },
    #[error("could not parse model response: {message}")]
    Parse { message: String, raw: String },
    #[error("model response names no goals")]
    NoGoals { raw: String },
    #[error("mock fixture {path}: {message}")]
    Fixture { path: PathBuf, message: String },
    #[error("invalid provider configuration: {0}")]
    Config(String),
    #[error("unreadable image: {0}")]
    Image(String),
    #[error("image is {found_w}x{found_h} px but its georeference says {expected_w}x{expected_h}")]
    ImageSize {
        expected_w: u32,
        expected_h: u32,
        found_w: u32,
        found_h: u32,
    },
}

impl ModelError {
    /// Raw response text carried by parse-type errors.
    pub fn raw_response(&self) -> Option<&str> {
        match self {
            ModelError::Parse { raw, .. } | ModelError::NoGoals { raw } => Some(raw),
            _ => None,
        }
    }
}

/// Natural-language mission request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Instruction(String);

impl Instruction {
    pub fn new(text: impl Into<String>) -> Result<Self, ModelError> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(ModelError::EmptyInstruction);
        }
        Ok(Self(text))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Length in whitespace-separated words.
    pub fn word_count(&self) -> usize {
        self.0.split_whitespace().count()
    }
}

/// Ordered object classes to look for, unique ignoring case.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoalSet {
    goals: Vec<String>,
}

impl GoalSet {
    /// Trims, drops empty entries and case-insensitive repeats (first spelling
    /// wins). Fails when nothing is left.
    pub fn new<I, S>(goals: I) -> Option<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut seen = HashSet::new();
        let goals: Vec<String> = goals
            .into_iter()
            .map(|g| g.as_ref().trim().to_string())
            .filter(|g| !g.is_empty() && seen.insert(g.to_lowercase()))
            .collect();
        (!goals.is_empty()).then_some(Self { goals })
    }

    pub fn goals(&self) -> &[String] {
        &self.goals
    }

    pub fn len(&self) -> usize {
        self.goals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.goals.is_empty()
    }
}

/// A detection dropped because it fell outside the image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectedDetection {
    pub x_pct: f64,
    pub y_pct: f64,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalDetections {
    pub goal: String,
    pub points: Vec<PixelPoint>,
    pub out_of_bounds: Vec<RejectedDetection>,
    pub warnings: Vec<String>,
    /// Model response exactly as received.
    pub raw_response: String,
}

/// Pixel detections per goal, in goal order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundedPoints {
    pub width_px: u32,
    pub height_px: u32,
    pub per_goal: Vec<GoalDetections>,
}

impl GroundedPoints {
    pub fn total_points(&self) -> usize {
        self.per_goal.iter().map(|g| g.points.len()).sum()
    }

    /// Every in-bounds detection, goal by goal.
    pub fn all_points(&self) -> impl Iterator<Item = PixelPoint> + '_ {
        self.per_goal.iter().flat_map(|g| g.points.iter().copied())
    }
}

/// What a language-model request is for. HTTP providers only see the
/// rendered text; the mock answers from the structured form.
#[derive(Debug, Clone, Copy)]
pub enum ChatTask<'a> {
    Goals {
        instruction: &'a Instruction,
    },
    Actions {
        points: &'a [GeoPoint],
        home: GeoPoint,
        altitude_m: f64,
    },
}

#[derive(Debug, Clone)]
pub struct ChatPrompt<'a> {
    pub system: String,
    pub user: String,
    pub task: ChatTask<'a>,
}

/// Image passed to the pointing model.
#[derive(Debug, Clone, Copy)]
pub struct ImageInput<'a> {
    pub bytes: &'a [u8],
    pub mime: &'a str,
    /// Location on disk, when known; the mock finds its fixture from it.
    pub path: Option<&'a Path>,
}

#[derive(Debug, Clone, Copy)]
pub struct PointQuery<'a> {
    pub goal: &'a str,
    pub prompt: &'a str,
    pub image: ImageInput<'a>,
}

pub trait LanguageModel: Send + Sync {
    fn complete(&self, prompt: &ChatPrompt<'_>) -> Result<String, ModelError>;
}

pub trait PointingModel: Send + Sync {
    fn point(&self, query: &PointQuery<'_>) -> Result<String, ModelError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProviderKind {
    Mock,
    HttpChat,
    HttpVlm,
}

fn default_timeout() -> f64 {
    60.0
}

fn default_retries() -> u32 {
    3
}

fn default_in_flight() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    /// Full chat-completions URL.
    #[serde(default)]
    pub endpoint: Option<String>,
    #[serde(default)]
    pub model: Option<String>,
    /// Name of the environment variable holding the bearer token.
    #[serde(default)]
    pub token_env: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_s: f64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    /// Upper bound on concurrent requests through one provider handle.
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
}

impl ProviderConfig {
    pub fn mock() -> Self {
        Self {
            kind: ProviderKind::Mock,
            endpoint: None,
            model: None,
            token_env: None,
            timeout_s: default_timeout(),
            max_retries: default_retries(),
            max_in_flight: default_in_flight(),
        }
    }

    pub fn http(kind: ProviderKind, endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            kind,
            endpoint: Some(endpoint.into()),
            model: Some(model.into()),
            ..Self::mock()
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.timeout_s.is_finite() && self.timeout_s > 0.0) {
            return Err(ModelError::Config(format!(
                "timeout must be positive, got {}",
                self.timeout_s
            )));
        }
        if self.max_in_flight == 0 {
            return Err(ModelError::Config(
                "max_in_flight must be at least 1".into(),
            ));
        }
        if self.kind != ProviderKind::Mock {
            if self.endpoint.as_deref().is_none_or(str::is_empty) {
                return Err(ModelError::Config("HTTP providers need an endpoint".into()));
            }
            if self.model.as_deref().is_none_or(str::is_empty) {
                return Err(ModelError::Config(
                    "HTTP providers need a model name".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Language model for goal extraction or action generation.
pub fn language_model(config: &ProviderConfig) -> Result<Arc<dyn LanguageModel>, ModelError> {
    config.validate()?;
    Ok(match config.kind {
        ProviderKind::Mock => Arc::new(MockProvider::new()),
        ProviderKind::HttpChat | ProviderKind::HttpVlm => {
            Arc::new(HttpChatClient::from_config(config)?)
        }
    })
}

pub fn pointing_model(config: &ProviderConfig) -> Result<Arc<dyn PointingModel>, ModelError> {
    config.validate()?;
    Ok(match config.kind {
        ProviderKind::Mock => Arc::new(MockProvider::new()),
        ProviderKind::HttpChat | ProviderKind::HttpVlm => {
            Arc::new(HttpChatClient::from_config(config)?)
        }
    })
}

const GOAL_SYSTEM_PROMPT: &str =
    "You turn UAV mission requests into search goals for an object detector. \
List every kind of object the drone has to visit as a short singular lowercase noun phrase, \
one goal per line, with no numbering, punctuation or other text.";

pub fn goal_prompt(instruction: &Instruction) -> ChatPrompt<'_> {
    ChatPrompt {
        system: GOAL_SYSTEM_PROMPT.to_string(),
        user: instruction.as_str().to_string(),
        task: ChatTask::Goals { instruction },
    }
}

fn goal_line_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^[A-Za-z][A-Za-z0-9' -]{0,62}$").expect("valid goal regex"))
}

/// Longest goal accepted, in words.
pub const MAX_GOAL_WORDS: usize = 4;

/// Parses a one-goal-per-line answer. Any line that is not a short noun
/// phrase makes the whole response unparseable.
pub fn parse_goal_list(raw: &str) -> Result<GoalSet, ModelError> {
    let mut goals = Vec::new();
    for line in raw.lines().map(str::trim).filter(|l| !l.is_empty()) {
        if !goal_line_regex().is_match(line) || line.split_whitespace().count() > MAX_GOAL_WORDS {
            return Err(ModelError::Parse {
                message: format!("line '{line}' is not a single goal"),
                raw: raw.to_string(),
            });
        }
        goals.push(line);
    }
    GoalSet::new(goals).ok_or_else(|| ModelError::NoGoals {
        raw: raw.to_string(),
    })
}

/// Asks the language model which objects the mission targets.
pub fn extract_goals(
    instruction: &Instruction,
    provider: &dyn LanguageModel,
) -> Result<GoalSet, ModelError> {
    let raw = provider.complete(&goal_prompt(instruction))?;
    parse_goal_list(&raw)
}

pub fn pointing_prompt(goal: &str) -> String {
    format!("Point to every {goal} in the image.")
}

/// Reads width, height and MIME type from an encoded raster.
pub fn image_info(bytes: &[u8]) -> Result<(u32, u32, &'static str), ModelError> {
    let reader = image::ImageReader::new(Cursor::new(bytes))
        .with_guessed_format()
        .map_err(|e| ModelError::Image(e.to_string()))?;
    let format = reader
        .format()
        .ok_or_else(|| ModelError::Image("unrecognised image format".into()))?;
    let (w, h) = reader
        .into_dimensions()
        .map_err(|e| ModelError::Image(e.to_string()))?;
    Ok((w, h, format.to_mime_type()))
}

/// Runs the pointing model once per goal and converts percentage
/// coordinates to pixels. Detections outside 0..=100 % are excluded and
/// listed under `out_of_bounds`; a goal with no detections is not an error.
pub fn locate_objects(
    goals: &GoalSet,
    image_bytes: &[u8],
    image_path: Option<&Path>,
    reference: &GeoReference,
    provider: &dyn PointingModel,
) -> Result<GroundedPoints, ModelError> {
    let (w, h, mime) = image_info(image_bytes)?;
    if (w, h) != (reference.width_px(), reference.height_px()) {
        return Err(ModelError::ImageSize {
            expected_w: reference.width_px(),
            expected_h: reference.height_px(),
            found_w: w,
            found_h: h,
        });
    }
    let image = ImageInput {
        bytes: image_bytes,
        mime,
        path: image_path,
    };
    let (wf, hf) = (f64::from(w), f64::from(h));
    let mut per_goal = Vec::with_capacity(goals.len());
    for goal in goals.goals() {
        let prompt = pointing_prompt(goal);
        let raw = provider.point(&PointQuery {
            goal,
            prompt: &prompt,
            image,
        })?;
        let markup = parse_point_markup(&raw);
        let mut points = Vec::new();
        let mut out_of_bounds = Vec::new();
        for p in markup.points {
            let inside = (0.0..=100.0).contains(&p.x_pct) && (0.0..=100.0).contains(&p.y_pct);
            if inside {
                points.push(PixelPoint {
                    x: p.x_pct / 100.0 * wf,
                    y: p.y_pct / 100.0 * hf,
                });
            } else {
                out_of_bounds.push(RejectedDetection {
                    x_pct: p.x_pct,
                    y_pct: p.y_pct,
                    label: p.label,
                });
            }
        }
        if !out_of_bounds.is_empty() {
            log::warn!(
                "goal '{goal}': {} detection(s) outside the image dropped",
                out_of_bounds.len()
            );
        }
        per_goal.push(GoalDetections {
            goal: goal.clone(),
            points,
            out_of_bounds,
            warnings: markup.warnings,
            raw_response: raw,
        });
    }
    Ok(GroundedPoints {
        width_px: w,
        height_px: h,
        per_goal,
    })
}
