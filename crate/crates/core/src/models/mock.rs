use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use regex::Regex;

use super::{ChatPrompt, ChatTask, LanguageModel, ModelError, PointQuery, PointingModel};
use crate::mission::serialize_wpl;
use crate::pipeline::template_plan;

/// File suffix of mock detection fixtures: `<image-stem>.detections.json`.
pub const DETECTIONS_SUFFIX: &str = ".detections.json";

// (pattern, goal) pairs for the object classes found in the benchmark scenes.
const VOCABULARY: &[(&str, &str)] = &[
    ("buildings?", "building"),
    ("houses?", "house"),
    ("warehouses?", "warehouse"),
    ("stadiums?|stadia", "stadium"),
    ("ponds?", "pond"),
    ("lakes?", "lake"),
    ("water bod(?:y|ies)", "water body"),
    ("crossroads?", "crossroad"),
    ("bridges?", "bridge"),
    ("roundabouts?", "roundabout"),
    ("fields?", "field"),
    ("parking lots?", "parking lot"),
];

fn vocabulary_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        let alternatives: Vec<String> = VOCABULARY.iter().map(|(p, _)| format!("({p})")).collect();
        Regex::new(&format!(r"(?i)\b(?:{})\b", alternatives.join("|")))
            .expect("valid vocabulary regex")
    })
}

/// Offline stand-in for both model roles.
///
/// * Goal extraction answers with the known object classes named in the
///   instruction, one per line, in order of first mention.
/// * Pointing reads `<image-stem>.detections.json` next to the image and
///   answers in pointing markup.
/// * Action generation echoes the deterministic template plan.
///
/// Every answer is rendered as text and goes through the same parsers as a
/// real model's response.
#[derive(Debug, Clone, Default)]
pub struct MockProvider {
    fixture_dir: Option<PathBuf>,
}

impl MockProvider {
    pub fn new() -> Self {
        Self::default()
    }

    /// Looks up fixtures in `dir` instead of next to the image.
    pub fn with_fixture_dir(dir: impl Into<PathBuf>) -> Self {
        Self {
            fixture_dir: Some(dir.into()),
        }
    }

    fn fixture_path(&self, image_path: &Path) -> Result<PathBuf, ModelError> {
        let stem = image_path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| ModelError::Fixture {
                path: image_path.to_path_buf(),
                message: "image path has no file stem".into(),
            })?;
        let dir = match &self.fixture_dir {
            Some(dir) => dir.as_path(),
            None => image_path.parent().unwrap_or_else(|| Path::new(".")),
        };
        Ok(dir.join(format!("{stem}{DETECTIONS_SUFFIX}")))
    }
}

/// Parses a detections fixture: goal name to `[x_pct, y_pct]` pairs.
pub fn load_fixture(path: &Path) -> Result<BTreeMap<String, Vec<[f64; 2]>>, ModelError> {
    let text = fs::read_to_string(path).map_err(|e| ModelError::Fixture {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    serde_json::from_str(&text).map_err(|e| ModelError::Fixture {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn render_points(goal: &str, coords: &[[f64; 2]]) -> String {
    match coords {
        [] => format!("There are no {goal} objects in this image."),
        [[x, y]] => format!(r#"<point x="{x}" y="{y}" alt="{goal}">{goal}</point>"#),
        many => {
            let mut s = String::from("<points");
            for (i, [x, y]) in many.iter().enumerate() {
                write!(s, r#" x{n}="{x}" y{n}="{y}""#, n = i + 1).expect("String write");
            }
            write!(s, r#" alt="{goal}">{goal}</points>"#).expect("String write");
            s
        }
    }
}

impl LanguageModel for MockProvider {
    fn complete(&self, prompt: &ChatPrompt<'_>) -> Result<String, ModelError> {
        match prompt.task {
            ChatTask::Goals { instruction } => {
                let mut goals: Vec<&str> = Vec::new();
                for caps in vocabulary_regex().captures_iter(instruction.as_str()) {
                    let group = (1..caps.len())
                        .find(|&i| caps.get(i).is_some())
                        .expect("one alternative matched");
                    let goal = VOCABULARY[group - 1].1;
                    if !goals.contains(&goal) {
                        goals.push(goal);
                    }
                }
                Ok(goals.iter().map(|g| format!("{g}\n")).collect())
            }
            ChatTask::Actions {
                points,
                home,
                altitude_m,
            } => {
                let plan =
                    template_plan(points, home, altitude_m).map_err(|e| ModelError::Provider {
                        message: format!("mock action generator: {e}"),
                        attempts: 1,
                    })?;
                Ok(serialize_wpl(&plan))
            }
        }
    }
}

impl PointingModel for MockProvider {
    fn point(&self, query: &PointQuery<'_>) -> Result<String, ModelError> {
        let image_path = query.image.path.ok_or_else(|| {
            ModelError::Config("the mock pointing model needs the image path".into())
        })?;
        let path = self.fixture_path(image_path)?;
        let fixture = load_fixture(&path)?;
        let coords = fixture
            .get(query.goal)
            .or_else(|| {
                fixture
                    .iter()
                    .find(|(k, _)| k.eq_ignore_ascii_case(query.goal))
                    .map(|(_, v)| v)
            })
            .map(Vec::as_slice)
            .unwrap_or(&[]);
        Ok(render_points(query.goal, coords))
    }
}
