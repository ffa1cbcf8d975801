//! Benchmark directory layout.
//!
//! ```text
//! root/
//!   prompt.txt                 instruction shared by every sample
//!   <stem>.png | .jpg | .jpeg  satellite image
//!   <stem>.meta.json           georeference
//!   <stem>.truth.waypoints     human-made plan
//!   <stem>.detections.json     mock fixture (optional)
//! ```
//!
//! A sample exists for every `<stem>.meta.json`.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

pub const PROMPT_FILE: &str = "prompt.txt";
pub const META_SUFFIX: &str = ".meta.json";
pub const TRUTH_SUFFIX: &str = ".truth.waypoints";
pub const IMAGE_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    pub name: String,
    pub meta: PathBuf,
    pub image: Option<PathBuf>,
    pub truth: PathBuf,
}

#[derive(Debug, Clone)]
pub struct DatasetLayout {
    pub root: PathBuf,
    pub samples: Vec<Sample>,
}

impl DatasetLayout {
    /// Lists the samples under `root`, sorted by name.
    pub fn scan(root: &Path) -> io::Result<Self> {
        let mut samples = Vec::new();
        for entry in fs::read_dir(root)? {
            let path = entry?.path();
            let Some(file_name) = path.file_name().and_then(|n| n.to_str()) else {
                continue;
            };
            let Some(stem) = file_name.strip_suffix(META_SUFFIX) else {
                continue;
            };
            let image = IMAGE_EXTENSIONS
                .iter()
                .map(|ext| root.join(format!("{stem}.{ext}")))
                .find(|p| p.is_file());
            samples.push(Sample {
                name: stem.to_string(),
                meta: path.clone(),
                image,
                truth: root.join(format!("{stem}{TRUTH_SUFFIX}")),
            });
        }
        samples.sort_by(|a, b| a.name.cmp(&b.name));
        Ok(Self {
            root: root.to_path_buf(),
            samples,
        })
    }

    pub fn prompt_path(&self) -> PathBuf {
        self.root.join(PROMPT_FILE)
    }
}
