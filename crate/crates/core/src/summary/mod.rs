//! Per-person and per-shot action timelines with JSON and SVG output.
mod svg;
mod timeline;

pub use svg::{render_svg, LANE_HEIGHT, PX_PER_SECOND};
pub use timeline::{
    build_person_timeline, build_shot_timeline, detect_shots, frame_energy, smooth_predictions, ClipPrediction,
    TimelineEvent, DEFAULT_SHOT_THRESHOLD,
};

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubjectKind {
    Person,
    Shot,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Subject {
    pub id: usize,
    pub kind: SubjectKind,
    pub events: Vec<TimelineEvent>,
}

impl Subject {
    /// Action with the most frames; ties go to the earliest.
    pub fn dominant_action(&self) -> Option<&str> {
        let mut totals: Vec<(&str, usize)> = Vec::new();
        for e in &self.events {
            match totals.iter_mut().find(|t| t.0 == e.action) {
                Some(t) => t.1 += e.end - e.start,
                None => totals.push((&e.action, e.end - e.start)),
            }
        }
        totals.iter().rev().max_by_key(|t| t.1).map(|t| t.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub video: String,
    pub fps: f64,
    pub labels: Vec<String>,
    pub subjects: Vec<Subject>,
}

impl Summary {
    pub fn new(video: impl Into<String>, fps: f64, labels: Vec<String>) -> Self {
        Summary { video: video.into(), fps, labels, subjects: Vec::new() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(Error::Config(format!("summary fps must be positive, got {}", self.fps)));
        }
        for s in &self.subjects {
            for (i, e) in s.events.iter().enumerate() {
                if !self.labels.contains(&e.action) {
                    return Err(Error::Config(format!("subject {}: action '{}' is not in the label table", s.id, e.action)));
                }
                if e.start >= e.end {
                    return Err(Error::Config(format!("subject {}: empty event {}..{}", s.id, e.start, e.end)));
                }
                if i > 0 && s.events[i - 1].end > e.start {
                    return Err(Error::Config(format!("subject {}: events overlap or are unsorted", s.id)));
                }
            }
        }
        Ok(())
    }

    /// Last event end over all subjects.
    pub fn extent(&self) -> usize {
        self.subjects.iter().flat_map(|s| s.events.iter().map(|e| e.end)).max().unwrap_or(0)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Summary = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        self.validate()?;
        fs::write(path, self.to_json()?).map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Summary::from_json(&text).map_err(|e| match e {
            Error::Json(j) => Error::format(path, j.to_string()),
            other => other,
        })
    }

    pub fn write_svg(&self, path: &Path) -> Result<()> {
        self.validate()?;
        fs::write(path, render_svg(self)).map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }
}
