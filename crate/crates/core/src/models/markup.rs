//! Parser for the XML-like pointing markup emitted by pointing VLMs:
//! `<point x="10.5" y="20.1" alt="building">building</point>` and
//! `<points x1=".." y1=".." x2=".." y2=".." alt="..">..</points>`.
//! Coordinates are percentages of the image width and height.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkedPoint {
    pub x_pct: f64,
    pub y_pct: f64,
    pub label: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PointMarkup {
    pub points: Vec<MarkedPoint>,
    /// One entry per skipped malformed tag.
    pub warnings: Vec<String>,
}

fn tag_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r#"(?s)<(points?)\b((?:[^>"]|"[^"]*")*)>(.*?)</points?\s*>"#)
            .expect("valid tag regex")
    })
}

fn attr_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r#"([A-Za-z_][A-Za-z0-9_]*)\s*=\s*"([^"]*)""#).expect("valid attribute regex")
    })
}

fn parse_coord(value: &str) -> Option<f64> {
    value.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Extracts every well-formed point tag. Malformed tags are skipped with a
/// warning; text without tags yields an empty result.
pub fn parse_point_markup(text: &str) -> PointMarkup {
    let mut out = PointMarkup::default();
    for caps in tag_regex().captures_iter(text) {
        let tag = &caps[1];
        let attrs: BTreeMap<&str, &str> = attr_regex()
            .captures_iter(&caps[2])
            .map(|a| {
                let (_, [k, v]) = a.extract();
                (k, v)
            })
            .collect();
        let body = caps[3].trim();
        let label = attrs
            .get("alt")
            .map(|s| s.trim())
            .filter(|s| !s.is_empty())
            .unwrap_or(body)
            .to_string();

        let mut pairs = Vec::new();
        if tag == "point" {
            pairs.push(("x".to_string(), "y".to_string()));
        } else {
            let mut i = 1;
            while attrs.contains_key(format!("x{i}").as_str())
                || attrs.contains_key(format!("y{i}").as_str())
            {
                pairs.push((format!("x{i}"), format!("y{i}")));
                i += 1;
            }
        }
        if pairs.is_empty() {
            out.warnings
                .push(format!("<{tag}> tag without coordinates skipped"));
            continue;
        }

        let mut parsed = Vec::with_capacity(pairs.len());
        let mut bad = None;
        for (kx, ky) in &pairs {
            match (
                attrs.get(kx.as_str()).and_then(|v| parse_coord(v)),
                attrs.get(ky.as_str()).and_then(|v| parse_coord(v)),
            ) {
                (Some(x), Some(y)) => parsed.push(MarkedPoint {
                    x_pct: x,
                    y_pct: y,
                    label: label.clone(),
                }),
                _ => {
                    bad = Some(format!(
                        "<{tag}> tag skipped: attributes {kx}={:?} {ky}={:?} are not numbers",
                        attrs.get(kx.as_str()),
                        attrs.get(ky.as_str())
                    ));
                    break;
                }
            }
        }
        match bad {
            Some(w) => out.warnings.push(w),
            None => out.points.extend(parsed),
        }
    }
    out
}
