use std::fmt::Write as _;

use super::{ActionKind, MissionError, MissionItem, MissionPlan};
use crate::geo::GeoPoint;

/// First line of every waypoint file.
pub const WPL_HEADER: &str = "QGC WPL 110";

const COLUMNS: usize = 12;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ParseOptions {
    /// Keep unknown command codes as [`ActionKind::Other`] instead of
    /// rejecting the file.
    pub lenient: bool,
}

/// Renders a plan in the tab-separated `QGC WPL 110` grammar: lat/lon with
/// eight decimals, every other float with six, autocontinue always 1.
pub fn serialize_wpl(plan: &MissionPlan) -> String {
    let mut out = String::with_capacity(32 + plan.len() * 96);
    out.push_str(WPL_HEADER);
    out.push('\n');
    for item in plan.items() {
        let [p1, p2, p3, p4] = item.params;
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.8}\t{:.8}\t{:.6}\t1",
            item.seq,
            u8::from(item.is_current),
            item.frame,
            item.command.code(),
            p1,
            p2,
            p3,
            p4,
            item.position.lat,
            item.position.lon,
            item.altitude_m,
        )
        .expect("writing to a String cannot fail");
    }
    out
}

pub fn parse_wpl(text: &str) -> Result<MissionPlan, MissionError> {
    parse_wpl_with(text, ParseOptions::default())
}

pub fn parse_wpl_with(text: &str, options: ParseOptions) -> Result<MissionPlan, MissionError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')));

    let (line_no, header) = lines.next().ok_or(MissionError::Format {
        line: 1,
        message: "missing header".to_string(),
    })?;
    let header = header.trim();
    if header != WPL_HEADER {
        if let Some(version) = header.strip_prefix("QGC WPL ") {
            return Err(MissionError::UnsupportedVersion {
                line: line_no,
                found: version.to_string(),
            });
        }
        return Err(MissionError::Format {
            line: line_no,
            message: format!("expected header '{WPL_HEADER}', found '{header}'"),
        });
    }

    let mut items = Vec::new();
    for (line_no, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let expected_seq = items.len() as u32;
        items.push(parse_item(line_no, line, expected_seq, options)?);
    }
    if items.is_empty() {
        return Err(MissionError::Format {
            line: 2,
            message: "file holds no items".to_string(),
        });
    }
    Ok(MissionPlan::from_items(items)?)
}

fn parse_item(
    line_no: usize,
    line: &str,
    expected_seq: u32,
    options: ParseOptions,
) -> Result<MissionItem, MissionError> {
    let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
    if cols.len() != COLUMNS {
        return Err(MissionError::ColumnCount {
            line: line_no,
            expected: COLUMNS,
            found: cols.len(),
        });
    }
    let err = |message: String| MissionError::Format {
        line: line_no,
        message,
    };
    let int = |idx: usize, name: &str| -> Result<u64, MissionError> {
        cols[idx].parse::<u64>().map_err(|_| {
            err(format!(
                "{name} '{}' is not a non-negative integer",
                cols[idx]
            ))
        })
    };
    let float = |idx: usize, name: &str| -> Result<f64, MissionError> {
        cols[idx]
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| err(format!("{name} '{}' is not a finite number", cols[idx])))
    };

    let seq = u32::try_from(int(0, "seq")?).map_err(|_| err("seq out of range".to_string()))?;
    if seq != expected_seq {
        return Err(MissionError::SequenceGap {
            line: line_no,
            expected: expected_seq,
            found: seq,
        });
    }
    let is_current = match int(1, "current flag")? {
        0 => false,
        1 => true,
        other => return Err(err(format!("current flag must be 0 or 1, found {other}"))),
    };
    let frame =
        u8::try_from(int(2, "frame")?).map_err(|_| err("frame out of range".to_string()))?;
    let code =
        u16::try_from(int(3, "command")?).map_err(|_| err("command out of range".to_string()))?;
    let command = if seq == 0 {
        if code != ActionKind::NAV_WAYPOINT {
            return Err(err(format!(
                "seq 0 must be the home position (command {}), found {code}",
                ActionKind::NAV_WAYPOINT
            )));
        }
        ActionKind::Home
    } else {
        match ActionKind::from_code(code) {
            Some(kind) => kind,
            None if options.lenient => ActionKind::Other(code),
            None => {
                return Err(MissionError::UnknownCommand {
                    line: line_no,
                    code,
                })
            }
        }
    };
    let params = [
        float(4, "param1")?,
        float(5, "param2")?,
        float(6, "param3")?,
        float(7, "param4")?,
    ];
    let position = GeoPoint::new(float(8, "latitude")?, float(9, "longitude")?)
        .map_err(|e| err(e.to_string()))?;
    let altitude_m = float(10, "altitude")?;
    match int(11, "autocontinue")? {
        0 | 1 => {}
        other => return Err(err(format!("autocontinue must be 0 or 1, found {other}"))),
    }

    Ok(MissionItem {
        seq,
        is_current,
        frame,
        command,
        params,
        position,
        altitude_m,
    })
}
