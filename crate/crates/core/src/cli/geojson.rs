//! GeoJSON export of mission plans. Coordinates are written `[lon, lat]`.

use serde_json::{json, Value};

use crate::geo::GeoPoint;
use crate::mission::{extract_trajectory, ActionKind, MissionPlan};

fn lon_lat(p: GeoPoint) -> Value {
    json!([p.lon, p.lat])
}

/// One LineString for the plan's ground track plus one Point per item.
///
/// Items that carry no position of their own (0/0 in the file) are placed
/// where the vehicle is when they execute: home for RETURN_TO_LAUNCH, the
/// previous position otherwise.
pub fn plan_features(plan: &MissionPlan, source: &str) -> Vec<Value> {
    let track = extract_trajectory(plan);
    let mut features = vec![json!({
        "type": "Feature",
        "geometry": {
            "type": "LineString",
            "coordinates": track.points().iter().map(|&p| lon_lat(p)).collect::<Vec<_>>(),
        },
        "properties": {"source": source, "kind": "trajectory", "points": track.len()},
    })];
    let home = plan.home();
    let mut current = home;
    for item in plan.items() {
        let explicit = !(item.position.lat == 0.0 && item.position.lon == 0.0);
        let position = match item.command {
            ActionKind::ReturnToLaunch => home,
            _ if explicit => item.position,
            _ => current,
        };
        current = position;
        features.push(json!({
            "type": "Feature",
            "geometry": {"type": "Point", "coordinates": lon_lat(position)},
            "properties": {
                "source": source,
                "kind": "item",
                "seq": item.seq,
                "command": item.command.code(),
                "action": item.command.name(),
                "altitude_m": item.altitude_m,
                "position_inferred": !explicit || item.command == ActionKind::ReturnToLaunch,
            },
        }));
    }
    features
}

pub fn feature_collection<'a>(
    plans: impl IntoIterator<Item = (&'a MissionPlan, &'a str)>,
) -> Value {
    let features: Vec<Value> = plans
        .into_iter()
        .flat_map(|(plan, source)| plan_features(plan, source))
        .collect();
    json!({"type": "FeatureCollection", "features": features})
}
