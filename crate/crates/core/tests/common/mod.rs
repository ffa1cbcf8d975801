//! Random inputs and brute-force references shared by the property and
//! acceptance suites.

#![allow(dead_code)]

use rand::Rng;
use uav_vla::eval::Trajectory;
use uav_vla::geo::{local_xy_m, GeoPoint};
use uav_vla::mission::{ActionKind, MissionItem, MissionPlan};

/// Random trajectory of `len` points within a few kilometers of a random
/// origin, no consecutive duplicates.
pub fn random_trajectory<R: Rng>(rng: &mut R, origin: GeoPoint, len: usize) -> Trajectory {
    let mut points: Vec<GeoPoint> = Vec::with_capacity(len);
    while points.len() < len {
        let p = GeoPoint {
            lat: origin.lat + rng.gen_range(-0.02..0.02),
            lon: origin.lon + rng.gen_range(-0.02..0.02),
        };
        if points.last() != Some(&p) {
            points.push(p);
        }
    }
    Trajectory::new(points).unwrap()
}

pub fn random_origin<R: Rng>(rng: &mut R) -> GeoPoint {
    GeoPoint::new(rng.gen_range(-60.0..60.0), rng.gen_range(-179.0..179.0)).unwrap()
}

pub type Planar = Vec<(f64, f64)>;

pub fn planar(g: &Trajectory, t: &Trajectory) -> (Planar, Planar) {
    let origin = t.first();
    let p = |tr: &Trajectory| {
        tr.points()
            .iter()
            .map(|&q| local_xy_m(q, origin).unwrap())
            .collect()
    };
    (p(g), p(t))
}

pub fn sq(a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (a.0 - b.0, a.1 - b.1);
    dx * dx + dy * dy
}

/// Minimum total cost over every monotone warping path, by enumeration.
pub fn dtw_enumerate(g: &[(f64, f64)], t: &[(f64, f64)]) -> f64 {
    fn walk(g: &[(f64, f64)], t: &[(f64, f64)], i: usize, j: usize, acc: f64, best: &mut f64) {
        let acc = acc + sq(g[i], t[j]);
        if i + 1 == g.len() && j + 1 == t.len() {
            *best = best.min(acc);
            return;
        }
        if i + 1 < g.len() {
            walk(g, t, i + 1, j, acc, best);
        }
        if j + 1 < t.len() {
            walk(g, t, i, j + 1, acc, best);
        }
        if i + 1 < g.len() && j + 1 < t.len() {
            walk(g, t, i + 1, j + 1, acc, best);
        }
    }
    let mut best = f64::INFINITY;
    walk(g, t, 0, 0, 0.0, &mut best);
    best
}

/// Sum of squared distances from every generated point to its nearest truth
/// point, by full scan.
pub fn knn_scan(g: &[(f64, f64)], t: &[(f64, f64)]) -> f64 {
    g.iter()
        .map(|&p| t.iter().map(|&q| sq(p, q)).fold(f64::INFINITY, f64::min))
        .sum()
}

/// Random valid plan whose numbers survive the file format exactly:
/// coordinates are integers over 1e8, everything else integers over 1e6.
pub fn random_quantized_plan<R: Rng>(rng: &mut R) -> MissionPlan {
    let coord = |rng: &mut R, limit: i64| rng.gen_range(-limit..=limit) as f64 / 1e8;
    let point = |rng: &mut R| GeoPoint {
        lat: coord(rng, 8_900_000_000),
        lon: coord(rng, 17_900_000_000),
    };
    let param = |rng: &mut R| rng.gen_range(-100_000_000i64..=100_000_000) as f64 / 1e6;
    let altitude = |rng: &mut R| rng.gen_range(1i64..=500_000_000) as f64 / 1e6;
    let item =
        |rng: &mut R, seq: usize, command: ActionKind, position: GeoPoint, altitude_m: f64| {
            MissionItem {
                seq: seq as u32,
                is_current: seq == 0,
                frame: if seq == 0 { 0 } else { 3 },
                command,
                params: [param(rng), param(rng), param(rng), param(rng)],
                position,
                altitude_m,
            }
        };

    let home = point(rng);
    let mut items = vec![MissionItem {
        params: [0.0; 4],
        ..item(rng, 0, ActionKind::Home, home, 0.0)
    }];
    let takeoff_at = if rng.gen_bool(0.5) {
        home
    } else {
        GeoPoint { lat: 0.0, lon: 0.0 }
    };
    let alt = altitude(rng);
    items.push(item(rng, 1, ActionKind::Takeoff, takeoff_at, alt));
    for _ in 0..rng.gen_range(0..12) {
        let (p, a) = (point(rng), altitude(rng));
        items.push(item(rng, items.len(), ActionKind::Waypoint, p, a));
    }
    if rng.gen_bool(0.7) {
        items.push(item(
            rng,
            items.len(),
            ActionKind::ReturnToLaunch,
            GeoPoint { lat: 0.0, lon: 0.0 },
            0.0,
        ));
    }
    let land_at = if rng.gen_bool(0.5) {
        GeoPoint { lat: 0.0, lon: 0.0 }
    } else {
        point(rng)
    };
    items.push(item(rng, items.len(), ActionKind::Land, land_at, 0.0));
    let plan = MissionPlan::from_items(items).unwrap();
    plan.validate().unwrap();
    plan
}
