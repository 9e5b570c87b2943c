use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use super::{PlantError, VehicleParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathKind {
    NinetyDegreeTurn,
    LaneChange,
    Straight,
}

impl PathKind {
    pub fn name(self) -> &'static str {
        match self {
            PathKind::NinetyDegreeTurn => "ninety_degree_turn",
            PathKind::LaneChange => "lane_change",
            PathKind::Straight => "straight",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurvatureLevel {
    Low,
    High,
}

/// Numeric settings behind the path generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathConfig {
    pub low_curvature: f64,
    pub high_curvature: f64,
    pub resolution: f64,
    pub lane_offset: f64,
}

impl Default for PathConfig {
    fn default() -> Self {
        PathConfig { low_curvature: 1.0 / 20.0, high_curvature: 1.0 / 8.0, resolution: 0.1, lane_offset: 3.5 }
    }
}

impl PathConfig {
    pub fn curvature(&self, level: CurvatureLevel) -> f64 {
        match level {
            CurvatureLevel::Low => self.low_curvature,
            CurvatureLevel::High => self.high_curvature,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub s: f64,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub curvature: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSpec {
    pub kind: PathKind,
    pub curvature_level: CurvatureLevel,
    pub kappa_max: f64,
    /// Constant-curvature pieces as (length, curvature).
    pub segments: Vec<(f64, f64)>,
    pub samples: Vec<PathSample>,
}

impl PathSpec {
    pub fn length(&self) -> f64 {
        self.samples.last().map_or(0.0, |p| p.s)
    }

    /// Index of the sample nearest to `(x, y)`, first on ties.
    pub fn nearest_index(&self, x: f64, y: f64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, p) in self.samples.iter().enumerate() {
            let d = (p.x - x) * (p.x - x) + (p.y - y) * (p.y - y);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }
}

/// Samples constant-curvature pieces `(length, curvature)` at uniform arc length.
fn build(pieces: &[(f64, f64)], resolution: f64) -> Vec<PathSample> {
    let total: f64 = pieces.iter().map(|p| p.0).sum();
    let n = (total / resolution).round().max(1.0) as usize;
    let mut out = Vec::with_capacity(n + 1);
    let (mut x, mut y, mut h, mut s0) = (0.0, 0.0, 0.0, 0.0);
    let mut piece = 0;
    for k in 0..=n {
        let s = total * k as f64 / n as f64;
        while piece + 1 < pieces.len() && s - s0 > pieces[piece].0 {
            let (len, kappa) = pieces[piece];
            (x, y, h) = advance(x, y, h, kappa, len);
            s0 += len;
            piece += 1;
        }
        let kappa = pieces[piece].1;
        let (px, py, ph) = advance(x, y, h, kappa, s - s0);
        out.push(PathSample { s, x: px, y: py, heading: ph, curvature: kappa });
    }
    out
}

/// Exact pose after arc length `ds` at constant curvature.
fn advance(x: f64, y: f64, h: f64, kappa: f64, ds: f64) -> (f64, f64, f64) {
    if kappa.abs() < 1e-12 {
        (x + ds * h.cos(), y + ds * h.sin(), h)
    } else {
        let nh = h + kappa * ds;
        (x + (nh.sin() - h.sin()) / kappa, y - (nh.cos() - h.cos()) / kappa, nh)
    }
}

/// Reference path of the given kind and total length, starting at the origin heading along x.
pub fn make_path(
    kind: PathKind,
    level: CurvatureLevel,
    length: f64,
    config: &PathConfig,
    vehicle: &VehicleParams,
) -> Result<PathSpec, PlantError> {
    if length <= 0.0 {
        return Err(PlantError::InfeasiblePath("length must be positive".into()));
    }
    let kappa = config.curvature(level);
    let pieces = match kind {
        PathKind::Straight => vec![(length, 0.0)],
        PathKind::NinetyDegreeTurn => {
            let needed = (vehicle.wheelbase * kappa).atan();
            if needed > vehicle.delta_max.min(-vehicle.delta_min) {
                return Err(PlantError::InfeasiblePath(format!(
                    "curvature {kappa} needs steering {needed:.3} rad beyond the limit"
                )));
            }
            let arc = FRAC_PI_2 / kappa;
            if arc >= length {
                return Err(PlantError::InfeasiblePath(format!("turn of {arc:.1} m does not fit in {length} m")));
            }
            let straight = (length - arc) / 2.0;
            vec![(straight, 0.0), (arc, kappa), (straight, 0.0)]
        }
        PathKind::LaneChange => {
            let needed = (vehicle.wheelbase * kappa).atan();
            if needed > vehicle.delta_max.min(-vehicle.delta_min) {
                return Err(PlantError::InfeasiblePath(format!(
                    "curvature {kappa} needs steering {needed:.3} rad beyond the limit"
                )));
            }
            let radius = 1.0 / kappa;
            let c = 1.0 - config.lane_offset / (2.0 * radius);
            if c <= 0.0 {
                return Err(PlantError::InfeasiblePath("lane offset too large for the curvature".into()));
            }
            let phi = c.acos();
            let arc = radius * phi;
            if 2.0 * arc >= length {
                return Err(PlantError::InfeasiblePath(format!("lane change does not fit in {length} m")));
            }
            let straight = (length - 2.0 * arc) / 2.0;
            vec![(straight, 0.0), (arc, kappa), (arc, -kappa), (straight, 0.0)]
        }
    };
    Ok(PathSpec {
        kind,
        curvature_level: level,
        kappa_max: if kind == PathKind::Straight { 0.0 } else { kappa },
        samples: build(&pieces, config.resolution),
        segments: pieces,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mk(kind: PathKind, level: CurvatureLevel) -> PathSpec {
        make_path(kind, level, 120.0, &PathConfig::default(), &VehicleParams::default()).unwrap()
    }

    fn check_regular(p: &PathSpec) {
        for w in p.samples.windows(2) {
            assert!(w[1].s > w[0].s);
            assert!((w[1].heading - w[0].heading).abs() < 0.1);
            let d = ((w[1].x - w[0].x).powi(2) + (w[1].y - w[0].y).powi(2)).sqrt();
            assert!(d <= w[1].s - w[0].s + 1e-9);
        }
    }

    #[test]
    fn straight_headings_zero() {
        let p = mk(PathKind::Straight, CurvatureLevel::Low);
        assert!(p.samples.iter().all(|s| s.heading == 0.0 && s.y == 0.0));
        assert!((p.length() - 120.0).abs() < 1e-9);
        check_regular(&p);
    }

    #[test]
    fn turn_heading_change() {
        for level in [CurvatureLevel::Low, CurvatureLevel::High] {
            let p = mk(PathKind::NinetyDegreeTurn, level);
            let dh = p.samples.last().unwrap().heading - p.samples[0].heading;
            assert!((dh - FRAC_PI_2).abs() < 1e-6);
            check_regular(&p);
        }
    }

    #[test]
    fn lane_change_offset_by_integration() {
        for level in [CurvatureLevel::Low, CurvatureLevel::High] {
            let p = mk(PathKind::LaneChange, level);
            let last = p.samples.last().unwrap();
            assert!((last.heading - p.samples[0].heading).abs() < 1e-6);
            // integrate the curvature profile with fine midpoint steps
            let (mut h, mut y) = (0.0f64, 0.0f64);
            let ds = 1e-4;
            for &(len, kappa) in &p.segments {
                let n = (len / ds).ceil() as usize;
                let d = len / n as f64;
                for _ in 0..n {
                    y += (h + 0.5 * kappa * d).sin() * d;
                    h += kappa * d;
                }
            }
            assert!(h.abs() < 1e-9);
            assert!((y - 3.5).abs() < 1e-3, "{y}");
            assert!((last.y - 3.5).abs() < 1e-3, "{}", last.y);
            check_regular(&p);
        }
    }

    #[test]
    fn infeasible_curvature_rejected() {
        let cfg = PathConfig { high_curvature: 1.0, ..Default::default() };
        assert!(matches!(
            make_path(PathKind::NinetyDegreeTurn, CurvatureLevel::High, 100.0, &cfg, &VehicleParams::default()),
            Err(PlantError::InfeasiblePath(_))
        ));
        assert!(make_path(PathKind::Straight, CurvatureLevel::Low, 0.0, &cfg, &VehicleParams::default()).is_err());
    }
}
