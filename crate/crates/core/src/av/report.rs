use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{AvConfig, AvError, Nuisance, Study, FUNCTIONALITY_NAMES, NODE_NAMES, RESOURCE_NAMES};
use crate::codesign::{Assignment, NodeKind, SolveOptions};
use crate::design::{Catalog, TaskPoint, CACHE_SCHEMA_VERSION};
use crate::order::{pareto_min_groups, Antichain, Order, Point, Poset, Value};

/// Bumped whenever the layout of the exported files changes.
pub const EXPORT_SCHEMA_VERSION: u32 = 1;

/// One minimal resource point with the assignments achieving it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontPoint {
    pub resources: Point,
    /// Design label per table node, one map per alternative.
    pub designs: Vec<BTreeMap<String, String>>,
    /// Standard errors of the controller resources of the first alternative.
    pub dispersion: BTreeMap<String, BTreeMap<String, f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryReport {
    pub schema: u32,
    pub task: TaskPoint,
    pub nuisance: Nuisance,
    pub functionality_poset: Poset,
    pub functionality: Point,
    pub resource_poset: Poset,
    pub points: Vec<FrontPoint>,
}

fn render_value(order: &Order, v: &Value) -> String {
    match (order, v) {
        (Order::Discrete { order }, Value::Label { label }) => order.name(*label).unwrap_or("?").to_string(),
        (Order::Opposite { of }, v) => render_value(of, v),
        (_, v) => v.to_string(),
    }
}

fn sort_key(poset: &Poset, p: &Point) -> Vec<f64> {
    poset.real_key(p).unwrap_or_default()
}

impl Study {
    /// Exposed functionality of a task under the given nuisances.
    pub fn functionality(&self, task: &TaskPoint, nuisance: &Nuisance) -> Result<Point, AvError> {
        if task.scenario != self.config.task.scenario {
            return Err(AvError::Config(format!(
                "task scenario `{}` differs from the built scenario `{}`",
                task.scenario.name(),
                self.config.task.scenario.name()
            )));
        }
        let kappa = self.config.build.paths.curvature(task.curvature);
        Ok(Point::reals(&[task.speed, kappa, nuisance.w_scale, nuisance.drop_p]))
    }

    pub fn query(&self, task: &TaskPoint, nuisance: &Nuisance) -> Result<QueryReport, AvError> {
        let f = self.functionality(task, nuisance)?;
        let sol = self.diagram.solve_with(&f, &SolveOptions::default())?;
        let poset = sol.resources.poset().clone();
        let mut points: Vec<FrontPoint> = sol
            .resources
            .points()
            .iter()
            .zip(&sol.designs)
            .map(|(p, alts)| FrontPoint {
                resources: p.clone(),
                designs: alts.iter().map(labels).collect(),
                dispersion: alts.first().map(|a| self.dispersion(a)).unwrap_or_default(),
            })
            .collect();
        points.sort_by(|a, b| {
            let (ka, kb) = (sort_key(&poset, &a.resources), sort_key(&poset, &b.resources));
            ka.iter().zip(&kb).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
        });
        for p in &mut points {
            // distinct table rows can carry the same labels
            p.designs.sort();
            p.designs.dedup();
        }
        Ok(QueryReport {
            schema: EXPORT_SCHEMA_VERSION,
            task: *task,
            nuisance: *nuisance,
            functionality_poset: sol.functionality_poset,
            functionality: f,
            resource_poset: poset,
            points,
        })
    }

    fn dispersion(&self, a: &Assignment) -> BTreeMap<String, BTreeMap<String, f64>> {
        let mut out = BTreeMap::new();
        for node in ["lateral", "longitudinal"] {
            let (Some(choice), Some(n)) = (a.get(node), self.diagram.node(node)) else { continue };
            let NodeKind::Table { mdpi } = &n.kind else { continue };
            let imp = &mdpi.implementations[choice.index];
            if imp.dispersion.is_empty() {
                continue;
            }
            let m =
                mdpi.resources.components().iter().zip(&imp.dispersion).map(|(c, &s)| (c.name.clone(), s)).collect();
            out.insert(node.to_string(), m);
        }
        out
    }
}

fn labels(a: &Assignment) -> BTreeMap<String, String> {
    a.iter().map(|(k, c)| (k.clone(), c.design.join(" + "))).collect()
}

/// Minimal points of a two-dimensional projection with their corner path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Staircase {
    pub x: String,
    pub y: String,
    /// Minimal projected points sorted by `x`, with a design annotation.
    pub points: Vec<(f64, f64, String)>,
    /// Corners of the boundary of the upper set, from left to right.
    pub boundary: Vec<(f64, f64)>,
}

impl QueryReport {
    pub fn is_infeasible(&self) -> bool {
        self.points.is_empty()
    }

    pub fn antichain(&self) -> Result<Antichain, AvError> {
        Ok(Antichain::new(self.resource_poset.clone(), self.points.iter().map(|p| p.resources.clone()).collect())?)
    }

    pub fn rendered(&self, p: &FrontPoint) -> Vec<String> {
        self.resource_poset.components().iter().zip(&p.resources.0).map(|(c, v)| render_value(&c.order, v)).collect()
    }

    fn coordinate(&self, name: &str) -> Result<usize, AvError> {
        self.resource_poset.index_of(name).ok_or_else(|| AvError::Config(format!("no resource `{name}`")))
    }

    pub fn staircase(&self, x: &str, y: &str) -> Result<Staircase, AvError> {
        let (ix, iy) = (self.coordinate(x)?, self.coordinate(y)?);
        let mut pts = Vec::new();
        for p in &self.points {
            match (p.resources.real(ix), p.resources.real(iy)) {
                (Some(a), Some(b)) => pts.push((a, b, annotation(p))),
                _ => return Err(AvError::Export(format!("projection ({x}, {y}) is not real-valued"))),
            }
        }
        let proj: Vec<Point> = pts.iter().map(|&(a, b, _)| Point::reals(&[a, b])).collect();
        let mut keep: Vec<(f64, f64, String)> =
            pareto_min_groups(&Poset::reals([x, y]), &proj)?.into_iter().map(|g| pts[g[0]].clone()).collect();
        keep.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let mut boundary = Vec::new();
        for (i, &(a, b, _)) in keep.iter().enumerate() {
            if i > 0 {
                boundary.push((a, keep[i - 1].1));
            }
            boundary.push((a, b));
        }
        if boundary.windows(2).any(|w| w[1].1 > w[0].1 || w[1].0 < w[0].0) {
            return Err(AvError::Export(format!("staircase ({x}, {y}) is not monotone")));
        }
        Ok(Staircase { x: x.into(), y: y.into(), points: keep, boundary })
    }

    pub fn to_json(&self) -> Result<String, AvError> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Parses an exported report and re-validates the front as an antichain.
    pub fn from_json(s: &str) -> Result<Self, AvError> {
        let r: QueryReport = serde_json::from_str(s)?;
        if r.schema != EXPORT_SCHEMA_VERSION {
            return Err(AvError::Export(format!("export schema {} is not {}", r.schema, EXPORT_SCHEMA_VERSION)));
        }
        r.antichain()?;
        Ok(r)
    }

    /// One row per front point: resources, then the first alternative's labels.
    pub fn to_csv(&self) -> Result<String, AvError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<String> = self.resource_poset.components().iter().map(|c| c.name.clone()).collect();
        header.extend(NODE_NAMES.iter().map(|s| s.to_string()));
        w.write_record(&header)?;
        for p in &self.points {
            let mut row = self.rendered(p);
            let d = p.designs.first();
            row.extend(NODE_NAMES.iter().map(|n| d.and_then(|d| d.get(*n)).cloned().unwrap_or_default()));
            w.write_record(&row)?;
        }
        String::from_utf8(w.into_inner().map_err(|e| AvError::Export(e.to_string()))?)
            .map_err(|e| AvError::Export(e.to_string()))
    }
}

fn annotation(p: &FrontPoint) -> String {
    let Some(d) = p.designs.first() else { return String::new() };
    ["lateral", "longitudinal", "sensor", "computer"]
        .iter()
        .filter_map(|n| d.get(*n).map(|l| l.to_string()))
        .collect::<Vec<_>>()
        .join(" | ")
}

fn sha256(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn write_file(dir: &Path, name: &str, content: &str, files: &mut BTreeMap<String, String>) -> Result<(), AvError> {
    let path = dir.join(name);
    std::fs::write(&path, content).map_err(|e| AvError::Io(format!("{}: {e}", path.display())))?;
    files.insert(name.to_string(), sha256(content.as_bytes()));
    Ok(())
}

/// Writes the front as CSV and JSON plus projection and staircase data; returns
/// the SHA-256 of each file written.
pub fn write_exports(
    report: &QueryReport,
    projections: &[[String; 2]],
    dir: &Path,
) -> Result<BTreeMap<String, String>, AvError> {
    std::fs::create_dir_all(dir).map_err(|e| AvError::Io(format!("{}: {e}", dir.display())))?;
    let mut files = BTreeMap::new();
    write_file(dir, "front.csv", &report.to_csv()?, &mut files)?;
    write_file(dir, "front.json", &report.to_json()?, &mut files)?;
    for [x, y] in projections {
        let s = report.staircase(x, y)?;
        let mut pw = csv::Writer::from_writer(Vec::new());
        pw.write_record([x.as_str(), y.as_str(), "design"])?;
        for p in &report.points {
            let (a, b) = (p.resources.real(report.coordinate(x)?), p.resources.real(report.coordinate(y)?));
            pw.write_record([fmt_opt(a), fmt_opt(b), annotation(p)])?;
        }
        write_file(dir, &format!("projection_{x}_{y}.csv"), &csv_string(pw)?, &mut files)?;
        let mut sw = csv::Writer::from_writer(Vec::new());
        sw.write_record([x.as_str(), y.as_str()])?;
        for (a, b) in &s.boundary {
            sw.write_record([a.to_string(), b.to_string()])?;
        }
        write_file(dir, &format!("staircase_{x}_{y}.csv"), &csv_string(sw)?, &mut files)?;
    }
    Ok(files)
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn csv_string(w: csv::Writer<Vec<u8>>) -> Result<String, AvError> {
    String::from_utf8(w.into_inner().map_err(|e| AvError::Export(e.to_string()))?)
        .map_err(|e| AvError::Export(e.to_string()))
}

/// Everything needed to reproduce a CLI run. Contains no timestamps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: u32,
    pub cache_schema: u32,
    pub version: String,
    pub command: String,
    pub config_hash: String,
    pub catalog_hash: String,
    pub settings_hash: String,
    pub seed: u64,
    pub runs: usize,
    pub files: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(command: &str, config: &AvConfig, catalog: &Catalog, files: BTreeMap<String, String>) -> Self {
        Manifest {
            schema: EXPORT_SCHEMA_VERSION,
            cache_schema: CACHE_SCHEMA_VERSION,
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config_hash: config.hash(),
            catalog_hash: catalog.hash(),
            settings_hash: config.settings().outcome_hash(),
            seed: config.build.seed,
            runs: config.build.runs,
            files,
        }
    }

    pub fn file_hash(bytes: &[u8]) -> String {
        sha256(bytes)
    }

    pub fn write(&self, dir: &Path) -> Result<(), AvError> {
        std::fs::create_dir_all(dir).map_err(|e| AvError::Io(format!("{}: {e}", dir.display())))?;
        let path = dir.join("manifest.json");
        std::fs::write(&path, serde_json::to_string_pretty(self)? + "\n")
            .map_err(|e| AvError::Io(format!("{}: {e}", path.display())))
    }
}

/// Accepts `a,b|c,d`; `err` abbreviates `error`.
pub fn parse_projection(s: &str) -> Result<Vec<[String; 2]>, AvError> {
    let expand = |n: &str| -> Result<String, AvError> {
        let n = match n.trim() {
            "err" => "error",
            other => other,
        };
        if RESOURCE_NAMES.contains(&n) {
            Ok(n.to_string())
        } else {
            Err(AvError::Config(format!("unknown projection coordinate `{n}`")))
        }
    };
    s.split('|')
        .map(|pair| match pair.split(',').collect::<Vec<_>>().as_slice() {
            [a, b] => Ok([expand(a)?, expand(b)?]),
            _ => Err(AvError::Config(format!("projection `{pair}` is not of the form x,y"))),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepStep {
    pub from: TaskPoint,
    pub to: TaskPoint,
    /// Points of the harder task's front not dominated by the easier task's front.
    pub violations: Vec<Point>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub fronts: Vec<QueryReport>,
    pub steps: Vec<SweepStep>,
}

impl SweepReport {
    pub fn violations(&self) -> usize {
        self.steps.iter().map(|s| s.violations.len()).sum()
    }
}

/// Solves an ascending chain of tasks and checks that the upper set of each
/// front contains the upper set of the next.
pub fn sweep(study: &Study, tasks: &[TaskPoint], nuisance: &Nuisance) -> Result<SweepReport, AvError> {
    let fposet = Poset::reals(FUNCTIONALITY_NAMES[..2].iter().copied());
    for w in tasks.windows(2) {
        let (a, b) = (study.functionality(&w[0], nuisance)?, study.functionality(&w[1], nuisance)?);
        if !fposet.leq(&a.project(&[0, 1]), &b.project(&[0, 1]))? {
            return Err(AvError::Config(format!("sweep tasks {a} and {b} are not ascending")));
        }
    }
    let fronts: Vec<QueryReport> = tasks.iter().map(|t| study.query(t, nuisance)).collect::<Result<_, _>>()?;
    let mut steps = Vec::new();
    for (i, w) in fronts.windows(2).enumerate() {
        let poset = &w[0].resource_poset;
        let mut violations = Vec::new();
        for p in &w[1].points {
            let mut covered = false;
            for q in &w[0].points {
                if poset.leq(&q.resources, &p.resources)? {
                    covered = true;
                    break;
                }
            }
            if !covered {
                violations.push(p.resources.clone());
            }
        }
        steps.push(SweepStep { from: tasks[i], to: tasks[i + 1], violations });
    }
    Ok(SweepReport { fronts, steps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::av::testutil::study;
    use crate::design::FrequencyMode;
    use crate::order::pareto_min;
    use crate::plant::{CurvatureLevel, PathKind};

    fn task(level: CurvatureLevel, speed: f64) -> TaskPoint {
        TaskPoint::new(PathKind::NinetyDegreeTurn, level, speed)
    }

    /// Enumerates every controller row, sensor and computer and applies the
    /// diagram's constraints directly.
    fn brute_force(s: &Study, t: &TaskPoint, n: &Nuisance) -> Antichain {
        let kappa = s.config.build.paths.curvature(t.curvature);
        let need = [t.speed, kappa, n.w_scale, n.drop_p];
        let covers = |p: &Point| (0..4).all(|i| p.real(i).unwrap() >= need[i]);
        let vehicle = &s.config.build.sim.vehicle;
        let mut pts = Vec::new();
        for lat in s.lateral.implementations.iter().filter(|i| covers(&i.provides)) {
            for lon in s.longitudinal.implementations.iter().filter(|i| covers(&i.provides)) {
                for sen in &s.catalog.sensors {
                    if sen.v_scale > lat.provides.real(4).unwrap() || sen.v_scale > lon.provides.real(4).unwrap() {
                        continue;
                    }
                    for c in &s.catalog.computers {
                        let r = |i: &crate::codesign::Implementation, k| i.requires.real(k).unwrap();
                        if r(lat, 3) + r(lon, 2) > c.compute_capacity
                            || sen.power + c.power > s.config.diagram.vehicle.power
                            || sen.mass + c.mass > s.config.diagram.vehicle.payload
                            || t.speed > vehicle.v_max
                            || kappa > vehicle.delta_max.tan() / vehicle.wheelbase
                        {
                            continue;
                        }
                        let mut p =
                            Point::reals(&[sen.cost + c.cost, r(lat, 0), r(lat, 1), r(lon, 0), r(lat, 2) + r(lon, 1)]);
                        p.0.push(Value::label(0));
                        pts.push(p);
                    }
                }
            }
        }
        let poset = s.diagram.resource_poset().unwrap();
        pareto_min(&poset, &pts).unwrap()
    }

    #[test]
    fn front_matches_exhaustive_enumeration() {
        let s = study(FrequencyMode::Neglected, &["a", "b", "c", "d", "e"]);
        for t in [task(CurvatureLevel::Low, 8.0), task(CurvatureLevel::High, 15.0), task(CurvatureLevel::Low, 5.0)] {
            for n in [Nuisance::default(), Nuisance { w_scale: 4.0, drop_p: 0.1 }] {
                let r = s.query(&t, &n).unwrap();
                let oracle = brute_force(&s, &t, &n);
                assert!(oracle.len() > 1, "{}", oracle.len());
                assert!(r.antichain().unwrap().same_points(&oracle), "{:?}", t);
            }
        }
    }

    #[test]
    fn singleton_design_space_gives_its_point() {
        let mut s = study(FrequencyMode::Neglected, &["only"]);
        s.catalog.sensors.truncate(1);
        s.catalog.computers.truncate(1);
        s.catalog.computers[0].compute_capacity = 100.0;
        s.longitudinal.implementations.retain(|i| i.design[0].starts_with("pid(kp=1;"));
        let s = Study::from_relations(
            &s.config,
            &s.catalog,
            crate::design::EmpiricalRelation::from_mdpi(&s.lateral),
            crate::design::EmpiricalRelation::from_mdpi(&s.longitudinal),
        )
        .unwrap();
        let r = s.query(&task(CurvatureLevel::Low, 8.0), &Nuisance::default()).unwrap();
        assert_eq!(r.points.len(), 1);
        assert_eq!(r.brute_cost(), s.catalog.sensors[0].cost + s.catalog.computers[0].cost);
        assert_eq!(r.points[0].designs[0]["sensor"], s.catalog.sensors[0].name);
    }

    impl QueryReport {
        fn brute_cost(&self) -> f64 {
            self.points[0].resources.real(0).unwrap()
        }
    }

    #[test]
    fn infeasible_query_is_empty() {
        let s = study(FrequencyMode::Neglected, &["a"]);
        let r = s.query(&task(CurvatureLevel::High, 25.0), &Nuisance::default()).unwrap();
        assert!(r.is_infeasible());
        assert_eq!(r.to_csv().unwrap().lines().count(), 1);
    }

    #[test]
    fn exports_round_trip_and_are_deterministic() {
        let s = study(FrequencyMode::Neglected, &["a", "b", "c", "d", "e"]);
        let r = s.query(&task(CurvatureLevel::Low, 8.0), &Nuisance::default()).unwrap();
        assert_eq!(r.to_csv().unwrap().lines().count(), r.points.len() + 1);
        let back = QueryReport::from_json(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
        let proj = parse_projection("err,effort|cost,err").unwrap();
        let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let f1 = write_exports(&r, &proj, d1.path()).unwrap();
        let f2 =
            write_exports(&s.query(&task(CurvatureLevel::Low, 8.0), &Nuisance::default()).unwrap(), &proj, d2.path())
                .unwrap();
        assert_eq!(f1, f2);
        assert!(f1.contains_key("staircase_cost_error.csv"));
        for name in f1.keys() {
            assert_eq!(std::fs::read(d1.path().join(name)).unwrap(), std::fs::read(d2.path().join(name)).unwrap());
        }
    }

    #[test]
    fn tampered_front_is_rejected_on_load() {
        let s = study(FrequencyMode::Neglected, &["a", "b", "c"]);
        let mut r = s.query(&task(CurvatureLevel::Low, 8.0), &Nuisance::default()).unwrap();
        let mut worse = r.points[0].clone();
        worse.resources.0[0] = Value::Real(worse.resources.real(0).unwrap() + 1.0);
        r.points.push(worse);
        assert!(QueryReport::from_json(&r.to_json().unwrap()).is_err());
    }

    #[test]
    fn staircases_are_monotone() {
        let s = study(FrequencyMode::Neglected, &["a", "b", "c", "d", "e", "f", "g"]);
        let r = s.query(&task(CurvatureLevel::High, 8.0), &Nuisance::default()).unwrap();
        for [x, y] in [["error", "effort"], ["cost", "error"], ["discomfort", "speed_error"]] {
            let st = r.staircase(x, y).unwrap();
            assert!(st.points.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 > w[1].1));
            assert!(st.boundary.windows(2).all(|w| w[1].1 <= w[0].1));
        }
        assert!(r.staircase("error", "danger").is_err());
    }

    #[test]
    fn sweep_fronts_are_nested() {
        let s = study(FrequencyMode::Neglected, &["a", "b", "c", "d"]);
        let n = Nuisance::default();
        let one = sweep(&s, &[task(CurvatureLevel::Low, 8.0)], &n).unwrap();
        assert!(one.steps.is_empty() && one.violations() == 0);
        let chain = [task(CurvatureLevel::Low, 8.0), task(CurvatureLevel::High, 8.0), task(CurvatureLevel::High, 15.0)];
        let rep = sweep(&s, &chain, &n).unwrap();
        assert_eq!(rep.violations(), 0);
        let same = sweep(&s, &[chain[0], chain[0]], &n).unwrap();
        assert_eq!(same.fronts[0], same.fronts[1]);
        assert!(sweep(&s, &[chain[2], chain[0]], &n).is_err());
    }

    #[test]
    fn projection_parsing() {
        assert_eq!(parse_projection("err,effort").unwrap(), vec![["error".to_string(), "effort".to_string()]]);
        assert!(parse_projection("error").is_err());
        assert!(parse_projection("error,speed").is_err());
    }

    #[test]
    fn explicit_mode_diagram_solves() {
        let s = study(FrequencyMode::Explicit, &["a", "b"]);
        let r = s.query(&task(CurvatureLevel::Low, 8.0), &Nuisance::default()).unwrap();
        // only the camera reaches the synthetic controllers' update rate
        assert!(r.points.iter().all(|p| p.designs[0]["sensor"] == "basler_ace_251gm"));
    }
}
