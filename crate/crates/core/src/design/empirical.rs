use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{snap, CacheKey, DesignError, Family, ParamSet, SimCache, StepCosts};
use crate::codesign::{Design, Implementation, Mdpi};
use crate::control::{
    monte_carlo, ControllerChoice, LateralController, PidParams, SimConfig, SimOutcome, StanleyParams, Task,
};
use crate::order::{pareto_min_groups, Point, Poset, SymMatrix};
use crate::plant::{make_path, CurvatureLevel, NoiseSpec, PathConfig, PathKind, PathSpec};

/// Scenario, curvature level and cruise speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskPoint {
    pub scenario: PathKind,
    pub curvature: CurvatureLevel,
    pub speed: f64,
}

impl TaskPoint {
    pub fn new(scenario: PathKind, curvature: CurvatureLevel, speed: f64) -> Self {
        TaskPoint { scenario, curvature, speed }
    }

    /// (speed, curvature) as reals.
    pub fn point(&self, paths: &PathConfig) -> Point {
        Point::reals(&[self.speed, paths.curvature(self.curvature)])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseCell {
    pub w_scale: f64,
    pub v_scale: f64,
    pub drop_p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseGrid {
    pub w_scales: Vec<f64>,
    pub v_scales: Vec<f64>,
    pub drop_p: Vec<f64>,
}

impl Default for NoiseGrid {
    fn default() -> Self {
        NoiseGrid { w_scales: vec![1.0, 4.0, 16.0], v_scales: vec![1.0, 4.0, 16.0], drop_p: vec![0.0, 0.1, 0.3] }
    }
}

impl NoiseGrid {
    pub fn cells(&self) -> Vec<NoiseCell> {
        let mut out = Vec::new();
        for &w_scale in &self.w_scales {
            for &drop_p in &self.drop_p {
                for &v_scale in &self.v_scales {
                    out.push(NoiseCell { w_scale, v_scale, drop_p });
                }
            }
        }
        out
    }
}

/// How the computation resource of a controller is expressed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrequencyMode {
    /// Controllers run at fixed rates and require operations per second.
    #[default]
    Neglected,
    /// Controllers require a per-update load and an update frequency.
    Explicit,
}

/// Everything besides the parameter grid that determines simulated outcomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildSettings {
    pub sim: SimConfig,
    pub paths: PathConfig,
    /// Length of the straight pieces around the manoeuvre [m].
    pub straight: f64,
    pub base_w: [f64; 5],
    pub base_v: [f64; 5],
    pub runs: usize,
    pub seed: u64,
    /// Metrics exported as resources by lateral and longitudinal controllers.
    pub lateral_metrics: Vec<String>,
    pub longitudinal_metrics: Vec<String>,
    /// Longitudinal controller used while sweeping lateral parameters.
    pub reference_pid: PidParams,
    /// Lateral controller used while sweeping speed-controller parameters.
    pub reference_lateral: LateralController,
    pub step_costs: StepCosts,
    pub frequency_mode: FrequencyMode,
}

impl Default for BuildSettings {
    fn default() -> Self {
        BuildSettings {
            sim: SimConfig::default(),
            paths: PathConfig::default(),
            straight: 10.0,
            base_w: [0.01, 0.01, 4e-4, 4e-4, 0.01],
            base_v: [0.04, 0.04, 0.0025, 4e-4, 0.01],
            runs: 100,
            seed: 0,
            lateral_metrics: vec!["e_p_tot".into(), "delta_tot".into(), "steering_rate_tot".into()],
            longitudinal_metrics: vec!["speed_err_tot".into(), "accel_tot".into()],
            reference_pid: PidParams { kp: 1.0, ki: 0.1, kd: 0.01, v_t: 0.0 },
            reference_lateral: LateralController::Stanley(StanleyParams { g: 1.0 }),
            step_costs: StepCosts::default(),
            frequency_mode: FrequencyMode::Neglected,
        }
    }
}

impl BuildSettings {
    /// Digest of the settings that affect simulated outcomes.
    pub fn outcome_hash(&self) -> String {
        let key = serde_json::json!({
            "sim": self.sim,
            "paths": self.paths,
            "straight": self.straight,
            "base_w": self.base_w,
            "base_v": self.base_v,
            "reference_pid": self.reference_pid,
            "reference_lateral": self.reference_lateral,
        });
        hex::encode(&Sha256::digest(key.to_string().as_bytes())[..8])
    }

    /// Update rate of a family [Hz].
    pub fn frequency(&self, family: Family) -> f64 {
        let period = if family == Family::Nmpc { self.sim.nmpc_period } else { self.sim.control_period };
        snap(1.0 / period)
    }

    pub fn metrics(&self, family: Family) -> &[String] {
        if family.is_lateral() {
            &self.lateral_metrics
        } else {
            &self.longitudinal_metrics
        }
    }
}

/// Measurement and process noise of a cell; the seed is set per run.
pub fn cell_noise(cell: &NoiseCell, settings: &BuildSettings) -> Result<NoiseSpec, DesignError> {
    let w = SymMatrix::diagonal(&settings.base_w).scaled(cell.w_scale);
    let v = SymMatrix::diagonal(&settings.base_v).scaled(cell.v_scale);
    Ok(NoiseSpec::new(w, v, cell.drop_p, settings.seed)?)
}

/// Reference path of a task: the manoeuvre framed by two straights.
pub fn task_path(task: &TaskPoint, settings: &BuildSettings) -> Result<PathSpec, DesignError> {
    let kappa = settings.paths.curvature(task.curvature);
    let manoeuvre = match task.scenario {
        PathKind::NinetyDegreeTurn => FRAC_PI_2 / kappa,
        PathKind::LaneChange => {
            let r = 1.0 / kappa;
            2.0 * r * (1.0 - settings.paths.lane_offset / (2.0 * r)).clamp(-1.0, 1.0).acos()
        }
        PathKind::Straight => 0.0,
    };
    Ok(make_path(
        task.scenario,
        task.curvature,
        manoeuvre + 2.0 * settings.straight,
        &settings.paths,
        &settings.sim.vehicle,
    )?)
}

/// Functionality of a controller design problem: the task, then the tolerated nuisances.
pub fn controller_functionality() -> Poset {
    Poset::reals(["speed", "curvature", "w_scale", "drop_p", "v_scale"])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub functionality: Point,
    pub resources: Point,
    pub design: Design,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dispersion: Vec<f64>,
}

/// Raw (functionality, resources, design) observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalRelation {
    pub name: String,
    pub functionality: Poset,
    pub resources: Poset,
    pub samples: Vec<Sample>,
}

impl EmpiricalRelation {
    /// Distinct sample functionalities in order of first appearance.
    pub fn functionality_grid(&self) -> Vec<Point> {
        let mut out: Vec<Point> = Vec::new();
        for s in &self.samples {
            if !out.contains(&s.functionality) {
                out.push(s.functionality.clone());
            }
        }
        out
    }

    pub fn from_mdpi(m: &Mdpi) -> Self {
        EmpiricalRelation {
            name: m.name.clone(),
            functionality: m.functionality.clone(),
            resources: m.resources.clone(),
            samples: m
                .implementations
                .iter()
                .map(|i| Sample {
                    functionality: i.provides.clone(),
                    resources: i.requires.clone(),
                    design: i.design.clone(),
                    dispersion: i.dispersion.clone(),
                })
                .collect(),
        }
    }

    /// Samples carrying design `label`.
    pub fn restrict(&self, label: &str) -> EmpiricalRelation {
        EmpiricalRelation {
            samples: self.samples.iter().filter(|s| s.design.len() == 1 && s.design[0] == label).cloned().collect(),
            ..self.clone()
        }
    }
}

/// Upper closure over a functionality grid: for every grid point and design,
/// the minimal resources among that design's samples whose functionality
/// dominates the grid point.
pub fn monotonize(rel: &EmpiricalRelation, grid: &[Point]) -> Result<Mdpi, DesignError> {
    let mut designs: Vec<&Design> = Vec::new();
    for s in &rel.samples {
        if !designs.contains(&&s.design) {
            designs.push(&s.design);
        }
    }
    let mut impls = Vec::new();
    for f in grid {
        rel.functionality.check(f)?;
        for d in &designs {
            let mut cands: Vec<&Sample> = Vec::new();
            for s in rel.samples.iter().filter(|s| &&s.design == d) {
                if rel.functionality.leq(f, &s.functionality)? {
                    cands.push(s);
                }
            }
            let pts: Vec<Point> = cands.iter().map(|s| s.resources.clone()).collect();
            for g in pareto_min_groups(&rel.resources, &pts)? {
                let s = cands[g[0]];
                impls.push(Implementation {
                    design: s.design.clone(),
                    provides: f.clone(),
                    requires: s.resources.clone(),
                    dispersion: s.dispersion.clone(),
                });
            }
        }
    }
    Ok(Mdpi::new(rel.name.clone(), rel.functionality.clone(), rel.resources.clone(), impls)?)
}

fn resource_poset(settings: &BuildSettings, family: Family) -> Poset {
    let mut names: Vec<String> = settings.metrics(family).to_vec();
    match settings.frequency_mode {
        FrequencyMode::Neglected => names.push("computation".into()),
        FrequencyMode::Explicit => {
            names.push("load".into());
            names.push("frequency".into());
        }
    }
    Poset::reals(names)
}

/// Simulates every parameter set on every task and noise cell, reusing and
/// filling `cache`. All parameter sets must be lateral, or all longitudinal.
pub fn build_controller_relation(
    name: &str,
    params: &[ParamSet],
    tasks: &[TaskPoint],
    noise: &NoiseGrid,
    settings: &BuildSettings,
    mut cache: Option<&mut SimCache>,
) -> Result<EmpiricalRelation, DesignError> {
    let lateral = params.first().is_none_or(|p| p.family.is_lateral());
    if params.iter().any(|p| p.family.is_lateral() != lateral) {
        return Err(DesignError::Catalog(format!("{name}: mixes lateral and longitudinal controllers")));
    }
    let family_for_metrics = if lateral { Family::Stanley } else { Family::Pid };
    let resources = resource_poset(settings, family_for_metrics);
    let metrics = settings.metrics(family_for_metrics).to_vec();
    let hash = settings.outcome_hash();
    let mut samples = Vec::new();
    for task in tasks {
        let path = task_path(task, settings)?;
        let sim_task = Task { path, v_t: task.speed };
        for cell in noise.cells() {
            let spec = cell_noise(&cell, settings)?;
            for p in params {
                let choice = match (p.lateral(), p.pid()) {
                    (Some(lateral), _) => ControllerChoice { lateral, pid: settings.reference_pid },
                    (None, Some(pid)) => ControllerChoice { lateral: settings.reference_lateral, pid },
                    (None, None) => unreachable!("a parameter set is lateral or longitudinal"),
                };
                let key = CacheKey::new(p, task, &cell, settings.runs, settings.seed, &hash);
                let outcome: SimOutcome = match cache.as_deref().and_then(|c| c.get(&key)) {
                    Some(o) => o.clone(),
                    None => {
                        let o = monte_carlo(&choice, &sim_task, &spec, &settings.sim, settings.runs, settings.seed);
                        if let Some(c) = cache.as_deref_mut() {
                            c.insert(key, o.clone());
                        }
                        o
                    }
                };
                if outcome.runs == 0 {
                    continue;
                }
                let mut r = Vec::new();
                let mut disp = Vec::new();
                for m in &metrics {
                    let s = outcome.summary(m).ok_or_else(|| DesignError::Catalog(format!("unknown metric `{m}`")))?;
                    r.push(snap(s.mean));
                    disp.push(s.std_err);
                }
                let freq = settings.frequency(p.family);
                match settings.frequency_mode {
                    FrequencyMode::Neglected => {
                        r.push(snap(super::computation_model(&settings.step_costs, p, freq)));
                        disp.push(0.0);
                    }
                    FrequencyMode::Explicit => {
                        r.push(snap(settings.step_costs.per_step(p)));
                        r.push(freq);
                        disp.extend([0.0, 0.0]);
                    }
                }
                let kappa = settings.paths.curvature(task.curvature);
                samples.push(Sample {
                    functionality: Point::reals(&[task.speed, kappa, cell.w_scale, cell.drop_p, cell.v_scale]),
                    resources: Point::reals(&r),
                    design: vec![p.label.clone()],
                    dispersion: disp,
                });
            }
        }
    }
    Ok(EmpiricalRelation { name: name.to_string(), functionality: controller_functionality(), resources, samples })
}
