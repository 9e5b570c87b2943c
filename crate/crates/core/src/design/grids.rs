use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::DesignError;
use crate::control::{
    LateralController, LqrParams, NmpcParams, PathApprox, PidParams, PurePursuitParams, RefPoint, StanleyParams,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Stanley,
    PurePursuit,
    Lqr,
    Nmpc,
    Pid,
}

impl Family {
    pub const ALL: [Family; 5] = [Family::Stanley, Family::PurePursuit, Family::Lqr, Family::Nmpc, Family::Pid];

    pub fn name(self) -> &'static str {
        match self {
            Family::Stanley => "stanley",
            Family::PurePursuit => "pure_pursuit",
            Family::Lqr => "lqr",
            Family::Nmpc => "nmpc",
            Family::Pid => "pid",
        }
    }

    pub fn is_lateral(self) -> bool {
        self != Family::Pid
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = DesignError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "stanley" => Ok(Family::Stanley),
            "pure_pursuit" | "pp" => Ok(Family::PurePursuit),
            "lqr" => Ok(Family::Lqr),
            "nmpc" => Ok(Family::Nmpc),
            "pid" => Ok(Family::Pid),
            _ => Err(DesignError::UnknownFamily(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamsKind {
    Stanley(StanleyParams),
    PurePursuit(PurePursuitParams),
    Lqr(LqrParams),
    Nmpc(NmpcParams),
    Pid(PidParams),
}

/// One parameter combination of a controller family with its label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSet {
    pub family: Family,
    pub label: String,
    pub kind: ParamsKind,
}

impl ParamSet {
    pub fn lateral(&self) -> Option<LateralController> {
        match self.kind {
            ParamsKind::Stanley(p) => Some(LateralController::Stanley(p)),
            ParamsKind::PurePursuit(p) => Some(LateralController::PurePursuit(p)),
            ParamsKind::Lqr(p) => Some(LateralController::Lqr(p)),
            ParamsKind::Nmpc(p) => Some(LateralController::Nmpc(p)),
            ParamsKind::Pid(_) => None,
        }
    }

    pub fn pid(&self) -> Option<PidParams> {
        match self.kind {
            ParamsKind::Pid(p) => Some(p),
            _ => None,
        }
    }
}

fn matrix_label(q: &[[f64; 2]; 2]) -> String {
    if q[0][1] == 0.0 && q[1][0] == 0.0 {
        if q[0][0] == q[1][1] {
            format!("{}*I", q[0][0])
        } else {
            format!("diag({};{})", q[0][0], q[1][1])
        }
    } else {
        format!("[[{};{}];[{};{}]]", q[0][0], q[0][1], q[1][0], q[1][1])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StanleyGrid {
    pub g: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PurePursuitGrid {
    pub lookahead: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LqrGrid {
    pub q: Vec<[[f64; 2]; 2]>,
    pub r: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NmpcGrid {
    pub horizon: Vec<usize>,
    pub r: Vec<f64>,
    /// Error weights are these multiples of the identity.
    pub q_scale: Vec<f64>,
    #[serde(default)]
    pub path_approx: PathApprox,
    #[serde(default = "cog")]
    pub ref_point: RefPoint,
    #[serde(default = "nmpc_step")]
    pub step: f64,
}

fn cog() -> RefPoint {
    RefPoint::CenterOfGravity
}

fn nmpc_step() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PidGrid {
    pub kp: Vec<f64>,
    pub ki: Vec<f64>,
    pub kd: Vec<f64>,
}

/// Parameter grids of every controller family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerGrids {
    pub stanley: StanleyGrid,
    pub pure_pursuit: PurePursuitGrid,
    pub lqr: LqrGrid,
    pub nmpc: NmpcGrid,
    pub pid: PidGrid,
}

impl Default for ControllerGrids {
    fn default() -> Self {
        let eye = |k: f64| [[k, 0.0], [0.0, k]];
        // k * (1 - 0.9 e_3): the second diagonal entry is a tenth of the first
        let tilted = |k: f64, k10: f64| [[k, 0.0], [0.0, k10]];
        ControllerGrids {
            stanley: StanleyGrid { g: vec![0.05, 0.1, 0.5, 1.0, 1.5, 2.0] },
            pure_pursuit: PurePursuitGrid { lookahead: vec![0.01, 0.05, 0.5, 1.0, 2.0] },
            lqr: LqrGrid {
                q: vec![eye(0.1), eye(1.0), eye(10.0), tilted(0.2, 0.02), tilted(1.0, 0.1), tilted(5.0, 0.5)],
                r: vec![0.001, 0.05, 0.5, 1.0, 10.0],
            },
            nmpc: NmpcGrid {
                horizon: vec![10, 15, 20, 25],
                r: vec![0.05, 0.5, 1.0, 5.0],
                q_scale: vec![0.01, 0.1, 1.0, 10.0],
                path_approx: PathApprox::Linear,
                ref_point: cog(),
                step: nmpc_step(),
            },
            pid: PidGrid {
                kp: vec![0.1, 0.5, 1.0, 2.0],
                ki: vec![0.01, 0.1, 0.5, 1.0],
                kd: vec![0.01, 0.05, 0.1, 1.0],
            },
        }
    }
}

impl ControllerGrids {
    /// Parameter sets of `family` in grid order.
    pub fn params(&self, family: Family) -> Result<Vec<ParamSet>, DesignError> {
        let mut out = Vec::new();
        let mut push = |label: String, kind: ParamsKind| out.push(ParamSet { family, label, kind });
        match family {
            Family::Stanley => {
                for &g in &self.stanley.g {
                    push(format!("stanley(g={g})"), ParamsKind::Stanley(StanleyParams::new(g)?));
                }
            }
            Family::PurePursuit => {
                for &l in &self.pure_pursuit.lookahead {
                    push(format!("pure_pursuit(L={l})"), ParamsKind::PurePursuit(PurePursuitParams::new(l)?));
                }
            }
            Family::Lqr => {
                for q in &self.lqr.q {
                    for &r in &self.lqr.r {
                        push(format!("lqr(Q={};R={r})", matrix_label(q)), ParamsKind::Lqr(LqrParams::new(*q, r)?));
                    }
                }
            }
            Family::Nmpc => {
                let g = &self.nmpc;
                for &n in &g.horizon {
                    for &r in &g.r {
                        for &k in &g.q_scale {
                            let q = [[k, 0.0], [0.0, k]];
                            let p = NmpcParams {
                                path_approx: g.path_approx,
                                ref_point: g.ref_point,
                                step: g.step,
                                ..NmpcParams::new(q, r, n)?
                            };
                            p.validate()?;
                            push(format!("nmpc(n_h={n};R={r};Q={})", matrix_label(&q)), ParamsKind::Nmpc(p));
                        }
                    }
                }
            }
            Family::Pid => {
                for &kp in &self.pid.kp {
                    for &ki in &self.pid.ki {
                        for &kd in &self.pid.kd {
                            push(
                                format!("pid(kp={kp};ki={ki};kd={kd})"),
                                ParamsKind::Pid(PidParams::new(kp, ki, kd, 0.0)?),
                            );
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Table I grid of `family`.
pub fn controller_grid(family: Family) -> Vec<ParamSet> {
    ControllerGrids::default().params(family).expect("default grids are valid")
}
