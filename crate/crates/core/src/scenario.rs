//! Scenario files: TOML documents describing the task formula, waypoints,
//! speed zones, obstacles and solver settings.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use thiserror::Error;

use crate::barrier::BarrierParams;
use crate::control::{AlphaFn, ControlConfig, Dynamics};
use crate::replan::ReplanParams;
use crate::sim::{
    schedule_tasks, Motion, Obstacle, Schedule, Shape, SpeedCaps, World, Zone, ZoneMode,
    DEFAULT_OBSTACLE_RADIUS, DEFAULT_SAFETY_MARGIN,
};
use crate::stl::{parse_formula_with, Formula, Predicate};

/// The train-station scenario with four sequential goals.
pub const STATION_CFG: &str = include_str!("../scenarios/station.cfg");
/// One long reach task whose last stretch runs through a slow zone.
pub const SLOW_ZONE_CFG: &str = include_str!("../scenarios/slow_zone.cfg");

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed scenario: {0}")]
    Parse(String),
    #[error("invalid scenario:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    formula: RawFormula,
    #[serde(default)]
    waypoints: BTreeMap<String, [f64; 2]>,
    #[serde(default)]
    zones: Vec<RawZone>,
    #[serde(default)]
    obstacles: Vec<RawObstacle>,
    #[serde(default)]
    dynamics: RawDynamics,
    #[serde(default)]
    barrier: RawBarrier,
    #[serde(default)]
    replan: RawReplan,
    #[serde(default)]
    sim: RawSim,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFormula {
    text: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawZone {
    name: String,
    mode: String,
    v_max: Option<f64>,
    rect: Option<RawRect>,
    circle: Option<RawCircle>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRect {
    min: [f64; 2],
    max: [f64; 2],
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCircle {
    center: [f64; 2],
    radius: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawObstacle {
    id: String,
    radius: Option<f64>,
    safe_distance: Option<f64>,
    #[serde(rename = "static")]
    fixed: Option<RawStatic>,
    rhodonea: Option<RawRhodonea>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStatic {
    center: [f64; 2],
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRhodonea {
    center: [f64; 2],
    amplitude: f64,
    petals: f64,
    rate: f64,
    phase: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDynamics {
    model: String,
    #[serde(default = "default_chassis_radius")]
    chassis_radius: f64,
}

fn default_chassis_radius() -> f64 {
    0.2
}

impl Default for RawDynamics {
    fn default() -> Self {
        RawDynamics {
            model: "three_wheel_omni".into(),
            chassis_radius: default_chassis_radius(),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBarrier {
    eta: Option<f64>,
    kappa: Option<f64>,
    r: Option<f64>,
    gamma0: Option<f64>,
    gamma_inf: Option<f64>,
    h_cap: Option<f64>,
    q_diag: Option<[f64; 3]>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawReplan {
    p_i: Option<f64>,
    p_r: Option<f64>,
    floor: Option<f64>,
    enabled: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSim {
    dt: Option<f64>,
    seed: Option<u64>,
    proximity: Option<f64>,
    standard_vmax: Option<f64>,
    crowded_vmax: Option<f64>,
    corridor_vmax: Option<f64>,
    start: Option<RawStart>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawStart {
    Waypoint(String),
    Pose(Vec<f64>),
}

/// Command-line overrides applied before validation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub dt: Option<f64>,
    pub seed: Option<u64>,
    pub eta: Option<f64>,
    pub kappa: Option<f64>,
    pub no_retime: bool,
}

/// A validated scenario, ready to simulate.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub formula_text: String,
    pub formula: Formula,
    pub waypoints: BTreeMap<String, [f64; 2]>,
    pub world: World,
    pub dynamics: Dynamics,
    pub barrier: BarrierParams,
    pub alpha: AlphaFn,
    pub q_diag: [f64; 3],
    pub replan: ReplanParams,
    /// Deadline retiming from speed caps; off runs every task against its
    /// window end.
    pub retime: bool,
    pub dt: f64,
    pub seed: u64,
    pub start: [f64; 3],
}

impl Scenario {
    pub fn control_config(&self, v_max: f64) -> ControlConfig {
        ControlConfig {
            q: Matrix3::from_diagonal(&Vector3::from(self.q_diag)),
            alpha: self.alpha,
            v_max,
        }
    }

    /// Task schedule with tasks named after their goal waypoint when the
    /// goal is a single waypoint ball.
    pub fn schedule(&self) -> Schedule {
        let mut sched = schedule_tasks(&self.formula).expect("validated at load time");
        let mut used: BTreeMap<String, usize> = BTreeMap::new();
        for task in &mut sched.tasks {
            let name = match task.reach.as_slice() {
                [lit] if !lit.negated => match &lit.predicate {
                    Predicate::BallReach { center, .. } => self
                        .waypoints
                        .iter()
                        .find(|(_, p)| center.as_slice() == p.as_slice())
                        .map(|(n, _)| n.clone()),
                    _ => None,
                },
                _ => None,
            };
            if let Some(n) = name {
                let count = used.entry(n.clone()).or_insert(0);
                *count += 1;
                task.label = if *count == 1 {
                    n
                } else {
                    format!("{n}_{count}")
                };
            }
        }
        sched
    }
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    load_scenario_with(path, &Overrides::default())
}

pub fn load_scenario_with(path: &Path, ov: &Overrides) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".into());
    parse_scenario(&text, &name, ov)
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

struct Errors(Vec<String>);

impl Errors {
    fn check(&mut self, ok: bool, msg: impl fmt::Display) {
        if !ok {
            self.0.push(msg.to_string());
        }
    }
}

fn positive(v: f64) -> bool {
    v > 0.0 && v.is_finite()
}

pub fn parse_scenario(text: &str, name: &str, ov: &Overrides) -> Result<Scenario, ScenarioError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
    let mut errs = Errors(Vec::new());

    for (n, p) in &raw.waypoints {
        errs.check(
            is_ident(n),
            format!("waypoint name `{n}` must be an identifier"),
        );
        errs.check(
            !matches!(
                n.as_str(),
                "true" | "ball" | "clear" | "half" | "F" | "G" | "U"
            ),
            format!("waypoint name `{n}` is reserved"),
        );
        errs.check(
            p.iter().all(|v| v.is_finite()),
            format!("waypoint `{n}` is not finite"),
        );
    }

    let lookup = |id: &str| raw.waypoints.get(id).map(|p| p.to_vec());
    let formula = match parse_formula_with(&raw.formula.text, &lookup) {
        Ok(f) => Some(f),
        Err(e) => {
            errs.0.push(format!("formula: {e}"));
            None
        }
    };

    let mut zones = Vec::new();
    for z in &raw.zones {
        let mode = ZoneMode::from_name(&z.mode);
        errs.check(
            mode.is_some(),
            format!(
                "zone `{}`: mode `{}` is not standard, crowded or corridor",
                z.name, z.mode
            ),
        );
        if let Some(v) = z.v_max {
            errs.check(
                positive(v),
                format!("zone `{}`: v_max = {v} must be positive", z.name),
            );
        }
        let shape = match (&z.rect, &z.circle) {
            (Some(r), None) => {
                errs.check(
                    r.min[0] < r.max[0] && r.min[1] < r.max[1],
                    format!("zone `{}`: rect min must be below max", z.name),
                );
                Some(Shape::Rect {
                    min: r.min,
                    max: r.max,
                })
            }
            (None, Some(c)) => {
                errs.check(
                    positive(c.radius),
                    format!("zone `{}`: radius must be positive", z.name),
                );
                Some(Shape::Circle {
                    center: c.center,
                    radius: c.radius,
                })
            }
            _ => {
                errs.0.push(format!(
                    "zone `{}`: give exactly one of rect or circle",
                    z.name
                ));
                None
            }
        };
        if let (Some(mode), Some(shape)) = (mode, shape) {
            zones.push(Zone {
                name: z.name.clone(),
                shape,
                mode,
                v_max: z.v_max,
            });
        }
    }

    let seed = ov.seed.or(raw.sim.seed).unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut obstacles: Vec<Obstacle> = Vec::new();
    for o in &raw.obstacles {
        errs.check(
            is_ident(&o.id),
            format!("obstacle id `{}` must be an identifier", o.id),
        );
        errs.check(
            obstacles.iter().all(|p| p.id != o.id),
            format!("obstacle id `{}` is used twice", o.id),
        );
        let radius = o.radius.unwrap_or(DEFAULT_OBSTACLE_RADIUS);
        let safe = o.safe_distance.unwrap_or(radius + DEFAULT_SAFETY_MARGIN);
        errs.check(
            positive(radius),
            format!("obstacle `{}`: radius must be positive", o.id),
        );
        errs.check(
            safe > radius,
            format!(
                "obstacle `{}`: safe_distance {safe} must exceed radius {radius}",
                o.id
            ),
        );
        // Phase is drawn even when given so that the stream does not depend
        // on which obstacles set one.
        let drawn_phase = rng.gen_range(0.0..std::f64::consts::TAU);
        let motion = match (&o.fixed, &o.rhodonea) {
            (Some(s), None) => Some(Motion::Static { center: s.center }),
            (None, Some(r)) => {
                errs.check(
                    r.amplitude >= 0.0 && r.amplitude.is_finite(),
                    format!("obstacle `{}`: amplitude must be non-negative", o.id),
                );
                errs.check(
                    r.rate.is_finite() && r.petals.is_finite(),
                    format!("obstacle `{}`: rate and petals must be finite", o.id),
                );
                Some(Motion::Rhodonea {
                    center: r.center,
                    amplitude: r.amplitude,
                    petals: r.petals,
                    rate: r.rate,
                    phase: r.phase.unwrap_or(drawn_phase),
                })
            }
            _ => {
                errs.0.push(format!(
                    "obstacle `{}`: give exactly one of static or rhodonea",
                    o.id
                ));
                None
            }
        };
        if let Some(motion) = motion {
            obstacles.push(Obstacle {
                id: o.id.clone(),
                radius,
                safe_distance: safe,
                motion,
            });
        }
    }

    let defaults = SpeedCaps::default();
    let caps = SpeedCaps {
        standard: raw.sim.standard_vmax.unwrap_or(defaults.standard),
        crowded: raw.sim.crowded_vmax.unwrap_or(defaults.crowded),
        corridor: raw.sim.corridor_vmax.unwrap_or(defaults.corridor),
        proximity: raw.sim.proximity.unwrap_or(defaults.proximity),
    };
    for (n, v) in [
        ("standard_vmax", caps.standard),
        ("crowded_vmax", caps.crowded),
        ("corridor_vmax", caps.corridor),
    ] {
        errs.check(positive(v), format!("sim.{n} = {v} must be positive"));
    }
    errs.check(
        caps.proximity >= 0.0 && caps.proximity.is_finite(),
        format!("sim.proximity = {} must be non-negative", caps.proximity),
    );

    let dynamics = match raw.dynamics.model.as_str() {
        "identity" => Some(Dynamics::Identity),
        "three_wheel_omni" => {
            errs.check(
                positive(raw.dynamics.chassis_radius),
                "dynamics.chassis_radius must be positive",
            );
            Some(Dynamics::ThreeWheelOmni {
                chassis_radius: raw.dynamics.chassis_radius,
            })
        }
        other => {
            errs.0.push(format!(
                "dynamics.model `{other}` is not identity or three_wheel_omni"
            ));
            None
        }
    };

    let bd = BarrierParams::default();
    let barrier = BarrierParams {
        eta: ov.eta.or(raw.barrier.eta).unwrap_or(bd.eta),
        r: raw.barrier.r,
        gamma0: raw.barrier.gamma0,
        gamma_inf: raw.barrier.gamma_inf,
        h_cap: raw.barrier.h_cap.unwrap_or(bd.h_cap),
        unbounded_headroom: bd.unbounded_headroom,
    };
    errs.check(
        positive(barrier.eta),
        format!("barrier.eta = {} must be positive", barrier.eta),
    );
    errs.check(
        positive(barrier.h_cap),
        format!("barrier.h_cap = {} must be positive", barrier.h_cap),
    );
    if let Some(r) = barrier.r {
        errs.check(positive(r), format!("barrier.r = {r} must be positive"));
    }
    let kappa = ov.kappa.or(raw.barrier.kappa).unwrap_or(1.0);
    errs.check(
        positive(kappa),
        format!("barrier.kappa = {kappa} must be positive"),
    );
    let q_diag = raw.barrier.q_diag.unwrap_or([1.0; 3]);
    errs.check(
        q_diag.iter().all(|&q| positive(q)),
        "barrier.q_diag entries must be positive (cost must be positive definite)",
    );

    let rd = ReplanParams::default();
    let replan = ReplanParams {
        p_i: raw.replan.p_i.unwrap_or(rd.p_i),
        p_r: raw.replan.p_r.unwrap_or(rd.p_r),
        p_c: 0,
        floor: raw.replan.floor.unwrap_or(rd.floor),
    };
    for m in replan.validate() {
        errs.0.push(format!("replan.{m}"));
    }
    let retime = raw.replan.enabled.unwrap_or(true) && !ov.no_retime;

    let dt = ov.dt.or(raw.sim.dt).unwrap_or(0.01);
    errs.check(
        positive(dt) && dt <= 1.0,
        format!("sim.dt = {dt} must lie in (0, 1]"),
    );

    let start = match &raw.sim.start {
        None => Some([0.0; 3]),
        Some(RawStart::Waypoint(w)) => match raw.waypoints.get(w) {
            Some(p) => Some([p[0], p[1], 0.0]),
            None => {
                errs.0.push(format!("sim.start: unknown waypoint `{w}`"));
                None
            }
        },
        Some(RawStart::Pose(v)) if v.len() == 3 && v.iter().all(|c| c.is_finite()) => {
            Some([v[0], v[1], v[2]])
        }
        Some(RawStart::Pose(_)) => {
            errs.0
                .push("sim.start must be a waypoint name or [x, y, theta]".into());
            None
        }
    };

    if let Some(f) = &formula {
        check_formula(f, &obstacles, &barrier, &mut errs);
    }
    if let Some(start) = start {
        for o in &obstacles {
            let (c, _) = crate::sim::obstacle_state(o, 0.0);
            errs.check(
                (start[0] - c.x).hypot(start[1] - c.y) > o.safe_distance,
                format!(
                    "sim.start lies within the safe distance of obstacle `{}`",
                    o.id
                ),
            );
        }
    }

    if !errs.0.is_empty() {
        return Err(ScenarioError::Invalid(errs.0));
    }
    Ok(Scenario {
        name: name.to_string(),
        formula_text: raw.formula.text.trim().to_string(),
        formula: formula.expect("checked"),
        waypoints: raw.waypoints,
        world: World {
            zones,
            obstacles,
            caps,
        },
        dynamics: dynamics.expect("checked"),
        barrier,
        alpha: AlphaFn { kappa },
        q_diag,
        replan,
        retime,
        dt,
        seed,
        start: start.expect("checked"),
    })
}

fn check_formula(f: &Formula, obstacles: &[Obstacle], barrier: &BarrierParams, errs: &mut Errors) {
    let sched = match schedule_tasks(f) {
        Ok(s) => s,
        Err(e) => {
            errs.0.push(format!("formula: {e}"));
            return;
        }
    };
    let literals = sched
        .tasks
        .iter()
        .flat_map(|t| t.reach.iter().chain(&t.hold))
        .chain(sched.invariants.iter().flat_map(|i| &i.literals));
    for lit in literals {
        match &lit.predicate {
            Predicate::Clearance { obstacle, .. } => errs.check(
                obstacles.iter().any(|o| &o.id == obstacle),
                format!("formula: unknown obstacle `{obstacle}`"),
            ),
            Predicate::BallReach { center, epsilon } => {
                errs.check(
                    center.len() == 2,
                    format!(
                        "formula: ball centers must be planar, got {} components",
                        center.len()
                    ),
                );
                if let (Some(r), false) = (barrier.r, lit.negated) {
                    errs.check(
                        r < *epsilon,
                        format!("barrier.r = {r} must be below the goal tolerance {epsilon}"),
                    );
                }
                if let (Some(g), false) = (barrier.gamma_inf, lit.negated) {
                    errs.check(
                        g < *epsilon,
                        format!(
                            "barrier.gamma_inf = {g} must be below the goal tolerance {epsilon}"
                        ),
                    );
                }
            }
            Predicate::Halfspace { normal, .. } => errs.check(
                normal.len() == 2,
                format!(
                    "formula: half-plane normals must be planar, got {} components",
                    normal.len()
                ),
            ),
        }
    }
}
