//! Deadline retiming from remaining distance and the current speed cap.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq)]
pub struct ReplanParams {
    /// Initial fraction of `v_max` the plan is allowed to use.
    pub p_i: f64,
    /// Fraction removed per failed QP.
    pub p_r: f64,
    /// Failure counter within the current cap context.
    pub p_c: u32,
    /// Smallest usable weight; at or below it the task is given up.
    pub floor: f64,
}

impl Default for ReplanParams {
    fn default() -> Self {
        ReplanParams {
            p_i: 0.9,
            p_r: 0.025,
            p_c: 0,
            floor: 0.1,
        }
    }
}

impl ReplanParams {
    pub fn weight(&self) -> f64 {
        self.p_i - self.p_r * f64::from(self.p_c)
    }

    /// Range checks, one message per violated bound.
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if !(0.5..1.0).contains(&self.p_i) {
            errs.push(format!("p_i = {} must lie in [0.5, 1)", self.p_i));
        }
        if !(self.p_r > 0.0 && self.p_r < 0.2) {
            errs.push(format!("p_r = {} must lie in (0, 0.2)", self.p_r));
        }
        if !(self.floor > 0.0 && self.floor < self.p_i) {
            errs.push(format!("floor = {} must lie in (0, p_i)", self.floor));
        }
        errs
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReplanError {
    #[error("remaining time must be positive, got {0}")]
    NonPositiveTime(f64),
    #[error("speed cap must be positive, got {0}")]
    NonPositiveSpeed(f64),
    #[error("replanning exhausted: weight {weight} at or below floor {floor}")]
    Exhausted { weight: f64, floor: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReplanTrigger {
    TaskStart,
    VmaxChange,
    QpInfeasible,
}

impl ReplanTrigger {
    pub fn tag(self) -> &'static str {
        match self {
            ReplanTrigger::TaskStart => "replan_start",
            ReplanTrigger::VmaxChange => "replan_vmax",
            ReplanTrigger::QpInfeasible => "replan_infeasible",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplanEvent {
    pub time: f64,
    pub trigger: ReplanTrigger,
    pub old_tstar: f64,
    /// Requested duration from `time`, before clamping to the task window.
    pub new_tstar: f64,
    pub delta_s: f64,
    pub v_max: f64,
    pub weight: f64,
}

/// Straight-line speed needed to cover the remaining distance in time.
pub fn average_velocity(
    x: &[f64],
    goal: &[f64],
    t_star_remaining: f64,
) -> Result<f64, ReplanError> {
    if t_star_remaining.is_nan() || t_star_remaining <= 0.0 {
        return Err(ReplanError::NonPositiveTime(t_star_remaining));
    }
    let ds = x
        .iter()
        .zip(goal)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    Ok(ds / t_star_remaining)
}

/// Whether a plan needing `v_average` fits under the cap.
pub fn plan_fits(v_average: f64, v_max: f64) -> bool {
    v_max >= v_average
}

/// `delta_s / ((p_i - p_r p_c) v_max)`.
pub fn compute_tstar_new(delta_s: f64, v_max: f64, p: &ReplanParams) -> Result<f64, ReplanError> {
    if v_max.is_nan() || v_max <= 0.0 {
        return Err(ReplanError::NonPositiveSpeed(v_max));
    }
    let weight = p.weight();
    if weight <= p.floor {
        return Err(ReplanError::Exhausted {
            weight,
            floor: p.floor,
        });
    }
    Ok(delta_s / (weight * v_max))
}

fn event(
    time: f64,
    trigger: ReplanTrigger,
    old_tstar: f64,
    delta_s: f64,
    v_max: f64,
    p: &ReplanParams,
) -> Result<ReplanEvent, ReplanError> {
    Ok(ReplanEvent {
        time,
        trigger,
        old_tstar,
        new_tstar: compute_tstar_new(delta_s, v_max, p)?,
        delta_s,
        v_max,
        weight: p.weight(),
    })
}

/// Fresh plan at task activation; resets the failure counter.
pub fn on_task_start(
    time: f64,
    old_tstar: f64,
    delta_s: f64,
    v_max: f64,
    p: &mut ReplanParams,
) -> Result<ReplanEvent, ReplanError> {
    p.p_c = 0;
    event(time, ReplanTrigger::TaskStart, old_tstar, delta_s, v_max, p)
}

/// New speed cap; resets the failure counter.
pub fn on_vmax_change(
    time: f64,
    old_tstar: f64,
    delta_s: f64,
    new_vmax: f64,
    p: &mut ReplanParams,
) -> Result<ReplanEvent, ReplanError> {
    p.p_c = 0;
    event(
        time,
        ReplanTrigger::VmaxChange,
        old_tstar,
        delta_s,
        new_vmax,
        p,
    )
}

/// QP failure; lowers the weight by one step.
pub fn on_infeasible(
    time: f64,
    old_tstar: f64,
    delta_s: f64,
    v_max: f64,
    p: &mut ReplanParams,
) -> Result<ReplanEvent, ReplanError> {
    p.p_c += 1;
    event(
        time,
        ReplanTrigger::QpInfeasible,
        old_tstar,
        delta_s,
        v_max,
        p,
    )
}
