//! Time-varying control barrier functions for STL tasks and their smooth-min
//! composition with obstacle clearance barriers.

mod construct;

use thiserror::Error;

pub use construct::{
    choose_robustness, init_gammas, init_invariance_gammas, select_tstar, BarrierParams,
    GammaCurve, TaskOperator,
};

use crate::stl::{
    eval_predicate, predicate_gradient, predicate_time_derivative, Interval, ObstacleLookup,
    Predicate, PredicateError,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BarrierError {
    #[error("task cannot be satisfied with the deadline already reached (h = {h})")]
    Unsatisfiable { h: f64 },
    #[error("robustness threshold {r} outside (0, {upper})")]
    RobustnessOutOfRange { r: f64, upper: f64 },
    #[error("gamma0 = {gamma0} must be below h(x) = {h}")]
    Gamma0OutOfRange { gamma0: f64, h: f64 },
    #[error("gamma_inf = {gamma_inf} outside ({lower}, {upper})")]
    GammaInfOutOfRange {
        gamma_inf: f64,
        lower: f64,
        upper: f64,
    },
    #[error("gamma must be non-decreasing (gamma0 = {gamma0}, gamma_inf = {gamma_inf})")]
    NotMonotone { gamma0: f64, gamma_inf: f64 },
    #[error("every barrier member is inactive")]
    AllInactive,
    #[error("cannot retime `{label}`: window closed at {deadline} s with h = {h} < r = {r}")]
    InfeasibleRetime {
        label: String,
        deadline: f64,
        h: f64,
        r: f64,
    },
    #[error(transparent)]
    Predicate(#[from] PredicateError),
}

/// A predicate, possibly negated, as it appears inside a task.
#[derive(Debug, Clone, PartialEq)]
pub struct Literal {
    pub predicate: Predicate,
    pub negated: bool,
}

impl Literal {
    pub fn positive(predicate: Predicate) -> Self {
        Literal {
            predicate,
            negated: false,
        }
    }

    pub fn negative(predicate: Predicate) -> Self {
        Literal {
            predicate,
            negated: true,
        }
    }

    fn sign(&self) -> f64 {
        if self.negated {
            -1.0
        } else {
            1.0
        }
    }

    pub fn h(&self, x: &[f64], t: f64, world: &dyn ObstacleLookup) -> Result<f64, PredicateError> {
        Ok(self.sign() * eval_predicate(&self.predicate, x, t, world)?)
    }

    fn grad(
        &self,
        x: &[f64],
        t: f64,
        world: &dyn ObstacleLookup,
    ) -> Result<(Vec<f64>, bool), PredicateError> {
        let g = predicate_gradient(&self.predicate, x, t, world)?;
        let s = self.sign();
        Ok((g.grad.into_iter().map(|v| s * v).collect(), g.degenerate))
    }

    fn dt(&self, x: &[f64], t: f64, world: &dyn ObstacleLookup) -> Result<f64, PredicateError> {
        Ok(self.sign() * predicate_time_derivative(&self.predicate, x, t, world)?)
    }

    /// Supremum of `h` over the state space, with unbounded cases replaced
    /// by `h_cap`.
    pub fn h_opt(&self, h_cap: f64) -> f64 {
        match (&self.predicate, self.negated) {
            (Predicate::BallReach { epsilon, .. }, false) => *epsilon,
            (Predicate::Clearance { safe_distance, .. }, true) => safe_distance * safe_distance,
            _ => h_cap,
        }
    }

    /// Straight-line distance still to be covered before the literal holds
    /// with margin `r`.
    pub fn remaining_distance(
        &self,
        x: &[f64],
        t: f64,
        r: f64,
        world: &dyn ObstacleLookup,
    ) -> Result<f64, PredicateError> {
        match (&self.predicate, self.negated) {
            (Predicate::BallReach { center, .. }, false) => Ok(x
                .iter()
                .zip(center)
                .map(|(a, c)| (a - c) * (a - c))
                .sum::<f64>()
                .sqrt()),
            (Predicate::Clearance { safe_distance, .. }, false) => {
                let h = self.h(x, t, world)?;
                let d = (h + safe_distance * safe_distance).max(0.0).sqrt();
                let needed = (safe_distance * safe_distance + r).sqrt();
                Ok((needed - d).max(0.0))
            }
            _ => Ok((r - self.h(x, t, world)?).max(0.0)),
        }
    }
}

/// Compute `h_opt` for a bare predicate.
pub fn compute_hopt(p: &Predicate, h_cap: f64) -> f64 {
    Literal::positive(p.clone()).h_opt(h_cap)
}

/// Value, state gradient and partial time derivative of a barrier.
#[derive(Debug, Clone, PartialEq)]
pub struct BarrierEval {
    pub value: f64,
    pub grad_x: Vec<f64>,
    pub d_dt: f64,
    /// Some member hit an undefined gradient and contributed zero.
    pub degenerate: bool,
}

/// One task member `b_l(x, t) = -gamma_l(t) + h_l(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskBarrier {
    pub literal: Literal,
    pub operator: TaskOperator,
    pub interval: Interval,
    pub t_star: f64,
    pub gamma0: f64,
    pub gamma_inf: f64,
    pub r: f64,
    pub active: bool,
    pub t_origin: f64,
    /// Members of one conjunction (or both sides of an until) share a group.
    pub group: usize,
    pub label: String,
}

impl TaskBarrier {
    /// Builds a barrier whose clock starts at `t_origin` with deadline
    /// `t_star` (absolute), using the state `x` at `t_origin`.
    #[allow(clippy::too_many_arguments)]
    pub fn build(
        literal: Literal,
        operator: TaskOperator,
        interval: Interval,
        t_origin: f64,
        t_star: f64,
        x: &[f64],
        world: &dyn ObstacleLookup,
        params: &BarrierParams,
    ) -> Result<Self, BarrierError> {
        let h0 = literal.h(x, t_origin, world)?;
        let h_opt = literal.h_opt(params.h_cap);
        let ahead = t_star > t_origin;
        let r = choose_robustness(h_opt, h0, ahead, params.r)?;
        // With no time left gamma jumps straight to gamma_inf, which must then
        // sit below the current h to keep the barrier positive.
        let upper = if ahead { h_opt } else { h_opt.min(h0) };
        let (gamma0, gamma_inf) = if operator.is_reach() {
            init_gammas(h0, r, upper, params)?
        } else {
            init_invariance_gammas(h0, r, upper, ahead, params)?
        };
        Ok(TaskBarrier {
            literal,
            operator,
            interval,
            t_star,
            gamma0,
            gamma_inf,
            r,
            active: true,
            t_origin,
            group: 0,
            label: String::new(),
        })
    }

    pub fn with_label(mut self, group: usize, label: impl Into<String>) -> Self {
        self.group = group;
        self.label = label.into();
        self
    }

    pub fn curve(&self) -> GammaCurve {
        GammaCurve {
            gamma0: self.gamma0,
            gamma_inf: self.gamma_inf,
            t_origin: self.t_origin,
            t_star: self.t_star,
        }
    }
}

pub fn gamma(tb: &TaskBarrier, t: f64) -> f64 {
    tb.curve().value(t)
}

pub fn gamma_dot(tb: &TaskBarrier, t: f64) -> f64 {
    tb.curve().slope(t)
}

pub fn task_barrier_eval(
    tb: &TaskBarrier,
    x: &[f64],
    t: f64,
    world: &dyn ObstacleLookup,
) -> Result<BarrierEval, BarrierError> {
    let h = tb.literal.h(x, t, world)?;
    let (grad_x, degenerate) = tb.literal.grad(x, t, world)?;
    let dh_dt = tb.literal.dt(x, t, world)?;
    Ok(BarrierEval {
        value: -gamma(tb, t) + h,
        grad_x,
        d_dt: -gamma_dot(tb, t) + dh_dt,
        degenerate,
    })
}

/// Obstacle clearance constraint `b = h(x, t)`, never switched off.
#[derive(Debug, Clone, PartialEq)]
pub struct SafetyBarrier {
    pub predicate: Predicate,
}

impl SafetyBarrier {
    pub fn new(obstacle: impl Into<String>, safe_distance: f64) -> Result<Self, String> {
        Ok(SafetyBarrier {
            predicate: Predicate::clearance(obstacle, safe_distance)?,
        })
    }

    pub fn eval(
        &self,
        x: &[f64],
        t: f64,
        world: &dyn ObstacleLookup,
    ) -> Result<BarrierEval, BarrierError> {
        let g = predicate_gradient(&self.predicate, x, t, world)?;
        Ok(BarrierEval {
            value: eval_predicate(&self.predicate, x, t, world)?,
            grad_x: g.grad,
            d_dt: predicate_time_derivative(&self.predicate, x, t, world)?,
            degenerate: g.degenerate,
        })
    }
}

/// `-(1/eta) ln(sum exp(-eta b_l))`, evaluated with a min shift.
pub fn smooth_min(values: &[f64], eta: f64) -> f64 {
    let m = values.iter().copied().fold(f64::INFINITY, f64::min);
    if !m.is_finite() {
        return m;
    }
    let s: f64 = values.iter().map(|b| (-eta * (b - m)).exp()).sum();
    m - s.ln() / eta
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompositeBarrier {
    pub eta: f64,
    pub tasks: Vec<TaskBarrier>,
    pub safety: Vec<SafetyBarrier>,
}

impl CompositeBarrier {
    pub fn new(eta: f64) -> Self {
        assert!(eta > 0.0, "smooth-min sharpness must be positive");
        CompositeBarrier {
            eta,
            tasks: Vec::new(),
            safety: Vec::new(),
        }
    }

    pub fn active_count(&self) -> usize {
        self.tasks.iter().filter(|t| t.active).count() + self.safety.len()
    }

    pub fn has_active_task(&self) -> bool {
        self.tasks.iter().any(|t| t.active)
    }

    /// Evaluations of every active member, tasks first.
    pub fn member_evals(
        &self,
        x: &[f64],
        t: f64,
        world: &dyn ObstacleLookup,
    ) -> Result<Vec<BarrierEval>, BarrierError> {
        let mut out = Vec::with_capacity(self.active_count());
        for tb in self.tasks.iter().filter(|t| t.active) {
            out.push(task_barrier_eval(tb, x, t, world)?);
        }
        for sb in &self.safety {
            out.push(sb.eval(x, t, world)?);
        }
        Ok(out)
    }
}

/// Smooth-min over the active members with softmin-weighted gradient and
/// time derivative.
pub fn composite_eval(
    cb: &CompositeBarrier,
    x: &[f64],
    t: f64,
    world: &dyn ObstacleLookup,
) -> Result<BarrierEval, BarrierError> {
    let members = cb.member_evals(x, t, world)?;
    if members.is_empty() {
        return Err(BarrierError::AllInactive);
    }
    let m = members
        .iter()
        .map(|e| e.value)
        .fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = members
        .iter()
        .map(|e| (-cb.eta * (e.value - m)).exp())
        .collect();
    let total: f64 = weights.iter().sum();
    let mut grad_x = vec![0.0; x.len()];
    let mut d_dt = 0.0;
    let mut degenerate = false;
    for (e, w) in members.iter().zip(&weights) {
        let w = w / total;
        for (g, gl) in grad_x.iter_mut().zip(&e.grad_x) {
            *g += w * gl;
        }
        d_dt += w * e.d_dt;
        degenerate |= e.degenerate;
    }
    Ok(BarrierEval {
        value: m - total.ln() / cb.eta,
        grad_x,
        d_dt,
        degenerate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeactivationReason {
    Satisfied,
    /// Invariance window is over.
    WindowClosed,
    /// Reach window closed without satisfaction.
    Missed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeactivationEvent {
    pub group: usize,
    pub label: String,
    pub time: f64,
    pub reason: DeactivationReason,
}

/// Switches off members whose temporal operator is decided at `(x, t)`.
///
/// A reach group is satisfied once `t` lies in its window and every reach
/// member has `h >= r`; the group's until-left members go with it.
/// Invariance members switch off after their window closes.
pub fn deactivate_satisfied(
    cb: &mut CompositeBarrier,
    x: &[f64],
    t: f64,
    world: &dyn ObstacleLookup,
) -> Result<Vec<DeactivationEvent>, BarrierError> {
    let mut groups: Vec<usize> = cb
        .tasks
        .iter()
        .filter(|m| m.active)
        .map(|m| m.group)
        .collect();
    groups.sort_unstable();
    groups.dedup();
    let mut events = Vec::new();
    for g in groups {
        let members: Vec<usize> = (0..cb.tasks.len())
            .filter(|&i| cb.tasks[i].active && cb.tasks[i].group == g)
            .collect();
        let reach: Vec<usize> = members
            .iter()
            .copied()
            .filter(|&i| cb.tasks[i].operator.is_reach())
            .collect();
        let mut decided: Option<(Vec<usize>, DeactivationReason)> = None;
        if !reach.is_empty() {
            let iv = cb.tasks[reach[0]].interval;
            if iv.contains(t) {
                let mut all = true;
                for &i in &reach {
                    let tb = &cb.tasks[i];
                    if tb.literal.h(x, t, world)? < tb.r {
                        all = false;
                        break;
                    }
                }
                if all {
                    decided = Some((members.clone(), DeactivationReason::Satisfied));
                }
            } else if t > iv.b() {
                decided = Some((members.clone(), DeactivationReason::Missed));
            }
        } else {
            let closed: Vec<usize> = members
                .iter()
                .copied()
                .filter(|&i| t > cb.tasks[i].interval.b())
                .collect();
            if !closed.is_empty() {
                decided = Some((closed, DeactivationReason::WindowClosed));
            }
        }
        if let Some((idx, reason)) = decided {
            for &i in &idx {
                cb.tasks[i].active = false;
            }
            events.push(DeactivationEvent {
                group: g,
                label: cb.tasks[idx[0]].label.clone(),
                time: t,
                reason,
            });
        }
    }
    Ok(events)
}

/// Rebuilds an active barrier with its clock restarted at `t_now` and
/// deadline `min(t_now + t_star_new, interval.b)`.
pub fn retime_task(
    tb: &TaskBarrier,
    t_now: f64,
    t_star_new: f64,
    x: &[f64],
    world: &dyn ObstacleLookup,
    params: &BarrierParams,
) -> Result<TaskBarrier, BarrierError> {
    let deadline = (t_now + t_star_new).min(tb.interval.b());
    if t_now >= tb.interval.b() {
        let h = tb.literal.h(x, t_now, world)?;
        if h < tb.r {
            return Err(BarrierError::InfeasibleRetime {
                label: tb.label.clone(),
                deadline: tb.interval.b(),
                h,
                r: tb.r,
            });
        }
    }
    let rebuilt = TaskBarrier::build(
        tb.literal.clone(),
        tb.operator,
        tb.interval,
        t_now,
        deadline,
        x,
        world,
        params,
    )?;
    Ok(rebuilt.with_label(tb.group, tb.label.clone()))
}
