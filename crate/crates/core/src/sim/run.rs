//! Closed-loop simulation of a scenario.

use nalgebra::Vector3;
use thiserror::Error;

use super::log::{Record, TaskSummary, TrajectoryLog};
use super::schedule::Task;
use crate::barrier::{
    deactivate_satisfied, retime_task, BarrierError, CompositeBarrier, DeactivationReason,
    SafetyBarrier, TaskBarrier, TaskOperator,
};
use crate::control::{
    assemble_qp, control_step, fallback_input, integrate_step, ControlError, ControlOutcome,
    QpError,
};
use crate::replan::{on_infeasible, on_task_start, on_vmax_change, ReplanError, ReplanEvent};
use crate::scenario::Scenario;
use crate::stl::ObstacleLookup;

/// QP retries with a relaxed deadline before a tick is declared failed.
pub const MAX_RETRIES: usize = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("t = {t}: cannot build barrier for `{label}`: {source}")]
    Barrier {
        t: f64,
        label: String,
        source: BarrierError,
    },
    #[error("t = {t}: {source}")]
    Control { t: f64, source: ControlError },
    #[error("t = {t}: {source}")]
    Replan { t: f64, source: ReplanError },
}

struct Runner<'a> {
    sc: &'a Scenario,
    tasks: Vec<Task>,
    cb: CompositeBarrier,
    log: TrajectoryLog,
    current: Option<usize>,
    next: usize,
    replan: crate::replan::ReplanParams,
}

impl Runner<'_> {
    fn world(&self) -> &dyn ObstacleLookup {
        &self.sc.world
    }

    fn delta_s(&self, task: usize, x: &[f64], t: f64) -> Result<f64, BarrierError> {
        let r = self.sc.barrier.r.unwrap_or(0.0);
        let mut ds: f64 = 0.0;
        for lit in &self.tasks[task].reach {
            ds = ds.max(lit.remaining_distance(x, t, r, self.world())?);
        }
        Ok(ds)
    }

    fn activate(
        &mut self,
        x: &[f64],
        t: f64,
        vmax: f64,
        events: &mut Vec<String>,
    ) -> Result<(), SimError> {
        let i = self.next;
        self.next += 1;
        let task = self.tasks[i].clone();
        let iv = task.interval;
        let err = |source| SimError::Barrier {
            t,
            label: task.label.clone(),
            source,
        };
        if t > iv.b() {
            events.push(format!("missed:{}", task.label));
            return Ok(());
        }
        self.log.tasks[i].started = Some(t);
        events.push(format!("start:{}", task.label));
        let mut deadline = iv.b();
        if self.sc.retime {
            let ds = self.delta_s(i, x, t).map_err(err)?;
            let ev = on_task_start(t, iv.b(), ds, vmax, &mut self.replan)
                .map_err(|source| SimError::Replan { t, source })?;
            deadline = (t + ev.new_tstar).min(iv.b());
            events.push(ev.trigger.tag().to_string());
            self.log.replans.push(ev);
        }
        let reach_op = if task.hold.is_empty() {
            TaskOperator::Eventually
        } else {
            TaskOperator::UntilRight
        };
        for lit in &task.reach {
            let tb = TaskBarrier::build(
                lit.clone(),
                reach_op,
                iv,
                t,
                deadline,
                x,
                self.world(),
                &self.sc.barrier,
            )
            .map_err(err)?;
            self.cb.tasks.push(tb.with_label(i, task.label.clone()));
        }
        for lit in &task.hold {
            let tb = TaskBarrier::build(
                lit.clone(),
                TaskOperator::UntilLeft,
                iv,
                t,
                t,
                x,
                self.world(),
                &self.sc.barrier,
            )
            .map_err(err)?;
            self.cb.tasks.push(tb.with_label(i, task.label.clone()));
        }
        self.current = Some(i);
        Ok(())
    }

    /// Rebuilds the reach members of the current task for a new deadline.
    fn retime(&mut self, ev: &ReplanEvent, x: &[f64], t: f64, events: &mut Vec<String>) {
        let Some(cur) = self.current else { return };
        for k in 0..self.cb.tasks.len() {
            let m = &self.cb.tasks[k];
            if !(m.active && m.group == cur && m.operator.is_reach()) {
                continue;
            }
            match retime_task(m, t, ev.new_tstar, x, &self.sc.world, &self.sc.barrier) {
                Ok(tb) => self.cb.tasks[k] = tb,
                Err(_) => events.push(format!("retime_failed:{}", m.label)),
            }
        }
        events.push(ev.trigger.tag().to_string());
        self.log.replans.push(ev.clone());
    }

    fn current_tstar(&self) -> f64 {
        self.current
            .and_then(|c| self.cb.tasks.iter().find(|m| m.active && m.group == c))
            .map_or(0.0, |m| m.t_star)
    }
}

/// Runs the scenario from `t = 0` to the formula horizon.
pub fn run_scenario(sc: &Scenario) -> Result<TrajectoryLog, SimError> {
    let sched = sc.schedule();
    let world = &sc.world;
    let mut cb = CompositeBarrier::new(sc.barrier.eta);
    for o in &world.obstacles {
        cb.safety
            .push(SafetyBarrier::new(o.id.clone(), o.safe_distance).expect("validated obstacle"));
    }
    let n_tasks = sched.tasks.len();
    for (k, inv) in sched.invariants.iter().enumerate() {
        let label = format!("always{}", k + 1);
        for lit in &inv.literals {
            let tb = TaskBarrier::build(
                lit.clone(),
                TaskOperator::Always,
                inv.interval,
                0.0,
                inv.interval.a(),
                &sc.start,
                world,
                &sc.barrier,
            )
            .map_err(|source| SimError::Barrier {
                t: 0.0,
                label: label.clone(),
                source,
            })?;
            cb.tasks.push(tb.with_label(n_tasks + k, label.clone()));
        }
    }
    let mut run = Runner {
        sc,
        log: TrajectoryLog {
            tasks: sched
                .tasks
                .iter()
                .map(|t| TaskSummary {
                    label: t.label.clone(),
                    window: t.interval,
                    started: None,
                    satisfied: None,
                })
                .collect(),
            warnings: sched.warnings.clone(),
            ..TrajectoryLog::default()
        },
        tasks: sched.tasks,
        cb,
        current: None,
        next: 0,
        replan: sc.replan.clone(),
    };

    let horizon = sc.formula.horizon();
    let steps = (horizon / sc.dt - 1e-9).ceil().max(0.0) as usize;
    let mut x = sc.start;
    let mut prev_vmax: Option<f64> = None;
    for k in 0..=steps {
        let t = k as f64 * sc.dt;
        let mut events = Vec::new();
        let (vmax, mode) = world.vmax_at(&x, t);
        let vmax_changed = prev_vmax.is_some_and(|p| p != vmax);
        prev_vmax = Some(vmax);

        let mut activated = false;
        while run.current.is_none()
            && run.next < run.tasks.len()
            && t >= run.tasks[run.next].interval.a()
        {
            run.activate(&x, t, vmax, &mut events)?;
            activated = run.current.is_some();
        }

        let decided = deactivate_satisfied(&mut run.cb, &x, t, world).map_err(|source| {
            SimError::Control {
                t,
                source: source.into(),
            }
        })?;
        for ev in decided {
            let tag = match ev.reason {
                DeactivationReason::Satisfied => "satisfied",
                DeactivationReason::Missed => "missed",
                DeactivationReason::WindowClosed => "closed",
            };
            events.push(format!("{tag}:{}", ev.label));
            if Some(ev.group) == run.current {
                if ev.reason == DeactivationReason::Satisfied {
                    run.log.tasks[ev.group].satisfied = Some(t);
                }
                run.current = None;
            }
        }
        run.cb.tasks.retain(|m| m.active);

        if sc.retime && vmax_changed && !activated && run.current.is_some() {
            let cur = run.current.expect("checked");
            let ds = run
                .delta_s(cur, &x, t)
                .map_err(|source| SimError::Control {
                    t,
                    source: source.into(),
                })?;
            let ev = on_vmax_change(t, run.current_tstar(), ds, vmax, &mut run.replan)
                .map_err(|source| SimError::Replan { t, source })?;
            run.retime(&ev, &x, t, &mut events);
        }

        let cfg = sc.control_config(vmax);
        let mut u = Vector3::zeros();
        let mut speed = 0.0;
        let mut b = f64::INFINITY;
        if run.cb.active_count() > 0 {
            let mut attempt = 0;
            loop {
                let outcome = control_step(&x, t, &run.cb, &sc.dynamics, world, &cfg);
                let barrier = match outcome {
                    Ok(ControlOutcome::Solved {
                        u: sol_u,
                        speed: s,
                        barrier,
                        ..
                    }) => {
                        if barrier.degenerate {
                            events.push("degenerate_grad".into());
                        }
                        u = sol_u;
                        speed = s;
                        b = barrier.value;
                        break;
                    }
                    Ok(ControlOutcome::Infeasible { barrier }) => {
                        if attempt == 0 {
                            events.push("infeasible".into());
                        }
                        barrier
                    }
                    Err(ControlError::Qp(QpError::Uncertified(_))) => {
                        events.push("uncertified".into());
                        crate::barrier::composite_eval(&run.cb, &x, t, world).map_err(|source| {
                            SimError::Control {
                                t,
                                source: source.into(),
                            }
                        })?
                    }
                    Err(source) => return Err(SimError::Control { t, source }),
                };
                let can_retry = sc.retime && run.current.is_some() && attempt < MAX_RETRIES;
                if can_retry {
                    let cur = run.current.expect("checked");
                    let ds = run
                        .delta_s(cur, &x, t)
                        .map_err(|source| SimError::Control {
                            t,
                            source: source.into(),
                        })?;
                    match on_infeasible(t, run.current_tstar(), ds, vmax, &mut run.replan) {
                        Ok(ev) => {
                            run.retime(&ev, &x, t, &mut events);
                            attempt += 1;
                            continue;
                        }
                        Err(ReplanError::Exhausted { .. }) => {
                            events.push("replan_exhausted".into())
                        }
                        Err(source) => return Err(SimError::Replan { t, source }),
                    }
                }
                events.push("tick_failed".into());
                let qp = assemble_qp(&barrier, &sc.dynamics, &x, vmax, &cfg.q, &cfg.alpha);
                u = fallback_input(&qp);
                speed = sc.dynamics.velocity(&x, &u).fixed_rows::<2>(0).norm();
                b = barrier.value;
                break;
            }
        }

        run.log.records.push(Record {
            t,
            x,
            u: [u[0], u[1], u[2]],
            speed,
            vmax,
            mode,
            b,
            active_task: run.current.map(|c| run.tasks[c].label.clone()),
            events,
        });
        x = integrate_step(&x, &u, &sc.dynamics, sc.dt);
    }
    Ok(run.log)
}
