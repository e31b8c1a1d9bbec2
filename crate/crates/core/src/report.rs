//! Run summaries recomputed from logged samples alone.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::{
    obstacle_state, parse_csv, schedule_tasks, to_csv, LogError, Obstacle, Record, World,
};
use crate::stl::{eval_boolean, eval_robustness, parse_formula, Formula, MonitorError, Signal};

/// Slack allowed on logged speeds and barrier values.
pub const SPEED_TOLERANCE: f64 = 1e-6;
pub const BARRIER_TOLERANCE: f64 = 1e-6;

/// What the monitor needs besides the log: the formula and the obstacle
/// models that `clear(...)` predicates and collision checks refer to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorSpec {
    pub formula: String,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
}

impl MonitorSpec {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("monitor spec serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self, ReportError> {
        toml::from_str(text).map_err(|e| ReportError::Spec(e.to_string()))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReportError {
    #[error(transparent)]
    Log(#[from] LogError),
    #[error("bad monitor spec: {0}")]
    Spec(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskRow {
    pub label: String,
    pub window: (f64, f64),
    pub started: Option<f64>,
    pub satisfied: Option<f64>,
}

impl TaskRow {
    pub fn duration(&self) -> Option<f64> {
        Some(self.satisfied? - self.started?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Satisfied,
    Violated,
    /// The log cannot decide the formula (too short, unknown obstacle, ...).
    Undetermined(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ViolationKind {
    Speed { speed: f64, vmax: f64 },
    Barrier { b: f64 },
    Collision { obstacle: String, distance: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub step: usize,
    pub t: f64,
    pub kind: ViolationKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub rows: Vec<TaskRow>,
    /// Sum of task durations; waiting for a window to open is excluded.
    pub movement_time: f64,
    pub horizon: f64,
    pub log_end: f64,
    pub replan_events: usize,
    pub infeasible_steps: usize,
    pub failed_ticks: usize,
    pub robustness: Option<f64>,
    pub verdict: Verdict,
    pub violations: Vec<Violation>,
}

impl Report {
    /// Formula satisfied and no safety or speed violation.
    pub fn accepted(&self) -> bool {
        self.verdict == Verdict::Satisfied && self.violations.is_empty()
    }

    pub fn from_records(records: &[Record], formula: &Formula, obstacles: &[Obstacle]) -> Report {
        let world = World {
            obstacles: obstacles.to_vec(),
            ..World::default()
        };
        let rows = task_rows(records, formula);
        let movement_time = rows
            .iter()
            .filter_map(TaskRow::duration)
            .fold(0.0, |a, d| a + d);
        let count = |prefix: &str| {
            records
                .iter()
                .flat_map(|r| &r.events)
                .filter(|e| e.starts_with(prefix))
                .count()
        };
        let samples = records.iter().map(|r| (r.t, r.x.to_vec())).collect();
        let (verdict, robustness) = match Signal::new(samples) {
            Ok(sig) => match eval_boolean(formula, &sig, 0.0, &world) {
                Ok(ok) => (
                    if ok {
                        Verdict::Satisfied
                    } else {
                        Verdict::Violated
                    },
                    eval_robustness(formula, &sig, 0.0, &world).ok(),
                ),
                Err(MonitorError::TooShort { needed, available }) => (
                    Verdict::Undetermined(format!(
                        "log ends at {available} s but the formula needs samples up to {needed} s"
                    )),
                    None,
                ),
                Err(e) => (Verdict::Undetermined(e.to_string()), None),
            },
            Err(e) => (Verdict::Undetermined(e.to_string()), None),
        };
        Report {
            rows,
            movement_time,
            horizon: formula.horizon(),
            log_end: records.last().map_or(0.0, |r| r.t),
            replan_events: count("replan_"),
            infeasible_steps: count("infeasible"),
            failed_ticks: count("tick_failed"),
            robustness,
            verdict,
            violations: violations(records, obstacles),
        }
    }

    /// Report for a log as it would be read back from its CSV.
    pub fn from_log_rounded(
        records: &[Record],
        formula: &Formula,
        obstacles: &[Obstacle],
    ) -> Report {
        let rounded = parse_csv(&to_csv(records)).expect("own CSV parses");
        Report::from_records(&rounded, formula, obstacles)
    }

    pub fn from_csv(text: &str, spec: &MonitorSpec) -> Result<Report, ReportError> {
        let records = parse_csv(text)?;
        let formula = parse_formula(&spec.formula).map_err(|e| ReportError::Spec(e.to_string()))?;
        Ok(Report::from_records(&records, &formula, &spec.obstacles))
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let w = self
            .rows
            .iter()
            .map(|r| r.label.len())
            .max()
            .unwrap_or(4)
            .max(4);
        let _ = writeln!(
            out,
            "{:<w$}  {:>14}  {:>9}  {:>10}  {:>22}",
            "task", "STL constraint", "started", "satisfied", "actual path duration"
        );
        let opt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.2}"));
        let mut total_window = 0.0;
        for r in &self.rows {
            let window = format!("[{}, {}]", r.window.0, r.window.1);
            total_window += r.window.1 - r.window.0;
            let _ = writeln!(
                out,
                "{:<w$}  {:>14}  {:>9}  {:>10}  {:>22}",
                r.label,
                window,
                opt(r.started),
                opt(r.satisfied),
                opt(r.duration())
            );
        }
        let _ = writeln!(
            out,
            "{:<w$}  {:>14}  {:>9}  {:>10}  {:>22}",
            "total",
            format!("{total_window}"),
            "",
            "",
            format!("{:.2}", self.movement_time)
        );
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "formula horizon: {} s, log ends at {:.2} s",
            self.horizon, self.log_end
        );
        let _ = writeln!(
            out,
            "replanning events: {}, infeasible QP steps: {}, failed ticks: {}",
            self.replan_events, self.infeasible_steps, self.failed_ticks
        );
        if let Some(rho) = self.robustness {
            let _ = writeln!(out, "robustness: {rho:.6}");
        }
        let verdict = match &self.verdict {
            Verdict::Satisfied => "satisfied".to_string(),
            Verdict::Violated => "violated".to_string(),
            Verdict::Undetermined(why) => format!("undetermined ({why})"),
        };
        let _ = writeln!(out, "verdict: {verdict}");
        if self.violations.is_empty() {
            let _ = writeln!(out, "violations: none");
        } else {
            let _ = writeln!(out, "violations: {}", self.violations.len());
            for v in self.violations.iter().take(20) {
                let what = match &v.kind {
                    ViolationKind::Speed { speed, vmax } => {
                        format!("speed {speed:.6} above cap {vmax}")
                    }
                    ViolationKind::Barrier { b } => format!("barrier value {b:.3e} below zero"),
                    ViolationKind::Collision { obstacle, distance } => {
                        format!("{distance:.3} m from the center of `{obstacle}`")
                    }
                };
                let _ = writeln!(out, "  step {} (t = {:.2}): {what}", v.step, v.t);
            }
            if self.violations.len() > 20 {
                let _ = writeln!(out, "  ...");
            }
        }
        out
    }
}

fn task_rows(records: &[Record], formula: &Formula) -> Vec<TaskRow> {
    let windows: Vec<(f64, f64)> = match schedule_tasks(formula) {
        Ok(s) => s
            .tasks
            .iter()
            .map(|t| (t.interval.a(), t.interval.b()))
            .collect(),
        Err(_) => Vec::new(),
    };
    // Tasks are activated in schedule order and announce themselves with
    // a start or missed event.
    let mut labels: Vec<String> = Vec::new();
    for e in records.iter().flat_map(|r| &r.events) {
        let name = e
            .strip_prefix("start:")
            .or_else(|| e.strip_prefix("missed:"));
        if let Some(n) = name {
            if !labels.iter().any(|l| l == n) {
                labels.push(n.to_string());
            }
        }
    }
    let find = |prefix: &str, label: &str| {
        records
            .iter()
            .find(|r| {
                r.events
                    .iter()
                    .any(|e| e.strip_prefix(prefix) == Some(label))
            })
            .map(|r| r.t)
    };
    windows
        .iter()
        .enumerate()
        .map(|(i, &window)| {
            let label = labels
                .get(i)
                .cloned()
                .unwrap_or_else(|| format!("task{}", i + 1));
            TaskRow {
                started: find("start:", &label),
                satisfied: find("satisfied:", &label),
                label,
                window,
            }
        })
        .collect()
}

fn violations(records: &[Record], obstacles: &[Obstacle]) -> Vec<Violation> {
    let mut out = Vec::new();
    for (step, r) in records.iter().enumerate() {
        if r.speed > r.vmax + SPEED_TOLERANCE {
            out.push(Violation {
                step,
                t: r.t,
                kind: ViolationKind::Speed {
                    speed: r.speed,
                    vmax: r.vmax,
                },
            });
        }
        if r.b < -BARRIER_TOLERANCE || r.b.is_nan() {
            out.push(Violation {
                step,
                t: r.t,
                kind: ViolationKind::Barrier { b: r.b },
            });
        }
        for o in obstacles {
            let (c, _) = obstacle_state(o, r.t);
            let d = (r.x[0] - c.x).hypot(r.x[1] - c.y);
            if d < o.radius {
                out.push(Violation {
                    step,
                    t: r.t,
                    kind: ViolationKind::Collision {
                        obstacle: o.id.clone(),
                        distance: d,
                    },
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::ZoneMode;

    fn record(t: f64, x: f64, events: &[&str]) -> Record {
        Record {
            t,
            x: [x, 0.0, 0.0],
            u: [0.0; 3],
            speed: 1.0,
            vmax: 1.5,
            mode: ZoneMode::Standard,
            b: 0.5,
            active_task: None,
            events: events.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn straight_run() -> Vec<Record> {
        (0..=20)
            .map(|k| {
                let t = k as f64 * 0.5;
                let ev: &[&str] = match k {
                    0 => &["start:goal"],
                    14 => &["satisfied:goal"],
                    _ => &[],
                };
                record(t, t, ev)
            })
            .collect()
    }

    #[test]
    fn satisfied_run() {
        let f = parse_formula("F[0,10](ball([7,0], 0.2))").unwrap();
        let rep = Report::from_records(&straight_run(), &f, &[]);
        assert_eq!(rep.verdict, Verdict::Satisfied);
        assert_eq!(rep.rows[0].label, "goal");
        assert_eq!(rep.rows[0].duration(), Some(7.0));
        assert_eq!(rep.movement_time, 7.0);
        assert!(rep.accepted());
        assert!(rep.render().contains("actual path duration"));
    }

    #[test]
    fn truncated_log_is_undetermined() {
        let f = parse_formula("F[0,10](ball([7,0], 0.2))").unwrap();
        let rep = Report::from_records(&straight_run()[..10], &f, &[]);
        assert!(matches!(rep.verdict, Verdict::Undetermined(_)));
        assert!(!rep.accepted());
    }

    #[test]
    fn injected_speed_fault_is_flagged() {
        let f = parse_formula("F[0,10](ball([7,0], 0.2))").unwrap();
        let mut recs = straight_run();
        recs[5].speed = 1.6;
        let rep = Report::from_records(&recs, &f, &[]);
        assert_eq!(rep.violations.len(), 1);
        assert_eq!(rep.violations[0].step, 5);
        assert!(rep.render().contains("step 5"));
    }

    #[test]
    fn monitor_spec_round_trip() {
        let spec = MonitorSpec {
            formula: "G[0,5](clear(p, 0.5))".into(),
            obstacles: vec![Obstacle {
                id: "p".into(),
                radius: 0.3,
                safe_distance: 0.55,
                motion: crate::sim::Motion::Rhodonea {
                    center: [1.0, 1.0],
                    amplitude: 0.5,
                    petals: 2.0,
                    rate: 0.1,
                    phase: 0.3,
                },
            }],
        };
        assert_eq!(MonitorSpec::from_toml(&spec.to_toml()).unwrap(), spec);
    }
}
