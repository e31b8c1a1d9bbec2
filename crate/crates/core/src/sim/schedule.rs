//! Splits a top-level conjunction into sequential reach tasks and concurrent
//! invariants.

use thiserror::Error;

use crate::barrier::Literal;
use crate::stl::{Formula, Interval};

#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub label: String,
    pub interval: Interval,
    /// Literals that must all reach `h >= r` inside the window.
    pub reach: Vec<Literal>,
    /// Literals that must hold until the reach part succeeds (until tasks).
    pub hold: Vec<Literal>,
}

/// An always-subformula, active for its whole window alongside the tasks.
#[derive(Debug, Clone, PartialEq)]
pub struct Invariant {
    pub interval: Interval,
    pub literals: Vec<Literal>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Schedule {
    pub tasks: Vec<Task>,
    pub invariants: Vec<Invariant>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScheduleError {
    #[error("`{0}` is not a conjunction of temporal subformulas")]
    NotSchedulable(String),
    #[error("temporal subformula `{0}` has no predicate to plan for")]
    EmptyTask(String),
}

/// Collects the literals of a temporal-operator-free formula.
pub fn literals(f: &Formula) -> Result<Vec<Literal>, ScheduleError> {
    let mut out = Vec::new();
    collect(f, &mut out)?;
    Ok(out)
}

fn collect(f: &Formula, out: &mut Vec<Literal>) -> Result<(), ScheduleError> {
    match f {
        Formula::True => Ok(()),
        Formula::Pred(p) => {
            out.push(Literal::positive(p.clone()));
            Ok(())
        }
        Formula::Not(p) => {
            out.push(Literal::negative(p.clone()));
            Ok(())
        }
        Formula::And(l, r) => {
            collect(l, out)?;
            collect(r, out)
        }
        other => Err(ScheduleError::NotSchedulable(other.to_string())),
    }
}

pub fn schedule_tasks(f: &Formula) -> Result<Schedule, ScheduleError> {
    let mut sched = Schedule::default();
    for c in f.conjuncts() {
        match c {
            Formula::True => {}
            Formula::Eventually(iv, inner) => {
                let reach = literals(inner)?;
                if reach.is_empty() {
                    return Err(ScheduleError::EmptyTask(c.to_string()));
                }
                sched.tasks.push(Task {
                    label: String::new(),
                    interval: *iv,
                    reach,
                    hold: Vec::new(),
                });
            }
            Formula::Until(iv, left, right) => {
                let reach = literals(right)?;
                if reach.is_empty() {
                    return Err(ScheduleError::EmptyTask(c.to_string()));
                }
                sched.tasks.push(Task {
                    label: String::new(),
                    interval: *iv,
                    reach,
                    hold: literals(left)?,
                });
            }
            Formula::Always(iv, inner) => {
                let lits = literals(inner)?;
                if !lits.is_empty() {
                    sched.invariants.push(Invariant {
                        interval: *iv,
                        literals: lits,
                    });
                }
            }
            // A bare state formula only constrains the initial state.
            Formula::Pred(_) | Formula::Not(_) => sched.invariants.push(Invariant {
                interval: Interval::new(0.0, 0.0).expect("zero interval"),
                literals: literals(c)?,
            }),
            other => return Err(ScheduleError::NotSchedulable(other.to_string())),
        }
    }
    sched
        .tasks
        .sort_by(|x, y| x.interval.a().total_cmp(&y.interval.a()));
    for (i, t) in sched.tasks.iter_mut().enumerate() {
        t.label = format!("task{}", i + 1);
    }
    for w in sched.tasks.windows(2) {
        if w[1].interval.a() < w[0].interval.b() && w[0].reach != w[1].reach {
            sched.warnings.push(format!(
                "windows of {} {} and {} {} overlap; they are still run one after the other",
                w[0].label, w[0].interval, w[1].label, w[1].interval
            ));
        }
    }
    Ok(sched)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stl::parse_formula;

    #[test]
    fn sequential_tasks_sorted_by_start() {
        let f = parse_formula(
            "F[50,60](ball([1,1],0.2)) && F[0,10](ball([2,2],0.2)) && F[40,50](ball([3,3],0.2)) && F[10,40](ball([4,4],0.2))",
        )
        .unwrap();
        let s = schedule_tasks(&f).unwrap();
        let starts: Vec<f64> = s.tasks.iter().map(|t| t.interval.a()).collect();
        assert_eq!(starts, vec![0.0, 10.0, 40.0, 50.0]);
        assert_eq!(s.tasks[0].label, "task1");
        assert!(s.warnings.is_empty());
    }

    #[test]
    fn single_eventually() {
        let s = schedule_tasks(&parse_formula("F[0,10](ball([9,3], 0.2))").unwrap()).unwrap();
        assert_eq!(s.tasks.len(), 1);
        assert!(s.invariants.is_empty());
    }

    #[test]
    fn always_becomes_invariant() {
        let f = parse_formula("G[0,5](!ball([0,0],1)) && F[2,4](ball([1,1],0.5))").unwrap();
        let s = schedule_tasks(&f).unwrap();
        assert_eq!(s.tasks.len(), 1);
        assert_eq!(s.invariants.len(), 1);
        assert!(s.invariants[0].literals[0].negated);
    }

    #[test]
    fn until_keeps_both_sides() {
        let f = parse_formula("(!ball([5,5],1)) U[0,8](ball([9,0],0.3))").unwrap();
        let s = schedule_tasks(&f).unwrap();
        assert_eq!(s.tasks[0].hold.len(), 1);
        assert_eq!(s.tasks[0].reach.len(), 1);
    }

    #[test]
    fn overlapping_windows_warn() {
        let f = parse_formula("F[0,10](ball([1,1],0.2)) && F[5,12](ball([2,2],0.2))").unwrap();
        assert_eq!(schedule_tasks(&f).unwrap().warnings.len(), 1);
    }
}
