//! Signal Temporal Logic fragment used for task specification.
//!
//! Formulas are split into two layers. State formulas (`true`, predicates,
//! negated predicates and their conjunctions) carry no temporal operator.
//! Task formulas wrap a state formula in exactly one bounded `F`, `G` or `U`
//! and may be conjoined at the top level. Nested temporal operators and
//! negation of anything but a predicate are rejected at construction.

mod monitor;
mod parser;
mod predicate;

use std::fmt;

pub use monitor::{eval_boolean, eval_robustness, MonitorError, Signal};
pub use parser::{parse_formula, parse_formula_with, ParseError, ParseErrorKind};
pub use predicate::{
    eval_predicate, predicate_gradient, predicate_time_derivative, NoObstacles, ObstacleLookup,
    PredicateError, PredicateGradient,
};

/// Tolerance on the Euclidean norm of a halfspace normal.
pub const NORMAL_TOLERANCE: f64 = 1e-9;

/// An atomic predicate `h(x) >= 0` over the position part of the state.
#[derive(Debug, Clone, PartialEq)]
pub enum Predicate {
    /// `h = epsilon - |p - center|`
    BallReach { center: Vec<f64>, epsilon: f64 },
    /// `h = |p - p_obs(t)|^2 - safe_distance^2`
    Clearance {
        obstacle: String,
        safe_distance: f64,
    },
    /// `h = offset - normal . p`
    Halfspace { normal: Vec<f64>, offset: f64 },
}

impl Predicate {
    pub fn ball(center: Vec<f64>, epsilon: f64) -> Result<Self, String> {
        let p = Predicate::BallReach { center, epsilon };
        p.validate().map(|_| p)
    }

    pub fn clearance(obstacle: impl Into<String>, safe_distance: f64) -> Result<Self, String> {
        let p = Predicate::Clearance {
            obstacle: obstacle.into(),
            safe_distance,
        };
        p.validate().map(|_| p)
    }

    pub fn halfspace(normal: Vec<f64>, offset: f64) -> Result<Self, String> {
        let p = Predicate::Halfspace { normal, offset };
        p.validate().map(|_| p)
    }

    /// Checks the per-kind invariants, returning a description of the first
    /// violated one.
    pub fn validate(&self) -> Result<(), String> {
        match self {
            Predicate::BallReach { center, epsilon } => {
                if center.is_empty() || center.iter().any(|c| !c.is_finite()) {
                    return Err("ball center must be a non-empty finite vector".into());
                }
                if !(*epsilon > 0.0 && epsilon.is_finite()) {
                    return Err(format!("ball tolerance must be positive, got {epsilon}"));
                }
            }
            Predicate::Clearance {
                obstacle,
                safe_distance,
            } => {
                if obstacle.is_empty() {
                    return Err("clearance needs an obstacle id".into());
                }
                if !(*safe_distance > 0.0 && safe_distance.is_finite()) {
                    return Err(format!(
                        "clearance distance must be positive, got {safe_distance}"
                    ));
                }
            }
            Predicate::Halfspace { normal, offset } => {
                if normal.is_empty() || normal.iter().any(|c| !c.is_finite()) || !offset.is_finite()
                {
                    return Err("halfspace needs a finite normal and offset".into());
                }
                let norm = normal.iter().map(|c| c * c).sum::<f64>().sqrt();
                if (norm - 1.0).abs() > NORMAL_TOLERANCE {
                    return Err(format!("halfspace normal must have unit norm, got {norm}"));
                }
            }
        }
        Ok(())
    }

    /// Number of leading state components the predicate reads.
    pub fn position_dim(&self) -> usize {
        match self {
            Predicate::BallReach { center, .. } => center.len(),
            Predicate::Clearance { .. } => 2,
            Predicate::Halfspace { normal, .. } => normal.len(),
        }
    }
}

/// Closed time interval `[a, b]` with `0 <= a <= b < inf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    a: f64,
    b: f64,
}

impl Interval {
    pub fn new(a: f64, b: f64) -> Result<Self, String> {
        if !a.is_finite() || !b.is_finite() {
            return Err(format!("interval [{a}, {b}] is unbounded"));
        }
        if a < 0.0 || a > b {
            return Err(format!("interval [{a}, {b}] must satisfy 0 <= a <= b"));
        }
        Ok(Interval { a, b })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.a && t <= self.b
    }
}

/// AST of the supported fragment.
#[derive(Debug, Clone, PartialEq)]
pub enum Formula {
    True,
    Pred(Predicate),
    /// Negation is only representable over a predicate.
    Not(Predicate),
    And(Box<Formula>, Box<Formula>),
    Always(Interval, Box<Formula>),
    Eventually(Interval, Box<Formula>),
    Until(Interval, Box<Formula>, Box<Formula>),
}

impl Formula {
    pub fn and(lhs: Formula, rhs: Formula) -> Formula {
        Formula::And(Box::new(lhs), Box::new(rhs))
    }

    pub fn always(interval: Interval, inner: Formula) -> Formula {
        Formula::Always(interval, Box::new(inner))
    }

    pub fn eventually(interval: Interval, inner: Formula) -> Formula {
        Formula::Eventually(interval, Box::new(inner))
    }

    pub fn until(interval: Interval, lhs: Formula, rhs: Formula) -> Formula {
        Formula::Until(interval, Box::new(lhs), Box::new(rhs))
    }

    /// True when the formula contains no temporal operator.
    pub fn is_state_formula(&self) -> bool {
        match self {
            Formula::True | Formula::Pred(_) | Formula::Not(_) => true,
            Formula::And(l, r) => l.is_state_formula() && r.is_state_formula(),
            _ => false,
        }
    }

    /// Checks fragment membership: every temporal operator wraps state
    /// formulas only. Returns the name of the offending node on failure.
    pub fn check_fragment(&self) -> Result<(), String> {
        match self {
            Formula::True | Formula::Pred(_) | Formula::Not(_) => Ok(()),
            Formula::And(l, r) => {
                l.check_fragment()?;
                r.check_fragment()
            }
            Formula::Always(_, inner) | Formula::Eventually(_, inner) => {
                if inner.is_state_formula() {
                    Ok(())
                } else {
                    Err(format!(
                        "nested temporal operator inside {}",
                        self.node_name()
                    ))
                }
            }
            Formula::Until(_, l, r) => {
                if l.is_state_formula() && r.is_state_formula() {
                    Ok(())
                } else {
                    Err("nested temporal operator inside U".to_string())
                }
            }
        }
    }

    pub fn node_name(&self) -> &'static str {
        match self {
            Formula::True => "true",
            Formula::Pred(_) => "predicate",
            Formula::Not(_) => "!",
            Formula::And(..) => "&&",
            Formula::Always(..) => "G",
            Formula::Eventually(..) => "F",
            Formula::Until(..) => "U",
        }
    }

    /// Time needed to decide satisfaction: the largest upper interval bound
    /// over all temporal operators.
    pub fn horizon(&self) -> f64 {
        match self {
            Formula::True | Formula::Pred(_) | Formula::Not(_) => 0.0,
            Formula::And(l, r) => l.horizon().max(r.horizon()),
            Formula::Always(i, inner) | Formula::Eventually(i, inner) => i.b() + inner.horizon(),
            Formula::Until(i, l, r) => i.b() + l.horizon().max(r.horizon()),
        }
    }

    /// Flattens a conjunction tree into its conjuncts, left to right.
    pub fn conjuncts(&self) -> Vec<&Formula> {
        match self {
            Formula::And(l, r) => {
                let mut out = l.conjuncts();
                out.extend(r.conjuncts());
                out
            }
            other => vec![other],
        }
    }
}

pub fn horizon(f: &Formula) -> f64 {
    f.horizon()
}

pub fn format_formula(f: &Formula) -> String {
    f.to_string()
}

fn write_vec(out: &mut fmt::Formatter<'_>, v: &[f64]) -> fmt::Result {
    out.write_str("[")?;
    for (i, c) in v.iter().enumerate() {
        if i > 0 {
            out.write_str(",")?;
        }
        write!(out, "{c}")?;
    }
    out.write_str("]")
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predicate::BallReach { center, epsilon } => {
                f.write_str("ball(")?;
                write_vec(f, center)?;
                write!(f, ", {epsilon})")
            }
            Predicate::Clearance {
                obstacle,
                safe_distance,
            } => write!(f, "clear({obstacle}, {safe_distance})"),
            Predicate::Halfspace { normal, offset } => {
                f.write_str("half(")?;
                write_vec(f, normal)?;
                write!(f, ", {offset})")
            }
        }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{}]", self.a, self.b)
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::True => f.write_str("true"),
            Formula::Pred(p) => write!(f, "{p}"),
            Formula::Not(p) => write!(f, "!{p}"),
            Formula::And(l, r) => write!(f, "({l}) && ({r})"),
            Formula::Always(i, inner) => write!(f, "G{i}({inner})"),
            Formula::Eventually(i, inner) => write!(f, "F{i}({inner})"),
            Formula::Until(i, l, r) => write!(f, "({l}) U{i}({r})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ball(x: f64, y: f64, eps: f64) -> Predicate {
        Predicate::ball(vec![x, y], eps).unwrap()
    }

    #[test]
    fn horizon_examples() {
        let mu = Formula::Pred(ball(9.0, 3.0, 0.2));
        assert_eq!(mu.horizon(), 0.0);
        let f1 = Formula::eventually(Interval::new(0.0, 10.0).unwrap(), mu.clone());
        assert_eq!(f1.horizon(), 10.0);
        let f2 = Formula::eventually(Interval::new(50.0, 60.0).unwrap(), mu);
        assert_eq!(Formula::and(f1, f2).horizon(), 60.0);
        assert_eq!(Formula::True.horizon(), 0.0);
    }

    #[test]
    fn format_examples() {
        let f = Formula::eventually(
            Interval::new(0.0, 10.0).unwrap(),
            Formula::Pred(ball(9.0, 3.0, 0.2)),
        );
        assert_eq!(format_formula(&f), "F[0,10](ball([9,3], 0.2))");
        assert_eq!(format_formula(&Formula::True), "true");
        let and = Formula::and(Formula::True, Formula::Not(ball(0.0, 0.0, 1.0)));
        assert_eq!(and.to_string(), "(true) && (!ball([0,0], 1))");
    }

    #[test]
    fn interval_rejects_bad_bounds() {
        assert!(Interval::new(2.0, 1.0).is_err());
        assert!(Interval::new(-1.0, 1.0).is_err());
        assert!(Interval::new(0.0, f64::INFINITY).is_err());
        assert!(Interval::new(5.0, 5.0).is_ok());
    }

    #[test]
    fn predicate_invariants() {
        assert!(Predicate::ball(vec![0.0, 0.0], 0.0).is_err());
        assert!(Predicate::clearance("o1", -1.0).is_err());
        assert!(Predicate::halfspace(vec![0.0, 2.0], 1.0).is_err());
        assert!(Predicate::halfspace(vec![0.6, 0.8], 1.0).is_ok());
    }

    #[test]
    fn fragment_check_flags_nesting() {
        let i = Interval::new(0.0, 1.0).unwrap();
        let inner = Formula::eventually(i, Formula::True);
        let nested = Formula::always(i, inner);
        assert!(nested.check_fragment().unwrap_err().contains("G"));
    }
}
