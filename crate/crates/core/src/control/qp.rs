//! Exact solver for `min u^T Q u` subject to one linear barrier constraint
//! `a . u >= beta` and a Euclidean cap `|S u| <= v_max` on the planar
//! velocity.

use nalgebra::{Matrix2, Matrix2x3, Matrix3, Vector2, Vector3};
use thiserror::Error;

/// Largest accepted KKT residual.
pub const KKT_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub q: Matrix3<f64>,
    /// Barrier row `a = db/dx g(x)`.
    pub a: Vector3<f64>,
    /// Right-hand side of `a . u >= beta`.
    pub beta: f64,
    /// Planar rows of `g(x)`.
    pub s: Matrix2x3<f64>,
    pub v_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ActiveSet {
    pub cbf: bool,
    pub speed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub u: Vector3<f64>,
    pub active: ActiveSet,
    /// Multiplier of the barrier constraint.
    pub lambda: f64,
    /// Multiplier of the speed constraint written as `v_max^2 - |S u|^2 >= 0`.
    pub mu: f64,
    pub kkt_residual: f64,
}

impl QpSolution {
    pub fn cost(&self, q: &Matrix3<f64>) -> f64 {
        self.u.dot(&(q * self.u))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum QpOutcome {
    Solved(QpSolution),
    /// The barrier halfspace misses the speed ball.
    Infeasible,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QpError {
    #[error("cost matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("speed cap must be positive and finite, got {0}")]
    InvalidSpeedCap(f64),
    #[error("non-finite barrier row or right-hand side")]
    NonFinite,
    #[error("solution failed certification (KKT residual {0:e})")]
    Uncertified(f64),
}

fn candidate(m: &Matrix3<f64>, a: &Vector3<f64>, beta: f64) -> Option<(Vector3<f64>, f64)> {
    let w = m.cholesky()?.solve(a);
    let den = a.dot(&w);
    (den > 0.0).then(|| (w * (beta / den), 2.0 * beta / den))
}

/// Splits `a = S^T c + n` with `n` orthogonal to the rows of `S`.
fn split_row(s: &Matrix2x3<f64>, a: &Vector3<f64>) -> (Vector2<f64>, Vector3<f64>) {
    let sst: Matrix2<f64> = s * s.transpose();
    match sst.try_inverse() {
        Some(inv) => {
            let c = inv * (s * a);
            (c, a - s.transpose() * c)
        }
        None => (Vector2::zeros(), *a),
    }
}

pub fn solve_qp(qp: &QpProblem) -> Result<QpOutcome, QpError> {
    if !(qp.v_max > 0.0 && qp.v_max.is_finite()) {
        return Err(QpError::InvalidSpeedCap(qp.v_max));
    }
    if !qp.beta.is_finite() || qp.a.iter().any(|v| !v.is_finite()) {
        return Err(QpError::NonFinite);
    }
    let q = 0.5 * (qp.q + qp.q.transpose());
    if q.cholesky().is_none() {
        return Err(QpError::NotPositiveDefinite);
    }
    if qp.beta <= 0.0 {
        return certify(qp, Vector3::zeros(), ActiveSet::default(), 0.0, 0.0);
    }
    let a_norm = qp.a.norm();
    if a_norm == 0.0 {
        return Ok(QpOutcome::Infeasible);
    }
    let (c, n) = split_row(&qp.s, &qp.a);
    let in_row_space = n.norm() <= 1e-12 * a_norm;
    // Within the row space the best a . u reachable under the cap is v |c|.
    if in_row_space && qp.beta >= qp.v_max * c.norm() * (1.0 - 1e-12) {
        return Ok(QpOutcome::Infeasible);
    }

    let planar = |u: &Vector3<f64>| (qp.s * u).norm();
    let (u, lambda) = candidate(&q, &qp.a, qp.beta).ok_or(QpError::NotPositiveDefinite)?;
    if planar(&u) <= qp.v_max {
        let active = ActiveSet {
            cbf: true,
            speed: false,
        };
        return certify(qp, u, active, lambda, 0.0);
    }

    // Both constraints active: (Q + mu S^T S) u = lambda a / 2 with mu chosen
    // so that |S u| = v_max. |S u(mu)| decreases monotonically in mu.
    let sts = qp.s.transpose() * qp.s;
    let at = |mu: f64| candidate(&(q + sts * mu), &qp.a, qp.beta);
    let mut lo = 0.0;
    let mut hi = 1.0;
    loop {
        let (u, _) = at(hi).ok_or(QpError::NotPositiveDefinite)?;
        if planar(&u) <= qp.v_max {
            break;
        }
        lo = hi;
        hi *= 2.0;
        if hi > 1e300 {
            return Ok(QpOutcome::Infeasible);
        }
    }
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let (u, _) = at(mid).ok_or(QpError::NotPositiveDefinite)?;
        if planar(&u) <= qp.v_max {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let (u, lambda) = at(hi).ok_or(QpError::NotPositiveDefinite)?;
    let active = ActiveSet {
        cbf: true,
        speed: true,
    };
    certify(qp, u, active, lambda, hi)
}

fn certify(
    qp: &QpProblem,
    u: Vector3<f64>,
    active: ActiveSet,
    lambda: f64,
    mu: f64,
) -> Result<QpOutcome, QpError> {
    let mut sol = QpSolution {
        u,
        active,
        lambda,
        mu,
        kkt_residual: 0.0,
    };
    sol.kkt_residual = kkt_residual(qp, &sol);
    if sol.kkt_residual > KKT_TOLERANCE {
        return Err(QpError::Uncertified(sol.kkt_residual));
    }
    Ok(QpOutcome::Solved(sol))
}

/// Largest of the scaled stationarity error, primal violations, negative
/// multipliers and complementarity products.
pub fn kkt_residual(qp: &QpProblem, sol: &QpSolution) -> f64 {
    let u = &sol.u;
    let qu2 = (qp.q + qp.q.transpose()) * u;
    let su = qp.s * u;
    let stationarity = (qu2 - qp.a * sol.lambda + qp.s.transpose() * su * (2.0 * sol.mu)).norm()
        / (1.0 + qu2.norm());
    let cbf_slack = qp.a.dot(u) - qp.beta;
    let speed_slack = qp.v_max * qp.v_max - su.norm_squared();
    let cbf_scale = 1.0 + qp.beta.abs();
    let speed_scale = 1.0 + qp.v_max * qp.v_max;
    [
        stationarity,
        (-cbf_slack).max(0.0) / cbf_scale,
        (-speed_slack).max(0.0) / speed_scale,
        (-sol.lambda).max(0.0),
        (-sol.mu).max(0.0),
        (sol.lambda * cbf_slack).abs() / cbf_scale,
        (sol.mu * speed_slack).abs() / speed_scale,
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn planar_identity() -> Matrix2x3<f64> {
        Matrix2x3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0)
    }

    fn problem(a: [f64; 3], beta: f64, v_max: f64) -> QpProblem {
        QpProblem {
            q: Matrix3::identity(),
            a: Vector3::from(a),
            beta,
            s: planar_identity(),
            v_max,
        }
    }

    fn solved(qp: &QpProblem) -> QpSolution {
        match solve_qp(qp).unwrap() {
            QpOutcome::Solved(s) => s,
            QpOutcome::Infeasible => panic!("unexpected infeasibility"),
        }
    }

    #[test]
    fn nonpositive_rhs_gives_zero() {
        let s = solved(&problem([1.0, 2.0, 0.0], -0.3, 1.0));
        assert_eq!(s.u, Vector3::zeros());
        assert_eq!(s.kkt_residual, 0.0);
        assert_eq!(s.active, ActiveSet::default());
    }

    #[test]
    fn halfspace_projection() {
        let qp = problem([1.0, 0.0, 0.0], 0.5, 1.0);
        let s = solved(&qp);
        assert!((s.u - Vector3::new(0.5, 0.0, 0.0)).norm() < 1e-15);
        assert!((s.lambda - 1.0).abs() < 1e-15);
        assert!(s.kkt_residual <= 1e-10);
        assert!(s.active.cbf && !s.active.speed);
    }

    #[test]
    fn out_of_reach_is_infeasible() {
        assert_eq!(
            solve_qp(&problem([1.0, 0.0, 0.0], 2.0, 1.0)).unwrap(),
            QpOutcome::Infeasible
        );
        assert_eq!(
            solve_qp(&problem([0.0, 0.0, 0.0], 0.1, 1.0)).unwrap(),
            QpOutcome::Infeasible
        );
    }

    #[test]
    fn zero_row_with_slack_is_feasible() {
        let s = solved(&problem([0.0, 0.0, 0.0], -1.0, 1.0));
        assert_eq!(s.u, Vector3::zeros());
    }

    #[test]
    fn angular_component_rescues_capped_planar_motion() {
        // planar part alone would need speed 3; the free omega direction helps
        let qp = problem([1.0, 0.0, 1.0], 3.0, 1.0);
        let s = solved(&qp);
        assert!(s.active.cbf && s.active.speed);
        assert!(((qp.s * s.u).norm() - 1.0).abs() < 1e-9);
        assert!((qp.a.dot(&s.u) - 3.0).abs() < 1e-9);
        assert!((s.u - Vector3::new(1.0, 0.0, 2.0)).norm() < 1e-6);
    }

    #[test]
    fn perturbation_raises_residual() {
        let qp = problem([1.0, 0.0, 0.0], 0.5, 1.0);
        let mut s = solved(&qp);
        s.u += Vector3::new(1e-3, 0.0, 0.0);
        assert!(kkt_residual(&qp, &s) > 1e-4);
    }

    #[test]
    fn indefinite_cost_rejected() {
        let mut qp = problem([1.0, 0.0, 0.0], 0.5, 1.0);
        qp.q[(2, 2)] = 0.0;
        assert_eq!(solve_qp(&qp), Err(QpError::NotPositiveDefinite));
    }
}
