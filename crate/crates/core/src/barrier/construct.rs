//! Parameter selection for a single time-varying barrier
//! `b(x, t) = -gamma(t) + h(x)`.

use super::BarrierError;
use crate::stl::Interval;

/// Role of a barrier inside the compiled task.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskOperator {
    Eventually,
    Always,
    /// Left operand of an until: must hold from the start until the right
    /// operand is satisfied.
    UntilLeft,
    /// Right operand of an until; behaves like an eventually.
    UntilRight,
}

impl TaskOperator {
    pub fn is_reach(self) -> bool {
        matches!(self, TaskOperator::Eventually | TaskOperator::UntilRight)
    }
}

/// User overrides and numerical policy for barrier construction.
#[derive(Debug, Clone, PartialEq)]
pub struct BarrierParams {
    /// Smooth-min sharpness.
    pub eta: f64,
    /// Fixed robustness threshold; `None` uses the default policy.
    pub r: Option<f64>,
    pub gamma0: Option<f64>,
    pub gamma_inf: Option<f64>,
    /// Finite stand-in for an unbounded supremum of `h`.
    pub h_cap: f64,
    /// For unbounded predicates, how far above `max(r, gamma0)` the final
    /// level `gamma_inf` is placed (before the 0.9 factor).
    pub unbounded_headroom: f64,
}

impl Default for BarrierParams {
    fn default() -> Self {
        BarrierParams {
            eta: 10.0,
            r: None,
            gamma0: None,
            gamma_inf: None,
            h_cap: 1e6,
            unbounded_headroom: 1.0,
        }
    }
}

/// Deadline of the barrier: the window end for reach tasks, the window start
/// for invariance tasks.
pub fn select_tstar(op: TaskOperator, interval: Interval) -> f64 {
    match op {
        TaskOperator::Eventually | TaskOperator::UntilRight => interval.b(),
        TaskOperator::Always => interval.a(),
        TaskOperator::UntilLeft => 0.0,
    }
}

/// Robustness threshold `r`.
///
/// With the deadline in the future `r` must lie in `(0, h_opt)`, otherwise in
/// `(0, h_at_origin)`. Without a configured value the default
/// `min(0.25 * h_opt, 0.05)` is used, halved into range if needed.
pub fn choose_robustness(
    h_opt: f64,
    h_at_origin: f64,
    deadline_ahead: bool,
    configured: Option<f64>,
) -> Result<f64, BarrierError> {
    let upper = if deadline_ahead { h_opt } else { h_at_origin };
    if upper.is_nan() || upper <= 0.0 {
        return Err(BarrierError::Unsatisfiable { h: h_at_origin });
    }
    match configured {
        Some(r) if r > 0.0 && r < upper => Ok(r),
        Some(r) => Err(BarrierError::RobustnessOutOfRange { r, upper }),
        None => {
            let r = (0.25 * h_opt).min(0.05);
            Ok(if r < upper && r > 0.0 { r } else { 0.5 * upper })
        }
    }
}

/// Initial and final levels of the deadline curve.
///
/// Defaults: `gamma0 = h0 - (0.1 |h0| + 0.1)` and
/// `gamma_inf = m + 0.9 (h_opt - m)` with `m = max(r, gamma0)`. Requires
/// `gamma0 < h0` and `m < gamma_inf < h_opt`. When `h_opt` is the unbounded
/// cap, `m + params.unbounded_headroom` replaces it in the default.
pub fn init_gammas(
    h_at_origin: f64,
    r: f64,
    h_opt: f64,
    params: &BarrierParams,
) -> Result<(f64, f64), BarrierError> {
    let gamma0 = params
        .gamma0
        .unwrap_or(h_at_origin - (0.1 * h_at_origin.abs() + 0.1));
    if gamma0.partial_cmp(&h_at_origin) != Some(std::cmp::Ordering::Less) {
        return Err(BarrierError::Gamma0OutOfRange {
            gamma0,
            h: h_at_origin,
        });
    }
    let m = r.max(gamma0);
    let top = if h_opt >= params.h_cap {
        h_opt.min(m + params.unbounded_headroom)
    } else {
        h_opt
    };
    let gamma_inf = params.gamma_inf.unwrap_or(m + 0.9 * (top - m));
    if !(gamma_inf > m && gamma_inf < h_opt) {
        return Err(BarrierError::GammaInfOutOfRange {
            gamma_inf,
            lower: m,
            upper: h_opt,
        });
    }
    if gamma_inf < gamma0 {
        return Err(BarrierError::NotMonotone { gamma0, gamma_inf });
    }
    Ok((gamma0, gamma_inf))
}

/// Levels for an invariance barrier (`G`, or the left side of `U`).
///
/// Only `h >= r` has to be kept, so the default final level sits near the
/// bottom of its range rather than near `h_opt`. With no time left the curve
/// never uses `gamma0`, which is then pulled down to `r` to widen that range.
pub fn init_invariance_gammas(
    h_at_origin: f64,
    r: f64,
    h_opt: f64,
    deadline_ahead: bool,
    params: &BarrierParams,
) -> Result<(f64, f64), BarrierError> {
    let mut p = params.clone();
    let default0 = h_at_origin - (0.1 * h_at_origin.abs() + 0.1);
    if p.gamma0.is_none() && !deadline_ahead {
        p.gamma0 = Some(default0.min(r));
    }
    if p.gamma_inf.is_none() {
        let m = r.max(p.gamma0.unwrap_or(default0));
        let top = if h_opt >= p.h_cap {
            h_opt.min(m + p.unbounded_headroom)
        } else {
            h_opt
        };
        p.gamma_inf = Some(m + 0.1 * (top - m));
    }
    init_gammas(h_at_origin, r, h_opt, &p)
}

/// Piecewise-linear deadline curve and its right derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaCurve {
    pub gamma0: f64,
    pub gamma_inf: f64,
    pub t_origin: f64,
    pub t_star: f64,
}

impl GammaCurve {
    fn span(&self) -> f64 {
        self.t_star - self.t_origin
    }

    pub fn value(&self, t: f64) -> f64 {
        let span = self.span();
        let tau = t - self.t_origin;
        if span <= 0.0 || tau >= span {
            self.gamma_inf
        } else {
            (self.gamma_inf - self.gamma0) / span * tau + self.gamma0
        }
    }

    /// Right derivative; zero at and after the kink.
    pub fn slope(&self, t: f64) -> f64 {
        let span = self.span();
        let tau = t - self.t_origin;
        if span <= 0.0 || tau >= span {
            0.0
        } else {
            (self.gamma_inf - self.gamma0) / span
        }
    }
}
