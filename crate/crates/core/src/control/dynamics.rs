use std::f64::consts::PI;

use nalgebra::{Matrix2x3, Matrix3, Vector3};

/// Control-affine planar robot `x' = f(x) + g(x) u` with state `(x, y, theta)`.
///
/// The drift `f` is zero for both models.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Dynamics {
    /// `u` is the world-frame velocity `(vx, vy, omega)` directly.
    Identity,
    /// Three omni wheels spaced 120 degrees apart on a chassis of radius
    /// `chassis_radius`; `u` holds the wheel rim speeds.
    ThreeWheelOmni { chassis_radius: f64 },
}

impl Default for Dynamics {
    fn default() -> Self {
        Dynamics::ThreeWheelOmni {
            chassis_radius: 0.2,
        }
    }
}

const WHEEL_OFFSETS: [f64; 3] = [0.0, 2.0 * PI / 3.0, 4.0 * PI / 3.0];

impl Dynamics {
    pub fn drift(&self, _x: &[f64]) -> Vector3<f64> {
        Vector3::zeros()
    }

    /// Wheel-speed map `w = J(theta) v` from world-frame velocity to wheel
    /// rim speeds.
    pub fn wheel_jacobian(theta: f64, chassis_radius: f64) -> Matrix3<f64> {
        let mut j = Matrix3::zeros();
        for (i, d) in WHEEL_OFFSETS.iter().enumerate() {
            j[(i, 0)] = -(theta + d).sin();
            j[(i, 1)] = (theta + d).cos();
            j[(i, 2)] = chassis_radius;
        }
        j
    }

    /// Input matrix `g(x)`.
    pub fn input_matrix(&self, x: &[f64]) -> Matrix3<f64> {
        match *self {
            Dynamics::Identity => Matrix3::identity(),
            Dynamics::ThreeWheelOmni { chassis_radius: l } => {
                // J^T J = diag(3/2, 3/2, 3 L^2), so J^-1 = (J^T J)^-1 J^T.
                let j = Self::wheel_jacobian(x[2], l);
                let scale = Matrix3::from_diagonal(&Vector3::new(
                    2.0 / 3.0,
                    2.0 / 3.0,
                    1.0 / (3.0 * l * l),
                ));
                scale * j.transpose()
            }
        }
    }

    /// Rows of `g(x)` producing the planar velocity `(vx, vy)`.
    pub fn planar_rows(&self, x: &[f64]) -> Matrix2x3<f64> {
        self.input_matrix(x).fixed_rows::<2>(0).into_owned()
    }

    /// Realized state velocity `f(x) + g(x) u`.
    pub fn velocity(&self, x: &[f64], u: &Vector3<f64>) -> Vector3<f64> {
        self.drift(x) + self.input_matrix(x) * u
    }
}

/// Wraps an angle to `(-pi, pi]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let mut w = theta.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// Forward Euler step with heading wrap.
pub fn integrate_step(x: &[f64], u: &Vector3<f64>, dyn_: &Dynamics, dt: f64) -> [f64; 3] {
    let v = dyn_.velocity(x, u);
    [
        x[0] + dt * v[0],
        x[1] + dt * v[1],
        wrap_angle(x[2] + dt * v[2]),
    ]
}
