//! Overhead crane dynamics and a fixed-step RK4 integrator with forward sensitivities.

use nalgebra::{SMatrix, SVector};

use crate::error::{FslpError, Result};

pub const NX: usize = 6;
pub const NU: usize = 2;
/// Sensitivity columns: initial state, control, step size.
const NP: usize = NX + NU + 1;

pub type State = SVector<f64, NX>;
pub type Control = SVector<f64, NU>;

/// Crane state `(x_c, ẋ_c, l, l̇, θ, θ̇)` in SI units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CraneState {
    pub x_c: f64,
    pub x_c_dot: f64,
    pub l: f64,
    pub l_dot: f64,
    pub theta: f64,
    pub theta_dot: f64,
}

impl CraneState {
    /// At rest with the payload hanging straight down at `(px, py)`.
    pub fn at_rest_below(px: f64, py: f64) -> Self {
        Self {
            x_c: px,
            x_c_dot: 0.0,
            l: -py,
            l_dot: 0.0,
            theta: 0.0,
            theta_dot: 0.0,
        }
    }

    pub fn to_vector(self) -> State {
        State::new(
            self.x_c,
            self.x_c_dot,
            self.l,
            self.l_dot,
            self.theta,
            self.theta_dot,
        )
    }

    pub fn from_vector(x: &State) -> Self {
        Self {
            x_c: x[0],
            x_c_dot: x[1],
            l: x[2],
            l_dot: x[3],
            theta: x[4],
            theta_dot: x[5],
        }
    }
}

/// Payload position `(x_c + l sin θ, -l cos θ)`.
pub fn payload_position(x: &State) -> [f64; 2] {
    let (s, c) = x[4].sin_cos();
    [x[0] + x[2] * s, -x[2] * c]
}

/// Jacobian of [`payload_position`] with respect to the state.
pub fn payload_jacobian(x: &State) -> SMatrix<f64, 2, NX> {
    let (s, c) = x[4].sin_cos();
    let mut j = SMatrix::<f64, 2, NX>::zeros();
    j[(0, 0)] = 1.0;
    j[(0, 2)] = s;
    j[(0, 4)] = x[2] * c;
    j[(1, 2)] = -c;
    j[(1, 4)] = x[2] * s;
    j
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CraneDynamics {
    pub gravity: f64,
}

impl Default for CraneDynamics {
    fn default() -> Self {
        Self { gravity: 9.81 }
    }
}

/// A time-invariant ODE `ẋ = f(x, u)` with analytic partial derivatives.
pub trait Dynamics<const N: usize, const M: usize> {
    fn rhs(&self, x: &SVector<f64, N>, u: &SVector<f64, M>) -> Result<SVector<f64, N>>;

    /// `(∂f/∂x, ∂f/∂u)`.
    fn partials(
        &self,
        x: &SVector<f64, N>,
        u: &SVector<f64, M>,
    ) -> Result<(SMatrix<f64, N, N>, SMatrix<f64, N, M>)>;
}

impl CraneDynamics {
    pub fn derivative(&self, x: &CraneState, u: [f64; 2]) -> Result<State> {
        self.rhs(&x.to_vector(), &Control::new(u[0], u[1]))
    }

    fn check_length(l: f64) -> Result<()> {
        if l > 0.0 && l.is_finite() {
            Ok(())
        } else {
            Err(FslpError::Evaluation(format!(
                "crane dynamics need a positive hoist length, got l = {l}"
            )))
        }
    }
}

impl Dynamics<NX, NU> for CraneDynamics {
    fn rhs(&self, x: &State, u: &Control) -> Result<State> {
        let l = x[2];
        Self::check_length(l)?;
        let (s, c) = x[4].sin_cos();
        let theta_ddot = (c * u[0] - 2.0 * x[3] * x[5] - self.gravity * s) / l;
        Ok(State::new(x[1], u[0], x[3], u[1], x[5], theta_ddot))
    }

    fn partials(
        &self,
        x: &State,
        u: &Control,
    ) -> Result<(SMatrix<f64, NX, NX>, SMatrix<f64, NX, NU>)> {
        let l = x[2];
        Self::check_length(l)?;
        let (s, c) = x[4].sin_cos();
        let num = c * u[0] - 2.0 * x[3] * x[5] - self.gravity * s;
        let mut a = SMatrix::<f64, NX, NX>::zeros();
        a[(0, 1)] = 1.0;
        a[(2, 3)] = 1.0;
        a[(4, 5)] = 1.0;
        a[(5, 2)] = -num / (l * l);
        a[(5, 3)] = -2.0 * x[5] / l;
        a[(5, 4)] = (-s * u[0] - self.gravity * c) / l;
        a[(5, 5)] = -2.0 * x[3] / l;
        let mut b = SMatrix::<f64, NX, NU>::zeros();
        b[(1, 0)] = 1.0;
        b[(3, 1)] = 1.0;
        b[(5, 0)] = c / l;
        Ok((a, b))
    }
}

/// `M` classical RK4 substeps of size `h_total / M` with `u` held constant.
pub fn rk4_step<const N: usize, const U: usize>(
    f: &impl Dynamics<N, U>,
    x: &SVector<f64, N>,
    u: &SVector<f64, U>,
    h_total: f64,
    substeps: usize,
) -> Result<SVector<f64, N>> {
    debug_assert!(substeps >= 1);
    let h = h_total / substeps as f64;
    let mut x = *x;
    for _ in 0..substeps {
        let k1 = f.rhs(&x, u)?;
        let k2 = f.rhs(&(x + k1 * (0.5 * h)), u)?;
        let k3 = f.rhs(&(x + k2 * (0.5 * h)), u)?;
        let k4 = f.rhs(&(x + k3 * h), u)?;
        x += (k1 + (k2 + k3) * 2.0 + k4) * (h / 6.0);
    }
    Ok(x)
}

/// End state of one shooting interval and its derivatives.
#[derive(Debug, Clone, Copy)]
pub struct IntervalSensitivity {
    pub end: State,
    pub d_x: SMatrix<f64, NX, NX>,
    pub d_u: SMatrix<f64, NX, NU>,
    /// Derivative with respect to the interval length `h_total`.
    pub d_h: State,
}

/// [`rk4_step`] for the crane, differentiated through every substep.
pub fn rk4_step_sensitivity(
    f: &CraneDynamics,
    x0: &State,
    u: &Control,
    h_total: f64,
    substeps: usize,
) -> Result<IntervalSensitivity> {
    let m = substeps as f64;
    let h = h_total / m;
    // Columns of `dx`: x0 (6), u (2), substep length h (1).
    let mut x = *x0;
    let mut dx = SMatrix::<f64, NX, NP>::zeros();
    dx.fixed_view_mut::<NX, NX>(0, 0).fill_with_identity();
    let mut e_u = SMatrix::<f64, NU, NP>::zeros();
    e_u[(0, NX)] = 1.0;
    e_u[(1, NX + 1)] = 1.0;

    let stage = |z: &State, dz: &SMatrix<f64, NX, NP>| -> Result<(State, SMatrix<f64, NX, NP>)> {
        let k = f.rhs(z, u)?;
        let (a, b) = f.partials(z, u)?;
        Ok((k, a * dz + b * e_u))
    };
    for _ in 0..substeps {
        let (k1, dk1) = stage(&x, &dx)?;
        let z2 = x + k1 * (0.5 * h);
        let mut dz2 = dx + dk1 * (0.5 * h);
        dz2.column_mut(NP - 1).axpy(0.5, &k1, 1.0);
        let (k2, dk2) = stage(&z2, &dz2)?;
        let z3 = x + k2 * (0.5 * h);
        let mut dz3 = dx + dk2 * (0.5 * h);
        dz3.column_mut(NP - 1).axpy(0.5, &k2, 1.0);
        let (k3, dk3) = stage(&z3, &dz3)?;
        let z4 = x + k3 * h;
        let mut dz4 = dx + dk3 * h;
        dz4.column_mut(NP - 1).axpy(1.0, &k3, 1.0);
        let (k4, dk4) = stage(&z4, &dz4)?;

        let ksum = k1 + (k2 + k3) * 2.0 + k4;
        x += ksum * (h / 6.0);
        dx += (dk1 + (dk2 + dk3) * 2.0 + dk4) * (h / 6.0);
        dx.column_mut(NP - 1).axpy(1.0 / 6.0, &ksum, 1.0);
    }
    Ok(IntervalSensitivity {
        end: x,
        d_x: dx.fixed_view::<NX, NX>(0, 0).into_owned(),
        d_u: dx.fixed_view::<NX, NU>(0, NX).into_owned(),
        // h = h_total / M
        d_h: dx.column(NP - 1) / m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    struct Decay;

    impl Dynamics<1, 1> for Decay {
        fn rhs(&self, x: &SVector<f64, 1>, _: &SVector<f64, 1>) -> Result<SVector<f64, 1>> {
            Ok(-x)
        }
        fn partials(
            &self,
            _: &SVector<f64, 1>,
            _: &SVector<f64, 1>,
        ) -> Result<(SMatrix<f64, 1, 1>, SMatrix<f64, 1, 1>)> {
            Ok((SMatrix::from_element(-1.0), SMatrix::zeros()))
        }
    }

    #[test]
    fn rest_is_equilibrium() {
        let d = CraneDynamics::default();
        let dx = d
            .derivative(&CraneState::at_rest_below(0.0, -1.0), [0.0, 0.0])
            .unwrap();
        assert_eq!(dx, State::zeros());
    }

    #[test]
    fn pendulum_acceleration() {
        let d = CraneDynamics::default();
        let x = CraneState::at_rest_below(0.0, -1.0);
        assert_abs_diff_eq!(
            d.derivative(&x, [1.0, 0.0]).unwrap()[5],
            1.0,
            epsilon = 1e-15
        );
        let tilted = CraneState {
            theta: std::f64::consts::FRAC_PI_2,
            ..x
        };
        assert_abs_diff_eq!(
            d.derivative(&tilted, [1.0, 0.0]).unwrap()[5],
            -9.81,
            epsilon = 1e-12
        );
    }

    #[test]
    fn nonpositive_length_is_an_error() {
        let d = CraneDynamics::default();
        let x = CraneState::at_rest_below(0.0, 0.0);
        assert!(matches!(
            d.derivative(&x, [0.0, 0.0]),
            Err(FslpError::Evaluation(_))
        ));
    }

    #[test]
    fn rk4_matches_exponential() {
        let x = rk4_step(
            &Decay,
            &SVector::from_element(1.0),
            &SVector::zeros(),
            0.1,
            1,
        )
        .unwrap();
        assert!((x[0] - (-0.1f64).exp()).abs() <= 1e-7);
    }

    #[test]
    fn rk4_is_fourth_order() {
        let exact = (-1.0f64).exp();
        let err = |m| {
            let x = rk4_step(
                &Decay,
                &SVector::from_element(1.0),
                &SVector::zeros(),
                1.0,
                m,
            )
            .unwrap();
            (x[0] - exact).abs()
        };
        let slope = (err(4) / err(8)).log2();
        assert!((slope - 4.0).abs() < 0.2, "slope {slope}");
    }

    #[test]
    fn sensitivities_match_finite_differences() {
        let f = CraneDynamics::default();
        let x0 = State::new(0.1, 0.2, 0.7, -0.1, 0.3, -0.4);
        let u = Control::new(0.8, -0.3);
        let (h, m) = (0.125, 20);
        let s = rk4_step_sensitivity(&f, &x0, &u, h, m).unwrap();
        let plain = rk4_step(&f, &x0, &u, h, m).unwrap();
        assert_abs_diff_eq!(s.end, plain, epsilon = 1e-15);

        let eps = 1e-6;
        for j in 0..NX {
            let mut e = State::zeros();
            e[j] = eps;
            let fd = (rk4_step(&f, &(x0 + e), &u, h, m).unwrap()
                - rk4_step(&f, &(x0 - e), &u, h, m).unwrap())
                / (2.0 * eps);
            assert_abs_diff_eq!(fd, s.d_x.column(j).into_owned(), epsilon = 1e-8);
        }
        for j in 0..NU {
            let mut e = Control::zeros();
            e[j] = eps;
            let fd = (rk4_step(&f, &x0, &(u + e), h, m).unwrap()
                - rk4_step(&f, &x0, &(u - e), h, m).unwrap())
                / (2.0 * eps);
            assert_abs_diff_eq!(fd, s.d_u.column(j).into_owned(), epsilon = 1e-8);
        }
        let fd = (rk4_step(&f, &x0, &u, h + eps, m).unwrap()
            - rk4_step(&f, &x0, &u, h - eps, m).unwrap())
            / (2.0 * eps);
        assert_abs_diff_eq!(fd, s.d_h, epsilon = 1e-8);
    }
}
