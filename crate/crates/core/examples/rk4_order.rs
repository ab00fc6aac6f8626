//! Integrates `x' = -x` over one unit of time with the RK4 scheme used by the crane model and
//! prints the error and the observed order as the substep count doubles.
//!
//! `cargo run --example rk4_order`

use fslp::crane::{rk4_step, Dynamics};
use nalgebra::{SMatrix, SVector};

struct Decay;

impl Dynamics<1, 1> for Decay {
    fn rhs(&self, x: &SVector<f64, 1>, _u: &SVector<f64, 1>) -> fslp::Result<SVector<f64, 1>> {
        Ok(-x)
    }

    fn partials(
        &self,
        _x: &SVector<f64, 1>,
        _u: &SVector<f64, 1>,
    ) -> fslp::Result<(SMatrix<f64, 1, 1>, SMatrix<f64, 1, 1>)> {
        Ok((SMatrix::from_element(-1.0), SMatrix::zeros()))
    }
}

fn main() -> fslp::Result<()> {
    let x0 = SVector::<f64, 1>::new(1.0);
    let u = SVector::<f64, 1>::zeros();
    let exact = (-1.0f64).exp();
    let mut prev: Option<f64> = None;
    println!("{:>6} {:>12} {:>7}", "M", "error", "order");
    for m in [1, 2, 4, 8, 16, 32] {
        let err = (rk4_step(&Decay, &x0, &u, 1.0, m)?[0] - exact).abs();
        let order = prev.map_or("-".to_string(), |e| format!("{:.3}", (e / err).log2()));
        println!("{m:>6} {err:>12.3e} {order:>7}");
        prev = Some(err);
    }
    Ok(())
}
