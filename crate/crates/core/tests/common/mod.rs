//! Independent oracles shared by the integration tests and the acceptance run.
#![allow(dead_code)]

use fslp::crane::{feasible_initialization, rk4_step, CraneDynamics, CraneProblem, Dynamics};
use fslp::experiments::solve_crane;
use fslp::lp::LpProblem;
use fslp::outer::SolverParams;
use nalgebra::{DMatrix, DVector, SMatrix, SVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const BOX: f64 = 5.0;

/// A random LP with `n` variables in a finite box. Most instances are built around a feasible
/// point; with `integer` entries, ties and degenerate vertices are common.
pub fn random_lp(rng: &mut impl Rng, integer: bool) -> LpProblem {
    let n = rng.gen_range(2..=4);
    let m_eq = rng.gen_range(0..n.min(2) + 1);
    let m_in = rng.gen_range(1..=5);
    let entry = |rng: &mut dyn rand::RngCore| {
        if integer {
            rng.gen_range(-3..=3) as f64
        } else {
            rng.gen_range(-1.0..1.0)
        }
    };
    let cost = DVector::from_fn(n, |_, _| entry(rng));
    // full row rank keeps the vertex enumeration exhaustive
    let eq = loop {
        let eq = DMatrix::from_fn(m_eq, n, |_, _| entry(rng));
        if m_eq == 0 || eq.rank(1e-9) == m_eq {
            break eq;
        }
    };
    let ineq = DMatrix::from_fn(m_in, n, |_, _| entry(rng));
    let lower = DVector::from_fn(n, |_, _| -rng.gen_range(0.5..BOX));
    let upper = DVector::from_fn(n, |_, _| rng.gen_range(0.5..BOX));
    let feasible = rng.gen_bool(0.85);
    let anchor = DVector::from_fn(n, |i, _| rng.gen_range(lower[i]..upper[i]));
    let (eq_rhs, ineq_rhs) = if feasible {
        let slack = DVector::from_fn(m_in, |_, _| {
            if rng.gen_bool(0.3) {
                0.0
            } else {
                rng.gen_range(0.0..2.0)
            }
        });
        (&eq * &anchor, -(&ineq * &anchor) - slack)
    } else {
        (
            DVector::from_fn(m_eq, |_, _| rng.gen_range(-20.0..20.0)),
            DVector::from_fn(m_in, |_, _| rng.gen_range(-20.0..20.0)),
        )
    };
    LpProblem::new(cost)
        .with_equalities(eq, eq_rhs)
        .with_inequalities(ineq, ineq_rhs)
        .with_bounds(lower, upper)
}

/// Best objective over all vertices, or `None` if no vertex is feasible.
pub fn enumerate_vertices(p: &LpProblem) -> Option<f64> {
    let n = p.num_vars();
    // every row as a' w = rhs when active
    let mut rows: Vec<(DVector<f64>, f64)> = Vec::new();
    for i in 0..p.num_ineq() {
        rows.push((p.ineq_matrix.row(i).transpose(), -p.ineq_rhs[i]));
    }
    for j in 0..n {
        let e = DVector::from_fn(n, |i, _| if i == j { 1.0 } else { 0.0 });
        rows.push((e.clone(), p.lower[j]));
        rows.push((e, p.upper[j]));
    }
    let pick = n - p.num_eq();
    let mut best: Option<f64> = None;
    let mut combo: Vec<usize> = (0..pick).collect();
    loop {
        let mut a = DMatrix::zeros(n, n);
        let mut b = DVector::zeros(n);
        for i in 0..p.num_eq() {
            a.set_row(i, &p.eq_matrix.row(i));
            b[i] = p.eq_rhs[i];
        }
        for (r, &c) in combo.iter().enumerate() {
            a.set_row(p.num_eq() + r, &rows[c].0.transpose());
            b[p.num_eq() + r] = rows[c].1;
        }
        let lu = a.clone().lu();
        if lu.determinant().abs() > 1e-9 {
            if let Some(w) = lu.solve(&b) {
                if p.primal_violation(&w) <= 1e-9 {
                    let f = p.objective(&w);
                    best = Some(best.map_or(f, |v: f64| v.min(f)));
                }
            }
        }
        // next combination in lexicographic order
        let total = rows.len();
        let mut i = pick;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if combo[i] < total - pick + i {
                break;
            }
        }
        combo[i] += 1;
        for j in i + 1..pick {
            combo[j] = combo[j - 1] + 1;
        }
        if pick == 0 {
            return best;
        }
    }
}

/// Overwrites the states of `w` by simulating its controls from its first state.
pub fn resimulate(p: &CraneProblem, w: &mut DVector<f64>) {
    let lay = &p.layout;
    let f = CraneDynamics {
        gravity: p.config.gravity,
    };
    let h = p.horizon_time(w) / lay.horizon as f64;
    for k in 0..lay.horizon {
        let next = rk4_step(
            &f,
            &lay.state_of(w, k),
            &lay.control_of(w, k),
            h,
            p.config.rk4_substeps,
        )
        .unwrap();
        w.rows_mut(lay.state(k + 1), 6).copy_from(&next);
    }
}

/// The initial point and five other feasible points: three early solver iterates and
/// resimulated random control perturbations of the initial guess.
pub fn feasible_points(p: &CraneProblem) -> Vec<DVector<f64>> {
    let cfg = &p.config;
    let w0 = feasible_initialization(p).unwrap();
    let mut points = vec![w0.clone()];
    let params = SolverParams {
        max_outer_iterations: 8,
        ..Default::default()
    };
    let run = solve_crane(cfg, &params).unwrap();
    points.extend(run.result.iterates.iter().skip(1).take(3).cloned());
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    while points.len() < 6 {
        let mut w = w0.clone();
        for k in 0..p.layout.horizon {
            let c = p.layout.control(k);
            w[c] += rng.gen_range(-0.2..0.2);
            w[c + 1] += rng.gen_range(-0.2..0.2);
        }
        w[p.layout.time()] = rng.gen_range(1.5..3.0);
        resimulate(p, &mut w);
        if p.set_minimal_slacks(&mut w).is_ok() && p.nlp.infeasibility(&w).unwrap() <= 1e-7 {
            points.push(w);
        }
    }
    points
}

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

/// Least-squares slope of `log err` against `log h` for `x' = -x` over unit time.
pub fn rk4_slope(substeps: &[usize]) -> f64 {
    let x0 = SVector::<f64, 1>::new(1.0);
    let u = SVector::<f64, 1>::zeros();
    let pts: Vec<(f64, f64)> = substeps
        .iter()
        .map(|&m| {
            let err = (rk4_step(&Decay, &x0, &u, 1.0, m).unwrap()[0] - (-1.0f64).exp()).abs();
            ((1.0 / m as f64).ln(), err.ln())
        })
        .collect();
    let n = pts.len() as f64;
    let (mx, my) = pts
        .iter()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + x / n, b + y / n));
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    sxy / sxx
}
