//! Full Newton step for the perturbed optimality system
//!
//! ```text
//! A Δx             = 0
//! Aᵀ Δy + Δz       = ∇²f(x) Δx
//! z Δx + x Δz      = h,   h = μ w p_w
//! ```
//!
//! Δz is eliminated, leaving the symmetric indefinite system
//! `[[∇²f(x) + Z/X, Aᵀ], [A, 0]] [Δx; -Δy] = [h/x; 0]`.

use nalgebra::{DMatrix, DVector};

use crate::centralpath::{check_order, scaling_vector, IterateState};
use crate::error::{Error, Result};
use crate::ldl::{norm1, LdlFactor};
use crate::problem::Problem;

/// Condition estimates above this are treated as singular.
pub const MAX_CONDITION: f64 = 1e14;
/// Relative residual above which a step is rejected after refinement.
pub const MAX_STEP_RESIDUAL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonStep {
    pub dx: DVector<f64>,
    pub dy: DVector<f64>,
    pub dz: DVector<f64>,
    /// Worst relative residual over the three block equations.
    pub residual: f64,
    pub condition_estimate: f64,
}

/// Right-hand side `h = 2μ(e - w^r) / (r w^(r-2))` with `w` taken at `mu`.
pub fn newton_rhs(state: &IterateState, mu: f64, r: u32) -> Result<DVector<f64>> {
    check_order(r)?;
    let w = scaling_vector(state.x(), state.z(), mu)?;
    let rf = r as f64;
    let r_i = r as i32;
    Ok(w.map(|wi| 2.0 * mu * (1.0 - wi.powi(r_i)) / (rf * wi.powi(r_i - 2))))
}

/// Assembled augmented matrix together with its factorization.
#[derive(Debug, Clone)]
pub struct KktFactorization {
    matrix: DMatrix<f64>,
    factor: LdlFactor,
    pub condition_estimate: f64,
    n: usize,
}

impl KktFactorization {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn factor(&self) -> &LdlFactor {
        &self.factor
    }

    /// Solves `K u = rhs` with one pass of iterative refinement.
    pub fn solve_refined(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let mut sol = self.factor.solve(rhs);
        let residual = rhs - &self.matrix * &sol;
        sol += self.factor.solve(&residual);
        sol
    }

    /// `max |Pᵀ L D Lᵀ P - K| / max |K|`.
    pub fn reconstruction_error(&self) -> f64 {
        (self.factor.reconstruct() - &self.matrix).amax()
            / self.matrix.amax().max(f64::MIN_POSITIVE)
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

pub fn assemble_and_factor(p: &Problem, state: &IterateState) -> Result<KktFactorization> {
    let (n, m) = (p.n(), p.m());
    if state.n() != n {
        return Err(Error::DimensionMismatch(format!(
            "state has n = {}, problem has n = {n}",
            state.n()
        )));
    }
    let hessian = p.objective().hessian(state.x())?;
    assemble(&hessian, p.a(), state.x(), state.z(), n, m)
}

fn assemble(
    hessian: &DMatrix<f64>,
    a: &DMatrix<f64>,
    x: &DVector<f64>,
    z: &DVector<f64>,
    n: usize,
    m: usize,
) -> Result<KktFactorization> {
    let mut k = DMatrix::zeros(n + m, n + m);
    k.view_mut((0, 0), (n, n)).copy_from(hessian);
    for i in 0..n {
        k[(i, i)] += z[i] / x[i];
    }
    k.view_mut((n, 0), (m, n)).copy_from(a);
    k.view_mut((0, n), (n, m)).copy_from(&a.transpose());

    let factor = LdlFactor::factor(&k)?;
    let condition_estimate = norm1(&k) * factor.inverse_norm1_estimate();
    if !(condition_estimate <= MAX_CONDITION) {
        return Err(Error::SingularKkt(condition_estimate));
    }
    Ok(KktFactorization {
        matrix: k,
        factor,
        condition_estimate,
        n,
    })
}

/// Relative residuals of the three block equations for a candidate step.
pub fn step_residuals(
    p: &Problem,
    state: &IterateState,
    hessian: &DMatrix<f64>,
    h: &DVector<f64>,
    dx: &DVector<f64>,
    dy: &DVector<f64>,
    dz: &DVector<f64>,
) -> [f64; 3] {
    let primal = (p.a() * dx).norm() / (1.0 + dx.norm());
    let dual = (p.a().transpose() * dy + dz - hessian * dx).norm() / (1.0 + dz.norm());
    let comp =
        (state.z().component_mul(dx) + state.x().component_mul(dz) - h).norm() / (1.0 + h.norm());
    [primal, dual, comp]
}

/// Computes `(Δx, Δy, Δz)` at `state` for target barrier parameter `mu`.
pub fn newton_step(p: &Problem, state: &IterateState, mu: f64, r: u32) -> Result<NewtonStep> {
    let (n, m) = (p.n(), p.m());
    let h = newton_rhs(state, mu, r)?;
    if state.n() != n || state.y().len() != m {
        return Err(Error::DimensionMismatch(format!(
            "state has sizes ({}, {}), problem has ({n}, {m})",
            state.n(),
            state.y().len()
        )));
    }
    let hessian = p.objective().hessian(state.x())?;
    let kkt = assemble(&hessian, p.a(), state.x(), state.z(), n, m)?;

    let mut rhs = DVector::zeros(n + m);
    for i in 0..n {
        rhs[i] = h[i] / state.x()[i];
    }
    let sol = kkt.solve_refined(&rhs);

    let dx = sol.rows(0, n).into_owned();
    let dy = -sol.rows(n, m).into_owned();
    let dz = DVector::from_fn(n, |i, _| (h[i] - state.z()[i] * dx[i]) / state.x()[i]);

    let residual = step_residuals(p, state, &hessian, &h, &dx, &dy, &dz)
        .into_iter()
        .fold(0.0, f64::max);
    if !(residual <= MAX_STEP_RESIDUAL) {
        return Err(Error::Numerical(format!(
            "Newton system residual {residual:.3e} after refinement"
        )));
    }
    Ok(NewtonStep {
        dx,
        dy,
        dz,
        residual,
        condition_estimate: kkt.condition_estimate,
    })
}
