//! Central-path algebra for the direction family `ψ(t) = t^(r/2)`.
//!
//! Everything here works on the scaling vector `w = sqrt(xz/μ)`, which equals
//! `e` exactly on the central path. The direction kernel is
//!
//! ```text
//! p_w = (2e - 2w^r) / (r w^(r-1))
//! ```
//!
//! and the proximity measure is `Γ = ‖p_w‖ / 2`. The monitors at the bottom
//! evaluate the pointwise and per-step inequalities the convergence analysis
//! relies on, so a trajectory can be audited iteration by iteration.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::newton::NewtonStep;
use crate::problem::Problem;

/// Additive slack granted to every monitored inequality.
pub const MONITOR_TOL: f64 = 1e-9;
/// Tolerance on the identities `d_x + d_z = p_w`, `d_xᵀd_z ≥ 0`, `‖p_w‖ ≥ ‖q_w‖`.
pub const DIRECTION_TOL: f64 = 1e-10;
/// Largest supported order of the direction family.
pub const MAX_ORDER: u32 = 12;

pub(crate) fn check_order(r: u32) -> Result<()> {
    if r == 0 || r > MAX_ORDER {
        return Err(Error::InvalidParameter(format!(
            "order r must be in 1..={MAX_ORDER}, got {r}"
        )));
    }
    Ok(())
}

/// A strictly interior primal-dual point together with its barrier parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct IterateState {
    x: DVector<f64>,
    y: DVector<f64>,
    z: DVector<f64>,
    mu: f64,
    w: DVector<f64>,
}

impl IterateState {
    pub fn new(x: DVector<f64>, y: DVector<f64>, z: DVector<f64>, mu: f64) -> Result<Self> {
        let w = scaling_vector(&x, &z, mu)?;
        Ok(IterateState { x, y, z, mu, w })
    }

    pub fn x(&self) -> &DVector<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn z(&self) -> &DVector<f64> {
        &self.z
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn w(&self) -> &DVector<f64> {
        &self.w
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    /// Duality gap `xᵀz`.
    pub fn gap(&self) -> f64 {
        self.x.dot(&self.z)
    }

    /// Same point, new barrier parameter.
    pub fn with_mu(&self, mu: f64) -> Result<Self> {
        IterateState::new(self.x.clone(), self.y.clone(), self.z.clone(), mu)
    }

    pub fn into_parts(self) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
        (self.x, self.y, self.z)
    }
}

/// `w = sqrt(xz/μ)` componentwise.
pub fn scaling_vector(x: &DVector<f64>, z: &DVector<f64>, mu: f64) -> Result<DVector<f64>> {
    if x.len() != z.len() {
        return Err(Error::DimensionMismatch(format!(
            "x has length {} but z has length {}",
            x.len(),
            z.len()
        )));
    }
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::NotInterior(format!("barrier parameter mu = {mu}")));
    }
    if let Some(i) = x.iter().position(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::NotInterior(format!("x[{i}] = {}", x[i])));
    }
    if let Some(i) = z.iter().position(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::NotInterior(format!("z[{i}] = {}", z[i])));
    }
    Ok(x.zip_map(z, |xi, zi| (xi * zi / mu).sqrt()))
}

fn p_component(w: f64, r: u32) -> f64 {
    let r_i = r as i32;
    2.0 * (1.0 - w.powi(r_i)) / (r as f64 * w.powi(r_i - 1))
}

/// Direction kernel `p_w = (2e - 2w^r) / (r w^(r-1))`.
pub fn p_vector(w: &DVector<f64>, r: u32) -> DVector<f64> {
    debug_assert!(r >= 1);
    w.map(|wi| p_component(wi, r))
}

/// Proximity of a scaling vector, `‖p_w‖/2`.
pub fn proximity_of_w(w: &DVector<f64>, r: u32) -> f64 {
    p_vector(w, r).norm() / 2.0
}

/// Proximity `Γ(x, z, μ)`.
pub fn proximity(x: &DVector<f64>, z: &DVector<f64>, mu: f64, r: u32) -> Result<f64> {
    check_order(r)?;
    Ok(proximity_of_w(&scaling_vector(x, z, mu)?, r))
}

/// Scaled images of a Newton step: `d_x = wΔx/x`, `d_z = wΔz/z`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledDirections {
    pub dx: DVector<f64>,
    pub dz: DVector<f64>,
    pub pw: DVector<f64>,
    pub qw: DVector<f64>,
    pub dx_t_dz: f64,
}

impl ScaledDirections {
    /// Computes the scaled directions without judging them.
    pub fn compute(step: &NewtonStep, state: &IterateState, r: u32) -> Result<Self> {
        let n = state.n();
        if step.dx.len() != n || step.dz.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "step has lengths {}/{}, state has n = {n}",
                step.dx.len(),
                step.dz.len()
            )));
        }
        let w = state.w();
        let dx = DVector::from_fn(n, |i, _| w[i] * step.dx[i] / state.x()[i]);
        let dz = DVector::from_fn(n, |i, _| w[i] * step.dz[i] / state.z()[i]);
        let pw = p_vector(w, r);
        let qw = &dx - &dz;
        let dx_t_dz = dx.dot(&dz);
        Ok(ScaledDirections {
            dx,
            dz,
            pw,
            qw,
            dx_t_dz,
        })
    }

    /// `‖d_x + d_z - p_w‖`, zero in exact arithmetic.
    pub fn sum_identity_residual(&self) -> f64 {
        (&self.dx + &self.dz - &self.pw).norm()
    }

    /// `‖p_w‖ - ‖q_w‖`, nonnegative in exact arithmetic for convex `f`.
    pub fn norm_margin(&self) -> f64 {
        self.pw.norm() - self.qw.norm()
    }

    pub fn validate(&self) -> Result<()> {
        let sum = self.sum_identity_residual();
        if sum > DIRECTION_TOL {
            return Err(Error::Numerical(format!(
                "scaled directions do not sum to p_w (residual {sum:.3e})"
            )));
        }
        if self.dx_t_dz < -DIRECTION_TOL {
            return Err(Error::Numerical(format!(
                "negative curvature along the step: dx'dz = {:.3e}",
                self.dx_t_dz
            )));
        }
        let margin = self.norm_margin();
        if margin < -DIRECTION_TOL {
            return Err(Error::Numerical(format!(
                "|q_w| exceeds |p_w| by {:.3e}",
                -margin
            )));
        }
        Ok(())
    }
}

/// Scaled directions with all identities enforced.
pub fn scaled_directions(
    step: &NewtonStep,
    state: &IterateState,
    r: u32,
) -> Result<ScaledDirections> {
    let dirs = ScaledDirections::compute(step, state, r)?;
    dirs.validate()?;
    Ok(dirs)
}

/// `Ā = A·diag(x/w)/μ` and `B = diag(x/w)·∇²f(x)·diag(x/w)/μ`.
pub fn scaled_system_matrices(
    p: &Problem,
    state: &IterateState,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = p.n();
    if state.n() != n {
        return Err(Error::DimensionMismatch(format!(
            "state has n = {}, problem has n = {n}",
            state.n()
        )));
    }
    let scale = state.x().component_div(state.w());
    let mu = state.mu();
    let mut abar = p.a().clone();
    for (j, mut col) in abar.column_iter_mut().enumerate() {
        col *= scale[j] / mu;
    }
    let mut b = p.objective().hessian(state.x())?;
    for i in 0..n {
        for j in 0..n {
            b[(i, j)] *= scale[i] * scale[j] / mu;
        }
    }
    Ok((abar, b))
}

/// Coefficient `C(r)` of the quadratic decrease `Γ₊ ≤ C(r)·Γ²`.
///
/// The closed form `e^r(e^{r²} - (e^{2r}-1)^{r/2})((r-1)²+1) / (r(e^{2r}-1)^{(r-1)/2})`
/// cancels catastrophically for larger `r`; with `u = e^{-2r}` it equals
/// `e^{2r}(1 - (1-u)^{r/2})((r-1)²+1) / (r(1-u)^{(r-1)/2})`, evaluated here
/// through `expm1`/`ln_1p`.
pub fn contraction_coefficient(r: u32) -> Result<f64> {
    check_order(r)?;
    let rf = r as f64;
    let u = (-2.0 * rf).exp();
    let log1m = (-u).ln_1p();
    let one_minus_pow = -(0.5 * rf * log1m).exp_m1();
    let denom = rf * (0.5 * (rf - 1.0) * log1m).exp();
    Ok((2.0 * rf).exp() * one_minus_pow * ((rf - 1.0).powi(2) + 1.0) / denom)
}

/// Per-step audit of the inequalities along a full Newton step at fixed μ.
#[derive(Debug, Clone, PartialEq)]
pub struct MonitorReport {
    /// `w₊ ≥ sqrt(1-Γ²)e` (checked when Γ < 1).
    pub step_floor_ok: bool,
    /// `Γ₊ ≤ C(r)Γ²` (checked when Γ < e^{-r}).
    pub contraction_ok: bool,
    /// `x₊ᵀz₊ ≤ μ(n + (r-1)²/e^{2r})` (checked when Γ < e^{-r}).
    pub gap_bound_ok: bool,
    /// Γ < e^{-r} right after the μ-update, i.e. the previous step kept
    /// the iterate in the quadratic-convergence region.
    pub invariance_ok: bool,
    /// `w² + w p_w ≥ e - p_w²/4` componentwise.
    pub kernel_bound_ok: bool,
    /// `d_xᵀd_z ≥ 0`.
    pub curvature_ok: bool,
    /// `‖p_w‖ ≥ ‖q_w‖`.
    pub norm_order_ok: bool,
    pub gamma_before: f64,
    pub gamma_after: f64,
    pub contraction_bound: f64,
    pub gap_bound: f64,
    /// Most negative slack over every evaluated inequality.
    pub worst_margin: f64,
}

impl MonitorReport {
    pub fn violations(&self) -> usize {
        [
            self.step_floor_ok,
            self.contraction_ok,
            self.gap_bound_ok,
            self.invariance_ok,
            self.kernel_bound_ok,
            self.curvature_ok,
            self.norm_order_ok,
        ]
        .iter()
        .filter(|ok| !**ok)
        .count()
    }

    pub fn all_ok(&self) -> bool {
        self.violations() == 0
    }
}

/// Smallest componentwise slack of `w² + w p_w - e + p_w²/4 ≥ 0`.
pub fn kernel_bound_margin(w: &DVector<f64>, pw: &DVector<f64>) -> f64 {
    w.iter()
        .zip(pw.iter())
        .map(|(&wi, &pi)| wi * wi + wi * pi - 1.0 + 0.25 * pi * pi)
        .fold(f64::INFINITY, f64::min)
}

/// Audits one full Newton step. `before` is the iterate at the updated μ
/// the step was computed for, `after` the stepped iterate at the same μ.
pub fn monitor_step(
    before: &IterateState,
    after: &IterateState,
    dirs: &ScaledDirections,
    r: u32,
) -> MonitorReport {
    debug_assert_eq!(before.mu(), after.mu());
    let n = before.n() as f64;
    let rf = r as f64;
    let threshold = (-rf).exp();
    let gamma = proximity_of_w(before.w(), r);
    let gamma_after = proximity_of_w(after.w(), r);
    let coefficient = contraction_coefficient(r.clamp(1, MAX_ORDER)).unwrap_or(f64::INFINITY);
    let contraction_bound = coefficient * gamma * gamma;
    let gap_bound = before.mu() * (n + (rf - 1.0).powi(2) * (-2.0 * rf).exp());

    let mut worst = f64::INFINITY;
    let mut check = |margin: f64| {
        worst = worst.min(margin);
        margin >= -MONITOR_TOL
    };

    let step_floor_ok = if gamma < 1.0 {
        let floor = (1.0 - gamma * gamma).sqrt();
        check(after.w().min() - floor)
    } else {
        true
    };
    let in_region = gamma < threshold;
    let contraction_ok = !in_region || check(contraction_bound - gamma_after);
    let gap_bound_ok = !in_region || check(gap_bound - after.gap());
    let invariance_ok = check(threshold - gamma);
    let kernel_bound_ok = check(kernel_bound_margin(before.w(), &dirs.pw));
    let curvature_ok = check(dirs.dx_t_dz);
    let norm_order_ok = check(dirs.norm_margin());

    MonitorReport {
        step_floor_ok,
        contraction_ok,
        gap_bound_ok,
        invariance_ok,
        kernel_bound_ok,
        curvature_ok,
        norm_order_ok,
        gamma_before: gamma,
        gamma_after,
        contraction_bound,
        gap_bound,
        worst_margin: worst,
    }
}

/// The ratio `((r-1)²w^{2r} + (2r-2)w^r - r²w^{2r-2} + 1) / (1-w^r)²`.
pub fn gap_excess_ratio(w: f64, r: u32) -> f64 {
    let rf = r as f64;
    let r_i = r as i32;
    let wr = w.powi(r_i);
    let num =
        (rf - 1.0).powi(2) * wr * wr + (2.0 * rf - 2.0) * wr - rf * rf * w.powi(2 * r_i - 2) + 1.0;
    num / ((1.0 - wr) * (1.0 - wr))
}

/// Checks `0 ≤ gap_excess_ratio(w, r) ≤ (r-1)²` on every grid point.
pub fn check_gap_excess_ratio(w_grid: &[f64], r: u32) -> Result<bool> {
    check_order(r)?;
    let upper = (r as f64 - 1.0).powi(2);
    for &w in w_grid {
        if !(w > 0.0) || w == 1.0 {
            return Err(Error::InvalidParameter(format!(
                "grid point {w} must be positive and different from 1"
            )));
        }
        let ratio = gap_excess_ratio(w, r);
        if !(ratio >= -MONITOR_TOL && ratio <= upper + MONITOR_TOL) {
            return Ok(false);
        }
    }
    Ok(true)
}
