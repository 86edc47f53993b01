//! The short-step main loop: shrink μ by `(1-θ)`, take one full Newton
//! step, repeat until `xᵀz ≤ ε`.

use std::fmt;
use std::io::{self, Write};

use nalgebra::DVector;

use crate::centralpath::{
    check_order, monitor_step, proximity_of_w, scaled_system_matrices, IterateState, MonitorReport,
    ScaledDirections,
};
use crate::error::{Error, Result};
use crate::newton::newton_step;
use crate::problem::{validate_start_with_threshold, Problem};

/// `θ = 1/(e^{2r}√n)`.
pub fn default_theta(n: usize, r: u32) -> Result<f64> {
    check_order(r)?;
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "the default update parameter needs n >= 2, got n = {n}"
        )));
    }
    Ok(1.0 / ((2.0 * r as f64).exp() * (n as f64).sqrt()))
}

/// Proximity threshold `γ = 1/e^r`.
pub fn gamma_threshold(r: u32) -> f64 {
    (-(r as f64)).exp()
}

/// `⌈e^{2r}√n · ln(μ⁰(n + (r-1)²/e^{2r})/ε)⌉`, or 0 when the log argument is at most 1.
pub fn iteration_bound(mu0: f64, n: usize, r: u32, epsilon: f64) -> u64 {
    let rf = r as f64;
    let arg = mu0 * (n as f64 + (rf - 1.0).powi(2) * (-2.0 * rf).exp()) / epsilon;
    if !(arg > 1.0) {
        return 0;
    }
    ((2.0 * rf).exp() * (n as f64).sqrt() * arg.ln()).ceil() as u64
}

/// Solver settings. `None` in `theta`, `gamma` or `max_iterations` selects
/// the automatic value.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub epsilon: f64,
    pub r: u32,
    pub theta: Option<f64>,
    pub gamma: Option<f64>,
    pub max_iterations: Option<u64>,
    /// Treat any monitor violation as a numerical failure.
    pub strict_monitors: bool,
    /// Form the scaled matrices every iteration for extra diagnostics.
    pub verbose: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            epsilon: 1e-6,
            r: 1,
            theta: None,
            gamma: None,
            max_iterations: None,
            strict_monitors: false,
            verbose: false,
        }
    }
}

impl SolverConfig {
    pub fn new(epsilon: f64, r: u32) -> Self {
        SolverConfig {
            epsilon,
            r,
            ..Default::default()
        }
    }

    /// Parameters after resolving the automatic settings.
    pub fn resolve(&self, n: usize, mu0: f64) -> Result<ResolvedConfig> {
        check_order(self.r)?;
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "accuracy must be positive, got {}",
                self.epsilon
            )));
        }
        let theta = match self.theta {
            Some(t) => t,
            None => default_theta(n, self.r)?,
        };
        if !(theta > 0.0 && theta < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "update parameter must lie in (0, 1), got {theta}"
            )));
        }
        let gamma = self.gamma.unwrap_or_else(|| gamma_threshold(self.r));
        if !(gamma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "proximity threshold must be positive, got {gamma}"
            )));
        }
        let bound = iteration_bound(mu0, n, self.r, self.epsilon);
        let max_iterations = match self.max_iterations {
            Some(0) => {
                return Err(Error::InvalidParameter(
                    "iteration cap must be positive".into(),
                ))
            }
            Some(k) => k,
            None => bound.saturating_mul(10).max(1),
        };
        Ok(ResolvedConfig {
            theta,
            gamma,
            max_iterations,
            bound,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolvedConfig {
    pub theta: f64,
    pub gamma: f64,
    pub max_iterations: u64,
    pub bound: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolveStatus {
    Converged,
    IterationCap,
    NumericalFailure,
    InvalidStart,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Converged => "converged",
            SolveStatus::IterationCap => "iteration_cap",
            SolveStatus::NumericalFailure => "numerical_failure",
            SolveStatus::InvalidStart => "invalid_start",
        }
    }
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Diagnostics for one completed iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub iter: u64,
    /// Barrier parameter the step was computed for.
    pub mu: f64,
    /// `xᵀz` after the step.
    pub gap: f64,
    /// Proximity after the step, at the same μ.
    pub gamma: f64,
    pub min_w: f64,
    pub norm_pw: f64,
    pub norm_qw: f64,
    pub dx_t_dz: f64,
    pub primal_res: f64,
    pub dual_res: f64,
    /// `‖∇f(x)‖` after the step, the scale of `dual_res`.
    pub grad_norm: f64,
    pub min_x: f64,
    pub min_z: f64,
    /// `‖d_x + d_z - p_w‖`.
    pub pw_identity_res: f64,
    /// `‖Ā d_x‖`.
    pub abar_dx: f64,
    /// `d_xᵀ B d_x`, only with `verbose`.
    pub dx_b_dx: Option<f64>,
    pub newton_residual: f64,
    pub monitors: MonitorReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub z: DVector<f64>,
    pub mu0: f64,
    pub mu_final: f64,
    pub gap_final: f64,
    pub iterations: u64,
    pub bound: u64,
    pub theta: f64,
    pub gamma: f64,
    pub max_iterations: u64,
    pub trace: Vec<TraceRecord>,
    pub monitor_violations: usize,
    /// Reason for a non-converged status.
    pub message: Option<String>,
}

impl SolveResult {
    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }

    /// Largest proximity recorded after a full step.
    pub fn max_gamma(&self) -> f64 {
        self.trace.iter().map(|t| t.gamma).fold(0.0, f64::max)
    }
}

/// Runs the algorithm from the start point stored in `p`.
///
/// Returns `Err` only for unusable configuration; every runtime outcome is
/// reported through [`SolveResult::status`].
pub fn solve(p: &Problem, cfg: &SolverConfig) -> Result<SolveResult> {
    let n = p.n();
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "solver needs n >= 2, got {n}"
        )));
    }
    check_order(cfg.r)?;
    let r = cfg.r;

    let Some(start) = p.start() else {
        let resolved = cfg.resolve(n, 1.0)?;
        return Ok(invalid_start(
            resolved,
            "instance has no start point".into(),
        ));
    };
    let mu0 = start.x0.dot(&start.z0) / n as f64;
    let resolved = cfg.resolve(n, if mu0 > 0.0 { mu0 } else { 1.0 })?;
    let report = validate_start_with_threshold(p, start, r, resolved.gamma);
    if !report.admissible {
        return Ok(invalid_start(
            resolved,
            format!(
                "start is not admissible: primal residual {:.3e}, dual residual {:.3e}, \
                 min x {:.3e}, min z {:.3e}, proximity {:.3e} (threshold {:.3e})",
                report.primal_residual,
                report.dual_residual,
                report.min_x,
                report.min_z,
                report.gamma0,
                resolved.gamma
            ),
        ));
    }

    let mut current = IterateState::new(start.x0.clone(), start.y0.clone(), start.z0.clone(), mu0)?;
    let mut mu = mu0;
    let mut trace = Vec::new();
    let mut violations = 0usize;
    let mut iterations = 0u64;
    let mut status = SolveStatus::Converged;
    let mut message = None;

    while current.gap() > cfg.epsilon {
        if iterations >= resolved.max_iterations {
            status = SolveStatus::IterationCap;
            message = Some(format!("reached {} iterations", resolved.max_iterations));
            break;
        }
        let next_mu = (1.0 - resolved.theta) * mu;
        match iterate(p, &current, next_mu, cfg, iterations + 1) {
            Ok((after, record)) => {
                let bad = record.monitors.violations();
                violations += bad;
                trace.push(record);
                current = after;
                mu = next_mu;
                iterations += 1;
                if cfg.strict_monitors && bad > 0 {
                    status = SolveStatus::NumericalFailure;
                    message = Some(format!("monitor violation at iteration {iterations}"));
                    break;
                }
            }
            Err(e) => {
                status = SolveStatus::NumericalFailure;
                message = Some(format!("iteration {}: {e}", iterations + 1));
                break;
            }
        }
    }

    let gap_final = current.gap();
    let (x, y, z) = current.into_parts();
    Ok(SolveResult {
        status,
        x,
        y,
        z,
        mu0,
        mu_final: mu,
        gap_final,
        iterations,
        bound: resolved.bound,
        theta: resolved.theta,
        gamma: resolved.gamma,
        max_iterations: resolved.max_iterations,
        trace,
        monitor_violations: violations,
        message,
    })
}

fn invalid_start(resolved: ResolvedConfig, message: String) -> SolveResult {
    SolveResult {
        status: SolveStatus::InvalidStart,
        x: DVector::zeros(0),
        y: DVector::zeros(0),
        z: DVector::zeros(0),
        mu0: f64::NAN,
        mu_final: f64::NAN,
        gap_final: f64::NAN,
        iterations: 0,
        bound: resolved.bound,
        theta: resolved.theta,
        gamma: resolved.gamma,
        max_iterations: resolved.max_iterations,
        trace: Vec::new(),
        monitor_violations: 0,
        message: Some(message),
    }
}

/// One μ-update plus full step. Returns the new iterate (at the new μ).
fn iterate(
    p: &Problem,
    current: &IterateState,
    mu: f64,
    cfg: &SolverConfig,
    iter: u64,
) -> Result<(IterateState, TraceRecord)> {
    let r = cfg.r;
    let before = current.with_mu(mu)?;
    let step = newton_step(p, &before, mu, r)?;

    let x = before.x() + &step.dx;
    let y = before.y() + &step.dy;
    let z = before.z() + &step.dz;
    if let Some(i) = x.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::NotInterior(format!(
            "full step gives x[{i}] = {:.3e}",
            x[i]
        )));
    }
    if let Some(i) = z.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::NotInterior(format!(
            "full step gives z[{i}] = {:.3e}",
            z[i]
        )));
    }
    let after = IterateState::new(x, y, z, mu)?;

    let dirs = ScaledDirections::compute(&step, &before, r)?;
    let monitors = monitor_step(&before, &after, &dirs, r);

    let (abar_dx, dx_b_dx) = if cfg.verbose {
        let (abar, b) = scaled_system_matrices(p, &before)?;
        ((abar * &dirs.dx).norm(), Some(dirs.dx.dot(&(b * &dirs.dx))))
    } else {
        ((p.a() * &step.dx).norm() / mu, None)
    };

    let grad = p.objective().gradient(after.x())?;
    let record = TraceRecord {
        iter,
        mu,
        gap: after.gap(),
        gamma: proximity_of_w(after.w(), r),
        min_w: after.w().min(),
        norm_pw: dirs.pw.norm(),
        norm_qw: dirs.qw.norm(),
        dx_t_dz: dirs.dx_t_dz,
        primal_res: (p.a() * after.x() - p.b()).norm(),
        dual_res: (p.a().transpose() * after.y() + after.z() - &grad).norm(),
        grad_norm: grad.norm(),
        min_x: after.x().min(),
        min_z: after.z().min(),
        pw_identity_res: dirs.sum_identity_residual(),
        abar_dx,
        dx_b_dx,
        newton_residual: step.residual,
        monitors,
    };
    Ok((after, record))
}

pub const TRACE_HEADER: &str =
    "iter,mu,gap,gamma,min_w,norm_pw,norm_qw,dxTdz,primal_res,dual_res,lemma2,lemma4,lemma5,eq111,eq112,eq115";

/// Writes the trace as CSV with 17 significant digits and 0/1 flags.
pub fn write_trace_csv<W: Write>(trace: &[TraceRecord], mut out: W) -> io::Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    for t in trace {
        let m = &t.monitors;
        writeln!(
            out,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{},{},{},{},{}",
            t.iter,
            t.mu,
            t.gap,
            t.gamma,
            t.min_w,
            t.norm_pw,
            t.norm_qw,
            t.dx_t_dz,
            t.primal_res,
            t.dual_res,
            m.step_floor_ok as u8,
            m.contraction_ok as u8,
            m.gap_bound_ok as u8,
            m.curvature_ok as u8,
            m.norm_order_ok as u8,
            m.kernel_bound_ok as u8,
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{generate_instance, ObjectiveKind};

    #[test]
    fn theta_and_gamma_values() {
        assert!((default_theta(4, 1).unwrap() - 0.067_667_641_618_306_35).abs() < 1e-15);
        assert!((default_theta(4, 2).unwrap() - 0.009_157_819_444_367_09).abs() < 1e-15);
        assert!(default_theta(1, 1).is_err());
        assert!(default_theta(4, 13).is_err());
        assert!((gamma_threshold(1) - 0.367_879_441_171_442_3).abs() < 1e-15);
        assert!((gamma_threshold(2) - 0.135_335_283_236_612_7).abs() < 1e-15);
        assert!((gamma_threshold(3) - 0.049_787_068_367_863_94).abs() < 1e-15);
    }

    #[test]
    fn bound_values() {
        assert_eq!(iteration_bound(1.0, 4, 1, 1e-6), 225);
        assert_eq!(iteration_bound(1.0, 4, 1, 5.0), 0);
        // 2e⁴·ln((4 + e⁻⁴)·10⁶) = 1660.4797...
        assert_eq!(iteration_bound(1.0, 4, 2, 1e-6), 1661);
    }

    #[test]
    fn already_converged_start() {
        let p = generate_instance(4, 2, ObjectiveKind::Linear, 7).unwrap();
        let res = solve(&p, &SolverConfig::new(10.0, 1)).unwrap();
        assert_eq!(res.status, SolveStatus::Converged);
        assert_eq!(res.iterations, 0);
        assert_eq!(res.x, p.start().unwrap().x0);
        assert_eq!(res.z, p.start().unwrap().z0);
        assert!(res.trace.is_empty());
    }

    #[test]
    fn small_lp_converges_within_bound() {
        let p = generate_instance(4, 2, ObjectiveKind::Linear, 7).unwrap();
        let res = solve(&p, &SolverConfig::new(1e-6, 1)).unwrap();
        assert_eq!(res.status, SolveStatus::Converged, "{:?}", res.message);
        assert_eq!(res.bound, 225);
        assert!(res.iterations <= 225);
        assert!(res.gap_final <= 1e-6);
        assert_eq!(res.monitor_violations, 0);
        assert_eq!(res.trace.len() as u64, res.iterations);
    }

    #[test]
    fn higher_order_takes_longer() {
        let p = generate_instance(4, 2, ObjectiveKind::Linear, 7).unwrap();
        let r1 = solve(&p, &SolverConfig::new(1e-6, 1)).unwrap();
        let r2 = solve(&p, &SolverConfig::new(1e-6, 2)).unwrap();
        assert!(r2.converged());
        assert!(r2.iterations > r1.iterations);
    }

    #[test]
    fn rejects_inadmissible_start() {
        let p = generate_instance(4, 2, ObjectiveKind::Linear, 7).unwrap();
        let mut s = p.start().unwrap().clone();
        s.z0[0] += 0.1;
        let p = p.with_start(s).unwrap();
        let res = solve(&p, &SolverConfig::new(1e-6, 1)).unwrap();
        assert_eq!(res.status, SolveStatus::InvalidStart);
    }

    #[test]
    fn missing_start_is_invalid() {
        let p = generate_instance(4, 2, ObjectiveKind::Linear, 7).unwrap();
        let bare = Problem::new(p.a().clone(), p.b().clone(), p.objective().clone(), None).unwrap();
        let res = solve(&bare, &SolverConfig::new(1e-6, 1)).unwrap();
        assert_eq!(res.status, SolveStatus::InvalidStart);
    }

    #[test]
    fn config_validation() {
        let p = generate_instance(4, 2, ObjectiveKind::Linear, 7).unwrap();
        assert!(solve(&p, &SolverConfig::new(1e-6, 0)).is_err());
        assert!(solve(&p, &SolverConfig::new(1e-6, 13)).is_err());
        assert!(solve(&p, &SolverConfig::new(0.0, 1)).is_err());
        let cfg = SolverConfig {
            theta: Some(1.0),
            ..SolverConfig::new(1e-6, 1)
        };
        assert!(solve(&p, &cfg).is_err());
    }

    #[test]
    fn iteration_cap_reported() {
        let p = generate_instance(4, 2, ObjectiveKind::Quadratic, 2).unwrap();
        let cfg = SolverConfig {
            max_iterations: Some(5),
            ..SolverConfig::new(1e-6, 1)
        };
        let res = solve(&p, &cfg).unwrap();
        assert_eq!(res.status, SolveStatus::IterationCap);
        assert_eq!(res.iterations, 5);
    }

    #[test]
    fn aggressive_theta_trips_strict_monitors() {
        let p = generate_instance(6, 3, ObjectiveKind::Linear, 5).unwrap();
        let cfg = SolverConfig {
            theta: Some(0.5),
            strict_monitors: true,
            ..SolverConfig::new(1e-6, 1)
        };
        let res = solve(&p, &cfg).unwrap();
        assert_eq!(res.status, SolveStatus::NumericalFailure);
        assert_eq!(res.iterations, 1);
        assert!(!res.trace[0].monitors.invariance_ok);
    }

    #[test]
    fn verbose_diagnostics_agree() {
        let p = generate_instance(6, 3, ObjectiveKind::Quadratic, 5).unwrap();
        let plain = solve(&p, &SolverConfig::new(1e-3, 1)).unwrap();
        let cfg = SolverConfig {
            verbose: true,
            ..SolverConfig::new(1e-3, 1)
        };
        let verbose = solve(&p, &cfg).unwrap();
        assert_eq!(plain.iterations, verbose.iterations);
        for (a, b) in plain.trace.iter().zip(&verbose.trace) {
            assert!((a.abar_dx - b.abar_dx).abs() <= 1e-9);
            let form = b.dx_b_dx.unwrap();
            assert!((form - b.dx_t_dz).abs() <= 1e-9 * (1.0 + form.abs()));
        }
    }

    #[test]
    fn deterministic_results() {
        let p = generate_instance(8, 4, ObjectiveKind::Quadratic, 3).unwrap();
        let cfg = SolverConfig::new(1e-5, 2);
        assert_eq!(solve(&p, &cfg).unwrap(), solve(&p, &cfg).unwrap());
    }

    #[test]
    fn trace_csv_layout() {
        let p = generate_instance(4, 2, ObjectiveKind::Linear, 7).unwrap();
        let res = solve(&p, &SolverConfig::new(1e-2, 1)).unwrap();
        let mut buf = Vec::new();
        write_trace_csv(&res.trace, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], TRACE_HEADER);
        assert_eq!(lines.len(), res.trace.len() + 1);
        let fields: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(fields.len(), 16);
        assert_eq!(fields[0], "1");
        assert!(fields[10..].iter().all(|f| *f == "0" || *f == "1"));
        // 17 significant digits: d.dddddddddddddddde±x
        assert_eq!(fields[1].split('e').next().unwrap().len(), 18);
    }
}
