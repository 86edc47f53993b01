//! Problem data for `min f(x) s.t. Ax = b, x >= 0`, the objective oracle,
//! strictly feasible start points, and a generator of certified instances.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::centralpath::proximity;
use crate::error::{Error, Result};
use crate::solver::gamma_threshold;

/// Relative singular-value threshold below which `A` is considered rank deficient.
pub const RANK_TOL: f64 = 1e-10;
/// The generator resamples `A` until its singular values are separated by this ratio.
pub const GENERATOR_RANK_TOL: f64 = 1e-8;
pub const SYMMETRY_TOL: f64 = 1e-12;
pub const PSD_TOL: f64 = 1e-10;
/// Residual tolerance factor for start-point feasibility.
pub const START_RESIDUAL_TOL: f64 = 1e-8;

const GENERATOR_MAX_RESAMPLES: usize = 64;

/// A twice-differentiable convex function supplied by the caller.
///
/// The solver trusts convexity; the runtime monitors will flag a Hessian
/// that is not positive semidefinite along the computed directions.
pub trait ConvexOracle: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn value(&self, x: &DVector<f64>) -> f64;
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;
    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ObjectiveKind {
    Linear,
    Quadratic,
    Custom,
}

impl ObjectiveKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ObjectiveKind::Linear => "linear",
            ObjectiveKind::Quadratic => "quadratic",
            ObjectiveKind::Custom => "custom",
        }
    }
}

impl fmt::Display for ObjectiveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ObjectiveKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(ObjectiveKind::Linear),
            "quadratic" => Ok(ObjectiveKind::Quadratic),
            other => Err(Error::InvalidParameter(format!(
                "unknown objective kind '{other}' (expected linear or quadratic)"
            ))),
        }
    }
}

/// The objective `f`. Linear and quadratic families are built in; anything
/// else goes through [`ConvexOracle`].
#[derive(Debug, Clone)]
pub enum ObjectiveSpec {
    /// `f(x) = c^T x`
    Linear {
        c: DVector<f64>,
    },
    /// `f(x) = c^T x + x^T Q x / 2`
    Quadratic {
        c: DVector<f64>,
        q: DMatrix<f64>,
    },
    Custom(Arc<dyn ConvexOracle>),
}

impl PartialEq for ObjectiveSpec {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (ObjectiveSpec::Linear { c: a }, ObjectiveSpec::Linear { c: b }) => a == b,
            (
                ObjectiveSpec::Quadratic { c: ca, q: qa },
                ObjectiveSpec::Quadratic { c: cb, q: qb },
            ) => ca == cb && qa == qb,
            (ObjectiveSpec::Custom(a), ObjectiveSpec::Custom(b)) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }
}

/// Value, gradient and Hessian of the objective at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveEval {
    pub value: f64,
    pub gradient: DVector<f64>,
    pub hessian: DMatrix<f64>,
    /// False when `x` is not strictly positive. Evaluation is still
    /// permitted there, but such a point is not usable by the solver.
    pub interior: bool,
}

impl ObjectiveSpec {
    pub fn kind(&self) -> ObjectiveKind {
        match self {
            ObjectiveSpec::Linear { .. } => ObjectiveKind::Linear,
            ObjectiveSpec::Quadratic { .. } => ObjectiveKind::Quadratic,
            ObjectiveSpec::Custom(_) => ObjectiveKind::Custom,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ObjectiveSpec::Linear { c } | ObjectiveSpec::Quadratic { c, .. } => c.len(),
            ObjectiveSpec::Custom(oracle) => oracle.dim(),
        }
    }

    fn check_dim(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "objective expects {} variables, got {}",
                self.dim(),
                x.len()
            )));
        }
        Ok(())
    }

    pub fn value(&self, x: &DVector<f64>) -> Result<f64> {
        self.check_dim(x)?;
        Ok(match self {
            ObjectiveSpec::Linear { c } => c.dot(x),
            ObjectiveSpec::Quadratic { c, q } => c.dot(x) + 0.5 * x.dot(&(q * x)),
            ObjectiveSpec::Custom(oracle) => oracle.value(x),
        })
    }

    pub fn gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dim(x)?;
        Ok(match self {
            ObjectiveSpec::Linear { c } => c.clone(),
            ObjectiveSpec::Quadratic { c, q } => c + q * x,
            ObjectiveSpec::Custom(oracle) => oracle.gradient(x),
        })
    }

    pub fn hessian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_dim(x)?;
        Ok(match self {
            ObjectiveSpec::Linear { c } => DMatrix::zeros(c.len(), c.len()),
            ObjectiveSpec::Quadratic { q, .. } => q.clone(),
            ObjectiveSpec::Custom(oracle) => oracle.hessian(x),
        })
    }
}

/// Evaluates `f`, `∇f` and `∇²f` at `x`.
pub fn objective_eval(spec: &ObjectiveSpec, x: &DVector<f64>) -> Result<ObjectiveEval> {
    Ok(ObjectiveEval {
        value: spec.value(x)?,
        gradient: spec.gradient(x)?,
        hessian: spec.hessian(x)?,
        interior: x.iter().all(|&v| v > 0.0),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StartPoint {
    pub x0: DVector<f64>,
    pub y0: DVector<f64>,
    pub z0: DVector<f64>,
}

/// Outcome of [`validate_start`].
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub min_x: f64,
    pub min_z: f64,
    /// Proximity at `μ⁰ = x0ᵀz0/n`; infinite when the start is not interior.
    pub gamma0: f64,
    pub admissible: bool,
}

/// A validated instance. Construction checks every structural invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    a: DMatrix<f64>,
    b: DVector<f64>,
    objective: ObjectiveSpec,
    start: Option<StartPoint>,
}

impl Problem {
    pub fn new(
        a: DMatrix<f64>,
        b: DVector<f64>,
        objective: ObjectiveSpec,
        start: Option<StartPoint>,
    ) -> Result<Self> {
        let (m, n) = a.shape();
        if m == 0 || m >= n {
            return Err(Error::BadShape { n, m });
        }
        if b.len() != m {
            return Err(Error::DimensionMismatch(format!(
                "b has length {} but A has {m} rows",
                b.len()
            )));
        }
        if objective.dim() != n {
            return Err(Error::DimensionMismatch(format!(
                "objective has dimension {} but A has {n} columns",
                objective.dim()
            )));
        }
        if let ObjectiveSpec::Quadratic { q, .. } = &objective {
            if q.shape() != (n, n) {
                return Err(Error::DimensionMismatch(format!(
                    "Q is {}x{}, expected {n}x{n}",
                    q.nrows(),
                    q.ncols()
                )));
            }
            check_psd(q)?;
        }
        if let Some(s) = &start {
            if s.x0.len() != n || s.y0.len() != m || s.z0.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "start point has sizes x={}, y={}, z={}; expected {n}, {m}, {n}",
                    s.x0.len(),
                    s.y0.len(),
                    s.z0.len()
                )));
            }
        }
        let ratio = singular_value_ratio(&a);
        if !(ratio > RANK_TOL) {
            return Err(Error::RankDeficient { ratio });
        }
        Ok(Problem {
            a,
            b,
            objective,
            start,
        })
    }

    pub fn n(&self) -> usize {
        self.a.ncols()
    }

    pub fn m(&self) -> usize {
        self.a.nrows()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn objective(&self) -> &ObjectiveSpec {
        &self.objective
    }

    pub fn start(&self) -> Option<&StartPoint> {
        self.start.as_ref()
    }

    pub fn with_start(self, start: StartPoint) -> Result<Self> {
        Problem::new(self.a, self.b, self.objective, Some(start))
    }
}

/// Ratio of smallest to largest singular value; zero for the zero matrix.
pub fn singular_value_ratio(a: &DMatrix<f64>) -> f64 {
    if a.iter().any(|v| !v.is_finite()) {
        return 0.0;
    }
    let sv = a.clone().svd(false, false).singular_values;
    let max = sv.max();
    if max <= 0.0 {
        return 0.0;
    }
    sv.min() / max
}

fn check_psd(q: &DMatrix<f64>) -> Result<()> {
    let scale = q.amax();
    let asym = (q - q.transpose()).amax();
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::NotSymmetric(asym));
    }
    if scale == 0.0 {
        return Ok(());
    }
    let sym = (q + q.transpose()) * 0.5;
    let eig = sym.symmetric_eigenvalues();
    let norm = eig.amax();
    let min = eig.min();
    if min < -PSD_TOL * norm {
        return Err(Error::NotPsd(min));
    }
    Ok(())
}

/// Builds a strictly feasible instance whose start `x0 = z0 = e` sits exactly
/// on the central path at `μ⁰ = 1`, so its proximity is zero for every `r`.
pub fn generate_instance(n: usize, m: usize, kind: ObjectiveKind, seed: u64) -> Result<Problem> {
    if n < 2 || m == 0 || m >= n {
        return Err(Error::BadShape { n, m });
    }
    if kind == ObjectiveKind::Custom {
        return Err(Error::InvalidParameter(
            "the generator only builds linear or quadratic objectives".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = None;
    for _ in 0..GENERATOR_MAX_RESAMPLES {
        let candidate = DMatrix::from_fn(m, n, |_, _| rng.gen_range(-1.0..1.0));
        if singular_value_ratio(&candidate) > GENERATOR_RANK_TOL {
            a = Some(candidate);
            break;
        }
    }
    let a = a.ok_or(Error::ResampleLimit(seed))?;

    let ones = DVector::from_element(n, 1.0);
    let y0 = DVector::from_fn(m, |_, _| rng.gen_range(-1.0..1.0));
    let b = &a * &ones;
    let aty = a.transpose() * &y0;

    let objective = match kind {
        ObjectiveKind::Linear => ObjectiveSpec::Linear { c: &ones + aty },
        _ => {
            let g = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
            let gtg = g.transpose() * &g / n as f64;
            let q = (&gtg + gtg.transpose()) * 0.5;
            let c = &ones + aty - &q * &ones;
            ObjectiveSpec::Quadratic { c, q }
        }
    };
    let start = StartPoint {
        x0: ones.clone(),
        y0,
        z0: ones,
    };
    Problem::new(a, b, objective, Some(start))
}

/// Checks strict feasibility of `s` and its proximity against `1/e^r`.
pub fn validate_start(p: &Problem, s: &StartPoint, r: u32) -> FeasibilityReport {
    validate_start_with_threshold(p, s, r, gamma_threshold(r))
}

/// Like [`validate_start`] with an explicit proximity threshold.
pub fn validate_start_with_threshold(
    p: &Problem,
    s: &StartPoint,
    r: u32,
    gamma: f64,
) -> FeasibilityReport {
    let (n, m) = (p.n(), p.m());
    if s.x0.len() != n || s.y0.len() != m || s.z0.len() != n {
        return FeasibilityReport {
            primal_residual: f64::INFINITY,
            dual_residual: f64::INFINITY,
            min_x: f64::NAN,
            min_z: f64::NAN,
            gamma0: f64::INFINITY,
            admissible: false,
        };
    }
    let primal_residual = (p.a() * &s.x0 - p.b()).norm();
    // dimensions were checked above, so the gradient cannot fail
    let grad = p.objective().gradient(&s.x0).expect("dimension checked");
    let dual_residual = (p.a().transpose() * &s.y0 + &s.z0 - &grad).norm();
    let min_x = s.x0.min();
    let min_z = s.z0.min();

    let gamma0 = if min_x > 0.0 && min_z > 0.0 {
        let mu0 = s.x0.dot(&s.z0) / n as f64;
        proximity(&s.x0, &s.z0, mu0, r).unwrap_or(f64::INFINITY)
    } else {
        f64::INFINITY
    };

    let admissible = min_x > 0.0
        && min_z > 0.0
        && primal_residual <= START_RESIDUAL_TOL * (1.0 + p.b().norm())
        && dual_residual <= START_RESIDUAL_TOL * (1.0 + grad.norm())
        && gamma0 < gamma;

    FeasibilityReport {
        primal_residual,
        dual_residual,
        min_x,
        min_z,
        gamma0,
        admissible,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad_identity(c: &[f64]) -> ObjectiveSpec {
        ObjectiveSpec::Quadratic {
            c: DVector::from_column_slice(c),
            q: DMatrix::identity(c.len(), c.len()),
        }
    }

    #[test]
    fn linear_eval() {
        let spec = ObjectiveSpec::Linear {
            c: DVector::from_vec(vec![1.0, 1.0]),
        };
        let e = objective_eval(&spec, &DVector::from_vec(vec![1.0, 1.0])).unwrap();
        assert_eq!(e.value, 2.0);
        assert_eq!(e.gradient, DVector::from_vec(vec![1.0, 1.0]));
        assert_eq!(e.hessian, DMatrix::zeros(2, 2));
        assert!(e.interior);
    }

    #[test]
    fn quadratic_eval() {
        let e = objective_eval(
            &quad_identity(&[0.0, 0.0]),
            &DVector::from_vec(vec![1.0, 2.0]),
        )
        .unwrap();
        assert_eq!(e.value, 2.5);
        assert_eq!(e.gradient, DVector::from_vec(vec![1.0, 2.0]));
        assert_eq!(e.hessian, DMatrix::identity(2, 2));
    }

    #[test]
    fn boundary_eval_is_flagged() {
        let e = objective_eval(&quad_identity(&[1.0, 1.0]), &DVector::zeros(2)).unwrap();
        assert_eq!(e.value, 0.0);
        assert!(!e.interior);
    }

    #[test]
    fn eval_dimension_mismatch() {
        let err = objective_eval(&quad_identity(&[1.0, 1.0]), &DVector::zeros(3)).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch(_)));
    }

    #[test]
    fn rejects_rank_deficient_a() {
        let a = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0]);
        let err = Problem::new(
            a,
            DVector::from_vec(vec![1.0, 2.0]),
            ObjectiveSpec::Linear {
                c: DVector::zeros(3),
            },
            None,
        )
        .unwrap_err();
        assert!(matches!(err, Error::RankDeficient { .. }));
    }

    #[test]
    fn rejects_indefinite_q() {
        let q = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let err = Problem::new(
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            DVector::from_vec(vec![1.0]),
            ObjectiveSpec::Quadratic {
                c: DVector::zeros(2),
                q,
            },
            None,
        )
        .unwrap_err();
        assert!(matches!(err, Error::NotPsd(_)));
    }

    #[test]
    fn rejects_asymmetric_q() {
        let q = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        let err = Problem::new(
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            DVector::from_vec(vec![1.0]),
            ObjectiveSpec::Quadratic {
                c: DVector::zeros(2),
                q,
            },
            None,
        )
        .unwrap_err();
        assert!(matches!(err, Error::NotSymmetric(_)));
    }

    #[test]
    fn rejects_square_a() {
        let err = Problem::new(
            DMatrix::identity(2, 2),
            DVector::zeros(2),
            ObjectiveSpec::Linear {
                c: DVector::zeros(2),
            },
            None,
        )
        .unwrap_err();
        assert_eq!(err, Error::BadShape { n: 2, m: 2 });
    }

    #[test]
    fn generated_start_is_centered() {
        let p = generate_instance(4, 2, ObjectiveKind::Linear, 7).unwrap();
        let report = validate_start(&p, p.start().unwrap(), 1);
        assert!(report.admissible);
        assert_eq!(report.gamma0, 0.0);
        assert!(report.primal_residual < 1e-14);
        assert!(report.dual_residual < 1e-14);
    }

    #[test]
    fn generator_is_deterministic() {
        let p1 = generate_instance(4, 2, ObjectiveKind::Linear, 7).unwrap();
        let p2 = generate_instance(4, 2, ObjectiveKind::Linear, 7).unwrap();
        assert_eq!(p1, p2);
        let p3 = generate_instance(4, 2, ObjectiveKind::Linear, 8).unwrap();
        assert_ne!(p1, p3);
    }

    #[test]
    fn generated_quadratic_is_psd_and_admissible() {
        let p = generate_instance(10, 5, ObjectiveKind::Quadratic, 1).unwrap();
        let ObjectiveSpec::Quadratic { q, .. } = p.objective() else {
            panic!("expected quadratic objective");
        };
        let eig = q.clone().symmetric_eigenvalues();
        assert!(eig.min() >= -PSD_TOL * eig.amax());
        for r in 1..=5 {
            let report = validate_start(&p, p.start().unwrap(), r);
            assert!(report.admissible, "r={r}: {report:?}");
            assert_eq!(report.gamma0, 0.0);
        }
    }

    #[test]
    fn generator_rejects_bad_shape() {
        assert!(generate_instance(2, 2, ObjectiveKind::Linear, 1).is_err());
        assert!(generate_instance(1, 0, ObjectiveKind::Linear, 1).is_err());
        assert!(generate_instance(4, 0, ObjectiveKind::Quadratic, 1).is_err());
    }

    #[test]
    fn zero_component_start_is_rejected() {
        let p = generate_instance(4, 2, ObjectiveKind::Linear, 7).unwrap();
        let mut s = p.start().unwrap().clone();
        s.x0[2] = 0.0;
        let report = validate_start(&p, &s, 1);
        assert!(!report.admissible);
        assert_eq!(report.min_x, 0.0);
    }

    #[test]
    fn perturbed_z_breaks_dual_residual() {
        let p = generate_instance(4, 2, ObjectiveKind::Quadratic, 3).unwrap();
        let mut s = p.start().unwrap().clone();
        s.z0[1] += 0.1;
        let report = validate_start(&p, &s, 1);
        assert!((report.dual_residual - 0.1).abs() < 1e-12);
        assert!(!report.admissible);
    }

    #[test]
    fn off_center_start_fails_threshold() {
        let p = generate_instance(4, 2, ObjectiveKind::Linear, 7).unwrap();
        let s = StartPoint {
            x0: DVector::from_vec(vec![1.0, 1.0, 1.0, 1.0]),
            y0: p.start().unwrap().y0.clone(),
            z0: DVector::from_vec(vec![4.0, 1.0, 1.0, 1.0]),
        };
        let report = validate_start(&p, &s, 1);
        assert!(report.gamma0 > gamma_threshold(1));
        assert!(!report.admissible);
    }
}
