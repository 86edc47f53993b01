//! Independent checks: optimality residuals and brute-force reference
//! solvers for small instances.
//!
//! The reference solvers share nothing with the interior-point path. The LP
//! oracle enumerates basic solutions; the QP oracle enumerates sets of
//! variables pinned to zero and solves each equality-constrained subproblem.

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::problem::{ObjectiveSpec, Problem};

pub const LP_ORACLE_LIMIT: usize = 12;
pub const QP_ORACLE_LIMIT: usize = 10;
const NONNEG_TOL: f64 = 1e-10;
const REDUCED_GRADIENT_TOL: f64 = 1e-9;
const SINGULAR_RATIO: f64 = 1e-12;

/// Residuals of the optimality system `Ax = b`, `Aᵀy + z = ∇f(x)`, `xz = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct KktResiduals {
    pub primal: f64,
    pub dual: f64,
    pub complementarity: f64,
    pub min_x: f64,
    pub min_z: f64,
}

pub fn kkt_residuals(
    p: &Problem,
    x: &DVector<f64>,
    y: &DVector<f64>,
    z: &DVector<f64>,
) -> Result<KktResiduals> {
    let (n, m) = (p.n(), p.m());
    if x.len() != n || y.len() != m || z.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "expected sizes ({n}, {m}, {n}), got ({}, {}, {})",
            x.len(),
            y.len(),
            z.len()
        )));
    }
    let grad = p.objective().gradient(x)?;
    Ok(KktResiduals {
        primal: (p.a() * x - p.b()).norm(),
        dual: (p.a().transpose() * y + z - grad).norm(),
        complementarity: x.dot(z),
        min_x: x.min(),
        min_z: z.min(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceMethod {
    VertexEnumeration,
    ActiveSetEnumeration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSolution {
    pub x_star: DVector<f64>,
    pub objective_star: f64,
    pub method: ReferenceMethod,
    /// Basis (LP) or pinned set (QP) of the returned point.
    pub certificate: String,
    /// Multipliers `(y, z)` certifying optimality, when one was found.
    pub dual: Option<(DVector<f64>, DVector<f64>)>,
}

struct Vertex {
    x: DVector<f64>,
    cols: Vec<usize>,
    value: f64,
}

fn submatrix_cols(a: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), cols.len(), |i, j| a[(i, cols[j])])
}

fn well_conditioned(b: &DMatrix<f64>) -> bool {
    let sv = b.clone().svd(false, false).singular_values;
    let max = sv.max();
    max > 0.0 && sv.min() > SINGULAR_RATIO * max
}

/// Every basic feasible solution of `{Ax = b, x ≥ 0}` in lexicographic
/// basis order, with its cost `cᵀx`.
fn basic_feasible_solutions(a: &DMatrix<f64>, b: &DVector<f64>, c: &DVector<f64>) -> Vec<Vertex> {
    let (m, n) = a.shape();
    let mut out = Vec::new();
    for cols in (0..n).combinations(m) {
        let basis = submatrix_cols(a, &cols);
        if !well_conditioned(&basis) {
            continue;
        }
        let Some(xb) = basis.lu().solve(b) else {
            continue;
        };
        if xb.iter().any(|&v| v < -NONNEG_TOL) {
            continue;
        }
        let mut x = DVector::zeros(n);
        for (k, &j) in cols.iter().enumerate() {
            x[j] = xb[k].max(0.0);
        }
        let value = c.dot(&x);
        out.push(Vertex { x, cols, value });
    }
    out
}

fn first_minimizer(vertices: &[Vertex]) -> Option<&Vertex> {
    vertices
        .iter()
        .fold(None, |best: Option<&Vertex>, v| match best {
            Some(b) if b.value <= v.value => Some(b),
            _ => Some(v),
        })
}

/// Brute-force LP solution by enumerating all bases.
///
/// Unboundedness is decided separately: the recession cone
/// `{d ≥ 0, Ad = 0}` normalised by `eᵀd = 1` is a polytope, and the LP is
/// unbounded iff some vertex of it has `cᵀd < 0`.
pub fn reference_solve_lp(p: &Problem) -> Result<ReferenceSolution> {
    let ObjectiveSpec::Linear { c } = p.objective() else {
        return Err(Error::InvalidParameter(
            "LP oracle needs a linear objective".into(),
        ));
    };
    let (n, m) = (p.n(), p.m());
    if n > LP_ORACLE_LIMIT {
        return Err(Error::TooLarge {
            n,
            limit: LP_ORACLE_LIMIT,
        });
    }
    let vertices = basic_feasible_solutions(p.a(), p.b(), c);
    let best = first_minimizer(&vertices).ok_or(Error::Infeasible)?;

    let mut cone = DMatrix::zeros(m + 1, n);
    cone.view_mut((0, 0), (m, n)).copy_from(p.a());
    cone.row_mut(m).fill(1.0);
    let mut unit = DVector::zeros(m + 1);
    unit[m] = 1.0;
    let scale = 1.0 + c.amax();
    if basic_feasible_solutions(&cone, &unit, c)
        .iter()
        .any(|ray| ray.value < -1e-9 * scale)
    {
        return Err(Error::Unbounded);
    }

    // certificate: first optimal basis whose reduced costs are nonnegative
    let tie = 1e-9 * (1.0 + best.value.abs());
    let dual = vertices
        .iter()
        .filter(|v| v.value <= best.value + tie)
        .find_map(|v| {
            let basis = submatrix_cols(p.a(), &v.cols);
            let cb = DVector::from_iterator(m, v.cols.iter().map(|&j| c[j]));
            let y = basis.transpose().lu().solve(&cb)?;
            let z = c - p.a().transpose() * &y;
            (z.min() >= -REDUCED_GRADIENT_TOL).then_some((y, z))
        });

    Ok(ReferenceSolution {
        x_star: best.x.clone(),
        objective_star: best.value,
        method: ReferenceMethod::VertexEnumeration,
        certificate: format!("basis {:?}", best.cols),
        dual,
    })
}

/// Brute-force convex QP solution by enumerating pinned sets.
pub fn reference_solve_qp(p: &Problem) -> Result<ReferenceSolution> {
    let (c, q) = match p.objective() {
        ObjectiveSpec::Quadratic { c, q } => (c, q),
        _ => {
            return Err(Error::InvalidParameter(
                "QP oracle needs a quadratic objective".into(),
            ))
        }
    };
    let n = p.n();
    if n > QP_ORACLE_LIMIT {
        return Err(Error::TooLarge {
            n,
            limit: QP_ORACLE_LIMIT,
        });
    }
    // primal feasibility is decided by the vertex enumeration
    if basic_feasible_solutions(p.a(), p.b(), c).is_empty() {
        return Err(Error::Infeasible);
    }

    let mut best: Option<(f64, DVector<f64>, DVector<f64>, DVector<f64>, u32)> = None;
    let mut consistent = 0usize;
    for pinned_mask in 0u32..(1u32 << n) {
        let free: Vec<usize> = (0..n).filter(|&j| pinned_mask & (1 << j) == 0).collect();
        let Some((x, y)) = solve_subproblem(p.a(), p.b(), c, q, &free) else {
            continue;
        };
        consistent += 1;
        if x.iter().any(|&v| v < -NONNEG_TOL) {
            continue;
        }
        let x = x.map(|v| v.max(0.0));
        let g = c + q * &x - p.a().transpose() * &y;
        let pinned_ok = (0..n)
            .filter(|&j| pinned_mask & (1 << j) != 0)
            .all(|j| g[j] >= -REDUCED_GRADIENT_TOL);
        if !pinned_ok {
            continue;
        }
        let value = c.dot(&x) + 0.5 * x.dot(&(q * &x));
        if best.as_ref().map_or(true, |b| value < b.0) {
            best = Some((value, x, y, g, pinned_mask));
        }
    }

    let Some((value, x, y, g, mask)) = best else {
        return Err(Error::NoOptimalCandidate(format!(
            "{consistent} of {} subproblems were consistent but none passed the sign checks",
            1u32 << n
        )));
    };
    let pinned: Vec<usize> = (0..n).filter(|&j| mask & (1 << j) != 0).collect();
    Ok(ReferenceSolution {
        x_star: x,
        objective_star: value,
        method: ReferenceMethod::ActiveSetEnumeration,
        certificate: format!("pinned {pinned:?}"),
        dual: Some((y, g)),
    })
}

/// Minimizes `cᵀx + xᵀQx/2` over `A_F x_F = b` with the other variables
/// at zero. Returns `None` when the KKT system is inconsistent.
fn solve_subproblem(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    c: &DVector<f64>,
    q: &DMatrix<f64>,
    free: &[usize],
) -> Option<(DVector<f64>, DVector<f64>)> {
    let (m, n) = a.shape();
    let k = free.len();
    let mut kkt = DMatrix::zeros(k + m, k + m);
    let mut rhs = DVector::zeros(k + m);
    for (ii, &i) in free.iter().enumerate() {
        for (jj, &j) in free.iter().enumerate() {
            kkt[(ii, jj)] = q[(i, j)];
        }
        for r in 0..m {
            kkt[(k + r, ii)] = a[(r, i)];
            kkt[(ii, k + r)] = a[(r, i)];
        }
        rhs[ii] = -c[i];
    }
    for r in 0..m {
        rhs[k + r] = b[r];
    }
    let svd = kkt.clone().svd(true, true);
    let tol = SINGULAR_RATIO * svd.singular_values.max().max(f64::MIN_POSITIVE);
    let sol = svd.solve(&rhs, tol).ok()?;
    let scale = 1.0 + rhs.norm() + kkt.amax() * sol.amax();
    if (&kkt * &sol - &rhs).norm() > 1e-9 * scale {
        return None;
    }
    let mut x = DVector::zeros(n);
    for (ii, &i) in free.iter().enumerate() {
        x[i] = sol[ii];
    }
    // stationarity reads Q x + c = Aᵀy, so y is minus the trailing block
    let y = -sol.rows(k, m).into_owned();
    Some((x, y))
}
