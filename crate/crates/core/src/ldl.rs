//! Dense symmetric indefinite `P K Pᵀ = L D Lᵀ` factorization with
//! Bunch-Kaufman partial pivoting (1×1 and 2×2 diagonal blocks).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Bunch-Kaufman pivot growth constant `(1 + √17)/8`.
const ALPHA: f64 = 0.640_388_203_202_208_4;

#[derive(Debug, Clone)]
pub struct LdlFactor {
    /// Strict lower part holds `L`; the diagonal and, inside 2×2 blocks,
    /// the first subdiagonal hold `D`.
    work: DMatrix<f64>,
    /// `(start, size)` of each diagonal block of `D`.
    blocks: Vec<(usize, usize)>,
    /// Row/column interchanges in the order they were applied.
    swaps: Vec<(usize, usize)>,
}

impl LdlFactor {
    pub fn factor(k: &DMatrix<f64>) -> Result<Self> {
        let n = k.nrows();
        if k.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "LDL factorization needs a square matrix, got {}x{}",
                n,
                k.ncols()
            )));
        }
        let mut a = k.clone();
        let mut blocks = Vec::new();
        let mut swaps = Vec::new();
        let mut col = 0;
        while col < n {
            let absakk = a[(col, col)].abs();
            let (imax, colmax) =
                (col + 1..n)
                    .map(|i| (i, a[(i, col)].abs()))
                    .fold(
                        (col, 0.0),
                        |best, cur| if cur.1 > best.1 { cur } else { best },
                    );
            if !(absakk.max(colmax) > 0.0) || !absakk.is_finite() || !colmax.is_finite() {
                return Err(Error::SingularKkt(f64::INFINITY));
            }

            let (pivot, step) = if absakk >= ALPHA * colmax {
                (col, 1)
            } else {
                let rowmax = (col..n)
                    .filter(|&j| j != imax)
                    .map(|j| a[(imax, j)].abs())
                    .fold(0.0, f64::max);
                if absakk * rowmax >= ALPHA * colmax * colmax {
                    (col, 1)
                } else if a[(imax, imax)].abs() >= ALPHA * rowmax {
                    (imax, 1)
                } else {
                    (imax, 2)
                }
            };

            let target = col + step - 1;
            if pivot != target {
                a.swap_rows(target, pivot);
                a.swap_columns(target, pivot);
            }
            swaps.push((target, pivot));

            if step == 1 {
                let d = a[(col, col)];
                let v: Vec<f64> = (col + 1..n).map(|i| a[(i, col)]).collect();
                for (jj, &vj) in v.iter().enumerate() {
                    let j = col + 1 + jj;
                    let s = vj / d;
                    for (ii, &vi) in v.iter().enumerate().skip(jj) {
                        let i = col + 1 + ii;
                        let updated = a[(i, j)] - vi * s;
                        a[(i, j)] = updated;
                        a[(j, i)] = updated;
                    }
                }
                for (ii, &vi) in v.iter().enumerate() {
                    a[(col + 1 + ii, col)] = vi / d;
                }
            } else {
                let d11 = a[(col, col)];
                let d21 = a[(col + 1, col)];
                let d22 = a[(col + 1, col + 1)];
                let det = d11 * d22 - d21 * d21;
                if !(det.abs() > 0.0) {
                    return Err(Error::SingularKkt(f64::INFINITY));
                }
                let rows: Vec<(f64, f64)> = (col + 2..n)
                    .map(|i| (a[(i, col)], a[(i, col + 1)]))
                    .collect();
                // l_i = v_i D⁻¹
                let ls: Vec<(f64, f64)> = rows
                    .iter()
                    .map(|&(v1, v2)| ((v1 * d22 - v2 * d21) / det, (v2 * d11 - v1 * d21) / det))
                    .collect();
                for (jj, &(v1, v2)) in rows.iter().enumerate() {
                    let j = col + 2 + jj;
                    for (ii, &(l1, l2)) in ls.iter().enumerate().skip(jj) {
                        let i = col + 2 + ii;
                        let updated = a[(i, j)] - (l1 * v1 + l2 * v2);
                        a[(i, j)] = updated;
                        a[(j, i)] = updated;
                    }
                }
                for (ii, &(l1, l2)) in ls.iter().enumerate() {
                    a[(col + 2 + ii, col)] = l1;
                    a[(col + 2 + ii, col + 1)] = l2;
                }
            }
            blocks.push((col, step));
            col += step;
        }
        Ok(LdlFactor {
            work: a,
            blocks,
            swaps,
        })
    }

    pub fn dim(&self) -> usize {
        self.work.nrows()
    }

    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let n = self.dim();
        assert_eq!(rhs.len(), n, "right-hand side length");
        let mut y = rhs.clone();
        for &(i, j) in &self.swaps {
            y.swap_rows(i, j);
        }
        // L y = P b
        for &(start, size) in &self.blocks {
            for j in start..start + size {
                let yj = y[j];
                if yj != 0.0 {
                    for i in start + size..n {
                        y[i] -= self.work[(i, j)] * yj;
                    }
                }
            }
        }
        // D
        for &(start, size) in &self.blocks {
            if size == 1 {
                y[start] /= self.work[(start, start)];
            } else {
                let d11 = self.work[(start, start)];
                let d21 = self.work[(start + 1, start)];
                let d22 = self.work[(start + 1, start + 1)];
                let det = d11 * d22 - d21 * d21;
                let (b1, b2) = (y[start], y[start + 1]);
                y[start] = (d22 * b1 - d21 * b2) / det;
                y[start + 1] = (d11 * b2 - d21 * b1) / det;
            }
        }
        // Lᵀ
        for &(start, size) in self.blocks.iter().rev() {
            for j in start..start + size {
                let mut acc = y[j];
                for i in start + size..n {
                    acc -= self.work[(i, j)] * y[i];
                }
                y[j] = acc;
            }
        }
        for &(i, j) in self.swaps.iter().rev() {
            y.swap_rows(i, j);
        }
        y
    }

    /// Multiplies the factors back out, `Pᵀ L D Lᵀ P`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut l = DMatrix::identity(n, n);
        let mut d = DMatrix::zeros(n, n);
        for &(start, size) in &self.blocks {
            for j in start..start + size {
                for i in start + size..n {
                    l[(i, j)] = self.work[(i, j)];
                }
            }
            d[(start, start)] = self.work[(start, start)];
            if size == 2 {
                let off = self.work[(start + 1, start)];
                d[(start + 1, start)] = off;
                d[(start, start + 1)] = off;
                d[(start + 1, start + 1)] = self.work[(start + 1, start + 1)];
            }
        }
        let mut k = &l * d * l.transpose();
        for &(i, j) in self.swaps.iter().rev() {
            k.swap_rows(i, j);
            k.swap_columns(i, j);
        }
        k
    }

    /// Number of 2×2 pivot blocks used.
    pub fn two_by_two_blocks(&self) -> usize {
        self.blocks.iter().filter(|b| b.1 == 2).count()
    }

    /// Estimate of `‖K⁻¹‖₁` (Hager/Higham), using that `K` is symmetric.
    pub fn inverse_norm1_estimate(&self) -> f64 {
        let n = self.dim();
        if n == 0 {
            return 0.0;
        }
        let mut x = DVector::from_element(n, 1.0 / n as f64);
        let mut est = 0.0f64;
        let mut last_j = usize::MAX;
        for iter in 0..5 {
            let y = self.solve(&x);
            let y_norm = y.lp_norm(1);
            if iter > 0 && y_norm <= est {
                est = est.max(y_norm);
                break;
            }
            est = y_norm;
            let xi = y.map(|v| if v >= 0.0 { 1.0 } else { -1.0 });
            let z = self.solve(&xi);
            let j = z.iamax();
            if iter > 0 && (z[j].abs() <= z.dot(&x) || j == last_j) {
                break;
            }
            last_j = j;
            x = DVector::zeros(n);
            x[j] = 1.0;
        }
        // alternating test vector catches cases the power iteration misses
        let alt = if n > 1 {
            DVector::from_fn(n, |i, _| {
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                sign * (1.0 + i as f64 / (n - 1) as f64)
            })
        } else {
            DVector::from_element(1, 1.0)
        };
        let alt_est = 2.0 * self.solve(&alt).lp_norm(1) / (3.0 * n as f64);
        est.max(alt_est)
    }
}

/// 1-norm (maximum absolute column sum).
pub fn norm1(k: &DMatrix<f64>) -> f64 {
    k.column_iter().map(|c| c.lp_norm(1)).fold(0.0, f64::max)
}
