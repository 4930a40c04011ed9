//! Kernel identification.
//!
//! Every time step contributes one sign row `Delta_i`, so the measured
//! moments satisfy `Y ~ Delta X` with `X` the cell integrals plus `c`. The
//! least-squares problem `min 1/2 |Delta X - Y|^2` is usually rank deficient
//! (limited excitation, and the two triangles of an off-diagonal grid square
//! always switch together), so it is solved in the range of `Delta^T Delta`:
//! with `Delta^T Delta = V S V^T` and `V_hat`, `S_hat` its nonzero part,
//! `X = V_hat Z` and
//!
//! ```text
//! g(Z) = 1/2 Z^T S_hat Z - (Y^T Delta V_hat) Z,    g(Z) = f(V_hat Z) - 1/2 |Y|^2
//! ```
//!
//! whose minimiser `Z* = S_hat^-1 V_hat^T Delta^T Y` gives the minimum-norm
//! least-squares `X* = V_hat Z*`.

mod eigen;
mod nonneg;

use ndarray::{Array1, Array2, ArrayView1, Axis};

use crate::error::{Error, Result};
use crate::operator::KernelVector;
use crate::plane::{Level, MemoryCurve, PreisachGrid};
use crate::scalar::Real;

pub use eigen::{symmetric_eigen, SymmetricEigen};

pub const DEFAULT_SVD_TOL: f64 = 1e-10;

/// Sign matrix `Delta` (`T x n`, entries `+-1`, last column `-1`) and measured moments `Y`.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentificationSystem<T> {
    grid: PreisachGrid<T>,
    delta: Array2<i8>,
    y: Array1<T>,
}

/// Replays `inputs` through the memory staircase and stacks one sign row per step.
pub fn assemble<T: Real>(
    grid: &PreisachGrid<T>,
    inputs: &[Level],
    moments: &[T],
) -> Result<IdentificationSystem<T>> {
    if inputs.len() != moments.len() {
        return Err(Error::LengthMismatch {
            what: "inputs vs moments",
            left: inputs.len(),
            right: moments.len(),
        });
    }
    if inputs.is_empty() {
        return Err(Error::Invalid("identification needs at least one sample".into()));
    }
    if let Some(i) = moments.iter().position(|v| !v.is_finite()) {
        return Err(Error::Data(format!("moment sample {i} is not finite")));
    }
    if let Some(bad) = inputs.iter().find(|l| l.0 > grid.m()) {
        return Err(Error::Range {
            value: grid.value(*bad).as_f64(),
            kmax: grid.kmax().as_f64(),
        });
    }
    let n = grid.unknowns();
    let mut delta = Array2::<i8>::zeros((inputs.len(), n));
    let mut curve = MemoryCurve::virgin();
    for (mut row, &level) in delta.rows_mut().into_iter().zip(inputs) {
        curve.update(level);
        for (dst, &src) in row.iter_mut().zip(curve.sign_row(grid).as_slice()) {
            *dst = src;
        }
    }
    Ok(IdentificationSystem {
        grid: *grid,
        delta,
        y: Array1::from(moments.to_vec()),
    })
}

/// [`assemble`] for raw curvature values that must already lie on the grid.
pub fn assemble_values<T: Real>(
    grid: &PreisachGrid<T>,
    inputs: &[T],
    moments: &[T],
) -> Result<IdentificationSystem<T>> {
    let levels = inputs.iter().map(|&v| grid.level_of(v)).collect::<Result<Vec<_>>>()?;
    assemble(grid, &levels, moments)
}

impl<T: Real> IdentificationSystem<T> {
    /// Builds a system from an explicit sign matrix, checking its shape and alphabet.
    pub fn from_parts(grid: &PreisachGrid<T>, delta: Array2<i8>, y: Array1<T>) -> Result<Self> {
        if delta.ncols() != grid.unknowns() {
            return Err(Error::LengthMismatch {
                what: "sign matrix columns vs grid unknowns",
                left: delta.ncols(),
                right: grid.unknowns(),
            });
        }
        if delta.nrows() != y.len() {
            return Err(Error::LengthMismatch {
                what: "sign matrix rows vs moments",
                left: delta.nrows(),
                right: y.len(),
            });
        }
        if delta.nrows() == 0 {
            return Err(Error::Invalid("identification needs at least one sample".into()));
        }
        if delta.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::Invalid("sign matrix entries must be +-1".into()));
        }
        if delta.column(delta.ncols() - 1).iter().any(|&s| s != -1) {
            return Err(Error::Invalid("last sign matrix column must be all -1".into()));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("moments must be finite".into()));
        }
        Ok(IdentificationSystem { grid: *grid, delta, y })
    }

    pub fn grid(&self) -> &PreisachGrid<T> {
        &self.grid
    }

    pub fn delta(&self) -> &Array2<i8> {
        &self.delta
    }

    pub fn y(&self) -> &Array1<T> {
        &self.y
    }

    pub fn samples(&self) -> usize {
        self.delta.nrows()
    }

    pub fn unknowns(&self) -> usize {
        self.delta.ncols()
    }

    pub fn delta_matrix(&self) -> Array2<T> {
        self.delta.mapv(|s| if s > 0 { T::one() } else { -T::one() })
    }

    /// `Delta^T Delta`, accumulated exactly in integers.
    pub fn gram(&self) -> Array2<T> {
        let n = self.unknowns();
        let mut acc = Array2::<i64>::zeros((n, n));
        for row in self.delta.rows() {
            for (p, &sp) in row.iter().enumerate() {
                let sp = sp as i64;
                let mut acc_row = acc.row_mut(p);
                for (q, &sq) in row.iter().enumerate().skip(p) {
                    acc_row[q] += sp * sq as i64;
                }
            }
        }
        Array2::from_shape_fn((n, n), |(p, q)| {
            let v = if p <= q { acc[[p, q]] } else { acc[[q, p]] };
            T::of(v as f64)
        })
    }

    /// `Delta^T Y`.
    pub fn rhs(&self) -> Array1<T> {
        let mut out = Array1::zeros(self.unknowns());
        for (row, &y) in self.delta.rows().into_iter().zip(&self.y) {
            for (o, &s) in out.iter_mut().zip(row) {
                *o = if s > 0 { *o + y } else { *o - y };
            }
        }
        out
    }

    /// `Delta X`.
    pub fn predict(&self, x: ArrayView1<T>) -> Array1<T> {
        Array1::from_iter(self.delta.rows().into_iter().map(|row| {
            row.iter()
                .zip(x)
                .fold(T::zero(), |acc, (&s, &v)| if s > 0 { acc + v } else { acc - v })
        }))
    }

    /// `f(X) = 1/2 |Delta X - Y|^2`.
    pub fn least_squares_objective(&self, x: ArrayView1<T>) -> T {
        let half = T::of(0.5);
        (&self.predict(x) - &self.y).iter().map(|&r| half * r * r).sum()
    }

    fn select_rows(&self, rows: &[usize]) -> Self {
        IdentificationSystem {
            grid: self.grid,
            delta: self.delta.select(Axis(0), rows),
            y: self.y.select(Axis(0), rows),
        }
    }
}

/// Nonzero part of the eigen/singular decomposition of `Delta^T Delta`.
#[derive(Debug, Clone)]
pub struct ReducedSystem<T> {
    /// Retained singular values, positive and nonincreasing.
    pub s_hat: Array1<T>,
    /// `n x q`, orthonormal columns.
    pub v_hat: Array2<T>,
    pub svd_tol: T,
}

impl<T: Real> ReducedSystem<T> {
    /// Numerical rank `q`.
    pub fn rank(&self) -> usize {
        self.s_hat.len()
    }

    /// `g(Z) = 1/2 Z^T S_hat Z - (Y^T Delta V_hat) Z`.
    pub fn objective(&self, sys: &IdentificationSystem<T>, z: ArrayView1<T>) -> T {
        let half = T::of(0.5);
        let quad: T = z.iter().zip(&self.s_hat).map(|(&zi, &si)| half * si * zi * zi).sum();
        let lin = self.v_hat.t().dot(&sys.rhs());
        quad - lin.dot(&z)
    }

    /// `V_hat S_hat^-1 V_hat^T b`: the minimum-norm solution of `(Delta^T Delta) x = b` on the range.
    fn apply_pseudo_inverse(&self, b: &Array1<T>) -> Array1<T> {
        let z = self.v_hat.t().dot(b) / &self.s_hat;
        self.v_hat.dot(&z)
    }
}

/// Eigendecomposes `Delta^T Delta` and keeps singular values above
/// `svd_tol * sigma_max`.
pub fn reduce<T: Real>(sys: &IdentificationSystem<T>, svd_tol: T) -> Result<ReducedSystem<T>> {
    reduce_gram(&sys.gram(), svd_tol)
}

pub(crate) fn reduce_gram<T: Real>(gram: &Array2<T>, svd_tol: T) -> Result<ReducedSystem<T>> {
    if !(svd_tol > T::zero() && svd_tol < T::one()) {
        return Err(Error::Invalid(format!("svd_tol must lie in (0, 1), got {svd_tol}")));
    }
    let eig = symmetric_eigen(gram)?;
    let sigma_max = eig.values.first().copied().unwrap_or(T::zero());
    if sigma_max.is_nan() || sigma_max <= T::zero() {
        return Err(Error::Internal("sign matrix is numerically zero".into()));
    }
    let cutoff = svd_tol * sigma_max;
    let q = eig.values.iter().take_while(|&&s| s > cutoff).count();
    Ok(ReducedSystem {
        s_hat: eig.values.slice(ndarray::s![..q]).to_owned(),
        v_hat: eig.vectors.slice(ndarray::s![.., ..q]).to_owned(),
        svd_tol,
    })
}

#[derive(Debug, Clone)]
pub struct FitReport<T> {
    pub grid: PreisachGrid<T>,
    pub kernel: KernelVector<T>,
    /// Reduced coordinates, `kernel = V_hat z`. Empty for the constrained solve.
    pub z: Vec<T>,
    pub rank: usize,
    pub svd_tol: T,
    pub residual_rms: T,
    /// `1/T sum 1/2 (M_i - Delta_i X)^2`.
    pub objective: T,
    pub kkt_residual: T,
    pub predictions: Vec<T>,
    pub samples: usize,
}

impl<T: Real> FitReport<T> {
    fn build(
        sys: &IdentificationSystem<T>,
        x: Array1<T>,
        z: Vec<T>,
        rank: usize,
        svd_tol: T,
        kkt_residual: T,
    ) -> Result<Self> {
        let predictions = sys.predict(x.view());
        let t = T::of_usize(sys.samples());
        let sq: T = (&predictions - &sys.y).iter().map(|&r| r * r).sum();
        let kernel = KernelVector::new(&sys.grid, x.to_vec())?;
        Ok(FitReport {
            grid: sys.grid,
            kernel,
            z,
            rank,
            svd_tol,
            residual_rms: (sq / t).sqrt(),
            objective: sq / (T::of(2.0) * t),
            kkt_residual,
            predictions: predictions.to_vec(),
            samples: sys.samples(),
        })
    }
}

/// Minimum-norm least-squares kernel.
pub fn solve<T: Real>(sys: &IdentificationSystem<T>, svd_tol: T) -> Result<FitReport<T>> {
    let gram = sys.gram();
    let reduced = reduce_gram(&gram, svd_tol)?;
    let rhs = sys.rhs();
    let mut x = reduced.apply_pseudo_inverse(&rhs);
    // one step of iterative refinement against the exact integer Gram matrix
    let r = &rhs - &gram.dot(&x);
    x = x + reduced.apply_pseudo_inverse(&r);
    let z = reduced.v_hat.t().dot(&x);
    let grad = reduced.v_hat.t().dot(&(&rhs - &gram.dot(&x)));
    let kkt = grad.iter().fold(T::zero(), |m, g| m.max(g.abs()));
    FitReport::build(sys, x, z.to_vec(), reduced.rank(), svd_tol, kkt)
}

/// Least squares with every cell integral constrained to be nonnegative; `c` stays free.
///
/// When the unconstrained minimum-norm solution is already feasible it is
/// returned unchanged.
pub fn solve_nonneg<T: Real>(sys: &IdentificationSystem<T>, svd_tol: T) -> Result<FitReport<T>> {
    let gram = sys.gram();
    let rhs = sys.rhs();
    let n = sys.unknowns();
    let mut constrained = vec![true; n];
    constrained[n - 1] = false;
    let free = solve(sys, svd_tol)?;
    if free.kernel.cells().iter().all(|&v| v >= T::zero()) {
        // constraints inactive: keep the minimum-norm minimiser
        return Ok(free);
    }
    let sol = nonneg::active_set(&gram, &rhs, &constrained, svd_tol)?;
    let rank = free.rank;
    FitReport::build(sys, sol.x, Vec::new(), rank, svd_tol, sol.kkt_residual)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldResult<T> {
    /// Held-out sample range `start..end`.
    pub start: usize,
    pub end: usize,
    pub train_rms: T,
    pub heldout_rms: T,
}

/// Contiguous-block cross-validation: fold `k` holds out samples
/// `k T / folds .. (k + 1) T / folds`. Sign rows always come from the
/// full history, so held-out blocks keep their true memory state.
pub fn cross_validate<T: Real>(
    sys: &IdentificationSystem<T>,
    folds: usize,
    svd_tol: T,
) -> Result<Vec<FoldResult<T>>> {
    let t = sys.samples();
    if folds < 2 {
        return Err(Error::Invalid(format!("cross-validation needs at least 2 folds, got {folds}")));
    }
    if folds > t {
        return Err(Error::Invalid(format!("{folds} folds requested for {t} samples")));
    }
    (0..folds)
        .map(|k| {
            let (start, end) = (k * t / folds, (k + 1) * t / folds);
            let train_rows: Vec<usize> = (0..start).chain(end..t).collect();
            let test_rows: Vec<usize> = (start..end).collect();
            let fit = solve(&sys.select_rows(&train_rows), svd_tol)?;
            let held = sys.select_rows(&test_rows);
            let pred = held.predict(fit.kernel.as_slice().into());
            let sq: T = (&pred - &held.y).iter().map(|&r| r * r).sum();
            Ok(FoldResult {
                start,
                end,
                train_rms: fit.residual_rms,
                heldout_rms: (sq / T::of_usize(test_rows.len())).sqrt(),
            })
        })
        .collect()
}
