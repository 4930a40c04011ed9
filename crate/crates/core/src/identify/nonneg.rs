//! Lawson-Hanson style active-set method for
//! `min 1/2 x^T G x - b^T x` subject to `x_j >= 0` on a subset of coordinates,
//! with `G` symmetric positive semidefinite (possibly singular). Subproblems on
//! the passive set are solved in minimum norm through the eigendecomposition
//! of the corresponding block of `G`.

use ndarray::{Array1, Array2, Axis};

use super::reduce_gram;
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone)]
pub(crate) struct NonnegSolution<T> {
    pub x: Array1<T>,
    pub kkt_residual: T,
}

fn subsolve<T: Real>(gram: &Array2<T>, rhs: &Array1<T>, passive: &[bool], svd_tol: T) -> Result<Array1<T>> {
    let n = rhs.len();
    let idx: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
    let mut out = Array1::zeros(n);
    if idx.is_empty() {
        return Ok(out);
    }
    let g = gram.select(Axis(0), &idx).select(Axis(1), &idx);
    let b = rhs.select(Axis(0), &idx);
    if g.iter().all(|v| *v == T::zero()) {
        return Ok(out);
    }
    let red = reduce_gram(&g, svd_tol)?;
    let mut z = red.apply_pseudo_inverse(&b);
    let r = &b - &g.dot(&z);
    z = z + red.apply_pseudo_inverse(&r);
    for (k, &j) in idx.iter().enumerate() {
        out[j] = z[k];
    }
    Ok(out)
}

/// KKT violation: stationarity on free and positive coordinates, sign
/// condition on coordinates held at zero.
pub(crate) fn kkt_residual<T: Real>(gram: &Array2<T>, rhs: &Array1<T>, x: &Array1<T>, constrained: &[bool]) -> T {
    let w = rhs - &gram.dot(x);
    let mut worst = T::zero();
    for j in 0..x.len() {
        let v = if constrained[j] {
            if x[j] < T::zero() {
                -x[j]
            } else if x[j] > T::zero() {
                w[j].abs()
            } else {
                w[j].max(T::zero())
            }
        } else {
            w[j].abs()
        };
        worst = worst.max(v);
    }
    worst
}

pub(crate) fn active_set<T: Real>(
    gram: &Array2<T>,
    rhs: &Array1<T>,
    constrained: &[bool],
    svd_tol: T,
) -> Result<NonnegSolution<T>> {
    let n = rhs.len();
    let scale = rhs.iter().fold(T::one(), |m, v| m.max(v.abs()));
    let tol_w = T::of(1e-12) * scale;
    let max_outer = 3 * n + 50;

    let mut passive: Vec<bool> = constrained.iter().map(|&c| !c).collect();
    let mut blocked = vec![false; n];
    let mut x = subsolve(gram, rhs, &passive, svd_tol)?;

    for _ in 0..max_outer {
        let w = rhs - &gram.dot(&x);
        let entering = (0..n)
            .filter(|&j| constrained[j] && !passive[j] && !blocked[j])
            .max_by(|&a, &b| w[a].partial_cmp(&w[b]).unwrap_or(std::cmp::Ordering::Equal));
        let j = match entering {
            Some(j) if w[j] > tol_w => j,
            _ => {
                let kkt = kkt_residual(gram, rhs, &x, constrained);
                return Ok(NonnegSolution { x, kkt_residual: kkt });
            }
        };
        passive[j] = true;

        for inner in 0..=n {
            let z = subsolve(gram, rhs, &passive, svd_tol)?;
            let infeasible: Vec<usize> = (0..n)
                .filter(|&k| passive[k] && constrained[k] && z[k] <= T::zero())
                .collect();
            if infeasible.is_empty() {
                x = z;
                blocked.iter_mut().for_each(|b| *b = false);
                break;
            }
            if inner == 0 && infeasible == [j] {
                // entering column gives no feasible descent here
                passive[j] = false;
                blocked[j] = true;
                break;
            }
            let alpha = infeasible
                .iter()
                .map(|&k| x[k] / (x[k] - z[k]))
                .fold(T::infinity(), |a, b| a.min(b));
            x = &x + &((&z - &x) * alpha);
            for k in 0..n {
                if passive[k] && constrained[k] && x[k] <= T::epsilon() * scale {
                    passive[k] = false;
                    x[k] = T::zero();
                }
            }
        }
    }
    let kkt = kkt_residual(gram, rhs, &x, constrained);
    Err(Error::NonConvergence {
        iterations: max_outer,
        kkt_residual: kkt.as_f64(),
        best: x.iter().map(|v| v.as_f64()).collect(),
    })
}
