//! Reference computations for tests. Nothing here shares code with the
//! `preisach` implementation paths it is used to check.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

/// Exact rank of an integer matrix (rows given as slices), by fraction-free
/// Gaussian elimination over arbitrary-precision integers.
pub fn exact_rank<R: AsRef<[i64]>>(rows: &[R]) -> usize {
    // duplicate rows never change the rank
    let distinct: BTreeSet<Vec<i64>> = rows.iter().map(|r| r.as_ref().to_vec()).collect();
    let mut a: Vec<Vec<BigInt>> = distinct
        .into_iter()
        .map(|r| r.into_iter().map(BigInt::from).collect())
        .collect();
    let nrows = a.len();
    let ncols = a.first().map_or(0, |r| r.len());
    let mut rank = 0;
    let mut prev = BigInt::one();
    for col in 0..ncols {
        if rank == nrows {
            break;
        }
        let Some(pivot) = (rank..nrows).find(|&r| !a[r][col].is_zero()) else {
            continue;
        };
        a.swap(rank, pivot);
        for r in rank + 1..nrows {
            for c in col + 1..ncols {
                let v = (&a[rank][col] * &a[r][c] - &a[r][col] * &a[rank][c]) / &prev;
                a[r][c] = v;
            }
            a[r][col] = BigInt::zero();
        }
        prev = a[rank][col].abs();
        if prev.is_zero() {
            prev = BigInt::one();
        }
        rank += 1;
    }
    rank
}

/// Sign matrix rows widened for [`exact_rank`].
pub fn widen(rows: impl IntoIterator<Item = Vec<i8>>) -> Vec<Vec<i64>> {
    rows.into_iter().map(|r| r.into_iter().map(i64::from).collect()).collect()
}

/// Minimises `f` over the box `[lo.0, hi.0] x [lo.1, hi.1]` by exhaustive
/// grid search, re-centring a shrinking grid on the best point until the
/// spacing drops below `resolution`.
pub fn grid_search_2d(
    f: impl Fn(f64, f64) -> f64,
    lo: (f64, f64),
    hi: (f64, f64),
    resolution: f64,
) -> (f64, f64, f64) {
    let steps = 200;
    let (mut lo, mut hi) = (lo, hi);
    let bounds = (lo, hi);
    let mut best = (lo.0, lo.1, f(lo.0, lo.1));
    loop {
        let hx = (hi.0 - lo.0) / steps as f64;
        let hy = (hi.1 - lo.1) / steps as f64;
        for a in 0..=steps {
            for b in 0..=steps {
                let (x, y) = (lo.0 + a as f64 * hx, lo.1 + b as f64 * hy);
                let v = f(x, y);
                if v < best.2 {
                    best = (x, y, v);
                }
            }
        }
        if hx.max(hy) < resolution {
            return best;
        }
        lo = ((best.0 - 4.0 * hx).max(bounds.0 .0), (best.1 - 4.0 * hy).max(bounds.0 .1));
        hi = ((best.0 + 4.0 * hx).min(bounds.1 .0), (best.1 + 4.0 * hy).min(bounds.1 .1));
    }
}

/// Central finite difference of `f` along `dir` at `x`.
pub fn directional_derivative(f: impl Fn(&[f64]) -> f64, x: &[f64], dir: &[f64], h: f64) -> f64 {
    let shift = |t: f64| x.iter().zip(dir).map(|(a, d)| a + t * d).collect::<Vec<_>>();
    (f(&shift(h)) - f(&shift(-h))) / (2.0 * h)
}
