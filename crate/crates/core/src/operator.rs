//! Forward Preisach evaluation.
//!
//! [`eval_discrete`] is the production path: it walks the memory staircase
//! and dots each sign row with the kernel vector. [`eval_relay_quadrature`]
//! integrates the relay superposition directly, one relay per quadrature
//! node, and serves as its reference.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::plane::{CellKind, Level, MemoryCurve, PreisachGrid};
use crate::relay::{RelayConfig, RelayState};
use crate::scalar::Real;

/// Cell integrals `x^1..x^{n-1}` of the kernel followed by the constant `c` on `D`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelVector<T> {
    values: Vec<T>,
}

impl<T: Real> KernelVector<T> {
    pub fn new(grid: &PreisachGrid<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.unknowns() {
            return Err(Error::LengthMismatch {
                what: "kernel vector vs grid unknowns",
                left: values.len(),
                right: grid.unknowns(),
            });
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("kernel entry {bad} is not finite")));
        }
        Ok(KernelVector { values })
    }

    pub fn from_parts(grid: &PreisachGrid<T>, cells: Vec<T>, c: T) -> Result<Self> {
        let mut values = cells;
        values.push(c);
        Self::new(grid, values)
    }

    pub fn zeros(grid: &PreisachGrid<T>) -> Self {
        KernelVector {
            values: vec![T::zero(); grid.unknowns()],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn cells(&self) -> &[T] {
        &self.values[..self.values.len() - 1]
    }

    /// Constant `c` on the never-visited region.
    pub fn c(&self) -> T {
        self.values[self.values.len() - 1]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<T> {
        self.values
    }

    /// `sum |x^m| + |c|`, a bound on any output magnitude.
    pub fn output_bound(&self) -> T {
        self.values.iter().map(|v| v.abs()).sum()
    }

    fn check_grid(&self, grid: &PreisachGrid<T>) -> Result<()> {
        if self.values.len() != grid.unknowns() {
            return Err(Error::LengthMismatch {
                what: "kernel vector vs grid unknowns",
                left: self.values.len(),
                right: grid.unknowns(),
            });
        }
        Ok(())
    }
}

/// Output for each input level, starting from the virgin state.
pub fn eval_discrete<T: Real>(
    grid: &PreisachGrid<T>,
    kernel: &KernelVector<T>,
    inputs: &[Level],
) -> Result<Vec<T>> {
    kernel.check_grid(grid)?;
    if let Some(bad) = inputs.iter().find(|l| l.0 > grid.m()) {
        return Err(Error::Range {
            value: grid.value(*bad).as_f64(),
            kmax: grid.kmax().as_f64(),
        });
    }
    let mut curve = MemoryCurve::virgin();
    Ok(inputs
        .iter()
        .map(|&l| {
            curve.update(l);
            curve.sign_row(grid).dot(kernel.as_slice())
        })
        .collect())
}

/// [`eval_discrete`] for raw values that must already lie on the grid.
pub fn eval_discrete_values<T: Real>(
    grid: &PreisachGrid<T>,
    kernel: &KernelVector<T>,
    inputs: &[T],
) -> Result<Vec<T>> {
    let levels = inputs.iter().map(|&v| grid.level_of(v)).collect::<Result<Vec<_>>>()?;
    eval_discrete(grid, kernel, &levels)
}

/// Kernel density `omega(r, s)` over the truncated plane `[0, kmax]^2`.
pub trait KernelField<T>: Sync {
    fn density(&self, r: T, s: T) -> T;
}

impl<T, F> KernelField<T> for F
where
    F: Fn(T, T) -> T + Sync,
{
    fn density(&self, r: T, s: T) -> T {
        self(r, s)
    }
}

/// Density that is constant on every grid cell (integrating to `x^m`) and
/// on `D` (integrating to `c`).
#[derive(Debug, Clone)]
pub struct PiecewiseConstantField<T> {
    grid: PreisachGrid<T>,
    kernel: KernelVector<T>,
}

impl<T: Real> PiecewiseConstantField<T> {
    pub fn new(grid: PreisachGrid<T>, kernel: KernelVector<T>) -> Result<Self> {
        kernel.check_grid(&grid)?;
        Ok(PiecewiseConstantField { grid, kernel })
    }

    /// Index of the cell containing an interior point of the reachable triangle.
    fn locate(&self, r: T, s: T) -> Option<usize> {
        let (a1, a2) = (s - r, s + r);
        let kmax = self.grid.kmax();
        if r < T::zero() || a1 < T::zero() || a2 > kmax {
            return None;
        }
        let d = self.grid.d();
        let top = self.grid.m() - 1;
        let i = (a1 / d).floor().to_u32().unwrap_or(0).min(top);
        let j = (a2 / d).floor().to_u32().unwrap_or(0).min(top).max(i);
        let kind = if i == j {
            CellKind::Diagonal
        } else if a2 - a1 > T::of((j - i) as f64) * d {
            CellKind::Wide
        } else {
            CellKind::Narrow
        };
        let (i, j) = (i as usize, j as usize);
        Some(match kind {
            CellKind::Diagonal => j * j + 2 * j,
            CellKind::Wide => j * j + 2 * i,
            CellKind::Narrow => j * j + 2 * i + 1,
        })
    }
}

impl<T: Real> KernelField<T> for PiecewiseConstantField<T> {
    fn density(&self, r: T, s: T) -> T {
        let kmax = self.grid.kmax();
        if r < T::zero() || s < T::zero() || r > kmax || s > kmax {
            return T::zero();
        }
        match self.locate(r, s) {
            Some(idx) => {
                let area = self.grid.d() * self.grid.d() / T::of(4.0);
                self.kernel.as_slice()[idx] / area
            }
            None => self.kernel.c() / self.grid.d_region_area(),
        }
    }
}

/// Density tabulated at the centres of an `n x n` lattice over
/// `[0, kmax]^2`; looked up by nearest node, zero outside.
#[derive(Debug, Clone)]
pub struct LatticeField<T> {
    kmax: T,
    n: usize,
    values: Vec<T>,
}

impl<T: Real> LatticeField<T> {
    /// `values[a * n + b]` is the density at `r = (a + 1/2) h`, `s = (b + 1/2) h`, `h = kmax / n`.
    pub fn new(kmax: T, n: usize, values: Vec<T>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Invalid("lattice must have at least one node".into()));
        }
        if values.len() != n * n {
            return Err(Error::LengthMismatch {
                what: "lattice values vs n^2",
                left: values.len(),
                right: n * n,
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("lattice density is not finite".into()));
        }
        Ok(LatticeField { kmax, n, values })
    }

    /// Samples `field` at the lattice nodes.
    pub fn sample(kmax: T, n: usize, field: &impl KernelField<T>) -> Result<Self> {
        let h = kmax / T::of_usize(n.max(1));
        let half = T::of(0.5);
        let values = (0..n * n)
            .map(|k| {
                let (a, b) = (k / n, k % n);
                field.density((T::of_usize(a) + half) * h, (T::of_usize(b) + half) * h)
            })
            .collect();
        Self::new(kmax, n, values)
    }
}

impl<T: Real> KernelField<T> for LatticeField<T> {
    fn density(&self, r: T, s: T) -> T {
        if r < T::zero() || s < T::zero() || r > self.kmax || s > self.kmax {
            return T::zero();
        }
        let h = self.kmax / T::of_usize(self.n);
        let last = self.n - 1;
        let a = (r / h).floor().to_usize().unwrap_or(0).min(last);
        let b = (s / h).floor().to_usize().unwrap_or(0).min(last);
        self.values[a * self.n + b]
    }
}

struct Node<T> {
    weight: T,
    relay: Option<RelayConfig<T>>,
}

/// Relay-superposition quadrature of the Preisach integral.
///
/// Each grid cell and each of the three triangles of `D` is cut into
/// `nodes_per_edge^2` congruent sub-triangles; every sub-triangle centroid
/// carries one relay `R_{s-r, s+r}` started in the down state, weighted by
/// `omega * area`. Centroids never sit on a grid line, so no relay is
/// ambiguous. Relays in `D` are held down: the truncated model treats that
/// region as never switched.
pub fn eval_relay_quadrature<T: Real>(
    field: &impl KernelField<T>,
    grid: &PreisachGrid<T>,
    inputs: &[T],
    nodes_per_edge: usize,
) -> Result<Vec<T>> {
    if nodes_per_edge == 0 {
        return Err(Error::Invalid("quadrature needs at least one node per edge".into()));
    }
    if let Some(bad) = inputs.iter().find(|v| !v.is_finite()) {
        return Err(Error::Data(format!("non-finite input {bad}")));
    }
    let p2 = T::of_usize(nodes_per_edge * nodes_per_edge);
    let mut nodes = Vec::new();
    for cell in grid.cells() {
        let tri = cell.triangle(grid);
        let w = tri.area() / p2;
        for (r, s) in tri.subdivision_centroids(nodes_per_edge) {
            nodes.push(Node {
                weight: field.density(r, s) * w,
                relay: Some(RelayConfig::new(s - r, s + r, RelayState::Down)?),
            });
        }
    }
    for tri in grid.d_region_triangles() {
        let w = tri.area() / p2;
        for (r, s) in tri.subdivision_centroids(nodes_per_edge) {
            nodes.push(Node {
                weight: field.density(r, s) * w,
                relay: None,
            });
        }
    }

    let t = inputs.len();
    Ok(nodes
        .par_iter()
        .map(|node| {
            let mut out = vec![T::zero(); t];
            match &node.relay {
                Some(relay) => {
                    let mut state = relay.initial();
                    for (o, &v) in out.iter_mut().zip(inputs) {
                        state = relay.step_unchecked(state, v);
                        *o = state.value::<T>() * node.weight;
                    }
                }
                None => out.fill(-node.weight),
            }
            out
        })
        .reduce(
            || vec![T::zero(); t],
            |mut acc, part| {
                for (a, p) in acc.iter_mut().zip(part) {
                    *a = *a + p;
                }
                acc
            },
        ))
}

/// Level-by-level input program through `turning` (one sample per grid
/// step). A zero-length ramp repeats its endpoint once.
pub fn ramp_levels(turning: &[Level]) -> Vec<Level> {
    let Some(&first) = turning.first() else {
        return Vec::new();
    };
    let mut out = vec![first];
    for w in turning.windows(2) {
        let (from, to) = (w[0].0, w[1].0);
        if from == to {
            out.push(w[1]);
        } else if to > from {
            out.extend((from + 1..=to).map(Level));
        } else {
            out.extend((to..from).rev().map(Level));
        }
    }
    out
}

/// `(kappa, moment)` trace along ramps through `turning_points`.
pub fn hysteresis_loop<T: Real>(
    grid: &PreisachGrid<T>,
    kernel: &KernelVector<T>,
    turning_points: &[T],
) -> Result<Vec<(T, T)>> {
    let turning = turning_points
        .iter()
        .map(|&v| grid.quantize(v))
        .collect::<Result<Vec<_>>>()?;
    let levels = ramp_levels(&turning);
    let moments = eval_discrete(grid, kernel, &levels)?;
    Ok(levels.iter().map(|&l| grid.value(l)).zip(moments).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(d: f64, m: u32) -> PreisachGrid<f64> {
        PreisachGrid::new(d, m).unwrap()
    }

    #[test]
    fn zero_kernel_gives_zero() {
        let g = grid(0.25, 4);
        let out = eval_discrete_values(&g, &KernelVector::zeros(&g), &[0.0, 1.0, 0.5, 0.75]).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
        let field = |_: f64, _: f64| 0.0;
        let q = eval_relay_quadrature(&field, &g, &[0.0, 1.0, 0.5], 2).unwrap();
        assert!(q.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn monotone_ramp_on_two_level_grid() {
        let g = grid(0.5, 2);
        let k = KernelVector::new(&g, vec![1.0, 1.0, 1.0, 1.0, 0.0]).unwrap();
        let out = eval_discrete_values(&g, &k, &[0.0, 0.5, 1.0]).unwrap();
        assert_eq!(out, vec![-4.0, -2.0, 4.0]);
    }

    #[test]
    fn kernel_length_checked() {
        let g = grid(0.5, 2);
        assert!(KernelVector::new(&g, vec![0.0; 4]).is_err());
        assert!(KernelVector::new(&g, vec![0.0, 0.0, f64::NAN, 0.0, 0.0]).is_err());
        let other = KernelVector::zeros(&grid(0.5, 3));
        assert!(eval_discrete(&g, &other, &[Level(0)]).is_err());
        assert!(eval_discrete(&g, &KernelVector::zeros(&g), &[Level(3)]).is_err());
    }

    #[test]
    fn quadrature_rejects_empty_lattice() {
        let g = grid(0.5, 2);
        let field = |_: f64, _: f64| 1.0;
        assert!(eval_relay_quadrature(&field, &g, &[0.0], 0).is_err());
    }

    #[test]
    fn saturation_output() {
        let g = grid(0.5, 2);
        let k = KernelVector::new(&g, vec![0.5, 1.0, 2.0, 0.25, 3.0]).unwrap();
        let sat = *eval_discrete(&g, &k, &[Level(2)]).unwrap().last().unwrap();
        assert_eq!(sat, 0.5 + 1.0 + 2.0 + 0.25 - 3.0);
        let field = PiecewiseConstantField::new(g, k).unwrap();
        let q = eval_relay_quadrature(&field, &g, &[1.0], 3).unwrap();
        assert!((q[0] - sat).abs() < 1e-12);
    }

    #[test]
    fn piecewise_field_integrates_to_kernel() {
        let g = grid(0.2, 3);
        let vals: Vec<f64> = (0..10).map(|k| k as f64 + 0.5).collect();
        let k = KernelVector::new(&g, vals.clone()).unwrap();
        let field = PiecewiseConstantField::new(g, k).unwrap();
        for cell in g.cells() {
            let t = cell.triangle(&g);
            let (r, s) = t.centroid();
            assert!((field.density(r, s) * t.area() - vals[cell.index]).abs() < 1e-12);
        }
        let d_mass: f64 = g
            .d_region_triangles()
            .iter()
            .map(|t| {
                let (r, s) = t.centroid();
                field.density(r, s) * t.area()
            })
            .sum();
        assert!((d_mass - 9.5).abs() < 1e-12);
    }

    #[test]
    fn lattice_field_lookup() {
        let field = LatticeField::new(1.0, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(field.density(0.1, 0.1), 1.0);
        assert_eq!(field.density(0.1, 0.9), 2.0);
        assert_eq!(field.density(0.9, 0.1), 3.0);
        assert_eq!(field.density(1.0, 1.0), 4.0);
        assert_eq!(field.density(1.5, 0.5), 0.0);
        assert!(LatticeField::new(1.0, 2, vec![1.0; 3]).is_err());
        let resampled = LatticeField::sample(1.0, 2, &field).unwrap();
        assert_eq!(resampled.density(0.9, 0.9), 4.0);
    }

    #[test]
    fn ramps() {
        let l = |v: &[u32]| v.iter().map(|&x| Level(x)).collect::<Vec<_>>();
        assert_eq!(ramp_levels(&l(&[0, 3, 1])), l(&[0, 1, 2, 3, 2, 1]));
        assert_eq!(ramp_levels(&l(&[0, 0])), l(&[0, 0]));
        assert!(ramp_levels(&[]).is_empty());
    }

    #[test]
    fn loop_shapes() {
        let g = grid(0.25, 4);
        let k = KernelVector::new(&g, (0..17).map(|i| (i % 5) as f64 * 0.1).collect()).unwrap();
        let ramp = hysteresis_loop(&g, &k, &[0.0, 1.0]).unwrap();
        assert_eq!(ramp.len(), 5);
        assert!(ramp.windows(2).all(|w| w[1].1 >= w[0].1));

        let degenerate = hysteresis_loop(&g, &k, &[0.0, 0.0]).unwrap();
        assert_eq!(degenerate.len(), 2);
        assert_eq!(degenerate[0], degenerate[1]);

        let cycles = hysteresis_loop(&g, &k, &[0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0]).unwrap();
        let per = 8;
        assert_eq!(cycles[1..1 + per], cycles[1 + per..1 + 2 * per]);
        assert!(hysteresis_loop(&g, &k, &[0.0, 1.5]).is_err());
    }

    #[test]
    fn f32_eval() {
        let g = PreisachGrid::<f32>::new(0.5, 2).unwrap();
        let k = KernelVector::new(&g, vec![1.0f32, 1.0, 1.0, 1.0, 0.0]).unwrap();
        assert_eq!(eval_discrete_values(&g, &k, &[0.0f32, 0.5, 1.0]).unwrap(), vec![-4.0f32, -2.0, 4.0]);
    }

    fn case() -> impl Strategy<Value = (u32, Vec<u32>, Vec<f64>)> {
        (1u32..=5).prop_flat_map(|m| {
            let n = (m * m + 1) as usize;
            (
                Just(m),
                prop::collection::vec(0..=m, 1..30),
                prop::collection::vec(-1.0f64..1.0, n),
            )
        })
    }

    proptest! {
        #[test]
        fn causal_and_bounded((m, hist, x) in case(), cut in 0usize..30) {
            let g = grid(1.0, m);
            let k = KernelVector::new(&g, x).unwrap();
            let levels: Vec<Level> = hist.iter().map(|&l| Level(l)).collect();
            let full = eval_discrete(&g, &k, &levels).unwrap();
            let cut = cut.min(levels.len());
            let head = eval_discrete(&g, &k, &levels[..cut]).unwrap();
            prop_assert_eq!(&full[..cut], head.as_slice());
            let bound = k.output_bound() + 1e-12;
            prop_assert!(full.iter().all(|v| v.abs() <= bound));
        }

        #[test]
        fn repeated_samples_change_nothing((m, hist, x) in case()) {
            let g = grid(1.0, m);
            let k = KernelVector::new(&g, x).unwrap();
            let levels: Vec<Level> = hist.iter().map(|&l| Level(l)).collect();
            let doubled: Vec<Level> = levels.iter().flat_map(|&l| [l, l]).collect();
            let a = eval_discrete(&g, &k, &levels).unwrap();
            let b = eval_discrete(&g, &k, &doubled).unwrap();
            for (i, v) in a.iter().enumerate() {
                prop_assert_eq!(*v, b[2 * i]);
                prop_assert_eq!(*v, b[2 * i + 1]);
            }
        }

        #[test]
        fn minor_loops_are_congruent(
            m in 5u32..=6,
            tops in (0u32..=1, 0u32..=1),
            bottoms in (0u32..=1, 0u32..=1),
            x in prop::collection::vec(-1.0f64..1.0, 37),
        ) {
            // Same reversal pair (lo, hi) nested inside two different dominant histories.
            let g = grid(1.0, m);
            let k = KernelVector::new(&g, x[..(m * m + 1) as usize].to_vec()).unwrap();
            let (lo, hi) = (2u32, m - 2);
            let run = |top: u32, bottom: u32| {
                let mut levels = vec![Level(m - top), Level(bottom), Level(hi), Level(lo)];
                let start = levels.len() - 1;
                levels.extend(ramp_levels(&[Level(lo), Level(hi), Level(lo)]).into_iter().skip(1));
                let out = eval_discrete(&g, &k, &levels).unwrap();
                out[start..].iter().map(|v| v - out[start]).collect::<Vec<f64>>()
            };
            let a = run(tops.0, bottoms.0);
            let b = run(tops.1, bottoms.1);
            for (u, v) in a.iter().zip(&b) {
                prop_assert!((u - v).abs() < 1e-12);
            }
        }
    }
}
