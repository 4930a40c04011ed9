//! The truncated Preisach plane.
//!
//! Relays are parametrised by half-width `r >= 0` and centre `s`, with
//! thresholds `a1 = s - r` and `a2 = s + r`. Inputs live on the grid
//! `{0, d, 2d, ..., kmax}` with `kmax = m * d`, so the memory staircase only
//! ever runs along the lines `a1 = k * d` and `a2 = k * d`.
//!
//! The part of the plane the staircase can reach is the triangle
//! `0 <= a1 <= a2 <= kmax` (in `(r, s)`: `r >= 0`, `s - r >= 0`,
//! `s + r <= kmax`). Slicing it along the grid lines gives `m(m-1)/2`
//! squares and `m` half-squares on the diagonal `r = 0`; each square is cut
//! once more along the constant-`r` line through its corners. The result is
//! `m^2` congruent right triangles of area `d^2 / 4` in `(r, s)`.
//!
//! Cell numbering runs band by band in `a2` (bands of `s + r`, starting at
//! the origin). Band `j` holds `2j + 1` cells: for each `a1` band `i < j` the
//! wider triangle of square `(i, j)` followed by the narrower one, then the
//! diagonal half-square `(j, j)`. So band `j` starts at index `j^2`.
//!
//! Everything in `[0, kmax]^2` outside the reachable triangle is the region
//! `D`, which the staircase never visits and which stays in the virgin
//! (all relays down) state.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Input value expressed as a count of grid steps `d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Level(pub u32);

impl Level {
    pub fn get(self) -> u32 {
        self.0
    }
}

/// Rounds `x` to the nearest integer with ties away from zero, treating
/// values within a few ulps of a half step as ties.
fn round_half_away<T: Real>(x: T) -> T {
    let ax = x.abs();
    let tol = T::epsilon() * T::of(64.0) * ax.max(T::one());
    let n = (ax + T::of(0.5) + tol).floor();
    if x < T::zero() {
        -n
    } else {
        n
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreisachGrid<T> {
    d: T,
    m: u32,
}

impl<T: Real> PreisachGrid<T> {
    pub fn new(d: T, m: u32) -> Result<Self> {
        if !(d.is_finite() && d > T::zero()) {
            return Err(Error::Invalid(format!("grid step d must be positive and finite, got {d}")));
        }
        if m == 0 {
            return Err(Error::Invalid("grid needs at least one level".into()));
        }
        Ok(PreisachGrid { d, m })
    }

    /// Grid with the given ceiling, which must be a whole number of steps.
    pub fn with_kmax(d: T, kmax: T) -> Result<Self> {
        if !(d.is_finite() && d > T::zero()) {
            return Err(Error::Invalid(format!("grid step d must be positive and finite, got {d}")));
        }
        if !(kmax.is_finite() && kmax > T::zero()) {
            return Err(Error::Invalid(format!("kmax must be positive and finite, got {kmax}")));
        }
        let ratio = kmax / d;
        let steps = round_half_away(ratio);
        let tol = T::of(1e-9) * steps.max(T::one());
        if (ratio - steps).abs() > tol {
            return Err(Error::Invalid(format!("kmax = {kmax} is not a multiple of d = {d}")));
        }
        Self::new(d, Self::level_count(steps)?)
    }

    /// Smallest grid whose ceiling `d * ceil(max / d)` covers `max_value`.
    pub fn covering(d: T, max_value: T) -> Result<Self> {
        if !(d.is_finite() && d > T::zero()) {
            return Err(Error::Invalid(format!("grid step d must be positive and finite, got {d}")));
        }
        if !max_value.is_finite() || max_value < T::zero() {
            return Err(Error::Invalid(format!("maximum input {max_value} must be finite and >= 0")));
        }
        let ratio = max_value / d;
        let nearest = round_half_away(ratio);
        // Snap ratios a hair above an integer (0.3 / 0.1) back down.
        let tol = T::epsilon() * T::of(64.0) * nearest.max(T::one());
        let steps = if (ratio - nearest).abs() <= tol { nearest } else { ratio.ceil() };
        Self::new(d, Self::level_count(steps.max(T::one()))?)
    }

    fn level_count(steps: T) -> Result<u32> {
        steps
            .to_u32()
            .filter(|&m| m > 0)
            .ok_or_else(|| Error::Invalid(format!("level count {steps} out of range")))
    }

    pub fn d(&self) -> T {
        self.d
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn kmax(&self) -> T {
        self.d * T::of(self.m as f64)
    }

    /// Number of triangular cells, `m^2`.
    pub fn cell_count(&self) -> usize {
        (self.m as usize).pow(2)
    }

    /// Unknowns in the identification problem: the cells plus the constant on `D`.
    pub fn unknowns(&self) -> usize {
        self.cell_count() + 1
    }

    pub fn value(&self, level: Level) -> T {
        self.d * T::of(level.0 as f64)
    }

    pub fn top(&self) -> Level {
        Level(self.m)
    }

    /// Nearest grid level, ties away from zero. Values that round outside
    /// `[0, kmax]` are a range error.
    pub fn quantize(&self, v: T) -> Result<Level> {
        let n = self.nearest_step(v)?;
        if n < T::zero() || n > T::of(self.m as f64) {
            return Err(Error::Range {
                value: v.as_f64(),
                kmax: self.kmax().as_f64(),
            });
        }
        Ok(Level(n.to_u32().expect("checked range")))
    }

    /// Like [`quantize`](Self::quantize) but saturates at `0` and `kmax`.
    pub fn quantize_clamped(&self, v: T) -> Result<Level> {
        let n = self.nearest_step(v)?;
        let n = n.max(T::zero()).min(T::of(self.m as f64));
        Ok(Level(n.to_u32().expect("clamped range")))
    }

    /// The level of a value that must already lie on the grid.
    pub fn level_of(&self, v: T) -> Result<Level> {
        let level = self.quantize(v)?;
        let tol = T::of(1e-9) * self.d.max(v.abs());
        if (self.value(level) - v).abs() > tol {
            return Err(Error::NotQuantized {
                value: v.as_f64(),
                d: self.d.as_f64(),
            });
        }
        Ok(level)
    }

    pub fn quantized_value(&self, v: T) -> Result<T> {
        self.quantize(v).map(|l| self.value(l))
    }

    fn nearest_step(&self, v: T) -> Result<T> {
        if !v.is_finite() {
            return Err(Error::Data(format!("non-finite input {v}")));
        }
        Ok(round_half_away(v / self.d))
    }

    pub fn cell(&self, index: usize) -> Result<Cell> {
        if index >= self.cell_count() {
            return Err(Error::Invalid(format!(
                "cell index {index} out of range for {} cells",
                self.cell_count()
            )));
        }
        Ok(Cell::from_index(index))
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> {
        (0..self.cell_count()).map(Cell::from_index)
    }

    /// Triangle vertices of cell `index` in `(r, s)` coordinates.
    pub fn cell_geometry(&self, index: usize) -> Result<Triangle<T>> {
        Ok(self.cell(index)?.triangle(self))
    }

    /// Area of the reachable triangle, `kmax^2 / 4`.
    pub fn reachable_area(&self) -> T {
        self.kmax() * self.kmax() / T::of(4.0)
    }

    /// Area of `D`, `3 kmax^2 / 4`.
    pub fn d_region_area(&self) -> T {
        self.kmax() * self.kmax() * T::of(0.75)
    }

    /// Three triangles tiling `D` in `(r, s)`.
    pub fn d_region_triangles(&self) -> [Triangle<T>; 3] {
        let k = self.kmax();
        let h = k / T::of(2.0);
        let z = T::zero();
        [
            Triangle::new([(z, z), (k, z), (h, h)]),
            Triangle::new([(h, h), (k, z), (k, k)]),
            Triangle::new([(z, k), (h, h), (k, k)]),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellKind {
    /// Half-square on the diagonal `a1 = a2` (touches `r = 0`).
    Diagonal,
    /// Triangle of an off-diagonal square on the larger-`r` side.
    Wide,
    /// Triangle of an off-diagonal square on the smaller-`r` side.
    Narrow,
}

/// One triangle of the grid, located by its threshold bands: `a1` lies in
/// `(i d, (i+1) d)` and `a2` in `(j d, (j+1) d)` with `i <= j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Cell {
    pub index: usize,
    pub i: u32,
    pub j: u32,
    pub kind: CellKind,
}

impl Cell {
    fn from_index(index: usize) -> Cell {
        let mut j = (index as f64).sqrt() as usize;
        while j * j > index {
            j -= 1;
        }
        while (j + 1) * (j + 1) <= index {
            j += 1;
        }
        let off = index - j * j;
        let (i, kind) = if off == 2 * j {
            (j, CellKind::Diagonal)
        } else if off.is_multiple_of(2) {
            (off / 2, CellKind::Wide)
        } else {
            (off / 2, CellKind::Narrow)
        };
        Cell {
            index,
            i: i as u32,
            j: j as u32,
            kind,
        }
    }

    /// Vertices in `(r, s)`.
    pub fn triangle<T: Real>(&self, grid: &PreisachGrid<T>) -> Triangle<T> {
        let (i, j) = (self.i, self.j);
        // (a1, a2) corners in level units
        let corners = match self.kind {
            CellKind::Diagonal => [(i, i), (i + 1, i + 1), (i, i + 1)],
            CellKind::Wide => [(i, j), (i + 1, j + 1), (i, j + 1)],
            CellKind::Narrow => [(i, j), (i + 1, j), (i + 1, j + 1)],
        };
        let half = grid.d() / T::of(2.0);
        Triangle::new(corners.map(|(a1, a2)| {
            let (a1, a2) = (T::of(a1 as f64), T::of(a2 as f64));
            ((a2 - a1) * half, (a1 + a2) * half)
        }))
    }
}

/// A triangle in the `(r, s)` plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triangle<T> {
    pub vertices: [(T, T); 3],
}

impl<T: Real> Triangle<T> {
    pub fn new(vertices: [(T, T); 3]) -> Self {
        Triangle { vertices }
    }

    pub fn area(&self) -> T {
        let [(x0, y0), (x1, y1), (x2, y2)] = self.vertices;
        ((x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)).abs() / T::of(2.0)
    }

    pub fn centroid(&self) -> (T, T) {
        let [(x0, y0), (x1, y1), (x2, y2)] = self.vertices;
        let three = T::of(3.0);
        ((x0 + x1 + x2) / three, (y0 + y1 + y2) / three)
    }

    /// Centroids of the `p^2` congruent sub-triangles obtained by cutting
    /// each edge into `p` pieces. Each stands for `area / p^2`.
    pub fn subdivision_centroids(&self, p: usize) -> Vec<(T, T)> {
        let [(x0, y0), (x1, y1), (x2, y2)] = self.vertices;
        let pf = T::of_usize(p);
        let at = |a: usize, b: usize| {
            let (u, v) = (T::of_usize(a) / pf, T::of_usize(b) / pf);
            (x0 + u * (x1 - x0) + v * (x2 - x0), y0 + u * (y1 - y0) + v * (y2 - y0))
        };
        let mut out = Vec::with_capacity(p * p);
        for a in 0..p {
            for b in 0..p - a {
                out.push(Triangle::new([at(a, b), at(a + 1, b), at(a, b + 1)]).centroid());
                if a + b + 2 <= p {
                    out.push(Triangle::new([at(a + 1, b), at(a, b + 1), at(a + 1, b + 1)]).centroid());
                }
            }
        }
        out
    }
}

/// Dominant extrema of the input history: `M1, m1, M2, m2, ...`, the last
/// entry being the current input. Maxima strictly decrease, minima strictly
/// increase. Empty means virgin: every relay is down.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct MemoryCurve {
    extrema: Vec<Level>,
}

impl MemoryCurve {
    pub fn virgin() -> Self {
        MemoryCurve::default()
    }

    pub fn from_levels(levels: impl IntoIterator<Item = Level>) -> Self {
        let mut curve = MemoryCurve::virgin();
        for l in levels {
            curve.update(l);
        }
        curve
    }

    pub fn is_virgin(&self) -> bool {
        self.extrema.is_empty()
    }

    /// Alternating extrema, starting with the dominant maximum.
    pub fn extrema(&self) -> &[Level] {
        &self.extrema
    }

    pub fn maxima(&self) -> impl Iterator<Item = Level> + '_ {
        self.extrema.iter().copied().step_by(2)
    }

    pub fn minima(&self) -> impl Iterator<Item = Level> + '_ {
        self.extrema.iter().copied().skip(1).step_by(2)
    }

    pub fn current(&self) -> Option<Level> {
        self.extrema.last().copied()
    }

    /// Feeds one input level through the wiping-out recursion.
    pub fn update(&mut self, v: Level) {
        let e = &mut self.extrema;
        let Some(&last) = e.last() else {
            e.push(v);
            return;
        };
        if v == last {
            return;
        }
        let last_is_max = e.len() % 2 == 1;
        let rising = v > last;
        if rising == last_is_max {
            // running extremum continues in the same direction
            *e.last_mut().unwrap() = v;
        } else {
            e.push(v);
        }
        // Wipe every older same-kind extremum the new value dominates,
        // together with the opposite extremum that followed it.
        while e.len() >= 3 {
            let older = e[e.len() - 3];
            let dominated = if rising { older <= v } else { older >= v };
            if !dominated {
                break;
            }
            let n = e.len();
            e.drain(n - 3..n - 1);
        }
    }

    /// [`update`](Self::update) for a raw value that must lie on `grid`.
    pub fn update_value<T: Real>(&mut self, grid: &PreisachGrid<T>, v: T) -> Result<()> {
        let level = grid.level_of(v)?;
        self.update(level);
        Ok(())
    }

    /// Checks the ordering invariants and that every level fits `grid`.
    pub fn validate<T: Real>(&self, grid: &PreisachGrid<T>) -> Result<()> {
        let e = &self.extrema;
        if e.iter().any(|l| l.0 > grid.m()) {
            return Err(Error::Invalid("memory curve exceeds grid ceiling".into()));
        }
        for w in e.windows(2) {
            if w[0] == w[1] {
                return Err(Error::Invalid("memory curve repeats a level".into()));
            }
        }
        for k in 0..e.len().saturating_sub(1) {
            let is_max = k % 2 == 0;
            if is_max != (e[k] > e[k + 1]) {
                return Err(Error::Invalid("memory curve does not alternate".into()));
            }
            if k + 2 < e.len() && (is_max != (e[k] > e[k + 2])) {
                return Err(Error::Invalid("memory curve extrema are not nested".into()));
            }
        }
        Ok(())
    }

    /// Sign of every relay whose `a1` lies in band `i` and `a2` in band `j`.
    ///
    /// A relay is up iff more stored maxima reach `a2` than stored minima
    /// reach `a1`: both sets are prefixes, so the later of the two last
    /// qualifying events decides.
    fn band_signs(&self, m: u32) -> Vec<i8> {
        let m = m as usize;
        // maxima_reaching[j] = #{M_k >= j + 1}, minima_reaching[i] = #{m_k <= i}
        let mut maxima_reaching = vec![0usize; m];
        let mut minima_reaching = vec![0usize; m];
        for big in self.maxima() {
            for slot in maxima_reaching.iter_mut().take((big.0 as usize).min(m)) {
                *slot += 1;
            }
        }
        for small in self.minima() {
            for slot in minima_reaching.iter_mut().skip(small.0 as usize) {
                *slot += 1;
            }
        }
        let mut signs = vec![-1i8; m * m];
        for j in 0..m {
            for i in 0..=j {
                if maxima_reaching[j] > minima_reaching[i] {
                    signs[i * m + j] = 1;
                }
            }
        }
        signs
    }

    /// `Delta_i`: `+1` for cells below the staircase, `-1` above, then a
    /// trailing `-1` for the constant on `D`.
    pub fn sign_row<T: Real>(&self, grid: &PreisachGrid<T>) -> SignRow {
        let m = grid.m() as usize;
        let bands = self.band_signs(grid.m());
        let mut row: Vec<i8> = grid
            .cells()
            .map(|c| bands[c.i as usize * m + c.j as usize])
            .collect();
        row.push(-1);
        SignRow(row)
    }
}

/// One row of the sign matrix: `m^2` cell signs followed by `-1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SignRow(Vec<i8>);

impl SignRow {
    pub fn as_slice(&self) -> &[i8] {
        &self.0
    }

    pub fn cells(&self) -> &[i8] {
        &self.0[..self.0.len() - 1]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn dot<T: Real>(&self, x: &[T]) -> T {
        debug_assert_eq!(x.len(), self.0.len());
        self.0
            .iter()
            .zip(x)
            .fold(T::zero(), |acc, (&s, &v)| if s > 0 { acc + v } else { acc - v })
    }

    pub fn into_vec(self) -> Vec<i8> {
        self.0
    }
}
