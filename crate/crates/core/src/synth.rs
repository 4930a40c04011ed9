//! Synthetic ground truth: seeded kernels, excitation programs and their
//! exact forward response.
//!
//! Randomness comes from ChaCha8 seeded with `seed_from_u64(seed)`; kernel
//! entries are `rng.random::<f64>()` draws (53-bit uniform in `[0, 1)`), cells
//! first, then `c`. Measurement noise uses stream 1 of the same seed with
//! `rand_distr::Normal`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dataio::ExperimentSeries;
use crate::error::{Error, Result};
use crate::operator::{eval_discrete, ramp_levels, KernelVector};
use crate::plane::{Level, PreisachGrid};
use crate::scalar::Real;

/// Piecewise-linear curvature program through `turning_points`.
#[derive(Debug, Clone, PartialEq)]
pub struct InputProgram<T> {
    pub turning_points: Vec<T>,
    /// Samples per ramp, endpoint included. `None` places one sample per grid step.
    pub samples_per_branch: Option<usize>,
}

impl<T: Real> InputProgram<T> {
    pub fn new(turning_points: Vec<T>, samples_per_branch: Option<usize>) -> Result<Self> {
        if turning_points.is_empty() {
            return Err(Error::Invalid("program needs at least one turning point".into()));
        }
        if samples_per_branch == Some(0) {
            return Err(Error::Invalid("samples per branch must be positive".into()));
        }
        Ok(InputProgram {
            turning_points,
            samples_per_branch,
        })
    }

    /// `start -> high -> low -> high -> ... -> low`, `cycles` times.
    pub fn cycles(start: T, high: T, low: T, cycles: usize, samples_per_branch: Option<usize>) -> Result<Self> {
        let mut tp = vec![start];
        for _ in 0..cycles {
            tp.push(high);
            tp.push(low);
        }
        Self::new(tp, samples_per_branch)
    }

    pub fn with_samples(mut self, samples_per_branch: usize) -> Result<Self> {
        self.samples_per_branch = Some(samples_per_branch);
        Self::new(self.turning_points, self.samples_per_branch)
    }

    /// Quantized turning points; consecutive ones must differ and alternate in direction.
    pub fn turning_levels(&self, grid: &PreisachGrid<T>) -> Result<Vec<Level>> {
        let levels = self
            .turning_points
            .iter()
            .map(|&v| grid.quantize(v))
            .collect::<Result<Vec<_>>>()?;
        for w in levels.windows(3) {
            let (a, b) = (w[1].0 as i64 - w[0].0 as i64, w[2].0 as i64 - w[1].0 as i64);
            if a * b >= 0 {
                return Err(Error::Invalid("turning points must alternate in direction".into()));
            }
        }
        if levels.len() == 2 && levels[0] == levels[1] {
            return Err(Error::Invalid("turning points must alternate in direction".into()));
        }
        Ok(levels)
    }

    /// Raw curvature samples.
    pub fn expand(&self, grid: &PreisachGrid<T>) -> Result<Vec<T>> {
        let levels = self.turning_levels(grid)?;
        match self.samples_per_branch {
            None => Ok(ramp_levels(&levels).into_iter().map(|l| grid.value(l)).collect()),
            Some(k) => {
                let mut out = vec![self.turning_points[0]];
                let kf = T::of_usize(k);
                for w in self.turning_points.windows(2) {
                    for s in 1..=k {
                        let u = T::of_usize(s) / kf;
                        out.push(w[0] + (w[1] - w[0]) * u);
                    }
                }
                Ok(out)
            }
        }
    }
}

/// Excitation visiting every staircase `(max a, then down to b < a)`:
/// turning points `0, d, 0, 2d, 0, ..., kmax, 0`, one sample per grid step.
pub fn forc_program<T: Real>(grid: &PreisachGrid<T>) -> InputProgram<T> {
    let mut tp = vec![T::zero()];
    for k in 1..=grid.m() {
        tp.push(grid.value(Level(k)));
        tp.push(T::zero());
    }
    InputProgram {
        turning_points: tp,
        samples_per_branch: None,
    }
}

/// Seeded kernel with cell integrals and `c` uniform in `[0, 1)`.
pub fn make_truth<T: Real>(grid: &PreisachGrid<T>, seed: u64) -> KernelVector<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..grid.unknowns()).map(|_| T::of(rng.random::<f64>())).collect();
    KernelVector::new(grid, values).expect("finite values of the right length")
}

/// Forward response of `truth` to `program` plus seeded Gaussian noise;
/// timestamps `0, 1, 2, ...` seconds.
pub fn simulate<T: Real>(
    grid: &PreisachGrid<T>,
    truth: &KernelVector<T>,
    program: &InputProgram<T>,
    noise_rms: T,
    seed: u64,
) -> Result<ExperimentSeries<T>> {
    if !(noise_rms.is_finite() && noise_rms >= T::zero()) {
        return Err(Error::Invalid(format!("noise rms must be >= 0, got {noise_rms}")));
    }
    let kappa = program.expand(grid)?;
    let levels = kappa.iter().map(|&k| grid.quantize(k)).collect::<Result<Vec<_>>>()?;
    let mut moment = eval_discrete(grid, truth, &levels)?;
    if noise_rms > T::zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        let normal = Normal::new(0.0, noise_rms.as_f64()).map_err(|e| Error::Invalid(e.to_string()))?;
        for m in moment.iter_mut() {
            *m = *m + T::of(normal.sample(&mut rng));
        }
    }
    let t = (0..kappa.len()).map(T::of_usize).collect();
    ExperimentSeries::new(t, kappa, moment, format!("synthetic seed={seed}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{preprocess, PreprocessOptions};
    use crate::identify::{assemble, reduce, solve, DEFAULT_SVD_TOL};
    use preisach_oracle::{exact_rank, widen};

    fn grid(d: f64, m: u32) -> PreisachGrid<f64> {
        PreisachGrid::new(d, m).unwrap()
    }

    fn delta_rows(g: &PreisachGrid<f64>, kappa: &[f64]) -> Vec<Vec<i64>> {
        let levels: Vec<Level> = kappa.iter().map(|&k| g.quantize(k).unwrap()).collect();
        let sys = assemble(g, &levels, &vec![0.0; levels.len()]).unwrap();
        widen(sys.delta().rows().into_iter().map(|r| r.to_vec()))
    }

    #[test]
    fn forc_turning_points() {
        let g = grid(0.5, 1);
        assert_eq!(forc_program(&g).turning_points, vec![0.0, 0.5, 0.0]);
        let g = grid(0.5, 2);
        let p = forc_program(&g);
        assert_eq!(p.turning_points, vec![0.0, 0.5, 0.0, 1.0, 0.0]);
        assert_eq!(p.expand(&g).unwrap(), vec![0.0, 0.5, 0.0, 0.5, 1.0, 0.5, 0.0]);
    }

    #[test]
    fn forc_exercises_every_cell_both_ways() {
        for m in 1..=6 {
            let g = grid(1.0, m);
            let rows = delta_rows(&g, &forc_program(&g).expand(&g).unwrap());
            for col in 0..g.cell_count() {
                let mut flips = 0;
                for w in rows.windows(2) {
                    if w[0][col] != w[1][col] {
                        flips += 1;
                    }
                }
                assert!(flips >= 2, "m = {m}, cell {col}: {flips} flips");
            }
        }
    }

    #[test]
    fn forc_rank_is_maximal_among_random_programs() {
        let g = grid(1.0, 3);
        let forc = forc_program(&g).expand(&g).unwrap();
        let forc_rank = exact_rank(&delta_rows(&g, &forc));
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10_000 {
            let program: Vec<f64> = (0..forc.len()).map(|_| rng.random_range(0..=3u32) as f64).collect();
            let r = exact_rank(&delta_rows(&g, &program));
            assert!(r <= forc_rank);
        }
        assert_eq!(forc_rank, 7);
    }

    #[test]
    fn truth_is_seeded() {
        let g = grid(0.5, 2);
        let a = make_truth(&g, 0);
        assert_eq!(a, make_truth(&g, 0));
        assert!(a.as_slice().iter().all(|&v| (0.0..1.0).contains(&v)));
        let frozen = [
            0.7090754154265618,
            0.46592172228961015,
            0.6991432426747317,
            0.0601711656341718,
            0.8791107179586186,
        ];
        assert_eq!(a.as_slice(), &frozen);
    }

    #[test]
    fn seeds_do_not_collide() {
        let g = grid(0.5, 2);
        let mut seen = std::collections::HashSet::new();
        for seed in 0..1000u64 {
            let k = make_truth(&g, seed);
            let key: Vec<u64> = k.as_slice().iter().map(|v| v.to_bits()).collect();
            assert!(seen.insert(key), "seed {seed} collides");
        }
    }

    #[test]
    fn program_validation() {
        let g = grid(0.25, 4);
        assert!(InputProgram::<f64>::new(vec![], None).is_err());
        assert!(InputProgram::new(vec![0.0, 1.0], Some(0)).is_err());
        assert!(InputProgram::new(vec![0.0, 0.5, 1.0], None).unwrap().expand(&g).is_err());
        assert!(InputProgram::new(vec![0.0, 2.0], None).unwrap().expand(&g).is_err());
        let p = InputProgram::cycles(0.0, 1.0, 0.25, 2, Some(4)).unwrap();
        let k = p.expand(&g).unwrap();
        assert_eq!(k.len(), 1 + 4 * 4);
        assert_eq!(k[4], 1.0);
    }

    #[test]
    fn noiseless_simulation_fits_exactly() {
        let g = grid(0.1, 5);
        let truth = make_truth(&g, 11);
        let series = simulate(&g, &truth, &forc_program(&g), 0.0, 1).unwrap();
        assert_eq!(series, simulate(&g, &truth, &forc_program(&g), 0.0, 1).unwrap());
        let q = preprocess(&series, &PreprocessOptions::new(0.1)).unwrap();
        let fit = solve(&assemble(&q.grid, &q.levels, &q.moment).unwrap(), DEFAULT_SVD_TOL).unwrap();
        assert!(fit.residual_rms < 1e-10);
    }

    #[test]
    fn noise_level_recovered() {
        let g = grid(0.25, 4);
        let truth = make_truth(&g, 5);
        let program = InputProgram::cycles(0.0, 1.0, 0.0, 20, None).unwrap();
        let mut tp = forc_program(&g).turning_points;
        tp.extend(program.turning_points.into_iter().skip(1));
        let program = InputProgram::new(tp, None).unwrap();
        let sigma = 0.05;
        let series = simulate(&g, &truth, &program, sigma, 3).unwrap();
        let levels: Vec<Level> = series.kappa.iter().map(|&k| g.quantize(k).unwrap()).collect();
        let sys = assemble(&g, &levels, &series.moment).unwrap();
        assert!(sys.samples() >= 10 * g.unknowns());
        let q = reduce(&sys, DEFAULT_SVD_TOL).unwrap().rank();
        let fit = solve(&sys, DEFAULT_SVD_TOL).unwrap();
        // residual of a least-squares fit with q parameters: sigma * sqrt(1 - q/T)
        let expected = sigma * (1.0 - q as f64 / sys.samples() as f64).sqrt();
        assert!((fit.residual_rms - expected).abs() < 0.2 * expected, "{} vs {}", fit.residual_rms, expected);
        assert_ne!(series, simulate(&g, &truth, &forc_program(&g), sigma, 4).unwrap());
    }
}
