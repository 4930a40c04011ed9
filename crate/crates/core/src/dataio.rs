//! Experiment series ingestion, quantization preprocessing and file exports.
//!
//! Formats:
//!
//! * series CSV: header `t,kappa,moment` (columns matched by name, extra
//!   columns ignored), `#` comment lines allowed, SI units assumed;
//! * loop CSV: `kappa,moment`;
//! * heatmap CSV: `cell_id,v0r,v0s,v1r,v1s,v2r,v2s,value`, one row per cell;
//! * kernel JSON: `{grid: {d, m, kmax}, cells: [..], c, q, svd_tol, residual_rms, objective}`.
//!
//! Numbers are written in shortest round-trip form, so identical inputs give
//! byte-identical files and re-reading restores every value exactly.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::identify::FitReport;
use crate::operator::KernelVector;
use crate::plane::{Level, PreisachGrid};
use crate::scalar::Real;

/// Time-stamped curvature and moment samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSeries<T> {
    pub t: Vec<T>,
    pub kappa: Vec<T>,
    pub moment: Vec<T>,
    pub source: String,
}

impl<T: Real> ExperimentSeries<T> {
    pub fn new(t: Vec<T>, kappa: Vec<T>, moment: Vec<T>, source: impl Into<String>) -> Result<Self> {
        let s = ExperimentSeries {
            t,
            kappa,
            moment,
            source: source.into(),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    fn validate(&self) -> Result<()> {
        if self.t.is_empty() {
            return Err(Error::Data("series is empty".into()));
        }
        for (what, other) in [("kappa", self.kappa.len()), ("moment", self.moment.len())] {
            if other != self.t.len() {
                return Err(Error::LengthMismatch {
                    what: if what == "kappa" { "time vs kappa" } else { "time vs moment" },
                    left: self.t.len(),
                    right: other,
                });
            }
        }
        for i in 0..self.t.len() {
            if !(self.t[i].is_finite() && self.kappa[i].is_finite() && self.moment[i].is_finite()) {
                return Err(Error::Data(format!("sample {i} is not finite")));
            }
            if i > 0 && self.t[i] <= self.t[i - 1] {
                return Err(Error::Data(format!("time is not strictly increasing at sample {i}")));
            }
        }
        Ok(())
    }
}

/// Curvature samples with optional measured moments (prediction input).
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureSeries<T> {
    pub t: Vec<T>,
    pub kappa: Vec<T>,
    pub moment: Option<Vec<T>>,
}

fn parse_field<T: Real>(raw: &str, column: &str, path: &str, line: u64) -> Result<T> {
    let v: f64 = raw.trim().parse().map_err(|_| Error::Csv {
        path: path.into(),
        line,
        msg: format!("column `{column}`: `{raw}` is not a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::Csv {
            path: path.into(),
            line,
            msg: format!("column `{column}`: non-finite value `{raw}`"),
        });
    }
    Ok(T::of(v))
}

fn read_columns<T: Real, R: Read>(
    reader: R,
    path: &str,
    required: &[&str],
    optional: &[&str],
) -> Result<Vec<(u64, Vec<Option<T>>)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Csv {
            path: path.into(),
            line: 1,
            msg: e.to_string(),
        })?
        .clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let mut cols = Vec::new();
    for name in required {
        let idx = find(name).ok_or_else(|| Error::Csv {
            path: path.into(),
            line: rdr.position().line(),
            msg: format!("missing column `{name}`"),
        })?;
        cols.push((*name, Some(idx)));
    }
    for name in optional {
        cols.push((*name, find(name)));
    }

    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Csv {
            path: path.into(),
            line: e.position().map_or(0, |p| p.line()),
            msg: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let mut vals = Vec::with_capacity(cols.len());
        for (name, idx) in &cols {
            match idx {
                Some(i) => {
                    let raw = rec.get(*i).ok_or_else(|| Error::Csv {
                        path: path.into(),
                        line,
                        msg: format!("missing field `{name}`"),
                    })?;
                    vals.push(Some(parse_field(raw, name, path, line)?));
                }
                None => vals.push(None),
            }
        }
        out.push((line, vals));
    }
    if out.is_empty() {
        return Err(Error::Csv {
            path: path.into(),
            line: rdr.position().line(),
            msg: "no data rows".into(),
        });
    }
    Ok(out)
}

fn check_time<T: Real>(rows: &[(u64, Vec<Option<T>>)], path: &str) -> Result<()> {
    for w in rows.windows(2) {
        if w[1].1[0] <= w[0].1[0] {
            return Err(Error::Csv {
                path: path.into(),
                line: w[1].0,
                msg: "time is not strictly increasing".into(),
            });
        }
    }
    Ok(())
}

/// Parses a `t,kappa,moment` series. Error locations are file line numbers
/// (the header is line 1).
pub fn read_series<T: Real, R: Read>(reader: R, source: &str) -> Result<ExperimentSeries<T>> {
    let rows = read_columns::<T, _>(reader, source, &["t", "kappa", "moment"], &[])?;
    check_time(&rows, source)?;
    let get = |k: usize| rows.iter().map(|(_, v)| v[k].unwrap()).collect::<Vec<T>>();
    ExperimentSeries::new(get(0), get(1), get(2), source)
}

pub fn load_csv<T: Real>(path: impl AsRef<Path>) -> Result<ExperimentSeries<T>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_series(file, &path.display().to_string())
}

/// Parses a `t,kappa[,moment]` file for prediction.
pub fn load_curvature_csv<T: Real>(path: impl AsRef<Path>) -> Result<CurvatureSeries<T>> {
    let path = path.as_ref();
    let name = path.display().to_string();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let rows = read_columns::<T, _>(file, &name, &["t", "kappa"], &["moment"])?;
    check_time(&rows, &name)?;
    let has_moment = rows[0].1[2].is_some();
    Ok(CurvatureSeries {
        t: rows.iter().map(|(_, v)| v[0].unwrap()).collect(),
        kappa: rows.iter().map(|(_, v)| v[1].unwrap()).collect(),
        moment: has_moment.then(|| rows.iter().map(|(_, v)| v[2].unwrap()).collect()),
    })
}

pub fn write_series<T: Real, W: Write>(series: &ExperimentSeries<T>, mut out: W) -> std::io::Result<()> {
    writeln!(out, "t,kappa,moment")?;
    for i in 0..series.len() {
        writeln!(out, "{},{},{}", series.t[i], series.kappa[i], series.moment[i])?;
    }
    out.flush()
}

pub fn save_csv<T: Real>(series: &ExperimentSeries<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_series(series, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreprocessOptions<T> {
    pub d: T,
    /// Shift curvature by its minimum so the series starts at zero.
    pub offset: bool,
    /// Fixed ceiling instead of `d * ceil(max / d)`.
    pub kmax: Option<T>,
    /// Saturate out-of-range values instead of rejecting them.
    pub clamp: bool,
}

impl<T: Real> PreprocessOptions<T> {
    pub fn new(d: T) -> Self {
        PreprocessOptions {
            d,
            offset: false,
            kmax: None,
            clamp: false,
        }
    }
}

/// Quantized curvature with runs of equal levels collapsed.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedSeries<T> {
    pub grid: PreisachGrid<T>,
    pub levels: Vec<Level>,
    /// Moment of the last raw sample in each run.
    pub moment: Vec<T>,
    /// Raw index each kept sample came from.
    pub kept: Vec<usize>,
    /// Shift subtracted from the raw curvature (zero unless offset mode).
    pub offset: T,
}

impl<T: Real> QuantizedSeries<T> {
    pub fn kappa(&self) -> Vec<T> {
        self.levels.iter().map(|&l| self.grid.value(l)).collect()
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }
}

/// Optional offset, grid derivation and quantization of every curvature
/// sample, without collapsing. Returns the grid, the offset and one level per
/// raw sample.
pub fn quantize_series<T: Real>(kappa: &[T], opts: &PreprocessOptions<T>) -> Result<(PreisachGrid<T>, T, Vec<Level>)> {
    if kappa.is_empty() {
        return Err(Error::Data("no curvature samples".into()));
    }
    if !(opts.d.is_finite() && opts.d > T::zero()) {
        return Err(Error::Invalid(format!("d must be positive, got {}", opts.d)));
    }
    let offset = if opts.offset {
        kappa.iter().copied().fold(T::infinity(), T::min)
    } else {
        T::zero()
    };
    let shifted: Vec<T> = kappa.iter().map(|&k| k - offset).collect();
    let grid = match opts.kmax {
        Some(kmax) => PreisachGrid::with_kmax(opts.d, kmax)?,
        None => {
            let max = shifted.iter().copied().fold(T::zero(), T::max);
            PreisachGrid::covering(opts.d, max)?
        }
    };
    let levels = shifted
        .iter()
        .map(|&k| if opts.clamp { grid.quantize_clamped(k) } else { grid.quantize(k) })
        .collect::<Result<Vec<_>>>()?;
    Ok((grid, offset, levels))
}

pub fn preprocess<T: Real>(series: &ExperimentSeries<T>, opts: &PreprocessOptions<T>) -> Result<QuantizedSeries<T>> {
    let (grid, offset, raw_levels) = quantize_series(&series.kappa, opts)?;
    let mut levels = Vec::new();
    let mut moment = Vec::new();
    let mut kept: Vec<usize> = Vec::new();
    for (i, &l) in raw_levels.iter().enumerate() {
        if levels.last() == Some(&l) {
            *moment.last_mut().unwrap() = series.moment[i];
            *kept.last_mut().unwrap() = i;
        } else {
            levels.push(l);
            moment.push(series.moment[i]);
            kept.push(i);
        }
    }
    Ok(QuantizedSeries {
        grid,
        levels,
        moment,
        kept,
        offset,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridDoc {
    pub d: f64,
    pub m: u32,
    pub kmax: f64,
}

/// On-disk kernel description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelDocument {
    pub grid: GridDoc,
    pub cells: Vec<f64>,
    pub c: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub svd_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual_rms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<f64>,
}

impl KernelDocument {
    pub fn from_kernel<T: Real>(grid: &PreisachGrid<T>, kernel: &KernelVector<T>) -> Self {
        KernelDocument {
            grid: GridDoc {
                d: grid.d().as_f64(),
                m: grid.m(),
                kmax: grid.kmax().as_f64(),
            },
            cells: kernel.cells().iter().map(|v| v.as_f64()).collect(),
            c: kernel.c().as_f64(),
            q: None,
            svd_tol: None,
            residual_rms: None,
            objective: None,
        }
    }

    pub fn from_report<T: Real>(report: &FitReport<T>) -> Self {
        KernelDocument {
            q: Some(report.rank),
            svd_tol: Some(report.svd_tol.as_f64()),
            residual_rms: Some(report.residual_rms.as_f64()),
            objective: Some(report.objective.as_f64()),
            ..Self::from_kernel(&report.grid, &report.kernel)
        }
    }

    pub fn grid<T: Real>(&self) -> Result<PreisachGrid<T>> {
        let grid = PreisachGrid::new(T::of(self.grid.d), self.grid.m)?;
        let kmax = grid.kmax().as_f64();
        if (kmax - self.grid.kmax).abs() > 1e-9 * kmax.max(1.0) {
            return Err(Error::Invalid(format!(
                "kernel grid is inconsistent: d * m = {kmax} but kmax = {}",
                self.grid.kmax
            )));
        }
        Ok(grid)
    }

    pub fn kernel<T: Real>(&self) -> Result<(PreisachGrid<T>, KernelVector<T>)> {
        let grid = self.grid()?;
        let cells = self.cells.iter().map(|&v| T::of(v)).collect();
        let kernel = KernelVector::from_parts(&grid, cells, T::of(self.c))?;
        Ok((grid, kernel))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("kernel document serializes");
        s.push('\n');
        s
    }
}

pub fn export_kernel<T: Real>(report: &FitReport<T>, path: impl AsRef<Path>) -> Result<()> {
    write_kernel_document(&KernelDocument::from_report(report), path)
}

pub fn write_kernel_document(doc: &KernelDocument, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, doc.to_json()).map_err(|e| Error::io(path, e))
}

pub fn import_kernel(path: impl AsRef<Path>) -> Result<KernelDocument> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_loop<T: Real, W: Write>(trace: &[(T, T)], mut out: W) -> std::io::Result<()> {
    writeln!(out, "kappa,moment")?;
    for (k, m) in trace {
        writeln!(out, "{k},{m}")?;
    }
    out.flush()
}

pub fn export_loop<T: Real>(trace: &[(T, T)], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_loop(trace, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

pub fn write_heatmap<T: Real, W: Write>(
    grid: &PreisachGrid<T>,
    kernel: &KernelVector<T>,
    mut out: W,
) -> std::io::Result<()> {
    writeln!(out, "cell_id,v0r,v0s,v1r,v1s,v2r,v2s,value")?;
    for cell in grid.cells() {
        let [(r0, s0), (r1, s1), (r2, s2)] = cell.triangle(grid).vertices;
        writeln!(
            out,
            "{},{r0},{s0},{r1},{s1},{r2},{s2},{}",
            cell.index,
            kernel.as_slice()[cell.index]
        )?;
    }
    out.flush()
}

pub fn export_heatmap<T: Real>(
    grid: &PreisachGrid<T>,
    kernel: &KernelVector<T>,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_heatmap(grid, kernel, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}
