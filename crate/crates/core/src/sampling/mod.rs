//! Bandlimited functions, cell averages and sampling functions.
//!
//! A level-m bandlimited function is a combination of the β_m Neumann
//! eigenfunctions without eigenvalue 6, each continued to finer levels on
//! the minus branch. It is determined by its 3^m cell averages, either the
//! discrete ones (`A`, mean of the three corners) or the continuous ones
//! (`B`, the normalized integral over the cell).

pub mod kernel;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::decimation::{eigenvalue_up, extend_vertex_values, Branch, Target};
use crate::eigenbasis::{bandlimited_basis, Basis};
use crate::error::{Error, Result};
use crate::geometry::{orbit_representatives, Fractal, Word};
use crate::graphs::{build_beta, Graph};
pub use kernel::{LocalMesh, RefinementKernel};

/// Default quadrature depth below the sampling level.
pub const DEFAULT_DEPTH: usize = 8;

/// Finest β level the materialized evaluation path will build.
pub const MATERIALIZE_CAP: usize = 10;

/// Eigenvalues closer than this share a refinement kernel.
const GROUP_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Normalization {
    /// Mean of the three corner values.
    A,
    /// Measure-normalized integral over the cell.
    B,
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Normalization::A => "A",
            Normalization::B => "B",
        })
    }
}

impl FromStr for Normalization {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "A" | "a" => Ok(Normalization::A),
            "B" | "b" => Ok(Normalization::B),
            other => Err(Error::InvalidArgument(format!(
                "unknown normalization {other:?}"
            ))),
        }
    }
}

/// Mean of the three corner values of `cell` in a vertex-graph function.
pub fn discrete_average(graph: &Graph, values: &[f64], cell: &Word) -> Result<f64> {
    if cell.fractal() != graph.fractal || cell.level() > graph.level {
        return Err(Error::UnknownCell(cell.to_string()));
    }
    if values.len() != graph.num_vertices() {
        return Err(Error::DimensionMismatch {
            expected: graph.num_vertices(),
            found: values.len(),
        });
    }
    if cell.level() == graph.level {
        let [a, b, c] = graph.cell_corners[cell.index()];
        return Ok((values[a] + values[b] + values[c]) / 3.0);
    }
    // a coarser cell: its corners are the corners of its extreme descendants
    let depth = graph.level - cell.level();
    let corners: Vec<f64> = (0..3u8)
        .map(|j| {
            let w = cell
                .concat(&vec![j; depth])
                .expect("corner digits are valid");
            values[graph.cell_corners[w.index()][j as usize]]
        })
        .collect();
    Ok(corners.iter().sum::<f64>() / 3.0)
}

/// Quadrature data of a sampling space at one depth.
#[derive(Debug)]
pub struct Quadrature {
    pub depth: usize,
    pub kernel: RefinementKernel,
    /// Continuous averages of the basis members, `[cell, member]`.
    pub b_matrix: DMatrix<f64>,
    /// The same at depth `depth - 1`, for the convergence gap.
    pub b_matrix_coarse: Option<DMatrix<f64>>,
    pub b_inverse: DMatrix<f64>,
}

/// Level-m bandlimited space: basis, average maps and cached quadratures.
#[derive(Debug)]
pub struct SamplingSpace {
    pub m: usize,
    pub basis: Basis,
    /// Kernel group of each basis member.
    pub group_of: Vec<usize>,
    pub group_eigenvalues: Vec<f64>,
    /// Discrete averages of the basis members, `[cell, member]`.
    pub a_matrix: DMatrix<f64>,
    pub a_inverse: DMatrix<f64>,
    quadratures: Mutex<HashMap<usize, Arc<Quadrature>>>,
    continued: Mutex<HashMap<usize, Arc<Vec<Vec<f64>>>>>,
}

fn space_cache() -> &'static Mutex<HashMap<usize, Arc<SamplingSpace>>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<SamplingSpace>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn invert(matrix: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let sv = matrix.singular_values();
    let smallest = sv.iter().fold(f64::INFINITY, |a, &s| a.min(s));
    if smallest <= 1e-8 {
        return Err(Error::SingularSystem);
    }
    matrix.clone().try_inverse().ok_or(Error::SingularSystem)
}

impl SamplingSpace {
    /// Shared space for level `m` (built once per process).
    pub fn get(m: usize) -> Result<Arc<SamplingSpace>> {
        if let Some(s) = space_cache().lock().expect("space cache poisoned").get(&m) {
            return Ok(Arc::clone(s));
        }
        let space = Arc::new(Self::build(m)?);
        let mut guard = space_cache().lock().expect("space cache poisoned");
        Ok(Arc::clone(guard.entry(m).or_insert(space)))
    }

    fn build(m: usize) -> Result<Self> {
        let basis = bandlimited_basis(m)?;
        let mut group_eigenvalues: Vec<f64> = Vec::new();
        let mut group_of = Vec::with_capacity(basis.len());
        for u in &basis.members {
            let g = match group_eigenvalues
                .iter()
                .position(|&l| (l - u.eigenvalue).abs() <= GROUP_TOL)
            {
                Some(g) => g,
                None => {
                    group_eigenvalues.push(u.eigenvalue);
                    group_eigenvalues.len() - 1
                }
            };
            group_of.push(g);
        }
        let graph = &basis.graph;
        let n = basis.len();
        let mut a_matrix = DMatrix::zeros(n, n);
        for (k, u) in basis.members.iter().enumerate() {
            for (c, avg) in graph.cell_means(&u.values).into_iter().enumerate() {
                a_matrix[(c, k)] = avg;
            }
        }
        let a_inverse = invert(&a_matrix)?;
        Ok(Self {
            m,
            basis,
            group_of,
            group_eigenvalues,
            a_matrix,
            a_inverse,
            quadratures: Mutex::new(HashMap::new()),
            continued: Mutex::new(HashMap::new()),
        })
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn graph(&self) -> &Arc<Graph> {
        &self.basis.graph
    }

    fn averages_with(&self, row: &[f64]) -> DMatrix<f64> {
        let g = self.graph();
        let n = self.dim();
        DMatrix::from_fn(n, n, |c, k| {
            let u = &self.basis.members[k].values;
            let corners = g.cell_corners[c];
            let base = 3 * self.group_of[k];
            (0..3).map(|j| row[base + j] * u[corners[j]]).sum()
        })
    }

    /// Quadrature at `depth` levels below m (cached).
    pub fn quadrature(&self, depth: usize) -> Result<Arc<Quadrature>> {
        if let Some(q) = self.quadratures.lock().expect("cache poisoned").get(&depth) {
            return Ok(Arc::clone(q));
        }
        let kernel = RefinementKernel::new(&self.group_eigenvalues, depth)?;
        let b_matrix = self.averages_with(&kernel.mean_row());
        let b_matrix_coarse = kernel.coarse_mean_row().map(|row| self.averages_with(&row));
        let b_inverse = invert(&b_matrix)?;
        let q = Arc::new(Quadrature {
            depth,
            kernel,
            b_matrix,
            b_matrix_coarse,
            b_inverse,
        });
        let mut guard = self.quadratures.lock().expect("cache poisoned");
        Ok(Arc::clone(guard.entry(depth).or_insert(q)))
    }

    fn depth_for(&self, quad_level: usize) -> Result<usize> {
        quad_level.checked_sub(self.m).ok_or(Error::LevelMismatch {
            expected: self.m,
            found: quad_level,
        })
    }

    /// Cell-average matrix `[cell, member]` for a normalization.
    pub fn average_matrix(&self, norm: Normalization, quad_level: usize) -> Result<DMatrix<f64>> {
        match norm {
            Normalization::A => Ok(self.a_matrix.clone()),
            Normalization::B => Ok(self
                .quadrature(self.depth_for(quad_level)?)?
                .b_matrix
                .clone()),
        }
    }

    fn inverse(&self, norm: Normalization, quad_level: usize) -> Result<DMatrix<f64>> {
        match norm {
            Normalization::A => Ok(self.a_inverse.clone()),
            Normalization::B => Ok(self
                .quadrature(self.depth_for(quad_level)?)?
                .b_inverse
                .clone()),
        }
    }

    /// Ratio `B_C(u)/A_C(u)` per member, taken on the cell of largest `|A_C|`,
    /// with the largest deviation of that ratio over the other cells where
    /// `A_C` is not negligible.
    pub fn continuous_ratios(&self, quad_level: usize) -> Result<Vec<(f64, f64)>> {
        let q = self.quadrature(self.depth_for(quad_level)?)?;
        Ok((0..self.dim())
            .map(|k| {
                let col_a = self.a_matrix.column(k);
                let col_b = q.b_matrix.column(k);
                let (best, top) = col_a.iter().enumerate().fold((0, 0.0f64), |acc, (i, v)| {
                    if v.abs() > acc.1 {
                        (i, v.abs())
                    } else {
                        acc
                    }
                });
                let ratio = col_b[best] / col_a[best];
                let spread = col_a
                    .iter()
                    .zip(col_b.iter())
                    .filter(|(a, _)| a.abs() > 1e-6 * top)
                    .fold(0.0f64, |acc, (a, b)| acc.max((b / a - ratio).abs()));
                (ratio, spread)
            })
            .collect())
    }

    /// Coefficients of the function with the given cell averages.
    pub fn reconstruct(
        self: &Arc<Self>,
        targets: &[f64],
        norm: Normalization,
        quad_level: usize,
    ) -> Result<BandlimitedFunction> {
        if targets.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: targets.len(),
            });
        }
        let inv = self.inverse(norm, quad_level)?;
        let coefficients = (inv * DVector::from_column_slice(targets))
            .as_slice()
            .to_vec();
        Ok(BandlimitedFunction {
            space: Arc::clone(self),
            coefficients,
        })
    }

    /// Basis members continued to β_level on the minus branch, via the
    /// level-by-level graph extension (cached).
    pub fn continued_basis(&self, level: usize) -> Result<Arc<Vec<Vec<f64>>>> {
        if level > MATERIALIZE_CAP {
            return Err(Error::CapacityCap {
                requested: level,
                cap: MATERIALIZE_CAP,
            });
        }
        self.depth_for(level)?;
        if let Some(v) = self.continued.lock().expect("cache poisoned").get(&level) {
            return Ok(Arc::clone(v));
        }
        let mut values: Vec<Vec<f64>> = self
            .basis
            .members
            .iter()
            .map(|u| u.values.clone())
            .collect();
        let mut lambdas: Vec<f64> = self.basis.eigenvalues();
        for l in self.m..level {
            let (coarse, fine) = (build_beta(l), build_beta(l + 1));
            for (v, lam) in values.iter_mut().zip(lambdas.iter_mut()) {
                let next = eigenvalue_up(*lam, Branch::Minus, Target::Beta)?;
                *v = extend_vertex_values(&coarse, &fine, v, next)?;
                *lam = next;
            }
        }
        let values = Arc::new(values);
        self.continued
            .lock()
            .expect("cache poisoned")
            .insert(level, Arc::clone(&values));
        Ok(values)
    }

    /// Corner-value matrix `R_C` of one m-cell: row `3g + j`, column `w` is
    /// the group-`g` part of function `w` at corner `j`.
    fn corner_matrix(&self, cell: usize, coefficients: &DMatrix<f64>) -> DMatrix<f64> {
        let corners = self.graph().cell_corners[cell];
        let mut r = DMatrix::zeros(3 * self.group_eigenvalues.len(), coefficients.ncols());
        for (k, u) in self.basis.members.iter().enumerate() {
            let base = 3 * self.group_of[k];
            for j in 0..3 {
                let e = u.values[corners[j]];
                if e == 0.0 {
                    continue;
                }
                for w in 0..coefficients.ncols() {
                    r[(base + j, w)] += e * coefficients[(k, w)];
                }
            }
        }
        r
    }

    /// Quadrature statistics for several functions at once (columns of
    /// `coefficients`), evaluated on β_{m+depth}.
    pub fn raw_stats(&self, coefficients: &DMatrix<f64>, depth: usize) -> Result<Vec<RawStats>> {
        if coefficients.nrows() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: coefficients.nrows(),
            });
        }
        let q = self.quadrature(depth)?;
        let k = &q.kernel;
        let w = coefficients.ncols();
        let fine_cells = 3f64.powi(depth as i32);
        let per_cell: Vec<Vec<RawStats>> = (0..self.dim())
            .into_par_iter()
            .map(|cell| {
                let r = self.corner_matrix(cell, coefficients);
                let values = &k.values * &r;
                let means = &k.averages * &r;
                let coarse = k.coarse_averages.as_ref().map(|c| c * &r);
                (0..w)
                    .map(|col| {
                        let column = values.column(col);
                        let sup = column.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                        let sup_coarse = column
                            .iter()
                            .take(k.coarse_points)
                            .fold(0.0f64, |a, v| a.max(v.abs()));
                        let l2 = means.column(col).norm_squared() / fine_cells;
                        let l2_coarse = coarse
                            .as_ref()
                            .map(|c| c.column(col).norm_squared() * 3.0 / fine_cells)
                            .unwrap_or(l2);
                        RawStats {
                            sup,
                            sup_coarse,
                            scaled_l2: l2,
                            scaled_l2_coarse: l2_coarse,
                        }
                    })
                    .collect()
            })
            .collect();
        let mut total = vec![RawStats::default(); w];
        for cell in per_cell {
            for (t, s) in total.iter_mut().zip(cell) {
                t.sup = t.sup.max(s.sup);
                t.sup_coarse = t.sup_coarse.max(s.sup_coarse);
                t.scaled_l2 += s.scaled_l2;
                t.scaled_l2_coarse += s.scaled_l2_coarse;
            }
        }
        Ok(total)
    }

    /// Sampling functions `ψ_w` for the given level-m words, one batch.
    pub fn sampling_functions(
        self: &Arc<Self>,
        words: &[Word],
        norm: Normalization,
        quad_level: usize,
    ) -> Result<Vec<(BandlimitedFunction, SamplingStats)>> {
        let depth = self.depth_for(quad_level)?;
        let inv = self.inverse(norm, quad_level)?;
        let mut coefficients = DMatrix::zeros(self.dim(), words.len());
        for (col, word) in words.iter().enumerate() {
            let cell = self.graph().cell_index(word)?;
            coefficients.set_column(col, &inv.column(cell));
        }
        let raw = self.raw_stats(&coefficients, depth)?;
        Ok(words
            .iter()
            .zip(raw)
            .enumerate()
            .map(|(col, (word, r))| {
                let f = BandlimitedFunction {
                    space: Arc::clone(self),
                    coefficients: coefficients.column(col).iter().copied().collect(),
                };
                (f, r.into_stats(word.clone(), self.m, norm, quad_level))
            })
            .collect())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RawStats {
    pub sup: f64,
    pub sup_coarse: f64,
    pub scaled_l2: f64,
    pub scaled_l2_coarse: f64,
}

impl RawStats {
    fn into_stats(self, word: Word, m: usize, norm: Normalization, quad: usize) -> SamplingStats {
        SamplingStats {
            word,
            m,
            normalization: norm,
            sup_norm: self.sup,
            scaled_l2: self.scaled_l2,
            quad_level: quad,
            gap: (self.scaled_l2 - self.scaled_l2_coarse).abs(),
            sup_gap: (self.sup - self.sup_coarse).abs(),
        }
    }
}

/// Sampling-function metrics of one cell.
#[derive(Debug, Clone, Serialize)]
pub struct SamplingStats {
    pub word: Word,
    pub m: usize,
    pub normalization: Normalization,
    /// Max of |ψ| over the β points at the quadrature level.
    pub sup_norm: f64,
    /// `3^m ∫ ψ²`, estimated from the cell averages at the quadrature level.
    pub scaled_l2: f64,
    pub quad_level: usize,
    /// `|scaled_l2(M) - scaled_l2(M-1)|`.
    pub gap: f64,
    /// `|sup(M) - sup(M-1)|`.
    pub sup_gap: f64,
}

/// A function in a level-m bandlimited space, by its basis coefficients.
#[derive(Debug, Clone)]
pub struct BandlimitedFunction {
    pub space: Arc<SamplingSpace>,
    pub coefficients: Vec<f64>,
}

impl BandlimitedFunction {
    pub fn new(space: Arc<SamplingSpace>, coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() != space.dim() {
            return Err(Error::DimensionMismatch {
                expected: space.dim(),
                found: coefficients.len(),
            });
        }
        Ok(Self {
            space,
            coefficients,
        })
    }

    pub fn level(&self) -> usize {
        self.space.m
    }

    /// The 3^m cell averages in the given normalization.
    pub fn averages(&self, norm: Normalization, quad_level: usize) -> Result<Vec<f64>> {
        let a = self.space.average_matrix(norm, quad_level)?;
        Ok((a * DVector::from_column_slice(&self.coefficients))
            .as_slice()
            .to_vec())
    }

    /// Values on β_level (level >= m), graph vertex order.
    pub fn evaluate(&self, level: usize) -> Result<Vec<f64>> {
        let basis = self.space.continued_basis(level)?;
        let n = build_beta(level).num_vertices();
        let mut out = vec![0.0; n];
        for (c, v) in self.coefficients.iter().zip(basis.iter()) {
            for (o, x) in out.iter_mut().zip(v) {
                *o += c * x;
            }
        }
        Ok(out)
    }

    /// Quadrature statistics on β_{quad_level}.
    pub fn stats(
        &self,
        word: Word,
        norm: Normalization,
        quad_level: usize,
    ) -> Result<SamplingStats> {
        let depth = self.space.depth_for(quad_level)?;
        let c = DMatrix::from_column_slice(self.space.dim(), 1, &self.coefficients);
        let raw = self.space.raw_stats(&c, depth)?;
        Ok(raw[0].into_stats(word, self.space.m, norm, quad_level))
    }
}

/// Estimate of `3^ℓ ∫_C f dμ` for a cell `C` of level ℓ in `[m, M]`: the
/// mean of the level-M discrete averages inside `C`. Returns the value and
/// its change from level M-1.
pub fn continuous_average(
    f: &BandlimitedFunction,
    cell: &Word,
    quad_level: usize,
) -> Result<(f64, f64)> {
    let space = &f.space;
    let m = space.m;
    if cell.fractal() != Fractal::Sg || cell.level() < m || cell.level() > quad_level {
        return Err(Error::UnknownCell(cell.to_string()));
    }
    let depth = space.depth_for(quad_level)?;
    let q = space.quadrature(depth)?;
    let top = cell.prefix(m).index();
    let c = DMatrix::from_column_slice(space.dim(), 1, &f.coefficients);
    let r = space.corner_matrix(top, &c);
    let sub = Word::new(Fractal::Sg, cell.digits()[m..].to_vec())?;
    let span = |total_depth: usize, means: &DMatrix<f64>| -> f64 {
        let rel = sub.level();
        let width = 3usize.pow((total_depth - rel) as u32);
        let start = sub.index() * width;
        let rows = means.rows(start, width);
        (rows * &r).mean()
    };
    let fine = span(depth, &q.kernel.averages);
    let coarse = match &q.kernel.coarse_averages {
        Some(ca) if sub.level() < depth => span(depth - 1, ca),
        _ => fine,
    };
    Ok((fine, (fine - coarse).abs()))
}

/// `ψ_w` with its statistics; `quad_level` defaults to m + 8.
pub fn sampling_function(
    word: &Word,
    norm: Normalization,
    quad_level: Option<usize>,
) -> Result<(BandlimitedFunction, SamplingStats)> {
    let m = word.level();
    let space = SamplingSpace::get(m)?;
    let quad = quad_level.unwrap_or(m + DEFAULT_DEPTH);
    let mut out = space.sampling_functions(std::slice::from_ref(word), norm, quad)?;
    Ok(out.remove(0))
}

/// One row per D₃ orbit of words at levels 1..=max_level.
pub fn table1(max_level: usize, norm: Normalization, depth: usize) -> Result<Vec<SamplingStats>> {
    let mut rows = Vec::new();
    for m in 1..=max_level {
        let space = SamplingSpace::get(m)?;
        let words = orbit_representatives(m);
        let batch = space.sampling_functions(&words, norm, m + depth)?;
        rows.extend(batch.into_iter().map(|(_, s)| s));
    }
    Ok(rows)
}
