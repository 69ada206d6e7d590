use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use super::{Graph, GraphKind};
use crate::error::{Error, Result};
use crate::geometry::Fractal;

/// Largest graph handed to the dense eigensolver.
pub const DENSE_CAP: usize = 500;

/// Eigenvalues closer than this are placed in one multiplicity group.
const GROUP_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Convention {
    /// `L = D - A`, eigenproblem `L u = λ u`.
    Plain,
    /// Generalized problem `L u = λ M u` with vertex measure 1/2 at the
    /// fractal corners and 1 elsewhere. Vertex graphs only.
    NeumannWeighted,
}

#[derive(Debug, Clone)]
pub struct LaplacianOperator {
    graph: Arc<Graph>,
    convention: Convention,
    renormalize: bool,
}

pub fn laplacian(
    graph: &Arc<Graph>,
    convention: Convention,
    renormalize: bool,
) -> Result<LaplacianOperator> {
    if convention == Convention::NeumannWeighted && graph.kind == GraphKind::Cell {
        return Err(Error::UnsupportedGraph(
            "the weighted convention applies to vertex graphs only",
        ));
    }
    Ok(LaplacianOperator {
        graph: Arc::clone(graph),
        convention,
        renormalize,
    })
}

impl LaplacianOperator {
    pub fn graph(&self) -> &Arc<Graph> {
        &self.graph
    }

    pub fn convention(&self) -> Convention {
        self.convention
    }

    pub fn dim(&self) -> usize {
        self.graph.num_vertices()
    }

    /// Scale `r` such that the renormalized Laplacian is `-r L`:
    /// `(3/2)·5^m` on SG. `None` when renormalization was not requested.
    pub fn renormalization(&self) -> Option<f64> {
        if !self.renormalize {
            return None;
        }
        let m = self.graph.level as i32;
        Some(match self.graph.fractal {
            Fractal::Sg => 1.5 * 5f64.powi(m),
            // energy and measure both scale by the SG₃ factors
            Fractal::Sg3 => 6f64.powi(m) * (15.0 / 7.0f64).powi(m),
        })
    }

    /// Vertex measure: the diagonal of `M`.
    pub fn mass(&self) -> Vec<f64> {
        let g = &self.graph;
        (0..g.num_vertices())
            .map(|v| match self.convention {
                Convention::NeumannWeighted if g.is_boundary(v) => 0.5,
                _ => 1.0,
            })
            .collect()
    }

    fn check_dim(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: u.len(),
            });
        }
        Ok(())
    }

    /// `(L u)(x) = deg(x) u(x) - Σ_{y~x} u(y)`.
    pub fn apply(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(u)?;
        let g = &self.graph;
        Ok((0..g.num_vertices())
            .map(|x| {
                let nbrs = g.neighbors(x);
                nbrs.len() as f64 * u[x] - nbrs.iter().map(|&y| u[y]).sum::<f64>()
            })
            .collect())
    }

    /// `r Σ_{y~x} (u(y) - u(x)) = -r (L u)(x)`.
    pub fn apply_renormalized(&self, u: &[f64]) -> Result<Vec<f64>> {
        let r = self.renormalization().ok_or_else(|| {
            Error::InvalidArgument("operator was built without renormalization".into())
        })?;
        Ok(self.apply(u)?.into_iter().map(|v| -r * v).collect())
    }

    /// `‖L u - λ M u‖_∞ / ‖u‖_∞`; zero for the zero vector.
    pub fn residual(&self, u: &[f64], lambda: f64) -> Result<f64> {
        let lu = self.apply(u)?;
        let mass = self.mass();
        let norm = u.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if norm == 0.0 {
            return Ok(0.0);
        }
        let worst = lu
            .iter()
            .zip(u)
            .zip(&mass)
            .fold(0.0f64, |a, ((l, v), w)| a.max((l - lambda * w * v).abs()));
        Ok(worst / norm)
    }

    pub fn dense(&self) -> DMatrix<f64> {
        let g = &self.graph;
        let n = g.num_vertices();
        let mut l = DMatrix::zeros(n, n);
        for x in 0..n {
            l[(x, x)] = g.degree(x) as f64;
            for &y in g.neighbors(x) {
                l[(x, y)] -= 1.0;
            }
        }
        l
    }
}

/// Full spectrum of an operator, ascending, with eigenvectors as columns.
/// Weighted problems return `M`-orthonormal eigenvectors.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
    /// Multiplicity group id per eigenvalue (consecutive, starting at 0).
    pub groups: Vec<usize>,
}

impl Spectrum {
    pub fn vector(&self, k: usize) -> Vec<f64> {
        self.vectors.column(k).iter().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Number of eigenvalues within `tol` of `target`.
    pub fn count_near(&self, target: f64, tol: f64) -> usize {
        self.values
            .iter()
            .filter(|v| (*v - target).abs() <= tol)
            .count()
    }
}

pub fn dense_spectrum(op: &LaplacianOperator) -> Result<Spectrum> {
    let n = op.dim();
    if n > DENSE_CAP {
        return Err(Error::SizeCap { n, cap: DENSE_CAP });
    }
    let inv_sqrt: Vec<f64> = op.mass().iter().map(|w| 1.0 / w.sqrt()).collect();
    let mut a = op.dense();
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] *= inv_sqrt[i] * inv_sqrt[j];
        }
    }
    let eig = SymmetricEigen::new(a);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));

    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(i);
        // fix the sign so that the first entry of significant size is positive
        let pivot = col.iter().find(|v| v.abs() > 1e-8).copied().unwrap_or(1.0);
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for r in 0..n {
            vectors[(r, k)] = sign * col[r] * inv_sqrt[r];
        }
    }
    let mut groups = Vec::with_capacity(n);
    for k in 0..n {
        let g = match k {
            0 => 0,
            _ if values[k] - values[k - 1] <= GROUP_TOL => groups[k - 1],
            _ => groups[k - 1] + 1,
        };
        groups.push(g);
    }
    Ok(Spectrum {
        values,
        vectors,
        groups,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::{build_beta, build_gamma, build_xi};
    use approx::assert_abs_diff_eq;

    fn plain(g: &Arc<Graph>) -> LaplacianOperator {
        laplacian(g, Convention::Plain, false).unwrap()
    }

    #[test]
    fn constant_is_in_kernel() {
        for g in [build_beta(2), build_gamma(3), build_xi(1)] {
            let op = plain(&g);
            let lu = op.apply(&vec![1.0; op.dim()]).unwrap();
            assert!(lu.iter().all(|v| v.abs() < 1e-14));
        }
    }

    #[test]
    fn gamma1_rotation_eigenvector() {
        let op = plain(&build_gamma(1));
        let lu = op.apply(&[2.0, -1.0, -1.0]).unwrap();
        assert_eq!(lu, vec![6.0, -3.0, -3.0]);
    }

    #[test]
    fn gamma2_trace() {
        let l = plain(&build_gamma(2)).dense();
        assert_abs_diff_eq!(l.trace(), 24.0);
    }

    #[test]
    fn gamma_spectra() {
        let s = dense_spectrum(&plain(&build_gamma(1))).unwrap();
        for (a, b) in s.values.iter().zip([0.0, 3.0, 3.0]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
        let r = 13f64.sqrt();
        let expected = [
            0.0,
            (5.0 - r) / 2.0,
            (5.0 - r) / 2.0,
            3.0,
            3.0,
            3.0,
            (5.0 + r) / 2.0,
            (5.0 + r) / 2.0,
            5.0,
        ];
        let s = dense_spectrum(&plain(&build_gamma(2))).unwrap();
        for (a, b) in s.values.iter().zip(expected) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-10);
        }
        assert_eq!(s.groups, vec![0, 1, 1, 2, 2, 2, 3, 3, 4]);
    }

    #[test]
    fn beta1_weighted_spectrum() {
        let op = laplacian(&build_beta(1), Convention::NeumannWeighted, false).unwrap();
        let s = dense_spectrum(&op).unwrap();
        for (a, b) in s.values.iter().zip([0.0, 3.0, 3.0, 6.0, 6.0, 6.0]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-10);
        }
        // M-orthonormal columns
        let mass = op.mass();
        for i in 0..6 {
            for j in 0..6 {
                let ip: f64 = (0..6)
                    .map(|r| mass[r] * s.vectors[(r, i)] * s.vectors[(r, j)])
                    .sum();
                assert_abs_diff_eq!(ip, if i == j { 1.0 } else { 0.0 }, epsilon = 1e-10);
            }
            assert!(op.residual(&s.vector(i), s.values[i]).unwrap() < 1e-10);
        }
    }

    #[test]
    fn weighted_rejected_on_cell_graph() {
        assert!(matches!(
            laplacian(&build_gamma(2), Convention::NeumannWeighted, false),
            Err(Error::UnsupportedGraph(_))
        ));
    }

    #[test]
    fn renormalized_sign() {
        let op = laplacian(&build_beta(2), Convention::Plain, true).unwrap();
        let mut u = vec![0.0; op.dim()];
        u[5] = 1.0;
        let lu = op.apply(&u).unwrap();
        let du = op.apply_renormalized(&u).unwrap();
        for (a, b) in lu.iter().zip(&du) {
            assert_abs_diff_eq!(*b, -37.5 * a);
        }
        assert!(plain(&build_beta(2)).apply_renormalized(&u).is_err());
    }

    #[test]
    fn size_cap() {
        let op = plain(&build_gamma(6));
        assert_eq!(
            dense_spectrum(&op).unwrap_err(),
            Error::SizeCap { n: 729, cap: 500 }
        );
    }
}
