//! Refinement of a single cell.
//!
//! β extension inside a cell only sees that cell's three corner values, and
//! it is linear in them. So continuing an eigenfunction from level m to
//! level m + d amounts to applying, on every m-cell, a fixed matrix that
//! maps the corner values to the values at all depth-d points of the cell.
//! One such matrix per distinct eigenvalue replaces materializing β_{m+d}.

use nalgebra::DMatrix;

use crate::decimation::{eigenvalue_up, Branch, Target};
use crate::error::Result;

/// Nested subdivision of one reference triangle. Points of depth `l` come
/// first, so the points of every coarser depth form a prefix.
#[derive(Debug, Clone)]
pub struct LocalMesh {
    pub depth: usize,
    /// Corner point ids per cell, one list per depth, lexicographic order.
    pub cells: Vec<Vec<[usize; 3]>>,
}

impl LocalMesh {
    pub fn new(depth: usize) -> Self {
        let mut cells = vec![vec![[0usize, 1, 2]]];
        let mut next_point = 3;
        for _ in 0..depth {
            let prev = cells.last().expect("mesh has a root cell");
            let mut level = Vec::with_capacity(prev.len() * 3);
            for &[a, b, c] in prev {
                let (m01, m12, m02) = (next_point, next_point + 1, next_point + 2);
                next_point += 3;
                level.push([a, m01, m02]);
                level.push([m01, b, m12]);
                level.push([m02, m12, c]);
            }
            cells.push(level);
        }
        Self { depth, cells }
    }

    pub fn num_points(&self, depth: usize) -> usize {
        (3usize.pow(depth as u32 + 1) + 3) / 2
    }
}

/// Corner-to-fine maps for a set of eigenvalue groups, all continued on the
/// minus branch. Column `3g + j` is the response to a unit value at
/// corner `j` for group `g`.
#[derive(Debug, Clone)]
pub struct RefinementKernel {
    pub depth: usize,
    /// Level-m eigenvalue of each group.
    pub eigenvalues: Vec<f64>,
    /// Values at all depth-d points.
    pub values: DMatrix<f64>,
    /// Corner means of the depth-d cells.
    pub averages: DMatrix<f64>,
    /// Corner means of the depth-(d-1) cells, when d >= 1.
    pub coarse_averages: Option<DMatrix<f64>>,
    /// Number of depth-(d-1) points (a prefix of the rows of `values`).
    pub coarse_points: usize,
}

fn cell_means(mesh: &LocalMesh, depth: usize, values: &DMatrix<f64>) -> DMatrix<f64> {
    let cells = &mesh.cells[depth];
    DMatrix::from_fn(cells.len(), values.ncols(), |r, c| {
        let [a, b, d] = cells[r];
        (values[(a, c)] + values[(b, c)] + values[(d, c)]) / 3.0
    })
}

impl RefinementKernel {
    pub fn new(eigenvalues: &[f64], depth: usize) -> Result<Self> {
        let mesh = LocalMesh::new(depth);
        let n = mesh.num_points(depth);
        let groups = eigenvalues.len();
        let mut values = DMatrix::zeros(n, 3 * groups);
        for (g, &lambda) in eigenvalues.iter().enumerate() {
            for j in 0..3 {
                values[(j, 3 * g + j)] = 1.0;
            }
            let mut current = lambda;
            let mut next_point = 3;
            for level in 0..depth {
                let next = eigenvalue_up(current, Branch::Minus, Target::Beta)?;
                for &[a, b, c] in &mesh.cells[level] {
                    for col in 3 * g..3 * g + 3 {
                        let (ua, ub, uc) = (values[(a, col)], values[(b, col)], values[(c, col)]);
                        let r = [ua + ub, ub + uc, ua + uc];
                        let s = (r[0] + r[1] + r[2]) / (2.0 - next);
                        for (k, rk) in r.iter().enumerate() {
                            values[(next_point + k, col)] = (rk + s) / (5.0 - next);
                        }
                    }
                    next_point += 3;
                }
                current = next;
            }
        }
        let averages = cell_means(&mesh, depth, &values);
        let coarse_averages = (depth > 0).then(|| cell_means(&mesh, depth - 1, &values));
        let coarse_points = if depth > 0 {
            mesh.num_points(depth - 1)
        } else {
            n
        };
        Ok(Self {
            depth,
            eigenvalues: eigenvalues.to_vec(),
            values,
            averages,
            coarse_averages,
            coarse_points,
        })
    }

    pub fn groups(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Continuous-average weights: mean over depth-d cells, per column.
    pub fn mean_row(&self) -> Vec<f64> {
        column_means(&self.averages)
    }

    pub fn coarse_mean_row(&self) -> Option<Vec<f64>> {
        self.coarse_averages.as_ref().map(column_means)
    }
}

fn column_means(m: &DMatrix<f64>) -> Vec<f64> {
    (0..m.ncols()).map(|c| m.column(c).mean()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decimation::{extend_beta, EigenFunction};
    use crate::eigenbasis::beta_neumann_basis;

    #[test]
    fn mesh_sizes() {
        let mesh = LocalMesh::new(3);
        assert_eq!(mesh.cells[3].len(), 27);
        let max = mesh.cells[3].iter().flatten().max().copied().unwrap();
        assert_eq!(max + 1, mesh.num_points(3));
    }

    #[test]
    fn constant_stays_constant() {
        let k = RefinementKernel::new(&[0.0], 4).unwrap();
        for r in 0..k.values.nrows() {
            let s: f64 = (0..3).map(|c| k.values[(r, c)]).sum();
            assert!((s - 1.0).abs() < 1e-13);
        }
        for v in k.mean_row() {
            assert!((v - 1.0 / 3.0).abs() < 1e-13);
        }
    }

    #[test]
    fn kernel_matches_graph_extension() {
        // β_1 eigenfunction continued two levels, compared point by point
        // through the cell averages at the finest level.
        let basis = beta_neumann_basis(1).unwrap();
        let u: &EigenFunction = &basis.members[1];
        let l1 = eigenvalue_up(u.eigenvalue, Branch::Minus, Target::Beta).unwrap();
        let v = extend_beta(u, l1).unwrap();
        let l2 = eigenvalue_up(l1, Branch::Minus, Target::Beta).unwrap();
        let w = extend_beta(&v, l2).unwrap();
        let fine_means = w.graph.cell_means(&w.values);

        let kernel = RefinementKernel::new(&[u.eigenvalue], 2).unwrap();
        for (cell, &[a, b, c]) in u.graph.cell_corners.iter().enumerate() {
            let corners = [u.values[a], u.values[b], u.values[c]];
            for sub in 0..9 {
                let mean: f64 = (0..3).map(|j| kernel.averages[(sub, j)] * corners[j]).sum();
                assert!((mean - fine_means[cell * 9 + sub]).abs() < 1e-12);
            }
        }
    }
}
