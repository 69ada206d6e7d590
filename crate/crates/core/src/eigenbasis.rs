//! Eigenbases: the recursive 3^m basis of Γ_m and the dense Neumann basis
//! of β_m with its bandlimited part.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::decimation::{
    eigenvalue_down, eigenvalue_up, extend_gamma, Branch, EigenFunction, Lineage, Target,
};
use crate::error::{Error, Result};
use crate::graphs::{
    build_beta, build_gamma, dense_spectrum, hexagon_cycles, laplacian, Convention, Graph,
    DENSE_CAP,
};
use crate::EIGEN_TOL;

/// Distance to 6 below which a β eigenvalue counts as the exceptional one.
pub const SIX_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    /// Γ_1 starting functions.
    Base,
    Extended,
    BornHexagon,
    BornBoundary3,
    BornEdge3,
    DenseOracle,
}

#[derive(Debug, Clone)]
pub struct Basis {
    pub graph: Arc<Graph>,
    pub convention: Convention,
    pub members: Vec<EigenFunction>,
    pub provenance: Vec<Provenance>,
}

impl Basis {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn count(&self, kind: Provenance) -> usize {
        self.provenance.iter().filter(|&&p| p == kind).count()
    }

    pub fn count_eigenvalue(&self, lambda: f64, tol: f64) -> usize {
        self.members
            .iter()
            .filter(|u| (u.eigenvalue - lambda).abs() <= tol)
            .count()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.members.iter().map(|u| u.eigenvalue).collect()
    }

    /// Members as columns.
    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.graph.num_vertices();
        DMatrix::from_fn(n, self.len(), |r, c| self.members[c].values[r])
    }

    pub fn push(&mut self, member: EigenFunction, provenance: Provenance) {
        self.members.push(member);
        self.provenance.push(provenance);
    }

    pub fn export(&self) -> Vec<MemberExport> {
        self.members
            .iter()
            .zip(&self.provenance)
            .map(|(u, &p)| MemberExport {
                eigenvalue: u.eigenvalue,
                provenance: p,
                values: u.values.clone(),
            })
            .collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MemberExport {
    pub eigenvalue: f64,
    pub provenance: Provenance,
    pub values: Vec<f64>,
}

fn born(graph: &Arc<Graph>, values: Vec<f64>, lambda: f64) -> EigenFunction {
    EigenFunction::new(Arc::clone(graph), values, lambda)
        .expect("values sized from the graph")
        .with_lineage(Lineage::born(lambda, graph.level))
}

/// Eigenvalue-3 pattern on the Γ_2 copy `copy` (a level m-2 cell) of Γ_m,
/// centred at the copy's corner `c`: 2 on the corner cell, -1 on the cells
/// touching it, 1 on the pair joining the other two corners, 0 there.
fn add_corner_pattern(values: &mut [f64], copy: usize, c: usize, scale: f64) {
    for x in 0..3 {
        for y in 0..3 {
            let v = if x == c && y == c {
                2.0
            } else if x == c || y == c {
                -1.0
            } else if x != y {
                1.0
            } else {
                0.0
            };
            values[copy * 9 + x * 3 + y] += scale * v;
        }
    }
}

/// The complete eigenbasis of plain L on Γ_m built by decimation:
/// extensions of Γ_{m-1} (the constant on the minus branch only), one
/// alternating chain per hexagon cycle (λ = 5), and the boundary- and
/// edge-type eigenfunctions with λ = 3.
pub fn gamma_basis(m: usize) -> Result<Basis> {
    if m == 0 {
        return Err(Error::InvalidArgument("gamma_basis needs m >= 1".into()));
    }
    let graph = build_gamma(m);
    let mut basis = Basis {
        graph: Arc::clone(&graph),
        convention: Convention::Plain,
        members: Vec::with_capacity(graph.num_vertices()),
        provenance: Vec::with_capacity(graph.num_vertices()),
    };
    if m == 1 {
        basis.push(born(&graph, vec![1.0; 3], 0.0), Provenance::Base);
        basis.push(born(&graph, vec![2.0, -1.0, -1.0], 3.0), Provenance::Base);
        basis.push(born(&graph, vec![-1.0, 2.0, -1.0], 3.0), Provenance::Base);
        return Ok(basis);
    }

    let coarse = gamma_basis(m - 1)?;
    for u in &coarse.members {
        let branches: &[Branch] = if u.eigenvalue.abs() <= EIGEN_TOL {
            &[Branch::Minus]
        } else {
            &[Branch::Minus, Branch::Plus]
        };
        for &b in branches {
            let next = eigenvalue_up(u.eigenvalue, b, Target::Gamma)?;
            basis.push(extend_gamma(u, next)?, Provenance::Extended);
        }
    }

    for cycle in hexagon_cycles(m) {
        let mut values = vec![0.0; graph.num_vertices()];
        for (i, &cell) in cycle.iter().enumerate() {
            values[cell] = if i % 2 == 0 { -1.0 } else { 1.0 };
        }
        basis.push(born(&graph, values, 5.0), Provenance::BornHexagon);
    }

    // boundary copies: prefix c^{m-2}
    let copies = 3usize.pow((m - 2) as u32);
    for c in 0..3 {
        let copy = c * (copies - 1) / 2;
        let mut values = vec![0.0; graph.num_vertices()];
        add_corner_pattern(&mut values, copy, c, 1.0);
        basis.push(born(&graph, values, 3.0), Provenance::BornBoundary3);
    }

    // one per edge of Γ_{m-2}, joining two copies at a shared corner
    let skeleton = build_gamma(m - 2);
    for p in 0..skeleton.num_cells() {
        for &q in skeleton.neighbors(p) {
            if q < p {
                continue;
            }
            let (i, j) = shared_corner(&skeleton, p, q).ok_or(Error::UnsupportedGraph(
                "adjacent cells without a shared corner",
            ))?;
            let mut values = vec![0.0; graph.num_vertices()];
            add_corner_pattern(&mut values, p, i, 1.0);
            add_corner_pattern(&mut values, q, j, 1.0);
            basis.push(born(&graph, values, 3.0), Provenance::BornEdge3);
        }
    }
    Ok(basis)
}

/// Corner slots `(i, j)` with corner `i` of `p` equal to corner `j` of `q`.
fn shared_corner(g: &Graph, p: usize, q: usize) -> Option<(usize, usize)> {
    let (a, b) = (g.cell_corners[p], g.cell_corners[q]);
    (0..3).find_map(|i| (0..3).find(|&j| a[i] == b[j]).map(|j| (i, j)))
}

/// Decimation lineage of a β_m Neumann eigenvalue, found by walking the
/// eigenvalue down. Births: 6 at any level, 5 at levels >= 2, and every
/// value at level 1; 3 at level >= 2 descends to 6 on the plus branch.
pub fn beta_lineage(lambda: f64, level: usize) -> Lineage {
    let tol = 1e-6;
    let mut chain = vec![(lambda, level)];
    let mut current = lambda;
    let mut k = level;
    while k > 1 && (current - 6.0).abs() > tol && (current - 5.0).abs() > tol {
        current = eigenvalue_down(current);
        k -= 1;
        chain.push((current, k));
    }
    let (base, birth) = *chain.last().expect("chain starts nonempty");
    let base = [0.0, 3.0, 5.0, 6.0]
        .into_iter()
        .find(|b| (b - base).abs() <= tol)
        .unwrap_or(base);
    let mut lineage = Lineage::born(base, birth);
    for &(l, _) in chain.iter().rev().skip(1) {
        lineage.branches.push(if l <= 2.5 {
            Branch::Minus
        } else {
            Branch::Plus
        });
        lineage.eigenvalues.push(l);
    }
    lineage
}

/// All Neumann eigenfunctions of β_m from the dense generalized solver,
/// M-orthonormal, each tagged with its decimation lineage.
pub fn beta_neumann_basis(m: usize) -> Result<Basis> {
    let graph = build_beta(m);
    let op = laplacian(&graph, Convention::NeumannWeighted, false)?;
    let spectrum = dense_spectrum(&op)?;
    let members = (0..spectrum.len())
        .map(|k| {
            let lambda = spectrum.values[k];
            EigenFunction::new(Arc::clone(&graph), spectrum.vector(k), lambda)
                .map(|u| u.with_lineage(beta_lineage(lambda, m)))
        })
        .collect::<Result<Vec<_>>>()?;
    let provenance = vec![Provenance::DenseOracle; members.len()];
    Ok(Basis {
        graph,
        convention: Convention::NeumannWeighted,
        members,
        provenance,
    })
}

/// The Neumann eigenfunctions of β_m other than those with eigenvalue 6.
pub fn bandlimited_basis(m: usize) -> Result<Basis> {
    let full = beta_neumann_basis(m)?;
    let mut basis = Basis {
        graph: Arc::clone(&full.graph),
        convention: full.convention,
        members: Vec::new(),
        provenance: Vec::new(),
    };
    for (u, p) in full.members.into_iter().zip(full.provenance) {
        if (u.eigenvalue - 6.0).abs() > SIX_TOL {
            basis.push(u, p);
        }
    }
    let expected = 3usize.pow(m as u32);
    if basis.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            found: basis.len(),
        });
    }
    Ok(basis)
}

#[derive(Debug, Clone, Serialize)]
pub struct BasisReport {
    pub members: usize,
    pub dimension: usize,
    pub rank: usize,
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    /// Sorted member eigenvalues against the dense spectrum; `None` when the
    /// graph exceeds the dense cap.
    pub max_spectrum_error: Option<f64>,
}

impl BasisReport {
    pub fn passes(&self, residual_tol: f64, spectrum_tol: f64) -> bool {
        self.rank == self.members
            && self.members == self.dimension
            && self.max_residual <= residual_tol
            && self.max_spectrum_error.is_some_and(|e| e <= spectrum_tol)
    }
}

/// Numerical rank from singular values with a relative threshold.
pub fn numerical_rank(matrix: &DMatrix<f64>, rel_tol: f64) -> usize {
    if matrix.is_empty() {
        return 0;
    }
    let sv = matrix.singular_values();
    let top = sv.iter().fold(0.0f64, |a, &s| a.max(s));
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * top).count()
}

pub fn verify_basis(basis: &Basis) -> BasisReport {
    let residuals: Vec<f64> = basis.members.iter().map(|u| u.residual()).collect();
    let max_residual = residuals.iter().fold(0.0f64, |a, &r| a.max(r));
    let rank = numerical_rank(&basis.matrix(), 1e-8);
    let dimension = basis.graph.num_vertices();
    let max_spectrum_error = if dimension <= DENSE_CAP {
        laplacian(&basis.graph, basis.convention, false)
            .and_then(|op| dense_spectrum(&op))
            .ok()
            .map(|s| {
                let mut mine = basis.eigenvalues();
                mine.sort_by(f64::total_cmp);
                if mine.len() != s.values.len() {
                    return f64::INFINITY;
                }
                mine.iter()
                    .zip(&s.values)
                    .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()))
            })
    } else {
        None
    };
    BasisReport {
        members: basis.len(),
        dimension,
        rank,
        residuals,
        max_residual,
        max_spectrum_error,
    }
}
