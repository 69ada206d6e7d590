//! Spectral decimation on the SG graphs: the eigenvalue map between
//! consecutive levels, eigenfunction extension on Γ (explicit) and β
//! (per-cell local solve), averaging down, and continuation.

use std::sync::Arc;

use nalgebra::Matrix3;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::Fractal;
use crate::graphs::{
    build_beta, build_gamma, laplacian, point_embedding, Convention, Graph, GraphKind,
};
use crate::EIGEN_TOL;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Minus,
    Plus,
}

impl Branch {
    fn sign(self) -> f64 {
        match self {
            Branch::Minus => -1.0,
            Branch::Plus => 1.0,
        }
    }
}

/// Graph family an eigenvalue is continued on; decides the forbidden set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Target {
    Gamma,
    Beta,
}

impl Target {
    pub fn forbidden(self) -> [f64; 2] {
        match self {
            Target::Gamma => [3.0, 5.0],
            Target::Beta => [2.0, 5.0],
        }
    }

    fn is_forbidden(self, lambda: f64) -> bool {
        self.forbidden()
            .iter()
            .any(|f| (lambda - f).abs() <= EIGEN_TOL)
    }
}

/// `λ_m = λ_{m+1} (5 - λ_{m+1})`.
pub fn eigenvalue_down(next: f64) -> f64 {
    next * (5.0 - next)
}

/// The root `(5 ∓ √(25 - 4λ))/2` of the decimation map on the given branch.
pub fn eigenvalue_up(lambda: f64, branch: Branch, target: Target) -> Result<f64> {
    let disc = 25.0 - 4.0 * lambda;
    let disc = if disc < 0.0 {
        if disc > -1e-12 {
            0.0
        } else {
            return Err(Error::NegativeDiscriminant(lambda));
        }
    } else {
        disc
    };
    let next = (5.0 + branch.sign() * disc.sqrt()) / 2.0;
    if target.is_forbidden(next) {
        return Err(Error::ForbiddenEigenvalue(next));
    }
    Ok(next)
}

fn branch_of(next: f64) -> Branch {
    if next <= 2.5 {
        Branch::Minus
    } else {
        Branch::Plus
    }
}

/// Renormalized eigenvalue `(3/2) 5^m λ_m`.
pub fn renormalized(lambda: f64, level: usize) -> f64 {
    1.5 * 5f64.powi(level as i32) * lambda
}

/// Decimation history of one eigenvalue.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lineage {
    pub base: f64,
    pub birth_level: usize,
    pub branches: Vec<Branch>,
    /// Realized eigenvalue at levels `birth_level, birth_level + 1, ...`.
    pub eigenvalues: Vec<f64>,
}

impl Lineage {
    pub fn born(base: f64, level: usize) -> Self {
        Self {
            base,
            birth_level: level,
            branches: Vec::new(),
            eigenvalues: vec![base],
        }
    }

    pub fn current_level(&self) -> usize {
        self.birth_level + self.branches.len()
    }

    pub fn current(&self) -> f64 {
        *self
            .eigenvalues
            .last()
            .expect("lineage has a base eigenvalue")
    }

    fn push(&mut self, branch: Branch, next: f64) {
        self.branches.push(branch);
        self.eigenvalues.push(next);
    }

    /// Renormalized eigenvalues along the lineage, one per level.
    pub fn renormalized(&self) -> Vec<f64> {
        self.eigenvalues
            .iter()
            .enumerate()
            .map(|(i, &l)| renormalized(l, self.birth_level + i))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BranchPolicy {
    AllMinus,
    AllPlus,
    /// Explicit choices; continues with `Minus` once exhausted.
    Sequence(Vec<Branch>),
}

impl BranchPolicy {
    pub fn branch(&self, step: usize) -> Branch {
        match self {
            BranchPolicy::AllMinus => Branch::Minus,
            BranchPolicy::AllPlus => Branch::Plus,
            BranchPolicy::Sequence(s) => s.get(step).copied().unwrap_or(Branch::Minus),
        }
    }
}

/// An eigenfunction on a graph together with its eigenvalue and history.
#[derive(Debug, Clone)]
pub struct EigenFunction {
    pub graph: Arc<Graph>,
    pub convention: Convention,
    pub values: Vec<f64>,
    pub eigenvalue: f64,
    pub lineage: Option<Lineage>,
}

impl EigenFunction {
    pub fn new(graph: Arc<Graph>, values: Vec<f64>, eigenvalue: f64) -> Result<Self> {
        if values.len() != graph.num_vertices() {
            return Err(Error::DimensionMismatch {
                expected: graph.num_vertices(),
                found: values.len(),
            });
        }
        let convention = match graph.kind {
            GraphKind::Vertex => Convention::NeumannWeighted,
            GraphKind::Cell => Convention::Plain,
        };
        Ok(Self {
            graph,
            convention,
            values,
            eigenvalue,
            lineage: None,
        })
    }

    pub fn with_lineage(mut self, lineage: Lineage) -> Self {
        self.lineage = Some(lineage);
        self
    }

    pub fn level(&self) -> usize {
        self.graph.level
    }

    /// `‖L u - λ M u‖_∞ / ‖u‖_∞` in this function's convention.
    pub fn residual(&self) -> f64 {
        laplacian(&self.graph, self.convention, false)
            .and_then(|op| op.residual(&self.values, self.eigenvalue))
            .unwrap_or(f64::INFINITY)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    fn extended(&self, graph: Arc<Graph>, values: Vec<f64>, next: f64) -> EigenFunction {
        let lineage = self.lineage.clone().map(|mut l| {
            l.push(branch_of(next), next);
            l
        });
        EigenFunction {
            graph,
            convention: self.convention,
            values,
            eigenvalue: next,
            lineage,
        }
    }
}

fn require_sg(u: &EigenFunction, kind: GraphKind) -> Result<()> {
    if u.graph.fractal != Fractal::Sg || u.graph.kind != kind {
        return Err(Error::UnsupportedGraph(match kind {
            GraphKind::Cell => "extension expects a Γ eigenfunction",
            GraphKind::Vertex => "extension expects a β eigenfunction",
        }));
    }
    Ok(())
}

fn require_root(lambda: f64, next: f64) -> Result<()> {
    let down = eigenvalue_down(next);
    if (down - lambda).abs() > EIGEN_TOL * lambda.abs().max(1.0) {
        return Err(Error::NotADecimationRoot {
            eigenvalue: lambda,
            next,
        });
    }
    Ok(())
}

/// Extends a Γ_m eigenfunction to Γ_{m+1}.
///
/// The child of `X` at corner `j` gets
/// `(3(4-λ')u(X) + 3u(W)) / ((3-λ')(5-λ'))`, where `W` is the cell meeting
/// `X` at that corner. At a fractal corner there is no `W` and the value
/// is `3u(X)/(3-λ')`, which is the same expression with `W = X`.
pub fn extend_gamma(u: &EigenFunction, next: f64) -> Result<EigenFunction> {
    require_sg(u, GraphKind::Cell)?;
    if Target::Gamma.is_forbidden(next) {
        return Err(Error::ForbiddenEigenvalue(next));
    }
    require_root(u.eigenvalue, next)?;
    let coarse = &u.graph;
    let fine = build_gamma(coarse.level + 1);
    let denom = (3.0 - next) * (5.0 - next);
    let mut values = vec![0.0; fine.num_vertices()];
    for x in 0..coarse.num_cells() {
        for (j, &p) in coarse.cell_corners[x].iter().enumerate() {
            let w = coarse
                .cells_at_point(p)
                .iter()
                .copied()
                .find(|&c| c != x)
                .unwrap_or(x);
            values[3 * x + j] = (3.0 * (4.0 - next) * u.values[x] + 3.0 * u.values[w]) / denom;
        }
    }
    Ok(u.extended(fine, values, next))
}

/// Matrix of the eigen-equations at the three new midpoints of one cell:
/// `((5-λ') I - J) x = r` where `r_ij = u_i + u_j`.
pub fn local_system(next: f64) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| if i == j { 4.0 - next } else { -1.0 })
}

/// `(2-λ')(5-λ')²`.
pub fn local_determinant(next: f64) -> f64 {
    (2.0 - next) * (5.0 - next).powi(2)
}

/// Midpoint values `[x01, x12, x02]` of a cell with corner values `u`.
fn solve_cell(u: [f64; 3], next: f64) -> [f64; 3] {
    let r = [u[0] + u[1], u[1] + u[2], u[0] + u[2]];
    let s = (r[0] + r[1] + r[2]) / (2.0 - next);
    r.map(|ri| (ri + s) / (5.0 - next))
}

/// Extends a β_m Neumann eigenfunction to β_{m+1}: old vertices keep their
/// values, the three midpoints of every cell solve the local system.
pub fn extend_beta(u: &EigenFunction, next: f64) -> Result<EigenFunction> {
    require_sg(u, GraphKind::Vertex)?;
    if Target::Beta.is_forbidden(next) {
        return Err(Error::SingularLocalSystem(next));
    }
    require_root(u.eigenvalue, next)?;
    let coarse = &u.graph;
    let fine = build_beta(coarse.level + 1);
    let values = extend_vertex_values(coarse, &fine, &u.values, next)?;
    Ok(u.extended(fine, values, next))
}

/// Raw β extension of a value vector, without eigen bookkeeping.
pub fn extend_vertex_values(
    coarse: &Graph,
    fine: &Graph,
    values: &[f64],
    next: f64,
) -> Result<Vec<f64>> {
    let embed = point_embedding(coarse, fine)?;
    let mut out = vec![0.0; fine.num_vertices()];
    for (p, &q) in embed.iter().enumerate() {
        out[q] = values[p];
    }
    let mids: Vec<([usize; 3], [f64; 3])> = coarse
        .cell_corners
        .par_iter()
        .enumerate()
        .map(|(cell, &[a, b, c])| {
            let ids = [
                fine.cell_corners[3 * cell][1],
                fine.cell_corners[3 * cell + 1][2],
                fine.cell_corners[3 * cell][2],
            ];
            (ids, solve_cell([values[a], values[b], values[c]], next))
        })
        .collect();
    for (ids, x) in mids {
        for k in 0..3 {
            out[ids[k]] = x[k];
        }
    }
    Ok(out)
}

/// Values on the next coarser level: children means on cell graphs,
/// restriction to the coarse points on vertex graphs.
pub fn average_down(u: &EigenFunction) -> Result<Vec<f64>> {
    average_down_values(&u.graph, &u.values)
}

pub fn average_down_values(graph: &Graph, values: &[f64]) -> Result<Vec<f64>> {
    if graph.level == 0 {
        return Err(Error::LevelMismatch {
            expected: 1,
            found: 0,
        });
    }
    match graph.kind {
        GraphKind::Cell => {
            let a = graph.fractal.alphabet() as usize;
            Ok(values
                .chunks(a)
                .map(|c| c.iter().sum::<f64>() / a as f64)
                .collect())
        }
        GraphKind::Vertex => {
            let coarse = crate::graphs::build_vertex_graph(graph.fractal, graph.level - 1);
            let embed = point_embedding(&coarse, graph)?;
            Ok(embed.iter().map(|&q| values[q]).collect())
        }
    }
}

/// Repeatedly extends `u` until it lives on `level`.
pub fn continue_to_level(
    u: &EigenFunction,
    level: usize,
    policy: &BranchPolicy,
) -> Result<EigenFunction> {
    if level < u.level() {
        return Err(Error::LevelMismatch {
            expected: u.level(),
            found: level,
        });
    }
    let mut current = u.clone();
    for step in 0..level - u.level() {
        let branch = policy.branch(step);
        current = match current.graph.kind {
            GraphKind::Cell => {
                let next = eigenvalue_up(current.eigenvalue, branch, Target::Gamma)?;
                extend_gamma(&current, next)?
            }
            GraphKind::Vertex => {
                let next = eigenvalue_up(current.eigenvalue, branch, Target::Beta).map_err(
                    |e| match e {
                        Error::ForbiddenEigenvalue(v) => Error::SingularLocalSystem(v),
                        other => other,
                    },
                )?;
                extend_beta(&current, next)?
            }
        };
    }
    Ok(current)
}

/// Eigenvalue-only continuation from `from` to `to`.
pub fn continue_eigenvalue(
    lambda: f64,
    from: usize,
    to: usize,
    policy: &BranchPolicy,
    target: Target,
) -> Result<Lineage> {
    let mut lineage = Lineage::born(lambda, from);
    for step in 0..to.saturating_sub(from) {
        let branch = policy.branch(step);
        let next = eigenvalue_up(lineage.current(), branch, target)?;
        lineage.push(branch, next);
    }
    Ok(lineage)
}
