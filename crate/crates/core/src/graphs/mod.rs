//! Graph approximations: β_m, Γ_m for SG and ζ_m, ξ_m for SG₃.
//!
//! Every graph carries the underlying level-m cells together with their
//! deduplicated corner points, so both kinds share the same bookkeeping:
//! a vertex graph's vertices are the points, a cell graph's vertices are
//! the cells (in lexicographic word order).

mod laplacian;

use std::collections::{BTreeSet, HashMap};
use std::sync::{Arc, Mutex, OnceLock};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{cell_corners, child_corners, Fractal, Point2, Word, CORNERS};

pub use laplacian::{
    dense_spectrum, laplacian, Convention, LaplacianOperator, Spectrum, DENSE_CAP,
};

/// Absolute tolerance for identifying coincident points.
pub const POINT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphKind {
    Vertex,
    Cell,
}

/// Compressed adjacency lists.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    offsets: Vec<usize>,
    targets: Vec<usize>,
}

impl Csr {
    fn from_lists(lists: Vec<Vec<usize>>) -> Self {
        let mut offsets = Vec::with_capacity(lists.len() + 1);
        let mut targets = Vec::new();
        offsets.push(0);
        for list in lists {
            targets.extend(list);
            offsets.push(targets.len());
        }
        Self { offsets, targets }
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.targets[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone)]
pub struct Graph {
    pub kind: GraphKind,
    pub fractal: Fractal,
    pub level: usize,
    /// Distinct corner points of the level cells, first-encounter order.
    pub points: Vec<Point2>,
    /// Whether each point is one of the three fractal corners.
    pub point_boundary: Vec<bool>,
    /// Corner point ids per cell, cells in lexicographic order.
    pub cell_corners: Vec<[usize; 3]>,
    point_cells: Csr,
    adjacency: Csr,
    boundary: Vec<bool>,
}

impl Graph {
    pub fn num_vertices(&self) -> usize {
        self.adjacency.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cell_corners.len()
    }

    pub fn num_edges(&self) -> usize {
        (0..self.num_vertices())
            .map(|i| self.degree(i))
            .sum::<usize>()
            / 2
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        self.adjacency.row(v)
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency.row(v).len()
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.boundary[v]
    }

    pub fn boundary(&self) -> &[bool] {
        &self.boundary
    }

    /// Cells having `point` as a corner.
    pub fn cells_at_point(&self, point: usize) -> &[usize] {
        self.point_cells.row(point)
    }

    pub fn word(&self, cell: usize) -> Word {
        Word::from_index(self.fractal, self.level, cell)
    }

    pub fn cell_index(&self, word: &Word) -> Result<usize> {
        if word.fractal() != self.fractal || word.level() != self.level {
            return Err(Error::UnknownCell(word.to_string()));
        }
        Ok(word.index())
    }

    /// Child cells (one level finer) of a cell: contiguous in lexicographic order.
    pub fn children(&self, cell: usize) -> std::ops::Range<usize> {
        let a = self.fractal.alphabet() as usize;
        cell * a..(cell + 1) * a
    }

    pub fn parent(&self, cell: usize) -> usize {
        cell / self.fractal.alphabet() as usize
    }

    /// Planar position of a vertex: the point itself, or a cell's centroid.
    pub fn position(&self, v: usize) -> Point2 {
        match self.kind {
            GraphKind::Vertex => self.points[v],
            GraphKind::Cell => {
                let [a, b, c] = self.cell_corners[v];
                let (pa, pb, pc) = (self.points[a], self.points[b], self.points[c]);
                Point2::new((pa.x + pb.x + pc.x) / 3.0, (pa.y + pb.y + pc.y) / 3.0)
            }
        }
    }

    /// Mean of the three corner values of every cell of a vertex graph.
    pub fn cell_means(&self, values: &[f64]) -> Vec<f64> {
        self.cell_corners
            .iter()
            .map(|&[a, b, c]| (values[a] + values[b] + values[c]) / 3.0)
            .collect()
    }

    pub fn export(&self) -> GraphExport {
        let vertices = (0..self.num_vertices())
            .map(|id| match self.kind {
                GraphKind::Vertex => VertexExport {
                    id,
                    word: None,
                    coords: Some([self.points[id].x, self.points[id].y]),
                    boundary: self.boundary[id],
                },
                GraphKind::Cell => VertexExport {
                    id,
                    word: Some(self.word(id).digits().to_vec()),
                    coords: None,
                    boundary: self.boundary[id],
                },
            })
            .collect();
        let mut edges = Vec::with_capacity(self.num_edges());
        for i in 0..self.num_vertices() {
            for &j in self.neighbors(i) {
                if i < j {
                    edges.push([i, j]);
                }
            }
        }
        GraphExport {
            kind: self.kind,
            fractal: self.fractal,
            level: self.level,
            vertices,
            edges,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VertexExport {
    pub id: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub word: Option<Vec<u8>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coords: Option<[f64; 2]>,
    pub boundary: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct GraphExport {
    pub kind: GraphKind,
    pub fractal: Fractal,
    pub level: usize,
    pub vertices: Vec<VertexExport>,
    pub edges: Vec<[usize; 2]>,
}

/// Deduplicates points on a 1e-9 grid, checking the neighbouring buckets so
/// that values straddling a bucket edge still merge.
struct PointSet {
    points: Vec<Point2>,
    buckets: HashMap<(i64, i64), usize>,
}

impl PointSet {
    fn new() -> Self {
        Self {
            points: Vec::new(),
            buckets: HashMap::new(),
        }
    }

    fn key(p: Point2) -> (i64, i64) {
        (
            (p.x / POINT_TOL).round() as i64,
            (p.y / POINT_TOL).round() as i64,
        )
    }

    fn insert(&mut self, p: Point2) -> usize {
        let (kx, ky) = Self::key(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(&id) = self.buckets.get(&(kx + dx, ky + dy)) {
                    if self.points[id].dist(p) <= POINT_TOL {
                        return id;
                    }
                }
            }
        }
        let id = self.points.len();
        self.points.push(p);
        self.buckets.insert((kx, ky), id);
        id
    }
}

fn level_cells(fractal: Fractal, m: usize) -> Vec<[Point2; 3]> {
    let mut cells = vec![cell_corners(&Word::empty(fractal))];
    for _ in 0..m {
        cells = cells
            .iter()
            .flat_map(|c| (0..fractal.alphabet()).map(move |d| child_corners(fractal, c, d)))
            .collect();
    }
    cells
}

fn build(kind: GraphKind, fractal: Fractal, m: usize) -> Graph {
    let cells = level_cells(fractal, m);
    let mut set = PointSet::new();
    let cell_corners: Vec<[usize; 3]> = cells
        .iter()
        .map(|c| [set.insert(c[0]), set.insert(c[1]), set.insert(c[2])])
        .collect();
    let points = set.points;
    let point_boundary: Vec<bool> = points
        .iter()
        .map(|p| CORNERS.iter().any(|q| q.dist(*p) <= POINT_TOL))
        .collect();

    let mut point_lists = vec![Vec::new(); points.len()];
    for (cell, corners) in cell_corners.iter().enumerate() {
        for &p in corners {
            point_lists[p].push(cell);
        }
    }

    let (adjacency, boundary) = match kind {
        GraphKind::Vertex => {
            let mut lists = vec![BTreeSet::new(); points.len()];
            for &[a, b, c] in &cell_corners {
                for (x, y) in [(a, b), (b, c), (a, c)] {
                    lists[x].insert(y);
                    lists[y].insert(x);
                }
            }
            let lists = lists.into_iter().map(|s| s.into_iter().collect()).collect();
            (Csr::from_lists(lists), point_boundary.clone())
        }
        GraphKind::Cell => {
            let mut lists = vec![BTreeSet::new(); cell_corners.len()];
            for shared in &point_lists {
                for &x in shared {
                    for &y in shared {
                        if x != y {
                            lists[x].insert(y);
                        }
                    }
                }
            }
            let lists = lists.into_iter().map(|s| s.into_iter().collect()).collect();
            let boundary = cell_corners
                .iter()
                .map(|c| c.iter().any(|&p| point_boundary[p]))
                .collect();
            (Csr::from_lists(lists), boundary)
        }
    };

    Graph {
        kind,
        fractal,
        level: m,
        points,
        point_boundary,
        cell_corners,
        point_cells: Csr::from_lists(point_lists),
        adjacency,
        boundary,
    }
}

type CacheKey = (GraphKind, Fractal, usize);

fn cache() -> &'static Mutex<HashMap<CacheKey, Arc<Graph>>> {
    static CACHE: OnceLock<Mutex<HashMap<CacheKey, Arc<Graph>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn cached(kind: GraphKind, fractal: Fractal, m: usize) -> Arc<Graph> {
    let key = (kind, fractal, m);
    if let Some(g) = cache().lock().expect("graph cache poisoned").get(&key) {
        return Arc::clone(g);
    }
    let graph = Arc::new(build(kind, fractal, m));
    let mut guard = cache().lock().expect("graph cache poisoned");
    Arc::clone(guard.entry(key).or_insert(graph))
}

pub fn build_vertex_graph(fractal: Fractal, m: usize) -> Arc<Graph> {
    cached(GraphKind::Vertex, fractal, m)
}

pub fn build_cell_graph(fractal: Fractal, m: usize) -> Arc<Graph> {
    cached(GraphKind::Cell, fractal, m)
}

/// β_m: vertex graph of SG.
pub fn build_beta(m: usize) -> Arc<Graph> {
    cached(GraphKind::Vertex, Fractal::Sg, m)
}

/// Γ_m: cell graph of SG, cells adjacent when they share a corner.
pub fn build_gamma(m: usize) -> Arc<Graph> {
    cached(GraphKind::Cell, Fractal::Sg, m)
}

/// ζ_m: vertex graph of SG₃.
pub fn build_zeta(m: usize) -> Arc<Graph> {
    cached(GraphKind::Vertex, Fractal::Sg3, m)
}

/// ξ_m: cell graph of SG₃.
pub fn build_xi(m: usize) -> Arc<Graph> {
    cached(GraphKind::Cell, Fractal::Sg3, m)
}

/// For a vertex graph at level m and the one at level m+1, the id at
/// level m+1 of every level-m point (corner `i` of cell `w` is corner `i`
/// of its child `w·i`).
pub fn point_embedding(coarse: &Graph, fine: &Graph) -> Result<Vec<usize>> {
    if fine.level != coarse.level + 1 || fine.fractal != coarse.fractal {
        return Err(Error::LevelMismatch {
            expected: coarse.level + 1,
            found: fine.level,
        });
    }
    let a = coarse.fractal.alphabet() as usize;
    let mut map = vec![usize::MAX; coarse.points.len()];
    for (cell, corners) in coarse.cell_corners.iter().enumerate() {
        for (i, &p) in corners.iter().enumerate() {
            map[p] = fine.cell_corners[cell * a + i][i];
        }
    }
    Ok(map)
}

/// Battery-chain cycles of Γ_m, one around each removed upside-down
/// triangle, as cell indices in clockwise order starting at the
/// lexicographically smallest cell.
///
/// The triangle removed from cell `v` is bounded by the sides of `v1`
/// (corner 0 to 2), `v2` (corner 1 to 0) and `v0` (corner 2 to 1); at
/// relative depth `n` each side is lined by `2^n` cells, so only the
/// deepest triangles give literal hexagons.
pub fn hexagon_cycles(m: usize) -> Vec<Vec<usize>> {
    let mut cycles = Vec::new();
    for k in 1..m {
        let depth = m - k;
        for v in 0..3usize.pow((k - 1) as u32) {
            let side = |child: usize, from: usize, to: usize| -> Vec<usize> {
                (0..1usize << depth)
                    .map(|bits| {
                        let mut index = v * 3 + child;
                        for pos in (0..depth).rev() {
                            let digit = if bits >> pos & 1 == 0 { from } else { to };
                            index = index * 3 + digit;
                        }
                        index
                    })
                    .collect()
            };
            let mut cycle = side(1, 0, 2);
            cycle.extend(side(2, 1, 0));
            cycle.extend(side(0, 2, 1));
            let start = (0..cycle.len())
                .min_by_key(|&i| cycle[i])
                .expect("cycle is nonempty");
            cycle.rotate_left(start);
            cycles.push(cycle);
        }
    }
    cycles
}
