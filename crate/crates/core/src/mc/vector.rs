use std::collections::VecDeque;

use super::{cell_corners, linear_crossing, tables::CORNERS, triangulate};
use crate::error::{Error, Result};
use crate::field::{FieldGrid, FieldKind, GridSpec};
use crate::geometry::{TriMesh, Vec3};
use crate::grid_ops::{divergence_of, normalize, VectorGrid, DEFAULT_SURFACE_THRESHOLD};

/// Corner norms at or above this on both ends of an edge carry no distance
/// information; the crossing goes to the edge midpoint.
const UNINFORMATIVE_NORM: f64 = 0.999;

/// How a neighbor cell picks its positive cluster during region growing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OrientationRule {
    /// The cluster direction most aligned with the current positive direction.
    #[default]
    Alignment,
    /// The cluster direction `v` minimizing `|(v + v_hat) . d|` for the
    /// center-to-center displacement `d`; ties fall back to alignment.
    Bisector,
}

impl std::str::FromStr for OrientationRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "alignment" => Ok(Self::Alignment),
            "bisector" => Ok(Self::Bisector),
            other => Err(Error::InvalidArgument(format!(
                "unknown orientation rule {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VectorMcConfig {
    /// Divergence at or below which a cell is a surface cell.
    pub threshold: f64,
    pub rule: OrientationRule,
    /// Grow the surface cells into adjacent cells that contain a converging
    /// sign flip on one of their edges.
    pub extend_band: bool,
}

impl Default for VectorMcConfig {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_SURFACE_THRESHOLD,
            rule: OrientationRule::Alignment,
            extend_band: true,
        }
    }
}

/// Two-cluster split of a cell's corner vectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellClustering {
    /// Bit `c` set when corner `c` belongs to cluster B.
    pub labels: u8,
    /// Corners with the lowest mutual cosine similarity; the first seeds A.
    pub seeds: (usize, usize),
    pub seed_similarity: f64,
    /// Normalized mean direction of each cluster.
    pub dir_a: Vec3,
    pub dir_b: Vec3,
}

impl CellClustering {
    #[inline]
    pub fn in_b(&self, corner: usize) -> bool {
        self.labels & (1 << corner) != 0
    }

    pub fn size_b(&self) -> u32 {
        self.labels.count_ones()
    }
}

#[inline]
fn cosine(a: &Vec3, b: &Vec3) -> f64 {
    let n = a.norm() * b.norm();
    if n == 0.0 {
        0.0
    } else {
        a.dot(b) / n
    }
}

/// Splits the 8 corner vectors of a cell into two clusters.
///
/// The seeds are the pair with the lowest cosine similarity (first pair in
/// lexicographic order on ties); every other corner joins the seed it is
/// more similar to, A on ties. Zero vectors have similarity 0 to everything.
/// Returns `None` when no pair points apart (lowest similarity `>= 0`): the
/// cell holds no crossing.
pub fn cluster_cell(corners: &[Vec3; 8]) -> Option<CellClustering> {
    let mut best = (f64::INFINITY, 0, 0);
    for a in 0..8 {
        for b in a + 1..8 {
            let c = cosine(&corners[a], &corners[b]);
            if c < best.0 {
                best = (c, a, b);
            }
        }
    }
    let (sim, sa, sb) = best;
    if sim >= 0.0 {
        return None;
    }
    let mut labels = 0u8;
    let mut sum_a = Vec3::zeros();
    let mut sum_b = Vec3::zeros();
    for (c, v) in corners.iter().enumerate() {
        let to_b = c == sb || (c != sa && cosine(v, &corners[sb]) > cosine(v, &corners[sa]));
        let unit = if v.norm() > 0.0 {
            v.normalize()
        } else {
            Vec3::zeros()
        };
        if to_b {
            labels |= 1 << c;
            sum_b += unit;
        } else {
            sum_a += unit;
        }
    }
    let dir = |sum: Vec3, seed: &Vec3| {
        if sum.norm() > 1e-12 {
            sum.normalize()
        } else {
            seed.normalize()
        }
    };
    Some(CellClustering {
        labels,
        seeds: (sa, sb),
        seed_similarity: sim,
        dir_a: dir(sum_a, &corners[sa]),
        dir_b: dir(sum_b, &corners[sb]),
    })
}

/// Result of region growing over clustered cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Orientation {
    /// Per input cell: whether cluster A is the positive side.
    pub a_positive: Vec<bool>,
    /// Per input cell: index of its connected component.
    pub component: Vec<u32>,
    pub components: usize,
}

const NEIGHBORS_26: [[i64; 3]; 26] = {
    let mut out = [[0i64; 3]; 26];
    let mut n = 0;
    let mut dz = -1;
    while dz <= 1 {
        let mut dy = -1;
        while dy <= 1 {
            let mut dx = -1;
            while dx <= 1 {
                if dx != 0 || dy != 0 || dz != 0 {
                    out[n] = [dx, dy, dz];
                    n += 1;
                }
                dx += 1;
            }
            dy += 1;
        }
        dz += 1;
    }
    out
};

fn neighbors(spec: &GridSpec, cell: usize) -> impl Iterator<Item = usize> + '_ {
    let [i, j, k] = spec.coords(cell);
    NEIGHBORS_26.iter().filter_map(move |d| {
        let p = [i as i64 + d[0], j as i64 + d[1], k as i64 + d[2]];
        let inside = (0..3).all(|a| p[a] >= 0 && (p[a] as usize) < spec.dims[a]);
        inside.then(|| spec.index(p[0] as usize, p[1] as usize, p[2] as usize))
    })
}

/// Breadth-first propagation of a consistent positive side over 26-adjacent
/// cells.
///
/// `cells` are linear indices into `cell_spec` in ascending order, with their
/// clusterings. Each component starts at its lowest cell with A positive.
pub fn grow_orientation(
    cell_spec: &GridSpec,
    cells: &[usize],
    clusterings: &[CellClustering],
    rule: OrientationRule,
) -> Orientation {
    let n = cells.len();
    let mut slot = vec![u32::MAX; cell_spec.len()];
    for (s, &c) in cells.iter().enumerate() {
        slot[c] = s as u32;
    }
    let mut a_positive = vec![true; n];
    let mut component = vec![u32::MAX; n];
    let mut components = 0u32;
    let mut queue = VecDeque::new();
    for start in 0..n {
        if component[start] != u32::MAX {
            continue;
        }
        component[start] = components;
        queue.push_back(start);
        while let Some(cur) = queue.pop_front() {
            let cc = &clusterings[cur];
            let v_hat = if a_positive[cur] { cc.dir_a } else { cc.dir_b };
            let center = cell_spec.position_of(cells[cur]);
            for nb in neighbors(cell_spec, cells[cur]) {
                let s = slot[nb];
                if s == u32::MAX || component[s as usize] != u32::MAX {
                    continue;
                }
                let s = s as usize;
                let nc = &clusterings[s];
                let align = nc.dir_a.dot(&v_hat) >= nc.dir_b.dot(&v_hat);
                a_positive[s] = match rule {
                    OrientationRule::Alignment => align,
                    OrientationRule::Bisector => {
                        let d = (cell_spec.position_of(nb) - center).normalize();
                        let ka = (nc.dir_a + v_hat).dot(&d).abs();
                        let kb = (nc.dir_b + v_hat).dot(&d).abs();
                        if (ka - kb).abs() <= 1e-9 {
                            align
                        } else {
                            ka < kb
                        }
                    }
                };
                component[s] = components;
                queue.push_back(s);
            }
        }
        components += 1;
    }
    Orientation {
        a_positive,
        component,
        components: components as usize,
    }
}

trait PositionOf {
    fn position_of(&self, idx: usize) -> Vec3;
}

impl PositionOf for GridSpec {
    fn position_of(&self, idx: usize) -> Vec3 {
        let [i, j, k] = self.coords(idx);
        self.position(i, j, k)
    }
}

/// Signed pseudo-distance per grid vertex; `None` where no oriented cell
/// touches the vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedCornerGrid {
    pub spec: GridSpec,
    pub values: Vec<Option<f64>>,
}

impl SignedCornerGrid {
    pub fn assigned(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct VectorMcStats {
    /// Cells at or below the divergence threshold.
    pub active_cells: usize,
    /// Active cells plus the band extension.
    pub band_cells: usize,
    /// Band cells whose corners split into two opposing clusters.
    pub clustered_cells: usize,
    /// Connected components of the region growing.
    pub components: usize,
}

#[derive(Debug, Clone)]
pub struct VectorMcOutput {
    pub mesh: TriMesh,
    pub stats: VectorMcStats,
    pub corners: SignedCornerGrid,
}

/// Marching cubes over a VT or DVT grid.
pub fn extract_mesh_vector(grid: &FieldGrid, config: &VectorMcConfig) -> Result<VectorMcOutput> {
    if !grid.kind.is_vector() {
        return Err(Error::FieldType(format!(
            "expected a vt or dvt grid, got {}",
            grid.kind
        )));
    }
    extract_mesh_vector_from(&VectorGrid::from_field(grid)?, grid.kind, config)
}

/// As [`extract_mesh_vector`] on an in-memory vector grid. `kind` selects the
/// corner magnitude: the vector norm for DVT, a neighborhood-averaged norm
/// for VT.
pub fn extract_mesh_vector_from(
    grid: &VectorGrid,
    kind: FieldKind,
    config: &VectorMcConfig,
) -> Result<VectorMcOutput> {
    if !kind.is_vector() {
        return Err(Error::FieldType(format!("expected vt or dvt, got {kind}")));
    }
    let spec = grid.spec;
    let cell_spec = spec.cells();
    // The level set is a property of the direction field; DVT magnitudes are dropped here.
    let div = match kind {
        FieldKind::Dvt => divergence_of(&normalize(grid)),
        _ => divergence_of(grid),
    };
    let active: Vec<bool> = div.values.iter().map(|&d| d <= config.threshold).collect();
    let active_cells = active.iter().filter(|&&a| a).count();

    let band = if config.extend_band {
        extend_band(grid, &active)
    } else {
        active
    };
    let band_cells: Vec<usize> = band
        .iter()
        .enumerate()
        .filter(|(_, &b)| b)
        .map(|(i, _)| i)
        .collect();

    let mut cells = Vec::new();
    let mut clusterings = Vec::new();
    for &c in &band_cells {
        let corners = cell_corners(&spec, cell_spec.coords(c)).map(|v| grid.values[v]);
        if let Some(cl) = cluster_cell(&corners) {
            cells.push(c);
            clusterings.push(cl);
        }
    }
    let orientation = grow_orientation(&cell_spec, &cells, &clusterings, config.rule);

    let magnitude = corner_magnitudes(grid, kind);
    let mut votes = vec![0i32; spec.len()];
    let mut first = vec![0i8; spec.len()];
    for (s, &c) in cells.iter().enumerate() {
        let cl = &clusterings[s];
        for (corner, v) in cell_corners(&spec, cell_spec.coords(c))
            .into_iter()
            .enumerate()
        {
            let sign: i8 = if cl.in_b(corner) != orientation.a_positive[s] {
                1
            } else {
                -1
            };
            votes[v] += sign as i32;
            if first[v] == 0 {
                first[v] = sign;
            }
        }
    }
    let values: Vec<Option<f64>> = (0..spec.len())
        .map(|v| {
            (first[v] != 0).then(|| {
                let sign = match votes[v].signum() {
                    0 => first[v] as f64,
                    s => s as f64,
                };
                sign * magnitude[v].max(1e-12)
            })
        })
        .collect();

    let mesh = {
        let candidates: Vec<usize> = cells
            .iter()
            .copied()
            .filter(|&c| {
                let corners = cell_corners(&spec, cell_spec.coords(c));
                let mut pos = false;
                let mut neg = false;
                for v in corners {
                    match values[v] {
                        None => return false,
                        Some(x) if x < 0.0 => neg = true,
                        Some(_) => pos = true,
                    }
                }
                pos && neg
            })
            .collect();
        let value = |v: usize| values[v].expect("candidate corners are assigned");
        triangulate(&spec, &candidates, 0.0, value, |_, _, a, b| {
            if kind == FieldKind::Vt
                && a.abs() >= UNINFORMATIVE_NORM
                && b.abs() >= UNINFORMATIVE_NORM
            {
                0.5
            } else {
                linear_crossing(0.0, a, b)
            }
        })
    };

    Ok(VectorMcOutput {
        mesh,
        stats: VectorMcStats {
            active_cells,
            band_cells: band_cells.len(),
            clustered_cells: cells.len(),
            components: orientation.components,
        },
        corners: SignedCornerGrid { spec, values },
    })
}

/// DVT: the vector norm. VT: the norm of the mean of the vector and its
/// in-bounds face neighbors, which shrinks where opposing directions meet.
fn corner_magnitudes(grid: &VectorGrid, kind: FieldKind) -> Vec<f64> {
    if kind == FieldKind::Dvt {
        return grid.values.iter().map(|v| v.norm()).collect();
    }
    let spec = grid.spec;
    (0..spec.len())
        .map(|v| {
            let [i, j, k] = spec.coords(v);
            let mut sum = grid.values[v];
            let mut n = 1.0;
            let p = [i, j, k];
            for a in 0..3 {
                for d in [-1i64, 1] {
                    let q = p[a] as i64 + d;
                    if q >= 0 && (q as usize) < spec.dims[a] {
                        let mut r = p;
                        r[a] = q as usize;
                        sum += grid.values[spec.index(r[0], r[1], r[2])];
                        n += 1.0;
                    }
                }
            }
            (sum / n).norm()
        })
        .collect()
}

/// Cell with a grid edge whose end vectors point at each other.
fn has_converging_flip(grid: &VectorGrid, corners: &[usize; 8]) -> bool {
    super::tables::EDGES.iter().any(|&[a, b]| {
        let (oa, ob) = (CORNERS[a], CORNERS[b]);
        let axis = (0..3)
            .find(|&k| oa[k] != ob[k])
            .expect("edge spans one axis");
        let (lo, hi) = if oa[axis] < ob[axis] {
            (corners[a], corners[b])
        } else {
            (corners[b], corners[a])
        };
        let (vl, vh) = (grid.values[lo], grid.values[hi]);
        vl.dot(&vh) < 0.0 && vl[axis] > 0.0 && vh[axis] < 0.0
    })
}

/// Active cells plus every flip cell reachable from them through 26-adjacent
/// flip cells.
fn extend_band(grid: &VectorGrid, active: &[bool]) -> Vec<bool> {
    let spec = grid.spec;
    let cell_spec = spec.cells();
    let mut band = active.to_vec();
    let mut checked = vec![false; active.len()];
    let mut queue: VecDeque<usize> = active
        .iter()
        .enumerate()
        .filter(|(_, &a)| a)
        .map(|(i, _)| i)
        .collect();
    while let Some(c) = queue.pop_front() {
        for nb in neighbors(&cell_spec, c) {
            if band[nb] || checked[nb] {
                continue;
            }
            checked[nb] = true;
            if has_converging_flip(grid, &cell_corners(&spec, cell_spec.coords(nb))) {
                band[nb] = true;
                queue.push_back(nb);
            }
        }
    }
    band
}
