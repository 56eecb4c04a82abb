//! Periodic-cell arithmetic: wrapping, minimum-image displacements, and
//! cutoff neighbor lists under periodic boundary conditions.
//!
//! Minimum images are found by enumerating the 27 nearest lattice images
//! around the rounded fractional displacement. That is exact for the
//! orthorhombic/cubic cells in scope whenever the cutoff is below half the
//! smallest cell width, and it stays a valid (if slower) search when that
//! guideline is violated.

use crate::{Error, Result};

pub type Vec3 = [f64; 3];

pub(crate) fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn det3(m: &[[f64; 3]; 3]) -> f64 {
    dot(m[0], cross(m[1], m[2]))
}

/// A periodic simulation cell. Rows of `lattice` are the three cell vectors;
/// positions use the row-vector convention `cartesian = fractional · lattice`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    lattice: [[f64; 3]; 3],
    inverse: [[f64; 3]; 3],
    volume: f64,
}

impl Cell {
    /// Build a cell from its lattice matrix. The determinant must be strictly
    /// positive (right-handed, non-degenerate).
    pub fn new(lattice: [[f64; 3]; 3]) -> Result<Self> {
        let det = det3(&lattice);
        if !det.is_finite() || det <= 0.0 {
            return Err(Error::DegenerateCell { det });
        }
        // inverse via adjugate; inverse[r][c] so that (v · inverse) recovers
        // fractional coordinates for row vectors.
        let c0 = cross(lattice[1], lattice[2]);
        let c1 = cross(lattice[2], lattice[0]);
        let c2 = cross(lattice[0], lattice[1]);
        let inverse = [
            [c0[0] / det, c1[0] / det, c2[0] / det],
            [c0[1] / det, c1[1] / det, c2[1] / det],
            [c0[2] / det, c1[2] / det, c2[2] / det],
        ];
        Ok(Cell {
            lattice,
            inverse,
            volume: det,
        })
    }

    pub fn cubic(edge: f64) -> Result<Self> {
        Cell::new([[edge, 0.0, 0.0], [0.0, edge, 0.0], [0.0, 0.0, edge]])
    }

    pub fn orthorhombic(a: f64, b: f64, c: f64) -> Result<Self> {
        Cell::new([[a, 0.0, 0.0], [0.0, b, 0.0], [0.0, 0.0, c]])
    }

    pub fn lattice(&self) -> &[[f64; 3]; 3] {
        &self.lattice
    }

    pub fn volume(&self) -> f64 {
        self.volume
    }

    pub fn to_fractional(&self, r: Vec3) -> Vec3 {
        mat_vec(&self.inverse, r)
    }

    pub fn to_cartesian(&self, f: Vec3) -> Vec3 {
        mat_vec(&self.lattice, f)
    }

    /// Smallest perpendicular width of the cell (distance between opposite
    /// faces). Half of this bounds the cutoff for which a single minimum image
    /// per pair is guaranteed.
    pub fn min_width(&self) -> f64 {
        let areas = [
            norm(cross(self.lattice[1], self.lattice[2])),
            norm(cross(self.lattice[2], self.lattice[0])),
            norm(cross(self.lattice[0], self.lattice[1])),
        ];
        areas
            .iter()
            .map(|a| self.volume / a)
            .fold(f64::INFINITY, f64::min)
    }
}

// row-vector times matrix: out_c = sum_r v_r * m[r][c]
fn mat_vec(m: &[[f64; 3]; 3], v: Vec3) -> Vec3 {
    [
        v[0] * m[0][0] + v[1] * m[1][0] + v[2] * m[2][0],
        v[0] * m[0][1] + v[1] * m[1][1] + v[2] * m[2][1],
        v[0] * m[0][2] + v[1] * m[1][2] + v[2] * m[2][2],
    ]
}

fn wrap_unit(x: f64) -> f64 {
    let y = x - x.floor();
    // x - floor(x) can round up to exactly 1.0 for tiny negative x
    if y >= 1.0 {
        0.0
    } else {
        y
    }
}

/// Displacement `a - b` adjusted by the lattice translation that minimizes its
/// norm, searching the 27 images around the rounded fractional difference.
pub fn min_image_displacement(cell: &Cell, a: Vec3, b: Vec3) -> Vec3 {
    let raw = sub(a, b);
    let f = cell.to_fractional(raw);
    let base = [f[0] - f[0].round(), f[1] - f[1].round(), f[2] - f[2].round()];
    let mut best = cell.to_cartesian(base);
    let mut best_n = dot(best, best);
    for di in -1i32..=1 {
        for dj in -1i32..=1 {
            for dk in -1i32..=1 {
                if di == 0 && dj == 0 && dk == 0 {
                    continue;
                }
                let cand = cell.to_cartesian([
                    base[0] + di as f64,
                    base[1] + dj as f64,
                    base[2] + dk as f64,
                ]);
                let n = dot(cand, cand);
                if n < best_n {
                    best_n = n;
                    best = cand;
                }
            }
        }
    }
    best
}

/// Map a position into the cell: all fractional coordinates in `[0, 1)`.
pub fn wrap_into_cell(cell: &Cell, pos: Vec3) -> Vec3 {
    let f = cell.to_fractional(pos);
    cell.to_cartesian([wrap_unit(f[0]), wrap_unit(f[1]), wrap_unit(f[2])])
}

/// A directed edge of the periodic neighbor graph. `offset` is the lattice
/// translation such that `pos_i - pos_j - offset` is the minimum-image
/// displacement, whose norm is `distance`.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub offset: Vec3,
    pub distance: f64,
}

/// Symmetric cutoff neighbor list: both `(i, j)` and `(j, i)` are present for
/// every unordered pair with minimum-image distance within the cutoff. Edges
/// are sorted by `(i, j)`.
#[derive(Debug, Clone)]
pub struct NeighborGraph {
    pub edges: Vec<Edge>,
    pub cutoff: f64,
    n_atoms: usize,
}

impl NeighborGraph {
    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    /// Number of neighbors per atom.
    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0usize; self.n_atoms];
        for e in &self.edges {
            d[e.i] += 1;
        }
        d
    }
}

const BRUTE_FORCE_LIMIT: usize = 512;

/// Build the cutoff neighbor graph of `positions` under periodic boundary
/// conditions. Uses cell-linked bins above [`BRUTE_FORCE_LIMIT`] atoms and a
/// direct pair scan otherwise; both paths share the same minimum-image
/// arithmetic and produce identical, deterministically ordered edges.
pub fn build_neighbor_graph(cell: &Cell, positions: &[Vec3], cutoff: f64) -> Result<NeighborGraph> {
    if !cutoff.is_finite() || cutoff <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "neighbor cutoff must be positive, got {cutoff}"
        )));
    }
    for (idx, p) in positions.iter().enumerate() {
        if !p.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("position {idx}"),
            });
        }
    }
    let safe = cutoff < 0.5 * cell.min_width();
    if !safe {
        log::warn!(
            "cutoff {cutoff} is not below half the minimal cell width {}; \
             falling back to the full 27-image pair scan",
            cell.min_width()
        );
    }

    let mut edges = if safe && positions.len() > BRUTE_FORCE_LIMIT {
        binned_edges(cell, positions, cutoff)
    } else {
        brute_edges(cell, positions, cutoff)
    };
    edges.sort_by(|a, b| (a.i, a.j).cmp(&(b.i, b.j)));
    Ok(NeighborGraph {
        edges,
        cutoff,
        n_atoms: positions.len(),
    })
}

fn pair_edges(cell: &Cell, positions: &[Vec3], cutoff: f64, i: usize, j: usize) -> Option<[Edge; 2]> {
    let d = min_image_displacement(cell, positions[i], positions[j]);
    let r = norm(d);
    if r > cutoff {
        return None;
    }
    let offset = sub(sub(positions[i], positions[j]), d);
    Some([
        Edge {
            i,
            j,
            offset,
            distance: r,
        },
        Edge {
            i: j,
            j: i,
            offset: [-offset[0], -offset[1], -offset[2]],
            distance: r,
        },
    ])
}

fn brute_edges(cell: &Cell, positions: &[Vec3], cutoff: f64) -> Vec<Edge> {
    let n = positions.len();
    let per_atom = crate::parallel::map_range(n, |i| {
        let mut out = Vec::new();
        for j in (i + 1)..n {
            if let Some(pair) = pair_edges(cell, positions, cutoff, i, j) {
                out.extend(pair);
            }
        }
        out
    });
    per_atom.into_iter().flatten().collect()
}

fn binned_edges(cell: &Cell, positions: &[Vec3], cutoff: f64) -> Vec<Edge> {
    // Perpendicular width per fractional unit along each axis.
    let widths = [
        cell.volume() / norm(cross(cell.lattice[1], cell.lattice[2])),
        cell.volume() / norm(cross(cell.lattice[2], cell.lattice[0])),
        cell.volume() / norm(cross(cell.lattice[0], cell.lattice[1])),
    ];
    let nbins: [usize; 3] = [
        ((widths[0] / cutoff).floor() as usize).max(1),
        ((widths[1] / cutoff).floor() as usize).max(1),
        ((widths[2] / cutoff).floor() as usize).max(1),
    ];
    let bin_of = |p: Vec3| -> [usize; 3] {
        let f = cell.to_fractional(p);
        let mut b = [0usize; 3];
        for d in 0..3 {
            let w = wrap_unit(f[d]);
            b[d] = ((w * nbins[d] as f64) as usize).min(nbins[d] - 1);
        }
        b
    };
    let flat = |b: [usize; 3]| b[0] + nbins[0] * (b[1] + nbins[1] * b[2]);

    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); nbins[0] * nbins[1] * nbins[2]];
    let bins: Vec<[usize; 3]> = positions.iter().map(|&p| bin_of(p)).collect();
    for (idx, b) in bins.iter().enumerate() {
        buckets[flat(*b)].push(idx);
    }

    let per_atom = crate::parallel::map_range(positions.len(), |i| {
        let b = bins[i];
        // neighbor bins with wraparound, deduplicated (dims may have < 3 bins)
        let mut seen = Vec::with_capacity(27);
        for di in -1i64..=1 {
            for dj in -1i64..=1 {
                for dk in -1i64..=1 {
                    let nb = [
                        (b[0] as i64 + di).rem_euclid(nbins[0] as i64) as usize,
                        (b[1] as i64 + dj).rem_euclid(nbins[1] as i64) as usize,
                        (b[2] as i64 + dk).rem_euclid(nbins[2] as i64) as usize,
                    ];
                    let key = flat(nb);
                    if !seen.contains(&key) {
                        seen.push(key);
                    }
                }
            }
        }
        let mut out = Vec::new();
        for key in seen {
            for &j in &buckets[key] {
                if j <= i {
                    continue;
                }
                if let Some(pair) = pair_edges(cell, positions, cutoff, i, j) {
                    out.extend(pair);
                }
            }
        }
        out
    });
    per_atom.into_iter().flatten().collect()
}
