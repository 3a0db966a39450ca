//! Deterministic test domains.
//!
//! All measures are 1. Paths and lattices have unit edge lengths; the
//! snowflake sits on a unit triangular lattice with lengths taken from the
//! vertex positions.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EdgeRecord, VertexRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    Path,
    Grid,
    Lshape,
    Snowflake,
}

impl std::str::FromStr for DomainKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "path" => Ok(Self::Path),
            "grid" => Ok(Self::Grid),
            "lshape" => Ok(Self::Lshape),
            "snowflake" => Ok(Self::Snowflake),
            _ => Err(Error::InvalidParameter(format!(
                "unknown domain kind `{s}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    pub vertices: Vec<VertexRecord>,
    pub edges: Vec<EdgeRecord>,
}

pub fn generate(kind: DomainKind, size: usize) -> Result<Domain> {
    match kind {
        DomainKind::Path => path(size),
        DomainKind::Grid => grid(size),
        DomainKind::Lshape => lshape(size),
        DomainKind::Snowflake => snowflake(size),
    }
}

/// `a, b, ..., z, aa, ab, ...`
fn letters(mut k: usize) -> String {
    let mut s = Vec::new();
    loop {
        s.push(b'a' + (k % 26) as u8);
        if k < 26 {
            break;
        }
        k = k / 26 - 1;
    }
    s.reverse();
    String::from_utf8(s).unwrap()
}

/// Chain of `n` vertices with both ends on the boundary.
pub fn path(n: usize) -> Result<Domain> {
    if n < 3 {
        return Err(Error::InvalidParameter(format!(
            "path needs at least 3 vertices, got {n}"
        )));
    }
    let vertices = (0..n)
        .map(|k| {
            let v = if k == 0 || k == n - 1 {
                VertexRecord::boundary(letters(k), 1.0)
            } else {
                VertexRecord::interior(letters(k), 1.0)
            };
            v.at(k as f64, 0.0)
        })
        .collect();
    let edges = (1..n)
        .map(|k| EdgeRecord::new(letters(k - 1), letters(k), 1.0, 1.0))
        .collect();
    Ok(Domain { vertices, edges })
}

fn lattice(
    n: usize,
    keep: impl Fn(usize, usize) -> bool,
    on_boundary: impl Fn(usize, usize) -> bool,
) -> Domain {
    let id = |i: usize, j: usize| format!("{i}_{j}");
    let mut vertices = Vec::new();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if !keep(i, j) {
                continue;
            }
            let v = if on_boundary(i, j) {
                VertexRecord::boundary(id(i, j), 1.0)
            } else {
                VertexRecord::interior(id(i, j), 1.0)
            };
            vertices.push(v.at(j as f64, i as f64));
            if j + 1 < n && keep(i, j + 1) {
                edges.push(EdgeRecord::new(id(i, j), id(i, j + 1), 1.0, 1.0));
            }
            if i + 1 < n && keep(i + 1, j) {
                edges.push(EdgeRecord::new(id(i, j), id(i + 1, j), 1.0, 1.0));
            }
        }
    }
    Domain { vertices, edges }
}

/// `n x n` unit lattice with the perimeter as boundary.
pub fn grid(n: usize) -> Result<Domain> {
    if n < 3 {
        return Err(Error::InvalidParameter(format!(
            "grid needs n >= 3, got {n}"
        )));
    }
    Ok(lattice(
        n,
        |_, _| true,
        |i, j| i == 0 || j == 0 || i == n - 1 || j == n - 1,
    ))
}

/// `n x n` lattice with the quadrant `i, j > (n-1)/2` removed; the boundary is
/// the perimeter of the remaining L.
pub fn lshape(n: usize) -> Result<Domain> {
    if n < 5 {
        return Err(Error::InvalidParameter(format!(
            "lshape needs n >= 5, got {n}"
        )));
    }
    let h = (n - 1) / 2;
    let keep = move |i: usize, j: usize| !(i > h && j > h);
    let edge = move |i: usize, j: usize| {
        i == 0 || j == 0 || i == n - 1 || j == n - 1 || (i == h && j >= h) || (j == h && i >= h)
    };
    Ok(lattice(n, keep, edge))
}

/// Unit steps of the triangular lattice, counterclockwise from `(1, 0)`, in
/// lattice coordinates `a * (1, 0) + b * (1/2, sqrt(3)/2)`.
const STEPS: [(i64, i64); 6] = [(1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1)];

fn koch_directions(level: usize) -> Vec<usize> {
    let mut dirs = vec![0, 2, 4];
    for _ in 0..level {
        // Counterclockwise polygon: the bump turns right, i.e. outward.
        dirs = dirs
            .iter()
            .flat_map(|&d| [d, (d + 5) % 6, (d + 1) % 6, d])
            .collect();
    }
    dirs
}

/// Even-odd test in lattice coordinates; the point must not lie on the polygon.
fn inside(poly: &[(f64, f64)], x: f64, y: f64) -> bool {
    let mut c = false;
    let n = poly.len();
    for k in 0..n {
        let (xa, ya) = poly[k];
        let (xb, yb) = poly[(k + 1) % n];
        if (ya > y) != (yb > y) && x < xa + (y - ya) * (xb - xa) / (yb - ya) {
            c = !c;
        }
    }
    c
}

fn position((a, b): (i64, i64)) -> [f64; 2] {
    [a as f64 + 0.5 * b as f64, b as f64 * 3f64.sqrt() / 2.0]
}

/// Level-`k` Koch snowflake with unit boundary segments, on the unit
/// triangular lattice clipped to the polygon.
pub fn snowflake(level: usize) -> Result<Domain> {
    if !(1..=5).contains(&level) {
        return Err(Error::InvalidParameter(format!(
            "snowflake level must lie in 1..=5, got {level}"
        )));
    }
    let dirs = koch_directions(level);
    let mut boundary = Vec::with_capacity(dirs.len());
    let mut at = (0i64, 0i64);
    for &d in &dirs {
        boundary.push(at);
        at = (at.0 + STEPS[d].0, at.1 + STEPS[d].1);
    }
    let poly: Vec<(f64, f64)> = boundary
        .iter()
        .map(|&(a, b)| (a as f64, b as f64))
        .collect();
    let on_boundary: BTreeSet<(i64, i64)> = boundary.iter().copied().collect();
    let (amin, amax) = boundary.iter().fold((i64::MAX, i64::MIN), |(lo, hi), p| {
        (lo.min(p.0), hi.max(p.0))
    });
    let (bmin, bmax) = boundary.iter().fold((i64::MAX, i64::MIN), |(lo, hi), p| {
        (lo.min(p.1), hi.max(p.1))
    });

    let mut ids: BTreeMap<(i64, i64), String> = BTreeMap::new();
    let mut vertices = Vec::new();
    for (k, &pt) in boundary.iter().enumerate() {
        let id = format!("b{k}");
        let [x, y] = position(pt);
        vertices.push(VertexRecord::boundary(id.clone(), 1.0).at(x, y));
        ids.insert(pt, id);
    }
    let mut count = 0;
    for b in bmin..=bmax {
        for a in amin..=amax {
            if on_boundary.contains(&(a, b)) || !inside(&poly, a as f64, b as f64) {
                continue;
            }
            let id = format!("v{count}");
            count += 1;
            let [x, y] = position((a, b));
            vertices.push(VertexRecord::interior(id.clone(), 1.0).at(x, y));
            ids.insert((a, b), id);
        }
    }

    let m = boundary.len();
    let consecutive: BTreeSet<((i64, i64), (i64, i64))> = (0..m)
        .flat_map(|k| {
            let (p, q) = (boundary[k], boundary[(k + 1) % m]);
            [(p, q), (q, p)]
        })
        .collect();
    let mut edges = Vec::new();
    for (&p, id_p) in &ids {
        // Three of the six directions, so each pair is visited once.
        for &(da, db) in &STEPS[..3] {
            let q = (p.0 + da, p.1 + db);
            let Some(id_q) = ids.get(&q) else { continue };
            let mid = ((p.0 + q.0) as f64 / 2.0, (p.1 + q.1) as f64 / 2.0);
            if consecutive.contains(&(p, q)) || inside(&poly, mid.0, mid.1) {
                let (xp, xq) = (position(p), position(q));
                let length = ((xp[0] - xq[0]).powi(2) + (xp[1] - xq[1]).powi(2)).sqrt();
                edges.push(EdgeRecord::new(id_p.clone(), id_q.clone(), length, 1.0));
            }
        }
    }
    Ok(Domain { vertices, edges })
}
