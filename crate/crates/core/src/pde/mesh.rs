use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Conforming triangle mesh in the plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    pub vertices: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary: Vec<bool>,
    /// Longest edge.
    pub h: f64,
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

pub(crate) fn signed_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
}

impl Mesh {
    /// Checks indices and positive orientation and computes `h`.
    pub fn new(vertices: Vec<[f64; 2]>, triangles: Vec<[usize; 3]>, boundary: Vec<bool>) -> Result<Mesh> {
        if boundary.len() != vertices.len() {
            return Err(Error::Dimension { expected: vertices.len(), got: boundary.len() });
        }
        if triangles.is_empty() {
            return Err(Error::Input("mesh has no triangles".into()));
        }
        let mut h = 0.0f64;
        for (k, t) in triangles.iter().enumerate() {
            if t.iter().any(|&i| i >= vertices.len()) {
                return Err(Error::Input(format!("triangle {k} references a missing vertex")));
            }
            let [a, b, c] = t.map(|i| vertices[i]);
            if !(signed_area(a, b, c) > 0.0) {
                return Err(Error::Input(format!("triangle {k} is not positively oriented")));
            }
            h = h.max(dist(a, b)).max(dist(b, c)).max(dist(c, a));
        }
        Ok(Mesh { vertices, triangles, boundary, h })
    }

    /// `n × n` squares of the unit square, each cut along its rising diagonal.
    pub fn unit_square(n: usize) -> Result<Mesh> {
        structured(n, n, |u, v| [u, v])
    }

    pub fn area(&self) -> f64 {
        self.triangles.iter().map(|t| self.triangle_area(t)).sum()
    }

    pub(crate) fn triangle_area(&self, t: &[usize; 3]) -> f64 {
        signed_area(self.vertices[t[0]], self.vertices[t[1]], self.vertices[t[2]])
    }

    pub fn interior_count(&self) -> usize {
        self.boundary.iter().filter(|b| !**b).count()
    }

    /// Shortest edge with an endpoint within `radius` of `point`.
    pub fn min_edge_near(&self, point: [f64; 2], radius: f64) -> Option<f64> {
        let mut best: Option<f64> = None;
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (self.vertices[t[k]], self.vertices[t[(k + 1) % 3]]);
                if dist(a, point) <= radius || dist(b, point) <= radius {
                    let e = dist(a, b);
                    best = Some(best.map_or(e, |m: f64| m.min(e)));
                }
            }
        }
        best
    }

    /// Plain text: a header line, `vertices N`, N lines `x y b`,
    /// `triangles M`, M lines `i j k`.
    pub fn to_text(&self) -> String {
        let mut s = String::from("# sobolab mesh v1\n");
        writeln!(s, "vertices {}", self.vertices.len()).unwrap();
        for (v, b) in self.vertices.iter().zip(&self.boundary) {
            writeln!(s, "{:?} {:?} {}", v[0], v[1], *b as u8).unwrap();
        }
        writeln!(s, "triangles {}", self.triangles.len()).unwrap();
        for t in &self.triangles {
            writeln!(s, "{} {} {}", t[0], t[1], t[2]).unwrap();
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Mesh> {
        let bad = |line: usize, what: &str| Error::Parse(format!("mesh line {}: {what}", line + 1));
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let mut header = |name: &str| -> Result<usize> {
            let (i, l) = lines.next().ok_or_else(|| Error::Parse(format!("missing {name} header")))?;
            let rest = l.strip_prefix(name).ok_or_else(|| bad(i, "unexpected header"))?;
            rest.trim().parse().map_err(|_| bad(i, "bad count"))
        };
        let nv = header("vertices")?;
        let mut vertices = Vec::with_capacity(nv);
        let mut boundary = Vec::with_capacity(nv);
        for _ in 0..nv {
            let (i, l) = lines.next().ok_or_else(|| Error::Parse("too few vertex lines".into()))?;
            let f: Vec<&str> = l.split_whitespace().collect();
            if f.len() != 3 {
                return Err(bad(i, "expected `x y b`"));
            }
            let x: f64 = f[0].parse().map_err(|_| bad(i, "bad coordinate"))?;
            let y: f64 = f[1].parse().map_err(|_| bad(i, "bad coordinate"))?;
            let b = match f[2] {
                "0" => false,
                "1" => true,
                _ => return Err(bad(i, "boundary flag must be 0 or 1")),
            };
            vertices.push([x, y]);
            boundary.push(b);
        }
        let nt = {
            let (i, l) = lines.next().ok_or_else(|| Error::Parse("missing triangles header".into()))?;
            let rest = l.strip_prefix("triangles").ok_or_else(|| bad(i, "unexpected header"))?;
            rest.trim().parse::<usize>().map_err(|_| bad(i, "bad count"))?
        };
        let mut triangles = Vec::with_capacity(nt);
        for _ in 0..nt {
            let (i, l) = lines.next().ok_or_else(|| Error::Parse("too few triangle lines".into()))?;
            let f: Vec<usize> = l
                .split_whitespace()
                .map(|v| v.parse().map_err(|_| bad(i, "bad index")))
                .collect::<Result<_>>()?;
            if f.len() != 3 {
                return Err(bad(i, "expected `i j k`"));
            }
            triangles.push([f[0], f[1], f[2]]);
        }
        if let Some((i, _)) = lines.next() {
            return Err(bad(i, "trailing content"));
        }
        Mesh::new(vertices, triangles, boundary)
    }
}

/// Structured `nu × nv` mesh of the parameter square mapped by `map`.
fn structured(nu: usize, nv: usize, map: impl Fn(f64, f64) -> [f64; 2]) -> Result<Mesh> {
    if nu == 0 || nv == 0 {
        return Err(Error::Input("mesh needs at least one cell per direction".into()));
    }
    let id = |i: usize, j: usize| j * (nu + 1) + i;
    let mut vertices = Vec::with_capacity((nu + 1) * (nv + 1));
    let mut boundary = Vec::with_capacity(vertices.capacity());
    for j in 0..=nv {
        for i in 0..=nu {
            vertices.push(map(i as f64 / nu as f64, j as f64 / nv as f64));
            boundary.push(i == 0 || j == 0 || i == nu || j == nv);
        }
    }
    let mut triangles = Vec::with_capacity(2 * nu * nv);
    for j in 0..nv {
        for i in 0..nu {
            triangles.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            triangles.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    Mesh::new(vertices, triangles, boundary)
}

/// Domains the mesher understands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum MeshDomain {
    Rectangle { lo: [f64; 2], hi: [f64; 2] },
    /// Convex polygon, vertices in either orientation.
    Polygon { vertices: Vec<[f64; 2]> },
    /// `{eps < y < 1, 0 < x < scale·y^exponent}`, the plane cusp cut off below `eps`.
    CuspSection { exponent: f64, scale: f64, eps: f64 },
}

impl MeshDomain {
    pub fn unit_square() -> Self {
        MeshDomain::Rectangle { lo: [0.0, 0.0], hi: [1.0, 1.0] }
    }
}

fn cells_for(len: f64, h: f64) -> usize {
    ((len / h) - 1e-9).ceil().max(1.0) as usize
}

/// Triangulates with longest edge at most `h`, up to rounding. `grading > 1` concentrates
/// vertices toward the designated singular vertex: the lower-left corner
/// of a rectangle, the first vertex of a polygon, the tip of a cusp section.
pub fn triangulate(domain: &MeshDomain, h: f64, grading: f64) -> Result<Mesh> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::Input("mesh size must be positive".into()));
    }
    if !(grading >= 1.0) || !grading.is_finite() {
        return Err(Error::Input("grading must be at least 1".into()));
    }
    match domain {
        MeshDomain::Rectangle { lo, hi } => {
            let (lx, ly) = (hi[0] - lo[0], hi[1] - lo[1]);
            if !(lx > 0.0 && ly > 0.0) {
                return Err(Error::Input("degenerate rectangle".into()));
            }
            let nu = cells_for(grading * lx * std::f64::consts::SQRT_2, h);
            let nv = cells_for(grading * ly * std::f64::consts::SQRT_2, h);
            refine_until(h, |k| {
                structured(nu * k, nv * k, |u, v| {
                    let (u, v) = grade_corner(u, v, grading);
                    [lo[0] + lx * u, lo[1] + ly * v]
                })
            })
        }
        MeshDomain::CuspSection { exponent, scale, eps } => {
            if !(*exponent >= 1.0 && *scale > 0.0 && *eps > 0.0 && *eps < 1.0) {
                return Err(Error::Input("cusp section needs exponent >= 1, scale > 0, 0 < eps < 1".into()));
            }
            let nv = cells_for(grading * (1.0 - eps) * 1.5, h);
            let nu = cells_for(1.5 * scale, h);
            refine_until(h, |k| {
                structured(nu * k, nv * k, |u, v| {
                    let y = eps + (1.0 - eps) * v.powf(grading);
                    [u * scale * y.powf(*exponent), y]
                })
            })
        }
        MeshDomain::Polygon { vertices } => polygon_mesh(vertices, h, grading),
    }
}

// (u, v) ↦ (u, v)·m^{g-1} with m = max(u, v), fixing the square's boundary
fn grade_corner(u: f64, v: f64, g: f64) -> (f64, f64) {
    let m = u.max(v);
    if g == 1.0 || m == 0.0 {
        return (u, v);
    }
    let s = m.powf(g - 1.0);
    (u * s, v * s)
}

fn refine_until(h: f64, build: impl Fn(usize) -> Result<Mesh>) -> Result<Mesh> {
    for k in 1..=64 {
        let m = build(k)?;
        if m.h <= h * (1.0 + 1e-12) {
            return Ok(m);
        }
    }
    Err(Error::Input("could not reach the requested mesh size".into()))
}

fn polygon_mesh(vertices: &[[f64; 2]], h: f64, grading: f64) -> Result<Mesh> {
    let k = vertices.len();
    if k < 3 {
        return Err(Error::Input("degenerate polygon: fewer than three vertices".into()));
    }
    let mut v = vertices.to_vec();
    let total: f64 = (0..k).map(|i| signed_area([0.0, 0.0], v[i], v[(i + 1) % k])).sum();
    if !(total.abs() > 1e-14) {
        return Err(Error::Input("degenerate polygon: zero area".into()));
    }
    if total < 0.0 {
        v[1..].reverse();
    }
    for i in 0..k {
        if !(signed_area(v[i], v[(i + 1) % k], v[(i + 2) % k]) > 0.0) {
            return Err(Error::Input("degenerate polygon: not strictly convex".into()));
        }
    }
    let longest = (0..k)
        .flat_map(|i| (0..k).map(move |j| (i, j)))
        .map(|(i, j)| dist(v[i], v[j]))
        .fold(0.0, f64::max);
    let base = cells_for(grading * longest, h);
    refine_until(h, |m| fan_mesh(&v, base * m, grading))
}

// each fan triangle (v0, v_i, v_{i+1}) is cut into div² similar triangles
fn fan_mesh(v: &[[f64; 2]], div: usize, grading: f64) -> Result<Mesh> {
    let k = v.len();
    let mut index: HashMap<(u64, u64), usize> = HashMap::new();
    let mut vertices: Vec<[f64; 2]> = Vec::new();
    let mut boundary: Vec<bool> = Vec::new();
    let mut triangles = Vec::new();
    let d = div as f64;
    for i in 1..k - 1 {
        let (o, b, c) = (v[0], v[i], v[i + 1]);
        let mut local = vec![vec![0usize; div + 1]; div + 1];
        for a in 0..=div {
            for e in 0..=div - a {
                let m = (a + e) as f64 / d;
                let s = if grading == 1.0 || m == 0.0 { 1.0 } else { m.powf(grading - 1.0) };
                let (ta, te) = (a as f64 / d, e as f64 / d);
                let p = [
                    o[0] + s * (ta * (b[0] - o[0]) + te * (c[0] - o[0])),
                    o[1] + s * (ta * (b[1] - o[1]) + te * (c[1] - o[1])),
                ];
                let on_outer = a + e == div;
                let on_first = i == 1 && e == 0;
                let on_last = i == k - 2 && a == 0;
                let key = (p[0].to_bits(), p[1].to_bits());
                let id = *index.entry(key).or_insert_with(|| {
                    vertices.push(p);
                    boundary.push(false);
                    vertices.len() - 1
                });
                if on_outer || on_first || on_last {
                    boundary[id] = true;
                }
                local[a][e] = id;
            }
        }
        for a in 0..div {
            for e in 0..div - a {
                triangles.push([local[a][e], local[a + 1][e], local[a][e + 1]]);
                if a + e + 1 < div {
                    triangles.push([local[a + 1][e], local[a + 1][e + 1], local[a][e + 1]]);
                }
            }
        }
    }
    Mesh::new(vertices, triangles, boundary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn unit_square_half() {
        let m = triangulate(&MeshDomain::unit_square(), 0.5, 1.0).unwrap();
        assert!(m.triangles.len() >= 8);
        assert!(m.h <= 0.5);
        assert_relative_eq!(m.area(), 1.0, max_relative = 1e-14);
    }

    #[test]
    fn refinement_quadruples_vertices() {
        let a = triangulate(&MeshDomain::unit_square(), 0.1, 1.0).unwrap();
        let b = triangulate(&MeshDomain::unit_square(), 0.05, 1.0).unwrap();
        let ratio = b.vertices.len() as f64 / a.vertices.len() as f64;
        assert!(ratio > 3.0 && ratio < 5.0, "ratio {ratio}");
    }

    #[test]
    fn graded_square() {
        let h = 0.1;
        let m = triangulate(&MeshDomain::unit_square(), h, 3.0).unwrap();
        assert!(m.h <= h);
        assert!(m.min_edge_near([0.0, 0.0], 1e-9).unwrap() < h / 4.0);
        assert_relative_eq!(m.area(), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn polygon_mesh_is_conforming() {
        let hex: Vec<[f64; 2]> = (0..6)
            .map(|k| {
                let t = k as f64 * std::f64::consts::PI / 3.0;
                [t.cos(), t.sin()]
            })
            .collect();
        let m = triangulate(&MeshDomain::Polygon { vertices: hex }, 0.2, 1.0).unwrap();
        assert!(m.h <= 0.2 * (1.0 + 1e-12), "h {}", m.h);
        assert_relative_eq!(m.area(), 1.5 * 3f64.sqrt(), max_relative = 1e-12);
        // Euler: V - E + F = 1 for a disk
        let mut edges = std::collections::HashSet::new();
        for t in &m.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                edges.insert((a.min(b), a.max(b)));
            }
        }
        assert_eq!(m.vertices.len() + m.triangles.len(), edges.len() + 1);
        let bad = MeshDomain::Polygon { vertices: vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]] };
        assert!(matches!(triangulate(&bad, 0.1, 1.0), Err(Error::Input(_))));
    }

    #[test]
    fn cusp_section() {
        let d = MeshDomain::CuspSection { exponent: 2.0, scale: 1.0, eps: 1e-3 };
        let m = triangulate(&d, 0.1, 1.0).unwrap();
        assert!(m.h <= 0.1);
        // chords of the convex profile lie outside, so the area is approached from above
        let exact = (1.0 - 1e-9) / 3.0;
        assert!(m.area() > exact && m.area() < exact + 1e-3, "area {}", m.area());
    }

    #[test]
    fn text_round_trip() {
        let m = Mesh::unit_square(3).unwrap();
        let back = Mesh::from_text(&m.to_text()).unwrap();
        assert_eq!(m, back);
        assert!(Mesh::from_text("vertices 1\n0 0 2\n").is_err());
    }
}
