//! Mollification `A_r f(x) = r^{-n} ∫ ω((x-z)/r) f(z) dz` with the bump
//! kernel `ω(z) ∝ exp(-1/(1-|z|²))` on the unit ball.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::exponents::Violation;
use crate::quad::{composite, gauss_legendre, gauss_on, sphere_area};
use crate::weights::{norm, Weight};

fn bump(rho2: f64) -> f64 {
    if rho2 >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - rho2)).exp()
    }
}

// ∫_{|z|<1} |z|^k exp(-1/(1-|z|²)) dz in R^n
fn radial_moment(n: usize, k: i32) -> f64 {
    let rule = gauss_legendre(20);
    let area = if n == 1 { 2.0 } else { sphere_area(n - 1) };
    area * composite(&rule, 0.0, 1.0, 64, |rho| bump(rho * rho) * rho.powi(n as i32 - 1 + k))
}

fn normalization(n: usize) -> f64 {
    static CACHE: OnceLock<Mutex<HashMap<usize, f64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().unwrap();
    *map.entry(n).or_insert_with(|| radial_moment(n, 0))
}

/// The normalized bump `ω`, positive on the open unit ball and zero outside.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MollifierKernel {
    dim: usize,
    normalization: f64,
}

impl MollifierKernel {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Input("kernel dimension must be positive".into()));
        }
        Ok(MollifierKernel { dim, normalization: normalization(dim) })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `∫ exp(-1/(1-|z|²)) dz`, the constant dividing the profile.
    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    pub fn eval(&self, z: &[f64]) -> f64 {
        bump(z.iter().map(|v| v * v).sum()) / self.normalization
    }

    /// `∫ |z|² ω(z) dz`.
    pub fn second_moment(&self) -> f64 {
        radial_moment(self.dim, 2) / self.normalization
    }
}

/// Discrete kernel: tensor Gauss nodes of `[-1, 1]^n` inside the unit ball,
/// weights proportional to `ω` and rescaled to total mass one.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvolutionRule {
    pub dim: usize,
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl ConvolutionRule {
    pub fn tensor(dim: usize, per_axis: usize) -> Result<Self> {
        let kernel = MollifierKernel::new(dim)?;
        if per_axis == 0 {
            return Err(Error::Input("need at least one node per axis".into()));
        }
        let rule = gauss_legendre(per_axis);
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        let mut idx = vec![0usize; dim];
        'outer: loop {
            let z: Vec<f64> = idx.iter().map(|&i| rule[i].0).collect();
            let w: f64 = idx.iter().map(|&i| rule[i].1).product::<f64>() * kernel.eval(&z);
            if w > 0.0 {
                nodes.push(z);
                weights.push(w);
            }
            for k in 0..dim {
                idx[k] += 1;
                if idx[k] < per_axis {
                    continue 'outer;
                }
                idx[k] = 0;
            }
            break;
        }
        let mass: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= mass);
        Ok(ConvolutionRule { dim, nodes, weights })
    }

    /// `Σ w_k f(x - r z_k)`.
    pub fn apply<F: Fn(&[f64]) -> f64>(&self, f: F, r: f64, x: &[f64]) -> f64 {
        let mut y = vec![0.0; x.len()];
        let mut total = 0.0;
        for (z, w) in self.nodes.iter().zip(&self.weights) {
            for i in 0..x.len() {
                y[i] = x[i] - r * z[i];
            }
            total += w * f(&y);
        }
        total
    }
}

impl Default for ConvolutionRule {
    fn default() -> Self {
        ConvolutionRule::tensor(2, 16).expect("valid rule")
    }
}

/// Where mollified values are needed: a convex polygon in the plane or a box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum MollifyDomain {
    Polygon { vertices: Vec<[f64; 2]> },
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

impl MollifyDomain {
    /// The plane section `{0 < x_1 < x_2 < 1}` of the Lipschitz cusp.
    pub fn lipschitz_cusp() -> Self {
        MollifyDomain::Polygon { vertices: vec![[0.0, 0.0], [1.0, 1.0], [0.0, 1.0]] }
    }

    pub fn polygon(mut vertices: Vec<[f64; 2]>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::Input("a polygon needs at least three vertices".into()));
        }
        let area = signed_area(&vertices);
        if !(area.abs() > 0.0) {
            return Err(Error::Input("degenerate polygon".into()));
        }
        if area < 0.0 {
            vertices.reverse();
        }
        let k = vertices.len();
        for i in 0..k {
            let (a, b, c) = (vertices[i], vertices[(i + 1) % k], vertices[(i + 2) % k]);
            if cross(a, b, c) <= 0.0 {
                return Err(Error::Input("polygon must be strictly convex".into()));
            }
        }
        Ok(MollifyDomain::Polygon { vertices })
    }

    pub fn dim(&self) -> usize {
        match self {
            MollifyDomain::Polygon { .. } => 2,
            MollifyDomain::Box { lo, .. } => lo.len(),
        }
    }

    /// Distance to the boundary, negative outside.
    pub fn distance_to_boundary(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        Ok(match self {
            MollifyDomain::Polygon { vertices } => {
                let k = vertices.len();
                (0..k)
                    .map(|i| edge_distance(vertices[i], vertices[(i + 1) % k], [x[0], x[1]]))
                    .fold(f64::INFINITY, f64::min)
            }
            MollifyDomain::Box { lo, hi } => (0..lo.len())
                .map(|i| (x[i] - lo[i]).min(hi[i] - x[i]))
                .fold(f64::INFINITY, f64::min),
        })
    }

    /// `D_δ = {x : dist(x, ∂D) > δ}`; for convex domains again a polygon or box.
    pub fn inset(&self, delta: f64) -> Result<MollifyDomain> {
        let empty = || Error::Input(format!("inset by {delta} leaves nothing"));
        match self {
            MollifyDomain::Box { lo, hi } => {
                let lo2: Vec<f64> = lo.iter().map(|v| v + delta).collect();
                let hi2: Vec<f64> = hi.iter().map(|v| v - delta).collect();
                if lo2.iter().zip(&hi2).any(|(a, b)| !(a < b)) {
                    return Err(empty());
                }
                Ok(MollifyDomain::Box { lo: lo2, hi: hi2 })
            }
            MollifyDomain::Polygon { vertices } => {
                let mut poly = vertices.clone();
                let k = vertices.len();
                for i in 0..k {
                    let (a, b) = (vertices[i], vertices[(i + 1) % k]);
                    poly = clip(&poly, a, b, delta);
                    if poly.len() < 3 {
                        return Err(empty());
                    }
                }
                MollifyDomain::polygon(poly).map_err(|_| empty())
            }
        }
    }
}

fn signed_area(v: &[[f64; 2]]) -> f64 {
    let k = v.len();
    0.5 * (0..k).map(|i| v[i][0] * v[(i + 1) % k][1] - v[(i + 1) % k][0] * v[i][1]).sum::<f64>()
}

fn cross(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

// signed distance from x to the line through a→b, positive on the left
fn edge_distance(a: [f64; 2], b: [f64; 2], x: [f64; 2]) -> f64 {
    let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
    cross(a, b, x) / len
}

// keep the part of a convex polygon at distance >= delta left of a→b
fn clip(poly: &[[f64; 2]], a: [f64; 2], b: [f64; 2], delta: f64) -> Vec<[f64; 2]> {
    let d = |p: [f64; 2]| edge_distance(a, b, p) - delta;
    let mut out = Vec::new();
    for i in 0..poly.len() {
        let (p, q) = (poly[i], poly[(i + 1) % poly.len()]);
        let (dp, dq) = (d(p), d(q));
        if dp >= 0.0 {
            out.push(p);
        }
        if (dp >= 0.0) != (dq >= 0.0) {
            let t = dp / (dp - dq);
            out.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MollifySpec {
    pub r: f64,
    pub delta: f64,
    pub p: f64,
    pub weight: Weight,
}

impl MollifySpec {
    fn validate(&self) -> Result<()> {
        if !(self.r > 0.0 && self.r < self.delta) {
            return Err(Error::Input(format!("need 0 < r < delta, got r = {}, delta = {}", self.r, self.delta)));
        }
        Ok(())
    }
}

/// `A_r f(x)` for `x` at distance at least `r` from the boundary.
pub fn mollify<F: Fn(&[f64]) -> f64>(f: F, spec: &MollifySpec, x: &[f64], domain: &MollifyDomain, rule: &ConvolutionRule) -> Result<f64> {
    spec.validate()?;
    check_dim(rule.dim, x.len())?;
    let dist = domain.distance_to_boundary(x)?;
    if dist < spec.r {
        return Err(Error::Domain(format!("{x:?} lies within {} of the boundary", spec.r)));
    }
    Ok(rule.apply(f, spec.r, x))
}

/// Smooth test functions with closed-form derivatives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SmoothFunction {
    Constant { value: f64 },
    /// `Σ c_k x^{β_k}`.
    Polynomial { terms: Vec<(f64, Vec<u32>)> },
    /// `amplitude·sin(frequency·x_axis + phase)`.
    Sine { axis: usize, frequency: f64, phase: f64, amplitude: f64 },
}

fn falling(k: u32, j: u32) -> f64 {
    (0..j).map(|i| (k - i) as f64).product()
}

impl SmoothFunction {
    /// Constant, a cubic and a sine in `dim` variables.
    pub fn corpus(dim: usize) -> Vec<SmoothFunction> {
        let mono = |powers: &[u32]| {
            let mut v = vec![0; dim];
            for (i, p) in powers.iter().enumerate().take(dim) {
                v[i] = *p;
            }
            v
        };
        vec![
            SmoothFunction::Constant { value: 2.5 },
            SmoothFunction::Polynomial {
                terms: vec![(1.0, mono(&[3, 0])), (-2.0, mono(&[1, 2])), (0.5, mono(&[0, 1])), (0.7, mono(&[0, 0]))],
            },
            SmoothFunction::Sine { axis: 0, frequency: 1.0, phase: 0.0, amplitude: 1.0 },
            SmoothFunction::Sine { axis: dim - 1, frequency: 3.0, phase: 0.4, amplitude: 0.5 },
        ]
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.derivative(&vec![0; x.len()], x)
    }

    /// `D^α f(x)`.
    pub fn derivative(&self, alpha: &[u32], x: &[f64]) -> f64 {
        match self {
            SmoothFunction::Constant { value } => {
                if alpha.iter().all(|&a| a == 0) {
                    *value
                } else {
                    0.0
                }
            }
            SmoothFunction::Polynomial { terms } => terms
                .iter()
                .map(|(c, powers)| {
                    let mut v = *c;
                    for i in 0..x.len() {
                        let (k, j) = (powers.get(i).copied().unwrap_or(0), alpha[i]);
                        if j > k {
                            return 0.0;
                        }
                        v *= falling(k, j) * x[i].powi((k - j) as i32);
                    }
                    v
                })
                .sum(),
            SmoothFunction::Sine { axis, frequency, phase, amplitude } => {
                if alpha.iter().enumerate().any(|(i, &a)| i != *axis && a > 0) {
                    return 0.0;
                }
                let k = alpha[*axis];
                let shift = k as f64 * std::f64::consts::FRAC_PI_2;
                amplitude * frequency.powi(k as i32) * (frequency * x[*axis] + phase + shift).sin()
            }
        }
    }
}

/// Max over `samples` of `|D^α(A_r f) - A_r(D^α f)|`, the left side by
/// central differences with the given step. Orders up to two per axis and
/// total order at most two.
pub fn commutation_check(
    f: &SmoothFunction,
    alpha: &[u32],
    spec: &MollifySpec,
    domain: &MollifyDomain,
    samples: &[Vec<f64>],
    step: f64,
    rule: &ConvolutionRule,
) -> Result<f64> {
    check_dim(rule.dim, alpha.len())?;
    if alpha.iter().sum::<u32>() > 2 {
        return Err(Error::Input("commutation is checked for |α| <= 2".into()));
    }
    let active: Vec<usize> = (0..alpha.len()).filter(|&i| alpha[i] > 0).collect();
    let af = |x: &[f64]| -> Result<f64> { mollify(|y| f.value(y), spec, x, domain, rule) };
    let shifted = |x: &[f64], moves: &[(usize, f64)]| -> Vec<f64> {
        let mut y = x.to_vec();
        for &(i, d) in moves {
            y[i] += d;
        }
        y
    };
    let mut worst = 0.0f64;
    for x in samples {
        let h = step;
        let fd = match active.as_slice() {
            [] => af(x)?,
            [i] if alpha[*i] == 1 => (af(&shifted(x, &[(*i, h)]))? - af(&shifted(x, &[(*i, -h)]))?) / (2.0 * h),
            [i] => (af(&shifted(x, &[(*i, h)]))? - 2.0 * af(x)? + af(&shifted(x, &[(*i, -h)]))?) / (h * h),
            [i, j] => {
                let pp = af(&shifted(x, &[(*i, h), (*j, h)]))?;
                let pm = af(&shifted(x, &[(*i, h), (*j, -h)]))?;
                let mp = af(&shifted(x, &[(*i, -h), (*j, h)]))?;
                let mm = af(&shifted(x, &[(*i, -h), (*j, -h)]))?;
                (pp - pm - mp + mm) / (4.0 * h * h)
            }
            _ => unreachable!(),
        };
        let exact = mollify(|y| f.derivative(alpha, y), spec, x, domain, rule)?;
        worst = worst.max((fd - exact).abs());
    }
    Ok(worst)
}

/// Iterated Gauss quadrature over `D_δ`: panels of at most `panel` width
/// with `nodes` points each, cut at the polygon's vertices and at `breaks`
/// along `x_1` (plus `b ± r` for each break when mollifying at radius `r`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceGrid {
    pub nodes: usize,
    pub panel: f64,
    #[serde(default)]
    pub breaks: Vec<f64>,
    pub per_axis: usize,
}

impl Default for ConvergenceGrid {
    fn default() -> Self {
        ConvergenceGrid { nodes: 6, panel: 0.05, breaks: Vec::new(), per_axis: 16 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergencePoint {
    pub r: f64,
    pub norm: f64,
}

fn split(a: f64, b: f64, cuts: &[f64], panel: f64) -> Vec<(f64, f64)> {
    let mut pts: Vec<f64> = vec![a, b];
    pts.extend(cuts.iter().copied().filter(|c| *c > a && *c < b));
    pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    pts.dedup();
    let mut out = Vec::new();
    for w in pts.windows(2) {
        let k = ((w[1] - w[0]) / panel).ceil().max(1.0) as usize;
        for j in 0..k {
            let lo = w[0] + (w[1] - w[0]) * j as f64 / k as f64;
            let hi = if j + 1 == k { w[1] } else { w[0] + (w[1] - w[0]) * (j + 1) as f64 / k as f64 };
            out.push((lo, hi));
        }
    }
    out
}

// quadrature nodes and weights over a domain
fn domain_nodes(domain: &MollifyDomain, grid: &ConvergenceGrid, cuts: &[f64]) -> Vec<(Vec<f64>, f64)> {
    let rule = gauss_legendre(grid.nodes);
    let mut out = Vec::new();
    match domain {
        MollifyDomain::Polygon { vertices } => {
            let xs: Vec<f64> = vertices.iter().map(|v| v[0]).collect();
            let xmin = xs.iter().cloned().fold(f64::INFINITY, f64::min);
            let xmax = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut all_cuts = xs.clone();
            all_cuts.extend_from_slice(cuts);
            for (a, b) in split(xmin, xmax, &all_cuts, grid.panel) {
                for (x, wx) in gauss_on(&rule, a, b) {
                    let (ylo, yhi) = vertical_section(vertices, x);
                    if !(yhi > ylo) {
                        continue;
                    }
                    for (c, d) in split(ylo, yhi, &[], grid.panel) {
                        for (y, wy) in gauss_on(&rule, c, d) {
                            out.push((vec![x, y], wx * wy));
                        }
                    }
                }
            }
        }
        MollifyDomain::Box { lo, hi } => {
            let axes: Vec<Vec<(f64, f64)>> = (0..lo.len())
                .map(|i| {
                    let c: &[f64] = if i == 0 { cuts } else { &[] };
                    split(lo[i], hi[i], c, grid.panel)
                        .into_iter()
                        .flat_map(|(a, b)| gauss_on(&rule, a, b).collect::<Vec<_>>())
                        .collect()
                })
                .collect();
            let mut idx = vec![0usize; lo.len()];
            'outer: loop {
                let x: Vec<f64> = idx.iter().enumerate().map(|(i, &k)| axes[i][k].0).collect();
                let w: f64 = idx.iter().enumerate().map(|(i, &k)| axes[i][k].1).product();
                out.push((x, w));
                for k in 0..idx.len() {
                    idx[k] += 1;
                    if idx[k] < axes[k].len() {
                        continue 'outer;
                    }
                    idx[k] = 0;
                }
                break;
            }
        }
    }
    out
}

// [ymin, ymax] of a convex polygon along the vertical line through x
fn vertical_section(vertices: &[[f64; 2]], x: f64) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let k = vertices.len();
    for i in 0..k {
        let (a, b) = (vertices[i], vertices[(i + 1) % k]);
        let (x0, x1) = (a[0].min(b[0]), a[0].max(b[0]));
        if x < x0 || x > x1 {
            continue;
        }
        if a[0] == b[0] {
            lo = lo.min(a[1].min(b[1]));
            hi = hi.max(a[1].max(b[1]));
        } else {
            let t = (x - a[0]) / (b[0] - a[0]);
            let y = a[1] + t * (b[1] - a[1]);
            lo = lo.min(y);
            hi = hi.max(y);
        }
    }
    (lo, hi)
}

/// `‖A_r f - f‖_{L_p(D_δ, w)}` for each radius.
pub fn convergence_test<F>(
    f: F,
    weight: &Weight,
    p: f64,
    delta: f64,
    radii: &[f64],
    domain: &MollifyDomain,
    grid: &ConvergenceGrid,
) -> Result<Vec<ConvergencePoint>>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    check_dim(domain.dim(), weight.dim)?;
    if !(p >= 1.0) {
        return Err(Error::Input("need p >= 1".into()));
    }
    if let Some((lo, hi)) = weight.ap_analytic_range(p) {
        let alpha = weight.alpha().unwrap_or(0.0);
        if !(alpha > lo && alpha < hi) {
            return Err(Error::Validity(vec![Violation::AlphaOutsideApWindow]));
        }
    }
    if radii.is_empty() || radii.iter().any(|&r| !(r > 0.0 && r < delta)) {
        return Err(Error::Input("radii must lie in (0, delta)".into()));
    }
    if radii.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Input("radii must be strictly decreasing".into()));
    }
    let inner = domain.inset(delta)?;
    let rule = ConvolutionRule::tensor(domain.dim(), grid.per_axis)?;
    radii
        .iter()
        .map(|&r| {
            let mut cuts = Vec::new();
            for &b in &grid.breaks {
                cuts.extend_from_slice(&[b - r, b, b + r]);
            }
            let nodes = domain_nodes(&inner, grid, &cuts);
            let parts: Vec<f64> = nodes
                .par_iter()
                .map(|(x, w)| {
                    let diff = rule.apply(&f, r, x) - f(x);
                    diff.abs().powf(p) * weight.radial(norm(x)) * w
                })
                .collect();
            let total: f64 = parts.iter().sum();
            Ok(ConvergencePoint { r, norm: total.powf(1.0 / p) })
        })
        .collect()
}
