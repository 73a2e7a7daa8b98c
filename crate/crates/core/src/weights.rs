//! Radial weights `w(x) = scale·h(|x|)` and the Muckenhoupt `A_p` condition.
//!
//! Integrals of a radial weight over a ball `B(c, R)` reduce to one dimension:
//! the sphere `|x| = ρ` meets the ball in a cap whose measure is known in
//! closed form, so only the radial profile has to be resolved numerically.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::extended::ExtendedReal;
use crate::geometry::{self, classify, IntegralVerdict, IntegrateConfig, Region, Verdict};
use crate::quad::{gauss_legendre, gauss_on, graded_partition, sin_power_integral, sphere_area};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum WeightKind {
    /// `|x|^α`.
    Polynomial { alpha: f64 },
    /// Piecewise-linear radial profile through `(radii[k], values[k])`,
    /// constant beyond the first and last radius.
    Tabulated { radii: Vec<f64>, values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Weight {
    pub kind: WeightKind,
    pub dim: usize,
    pub scale: f64,
}

impl Weight {
    pub fn power(dim: usize, alpha: f64) -> Result<Weight> {
        if dim == 0 || !alpha.is_finite() {
            return Err(Error::Input("power weight needs a dimension and a finite exponent".into()));
        }
        Ok(Weight { kind: WeightKind::Polynomial { alpha }, dim, scale: 1.0 })
    }

    pub fn tabulated(dim: usize, radii: Vec<f64>, values: Vec<f64>) -> Result<Weight> {
        check_dim(radii.len(), values.len())?;
        if dim == 0 || radii.is_empty() {
            return Err(Error::Input("tabulated weight needs a dimension and at least one sample".into()));
        }
        if radii[0] < 0.0 || radii.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Input("tabulated radii must be non-negative and strictly increasing".into()));
        }
        if values.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::Input("tabulated weight values must be positive".into()));
        }
        Ok(Weight { kind: WeightKind::Tabulated { radii, values }, dim, scale: 1.0 })
    }

    pub fn with_scale(mut self, scale: f64) -> Result<Weight> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::Input("weight scale must be positive".into()));
        }
        self.scale = scale;
        Ok(self)
    }

    pub fn alpha(&self) -> Option<f64> {
        match self.kind {
            WeightKind::Polynomial { alpha } => Some(alpha),
            WeightKind::Tabulated { .. } => None,
        }
    }

    /// Radial profile at `ρ = |x|`; `+inf` at the origin for negative exponents.
    pub fn radial(&self, rho: f64) -> f64 {
        let h = match &self.kind {
            WeightKind::Polynomial { alpha } => {
                if *alpha == 0.0 {
                    1.0
                } else {
                    rho.powf(*alpha)
                }
            }
            WeightKind::Tabulated { radii, values } => interpolate(radii, values, rho),
        };
        self.scale * h
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        let rho = norm(x);
        if let WeightKind::Polynomial { alpha } = self.kind {
            if rho == 0.0 && alpha < 0.0 {
                return Err(Error::Domain(format!("|x|^{alpha} is undefined at the origin")));
            }
        }
        Ok(self.radial(rho))
    }

    /// The open interval of exponents for which `|x|^α` is an `A_p` weight
    /// in `R^n`: `-n < α < n(p-1)`.
    pub fn ap_analytic_range(&self, p: f64) -> Option<(f64, f64)> {
        match self.kind {
            WeightKind::Polynomial { .. } => Some(ap_window(self.dim, p)),
            WeightKind::Tabulated { .. } => None,
        }
    }
}

pub fn ap_window(n: usize, p: f64) -> (f64, f64) {
    (-(n as f64), n as f64 * (p - 1.0))
}

fn interpolate(radii: &[f64], values: &[f64], rho: f64) -> f64 {
    if rho <= radii[0] {
        return values[0];
    }
    let last = radii.len() - 1;
    if rho >= radii[last] {
        return values[last];
    }
    let k = radii.partition_point(|&r| r <= rho) - 1;
    let t = (rho - radii[k]) / (radii[k + 1] - radii[k]);
    values[k] + t * (values[k + 1] - values[k])
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Measure of `{x : |x| = ρ} ∩ B(c, R)` with `d = |c|`.
fn cap_measure(n: usize, d: f64, radius: f64, rho: f64) -> f64 {
    if n == 1 {
        let inside = |x: f64| (x - d).abs() < radius;
        return inside(rho) as u8 as f64 + inside(-rho) as u8 as f64;
    }
    if rho + d <= radius {
        return sphere_area(n - 1) * rho.powi(n as i32 - 1);
    }
    if rho >= d + radius || rho <= d - radius || d == 0.0 {
        return 0.0;
    }
    let cos = ((rho * rho + d * d - radius * radius) / (2.0 * rho * d)).clamp(-1.0, 1.0);
    sphere_area(n - 2) * rho.powi(n as i32 - 1) * sin_power_integral(n - 2, 0.0, cos.acos())
}

/// Radial nodes `(ρ, weight)` for `B(c, R)`, four Gauss points per cell,
/// graded toward the origin with `depth` octaves when the ball reaches it.
fn shell_cells(n: usize, d: f64, radius: f64, depth: u32, per_octave: usize) -> Vec<(f64, f64)> {
    let outer = d + radius;
    let inner_full = radius - d;
    let lower = (d - radius).max(0.0);
    let mut pts: Vec<f64> = Vec::new();
    if lower == 0.0 {
        let breaks = if inner_full > 0.0 { vec![inner_full] } else { vec![] };
        for (a, _) in graded_partition(outer, depth, per_octave, &breaks) {
            pts.push(a);
        }
    }
    pts.push(outer);
    // partial shells cluster toward both ends of [|R - d|, R + d]
    if d > 0.0 {
        let lo = inner_full.abs();
        let cells = 8 * per_octave;
        for k in 0..=cells {
            let u = k as f64 / cells as f64;
            pts.push(lo + (outer - lo) * u * u * (3.0 - 2.0 * u));
        }
    }
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * outer);
    // the cap measure is smooth inside each cell, so a short Gauss rule resolves it
    let rule = gauss_legendre(SHELL_NODES);
    let mut out = Vec::with_capacity(SHELL_NODES * pts.len());
    for w in pts.windows(2) {
        for (rho, gw) in gauss_on(&rule, w[0], w[1]) {
            out.push((rho, cap_measure(n, d, radius, rho) * gw));
        }
    }
    out
}

const SHELL_NODES: usize = 4;

/// Integrates `w^exponent` over `region`. Balls use the exact radial
/// reduction; other regions use graded grids.
pub fn integrate_power(w: &Weight, exponent: f64, region: &Region, cfg: &IntegrateConfig) -> Result<IntegralVerdict> {
    check_dim(w.dim, region.dim())?;
    match region {
        Region::Ball { center, radius } => {
            let d = norm(center);
            let mut trace = Vec::new();
            let s = &cfg.schedule;
            for level in 0..=s.refinements {
                let cells = shell_cells(w.dim, d, *radius, s.depth(level), s.per_octave);
                trace.push(cells.iter().map(|&(rho, mu)| w.radial(rho).powf(exponent) * mu).sum());
                if classify(&trace, cfg.tol, cfg.growth) != Verdict::Inconclusive {
                    break;
                }
            }
            Ok(IntegralVerdict::from_trace(trace, cfg.tol, cfg.growth))
        }
        _ => geometry::integrate(|x| w.radial(norm(x)).powf(exponent), region, cfg),
    }
}

/// `∫_region w dx`.
pub fn weighted_measure(w: &Weight, region: &Region, cfg: &IntegrateConfig) -> Result<IntegralVerdict> {
    integrate_power(w, 1.0, region, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApVerdict {
    Satisfied,
    Violated,
    Inconclusive,
}

/// Outcome of the `A_p` ratio on one ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallRatio {
    pub center: Vec<f64>,
    pub radius: f64,
    pub ratio: ExtendedReal,
    pub verdict: Verdict,
}

/// The `A_p` ratio `(⨍_B w)(⨍_B w^{-1/(p-1)})^{p-1}` on one ball.
///
/// Both averages use the same nodes and are normalized by the discrete
/// ball measure, so the computed ratio is never below one.
pub fn ap_ratio(w: &Weight, p: f64, center: &[f64], radius: f64, cfg: &IntegrateConfig) -> Result<BallRatio> {
    check_dim(w.dim, center.len())?;
    if !(p > 1.0) {
        return Err(Error::Input(format!("A_p needs p > 1, got {p}")));
    }
    if !(radius > 0.0) {
        return Err(Error::Input("ball radius must be positive".into()));
    }
    let d = norm(center);
    let dual = -1.0 / (p - 1.0);
    let s = &cfg.schedule;
    let (mut t_w, mut t_dual, mut ratios) = (Vec::new(), Vec::new(), Vec::new());
    let mut verdict = Verdict::Inconclusive;
    for level in 0..=s.refinements {
        let cells = shell_cells(w.dim, d, radius, s.depth(level), s.per_octave);
        let (mut mass, mut iw, mut idual) = (0.0, 0.0, 0.0);
        for &(rho, mu) in &cells {
            let v = w.radial(rho);
            mass += mu;
            iw += v * mu;
            idual += v.powf(dual) * mu;
        }
        t_w.push(iw);
        t_dual.push(idual);
        ratios.push((iw / mass) * (idual / mass).powf(p - 1.0));
        let a = classify(&t_w, cfg.tol, cfg.growth);
        let b = classify(&t_dual, cfg.tol, cfg.growth);
        if a == Verdict::Divergent || b == Verdict::Divergent {
            verdict = Verdict::Divergent;
            break;
        }
        if a == Verdict::Finite && b == Verdict::Finite {
            verdict = Verdict::Finite;
            break;
        }
    }
    let ratio = match verdict {
        Verdict::Divergent => ExtendedReal::Infinite,
        _ => ExtendedReal::from_f64(*ratios.last().unwrap()),
    };
    Ok(BallRatio { center: center.to_vec(), radius, ratio, verdict })
}

/// Balls probed by [`ap_check`]: geometric radii, centers at fixed multiples
/// of each radius from the origin plus seeded random centers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallFamily {
    pub radius_min: f64,
    pub radius_max: f64,
    pub radius_count: usize,
    pub random_centers: usize,
    pub seed: u64,
}

impl Default for BallFamily {
    fn default() -> Self {
        BallFamily { radius_min: 1e-3, radius_max: 1.0, radius_count: 7, random_centers: 4, seed: 0 }
    }
}

const LATTICE: [f64; 5] = [0.0, 0.5, 1.0, 2.0, 4.0];

impl BallFamily {
    pub fn balls(&self, dim: usize) -> Result<Vec<(Vec<f64>, f64)>> {
        if !(self.radius_min > 0.0) || self.radius_max < self.radius_min || self.radius_count == 0 {
            return Err(Error::Input("ball family needs 0 < radius_min <= radius_max".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut out = Vec::new();
        for k in 0..self.radius_count {
            let t = if self.radius_count == 1 { 0.0 } else { k as f64 / (self.radius_count - 1) as f64 };
            let r = self.radius_min * (self.radius_max / self.radius_min).powf(t);
            for m in LATTICE {
                let mut c = vec![0.0; dim];
                c[0] = m * r;
                out.push((c, r));
            }
            for _ in 0..self.random_centers {
                let mut c: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let len = norm(&c).max(1e-12);
                let dist = rng.gen_range(0.0..5.0) * r;
                c.iter_mut().for_each(|v| *v *= dist / len);
                out.push((c, r));
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApReport {
    pub p: f64,
    pub sup_estimate: ExtendedReal,
    pub ball_count: usize,
    pub inconclusive_count: usize,
    pub verdict: ApVerdict,
    pub analytic_range: Option<(f64, f64)>,
    /// Whether the numerical evidence agrees with the analytic verdict.
    pub numeric_agrees: Option<bool>,
    pub balls: Vec<BallRatio>,
}

/// Estimates the `A_p` constant over a ball family.
///
/// Power weights get the analytic verdict, checked against the numbers: a
/// divergent average on some ball is expected exactly outside the window.
/// Tabulated weights are reported violated when an average diverges and
/// inconclusive otherwise, never satisfied.
pub fn ap_check(w: &Weight, p: f64, family: &BallFamily, cfg: &IntegrateConfig) -> Result<ApReport> {
    if !(p > 1.0) {
        return Err(Error::Input(format!("A_p needs p > 1, got {p}")));
    }
    let balls = family.balls(w.dim)?;
    let results: Vec<BallRatio> = balls
        .iter()
        .map(|(c, r)| ap_ratio(w, p, c, *r, cfg))
        .collect::<Result<_>>()?;
    let divergent = results.iter().any(|b| b.verdict == Verdict::Divergent);
    let inconclusive_count = results.iter().filter(|b| b.verdict == Verdict::Inconclusive).count();
    let sup_estimate = results
        .iter()
        .map(|b| b.ratio)
        .fold(ExtendedReal::Finite(1.0), |a, b| if b > a { b } else { a });
    let analytic_range = w.ap_analytic_range(p);
    let (verdict, numeric_agrees) = match (w.alpha(), analytic_range) {
        (Some(alpha), Some((lo, hi))) => {
            let inside = alpha > lo && alpha < hi;
            let v = if inside { ApVerdict::Satisfied } else { ApVerdict::Violated };
            (v, Some(inside != divergent))
        }
        _ => (if divergent { ApVerdict::Violated } else { ApVerdict::Inconclusive }, None),
    };
    Ok(ApReport {
        p,
        sup_estimate,
        ball_count: results.len(),
        inconclusive_count,
        verdict,
        analytic_range,
        numeric_agrees,
        balls: results,
    })
}
