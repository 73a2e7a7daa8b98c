//! Trial functions that concentrate at the cusp tip, and the ratio
//! `‖u‖_{L_s(w)} / ‖u‖_{W^1_p(w)}` along a shrinking concentration scale.
//!
//! For a family concentrating at scale `ε` the ratio behaves like `ε^κ`
//! with `κ = 1 + (α+γ)(1/s - 1/p)`, so it stays bounded for `s` below the
//! weighted threshold and grows above it. Growth is slow near the threshold:
//! two decades of `ε` multiply the ratio by `100^{-κ}`.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::exponents::EmbeddingQuery;
use crate::geometry::{integrate_level, CuspDomain, Region};
use crate::weights::{norm, Weight};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TrialKind {
    /// `max(0, 1 - |x - c|/ε)`.
    TipBump,
    /// `(max(|x - c|, ε)^{-β} - 1)_+`.
    PowerSpike { beta: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialFunction {
    pub kind: TrialKind,
    pub eps: f64,
    pub center: Vec<f64>,
    pub amplitude: f64,
}

impl TrialFunction {
    /// Member of the family centered at the origin, the cusp tip.
    pub fn at_tip(kind: TrialKind, dim: usize, eps: f64) -> Result<Self> {
        Self::new(kind, vec![0.0; dim], eps)
    }

    pub fn new(kind: TrialKind, center: Vec<f64>, eps: f64) -> Result<Self> {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::Input("concentration scale must be positive".into()));
        }
        if let TrialKind::PowerSpike { beta } = kind {
            if !(beta > 0.0) || eps >= 1.0 {
                return Err(Error::Input("power spike needs beta > 0 and eps < 1".into()));
            }
        }
        Ok(TrialFunction { kind, eps, center, amplitude: 1.0 })
    }

    pub fn scaled(mut self, amplitude: f64) -> Self {
        self.amplitude *= amplitude;
        self
    }

    fn offset(&self, x: &[f64]) -> (Vec<f64>, f64) {
        let d: Vec<f64> = x.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        let r = norm(&d);
        (d, r)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let (_, r) = self.offset(x);
        self.amplitude
            * match self.kind {
                TrialKind::TipBump => (1.0 - r / self.eps).max(0.0),
                TrialKind::PowerSpike { beta } => (r.max(self.eps).powf(-beta) - 1.0).max(0.0),
            }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let (d, r) = self.offset(x);
        let radial = match self.kind {
            TrialKind::TipBump if r < self.eps && r > 0.0 => -1.0 / self.eps,
            TrialKind::PowerSpike { beta } if r > self.eps && r < 1.0 => -beta * r.powf(-beta - 1.0),
            _ => 0.0,
        };
        d.iter().map(|v| self.amplitude * radial * v / r.max(f64::MIN_POSITIVE)).collect()
    }

    // radii where the function or its gradient has a kink
    fn kinks(&self) -> Vec<f64> {
        match self.kind {
            TrialKind::TipBump => vec![self.eps],
            TrialKind::PowerSpike { .. } => vec![self.eps, 1.0],
        }
    }

    // radius outside which the function vanishes
    fn support(&self) -> f64 {
        match self.kind {
            TrialKind::TipBump => self.eps,
            TrialKind::PowerSpike { .. } => 1.0,
        }
    }
}

/// Resolution of the norm integrals: octaves below the concentration scale,
/// cells per octave and cells per transverse axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResolution {
    pub extra_octaves: u32,
    pub per_octave: usize,
    pub inner: usize,
    /// Relative disagreement between this resolution and a doubled one
    /// beyond which a ratio is not trusted.
    pub tol: f64,
}

impl Default for ProbeResolution {
    fn default() -> Self {
        ProbeResolution { extra_octaves: 24, per_octave: 16, inner: 16, tol: 1e-2 }
    }
}

// Boxes are graded along one axis only, so clip them to the support to
// keep the transverse cells on the function.
fn clip_to_support(u: &TrialFunction, region: &Region) -> Result<Region> {
    let Region::Box { lo, hi } = region else {
        return Ok(region.clone());
    };
    let r = u.support();
    let lo: Vec<f64> = lo.iter().zip(&u.center).map(|(a, c)| a.max(c - r)).collect();
    let hi: Vec<f64> = hi.iter().zip(&u.center).map(|(b, c)| b.min(c + r)).collect();
    if lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
        return Err(Error::Input("trial function vanishes on the region".into()));
    }
    Ok(Region::Box { lo, hi })
}

fn ratio_at(u: &TrialFunction, p: f64, s: f64, w: &Weight, region: &Region, depth: u32, per_octave: usize, inner: usize) -> Result<f64> {
    let region = &clip_to_support(u, region)?;
    let n = region.dim();
    let breaks: Vec<f64> = match region {
        Region::Box { lo, .. } => {
            let c = u.center[n - 1];
            let mut b = vec![c];
            for k in u.kinks() {
                b.extend_from_slice(&[c - k, c + k]);
            }
            b.into_iter().filter(|v| *v > lo[n - 1]).collect()
        }
        _ => u.kinks(),
    };
    let wt = |x: &[f64]| w.radial(norm(x));
    let ls = integrate_level(|x| u.value(x).abs().powf(s) * wt(x), region, depth, per_octave, inner, &breaks)?;
    let lp = integrate_level(|x| u.value(x).abs().powf(p) * wt(x), region, depth, per_octave, inner, &breaks)?;
    let mut w1 = lp.powf(1.0 / p);
    for i in 0..n {
        let gi = integrate_level(|x| u.gradient(x)[i].abs().powf(p) * wt(x), region, depth, per_octave, inner, &breaks)?;
        w1 += gi.powf(1.0 / p);
    }
    if !(w1 > 0.0) {
        return Err(Error::Input("trial function vanishes on the region".into()));
    }
    Ok(ls.powf(1.0 / s) / w1)
}

/// `‖u‖_{L_s(D,w)} / ‖u‖_{W^1_p(D,w)}` with
/// `‖u‖_{W^1_p(D,w)} = ‖u‖_{L_p(D,w)} + Σ_i ‖∂_i u‖_{L_p(D,w)}`.
///
/// Errors when the estimate moves by more than `res.tol` under doubling of
/// the resolution.
pub fn embedding_ratio(u: &TrialFunction, p: f64, s: f64, w: &Weight, region: &Region, res: &ProbeResolution) -> Result<f64> {
    check_dim(region.dim(), u.center.len())?;
    check_dim(region.dim(), w.dim)?;
    if !(p >= 1.0 && s >= 1.0) {
        return Err(Error::Input("need p >= 1 and s >= 1".into()));
    }
    let depth = (1.0 / u.eps).log2().ceil().max(0.0) as u32 + res.extra_octaves;
    let a = ratio_at(u, p, s, w, region, depth, res.per_octave, res.inner)?;
    let b = ratio_at(u, p, s, w, region, depth + 4, 2 * res.per_octave, 2 * res.inner)?;
    if (a - b).abs() > res.tol * b.abs() {
        return Err(Error::Inconclusive(format!("ratio {b} not resolved at eps = {}", u.eps)));
    }
    Ok(b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeVerdict {
    Bounded,
    BlowUp,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub s: f64,
    /// `(ε, ratio)`, ratio `None` where the quadrature was not resolved.
    pub ratios: Vec<(f64, Option<f64>)>,
    /// `ratio(ε_last) / ratio(100 ε_last)`.
    pub growth: Option<f64>,
    /// `κ = 1 + (α+γ)(1/s - 1/p)`, the predicted exponent in `ratio ~ ε^κ`.
    pub scaling_exponent: f64,
    pub verdict: ProbeVerdict,
}

/// Margins for reading a ratio sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeMargins {
    /// Growth across the last two decades that counts as blow-up.
    pub growth: f64,
    /// Largest growth across the last two decades still read as bounded.
    pub bounded: f64,
}

impl Default for ProbeMargins {
    fn default() -> Self {
        ProbeMargins { growth: 1.5, bounded: 1.2 }
    }
}

/// `10^{-1}, 10^{-1.5}, …, 10^{-5}`.
pub fn default_schedule() -> Vec<f64> {
    (0..=8).map(|k| 10f64.powf(-1.0 - 0.5 * k as f64)).collect()
}

/// Cusp domain for a query: `H_g` with `γ_1 = γ - 1` in the plane, equal
/// exponents `σ` in higher dimensions.
pub fn query_domain(q: &EmbeddingQuery<f64>) -> Result<CuspDomain> {
    if q.n < 2 {
        return Err(Error::Input("probe needs n >= 2".into()));
    }
    if q.n == 2 {
        CuspDomain::new(vec![q.gamma - 1.0])
    } else {
        CuspDomain::isotropic(q.n as usize, q.sigma())
    }
}

/// Reads the ratio trend over the last two decades of the schedule.
///
/// Blow-up: growth at least `margins.growth`. Bounded: growth below
/// `margins.bounded`, which includes decreasing ratios. Anything else, or
/// an unresolved ratio in the last two decades, is inconclusive.
pub fn classify_ratios(ratios: &[(f64, Option<f64>)], margins: &ProbeMargins) -> (Option<f64>, ProbeVerdict) {
    let Some(&(eps_last, last)) = ratios.last() else {
        return (None, ProbeVerdict::Inconclusive);
    };
    let target = (100.0 * eps_last).log10();
    let Some(start) = ratios.iter().position(|(e, _)| (e.log10() - target).abs() < 0.05) else {
        return (None, ProbeVerdict::Inconclusive);
    };
    if ratios[start..].iter().any(|(_, r)| r.is_none()) {
        return (None, ProbeVerdict::Inconclusive);
    }
    let growth = last.unwrap() / ratios[start].1.unwrap();
    let verdict = if growth >= margins.growth {
        ProbeVerdict::BlowUp
    } else if growth < margins.bounded {
        ProbeVerdict::Bounded
    } else {
        ProbeVerdict::Inconclusive
    };
    (Some(growth), verdict)
}

pub fn run_probe(q: &EmbeddingQuery<f64>, s: f64, kind: TrialKind, schedule: &[f64]) -> Result<ProbeReport> {
    run_probe_with(q, s, kind, schedule, &ProbeResolution::default(), &ProbeMargins::default())
}

pub fn run_probe_with(
    q: &EmbeddingQuery<f64>,
    s: f64,
    kind: TrialKind,
    schedule: &[f64],
    res: &ProbeResolution,
    margins: &ProbeMargins,
) -> Result<ProbeReport> {
    if schedule.len() < 2 || schedule.windows(2).any(|w| !(w[1] < w[0])) || schedule.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::Input("eps schedule must be positive and strictly decreasing".into()));
    }
    if schedule[0] / schedule[schedule.len() - 1] < 1e4 * (1.0 - 1e-9) {
        return Err(Error::Input("eps schedule must span at least four decades".into()));
    }
    if !(q.p > 1.0) || !(s >= 1.0) {
        return Err(Error::Input("need p > 1 and s >= 1".into()));
    }
    let domain = query_domain(q)?;
    let region = Region::Cusp(domain);
    let w = Weight::power(q.n as usize, q.alpha)?;
    let mut ratios = Vec::with_capacity(schedule.len());
    for &eps in schedule {
        let u = TrialFunction::at_tip(kind, q.n as usize, eps)?;
        let r = match embedding_ratio(&u, q.p, s, &w, &region, res) {
            Ok(v) => Some(v),
            Err(Error::Inconclusive(_)) => None,
            Err(e) => return Err(e),
        };
        ratios.push((eps, r));
    }
    let (growth, verdict) = classify_ratios(&ratios, margins);
    let scaling_exponent = 1.0 + (q.alpha + q.gamma) * (1.0 / s - 1.0 / q.p);
    Ok(ProbeReport { s, ratios, growth, scaling_exponent, verdict })
}
