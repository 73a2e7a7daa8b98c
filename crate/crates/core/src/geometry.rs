//! Cusp domains and integration near singular sets.
//!
//! A cusp domain is `H_g = {x : 0 < x_n < 1, 0 < x_i < g_i(x_n), i < n}` with
//! power profiles `g_i(τ) = c_i τ^{γ_i}`, `γ_i ≥ 1`. Integrals over such domains
//! (and over boxes and balls) are computed on grids that refine toward the
//! singular set, and a sequence of refinements decides whether the integral is
//! finite or divergent.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::extended::ExtendedReal;
use crate::quad::{graded_partition, sin_power_integral};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CuspDomainRepr", into = "CuspDomainRepr")]
pub struct CuspDomain {
    exponents: Vec<f64>,
    scales: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CuspDomainRepr {
    exponents: Vec<f64>,
    #[serde(default)]
    scales: Option<Vec<f64>>,
}

impl TryFrom<CuspDomainRepr> for CuspDomain {
    type Error = Error;
    fn try_from(r: CuspDomainRepr) -> Result<Self> {
        match r.scales {
            Some(s) => CuspDomain::with_scales(r.exponents, s),
            None => CuspDomain::new(r.exponents),
        }
    }
}

impl From<CuspDomain> for CuspDomainRepr {
    fn from(d: CuspDomain) -> Self {
        CuspDomainRepr { exponents: d.exponents, scales: Some(d.scales) }
    }
}

impl CuspDomain {
    /// Domain with unit scales `c_i = 1`.
    pub fn new(exponents: Vec<f64>) -> Result<Self> {
        let scales = vec![1.0; exponents.len()];
        Self::with_scales(exponents, scales)
    }

    pub fn with_scales(exponents: Vec<f64>, scales: Vec<f64>) -> Result<Self> {
        if exponents.is_empty() {
            return Err(Error::Input("a cusp domain needs dimension at least 2".into()));
        }
        check_dim(exponents.len(), scales.len())?;
        if let Some(g) = exponents.iter().find(|g| !g.is_finite() || **g < 1.0) {
            return Err(Error::Input(format!("profile exponent {g} must be finite and at least 1")));
        }
        if let Some(c) = scales.iter().find(|c| !c.is_finite() || **c <= 0.0) {
            return Err(Error::Input(format!("profile scale {c} must be positive")));
        }
        Ok(CuspDomain { exponents, scales })
    }

    /// The Lipschitz reference domain `H_1` in `R^n` (all exponents 1).
    pub fn lipschitz(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Input("a cusp domain needs dimension at least 2".into()));
        }
        Self::new(vec![1.0; n - 1])
    }

    /// Domain in `R^n` with equal exponents `σ`, so `γ = σ(n-1) + 1`.
    pub fn isotropic(n: usize, sigma: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::Input("a cusp domain needs dimension at least 2".into()));
        }
        Self::new(vec![sigma; n - 1])
    }

    pub fn dim(&self) -> usize {
        self.exponents.len() + 1
    }

    pub fn exponents(&self) -> &[f64] {
        &self.exponents
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    /// `γ = 1 + Σ γ_i`.
    pub fn gamma(&self) -> f64 {
        1.0 + self.exponents.iter().sum::<f64>()
    }

    /// `σ = (γ - 1)/(n - 1)`, the mean profile exponent.
    pub fn sigma(&self) -> f64 {
        (self.gamma() - 1.0) / self.exponents.len() as f64
    }

    /// `(min c_i, max c_i)`.
    pub fn scale_bounds(&self) -> (f64, f64) {
        let lo = self.scales.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = self.scales.iter().cloned().fold(0.0, f64::max);
        (lo, hi)
    }

    pub fn is_lipschitz(&self) -> bool {
        self.exponents.iter().all(|&g| g == 1.0)
    }

    /// `g_i(τ) = c_i τ^{γ_i}`.
    pub fn profile(&self, i: usize, tau: f64) -> f64 {
        self.scales[i] * tau.powf(self.exponents[i])
    }

    /// `Π g_i(τ)`, the cross-section volume at height `τ`.
    pub fn section(&self, tau: f64) -> f64 {
        self.scales.iter().product::<f64>() * tau.powf(self.gamma() - 1.0)
    }

    pub fn volume(&self) -> f64 {
        self.scales.iter().product::<f64>() / self.gamma()
    }

    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        check_dim(self.dim(), x.len())?;
        let t = x[self.dim() - 1];
        if !(t > 0.0 && t < 1.0) {
            return Ok(false);
        }
        Ok(x[..self.dim() - 1].iter().enumerate().all(|(i, &xi)| xi > 0.0 && xi < self.profile(i, t)))
    }
}

/// An integration region. Grids refine toward its singular set: the tip
/// `x_n = 0` of a cusp, the face `x_n = lo_n` of a box, the center of a ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Region {
    Cusp(CuspDomain),
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

impl Region {
    pub fn unit_interval() -> Region {
        Region::Box { lo: vec![0.0], hi: vec![1.0] }
    }

    pub fn dim(&self) -> usize {
        match self {
            Region::Cusp(d) => d.dim(),
            Region::Box { lo, .. } => lo.len(),
            Region::Ball { center, .. } => center.len(),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Region::Cusp(_) => Ok(()),
            Region::Box { lo, hi } => {
                check_dim(lo.len(), hi.len())?;
                if lo.is_empty() || lo.iter().zip(hi).any(|(a, b)| !(a < b)) {
                    return Err(Error::Input("box corners must satisfy lo < hi".into()));
                }
                Ok(())
            }
            Region::Ball { center, radius } => {
                if center.is_empty() || !(*radius > 0.0) || !radius.is_finite() {
                    return Err(Error::Input("ball needs a positive radius".into()));
                }
                Ok(())
            }
        }
    }

    /// Lebesgue measure.
    pub fn measure(&self) -> f64 {
        match self {
            Region::Cusp(d) => d.volume(),
            Region::Box { lo, hi } => lo.iter().zip(hi).map(|(a, b)| b - a).product(),
            Region::Ball { center, radius } => crate::quad::ball_volume(center.len()) * radius.powi(center.len() as i32),
        }
    }

    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        check_dim(self.dim(), x.len())?;
        Ok(match self {
            Region::Cusp(d) => d.contains(x)?,
            Region::Box { lo, hi } => x.iter().zip(lo.iter().zip(hi)).all(|(v, (a, b))| v > a && v < b),
            Region::Ball { center, radius } => dist(x, center) < *radius,
        })
    }

    // length of the graded coordinate
    fn graded_length(&self) -> f64 {
        match self {
            Region::Cusp(_) => 1.0,
            Region::Box { lo, hi } => hi[hi.len() - 1] - lo[lo.len() - 1],
            Region::Ball { radius, .. } => *radius,
        }
    }

    // breakpoints given in absolute coordinates, converted to graded offsets
    fn graded_breaks(&self, breaks: &[f64]) -> Vec<f64> {
        match self {
            Region::Box { lo, .. } => breaks.iter().map(|b| b - lo[lo.len() - 1]).collect(),
            _ => breaks.to_vec(),
        }
    }

    /// Visits the cells of the slab `a < s < b` of the graded coordinate,
    /// with `inner` cells per transverse axis.
    fn visit_slab(&self, a: f64, b: f64, inner: usize, visit: &mut dyn FnMut(&[f64], &[f64], &[f64], f64)) {
        let n = self.dim();
        let mut lo = vec![0.0; n];
        let mut hi = vec![0.0; n];
        let mut node = vec![0.0; n];
        match self {
            Region::Cusp(d) => {
                let gamma = d.gamma();
                let scale: f64 = d.scales.iter().product();
                let slab = scale * (b.powf(gamma) - a.powf(gamma)) / gamma;
                let weight = slab / (inner as f64).powi(n as i32 - 1);
                let mid = 0.5 * (a + b);
                let widths: Vec<f64> = (0..n - 1).map(|i| d.profile(i, mid)).collect();
                lo[n - 1] = a;
                hi[n - 1] = b;
                node[n - 1] = mid;
                for_each_index(n - 1, inner, |idx| {
                    for i in 0..n - 1 {
                        lo[i] = idx[i] as f64 / inner as f64;
                        hi[i] = (idx[i] + 1) as f64 / inner as f64;
                        node[i] = (idx[i] as f64 + 0.5) / inner as f64 * widths[i];
                    }
                    visit(&lo, &hi, &node, weight);
                });
            }
            Region::Box { lo: blo, hi: bhi } => {
                let base = blo[n - 1];
                let mut weight = b - a;
                for i in 0..n - 1 {
                    weight *= (bhi[i] - blo[i]) / inner as f64;
                }
                lo[n - 1] = base + a;
                hi[n - 1] = base + b;
                node[n - 1] = base + 0.5 * (a + b);
                for_each_index(n - 1, inner, |idx| {
                    for i in 0..n - 1 {
                        let h = (bhi[i] - blo[i]) / inner as f64;
                        lo[i] = blo[i] + h * idx[i] as f64;
                        hi[i] = lo[i] + h;
                        node[i] = lo[i] + 0.5 * h;
                    }
                    visit(&lo, &hi, &node, weight);
                });
            }
            Region::Ball { center, .. } => {
                let rho = 0.5 * (a + b);
                let shell = (b.powi(n as i32) - a.powi(n as i32)) / n as f64;
                lo[0] = a;
                hi[0] = b;
                if n == 1 {
                    for sign in [-1.0, 1.0] {
                        node[0] = center[0] + sign * rho;
                        visit(&lo, &hi, &node, b - a);
                    }
                    return;
                }
                // hyperspherical angles φ_1..φ_{n-2} in [0, π], φ_{n-1} in [0, 2π)
                let polar = n - 2;
                let dpolar = std::f64::consts::PI / inner as f64;
                let dazi = std::f64::consts::PI / inner as f64;
                let polar_weights: Vec<Vec<f64>> = (0..polar)
                    .map(|k| {
                        let power = n - 2 - k;
                        (0..inner)
                            .map(|j| sin_power_integral(power, j as f64 * dpolar, (j + 1) as f64 * dpolar))
                            .collect()
                    })
                    .collect();
                let mut dir = vec![0.0; n];
                for_each_index(polar, inner, |idx| {
                    let mut w = shell * dazi;
                    let mut sin_prod = 1.0;
                    for k in 0..polar {
                        let phi = (idx[k] as f64 + 0.5) * dpolar;
                        w *= polar_weights[k][idx[k]];
                        dir[k] = sin_prod * phi.cos();
                        sin_prod *= phi.sin();
                        lo[k + 1] = idx[k] as f64 * dpolar;
                        hi[k + 1] = lo[k + 1] + dpolar;
                    }
                    for j in 0..2 * inner {
                        let phi = (j as f64 + 0.5) * dazi;
                        dir[n - 2] = sin_prod * phi.cos();
                        dir[n - 1] = sin_prod * phi.sin();
                        lo[n - 1] = j as f64 * dazi;
                        hi[n - 1] = lo[n - 1] + dazi;
                        for i in 0..n {
                            node[i] = center[i] + rho * dir[i];
                        }
                        visit(&lo, &hi, &node, w);
                    }
                });
            }
        }
    }

    /// Sum of `f(node)·weight` over the slabs, parallel over slabs and
    /// accumulated in slab order so results are reproducible.
    fn sum_over<F>(&self, slabs: &[(f64, f64)], inner: usize, f: &F) -> Result<f64>
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let partials: Vec<Result<f64>> = slabs
            .par_iter()
            .map(|&(a, b)| {
                let mut acc = 0.0;
                let mut bad: Option<Vec<f64>> = None;
                self.visit_slab(a, b, inner, &mut |_, _, x, w| {
                    let v = f(x);
                    if v.is_nan() && bad.is_none() {
                        bad = Some(x.to_vec());
                    }
                    acc += v * w;
                });
                match bad {
                    Some(x) => Err(Error::Evaluation(format!("integrand is NaN at {x:?}"))),
                    None => Ok(acc),
                }
            })
            .collect();
        let mut total = 0.0;
        for p in partials {
            total += p?;
        }
        Ok(total)
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn for_each_index(dims: usize, size: usize, mut f: impl FnMut(&[usize])) {
    let mut idx = vec![0usize; dims];
    loop {
        f(&idx);
        let mut k = 0;
        loop {
            if k == dims {
                return;
            }
            idx[k] += 1;
            if idx[k] < size {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// One cell of a quadrature grid: a box in the region's reference
/// coordinates, the physical node and the exact cell measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub node: Vec<f64>,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureGrid {
    pub cells: Vec<GridCell>,
    pub levels: u32,
    pub grading: f64,
}

impl QuadratureGrid {
    pub fn total_weight(&self) -> f64 {
        self.cells.iter().map(|c| c.weight).sum()
    }

    pub fn integrate<F: Fn(&[f64]) -> f64>(&self, f: F) -> Result<f64> {
        let mut total = 0.0;
        for c in &self.cells {
            let v = f(&c.node);
            if v.is_nan() {
                return Err(Error::Evaluation(format!("integrand is NaN at {:?}", c.node)));
            }
            total += v * c.weight;
        }
        Ok(total)
    }
}

/// Grid with `2^levels` cells along the graded coordinate, placed at
/// `len·(k/N)^{1+grading}` (so `grading = 0` is uniform), and `2^levels`
/// cells per transverse axis. Cell weights are exact measures, so
/// the weights of a cusp grid sum to its volume.
pub fn build_grid(region: &Region, levels: u32, grading: f64) -> Result<QuadratureGrid> {
    region.validate()?;
    if !(grading >= 0.0) || !grading.is_finite() {
        return Err(Error::Input("grading must be a finite non-negative number".into()));
    }
    if levels > 24 {
        return Err(Error::Input("too many grid levels".into()));
    }
    let count = 1usize << levels;
    let len = region.graded_length();
    let pts: Vec<f64> = (0..=count)
        .map(|k| len * (k as f64 / count as f64).powf(1.0 + grading))
        .collect();
    let mut cells = Vec::new();
    for w in pts.windows(2) {
        region.visit_slab(w[0], w[1], count, &mut |lo, hi, node, weight| {
            cells.push(GridCell { lo: lo.to_vec(), hi: hi.to_vec(), node: node.to_vec(), weight });
        });
    }
    Ok(QuadratureGrid { cells, levels, grading })
}

/// Refinement schedule: level `k` resolves `start_depth·2^k` dyadic octaves
/// toward the singular set with `per_octave` cells each, and `inner` cells
/// per transverse axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub start_depth: u32,
    pub refinements: u32,
    pub per_octave: usize,
    pub inner: usize,
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule { start_depth: 8, refinements: 6, per_octave: 16, inner: 16 }
    }
}

impl Schedule {
    pub fn depth(&self, level: u32) -> u32 {
        self.start_depth << level
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegrateConfig {
    pub schedule: Schedule,
    /// Relative change between successive estimates accepted as converged.
    pub tol: f64,
    /// Successive-estimate ratio that counts as growth.
    pub growth: f64,
    /// Extra cell boundaries along the graded coordinate (absolute values).
    #[serde(default)]
    pub breakpoints: Vec<f64>,
}

impl Default for IntegrateConfig {
    fn default() -> Self {
        IntegrateConfig { schedule: Schedule::default(), tol: 1e-3, growth: 1.5, breakpoints: Vec::new() }
    }
}

impl IntegrateConfig {
    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || !(self.growth > 1.0) {
            return Err(Error::Input("need tol > 0 and growth > 1".into()));
        }
        let s = &self.schedule;
        if s.start_depth == 0 || s.per_octave == 0 || s.inner == 0 || s.refinements == 0 {
            return Err(Error::Input("schedule needs at least two non-empty levels".into()));
        }
        if s.depth(s.refinements) > 4096 {
            return Err(Error::Input("schedule resolves more octaves than f64 can represent".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Finite,
    Divergent,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegralVerdict {
    pub verdict: Verdict,
    /// Last estimate when finite or inconclusive, `inf` when divergent.
    pub value: ExtendedReal,
    /// Estimates at each refinement level.
    pub estimates: Vec<f64>,
}

impl IntegralVerdict {
    pub fn from_trace(trace: Vec<f64>, tol: f64, growth: f64) -> IntegralVerdict {
        let verdict = classify(&trace, tol, growth);
        let last = trace.last().copied().unwrap_or(f64::NAN);
        let value = match verdict {
            Verdict::Divergent => ExtendedReal::Infinite,
            _ => ExtendedReal::from_f64(last),
        };
        IntegralVerdict { verdict, value, estimates: trace }
    }

    pub fn is_finite(&self) -> bool {
        self.verdict == Verdict::Finite
    }
}

/// Classifies a sequence of refinement estimates.
///
/// Finite once two successive estimates agree to `tol` relative; divergent if
/// an estimate is infinite or the last two successive ratios are both at
/// least `growth`.
pub fn classify(trace: &[f64], tol: f64, growth: f64) -> Verdict {
    let k = trace.len();
    if let Some(last) = trace.last() {
        if last.is_infinite() {
            return Verdict::Divergent;
        }
    }
    if k >= 2 && (trace[k - 1] - trace[k - 2]).abs() <= tol * trace[k - 1].abs() {
        return Verdict::Finite;
    }
    if k >= 3 {
        let r1 = trace[k - 1].abs() / trace[k - 2].abs();
        let r0 = trace[k - 2].abs() / trace[k - 3].abs();
        if r1 >= growth && r0 >= growth {
            return Verdict::Divergent;
        }
    }
    Verdict::Inconclusive
}

/// One fixed-resolution estimate: `depth` octaves toward the singular set,
/// `per_octave` cells each, `inner` cells per transverse axis.
pub fn integrate_level<F>(f: F, region: &Region, depth: u32, per_octave: usize, inner: usize, breakpoints: &[f64]) -> Result<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    region.validate()?;
    if per_octave == 0 || inner == 0 || depth > 4096 {
        return Err(Error::Input("resolution needs non-empty cells and at most 4096 octaves".into()));
    }
    let slabs = graded_partition(region.graded_length(), depth, per_octave, &region.graded_breaks(breakpoints));
    region.sum_over(&slabs, inner, &f)
}

/// Integrates `f` over `region` along the refinement schedule, stopping as
/// soon as the estimates are classified finite or divergent.
pub fn integrate<F>(f: F, region: &Region, cfg: &IntegrateConfig) -> Result<IntegralVerdict>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    region.validate()?;
    cfg.validate()?;
    let s = &cfg.schedule;
    let len = region.graded_length();
    let breaks = region.graded_breaks(&cfg.breakpoints);
    let mut trace = Vec::new();
    for level in 0..=s.refinements {
        let slabs = graded_partition(len, s.depth(level), s.per_octave, &breaks);
        trace.push(region.sum_over(&slabs, s.inner, &f)?);
        if classify(&trace, cfg.tol, cfg.growth) != Verdict::Inconclusive {
            break;
        }
    }
    Ok(IntegralVerdict::from_trace(trace, cfg.tol, cfg.growth))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn domain_basics() {
        let d = CuspDomain::new(vec![2.0]).unwrap();
        assert_eq!(d.dim(), 2);
        assert_eq!(d.gamma(), 3.0);
        assert_eq!(d.sigma(), 2.0);
        assert_relative_eq!(d.volume(), 1.0 / 3.0);
        assert!(d.contains(&[0.1, 0.5]).unwrap());
        assert!(!d.contains(&[0.3, 0.5]).unwrap());
        assert!(!d.contains(&[0.1, 1.0]).unwrap());
        assert!(CuspDomain::new(vec![0.5]).is_err());
        assert!(CuspDomain::new(vec![]).is_err());
        assert!(matches!(d.contains(&[0.1]), Err(Error::Dimension { expected: 2, got: 1 })));
    }

    #[test]
    fn anisotropic_scales() {
        let d = CuspDomain::with_scales(vec![1.5, 2.0], vec![2.0, 0.5]).unwrap();
        assert_eq!(d.gamma(), 4.5);
        assert_relative_eq!(d.volume(), 1.0 / 4.5);
        assert_eq!(d.scale_bounds(), (0.5, 2.0));
    }

    #[test]
    fn grid_weights_sum_to_volume() {
        let d = CuspDomain::new(vec![2.0]).unwrap();
        let g = build_grid(&Region::Cusp(d), 5, 2.0).unwrap();
        assert_eq!(g.cells.len(), 32 * 32);
        assert_relative_eq!(g.total_weight(), 1.0 / 3.0, max_relative = 1e-12);
        let uniform = build_grid(&Region::unit_interval(), 3, 0.0).unwrap();
        assert!(uniform.cells.iter().all(|c| (c.weight - 0.125).abs() < 1e-15));
    }

    #[test]
    fn ball_grid_measure() {
        let b = Region::Ball { center: vec![0.0, 0.0, 0.0], radius: 2.0 };
        let g = build_grid(&b, 3, 1.0).unwrap();
        assert_relative_eq!(g.total_weight(), b.measure(), max_relative = 1e-12);
    }

    #[test]
    fn integrable_power_on_interval() {
        let v = integrate(|x| x[0].powf(-0.5), &Region::unit_interval(), &IntegrateConfig::default()).unwrap();
        assert_eq!(v.verdict, Verdict::Finite);
        assert_relative_eq!(v.value.to_f64(), 2.0, max_relative = 2e-3);
    }

    #[test]
    fn non_integrable_power_diverges() {
        for e in [1.0, 1.2] {
            let v = integrate(|x| x[0].powf(-e), &Region::unit_interval(), &IntegrateConfig::default()).unwrap();
            assert_eq!(v.verdict, Verdict::Divergent, "exponent {e}");
            assert_eq!(v.value, ExtendedReal::Infinite);
        }
    }

    #[test]
    fn nan_is_an_evaluation_error() {
        let r = integrate(|_| f64::NAN, &Region::unit_interval(), &IntegrateConfig::default());
        assert!(matches!(r, Err(Error::Evaluation(_))));
    }

    #[test]
    fn classify_rules() {
        assert_eq!(classify(&[1.0, 1.0005], 1e-3, 1.5), Verdict::Finite);
        assert_eq!(classify(&[1.0, 2.0, 4.0], 1e-3, 1.5), Verdict::Divergent);
        assert_eq!(classify(&[1.0, 2.0, 2.5], 1e-3, 1.5), Verdict::Inconclusive);
        assert_eq!(classify(&[1.0, f64::INFINITY], 1e-3, 1.5), Verdict::Divergent);
    }
}
