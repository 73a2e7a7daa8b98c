//! The map `φ_a : H_1 → H_g`,
//! `φ_a(x) = (x_1 g_1^a(x_n)/x_n, …, x_{n-1} g_{n-1}^a(x_n)/x_n, x_n^a)`,
//! and the integrals that measure its distortion.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::geometry::{integrate, CuspDomain, IntegralVerdict, IntegrateConfig, Region, Verdict};
use crate::weights::norm;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CuspMap {
    a: f64,
    domain: CuspDomain,
    source: CuspDomain,
}

impl CuspMap {
    pub fn new(domain: CuspDomain, a: f64) -> Result<CuspMap> {
        if !(a > 0.0 && a <= 1.0) {
            return Err(Error::Input(format!("map parameter a = {a} must lie in (0, 1]")));
        }
        let source = CuspDomain::lipschitz(domain.dim())?;
        Ok(CuspMap { a, domain, source })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn domain(&self) -> &CuspDomain {
        &self.domain
    }

    pub fn source(&self) -> &CuspDomain {
        &self.source
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    // g_i^a(t)/t = c_i^a t^{aγ_i - 1}
    fn ratio(&self, i: usize, t: f64) -> f64 {
        let c = self.domain.scales()[i];
        let e = self.a * self.domain.exponents()[i] - 1.0;
        let ca = if c == 1.0 { 1.0 } else { c.powf(self.a) };
        let te = if e == 0.0 { 1.0 } else { t.powf(e) };
        ca * te
    }

    fn check_source(&self, x: &[f64]) -> Result<()> {
        if !self.source.contains(x)? {
            return Err(Error::Input(format!("{x:?} is not in the source domain")));
        }
        Ok(())
    }

    fn check_height(&self, x: &[f64]) -> Result<()> {
        check_dim(self.dim(), x.len())?;
        if !(x[self.dim() - 1] > 0.0) {
            return Err(Error::Domain("the map is singular at x_n = 0".into()));
        }
        Ok(())
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_source(x)?;
        Ok(self.apply_unchecked(x))
    }

    fn apply_unchecked(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let t = x[n - 1];
        let mut y: Vec<f64> = (0..n - 1).map(|i| x[i] * self.ratio(i, t)).collect();
        y.push(if self.a == 1.0 { t } else { t.powf(self.a) });
        y
    }

    /// `x_n = y_n^{1/a}`, `x_i = y_i x_n / g_i^a(x_n)`.
    pub fn inverse(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check_height(y)?;
        let n = self.dim();
        let t = if self.a == 1.0 { y[n - 1] } else { y[n - 1].powf(1.0 / self.a) };
        let mut x: Vec<f64> = (0..n - 1).map(|i| y[i] / self.ratio(i, t)).collect();
        x.push(t);
        Ok(x)
    }

    /// The derivative matrix, row `i` holding the gradient of component `i`.
    pub fn derivative(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_height(x)?;
        let n = self.dim();
        let t = x[n - 1];
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n - 1 {
            let e = self.a * self.domain.exponents()[i] - 1.0;
            m[(i, i)] = self.ratio(i, t);
            m[(i, n - 1)] = x[i] * e * self.ratio(i, t) / t;
        }
        m[(n - 1, n - 1)] = self.a * t.powf(self.a - 1.0);
        Ok(m)
    }

    /// `J(x, φ_a) = a (Π c_i)^a x_n^{aγ - n}`.
    pub fn jacobian(&self, x: &[f64]) -> Result<f64> {
        self.check_height(x)?;
        let n = self.dim() as f64;
        let t = x[self.dim() - 1];
        let scale: f64 = self.domain.scales().iter().product();
        let e = self.a * self.domain.gamma() - n;
        if self.a == 1.0 && e == 0.0 && scale == 1.0 {
            return Ok(1.0);
        }
        Ok(self.a * scale.powf(self.a) * t.powf(e))
    }

    /// Operator norm of the derivative.
    pub fn derivative_norm(&self, x: &[f64]) -> Result<f64> {
        let m = self.derivative(x)?;
        Ok(operator_norm(&m))
    }

    /// Constant `c_1` with `|Dφ_a(x)| ≤ c_1 x_n^{a-1}` on `H_1`.
    pub fn derivative_bound(&self) -> f64 {
        let mut s = self.a * self.a;
        for (g, c) in self.domain.exponents().iter().zip(self.domain.scales()) {
            let e = self.a * g - 1.0;
            s += c.powf(2.0 * self.a) * (1.0 + e * e);
        }
        s.sqrt()
    }
}

pub(crate) fn operator_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 2 {
        let t = m.iter().map(|v| v * v).sum::<f64>();
        let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
        let disc = (t * t - 4.0 * det * det).max(0.0);
        return ((t + disc.sqrt()) / 2.0).sqrt();
    }
    let mtm = m.transpose() * m;
    let eig = nalgebra::SymmetricEigen::new(mtm);
    eig.eigenvalues.iter().cloned().fold(0.0, f64::max).sqrt()
}

/// `q` must stay below `np/(a(α+γ) + p - ap)` for `I_a` to be finite.
pub fn q_threshold(n: usize, p: f64, a: f64, alpha: f64, gamma: f64) -> f64 {
    n as f64 * p / (a * (alpha + gamma) + p - a * p)
}

/// `s` must stay below `a(α+γ)r/n` for `J_a` to be finite.
pub fn s_bound(n: usize, r: f64, a: f64, alpha: f64, gamma: f64) -> f64 {
    a * (alpha + gamma) * r / n as f64
}

fn check_a(a: f64) -> Result<()> {
    if !(a > 0.0 && a <= 1.0) {
        return Err(Error::Input(format!("map parameter a = {a} must lie in (0, 1]")));
    }
    Ok(())
}

/// Reduced one-dimensional form of
/// `I_a = ∫_{H_1} (|Dφ_a|^p / (J w(φ_a)))^{q/(p-q)}`:
/// `∫_0^1 x^{(p(a-1) - a(α+1) + n)q/(p-q) + n - 1} G^{-aq/(p-q)}(x) dx`
/// with `G = Π g_i`.
pub fn distortion_ia(p: f64, q: f64, a: f64, alpha: f64, domain: &CuspDomain, cfg: &IntegrateConfig) -> Result<IntegralVerdict> {
    check_a(a)?;
    if !(q >= 1.0 && q < p) {
        return Err(Error::Input(format!("I_a needs 1 <= q < p, got q = {q}, p = {p}")));
    }
    let n = domain.dim() as f64;
    let k = q / (p - q);
    let e = (p * (a - 1.0) - a * (alpha + 1.0) + n) * k + n - 1.0;
    let g_power = -a * k;
    // G = (Π c_i) x^{γ-1}, folded into a single power so large exponents do not overflow
    let c = domain.scales().iter().product::<f64>().powf(g_power);
    let total = e + g_power * (domain.gamma() - 1.0);
    integrate(move |x| c * x[0].powf(total), &Region::unit_interval(), cfg)
}

/// Reduced one-dimensional form of `J_a = ∫_{H_1} (J w(φ_a))^{r/(r-s)}`:
/// `∫_0^1 x^{(a(α+1) - n)r/(r-s) + n - 1} G^{ar/(r-s)}(x) dx`.
pub fn distortion_ja(r: f64, s: f64, a: f64, alpha: f64, domain: &CuspDomain, cfg: &IntegrateConfig) -> Result<IntegralVerdict> {
    check_a(a)?;
    if !(s >= 1.0 && s < r) {
        return Err(Error::Input(format!("J_a needs 1 <= s < r, got s = {s}, r = {r}")));
    }
    let n = domain.dim() as f64;
    let k = r / (r - s);
    let e = (a * (alpha + 1.0) - n) * k + n - 1.0;
    let g_power = a * k;
    // G = (Π c_i) x^{γ-1}, folded into a single power so large exponents do not overflow
    let c = domain.scales().iter().product::<f64>().powf(g_power);
    let total = e + g_power * (domain.gamma() - 1.0);
    integrate(move |x| c * x[0].powf(total), &Region::unit_interval(), cfg)
}

/// `I_a` integrated over `H_1` in full dimension from the derivative matrix,
/// the Jacobian and the weight `|φ_a(x)|^α`, with no reduction.
pub fn distortion_ia_full(map: &CuspMap, p: f64, q: f64, alpha: f64, cfg: &IntegrateConfig) -> Result<IntegralVerdict> {
    if !(q >= 1.0 && q < p) {
        return Err(Error::Input(format!("I_a needs 1 <= q < p, got q = {q}, p = {p}")));
    }
    let k = q / (p - q);
    let f = |x: &[f64]| {
        let m = map.derivative(x).expect("interior node");
        let j = map.jacobian(x).expect("interior node");
        let w = norm(&map.apply_unchecked(x)).powf(alpha);
        (operator_norm(&m).powf(p) / (j * w)).powf(k)
    };
    integrate(f, &Region::Cusp(map.source.clone()), cfg)
}

/// `J_a` integrated over `H_1` in full dimension.
pub fn distortion_ja_full(map: &CuspMap, r: f64, s: f64, alpha: f64, cfg: &IntegrateConfig) -> Result<IntegralVerdict> {
    if !(s >= 1.0 && s < r) {
        return Err(Error::Input(format!("J_a needs 1 <= s < r, got s = {s}, r = {r}")));
    }
    let k = r / (r - s);
    let f = |x: &[f64]| {
        let j = map.jacobian(x).expect("interior node");
        let w = norm(&map.apply_unchecked(x)).powf(alpha);
        (j * w).powf(k)
    };
    integrate(f, &Region::Cusp(map.source.clone()), cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortionReport {
    pub a: f64,
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub s: f64,
    pub alpha: f64,
    pub ia: IntegralVerdict,
    pub ja: IntegralVerdict,
    pub q_threshold: f64,
    pub s_bound: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn distortion_report(
    domain: &CuspDomain,
    a: f64,
    p: f64,
    q: f64,
    r: f64,
    s: f64,
    alpha: f64,
    cfg: &IntegrateConfig,
) -> Result<DistortionReport> {
    let n = domain.dim();
    let gamma = domain.gamma();
    Ok(DistortionReport {
        a,
        p,
        q,
        r,
        s,
        alpha,
        ia: distortion_ia(p, q, a, alpha, domain, cfg)?,
        ja: distortion_ja(r, s, a, alpha, domain, cfg)?,
        q_threshold: q_threshold(n, p, a, alpha, gamma),
        s_bound: s_bound(n, r, a, alpha, gamma),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub exponent: f64,
    pub verdict: Verdict,
    pub value: crate::extended::ExtendedReal,
}

fn to_row(exponent: f64, v: IntegralVerdict) -> SweepRow {
    SweepRow { exponent, verdict: v.verdict, value: v.value }
}

/// `I_a` over a list of `q` values.
pub fn sweep_ia(p: f64, qs: &[f64], a: f64, alpha: f64, domain: &CuspDomain, cfg: &IntegrateConfig) -> Result<Vec<SweepRow>> {
    qs.par_iter()
        .map(|&q| distortion_ia(p, q, a, alpha, domain, cfg).map(|v| to_row(q, v)))
        .collect()
}

/// `J_a` over a list of `s` values.
pub fn sweep_ja(r: f64, ss: &[f64], a: f64, alpha: f64, domain: &CuspDomain, cfg: &IntegrateConfig) -> Result<Vec<SweepRow>> {
    ss.par_iter()
        .map(|&s| distortion_ja(r, s, a, alpha, domain, cfg).map(|v| to_row(s, v)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuasiisometrySpec {
    /// Number of dyadic height bands `2^{-k-1} < x_n < 2^{-k}` probed.
    pub levels: u32,
    pub pairs_per_level: usize,
    /// Pair separation relative to the band height.
    pub relative_step: f64,
    /// Growth of the estimate across all bands that counts as unbounded.
    pub growth: f64,
    pub seed: u64,
}

impl Default for QuasiisometrySpec {
    fn default() -> Self {
        QuasiisometrySpec { levels: 10, pairs_per_level: 200, relative_step: 1e-3, growth: 2.0, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuasiisometryReport {
    /// Largest `max(sup quotient, 1/inf quotient)` over all bands.
    pub q_estimate: f64,
    /// Estimate restricted to each band, top band first.
    pub per_level: Vec<f64>,
    /// Whether `Q^{-n} <= |J| <= Q^n` held at every sampled point.
    pub jacobian_within_bounds: bool,
    pub verdict: crate::weights::ApVerdict,
}

/// Estimates the quasiisometry constant of `map` on `H_1` from difference
/// quotients of nearby pairs in bands shrinking toward `x_n = 0`.
///
/// Violated when the estimates over the lower half of the bands strictly
/// increase toward the tip and the last exceeds the smallest by `growth`;
/// satisfied when all bands stay within 1% of each other.
pub fn check_quasiisometry<F>(map: F, n: usize, spec: &QuasiisometrySpec) -> Result<QuasiisometryReport>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    use crate::weights::ApVerdict;
    if n < 2 || spec.levels == 0 || spec.pairs_per_level == 0 || !(spec.relative_step > 0.0) {
        return Err(Error::Input("quasiisometry sampling needs n >= 2 and non-empty bands".into()));
    }
    let domain = CuspDomain::lipschitz(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut per_level = Vec::new();
    let mut jac_ok = true;
    for k in 0..spec.levels {
        let top = 0.5f64.powi(k as i32);
        let h = spec.relative_step * top;
        let (mut sup, mut inf) = (0.0f64, f64::INFINITY);
        let mut accepted = 0;
        while accepted < spec.pairs_per_level {
            let t = rng.gen_range(0.5 * top..top);
            let mut x: Vec<f64> = (0..n - 1).map(|_| rng.gen_range(0.0..t)).collect();
            x.push(t);
            let dir: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let len = norm(&dir);
            if len < 1e-3 {
                continue;
            }
            let y: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + h * d / len).collect();
            if !domain.contains(&x)? || !domain.contains(&y)? {
                continue;
            }
            let fx = map(&x);
            let fy = map(&y);
            let diff: Vec<f64> = fx.iter().zip(&fy).map(|(a, b)| a - b).collect();
            let quot = norm(&diff) / h;
            sup = sup.max(quot);
            inf = inf.min(quot);
            accepted += 1;
            if accepted % 20 == 0 {
                let q = sup.max(1.0 / inf);
                let j = fd_jacobian(&map, &x, 1e-3 * h);
                let qn = q.powi(n as i32);
                if !(j.abs() <= qn * (1.0 + 1e-6) && j.abs() >= (1.0 - 1e-6) / qn) {
                    jac_ok = false;
                }
            }
        }
        per_level.push(sup.max(1.0 / inf));
    }
    let q_estimate = per_level.iter().cloned().fold(1.0, f64::max);
    let first = per_level[0];
    let last = *per_level.last().unwrap();
    let tail = &per_level[per_level.len() / 2..];
    let increasing = tail.windows(2).all(|w| w[1] > w[0]);
    let least = per_level.iter().cloned().fold(f64::INFINITY, f64::min);
    let verdict = if per_level.len() >= 4 && increasing && last >= spec.growth * least {
        ApVerdict::Violated
    } else if per_level.iter().all(|q| (q - first).abs() <= 0.01 * first) {
        ApVerdict::Satisfied
    } else {
        ApVerdict::Inconclusive
    };
    Ok(QuasiisometryReport { q_estimate, per_level, jacobian_within_bounds: jac_ok, verdict })
}

fn fd_jacobian<F: Fn(&[f64]) -> Vec<f64>>(map: &F, x: &[f64], h: f64) -> f64 {
    let n = x.len();
    let mut m = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[j] += h;
        xm[j] -= h;
        let (fp, fm) = (map(&xp), map(&xm));
        for i in 0..n {
            m[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    m.determinant()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cusp2() -> CuspDomain {
        CuspDomain::new(vec![2.0]).unwrap()
    }

    #[test]
    fn apply_examples() {
        let m = CuspMap::new(cusp2(), 0.5).unwrap();
        let y = m.apply(&[0.1, 0.5]).unwrap();
        assert_relative_eq!(y[0], 0.1, max_relative = 1e-12);
        assert_relative_eq!(y[1], 0.5f64.sqrt(), max_relative = 1e-12);
        let top = m.apply(&[0.3, 1.0 - 1e-16]).unwrap();
        assert_relative_eq!(top[0], 0.3, max_relative = 1e-12);
        assert!(matches!(m.apply(&[0.6, 0.5]), Err(Error::Input(_))));
    }

    #[test]
    fn identity_case() {
        let m = CuspMap::new(CuspDomain::lipschitz(3).unwrap(), 1.0).unwrap();
        let x = [0.1, 0.2, 0.3];
        assert_eq!(m.apply(&x).unwrap(), x.to_vec());
        assert_eq!(m.jacobian(&x).unwrap(), 1.0);
        assert_relative_eq!(m.derivative_norm(&x).unwrap(), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn jacobian_example() {
        let m = CuspMap::new(cusp2(), 0.5).unwrap();
        assert_relative_eq!(m.jacobian(&[0.1, 0.25]).unwrap(), 1.0, max_relative = 1e-12);
        assert!(matches!(m.jacobian(&[0.0, 0.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn thresholds() {
        assert_relative_eq!(q_threshold(2, 2.0, 0.5, 0.0, 3.0), 1.6);
        assert_relative_eq!(s_bound(2, 3.0, 0.5, 0.0, 3.0), 2.25);
    }

    #[test]
    fn ia_examples() {
        let cfg = IntegrateConfig::default();
        let d = cusp2();
        assert_eq!(distortion_ia(2.0, 1.2, 0.5, 0.0, &d, &cfg).unwrap().verdict, Verdict::Finite);
        assert_eq!(distortion_ia(2.0, 1.9, 0.5, 0.0, &d, &cfg).unwrap().verdict, Verdict::Divergent);
        assert!(matches!(distortion_ia(2.0, 2.0, 0.5, 0.0, &d, &cfg), Err(Error::Input(_))));
    }

    #[test]
    fn ja_examples() {
        let cfg = IntegrateConfig::default();
        let d = cusp2();
        assert_eq!(distortion_ja(3.0, 2.0, 0.5, 0.0, &d, &cfg).unwrap().verdict, Verdict::Finite);
        assert_eq!(distortion_ja(3.0, 2.5, 0.5, 0.0, &d, &cfg).unwrap().verdict, Verdict::Divergent);
        assert!(matches!(distortion_ja(3.0, 3.0, 0.5, 0.0, &d, &cfg), Err(Error::Input(_))));
    }

    #[test]
    fn scaling_map_has_constant_two() {
        let rep = check_quasiisometry(|x| x.iter().map(|v| 2.0 * v).collect(), 2, &QuasiisometrySpec::default()).unwrap();
        assert_relative_eq!(rep.q_estimate, 2.0, max_relative = 1e-9);
        assert!(rep.jacobian_within_bounds);
        assert_eq!(rep.verdict, crate::weights::ApVerdict::Satisfied);
    }
}
