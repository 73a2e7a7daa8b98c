//! Closed-form exponent calculus for weighted embeddings on cusp domains.
//!
//! Every formula is generic over [`Scalar`], so the same code runs in `f64`
//! and exactly over the rationals. Preconditions are never errors here:
//! they are collected as [`Violation`]s in the report.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, Signed, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extended::{Extended, ExtendedReal};
use crate::geometry::{IntegralVerdict, IntegrateConfig, Region};
use crate::weights::{integrate_power, Weight};

pub trait Scalar: Num + Signed + Clone + PartialOrd + FromPrimitive + ToPrimitive + fmt::Debug + Send + Sync {
    fn int(v: i64) -> Self {
        Self::from_i64(v).expect("small integer")
    }

    fn approx(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {}
impl Scalar for BigRational {}

/// Exact rational value of a finite `f64`.
pub fn exact(v: f64) -> Result<BigRational> {
    BigRational::from_float(v).ok_or_else(|| Error::Input(format!("{v} has no exact rational value")))
}

/// Exact rational from a decimal literal such as `"0.1"` or `"-3.25e-2"`.
pub fn exact_decimal(text: &str) -> Result<BigRational> {
    let bad = || Error::Parse(format!("not a decimal number: {text:?}"));
    let t = text.trim();
    let (mantissa, exp) = match t.find(['e', 'E']) {
        Some(i) => (&t[..i], t[i + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (t, 0),
    };
    let (neg, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = match digits.split_once('.') {
        Some((a, b)) => (a, b),
        None => (digits, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let all = format!("{int_part}{frac_part}");
    let num: BigInt = all.parse().map_err(|_| bad())?;
    let scale = exp - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let mut r = BigRational::from_integer(num);
    if scale >= 0 {
        r *= BigRational::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        r /= BigRational::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    Ok(if neg { -r } else { r })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Violation {
    DimensionBelowTwo,
    OrderZero,
    PNotAboveOne,
    GammaBelowDimension,
    AlphaOutsideApWindow,
    PNotBelowAlphaPlusGamma,
    PNotBelowGamma,
    NonPositiveDenominator,
    PBelowP0,
    TransferBoundary,
    NonPositiveExponent,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Violation::DimensionBelowTwo => "n >= 2",
            Violation::OrderZero => "m >= 1",
            Violation::PNotAboveOne => "p > 1",
            Violation::GammaBelowDimension => "gamma >= n",
            Violation::AlphaOutsideApWindow => "-n < alpha < n(p-1)",
            Violation::PNotBelowAlphaPlusGamma => "p < alpha + gamma",
            Violation::PNotBelowGamma => "p < gamma",
            Violation::NonPositiveDenominator => "positive denominator",
            Violation::PBelowP0 => "p >= p0",
            Violation::TransferBoundary => "1/p > 1/p0 - 1/q0",
            Violation::NonPositiveExponent => "positive exponents",
        };
        write!(f, "{s}")
    }
}

/// Which closed form produced a threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormulaId {
    /// `(α+γ)p/(α+γ-p)`, weighted source and target.
    WeightedCompact,
    /// `(α+γ)p/(γ-p)`, unweighted source.
    UnweightedSource,
    /// The weighted threshold written with `σ`.
    SigmaForm,
    /// `(n+α)p/(σ(α+n-1)-(p-1))`, the bound obtained through Besov spaces.
    Besov,
    /// `ps/(s-m(s-p))`, target exponent for order-`m` spaces.
    HigherOrderTarget,
    /// `1/(1/p - 1/p0 + 1/q0)`.
    ExponentTransfer,
    /// Order-one case of the higher-order transfer.
    PoincareTransfer,
    /// `pp0q0/(p0q0 - mp(q0-p0))`.
    HigherOrderTransfer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingQuery<T> {
    pub n: u32,
    pub p: T,
    pub alpha: T,
    pub gamma: T,
    pub m: u32,
}

impl<T: Scalar> EmbeddingQuery<T> {
    pub fn new(n: u32, p: T, alpha: T, gamma: T) -> Self {
        EmbeddingQuery { n, p, alpha, gamma, m: 1 }
    }

    /// Query for equal profile exponents `σ`, so `γ = σ(n-1) + 1`.
    pub fn from_sigma(n: u32, p: T, alpha: T, sigma: T) -> Self {
        let gamma = sigma * T::int(n as i64 - 1) + T::one();
        Self::new(n, p, alpha, gamma)
    }

    pub fn sigma(&self) -> T {
        (self.gamma.clone() - T::one()) / T::int(self.n as i64 - 1)
    }

    fn n(&self) -> T {
        T::int(self.n as i64)
    }

    pub fn basic_violations(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        if self.n < 2 {
            v.push(Violation::DimensionBelowTwo);
        }
        if self.m < 1 {
            v.push(Violation::OrderZero);
        }
        if !(self.p > T::one()) {
            v.push(Violation::PNotAboveOne);
        }
        if !(self.gamma >= self.n()) {
            v.push(Violation::GammaBelowDimension);
        }
        v
    }

    pub fn in_ap_window(&self) -> bool {
        let n = self.n();
        self.alpha > -n.clone() && self.alpha < n * (self.p.clone() - T::one())
    }
}

impl EmbeddingQuery<f64> {
    pub fn to_exact(&self) -> Result<EmbeddingQuery<BigRational>> {
        Ok(EmbeddingQuery { n: self.n, p: exact(self.p)?, alpha: exact(self.alpha)?, gamma: exact(self.gamma)?, m: self.m })
    }
}

/// A feasible `(a, q, r)` for the chain
/// `q < np/(a(α+γ)+p-ap)`, `r < nq/(n-q)`, `s < a(α+γ)r/n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub a: f64,
    pub q: f64,
    pub r: f64,
    /// Whether `q < p`, the regime in which the composition estimate applies.
    pub q_below_p: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdReport<T> {
    pub s_max: Extended<T>,
    pub formula_id: FormulaId,
    pub validity: Vec<Violation>,
    pub witness: Option<Witness>,
}

impl<T: Scalar> ThresholdReport<T> {
    pub fn is_valid(&self) -> bool {
        self.validity.is_empty()
    }

    pub fn to_f64(&self) -> ThresholdReport<f64> {
        ThresholdReport {
            s_max: self.s_max.clone().map(|v| v.approx()),
            formula_id: self.formula_id,
            validity: self.validity.clone(),
            witness: self.witness,
        }
    }
}

fn quotient<T: Scalar>(num: T, den: T) -> Extended<T> {
    if den > T::zero() {
        Extended::Finite(num / den)
    } else {
        Extended::Infinite
    }
}

fn report<T>(s_max: Extended<T>, formula_id: FormulaId, validity: Vec<Violation>) -> ThresholdReport<T> {
    ThresholdReport { s_max, formula_id, validity, witness: None }
}

/// `s_max = (α+γ)p/(α+γ-p)`; requires the `A_p` window and `1 < p < α+γ`.
pub fn weighted_threshold<T: Scalar>(q: &EmbeddingQuery<T>) -> ThresholdReport<T> {
    let mut v = q.basic_violations();
    if !q.in_ap_window() {
        v.push(Violation::AlphaOutsideApWindow);
    }
    let k = q.alpha.clone() + q.gamma.clone();
    if !(q.p < k) {
        v.push(Violation::PNotBelowAlphaPlusGamma);
    }
    let s = quotient(k.clone() * q.p.clone(), k - q.p.clone());
    report(s, FormulaId::WeightedCompact, v)
}

/// `s_max = (α+γ)p/(γ-p)` for an unweighted source space; requires `1 < p < γ`.
pub fn unweighted_source_threshold<T: Scalar>(q: &EmbeddingQuery<T>) -> ThresholdReport<T> {
    let mut v = q.basic_violations();
    if !(q.p < q.gamma) {
        v.push(Violation::PNotBelowGamma);
    }
    let k = q.alpha.clone() + q.gamma.clone();
    let s = quotient(k * q.p.clone(), q.gamma.clone() - q.p.clone());
    report(s, FormulaId::UnweightedSource, v)
}

/// The weighted threshold in `σ` form, `(σ(n-1)+1+α)p/(σ(n-1)+α-(p-1))`.
pub fn sigma_threshold<T: Scalar>(q: &EmbeddingQuery<T>) -> ThresholdReport<T> {
    let mut v = q.basic_violations();
    if !q.in_ap_window() {
        v.push(Violation::AlphaOutsideApWindow);
    }
    if !(q.p < q.alpha.clone() + q.gamma.clone()) {
        v.push(Violation::PNotBelowAlphaPlusGamma);
    }
    let spread = q.sigma() * T::int(q.n as i64 - 1);
    let num = (spread.clone() + T::one() + q.alpha.clone()) * q.p.clone();
    let den = spread + q.alpha.clone() - (q.p.clone() - T::one());
    report(quotient(num, den), FormulaId::SigmaForm, v)
}

/// `s̃ = (n+α)p/(σ(α+n-1)-(p-1))`, the bound reached through Besov spaces.
pub fn besov_threshold<T: Scalar>(q: &EmbeddingQuery<T>) -> ThresholdReport<T> {
    let mut v = q.basic_violations();
    if !q.in_ap_window() {
        v.push(Violation::AlphaOutsideApWindow);
    }
    let n = q.n();
    let den = q.sigma() * (q.alpha.clone() + n.clone() - T::one()) - (q.p.clone() - T::one());
    if !(den > T::zero()) {
        v.push(Violation::NonPositiveDenominator);
    }
    let num = (n + q.alpha.clone()) * q.p.clone();
    report(quotient(num, den), FormulaId::Besov, v)
}

/// `q` with `1/p - 1/q = 1/p0 - 1/q0`.
pub fn transfer_exponent<T: Scalar>(p0: T, q0: T, p: T) -> Result<T> {
    let mut v = Vec::new();
    if !(p0 > T::zero() && q0 > T::zero() && p > T::zero()) {
        return Err(Error::Validity(vec![Violation::NonPositiveExponent]));
    }
    if p < p0 {
        v.push(Violation::PBelowP0);
    }
    let inv = T::one() / p - T::one() / p0 + T::one() / q0;
    if !(inv > T::zero()) {
        v.push(Violation::TransferBoundary);
    }
    if !v.is_empty() {
        return Err(Error::Validity(v));
    }
    Ok(T::one() / inv)
}

/// Lower bound `pp0q0/(p0q0 - mp(q0-p0))` for the order-`m` exponent,
/// `+∞` when the denominator is not positive.
pub fn higher_order_transfer<T: Scalar>(p0: T, q0: T, p: T, m: u32) -> Extended<T> {
    let m = T::int(m as i64);
    let den = p0.clone() * q0.clone() - m * p.clone() * (q0.clone() - p0.clone());
    quotient(p * p0 * q0, den)
}

/// Lower bound `ps/(s - m(s-p))` for the target exponent, `+∞` when the
/// denominator is not positive.
pub fn higher_order_target<T: Scalar>(p: T, s: T, m: u32) -> Extended<T> {
    let m = T::int(m as i64);
    let den = s.clone() - m * (s.clone() - p.clone());
    quotient(p * s, den)
}

const WITNESS_GRID: usize = 1000;

fn chain_holds(q: &EmbeddingQuery<f64>, s: f64, w: &Witness) -> bool {
    let n = q.n as f64;
    let k = q.alpha + q.gamma;
    w.a > 0.0
        && w.a < 1.0
        && w.q >= 1.0
        && w.q < n
        && w.q < n * q.p / (w.a * k + q.p - w.a * q.p)
        && w.r < n * w.q / (n - w.q)
        && s < w.a * k * w.r / n
        && w.r > s
}

/// Searches `a` over a uniform grid of (0, 1) and takes `q`, `r` at the
/// midpoints of their feasible intervals. Triples with `q < p` are preferred.
/// Returns `None` when `s` is not below the weighted threshold or the query is invalid.
pub fn select_witness(q: &EmbeddingQuery<f64>, s: f64) -> Option<Witness> {
    let t = weighted_threshold(q);
    if !t.is_valid() || !(s >= 1.0) {
        return None;
    }
    match t.s_max {
        Extended::Finite(v) if s < v => {}
        _ => return None,
    }
    let n = q.n as f64;
    let k = q.alpha + q.gamma;
    let mut fallback = None;
    for i in 1..=WITNESS_GRID {
        let a = i as f64 / (WITNESS_GRID + 1) as f64;
        let q_hi = n * q.p / (a * k + q.p - a * q.p);
        let r_lo = (n * s / (a * k)).max(s);
        let q_lo = (n * r_lo / (n + r_lo)).max(1.0);
        let try_range = |hi: f64| -> Option<Witness> {
            if !(q_lo < hi) {
                return None;
            }
            let qq = 0.5 * (q_lo + hi);
            let r_hi = n * qq / (n - qq);
            let w = Witness { a, q: qq, r: 0.5 * (r_lo + r_hi), q_below_p: qq < q.p };
            chain_holds(q, s, &w).then_some(w)
        };
        if let Some(w) = try_range(q_hi.min(q.p)) {
            return Some(w);
        }
        if fallback.is_none() {
            fallback = try_range(q_hi);
        }
    }
    fallback
}

/// The two weighted norms controlling embeddings on a general domain:
/// `‖w^{-1/p}‖_{L_{pq/(p-q)}}` and `‖w^{1/s}‖_{L_{rs/(r-s)}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightNorms {
    pub first: IntegralVerdict,
    pub second: IntegralVerdict,
    pub first_norm: ExtendedReal,
    pub second_norm: ExtendedReal,
    /// The larger of the two norms.
    pub k_w: ExtendedReal,
}

fn norm_from(v: &IntegralVerdict, power: f64) -> ExtendedReal {
    match (v.verdict, v.value) {
        (crate::geometry::Verdict::Divergent, _) | (_, Extended::Infinite) => ExtendedReal::Infinite,
        (_, Extended::Finite(x)) => ExtendedReal::Finite(x.powf(power)),
    }
}

pub fn weight_norms(w: &Weight, region: &Region, p: f64, q: f64, r: f64, s: f64, cfg: &IntegrateConfig) -> Result<WeightNorms> {
    if !(q < p) || !(s < r) || !(q > 0.0) || !(s > 0.0) {
        return Err(Error::Input(format!("weight norms need 0 < q < p and 0 < s < r, got p={p} q={q} r={r} s={s}")));
    }
    let first = integrate_power(w, -q / (p - q), region, cfg)?;
    let second = integrate_power(w, r / (r - s), region, cfg)?;
    let first_norm = norm_from(&first, (p - q) / (p * q));
    let second_norm = norm_from(&second, (r - s) / (r * s));
    let k_w = if first_norm > second_norm { first_norm } else { second_norm };
    Ok(WeightNorms { first, second, first_norm, second_norm, k_w })
}
