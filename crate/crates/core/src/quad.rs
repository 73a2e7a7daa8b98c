// Shared one-dimensional quadrature helpers.

use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;

/// Gauss–Legendre nodes and weights on [-1, 1], ascending, exactly symmetric.
pub(crate) fn gauss_legendre(m: usize) -> Vec<(f64, f64)> {
    let m = m.max(1);
    let rule = GaussLegendre::new(NonZeroUsize::new(m).unwrap());
    let mut pairs: Vec<(f64, f64)> = rule.as_node_weight_pairs().to_vec();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    // mirror the lower half so odd moments cancel to the last bit
    for k in 0..m / 2 {
        let j = m - 1 - k;
        let x = 0.5 * (pairs[j].0 - pairs[k].0);
        let w = 0.5 * (pairs[j].1 + pairs[k].1);
        pairs[k] = (-x, w);
        pairs[j] = (x, w);
    }
    if m % 2 == 1 {
        pairs[m / 2].0 = 0.0;
    }
    pairs
}

/// Gauss–Legendre rule mapped to [a, b].
pub(crate) fn gauss_on(rule: &[(f64, f64)], a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    rule.iter().map(move |&(x, w)| (c + h * x, h * w))
}

/// Composite Gauss rule: `panels` equal panels of `rule` on [a, b].
pub(crate) fn composite<F: FnMut(f64) -> f64>(rule: &[(f64, f64)], a: f64, b: f64, panels: usize, mut f: F) -> f64 {
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for k in 0..panels {
        let lo = a + h * k as f64;
        let hi = if k + 1 == panels { b } else { lo + h };
        for (x, w) in gauss_on(rule, lo, hi) {
            total += w * f(x);
        }
    }
    total
}

/// Surface area of the unit sphere `S^{k}` in `R^{k+1}`.
pub(crate) fn sphere_area(k: usize) -> f64 {
    match k {
        0 => 2.0,
        1 => 2.0 * PI,
        _ => 2.0 * PI / (k as f64 - 1.0) * sphere_area(k - 2),
    }
}

/// Volume of the unit ball in `R^n`.
pub(crate) fn ball_volume(n: usize) -> f64 {
    sphere_area(n - 1) / n as f64
}

/// `∫_a^b sin^m(t) dt`, exact via the reduction formula.
pub(crate) fn sin_power_integral(m: usize, a: f64, b: f64) -> f64 {
    match m {
        0 => b - a,
        1 => a.cos() - b.cos(),
        _ => {
            let mf = m as f64;
            let term = |t: f64| -t.cos() * t.sin().powi(m as i32 - 1) / mf;
            term(b) - term(a) + (mf - 1.0) / mf * sin_power_integral(m - 2, a, b)
        }
    }
}

/// Partition of [0, len] into a core cell [0, len·2^-depth] and `depth`
/// dyadic octaves, each split into `per_octave` equal cells, then cut at `breaks`.
pub(crate) fn graded_partition(len: f64, depth: u32, per_octave: usize, breaks: &[f64]) -> Vec<(f64, f64)> {
    let mut pts = vec![0.0];
    for j in (0..depth).rev() {
        let lo = len * 0.5f64.powi(j as i32 + 1);
        let hi = len * 0.5f64.powi(j as i32);
        for k in 0..per_octave {
            pts.push(lo + (hi - lo) * k as f64 / per_octave as f64);
        }
    }
    pts.push(len);
    for &b in breaks {
        if b > 0.0 && b < len {
            pts.push(b);
        }
    }
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * len);
    pts.windows(2).map(|w| (w[0], w[1])).collect()
}
