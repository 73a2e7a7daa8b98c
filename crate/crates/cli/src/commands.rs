use std::f64::consts::PI;

use serde::Serialize;
use serde_json::{json, Value};
use sobolab::cuspmap::{check_quasiisometry, distortion_report, sweep_ia, sweep_ja, CuspMap, QuasiisometrySpec, SweepRow};
use sobolab::exponents::{
    besov_threshold, higher_order_target, select_witness, sigma_threshold, unweighted_source_threshold, weighted_threshold,
    EmbeddingQuery, ThresholdReport,
};
use sobolab::mollifier::{commutation_check, convergence_test, ConvergenceGrid, ConvolutionRule, MollifySpec, SmoothFunction};
use sobolab::pde::{
    convergence_rate, energy_error, l2_error, solvability_integral, solve_dirichlet, triangulate, weak_residual, SolveOptions,
};
use sobolab::probe::{default_schedule, run_probe, ProbeVerdict};
use sobolab::weights::{ap_check, ApVerdict, BallFamily};
use sobolab::{CuspDomain, Error, Extended, IntegrateConfig, Region, Verdict, Weight};

use crate::config::{
    ApCheckParams, DistortionParams, ExponentsParams, LipschitzProfile, Load, MollifyParams, ProbeParams, SolveParams, WeightSpec,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Validity,
    Inconclusive,
}

pub struct Table {
    pub name: String,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

pub struct Outcome {
    pub result: Value,
    pub tables: Vec<Table>,
    pub status: Status,
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

fn num(v: f64) -> String {
    format!("{v:?}")
}

fn verdict_name<T: Serialize>(v: &T) -> String {
    to_value(v).as_str().unwrap_or_default().to_string()
}

fn build_weight(dim: usize, spec: &WeightSpec) -> Result<Weight, Error> {
    let w = match (&spec.alpha, &spec.radii, &spec.values) {
        (Some(alpha), None, None) => Weight::power(dim, *alpha)?,
        (None, Some(radii), Some(values)) => Weight::tabulated(dim, radii.clone(), values.clone())?,
        _ => return Err(Error::Input("weight needs either alpha or both radii and values".into())),
    };
    w.with_scale(spec.scale)
}

pub fn ap_check_cmd(params: &ApCheckParams, seed: u64) -> Result<Outcome, Error> {
    let w = build_weight(params.n, &params.weight)?;
    let family = BallFamily {
        radius_min: params.radius_min,
        radius_max: params.radius_max,
        radius_count: params.radius_count,
        random_centers: params.random_centers,
        seed,
    };
    let report = ap_check(&w, params.p, &family, &IntegrateConfig::default())?;
    let rows = report
        .balls
        .iter()
        .map(|b| {
            let center: Vec<String> = b.center.iter().map(|v| num(*v)).collect();
            vec![center.join(";"), num(b.radius), num(b.ratio.to_f64()), verdict_name(&b.verdict)]
        })
        .collect();
    let status = if report.verdict == ApVerdict::Inconclusive { Status::Inconclusive } else { Status::Ok };
    Ok(Outcome {
        result: to_value(&report),
        tables: vec![Table { name: "balls".into(), header: vec!["center", "radius", "ratio", "verdict"], rows }],
        status,
    })
}

fn threshold_row(t: &ThresholdReport<f64>, exact: String) -> Vec<String> {
    let violations: Vec<String> = t.validity.iter().map(|v| v.to_string()).collect();
    vec![verdict_name(&t.formula_id), num(t.s_max.to_f64()), exact, t.is_valid().to_string(), violations.join(";")]
}

pub fn exponents_cmd(params: &ExponentsParams) -> Result<Outcome, Error> {
    let q = EmbeddingQuery { n: params.n, p: params.p, alpha: params.alpha, gamma: params.gamma, m: params.m };
    let exact = q.to_exact()?;
    let exact_text = |s: &Extended<_>| match s {
        Extended::Finite(v) => format!("{v}"),
        Extended::Infinite => "inf".to_string(),
    };
    let mut rows = Vec::new();
    let mut reports = serde_json::Map::new();
    let pairs = [
        ("weighted", weighted_threshold(&q), exact_text(&weighted_threshold(&exact).s_max)),
        ("unweighted_source", unweighted_source_threshold(&q), exact_text(&unweighted_source_threshold(&exact).s_max)),
        ("sigma_form", sigma_threshold(&q), exact_text(&sigma_threshold(&exact).s_max)),
        ("besov", besov_threshold(&q), exact_text(&besov_threshold(&exact).s_max)),
    ];
    for (name, t, e) in &pairs {
        rows.push(threshold_row(t, e.clone()));
        let mut v = to_value(t);
        v["s_max_exact"] = json!(e);
        reports.insert(name.to_string(), v);
    }
    let targets: Vec<Value> = params
        .s
        .iter()
        .map(|&s| {
            json!({
                "s": s,
                "witness": select_witness(&q, s),
                "higher_order_target": higher_order_target(params.p, s, params.m),
            })
        })
        .collect();
    let status = if pairs[0].1.is_valid() { Status::Ok } else { Status::Validity };
    Ok(Outcome {
        result: json!({ "thresholds": reports, "targets": targets }),
        tables: vec![Table { name: "thresholds".into(), header: vec!["formula", "s_max", "exact", "valid", "violations"], rows }],
        status,
    })
}

fn sweep_rows(kind: &str, rows: &[SweepRow]) -> Vec<Vec<String>> {
    rows.iter()
        .map(|r| vec![kind.to_string(), num(r.exponent), verdict_name(&r.verdict), num(r.value.to_f64())])
        .collect()
}

pub fn distortion_cmd(params: &DistortionParams, seed: u64) -> Result<Outcome, Error> {
    let domain = match &params.scales {
        Some(c) => CuspDomain::with_scales(params.exponents.clone(), c.clone())?,
        None => CuspDomain::new(params.exponents.clone())?,
    };
    let cfg = IntegrateConfig::default();
    let report = distortion_report(&domain, params.a, params.p, params.q, params.r, params.s, params.alpha, &cfg)?;
    let ia = sweep_ia(params.p, &params.q_sweep, params.a, params.alpha, &domain, &cfg)?;
    let ja = sweep_ja(params.r, &params.s_sweep, params.a, params.alpha, &domain, &cfg)?;
    let quasi = if params.quasiisometry {
        let map = CuspMap::new(domain.clone(), params.a)?;
        let n = domain.dim();
        let spec = QuasiisometrySpec { seed, ..Default::default() };
        Some(check_quasiisometry(|x| map.apply(x).unwrap_or_else(|_| vec![f64::NAN; n]), n, &spec)?)
    } else {
        None
    };
    let mut verdicts = vec![report.ia.verdict, report.ja.verdict];
    verdicts.extend(ia.iter().chain(&ja).map(|r| r.verdict));
    let inconclusive = verdicts.contains(&Verdict::Inconclusive)
        || quasi.as_ref().is_some_and(|q| q.verdict == ApVerdict::Inconclusive);
    let mut rows = sweep_rows("ia", &ia);
    rows.extend(sweep_rows("ja", &ja));
    Ok(Outcome {
        result: json!({ "report": report, "ia_sweep": ia, "ja_sweep": ja, "quasiisometry": quasi }),
        tables: vec![Table { name: "sweep".into(), header: vec!["integral", "exponent", "verdict", "value"], rows }],
        status: if inconclusive { Status::Inconclusive } else { Status::Ok },
    })
}

fn multi_indices(dim: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    for i in 0..dim {
        let mut a = vec![0; dim];
        a[i] = 1;
        out.push(a.clone());
        a[i] = 2;
        out.push(a);
        for j in i + 1..dim {
            let mut b = vec![0; dim];
            b[i] = 1;
            b[j] = 1;
            out.push(b);
        }
    }
    out
}

pub fn mollify_cmd(params: &MollifyParams) -> Result<Outcome, Error> {
    let dim = params.samples.first().map(|s| s.len()).unwrap_or(2);
    let spec = MollifySpec { r: params.r, delta: params.delta, p: params.p, weight: build_weight(dim, &params.weight)? };
    let rule = ConvolutionRule::tensor(dim, params.per_axis)?;
    let mut commutation = Vec::new();
    let mut rows = Vec::new();
    let mut worst = 0.0f64;
    for (k, f) in SmoothFunction::corpus(dim).iter().enumerate() {
        for alpha in multi_indices(dim) {
            let d = commutation_check(f, &alpha, &spec, &params.domain, &params.samples, params.step, &rule)?;
            worst = worst.max(d);
            let label: Vec<String> = alpha.iter().map(|v| v.to_string()).collect();
            rows.push(vec![k.to_string(), label.join(";"), num(d)]);
            commutation.push(json!({ "function": f, "alpha": alpha, "discrepancy": d }));
        }
    }
    let mut tables = vec![Table { name: "commutation".into(), header: vec!["function", "alpha", "discrepancy"], rows }];
    let convergence = if params.radii.is_empty() {
        None
    } else {
        let (f, grid): (fn(&[f64]) -> f64, ConvergenceGrid) = match params.function {
            LipschitzProfile::Linear => (|x| x[0], ConvergenceGrid::default()),
            LipschitzProfile::Kink => (|x| (x[0] - 0.5).abs(), ConvergenceGrid { breaks: vec![0.5], ..Default::default() }),
        };
        let points = convergence_test(f, &spec.weight, params.p, params.delta, &params.radii, &params.domain, &grid)?;
        tables.push(Table {
            name: "convergence".into(),
            header: vec!["r", "norm"],
            rows: points.iter().map(|c| vec![num(c.r), num(c.norm)]).collect(),
        });
        Some(points)
    };
    Ok(Outcome {
        result: json!({ "max_discrepancy": worst, "commutation": commutation, "convergence": convergence }),
        tables,
        status: Status::Ok,
    })
}

fn exact(x: &[f64]) -> f64 {
    (PI * x[0]).sin() * (PI * x[1]).sin()
}

fn exact_grad(x: &[f64]) -> [f64; 2] {
    [PI * (PI * x[0]).cos() * (PI * x[1]).sin(), PI * (PI * x[0]).sin() * (PI * x[1]).cos()]
}

// div(|x|^α ∇u) = |x|^α Δu + α|x|^{α-2} x·∇u
fn manufactured_load(alpha: f64) -> impl Fn(&[f64]) -> f64 + Sync {
    move |x: &[f64]| {
        let r2 = x[0] * x[0] + x[1] * x[1];
        let g = exact_grad(x);
        let lap = -2.0 * PI * PI * exact(x);
        let drift = if alpha == 0.0 { 0.0 } else { alpha * r2.powf(0.5 * alpha - 1.0) * (x[0] * g[0] + x[1] * g[1]) };
        r2.powf(0.5 * alpha) * lap + drift
    }
}

pub fn solve_cmd(params: &SolveParams) -> Result<Outcome, Error> {
    if params.h.is_empty() {
        return Err(Error::Input("solve needs at least one mesh size".into()));
    }
    let w = Weight::power(2, params.alpha)?;
    let opts = SolveOptions { tol: params.tol, max_iterations: None };
    let manufactured = matches!(params.load, Load::Manufactured);
    let load: Box<dyn Fn(&[f64]) -> f64 + Sync> = match params.load {
        Load::Constant { value } => Box::new(move |_| value),
        Load::Manufactured => Box::new(manufactured_load(params.alpha)),
    };
    let mut levels = Vec::new();
    let mut rows = Vec::new();
    let mut l2 = Vec::new();
    let mut last = None;
    for &h in &params.h {
        let mesh = triangulate(&params.domain, h, params.grading)?;
        let sol = solve_dirichlet(&mesh, &w, &load, &opts)?;
        let residual = weak_residual(&sol, &w, &load, None)?;
        let (e0, e1) = if manufactured {
            (Some(l2_error(&sol, exact)), Some(energy_error(&sol, &w, exact_grad)?))
        } else {
            (None, None)
        };
        if let Some(e) = e0 {
            l2.push(e);
        }
        let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
        rows.push(vec![
            num(h),
            mesh.vertices.len().to_string(),
            sol.iterations.to_string(),
            num(sol.residual),
            num(residual),
            opt(e0),
            opt(e1),
        ]);
        levels.push(json!({
            "h": h,
            "mesh_h": mesh.h,
            "vertices": mesh.vertices.len(),
            "triangles": mesh.triangles.len(),
            "iterations": sol.iterations,
            "solver_residual": sol.residual,
            "weak_residual": residual,
            "energy": sol.energy,
            "l2_error": e0,
            "energy_error": e1,
        }));
        last = Some(sol);
    }
    let sol = last.expect("at least one level");
    // the weight is singular at the origin: check on a ball around it that covers the mesh
    let radius = sol.mesh.vertices.iter().map(|v| v[0].hypot(v[1])).fold(0.0, f64::max);
    let ball = Region::Ball { center: vec![0.0, 0.0], radius: radius.max(1e-12) };
    let solvability = solvability_integral(&w, &ball, &IntegrateConfig::default())?;
    let rate = if l2.len() >= 2 { Some(convergence_rate(&l2)?) } else { None };
    let solution = sol.mesh.vertices.iter().zip(&sol.values).map(|(v, u)| vec![num(v[0]), num(v[1]), num(*u)]).collect();
    let status = if solvability.verdict == Verdict::Inconclusive { Status::Inconclusive } else { Status::Ok };
    Ok(Outcome {
        result: json!({ "levels": levels, "l2_rate": rate, "solvability": solvability }),
        tables: vec![
            Table {
                name: "levels".into(),
                header: vec!["h", "vertices", "iterations", "solver_residual", "weak_residual", "l2_error", "energy_error"],
                rows,
            },
            Table { name: "solution".into(), header: vec!["x", "y", "u"], rows: solution },
        ],
        status,
    })
}

pub fn probe_cmd(params: &ProbeParams) -> Result<Outcome, Error> {
    let q = EmbeddingQuery::new(params.n, params.p, params.alpha, params.gamma);
    let schedule = params.schedule.clone().unwrap_or_else(default_schedule);
    let threshold = weighted_threshold(&q);
    let mut reports = Vec::new();
    let mut rows = Vec::new();
    for &s in &params.s {
        let r = run_probe(&q, s, params.family, &schedule)?;
        for (eps, ratio) in &r.ratios {
            rows.push(vec![num(s), num(*eps), ratio.map(num).unwrap_or_default()]);
        }
        reports.push(r);
    }
    let status = if reports.iter().any(|r| r.verdict == ProbeVerdict::Inconclusive) { Status::Inconclusive } else { Status::Ok };
    Ok(Outcome {
        result: json!({ "threshold": threshold, "probes": reports }),
        tables: vec![Table { name: "ratios".into(), header: vec!["s", "eps", "ratio"], rows }],
        status,
    })
}
