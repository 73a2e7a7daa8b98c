use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mesh::Mesh;
use super::sparse::{pcg, CsrMatrix};
use crate::error::{check_dim, Error, Result};
use crate::geometry::{IntegralVerdict, IntegrateConfig, Region, Verdict};
use crate::weights::{integrate_power, Weight};

// per-triangle data shared by assembly, energy and residual evaluation
struct Element {
    nodes: [usize; 3],
    area: f64,
    grads: [[f64; 2]; 3],
    wbar: f64,
    load: [f64; 3],
}

fn midpoint(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
}

fn elements<F>(mesh: &Mesh, w: &Weight, f: &F) -> Result<Vec<Element>>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    check_dim(2, w.dim)?;
    mesh.triangles
        .par_iter()
        .map(|t| {
            let [a, b, c] = t.map(|i| mesh.vertices[i]);
            let area = mesh.triangle_area(t);
            let d = 2.0 * area;
            let grads = [
                [(b[1] - c[1]) / d, (c[0] - b[0]) / d],
                [(c[1] - a[1]) / d, (a[0] - c[0]) / d],
                [(a[1] - b[1]) / d, (b[0] - a[0]) / d],
            ];
            // mid-edge points: m[k] is opposite vertex k
            let m = [midpoint(b, c), midpoint(c, a), midpoint(a, b)];
            let mut wsum = 0.0;
            for p in &m {
                let v = w.eval(p)?;
                if !(v > 0.0) || !v.is_finite() {
                    return Err(Error::Domain(format!("weight is {v} at quadrature point {p:?}")));
                }
                wsum += v;
            }
            let fv = m.map(|p| f(&p));
            // φ_k is 1/2 at the two midpoints touching vertex k, 0 at the opposite one
            let load = [0, 1, 2].map(|k| {
                let s: f64 = (0..3).filter(|&j| j != k).map(|j| fv[j]).sum();
                -area / 3.0 * 0.5 * s
            });
            Ok(Element { nodes: *t, area, grads, wbar: wsum / 3.0, load })
        })
        .collect()
}

fn dot2(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Stiffness matrix over all vertices, boundary included.
pub fn stiffness_full(mesh: &Mesh, w: &Weight) -> Result<CsrMatrix> {
    let els = elements(mesh, w, &|_: &[f64]| 0.0)?;
    let mut triplets = Vec::with_capacity(9 * els.len());
    for e in &els {
        for i in 0..3 {
            for j in 0..3 {
                triplets.push((e.nodes[i], e.nodes[j], e.wbar * e.area * dot2(e.grads[i], e.grads[j])));
            }
        }
    }
    Ok(CsrMatrix::from_triplets(mesh.vertices.len(), triplets))
}

/// Galerkin system on the interior vertices for `div(w ∇u) = f`, `u = 0` on the boundary:
/// `∫ w ∇u·∇φ = -∫ f φ` for every interior hat `φ`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    /// Mesh vertex of each unknown.
    pub unknowns: Vec<usize>,
}

fn interior_index(mesh: &Mesh) -> (Vec<usize>, Vec<Option<usize>>) {
    let mut unknowns = Vec::new();
    let mut index = vec![None; mesh.vertices.len()];
    for (v, b) in mesh.boundary.iter().enumerate() {
        if !b {
            index[v] = Some(unknowns.len());
            unknowns.push(v);
        }
    }
    (unknowns, index)
}

pub fn assemble<F>(mesh: &Mesh, w: &Weight, f: F) -> Result<LinearSystem>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let els = elements(mesh, w, &f)?;
    let (unknowns, index) = interior_index(mesh);
    let mut triplets = Vec::with_capacity(9 * els.len());
    let mut rhs = vec![0.0; unknowns.len()];
    for e in &els {
        for i in 0..3 {
            let Some(r) = index[e.nodes[i]] else { continue };
            rhs[r] += e.load[i];
            for j in 0..3 {
                if let Some(c) = index[e.nodes[j]] {
                    triplets.push((r, c, e.wbar * e.area * dot2(e.grads[i], e.grads[j])));
                }
            }
        }
    }
    Ok(LinearSystem { matrix: CsrMatrix::from_triplets(unknowns.len(), triplets), rhs, unknowns })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Relative residual `‖b - Ax‖_∞/‖b‖_∞` to reach.
    pub tol: f64,
    /// Defaults to ten times the number of unknowns.
    pub max_iterations: Option<usize>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { tol: 1e-10, max_iterations: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FemSolution {
    pub mesh: Mesh,
    /// Nodal values, zero on boundary vertices.
    pub values: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
    /// `Σ_T w̄_T |T| |∇u_h|²`.
    pub energy: f64,
}

/// `∫ w^{-n/2}` over the region: finiteness is the solvability condition
/// for the weighted Dirichlet problem.
pub fn solvability_integral(w: &Weight, region: &Region, cfg: &IntegrateConfig) -> Result<IntegralVerdict> {
    integrate_power(w, -(w.dim as f64) / 2.0, region, cfg)
}

/// Like [`solve_dirichlet`], first checking the solvability integral over
/// `region` and logging a warning when it is not finite.
pub fn solve_dirichlet_checked<F>(
    mesh: &Mesh,
    w: &Weight,
    f: F,
    opts: &SolveOptions,
    region: &Region,
    cfg: &IntegrateConfig,
) -> Result<(FemSolution, IntegralVerdict)>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let check = solvability_integral(w, region, cfg)?;
    if check.verdict != Verdict::Finite {
        log::warn!("solvability integral of w^(-n/2) is {:?}; the weak problem may be ill-posed", check.verdict);
    }
    Ok((solve_dirichlet(mesh, w, f, opts)?, check))
}

pub fn solve_dirichlet<F>(mesh: &Mesh, w: &Weight, f: F, opts: &SolveOptions) -> Result<FemSolution>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if !(opts.tol > 0.0) {
        return Err(Error::Input("solver tolerance must be positive".into()));
    }
    let sys = assemble(mesh, w, &f)?;
    let n = sys.unknowns.len();
    let mut values = vec![0.0; mesh.vertices.len()];
    if n == 0 {
        return Ok(FemSolution { mesh: mesh.clone(), values, residual: 0.0, iterations: 0, energy: 0.0 });
    }
    let cap = opts.max_iterations.unwrap_or(10 * n);
    let out = pcg(&sys.matrix, &sys.rhs, opts.tol, cap)?;
    for (k, &v) in sys.unknowns.iter().enumerate() {
        values[v] = out.x[k];
    }
    let els = elements(mesh, w, &|_: &[f64]| 0.0)?;
    let energy = els
        .iter()
        .map(|e| {
            let g = gradient(e, &values);
            e.wbar * e.area * dot2(g, g)
        })
        .sum();
    Ok(FemSolution { mesh: mesh.clone(), values, residual: out.residual, iterations: out.iterations, energy })
}

fn gradient(e: &Element, values: &[f64]) -> [f64; 2] {
    let mut g = [0.0; 2];
    for k in 0..3 {
        let u = values[e.nodes[k]];
        g[0] += u * e.grads[k][0];
        g[1] += u * e.grads[k][1];
    }
    g
}

/// `max_φ |∫ w ∇u_h·∇φ + ∫ f φ|` over interior hats `φ` (all of them, or
/// those at the given vertices), relative to the larger side.
/// Recomputed element by element, independently of the assembled matrix.
pub fn weak_residual<F>(sol: &FemSolution, w: &Weight, f: F, subset: Option<&[usize]>) -> Result<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let mesh = &sol.mesh;
    let els = elements(mesh, w, &f)?;
    let nv = mesh.vertices.len();
    let mut lhs = vec![0.0; nv];
    let mut rhs = vec![0.0; nv];
    for e in &els {
        let g = gradient(e, &sol.values);
        for k in 0..3 {
            lhs[e.nodes[k]] += e.wbar * e.area * dot2(g, e.grads[k]);
            rhs[e.nodes[k]] += e.load[k];
        }
    }
    let all: Vec<usize> = (0..nv).filter(|&v| !mesh.boundary[v]).collect();
    let tested = subset.unwrap_or(&all);
    let (mut diff, mut scale) = (0.0f64, 0.0f64);
    for &v in tested {
        if v >= nv || mesh.boundary[v] {
            return Err(Error::Input(format!("vertex {v} is not an interior vertex")));
        }
        diff = diff.max((lhs[v] - rhs[v]).abs());
        scale = scale.max(lhs[v].abs()).max(rhs[v].abs());
    }
    Ok(if scale == 0.0 { 0.0 } else { diff / scale })
}

// degree-5 rule on the reference triangle: barycentric points, weights summing to 1
const Q7: [([f64; 3], f64); 7] = [
    ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 0.225),
    ([0.059715871789770, 0.470142064105115, 0.470142064105115], 0.132394152788506),
    ([0.470142064105115, 0.059715871789770, 0.470142064105115], 0.132394152788506),
    ([0.470142064105115, 0.470142064105115, 0.059715871789770], 0.132394152788506),
    ([0.797426985353087, 0.101286507323456, 0.101286507323456], 0.125939180544827),
    ([0.101286507323456, 0.797426985353087, 0.101286507323456], 0.125939180544827),
    ([0.101286507323456, 0.101286507323456, 0.797426985353087], 0.125939180544827),
];

fn at(t: &[usize; 3], mesh: &Mesh, bary: &[f64; 3]) -> [f64; 2] {
    let mut p = [0.0; 2];
    for k in 0..3 {
        p[0] += bary[k] * mesh.vertices[t[k]][0];
        p[1] += bary[k] * mesh.vertices[t[k]][1];
    }
    p
}

/// `‖u - u_h‖_{L_2}` with a degree-5 rule on every triangle.
pub fn l2_error<F: Fn(&[f64]) -> f64 + Sync>(sol: &FemSolution, exact: F) -> f64 {
    let mesh = &sol.mesh;
    let total: f64 = mesh
        .triangles
        .par_iter()
        .map(|t| {
            let area = mesh.triangle_area(t);
            Q7.iter()
                .map(|(b, wq)| {
                    let p = at(t, mesh, b);
                    let uh: f64 = (0..3).map(|k| b[k] * sol.values[t[k]]).sum();
                    wq * area * (exact(&p) - uh).powi(2)
                })
                .sum::<f64>()
        })
        .collect::<Vec<_>>()
        .iter()
        .sum();
    total.sqrt()
}

/// `(∫ w |∇u - ∇u_h|²)^{1/2}` with a degree-5 rule on every triangle.
pub fn energy_error<G>(sol: &FemSolution, w: &Weight, grad_exact: G) -> Result<f64>
where
    G: Fn(&[f64]) -> [f64; 2] + Sync,
{
    let els = elements(&sol.mesh, w, &|_: &[f64]| 0.0)?;
    let parts: Vec<f64> = els
        .par_iter()
        .map(|e| {
            let g = gradient(e, &sol.values);
            Q7.iter()
                .map(|(b, wq)| {
                    let p = at(&e.nodes, &sol.mesh, b);
                    let ge = grad_exact(&p);
                    let d = [ge[0] - g[0], ge[1] - g[1]];
                    wq * e.area * w.radial((p[0] * p[0] + p[1] * p[1]).sqrt()) * dot2(d, d)
                })
                .sum::<f64>()
        })
        .collect();
    Ok(parts.iter().sum::<f64>().sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    /// `log2(e_k / e_{k+1})` for each halving of `h`.
    pub orders: Vec<f64>,
    pub order: f64,
}

/// Observed order from errors at `h, h/2, h/4, …`; inconclusive unless the
/// errors strictly decrease.
pub fn convergence_rate(errors: &[f64]) -> Result<RateEstimate> {
    if errors.len() < 2 {
        return Err(Error::Input("need errors on at least two meshes".into()));
    }
    if errors.iter().any(|e| !(*e > 0.0)) || errors.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Inconclusive("errors do not decrease monotonically".into()));
    }
    let orders: Vec<f64> = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    Ok(RateEstimate { order: *orders.last().unwrap(), orders })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn seven_point_rule_is_exact_to_degree_five() {
        // reference triangle (0,0),(1,0),(0,1): ∫ x^a y^b = a! b! / (a+b+2)!
        let fact = |k: u32| (1..=k).map(|v| v as f64).product::<f64>();
        for a in 0..=5u32 {
            for b in 0..=(5 - a) {
                let q: f64 = Q7.iter().map(|(l, w)| 0.5 * w * l[1].powi(a as i32) * l[2].powi(b as i32)).sum();
                let exact = fact(a) * fact(b) / fact(a + b + 2);
                assert!((q - exact).abs() < 1e-14, "x^{a} y^{b}");
            }
        }
    }

    #[test]
    fn laplace_row_sums_vanish() {
        let mesh = Mesh::unit_square(6).unwrap();
        let k = stiffness_full(&mesh, &Weight::power(2, 0.0).unwrap()).unwrap();
        for v in 0..mesh.vertices.len() {
            if !mesh.boundary[v] {
                let s: f64 = k.row(v).map(|(_, x)| x).sum();
                assert!(s.abs() < 1e-13);
                assert_relative_eq!(k.get(v, v), 4.0, max_relative = 1e-13);
            }
        }
    }

    #[test]
    fn zero_load_gives_zero() {
        let mesh = Mesh::unit_square(8).unwrap();
        let sol = solve_dirichlet(&mesh, &Weight::power(2, 1.0).unwrap(), |_| 0.0, &SolveOptions::default()).unwrap();
        assert!(sol.values.iter().all(|&v| v == 0.0));
        assert_eq!(sol.energy, 0.0);
    }

    #[test]
    fn nonpositive_weight_is_rejected() {
        let mesh = Mesh::unit_square(2).unwrap();
        let w = Weight::tabulated(2, vec![0.0, 1.0], vec![1.0, 1.0]).unwrap();
        assert!(assemble(&mesh, &w, |_| 1.0).is_ok());
        let wrong_dim = Weight::power(3, 1.0).unwrap();
        assert!(matches!(assemble(&mesh, &wrong_dim, |_| 1.0), Err(Error::Dimension { .. })));
    }

    #[test]
    fn rates() {
        let r = convergence_rate(&[0.4, 0.1, 0.025]).unwrap();
        assert_relative_eq!(r.order, 2.0);
        assert!(matches!(convergence_rate(&[0.1, 0.2, 0.05]), Err(Error::Inconclusive(_))));
    }
}
