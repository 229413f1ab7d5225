//! The constrained logarithmic-energy problem: discretized solver, region
//! classification, and the Hahn closed forms.
//!
//! The solver works with cell masses m_i = h·d_i. Every pair of cells,
//! including a cell with itself, interacts through the exact average of
//! log(1/|x − y|) over the two cells, so the matrix is Toeplitz and free of
//! midpoint bias near the diagonal.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::ensembles::NodeDensity;
use crate::error::{invalid, Error, Result};

/// The potential V, as a table (linear interpolation, linear extrapolation
/// past the ends) or as a function.
#[derive(Clone)]
pub enum Potential {
    Table { x: Vec<f64>, v: Vec<f64> },
    Function(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for Potential {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Potential::Table { x, .. } => write!(f, "Potential::Table({} points)", x.len()),
            Potential::Function(_) => write!(f, "Potential::Function"),
        }
    }
}

impl Potential {
    pub fn from_fn(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Potential::Function(Arc::new(f))
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Potential::Function(f) => f(t),
            Potential::Table { x, v } => {
                let n = x.len();
                if n == 1 {
                    return v[0];
                }
                let i = x.partition_point(|p| *p <= t).clamp(1, n - 1) - 1;
                let s = (t - x[i]) / (x[i + 1] - x[i]);
                v[i] + s * (v[i + 1] - v[i])
            }
        }
    }
}

/// φ(x) = V(x) + ∫_a^b log|x − y| dy.
#[derive(Debug, Clone)]
pub struct Field {
    pub potential: Potential,
    pub a: f64,
    pub b: f64,
}

fn xlogx(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        t * t.ln()
    }
}

impl Field {
    pub fn eval(&self, x: f64) -> f64 {
        self.potential.eval(x) + xlogx(self.b - x) + xlogx(x - self.a) - (self.b - self.a)
    }

    /// Cell average by 4-point Gauss–Legendre.
    fn cell_average(&self, lo: f64, hi: f64) -> f64 {
        const T: [f64; 2] = [0.339_981_043_584_856_3, 0.861_136_311_594_052_6];
        const W: [f64; 2] = [0.652_145_154_862_546_1, 0.347_854_845_137_453_9];
        let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        let mut s = 0.0;
        for (t, w) in T.iter().zip(W) {
            s += w * (self.eval(mid - half * t) + self.eval(mid + half * t));
        }
        0.5 * s
    }
}

pub fn build_field(potential: Potential, a: f64, b: f64) -> Result<Field> {
    if !(a < b) {
        return Err(invalid("field needs a < b"));
    }
    Ok(Field { potential, a, b })
}

/// Potential table from `extract_potential`, positioned at the node values.
pub fn field_from_table(nodes: &[f64], v: &[f64], a: f64, b: f64) -> Result<Field> {
    if nodes.len() != v.len() || nodes.len() < 2 {
        return Err(invalid("potential table needs matching node and value lists"));
    }
    build_field(Potential::Table { x: nodes.to_vec(), v: v.to_vec() }, a, b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegionKind {
    Band,
    Void,
    Saturated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub lo: f64,
    pub hi: f64,
    pub kind: RegionKind,
    /// Cell index range [first, last].
    pub first: usize,
    pub last: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EquilibriumMeasure {
    pub a: f64,
    pub b: f64,
    pub h: f64,
    pub c: f64,
    /// Cell midpoints.
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    /// ρ⁰/c per cell (cell average).
    pub upper: Vec<f64>,
    pub multiplier: f64,
    /// δE/δμ − l_c at the midpoints.
    pub varderiv: Vec<f64>,
    pub regions: Vec<Region>,
    pub iterations: usize,
    pub residual: f64,
    /// Objective after every accepted step.
    pub energy_trace: Vec<f64>,
    /// max φ − min φ over the grid, the scale of the KKT tolerances.
    pub field_scale: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tolerance: 1e-8, max_iterations: 100_000 }
    }
}

/// G(t) = t²/2·log|t| − 3t²/4, so that ∫∫ over two cells of log|x − y| is
/// a second difference of G.
fn g2(t: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else {
        0.5 * t * t * t.abs().ln() - 0.75 * t * t
    }
}

/// Averaged log(1/|x − y|) between cells d apart.
fn log_toeplitz(g: usize, h: f64) -> Vec<f64> {
    (0..g)
        .map(|d| {
            let s = d as f64 * h;
            -(g2(s + h) - 2.0 * g2(s) + g2(s - h)) / (h * h)
        })
        .collect()
}

fn toeplitz_mul(t: &[f64], m: &[f64]) -> Vec<f64> {
    let n = m.len();
    (0..n)
        .map(|i| {
            let mut s = 0.0;
            for (j, mj) in m.iter().enumerate() {
                s += t[i.abs_diff(j)] * mj;
            }
            s
        })
        .collect()
}

/// Projected step clip(m − α(d − λ), 0, u) with the shift λ bisected so
/// that the total mass is kept. Written around m rather than as a projection
/// of m − αd, so that a vanishing step leaves m exactly in place.
fn project_step(m: &[f64], d: &[f64], alpha: f64, u: &[f64]) -> Vec<f64> {
    let at = |lam: f64, i: usize| (m[i] - alpha * (d[i] - lam)).clamp(0.0, u[i]);
    let mass = |lam: f64| -> f64 { (0..m.len()).map(|i| at(lam, i)).sum() };
    let target: f64 = m.iter().sum();
    let umax = u.iter().cloned().fold(0.0, f64::max);
    let dmin = d.iter().cloned().fold(f64::INFINITY, f64::min);
    let dmax = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut lo = dmin - umax / alpha - 1.0;
    let mut hi = dmax + umax / alpha + 1.0;
    for _ in 0..2200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if mass(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lam = if (mass(lo) - target).abs() <= (mass(hi) - target).abs() { lo } else { hi };
    (0..m.len()).map(|i| at(lam, i)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes c∬log(1/|x−y|)dμdμ + ∫φdμ over 0 ≤ dμ/dx ≤ ρ⁰/c, μ([a,b]) = 1,
/// by projected gradient with Barzilai–Borwein steps and a monotone
/// halving safeguard.
pub fn solve_equilibrium(field: &Field, rho0: &NodeDensity, c: f64, gridsize: usize, opts: SolverOptions) -> Result<EquilibriumMeasure> {
    if !(c > 0.0 && c < 1.0) {
        return Err(invalid("c must lie in (0, 1)"));
    }
    if gridsize < 64 {
        return Err(invalid("gridsize must be at least 64"));
    }
    let (a, b) = (field.a, field.b);
    let g = gridsize;
    let h = (b - a) / g as f64;
    let grid: Vec<f64> = (0..g).map(|i| a + (i as f64 + 0.5) * h).collect();
    let cap: Vec<f64> = (0..g).map(|i| rho0.integral(a + i as f64 * h, a + (i + 1) as f64 * h) / c).collect();
    let total_cap: f64 = cap.iter().sum();
    if total_cap < 1.0 {
        return Err(invalid("infeasible: ∫ρ⁰/c < 1"));
    }
    let phibar: Vec<f64> = (0..g).map(|i| field.cell_average(a + i as f64 * h, a + (i + 1) as f64 * h)).collect();
    let t = log_toeplitz(g, h);

    let grad_of = |m: &[f64]| -> (Vec<f64>, f64) {
        let lm = toeplitz_mul(&t, m);
        let grad: Vec<f64> = lm.iter().zip(&phibar).map(|(l, p)| 2.0 * c * l + p).collect();
        let f = c * dot(m, &lm) + dot(&phibar, m);
        (grad, f)
    };
    // The projection only sees v up to a constant; removing the mean of the
    // gradient over free cells keeps the bisected shift near zero, where its
    // absolute resolution is fine enough for the stopping tolerance.
    let centred = |m: &[f64], grad: &[f64]| -> Vec<f64> {
        let (mut s, mut n) = (0.0, 0usize);
        for i in 0..m.len() {
            if m[i] > 0.0 && m[i] < cap[i] {
                s += grad[i];
                n += 1;
            }
        }
        let mean = if n > 0 { s / n as f64 } else { 0.0 };
        grad.iter().map(|x| x - mean).collect()
    };
    let pg_norm = |m: &[f64], grad: &[f64]| -> f64 {
        let p = project_step(m, &centred(m, grad), 1.0, &cap);
        m.iter().zip(&p).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    };

    let mut m: Vec<f64> = cap.iter().map(|u| u / total_cap).collect();
    let (mut grad, mut f) = grad_of(&m);
    let mut step = 1.0 / (2.0 * c * t[0]).max(1e-12) * h;
    let mut energy_trace = vec![f];
    let mut residual = pg_norm(&m, &grad);
    let mut iterations = 0;
    while residual > opts.tolerance && iterations < opts.max_iterations {
        iterations += 1;
        let mut alpha = step;
        let gc = centred(&m, &grad);
        let (next, next_grad, next_f) = loop {
            let cand = project_step(&m, &gc, alpha, &cap);
            let s: Vec<f64> = cand.iter().zip(&m).map(|(x, y)| x - y).collect();
            // The objective is quadratic, so its change is computed from the
            // step itself rather than as a difference of rounded values.
            let ls = toeplitz_mul(&t, &s);
            let gs = dot(&gc, &s);
            let change = gs + c * dot(&s, &ls);
            if change <= 1e-4 * gs || alpha < 1e-20 {
                let cg: Vec<f64> = grad.iter().zip(&ls).map(|(g0, l)| g0 + 2.0 * c * l).collect();
                break (cand, cg, f + change);
            }
            alpha *= 0.5;
        };
        let s: Vec<f64> = next.iter().zip(&m).map(|(x, y)| x - y).collect();
        let y: Vec<f64> = next_grad.iter().zip(&grad).map(|(x, y)| x - y).collect();
        let sy = dot(&s, &y);
        step = if sy > 0.0 { (dot(&s, &s) / sy).clamp(1e-12, 1e6) } else { alpha * 2.0 };
        let stalled = s.iter().all(|v| v.abs() < 1e-18);
        m = next;
        grad = next_grad;
        f = next_f;
        energy_trace.push(f);
        residual = pg_norm(&m, &grad);
        if stalled {
            break;
        }
    }
    if residual > opts.tolerance {
        return Err(Error::NonConvergence { iterations, residual });
    }

    let density: Vec<f64> = m.iter().map(|x| x / h).collect();
    let upper: Vec<f64> = cap.iter().map(|u| u / h).collect();
    let regions = classify(&density, &upper, a, h);
    let band_cells: Vec<usize> = regions
        .iter()
        .filter(|r| r.kind == RegionKind::Band)
        .flat_map(|r| r.first..=r.last)
        .collect();
    let multiplier = if band_cells.is_empty() {
        grad.iter().sum::<f64>() / g as f64
    } else {
        band_cells.iter().map(|&i| grad[i]).sum::<f64>() / band_cells.len() as f64
    };
    let phis: Vec<f64> = grid.iter().map(|&x| field.eval(x)).collect();
    let field_scale = phis.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - phis.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut em = EquilibriumMeasure {
        a,
        b,
        h,
        c,
        grid,
        density,
        upper,
        multiplier,
        varderiv: Vec::new(),
        regions,
        iterations,
        residual,
        energy_trace,
        field_scale,
    };
    let vd = variational_derivative(&em, field, c);
    em.varderiv = vd.iter().map(|v| v - multiplier).collect();
    Ok(em)
}

/// δE/δμ(x) = −2c∫log|x − y|dμ(y) + φ(x) at the cell midpoints, each
/// cell's contribution integrated exactly.
pub fn variational_derivative(em: &EquilibriumMeasure, field: &Field, c: f64) -> Vec<f64> {
    let f1 = |u: f64| if u == 0.0 { 0.0 } else { u * u.abs().ln() - u };
    let h = em.h;
    em.grid
        .iter()
        .map(|&x| {
            let mut s = 0.0;
            for (j, d) in em.density.iter().enumerate() {
                let y0 = em.a + j as f64 * h;
                s += d * (f1(y0 + h - x) - f1(y0 - x));
            }
            -2.0 * c * s + field.eval(x)
        })
        .collect()
}

/// Labels cells Void / Saturated / Band with ε = 1e-3, merges runs and
/// absorbs runs shorter than three cells into the preceding region.
pub fn classify(density: &[f64], upper: &[f64], a: f64, h: f64) -> Vec<Region> {
    const EPS: f64 = 1e-3;
    let labels: Vec<RegionKind> = density
        .iter()
        .zip(upper)
        .map(|(d, u)| {
            if *d <= EPS * u {
                RegionKind::Void
            } else if *d >= (1.0 - EPS) * u {
                RegionKind::Saturated
            } else {
                RegionKind::Band
            }
        })
        .collect();
    let mut runs: Vec<(RegionKind, usize, usize)> = Vec::new();
    for (i, &l) in labels.iter().enumerate() {
        match runs.last_mut() {
            Some(r) if r.0 == l => r.2 = i,
            _ => runs.push((l, i, i)),
        }
    }
    let mut merged: Vec<(RegionKind, usize, usize)> = Vec::new();
    for (idx, r) in runs.iter().enumerate() {
        let short = r.2 - r.1 + 1 < 3;
        if short && runs.len() > 1 {
            if let Some(prev) = merged.last_mut() {
                prev.2 = r.2;
                continue;
            }
            // A short leading run joins its successor.
            let next = runs[idx + 1];
            merged.push((next.0, r.1, r.2));
            continue;
        }
        match merged.last_mut() {
            Some(prev) if prev.0 == r.0 => prev.2 = r.2,
            _ => merged.push(*r),
        }
    }
    merged
        .into_iter()
        .map(|(kind, first, last)| Region { lo: a + first as f64 * h, hi: a + (last + 1) as f64 * h, kind, first, last })
        .collect()
}

impl EquilibriumMeasure {
    /// Largest |varderiv| on bands, smallest varderiv on voids, largest on
    /// saturated regions. Band cells adjacent to another region are
    /// skipped: their values straddle an edge.
    pub fn kkt(&self) -> Kkt {
        let mut k = Kkt { band: 0.0, void_min: f64::INFINITY, saturated_max: f64::NEG_INFINITY };
        for r in &self.regions {
            let (lo, hi) = match r.kind {
                RegionKind::Band => (r.first + 1, r.last.saturating_sub(1)),
                _ => (r.first, r.last),
            };
            for i in lo..=hi.min(self.grid.len() - 1) {
                if i < r.first || i > r.last {
                    continue;
                }
                let v = self.varderiv[i];
                match r.kind {
                    RegionKind::Band => k.band = k.band.max(v.abs()),
                    RegionKind::Void => k.void_min = k.void_min.min(v),
                    RegionKind::Saturated => k.saturated_max = k.saturated_max.max(v),
                }
            }
        }
        k
    }

    pub fn mass(&self) -> f64 {
        self.h * self.density.iter().sum::<f64>()
    }

    /// Outer ends of the band regions, left to right.
    pub fn band_edges(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for r in self.regions.iter().filter(|r| r.kind == RegionKind::Band) {
            out.push(r.lo);
            out.push(r.hi);
        }
        out
    }

    /// Exponent p in d ≈ C·dist^p (void side) or ρ⁰/c − d ≈ C·dist^p
    /// (saturated side) fitted over the decade of distances [2h, 20h]
    /// inside the band next to `edge`.
    pub fn edge_exponent(&self, edge: f64) -> Option<f64> {
        let band = self.regions.iter().find(|r| r.kind == RegionKind::Band && ((r.lo - edge).abs() < 1e-12 || (r.hi - edge).abs() < 1e-12))?;
        let right = (band.hi - edge).abs() < 1e-12;
        let neighbour = self.regions.iter().find(|r| if right { (r.lo - edge).abs() < 1e-12 } else { (r.hi - edge).abs() < 1e-12 });
        let saturated = neighbour.map(|r| r.kind == RegionKind::Saturated).unwrap_or(false);
        // Edge refined by the linear extrapolation of d² (or of the gap²).
        let gap = |i: usize| if saturated { self.upper[i] - self.density[i] } else { self.density[i] };
        let cells: Vec<usize> = (band.first..=band.last).collect();
        let near: Vec<usize> = if right { cells.iter().rev().take(12).cloned().collect() } else { cells.iter().take(12).cloned().collect() };
        let (i1, i2) = (near[2], near[8]);
        let (y1, y2) = (gap(i1).powi(2), gap(i2).powi(2));
        let slope = (y2 - y1) / (self.grid[i2] - self.grid[i1]);
        let refined = if slope.abs() > 0.0 { self.grid[i1] - y1 / slope } else { edge };
        let mut pts = Vec::new();
        for &i in &cells {
            let dist = (self.grid[i] - refined).abs();
            if dist >= 2.0 * self.h && dist <= 20.0 * self.h && gap(i) > 0.0 {
                pts.push((dist.ln(), gap(i).ln()));
            }
        }
        if pts.len() < 3 {
            return None;
        }
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        Some(sxy / sxx)
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Kkt {
    pub band: f64,
    pub void_min: f64,
    pub saturated_max: f64,
}

/// The Hahn ensemble with A = B, its dual and the hexagon parametrization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HahnClosedForms {
    pub beta: f64,
    pub c_a: f64,
    pub ellipse_y: f64,
    pub tau0: f64,
    pub c_of_tau: f64,
    pub a_of_tau: f64,
}

pub fn hahn_closed_forms(a: f64, c: f64, lambda: f64, tau: f64) -> Result<HahnClosedForms> {
    if !(a >= 0.0) || !(c > 0.0 && c < 1.0) || !(lambda > 0.0) {
        return Err(invalid("need A ≥ 0, 0 < c < 1, λ > 0"));
    }
    let half_width = 3f64.sqrt() * lambda / 2.0;
    if tau.abs() > half_width {
        return Err(invalid(format!("|τ| = {} exceeds √3λ/2 = {half_width}", tau.abs())));
    }
    let c_of_tau = hexagon_c(lambda, tau);
    Ok(HahnClosedForms {
        beta: hahn_band_edge(a, c),
        c_a: critical_c(a),
        ellipse_y: ellipse_y(lambda, tau),
        tau0: tau0(lambda),
        c_of_tau,
        a_of_tau: -tau / 3f64.sqrt() * c_of_tau,
    })
}

/// Right band end of the Hahn ensemble on [−1/2, 1/2].
pub fn hahn_band_edge(a: f64, c: f64) -> f64 {
    (c * (1.0 - c) * (2.0 * a + c) * (2.0 * a + c + 1.0)).sqrt() / (2.0 * (a + c))
}

/// c_A = √(A² + A) − A: below it the Hahn gaps are voids, above saturated.
pub fn critical_c(a: f64) -> f64 {
    (a * a + a).sqrt() - a
}

pub fn ellipse_y(lambda: f64, tau: f64) -> f64 {
    let r = 2.0 * tau / (3f64.sqrt() * lambda);
    (lambda + 1.0).sqrt() * (1.0 - r * r).max(0.0).sqrt()
}

pub fn tau0(lambda: f64) -> f64 {
    -3f64.sqrt() * lambda * lambda / (2.0 * (2.0 + lambda))
}

/// Particle-to-node ratio 2k/(2k + m) of the line at τ in the limit.
pub fn hexagon_c(lambda: f64, tau: f64) -> f64 {
    2.0 / (2.0 + lambda + 2.0 * tau / 3f64.sqrt())
}

/// Occupation density c·dμ/dx of the Hahn ensemble (A = B) at x ∈ [−1/2, 1/2].
pub fn hahn_occupation(a: f64, c: f64, x: f64) -> f64 {
    let beta = hahn_band_edge(a, c);
    let b2 = beta * beta;
    let w = x * x;
    let saturated = c > critical_c(a);
    if w >= b2 {
        return if saturated { 1.0 } else { 0.0 };
    }
    let z1 = a + 0.5;
    let u = 4.0 * (a + c) * (a + c);
    let t = -2.0 - u * (w - b2) / ((w - 0.25) * (w - z1 * z1));
    let g = (-t / 2.0).clamp(-1.0, 1.0).acos() / (2.0 * std::f64::consts::PI);
    let w0 = ((2.0 * a + 1.0).powi(2) + 1.0 - u) / 8.0;
    let flip = 0.0 < w0 && w0 < b2 && w < w0;
    if saturated ^ flip {
        1.0 - g
    } else {
        g
    }
}

/// The rate √κ/2 = πcB_β = π(1−c)B̄_β with which the occupation density
/// leaves its gap value: ρ ≈ (√κ/π)·√(β − |x|) inside the band edge.
pub fn hahn_edge_rate(a: f64, c: f64) -> f64 {
    let beta = hahn_band_edge(a, c);
    let z1 = a + 0.5;
    let u = 4.0 * (a + c) * (a + c);
    let kappa = 2.0 * u * beta / ((0.25 - beta * beta) * (z1 * z1 - beta * beta));
    kappa.sqrt() / 2.0
}
