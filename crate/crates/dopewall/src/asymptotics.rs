//! Limit kernels, Airy numerics, Fredholm determinants and the finite-N
//! convergence harness.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensembles::{Ensemble, NodeSet, WeightSpec};
use crate::equilibrium::{self, EquilibriumMeasure, RegionKind};
use crate::error::{invalid, Error, Result};
use crate::orthopoly::{cd_kernel, sym_kernel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LimitKernelSpec {
    Sine,
    SineWall,
    Airy,
    /// The wall kernel on ℓ²(ℕ₀) with occupation θ = 1/(δ(0)ρ⁰(0)).
    DiscreteSineWall { delta0: f64, rho0: f64 },
}

impl LimitKernelSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            LimitKernelSpec::DiscreteSineWall { delta0, rho0 } if !(delta0 > 0.0 && rho0 > 0.0) => {
                Err(invalid("δ(0) and ρ⁰(0) must be positive"))
            }
            _ => Ok(()),
        }
    }

    /// Continuous kernels at (ξ, η); the discrete one at integer indices.
    pub fn eval(&self, xi: f64, eta: f64) -> Result<f64> {
        self.validate()?;
        match *self {
            LimitKernelSpec::Sine => Ok(sine_eval(SineKind::Sine, xi, eta)),
            LimitKernelSpec::SineWall => Ok(sine_eval(SineKind::SineWall, xi, eta)),
            LimitKernelSpec::Airy => airy_kernel(xi, eta),
            LimitKernelSpec::DiscreteSineWall { delta0, rho0 } => {
                if xi < 0.0 || eta < 0.0 || xi.fract() != 0.0 || eta.fract() != 0.0 {
                    return Err(invalid("discrete wall kernel is indexed by non-negative integers"));
                }
                Ok(wall_entry(xi as usize, eta as usize, 1.0 / (delta0 * rho0)))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SineKind {
    Sine,
    SineWall,
}

/// sin(πt)/(πt), by its series near 0.
fn sinc(t: f64) -> f64 {
    if t.abs() < 1e-4 {
        let u = (PI * t).powi(2);
        1.0 - u / 6.0 + u * u / 120.0
    } else {
        (PI * t).sin() / (PI * t)
    }
}

pub fn sine_eval(kind: SineKind, xi: f64, eta: f64) -> f64 {
    match kind {
        SineKind::Sine => sinc(xi - eta),
        SineKind::SineWall => sinc(xi - eta) - sinc(xi + eta),
    }
}

const AI0: f64 = 0.355_028_053_887_817_24;
const AIP0: f64 = -0.258_819_403_792_806_8;

fn airy_series(x: f64) -> (f64, f64) {
    let x3 = x * x * x;
    let (mut f, mut g, mut fp, mut gp) = (1.0, x, 0.0, 1.0);
    let (mut t, mut s, mut p, mut q) = (1.0, x, x * x / 2.0, 1.0);
    fp += p;
    for k in 1..200 {
        let kf = k as f64;
        t *= x3 / ((3.0 * kf - 1.0) * (3.0 * kf));
        s *= x3 / ((3.0 * kf) * (3.0 * kf + 1.0));
        q *= x3 / ((3.0 * kf - 2.0) * (3.0 * kf));
        if k >= 2 {
            p *= x3 / ((3.0 * kf - 3.0) * (3.0 * kf - 1.0));
            fp += p;
        }
        f += t;
        g += s;
        gp += q;
        if t.abs().max(s.abs()).max(p.abs()).max(q.abs()) < 1e-18 * f.abs().max(1.0) {
            break;
        }
    }
    (AI0 * f + AIP0 * g, AI0 * fp + AIP0 * gp)
}

/// Coefficients u_k, v_k of the large-argument expansions.
fn uv(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut u = vec![1.0];
    let mut v = vec![1.0];
    for k in 1..n {
        let kf = k as f64;
        let next = u[k - 1] * (6.0 * kf - 5.0) * (6.0 * kf - 3.0) * (6.0 * kf - 1.0) / ((2.0 * kf - 1.0) * 216.0 * kf);
        u.push(next);
        v.push(-(6.0 * kf + 1.0) / (6.0 * kf - 1.0) * next);
    }
    (u, v)
}

/// Sums c_k·(±1/ζ)^k over k ≡ parity (mod 2), stopping at the smallest term.
fn asymptotic_sum(c: &[f64], zeta: f64, alternating: bool, parity: usize) -> f64 {
    let mut s = 0.0;
    let mut last = f64::INFINITY;
    let mut j = 0usize;
    for k in (parity..c.len()).step_by(2) {
        let sign = if alternating {
            if k % 2 == 0 { 1.0 } else { -1.0 }
        } else if j % 2 == 0 {
            1.0
        } else {
            -1.0
        };
        let term = c[k] / zeta.powi(k as i32);
        if term.abs() > last {
            break;
        }
        s += sign * term;
        last = term.abs();
        j += 1;
        if last < 1e-17 {
            break;
        }
    }
    s
}

/// (Ai(x), Ai′(x)) for |x| ≤ 100: Maclaurin series on [−7, 5.5], the
/// large-argument expansions outside.
pub fn airy_eval(x: f64) -> Result<(f64, f64)> {
    if !x.is_finite() || x.abs() > 100.0 {
        return Err(Error::Range(x));
    }
    if (-7.0..=5.5).contains(&x) {
        return Ok(airy_series(x));
    }
    let (u, v) = uv(40);
    let z = x.abs();
    let zeta = 2.0 / 3.0 * z.powf(1.5);
    let q = z.powf(0.25);
    if x > 0.0 {
        let e = (-zeta).exp() / (2.0 * PI.sqrt());
        let su = asymptotic_sum(&u, zeta, true, 0) + asymptotic_sum(&u, zeta, true, 1);
        let sv = asymptotic_sum(&v, zeta, true, 0) + asymptotic_sum(&v, zeta, true, 1);
        Ok((e / q * su, -e * q * sv))
    } else {
        let (sn, cs) = (zeta - PI / 4.0).sin_cos();
        let (ue, uo) = (asymptotic_sum(&u, zeta, false, 0), asymptotic_sum(&u, zeta, false, 1));
        let (ve, vo) = (asymptotic_sum(&v, zeta, false, 0), asymptotic_sum(&v, zeta, false, 1));
        let ai = (cs * ue + sn * uo) / (PI.sqrt() * q);
        let aip = q / PI.sqrt() * (sn * ve - cs * vo);
        Ok((ai, aip))
    }
}

/// (Ai(ξ)Ai′(η) − Ai′(ξ)Ai(η))/(ξ − η), with the diagonal limit
/// Ai′(ξ)² − ξAi(ξ)² used when |ξ − η| < 1e-7.
pub fn airy_kernel(xi: f64, eta: f64) -> Result<f64> {
    let (a, ap) = airy_eval(xi)?;
    if (xi - eta).abs() < 1e-7 {
        let m = 0.5 * (xi + eta);
        let (a, ap) = airy_eval(m)?;
        return Ok(ap * ap - m * a * a);
    }
    let (b, bp) = airy_eval(eta)?;
    Ok((a * bp - ap * b) / (xi - eta))
}

/// Gauss–Legendre nodes and weights on [−1, 1] from the eigen-decomposition
/// of the Jacobi matrix.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let j = DMatrix::from_fn(n, n, |i, k| {
        if i.abs_diff(k) == 1 {
            let m = i.max(k) as f64;
            m / (4.0 * m * m - 1.0).sqrt()
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(j);
    let mut pairs: Vec<(f64, f64)> = (0..n).map(|i| (eig.eigenvalues[i], 2.0 * eig.eigenvectors[(0, i)].powi(2))).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Symmetrize away the last bits of eigensolver noise.
    let mut x: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let mut w: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    for i in 0..n / 2 {
        let xm = 0.5 * (x[n - 1 - i] - x[i]);
        let wm = 0.5 * (w[i] + w[n - 1 - i]);
        x[i] = -xm;
        x[n - 1 - i] = xm;
        w[i] = wm;
        w[n - 1 - i] = wm;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CdfValue {
    pub s: f64,
    pub value: f64,
    pub order: usize,
    pub warning: Option<String>,
}

/// Upper end of the Nyström interval: where the Airy kernel diagonal drops
/// below 1e-14.
fn airy_tail_end(s: f64) -> Result<f64> {
    let mut t = s.max(0.0);
    while airy_kernel(t, t)? >= 1e-14 {
        t += 0.25;
    }
    Ok(t.max(s + 1.0))
}

fn airy_fredholm(s: f64, order: usize) -> Result<f64> {
    let end = airy_tail_end(s)?;
    let (t, w) = gauss_legendre(order);
    let half = 0.5 * (end - s);
    let xs: Vec<f64> = t.iter().map(|t| s + half * (t + 1.0)).collect();
    let ws: Vec<f64> = w.iter().map(|w| (w * half).sqrt()).collect();
    let mut m = DMatrix::identity(order, order);
    for i in 0..order {
        for j in 0..=i {
            let v = ws[i] * ws[j] * airy_kernel(xs[i], xs[j])?;
            m[(i, j)] -= v;
            if i != j {
                m[(j, i)] -= v;
            }
        }
    }
    Ok(m.determinant())
}

/// F(s) = det(I − A|_{[s,∞)}) by Gauss–Legendre Nyström. The result
/// carries a warning when order + 10 changes the value by more than 1e-10.
pub fn tracy_widom_cdf(s: f64, order: usize) -> Result<CdfValue> {
    if !(s >= -10.0) {
        return Err(invalid("s must be at least −10"));
    }
    if !(10..=200).contains(&order) {
        return Err(invalid("quadrature order must lie in [10, 200]"));
    }
    let value = airy_fredholm(s, order)?;
    let check = airy_fredholm(s, order + 10)?;
    let warning = ((value - check).abs() > 1e-10)
        .then(|| format!("order {order} is not converged at s = {s}: order {} differs by {:.2e}", order + 10, (value - check).abs()));
    Ok(CdfValue { s, value: value.clamp(0.0, 1.0), order, warning })
}

fn wall_entry(i: usize, j: usize, theta: f64) -> f64 {
    let first = if i == j { theta } else { theta * sinc(theta * (i as f64 - j as f64)) };
    let t = (i + j + 1) as f64;
    first - theta * sinc(theta * t)
}

/// The wall kernel restricted to {0, …, n−1}.
pub fn wall_matrix(n: usize, theta: f64) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| wall_entry(i, j, theta))
}

/// det(I − 𝒮⁰ restricted to B(s) = {0, …, ⌊s − 1/2⌋}): the probability that
/// no particle sits below s (positions counted in node spacings from the
/// wall, the first node at 1/2).
pub fn wall_cdf(s: f64, delta0: f64, rho0: f64) -> Result<f64> {
    if !(delta0 > 0.0 && rho0 > 0.0) {
        return Err(invalid("δ(0) and ρ⁰(0) must be positive"));
    }
    if !s.is_finite() {
        return Err(invalid("s must be finite"));
    }
    if s < 0.5 {
        return Ok(1.0);
    }
    let n = (s - 0.5).floor() as usize + 1;
    let m = DMatrix::identity(n, n) - wall_matrix(n, 1.0 / (delta0 * rho0));
    Ok(m.determinant())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Band,
    Wall,
    GapVoid,
    GapSaturated,
    Edge,
    CrossTerm,
}

impl std::str::FromStr for Regime {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "band" => Regime::Band,
            "wall" => Regime::Wall,
            "gap_void" => Regime::GapVoid,
            "gap_saturated" => Regime::GapSaturated,
            "edge" => Regime::Edge,
            "cross_term" => Regime::CrossTerm,
            other => return Err(invalid(format!("unknown regime {other}"))),
        })
    }
}

/// Hahn ensembles with A = B on 2N equispaced nodes of [−1/2, 1/2] with
/// P = Q = 2AN + 1 and k = round(cN) particles on the positive half.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HahnFamily {
    pub a: f64,
    pub c: f64,
}

impl HahnFamily {
    pub fn ensemble(&self, n: usize) -> Result<Ensemble> {
        let nodes = NodeSet::equispaced(2 * n)?;
        let p = self.a * (2 * n) as f64 + 1.0;
        let weight = WeightSpec::hahn(&nodes, p, p)?;
        let k = (self.c * n as f64).round() as usize;
        Ensemble::wall_symmetric(nodes, weight, k)
    }

    pub fn id(&self) -> String {
        format!("hahn(A={}, c={})", self.a, self.c)
    }
}

/// Equilibrium data the harness rescales with: the occupation fraction
/// c·dμ/dx / ρ⁰, the right band end β, the edge rate r with
/// gap ≈ (r/π)·√(β − x), and the type of the outer gap.
#[derive(Clone)]
pub struct LimitInputs {
    pub occupation: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub band_edge: f64,
    pub edge_rate: f64,
    pub outer_gap: RegionKind,
}

impl std::fmt::Debug for LimitInputs {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LimitInputs")
            .field("band_edge", &self.band_edge)
            .field("edge_rate", &self.edge_rate)
            .field("outer_gap", &self.outer_gap)
            .finish()
    }
}

impl LimitInputs {
    /// Closed forms of the Hahn family.
    pub fn hahn(a: f64, c: f64) -> Self {
        let outer_gap = if c > equilibrium::critical_c(a) { RegionKind::Saturated } else { RegionKind::Void };
        Self {
            occupation: Arc::new(move |x| equilibrium::hahn_occupation(a, c, x)),
            band_edge: equilibrium::hahn_band_edge(a, c),
            edge_rate: equilibrium::hahn_edge_rate(a, c),
            outer_gap,
        }
    }

    /// From a solver result with one central band: occupation by linear
    /// interpolation, β from the band's right end, and the rate from a
    /// least-squares fit of gap² against the distance to β.
    pub fn from_equilibrium(em: &EquilibriumMeasure) -> Result<Self> {
        let band = em
            .regions
            .iter()
            .filter(|r| r.kind == RegionKind::Band)
            .last()
            .ok_or_else(|| Error::Dependency("equilibrium measure has no band".into()))?;
        let outer = em
            .regions
            .iter()
            .find(|r| r.first == band.last + 1)
            .map(|r| r.kind)
            .ok_or_else(|| Error::Dependency("band has no gap to its right".into()))?;
        let occ: Vec<f64> = em.density.iter().zip(&em.upper).map(|(d, u)| if *u > 0.0 { (d / u).clamp(0.0, 1.0) } else { 0.0 }).collect();
        let beta = band.hi;
        let mut sxy = 0.0;
        let mut sxx = 0.0;
        for i in band.first..=band.last {
            let d = beta - em.grid[i];
            if d > 2.0 * em.h && d < 20.0 * em.h {
                let g = if outer == RegionKind::Saturated { 1.0 - occ[i] } else { occ[i] };
                sxy += d * g * g;
                sxx += d * d;
            }
        }
        if sxx == 0.0 {
            return Err(Error::Dependency("band too narrow to fit an edge rate".into()));
        }
        let rate = PI * (sxy / sxx).sqrt();
        let grid = em.grid.clone();
        Ok(Self {
            occupation: Arc::new(move |x| {
                let n = grid.len();
                let i = grid.partition_point(|g| *g <= x).clamp(1, n - 1) - 1;
                let t = ((x - grid[i]) / (grid[i + 1] - grid[i])).clamp(0.0, 1.0);
                occ[i] + t * (occ[i + 1] - occ[i])
            }),
            band_edge: beta,
            edge_rate: rate,
            outer_gap: outer,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub family: String,
    pub regime: Regime,
    #[serde(rename = "N")]
    pub n_values: Vec<usize>,
    #[serde(rename = "sup_error")]
    pub errors: Vec<f64>,
    pub slope: f64,
    pub pass: bool,
    /// Scalings used, for audit.
    pub constants: BTreeMap<String, f64>,
}

pub fn loglog_slope(ns: &[usize], errs: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = ns.iter().zip(errs).map(|(n, e)| ((*n as f64).ln(), e.max(f64::MIN_POSITIVE).ln())).collect();
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Largest |K_{2N,2k}(x, −y)| over positive nodes x, y in [lo, hi].
pub fn cross_term_sup(e: &Ensemble, lo: f64, hi: f64) -> Result<f64> {
    let n = e.n();
    let full = cd_kernel(&e.full()?, 2 * e.k())?;
    let xs = e.nodes().values();
    let idx: Vec<usize> = (n..2 * n).filter(|&i| xs[i] >= lo && xs[i] <= hi).collect();
    let mut best = 0.0f64;
    for &i in &idx {
        for &j in &idx {
            best = best.max(full.get(i, 2 * n - 1 - j).abs());
        }
    }
    Ok(best)
}

/// Sup-error of one regime at one N, with the scalings used.
fn regime_error(family: &HahnFamily, inputs: &LimitInputs, regime: Regime, n: usize) -> Result<(f64, Vec<(&'static str, f64)>)> {
    let e = family.ensemble(n)?;
    let nf = (2 * n) as f64;
    let beta = inputs.band_edge;
    if regime == Regime::CrossTerm {
        return Ok((cross_term_sup(&e, 0.1, beta - 0.05)?, vec![("window_lo", 0.1), ("window_hi", beta - 0.05)]));
    }
    let km = sym_kernel(&e)?;
    let xs = km.nodes().values().to_vec();
    let len = xs.len();
    match regime {
        Regime::Band => {
            let x0 = 0.5 * beta;
            let r = (inputs.occupation)(x0);
            let i0 = xs.iter().enumerate().min_by(|a, b| (a.1 - x0).abs().total_cmp(&(b.1 - x0).abs())).map(|p| p.0).unwrap_or(0);
            let w = (4.0 / r).ceil() as usize;
            let (lo, hi) = (i0.saturating_sub(w), (i0 + w).min(len - 1));
            let mut err = 0.0f64;
            for i in lo..=hi {
                for j in lo..=hi {
                    let d = (xs[i] - xs[j]) * nf * r;
                    err = err.max((km.get(i, j) / r - sinc(d)).abs());
                }
            }
            Ok((err, vec![("x0", x0), ("delta", 1.0 / r), ("window_nodes", w as f64)]))
        }
        Regime::Wall => {
            let r = (inputs.occupation)(0.0);
            let w = ((4.0 / r).ceil() as usize).min(len);
            let mut err = 0.0f64;
            for i in 0..w {
                for j in 0..w {
                    let (a, b) = (xs[i] * nf * r, xs[j] * nf * r);
                    err = err.max((km.get(i, j) / r - sine_eval(SineKind::SineWall, a, b)).abs());
                }
            }
            // Positions are measured in node spacings 1/(ρ⁰N) with ρ⁰ = 1,
            // the kernel normalized by δ(0) = 1/θ.
            Ok((err, vec![("delta0", 1.0 / r), ("position_spacing", 1.0), ("window_nodes", w as f64)]))
        }
        Regime::GapVoid | Regime::GapSaturated => {
            let want = if regime == Regime::GapVoid { RegionKind::Void } else { RegionKind::Saturated };
            if inputs.outer_gap != want {
                return Err(invalid(format!("the family's outer gap is {:?}, not {want:?}", inputs.outer_gap)));
            }
            let mut err = 0.0f64;
            for (i, x) in xs.iter().enumerate() {
                if *x >= beta + 0.05 {
                    let d = km.get(i, i);
                    err = err.max(if want == RegionKind::Void { d.abs() } else { (1.0 - d).abs() });
                }
            }
            Ok((err.max(f64::MIN_POSITIVE), vec![("gap_lo", beta + 0.05)]))
        }
        Regime::Edge => {
            const M: f64 = 2.0;
            let scale = (nf * inputs.edge_rate).powf(2.0 / 3.0);
            let dxi = scale / nf;
            let (lo, hi) = (beta - M * nf.powf(-2.0 / 3.0), beta + M * nf.powf(-0.5));
            let idx: Vec<usize> = (0..len).filter(|&i| xs[i] > lo && xs[i] < hi).collect();
            let holes = inputs.outer_gap == RegionKind::Saturated;
            let mut err = 0.0f64;
            for &i in &idx {
                for &j in &idx {
                    // Holes: I − K, conjugated by (−1)^(i+j) as in the dual ensemble.
                    let kij = if holes { (f64::from(u8::from(i == j)) - km.get(i, j)) * if (i + j) % 2 == 0 { 1.0 } else { -1.0 } } else { km.get(i, j) };
                    let a = airy_kernel(scale * (xs[i] - beta), scale * (xs[j] - beta))?;
                    err = err.max((kij / dxi - a).abs());
                }
            }
            Ok((err, vec![("xi_scale", scale), ("window_m", M)]))
        }
        Regime::CrossTerm => unreachable!(),
    }
}

/// Builds the kernel for each N, rescales it per regime and fits the
/// log-log slope of the sup-errors. Band and wall pass with a slope in
/// [−1.4, −0.6], cross terms with a slope ≤ −0.6, gap regimes when every
/// N ≥ 200 (or the largest N) is within 1e-3, and the edge when the error
/// decreases.
pub fn convergence_suite(family: &HahnFamily, regime: Regime, n_list: &[usize], inputs: Option<&LimitInputs>) -> Result<ConvergenceReport> {
    let inputs = inputs.ok_or_else(|| Error::Dependency("convergence suite needs equilibrium inputs".into()))?;
    if n_list.len() < 3 || n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("N list must be increasing with at least three entries"));
    }
    let results: Vec<(f64, Vec<(&'static str, f64)>)> =
        n_list.par_iter().map(|&n| regime_error(family, inputs, regime, n)).collect::<Result<_>>()?;
    let errors: Vec<f64> = results.iter().map(|r| r.0).collect();
    let slope = loglog_slope(n_list, &errors);
    let pass = match regime {
        Regime::Band | Regime::Wall => (-1.4..=-0.6).contains(&slope),
        Regime::CrossTerm => slope <= -0.6,
        Regime::Edge => slope < 0.0,
        Regime::GapVoid | Regime::GapSaturated => {
            let big: Vec<f64> = n_list.iter().zip(&errors).filter(|(n, _)| **n >= 200).map(|p| *p.1).collect();
            let check = if big.is_empty() { vec![errors[errors.len() - 1]] } else { big };
            check.iter().all(|e| *e < 1e-3)
        }
    };
    let mut constants = BTreeMap::new();
    constants.insert("band_edge".into(), inputs.band_edge);
    constants.insert("edge_rate".into(), inputs.edge_rate);
    for (n, (_, cs)) in n_list.iter().zip(&results) {
        for (name, v) in cs {
            constants.insert(format!("{name}@N={n}"), *v);
        }
    }
    Ok(ConvergenceReport { family: family.id(), regime, n_values: n_list.to_vec(), errors, slope, pass, constants })
}

#[cfg(test)]
mod tests {
    use super::*;

    const AIRY_TABLE: [(f64, f64, f64); 61] = [
        (-15.0, 0.27821749087082893, 0.27237420430864202),
        (-14.5, -0.030597418939551423, -1.0953212728805392),
        (-14.0, -0.2659834827840778, 0.44302487700284364),
        (-13.5, 0.19098124329622029, 0.82643275142525424),
        (-13.0, 0.17151043937053704, -0.87151967787995337),
        (-12.5, -0.27627456138116025, -0.41933133041950516),
        (-12.0, -0.066555175054373129, 1.0231104533679707),
        (-11.5, 0.30542297004359266, 0.087724154321784443),
        (-11.0, -0.0087595892557023813, -1.0273278736645794),
        (-10.5, -0.3119260350510506, 0.090957487390681673),
        (-10.0, 0.040241238486443191, 0.99626504413279006),
        (-9.5, 0.3191032477191282, -0.10809531881187124),
        (-9.0, -0.022133721547341404, -0.97566398092633159),
        (-8.5, -0.33029023763020888, -0.032313348284639136),
        (-8.0, -0.052705050356386203, 0.93556093819830655),
        (-7.5, 0.32177571638064788, 0.3188095066985546),
        (-7.0, 0.18428083525050564, -0.77100816841012655),
        (-6.5, -0.2380203019971158, -0.67495249251320217),
        (-6.0, -0.32914517362982311, 0.34593548728134289),
        (-5.5, 0.017781541276574976, 0.86419721777139839),
        (-5.0, 0.35076100902411432, 0.32719281855444314),
        (-4.5, 0.29215278105595947, -0.5233625323157477),
        (-4.0, -0.070265532949289515, -0.79062857536858138),
        (-3.5, -0.37553382314043191, -0.34344343345404815),
        (-3.0, -0.37881429367765807, 0.31458376921659881),
        (-2.5, -0.11232506769296609, 0.67885273426479436),
        (-2.0, 0.22740742820168558, 0.61825902074169104),
        (-1.5, 0.46425657774886941, 0.30918696720241042),
        (-1.0, 0.53556088329235212, -0.010160567116645209),
        (-0.5, 0.47572809161053959, -0.20408167033954739),
        (0.0, 0.35502805388781724, -0.2588194037928068),
        (0.5, 0.23169360648083349, -0.22491053266468389),
        (1.0, 0.13529241631288142, -0.15914744129679321),
        (1.5, 0.07174949700810541, -0.097382012842301319),
        (2.0, 0.034924130423274379, -0.053090384433653632),
        (2.5, 0.01572592338047049, -0.02625088103590323),
        (3.0, 0.0065911393574607191, -0.011912976705951318),
        (3.5, 0.002584098786989635, -0.0050044139679525828),
        (4.0, 0.00095156385120480187, -0.0019586409502041789),
        (4.5, 0.00033025032351430898, -0.00071786656755750889),
        (5.0, 0.00010834442813607442, -0.00024741389086846248),
        (5.5, 3.3685311908599814e-5, -8.0463391305565143e-5),
        (6.0, 9.9476943602528896e-6, -2.4765200397034955e-5),
        (6.5, 2.7958823432049136e-6, -7.2319314666017926e-6),
        (7.0, 7.4921288639971671e-7, -2.008150894738792e-6),
        (7.5, 1.9172560675134308e-7, -5.3127139597205447e-7),
        (8.0, 4.6922076160992316e-8, -1.3414392979067866e-7),
        (8.5, 1.0997009755195507e-8, -3.2377254404476023e-8),
        (9.0, 2.4711684308724898e-9, -7.4806413896589464e-9),
        (9.5, 5.3302637046174916e-10, -1.6566394593740666e-9),
        (10.0, 1.1047532552898686e-10, -3.5206336767389236e-10),
        (10.5, 2.2022745192834016e-11, -7.1876967814515671e-11),
        (11.0, 4.2262758649603596e-12, -1.4111441246628517e-11),
        (11.5, 7.8142901839628543e-13, -2.6666799675045314e-12),
        (12.0, 1.3931846888753608e-13, -4.8547365549853085e-13),
        (12.5, 2.3968278260780499e-14, -8.5213465646738564e-14),
        (13.0, 3.9817760788333354e-15, -1.4432080573972626e-14),
        (13.5, 6.3916738767418667e-16, -2.3601425439243113e-15),
        (14.0, 9.9202054911923773e-17, -3.7293101100179007e-16),
        (14.5, 1.4895374549659272e-17, -5.6973882061857806e-17),
        (15.0, 2.1649625207379923e-18, -8.4205679540177728e-18),
    ];

    #[test]
    fn sine_values() {
        assert_eq!(sine_eval(SineKind::Sine, 0.3, 0.3), 1.0);
        assert!(sine_eval(SineKind::Sine, 1.0, 0.0).abs() < 1e-16);
        assert!(sine_eval(SineKind::SineWall, 1.0, 2.0).abs() < 1e-15);
        // Both sides of the series switch.
        for t in [0.999e-4, 1.001e-4] {
            let exact = 1.0 - (PI * t).powi(2) / 6.0;
            assert!((sine_eval(SineKind::Sine, t, 0.0) - exact).abs() < 1e-14);
        }
        for i in 0..40 {
            for j in 0..40 {
                let (x, y) = (0.173 * i as f64 - 3.0, 0.291 * j as f64 - 5.0);
                assert!(sine_eval(SineKind::SineWall, x, y).abs() <= 2.0);
                assert_eq!(sine_eval(SineKind::Sine, x, y), sine_eval(SineKind::Sine, y, x));
            }
        }
    }

    #[test]
    fn airy_against_table() {
        for &(x, ai, aip) in AIRY_TABLE.iter() {
            let (a, ap) = airy_eval(x).unwrap();
            assert!((a - ai).abs() < 1e-10, "Ai({x}) = {a} vs {ai}");
            assert!((ap - aip).abs() < 1e-10, "Ai'({x}) = {ap} vs {aip}");
        }
        let g23 = 1.354_117_939_426_400_4_f64;
        assert!((airy_eval(0.0).unwrap().0 - 3f64.powf(-2.0 / 3.0) / g23).abs() < 1e-15);
        assert!(matches!(airy_eval(100.5), Err(Error::Range(_))));
    }

    #[test]
    fn airy_satisfies_its_equation() {
        let mut rng = crate::rng::SplitMix64::new(7);
        for _ in 0..100 {
            let x = -10.0 + 20.0 * rng.uniform();
            let h = 1e-3;
            let d = |t: f64| airy_eval(t).unwrap().1;
            let second = (d(x - 2.0 * h) - 8.0 * d(x - h) + 8.0 * d(x + h) - d(x + 2.0 * h)) / (12.0 * h);
            assert!((second - x * airy_eval(x).unwrap().0).abs() < 1e-8, "x = {x}");
        }
    }

    #[test]
    fn airy_decreasing_on_positive_axis() {
        let vals: Vec<f64> = (0..=20).map(|i| airy_eval(0.5 * i as f64).unwrap().0).collect();
        assert!(vals.iter().all(|v| *v > 0.0));
        assert!(vals.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn airy_kernel_properties() {
        assert_eq!(airy_kernel(0.4, -1.3).unwrap(), airy_kernel(-1.3, 0.4).unwrap());
        assert!((airy_kernel(0.0, 0.0).unwrap() - AIP0 * AIP0).abs() < 1e-15);
        for x in [-3.0, 0.0, 1.7] {
            let off = airy_kernel(x, x + 1e-6).unwrap();
            assert!((off - airy_kernel(x, x).unwrap()).abs() < 1e-6);
        }
        for i in 0..50 {
            let x = -10.0 + 0.2 * i as f64;
            assert!(airy_kernel(x, x).unwrap() > 0.0);
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(12);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        let i22: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(22)).sum();
        assert!((i22 - 2.0 / 23.0).abs() < 1e-14);
    }

    #[test]
    fn tracy_widom_values() {
        let f0 = tracy_widom_cdf(0.0, 40).unwrap();
        let f0b = tracy_widom_cdf(0.0, 80).unwrap();
        assert!((f0.value - f0b.value).abs() < 1e-8);
        assert!((f0b.value - 0.969_372_828_355_265).abs() < 1e-10);
        assert!(f0b.warning.is_none());
        assert!((tracy_widom_cdf(-2.0, 60).unwrap().value - 0.413_224_142_505_13).abs() < 1e-10);
        assert!((tracy_widom_cdf(8.0, 40).unwrap().value - 1.0).abs() < 1e-10);
        let sweep: Vec<f64> = [-6.0, -4.0, -2.0, 0.0, 2.0].iter().map(|s| tracy_widom_cdf(*s, 60).unwrap().value).collect();
        assert!(sweep.windows(2).all(|w| w[1] > w[0]));
        assert!(tracy_widom_cdf(-10.5, 40).is_err());
        assert!(tracy_widom_cdf(0.0, 5).is_err());
        assert!(tracy_widom_cdf(-8.0, 10).unwrap().warning.is_some());
    }

    #[test]
    fn wall_cdf_values() {
        assert_eq!(wall_cdf(0.3, 2.0, 1.0).unwrap(), 1.0);
        let want = 1.0 - (0.5 - 1.0 / PI);
        assert!((wall_cdf(1.0, 2.0, 1.0).unwrap() - want).abs() < 1e-15);
        assert!((want - 0.818_31).abs() < 1e-5);
        let two = wall_matrix(2, 0.5);
        let det2 = (1.0 - two[(0, 0)]) * (1.0 - two[(1, 1)]) - two[(0, 1)] * two[(1, 0)];
        assert!((wall_cdf(2.2, 2.0, 1.0).unwrap() - det2).abs() < 1e-15);
        let vals: Vec<f64> = (0..40).map(|i| wall_cdf(0.25 * i as f64, 1.5, 1.0).unwrap()).collect();
        assert!(vals.windows(2).all(|w| w[1] <= w[0] + 1e-15));
        assert!(wall_cdf(1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn limit_spec_dispatch() {
        let d = LimitKernelSpec::DiscreteSineWall { delta0: 2.0, rho0: 1.0 };
        assert!((d.eval(0.0, 0.0).unwrap() - (0.5 - 1.0 / PI)).abs() < 1e-15);
        assert!(d.eval(0.5, 0.0).is_err());
        assert!(LimitKernelSpec::DiscreteSineWall { delta0: -1.0, rho0: 1.0 }.eval(0.0, 0.0).is_err());
        assert_eq!(LimitKernelSpec::Sine.eval(2.0, 2.0).unwrap(), 1.0);
    }

    #[test]
    fn suite_needs_inputs() {
        let f = HahnFamily { a: 1.0, c: 0.5 };
        assert!(matches!(convergence_suite(&f, Regime::Band, &[10, 20, 40], None), Err(Error::Dependency(_))));
        let inputs = LimitInputs::hahn(1.0, 0.5);
        assert!(convergence_suite(&f, Regime::Band, &[10, 20], Some(&inputs)).is_err());
    }

    #[test]
    fn band_coincident_points_tend_to_one() {
        let f = HahnFamily { a: 1.0, c: 0.5 };
        let inputs = LimitInputs::hahn(1.0, 0.5);
        let e = f.ensemble(200).unwrap();
        let km = sym_kernel(&e).unwrap();
        let x0 = 0.25;
        let i = km.nodes().index_of(0.25 + 1.0 / 800.0).unwrap();
        let r = (inputs.occupation)(x0);
        assert!((km.get(i, i) / r - 1.0).abs() < 0.02);
    }
}
