//! Discrete orthonormal polynomials and the kernels built from them.
//!
//! The Stieltjes procedure is run in vector form: φ_n(x) = √w(x)·p_n(x) is
//! the n-th Lanczos vector of diag(x) started from √w/‖√w‖, so the
//! recurrence coefficients and the function values at the nodes come out of
//! the same sweep. Every new vector is re-orthogonalized twice against all
//! earlier ones, which keeps saturated-region values accurate where the bare
//! three-term recurrence loses every digit. If the sweep breaks down (a tiny
//! off-diagonal, typically from weights spanning more than f64 can hold) the
//! whole table is rebuilt at 256 bits.

use std::sync::Arc;

use nalgebra::DMatrix;
use rug::Float;
use serde::{Deserialize, Serialize};

use crate::ensembles::{Ensemble, Mode, NodeSet};
use crate::error::{invalid, Error, Result};

const HIGH_BITS: u32 = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Precision {
    /// 53 bits, escalating to 256 bits on breakdown.
    #[default]
    Auto,
    Double,
    High,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecurrenceTable {
    /// α_n, n = 0..=degree_max.
    pub alpha: Vec<f64>,
    /// β_0 = total mass (may be +inf when it exceeds f64), β_n = b_n².
    pub beta: Vec<f64>,
    /// b_n = √β_n for n ≥ 1; b[0] is unused and zero.
    pub b: Vec<f64>,
    pub log_mass: f64,
    pub degree_max: usize,
    pub precision_bits: u32,
    /// φ_n at every node, n = 0..=degree_max.
    pub phi: Vec<Vec<f64>>,
    nodes: Vec<f64>,
    logw: Vec<f64>,
}

impl RecurrenceTable {
    /// log γ_n with γ_n = (β_0···β_n)^{-1/2}.
    pub fn log_gamma(&self, n: usize) -> f64 {
        let s: f64 = self.b[1..=n].iter().map(|b| b.ln()).sum();
        -0.5 * self.log_mass - s
    }

    pub fn gamma(&self, n: usize) -> f64 {
        self.log_gamma(n).exp()
    }

    pub fn len_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// max_{m,n ≤ d} |Σ_x φ_mφ_n − δ_mn|.
    pub fn orthonormality_residual(&self, d: usize) -> f64 {
        let mut worst: f64 = 0.0;
        for m in 0..=d {
            for n in m..=d {
                let s: f64 = self.phi[m].iter().zip(&self.phi[n]).map(|(a, b)| a * b).sum();
                let target = if m == n { 1.0 } else { 0.0 };
                worst = worst.max((s - target).abs());
            }
        }
        worst
    }

    /// φ_n at node `idx` by the forward three-term recurrence, with the
    /// running pair rescaled whenever it grows past 1e100.
    pub fn forward_phi(&self, n: usize, idx: usize) -> Result<f64> {
        if n > self.degree_max {
            return Err(invalid(format!("degree {n} beyond table degree {}", self.degree_max)));
        }
        let x = self.nodes[idx];
        let (mut prev, mut cur) = (0.0f64, 1.0f64);
        let mut log_scale = 0.0f64;
        for j in 0..n {
            let next = ((x - self.alpha[j]) * cur - self.b[j] * prev) / self.b[j + 1];
            prev = cur;
            cur = next;
            if cur.abs() > 1e100 {
                prev *= 1e-100;
                cur *= 1e-100;
                log_scale += 100.0 * std::f64::consts::LN_10;
            }
        }
        let log_front = 0.5 * self.logw[idx] - 0.5 * self.log_mass + log_scale;
        if log_front > 700.0 {
            return Err(Error::PrecisionEscalation { degree: n, bits: 53 });
        }
        Ok(log_front.exp() * cur)
    }

    /// ψ_n = √w·p_n′ at every node for n = 0..=d, seeded by the stored φ.
    /// The bare recurrence; see `confluent_diagonal` for the accurate
    /// diagonal where the weight saturates.
    pub fn derivative_values(&self, d: usize) -> Vec<Vec<f64>> {
        let npts = self.nodes.len();
        let mut psi = vec![vec![0.0; npts]; d + 1];
        for n in 0..d {
            for i in 0..npts {
                let x = self.nodes[i];
                let back = if n == 0 { 0.0 } else { self.b[n] * psi[n - 1][i] };
                psi[n + 1][i] = (self.phi[n][i] + (x - self.alpha[n]) * psi[n][i] - back) / self.b[n + 1];
            }
        }
        psi
    }
}

struct Sweep {
    alpha: Vec<f64>,
    b: Vec<f64>,
    phi: Vec<Vec<f64>>,
}

fn spread(xs: &[f64]) -> f64 {
    let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (hi - lo).max(hi.abs()).max(lo.abs()).max(f64::MIN_POSITIVE)
}

fn breakdown_tol(xs: &[f64]) -> f64 {
    1e-10 * spread(xs)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sweep_double(xs: &[f64], logw: &[f64], degree: usize) -> std::result::Result<Sweep, usize> {
    let top = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let start: Vec<f64> = logw.iter().map(|l| (0.5 * (l - top)).exp()).collect();
    // Nodes whose √w is below 1e-290 of the largest cannot be represented
    // alongside it; leave those to the high-precision sweep.
    if start.iter().any(|s| *s < 1e-290) {
        return Err(0);
    }
    let norm = dot(&start, &start).sqrt();
    let mut phi = vec![start.iter().map(|s| s / norm).collect::<Vec<f64>>()];
    let mut alpha = Vec::with_capacity(degree + 1);
    let mut b = vec![0.0];
    let tol = breakdown_tol(xs);
    for n in 0..=degree {
        let q = &phi[n];
        let mut r: Vec<f64> = xs.iter().zip(q).map(|(x, v)| x * v).collect();
        let a = dot(q, &r);
        alpha.push(a);
        if n == degree {
            break;
        }
        for (ri, qi) in r.iter_mut().zip(q) {
            *ri -= a * qi;
        }
        if n > 0 {
            let bn = b[n];
            for (ri, pi) in r.iter_mut().zip(&phi[n - 1]) {
                *ri -= bn * pi;
            }
        }
        for _ in 0..2 {
            for prev in &phi {
                let c = dot(prev, &r);
                for (ri, pi) in r.iter_mut().zip(prev) {
                    *ri -= c * pi;
                }
            }
        }
        let bn1 = dot(&r, &r).sqrt();
        if !(bn1 > tol) {
            return Err(n + 1);
        }
        b.push(bn1);
        phi.push(r.iter().map(|v| v / bn1).collect());
    }
    Ok(Sweep { alpha, b, phi })
}

struct HighSweep {
    alpha: Vec<Float>,
    b: Vec<Float>,
    phi: Vec<Vec<Float>>,
}

fn sweep_high(xs: &[f64], logw: &[f64], degree: usize) -> std::result::Result<Sweep, usize> {
    let h = sweep_high_raw(xs, logw, degree)?;
    Ok(Sweep {
        alpha: h.alpha.iter().map(|a| a.to_f64()).collect(),
        b: h.b.iter().map(|v| v.to_f64()).collect(),
        phi: h.phi.iter().map(|row| row.iter().map(|v| v.to_f64()).collect()).collect(),
    })
}

fn sweep_high_raw(xs: &[f64], logw: &[f64], degree: usize) -> std::result::Result<HighSweep, usize> {
    let prec = HIGH_BITS;
    let top = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let fl = |v: f64| Float::with_val(prec, v);
    let xsf: Vec<Float> = xs.iter().map(|&x| fl(x)).collect();
    let start: Vec<Float> = logw.iter().map(|l| (fl(l - top) / 2u32).exp()).collect();
    let hdot = |a: &[Float], b: &[Float]| -> Float {
        let mut s = fl(0.0);
        for (x, y) in a.iter().zip(b) {
            s += Float::with_val(prec, x * y);
        }
        s
    };
    let norm = hdot(&start, &start).sqrt();
    let mut phi: Vec<Vec<Float>> = vec![start.iter().map(|s| Float::with_val(prec, s / &norm)).collect()];
    let mut alpha = Vec::with_capacity(degree + 1);
    let mut b: Vec<Float> = vec![fl(0.0)];
    let tol = fl(1e-60 * spread(xs));
    for n in 0..=degree {
        let mut r: Vec<Float> = xsf.iter().zip(&phi[n]).map(|(x, v)| Float::with_val(prec, x * v)).collect();
        let a = hdot(&phi[n], &r);
        if n == degree {
            alpha.push(a);
            break;
        }
        for (ri, qi) in r.iter_mut().zip(&phi[n]) {
            *ri -= Float::with_val(prec, &a * qi);
        }
        alpha.push(a);
        if n > 0 {
            for (ri, pi) in r.iter_mut().zip(&phi[n - 1]) {
                *ri -= Float::with_val(prec, &b[n] * pi);
            }
        }
        for _ in 0..2 {
            for prev in &phi {
                let c = hdot(prev, &r);
                for (ri, pi) in r.iter_mut().zip(prev) {
                    *ri -= Float::with_val(prec, &c * pi);
                }
            }
        }
        let bn1 = hdot(&r, &r).sqrt();
        if bn1 <= tol {
            return Err(n + 1);
        }
        phi.push(r.iter().map(|v| Float::with_val(prec, v / &bn1)).collect());
        b.push(bn1);
    }
    Ok(HighSweep { alpha, b, phi })
}

/// K_k(x, x) at every node from the derivative form
/// b_k(ψ_kφ_{k−1} − ψ_{k−1}φ_k), ψ_n = √w·p_n′, evaluated at 256 bits.
/// In double precision the derivative recurrence amplifies rounding by
/// orders of magnitude once part of the weight is saturated.
pub fn confluent_diagonal(nodes: &[f64], logw: &[f64], k: usize) -> Result<Vec<f64>> {
    if k == 0 || k >= nodes.len() {
        return Err(invalid("the derivative form needs 1 ≤ k < N"));
    }
    let h = sweep_high_raw(nodes, logw, k).map_err(|d| Error::PrecisionEscalation { degree: d, bits: HIGH_BITS })?;
    let zero = Float::with_val(HIGH_BITS, 0.0);
    let mut out = Vec::with_capacity(nodes.len());
    for (i, &x) in nodes.iter().enumerate() {
        let x = Float::with_val(HIGH_BITS, x);
        let (mut prev, mut cur) = (zero.clone(), zero.clone());
        for n in 0..k {
            let mut next = Float::with_val(HIGH_BITS, &x - &h.alpha[n]) * &cur;
            next += &h.phi[n][i];
            if n > 0 {
                next -= Float::with_val(HIGH_BITS, &h.b[n] * &prev);
            }
            next /= &h.b[n + 1];
            prev = cur;
            cur = next;
        }
        let mut v = Float::with_val(HIGH_BITS, &cur * &h.phi[k - 1][i]);
        v -= Float::with_val(HIGH_BITS, &prev * &h.phi[k][i]);
        v *= &h.b[k];
        out.push(v.to_f64());
    }
    Ok(out)
}

fn log_mass(logw: &[f64]) -> f64 {
    let top = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    // Compensated sum so that the mass of wide tables keeps full precision.
    let mut s = 0.0f64;
    let mut c = 0.0f64;
    for l in logw {
        let v = (l - top).exp();
        let t = s + v;
        c += if s.abs() >= v.abs() { (s - t) + v } else { (v - t) + s };
        s = t;
    }
    top + (s + c).ln()
}

/// Recurrence table for the measure Σ w(x)δ_x on arbitrary nodes.
pub fn recurrence_from_table(nodes: &[f64], logw: &[f64], max_degree: usize, precision: Precision) -> Result<RecurrenceTable> {
    if max_degree >= nodes.len() {
        return Err(invalid(format!("degree {max_degree} needs more than {} nodes", nodes.len())));
    }
    let (sweep, bits) = match precision {
        Precision::Double => (
            sweep_double(nodes, logw, max_degree).map_err(|d| Error::PrecisionEscalation { degree: d, bits: 53 })?,
            53,
        ),
        Precision::High => (
            sweep_high(nodes, logw, max_degree).map_err(|d| Error::PrecisionEscalation { degree: d, bits: HIGH_BITS })?,
            HIGH_BITS,
        ),
        Precision::Auto => match sweep_double(nodes, logw, max_degree) {
            Ok(s) => (s, 53),
            Err(_) => (
                sweep_high(nodes, logw, max_degree)
                    .map_err(|d| Error::PrecisionEscalation { degree: d, bits: HIGH_BITS })?,
                HIGH_BITS,
            ),
        },
    };
    let lm = log_mass(logw);
    let mut beta: Vec<f64> = sweep.b.iter().map(|b| b * b).collect();
    beta[0] = lm.exp();
    let table = RecurrenceTable {
        alpha: sweep.alpha,
        beta,
        b: sweep.b,
        log_mass: lm,
        degree_max: max_degree,
        precision_bits: bits,
        phi: sweep.phi,
        nodes: nodes.to_vec(),
        logw: logw.to_vec(),
    };
    if bits == 53 && precision == Precision::Auto && table.orthonormality_residual_fast() > 1e-10 {
        return recurrence_from_table(nodes, logw, max_degree, Precision::High);
    }
    Ok(table)
}

impl RecurrenceTable {
    /// Residual of the top vector against all others, the cheap sentinel
    /// used to decide on escalation.
    fn orthonormality_residual_fast(&self) -> f64 {
        let d = self.degree_max;
        let top = &self.phi[d];
        let mut worst = (dot(top, top) - 1.0).abs();
        for m in 0..d {
            worst = worst.max(dot(&self.phi[m], top).abs());
        }
        worst
    }
}

/// Recurrence for the ensemble's measure on all of its nodes.
pub fn compute_recurrence(e: &Ensemble, max_degree: usize) -> Result<RecurrenceTable> {
    recurrence_from_table(e.nodes().values(), e.weight().logw(), max_degree, Precision::Auto)
}

/// φ_n at node x, read from the table.
pub fn orthonormal_eval(rt: &RecurrenceTable, e: &Ensemble, n: usize, x: f64) -> Result<f64> {
    if n > rt.degree_max {
        return Err(invalid(format!("degree {n} beyond table degree {}", rt.degree_max)));
    }
    Ok(rt.phi[n][e.nodes().index_of(x)?])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelKind {
    Standard,
    WallSymmetric,
    Hole,
}

#[derive(Debug, Clone)]
pub struct KernelMatrix {
    nodes: Arc<NodeSet>,
    entries: DMatrix<f64>,
    rank: usize,
    kind: KernelKind,
    precision_bits: u32,
}

impl KernelMatrix {
    /// Wraps a user-supplied matrix; symmetry is enforced by mirroring the
    /// upper triangle.
    pub fn from_matrix(nodes: Arc<NodeSet>, mut entries: DMatrix<f64>, kind: KernelKind) -> Result<Self> {
        let n = nodes.len();
        if entries.nrows() != n || entries.ncols() != n {
            return Err(invalid("matrix size does not match the node set"));
        }
        mirror_upper(&mut entries);
        let rank = entries.trace().round().max(0.0) as usize;
        Ok(Self { nodes, entries, rank, kind, precision_bits: 53 })
    }

    pub fn nodes(&self) -> &NodeSet {
        &self.nodes
    }

    pub fn nodes_arc(&self) -> Arc<NodeSet> {
        Arc::clone(&self.nodes)
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn precision_bits(&self) -> u32 {
        self.precision_bits
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.entries[(i, i)]).collect()
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace()
    }

    /// ‖K·K − K‖_max.
    pub fn projection_residual(&self) -> f64 {
        let sq = &self.entries * &self.entries;
        (sq - &self.entries).amax()
    }
}

fn mirror_upper(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            m[(i, j)] = m[(j, i)];
        }
    }
}

/// Σ_{n<k} φ_n(x)φ_n(y), with exact symmetry.
fn gram(phi: &[Vec<f64>], k: usize, npts: usize) -> DMatrix<f64> {
    let q = DMatrix::from_fn(k, npts, |r, c| phi[r][c]);
    let mut m = q.transpose() * q;
    mirror_upper(&mut m);
    m
}

/// Christoffel–Darboux kernel of a standard ensemble with k particles.
pub fn cd_kernel(e: &Ensemble, k: usize) -> Result<KernelMatrix> {
    let n = e.nodes().len();
    if k > n {
        return Err(invalid(format!("k = {k} outside 0..={n}")));
    }
    if k == 0 {
        return Ok(KernelMatrix {
            nodes: e.nodes_arc(),
            entries: DMatrix::zeros(n, n),
            rank: 0,
            kind: KernelKind::Standard,
            precision_bits: 53,
        });
    }
    let rt = compute_recurrence(e, k.min(n - 1))?;
    Ok(KernelMatrix {
        nodes: e.nodes_arc(),
        entries: gram(&rt.phi, k, n),
        rank: k,
        kind: KernelKind::Standard,
        precision_bits: rt.precision_bits,
    })
}

/// Largest off-diagonal gap between the sum form and the quotient form
/// b_k(φ_k(x)φ_{k−1}(y) − φ_{k−1}(x)φ_k(y))/(x − y).
pub fn quotient_discrepancy(e: &Ensemble, km: &KernelMatrix) -> Result<f64> {
    let k = km.rank();
    let n = e.nodes().len();
    if k == 0 || k >= n {
        return Err(invalid("quotient forms need 1 ≤ k < N"));
    }
    let rt = compute_recurrence(e, k)?;
    let xs = e.nodes().values();
    let (pk, pk1) = (&rt.phi[k], &rt.phi[k - 1]);
    let bk = rt.b[k];
    let mut off: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let quot = bk * (pk[i] * pk1[j] - pk1[i] * pk[j]) / (xs[i] - xs[j]);
                off = off.max((quot - km.get(i, j)).abs());
            }
        }
    }
    Ok(off)
}

/// The off-diagonal quotient gap and the largest diagonal gap against the
/// derivative form.
pub fn cd_form_discrepancy(e: &Ensemble, km: &KernelMatrix) -> Result<(f64, f64)> {
    let off = quotient_discrepancy(e, km)?;
    let conf = confluent_diagonal(e.nodes().values(), e.weight().logw(), km.rank())?;
    let diag = conf.iter().enumerate().map(|(i, v)| (v - km.get(i, i)).abs()).fold(0.0, f64::max);
    Ok((off, diag))
}

/// Christoffel–Darboux kernel with the quotient-form self-check enabled.
pub fn cd_kernel_checked(e: &Ensemble, k: usize) -> Result<KernelMatrix> {
    let km = cd_kernel(e, k)?;
    if k > 0 && k < e.nodes().len() {
        let off = quotient_discrepancy(e, &km)?;
        if off > 1e-8 {
            return Err(Error::Accuracy(format!("Christoffel–Darboux quotient form off by {off:e}")));
        }
    }
    Ok(km)
}

fn require_wall(e: &Ensemble) -> Result<()> {
    if e.mode() != Mode::WallSymmetric {
        return Err(invalid("ensemble is not wall-symmetric"));
    }
    if !e.nodes().is_symmetric() || !e.weight().is_even() {
        return Err(invalid("wall-symmetric kernel needs symmetric nodes and an even weight"));
    }
    Ok(())
}

/// K^sym(x, y) = K_{2N,2k}(x, y) − K_{2N,2k}(x, −y) on the positive nodes.
pub fn sym_kernel(e: &Ensemble) -> Result<KernelMatrix> {
    require_wall(e)?;
    let n = e.n();
    let k = e.k();
    let half = Arc::new(e.nodes().positive_half()?);
    if k == 0 {
        return Ok(KernelMatrix { nodes: half, entries: DMatrix::zeros(n, n), rank: 0, kind: KernelKind::WallSymmetric, precision_bits: 53 });
    }
    let full = cd_kernel(&e.full()?, 2 * k)?;
    let mut m = DMatrix::from_fn(n, n, |i, j| full.get(n + i, n + j) - full.get(n + i, n - 1 - j));
    mirror_upper(&mut m);
    Ok(KernelMatrix { nodes: half, entries: m, rank: k, kind: KernelKind::WallSymmetric, precision_bits: full.precision_bits })
}

/// K^sym built from the half ensemble in u = y² with weight y²w(y), i.e.
/// from the polynomials q_j with π_{2j+1}(x) = x·q_j(x²).
pub fn sym_kernel_direct(e: &Ensemble) -> Result<KernelMatrix> {
    require_wall(e)?;
    let half = Arc::new(e.nodes().positive_half()?);
    let sq = e.squared_half()?;
    let inner = cd_kernel(&sq, e.k())?;
    Ok(KernelMatrix { nodes: half, entries: inner.entries, rank: e.k(), kind: KernelKind::WallSymmetric, precision_bits: inner.precision_bits })
}

/// I − K.
pub fn hole_kernel(km: &KernelMatrix) -> KernelMatrix {
    let n = km.len();
    let mut m = DMatrix::identity(n, n) - &km.entries;
    mirror_upper(&mut m);
    KernelMatrix { nodes: km.nodes_arc(), entries: m, rank: n - km.rank.min(n), kind: KernelKind::Hole, precision_bits: km.precision_bits }
}

/// The monic polynomials q_j in the squared variable.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OddSplit {
    /// q_{j+1}(u) = (u − shift[j]) q_j(u) − coupling[j] q_{j−1}(u).
    pub shift: Vec<f64>,
    pub coupling: Vec<f64>,
    /// log of Σ_Y x²w q_j(x²)², which equals 1/(2γ²_{2j+1}).
    pub log_norms: Vec<f64>,
    /// max |α_n| relative to the node spread: the even-degree coefficient
    /// of π_{2j+1} and odd-degree coefficients of π_{2j} are generated only
    /// through α, so this bounds every parity residual.
    pub coefficient_residual: f64,
    /// max over nodes and degrees of |φ_n(−x) − (−1)^n φ_n(x)|.
    pub value_residual: f64,
}

impl OddSplit {
    pub fn eval(&self, j: usize, u: f64) -> f64 {
        let (mut prev, mut cur) = (0.0, 1.0);
        for i in 0..j {
            let next = (u - self.shift[i]) * cur - self.coupling[i] * prev;
            prev = cur;
            cur = next;
        }
        cur
    }
}

pub fn split_odd(rt: &RecurrenceTable, e: &Ensemble) -> Result<OddSplit> {
    if !e.nodes().is_symmetric() || !e.weight().is_even() {
        return Err(invalid("split needs symmetric nodes and an even weight"));
    }
    let d = rt.degree_max;
    let scale = spread(e.nodes().values());
    let coefficient_residual = rt.alpha.iter().map(|a| a.abs()).fold(0.0, f64::max) / scale;
    let npts = e.nodes().len();
    let mut value_residual: f64 = 0.0;
    for (n, row) in rt.phi.iter().enumerate() {
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        let big = row.iter().map(|v| v.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        for i in 0..npts / 2 {
            value_residual = value_residual.max((row[npts - 1 - i] - sign * row[i]).abs() / big);
        }
    }
    let worst = coefficient_residual.max(value_residual);
    if worst > 1e-10 {
        return Err(Error::SymmetryViolation(worst));
    }
    if d == 0 {
        return Ok(OddSplit { shift: vec![], coupling: vec![], log_norms: vec![], coefficient_residual, value_residual });
    }
    let jmax = (d - 1) / 2;
    let shift = (0..jmax).map(|j| rt.beta[2 * j + 1] + rt.beta[2 * j + 2]).collect();
    let coupling = (0..jmax).map(|j| if j == 0 { 0.0 } else { rt.beta[2 * j] * rt.beta[2 * j + 1] }).collect();
    let log_norms = (0..=jmax).map(|j| -std::f64::consts::LN_2 - 2.0 * rt.log_gamma(2 * j + 1)).collect();
    Ok(OddSplit { shift, coupling, log_norms, coefficient_residual, value_residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::WeightSpec;

    fn uniform(values: &[f64], k: usize) -> Ensemble {
        let s = NodeSet::new(values.to_vec(), (values[0], values[values.len() - 1]), None).unwrap();
        let w = WeightSpec::uniform(&s).unwrap();
        Ensemble::standard(s, w, k).unwrap()
    }

    fn wall_uniform(half: &[f64], k: usize) -> Ensemble {
        let mut v: Vec<f64> = half.iter().rev().map(|x| -x).collect();
        v.extend_from_slice(half);
        let top = v[v.len() - 1];
        let s = NodeSet::new(v, (-top, top), None).unwrap();
        let w = WeightSpec::uniform(&s).unwrap();
        Ensemble::wall_symmetric(s, w, k).unwrap()
    }

    fn hahn_wall(n_half: usize, a: f64, k: usize) -> Ensemble {
        let s = NodeSet::equispaced(2 * n_half).unwrap();
        let p = a * (2 * n_half) as f64 + 1.0;
        let w = WeightSpec::hahn(&s, p, p).unwrap();
        Ensemble::wall_symmetric(s, w, k).unwrap()
    }

    #[test]
    fn uniform_four_point_recurrence() {
        let e = uniform(&[0.0, 1.0, 2.0, 3.0], 2);
        let rt = compute_recurrence(&e, 2).unwrap();
        assert!((rt.alpha[0] - 1.5).abs() < 1e-15);
        assert!((rt.beta[0] - 4.0).abs() < 1e-14);
        assert!((rt.gamma(0) - 0.5).abs() < 1e-15);
        assert!((rt.gamma(1) - 1.0 / 5f64.sqrt()).abs() < 1e-15);
        assert_eq!(rt.precision_bits, 53);
        for &x in e.nodes().values() {
            assert!((orthonormal_eval(&rt, &e, 0, x).unwrap() - 0.5).abs() < 1e-15);
        }
        let v = orthonormal_eval(&rt, &e, 1, 0.0).unwrap();
        assert!((v + 1.5 / 5f64.sqrt()).abs() < 1e-15);
        assert!(compute_recurrence(&e, 4).is_err());
    }

    #[test]
    fn single_node() {
        let s = NodeSet::new(vec![0.3], (0.0, 1.0), None).unwrap();
        let w = WeightSpec::custom(&s, vec![(7.0f64).ln()]).unwrap();
        let e = Ensemble::standard(s, w, 1).unwrap();
        let rt = compute_recurrence(&e, 0).unwrap();
        assert!((rt.gamma(0) - 7f64.powf(-0.5)).abs() < 1e-15);
    }

    #[test]
    fn uniform_four_point_kernel() {
        let e = uniform(&[0.0, 1.0, 2.0, 3.0], 2);
        let k1 = cd_kernel(&e, 1).unwrap();
        assert!(k1.entries().iter().all(|v| (v - 0.25).abs() < 1e-15));
        let k2 = cd_kernel(&e, 2).unwrap();
        assert!((k2.get(0, 0) - 0.7).abs() < 1e-14);
        let k4 = cd_kernel(&e, 4).unwrap();
        assert!((k4.entries() - DMatrix::<f64>::identity(4, 4)).amax() < 1e-14);
        let h = hole_kernel(&k2);
        assert!((h.get(0, 0) - 0.3).abs() < 1e-14);
        assert!((h.trace() - 2.0).abs() < 1e-14);
        assert!(hole_kernel(&k4).entries().amax() < 1e-14);
    }

    #[test]
    fn wall_uniform_kernel() {
        let e = wall_uniform(&[1.0, 2.0], 1);
        let km = sym_kernel(&e).unwrap();
        assert!((km.get(0, 0) - 0.2).abs() < 1e-14);
        assert!((km.get(1, 1) - 0.8).abs() < 1e-14);
        assert!((km.trace() - 1.0).abs() < 1e-14);
        let direct = sym_kernel_direct(&e).unwrap();
        assert!((direct.entries() - km.entries()).amax() < 1e-14);
    }

    #[test]
    fn split_uniform() {
        let e = wall_uniform(&[1.0, 2.0], 1);
        let rt = compute_recurrence(&e, 3).unwrap();
        let s = split_odd(&rt, &e).unwrap();
        assert!((s.log_norms[0] - 5f64.ln()).abs() < 1e-14);
        assert!(s.coefficient_residual < 1e-14);
    }

    #[test]
    fn split_hahn_orthogonality() {
        let e = hahn_wall(10, 0.1, 3);
        let rt = compute_recurrence(&e, 19).unwrap();
        let s = split_odd(&rt, &e).unwrap();
        let ys = &e.nodes().values()[10..];
        let lw = &e.weight().logw()[10..];
        let jn = s.log_norms.len();
        for i in 0..jn {
            for j in 0..jn {
                let mut acc = 0.0;
                for (y, l) in ys.iter().zip(lw) {
                    acc += y * y * (l - rt.log_mass).exp() * s.eval(i, y * y) * s.eval(j, y * y);
                }
                let lm = rt.log_mass;
                let want = if i == j { (s.log_norms[i] - lm).exp() } else { 0.0 };
                let scale = (0.5 * (s.log_norms[i] + s.log_norms[j]) - lm).exp();
                assert!((acc - want).abs() <= 1e-9 * scale, "{i} {j} {acc} {want}");
            }
        }
    }

    #[test]
    fn odd_weight_rejected() {
        let s = NodeSet::equispaced(6).unwrap();
        let w = WeightSpec::hahn(&s, 2.0, 5.0).unwrap();
        let e = Ensemble::standard(s, w, 2).unwrap();
        let rt = compute_recurrence(&e, 3).unwrap();
        assert!(split_odd(&rt, &e).is_err());
        let bad = Ensemble::standard(e.nodes().clone(), e.weight().clone(), 1).unwrap();
        assert!(sym_kernel(&bad).is_err());
    }

    #[test]
    fn saturated_hahn_stays_orthonormal() {
        // 400 nodes, degree 280: the bare three-term recurrence is off by
        // ~1e-2 here; the stored vectors are not.
        let s = NodeSet::equispaced(400).unwrap();
        let w = WeightSpec::hahn(&s, 401.0, 401.0).unwrap();
        let e = Ensemble::standard(s, w, 280).unwrap();
        let rt = compute_recurrence(&e, 280).unwrap();
        assert_eq!(rt.precision_bits, 53);
        assert!(rt.orthonormality_residual(280) < 1e-12);
    }

    #[test]
    fn forward_recurrence_agrees_where_stable() {
        let s = NodeSet::equispaced(30).unwrap();
        let w = WeightSpec::hahn(&s, 4.0, 4.0).unwrap();
        let e = Ensemble::standard(s, w, 8).unwrap();
        let rt = compute_recurrence(&e, 8).unwrap();
        for n in 0..=8 {
            for i in 0..30 {
                assert!((rt.forward_phi(n, i).unwrap() - rt.phi[n][i]).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn cd_forms_agree() {
        for (n, k) in [(20usize, 7usize), (60, 30), (100, 45)] {
            let s = NodeSet::equispaced(n).unwrap();
            let w = WeightSpec::hahn(&s, 0.5 * n as f64 + 1.0, 0.5 * n as f64 + 1.0).unwrap();
            let e = Ensemble::standard(s, w, k).unwrap();
            let km = cd_kernel_checked(&e, k).unwrap();
            let (off, diag) = cd_form_discrepancy(&e, &km).unwrap();
            assert!(off < 1e-8 && diag < 1e-8, "{n} {k}: {off:e} {diag:e}");
        }
    }

    #[test]
    fn escalation_reproduces_log_space_enumeration() {
        // Cliffs of e^{-50} in √w between tiers: the double sweep breaks
        // down, the 256-bit rebuild resolves them.
        let values: Vec<f64> = (0..6).map(|i| i as f64).collect();
        let s = NodeSet::new(values, (0.0, 5.0), None).unwrap();
        let logw = vec![0.0, 0.0, -100.0, -100.0, -200.0, -200.0];
        let w = WeightSpec::custom(&s, logw).unwrap();
        let e = Ensemble::standard(s, w, 3).unwrap();
        let rt = compute_recurrence(&e, 3).unwrap();
        assert_eq!(rt.precision_bits, HIGH_BITS);
        assert!(matches!(
            recurrence_from_table(e.nodes().values(), e.weight().logw(), 3, Precision::Double),
            Err(Error::PrecisionEscalation { .. })
        ));
        let km = cd_kernel(&e, 3).unwrap();
        let oracle = crate::dpp::enumerate_oracle(&e).unwrap();
        let one = oracle.marginals(1);
        for (i, p) in one.iter().enumerate() {
            assert!((km.get(i, i) - p).abs() < 1e-10, "{i}: {} vs {p}", km.get(i, i));
        }
        // Nodes 2 and 3 share the third particle: (2−0)²(2−1)² : (3−0)²(3−1)² = 4 : 36.
        assert!((km.get(2, 2) - 0.1).abs() < 1e-10);
    }

    #[test]
    fn cliffs_beyond_high_precision_fail_loudly() {
        let values: Vec<f64> = (0..6).map(|i| i as f64).collect();
        let logw = vec![0.0, 0.0, -1500.0, -1500.0, -3000.0, -3000.0];
        let r = recurrence_from_table(&values, &logw, 3, Precision::Auto);
        assert!(matches!(r, Err(Error::PrecisionEscalation { degree: 2, bits: 256 })), "{r:?}");
    }

    #[test]
    fn split_table_is_the_squared_half_recurrence() {
        for c in [0.1, 0.5, 0.9] {
            let k = (50.0 * c) as usize;
            let e = hahn_wall(50, 1.0, k);
            let full = compute_recurrence(&e, 2 * k - 1).unwrap();
            let s = split_odd(&full, &e).unwrap();
            let sq = compute_recurrence(&e.squared_half().unwrap(), k - 1).unwrap();
            for j in 0..k - 1 {
                assert!((s.shift[j] - sq.alpha[j]).abs() < 1e-13, "c={c} j={j}");
                if j > 0 {
                    assert!((s.coupling[j] / sq.beta[j] - 1.0).abs() < 1e-12, "c={c} j={j}");
                }
            }
            let direct = sym_kernel_direct(&e).unwrap();
            assert!((direct.entries() - sym_kernel(&e).unwrap().entries()).amax() < 1e-12);
        }
    }

    #[test]
    fn projection_and_trace() {
        let e = hahn_wall(100, 1.0, 50);
        let km = sym_kernel(&e).unwrap();
        assert!(km.projection_residual() < 1e-10);
        assert!((km.trace() - 50.0).abs() < 1e-10);
    }
}
