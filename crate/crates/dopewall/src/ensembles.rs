//! Node sets, weight families and ensemble descriptors.
//!
//! Weights are always held as log-weights; the factorials of the hexagon
//! weights overflow an f64 long before the interesting sizes.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

fn lgamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// Node density ρ⁰ on the support interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum NodeDensity {
    Constant(f64),
    /// Polynomial pieces on `[breaks[i], breaks[i+1]]`, each in powers of `x - breaks[i]`.
    Piecewise { breaks: Vec<f64>, coeffs: Vec<Vec<f64>> },
}

impl NodeDensity {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            NodeDensity::Constant(c) => *c,
            NodeDensity::Piecewise { breaks, coeffs } => {
                let i = piece_index(breaks, x);
                let t = x - breaks[i];
                coeffs[i].iter().rev().fold(0.0, |acc, c| acc * t + c)
            }
        }
    }

    /// ∫_a^x ρ⁰.
    pub fn integral(&self, a: f64, x: f64) -> f64 {
        match self {
            NodeDensity::Constant(c) => c * (x - a),
            NodeDensity::Piecewise { breaks, coeffs } => {
                let prim = |i: usize, t: f64| -> f64 {
                    coeffs[i]
                        .iter()
                        .enumerate()
                        .rev()
                        .fold(0.0, |acc, (p, c)| acc * t + c / (p + 1) as f64)
                        * t
                };
                let last = piece_index(breaks, x);
                let mut total = 0.0;
                for i in 0..last {
                    total += prim(i, breaks[i + 1] - breaks[i]);
                }
                total + prim(last, x - breaks[last])
            }
        }
    }
}

fn piece_index(breaks: &[f64], x: f64) -> usize {
    let pieces = breaks.len() - 1;
    match breaks.partition_point(|b| *b <= x) {
        0 => 0,
        p => (p - 1).min(pieces - 1),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSet {
    values: Vec<f64>,
    interval: (f64, f64),
    density: Option<NodeDensity>,
    symmetric: bool,
}

impl NodeSet {
    pub fn new(values: Vec<f64>, interval: (f64, f64), density: Option<NodeDensity>) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid("empty node set"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("non-finite node"));
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("nodes must be strictly increasing (duplicate or unsorted node)"));
        }
        let (a, b) = interval;
        if !(a <= values[0] && values[values.len() - 1] <= b) {
            return Err(invalid("nodes outside the support interval"));
        }
        let n = values.len();
        let symmetric = n % 2 == 0 && (0..n / 2).all(|i| values[i] == -values[n - 1 - i]);
        Ok(Self { values, interval, density, symmetric })
    }

    /// `-1/2 + (2n+1)/(2N)`, n = 0..N-1, with ρ⁰ ≡ 1 on [-1/2, 1/2].
    pub fn equispaced(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(invalid("N must be at least 1"));
        }
        let nn = n as i64;
        let values = (0..nn).map(|i| (2 * i + 1 - nn) as f64 / (2 * nn) as f64).collect();
        Self::new(values, (-0.5, 0.5), Some(NodeDensity::Constant(1.0)))
    }

    /// The ordinates `L_m` where the paths of a (k,R)-half-hexagon can cross
    /// column m. Only even columns are supported.
    pub fn halfhex_line(k: usize, r: usize, m: usize) -> Result<Self> {
        let count = halfhex_line_count(k, r, m)? as i64;
        let values = (0..count).map(|i| (2 * i + 1 - count) as f64 / 2.0).collect();
        let half = count as f64 / 2.0;
        Self::new(values, (-half, half), Some(NodeDensity::Constant(1.0 / count as f64)))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn interval(&self) -> (f64, f64) {
        self.interval
    }

    pub fn density(&self) -> Option<&NodeDensity> {
        self.density.as_ref()
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// Exact lookup; nodes are produced once from rationals so a caller
    /// holding a node value holds the identical f64.
    pub fn index_of(&self, x: f64) -> Result<usize> {
        self.values
            .binary_search_by(|v| v.partial_cmp(&x).unwrap_or(std::cmp::Ordering::Less))
            .map_err(|_| Error::NotANode(x))
    }

    /// The positive half Y of a symmetric set.
    pub fn positive_half(&self) -> Result<Self> {
        if !self.symmetric {
            return Err(invalid("node set is not symmetric"));
        }
        let n = self.len();
        Ok(Self {
            values: self.values[n / 2..].to_vec(),
            interval: (0.0, self.interval.1),
            density: self.density.clone(),
            symmetric: false,
        })
    }

    /// max_n |∫_a^{x_n} ρ⁰ − (2n+1)/(2N)|, if a density is declared.
    pub fn quantization_residual(&self) -> Option<f64> {
        let d = self.density.as_ref()?;
        let n = self.len() as f64;
        Some(
            self.values
                .iter()
                .enumerate()
                .map(|(i, &x)| (d.integral(self.interval.0, x) - (2 * i + 1) as f64 / (2.0 * n)).abs())
                .fold(0.0, f64::max),
        )
    }
}

/// |L_m| = 2k + min(m, 2R − m).
pub fn halfhex_line_count(k: usize, r: usize, m: usize) -> Result<usize> {
    if k == 0 || r == 0 {
        return Err(invalid("k and R must be positive"));
    }
    if m == 0 || m >= 2 * r {
        return Err(invalid(format!("column {m} outside 1..={}", 2 * r - 1)));
    }
    if m % 2 == 1 {
        return Err(Error::Unsupported(format!("odd column m = {m} (0 would be a node)")));
    }
    Ok(2 * k + m.min(2 * r - m))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum WeightFamily {
    Uniform,
    Hahn { p: f64, q: f64 },
    AssociatedHahn { p: f64, q: f64 },
    HalfHexLine { k: usize, r: usize, m: usize },
    CustomTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    family: WeightFamily,
    logw: Vec<f64>,
    even: bool,
}

impl WeightSpec {
    fn build(family: WeightFamily, logw: Vec<f64>, nodes: &NodeSet) -> Result<Self> {
        if logw.len() != nodes.len() {
            return Err(invalid(format!("{} log-weights for {} nodes", logw.len(), nodes.len())));
        }
        if let Some(i) = logw.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("log-weight at node {i} is not finite")));
        }
        let n = logw.len();
        let even = nodes.is_symmetric() && (0..n / 2).all(|i| logw[i] == logw[n - 1 - i]);
        Ok(Self { family, logw, even })
    }

    pub fn uniform(nodes: &NodeSet) -> Result<Self> {
        Self::build(WeightFamily::Uniform, vec![0.0; nodes.len()], nodes)
    }

    /// binom(P−1+n, n)·binom(Q−1+N−1−n, N−1−n) at the n-th node.
    pub fn hahn(nodes: &NodeSet, p: f64, q: f64) -> Result<Self> {
        if !(p > 0.0 && q > 0.0) {
            return Err(invalid("Hahn parameters must be positive"));
        }
        let n = nodes.len();
        let left = |j: usize| lgamma(p + j as f64) - lgamma(j as f64 + 1.0) - lgamma(p);
        let right = |j: usize| lgamma(q + j as f64) - lgamma(j as f64 + 1.0) - lgamma(q);
        let logw = (0..n).map(|i| left(i) + right(n - 1 - i)).collect();
        Self::build(WeightFamily::Hahn { p, q }, logw, nodes)
    }

    /// 1/(n!(P−1+n)!(N−1−n)!(Q−1+N−1−n)!).
    pub fn associated_hahn(nodes: &NodeSet, p: f64, q: f64) -> Result<Self> {
        if !(p > 0.0 && q > 0.0) {
            return Err(invalid("associated Hahn parameters must be positive"));
        }
        let n = nodes.len();
        let left = |j: usize| lgamma(j as f64 + 1.0) + lgamma(p + j as f64);
        let right = |j: usize| lgamma(j as f64 + 1.0) + lgamma(q + j as f64);
        let logw = (0..n).map(|i| -(left(i) + right(n - 1 - i))).collect();
        Self::build(WeightFamily::AssociatedHahn { p, q }, logw, nodes)
    }

    /// w̃(z) = 1/((m/2+k−1/2±z)!(R−m/2+k−1/2±z)!) on `L_m`.
    pub fn halfhex_line(nodes: &NodeSet, k: usize, r: usize, m: usize) -> Result<Self> {
        let count = halfhex_line_count(k, r, m)?;
        if nodes.len() != count {
            return Err(invalid("node set is not L_m for these parameters"));
        }
        // Doubled coordinates keep every factorial argument an exact integer.
        let (k2, r2, m2) = (2 * k as i64, 2 * r as i64, m as i64);
        let lfact = |twice: i64| lgamma((twice / 2) as f64 + 1.0);
        let side = |dz: i64| lfact(m2 + k2 - 1 + dz) + lfact(r2 - m2 + k2 - 1 + dz);
        let logw = nodes
            .values()
            .iter()
            .map(|&z| {
                let dz = (2.0 * z) as i64;
                -(side(dz) + side(-dz))
            })
            .collect();
        Self::build(WeightFamily::HalfHexLine { k, r, m }, logw, nodes)
    }

    pub fn custom(nodes: &NodeSet, logw: Vec<f64>) -> Result<Self> {
        Self::build(WeightFamily::CustomTable, logw, nodes)
    }

    pub fn family(&self) -> &WeightFamily {
        &self.family
    }

    pub fn logw(&self) -> &[f64] {
        &self.logw
    }

    pub fn is_even(&self) -> bool {
        self.even
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Standard,
    WallSymmetric,
}

/// Nodes, weight, particle count and symmetry mode.
///
/// In wall-symmetric mode `nodes` is the full symmetric set X_{2N}, `k`
/// counts particles on the positive half, and `n()` is N = |X|/2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    nodes: Arc<NodeSet>,
    weight: WeightSpec,
    k: usize,
    mode: Mode,
}

impl Ensemble {
    pub fn standard(nodes: NodeSet, weight: WeightSpec, k: usize) -> Result<Self> {
        if weight.logw.len() != nodes.len() {
            return Err(invalid("weight table does not match the node set"));
        }
        if k > nodes.len() {
            return Err(invalid(format!("k = {k} exceeds N = {}", nodes.len())));
        }
        Ok(Self { nodes: Arc::new(nodes), weight, k, mode: Mode::Standard })
    }

    pub fn wall_symmetric(nodes: NodeSet, weight: WeightSpec, k: usize) -> Result<Self> {
        if weight.logw.len() != nodes.len() {
            return Err(invalid("weight table does not match the node set"));
        }
        if nodes.len() % 2 == 1 {
            return Err(Error::Unsupported("odd node count (0 is a node)".into()));
        }
        if !nodes.is_symmetric() {
            return Err(invalid("wall-symmetric ensemble needs symmetric nodes"));
        }
        if !weight.even {
            return Err(invalid("wall-symmetric ensemble needs an even weight"));
        }
        if k > nodes.len() / 2 {
            return Err(invalid(format!("k = {k} exceeds N = {}", nodes.len() / 2)));
        }
        Ok(Self { nodes: Arc::new(nodes), weight, k, mode: Mode::WallSymmetric })
    }

    pub fn nodes(&self) -> &NodeSet {
        &self.nodes
    }

    pub fn nodes_arc(&self) -> Arc<NodeSet> {
        Arc::clone(&self.nodes)
    }

    pub fn weight(&self) -> &WeightSpec {
        &self.weight
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// N: node count, or half of it in wall-symmetric mode.
    pub fn n(&self) -> usize {
        match self.mode {
            Mode::Standard => self.nodes.len(),
            Mode::WallSymmetric => self.nodes.len() / 2,
        }
    }

    pub fn c(&self) -> f64 {
        self.k as f64 / self.n() as f64
    }

    pub fn with_k(&self, k: usize) -> Result<Self> {
        let limit = self.n();
        if k > limit {
            return Err(invalid(format!("k = {k} exceeds N = {limit}")));
        }
        Ok(Self { k, ..self.clone() })
    }

    pub fn log_weight(&self, x: f64) -> Result<f64> {
        Ok(self.weight.logw[self.nodes.index_of(x)?])
    }

    /// The 2N-node, 2k-particle standard ensemble behind a wall-symmetric one.
    pub fn full(&self) -> Result<Self> {
        if self.mode != Mode::WallSymmetric {
            return Err(invalid("not a wall-symmetric ensemble"));
        }
        Ok(Self { k: 2 * self.k, mode: Mode::Standard, ..self.clone() })
    }

    /// The ensemble in u = y² on the positive half with weight y²w(y); its
    /// Christoffel–Darboux kernel is the wall-symmetric kernel.
    pub fn squared_half(&self) -> Result<Self> {
        if self.mode != Mode::WallSymmetric {
            return Err(invalid("not a wall-symmetric ensemble"));
        }
        let n = self.n();
        let ys = &self.nodes.values()[n..];
        let us: Vec<f64> = ys.iter().map(|y| y * y).collect();
        let top = us[n - 1];
        let nodes = NodeSet::new(us, (0.0, top), None)?;
        let logw = ys.iter().zip(&self.weight.logw[n..]).map(|(y, lw)| 2.0 * y.ln() + lw).collect();
        let weight = WeightSpec::custom(&nodes, logw)?;
        Self::standard(nodes, weight, self.k)
    }
}

/// The AHE parameters (N, P, Q) of a half-hexagon line and the shift
/// `z = n − shift` between AHE index n and ordinate z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AheIdentification {
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub shift: f64,
}

pub fn hexline_to_ahe(k: usize, r: usize, m: usize) -> Result<AheIdentification> {
    let n = halfhex_line_count(k, r, m)?;
    let mm = m.min(2 * r - m);
    let p = r - mm + 1;
    Ok(AheIdentification { n, p, q: p, shift: mm as f64 / 2.0 + k as f64 - 0.5 })
}

/// V_N(x_n) = −(1/N)[log w(x_n) + Σ_{m≠n} log|x_n − x_m|].
pub fn extract_potential(nodes: &NodeSet, weight: &WeightSpec) -> Result<Vec<f64>> {
    let xs = nodes.values();
    let n = xs.len();
    if n < 2 {
        return Err(invalid("need at least two nodes"));
    }
    Ok((0..n)
        .map(|i| {
            let inter: f64 = (0..n).filter(|&j| j != i).map(|j| (xs[i] - xs[j]).abs().ln()).sum();
            -(weight.logw()[i] + inter) / n as f64
        })
        .collect())
}
