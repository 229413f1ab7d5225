//! Correlation functions, exact sampling and counting statistics for
//! projection determinantal processes, plus a brute-force oracle.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensembles::{Ensemble, Mode, NodeSet};
use crate::error::{invalid, Error, Result};
use crate::orthopoly::{hole_kernel, KernelKind, KernelMatrix};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParticleConfiguration {
    /// Strictly increasing node indices.
    pub indices: Vec<usize>,
    #[serde(skip)]
    pub nodes: Option<Arc<NodeSet>>,
    pub seed: u64,
    /// Position in the batch the configuration was drawn for.
    pub stream: u64,
}

impl ParticleConfiguration {
    pub fn values(&self) -> Vec<f64> {
        match &self.nodes {
            Some(n) => self.indices.iter().map(|&i| n.values()[i]).collect(),
            None => Vec::new(),
        }
    }
}

fn submatrix(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |i, j| m[(idx[i], idx[j])])
}

/// det(K(x_i, x_j)) over the given node indices.
pub fn correlation_fn(km: &KernelMatrix, sites: &[usize]) -> Result<f64> {
    let mut sorted = sites.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(invalid("repeated site"));
    }
    if sorted.last().is_some_and(|&i| i >= km.len()) {
        return Err(invalid("site index outside the node set"));
    }
    if sites.is_empty() {
        return Ok(1.0);
    }
    Ok(submatrix(km.entries(), sites).determinant())
}

/// Correlation at node values rather than indices.
pub fn correlation_at(km: &KernelMatrix, xs: &[f64]) -> Result<f64> {
    let idx = xs.iter().map(|&x| km.nodes().index_of(x)).collect::<Result<Vec<_>>>()?;
    correlation_fn(km, &idx)
}

fn check_projection(km: &KernelMatrix) -> Result<()> {
    if km.kind() == KernelKind::Hole {
        return Err(invalid("sampling needs a particle kernel"));
    }
    let r = km.projection_residual();
    if r > 1e-6 {
        return Err(Error::InvalidKernel(r));
    }
    Ok(())
}

/// One draw by sequential conditioning. Step t picks node x with
/// probability K_t(x,x)/(k − t), K_t being the kernel conditioned on the
/// t nodes already chosen (a rank-one Schur update per step). The pick is
/// by inverse CDF over nodes in index order and uses one uniform.
fn draw(km: &KernelMatrix, rng: &mut SplitMix64) -> Vec<usize> {
    let n = km.len();
    let k = km.rank();
    let m = km.entries();
    let mut resid: Vec<f64> = km.diagonal().iter().map(|v| v.max(0.0)).collect();
    let mut taken = vec![false; n];
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut out = Vec::with_capacity(k);
    for _ in 0..k {
        let total: f64 = resid.iter().sum();
        let target = rng.uniform() * total;
        let mut acc = 0.0;
        let mut pick = None;
        let mut last = None;
        for x in 0..n {
            if taken[x] || resid[x] <= 0.0 {
                continue;
            }
            last = Some(x);
            acc += resid[x];
            if acc > target {
                pick = Some(x);
                break;
            }
        }
        let x = match pick.or(last) {
            Some(x) => x,
            None => break,
        };
        let mut col: Vec<f64> = (0..n).map(|y| m[(y, x)]).collect();
        for v in &basis {
            let vx = v[x];
            for (c, vy) in col.iter_mut().zip(v) {
                *c -= vy * vx;
            }
        }
        let piv = col[x].max(f64::MIN_POSITIVE).sqrt();
        for c in col.iter_mut() {
            *c /= piv;
        }
        for (r, c) in resid.iter_mut().zip(&col) {
            *r = (*r - c * c).max(0.0);
        }
        taken[x] = true;
        resid[x] = 0.0;
        basis.push(col);
        out.push(x);
    }
    out.sort_unstable();
    out
}

/// An exact sample of the projection process; member `stream` of the batch
/// seeded with `seed`.
pub fn sample(km: &KernelMatrix, seed: u64) -> Result<ParticleConfiguration> {
    check_projection(km)?;
    let mut rng = SplitMix64::stream(seed, 0);
    Ok(ParticleConfiguration { indices: draw(km, &mut rng), nodes: Some(km.nodes_arc()), seed, stream: 0 })
}

/// `count` exact samples, drawn in parallel; the result does not depend on
/// the number of threads.
pub fn sample_batch(km: &KernelMatrix, count: usize, seed: u64) -> Result<Vec<ParticleConfiguration>> {
    check_projection(km)?;
    let nodes = km.nodes_arc();
    Ok((0..count as u64)
        .into_par_iter()
        .map(|j| {
            let mut rng = SplitMix64::stream(seed, j);
            ParticleConfiguration { indices: draw(km, &mut rng), nodes: Some(Arc::clone(&nodes)), seed, stream: j }
        })
        .collect())
}

/// Every k-subset with its exact probability.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Enumeration {
    pub configurations: Vec<(Vec<usize>, f64)>,
    /// log of the normalization Z (or Z^sym).
    pub log_z: f64,
}

impl Enumeration {
    pub fn z(&self) -> f64 {
        self.log_z.exp()
    }

    /// P(all of `sites` are occupied).
    pub fn correlation(&self, sites: &[usize]) -> f64 {
        neumaier(self.configurations.iter().filter(|(s, _)| sites.iter().all(|x| s.contains(x))).map(|(_, p)| *p))
    }

    /// One-point function at every node index present.
    pub fn marginals(&self, n_nodes: usize) -> Vec<f64> {
        let width = n_nodes.max(self.configurations.iter().flat_map(|(s, _)| s.iter().map(|i| i + 1)).max().unwrap_or(0));
        (0..width).map(|i| self.correlation(&[i])).collect()
    }
}

fn neumaier(it: impl Iterator<Item = f64>) -> f64 {
    let (mut s, mut c) = (0.0f64, 0.0f64);
    for v in it {
        let t = s + v;
        c += if s.abs() >= v.abs() { (s - t) + v } else { (v - t) + s };
        s = t;
    }
    s + c
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k.min(n));
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    for i in (0..k).rev() {
        if c[i] < n - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Brute-force law from the product formulas, in log space with
/// compensated normalization. Wall-symmetric ensembles are enumerated on
/// the positive half.
pub fn enumerate_oracle(e: &Ensemble) -> Result<Enumeration> {
    let (xs, logw): (Vec<f64>, Vec<f64>) = match e.mode() {
        Mode::Standard => (e.nodes().values().to_vec(), e.weight().logw().to_vec()),
        Mode::WallSymmetric => {
            let n = e.n();
            let ys = &e.nodes().values()[n..];
            (
                ys.iter().map(|y| y * y).collect(),
                ys.iter().zip(&e.weight().logw()[n..]).map(|(y, l)| 2.0 * y.ln() + l).collect(),
            )
        }
    };
    let n = xs.len();
    let k = e.k();
    let count = binomial(n, k);
    if count > 1_000_000 {
        return Err(Error::Capacity(count));
    }
    let mut configs = Vec::with_capacity(count as usize);
    let mut c: Vec<usize> = (0..k).collect();
    loop {
        let mut lp: f64 = c.iter().map(|&i| logw[i]).sum();
        for a in 0..k {
            for b in a + 1..k {
                lp += 2.0 * (xs[c[b]] - xs[c[a]]).abs().ln();
            }
        }
        configs.push((c.clone(), lp));
        if k == 0 || !next_combination(&mut c, n) {
            break;
        }
    }
    let top = configs.iter().map(|(_, l)| *l).fold(f64::NEG_INFINITY, f64::max);
    let log_z = top + neumaier(configs.iter().map(|(_, l)| (l - top).exp())).ln();
    let configurations = configs.into_iter().map(|(s, l)| (s, (l - log_z).exp())).collect();
    Ok(Enumeration { configurations, log_z })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CountDistribution {
    pub window: Vec<usize>,
    /// A_m, m = 0..=min(|B|, k).
    pub probabilities: Vec<f64>,
}

/// Eigenvalues of K restricted to B, checked against [0,1] and clamped.
fn window_spectrum(km: &KernelMatrix, window: &[usize]) -> Result<Vec<f64>> {
    if window.is_empty() {
        return Err(invalid("empty window"));
    }
    let mut w = window.to_vec();
    w.sort_unstable();
    if w.windows(2).any(|p| p[0] == p[1]) || w[w.len() - 1] >= km.len() {
        return Err(invalid("window must be distinct node indices"));
    }
    let eig = SymmetricEigen::new(submatrix(km.entries(), &w));
    let mut out = Vec::with_capacity(w.len());
    for &l in eig.eigenvalues.iter() {
        if !(-1e-8..=1.0 + 1e-8).contains(&l) {
            return Err(Error::KernelValidity(l));
        }
        out.push(l.clamp(0.0, 1.0));
    }
    Ok(out)
}

/// A_m = P(exactly m particles in B): the coefficients of
/// Π_i (1 − λ_i + λ_i t), i.e. (1/m!)(−d/dt)^m det(I − tK|_B) at t = 1.
pub fn count_distribution(km: &KernelMatrix, window: &[usize]) -> Result<CountDistribution> {
    let lambdas = window_spectrum(km, window)?;
    let mut poly = vec![1.0];
    for l in lambdas {
        let mut next = vec![0.0; poly.len() + 1];
        for (m, c) in poly.iter().enumerate() {
            next[m] += c * (1.0 - l);
            next[m + 1] += c * l;
        }
        poly = next;
    }
    let cap = match km.kind() {
        KernelKind::Hole => window.len(),
        _ => window.len().min(km.rank()),
    };
    poly.truncate(cap + 1);
    Ok(CountDistribution { window: window.to_vec(), probabilities: poly })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Rightmost,
    Leftmost,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Species {
    Particle,
    Hole,
}

/// P(x_max ≤ t) = det(I − K|_{x > t}) for the rightmost particle,
/// P(x_min ≥ t) = det(I − K|_{x < t}) for the leftmost; holes use I − K.
pub fn extremal_cdf(km: &KernelMatrix, t: f64, side: Side, species: Species) -> Result<f64> {
    let xs = km.nodes().values();
    if !(xs[0] <= t && t <= xs[xs.len() - 1]) {
        return Err(invalid(format!("threshold {t} outside the node range")));
    }
    let kernel = match species {
        Species::Particle => km.clone(),
        Species::Hole => hole_kernel(km),
    };
    let set: Vec<usize> = match side {
        Side::Rightmost => (0..xs.len()).filter(|&i| xs[i] > t).collect(),
        Side::Leftmost => (0..xs.len()).filter(|&i| xs[i] < t).collect(),
    };
    Ok(gap_probability(&kernel, &set))
}

/// det(I − K|_set); 1 for the empty set.
pub fn gap_probability(km: &KernelMatrix, set: &[usize]) -> f64 {
    if set.is_empty() {
        return 1.0;
    }
    let sub = submatrix(km.entries(), set);
    (DMatrix::identity(set.len(), set.len()) - sub).determinant()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::WeightSpec;
    use crate::orthopoly::{cd_kernel, sym_kernel};

    fn uniform4(k: usize) -> Ensemble {
        let s = NodeSet::new(vec![0.0, 1.0, 2.0, 3.0], (0.0, 3.0), None).unwrap();
        let w = WeightSpec::uniform(&s).unwrap();
        Ensemble::standard(s, w, k).unwrap()
    }

    fn wall12() -> Ensemble {
        let s = NodeSet::new(vec![-2.0, -1.0, 1.0, 2.0], (-2.0, 2.0), None).unwrap();
        let w = WeightSpec::uniform(&s).unwrap();
        Ensemble::wall_symmetric(s, w, 1).unwrap()
    }

    #[test]
    fn hand_enumeration() {
        let o = enumerate_oracle(&uniform4(2)).unwrap();
        assert!((o.z() - 20.0).abs() < 1e-12);
        let want = [1.0, 4.0, 9.0, 1.0, 4.0, 1.0];
        for ((_, p), w) in o.configurations.iter().zip(want) {
            assert!((p - w / 20.0).abs() < 1e-15);
        }
        let o = enumerate_oracle(&wall12()).unwrap();
        assert!((o.z() - 5.0).abs() < 1e-12);
        let o = enumerate_oracle(&uniform4(0)).unwrap();
        assert_eq!(o.configurations.len(), 1);
        assert!((o.configurations[0].1 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn correlations_against_enumeration() {
        let e = uniform4(2);
        let km = cd_kernel(&e, 2).unwrap();
        let o = enumerate_oracle(&e).unwrap();
        assert!((correlation_fn(&km, &[0]).unwrap() - 0.7).abs() < 1e-14);
        assert!((correlation_fn(&km, &[0, 3]).unwrap() - 0.45).abs() < 1e-14);
        for a in 0..4 {
            for b in a + 1..4 {
                assert!((correlation_fn(&km, &[a, b]).unwrap() - o.correlation(&[a, b])).abs() < 1e-14);
            }
        }
        assert!(correlation_fn(&km, &[1, 1]).is_err());
        assert!((correlation_at(&km, &[0.0]).unwrap() - 0.7).abs() < 1e-14);
    }

    #[test]
    fn coincident_rows_give_zero() {
        let s = Arc::new(NodeSet::new(vec![0.0, 1.0], (0.0, 1.0), None).unwrap());
        let km = KernelMatrix::from_matrix(s, DMatrix::from_element(2, 2, 0.5), KernelKind::Standard).unwrap();
        assert_eq!(correlation_fn(&km, &[0, 1]).unwrap(), 0.0);
    }

    #[test]
    fn counts() {
        let km = cd_kernel(&uniform4(2), 2).unwrap();
        let a = count_distribution(&km, &[0]).unwrap().probabilities;
        assert!((a[0] - 0.3).abs() < 1e-14 && (a[1] - 0.7).abs() < 1e-14);
        let a = count_distribution(&km, &[3]).unwrap().probabilities;
        assert!((a[1] - 0.7).abs() < 1e-14);
        let a = count_distribution(&km, &[0, 1, 2, 3]).unwrap().probabilities;
        assert_eq!(a.len(), 3);
        assert!((a[2] - 1.0).abs() < 1e-12 && a[0].abs() < 1e-12 && a[1].abs() < 1e-12);
    }

    #[test]
    fn bad_kernel_rejected() {
        let s = Arc::new(NodeSet::new(vec![0.0, 1.0], (0.0, 1.0), None).unwrap());
        let km = KernelMatrix::from_matrix(s, DMatrix::from_element(2, 2, 1.5), KernelKind::Standard).unwrap();
        assert!(matches!(count_distribution(&km, &[0, 1]), Err(Error::KernelValidity(_))));
        assert!(matches!(sample(&km, 1), Err(Error::InvalidKernel(_))));
    }

    #[test]
    fn extremes() {
        let km = cd_kernel(&uniform4(2), 2).unwrap();
        assert!((extremal_cdf(&km, 2.0, Side::Rightmost, Species::Particle).unwrap() - 0.3).abs() < 1e-14);
        assert!((extremal_cdf(&km, 3.0, Side::Rightmost, Species::Particle).unwrap() - 1.0).abs() < 1e-15);
        let ks = sym_kernel(&wall12()).unwrap();
        assert!((extremal_cdf(&ks, 2.0, Side::Leftmost, Species::Particle).unwrap() - 0.8).abs() < 1e-14);
        // Holes: the single hole sits at 1 with probability 0.8.
        assert!((extremal_cdf(&ks, 1.0, Side::Rightmost, Species::Hole).unwrap() - 0.8).abs() < 1e-14);
    }

    #[test]
    fn full_rank_sample_is_everything() {
        let km = cd_kernel(&uniform4(4), 4).unwrap();
        for seed in 0..20 {
            assert_eq!(sample(&km, seed).unwrap().indices, vec![0, 1, 2, 3]);
        }
    }

    #[test]
    fn sampler_is_deterministic() {
        let km = cd_kernel(&uniform4(2), 2).unwrap();
        let a = sample_batch(&km, 50, 9).unwrap();
        let b = sample_batch(&km, 50, 9).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| x.indices == y.indices));
        assert_eq!(sample(&km, 9).unwrap().indices, a[0].indices);
    }

    /// Pearson statistic against the exact law; the 1e-3 critical values
    /// of χ² with 5 and 1 degrees of freedom are 20.52 and 10.83.
    fn chi_square(samples: &[ParticleConfiguration], law: &Enumeration) -> f64 {
        let n = samples.len() as f64;
        law.configurations
            .iter()
            .map(|(s, p)| {
                let obs = samples.iter().filter(|c| &c.indices == s).count() as f64;
                (obs - n * p).powi(2) / (n * p)
            })
            .sum()
    }

    #[test]
    fn sampler_law_uniform_pairs() {
        let e = uniform4(2);
        let km = cd_kernel(&e, 2).unwrap();
        let batch = sample_batch(&km, 100_000, 2024).unwrap();
        assert!(chi_square(&batch, &enumerate_oracle(&e).unwrap()) < 20.52);
    }

    #[test]
    fn sampler_law_wall() {
        let e = wall12();
        let km = sym_kernel(&e).unwrap();
        let batch = sample_batch(&km, 100_000, 7).unwrap();
        let ones = batch.iter().filter(|c| c.indices == vec![0]).count() as f64 / 1e5;
        let sd = (0.2f64 * 0.8 / 1e5).sqrt();
        assert!((ones - 0.2).abs() < 4.0 * sd);
        assert!(chi_square(&batch, &enumerate_oracle(&e).unwrap()) < 10.83);
    }
}
