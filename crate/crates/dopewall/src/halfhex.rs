//! Lozenge tilings of the half-hexagon: line ensembles, exact line
//! sampling, Glauber dynamics for whole tilings, SVG pictures and arctic
//! statistics.
//!
//! Ordinates are half-integers and are stored doubled throughout.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dpp::{sample_batch, ParticleConfiguration};
use crate::ensembles::{halfhex_line_count, Ensemble, NodeSet, WeightSpec};
use crate::equilibrium::{critical_c, ellipse_y, hahn_band_edge, hahn_edge_rate, hahn_occupation, tau0};
use crate::error::{invalid, Error, Result};
use crate::orthopoly::sym_kernel;
use crate::rng::SplitMix64;

const SQRT3_2: f64 = 0.866_025_403_784_438_6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HexSpec {
    pub k: usize,
    #[serde(rename = "R")]
    pub r: usize,
}

impl HexSpec {
    pub fn new(k: usize, r: usize) -> Result<Self> {
        if k == 0 || r == 0 {
            return Err(invalid("k and R must be positive"));
        }
        Ok(Self { k, r })
    }

    pub fn lambda(&self) -> f64 {
        self.r as f64 / self.k as f64
    }

    /// τ = (m − R)√3/(2k).
    pub fn tau(&self, m: usize) -> f64 {
        (m as f64 - self.r as f64) * SQRT3_2 / self.k as f64
    }

    /// 2kR path tiles plus R(R−1)/2 vertical tiles.
    pub fn tile_count(&self) -> usize {
        2 * self.k * self.r + self.r * (self.r - 1) / 2
    }

    /// Highest doubled ordinate available at column m.
    fn top(&self, m: usize) -> i64 {
        let mm = m.min(2 * self.r - m) as i64;
        2 * self.k as i64 - 1 + mm
    }

    fn check_column(&self, m: usize) -> Result<()> {
        if m % 2 == 1 {
            return Err(Error::Unsupported(format!("odd column m = {m}")));
        }
        if m < 2 || m + 2 > 2 * self.r {
            return Err(invalid(format!("column {m} outside 2..={}", 2 * self.r as i64 - 2)));
        }
        Ok(())
    }
}

/// The wall-symmetric ensemble of the crossings of column m.
pub fn line_ensemble(h: HexSpec, m: usize) -> Result<Ensemble> {
    h.check_column(m)?;
    let nodes = NodeSet::halfhex_line(h.k, h.r, m)?;
    let weight = WeightSpec::halfhex_line(&nodes, h.k, h.r, m)?;
    Ensemble::wall_symmetric(nodes, weight, h.k)
}

/// Column m of the full hexagon with 2k paths: the standard ensemble on
/// all of L_m with the same weight.
pub fn full_line_ensemble(h: HexSpec, m: usize) -> Result<Ensemble> {
    h.check_column(m)?;
    let nodes = NodeSet::halfhex_line(h.k, h.r, m)?;
    let weight = WeightSpec::halfhex_line(&nodes, h.k, h.r, m)?;
    Ensemble::standard(nodes, weight, 2 * h.k)
}

/// Exact samples of the crossing ordinates of column m.
pub fn sample_line(h: HexSpec, m: usize, n_samples: usize, seed: u64) -> Result<Vec<ParticleConfiguration>> {
    let km = sym_kernel(&line_ensemble(h, m)?)?;
    sample_batch(&km, n_samples, seed)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TilingState {
    pub k: usize,
    #[serde(rename = "R")]
    pub r: usize,
    /// `heights[i][m]`: twice the ordinate of path i at column m.
    pub heights: Vec<Vec<i64>>,
}

impl TilingState {
    /// The lowest tiling: path i zigzags between 2i+1 and 2i+2.
    pub fn minimal(h: HexSpec) -> Self {
        let heights = (0..h.k).map(|i| (0..=2 * h.r).map(|m| 2 * i as i64 + 1 + (m % 2) as i64).collect()).collect();
        Self { k: h.k, r: h.r, heights }
    }

    pub fn spec(&self) -> HexSpec {
        HexSpec { k: self.k, r: self.r }
    }

    pub fn validate(&self) -> Result<()> {
        let cols = 2 * self.r + 1;
        if self.k == 0 || self.r == 0 || self.heights.len() != self.k || self.heights.iter().any(|p| p.len() != cols) {
            return Err(invalid("heights table does not match k and R"));
        }
        for (i, p) in self.heights.iter().enumerate() {
            if p[0] != 2 * i as i64 + 1 || p[cols - 1] != 2 * i as i64 + 1 {
                return Err(invalid(format!("path {i} does not start and end at {}/2", 2 * i + 1)));
            }
            if let Some(m) = p.windows(2).position(|w| (w[1] - w[0]).abs() != 1) {
                return Err(invalid(format!("path {i} takes an illegal step at column {m}")));
            }
            if let Some(m) = p.iter().position(|&y| y < 1) {
                return Err(invalid(format!("path {i} touches the wall at column {m}")));
            }
        }
        for i in 1..self.k {
            if let Some(m) = (0..cols).find(|&m| self.heights[i][m] <= self.heights[i - 1][m]) {
                return Err(invalid(format!("paths {} and {i} meet at column {m}", i - 1)));
            }
        }
        Ok(())
    }

    /// Doubled crossing ordinates of column m, increasing.
    pub fn crossings(&self, m: usize) -> Vec<i64> {
        self.heights.iter().map(|p| p[m]).collect()
    }
}

/// Glauber dynamics on the paths: a proposal picks a path and an inner
/// column and flips a peak into a valley or back.
struct Chain {
    k: usize,
    cols: usize,
    h: Vec<i64>,
    rng: SplitMix64,
}

impl Chain {
    fn new(state: &TilingState, rng: SplitMix64) -> Self {
        Self { k: state.k, cols: 2 * state.r + 1, h: state.heights.concat(), rng }
    }

    fn step(&mut self) {
        let inner = (self.cols - 2) as u64;
        let pick = self.rng.below(self.k as u64 * inner);
        let i = (pick / inner) as usize;
        let m = (pick % inner) as usize + 1;
        let at = i * self.cols + m;
        let (left, right) = (self.h[at - 1], self.h[at + 1]);
        if left != right {
            return;
        }
        let new = 2 * left - self.h[at];
        if new < 1 {
            return;
        }
        if i > 0 && self.h[at - self.cols] >= new {
            return;
        }
        if i + 1 < self.k && self.h[at + self.cols] <= new {
            return;
        }
        self.h[at] = new;
    }

    fn sweeps(&mut self, n: u64) {
        let per = (self.k * (self.cols - 2)) as u64;
        for _ in 0..n * per {
            self.step();
        }
    }

    fn state(&self, r: usize) -> TilingState {
        TilingState { k: self.k, r, heights: self.h.chunks(self.cols).map(|c| c.to_vec()).collect() }
    }
}

/// Runs `sweeps` sweeps of k(2R−1) proposals from the minimal state.
pub fn mcmc_tile(h: HexSpec, sweeps: u64, seed: u64) -> TilingState {
    let start = TilingState::minimal(h);
    if h.k == 0 || h.r == 0 {
        return start;
    }
    let mut chain = Chain::new(&start, SplitMix64::new(seed));
    chain.sweeps(sweeps);
    chain.state(h.r)
}

pub fn default_burn_in(h: HexSpec) -> u64 {
    10 * (h.k * h.r * h.r) as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McmcPlan {
    pub chains: usize,
    pub states_per_chain: usize,
    pub burn_in: u64,
    pub thin: u64,
}

/// Thinned states from independent chains, chain c seeded with stream c of
/// `seed`; the result does not depend on the number of threads.
pub fn mcmc_states(h: HexSpec, plan: McmcPlan, seed: u64) -> Vec<TilingState> {
    let start = TilingState::minimal(h);
    (0..plan.chains as u64)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut chain = Chain::new(&start, SplitMix64::stream(seed, c));
            chain.sweeps(plan.burn_in);
            let mut out = Vec::with_capacity(plan.states_per_chain);
            for _ in 0..plan.states_per_chain {
                chain.sweeps(plan.thin);
                out.push(chain.state(h.r));
            }
            out
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TileKind {
    Up,
    Down,
    Vertical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tile {
    pub kind: TileKind,
    pub corners: [(f64, f64); 4],
}

impl Tile {
    pub fn center(&self) -> (f64, f64) {
        let x = self.corners.iter().map(|p| p.0).sum::<f64>() / 4.0;
        let y = self.corners.iter().map(|p| p.1).sum::<f64>() / 4.0;
        (x, y)
    }
}

fn column_x(m: usize, r: usize) -> f64 {
    (m as f64 - r as f64) * SQRT3_2
}

/// Every lozenge of the tiling: one per path step, and one vertical
/// lozenge at every lattice point off the axis that no path crosses.
pub fn tiles(t: &TilingState) -> Vec<Tile> {
    let h = t.spec();
    let mut out = Vec::with_capacity(h.tile_count());
    for p in &t.heights {
        for m in 0..2 * t.r {
            let (x0, x1) = (column_x(m, t.r), column_x(m + 1, t.r));
            let y = p[m] as f64 / 2.0;
            let (kind, hi, lo) = if p[m + 1] > p[m] { (TileKind::Up, y + 1.0, y) } else { (TileKind::Down, y, y - 1.0) };
            out.push(Tile { kind, corners: [(x0, y - 0.5), (x0, y + 0.5), (x1, hi), (x1, lo)] });
        }
    }
    for m in 1..2 * t.r {
        let x = column_x(m, t.r);
        let crossed = t.crossings(m);
        let first = if m % 2 == 0 { 1 } else { 2 };
        let mut y2 = first;
        while y2 <= h.top(m) {
            if !crossed.contains(&y2) {
                let y = y2 as f64 / 2.0;
                out.push(Tile { kind: TileKind::Vertical, corners: [(x - SQRT3_2, y), (x, y + 0.5), (x + SQRT3_2, y), (x, y - 0.5)] });
            }
            y2 += 2;
        }
    }
    out
}

const FILLS: [(TileKind, &str); 3] = [(TileKind::Up, "#d95f02"), (TileKind::Down, "#1b9e77"), (TileKind::Vertical, "#7570b3")];

pub fn svg_string(t: &TilingState) -> String {
    const SCALE: f64 = 12.0;
    let (xmin, xmax) = (-(t.r as f64) * SQRT3_2 - SQRT3_2, t.r as f64 * SQRT3_2 + SQRT3_2);
    let ymax = t.k as f64 + t.r as f64 / 2.0 + 1.0;
    let (w, hgt) = ((xmax - xmin) * SCALE, (ymax + 0.5) * SCALE);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.1}" height="{hgt:.1}" viewBox="0 0 {w:.1} {hgt:.1}">"#);
    for tile in tiles(t) {
        let fill = FILLS.iter().find(|f| f.0 == tile.kind).map(|f| f.1).unwrap_or("#000");
        let pts: Vec<String> = tile.corners.iter().map(|(x, y)| format!("{:.3},{:.3}", (x - xmin) * SCALE, (ymax - y) * SCALE)).collect();
        let _ = writeln!(s, r##"<polygon points="{}" fill="{fill}" stroke="#222" stroke-width="0.4"/>"##, pts.join(" "));
    }
    s.push_str("</svg>\n");
    s
}

pub fn render_svg(t: &TilingState, path: &Path) -> Result<()> {
    t.validate()?;
    std::fs::write(path, svg_string(t))?;
    Ok(())
}

/// Agreement of the tiles in one frozen corner with the expected type.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CornerProbe {
    pub name: String,
    pub expected: TileKind,
    pub tiles: usize,
    pub matching: usize,
    pub fraction: f64,
}

/// Tiles whose rescaled centre lies at least `margin` above the inscribed
/// ellipse, split by τ into thirds: upper-left should be up-tiles, the
/// top-centre vertical, upper-right down-tiles.
pub fn corner_probes(t: &TilingState, margin: f64) -> Vec<CornerProbe> {
    let h = t.spec();
    let lambda = h.lambda();
    let half = SQRT3_2 * lambda;
    let mut probes = vec![
        CornerProbe { name: "upper-left".into(), expected: TileKind::Up, tiles: 0, matching: 0, fraction: 0.0 },
        CornerProbe { name: "top-centre".into(), expected: TileKind::Vertical, tiles: 0, matching: 0, fraction: 0.0 },
        CornerProbe { name: "upper-right".into(), expected: TileKind::Down, tiles: 0, matching: 0, fraction: 0.0 },
    ];
    for tile in tiles(t) {
        let (x, y) = tile.center();
        let (tau, yr) = (x / h.k as f64, y / h.k as f64);
        if tau.abs() > half || yr < ellipse_y(lambda, tau) + margin {
            continue;
        }
        let slot = if tau < -half / 3.0 {
            0
        } else if tau > half / 3.0 {
            2
        } else {
            1
        };
        probes[slot].tiles += 1;
        if tile.kind == probes[slot].expected {
            probes[slot].matching += 1;
        }
    }
    for p in &mut probes {
        p.fraction = if p.tiles == 0 { 0.0 } else { p.matching as f64 / p.tiles as f64 };
    }
    probes
}

/// Exact law of the crossings of column m by path counting: the number of
/// families reaching a configuration times the number leaving it. With
/// `wall` the k paths of the half-hexagon stay positive; without it the 2k
/// paths of the full hexagon are free.
pub fn exact_line_law(h: HexSpec, m: usize, wall: bool) -> Result<BTreeMap<Vec<i64>, f64>> {
    h.check_column(m)?;
    let paths = if wall { h.k } else { 2 * h.k };
    let start: Vec<i64> = (0..paths as i64).map(|i| 2 * i + 1 - if wall { 0 } else { paths as i64 }).collect();
    let forward = |steps: usize| -> BTreeMap<Vec<i64>, f64> {
        let mut cur = BTreeMap::new();
        cur.insert(start.clone(), 1.0);
        for _ in 0..steps {
            let mut next = BTreeMap::new();
            for (c, n) in &cur {
                for mask in 0..(1u32 << paths) {
                    let moved: Vec<i64> = c.iter().enumerate().map(|(i, y)| if mask >> i & 1 == 1 { y + 1 } else { y - 1 }).collect();
                    if moved.windows(2).any(|w| w[1] <= w[0]) || (wall && moved[0] < 1) {
                        continue;
                    }
                    *next.entry(moved).or_insert(0.0) += n;
                }
            }
            cur = next;
        }
        cur
    };
    let ahead = forward(m);
    let behind = forward(2 * h.r - m);
    let mut law: BTreeMap<Vec<i64>, f64> = ahead.iter().filter_map(|(c, a)| behind.get(c).map(|b| (c.clone(), a * b))).collect();
    let total: f64 = law.values().sum();
    for v in law.values_mut() {
        *v /= total;
    }
    Ok(law)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeRegime {
    VoidAdjacent,
    SaturatedAdjacent,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArcticProfile {
    pub spec: HexSpec,
    pub m: usize,
    pub n_samples: usize,
    pub seed: u64,
    pub tau: f64,
    /// Crossing ordinates of the positive nodes, divided by k.
    pub ordinates: Vec<f64>,
    pub frequency: Vec<f64>,
    /// Kernel diagonal (exact one-point function).
    pub exact: Vec<f64>,
    /// Limit occupation at the same ordinates.
    pub prediction: Vec<f64>,
    /// Where `frequency` falls through 1/2, rescaled.
    pub half_crossing: Option<f64>,
    pub exact_half_crossing: Option<f64>,
    pub predicted_edge: f64,
    pub regime: EdgeRegime,
    pub below_tau0: bool,
    /// Band end in x = z/|L_m| and the Airy rescaling ξ = scale·(x − β).
    pub band_edge: f64,
    pub xi_scale: f64,
    /// Limit occupation at the wall.
    pub theta: f64,
    /// Rescaled top crossing of each sample.
    pub top: Vec<f64>,
    /// Lowest crossing ordinate of each sample, unscaled.
    pub bottom: Vec<f64>,
    /// Median of the top crossing, in ordinate/k units.
    pub top_median: f64,
}

fn half_crossing(ordinates: &[f64], p: &[f64]) -> Option<f64> {
    let i = p.iter().rposition(|v| *v >= 0.5)?;
    if i + 1 == p.len() {
        return Some(ordinates[i]);
    }
    Some(ordinates[i] + (p[i] - 0.5) / (p[i] - p[i + 1]) * (ordinates[i + 1] - ordinates[i]))
}

/// The AHE parameters (A, c) of column m in the normalization of the
/// closed forms, with the dual Hahn filling 1 − c.
fn column_parameters(h: HexSpec, m: usize) -> Result<(f64, f64, usize)> {
    let nf = halfhex_line_count(h.k, h.r, m)?;
    let mm = m.min(2 * h.r - m);
    let a = (h.r - mm) as f64 / nf as f64;
    let c = 2.0 * h.k as f64 / nf as f64;
    Ok((a, c, nf))
}

pub fn arctic_profile(h: HexSpec, m: usize, n_samples: usize, seed: u64) -> Result<ArcticProfile> {
    if n_samples == 0 {
        return Err(invalid("need at least one sample"));
    }
    let e = line_ensemble(h, m)?;
    let km = sym_kernel(&e)?;
    let samples = sample_batch(&km, n_samples, seed)?;
    let zs = km.nodes().values().to_vec();
    let kf = h.k as f64;
    let (a, c, nf) = column_parameters(h, m)?;
    let dual = 1.0 - c;
    let ordinates: Vec<f64> = zs.iter().map(|z| z / kf).collect();
    let mut counts = vec![0usize; zs.len()];
    let mut top = Vec::with_capacity(n_samples);
    let mut bottom = Vec::with_capacity(n_samples);
    let beta = hahn_band_edge(a, dual);
    let xi_scale = (nf as f64 * hahn_edge_rate(a, dual)).powf(2.0 / 3.0);
    let mut top_z = Vec::with_capacity(n_samples);
    for s in &samples {
        for &i in &s.indices {
            counts[i] += 1;
        }
        let (lo, hi) = (zs[s.indices[0]], zs[s.indices[s.indices.len() - 1]]);
        bottom.push(lo);
        top_z.push(hi);
        top.push(xi_scale * (hi / nf as f64 - beta));
    }
    let frequency: Vec<f64> = counts.iter().map(|c| *c as f64 / n_samples as f64).collect();
    let exact = km.diagonal();
    let prediction: Vec<f64> = zs.iter().map(|z| 1.0 - hahn_occupation(a, dual, z / nf as f64)).collect();
    top_z.sort_by(|x, y| x.total_cmp(y));
    let top_median = top_z[(n_samples - 1) / 2] / kf;
    let tau = h.tau(m);
    let regime = if dual > critical_c(a) { EdgeRegime::VoidAdjacent } else { EdgeRegime::SaturatedAdjacent };
    Ok(ArcticProfile {
        spec: h,
        m,
        n_samples,
        seed,
        tau,
        half_crossing: half_crossing(&ordinates, &frequency),
        exact_half_crossing: half_crossing(&ordinates, &exact),
        ordinates,
        frequency,
        exact,
        prediction,
        predicted_edge: ellipse_y(h.lambda(), tau),
        regime,
        below_tau0: -tau.abs() < tau0(h.lambda()),
        band_edge: beta,
        xi_scale,
        theta: 1.0 - hahn_occupation(a, dual, 0.0),
        top,
        bottom,
        top_median,
    })
}

/// Kolmogorov–Smirnov distance between the empirical law of `samples` and
/// a continuous CDF, checked on both sides of every jump.
pub fn ks_distance(samples: &[f64], cdf: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len() as f64;
    let mut d = 0.0f64;
    let mut i = 0;
    while i < xs.len() {
        let mut j = i;
        while j < xs.len() && xs[j] == xs[i] {
            j += 1;
        }
        let f = cdf(xs[i])?;
        d = d.max((i as f64 / n - f).abs()).max((j as f64 / n - f).abs());
        i = j;
    }
    Ok(d)
}
