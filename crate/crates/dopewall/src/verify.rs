//! Acceptance checks, shared by the `verify` subcommand and the
//! acceptance test target. Each check measures one quantity, compares it
//! with a pinned tolerance and records its runtime against a budget.

use std::collections::BTreeSet;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::asymptotics::{convergence_suite, cross_term_sup, tracy_widom_cdf, wall_cdf, HahnFamily, LimitInputs, Regime};
use crate::dpp::{correlation_fn, enumerate_oracle, extremal_cdf, Side, Species};
use crate::ensembles::{extract_potential, Ensemble, Mode, NodeDensity, NodeSet, WeightSpec};
use crate::equilibrium::{field_from_table, hahn_band_edge, hahn_closed_forms, solve_equilibrium, SolverOptions};
use crate::error::{Error, Result};
use crate::halfhex::{arctic_profile, corner_probes, default_burn_in, ks_distance, line_ensemble, full_line_ensemble, mcmc_states, mcmc_tile, ArcticProfile, HexSpec, McmcPlan};
use crate::orthopoly::{cd_form_discrepancy, cd_kernel, compute_recurrence, split_odd, sym_kernel, sym_kernel_direct, KernelMatrix};

const CONVERGENCE_NS: [usize; 4] = [50, 100, 200, 400];
const SAMPLE_SEED: u64 = 20_240_611;
const MCMC_SEED: u64 = 77;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Check {
    pub id: String,
    pub name: String,
    /// The measured quantity the verdict is based on.
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub detail: String,
    pub seconds: f64,
    pub budget_seconds: f64,
}

impl Check {
    pub fn line(&self) -> String {
        format!(
            "{} {} {}: value {:.4e} tol {:.1e} ({:.1}s of {:.0}s) {}",
            self.id,
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.value,
            self.tolerance,
            self.seconds,
            self.budget_seconds,
            self.detail
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Oracle,
    Kernels,
    Equilibrium,
    Limits,
    Halfhex,
    Arctic,
    All,
}

impl std::str::FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "oracle" => Self::Oracle,
            "kernels" => Self::Kernels,
            "equilibrium" => Self::Equilibrium,
            "limits" => Self::Limits,
            "halfhex" => Self::Halfhex,
            "arctic" => Self::Arctic,
            "all" => Self::All,
            other => return Err(Error::InvalidArgument(format!("unknown suite {other}"))),
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

pub type CheckFn = fn() -> Result<Check>;

/// The checks of a suite, in order.
pub fn suite_checks(suite: Suite) -> Vec<CheckFn> {
    match suite {
        Suite::Oracle => vec![oracle_equivalence, hand_anchors],
        Suite::Kernels => vec![kernel_identities],
        Suite::Equilibrium => vec![equilibrium_closed_form],
        Suite::Limits => vec![band_and_wall_rates, cross_term_decay, gap_regimes],
        Suite::Halfhex => vec![edge_statistics, wall_law, mcmc_cross_validation],
        Suite::Arctic => vec![arctic_picture],
        Suite::All => [Suite::Oracle, Suite::Kernels, Suite::Equilibrium, Suite::Limits, Suite::Halfhex, Suite::Arctic]
            .into_iter()
            .flat_map(suite_checks)
            .collect(),
    }
}

pub fn run_suite(suite: Suite) -> Result<SuiteReport> {
    let checks = suite_checks(suite).into_iter().map(|f| f()).collect::<Result<_>>()?;
    Ok(SuiteReport { suite, checks })
}

/// Runs `body`, timing it; the verdict needs both the measurement and
/// the budget.
fn timed(id: &str, name: &str, tolerance: f64, budget: f64, body: impl FnOnce() -> Result<(f64, bool, String)>) -> Result<Check> {
    let t0 = Instant::now();
    let (value, ok, detail) = body()?;
    let seconds = t0.elapsed().as_secs_f64();
    let mut detail = detail;
    if seconds >= budget {
        detail.push_str(&format!("; over the {budget:.0}s budget"));
    }
    Ok(Check { id: id.into(), name: name.into(), value, tolerance, pass: ok && seconds < budget, detail, seconds, budget_seconds: budget })
}

fn standard_families(n: usize) -> Result<Vec<(String, NodeSet, WeightSpec)>> {
    let s = NodeSet::equispaced(n)?;
    Ok(vec![
        ("uniform".into(), s.clone(), WeightSpec::uniform(&s)?),
        ("hahn".into(), s.clone(), WeightSpec::hahn(&s, 2.0, 3.5)?),
        ("ahe".into(), s.clone(), WeightSpec::associated_hahn(&s, 2.0, 3.0)?),
    ])
}

fn wall_families(n_half: usize) -> Result<Vec<(String, NodeSet, WeightSpec)>> {
    let s = NodeSet::equispaced(2 * n_half)?;
    Ok(vec![
        ("uniform".into(), s.clone(), WeightSpec::uniform(&s)?),
        ("hahn".into(), s.clone(), WeightSpec::hahn(&s, 2.5, 2.5)?),
        ("ahe".into(), s.clone(), WeightSpec::associated_hahn(&s, 2.5, 2.5)?),
    ])
}

/// Every small instance of every built-in family, standard and wall.
pub fn oracle_battery() -> Result<Vec<(String, Ensemble)>> {
    let mut out = Vec::new();
    for n in 1..=8 {
        for (name, s, w) in standard_families(n)? {
            for k in 0..=n.min(4) {
                out.push((format!("{name} N={n} k={k}"), Ensemble::standard(s.clone(), w.clone(), k)?));
            }
        }
        for (name, s, w) in wall_families(n)? {
            for k in 0..=n.min(4) {
                out.push((format!("{name}-wall N={n} k={k}"), Ensemble::wall_symmetric(s.clone(), w.clone(), k)?));
            }
        }
    }
    for k in 1..=4 {
        for r in 1..=8 {
            let h = HexSpec::new(k, r)?;
            for m in (2..2 * r).step_by(2) {
                let mm = m.min(2 * r - m);
                if 2 * k + mm <= 8 && 2 * k <= 4 {
                    out.push((format!("hexline k={k} R={r} m={m}"), full_line_ensemble(h, m)?));
                }
                if (2 * k + mm) / 2 <= 8 {
                    out.push((format!("hexline-wall k={k} R={r} m={m}"), line_ensemble(h, m)?));
                }
            }
        }
    }
    Ok(out)
}

fn kernel_of(e: &Ensemble) -> Result<KernelMatrix> {
    match e.mode() {
        Mode::Standard => cd_kernel(e, e.k()),
        Mode::WallSymmetric => sym_kernel(e),
    }
}

/// Largest gap between determinantal 1-, 2- and 3-point functions and
/// brute-force enumeration.
pub fn oracle_discrepancy(e: &Ensemble) -> Result<f64> {
    let km = kernel_of(e)?;
    let oracle = enumerate_oracle(e)?;
    let n = km.len();
    let mut worst: f64 = 0.0;
    for a in 0..n {
        worst = worst.max((correlation_fn(&km, &[a])? - oracle.correlation(&[a])).abs());
        for b in a + 1..n {
            worst = worst.max((correlation_fn(&km, &[a, b])? - oracle.correlation(&[a, b])).abs());
            for c in b + 1..n {
                worst = worst.max((correlation_fn(&km, &[a, b, c])? - oracle.correlation(&[a, b, c])).abs());
            }
        }
    }
    Ok(worst)
}

pub fn oracle_equivalence() -> Result<Check> {
    timed("AC1", "oracle equivalence", 1e-10, 10.0, || {
        let battery = oracle_battery()?;
        let mut worst = (0.0f64, String::new());
        for (name, e) in &battery {
            let d = oracle_discrepancy(e)?;
            if d >= worst.0 {
                worst = (d, name.clone());
            }
        }
        Ok((worst.0, worst.0 < 1e-10, format!("{} instances, worst {}", battery.len(), worst.1)))
    })
}

pub fn hand_anchors() -> Result<Check> {
    timed("AC3", "hand-checkable anchors", 1e-12, 10.0, || {
        let s = NodeSet::new(vec![0.0, 1.0, 2.0, 3.0], (0.0, 3.0), None)?;
        let e = Ensemble::standard(s.clone(), WeightSpec::uniform(&s)?, 2)?;
        let km = cd_kernel(&e, 2)?;
        let one = enumerate_oracle(&e)?.correlation(&[0]);
        let tail = extremal_cdf(&km, 2.0, Side::Rightmost, Species::Particle)?;
        let w = NodeSet::new(vec![-2.0, -1.0, 1.0, 2.0], (-2.0, 2.0), None)?;
        let we = Ensemble::wall_symmetric(w.clone(), WeightSpec::uniform(&w)?, 1)?;
        let ks = sym_kernel(&we)?;
        let law = enumerate_oracle(&we)?;
        let errs = [
            (km.get(0, 0) - 0.7).abs(),
            (one - 0.7).abs(),
            (ks.get(0, 0) - 0.2).abs(),
            (ks.get(1, 1) - 0.8).abs(),
            (law.correlation(&[0]) - 0.2).abs(),
            (law.correlation(&[1]) - 0.8).abs(),
            (tail - 0.3).abs(),
        ];
        let worst = errs.iter().cloned().fold(0.0, f64::max);
        Ok((worst, worst <= 1e-12, format!("ρ1(0)={:.15}, wall law {{{:.15}, {:.15}}}, P(max≤2)={tail:.15}", km.get(0, 0), ks.get(0, 0), ks.get(1, 1))))
    })
}

pub fn kernel_identities() -> Result<Check> {
    timed("AC2", "kernel identities", 1e-10, 60.0, || {
        // The q_j construction: orthonormal polynomials of y²w in u = y²,
        // whose recurrence must be the one split_odd reads off the full
        // ensemble.
        let mut qj: f64 = 0.0;
        let mut table: f64 = 0.0;
        for n in [10, 25, 50, 100] {
            for c in [0.1, 0.5, 0.9] {
                let e = HahnFamily { a: 1.0, c }.ensemble(n)?;
                let sub = sym_kernel(&e)?;
                qj = qj.max((sub.entries() - sym_kernel_direct(&e)?.entries()).amax());
                let k = e.k();
                if k >= 2 {
                    let s = split_odd(&compute_recurrence(&e, 2 * k - 1)?, &e)?;
                    let sq = compute_recurrence(&e.squared_half()?, k - 1)?;
                    for j in 0..k - 1 {
                        table = table.max((s.shift[j] - sq.alpha[j]).abs());
                        if j > 0 {
                            table = table.max((s.coupling[j] / sq.beta[j] - 1.0).abs());
                        }
                    }
                }
            }
        }
        let mut cd: f64 = 0.0;
        for n in [20, 60, 100, 200] {
            for c in [0.25, 0.5, 0.75] {
                let s = NodeSet::equispaced(n)?;
                let p = n as f64 + 1.0;
                let k = (c * n as f64).round() as usize;
                let e = Ensemble::standard(s.clone(), WeightSpec::hahn(&s, p, p)?, k)?;
                let km = cd_kernel(&e, k)?;
                let (off, diag) = cd_form_discrepancy(&e, &km)?;
                cd = cd.max(off).max(diag);
            }
        }
        let mut proj: f64 = 0.0;
        let mut trace: f64 = 0.0;
        for n in [50, 100, 200] {
            for c in [0.1, 0.5, 0.9] {
                let e = HahnFamily { a: 1.0, c }.ensemble(n)?;
                let km = sym_kernel(&e)?;
                proj = proj.max(km.projection_residual());
                trace = trace.max((km.trace() - e.k() as f64).abs());
                let full = cd_kernel(&e.full()?, 2 * e.k())?;
                proj = proj.max(full.projection_residual());
                trace = trace.max((full.trace() - 2.0 * e.k() as f64).abs());
            }
        }
        let value = qj.max(table).max(proj).max(trace);
        let ok = qj < 1e-10 && table < 1e-10 && cd < 1e-8 && proj < 1e-10 && trace < 1e-10;
        Ok((value, ok, format!("q_j construction {qj:.1e}, q_j recurrence {table:.1e}, CD forms {cd:.1e} (tol 1e-8), projection {proj:.1e}, trace {trace:.1e}")))
    })
}

pub fn equilibrium_closed_form() -> Result<Check> {
    timed("AC4", "equilibrium vs closed form", 1e-3, 300.0, || {
        let s = NodeSet::equispaced(400)?;
        let w = WeightSpec::hahn(&s, 401.0, 401.0)?;
        let v = extract_potential(&s, &w)?;
        let field = field_from_table(s.values(), &v, -0.5, 0.5)?;
        let mut ok = true;
        let mut worst_kkt: f64 = 0.0;
        let mut parts = Vec::new();
        for c in [0.3, 0.5, 0.6] {
            let em = solve_equilibrium(&field, &NodeDensity::Constant(1.0), c, 512, SolverOptions::default())?;
            let beta = hahn_band_edge(1.0, c);
            let edges = em.band_edges();
            let tol = 0.01f64.max(2.0 * em.h);
            let (lo, hi) = (edges[0], edges[edges.len() - 1]);
            let edge_err = (hi - beta).abs().max((lo + beta).abs());
            let kkt = em.kkt();
            let scale = em.field_scale;
            let viol = kkt.band.max(-kkt.void_min).max(kkt.saturated_max).max(0.0) / scale;
            worst_kkt = worst_kkt.max(viol);
            ok &= edge_err <= tol && viol <= 1e-3;
            parts.push(format!("c={c}: edges ±{hi:.4} vs {beta:.4} (err {edge_err:.1e}, tol {tol:.1e}), KKT {viol:.1e}"));
        }
        let mut ellipse: f64 = 0.0;
        for i in 0..10 {
            let lambda = 0.3 + 0.4 * i as f64;
            let half = 3f64.sqrt() * lambda / 2.0;
            for j in 0..10 {
                let tau = -half * (0.05 + 0.09 * j as f64);
                let f = hahn_closed_forms(0.0, 0.5, lambda, tau)?;
                let beta = hahn_band_edge(f.a_of_tau, 1.0 - f.c_of_tau);
                ellipse = ellipse.max(((2.0 / f.c_of_tau) * beta - f.ellipse_y).abs());
            }
        }
        ok &= ellipse < 1e-10;
        parts.push(format!("ellipse identity {ellipse:.1e}"));
        Ok((worst_kkt, ok, parts.join("; ")))
    })
}

fn suite(a: f64, c: f64, regime: Regime) -> Result<crate::asymptotics::ConvergenceReport> {
    convergence_suite(&HahnFamily { a, c }, regime, &CONVERGENCE_NS, Some(&LimitInputs::hahn(a, c)))
}

fn fmt_errors(e: &[f64]) -> String {
    e.iter().map(|v| format!("{v:.2e}")).collect::<Vec<_>>().join(",")
}

pub fn band_and_wall_rates() -> Result<Check> {
    timed("AC5", "band and wall convergence rates", 0.4, 120.0, || {
        let band = suite(1.0, 0.5, Regime::Band)?;
        let wall = suite(1.0, 0.5, Regime::Wall)?;
        // Distance of the worse slope from −1, the centre of [−1.4, −0.6].
        let value = (band.slope + 1.0).abs().max((wall.slope + 1.0).abs());
        Ok((
            value,
            band.pass && wall.pass,
            format!("band slope {:.3} [{}], wall slope {:.3} [{}]", band.slope, fmt_errors(&band.errors), wall.slope, fmt_errors(&wall.errors)),
        ))
    })
}

pub fn cross_term_decay() -> Result<Check> {
    timed("AC6", "cross-term decay", 1e-6, 60.0, || {
        let r = suite(1.0, 0.5, Regime::CrossTerm)?;
        let e = HahnFamily { a: 1.0, c: 0.1 }.ensemble(200)?;
        let beta = hahn_band_edge(1.0, 0.1);
        let void = cross_term_sup(&e, beta + 0.05, 0.5)?;
        Ok((void, r.pass && void < 1e-6, format!("band slope {:.3} [{}] (need ≤ −0.6), void value at N=200 {void:.2e}", r.slope, fmt_errors(&r.errors))))
    })
}

/// Worst one-point deviation from 0 (void) or 1 (saturated) at nodes at
/// least 0.05 beyond the band edge, N = 200.
pub fn gap_deviation(a: f64, c: f64, saturated: bool) -> Result<f64> {
    let e = HahnFamily { a, c }.ensemble(200)?;
    let km = sym_kernel(&e)?;
    let beta = hahn_band_edge(a, c);
    let xs = km.nodes().values().to_vec();
    let d = km.diagonal();
    let far: Vec<f64> = xs.iter().zip(&d).filter(|(x, _)| **x >= beta + 0.05).map(|(_, v)| if saturated { 1.0 - v } else { *v }).collect();
    if far.is_empty() {
        return Err(Error::InvalidArgument("no nodes at distance 0.05 beyond the band edge".into()));
    }
    Ok(far.into_iter().fold(0.0, f64::max))
}

pub fn gap_regimes() -> Result<Check> {
    timed("AC7", "gap regimes", 1e-3, 30.0, || {
        let void = gap_deviation(1.0, 0.1, false)?;
        let sat = gap_deviation(1.0, 0.9, true)?;
        let value = void.max(sat);
        Ok((value, value < 1e-3, format!("void (c=0.1) max ρ1 {void:.2e}, saturated (c=0.9) max 1−ρ1 {sat:.2e}")))
    })
}

fn tw_cdf(s: f64) -> Result<f64> {
    if s < -10.0 {
        return Ok(0.0);
    }
    Ok(tracy_widom_cdf(s, 60)?.value)
}

/// Centre-line profile of the (k, 2k) half-hexagon with 10⁴ exact samples.
pub fn centre_profile(k: usize, samples: usize) -> Result<ArcticProfile> {
    let h = HexSpec::new(k, 2 * k)?;
    arctic_profile(h, 2 * k, samples, SAMPLE_SEED)
}

pub fn edge_statistics() -> Result<Check> {
    timed("AC8", "Tracy–Widom edge", 1e-8, 600.0, || {
        let mut self_conv: f64 = 0.0;
        for s in [-6.0, -4.0, -3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0] {
            self_conv = self_conv.max((tracy_widom_cdf(s, 40)?.value - tracy_widom_cdf(s, 80)?.value).abs());
        }
        let ks32 = ks_distance(&centre_profile(32, 10_000)?.top, tw_cdf)?;
        let ks64 = ks_distance(&centre_profile(64, 10_000)?.top, tw_cdf)?;
        Ok((self_conv, self_conv < 1e-8 && ks64 < ks32, format!("orders 40/80 differ by {self_conv:.1e}; KS k=32 {ks32:.4}, k=64 {ks64:.4}")))
    })
}

pub fn wall_law() -> Result<Check> {
    timed("AC9", "wall law of the lowest crossing", 3.0, 300.0, || {
        let p = centre_profile(32, 10_000)?;
        let n = p.bottom.len() as f64;
        let mut worst: f64 = 0.0;
        let mut parts = Vec::new();
        for s in [0.6, 1.0, 1.6, 2.2, 3.0] {
            let emp = p.bottom.iter().filter(|z| **z > s).count() as f64 / n;
            let pred = wall_cdf(s, 1.0 / p.theta, 1.0)?;
            let se = (pred * (1.0 - pred) / n).sqrt().max(1.0 / n);
            let z = (emp - pred).abs() / se;
            worst = worst.max(z);
            parts.push(format!("s={s}: {emp:.4} vs {pred:.4} ({z:.2} SE)"));
        }
        Ok((worst, worst <= 3.0, format!("θ={:.4}; {}", p.theta, parts.join(", "))))
    })
}

/// The columns of the (32, 64) picture: the centre and τ = ±0.4·(√3/2)λ,
/// rounded to the nearest even column.
pub fn arctic_columns(h: HexSpec) -> Vec<usize> {
    let r = h.r as f64;
    let off = 0.4 * h.lambda() * h.k as f64;
    let even = |x: f64| (2.0 * (x / 2.0).round()) as usize;
    vec![h.r, even(r - off), even(r + off)]
}

pub fn arctic_picture() -> Result<Check> {
    timed("AC10", "arctic picture", 0.05, 600.0, || {
        let h = HexSpec::new(32, 64)?;
        let t = mcmc_tile(h, default_burn_in(h), MCMC_SEED);
        let probes = corner_probes(&t, 0.15);
        let corners_ok = probes.iter().all(|p| p.tiles > 0 && p.fraction >= 0.99);
        let mut worst: f64 = 0.0;
        let mut parts: Vec<String> = probes.iter().map(|p| format!("{} {}/{}", p.name, p.matching, p.tiles)).collect();
        for m in arctic_columns(h) {
            let p = arctic_profile(h, m, 10_000, SAMPLE_SEED)?;
            let half = p.half_crossing.unwrap_or(0.0);
            worst = worst.max((half - p.predicted_edge).abs());
            parts.push(format!(
                "m={m} τ={:.3}: 1/2-crossing {half:.3}, exact {:.3}, top median {:.3}, ellipse {:.3}",
                p.tau,
                p.exact_half_crossing.unwrap_or(0.0),
                p.top_median,
                p.predicted_edge
            ));
        }
        Ok((worst, corners_ok && worst <= 0.05, parts.join("; ")))
    })
}

/// Sup distance, on the band interior, between the crossing histogram of
/// thinned MCMC states and the exact line law, both normalized to sum to
/// one; the second value is the same distance on the occupation scale.
pub fn mcmc_histogram_distance(h: HexSpec, m: usize, states: &[crate::halfhex::TilingState]) -> Result<(f64, f64)> {
    let e = line_ensemble(h, m)?;
    let km = sym_kernel(&e)?;
    let zs = km.nodes().values().to_vec();
    let mut counts = vec![0usize; zs.len()];
    for t in states {
        for c in t.crossings(m) {
            let z = c as f64 / 2.0;
            let i = zs.iter().position(|v| (v - z).abs() < 1e-9).ok_or(Error::NotANode(z))?;
            counts[i] += 1;
        }
    }
    let kf = h.k as f64;
    let n = states.len() as f64;
    let exact = km.diagonal();
    let interior: BTreeSet<usize> = (0..zs.len()).filter(|&i| exact[i] > 0.05 && exact[i] < 0.95).collect();
    let mut hist: f64 = 0.0;
    let mut occ: f64 = 0.0;
    for &i in &interior {
        let f = counts[i] as f64 / n;
        hist = hist.max((f / kf - exact[i] / kf).abs());
        occ = occ.max((f - exact[i]).abs());
    }
    Ok((hist, occ))
}

pub fn mcmc_cross_validation() -> Result<Check> {
    timed("AC11", "MCMC vs exact line law", 0.05, 300.0, || {
        let h = HexSpec::new(8, 16)?;
        let plan = McmcPlan { chains: 8, states_per_chain: 25, burn_in: default_burn_in(h), thin: (h.r * h.r) as u64 };
        let states = mcmc_states(h, plan, MCMC_SEED);
        let (hist, occ) = mcmc_histogram_distance(h, h.r, &states)?;
        Ok((hist, hist <= 0.05, format!("{} states; histogram sup {hist:.4}, occupation sup {occ:.4}", states.len())))
    })
}
