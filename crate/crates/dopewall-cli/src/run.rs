use std::path::{Path, PathBuf};

use dopewall::asymptotics::{convergence_suite, tracy_widom_cdf, wall_cdf, CdfValue, HahnFamily, LimitInputs, LimitKernelSpec, Regime};
use dopewall::dpp::{count_distribution, enumerate_oracle, sample_batch};
use dopewall::ensembles::{extract_potential, Ensemble, Mode, NodeDensity, NodeSet, WeightSpec};
use dopewall::equilibrium::{field_from_table, solve_equilibrium, SolverOptions};
use dopewall::halfhex::{arctic_profile, default_burn_in, full_line_ensemble, line_ensemble, mcmc_tile, render_svg, HexSpec, TilingState};
use dopewall::io::{self, EquilibriumFile, KernelSidecar};
use dopewall::orthopoly::{cd_kernel_checked, sym_kernel, KernelMatrix};
use dopewall::verify::{suite_checks, Suite};
use serde::Serialize;

use crate::args::*;
use crate::error::CliError;
use crate::manifest::{self, RunManifest};

/// Files a command wrote, in order; the first one names the manifest.
#[derive(Debug, Default)]
pub struct Outcome {
    pub outputs: Vec<PathBuf>,
}

fn say(line: impl AsRef<str>) {
    println!("{}", line.as_ref());
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn need<T>(v: Option<T>, flag: &str, family: Family) -> Result<T, CliError> {
    v.ok_or_else(|| usage(format!("--{flag} is required for --family {}", family_name(family))))
}

fn family_name(f: Family) -> &'static str {
    match f {
        Family::Uniform => "uniform",
        Family::Hahn => "hahn",
        Family::Ahe => "ahe",
        Family::Halfhex => "halfhex",
        Family::Table => "table",
    }
}

fn read_table(path: &Path) -> Result<(NodeSet, Vec<f64>), CliError> {
    let (xs, lw) = io::read_weight_table(path)?;
    if xs.len() < 2 {
        return Err(CliError::Validation("weight table needs at least two nodes".into()));
    }
    // The support extends half a mean spacing past the outer nodes.
    let h = (xs[xs.len() - 1] - xs[0]) / (xs.len() - 1) as f64;
    let (a, b) = (xs[0] - h / 2.0, xs[xs.len() - 1] + h / 2.0);
    let nodes = NodeSet::new(xs, (a, b), Some(NodeDensity::Constant(1.0 / (b - a))))?;
    Ok((nodes, lw))
}

/// Hahn-type P, Q: explicit, or A·|X| + 1.
fn hahn_pq(p: Option<f64>, q: Option<f64>, a: Option<f64>, size: usize, family: Family) -> Result<(f64, f64), CliError> {
    let p = match (p, a) {
        (Some(p), _) => p,
        (None, Some(a)) => a * size as f64 + 1.0,
        (None, None) => return Err(usage(format!("--p or --A is required for --family {}", family_name(family)))),
    };
    Ok((p, q.unwrap_or(p)))
}

fn weight_for(family: Family, nodes: &NodeSet, p: Option<f64>, q: Option<f64>, a: Option<f64>) -> Result<WeightSpec, CliError> {
    Ok(match family {
        Family::Uniform => WeightSpec::uniform(nodes)?,
        Family::Hahn => {
            let (p, q) = hahn_pq(p, q, a, nodes.len(), family)?;
            WeightSpec::hahn(nodes, p, q)?
        }
        Family::Ahe => {
            let (p, q) = hahn_pq(p, q, a, nodes.len(), family)?;
            WeightSpec::associated_hahn(nodes, p, q)?
        }
        Family::Halfhex | Family::Table => unreachable!("handled by the caller"),
    })
}

pub fn build_ensemble(a: &EnsembleArgs) -> Result<Ensemble, CliError> {
    match a.family {
        Family::Halfhex => {
            let h = HexSpec::new(a.k, need(a.r, "R", a.family)?)?;
            let m = need(a.m, "m", a.family)?;
            Ok(match a.mode {
                ModeArg::Wall => line_ensemble(h, m)?,
                ModeArg::Standard => full_line_ensemble(h, m)?,
            })
        }
        family => {
            let (nodes, weight) = if family == Family::Table {
                let (nodes, lw) = read_table(&need(a.weights.clone(), "weights", family)?)?;
                let w = WeightSpec::custom(&nodes, lw)?;
                (nodes, w)
            } else {
                let n = need(a.n, "N", family)?;
                let nodes = NodeSet::equispaced(if a.mode == ModeArg::Wall { 2 * n } else { n })?;
                let w = weight_for(family, &nodes, a.p, a.q, a.a)?;
                (nodes, w)
            };
            Ok(match a.mode {
                ModeArg::Standard => Ensemble::standard(nodes, weight, a.k)?,
                ModeArg::Wall => Ensemble::wall_symmetric(nodes, weight, a.k)?,
            })
        }
    }
}

pub fn build_kernel(e: &Ensemble) -> Result<KernelMatrix, CliError> {
    Ok(match e.mode() {
        Mode::Standard => cd_kernel_checked(e, e.k())?,
        Mode::WallSymmetric => sym_kernel(e)?,
    })
}

/// `i,j,..` or `a..b` (half-open).
pub fn parse_window(s: &str) -> Result<Vec<usize>, CliError> {
    let bad = || usage(format!("cannot read window {s:?}"));
    if let Some((lo, hi)) = s.split_once("..") {
        let lo: usize = lo.trim().parse().map_err(|_| bad())?;
        let hi: usize = hi.trim().parse().map_err(|_| bad())?;
        return Ok((lo..hi).collect());
    }
    s.split(',').map(|t| t.trim().parse().map_err(|_| bad())).collect()
}

fn kernel(a: &KernelArgs) -> Result<Outcome, CliError> {
    let e = build_ensemble(&a.ensemble)?;
    let km = build_kernel(&e)?;
    let side = KernelSidecar {
        family: family_name(a.ensemble.family).into(),
        n: e.n(),
        k: e.k(),
        kind: km.kind(),
        precision_bits: km.precision_bits(),
    };
    io::write_kernel(&a.output, &km, &side)?;
    let mut out = Outcome { outputs: vec![a.output.clone(), io::sidecar_path(&a.output)] };
    say(format!("kernel {}x{} trace {} projection residual {:e}", km.len(), km.len(), km.trace(), km.projection_residual()));
    match (&a.window, &a.counts_output) {
        (Some(w), Some(path)) => {
            let cd = count_distribution(&km, &parse_window(w)?)?;
            io::write_json(path, &cd.probabilities)?;
            out.outputs.push(path.clone());
        }
        (None, None) => {}
        _ => return Err(usage("--window and --counts-output go together")),
    }
    Ok(out)
}

fn sample(a: &SampleArgs) -> Result<Outcome, CliError> {
    let e = build_ensemble(&a.ensemble)?;
    let km = build_kernel(&e)?;
    let batch = sample_batch(&km, a.count, a.seed)?;
    io::write_samples(&a.output, km.nodes(), &batch)?;
    say(format!("{} samples of {} particles", batch.len(), e.k()));
    Ok(Outcome { outputs: vec![a.output.clone()] })
}

#[derive(Serialize)]
struct OracleRow {
    indices: Vec<usize>,
    probability: f64,
}

/// Wall-symmetric laws live on the positive half; `nodes` lists the sites
/// that `indices` refer to.
#[derive(Serialize)]
struct OracleFile {
    mode: Mode,
    nodes: Vec<f64>,
    log_z: f64,
    one_point: Vec<f64>,
    configurations: Vec<OracleRow>,
}

fn oracle(a: &OracleArgs) -> Result<Outcome, CliError> {
    let e = build_ensemble(&a.ensemble)?;
    let en = enumerate_oracle(&e)?;
    let nodes = match e.mode() {
        Mode::Standard => e.nodes().values().to_vec(),
        Mode::WallSymmetric => e.nodes().values()[e.n()..].to_vec(),
    };
    let file = OracleFile {
        mode: e.mode(),
        one_point: en.marginals(nodes.len()),
        nodes,
        log_z: en.log_z,
        configurations: en.configurations.iter().map(|(s, p)| OracleRow { indices: s.clone(), probability: *p }).collect(),
    };
    io::write_json(&a.output, &file)?;
    say(format!("{} configurations, log Z = {}", file.configurations.len(), file.log_z));
    Ok(Outcome { outputs: vec![a.output.clone()] })
}

fn equilibrium(a: &EquilibriumArgs) -> Result<Outcome, CliError> {
    let (nodes, weight) = match a.family {
        Family::Table => {
            let path = a.weights.clone().ok_or_else(|| usage("--weights is required for --family table"))?;
            let (nodes, lw) = read_table(&path)?;
            let w = WeightSpec::custom(&nodes, lw)?;
            (nodes, w)
        }
        Family::Halfhex => return Err(usage("use --family table with an exported half-hexagon weight")),
        f => {
            let nodes = NodeSet::equispaced(a.n)?;
            let w = weight_for(f, &nodes, a.p, a.q, a.a)?;
            (nodes, w)
        }
    };
    let v = extract_potential(&nodes, &weight)?;
    let (lo, hi) = nodes.interval();
    let field = field_from_table(nodes.values(), &v, lo, hi)?;
    let rho0 = nodes.density().cloned().unwrap_or(NodeDensity::Constant(1.0 / (hi - lo)));
    let opts = SolverOptions { tolerance: a.tolerance, max_iterations: a.max_iterations };
    let em = solve_equilibrium(&field, &rho0, a.c, a.gridsize, opts)?;
    let file = EquilibriumFile::from(&em);
    io::write_json(&a.output, &file)?;
    say(format!("{:<10} {:>10} {:>10}", "region", "from", "to"));
    for r in &file.regions {
        say(format!("{:<10} {:>10.5} {:>10.5}", format!("{:?}", r.kind).to_lowercase(), r.lo, r.hi));
    }
    say(format!("l_c = {}, iterations {}, mass error {:e}", file.l_c, file.residuals.iterations, file.residuals.mass_error));
    Ok(Outcome { outputs: vec![a.output.clone()] })
}

fn points(p: &Points) -> Result<Vec<f64>, CliError> {
    match (p.s, p.from, p.to, p.step) {
        (Some(s), None, None, None) => Ok(vec![s]),
        (None, Some(from), Some(to), Some(step)) if step > 0.0 && to >= from => {
            let n = ((to - from) / step + 1e-9).floor() as usize;
            Ok((0..=n).map(|i| from + i as f64 * step).collect())
        }
        _ => Err(usage("give either --s or all of --from --to --step (step > 0, to ≥ from)")),
    }
}

fn emit_cdf(values: &[CdfValue], output: &Option<PathBuf>) -> Result<Outcome, CliError> {
    say("s,value,order");
    for v in values {
        say(format!("{},{},{}", v.s, v.value, v.order));
        if let Some(w) = &v.warning {
            eprintln!("warning at s = {}: {w}", v.s);
        }
    }
    let mut out = Outcome::default();
    if let Some(path) = output {
        io::write_cdf(path, values)?;
        out.outputs.push(path.clone());
    }
    Ok(out)
}

fn limits(c: &LimitsCommand) -> Result<Outcome, CliError> {
    match c {
        LimitsCommand::Tw(a) => {
            let values = points(&a.points)?.into_iter().map(|s| tracy_widom_cdf(s, a.order)).collect::<dopewall::Result<Vec<_>>>()?;
            emit_cdf(&values, &a.output)
        }
        LimitsCommand::Wall(a) => {
            // The wall law is a finite determinant; there is no quadrature order.
            let values = points(&a.points)?
                .into_iter()
                .map(|s| Ok(CdfValue { s, value: wall_cdf(s, a.delta0, a.rho0)?, order: 0, warning: None }))
                .collect::<dopewall::Result<Vec<_>>>()?;
            emit_cdf(&values, &a.output)
        }
        LimitsCommand::Kernel(a) => {
            let spec = match a.kernel {
                LimitKernelArg::Sine => LimitKernelSpec::Sine,
                LimitKernelArg::SineWall => LimitKernelSpec::SineWall,
                LimitKernelArg::Airy => LimitKernelSpec::Airy,
                LimitKernelArg::DiscreteWall => LimitKernelSpec::DiscreteSineWall {
                    delta0: a.delta0.ok_or_else(|| usage("--delta0 is required for the discrete wall kernel"))?,
                    rho0: a.rho0,
                },
            };
            say(spec.eval(a.xi, a.eta)?.to_string());
            Ok(Outcome::default())
        }
        LimitsCommand::Suite(a) => {
            let regime: Regime = a.regime.parse()?;
            let report = convergence_suite(&HahnFamily { a: a.a, c: a.c }, regime, &a.n_list, Some(&LimitInputs::hahn(a.a, a.c)))?;
            io::write_json(&a.output, &report)?;
            let errs: Vec<String> = report.errors.iter().map(|e| format!("{e:.3e}")).collect();
            say(format!("{} {:?}: sup errors [{}], slope {:.4}", report.family, report.regime, errs.join(", "), report.slope));
            if !report.pass {
                return Err(CliError::Numerical(format!("slope {:.4} outside the accepted range", report.slope)));
            }
            Ok(Outcome { outputs: vec![a.output.clone()] })
        }
    }
}

fn halfhex(c: &HalfhexCommand) -> Result<Outcome, CliError> {
    match c {
        HalfhexCommand::Tile(a) => {
            let h = HexSpec::new(a.k, a.r)?;
            let sweeps = a.sweeps.unwrap_or_else(|| default_burn_in(h));
            let seed = match (a.seed, sweeps) {
                (Some(s), _) => s,
                (None, 0) => 0,
                (None, _) => return Err(usage("--seed is required when the chain runs (--sweeps > 0)")),
            };
            let t = mcmc_tile(h, sweeps, seed);
            render_svg(&t, &a.output)?;
            let mut out = Outcome { outputs: vec![a.output.clone()] };
            if let Some(p) = &a.state {
                io::write_json(p, &t)?;
                out.outputs.push(p.clone());
            }
            say(format!("{} tiles after {sweeps} sweeps", h.tile_count()));
            Ok(out)
        }
        HalfhexCommand::Line(a) => {
            let h = HexSpec::new(a.k, a.r)?;
            // Same draws as `sample_line`; the kernel lives on the positive half.
            let km = sym_kernel(&line_ensemble(h, a.m)?)?;
            let batch = sample_batch(&km, a.count, a.seed)?;
            io::write_samples(&a.output, km.nodes(), &batch)?;
            say(format!("{} samples of column {}", batch.len(), a.m));
            Ok(Outcome { outputs: vec![a.output.clone()] })
        }
        HalfhexCommand::Profile(a) => {
            let p = arctic_profile(HexSpec::new(a.k, a.r)?, a.m, a.count, a.seed)?;
            io::write_profile(&a.output, &p)?;
            let mut out = Outcome { outputs: vec![a.output.clone()] };
            if let Some(s) = &a.summary {
                io::write_json(s, &p)?;
                out.outputs.push(s.clone());
            }
            let fmt = |v: Option<f64>| v.map_or("none".to_string(), |v| format!("{v:.4}"));
            say(format!(
                "tau {:.4}: 1/2-crossing {} (exact {}), predicted edge {:.4}",
                p.tau,
                fmt(p.half_crossing),
                fmt(p.exact_half_crossing),
                p.predicted_edge
            ));
            Ok(out)
        }
        HalfhexCommand::Render(a) => {
            let t: TilingState = io::read_json(&a.state)?;
            t.validate()?;
            render_svg(&t, &a.output)?;
            Ok(Outcome { outputs: vec![a.output.clone()] })
        }
    }
}

fn verify(a: &VerifyArgs) -> Result<Outcome, CliError> {
    let suite: Suite = a.suite.parse()?;
    let mut failed = Vec::new();
    for check in suite_checks(suite) {
        let c = check()?;
        say(c.line());
        if !c.pass {
            failed.push(c.id);
        }
    }
    if failed.is_empty() {
        Ok(Outcome::default())
    } else {
        Err(CliError::Numerical(format!("failed: {}", failed.join(", "))))
    }
}

fn replay(a: &ReplayArgs) -> Result<Outcome, CliError> {
    let m: RunManifest = io::read_json(&a.manifest)?;
    let cli = crate::parse(&m.argv).map_err(|e| CliError::Validation(format!("manifest arguments do not parse: {e}")))?;
    if matches!(cli.command, Command::Replay(_)) {
        return Err(CliError::Validation("a manifest cannot replay a replay".into()));
    }
    let again = execute(&cli, &m.argv)?;
    let mut mismatched = Vec::new();
    for (old, new) in m.outputs.iter().zip(&again.outputs) {
        let same = old == new;
        say(format!("{} {} {}", if same { "same" } else { "DIFFERS" }, old.path.display(), new.sha256));
        if !same {
            mismatched.push(old.path.display().to_string());
        }
    }
    if m.outputs.len() != again.outputs.len() {
        return Err(CliError::Numerical(format!("{} outputs recorded, {} produced", m.outputs.len(), again.outputs.len())));
    }
    if !mismatched.is_empty() {
        return Err(CliError::Numerical(format!("outputs differ: {}", mismatched.join(", "))));
    }
    Ok(Outcome::default())
}

/// Runs the command and writes its manifest when it produced files (or
/// when `--manifest` asks for one).
pub fn execute(cli: &Cli, argv: &[String]) -> Result<RunManifest, CliError> {
    let out = match &cli.command {
        Command::Kernel(a) => kernel(a)?,
        Command::Sample(a) => sample(a)?,
        Command::Oracle(a) => oracle(a)?,
        Command::Equilibrium(a) => equilibrium(a)?,
        Command::Limits(c) => limits(c)?,
        Command::Halfhex(c) => halfhex(c)?,
        Command::Verify(a) => verify(a)?,
        Command::Replay(a) => replay(a)?,
    };
    let m = manifest::build(argv, &cli.command, &out.outputs)?;
    let path = cli.manifest.clone().or_else(|| out.outputs.first().map(|p| manifest::default_path(p)));
    if let (Some(path), false) = (path, matches!(cli.command, Command::Replay(_))) {
        io::write_json(&path, &m)?;
    }
    Ok(m)
}
