//! Python bindings. Validation errors raise `ValueError`, numerical
//! failures raise `ArithmeticError`.

use dopewall::asymptotics::{self, LimitKernelSpec};
use dopewall::dpp;
use dopewall::ensembles::{extract_potential, Ensemble, NodeSet, WeightSpec};
use dopewall::equilibrium::{self, field_from_table, solve_equilibrium, SolverOptions};
use dopewall::halfhex::{self, HexSpec};
use dopewall::orthopoly::{cd_kernel_checked, sym_kernel, KernelMatrix};
use dopewall::verify::{self, Suite};
use dopewall::Error;
use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::PrecisionEscalation { .. } | Error::SymmetryViolation(_) | Error::NonConvergence { .. } | Error::Accuracy(_) => {
            PyArithmeticError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

trait OrRaise<T> {
    fn or_raise(self) -> PyResult<T>;
}

impl<T> OrRaise<T> for dopewall::Result<T> {
    fn or_raise(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

/// P, Q explicit or A·|X| + 1, as on the command line.
fn hahn_pq(p: Option<f64>, q: Option<f64>, a: Option<f64>, size: usize) -> PyResult<(f64, f64)> {
    let p = p.or(a.map(|a| a * size as f64 + 1.0)).ok_or_else(|| PyValueError::new_err("give p or A"))?;
    Ok((p, q.unwrap_or(p)))
}

#[allow(clippy::too_many_arguments)]
fn ensemble(
    family: &str,
    k: usize,
    wall: bool,
    n: Option<usize>,
    p: Option<f64>,
    q: Option<f64>,
    a: Option<f64>,
    r: Option<usize>,
    m: Option<usize>,
    log_weights: Option<Vec<f64>>,
) -> PyResult<Ensemble> {
    if family == "halfhex" {
        let (r, m) = r.zip(m).ok_or_else(|| PyValueError::new_err("halfhex needs R and m"))?;
        let h = HexSpec::new(k, r).or_raise()?;
        return if wall { halfhex::line_ensemble(h, m) } else { halfhex::full_line_ensemble(h, m) }.or_raise();
    }
    let n = n.ok_or_else(|| PyValueError::new_err("N is required"))?;
    let nodes = NodeSet::equispaced(if wall { 2 * n } else { n }).or_raise()?;
    let weight = match family {
        "uniform" => WeightSpec::uniform(&nodes),
        "hahn" => {
            let (p, q) = hahn_pq(p, q, a, nodes.len())?;
            WeightSpec::hahn(&nodes, p, q)
        }
        "ahe" => {
            let (p, q) = hahn_pq(p, q, a, nodes.len())?;
            WeightSpec::associated_hahn(&nodes, p, q)
        }
        "custom" => WeightSpec::custom(&nodes, log_weights.ok_or_else(|| PyValueError::new_err("custom needs log_weights"))?),
        other => return Err(PyValueError::new_err(format!("unknown family {other}"))),
    }
    .or_raise()?;
    if wall { Ensemble::wall_symmetric(nodes, weight, k) } else { Ensemble::standard(nodes, weight, k) }.or_raise()
}

/// A correlation kernel on a finite node set.
#[pyclass(frozen)]
struct Kernel {
    inner: KernelMatrix,
}

#[pymethods]
impl Kernel {
    #[getter]
    fn nodes(&self) -> Vec<f64> {
        self.inner.nodes().values().to_vec()
    }

    fn matrix(&self) -> Vec<Vec<f64>> {
        let n = self.inner.len();
        (0..n).map(|i| (0..n).map(|j| self.inner.get(i, j)).collect()).collect()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn trace(&self) -> f64 {
        self.inner.trace()
    }

    fn projection_residual(&self) -> f64 {
        self.inner.projection_residual()
    }

    /// det[K(x_i, x_j)] over the given node indices.
    fn correlation(&self, sites: Vec<usize>) -> PyResult<f64> {
        dpp::correlation_fn(&self.inner, &sites).or_raise()
    }

    fn count_distribution(&self, window: Vec<usize>) -> PyResult<Vec<f64>> {
        Ok(dpp::count_distribution(&self.inner, &window).or_raise()?.probabilities)
    }

    fn gap_probability(&self, sites: Vec<usize>) -> f64 {
        dpp::gap_probability(&self.inner, &sites)
    }

    /// Exact samples as lists of occupied node values.
    fn sample(&self, py: Python<'_>, count: usize, seed: u64) -> PyResult<Vec<Vec<f64>>> {
        let batch = py.detach(|| dpp::sample_batch(&self.inner, count, seed)).or_raise()?;
        let xs = self.inner.nodes().values();
        Ok(batch.iter().map(|c| c.indices.iter().map(|&i| xs[i]).collect()).collect())
    }

    fn __repr__(&self) -> String {
        format!("Kernel(nodes={}, rank={}, kind={:?})", self.inner.len(), self.inner.rank(), self.inner.kind())
    }
}

/// Christoffel–Darboux kernel (standard) or the wall-symmetric kernel on
/// the positive half (`wall=True`, 2N nodes, k particles on the positive half).
#[pyfunction]
#[pyo3(signature = (family, k, *, wall=false, n=None, p=None, q=None, a=None, r=None, m=None, log_weights=None))]
#[allow(clippy::too_many_arguments)]
fn kernel(
    py: Python<'_>,
    family: &str,
    k: usize,
    wall: bool,
    n: Option<usize>,
    p: Option<f64>,
    q: Option<f64>,
    a: Option<f64>,
    r: Option<usize>,
    m: Option<usize>,
    log_weights: Option<Vec<f64>>,
) -> PyResult<Kernel> {
    let e = ensemble(family, k, wall, n, p, q, a, r, m, log_weights)?;
    let inner = py.detach(|| if wall { sym_kernel(&e) } else { cd_kernel_checked(&e, e.k()) }).or_raise()?;
    Ok(Kernel { inner })
}

/// Every configuration with its probability, and log Z.
#[pyfunction]
#[pyo3(signature = (family, k, *, wall=false, n=None, p=None, q=None, a=None))]
#[allow(clippy::too_many_arguments)]
fn oracle(family: &str, k: usize, wall: bool, n: Option<usize>, p: Option<f64>, q: Option<f64>, a: Option<f64>) -> PyResult<(f64, Vec<(Vec<usize>, f64)>)> {
    let e = ensemble(family, k, wall, n, p, q, a, None, None, None)?;
    let en = dpp::enumerate_oracle(&e).or_raise()?;
    Ok((en.log_z, en.configurations))
}

#[pyfunction]
#[pyo3(signature = (s, order=40))]
fn tracy_widom_cdf(s: f64, order: usize) -> PyResult<f64> {
    Ok(asymptotics::tracy_widom_cdf(s, order).or_raise()?.value)
}

#[pyfunction]
#[pyo3(signature = (s, delta0, rho0=1.0))]
fn wall_cdf(s: f64, delta0: f64, rho0: f64) -> PyResult<f64> {
    asymptotics::wall_cdf(s, delta0, rho0).or_raise()
}

/// "sine", "sine_wall" or "airy" at (ξ, η).
#[pyfunction]
fn limit_kernel(name: &str, xi: f64, eta: f64) -> PyResult<f64> {
    let spec = match name {
        "sine" => LimitKernelSpec::Sine,
        "sine_wall" => LimitKernelSpec::SineWall,
        "airy" => LimitKernelSpec::Airy,
        other => return Err(PyValueError::new_err(format!("unknown limit kernel {other}"))),
    };
    spec.eval(xi, eta).or_raise()
}

#[pyfunction]
fn hahn_band_edge(a: f64, c: f64) -> f64 {
    equilibrium::hahn_band_edge(a, c)
}

/// Hahn (P = Q = A·N + 1) equilibrium measure: grid, density, l_c and
/// regions as (kind, lo, hi).
#[pyfunction]
#[pyo3(signature = (c, *, a=1.0, n=400, gridsize=512))]
#[allow(clippy::type_complexity)]
fn hahn_equilibrium(py: Python<'_>, c: f64, a: f64, n: usize, gridsize: usize) -> PyResult<(Vec<f64>, Vec<f64>, f64, Vec<(String, f64, f64)>)> {
    let nodes = NodeSet::equispaced(n).or_raise()?;
    let p = a * n as f64 + 1.0;
    let w = WeightSpec::hahn(&nodes, p, p).or_raise()?;
    let v = extract_potential(&nodes, &w).or_raise()?;
    let field = field_from_table(nodes.values(), &v, -0.5, 0.5).or_raise()?;
    let rho0 = nodes.density().cloned().expect("equispaced nodes carry a density");
    let em = py.detach(|| solve_equilibrium(&field, &rho0, c, gridsize, SolverOptions::default())).or_raise()?;
    let regions = em.regions.iter().map(|r| (format!("{:?}", r.kind).to_lowercase(), r.lo, r.hi)).collect();
    Ok((em.grid, em.density, em.multiplier, regions))
}

/// SVG of a (k, R)-half-hexagon tiling after `sweeps` chain sweeps.
#[pyfunction]
#[pyo3(signature = (k, r, sweeps=0, seed=0))]
fn tiling_svg(k: usize, r: usize, sweeps: u64, seed: u64) -> PyResult<String> {
    let h = HexSpec::new(k, r).or_raise()?;
    Ok(halfhex::svg_string(&halfhex::mcmc_tile(h, sweeps, seed)))
}

/// Runs an acceptance suite; one (id, passed, line) per check.
#[pyfunction]
fn run_suite(py: Python<'_>, suite: &str) -> PyResult<Vec<(String, bool, String)>> {
    let s: Suite = suite.parse().or_raise()?;
    let report = py.detach(|| verify::run_suite(s)).or_raise()?;
    Ok(report.checks.iter().map(|c| (c.id.to_string(), c.pass, c.line())).collect())
}

#[pymodule(name = "dopewall")]
pub fn dopewall_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Kernel>()?;
    m.add_function(wrap_pyfunction!(kernel, m)?)?;
    m.add_function(wrap_pyfunction!(oracle, m)?)?;
    m.add_function(wrap_pyfunction!(tracy_widom_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(wall_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(limit_kernel, m)?)?;
    m.add_function(wrap_pyfunction!(hahn_band_edge, m)?)?;
    m.add_function(wrap_pyfunction!(hahn_equilibrium, m)?)?;
    m.add_function(wrap_pyfunction!(tiling_svg, m)?)?;
    m.add_function(wrap_pyfunction!(run_suite, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
