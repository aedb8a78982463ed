//! Python bindings: particle generation, direct and FMM velocity evaluation,
//! error reports and the single-run driver.

use std::path::PathBuf;

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;

use vortex_fmm::errorlab::compare as core_compare;
use vortex_fmm::expansions::{truncation_bound as core_truncation_bound, BoundParams};
use vortex_fmm::harness::{run_single as core_run_single, SingleArgs};
use vortex_fmm::model::{read_particles as core_read, write_particles as core_write};
use vortex_fmm::{Distribution, Domain, FmmConfig, FmmError, KernelKind, Particle, Velocity};

fn to_py(e: FmmError) -> PyErr {
    match e {
        FmmError::Io { .. } => PyOSError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn parse<T: std::str::FromStr<Err = FmmError>>(s: &str) -> PyResult<T> {
    s.parse().map_err(to_py)
}

#[pyclass(name = "Particle", from_py_object)]
#[derive(Clone, Copy, Debug)]
pub struct PyParticle {
    #[pyo3(get, set)]
    pub x: f64,
    #[pyo3(get, set)]
    pub y: f64,
    #[pyo3(get, set)]
    pub gamma: f64,
    #[pyo3(get, set)]
    pub sigma: f64,
}

impl From<Particle> for PyParticle {
    fn from(p: Particle) -> Self {
        PyParticle {
            x: p.x,
            y: p.y,
            gamma: p.gamma,
            sigma: p.sigma,
        }
    }
}

impl From<&PyParticle> for Particle {
    fn from(p: &PyParticle) -> Self {
        Particle::new(p.x, p.y, p.gamma, p.sigma)
    }
}

#[pymethods]
impl PyParticle {
    #[new]
    #[pyo3(signature = (x, y, gamma, sigma = 0.0))]
    fn new(x: f64, y: f64, gamma: f64, sigma: f64) -> Self {
        PyParticle { x, y, gamma, sigma }
    }

    fn __repr__(&self) -> String {
        format!("Particle(x={}, y={}, gamma={}, sigma={})", self.x, self.y, self.gamma, self.sigma)
    }
}

fn to_core(ps: &[PyParticle]) -> Vec<Particle> {
    ps.iter().map(Particle::from).collect()
}

#[pyclass(name = "Domain", from_py_object)]
#[derive(Clone, Copy, Debug)]
pub struct PyDomain {
    inner: Domain,
}

#[pymethods]
impl PyDomain {
    #[new]
    #[pyo3(signature = (xmin = 0.0, ymin = 0.0, side = 1.0))]
    fn new(xmin: f64, ymin: f64, side: f64) -> PyResult<Self> {
        Ok(PyDomain {
            inner: Domain::new(xmin, ymin, side).map_err(to_py)?,
        })
    }

    /// Smallest square containing every particle.
    #[staticmethod]
    fn bounding(particles: Vec<PyParticle>) -> PyResult<Self> {
        Ok(PyDomain {
            inner: Domain::bounding(&to_core(&particles)).map_err(to_py)?,
        })
    }

    #[getter]
    fn xmin(&self) -> f64 {
        self.inner.xmin
    }

    #[getter]
    fn ymin(&self) -> f64 {
        self.inner.ymin
    }

    #[getter]
    fn side(&self) -> f64 {
        self.inner.side
    }

    fn contains(&self, x: f64, y: f64) -> bool {
        self.inner.contains(x, y)
    }

    fn __repr__(&self) -> String {
        format!("Domain(xmin={}, ymin={}, side={})", self.inner.xmin, self.inner.ymin, self.inner.side)
    }
}

#[pyclass(name = "RunStats", get_all, skip_from_py_object)]
#[derive(Clone, Debug)]
pub struct PyRunStats {
    pub n: usize,
    pub levels: u32,
    pub order: usize,
    pub t_build_ms: f64,
    pub t_upward_ms: f64,
    pub t_m2l_ms: f64,
    pub t_downward_ms: f64,
    pub t_near_ms: f64,
    pub t_total_ms: f64,
    pub near_pair_count: u64,
    pub m2l_count: u64,
    pub blob_guard_exceeded: bool,
}

#[pymethods]
impl PyRunStats {
    fn __repr__(&self) -> String {
        format!(
            "RunStats(n={}, levels={}, order={}, t_total_ms={:.3}, m2l_count={}, near_pair_count={})",
            self.n, self.levels, self.order, self.t_total_ms, self.m2l_count, self.near_pair_count
        )
    }
}

#[pyclass(name = "ErrorReport", get_all, skip_from_py_object)]
#[derive(Clone, Debug)]
pub struct PyErrorReport {
    pub max_abs: f64,
    pub max_rel: Option<f64>,
    pub rms_abs: f64,
    pub rms_rel: Option<f64>,
    pub max_direct: f64,
    pub worst_index: usize,
    pub abs_errors: Vec<f64>,
}

#[pymethods]
impl PyErrorReport {
    fn __repr__(&self) -> String {
        format!(
            "ErrorReport(max_abs={:e}, max_rel={:?}, rms_abs={:e}, worst_index={})",
            self.max_abs, self.max_rel, self.rms_abs, self.worst_index
        )
    }
}

fn domain_or_unit(domain: Option<PyDomain>) -> Domain {
    domain.map_or_else(Domain::unit, |d| d.inner)
}

fn pairs(v: &[Velocity]) -> Vec<(f64, f64)> {
    v.iter().map(|w| (w.u, w.v)).collect()
}

fn velocities(v: &[(f64, f64)]) -> Vec<Velocity> {
    v.iter().map(|&(u, w)| Velocity::new(u, w)).collect()
}

/// Particles from one of `uniform_random`, `gaussian_patch`, `two_patches`.
#[pyfunction]
#[pyo3(signature = (distribution, n, seed, domain = None, sigma = 0.0))]
fn generate_particles(
    distribution: &str,
    n: usize,
    seed: u64,
    domain: Option<PyDomain>,
    sigma: f64,
) -> PyResult<Vec<PyParticle>> {
    let dist: Distribution = parse(distribution)?;
    let ps = vortex_fmm::generate_particles(dist, n, seed, &domain_or_unit(domain), sigma).map_err(to_py)?;
    Ok(ps.into_iter().map(PyParticle::from).collect())
}

/// O(N M) velocities `(u, v)` induced at `targets` by `particles`.
#[pyfunction]
#[pyo3(signature = (targets, particles, kernel = "point"))]
fn velocity_direct(
    py: Python<'_>,
    targets: Vec<(f64, f64)>,
    particles: Vec<PyParticle>,
    kernel: &str,
) -> PyResult<Vec<(f64, f64)>> {
    let kind: KernelKind = parse(kernel)?;
    let sources = to_core(&particles);
    Ok(py.detach(|| pairs(&vortex_fmm::velocity_direct(&targets, &sources, kind))))
}

/// FMM velocities at the particles themselves, with run statistics.
#[pyfunction]
#[pyo3(signature = (particles, levels, p, kernel = "point", domain = None))]
fn evaluate(
    py: Python<'_>,
    particles: Vec<PyParticle>,
    levels: u32,
    p: usize,
    kernel: &str,
    domain: Option<PyDomain>,
) -> PyResult<(Vec<(f64, f64)>, PyRunStats)> {
    let config = FmmConfig::new(levels, p, parse(kernel)?).map_err(to_py)?;
    let ps = to_core(&particles);
    let d = domain_or_unit(domain);
    let out = py.detach(|| vortex_fmm::evaluate(&ps, &d, &config)).map_err(to_py)?;
    let s = &out.stats;
    let ms = |t: std::time::Duration| t.as_secs_f64() * 1e3;
    let stats = PyRunStats {
        n: s.n,
        levels: s.levels,
        order: s.order,
        t_build_ms: ms(s.t_build),
        t_upward_ms: ms(s.t_upward),
        t_m2l_ms: ms(s.t_m2l),
        t_downward_ms: ms(s.t_downward),
        t_near_ms: ms(s.t_near),
        t_total_ms: ms(s.t_total),
        near_pair_count: s.near_pair_count,
        m2l_count: s.m2l_count,
        blob_guard_exceeded: s.blob_guard_exceeded,
    };
    Ok((pairs(&out.velocities), stats))
}

/// Per-target and aggregate differences between two velocity fields.
#[pyfunction]
fn compare(fmm: Vec<(f64, f64)>, direct: Vec<(f64, f64)>, positions: Vec<(f64, f64)>) -> PyResult<PyErrorReport> {
    let r = core_compare(&velocities(&fmm), &velocities(&direct), &positions, None).map_err(to_py)?;
    Ok(PyErrorReport {
        max_abs: r.max_abs,
        max_rel: r.max_rel,
        rms_abs: r.rms_abs,
        rms_rel: r.rms_rel,
        max_direct: r.max_direct,
        worst_index: r.worst_index,
        abs_errors: r.per_target.iter().map(|t| t.abs_error).collect(),
    })
}

/// `A rho^(p+1) / (1 - rho)`.
#[pyfunction]
fn truncation_bound(amplitude: f64, rho: f64, p: usize) -> PyResult<f64> {
    let params = BoundParams::new(amplitude, rho).map_err(to_py)?;
    core_truncation_bound(&params, p).map_err(to_py)
}

#[pyfunction]
fn read_particles(path: PathBuf) -> PyResult<Vec<PyParticle>> {
    Ok(core_read(&path).map_err(to_py)?.into_iter().map(PyParticle::from).collect())
}

#[pyfunction]
fn write_particles(path: PathBuf, particles: Vec<PyParticle>) -> PyResult<()> {
    core_write(&path, &to_core(&particles)).map_err(to_py)
}

/// Runs one FMM-versus-direct comparison, writes the three CSV files into
/// `out_dir` and returns the summary line.
#[pyfunction]
#[pyo3(signature = (
    n = 1000, levels = 3, p = 8, seed = 1, distribution = "uniform_random", kernel = "point",
    sigma = 0.0, particles = None, out_dir = PathBuf::from("."), map_grid = 8
))]
#[allow(clippy::too_many_arguments)]
fn run_single(
    py: Python<'_>,
    n: usize,
    levels: u32,
    p: usize,
    seed: u64,
    distribution: &str,
    kernel: &str,
    sigma: f64,
    particles: Option<PathBuf>,
    out_dir: PathBuf,
    map_grid: usize,
) -> PyResult<String> {
    let args = SingleArgs {
        n,
        levels,
        p,
        seed,
        distribution: parse(distribution)?,
        kernel: parse(kernel)?,
        sigma,
        particles,
        out_dir,
        map_grid,
    };
    let summary = py.detach(|| core_run_single(&args)).map_err(to_py)?;
    Ok(summary.to_string())
}

#[pymodule]
fn vortex_fmm_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyParticle>()?;
    m.add_class::<PyDomain>()?;
    m.add_class::<PyRunStats>()?;
    m.add_class::<PyErrorReport>()?;
    m.add_function(wrap_pyfunction!(generate_particles, m)?)?;
    m.add_function(wrap_pyfunction!(velocity_direct, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add_function(wrap_pyfunction!(truncation_bound, m)?)?;
    m.add_function(wrap_pyfunction!(read_particles, m)?)?;
    m.add_function(wrap_pyfunction!(write_particles, m)?)?;
    m.add_function(wrap_pyfunction!(run_single, m)?)?;
    m.add("GENERATOR_ID", vortex_fmm::model::GENERATOR_ID)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn particle_round_trip() {
        let p = Particle::new(0.1, 0.2, -0.3, 0.04);
        let q = PyParticle::from(p);
        assert_eq!(Particle::from(&q), p);
    }

    #[test]
    fn io_errors_map_to_oserror() {
        Python::initialize();
        Python::attach(|py| {
            let e = to_py(FmmError::Io {
                path: "x".into(),
                source: std::io::Error::other("boom"),
            });
            assert!(e.is_instance_of::<PyOSError>(py));
            assert!(to_py(FmmError::CoincidentCenters).is_instance_of::<PyValueError>(py));
        });
    }
}
