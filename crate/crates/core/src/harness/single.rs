use std::fmt;
use std::path::{Path, PathBuf};

use crate::error::{FmmError, Result};
use crate::errorlab::spatial_map;
use crate::fmm::{FmmConfig, FmmRunStats};
use crate::harness::{millis, run_case, CaseResult, OraclePolicy};
use crate::io::write_atomic;
use crate::kernels::KernelKind;
use crate::model::{generate_particles, read_particles, Distribution, Domain, Particle};

pub const VELOCITIES_CSV_HEADER: &str = "index,x,y,u_fmm,v_fmm,u_direct,v_direct,abs_error,f_error,budget";

/// Inputs of one FMM-versus-direct evaluation.
#[derive(Debug, Clone)]
pub struct SingleArgs {
    pub n: usize,
    pub levels: u32,
    pub p: usize,
    pub seed: u64,
    pub distribution: Distribution,
    pub kernel: KernelKind,
    pub sigma: f64,
    /// Read particles from this file instead of generating them. The
    /// domain becomes their bounding square.
    pub particles: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub map_grid: usize,
}

impl Default for SingleArgs {
    fn default() -> Self {
        SingleArgs {
            n: 1000,
            levels: 3,
            p: 8,
            seed: 1,
            distribution: Distribution::UniformRandom,
            kernel: KernelKind::PointVortex,
            sigma: 0.0,
            particles: None,
            out_dir: PathBuf::from("."),
            map_grid: 8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SingleSummary {
    pub n: usize,
    pub levels: u32,
    pub p: usize,
    pub max_abs: f64,
    pub max_rel: Option<f64>,
    pub rms_rel: Option<f64>,
    pub bound_violations: usize,
    pub t_fmm_ms: f64,
    pub t_direct_ms: f64,
    pub stats: FmmRunStats,
    pub files: Vec<PathBuf>,
}

impl fmt::Display for SingleSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rel = self.max_rel.map_or("NA".to_string(), |r| format!("{r:.3e}"));
        write!(
            f,
            "n={} l={} p={} max_abs={:.3e} max_rel={} bound_violations={} t_fmm_ms={:.3} t_direct_ms={:.3} fmm/direct={:.3}",
            self.n,
            self.levels,
            self.p,
            self.max_abs,
            rel,
            self.bound_violations,
            self.t_fmm_ms,
            self.t_direct_ms,
            self.t_fmm_ms / self.t_direct_ms.max(f64::MIN_POSITIVE),
        )
    }
}

/// Evaluates one configuration against the full direct oracle and writes
/// `velocities.csv`, `error_report.csv` and `error_map.csv` into the output
/// directory.
pub fn run_single(args: &SingleArgs) -> Result<SingleSummary> {
    let (particles, domain) = match &args.particles {
        Some(path) => {
            let ps = read_particles(path)?;
            if ps.is_empty() {
                return Err(FmmError::invalid(format!("{} holds no particles", path.display())));
            }
            let d = Domain::bounding(&ps)?;
            (ps, d)
        }
        None => {
            let d = Domain::unit();
            (generate_particles(args.distribution, args.n, args.seed, &d, args.sigma)?, d)
        }
    };
    if args.kernel == KernelKind::GaussianBlob && particles.iter().any(|p| p.sigma <= 0.0) {
        return Err(FmmError::invalid("gaussian kernel needs sigma > 0 for every particle"));
    }
    let config = FmmConfig::new(args.levels, args.p, args.kernel)?;
    let case = run_case(&particles, &domain, &config, OraclePolicy::Always, args.seed)?;

    std::fs::create_dir_all(&args.out_dir).map_err(|e| FmmError::io(&args.out_dir, e))?;
    let vel_path = args.out_dir.join("velocities.csv");
    let report_path = args.out_dir.join("error_report.csv");
    let map_path = args.out_dir.join("error_map.csv");

    write_velocities(&vel_path, &particles, &case)?;
    case.report.write_summary_csv(&report_path)?;
    spatial_map(&case.report, &domain, args.map_grid)?.write_csv_file(&map_path)?;

    Ok(SingleSummary {
        n: particles.len(),
        levels: args.levels,
        p: args.p,
        max_abs: case.report.max_abs,
        max_rel: case.report.max_rel,
        rms_rel: case.report.rms_rel,
        bound_violations: case.bound_violations,
        t_fmm_ms: millis(case.t_fmm),
        t_direct_ms: millis(case.t_direct),
        stats: case.stats,
        files: vec![vel_path, report_path, map_path],
    })
}

fn write_velocities(path: &Path, particles: &[Particle], case: &CaseResult) -> Result<()> {
    let budgets = case.report.bound_budget.as_deref();
    write_atomic(path, |w| {
        writeln!(w, "{VELOCITIES_CSV_HEADER}")?;
        for (k, t) in case.report.per_target.iter().enumerate() {
            let i = t.index;
            let (f, d) = (case.velocities[i], case.direct[k]);
            let b = budgets.map_or(f64::NAN, |b| b[k]);
            writeln!(
                w,
                "{i},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:e},{:e},{:e}",
                particles[i].x, particles[i].y, f.u, f.v, d.u, d.v, t.abs_error, t.f_error, b
            )?;
        }
        Ok(())
    })
}
