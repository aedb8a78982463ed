//! Experiment drivers behind the `vfmm` command line: single evaluations,
//! (N, l, p) sweeps and the runtime scaling study.

mod config;
mod single;
mod sweep;
mod timing;

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{FmmError, Result};
use crate::errorlab::{bound_check, compare, roundoff_floor, ErrorReport};
use crate::fmm::{bound_budgets, evaluate, FmmConfig, FmmRunStats};
use crate::kernels::velocity_direct;
use crate::model::{Domain, Particle, Velocity};

pub use config::SweepConfig;
pub use single::{run_single, SingleArgs, SingleSummary};
pub use sweep::{parse_sweep_csv, run_sweep, SweepOptions, SweepRow, SweepSummary, SWEEP_CSV_HEADER};
pub use timing::{choose_levels, run_timing, write_timing_csv, LevelPolicy, TimingOptions, TimingRow, TIMING_CSV_HEADER};

/// Default number of oracle targets for the sampled policy.
pub const DEFAULT_ORACLE_SAMPLES: usize = 200;

/// How many targets the direct oracle is evaluated on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OraclePolicy {
    Always,
    /// `k` targets drawn without replacement. Error maxima over a sample
    /// are lower bounds of the full maxima.
    Sampled(usize),
}

impl fmt::Display for OraclePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OraclePolicy::Always => f.write_str("always"),
            OraclePolicy::Sampled(k) => write!(f, "sampled({k})"),
        }
    }
}

impl FromStr for OraclePolicy {
    type Err = FmmError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "always" {
            return Ok(OraclePolicy::Always);
        }
        if s == "sampled" {
            return Ok(OraclePolicy::Sampled(DEFAULT_ORACLE_SAMPLES));
        }
        let k = s
            .strip_prefix("sampled(")
            .and_then(|r| r.strip_suffix(')'))
            .or_else(|| s.strip_prefix("sampled:"))
            .ok_or_else(|| FmmError::invalid(format!("unknown oracle policy `{s}`")))?;
        let k: usize = k
            .trim()
            .parse()
            .map_err(|_| FmmError::invalid(format!("bad sample count in `{s}`")))?;
        if k == 0 {
            return Err(FmmError::invalid("sample count must be >= 1"));
        }
        Ok(OraclePolicy::Sampled(k))
    }
}

/// Everything measured for one FMM evaluation checked against the oracle.
#[derive(Debug, Clone)]
pub struct CaseResult {
    pub velocities: Vec<Velocity>,
    /// Particle indices the oracle was evaluated at, ascending.
    pub oracle_targets: Vec<usize>,
    pub direct: Vec<Velocity>,
    pub report: ErrorReport,
    pub bound_violations: usize,
    pub stats: FmmRunStats,
    /// `Some(k)` when only `k < n` targets were checked.
    pub sampled: Option<usize>,
    pub t_fmm: Duration,
    /// Direct-sum time, scaled by `n / k` when sampled.
    pub t_direct: Duration,
}

fn sample_seed(seed: u64) -> u64 {
    seed ^ 0x9e37_79b9_7f4a_7c15
}

/// Runs the FMM, then the direct oracle on the targets chosen by `oracle`,
/// and scores the difference against the truncation budgets.
pub fn run_case(
    particles: &[Particle],
    domain: &Domain,
    config: &FmmConfig,
    oracle: OraclePolicy,
    seed: u64,
) -> Result<CaseResult> {
    let t0 = Instant::now();
    let out = evaluate(particles, domain, config)?;
    let t_fmm = t0.elapsed();
    let n = particles.len();

    let (targets, sampled) = match oracle {
        OraclePolicy::Sampled(k) if k < n => {
            let mut rng = ChaCha8Rng::seed_from_u64(sample_seed(seed));
            let mut idx = rand::seq::index::sample(&mut rng, n, k).into_vec();
            idx.sort_unstable();
            (idx, Some(k))
        }
        _ => ((0..n).collect::<Vec<_>>(), None),
    };
    let points: Vec<(f64, f64)> = targets.iter().map(|&i| particles[i].position()).collect();

    let t0 = Instant::now();
    let direct = velocity_direct(&points, particles, config.kernel);
    let mut t_direct = t0.elapsed();
    if let Some(k) = sampled {
        t_direct = t_direct.mul_f64(n as f64 / k as f64);
    }

    let budgets_all = bound_budgets(particles, domain, config)?;
    let fmm_sel: Vec<Velocity> = targets.iter().map(|&i| out.velocities[i]).collect();
    let max_direct = direct.iter().map(Velocity::norm).fold(0.0, f64::max);
    let floor = roundoff_floor(n, max_direct);
    let budgets: Vec<f64> = targets.iter().map(|&i| budgets_all[i] + floor).collect();

    let report = compare(&fmm_sel, &direct, &points, Some(&budgets))?.with_indices(&targets);
    let bound_violations = bound_check(&report, &budgets).len();

    Ok(CaseResult {
        velocities: out.velocities,
        oracle_targets: targets,
        direct,
        report,
        bound_violations,
        stats: out.stats,
        sampled,
        t_fmm,
        t_direct,
    })
}

pub(crate) fn millis(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelKind;
    use crate::model::{generate_particles, Distribution};

    #[test]
    fn oracle_policy_parses() {
        assert_eq!("always".parse::<OraclePolicy>().unwrap(), OraclePolicy::Always);
        assert_eq!("sampled(50)".parse::<OraclePolicy>().unwrap(), OraclePolicy::Sampled(50));
        assert_eq!("sampled:7".parse::<OraclePolicy>().unwrap(), OraclePolicy::Sampled(7));
        assert_eq!(
            "sampled".parse::<OraclePolicy>().unwrap(),
            OraclePolicy::Sampled(DEFAULT_ORACLE_SAMPLES)
        );
        assert!("sampled(0)".parse::<OraclePolicy>().is_err());
        assert!("sometimes".parse::<OraclePolicy>().is_err());
        for p in [OraclePolicy::Always, OraclePolicy::Sampled(3)] {
            assert_eq!(p.to_string().parse::<OraclePolicy>().unwrap(), p);
        }
    }

    #[test]
    fn sampled_metrics_bound_full_metrics_from_below() {
        let d = Domain::unit();
        let ps = generate_particles(Distribution::UniformRandom, 800, 4, &d, 0.0).unwrap();
        let cfg = FmmConfig::new(3, 4, KernelKind::PointVortex).unwrap();
        let full = run_case(&ps, &d, &cfg, OraclePolicy::Always, 4).unwrap();
        let part = run_case(&ps, &d, &cfg, OraclePolicy::Sampled(100), 4).unwrap();
        assert_eq!(full.sampled, None);
        assert_eq!(part.sampled, Some(100));
        assert_eq!(part.oracle_targets.len(), 100);
        assert!(part.report.max_abs <= full.report.max_abs);
        for t in &part.report.per_target {
            let f = full.report.per_target[t.index];
            assert_eq!(f.abs_error, t.abs_error);
        }
        assert_eq!(full.bound_violations, 0);
        // more samples than particles falls back to the full oracle
        let all = run_case(&ps, &d, &cfg, OraclePolicy::Sampled(5000), 4).unwrap();
        assert_eq!(all.sampled, None);
        assert_eq!(all.report.max_abs, full.report.max_abs);
    }
}
