use std::path::Path;
use std::time::Instant;

use crate::error::{FmmError, Result};
use crate::fmm::{evaluate, FmmConfig};
use crate::harness::millis;
use crate::io::write_atomic;
use crate::kernels::{velocity_direct_at_particles, KernelKind};
use crate::model::{generate_particles, Distribution, Domain};
use crate::quadtree::MAX_LEVELS;

pub const TIMING_CSV_HEADER: &str = "n,l,p,t_fmm_ms,t_direct_ms,direct_extrapolated";

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LevelPolicy {
    Fixed(u32),
    /// `l = round(log4(n / per_leaf))`, at least 2.
    Occupancy(f64),
}

pub fn choose_levels(n: usize, policy: LevelPolicy) -> u32 {
    match policy {
        LevelPolicy::Fixed(l) => l,
        LevelPolicy::Occupancy(per_leaf) => {
            let l = ((n as f64 / per_leaf).log(4.0)).round();
            (l.max(2.0) as u32).min(MAX_LEVELS)
        }
    }
}

#[derive(Debug, Clone)]
pub struct TimingOptions {
    pub n_values: Vec<usize>,
    pub policy: LevelPolicy,
    pub p: usize,
    pub reps: usize,
    /// Above this particle count the direct time is extrapolated from a
    /// `c n^2` fit of the measured points instead of being measured.
    pub direct_cutoff: Option<usize>,
    pub kernel: KernelKind,
    pub sigma: f64,
    pub seed: u64,
}

impl Default for TimingOptions {
    fn default() -> Self {
        TimingOptions {
            n_values: (8..=15).map(|k| 1usize << k).collect(),
            policy: LevelPolicy::Occupancy(16.0),
            p: 8,
            reps: 3,
            direct_cutoff: None,
            kernel: KernelKind::PointVortex,
            sigma: 0.0,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingRow {
    pub n: usize,
    pub l: u32,
    pub p: usize,
    pub t_fmm_ms: f64,
    pub t_direct_ms: f64,
    pub direct_extrapolated: bool,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Shortest batch whose mean is reported as one repetition, so that calls
/// far below timer and scheduler resolution are not measured singly.
const MIN_BATCH_MS: f64 = 20.0;

/// Mean wall time of `f` over a batch lasting at least `MIN_BATCH_MS`.
fn per_call_ms(mut f: impl FnMut() -> Result<()>) -> Result<f64> {
    let t0 = Instant::now();
    f()?;
    let once = millis(t0.elapsed());
    if once >= MIN_BATCH_MS {
        return Ok(once);
    }
    let calls = (MIN_BATCH_MS / once.max(1e-6)).ceil() as usize;
    let t0 = Instant::now();
    for _ in 0..calls {
        f()?;
    }
    Ok(millis(t0.elapsed()) / calls as f64)
}

/// Times FMM and direct evaluation for each `n`, strictly sequentially,
/// reporting the median of `reps` repetitions. Repetitions run round-robin
/// over the `n` values so slow drift in machine speed spreads across every
/// `n` instead of biasing neighbouring ones. Each case gets an untimed
/// warm-up call first.
pub fn run_timing(opts: &TimingOptions) -> Result<Vec<TimingRow>> {
    if opts.n_values.is_empty() || opts.reps == 0 {
        return Err(FmmError::invalid("timing needs at least one n and one repetition"));
    }
    if let LevelPolicy::Occupancy(t) = opts.policy {
        if t.is_nan() || t <= 0.0 {
            return Err(FmmError::invalid("target occupancy must be > 0"));
        }
    }
    let domain = Domain::unit();
    let mut cases = Vec::with_capacity(opts.n_values.len());
    for &n in &opts.n_values {
        let particles = generate_particles(Distribution::UniformRandom, n, opts.seed, &domain, opts.sigma)?;
        let l = choose_levels(n, opts.policy);
        let cfg = FmmConfig::new(l, opts.p, opts.kernel)?;
        let measure = opts.direct_cutoff.is_none_or(|c| n <= c);
        evaluate(&particles, &domain, &cfg)?;
        cases.push((particles, l, cfg, measure));
    }

    let mut fmm = vec![Vec::with_capacity(opts.reps); cases.len()];
    let mut direct = vec![Vec::with_capacity(opts.reps); cases.len()];
    for _ in 0..opts.reps {
        for (k, (particles, _, cfg, measure)) in cases.iter().enumerate() {
            fmm[k].push(per_call_ms(|| evaluate(particles, &domain, cfg).map(drop))?);
            if *measure {
                direct[k].push(per_call_ms(|| {
                    std::hint::black_box(velocity_direct_at_particles(particles, opts.kernel));
                    Ok(())
                })?);
            }
        }
    }

    let mut rows: Vec<TimingRow> = cases
        .iter()
        .zip(fmm.into_iter().zip(direct))
        .map(|((particles, l, _, measure), (f, d))| TimingRow {
            n: particles.len(),
            l: *l,
            p: opts.p,
            t_fmm_ms: median(f),
            t_direct_ms: if *measure { median(d) } else { f64::NAN },
            direct_extrapolated: !measure,
        })
        .collect();

    if rows.iter().any(|r| r.direct_extrapolated) {
        // least squares for t = c n^2 over the measured rows
        let (num, den) = rows
            .iter()
            .filter(|r| !r.direct_extrapolated)
            .fold((0.0, 0.0), |(a, b), r| {
                let n2 = (r.n as f64).powi(2);
                (a + r.t_direct_ms * n2, b + n2 * n2)
            });
        if den == 0.0 {
            return Err(FmmError::invalid("direct cutoff leaves no measured point to extrapolate from"));
        }
        let c = num / den;
        for r in rows.iter_mut().filter(|r| r.direct_extrapolated) {
            r.t_direct_ms = c * (r.n as f64).powi(2);
        }
    }
    Ok(rows)
}

pub fn write_timing_csv(path: &Path, rows: &[TimingRow]) -> Result<()> {
    write_atomic(path, |w| {
        writeln!(w, "{TIMING_CSV_HEADER}")?;
        for r in rows {
            writeln!(
                w,
                "{},{},{},{:.4},{:.4},{}",
                r.n, r.l, r.p, r.t_fmm_ms, r.t_direct_ms, r.direct_extrapolated
            )?;
        }
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn occupancy_policy() {
        assert_eq!(choose_levels(256, LevelPolicy::Occupancy(16.0)), 2);
        assert_eq!(choose_levels(16, LevelPolicy::Occupancy(16.0)), 2);
        assert_eq!(choose_levels(4096, LevelPolicy::Occupancy(16.0)), 4);
        assert_eq!(choose_levels(8192, LevelPolicy::Occupancy(16.0)), 5);
        assert_eq!(choose_levels(1 << 15, LevelPolicy::Occupancy(16.0)), 6);
        assert_eq!(choose_levels(99, LevelPolicy::Fixed(3)), 3);
    }

    #[test]
    fn median_of_odd_and_even() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn extrapolation_is_flagged() {
        let opts = TimingOptions {
            n_values: vec![128, 256, 512],
            reps: 1,
            direct_cutoff: Some(256),
            ..Default::default()
        };
        let rows = run_timing(&opts).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(!rows[0].direct_extrapolated && !rows[1].direct_extrapolated);
        assert!(rows[2].direct_extrapolated);
        assert!(rows[2].t_direct_ms.is_finite() && rows[2].t_direct_ms > 0.0);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_timing_csv(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().next().unwrap(), TIMING_CSV_HEADER);
        assert!(text.lines().nth(3).unwrap().ends_with(",true"));
    }
}
