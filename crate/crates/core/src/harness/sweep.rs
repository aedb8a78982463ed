use std::collections::BTreeSet;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use log::info;

use crate::error::{FmmError, Result};
use crate::errorlab::spatial_map;
use crate::fmm::FmmConfig;
use crate::harness::{millis, run_case, SweepConfig};
use crate::io::{fmt_opt, write_atomic};
use crate::model::{generate_particles, Domain, GENERATOR_ID};

pub const SWEEP_CSV_HEADER: &str = "n,l,p,seed,distribution,kernel,max_abs,max_rel,rms_rel,bound_violations,sampled,t_fmm_ms,t_direct_ms,m2l_count,near_pair_count,generator_id";

type Key = (usize, u32, usize, u64);

/// One line of the sweep CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub n: usize,
    pub l: u32,
    pub p: usize,
    pub seed: u64,
    pub distribution: String,
    pub kernel: String,
    pub max_abs: f64,
    pub max_rel: Option<f64>,
    pub rms_rel: Option<f64>,
    pub bound_violations: usize,
    pub sampled: Option<usize>,
    pub t_fmm_ms: f64,
    pub t_direct_ms: f64,
    pub m2l_count: u64,
    pub near_pair_count: u64,
    pub generator_id: String,
}

impl SweepRow {
    pub fn key(&self) -> Key {
        (self.n, self.l, self.p, self.seed)
    }

    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{:.3},{:.3},{},{},{}",
            self.n,
            self.l,
            self.p,
            self.seed,
            self.distribution,
            self.kernel,
            fmt_opt(Some(self.max_abs)),
            fmt_opt(self.max_rel),
            fmt_opt(self.rms_rel),
            self.bound_violations,
            self.sampled.map_or("NA".to_string(), |k| k.to_string()),
            self.t_fmm_ms,
            self.t_direct_ms,
            self.m2l_count,
            self.near_pair_count,
            self.generator_id,
        )
    }

    /// Columns that depend only on the config, not on the clock.
    pub fn metric_columns(&self) -> String {
        let line = self.to_csv_line();
        let cols: Vec<&str> = line.split(',').collect();
        [&cols[..11], &cols[13..]].concat().join(",")
    }

    pub fn parse(line: &str, lineno: u64) -> Result<SweepRow> {
        let cols: Vec<&str> = line.split(',').collect();
        let bad = |what: &str| FmmError::Parse {
            line: lineno,
            message: format!("bad {what}"),
        };
        if cols.len() != 16 {
            return Err(bad("column count"));
        }
        fn num<T: std::str::FromStr>(s: &str) -> Option<T> {
            s.parse().ok()
        }
        let opt = |s: &str| if s == "NA" { Some(None) } else { num::<f64>(s).map(Some) };
        Ok(SweepRow {
            n: num(cols[0]).ok_or_else(|| bad("n"))?,
            l: num(cols[1]).ok_or_else(|| bad("l"))?,
            p: num(cols[2]).ok_or_else(|| bad("p"))?,
            seed: num(cols[3]).ok_or_else(|| bad("seed"))?,
            distribution: cols[4].to_string(),
            kernel: cols[5].to_string(),
            max_abs: num(cols[6]).ok_or_else(|| bad("max_abs"))?,
            max_rel: opt(cols[7]).ok_or_else(|| bad("max_rel"))?,
            rms_rel: opt(cols[8]).ok_or_else(|| bad("rms_rel"))?,
            bound_violations: num(cols[9]).ok_or_else(|| bad("bound_violations"))?,
            sampled: if cols[10] == "NA" {
                None
            } else {
                Some(num(cols[10]).ok_or_else(|| bad("sampled"))?)
            },
            t_fmm_ms: num(cols[11]).ok_or_else(|| bad("t_fmm_ms"))?,
            t_direct_ms: num(cols[12]).ok_or_else(|| bad("t_direct_ms"))?,
            m2l_count: num(cols[13]).ok_or_else(|| bad("m2l_count"))?,
            near_pair_count: num(cols[14]).ok_or_else(|| bad("near_pair_count"))?,
            generator_id: cols[15].to_string(),
        })
    }
}

/// Reads a sweep CSV, checking the header.
pub fn parse_sweep_csv(path: &Path) -> Result<Vec<SweepRow>> {
    let file = File::open(path).map_err(|e| FmmError::io(path, e))?;
    let mut rows = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| FmmError::io(path, e))?;
        if i == 0 {
            if line != SWEEP_CSV_HEADER {
                return Err(FmmError::Format(format!("{}: unexpected sweep header", path.display())));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        rows.push(SweepRow::parse(&line, i as u64 + 1)?);
    }
    Ok(rows)
}

#[derive(Debug, Clone, Default)]
pub struct SweepOptions {
    /// Skip tuples already present in the output file.
    pub resume: bool,
    /// Also write one error map per run next to the sweep CSV.
    pub write_maps: bool,
    /// Worker threads; rows are still written in canonical order.
    pub jobs: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepSummary {
    pub total: usize,
    pub computed: usize,
    pub skipped: usize,
    pub out: PathBuf,
}

fn meta_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

fn maps_dir(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".maps");
    PathBuf::from(s)
}

fn meta_text(cfg: &SweepConfig) -> String {
    format!("generator_id = {GENERATOR_ID}\n{}", cfg.canonical())
}

/// Runs every `(n, l, p, seed)` tuple of the config on the unit domain,
/// appending one flushed row per run in lexicographic tuple order.
pub fn run_sweep(cfg: &SweepConfig, opts: &SweepOptions) -> Result<SweepSummary> {
    let out = cfg.out.clone();
    let meta = meta_path(&out);
    let tuples = cfg.tuples();
    let grid: BTreeSet<Key> = tuples.iter().copied().collect();

    let mut done: BTreeSet<Key> = BTreeSet::new();
    if opts.resume && out.exists() {
        let stored = std::fs::read_to_string(&meta).map_err(|e| FmmError::io(&meta, e))?;
        if stored != meta_text(cfg) {
            return Err(FmmError::config(
                "resume",
                format!("{} was produced by a different configuration", out.display()),
            ));
        }
        for row in parse_sweep_csv(&out)? {
            if !grid.contains(&row.key())
                || row.distribution != cfg.distribution.name()
                || row.kernel != cfg.kernel.name()
            {
                return Err(FmmError::config(
                    "resume",
                    format!("row {:?} in {} is not part of this sweep", row.key(), out.display()),
                ));
            }
            done.insert(row.key());
        }
    } else {
        if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| FmmError::io(dir, e))?;
        }
        write_atomic(&meta, |w| w.write_all(meta_text(cfg).as_bytes()))?;
        write_atomic(&out, |w| writeln!(w, "{SWEEP_CSV_HEADER}"))?;
    }

    if opts.write_maps {
        let dir = maps_dir(&out);
        std::fs::create_dir_all(&dir).map_err(|e| FmmError::io(&dir, e))?;
    }

    let todo: Vec<Key> = tuples.iter().copied().filter(|k| !done.contains(k)).collect();
    let mut file = OpenOptions::new()
        .append(true)
        .open(&out)
        .map_err(|e| FmmError::io(&out, e))?;

    let jobs = opts.jobs.max(1);
    for chunk in todo.chunks(jobs) {
        let results: Vec<Result<SweepRow>> = if jobs == 1 {
            chunk.iter().map(|k| run_tuple(cfg, *k, opts)).collect()
        } else {
            std::thread::scope(|s| {
                let handles: Vec<_> = chunk.iter().map(|k| s.spawn(move || run_tuple(cfg, *k, opts))).collect();
                handles.into_iter().map(|h| h.join().expect("sweep worker panicked")).collect()
            })
        };
        for row in results {
            let row = row?;
            writeln!(file, "{}", row.to_csv_line()).map_err(|e| FmmError::io(&out, e))?;
            file.flush().map_err(|e| FmmError::io(&out, e))?;
            info!("{}", row.to_csv_line());
        }
    }
    drop(file);
    canonicalize_order(&out)?;

    Ok(SweepSummary {
        total: tuples.len(),
        computed: todo.len(),
        skipped: tuples.len() - todo.len(),
        out,
    })
}

fn run_tuple(cfg: &SweepConfig, (n, l, p, seed): Key, opts: &SweepOptions) -> Result<SweepRow> {
    let domain = Domain::unit();
    let particles = generate_particles(cfg.distribution, n, seed, &domain, cfg.sigma)?;
    let config = FmmConfig::new(l, p, cfg.kernel)?;
    let case = run_case(&particles, &domain, &config, cfg.oracle, seed)?;
    if opts.write_maps {
        let map = spatial_map(&case.report, &domain, cfg.map_grid)?;
        let path = maps_dir(&cfg.out).join(format!("map_n{n}_l{l}_p{p}_s{seed}.csv"));
        map.write_csv_file(&path)?;
    }
    Ok(SweepRow {
        n,
        l,
        p,
        seed,
        distribution: cfg.distribution.name().to_string(),
        kernel: cfg.kernel.name().to_string(),
        max_abs: case.report.max_abs,
        max_rel: case.report.max_rel,
        rms_rel: case.report.rms_rel,
        bound_violations: case.bound_violations,
        sampled: case.sampled,
        t_fmm_ms: millis(case.t_fmm),
        t_direct_ms: millis(case.t_direct),
        m2l_count: case.stats.m2l_count,
        near_pair_count: case.stats.near_pair_count,
        generator_id: GENERATOR_ID.to_string(),
    })
}

/// Rows appended after a resume of an out-of-order file end up unsorted;
/// restore lexicographic order if needed.
fn canonicalize_order(out: &Path) -> Result<()> {
    let text = std::fs::read_to_string(out).map_err(|e| FmmError::io(out, e))?;
    let mut lines: Vec<(Key, &str)> = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        lines.push((SweepRow::parse(line, i as u64 + 1)?.key(), line));
    }
    if lines.windows(2).all(|w| w[0].0 < w[1].0) {
        return Ok(());
    }
    lines.sort_by_key(|(k, _)| *k);
    lines.dedup_by_key(|(k, _)| *k);
    write_atomic(out, |w| {
        writeln!(w, "{SWEEP_CSV_HEADER}")?;
        for (_, l) in &lines {
            writeln!(w, "{l}")?;
        }
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg_in(dir: &Path, body: &str) -> SweepConfig {
        let path = dir.join("s.cfg");
        std::fs::write(&path, body).unwrap();
        SweepConfig::from_file(&path).unwrap()
    }

    const SMALL: &str = "n = 100\nlevels = 2, 3\np = 2, 4, 6\nseeds = 1, 2\noracle = always\nout = out/sweep.csv\n";

    #[test]
    fn row_round_trip() {
        let row = SweepRow {
            n: 10,
            l: 3,
            p: 4,
            seed: 2,
            distribution: "uniform_random".into(),
            kernel: "point".into(),
            max_abs: 1.5e-3,
            max_rel: None,
            rms_rel: Some(2.5e-4),
            bound_violations: 0,
            sampled: Some(200),
            t_fmm_ms: 1.25,
            t_direct_ms: 3.5,
            m2l_count: 100,
            near_pair_count: 90,
            generator_id: GENERATOR_ID.into(),
        };
        let line = row.to_csv_line();
        assert_eq!(line.split(',').count(), SWEEP_CSV_HEADER.split(',').count());
        assert_eq!(SweepRow::parse(&line, 2).unwrap(), row);
    }

    #[test]
    fn sweep_writes_product_rows_and_resumes() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = cfg_in(dir.path(), SMALL);
        let s = run_sweep(&cfg, &SweepOptions::default()).unwrap();
        assert_eq!((s.total, s.computed, s.skipped), (12, 12, 0));
        let rows = parse_sweep_csv(&cfg.out).unwrap();
        assert_eq!(rows.len(), 12);
        let keys: Vec<Key> = rows.iter().map(SweepRow::key).collect();
        assert_eq!(keys, cfg.tuples());
        assert!(rows.iter().all(|r| r.bound_violations == 0 && r.sampled.is_none()));

        let before = std::fs::read(&cfg.out).unwrap();
        let again = run_sweep(
            &cfg,
            &SweepOptions {
                resume: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(again.computed, 0);
        assert_eq!(std::fs::read(&cfg.out).unwrap(), before);
    }

    #[test]
    fn resume_after_partial_run() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = cfg_in(dir.path(), SMALL);
        run_sweep(&cfg, &SweepOptions::default()).unwrap();
        let full = parse_sweep_csv(&cfg.out).unwrap();

        // keep the header and the first five rows, as after a crash
        let text = std::fs::read_to_string(&cfg.out).unwrap();
        let kept: Vec<&str> = text.lines().take(6).collect();
        std::fs::write(&cfg.out, kept.join("\n") + "\n").unwrap();

        let s = run_sweep(
            &cfg,
            &SweepOptions {
                resume: true,
                jobs: 3,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!((s.computed, s.skipped), (7, 5));
        let resumed = parse_sweep_csv(&cfg.out).unwrap();
        assert_eq!(resumed.len(), 12);
        for (a, b) in resumed.iter().zip(&full) {
            assert_eq!(a.metric_columns(), b.metric_columns());
        }
    }

    #[test]
    fn resume_refuses_changed_config() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = cfg_in(dir.path(), SMALL);
        run_sweep(&cfg, &SweepOptions::default()).unwrap();
        let changed = cfg_in(dir.path(), &SMALL.replace("p = 2, 4, 6", "p = 2, 4"));
        let err = run_sweep(
            &changed,
            &SweepOptions {
                resume: true,
                ..Default::default()
            },
        )
        .unwrap_err();
        assert!(matches!(err, FmmError::Config { .. }));
    }

    #[test]
    fn maps_are_written_per_run() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = cfg_in(
            dir.path(),
            "n = 64\nlevels = 2\np = 3\nseeds = 1, 2\nmap_grid = 4\nout = sw.csv\n",
        );
        run_sweep(
            &cfg,
            &SweepOptions {
                write_maps: true,
                ..Default::default()
            },
        )
        .unwrap();
        let maps = maps_dir(&cfg.out);
        for seed in [1, 2] {
            let text = std::fs::read_to_string(maps.join(format!("map_n64_l2_p3_s{seed}.csv"))).unwrap();
            assert_eq!(text.lines().count(), 17);
        }
    }
}
