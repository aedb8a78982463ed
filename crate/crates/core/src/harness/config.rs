//! Flat `key = value` sweep configuration.
//!
//! ```text
//! # comment
//! n = 256, 1024
//! levels = 3, 4
//! p = 2, 4, 8
//! seeds = 1..10          # inclusive range
//! distribution = uniform_random
//! kernel = point
//! sigma = 0.0
//! map_grid = 8
//! oracle = sampled(200)
//! out = sweep.csv        # relative to the config file
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{FmmError, Result};
use crate::harness::{OraclePolicy, DEFAULT_ORACLE_SAMPLES};
use crate::kernels::KernelKind;
use crate::model::Distribution;

const KEYS: [&str; 10] = [
    "n",
    "levels",
    "p",
    "seeds",
    "distribution",
    "kernel",
    "sigma",
    "map_grid",
    "oracle",
    "out",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub n_values: Vec<usize>,
    pub l_values: Vec<u32>,
    pub p_values: Vec<usize>,
    pub seeds: Vec<u64>,
    pub distribution: Distribution,
    pub kernel: KernelKind,
    pub sigma: f64,
    pub map_grid: usize,
    pub oracle: OraclePolicy,
    pub out: PathBuf,
}

impl SweepConfig {
    pub fn run_count(&self) -> usize {
        self.n_values.len() * self.l_values.len() * self.p_values.len() * self.seeds.len()
    }

    /// `(n, l, p, seed)` tuples in lexicographic order.
    pub fn tuples(&self) -> Vec<(usize, u32, usize, u64)> {
        let mut out = Vec::with_capacity(self.run_count());
        for &n in &self.n_values {
            for &l in &self.l_values {
                for &p in &self.p_values {
                    for &s in &self.seeds {
                        out.push((n, l, p, s));
                    }
                }
            }
        }
        out
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| FmmError::io(path, e))?;
        let mut cfg = SweepConfig::parse(&text)?;
        if cfg.out.is_relative() {
            if let Some(dir) = path.parent() {
                cfg.out = dir.join(&cfg.out);
            }
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut n_values = None;
        let mut l_values = None;
        let mut p_values = None;
        let mut seeds = None;
        let mut distribution = Distribution::UniformRandom;
        let mut kernel = KernelKind::PointVortex;
        let mut sigma = 0.0;
        let mut map_grid = 8;
        let mut oracle = OraclePolicy::Sampled(DEFAULT_ORACLE_SAMPLES);
        let mut out = PathBuf::from("sweep.csv");
        let mut seen = Vec::new();

        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                FmmError::config(line, format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(FmmError::config(key, "unknown key"));
            }
            if seen.contains(&key) {
                return Err(FmmError::config(key, "given more than once"));
            }
            seen.push(key);
            let wrap = |e: FmmError| FmmError::config(key, e.to_string());
            match key {
                "n" => n_values = Some(parse_list::<usize>(key, value)?),
                "levels" => l_values = Some(parse_list::<u32>(key, value)?),
                "p" => p_values = Some(parse_list::<usize>(key, value)?),
                "seeds" => seeds = Some(parse_list::<u64>(key, value)?),
                "distribution" => distribution = value.parse().map_err(wrap)?,
                "kernel" => kernel = value.parse().map_err(wrap)?,
                "sigma" => sigma = parse_scalar(key, value)?,
                "map_grid" => map_grid = parse_scalar(key, value)?,
                "oracle" => oracle = value.parse().map_err(wrap)?,
                "out" => {
                    if value.is_empty() {
                        return Err(FmmError::config(key, "empty path"));
                    }
                    out = PathBuf::from(value)
                }
                _ => unreachable!(),
            }
        }

        let cfg = SweepConfig {
            n_values: require(n_values, "n")?,
            l_values: require(l_values, "levels")?,
            p_values: require(p_values, "p")?,
            seeds: require(seeds, "seeds")?,
            distribution,
            kernel,
            sigma,
            map_grid,
            oracle,
            out,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if self.n_values.contains(&0) {
            return Err(FmmError::config("n", "particle counts must be >= 1"));
        }
        if let Some(l) = self.l_values.iter().find(|&&l| !(2..=crate::quadtree::MAX_LEVELS).contains(&l)) {
            return Err(FmmError::config(
                "levels",
                format!("{l} outside 2..={}", crate::quadtree::MAX_LEVELS),
            ));
        }
        if let Some(p) = self.p_values.iter().find(|&&p| p > crate::expansions::MAX_ORDER) {
            return Err(FmmError::config("p", format!("{p} exceeds {}", crate::expansions::MAX_ORDER)));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(FmmError::config("sigma", "must be finite and >= 0"));
        }
        if self.kernel == KernelKind::GaussianBlob && self.sigma <= 0.0 {
            return Err(FmmError::config("sigma", "gaussian kernel needs sigma > 0"));
        }
        if self.map_grid == 0 {
            return Err(FmmError::config("map_grid", "must be >= 1"));
        }
        Ok(())
    }

    /// Normalized text of every setting that affects results; used to
    /// detect a resumed sweep whose config changed.
    pub fn canonical(&self) -> String {
        let join = |v: Vec<String>| v.join(",");
        let mut s = String::new();
        let _ = writeln!(s, "n = {}", join(self.n_values.iter().map(|x| x.to_string()).collect()));
        let _ = writeln!(s, "levels = {}", join(self.l_values.iter().map(|x| x.to_string()).collect()));
        let _ = writeln!(s, "p = {}", join(self.p_values.iter().map(|x| x.to_string()).collect()));
        let _ = writeln!(s, "seeds = {}", join(self.seeds.iter().map(|x| x.to_string()).collect()));
        let _ = writeln!(s, "distribution = {}", self.distribution);
        let _ = writeln!(s, "kernel = {}", self.kernel);
        let _ = writeln!(s, "sigma = {:e}", self.sigma);
        let _ = writeln!(s, "map_grid = {}", self.map_grid);
        let _ = writeln!(s, "oracle = {}", self.oracle);
        s
    }
}

fn require<T>(v: Option<Vec<T>>, key: &str) -> Result<Vec<T>> {
    v.ok_or_else(|| FmmError::config(key, "missing"))
}

fn parse_scalar<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| FmmError::config(key, format!("cannot parse `{value}`")))
}

/// Comma-separated values; an element `a..b` expands to `a` through `b`
/// inclusive. The result is sorted and deduplicated.
fn parse_list<T>(key: &str, value: &str) -> Result<Vec<T>>
where
    T: FromStr + Ord + Copy + TryFrom<u64>,
{
    let mut out = Vec::new();
    for item in value.split(',').map(str::trim) {
        if item.is_empty() {
            return Err(FmmError::config(key, "empty list element"));
        }
        if let Some((a, b)) = item.split_once("..") {
            let a: u64 = parse_scalar(key, a.trim())?;
            let b: u64 = parse_scalar(key, b.trim())?;
            if a > b {
                return Err(FmmError::config(key, format!("empty range `{item}`")));
            }
            for v in a..=b {
                out.push(T::try_from(v).map_err(|_| FmmError::config(key, "range overflow"))?);
            }
        } else {
            out.push(parse_scalar(key, item)?);
        }
    }
    out.sort_unstable();
    out.dedup();
    if out.is_empty() {
        return Err(FmmError::config(key, "empty list"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = "n = 100\nlevels = 2, 3\np = 2,4,6\nseeds = 1,2\n";

    #[test]
    fn parses_lists_and_defaults() {
        let c = SweepConfig::parse(BASIC).unwrap();
        assert_eq!(c.run_count(), 12);
        assert_eq!(c.tuples().len(), 12);
        assert_eq!(c.tuples()[0], (100, 2, 2, 1));
        assert_eq!(c.tuples()[11], (100, 3, 6, 2));
        assert_eq!(c.oracle, OraclePolicy::Sampled(200));
        assert_eq!(c.kernel, KernelKind::PointVortex);
    }

    #[test]
    fn ranges_comments_and_sorting() {
        let c = SweepConfig::parse(
            "# study\nn = 1024, 256 # unsorted\nlevels=3\np = 4, 2, 4\nseeds = 1..10\noracle = always\n",
        )
        .unwrap();
        assert_eq!(c.n_values, vec![256, 1024]);
        assert_eq!(c.p_values, vec![2, 4]);
        assert_eq!(c.seeds, (1..=10).collect::<Vec<u64>>());
        assert_eq!(c.oracle, OraclePolicy::Always);
    }

    #[test]
    fn errors_name_the_key() {
        let cases = [
            ("n = 100\nlevels = 1\np = 2\nseeds = 1\n", "levels"),
            ("n = 100\nlevels = 2\np = x\nseeds = 1\n", "p"),
            ("n = 100\nlevels = 2\np = 2\n", "seeds"),
            ("n = 100\nlevels = 2\np = 2\nseeds = 1\ncolour = red\n", "colour"),
            ("n = 100\nlevels = 2\np = 2\nseeds = 1\nkernel = gaussian\n", "sigma"),
            ("n = 100\nlevels = 2\np = 2\nseeds = 1\ndistribution = ring\n", "distribution"),
            ("n = 100\nn = 200\nlevels = 2\np = 2\nseeds = 1\n", "n"),
            ("n = 100\nlevels = 2\np = 2\nseeds = 5..3\n", "seeds"),
        ];
        for (text, key) in cases {
            match SweepConfig::parse(text) {
                Err(FmmError::Config { key: k, .. }) => assert_eq!(k, key, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn canonical_text_round_trips() {
        let c = SweepConfig::parse(BASIC).unwrap();
        let again = SweepConfig::parse(&c.canonical()).unwrap();
        assert_eq!(again.canonical(), c.canonical());
        assert_eq!(again.tuples(), c.tuples());
    }
}
