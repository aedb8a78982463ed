//! Particles, the square domain, velocity values, particle generators and
//! the particle CSV format.
//!
//! The three generators are synthetic workloads for error studies: a
//! mixed-sign uniform cloud, a single positive Gaussian patch, and a pair of
//! opposite-sign Gaussian patches. None of them is claimed to match any
//! particular published experiment.

use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{FmmError, Result};

/// Identity of the pseudo-random generator behind [`generate_particles`].
/// Recorded in sweep output so a row can be regenerated elsewhere.
pub const GENERATOR_ID: &str = "chacha8-rand_chacha0.9-seed_from_u64";

/// Header line of the particle CSV format.
pub const PARTICLE_CSV_HEADER: &str = "x,y,gamma,sigma";

/// A regularized vortex particle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Particle {
    pub x: f64,
    pub y: f64,
    /// Circulation, either sign.
    pub gamma: f64,
    /// Core radius. Only read by the Gaussian-blob kernel.
    pub sigma: f64,
}

impl Particle {
    pub fn new(x: f64, y: f64, gamma: f64, sigma: f64) -> Self {
        Particle { x, y, gamma, sigma }
    }

    #[inline]
    pub fn z(&self) -> Complex64 {
        Complex64::new(self.x, self.y)
    }

    #[inline]
    pub fn position(&self) -> (f64, f64) {
        (self.x, self.y)
    }
}

/// The square `[xmin, xmin + side] x [ymin, ymin + side]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain {
    pub xmin: f64,
    pub ymin: f64,
    pub side: f64,
}

impl Domain {
    pub fn new(xmin: f64, ymin: f64, side: f64) -> Result<Self> {
        if !(side > 0.0 && side.is_finite()) {
            return Err(FmmError::invalid(format!("domain side must be > 0, got {side}")));
        }
        if !(xmin.is_finite() && ymin.is_finite()) {
            return Err(FmmError::invalid("domain corner must be finite"));
        }
        Ok(Domain { xmin, ymin, side })
    }

    pub fn unit() -> Self {
        Domain {
            xmin: 0.0,
            ymin: 0.0,
            side: 1.0,
        }
    }

    /// Smallest square (padded by a relative margin) enclosing every particle.
    pub fn bounding(particles: &[Particle]) -> Result<Self> {
        if particles.is_empty() {
            return Err(FmmError::invalid("cannot bound an empty particle set"));
        }
        let (mut x0, mut y0) = (f64::INFINITY, f64::INFINITY);
        let (mut x1, mut y1) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in particles {
            x0 = x0.min(p.x);
            y0 = y0.min(p.y);
            x1 = x1.max(p.x);
            y1 = y1.max(p.y);
        }
        let extent = (x1 - x0).max(y1 - y0);
        let pad = if extent > 0.0 { 1e-6 * extent } else { 0.5 };
        Domain::new(x0 - pad, y0 - pad, extent + 2.0 * pad)
    }

    pub fn xmax(&self) -> f64 {
        self.xmin + self.side
    }

    pub fn ymax(&self) -> f64 {
        self.ymin + self.side
    }

    /// Closed-square membership test.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.xmin && x <= self.xmax() && y >= self.ymin && y <= self.ymax()
    }

    pub fn center(&self) -> (f64, f64) {
        (self.xmin + 0.5 * self.side, self.ymin + 0.5 * self.side)
    }
}

/// Velocity `(u, v)` at one target. Internally the FMM works with the
/// conjugate complex velocity `u - i v`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Velocity {
    pub u: f64,
    pub v: f64,
}

impl Velocity {
    pub const ZERO: Velocity = Velocity { u: 0.0, v: 0.0 };

    pub fn new(u: f64, v: f64) -> Self {
        Velocity { u, v }
    }

    /// `u - i v`.
    pub fn conjugate(&self) -> Complex64 {
        Complex64::new(self.u, -self.v)
    }

    pub fn from_conjugate(w: Complex64) -> Self {
        Velocity { u: w.re, v: -w.im }
    }

    pub fn norm(&self) -> f64 {
        self.u.hypot(self.v)
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite()
    }
}

impl std::ops::Add for Velocity {
    type Output = Velocity;
    fn add(self, rhs: Velocity) -> Velocity {
        Velocity::new(self.u + rhs.u, self.v + rhs.v)
    }
}

impl std::ops::AddAssign for Velocity {
    fn add_assign(&mut self, rhs: Velocity) {
        self.u += rhs.u;
        self.v += rhs.v;
    }
}

impl std::ops::Sub for Velocity {
    type Output = Velocity;
    fn sub(self, rhs: Velocity) -> Velocity {
        Velocity::new(self.u - rhs.u, self.v - rhs.v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Distribution {
    UniformRandom,
    GaussianPatch,
    TwoPatches,
}

impl Distribution {
    pub const ALL: [Distribution; 3] = [
        Distribution::UniformRandom,
        Distribution::GaussianPatch,
        Distribution::TwoPatches,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Distribution::UniformRandom => "uniform_random",
            Distribution::GaussianPatch => "gaussian_patch",
            Distribution::TwoPatches => "two_patches",
        }
    }
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Distribution {
    type Err = FmmError;

    fn from_str(s: &str) -> Result<Self> {
        Distribution::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| FmmError::invalid(format!("unknown distribution `{s}`")))
    }
}

/// Generates `n` particles inside `domain`, fully determined by `seed`.
///
/// Positions are uniform over the square for every distribution; only the
/// circulations differ:
/// - `UniformRandom`: gamma uniform in `[-1, 1]`.
/// - `GaussianPatch`: `exp(-r^2 / (2 s^2)) * side^2 / n`, `s = side / 8`,
///   `r` the distance to the domain center.
/// - `TwoPatches`: the same profile centered at `(1/4, 1/2)` minus the one
///   centered at `(3/4, 1/2)` (fractions of the domain).
pub fn generate_particles(
    distribution: Distribution,
    n: usize,
    seed: u64,
    domain: &Domain,
    sigma: f64,
) -> Result<Vec<Particle>> {
    if n == 0 {
        return Err(FmmError::invalid("particle count must be >= 1"));
    }
    let domain = Domain::new(domain.xmin, domain.ymin, domain.side)?;
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(FmmError::invalid(format!("sigma must be finite and >= 0, got {sigma}")));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = domain.side;
    let s = side / 8.0;
    let weight = side * side / n as f64;
    let patch = |x: f64, y: f64, cx: f64, cy: f64| {
        let r2 = (x - cx).powi(2) + (y - cy).powi(2);
        (-r2 / (2.0 * s * s)).exp()
    };
    let (cx, cy) = domain.center();
    let left = (domain.xmin + 0.25 * side, domain.ymin + 0.5 * side);
    let right = (domain.xmin + 0.75 * side, domain.ymin + 0.5 * side);

    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let x = domain.xmin + side * rng.random::<f64>();
        let y = domain.ymin + side * rng.random::<f64>();
        let gamma = match distribution {
            Distribution::UniformRandom => rng.random_range(-1.0..=1.0),
            Distribution::GaussianPatch => weight * patch(x, y, cx, cy),
            Distribution::TwoPatches => {
                weight * (patch(x, y, left.0, left.1) - patch(x, y, right.0, right.1))
            }
        };
        out.push(Particle::new(x, y, gamma, sigma));
    }
    Ok(out)
}

/// Parses particle CSV from a reader. Line numbers in errors are 1-based
/// and count the header as line 1.
pub fn parse_particles<R: Read>(reader: R) -> Result<Vec<Particle>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut records = rdr.records();

    let header = match records.next() {
        Some(Ok(h)) => h,
        Some(Err(e)) => return Err(FmmError::Format(e.to_string())),
        None => return Err(FmmError::Format(format!("missing header `{PARTICLE_CSV_HEADER}`"))),
    };
    let header: Vec<&str> = header.iter().map(str::trim).collect();
    if header.join(",") != PARTICLE_CSV_HEADER {
        return Err(FmmError::Format(format!(
            "expected header `{PARTICLE_CSV_HEADER}`, found `{}`",
            header.join(",")
        )));
    }

    let mut particles = Vec::new();
    for record in records {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            FmmError::Parse {
                line,
                message: e.to_string(),
            }
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != 4 {
            return Err(FmmError::Parse {
                line,
                message: format!("expected 4 fields, found {}", record.len()),
            });
        }
        let mut vals = [0.0f64; 4];
        for (slot, (field, name)) in vals
            .iter_mut()
            .zip(record.iter().zip(["x", "y", "gamma", "sigma"]))
        {
            *slot = field.trim().parse::<f64>().map_err(|_| FmmError::Parse {
                line,
                message: format!("field `{name}`: cannot parse `{field}` as a number"),
            })?;
        }
        particles.push(Particle::new(vals[0], vals[1], vals[2], vals[3]));
    }
    Ok(particles)
}

pub fn read_particles(path: impl AsRef<Path>) -> Result<Vec<Particle>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| FmmError::io(path, e))?;
    parse_particles(file)
}

/// Writes particles with 17 significant digits, which round-trips every f64.
pub fn format_particles<W: Write>(mut w: W, particles: &[Particle]) -> std::io::Result<()> {
    writeln!(w, "{PARTICLE_CSV_HEADER}")?;
    for p in particles {
        writeln!(w, "{:.16e},{:.16e},{:.16e},{:.16e}", p.x, p.y, p.gamma, p.sigma)?;
    }
    Ok(())
}

pub fn write_particles(path: impl AsRef<Path>, particles: &[Particle]) -> Result<()> {
    let path = path.as_ref();
    crate::io::write_atomic(path, |w| format_particles(w, particles))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generator_is_deterministic() {
        let d = Domain::unit();
        let a = generate_particles(Distribution::UniformRandom, 5, 7, &d, 0.01).unwrap();
        let b = generate_particles(Distribution::UniformRandom, 5, 7, &d, 0.01).unwrap();
        assert_eq!(a, b);
        let c = generate_particles(Distribution::UniformRandom, 5, 8, &d, 0.01).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn gaussian_patch_is_positive_and_peaks_at_center() {
        let d = Domain::unit();
        let ps = generate_particles(Distribution::GaussianPatch, 1000, 1, &d, 0.01).unwrap();
        assert!(ps.iter().all(|p| p.gamma > 0.0));
        let r2 = |p: &Particle| (p.x - 0.5).powi(2) + (p.y - 0.5).powi(2);
        let nearest = ps.iter().min_by(|a, b| r2(a).total_cmp(&r2(b))).unwrap();
        let strongest = ps.iter().max_by(|a, b| a.gamma.total_cmp(&b.gamma)).unwrap();
        assert_eq!(nearest, strongest);
    }

    #[test]
    fn two_patches_nearly_cancel() {
        let d = Domain::unit();
        let ps = generate_particles(Distribution::TwoPatches, 2000, 3, &d, 0.01).unwrap();
        let total: f64 = ps.iter().map(|p| p.gamma).sum();
        let abs: f64 = ps.iter().map(|p| p.gamma.abs()).sum();
        assert!(total.abs() <= 0.1 * abs, "total {total} vs abs {abs}");
        assert!(ps.iter().any(|p| p.gamma > 0.0) && ps.iter().any(|p| p.gamma < 0.0));
    }

    #[test]
    fn uniform_gamma_range_and_positions() {
        let d = Domain::new(-2.0, 3.0, 0.5).unwrap();
        let ps = generate_particles(Distribution::UniformRandom, 500, 11, &d, 0.0).unwrap();
        assert_eq!(ps.len(), 500);
        for p in &ps {
            assert!((-1.0..=1.0).contains(&p.gamma));
            assert!(d.contains(p.x, p.y));
        }
    }

    #[test]
    fn generator_rejects_bad_arguments() {
        let d = Domain::unit();
        assert!(generate_particles(Distribution::UniformRandom, 0, 1, &d, 0.0).is_err());
        let bad = Domain {
            xmin: 0.0,
            ymin: 0.0,
            side: 0.0,
        };
        assert!(generate_particles(Distribution::UniformRandom, 3, 1, &bad, 0.0).is_err());
        assert!(Domain::new(0.0, 0.0, -1.0).is_err());
    }

    #[test]
    fn csv_round_trip_single() {
        let ps = vec![Particle::new(0.5, 0.5, 1.0, 0.01)];
        let mut buf = Vec::new();
        format_particles(&mut buf, &ps).unwrap();
        assert_eq!(parse_particles(buf.as_slice()).unwrap(), ps);
    }

    #[test]
    fn csv_header_only_is_empty() {
        let ps = parse_particles("x,y,gamma,sigma\n".as_bytes()).unwrap();
        assert!(ps.is_empty());
    }

    #[test]
    fn csv_bad_number_reports_line() {
        let err = parse_particles("x,y,gamma,sigma\n0.1,0.2,notanumber,0.01\n".as_bytes()).unwrap_err();
        match err {
            FmmError::Parse { line, message } => {
                assert_eq!(line, 2);
                assert!(message.contains("gamma"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn csv_missing_header() {
        assert!(matches!(parse_particles("".as_bytes()), Err(FmmError::Format(_))));
        assert!(matches!(
            parse_particles("0.1,0.2,0.3,0.4\n".as_bytes()),
            Err(FmmError::Format(_))
        ));
    }

    #[test]
    fn distribution_names_parse() {
        for d in Distribution::ALL {
            assert_eq!(d.name().parse::<Distribution>().unwrap(), d);
        }
        assert!("spiral".parse::<Distribution>().is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn csv_round_trip_is_exact(
                rows in proptest::collection::vec(
                    (-1e6f64..1e6, -1e6f64..1e6, -1e3f64..1e3, 0f64..1.0), 0..20)
            ) {
                let ps: Vec<Particle> = rows.iter().map(|&(x, y, g, s)| Particle::new(x, y, g, s)).collect();
                let mut buf = Vec::new();
                format_particles(&mut buf, &ps).unwrap();
                let back = parse_particles(buf.as_slice()).unwrap();
                prop_assert_eq!(back, ps);
            }
        }
    }
}
