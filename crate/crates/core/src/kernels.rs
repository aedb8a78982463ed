//! Direct Biot-Savart evaluation. This is both the near-field kernel of the
//! FMM and the O(N^2) reference every error measurement is taken against.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::FmmError;
use crate::model::{Particle, Velocity};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelKind {
    /// Singular point vortex.
    PointVortex,
    /// Point vortex mollified by `1 - exp(-r^2 / (2 sigma^2))`.
    GaussianBlob,
}

impl KernelKind {
    /// Short name used on the command line and in CSV output.
    pub fn name(&self) -> &'static str {
        match self {
            KernelKind::PointVortex => "point",
            KernelKind::GaussianBlob => "gaussian",
        }
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelKind {
    type Err = FmmError;

    fn from_str(s: &str) -> Result<Self, FmmError> {
        match s {
            "point" | "point_vortex" => Ok(KernelKind::PointVortex),
            "gaussian" | "gaussian_blob" => Ok(KernelKind::GaussianBlob),
            other => Err(FmmError::invalid(format!("unknown kernel `{other}`"))),
        }
    }
}

/// Gaussian core factor `1 - exp(-r^2 / (2 sigma^2))`. A non-positive sigma
/// degenerates to the point vortex (factor 1).
#[inline]
pub fn regularization_factor(r2: f64, sigma: f64) -> f64 {
    if sigma > 0.0 {
        -(-r2 / (2.0 * sigma * sigma)).exp_m1()
    } else {
        1.0
    }
}

/// Velocity induced at `target` by one particle. Coincident target and
/// source give zero for both kernels.
#[inline]
pub fn kernel_eval(target: (f64, f64), source: &Particle, kind: KernelKind) -> Velocity {
    let dx = target.0 - source.x;
    let dy = target.1 - source.y;
    let r2 = dx * dx + dy * dy;
    if r2 == 0.0 {
        return Velocity::ZERO;
    }
    let mut s = source.gamma / (2.0 * PI * r2);
    if kind == KernelKind::GaussianBlob {
        s *= regularization_factor(r2, source.sigma);
    }
    Velocity::new(-s * dy, s * dx)
}

/// Sum of [`kernel_eval`] over all sources for each target, accumulated in
/// source-index order.
pub fn velocity_direct(targets: &[(f64, f64)], sources: &[Particle], kind: KernelKind) -> Vec<Velocity> {
    targets
        .iter()
        .map(|&t| {
            let mut acc = Velocity::ZERO;
            for s in sources {
                acc += kernel_eval(t, s, kind);
            }
            acc
        })
        .collect()
}

/// [`velocity_direct`] with the particles themselves as targets.
pub fn velocity_direct_at_particles(particles: &[Particle], kind: KernelKind) -> Vec<Velocity> {
    let targets: Vec<(f64, f64)> = particles.iter().map(Particle::position).collect();
    velocity_direct(&targets, particles, kind)
}
