//! Truncated complex expansions of the 2D vortex kernel.
//!
//! Sources enter through the analytic function `f(z) = sum_j G_j / (z - z_j)`,
//! whose value gives the conjugate velocity `u - i v = f / (2 pi i)`. Working
//! with `f` instead of the log potential keeps every translation a plain
//! binomial convolution:
//!
//! - multipole about `c`: `f(z) ~ sum_{k=0}^{p} a_k / (z - c)^(k+1)`
//! - local about `c`:     `f(z) ~ sum_{m=0}^{p} L_m (z - c)^m`

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{FmmError, Result};
use crate::model::{Particle, Velocity};

/// Largest supported truncation order.
pub const MAX_ORDER: usize = 60;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpansionKind {
    Multipole,
    Local,
}

/// Coefficients `c_0..c_p` about a center.
#[derive(Debug, Clone, PartialEq)]
pub struct Expansion {
    pub kind: ExpansionKind,
    pub center: Complex64,
    pub coeffs: Vec<Complex64>,
}

impl Expansion {
    pub fn zero(kind: ExpansionKind, center: Complex64, p: usize) -> Self {
        Expansion {
            kind,
            center,
            coeffs: vec![ZERO; p + 1],
        }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    fn add_assign(&mut self, other: &[Complex64]) {
        for (a, b) in self.coeffs.iter_mut().zip(other) {
            *a += *b;
        }
    }
}

/// Pascal triangle `C(n, k)` for `n <= 2p + 1`.
#[derive(Debug, Clone)]
struct Binomials {
    rows: Vec<Vec<f64>>,
}

impl Binomials {
    fn new(nmax: usize) -> Self {
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(nmax + 1);
        for n in 0..=nmax {
            let mut row = vec![1.0; n + 1];
            for k in 1..n {
                row[k] = rows[n - 1][k - 1] + rows[n - 1][k];
            }
            rows.push(row);
        }
        Binomials { rows }
    }

    #[inline]
    fn get(&self, n: usize, k: usize) -> f64 {
        self.rows[n][k]
    }
}

/// The four translation operators at a fixed order `p`.
#[derive(Debug, Clone)]
pub struct Translator {
    p: usize,
    binom: Binomials,
}

impl Translator {
    pub fn new(p: usize) -> Result<Self> {
        if p > MAX_ORDER {
            return Err(FmmError::invalid(format!("order {p} exceeds maximum {MAX_ORDER}")));
        }
        Ok(Translator {
            p,
            binom: Binomials::new(2 * p + 1),
        })
    }

    pub fn order(&self) -> usize {
        self.p
    }

    /// Particle-to-multipole: `a_k = sum_j G_j (z_j - center)^k`.
    pub fn p2m<'a, I>(&self, particles: I, center: Complex64) -> Expansion
    where
        I: IntoIterator<Item = &'a Particle>,
    {
        let mut out = Expansion::zero(ExpansionKind::Multipole, center, self.p);
        for part in particles {
            let d = part.z() - center;
            let mut term = Complex64::new(part.gamma, 0.0);
            for c in out.coeffs.iter_mut() {
                *c += term;
                term *= d;
            }
        }
        out
    }

    /// Multipole-to-multipole shift to `new_center`.
    pub fn m2m(&self, child: &Expansion, new_center: Complex64) -> Expansion {
        let mut out = Expansion::zero(ExpansionKind::Multipole, new_center, self.p);
        self.m2m_accumulate(child, &mut out);
        out
    }

    /// Adds the shifted multipole of `child` into `parent`:
    /// `b_m += sum_{k<=m} C(m,k) a_k d^(m-k)` with `d = child.center - parent.center`.
    pub fn m2m_accumulate(&self, child: &Expansion, parent: &mut Expansion) {
        debug_assert_eq!(child.kind, ExpansionKind::Multipole);
        debug_assert_eq!(parent.kind, ExpansionKind::Multipole);
        let d = child.center - parent.center;
        let pw = powers(d, self.p);
        let a = &child.coeffs;
        let kmax = a.len().min(self.p + 1);
        for m in 0..=self.p {
            let mut acc = ZERO;
            for k in 0..=m.min(kmax - 1) {
                acc += a[k] * pw[m - k] * self.binom.get(m, k);
            }
            parent.coeffs[m] += acc;
        }
    }

    /// Multipole-to-local conversion about `local_center`.
    pub fn m2l(&self, source: &Expansion, local_center: Complex64) -> Result<Expansion> {
        let mut out = Expansion::zero(ExpansionKind::Local, local_center, self.p);
        self.m2l_accumulate(source, &mut out)?;
        Ok(out)
    }

    /// Adds `L_m = (-1)^m sum_k C(k+m, k) a_k / t^(k+m+1)`, with
    /// `t = local.center - source.center`, into `local`.
    pub fn m2l_accumulate(&self, source: &Expansion, local: &mut Expansion) -> Result<()> {
        debug_assert_eq!(source.kind, ExpansionKind::Multipole);
        debug_assert_eq!(local.kind, ExpansionKind::Local);
        let t = local.center - source.center;
        if t == ZERO {
            return Err(FmmError::CoincidentCenters);
        }
        let inv_t = t.inv();
        // a_k / t^k stays O((r/t)^k), so no intermediate grows with k.
        let mut scaled = Vec::with_capacity(source.coeffs.len());
        let mut w = Complex64::new(1.0, 0.0);
        for a in &source.coeffs {
            scaled.push(*a * w);
            w *= inv_t;
        }
        let kmax = scaled.len().min(self.p + 1);
        // (-1)^m / t^(m+1)
        let neg_inv_t = -inv_t;
        let mut factor = inv_t;
        for m in 0..=self.p {
            let mut acc = ZERO;
            for (k, s) in scaled.iter().enumerate().take(kmax) {
                acc += *s * self.binom.get(k + m, k);
            }
            local.coeffs[m] += acc * factor;
            factor *= neg_inv_t;
        }
        Ok(())
    }

    /// Re-centers a local expansion. Exact up to rounding.
    pub fn l2l(&self, parent: &Expansion, new_center: Complex64) -> Expansion {
        let mut out = Expansion::zero(ExpansionKind::Local, new_center, self.p);
        self.l2l_accumulate(parent, &mut out);
        out
    }

    /// Adds `L'_n = sum_{m>=n} C(m,n) L_m s^(m-n)`, `s = child.center - parent.center`.
    pub fn l2l_accumulate(&self, parent: &Expansion, child: &mut Expansion) {
        debug_assert_eq!(parent.kind, ExpansionKind::Local);
        debug_assert_eq!(child.kind, ExpansionKind::Local);
        let s = child.center - parent.center;
        let pw = powers(s, self.p);
        let l = &parent.coeffs;
        let mmax = (l.len() - 1).min(self.p);
        for n in 0..=self.p.min(mmax) {
            let mut acc = ZERO;
            for m in n..=mmax {
                acc += l[m] * pw[m - n] * self.binom.get(m, n);
            }
            child.coeffs[n] += acc;
        }
    }

    /// Sums `src` into `dst` (same kind and center).
    pub fn add_into(&self, src: &Expansion, dst: &mut Expansion) {
        debug_assert_eq!(src.kind, dst.kind);
        debug_assert_eq!(src.center, dst.center);
        dst.add_assign(&src.coeffs);
    }
}

fn powers(z: Complex64, p: usize) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(p + 1);
    let mut w = Complex64::new(1.0, 0.0);
    for _ in 0..=p {
        out.push(w);
        w *= z;
    }
    out
}

/// `sum_k a_k / (z - c)^(k+1)` by Horner's rule in `1 / (z - c)`.
pub fn eval_multipole(exp: &Expansion, z: Complex64) -> Result<Complex64> {
    let d = z - exp.center;
    if d == ZERO {
        return Err(FmmError::SingularEvaluation);
    }
    let w = d.inv();
    let mut acc = ZERO;
    for a in exp.coeffs.iter().rev() {
        acc = acc * w + *a;
    }
    Ok(acc * w)
}

/// `sum_m L_m (z - c)^m` by Horner's rule.
pub fn eval_local(exp: &Expansion, z: Complex64) -> Complex64 {
    let d = z - exp.center;
    let mut acc = ZERO;
    for l in exp.coeffs.iter().rev() {
        acc = acc * d + *l;
    }
    acc
}

/// Converts `f` to velocity through `u - i v = f / (2 pi i)`, i.e.
/// `(u, v) = (Im f, Re f) / (2 pi)`.
#[inline]
pub fn f_to_velocity(f: Complex64) -> Velocity {
    Velocity::new(f.im / (2.0 * PI), f.re / (2.0 * PI))
}

/// `sum_j G_j / (z - z_j)`, skipping sources that coincide with `z`.
pub fn direct_f<'a, I>(sources: I, z: Complex64) -> Complex64
where
    I: IntoIterator<Item = &'a Particle>,
{
    let mut acc = ZERO;
    for s in sources {
        let d = z - s.z();
        if d != ZERO {
            acc += d.inv() * s.gamma;
        }
    }
    acc
}

/// Inputs of the geometric tail bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundParams {
    /// Scale of the series terms; for a cluster this is
    /// `sum |G_j| / R` with `R` the distance scale of the first term.
    pub amplitude: f64,
    /// Convergence ratio in `(0, 1)`.
    pub rho: f64,
}

impl BoundParams {
    pub fn new(amplitude: f64, rho: f64) -> Result<Self> {
        if amplitude.is_nan() || amplitude < 0.0 {
            return Err(FmmError::invalid(format!("amplitude must be >= 0, got {amplitude}")));
        }
        if !(rho > 0.0 && rho < 1.0) {
            return Err(FmmError::invalid(format!("rho must lie in (0, 1), got {rho}")));
        }
        Ok(BoundParams { amplitude, rho })
    }

    /// Bound parameters for the multipole of sources within `radius` of its
    /// center, evaluated at distance `distance` from that center.
    ///
    /// Each source term satisfies `|G (z_j - c)^k / (z - c)^(k+1)| <=
    /// |G| / distance * rho^k`, so the amplitude carries the `1 / distance`.
    pub fn for_cluster(abs_circulation: f64, radius: f64, distance: f64) -> Result<Self> {
        if distance.is_nan() || radius.is_nan() || distance <= radius {
            return Err(FmmError::invalid("evaluation point inside the source disk"));
        }
        BoundParams::new(abs_circulation / distance, radius / distance)
    }
}

/// `A rho^(p+1) / (1 - rho)`: the geometric tail of a series whose k-th
/// term is bounded by `A rho^k`.
pub fn truncation_bound(params: &BoundParams, p: usize) -> Result<f64> {
    let BoundParams { amplitude, rho } = *params;
    if !(rho > 0.0 && rho < 1.0) {
        return Err(FmmError::invalid(format!("rho must lie in (0, 1), got {rho}")));
    }
    Ok(amplitude * rho.powi(p as i32 + 1) / (1.0 - rho))
}

/// Worst-case error of one M2L interaction between two equal cells of
/// half-width `half_width` whose centers are `center_distance` apart,
/// evaluated anywhere inside the target cell.
///
/// With `r = sqrt(2) * half_width` and `rho = r / (D - r)`, both the
/// multipole truncation and the truncation of the local series are bounded
/// by `A rho^(p+1) / (1 - rho)` with `A = sum |G| / (D - r)`; the budget is
/// their sum.
pub fn interaction_bound(abs_circulation: f64, half_width: f64, center_distance: f64, p: usize) -> Result<f64> {
    let r = std::f64::consts::SQRT_2 * half_width;
    let params = BoundParams::for_cluster(abs_circulation, r, center_distance - r)?;
    Ok(2.0 * truncation_bound(&params, p)?)
}
