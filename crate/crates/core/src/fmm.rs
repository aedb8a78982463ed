//! The uniform-tree FMM: P2M at the leaves, M2M up to level 2, M2L across
//! interaction lists, L2L down to the leaves, then L2P for the far field and
//! direct sums over the leaf and its neighbors for the near field.
//!
//! Everything runs single-threaded in a fixed order, so a given input always
//! produces the same bits.

use std::time::{Duration, Instant};

use log::warn;
use num_complex::Complex64;

use crate::error::{FmmError, Result};
use crate::expansions::{eval_local, f_to_velocity, interaction_bound, Expansion, ExpansionKind, Translator};
use crate::kernels::{kernel_eval, KernelKind};
use crate::model::{Domain, Particle, Velocity};
use crate::quadtree::{cells_per_side, CellId, Tree};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FmmConfig {
    /// Leaf level `l` (the tree has levels `0..=l`).
    pub levels: u32,
    /// Truncation order `p`.
    pub order: usize,
    pub kernel: KernelKind,
}

impl FmmConfig {
    pub fn new(levels: u32, order: usize, kernel: KernelKind) -> Result<Self> {
        let cfg = FmmConfig { levels, order, kernel };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels < 2 {
            return Err(FmmError::invalid(format!("levels must be >= 2, got {}", self.levels)));
        }
        if self.levels > crate::quadtree::MAX_LEVELS {
            return Err(FmmError::invalid(format!("levels must be <= {}", crate::quadtree::MAX_LEVELS)));
        }
        if self.order > crate::expansions::MAX_ORDER {
            return Err(FmmError::invalid(format!(
                "order must be <= {}, got {}",
                crate::expansions::MAX_ORDER,
                self.order
            )));
        }
        Ok(())
    }
}

/// Phase timings and exact operation counts of one evaluation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FmmRunStats {
    pub n: usize,
    pub levels: u32,
    pub order: usize,
    pub t_build: Duration,
    pub t_upward: Duration,
    pub t_m2l: Duration,
    pub t_downward: Duration,
    /// Near field plus L2P.
    pub t_near: Duration,
    pub t_total: Duration,
    /// Ordered (target, source) pairs summed directly.
    pub near_pair_count: u64,
    /// M2L translations performed.
    pub m2l_count: u64,
    /// Some core radius exceeded half the leaf half-width, so the far field
    /// misses part of the blob regularization.
    pub blob_guard_exceeded: bool,
}

/// Multipole and local expansions for levels `2..=l`, row-major per level.
/// Empty cells hold `None`.
#[derive(Debug, Clone)]
pub struct FarField {
    levels: u32,
    order: usize,
    multipoles: Vec<Vec<Option<Expansion>>>,
    locals: Vec<Vec<Option<Expansion>>>,
}

impl FarField {
    fn empty(levels: u32, order: usize) -> Self {
        let per_level = |k: u32| {
            if k < 2 {
                Vec::new()
            } else {
                vec![None; cells_per_side(k) * cells_per_side(k)]
            }
        };
        FarField {
            levels,
            order,
            multipoles: (0..=levels).map(per_level).collect(),
            locals: (0..=levels).map(per_level).collect(),
        }
    }

    pub fn levels(&self) -> u32 {
        self.levels
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn multipole(&self, id: CellId) -> Option<&Expansion> {
        self.multipoles.get(id.level as usize)?.get(id.flat())?.as_ref()
    }

    pub fn local(&self, id: CellId) -> Option<&Expansion> {
        self.locals.get(id.level as usize)?.get(id.flat())?.as_ref()
    }
}

/// P2M at every occupied leaf, then M2M from occupied children for levels
/// `l-1` down to 2.
pub fn upward_pass(tree: &Tree, particles: &[Particle], translator: &Translator) -> FarField {
    let levels = tree.levels();
    let mut far = FarField::empty(levels, translator.order());

    for leaf in tree.occupied_leaves() {
        let center = tree.center(leaf);
        let exp = translator.p2m(tree.leaf_points(leaf).iter().map(|&i| &particles[i]), center);
        far.multipoles[levels as usize][leaf.flat()] = Some(exp);
    }

    for level in (2..levels).rev() {
        let (upper, lower) = far.multipoles.split_at_mut(level as usize + 1);
        let (here, below) = (&mut upper[level as usize], &lower[0]);
        for cell in tree.cells(level) {
            if !tree.is_occupied(cell) {
                continue;
            }
            let mut exp = Expansion::zero(ExpansionKind::Multipole, tree.center(cell), translator.order());
            for child in cell.children() {
                if let Some(m) = &below[child.flat()] {
                    translator.m2m_accumulate(m, &mut exp);
                }
            }
            here[cell.flat()] = Some(exp);
        }
    }
    far
}

/// M2L into every cell of `targets` occupied at levels `2..=l`, from each
/// occupied member of its interaction list (row-major). Returns the number
/// of translations.
pub fn translate_pass(sources: &Tree, targets: &Tree, far: &mut FarField, translator: &Translator) -> Result<u64> {
    let mut count = 0u64;
    for level in 2..=targets.levels() {
        for cell in targets.cells(level) {
            if !targets.is_occupied(cell) {
                continue;
            }
            let mut local = Expansion::zero(ExpansionKind::Local, targets.center(cell), translator.order());
            for src in cell.interaction_list() {
                if !sources.is_occupied(src) {
                    continue;
                }
                let m = far.multipole(src).expect("occupied source cell has a multipole");
                translator.m2l_accumulate(m, &mut local)?;
                count += 1;
            }
            far.locals[level as usize][cell.flat()] = Some(local);
        }
    }
    Ok(count)
}

/// Adds L2L of each parent's completed local into its occupied children,
/// top-down from level 3.
pub fn downward_pass(targets: &Tree, far: &mut FarField, translator: &Translator) {
    for level in 3..=targets.levels() {
        let (upper, lower) = far.locals.split_at_mut(level as usize);
        let (parents, here) = (&upper[level as usize - 1], &mut lower[0]);
        for cell in targets.cells(level) {
            let Some(local) = here[cell.flat()].as_mut() else {
                continue;
            };
            let parent = cell.parent().expect("level >= 3");
            if let Some(pl) = &parents[parent.flat()] {
                translator.l2l_accumulate(pl, local);
            }
        }
    }
}

/// Far-field `f` at each target from its leaf's local expansion.
pub fn far_field_f(targets: &Tree, points: &[(f64, f64)], far: &FarField) -> Vec<Complex64> {
    points
        .iter()
        .enumerate()
        .map(|(i, &(x, y))| match far.local(targets.leaf_of(i)) {
            Some(l) => eval_local(l, Complex64::new(x, y)),
            None => Complex64::new(0.0, 0.0),
        })
        .collect()
}

/// Direct sum over the target's own leaf and its neighbor leaves, sources in
/// row-major leaf order and ascending index within a leaf. When
/// `self_targets` is set, target `i` is particle `i` and skips itself.
/// Returns the velocities and the number of pairs summed.
pub fn near_field(
    sources: &Tree,
    particles: &[Particle],
    targets: &Tree,
    points: &[(f64, f64)],
    kind: KernelKind,
    self_targets: bool,
) -> (Vec<Velocity>, u64) {
    let mut out = vec![Velocity::ZERO; points.len()];
    let mut pairs = 0u64;
    for leaf in targets.occupied_leaves() {
        let mut region = leaf.neighbors();
        region.push(leaf);
        region.sort_by_key(|c| (c.iy, c.ix));
        for &t in targets.leaf_points(leaf) {
            let mut acc = Velocity::ZERO;
            for cell in &region {
                for &j in sources.leaf_points(*cell) {
                    if self_targets && j == t {
                        continue;
                    }
                    acc += kernel_eval(points[t], &particles[j], kind);
                    pairs += 1;
                }
            }
            out[t] = acc;
        }
    }
    (out, pairs)
}

/// Result of [`evaluate`].
#[derive(Debug, Clone)]
pub struct FmmOutput {
    pub velocities: Vec<Velocity>,
    pub stats: FmmRunStats,
}

/// FMM velocities at the particle positions.
pub fn evaluate(particles: &[Particle], domain: &Domain, config: &FmmConfig) -> Result<FmmOutput> {
    let start = Instant::now();
    config.validate()?;
    if particles.is_empty() {
        return Err(FmmError::invalid("no particles"));
    }
    let points: Vec<(f64, f64)> = particles.iter().map(Particle::position).collect();
    let tree = Tree::build(particles, config.levels, domain)?;
    let t_build = start.elapsed();
    run_passes(particles, &tree, &tree, &points, true, config, start, t_build)
}

/// FMM velocities at arbitrary targets inside the domain.
pub fn evaluate_at(
    targets: &[(f64, f64)],
    particles: &[Particle],
    domain: &Domain,
    config: &FmmConfig,
) -> Result<FmmOutput> {
    let start = Instant::now();
    config.validate()?;
    if particles.is_empty() {
        return Err(FmmError::invalid("no particles"));
    }
    let sources = Tree::build(particles, config.levels, domain)?;
    let target_tree = Tree::build_from_points(targets, config.levels, domain)?;
    let t_build = start.elapsed();
    run_passes(particles, &sources, &target_tree, targets, false, config, start, t_build)
}

#[allow(clippy::too_many_arguments)]
fn run_passes(
    particles: &[Particle],
    sources: &Tree,
    targets: &Tree,
    points: &[(f64, f64)],
    self_targets: bool,
    config: &FmmConfig,
    start: Instant,
    t_build: Duration,
) -> Result<FmmOutput> {
    let blob_guard_exceeded = check_blob_guard(particles, sources, config);
    let translator = Translator::new(config.order)?;

    let t0 = Instant::now();
    let mut far = upward_pass(sources, particles, &translator);
    let t_upward = t0.elapsed();

    let t0 = Instant::now();
    let m2l_count = translate_pass(sources, targets, &mut far, &translator)?;
    let t_m2l = t0.elapsed();

    let t0 = Instant::now();
    downward_pass(targets, &mut far, &translator);
    let t_downward = t0.elapsed();

    let t0 = Instant::now();
    let far_f = far_field_f(targets, points, &far);
    let (near, near_pair_count) = near_field(sources, particles, targets, points, config.kernel, self_targets);
    let velocities: Vec<Velocity> = far_f
        .iter()
        .zip(&near)
        .map(|(f, v)| f_to_velocity(*f) + *v)
        .collect();
    let t_near = t0.elapsed();

    let stats = FmmRunStats {
        n: particles.len(),
        levels: config.levels,
        order: config.order,
        t_build,
        t_upward,
        t_m2l,
        t_downward,
        t_near,
        t_total: start.elapsed(),
        near_pair_count,
        m2l_count,
        blob_guard_exceeded,
    };
    Ok(FmmOutput { velocities, stats })
}

fn check_blob_guard(particles: &[Particle], tree: &Tree, config: &FmmConfig) -> bool {
    if config.kernel != KernelKind::GaussianBlob {
        return false;
    }
    let limit = 0.5 * tree.half_width(tree.levels());
    let max_sigma = particles.iter().map(|p| p.sigma).fold(0.0, f64::max);
    if max_sigma > limit {
        warn!(
            "core radius {max_sigma} exceeds half the leaf half-width ({limit}); \
             far-field interactions ignore the blob regularization"
        );
        true
    } else {
        false
    }
}

/// Worst-case `|f_fmm - f_exact|` for each particle, summing
/// [`interaction_bound`] over every M2L translation that reaches the
/// particle's leaf. For the Gaussian kernel the far-field blob correction
/// `sum |G| exp(-d^2 / (2 sigma^2)) / d`, `d` the leaf side, is added.
pub fn bound_budgets(particles: &[Particle], domain: &Domain, config: &FmmConfig) -> Result<Vec<f64>> {
    config.validate()?;
    let tree = Tree::build(particles, config.levels, domain)?;
    let levels = config.levels;

    // sum |G| per cell at every level
    let mut abs_gamma: Vec<Vec<f64>> = (0..=levels)
        .map(|k| vec![0.0; cells_per_side(k) * cells_per_side(k)])
        .collect();
    for (i, p) in particles.iter().enumerate() {
        let leaf = tree.leaf_of(i);
        for k in 0..=levels {
            abs_gamma[k as usize][leaf.ancestor(k).flat()] += p.gamma.abs();
        }
    }

    let mut per_cell: Vec<Vec<f64>> = (0..=levels)
        .map(|k| vec![0.0; cells_per_side(k) * cells_per_side(k)])
        .collect();
    for level in 2..=levels {
        let hw = tree.half_width(level);
        for cell in tree.cells(level) {
            if !tree.is_occupied(cell) {
                continue;
            }
            let c = tree.center(cell);
            let mut b = 0.0;
            for src in cell.interaction_list() {
                let a = abs_gamma[level as usize][src.flat()];
                if a > 0.0 {
                    b += interaction_bound(a, hw, (tree.center(src) - c).norm(), config.order)?;
                }
            }
            per_cell[level as usize][cell.flat()] = b;
        }
    }

    let blob = if config.kernel == KernelKind::GaussianBlob {
        let d = 2.0 * tree.half_width(levels);
        let total: f64 = particles.iter().map(|p| p.gamma.abs()).sum();
        let max_sigma = particles.iter().map(|p| p.sigma).fold(0.0, f64::max);
        if max_sigma > 0.0 {
            total * (-d * d / (2.0 * max_sigma * max_sigma)).exp() / d
        } else {
            0.0
        }
    } else {
        0.0
    };

    Ok((0..particles.len())
        .map(|i| {
            let leaf = tree.leaf_of(i);
            (2..=levels)
                .map(|k| per_cell[k as usize][leaf.ancestor(k).flat()])
                .sum::<f64>()
                + blob
        })
        .collect())
}
