//! Uniform quadtree over a square domain.
//!
//! Level 0 is the root; leaves sit at level `l`. Every one of the `4^k`
//! cells at level `k` exists logically; empty cells simply hold no
//! particles. Cells within a level are enumerated row-major (`iy` outer).

use num_complex::Complex64;

use crate::error::{FmmError, Result};
use crate::model::{Domain, Particle};

/// Deepest supported tree. Keeps `4^l` cell tables addressable.
pub const MAX_LEVELS: u32 = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellId {
    pub level: u32,
    pub ix: u32,
    pub iy: u32,
}

impl CellId {
    pub fn new(level: u32, ix: u32, iy: u32) -> Self {
        debug_assert!(ix < (1 << level) && iy < (1 << level));
        CellId { level, ix, iy }
    }

    pub fn root() -> Self {
        CellId { level: 0, ix: 0, iy: 0 }
    }

    /// Cells per side at this level.
    #[inline]
    pub fn side_count(&self) -> u32 {
        1 << self.level
    }

    /// Row-major position within its level.
    #[inline]
    pub fn flat(&self) -> usize {
        self.iy as usize * self.side_count() as usize + self.ix as usize
    }

    pub fn from_flat(level: u32, flat: usize) -> Self {
        let n = 1usize << level;
        CellId::new(level, (flat % n) as u32, (flat / n) as u32)
    }

    pub fn parent(&self) -> Option<CellId> {
        (self.level > 0).then(|| CellId::new(self.level - 1, self.ix / 2, self.iy / 2))
    }

    /// The ancestor at `level` (itself when `level == self.level`).
    pub fn ancestor(&self, level: u32) -> CellId {
        assert!(level <= self.level);
        let shift = self.level - level;
        CellId::new(level, self.ix >> shift, self.iy >> shift)
    }

    /// Children in row-major order.
    pub fn children(&self) -> [CellId; 4] {
        let (x, y, l) = (2 * self.ix, 2 * self.iy, self.level + 1);
        [
            CellId::new(l, x, y),
            CellId::new(l, x + 1, y),
            CellId::new(l, x, y + 1),
            CellId::new(l, x + 1, y + 1),
        ]
    }

    /// Chebyshev distance in index space; meaningful within one level.
    pub fn index_distance(&self, other: &CellId) -> u32 {
        debug_assert_eq!(self.level, other.level);
        self.ix.abs_diff(other.ix).max(self.iy.abs_diff(other.iy))
    }

    /// Same-level cells touching this one (edges or corners), row-major.
    pub fn neighbors(&self) -> Vec<CellId> {
        let n = self.side_count() as i64;
        let mut out = Vec::with_capacity(8);
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let (x, y) = (self.ix as i64 + dx, self.iy as i64 + dy);
                if (0..n).contains(&x) && (0..n).contains(&y) {
                    out.push(CellId::new(self.level, x as u32, y as u32));
                }
            }
        }
        out
    }

    /// Children of the parent's neighbors that are not adjacent to this
    /// cell, in row-major order. Empty above level 2.
    pub fn interaction_list(&self) -> Vec<CellId> {
        if self.level < 2 {
            return Vec::new();
        }
        let parent = self.parent().expect("level >= 2 has a parent");
        let mut out: Vec<CellId> = parent
            .neighbors()
            .iter()
            .flat_map(|p| p.children())
            .filter(|c| self.index_distance(c) >= 2)
            .collect();
        out.sort_by_key(|c| (c.iy, c.ix));
        out
    }
}

/// Cells per side at `level`.
#[inline]
pub fn cells_per_side(level: u32) -> usize {
    1usize << level
}

/// Index of the grid bin holding `(x, y)` on a `dim x dim` grid over the
/// domain. Cells are half-open except at the max edges, which clamp into
/// the last bin.
pub fn grid_index(x: f64, y: f64, dim: usize, domain: &Domain) -> Result<(usize, usize)> {
    if !domain.contains(x, y) {
        return Err(FmmError::OutOfDomain { x, y });
    }
    let scale = dim as f64 / domain.side;
    let fx = ((x - domain.xmin) * scale).floor() as usize;
    let fy = ((y - domain.ymin) * scale).floor() as usize;
    Ok((fx.min(dim - 1), fy.min(dim - 1)))
}

/// The level-`level` cell containing a position.
pub fn cell_index(position: (f64, f64), level: u32, domain: &Domain) -> Result<CellId> {
    let (ix, iy) = grid_index(position.0, position.1, cells_per_side(level), domain)?;
    Ok(CellId::new(level, ix as u32, iy as u32))
}

/// Uniform quadtree with particle indices bucketed at the leaves.
#[derive(Debug, Clone)]
pub struct Tree {
    domain: Domain,
    levels: u32,
    /// Particle indices per leaf, row-major, ascending within a leaf.
    leaves: Vec<Vec<usize>>,
    leaf_of: Vec<CellId>,
    /// Per level, whether the cell holds any particle.
    occupied: Vec<Vec<bool>>,
}

impl Tree {
    /// Buckets particle positions into the level-`levels` leaves.
    pub fn build(particles: &[Particle], levels: u32, domain: &Domain) -> Result<Tree> {
        let positions: Vec<(f64, f64)> = particles.iter().map(Particle::position).collect();
        Tree::build_from_points(&positions, levels, domain)
    }

    pub fn build_from_points(points: &[(f64, f64)], levels: u32, domain: &Domain) -> Result<Tree> {
        if levels < 2 {
            return Err(FmmError::invalid(format!("tree needs at least 2 levels, got {levels}")));
        }
        if levels > MAX_LEVELS {
            return Err(FmmError::invalid(format!("tree depth {levels} exceeds {MAX_LEVELS}")));
        }
        let n = cells_per_side(levels);
        let mut leaves = vec![Vec::new(); n * n];
        let mut leaf_of = Vec::with_capacity(points.len());
        for (i, &(x, y)) in points.iter().enumerate() {
            let id = cell_index((x, y), levels, domain)
                .map_err(|_| FmmError::ParticleOutOfDomain { index: i, x, y })?;
            leaves[id.flat()].push(i);
            leaf_of.push(id);
        }

        let mut occupied = vec![Vec::new(); levels as usize + 1];
        occupied[levels as usize] = leaves.iter().map(|l| !l.is_empty()).collect();
        for level in (0..levels).rev() {
            let m = cells_per_side(level);
            let below = &occupied[level as usize + 1];
            let mut here = vec![false; m * m];
            for (flat, slot) in here.iter_mut().enumerate() {
                let id = CellId::from_flat(level, flat);
                *slot = id.children().iter().any(|c| below[c.flat()]);
            }
            occupied[level as usize] = here;
        }

        Ok(Tree {
            domain: *domain,
            levels,
            leaves,
            leaf_of,
            occupied,
        })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn levels(&self) -> u32 {
        self.levels
    }

    pub fn num_points(&self) -> usize {
        self.leaf_of.len()
    }

    /// Leaf cell of point `i`.
    pub fn leaf_of(&self, i: usize) -> CellId {
        self.leaf_of[i]
    }

    /// Point indices in a leaf, ascending.
    pub fn leaf_points(&self, id: CellId) -> &[usize] {
        assert_eq!(id.level, self.levels, "not a leaf");
        &self.leaves[id.flat()]
    }

    pub fn is_occupied(&self, id: CellId) -> bool {
        self.occupied[id.level as usize][id.flat()]
    }

    /// All cells of a level in row-major order.
    pub fn cells(&self, level: u32) -> impl Iterator<Item = CellId> {
        let m = cells_per_side(level);
        (0..m * m).map(move |f| CellId::from_flat(level, f))
    }

    /// Occupied leaves, row-major.
    pub fn occupied_leaves(&self) -> impl Iterator<Item = CellId> + '_ {
        self.cells(self.levels).filter(|c| self.is_occupied(*c))
    }

    pub fn max_leaf_occupancy(&self) -> usize {
        self.leaves.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Half the side length of cells at `level`.
    pub fn half_width(&self, level: u32) -> f64 {
        self.domain.side / (1u64 << (level + 1)) as f64
    }

    pub fn center(&self, id: CellId) -> Complex64 {
        let w = self.domain.side / cells_per_side(id.level) as f64;
        Complex64::new(
            self.domain.xmin + (id.ix as f64 + 0.5) * w,
            self.domain.ymin + (id.iy as f64 + 0.5) * w,
        )
    }
}
