//! Finite tori carrying the periodic external field.
//!
//! A torus is built from `n1 x n2` copies of the field's basic cell, giving
//! `width = n1 * L1` and `height = n2 * L2` sites. The alternating-strips
//! model is treated as a cell-board whose horizontal cell length is 1 for the
//! purpose of blocks and reflection lines while its field only varies along
//! the second axis.
//!
//! Sites use canonical coordinates `t1 in [0, width)`, `t2 in [0, height)` and
//! the row-major index `t2 * width + t1`. Negative coordinates wrap. The block
//! `Λ` keeps its natural placement around the origin (`-⌊(L+1)/2⌋ ..= ⌊(L-1)/2⌋`
//! along each axis), so block `(0, 0)` contains site `(0, 0)` and the
//! reflection lines `Q_i` sit at coordinate `-1/2`.

mod blocks;
mod config;

pub use blocks::{
    apply_reflection, block_sites, double_block_sites, propagate, tile_configuration, tile_pattern,
    Anchor, BlockCoord, BlockShape, BlockTiling, DoubleBlockKind, PartialConfig, ReflectionPlane,
    Through,
};
pub use config::SpinConfig;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest torus (in sites) any geometry may allocate.
pub const MAX_SITES: usize = 1 << 22;

/// Shape of the external field.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FieldPattern {
    /// `L1 x L2` cells with alternating sign, `+h` on cells with even `n + m`.
    CellBoard { l1: usize, l2: usize },
    /// Full-width horizontal strips of height `L`, `+h` on even strips.
    Strip { l: usize },
}

impl FieldPattern {
    pub fn tag(&self) -> &'static str {
        match self {
            FieldPattern::CellBoard { .. } => "cell-board",
            FieldPattern::Strip { .. } => "strip",
        }
    }

    /// Cell length along `axis` used by blocks and reflection lines.
    pub fn cell_length(&self, axis: Axis) -> usize {
        match (*self, axis) {
            (FieldPattern::CellBoard { l1, .. }, Axis::First) => l1,
            (FieldPattern::CellBoard { l2, .. }, Axis::Second) => l2,
            (FieldPattern::Strip { .. }, Axis::First) => 1,
            (FieldPattern::Strip { l }, Axis::Second) => l,
        }
    }
}

/// Lattice axis: `First` is the `t1` direction, `Second` the `t2` direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    First,
    Second,
}

impl Axis {
    pub const BOTH: [Axis; 2] = [Axis::First, Axis::Second];

    pub fn index(self) -> usize {
        match self {
            Axis::First => 0,
            Axis::Second => 1,
        }
    }
}

/// A lattice site in canonical torus coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Site {
    pub t1: usize,
    pub t2: usize,
}

impl Site {
    pub fn new(t1: usize, t2: usize) -> Self {
        Site { t1, t2 }
    }
}

/// Serializable provenance record of a geometry.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeometryDescription {
    #[serde(flatten)]
    pub pattern: FieldPattern,
    pub n1: usize,
    pub n2: usize,
    pub width: usize,
    pub height: usize,
}

/// Neighbour slots of a site: right, up, left, down.
pub const RIGHT: usize = 0;
pub const UP: usize = 1;
pub const LEFT: usize = 2;
pub const DOWN: usize = 3;

/// A torus with its field pattern. Immutable after construction.
#[derive(Clone, Debug)]
pub struct ModelGeometry {
    pattern: FieldPattern,
    n1: usize,
    n2: usize,
    width: usize,
    height: usize,
    field: Vec<i8>,
    neighbors: Vec<[u32; 4]>,
}

impl PartialEq for ModelGeometry {
    fn eq(&self, other: &Self) -> bool {
        self.pattern == other.pattern && self.n1 == other.n1 && self.n2 == other.n2
    }
}

impl Eq for ModelGeometry {}

/// Builds the geometry of `kind` at scale `n`.
///
/// Cell-boards need an even `n`; strips need `n` divisible by 4.
pub fn build_geometry(kind: FieldPattern, n: usize) -> Result<ModelGeometry> {
    match kind {
        FieldPattern::CellBoard { .. } if n % 2 != 0 => Err(Error::InvalidGeometry(format!(
            "cell-board torus scale N = {n} must be even"
        ))),
        FieldPattern::Strip { .. } if n % 4 != 0 => Err(Error::InvalidGeometry(format!(
            "strip torus scale N = {n} must be a multiple of 4"
        ))),
        _ => ModelGeometry::new(kind, n, n),
    }
}

impl ModelGeometry {
    /// Torus of `n1 x n2` cells. Both counts must be even and positive so that
    /// the field is balanced and the propagated tilings close up.
    pub fn new(pattern: FieldPattern, n1: usize, n2: usize) -> Result<Self> {
        let (l1, l2) = (
            pattern.cell_length(Axis::First),
            pattern.cell_length(Axis::Second),
        );
        if l1 == 0 || l2 == 0 {
            return Err(Error::InvalidGeometry(
                "cell lengths must be positive".into(),
            ));
        }
        for (name, n) in [("n1", n1), ("n2", n2)] {
            if n == 0 || n % 2 != 0 {
                return Err(Error::InvalidGeometry(format!(
                    "{name} = {n} must be a positive even number"
                )));
            }
        }
        let width = n1
            .checked_mul(l1)
            .ok_or_else(|| Error::InvalidGeometry("width overflows".into()))?;
        let height = n2
            .checked_mul(l2)
            .ok_or_else(|| Error::InvalidGeometry("height overflows".into()))?;
        let sites = width
            .checked_mul(height)
            .filter(|&s| s <= MAX_SITES)
            .ok_or(Error::GuardExceeded {
                what: "torus sites",
                got: width.saturating_mul(height),
                limit: MAX_SITES,
            })?;

        let mut field = Vec::with_capacity(sites);
        let mut neighbors = Vec::with_capacity(sites);
        for t2 in 0..height {
            for t1 in 0..width {
                let even = match pattern {
                    FieldPattern::CellBoard { l1, l2 } => (t1 / l1 + t2 / l2) % 2 == 0,
                    FieldPattern::Strip { l } => (t2 / l) % 2 == 0,
                };
                field.push(if even { 1 } else { -1 });
                let idx = |a: usize, b: usize| (b * width + a) as u32;
                neighbors.push([
                    idx((t1 + 1) % width, t2),
                    idx(t1, (t2 + 1) % height),
                    idx((t1 + width - 1) % width, t2),
                    idx(t1, (t2 + height - 1) % height),
                ]);
            }
        }
        Ok(ModelGeometry {
            pattern,
            n1,
            n2,
            width,
            height,
            field,
            neighbors,
        })
    }

    pub fn cell_board(l1: usize, l2: usize, n: usize) -> Result<Self> {
        build_geometry(FieldPattern::CellBoard { l1, l2 }, n)
    }

    pub fn strip(l: usize, n: usize) -> Result<Self> {
        build_geometry(FieldPattern::Strip { l }, n)
    }

    pub fn pattern(&self) -> FieldPattern {
        self.pattern
    }

    pub fn is_strip(&self) -> bool {
        matches!(self.pattern, FieldPattern::Strip { .. })
    }

    /// Number of cells (equivalently of `Λ`-blocks) along `axis`.
    pub fn cells(&self, axis: Axis) -> usize {
        match axis {
            Axis::First => self.n1,
            Axis::Second => self.n2,
        }
    }

    pub fn cell_length(&self, axis: Axis) -> usize {
        self.pattern.cell_length(axis)
    }

    /// Side `B_i` of the block `Λ`: `L_i` for even `L_i`, `L_i + 1` for odd.
    pub fn block_side(&self, axis: Axis) -> usize {
        let l = self.cell_length(axis);
        if l % 2 == 0 {
            l
        } else {
            l + 1
        }
    }

    /// `B1 * B2`.
    pub fn block_size(&self) -> usize {
        self.block_side(Axis::First) * self.block_side(Axis::Second)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn extent(&self, axis: Axis) -> usize {
        match axis {
            Axis::First => self.width,
            Axis::Second => self.height,
        }
    }

    pub fn num_sites(&self) -> usize {
        self.width * self.height
    }

    /// Number of directed bonds (`right` and `up` from every site).
    pub fn num_bonds(&self) -> usize {
        2 * self.num_sites()
    }

    #[inline]
    pub fn index(&self, site: Site) -> usize {
        site.t2 * self.width + site.t1
    }

    #[inline]
    pub fn site(&self, index: usize) -> Site {
        Site::new(index % self.width, index / self.width)
    }

    /// Index of `(t1, t2)` after wrapping both coordinates onto the torus.
    #[inline]
    pub fn wrapped_index(&self, t1: i64, t2: i64) -> usize {
        let x = t1.rem_euclid(self.width as i64) as usize;
        let y = t2.rem_euclid(self.height as i64) as usize;
        y * self.width + x
    }

    pub fn checked_index(&self, site: Site) -> Result<usize> {
        if site.t1 >= self.width || site.t2 >= self.height {
            return Err(Error::SiteOutOfRange {
                t1: site.t1,
                t2: site.t2,
                width: self.width,
                height: self.height,
            });
        }
        Ok(self.index(site))
    }

    /// Sign of the external field at a site index.
    #[inline]
    pub fn field_at(&self, index: usize) -> i8 {
        self.field[index]
    }

    pub fn field_sign(&self, site: Site) -> Result<i8> {
        Ok(self.field[self.checked_index(site)?])
    }

    pub fn field_signs(&self) -> &[i8] {
        &self.field
    }

    /// Neighbours of a site index as `[right, up, left, down]`; on a dimension
    /// of length 2 the two neighbours along that axis coincide.
    #[inline]
    pub fn neighbors(&self, index: usize) -> &[u32; 4] {
        &self.neighbors[index]
    }

    pub fn check_config(&self, config: &SpinConfig) -> Result<()> {
        if config.len() != self.num_sites() {
            return Err(Error::DimensionMismatch {
                expected: self.num_sites(),
                got: config.len(),
            });
        }
        Ok(())
    }

    /// The `2 L1 x 2 L2` torus carrying one period of every propagated block
    /// configuration, with the same field pattern.
    pub fn sub_torus_2x2(&self) -> ModelGeometry {
        ModelGeometry::new(self.pattern, 2, 2).expect("2x2-cell torus is always valid")
    }

    /// Restricts a configuration to the leading `sub.width x sub.height`
    /// rectangle. Only meaningful when `config` is periodic with those periods.
    pub fn restrict_to(&self, sub: &ModelGeometry, config: &SpinConfig) -> Result<SpinConfig> {
        self.check_config(config)?;
        if sub.width > self.width || sub.height > self.height {
            return Err(Error::InvalidGeometry(
                "sub-torus is larger than the torus".into(),
            ));
        }
        Ok(SpinConfig::from_fn(sub.num_sites(), |i| {
            let s = sub.site(i);
            config.get(self.index(s))
        }))
    }

    pub fn describe(&self) -> GeometryDescription {
        GeometryDescription {
            pattern: self.pattern,
            n1: self.n1,
            n2: self.n2,
            width: self.width,
            height: self.height,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dims_and_block_sizes() {
        let g = ModelGeometry::cell_board(3, 2, 2).unwrap();
        assert_eq!(g.dims(), (6, 4));
        assert_eq!(g.block_size(), 8);
        let g = ModelGeometry::cell_board(1, 1, 2).unwrap();
        assert_eq!(g.dims(), (2, 2));
        assert_eq!(g.block_size(), 4);
        let g = ModelGeometry::strip(2, 4).unwrap();
        assert_eq!(g.dims(), (4, 8));
        assert_eq!(g.block_size(), 4);
    }

    #[test]
    fn rejects_bad_scales() {
        assert!(ModelGeometry::cell_board(1, 1, 3).is_err());
        assert!(ModelGeometry::cell_board(0, 1, 2).is_err());
        assert!(ModelGeometry::strip(1, 6).is_err());
        assert!(ModelGeometry::cell_board(1, 1, 0).is_err());
    }

    #[test]
    fn field_signs() {
        let g = ModelGeometry::cell_board(3, 2, 2).unwrap();
        assert_eq!(g.field_sign(Site::new(0, 0)).unwrap(), 1);
        assert_eq!(g.field_sign(Site::new(3, 0)).unwrap(), -1);
        assert_eq!(g.field_sign(Site::new(3, 2)).unwrap(), 1);
        let s = ModelGeometry::strip(2, 8).unwrap();
        assert_eq!(s.field_sign(Site::new(5, 2)).unwrap(), -1);
        assert!(g.field_sign(Site::new(6, 0)).is_err());
    }

    #[test]
    fn field_is_balanced() {
        let geoms = [
            ModelGeometry::cell_board(1, 1, 2).unwrap(),
            ModelGeometry::cell_board(3, 2, 4).unwrap(),
            ModelGeometry::new(FieldPattern::CellBoard { l1: 2, l2: 3 }, 2, 6).unwrap(),
            ModelGeometry::strip(3, 4).unwrap(),
        ];
        for g in &geoms {
            let sum: i64 = g.field_signs().iter().map(|&f| f as i64).sum();
            assert_eq!(sum, 0, "{:?}", g.describe());
        }
    }

    #[test]
    fn neighbours_wrap_with_multiplicity() {
        let g = ModelGeometry::cell_board(1, 1, 2).unwrap();
        let nb = g.neighbors(0);
        assert_eq!(nb[RIGHT], nb[LEFT]);
        assert_eq!(nb[UP], nb[DOWN]);
    }

    #[test]
    fn sub_torus_shapes() {
        let g = ModelGeometry::cell_board(3, 2, 4).unwrap();
        let sub = g.sub_torus_2x2();
        assert_eq!(sub.dims(), (6, 4));
        let sum: i64 = sub.field_signs().iter().map(|&f| f as i64).sum();
        assert_eq!(sum, 0);
        assert_eq!(
            ModelGeometry::cell_board(1, 1, 4)
                .unwrap()
                .sub_torus_2x2()
                .dims(),
            (2, 2)
        );
    }

    #[test]
    fn description_serializes() {
        let g = ModelGeometry::cell_board(3, 2, 2).unwrap();
        let json = serde_json::to_value(g.describe()).unwrap();
        assert_eq!(json["kind"], "cell-board");
        assert_eq!(json["l1"], 3);
        assert_eq!(json["width"], 6);
    }
}
