//! Reflection lines, `Λ` / `Λ*` blocks and the propagation operators.
//!
//! Propagation to block `(n, m)` translates the block configuration by
//! `(n L1, m L2)` after reflecting it through `Q_1` when `n` is odd and through
//! `Q_2` when `m` is odd. Parity is taken on the block index rather than on the
//! raw coordinate `n L_i`: for even `L_i` the raw coordinate is always even and
//! the tiling would not be generated by reflections between neighbouring
//! blocks. For odd `L_i` both readings agree.

use serde::{Deserialize, Serialize};

use super::{Axis, ModelGeometry, Site, SpinConfig};
use crate::error::{Error, Result};

/// Whether a reflection line passes through lattice sites or bisects bonds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Through {
    Sites,
    Bonds,
}

/// A reflection line `t_axis = offset`, stored as the integer `2 * offset`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ReflectionPlane {
    pub axis: Axis,
    doubled_offset: i64,
}

impl ReflectionPlane {
    pub fn from_doubled(axis: Axis, doubled_offset: i64) -> Self {
        ReflectionPlane {
            axis,
            doubled_offset,
        }
    }

    /// Line at a real offset; fails unless the offset is an integer or a
    /// half-integer.
    pub fn new(axis: Axis, offset: f64) -> Result<Self> {
        let doubled = 2.0 * offset;
        if !doubled.is_finite() || (doubled - doubled.round()).abs() > 1e-12 {
            return Err(Error::MisalignedPlane { offset });
        }
        Ok(ReflectionPlane::from_doubled(axis, doubled.round() as i64))
    }

    pub fn offset(&self) -> f64 {
        self.doubled_offset as f64 / 2.0
    }

    pub fn doubled_offset(&self) -> i64 {
        self.doubled_offset
    }

    pub fn through(&self) -> Through {
        if self.doubled_offset.rem_euclid(2) == 0 {
            Through::Sites
        } else {
            Through::Bonds
        }
    }

    /// Image of a coordinate along the plane's axis on a circle of `len` sites.
    #[inline]
    pub fn reflect_coord(&self, coord: usize, len: usize) -> usize {
        (self.doubled_offset - coord as i64).rem_euclid(len as i64) as usize
    }

    fn normalized(&self, len: usize) -> i64 {
        self.doubled_offset.rem_euclid(2 * len as i64)
    }
}

impl std::fmt::Display for ReflectionPlane {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let axis = match self.axis {
            Axis::First => 1,
            Axis::Second => 2,
        };
        write!(f, "t{} = {}", axis, self.offset())
    }
}

impl ModelGeometry {
    /// The reflection lines `P_i^(n) : t_i = n L_i + (L_i - 1)/2`, one per cell
    /// along each axis. Lines `n` and `n + N_i/2` are antipodal and give the
    /// same reflection with the halves exchanged.
    pub fn planes(&self) -> Vec<ReflectionPlane> {
        let mut out = Vec::new();
        for axis in Axis::BOTH {
            let l = self.cell_length(axis) as i64;
            for n in 0..self.cells(axis) as i64 {
                out.push(ReflectionPlane::from_doubled(axis, 2 * n * l + l - 1));
            }
        }
        out
    }

    /// The line `Q_i : t_i = -1/2` bisecting `Λ`.
    pub fn q_line(&self, axis: Axis) -> ReflectionPlane {
        ReflectionPlane::from_doubled(axis, -1)
    }

    pub fn is_model_plane(&self, plane: &ReflectionPlane) -> bool {
        let len = self.extent(plane.axis);
        self.planes()
            .iter()
            .any(|p| p.axis == plane.axis && p.normalized(len) == plane.normalized(len))
    }

    fn check_plane(&self, plane: &ReflectionPlane, allow_q: bool) -> Result<()> {
        let len = self.extent(plane.axis);
        let is_q = allow_q && plane.normalized(len) == self.q_line(plane.axis).normalized(len);
        if is_q || self.is_model_plane(plane) {
            Ok(())
        } else {
            Err(Error::PlaneNotInFamily(plane.to_string()))
        }
    }

    pub fn reflect_site(&self, plane: &ReflectionPlane, site: Site) -> Site {
        match plane.axis {
            Axis::First => Site::new(plane.reflect_coord(site.t1, self.width()), site.t2),
            Axis::Second => Site::new(site.t1, plane.reflect_coord(site.t2, self.height())),
        }
    }

    /// Sites of the left half `T^l` of the torus cut by a model plane, and the
    /// subset of them lying on the plane itself (fixed by the reflection).
    ///
    /// The left half is the closed strip of coordinates running down from the
    /// plane to its antipode; for lines through sites both boundary lines belong
    /// to it and to the right half.
    pub fn half_sites(&self, plane: &ReflectionPlane) -> Result<(Vec<usize>, Vec<usize>)> {
        self.check_plane(plane, false)?;
        let len = self.extent(plane.axis) as i64;
        let half = len / 2;
        let d = plane.doubled_offset;
        let coords: Vec<i64> = match plane.through() {
            Through::Sites => (0..=half).map(|k| d / 2 - k).collect(),
            Through::Bonds => (0..half).map(|k| (d - 1) / 2 - k).collect(),
        };
        let mut coords: Vec<usize> = coords
            .into_iter()
            .map(|c| c.rem_euclid(len) as usize)
            .collect();
        coords.sort_unstable();
        coords.dedup();
        let fixed: Vec<usize> = coords
            .iter()
            .copied()
            .filter(|&c| plane.reflect_coord(c, len as usize) == c)
            .collect();
        let other = self.extent(match plane.axis {
            Axis::First => Axis::Second,
            Axis::Second => Axis::First,
        });
        let to_index = |c: usize, o: usize| match plane.axis {
            Axis::First => self.index(Site::new(c, o)),
            Axis::Second => self.index(Site::new(o, c)),
        };
        let mut left = Vec::new();
        let mut on_plane = Vec::new();
        for o in 0..other {
            for &c in &coords {
                left.push(to_index(c, o));
                if fixed.contains(&c) {
                    on_plane.push(to_index(c, o));
                }
            }
        }
        left.sort_unstable();
        on_plane.sort_unstable();
        Ok((left, on_plane))
    }
}

/// `θ_P σ (s) = σ(ϑ_P s)` for `P` a model plane or one of `Q_1`, `Q_2`.
pub fn apply_reflection(
    geom: &ModelGeometry,
    plane: &ReflectionPlane,
    config: &SpinConfig,
) -> Result<SpinConfig> {
    geom.check_config(config)?;
    geom.check_plane(plane, true)?;
    Ok(SpinConfig::from_fn(geom.num_sites(), |i| {
        config.get(geom.index(geom.reflect_site(plane, geom.site(i))))
    }))
}

/// Index `(n, m)` of the block translate `Λ + (n L1, m L2)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BlockCoord {
    pub n: usize,
    pub m: usize,
}

impl BlockCoord {
    pub fn new(n: usize, m: usize) -> Self {
        BlockCoord { n, m }
    }
}

/// The four double-block families `(h,1), (h,2), (v,1), (v,2)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DoubleBlockKind {
    H1,
    H2,
    V1,
    V2,
}

impl DoubleBlockKind {
    pub const ALL: [DoubleBlockKind; 4] = [
        DoubleBlockKind::H1,
        DoubleBlockKind::H2,
        DoubleBlockKind::V1,
        DoubleBlockKind::V2,
    ];

    /// Axis along which the two halves are joined.
    pub fn axis(self) -> Axis {
        match self {
            DoubleBlockKind::H1 | DoubleBlockKind::H2 => Axis::First,
            DoubleBlockKind::V1 | DoubleBlockKind::V2 => Axis::Second,
        }
    }

    /// `+1` when the partner block sits at `+L`, `-1` when at `-L`.
    fn direction(self) -> i64 {
        match self {
            DoubleBlockKind::H1 | DoubleBlockKind::V1 => 1,
            DoubleBlockKind::H2 | DoubleBlockKind::V2 => -1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DoubleBlockKind::H1 => "(h,1)",
            DoubleBlockKind::H2 => "(h,2)",
            DoubleBlockKind::V1 => "(v,1)",
            DoubleBlockKind::V2 => "(v,2)",
        }
    }

    /// Kinds available on a geometry: horizontal ones need even `L1`,
    /// vertical ones even `L2`.
    pub fn available(geom: &ModelGeometry) -> Vec<DoubleBlockKind> {
        DoubleBlockKind::ALL
            .into_iter()
            .filter(|k| geom.cell_length(k.axis()) % 2 == 0)
            .collect()
    }
}

/// A `Λ` block or one of the double blocks `Λ*_k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockShape {
    Single,
    Double(DoubleBlockKind),
}

/// Local coordinate range of a shape, relative to its anchor.
#[derive(Clone, Copy, Debug)]
struct Region {
    lo: [i64; 2],
    hi: [i64; 2],
}

impl Region {
    fn side(&self, a: usize) -> usize {
        (self.hi[a] - self.lo[a] + 1) as usize
    }

    fn size(&self) -> usize {
        self.side(0) * self.side(1)
    }

    /// Local coordinates of pattern bit `i` (row-major).
    fn coords(&self, i: usize) -> [i64; 2] {
        let w = self.side(0);
        [self.lo[0] + (i % w) as i64, self.lo[1] + (i / w) as i64]
    }
}

/// One propagation target: where the anchor sits and which reflections apply.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Anchor {
    pub coord: BlockCoord,
    pub reflect: [bool; 2],
}

impl BlockShape {
    fn region(self, geom: &ModelGeometry) -> Region {
        let mut lo = [0i64; 2];
        let mut hi = [0i64; 2];
        for axis in Axis::BOTH {
            let l = geom.cell_length(axis) as i64;
            lo[axis.index()] = -((l + 1) / 2);
            hi[axis.index()] = (l - 1) / 2;
        }
        if let BlockShape::Double(kind) = self {
            let a = kind.axis().index();
            let l = geom.cell_length(kind.axis()) as i64;
            if kind.direction() > 0 {
                hi[a] += l;
            } else {
                lo[a] -= l;
            }
        }
        Region { lo, hi }
    }

    /// Number of sites in the shape: `B1 B2` or `2 B1 B2`.
    pub fn size(self, geom: &ModelGeometry) -> usize {
        self.region(geom).size()
    }

    pub fn check_available(self, geom: &ModelGeometry) -> Result<()> {
        if let BlockShape::Double(kind) = self {
            if geom.cell_length(kind.axis()) % 2 != 0 {
                return Err(Error::DoubleBlockUnavailable {
                    kind: kind.name().into(),
                });
            }
        }
        Ok(())
    }

    /// Validates an anchor for this shape: any block for `Λ`; for double blocks
    /// the block index along the joined axis must be even.
    ///
    /// The anchor set of every double-block family is `{2n L_i}` along its
    /// axis. With the partner at `-L_i` for the `(·,2)` kinds this yields the
    /// pairing `{2n-1, 2n}`, complementary to the `{2n, 2n+1}` pairing of the
    /// `(·,1)` kinds.
    pub fn check_anchor(self, geom: &ModelGeometry, coord: BlockCoord) -> Result<()> {
        self.check_available(geom)?;
        if coord.n >= geom.cells(Axis::First) || coord.m >= geom.cells(Axis::Second) {
            return Err(Error::InvalidEvent(format!(
                "block ({}, {}) outside the {}x{} block grid",
                coord.n,
                coord.m,
                geom.cells(Axis::First),
                geom.cells(Axis::Second)
            )));
        }
        if let BlockShape::Double(kind) = self {
            let idx = match kind.axis() {
                Axis::First => coord.n,
                Axis::Second => coord.m,
            };
            if idx % 2 != 0 {
                return Err(Error::DoubleBlockAnchor {
                    kind: kind.name().into(),
                    reason: format!("anchor block index {idx} is not even"),
                });
            }
        }
        Ok(())
    }

    /// The propagation targets `T̃_N` (or `T̃_N^(k)` for double blocks).
    pub fn anchors(self, geom: &ModelGeometry) -> Result<Vec<Anchor>> {
        self.check_available(geom)?;
        let (n1, n2) = (geom.cells(Axis::First), geom.cells(Axis::Second));
        let mut out = Vec::new();
        for m in 0..n2 {
            for n in 0..n1 {
                let coord = BlockCoord::new(n, m);
                if self.check_anchor(geom, coord).is_err() {
                    continue;
                }
                out.push(Anchor {
                    coord,
                    reflect: self.reflections(coord),
                });
            }
        }
        Ok(out)
    }

    fn reflections(self, coord: BlockCoord) -> [bool; 2] {
        match self {
            BlockShape::Single => [coord.n % 2 == 1, coord.m % 2 == 1],
            BlockShape::Double(kind) => match kind.axis() {
                Axis::First => [(coord.n / 2) % 2 == 1, coord.m % 2 == 1],
                Axis::Second => [coord.n % 2 == 1, (coord.m / 2) % 2 == 1],
            },
        }
    }

    /// For each local pattern bit, the torus site that receives it under the
    /// propagation to `coord`.
    pub fn placement(self, geom: &ModelGeometry, coord: BlockCoord) -> Result<Vec<usize>> {
        self.check_anchor(geom, coord)?;
        Ok(self.placement_unchecked(geom, coord, self.reflections(coord)))
    }

    fn placement_unchecked(
        self,
        geom: &ModelGeometry,
        coord: BlockCoord,
        reflect: [bool; 2],
    ) -> Vec<usize> {
        let region = self.region(geom);
        let shift = [
            (coord.n * geom.cell_length(Axis::First)) as i64,
            (coord.m * geom.cell_length(Axis::Second)) as i64,
        ];
        (0..region.size())
            .map(|i| {
                let mut u = region.coords(i);
                for a in 0..2 {
                    if reflect[a] {
                        u[a] = region.lo[a] + region.hi[a] - u[a];
                    }
                }
                geom.wrapped_index(u[0] + shift[0], u[1] + shift[1])
            })
            .collect()
    }

    /// Sites of the translate at `coord` in local row-major order, without any
    /// reflection.
    pub fn sites(self, geom: &ModelGeometry, coord: BlockCoord) -> Result<Vec<usize>> {
        self.check_anchor(geom, coord)?;
        Ok(self.placement_unchecked(geom, coord, [false, false]))
    }
}

/// All propagation placements of one shape on a torus.
#[derive(Clone, Debug)]
pub struct BlockTiling {
    pub shape: BlockShape,
    pub pattern_bits: usize,
    pub anchors: Vec<Anchor>,
    /// `placements[j][i]`: torus site receiving local bit `i` at anchor `j`.
    pub placements: Vec<Vec<usize>>,
}

impl BlockTiling {
    pub fn new(geom: &ModelGeometry, shape: BlockShape) -> Result<Self> {
        let anchors = shape.anchors(geom)?;
        let placements = anchors
            .iter()
            .map(|a| shape.placement_unchecked(geom, a.coord, a.reflect))
            .collect();
        Ok(BlockTiling {
            shape,
            pattern_bits: shape.size(geom),
            anchors,
            placements,
        })
    }

    pub fn anchor_index(&self, coord: BlockCoord) -> Option<usize> {
        self.anchors.iter().position(|a| a.coord == coord)
    }

    /// Local pattern seen at anchor `j`, i.e. `π_t^{-1}` of the restriction.
    /// Bit `i` is set when the spin placed from local site `i` is `+1`.
    #[inline]
    pub fn pattern_at(&self, j: usize, config: &SpinConfig) -> u64 {
        let mut bits = 0u64;
        for (i, &s) in self.placements[j].iter().enumerate() {
            if config.is_up(s) {
                bits |= 1 << i;
            }
        }
        bits
    }
}

/// The `B1 x B2` sites of `Λ + (n L1, m L2)` in local row-major order.
pub fn block_sites(geom: &ModelGeometry, coord: BlockCoord) -> Result<Vec<Site>> {
    Ok(BlockShape::Single
        .sites(geom, coord)?
        .into_iter()
        .map(|i| geom.site(i))
        .collect())
}

/// Sites of the double block `Λ*_k` anchored at block `coord`.
pub fn double_block_sites(
    geom: &ModelGeometry,
    kind: DoubleBlockKind,
    coord: BlockCoord,
) -> Result<Vec<Site>> {
    Ok(BlockShape::Double(kind)
        .sites(geom, coord)?
        .into_iter()
        .map(|i| geom.site(i))
        .collect())
}

/// Spins assigned to a subset of torus sites.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartialConfig {
    pub sites: Vec<usize>,
    pub spins: Vec<i8>,
}

/// `π_t` applied to a configuration on `Λ`.
pub fn propagate(
    geom: &ModelGeometry,
    coord: BlockCoord,
    block_config: &SpinConfig,
) -> Result<PartialConfig> {
    propagate_shape(geom, BlockShape::Single, coord, block_config)
}

pub(crate) fn propagate_shape(
    geom: &ModelGeometry,
    shape: BlockShape,
    coord: BlockCoord,
    block_config: &SpinConfig,
) -> Result<PartialConfig> {
    let sites = shape.placement(geom, coord)?;
    if block_config.len() != sites.len() {
        return Err(Error::DimensionMismatch {
            expected: sites.len(),
            got: block_config.len(),
        });
    }
    Ok(PartialConfig {
        spins: (0..sites.len()).map(|i| block_config.get(i)).collect(),
        sites,
    })
}

/// The torus configuration obtained by propagating `block_config` to every
/// anchor of `shape`. Overlapping translates (odd `L_i`) are checked for
/// agreement.
pub fn tile_configuration(
    geom: &ModelGeometry,
    shape: BlockShape,
    block_config: &SpinConfig,
) -> Result<SpinConfig> {
    let tiling = BlockTiling::new(geom, shape)?;
    tile_with(geom, &tiling, block_config)
}

/// Tiles a block pattern given as a bit mask over the local row-major sites.
pub fn tile_pattern(
    geom: &ModelGeometry,
    tiling: &BlockTiling,
    pattern: u64,
) -> Result<SpinConfig> {
    tile_with(
        geom,
        tiling,
        &SpinConfig::from_bits(tiling.pattern_bits, pattern),
    )
}

pub(crate) fn tile_with(
    geom: &ModelGeometry,
    tiling: &BlockTiling,
    block_config: &SpinConfig,
) -> Result<SpinConfig> {
    if block_config.len() != tiling.pattern_bits {
        return Err(Error::DimensionMismatch {
            expected: tiling.pattern_bits,
            got: block_config.len(),
        });
    }
    if let BlockShape::Double(kind) = tiling.shape {
        if geom.cells(kind.axis()) % 4 != 0 {
            return Err(Error::DoubleBlockAnchor {
                kind: kind.name().into(),
                reason: format!(
                    "tiling needs a multiple of 4 cells along the joined axis, got {}",
                    geom.cells(kind.axis())
                ),
            });
        }
    }
    let mut out = SpinConfig::uniform(geom.num_sites(), -1);
    let mut assigned = vec![false; geom.num_sites()];
    for placement in &tiling.placements {
        for (i, &s) in placement.iter().enumerate() {
            let spin = block_config.get(i);
            if assigned[s] {
                if out.get(s) != spin {
                    return Err(Error::TilingInconsistent { site: s });
                }
            } else {
                out.set(s, spin);
                assigned[s] = true;
            }
        }
    }
    if let Some(s) = assigned.iter().position(|a| !a) {
        return Err(Error::TilingInconsistent { site: s });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::FieldPattern;

    fn cb(l1: usize, l2: usize, n: usize) -> ModelGeometry {
        ModelGeometry::cell_board(l1, l2, n).unwrap()
    }

    #[test]
    fn plane_parity_law() {
        for (l1, l2) in [(1, 1), (2, 1), (3, 2), (2, 2), (4, 3)] {
            let g = cb(l1, l2, 4);
            for p in g.planes() {
                let odd = g.cell_length(p.axis) % 2 == 1;
                assert_eq!(p.through() == Through::Sites, odd, "{p} on ({l1},{l2})");
            }
        }
        let s = ModelGeometry::strip(2, 4).unwrap();
        for p in s.planes() {
            let expect = if p.axis == Axis::First {
                Through::Sites
            } else {
                Through::Bonds
            };
            assert_eq!(p.through(), expect);
        }
    }

    #[test]
    fn misaligned_plane_rejected() {
        assert!(ReflectionPlane::new(Axis::First, 0.25).is_err());
        assert!(ReflectionPlane::new(Axis::First, 0.5).is_ok());
        let g = cb(1, 1, 2);
        let foreign = ReflectionPlane::new(Axis::First, 0.5).unwrap();
        let cfg = SpinConfig::uniform(4, 1);
        assert!(apply_reflection(&g, &foreign, &cfg).is_err());
    }

    #[test]
    fn single_spin_reflects_across_half_line() {
        // L1 = 2 puts the first vertical line at t1 = 1/2.
        let g = ModelGeometry::new(FieldPattern::CellBoard { l1: 2, l2: 1 }, 2, 2).unwrap();
        let plane = g.planes()[0];
        assert_eq!(plane.offset(), 0.5);
        let mut cfg = SpinConfig::uniform(g.num_sites(), -1);
        cfg.set(g.index(Site::new(0, 0)), 1);
        let out = apply_reflection(&g, &plane, &cfg).unwrap();
        assert_eq!(out.up_count(), 1);
        assert_eq!(out.get(g.index(Site::new(1, 0))), 1);
    }

    #[test]
    fn block_site_counts_and_overlaps() {
        let g = cb(2, 2, 4);
        let mut seen = vec![0; g.num_sites()];
        for n in 0..4 {
            for m in 0..4 {
                let sites = block_sites(&g, BlockCoord::new(n, m)).unwrap();
                assert_eq!(sites.len(), 4);
                for s in sites {
                    seen[g.index(s)] += 1;
                }
            }
        }
        assert!(
            seen.iter().all(|&c| c == 1),
            "even cells partition the torus"
        );

        let g = cb(3, 1, 4);
        let a = block_sites(&g, BlockCoord::new(0, 0)).unwrap();
        let b = block_sites(&g, BlockCoord::new(1, 0)).unwrap();
        assert_eq!(a.len(), 8);
        let shared = a.iter().filter(|s| b.contains(s)).count();
        assert_eq!(shared, 2, "neighbours share one column of two sites");
        let xs: std::collections::BTreeSet<_> = a.iter().map(|s| s.t1).collect();
        assert_eq!(xs.len(), 4);
    }

    #[test]
    fn strip_block_is_two_columns() {
        let g = ModelGeometry::strip(1, 4).unwrap();
        let sites = block_sites(&g, BlockCoord::new(0, 0)).unwrap();
        assert_eq!(sites.len(), 4);
        let xs: std::collections::BTreeSet<_> = sites.iter().map(|s| s.t1).collect();
        assert_eq!(xs.into_iter().collect::<Vec<_>>(), vec![0, 3]);
    }

    #[test]
    fn double_blocks() {
        let g = cb(2, 1, 4);
        let sites = double_block_sites(&g, DoubleBlockKind::H1, BlockCoord::new(0, 0)).unwrap();
        assert_eq!(sites.len(), 8);
        let a = block_sites(&g, BlockCoord::new(0, 0)).unwrap();
        let b = block_sites(&g, BlockCoord::new(1, 0)).unwrap();
        assert!(a.iter().all(|s| sites.contains(s)));
        assert!(b.iter().all(|s| sites.contains(s)));
        assert!(a.iter().all(|s| !b.contains(s)));

        let anchors = BlockShape::Double(DoubleBlockKind::H1).anchors(&g).unwrap();
        assert_eq!(anchors.len(), 8);
        assert!(anchors.iter().all(|a| (a.coord.n * 2) % 4 == 0));

        let g31 = cb(3, 1, 4);
        assert!(double_block_sites(&g31, DoubleBlockKind::V1, BlockCoord::new(0, 0)).is_err());
        assert!(double_block_sites(&g, DoubleBlockKind::H1, BlockCoord::new(1, 0)).is_err());
    }

    #[test]
    fn double_families_pair_differently() {
        let g = cb(2, 2, 4);
        let h1 = double_block_sites(&g, DoubleBlockKind::H1, BlockCoord::new(0, 0)).unwrap();
        let h2 = double_block_sites(&g, DoubleBlockKind::H2, BlockCoord::new(0, 0)).unwrap();
        let base = block_sites(&g, BlockCoord::new(0, 0)).unwrap();
        let right = block_sites(&g, BlockCoord::new(1, 0)).unwrap();
        let left = block_sites(&g, BlockCoord::new(3, 0)).unwrap();
        for s in base.iter().chain(&right) {
            assert!(h1.contains(s));
        }
        for s in base.iter().chain(&left) {
            assert!(h2.contains(s));
        }
    }

    #[test]
    fn half_sites_sizes() {
        let g = cb(1, 1, 2);
        for p in g.planes() {
            let (left, fixed) = g.half_sites(&p).unwrap();
            assert_eq!(left.len(), 4);
            assert_eq!(fixed.len(), 4);
        }
        let g = ModelGeometry::new(FieldPattern::CellBoard { l1: 2, l2: 1 }, 2, 2).unwrap();
        for p in g.planes() {
            let (left, fixed) = g.half_sites(&p).unwrap();
            match p.axis {
                Axis::First => {
                    assert_eq!(left.len(), 4);
                    assert!(fixed.is_empty());
                }
                Axis::Second => {
                    assert_eq!(left.len(), 8);
                    assert_eq!(fixed.len(), 8);
                }
            }
        }
        let g = cb(1, 1, 4);
        let (left, fixed) = g.half_sites(&g.planes()[0]).unwrap();
        assert_eq!(left.len(), 12);
        assert_eq!(fixed.len(), 8);
    }

    #[test]
    fn tiling_all_plus() {
        let g = cb(3, 2, 4);
        let block = SpinConfig::uniform(g.block_size(), 1);
        let tiled = tile_configuration(&g, BlockShape::Single, &block).unwrap();
        assert_eq!(tiled, SpinConfig::uniform(g.num_sites(), 1));
    }

    #[test]
    fn tiling_cell_board_11_hand_propagation() {
        // Λ = {-1, 0}^2 on the 2x2 torus; local bit order (-1,-1), (0,-1), (-1,0), (0,0).
        let g = cb(1, 1, 2);
        let block = SpinConfig::from_spins(&[1, -1, -1, 1]);
        let tiled = tile_configuration(&g, BlockShape::Single, &block).unwrap();
        // Site (1,1) = (-1,-1) gets bit 0, (0,1) bit 1, (1,0) bit 2, (0,0) bit 3.
        let expect = |t1, t2| tiled.get(g.index(Site::new(t1, t2)));
        assert_eq!(expect(1, 1), 1);
        assert_eq!(expect(0, 1), -1);
        assert_eq!(expect(1, 0), -1);
        assert_eq!(expect(0, 0), 1);
    }

    #[test]
    fn propagation_at_even_blocks_is_translation() {
        let g = cb(2, 3, 4);
        let block = SpinConfig::from_fn(g.block_size(), |i| if i % 3 == 0 { 1 } else { -1 });
        let base = BlockShape::Single.sites(&g, BlockCoord::new(0, 0)).unwrap();
        let target = propagate(&g, BlockCoord::new(2, 2), &block).unwrap();
        for (i, &s) in target.sites.iter().enumerate() {
            let b = g.site(base[i]);
            let t = g.site(s);
            assert_eq!((b.t1 + 4) % g.width(), t.t1);
            assert_eq!((b.t2 + 6) % g.height(), t.t2);
            assert_eq!(target.spins[i], block.get(i));
        }
    }

    #[test]
    fn propagation_round_trip_exhaustive() {
        for (l1, l2) in [(1, 1), (2, 1), (2, 2), (3, 1)] {
            let g = cb(l1, l2, 4);
            let tiling = BlockTiling::new(&g, BlockShape::Single).unwrap();
            let bits = tiling.pattern_bits;
            for j in 0..tiling.anchors.len() {
                let mut images = std::collections::HashSet::new();
                for pattern in 0..(1u64 << bits) {
                    let block = SpinConfig::from_bits(bits, pattern);
                    let part = propagate(&g, tiling.anchors[j].coord, &block).unwrap();
                    let mut torus = SpinConfig::uniform(g.num_sites(), -1);
                    for (s, v) in part.sites.iter().zip(&part.spins) {
                        torus.set(*s, *v);
                    }
                    assert_eq!(tiling.pattern_at(j, &torus), pattern);
                    let image: Vec<_> = part.sites.iter().map(|&s| torus.get(s)).collect();
                    images.insert(image);
                }
                assert_eq!(images.len(), 1 << bits);
            }
        }
    }

    #[test]
    fn tiled_configurations_have_period_two_blocks() {
        for (l1, l2) in [(1, 1), (3, 2), (2, 2), (3, 1)] {
            let g = cb(l1, l2, 4);
            let bits = g.block_size();
            for seed in 0..20u64 {
                let pattern = seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) >> (64 - bits);
                let tiled = tile_configuration(
                    &g,
                    BlockShape::Single,
                    &SpinConfig::from_bits(bits, pattern),
                )
                .unwrap();
                for i in 0..g.num_sites() {
                    let s = g.site(i);
                    for (dn, dm) in [(1i64, 0i64), (0, 1), (1, 1)] {
                        let j = g.wrapped_index(
                            s.t1 as i64 + 2 * dn * l1 as i64,
                            s.t2 as i64 + 2 * dm * l2 as i64,
                        );
                        assert_eq!(tiled.get(i), tiled.get(j));
                    }
                }
            }
        }
    }

    #[test]
    fn double_tiling_is_consistent() {
        let g = cb(2, 1, 4);
        let shape = BlockShape::Double(DoubleBlockKind::H1);
        for pattern in [0u64, 0xff, 0b1011_0010, 0b0110_1001] {
            let tiled = tile_configuration(&g, shape, &SpinConfig::from_bits(8, pattern)).unwrap();
            let tiling = BlockTiling::new(&g, shape).unwrap();
            for j in 0..tiling.anchors.len() {
                assert_eq!(tiling.pattern_at(j, &tiled), pattern);
            }
        }
        let g2 = cb(2, 1, 2);
        assert!(tile_configuration(&g2, shape, &SpinConfig::uniform(8, 1)).is_err());
    }
}
