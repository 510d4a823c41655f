//! Block events and the `𝔷` quantities of the chessboard estimate.

use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::{BlockShape, BlockTiling, DoubleBlockKind, ModelGeometry, SpinConfig};
use crate::model::{energy_parts, ModelParams};

use super::ExactEnsemble;

pub const MAX_EVENT_BITS: usize = 20;

/// A non-empty set of admissible configurations of a `Λ` or `Λ*` block,
/// stored as a bitmask over the `2^bits` local patterns.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockEvent {
    shape: BlockShape,
    bits: usize,
    mask: Vec<u64>,
}

impl BlockEvent {
    fn empty(geom: &ModelGeometry, shape: BlockShape) -> Result<Self> {
        shape.check_available(geom)?;
        let bits = shape.size(geom);
        if bits > MAX_EVENT_BITS {
            return Err(Error::GuardExceeded {
                what: "block event pattern bits",
                got: bits,
                limit: MAX_EVENT_BITS,
            });
        }
        Ok(BlockEvent {
            shape,
            bits,
            mask: vec![0; (1usize << bits).div_ceil(64)],
        })
    }

    fn insert(&mut self, pattern: u64) {
        self.mask[(pattern / 64) as usize] |= 1 << (pattern % 64);
    }

    fn finish(self) -> Result<Self> {
        if self.mask.iter().all(|&w| w == 0) {
            return Err(Error::EmptyEvent);
        }
        Ok(self)
    }

    pub fn from_patterns(
        geom: &ModelGeometry,
        shape: BlockShape,
        patterns: impl IntoIterator<Item = u64>,
    ) -> Result<Self> {
        let mut ev = Self::empty(geom, shape)?;
        for p in patterns {
            if p >> ev.bits != 0 {
                return Err(Error::InvalidEvent(format!(
                    "pattern {p:#x} has more than {} bits",
                    ev.bits
                )));
            }
            ev.insert(p);
        }
        ev.finish()
    }

    pub fn from_predicate(
        geom: &ModelGeometry,
        shape: BlockShape,
        pred: impl Fn(u64) -> bool,
    ) -> Result<Self> {
        let mut ev = Self::empty(geom, shape)?;
        for p in 0..1u64 << ev.bits {
            if pred(p) {
                ev.insert(p);
            }
        }
        ev.finish()
    }

    pub fn full(geom: &ModelGeometry, shape: BlockShape) -> Result<Self> {
        Self::from_predicate(geom, shape, |_| true)
    }

    pub fn single(geom: &ModelGeometry, shape: BlockShape, pattern: u64) -> Result<Self> {
        Self::from_patterns(geom, shape, [pattern])
    }

    /// The constant block `σ(Λ) ≡ spin`.
    pub fn constant(geom: &ModelGeometry, shape: BlockShape, spin: i8) -> Result<Self> {
        let bits = shape.size(geom);
        let all = if bits >= 64 {
            u64::MAX
        } else {
            (1u64 << bits) - 1
        };
        Self::single(geom, shape, if spin > 0 { all } else { 0 })
    }

    /// The bad event `ℛ`: the block is not constant.
    pub fn bad(geom: &ModelGeometry, shape: BlockShape) -> Result<Self> {
        let all = (1u64 << shape.size(geom)) - 1;
        Self::from_predicate(geom, shape, |p| p != 0 && p != all)
    }

    /// A random non-empty event containing each pattern with probability
    /// `density`.
    pub fn random(
        geom: &ModelGeometry,
        shape: BlockShape,
        density: f64,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let mut ev = Self::empty(geom, shape)?;
        for p in 0..1u64 << ev.bits {
            if rng.random::<f64>() < density {
                ev.insert(p);
            }
        }
        if ev.mask.iter().all(|&w| w == 0) {
            let p = rng.random_range(0..1u64 << ev.bits);
            ev.insert(p);
        }
        Ok(ev)
    }

    pub fn shape(&self) -> BlockShape {
        self.shape
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    #[inline]
    pub fn contains(&self, pattern: u64) -> bool {
        (self.mask[(pattern / 64) as usize] >> (pattern % 64)) & 1 == 1
    }

    pub fn len(&self) -> usize {
        self.mask.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_full(&self) -> bool {
        self.len() == 1 << self.bits
    }

    pub fn patterns(&self) -> impl Iterator<Item = u64> + '_ {
        (0..1u64 << self.bits).filter(|&p| self.contains(p))
    }

    pub fn single_pattern(&self) -> Option<u64> {
        if self.len() == 1 {
            self.patterns().next()
        } else {
            None
        }
    }

    pub fn is_subset_of(&self, other: &BlockEvent) -> bool {
        self.shape == other.shape
            && self.bits == other.bits
            && self.mask.iter().zip(&other.mask).all(|(a, b)| a & !b == 0)
    }
}

fn check_double_tiling(geom: &ModelGeometry, shape: BlockShape) -> Result<()> {
    if let BlockShape::Double(kind) = shape {
        let n = geom.cells(kind.axis());
        if n % 4 != 0 {
            return Err(Error::DoubleBlockAnchor {
                kind: kind.name().into(),
                reason: format!("needs a multiple of 4 cells along the joined axis, got {n}"),
            });
        }
    }
    Ok(())
}

/// `ln 𝔷(𝒜) = ln μ(∩_t π_t 𝒜) / |T̃|`.
///
/// A single-pattern event pins every spin of the torus, so its probability is
/// one Boltzmann weight and no enumeration is needed.
pub fn log_z_value(ens: &ExactEnsemble, event: &BlockEvent) -> Result<f64> {
    let geom = ens.geom();
    check_double_tiling(geom, event.shape())?;
    let tiling = BlockTiling::new(geom, event.shape())?;
    let anchors = tiling.anchors.len() as f64;
    let log_mu = match event.single_pattern() {
        Some(p) => match crate::geometry::tile_pattern(geom, &tiling, p) {
            Ok(cfg) => ens.log_probability_of(&cfg)?,
            Err(Error::TilingInconsistent { .. }) => f64::NEG_INFINITY,
            Err(e) => return Err(e),
        },
        None if event.is_full() => ens.log_pinned_probability(&[])?,
        None => ens.log_event_probability(|cfg| {
            (0..tiling.anchors.len()).all(|j| event.contains(tiling.pattern_at(j, cfg)))
        })?,
    };
    Ok(log_mu / anchors)
}

/// `𝔷_{β,N}(𝒜)` for a `Λ`-event.
pub fn z_quantity(ens: &ExactEnsemble, event: &BlockEvent) -> Result<f64> {
    if event.shape() != BlockShape::Single {
        return Err(Error::InvalidEvent("z_quantity expects a Λ-event".into()));
    }
    Ok(log_z_value(ens, event)?.exp())
}

/// `𝔷^{(k)}_{β,N}(𝒜)` for a `Λ*_k`-event, with exponent `1/|T̃^{(k)}_N|`.
pub fn z_double(ens: &ExactEnsemble, kind: DoubleBlockKind, event: &BlockEvent) -> Result<f64> {
    if event.shape() != BlockShape::Double(kind) {
        return Err(Error::InvalidEvent(format!(
            "event is not defined on the double block {}",
            kind.name()
        )));
    }
    Ok(log_z_value(ens, event)?.exp())
}

/// `ln 𝔷(ℬ(σ_Λ))` of a single pattern given an externally computed `ln Z`
/// (for tori beyond enumeration reach).
pub fn log_z_pattern(
    geom: &ModelGeometry,
    params: &ModelParams,
    shape: BlockShape,
    pattern: u64,
    log_z: f64,
) -> Result<f64> {
    check_double_tiling(geom, shape)?;
    let tiling = BlockTiling::new(geom, shape)?;
    let cfg = crate::geometry::tile_pattern(geom, &tiling, pattern)?;
    let parts = energy_parts(geom, &cfg)?;
    Ok((parts.log_weight(params) - log_z) / tiling.anchors.len() as f64)
}

/// `ln μ(∩_j π_{t_j} 𝒜_j)` for events placed at distinct blocks.
pub(crate) fn log_joint_probability(
    ens: &ExactEnsemble,
    tiling: &BlockTiling,
    placed: &[(usize, &BlockEvent)],
) -> Result<f64> {
    let active: Vec<(usize, &BlockEvent)> = placed
        .iter()
        .filter(|(_, e)| !e.is_full())
        .copied()
        .collect();
    if active.is_empty() {
        return ens.log_pinned_probability(&[]);
    }
    ens.log_event_probability(|cfg: &SpinConfig| {
        active
            .iter()
            .all(|(j, e)| e.contains(tiling.pattern_at(*j, cfg)))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{tile_configuration, FieldPattern};
    use crate::model::energy;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ens(g: &ModelGeometry, beta: f64) -> ExactEnsemble {
        ExactEnsemble::new(g, ModelParams::new(1.0, 1.0, beta).unwrap()).unwrap()
    }

    #[test]
    fn event_construction() {
        let g = ModelGeometry::cell_board(1, 1, 2).unwrap();
        let bad = BlockEvent::bad(&g, BlockShape::Single).unwrap();
        assert_eq!(bad.len(), 14);
        assert!(!bad.contains(0) && !bad.contains(15));
        assert!(BlockEvent::from_patterns(&g, BlockShape::Single, []).is_err());
        assert!(BlockEvent::from_patterns(&g, BlockShape::Single, [16]).is_err());
        let full = BlockEvent::full(&g, BlockShape::Single).unwrap();
        assert!(bad.is_subset_of(&full));
        assert!(!full.is_subset_of(&bad));
        assert!(BlockEvent::full(&g, BlockShape::Double(DoubleBlockKind::H1)).is_err());
    }

    #[test]
    fn constant_pattern_z() {
        let g = ModelGeometry::cell_board(1, 1, 4).unwrap();
        let e = ens(&g, 0.8);
        let plus = BlockEvent::constant(&g, BlockShape::Single, 1).unwrap();
        let z = z_quantity(&e, &plus).unwrap();
        let h = energy(&g, e.params(), &SpinConfig::uniform(16, 1)).unwrap();
        let expect = ((-0.8 * h - e.log_z()) / 16.0).exp();
        assert!((z - expect).abs() < 1e-14);
        let full = BlockEvent::full(&g, BlockShape::Single).unwrap();
        assert!((z_quantity(&e, &full).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn single_pattern_shortcut_matches_enumeration() {
        let g = ModelGeometry::cell_board(1, 1, 4).unwrap();
        let e = ens(&g, 0.9);
        let tiling = BlockTiling::new(&g, BlockShape::Single).unwrap();
        for p in [0b0110u64, 0b1010, 0b0001] {
            let ev = BlockEvent::single(&g, BlockShape::Single, p).unwrap();
            let fast = log_z_value(&e, &ev).unwrap();
            let slow = e
                .log_event_probability(|c| (0..16).all(|j| tiling.pattern_at(j, c) == p))
                .unwrap()
                / 16.0;
            assert!((fast - slow).abs() < 1e-12, "{p}: {fast} vs {slow}");
        }
    }

    #[test]
    fn subadditivity_and_monotonicity() {
        let g = ModelGeometry::cell_board(1, 1, 2).unwrap();
        for beta in [0.5, 1.0, 2.0] {
            let e = ens(&g, beta);
            let bad = BlockEvent::bad(&g, BlockShape::Single).unwrap();
            let zr = z_quantity(&e, &bad).unwrap();
            let sum: f64 = bad
                .patterns()
                .map(|p| {
                    z_quantity(&e, &BlockEvent::single(&g, BlockShape::Single, p).unwrap()).unwrap()
                })
                .sum();
            assert!(zr <= sum * (1.0 + 1e-12));
        }
        let g = ModelGeometry::cell_board(1, 1, 4).unwrap();
        let e = ens(&g, 0.7);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let a = BlockEvent::random(&g, BlockShape::Single, 0.3, &mut rng).unwrap();
            let extra = BlockEvent::random(&g, BlockShape::Single, 0.3, &mut rng).unwrap();
            let b = BlockEvent::from_predicate(&g, BlockShape::Single, |p| {
                a.contains(p) || extra.contains(p)
            })
            .unwrap();
            assert!(a.is_subset_of(&b));
            assert!(z_quantity(&e, &a).unwrap() <= z_quantity(&e, &b).unwrap() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn double_constant_and_guards() {
        let g = ModelGeometry::new(FieldPattern::CellBoard { l1: 2, l2: 1 }, 4, 2).unwrap();
        let e = ens(&g, 0.6);
        let shape = BlockShape::Double(DoubleBlockKind::H1);
        let plus = BlockEvent::constant(&g, shape, 1).unwrap();
        let z = z_double(&e, DoubleBlockKind::H1, &plus).unwrap();
        let h = energy(&g, e.params(), &SpinConfig::uniform(16, 1)).unwrap();
        let anchors = shape.anchors(&g).unwrap().len() as f64;
        assert_eq!(anchors, 4.0);
        assert!((z - ((-0.6 * h - e.log_z()) / anchors).exp()).abs() < 1e-14);
        assert!(z_double(&e, DoubleBlockKind::H2, &plus).is_err());
        let ev = BlockEvent::single(&g, shape, 0b1001_0110).unwrap();
        let cfg = tile_configuration(&g, shape, &SpinConfig::from_bits(8, 0b1001_0110)).unwrap();
        let direct = (e.log_probability_of(&cfg).unwrap() / anchors).exp();
        assert!((z_double(&e, DoubleBlockKind::H1, &ev).unwrap() - direct).abs() < 1e-14);

        let g2 = ModelGeometry::cell_board(2, 1, 2).unwrap();
        let e2 = ens(&g2, 0.6);
        let plus2 = BlockEvent::constant(&g2, shape, 1).unwrap();
        assert!(z_double(&e2, DoubleBlockKind::H1, &plus2).is_err());
    }
}
