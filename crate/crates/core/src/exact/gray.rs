//! Gray-code iteration over the free spins of a torus with O(1) energy updates.

use rayon::prelude::*;

use crate::geometry::{ModelGeometry, SpinConfig};
use crate::model::{energy_parts_unchecked, flip_delta_parts, EnergyParts};

#[inline]
pub(crate) fn gray_code(k: u64) -> u64 {
    k ^ (k >> 1)
}

/// Visits the configurations with Gray-code indices `start..end`.
///
/// Configuration `k` equals `base` with `free[i]` set to `+1` exactly when bit
/// `i` of `gray_code(k)` is set. Each step flips one free spin, so consecutive
/// energies differ by a single-flip update.
pub(crate) fn sweep(
    geom: &ModelGeometry,
    free: &[usize],
    base: &SpinConfig,
    start: u64,
    end: u64,
    mut visit: impl FnMut(&SpinConfig, EnergyParts),
) {
    if start >= end {
        return;
    }
    let mut cfg = base.clone();
    let g = gray_code(start);
    for (i, &s) in free.iter().enumerate() {
        cfg.set(s, if (g >> i) & 1 == 1 { 1 } else { -1 });
    }
    let mut parts = energy_parts_unchecked(geom, &cfg);
    visit(&cfg, parts);
    for k in start + 1..end {
        let s = free[k.trailing_zeros() as usize];
        let (db, df) = flip_delta_parts(geom, &cfg, s);
        cfg.flip(s);
        parts.bonds += db;
        parts.field += df;
        visit(&cfg, parts);
    }
}

const MIN_CHUNK: u64 = 1 << 12;
const MAX_CHUNKS: u64 = 1 << 10;

/// Splits `0..total` into a fixed number of contiguous ranges. The split
/// depends only on `total`, never on the thread count.
pub(crate) fn chunks(total: u64) -> Vec<(u64, u64)> {
    let count = (total / MIN_CHUNK).clamp(1, MAX_CHUNKS);
    let size = total.div_ceil(count);
    (0..count)
        .map(|c| (c * size, ((c + 1) * size).min(total)))
        .filter(|(a, b)| a < b)
        .collect()
}

/// Runs `sweep` over all `2^free.len()` configurations in parallel chunks and
/// folds each chunk into an accumulator; chunk results come back in range
/// order.
pub(crate) fn par_fold<A, F, V>(
    geom: &ModelGeometry,
    free: &[usize],
    base: &SpinConfig,
    init: F,
    visit: V,
) -> Vec<A>
where
    A: Send,
    F: Fn() -> A + Sync,
    V: Fn(&mut A, &SpinConfig, EnergyParts) + Sync,
{
    let total = 1u64 << free.len();
    chunks(total)
        .into_par_iter()
        .map(|(a, b)| {
            let mut acc = init();
            sweep(geom, free, base, a, b, |cfg, parts| {
                visit(&mut acc, cfg, parts)
            });
            acc
        })
        .collect()
}
