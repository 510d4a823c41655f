use std::fmt;

/// A bit-packed spin configuration.
///
/// Bit `i` is set when the spin at site index `i` is `+1`. Site indices use the
/// row-major layout `t2 * width + t1` of [`super::ModelGeometry`].
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct SpinConfig {
    words: Vec<u64>,
    len: usize,
}

impl SpinConfig {
    pub fn uniform(len: usize, spin: i8) -> Self {
        let fill = if spin > 0 { u64::MAX } else { 0 };
        let mut cfg = SpinConfig {
            words: vec![fill; len.div_ceil(64)],
            len,
        };
        cfg.clear_tail();
        cfg
    }

    pub fn from_fn(len: usize, mut f: impl FnMut(usize) -> i8) -> Self {
        let mut cfg = SpinConfig::uniform(len, -1);
        for i in 0..len {
            if f(i) > 0 {
                cfg.words[i / 64] |= 1 << (i % 64);
            }
        }
        cfg
    }

    pub fn from_spins(spins: &[i8]) -> Self {
        SpinConfig::from_fn(spins.len(), |i| spins[i])
    }

    /// Builds a configuration of at most 64 sites from its bit mask.
    pub fn from_bits(len: usize, bits: u64) -> Self {
        assert!(len <= 64, "from_bits supports at most 64 sites");
        let mut cfg = SpinConfig {
            words: vec![bits; len.div_ceil(64)],
            len,
        };
        cfg.clear_tail();
        cfg
    }

    /// Bit mask of a configuration with at most 64 sites.
    pub fn to_bits(&self) -> u64 {
        assert!(self.len <= 64, "to_bits supports at most 64 sites");
        self.words.first().copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn is_up(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    #[inline]
    pub fn get(&self, i: usize) -> i8 {
        if self.is_up(i) {
            1
        } else {
            -1
        }
    }

    #[inline]
    pub fn set(&mut self, i: usize, spin: i8) {
        debug_assert!(i < self.len);
        let mask = 1u64 << (i % 64);
        if spin > 0 {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        debug_assert!(i < self.len);
        self.words[i / 64] ^= 1 << (i % 64);
    }

    /// Global spin flip.
    pub fn negated(&self) -> Self {
        let mut out = SpinConfig {
            words: self.words.iter().map(|w| !w).collect(),
            len: self.len,
        };
        out.clear_tail();
        out
    }

    pub fn spins(&self) -> Vec<i8> {
        (0..self.len).map(|i| self.get(i)).collect()
    }

    pub fn up_count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Sum of all spins.
    pub fn total(&self) -> i64 {
        2 * self.up_count() as i64 - self.len as i64
    }

    pub fn magnetization(&self) -> f64 {
        self.total() as f64 / self.len as f64
    }

    fn clear_tail(&mut self) {
        let rem = self.len % 64;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }
}

impl fmt::Debug for SpinConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SpinConfig[")?;
        for i in 0..self.len {
            f.write_str(if self.is_up(i) { "+" } else { "-" })?;
        }
        write!(f, "]")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn packing_across_word_boundary() {
        let mut cfg = SpinConfig::uniform(130, -1);
        cfg.set(63, 1);
        cfg.set(64, 1);
        cfg.set(129, 1);
        assert_eq!(cfg.up_count(), 3);
        assert_eq!(cfg.get(64), 1);
        cfg.flip(64);
        assert_eq!(cfg.get(64), -1);
        assert_eq!(cfg.total(), 2 * 2 - 130);
    }

    #[test]
    fn negation_keeps_tail_clean() {
        let cfg = SpinConfig::uniform(5, 1).negated();
        assert_eq!(cfg, SpinConfig::uniform(5, -1));
        assert_eq!(cfg.negated(), SpinConfig::uniform(5, 1));
    }

    #[test]
    fn bits_round_trip() {
        let cfg = SpinConfig::from_bits(6, 0b101101);
        assert_eq!(cfg.spins(), vec![1, -1, 1, 1, -1, 1]);
        assert_eq!(cfg.to_bits(), 0b101101);
    }
}
