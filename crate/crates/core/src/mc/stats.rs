//! Sample means with autocorrelation-corrected standard errors.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

/// Window constant of the self-consistent (Sokal) cutoff `W >= c τ(W)`.
pub const SOKAL_C: f64 = 6.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    /// Integrated autocorrelation time in samples; `1/2` for white noise.
    pub tau: f64,
    pub samples: usize,
}

impl Estimate {
    /// `|self - target|` in units of the standard error; infinite for a
    /// zero error and a nonzero gap.
    pub fn z_score(&self, target: f64) -> f64 {
        let gap = (self.mean - target).abs();
        if gap == 0.0 {
            0.0
        } else {
            gap / self.std_error
        }
    }

    /// Gap between two independent estimates in combined standard errors.
    pub fn z_between(&self, other: &Estimate) -> f64 {
        let gap = (self.mean - other.mean).abs();
        if gap == 0.0 {
            return 0.0;
        }
        gap / self.std_error.hypot(other.std_error)
    }
}

/// Normalized autocorrelation `ρ(t)` for `t < n`, through one zero-padded
/// FFT round trip.
fn autocorrelation(xs: &[f64]) -> Option<Vec<f64>> {
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let size = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = xs
        .iter()
        .map(|x| Complex::new(x - mean, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(size)
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(size).process(&mut buf);
    for z in &mut buf {
        *z = Complex::new(z.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(size).process(&mut buf);
    let c0 = buf[0].re;
    if c0 <= 0.0 {
        return None;
    }
    Some(buf[..n].iter().map(|z| z.re / c0).collect())
}

/// `τ_int` with the self-consistent window; returns `(τ, W)`.
pub fn integrated_time(xs: &[f64]) -> (f64, usize) {
    let n = xs.len();
    if n < 2 {
        return (0.5, 0);
    }
    let Some(rho) = autocorrelation(xs) else {
        return (0.5, 0);
    };
    let mut tau = 0.5;
    for (w, r) in rho.iter().enumerate().take(n / 2).skip(1) {
        tau += r;
        if w as f64 >= SOKAL_C * tau {
            return (tau.max(0.5), w);
        }
    }
    (tau.max(0.5), n / 2)
}

pub fn estimate(xs: &[f64]) -> Estimate {
    let n = xs.len();
    if n == 0 {
        return Estimate {
            mean: f64::NAN,
            std_error: f64::NAN,
            tau: f64::NAN,
            samples: 0,
        };
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    let (tau, _) = integrated_time(xs);
    Estimate {
        mean,
        std_error: (var * 2.0 * tau / n as f64).sqrt(),
        tau,
        samples: n,
    }
}

/// Equal-width histogram on `[lo, hi]`; the top edge falls in the last bin.
pub fn histogram(xs: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<u64> {
    let mut out = vec![0u64; bins];
    let width = (hi - lo) / bins as f64;
    for &x in xs {
        let k = ((x - lo) / width).floor();
        if k.is_finite() && k >= 0.0 {
            out[(k as usize).min(bins - 1)] += 1;
        }
    }
    out
}

/// Histogram of magnetizations on a lattice of `sites` spins. Small lattices
/// get one bin per reachable value of `m` so that no bin is structurally empty.
pub fn magnetization_histogram(ms: &[f64], sites: usize, bins: usize) -> Vec<u64> {
    if sites + 1 <= bins {
        let half = 1.0 / sites as f64;
        histogram(ms, -1.0 - half, 1.0 + half, sites + 1)
    } else {
        histogram(ms, -1.0, 1.0, bins)
    }
}

/// Dip ratio of a histogram on `[-1, 1]`: the lowest count strictly between
/// the tallest negative-side bin and the tallest positive-side bin, divided by
/// the smaller of those two peaks. `1` when there is no valley.
pub fn dip_ratio(hist: &[u64]) -> f64 {
    let bins = hist.len();
    let center = |k: usize| -1.0 + (k as f64 + 0.5) * 2.0 / bins as f64;
    let peak = |range: &mut dyn Iterator<Item = usize>| {
        range.fold(None, |best: Option<usize>, k| match best {
            Some(b) if hist[b] >= hist[k] => Some(b),
            _ => Some(k),
        })
    };
    let left = peak(&mut (0..bins).filter(|&k| center(k) < 0.0));
    let right = peak(&mut (0..bins).filter(|&k| center(k) > 0.0));
    let (Some(a), Some(b)) = (left, right) else {
        return 1.0;
    };
    let low = hist[a].min(hist[b]);
    if low == 0 {
        return 1.0;
    }
    match hist[a + 1..b].iter().min() {
        Some(&valley) => valley as f64 / low as f64,
        None => 1.0,
    }
}
