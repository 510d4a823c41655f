//! Column transfer matrices along the first axis.
//!
//! A column holds the `H` spins at fixed `t1`; state bit `y` is set when
//! `σ(t1, y) = +1`. With `D_x` the diagonal weight of column `x` (vertical
//! bonds and field) and `K` the coupling between adjacent columns,
//! `Z = Tr Π_x D_x K`. `K` is the tensor product of `H` identical 2x2 blocks
//! and is applied in `O(H 2^H)` without forming it. Each trace term starts
//! from a basis vector and is renormalized after every step.
//!
//! Derivatives in `β` ride along as dual numbers, giving `d ln Z / dβ = -⟨H⟩`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{ModelGeometry, Site};
use crate::model::ModelParams;
use crate::numeric::log_sum_exp;

pub const MAX_TRANSFER_HEIGHT: usize = 20;

struct Columns {
    height: usize,
    /// Vertical bond sum of each state.
    vert: Vec<i64>,
    /// Field sum of each state, one table per distinct column field pattern.
    field: Vec<Vec<i64>>,
    /// Index into `field` for every column.
    column_kind: Vec<usize>,
}

impl Columns {
    fn new(geom: &ModelGeometry) -> Self {
        let h = geom.height();
        let states = 1usize << h;
        let full = (states - 1) as u64;
        let vert = (0..states as u64)
            .map(|s| {
                let rot = ((s << 1) | (s >> (h - 1))) & full;
                h as i64 - 2 * (s ^ rot).count_ones() as i64
            })
            .collect();
        let mut patterns: Vec<Vec<i8>> = Vec::new();
        let mut column_kind = Vec::with_capacity(geom.width());
        for x in 0..geom.width() {
            let pattern: Vec<i8> = (0..h)
                .map(|y| geom.field_at(geom.index(Site::new(x, y))))
                .collect();
            let k = match patterns.iter().position(|p| *p == pattern) {
                Some(k) => k,
                None => {
                    patterns.push(pattern);
                    patterns.len() - 1
                }
            };
            column_kind.push(k);
        }
        let field = patterns
            .iter()
            .map(|p| {
                (0..states as u64)
                    .map(|s| {
                        (0..h)
                            .map(|y| p[y] as i64 * if (s >> y) & 1 == 1 { 1 } else { -1 })
                            .sum()
                    })
                    .collect()
            })
            .collect();
        Columns {
            height: h,
            vert,
            field,
            column_kind,
        }
    }
}

/// One trace term `(ln v[s0], d ln v[s0] / dβ)`.
fn trace_term(
    cols: &Columns,
    params: &ModelParams,
    diag: &[Vec<(f64, f64)>],
    s0: usize,
) -> (f64, f64) {
    let states = 1usize << cols.height;
    let (beta, j) = (params.beta, params.j);
    let q = (-2.0 * beta * j).exp();
    let dq = -2.0 * j * q;
    let k_shift = j * cols.height as f64;

    let mut v = vec![0.0f64; states];
    let mut g = vec![0.0f64; states];
    v[s0] = 1.0;
    let mut log_scale = 0.0;
    let mut d_log_scale = 0.0;
    for &kind in &cols.column_kind {
        let (w_shift, table) = (&diag[kind][0], &diag[kind][1..]);
        for s in 0..states {
            let (w, e) = table[s];
            g[s] = w * (g[s] + e * v[s]);
            v[s] *= w;
        }
        // `g` already carries the full `E(s)`, so the shift enters `ln v` only.
        log_scale += beta * w_shift.1;

        for y in 0..cols.height {
            let bit = 1usize << y;
            for s in 0..states {
                if s & bit == 0 {
                    let (a, b) = (v[s], v[s | bit]);
                    let (da, db) = (g[s], g[s | bit]);
                    v[s] = a + q * b;
                    v[s | bit] = q * a + b;
                    g[s] = da + q * db + dq * b;
                    g[s | bit] = q * da + db + dq * a;
                }
            }
        }
        log_scale += beta * k_shift;
        d_log_scale += k_shift;

        let max = v.iter().copied().fold(0.0f64, f64::max);
        for s in 0..states {
            v[s] /= max;
            g[s] /= max;
        }
        log_scale += max.ln();
    }
    if v[s0] == 0.0 {
        // Underflowed term; it carries no weight in the trace.
        return (f64::NEG_INFINITY, 0.0);
    }
    (log_scale + v[s0].ln(), d_log_scale + g[s0] / v[s0])
}

fn check_height(geom: &ModelGeometry) -> Result<()> {
    if geom.height() > MAX_TRANSFER_HEIGHT {
        return Err(Error::GuardExceeded {
            what: "transfer-matrix column height",
            got: geom.height(),
            limit: MAX_TRANSFER_HEIGHT,
        });
    }
    Ok(())
}

/// `(ln Z, d ln Z / dβ)` by the column transfer matrix.
pub fn log_partition_transfer_with_derivative(
    geom: &ModelGeometry,
    params: &ModelParams,
) -> Result<(f64, f64)> {
    check_height(geom)?;
    let cols = Columns::new(geom);
    let (beta, j, h) = (params.beta, params.j, params.h);
    // Per column kind: entry 0 holds the shift `(0, M)`, then `(w(s), E(s))`
    // with `w = e^{β(E - M)}` and `M` the largest `E`.
    let diag: Vec<Vec<(f64, f64)>> = cols
        .field
        .iter()
        .map(|field| {
            let e: Vec<f64> = cols
                .vert
                .iter()
                .zip(field)
                .map(|(&v, &f)| j * v as f64 + h * f as f64)
                .collect();
            let m = e.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            std::iter::once((0.0, m))
                .chain(e.iter().map(|&e| ((beta * (e - m)).exp(), e)))
                .collect()
        })
        .collect();
    let terms: Vec<(f64, f64)> = (0..1usize << cols.height)
        .into_par_iter()
        .map(|s0| trace_term(&cols, params, &diag, s0))
        .collect();
    let log_z = log_sum_exp(terms.iter().map(|t| t.0));
    let deriv = terms
        .iter()
        .filter(|t| t.0 > f64::NEG_INFINITY)
        .map(|&(l, d)| (l - log_z).exp() * d)
        .sum();
    Ok((log_z, deriv))
}

/// `ln Z` by the column transfer matrix.
pub fn log_partition_transfer(geom: &ModelGeometry, params: &ModelParams) -> Result<f64> {
    Ok(log_partition_transfer_with_derivative(geom, params)?.0)
}

/// `⟨H⟩ = -d ln Z / dβ`.
pub fn mean_energy_transfer(geom: &ModelGeometry, params: &ModelParams) -> Result<f64> {
    Ok(-log_partition_transfer_with_derivative(geom, params)?.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{log_partition_enumerate, ExactEnsemble};
    use crate::geometry::FieldPattern;
    use crate::numeric::rel_diff;

    #[test]
    fn infinite_temperature() {
        let g = ModelGeometry::cell_board(2, 1, 8).unwrap();
        let lz = log_partition_transfer(&g, &ModelParams::new(1.0, 1.0, 0.0).unwrap()).unwrap();
        assert!(rel_diff(lz, g.num_sites() as f64 * std::f64::consts::LN_2) < 1e-13);
    }

    #[test]
    fn agrees_with_enumeration() {
        let geoms = [
            ModelGeometry::cell_board(1, 1, 2).unwrap(),
            ModelGeometry::cell_board(1, 1, 4).unwrap(),
            ModelGeometry::cell_board(3, 2, 2).unwrap(),
            ModelGeometry::strip(1, 4).unwrap(),
            ModelGeometry::new(FieldPattern::CellBoard { l1: 1, l2: 1 }, 2, 4).unwrap(),
        ];
        for g in &geoms {
            for beta in [0.0, 0.3, 1.0, 5.0, 40.0] {
                let p = ModelParams::new(1.0, 0.9, beta).unwrap();
                let a = log_partition_enumerate(g, &p, &[]).unwrap();
                let b = log_partition_transfer(g, &p).unwrap();
                assert!(
                    rel_diff(a, b) < 1e-10,
                    "{:?} beta {beta}: {a} vs {b}",
                    g.describe()
                );
            }
        }
    }

    #[test]
    fn derivative_matches_mean_energy() {
        let g = ModelGeometry::cell_board(1, 1, 4).unwrap();
        let p = ModelParams::new(1.0, 1.0, 0.7).unwrap();
        let ens = ExactEnsemble::new(&g, p).unwrap();
        let e = mean_energy_transfer(&g, &p).unwrap();
        assert!(rel_diff(e, ens.mean_energy()) < 1e-10);
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let g = ModelGeometry::new(FieldPattern::CellBoard { l1: 2, l2: 1 }, 8, 4).unwrap();
        for beta in [0.2, 1.0, 3.0] {
            let p = ModelParams::new(1.0, 1.0, beta).unwrap();
            let (_, d) = log_partition_transfer_with_derivative(&g, &p).unwrap();
            let eps = 1e-5;
            let up = log_partition_transfer(&g, &p.with_beta(beta + eps)).unwrap();
            let down = log_partition_transfer(&g, &p.with_beta(beta - eps)).unwrap();
            let fd = (up - down) / (2.0 * eps);
            assert!((fd - d).abs() <= 1e-6 * d.abs().max(1.0), "{fd} vs {d}");
        }
    }

    #[test]
    fn height_guard() {
        let g = ModelGeometry::new(FieldPattern::CellBoard { l1: 1, l2: 11 }, 2, 2).unwrap();
        assert!(log_partition_transfer(&g, &ModelParams::new(1.0, 0.0, 1.0).unwrap()).is_err());
    }
}
