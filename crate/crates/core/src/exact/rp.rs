//! Reflection-positivity certification by Gram matrices.
//!
//! For a reflection line `P`, let `a` range over configurations of the left
//! half `T_l` and `f_a = 1[σ(T_l) = a]`. The Gram matrix is
//! `M[a][b] = E(f_a θ_P f_b) = μ(σ(T_l) = a, σ(ϑ_P T_l) = b)`. Every bounded
//! `F_l`-measurable `f` equals `Σ_a c_a f_a`, so `E(f θ_P f) = cᵀ M c` and
//! positivity for all `f` is exactly positive semidefiniteness of `M`.
//!
//! Sites on the line are fixed by `ϑ_P`, so `M[a][b] = 0` unless `a` and `b`
//! agree there; `M` is block diagonal over the spins on the line and each
//! block is diagonalized separately.

use std::time::Instant;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::error::{Error, Result};
use crate::geometry::ReflectionPlane;
use crate::report::VerificationReport;

use super::{gray, ExactEnsemble};

pub const MAX_GRAM_DIMENSION: usize = 1 << 16;
pub const MAX_GRAM_BLOCK: usize = 1 << 12;
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;
pub const PSD_TOLERANCE: f64 = 1e-9;

/// The Gram matrix of a reflection, stored block by block.
#[derive(Clone, Debug)]
pub struct RpGram {
    pub plane: ReflectionPlane,
    /// Left-half sites in increasing order.
    pub left: Vec<usize>,
    /// Positions (within `left`) of the sites on the line.
    pub fixed: Vec<usize>,
    /// Positions of the remaining left-half sites.
    pub moving: Vec<usize>,
    /// `blocks[k]` is the `2^moving x 2^moving` block for line values `k`,
    /// row-major.
    pub blocks: Vec<Vec<f64>>,
}

impl RpGram {
    pub fn dimension(&self) -> usize {
        1 << self.left.len()
    }

    pub fn block_dimension(&self) -> usize {
        1 << self.moving.len()
    }

    fn split(&self, a: usize) -> (usize, usize) {
        let mut k = 0;
        let mut i = 0;
        for (bit, &pos) in self.fixed.iter().enumerate() {
            k |= ((a >> pos) & 1) << bit;
        }
        for (bit, &pos) in self.moving.iter().enumerate() {
            i |= ((a >> pos) & 1) << bit;
        }
        (k, i)
    }

    /// `M[a][b]` for left-half configurations given as bit masks over `left`.
    pub fn entry(&self, a: usize, b: usize) -> f64 {
        let (ka, ia) = self.split(a);
        let (kb, ib) = self.split(b);
        if ka != kb {
            return 0.0;
        }
        self.blocks[ka][ia * self.block_dimension() + ib]
    }

    /// `max |M - Mᵀ|`.
    pub fn symmetry_error(&self) -> f64 {
        let d = self.block_dimension();
        let mut worst: f64 = 0.0;
        for block in &self.blocks {
            for i in 0..d {
                for j in i + 1..d {
                    worst = worst.max((block[i * d + j] - block[j * d + i]).abs());
                }
            }
        }
        worst
    }

    /// All eigenvalues of the symmetrized matrix, block by block.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let d = self.block_dimension();
        self.blocks
            .iter()
            .flat_map(|block| {
                let m = DMatrix::from_fn(d, d, |i, j| 0.5 * (block[i * d + j] + block[j * d + i]));
                SymmetricEigen::new(m)
                    .eigenvalues
                    .iter()
                    .copied()
                    .collect::<Vec<_>>()
            })
            .collect()
    }

    /// `fᵀ M g` for coefficient vectors indexed by left-half configurations.
    pub fn bilinear(&self, f: &[f64], g: &[f64]) -> f64 {
        let d = self.block_dimension();
        let mut full_index = vec![vec![0usize; d]; self.blocks.len()];
        for a in 0..self.dimension() {
            let (k, i) = self.split(a);
            full_index[k][i] = a;
        }
        let mut total = 0.0;
        for (k, block) in self.blocks.iter().enumerate() {
            for i in 0..d {
                let fa = f[full_index[k][i]];
                if fa == 0.0 {
                    continue;
                }
                for j in 0..d {
                    total += fa * block[i * d + j] * g[full_index[k][j]];
                }
            }
        }
        total
    }
}

/// Builds the Gram matrix of `plane` by exhaustive enumeration.
pub fn rp_gram(ens: &ExactEnsemble, plane: &ReflectionPlane) -> Result<RpGram> {
    if !ens.pins().is_empty() {
        return Err(Error::InvalidParams(
            "reflection positivity is checked for the unconditioned torus measure".into(),
        ));
    }
    let geom = ens.geom();
    let (left, on_line) = geom.half_sites(plane)?;
    let dimension = 1usize.checked_shl(left.len() as u32).unwrap_or(usize::MAX);
    if left.len() >= 63 || dimension > ens.guards().max_gram {
        return Err(Error::GuardExceeded {
            what: "RP Gram dimension",
            got: dimension,
            limit: ens.guards().max_gram,
        });
    }
    let fixed: Vec<usize> = (0..left.len())
        .filter(|&i| on_line.contains(&left[i]))
        .collect();
    let moving: Vec<usize> = (0..left.len())
        .filter(|&i| !on_line.contains(&left[i]))
        .collect();
    let d = 1usize << moving.len();
    if d > ens.guards().max_gram_block {
        return Err(Error::GuardExceeded {
            what: "RP Gram block dimension",
            got: d,
            limit: ens.guards().max_gram_block,
        });
    }
    let nblocks = 1usize << fixed.len();
    let image: Vec<usize> = left
        .iter()
        .map(|&s| geom.index(geom.reflect_site(plane, geom.site(s))))
        .collect();

    let mut gram = RpGram {
        plane: *plane,
        left,
        fixed,
        moving,
        blocks: Vec::new(),
    };
    let free: Vec<usize> = (0..geom.num_sites()).collect();
    if free.len() > ens.guards().max_free_spins {
        return Err(Error::GuardExceeded {
            what: "free spins for enumeration",
            got: free.len(),
            limit: ens.guards().max_free_spins,
        });
    }
    let base = crate::geometry::SpinConfig::uniform(geom.num_sites(), -1);
    let params = *ens.params();
    let log_z = ens.log_z();
    let gram_ref = &gram;
    let partial = gray::par_fold(
        geom,
        &free,
        &base,
        || vec![0.0f64; nblocks * d * d],
        |acc, cfg, parts| {
            let mut a = 0usize;
            let mut b = 0usize;
            for (i, (&s, &t)) in gram_ref.left.iter().zip(&image).enumerate() {
                a |= (cfg.is_up(s) as usize) << i;
                b |= (cfg.is_up(t) as usize) << i;
            }
            let (ka, ia) = gram_ref.split(a);
            // The line spins of `b` equal those of `a`: ϑ fixes them.
            let (_, ib) = gram_ref.split(b);
            acc[ka * d * d + ia * d + ib] += (parts.log_weight(&params) - log_z).exp();
        },
    );
    let mut flat = vec![0.0f64; nblocks * d * d];
    for p in &partial {
        for (x, y) in flat.iter_mut().zip(p) {
            *x += y;
        }
    }
    gram.blocks = flat.chunks(d * d).map(|c| c.to_vec()).collect();
    Ok(gram)
}

/// Certifies `M = Mᵀ` (to `1e-12`) and `λ_min(M) >= -1e-9 ‖M‖`.
pub fn verify_rp(ens: &ExactEnsemble, plane: &ReflectionPlane) -> Result<VerificationReport> {
    let start = Instant::now();
    let gram = rp_gram(ens, plane)?;
    let sym = gram.symmetry_error();
    let eig = gram.eigenvalues();
    let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let norm = eig.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    Ok(
        VerificationReport::at_least("rp", min, -PSD_TOLERANCE * norm, 0.0)
            .fail_if(sym > SYMMETRY_TOLERANCE)
            .with_model(ens.geom(), Some(ens.params()))
            .with_input("plane", plane.to_string())
            .with_details(json!({
                "symmetry_error": sym,
                "symmetry_tolerance": SYMMETRY_TOLERANCE,
                "min_eigenvalue": min,
                "norm": norm,
                "dimension": gram.dimension(),
                "blocks": gram.blocks.len(),
                "block_dimension": gram.block_dimension(),
                "through": plane.through(),
            }))
            .timed(start),
    )
}

/// Spot check of `E(f θ g)^2 <= E(f θ f) E(g θ g)` for random bounded `f, g`.
pub fn verify_cauchy_schwarz(
    ens: &ExactEnsemble,
    plane: &ReflectionPlane,
    samples: usize,
    seed: u64,
) -> Result<VerificationReport> {
    let start = Instant::now();
    let gram = rp_gram(ens, plane)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_ratio: f64 = 0.0;
    let mut worst = (0.0, 0.0);
    for _ in 0..samples {
        let f: Vec<f64> = (0..gram.dimension())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let g: Vec<f64> = (0..gram.dimension())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let fg = gram.bilinear(&f, &g);
        let ff = gram.bilinear(&f, &f);
        let gg = gram.bilinear(&g, &g);
        let lhs = fg * fg;
        let rhs = ff * gg;
        let ratio = if rhs > 0.0 {
            lhs / rhs
        } else if lhs > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        if ratio >= worst_ratio {
            worst_ratio = ratio;
            worst = (lhs, rhs);
        }
    }
    Ok(
        VerificationReport::at_most("cauchy-schwarz", worst.0, worst.1, 1e-9)
            .with_model(ens.geom(), Some(ens.params()))
            .with_input("plane", plane.to_string())
            .with_input("samples", samples)
            .with_input("seed", seed)
            .with_details(json!({ "max_ratio": worst_ratio }))
            .timed(start),
    )
}

/// Runs [`verify_rp`] for every reflection line of the geometry.
pub fn verify_rp_all(ens: &ExactEnsemble) -> Result<Vec<VerificationReport>> {
    ens.geom()
        .planes()
        .iter()
        .map(|p| verify_rp(ens, p))
        .collect()
}
