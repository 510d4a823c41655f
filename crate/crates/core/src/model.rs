//! Hamiltonians, reference configurations and the closed-form constants of
//! the phase-coexistence theorems.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::gray;
use crate::geometry::{Axis, FieldPattern, ModelGeometry, SpinConfig, RIGHT, UP};

/// Couplings `J`, `h` and inverse temperature `β`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    #[serde(rename = "J")]
    pub j: f64,
    pub h: f64,
    pub beta: f64,
}

impl ModelParams {
    /// Validated constructor: `J > 0`, `h >= 0`, `β >= 0`, all finite.
    pub fn new(j: f64, h: f64, beta: f64) -> Result<Self> {
        if !(j.is_finite() && j > 0.0) {
            return Err(Error::InvalidParams(format!("J = {j} must be positive")));
        }
        if !(h.is_finite() && h >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "h = {h} must be non-negative"
            )));
        }
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "beta = {beta} must be non-negative"
            )));
        }
        Ok(ModelParams { j, h, beta })
    }

    pub fn with_beta(self, beta: f64) -> Self {
        ModelParams { beta, ..self }
    }

    pub fn with_h(self, h: f64) -> Self {
        ModelParams { h, ..self }
    }
}

/// Integer ingredients of the energy: `H = -J * bonds - h * field`.
///
/// `bonds` is `Σ σ(s)σ(u)` over the directed right/up bonds and `field` is
/// `Σ field_sign(s) σ(s)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct EnergyParts {
    pub bonds: i64,
    pub field: i64,
}

impl EnergyParts {
    #[inline]
    pub fn energy(&self, params: &ModelParams) -> f64 {
        -params.j * self.bonds as f64 - params.h * self.field as f64
    }

    /// `-β H`.
    #[inline]
    pub fn log_weight(&self, params: &ModelParams) -> f64 {
        params.beta * (params.j * self.bonds as f64 + params.h * self.field as f64)
    }
}

pub fn energy_parts(geom: &ModelGeometry, config: &SpinConfig) -> Result<EnergyParts> {
    geom.check_config(config)?;
    Ok(energy_parts_unchecked(geom, config))
}

pub(crate) fn energy_parts_unchecked(geom: &ModelGeometry, config: &SpinConfig) -> EnergyParts {
    let mut parts = EnergyParts::default();
    for s in 0..geom.num_sites() {
        let sigma = config.get(s) as i64;
        let nb = geom.neighbors(s);
        parts.bonds +=
            sigma * (config.get(nb[RIGHT] as usize) as i64 + config.get(nb[UP] as usize) as i64);
        parts.field += geom.field_at(s) as i64 * sigma;
    }
    parts
}

/// `H_N(σ)` with periodic boundary conditions.
pub fn energy(geom: &ModelGeometry, params: &ModelParams, config: &SpinConfig) -> Result<f64> {
    Ok(energy_parts(geom, config)?.energy(params))
}

/// Change of `(bonds, field)` when the spin at `site` is flipped.
#[inline]
pub(crate) fn flip_delta_parts(
    geom: &ModelGeometry,
    config: &SpinConfig,
    site: usize,
) -> (i64, i64) {
    let sigma = config.get(site) as i64;
    let nb_sum: i64 = geom
        .neighbors(site)
        .iter()
        .map(|&u| config.get(u as usize) as i64)
        .sum();
    (-2 * sigma * nb_sum, -2 * geom.field_at(site) as i64 * sigma)
}

/// `ΔH` of a single spin flip: `2Jσ(s) Σ_u σ(u) + 2h f(s) σ(s)`.
pub fn energy_delta_flip(
    geom: &ModelGeometry,
    params: &ModelParams,
    config: &SpinConfig,
    site: usize,
) -> Result<f64> {
    geom.check_config(config)?;
    if site >= geom.num_sites() {
        return Err(Error::SiteIndexOutOfRange {
            index: site,
            len: geom.num_sites(),
        });
    }
    let (db, df) = flip_delta_parts(geom, config, site);
    Ok(EnergyParts {
        bonds: db,
        field: df,
    }
    .energy(params))
}

/// Axis of the line `Q_i` whose reflection, combined with a global flip,
/// preserves the Hamiltonian: `Q_1` for cell-boards, `Q_2` for strips.
pub fn symmetry_axis(geom: &ModelGeometry) -> Axis {
    if geom.is_strip() {
        Axis::Second
    } else {
        Axis::First
    }
}

/// Constants of the ground-state and phase-coexistence theorems.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoryConstants {
    pub kind: String,
    /// `c_P`: `2J - h L1 L2/(L1+L2)` or `2J - hL` for strips.
    pub peierls_c: f64,
    /// Field below which `σ^+` and `σ^-` are the ground states.
    pub threshold: f64,
    /// `β_0`; for strips `k / (2J - hL)` when `k` is supplied.
    pub beta0: Option<f64>,
    /// `β'` of the two-point estimate (cell-boards only).
    pub beta_prime: Option<f64>,
    pub c_combinatorial: f64,
    /// `B1 B2`, the number of sites of `Λ`.
    pub block_size: usize,
    pub strip_k: Option<f64>,
}

pub const DEFAULT_C: f64 = 9.0;

pub fn theory_constants(pattern: FieldPattern, params: &ModelParams, c: f64) -> TheoryConstants {
    let (j, h) = (params.j, params.h);
    let side = |axis| {
        let l = pattern.cell_length(axis);
        if l % 2 == 0 {
            l
        } else {
            l + 1
        }
    };
    let block_size = side(Axis::First) * side(Axis::Second);
    let ln_cc = (c * (c + 1.0)).ln();
    let ln2 = std::f64::consts::LN_2;
    match pattern {
        FieldPattern::CellBoard { l1, l2 } => {
            let (l1, l2) = (l1 as f64, l2 as f64);
            let peierls_c = 2.0 * j - h * l1 * l2 / (l1 + l2);
            let positive = peierls_c > 0.0;
            let b = block_size as f64;
            TheoryConstants {
                kind: pattern.tag().into(),
                peierls_c,
                threshold: 2.0 * j / l1 + 2.0 * j / l2,
                beta0: positive.then(|| 8.0 * ((b + 4.0) * ln2 + ln_cc) / peierls_c),
                beta_prime: positive.then(|| 4.0 * ((b + 2.0) * ln2 + 2.0 * ln_cc) / peierls_c),
                c_combinatorial: c,
                block_size,
                strip_k: None,
            }
        }
        FieldPattern::Strip { l } => {
            let l = l as f64;
            TheoryConstants {
                kind: pattern.tag().into(),
                peierls_c: 2.0 * j - h * l,
                threshold: 2.0 * j / l,
                beta0: None,
                beta_prime: None,
                c_combinatorial: c,
                block_size,
                strip_k: None,
            }
        }
    }
}

impl TheoryConstants {
    /// Sets the strip constant `k` and with it `β_0 = k / (2J - hL)`.
    pub fn with_strip_k(mut self, k: f64) -> Self {
        if self.kind == "strip" {
            self.strip_k = Some(k);
            self.beta0 = (self.peierls_c > 0.0).then(|| k / self.peierls_c);
        }
        self
    }

    pub fn peierls_holds(&self) -> bool {
        self.peierls_c > 0.0
    }

    /// `e^{-β c_P}`, the bound on `𝔷` of a single bad block pattern.
    pub fn pattern_bound(&self, beta: f64) -> f64 {
        (-beta * self.peierls_c).exp()
    }

    /// `2^{B1 B2} e^{-β c_P}`.
    pub fn prop2_bound(&self, beta: f64) -> f64 {
        2f64.powi(self.block_size as i32) * self.pattern_bound(beta)
    }

    /// `4^{B1 B2} e^{-β c_P}` for double blocks.
    pub fn prop2_double_bound(&self, beta: f64) -> f64 {
        4f64.powi(self.block_size as i32) * self.pattern_bound(beta)
    }

    /// Right-hand side of the two-point estimate:
    /// `2c(c+1) 2^{B1B2/2} e^{-β c_P/8}` for cell-boards and
    /// `2c(c+1) 2^{2L'} e^{-β(2J-hL)/2}` for strips (`2L' = B1 B2`).
    pub fn two_point_bound(&self, beta: f64) -> f64 {
        let c = self.c_combinatorial;
        let b = self.block_size as f64;
        if self.kind == "strip" {
            2.0 * c * (c + 1.0) * 2f64.powf(b) * (-beta * self.peierls_c / 2.0).exp()
        } else {
            2.0 * c * (c + 1.0) * 2f64.powf(b / 2.0) * (-beta * self.peierls_c / 8.0).exp()
        }
    }
}

/// `σ^+`, `σ^-` and the field-aligned `σ_c`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReferenceConfigs {
    pub plus: SpinConfig,
    pub minus: SpinConfig,
    pub cell: SpinConfig,
}

pub fn reference_configs(geom: &ModelGeometry) -> ReferenceConfigs {
    ReferenceConfigs {
        plus: SpinConfig::uniform(geom.num_sites(), 1),
        minus: SpinConfig::uniform(geom.num_sites(), -1),
        cell: SpinConfig::from_fn(geom.num_sites(), |i| geom.field_at(i)),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroundStateLabel {
    /// Minimizers are exactly `{σ^+, σ^-}`.
    PlusMinus,
    /// The unique minimizer is `σ_c`.
    CellAligned,
    /// Any other minimizer set, including ties at the threshold.
    Degenerate,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroundStates {
    pub label: GroundStateLabel,
    pub min_energy: f64,
    pub minimizer_count: u64,
    /// Up to [`MAX_LISTED_MINIMIZERS`] minimizers in enumeration order.
    pub minimizers: Vec<SpinConfig>,
}

pub const MAX_GROUND_STATE_SITES: usize = 24;
pub const MAX_LISTED_MINIMIZERS: usize = 16;

/// Exhaustive minimization of `H` over all configurations of a `T^{[2×2]}`
/// torus.
pub fn classify_ground_states(geom: &ModelGeometry, params: &ModelParams) -> Result<GroundStates> {
    if geom.cells(Axis::First) != 2 || geom.cells(Axis::Second) != 2 {
        return Err(Error::InvalidGeometry(
            "ground states are classified on the 2x2-cell torus".into(),
        ));
    }
    let n = geom.num_sites();
    if n > MAX_GROUND_STATE_SITES {
        return Err(Error::GuardExceeded {
            what: "ground-state sites",
            got: n,
            limit: MAX_GROUND_STATE_SITES,
        });
    }
    let free: Vec<usize> = (0..n).collect();
    let base = SpinConfig::uniform(n, -1);
    let scale = 2.0 * n as f64 * (params.j.abs() + params.h.abs());
    let tol = 1e-12 * scale.max(1.0);

    let mut min_energy = f64::INFINITY;
    let mut count = 0u64;
    let mut listed: Vec<SpinConfig> = Vec::new();
    gray::sweep(geom, &free, &base, 0, 1u64 << n, |cfg, parts| {
        let e = parts.energy(params);
        if e < min_energy - tol {
            min_energy = e;
            count = 0;
            listed.clear();
        }
        if (e - min_energy).abs() <= tol {
            count += 1;
            if listed.len() < MAX_LISTED_MINIMIZERS {
                listed.push(cfg.clone());
            }
        }
    });

    let refs = reference_configs(geom);
    let label = if count == 2 && listed.contains(&refs.plus) && listed.contains(&refs.minus) {
        GroundStateLabel::PlusMinus
    } else if count == 1 && listed[0] == refs.cell {
        GroundStateLabel::CellAligned
    } else {
        GroundStateLabel::Degenerate
    };
    listed.sort_by_key(|c| c.spins());
    Ok(GroundStates {
        label,
        min_energy,
        minimizer_count: count,
        minimizers: listed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{apply_reflection, Site};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn p(j: f64, h: f64) -> ModelParams {
        ModelParams::new(j, h, 1.0).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::new(0.0, 1.0, 1.0).is_err());
        assert!(ModelParams::new(1.0, -1.0, 1.0).is_err());
        assert!(ModelParams::new(1.0, 1.0, -0.1).is_err());
        assert!(ModelParams::new(1.0, 0.0, 0.0).is_ok());
    }

    #[test]
    fn reference_energies() {
        let g = ModelGeometry::cell_board(3, 2, 2).unwrap();
        let refs = reference_configs(&g);
        assert_eq!(energy(&g, &p(1.0, 0.7), &refs.plus).unwrap(), -48.0);
        assert_eq!(
            energy(&g, &p(1.0, 0.7), &refs.plus).unwrap(),
            energy(&g, &p(1.0, 0.7), &refs.minus).unwrap()
        );
        let g = ModelGeometry::cell_board(1, 1, 2).unwrap();
        let refs = reference_configs(&g);
        let e = energy(&g, &p(2.0, 0.5), &refs.cell).unwrap();
        assert_eq!(e, 8.0 * 2.0 - 4.0 * 0.5);
        assert_eq!(refs.cell.spins(), vec![1, -1, -1, 1]);
    }

    #[test]
    fn flip_delta_on_two_by_two() {
        let g = ModelGeometry::cell_board(1, 1, 2).unwrap();
        let plus = SpinConfig::uniform(4, 1);
        let site = g.index(Site::new(1, 0));
        assert_eq!(g.field_at(site), -1);
        let d = energy_delta_flip(&g, &p(1.0, 0.3), &plus, site).unwrap();
        assert!((d - (8.0 - 0.6)).abs() < 1e-15);
    }

    #[test]
    fn flip_path_matches_recomputation() {
        let g = ModelGeometry::cell_board(3, 2, 4).unwrap();
        let params = p(1.3, 0.7);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut cfg = SpinConfig::from_fn(g.num_sites(), |_| if rng.random() { 1 } else { -1 });
        let mut e = energy(&g, &params, &cfg).unwrap();
        let mut worst: f64 = 0.0;
        for _ in 0..1000 {
            let s = rng.random_range(0..g.num_sites());
            e += energy_delta_flip(&g, &params, &cfg, s).unwrap();
            cfg.flip(s);
            let fresh = energy(&g, &params, &cfg).unwrap();
            worst = worst.max((e - fresh).abs() / fresh.abs().max(1.0));
        }
        assert!(worst < 1e-12, "{worst}");
    }

    #[test]
    fn theory_constant_examples() {
        let t = theory_constants(FieldPattern::CellBoard { l1: 3, l2: 2 }, &p(1.0, 1.0), 9.0);
        assert!((t.peierls_c - (2.0 - 1.2)).abs() < 1e-15);
        assert!((t.threshold - (2.0 / 3.0 + 1.0)).abs() < 1e-15);

        let t = theory_constants(FieldPattern::CellBoard { l1: 1, l2: 1 }, &p(1.0, 1.0), 9.0);
        let expect = 8.0 * (8.0 * 2f64.ln() + 90f64.ln()) / 1.5;
        assert!((t.beta0.unwrap() - expect).abs() < 1e-12);
        assert!((t.beta0.unwrap() - 53.57).abs() < 5e-3);

        let t = theory_constants(FieldPattern::Strip { l: 2 }, &p(1.0, 0.2), 9.0);
        assert_eq!(t.threshold, 1.0);
        assert!(t.beta0.is_none());
        let t = t.with_strip_k(3.2);
        assert!((t.beta0.unwrap() - 3.2 / 1.6).abs() < 1e-15);

        let t = theory_constants(FieldPattern::CellBoard { l1: 1, l2: 1 }, &p(1.0, 4.0), 9.0);
        assert!(t.beta0.is_none());
        assert!(!t.peierls_holds());
    }

    #[test]
    fn prop2_rhs_example() {
        let t = theory_constants(FieldPattern::CellBoard { l1: 1, l2: 1 }, &p(1.0, 1.0), 9.0);
        assert!((t.prop2_bound(2.0) - 16.0 * (-3f64).exp()).abs() < 1e-15);
        assert!((t.prop2_bound(2.0) - 0.7966).abs() < 1e-4);
    }

    #[test]
    fn cell_beats_plus_iff_above_threshold() {
        for l1 in 1..=3 {
            for l2 in 1..=3 {
                let g = ModelGeometry::new(FieldPattern::CellBoard { l1, l2 }, 2, 2).unwrap();
                let refs = reference_configs(&g);
                let t = theory_constants(g.pattern(), &p(1.0, 0.0), 9.0);
                for frac in [0.5, 0.99, 1.01, 2.0] {
                    let params = p(1.0, t.threshold * frac);
                    let ec = energy(&g, &params, &refs.cell).unwrap();
                    let ep = energy(&g, &params, &refs.plus).unwrap();
                    assert_eq!(ec < ep, frac > 1.0, "L=({l1},{l2}) frac {frac}");
                }
            }
        }
    }

    #[test]
    fn ground_states_one_one() {
        let g = ModelGeometry::cell_board(1, 1, 2).unwrap();
        let gs = classify_ground_states(&g, &p(1.0, 1.0)).unwrap();
        assert_eq!(gs.label, GroundStateLabel::PlusMinus);
        let gs = classify_ground_states(&g, &p(1.0, 5.0)).unwrap();
        assert_eq!(gs.label, GroundStateLabel::CellAligned);
        let gs = classify_ground_states(&g, &p(1.0, 4.0)).unwrap();
        assert_eq!(gs.label, GroundStateLabel::Degenerate);
        assert!(gs.minimizer_count >= 3);
        assert!(
            classify_ground_states(&ModelGeometry::cell_board(1, 1, 4).unwrap(), &p(1.0, 1.0))
                .is_err()
        );
    }

    proptest! {
        #[test]
        fn q_reflection_with_flip_preserves_energy(bits in any::<u64>(), h in 0.0f64..5.0, strip in any::<bool>()) {
            let g = if strip {
                ModelGeometry::strip(2, 4).unwrap()
            } else {
                ModelGeometry::cell_board(2, 1, 4).unwrap()
            };
            let cfg = SpinConfig::from_fn(g.num_sites(), |i| if (bits >> (i % 64)) & 1 == 1 { 1 } else { -1 });
            let q = g.q_line(symmetry_axis(&g));
            let image = apply_reflection(&g, &q, &cfg).unwrap().negated();
            let params = p(1.0, h);
            let a = energy(&g, &params, &cfg).unwrap();
            let b = energy(&g, &params, &image).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }

        #[test]
        fn field_flip_equals_global_flip(bits in any::<u32>(), h in -3.0f64..3.0) {
            let g = ModelGeometry::cell_board(1, 1, 4).unwrap();
            let cfg = SpinConfig::from_bits(16, bits as u64 & 0xffff);
            let plus = ModelParams { j: 1.0, h, beta: 1.0 };
            let minus = ModelParams { h: -h, ..plus };
            let a = energy(&g, &minus, &cfg).unwrap();
            let b = energy(&g, &plus, &cfg.negated()).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn double_flip_is_zero(bits in any::<u64>(), site in 0usize..32) {
            let g = ModelGeometry::cell_board(2, 2, 2).unwrap();
            let params = p(1.0, 0.9);
            let mut cfg = SpinConfig::from_bits(16, bits & 0xffff);
            let s = site % 16;
            let d1 = energy_delta_flip(&g, &params, &cfg, s).unwrap();
            cfg.flip(s);
            let d2 = energy_delta_flip(&g, &params, &cfg, s).unwrap();
            prop_assert_eq!(d1 + d2, 0.0);
        }
    }
}
