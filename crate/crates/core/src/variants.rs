//! The antiferromagnet equivalence via the gauge map `Ψ`, and the battery
//! for the alternating-strips model.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::contour::verify_lemma_hb;
use crate::error::{Error, Result};
use crate::exact::{
    gray, random_chessboard_assignment, verify_block_symmetry, verify_chessboard, verify_prop2,
    verify_rp_all, ExactEnsemble, Guards,
};
use crate::geometry::{BlockCoord, FieldPattern, ModelGeometry, SpinConfig};
use crate::model::{EnergyParts, ModelParams};
use crate::numeric::log_sum_exp;
use crate::report::VerificationReport;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AntiferroParams {
    pub j_a: f64,
    pub h_a: f64,
}

impl AntiferroParams {
    pub fn new(j_a: f64, h_a: f64) -> Result<Self> {
        if !(j_a < 0.0) || !h_a.is_finite() {
            return Err(Error::InvalidParams(format!(
                "antiferromagnet needs J_a < 0 and finite h_a, got J_a = {j_a}, h_a = {h_a}"
            )));
        }
        Ok(AntiferroParams { j_a, h_a })
    }
}

fn check_even(geom: &ModelGeometry) -> Result<()> {
    let (w, h) = geom.dims();
    if w % 2 != 0 || h % 2 != 0 {
        return Err(Error::InvalidGeometry(format!(
            "the gauge map needs even torus sides, got {w}x{h}"
        )));
    }
    Ok(())
}

/// `Ψ(σ)(t) = (-1)^{t1+t2} σ(t)`.
pub fn psi_transform(geom: &ModelGeometry, config: &SpinConfig) -> Result<SpinConfig> {
    check_even(geom)?;
    geom.check_config(config)?;
    Ok(psi_unchecked(geom, config))
}

fn psi_unchecked(geom: &ModelGeometry, config: &SpinConfig) -> SpinConfig {
    let mut out = config.clone();
    for i in 0..config.len() {
        let s = geom.site(i);
        if (s.t1 + s.t2) % 2 == 1 {
            out.flip(i);
        }
    }
    out
}

/// `-J_a Σ_{bonds} σσ - h_a Σ σ`, with the same right/up bond convention as
/// the ferromagnet.
pub fn antiferro_energy(
    geom: &ModelGeometry,
    params: &AntiferroParams,
    config: &SpinConfig,
) -> Result<f64> {
    check_even(geom)?;
    geom.check_config(config)?;
    let (bonds, total) = antiferro_parts(geom, config);
    Ok(-params.j_a * bonds as f64 - params.h_a * total as f64)
}

fn antiferro_parts(geom: &ModelGeometry, config: &SpinConfig) -> (i64, i64) {
    let mut bonds = 0i64;
    for i in 0..geom.num_sites() {
        let nb = geom.neighbors(i);
        let s = config.get(i) as i64;
        bonds += s
            * (config.get(nb[crate::geometry::RIGHT] as usize) as i64
                + config.get(nb[crate::geometry::UP] as usize) as i64);
    }
    (bonds, config.total() as i64)
}

pub const MAX_COROLLARY_SITES: usize = 20;

/// Checks `H_a(Ψσ; -J, h) = H_cb(σ; J, h)` for every configuration of a
/// `CellBoard(1,1)` torus and compares the two partition functions at `β`.
pub fn verify_corollary1(geom: &ModelGeometry, params: &ModelParams) -> Result<VerificationReport> {
    let start = Instant::now();
    if geom.pattern() != (FieldPattern::CellBoard { l1: 1, l2: 1 }) {
        return Err(Error::InvalidGeometry(
            "the antiferromagnet equivalence holds for CellBoard(1,1)".into(),
        ));
    }
    check_even(geom)?;
    let n = geom.num_sites();
    if n > MAX_COROLLARY_SITES {
        return Err(Error::GuardExceeded {
            what: "corollary sites",
            got: n,
            limit: MAX_COROLLARY_SITES,
        });
    }
    let anti = AntiferroParams::new(-params.j, params.h)?;
    let free: Vec<usize> = (0..n).collect();
    let base = SpinConfig::uniform(n, -1);
    let partial = gray::par_fold(
        geom,
        &free,
        &base,
        || (0.0f64, Vec::<f64>::new(), Vec::<f64>::new()),
        |acc, cfg, parts: EnergyParts| {
            let h_cb = parts.energy(params);
            let (bonds, total) = antiferro_parts(geom, &psi_unchecked(geom, cfg));
            let h_a = -anti.j_a * bonds as f64 - anti.h_a * total as f64;
            acc.0 = acc.0.max((h_a - h_cb).abs());
            acc.1.push(-params.beta * h_cb);
            acc.2.push(-params.beta * h_a);
        },
    );
    let max_diff = partial.iter().map(|p| p.0).fold(0.0, f64::max);
    let log_z_cb = log_sum_exp(partial.iter().flat_map(|p| p.1.iter().copied()));
    let log_z_a = log_sum_exp(partial.iter().flat_map(|p| p.2.iter().copied()));
    Ok(
        VerificationReport::at_most("corollary1", max_diff, 1e-12, 0.0)
            .with_model(geom, Some(params))
            .with_kind("antiferro")
            .with_input("J_a", anti.j_a)
            .with_input("h_a", anti.h_a)
            .with_details(json!({
                "configurations": 1u64 << n,
                "log_z_cellboard": log_z_cb,
                "log_z_antiferro": log_z_a,
            }))
            .fail_if((log_z_cb - log_z_a).abs() > 1e-12 * log_z_cb.abs().max(1.0))
            .timed(start),
    )
}

/// Settings of the strip battery.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StripBattery {
    pub chessboard_samples: usize,
    pub seed: u64,
    pub guards: Guards,
}

impl Default for StripBattery {
    fn default() -> Self {
        StripBattery {
            chessboard_samples: 20,
            seed: 0,
            guards: Guards::default(),
        }
    }
}

/// RP for every plane, random chessboard estimates, the `𝔷(ℛ)` bound, the
/// Peierls sweep on the `2 × 2L` sub-torus and the `σ(Λ) ≡ ±1` symmetry, all on
/// a strip torus. Every report is tagged `kind = "strip"`.
pub fn verify_strip_model(
    geom: &ModelGeometry,
    params: &ModelParams,
    battery: &StripBattery,
) -> Result<Vec<VerificationReport>> {
    if !geom.is_strip() {
        return Err(Error::InvalidGeometry("expected a strip geometry".into()));
    }
    let ens = ExactEnsemble::with_guards(geom, *params, &[], battery.guards)?;
    let mut out = verify_rp_all(&ens)?;
    let mut rng = ChaCha8Rng::seed_from_u64(battery.seed);
    for i in 0..battery.chessboard_samples {
        let assignment = random_chessboard_assignment(geom, 0.4, &mut rng)?;
        out.push(verify_chessboard(&ens, &assignment)?.with_input("sample", i));
    }
    out.extend(verify_prop2(&ens)?);
    out.push(verify_lemma_hb(&geom.sub_torus_2x2(), params)?);
    out.push(verify_block_symmetry(&ens, BlockCoord::new(0, 0))?);
    Ok(out.into_iter().map(|r| r.with_kind("strip")).collect())
}
