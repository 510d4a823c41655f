//! Certified checks of the chessboard estimate, the bad-block bounds, the
//! periodic-energy identity, the block symmetry and the two-point estimate.

use std::time::Instant;

use rand::Rng;

use serde_json::json;

use crate::error::{Error, Result};
use crate::geometry::{
    tile_configuration, BlockCoord, BlockShape, BlockTiling, DoubleBlockKind, ModelGeometry,
    SpinConfig,
};
use crate::model::{energy, theory_constants, ModelParams, TheoryConstants, DEFAULT_C};
use crate::report::VerificationReport;

use super::event::{log_joint_probability, log_z_pattern, log_z_value};
use super::{log_partition_transfer, BlockEvent, ExactEnsemble, Guards};

pub const CHESSBOARD_TOLERANCE: f64 = 1e-9;
pub const IDENTITY_TOLERANCE: f64 = 1e-10;
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

/// A random chessboard assignment: between one and `min(4, N1 N2)` distinct
/// blocks, each carrying an event that keeps every pattern with probability
/// `density`.
pub fn random_chessboard_assignment(
    geom: &ModelGeometry,
    density: f64,
    rng: &mut impl Rng,
) -> Result<Vec<(BlockCoord, BlockEvent)>> {
    use crate::geometry::Axis;
    let (n1, n2) = (geom.cells(Axis::First), geom.cells(Axis::Second));
    let k = rng.random_range(1..=(n1 * n2).min(4));
    let mut coords: Vec<BlockCoord> = Vec::with_capacity(k);
    while coords.len() < k {
        let c = BlockCoord::new(rng.random_range(0..n1), rng.random_range(0..n2));
        if !coords.contains(&c) {
            coords.push(c);
        }
    }
    coords
        .into_iter()
        .map(|c| {
            Ok((
                c,
                BlockEvent::random(geom, BlockShape::Single, density, rng)?,
            ))
        })
        .collect()
}

/// Chessboard estimate `μ(∩_j π_{t_j} 𝒜_j) <= Π_j 𝔷(𝒜_j)` for `Λ`-events at
/// distinct blocks.
pub fn verify_chessboard(
    ens: &ExactEnsemble,
    assignments: &[(BlockCoord, BlockEvent)],
) -> Result<VerificationReport> {
    let start = Instant::now();
    let geom = ens.geom();
    let tiling = BlockTiling::new(geom, BlockShape::Single)?;
    let mut placed: Vec<(usize, &BlockEvent)> = Vec::with_capacity(assignments.len());
    for (i, (coord, event)) in assignments.iter().enumerate() {
        if assignments[..i].iter().any(|(c, _)| c == coord) {
            return Err(Error::DuplicateBlock {
                n: coord.n,
                m: coord.m,
            });
        }
        if event.shape() != BlockShape::Single {
            return Err(Error::InvalidEvent(
                "chessboard assignments take Λ-events".into(),
            ));
        }
        BlockShape::Single.check_anchor(geom, *coord)?;
        let j = tiling
            .anchor_index(*coord)
            .ok_or_else(|| Error::InvalidEvent(format!("no block at {coord:?}")))?;
        placed.push((j, event));
    }
    let log_lhs = log_joint_probability(ens, &tiling, &placed)?;
    let mut cache: Vec<(&BlockEvent, f64)> = Vec::new();
    let mut log_rhs = 0.0;
    for (_, event) in &placed {
        let lz = match cache.iter().find(|(e, _)| e == event) {
            Some(&(_, lz)) => lz,
            None => {
                let lz = log_z_value(ens, event)?;
                cache.push((event, lz));
                lz
            }
        };
        log_rhs += lz;
    }
    let sizes: Vec<usize> = assignments.iter().map(|(_, e)| e.len()).collect();
    Ok(VerificationReport::at_most(
        "chessboard",
        log_lhs.exp(),
        log_rhs.exp(),
        CHESSBOARD_TOLERANCE,
    )
    .with_model(geom, Some(ens.params()))
    .with_input(
        "blocks",
        assignments.iter().map(|(c, _)| c).collect::<Vec<_>>(),
    )
    .with_input("event_sizes", sizes)
    .with_details(json!({ "log_lhs": log_lhs, "log_rhs": log_rhs }))
    .timed(start))
}

fn constants(geom: &ModelGeometry, params: &ModelParams) -> TheoryConstants {
    theory_constants(geom.pattern(), params, DEFAULT_C)
}

/// Per-pattern bounds for one block shape given `ln Z`:
/// `max_p 𝔷(ℬ(p)) <= e^{-β c_P}` and `Σ_p 𝔷(ℬ(p)) <= bound`, the sum being an
/// upper bound for `𝔷(ℛ)` by sub-additivity.
fn pattern_reports(
    geom: &ModelGeometry,
    params: &ModelParams,
    shape: BlockShape,
    log_z: f64,
    theory: &TheoryConstants,
    label: &str,
    sum_bound: f64,
) -> Result<Vec<VerificationReport>> {
    let start = Instant::now();
    let bad = BlockEvent::bad(geom, shape)?;
    let mut worst = (f64::NEG_INFINITY, 0u64);
    let mut logs = Vec::with_capacity(bad.len());
    for p in bad.patterns() {
        let lz = log_z_pattern(geom, params, shape, p, log_z)?;
        if lz > worst.0 {
            worst = (lz, p);
        }
        logs.push(lz);
    }
    let sum = crate::numeric::log_sum_exp(logs).exp();
    let vacuous = !theory.peierls_holds();
    let per = VerificationReport::at_most(
        format!("{label}-patterns"),
        worst.0.exp(),
        theory.pattern_bound(params.beta),
        CHESSBOARD_TOLERANCE,
    )
    .with_model(geom, Some(params))
    .with_details(json!({
        "bad_patterns": bad.len(),
        "worst_pattern": worst.1,
        "peierls_c": theory.peierls_c,
    }))
    .vacuous_if(vacuous)
    .timed(start);
    let total =
        VerificationReport::at_most(format!("{label}-sum"), sum, sum_bound, CHESSBOARD_TOLERANCE)
            .with_model(geom, Some(params))
            .with_details(json!({ "bad_patterns": bad.len(), "peierls_c": theory.peierls_c }))
            .vacuous_if(vacuous)
            .timed(start);
    Ok(vec![per, total])
}

fn double_kinds(geom: &ModelGeometry) -> Vec<DoubleBlockKind> {
    DoubleBlockKind::available(geom)
        .into_iter()
        .filter(|k| geom.cells(k.axis()) % 4 == 0)
        .collect()
}

fn exact_bad_report(
    ens: &ExactEnsemble,
    shape: BlockShape,
    label: &str,
    bound: f64,
    theory: &TheoryConstants,
) -> Result<VerificationReport> {
    let start = Instant::now();
    let bad = BlockEvent::bad(ens.geom(), shape)?;
    let z = log_z_value(ens, &bad)?.exp();
    Ok(
        VerificationReport::at_most(label, z, bound, CHESSBOARD_TOLERANCE)
            .with_model(ens.geom(), Some(ens.params()))
            .with_details(json!({ "peierls_c": theory.peierls_c, "block_size": theory.block_size }))
            .vacuous_if(!theory.peierls_holds())
            .timed(start),
    )
}

/// Bad-block bounds on an exactly enumerable torus:
/// `𝔷(ℛ_Λ) <= 2^{B1B2} e^{-βc_P}`, the per-pattern bound for every bad `Λ`
/// pattern, and the `Λ*` analogues with `4^{B1B2}` for every double-block
/// family the torus supports.
pub fn verify_prop2(ens: &ExactEnsemble) -> Result<Vec<VerificationReport>> {
    let geom = ens.geom();
    let params = ens.params();
    let theory = constants(geom, params);
    let beta = params.beta;
    let mut out = vec![exact_bad_report(
        ens,
        BlockShape::Single,
        "prop2-lambda",
        theory.prop2_bound(beta),
        &theory,
    )?];
    out.extend(pattern_reports(
        geom,
        params,
        BlockShape::Single,
        ens.log_z(),
        &theory,
        "prop2-lambda",
        theory.prop2_bound(beta),
    )?);
    for kind in double_kinds(geom) {
        let shape = BlockShape::Double(kind);
        let label = format!("prop2-double-{}", kind.name());
        out.push(exact_bad_report(
            ens,
            shape,
            &label,
            theory.prop2_double_bound(beta),
            &theory,
        )?);
        out.extend(pattern_reports(
            geom,
            params,
            shape,
            ens.log_z(),
            &theory,
            &label,
            theory.prop2_double_bound(beta),
        )?);
    }
    Ok(out)
}

/// Bad-block bounds on tori beyond enumeration reach, using the
/// transfer-matrix `Z` and the per-pattern route. With `exact_guards` set the
/// exact `𝔷(ℛ)` values are enumerated as well under those guards.
pub fn verify_prop2_transfer(
    geom: &ModelGeometry,
    params: &ModelParams,
    exact_guards: Option<Guards>,
) -> Result<Vec<VerificationReport>> {
    let theory = constants(geom, params);
    let beta = params.beta;
    let log_z = log_partition_transfer(geom, params)?;
    let mut out = pattern_reports(
        geom,
        params,
        BlockShape::Single,
        log_z,
        &theory,
        "prop2-lambda",
        theory.prop2_bound(beta),
    )?;
    for kind in double_kinds(geom) {
        out.extend(pattern_reports(
            geom,
            params,
            BlockShape::Double(kind),
            log_z,
            &theory,
            &format!("prop2-double-{}", kind.name()),
            theory.prop2_double_bound(beta),
        )?);
    }
    if let Some(guards) = exact_guards {
        let ens = ExactEnsemble::with_guards(geom, *params, &[], guards)?;
        out.push(exact_bad_report(
            &ens,
            BlockShape::Single,
            "prop2-lambda",
            theory.prop2_bound(beta),
            &theory,
        )?);
        for kind in double_kinds(geom) {
            out.push(exact_bad_report(
                &ens,
                BlockShape::Double(kind),
                &format!("prop2-double-{}", kind.name()),
                theory.prop2_double_bound(beta),
                &theory,
            )?);
        }
    }
    Ok(out)
}

/// `H_N(σ_{Λ,N}) = (N1/2)(N2/2) H_{[2×2]}(σ_{Λ,[2×2]})` for the tiling of one
/// block configuration.
pub fn verify_lemma_per(
    geom: &ModelGeometry,
    params: &ModelParams,
    block_config: &SpinConfig,
) -> Result<VerificationReport> {
    let start = Instant::now();
    let tiled = tile_configuration(geom, BlockShape::Single, block_config)?;
    let sub = geom.sub_torus_2x2();
    let restricted = geom.restrict_to(&sub, &tiled)?;
    let small = tile_configuration(&sub, BlockShape::Single, block_config)?;
    let copies = (geom.cells(crate::geometry::Axis::First) / 2)
        * (geom.cells(crate::geometry::Axis::Second) / 2);
    let lhs = energy(geom, params, &tiled)?;
    let rhs = copies as f64 * energy(&sub, params, &restricted)?;
    Ok(
        VerificationReport::equal("lemma-per", lhs, rhs, IDENTITY_TOLERANCE)
            .fail_if(small != restricted)
            .with_model(geom, Some(params))
            .with_input("block_config", block_config.spins())
            .with_details(json!({ "copies": copies, "sub_torus_matches": small == restricted }))
            .timed(start),
    )
}

/// Runs [`verify_lemma_per`] over the given block configurations and folds the
/// results into one report holding the worst relative deviation.
pub fn verify_lemma_per_many(
    geom: &ModelGeometry,
    params: &ModelParams,
    configs: impl IntoIterator<Item = SpinConfig>,
) -> Result<VerificationReport> {
    let start = Instant::now();
    let mut worst: Option<VerificationReport> = None;
    let mut worst_dev = -1.0;
    let mut count = 0usize;
    let mut failures = 0usize;
    for cfg in configs {
        let r = verify_lemma_per(geom, params, &cfg)?;
        count += 1;
        if !r.passed() {
            failures += 1;
        }
        let dev = crate::numeric::rel_diff(r.lhs, r.rhs);
        if dev > worst_dev || (!r.passed() && worst.as_ref().is_some_and(|w| w.passed())) {
            worst_dev = dev;
            worst = Some(r);
        }
    }
    let worst =
        worst.ok_or_else(|| Error::InvalidParams("no block configurations given".into()))?;
    Ok(VerificationReport {
        check: "lemma-per".into(),
        ..worst
    }
    .fail_if(failures > 0)
    .with_input("configs", count)
    .with_details(json!({ "configs": count, "failures": failures, "worst_rel_dev": worst_dev }))
    .timed(start))
}

/// `μ(σ(s) = +1, σ(t) = -1)`.
pub fn two_point_probability(ens: &ExactEnsemble, s: usize, t: usize) -> Result<f64> {
    if s == t {
        return Err(Error::InvalidParams(
            "two-point probability needs s != t".into(),
        ));
    }
    ens.pinned_probability(&[(s, 1), (t, -1)])
}

/// The explicit two-point estimate with combinatorial constant `c`.
pub fn verify_prop3(ens: &ExactEnsemble, s: usize, t: usize, c: f64) -> Result<VerificationReport> {
    let start = Instant::now();
    let theory = theory_constants(ens.geom().pattern(), ens.params(), c);
    let p = two_point_probability(ens, s, t)?;
    let rhs = theory.two_point_bound(ens.params().beta);
    Ok(
        VerificationReport::at_most("prop3", p, rhs, CHESSBOARD_TOLERANCE)
            .with_model(ens.geom(), Some(ens.params()))
            .with_input("s", ens.geom().site(s))
            .with_input("t", ens.geom().site(t))
            .with_input("c", c)
            .vacuous_if(!theory.peierls_holds())
            .timed(start),
    )
}

/// `μ(σ(Λ) ≡ +1) = μ(σ(Λ) ≡ -1) = (1 - μ(ℛ(Λ)))/2` for the block at `coord`.
pub fn verify_block_symmetry(ens: &ExactEnsemble, coord: BlockCoord) -> Result<VerificationReport> {
    let start = Instant::now();
    let geom = ens.geom();
    let sites = BlockShape::Single.sites(geom, coord)?;
    let plus: Vec<(usize, i8)> = sites.iter().map(|&s| (s, 1)).collect();
    let minus: Vec<(usize, i8)> = sites.iter().map(|&s| (s, -1)).collect();
    let p_plus = ens.pinned_probability(&plus)?;
    let p_minus = ens.pinned_probability(&minus)?;
    let p_bad = ens
        .log_event_probability(|cfg| {
            let first = cfg.is_up(sites[0]);
            sites.iter().any(|&s| cfg.is_up(s) != first)
        })?
        .exp();
    let half = (1.0 - p_bad) / 2.0;
    Ok(
        VerificationReport::equal_abs("block-symmetry", p_plus, p_minus, SYMMETRY_TOLERANCE)
            .fail_if((p_plus - half).abs() > SYMMETRY_TOLERANCE)
            .with_model(geom, Some(ens.params()))
            .with_input("block", coord)
            .with_details(json!({
                "p_plus": p_plus,
                "p_minus": p_minus,
                "p_bad": p_bad,
                "half_complement": half,
            }))
            .timed(start),
    )
}
