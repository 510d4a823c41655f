//! The desk-scale certification battery: twelve criteria, each a bundle of
//! reports with a wall-clock budget.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::contour::{lemma_hb_sweep, verify_lemma_hb};
use crate::error::Result;
use crate::exact::{
    log_partition_enumerate, log_partition_transfer, random_chessboard_assignment,
    two_point_probability, verify_block_symmetry, verify_chessboard, verify_lemma_per_many,
    verify_prop2, verify_prop2_transfer, verify_prop3, verify_rp_all, BlockEvent, ExactEnsemble,
    Guards,
};
use crate::geometry::{
    Axis, BlockCoord, BlockShape, FieldPattern, ModelGeometry, Site, SpinConfig,
};
use crate::mc::{
    antipodal_partner, coexistence_scan, conditional_measures, run_chain, ChainSpec, Estimate,
    Init, ScanPoint, ScanSettings,
};
use crate::model::{
    classify_ground_states, theory_constants, GroundStateLabel, ModelParams, DEFAULT_C,
};
use crate::report::{reports_to_csv, VerificationReport};
use crate::variants::verify_corollary1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatteryConfig {
    pub seed: u64,
    /// Enables the slow-tier checks.
    pub slow: bool,
    pub chessboard_samples: usize,
    pub mc_sweeps: u64,
    pub coexistence_sweeps: u64,
}

impl Default for BatteryConfig {
    fn default() -> Self {
        BatteryConfig {
            seed: 2024,
            slow: false,
            chessboard_samples: 50,
            mc_sweeps: 1_000_000,
            coexistence_sweeps: 100_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionOutcome {
    pub id: u8,
    pub name: String,
    pub budget_seconds: f64,
    pub seconds: f64,
    pub reports: Vec<VerificationReport>,
    pub error: Option<String>,
    pub passed: bool,
}

impl CriterionOutcome {
    /// `criterion  3 chessboard  PASS  (200 reports, 1.2 s)`.
    pub fn line(&self) -> String {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        let mut line = format!(
            "criterion {:>2} {:<22} {verdict}  ({} reports, {:.2} s of {:.0} s)",
            self.id,
            self.name,
            self.reports.len(),
            self.seconds,
            self.budget_seconds
        );
        if let Some(e) = &self.error {
            line.push_str(&format!("  error: {e}"));
        }
        for r in self.reports.iter().filter(|r| !r.passed()) {
            line.push_str(&format!(
                "\n    failed {} lhs={} rhs={}",
                r.check, r.lhs, r.rhs
            ));
        }
        line
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatterySummary {
    pub config: BatteryConfig,
    pub criteria: Vec<CriterionOutcome>,
}

impl BatterySummary {
    pub fn passed(&self) -> bool {
        self.criteria.iter().all(|c| c.passed)
    }

    pub fn reports(&self) -> Vec<VerificationReport> {
        self.criteria
            .iter()
            .flat_map(|c| c.reports.iter().cloned())
            .collect()
    }

    pub fn to_csv(&self) -> String {
        reports_to_csv(&self.reports())
    }
}

/// `(id, name, budget in seconds)`.
pub const CRITERIA: [(u8, &str, f64); 12] = [
    (1, "oracle-equivalence", 30.0),
    (2, "rp", 60.0),
    (3, "chessboard", 120.0),
    (4, "prop2", 60.0),
    (5, "lemma-per", 60.0),
    (6, "lemma-hb", 300.0),
    (7, "ground-states", 60.0),
    (8, "corollary1", 10.0),
    (9, "block-symmetry", 60.0),
    (10, "mc-exact", 120.0),
    (11, "coexistence", 300.0),
    (12, "two-point", 60.0),
];

fn params(j: f64, h: f64, beta: f64) -> ModelParams {
    ModelParams::new(j, h, beta).expect("battery parameters are valid")
}

fn cb(l1: usize, l2: usize, n: usize) -> Result<ModelGeometry> {
    ModelGeometry::cell_board(l1, l2, n)
}

pub fn run_criterion(id: u8, config: &BatteryConfig) -> CriterionOutcome {
    let (_, name, budget) = CRITERIA
        .iter()
        .copied()
        .find(|c| c.0 == id)
        .unwrap_or((id, "unknown", 0.0));
    let start = Instant::now();
    let result = match id {
        1 => oracle_equivalence(),
        2 => rp(),
        3 => chessboard(config),
        4 => prop2(config),
        5 => lemma_per(config),
        6 => lemma_hb(),
        7 => ground_states(),
        8 => corollary1(),
        9 => block_symmetry(),
        10 => mc_exact(config),
        11 => coexistence(config),
        12 => two_point(),
        _ => Err(crate::Error::InvalidParams(format!("no criterion {id}"))),
    };
    let seconds = start.elapsed().as_secs_f64();
    let (reports, error) = match result {
        Ok(r) => (r, None),
        Err(e) => (Vec::new(), Some(e.to_string())),
    };
    let passed = error.is_none()
        && !reports.is_empty()
        && reports.iter().all(VerificationReport::passed)
        && seconds <= budget;
    CriterionOutcome {
        id,
        name: name.into(),
        budget_seconds: budget,
        seconds,
        reports,
        error,
        passed,
    }
}

pub fn run_all(config: &BatteryConfig) -> BatterySummary {
    BatterySummary {
        config: config.clone(),
        criteria: CRITERIA
            .iter()
            .map(|c| run_criterion(c.0, config))
            .collect(),
    }
}

fn oracle_equivalence() -> Result<Vec<VerificationReport>> {
    let geoms = [
        cb(1, 1, 2)?,
        cb(1, 1, 4)?,
        cb(3, 2, 2)?,
        ModelGeometry::strip(1, 4)?,
    ];
    let mut out = Vec::new();
    for g in &geoms {
        for beta in [0.5, 1.0, 2.0] {
            let start = Instant::now();
            let p = params(1.0, 1.0, beta);
            let a = log_partition_enumerate(g, &p, &[])?;
            let b = log_partition_transfer(g, &p)?;
            out.push(
                VerificationReport::equal("oracle", a, b, 1e-10)
                    .with_model(g, Some(&p))
                    .timed(start),
            );
        }
    }
    Ok(out)
}

fn rp() -> Result<Vec<VerificationReport>> {
    let geoms = [
        cb(1, 1, 2)?,
        ModelGeometry::new(FieldPattern::CellBoard { l1: 1, l2: 1 }, 4, 2)?,
        cb(2, 1, 2)?,
    ];
    let mut out = Vec::new();
    for g in &geoms {
        for beta in [0.0, 0.5, 1.0, 2.0, 5.0] {
            let ens = ExactEnsemble::new(g, params(1.0, 1.0, beta))?;
            out.extend(verify_rp_all(&ens)?);
        }
    }
    Ok(out)
}

fn chessboard(config: &BatteryConfig) -> Result<Vec<VerificationReport>> {
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for n in [2, 4] {
        let g = cb(1, 1, n)?;
        for beta in [0.5, 2.0] {
            let ens = ExactEnsemble::new(&g, params(1.0, 1.0, beta))?;
            for i in 0..config.chessboard_samples {
                let density = rng.random_range(0.1..0.9);
                let assignment = random_chessboard_assignment(&g, density, &mut rng)?;
                out.push(verify_chessboard(&ens, &assignment)?.with_input("sample", i));
            }
        }
    }
    Ok(out)
}

fn prop2(config: &BatteryConfig) -> Result<Vec<VerificationReport>> {
    let g = cb(1, 1, 2)?;
    let mut out = Vec::new();
    for beta in [1.0, 2.0, 4.0] {
        out.extend(verify_prop2(&ExactEnsemble::new(
            &g,
            params(1.0, 1.0, beta),
        )?)?);
    }
    let bad = BlockEvent::bad(&g, BlockShape::Single)?;
    out.push(
        VerificationReport::equal_abs("bad-pattern-count", bad.len() as f64, 14.0, 0.0)
            .with_model(&g, None),
    );
    // Λ* blocks on the 8x4 torus: per-pattern terms via the transfer matrix,
    // plus the 2^32 enumeration in the slow tier.
    let g = cb(2, 1, 4)?;
    let guards = config.slow.then(|| Guards {
        max_free_spins: 32,
        ..Guards::default()
    });
    out.extend(verify_prop2_transfer(&g, &params(1.0, 1.0, 2.0), guards)?);
    Ok(out)
}

fn block_configs(size: usize) -> impl Iterator<Item = SpinConfig> {
    (0..1u64 << size).map(move |b| SpinConfig::from_bits(size, b))
}

fn lemma_per(config: &BatteryConfig) -> Result<Vec<VerificationReport>> {
    let p = params(1.0, 1.0, 1.0);
    let mut out = Vec::new();
    for (l1, l2) in [(1, 1), (2, 1)] {
        let g = cb(l1, l2, 4)?;
        out.push(verify_lemma_per_many(
            &g,
            &p,
            block_configs(g.block_size()),
        )?);
    }
    let g = cb(3, 2, 4)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 5);
    let size = g.block_size();
    let configs: Vec<SpinConfig> = (0..100)
        .map(|_| SpinConfig::from_bits(size, rng.random::<u64>() & ((1 << size) - 1)))
        .collect();
    out.push(verify_lemma_per_many(&g, &p, configs)?);
    Ok(out)
}

fn lemma_hb() -> Result<Vec<VerificationReport>> {
    let mut out = Vec::new();
    let g = cb(1, 1, 2)?;
    let p = params(1.0, 1.0, 1.0);
    let start = Instant::now();
    let rec = lemma_hb_sweep(&g, &p)?;
    out.push(verify_lemma_hb(&g, &p)?);
    out.push(
        VerificationReport::equal_abs("lemma-hb-tight", rec.min_delta, rec.bound_4cp, 0.0)
            .fail_if(rec.min_delta != 6.0)
            .with_model(&g, Some(&p))
            .timed(start),
    );
    for (l1, l2) in [(2, 1), (2, 2)] {
        let g = cb(l1, l2, 2)?;
        let threshold = theory_constants(g.pattern(), &params(1.0, 0.0, 1.0), DEFAULT_C).threshold;
        for frac in [0.5, 0.9] {
            out.push(verify_lemma_hb(&g, &params(1.0, frac * threshold, 1.0))?);
        }
    }
    // 2^24 - 2 subsets; cheap enough for the default tier.
    out.push(verify_lemma_hb(&cb(3, 2, 2)?, &params(1.0, 1.0, 1.0))?);
    Ok(out)
}

/// Compares the exhaustive ground-state classification on the 2x2-cell torus
/// with the phase predicted by the threshold.
pub fn verify_ground_states(
    geom: &ModelGeometry,
    params: &ModelParams,
) -> Result<VerificationReport> {
    let start = Instant::now();
    let threshold = theory_constants(geom.pattern(), params, DEFAULT_C).threshold;
    let expected = if (params.h - threshold).abs() <= 1e-12 * threshold {
        GroundStateLabel::Degenerate
    } else if params.h < threshold {
        GroundStateLabel::PlusMinus
    } else {
        GroundStateLabel::CellAligned
    };
    let gs = classify_ground_states(geom, params)?;
    let ok = (gs.label == expected) as u8 as f64;
    Ok(VerificationReport::equal_abs("ground-states", ok, 1.0, 0.0)
        .with_model(geom, Some(params))
        .with_details(json!({
            "threshold": threshold,
            "expected": expected,
            "label": gs.label,
            "min_energy": gs.min_energy,
            "minimizers": gs.minimizer_count,
        }))
        .timed(start))
}

fn ground_states() -> Result<Vec<VerificationReport>> {
    let mut out = Vec::new();
    for (l1, l2) in [(1, 1), (2, 1), (2, 2)] {
        let g = cb(l1, l2, 2)?;
        let threshold = theory_constants(g.pattern(), &params(1.0, 0.0, 1.0), DEFAULT_C).threshold;
        for h in [0.5 * threshold, threshold, 1.5 * threshold] {
            out.push(verify_ground_states(&g, &params(1.0, h, 1.0))?);
        }
    }
    Ok(out)
}

fn corollary1() -> Result<Vec<VerificationReport>> {
    let g = cb(1, 1, 4)?;
    [1.0, 3.0]
        .into_iter()
        .map(|h| verify_corollary1(&g, &params(1.0, h, 1.0)))
        .collect()
}

fn block_symmetry() -> Result<Vec<VerificationReport>> {
    let geoms = [cb(1, 1, 2)?, cb(1, 1, 4)?, ModelGeometry::strip(1, 4)?];
    let mut out = Vec::new();
    for g in &geoms {
        for beta in [0.5, 2.0] {
            let ens = ExactEnsemble::new(g, params(1.0, 1.0, beta))?;
            out.push(verify_block_symmetry(&ens, BlockCoord::new(0, 0))?);
        }
    }
    Ok(out)
}

fn mc_exact(config: &BatteryConfig) -> Result<Vec<VerificationReport>> {
    let start = Instant::now();
    let g = ModelGeometry::new(FieldPattern::CellBoard { l1: 1, l2: 1 }, 2, 4)?;
    let p = params(1.0, 1.0, 1.0);
    let ens = ExactEnsemble::new(&g, p)?;
    let exact_m = ens.expectation(|c| c.magnetization())?;
    let exact_h = ens.mean_energy();
    let trace = run_chain(
        &ChainSpec::new(g.clone(), p)
            .sweeps(config.mc_sweeps + 1000, 1000, 1)
            .seed(config.seed, 0),
    )?;
    let m = trace.magnetization();
    let h = trace.mean_energy();
    Ok(vec![
        VerificationReport::at_most("mc-exact-m", m.z_score(exact_m), 3.0, 0.0)
            .with_model(&g, Some(&p))
            .with_details(json!({ "mc": m, "exact": exact_m }))
            .timed(start),
        VerificationReport::at_most("mc-exact-H", h.z_score(exact_h), 3.0, 0.0)
            .with_model(&g, Some(&p))
            .with_details(json!({ "mc": h, "exact": exact_h }))
            .timed(start),
    ])
}

fn coexistence(config: &BatteryConfig) -> Result<Vec<VerificationReport>> {
    let mut out = Vec::new();
    let geoms = [cb(1, 1, 16)?, ModelGeometry::strip(1, 16)?];
    for (k, g) in geoms.iter().enumerate() {
        let s = Site::new(0, 0);
        let t = antipodal_partner(g, s);
        for (beta, ordered) in [(2.0, true), (0.1, false)] {
            let start = Instant::now();
            let p = params(1.0, 1.0, beta);
            let base = ChainSpec::new(g.clone(), p)
                .sweeps(config.coexistence_sweeps + 1000, 1000, 1)
                .seed(config.seed, 10 + 2 * k as u64 + ordered as u64);
            let est = conditional_measures(g, &p, s, t, &base)?;
            if ordered {
                for (label, e) in [("plus", est.plus), ("minus", est.minus)] {
                    out.push(
                        VerificationReport::at_least(
                            format!("coexistence-{label}"),
                            e.z_score(0.5),
                            5.0,
                            0.0,
                        )
                        .fail_if(e.mean <= 0.5)
                        .with_model(g, Some(&p))
                        .with_input("s", s)
                        .with_input("t", t)
                        .with_details(json!({ "estimate": e }))
                        .timed(start),
                    );
                }
            } else {
                // P(σ(s) = +1) seen from both pins; s sits on a field site, so
                // the common value is not 1/2.
                let from_minus = Estimate {
                    mean: 1.0 - est.minus.mean,
                    ..est.minus
                };
                out.push(
                    VerificationReport::at_most(
                        "pin-independence",
                        est.plus.z_between(&from_minus),
                        3.0,
                        0.0,
                    )
                    .with_model(g, Some(&p))
                    .with_input("s", s)
                    .with_input("t", t)
                    .with_details(json!({ "plus_pin": est.plus, "minus_pin": from_minus }))
                    .timed(start),
                );
            }
        }
        let start = Instant::now();
        let settings = ScanSettings {
            inits: vec![Init::Plus, Init::Minus, Init::Random],
            sweeps: config.coexistence_sweeps / 5 + 1000,
            burn_in: 1000,
            seed: config.seed ^ (k as u64 + 1),
            ..ScanSettings::default()
        };
        let table = coexistence_scan(
            g,
            &[
                ScanPoint { beta: 2.0, h: 1.0 },
                ScanPoint { beta: 0.1, h: 1.0 },
            ],
            &settings,
        )?;
        let cold = table.point(2.0, 1.0)[0].clone();
        let hot = table.point(0.1, 1.0)[0].clone();
        out.push(
            VerificationReport::at_least("scan-plus-minus-gap", cold.init_spread, 1.0, 0.0)
                .fail_if(!cold.bimodal)
                .with_model(g, Some(&params(1.0, 1.0, 2.0)))
                .with_details(json!({ "dip": cold.dip, "histogram": cold.histogram }))
                .timed(start),
        );
        out.push(
            VerificationReport::at_most("scan-init-spread", hot.init_spread_z, 3.0, 0.0)
                .fail_if(hot.bimodal)
                .with_model(g, Some(&params(1.0, 1.0, 0.1)))
                .with_details(json!({ "dip": hot.dip }))
                .timed(start),
        );
    }
    Ok(out)
}

/// Exact `μ(σ(s) = +1, σ(t) = -1)` along increasing `β`: a monotonicity
/// report plus the two-point bound at every `β`.
pub fn verify_two_point(
    geom: &ModelGeometry,
    j: f64,
    h: f64,
    betas: &[f64],
    s: Site,
    t: Site,
) -> Result<Vec<VerificationReport>> {
    let start = Instant::now();
    let (si, ti) = (geom.checked_index(s)?, geom.checked_index(t)?);
    let mut sorted = betas.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut out = Vec::new();
    let mut probs = Vec::new();
    for &beta in &sorted {
        let ens = ExactEnsemble::new(geom, ModelParams::new(j, h, beta)?)?;
        probs.push(two_point_probability(&ens, si, ti)?);
        out.push(verify_prop3(&ens, si, ti, DEFAULT_C)?);
    }
    let max_rise = probs.windows(2).map(|w| w[1] - w[0]).fold(-1.0, f64::max);
    out.insert(
        0,
        VerificationReport::at_most("two-point-monotone", max_rise, 0.0, 0.0)
            .with_model(geom, None)
            .with_input("s", s)
            .with_input("t", t)
            .with_details(json!({ "betas": sorted, "probabilities": probs }))
            .timed(start),
    );
    Ok(out)
}

fn two_point() -> Result<Vec<VerificationReport>> {
    let g = cb(1, 1, 4)?;
    let t = Site::new(g.extent(Axis::First) / 2, 0);
    verify_two_point(&g, 1.0, 1.0, &[0.0, 1.0, 2.0, 4.0], Site::new(0, 0), t)
}
