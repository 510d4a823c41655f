use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::chain::{run_chain, ChainSpec, Init, ObservableTrace};
use super::stats::{dip_ratio, magnetization_histogram, Estimate};
use crate::error::{Error, Result};
use crate::geometry::{ModelGeometry, Site};
use crate::model::ModelParams;

/// Dip ratios below this count as bimodal.
pub const BIMODAL_DIP: f64 = 0.5;
pub const HISTOGRAM_BINS: usize = 41;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionalEstimate {
    /// `μ̂⁺(σ(s) = +1)` from the chain pinned at `σ(t) = +1`.
    pub plus: Estimate,
    /// `μ̂⁻(σ(s) = -1)` from the chain pinned at `σ(t) = -1`.
    pub minus: Estimate,
}

/// The site `t = s + (W/2, 0)`.
pub fn antipodal_partner(geom: &ModelGeometry, s: Site) -> Site {
    Site::new((s.t1 + geom.width() / 2) % geom.width(), s.t2)
}

/// Runs the two chains pinned at `σ(t) = ±1`, each started from the uniform
/// configuration matching its pin. `base` supplies the sweep counts, seed
/// and boundary; its chain id `c` becomes `2c` and `2c + 1`.
pub fn conditional_measures(
    geom: &ModelGeometry,
    params: &ModelParams,
    s: Site,
    t: Site,
    base: &ChainSpec,
) -> Result<ConditionalEstimate> {
    if s == t {
        return Err(Error::InvalidChain("s and t must differ".into()));
    }
    let spec = |spin: i8, init: Init, chain: u64| {
        let mut c = base.clone();
        c.geom = geom.clone();
        c.params = *params;
        c.init = init;
        c.chain = chain;
        c.pinned = vec![(t, spin)];
        c.observe = vec![s];
        c
    };
    let plus = spec(1, Init::Plus, 2 * base.chain);
    let minus = spec(-1, Init::Minus, 2 * base.chain + 1);
    let (a, b) = rayon::join(|| run_chain(&plus), || run_chain(&minus));
    Ok(ConditionalEstimate {
        plus: a?.site_probability(0, 1),
        minus: b?.site_probability(0, -1),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub beta: f64,
    pub h: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanSettings {
    pub j: f64,
    pub inits: Vec<Init>,
    pub sweeps: u64,
    pub burn_in: u64,
    pub thin: u64,
    pub seed: u64,
}

impl Default for ScanSettings {
    fn default() -> Self {
        ScanSettings {
            j: 1.0,
            inits: vec![Init::Plus, Init::Minus, Init::Random],
            sweeps: 20_000,
            burn_in: 2_000,
            thin: 1,
            seed: 0,
        }
    }
}

/// One chain of a scan. Point-level columns repeat on every row of a point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub beta: f64,
    pub h: f64,
    pub init: Init,
    pub chain: u64,
    pub m: Estimate,
    pub abs_m: Estimate,
    pub energy: Estimate,
    pub bad_fraction: f64,
    pub acceptance: f64,
    /// Dip ratio of the `m` histogram pooled over the point's chains.
    pub dip: f64,
    pub bimodal: bool,
    /// Largest pairwise gap between the inits' `⟨m⟩`, in combined
    /// standard errors.
    pub init_spread_z: f64,
    /// Largest pairwise `|⟨m⟩_a - ⟨m⟩_b|`.
    pub init_spread: f64,
    pub histogram: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanTable {
    pub rows: Vec<ScanRow>,
}

impl ScanTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "beta,h,init,chain,mean_m,se_m,tau_m,mean_abs_m,se_abs_m,mean_H,se_H,bad_fraction,acceptance,dip,bimodal,init_spread,init_spread_z\n",
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                r.beta,
                r.h,
                r.init.name(),
                r.chain,
                r.m.mean,
                r.m.std_error,
                r.m.tau,
                r.abs_m.mean,
                r.abs_m.std_error,
                r.energy.mean,
                r.energy.std_error,
                r.bad_fraction,
                r.acceptance,
                r.dip,
                r.bimodal,
                r.init_spread,
                r.init_spread_z,
            ));
        }
        out
    }

    pub fn point(&self, beta: f64, h: f64) -> Vec<&ScanRow> {
        self.rows
            .iter()
            .filter(|r| r.beta == beta && r.h == h)
            .collect()
    }
}

/// Runs every `(point, init)` chain in parallel. Chain ids follow
/// `point_index · inits + init_index`, so results do not depend on scheduling.
pub fn coexistence_scan(
    geom: &ModelGeometry,
    grid: &[ScanPoint],
    settings: &ScanSettings,
) -> Result<ScanTable> {
    if settings.inits.is_empty() {
        return Err(Error::InvalidChain("scan needs at least one init".into()));
    }
    let k = settings.inits.len();
    let specs: Vec<ChainSpec> = grid
        .iter()
        .enumerate()
        .flat_map(|(p, pt)| {
            settings
                .inits
                .iter()
                .enumerate()
                .map(move |(i, &init)| (p, pt, i, init))
        })
        .map(|(p, pt, i, init)| {
            let params = ModelParams::new(settings.j, pt.h, pt.beta)?;
            Ok(ChainSpec::new(geom.clone(), params)
                .init(init)
                .sweeps(settings.sweeps, settings.burn_in, settings.thin)
                .seed(settings.seed, (p * k + i) as u64))
        })
        .collect::<Result<_>>()?;
    let traces: Vec<ObservableTrace> = specs.par_iter().map(run_chain).collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(specs.len());
    for (p, pt) in grid.iter().enumerate() {
        let chunk = &traces[p * k..(p + 1) * k];
        let pooled: Vec<f64> = chunk.iter().flat_map(|t| t.m.iter().copied()).collect();
        let hist = magnetization_histogram(&pooled, geom.num_sites(), HISTOGRAM_BINS);
        let dip = dip_ratio(&hist);
        let ms: Vec<Estimate> = chunk.iter().map(|t| t.magnetization()).collect();
        let mut spread = 0.0f64;
        let mut spread_z = 0.0f64;
        for a in 0..k {
            for b in a + 1..k {
                spread = spread.max((ms[a].mean - ms[b].mean).abs());
                spread_z = spread_z.max(ms[a].z_between(&ms[b]));
            }
        }
        for (i, t) in chunk.iter().enumerate() {
            rows.push(ScanRow {
                beta: pt.beta,
                h: pt.h,
                init: settings.inits[i],
                chain: specs[p * k + i].chain,
                m: ms[i],
                abs_m: t.abs_magnetization(),
                energy: t.mean_energy(),
                bad_fraction: t.bad_fraction.iter().sum::<f64>() / t.len() as f64,
                acceptance: t.acceptance,
                dip,
                bimodal: dip < BIMODAL_DIP,
                init_spread: spread,
                init_spread_z: spread_z,
                histogram: hist.clone(),
            });
        }
    }
    Ok(ScanTable { rows })
}
