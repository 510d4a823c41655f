use crate::error::{Error, Result};
use crate::geometry::{ModelGeometry, SpinConfig};
use crate::model::{EnergyParts, ModelParams};
use crate::numeric::log_sum_exp;

use super::gray;
use super::Guards;

/// Joint histogram of `(bonds, field)` over a set of configurations.
///
/// The histogram does not depend on `β`, `J` or `h`, so one enumeration serves
/// every parameter point. Counts are exact integers; parallel partial
/// histograms merge by addition and the result is independent of scheduling.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DensityOfStates {
    sites: usize,
    counts: Vec<u64>,
}

impl DensityOfStates {
    pub fn empty(sites: usize) -> Self {
        DensityOfStates {
            sites,
            counts: vec![0; (2 * sites + 1) * (sites + 1)],
        }
    }

    #[inline]
    fn slot(&self, parts: EnergyParts) -> usize {
        let n = self.sites as i64;
        let u = (2 * n - parts.bonds) / 2;
        let v = (parts.field + n) / 2;
        (u * (n + 1) + v) as usize
    }

    fn parts(&self, slot: usize) -> EnergyParts {
        let n = self.sites as i64;
        let (u, v) = ((slot as i64) / (n + 1), (slot as i64) % (n + 1));
        EnergyParts {
            bonds: 2 * n - 2 * u,
            field: 2 * v - n,
        }
    }

    #[inline]
    pub fn add(&mut self, parts: EnergyParts) {
        let s = self.slot(parts);
        self.counts[s] += 1;
    }

    pub fn merge(&mut self, other: &DensityOfStates) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn count(&self, parts: EnergyParts) -> u64 {
        self.counts[self.slot(parts)]
    }

    /// Non-empty bins.
    pub fn bins(&self) -> impl Iterator<Item = (EnergyParts, u64)> + '_ {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, &c)| (self.parts(i), c))
    }

    /// `ln Σ_σ e^{-βH(σ)}`; `-∞` for an empty histogram.
    pub fn log_sum(&self, params: &ModelParams) -> f64 {
        log_sum_exp(
            self.bins()
                .map(|(p, c)| (c as f64).ln() + p.log_weight(params)),
        )
    }

    /// Gibbs mean of `H` over the histogram.
    pub fn mean_energy(&self, params: &ModelParams) -> f64 {
        let log_z = self.log_sum(params);
        self.bins()
            .map(|(p, c)| p.energy(params) * ((c as f64).ln() + p.log_weight(params) - log_z).exp())
            .sum()
    }
}

/// Validated pins sorted by site, plus the complementary free sites.
pub(crate) fn split_pins(
    geom: &ModelGeometry,
    pins: &[(usize, i8)],
) -> Result<(Vec<(usize, i8)>, Vec<usize>)> {
    let n = geom.num_sites();
    let mut sorted: Vec<(usize, i8)> = Vec::with_capacity(pins.len());
    for &(s, v) in pins {
        if s >= n {
            return Err(Error::SiteIndexOutOfRange { index: s, len: n });
        }
        let v = if v > 0 { 1 } else { -1 };
        sorted.push((s, v));
    }
    sorted.sort_unstable();
    let mut dedup: Vec<(usize, i8)> = Vec::with_capacity(sorted.len());
    for (s, v) in sorted {
        match dedup.last() {
            Some(&(t, w)) if t == s => {
                if w != v {
                    return Err(Error::InvalidParams(format!(
                        "site {s} pinned to both +1 and -1"
                    )));
                }
            }
            _ => dedup.push((s, v)),
        }
    }
    let mut pinned = vec![false; n];
    for &(s, _) in &dedup {
        pinned[s] = true;
    }
    let free = (0..n).filter(|&s| !pinned[s]).collect();
    Ok((dedup, free))
}

fn base_config(geom: &ModelGeometry, pins: &[(usize, i8)]) -> SpinConfig {
    let mut base = SpinConfig::uniform(geom.num_sites(), -1);
    for &(s, v) in pins {
        base.set(s, v);
    }
    base
}

fn check_free(free: usize, guards: &Guards) -> Result<()> {
    if free > guards.max_free_spins {
        return Err(Error::GuardExceeded {
            what: "free spins for enumeration",
            got: free,
            limit: guards.max_free_spins,
        });
    }
    Ok(())
}

/// Histogram over all configurations that agree with `pins` and satisfy
/// `pred`.
pub(crate) fn density_of_states<P>(
    geom: &ModelGeometry,
    pins: &[(usize, i8)],
    guards: &Guards,
    pred: Option<&P>,
) -> Result<DensityOfStates>
where
    P: Fn(&SpinConfig) -> bool + Sync,
{
    let (pins, free) = split_pins(geom, pins)?;
    check_free(free.len(), guards)?;
    let base = base_config(geom, &pins);
    let n = geom.num_sites();
    let parts = gray::par_fold(
        geom,
        &free,
        &base,
        || DensityOfStates::empty(n),
        |dos, cfg, parts| {
            if pred.is_none_or(|p| p(cfg)) {
                dos.add(parts);
            }
        },
    );
    let mut dos = DensityOfStates::empty(n);
    for p in &parts {
        dos.merge(p);
    }
    Ok(dos)
}

/// Exact Gibbs measure on a torus, optionally conditioned on pinned spins.
#[derive(Clone, Debug)]
pub struct ExactEnsemble {
    geom: ModelGeometry,
    params: ModelParams,
    pins: Vec<(usize, i8)>,
    guards: Guards,
    dos: DensityOfStates,
    log_z: f64,
}

type NoPred = fn(&SpinConfig) -> bool;

impl ExactEnsemble {
    pub fn new(geom: &ModelGeometry, params: ModelParams) -> Result<Self> {
        Self::with_pins(geom, params, &[])
    }

    pub fn with_pins(
        geom: &ModelGeometry,
        params: ModelParams,
        pins: &[(usize, i8)],
    ) -> Result<Self> {
        Self::with_guards(geom, params, pins, Guards::default())
    }

    pub fn with_guards(
        geom: &ModelGeometry,
        params: ModelParams,
        pins: &[(usize, i8)],
        guards: Guards,
    ) -> Result<Self> {
        let (pins, _) = split_pins(geom, pins)?;
        let dos = density_of_states::<NoPred>(geom, &pins, &guards, None)?;
        let log_z = dos.log_sum(&params);
        Ok(ExactEnsemble {
            geom: geom.clone(),
            params,
            pins,
            guards,
            dos,
            log_z,
        })
    }

    /// The same ensemble at another inverse temperature, without re-enumerating.
    pub fn at_beta(&self, beta: f64) -> Self {
        let params = self.params.with_beta(beta);
        ExactEnsemble {
            log_z: self.dos.log_sum(&params),
            params,
            ..self.clone()
        }
    }

    /// The same ensemble with other couplings.
    pub fn with_params(&self, params: ModelParams) -> Self {
        ExactEnsemble {
            log_z: self.dos.log_sum(&params),
            params,
            ..self.clone()
        }
    }

    pub fn geom(&self) -> &ModelGeometry {
        &self.geom
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn pins(&self) -> &[(usize, i8)] {
        &self.pins
    }

    pub fn guards(&self) -> &Guards {
        &self.guards
    }

    pub fn log_z(&self) -> f64 {
        self.log_z
    }

    pub fn density_of_states(&self) -> &DensityOfStates {
        &self.dos
    }

    pub fn mean_energy(&self) -> f64 {
        self.dos.mean_energy(&self.params)
    }

    pub fn agrees_with_pins(&self, config: &SpinConfig) -> bool {
        self.pins.iter().all(|&(s, v)| config.get(s) == v)
    }

    /// `ln μ({σ})`; `-∞` when `σ` violates a pin.
    pub fn log_probability_of(&self, config: &SpinConfig) -> Result<f64> {
        let parts = crate::model::energy_parts(&self.geom, config)?;
        if !self.agrees_with_pins(config) {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(parts.log_weight(&self.params) - self.log_z)
    }

    /// `ln μ(E)` for an event given as a predicate.
    pub fn log_event_probability<P>(&self, pred: P) -> Result<f64>
    where
        P: Fn(&SpinConfig) -> bool + Sync,
    {
        let dos = density_of_states(&self.geom, &self.pins, &self.guards, Some(&pred))?;
        Ok(dos.log_sum(&self.params) - self.log_z)
    }

    /// `ln μ(σ(s) = v for all (s, v) in pins)`, enumerating only the spins
    /// left free by both the ensemble's and the extra pins.
    pub fn log_pinned_probability(&self, pins: &[(usize, i8)]) -> Result<f64> {
        let mut all = self.pins.clone();
        all.extend_from_slice(pins);
        let (all, _) = match split_pins(&self.geom, &all) {
            Ok(x) => x,
            Err(Error::InvalidParams(_)) => return Ok(f64::NEG_INFINITY),
            Err(e) => return Err(e),
        };
        let dos = density_of_states::<NoPred>(&self.geom, &all, &self.guards, None)?;
        Ok(dos.log_sum(&self.params) - self.log_z)
    }

    pub fn pinned_probability(&self, pins: &[(usize, i8)]) -> Result<f64> {
        Ok(self.log_pinned_probability(pins)?.exp())
    }

    /// Gibbs expectation of an observable. Chunk partial sums are added in a
    /// fixed order, so the result is reproducible.
    pub fn expectation<F>(&self, f: F) -> Result<f64>
    where
        F: Fn(&SpinConfig) -> f64 + Sync,
    {
        let (_, free) = split_pins(&self.geom, &self.pins)?;
        check_free(free.len(), &self.guards)?;
        let base = base_config(&self.geom, &self.pins);
        let params = self.params;
        let log_z = self.log_z;
        let partial = gray::par_fold(
            &self.geom,
            &free,
            &base,
            || 0.0f64,
            |acc, cfg, parts| *acc += f(cfg) * (parts.log_weight(&params) - log_z).exp(),
        );
        Ok(partial.iter().sum())
    }
}

/// `ln Z` by exhaustive enumeration of the spins not fixed by `pins`.
pub fn log_partition_enumerate(
    geom: &ModelGeometry,
    params: &ModelParams,
    pins: &[(usize, i8)],
) -> Result<f64> {
    let dos = density_of_states::<NoPred>(geom, pins, &Guards::default(), None)?;
    Ok(dos.log_sum(params))
}

/// `μ(E)` for an event given as a predicate over configurations.
pub fn event_probability<P>(ensemble: &ExactEnsemble, event: P) -> Result<f64>
where
    P: Fn(&SpinConfig) -> bool + Sync,
{
    Ok(ensemble.log_event_probability(event)?.exp())
}
