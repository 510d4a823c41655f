use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::stats::{estimate, Estimate};
use crate::contour::all_block_sites;
use crate::error::{Error, Result};
use crate::geometry::{ModelGeometry, Site, SpinConfig, RIGHT, UP};
use crate::model::{reference_configs, ModelParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Init {
    Plus,
    Minus,
    Cellboard,
    Random,
}

impl Init {
    pub const ALL: [Init; 4] = [Init::Plus, Init::Minus, Init::Cellboard, Init::Random];

    pub fn name(self) -> &'static str {
        match self {
            Init::Plus => "plus",
            Init::Minus => "minus",
            Init::Cellboard => "cellboard",
            Init::Random => "random",
        }
    }
}

/// Value of the frozen spins outside the box in open-box mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Plus,
    Minus,
}

impl Boundary {
    pub fn spin(self) -> i8 {
        match self {
            Boundary::Plus => 1,
            Boundary::Minus => -1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ChainSpec {
    pub geom: ModelGeometry,
    pub params: ModelParams,
    pub init: Init,
    pub sweeps: u64,
    pub burn_in: u64,
    pub thin: u64,
    pub seed: u64,
    /// Stream id; chains sharing a seed stay independent through it.
    pub chain: u64,
    pub pinned: Vec<(Site, i8)>,
    /// `Some` switches to open-box mode: the torus becomes a box whose
    /// outside neighbours are frozen to this value.
    pub boundary: Option<Boundary>,
    /// Sites whose spins are recorded in every sample.
    pub observe: Vec<Site>,
}

impl ChainSpec {
    pub fn new(geom: ModelGeometry, params: ModelParams) -> Self {
        ChainSpec {
            geom,
            params,
            init: Init::Plus,
            sweeps: 10_000,
            burn_in: 1_000,
            thin: 1,
            seed: 0,
            chain: 0,
            pinned: Vec::new(),
            boundary: None,
            observe: Vec::new(),
        }
    }

    pub fn init(mut self, init: Init) -> Self {
        self.init = init;
        self
    }

    pub fn sweeps(mut self, sweeps: u64, burn_in: u64, thin: u64) -> Self {
        self.sweeps = sweeps;
        self.burn_in = burn_in;
        self.thin = thin;
        self
    }

    pub fn seed(mut self, seed: u64, chain: u64) -> Self {
        self.seed = seed;
        self.chain = chain;
        self
    }

    pub fn pin(mut self, site: Site, spin: i8) -> Self {
        self.pinned.push((site, spin));
        self
    }

    pub fn boundary(mut self, boundary: Option<Boundary>) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn observe(mut self, sites: impl IntoIterator<Item = Site>) -> Self {
        self.observe = sites.into_iter().collect();
        self
    }

    /// Number of recorded samples.
    pub fn samples(&self) -> usize {
        ((self.sweeps.saturating_sub(self.burn_in)) / self.thin.max(1)) as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.sweeps <= self.burn_in {
            return Err(Error::InvalidChain(format!(
                "sweeps ({}) must exceed burn-in ({})",
                self.sweeps, self.burn_in
            )));
        }
        if self.thin == 0 {
            return Err(Error::InvalidChain("thin must be at least 1".into()));
        }
        if self.chain >= 1 << 63 {
            return Err(Error::InvalidChain("chain id must be below 2^63".into()));
        }
        let mut seen: Vec<usize> = Vec::new();
        for &(site, spin) in &self.pinned {
            if spin != 1 && spin != -1 {
                return Err(Error::InvalidChain(format!(
                    "pinned spin {spin} at {site:?}"
                )));
            }
            let i = self.geom.checked_index(site)?;
            if seen.contains(&i) {
                return Err(Error::InvalidChain(format!("site {site:?} pinned twice")));
            }
            seen.push(i);
        }
        if seen.len() == self.geom.num_sites() {
            return Err(Error::InvalidChain("every site is pinned".into()));
        }
        for &site in &self.observe {
            self.geom.checked_index(site)?;
        }
        Ok(())
    }
}

/// Per-sample observables of one chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservableTrace {
    pub sweep: Vec<u64>,
    pub m: Vec<f64>,
    pub energy: Vec<f64>,
    pub bad_fraction: Vec<f64>,
    pub observed: Vec<Site>,
    /// `spins[k][i]`: spin of `observed[k]` in sample `i`.
    pub spins: Vec<Vec<i8>>,
    pub acceptance: f64,
    pub final_config: Vec<i8>,
}

impl ObservableTrace {
    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    pub fn magnetization(&self) -> Estimate {
        estimate(&self.m)
    }

    pub fn abs_magnetization(&self) -> Estimate {
        estimate(&self.m.iter().map(|m| m.abs()).collect::<Vec<_>>())
    }

    pub fn mean_energy(&self) -> Estimate {
        estimate(&self.energy)
    }

    /// Estimate of `P(σ(observed[k]) = spin)`.
    pub fn site_probability(&self, k: usize, spin: i8) -> Estimate {
        let xs: Vec<f64> = self.spins[k]
            .iter()
            .map(|&s| if s == spin { 1.0 } else { 0.0 })
            .collect();
        estimate(&xs)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("sweep,m,H,bad_fraction\n");
        for i in 0..self.len() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                self.sweep[i], self.m[i], self.energy[i], self.bad_fraction[i]
            ));
        }
        out
    }

    /// Whitespace-delimited columns for gnuplot.
    pub fn to_gnuplot(&self) -> String {
        let mut out = String::from("# sweep m H bad_fraction\n");
        for i in 0..self.len() {
            out.push_str(&format!(
                "{} {} {} {}\n",
                self.sweep[i], self.m[i], self.energy[i], self.bad_fraction[i]
            ));
        }
        out
    }
}

const OUTSIDE: u32 = u32::MAX;

/// The per-sweep generator. Each sweep draws exactly one `u64` per site in
/// raster order (pinned sites included), so the draw for `(sweep, site)` sits
/// at word `2 (sweep · n + site)` of the stream `(seed, chain)`.
pub fn sweep_rng(seed: u64, chain: u64, sweep: u64, sites: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain);
    rng.set_word_pos(2 * sweep as u128 * sites as u128);
    rng
}

fn initial_spins(spec: &ChainSpec) -> Vec<i8> {
    let g = &spec.geom;
    let refs = reference_configs(g);
    let cfg: SpinConfig = match spec.init {
        Init::Plus => refs.plus,
        Init::Minus => refs.minus,
        Init::Cellboard => refs.cell,
        Init::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(spec.chain | 1 << 63);
            SpinConfig::from_fn(
                g.num_sites(),
                |_| if rng.next_u32() & 1 == 1 { 1 } else { -1 },
            )
        }
    };
    let mut spins = cfg.spins();
    for &(site, spin) in &spec.pinned {
        spins[g.index(site)] = spin;
    }
    spins
}

fn neighbour_table(geom: &ModelGeometry, open_box: bool) -> Vec<[u32; 4]> {
    (0..geom.num_sites())
        .map(|i| {
            let mut nb = *geom.neighbors(i);
            if open_box {
                let s = geom.site(i);
                let (w, h) = geom.dims();
                let inside = [s.t1 + 1 < w, s.t2 + 1 < h, s.t1 > 0, s.t2 > 0];
                for (slot, ok) in inside.into_iter().enumerate() {
                    if !ok {
                        nb[slot] = OUTSIDE;
                    }
                }
            }
            nb
        })
        .collect()
}

/// Metropolis acceptance probability `min(1, e^{-βΔH})` for
/// `ΔH = 2Jσ·Σnbr + 2hσf`, indexed by `σ·Σnbr + 4` and `(σf + 1) / 2`.
fn acceptance_table(params: &ModelParams) -> [[f64; 2]; 9] {
    let mut t = [[1.0; 2]; 9];
    for (a, row) in t.iter_mut().enumerate() {
        for (b, p) in row.iter_mut().enumerate() {
            let dh = 2.0 * params.j * (a as f64 - 4.0) + 2.0 * params.h * (2.0 * b as f64 - 1.0);
            if dh > 0.0 {
                *p = (-params.beta * dh).exp();
            }
        }
    }
    t
}

/// `u < p` for the 53-bit uniform built from `u`.
fn accept(u: u64, p: f64) -> bool {
    p >= 1.0 || ((u >> 11) as f64) * (1.0 / (1u64 << 53) as f64) < p
}

fn bad_fraction(blocks: &[Vec<usize>], spins: &[i8]) -> f64 {
    let bad = blocks
        .iter()
        .filter(|b| b.iter().any(|&s| spins[s] != spins[b[0]]))
        .count();
    bad as f64 / blocks.len() as f64
}

/// Single-site Metropolis with a fixed raster sweep.
pub fn run_chain(spec: &ChainSpec) -> Result<ObservableTrace> {
    spec.validate()?;
    let g = &spec.geom;
    let n = g.num_sites();
    let omega = spec.boundary.map(Boundary::spin).unwrap_or(0);
    let nbr = neighbour_table(g, spec.boundary.is_some());
    let field = g.field_signs();
    let mut frozen = vec![false; n];
    for &(site, _) in &spec.pinned {
        frozen[g.index(site)] = true;
    }
    let table = acceptance_table(&spec.params);
    let blocks = all_block_sites(g);
    let observed: Vec<usize> = spec.observe.iter().map(|&s| g.index(s)).collect();

    let mut spins = initial_spins(spec);
    let spin_of = |spins: &[i8], j: u32| {
        if j == OUTSIDE {
            omega
        } else {
            spins[j as usize]
        }
    };
    // Bond sum over right/up bonds plus every outside bond, and field sum.
    let mut bonds: i64 = 0;
    let mut fsum: i64 = 0;
    for i in 0..n {
        let s = spins[i] as i64;
        fsum += s * field[i] as i64;
        for (slot, &j) in nbr[i].iter().enumerate() {
            if j == OUTSIDE {
                bonds += s * omega as i64;
            } else if slot == RIGHT || slot == UP {
                bonds += s * spins[j as usize] as i64;
            }
        }
    }

    let samples = spec.samples();
    let mut trace = ObservableTrace {
        sweep: Vec::with_capacity(samples),
        m: Vec::with_capacity(samples),
        energy: Vec::with_capacity(samples),
        bad_fraction: Vec::with_capacity(samples),
        observed: spec.observe.clone(),
        spins: vec![Vec::with_capacity(samples); observed.len()],
        acceptance: 0.0,
        final_config: Vec::new(),
    };
    let mut rng = sweep_rng(spec.seed, spec.chain, 0, n);
    let mut accepted: u64 = 0;
    let mut attempted: u64 = 0;
    let (j, h) = (spec.params.j, spec.params.h);
    for sweep in 1..=spec.sweeps {
        for i in 0..n {
            let u = rng.next_u64();
            if frozen[i] {
                continue;
            }
            let s = spins[i];
            let local: i32 = nbr[i].iter().map(|&k| spin_of(&spins, k) as i32).sum();
            let sf = s * field[i];
            let p = table[(s as i32 * local + 4) as usize][((sf + 1) / 2) as usize];
            attempted += 1;
            if accept(u, p) {
                spins[i] = -s;
                bonds -= 2 * (s as i32 * local) as i64;
                fsum -= 2 * sf as i64;
                accepted += 1;
            }
        }
        if sweep > spec.burn_in && (sweep - spec.burn_in) % spec.thin == 0 {
            let total: i64 = spins.iter().map(|&s| s as i64).sum();
            trace.sweep.push(sweep);
            trace.m.push(total as f64 / n as f64);
            trace.energy.push(-j * bonds as f64 - h * fsum as f64);
            trace.bad_fraction.push(bad_fraction(&blocks, &spins));
            for (k, &i) in observed.iter().enumerate() {
                trace.spins[k].push(spins[i]);
            }
        }
    }
    trace.acceptance = accepted as f64 / attempted.max(1) as f64;
    trace.final_config = spins;
    Ok(trace)
}

/// Energy of a configuration in open-box mode with outside value `omega`.
pub fn open_box_energy(
    geom: &ModelGeometry,
    params: &ModelParams,
    config: &SpinConfig,
    omega: Boundary,
) -> Result<f64> {
    geom.check_config(config)?;
    let nbr = neighbour_table(geom, true);
    let w = omega.spin() as i64;
    let mut bonds = 0i64;
    let mut fsum = 0i64;
    for i in 0..geom.num_sites() {
        let s = config.get(i) as i64;
        fsum += s * geom.field_at(i) as i64;
        for (slot, &j) in nbr[i].iter().enumerate() {
            if j == OUTSIDE {
                bonds += s * w;
            } else if slot == RIGHT || slot == UP {
                bonds += s * config.get(j as usize) as i64;
            }
        }
    }
    Ok(-params.j * bonds as f64 - params.h * fsum as f64)
}
