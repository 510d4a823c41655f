mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use cellboard::battery::{self, BatteryConfig};
use cellboard::contour::verify_lemma_hb;
use cellboard::exact::{
    log_partition_enumerate, log_partition_transfer, random_chessboard_assignment,
    verify_chessboard, verify_lemma_per_many, verify_prop2, verify_prop2_transfer, verify_rp_all,
    ExactEnsemble, Guards,
};
use cellboard::geometry::{Axis, ModelGeometry, Site, SpinConfig};
use cellboard::mc::{coexistence_scan, run_chain, ChainSpec, Init, ScanPoint, ScanSettings};
use cellboard::model::{theory_constants, DEFAULT_C};
use cellboard::report::{reports_to_csv, VerificationReport};
use cellboard::variants::{verify_corollary1, verify_strip_model, StripBattery};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use config::{ModelKind, PinSpec, RunConfig};
use output::{manifest, write_atomic, write_json};

// Like `println!`, but a closed stdout (e.g. piping into `head`) is not fatal.
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout().lock(), $($arg)*);
    }};
}

#[derive(Parser)]
#[command(
    name = "cellboard",
    version,
    about = "Cell-board Ising model: exact certification and Monte Carlo"
)]
struct Cli {
    /// Worker threads (default: logical cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one verification check.
    Verify {
        check: Check,
        #[command(flatten)]
        common: Common,
    },
    /// Run the whole certification battery.
    RunAll {
        #[command(flatten)]
        common: Common,
    },
    /// Metropolis runs.
    Mc {
        #[command(subcommand)]
        command: McCommand,
    },
    /// Geometry inspection.
    Geometry {
        #[command(subcommand)]
        command: GeometryCommand,
    },
}

#[derive(Subcommand)]
enum McCommand {
    /// One chain; writes its trace.
    Run {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        mc: McArgs,
    },
    /// Plus/minus/random chains over a (beta, h) grid.
    Scan {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        mc: McArgs,
        /// Field values of the grid (comma separated).
        #[arg(long, value_delimiter = ',')]
        hs: Option<Vec<f64>>,
    },
}

#[derive(Subcommand)]
enum GeometryCommand {
    /// Print the torus, its field and its reflection planes.
    Dump {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Check {
    Oracle,
    Rp,
    Chessboard,
    Prop2,
    LemmaPer,
    LemmaHb,
    Corollary1,
    GroundStates,
    Strip,
    TwoPoint,
}

impl Check {
    fn name(self) -> String {
        self.to_possible_value()
            .expect("no skipped variants")
            .get_name()
            .to_string()
    }
}

#[derive(Args, Clone, Default)]
struct Common {
    /// JSON configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    kind: Option<ModelKind>,
    #[arg(long = "L1")]
    l1: Option<usize>,
    #[arg(long = "L2")]
    l2: Option<usize>,
    /// Strip height.
    #[arg(long = "L")]
    l: Option<usize>,
    /// Cells per torus side.
    #[arg(long = "N")]
    n: Option<usize>,
    #[arg(long = "J")]
    j: Option<f64>,
    #[arg(long = "h")]
    h: Option<f64>,
    /// Inverse temperature(s), comma separated.
    #[arg(long, value_delimiter = ',')]
    beta: Option<Vec<f64>>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides CELLBOARD_OUT_DIR).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Enable slow-tier checks.
    #[arg(long)]
    slow: bool,
    /// Random assignments per beta for the chessboard check.
    #[arg(long)]
    samples: Option<usize>,
    /// Strip constant k in beta0 = k / (2J - hL).
    #[arg(long)]
    k: Option<f64>,
    #[arg(long)]
    max_free_spins: Option<usize>,
}

#[derive(Args, Clone, Default)]
struct McArgs {
    #[arg(long, value_enum)]
    init: Option<InitArg>,
    #[arg(long)]
    sweeps: Option<u64>,
    #[arg(long)]
    burn_in: Option<u64>,
    #[arg(long)]
    thin: Option<u64>,
    #[arg(long)]
    chain: Option<u64>,
    /// Open-box mode with this outside value.
    #[arg(long, value_enum)]
    boundary: Option<BoundaryArg>,
    /// Pinned spin `t1,t2,spin`; repeatable.
    #[arg(long, value_parser = PinSpec::parse, allow_hyphen_values = true)]
    pin: Vec<PinSpec>,
    /// Also write a whitespace-delimited trace.
    #[arg(long)]
    gnuplot: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum InitArg {
    Plus,
    Minus,
    Cellboard,
    Random,
}

#[derive(Clone, Copy, ValueEnum)]
enum BoundaryArg {
    Plus,
    Minus,
}

/// Configuration problems and guard violations; exit code 2.
#[derive(Debug)]
struct ConfigError(String);

impl From<cellboard::Error> for ConfigError {
    fn from(e: cellboard::Error) -> Self {
        ConfigError(e.to_string())
    }
}

impl From<std::io::Error> for ConfigError {
    fn from(e: std::io::Error) -> Self {
        ConfigError(format!("i/o: {e}"))
    }
}

type CliResult<T> = Result<T, ConfigError>;

fn effective_config(common: &Common, threads: Option<usize>) -> CliResult<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p).map_err(ConfigError)?,
        None => RunConfig::default(),
    };
    let m = &mut cfg.model;
    if let Some(k) = common.kind {
        m.kind = k;
    }
    m.l1 = common.l1.unwrap_or(m.l1);
    m.l2 = common.l2.unwrap_or(m.l2);
    m.l = common.l.unwrap_or(m.l);
    m.n = common.n.or(m.n);
    let p = &mut cfg.params;
    p.j = common.j.unwrap_or(p.j);
    p.h = common.h.unwrap_or(p.h);
    if let Some(b) = &common.beta {
        p.beta = b.clone();
    }
    if p.beta.is_empty() {
        return Err(ConfigError("at least one beta is required".into()));
    }
    cfg.seed = common.seed.unwrap_or(cfg.seed);
    cfg.slow |= common.slow;
    cfg.samples = common.samples.unwrap_or(cfg.samples);
    cfg.strip_k = common.k.or(cfg.strip_k);
    cfg.threads = threads.or(cfg.threads);
    if let Some(f) = common.max_free_spins {
        cfg.guards.max_free_spins = f;
    }
    cfg.out = Some(cfg.out_dir(common.out.as_deref()));
    cfg.params.all()?;
    Ok(cfg)
}

fn apply_mc(cfg: &mut RunConfig, mc: &McArgs) {
    let s = &mut cfg.mc;
    if let Some(i) = mc.init {
        s.init = match i {
            InitArg::Plus => Init::Plus,
            InitArg::Minus => Init::Minus,
            InitArg::Cellboard => Init::Cellboard,
            InitArg::Random => Init::Random,
        };
    }
    s.sweeps = mc.sweeps.unwrap_or(s.sweeps);
    s.burn_in = mc.burn_in.unwrap_or(s.burn_in);
    s.thin = mc.thin.unwrap_or(s.thin);
    s.chain = mc.chain.unwrap_or(s.chain);
    if let Some(b) = mc.boundary {
        s.boundary = Some(match b {
            BoundaryArg::Plus => cellboard::mc::Boundary::Plus,
            BoundaryArg::Minus => cellboard::mc::Boundary::Minus,
        });
    }
    if !mc.pin.is_empty() {
        s.pins = mc.pin.clone();
    }
    s.gnuplot |= mc.gnuplot;
}

fn out_dir(cfg: &RunConfig) -> PathBuf {
    cfg.out
        .clone()
        .unwrap_or_else(|| PathBuf::from("cellboard-out"))
}

fn num(x: f64) -> String {
    if x != 0.0 && x.is_finite() && !(1e-4..1e7).contains(&x.abs()) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

fn print_reports(reports: &[VerificationReport]) {
    for r in reports {
        let verdict = match r.verdict {
            cellboard::report::Verdict::Pass => "pass",
            cellboard::report::Verdict::Fail => "FAIL",
            cellboard::report::Verdict::Vacuous => "vacuous",
        };
        let relation = serde_json::to_value(r.relation).unwrap_or_default();
        let mut line = format!(
            "{verdict:<8} {:<28} {:<11} lhs = {} {} rhs = {}",
            r.check,
            r.kind,
            num(r.lhs),
            relation.as_str().unwrap_or("?"),
            num(r.rhs)
        );
        if let Some(plane) = r.inputs.get("plane").and_then(|p| p.as_str()) {
            line.push_str(&format!("  [{plane}]"));
        }
        say!("{line}");
    }
}

fn emit_reports(
    name: &str,
    cfg: &RunConfig,
    reports: &[VerificationReport],
    extra: serde_json::Value,
) -> CliResult<bool> {
    print_reports(reports);
    let passed = reports.iter().all(VerificationReport::passed);
    let dir = out_dir(cfg);
    let doc = manifest(
        name,
        cfg,
        json!({ "passed": passed, "reports": reports, "extra": extra }),
    );
    let json_path = write_json(&dir, &format!("{name}.json"), &doc)?;
    write_atomic(
        &dir,
        &format!("{name}.csv"),
        reports_to_csv(reports).as_bytes(),
    )?;
    eprintln!("wrote {}", json_path.display());
    Ok(passed)
}

fn ensemble(geom: &ModelGeometry, cfg: &RunConfig, beta: f64) -> CliResult<ExactEnsemble> {
    Ok(ExactEnsemble::with_guards(
        geom,
        cfg.params.at(beta)?,
        &[],
        cfg.guards,
    )?)
}

fn run_check(
    check: Check,
    cfg: &RunConfig,
) -> CliResult<(Vec<VerificationReport>, serde_json::Value)> {
    let geom = cfg.model.geometry()?;
    let mut reports = Vec::new();
    let mut extra = json!({});
    match check {
        Check::Oracle => {
            for p in cfg.params.all()? {
                let a = log_partition_enumerate(&geom, &p, &[])?;
                let b = log_partition_transfer(&geom, &p)?;
                reports.push(
                    VerificationReport::equal("oracle", a, b, 1e-10).with_model(&geom, Some(&p)),
                );
            }
        }
        Check::Rp => {
            for &beta in &cfg.params.beta {
                reports.extend(verify_rp_all(&ensemble(&geom, cfg, beta)?)?);
            }
        }
        Check::Chessboard => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            for &beta in &cfg.params.beta {
                let ens = ensemble(&geom, cfg, beta)?;
                for i in 0..cfg.samples {
                    let density = rng.random_range(0.1..0.9);
                    let a = random_chessboard_assignment(&geom, density, &mut rng)?;
                    reports.push(verify_chessboard(&ens, &a)?.with_input("sample", i));
                }
            }
        }
        Check::Prop2 => {
            for p in cfg.params.all()? {
                if geom.num_sites() <= cfg.guards.max_free_spins {
                    reports.extend(verify_prop2(&ensemble(&geom, cfg, p.beta)?)?);
                } else {
                    let exact = cfg.slow.then(|| Guards {
                        max_free_spins: cfg.guards.max_free_spins.max(32),
                        ..cfg.guards
                    });
                    reports.extend(verify_prop2_transfer(&geom, &p, exact)?);
                }
            }
        }
        Check::LemmaPer => {
            let size = geom.block_size();
            let configs: Vec<SpinConfig> = if size <= 12 {
                (0..1u64 << size)
                    .map(|b| SpinConfig::from_bits(size, b))
                    .collect()
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                (0..100)
                    .map(|_| {
                        SpinConfig::from_fn(size, |_| if rng.random::<bool>() { 1 } else { -1 })
                    })
                    .collect()
            };
            for p in cfg.params.all()? {
                reports.push(verify_lemma_per_many(&geom, &p, configs.iter().cloned())?);
            }
        }
        Check::LemmaHb => {
            let sub = geom.sub_torus_2x2();
            let p = cfg.params.at(cfg.params.beta[0])?;
            reports.push(verify_lemma_hb(&sub, &p)?);
        }
        Check::Corollary1 => {
            reports.push(verify_corollary1(
                &geom,
                &cfg.params.at(cfg.params.beta[0])?,
            )?);
        }
        Check::GroundStates => {
            let p = cfg.params.at(cfg.params.beta[0])?;
            reports.push(battery::verify_ground_states(&geom.sub_torus_2x2(), &p)?);
        }
        Check::Strip => {
            let battery = StripBattery {
                chessboard_samples: cfg.samples,
                seed: cfg.seed,
                guards: cfg.guards,
            };
            for p in cfg.params.all()? {
                reports.extend(verify_strip_model(&geom, &p, &battery)?);
            }
        }
        Check::TwoPoint => {
            let t = Site::new(geom.extent(Axis::First) / 2, 0);
            reports.extend(battery::verify_two_point(
                &geom,
                cfg.params.j,
                cfg.params.h,
                &cfg.params.beta,
                Site::new(0, 0),
                t,
            )?);
        }
    }
    let p = cfg.params.at(cfg.params.beta[0])?;
    let mut theory = theory_constants(cfg.model.pattern(), &p, DEFAULT_C);
    if let Some(k) = cfg.strip_k {
        theory = theory.with_strip_k(k);
    }
    extra["theory"] = serde_json::to_value(theory).unwrap_or_default();
    Ok((reports, extra))
}

fn run_all(cfg: &RunConfig) -> CliResult<bool> {
    let battery_cfg = BatteryConfig {
        seed: cfg.seed,
        slow: cfg.slow,
        chessboard_samples: cfg.samples,
        ..BatteryConfig::default()
    };
    let mut criteria = Vec::new();
    for (id, _, _) in battery::CRITERIA {
        let outcome = battery::run_criterion(id, &battery_cfg);
        say!("{}", outcome.line());
        criteria.push(outcome);
    }
    let summary = battery::BatterySummary {
        config: battery_cfg,
        criteria,
    };
    let dir = out_dir(cfg);
    let doc = manifest(
        "run-all",
        cfg,
        serde_json::to_value(&summary).unwrap_or_default(),
    );
    let path = write_json(&dir, "run-all.json", &doc)?;
    write_atomic(&dir, "run-all.csv", summary.to_csv().as_bytes())?;
    eprintln!("wrote {}", path.display());
    Ok(summary.passed())
}

fn mc_run(cfg: &RunConfig) -> CliResult<()> {
    let geom = cfg.model.geometry()?;
    let params = cfg.params.at(cfg.params.beta[0])?;
    let m = &cfg.mc;
    let mut spec = ChainSpec::new(geom, params)
        .init(m.init)
        .sweeps(m.sweeps, m.burn_in, m.thin)
        .seed(cfg.seed, m.chain)
        .boundary(m.boundary);
    spec.pinned = m.pins.iter().map(|p| (p.site(), p.spin)).collect();
    let trace = run_chain(&spec)?;
    let (mag, abs_m, energy) = (
        trace.magnetization(),
        trace.abs_magnetization(),
        trace.mean_energy(),
    );
    say!("samples    {}", trace.len());
    say!("acceptance {}", trace.acceptance);
    say!(
        "<m>        {} +- {} (tau {})",
        mag.mean,
        mag.std_error,
        mag.tau
    );
    say!("<|m|>      {} +- {}", abs_m.mean, abs_m.std_error);
    say!(
        "<H>        {} +- {} (tau {})",
        energy.mean,
        energy.std_error,
        energy.tau
    );
    let dir = out_dir(cfg);
    write_atomic(&dir, "mc-run-trace.csv", trace.to_csv().as_bytes())?;
    if m.gnuplot {
        write_atomic(&dir, "mc-run-trace.dat", trace.to_gnuplot().as_bytes())?;
    }
    let doc = manifest(
        "mc run",
        cfg,
        json!({
            "chain": m.chain,
            "samples": trace.len(),
            "acceptance": trace.acceptance,
            "m": mag,
            "abs_m": abs_m,
            "energy": energy,
        }),
    );
    let path = write_json(&dir, "mc-run.json", &doc)?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn mc_scan(cfg: &RunConfig) -> CliResult<()> {
    let geom = cfg.model.geometry()?;
    let hs = if cfg.scan.hs.is_empty() {
        vec![cfg.params.h]
    } else {
        cfg.scan.hs.clone()
    };
    let grid: Vec<ScanPoint> = cfg
        .params
        .beta
        .iter()
        .flat_map(|&beta| hs.iter().map(move |&h| ScanPoint { beta, h }))
        .collect();
    let defaults = ScanSettings::default();
    let settings = ScanSettings {
        j: cfg.params.j,
        inits: if cfg.scan.inits.is_empty() {
            defaults.inits
        } else {
            cfg.scan.inits.clone()
        },
        sweeps: cfg.mc.sweeps,
        burn_in: cfg.mc.burn_in,
        thin: cfg.mc.thin,
        seed: cfg.seed,
    };
    let table = coexistence_scan(&geom, &grid, &settings)?;
    for r in &table.rows {
        say!(
            "beta {:<6} h {:<6} {:<9} <m> {:>9.5} +- {:.5}  dip {:.3}{}",
            r.beta,
            r.h,
            r.init.name(),
            r.m.mean,
            r.m.std_error,
            r.dip,
            if r.bimodal { "  bimodal" } else { "" }
        );
    }
    let dir = out_dir(cfg);
    write_atomic(&dir, "mc-scan.csv", table.to_csv().as_bytes())?;
    let seeds: Vec<_> = table
        .rows
        .iter()
        .map(|r| json!({ "seed": cfg.seed, "chain": r.chain }))
        .collect();
    let doc = manifest(
        "mc scan",
        cfg,
        json!({ "seeds": seeds, "rows": table.rows }),
    );
    let path = write_json(&dir, "mc-scan.json", &doc)?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn geometry_dump(cfg: &RunConfig) -> CliResult<()> {
    let geom = cfg.model.geometry()?;
    let (w, h) = geom.dims();
    let rows: Vec<String> = (0..h)
        .rev()
        .map(|t2| {
            (0..w)
                .map(|t1| {
                    if geom.field_at(geom.index(Site::new(t1, t2))) > 0 {
                        '+'
                    } else {
                        '-'
                    }
                })
                .collect()
        })
        .collect();
    for r in &rows {
        say!("{r}");
    }
    let planes: Vec<String> = geom.planes().iter().map(|p| p.to_string()).collect();
    let p = cfg.params.at(cfg.params.beta[0])?;
    let mut theory = theory_constants(cfg.model.pattern(), &p, DEFAULT_C);
    if let Some(k) = cfg.strip_k {
        theory = theory.with_strip_k(k);
    }
    let doc = manifest(
        "geometry dump",
        cfg,
        json!({
            "geometry": geom.describe(),
            "sites": geom.num_sites(),
            "bonds": geom.num_bonds(),
            "block_size": geom.block_size(),
            "field_rows_top_down": rows,
            "planes": planes,
            "theory": theory,
        }),
    );
    say!(
        "{}",
        serde_json::to_string_pretty(&doc["result"]).unwrap_or_default()
    );
    write_json(&out_dir(cfg), "geometry.json", &doc)?;
    Ok(())
}

fn setup_threads(cfg: &RunConfig) -> CliResult<()> {
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| ConfigError(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn dispatch(cli: Cli) -> CliResult<bool> {
    let threads = cli.threads;
    let prepare = |common: &Common| -> CliResult<RunConfig> {
        let cfg = effective_config(common, threads)?;
        setup_threads(&cfg)?;
        Ok(cfg)
    };
    match cli.command {
        Command::Verify { check, common } => {
            let cfg = prepare(&common)?;
            let (reports, extra) = run_check(check, &cfg)?;
            emit_reports(&format!("verify-{}", check.name()), &cfg, &reports, extra)
        }
        Command::RunAll { common } => run_all(&prepare(&common)?),
        Command::Mc { command } => match command {
            McCommand::Run { common, mc } => {
                let mut cfg = effective_config(&common, threads)?;
                apply_mc(&mut cfg, &mc);
                setup_threads(&cfg)?;
                mc_run(&cfg)?;
                Ok(true)
            }
            McCommand::Scan { common, mc, hs } => {
                let mut cfg = effective_config(&common, threads)?;
                apply_mc(&mut cfg, &mc);
                if let Some(hs) = hs {
                    cfg.scan.hs = hs;
                }
                setup_threads(&cfg)?;
                mc_scan(&cfg)?;
                Ok(true)
            }
        },
        Command::Geometry {
            command: GeometryCommand::Dump { common },
        } => {
            geometry_dump(&prepare(&common)?)?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(ConfigError(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
