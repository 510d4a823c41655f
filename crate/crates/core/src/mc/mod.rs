//! Metropolis Monte Carlo on tori too large to enumerate: plain and pinned
//! chains, open-box chains with `±` boundary conditions, and the coexistence
//! scan.
//!
//! Chains are reproducible bit for bit: the random draw of site `i` in sweep
//! `k` depends only on `(seed, chain, k, i)`.

mod chain;
mod scan;
pub mod stats;

pub use chain::{
    open_box_energy, run_chain, sweep_rng, Boundary, ChainSpec, Init, ObservableTrace,
};
pub use scan::{
    antipodal_partner, coexistence_scan, conditional_measures, ConditionalEstimate, ScanPoint,
    ScanRow, ScanSettings, ScanTable, BIMODAL_DIP, HISTOGRAM_BINS,
};
pub use stats::{estimate, magnetization_histogram, Estimate};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::ExactEnsemble;
    use crate::geometry::{FieldPattern, ModelGeometry, Site, SpinConfig};
    use crate::model::{energy, ModelParams};
    use rand::RngCore;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn two_by_four() -> ModelGeometry {
        ModelGeometry::new(FieldPattern::CellBoard { l1: 1, l2: 1 }, 2, 4).unwrap()
    }

    fn params(beta: f64) -> ModelParams {
        ModelParams::new(1.0, 1.0, beta).unwrap()
    }

    #[test]
    fn identical_specs_give_identical_traces() {
        let g = ModelGeometry::cell_board(1, 1, 4).unwrap();
        let spec = ChainSpec::new(g, params(0.7))
            .init(Init::Random)
            .sweeps(2000, 100, 3)
            .seed(42, 5)
            .observe([Site::new(1, 2)]);
        let a = run_chain(&spec).unwrap();
        let b = run_chain(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), (2000 - 100) / 3);
        let c = run_chain(&spec.clone().seed(42, 6)).unwrap();
        assert_ne!(a.m, c.m);
    }

    #[test]
    fn rng_is_keyed_by_sweep() {
        let n = 16;
        let mut seq = sweep_rng(7, 3, 0, n);
        let mut draws = Vec::new();
        for _ in 0..5 * n {
            draws.push(seq.next_u64());
        }
        let mut jump = sweep_rng(7, 3, 4, n);
        assert_eq!(jump.next_u64(), draws[4 * n]);
    }

    #[test]
    fn spec_validation() {
        let g = ModelGeometry::cell_board(1, 1, 2).unwrap();
        let base = ChainSpec::new(g, params(1.0));
        assert!(base.clone().sweeps(10, 10, 1).validate().is_err());
        assert!(base.clone().sweeps(10, 1, 0).validate().is_err());
        assert!(base.clone().pin(Site::new(5, 0), 1).validate().is_err());
        assert!(base.clone().pin(Site::new(0, 0), 0).validate().is_err());
        assert!(base
            .clone()
            .pin(Site::new(0, 0), 1)
            .pin(Site::new(0, 0), -1)
            .validate()
            .is_err());
        assert!(base.pin(Site::new(0, 0), 1).validate().is_ok());
    }

    #[test]
    fn infinite_temperature_is_balanced() {
        let g = ModelGeometry::cell_board(1, 1, 4).unwrap();
        let t = run_chain(
            &ChainSpec::new(g, params(0.0))
                .sweeps(20_000, 100, 1)
                .seed(1, 0),
        )
        .unwrap();
        let m = t.magnetization();
        assert!(m.z_score(0.0) < 3.0, "{m:?}");
        assert_eq!(t.acceptance, 1.0);
    }

    #[test]
    fn downhill_moves_always_accepted() {
        // One minus spin in a plus sea at h = 0: flipping it lowers H, so
        // even β = 50 takes it on the first sweep.
        let g = ModelGeometry::cell_board(1, 1, 4).unwrap();
        let p = ModelParams::new(1.0, 0.0, 50.0).unwrap();
        let mut spec = ChainSpec::new(g.clone(), p)
            .init(Init::Plus)
            .sweeps(1, 0, 1);
        spec.pinned = vec![(Site::new(0, 0), 1)];
        let t = run_chain(&spec).unwrap();
        assert!(t.final_config.iter().all(|&s| s == 1));
        assert_eq!(t.acceptance, 0.0);
        let mut spec = ChainSpec::new(g, p).init(Init::Minus).sweeps(1, 0, 1);
        spec.pinned = (1..16).map(|i| (Site::new(i % 4, i / 4), 1)).collect();
        let t = run_chain(&spec).unwrap();
        assert_eq!(t.final_config[0], 1);
    }

    #[test]
    fn tracked_energy_matches_recomputation() {
        let g = ModelGeometry::cell_board(2, 1, 4).unwrap();
        let p = params(0.4);
        let t = run_chain(
            &ChainSpec::new(g.clone(), p)
                .init(Init::Random)
                .sweeps(50, 49, 1)
                .seed(3, 0),
        )
        .unwrap();
        let cfg = SpinConfig::from_spins(&t.final_config);
        assert!((t.energy[0] - energy(&g, &p, &cfg).unwrap()).abs() < 1e-9);
        for omega in [Boundary::Plus, Boundary::Minus] {
            let t = run_chain(
                &ChainSpec::new(g.clone(), p)
                    .init(Init::Random)
                    .sweeps(50, 49, 1)
                    .seed(3, 1)
                    .boundary(Some(omega)),
            )
            .unwrap();
            let cfg = SpinConfig::from_spins(&t.final_config);
            assert!((t.energy[0] - open_box_energy(&g, &p, &cfg, omega).unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn open_box_energy_values() {
        // 4x4 box of plus spins: 24 inner bonds, 16 outside bonds.
        let g = ModelGeometry::cell_board(1, 1, 4).unwrap();
        let p = ModelParams::new(1.0, 0.0, 1.0).unwrap();
        let plus = SpinConfig::uniform(16, 1);
        assert_eq!(
            open_box_energy(&g, &p, &plus, Boundary::Plus).unwrap(),
            -40.0
        );
        assert_eq!(
            open_box_energy(&g, &p, &plus, Boundary::Minus).unwrap(),
            -8.0
        );
    }

    #[test]
    fn plus_boundary_biases_magnetization() {
        let g = ModelGeometry::cell_board(1, 1, 8).unwrap();
        let spec = ChainSpec::new(g, params(1.0))
            .init(Init::Random)
            .sweeps(4000, 500, 1);
        let plus = run_chain(&spec.clone().seed(2, 0).boundary(Some(Boundary::Plus))).unwrap();
        let minus = run_chain(&spec.seed(2, 1).boundary(Some(Boundary::Minus))).unwrap();
        assert!(plus.magnetization().mean > 0.5);
        assert!(minus.magnetization().mean < -0.5);
    }

    #[test]
    fn pinned_spins_never_change() {
        let g = ModelGeometry::cell_board(1, 1, 4).unwrap();
        let t = run_chain(
            &ChainSpec::new(g, params(0.2))
                .init(Init::Random)
                .sweeps(3000, 0, 1)
                .pin(Site::new(1, 1), -1)
                .observe([Site::new(1, 1)]),
        )
        .unwrap();
        assert!(t.spins[0].iter().all(|&s| s == -1));
    }

    #[test]
    fn matches_exact_means_on_two_by_four() {
        let g = two_by_four();
        let p = params(1.0);
        let ens = ExactEnsemble::new(&g, p).unwrap();
        let t = run_chain(&ChainSpec::new(g, p).sweeps(200_000, 1_000, 1).seed(11, 0)).unwrap();
        let m = t.magnetization();
        let e = t.mean_energy();
        assert!(m.z_score(0.0) < 3.0, "{m:?}");
        assert!(
            e.z_score(ens.mean_energy()) < 3.0,
            "{e:?} vs {}",
            ens.mean_energy()
        );
    }

    #[test]
    fn conditional_matches_exact_on_two_by_four() {
        let g = two_by_four();
        let p = params(1.0);
        let s = Site::new(0, 0);
        let t = Site::new(1, 2);
        let base = ChainSpec::new(g.clone(), p)
            .sweeps(200_000, 1_000, 1)
            .seed(5, 0);
        let est = conditional_measures(&g, &p, s, t, &base).unwrap();
        let ens = ExactEnsemble::new(&g, p).unwrap();
        let (si, ti) = (g.index(s), g.index(t));
        // s and t carry opposite fields, so the two conditionals differ.
        let cond = |v: i8| {
            ens.pinned_probability(&[(si, v), (ti, v)]).unwrap()
                / ens.pinned_probability(&[(ti, v)]).unwrap()
        };
        let (plus, minus) = (cond(1), cond(-1));
        assert!((plus - minus).abs() > 1e-4);
        assert!(est.plus.z_score(plus) < 3.0, "{:?} vs {plus}", est.plus);
        assert!(est.minus.z_score(minus) < 3.0, "{:?} vs {minus}", est.minus);
    }

    #[test]
    fn detailed_balance_chi_square() {
        let g = ModelGeometry::cell_board(1, 1, 2).unwrap();
        let p = params(0.5);
        let ens = ExactEnsemble::new(&g, p).unwrap();
        let t = run_chain(
            &ChainSpec::new(g.clone(), p)
                .sweeps(10_000_000 + 100, 100, 10)
                .seed(17, 0)
                .observe((0..4).map(|i| g.site(i))),
        )
        .unwrap();
        let n = t.len();
        assert_eq!(n, 1_000_000);
        let mut counts = [0u64; 16];
        for i in 0..n {
            let code = (0..4).fold(0usize, |acc, k| {
                acc | (((t.spins[k][i] == 1) as usize) << k)
            });
            counts[code] += 1;
        }
        let mut chi2 = 0.0;
        for (code, &obs) in counts.iter().enumerate() {
            let cfg = SpinConfig::from_bits(4, code as u64);
            let expected = n as f64 * ens.log_probability_of(&cfg).unwrap().exp();
            chi2 += (obs as f64 - expected).powi(2) / expected;
        }
        let pvalue = 1.0 - ChiSquared::new(15.0).unwrap().cdf(chi2);
        assert!(pvalue > 1e-3, "chi2 = {chi2}, p = {pvalue}");
    }

    #[test]
    fn scan_separates_phases_and_is_deterministic() {
        let g = ModelGeometry::cell_board(1, 1, 8).unwrap();
        let settings = ScanSettings {
            sweeps: 3000,
            burn_in: 500,
            seed: 4,
            ..ScanSettings::default()
        };
        let grid = [
            ScanPoint { beta: 2.0, h: 1.0 },
            ScanPoint { beta: 0.1, h: 1.0 },
        ];
        let table = coexistence_scan(&g, &grid, &settings).unwrap();
        assert_eq!(table.rows.len(), 6);
        let cold = table.point(2.0, 1.0);
        assert!(cold[0].m.mean > 0.9 && cold[1].m.mean < -0.9);
        assert!(cold[0].init_spread > 1.0);
        assert!(cold[0].bimodal);
        let hot = table.point(0.1, 1.0);
        assert!(!hot[0].bimodal);
        assert!(hot[0].init_spread_z < 3.0 * 1.5, "{:?}", hot[0]);
        assert_eq!(table.to_csv().lines().count(), 7);
        assert_eq!(coexistence_scan(&g, &grid, &settings).unwrap(), table);
    }
}
