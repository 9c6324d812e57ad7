use gridlab_core::montecarlo::{growth_slope, hitting_probability, simulate, Rect, SimConfig};
use gridlab_core::{Params, Region, State};

fn p0() -> Params {
    Params::new(0.5, 0.1, 1.0, 1.0, 3.0, 1.0).unwrap()
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

#[test]
fn stable_chain_concentrates_near_target() {
    let out = simulate(&SimConfig::new(p0(), State::new(-50.0, 100.0), 200_000, 3), false).unwrap();
    let occ = out.stats.occupancy;
    assert!((occ.total() - 1.0).abs() <= 1e-12, "{occ:?}");
    assert!(occ.get(Region::D3) > occ.get(Region::D1), "{occ:?}");
    assert!(out.stats.z.mean < 5.0, "{:?}", out.stats.z);
}

#[test]
fn recorded_noise_has_configured_scale() {
    let p = p0().with_sigma(2.0).unwrap();
    let out = simulate(&SimConfig::new(p, State::ORIGIN, 200_000, 8), true).unwrap();
    let noise: Vec<f64> = out.records.unwrap().iter().map(|r| r.noise).collect();
    let n = noise.len() as f64;
    let mean = noise.iter().sum::<f64>() / n;
    let var = noise.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    assert!(mean.abs() < 4.0 * 2.0 / n.sqrt(), "mean {mean}");
    assert!((var.sqrt() - 2.0).abs() < 0.02, "sd {}", var.sqrt());
}

#[test]
fn same_seed_same_stats() {
    let cfg = SimConfig::new(p0(), State::new(1.0, 4.0), 50_000, 21);
    assert_eq!(simulate(&cfg, false).unwrap().stats, simulate(&cfg, false).unwrap().stats);
    let other = SimConfig { seed: 22, ..cfg };
    assert_ne!(simulate(&cfg, false).unwrap().stats, simulate(&other, false).unwrap().stats);
}

#[test]
fn parallel_estimators_ignore_pool_size() {
    let p = p0().with_mu(-0.1).unwrap();
    let growth = |t| in_pool(t, || growth_slope(&p, State::new(-100.0, 0.0), 200, 500, 16, 4).unwrap());
    assert_eq!(growth(1), growth(5));
    let target = Rect { r_min: 2.0, r_max: 4.0, z_min: 0.0, z_max: 1.0 };
    let hit = |t| in_pool(t, || hitting_probability(&p0(), State::new(-20.0, 30.0), target, 200, 200, 9));
    assert_eq!(hit(1), hit(3));
}
