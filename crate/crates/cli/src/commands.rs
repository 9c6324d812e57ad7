use gridlab_core::lyapunov::{drift_exact, lyap_h, negative_drift_geometry, DriftReport};
use gridlab_core::montecarlo::{drift_report, sample_region_state, sweep, SweepRow};
use gridlab_core::rng::{derive_seed, stream};
use gridlab_core::thermal::{run_heat_pump_scenario, run_scenario_pair, ThermalError, ThermalMode};
use gridlab_core::{classify_region, simulate, Region, SimError, State};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{DriftFile, RegionsFile, SimulateFile, SweepFile, ThermalFile};
use crate::output::{num, opt_bool, opt_num, OutDir};
use crate::CliError;

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::InvalidConfig(m) => CliError::Config(m),
            e @ SimError::Diverged { .. } => CliError::Infeasible(e.to_string()),
        }
    }
}

impl From<ThermalError> for CliError {
    fn from(e: ThermalError) -> Self {
        match e {
            ThermalError::InvalidBuilding(_) | ThermalError::InvalidScenario(_) => {
                CliError::Config(e.to_string())
            }
            ThermalError::Cooling(_) | ThermalError::Infeasible(_) => CliError::Infeasible(e.to_string()),
        }
    }
}

pub fn simulate_cmd(cfg: &SimulateFile, out: &mut OutDir) -> Result<(), CliError> {
    let sim = cfg.sim_config();
    let result = simulate(&sim, true)?;
    let p = &sim.params;
    let rows = result.records.iter().flatten().map(|rec| {
        vec![
            rec.t.to_string(),
            num(rec.state.r),
            num(rec.state.z),
            rec.region.to_string(),
            num(rec.b_expr),
            num(rec.f_frustrated),
            num(rec.h_control),
            num(lyap_h(p, rec.state)),
        ]
    });
    out.write_csv(
        "trajectory.csv",
        &["t", "R", "Z", "region", "B", "F", "H_control", "H_lyap"],
        rows,
    )?;
    out.write_json("stats.json", &result.stats)
}

/// Explicit points first, then `per_region` samples for D1..D4.
fn drift_states(cfg: &DriftFile) -> Vec<State> {
    let mut rng = stream(cfg.seed, 0);
    let mut states = cfg.points.clone();
    for region in Region::ALL {
        for _ in 0..cfg.per_region {
            states.push(sample_region_state(&cfg.params, region, cfg.extent, &mut rng));
        }
    }
    states
}

pub fn drift_cmd(cfg: &DriftFile) -> Result<Vec<DriftReport>, CliError> {
    if !(cfg.extent > 0.0 && cfg.extent.is_finite()) {
        return Err(CliError::Config("extent must be a positive number".into()));
    }
    let states = drift_states(cfg);
    if let Some(bad) = states.iter().find(|x| x.validate().is_err()) {
        return Err(CliError::Config(format!("invalid point ({}, {})", bad.r, bad.z)));
    }
    Ok(states
        .into_par_iter()
        .enumerate()
        .map(|(i, x)| drift_report(&cfg.params, x, cfg.mc_samples, derive_seed(cfg.seed, 1 + i as u64)))
        .collect())
}

pub fn write_drift(reports: &[DriftReport], out: &mut OutDir) -> Result<(), CliError> {
    let rows = reports.iter().map(|d| {
        vec![
            num(d.state.r),
            num(d.state.z),
            d.region.to_string(),
            num(d.exact),
            opt_num(d.closed_form.map(|c| c.value)),
            d.closed_form.map_or("NA", |c| c.kind.as_str()).to_string(),
            opt_num(d.mc.map(|e| e.mean)),
            opt_num(d.mc.map(|e| e.stderr)),
            opt_bool(d.closed_form_ok),
            opt_bool(d.mc_ok),
        ]
    });
    out.write_csv(
        "drift.csv",
        &[
            "r",
            "z",
            "region",
            "exact",
            "closed_form",
            "closed_form_kind",
            "mc_mean",
            "mc_stderr",
            "closed_form_ok",
            "mc_ok",
        ],
        rows,
    )
}

pub fn sweep_cmd(cfg: &SweepFile) -> Result<Vec<SweepRow>, CliError> {
    let points = cfg.grid.points(&cfg.params);
    if points.is_empty() {
        return Err(CliError::Config("sweep grid is empty".into()));
    }
    Ok(sweep(&cfg.grid, &cfg.params, &cfg.experiment))
}

#[derive(Serialize)]
struct GeometryRow {
    mu: f64,
    lambda: f64,
    r_star: f64,
    geometry: gridlab_core::lyapunov::NegativeDriftGeometry,
}

pub fn write_sweep(cfg: &SweepFile, rows: &[SweepRow], out: &mut OutDir) -> Result<(), CliError> {
    let csv_rows = rows.iter().map(|row| {
        let pt = row.point;
        let mut cells = vec![num(pt.mu), num(pt.lambda), num(pt.r_star)];
        match &row.outcome {
            Ok(v) => cells.extend([
                v.verdict.to_string(),
                opt_num(v.ks_distance),
                opt_num(v.logz_slope),
                v.seeds_used.to_string(),
            ]),
            Err(_) => cells.extend(["error", "NA", "NA", "0"].map(String::from)),
        }
        cells
    });
    out.write_csv(
        "verdicts.csv",
        &["mu", "lambda", "r_star", "verdict", "ks_distance", "logz_slope", "seeds_used"],
        csv_rows,
    )?;
    for row in rows {
        if let Err(msg) = &row.outcome {
            eprintln!(
                "warning: point mu={} lambda={} r_star={} failed: {msg}",
                row.point.mu, row.point.lambda, row.point.r_star
            );
        }
    }
    let geometry: Vec<GeometryRow> = rows
        .iter()
        .filter(|row| row.outcome.is_ok() && row.point.mu > 0.0)
        .filter_map(|row| {
            let pt = row.point;
            let raw = gridlab_core::ParamSet { mu: pt.mu, lambda: pt.lambda, r_star: pt.r_star, ..cfg.params };
            let p = raw.validate().ok()?;
            let geometry = negative_drift_geometry(&p).ok()?;
            Some(GeometryRow { mu: pt.mu, lambda: pt.lambda, r_star: pt.r_star, geometry })
        })
        .collect();
    if !geometry.is_empty() {
        out.write_json("geometry.json", &geometry)?;
    }
    Ok(())
}

pub fn thermal_cmd(cfg: &ThermalFile, mode: ThermalMode, out: &mut OutDir) -> Result<(), CliError> {
    let ledger = match mode {
        ThermalMode::ConstantCop => run_scenario_pair(&cfg.building, &cfg.scenario)?,
        ThermalMode::HeatPump => run_heat_pump_scenario(&cfg.building, &cfg.scenario)?,
    };
    out.write_json("ledger.json", &ledger)
}

#[derive(Serialize)]
struct RegionEdges {
    ramp_up_edge: f64,
    ramp_down_edge: f64,
}

#[derive(Serialize)]
struct RegionsGeometry {
    regions: RegionEdges,
    /// Absent when `μ ≤ 0`: the drift set is only defined for positive evaporation.
    negative_drift: Option<gridlab_core::lyapunov::NegativeDriftGeometry>,
}

pub fn regions_cmd(cfg: &RegionsFile, out: &mut OutDir) -> Result<(), CliError> {
    let p = &cfg.params;
    let zs = cfg.z.values();
    if zs.iter().any(|&z| z < 0.0) {
        return Err(CliError::Config("z axis must be nonnegative".into()));
    }
    let geometry = negative_drift_geometry(p).ok();
    out.write_json(
        "geometry.json",
        &RegionsGeometry {
            regions: RegionEdges { ramp_up_edge: p.ramp_up_edge(), ramp_down_edge: p.ramp_down_edge() },
            negative_drift: geometry,
        },
    )?;
    let rows = cfg.r.values().into_iter().flat_map(|r| {
        zs.iter().map(move |&z| {
            let x = State::new(r, z);
            vec![
                num(r),
                num(z),
                classify_region(p, x).to_string(),
                opt_bool(geometry.map(|g| g.in_c_union(x))),
                num(drift_exact(p, x)),
            ]
        })
    });
    out.write_csv("regions.csv", &["r", "z", "region", "in_c_union", "drift_exact"], rows)
}
