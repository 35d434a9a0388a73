//! Grid expansion and per-command dispatch.

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use dtscatter_core::dyson::{first_order_amplitude, second_order_amplitude, TimeSumOptions};
use dtscatter_core::lippmann_schwinger::{default_eps_schedule, transmission_reflection_amplitudes, w_operator, OnSitePhase};
use dtscatter_core::spectral::{dirac_walk_matrix, Band, DiracWalk};
use dtscatter_core::thirring::{amplitude_pp_value, born_series_thirring, channel, umklapp_amplitudes, xy_factors};
use dtscatter_core::trotter::{fit_loglog, m_star, t_difference, tau_threshold, DiscreteModel};
use dtscatter_core::C64;
use rayon::prelude::*;
use serde_json::{json, Value as Json};

use crate::config::{Command, PacketModel, Params, RunConfig};
use crate::table::{Cell, Column, ColumnKind, ResultTable};
use crate::wavepacket::{extract_smatrix, transmission_reflection, traversal_steps};

/// Environment variable that overrides the worker count.
pub const THREADS_ENV: &str = "DTSCATTER_THREADS";

/// Relative tolerance used for Born convergence reporting.
pub const BORN_TOLERANCE: f64 = 1e-8;

/// Result of one grid point: its output cells plus an optional flag reason.
struct PointOutput {
    cells: Vec<Cell>,
    flag: Option<String>,
}

type PointResult = Result<PointOutput, String>;

fn core_err(e: dtscatter_core::Error) -> String {
    e.to_string()
}

/// Output columns of `command`, excluding the swept inputs and the flag columns.
pub fn output_columns(command: Command, params: &Params) -> Vec<Column> {
    use ColumnKind::*;
    let c = |n: &str, k| Column::new(n, k);
    match command {
        Command::Dispersion => vec![
            c("omega", Real),
            c("group_velocity", Real),
            c("eigenphase", Complex),
            c("unitarity_residual", Real),
        ],
        Command::Amplitude => {
            let mut cols = vec![
                c("closed", Complex),
                c("umklapp", Complex),
                c("first_order", Real),
                c("born_ratio", Real),
            ];
            cols.extend(params.born_orders.iter().map(|n| c(&format!("born_{n}"), Complex)));
            cols
        }
        Command::Born => vec![
            c("closed", Complex),
            c("partial_sum", Complex),
            c("relative_error", Real),
            c("ratio", Real),
            c("converged_at", Int),
        ],
        Command::Dyson => vec![
            c("first_order", Complex),
            c("second_order", Complex),
            c("chi2_coefficient", Complex),
            c("error_estimate", Real),
            c("tail_bound", Real),
            c("steps", Int),
        ],
        Command::Trotter => vec![
            c("tau", Real),
            c("m_star", Real),
            c("difference_norm", Real),
            c("prediction_norm", Real),
            c("element", Complex),
            c("first_order_prediction", Complex),
            c("wg_norm", Real),
            c("bound_chain", Real),
            c("certified", Bool),
        ],
        Command::Wavepacket => vec![
            c("steps", Int),
            c("forward", Complex),
            c("partner", Complex),
            c("reference", Complex),
            c("relative_error", Real),
            c("transmission", Real),
            c("reflection", Real),
            c("leakage", Real),
        ],
        Command::Sweep => vec![
            c("t", Complex),
            c("r", Complex),
            c("unitarity", Real),
        ],
    }
}

fn point(command: Command, p: &Params, index: usize) -> PointResult {
    match command {
        Command::Dispersion => dispersion(p),
        Command::Amplitude => amplitude(p),
        Command::Born => born(p),
        Command::Dyson => dyson(p),
        Command::Trotter => trotter(p),
        Command::Wavepacket => wavepacket(p, index),
        Command::Sweep => sweep(p),
    }
}

fn ok(cells: Vec<Cell>) -> PointResult {
    Ok(PointOutput { cells, flag: None })
}

fn dispersion(p: &Params) -> PointResult {
    let walk = DiracWalk::new(p.nu).map_err(core_err)?;
    let d = walk.dispersion;
    let s = p.band.sign();
    ok(vec![
        Cell::Real(s * d.omega(p.k)),
        Cell::Real(s * d.group_velocity(p.k)),
        Cell::Complex(C64::from_polar(1.0, -s * d.omega(p.k))),
        Cell::Real(dirac_walk_matrix(&d, p.k).unitarity_residual()),
    ])
}

fn amplitude(p: &Params) -> PointResult {
    let tp = p.thirring().map_err(core_err)?;
    let closed = amplitude_pp_value(&tp, p.p, p.k).map_err(core_err)?;
    let umklapp = umklapp_amplitudes(&tp, p.p, p.k).map_err(core_err)?[1].coefficient;
    let first = xy_factors(&tp, p.p, p.k).map_err(core_err)?.first_order();
    let trace = born_series_thirring(&tp, p.p, p.k, p.n_max).map_err(core_err)?;
    let mut cells = vec![
        Cell::Complex(closed),
        Cell::Complex(umklapp),
        Cell::Real(first),
        Cell::Real(trace.ratio),
    ];
    cells.extend(p.born_orders.iter().map(|&n| Cell::Complex(trace.partial_sums[n])));
    let flag = (trace.ratio >= 1.0).then(|| format!("Born series diverges (ratio {:.3})", trace.ratio));
    Ok(PointOutput { cells, flag })
}

fn born(p: &Params) -> PointResult {
    let tp = p.thirring().map_err(core_err)?;
    let closed = amplitude_pp_value(&tp, p.p, p.k).map_err(core_err)?;
    let trace = born_series_thirring(&tp, p.p, p.k, p.n_max).map_err(core_err)?;
    let rel = |s: C64| (s - closed).norm() / closed.norm().max(f64::MIN_POSITIVE);
    let last = trace.partial_sums[p.n_max];
    let converged_at = trace.partial_sums.iter().position(|&s| rel(s) < BORN_TOLERANCE);
    let flag = converged_at
        .is_none()
        .then(|| format!("no partial sum within {BORN_TOLERANCE:e} by order {}", p.n_max));
    Ok(PointOutput {
        cells: vec![
            Cell::Complex(closed),
            Cell::Complex(last),
            Cell::Real(rel(last)),
            Cell::Real(trace.ratio),
            Cell::Int(converged_at.map_or(-1, |n| n as i64)),
        ],
        flag,
    })
}

fn dyson(p: &Params) -> PointResult {
    let tp = p.thirring().map_err(core_err)?;
    let ch = channel(&tp, p.p, p.k, Band::Plus, Band::Plus).map_err(core_err)?;
    let first = first_order_amplitude(&tp, &ch, &ch).map_err(core_err)?;
    let second = second_order_amplitude(&tp, &ch, &ch, &TimeSumOptions::default()).map_err(core_err)?;
    ok(vec![
        Cell::Complex(first),
        Cell::Complex(second.value),
        Cell::Complex(second.coefficient),
        Cell::Real(second.error_estimate),
        Cell::Real(second.tail_bound),
        Cell::Int(second.steps as i64),
    ])
}

fn trotter(p: &Params) -> PointResult {
    let model = p.continuous_model().map_err(core_err)?;
    let ms = m_star(model.gamma, model.v_norm(), model.omega_max());
    let tau = p.tau_scale * ms;
    let k = model.k;
    let eps = model.eps;
    let dm = DiscreteModel::new(model, tau).map_err(core_err)?;
    let d = t_difference(&dm, k, k, eps).map_err(core_err)?;
    let bound = tau_threshold(&dm).map_err(core_err)?;
    let flag = (!d.certified).then(|| format!("tau = {tau} exceeds m* = {ms}"));
    Ok(PointOutput {
        cells: vec![
            Cell::Real(tau),
            Cell::Real(ms),
            Cell::Real(d.difference_norm),
            Cell::Real(d.prediction_norm),
            Cell::Complex(d.element),
            Cell::Complex(d.first_order_prediction),
            Cell::Real(bound.measured),
            Cell::Real(bound.bound_chain),
            Cell::Bool(d.certified),
        ],
        flag,
    })
}

fn wavepacket(p: &Params, index: usize) -> PointResult {
    let model = p.walk_model().map_err(|e| e.to_string())?;
    let spec = p.packet_spec();
    let steps = if p.steps == 0 { traversal_steps(&model, &spec) } else { p.steps };
    let m = extract_smatrix(&model, &spec, p.extent, steps).map_err(|e| e.to_string())?;
    let reference = match p.model {
        PacketModel::Thirring => amplitude_pp_value(&p.thirring().map_err(core_err)?, p.p, p.k).map_err(core_err)?,
        PacketModel::Single => {
            let walk = DiracWalk::new(p.nu).map_err(core_err)?;
            let w = w_operator(&walk, &OnSitePhase::single_site(p.chi, 0)).map_err(core_err)?;
            let (t, _, _) = transmission_reflection_amplitudes(&w, &walk, p.k, p.band, &default_eps_schedule()).map_err(core_err)?;
            t - 1.0
        }
    };
    let zero = C64::new(0.0, 0.0);
    let forward = m.bins.first().map_or(zero, |b| b.amplitude);
    let partner = m.bins.get(1).map_or(zero, |b| b.amplitude);
    let tr = transmission_reflection(&model, &m.outgoing, spec.channel, spec.k0);
    if let Some(path) = &p.snapshot {
        let path = PathBuf::from(path.display().to_string().replace("{index}", &index.to_string()));
        let f = File::create(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        m.outgoing
            .write_snapshot(BufWriter::new(f))
            .map_err(|e| format!("{}: {e}", path.display()))?;
    }
    let flag = m.contaminated.then(|| format!("boundary leakage {:.3e}", m.leakage));
    Ok(PointOutput {
        cells: vec![
            Cell::Int(steps as i64),
            Cell::Complex(forward),
            Cell::Complex(partner),
            Cell::Complex(reference),
            Cell::Real((forward - reference).norm() / reference.norm().max(f64::MIN_POSITIVE)),
            Cell::Real(tr.transmission),
            Cell::Real(tr.reflection),
            Cell::Real(m.leakage),
        ],
        flag,
    })
}

fn sweep(p: &Params) -> PointResult {
    let walk = DiracWalk::new(p.nu).map_err(core_err)?;
    let w = w_operator(&walk, &OnSitePhase::single_site(p.chi, 0)).map_err(core_err)?;
    let (t, r, flagged) = transmission_reflection_amplitudes(&w, &walk, p.k, p.band, &default_eps_schedule()).map_err(core_err)?;
    Ok(PointOutput {
        cells: vec![Cell::Complex(t), Cell::Complex(r), Cell::Real(t.norm_sqr() + r.norm_sqr())],
        flag: flagged.then(|| "epsilon limit did not settle".to_string()),
    })
}

/// Cross product of the grid, first key slowest. An empty grid section yields one point.
pub fn grid_points(cfg: &RunConfig) -> Vec<Vec<f64>> {
    cfg.grid.iter().fold(vec![Vec::new()], |acc, (_, values)| {
        acc.iter()
            .flat_map(|prefix| {
                values.iter().map(move |&v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect()
    })
}

/// Worker count: `DTSCATTER_THREADS`, then the config, then available parallelism.
pub fn worker_count(cfg: &RunConfig) -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .or(cfg.threads)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs every grid point. Failures become flagged rows; the sweep never aborts.
pub fn run(cfg: &RunConfig) -> ResultTable {
    let outputs = output_columns(cfg.command, &cfg.params);
    let mut columns: Vec<Column> = cfg.grid.iter().map(|(k, _)| Column::new(k.clone(), ColumnKind::Real)).collect();
    columns.extend(outputs.iter().cloned());
    columns.push(Column::new("flagged", ColumnKind::Bool));
    columns.push(Column::new("error", ColumnKind::Text));

    let points = grid_points(cfg);
    let evaluate = |(index, values): (usize, &Vec<f64>)| -> Vec<Cell> {
        let mut params = cfg.params.clone();
        for ((key, _), &v) in cfg.grid.iter().zip(values) {
            params.set_number(key, v).expect("grid values are validated at parse time");
        }
        let mut row: Vec<Cell> = values.iter().map(|&v| Cell::Real(v)).collect();
        match point(cfg.command, &params, index) {
            Ok(out) => {
                row.extend(out.cells);
                row.push(Cell::Bool(out.flag.is_some()));
                row.push(Cell::Text(out.flag.unwrap_or_default()));
            }
            Err(e) => {
                row.extend(outputs.iter().map(|c| Cell::missing(c.kind)));
                row.push(Cell::Bool(true));
                row.push(Cell::Text(e));
            }
        }
        row
    };
    let threads = worker_count(cfg);
    let rows: Vec<Vec<Cell>> = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(|| points.par_iter().enumerate().map(evaluate).collect()),
        Err(_) => points.iter().enumerate().map(evaluate).collect(),
    };

    let mut table = ResultTable::new(columns);
    for row in rows {
        table.push(row);
    }
    table.metadata.insert("tool".into(), json!("dtscatter"));
    table.metadata.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    table.metadata.extend(cfg.echo());
    if cfg.command == Command::Trotter {
        table.metadata.insert("loglog".into(), trotter_fit(&table));
    }
    table
}

/// Slope of `log difference_norm` against `log tau` over certified, unflagged rows.
fn trotter_fit(table: &ResultTable) -> Json {
    let (Some(ti), Some(di), Some(fi)) = (table.column("tau"), table.column("difference_norm"), table.column("flagged")) else {
        return Json::Null;
    };
    let points: Vec<(f64, f64)> = table
        .rows
        .iter()
        .filter(|r| r[fi] == Cell::Bool(false))
        .filter_map(|r| match (&r[ti], &r[di]) {
            (Cell::Real(t), Cell::Real(d)) => Some((*t, *d)),
            _ => None,
        })
        .collect();
    match fit_loglog(&points) {
        Ok((slope, intercept)) => json!({ "slope": slope, "intercept": intercept, "prefactor": intercept.exp(), "points": points.len() }),
        Err(e) => json!({ "error": e.to_string(), "points": points.len() }),
    }
}

/// True when there were rows and every one of them is flagged.
pub fn all_flagged(table: &ResultTable) -> bool {
    let Some(fi) = table.column("flagged") else { return false };
    !table.rows.is_empty() && table.rows.iter().all(|r| r[fi] == Cell::Bool(true))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    #[test]
    fn grid_cross_product_order() {
        let cfg = parse_config("command = dispersion\n[grid]\nnu = 0.2, 0.4\nk = 0.1, 0.2, 0.3\n").unwrap();
        let pts = grid_points(&cfg);
        assert_eq!(pts.len(), 6);
        assert_eq!(pts[0], vec![0.2, 0.1]);
        assert_eq!(pts[3], vec![0.4, 0.1]);
    }

    #[test]
    fn empty_grid_gives_empty_table() {
        let cfg = parse_config("command = amplitude\n[grid]\nk =\n").unwrap();
        let t = run(&cfg);
        assert!(t.rows.is_empty());
        assert!(!all_flagged(&t));
    }

    #[test]
    fn failed_points_are_flagged_in_place() {
        // k = 0 is a band edge with zero group velocity.
        let cfg = parse_config("command = sweep\n[grid]\nk = 0.5, 0, 1.0\n").unwrap();
        let t = run(&cfg);
        let fi = t.column("flagged").unwrap();
        assert_eq!(t.rows.len(), 3);
        assert_eq!(t.rows[1][fi], Cell::Bool(true));
        assert_eq!(t.rows[0][fi], Cell::Bool(false));
        assert_eq!(t.rows[2][fi], Cell::Bool(false));
        let alone = run(&parse_config("command = sweep\n[grid]\nk = 1.0\n").unwrap());
        assert!(alone.rows[0][1..].iter().zip(&t.rows[2][1..]).all(|(a, b)| a == b));
    }
}
