//! Subcommand implementations. Each returns a JSON report; `verify` also
//! returns its table.

use std::fs;
use std::path::{Path, PathBuf};

use benney_core::io::{component_names, write_frames};
use benney_core::polyfam::{self, LaxPoly, DEFAULT_CLUSTER_TOL};
use benney_core::reduction::{self, Family, ReducedState};
use benney_core::solver::{self, FieldState, Frame, Grid1D, SolverConfig, Trajectory};
use benney_core::spectral::{self, Regime};
use benney_core::wavegen;
use benney_core::Complex64;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::builtins::{initial_data, InitialData};
use crate::checks::{self, Context, CHECK_IDS};
use crate::config::{Command, RunConfig, System};
use crate::LabError;

pub const RESIDUAL_P: [f64; 3] = [-1.0, 0.0, 1.0];

#[derive(Debug, Clone)]
pub struct Report {
    pub json: Value,
    /// Human-readable table, printed instead of the JSON when present.
    pub table: Option<String>,
    pub pass: bool,
}

impl Report {
    fn ok(json: Value) -> Self {
        Self {
            json,
            table: None,
            pass: true,
        }
    }
}

pub fn run(cfg: &RunConfig) -> Result<Report, LabError> {
    let command = cfg
        .command
        .ok_or_else(|| LabError::Usage("no command given".into()))?;
    match command {
        Command::Classify => classify(cfg),
        Command::Simulate => simulate(cfg),
        Command::ReduceLift => reduce_lift(cfg),
        Command::Travelwave => travelwave(cfg),
        Command::Strata => strata(cfg),
        Command::Verify => verify(cfg),
    }
}

fn complex(z: &Complex64) -> Value {
    json!([z.re, z.im])
}

fn io_err(path: &Path, e: std::io::Error) -> LabError {
    LabError::Io(format!("{}: {e}", path.display()))
}

fn ensure_dir(dir: &Path) -> Result<(), LabError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<(), LabError> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn write_json(path: &Path, v: &Value) -> Result<(), LabError> {
    let text = serde_json::to_string_pretty(v).expect("JSON values serialize");
    write_text(path, &(text + "\n"))
}

fn write_csv(
    path: &Path,
    grid: &Grid1D,
    frames: &[Frame],
    names: &[String],
) -> Result<(), LabError> {
    let mut buf = Vec::new();
    write_frames(&mut buf, grid, frames, names).expect("writing to memory");
    fs::write(path, buf).map_err(|e| io_err(path, e))
}

fn names_for(system: System, dim: usize) -> Vec<String> {
    match system {
        System::Reduced => vec!["w".into(), "v".into()],
        System::Lax => component_names("u", dim),
    }
}

// ---------------------------------------------------------------- classify

fn regime_name(r: Regime) -> &'static str {
    match r {
        Regime::StrictlyHyperbolic => "StrictlyHyperbolic",
        Regime::OneRealRegime => "OneRealRegime",
        Regime::DegenerateReal => "DegenerateReal",
        Regime::MixedOther => "MixedOther",
    }
}

fn axis(cfg: &RunConfig) -> Vec<f64> {
    let (lo, hi) = cfg.range;
    let m = cfg.points - 1;
    (0..=m)
        .map(|k| lo + (hi - lo) * k as f64 / m as f64)
        .collect()
}

fn classify(cfg: &RunConfig) -> Result<Report, LabError> {
    if !cfg.state.is_empty() {
        if cfg.system == System::Reduced {
            return Ok(Report::ok(reduced_point(&cfg.state)?));
        }
        let data = spectral::classify_state(&cfg.state, None)?;
        return Ok(Report::ok(json!({
            "mode": "state",
            "state": cfg.state,
            "regime": regime_name(data.regime),
            "borderline": data.borderline,
            "eigenvalues": data.eigenvalues.iter().map(complex).collect::<Vec<_>>(),
            "nonlinearity": data.nonlinearity,
            "real_eigen": data.real_eigen,
        })));
    }
    if cfg.csv.is_some() {
        let data = initial_data(&RunConfig {
            init: "csv".into(),
            ..cfg.clone()
        })?;
        return classify_field(&data);
    }
    match cfg.system {
        System::Reduced => classify_reduced_sweep(cfg),
        System::Lax => classify_lax_sweep(cfg),
    }
}

fn classify_field(data: &InitialData) -> Result<Report, LabError> {
    let results: Vec<spectral::SpectralData> = (0..data.state.cells())
        .into_par_iter()
        .map(|c| spectral::classify_state(&data.state.state_at(c), None))
        .collect::<Result<_, _>>()?;
    let mut counts = std::collections::BTreeMap::new();
    for r in &results {
        *counts.entry(regime_name(r.regime)).or_insert(0usize) += 1;
    }
    Ok(Report::ok(json!({
        "mode": "field",
        "cells": results.len(),
        "counts": counts,
        "regimes": results.iter().map(|r| regime_name(r.regime)).collect::<Vec<_>>(),
    })))
}

fn reduced_point(state: &[f64]) -> Result<Value, LabError> {
    let [w, v] = state[..] else {
        return Err(LabError::Usage("reduced state needs `state = w,v`".into()));
    };
    let s = ReducedState::new(w, v);
    let (l1, l2) = reduction::eigs2(s);
    let nl1 = reduction::nonlinearity1(s).ok();
    let nl2 = reduction::nonlinearity2(s).ok();
    Ok(json!({
        "mode": "reduced-state",
        "w": w,
        "v": v,
        "strictly_hyperbolic": s.is_strictly_hyperbolic(),
        "eigenvalues": [l1, l2],
        "nonlinearity": [nl1, nl2],
        "riemann_invariants": [
            reduction::riemann_invariant(s, Family::First),
            reduction::riemann_invariant(s, Family::Second),
        ],
    }))
}

fn classify_reduced_sweep(cfg: &RunConfig) -> Result<Report, LabError> {
    let ax = axis(cfg);
    let rows: Vec<Vec<i8>> = ax
        .par_iter()
        .map(|&w| {
            ax.iter()
                .map(
                    |&v| match reduction::nonlinearity1(ReducedState::new(w, v)) {
                        Ok(x) if x > 0.0 => 1,
                        Ok(x) if x < 0.0 => -1,
                        _ => 0,
                    },
                )
                .collect()
        })
        .collect();
    let mut mismatches = 0usize;
    for (i, &w) in ax.iter().enumerate() {
        for (j, &v) in ax.iter().enumerate() {
            let sv = if v > 0.0 {
                1
            } else if v < 0.0 {
                -1
            } else {
                0
            };
            if w != 0.0 && rows[i][j] != sv {
                mismatches += 1;
            }
        }
    }
    if let Some(dir) = &cfg.out {
        ensure_dir(dir)?;
        let mut text = String::from("w,v,sign_nl1\n");
        for (i, &w) in ax.iter().enumerate() {
            for (j, &v) in ax.iter().enumerate() {
                text.push_str(&format!("{w},{v},{}\n", rows[i][j]));
            }
        }
        write_text(&dir.join("nonlinearity_sign.csv"), &text)?;
    }
    Ok(Report::ok(json!({
        "mode": "reduced-sweep",
        "points": cfg.points,
        "range": [cfg.range.0, cfg.range.1],
        "sign_mismatches": mismatches,
        "sign_matches_v": mismatches == 0,
        "sign_map": rows,
    })))
}

/// n = 3 sweep over `(u1, u2)` with `u3 = 0`. The regime boundary is
/// compared with the zero set of the discriminant `-32 u1³ - 27 u2²` of
/// `p³ + 2 u1 p + u2`.
fn classify_lax_sweep(cfg: &RunConfig) -> Result<Report, LabError> {
    if cfg.n != 3 {
        return Err(LabError::Usage(
            "a Lax sweep covers n = 3 only; pass `state` for other n".into(),
        ));
    }
    let ax = axis(cfg);
    let step = ax[1] - ax[0];
    let rows: Vec<Vec<Regime>> = ax
        .par_iter()
        .map(|&u1| {
            ax.iter()
                .map(|&u2| spectral::classify_state(&[u1, u2, 0.0], None).map(|d| d.regime))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<_, _>>()?;
    let mut worst_offset: f64 = 0.0;
    let mut boundaries = 0usize;
    for (i, &u1) in ax.iter().enumerate() {
        let zero = if u1 < 0.0 {
            Some((-32.0 * u1.powi(3) / 27.0).sqrt())
        } else {
            None
        };
        let hyper = |r: Regime| matches!(r, Regime::StrictlyHyperbolic | Regime::DegenerateReal);
        for j in 0..ax.len() - 1 {
            if hyper(rows[i][j]) != hyper(rows[i][j + 1]) {
                boundaries += 1;
                let mid = 0.5 * (ax[j] + ax[j + 1]);
                let offset = match zero {
                    Some(z) => (mid.abs() - z).abs() / step,
                    None => f64::INFINITY,
                };
                worst_offset = worst_offset.max(offset);
            }
        }
    }
    let mut counts = std::collections::BTreeMap::new();
    for r in rows.iter().flatten() {
        *counts.entry(regime_name(*r)).or_insert(0usize) += 1;
    }
    Ok(Report::ok(json!({
        "mode": "lax-sweep",
        "n": 3,
        "points": cfg.points,
        "range": [cfg.range.0, cfg.range.1],
        "counts": counts,
        "boundary_crossings": boundaries,
        "max_boundary_offset_cells": worst_offset,
        "boundary_within_one_cell": worst_offset <= 1.0,
        "regimes": rows.iter().map(|r| r.iter().map(|x| regime_name(*x)).collect::<Vec<_>>()).collect::<Vec<_>>(),
    })))
}

// ---------------------------------------------------------------- simulate

fn solver_config(cfg: &RunConfig) -> SolverConfig {
    SolverConfig {
        cfl: cfg.cfl,
        tmax: cfg.tmax,
        visc: cfg.visc,
        frame_dt: cfg.frame_dt,
        ..SolverConfig::default()
    }
}

fn run_data(
    data: &InitialData,
    grid: Grid1D,
    state: &FieldState,
    cfg: &SolverConfig,
) -> Result<Trajectory, LabError> {
    Ok(match data.system {
        System::Reduced => solver::simulate_2x2(grid, state, cfg)?,
        System::Lax => solver::simulate_quasilinear(grid, state, cfg)?,
    })
}

const PLOT_SCRIPT: &str = r#"#!/usr/bin/env python3
"""Plot stored frames from frames.csv (first, middle and last frame)."""
import csv
import sys
from collections import OrderedDict

import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else "frames.csv"
frames = OrderedDict()
with open(path) as fh:
    reader = csv.reader(fh)
    header = next(reader)
    for row in reader:
        t = float(row[0])
        frames.setdefault(t, []).append([float(x) for x in row[1:]])

times = list(frames)
picked = sorted({times[0], times[len(times) // 2], times[-1]})
names = header[2:]
fig, axes = plt.subplots(len(names), 1, sharex=True, squeeze=False)
for t in picked:
    rows = frames[t]
    x = [r[0] for r in rows]
    for k, name in enumerate(names):
        axes[k][0].plot(x, [r[k + 1] for r in rows], label=f"t = {t:g}")
for k, name in enumerate(names):
    axes[k][0].set_ylabel(name)
axes[0][0].legend()
axes[-1][0].set_xlabel("x")
fig.tight_layout()
fig.savefig(path.rsplit(".", 1)[0] + ".png", dpi=120)
"#;

fn sums(state: &FieldState) -> Vec<f64> {
    state.components.iter().map(|c| c.iter().sum()).collect()
}

fn simulate(cfg: &RunConfig) -> Result<Report, LabError> {
    let data = initial_data(cfg)?;
    let scfg = solver_config(cfg);
    let traj = run_data(&data, data.grid, &data.state, &scfg)?;
    let out = cfg
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("benney-out"));
    ensure_dir(&out)?;
    let names = names_for(data.system, data.state.dim());
    write_csv(&out.join("frames.csv"), &traj.grid, &traj.frames, &names)?;
    write_text(&out.join("plot_frames.py"), PLOT_SCRIPT)?;

    let s0 = sums(&traj.frames[0].state);
    let sum_drift: Vec<f64> = sums(&traj.last().state)
        .iter()
        .zip(&s0)
        .map(|(a, b)| (a - b).abs() / b.abs().max(f64::MIN_POSITIVE))
        .collect();
    let mut report = json!({
        "command": "simulate",
        "init": data.name,
        "system": data.system.to_string(),
        "cells": traj.grid.cells,
        "scheme": traj.meta.scheme,
        "cfl": traj.meta.cfl,
        "max_cfl": traj.meta.max_cfl,
        "visc": traj.meta.visc,
        "steps": traj.meta.steps,
        "frames": traj.frames.len(),
        "final_time": traj.last().t,
        "reached_tmax": traj.meta.reached_tmax,
        "blowup": {
            "detected": traj.meta.blowup.detected,
            "time": traj.meta.blowup.time,
            "kind": traj.meta.blowup.kind.map(|k| format!("{k:?}")),
            "initial_gradient": traj.meta.blowup.initial_gradient,
            "growth_factor": traj.meta.blowup.growth_factor,
        },
        "stationarity": traj.last().state.max_diff(&traj.frames[0].state),
        "relative_sum_drift": sum_drift,
    });
    let obj = report.as_object_mut().expect("report is an object");
    match data.system {
        System::Lax if traj.frames.len() >= 3 => {
            let cons = solver::conservation_residual(&traj, &RESIDUAL_P)?;
            let sys = solver::system_residual(&traj)?;
            obj.insert(
                "conservation_residual".into(),
                json!({"p": RESIDUAL_P, "sup": cons.sup, "l2": cons.l2}),
            );
            obj.insert(
                "system_residual".into(),
                json!({"sup": sys.sup, "l2": sys.l2}),
            );
        }
        System::Reduced => {
            obj.insert("lift_table".into(), lift_table(&data, &scfg)?);
        }
        _ => {}
    }
    write_json(&out.join("report.json"), &report)?;
    Ok(Report::ok(report))
}

/// Lifted n = 4 residual of the reduced run at `N/4, N/2, N`.
fn lift_table(data: &InitialData, scfg: &SolverConfig) -> Result<Value, LabError> {
    let cells = data.grid.cells;
    let sizes: Vec<usize> = [cells / 4, cells / 2, cells]
        .into_iter()
        .filter(|&n| n >= Grid1D::MIN_CELLS && cells % n == 0)
        .collect();
    let rows: Vec<Result<Value, LabError>> = sizes
        .par_iter()
        .map(|&n| {
            let grid = Grid1D::new(n, data.grid.length)?;
            let state = solver::coarsen(&data.state, cells / n);
            let traj = run_data(data, grid, &state, scfg)?;
            let lifted = reduction::lift_trajectory(&traj)?;
            let (sup, l2) = if lifted.frames.len() >= 3 {
                let r = solver::system_residual(&lifted)?;
                (Some(r.sup), Some(r.l2))
            } else {
                (None, None)
            };
            Ok(json!({"cells": n, "system_residual_sup": sup, "system_residual_l2": l2, "reached_tmax": traj.meta.reached_tmax}))
        })
        .collect();
    let rows: Vec<Value> = rows.into_iter().collect::<Result<_, _>>()?;
    let sup: Vec<Option<f64>> = rows
        .iter()
        .map(|r| r["system_residual_sup"].as_f64())
        .collect();
    let orders: Vec<Option<f64>> = sup
        .windows(2)
        .map(|w| match (w[0], w[1]) {
            (Some(a), Some(b)) => Some((a / b).log2()),
            _ => None,
        })
        .collect();
    Ok(json!({"rows": rows, "orders": orders}))
}

// ------------------------------------------------------------- reduce-lift

fn reduce_lift(cfg: &RunConfig) -> Result<Report, LabError> {
    if !cfg.state.is_empty() {
        let mut point = reduced_point(&cfg.state)?;
        let s = ReducedState::new(cfg.state[0], cfg.state[1]);
        let fd = reduction::factors(s);
        let lifted = reduction::lift(s);
        let cs = polyfam::critical_points(&lifted, DEFAULT_CLUSTER_TOL)?;
        let obj = point.as_object_mut().expect("object");
        obj.insert("mode".into(), json!("reduce-lift-state"));
        obj.insert("lift".into(), json!(lifted.coeffs()));
        obj.insert("factors".into(), json!({"f": fd.f, "g": fd.g, "a": fd.a}));
        obj.insert("potential".into(), json!(reduction::potential(s)));
        obj.insert(
            "lift_critical_points".into(),
            json!(cs
                .points
                .iter()
                .map(|p| json!({"location": complex(&p.location), "multiplicity": p.multiplicity}))
                .collect::<Vec<_>>()),
        );
        return Ok(Report::ok(point));
    }
    let data = initial_data(cfg)?;
    if data.state.dim() != 2 {
        return Err(LabError::Usage(format!(
            "reduce-lift needs two-component (w, v) data, `{}` has {}",
            data.name,
            data.state.dim()
        )));
    }
    let traj = Trajectory {
        grid: data.grid,
        frames: vec![Frame {
            t: 0.0,
            state: data.state.clone(),
        }],
        meta: solver::simulate_2x2(
            data.grid,
            &data.state,
            &SolverConfig {
                max_steps: Some(0),
                ..SolverConfig::default()
            },
        )?
        .meta,
    };
    let lifted = reduction::lift_trajectory(&traj)?;
    let hyperbolic = (0..data.state.cells())
        .filter(|&c| {
            let s = data.state.state_at(c);
            ReducedState::new(s[0], s[1]).is_strictly_hyperbolic()
        })
        .count();
    if let Some(dir) = &cfg.out {
        ensure_dir(dir)?;
        write_csv(
            &dir.join("lifted.csv"),
            &lifted.grid,
            &lifted.frames,
            &component_names("u", 4),
        )?;
    }
    Ok(Report::ok(json!({
        "mode": "reduce-lift-field",
        "init": data.name,
        "cells": data.state.cells(),
        "strictly_hyperbolic_cells": hyperbolic,
        "lift_first_cell": lifted.frames[0].state.state_at(0),
    })))
}

// -------------------------------------------------------------- travelwave

fn travelwave(cfg: &RunConfig) -> Result<Report, LabError> {
    let n = cfg.n;
    let constants = if cfg.constants.is_empty() {
        vec![0.0; n.saturating_sub(1)]
    } else {
        cfg.constants.clone()
    };
    let mu = wavegen::rational(cfg.mu)?;
    let cq = constants
        .iter()
        .map(|&c| wavegen::rational(c))
        .collect::<Result<Vec<_>, _>>()?;
    let polys = wavegen::travelwave_components(n, &mu, &cq)?;
    let residuals = wavegen::chain_residuals(n, &mu, &polys);
    let constraint = wavegen::eigen_constraint(n, &mu, &polys);
    let closure = wavegen::closure_residual(n, &mu, &polys);
    let kind = wavegen::dichotomy(&constraint, &closure);
    let mut report = json!({
        "command": "travelwave",
        "n": n,
        "mu": cfg.mu,
        "constants": constants,
        "components": polys.iter().map(|p| p.to_string()).collect::<Vec<_>>(),
        "chain_residuals_zero": residuals.iter().all(|r| r.is_zero()),
        "eigen_constraint": constraint.to_string(),
        "eigen_constraint_degree": constraint.degree(),
        "closure_residual": closure.to_string(),
        "dichotomy": kind.to_string(),
    });
    if let Some(amp) = cfg.amp {
        let grid = Grid1D::new(cfg.grid, cfg.length)?;
        let offset = cfg.offset.unwrap_or(0.0);
        let profile =
            grid.sample(|x| offset + amp * (std::f64::consts::TAU * x / cfg.length).cos());
        let obj = report.as_object_mut().expect("object");
        match wavegen::generate_profile(n, cfg.mu, &constants, &profile) {
            Ok(spec) => {
                obj.insert("generated".into(), json!(true));
                if let Some(dir) = &cfg.out {
                    ensure_dir(dir)?;
                    let frame = Frame {
                        t: 0.0,
                        state: spec.field_state(),
                    };
                    write_csv(
                        &dir.join("travelwave.csv"),
                        &grid,
                        &[frame],
                        &component_names("u", n),
                    )?;
                }
            }
            Err(e @ wavegen::WaveError::Refused { .. }) => {
                obj.insert("generated".into(), json!(false));
                obj.insert("refusal".into(), json!(e.to_string()));
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(Report::ok(report))
}

// ------------------------------------------------------------------ strata

fn strata(cfg: &RunConfig) -> Result<Report, LabError> {
    if cfg.state.len() < 2 {
        return Err(LabError::Usage(
            "strata needs `state = u1,...,un` with n >= 2".into(),
        ));
    }
    let f = LaxPoly::new(cfg.state.clone())?;
    let cs = polyfam::critical_points(&f, DEFAULT_CLUSTER_TOL)?;
    let class = polyfam::classify_stratum(&f, DEFAULT_CLUSTER_TOL)?;
    let continuation = match polyfam::constant_value_continuation(&f, DEFAULT_CLUSTER_TOL) {
        Ok(v) => json!({"velocity": v.velocity, "condition": v.condition}),
        Err(e) => json!({"error": e.to_string()}),
    };
    let jacobian = cs.is_morse().then(|| {
        let j = polyfam::critical_value_jacobian(&f, &cs);
        (0..j.nrows())
            .map(|r| {
                (0..j.ncols())
                    .map(|c| complex(&j[(r, c)]))
                    .collect::<Vec<_>>()
            })
            .collect::<Vec<_>>()
    });
    Ok(Report::ok(json!({
        "command": "strata",
        "state": cfg.state,
        "signature": cs.signature,
        "ambiguous": class.ambiguous,
        "points": cs.points.iter().map(|p| json!({"location": complex(&p.location), "multiplicity": p.multiplicity})).collect::<Vec<_>>(),
        "values": cs.values.iter().map(complex).collect::<Vec<_>>(),
        "real_value": cs.real_value,
        "jacobian": jacobian,
        "constant_value_continuation": continuation,
    })))
}

// ------------------------------------------------------------------ verify

pub fn selected_checks(cfg: &RunConfig) -> Result<Vec<String>, LabError> {
    if cfg.check.is_empty() {
        return Ok(CHECK_IDS.iter().map(|s| s.to_string()).collect());
    }
    for id in &cfg.check {
        if !CHECK_IDS.contains(&id.as_str()) {
            return Err(LabError::Usage(format!(
                "unknown check `{id}`; available: {}",
                CHECK_IDS.join(", ")
            )));
        }
    }
    Ok(cfg.check.clone())
}

pub fn verify_table(outcomes: &[checks::CheckOutcome]) -> String {
    let mut text = String::from("id\tproperty\tmeasured\ttolerance\tverdict\n");
    for o in outcomes {
        let (value, bound) = match o.governing() {
            Some(m) => (
                format!("{}: {}", m.name, m.value_text()),
                m.tolerance_text(),
            ),
            None => ("-".into(), "-".into()),
        };
        text.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            o.id,
            o.property,
            value,
            bound,
            if o.pass { "PASS" } else { "FAIL" }
        ));
    }
    text
}

fn verify(cfg: &RunConfig) -> Result<Report, LabError> {
    let ids = selected_checks(cfg)?;
    let scaled = cfg.clone();
    let ctx = Context::new(cfg.seed, move |id| scaled.tol_scale(id));
    let outcomes = checks::run_checks(&ids, &ctx);
    let pass = outcomes.iter().all(|o| o.pass);
    let json = json!({
        "command": "verify",
        "pass": pass,
        "checks": outcomes,
    });
    if let Some(dir) = &cfg.out {
        ensure_dir(dir)?;
        write_json(&dir.join("verify.json"), &json)?;
    }
    Ok(Report {
        json,
        table: Some(verify_table(&outcomes)),
        pass,
    })
}
