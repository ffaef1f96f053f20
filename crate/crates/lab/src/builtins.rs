//! Named initial conditions.

use std::f64::consts::TAU;
use std::fs::File;
use std::io::BufReader;

use benney_core::io::read_frames;
use benney_core::wavegen::autonomous_from_potential;
use benney_core::{FieldState, Grid1D};

use crate::config::{RunConfig, System};
use crate::LabError;

pub const BUILTINS: [&str; 5] = [
    "autonomous-n3",
    "reduced-smooth",
    "steepening",
    "constant",
    "csv",
];

#[derive(Debug, Clone, PartialEq)]
pub struct InitialData {
    pub name: String,
    pub system: System,
    pub grid: Grid1D,
    pub state: FieldState,
}

/// Builds the initial condition named by `cfg.init`.
pub fn initial_data(cfg: &RunConfig) -> Result<InitialData, LabError> {
    let grid = Grid1D::new(cfg.grid, cfg.length)?;
    let phase = |x: f64| TAU * x / cfg.length;
    let (system, grid, state) = match cfg.init.as_str() {
        "autonomous-n3" => {
            // u = offset + amp cos(2 pi x), U = (u, 0, u²)
            let amp = cfg.amp.unwrap_or(0.1);
            let offset = cfg.offset.unwrap_or(0.0);
            let u = grid.sample(|x| offset + amp * phase(x).cos());
            (
                System::Lax,
                grid,
                autonomous_from_potential(3, &u, &cfg.lower)?,
            )
        }
        "reduced-smooth" => {
            let amp = cfg.amp.unwrap_or(0.1);
            let state = FieldState::new(vec![
                grid.sample(|x| 1.0 + amp * phase(x).sin()),
                grid.sample(|x| 0.5 + 0.5 * amp * phase(x).cos()),
            ])?;
            (System::Reduced, grid, state)
        }
        "steepening" => {
            let amp = cfg.amp.unwrap_or(0.2);
            let state = FieldState::new(vec![
                vec![1.0; grid.cells],
                grid.sample(|x| 0.5 + amp * phase(x).sin()),
            ])?;
            (System::Reduced, grid, state)
        }
        "constant" => {
            if cfg.state.len() < 2 {
                return Err(LabError::Usage(
                    "builtin `constant` needs `state` with at least two values".into(),
                ));
            }
            let system = if cfg.system == System::Reduced {
                if cfg.state.len() != 2 {
                    return Err(LabError::Usage(
                        "reduced constant state needs `state = w,v`".into(),
                    ));
                }
                System::Reduced
            } else {
                System::Lax
            };
            (system, grid, FieldState::constant(&cfg.state, grid.cells))
        }
        "csv" => {
            let path = cfg
                .csv
                .as_ref()
                .ok_or_else(|| LabError::Usage("builtin `csv` needs `csv = PATH`".into()))?;
            let file =
                File::open(path).map_err(|e| LabError::Io(format!("{}: {e}", path.display())))?;
            let data = read_frames(BufReader::new(file))?;
            let grid = data.grid()?;
            let state = data.frames[0].state.clone();
            (cfg.system, grid, state)
        }
        other => {
            return Err(LabError::Usage(format!(
                "unknown builtin `{other}`; available: {}",
                BUILTINS.join(", ")
            )))
        }
    };
    Ok(InitialData {
        name: cfg.init.clone(),
        system,
        grid,
        state,
    })
}
