//! Periodic time integration and trajectory diagnostics.
//!
//! Two schemes are provided. [`simulate_2x2`] advances the conservative
//! reduced system with a Rusanov finite-volume flux and forward Euler steps.
//! [`simulate_quasilinear`] advances `U_t + A(U) U_x = 0` by central
//! differences in space and classical RK4 in time.
//!
//! Values live at cell centres `x_i = (i + 1/2) dx`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::polyfam::{self, LaxPoly, PolyError};
use crate::reduction::{self, ReducedState};
use crate::spectral::{self, SpectralError};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SolverError {
    #[error("grid needs at least 16 cells, got {0}")]
    GridTooSmall(usize),
    #[error("domain length must be positive and finite, got {0}")]
    BadLength(f64),
    #[error("invalid solver configuration: {0}")]
    BadConfig(String),
    #[error("expected {expected} components, found {found}")]
    ComponentCount { expected: usize, found: usize },
    #[error("component has {found} cells, grid has {expected}")]
    CellCount { expected: usize, found: usize },
    #[error("initial data is not finite")]
    NonFiniteInit,
    #[error("diagnostic needs at least {needed} frames, trajectory has {found}")]
    TooFewFrames { needed: usize, found: usize },
    #[error("frame times are not strictly increasing at frame {0}")]
    FrameOrder(usize),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Poly(#[from] PolyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    pub cells: usize,
    pub length: f64,
}

impl Grid1D {
    pub const MIN_CELLS: usize = 16;

    pub fn new(cells: usize, length: f64) -> Result<Self, SolverError> {
        if cells < Self::MIN_CELLS {
            return Err(SolverError::GridTooSmall(cells));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(SolverError::BadLength(length));
        }
        Ok(Self { cells, length })
    }

    /// Unit-length periodic grid.
    pub fn unit(cells: usize) -> Result<Self, SolverError> {
        Self::new(cells, 1.0)
    }

    pub fn dx(&self) -> f64 {
        self.length / self.cells as f64
    }

    pub fn centers(&self) -> Vec<f64> {
        let dx = self.dx();
        (0..self.cells).map(|i| (i as f64 + 0.5) * dx).collect()
    }

    /// Samples `f` at every cell centre.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.centers().into_iter().map(f).collect()
    }
}

/// Component arrays over the cells of a grid, `components[k][cell]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldState {
    pub components: Vec<Vec<f64>>,
}

impl FieldState {
    pub fn new(components: Vec<Vec<f64>>) -> Result<Self, SolverError> {
        let cells = components.first().map_or(0, Vec::len);
        for c in &components {
            if c.len() != cells {
                return Err(SolverError::CellCount {
                    expected: cells,
                    found: c.len(),
                });
            }
        }
        Ok(Self { components })
    }

    /// Every cell holds the same state `u`.
    pub fn constant(u: &[f64], cells: usize) -> Self {
        Self {
            components: u.iter().map(|&x| vec![x; cells]).collect(),
        }
    }

    pub fn cells(&self) -> usize {
        self.components.first().map_or(0, Vec::len)
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn state_at(&self, cell: usize) -> Vec<f64> {
        self.components.iter().map(|c| c[cell]).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.components.iter().flatten().all(|x| x.is_finite())
    }

    /// Largest `|u_k(i+1) - u_k(i)| / dx` over components and cells.
    pub fn max_gradient(&self, dx: f64) -> f64 {
        let mut g: f64 = 0.0;
        for c in &self.components {
            let n = c.len();
            for i in 0..n {
                g = g.max((c[(i + 1) % n] - c[i]).abs() / dx);
            }
        }
        g
    }

    /// Largest absolute componentwise difference.
    pub fn max_diff(&self, other: &FieldState) -> f64 {
        self.components
            .iter()
            .flatten()
            .zip(other.components.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    fn check(&self, grid: &Grid1D, dim: Option<usize>) -> Result<(), SolverError> {
        if let Some(d) = dim {
            if self.dim() != d {
                return Err(SolverError::ComponentCount {
                    expected: d,
                    found: self.dim(),
                });
            }
        }
        for c in &self.components {
            if c.len() != grid.cells {
                return Err(SolverError::CellCount {
                    expected: grid.cells,
                    found: c.len(),
                });
            }
        }
        if !self.is_finite() {
            return Err(SolverError::NonFiniteInit);
        }
        Ok(())
    }
}

/// Averages blocks of `factor` consecutive cells.
pub fn coarsen(state: &FieldState, factor: usize) -> FieldState {
    assert!(
        factor > 0 && state.cells() % factor == 0,
        "coarsening factor must divide the cell count"
    );
    FieldState {
        components: state
            .components
            .iter()
            .map(|c| {
                c.chunks(factor)
                    .map(|b| b.iter().sum::<f64>() / factor as f64)
                    .collect()
            })
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub t: f64,
    pub state: FieldState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlowupKind {
    /// The state stopped being finite.
    NonFinite,
    /// The largest gradient exceeded the threshold times its initial value.
    GradientGrowth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupReport {
    pub detected: bool,
    pub time: Option<f64>,
    pub kind: Option<BlowupKind>,
    pub threshold: f64,
    pub initial_gradient: f64,
    /// `(t, max gradient)` for every stored frame.
    pub history: Vec<(f64, f64)>,
    /// Largest recorded gradient over the initial one.
    pub growth_factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub scheme: String,
    pub cfl: f64,
    pub visc: f64,
    pub steps: usize,
    /// Largest `max|lambda| dt / dx` over accepted steps.
    pub max_cfl: f64,
    pub blowup: BlowupReport,
    pub reached_tmax: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub grid: Grid1D,
    pub frames: Vec<Frame>,
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.frames.iter().map(|f| f.t).collect()
    }

    pub fn last(&self) -> &Frame {
        self.frames
            .last()
            .expect("trajectory has at least one frame")
    }

    /// State at time `t` by linear interpolation between stored frames;
    /// clamped to the stored time range.
    pub fn at_time(&self, t: f64) -> FieldState {
        let k = self.frames.partition_point(|f| f.t <= t);
        if k == 0 {
            return self.frames[0].state.clone();
        }
        if k == self.frames.len() {
            return self.last().state.clone();
        }
        let (a, b) = (&self.frames[k - 1], &self.frames[k]);
        let s = (t - a.t) / (b.t - a.t);
        FieldState {
            components: a
                .state
                .components
                .iter()
                .zip(&b.state.components)
                .map(|(x, y)| x.iter().zip(y).map(|(x, y)| x + s * (y - x)).collect())
                .collect(),
        }
    }
}

/// Per frame, per cell values of a scalar field; `None` marks cells where the
/// field is undefined (for example outside the hyperbolic region).
pub type CharField = Vec<Vec<Option<f64>>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub cfl: f64,
    pub tmax: f64,
    /// Artificial viscosity `eps = visc * dx` (quasi-linear scheme only).
    pub visc: f64,
    /// Output cadence; `tmax / 50` when unset.
    pub frame_dt: Option<f64>,
    /// Stop once the largest gradient exceeds this multiple of its initial
    /// value. Non-finite states always stop the run.
    pub blowup_threshold: Option<f64>,
    pub max_steps: Option<usize>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            cfl: 0.45,
            tmax: 1.0,
            visc: 0.0,
            frame_dt: None,
            blowup_threshold: Some(50.0),
            max_steps: None,
        }
    }
}

impl SolverConfig {
    pub fn with_tmax(tmax: f64) -> Self {
        Self {
            tmax,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<f64, SolverError> {
        let bad = |msg: String| Err(SolverError::BadConfig(msg));
        if !(self.cfl > 0.0 && self.cfl.is_finite()) {
            return bad(format!("cfl must be positive, got {}", self.cfl));
        }
        if !(self.tmax > 0.0 && self.tmax.is_finite()) {
            return bad(format!("tmax must be positive, got {}", self.tmax));
        }
        if !(self.visc >= 0.0 && self.visc.is_finite()) {
            return bad(format!("visc must be non-negative, got {}", self.visc));
        }
        let frame_dt = self.frame_dt.unwrap_or(self.tmax / 50.0);
        if !(frame_dt > 0.0 && frame_dt.is_finite()) {
            return bad(format!("frame_dt must be positive, got {frame_dt}"));
        }
        if let Some(th) = self.blowup_threshold {
            if !(th > 1.0 && th.is_finite()) {
                return bad(format!("blow-up threshold must exceed 1, got {th}"));
            }
        }
        Ok(frame_dt)
    }
}

/// Shared stepping loop: output cadence, blow-up stop and bookkeeping.
struct Driver {
    grid: Grid1D,
    cfg: SolverConfig,
    frame_dt: f64,
    scheme: &'static str,
}

/// A single explicit step. `speed` is the largest characteristic speed of
/// the current state; `advance` overwrites the state with the state after
/// `dt`.
trait Stepper {
    fn max_speed(&mut self, state: &FieldState) -> f64;
    fn dt_limit(&self, _dx: f64) -> f64 {
        f64::INFINITY
    }
    fn advance(&mut self, state: &mut FieldState, dt: f64);
}

impl Driver {
    fn run(&self, init: FieldState, stepper: &mut impl Stepper) -> Trajectory {
        let dx = self.grid.dx();
        let tmax = self.cfg.tmax;
        let initial_gradient = init.max_gradient(dx);
        let threshold = self.cfg.blowup_threshold.unwrap_or(f64::INFINITY);

        let mut frames = vec![Frame {
            t: 0.0,
            state: init.clone(),
        }];
        let mut state = init;
        let mut t = 0.0;
        let mut next_frame = 1usize;
        let mut steps = 0usize;
        let mut max_cfl: f64 = 0.0;
        let mut stop: Option<(f64, BlowupKind)> = None;

        while t < tmax {
            if self.cfg.max_steps.is_some_and(|m| steps >= m) {
                break;
            }
            let target = (next_frame as f64 * self.frame_dt).min(tmax);
            let speed = stepper.max_speed(&state);
            let mut dt = if speed > 0.0 {
                self.cfg.cfl * dx / speed
            } else {
                f64::INFINITY
            };
            dt = dt.min(stepper.dt_limit(dx));
            let at_frame = dt >= target - t;
            if at_frame {
                dt = target - t;
            }
            stepper.advance(&mut state, dt);
            steps += 1;
            max_cfl = max_cfl.max(speed * dt / dx);
            t = if at_frame { target } else { t + dt };

            if !state.is_finite() {
                stop = Some((t, BlowupKind::NonFinite));
                break;
            }
            let grad = state.max_gradient(dx);
            let blown = initial_gradient > 0.0 && grad > threshold * initial_gradient;
            if at_frame || blown {
                frames.push(Frame {
                    t,
                    state: state.clone(),
                });
                if at_frame {
                    next_frame += 1;
                }
            }
            if blown {
                stop = Some((t, BlowupKind::GradientGrowth));
                break;
            }
        }
        // a run cut short by the step cap still ends on a frame
        if frames.last().is_some_and(|f| f.t < t) && state.is_finite() {
            frames.push(Frame { t, state });
        }

        let mut blowup = blowup_from_frames(&frames, dx, self.cfg.blowup_threshold.unwrap_or(50.0));
        if let Some((time, kind)) = stop {
            blowup.detected = true;
            blowup.time = Some(time);
            blowup.kind = Some(kind);
        } else {
            blowup.detected = false;
            blowup.time = None;
            blowup.kind = None;
        }
        let reached_tmax = stop.is_none() && frames.last().is_some_and(|f| f.t >= tmax);
        Trajectory {
            grid: self.grid,
            frames,
            meta: TrajectoryMeta {
                scheme: self.scheme.to_string(),
                cfl: self.cfg.cfl,
                visc: self.cfg.visc,
                steps,
                max_cfl,
                blowup,
                reached_tmax,
            },
        }
    }
}

struct Rusanov {
    dx: f64,
    flux_w: Vec<f64>,
    flux_v: Vec<f64>,
}

impl Stepper for Rusanov {
    fn max_speed(&mut self, state: &FieldState) -> f64 {
        let (w, v) = (&state.components[0], &state.components[1]);
        w.iter()
            .zip(v)
            .map(|(w, v)| ReducedState::new(*w, *v).max_speed())
            .fold(0.0, f64::max)
    }

    fn advance(&mut self, state: &mut FieldState, dt: f64) {
        let n = state.cells();
        let (w, v) = (&state.components[0], &state.components[1]);
        // interface i + 1/2 sits between cells i and i + 1
        for i in 0..n {
            let j = (i + 1) % n;
            let l = ReducedState::new(w[i], v[i]);
            let r = ReducedState::new(w[j], v[j]);
            let a = l.max_speed().max(r.max_speed());
            let (fl, gl) = reduction::flux(l);
            let (fr, gr) = reduction::flux(r);
            self.flux_w[i] = 0.5 * (fl + fr) - 0.5 * a * (r.w - l.w);
            self.flux_v[i] = 0.5 * (gl + gr) - 0.5 * a * (r.v - l.v);
        }
        let ratio = dt / self.dx;
        for (k, flux) in [&self.flux_w, &self.flux_v].into_iter().enumerate() {
            let c = &mut state.components[k];
            for i in 0..n {
                let im = (i + n - 1) % n;
                c[i] -= ratio * (flux[i] - flux[im]);
            }
        }
    }
}

/// Rusanov finite-volume evolution of `(w, v)`; `init.components = [w, v]`.
pub fn simulate_2x2(
    grid: Grid1D,
    init: &FieldState,
    cfg: &SolverConfig,
) -> Result<Trajectory, SolverError> {
    let frame_dt = cfg.validate()?;
    init.check(&grid, Some(2))?;
    let mut stepper = Rusanov {
        dx: grid.dx(),
        flux_w: vec![0.0; grid.cells],
        flux_v: vec![0.0; grid.cells],
    };
    let driver = Driver {
        grid,
        cfg: cfg.clone(),
        frame_dt,
        scheme: "rusanov-euler",
    };
    Ok(driver.run(init.clone(), &mut stepper))
}

struct CentralRk4 {
    dx: f64,
    eps: f64,
}

impl CentralRk4 {
    /// `-A(U) U_x + eps U_xx` with central differences.
    fn rhs(&self, s: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = s.len();
        let cells = s[0].len();
        let inv2dx = 0.5 / self.dx;
        let diff = self.eps / (self.dx * self.dx);
        let mut out = vec![vec![0.0; cells]; n];
        for i in 0..cells {
            let ip = (i + 1) % cells;
            let im = (i + cells - 1) % cells;
            let ux = |k: usize| (s[k][ip] - s[k][im]) * inv2dx;
            let u1x = ux(0);
            for k in 0..n {
                let mut a_ux = if k + 1 < n { ux(k + 1) } else { 0.0 };
                if k >= 1 {
                    a_ux -= (n - k) as f64 * s[k - 1][i] * u1x;
                }
                let mut r = -a_ux;
                if diff > 0.0 {
                    r += diff * (s[k][ip] - 2.0 * s[k][i] + s[k][im]);
                }
                out[k][i] = r;
            }
        }
        out
    }
}

fn axpy(base: &[Vec<f64>], h: f64, dir: &[Vec<f64>]) -> Vec<Vec<f64>> {
    base.iter()
        .zip(dir)
        .map(|(b, d)| b.iter().zip(d).map(|(b, d)| b + h * d).collect())
        .collect()
}

/// Largest `|lambda|` of `A(U)` at one state: modulus of the roots of `F_p`,
/// falling back to the Fujiwara bound if the root finder fails.
fn spectral_radius(u: &[f64]) -> f64 {
    let Ok(f) = LaxPoly::new(u.to_vec()) else {
        return f64::INFINITY;
    };
    match polyfam::derivative_roots(&f) {
        Ok(r) => r.iter().map(|z| z.norm()).fold(0.0, f64::max),
        Err(_) => {
            let c = f.derivative_coeffs();
            let deg = c.len() - 1;
            (1..=deg)
                .map(|k| 2.0 * c[k].abs().powf(1.0 / k as f64))
                .fold(0.0, f64::max)
        }
    }
}

impl Stepper for CentralRk4 {
    fn max_speed(&mut self, state: &FieldState) -> f64 {
        (0..state.cells())
            .map(|c| spectral_radius(&state.state_at(c)))
            .fold(0.0, f64::max)
    }

    fn dt_limit(&self, dx: f64) -> f64 {
        if self.eps > 0.0 {
            0.5 * dx * dx / self.eps
        } else {
            f64::INFINITY
        }
    }

    fn advance(&mut self, state: &mut FieldState, dt: f64) {
        let s = &state.components;
        let k1 = self.rhs(s);
        let k2 = self.rhs(&axpy(s, 0.5 * dt, &k1));
        let k3 = self.rhs(&axpy(s, 0.5 * dt, &k2));
        let k4 = self.rhs(&axpy(s, dt, &k3));
        for (k, comp) in state.components.iter_mut().enumerate() {
            for i in 0..comp.len() {
                comp[i] += dt / 6.0 * (k1[k][i] + 2.0 * k2[k][i] + 2.0 * k3[k][i] + k4[k][i]);
            }
        }
    }
}

/// Central-difference / RK4 evolution of the `n`-component Lax system,
/// `n = init.components.len()`.
pub fn simulate_quasilinear(
    grid: Grid1D,
    init: &FieldState,
    cfg: &SolverConfig,
) -> Result<Trajectory, SolverError> {
    let frame_dt = cfg.validate()?;
    if init.dim() < 2 {
        return Err(SolverError::ComponentCount {
            expected: 2,
            found: init.dim(),
        });
    }
    init.check(&grid, None)?;
    let mut stepper = CentralRk4 {
        dx: grid.dx(),
        eps: cfg.visc * grid.dx(),
    };
    let driver = Driver {
        grid,
        cfg: cfg.clone(),
        frame_dt,
        scheme: "central-rk4",
    };
    Ok(driver.run(init.clone(), &mut stepper))
}

fn blowup_from_frames(frames: &[Frame], dx: f64, threshold: f64) -> BlowupReport {
    let history: Vec<(f64, f64)> = frames
        .iter()
        .map(|f| (f.t, f.state.max_gradient(dx)))
        .collect();
    let initial_gradient = history.first().map_or(0.0, |h| h.1);
    let mut report = BlowupReport {
        detected: false,
        time: None,
        kind: None,
        threshold,
        initial_gradient,
        history: Vec::new(),
        growth_factor: 1.0,
    };
    for (k, &(t, g)) in history.iter().enumerate() {
        if !frames[k].state.is_finite() {
            report.detected = true;
            report.time = Some(t);
            report.kind = Some(BlowupKind::NonFinite);
            break;
        }
        if initial_gradient > 0.0 {
            report.growth_factor = report.growth_factor.max(g / initial_gradient);
            if g > threshold * initial_gradient {
                report.detected = true;
                report.time = Some(t);
                report.kind = Some(BlowupKind::GradientGrowth);
                break;
            }
        }
    }
    report.history = history;
    report
}

/// Scans stored frames for gradient growth beyond `threshold` times the
/// initial largest gradient, or for non-finite values.
pub fn detect_blowup(traj: &Trajectory, threshold: f64) -> BlowupReport {
    blowup_from_frames(&traj.frames, traj.grid.dx(), threshold)
}

pub fn require_frames(traj: &Trajectory, needed: usize) -> Result<(), SolverError> {
    if traj.frames.len() < needed {
        return Err(SolverError::TooFewFrames {
            needed,
            found: traj.frames.len(),
        });
    }
    for k in 1..traj.frames.len() {
        if !(traj.frames[k].t > traj.frames[k - 1].t) {
            return Err(SolverError::FrameOrder(k));
        }
    }
    Ok(())
}

/// Weights of the three-point first-derivative formula at `t0` on the
/// possibly nonuniform stencil `tm < t0 < tp`.
pub fn time_weights(tm: f64, t0: f64, tp: f64) -> (f64, f64, f64) {
    let h1 = t0 - tm;
    let h2 = tp - t0;
    (
        -h2 / (h1 * (h1 + h2)),
        (h2 - h1) / (h1 * h2),
        h1 / (h2 * (h1 + h2)),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualNorms {
    pub sup: f64,
    /// Root mean square over all evaluated points.
    pub l2: f64,
}

/// Central time and space derivatives of every component at every interior
/// frame: `(frame index, u, u_t, u_x)`.
fn derivatives(
    traj: &Trajectory,
) -> Result<Vec<(usize, Vec<Vec<f64>>, Vec<Vec<f64>>)>, SolverError> {
    require_frames(traj, 3)?;
    let dx = traj.grid.dx();
    let mut out = Vec::with_capacity(traj.frames.len() - 2);
    for k in 1..traj.frames.len() - 1 {
        let (wm, _, wp) =
            time_weights(traj.frames[k - 1].t, traj.frames[k].t, traj.frames[k + 1].t);
        let prev = &traj.frames[k - 1].state.components;
        let cur = &traj.frames[k].state.components;
        let next = &traj.frames[k + 1].state.components;
        let mut ut = Vec::with_capacity(cur.len());
        let mut ux = Vec::with_capacity(cur.len());
        for c in 0..cur.len() {
            let cells = cur[c].len();
            ut.push(
                (0..cells)
                    .map(|i| wm * (prev[c][i] - cur[c][i]) + wp * (next[c][i] - cur[c][i]))
                    .collect(),
            );
            ux.push(
                (0..cells)
                    .map(|i| {
                        (cur[c][(i + 1) % cells] - cur[c][(i + cells - 1) % cells]) / (2.0 * dx)
                    })
                    .collect(),
            );
        }
        out.push((k, ut, ux));
    }
    Ok(out)
}

/// Discrete residual of `F_t + p F_x - u_x F_p = 0` (with `u = u1`) at each
/// `p` in `p_samples`, over every cell of every interior frame.
pub fn conservation_residual(
    traj: &Trajectory,
    p_samples: &[f64],
) -> Result<ResidualNorms, SolverError> {
    let derivs = derivatives(traj)?;
    let mut sup: f64 = 0.0;
    let mut sq = 0.0;
    let mut count = 0usize;
    for (k, ut, ux) in &derivs {
        let cur = &traj.frames[*k].state.components;
        let n = cur.len();
        for i in 0..traj.grid.cells {
            let u: Vec<f64> = cur.iter().map(|c| c[i]).collect();
            let f = LaxPoly::new(u)?;
            let fp_coeffs = f.derivative_coeffs();
            for &p in p_samples {
                // sum_k (u_k,t + p u_k,x) p^(n-k)
                let mut ft_pfx = 0.0;
                for c in 0..n {
                    ft_pfx = ft_pfx * p + (ut[c][i] + p * ux[c][i]);
                }
                let fp = fp_coeffs.iter().fold(0.0, |acc, c| acc * p + c);
                let r = ft_pfx - ux[0][i] * fp;
                sup = sup.max(r.abs());
                sq += r * r;
                count += 1;
            }
        }
    }
    Ok(ResidualNorms {
        sup,
        l2: (sq / count.max(1) as f64).sqrt(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemResidual {
    /// `field[k][cell]` is the max-norm over components of
    /// `U_t + A(U) U_x` at interior frame `k + 1`.
    pub field: Vec<Vec<f64>>,
    pub sup: f64,
    pub l2: f64,
}

/// Pointwise residual of `U_t + A(U) U_x = 0` by central differences.
pub fn system_residual(traj: &Trajectory) -> Result<SystemResidual, SolverError> {
    let derivs = derivatives(traj)?;
    let mut field = Vec::with_capacity(derivs.len());
    let mut sup: f64 = 0.0;
    let mut sq = 0.0;
    let mut count = 0usize;
    for (k, ut, ux) in &derivs {
        let cur = &traj.frames[*k].state.components;
        let n = cur.len();
        let row: Vec<f64> = (0..traj.grid.cells)
            .map(|i| {
                (0..n)
                    .map(|c| {
                        let mut r = ut[c][i];
                        if c + 1 < n {
                            r += ux[c + 1][i];
                        }
                        if c >= 1 {
                            r -= (n - c) as f64 * cur[c - 1][i] * ux[0][i];
                        }
                        r.abs()
                    })
                    .fold(0.0, f64::max)
            })
            .collect();
        for &r in &row {
            sup = sup.max(r);
            sq += r * r;
            count += 1;
        }
        field.push(row);
    }
    Ok(SystemResidual {
        field,
        sup,
        l2: (sq / count.max(1) as f64).sqrt(),
    })
}

/// Speed and Riemann-invariant fields of the `index`-th real eigenvalue
/// (ascending) of the Lax system, from the critical points and values of `F`.
pub fn lax_characteristic_fields(
    traj: &Trajectory,
    index: usize,
) -> Result<(CharField, CharField), SolverError> {
    let states: Vec<FieldState> = traj.frames.iter().map(|f| f.state.clone()).collect();
    let rf = spectral::riemann_fields(&states)?;
    let mut speed = Vec::with_capacity(states.len());
    let mut invariant = Vec::with_capacity(states.len());
    for k in 0..states.len() {
        let (sp, inv): (Vec<_>, Vec<_>) = (0..traj.grid.cells)
            .map(|c| match rf.real_branch(k, c, index) {
                Some((l, r)) => (Some(l), Some(r)),
                None => (None, None),
            })
            .unzip();
        speed.push(sp);
        invariant.push(inv);
    }
    Ok((speed, invariant))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicTrace {
    /// `(t, x)` at each stored frame time reached, `x` unwrapped.
    pub path: Vec<(f64, f64)>,
    /// Invariant sampled along the path.
    pub invariant: Vec<f64>,
    /// `max_t |r(t) - r(0)|`.
    pub drift: f64,
    /// Reason the path stopped before the last frame.
    pub truncated: Option<String>,
}

/// Periodic linear interpolation of one frame row at position `x`.
fn interp_row(row: &[Option<f64>], grid: &Grid1D, x: f64) -> Option<f64> {
    let n = grid.cells;
    let s = (x / grid.dx() - 0.5).rem_euclid(n as f64);
    let i = (s.floor() as usize).min(n - 1);
    let frac = s - i as f64;
    let a = row[i]?;
    let b = row[(i + 1) % n]?;
    Some(a + frac * (b - a))
}

/// Integrates `dx/dt = lambda(t, x)` from `x0` at the first frame with RK4,
/// using linear interpolation in space and in time between frames, and
/// samples the invariant at every frame time along the path.
pub fn trace_characteristic(
    traj: &Trajectory,
    speed: &CharField,
    invariant: &CharField,
    x0: f64,
) -> Result<CharacteristicTrace, SolverError> {
    require_frames(traj, 2)?;
    let grid = traj.grid;
    let frames = &traj.frames;
    // speed inside frame interval (k-1, k) at fraction s of the interval
    let lambda = |k: usize, s: f64, x: f64| -> Option<f64> {
        let a = interp_row(&speed[k - 1], &grid, x)?;
        let b = interp_row(&speed[k], &grid, x)?;
        Some(a + s * (b - a))
    };
    let mut trace = CharacteristicTrace {
        path: Vec::with_capacity(frames.len()),
        invariant: Vec::with_capacity(frames.len()),
        drift: 0.0,
        truncated: None,
    };
    let lost = |k: usize| format!("left the region where the eigenvalue is real at frame {k}");
    let Some(r0) = interp_row(&invariant[0], &grid, x0) else {
        trace.truncated = Some(lost(0));
        return Ok(trace);
    };
    trace.path.push((frames[0].t, x0));
    trace.invariant.push(r0);
    let mut x = x0;
    for k in 1..frames.len() {
        let h = frames[k].t - frames[k - 1].t;
        let step = (|| {
            let k1 = lambda(k, 0.0, x)?;
            let k2 = lambda(k, 0.5, x + 0.5 * h * k1)?;
            let k3 = lambda(k, 0.5, x + 0.5 * h * k2)?;
            let k4 = lambda(k, 1.0, x + h * k3)?;
            Some(x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
        })();
        let Some(xn) = step else {
            trace.truncated = Some(lost(k));
            break;
        };
        let Some(r) = interp_row(&invariant[k], &grid, xn) else {
            trace.truncated = Some(lost(k));
            break;
        };
        x = xn;
        trace.path.push((frames[k].t, x));
        trace.invariant.push(r);
        trace.drift = trace.drift.max((r - r0).abs());
    }
    Ok(trace)
}

/// Characteristic fields of the reduced system, one family.
pub fn reduced_characteristic_fields(
    traj: &Trajectory,
    family: reduction::Family,
) -> (CharField, CharField) {
    reduction::characteristic_fields(traj, family)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn smooth_2x2(grid: &Grid1D) -> FieldState {
        FieldState::new(vec![
            grid.sample(|x| 1.0 + 0.1 * (TAU * x).sin()),
            grid.sample(|x| 0.5 + 0.05 * (TAU * x).cos()),
        ])
        .unwrap()
    }

    /// Autonomous `(u, 0, u²)` with `u < 0` everywhere, which is strictly
    /// hyperbolic, so the central scheme is stable on it.
    fn hyperbolic_autonomous(grid: &Grid1D) -> FieldState {
        let u = grid.sample(|x| -0.5 + 0.1 * (TAU * x).cos());
        let u2 = u.iter().map(|x| x * x).collect();
        FieldState::new(vec![u, vec![0.0; grid.cells], u2]).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert_eq!(Grid1D::unit(8), Err(SolverError::GridTooSmall(8)));
        assert!(matches!(
            Grid1D::new(16, 0.0),
            Err(SolverError::BadLength(_))
        ));
        let g = Grid1D::unit(16).unwrap();
        assert_eq!(g.dx(), 1.0 / 16.0);
        assert_eq!(g.centers()[0], 0.5 / 16.0);
    }

    #[test]
    fn time_weights_differentiate_quadratics() {
        let (tm, t0, tp) = (0.1, 0.35, 0.4);
        let (a, b, c) = time_weights(tm, t0, tp);
        let f = |t: f64| 3.0 * t * t - t + 2.0;
        let d = a * f(tm) + b * f(t0) + c * f(tp);
        assert!((d - (6.0 * t0 - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn constant_states_are_exact() {
        let grid = Grid1D::unit(32).unwrap();
        let cfg = SolverConfig::with_tmax(0.5);
        let init = FieldState::constant(&[0.7, -0.2], 32);
        let traj = simulate_2x2(grid, &init, &cfg).unwrap();
        assert!(traj.meta.reached_tmax);
        for f in &traj.frames {
            assert!(f.state.max_diff(&init) < 1e-14);
        }
        let init = FieldState::constant(&[-0.3, 0.1, 0.05], 32);
        let traj = simulate_quasilinear(grid, &init, &cfg).unwrap();
        assert!(traj.meta.reached_tmax);
        assert_eq!(traj.last().state, init);
        assert!(!detect_blowup(&traj, 50.0).detected);
        let r = conservation_residual(&traj, &[-1.0, 0.0, 1.0]).unwrap();
        assert_eq!(r.sup, 0.0);
        assert_eq!(system_residual(&traj).unwrap().sup, 0.0);
        let (sp, inv) = lax_characteristic_fields(&traj, 0).unwrap();
        let tr = trace_characteristic(&traj, &sp, &inv, 0.3).unwrap();
        assert!(tr.truncated.is_none());
        assert_eq!(tr.drift, 0.0);
        let lambda = sp[0][0].unwrap();
        let (t, x) = *tr.path.last().unwrap();
        assert!((x - (0.3 + lambda * t)).abs() < 1e-12);
    }

    #[test]
    fn zero_state_does_not_stall() {
        let grid = Grid1D::unit(16).unwrap();
        let traj = simulate_quasilinear(
            grid,
            &FieldState::constant(&[0.0; 3], 16),
            &SolverConfig::with_tmax(0.1),
        )
        .unwrap();
        assert!(traj.meta.reached_tmax);
        assert_eq!(traj.frames.len(), 51);
    }

    #[test]
    fn frames_on_cadence_and_cfl_respected() {
        let grid = Grid1D::unit(64).unwrap();
        let cfg = SolverConfig {
            tmax: 0.1,
            frame_dt: Some(0.03),
            ..SolverConfig::default()
        };
        let traj = simulate_2x2(grid, &smooth_2x2(&grid), &cfg).unwrap();
        let t = traj.times();
        assert_eq!(t.len(), 5);
        for (k, want) in [0.0, 0.03, 0.06, 0.09, 0.1].iter().enumerate() {
            assert!((t[k] - want).abs() < 1e-15, "{t:?}");
        }
        assert!(traj.meta.max_cfl <= 0.45 + 1e-12);
        let traj = simulate_quasilinear(grid, &hyperbolic_autonomous(&grid), &cfg).unwrap();
        assert!(traj.meta.max_cfl <= 0.45 + 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        let grid = Grid1D::unit(16).unwrap();
        let cfg = SolverConfig::default();
        let three = FieldState::constant(&[1.0, 1.0, 1.0], 16);
        assert!(matches!(
            simulate_2x2(grid, &three, &cfg),
            Err(SolverError::ComponentCount {
                expected: 2,
                found: 3
            })
        ));
        let short = FieldState::constant(&[1.0, 1.0], 15);
        assert!(matches!(
            simulate_2x2(grid, &short, &cfg),
            Err(SolverError::CellCount { .. })
        ));
        let mut nan = FieldState::constant(&[1.0, 1.0], 16);
        nan.components[0][3] = f64::NAN;
        assert_eq!(
            simulate_2x2(grid, &nan, &cfg),
            Err(SolverError::NonFiniteInit)
        );
        let bad = SolverConfig {
            cfl: -1.0,
            ..SolverConfig::default()
        };
        assert!(matches!(
            simulate_2x2(grid, &FieldState::constant(&[1.0, 1.0], 16), &bad),
            Err(SolverError::BadConfig(_))
        ));
    }

    #[test]
    fn rusanov_conserves_sums() {
        let grid = Grid1D::unit(128).unwrap();
        let init = smooth_2x2(&grid);
        let cfg = SolverConfig {
            tmax: 0.3,
            ..SolverConfig::default()
        };
        let traj = simulate_2x2(grid, &init, &cfg).unwrap();
        for k in 0..2 {
            let s0: f64 = init.components[k].iter().sum();
            for f in &traj.frames {
                let s: f64 = f.state.components[k].iter().sum();
                assert!((s - s0).abs() <= 1e-13 * s0.abs(), "component {k}");
            }
        }
    }

    #[test]
    fn deterministic_runs() {
        let grid = Grid1D::unit(64).unwrap();
        let cfg = SolverConfig::with_tmax(0.2);
        let a = simulate_2x2(grid, &smooth_2x2(&grid), &cfg).unwrap();
        let b = simulate_2x2(grid, &smooth_2x2(&grid), &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rusanov_self_convergence_is_first_order() {
        let cfg = SolverConfig::with_tmax(0.1);
        let run = |n: usize| {
            let grid = Grid1D::unit(n).unwrap();
            simulate_2x2(grid, &smooth_2x2(&grid), &cfg)
                .unwrap()
                .last()
                .state
                .clone()
        };
        let reference = run(1024);
        let e1 = coarsen(&reference, 16).max_diff(&run(64));
        let e2 = coarsen(&reference, 8).max_diff(&run(128));
        let order = (e1 / e2).log2();
        assert!(order > 0.8, "order {order}");
    }

    #[test]
    fn hyperbolic_autonomous_state_is_stationary_to_second_order() {
        let cfg = SolverConfig::with_tmax(0.5);
        let err = |n: usize| {
            let grid = Grid1D::unit(n).unwrap();
            let init = hyperbolic_autonomous(&grid);
            let traj = simulate_quasilinear(grid, &init, &cfg).unwrap();
            assert!(traj.meta.reached_tmax);
            (
                traj.last().state.max_diff(&init),
                conservation_residual(&traj, &[-1.0, 0.0, 1.0]).unwrap().sup,
            )
        };
        let (e1, r1) = err(32);
        let (e2, r2) = err(64);
        assert!((e1 / e2).log2() > 1.8, "{e1} {e2}");
        assert!(r2 < r1);
    }

    #[test]
    fn steepening_gradient_grows() {
        // v bounded away from zero: both families genuinely nonlinear
        let grid = Grid1D::unit(512).unwrap();
        let init = FieldState::new(vec![
            vec![1.0; 512],
            grid.sample(|x| 0.5 + 0.2 * (TAU * x).sin()),
        ])
        .unwrap();
        let cfg = SolverConfig {
            tmax: 1.0,
            ..SolverConfig::default()
        };
        let traj = simulate_2x2(grid, &init, &cfg).unwrap();
        let report = detect_blowup(&traj, 50.0);
        assert!(report.growth_factor >= 10.0, "{}", report.growth_factor);
        let early: Vec<f64> = report
            .history
            .iter()
            .filter(|h| h.0 <= 0.5)
            .map(|h| h.1)
            .collect();
        assert!(early.len() > 5);
        for w in early.windows(2) {
            assert!(w[1] >= w[0], "{early:?}");
        }
    }

    #[test]
    fn nonfinite_state_is_reported() {
        let grid = Grid1D::unit(16).unwrap();
        // elliptic data with viscosity off and a huge step count will
        // eventually overflow; a direct NaN check is simpler
        let mut f = Frame {
            t: 0.0,
            state: FieldState::constant(&[1.0, 1.0], 16),
        };
        let a = f.clone();
        f.t = 1.0;
        f.state.components[1][2] = f64::INFINITY;
        let traj = Trajectory {
            grid,
            frames: vec![a, f],
            meta: simulate_2x2(
                grid,
                &FieldState::constant(&[1.0, 1.0], 16),
                &SolverConfig::with_tmax(0.01),
            )
            .unwrap()
            .meta,
        };
        let r = detect_blowup(&traj, 50.0);
        assert_eq!(r.kind, Some(BlowupKind::NonFinite));
        assert_eq!(r.time, Some(1.0));
    }

    #[test]
    fn corrupted_frame_gives_large_residual() {
        let grid = Grid1D::unit(64).unwrap();
        let cfg = SolverConfig::with_tmax(0.1);
        let mut traj = simulate_quasilinear(grid, &hyperbolic_autonomous(&grid), &cfg).unwrap();
        let clean = system_residual(&traj).unwrap().sup;
        for x in traj.frames[10].state.components[0].iter_mut() {
            *x += 0.5;
        }
        let dirty = system_residual(&traj).unwrap().sup;
        assert!(clean < 1e-2 && dirty > 1.0, "{clean} {dirty}");
    }

    #[test]
    fn step_cap_stops_run() {
        let grid = Grid1D::unit(32).unwrap();
        let cfg = SolverConfig {
            max_steps: Some(7),
            ..SolverConfig::default()
        };
        let traj = simulate_2x2(grid, &smooth_2x2(&grid), &cfg).unwrap();
        assert_eq!(traj.meta.steps, 7);
        assert!(!traj.meta.reached_tmax);
        assert!(traj.last().t > 0.0);
    }

    #[test]
    fn interpolation_in_time() {
        let grid = Grid1D::unit(16).unwrap();
        let cfg = SolverConfig::with_tmax(0.1);
        let traj = simulate_2x2(grid, &smooth_2x2(&grid), &cfg).unwrap();
        let t = 0.5 * (traj.frames[2].t + traj.frames[3].t);
        let mid = traj.at_time(t);
        let expect =
            0.5 * (traj.frames[2].state.components[0][5] + traj.frames[3].state.components[0][5]);
        assert!((mid.components[0][5] - expect).abs() < 1e-15);
    }

    #[test]
    fn coarsen_averages() {
        let s = FieldState::new(vec![vec![1.0, 3.0, 5.0, 7.0]]).unwrap();
        assert_eq!(coarsen(&s, 2).components[0], vec![2.0, 6.0]);
    }
}
