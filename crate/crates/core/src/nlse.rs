//! Split-step spectral propagation of the coupled nonlinear Schrodinger
//! system
//!
//! ```text
//! dUx/dz + b1 dUx/dt = i D/2 d2Ux/dt2 + i b Ux + i (A|Ux|^2 + B|Uy|^2) Ux + i C Uy^2 Ux*
//! dUy/dz - b1 dUy/dt = i D/2 d2Uy/dt2 - i b Uy + i (A|Uy|^2 + B|Ux|^2) Uy + i C Ux^2 Uy*
//! ```
//!
//! Each step of size `h` is linear half-step, full nonlinear step, linear
//! half-step. The linear half-steps are exact spectral multipliers with the
//! coefficients sampled at the half-step midpoints (`zeta_k + h/4` and
//! `zeta_k + 3h/4`). The field entering the nonlinear substep (the "stage"
//! field) is what the fluctuation solvers linearize around.

use std::borrow::Cow;
use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Error, Result};
use crate::lattice::{FiberProfile, PolarizedField, Spectral, TemporalGrid, C64};

/// Largest Runge-Kutta substep used for the general nonlinear substep.
pub const RK4_MAX_SUBSTEP: f64 = 1e-3;

/// Abort threshold on the growth of the peak intensity.
pub const BLOWUP_FACTOR: f64 = 1e6;

/// Row-major real 4x4 Jacobian acting on `(Re vx, Im vx, Re vy, Im vy)`.
pub type Jacobian4 = [f64; 16];

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Default step count, `ceil(200 L)`.
pub fn default_steps(length: f64) -> usize {
    ((200.0 * length).ceil() as usize).max(1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Half {
    First,
    Second,
}

/// Polarization basis in which the nonlinear substep is a pure phase rotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseBasis {
    /// `C = 0`: self/cross phase `(A, B)` on `(Ux, Uy)`.
    Linear,
    /// `A = B + C`: self/cross phase `(B, B + 2C)` on
    /// `(Ux + iUy, Ux - iUy) / sqrt(2)`.
    Circular,
}

impl PhaseBasis {
    fn forward(self, x: C64, y: C64) -> (C64, C64) {
        match self {
            PhaseBasis::Linear => (x, y),
            PhaseBasis::Circular => ((x + I * y) * FRAC_1_SQRT_2, (x - I * y) * FRAC_1_SQRT_2),
        }
    }

    fn backward(self, p: C64, m: C64) -> (C64, C64) {
        match self {
            PhaseBasis::Linear => (p, m),
            PhaseBasis::Circular => ((p + m) * FRAC_1_SQRT_2, -I * (p - m) * FRAC_1_SQRT_2),
        }
    }
}

/// How the nonlinear substep is integrated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NonlinearScheme {
    /// Exact solution: intensities are invariant, phases rotate.
    Phase {
        basis: PhaseBasis,
        self_coef: f64,
        cross_coef: f64,
    },
    /// Classical fourth-order Runge-Kutta with `substeps` equal substeps.
    RungeKutta { substeps: usize },
}

impl NonlinearScheme {
    pub fn select(profile: &FiberProfile, d_zeta: f64) -> Self {
        let (a, b, c) = (profile.self_phase, profile.cross_phase, profile.coherent);
        let scale = a.abs().max(b.abs()).max(c.abs()).max(1.0);
        if c == 0.0 {
            NonlinearScheme::Phase {
                basis: PhaseBasis::Linear,
                self_coef: a,
                cross_coef: b,
            }
        } else if (a - b - c).abs() <= 1e-14 * scale {
            NonlinearScheme::Phase {
                basis: PhaseBasis::Circular,
                self_coef: b,
                cross_coef: b + 2.0 * c,
            }
        } else {
            NonlinearScheme::RungeKutta {
                substeps: ((d_zeta / RK4_MAX_SUBSTEP).ceil() as usize).max(1),
            }
        }
    }
}

/// Nonlinear vector field `N(U)` of the coupled system.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Kerr {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Kerr {
    fn of(profile: &FiberProfile) -> Self {
        Self {
            a: profile.self_phase,
            b: profile.cross_phase,
            c: profile.coherent,
        }
    }

    pub fn field(&self, x: C64, y: C64) -> (C64, C64) {
        let (ix, iy) = (x.norm_sqr(), y.norm_sqr());
        (
            I * ((self.a * ix + self.b * iy) * x + self.c * y * y * x.conj()),
            I * ((self.a * iy + self.b * ix) * y + self.c * x * x * y.conj()),
        )
    }

    /// Directional derivative of [`Kerr::field`] at `(x, y)` along `(dx, dy)`.
    pub fn tangent(&self, x: C64, y: C64, dx: C64, dy: C64) -> (C64, C64) {
        let (a, b, c) = (self.a, self.b, self.c);
        let (ix, iy) = (x.norm_sqr(), y.norm_sqr());
        let tx = (2.0 * a * ix + b * iy) * dx
            + (a * x * x + c * y * y) * dx.conj()
            + (2.0 * c * x.conj() * y + b * x * y.conj()) * dy
            + b * x * y * dy.conj();
        let ty = (2.0 * a * iy + b * ix) * dy
            + (a * y * y + c * x * x) * dy.conj()
            + (2.0 * c * y.conj() * x + b * y * x.conj()) * dx
            + b * x * y * dx.conj();
        (I * tx, I * ty)
    }
}

fn rk4_step(kerr: &Kerr, x: C64, y: C64, h: f64) -> (C64, C64) {
    let (k1x, k1y) = kerr.field(x, y);
    let (k2x, k2y) = kerr.field(x + 0.5 * h * k1x, y + 0.5 * h * k1y);
    let (k3x, k3y) = kerr.field(x + 0.5 * h * k2x, y + 0.5 * h * k2y);
    let (k4x, k4y) = kerr.field(x + h * k3x, y + h * k3y);
    (
        x + h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x),
        y + h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y),
    )
}

/// One RK4 step for the state together with tangent directions (forward-mode
/// differentiation of the scheme itself).
fn rk4_step_tangent(kerr: &Kerr, x: C64, y: C64, dirs: &mut [(C64, C64); 4], h: f64) -> (C64, C64) {
    let (k1x, k1y) = kerr.field(x, y);
    let (x2, y2) = (x + 0.5 * h * k1x, y + 0.5 * h * k1y);
    let (k2x, k2y) = kerr.field(x2, y2);
    let (x3, y3) = (x + 0.5 * h * k2x, y + 0.5 * h * k2y);
    let (k3x, k3y) = kerr.field(x3, y3);
    let (x4, y4) = (x + h * k3x, y + h * k3y);
    let (k4x, k4y) = kerr.field(x4, y4);
    for d in dirs.iter_mut() {
        let (dx, dy) = *d;
        let (t1x, t1y) = kerr.tangent(x, y, dx, dy);
        let (t2x, t2y) = kerr.tangent(x2, y2, dx + 0.5 * h * t1x, dy + 0.5 * h * t1y);
        let (t3x, t3y) = kerr.tangent(x3, y3, dx + 0.5 * h * t2x, dy + 0.5 * h * t2y);
        let (t4x, t4y) = kerr.tangent(x4, y4, dx + h * t3x, dy + h * t3y);
        *d = (
            dx + h / 6.0 * (t1x + 2.0 * t2x + 2.0 * t3x + t4x),
            dy + h / 6.0 * (t1y + 2.0 * t2y + 2.0 * t3y + t4y),
        );
    }
    (
        x + h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x),
        y + h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y),
    )
}

const UNIT_DIRECTIONS: [(C64, C64); 4] = [
    (C64 { re: 1.0, im: 0.0 }, C64 { re: 0.0, im: 0.0 }),
    (C64 { re: 0.0, im: 1.0 }, C64 { re: 0.0, im: 0.0 }),
    (C64 { re: 0.0, im: 0.0 }, C64 { re: 1.0, im: 0.0 }),
    (C64 { re: 0.0, im: 0.0 }, C64 { re: 0.0, im: 1.0 }),
];

fn columns_to_matrix(cols: &[(C64, C64); 4]) -> Jacobian4 {
    let mut m = [0.0; 16];
    for (j, (x, y)) in cols.iter().enumerate() {
        m[j] = x.re;
        m[4 + j] = x.im;
        m[8 + j] = y.re;
        m[12 + j] = y.im;
    }
    m
}

/// `v <- J v` for each sample.
pub fn apply_jacobians(jac: &[Jacobian4], vx: &mut [C64], vy: &mut [C64]) {
    for ((m, x), y) in jac.iter().zip(vx.iter_mut()).zip(vy.iter_mut()) {
        let v = [x.re, x.im, y.re, y.im];
        let row = |r: usize| m[4 * r] * v[0] + m[4 * r + 1] * v[1] + m[4 * r + 2] * v[2] + m[4 * r + 3] * v[3];
        *x = C64::new(row(0), row(1));
        *y = C64::new(row(2), row(3));
    }
}

/// `w <- J^T w` for each sample.
pub fn apply_jacobians_transposed(jac: &[Jacobian4], wx: &mut [C64], wy: &mut [C64]) {
    for ((m, x), y) in jac.iter().zip(wx.iter_mut()).zip(wy.iter_mut()) {
        let w = [x.re, x.im, y.re, y.im];
        let col = |c: usize| m[c] * w[0] + m[4 + c] * w[1] + m[8 + c] * w[2] + m[12 + c] * w[3];
        *x = C64::new(col(0), col(1));
        *y = C64::new(col(2), col(3));
    }
}

/// Step-level machinery shared by the classical and fluctuation solvers.
#[derive(Debug, Clone)]
pub struct Propagator {
    grid: TemporalGrid,
    profile: FiberProfile,
    n_steps: usize,
    d_zeta: f64,
    scheme: NonlinearScheme,
    kerr: Kerr,
    spectral: Spectral,
    kappa: Vec<f64>,
}

impl Propagator {
    pub fn new(grid: TemporalGrid, profile: FiberProfile, n_steps: usize) -> Result<Self> {
        profile.validate()?;
        if n_steps == 0 {
            return Err(Error::param("n_steps", "must be at least 1"));
        }
        let d_zeta = profile.length / n_steps as f64;
        Ok(Self {
            grid,
            profile,
            n_steps,
            d_zeta,
            scheme: NonlinearScheme::select(&profile, d_zeta),
            kerr: Kerr::of(&profile),
            spectral: Spectral::new(grid.n_points()),
            kappa: grid.kappas(),
        })
    }

    pub fn grid(&self) -> &TemporalGrid {
        &self.grid
    }

    pub fn profile(&self) -> &FiberProfile {
        &self.profile
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn d_zeta(&self) -> f64 {
        self.d_zeta
    }

    pub fn scheme(&self) -> NonlinearScheme {
        self.scheme
    }

    pub fn spectral(&self) -> &Spectral {
        &self.spectral
    }

    pub(crate) fn kerr(&self) -> Kerr {
        self.kerr
    }

    /// Spectral multipliers (with the `1/N` of the inverse transform folded
    /// in) for one linear half-step of step `step`.
    pub fn linear_multipliers(&self, step: usize, half: Half) -> (Vec<C64>, Vec<C64>) {
        let offset = match half {
            Half::First => 0.25,
            Half::Second => 0.75,
        };
        let zeta = (step as f64 + offset) * self.d_zeta;
        let dz = 0.5 * self.d_zeta;
        let d = self.profile.dispersion_at(zeta);
        let b = self.profile.birefringence_at(zeta);
        let b1 = self.profile.group_delay_at(zeta);
        let norm = 1.0 / self.grid.n_points() as f64;
        let shared = b1 == 0.0 && b == 0.0;
        let mx: Vec<C64> = self
            .kappa
            .iter()
            .map(|&k| C64::from_polar(norm, dz * (b - b1 * k - 0.5 * d * k * k)))
            .collect();
        let my = if shared {
            mx.clone()
        } else {
            self.kappa
                .iter()
                .map(|&k| C64::from_polar(norm, dz * (-b + b1 * k - 0.5 * d * k * k)))
                .collect()
        };
        (mx, my)
    }

    pub fn apply_linear(
        &self,
        ux: &mut [C64],
        uy: &mut [C64],
        mult: &(Vec<C64>, Vec<C64>),
        scratch: &mut [C64],
    ) {
        self.spectral.apply_multiplier(ux, &mult.0, scratch);
        self.spectral.apply_multiplier(uy, &mult.1, scratch);
    }

    /// Advances the nonlinear sub-flow by `dz` in place.
    pub fn nonlinear_flow(&self, ux: &mut [C64], uy: &mut [C64], dz: f64) {
        match self.scheme {
            NonlinearScheme::Phase {
                basis,
                self_coef,
                cross_coef,
            } => {
                for (x, y) in ux.iter_mut().zip(uy.iter_mut()) {
                    let (p, m) = basis.forward(*x, *y);
                    let (ip, im) = (p.norm_sqr(), m.norm_sqr());
                    let p = p * C64::cis(dz * (self_coef * ip + cross_coef * im));
                    let m = m * C64::cis(dz * (self_coef * im + cross_coef * ip));
                    (*x, *y) = basis.backward(p, m);
                }
            }
            NonlinearScheme::RungeKutta { .. } => {
                let n = ((dz.abs() / RK4_MAX_SUBSTEP).ceil() as usize).max(1);
                let h = dz / n as f64;
                for (x, y) in ux.iter_mut().zip(uy.iter_mut()) {
                    for _ in 0..n {
                        (*x, *y) = rk4_step(&self.kerr, *x, *y, h);
                    }
                }
            }
        }
    }

    /// Full nonlinear substep of length `d_zeta`.
    pub fn nonlinear_step(&self, ux: &mut [C64], uy: &mut [C64]) {
        match self.scheme {
            NonlinearScheme::RungeKutta { substeps } => {
                let h = self.d_zeta / substeps as f64;
                for (x, y) in ux.iter_mut().zip(uy.iter_mut()) {
                    for _ in 0..substeps {
                        (*x, *y) = rk4_step(&self.kerr, *x, *y, h);
                    }
                }
            }
            NonlinearScheme::Phase { .. } => self.nonlinear_flow(ux, uy, self.d_zeta),
        }
    }

    /// Per-sample Jacobians of [`Propagator::nonlinear_step`] evaluated at the
    /// stage field `(ux, uy)`.
    pub fn nonlinear_jacobians(&self, ux: &[C64], uy: &[C64]) -> Vec<Jacobian4> {
        let h = self.d_zeta;
        match self.scheme {
            NonlinearScheme::Phase {
                basis,
                self_coef: s,
                cross_coef: c,
            } => ux
                .iter()
                .zip(uy)
                .map(|(&x, &y)| {
                    let (p1, p2) = basis.forward(x, y);
                    let e1 = C64::cis(h * (s * p1.norm_sqr() + c * p2.norm_sqr()));
                    let e2 = C64::cis(h * (s * p2.norm_sqr() + c * p1.norm_sqr()));
                    let mut cols = UNIT_DIRECTIONS;
                    for col in cols.iter_mut() {
                        let (d1, d2) = basis.forward(col.0, col.1);
                        let r1 = (p1.conj() * d1).re;
                        let r2 = (p2.conj() * d2).re;
                        let o1 = e1 * (d1 + I * p1 * (2.0 * h * (s * r1 + c * r2)));
                        let o2 = e2 * (d2 + I * p2 * (2.0 * h * (s * r2 + c * r1)));
                        *col = basis.backward(o1, o2);
                    }
                    columns_to_matrix(&cols)
                })
                .collect(),
            NonlinearScheme::RungeKutta { substeps } => {
                let hs = h / substeps as f64;
                ux.iter()
                    .zip(uy)
                    .map(|(&x, &y)| {
                        let mut dirs = UNIT_DIRECTIONS;
                        let (mut sx, mut sy) = (x, y);
                        for _ in 0..substeps {
                            (sx, sy) = rk4_step_tangent(&self.kerr, sx, sy, &mut dirs, hs);
                        }
                        columns_to_matrix(&dirs)
                    })
                    .collect()
            }
        }
    }

    /// Advances `(ux, uy)` by step `step` and returns the stage field.
    pub fn step(&self, step: usize, ux: &mut Vec<C64>, uy: &mut Vec<C64>, scratch: &mut [C64]) -> PolarizedField {
        let first = self.linear_multipliers(step, Half::First);
        self.apply_linear(ux, uy, &first, scratch);
        let stage = PolarizedField::new(self.grid, ux.clone(), uy.clone())
            .expect("stage field matches grid");
        self.nonlinear_step(ux, uy);
        let second = self.linear_multipliers(step, Half::Second);
        self.apply_linear(ux, uy, &second, scratch);
        stage
    }
}

/// How much of the classical trajectory is kept in memory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Storage {
    /// Every snapshot and every stage field.
    Full,
    /// Every `stride`-th snapshot (plus the output); stage fields are
    /// recomputed segment by segment when needed.
    Checkpoint { stride: usize },
}

/// Classical solution `U(zeta_k, tau)`, `zeta_k = k * d_zeta`, `k = 0..=n_steps`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    propagator: Propagator,
    storage: Storage,
    checkpoints: Vec<PolarizedField>,
    stages: Vec<PolarizedField>,
}

impl Trajectory {
    pub fn propagator(&self) -> &Propagator {
        &self.propagator
    }

    pub fn grid(&self) -> &TemporalGrid {
        &self.propagator.grid
    }

    pub fn profile(&self) -> &FiberProfile {
        &self.propagator.profile
    }

    pub fn n_steps(&self) -> usize {
        self.propagator.n_steps
    }

    pub fn d_zeta(&self) -> f64 {
        self.propagator.d_zeta
    }

    pub fn storage(&self) -> Storage {
        self.storage
    }

    pub fn zeta(&self, k: usize) -> f64 {
        k as f64 * self.propagator.d_zeta
    }

    pub fn initial(&self) -> &PolarizedField {
        &self.checkpoints[0]
    }

    pub fn output(&self) -> &PolarizedField {
        self.checkpoints.last().expect("trajectory has snapshots")
    }

    fn stride(&self) -> usize {
        match self.storage {
            Storage::Full => 1,
            Storage::Checkpoint { stride } => stride,
        }
    }

    /// Snapshot at step `k`, recomputed from the preceding checkpoint if it
    /// is not stored.
    pub fn snapshot(&self, k: usize) -> Cow<'_, PolarizedField> {
        assert!(k <= self.n_steps(), "snapshot {k} beyond {} steps", self.n_steps());
        let stride = self.stride();
        if k == self.n_steps() {
            return Cow::Borrowed(self.output());
        }
        if k % stride == 0 {
            return Cow::Borrowed(&self.checkpoints[k / stride]);
        }
        let start = k / stride * stride;
        let (grid, mut ux, mut uy) = self.checkpoints[k / stride].clone().into_parts();
        let mut scratch = self.propagator.spectral.make_scratch();
        for s in start..k {
            self.propagator.step(s, &mut ux, &mut uy, &mut scratch);
        }
        Cow::Owned(PolarizedField::new(grid, ux, uy).expect("grid matches"))
    }

    /// Stage fields of steps `first..last`, recomputed from the checkpoint
    /// that precedes `first` when they are not stored.
    fn segment_stages(&self, first: usize, last: usize) -> Vec<PolarizedField> {
        let stride = self.stride();
        let start = first / stride * stride;
        let (_, mut ux, mut uy) = self.checkpoints[first / stride].clone().into_parts();
        let mut scratch = self.propagator.spectral.make_scratch();
        let mut out = Vec::with_capacity(last - first);
        for s in start..last {
            let stage = self.propagator.step(s, &mut ux, &mut uy, &mut scratch);
            if s >= first {
                out.push(stage);
            }
        }
        out
    }

    /// Visits the stage fields of steps `0..n_steps` in order.
    pub fn for_each_stage<F>(&self, mut visit: F) -> Result<()>
    where
        F: FnMut(usize, &PolarizedField) -> Result<()>,
    {
        match self.storage {
            Storage::Full => {
                for (k, stage) in self.stages.iter().enumerate() {
                    visit(k, stage)?;
                }
            }
            Storage::Checkpoint { stride } => {
                let mut first = 0;
                while first < self.n_steps() {
                    let last = (first + stride).min(self.n_steps());
                    for (offset, stage) in self.segment_stages(first, last).iter().enumerate() {
                        visit(first + offset, stage)?;
                    }
                    first = last;
                }
            }
        }
        Ok(())
    }

    /// Visits the stage fields of steps `end_step - 1` down to `0`.
    pub fn for_each_stage_rev<F>(&self, end_step: usize, mut visit: F) -> Result<()>
    where
        F: FnMut(usize, &PolarizedField) -> Result<()>,
    {
        assert!(end_step <= self.n_steps());
        match self.storage {
            Storage::Full => {
                for k in (0..end_step).rev() {
                    visit(k, &self.stages[k])?;
                }
            }
            Storage::Checkpoint { stride } => {
                let mut last = end_step;
                while last > 0 {
                    let first = (last - 1) / stride * stride;
                    let stages = self.segment_stages(first, last);
                    for (offset, stage) in stages.iter().enumerate().rev() {
                        visit(first + offset, stage)?;
                    }
                    last = first;
                }
            }
        }
        Ok(())
    }

    /// Energy of every snapshot.
    pub fn energies(&self) -> Vec<f64> {
        (0..=self.n_steps()).map(|k| self.snapshot(k).energy()).collect()
    }
}

/// Propagates `f0` through `profile` with `n_steps` steps, storing everything.
pub fn propagate_classical(
    f0: &PolarizedField,
    profile: &FiberProfile,
    n_steps: usize,
) -> Result<Trajectory> {
    propagate_classical_with(f0, profile, n_steps, Storage::Full)
}

pub fn propagate_classical_with(
    f0: &PolarizedField,
    profile: &FiberProfile,
    n_steps: usize,
    storage: Storage,
) -> Result<Trajectory> {
    if let Storage::Checkpoint { stride } = storage {
        if stride == 0 {
            return Err(Error::param("stride", "checkpoint stride must be at least 1"));
        }
    }
    let propagator = Propagator::new(*f0.grid(), *profile, n_steps)?;
    let stride = match storage {
        Storage::Full => 1,
        Storage::Checkpoint { stride } => stride,
    };
    let peak0 = f0.max_intensity();
    let limit = BLOWUP_FACTOR * peak0;

    let mut checkpoints = vec![f0.clone()];
    let mut stages = Vec::new();
    if storage == Storage::Full {
        stages.reserve(n_steps);
        checkpoints.reserve(n_steps);
    }
    let (grid, mut ux, mut uy) = f0.clone().into_parts();
    let mut scratch = propagator.spectral.make_scratch();
    for k in 0..n_steps {
        let stage = propagator.step(k, &mut ux, &mut uy, &mut scratch);
        let snap = PolarizedField::new(grid, ux.clone(), uy.clone())?;
        if !snap.is_finite() {
            return Err(Error::NumericalBlowup {
                step: k + 1,
                reason: "non-finite field value".into(),
            });
        }
        let peak = snap.max_intensity();
        if peak > limit {
            return Err(Error::NumericalBlowup {
                step: k + 1,
                reason: format!("peak intensity {peak:e} exceeds {BLOWUP_FACTOR:e} x initial {peak0:e}"),
            });
        }
        if storage == Storage::Full {
            stages.push(stage);
        }
        if (k + 1) % stride == 0 || k + 1 == n_steps {
            checkpoints.push(snap);
        }
    }
    Ok(Trajectory {
        propagator,
        storage,
        checkpoints,
        stages,
    })
}

/// Power spectrum on a monotone `Omega` axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub omega: Vec<f64>,
    pub power: Vec<f64>,
}

impl Spectrum {
    /// `integral of power dOmega` (rectangle rule on the bin spacing).
    pub fn integral(&self) -> f64 {
        let d = if self.omega.len() > 1 {
            self.omega[1] - self.omega[0]
        } else {
            0.0
        };
        self.power.iter().sum::<f64>() * d
    }

    pub fn peak_power(&self) -> f64 {
        self.power.iter().cloned().fold(0.0, f64::max)
    }
}

/// `|F[Ux]|^2 + |F[Uy]|^2` of an arbitrary field, monotone in `Omega`.
pub fn field_spectrum(field: &PolarizedField, spectral: &Spectral) -> Spectrum {
    let grid = field.grid();
    let sx = spectral.spectrum(grid, field.ux());
    let sy = spectral.spectrum(grid, field.uy());
    let power: Vec<f64> = sx.iter().zip(&sy).map(|(a, b)| a.norm_sqr() + b.norm_sqr()).collect();
    Spectrum {
        omega: grid.to_monotone(&grid.omegas()),
        power: grid.to_monotone(&power),
    }
}

/// Output spectrum `I_sum(L, Omega)`.
pub fn output_spectrum(traj: &Trajectory) -> Spectrum {
    field_spectrum(traj.output(), traj.propagator().spectral())
}

/// Spectra of the parts of the output before and after `split_at`:
/// `I_1` from `(1 - H(tau - split_at)) U`, `I_2` from `H(tau - split_at) U`,
/// with `H(0) = 1`.
pub fn split_spectra(traj: &Trajectory, split_at: f64) -> (Spectrum, Spectrum) {
    let out = traj.output();
    let grid = *out.grid();
    let mask = |after: bool| {
        let pick = |v: &[C64]| -> Vec<C64> {
            v.iter()
                .enumerate()
                .map(|(i, &z)| {
                    if (grid.tau(i) >= split_at) == after {
                        z
                    } else {
                        C64::new(0.0, 0.0)
                    }
                })
                .collect()
        };
        PolarizedField::new(grid, pick(out.ux()), pick(out.uy())).expect("grid matches")
    };
    let spectral = traj.propagator().spectral();
    (
        field_spectrum(&mask(false), spectral),
        field_spectrum(&mask(true), spectral),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{make_initial_pair, make_initial_single, ModulationSpec};
    use std::f64::consts::PI;

    fn rms_diff(a: &[f64], b: &[f64]) -> f64 {
        let s: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
        (s / a.len() as f64).sqrt()
    }

    fn field_dist(a: &PolarizedField, b: &PolarizedField) -> f64 {
        let d: f64 = a
            .ux()
            .iter()
            .zip(b.ux())
            .chain(a.uy().iter().zip(b.uy()))
            .map(|(p, q)| (p - q).norm_sqr())
            .sum();
        (d * a.grid().d_tau()).sqrt()
    }

    #[test]
    fn step_bookkeeping() {
        let g = TemporalGrid::new(256, -20.0, 20.0).unwrap();
        let f0 = make_initial_single(g, 1.0).unwrap();
        let t = propagate_classical(&f0, &FiberProfile::manakov(2.0 * PI), 37).unwrap();
        assert!((t.n_steps() as f64 * t.d_zeta() - 2.0 * PI).abs() < 1e-12);
        assert_eq!(t.initial(), &f0);
        assert_eq!(default_steps(2.0 * PI), 1257);
        assert!(propagate_classical(&f0, &FiberProfile::manakov(1.0), 0).is_err());
    }

    #[test]
    fn zero_input_stays_zero() {
        let g = TemporalGrid::new(128, -20.0, 20.0).unwrap();
        let f0 = PolarizedField::zeros(g);
        let t = propagate_classical(&f0, &FiberProfile::birefringent(1.0, 20.0, 2.0), 50).unwrap();
        assert!(t.output().max_intensity() == 0.0);
        assert!(output_spectrum(&t).power.iter().all(|&p| p == 0.0));
        let (a, b) = split_spectra(&t, 0.0);
        assert!(a.power.iter().chain(&b.power).all(|&p| p == 0.0));
    }

    #[test]
    fn fundamental_manakov_soliton_is_stationary() {
        let g = TemporalGrid::new(1024, -20.0, 20.0).unwrap();
        let u0 = 3.0 / (2.0 * 2f64.sqrt());
        let f0 = make_initial_single(g, u0).unwrap();
        let t = propagate_classical(&f0, &FiberProfile::manakov(2.0 * PI), default_steps(2.0 * PI)).unwrap();
        assert!(rms_diff(&f0.intensity(), &t.output().intensity()) < 1e-3);
    }

    #[test]
    fn energy_is_conserved() {
        let g = TemporalGrid::new(512, -20.0, 20.0).unwrap();
        let f0 = make_initial_single(g, 2.0).unwrap();
        let profile = FiberProfile::birefringent(1.0, 20.0, 2.0)
            .with_dispersion_modulation(ModulationSpec::sine(0.5, 0.2));
        let t = propagate_classical(&f0, &profile, 200).unwrap();
        let e0 = f0.energy();
        for e in t.energies() {
            assert!(((e - e0) / e0).abs() < 1e-8);
        }
    }

    #[test]
    fn linear_fiber_keeps_spectrum() {
        let g = TemporalGrid::new(512, -20.0, 20.0).unwrap();
        let f0 = make_initial_pair(g, 2.0, 3.0, 1.0).unwrap();
        let t = propagate_classical(&f0, &FiberProfile::linear(2.0), 40).unwrap();
        let s_in = field_spectrum(&f0, t.propagator().spectral());
        let s_out = output_spectrum(&t);
        let peak = s_in.peak_power();
        for (a, b) in s_in.power.iter().zip(&s_out.power) {
            assert!((a - b).abs() < 1e-10 * peak);
        }
    }

    #[test]
    fn phase_step_keeps_moduli_when_c_is_zero() {
        let g = TemporalGrid::new(64, -10.0, 10.0).unwrap();
        let f0 = make_initial_pair(g, 2.0, 1.0, 0.5).unwrap();
        let p = Propagator::new(g, FiberProfile::manakov(1.0), 10).unwrap();
        let (_, mut ux, mut uy) = f0.clone().into_parts();
        p.nonlinear_step(&mut ux, &mut uy);
        for i in 0..64 {
            assert!((ux[i].norm() - f0.ux()[i].norm()).abs() < 1e-15);
            assert!((uy[i].norm() - f0.uy()[i].norm()).abs() < 1e-15);
        }
    }

    #[test]
    fn circular_phase_matches_fine_rk4() {
        // A = B + C: the exact circular-basis rotation must agree with a
        // fine Runge-Kutta integration of the full vector field.
        let kerr = Kerr { a: 1.0, b: 2.0 / 3.0, c: 1.0 / 3.0 };
        let g = TemporalGrid::new(8, -1.0, 1.0).unwrap();
        let p = Propagator::new(g, FiberProfile::birefringent(1.0, 0.0, 0.0), 20).unwrap();
        assert!(matches!(p.scheme(), NonlinearScheme::Phase { basis: PhaseBasis::Circular, .. }));
        let mut ux = vec![C64::new(1.3, -0.4), C64::new(0.2, 0.9)];
        let mut uy = vec![C64::new(-0.5, 0.8), C64::new(1.1, 0.0)];
        let (rx, ry): (Vec<_>, Vec<_>) = ux
            .iter()
            .zip(&uy)
            .map(|(&x, &y)| {
                let (mut x, mut y) = (x, y);
                for _ in 0..5000 {
                    (x, y) = rk4_step(&kerr, x, y, 0.3 / 5000.0);
                }
                (x, y)
            })
            .unzip();
        p.nonlinear_flow(&mut ux, &mut uy, 0.3);
        for i in 0..2 {
            assert!((ux[i] - rx[i]).norm() < 1e-12, "{} vs {}", ux[i], rx[i]);
            assert!((uy[i] - ry[i]).norm() < 1e-12);
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let g = TemporalGrid::new(8, -1.0, 1.0).unwrap();
        let profiles = [
            FiberProfile::manakov(1.0),
            FiberProfile::birefringent(1.0, 0.0, 0.0),
            FiberProfile { coherent: 0.25, ..FiberProfile::birefringent(1.0, 0.0, 0.0) },
        ];
        for profile in profiles {
            let p = Propagator::new(g, profile, 50).unwrap();
            let x0 = C64::new(1.1, -0.3);
            let y0 = C64::new(0.4, 0.7);
            let jac = p.nonlinear_jacobians(&[x0], &[y0])[0];
            let eps = 1e-6;
            for (j, (dx, dy)) in UNIT_DIRECTIONS.iter().enumerate() {
                let eval = |s: f64| {
                    let mut ux = vec![x0 + s * dx];
                    let mut uy = vec![y0 + s * dy];
                    p.nonlinear_step(&mut ux, &mut uy);
                    (ux[0], uy[0])
                };
                let (px, py) = eval(eps);
                let (mx, my) = eval(-eps);
                let fd = [
                    (px - mx).re / (2.0 * eps),
                    (px - mx).im / (2.0 * eps),
                    (py - my).re / (2.0 * eps),
                    (py - my).im / (2.0 * eps),
                ];
                for r in 0..4 {
                    assert!((jac[4 * r + j] - fd[r]).abs() < 1e-8, "{profile:?} ({r},{j})");
                }
            }
        }
    }

    #[test]
    fn manakov_commutes_with_polarization_rotation() {
        let g = TemporalGrid::new(512, -20.0, 20.0).unwrap();
        let f0 = make_initial_pair(g, 2.0, 1.5, 0.5).unwrap();
        let (ca, sa) = (0.6f64.cos(), 0.6f64.sin());
        let phase = C64::cis(0.3);
        let rotate = |f: &PolarizedField| {
            let (ux, uy): (Vec<_>, Vec<_>) = f
                .ux()
                .iter()
                .zip(f.uy())
                .map(|(&x, &y)| (ca * x - sa * phase * y, sa * phase.conj() * x + ca * y))
                .unzip();
            PolarizedField::new(*f.grid(), ux, uy).unwrap()
        };
        let profile = FiberProfile::manakov(1.5).with_dispersion_modulation(ModulationSpec::sine(1.3, 0.2));
        let a = propagate_classical(&rotate(&f0), &profile, 300).unwrap();
        let b = propagate_classical(&f0, &profile, 300).unwrap();
        let d = field_dist(a.output(), &rotate(b.output()));
        let rms = d / (g.window()).sqrt();
        assert!(rms < 1e-8, "{rms}");
    }

    #[test]
    fn second_order_in_step_size() {
        let g = TemporalGrid::new(512, -20.0, 20.0).unwrap();
        let f0 = make_initial_single(g, 2.0).unwrap();
        let profile = FiberProfile::manakov(1.0).with_dispersion_modulation(ModulationSpec::sine(1.3, 0.2));
        let run = |n| propagate_classical(&f0, &profile, n).unwrap().output().clone();
        let coarse = run(100);
        let fine = run(200);
        let reference = run(800);
        let ratio = field_dist(&coarse, &reference) / field_dist(&fine, &reference);
        assert!((ratio - 4.0).abs() < 0.5, "ratio {ratio}");
    }

    #[test]
    fn checkpointing_reproduces_full_storage() {
        let g = TemporalGrid::new(256, -20.0, 20.0).unwrap();
        let f0 = make_initial_single(g, 2.0).unwrap();
        let profile = FiberProfile::manakov(1.0);
        let full = propagate_classical(&f0, &profile, 23).unwrap();
        let cp = propagate_classical_with(&f0, &profile, 23, Storage::Checkpoint { stride: 5 }).unwrap();
        assert_eq!(full.output(), cp.output());
        for k in [0, 3, 5, 7, 22, 23] {
            assert_eq!(full.snapshot(k).as_ref(), cp.snapshot(k).as_ref());
        }
        let mut fwd = Vec::new();
        cp.for_each_stage(|k, s| {
            fwd.push(k);
            assert_eq!(s, &full.stages[k]);
            Ok(())
        })
        .unwrap();
        assert_eq!(fwd, (0..23).collect::<Vec<_>>());
        let mut rev = Vec::new();
        cp.for_each_stage_rev(17, |k, s| {
            rev.push(k);
            assert_eq!(s, &full.stages[k]);
            Ok(())
        })
        .unwrap();
        assert_eq!(rev, (0..17).rev().collect::<Vec<_>>());
    }

    #[test]
    fn split_spectra_partition_energy() {
        let g = TemporalGrid::new(1024, -20.0, 20.0).unwrap();
        let f0 = make_initial_pair(g, 2.0, 3.0, 1.0).unwrap();
        let t = propagate_classical(&f0, &FiberProfile::manakov(1.0), 200).unwrap();
        let total = output_spectrum(&t).integral();
        let (a, b) = split_spectra(&t, 0.0);
        assert!(((a.integral() + b.integral()) - total).abs() < 1e-8 * total);
        // Parseval: integral dOmega / 2pi = energy
        assert!((total / (2.0 * PI) - t.output().energy()).abs() < 1e-10 * total);
    }

    #[test]
    fn blowup_is_reported_with_step() {
        let g = TemporalGrid::new(64, -10.0, 10.0).unwrap();
        let f0 = make_initial_single(g, 1.0).unwrap();
        let profile = FiberProfile { self_phase: 1e8, cross_phase: 0.0, coherent: 1.0, ..FiberProfile::manakov(1.0) };
        match propagate_classical(&f0, &profile, 10) {
            Err(Error::NumericalBlowup { step, .. }) => assert_eq!(step, 1),
            other => panic!("expected blow-up, got {other:?}"),
        }
    }
}
