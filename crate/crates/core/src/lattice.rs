//! Discretization primitives: the retarded-time grid and its spectral bins,
//! two-polarization fields, fiber coefficient profiles and model presets.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Uniform periodic grid over the normalized retarded time `tau`.
///
/// Sample `i` sits at `tau_min + i * d_tau`; the window is periodic with
/// period `tau_max - tau_min`. Spectral bin `m` follows the usual discrete
/// transform ordering. Its normalized frequency is reported in the
/// `exp(-i Omega tau)` convention of a field oscillating as `exp(-i omega t)`,
/// so `omega(m) = -kappa(m)` where `kappa(m)` is the angular wavenumber of the
/// Fourier mode `exp(i kappa tau)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemporalGrid {
    n_points: usize,
    tau_min: f64,
    tau_max: f64,
}

impl TemporalGrid {
    pub fn new(n_points: usize, tau_min: f64, tau_max: f64) -> Result<Self> {
        if n_points < 8 || !n_points.is_power_of_two() {
            return Err(Error::param(
                "n_points",
                format!("must be a power of two >= 8, got {n_points}"),
            ));
        }
        if !(tau_min.is_finite() && tau_max.is_finite()) || tau_max <= tau_min {
            return Err(Error::param(
                "tau_max",
                format!("window [{tau_min}, {tau_max}] is empty or not finite"),
            ));
        }
        Ok(Self {
            n_points,
            tau_min,
            tau_max,
        })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn tau_min(&self) -> f64 {
        self.tau_min
    }

    pub fn tau_max(&self) -> f64 {
        self.tau_max
    }

    pub fn window(&self) -> f64 {
        self.tau_max - self.tau_min
    }

    pub fn d_tau(&self) -> f64 {
        self.window() / self.n_points as f64
    }

    pub fn tau(&self, i: usize) -> f64 {
        self.tau_min + i as f64 * self.d_tau()
    }

    pub fn taus(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.tau(i)).collect()
    }

    /// Spacing of the spectral bins, `2 pi / window`.
    pub fn d_omega(&self) -> f64 {
        2.0 * PI / self.window()
    }

    /// Angular wavenumber of bin `m` (numpy `fftfreq` layout times `2 pi`).
    pub fn kappa(&self, m: usize) -> f64 {
        let n = self.n_points as i64;
        let m = m as i64;
        let signed = if m < n / 2 { m } else { m - n };
        signed as f64 * self.d_omega()
    }

    pub fn kappas(&self) -> Vec<f64> {
        (0..self.n_points).map(|m| self.kappa(m)).collect()
    }

    /// Normalized frequency `Omega` of bin `m`.
    pub fn omega(&self, m: usize) -> f64 {
        -self.kappa(m)
    }

    pub fn omegas(&self) -> Vec<f64> {
        (0..self.n_points).map(|m| self.omega(m)).collect()
    }

    /// Bin indices sorted by increasing `Omega`.
    pub fn monotone_order(&self) -> Vec<usize> {
        let n = self.n_points;
        // Omega increases as kappa decreases: n/2-1, ..., 0, n-1, ..., n/2.
        (0..n / 2).rev().chain((n / 2..n).rev()).collect()
    }

    /// Reorders a per-bin array into increasing-`Omega` order.
    pub fn to_monotone<T: Copy>(&self, values: &[T]) -> Vec<T> {
        self.monotone_order().into_iter().map(|m| values[m]).collect()
    }
}

impl Default for TemporalGrid {
    fn default() -> Self {
        Self {
            n_points: 4096,
            tau_min: -20.0,
            tau_max: 20.0,
        }
    }
}

/// Pair of complex envelopes `(U_x, U_y)` sampled on a [`TemporalGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct PolarizedField {
    grid: TemporalGrid,
    ux: Vec<C64>,
    uy: Vec<C64>,
}

impl PolarizedField {
    pub fn new(grid: TemporalGrid, ux: Vec<C64>, uy: Vec<C64>) -> Result<Self> {
        if ux.len() != grid.n_points() || uy.len() != grid.n_points() {
            return Err(Error::InvalidArgument(format!(
                "field components have {} and {} samples, grid has {}",
                ux.len(),
                uy.len(),
                grid.n_points()
            )));
        }
        Ok(Self { grid, ux, uy })
    }

    pub fn zeros(grid: TemporalGrid) -> Self {
        let n = grid.n_points();
        Self {
            grid,
            ux: vec![C64::new(0.0, 0.0); n],
            uy: vec![C64::new(0.0, 0.0); n],
        }
    }

    pub fn grid(&self) -> &TemporalGrid {
        &self.grid
    }

    pub fn ux(&self) -> &[C64] {
        &self.ux
    }

    pub fn uy(&self) -> &[C64] {
        &self.uy
    }

    pub fn into_parts(self) -> (TemporalGrid, Vec<C64>, Vec<C64>) {
        (self.grid, self.ux, self.uy)
    }

    /// `E = integral of |U_x|^2 + |U_y|^2 over tau` (rectangle rule, exact for
    /// the periodic grid).
    pub fn energy(&self) -> f64 {
        let sum: f64 = self
            .ux
            .iter()
            .chain(self.uy.iter())
            .map(|z| z.norm_sqr())
            .sum();
        sum * self.grid.d_tau()
    }

    pub fn intensity(&self) -> Vec<f64> {
        field_intensity(self)
    }

    pub fn max_intensity(&self) -> f64 {
        self.ux
            .iter()
            .zip(&self.uy)
            .map(|(x, y)| x.norm_sqr() + y.norm_sqr())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.ux
            .iter()
            .chain(self.uy.iter())
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

fn sech(x: f64) -> f64 {
    1.0 / x.cosh()
}

/// Linearly polarized `sech` input: `U_x = U_y = u0 / sqrt(2) sech(tau)`.
pub fn make_initial_single(grid: TemporalGrid, u0: f64) -> Result<PolarizedField> {
    make_initial_pair(grid, u0, 0.0, 0.0)
}

/// Two orthogonally polarized `sech` pulses at `tau = -t_sep` (x) and
/// `tau = +t_sep` (y) carrying opposite phase ramps `exp(+-i d_omega tau)`.
pub fn make_initial_pair(
    grid: TemporalGrid,
    u0: f64,
    t_sep: f64,
    d_omega: f64,
) -> Result<PolarizedField> {
    if !(u0 > 0.0 && u0.is_finite()) {
        return Err(Error::param("u0", format!("must be positive, got {u0}")));
    }
    if !t_sep.is_finite() || !d_omega.is_finite() {
        return Err(Error::param("t_sep", "offsets must be finite"));
    }
    let amp = u0 / 2f64.sqrt();
    let (ux, uy) = grid
        .taus()
        .into_iter()
        .map(|tau| {
            let x = C64::from_polar(amp * sech(tau + t_sep), d_omega * tau);
            let y = C64::from_polar(amp * sech(tau - t_sep), -d_omega * tau);
            (x, y)
        })
        .unzip();
    PolarizedField::new(grid, ux, uy)
}

/// Pointwise `|U_x|^2 + |U_y|^2`.
pub fn field_intensity(f: &PolarizedField) -> Vec<f64> {
    f.ux
        .iter()
        .zip(&f.uy)
        .map(|(x, y)| x.norm_sqr() + y.norm_sqr())
        .collect()
}

/// Shape of the longitudinal modulation applied to a fiber coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModulationKind {
    None,
    Sine,
    TruncatedSine,
}

impl ModulationKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModulationKind::None => "none",
            ModulationKind::Sine => "sine",
            ModulationKind::TruncatedSine => "truncated_sine",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "none" => Some(ModulationKind::None),
            "sine" => Some(ModulationKind::Sine),
            "truncated_sine" => Some(ModulationKind::TruncatedSine),
            _ => None,
        }
    }
}

/// Multiplicative modulation `1 - depth * sin(2 pi zeta / period)`.
///
/// The truncated form applies over the first period only. A negative depth
/// flips the sign of the sine term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModulationSpec {
    pub kind: ModulationKind,
    pub period: f64,
    pub depth: f64,
}

impl ModulationSpec {
    pub const fn none() -> Self {
        Self {
            kind: ModulationKind::None,
            period: f64::INFINITY,
            depth: 0.0,
        }
    }

    pub const fn sine(period: f64, depth: f64) -> Self {
        Self {
            kind: ModulationKind::Sine,
            period,
            depth,
        }
    }

    pub const fn truncated_sine(period: f64, depth: f64) -> Self {
        Self {
            kind: ModulationKind::TruncatedSine,
            period,
            depth,
        }
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        if self.kind == ModulationKind::None {
            return Ok(());
        }
        if !(self.period > 0.0) || self.period.is_nan() {
            return Err(Error::param(
                format!("{name}.period"),
                format!("modulation period must be positive, got {}", self.period),
            ));
        }
        if !self.depth.is_finite() {
            return Err(Error::param(format!("{name}.depth"), "must be finite"));
        }
        Ok(())
    }

    pub fn factor(&self, zeta: f64) -> f64 {
        let wave = || 1.0 - self.depth * (2.0 * PI * zeta / self.period).sin();
        match self.kind {
            ModulationKind::None => 1.0,
            _ if !self.period.is_finite() => 1.0,
            ModulationKind::Sine => wave(),
            ModulationKind::TruncatedSine if zeta <= self.period => wave(),
            ModulationKind::TruncatedSine => 1.0,
        }
    }
}

/// A fiber coefficient `base * modulation.factor(zeta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficient {
    pub base: f64,
    pub modulation: ModulationSpec,
}

impl Coefficient {
    pub const fn constant(base: f64) -> Self {
        Self {
            base,
            modulation: ModulationSpec::none(),
        }
    }

    pub const fn modulated(base: f64, modulation: ModulationSpec) -> Self {
        Self { base, modulation }
    }

    pub fn value(&self, zeta: f64) -> f64 {
        self.base * self.modulation.factor(zeta)
    }

    pub fn is_zero(&self) -> bool {
        self.base == 0.0
    }
}

/// Nonlinear coefficients `(A, B, C)` and the longitudinal profiles
/// `D(zeta)`, `b(zeta)`, `b1(zeta)` of a fiber of normalized length `L`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiberProfile {
    /// Self-phase coefficient `A`.
    pub self_phase: f64,
    /// Cross-phase coefficient `B`.
    pub cross_phase: f64,
    /// Coherent (four-wave) coupling coefficient `C`.
    pub coherent: f64,
    pub dispersion: Coefficient,
    pub birefringence: Coefficient,
    pub group_delay: Coefficient,
    pub length: f64,
}

impl FiberProfile {
    /// Manakov model: `A = B = 8/9`, `C = 0`, no birefringence, `D = 1`.
    pub fn manakov(length: f64) -> Self {
        Self {
            self_phase: 8.0 / 9.0,
            cross_phase: 8.0 / 9.0,
            coherent: 0.0,
            dispersion: Coefficient::constant(1.0),
            birefringence: Coefficient::constant(0.0),
            group_delay: Coefficient::constant(0.0),
            length,
        }
    }

    /// Linearly birefringent fiber: `A = 1`, `B = 2/3`, `C = 1/3`.
    pub fn birefringent(length: f64, birefringence: f64, group_delay: f64) -> Self {
        Self {
            self_phase: 1.0,
            cross_phase: 2.0 / 3.0,
            coherent: 1.0 / 3.0,
            dispersion: Coefficient::constant(1.0),
            birefringence: Coefficient::constant(birefringence),
            group_delay: Coefficient::constant(group_delay),
            length,
        }
    }

    /// Purely dispersive fiber (`A = B = C = 0`).
    pub fn linear(length: f64) -> Self {
        Self {
            self_phase: 0.0,
            cross_phase: 0.0,
            coherent: 0.0,
            ..Self::manakov(length)
        }
    }

    pub fn with_dispersion_modulation(mut self, modulation: ModulationSpec) -> Self {
        self.dispersion.modulation = modulation;
        self
    }

    pub fn with_length(mut self, length: f64) -> Self {
        self.length = length;
        self
    }

    pub fn dispersion_at(&self, zeta: f64) -> f64 {
        self.dispersion.value(zeta)
    }

    pub fn birefringence_at(&self, zeta: f64) -> f64 {
        self.birefringence.value(zeta)
    }

    pub fn group_delay_at(&self, zeta: f64) -> f64 {
        self.group_delay.value(zeta)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length > 0.0 && self.length.is_finite()) {
            return Err(Error::param(
                "length",
                format!("fiber length must be positive, got {}", self.length),
            ));
        }
        for (name, v) in [
            ("self_phase", self.self_phase),
            ("cross_phase", self.cross_phase),
            ("coherent", self.coherent),
            ("dispersion.base", self.dispersion.base),
            ("birefringence.base", self.birefringence.base),
            ("group_delay.base", self.group_delay.base),
        ] {
            if !v.is_finite() {
                return Err(Error::param(name, "must be finite"));
            }
        }
        self.dispersion.modulation.validate("dispersion")?;
        self.birefringence.modulation.validate("birefringence")?;
        self.group_delay.modulation.validate("group_delay")?;
        Ok(())
    }

    /// One-line `key=value` descriptor used in file headers.
    pub fn descriptor(&self) -> String {
        let coef = |name: &str, c: &Coefficient| {
            format!(
                "{name}={:e};{name}_mod={};{name}_period={:e};{name}_depth={:e}",
                c.base,
                c.modulation.kind.name(),
                c.modulation.period,
                c.modulation.depth
            )
        };
        format!(
            "A={:e};B={:e};C={:e};L={:e};{};{};{}",
            self.self_phase,
            self.cross_phase,
            self.coherent,
            self.length,
            coef("D", &self.dispersion),
            coef("b", &self.birefringence),
            coef("b1", &self.group_delay)
        )
    }
}

/// Forward/inverse FFT plans for one grid size.
///
/// The forward transform is unnormalized; callers fold `1/N` into their
/// spectral multipliers.
#[derive(Clone)]
pub struct Spectral {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch_len: usize,
}

impl fmt::Debug for Spectral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Spectral").field("n", &self.n).finish()
    }
}

impl Spectral {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Self {
            n,
            forward,
            inverse,
            scratch_len,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn make_scratch(&self) -> Vec<C64> {
        vec![C64::new(0.0, 0.0); self.scratch_len]
    }

    pub fn forward(&self, buf: &mut [C64], scratch: &mut [C64]) {
        self.forward.process_with_scratch(buf, scratch);
    }

    /// Unnormalized inverse transform.
    pub fn inverse(&self, buf: &mut [C64], scratch: &mut [C64]) {
        self.inverse.process_with_scratch(buf, scratch);
    }

    /// `buf <- IDFT(multiplier * DFT(buf))`; the multiplier must carry `1/N`.
    pub fn apply_multiplier(&self, buf: &mut [C64], multiplier: &[C64], scratch: &mut [C64]) {
        self.forward(buf, scratch);
        for (z, m) in buf.iter_mut().zip(multiplier) {
            *z *= m;
        }
        self.inverse(buf, scratch);
    }

    /// Continuous-transform approximation `d_tau * DFT(samples)` per bin.
    ///
    /// Magnitudes equal `|integral U(tau) exp(i Omega tau) d tau|` at
    /// `Omega = grid.omega(m)`; the phase carries the window offset.
    pub fn spectrum(&self, grid: &TemporalGrid, samples: &[C64]) -> Vec<C64> {
        let mut buf = samples.to_vec();
        let mut scratch = self.make_scratch();
        self.forward(&mut buf, &mut scratch);
        let dt = grid.d_tau();
        buf.iter_mut().for_each(|z| *z *= dt);
        buf
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad_energy(grid: &TemporalGrid, f: &PolarizedField) -> f64 {
        // composite Simpson over the closed window, independent of `energy()`
        let n = grid.n_points();
        let h = grid.d_tau();
        let g = |i: usize| {
            let i = i % n;
            f.ux()[i].norm_sqr() + f.uy()[i].norm_sqr()
        };
        let mut s = g(0) + g(n);
        for i in 1..n {
            s += if i % 2 == 1 { 4.0 * g(i) } else { 2.0 * g(i) };
        }
        s * h / 3.0
    }

    #[test]
    fn grid_rejects_bad_sizes() {
        assert!(TemporalGrid::new(6, -1.0, 1.0).is_err());
        assert!(TemporalGrid::new(4, -1.0, 1.0).is_err());
        assert!(TemporalGrid::new(16, 1.0, 1.0).is_err());
        assert!(TemporalGrid::new(16, -1.0, 1.0).is_ok());
    }

    #[test]
    fn grid_spacings() {
        let g = TemporalGrid::default();
        assert_eq!(g.d_tau(), 40.0 / 4096.0);
        assert!((g.d_omega() - 2.0 * PI / 40.0).abs() < 1e-15);
        assert!((g.kappa(1) - g.d_omega()).abs() < 1e-15);
        assert!((g.kappa(4095) + g.d_omega()).abs() < 1e-15);
        assert!((g.kappa(2048) + 2048.0 * g.d_omega()).abs() < 1e-9);
    }

    #[test]
    fn monotone_order_sorts_omega() {
        let g = TemporalGrid::new(16, -4.0, 4.0).unwrap();
        let w = g.to_monotone(&g.omegas());
        assert_eq!(w.len(), 16);
        assert!(w.windows(2).all(|p| p[1] > p[0]));
    }

    #[test]
    fn single_input_peak_and_energy() {
        let g = TemporalGrid::default();
        let f = make_initial_single(g, 2.0).unwrap();
        let i0 = 2048;
        assert_eq!(g.tau(i0), 0.0);
        assert!((f.ux()[i0].re - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(f.ux(), f.uy());
        assert!((f.energy() - 8.0).abs() < 1e-6);
        assert!((quad_energy(&g, &f) - 8.0).abs() < 1e-6);
        assert!((field_intensity(&f)[i0] - 4.0).abs() < 1e-14);
    }

    #[test]
    fn nonpositive_amplitude_rejected() {
        let g = TemporalGrid::default();
        assert!(matches!(
            make_initial_single(g, 0.0),
            Err(Error::InvalidParameter { .. })
        ));
        assert!(make_initial_pair(g, -1.0, 3.0, 1.0).is_err());
    }

    #[test]
    fn pair_input_properties() {
        let g = TemporalGrid::default();
        let f = make_initial_pair(g, 2.0, 3.0, 1.0).unwrap();
        assert!((f.energy() - 8.0).abs() < 1e-6);
        assert!((quad_energy(&g, &f) - 8.0).abs() < 1e-6);
        let inten = f.intensity();
        // maxima near -3 and +3
        let left = (0..2048).max_by(|&a, &b| inten[a].total_cmp(&inten[b])).unwrap();
        let right = (2048..4096).max_by(|&a, &b| inten[a].total_cmp(&inten[b])).unwrap();
        assert!((g.tau(left) + 3.0).abs() < 0.05);
        assert!((g.tau(right) - 3.0).abs() < 0.05);

        let coincident = make_initial_pair(g, 2.0, 0.0, 0.0).unwrap();
        assert_eq!(coincident, make_initial_single(g, 2.0).unwrap());
    }

    #[test]
    fn pair_intensity_at_offset() {
        let g = TemporalGrid::default();
        let f = make_initial_pair(g, 2.0, 3.0, 0.0).unwrap();
        let i = (0..4096).min_by(|&a, &b| (g.tau(a) - 3.0).abs().total_cmp(&(g.tau(b) - 3.0).abs())).unwrap();
        let t = g.tau(i);
        let expected = 2.0 / (t - 3.0).cosh().powi(2) + 2.0 / (t + 3.0).cosh().powi(2);
        assert!((f.intensity()[i] - expected).abs() < 1e-14);
        assert!((expected - (2.0 + 2.0 / 6f64.cosh().powi(2))).abs() < 1e-3);
    }

    #[test]
    fn pair_mirror_symmetry() {
        let g = TemporalGrid::default();
        let f = make_initial_pair(g, 1.3, 2.5, 0.0).unwrap();
        // tau_i = -tau_{n-i} on the grid
        for i in 1..g.n_points() {
            assert_eq!(f.uy()[i], f.ux()[g.n_points() - i]);
        }
    }

    #[test]
    fn zero_field_has_zero_intensity() {
        let f = PolarizedField::zeros(TemporalGrid::default());
        assert!(field_intensity(&f).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn fft_round_trip() {
        let g = TemporalGrid::new(256, -10.0, 10.0).unwrap();
        let sp = Spectral::new(g.n_points());
        let mut scratch = sp.make_scratch();
        let orig: Vec<C64> = (0..256)
            .map(|i| C64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let mut buf = orig.clone();
        let unit = vec![C64::new(1.0 / 256.0, 0.0); 256];
        sp.apply_multiplier(&mut buf, &unit, &mut scratch);
        let err: f64 = buf.iter().zip(&orig).map(|(a, b)| (a - b).norm_sqr()).sum();
        let norm: f64 = orig.iter().map(|a| a.norm_sqr()).sum();
        assert!((err / norm).sqrt() < 1e-12);
    }

    #[test]
    fn spectrum_peak_sits_at_carrier() {
        // exp(-i Omega0 tau) must peak at Omega0
        let g = TemporalGrid::new(1024, -20.0, 20.0).unwrap();
        let sp = Spectral::new(1024);
        let w0 = 10.0 * g.d_omega();
        let samples: Vec<C64> = g
            .taus()
            .iter()
            .map(|&t| C64::from_polar(sech(t), -w0 * t))
            .collect();
        let s = sp.spectrum(&g, &samples);
        let m = (0..1024).max_by(|&a, &b| s[a].norm().total_cmp(&s[b].norm())).unwrap();
        assert!((g.omega(m) - w0).abs() < 1e-12);
        // |F[sech]|(0) = pi, up to the tails cut off outside the window
        let c = sp.spectrum(&g, &g.taus().iter().map(|&t| C64::new(sech(t), 0.0)).collect::<Vec<_>>());
        assert!((c[0].norm() - PI).abs() < 1e-7);
    }

    #[test]
    fn modulation_shapes() {
        let s = ModulationSpec::sine(1.3, 0.2);
        assert!((s.factor(1.3 / 4.0) - 0.8).abs() < 1e-15);
        assert!((s.factor(1.3 + 1.3 / 4.0) - 0.8).abs() < 1e-12);
        let t = ModulationSpec::truncated_sine(1.3, 0.2);
        assert!((t.factor(1.3 / 4.0) - 0.8).abs() < 1e-15);
        assert_eq!(t.factor(1.3 + 1.3 / 4.0), 1.0);
        assert_eq!(ModulationSpec::none().factor(0.7), 1.0);
        assert_eq!(ModulationSpec::sine(f64::INFINITY, 0.2).factor(0.7), 1.0);
        assert!(ModulationSpec::sine(0.0, 0.2).validate("d").is_err());
    }

    #[test]
    fn presets() {
        let m = FiberProfile::manakov(1.0);
        assert_eq!((m.self_phase, m.cross_phase, m.coherent), (8.0 / 9.0, 8.0 / 9.0, 0.0));
        assert!(m.birefringence.is_zero() && m.group_delay.is_zero());
        let b = FiberProfile::birefringent(1.0, 20.0, 2.0);
        assert_eq!((b.self_phase, b.cross_phase, b.coherent), (1.0, 2.0 / 3.0, 1.0 / 3.0));
        assert!(FiberProfile::manakov(0.0).validate().is_err());
    }
}
