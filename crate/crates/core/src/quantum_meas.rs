//! Homodyne-style measurements on the output pulse: squeezing ratio, local
//! oscillator phase optimization, and slot-resolved photon-number
//! correlation matrices in the time and frequency domains.
//!
//! Every measurement is a pairing of the vacuum input noise with a
//! backpropagated local oscillator, so all quantities reduce to overlaps of
//! adjoint fields at `zeta = 0` and `zeta = L`.

use std::f64::consts::PI;
use std::fmt;
use std::ops::Range;

use rayon::prelude::*;

use crate::analysis::pulse_split_index;
use crate::error::{Error, Result};
use crate::fluct::{adjoint_inner, backpropagate_many, backpropagate_staggered, overlap, AdjointField};
use crate::lattice::{TemporalGrid, C64};
use crate::nlse::Trajectory;

/// Slots whose filtered local oscillator carries less than this fraction of
/// the output energy are reported as undefined.
pub const MASK_THRESHOLD: f64 = 1e-12;

/// Number of uniformly spaced phases in the coarse scan of [`optimize_theta`].
pub const THETA_SCAN_POINTS: usize = 720;

const FLAT_TOLERANCE: f64 = 1e-10;

/// Local oscillator `U(L, tau) e^{i theta}`.
pub fn make_lo(traj: &Trajectory, theta: f64) -> AdjointField {
    AdjointField::from(traj.output()).scaled(C64::cis(theta))
}

fn output_energy(traj: &Trajectory) -> Result<f64> {
    let e = traj.output().energy();
    if !(e > 0.0) {
        return Err(Error::UndefinedMeasurement("output pulse has zero energy".into()));
    }
    Ok(e)
}

/// `R = integral ||f(0)||^2 / integral ||f(L)||^2` for the local oscillator
/// at phase `theta`.
pub fn squeezing_ratio(traj: &Trajectory, theta: f64) -> Result<f64> {
    let e = output_energy(traj)?;
    let lo = make_lo(traj, theta);
    let back = crate::fluct::backpropagate_adjoint(&lo, traj)?;
    Ok(back.norm_sqr() / e)
}

/// `R(theta)` for all phases at once. Backpropagation is real-linear, so
/// with `a = B(U_L)` and `b = B(i U_L)`,
/// `R(theta) = (cos^2 <a,a> + 2 sin cos <a,b> + sin^2 <b,b>) / E(L)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqueezingLandscape {
    pub aa: f64,
    pub ab: f64,
    pub bb: f64,
    pub energy: f64,
}

impl SqueezingLandscape {
    fn from_fields(a: &AdjointField, b: &AdjointField, energy: f64) -> Self {
        Self {
            aa: overlap(a, a),
            ab: overlap(a, b),
            bb: overlap(b, b),
            energy,
        }
    }

    pub fn ratio(&self, theta: f64) -> f64 {
        let (s, c) = theta.sin_cos();
        (c * c * self.aa + 2.0 * s * c * self.ab + s * s * self.bb) / self.energy
    }

    /// Exact minimum and maximum over `theta` (eigenvalues of the 2x2 form).
    pub fn eigen_range(&self) -> (f64, f64) {
        let mean = 0.5 * (self.aa + self.bb);
        let rad = (0.25 * (self.aa - self.bb).powi(2) + self.ab * self.ab).sqrt();
        ((mean - rad) / self.energy, (mean + rad) / self.energy)
    }
}

pub fn squeezing_landscape(traj: &Trajectory) -> Result<SqueezingLandscape> {
    let e = output_energy(traj)?;
    let lo = make_lo(traj, 0.0);
    let back = backpropagate_many(&[lo.clone(), lo.scaled(C64::new(0.0, 1.0))], traj)?;
    Ok(SqueezingLandscape::from_fields(&back[0], &back[1], e))
}

/// Best local oscillator phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaOptimum {
    /// Minimizing phase in `[0, 2 pi)`.
    pub theta: f64,
    pub r_min: f64,
    pub r_max: f64,
    /// `R` does not depend on `theta` (to within round-off); `theta` is then
    /// arbitrary.
    pub flat: bool,
}

/// Scan-and-refine minimization of a `2 pi`-periodic function: uniform scan
/// followed by a three-point parabolic step around the best sample.
pub fn minimize_periodic(f: impl Fn(f64) -> f64, points: usize) -> (f64, f64, f64) {
    let d = 2.0 * PI / points as f64;
    let values: Vec<f64> = (0..points).map(|i| f(i as f64 * d)).collect();
    let (best, &v0) = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("at least one scan point");
    let vmax = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let vm = values[(best + points - 1) % points];
    let vp = values[(best + 1) % points];
    let curv = vm - 2.0 * v0 + vp;
    let mut theta = best as f64 * d;
    let mut value = v0;
    if curv > 0.0 {
        let t = theta + 0.5 * d * (vm - vp) / curv;
        let v = f(t);
        if v < value {
            theta = t;
            value = v;
        }
    }
    (theta.rem_euclid(2.0 * PI), value, vmax)
}

/// Minimizes `R(theta)` over `[0, 2 pi)` with a 720-point scan and parabolic
/// refinement.
pub fn optimize_theta(traj: &Trajectory) -> Result<ThetaOptimum> {
    let land = squeezing_landscape(traj)?;
    Ok(optimize_landscape(&land))
}

pub fn optimize_landscape(land: &SqueezingLandscape) -> ThetaOptimum {
    let (theta, r_min, r_max) = minimize_periodic(|t| land.ratio(t), THETA_SCAN_POINTS);
    ThetaOptimum {
        theta,
        r_min,
        r_max,
        flat: r_max - r_min <= FLAT_TOLERANCE * r_max.abs().max(1.0),
    }
}

/// `min_theta R` at `samples + 1` evenly spaced distances `zeta_k` (one
/// shared reverse sweep). Returns `(zeta, r_min)` pairs.
pub fn squeezing_curve(traj: &Trajectory, samples: usize) -> Result<Vec<(f64, f64)>> {
    let n = traj.n_steps();
    let samples = samples.clamp(1, n);
    let mut steps: Vec<usize> = (0..=samples).map(|j| (j * n + samples / 2) / samples).collect();
    steps.dedup();
    let mut seeds = Vec::new();
    let mut energies = Vec::new();
    for &k in &steps {
        let snap = traj.snapshot(k);
        let e = snap.energy();
        if !(e > 0.0) {
            return Err(Error::UndefinedMeasurement(format!("zero energy at step {k}")));
        }
        let f = AdjointField::from(snap.as_ref());
        seeds.push((k, f.scaled(C64::new(0.0, 1.0))));
        seeds.push((k, f));
        energies.push(e);
    }
    let back = backpropagate_staggered(&seeds, traj)?;
    Ok(steps
        .iter()
        .enumerate()
        .map(|(j, &k)| {
            let land = SqueezingLandscape::from_fields(&back[2 * j + 1], &back[2 * j], energies[j]);
            (traj.zeta(k), land.eigen_range().0)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Time,
    Frequency,
}

impl Domain {
    pub fn name(&self) -> &'static str {
        match self {
            Domain::Time => "time",
            Domain::Frequency => "frequency",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "time" => Some(Domain::Time),
            "frequency" => Some(Domain::Frequency),
            _ => None,
        }
    }

    pub fn resolution(&self, grid: &TemporalGrid) -> f64 {
        match self {
            Domain::Time => grid.d_tau(),
            Domain::Frequency => grid.d_omega(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarization {
    X,
    Y,
    Both,
}

/// Rectangular slots `[center - width/2, center + width/2)` in `tau` or
/// `Omega`.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotSpec {
    pub domain: Domain,
    pub centers: Vec<f64>,
    pub width: f64,
}

impl SlotSpec {
    pub fn new(domain: Domain, centers: Vec<f64>, width: f64) -> Self {
        Self { domain, centers, width }
    }

    /// `count` contiguous slots tiling `[start, end)`.
    pub fn contiguous(domain: Domain, start: f64, end: f64, count: usize) -> Self {
        let width = (end - start) / count as f64;
        let centers = (0..count).map(|i| start + (i as f64 + 0.5) * width).collect();
        Self { domain, centers, width }
    }

    /// Default time-domain layout: 80 slots of width 0.5 over `[-20, 20)`.
    pub fn default_time() -> Self {
        Self::contiguous(Domain::Time, -20.0, 20.0, 80)
    }

    /// One slot per spectral bin with `Omega` in `[lo, hi]`.
    pub fn frequency_bins(grid: &TemporalGrid, lo: f64, hi: f64) -> Self {
        let d = grid.d_omega();
        let first = (lo / d).ceil() as i64;
        let last = (hi / d).floor() as i64;
        Self {
            domain: Domain::Frequency,
            centers: (first..=last).map(|m| m as f64 * d).collect(),
            width: d,
        }
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn validate(&self, grid: &TemporalGrid) -> Result<()> {
        if self.centers.is_empty() {
            return Err(Error::param("slots.centers", "at least one slot is required"));
        }
        if !(self.width > 0.0 && self.width.is_finite()) {
            return Err(Error::param("slots.width", format!("must be positive, got {}", self.width)));
        }
        let res = self.domain.resolution(grid);
        if self.width < res * (1.0 - 1e-9) {
            return Err(Error::param(
                "slots.width",
                format!("{} is below the {} resolution {res}", self.width, self.domain.name()),
            ));
        }
        for w in self.centers.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::param("slots.centers", "centers must be strictly increasing"));
            }
            if w[1] - w[0] < self.width - 1e-12 {
                return Err(Error::param(
                    "slots.centers",
                    format!("slots at {} and {} overlap for width {}", w[0], w[1], self.width),
                ));
            }
        }
        if self.centers.iter().any(|c| !c.is_finite()) {
            return Err(Error::param("slots.centers", "centers must be finite"));
        }
        Ok(())
    }

    /// Number of slots whose center lies below `split`.
    pub fn count_below(&self, split: f64) -> usize {
        self.centers.iter().filter(|&&c| c < split).count()
    }
}

fn in_window(x: f64, center: f64, width: f64, eps: f64) -> bool {
    x >= center - 0.5 * width - eps && x < center + 0.5 * width - eps
}

/// A filtered local oscillator; `empty` is set when the slot selects no
/// grid samples.
#[derive(Debug, Clone, PartialEq)]
pub struct FilteredLo {
    pub field: AdjointField,
    pub empty: bool,
}

fn filter(lo: &AdjointField, domain: Domain, center: f64, width: f64, pol: Polarization, traj: &Trajectory) -> FilteredLo {
    let grid = *lo.grid();
    let n = grid.n_points();
    let eps = 1e-9 * domain.resolution(&grid);
    let keep_x = pol != Polarization::Y;
    let keep_y = pol != Polarization::X;
    let zero = C64::new(0.0, 0.0);
    let (mut fx, mut fy) = (lo.fx().to_vec(), lo.fy().to_vec());
    let empty;
    match domain {
        Domain::Time => {
            let mask: Vec<bool> = (0..n).map(|i| in_window(grid.tau(i), center, width, eps)).collect();
            empty = !mask.iter().any(|&m| m);
            for i in 0..n {
                if !mask[i] || !keep_x {
                    fx[i] = zero;
                }
                if !mask[i] || !keep_y {
                    fy[i] = zero;
                }
            }
        }
        Domain::Frequency => {
            let norm = 1.0 / n as f64;
            let mult: Vec<C64> = (0..n)
                .map(|m| {
                    if in_window(grid.omega(m), center, width, eps) {
                        C64::new(norm, 0.0)
                    } else {
                        zero
                    }
                })
                .collect();
            empty = mult.iter().all(|z| z.re == 0.0);
            let spectral = traj.propagator().spectral();
            let mut scratch = spectral.make_scratch();
            for (buf, keep) in [(&mut fx, keep_x), (&mut fy, keep_y)] {
                if keep {
                    spectral.apply_multiplier(buf, &mult, &mut scratch);
                } else {
                    buf.iter_mut().for_each(|z| *z = zero);
                }
            }
        }
    }
    FilteredLo {
        field: AdjointField::new(grid, fx, fy).expect("grid matches"),
        empty,
    }
}

/// Local oscillator at phase `theta` restricted to one slot and polarization.
pub fn filtered_lo(
    traj: &Trajectory,
    theta: f64,
    domain: Domain,
    center: f64,
    width: f64,
    pol: Polarization,
) -> FilteredLo {
    filter(&make_lo(traj, theta), domain, center, width, pol, traj)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorrelationKind {
    Xx,
    Yy,
    Xy,
    Complete,
}

impl CorrelationKind {
    pub const ALL: [CorrelationKind; 4] = [
        CorrelationKind::Xx,
        CorrelationKind::Yy,
        CorrelationKind::Xy,
        CorrelationKind::Complete,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            CorrelationKind::Xx => "xx",
            CorrelationKind::Yy => "yy",
            CorrelationKind::Xy => "xy",
            CorrelationKind::Complete => "complete",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        CorrelationKind::ALL.into_iter().find(|k| k.name() == s)
    }

    /// Polarizations of the left and right measurement operators.
    pub fn polarizations(&self) -> (Polarization, Polarization) {
        match self {
            CorrelationKind::Xx => (Polarization::X, Polarization::X),
            CorrelationKind::Yy => (Polarization::Y, Polarization::Y),
            CorrelationKind::Xy => (Polarization::X, Polarization::Y),
            CorrelationKind::Complete => (Polarization::Both, Polarization::Both),
        }
    }
}

impl fmt::Display for CorrelationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Smallest and largest defined entries and where they occur.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extrema {
    pub min: f64,
    pub min_at: (usize, usize),
    pub max: f64,
    pub max_at: (usize, usize),
}

/// Normalized, normally ordered photon-number covariance between slots.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    pub slots: SlotSpec,
    pub kind: CorrelationKind,
    /// Row-major symmetric values; masked entries hold NaN.
    pub values: Vec<f64>,
    pub masked: Vec<bool>,
    pub theta: f64,
    pub meta: String,
    /// Largest imaginary part seen in the complex evaluation of the
    /// normalized numerators.
    pub imag_residue: f64,
}

impl CorrelationMatrix {
    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let k = i * self.len() + j;
        if self.masked[k] {
            None
        } else {
            Some(self.values[k])
        }
    }

    pub fn extrema_where(&self, select: impl Fn(usize, usize) -> bool) -> Option<Extrema> {
        let n = self.len();
        let mut out: Option<Extrema> = None;
        for i in 0..n {
            for j in 0..n {
                let Some(v) = self.get(i, j).filter(|_| select(i, j)) else {
                    continue;
                };
                let e = out.get_or_insert(Extrema {
                    min: v,
                    min_at: (i, j),
                    max: v,
                    max_at: (i, j),
                });
                if v < e.min {
                    e.min = v;
                    e.min_at = (i, j);
                }
                if v > e.max {
                    e.max = v;
                    e.max_at = (i, j);
                }
            }
        }
        out
    }

    pub fn extrema(&self) -> Option<Extrema> {
        self.extrema_where(|_, _| true)
    }

    /// Extrema over the block `rows x cols`.
    pub fn block_extrema(&self, rows: Range<usize>, cols: Range<usize>) -> Option<Extrema> {
        self.extrema_where(|i, j| rows.contains(&i) && cols.contains(&j))
    }

    /// Intra- and interpulse extrema when slots `0..split` belong to the
    /// first pulse and `split..` to the second.
    pub fn pulse_extrema(&self, split: usize) -> PulseExtrema {
        PulseExtrema {
            intra: self.extrema_where(|i, j| (i < split) == (j < split)),
            inter: self.extrema_where(|i, j| (i < split) != (j < split)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseExtrema {
    pub intra: Option<Extrema>,
    pub inter: Option<Extrema>,
}

/// `tau` of the intensity dip between the two dominant output pulses, or 0
/// when the output is a single pulse.
pub fn pulse_split_tau(traj: &Trajectory) -> f64 {
    let out = traj.output();
    pulse_split_index(&out.intensity(), 0.05)
        .map(|i| out.grid().tau(i))
        .unwrap_or(0.0)
}

struct SlotFields {
    at_l: Vec<AdjointField>,
    at_0: Vec<AdjointField>,
}

fn slot_fields(traj: &Trajectory, theta: f64, slots: &SlotSpec, pol: Polarization) -> Result<SlotFields> {
    let lo = make_lo(traj, theta);
    let at_l: Vec<AdjointField> = slots
        .centers
        .iter()
        .map(|&c| filter(&lo, slots.domain, c, slots.width, pol, traj).field)
        .collect();
    let at_0 = backpropagate_many(&at_l, traj)?;
    Ok(SlotFields { at_l, at_0 })
}

fn combine(x: &SlotFields, y: &SlotFields) -> Result<SlotFields> {
    let sum = |a: &[AdjointField], b: &[AdjointField]| -> Result<Vec<AdjointField>> {
        a.iter().zip(b).map(|(p, q)| p.added(q)).collect()
    };
    Ok(SlotFields {
        at_l: sum(&x.at_l, &y.at_l)?,
        at_0: sum(&x.at_0, &y.at_0)?,
    })
}

/// Raw numerators `N_ij` (complex evaluation) before normalization.
fn numerators(left: &SlotFields, right: &SlotFields) -> Vec<C64> {
    let n = left.at_l.len();
    (0..n * n)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k / n, k % n);
            adjoint_inner(&left.at_0[i], &right.at_0[j]) - adjoint_inner(&left.at_l[i], &right.at_l[j])
        })
        .collect()
}

fn assemble(
    traj: &Trajectory,
    theta: f64,
    slots: &SlotSpec,
    kind: CorrelationKind,
    left: &SlotFields,
    right: &SlotFields,
    energy: f64,
) -> Result<CorrelationMatrix> {
    let n = slots.len();
    let threshold = MASK_THRESHOLD * energy;
    let ln: Vec<f64> = left.at_l.iter().map(|f| f.norm_sqr()).collect();
    let rn: Vec<f64> = right.at_l.iter().map(|f| f.norm_sqr()).collect();
    let raw_num = numerators(left, right);
    let mut raw = vec![f64::NAN; n * n];
    let mut raw_mask = vec![true; n * n];
    let mut imag_residue: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            if ln[i] < threshold || rn[j] < threshold {
                continue;
            }
            let d = (ln[i] * rn[j]).sqrt();
            let z = raw_num[i * n + j] / d;
            imag_residue = imag_residue.max(z.im.abs());
            raw[i * n + j] = z.re;
            raw_mask[i * n + j] = false;
        }
    }
    let mut values = vec![f64::NAN; n * n];
    let mut masked = vec![true; n * n];
    for i in 0..n {
        for j in 0..n {
            let (a, b) = (i * n + j, j * n + i);
            if !raw_mask[a] && !raw_mask[b] {
                values[a] = 0.5 * (raw[a] + raw[b]);
                masked[a] = false;
            }
        }
    }
    if masked.iter().all(|&m| m) {
        return Err(Error::UndefinedMeasurement(format!(
            "every {} slot carries less than {MASK_THRESHOLD:e} of the output energy",
            kind.name()
        )));
    }
    Ok(CorrelationMatrix {
        slots: slots.clone(),
        kind,
        values,
        masked,
        theta,
        meta: trajectory_meta(traj),
        imag_residue,
    })
}

/// One-line description of the trajectory a measurement was taken on.
pub fn trajectory_meta(traj: &Trajectory) -> String {
    let g = traj.grid();
    format!(
        "n_points={} tau_min={} tau_max={} n_steps={} {}",
        g.n_points(),
        g.tau_min(),
        g.tau_max(),
        traj.n_steps(),
        traj.profile().descriptor()
    )
}

/// Correlation matrices of several kinds sharing one set of slot
/// backpropagations. Polarization-resolved kinds backpropagate `x`- and
/// `y`-filtered oscillators; the complete kind uses their sum.
pub fn correlation_matrices(
    traj: &Trajectory,
    theta: f64,
    slots: &SlotSpec,
    kinds: &[CorrelationKind],
) -> Result<Vec<CorrelationMatrix>> {
    slots.validate(traj.grid())?;
    let energy = output_energy(traj)?;
    let resolved = kinds.iter().any(|k| *k != CorrelationKind::Complete);
    let (x, y, both) = if resolved {
        let x = slot_fields(traj, theta, slots, Polarization::X)?;
        let y = slot_fields(traj, theta, slots, Polarization::Y)?;
        let both = if kinds.contains(&CorrelationKind::Complete) {
            Some(combine(&x, &y)?)
        } else {
            None
        };
        (Some(x), Some(y), both)
    } else {
        (None, None, Some(slot_fields(traj, theta, slots, Polarization::Both)?))
    };
    kinds
        .iter()
        .map(|&kind| {
            let (l, r) = match kind {
                CorrelationKind::Xx => (x.as_ref(), x.as_ref()),
                CorrelationKind::Yy => (y.as_ref(), y.as_ref()),
                CorrelationKind::Xy => (x.as_ref(), y.as_ref()),
                CorrelationKind::Complete => (both.as_ref(), both.as_ref()),
            };
            let (l, r) = (l.expect("fields prepared"), r.expect("fields prepared"));
            assemble(traj, theta, slots, kind, l, r, energy)
        })
        .collect()
}

/// Correlation matrix `C_kn(tau_i, tau_j)` (time slots) or
/// `S_kn(Omega_i, Omega_j)` (frequency slots).
pub fn correlation_matrix(
    traj: &Trajectory,
    theta: f64,
    slots: &SlotSpec,
    kind: CorrelationKind,
) -> Result<CorrelationMatrix> {
    Ok(correlation_matrices(traj, theta, slots, &[kind])?.remove(0))
}

/// Frequency-domain correlation matrix.
pub fn spectral_correlation_matrix(
    traj: &Trajectory,
    theta: f64,
    slots: &SlotSpec,
    kind: CorrelationKind,
) -> Result<CorrelationMatrix> {
    if slots.domain != Domain::Frequency {
        return Err(Error::InvalidArgument("spectral correlations need frequency slots".into()));
    }
    correlation_matrix(traj, theta, slots, kind)
}

/// Unnormalized, unsymmetrized numerators `N_ij` between `left`-filtered
/// slot `i` and `right`-filtered slot `j`, together with the shot-noise
/// terms that were subtracted.
#[derive(Debug, Clone, PartialEq)]
pub struct Numerators {
    pub values: Vec<f64>,
    pub shot_noise: Vec<f64>,
    pub n: usize,
}

pub fn slot_numerators(
    traj: &Trajectory,
    theta: f64,
    slots: &SlotSpec,
    left: Polarization,
    right: Polarization,
) -> Result<Numerators> {
    slots.validate(traj.grid())?;
    let l = slot_fields(traj, theta, slots, left)?;
    let r = if left == right {
        None
    } else {
        Some(slot_fields(traj, theta, slots, right)?)
    };
    let r = r.as_ref().unwrap_or(&l);
    let n = slots.len();
    let values = numerators(&l, r).iter().map(|z| z.re).collect();
    let shot_noise = (0..n * n)
        .map(|k| adjoint_inner(&l.at_l[k / n], &r.at_l[k % n]).re)
        .collect();
    Ok(Numerators { values, shot_noise, n })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{make_initial_pair, make_initial_single, FiberProfile, ModulationSpec};
    use crate::nlse::propagate_classical;

    fn soliton_traj(length: f64, n_steps: usize) -> Trajectory {
        let g = TemporalGrid::new(512, -20.0, 20.0).unwrap();
        let f0 = make_initial_single(g, 3.0 / (2.0 * 2f64.sqrt())).unwrap();
        propagate_classical(&f0, &FiberProfile::manakov(length), n_steps).unwrap()
    }

    fn split_traj() -> Trajectory {
        let g = TemporalGrid::new(512, -20.0, 20.0).unwrap();
        let f0 = make_initial_pair(g, 2.0, 3.0, 1.0).unwrap();
        let profile = FiberProfile::manakov(2.0).with_dispersion_modulation(ModulationSpec::sine(1.3, 0.2));
        propagate_classical(&f0, &profile, 400).unwrap()
    }

    #[test]
    fn lo_examples() {
        let t = soliton_traj(1.0, 50);
        let out = AdjointField::from(t.output());
        assert_eq!(make_lo(&t, 0.0), out);
        let neg = make_lo(&t, PI);
        for (a, b) in neg.fx().iter().zip(out.fx()) {
            assert!((a + b).norm() < 1e-15);
        }
        for theta in [0.3, 1.7, 4.0] {
            let e = make_lo(&t, theta).norm_sqr();
            assert!((e - t.output().energy()).abs() < 1e-12 * e);
        }
    }

    #[test]
    fn landscape_agrees_with_direct_ratio() {
        let t = split_traj();
        let land = squeezing_landscape(&t).unwrap();
        for theta in [0.0, 0.4, 1.9, 3.3, 5.9] {
            let direct = squeezing_ratio(&t, theta).unwrap();
            assert!((land.ratio(theta) - direct).abs() < 1e-10 * direct);
            let shifted = squeezing_ratio(&t, theta + PI).unwrap();
            assert!((shifted - direct).abs() < 1e-10 * direct);
        }
        let opt = optimize_landscape(&land);
        let (lo, hi) = land.eigen_range();
        assert!((opt.r_min - lo).abs() < 1e-6 * lo, "{} vs {lo}", opt.r_min);
        assert!((opt.r_max - hi).abs() < 1e-4 * hi);
        assert!(!opt.flat);
        assert!(opt.r_min < 1.0);
    }

    #[test]
    fn soliton_is_squeezed() {
        let t = soliton_traj(2.0 * PI, 1257);
        let opt = optimize_theta(&t).unwrap();
        assert!(opt.r_min < 1.0 && opt.r_min > 0.0, "{}", opt.r_min);
        // an independent finer run agrees
        let g = TemporalGrid::new(1024, -20.0, 20.0).unwrap();
        let f0 = make_initial_single(g, 3.0 / (2.0 * 2f64.sqrt())).unwrap();
        let fine = propagate_classical(&f0, &FiberProfile::manakov(2.0 * PI), 2514).unwrap();
        let opt_fine = optimize_theta(&fine).unwrap();
        assert!((opt.r_min - opt_fine.r_min).abs() < 0.02 * opt_fine.r_min, "{} {}", opt.r_min, opt_fine.r_min);
    }

    #[test]
    fn linear_fiber_is_shot_noise_limited() {
        let g = TemporalGrid::new(256, -20.0, 20.0).unwrap();
        let f0 = make_initial_pair(g, 2.0, 2.0, 0.5).unwrap();
        let t = propagate_classical(&f0, &FiberProfile::linear(2.0), 80).unwrap();
        let opt = optimize_theta(&t).unwrap();
        assert!((opt.r_min - 1.0).abs() < 1e-9);
        assert!(opt.flat);
        let slots = SlotSpec::contiguous(Domain::Time, -10.0, 10.0, 20);
        for m in correlation_matrices(&t, 0.7, &slots, &CorrelationKind::ALL).unwrap() {
            let e = m.extrema().unwrap();
            assert!(e.min.abs() < 1e-9 && e.max.abs() < 1e-9, "{:?}", m.kind);
        }
    }

    #[test]
    fn zero_output_is_undefined() {
        let g = TemporalGrid::new(64, -10.0, 10.0).unwrap();
        let t = propagate_classical(&crate::lattice::PolarizedField::zeros(g), &FiberProfile::manakov(1.0), 5).unwrap();
        assert!(matches!(squeezing_ratio(&t, 0.0), Err(Error::UndefinedMeasurement(_))));
        let slots = SlotSpec::contiguous(Domain::Time, -10.0, 10.0, 4);
        assert!(matches!(
            correlation_matrix(&t, 0.0, &slots, CorrelationKind::Complete),
            Err(Error::UndefinedMeasurement(_))
        ));
    }

    #[test]
    fn filters() {
        let t = split_traj();
        let g = *t.grid();
        let whole = filtered_lo(&t, 0.5, Domain::Time, 0.0, 40.0, Polarization::Both);
        assert_eq!(whole.field, make_lo(&t, 0.5));
        assert!(!whole.empty);
        let a = filtered_lo(&t, 0.5, Domain::Time, -1.0, 1.0, Polarization::Both);
        let b = filtered_lo(&t, 0.5, Domain::Time, 0.0, 1.0, Polarization::Both);
        assert_eq!(adjoint_inner(&a.field, &b.field), C64::new(0.0, 0.0));
        let x = filtered_lo(&t, 0.5, Domain::Time, -1.0, 1.0, Polarization::X);
        assert!(x.field.fy().iter().all(|z| *z == C64::new(0.0, 0.0)));
        let outside = filtered_lo(&t, 0.5, Domain::Time, 100.0, 1.0, Polarization::Both);
        assert!(outside.empty && outside.field.norm_sqr() == 0.0);

        let full_band = filtered_lo(&t, 0.5, Domain::Frequency, 0.0, g.d_omega() * g.n_points() as f64 * 1.01, Polarization::Both);
        let lo = make_lo(&t, 0.5);
        for (p, q) in full_band.field.fx().iter().zip(lo.fx()) {
            assert!((p - q).norm() < 1e-12);
        }
        let fa = filtered_lo(&t, 0.5, Domain::Frequency, 1.0, 0.5, Polarization::Both);
        let fb = filtered_lo(&t, 0.5, Domain::Frequency, 1.5, 0.5, Polarization::Both);
        assert!(adjoint_inner(&fa.field, &fb.field).norm() < 1e-12 * fa.field.norm_sqr());
    }

    #[test]
    fn slot_validation() {
        let g = TemporalGrid::default();
        assert!(SlotSpec::default_time().validate(&g).is_ok());
        assert_eq!(SlotSpec::default_time().centers[0], -19.75);
        assert!(SlotSpec::new(Domain::Time, vec![0.0, 0.4], 0.5).validate(&g).is_err());
        assert!(SlotSpec::new(Domain::Time, vec![1.0, 0.0], 0.5).validate(&g).is_err());
        assert!(SlotSpec::new(Domain::Time, vec![0.0], 1e-4).validate(&g).is_err());
        assert!(SlotSpec::new(Domain::Frequency, vec![0.0], 0.1).validate(&g).is_err());
        let bins = SlotSpec::frequency_bins(&g, -1.0, 1.0);
        assert!(bins.validate(&g).is_ok());
        assert_eq!(bins.len(), 13);
    }

    #[test]
    fn shot_noise_and_additivity() {
        let t = split_traj();
        let slots = SlotSpec::contiguous(Domain::Time, -8.0, 8.0, 16);
        let n = slots.len();
        let get = |l, r| slot_numerators(&t, 0.9, &slots, l, r).unwrap();
        use Polarization::*;
        let xx = get(X, X);
        let yy = get(Y, Y);
        let xy = get(X, Y);
        let yx = get(Y, X);
        let cc = get(Both, Both);
        for i in 0..n {
            for j in 0..n {
                let k = i * n + j;
                if i != j {
                    assert_eq!(xx.shot_noise[k], 0.0);
                    assert_eq!(cc.shot_noise[k], 0.0);
                }
                assert_eq!(xy.shot_noise[k], 0.0);
                let sum = xx.values[k] + yy.values[k] + xy.values[k] + yx.values[k];
                assert!((cc.values[k] - sum).abs() < 1e-9, "{i} {j}");
            }
            let lo = filtered_lo(&t, 0.9, Domain::Time, slots.centers[i], slots.width, Both);
            assert!((cc.shot_noise[i * n + i] - lo.field.norm_sqr()).abs() <= 1e-15 * lo.field.norm_sqr().max(1.0));
        }
        // the shot-noise terms do not depend on theta
        let other = slot_numerators(&t, 2.1, &slots, Both, Both).unwrap();
        for (a, b) in other.shot_noise.iter().zip(&cc.shot_noise) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn single_slot_diagonal_is_ratio_minus_one() {
        let t = split_traj();
        let theta = 1.1;
        let slots = SlotSpec::new(Domain::Time, vec![0.0], 40.0);
        let c = correlation_matrix(&t, theta, &slots, CorrelationKind::Complete).unwrap();
        let r = squeezing_ratio(&t, theta).unwrap();
        assert!((1.0 + c.get(0, 0).unwrap() - r).abs() < 1e-9);
        let g = *t.grid();
        let band = SlotSpec::new(Domain::Frequency, vec![0.0], g.d_omega() * g.n_points() as f64 * 1.01);
        let s = spectral_correlation_matrix(&t, theta, &band, CorrelationKind::Complete).unwrap();
        assert!((s.get(0, 0).unwrap() - c.get(0, 0).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn matrices_are_symmetric_and_bounded() {
        let t = split_traj();
        let slots = SlotSpec::contiguous(Domain::Time, -20.0, 20.0, 40);
        let theta = optimize_theta(&t).unwrap().theta;
        for m in correlation_matrices(&t, theta, &slots, &CorrelationKind::ALL).unwrap() {
            let n = m.len();
            for i in 0..n {
                if let Some(d) = m.get(i, i) {
                    assert!(d >= -1.0, "{:?} diagonal {d}", m.kind);
                }
                for j in 0..n {
                    assert_eq!(m.masked[i * n + j], m.masked[j * n + i]);
                    if !m.masked[i * n + j] {
                        assert_eq!(m.values[i * n + j].to_bits(), m.values[j * n + i].to_bits());
                    }
                }
            }
            assert!(m.imag_residue < 1e-8);
        }
        // complete from the combined fields equals a direct complete run
        let direct = correlation_matrix(&t, theta, &slots, CorrelationKind::Complete).unwrap();
        let combined = &correlation_matrices(&t, theta, &slots, &[CorrelationKind::Xx, CorrelationKind::Complete]).unwrap()[1];
        for (a, b) in direct.values.iter().zip(&combined.values) {
            assert!((a - b).abs() < 1e-9 || (a.is_nan() && b.is_nan()));
        }
    }

    #[test]
    fn squeezing_curve_endpoints() {
        let t = split_traj();
        let curve = squeezing_curve(&t, 8).unwrap();
        assert_eq!(curve.len(), 9);
        assert_eq!(curve[0].0, 0.0);
        assert!((curve[0].1 - 1.0).abs() < 1e-14);
        let (z, r) = *curve.last().unwrap();
        assert!((z - 2.0).abs() < 1e-12);
        let opt = optimize_theta(&t).unwrap();
        assert!((r - opt.r_min).abs() < 1e-6 * r);
    }

    #[test]
    fn periodic_minimizer() {
        let f = |t: f64| 2.0 + (t - 1.234).cos();
        let (theta, v, vmax) = minimize_periodic(f, 720);
        assert!((theta - (1.234 + PI)).abs() < 1e-5);
        assert!((v - 1.0).abs() < 1e-10 && (vmax - 3.0).abs() < 1e-4);
    }
}
