//! Linearized fluctuation dynamics along a stored classical trajectory.
//!
//! Perturbations `v` evolve forward under the tangent map of each split step.
//! Adjoint fields `f` evolve backward under the transpose of that map with
//! respect to the real pairing `Re integral(f* v) dtau`, which keeps
//! `<f(zeta) | v(zeta)>` invariant to round-off.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::{PolarizedField, TemporalGrid, C64};
use crate::nlse::{apply_jacobians, apply_jacobians_transposed, Half, Propagator, Trajectory};

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Adjoint field `(f_x, f_y)`; the conjugate components of the four-vector
/// `(f_x, f_x*, f_y, f_y*)` are implied.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointField {
    grid: TemporalGrid,
    fx: Vec<C64>,
    fy: Vec<C64>,
}

/// c-number perturbation `(v_x, v_y)` of the classical field.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationField {
    grid: TemporalGrid,
    vx: Vec<C64>,
    vy: Vec<C64>,
}

macro_rules! pair_field {
    ($ty:ident, $x:ident, $y:ident) => {
        impl $ty {
            pub fn new(grid: TemporalGrid, $x: Vec<C64>, $y: Vec<C64>) -> Result<Self> {
                let n = grid.n_points();
                if $x.len() != n || $y.len() != n {
                    return Err(Error::InvalidArgument(format!(
                        "component lengths {} and {} do not match grid size {n}",
                        $x.len(),
                        $y.len()
                    )));
                }
                Ok(Self { grid, $x, $y })
            }

            pub fn zeros(grid: TemporalGrid) -> Self {
                let n = grid.n_points();
                Self {
                    grid,
                    $x: vec![C64::new(0.0, 0.0); n],
                    $y: vec![C64::new(0.0, 0.0); n],
                }
            }

            pub fn grid(&self) -> &TemporalGrid {
                &self.grid
            }

            pub fn $x(&self) -> &[C64] {
                &self.$x
            }

            pub fn $y(&self) -> &[C64] {
                &self.$y
            }

            pub fn into_parts(self) -> (TemporalGrid, Vec<C64>, Vec<C64>) {
                (self.grid, self.$x, self.$y)
            }

            /// `integral (|x|^2 + |y|^2) dtau`.
            pub fn norm_sqr(&self) -> f64 {
                let s: f64 = self.$x.iter().chain(&self.$y).map(|z| z.norm_sqr()).sum();
                s * self.grid.d_tau()
            }

            /// Multiplies both components by a complex constant.
            pub fn scaled(&self, factor: C64) -> Self {
                Self {
                    grid: self.grid,
                    $x: self.$x.iter().map(|z| z * factor).collect(),
                    $y: self.$y.iter().map(|z| z * factor).collect(),
                }
            }

            /// Componentwise sum of two fields on the same grid.
            pub fn added(&self, other: &Self) -> Result<Self> {
                if self.grid != other.grid {
                    return Err(Error::InvalidArgument("sum of fields on different grids".into()));
                }
                Ok(Self {
                    grid: self.grid,
                    $x: self.$x.iter().zip(&other.$x).map(|(a, b)| a + b).collect(),
                    $y: self.$y.iter().zip(&other.$y).map(|(a, b)| a + b).collect(),
                })
            }

            pub fn conj(&self) -> Self {
                Self {
                    grid: self.grid,
                    $x: self.$x.iter().map(|z| z.conj()).collect(),
                    $y: self.$y.iter().map(|z| z.conj()).collect(),
                }
            }

            pub fn is_finite(&self) -> bool {
                self.$x.iter().chain(&self.$y).all(|z| z.re.is_finite() && z.im.is_finite())
            }
        }

        impl From<&PolarizedField> for $ty {
            fn from(f: &PolarizedField) -> Self {
                Self {
                    grid: *f.grid(),
                    $x: f.ux().to_vec(),
                    $y: f.uy().to_vec(),
                }
            }
        }
    };
}

pair_field!(AdjointField, fx, fy);
pair_field!(PerturbationField, vx, vy);

fn check_grid(expected: &TemporalGrid, got: &TemporalGrid, what: &str) -> Result<()> {
    if expected != got {
        return Err(Error::InvalidArgument(format!(
            "{what} grid {got:?} does not match trajectory grid {expected:?}"
        )));
    }
    Ok(())
}

/// `(1/2) integral (f_x v_x* + f_x* v_x + f_y v_y* + f_y* v_y) dtau`.
///
/// For c-number arguments the value is real; callers asserting realness
/// should allow `|imag| < 1e-10`.
pub fn inner_product(a: &AdjointField, v: &PerturbationField) -> Result<C64> {
    if a.grid != v.grid {
        return Err(Error::InvalidArgument("inner product of fields on different grids".into()));
    }
    let mut s = C64::new(0.0, 0.0);
    for (f, u) in a.fx.iter().zip(&v.vx).chain(a.fy.iter().zip(&v.vy)) {
        s += f * u.conj() + f.conj() * u;
    }
    Ok(s * (0.5 * a.grid.d_tau()))
}

/// Real overlap `Re integral (a_x b_x* + a_y b_y*) dtau` of two adjoint fields.
pub fn overlap(a: &AdjointField, b: &AdjointField) -> f64 {
    let s: f64 = a
        .fx
        .iter()
        .zip(&b.fx)
        .chain(a.fy.iter().zip(&b.fy))
        .map(|(p, q)| p.re * q.re + p.im * q.im)
        .sum();
    s * a.grid.d_tau()
}

/// `(1/2) integral (a_x b_x* + a_x* b_x + a_y b_y* + a_y* b_y) dtau`, the
/// pairing of two adjoint four-vectors, evaluated in complex arithmetic.
pub fn adjoint_inner(a: &AdjointField, b: &AdjointField) -> C64 {
    let mut s = C64::new(0.0, 0.0);
    for (p, q) in a.fx.iter().zip(&b.fx).chain(a.fy.iter().zip(&b.fy)) {
        s += p * q.conj() + p.conj() * q;
    }
    s * (0.5 * a.grid.d_tau())
}

fn conj_all(v: &[C64]) -> Vec<C64> {
    v.iter().map(|z| z.conj()).collect()
}

fn conj_multipliers(p: &Propagator, step: usize, half: Half) -> (Vec<C64>, Vec<C64>) {
    let (mx, my) = p.linear_multipliers(step, half);
    (conj_all(&mx), conj_all(&my))
}

fn blowup(step: usize, what: &str) -> Error {
    Error::NumericalBlowup {
        step,
        reason: format!("non-finite {what} value"),
    }
}

/// Integrates the linearized system from `zeta = 0` to `L`.
pub fn propagate_fluctuation(v0: &PerturbationField, traj: &Trajectory) -> Result<PerturbationField> {
    let p = traj.propagator();
    check_grid(traj.grid(), &v0.grid, "perturbation")?;
    let (grid, mut vx, mut vy) = v0.clone().into_parts();
    let mut scratch = p.spectral().make_scratch();
    traj.for_each_stage(|k, stage| {
        p.apply_linear(&mut vx, &mut vy, &p.linear_multipliers(k, Half::First), &mut scratch);
        let jac = p.nonlinear_jacobians(stage.ux(), stage.uy());
        apply_jacobians(&jac, &mut vx, &mut vy);
        p.apply_linear(&mut vx, &mut vy, &p.linear_multipliers(k, Half::Second), &mut scratch);
        if vx.iter().chain(&vy).any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(blowup(k + 1, "perturbation"));
        }
        Ok(())
    })?;
    PerturbationField::new(grid, vx, vy)
}

/// Backpropagates `f_L` from `zeta = L` to `zeta = 0` with the exact
/// transpose of the forward fluctuation step.
pub fn backpropagate_adjoint(f_l: &AdjointField, traj: &Trajectory) -> Result<AdjointField> {
    Ok(backpropagate_many(std::slice::from_ref(f_l), traj)?.remove(0))
}

/// Backpropagates several adjoint fields in one reverse sweep over the
/// trajectory. Fields are processed in parallel; each result is independent
/// of the thread count.
pub fn backpropagate_many(fields: &[AdjointField], traj: &Trajectory) -> Result<Vec<AdjointField>> {
    let seeds: Vec<(usize, AdjointField)> = fields.iter().map(|f| (traj.n_steps(), f.clone())).collect();
    backpropagate_staggered(&seeds, traj)
}

/// Backpropagates each `(end_step, field)` seed from `zeta_{end_step}` to
/// `zeta = 0`, sharing one reverse sweep. Results are in seed order.
pub fn backpropagate_staggered(seeds: &[(usize, AdjointField)], traj: &Trajectory) -> Result<Vec<AdjointField>> {
    let p = traj.propagator();
    for (end, f) in seeds {
        check_grid(traj.grid(), &f.grid, "adjoint")?;
        if *end > traj.n_steps() {
            return Err(Error::InvalidArgument(format!(
                "seed end step {end} exceeds trajectory length {}",
                traj.n_steps()
            )));
        }
    }
    struct Job {
        fx: Vec<C64>,
        fy: Vec<C64>,
        scratch: Vec<C64>,
    }
    let mut results: Vec<Option<AdjointField>> = vec![None; seeds.len()];
    let mut order: Vec<usize> = (0..seeds.len()).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(seeds[i].0));
    let mut pending = order.into_iter().peekable();
    let mut active: Vec<(usize, Job)> = Vec::new();
    let mut activate = |active: &mut Vec<(usize, Job)>, upto: usize| {
        while let Some(&i) = pending.peek() {
            if seeds[i].0 < upto {
                break;
            }
            pending.next();
            active.push((
                i,
                Job {
                    fx: seeds[i].1.fx.clone(),
                    fy: seeds[i].1.fy.clone(),
                    scratch: p.spectral().make_scratch(),
                },
            ));
        }
    };
    let end = seeds.iter().map(|s| s.0).max().unwrap_or(0);
    traj.for_each_stage_rev(end, |k, stage| {
        activate(&mut active, k + 1);
        let second = conj_multipliers(p, k, Half::Second);
        let first = conj_multipliers(p, k, Half::First);
        let jac = p.nonlinear_jacobians(stage.ux(), stage.uy());
        let ok = active
            .par_iter_mut()
            .map(|(_, job)| {
                p.apply_linear(&mut job.fx, &mut job.fy, &second, &mut job.scratch);
                apply_jacobians_transposed(&jac, &mut job.fx, &mut job.fy);
                p.apply_linear(&mut job.fx, &mut job.fy, &first, &mut job.scratch);
                job.fx.iter().chain(&job.fy).all(|z| z.re.is_finite() && z.im.is_finite())
            })
            .collect::<Vec<bool>>();
        if ok.iter().any(|&b| !b) {
            return Err(blowup(k, "adjoint"));
        }
        Ok(())
    })?;
    activate(&mut active, 0);
    let grid = *traj.grid();
    for (i, job) in active {
        results[i] = Some(AdjointField {
            grid,
            fx: job.fx,
            fy: job.fy,
        });
    }
    Ok(results.into_iter().map(|r| r.expect("every seed is activated")).collect())
}

/// Result of the continuous-adjoint integration.
#[derive(Debug, Clone)]
pub struct ContinuousAdjoint {
    pub field: AdjointField,
    /// Largest `|mu - conj(f)|` over samples, where `mu` is the conjugate
    /// component integrated as an independent variable.
    pub pairing_defect: f64,
}

/// Right-hand side of the adjoint system for one sample, with the conjugate
/// components `mu` treated as independent unknowns.
fn adjoint_rhs(k: (f64, f64, f64), ux: C64, uy: C64, s: [C64; 4]) -> [C64; 4] {
    let (a, b, c) = k;
    let [lx, mx, ly, my] = s;
    let ax = 2.0 * a * ux.norm_sqr() + b * uy.norm_sqr();
    let ay = 2.0 * a * uy.norm_sqr() + b * ux.norm_sqr();
    let px = a * ux * ux + c * uy * uy;
    let py = a * uy * uy + c * ux * ux;
    let q = 2.0 * c * ux.conj() * uy + b * ux * uy.conj();
    let r = b * ux * uy;
    [
        I * (ax * lx - px * mx + q * ly - r * my),
        I * (-ax * mx + px.conj() * lx - q.conj() * my + r.conj() * ly),
        I * (ay * ly - py * my + q.conj() * lx - r * mx),
        I * (-ay * my + py.conj() * ly - q * mx + r.conj() * lx),
    ]
}

fn axpy(s: [C64; 4], h: f64, k: [C64; 4]) -> [C64; 4] {
    [s[0] + h * k[0], s[1] + h * k[1], s[2] + h * k[2], s[3] + h * k[3]]
}

/// Backpropagation by integrating the continuous adjoint equations: the same
/// splitting as the forward run, with the nonlinear substep integrated
/// backward by RK4 (`substeps` per step) along the exact classical sub-flow.
/// Agrees with [`backpropagate_adjoint`] to the accuracy of that integration.
pub fn backpropagate_continuous(f_l: &AdjointField, traj: &Trajectory, substeps: usize) -> Result<ContinuousAdjoint> {
    if substeps == 0 {
        return Err(Error::param("substeps", "must be at least 1"));
    }
    let p = traj.propagator();
    check_grid(traj.grid(), &f_l.grid, "adjoint")?;
    let kerr = p.kerr();
    let coefs = (kerr.a, kerr.b, kerr.c);
    let n = traj.grid().n_points();
    let h = traj.d_zeta() / substeps as f64;
    let (mut lx, mut ly) = (f_l.fx.clone(), f_l.fy.clone());
    let (mut mx, mut my) = (conj_all(&lx), conj_all(&ly));
    let mut scratch = p.spectral().make_scratch();

    // The conjugate components evolve under the conjugated linear operator.
    let linear = |lx: &mut Vec<C64>, ly: &mut Vec<C64>, mx: &mut Vec<C64>, my: &mut Vec<C64>, m: &(Vec<C64>, Vec<C64>), scratch: &mut [C64]| {
        p.apply_linear(lx, ly, m, scratch);
        let (mut cx, mut cy) = (conj_all(mx), conj_all(my));
        p.apply_linear(&mut cx, &mut cy, m, scratch);
        *mx = conj_all(&cx);
        *my = conj_all(&cy);
    };

    traj.for_each_stage_rev(traj.n_steps(), |k, stage| {
        linear(&mut lx, &mut ly, &mut mx, &mut my, &conj_multipliers(p, k, Half::Second), &mut scratch);
        // classical sub-flow sampled at s = j h / 2, j = 0..=2 substeps
        let flows: Vec<(Vec<C64>, Vec<C64>)> = (0..=2 * substeps)
            .map(|j| {
                let (mut ux, mut uy) = (stage.ux().to_vec(), stage.uy().to_vec());
                if j > 0 {
                    p.nonlinear_flow(&mut ux, &mut uy, 0.5 * h * j as f64);
                }
                (ux, uy)
            })
            .collect();
        for i in 0..n {
            let mut s = [lx[i], mx[i], ly[i], my[i]];
            for sub in (0..substeps).rev() {
                let at = |j: usize| (flows[j].0[i], flows[j].1[i]);
                let (u1, u2, u3) = (at(2 * sub + 2), at(2 * sub + 1), at(2 * sub));
                let k1 = adjoint_rhs(coefs, u1.0, u1.1, s);
                let k2 = adjoint_rhs(coefs, u2.0, u2.1, axpy(s, -0.5 * h, k1));
                let k3 = adjoint_rhs(coefs, u2.0, u2.1, axpy(s, -0.5 * h, k2));
                let k4 = adjoint_rhs(coefs, u3.0, u3.1, axpy(s, -h, k3));
                for c in 0..4 {
                    s[c] -= h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
                }
            }
            [lx[i], mx[i], ly[i], my[i]] = s;
        }
        linear(&mut lx, &mut ly, &mut mx, &mut my, &conj_multipliers(p, k, Half::First), &mut scratch);
        if lx.iter().chain(&ly).any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(blowup(k, "adjoint"));
        }
        Ok(())
    })?;
    let pairing_defect = lx
        .iter()
        .zip(&mx)
        .chain(ly.iter().zip(&my))
        .map(|(l, m)| (m - l.conj()).norm())
        .fold(0.0, f64::max);
    let field = AdjointField::new(*traj.grid(), lx, ly)?;
    if !field.is_finite() {
        return Err(blowup(0, "adjoint"));
    }
    Ok(ContinuousAdjoint { field, pairing_defect })
}
