//! Named presets for the standard propagation regimes and conversion
//! between physical fiber parameters and the normalized model.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::path::Path;

use crate::config::{FrequencyPanel, PhysicalInput, GridConfig, InitialCondition, ModelKind, RunConfig, TimeSlots};
use crate::error::{Error, Result};
use crate::lattice::{Coefficient, FiberProfile, ModulationSpec};
use crate::pipeline::{execute, write_bundle, RunOutcome, Stages};
use crate::quantum_meas::CorrelationKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    /// Second-order soliton splitting under sine dispersion modulation.
    Fig1,
    /// Same as [`Scenario::Fig1`]: sine modulation, period 1.3.
    Fig2a,
    /// Truncated sine modulation, period 1.3.
    Fig2b,
    /// Sine modulation, period pi/2.
    Fig2c,
    /// Collision of two co-propagating solitons, period 0.83.
    Fig3,
    /// Collision of frequency-shifted pulses with modulation.
    Fig45Mod,
    /// Collision of frequency-shifted pulses without modulation.
    Fig45NoMod,
    /// Birefringent splitting, `u0 = 1.8`.
    Fig6a,
    /// Birefringent splitting, `u0 = 2.12`.
    Fig6c,
    /// Birefringent splitting, `u0 = 2.83`.
    Fig6e,
    /// Strong birefringence without modulation.
    Fig7a,
    /// Strong birefringence with dispersion, birefringence and group-delay
    /// modulation.
    Fig7c,
}

impl Scenario {
    pub const ALL: [Scenario; 12] = [
        Scenario::Fig1,
        Scenario::Fig2a,
        Scenario::Fig2b,
        Scenario::Fig2c,
        Scenario::Fig3,
        Scenario::Fig45Mod,
        Scenario::Fig45NoMod,
        Scenario::Fig6a,
        Scenario::Fig6c,
        Scenario::Fig6e,
        Scenario::Fig7a,
        Scenario::Fig7c,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Fig1 => "fig1",
            Scenario::Fig2a => "fig2a",
            Scenario::Fig2b => "fig2b",
            Scenario::Fig2c => "fig2c",
            Scenario::Fig3 => "fig3",
            Scenario::Fig45Mod => "fig4_5_mod",
            Scenario::Fig45NoMod => "fig4_5_nomod",
            Scenario::Fig6a => "fig6a",
            Scenario::Fig6c => "fig6c",
            Scenario::Fig6e => "fig6e",
            Scenario::Fig7a => "fig7a",
            Scenario::Fig7c => "fig7c",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| Error::UnknownScenario(s.to_string()))
    }

    /// The frozen run configuration of this preset.
    pub fn config(&self) -> RunConfig {
        use CorrelationKind::*;
        let single = |u0| InitialCondition::Single { u0 };
        let sine_13 = Coefficient::modulated(1.0, ModulationSpec::sine(1.3, 0.2));
        let mut cfg = match self {
            Scenario::Fig1 | Scenario::Fig2a | Scenario::Fig2b | Scenario::Fig2c => {
                let mut c = RunConfig::new(ModelKind::Manakov, single(2.0), TAU);
                c.dispersion = match self {
                    Scenario::Fig2b => Coefficient::modulated(1.0, ModulationSpec::truncated_sine(1.3, 0.2)),
                    Scenario::Fig2c => Coefficient::modulated(1.0, ModulationSpec::sine(PI / 2.0, 0.2)),
                    _ => sine_13,
                };
                c
            }
            Scenario::Fig3 => {
                let mut c = RunConfig::new(
                    ModelKind::Manakov,
                    InitialCondition::Pair {
                        u0: 2.0,
                        t_sep: 1.0,
                        d_omega: 0.0,
                    },
                    TAU,
                );
                c.dispersion = Coefficient::modulated(1.0, ModulationSpec::sine(0.83, 0.2));
                c.kinds = vec![Xx, Yy, Xy, Complete];
                c
            }
            Scenario::Fig45Mod | Scenario::Fig45NoMod => {
                let mut c = RunConfig::new(
                    ModelKind::Manakov,
                    InitialCondition::Pair {
                        u0: 2.0,
                        t_sep: 3.0,
                        d_omega: 1.0,
                    },
                    TAU,
                );
                if *self == Scenario::Fig45Mod {
                    c.dispersion = sine_13;
                }
                c.kinds = vec![Xx, Yy, Xy, Complete];
                c
            }
            Scenario::Fig6a | Scenario::Fig6c | Scenario::Fig6e => {
                let u0 = match self {
                    Scenario::Fig6a => 1.8,
                    Scenario::Fig6c => 2.12,
                    _ => 2.83,
                };
                let mut c = RunConfig::new(ModelKind::Birefringent, single(u0), TAU);
                c.birefringence = Coefficient::constant(20.0);
                c.group_delay = Coefficient::constant(2.0);
                c
            }
            Scenario::Fig7a | Scenario::Fig7c => {
                let mut c = RunConfig::new(ModelKind::Birefringent, single(2.83), TAU);
                if *self == Scenario::Fig7c {
                    let one_percent = ModulationSpec::sine(1.3, -0.01);
                    c.dispersion = sine_13;
                    c.birefringence = Coefficient::modulated(40.0, one_percent);
                    c.group_delay = Coefficient::modulated(4.0, one_percent);
                } else {
                    c.birefringence = Coefficient::constant(40.0);
                    c.group_delay = Coefficient::constant(4.0);
                }
                c
            }
        };
        cfg.curve_samples = 64;
        if *self == Scenario::Fig1 {
            cfg.spectral_kinds = vec![Complete];
            cfg.frequency_panels = vec![
                FrequencyPanel::Bins { first: -32, last: 31 },
                FrequencyPanel::Pair {
                    center: 1.63,
                    half_width: 0.46,
                },
                FrequencyPanel::Pair {
                    center: 0.75,
                    half_width: 0.46,
                },
            ];
        }
        cfg
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Numerical settings a scenario run may change. Physics stays frozen.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub grid: Option<GridConfig>,
    pub n_steps: Option<usize>,
    pub time_slots: Option<TimeSlots>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(g) = self.grid {
            cfg.grid = g;
        }
        if let Some(n) = self.n_steps {
            cfg.n_steps = Some(n);
        }
        if let Some(t) = self.time_slots {
            cfg.time_slots = t;
        }
    }
}

/// Runs a preset and, when `out` is given, writes its bundle there.
pub fn run_scenario(
    name: &str,
    overrides: &Overrides,
    out: Option<&Path>,
    progress: &dyn Fn(&str),
) -> Result<RunOutcome> {
    let scenario = Scenario::parse(name)?;
    let mut cfg = scenario.config();
    overrides.apply(&mut cfg);
    let mut outcome = execute(&cfg, Stages::ALL, progress)?;
    outcome.metrics.text("scenario", scenario.name());
    if let Some(dir) = out {
        write_bundle(&outcome, dir)?;
    }
    Ok(outcome)
}

/// Fiber and pulse parameters in SI units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    pub model: ModelKind,
    /// Initial pulse width `T0` (s).
    pub t0: f64,
    /// Length-averaged GVD `beta2_avg` (s^2/m), negative when anomalous.
    pub beta2_avg: f64,
    /// Local GVD before modulation (s^2/m).
    pub beta2: f64,
    /// Modulation of the GVD; period in meters.
    pub beta2_modulation: ModulationSpec,
    /// Differential group delay `beta1x - beta1y` (s/m).
    pub beta1_diff: f64,
    pub beta1_diff_modulation: ModulationSpec,
    /// Propagation-constant difference `beta0x - beta0y` (1/m).
    pub delta_beta: f64,
    pub delta_beta_modulation: ModulationSpec,
    /// Nonlinear coefficient (1/(W m)).
    pub gamma: f64,
    /// Effective mode area (m^2).
    pub a_eff: f64,
    /// Effective refractive index.
    pub refractive_index: f64,
    /// Fiber length (m).
    pub length: f64,
}

/// Normalization constants relating physical and normalized quantities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleReport {
    pub t0: f64,
    pub beta2_avg: f64,
    pub gamma: f64,
    pub a_eff: f64,
    pub refractive_index: f64,
    /// Meters per unit of `zeta`: `T0^2 / |beta2_avg|`.
    pub length_unit: f64,
    /// Seconds per unit of `tau`.
    pub time_unit: f64,
    /// `F0 = c n eps0 A_eff T0^2 gamma / |beta2_avg|`, with `|U|^2 = F0 |A|^2`.
    pub field_scale: f64,
    /// Optical power (W) carried by `|U|^2 = 1`, taking the power as
    /// `c n eps0 A_eff |A|^2 / 2`.
    pub power_unit: f64,
}

const SPEED_OF_LIGHT: f64 = 299_792_458.0;
const VACUUM_PERMITTIVITY: f64 = 8.854_187_8128e-12;

fn rescale(m: ModulationSpec, factor: f64) -> ModulationSpec {
    ModulationSpec {
        period: m.period * factor,
        ..m
    }
}

/// Maps physical parameters to the normalized fiber profile.
pub fn normalize(p: &PhysicalParams) -> Result<(FiberProfile, ScaleReport)> {
    let positive = |name: &str, v: f64| {
        if v > 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidParameter {
                name: name.to_string(),
                reason: format!("must be positive, got {v}"),
            })
        }
    };
    positive("t0", p.t0)?;
    positive("|beta2_avg|", p.beta2_avg.abs())?;
    positive("gamma", p.gamma)?;
    positive("a_eff", p.a_eff)?;
    positive("refractive_index", p.refractive_index)?;
    positive("length", p.length)?;
    let b2 = p.beta2_avg.abs();
    let length_unit = p.t0 * p.t0 / b2;
    let to_zeta = 1.0 / length_unit;
    let (a, b, c) = p.model.coefficients();
    let profile = FiberProfile {
        self_phase: a,
        cross_phase: b,
        coherent: c,
        dispersion: Coefficient::modulated(-p.beta2 / b2, rescale(p.beta2_modulation, to_zeta)),
        birefringence: Coefficient::modulated(
            p.t0 * p.t0 * p.delta_beta / (2.0 * b2),
            rescale(p.delta_beta_modulation, to_zeta),
        ),
        group_delay: Coefficient::modulated(
            p.t0 * p.beta1_diff / (2.0 * b2),
            rescale(p.beta1_diff_modulation, to_zeta),
        ),
        length: p.length * to_zeta,
    };
    profile.validate()?;
    let field_scale = SPEED_OF_LIGHT * p.refractive_index * VACUUM_PERMITTIVITY * p.a_eff * p.t0 * p.t0 * p.gamma / b2;
    let report = ScaleReport {
        t0: p.t0,
        beta2_avg: p.beta2_avg,
        gamma: p.gamma,
        a_eff: p.a_eff,
        refractive_index: p.refractive_index,
        length_unit,
        time_unit: p.t0,
        field_scale,
        power_unit: b2 / (2.0 * p.gamma * p.t0 * p.t0),
    };
    Ok((profile, report))
}

/// Inverse of [`normalize`].
pub fn denormalize(model: ModelKind, profile: &FiberProfile, report: &ScaleReport) -> PhysicalParams {
    let b2 = report.beta2_avg.abs();
    let t0 = report.t0;
    let unit = report.length_unit;
    PhysicalParams {
        model,
        t0,
        beta2_avg: report.beta2_avg,
        beta2: -profile.dispersion.base * b2,
        beta2_modulation: rescale(profile.dispersion.modulation, unit),
        beta1_diff: profile.group_delay.base * 2.0 * b2 / t0,
        beta1_diff_modulation: rescale(profile.group_delay.modulation, unit),
        delta_beta: profile.birefringence.base * 2.0 * b2 / (t0 * t0),
        delta_beta_modulation: rescale(profile.birefringence.modulation, unit),
        gamma: report.gamma,
        a_eff: report.a_eff,
        refractive_index: report.refractive_index,
        length: profile.length * unit,
    }
}

/// Normalized run configuration for a physical fiber and pulse: the input
/// is a single `sech` pulse whose peak power sets `u0`.
pub fn physical_run_config(input: &PhysicalInput) -> Result<(RunConfig, ScaleReport)> {
    let (profile, report) = normalize(&input.params)?;
    let u0 = (input.peak_power / report.power_unit).sqrt();
    let mut cfg = RunConfig::new(input.params.model, InitialCondition::Single { u0 }, profile.length);
    cfg.dispersion = profile.dispersion;
    cfg.birefringence = profile.birefringence;
    cfg.group_delay = profile.group_delay;
    Ok((cfg, report))
}

impl ScaleReport {
    /// `key = value` lines, each prefixed with `prefix`.
    pub fn to_text(&self, prefix: &str) -> String {
        [
            ("t0_s", self.t0),
            ("beta2_avg_s2_per_m", self.beta2_avg),
            ("gamma_per_w_m", self.gamma),
            ("a_eff_m2", self.a_eff),
            ("refractive_index", self.refractive_index),
            ("length_unit_m", self.length_unit),
            ("time_unit_s", self.time_unit),
            ("field_scale", self.field_scale),
            ("power_unit_w", self.power_unit),
        ]
        .iter()
        .map(|(k, v)| format!("{prefix}{k} = {v:e}\n"))
        .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    fn sample() -> PhysicalParams {
        PhysicalParams {
            model: ModelKind::Birefringent,
            t0: 1.3e-12,
            beta2_avg: -2.1e-26,
            beta2: -2.3e-26,
            beta2_modulation: ModulationSpec::sine(1250.0, 0.2),
            beta1_diff: 1.7e-13,
            beta1_diff_modulation: ModulationSpec::truncated_sine(730.0, -0.01),
            delta_beta: 3.3,
            delta_beta_modulation: ModulationSpec::sine(730.0, -0.01),
            gamma: 1.3e-3,
            a_eff: 8.0e-11,
            refractive_index: 1.45,
            length: 5200.0,
        }
    }

    fn rel(a: f64, b: f64) -> f64 {
        if a == b {
            0.0
        } else {
            (a - b).abs() / a.abs().max(b.abs())
        }
    }

    #[test]
    fn normalize_round_trip() {
        let p = sample();
        let (profile, report) = normalize(&p).unwrap();
        let q = denormalize(p.model, &profile, &report);
        let pairs = [
            (p.t0, q.t0),
            (p.beta2_avg, q.beta2_avg),
            (p.beta2, q.beta2),
            (p.beta2_modulation.period, q.beta2_modulation.period),
            (p.beta1_diff, q.beta1_diff),
            (p.beta1_diff_modulation.period, q.beta1_diff_modulation.period),
            (p.delta_beta, q.delta_beta),
            (p.delta_beta_modulation.period, q.delta_beta_modulation.period),
            (p.length, q.length),
        ];
        for (a, b) in pairs {
            assert!(rel(a, b) < 1e-12, "{a} vs {b}");
        }
        assert_eq!(p.beta2_modulation.depth, q.beta2_modulation.depth);
        assert_eq!(p.beta2_modulation.kind, q.beta2_modulation.kind);
        assert_eq!(p.delta_beta_modulation.kind, q.delta_beta_modulation.kind);
    }

    #[test]
    fn constant_anomalous_dispersion_is_unit() {
        let mut p = sample();
        p.beta2 = p.beta2_avg;
        p.delta_beta = 0.0;
        p.beta1_diff = 0.0;
        let (profile, _) = normalize(&p).unwrap();
        assert_eq!(profile.dispersion.base, 1.0);
        assert!(profile.birefringence.is_zero() && profile.group_delay.is_zero());
    }

    #[test]
    fn unit_scaling_keeps_lengths() {
        let mut p = sample();
        p.t0 = 1e-12;
        p.beta2_avg = -1e-24;
        p.beta2 = -1e-24;
        let (profile, report) = normalize(&p).unwrap();
        assert_eq!(report.length_unit, 1.0);
        assert!(rel(profile.length, p.length) < 1e-15);
        assert!(rel(profile.dispersion.modulation.period, 1250.0) < 1e-15);
    }

    #[test]
    fn zero_average_dispersion_is_rejected() {
        let mut p = sample();
        p.beta2_avg = 0.0;
        assert!(matches!(normalize(&p), Err(Error::InvalidParameter { .. })));
    }

    #[test]
    fn names_round_trip() {
        for s in Scenario::ALL {
            assert_eq!(Scenario::parse(s.name()).unwrap(), s);
            assert!(s.config().validate().is_ok(), "{s}");
        }
        assert!(matches!(Scenario::parse("fig9"), Err(Error::UnknownScenario(_))));
    }

    #[test]
    fn fig1_config_file_matches_preset() {
        let text = "\
[model]
kind = manakov
[initial]
shape = single
u0 = 2
[fiber]
length = 6.283185307179586
[dispersion]
modulation = sine
period = 1.3
[slots]
frequency_panels = bins:-32:31, pair:1.63:0.46, pair:0.75:0.46
[measure]
kinds = complete
spectral_kinds = complete
curve_samples = 64
";
        assert_eq!(parse_config(text).unwrap(), Scenario::Fig1.config());
    }

    #[test]
    fn overrides_leave_physics_alone() {
        let mut cfg = Scenario::Fig3.config();
        let before = cfg.profile();
        Overrides {
            grid: Some(GridConfig {
                n_points: 1024,
                tau_min: -10.0,
                tau_max: 10.0,
            }),
            n_steps: Some(100),
            time_slots: None,
        }
        .apply(&mut cfg);
        assert_eq!(cfg.profile(), before);
        assert_eq!(cfg.steps(), 100);
    }
}
