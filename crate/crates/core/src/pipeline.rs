//! Runs a [`RunConfig`] end to end and writes its artifacts.

use std::path::Path;

use crate::analysis::prominent_maxima;
use crate::config::{FrequencyPanel, RunConfig, ThetaChoice};
use crate::error::Result;
use crate::nlse::{output_spectrum, propagate_classical, split_spectra, Spectrum, Trajectory};
use crate::output::{
    emit_heatmap, write_intensity_csv, write_intensity_ppm, write_matrix_binary, write_matrix_text, write_pairs_csv,
    write_snapshot_csv, write_spectra_csv, write_trajectory, Metrics, Precision,
};
use crate::quantum_meas::{
    correlation_matrices, optimize_landscape, pulse_split_tau, squeezing_curve, squeezing_landscape, CorrelationMatrix,
    Extrema, SqueezingLandscape, ThetaOptimum,
};

/// Relative prominence of a spectral maximum.
pub const SPECTRAL_PROMINENCE: f64 = 0.01;
/// Relative prominence of an output pulse.
pub const PULSE_PROMINENCE: f64 = 0.05;

const MAP_ROWS: usize = 400;
const MAP_COLS: usize = 1024;

/// Which measurements to run after propagation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stages {
    pub squeeze: bool,
    pub correlations: bool,
    pub spectral: bool,
}

impl Stages {
    pub const ALL: Stages = Stages {
        squeeze: true,
        correlations: true,
        spectral: true,
    };
    pub const CLASSICAL: Stages = Stages {
        squeeze: false,
        correlations: false,
        spectral: false,
    };
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Squeezing {
    pub landscape: SqueezingLandscape,
    pub optimum: ThetaOptimum,
    /// Phase used for correlations.
    pub theta: f64,
    pub r_at_theta: f64,
}

/// A frequency-domain matrix with the panel it was computed on.
#[derive(Debug, Clone)]
pub struct PanelMatrix {
    pub panel_index: usize,
    pub panel: FrequencyPanel,
    pub matrix: CorrelationMatrix,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub config: RunConfig,
    pub trajectory: Trajectory,
    pub spectrum: Spectrum,
    pub first_spectrum: Spectrum,
    pub second_spectrum: Spectrum,
    pub split_tau: f64,
    pub squeezing: Option<Squeezing>,
    pub curve: Option<Vec<(f64, f64)>>,
    pub matrices: Vec<CorrelationMatrix>,
    pub spectral: Vec<PanelMatrix>,
    pub metrics: Metrics,
}

/// Validates, propagates and measures.
pub fn execute(cfg: &RunConfig, stages: Stages, progress: &dyn Fn(&str)) -> Result<RunOutcome> {
    cfg.validate()?;
    let grid = cfg.temporal_grid()?;
    let f0 = cfg.initial_field()?;
    let profile = cfg.profile();
    progress(&format!("propagating {} steps over L = {}", cfg.steps(), cfg.length));
    let traj = propagate_classical(&f0, &profile, cfg.steps())?;

    let mut m = Metrics::new();
    m.text("model", cfg.model.name());
    m.text("profile", profile.descriptor());
    m.text("n_points", grid.n_points().to_string());
    m.text("n_steps", traj.n_steps().to_string());
    let (e0, e1) = (traj.initial().energy(), traj.output().energy());
    m.num("energy_in", e0);
    m.num("energy_out", e1);
    m.num("energy_rel_change", (e1 - e0).abs() / e0);

    let intensity = traj.output().intensity();
    let pulses = prominent_maxima(&intensity, PULSE_PROMINENCE);
    m.text("output_peaks", pulses.len().to_string());
    m.list("output_peak_taus", &pulses.iter().map(|p| grid.tau(p.index)).collect::<Vec<_>>());
    m.list("output_peak_intensities", &pulses.iter().map(|p| p.value).collect::<Vec<_>>());
    let split_tau = pulse_split_tau(&traj);
    m.num("split_tau", split_tau);

    let spectrum = output_spectrum(&traj);
    let (first, second) = split_spectra(&traj, split_tau);
    let maxima = prominent_maxima(&spectrum.power, SPECTRAL_PROMINENCE);
    m.text("spectral_maxima", maxima.len().to_string());
    m.list("spectral_maxima_omegas", &maxima.iter().map(|p| spectrum.omega[p.index]).collect::<Vec<_>>());

    let wants_theta = stages.squeeze || stages.correlations || stages.spectral;
    let squeezing = if wants_theta {
        progress("optimizing the local oscillator phase");
        let landscape = squeezing_landscape(&traj)?;
        let optimum = optimize_landscape(&landscape);
        let theta = match cfg.theta {
            ThetaChoice::Auto => optimum.theta,
            ThetaChoice::Fixed(t) => t,
        };
        let s = Squeezing {
            landscape,
            optimum,
            theta,
            r_at_theta: landscape.ratio(theta),
        };
        m.num("theta_opt", optimum.theta);
        m.num("r_min", optimum.r_min);
        m.num("r_max", optimum.r_max);
        m.text("theta_flat", optimum.flat.to_string());
        m.num("theta_used", theta);
        m.num("r_at_theta", s.r_at_theta);
        Some(s)
    } else {
        None
    };

    let curve = if stages.squeeze && cfg.curve_samples > 0 {
        progress(&format!("squeezing curve at {} distances", cfg.curve_samples + 1));
        let c = squeezing_curve(&traj, cfg.curve_samples)?;
        if let Some(&(_, r)) = c.last() {
            m.num("curve_final_r", r);
        }
        Some(c)
    } else {
        None
    };

    let theta = squeezing.map(|s| s.theta).unwrap_or(0.0);
    let mut matrices = Vec::new();
    if stages.correlations && !cfg.kinds.is_empty() {
        let slots = cfg.time_slot_spec();
        progress(&format!("time correlations over {} slots", slots.len()));
        matrices = correlation_matrices(&traj, theta, &slots, &cfg.kinds)?;
        let split = slots.count_below(split_tau);
        for mat in &matrices {
            let key = format!("corr.{}", mat.kind.name());
            matrix_metrics(&mut m, &key, mat);
            let pe = mat.pulse_extrema(split);
            extrema_metrics(&mut m, &format!("{key}.intra"), mat, pe.intra);
            extrema_metrics(&mut m, &format!("{key}.inter"), mat, pe.inter);
        }
    }

    let mut spectral = Vec::new();
    if stages.spectral && !cfg.spectral_kinds.is_empty() {
        for (pi, panel) in cfg.frequency_panels.iter().enumerate() {
            let slots = panel.slots(&grid);
            progress(&format!("spectral correlations, panel {} ({} slots)", panel.label(), slots.len()));
            let mats = correlation_matrices(&traj, theta, &slots, &cfg.spectral_kinds)?;
            m.text(format!("spec.p{pi}.panel"), panel.label());
            let half = slots.count_below(0.0);
            for mat in mats {
                let key = format!("spec.p{pi}.{}", mat.kind.name());
                matrix_metrics(&mut m, &key, &mat);
                if let FrequencyPanel::Pair { .. } = panel {
                    let cross = mat.block_extrema(0..half, half..mat.len());
                    extrema_metrics(&mut m, &format!("{key}.cross"), &mat, cross);
                }
                spectral.push(PanelMatrix {
                    panel_index: pi,
                    panel: *panel,
                    matrix: mat,
                });
            }
        }
    }

    Ok(RunOutcome {
        config: cfg.clone(),
        trajectory: traj,
        spectrum,
        first_spectrum: first,
        second_spectrum: second,
        split_tau,
        squeezing,
        curve,
        matrices,
        spectral,
        metrics: m,
    })
}

fn matrix_metrics(m: &mut Metrics, key: &str, mat: &CorrelationMatrix) {
    extrema_metrics(m, key, mat, mat.extrema());
    m.text(format!("{key}.masked"), mat.masked.iter().filter(|&&b| b).count().to_string());
    m.num(format!("{key}.imag_residue"), mat.imag_residue);
}

fn extrema_metrics(m: &mut Metrics, key: &str, mat: &CorrelationMatrix, e: Option<Extrema>) {
    let Some(e) = e else {
        m.text(format!("{key}.min"), "NaN");
        m.text(format!("{key}.max"), "NaN");
        return;
    };
    let at = |(i, j): (usize, usize)| format!("{:?} {:?}", mat.slots.centers[i], mat.slots.centers[j]);
    m.num(format!("{key}.min"), e.min);
    m.text(format!("{key}.min_at"), at(e.min_at));
    m.num(format!("{key}.max"), e.max);
    m.text(format!("{key}.max_at"), at(e.max_at));
}

/// Writes every artifact of `outcome` into `dir`.
pub fn write_bundle(outcome: &RunOutcome, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let cfg = &outcome.config;
    let traj = &outcome.trajectory;
    std::fs::write(dir.join("config.ini"), cfg.to_config_text())?;
    outcome.metrics.write(&dir.join("metrics.txt"))?;
    write_snapshot_csv(&dir.join("output_field.csv"), traj.output())?;
    if cfg.outputs.intensity_map {
        write_intensity_ppm(&dir.join("intensity_map.ppm"), traj, MAP_ROWS, MAP_COLS)?;
        write_intensity_csv(&dir.join("intensity_map.csv"), traj, MAP_ROWS, MAP_COLS)?;
    }
    if cfg.outputs.spectrum {
        write_spectra_csv(
            &dir.join("spectrum.csv"),
            &outcome.spectrum,
            &outcome.first_spectrum,
            &outcome.second_spectrum,
        )?;
    }
    if cfg.outputs.trajectory {
        write_trajectory(&dir.join("trajectory.bin"), traj, Precision::Complex64, 1)?;
    }
    if let Some(curve) = &outcome.curve {
        write_pairs_csv(&dir.join("squeezing_curve.csv"), "zeta,r_min", curve)?;
    }
    let emit = |stem: String, mat: &CorrelationMatrix| -> Result<()> {
        write_matrix_text(&dir.join(format!("{stem}.txt")), mat)?;
        write_matrix_binary(&dir.join(format!("{stem}.bin")), mat)?;
        if cfg.outputs.heatmaps {
            emit_heatmap(mat, &dir.join(format!("{stem}.ppm")))?;
        }
        Ok(())
    };
    for mat in &outcome.matrices {
        emit(format!("corr_{}", mat.kind.name()), mat)?;
    }
    for pm in &outcome.spectral {
        emit(format!("spec_p{}_{}", pm.panel_index, pm.matrix.kind.name()), &pm.matrix)?;
    }
    Ok(())
}
