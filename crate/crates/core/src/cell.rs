//! Space-free (0D) integration of the coupled cell model.
//!
//! Explicit forward stepping of the electrophysiology on a millisecond
//! clock, with metabolism advanced on a coarser substep using the
//! time-averaged ATPase demand accumulated since its last update. Near
//! spikes the electrical step halves when |du/dt| exceeds a threshold and
//! recovers geometrically afterwards.
//!
//! Runs are deterministic: fixed iteration order, no wall clock, and the
//! spike detector is fed every accepted step, so statistics do not depend
//! on the output cadence.

use crate::diag::Diagnostics;
use crate::error::{Error, Result};
use crate::ionic::{couple, rhs_ionic, IonicState, VolumeFractions};
use crate::metabolic::{
    phosphorylation_ratios, rhs_metabolic, BloodSchedule, MetabolicState, VolumeState,
};
use crate::params::Params;
use crate::spikes::{SpikeDetector, SpikeTrain, DEFAULT_REFRACTORY_MS, DEFAULT_THRESHOLD_MV};
use serde::{Deserialize, Serialize};

/// Synaptic activation function xi(t). Times in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum XiFunction {
    Off,
    Constant { value: f64 },
    Pulse { t_on: f64, t_off: f64, value: f64 },
}

impl XiFunction {
    pub fn eval(&self, t_s: f64) -> f64 {
        match *self {
            XiFunction::Off => 0.0,
            XiFunction::Constant { value } => value,
            XiFunction::Pulse { t_on, t_off, value } => {
                if (t_on..t_off).contains(&t_s) {
                    value
                } else {
                    0.0
                }
            }
        }
    }
}

/// External current pulse injected into the 0D membrane equation
/// [uA/cm^2], window in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurrentPulse {
    pub amplitude: f64,
    pub t_on: f64,
    pub t_off: f64,
}

/// Adaptive time-step rule for the electrical clock.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveDt {
    pub enabled: bool,
    /// |du/dt| above this [mV/ms] halves the step
    pub du_threshold: f64,
    pub dt_min_ms: f64,
    pub dt_max_ms: f64,
}

impl AdaptiveDt {
    pub fn disabled() -> AdaptiveDt {
        AdaptiveDt {
            enabled: false,
            du_threshold: 5.0,
            dt_min_ms: 1e-4,
            dt_max_ms: 0.05,
        }
    }
}

/// Full description of one 0D run.
#[derive(Debug, Clone, PartialEq)]
pub struct CellRun {
    pub params: Params,
    pub schedule: BloodSchedule,
    pub xi: XiFunction,
    pub i_ext: Option<CurrentPulse>,
    /// nominal electrical step [ms]
    pub dt_electro_ms: f64,
    /// metabolism advances every `metabolic_substep` nominal electrical steps
    pub metabolic_substep: usize,
    pub t_final_s: f64,
    pub initial_ionic: IonicState,
    pub initial_metabolic: MetabolicState,
    pub adaptive: AdaptiveDt,
    pub spike_threshold_mv: f64,
    pub refractory_ms: f64,
    /// trajectory sampling cadence [s]
    pub sample_every_s: f64,
}

impl CellRun {
    /// Reference run: published initial state, nominal steps, no blood
    /// depression.
    pub fn baseline(params: Params) -> CellRun {
        CellRun {
            params,
            schedule: BloodSchedule::none(),
            xi: XiFunction::Off,
            i_ext: None,
            dt_electro_ms: 0.01,
            metabolic_substep: 100,
            t_final_s: 10.0,
            initial_ionic: IonicState::reference_initial(),
            initial_metabolic: MetabolicState::reference_initial(),
            adaptive: AdaptiveDt::disabled(),
            spike_threshold_mv: DEFAULT_THRESHOLD_MV,
            refractory_ms: DEFAULT_REFRACTORY_MS,
            sample_every_s: 0.01,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt_electro_ms > 0.0) {
            return Err(Error::Config("dt_electro must be positive".into()));
        }
        if !(self.t_final_s > 0.0) {
            return Err(Error::Config("t_final must be positive".into()));
        }
        if self.metabolic_substep == 0 {
            return Err(Error::Config("metabolic_substep must be >= 1".into()));
        }
        self.schedule.validate()?;
        self.initial_ionic.check()?;
        Ok(())
    }
}

/// Online extrema tracked during a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub max_k_o: f64,
    pub max_na_i: f64,
    pub min_atp_n: f64,
    pub min_atp_a: f64,
    pub min_o2_b: f64,
    pub min_o2_ecs: f64,
    pub min_o2_n: f64,
    pub min_o2_a: f64,
}

impl RunStats {
    fn new(ionic: &IonicState, metab: &MetabolicState) -> RunStats {
        RunStats {
            max_k_o: ionic.k_o,
            max_na_i: ionic.na_i,
            min_atp_n: metab.neuron.atp,
            min_atp_a: metab.astro.atp,
            min_o2_b: metab.o2_b,
            min_o2_ecs: metab.o2_ecs,
            min_o2_n: metab.neuron.o2,
            min_o2_a: metab.astro.o2,
        }
    }

    fn update(&mut self, ionic: &IonicState, metab: &MetabolicState) {
        self.max_k_o = self.max_k_o.max(ionic.k_o);
        self.max_na_i = self.max_na_i.max(ionic.na_i);
        self.min_atp_n = self.min_atp_n.min(metab.neuron.atp);
        self.min_atp_a = self.min_atp_a.min(metab.astro.atp);
        self.min_o2_b = self.min_o2_b.min(metab.o2_b);
        self.min_o2_ecs = self.min_o2_ecs.min(metab.o2_ecs);
        self.min_o2_n = self.min_o2_n.min(metab.neuron.o2);
        self.min_o2_a = self.min_o2_a.min(metab.astro.o2);
    }
}

/// Result of one 0D run: sampled trajectory, spike train, extrema.
#[derive(Debug, Clone)]
pub struct CellTrajectory {
    /// sample times [s]
    pub t: Vec<f64>,
    pub ionic: Vec<IonicState>,
    pub metabolic: Vec<MetabolicState>,
    pub volumes: Vec<VolumeFractions>,
    pub spikes: SpikeTrain,
    pub stats: RunStats,
    pub diagnostics: [u64; 5],
}

/// Integrate one cell run to completion.
pub fn integrate_cell(run: &CellRun) -> Result<CellTrajectory> {
    run.validate()?;
    let diag = Diagnostics::new();
    let ip = &run.params.ionic;
    let mp = &run.params.metabolic;

    let mut ionic = run.initial_ionic;
    let mut metab = run.initial_metabolic;
    let base_vol = VolumeFractions {
        eta_n: mp.eta_n,
        eta_a: mp.eta_a,
        eta_ecs: mp.eta_ecs,
    };
    let mut volume = VolumeState::new(base_vol);
    let mut ratios = phosphorylation_ratios(&metab, &diag);

    let t_final_ms = run.t_final_s * 1000.0;
    let metab_target_ms = run.metabolic_substep as f64 * run.dt_electro_ms;
    let mut dt = run.dt_electro_ms;
    let mut t_ms = 0.0f64;
    let mut calm_steps = 0u32;

    // demand accumulators between metabolic updates
    let mut psi_n_acc = 0.0;
    let mut psi_a_acc = 0.0;
    let mut elapsed_ms = 0.0;

    let mut detector = SpikeDetector::new(run.spike_threshold_mv, run.refractory_ms);
    detector.push(0.0, ionic.u);

    let mut stats = RunStats::new(&ionic, &metab);
    let mut t_samples = vec![0.0];
    let mut ionic_samples = vec![ionic];
    let mut metab_samples = vec![metab];
    let mut vol_samples = vec![base_vol];
    let sample_every_ms = run.sample_every_s * 1000.0;
    let mut next_sample_ms = sample_every_ms;

    while t_ms < t_final_ms {
        let t_s = t_ms * 1e-3;
        let xi = run.xi.eval(t_s);
        // demand fluxes use the baseline fractions (stoichiometric
        // constants); the compartment balances see the live, swollen ones
        let (coupling, _) = couple(&ionic, ip, &base_vol, xi, ratios.p_n, ratios.p_a)?;
        let d = rhs_ionic(&ionic, &coupling, ip, &volume.current, xi)?;
        let mut du = d.u;
        if let Some(pulse) = &run.i_ext {
            if (pulse.t_on..pulse.t_off).contains(&t_s) {
                du += pulse.amplitude / ip.c_m;
            }
        }

        // adaptive step control: shrink near fast upstrokes, recover
        // geometrically once the trajectory is calm again
        if run.adaptive.enabled {
            if du.abs() > run.adaptive.du_threshold && dt > run.adaptive.dt_min_ms {
                dt = (dt / 2.0).max(run.adaptive.dt_min_ms);
                calm_steps = 0;
            } else if du.abs() < 0.25 * run.adaptive.du_threshold {
                calm_steps += 1;
                if calm_steps >= 8 && dt < run.adaptive.dt_max_ms.min(run.dt_electro_ms) {
                    dt = (dt * 2.0).min(run.adaptive.dt_max_ms.min(run.dt_electro_ms));
                    calm_steps = 0;
                }
            } else {
                calm_steps = 0;
            }
        }
        let dt_step = dt.min(t_final_ms - t_ms).max(1e-12);

        ionic.u += dt_step * du;
        ionic.ca_i = (ionic.ca_i + dt_step * d.ca_i).max(0.0);
        ionic.k_o += dt_step * d.k_o;
        ionic.na_i += dt_step * d.na_i;
        ionic.m += dt_step * d.m;
        ionic.n += dt_step * d.n;
        ionic.h += dt_step * d.h;
        ionic.clamp_gates(&diag);
        t_ms += dt_step;

        if !ionic.u.is_finite() || ionic.u.abs() > run.params.monodomain.divergence_guard_mv {
            return Err(Error::Numerical(format!(
                "cell run diverged at t = {:.4} s: u = {}, K_o = {}, Na_i = {}",
                t_ms * 1e-3,
                ionic.u,
                ionic.k_o,
                ionic.na_i
            )));
        }

        psi_n_acc += coupling.psi_n * dt_step;
        psi_a_acc += coupling.psi_a * dt_step;
        elapsed_ms += dt_step;

        if elapsed_ms >= metab_target_ms || t_ms >= t_final_ms {
            let psi_n_avg = psi_n_acc / elapsed_ms;
            let psi_a_avg = psi_a_acc / elapsed_ms;
            let t_s_now = t_ms * 1e-3;
            let dm = rhs_metabolic(
                &metab,
                psi_n_avg,
                psi_a_avg,
                t_s_now,
                mp,
                &run.schedule,
                &volume.current,
                &diag,
            )?;
            let dt_s = elapsed_ms * 1e-3;
            let next = MetabolicState::from_array(
                metab
                    .as_array()
                    .iter()
                    .zip(dm.as_array())
                    .map(|(c, dc)| c + dt_s * dc)
                    .collect::<Vec<_>>()
                    .try_into()
                    .unwrap(),
            );
            metab = next;
            metab.floor_oxygen(&diag);
            ratios = phosphorylation_ratios(&metab, &diag);
            volume.update(
                t_s_now,
                metab.neuron.o2,
                metab.astro.o2,
                run.schedule.delta,
                mp,
                &diag,
            );
            psi_n_acc = 0.0;
            psi_a_acc = 0.0;
            elapsed_ms = 0.0;
        }

        detector.push(t_ms * 1e-3, ionic.u);
        stats.update(&ionic, &metab);

        if t_ms + 1e-9 >= next_sample_ms {
            t_samples.push(t_ms * 1e-3);
            ionic_samples.push(ionic);
            metab_samples.push(metab);
            vol_samples.push(volume.current);
            while next_sample_ms <= t_ms + 1e-9 {
                next_sample_ms += sample_every_ms;
            }
        }
    }

    Ok(CellTrajectory {
        t: t_samples,
        ionic: ionic_samples,
        metabolic: metab_samples,
        volumes: vol_samples,
        spikes: detector.finish(),
        stats,
        diagnostics: diag.snapshot(),
    })
}

/// One row of a parameter-sweep summary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub n_spikes: usize,
    pub peak_freq_hz: f64,
    pub dominant_freq_hz: f64,
    pub stats: RunStats,
}

/// Sweep result: per-value trajectories plus the summary table.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub parameter: String,
    pub rows: Vec<SweepRow>,
    pub trajectories: Vec<CellTrajectory>,
}

fn apply_sweep_value(run: &CellRun, parameter: &str, value: f64) -> Result<CellRun> {
    let mut out = run.clone();
    if parameter == "delta" {
        out.schedule.delta = value;
        return Ok(out);
    }
    let table: toml::Table = format!("{parameter} = {value}")
        .parse()
        .map_err(|e| Error::Config(format!("sweep parameter: {e}")))?;
    // try the three parameter tables in order
    for target in 0..3 {
        let mut p = run.params.clone();
        let r = match target {
            0 => p.apply_overrides(Some(&table), None, None),
            1 => p.apply_overrides(None, Some(&table), None),
            _ => p.apply_overrides(None, None, Some(&table)),
        };
        if r.is_ok() {
            out.params = p;
            return Ok(out);
        }
    }
    Err(Error::Config(format!(
        "unknown sweep parameter \"{parameter}\" (not a key of [ionic], [metabolic], [monodomain], or \"delta\")"
    )))
}

/// Run the same scenario across a list of parameter values. The window
/// start for frequency statistics is the end of the blood-depression ramp
/// (post-plateau onset), so severity comparisons look at the pathological
/// phase.
pub fn sweep(parameter: &str, values: &[f64], run: &CellRun) -> Result<SweepResult> {
    let runs: Vec<CellRun> = values
        .iter()
        .map(|v| apply_sweep_value(run, parameter, *v))
        .collect::<Result<_>>()?;
    let trajectories: Vec<Result<CellTrajectory>> =
        crate::parallel::map_collect(&runs, integrate_cell);
    let mut rows = Vec::new();
    let mut done = Vec::new();
    for (value, traj) in values.iter().zip(trajectories) {
        let traj = traj?;
        let window_start = run.schedule.t1 + run.schedule.r1;
        rows.push(SweepRow {
            value: *value,
            n_spikes: traj.spikes.len(),
            peak_freq_hz: traj.spikes.peak_frequency(window_start),
            dominant_freq_hz: traj.spikes.dominant_frequency(window_start),
            stats: traj.stats,
        });
        done.push(traj);
    }
    Ok(SweepResult {
        parameter: parameter.to_string(),
        rows,
        trajectories: done,
    })
}
