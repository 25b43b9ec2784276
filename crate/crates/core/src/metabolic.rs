//! Pointwise cerebral metabolism: blood / ECS / neuron / astrocyte oxygen
//! transport, hemoglobin binding, and a reduced energy-metabolite network.
//!
//! Twelve concentrations per node, all in mM, ordered blood O2, ECS O2,
//! then per cell (neuron, astrocyte): O2, ATP, ADP, NADH, NAD+. The
//! right-hand side is in mM/s; the coupling layer converts to the solver's
//! millisecond clock.
//!
//! The reaction closure keeps only what the oxygen -> ATP -> pump pathway
//! needs: oxidative phosphorylation with Michaelis-Menten gating in O2,
//! ADP and NADH, ATP hydrolysis driven by the ATPase demand reported by
//! the electrophysiology, and a redox-cycling channel standing in for the
//! frozen glucose pathways. Both pools (ATP+ADP, NADH+NAD) are conserved
//! exactly by construction.

use crate::diag::Diagnostics;
use crate::error::{Error, Result};
use crate::ionic::VolumeFractions;
use crate::params::MetabolicParams;
use crate::tensor::Tensor2;
use serde::{Deserialize, Serialize};

/// Saturation value returned for a phosphorylation/redox ratio whose
/// denominator vanished; large enough that p/(mu+p) is 1 to machine
/// precision.
pub const RATIO_SATURATION: f64 = 1e18;

/// One cellular compartment of the metabolic state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellMetabolites {
    pub o2: f64,
    pub atp: f64,
    pub adp: f64,
    pub nadh: f64,
    pub nad: f64,
}

/// Full 12-component metabolic state of one node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetabolicState {
    pub o2_b: f64,
    pub o2_ecs: f64,
    pub neuron: CellMetabolites,
    pub astro: CellMetabolites,
}

/// Time derivative of `MetabolicState`, mM/s.
pub type MetabolicDeriv = MetabolicState;

/// Phosphorylation and redox ratios of both cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyRatios {
    pub p_n: f64,
    pub p_a: f64,
    pub r_n: f64,
    pub r_a: f64,
}

/// Piecewise-linear blood flow depression A(t). Times in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BloodSchedule {
    pub delta: f64,
    pub t1: f64,
    pub r1: f64,
    pub t2: f64,
    pub r2: f64,
    pub t_final: f64,
}

impl BloodSchedule {
    /// No depression at all: A(t) = 1.
    pub fn none() -> BloodSchedule {
        BloodSchedule {
            delta: 0.0,
            t1: 0.0,
            r1: 1.0,
            t2: 1.0,
            r2: 1.0,
            t_final: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.delta) {
            return Err(Error::Config(format!("delta must be in [0,1], got {}", self.delta)));
        }
        if self.t1 < 0.0 || self.r1 <= 0.0 || self.r2 <= 0.0 {
            return Err(Error::Config("schedule requires t1 >= 0, r1 > 0, r2 > 0".into()));
        }
        if self.t1 + self.r1 > self.t2 {
            return Err(Error::Config("schedule requires t1 + r1 <= t2".into()));
        }
        Ok(())
    }
}

impl MetabolicState {
    /// Published severe-ischemia initial condition.
    pub fn reference_initial() -> MetabolicState {
        MetabolicState {
            o2_b: 6.67,
            o2_ecs: 0.04,
            neuron: CellMetabolites {
                o2: 0.03,
                atp: 2.18,
                adp: 6.3e-3,
                nadh: 1.2e-3,
                nad: 0.03,
            },
            astro: CellMetabolites {
                o2: 0.03,
                atp: 2.17,
                adp: 0.03,
                nadh: 1.2e-3,
                nad: 0.03,
            },
        }
    }

    pub fn as_array(&self) -> [f64; 12] {
        [
            self.o2_b,
            self.o2_ecs,
            self.neuron.o2,
            self.neuron.atp,
            self.neuron.adp,
            self.neuron.nadh,
            self.neuron.nad,
            self.astro.o2,
            self.astro.atp,
            self.astro.adp,
            self.astro.nadh,
            self.astro.nad,
        ]
    }

    pub fn from_array(a: [f64; 12]) -> MetabolicState {
        MetabolicState {
            o2_b: a[0],
            o2_ecs: a[1],
            neuron: CellMetabolites {
                o2: a[2],
                atp: a[3],
                adp: a[4],
                nadh: a[5],
                nad: a[6],
            },
            astro: CellMetabolites {
                o2: a[7],
                atp: a[8],
                adp: a[9],
                nadh: a[10],
                nad: a[11],
            },
        }
    }

    pub fn is_finite(&self) -> bool {
        self.as_array().iter().all(|v| v.is_finite())
    }

    /// Clamp oxygen at zero after an explicit step (transport can
    /// overshoot for one step at very low concentrations).
    pub fn floor_oxygen(&mut self, diag: &Diagnostics) {
        for o2 in [
            &mut self.o2_b,
            &mut self.o2_ecs,
            &mut self.neuron.o2,
            &mut self.astro.o2,
        ] {
            if *o2 < 0.0 {
                *o2 = 0.0;
                Diagnostics::bump(&diag.oxygen_floor_hits);
            }
        }
    }
}

/// Total blood oxygen (free plus hemoglobin-bound) as a function of the
/// free concentration: Hill binding with exponent n.
pub fn hill_total(o2_free: f64, p: &MetabolicParams) -> Result<f64> {
    if o2_free < 0.0 || !o2_free.is_finite() {
        return Err(Error::Domain(format!("hill_total requires O2 >= 0, got {o2_free}")));
    }
    if o2_free == 0.0 {
        return Ok(0.0);
    }
    let q = 4.0 * p.hct * p.hb;
    let xn = o2_free.powf(p.n_hill);
    let kn = p.k_h.powf(p.n_hill);
    Ok(o2_free + q * xn / (kn + xn))
}

fn hill_total_deriv(o2_free: f64, p: &MetabolicParams) -> f64 {
    if o2_free <= 0.0 {
        return 1.0;
    }
    let q = 4.0 * p.hct * p.hb;
    let xn = o2_free.powf(p.n_hill);
    let kn = p.k_h.powf(p.n_hill);
    let denom = kn + xn;
    1.0 + q * p.n_hill * kn * xn / (o2_free * denom * denom)
}

/// Invert the Hill relation: the unique free concentration with
/// `hill_total(x) = o2_total`. Bracketing bisection on [0, total]
/// refined by safeguarded Newton.
pub fn hill_invert(o2_total: f64, p: &MetabolicParams) -> Result<f64> {
    if o2_total < 0.0 || !o2_total.is_finite() {
        return Err(Error::Domain(format!("hill_invert requires O2 >= 0, got {o2_total}")));
    }
    if o2_total == 0.0 {
        return Ok(0.0);
    }
    let mut lo = 0.0f64;
    let mut hi = o2_total; // H(x) >= x, so the root lies in [0, total]
    let mut x = 0.5 * o2_total;
    for _ in 0..200 {
        let f = hill_total(x, p)? - o2_total;
        if f.abs() <= 1e-13 * (1.0 + o2_total) {
            return Ok(x);
        }
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let df = hill_total_deriv(x, p);
        let mut next = x - f / df;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-15 * x.abs() {
            return Ok(next);
        }
        x = next;
    }
    Err(Error::Numerical(format!(
        "hill_invert failed to converge for total {o2_total}"
    )))
}

/// Blood to ECS oxygen flux [mM/s]: a modified Fick law on the free
/// concentration with exponent 0.1. The model declares the flux positive;
/// a reversed gradient is clamped to zero and counted.
pub fn blood_ecs_flux(
    o2_b: f64,
    o2_ecs: f64,
    p: &MetabolicParams,
    diag: &Diagnostics,
) -> Result<f64> {
    let free = hill_invert(o2_b, p)?;
    let gradient = free - o2_ecs;
    if gradient < 0.0 {
        Diagnostics::bump(&diag.reverse_flux_clamps);
        return Ok(0.0);
    }
    Ok(p.lambda_b_o2 * gradient.powf(0.1))
}

/// ECS to cell oxygen flux [mM/s], plain Fick with constant permeability.
pub fn cell_flux(o2_ecs: f64, o2_cell: f64, lambda: f64) -> f64 {
    lambda * (o2_ecs - o2_cell)
}

/// Blood flow depression factor A(t), piecewise linear and continuous.
pub fn blood_schedule(t: f64, sched: &BloodSchedule) -> f64 {
    let BloodSchedule {
        delta,
        t1,
        r1,
        t2,
        r2,
        ..
    } = *sched;
    if t < t1 {
        1.0
    } else if t < t1 + r1 {
        1.0 - delta * (t - t1) / r1
    } else if t < t2 {
        1.0 - delta
    } else if t < t2 + r2 {
        1.0 - delta * (1.0 - (t - t2) / r2)
    } else {
        1.0
    }
}

/// Phosphorylation and redox ratios; a vanished denominator saturates
/// instead of faulting (pump factor then reads 1) and is counted.
pub fn phosphorylation_ratios(c: &MetabolicState, diag: &Diagnostics) -> EnergyRatios {
    let ratio = |num: f64, den: f64| {
        if den <= 0.0 {
            Diagnostics::bump(&diag.ratio_saturations);
            if num <= 0.0 {
                0.0
            } else {
                RATIO_SATURATION
            }
        } else {
            num / den
        }
    };
    EnergyRatios {
        p_n: ratio(c.neuron.atp, c.neuron.adp),
        p_a: ratio(c.astro.atp, c.astro.adp),
        r_n: ratio(c.neuron.nadh, c.neuron.nad),
        r_a: ratio(c.astro.nadh, c.astro.nad),
    }
}

fn mm(x: f64, k: f64) -> f64 {
    let x = x.max(0.0);
    x / (k + x)
}

/// Reaction rates of one cellular compartment.
#[derive(Debug, Clone, Copy, Default)]
pub struct CellReactionRates {
    /// oxidative phosphorylation, in O2 units consumed [mM/s]
    pub oxidative: f64,
    /// ATP hydrolysis [mM/s of ATP]
    pub hydrolysis: f64,
    /// NADH regeneration by the frozen substrate pathways [mM/s of NADH]
    pub redox_regen: f64,
}

fn cell_rates(
    cell: &CellMetabolites,
    v_max: f64,
    k_adp: f64,
    psi_atpase: f64,
    p: &MetabolicParams,
) -> CellReactionRates {
    let common = v_max * mm(cell.o2, p.k_o2) * mm(cell.adp, k_adp);
    CellReactionRates {
        oxidative: common * mm(cell.nadh, p.k_nadh),
        hydrolysis: psi_atpase * mm(cell.atp, p.k_atp_gate),
        redox_regen: p.nadh_per_o2 * common * mm(cell.nad, p.k_nad),
    }
}

fn cell_derivative(
    j_o2: f64,
    rates: &CellReactionRates,
    eta: f64,
    p: &MetabolicParams,
) -> CellMetabolites {
    let ox = rates.oxidative;
    CellMetabolites {
        o2: (j_o2 - ox) / eta,
        atp: (p.nu_atp * ox - rates.hydrolysis) / eta,
        adp: (-p.nu_atp * ox + rates.hydrolysis) / eta,
        nadh: (-p.nadh_per_o2 * ox + rates.redox_regen) / eta,
        nad: (p.nadh_per_o2 * ox - rates.redox_regen) / eta,
    }
}

/// Right-hand side of the metabolic system [mM/s]. `psi_n`, `psi_a` are
/// the ATPase demand fluxes from the electrophysiology; `vol` carries the
/// current (possibly swollen) volume fractions.
pub fn rhs_metabolic(
    c: &MetabolicState,
    psi_n: f64,
    psi_a: f64,
    t: f64,
    p: &MetabolicParams,
    sched: &BloodSchedule,
    vol: &VolumeFractions,
    diag: &Diagnostics,
) -> Result<MetabolicDeriv> {
    if !c.is_finite() {
        return Err(Error::Domain("non-finite metabolic state".into()));
    }
    let j = blood_ecs_flux(c.o2_b, c.o2_ecs, p, diag)?;
    let j_n = cell_flux(c.o2_ecs, c.neuron.o2, p.lambda_n_o2);
    let j_a = cell_flux(c.o2_ecs, c.astro.o2, p.lambda_a_o2);
    let a_t = blood_schedule(t, sched);
    let supply = a_t * p.q_per_s() / p.f_mix * (p.q_a - c.o2_b);

    let rates_n = cell_rates(&c.neuron, p.v_max_n, p.k_adp_n, psi_n, p);
    let rates_a = cell_rates(&c.astro, p.v_max_a, p.k_adp_a, psi_a, p);

    Ok(MetabolicState {
        o2_b: (supply - j) / p.eta_b,
        o2_ecs: (j - j_n - j_a) / vol.eta_ecs,
        neuron: cell_derivative(j_n, &rates_n, vol.eta_n, p),
        astro: cell_derivative(j_a, &rates_a, vol.eta_a, p),
    })
}

/// Cell volume under the swelling law: V = V0 (1 + delta (1 - O2/O2_base)),
/// clamped below at `floor_frac * V0`.
pub fn swelling_volume(
    o2_delayed: f64,
    o2_base: f64,
    delta: f64,
    v0: f64,
    floor_frac: f64,
    diag: &Diagnostics,
) -> f64 {
    let v = v0 * (1.0 + delta * (1.0 - o2_delayed / o2_base));
    let floor = floor_frac * v0;
    if v < floor {
        Diagnostics::bump(&diag.volume_floor_hits);
        floor
    } else {
        v
    }
}

/// Conductivity under tortuosity: Sigma* = Sigma / lambda^2, preserving
/// the principal directions.
pub fn tortuosity_scale(sigma: &Tensor2, lambda_tort: f64) -> Tensor2 {
    sigma.scale(1.0 / (lambda_tort * lambda_tort))
}

/// Sampled history of a scalar, for the delayed swelling response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct History {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl History {
    pub fn new() -> History {
        History {
            times: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn push(&mut self, t: f64, v: f64, keep_horizon: f64) {
        self.times.push(t);
        self.values.push(v);
        // drop samples older than the horizon, keeping one before it
        let cutoff = t - keep_horizon;
        let mut drop = 0;
        while drop + 1 < self.times.len() && self.times[drop + 1] < cutoff {
            drop += 1;
        }
        if drop > 0 {
            self.times.drain(..drop);
            self.values.drain(..drop);
        }
    }

    /// Linear interpolation at `t`; clamps to the recorded range.
    pub fn sample(&self, t: f64) -> Option<f64> {
        if self.times.is_empty() {
            return None;
        }
        if t <= self.times[0] {
            return Some(self.values[0]);
        }
        let last = self.times.len() - 1;
        if t >= self.times[last] {
            return Some(self.values[last]);
        }
        let i = self.times.partition_point(|&x| x <= t) - 1;
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let (v0, v1) = (self.values[i], self.values[i + 1]);
        let w = (t - t0) / (t1 - t0);
        Some(v0 + w * (v1 - v0))
    }
}

impl Default for History {
    fn default() -> Self {
        Self::new()
    }
}

/// Per-node volume bookkeeping: swelling of both cells shrinks the ECS so
/// that the tissue total stays constant, with a floor; crossing the switch
/// fraction flips the tortuosity flag used by the tissue solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeState {
    pub base: VolumeFractions,
    pub current: VolumeFractions,
    pub ischemic_tortuosity: bool,
    hist_n: History,
    hist_a: History,
}

impl VolumeState {
    pub fn new(base: VolumeFractions) -> VolumeState {
        VolumeState {
            base,
            current: base,
            ischemic_tortuosity: false,
            hist_n: History::new(),
            hist_a: History::new(),
        }
    }

    /// Update volumes from the (possibly delayed) cell oxygen at time `t`
    /// seconds. Returns true when the tortuosity flag flipped.
    pub fn update(
        &mut self,
        t: f64,
        o2_n: f64,
        o2_a: f64,
        delta: f64,
        p: &MetabolicParams,
        diag: &Diagnostics,
    ) -> bool {
        let horizon = 2.0 * p.tau_delay + 1.0;
        self.hist_n.push(t, o2_n, horizon);
        self.hist_a.push(t, o2_a, horizon);
        let (o2_n_eff, o2_a_eff) = if p.tau_delay > 0.0 {
            (
                self.hist_n.sample(t - p.tau_delay).unwrap_or(o2_n),
                self.hist_a.sample(t - p.tau_delay).unwrap_or(o2_a),
            )
        } else {
            (o2_n, o2_a)
        };
        let v_n = swelling_volume(o2_n_eff, p.o2_base_n, delta, self.base.eta_n, p.v_floor_frac, diag);
        let v_a = swelling_volume(o2_a_eff, p.o2_base_a, delta, self.base.eta_a, p.v_floor_frac, diag);
        let mut growth = (v_n - self.base.eta_n) + (v_a - self.base.eta_a);
        let floor = p.ecs_floor_frac * self.base.eta_ecs;
        let available = self.base.eta_ecs - floor;
        let (eta_n, eta_a, eta_ecs) = if growth > available {
            // cap the swelling proportionally so the ECS stops at its floor
            Diagnostics::bump(&diag.volume_floor_hits);
            let scale = available / growth;
            growth = available;
            (
                self.base.eta_n + (v_n - self.base.eta_n) * scale,
                self.base.eta_a + (v_a - self.base.eta_a) * scale,
                floor,
            )
        } else {
            (v_n, v_a, self.base.eta_ecs - growth)
        };
        let _ = growth;
        self.current = VolumeFractions {
            eta_n,
            eta_a,
            eta_ecs,
        };
        let was = self.ischemic_tortuosity;
        self.ischemic_tortuosity = eta_ecs < p.tort_switch_frac * self.base.eta_ecs;
        self.ischemic_tortuosity != was
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::Params;
    use approx::assert_relative_eq;

    fn setup() -> (MetabolicParams, VolumeFractions, Diagnostics) {
        let p = Params::default_set();
        let vol = VolumeFractions {
            eta_n: p.metabolic.eta_n,
            eta_a: p.metabolic.eta_a,
            eta_ecs: p.metabolic.eta_ecs,
        };
        (p.metabolic, vol, Diagnostics::new())
    }

    #[test]
    fn hill_zero_and_half_saturation() {
        let (p, _, _) = setup();
        assert_eq!(hill_total(0.0, &p).unwrap(), 0.0);
        let half = hill_total(p.k_h, &p).unwrap();
        assert_relative_eq!(half, p.k_h + 2.0 * p.hct * p.hb, max_relative = 1e-12);
        assert!(hill_total(-0.1, &p).is_err());
    }

    #[test]
    fn hill_strictly_increasing() {
        let (p, _, _) = setup();
        let mut last = -1.0;
        for k in 0..=1000 {
            let x = 10.0 * k as f64 / 1000.0;
            let h = hill_total(x, &p).unwrap();
            assert!(h > last, "not increasing at x={x}");
            last = h;
        }
    }

    #[test]
    fn hill_invert_round_trips() {
        let (p, _, _) = setup();
        for x in [1e-3, 0.03, 1.0, 7.0] {
            let total = hill_total(x, &p).unwrap();
            let back = hill_invert(total, &p).unwrap();
            assert_relative_eq!(back, x, max_relative = 1e-10);
        }
        assert_eq!(hill_invert(0.0, &p).unwrap(), 0.0);
    }

    #[test]
    fn hill_invert_dense_grid() {
        let (p, _, _) = setup();
        for k in 1..=1000 {
            let x = 8.0 * k as f64 / 1000.0;
            let back = hill_invert(hill_total(x, &p).unwrap(), &p).unwrap();
            assert_relative_eq!(back, x, max_relative = 1e-10);
        }
    }

    #[test]
    fn hill_invert_of_published_blood_value() {
        let (p, _, _) = setup();
        let free = hill_invert(6.67, &p).unwrap();
        assert!(free > 0.0 && free < 6.67);
    }

    #[test]
    fn blood_flux_unit_gradient_and_clamp() {
        let (p, _, diag) = setup();
        // H^-1(B) == E gives zero flux
        let e = 0.05;
        let b = hill_total(e, &p).unwrap();
        assert_eq!(blood_ecs_flux(b, e, &p, &diag).unwrap(), 0.0);
        // unit gradient gives lambda exactly
        let b1 = hill_total(1.0 + e, &p).unwrap();
        assert_relative_eq!(
            blood_ecs_flux(b1, e, &p, &diag).unwrap(),
            p.lambda_b_o2,
            max_relative = 1e-9
        );
        // reversed gradient clamps to zero and is counted
        let before = diag.snapshot()[1];
        assert_eq!(blood_ecs_flux(b, e + 1.0, &p, &diag).unwrap(), 0.0);
        assert_eq!(diag.snapshot()[1], before + 1);
    }

    #[test]
    fn blood_equation_near_stationary_at_published_state() {
        // Direct residual evaluation at the published rest state: the
        // net blood oxygen balance must be small against the scale q_a/F.
        let (p, _, diag) = setup();
        let c = MetabolicState::reference_initial();
        let j = blood_ecs_flux(c.o2_b, c.o2_ecs, &p, &diag).unwrap();
        assert!(j > 0.0);
        let supply = p.q_per_s() / p.f_mix * (p.q_a - c.o2_b);
        let db_dt = (supply - j) / p.eta_b;
        assert!(
            db_dt.abs() < 0.05,
            "blood residual too large: {db_dt} mM/s"
        );
    }

    #[test]
    fn cell_flux_values() {
        assert_eq!(cell_flux(0.04, 0.04, 0.94), 0.0);
        assert_relative_eq!(cell_flux(0.04, 0.03, 0.94), 9.4e-3, max_relative = 1e-12);
        assert_eq!(cell_flux(0.1, 0.3, 0.68), -cell_flux(0.3, 0.1, 0.68));
    }

    fn severe() -> BloodSchedule {
        BloodSchedule {
            delta: 0.7,
            t1: 10.0,
            r1: 5.0,
            t2: 70.0,
            r2: 60.0,
            t_final: 180.0,
        }
    }

    #[test]
    fn schedule_values() {
        let s = severe();
        assert_eq!(blood_schedule(3.0, &s), 1.0);
        assert_relative_eq!(blood_schedule(30.0, &s), 0.3, max_relative = 1e-12);
        assert_relative_eq!(
            blood_schedule(s.t1 + s.r1 / 2.0, &s),
            1.0 - s.delta / 2.0,
            max_relative = 1e-12
        );
        assert_eq!(blood_schedule(150.0, &s), 1.0);
    }

    #[test]
    fn schedule_continuous_and_bounded() {
        let s = severe();
        let mut prev = blood_schedule(0.0, &s);
        for k in 1..=20_000 {
            let t = 160.0 * k as f64 / 20_000.0;
            let a = blood_schedule(t, &s);
            assert!(a <= 1.0 + 1e-12 && a >= 1.0 - s.delta - 1e-12);
            assert!((a - prev).abs() < 1.5 * s.delta * 160.0 / 20_000.0 / s.r1.min(s.r2) + 1e-9);
            prev = a;
        }
        assert!(severe().validate().is_ok());
        let bad = BloodSchedule {
            t2: 12.0,
            ..severe()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn ratios_published_arithmetic() {
        let (_, _, diag) = setup();
        let c = MetabolicState::reference_initial();
        let r = phosphorylation_ratios(&c, &diag);
        assert_relative_eq!(r.p_n, 346.031746031746, max_relative = 1e-12);
        let mut eq = c;
        eq.neuron.adp = eq.neuron.atp;
        assert_eq!(phosphorylation_ratios(&eq, &diag).p_n, 1.0);
        let mut nz = c;
        nz.neuron.nadh = 0.0;
        assert_eq!(phosphorylation_ratios(&nz, &diag).r_n, 0.0);
        let mut sat = c;
        sat.astro.adp = 0.0;
        let r = phosphorylation_ratios(&sat, &diag);
        assert!(r.p_a >= RATIO_SATURATION);
        assert!(diag.snapshot()[2] >= 1);
    }

    #[test]
    fn pools_conserved_analytically() {
        let (p, vol, diag) = setup();
        let sched = BloodSchedule::none();
        let mut c = MetabolicState::reference_initial();
        // perturb into a generic state
        c.neuron.atp = 1.3;
        c.neuron.adp = 0.8863;
        c.astro.nadh = 0.011;
        let d = rhs_metabolic(&c, 0.08, 0.05, 0.0, &p, &sched, &vol, &diag).unwrap();
        assert_relative_eq!(d.neuron.atp + d.neuron.adp, 0.0, epsilon = 1e-15);
        assert_relative_eq!(d.astro.atp + d.astro.adp, 0.0, epsilon = 1e-15);
        assert_relative_eq!(d.neuron.nadh + d.neuron.nad, 0.0, epsilon = 1e-15);
        assert_relative_eq!(d.astro.nadh + d.astro.nad, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn constructed_equilibrium_is_stationary() {
        // Zero oxygen everywhere, zero arterial concentration, zero demand:
        // every gradient and reaction rate vanishes identically.
        let (mut p, vol, diag) = setup();
        p.q_a = 0.0;
        let sched = BloodSchedule::none();
        let mut c = MetabolicState::reference_initial();
        c.o2_b = 0.0;
        c.o2_ecs = 0.0;
        c.neuron.o2 = 0.0;
        c.astro.o2 = 0.0;
        let d = rhs_metabolic(&c, 0.0, 0.0, 0.0, &p, &sched, &vol, &diag).unwrap();
        for v in d.as_array() {
            assert_relative_eq!(v, 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn swelling_law_values() {
        let (_, _, diag) = setup();
        assert_eq!(swelling_volume(0.03, 0.03, 0.7, 0.4, 0.1, &diag), 0.4);
        assert_relative_eq!(
            swelling_volume(0.0, 0.03, 0.7, 1.0, 0.1, &diag),
            1.7,
            max_relative = 1e-12
        );
        assert_eq!(swelling_volume(0.9, 0.03, 0.0, 0.4, 0.1, &diag), 0.4);
    }

    #[test]
    fn volume_state_keeps_total_and_flips_tortuosity() {
        let (p, vol, diag) = setup();
        let mut vs = VolumeState::new(vol);
        let total0 = vol.eta_n + vol.eta_a + vol.eta_ecs;
        // severe hypoxia swells the cells
        let flipped = vs.update(1.0, 0.003, 0.003, 0.7, &p, &diag);
        let cur = vs.current;
        let total = cur.eta_n + cur.eta_a + cur.eta_ecs;
        assert_relative_eq!(total, total0, max_relative = 1e-12);
        assert!(cur.eta_ecs < vol.eta_ecs);
        assert!(cur.eta_n > vol.eta_n);
        // with the default floor the ECS collapse crosses the switch
        assert!(vs.ischemic_tortuosity);
        assert!(flipped);
    }

    #[test]
    fn tortuosity_scaling() {
        let t = Tensor2::with_axon(0.5, 0.3, (1.0, 2.0));
        let same = tortuosity_scale(&t, 1.0);
        assert_eq!(t, same);
        let scaled = tortuosity_scale(&t, 2.2);
        assert_relative_eq!(scaled.xx, t.xx / 4.84, max_relative = 1e-12);
        assert_relative_eq!(scaled.xy, t.xy / 4.84, max_relative = 1e-12);
        // scalar scaling preserves eigenvectors: scaled tensor stays
        // proportional to the original
        assert_relative_eq!(scaled.xy * t.xx, scaled.xx * t.xy, max_relative = 1e-12);
    }

    #[test]
    fn history_interpolates_and_prunes() {
        let mut h = History::new();
        for k in 0..100 {
            h.push(k as f64, (k * k) as f64, 10.0);
        }
        assert!(h.times.len() < 20);
        let v = h.sample(98.5).unwrap();
        assert_relative_eq!(v, (98.0 * 98.0 + 99.0 * 99.0) / 2.0, max_relative = 1e-12);
        assert_eq!(h.sample(0.0).unwrap(), h.values[0]);
    }
}
