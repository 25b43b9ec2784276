//! Model parameters and the versioned default parameter file.
//!
//! Defaults live in `params/default.toml` (embedded at compile time) with
//! per-value provenance comments. Scenario files override individual keys;
//! unknown keys are rejected with a suggestion instead of being silently
//! ignored.

use crate::config::check_keys;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use toml::Table;

/// Embedded default parameter file (schema_version 1).
pub const DEFAULT_PARAMS_TOML: &str = include_str!("../params/default.toml");

/// Electrophysiology constants. See `params/default.toml` for units and
/// provenance of each value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IonicParams {
    pub g_na: f64,
    pub g_k: f64,
    pub g_cl: f64,
    pub g_na_leak0: f64,
    pub g_k_leak0: f64,
    pub g_ca: f64,
    pub rho: f64,
    pub g_glia: f64,
    pub epsilon_k: f64,
    pub k_inf: f64,
    pub k_bath: f64,
    pub phi: f64,
    pub gamma: f64,
    pub e_ca: f64,
    pub mu_pump: f64,
    pub mu_glia: f64,
    pub c_m: f64,
    pub tau_units: f64,
    pub sigma_glu: f64,
    pub s_cal: f64,
    pub h1: f64,
    pub h2: f64,
    pub pump_na_stoich: f64,
    pub beta_vol: f64,
    pub na_total: f64,
    pub na_i_ref: f64,
    pub k_i_base: f64,
    pub cl_i: f64,
    pub cl_o: f64,
}

/// Metabolic compartment constants (Table values plus the reduced
/// reaction-network calibration).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetabolicParams {
    pub eta_b: f64,
    pub eta_ecs: f64,
    pub eta_n: f64,
    pub eta_a: f64,
    pub hct: f64,
    pub hb: f64,
    pub k_h: f64,
    pub n_hill: f64,
    pub q_flow: f64,
    pub q_a: f64,
    pub f_mix: f64,
    pub lambda_b_o2: f64,
    pub lambda_n_o2: f64,
    pub lambda_a_o2: f64,
    pub v_max_n: f64,
    pub v_max_a: f64,
    pub k_o2: f64,
    pub k_adp_n: f64,
    pub k_adp_a: f64,
    pub k_nadh: f64,
    pub k_nad: f64,
    pub nu_atp: f64,
    pub nadh_per_o2: f64,
    pub k_atp_gate: f64,
    pub o2_base_n: f64,
    pub o2_base_a: f64,
    pub tau_delay: f64,
    pub v_floor_frac: f64,
    pub ecs_floor_frac: f64,
    pub tort_switch_frac: f64,
    pub lambda_tort_healthy: f64,
    pub lambda_tort_ischemic: f64,
}

/// Tissue-level solver constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonodomainParams {
    pub chi_m: f64,
    pub c_m: f64,
    pub sigma_healthy: f64,
    pub sigma_ischemic: f64,
    pub sigma_ischemic_tangential: f64,
    pub eta0: f64,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    pub p_min: usize,
    pub p_max: usize,
    pub adapt_raise: f64,
    pub adapt_drop: f64,
    pub adapt_every: usize,
    pub divergence_guard_mv: f64,
}

/// Full parameter set as loaded from the parameter file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    pub schema_version: u32,
    pub ionic: IonicParams,
    pub metabolic: MetabolicParams,
    pub monodomain: MonodomainParams,
}

impl MetabolicParams {
    /// Blood flow converted from mL/min to 1/s per unit tissue volume.
    pub fn q_per_s(&self) -> f64 {
        self.q_flow / 60.0
    }
}

impl Params {
    /// Load the embedded defaults.
    pub fn default_set() -> Params {
        Params::from_toml_str(DEFAULT_PARAMS_TOML)
            .expect("embedded default parameter file must parse")
    }

    /// Parse a full parameter file, rejecting unknown keys with hints.
    pub fn from_toml_str(text: &str) -> Result<Params> {
        let table: Table = text
            .parse()
            .map_err(|e| Error::Config(format!("parameter file: {e}")))?;
        validate_tables(&table)?;
        let params: Params = table
            .try_into()
            .map_err(|e| Error::Config(format!("parameter file: {e}")))?;
        if params.schema_version != 1 {
            return Err(Error::Config(format!(
                "unsupported parameter schema_version {}",
                params.schema_version
            )));
        }
        params.validate()?;
        Ok(params)
    }

    /// Apply per-key overrides, e.g. from a scenario's `[ionic]` table.
    pub fn apply_overrides(
        &mut self,
        ionic: Option<&Table>,
        metabolic: Option<&Table>,
        monodomain: Option<&Table>,
    ) -> Result<()> {
        let mut root = Table::try_from(self.clone())
            .map_err(|e| Error::Config(format!("internal: {e}")))?;
        for (name, over) in [
            ("ionic", ionic),
            ("metabolic", metabolic),
            ("monodomain", monodomain),
        ] {
            let Some(over) = over else { continue };
            let keys = table_keys(&root, name);
            check_keys(name, over, &keys.iter().map(String::as_str).collect::<Vec<_>>())?;
            let target = root
                .get_mut(name)
                .and_then(|v| v.as_table_mut())
                .expect("params tables exist");
            for (k, v) in over {
                target.insert(k.clone(), v.clone());
            }
        }
        let merged: Params = root
            .try_into()
            .map_err(|e| Error::Config(format!("override: {e}")))?;
        merged.validate()?;
        *self = merged;
        Ok(())
    }

    /// Physical sanity checks plus the documented volume-fraction warning.
    pub fn validate(&self) -> Result<()> {
        let i = &self.ionic;
        for (name, v) in [
            ("g_na", i.g_na),
            ("g_k", i.g_k),
            ("g_cl", i.g_cl),
            ("rho", i.rho),
            ("g_glia", i.g_glia),
            ("epsilon_k", i.epsilon_k),
            ("phi", i.phi),
            ("tau_units", i.tau_units),
            ("c_m", i.c_m),
        ] {
            if !(v > 0.0) {
                return Err(Error::Config(format!("ionic.{name} must be positive, got {v}")));
            }
        }
        let m = &self.metabolic;
        if !(m.n_hill > 0.0 && m.k_h > 0.0) {
            return Err(Error::Config("metabolic Hill parameters must be positive".into()));
        }
        if m.eta_n + m.eta_a + m.eta_ecs > 1.0 + 1e-12 {
            return Err(Error::Config(
                "metabolic volume fractions eta_n + eta_a + eta_ecs exceed 1".into(),
            ));
        }
        // The published table sums the four fractions to 1.04; keep it as
        // printed but say so once.
        let total = m.eta_n + m.eta_a + m.eta_ecs + m.eta_b;
        if total > 1.0 + 1e-12 {
            log::warn!("volume fractions incl. blood sum to {total:.4} (> 1), kept as configured");
        }
        if !(0.0..=1.0).contains(&m.ecs_floor_frac) || !(0.0..=1.0).contains(&m.v_floor_frac) {
            return Err(Error::Config("volume floors must lie in [0, 1]".into()));
        }
        if m.lambda_tort_healthy < 1.0 || m.lambda_tort_ischemic < 1.0 {
            return Err(Error::Config("tortuosity must be >= 1".into()));
        }
        let s = &self.monodomain;
        if s.p_min < 1 || s.p_max < s.p_min {
            return Err(Error::Config("degree range requires 1 <= p_min <= p_max".into()));
        }
        if !(s.eta0 > 0.0) {
            return Err(Error::Config("monodomain.eta0 must be positive".into()));
        }
        Ok(())
    }
}

fn table_keys(root: &Table, name: &str) -> Vec<String> {
    root.get(name)
        .and_then(|v| v.as_table())
        .map(|t| t.keys().cloned().collect())
        .unwrap_or_default()
}


fn validate_tables(table: &Table) -> Result<()> {
    const ROOT: &[&str] = &["schema_version", "ionic", "metabolic", "monodomain"];
    check_keys("params", table, ROOT)
}
