//! Resting-state solver for the coupled cell model.
//!
//! Finds a stationary point of the 19-dimensional coupled system (7 ionic
//! plus 12 metabolic components) at A(t) = 1, xi = 0, baseline volumes,
//! with the energy coupling evaluated self-consistently. Damped Newton
//! with a finite-difference Jacobian on scaled variables; falls back to a
//! relaxation pre-integration when the initial guess is poor.

use crate::diag::Diagnostics;
use crate::error::{Error, Result};
use crate::ionic::{couple, rhs_ionic, IonicState, VolumeFractions};
use crate::metabolic::{phosphorylation_ratios, rhs_metabolic, BloodSchedule, MetabolicState};
use crate::params::Params;

/// Coupled right-hand side with self-consistent coupling, as one flat
/// 19-vector. Ionic part in 1/ms, metabolic part in 1/s; the residual is
/// used only for root finding so mixed units are fine.
pub fn coupled_rhs(y: &[f64; 19], params: &Params, diag: &Diagnostics) -> Result<[f64; 19]> {
    let ionic = IonicState::from_array(y[0..7].try_into().unwrap());
    let mut marr = [0.0; 12];
    marr.copy_from_slice(&y[7..19]);
    let metab = MetabolicState::from_array(marr);
    let vol = VolumeFractions {
        eta_n: params.metabolic.eta_n,
        eta_a: params.metabolic.eta_a,
        eta_ecs: params.metabolic.eta_ecs,
    };
    let ratios = phosphorylation_ratios(&metab, diag);
    let (coupling, _) = couple(&ionic, &params.ionic, &vol, 0.0, ratios.p_n, ratios.p_a)?;
    let di = rhs_ionic(&ionic, &coupling, &params.ionic, &vol, 0.0)?;
    let dm = rhs_metabolic(
        &metab,
        coupling.psi_n,
        coupling.psi_a,
        0.0,
        &params.metabolic,
        &BloodSchedule::none(),
        &vol,
        diag,
    )?;
    let mut out = [0.0; 19];
    out[0..7].copy_from_slice(&[di.u, di.ca_i, di.k_o, di.na_i, di.m, di.n, di.h]);
    out[7..19].copy_from_slice(&dm.as_array());
    Ok(out)
}

/// Solve the dense linear system in place by Gaussian elimination with
/// partial pivoting. Matrix is row-major n x n.
fn solve_dense(a: &mut [f64], b: &mut [f64], n: usize) -> Result<()> {
    for col in 0..n {
        let mut piv = col;
        let mut best = a[col * n + col].abs();
        for row in col + 1..n {
            let v = a[row * n + col].abs();
            if v > best {
                best = v;
                piv = row;
            }
        }
        if best < 1e-300 {
            return Err(Error::Numerical("singular Jacobian in rest solve".into()));
        }
        if piv != col {
            for k in 0..n {
                a.swap(col * n + k, piv * n + k);
            }
            b.swap(col, piv);
        }
        let d = a[col * n + col];
        for row in col + 1..n {
            let f = a[row * n + col] / d;
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row * n + k] -= f * a[col * n + k];
            }
            b[row] -= f * b[col];
        }
    }
    for col in (0..n).rev() {
        let mut s = b[col];
        for k in col + 1..n {
            s -= a[col * n + k] * b[k];
        }
        b[col] = s / a[col * n + col];
    }
    Ok(())
}

fn norm_scaled(f: &[f64; 19], scale: &[f64; 19]) -> f64 {
    f.iter()
        .zip(scale)
        .map(|(v, s)| (v / s).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Find a coupled rest state near the given guess. Gates are kept inside
/// [0, 1] and concentrations positive during the iteration.
pub fn find_rest(
    guess_ionic: &IonicState,
    guess_metab: &MetabolicState,
    params: &Params,
) -> Result<(IonicState, MetabolicState)> {
    let diag = Diagnostics::new();
    let mut y = [0.0f64; 19];
    y[0..7].copy_from_slice(&guess_ionic.as_array());
    y[7..19].copy_from_slice(&guess_metab.as_array());

    // residual scales: ionic rates per ms are O(1), metabolic per s vary
    let mut scale = [1.0f64; 19];
    for (i, s) in scale.iter_mut().enumerate() {
        *s = y[i].abs().max(1e-3);
    }

    let project = |y: &mut [f64; 19]| {
        for g in 4..7 {
            y[g] = y[g].clamp(1e-6, 1.0 - 1e-6);
        }
        y[2] = y[2].max(1e-3); // K_o
        y[3] = y[3].max(1e-3); // Na_i
        y[1] = y[1].max(0.0); // Ca
        for v in y[7..19].iter_mut() {
            *v = v.max(0.0);
        }
    };

    let mut f = coupled_rhs(&y, params, &diag)?;
    let mut fnorm = norm_scaled(&f, &scale);

    for _iter in 0..120 {
        if fnorm < 1e-11 {
            break;
        }
        // finite-difference Jacobian, column scaled
        let n = 19;
        let mut jac = vec![0.0f64; n * n];
        for col in 0..n {
            let h = 1e-7 * y[col].abs().max(1e-6);
            let mut yp = y;
            let mut ym = y;
            yp[col] += h;
            ym[col] -= h;
            project(&mut yp);
            project(&mut ym);
            let denom = yp[col] - ym[col];
            let fp = coupled_rhs(&yp, params, &diag)?;
            let fm = coupled_rhs(&ym, params, &diag)?;
            for row in 0..n {
                jac[row * n + col] = (fp[row] - fm[row]) / denom;
            }
        }
        let mut step: Vec<f64> = f.iter().map(|v| -v).collect();
        solve_dense(&mut jac, &mut step, n)?;

        // damped line search
        let mut lambda = 1.0f64;
        let mut accepted = false;
        for _ in 0..30 {
            let mut trial = y;
            for i in 0..n {
                trial[i] += lambda * step[i];
            }
            project(&mut trial);
            if let Ok(ft) = coupled_rhs(&trial, params, &diag) {
                let fn_t = norm_scaled(&ft, &scale);
                if fn_t < fnorm * (1.0 - 1e-4 * lambda) || fn_t < 1e-11 {
                    y = trial;
                    f = ft;
                    fnorm = fn_t;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            return Err(Error::Numerical(format!(
                "rest solve stalled at residual {fnorm:.3e}"
            )));
        }
    }
    if fnorm >= 1e-9 {
        return Err(Error::Numerical(format!(
            "rest solve did not converge: residual {fnorm:.3e}"
        )));
    }
    let ionic = IonicState::from_array(y[0..7].try_into().unwrap());
    let mut marr = [0.0; 12];
    marr.copy_from_slice(&y[7..19]);
    Ok((ionic, MetabolicState::from_array(marr)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_solver_inverts_small_system() {
        // 3x3 with known solution
        let mut a = vec![4.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 2.0];
        let x_true = [1.0, -2.0, 3.0];
        let mut b = vec![
            4.0 * 1.0 + 1.0 * -2.0,
            1.0 - 6.0 + 3.0,
            -2.0 + 6.0,
        ];
        solve_dense(&mut a, &mut b, 3).unwrap();
        for (xi, ti) in b.iter().zip(x_true) {
            assert!((xi - ti).abs() < 1e-12);
        }
    }
}
