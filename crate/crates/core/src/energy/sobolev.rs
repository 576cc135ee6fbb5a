//! Best constant of `S (int |u|^{p+1})^{2/(p+1)} <= int (|grad u|^2 - lambda u^2)` over radial functions.
//!
//! Two minimisers are compared: the shooting ground state and the Galerkin ground state.

use super::galerkin::{galerkin_ground_state, GalerkinOptions};
use super::{energy, RadialFunction};
use crate::error::{Error, Result};
use crate::params::Params;
use crate::radial::{find_nodal_solution, RadialConfig, RadialProfile};
use crate::scalar::Real;
use serde::{Deserialize, Serialize};

/// Settings for [`estimate_sobolev_constant`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct SobolevConfig {
    pub radial: RadialConfig,
    pub galerkin: GalerkinOptions,
}

#[derive(Debug, Clone, Serialize)]
pub struct SobolevEstimate<T> {
    /// Smallest quotient found.
    #[serde(rename = "S_lambda_N_p")]
    pub s_lambda_n_p: T,
    pub shooting_estimate: Option<T>,
    pub galerkin_estimate: T,
    /// Relative gap between the two estimates, if both exist.
    pub gap: Option<T>,
    /// `I_lambda` of the shooting ground state.
    pub shooting_energy: Option<T>,
    pub galerkin_energy: T,
    /// Both minimisers were found and agree to the configured tolerance.
    pub converged: bool,
    #[serde(skip)]
    pub minimizer_profile: RadialProfile<T>,
}

/// Quotient `int (|grad u|^2 - lambda u^2) dV / (int |u|^{p+1} dV)^{2/(p+1)}`.
pub fn rayleigh_quotient<T, F>(u: &F, params: &Params<T>, rel_tol: T) -> Result<T>
where
    T: Real,
    F: RadialFunction<T> + ?Sized,
{
    let r = energy(u, params, rel_tol)?;
    if !(r.nonlinear_term > T::zero()) {
        return Err(Error::Numerical("Rayleigh quotient of the zero function".into()));
    }
    Ok(r.quadratic_term(params.lambda) / r.nonlinear_term.powf(T::c(2.0) / (params.p + T::one())))
}

/// Agreement required between the two minimisers.
pub const ORACLE_AGREEMENT: f64 = 1e-4;

/// Estimates the radial best constant with both minimisers.
pub fn estimate_sobolev_constant<T: Real>(params: &Params<T>, cfg: &SobolevConfig) -> Result<SobolevEstimate<T>> {
    params.validate()?;
    let gal = galerkin_ground_state(params, &cfg.galerkin)?;
    let rel = T::c(cfg.radial.quad_rel);
    let shot = find_nodal_solution(0, params, &cfg.radial).and_then(|r| {
        let q = rayleigh_quotient(&r.profile, params, rel)?;
        Ok((q, r.energy, r.profile))
    });
    Ok(match shot {
        Ok((q, e, profile)) => {
            let gap = (q - gal.quotient).abs() / q;
            SobolevEstimate {
                s_lambda_n_p: q.min(gal.quotient),
                shooting_estimate: Some(q),
                galerkin_estimate: gal.quotient,
                gap: Some(gap),
                shooting_energy: Some(e),
                galerkin_energy: gal.energy,
                converged: gal.converged && gap < T::c(ORACLE_AGREEMENT),
                minimizer_profile: profile,
            }
        }
        Err(_) => SobolevEstimate {
            s_lambda_n_p: gal.quotient,
            shooting_estimate: None,
            galerkin_estimate: gal.quotient,
            gap: None,
            shooting_energy: None,
            galerkin_energy: gal.energy,
            converged: false,
            minimizer_profile: gal.profile,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::FnRadial;

    #[test]
    fn quotient_is_scale_invariant() {
        let params = Params::new(3, 3.0, 0.5).unwrap();
        let bp: Vec<f64> = (0..=60).map(|i| i as f64 * 0.5).collect();
        let a = 3.0;
        let u = FnRadial { f: move |t: f64| ((-a * t).exp(), -a * (-a * t).exp()), breakpoints: bp.clone() };
        let v = FnRadial { f: move |t: f64| (7.0 * (-a * t).exp(), -7.0 * a * (-a * t).exp()), breakpoints: bp };
        let q1 = rayleigh_quotient(&u, &params, 1e-12).unwrap();
        let q2 = rayleigh_quotient(&v, &params, 1e-12).unwrap();
        assert!(((q1 - q2) / q1).abs() < 1e-10);
    }
}
