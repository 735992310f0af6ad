//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Every export returns a flat `Float64Array`. The plain functions in
//! [`demo`] hold the logic and are what the native tests call.

use wasm_bindgen::prelude::*;

pub mod demo {
    use timecrystal::mastereq::stationary_state;
    use timecrystal::semiclassical::{integrate_mf, simulate_phase};
    use timecrystal::{magnetization_of_density, CollectiveSpinSystem, Magnetization};

    /// Largest atom number offered for the stationary curve; the dense
    /// solve must stay interactive.
    pub const MAX_STATIONARY_N: usize = 60;
    /// Cap on returned samples per series.
    pub const MAX_SAMPLES: usize = 4000;

    fn stride(steps: usize) -> usize {
        steps.div_ceil(MAX_SAMPLES).max(1)
    }

    /// `[t0, m_y0, t1, m_y1, ...]` of the noisy phase model with `kappa = 1`.
    pub fn phase_path(n: usize, omega: f64, phi0: f64, t_final: f64, dt: f64, seed: u64) -> Result<Vec<f64>, String> {
        let path = simulate_phase(phi0, Some(n), omega, 1.0, t_final, dt, seed).map_err(|e| e.to_string())?;
        let every = stride(path.times.len());
        Ok(path
            .times
            .iter()
            .zip(&path.phi)
            .step_by(every)
            .flat_map(|(t, p)| [*t, p.sin()])
            .collect())
    }

    /// `[x0, y0, z0, x1, ...]` of the mean-field flow from the unit-sphere
    /// point at polar angle `theta` and azimuth `phi`.
    pub fn mean_field_orbit(theta: f64, phi: f64, omega: f64, t_final: f64) -> Result<Vec<f64>, String> {
        let m0 = Magnetization::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos());
        let path = integrate_mf(m0, omega, 1.0, t_final, 1e-3).map_err(|e| e.to_string())?;
        let every = stride(path.points.len());
        Ok(path.points.iter().step_by(every).flat_map(|m| m.as_array()).collect())
    }

    /// `[w0, m_z0, w1, m_z1, ...]` of the stationary state for `points`
    /// drive values evenly spaced in `[0, omega_max]`.
    pub fn stationary_curve(n: usize, omega_max: f64, points: usize) -> Result<Vec<f64>, String> {
        if n > MAX_STATIONARY_N {
            return Err(format!("N is limited to {MAX_STATIONARY_N} in the browser"));
        }
        if points < 2 || !(omega_max > 0.0) {
            return Err("need at least two points and a positive range".into());
        }
        let mut out = Vec::with_capacity(2 * points);
        for i in 0..points {
            let w = omega_max * i as f64 / (points - 1) as f64;
            let sys = CollectiveSpinSystem::new(n, w, 1.0).map_err(|e| e.to_string())?;
            let rho = stationary_state(&sys).map_err(|e| e.to_string())?;
            let m = magnetization_of_density(&sys, rho.matrix()).map_err(|e| e.to_string())?;
            out.extend([w, m.z]);
        }
        Ok(out)
    }
}

#[wasm_bindgen(js_name = phasePath)]
pub fn phase_path(n: usize, omega: f64, phi0: f64, t_final: f64, dt: f64, seed: u32) -> Result<Vec<f64>, JsError> {
    demo::phase_path(n, omega, phi0, t_final, dt, seed as u64).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = meanFieldOrbit)]
pub fn mean_field_orbit(theta: f64, phi: f64, omega: f64, t_final: f64) -> Result<Vec<f64>, JsError> {
    demo::mean_field_orbit(theta, phi, omega, t_final).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = stationaryCurve)]
pub fn stationary_curve(n: usize, omega_max: f64, points: usize) -> Result<Vec<f64>, JsError> {
    demo::stationary_curve(n, omega_max, points).map_err(|e| JsError::new(&e))
}
