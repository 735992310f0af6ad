//! Mean-field dynamics of the magnetization and the noisy phase model.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spinops::Magnetization;

pub type MagnetizationPoint = Magnetization;

/// Largest `dt * kappa` accepted by [`integrate_mf`].
pub const MAX_MF_STEP: f64 = 1e-2;

/// `dm/dt = (k m_x m_z, -w m_z + k m_y m_z, w m_y - k (m_x^2 + m_y^2))`.
pub fn mf_rhs(m: MagnetizationPoint, omega: f64, kappa: f64) -> MagnetizationPoint {
    Magnetization::new(
        kappa * m.x * m.z,
        -omega * m.z + kappa * m.y * m.z,
        omega * m.y - kappa * (m.x * m.x + m.y * m.y),
    )
}

/// `M = m_x / (m_y - w/k)`, undefined within `1e-6` of the singular line.
pub fn conserved_ratio(m: MagnetizationPoint, omega: f64, kappa: f64) -> Option<f64> {
    let den = m.y - omega / kappa;
    (den.abs() > 1e-6).then(|| m.x / den)
}

/// Stable fixed point `(0, w/k, -sqrt(1 - (w/k)^2))` below threshold.
pub fn mf_fixed_point(omega: f64, kappa: f64) -> Option<MagnetizationPoint> {
    let r = omega / kappa;
    (r <= 1.0).then(|| Magnetization::new(0.0, r, -(1.0 - r * r).sqrt()))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeanFieldPath {
    pub times: Vec<f64>,
    pub points: Vec<MagnetizationPoint>,
}

fn axpy(a: MagnetizationPoint, h: f64, b: MagnetizationPoint) -> MagnetizationPoint {
    Magnetization::new(a.x + h * b.x, a.y + h * b.y, a.z + h * b.z)
}

/// Classical RK4 integration, every step stored.
pub fn integrate_mf(
    m0: MagnetizationPoint,
    omega: f64,
    kappa: f64,
    t_final: f64,
    dt: f64,
) -> Result<MeanFieldPath> {
    if !(dt > 0.0 && t_final >= 0.0) {
        return Err(Error::InvalidInput("dt must be positive and T non-negative".into()));
    }
    if dt * kappa > MAX_MF_STEP * (1.0 + 1e-12) {
        return Err(Error::StepTooLarge(format!("dt*kappa = {} exceeds {MAX_MF_STEP}", dt * kappa)));
    }
    let steps = (t_final / dt).round() as usize;
    let mut path = MeanFieldPath {
        times: Vec::with_capacity(steps + 1),
        points: Vec::with_capacity(steps + 1),
    };
    let f = |m| mf_rhs(m, omega, kappa);
    let mut m = m0;
    path.times.push(0.0);
    path.points.push(m);
    for step in 1..=steps {
        let k1 = f(m);
        let k2 = f(axpy(m, dt / 2.0, k1));
        let k3 = f(axpy(m, dt / 2.0, k2));
        let k4 = f(axpy(m, dt, k3));
        m = Magnetization::new(
            m.x + dt / 6.0 * (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x),
            m.y + dt / 6.0 * (k1.y + 2.0 * k2.y + 2.0 * k3.y + k4.y),
            m.z + dt / 6.0 * (k1.z + 2.0 * k2.z + 2.0 * k3.z + k4.z),
        );
        path.times.push(step as f64 * dt);
        path.points.push(m);
    }
    Ok(path)
}

/// Oscillation frequency `sqrt(w^2 - k^2)` above threshold.
pub fn limit_cycle_frequency(omega: f64, kappa: f64) -> Result<f64> {
    if omega <= kappa {
        return Err(Error::InvalidInput(format!(
            "no oscillation for omega/kappa = {} <= 1",
            omega / kappa
        )));
    }
    Ok((omega * omega - kappa * kappa).sqrt())
}

/// Closed-form orbit in the `m_x = 0` sector above threshold.
///
/// ```text
/// m_y(t) = r + (r^2 - 1) / (cos(W t - p) - r)
/// m_z(t) = W sin(W t - p) / (k cos(W t - p) - w)
/// ```
///
/// with `r = w/k`, `W = sqrt(w^2 - k^2)` and the phase `p` fixed by the
/// initial point.
pub fn mf_analytic(m0_y: f64, m0_z: f64, omega: f64, kappa: f64, t: f64) -> Result<(f64, f64)> {
    let big_omega = limit_cycle_frequency(omega, kappa)?;
    if ((m0_y * m0_y + m0_z * m0_z) - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidInput("initial point must lie on the unit circle".into()));
    }
    let r = omega / kappa;
    let sin_p = big_omega * m0_z / (omega - kappa * m0_y);
    let cos_p = (1.0 - r * m0_y) / (r - m0_y);
    let phase = sin_p.atan2(cos_p);
    let arg = big_omega * t - phase;
    let (s, c) = arg.sin_cos();
    let m_y = r + (r * r - 1.0) / (c - r);
    let m_z = big_omega * s / (kappa * c - omega);
    Ok((m_y, m_z))
}

/// `(m_y, m_z) = (sin phi, cos phi)`.
pub fn phase_to_magnetization(phi: f64) -> (f64, f64) {
    phi.sin_cos()
}

/// Fixed points of `dphi/dt = -w + k sin(phi)` in `[0, 2 pi)`.
pub fn phase_fixed_points(omega: f64, kappa: f64) -> Vec<f64> {
    let r = omega / kappa;
    if r > 1.0 {
        Vec::new()
    } else if r == 1.0 {
        vec![std::f64::consts::FRAC_PI_2]
    } else {
        let a = r.asin();
        let mut v = vec![a.rem_euclid(2.0 * std::f64::consts::PI), std::f64::consts::PI - a];
        v.sort_by(f64::total_cmp);
        v
    }
}

/// Euler-Maruyama stepper for `dphi = (-w + k sin(phi)) dt + sqrt(2 dt/N) g`.
///
/// `atoms = None` switches the noise off.
#[derive(Debug, Clone)]
pub struct PhaseStepper {
    phi: f64,
    omega: f64,
    kappa: f64,
    dt: f64,
    noise: f64,
    rng: ChaCha8Rng,
}

impl PhaseStepper {
    pub fn new(phi0: f64, atoms: Option<usize>, omega: f64, kappa: f64, dt: f64, seed: u64) -> Self {
        let noise = atoms.map_or(0.0, |n| (2.0 * dt / n as f64).sqrt());
        Self {
            phi: phi0,
            omega,
            kappa,
            dt,
            noise,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    #[inline]
    pub fn step(&mut self) -> f64 {
        let drift = (-self.omega + self.kappa * self.phi.sin()) * self.dt;
        let kick = if self.noise > 0.0 {
            let g: f64 = StandardNormal.sample(&mut self.rng);
            self.noise * g
        } else {
            0.0
        };
        self.phi += drift + kick;
        self.phi
    }
}

/// Unwrapped phase path on a uniform grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhasePath {
    pub times: Vec<f64>,
    pub phi: Vec<f64>,
    /// Noise strength; `None` for the noiseless flow.
    pub atoms: Option<usize>,
    pub seed: u64,
}

impl PhasePath {
    pub fn m_y(&self) -> Vec<f64> {
        self.phi.iter().map(|p| p.sin()).collect()
    }
}

/// Integrates the phase model, storing every step.
pub fn simulate_phase(
    phi0: f64,
    atoms: Option<usize>,
    omega: f64,
    kappa: f64,
    t_final: f64,
    dt: f64,
    seed: u64,
) -> Result<PhasePath> {
    if !(dt > 0.0 && t_final >= 0.0) {
        return Err(Error::InvalidInput("dt must be positive and T non-negative".into()));
    }
    if atoms == Some(0) {
        return Err(Error::InvalidInput("atom number must be positive".into()));
    }
    let steps = (t_final / dt).round() as usize;
    let mut stepper = PhaseStepper::new(phi0, atoms, omega, kappa, dt, seed);
    let mut times = Vec::with_capacity(steps + 1);
    let mut phi = Vec::with_capacity(steps + 1);
    times.push(0.0);
    phi.push(phi0);
    for k in 1..=steps {
        times.push(k as f64 * dt);
        phi.push(stepper.step());
    }
    Ok(PhasePath {
        times,
        phi,
        atoms,
        seed,
    })
}
