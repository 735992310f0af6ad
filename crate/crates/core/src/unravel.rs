//! Quantum-jump and homodyne unravelings of the collective-decay master
//! equation, ensemble averages, and the counting/current signal conventions.
//!
//! Both schemes monitor the single collective channel `sqrt(2k/N) J-`. The
//! homodyne stepper is generic over [`MonitoredSystem`], so the same code
//! integrates the Doob-transformed dynamics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm, trace_distance, CMatrix, C64, ZERO};
use crate::parallel::map_indexed;
use crate::spinops::{magnetization_unchecked, CollectiveOps, CollectiveSpinSystem, Magnetization, QuantumState};

/// Largest per-step jump probability tolerated by the first-order scheme.
pub const MAX_JUMP_PROBABILITY: f64 = 0.1;
/// Largest one-step norm drift tolerated by the homodyne scheme.
pub const MAX_NORM_DRIFT: f64 = 1e-3;
/// Default spacing of recorded magnetizations.
pub const DEFAULT_OUTPUT_INTERVAL: f64 = 0.01;
/// Number of batches for ensemble error estimates.
pub const ENSEMBLE_BATCHES: usize = 20;

/// A system with Hamiltonian `H` monitored through one channel `sqrt(gamma) c`.
pub trait MonitoredSystem: Sync {
    fn dim(&self) -> usize;
    /// `gamma` in `D[rho] = gamma (c rho c^+ - {c^+ c, rho}/2)`.
    fn gamma(&self) -> f64;
    fn apply_hamiltonian(&self, x: &[C64], y: &mut [C64]);
    fn apply_jump(&self, x: &[C64], y: &mut [C64]);
    fn apply_jump_dag_jump(&self, x: &[C64], y: &mut [C64]);
    /// Collective operators for recording the magnetization.
    fn collective(&self) -> &CollectiveOps;
}

impl MonitoredSystem for CollectiveSpinSystem {
    fn dim(&self) -> usize {
        self.n + 1
    }

    fn gamma(&self) -> f64 {
        2.0 * self.kappa / self.n as f64
    }

    fn apply_hamiltonian(&self, x: &[C64], y: &mut [C64]) {
        // w Jx = w (J+ + J-)/2, unrolled on the tridiagonal structure
        let c = self.ops.ladder();
        let h = 0.5 * self.omega;
        let n = self.n;
        for k in 0..=n {
            let mut acc = ZERO;
            if k > 0 {
                acc += x[k - 1] * c[k - 1];
            }
            if k < n {
                acc += x[k + 1] * c[k];
            }
            y[k] = acc * h;
        }
    }

    fn apply_jump(&self, x: &[C64], y: &mut [C64]) {
        self.ops.lower(x, y);
    }

    fn apply_jump_dag_jump(&self, x: &[C64], y: &mut [C64]) {
        for ((yk, xk), c) in y.iter_mut().zip(x).zip(self.ops.ladder()) {
            *yk = xk * (c * c);
        }
    }

    fn collective(&self) -> &CollectiveOps {
        &self.ops
    }
}

fn check_initial(dim: usize, psi0: &QuantumState) -> Result<()> {
    if psi0.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: psi0.dim(),
        });
    }
    let nrm = psi0.norm();
    if (nrm - 1.0).abs() > 1e-10 {
        return Err(Error::NotNormalized(nrm));
    }
    Ok(())
}

fn normalize(x: &mut [C64]) {
    let nrm = norm(x);
    x.iter_mut().for_each(|a| *a /= nrm);
}

/// How [`JumpStepper`] decides when a jump happens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JumpMethod {
    /// Jump with probability `dt (2k/N) <J+J->` per step, timed at the end
    /// of the step. Bias O(dt).
    Bernoulli,
    /// Jump when the accumulated no-jump survival probability falls below a
    /// uniform draw, with the jump time located inside the step.
    #[default]
    WaitingTime,
}

impl std::str::FromStr for JumpMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bernoulli" => Ok(Self::Bernoulli),
            "waiting-time" => Ok(Self::WaitingTime),
            other => Err(Error::InvalidInput(format!("unknown jump method '{other}'"))),
        }
    }
}

/// Quantum-jump integrator: RK4 on the no-jump evolution under
/// `H_eff = w Jx - i (k/N) J+J-` with renormalization, plus jumps `J-`.
pub struct JumpStepper<'a> {
    sys: &'a CollectiveSpinSystem,
    method: JumpMethod,
    psi: Vec<C64>,
    dt: f64,
    steps: u64,
    rng: ChaCha8Rng,
    /// Waiting-time method: survival probability since the last jump and the
    /// level at which the next jump fires.
    survival: f64,
    target: f64,
    jumps: Vec<f64>,
    k: [Vec<C64>; 4],
    tmp: Vec<C64>,
    work: Vec<C64>,
    start: Vec<C64>,
}

impl<'a> JumpStepper<'a> {
    pub fn new(sys: &'a CollectiveSpinSystem, psi0: &QuantumState, dt: f64, seed: u64) -> Result<Self> {
        Self::with_method(sys, psi0, dt, seed, JumpMethod::default())
    }

    pub fn with_method(
        sys: &'a CollectiveSpinSystem,
        psi0: &QuantumState,
        dt: f64,
        seed: u64,
        method: JumpMethod,
    ) -> Result<Self> {
        check_initial(sys.dim(), psi0)?;
        if !(dt > 0.0) {
            return Err(Error::InvalidInput("dt must be positive".into()));
        }
        let d = sys.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let target = match method {
            JumpMethod::Bernoulli => 0.0,
            JumpMethod::WaitingTime => rng.random(),
        };
        Ok(Self {
            sys,
            method,
            psi: psi0.amplitudes.clone(),
            dt,
            steps: 0,
            rng,
            survival: 1.0,
            target,
            jumps: Vec::new(),
            k: [vec![ZERO; d], vec![ZERO; d], vec![ZERO; d], vec![ZERO; d]],
            tmp: vec![ZERO; d],
            work: vec![ZERO; d],
            start: vec![ZERO; d],
        })
    }

    pub fn state(&self) -> &[C64] {
        &self.psi
    }

    pub fn time(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    pub fn magnetization(&self) -> Magnetization {
        magnetization_unchecked(&self.sys.ops, &self.psi)
    }

    /// `y = -i H_eff x` with `H_eff = w Jx - i (k/N) J+J-`.
    fn no_jump_rhs(sys: &CollectiveSpinSystem, x: &[C64], y: &mut [C64], work: &mut [C64]) {
        sys.apply_hamiltonian(x, y);
        sys.apply_jump_dag_jump(x, work);
        let r = sys.rate();
        for (yk, wk) in y.iter_mut().zip(work.iter()) {
            *yk = C64::new(yk.im, -yk.re) - wk * r;
        }
    }

    /// One unnormalized RK4 step of length `h` from `self.psi`; returns the
    /// squared norm of the result (the no-jump probability).
    fn rk4(&mut self, h: f64) -> f64 {
        let sys = self.sys;
        let [k1, k2, k3, k4] = &mut self.k;
        Self::no_jump_rhs(sys, &self.psi, k1, &mut self.work);
        for ((t, x), k) in self.tmp.iter_mut().zip(&self.psi).zip(k1.iter()) {
            *t = x + k * (0.5 * h);
        }
        Self::no_jump_rhs(sys, &self.tmp, k2, &mut self.work);
        for ((t, x), k) in self.tmp.iter_mut().zip(&self.psi).zip(k2.iter()) {
            *t = x + k * (0.5 * h);
        }
        Self::no_jump_rhs(sys, &self.tmp, k3, &mut self.work);
        for ((t, x), k) in self.tmp.iter_mut().zip(&self.psi).zip(k3.iter()) {
            *t = x + k * h;
        }
        Self::no_jump_rhs(sys, &self.tmp, k4, &mut self.work);
        for i in 0..self.psi.len() {
            self.psi[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (h / 6.0);
        }
        self.psi.iter().map(|a| a.norm_sqr()).sum()
    }

    fn apply_jump(&mut self) {
        self.sys.ops.lower(&self.psi, &mut self.tmp);
        std::mem::swap(&mut self.psi, &mut self.tmp);
        normalize(&mut self.psi);
    }

    fn check_decay(&self, no_jump: f64) -> Result<()> {
        if 1.0 - no_jump > MAX_JUMP_PROBABILITY {
            return Err(Error::StepTooLarge(format!(
                "jump probability {:.3} per step exceeds {MAX_JUMP_PROBABILITY}",
                1.0 - no_jump
            )));
        }
        Ok(())
    }

    /// Advances one step; returns the jump times inside it.
    pub fn step(&mut self) -> Result<&[f64]> {
        self.jumps.clear();
        match self.method {
            JumpMethod::Bernoulli => self.step_bernoulli()?,
            JumpMethod::WaitingTime => self.step_waiting_time()?,
        }
        self.steps += 1;
        Ok(&self.jumps)
    }

    fn step_bernoulli(&mut self) -> Result<()> {
        let p = self.dt * self.sys.gamma() * self.sys.ops.expect_jpjm(&self.psi);
        if p > MAX_JUMP_PROBABILITY {
            return Err(Error::StepTooLarge(format!(
                "jump probability {p:.3} per step exceeds {MAX_JUMP_PROBABILITY}"
            )));
        }
        let u: f64 = self.rng.random();
        if u < p {
            self.apply_jump();
            self.jumps.push((self.steps + 1) as f64 * self.dt);
            return Ok(());
        }
        self.rk4(self.dt);
        normalize(&mut self.psi);
        Ok(())
    }

    fn step_waiting_time(&mut self) -> Result<()> {
        let t0 = self.steps as f64 * self.dt;
        let mut elapsed = 0.0;
        while elapsed < self.dt {
            let h = self.dt - elapsed;
            self.start.copy_from_slice(&self.psi);
            let q = self.rk4(h);
            self.check_decay(q)?;
            let after = self.survival * q;
            if after > self.target {
                self.survival = after;
                normalize(&mut self.psi);
                return Ok(());
            }
            // locate the crossing assuming exponential decay within the step
            let frac = ((self.survival / self.target).ln() / (1.0 / q).ln()).clamp(0.0, 1.0);
            let hit = frac * h;
            self.psi.copy_from_slice(&self.start);
            if hit > 0.0 {
                self.rk4(hit);
            }
            self.apply_jump();
            elapsed += hit;
            self.jumps.push(t0 + elapsed);
            self.survival = 1.0;
            self.target = self.rng.random();
        }
        Ok(())
    }
}

/// Euler-Maruyama integrator of the normalized homodyne (x-quadrature)
/// stochastic Schrodinger equation
///
/// ```text
/// dpsi = [-i H - (g/2)(c^+c - x c + x^2/4)] psi dt + sqrt(g) (c - x/2) psi dW
/// ```
///
/// with `x = <c + c^+>`, followed by explicit renormalization.
pub struct HomodyneStepper<'a, M: MonitoredSystem> {
    model: &'a M,
    psi: Vec<C64>,
    dt: f64,
    steps: u64,
    rng: ChaCha8Rng,
    c_psi: Vec<C64>,
    cdc_psi: Vec<C64>,
    h_psi: Vec<C64>,
    next: Vec<C64>,
}

impl<'a, M: MonitoredSystem> HomodyneStepper<'a, M> {
    pub fn new(model: &'a M, psi0: &QuantumState, dt: f64, seed: u64) -> Result<Self> {
        check_initial(model.dim(), psi0)?;
        if !(dt > 0.0) {
            return Err(Error::InvalidInput("dt must be positive".into()));
        }
        let d = model.dim();
        Ok(Self {
            model,
            psi: psi0.amplitudes.clone(),
            dt,
            steps: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
            c_psi: vec![ZERO; d],
            cdc_psi: vec![ZERO; d],
            h_psi: vec![ZERO; d],
            next: vec![ZERO; d],
        })
    }

    pub fn state(&self) -> &[C64] {
        &self.psi
    }

    pub fn time(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    pub fn magnetization(&self) -> Magnetization {
        magnetization_unchecked(self.model.collective(), &self.psi)
    }

    /// `<c + c^+>` in the current state.
    pub fn quadrature(&mut self) -> f64 {
        self.model.apply_jump(&self.psi, &mut self.c_psi);
        2.0 * dot(&self.psi, &self.c_psi).re
    }

    /// Advances one step and returns the current sample
    /// `sqrt(gamma) <c + c^+> + dW/dt` over that step.
    pub fn step(&mut self) -> Result<f64> {
        let g = self.model.gamma();
        let sg = g.sqrt();
        let dt = self.dt;
        self.model.apply_jump(&self.psi, &mut self.c_psi);
        self.model.apply_jump_dag_jump(&self.psi, &mut self.cdc_psi);
        self.model.apply_hamiltonian(&self.psi, &mut self.h_psi);
        let x = 2.0 * dot(&self.psi, &self.c_psi).re;
        let normal: f64 = StandardNormal.sample(&mut self.rng);
        let dw = dt.sqrt() * normal;

        let mut re_overlap = 0.0;
        let mut delta_sq = 0.0;
        let mut b_sq = 0.0;
        for i in 0..self.psi.len() {
            let p = self.psi[i];
            let hp = self.h_psi[i];
            let drift = C64::new(hp.im, -hp.re)
                - (self.cdc_psi[i] - self.c_psi[i] * x + p * (0.25 * x * x)) * (0.5 * g);
            let diffusion = (self.c_psi[i] - p * (0.5 * x)) * sg;
            let delta = drift * dt + diffusion * dw;
            re_overlap += (p.conj() * delta).re;
            delta_sq += delta.norm_sqr();
            b_sq += diffusion.norm_sqr();
            self.next[i] = p + delta;
        }
        // the (dW^2 - dt) |B psi|^2 part of the norm change is a zero-mean
        // martingale and vanishes under renormalization in the Ito limit
        let drift_excess = (2.0 * re_overlap + delta_sq - (dw * dw - dt) * b_sq).abs();
        if drift_excess > MAX_NORM_DRIFT || !drift_excess.is_finite() {
            return Err(Error::StepTooLarge(format!(
                "norm drift {drift_excess:.3e} in one step exceeds {MAX_NORM_DRIFT}"
            )));
        }
        std::mem::swap(&mut self.psi, &mut self.next);
        normalize(&mut self.psi);
        self.steps += 1;
        Ok(sg * x + dw / dt)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Jump,
    Homodyne,
    Doob,
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scheme::Jump => "jump",
            Scheme::Homodyne => "homodyne",
            Scheme::Doob => "doob",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryParams {
    #[serde(rename = "N")]
    pub n: usize,
    pub omega: f64,
    pub kappa: f64,
    pub dt: f64,
    pub t_final: f64,
    pub output_interval: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecordOptions {
    pub output_interval: f64,
    /// Keep the per-step homodyne current.
    pub record_current: bool,
    pub jump_method: JumpMethod,
}

impl Default for RecordOptions {
    fn default() -> Self {
        Self {
            output_interval: DEFAULT_OUTPUT_INTERVAL,
            record_current: true,
            jump_method: JumpMethod::WaitingTime,
        }
    }
}

/// Conditioned observables of one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub scheme: Scheme,
    pub params: TrajectoryParams,
    pub seed: u64,
    /// Output grid for `magnetizations`.
    pub times: Vec<f64>,
    pub magnetizations: Vec<Magnetization>,
    /// Jump scheme only.
    pub jump_times: Vec<f64>,
    /// Homodyne schemes: one sample per integration step.
    pub raw_current: Vec<f64>,
    /// Doob scheme: `<c + c^+>/N` of the transformed channel on the output grid.
    pub tilted_quadrature: Vec<f64>,
}

impl TrajectoryRecord {
    pub fn series(&self, component: usize) -> Vec<f64> {
        self.magnetizations.iter().map(|m| m.as_array()[component]).collect()
    }
}

fn grid(t_final: f64, dt: f64, output_interval: f64) -> Result<(usize, usize)> {
    if !(dt > 0.0 && t_final >= 0.0 && output_interval > 0.0) {
        return Err(Error::InvalidInput("dt, output interval must be positive and T >= 0".into()));
    }
    let steps = (t_final / dt).round() as usize;
    let every = ((output_interval / dt).round() as usize).max(1);
    Ok((steps, every))
}

/// Quantum-jump trajectory with magnetizations on the output grid.
pub fn jump_trajectory(
    sys: &CollectiveSpinSystem,
    psi0: &QuantumState,
    t_final: f64,
    dt: f64,
    seed: u64,
    options: RecordOptions,
) -> Result<TrajectoryRecord> {
    let (steps, every) = grid(t_final, dt, options.output_interval)?;
    let mut stepper = JumpStepper::with_method(sys, psi0, dt, seed, options.jump_method)?;
    let mut rec = TrajectoryRecord {
        scheme: Scheme::Jump,
        params: TrajectoryParams {
            n: sys.n,
            omega: sys.omega,
            kappa: sys.kappa,
            dt,
            t_final,
            output_interval: every as f64 * dt,
            s: None,
        },
        seed,
        times: vec![0.0],
        magnetizations: vec![stepper.magnetization()],
        jump_times: Vec::new(),
        raw_current: Vec::new(),
        tilted_quadrature: Vec::new(),
    };
    for step in 1..=steps {
        rec.jump_times.extend_from_slice(stepper.step()?);
        if step % every == 0 {
            rec.times.push(step as f64 * dt);
            rec.magnetizations.push(stepper.magnetization());
        }
    }
    Ok(rec)
}

pub(crate) fn homodyne_record<M: MonitoredSystem>(
    model: &M,
    scheme: Scheme,
    params: TrajectoryParams,
    psi0: &QuantumState,
    seed: u64,
    options: RecordOptions,
    quadrature_scale: Option<f64>,
) -> Result<TrajectoryRecord> {
    let (steps, every) = grid(params.t_final, params.dt, options.output_interval)?;
    let mut stepper = HomodyneStepper::new(model, psi0, params.dt, seed)?;
    let mut rec = TrajectoryRecord {
        scheme,
        params: TrajectoryParams {
            output_interval: every as f64 * params.dt,
            ..params
        },
        seed,
        times: vec![0.0],
        magnetizations: vec![stepper.magnetization()],
        jump_times: Vec::new(),
        raw_current: Vec::with_capacity(if options.record_current { steps } else { 0 }),
        tilted_quadrature: Vec::new(),
    };
    if let Some(scale) = quadrature_scale {
        rec.tilted_quadrature.push(stepper.quadrature() * scale);
    }
    for step in 1..=steps {
        let sample = stepper.step()?;
        if options.record_current {
            rec.raw_current.push(sample);
        }
        if step % every == 0 {
            rec.times.push(step as f64 * params.dt);
            rec.magnetizations.push(stepper.magnetization());
            if let Some(scale) = quadrature_scale {
                rec.tilted_quadrature.push(stepper.quadrature() * scale);
            }
        }
    }
    Ok(rec)
}

/// Homodyne trajectory of the x quadrature `J+ + J-`.
pub fn homodyne_trajectory(
    sys: &CollectiveSpinSystem,
    psi0: &QuantumState,
    t_final: f64,
    dt: f64,
    seed: u64,
    options: RecordOptions,
) -> Result<TrajectoryRecord> {
    let params = TrajectoryParams {
        n: sys.n,
        omega: sys.omega,
        kappa: sys.kappa,
        dt,
        t_final,
        output_interval: options.output_interval,
        s: None,
    };
    homodyne_record(sys, Scheme::Homodyne, params, psi0, seed, options, None)
}

/// Ensemble-averaged conditioned density matrices with a batch-means error
/// estimate.
#[derive(Debug, Clone)]
pub struct EnsembleDensity {
    pub times: Vec<f64>,
    pub mean: Vec<CMatrix>,
    /// Batch-means estimate of the trace-distance error of `mean`.
    pub standard_error: Vec<f64>,
    pub trajectories: usize,
}

/// Averages `|psi><psi|` over `trajectories` runs (seeds `master_seed + i`)
/// at the given checkpoint times.
pub fn ensemble_density(
    sys: &CollectiveSpinSystem,
    psi0: &QuantumState,
    scheme: Scheme,
    checkpoints: &[f64],
    trajectories: usize,
    dt: f64,
    master_seed: u64,
) -> Result<EnsembleDensity> {
    ensemble_density_with(sys, psi0, scheme, JumpMethod::default(), checkpoints, trajectories, dt, master_seed)
}

/// [`ensemble_density`] with an explicit jump method.
#[allow(clippy::too_many_arguments)]
pub fn ensemble_density_with(
    sys: &CollectiveSpinSystem,
    psi0: &QuantumState,
    scheme: Scheme,
    method: JumpMethod,
    checkpoints: &[f64],
    trajectories: usize,
    dt: f64,
    master_seed: u64,
) -> Result<EnsembleDensity> {
    if trajectories < 2 {
        return Err(Error::InvalidInput("need at least two trajectories".into()));
    }
    let marks: Vec<usize> = checkpoints.iter().map(|t| (t / dt).round() as usize).collect();
    if marks.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidInput("checkpoints must be sorted".into()));
    }
    let last = marks.last().copied().unwrap_or(0);
    let d = sys.dim();
    let runs: Vec<Result<Vec<CMatrix>>> = map_indexed(trajectories, |i| {
        let seed = master_seed.wrapping_add(i as u64);
        let mut out = Vec::with_capacity(marks.len());
        let outer = |psi: &[C64]| {
            let v = crate::linalg::CVector::from_column_slice(psi);
            &v * v.adjoint()
        };
        let mut next = 0;
        match scheme {
            Scheme::Jump => {
                let mut st = JumpStepper::with_method(sys, psi0, dt, seed, method)?;
                for step in 0..=last {
                    if step > 0 {
                        st.step()?;
                    }
                    while next < marks.len() && marks[next] == step {
                        out.push(outer(st.state()));
                        next += 1;
                    }
                }
            }
            Scheme::Homodyne => {
                let mut st = HomodyneStepper::new(sys, psi0, dt, seed)?;
                for step in 0..=last {
                    if step > 0 {
                        st.step()?;
                    }
                    while next < marks.len() && marks[next] == step {
                        out.push(outer(st.state()));
                        next += 1;
                    }
                }
            }
            Scheme::Doob => {
                return Err(Error::InvalidInput("Doob ensembles are built in largedev".into()));
            }
        }
        Ok(out)
    });
    let batches = ENSEMBLE_BATCHES.min(trajectories);
    let mut batch_sums = vec![vec![CMatrix::zeros(d, d); marks.len()]; batches];
    let mut batch_sizes = vec![0usize; batches];
    for (i, run) in runs.into_iter().enumerate() {
        let b = i * batches / trajectories;
        batch_sizes[b] += 1;
        for (acc, m) in batch_sums[b].iter_mut().zip(run?) {
            *acc += m;
        }
    }
    let mut mean = Vec::with_capacity(marks.len());
    let mut standard_error = Vec::with_capacity(marks.len());
    for j in 0..marks.len() {
        let total = batch_sums
            .iter()
            .fold(CMatrix::zeros(d, d), |acc, b| acc + &b[j])
            / C64::new(trajectories as f64, 0.0);
        // rho_b - rho has covariance (B - 1) times that of the full mean
        let spread: f64 = batch_sums
            .iter()
            .zip(&batch_sizes)
            .map(|(b, &size)| trace_distance(&(&b[j] / C64::new(size as f64, 0.0)), &total).powi(2))
            .sum();
        standard_error.push((spread / (batches * (batches - 1)) as f64).sqrt());
        mean.push(total);
    }
    Ok(EnsembleDensity {
        times: marks.iter().map(|&m| m as f64 * dt).collect(),
        mean,
        standard_error,
        trajectories,
    })
}

/// Mean photon rate `(2k/N) Tr[J+J- rho]`.
pub fn jump_rate(sys: &CollectiveSpinSystem, rho: &CMatrix) -> f64 {
    let c = sys.ops.ladder();
    sys.gamma() * (0..sys.dim()).map(|k| rho[(k, k)].re * c[k] * c[k]).sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BinMode {
    /// Adjacent non-overlapping windows.
    Tumbling,
    /// Windows centred on a grid with the given spacing.
    Sliding { step: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinnedSignal {
    pub window: f64,
    pub centers: Vec<f64>,
    pub values: Vec<f64>,
}

impl BinnedSignal {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn spacing(&self) -> Option<f64> {
        (self.centers.len() >= 2).then(|| self.centers[1] - self.centers[0])
    }
}

/// Counts jump times per window over `[0, t_final]`.
pub fn bin_counts(jump_times: &[f64], t_final: f64, window: f64, mode: BinMode) -> Result<BinnedSignal> {
    if !(window > 0.0) {
        return Err(Error::InvalidInput("window must be positive".into()));
    }
    let count_below = |t: f64| jump_times.partition_point(|&x| x < t);
    let (centers, values) = match mode {
        BinMode::Tumbling => {
            let bins = (t_final / window).floor() as usize;
            (0..bins)
                .map(|k| {
                    let lo = k as f64 * window;
                    let c = (count_below(lo + window) - count_below(lo)) as f64;
                    (lo + 0.5 * window, c)
                })
                .unzip()
        }
        BinMode::Sliding { step } => {
            if !(step > 0.0) {
                return Err(Error::InvalidInput("sliding step must be positive".into()));
            }
            let samples = ((t_final - window) / step).floor();
            let samples = if samples >= 0.0 { samples as usize + 1 } else { 0 };
            (0..samples)
                .map(|k| {
                    let lo = k as f64 * step;
                    let c = (count_below(lo + window) - count_below(lo)) as f64;
                    (lo + 0.5 * window, c)
                })
                .unzip()
        }
    };
    Ok(BinnedSignal {
        window,
        centers,
        values,
    })
}

/// Moving average of the raw homodyne current over `window`, scaled by
/// `1/sqrt(2N)`, sampled every `stride` integration steps.
pub fn smooth_current(raw_current: &[f64], dt: f64, window: f64, atoms: usize, stride: usize) -> Result<BinnedSignal> {
    let w = (window / dt).round() as usize;
    if w < 10 {
        return Err(Error::InvalidInput(format!("window spans {w} samples, need at least 10")));
    }
    if atoms == 0 || stride == 0 {
        return Err(Error::InvalidInput("atoms and stride must be positive".into()));
    }
    let scale = 1.0 / ((2 * atoms) as f64).sqrt() / w as f64;
    let mut prefix = Vec::with_capacity(raw_current.len() + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for x in raw_current {
        acc += x;
        prefix.push(acc);
    }
    let mut centers = Vec::new();
    let mut values = Vec::new();
    let mut start = 0;
    while start + w <= raw_current.len() {
        centers.push((start as f64 + 0.5 * w as f64) * dt);
        values.push((prefix[start + w] - prefix[start]) * scale);
        start += stride;
    }
    Ok(BinnedSignal {
        window: w as f64 * dt,
        centers,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tumbling_counts() {
        let b = bin_counts(&[0.1, 0.2, 0.3], 2.0, 0.5, BinMode::Tumbling).unwrap();
        assert_eq!(b.values, vec![3.0, 0.0, 0.0, 0.0]);
        let empty = bin_counts(&[], 2.0, 0.5, BinMode::Sliding { step: 0.1 }).unwrap();
        assert!(empty.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn sliding_counts() {
        let b = bin_counts(&[0.1, 0.55], 1.0, 0.5, BinMode::Sliding { step: 0.25 }).unwrap();
        // windows [0,.5) [.25,.75) [.5,1)
        assert_eq!(b.values, vec![1.0, 1.0, 1.0]);
        assert_eq!(b.centers, vec![0.25, 0.5, 0.75]);
    }

    #[test]
    fn smoothing_constant() {
        let raw = vec![3.0; 1000];
        let s = smooth_current(&raw, 1e-3, 0.5, 8, 50).unwrap();
        for v in &s.values {
            assert!((v - 3.0 / 4.0).abs() < 1e-12);
        }
        assert!(smooth_current(&raw, 0.1, 0.5, 8, 1).is_err());
    }
}
