//! Post-processing of trajectories: large-fluctuation events and their
//! waiting-time scaling, spectra of the counting signal, and sign-dwell
//! statistics.

use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::parallel::map_indexed;
use crate::semiclassical::{limit_cycle_frequency, PhaseStepper};
use crate::spinops::{spin_coherent_state, CollectiveSpinSystem};
use crate::unravel::{BinnedSignal, JumpMethod, JumpStepper, DEFAULT_OUTPUT_INTERVAL};

pub const EVENT_THRESHOLD: f64 = 0.8;
pub const REARM_LEVEL: f64 = 0.9;
/// Below this many events the waiting-time statistics are flagged.
pub const MIN_RELIABLE_EVENTS: usize = 10;
/// Shortest signal accepted by [`count_spectrum`].
pub const MIN_SPECTRUM_LENGTH: usize = 1024;

/// Streaming hysteresis detector for dips of `m_y`.
///
/// Starts disarmed; arms once the signal reaches `rearm`, fires on the first
/// sample below `threshold` while armed (after `burn_in`), then disarms.
#[derive(Debug, Clone)]
pub struct EventDetector {
    threshold: f64,
    rearm: f64,
    burn_in: f64,
    armed: bool,
}

impl EventDetector {
    pub fn new(threshold: f64, rearm: f64, burn_in: f64) -> Self {
        Self {
            threshold,
            rearm,
            burn_in,
            armed: false,
        }
    }

    /// Feeds one sample; returns `true` if an event fires at `t`.
    #[inline]
    pub fn push(&mut self, t: f64, m_y: f64) -> bool {
        if self.armed {
            if m_y < self.threshold && t > self.burn_in {
                self.armed = false;
                return true;
            }
        } else if m_y >= self.rearm {
            self.armed = true;
        }
        false
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventSeries {
    pub event_times: Vec<f64>,
    pub threshold: f64,
    pub rearm_level: f64,
    pub burn_in: f64,
    /// At least [`MIN_RELIABLE_EVENTS`] events.
    pub reliable: bool,
}

impl EventSeries {
    pub fn gaps(&self) -> Vec<f64> {
        self.event_times.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Mean waiting time between successive events.
    pub fn tau(&self) -> Option<f64> {
        let g = self.gaps();
        (!g.is_empty()).then(|| g.iter().sum::<f64>() / g.len() as f64)
    }

    /// Standard error of [`EventSeries::tau`].
    pub fn tau_stderr(&self) -> Option<f64> {
        mean_stderr(&self.gaps()).map(|(_, se)| se)
    }
}

fn mean_stderr(x: &[f64]) -> Option<(f64, f64)> {
    if x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Some((mean, (var / n).sqrt()))
}

/// Events in `m_y` sampled on the uniform grid `t0 + i dt`.
pub fn detect_events(m_y: &[f64], t0: f64, dt: f64, threshold: f64, rearm: f64, burn_in: f64) -> Result<EventSeries> {
    if !(dt > 0.0) {
        return Err(Error::InvalidInput("sample spacing must be positive".into()));
    }
    if !(rearm > threshold) {
        return Err(Error::InvalidInput("re-arm level must exceed the threshold".into()));
    }
    let mut det = EventDetector::new(threshold, rearm, burn_in);
    let event_times: Vec<f64> = m_y
        .iter()
        .enumerate()
        .filter_map(|(i, &y)| {
            let t = t0 + i as f64 * dt;
            det.push(t, y).then_some(t)
        })
        .collect();
    Ok(EventSeries {
        reliable: event_times.len() >= MIN_RELIABLE_EVENTS,
        event_times,
        threshold,
        rearm_level: rearm,
        burn_in,
    })
}

/// `tau = A N^b` fitted by unweighted least squares in log-log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub amplitude: f64,
    /// Standard error of the exponent.
    pub stderr: f64,
    pub n_points: usize,
}

pub fn fit_power_law(x: &[f64], y: &[f64]) -> Result<PowerLawFit> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.len() < 4 {
        return Err(Error::InvalidInput(format!("need at least 4 points, got {}", x.len())));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidInput("power-law fit needs positive data".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = lx.iter().zip(&ly).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    Ok(PowerLawFit {
        exponent: slope,
        amplitude: intercept.exp(),
        stderr: (ssr / (n - 2.0) / sxx).sqrt(),
        n_points: lx.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalingModel {
    Phase,
    Jump,
}

impl std::str::FromStr for ScalingModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "phase" => Ok(Self::Phase),
            "jump" => Ok(Self::Jump),
            other => Err(Error::InvalidInput(format!("unknown model '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingOptions {
    pub model: ScalingModel,
    pub n_list: Vec<usize>,
    pub omega: f64,
    pub kappa: f64,
    pub events_target: usize,
    /// Integration step; `None` picks the model default.
    pub dt: Option<f64>,
    pub burn_in: f64,
    pub threshold: f64,
    pub rearm: f64,
    /// Length of one independent realization, burn-in included.
    pub chunk_time: f64,
    /// Realizations simulated per round; fixed so results do not depend on
    /// the worker count.
    pub chunks_per_round: usize,
    /// Upper bound on realizations per `N`.
    pub max_chunks: usize,
    pub master_seed: u64,
    /// Jump model only.
    pub jump_method: JumpMethod,
}

impl ScalingOptions {
    /// Phase-model defaults: critical drive, `dt = 1e-3`, burn-in 50.
    pub fn phase(n_list: Vec<usize>, events_target: usize, master_seed: u64) -> Self {
        Self {
            model: ScalingModel::Phase,
            n_list,
            omega: 1.0,
            kappa: 1.0,
            events_target,
            dt: None,
            burn_in: 50.0,
            threshold: EVENT_THRESHOLD,
            rearm: REARM_LEVEL,
            chunk_time: 20_000.0,
            chunks_per_round: 16,
            max_chunks: 4096,
            master_seed,
            jump_method: JumpMethod::WaitingTime,
        }
    }

    /// Jump-model defaults: as [`ScalingOptions::phase`] with shorter
    /// realizations.
    pub fn jump(n_list: Vec<usize>, events_target: usize, master_seed: u64) -> Self {
        Self {
            model: ScalingModel::Jump,
            chunk_time: 2_000.0,
            ..Self::phase(n_list, events_target, master_seed)
        }
    }
}

/// Default jump-scheme step. The waiting-time method only needs RK4 accuracy
/// (no-jump decay per step at most 0.1); the Bernoulli method keeps the
/// per-step jump probability below 0.005 so its O(dt) bias stays small.
pub fn default_jump_dt(n: usize, kappa: f64, method: JumpMethod) -> f64 {
    let n = n as f64;
    let dt = match method {
        JumpMethod::WaitingTime => (1e-3f64).min(0.2 / n),
        JumpMethod::Bernoulli => (1e-3f64).min(0.01 / n),
    };
    dt / kappa
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    #[serde(rename = "N")]
    pub n: usize,
    /// Mean waiting time in units of `1/kappa`.
    pub kappa_tau: f64,
    pub stderr: f64,
    pub events: usize,
    pub chunks: usize,
    pub dt: f64,
    /// Reached `events_target` within `max_chunks`.
    pub complete: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingResult {
    pub points: Vec<ScalingPoint>,
    pub fit: Option<PowerLawFit>,
    /// Every point reached its event target.
    pub complete: bool,
}

struct ChunkEvents {
    events: usize,
    gaps: Vec<f64>,
}

fn gaps_from(times: &[f64]) -> Vec<f64> {
    times.windows(2).map(|w| w[1] - w[0]).collect()
}

fn phase_chunk(opts: &ScalingOptions, n: usize, dt: f64, seed: u64) -> ChunkEvents {
    let steps = (opts.chunk_time / dt).round() as u64;
    let mut stepper = PhaseStepper::new(std::f64::consts::FRAC_PI_2, Some(n), opts.omega, opts.kappa, dt, seed);
    let mut det = EventDetector::new(opts.threshold, opts.rearm, opts.burn_in);
    let mut times = Vec::new();
    if det.push(0.0, stepper.phi().sin()) {
        times.push(0.0);
    }
    for k in 1..=steps {
        let t = k as f64 * dt;
        if det.push(t, stepper.step().sin()) {
            times.push(t);
        }
    }
    ChunkEvents {
        events: times.len(),
        gaps: gaps_from(&times),
    }
}

fn jump_chunk(opts: &ScalingOptions, sys: &CollectiveSpinSystem, dt: f64, seed: u64) -> Result<ChunkEvents> {
    let psi0 = spin_coherent_state(sys, std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2)?;
    let mut stepper = JumpStepper::with_method(sys, &psi0, dt, seed, opts.jump_method)?;
    let steps = (opts.chunk_time / dt).round() as u64;
    let every = ((DEFAULT_OUTPUT_INTERVAL / dt).round() as u64).max(1);
    let mut det = EventDetector::new(opts.threshold, opts.rearm, opts.burn_in);
    let mut times = Vec::new();
    if det.push(0.0, stepper.magnetization().y) {
        times.push(0.0);
    }
    for k in 1..=steps {
        stepper.step()?;
        if k % every == 0 {
            let t = k as f64 * dt;
            if det.push(t, stepper.magnetization().y) {
                times.push(t);
            }
        }
    }
    Ok(ChunkEvents {
        events: times.len(),
        gaps: gaps_from(&times),
    })
}

/// Mean waiting time at one `N`, collecting independent realizations in
/// fixed-size rounds until `events_target` events are seen. Realization `c`
/// uses seed `master_seed + (N << 32) + c`.
pub fn waiting_time(opts: &ScalingOptions, n: usize) -> Result<ScalingPoint> {
    if !(opts.chunk_time > opts.burn_in) || opts.chunks_per_round == 0 {
        return Err(Error::InvalidInput("chunk time must exceed the burn-in".into()));
    }
    let (dt, sys) = match opts.model {
        ScalingModel::Phase => (opts.dt.unwrap_or(1e-3 / opts.kappa), None),
        ScalingModel::Jump => (
            opts.dt.unwrap_or(default_jump_dt(n, opts.kappa, opts.jump_method)),
            Some(CollectiveSpinSystem::new(n, opts.omega, opts.kappa)?),
        ),
    };
    let base = opts.master_seed.wrapping_add((n as u64) << 32);
    let mut events = 0;
    let mut gaps = Vec::new();
    let mut chunks = 0;
    while events < opts.events_target && chunks < opts.max_chunks {
        let round = opts.chunks_per_round.min(opts.max_chunks - chunks);
        let results: Vec<Result<ChunkEvents>> = map_indexed(round, |i| {
            let seed = base.wrapping_add((chunks + i) as u64);
            match &sys {
                None => Ok(phase_chunk(opts, n, dt, seed)),
                Some(sys) => jump_chunk(opts, sys, dt, seed),
            }
        });
        for r in results {
            let r = r?;
            events += r.events;
            gaps.extend(r.gaps);
        }
        chunks += round;
    }
    let (mean, se) = mean_stderr(&gaps).unwrap_or((f64::NAN, f64::NAN));
    Ok(ScalingPoint {
        n,
        kappa_tau: mean * opts.kappa,
        stderr: se * opts.kappa,
        events,
        chunks,
        dt,
        complete: events >= opts.events_target,
    })
}

/// Waiting times over `n_list` and the fitted exponent of `kappa tau`
/// against `N`. Incomplete points are kept and flagged.
pub fn tau_scaling(opts: &ScalingOptions) -> Result<ScalingResult> {
    let mut points = Vec::with_capacity(opts.n_list.len());
    for &n in &opts.n_list {
        points.push(waiting_time(opts, n)?);
    }
    let usable: Vec<&ScalingPoint> = points.iter().filter(|p| p.kappa_tau.is_finite()).collect();
    let fit = (usable.len() >= 4)
        .then(|| {
            let x: Vec<f64> = usable.iter().map(|p| p.n as f64).collect();
            let y: Vec<f64> = usable.iter().map(|p| p.kappa_tau).collect();
            fit_power_law(&x, &y)
        })
        .transpose()?;
    Ok(ScalingResult {
        complete: points.iter().all(|p| p.complete),
        points,
        fit,
    })
}

/// One-sided DFT magnitude of a mean-removed signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    /// Angular frequency in units of the mean-field frequency.
    pub freq_over_omega: Vec<f64>,
    pub magnitude: Vec<f64>,
    /// Spacing of `freq_over_omega`.
    pub resolution: f64,
}

/// `|DFT|` of a uniformly sampled signal (mean removed, rectangular window)
/// on the non-negative frequencies, with the angular-frequency axis divided
/// by `Omega = sqrt(w^2 - k^2)`.
pub fn count_spectrum(binned: &BinnedSignal, omega: f64, kappa: f64) -> Result<Spectrum> {
    let big_omega = limit_cycle_frequency(omega, kappa)?;
    let n = binned.len();
    if n < MIN_SPECTRUM_LENGTH {
        return Err(Error::InvalidInput(format!(
            "signal has {n} samples, need at least {MIN_SPECTRUM_LENGTH}"
        )));
    }
    let spacing = binned.spacing().expect("length checked");
    let mean = binned.values.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<C64> = binned.values.iter().map(|v| C64::new(v - mean, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let resolution = 2.0 * std::f64::consts::PI / (n as f64 * spacing) / big_omega;
    let half = n / 2 + 1;
    Ok(Spectrum {
        freq_over_omega: (0..half).map(|k| k as f64 * resolution).collect(),
        magnitude: buf[..half].iter().map(|z| z.norm()).collect(),
        resolution,
    })
}

impl Spectrum {
    /// Index and position of the largest nonzero-frequency peak.
    pub fn dominant_peak(&self) -> (usize, f64) {
        let (i, _) = self
            .magnitude
            .iter()
            .enumerate()
            .skip(1)
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("spectrum has nonzero frequencies");
        (i, self.freq_over_omega[i])
    }

    /// Largest magnitude within one bin of `freq_over_omega = at`, divided by
    /// the median nonzero-frequency magnitude.
    pub fn peak_to_background(&self, at: f64) -> f64 {
        let centre = (at / self.resolution).round() as usize;
        let lo = centre.saturating_sub(1).max(1);
        let hi = (centre + 1).min(self.magnitude.len() - 1);
        let peak = self.magnitude[lo..=hi].iter().cloned().fold(0.0, f64::max);
        let mut rest: Vec<f64> = self.magnitude[1..].to_vec();
        rest.sort_by(f64::total_cmp);
        let m = rest.len();
        let median = if m % 2 == 1 {
            rest[m / 2]
        } else {
            0.5 * (rest[m / 2 - 1] + rest[m / 2])
        };
        peak / median
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DwellStats {
    /// Fraction of samples with a positive sign.
    pub positive_fraction: f64,
    /// Mean length of a constant-sign stretch, in units of the sample spacing
    /// times `dt`.
    pub mean_dwell: f64,
    pub switch_count: usize,
}

/// Sign-dwell statistics of a uniformly sampled signal. Exact zeros keep the
/// preceding sign (positive at the start).
pub fn dwell_stats(signal: &[f64], dt: f64) -> Result<DwellStats> {
    if signal.is_empty() {
        return Err(Error::InvalidInput("empty signal".into()));
    }
    let mut positive = true;
    let mut positive_samples = 0usize;
    let mut switches = 0usize;
    for (i, &v) in signal.iter().enumerate() {
        let sign = if v > 0.0 {
            true
        } else if v < 0.0 {
            false
        } else {
            positive
        };
        if i > 0 && sign != positive {
            switches += 1;
        }
        positive = sign;
        if positive {
            positive_samples += 1;
        }
    }
    Ok(DwellStats {
        positive_fraction: positive_samples as f64 / signal.len() as f64,
        mean_dwell: signal.len() as f64 * dt / (switches + 1) as f64,
        switch_count: switches,
    })
}
