use std::f64::consts::FRAC_PI_2;

use proptest::prelude::*;
use timecrystal::linalg::{norm, trace_distance};
use timecrystal::mastereq::{evolve_me, stationary_state, DensityMatrix};
use timecrystal::unravel::*;
use timecrystal::*;

fn opts(output_interval: f64) -> RecordOptions {
    RecordOptions {
        output_interval,
        ..Default::default()
    }
}

#[test]
fn dark_state_never_jumps() {
    let sys = CollectiveSpinSystem::new(8, 0.0, 1.0).unwrap();
    let dark = QuantumState::basis(9, 8);
    for method in [JumpMethod::Bernoulli, JumpMethod::WaitingTime] {
        let o = RecordOptions {
            jump_method: method,
            ..opts(0.5)
        };
        let rec = jump_trajectory(&sys, &dark, 20.0, 1e-3, 4, o).unwrap();
        assert!(rec.jump_times.is_empty());
        assert!(rec.magnetizations.iter().all(|m| (m.z + 1.0).abs() < 1e-14));
    }
}

#[test]
fn undriven_cascade_emits_exactly_n_photons() {
    let n = 10;
    let sys = CollectiveSpinSystem::new(n, 0.0, 1.0).unwrap();
    let top = QuantumState::basis(n + 1, 0);
    for method in [JumpMethod::Bernoulli, JumpMethod::WaitingTime] {
        for seed in 0..5 {
            let o = RecordOptions {
                jump_method: method,
                ..opts(1.0)
            };
            let rec = jump_trajectory(&sys, &top, 200.0, 1e-3, seed, o).unwrap();
            assert_eq!(rec.jump_times.len(), n, "{method:?} seed {seed}");
            assert!(rec.jump_times.windows(2).all(|w| w[1] > w[0]));
            assert!((rec.magnetizations.last().unwrap().z + 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn oversized_steps_abort() {
    let sys = CollectiveSpinSystem::new(100, 1.0, 1.0).unwrap();
    let psi = spin_coherent_state(&sys, FRAC_PI_2, FRAC_PI_2).unwrap();
    for method in [JumpMethod::Bernoulli, JumpMethod::WaitingTime] {
        let o = RecordOptions {
            jump_method: method,
            ..opts(0.1)
        };
        assert!(matches!(
            jump_trajectory(&sys, &psi, 1.0, 1e-2, 1, o),
            Err(Error::StepTooLarge(_))
        ));
    }
    assert!(matches!(
        homodyne_trajectory(&sys, &psi, 1.0, 5e-2, 1, opts(0.1)),
        Err(Error::StepTooLarge(_))
    ));
}

#[test]
fn homodyne_dark_state_current_is_white_noise() {
    let sys = CollectiveSpinSystem::new(6, 0.0, 1.0).unwrap();
    let dark = QuantumState::basis(7, 6);
    let dt = 1e-3;
    let rec = homodyne_trajectory(&sys, &dark, 100.0, dt, 9, opts(1.0)).unwrap();
    assert!(rec.magnetizations.iter().all(|m| (m.z + 1.0).abs() < 1e-14));
    let n = rec.raw_current.len() as f64;
    let mean = rec.raw_current.iter().sum::<f64>() / n;
    let var = rec.raw_current.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    // sample mean has sd sqrt(1/(n dt)); sample variance has relative sd sqrt(2/n)
    assert!(mean.abs() < 4.0 / (n * dt).sqrt(), "{mean}");
    assert!((var * dt - 1.0).abs() < 4.0 * (2.0 / n).sqrt(), "{}", var * dt);
}

fn check_against_master_equation(n: usize, omega: f64, scheme: Scheme, method: JumpMethod, dt: f64) {
    let sys = CollectiveSpinSystem::new(n, omega, 1.0).unwrap();
    let psi = spin_coherent_state(&sys, 1.2, 0.4).unwrap();
    let checkpoints = [0.5, 1.0, 1.5, 2.0, 3.0];
    let me = evolve_me(&sys, &DensityMatrix::from_state(&psi), 3.0, 1e-3, 0.5).unwrap();
    let ens = ensemble_density_with(&sys, &psi, scheme, method, &checkpoints, 2000, dt, 100).unwrap();
    for (i, t) in checkpoints.iter().enumerate() {
        let k = (t / 0.5f64).round() as usize;
        let d = trace_distance(&ens.mean[i], me.states[k].matrix());
        assert!(
            d <= 3.0 * ens.standard_error[i],
            "{scheme} {method:?} N={n} t={t}: D = {d:.4}, SE = {:.4}",
            ens.standard_error[i]
        );
    }
}

#[test]
fn jump_ensembles_reproduce_the_master_equation() {
    check_against_master_equation(4, 1.3, Scheme::Jump, JumpMethod::Bernoulli, 1e-3);
    check_against_master_equation(4, 1.3, Scheme::Jump, JumpMethod::WaitingTime, 1e-3);
    check_against_master_equation(10, 0.5, Scheme::Jump, JumpMethod::WaitingTime, 1e-3);
}

#[test]
fn homodyne_ensemble_reproduces_the_master_equation() {
    check_against_master_equation(4, 1.3, Scheme::Homodyne, JumpMethod::default(), 1e-4);
}

#[test]
fn stationary_jump_rate_matches_master_equation() {
    let sys = CollectiveSpinSystem::new(30, 0.5, 1.0).unwrap();
    let ss = stationary_state(&sys).unwrap();
    let rate = jump_rate(&sys, ss.matrix());
    let psi = spin_coherent_state(&sys, 2.0 * std::f64::consts::PI / 3.0, FRAC_PI_2).unwrap();
    let burn = 20.0;
    let t_final = 2020.0;
    let rec = jump_trajectory(&sys, &psi, t_final, 1e-3, 21, opts(1.0)).unwrap();
    let late: Vec<f64> = rec.jump_times.iter().copied().filter(|t| *t > burn).collect();
    // batch counts over 40 windows estimate the error of the mean rate
    let windows = 40;
    let width = (t_final - burn) / windows as f64;
    let mut counts = vec![0.0; windows];
    for t in &late {
        let b = (((t - burn) / width) as usize).min(windows - 1);
        counts[b] += 1.0;
    }
    let rates: Vec<f64> = counts.iter().map(|c| c / width).collect();
    let mean = rates.iter().sum::<f64>() / windows as f64;
    let var = rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (windows - 1) as f64;
    let se = (var / windows as f64).sqrt();
    assert!((mean - rate).abs() <= 3.0 * se, "{mean} vs {rate} (se {se})");
}

#[test]
fn binned_counts_track_the_stationary_rate() {
    let sys = CollectiveSpinSystem::new(100, 0.5, 1.0).unwrap();
    let rate = jump_rate(&sys, stationary_state(&sys).unwrap().matrix());
    let psi = spin_coherent_state(&sys, 2.0 * std::f64::consts::PI / 3.0, FRAC_PI_2).unwrap();
    let rec = jump_trajectory(&sys, &psi, 220.0, 1e-3, 2, opts(0.1)).unwrap();
    let late: Vec<f64> = rec.jump_times.iter().map(|t| t - 20.0).filter(|t| *t > 0.0).collect();
    let bins = bin_counts(&late, 200.0, 0.5, BinMode::Tumbling).unwrap();
    assert_eq!(bins.len(), 400);
    let mean = bins.values.iter().sum::<f64>() / bins.len() as f64;
    assert!((mean / (rate * 0.5) - 1.0).abs() < 0.05, "{mean} vs {}", rate * 0.5);
    // near-coherent state: magnetization barely moves
    let y: Vec<f64> = rec.series(1).into_iter().skip(200).collect();
    let spread = y.iter().cloned().fold(f64::MIN, f64::max) - y.iter().cloned().fold(f64::MAX, f64::min);
    assert!(spread < 0.05, "{spread}");
}

#[test]
fn ensemble_dephases_while_single_runs_keep_oscillating() {
    let sys = CollectiveSpinSystem::new(100, 1.5, 1.0).unwrap();
    let psi = spin_coherent_state(&sys, FRAC_PI_2, FRAC_PI_2).unwrap();
    let runs = 40;
    let records: Vec<TrajectoryRecord> = (0..runs)
        .map(|s| jump_trajectory(&sys, &psi, 55.0, 1e-3, 500 + s, opts(0.05)).unwrap())
        .collect();
    let amplitude = |series: &[f64], from: f64, to: f64| {
        let sel: Vec<f64> = series
            .iter()
            .enumerate()
            .filter(|(i, _)| {
                let t = *i as f64 * 0.05;
                t >= from && t <= to
            })
            .map(|(_, v)| *v)
            .collect();
        sel.iter().cloned().fold(f64::MIN, f64::max) - sel.iter().cloned().fold(f64::MAX, f64::min)
    };
    let len = records[0].times.len();
    let mean: Vec<f64> = (0..len)
        .map(|i| records.iter().map(|r| r.magnetizations[i].y).sum::<f64>() / runs as f64)
        .collect();
    let early = amplitude(&mean, 2.5, 7.5);
    let late = amplitude(&mean, 47.5, 52.5);
    assert!(late < early, "{late} !< {early}");
    let single = amplitude(&records[0].series(1), 47.5, 52.5);
    assert!(single > late, "{single} vs {late}");
}

#[test]
fn smoothed_current_of_noise_has_reduced_variance() {
    // white noise of variance 1/dt averaged over w samples has variance 1/(w dt)
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};
    let dt: f64 = 1e-3;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let raw: Vec<f64> = (0..400_000)
        .map(|_| {
            let g: f64 = StandardNormal.sample(&mut rng);
            g / dt.sqrt()
        })
        .collect();
    let atoms = 50;
    let s = smooth_current(&raw, dt, 0.5, atoms, 500).unwrap();
    let n = s.len() as f64;
    let var = s.values.iter().map(|v| v * v).sum::<f64>() / n;
    let expected = 1.0 / (0.5 * 2.0 * atoms as f64);
    assert!((var / expected - 1.0).abs() < 4.0 * (2.0 / n).sqrt(), "{var} vs {expected}");
    assert!(smooth_current(&raw, dt, 5e-3, atoms, 1).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn stored_states_stay_normalized_and_bounded(seed in any::<u64>(), w in 0.2..2.0f64, homodyne in any::<bool>()) {
        let sys = CollectiveSpinSystem::new(12, w, 1.0).unwrap();
        let psi = spin_coherent_state(&sys, 1.0, 2.0).unwrap();
        let rec = if homodyne {
            homodyne_trajectory(&sys, &psi, 5.0, 1e-4, seed, opts(0.01)).unwrap()
        } else {
            jump_trajectory(&sys, &psi, 5.0, 1e-3, seed, opts(0.01)).unwrap()
        };
        for m in &rec.magnetizations {
            for c in m.as_array() {
                prop_assert!(c.abs() <= 1.0 + 1e-6);
            }
        }
        prop_assert!(rec.jump_times.iter().all(|t| *t >= 0.0 && *t <= 5.0 + 1e-12));
        prop_assert!(rec.jump_times.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn stepper_norm_is_one(seed in any::<u64>()) {
        let sys = CollectiveSpinSystem::new(9, 1.4, 1.0).unwrap();
        let psi = spin_coherent_state(&sys, 0.7, 0.1).unwrap();
        let mut jump = JumpStepper::new(&sys, &psi, 1e-3, seed).unwrap();
        let mut hom = HomodyneStepper::new(&sys, &psi, 1e-4, seed).unwrap();
        for _ in 0..2000 {
            jump.step().unwrap();
            hom.step().unwrap();
            prop_assert!((norm(jump.state()) - 1.0).abs() < 1e-8);
            prop_assert!((norm(hom.state()) - 1.0).abs() < 1e-8);
        }
    }
}
