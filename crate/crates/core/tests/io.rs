use timecrystal::io::*;
use timecrystal::semiclassical::simulate_phase;
use timecrystal::unravel::{jump_trajectory, RecordOptions};
use timecrystal::{spin_coherent_state, CollectiveSpinSystem, Error};

#[test]
fn columns_round_trip_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.csv");
    let a = [0.1, 1.0 / 3.0, -2.5e-300, 7.0];
    let b = [1.0, 2.0, 3.0, f64::MAX];
    write_columns(&path, &["a", "b"], &[&a, &b]).unwrap();
    assert_eq!(read_column(&path, "a").unwrap(), a);
    assert_eq!(read_column(&path, "b").unwrap(), b);
    assert!(matches!(read_column(&path, "c"), Err(Error::InvalidInput(_))));
}

#[test]
fn ragged_columns_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.csv");
    assert!(write_columns(&path, &["a", "b"], &[&[1.0, 2.0], &[1.0]]).is_err());
    assert!(write_columns(&path, &["a"], &[&[1.0], &[1.0]]).is_err());
}

#[test]
fn trajectory_files_have_expected_headers() {
    let dir = tempfile::tempdir().unwrap();
    let sys = CollectiveSpinSystem::new(6, 1.5, 1.0).unwrap();
    let psi = spin_coherent_state(&sys, 1.0, 0.5).unwrap();
    let rec = jump_trajectory(&sys, &psi, 5.0, 1e-3, 1, RecordOptions::default()).unwrap();
    let traj = dir.path().join("t.csv");
    write_trajectory(&traj, &rec).unwrap();
    let header = std::fs::read_to_string(&traj).unwrap().lines().next().unwrap().to_string();
    assert_eq!(header, "t,m_x,m_y,m_z");
    assert_eq!(read_column(&traj, "m_z").unwrap(), rec.series(2));

    let jumps = dir.path().join("j.csv");
    write_jump_times(&jumps, &rec.jump_times).unwrap();
    assert_eq!(read_column(&jumps, "t").unwrap(), rec.jump_times);

    let path = simulate_phase(1.0, None, 1.0, 0.5, 1.0, 0.1, 0).unwrap();
    let p = dir.path().join("p.csv");
    write_phase_path(&p, &path).unwrap();
    let y = read_column(&p, "m_y").unwrap();
    assert_eq!(y, path.m_y());
}

#[test]
fn json_ends_with_newline() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.json");
    write_json(&path, &serde_json::json!({"a": 1})).unwrap();
    let s = std::fs::read_to_string(&path).unwrap();
    assert!(s.ends_with("}\n"));
    let back: serde_json::Value = serde_json::from_str(&s).unwrap();
    assert_eq!(back["a"], 1);
}
