use std::fs;

use mcgpc_core::{
    compute_stats, flocking_spreads, reconstruct_expected_density, velocity_field, write_stats_csv, Axis, DensityKind,
    GpcBasis, GpcEnsemble, PolynomialFamily, StatRecord,
};

/// Particles on the unit circle moving counterclockwise at unit speed.
fn rigid_rotation(n: usize) -> GpcEnsemble {
    let mut x = Vec::new();
    let mut v = Vec::new();
    for i in 0..n {
        let a = std::f64::consts::TAU * i as f64 / n as f64;
        x.extend([a.cos(), a.sin()]);
        v.extend([-a.sin(), a.cos()]);
    }
    GpcEnsemble::from_deterministic(2, 3, &x, &v).unwrap()
}

#[test]
fn stats_of_a_rigid_rotation() {
    let basis = GpcBasis::with_default_quadrature(PolynomialFamily::Legendre, 2).unwrap();
    let n = 64;
    let s = compute_stats(&rigid_rotation(n), &basis).unwrap();
    assert!((s.speed_mean - 1.0).abs() < 1e-14);
    assert!(s.speed_std < 1e-7);
    assert_eq!(s.ccw_frac, 1.0);
    assert!(s.mean_velocity.iter().all(|m| m.abs() < 1e-14));
    // unit-circle points and velocities: mean squared deviation 1 in both
    assert!((s.temperature - 1.0).abs() < 1e-12);
    let expected_spread = (n * n) as f64;
    assert!((s.lambda - expected_spread).abs() < 1e-9 * expected_spread);
    assert!((s.gamma - expected_spread).abs() < 1e-9 * expected_spread);

    let (gammas, lambdas) = flocking_spreads(&rigid_rotation(n), &basis).unwrap();
    assert_eq!(gammas.len(), 6);
    assert!(lambdas.iter().all(|l| (l - expected_spread).abs() < 1e-9 * expected_spread));
}

#[test]
fn stats_csv_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("stats.csv");
    let rec = StatRecord {
        time: 0.5,
        temperature: 0.25,
        mean_velocity: vec![0.1, -0.2],
        lambda: 3.0,
        gamma: 4.0,
        speed_mean: 1.0,
        speed_std: 0.0,
        ccw_frac: 0.75,
    };
    write_stats_csv(&path, &[rec.clone(), rec]).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), StatRecord::CSV_HEADER);
    let row: Vec<f64> = lines.next().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(row, vec![0.5, 0.25, 0.1, -0.2, 3.0, 4.0, 1.0, 0.0, 0.75]);
    assert_eq!(lines.count(), 1);
}

#[test]
fn pgm_orientation_and_levels() {
    // one particle in the lower-left cell, three in the upper-right
    let x = [-0.9, -0.9, 0.9, 0.9, 0.8, 0.8, 0.85, 0.95];
    let v = [0.0; 8];
    let ens = GpcEnsemble::from_deterministic(2, 1, &x, &v).unwrap();
    let axis = Axis::new(-1.0, 1.0, 4).unwrap();
    let grid = reconstruct_expected_density(&ens, &[axis, axis], DensityKind::Position).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pos.pgm");
    grid.write_pgm(&path).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(&lines[..3], ["P2", "4 4", "255"]);
    assert_eq!(lines[3], "0 0 0 255");
    assert_eq!(lines[6], "85 0 0 0");
    assert!(lines[4..6].iter().all(|l| *l == "0 0 0 0"));
}

#[test]
fn velocity_field_counts_every_particle_in_range() {
    let ens = rigid_rotation(40);
    let axis = Axis::new(-1.5, 1.5, 6).unwrap();
    let field = velocity_field(&ens, [axis, axis]).unwrap();
    assert_eq!(field.counts.iter().sum::<usize>(), 40);
    for (count, mean) in field.counts.iter().zip(&field.mean) {
        if *count > 0 {
            // averages of unit tangent vectors never exceed unit length
            assert!(mean[0].hypot(mean[1]) <= 1.0 + 1e-12);
        }
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("field.csv");
    field.write_csv(&path).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().next().unwrap(), "x,y,vx,vy,count");
    assert_eq!(text.lines().count(), 37);
}

#[test]
fn density_csv_header_records_axes_and_spill() {
    let ens = rigid_rotation(10);
    let axis = Axis::new(-0.5, 0.5, 5).unwrap();
    let grid = reconstruct_expected_density(&ens, &[axis, axis], DensityKind::Position).unwrap();
    // coordinates outside [-0.5, 0.5] are clamped into the edge bins
    assert!(grid.spill > 0);
    let masses: f64 = grid.cell_masses().iter().sum();
    assert!((masses - 1.0).abs() < 1e-12);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    grid.write_csv(&path).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    assert!(text.lines().any(|l| l == format!("# spill={}", grid.spill)));
    assert!(text.lines().any(|l| l.starts_with("# axis1=")));
}
