use fisher_clt::harness::{tail_class_profile, verify_o1n, SweepReport, DEFAULT_RADII};
use fisher_clt::report::to_json;
use fisher_clt::{density, materialize, DistributionSpec, Family, GridSpec};

#[test]
fn sweep_json_round_trips_and_is_deterministic() {
    let spec = Family::gamma(5.0).standardized();
    let grid = GridSpec::with_points(2048);
    let a = verify_o1n(&spec, &[1, 2, 4], &grid).unwrap();
    let b = verify_o1n(&spec, &[1, 2, 4], &grid).unwrap();
    let (ja, jb) = (to_json(&a).unwrap(), to_json(&b).unwrap());
    assert_eq!(ja, jb);
    assert_eq!(a.to_csv(), b.to_csv());
    let back: SweepReport = serde_json::from_str(&ja).unwrap();
    assert_eq!(back.rows.len(), 3);
    assert_eq!(back.rows[2].n, 4);
    for (r, s) in back.rows.iter().zip(&a.rows) {
        assert!((r.j - s.j).abs() <= 1e-11 * s.j.abs().max(1e-300));
        assert_eq!(r.flags, s.flags);
    }
}

#[test]
fn infinite_values_survive_json() {
    let r = verify_o1n(&Family::exponential(1.0).standardized(), &[1], &GridSpec::with_points(2048)).unwrap();
    let js = to_json(&r).unwrap();
    assert!(js.contains("\"J\": \"inf\""), "{js}");
    let back: SweepReport = serde_json::from_str(&js).unwrap();
    assert!(back.rows[0].j.is_infinite());
}

#[test]
fn config_specs_deserialize() {
    let spec: DistributionSpec = serde_json::from_str(r#"{"family": "gamma", "shape": 5, "center_and_scale": true}"#).unwrap();
    assert_eq!(spec, Family::gamma(5.0).standardized());
    let mix: DistributionSpec =
        serde_json::from_str(r#"{"family": "gaussian_mixture", "weights": [0.5, 0.5], "means": [-1, 1], "vars": [0.5, 0.5]}"#)
            .unwrap();
    assert_eq!(mix, Family::two_bump().spec());
}

#[test]
fn density_csv_has_fixed_columns() {
    let d = materialize(&Family::normal(0.0, 1.0).spec(), &GridSpec::with_points(256)).unwrap();
    let csv = density::to_csv(&d);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("x,p"));
    assert_eq!(lines.count(), 256);
}

#[test]
fn normal_tail_profile_matches_closed_form() {
    let r = tail_class_profile(&Family::normal(0.0, 1.0).spec(), &[1, 4], &DEFAULT_RADII, &GridSpec::default()).unwrap();
    // E[Z² 1(|Z| ≥ R)] = 2(R φ(R) + Φ̄(R))
    let phi = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let tail = [1.0, 0.617075077, 0.317310508, 0.045500264, 0.002699796, 0.000063342];
    for row in &r.rows {
        for (k, rad) in DEFAULT_RADII.iter().enumerate() {
            let want = 2.0 * (rad * phi(*rad)) + tail[k];
            assert!((row.psi[k] - want).abs() < 1e-4, "n={} R={rad}: {} vs {want}", row.n, row.psi[k]);
        }
    }
    assert!(r.holds());
}
