use blab_core::eigen::{Eigenfunction, TorusEigenfunction};
use blab_core::field::{GeodesicBall, Manifold};
use blab_core::io::{ingest, torus_grid, EigenData, EigenSpec, Format, RunManifest, SampledField, TorusInterpolant};
use blab_core::lab::{log_grid, sweep, SweepConfig};
use blab_core::supnorm::{sup_norm, ResolutionPolicy};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn torus_field_survives_csv_and_interpolation() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let ef = Eigenfunction::Torus(TorusEigenfunction::random(2, 25, 3, &mut rng).unwrap());
    let s = SampledField::sample(&ef, torus_grid(2, 50), false, "random torus field, λ = 25").unwrap();
    let pol = ResolutionPolicy::default();
    for fmt in [Format::Csv, Format::Json] {
        let path = dir.path().join(if fmt == Format::Csv { "f.csv" } else { "f.json" });
        s.write(&path, fmt).unwrap();
        let back = ingest(&path, None).unwrap();
        assert_eq!(back.len(), 2500);
        let it = TorusInterpolant::new(&back).unwrap();
        let ball = GeodesicBall::new(Manifold::torus(2), vec![1.1, 4.2], 0.6).unwrap();
        let a = sup_norm(&ef, &ball, &pol).unwrap().sup;
        let b = sup_norm(&it, &ball, &pol).unwrap().sup;
        assert!((a - b).abs() / a < 1e-3, "{fmt:?}: {a} vs {b}");
    }
}

#[test]
fn sampled_gradients_are_required_when_used() {
    let ef = Eigenfunction::Torus(TorusEigenfunction::random(2, 5, 1, &mut ChaCha8Rng::seed_from_u64(1)).unwrap());
    let pts = torus_grid(2, 12);
    let with = SampledField::sample(&ef, pts.clone(), true, "").unwrap();
    let without = SampledField::sample(&ef, pts, false, "").unwrap();
    let back = SampledField::from_csv(&with.to_csv()).unwrap();
    assert!(back.gradients.is_some());
    assert!((back.sample_gradient_ratio().unwrap() - with.sample_gradient_ratio().unwrap()).abs() < 1e-15);
    assert!(without.sample_gradient_ratio().is_err());
}

#[test]
fn eigen_specs_build() {
    let torus: EigenSpec =
        serde_json::from_str(r#"{"manifold": "torus", "d_or_n": 2, "modes_or_coefficients": {"modes": [{"m": [3, 4], "cos": 1.0, "sin": 0.0}]}}"#)
            .unwrap();
    assert_eq!(torus.build().unwrap().eigenvalue(), 25.0);
    let sphere = EigenSpec { manifold: "sphere".into(), d_or_n: 2, modes_or_coefficients: EigenData::Random { level: 4, count: 1 }, seed: Some(3) };
    assert_eq!(sphere.build().unwrap().eigenvalue(), 20.0);
    let mixed: EigenSpec = serde_json::from_str(
        r#"{"manifold": "torus", "d_or_n": 2, "modes_or_coefficients": {"modes": [{"m": [1, 0], "cos": 1.0, "sin": 0.0}, {"m": [1, 1], "cos": 1.0, "sin": 0.0}]}}"#,
    )
    .unwrap();
    assert!(mixed.build().is_err());
}

#[test]
fn manifest_digests_match_and_detect_edits() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SweepConfig { levels: vec![25], radii: log_grid(0.05, 0.2, 3), seed: 8, ..SweepConfig::default() };
    let mut m = RunManifest::start("sweep", serde_json::to_value(&cfg).unwrap(), Some(cfg.seed));
    let csv = sweep(&cfg).unwrap().to_csv().unwrap();
    m.write_artifact(dir.path(), "sweep.csv", csv.as_bytes()).unwrap();
    let path = m.finish(dir.path()).unwrap();
    let back = RunManifest::read(&path).unwrap();
    assert_eq!(back.seed, Some(8));
    assert!(back.finished.is_some());
    assert!(back.stale_outputs(dir.path()).unwrap().is_empty());
    std::fs::write(dir.path().join("sweep.csv"), format!("{csv}extra\n")).unwrap();
    assert_eq!(back.stale_outputs(dir.path()).unwrap(), vec!["sweep.csv".to_string()]);
}

#[test]
fn sweep_csv_is_byte_stable() {
    let cfg = SweepConfig { levels: vec![25, 50], radii: log_grid(0.02, 0.3, 4), seed: 21, ..SweepConfig::default() };
    let a = sweep(&cfg).unwrap().to_csv().unwrap();
    let b = sweep(&cfg).unwrap().to_csv().unwrap();
    assert_eq!(a, b);
    assert!(a.starts_with("manifold,lambda,r,center_id,grad_sup,val_sup,ratio,"));
}
