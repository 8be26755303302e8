use std::path::PathBuf;

use cyclegan::interface::{load_model, model_record, CheckpointRecord};
use cyclegan::tensor::Tensor;
use cyclegan::Error;

fn fixture() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/tiny_model.cgck")
}

#[test]
fn externally_written_checkpoint_loads() {
    let (model, resolution) = load_model(&fixture()).unwrap();
    assert_eq!(resolution, None);
    assert_eq!(model.seed, 42);
    assert_eq!(model.g.spec.notation(), "c7s1-3");
    assert_eq!(model.d_y.params[1].data(), &[0.0, 0.5]);
    let x = Tensor::from_fn(vec![1, 3, 8, 8], |i| (i as f32 / 96.0) - 1.0);
    let gx = model.g.infer(&x).unwrap();
    let fx = model.f.infer(&x).unwrap();
    for ((v, g), f) in x.data().iter().zip(gx.data()).zip(fx.data()) {
        assert!((g - v.tanh()).abs() < 1e-6);
        assert!((f + v.tanh()).abs() < 1e-6);
    }
}

#[test]
fn rewriting_the_fixture_reproduces_its_bytes() {
    let bytes = std::fs::read(fixture()).unwrap();
    let (model, _) = load_model(&fixture()).unwrap();
    assert_eq!(model_record(&model).to_bytes().unwrap(), bytes);
}

#[test]
fn every_truncation_is_rejected() {
    let bytes = std::fs::read(fixture()).unwrap();
    for cut in (0..bytes.len()).step_by(97) {
        let err = CheckpointRecord::from_bytes(&bytes[..cut]).unwrap_err();
        assert!(matches!(err, Error::Corrupt(_)), "{cut}: {err}");
        assert_eq!(err.exit_code(), 3);
    }
}
