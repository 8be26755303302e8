use cyclegan::networks::{
    build_discriminator, build_generator, build_generator_with, receptive_field, GeneratorOptions,
    ModelState, Network, ParamKind, INIT_STD,
};
use cyclegan::tensor::Tensor;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn patch_discriminator_sees_seventy_pixels() {
    assert_eq!(receptive_field(&build_discriminator()).unwrap(), 70);
}

#[test]
fn residual_block_count_follows_resolution() {
    assert_eq!(build_generator(128).unwrap().residual_blocks(), 6);
    assert_eq!(build_generator(256).unwrap().residual_blocks(), 9);
}

#[test]
fn generator_preserves_spatial_shape() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for res in [8, 12, 32, 44] {
        let opts = GeneratorOptions { base_filters: 4, residual_blocks: Some(2), channels: 3 };
        let net = Network::initialized(build_generator_with(res, opts).unwrap(), &mut rng);
        let x = Tensor::from_fn(vec![1, 3, res, res], |i| ((i % 13) as f32 - 6.0) / 6.0);
        let y = net.infer(&x).unwrap();
        assert_eq!(y.shape(), x.shape());
        assert!(y.data().iter().all(|v| v.abs() <= 1.0));
    }
}

#[test]
fn full_generator_preserves_shape_at_128() {
    let net = Network::initialized(build_generator(128).unwrap(), &mut ChaCha8Rng::seed_from_u64(1));
    let x = Tensor::from_fn(vec![1, 3, 128, 128], |i| ((i % 29) as f32 - 14.0) / 14.0);
    assert_eq!(net.infer(&x).unwrap().shape(), &[1, 3, 128, 128]);
}

#[test]
fn kernel_init_standard_deviation() {
    let model = ModelState::new(build_generator(128).unwrap(), build_discriminator(), 3);
    let mut draws = Vec::new();
    for (_, net) in model.networks() {
        for (shape, p) in net.param_shapes().iter().zip(&net.params) {
            if shape.kind == ParamKind::Kernel {
                draws.extend(p.data().iter().map(|&v| v as f64));
            }
        }
    }
    assert!(draws.len() >= 100_000);
    let n = draws.len() as f64;
    let mean = draws.iter().sum::<f64>() / n;
    let std = (draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    assert!(mean.abs() < 1e-3, "{mean}");
    assert!((std - INIT_STD).abs() < 1e-3, "{std}");
}
