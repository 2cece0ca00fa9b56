use hexsr_core::image::RasterImage;
use hexsr_nnet::checkpoint::{load_checkpoint, save_checkpoint, CheckpointMeta};
use hexsr_nnet::loss::{loss, LossKind};
use hexsr_nnet::model::Attention;
use hexsr_nnet::optim::AdamConfig;
use hexsr_nnet::params::ParamStore;
use hexsr_nnet::{Error, Restorer, RestorerConfig, Tape, Tensor};
use ndarray::{Array2, Array3, Array4};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn small(use_distance_head: bool) -> RestorerConfig {
    RestorerConfig {
        groups: 1,
        blocks_per_group: 1,
        feature_channels: 4,
        attention_reduction: 2,
        scale: 2,
        use_distance_head,
    }
}

fn random_image(h: usize, w: usize, seed: u64) -> RasterImage {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    RasterImage::new(Array3::from_shape_fn((3, h, w), |_| rng.random_range(0.0..255.0)), 2.0).unwrap()
}

fn random_dist(h: usize, w: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    Array2::from_shape_fn((h, w), |_| rng.random_range(0.0..2.5))
}

#[test]
fn zero_upsampler_and_output_give_zero() {
    let mut model = Restorer::<f64>::new(RestorerConfig::default(), 1).unwrap();
    model.zero_body();
    let layers: Vec<_> = model.layout.up.iter().copied().chain([model.layout.out]).collect();
    for l in layers {
        model.params.get_mut(l.w).data.fill(0.0);
        model.params.get_mut(l.b).data.fill(0.0);
    }
    let out = model.forward(&random_image(10, 12, 2), Some(&random_dist(10, 12, 3))).unwrap();
    assert_eq!((out.height(), out.width()), (20, 24));
    assert!(out.data.iter().all(|&v| v == 0.0));
    assert_eq!(out.pitch, 1.0);
}

#[test]
fn zero_body_passes_shallow_features_through() {
    let mut model = Restorer::<f64>::new(RestorerConfig::default(), 4).unwrap();
    model.zero_body();
    let x: Tensor<f64> = Array4::from_shape_fn((1, 3, 9, 7), |(_, c, i, j)| ((c * 31 + i * 7 + j * 3) % 256) as f64);
    let d: Tensor<f64> = Array4::from_shape_fn((1, 1, 9, 7), |(_, _, i, j)| (i + j) as f64 * 0.1);
    let mut tape = Tape::new(&model.params);
    let (xv, dv) = (tape.leaf(x), tape.leaf(d));
    let h = model.distance_features(&mut tape, dv).unwrap();
    let f0 = model.shallow_features(&mut tape, xv, Some(h)).unwrap();
    let fdf = model.deep_features(&mut tape, f0).unwrap();
    assert_eq!(tape.value(f0), tape.value(fdf));
}

fn attention_params(c: usize, r: usize, zero: bool, seed: u64) -> (ParamStore<f64>, Attention) {
    let mut p = ParamStore::new();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut conv = |p: &mut ParamStore<f64>, name: &str, cin: usize, cout: usize| {
        let w = if zero {
            p.zeros(format!("{name}.w"), &[cout, cin, 1, 1])
        } else {
            p.uniform(format!("{name}.w"), &[cout, cin, 1, 1], cin, &mut rng)
        };
        hexsr_nnet::model::ConvLayer { w, b: p.zeros(format!("{name}.b"), &[cout]) }
    };
    let down = conv(&mut p, "down", c, c / r);
    let up = conv(&mut p, "up", c / r, c);
    (p, Attention { down, up })
}

#[test]
fn zero_attention_halves_every_channel() {
    let (p, a) = attention_params(8, 4, true, 0);
    let model = Restorer::<f64>::new(small(false), 0).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let x: Tensor<f64> = Array4::from_shape_fn((2, 8, 5, 5), |_| rng.random_range(-3.0..3.0));
    let mut tape = Tape::new(&p);
    let xv = tape.leaf(x.clone());
    let y = model.channel_attention(&mut tape, a, xv).unwrap();
    assert_eq!(tape.value(y), &x.mapv(|v| v * 0.5));
}

#[test]
fn attention_on_constant_channels_gates_exactly() {
    let (p, a) = attention_params(8, 2, false, 1);
    let model = Restorer::<f64>::new(small(false), 0).unwrap();
    let consts = [3.0, -1.0, 0.5, 7.0, 0.0, -4.0, 2.0, 1.0];
    let x: Tensor<f64> = Array4::from_shape_fn((1, 8, 4, 6), |(_, c, _, _)| consts[c]);
    let mut tape = Tape::new(&p);
    let xv = tape.leaf(x.clone());
    let pooled = tape.avg_pool(xv);
    for (c, &k) in consts.iter().enumerate() {
        assert_eq!(tape.value(pooled)[[0, c, 0, 0]], k);
    }
    let y = model.channel_attention(&mut tape, a, xv).unwrap();
    let out = tape.value(y).clone();
    for (c, &k) in consts.iter().enumerate() {
        let g = if k != 0.0 { out[[0, c, 0, 0]] / k } else { continue };
        assert!(g > 0.0 && g < 1.0, "gate {g}");
        assert!(out.index_axis(ndarray::Axis(1), c).iter().all(|&v| v == g * k));
    }

    let mut doubled = x.clone();
    doubled.index_axis_mut(ndarray::Axis(1), 3).mapv_inplace(|v| 2.0 * v);
    let dv = tape.leaf(doubled);
    let p2 = tape.avg_pool(dv);
    assert_eq!(tape.value(p2)[[0, 3, 0, 0]], 2.0 * consts[3]);
    for c in (0..8).filter(|&c| c != 3) {
        assert_eq!(tape.value(p2)[[0, c, 0, 0]], consts[c]);
    }
}

#[test]
fn loss_examples() {
    let t = |v: f64| Array4::from_elem((1, 1, 1, 1), v);
    let (c, _) = loss(LossKind::Charbonnier { eps: 4.0 }, &t(0.0), &t(3.0)).unwrap();
    assert!((c - 1.0).abs() < 1e-15);
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let y: Tensor<f64> = Array4::from_shape_fn((2, 3, 4, 4), |_| rng.random_range(0.0..255.0));
    for kind in [LossKind::Mse, LossKind::L1, LossKind::default()] {
        assert_eq!(loss(kind, &y, &y).unwrap().0, 0.0);
    }
    for e in [0.0, 0.1, 1.0, 3.0, 17.0, 250.0, -42.0] {
        let (c, _) = loss(LossKind::default(), &t(0.0), &t(e)).unwrap();
        let (l, _) = loss(LossKind::L1, &t(0.0), &t(e)).unwrap();
        assert!(c <= l);
    }
    let mut prev = 0.0;
    for e in [1e2, 1e3, 1e4, 1e6] {
        let (c, _) = loss(LossKind::default(), &t(0.0), &t(e)).unwrap();
        let ratio = c / e;
        assert!(ratio > prev && ratio < 1.0);
        prev = ratio;
    }
    assert!(prev > 0.9999);
    assert!(loss(LossKind::Charbonnier { eps: 0.0 }, &t(0.0), &t(1.0)).is_err());
    assert!(loss(LossKind::Mse, &t(0.0), &y).is_err());
}

#[test]
fn distance_input_contract() {
    let with = Restorer::<f64>::new(small(true), 0).unwrap();
    let without = Restorer::<f64>::new(small(false), 0).unwrap();
    let img = random_image(6, 6, 1);
    assert!(matches!(with.forward(&img, None), Err(Error::MissingDistance)));
    assert!(matches!(without.forward(&img, Some(&random_dist(6, 6, 2))), Err(Error::UnexpectedDistance)));
    assert!(matches!(with.forward(&img, Some(&random_dist(5, 6, 2))), Err(Error::Shape(_))));
    let gray = RasterImage::zeros(1, 6, 6, 1.0);
    assert!(matches!(without.forward(&gray, None), Err(Error::Shape(_))));
}

#[test]
fn invalid_configs_are_rejected() {
    let bad = [
        RestorerConfig { scale: 3, ..Default::default() },
        RestorerConfig { feature_channels: 10, attention_reduction: 4, ..Default::default() },
        RestorerConfig { attention_reduction: 0, ..Default::default() },
    ];
    for cfg in bad {
        assert!(matches!(Restorer::<f64>::new(cfg, 0), Err(Error::Config(_))));
    }
}

#[test]
fn checkpoint_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.ckpt");
    let model = Restorer::<f64>::new(RestorerConfig { scale: 4, ..Default::default() }, 11).unwrap();
    let meta = CheckpointMeta {
        step: 1234,
        seed: 11,
        lr: 2.5e-4,
        adam: AdamConfig::default(),
        loss: LossKind::default(),
    };
    save_checkpoint(&model, &meta, &path).unwrap();
    let (back, m) = load_checkpoint::<f64>(&path).unwrap();
    assert_eq!(m, meta);
    assert_eq!(back.config, model.config);
    assert_eq!(back.params, model.params);

    let bytes = std::fs::read(&path).unwrap();
    let text = String::from_utf8_lossy(&bytes);
    assert!(text.starts_with("HEXSR-CHECKPOINT 1\n"));
    let names: Vec<_> = model.params.params.iter().map(|p| p.name.as_str()).collect();
    assert_eq!(&names[..4], ["head.w", "head.b", "dist.0.w", "dist.0.b"]);
    assert_eq!(&names[names.len() - 6..], ["up.0.w", "up.0.b", "up.1.w", "up.1.b", "out.w", "out.b"]);
    let sentinel = text.find("%%PARAMS%%\n").unwrap() + "%%PARAMS%%\n".len();
    assert_eq!(bytes.len() - sentinel, 8 * model.params.scalar_count());
    let first = f64::from_le_bytes(bytes[sentinel..sentinel + 8].try_into().unwrap());
    assert_eq!(first, model.params.params[0].data[0]);

    std::fs::write(&path, &bytes[..bytes.len() - 8]).unwrap();
    assert!(matches!(load_checkpoint::<f64>(&path), Err(Error::Checkpoint { .. })));
    std::fs::write(&path, b"not a checkpoint\n").unwrap();
    assert!(matches!(load_checkpoint::<f64>(&path), Err(Error::Checkpoint { .. })));
}

#[test]
fn single_precision_tracks_double() {
    let model = Restorer::<f64>::new(RestorerConfig::default(), 6).unwrap();
    let single = model.cast::<f32>();
    let (img, d) = (random_image(12, 10, 7), random_dist(12, 10, 8));
    let a = model.forward(&img, Some(&d)).unwrap();
    let b = single.forward(&img, Some(&d)).unwrap();
    let worst = a.data.iter().zip(b.data.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-2, "{worst}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn output_is_input_times_scale(
        groups in 1usize..3,
        blocks in 1usize..3,
        reduction in 1usize..3,
        c_mult in 1usize..4,
        scale in prop::sample::select(vec![2usize, 4]),
        dist in any::<bool>(),
        h in 3usize..9,
        w in 3usize..9,
        seed in 0u64..1000,
    ) {
        let cfg = RestorerConfig {
            groups,
            blocks_per_group: blocks,
            feature_channels: reduction * c_mult * 2,
            attention_reduction: reduction,
            scale,
            use_distance_head: dist,
        };
        let model = Restorer::<f64>::new(cfg, seed).unwrap();
        let d = random_dist(h, w, seed);
        let out = model.forward(&random_image(h, w, seed), dist.then_some(&d)).unwrap();
        prop_assert_eq!((out.channels(), out.height(), out.width()), (3, h * scale, w * scale));
        prop_assert!(out.data.iter().all(|v| v.is_finite()));
    }
}
