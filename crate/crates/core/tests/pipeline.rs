use std::fs;

use deligan::checkpoint::{self, GanCheckpoint};
use deligan::data::{
    load_mnist_idx, sample_toy, subset_balanced, write_idx_images, write_idx_labels, IdxImages,
    ToySpec,
};
use deligan::gan::{build_variant, train, ArchConfig, TrainConfig, Variant};
use deligan::latent::Batching;
use deligan::rng::Streams;
use deligan::Error;
use tempfile::TempDir;

fn short_run(variant: Variant, seed: u64) -> (deligan::GanModel, Vec<u8>) {
    let streams = Streams::new(seed);
    let data = sample_toy::<f64>(&ToySpec::bimodal(), 300, &mut streams.stream("dataset")).unwrap();
    let arch = ArchConfig {
        components: 6,
        ..ArchConfig::default()
    };
    let model = build_variant::<f64>(variant, &arch, &mut streams.stream("init")).unwrap();
    let cfg = TrainConfig {
        iterations: 40,
        batch: 16,
        ..TrainConfig::default()
    };
    let (model, history) = train(model, &data, &cfg, &streams).unwrap();
    let mut csv = Vec::new();
    history.write_csv(&mut csv).unwrap();
    (model, csv)
}

#[test]
fn idx_files_load_scaled_and_subset_by_class() {
    let t = TempDir::new().unwrap();
    let count = 30;
    let pixels: Vec<u8> = (0..count * 4).map(|i| (i * 37 % 256) as u8).collect();
    let labels: Vec<u8> = (0..count).map(|i| (i % 3) as u8).collect();
    let images = IdxImages {
        count,
        rows: 2,
        cols: 2,
        pixels: pixels.clone(),
    };
    let (ip, lp) = (t.path().join("img"), t.path().join("lbl"));
    fs::write(&ip, write_idx_images(&images)).unwrap();
    fs::write(&lp, write_idx_labels(&labels)).unwrap();

    let d = load_mnist_idx::<f64>(&ip, &lp).unwrap();
    assert_eq!((d.len(), d.dim()), (count, 4));
    assert_eq!(d.samples.get(0, 0), -1.0);
    for (i, &p) in pixels.iter().enumerate() {
        let v = d.samples.data()[i];
        assert!((-1.0..=1.0).contains(&v));
        assert_eq!(((v + 1.0) * 127.5).round() as u8, p);
    }

    let sub = subset_balanced(&d, 4, &mut Streams::new(1).stream("dataset")).unwrap();
    let got = sub.labels.as_ref().unwrap();
    assert_eq!(got.len(), 12);
    for c in 0..3 {
        assert_eq!(got.iter().filter(|&&l| l == c).count(), 4);
    }
    assert!(subset_balanced(&d, 11, &mut Streams::new(1).stream("dataset")).is_err());

    fs::write(&lp, write_idx_labels(&labels[..count - 1])).unwrap();
    assert!(matches!(
        load_mnist_idx::<f64>(&ip, &lp),
        Err(Error::Length(_))
    ));
}

#[test]
fn trained_models_round_trip_through_checkpoints() {
    let t = TempDir::new().unwrap();
    for v in Variant::ALL {
        let (model, _) = short_run(v, 4);
        let path = t.path().join(format!("{v}.json"));
        checkpoint::save(&GanCheckpoint::from_model(&model), &path).unwrap();
        let back: GanCheckpoint = checkpoint::load(&path).unwrap();
        let restored = back.to_model::<f64>().unwrap();
        assert_eq!(
            restored.generator_snapshot(),
            model.generator_snapshot(),
            "{v}"
        );
        let a = model
            .sample(50, Batching::Uniform, &mut Streams::new(9).stream("latent"))
            .unwrap();
        let b = restored
            .sample(50, Batching::Uniform, &mut Streams::new(9).stream("latent"))
            .unwrap();
        assert_eq!(a, b, "{v}");
    }
}

#[test]
fn seeds_fix_histories() {
    let (_, a) = short_run(Variant::Deligan, 11);
    let (_, b) = short_run(Variant::Deligan, 11);
    let (_, c) = short_run(Variant::Deligan, 12);
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 41);
}
