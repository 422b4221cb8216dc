use efignn::model::{predict, ModelConfig};
use efignn::train::{evaluate_accuracy, train, TrainConfig, TrainReport};
use efignn::verify::{model_variants, toy_dataset};
use efignn::{CsrMat, Dataset};

fn run<T: efignn::Scalar>(
    ds: &Dataset,
    cfg: &ModelConfig,
    seed: u64,
) -> (TrainReport, efignn::model::ModelParams<T>) {
    let adj = ds.adjacency().unwrap().cast::<T>();
    let x = CsrMat::from_dense(&ds.features).cast::<T>();
    let tc = TrainConfig {
        learning_rate: 0.01,
        epochs: 60,
        seed,
        ..Default::default()
    };
    train(&adj, &x, &ds.labels, &ds.masks, cfg, &tc).unwrap()
}

#[test]
fn seeded_f64_runs_are_bitwise_identical() {
    let ds = toy_dataset();
    for (name, cfg) in model_variants(5, 2) {
        let (a, pa) = run::<f64>(&ds, &cfg, 7);
        let (b, pb) = run::<f64>(&ds, &cfg, 7);
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap(),
            "{name}"
        );
        for ((_, x), (_, y)) in pa.tensors().into_iter().zip(pb.tensors()) {
            assert!(x
                .as_slice()
                .iter()
                .zip(y.as_slice())
                .all(|(p, q)| p.to_bits() == q.to_bits()));
        }
    }
}

#[test]
fn reports_are_consistent() {
    let ds = toy_dataset();
    for seed in 0..4 {
        for (name, cfg) in model_variants(5, 2) {
            let (r, params) = run::<f64>(&ds, &cfg, seed);
            assert_eq!(r.history.len(), 60);
            assert!(r.history.iter().all(|e| e.loss.is_finite()), "{name}");
            assert!(r.best_val_acc >= r.final_val_acc, "{name}");
            let adj = ds.adjacency().unwrap();
            let logits = predict(&adj, &CsrMat::from_dense(&ds.features), &params, &cfg).unwrap();
            assert_eq!(
                evaluate_accuracy(&logits, &ds.labels, &ds.masks.val).unwrap(),
                r.best_val_acc
            );
            assert_eq!(
                evaluate_accuracy(&logits, &ds.labels, &ds.masks.test).unwrap(),
                r.best_test_acc
            );
        }
    }
}

#[test]
fn single_precision_training_runs() {
    let ds = toy_dataset();
    for (name, cfg) in model_variants(5, 2) {
        let (r, _) = run::<f32>(&ds, &cfg, 3);
        assert!(r.history.iter().all(|e| e.loss.is_finite()), "{name}");
        assert!(r.history.last().unwrap().loss < r.history[0].loss, "{name}");
    }
}
