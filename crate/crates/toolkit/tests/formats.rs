use pair_core::simulation::{build_suite, synth_gold, GoldShape, Task};
use pair_core::trainer::{EpochStats, Hyper, Model};
use pair_toolkit::formats;
use proptest::prelude::*;

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        any::<f64>().prop_filter("finite", |v| v.is_finite()),
        Just(f64::MIN_POSITIVE / 3.0),
        Just(-0.0),
        Just(f64::MAX),
        -1e3f64..1e3,
    ]
}

fn model() -> impl Strategy<Value = Model> {
    (1usize..64).prop_flat_map(|dim| {
        (
            prop::collection::vec(finite(), dim),
            finite(),
            any::<u64>(),
            1u32..20,
            0.001f64..10.0,
            prop::collection::vec((finite(), finite(), prop::option::of(finite())), 0..4),
        )
            .prop_map(
                move |(weights, bias, seed, epochs, learning_rate, history)| Model {
                    hyper: Hyper {
                        epochs,
                        learning_rate,
                        hash_dim: dim,
                    },
                    seed,
                    bias,
                    weights,
                    selected_epoch: history.len() as u32,
                    history: history
                        .into_iter()
                        .enumerate()
                        .map(|(i, (running_loss, train_loss, dev_loss))| EpochStats {
                            epoch: i as u32 + 1,
                            running_loss,
                            train_loss,
                            dev_loss,
                        })
                        .collect(),
                },
            )
    })
}

fn bits(m: &Model) -> Vec<u64> {
    let mut out: Vec<u64> = m.weights.iter().map(|w| w.to_bits()).collect();
    out.push(m.bias.to_bits());
    out.push(m.hyper.learning_rate.to_bits());
    out
}

proptest! {
    #[test]
    fn model_file_round_trips_bit_exactly(m in model()) {
        let back = formats::model_from_str(&formats::model_to_string(&m)).unwrap();
        prop_assert_eq!(bits(&back), bits(&m));
        prop_assert_eq!(back.history.len(), m.history.len());
        for (a, b) in back.history.iter().zip(&m.history) {
            prop_assert_eq!(a.train_loss.to_bits(), b.train_loss.to_bits());
            prop_assert_eq!(a.dev_loss.map(f64::to_bits), b.dev_loss.map(f64::to_bits));
        }
    }
}

#[test]
fn model_file_rejects_foreign_or_inconsistent_content() {
    let m = Model::zero(Hyper {
        hash_dim: 4,
        ..Hyper::default()
    });
    let text = formats::model_to_string(&m);
    assert!(formats::model_from_str(&text.replace("pair-model", "other")).is_err());
    assert!(formats::model_from_str(&text.replace("\"version\":1", "\"version\":9")).is_err());
    assert!(formats::model_from_str(&text.replace("\"hash_dim\":4", "\"hash_dim\":5")).is_err());
    assert!(formats::model_from_str("not json").is_err());
}

#[test]
fn files_round_trip_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let gold = synth_gold(25, GoldShape::Uniform { lo: 0.0, hi: 1.0 }, 1).unwrap();
    let suite = build_suite(&gold, Task::HS, 0.15, 2).unwrap();

    let gold_path = dir.path().join("gold.jsonl");
    formats::save_gold(&gold, &gold_path).unwrap();
    assert_eq!(formats::load_gold(&gold_path).unwrap(), gold);

    let data_path = dir.path().join("nonrep2.jsonl");
    formats::save_dataset(&suite.nonrep2, &data_path).unwrap();
    assert_eq!(formats::load_dataset(&data_path).unwrap(), suite.nonrep2);
    let first = std::fs::read_to_string(&data_path).unwrap();
    formats::save_dataset(&suite.nonrep2, &data_path).unwrap();
    assert_eq!(std::fs::read_to_string(&data_path).unwrap(), first);

    let m = Model::zero(Hyper {
        hash_dim: 8,
        ..Hyper::default()
    });
    let model_path = dir.path().join("model.json");
    formats::save_model(&m, &model_path).unwrap();
    assert_eq!(formats::load_model(&model_path).unwrap(), m);
}
