use lipgen::checkpoint;
use lipgen::config::{ExperimentConfig, Override};
use lipgen::core::lexicon::parse_pronouncing_dictionary;
use lipgen::core::model::{ModelConfig, ModelState};
use proptest::prelude::*;
use serde_json::json;

const PHONEMES: &[&str] = &["AA1", "AE0", "B", "CH", "D", "EH2", "F", "JH", "K", "M", "OW1", "P", "S", "T", "UW0"];

fn dictionary_entry() -> impl Strategy<Value = (String, Vec<Vec<String>>)> {
    let pron = prop::collection::vec(prop::sample::select(PHONEMES).prop_map(String::from), 1..6);
    ("[A-Z][A-Z']{0,7}", prop::collection::vec(pron, 1..3))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn checkpoints_round_trip_exactly(seed in any::<u64>(), values in prop::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 8)) {
        let config = ModelConfig { hidden_dim: 4, word_classes: 3, ..ModelConfig::default() };
        let mut state = ModelState::init(&config, seed).unwrap();
        for (p, v) in state.parameters.iter_mut().zip(&values) {
            p.value.data_mut()[0] = *v;
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt.json");
        checkpoint::save_checkpoint(&path, &state, &config).unwrap();
        let (loaded, loaded_config) = checkpoint::load_checkpoint(&path).unwrap();
        prop_assert_eq!(&loaded_config, &config);
        for (a, b) in state.parameters.iter().zip(&loaded.parameters) {
            prop_assert_eq!(&a.name, &b.name);
            let same = a.value.data().iter().zip(b.value.data()).all(|(x, y)| x.to_bits() == y.to_bits());
            prop_assert!(same, "{} changed", a.name);
        }
        prop_assert_eq!(checkpoint::checkpoint_bytes(&state, &config), std::fs::read(&path).unwrap());
    }

    #[test]
    fn dictionary_text_round_trips(entries in prop::collection::btree_map("[A-Z][A-Z']{0,7}", dictionary_entry().prop_map(|e| e.1), 1..20)) {
        let mut text = String::new();
        for (word, prons) in &entries {
            for (i, p) in prons.iter().enumerate() {
                let head = if i == 0 { word.clone() } else { format!("{word}({})", i + 1) };
                text.push_str(&format!("{head}  {}\n", p.join(" ")));
            }
        }
        let lex = parse_pronouncing_dictionary(&text).unwrap();
        prop_assert_eq!(lex.len(), entries.len());
        for (word, prons) in &entries {
            prop_assert_eq!(lex.variants(word).unwrap(), prons.as_slice());
        }
        let again = parse_pronouncing_dictionary(&lex.to_dictionary_text()).unwrap();
        prop_assert_eq!(again, lex);
    }

    #[test]
    fn config_hash_tracks_settings_not_paths(lambda in 0.0f64..1.0, epochs in 1usize..50, dir in "[a-z]{1,8}") {
        let base = ExperimentConfig::default();
        let moved = base.with_overrides(&[Override::new("paths.corpus_dir", json!(dir))]).unwrap();
        prop_assert_eq!(base.hash(), moved.hash());
        let changed = base
            .with_overrides(&[Override::new("model.tafm.lambda", json!(lambda)), Override::new("train.epochs", json!(epochs))])
            .unwrap();
        let json = serde_json::to_string(&changed).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(back.hash(), changed.hash());
        prop_assert_eq!(changed.hash() == base.hash(), lambda == 0.1 && epochs == base.train.epochs);
    }
}
