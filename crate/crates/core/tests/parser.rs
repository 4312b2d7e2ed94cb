use std::sync::OnceLock;

use proptest::prelude::*;
use tbvec::conllu::{validate_tree, Sentence, Token};
use tbvec::eval::synth::{default_suite, generate_synthetic_suite, SuiteSpec};
use tbvec::parser::io::FORMAT_VERSION;
use tbvec::parser::{train, ParserConfig, ParserModel, Params, TransitionSystem, TrainingTreebank};
use tbvec::weights::{corner, generate_grid, WeightVector};
use tbvec::Error;

fn small_suite() -> SuiteSpec {
    SuiteSpec {
        train: 40,
        dev: 15,
        test: 15,
        ..default_suite()
    }
}

fn small_config() -> ParserConfig {
    ParserConfig {
        word_dim: 8,
        char_dim: 4,
        rnn_dim: 6,
        tb_dim: 3,
        hidden: 12,
        epochs: 3,
        ..ParserConfig::default()
    }
}

fn training(spec: &SuiteSpec) -> Vec<TrainingTreebank> {
    generate_synthetic_suite(spec)
        .unwrap()
        .into_iter()
        .take(3)
        .map(|t| TrainingTreebank {
            name: t.name.clone(),
            sentences: t.split("train").to_vec(),
        })
        .collect()
}

fn model() -> &'static ParserModel {
    static MODEL: OnceLock<ParserModel> = OnceLock::new();
    MODEL.get_or_init(|| train(small_config(), &training(&small_suite()), 5).unwrap().0)
}

fn tiny_model() -> (ParserModel, Vec<Sentence>) {
    let config = ParserConfig {
        word_dim: 3,
        char_dim: 2,
        rnn_dim: 3,
        tb_dim: 2,
        hidden: 4,
        epochs: 2,
        word_dropout: 0.0,
        ..ParserConfig::default()
    };
    let data = training(&SuiteSpec {
        train: 6,
        ..small_suite()
    });
    let batch: Vec<Sentence> = data.iter().map(|t| t.sentences[0].clone()).collect();
    (train(config, &data, 11).unwrap().0, batch)
}

/// Central differences using the exact `f32` perturbation actually applied.
#[test]
fn gradients_match_finite_differences() {
    let (model, batch) = tiny_model();
    let data: Vec<(usize, &Sentence)> = batch.iter().enumerate().map(|(i, s)| (i + 1, s)).collect();
    let (_, analytic) = model.loss_and_gradient(&data).unwrap();
    let h = 1e-4f64;
    let mut worst = 0.0f64;
    let mut checked = 0;
    for (tensor, name) in Params::<f32>::NAMES.iter().enumerate() {
        let len = model.params.tensors()[tensor].len();
        for i in 0..len {
            let original = model.params.tensors()[tensor][i];
            let plus = (original as f64 + h) as f32;
            let minus = (original as f64 - h) as f32;
            let mut perturbed = model.clone();
            perturbed.params.tensors_mut()[tensor][i] = plus;
            let lp = perturbed.loss(&data).unwrap();
            perturbed.params.tensors_mut()[tensor][i] = minus;
            let lm = perturbed.loss(&data).unwrap();
            let numeric = (lp - lm) / (plus as f64 - minus as f64);
            let a = analytic.tensors()[tensor][i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-5);
            assert!(rel <= 1e-4, "{name}[{i}]: analytic {a} numeric {numeric} rel {rel}");
            worst = worst.max(rel);
            checked += 1;
        }
    }
    assert!(checked > 100);
    println!("checked {checked} parameters, worst relative error {worst:e}");
}

#[test]
fn same_seed_gives_identical_bytes() {
    let data = training(&small_suite());
    let a = train(small_config(), &data, 9).unwrap().0.to_bytes();
    let b = train(small_config(), &data, 9).unwrap().0.to_bytes();
    assert_eq!(a, b);
    let c = train(small_config(), &data, 10).unwrap().0.to_bytes();
    assert_ne!(a, c);
}

#[test]
fn model_file_round_trip() {
    let m = model();
    let bytes = m.to_bytes();
    let back = ParserModel::from_bytes(&bytes).unwrap();
    assert_eq!(&back, m);
    assert_eq!(back.to_bytes(), bytes);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.bin");
    std::fs::write(&path, &bytes).unwrap();
    assert_eq!(&ParserModel::load(&path).unwrap(), m);

    let mut wrong = bytes.clone();
    wrong[8..12].copy_from_slice(&(FORMAT_VERSION + 1).to_le_bytes());
    assert!(matches!(
        ParserModel::from_bytes(&wrong),
        Err(Error::ModelVersion { found, expected }) if found == FORMAT_VERSION + 1 && expected == FORMAT_VERSION
    ));
    assert!(matches!(ParserModel::from_bytes(b"NOTAMODEL"), Err(Error::ModelFormat(_))));
    assert!(ParserModel::from_bytes(&bytes[..bytes.len() - 1]).is_err());
}

#[test]
fn corner_equals_fixed_row() {
    let m = model();
    let suite = generate_synthetic_suite(&small_suite()).unwrap();
    for t in 1..=m.m() {
        let row = m.tb_row(t).unwrap();
        let interpolated = m.interpolate_tbvec(&corner(t, m.m()).unwrap()).unwrap();
        assert_eq!(row, interpolated);
        for s in suite[t - 1].split("dev") {
            let prepared = m.prepare(s);
            assert_eq!(
                m.parse_prepared(&prepared, &corner(t, m.m()).unwrap()).unwrap(),
                m.parse_with_tbvec(&prepared, &row).unwrap()
            );
        }
    }
    assert!(matches!(m.tb_row(0), Err(Error::TreebankOutOfRange { .. })));
    assert!(matches!(m.tb_row(4), Err(Error::TreebankOutOfRange { index: 4, m: 3 })));
}

#[test]
fn encoding_ends_with_treebank_vector() {
    let m = model();
    let tb = m.interpolate_tbvec(&WeightVector::new(vec![1.5, -0.25, -0.25]).unwrap()).unwrap();
    let enc = m.encode_token(&Token::new(1, "bodoan"), &tb).unwrap();
    assert_eq!(enc.len(), m.config.token_dim());
    assert_eq!(&enc[enc.len() - tb.len()..], &tb[..]);
    let unseen = m.encode_token(&Token::new(1, "qqqq"), &tb).unwrap();
    assert_eq!(unseen.len(), m.config.token_dim());
    assert!(m.encode_token(&Token::new(1, "x"), &tb[..1]).is_err());
    assert!(m.interpolate_tbvec(&WeightVector::new(vec![0.5, 0.5]).unwrap()).is_err());
}

#[test]
fn weight_points_change_some_trees() {
    let m = model();
    let suite = generate_synthetic_suite(&small_suite()).unwrap();
    let grid = generate_grid(3, 0.5, 0.5).unwrap();
    let dev = suite[3].split("dev");
    let differs = grid.points().iter().any(|p| {
        dev.iter().any(|s| {
            m.parse(s, &p.weights).unwrap() != m.parse(s, &corner(1, 3).unwrap()).unwrap()
        })
    });
    assert!(differs);
}

#[test]
fn training_rejects_bad_input() {
    assert!(matches!(train(small_config(), &[], 1), Err(Error::EmptyTrainingData)));
    let bad = Sentence::new(
        "bad",
        vec![Token::new(1, "a").with_dep(2, "x"), Token::new(2, "b").with_dep(1, "y")],
        None,
    );
    let data = [TrainingTreebank {
        name: "T".into(),
        sentences: vec![bad],
    }];
    assert!(matches!(train(small_config(), &data, 1), Err(Error::InvalidTree { .. })));
    let config = ParserConfig {
        learning_rate: 0.0,
        ..small_config()
    };
    assert!(matches!(train(config, &training(&small_suite()), 1), Err(Error::Config(_))));
}

#[test]
fn arc_standard_trains_too() {
    let config = ParserConfig {
        system: TransitionSystem::ArcStandard,
        ..small_config()
    };
    let (m, report) = train(config, &training(&small_suite()), 2).unwrap();
    assert!(report.epoch_losses.last() < report.epoch_losses.first());
    let suite = generate_synthetic_suite(&small_suite()).unwrap();
    let s = &suite[0].split("dev")[0];
    let parse = m.parse(s, &corner(1, 3).unwrap()).unwrap();
    let predicted = s.with_annotation(&parse.heads, &parse.deprels).unwrap();
    assert!(validate_tree(&predicted).is_ok());
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 64,
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    /// Any input and any weight vector yields a single-rooted tree.
    #[test]
    fn parses_are_trees(
        forms in prop::collection::vec("[a-z]{1,6}|[.!]", 1..12),
        a in -1.0f64..2.0,
        b in -1.0f64..2.0,
    ) {
        let m = model();
        let tokens = forms.iter().enumerate().map(|(i, f)| Token::new(i + 1, f.as_str())).collect();
        let s = Sentence::new("p", tokens, None);
        let w = WeightVector::new(vec![a, b, 1.0 - a - b]).unwrap();
        let parse = m.parse(&s, &w).unwrap();
        let annotated = s.with_annotation(&parse.heads, &parse.deprels).unwrap();
        prop_assert!(validate_tree(&annotated).is_ok());
        prop_assert_eq!(parse.heads.iter().filter(|&&h| h == 0).count(), 1);
    }
}
