mod common;

use lcanet::evaluation::{export_attention, run_ablation, sigma_sweep, Experiment, Variant};
use lcanet::model::ModelConfig;
use lcanet::training::train;
use lcanet::Error;

fn experiment(data: &common::Synthetic) -> Experiment<'_> {
    Experiment {
        vocab: &data.vocab,
        embedding: &data.embedding,
        train: &data.train,
        test: &data.test,
    }
}

#[test]
fn ablation_trains_each_variant() {
    let config = ModelConfig {
        epochs: 2,
        ..common::miniature()
    };
    let data = common::synthetic(&config, 16, 9, 51);
    let rows = run_ablation(&config, &experiment(&data), &Variant::ALL).unwrap();
    assert_eq!(rows.iter().map(|r| r.variant).collect::<Vec<_>>(), Variant::ALL);
    for r in &rows {
        assert_eq!(r.metrics.examples(), 9);
        assert_eq!(r.report.seed, config.seed);
    }
    assert!(rows[2].report.epochs.iter().all(|e| e.lcp_loss.is_none()));
    // same seed, same data order: the full variant reproduces a plain train run
    let (ckpt, _) = train(&config, &data.vocab, data.embedding.clone(), &data.train, Some(&data.test)).unwrap();
    assert_eq!(ckpt.metrics.as_ref(), Some(&rows[0].metrics));
}

#[test]
fn sweep_reports_each_sigma() {
    let config = ModelConfig {
        epochs: 2,
        ..common::miniature()
    };
    let data = common::synthetic(&config, 16, 9, 52);
    let curve = sigma_sweep(&config, &experiment(&data), &[0.0, 0.5, 1.0]).unwrap();
    assert_eq!(curve.iter().map(|p| p.sigma).collect::<Vec<_>>(), [0.0, 0.5, 1.0]);
    assert!(curve.iter().all(|p| (0.0..=1.0).contains(&p.accuracy) && (0.0..=1.0).contains(&p.macro_f1)));
    assert!(matches!(
        sigma_sweep(&config, &experiment(&data), &[0.2, 1.5]),
        Err(Error::Config(_))
    ));
}

#[test]
fn attention_export_has_one_row_per_token() {
    let config = ModelConfig {
        epochs: 1,
        ..common::miniature()
    };
    let data = common::synthetic(&config, 8, 1, 53);
    let (ckpt, _) = train(&config, &data.vocab, data.embedding.clone(), &data.train, None).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("att.csv");
    let sentence = "the battery is great but the screen is bad .";
    let p = export_attention(&ckpt, sentence, "battery", &path).unwrap();

    let mut reader = csv::Reader::from_path(&path).unwrap();
    assert_eq!(reader.headers().unwrap(), vec!["token", "gold_tag", "pred_tag", "attention"]);
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 10);
    assert_eq!(rows.len(), p.tokens.len());
    assert_eq!(&rows[1][0], "battery");
    assert_eq!(&rows[1][1], "1");
    let total: f64 = rows.iter().map(|r| r[3].parse::<f64>().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-9);

    assert!(matches!(
        export_attention(&ckpt, sentence, "keyboard", &path),
        Err(Error::Lookup(_))
    ));
}
