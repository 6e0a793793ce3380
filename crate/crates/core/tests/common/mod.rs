//! Deterministic synthetic corpus shared by the integration tests.
#![allow(dead_code)]

use lcanet::corpus::{encode_all, random_embeddings, EncodedExample, Example, Polarity, Span, Vocabulary};
use lcanet::model::ModelConfig;
use lcanet::numeric::Tensor;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ASPECTS: &[&str] = &["battery", "screen", "food", "service", "keyboard", "price", "staff", "menu", "wine", "trackpad"];
const POSITIVE: &[&str] = &["great", "excellent", "good", "amazing", "superb"];
const NEGATIVE: &[&str] = &["bad", "terrible", "awful", "poor", "slow"];
const NEUTRAL: &[&str] = &["average", "okay", "standard", "typical"];
const FILLER: &[&str] = &["the", "a", "i", "think", "really", "this", "place", "overall", "honestly", "then"];

fn opinion(p: Polarity) -> &'static [&'static str] {
    match p {
        Polarity::Positive => POSITIVE,
        Polarity::Negative => NEGATIVE,
        Polarity::Neutral => NEUTRAL,
    }
}

/// Two clauses joined by "but": the target's own opinion word sits next to
/// it, a contrasting one sits in the other clause.
pub fn synthetic_examples(n: usize, seed: u64) -> Vec<Example> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let polarity = Polarity::ALL[i % 3];
            let other = Polarity::ALL[(i + 1 + rng.gen_range(0..2)) % 3];
            let mut aspects = ASPECTS.to_vec();
            aspects.shuffle(&mut rng);
            let clause = |rng: &mut ChaCha8Rng, aspect: &str, p: Polarity| {
                let mut c: Vec<String> = (0..rng.gen_range(0..3))
                    .map(|_| FILLER[rng.gen_range(0..FILLER.len())].to_string())
                    .collect();
                let start = c.len();
                c.extend(["the".into(), aspect.into(), "is".into()]);
                c.push(opinion(p)[rng.gen_range(0..opinion(p).len())].to_string());
                (c, start + 1)
            };
            let (mine, pos) = clause(&mut rng, aspects[0], polarity);
            let (theirs, _) = clause(&mut rng, aspects[1], other);
            let target_first = rng.gen_bool(0.5);
            let mut tokens = Vec::new();
            let target = if target_first {
                tokens.extend(mine);
                tokens.push("but".into());
                tokens.extend(theirs);
                pos
            } else {
                tokens.extend(theirs);
                tokens.push("but".into());
                let off = tokens.len();
                tokens.extend(mine);
                off + pos
            };
            tokens.push(".".into());
            Example::new(tokens, Span::new(target, target + 1), polarity).unwrap()
        })
        .collect()
}

pub struct Synthetic {
    pub vocab: Vocabulary,
    pub embedding: Tensor,
    pub train: Vec<EncodedExample>,
    pub test: Vec<EncodedExample>,
}

pub fn synthetic(config: &ModelConfig, n_train: usize, n_test: usize, seed: u64) -> Synthetic {
    let train = synthetic_examples(n_train, seed);
    let test = synthetic_examples(n_test, seed + 1000);
    let vocab = Vocabulary::build([train.as_slice(), test.as_slice()]);
    let embedding = random_embeddings(vocab.len(), config.embed_dim, seed);
    Synthetic {
        train: encode_all(&train, &vocab, config.pad_len).unwrap(),
        test: encode_all(&test, &vocab, config.pad_len).unwrap(),
        vocab,
        embedding,
    }
}

/// The small configuration used where only the mechanics matter.
pub fn miniature() -> ModelConfig {
    ModelConfig {
        d_h: 8,
        heads: 2,
        embed_dim: 6,
        pad_len: 16,
        alpha: 2,
        batch_size: 8,
        epochs: 3,
        ..Default::default()
    }
}
