#![allow(dead_code)]

pub mod checks;
pub mod oracle;

use faultexplain::dataset::EOS;
use faultexplain::featurizer::{empty_entity_token, MaskedInput, RAW_DIM};
use faultexplain::neural::{AttentionKeys, ModelConfig, ModelParams};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const VOCAB: usize = 11;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn small_config(keys: AttentionKeys) -> ModelConfig {
    ModelConfig {
        attention_keys: keys,
        init_scale: 0.5,
        ..ModelConfig::compact(4, 3, 3)
    }
}

/// A model whose biases are also random, so no gradient is trivially zero.
pub fn random_model(config: &ModelConfig, rng: &mut ChaCha8Rng) -> ModelParams<f64> {
    let mut p = ModelParams::init(config, VOCAB, rng).unwrap();
    for (_, t) in p.tensors_mut() {
        for x in t.data_mut() {
            if *x == 0.0 {
                *x = rng.gen_range(-0.3..0.3);
            }
        }
    }
    p
}

pub fn random_input(rng: &mut ChaCha8Rng) -> MaskedInput {
    let len = rng.gen_range(1..=4);
    let entity_tokens = if rng.gen_bool(0.15) {
        vec![empty_entity_token()]
    } else {
        (0..len).map(|_| rng.gen_range(0..empty_entity_token())).collect()
    };
    let mask: Vec<bool> = (0..RAW_DIM).map(|_| rng.gen_bool(0.75)).collect();
    let values = mask
        .iter()
        .map(|&m| if m { rng.gen_range(-2.0..2.0) } else { 0.0 })
        .collect();
    MaskedInput {
        values,
        mask,
        entity_tokens,
        object_token: rng.gen_range(0..5),
    }
}

pub fn random_target(rng: &mut ChaCha8Rng) -> Vec<usize> {
    let len = rng.gen_range(1..=5);
    let mut t: Vec<usize> = (0..len).map(|_| rng.gen_range(4..VOCAB)).collect();
    t.push(EOS);
    t
}
