use rand::distributions::{Distribution, Uniform};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::attention::{
    attend_backward, attend_cached, memory_backward, AttentionCache, AttentionParams, Memory,
};
use super::gru::{gru_backward, gru_forward, GruCache, GruParams};
use super::tensor::{argmax, log_softmax_at, softmax, Tensor};
use crate::dataset::{EOS, SOS};
use crate::error::{Error, Result};
use crate::featurizer::{empty_entity_token, MaskedInput, RAW_DIM};
use crate::scalar::Scalar;
use crate::sim::OBJECTS;

/// Which slots the decoder attends over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttentionKeys {
    /// Encoder states only.
    #[default]
    Encoder,
    /// Encoder states plus the initial decoder state.
    EncoderAndInitial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub entity_dim: usize,
    pub encoder_hidden: usize,
    pub object_dim: usize,
    /// Must equal `encoder_hidden + 12 + object_dim`.
    pub decoder_hidden: usize,
    pub word_dim: usize,
    pub attention_dim: usize,
    pub attention_keys: AttentionKeys,
    pub init_scale: f64,
    pub max_decode_len: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            entity_dim: 20,
            encoder_hidden: 20,
            object_dim: 17,
            decoder_hidden: 49,
            word_dim: 16,
            attention_dim: 20,
            attention_keys: AttentionKeys::Encoder,
            init_scale: 0.08,
            max_decode_len: 24,
        }
    }
}

impl ModelConfig {
    /// A small configuration with the decoder width derived from the others.
    pub fn compact(hidden: usize, object_dim: usize, word_dim: usize) -> Self {
        ModelConfig {
            entity_dim: hidden,
            encoder_hidden: hidden,
            object_dim,
            decoder_hidden: hidden + RAW_DIM + object_dim,
            word_dim,
            attention_dim: hidden,
            ..ModelConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("entity_dim", self.entity_dim),
            ("encoder_hidden", self.encoder_hidden),
            ("object_dim", self.object_dim),
            ("word_dim", self.word_dim),
            ("attention_dim", self.attention_dim),
            ("max_decode_len", self.max_decode_len),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("model.{name} must be positive")));
        }
        let want = self.encoder_hidden + RAW_DIM + self.object_dim;
        if self.decoder_hidden != want {
            return Err(Error::Config(format!(
                "model.decoder_hidden is {} but encoder_hidden + {RAW_DIM} + object_dim = {want}",
                self.decoder_hidden
            )));
        }
        if !(self.init_scale.is_finite() && self.init_scale > 0.0) {
            return Err(Error::Config("model.init_scale must be positive".into()));
        }
        Ok(())
    }
}

/// Learnable weights of the encoder–decoder network.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    pub config: ModelConfig,
    /// One row per catalog entity; the Empty token has no row and embeds to 0.
    pub entity_embed: Tensor<T>,
    pub object_embed: Tensor<T>,
    pub encoder: GruParams<T>,
    pub decoder: GruParams<T>,
    pub attention: AttentionParams<T>,
    pub out_w: Tensor<T>,
    pub out_b: Tensor<T>,
    pub word_embed: Tensor<T>,
}

fn is_bias(name: &str) -> bool {
    name.ends_with(".b_z") || name.ends_with(".b_r") || name.ends_with(".b_h") || name == "output.b"
}

impl<T: Scalar> ModelParams<T> {
    pub fn zeros(config: &ModelConfig, vocab_size: usize) -> Result<Self> {
        config.validate()?;
        if vocab_size <= EOS {
            return Err(Error::Config(format!("vocabulary of {vocab_size} tokens is too small")));
        }
        let c = config;
        Ok(ModelParams {
            config: c.clone(),
            entity_embed: Tensor::zeros(&[empty_entity_token(), c.entity_dim]),
            object_embed: Tensor::zeros(&[OBJECTS.len(), c.object_dim]),
            encoder: GruParams::zeros(c.entity_dim, c.encoder_hidden),
            decoder: GruParams::zeros(c.word_dim + c.encoder_hidden, c.decoder_hidden),
            attention: AttentionParams::zeros(
                c.decoder_hidden,
                c.encoder_hidden,
                c.attention_dim,
                c.attention_keys == AttentionKeys::EncoderAndInitial,
            ),
            out_w: Tensor::zeros(&[vocab_size, c.decoder_hidden]),
            out_b: Tensor::zeros(&[vocab_size]),
            word_embed: Tensor::zeros(&[vocab_size, c.word_dim]),
        })
    }

    /// Weights uniform in ±`init_scale`, biases zero. Draw order follows
    /// [`ModelParams::tensors`].
    pub fn init<R: Rng>(config: &ModelConfig, vocab_size: usize, rng: &mut R) -> Result<Self> {
        let mut p = Self::zeros(config, vocab_size)?;
        let dist = Uniform::new_inclusive(-config.init_scale, config.init_scale);
        for (name, t) in p.tensors_mut() {
            if is_bias(&name) {
                continue;
            }
            for x in t.data_mut() {
                *x = T::of(dist.sample(rng));
            }
        }
        Ok(p)
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.tensors_mut().into_iter().for_each(|(_, t)| t.fill(T::zero()));
        z
    }

    pub fn vocab_size(&self) -> usize {
        self.out_b.len()
    }

    /// Every tensor with its stable name, in a fixed order.
    pub fn tensors(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = vec![
            ("entity_embed".to_string(), &self.entity_embed),
            ("object_embed".to_string(), &self.object_embed),
        ];
        out.extend(self.encoder.named().map(|(n, t)| (format!("encoder.{n}"), t)));
        out.extend(self.decoder.named().map(|(n, t)| (format!("decoder.{n}"), t)));
        out.extend(self.attention.named().into_iter().map(|(n, t)| (format!("attention.{n}"), t)));
        out.push(("output.w".to_string(), &self.out_w));
        out.push(("output.b".to_string(), &self.out_b));
        out.push(("word_embed".to_string(), &self.word_embed));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut Tensor<T>)> {
        let mut out = vec![
            ("entity_embed".to_string(), &mut self.entity_embed),
            ("object_embed".to_string(), &mut self.object_embed),
        ];
        out.extend(self.encoder.named_mut().map(|(n, t)| (format!("encoder.{n}"), t)));
        out.extend(self.decoder.named_mut().map(|(n, t)| (format!("decoder.{n}"), t)));
        out.extend(self.attention.named_mut().into_iter().map(|(n, t)| (format!("attention.{n}"), t)));
        out.push(("output.w".to_string(), &mut self.out_w));
        out.push(("output.b".to_string(), &mut self.out_b));
        out.push(("word_embed".to_string(), &mut self.word_embed));
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    /// `self += k · other`.
    pub fn add_scaled(&mut self, other: &Self, k: T) {
        for ((_, a), (_, b)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (x, &y) in a.data_mut().iter_mut().zip(b.data()) {
                *x += k * y;
            }
        }
    }

    pub fn scale(&mut self, k: T) {
        self.tensors_mut().into_iter().for_each(|(_, t)| t.scale(k));
    }

    /// Name of the first tensor holding a NaN or infinity.
    pub fn first_non_finite(&self) -> Option<String> {
        self.tensors().into_iter().find(|(_, t)| !t.is_finite()).map(|(n, _)| n)
    }

    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        let mut out = ModelParams::<U>::zeros(&self.config, self.vocab_size()).expect("config already validated");
        for ((_, dst), (_, src)) in out.tensors_mut().into_iter().zip(self.tensors()) {
            *dst = src.cast();
        }
        out
    }

    fn embed_entity(&self, token: usize) -> Result<Vec<T>> {
        let rows = self.entity_embed.rows();
        match token {
            t if t < rows => Ok(self.entity_embed.row(t).to_vec()),
            t if t == rows => Ok(vec![T::zero(); self.config.entity_dim]),
            t => Err(Error::Usage(format!("entity token {t} is out of range"))),
        }
    }

    fn check_word(&self, id: usize) -> Result<()> {
        if id >= self.vocab_size() {
            return Err(Error::Usage(format!("word id {id} is out of range")));
        }
        Ok(())
    }

    /// Runs the encoder over entity tokens. Returns one cache per step; the
    /// hidden states are the caches' `h`.
    pub fn encode(&self, tokens: &[usize]) -> Result<Vec<GruCache<T>>> {
        if tokens.is_empty() {
            return Err(Error::Usage("encoder input is empty; use the Empty token".into()));
        }
        let mut h = vec![T::zero(); self.config.encoder_hidden];
        let mut out = Vec::with_capacity(tokens.len());
        for &tok in tokens {
            let c = gru_forward(&self.embed_entity(tok)?, &h, &self.encoder);
            h = c.h.clone();
            out.push(c);
        }
        Ok(out)
    }

    /// `s0 = [h_final, raw ⊙ mask, object embedding]`.
    pub fn init_decoder_state(&self, h_final: &[T], raw: &[T], mask: &[bool], object: usize) -> Result<Vec<T>> {
        let c = &self.config;
        if h_final.len() != c.encoder_hidden || raw.len() != RAW_DIM || mask.len() != RAW_DIM {
            return Err(Error::Shape(format!(
                "decoder state parts have lengths {}, {}, {}; expected {}, {RAW_DIM}, {RAW_DIM}",
                h_final.len(),
                raw.len(),
                mask.len(),
                c.encoder_hidden
            )));
        }
        if object >= self.object_embed.rows() {
            return Err(Error::Usage(format!("object token {object} is out of range")));
        }
        let mut s0 = h_final.to_vec();
        s0.extend(raw.iter().zip(mask).map(|(&v, &m)| if m { v } else { T::zero() }));
        s0.extend_from_slice(self.object_embed.row(object));
        Ok(s0)
    }

    /// One decoder step: attention, GRU update, output logits.
    pub fn decode_step(&self, s_prev: &[T], y_prev: usize, mem: &Memory<T>) -> Result<StepCache<T>> {
        self.check_word(y_prev)?;
        let attn = attend_cached(s_prev, mem, &self.attention);
        let mut x = self.word_embed.row(y_prev).to_vec();
        x.extend_from_slice(&attn.context);
        let gru = gru_forward(&x, s_prev, &self.decoder);
        let mut logits = self.out_w.matvec(&gru.h);
        for (l, &b) in logits.iter_mut().zip(self.out_b.data()) {
            *l += b;
        }
        Ok(StepCache {
            y_prev,
            attn,
            gru,
            logits,
        })
    }

    fn prepare(&self, input: &MaskedInput) -> Result<(Vec<GruCache<T>>, Vec<Vec<T>>, Vec<T>, Memory<T>)> {
        let enc = self.encode(&input.entity_tokens)?;
        let h: Vec<Vec<T>> = enc.iter().map(|c| c.h.clone()).collect();
        let raw: Vec<T> = input.values.iter().map(|&v| T::of(v)).collect();
        let s0 = self.init_decoder_state(&h[h.len() - 1], &raw, &input.mask, input.object_token)?;
        let mem = Memory::new(&h, &s0, &self.attention);
        Ok((enc, h, s0, mem))
    }

    /// Teacher-forced mean cross-entropy of `target` (which must end in
    /// `<eos>`), plus everything the backward pass needs.
    pub fn forward_loss(&self, input: &MaskedInput, target: &[usize]) -> Result<(T, ForwardCache<T>)> {
        if target.last() != Some(&EOS) {
            return Err(Error::Usage("target must end with <eos>".into()));
        }
        for &y in target {
            self.check_word(y)?;
        }
        let (enc, h, s0, mem) = self.prepare(input)?;
        let mut steps = Vec::with_capacity(target.len());
        let mut s = s0.clone();
        let mut y_prev = SOS;
        let mut total = T::zero();
        for &y in target {
            let step = self.decode_step(&s, y_prev, &mem)?;
            total -= log_softmax_at(&step.logits, y);
            s = step.gru.h.clone();
            y_prev = y;
            steps.push(step);
        }
        let loss = total / T::of(target.len() as f64);
        if !loss.is_finite() {
            return Err(Error::NonFinite("loss".into()));
        }
        let cache = ForwardCache {
            tokens: input.entity_tokens.clone(),
            object: input.object_token,
            mask: input.mask.clone(),
            target: target.to_vec(),
            enc,
            h,
            s0,
            mem,
            steps,
        };
        Ok((loss, cache))
    }

    pub fn loss(&self, input: &MaskedInput, target: &[usize]) -> Result<T> {
        self.forward_loss(input, target).map(|(l, _)| l)
    }

    /// Exact gradient of the mean cross-entropy with respect to every
    /// parameter and to the raw feature block.
    pub fn backward(&self, cache: &ForwardCache<T>) -> Gradients<T> {
        let cfg = &self.config;
        let mut g = self.zeros_like();
        let n = T::of(cache.steps.len() as f64);
        let mut dmem = cache.mem.zeros_like();
        let mut ds = vec![T::zero(); cfg.decoder_hidden];

        for (step, &y) in cache.steps.iter().zip(&cache.target).rev() {
            let mut dlogits = softmax(&step.logits);
            dlogits[y] -= T::one();
            dlogits.iter_mut().for_each(|d| *d /= n);

            g.out_w.outer_acc(&dlogits, &step.gru.h);
            for (b, &d) in g.out_b.data_mut().iter_mut().zip(&dlogits) {
                *b += d;
            }
            self.out_w.matvec_t_acc(&dlogits, &mut ds);

            let mut dx = vec![T::zero(); cfg.word_dim + cfg.encoder_hidden];
            let mut ds_prev = vec![T::zero(); cfg.decoder_hidden];
            gru_backward(&step.gru, &ds, &self.decoder, &mut g.decoder, &mut dx, &mut ds_prev);

            for (w, &d) in g.word_embed.row_mut(step.y_prev).iter_mut().zip(&dx[..cfg.word_dim]) {
                *w += d;
            }
            attend_backward(
                &step.attn,
                &cache.mem,
                &dx[cfg.word_dim..],
                &self.attention,
                &mut g.attention,
                &mut ds_prev,
                &mut dmem,
            );
            ds = ds_prev;
        }

        // `ds` now holds the gradient at s0.
        let mut dh: Vec<Vec<T>> = cache.h.iter().map(|h| vec![T::zero(); h.len()]).collect();
        memory_backward(&dmem, &cache.h, &cache.s0, &self.attention, &mut g.attention, &mut dh, &mut ds);

        let e = cfg.encoder_hidden;
        let raw: Vec<T> = ds[e..e + RAW_DIM]
            .iter()
            .zip(&cache.mask)
            .map(|(&d, &m)| if m { d } else { T::zero() })
            .collect();
        for (o, &d) in g.object_embed.row_mut(cache.object).iter_mut().zip(&ds[e + RAW_DIM..]) {
            *o += d;
        }

        let last = dh.len() - 1;
        for (d, &x) in dh[last].iter_mut().zip(&ds[..e]) {
            *d += x;
        }
        let mut carry = vec![T::zero(); e];
        for (j, c) in cache.enc.iter().enumerate().rev() {
            let dhj: Vec<T> = dh[j].iter().zip(&carry).map(|(&a, &b)| a + b).collect();
            let mut dx = vec![T::zero(); cfg.entity_dim];
            let mut dprev = vec![T::zero(); e];
            gru_backward(c, &dhj, &self.encoder, &mut g.encoder, &mut dx, &mut dprev);
            let tok = cache.tokens[j];
            if tok < g.entity_embed.rows() {
                for (w, &d) in g.entity_embed.row_mut(tok).iter_mut().zip(&dx) {
                    *w += d;
                }
            }
            carry = dprev;
        }
        Gradients { params: g, raw }
    }

    /// Loss and gradients in one call.
    pub fn loss_and_grad(&self, input: &MaskedInput, target: &[usize]) -> Result<(T, Gradients<T>)> {
        let (loss, cache) = self.forward_loss(input, target)?;
        Ok((loss, self.backward(&cache)))
    }

    /// Most-probable word at each step until `<eos>` or `max_len` steps.
    /// The returned ids exclude `<eos>`.
    pub fn greedy_decode(&self, input: &MaskedInput, max_len: usize) -> Result<Vec<usize>> {
        let (_, _, s0, mem) = self.prepare(input)?;
        let mut s = s0;
        let mut y = SOS;
        let mut out = Vec::new();
        for _ in 0..max_len {
            let step = self.decode_step(&s, y, &mem)?;
            y = argmax(&step.logits);
            if y == EOS {
                break;
            }
            out.push(y);
            s = step.gru.h;
        }
        Ok(out)
    }
}

#[derive(Debug, Clone)]
pub struct StepCache<T> {
    pub y_prev: usize,
    pub attn: AttentionCache<T>,
    pub gru: GruCache<T>,
    pub logits: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    pub tokens: Vec<usize>,
    pub object: usize,
    pub mask: Vec<bool>,
    pub target: Vec<usize>,
    pub enc: Vec<GruCache<T>>,
    pub h: Vec<Vec<T>>,
    pub s0: Vec<T>,
    pub mem: Memory<T>,
    pub steps: Vec<StepCache<T>>,
}

/// Parameter gradients plus the gradient with respect to the raw feature
/// block (zero on masked slots).
#[derive(Debug, Clone)]
pub struct Gradients<T> {
    pub params: ModelParams<T>,
    pub raw: Vec<T>,
}
