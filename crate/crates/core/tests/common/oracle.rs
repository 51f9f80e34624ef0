//! Straight-line reference implementation of the network, reading weights
//! by name. Shares no code with the library's forward pass.

use std::collections::HashMap;

use faultexplain::dataset::{EOS, SOS};
use faultexplain::featurizer::{MaskedInput, RAW_DIM};
use faultexplain::neural::ModelParams;

pub struct W {
    pub m: HashMap<String, (Vec<usize>, Vec<f64>)>,
}

impl W {
    pub fn of(p: &ModelParams<f64>) -> Self {
        let m = p
            .tensors()
            .into_iter()
            .map(|(n, t)| (n, (t.shape().to_vec(), t.data().to_vec())))
            .collect();
        W { m }
    }

    fn has(&self, name: &str) -> bool {
        self.m.contains_key(name)
    }

    fn at(&self, name: &str, i: usize, j: usize) -> f64 {
        let (shape, data) = &self.m[name];
        data[i * shape[1] + j]
    }

    pub fn vec(&self, name: &str, i: usize) -> f64 {
        self.m[name].1[i]
    }

    fn rows(&self, name: &str) -> usize {
        self.m[name].0[0]
    }

    /// y = W x (+ U h) (+ b), written out with explicit indices.
    pub fn lin(&self, w: &str, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.rows(w)];
        for (i, yi) in y.iter_mut().enumerate() {
            for (j, xj) in x.iter().enumerate() {
                *yi += self.at(w, i, j) * xj;
            }
        }
        y
    }
}

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn gru(w: &W, pre: &str, x: &[f64], h: &[f64]) -> Vec<f64> {
    let n = h.len();
    let (wz, uz) = (w.lin(&format!("{pre}.w_z"), x), w.lin(&format!("{pre}.u_z"), h));
    let (wr, ur) = (w.lin(&format!("{pre}.w_r"), x), w.lin(&format!("{pre}.u_r"), h));
    let mut out = vec![0.0; n];
    let mut rh = vec![0.0; n];
    let mut z = vec![0.0; n];
    for i in 0..n {
        z[i] = sig(wz[i] + uz[i] + w.vec(&format!("{pre}.b_z"), i));
        let r = sig(wr[i] + ur[i] + w.vec(&format!("{pre}.b_r"), i));
        rh[i] = r * h[i];
    }
    let (wh, uh) = (w.lin(&format!("{pre}.w_h"), x), w.lin(&format!("{pre}.u_h"), &rh));
    for i in 0..n {
        let cand = (wh[i] + uh[i] + w.vec(&format!("{pre}.b_h"), i)).tanh();
        out[i] = (1.0 - z[i]) * h[i] + z[i] * cand;
    }
    out
}

pub fn oracle_loss(w: &W, input: &MaskedInput, target: &[usize]) -> f64 {
    let ent_rows = w.rows("entity_embed");
    let ent_dim = w.m["entity_embed"].0[1];
    let enc = w.rows("encoder.u_z");
    let mut h = vec![0.0; enc];
    let mut hs = Vec::new();
    for &tok in &input.entity_tokens {
        let x: Vec<f64> = (0..ent_dim)
            .map(|j| if tok < ent_rows { w.at("entity_embed", tok, j) } else { 0.0 })
            .collect();
        h = gru(w, "encoder", &x, &h);
        hs.push(h.clone());
    }
    let mut s = h.clone();
    for i in 0..RAW_DIM {
        s.push(if input.mask[i] { input.values[i] } else { 0.0 });
    }
    for j in 0..w.m["object_embed"].0[1] {
        s.push(w.at("object_embed", input.object_token, j));
    }
    let s0 = s.clone();

    let mut keys: Vec<Vec<f64>> = hs.iter().map(|hj| w.lin("attention.w_k", hj)).collect();
    let mut vals = hs.clone();
    if w.has("attention.w_k0") {
        keys.push(w.lin("attention.w_k0", &s0));
        vals.push(w.lin("attention.w_v0", &s0));
    }

    let word_dim = w.m["word_embed"].0[1];
    let vocab = w.rows("output.w");
    let mut prev = SOS;
    let mut total = 0.0;
    for &y in target {
        let q = w.lin("attention.w_q", &s);
        let e: Vec<f64> = keys
            .iter()
            .map(|k| (0..q.len()).map(|i| w.vec("attention.v", i) * (q[i] + k[i]).tanh()).sum())
            .collect();
        let m = e.iter().cloned().fold(f64::MIN, f64::max);
        let z: f64 = e.iter().map(|v| (v - m).exp()).sum();
        let mut ctx = vec![0.0; enc];
        for (ej, vj) in e.iter().zip(&vals) {
            let a = (ej - m).exp() / z;
            for i in 0..enc {
                ctx[i] += a * vj[i];
            }
        }
        let mut x: Vec<f64> = (0..word_dim).map(|j| w.at("word_embed", prev, j)).collect();
        x.extend(ctx);
        s = gru(w, "decoder", &x, &s);
        let logits: Vec<f64> = (0..vocab)
            .map(|v| w.vec("output.b", v) + (0..s.len()).map(|j| w.at("output.w", v, j) * s[j]).sum::<f64>())
            .collect();
        let m = logits.iter().cloned().fold(f64::MIN, f64::max);
        let lse = m + logits.iter().map(|l| (l - m).exp()).sum::<f64>().ln();
        total += lse - logits[y];
        prev = y;
    }
    assert_eq!(prev, EOS);
    total / target.len() as f64
}

/// Context and weights of additive attention over `h` with query `s`.
pub fn attend(w: &W, s: &[f64], h: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let q = w.lin("attention.w_q", s);
    let e: Vec<f64> = h
        .iter()
        .map(|hj| {
            let k = w.lin("attention.w_k", hj);
            (0..q.len()).map(|i| w.vec("attention.v", i) * (q[i] + k[i]).tanh()).sum()
        })
        .collect();
    let m = e.iter().cloned().fold(f64::MIN, f64::max);
    let z: f64 = e.iter().map(|v| (v - m).exp()).sum();
    let alpha: Vec<f64> = e.iter().map(|v| (v - m).exp() / z).collect();
    let mut c = vec![0.0; h[0].len()];
    for (a, hj) in alpha.iter().zip(h) {
        for (ci, x) in c.iter_mut().zip(hj) {
            *ci += a * x;
        }
    }
    (c, alpha)
}
