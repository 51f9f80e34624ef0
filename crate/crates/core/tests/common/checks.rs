//! Checks shared by the integration tests and the acceptance run.

use std::collections::HashMap;

use faultexplain::featurizer::{MaskedInput, RAW_DIM};
use faultexplain::neural::{GruParams, ModelParams};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::oracle::W;

/// |a − n| / max(|a|, |n|, floor); the floor keeps round-off on ~0
/// gradients from dominating.
pub fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

/// Worst relative error between analytic and central-difference gradients,
/// per parameter tensor plus `"raw"` for the unmasked feature inputs.
pub fn finite_difference_errors(p: &ModelParams<f64>, input: &MaskedInput, target: &[usize], h: f64) -> Vec<(String, f64)> {
    let (_, grads) = p.loss_and_grad(input, target).unwrap();
    let mut out = Vec::new();
    let mut probe = p.clone();
    for (ti, (name, analytic)) in grads.params.tensors().iter().enumerate() {
        let mut worst = 0.0f64;
        for i in 0..analytic.len() {
            let orig = probe.tensors()[ti].1.data()[i];
            probe.tensors_mut()[ti].1.data_mut()[i] = orig + h;
            let up = probe.loss(input, target).unwrap();
            probe.tensors_mut()[ti].1.data_mut()[i] = orig - h;
            let down = probe.loss(input, target).unwrap();
            probe.tensors_mut()[ti].1.data_mut()[i] = orig;
            worst = worst.max(rel_err(analytic.data()[i], (up - down) / (2.0 * h)));
        }
        out.push((name.clone(), worst));
    }
    let mut shifted = input.clone();
    let mut worst = 0.0f64;
    for i in (0..RAW_DIM).filter(|&i| input.mask[i]) {
        shifted.values[i] = input.values[i] + h;
        let up = p.loss(&shifted, target).unwrap();
        shifted.values[i] = input.values[i] - h;
        let down = p.loss(&shifted, target).unwrap();
        shifted.values[i] = input.values[i];
        worst = worst.max(rel_err(grads.raw[i], (up - down) / (2.0 * h)));
    }
    out.push(("raw".into(), worst));
    out
}

/// Overwrites every masked slot with junk and reports whether loss, logits
/// and all gradients are bit-identical.
pub fn mask_is_opaque(p: &ModelParams<f64>, input: &MaskedInput, target: &[usize], junk: f64) -> bool {
    let (l0, c0) = p.forward_loss(input, target).unwrap();
    let g0 = p.backward(&c0);
    let mut noisy = input.clone();
    for i in (0..RAW_DIM).filter(|&i| !input.mask[i]) {
        noisy.values[i] = junk;
    }
    let (l1, c1) = p.forward_loss(&noisy, target).unwrap();
    let g1 = p.backward(&c1);
    let masked_raw_zero = (0..RAW_DIM).filter(|&i| !input.mask[i]).all(|i| g0.raw[i] == 0.0);
    l0 == l1
        && c0.steps.iter().zip(&c1.steps).all(|(a, b)| a.logits == b.logits)
        && g0.params == g1.params
        && g0.raw == g1.raw
        && masked_raw_zero
}

/// Random GRU weights plus the same weights keyed for the oracle under
/// prefix `g`.
pub fn random_gru(r: &mut ChaCha8Rng, input: usize, hidden: usize) -> (GruParams<f64>, W) {
    let mut p = GruParams::<f64>::zeros(input, hidden);
    let mut named: HashMap<String, (Vec<usize>, Vec<f64>)> = HashMap::new();
    for (name, t) in [
        ("w_z", &mut p.w_z),
        ("u_z", &mut p.u_z),
        ("b_z", &mut p.b_z),
        ("w_r", &mut p.w_r),
        ("u_r", &mut p.u_r),
        ("b_r", &mut p.b_r),
        ("w_h", &mut p.w_h),
        ("u_h", &mut p.u_h),
        ("b_h", &mut p.b_h),
    ] {
        for x in t.data_mut() {
            *x = r.gen_range(-1.0..1.0);
        }
        named.insert(format!("g.{name}"), (t.shape().to_vec(), t.data().to_vec()));
    }
    (p, W { m: named })
}
