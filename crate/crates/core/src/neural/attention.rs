use super::tensor::{softmax, Tensor};
use crate::scalar::Scalar;

/// Additive attention weights. `w_k0`/`w_v0` are present only when the
/// initial decoder state is also attended over; they map it into key and
/// value space.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams<T> {
    pub w_q: Tensor<T>,
    pub w_k: Tensor<T>,
    pub v: Tensor<T>,
    pub initial: Option<InitialSlot<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialSlot<T> {
    pub w_k0: Tensor<T>,
    pub w_v0: Tensor<T>,
}

impl<T: Scalar> AttentionParams<T> {
    pub fn zeros(query: usize, value: usize, attn: usize, with_initial: bool) -> Self {
        AttentionParams {
            w_q: Tensor::zeros(&[attn, query]),
            w_k: Tensor::zeros(&[attn, value]),
            v: Tensor::zeros(&[attn]),
            initial: with_initial.then(|| InitialSlot {
                w_k0: Tensor::zeros(&[attn, query]),
                w_v0: Tensor::zeros(&[value, query]),
            }),
        }
    }

    pub(crate) fn named(&self) -> Vec<(&'static str, &Tensor<T>)> {
        let mut out = vec![("w_q", &self.w_q), ("w_k", &self.w_k), ("v", &self.v)];
        if let Some(s) = &self.initial {
            out.push(("w_k0", &s.w_k0));
            out.push(("w_v0", &s.w_v0));
        }
        out
    }

    pub(crate) fn named_mut(&mut self) -> Vec<(&'static str, &mut Tensor<T>)> {
        let mut out = vec![("w_q", &mut self.w_q), ("w_k", &mut self.w_k), ("v", &mut self.v)];
        if let Some(s) = &mut self.initial {
            out.push(("w_k0", &mut s.w_k0));
            out.push(("w_v0", &mut s.w_v0));
        }
        out
    }
}

/// Projected keys and the values they address; computed once per sequence.
#[derive(Debug, Clone)]
pub struct Memory<T> {
    pub keys: Vec<Vec<T>>,
    pub values: Vec<Vec<T>>,
}

impl<T: Scalar> Memory<T> {
    /// Keys for encoder states `h`, plus the initial-state slot when the
    /// parameters carry one.
    pub fn new(h: &[Vec<T>], s0: &[T], p: &AttentionParams<T>) -> Self {
        let mut keys: Vec<Vec<T>> = h.iter().map(|hj| p.w_k.matvec(hj)).collect();
        let mut values = h.to_vec();
        if let Some(slot) = &p.initial {
            keys.push(slot.w_k0.matvec(s0));
            values.push(slot.w_v0.matvec(s0));
        }
        Memory { keys, values }
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub(crate) fn zeros_like(&self) -> Self {
        Memory {
            keys: self.keys.iter().map(|k| vec![T::zero(); k.len()]).collect(),
            values: self.values.iter().map(|v| vec![T::zero(); v.len()]).collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct AttentionCache<T> {
    pub query_in: Vec<T>,
    /// `tanh(W_q s + k_j)` per slot.
    pub t: Vec<Vec<T>>,
    pub alpha: Vec<T>,
    pub context: Vec<T>,
}

pub fn attend_cached<T: Scalar>(s_prev: &[T], mem: &Memory<T>, p: &AttentionParams<T>) -> AttentionCache<T> {
    let q = p.w_q.matvec(s_prev);
    let t: Vec<Vec<T>> = mem
        .keys
        .iter()
        .map(|k| q.iter().zip(k).map(|(&a, &b)| (a + b).tanh()).collect())
        .collect();
    let scores: Vec<T> = t
        .iter()
        .map(|tj| tj.iter().zip(p.v.data()).map(|(&a, &b)| a * b).sum())
        .collect();
    let alpha = softmax(&scores);
    let mut context = vec![T::zero(); mem.values[0].len()];
    for (a, val) in alpha.iter().zip(&mem.values) {
        for (c, &x) in context.iter_mut().zip(val) {
            *c += *a * x;
        }
    }
    AttentionCache {
        query_in: s_prev.to_vec(),
        t,
        alpha,
        context,
    }
}

/// Context vector and weights for query `s_prev` over encoder states `h`.
pub fn attend<T: Scalar>(s_prev: &[T], h: &[Vec<T>], s0: &[T], p: &AttentionParams<T>) -> (Vec<T>, Vec<T>) {
    let c = attend_cached(s_prev, &Memory::new(h, s0, p), p);
    (c.context, c.alpha)
}

/// Backpropagates `dc` to the query, the attention weights, and the
/// per-slot key and value gradients in `dmem`.
pub fn attend_backward<T: Scalar>(
    c: &AttentionCache<T>,
    mem: &Memory<T>,
    dc: &[T],
    p: &AttentionParams<T>,
    g: &mut AttentionParams<T>,
    ds_prev: &mut [T],
    dmem: &mut Memory<T>,
) {
    let dalpha: Vec<T> = mem
        .values
        .iter()
        .map(|val| val.iter().zip(dc).map(|(&a, &b)| a * b).sum())
        .collect();
    let mean: T = c.alpha.iter().zip(&dalpha).map(|(&a, &d)| a * d).sum();
    let mut dq = vec![T::zero(); p.w_q.rows()];
    for j in 0..mem.len() {
        let a = c.alpha[j];
        for (dv, &x) in dmem.values[j].iter_mut().zip(dc) {
            *dv += a * x;
        }
        let de = a * (dalpha[j] - mean);
        if de == T::zero() {
            continue;
        }
        for (i, (&tji, &vi)) in c.t[j].iter().zip(p.v.data()).enumerate() {
            g.v.data_mut()[i] += de * tji;
            let da = de * vi * (T::one() - tji * tji);
            dq[i] += da;
            dmem.keys[j][i] += da;
        }
    }
    g.w_q.outer_acc(&dq, &c.query_in);
    p.w_q.matvec_t_acc(&dq, ds_prev);
}

/// Pushes accumulated slot gradients back onto the encoder states and the
/// initial decoder state.
pub fn memory_backward<T: Scalar>(
    dmem: &Memory<T>,
    h: &[Vec<T>],
    s0: &[T],
    p: &AttentionParams<T>,
    g: &mut AttentionParams<T>,
    dh: &mut [Vec<T>],
    ds0: &mut [T],
) {
    for j in 0..h.len() {
        g.w_k.outer_acc(&dmem.keys[j], &h[j]);
        p.w_k.matvec_t_acc(&dmem.keys[j], &mut dh[j]);
        for (d, &x) in dh[j].iter_mut().zip(&dmem.values[j]) {
            *d += x;
        }
    }
    if let (Some(slot), Some(gs)) = (&p.initial, &mut g.initial) {
        let j = h.len();
        gs.w_k0.outer_acc(&dmem.keys[j], s0);
        slot.w_k0.matvec_t_acc(&dmem.keys[j], ds0);
        gs.w_v0.outer_acc(&dmem.values[j], s0);
        slot.w_v0.matvec_t_acc(&dmem.values[j], ds0);
    }
}
