use super::tensor::{sigmoid, Tensor};
use crate::scalar::Scalar;

/// Weights of one gated recurrent unit. `w_*` act on the input, `u_*` on
/// the previous hidden state.
#[derive(Debug, Clone, PartialEq)]
pub struct GruParams<T> {
    pub w_z: Tensor<T>,
    pub u_z: Tensor<T>,
    pub b_z: Tensor<T>,
    pub w_r: Tensor<T>,
    pub u_r: Tensor<T>,
    pub b_r: Tensor<T>,
    pub w_h: Tensor<T>,
    pub u_h: Tensor<T>,
    pub b_h: Tensor<T>,
}

impl<T: Scalar> GruParams<T> {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        let w = || Tensor::zeros(&[hidden, input]);
        let u = || Tensor::zeros(&[hidden, hidden]);
        let b = || Tensor::zeros(&[hidden]);
        GruParams {
            w_z: w(),
            u_z: u(),
            b_z: b(),
            w_r: w(),
            u_r: u(),
            b_r: b(),
            w_h: w(),
            u_h: u(),
            b_h: b(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w_z.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_z.rows()
    }

    pub(crate) fn named(&self) -> [(&'static str, &Tensor<T>); 9] {
        [
            ("w_z", &self.w_z),
            ("u_z", &self.u_z),
            ("b_z", &self.b_z),
            ("w_r", &self.w_r),
            ("u_r", &self.u_r),
            ("b_r", &self.b_r),
            ("w_h", &self.w_h),
            ("u_h", &self.u_h),
            ("b_h", &self.b_h),
        ]
    }

    pub(crate) fn named_mut(&mut self) -> [(&'static str, &mut Tensor<T>); 9] {
        [
            ("w_z", &mut self.w_z),
            ("u_z", &mut self.u_z),
            ("b_z", &mut self.b_z),
            ("w_r", &mut self.w_r),
            ("u_r", &mut self.u_r),
            ("b_r", &mut self.b_r),
            ("w_h", &mut self.w_h),
            ("u_h", &mut self.u_h),
            ("b_h", &mut self.b_h),
        ]
    }
}

/// Activations of one GRU step kept for the backward pass.
#[derive(Debug, Clone)]
pub struct GruCache<T> {
    pub x: Vec<T>,
    pub h_prev: Vec<T>,
    pub z: Vec<T>,
    pub r: Vec<T>,
    /// Candidate state.
    pub n: Vec<T>,
    pub h: Vec<T>,
}

fn affine<T: Scalar>(w: &Tensor<T>, x: &[T], u: &Tensor<T>, h: &[T], b: &Tensor<T>) -> Vec<T> {
    let mut a = w.matvec(x);
    for ((ai, ui), bi) in a.iter_mut().zip(u.matvec(h)).zip(b.data()) {
        *ai += ui + *bi;
    }
    a
}

pub fn gru_forward<T: Scalar>(x: &[T], h_prev: &[T], p: &GruParams<T>) -> GruCache<T> {
    let z: Vec<T> = affine(&p.w_z, x, &p.u_z, h_prev, &p.b_z).into_iter().map(sigmoid).collect();
    let r: Vec<T> = affine(&p.w_r, x, &p.u_r, h_prev, &p.b_r).into_iter().map(sigmoid).collect();
    let rh: Vec<T> = r.iter().zip(h_prev).map(|(&a, &b)| a * b).collect();
    let n: Vec<T> = affine(&p.w_h, x, &p.u_h, &rh, &p.b_h).into_iter().map(T::tanh).collect();
    let h = (0..h_prev.len())
        .map(|i| (T::one() - z[i]) * h_prev[i] + z[i] * n[i])
        .collect();
    GruCache {
        x: x.to_vec(),
        h_prev: h_prev.to_vec(),
        z,
        r,
        n,
        h,
    }
}

/// `h = (1 − z) ⊙ h_prev + z ⊙ tanh(W_h x + U_h (r ⊙ h_prev) + b_h)` with
/// sigmoid gates `z`, `r`.
pub fn gru_cell<T: Scalar>(x: &[T], h_prev: &[T], p: &GruParams<T>) -> Vec<T> {
    gru_forward(x, h_prev, p).h
}

/// Accumulates parameter gradients into `g` and input/state gradients into
/// `dx` and `dh_prev`, given `dh` for the step's output.
pub fn gru_backward<T: Scalar>(
    c: &GruCache<T>,
    dh: &[T],
    p: &GruParams<T>,
    g: &mut GruParams<T>,
    dx: &mut [T],
    dh_prev: &mut [T],
) {
    let hd = dh.len();
    let one = T::one();
    let mut da_n = vec![T::zero(); hd];
    let mut da_z = vec![T::zero(); hd];
    for i in 0..hd {
        let dn = dh[i] * c.z[i];
        da_n[i] = dn * (one - c.n[i] * c.n[i]);
        let dz = dh[i] * (c.n[i] - c.h_prev[i]);
        da_z[i] = dz * c.z[i] * (one - c.z[i]);
        dh_prev[i] += dh[i] * (one - c.z[i]);
    }

    let rh: Vec<T> = c.r.iter().zip(&c.h_prev).map(|(&a, &b)| a * b).collect();
    g.w_h.outer_acc(&da_n, &c.x);
    g.u_h.outer_acc(&da_n, &rh);
    for (b, &d) in g.b_h.data_mut().iter_mut().zip(&da_n) {
        *b += d;
    }
    p.w_h.matvec_t_acc(&da_n, dx);
    let mut drh = vec![T::zero(); hd];
    p.u_h.matvec_t_acc(&da_n, &mut drh);

    let mut da_r = vec![T::zero(); hd];
    for i in 0..hd {
        let dr = drh[i] * c.h_prev[i];
        da_r[i] = dr * c.r[i] * (one - c.r[i]);
        dh_prev[i] += drh[i] * c.r[i];
    }

    for (w, u, b, da) in [
        (&mut g.w_z, &mut g.u_z, &mut g.b_z, &da_z),
        (&mut g.w_r, &mut g.u_r, &mut g.b_r, &da_r),
    ] {
        w.outer_acc(da, &c.x);
        u.outer_acc(da, &c.h_prev);
        for (bb, &d) in b.data_mut().iter_mut().zip(da.iter()) {
            *bb += d;
        }
    }
    p.w_z.matvec_t_acc(&da_z, dx);
    p.u_z.matvec_t_acc(&da_z, dh_prev);
    p.w_r.matvec_t_acc(&da_r, dx);
    p.u_r.matvec_t_acc(&da_r, dh_prev);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_params_halve_the_state() {
        let p = GruParams::<f64>::zeros(3, 4);
        let h = gru_cell(&[0.3, -1.0, 2.0], &[1.0, -2.0, 0.5, 4.0], &p);
        assert_eq!(h, vec![0.5, -1.0, 0.25, 2.0]);
        let c = gru_forward(&[0.3, -1.0, 2.0], &[1.0, -2.0, 0.5, 4.0], &p);
        assert!(c.z.iter().all(|&z| z == 0.5));
        assert!(c.n.iter().all(|&n| n == 0.0));
    }

    #[test]
    fn zero_input_and_state_stay_zero_without_bias() {
        let mut p = GruParams::<f32>::zeros(2, 2);
        p.w_z.fill(0.7);
        p.u_h.fill(-0.3);
        assert_eq!(gru_cell(&[0.0, 0.0], &[0.0, 0.0], &p), vec![0.0, 0.0]);
    }
}
