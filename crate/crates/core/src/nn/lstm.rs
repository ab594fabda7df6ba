//! Single-layer LSTM returning the full hidden sequence.
//!
//! Per step, with `x` the input and `h`, `c` the previous state:
//!
//! ```text
//! f = sigmoid(x W_f + h U_f + b_f)
//! i = sigmoid(x W_i + h U_i + b_i)
//! o = sigmoid(x W_o + h U_o + b_o)
//! u = tanh(x W_u + h U_u + b_u)
//! c' = f * c + i * u
//! h' = o * tanh(c')
//! ```

#![allow(clippy::needless_range_loop)]

use crate::error::{Error, Result};
use crate::nn::Tensor;
use crate::rng::Rng;

const GATES: usize = 4;
// Gate order in every per-gate array below.
const F: usize = 0;
const I: usize = 1;
const O: usize = 2;
const U: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub w_f: Tensor,
    pub u_f: Tensor,
    pub b_f: Tensor,
    pub w_i: Tensor,
    pub u_i: Tensor,
    pub b_i: Tensor,
    pub w_o: Tensor,
    pub u_o: Tensor,
    pub b_o: Tensor,
    pub w_u: Tensor,
    pub u_u: Tensor,
    pub b_u: Tensor,
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl LstmParams {
    /// Glorot-uniform kernels, zero biases except the forget bias at 1.
    pub fn init(input: usize, hidden: usize, rng: &mut Rng) -> Self {
        let mut kernel = |rows| Tensor::glorot(&[rows, hidden], rows, hidden, rng);
        let (w_f, u_f, w_i, u_i, w_o, u_o, w_u, u_u) = (
            kernel(input),
            kernel(hidden),
            kernel(input),
            kernel(hidden),
            kernel(input),
            kernel(hidden),
            kernel(input),
            kernel(hidden),
        );
        LstmParams {
            w_f,
            u_f,
            b_f: Tensor::filled(&[hidden], 1.0),
            w_i,
            u_i,
            b_i: Tensor::zeros(&[hidden]),
            w_o,
            u_o,
            b_o: Tensor::zeros(&[hidden]),
            w_u,
            u_u,
            b_u: Tensor::zeros(&[hidden]),
        }
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        let w = || Tensor::zeros(&[input, hidden]);
        let u = || Tensor::zeros(&[hidden, hidden]);
        let b = || Tensor::zeros(&[hidden]);
        LstmParams {
            w_f: w(),
            u_f: u(),
            b_f: b(),
            w_i: w(),
            u_i: u(),
            b_i: b(),
            w_o: w(),
            u_o: u(),
            b_o: b(),
            w_u: w(),
            u_u: u(),
            b_u: b(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w_f.dim(0)
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_f.dim(1)
    }

    pub fn named(&self) -> [(&'static str, &Tensor); 12] {
        [
            ("w_f", &self.w_f),
            ("u_f", &self.u_f),
            ("b_f", &self.b_f),
            ("w_i", &self.w_i),
            ("u_i", &self.u_i),
            ("b_i", &self.b_i),
            ("w_o", &self.w_o),
            ("u_o", &self.u_o),
            ("b_o", &self.b_o),
            ("w_u", &self.w_u),
            ("u_u", &self.u_u),
            ("b_u", &self.b_u),
        ]
    }

    pub fn named_mut(&mut self) -> [(&'static str, &mut Tensor); 12] {
        [
            ("w_f", &mut self.w_f),
            ("u_f", &mut self.u_f),
            ("b_f", &mut self.b_f),
            ("w_i", &mut self.w_i),
            ("u_i", &mut self.u_i),
            ("b_i", &mut self.b_i),
            ("w_o", &mut self.w_o),
            ("u_o", &mut self.u_o),
            ("b_o", &mut self.b_o),
            ("w_u", &mut self.w_u),
            ("u_u", &mut self.u_u),
            ("b_u", &mut self.b_u),
        ]
    }

    fn gates(&self) -> [(&Tensor, &Tensor, &Tensor); GATES] {
        [
            (&self.w_f, &self.u_f, &self.b_f),
            (&self.w_i, &self.u_i, &self.b_i),
            (&self.w_o, &self.u_o, &self.b_o),
            (&self.w_u, &self.u_u, &self.b_u),
        ]
    }

    fn check(&self) -> Result<()> {
        let (d, h) = (self.input_dim(), self.hidden_dim());
        for (w, u, b) in self.gates() {
            w.expect_shape("lstm input kernel", &[d, h])?;
            u.expect_shape("lstm recurrent kernel", &[h, h])?;
            b.expect_shape("lstm bias", &[h])?;
        }
        Ok(())
    }
}

/// Activations kept for backpropagation through time.
#[derive(Debug, Clone)]
pub struct LstmCache {
    pub input: Tensor,
    /// Gate activations, each `B x T x H`, in f/i/o/u order.
    pub gates: [Vec<f64>; GATES],
    pub cell: Vec<f64>,
    pub cell_tanh: Vec<f64>,
    pub hidden: Vec<f64>,
}

pub fn forward(p: &LstmParams, x: &Tensor) -> Result<(Tensor, LstmCache)> {
    p.check()?;
    let (d, h) = (p.input_dim(), p.hidden_dim());
    if x.shape().len() != 3 || x.dim(2) != d {
        return Err(Error::Shape {
            context: "lstm input",
            expected: vec![0, 0, d],
            actual: x.shape().to_vec(),
        });
    }
    let (batch, steps) = (x.dim(0), x.dim(1));
    let size = batch * steps * h;
    let mut gates: [Vec<f64>; GATES] = std::array::from_fn(|_| vec![0.0; size]);
    let mut cell = vec![0.0; size];
    let mut cell_tanh = vec![0.0; size];
    let mut hidden = vec![0.0; size];
    let params = p.gates();
    let mut pre = vec![0.0; h];
    let zeros = vec![0.0; h];

    for b in 0..batch {
        for t in 0..steps {
            let xt = &x.data()[(b * steps + t) * d..(b * steps + t + 1) * d];
            let base = (b * steps + t) * h;
            let prev = base.wrapping_sub(h);
            for (g, (w, u, bias)) in params.iter().enumerate() {
                pre.copy_from_slice(bias.data());
                for (k, &xv) in xt.iter().enumerate() {
                    for (acc, wv) in pre.iter_mut().zip(w.row(k)) {
                        *acc += xv * wv;
                    }
                }
                if t > 0 {
                    for k in 0..h {
                        let hv = hidden[prev + k];
                        for (acc, uv) in pre.iter_mut().zip(u.row(k)) {
                            *acc += hv * uv;
                        }
                    }
                }
                let out = &mut gates[g][base..base + h];
                for (o, &z) in out.iter_mut().zip(&pre) {
                    *o = if g == U { z.tanh() } else { sigmoid(z) };
                }
            }
            let c_prev = if t > 0 {
                &cell[prev..prev + h]
            } else {
                &zeros[..]
            };
            let next: Vec<f64> = (0..h)
                .map(|k| gates[F][base + k] * c_prev[k] + gates[I][base + k] * gates[U][base + k])
                .collect();
            for k in 0..h {
                let ct = next[k];
                cell[base + k] = ct;
                cell_tanh[base + k] = ct.tanh();
                hidden[base + k] = gates[O][base + k] * cell_tanh[base + k];
            }
        }
    }
    let out = Tensor::from_vec(&[batch, steps, h], hidden.clone())?;
    Ok((
        out,
        LstmCache {
            input: x.clone(),
            gates,
            cell,
            cell_tanh,
            hidden,
        },
    ))
}

/// Full backpropagation through time. Returns the input gradient and the
/// parameter gradients.
pub fn backward(p: &LstmParams, cache: &LstmCache, d_out: &Tensor) -> Result<(Tensor, LstmParams)> {
    let (d, h) = (p.input_dim(), p.hidden_dim());
    let x = &cache.input;
    let (batch, steps) = (x.dim(0), x.dim(1));
    d_out.expect_shape("lstm upstream gradient", &[batch, steps, h])?;
    let mut dw: [Tensor; GATES] = std::array::from_fn(|_| Tensor::zeros(&[d, h]));
    let mut du: [Tensor; GATES] = std::array::from_fn(|_| Tensor::zeros(&[h, h]));
    let mut db: [Tensor; GATES] = std::array::from_fn(|_| Tensor::zeros(&[h]));
    let mut dx = Tensor::zeros(x.shape());
    let params = p.gates();
    let mut da: [Vec<f64>; GATES] = std::array::from_fn(|_| vec![0.0; h]);

    for b in 0..batch {
        let mut dh_next = vec![0.0; h];
        let mut dc_next = vec![0.0; h];
        for t in (0..steps).rev() {
            let base = (b * steps + t) * h;
            let prev = base.wrapping_sub(h);
            for k in 0..h {
                let f = cache.gates[F][base + k];
                let i = cache.gates[I][base + k];
                let o = cache.gates[O][base + k];
                let u = cache.gates[U][base + k];
                let tc = cache.cell_tanh[base + k];
                let c_prev = if t > 0 { cache.cell[prev + k] } else { 0.0 };
                let dh = d_out.data()[base + k] + dh_next[k];
                let d_o = dh * tc;
                let dc = dh * o * (1.0 - tc * tc) + dc_next[k];
                da[F][k] = dc * c_prev * f * (1.0 - f);
                da[I][k] = dc * u * i * (1.0 - i);
                da[O][k] = d_o * o * (1.0 - o);
                da[U][k] = dc * i * (1.0 - u * u);
                dc_next[k] = dc * f;
            }

            let xt = &x.data()[(b * steps + t) * d..(b * steps + t + 1) * d];
            let dxt = &mut dx.data_mut()[(b * steps + t) * d..(b * steps + t + 1) * d];
            dh_next.fill(0.0);
            for (g, (w, u, _)) in params.iter().enumerate() {
                let dag = &da[g];
                for (acc, &a) in db[g].data_mut().iter_mut().zip(dag) {
                    *acc += a;
                }
                for (k, &xv) in xt.iter().enumerate() {
                    let wrow = w.row(k);
                    let mut sum = 0.0;
                    for ((acc, &a), &wv) in dw[g].row_mut(k).iter_mut().zip(dag).zip(wrow) {
                        *acc += xv * a;
                        sum += a * wv;
                    }
                    dxt[k] += sum;
                }
                if t > 0 {
                    for k in 0..h {
                        let hv = cache.hidden[prev + k];
                        let urow = u.row(k);
                        let mut sum = 0.0;
                        for ((acc, &a), &uv) in du[g].row_mut(k).iter_mut().zip(dag).zip(urow) {
                            *acc += hv * a;
                            sum += a * uv;
                        }
                        dh_next[k] += sum;
                    }
                }
            }
        }
    }
    let [w_f, w_i, w_o, w_u] = dw;
    let [u_f, u_i, u_o, u_u] = du;
    let [b_f, b_i, b_o, b_u] = db;
    let grads = LstmParams {
        w_f,
        u_f,
        b_f,
        w_i,
        u_i,
        b_i,
        w_o,
        u_o,
        b_o,
        w_u,
        u_u,
        b_u,
    };
    Ok((dx, grads))
}
