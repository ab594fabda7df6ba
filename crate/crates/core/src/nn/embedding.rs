use crate::embed::PAD;
use crate::error::{Error, Result};
use crate::nn::Tensor;

/// Gathers rows of `table` (V x D) for a `batch x seq` index block.
pub fn forward(table: &Tensor, indices: &[usize], batch: usize, seq: usize) -> Result<Tensor> {
    if indices.len() != batch * seq {
        return Err(Error::Shape {
            context: "embedding input",
            expected: vec![batch, seq],
            actual: vec![indices.len()],
        });
    }
    let (vocab, dim) = (table.dim(0), table.dim(1));
    let mut out = Vec::with_capacity(indices.len() * dim);
    for &i in indices {
        if i >= vocab {
            return Err(Error::IndexOutOfRange {
                index: i,
                size: vocab,
            });
        }
        out.extend_from_slice(table.row(i));
    }
    Tensor::from_vec(&[batch, seq, dim], out)
}

/// Scatter-adds the upstream gradient into a V x D gradient; the PAD row stays zero.
pub fn backward(indices: &[usize], d_out: &Tensor, vocab: usize) -> Tensor {
    let dim = d_out.dim(2);
    let mut grad = Tensor::zeros(&[vocab, dim]);
    for (pos, &i) in indices.iter().enumerate() {
        if i == PAD {
            continue;
        }
        let src = &d_out.data()[pos * dim..(pos + 1) * dim];
        for (g, s) in grad.row_mut(i).iter_mut().zip(src) {
            *g += s;
        }
    }
    grad
}
