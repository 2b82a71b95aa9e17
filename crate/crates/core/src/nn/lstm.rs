use rand::Rng;
use serde::{Deserialize, Serialize};

use super::graph::{Graph, NodeId};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Glorot-uniform bound for a `fan_in × fan_out` kernel.
pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

pub const FORGET_BIAS: f64 = 1.0;

/// One LSTM layer. Each gate owns a `(input + hidden) × hidden` weight
/// acting on `[x_t, h_{t-1}]` and a `1 × hidden` bias.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    pub input_size: usize,
    pub hidden_size: usize,
    pub w_input: Tensor,
    pub w_forget: Tensor,
    pub w_output: Tensor,
    pub w_cell: Tensor,
    pub b_input: Tensor,
    pub b_forget: Tensor,
    pub b_output: Tensor,
    pub b_cell: Tensor,
}

impl LstmParams {
    pub fn init(input_size: usize, hidden_size: usize, rng: &mut impl Rng) -> Self {
        // Bound of the fused `(input + hidden) × 4·hidden` kernel.
        let fan = input_size + hidden_size;
        let bound = glorot_bound(fan, 4 * hidden_size);
        let mut w = || Tensor::uniform(fan, hidden_size, bound, rng);
        let (w_input, w_forget, w_output, w_cell) = (w(), w(), w(), w());
        LstmParams {
            input_size,
            hidden_size,
            w_input,
            w_forget,
            w_output,
            w_cell,
            b_input: Tensor::zeros(1, hidden_size),
            b_forget: Tensor::full(1, hidden_size, FORGET_BIAS),
            b_output: Tensor::zeros(1, hidden_size),
            b_cell: Tensor::zeros(1, hidden_size),
        }
    }

    pub fn zeros(input_size: usize, hidden_size: usize) -> Self {
        let fan = input_size + hidden_size;
        let w = || Tensor::zeros(fan, hidden_size);
        let b = || Tensor::zeros(1, hidden_size);
        LstmParams {
            input_size,
            hidden_size,
            w_input: w(),
            w_forget: w(),
            w_output: w(),
            w_cell: w(),
            b_input: b(),
            b_forget: b(),
            b_output: b(),
            b_cell: b(),
        }
    }

    pub const NAMES: [&'static str; 8] =
        ["w_input", "w_forget", "w_output", "w_cell", "b_input", "b_forget", "b_output", "b_cell"];

    pub fn tensors(&self) -> [&Tensor; 8] {
        [
            &self.w_input,
            &self.w_forget,
            &self.w_output,
            &self.w_cell,
            &self.b_input,
            &self.b_forget,
            &self.b_output,
            &self.b_cell,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Tensor; 8] {
        [
            &mut self.w_input,
            &mut self.w_forget,
            &mut self.w_output,
            &mut self.w_cell,
            &mut self.b_input,
            &mut self.b_forget,
            &mut self.b_output,
            &mut self.b_cell,
        ]
    }

    pub fn validate(&self) -> Result<()> {
        let fan = self.input_size + self.hidden_size;
        for (name, t) in Self::NAMES.iter().zip(self.tensors()) {
            let want = if name.starts_with('w') { [fan, self.hidden_size] } else { [1, self.hidden_size] };
            if t.shape() != want {
                return Err(Error::shape(format!("lstm {name} has shape {:?}, expected {want:?}", t.shape())));
            }
        }
        Ok(())
    }

    /// Places the parameters on `g` as trainable leaves or constants.
    pub fn bind(&self, g: &mut Graph, trainable: bool) -> LstmVars {
        let ids: Vec<NodeId> = self
            .tensors()
            .into_iter()
            .map(|t| if trainable { g.param(t.clone()) } else { g.constant(t.clone()) })
            .collect();
        let fused_w = g.concat(&ids[..4]).expect("gate weights share row count");
        let fused_b = g.concat(&ids[4..]).expect("gate biases share row count");
        LstmVars {
            input_size: self.input_size,
            hidden_size: self.hidden_size,
            ids: ids.try_into().expect("eight lstm tensors"),
            fused_w,
            fused_b,
        }
    }
}

/// Graph handles for a bound [`LstmParams`], in [`LstmParams::NAMES`] order.
#[derive(Clone, Copy, Debug)]
pub struct LstmVars {
    pub input_size: usize,
    pub hidden_size: usize,
    pub ids: [NodeId; 8],
    /// Gate weights side by side, `(input + hidden) × 4·hidden`.
    pub fused_w: NodeId,
    pub fused_b: NodeId,
}

/// Single recurrence step; returns `(h_t, c_t)`.
pub fn lstm_step(g: &mut Graph, p: &LstmVars, x: NodeId, h: NodeId, c: NodeId) -> Result<(NodeId, NodeId)> {
    let (xr, xc) = (g.value(x).rows(), g.value(x).cols());
    if xc != p.input_size {
        return Err(Error::shape(format!("lstm input width {xc}, expected {}", p.input_size)));
    }
    for (name, s) in [("h", h), ("c", c)] {
        let v = g.value(s);
        if v.rows() != xr || v.cols() != p.hidden_size {
            return Err(Error::shape(format!(
                "lstm {name} state {:?}, expected [{xr}, {}]",
                v.shape(),
                p.hidden_size
            )));
        }
    }
    let z = g.concat(&[x, h])?;
    let zw = g.matmul(z, p.fused_w)?;
    let pre = g.add(zw, p.fused_b)?;
    let hs = p.hidden_size;
    let i_pre = g.slice_cols(pre, 0, hs)?;
    let f_pre = g.slice_cols(pre, hs, hs)?;
    let o_pre = g.slice_cols(pre, 2 * hs, hs)?;
    let c_pre = g.slice_cols(pre, 3 * hs, hs)?;
    let i = g.sigmoid(i_pre);
    let f = g.sigmoid(f_pre);
    let o = g.sigmoid(o_pre);
    let cand = g.tanh(c_pre);
    let keep = g.mul(f, c)?;
    let write = g.mul(i, cand)?;
    let c_next = g.add(keep, write)?;
    let squashed = g.tanh(c_next);
    let h_next = g.mul(o, squashed)?;
    Ok((h_next, c_next))
}

/// Affine map `x W + b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Dense {
    pub fn init(inputs: usize, outputs: usize, rng: &mut impl Rng) -> Self {
        Dense {
            weight: Tensor::uniform(inputs, outputs, glorot_bound(inputs, outputs), rng),
            bias: Tensor::zeros(1, outputs),
        }
    }

    pub fn bind(&self, g: &mut Graph, trainable: bool) -> (NodeId, NodeId) {
        if trainable {
            (g.param(self.weight.clone()), g.param(self.bias.clone()))
        } else {
            (g.constant(self.weight.clone()), g.constant(self.bias.clone()))
        }
    }
}

pub fn dense(g: &mut Graph, (w, b): (NodeId, NodeId), x: NodeId) -> Result<NodeId> {
    let xw = g.matmul(x, w)?;
    g.add(xw, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::graph::sigmoid;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn step_values(p: &LstmParams, x: &Tensor, h: &Tensor, c: &Tensor) -> (Tensor, Tensor) {
        let mut g = Graph::new();
        let vars = p.bind(&mut g, false);
        let (xn, hn, cn) = (g.constant(x.clone()), g.constant(h.clone()), g.constant(c.clone()));
        let (h1, c1) = lstm_step(&mut g, &vars, xn, hn, cn).unwrap();
        (g.value(h1).clone(), g.value(c1).clone())
    }

    #[test]
    fn zero_weights_zero_state_gives_zero_hidden() {
        let p = LstmParams::zeros(3, 4);
        let x = Tensor::full(2, 3, 0.7);
        let (h, c) = step_values(&p, &x, &Tensor::zeros(2, 4), &Tensor::zeros(2, 4));
        assert!(h.data().iter().all(|&v| v == 0.0));
        assert!(c.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn saturated_forget_keeps_cell() {
        let mut p = LstmParams::zeros(2, 3);
        p.b_forget = Tensor::full(1, 3, 60.0);
        p.b_input = Tensor::full(1, 3, -60.0);
        let c_prev = Tensor::matrix(1, 3, vec![0.3, -1.2, 2.0]).unwrap();
        let (_, c) = step_values(&p, &Tensor::full(1, 2, 0.5), &Tensor::zeros(1, 3), &c_prev);
        for (a, b) in c.data().iter().zip(c_prev.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    /// Scalar-loop recurrence written independently of the graph.
    fn reference_step(p: &LstmParams, x: &[f64], h: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let z: Vec<f64> = x.iter().chain(h).copied().collect();
        let hs = p.hidden_size;
        let pre = |w: &Tensor, b: &Tensor, j: usize| -> f64 {
            b.data()[j] + z.iter().enumerate().map(|(r, zr)| zr * w.get(r, j)).sum::<f64>()
        };
        let mut h_out = vec![0.0; hs];
        let mut c_out = vec![0.0; hs];
        for j in 0..hs {
            let i = sigmoid(pre(&p.w_input, &p.b_input, j));
            let f = sigmoid(pre(&p.w_forget, &p.b_forget, j));
            let o = sigmoid(pre(&p.w_output, &p.b_output, j));
            let g = pre(&p.w_cell, &p.b_cell, j).tanh();
            c_out[j] = f * c[j] + i * g;
            h_out[j] = o * c_out[j].tanh();
        }
        (h_out, c_out)
    }

    #[test]
    fn matches_scalar_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut p = LstmParams::init(3, 5, &mut rng);
        for t in p.tensors_mut() {
            *t = Tensor::uniform(t.rows(), t.cols(), 0.7, &mut rng);
        }
        let x = Tensor::uniform(2, 3, 1.0, &mut rng);
        let h = Tensor::uniform(2, 5, 1.0, &mut rng);
        let c = Tensor::uniform(2, 5, 1.0, &mut rng);
        let (hg, cg) = step_values(&p, &x, &h, &c);
        for r in 0..2 {
            let row = |t: &Tensor| t.data()[r * t.cols()..(r + 1) * t.cols()].to_vec();
            let (hr, cr) = reference_step(&p, &row(&x), &row(&h), &row(&c));
            for j in 0..5 {
                assert!((hg.get(r, j) - hr[j]).abs() < 1e-12);
                assert!((cg.get(r, j) - cr[j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn init_follows_bias_convention() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = LstmParams::init(2, 4, &mut rng);
        p.validate().unwrap();
        assert!(p.b_forget.data().iter().all(|&v| v == 1.0));
        assert!(p.b_input.data().iter().all(|&v| v == 0.0));
        assert!(p.w_cell.data().iter().all(|v| v.abs() <= glorot_bound(6, 16)));
    }

    #[test]
    fn rejects_wrong_input_width() {
        let p = LstmParams::zeros(3, 2);
        let mut g = Graph::new();
        let vars = p.bind(&mut g, false);
        let x = g.constant(Tensor::zeros(1, 2));
        let h = g.constant(Tensor::zeros(1, 2));
        let c = g.constant(Tensor::zeros(1, 2));
        assert!(lstm_step(&mut g, &vars, x, h, c).is_err());
    }
}
