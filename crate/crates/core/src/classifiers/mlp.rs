use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Design;
use crate::error::{Error, Result};
use crate::nn::graph::sigmoid;
use crate::nn::tensor::{matmul_acc, matmul_at_acc, matmul_bt_acc};
use crate::nn::{OptimizerConfig, OptimizerKind, OptimizerState, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub hidden_layers: Vec<usize>,
    pub activation: Activation,
    pub solver: OptimizerKind,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// L2 penalty; the paper's configuration uses none.
    pub alpha: f64,
}

impl Default for MlpParams {
    fn default() -> Self {
        MlpParams {
            hidden_layers: vec![100],
            activation: Activation::Relu,
            solver: OptimizerKind::Adam,
            learning_rate: 0.001,
            batch_size: 200,
            epochs: 200,
            alpha: 0.0,
        }
    }
}

/// One relu hidden layer and a logistic output unit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub params: MlpParams,
    pub d: usize,
    pub w1: Tensor,
    pub b1: Tensor,
    pub w2: Tensor,
    pub b2: Tensor,
    /// Mean log-loss per epoch.
    pub loss_curve: Vec<f64>,
}

fn glorot(rows: usize, cols: usize, factor: f64, rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::uniform(rows, cols, (factor / (rows + cols) as f64).sqrt(), rng)
}

impl Mlp {
    pub(crate) fn fit(params: MlpParams, data: &Design, seed: u64) -> Result<Self> {
        if params.hidden_layers.len() != 1 || params.hidden_layers[0] == 0 {
            return Err(Error::invalid("mlp supports exactly one non-empty hidden layer"));
        }
        if params.batch_size == 0 || !(params.learning_rate > 0.0) || params.alpha < 0.0 {
            return Err(Error::invalid("mlp needs positive batch size and learning rate"));
        }
        let (d, h) = (data.d, params.hidden_layers[0]);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = Mlp {
            w1: glorot(d, h, 6.0, &mut rng),
            b1: glorot(1, h, 6.0, &mut rng),
            w2: glorot(h, 1, 2.0, &mut rng),
            b2: glorot(1, 1, 2.0, &mut rng),
            params,
            d,
            loss_curve: Vec::new(),
        };
        let config = OptimizerConfig { kind: m.params.solver, learning_rate: m.params.learning_rate };
        let mut opt = OptimizerState::new(config)?;
        let batch = m.params.batch_size.min(data.n);
        let mut order: Vec<usize> = (0..data.n).collect();
        let mut xb = Vec::with_capacity(batch * d);
        for _ in 0..m.params.epochs {
            order.shuffle(&mut rng);
            let mut loss_sum = 0.0;
            for chunk in order.chunks(batch) {
                xb.clear();
                for &i in chunk {
                    xb.extend_from_slice(data.row(i));
                }
                let yb: Vec<f64> = chunk.iter().map(|&i| if data.y[i] { 1.0 } else { 0.0 }).collect();
                let (loss, grads) = m.loss_and_grads(&xb, &yb);
                loss_sum += loss * chunk.len() as f64;
                let mut p = [&mut m.w1, &mut m.b1, &mut m.w2, &mut m.b2];
                opt.step(&mut p, &grads)?;
            }
            m.loss_curve.push(loss_sum / data.n as f64);
        }
        Ok(m)
    }

    fn hidden(&self, x: &[f64], n: usize) -> Vec<f64> {
        let h = self.b1.numel();
        let mut a = Vec::with_capacity(n * h);
        for _ in 0..n {
            a.extend_from_slice(self.b1.data());
        }
        matmul_acc(x, self.w1.data(), &mut a, n, self.d, h);
        a.iter_mut().for_each(|v| *v = v.max(0.0));
        a
    }

    fn logits(&self, hidden: &[f64], n: usize) -> Vec<f64> {
        let mut z = vec![self.b2.data()[0]; n];
        matmul_acc(hidden, self.w2.data(), &mut z, n, self.b1.numel(), 1);
        z
    }

    fn loss_and_grads(&self, x: &[f64], y: &[f64]) -> (f64, [Tensor; 4]) {
        let n = y.len();
        let h = self.b1.numel();
        let a = self.hidden(x, n);
        let z = self.logits(&a, n);
        let mut loss = 0.0;
        let mut dz = vec![0.0; n];
        for i in 0..n {
            let p = sigmoid(z[i]).clamp(1e-15, 1.0 - 1e-15);
            loss -= y[i] * p.ln() + (1.0 - y[i]) * (1.0 - p).ln();
            dz[i] = (sigmoid(z[i]) - y[i]) / n as f64;
        }
        loss /= n as f64;
        let mut gw2 = vec![0.0; h];
        matmul_at_acc(&a, &dz, &mut gw2, n, h, 1);
        let gb2 = dz.iter().sum::<f64>();
        let mut da = vec![0.0; n * h];
        matmul_bt_acc(&dz, self.w2.data(), &mut da, n, 1, h);
        for (g, &act) in da.iter_mut().zip(&a) {
            if act <= 0.0 {
                *g = 0.0;
            }
        }
        let mut gw1 = vec![0.0; self.d * h];
        matmul_at_acc(x, &da, &mut gw1, n, self.d, h);
        let mut gb1 = vec![0.0; h];
        for row in da.chunks_exact(h) {
            gb1.iter_mut().zip(row).for_each(|(o, v)| *o += v);
        }
        if self.params.alpha > 0.0 {
            let s = self.params.alpha / n as f64;
            gw1.iter_mut().zip(self.w1.data()).for_each(|(g, w)| *g += s * w);
            gw2.iter_mut().zip(self.w2.data()).for_each(|(g, w)| *g += s * w);
        }
        let t = |r, c, v| Tensor::matrix(r, c, v).expect("gradient shape");
        (loss, [t(self.d, h, gw1), t(1, h, gb1), t(h, 1, gw2), t(1, 1, vec![gb2])])
    }

    /// Apneic probability per row of `x`.
    pub fn score_rows(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len() / self.d;
        let a = self.hidden(x, n);
        self.logits(&a, n).into_iter().map(sigmoid).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::{design, testdata::xor};

    #[test]
    fn loss_decreases_and_learns() {
        let data = design(&xor(400, 1)).unwrap();
        let m = Mlp::fit(MlpParams { epochs: 300, batch_size: 50, learning_rate: 0.01, ..MlpParams::default() }, &data, 3).unwrap();
        assert_eq!(m.loss_curve.len(), 300);
        assert!(m.loss_curve.last().unwrap() < &m.loss_curve[0]);
        let test = xor(200, 2);
        let (x, _) = crate::classifiers::features(&test, Some(2)).unwrap();
        let correct = m.score_rows(&x).iter().zip(&test).filter(|(p, w)| (**p >= 0.5) == w.label.is_apneic()).count();
        assert!(correct >= 170, "{correct}");
    }

    #[test]
    fn deterministic_per_seed() {
        let data = design(&xor(60, 4)).unwrap();
        let p = MlpParams { epochs: 5, ..MlpParams::default() };
        assert_eq!(Mlp::fit(p.clone(), &data, 1).unwrap(), Mlp::fit(p.clone(), &data, 1).unwrap());
        assert_ne!(Mlp::fit(p.clone(), &data, 1).unwrap(), Mlp::fit(p, &data, 2).unwrap());
    }
}
