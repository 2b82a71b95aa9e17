//! Autodiff gradients against central finite differences.

use physaug::nn::{dense, lstm_step, Dense, Graph, LstmParams, NodeId, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-5;
const PROBES: usize = 500;

/// Builds a scalar loss from parameter tensors; returns loss and param ids.
pub type Build = dyn Fn(&mut Graph, &[Tensor]) -> (NodeId, Vec<NodeId>);

fn loss_value(build: &Build, params: &[Tensor]) -> f64 {
    let mut g = Graph::new();
    let (loss, _) = build(&mut g, params);
    g.value(loss).item().unwrap()
}

/// Fraction of random coordinates whose analytic gradient matches the
/// central difference within `max(1e-4, 1e-3 |g|)`.
pub fn agreement(build: &Build, params: Vec<Tensor>, seed: u64) -> f64 {
    let mut g = Graph::new();
    let (loss, ids) = build(&mut g, &params);
    g.backward(loss).unwrap();
    let grads: Vec<Tensor> = ids.iter().map(|&id| g.grad(id)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ok = 0;
    for _ in 0..PROBES {
        let t = rng.random_range(0..params.len());
        let i = rng.random_range(0..params[t].numel());
        let mut plus = params.clone();
        plus[t].data_mut()[i] += H;
        let mut minus = params.clone();
        minus[t].data_mut()[i] -= H;
        let numeric = (loss_value(build, &plus) - loss_value(build, &minus)) / (2.0 * H);
        let analytic = grads[t].data()[i];
        if (numeric - analytic).abs() <= f64::max(1e-4, 1e-3 * analytic.abs()) {
            ok += 1;
        }
    }
    ok as f64 / PROBES as f64
}

/// Agreement fraction for a 2-layer tanh/sigmoid MLP under BCE.
pub fn two_layer_mlp() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let x = Tensor::uniform(6, 4, 1.0, &mut rng);
    let target = Tensor::matrix(6, 1, vec![1.0, 0.0, 1.0, 1.0, 0.0, 0.0]).unwrap();
    let params = vec![
        Tensor::uniform(4, 8, 0.7, &mut rng),
        Tensor::uniform(1, 8, 0.2, &mut rng),
        Tensor::uniform(8, 1, 0.7, &mut rng),
        Tensor::uniform(1, 1, 0.2, &mut rng),
    ];
    let build = move |g: &mut Graph, p: &[Tensor]| {
        let ids: Vec<NodeId> = p.iter().map(|t| g.param(t.clone())).collect();
        let xi = g.constant(x.clone());
        let h = dense(g, (ids[0], ids[1]), xi).unwrap();
        let h = g.tanh(h);
        let o = dense(g, (ids[2], ids[3]), h).unwrap();
        let o = g.sigmoid(o);
        let t = g.constant(target.clone());
        (g.bce(o, t).unwrap(), ids)
    };
    agreement(&build, params, 1)
}

/// Agreement fraction for a 3-step LSTM with a per-step sigmoid head.
pub fn three_step_lstm() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let lstm = LstmParams::init(2, 5, &mut rng);
    let head = Dense::init(5, 1, &mut rng);
    let mut params: Vec<Tensor> = lstm.tensors().into_iter().cloned().collect();
    params.push(head.weight.clone());
    params.push(head.bias.clone());
    for t in params.iter_mut() {
        *t = Tensor::uniform(t.rows(), t.cols(), 0.5, &mut rng);
    }
    let xs: Vec<Tensor> = (0..3).map(|_| Tensor::uniform(4, 2, 1.0, &mut rng)).collect();
    let target = Tensor::matrix(4, 3, (0..12).map(|i| (i % 2) as f64).collect()).unwrap();
    let build = move |g: &mut Graph, p: &[Tensor]| {
        let mut bound = LstmParams::zeros(2, 5);
        for (dst, src) in bound.tensors_mut().into_iter().zip(p) {
            *dst = src.clone();
        }
        let vars = bound.bind(g, true);
        let w = g.param(p[8].clone());
        let b = g.param(p[9].clone());
        let mut h = g.constant(Tensor::zeros(4, 5));
        let mut c = g.constant(Tensor::zeros(4, 5));
        let mut outs = Vec::new();
        for x in &xs {
            let xi = g.constant(x.clone());
            (h, c) = lstm_step(g, &vars, xi, h, c).unwrap();
            let y = dense(g, (w, b), h).unwrap();
            outs.push(g.sigmoid(y));
        }
        let probs = g.concat(&outs).unwrap();
        let t = g.constant(target.clone());
        let mut ids = vars.ids.to_vec();
        ids.push(w);
        ids.push(b);
        (g.bce(probs, t).unwrap(), ids)
    };
    agreement(&build, params, 2)
}
