mod common;

use common::gradcheck::{three_step_lstm, two_layer_mlp};

#[test]
fn two_layer_mlp_gradients() {
    let frac = two_layer_mlp();
    assert!(frac >= 0.99, "agreement {frac}");
}

#[test]
fn three_step_lstm_gradients() {
    let frac = three_step_lstm();
    assert!(frac >= 0.99, "agreement {frac}");
}
