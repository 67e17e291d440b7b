use escher_net::gradcheck::{check_layers, check_network, GradcheckReport};

const TRIALS: usize = 100;

fn assert_report(r: &GradcheckReport, tol: f64) {
    assert_eq!(r.trials, TRIALS);
    for (name, err) in &r.max_rel {
        assert!(*err < tol, "{} {name}: relative error {err:e} >= {tol:e}", r.dtype);
    }
    assert!(r.checked > 0);
    assert!(r.skipped_fraction() < 0.10, "{} entries skipped at kinks: {}", r.dtype, r.skipped);
}

#[test]
fn network_gradients_f32() {
    let r = check_network::<f32>(TRIALS, 11).unwrap();
    assert_report(&r, 1e-3);
    // every parameter tensor and the input were compared
    assert_eq!(r.max_rel.len(), 13);
}

#[test]
fn network_gradients_f64() {
    let r = check_network::<f64>(TRIALS, 12).unwrap();
    assert_report(&r, 1e-6);
}

#[test]
fn layer_gradients_f32() {
    let r = check_layers::<f32>(TRIALS, 13).unwrap();
    assert_report(&r, 1e-3);
    for name in ["conv.input", "conv.weight", "conv.bias", "fc.input", "fc.weight", "fc.bias", "relu", "pool", "softmax_xent"] {
        assert!(r.max_rel.contains_key(name), "{name} not checked");
    }
}

#[test]
fn layer_gradients_f64() {
    let r = check_layers::<f64>(TRIALS, 14).unwrap();
    assert_report(&r, 1e-6);
}
