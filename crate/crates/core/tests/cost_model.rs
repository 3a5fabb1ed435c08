use stealthkit::bench::{measure_cost_model, CostModel, DEFAULT_ITERATIONS};
use stealthkit::group::{Group, HashAlg, Secp256k1};

const STABILITY: f64 = 0.20;

fn within(a: f64, b: f64) -> bool {
    (a - b).abs() / a.min(b) < STABILITY
}

#[test]
fn ordering_stability_and_table_effect() {
    let g = Group::<Secp256k1>::new();
    let a = measure_cost_model(&g, DEFAULT_ITERATIONS).unwrap();
    let b = measure_cost_model(&g, DEFAULT_ITERATIONS).unwrap();
    for CostModel { t_rp, t_fp, t_h } in [a, b] {
        assert!(t_h < t_fp, "{a} / {b}");
        assert!(t_fp < t_rp, "{a} / {b}");
    }
    assert!(within(a.t_rp, b.t_rp), "RP unstable: {a} vs {b}");
    assert!(within(a.t_fp, b.t_fp), "FP unstable: {a} vs {b}");
    assert!(within(a.t_h, b.t_h), "H unstable: {a} vs {b}");

    // Timings are taken in one test so no other test thread competes.
    let plain = Group::<Secp256k1>::without_precomputation(HashAlg::Sha256);
    let model = measure_cost_model(&plain, 200).unwrap();
    // Without the table FP is a generic multiplication: no faster than RP
    // beyond noise.
    assert!(model.t_fp > 0.8 * model.t_rp, "{model}");
}
