use mas_core::masnet::{fit_monotone_function, generate_monotone_dataset, Architecture, FitConfig, MasNet, MonotoneTarget, Outer, Variant};

fn test_mae(target: &str, variant: Variant) -> f64 {
    let target = MonotoneTarget::builtin(target, 2, 1).unwrap();
    let data = generate_monotone_dataset(&target, 2000, 10, 2, 2).unwrap();
    let arch = Architecture::new(2, 16, variant)
        .with_hidden(vec![32])
        .with_outer(Outer::Monotone { hidden: vec![], out_dim: 1 });
    let net = MasNet::new(arch, 3).unwrap();
    let cfg = FitConfig { lr: 1e-2, epochs: 60, ..Default::default() };
    fit_monotone_function(&net, &data, &cfg).unwrap().1.test_mae
}

#[test]
fn cardinality_is_learned() {
    let mae = test_mae("cardinality", Variant::HatMas);
    assert!(mae <= 0.05, "{mae}");
}

#[test]
fn constant_is_learned() {
    let mae = test_mae("constant", Variant::HatMas);
    assert!(mae <= 0.01, "{mae}");
}

#[test]
fn hat_is_not_much_worse_than_relu() {
    for target in ["cardinality", "hat_coverage", "relu_max"] {
        let (hat, relu) = (test_mae(target, Variant::HatMas), test_mae(target, Variant::ReluMas));
        assert!(hat <= 1.5 * relu, "{target}: hat {hat} relu {relu}");
    }
}
