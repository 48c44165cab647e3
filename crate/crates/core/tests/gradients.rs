mod common;

use common::gradient_suite;
use mas_core::masnet::Variant;

#[test]
fn analytic_gradients_match_central_differences() {
    for variant in [Variant::ReluMas, Variant::HatMas, Variant::TriMas] {
        let (worst, _) = gradient_suite(variant, 200, 11);
        assert!(worst <= 1e-4, "{variant:?}: {worst}");
    }
}
