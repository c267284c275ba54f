use proptest::prelude::*;

use r4varifold::constructions::{build_layer, LayerParams, LayerPlan, LayerSystem};
use r4varifold::field::{FieldFamily, PolyTerm, RadialProfile, TestVectorField};
use r4varifold::geom4::swap23;
use r4varifold::quadrature::QuadratureSpec;
use r4varifold::varifold::boundary_functional_k;
use r4varifold::Vec4;
use r4varifold_cli::commands::profile_radii;
use r4varifold_cli::suites::{default_truncations, swap23_field};

fn term() -> impl Strategy<Value = PolyTerm> {
    (0usize..4, prop::array::uniform4(0u8..2), -2.0f64..2.0).prop_map(|(component, exponents, coeff)| PolyTerm {
        component,
        exponents,
        coeff,
    })
    .prop_filter("degree at most 3", |t| t.exponents.iter().sum::<u8>() <= 3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn swapped_field_is_conjugate(terms in prop::collection::vec(term(), 1..4), x in prop::array::uniform4(-1.5f64..1.5),
                                  c in prop::array::uniform4(-1.0f64..1.0), d in prop::array::uniform4(0.1f64..1.0)) {
        let q = swap23();
        let x = Vec4::from(x);
        for f in [
            FieldFamily::PolynomialBump { profile: RadialProfile::bump(0.0, 2.5), terms: terms.clone() },
            FieldFamily::DirectionalBump { center: c, radius: 1.2, direction: d },
            FieldFamily::RadialBump { amplitude: 0.7, profile: RadialProfile::bump(0.2, 2.0) },
        ] {
            let xf = TestVectorField::new(f.clone()).unwrap();
            let yf = TestVectorField::new(swap23_field(&f)).unwrap();
            let want = q * xf.eval(&(q * x));
            prop_assert!((yf.eval(&x) - want).norm() <= 1e-13 * (1.0 + want.norm()));
            prop_assert_eq!(swap23_field(&swap23_field(&f)), f);
        }
    }
}

#[test]
fn system_b_variation_is_system_a_at_swapped_field() {
    let spec = QuadratureSpec::default();
    let params = LayerParams::new(1.0, 2.0, 3.0, 4.0, 0.2).unwrap();
    let la = build_layer(LayerSystem::A, &params).unwrap();
    let lb = build_layer(LayerSystem::B, &params).unwrap();
    let plan = LayerPlan::new(params).unwrap();
    let ((a, big_r), (b, small_r), k) = plan.telescoped(plan.m);
    let x = TestVectorField::polynomial_bump(
        0.0,
        5.0,
        vec![
            PolyTerm { component: 1, exponents: [0, 1, 0, 0], coeff: 1.0 },
            PolyTerm { component: 0, exponents: [1, 0, 2, 0], coeff: 0.3 },
        ],
    )
    .unwrap();
    let y = TestVectorField::new(swap23_field(x.family())).unwrap();
    let fb = lb.varifold.first_variation(&x, &spec).unwrap();
    let fa_y = la.varifold.first_variation(&y, &spec).unwrap();
    let tol = fb.quadrature_error_estimate + fa_y.quadrature_error_estimate + 1e-12;
    assert!((fb.value - fa_y.value).abs() <= tol, "{} vs {}", fb.value, fa_y.value);
    let expected = a * boundary_functional_k(big_r, k, &y, &spec).unwrap().value
        - b * boundary_functional_k(small_r, k, &y, &spec).unwrap().value;
    assert!((fb.value - expected).abs() <= 1e-8 * fb.value.abs().max(1.0));
}

#[test]
fn radii_grid() {
    assert_eq!(profile_radii(1.0, 3.0, 2, false).unwrap(), vec![1.0, 2.0, 3.0]);
    let g = profile_radii(0.01, 100.0, 4, true).unwrap();
    assert_eq!((g[0], g[4]), (0.01, 100.0));
    assert!((g[2] - 1.0).abs() < 1e-12);
    assert!(profile_radii(1.0, 2.0, 0, false).is_err());
    assert!(profile_radii(0.0, 2.0, 3, false).is_err());
    assert!(profile_radii(3.0, 2.0, 3, false).is_err());
}

#[test]
fn truncation_defaults() {
    assert_eq!(default_truncations(12), vec![4, 6, 8]);
    assert_eq!(default_truncations(1), vec![0]);
}
