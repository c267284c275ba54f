use std::f64::consts::{FRAC_PI_4, PI};
use std::sync::OnceLock;

use proptest::prelude::*;

use r4varifold::analysis::band_classify;
use r4varifold::constructions::{
    build_full, build_layer, build_mini_layer, build_nonrectifiable_range, coefficient, family_boundary_flux,
    FullVarifold, FullVarifoldParams, Layer, LayerParams, LayerSystem, MiniLayerParams, RadiusSequence, Variant,
};
use r4varifold::field::{PolyTerm, TestVectorField};
use r4varifold::geom4::{spans_distinct, BandKind};
use r4varifold::quadrature::QuadratureSpec;
use r4varifold::varifold::{family_plane, Varifold};

fn layers() -> &'static (Layer, Layer) {
    static CELL: OnceLock<(Layer, Layer)> = OnceLock::new();
    CELL.get_or_init(|| {
        let p = LayerParams::new(1.0, 2.0, 3.0, 4.0, 0.2).unwrap();
        (build_layer(LayerSystem::A, &p).unwrap(), build_layer(LayerSystem::B, &p).unwrap())
    })
}

fn full() -> &'static FullVarifold {
    static CELL: OnceLock<FullVarifold> = OnceLock::new();
    CELL.get_or_init(|| build_full(&FullVarifoldParams::new(Variant::Nonconical)).unwrap())
}

fn sample_spec() -> QuadratureSpec {
    QuadratureSpec {
        order: [6, 6],
        subdivisions: [1, 2],
        orbit_nodes: 32,
        circle_nodes: 32,
        ..Default::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mini_layer_mass_bounds(k in 21u64..400, gamma in 0.40f64..0.78, r2 in 0.1f64..10.0, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let p = MiniLayerParams::new(k, gamma, r2).unwrap();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assume!(hi - lo > 1e-6);
        let (s1, s2) = (p.r1() + lo * (p.r2 - p.r1()), p.r1() + hi * (p.r2 - p.r1()));
        let (m_lo, m_hi) = p.mass_bounds(s1, s2);
        for which in [1, 2] {
            let v: Varifold = build_mini_layer(which, &p).unwrap().into();
            let m = v.mass_in(s1, s2).unwrap();
            prop_assert!(m >= m_lo && m <= m_hi, "V{which}: {m} outside [{m_lo}, {m_hi}]");
        }
    }

    #[test]
    fn layer_mass_within_epsilon(a in 1.0f64..4.0, b in 1.0f64..4.0) {
        let (s1, s2) = if a < b { (a, b) } else { (b, a) };
        prop_assume!(s2 - s1 > 1e-6);
        let (la, lb) = layers();
        let area = PI * (s2 * s2 - s1 * s1);
        let eps = la.plan.params.epsilon;
        let ma = la.varifold.mass_in(s1, s2).unwrap();
        let mb = lb.varifold.mass_in(s1, s2).unwrap();
        prop_assert!(ma + la.varifold.tail_mass() > (1.0 - eps) * area && ma < (1.0 + eps) * area);
        prop_assert!((ma - mb).abs() <= 1e-12 * ma);
    }

    #[test]
    fn full_density_ratios_in_band(n in 1i32..10, t in 0.0f64..1.0) {
        let f = full();
        let (r1, r4) = (f.params.r1(n), f.params.r4(n));
        let r = r1 + t * (r4 - r1);
        let (_, lo, hi) = f.density_band(r).unwrap();
        let ratio = f.varifold.mass_in(0.0, r).unwrap() / (r * r);
        prop_assert!(ratio + f.inner_tail / (r * r) + 1e-7 >= lo && ratio <= hi, "{ratio} outside [{lo}, {hi}] at r = {r}");
    }
}

#[test]
fn mini_layer_support_in_j13_band() {
    for (k, gamma) in [(24, 0.6), (100, FRAC_PI_4 - PI / 10.0)] {
        let p = MiniLayerParams::new(k, gamma, 1.0).unwrap();
        for which in [1, 2] {
            let v: Varifold = build_mini_layer(which, &p).unwrap().into();
            let rep = band_classify(&v, (p.r1(), p.r2), &[p.epsilon()], &sample_spec()).unwrap();
            assert!(rep.fraction(BandKind::J13, 0) >= 1.0 - 1e-12, "V{which} at k={k}: {}", rep.fraction(BandKind::J13, 0));
        }
    }
}

#[test]
fn layer_b_supported_in_j12_band() {
    let (la, lb) = layers();
    let eps = la.plan.params.epsilon;
    let ra = band_classify(&la.varifold, (1.0, 4.0), &[eps], &sample_spec()).unwrap();
    let rb = band_classify(&lb.varifold, (1.0, 4.0), &[eps], &sample_spec()).unwrap();
    assert!(ra.fraction(BandKind::J13, 0) >= 1.0 - 1e-12);
    assert!(rb.fraction(BandKind::J12, 0) >= 1.0 - 1e-12);
    assert!((ra.total_mass - rb.total_mass).abs() <= 1e-12 * ra.total_mass);
}

#[test]
fn shell_masses_and_coefficients() {
    let f = full();
    for s in &f.shells {
        let (r1, r4) = s.radii();
        let area = PI * (r4 * r4 - r1 * r1);
        let m = s.layer.varifold.mass().unwrap();
        assert!(m >= 0.5 * area && m <= (1.0 + s.epsilon) * area, "shell {}: {m} vs {area}", s.n);
        assert_eq!(s.band, FullVarifoldParams::band(s.n));
    }
    let c: Vec<f64> = (-12..=12).map(|n| coefficient(n).unwrap()).collect();
    assert!(c.windows(2).all(|w| w[1] < w[0]));
    assert!(f.c_inf.value > 0.0 && f.c_inf.lower <= f.c_inf.value && f.c_inf.value < c[24]);
}

#[test]
fn conical_radii_ratio_grows() {
    let p = FullVarifoldParams::new(Variant::Conical);
    let ratios: Vec<f64> = (1..=3).map(|i| p.r4(2 * i) / p.r1(2 * i)).collect();
    for (i, r) in (1..=3).zip(&ratios) {
        let n = 2 * i;
        assert_eq!(*r, 2f64.powi(n * n * n - (n - 1) * (n - 1) * (n - 1)));
    }
    assert!(ratios.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn nonrectifiable_variation_is_boundary_leakage() {
    let spec = QuadratureSpec::default();
    let fields = [
        TestVectorField::radial_bump(1.0, 0.0, 3.0).unwrap(),
        TestVectorField::polynomial_bump(
            0.0,
            2.5,
            vec![
                PolyTerm { component: 0, exponents: [1, 0, 2, 0], coeff: 1.0 },
                PolyTerm { component: 3, exponents: [0, 0, 0, 3], coeff: 0.5 },
            ],
        )
        .unwrap(),
    ];
    for seq in [RadiusSequence::Geometric, RadiusSequence::DoublyExponential] {
        let (lo, hi) = (-3, 2);
        let v: Varifold = build_nonrectifiable_range(seq, lo, hi).unwrap().into();
        for x in &fields {
            let fv = v.first_variation(x, &spec).unwrap();
            let top = family_boundary_flux(seq.radius(hi), x, &spec);
            let bottom = family_boundary_flux(seq.radius(lo), x, &spec);
            let leak = top.value - bottom.value;
            let tol = fv.combined_error() + top.error + bottom.error + 1e-12 * (top.scale + bottom.scale);
            assert!((fv.value - leak).abs() <= tol, "{seq:?}: {} vs {leak}", fv.value);
            assert!(fv.value.abs() <= top.value.abs() + bottom.value.abs() + tol);
        }
    }
}

#[test]
fn adjacent_families_have_distinct_planes() {
    for phi in [0.0, 0.7, 2.0, 4.5] {
        for psi in [0.0, 1.3, 3.9] {
            let cmp = spans_distinct(&family_plane(1, phi), &family_plane(2, psi), 1e-9);
            assert!(cmp.distinct, "φ={phi}, ψ={psi}");
        }
    }
}
