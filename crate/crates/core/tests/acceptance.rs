// Acceptance suite: one PASS/FAIL line per criterion, then a nonzero exit if
// any criterion failed. Runs without the libtest harness so the lines are
// always printed.

use std::f64::consts::{FRAC_PI_4, PI};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use r4varifold::analysis::{
    distinct_tangents_certificate, full_density_profile, nonconical_certificate, planar_control_certificate,
    ring_boundary_variation, stationarity_suite, Verdict,
};
use r4varifold::constructions::{
    build_full, build_layer, build_mini_layer, build_ring, layer_from_plan, FullVarifoldParams, LayerParams, LayerPlan,
    LayerSystem, MiniLayerParams, Variant,
};
use r4varifold::field::{PolyTerm, TestVectorField};
use r4varifold::geom4::{epsilon0_estimate, j_matrix, Vec4};
use r4varifold::minimal_surface::{
    b_mat, b_prime, ba, evaluate, mean_curvature, ode_residual, profile, two_rings_gap, CurvatureMode, SurfaceParams,
};
use r4varifold::quadrature::QuadratureSpec;
use r4varifold::varifold::{boundary_functional_k, Varifold};

type Outcome = Result<String, String>;

fn pt(component: usize, exponents: [u8; 4], coeff: f64) -> PolyTerm {
    PolyTerm { component, exponents, coeff }
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fail<E: std::fmt::Display>(e: E) -> String {
    format!("error: {e}")
}

// Cheaper rule for sums over many shells. Orbit dependence of low-degree
// polynomial fields is a short trigonometric polynomial, so 12 nodes suffice.
fn shell_spec() -> QuadratureSpec {
    QuadratureSpec {
        order: [8, 8],
        subdivisions: [1, 2],
        target_rel_error: 1e-8,
        circle_nodes: 16,
        orbit_nodes: 12,
        ..Default::default()
    }
}

fn c1_minimality() -> Outcome {
    let n = 30;
    let (mut h_max, mut ode_max, mut fd_max) = (0.0f64, 0.0f64, 0.0f64);
    let lim = FRAC_PI_4 - 0.01;
    for i in 0..n {
        let d = 0.1 + 3.9 * i as f64 / (n - 1) as f64;
        let p = SurfaceParams::new(d, 0.37).map_err(fail)?;
        for j in 0..n {
            let alpha = p.alpha0 - lim + 2.0 * lim * j as f64 / (n - 1) as f64;
            let r = profile(&p, alpha).map_err(fail)?.r;
            ode_max = ode_max.max(ode_residual(&p, alpha).map_err(fail)? / (r * r));
            for l in 0..n {
                let beta = 2.0 * PI * l as f64 / n as f64;
                let h = mean_curvature(&p, alpha, beta, CurvatureMode::Analytic).map_err(fail)?;
                h_max = h_max.max(h.norm());
                if (i + j + l) % 9 == 0 {
                    let fd = mean_curvature(&p, alpha, beta, CurvatureMode::FiniteDifference { h: 1e-4 }).map_err(fail)?;
                    fd_max = fd_max.max((fd - h).norm());
                }
            }
        }
    }
    check(
        h_max <= 1e-10 && ode_max <= 1e-10 && fd_max <= 1e-6,
        format!("27000 points: max|H| = {h_max:.2e}, max ODE/r² = {ode_max:.2e}, max FD gap = {fd_max:.2e}"),
    )
}

fn c2_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let j01 = j_matrix(0.0, 1.0);
    let id = r4varifold::Mat4::identity();
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let beta: f64 = rng.random_range(-10.0..10.0);
        let (b, bp) = (b_mat(beta), b_prime(beta));
        for m in [b.transpose() * b - id, bp.transpose() * bp - id, b.transpose() * bp - j01, bp - j01 * b] {
            worst = worst.max(m.abs().max());
        }
        let d: f64 = rng.random_range(0.05..5.0);
        let a0: f64 = rng.random_range(-3.0..3.0);
        let alpha = a0 + rng.random_range(-0.7..0.7);
        let p = SurfaceParams::new(d, a0).map_err(fail)?;
        let s = evaluate(&p, alpha, beta).map_err(fail)?;
        let pr = profile(&p, alpha).map_err(fail)?;
        let scale = pr.dr * pr.dr + pr.r * pr.r;
        let g11 = s.du_dalpha.dot(&s.du_dalpha);
        let g12 = s.du_dalpha.dot(&s.du_dbeta);
        let g22 = s.du_dbeta.dot(&s.du_dbeta);
        worst = worst.max((g11 - scale).abs() / scale);
        worst = worst.max(g12.abs() / scale);
        worst = worst.max((g22 - pr.r * pr.r).abs() / scale);
    }
    check(worst <= 1e-12, format!("1000 points: worst defect {worst:.2e}"))
}

fn c3_ring_mass() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let spec = QuadratureSpec::default();
    let mut rings = vec![(1.0, 0.0, 0.0, PI / 8.0)];
    while rings.len() < 100 {
        let d = rng.random_range(0.05..5.0);
        let a0 = rng.random_range(-3.0..3.0);
        let mut t: [f64; 2] = [rng.random_range(-0.75..0.75), rng.random_range(-0.75..0.75)];
        t.sort_by(f64::total_cmp);
        if t[1] - t[0] > 1e-3 {
            rings.push((d, a0, a0 + t[0], a0 + t[1]));
        }
    }
    let mut worst = 0.0f64;
    let mut example = 0.0;
    for (i, &(d, a0, t1, t2)) in rings.iter().enumerate() {
        let ring = build_ring(d, a0, t1, t2).map_err(fail)?;
        let exact = PI * d * ((2.0 * (t2 - a0)).tan() - (2.0 * (t1 - a0)).tan());
        let q = ring.mass_by_quadrature(&spec).map_err(fail)?.value;
        worst = worst.max((q - exact).abs() / exact);
        if i == 0 {
            example = q;
        }
    }
    check(
        worst <= 1e-8 && (example - PI).abs() <= 1e-8 * PI,
        format!("100 rings: worst rel gap {worst:.2e}; d=1, t=(0,π/8) gives {example:.12}"),
    )
}

fn c4_two_rings() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let d = rng.random_range(0.05..5.0);
        let a1 = rng.random_range(-3.0..3.0);
        let s = rng.random_range(0.0..FRAC_PI_4 - 0.05);
        let beta = rng.random_range(0.0..2.0 * PI);
        let (alpha, a2) = (a1 + s, a1 + 2.0 * s);
        let g = two_rings_gap(d, a1, a2, alpha, beta).map_err(fail)?;
        let expected = ba(alpha, beta) * (2.0 * (2.0 * s).sin());
        let r = profile(&SurfaceParams::new(d, a1).map_err(fail)?, alpha).map_err(fail)?.r;
        worst = worst.max((g.gap - expected).norm()).max(g.position_mismatch / r);
    }
    check(worst <= 1e-10, format!("1000 tuples: worst defect {worst:.2e}"))
}

fn c5_ring_variation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let spec = QuadratureSpec::default();
    let mut worst_ratio = 0.0f64;
    let mut worst_interior = 0.0f64;
    for i in 0..20 {
        let d = rng.random_range(0.2..3.0);
        let a0 = rng.random_range(-3.0..3.0);
        let t1 = a0 + rng.random_range(0.0..0.3);
        let t2 = t1 + rng.random_range(0.1..0.4);
        let ring = build_ring(d, a0, t1, t2).map_err(fail)?;
        let p = ring.params;
        let (r1, r2) = (profile(&p, t1).map_err(fail)?.r, profile(&p, t2).map_err(fail)?.r);
        let on_inner = evaluate(&p, t1, rng.random_range(0.0..2.0 * PI)).map_err(fail)?.position;
        let field = match i % 4 {
            0 => TestVectorField::radial_bump(1.0, 0.0, 0.5 * (r1 + r2)),
            1 => TestVectorField::directional_bump(on_inner, 0.4 * (r2 - r1), Vec4::new(0.3, -1.0, 0.5, 0.2)),
            2 => TestVectorField::polynomial_bump(0.0, 1.1 * r2, vec![pt(0, [1, 0, 0, 0], 1.0), pt(2, [0, 1, 1, 0], 0.4)]),
            _ => TestVectorField::polynomial_bump(0.9 * r1, 1.05 * r2, vec![pt(1, [2, 0, 0, 0], 0.7), pt(3, [0, 0, 0, 1], -1.0)]),
        }
        .map_err(fail)?;
        let bdry = ring_boundary_variation(&ring, &field, &spec).map_err(fail)?;
        let fv = Varifold::from(ring.clone()).first_variation(&field, &spec).map_err(fail)?;
        let tol = (1e-5 * bdry.value.abs()).max(fv.combined_error() + bdry.error);
        worst_ratio = worst_ratio.max((fv.value - bdry.value).abs() / tol);

        let tm = 0.5 * (t1 + t2);
        let rm = profile(&p, tm).map_err(fail)?.r;
        let center = evaluate(&p, tm, rng.random_range(0.0..2.0 * PI)).map_err(fail)?.position;
        let radius = 0.9 * (rm - r1).min(r2 - rm);
        let inner = TestVectorField::directional_bump(center, radius, Vec4::new(1.0, 0.2, -0.4, 0.7)).map_err(fail)?;
        let fi = Varifold::from(ring).first_variation(&inner, &spec).map_err(fail)?;
        worst_interior = worst_interior.max(fi.value.abs() / fi.quadrature_error_estimate);
    }
    check(
        worst_ratio <= 1.0 && worst_interior <= 1.0,
        format!("20 rings: worst |δV − boundary|/tol = {worst_ratio:.2e}, worst interior |δV|/error = {worst_interior:.2e}"),
    )
}

fn mini_layer_fields(p: &MiniLayerParams) -> Vec<TestVectorField> {
    let (r1, r2) = (p.r1(), p.r2);
    let on_outer = ba(0.3, 1.1) * r2;
    vec![
        TestVectorField::radial_bump(1.0, 0.0, 1.5 * r2).unwrap(),
        TestVectorField::polynomial_bump(0.0, 1.3 * r2, vec![pt(0, [1, 0, 2, 0], 1.0), pt(3, [0, 0, 0, 3], 0.5)]).unwrap(),
        TestVectorField::directional_bump(on_outer, 0.5 * (r2 - r1) + 0.05 * r2, Vec4::new(0.2, 1.0, -0.3, 0.5)).unwrap(),
    ]
}

fn c6_mini_layer() -> Outcome {
    let spec = QuadratureSpec::default();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    let mut mass_ok = true;
    for k in [24u64, 32, 100] {
        for gamma in [0.5, 0.6, FRAC_PI_4 - PI / 10.0] {
            let p = MiniLayerParams::new(k, gamma, 1.0).map_err(fail)?;
            let v1: Varifold = build_mini_layer(1, &p).map_err(fail)?.into();
            let v2: Varifold = build_mini_layer(2, &p).map_err(fail)?.into();
            for field in mini_layer_fields(&p) {
                let b = |rho: f64, kk: u64| boundary_functional_k(rho, kk, &field, &spec);
                let pairs = [
                    (&v1, p.big_c_tilde(), b(p.r2, 2 * k), p.small_c_tilde(), b(p.r1(), k)),
                    (&v2, p.big_c(), b(p.r2, k), p.small_c(), b(p.r1(), 2 * k)),
                ];
                for (v, ca, ba_, cb, bb) in pairs {
                    let (ba_, bb) = (ba_.map_err(fail)?, bb.map_err(fail)?);
                    let fv = v.first_variation(&field, &spec).map_err(fail)?;
                    let rhs = ca * ba_.value - cb * bb.value;
                    let rounding = 1e-13 * (fv.value.abs() + (ca * ba_.value).abs() + (cb * bb.value).abs());
                    let tol = fv.combined_error() + ca * ba_.error + cb * bb.error + rounding;
                    worst = worst.max((fv.value - rhs).abs() / tol);
                }
            }
            for _ in 0..20 {
                let mut s = [rng.random_range(p.r1()..p.r2), rng.random_range(p.r1()..p.r2)];
                s.sort_by(f64::total_cmp);
                let (lo, hi) = p.mass_bounds(s[0], s[1]);
                for v in [&v1, &v2] {
                    let m = v.mass_in(s[0], s[1]).map_err(fail)?;
                    mass_ok &= m >= lo && m <= hi;
                }
            }
        }
    }
    check(
        worst <= 1.0 && mass_ok,
        format!("9 (k, γ) × 3 fields: worst |δV − (C̃B − c̃B)|/error = {worst:.2e}; mass bounds at 20 sub-annuli: {mass_ok}"),
    )
}

fn c7_layer() -> Outcome {
    let spec = QuadratureSpec::default();
    let params = LayerParams::new(1.0, 2.0, 3.0, 4.0, 0.2).map_err(fail)?;
    let eps = params.epsilon;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut notes = Vec::new();
    let mut ok = true;
    for system in [LayerSystem::A, LayerSystem::B] {
        let layer = build_layer(system, &params).map_err(fail)?;
        let c = layer.c();
        ok &= c > 1.0 - eps && c < 1.0;
        let tail = layer.varifold.tail_mass();
        let mut mass_ok = true;
        for _ in 0..20 {
            let mut s = [rng.random_range(1.0..4.0), rng.random_range(1.0..4.0)];
            s.sort_by(f64::total_cmp);
            let area = PI * (s[1] * s[1] - s[0] * s[0]);
            let m = layer.varifold.mass_in(s[0], s[1]).map_err(fail)?;
            mass_ok &= m + tail > (1.0 - eps) * area && m < (1.0 + eps) * area;
        }
        ok &= mass_ok;
        notes.push(format!("{system:?}: c = {c:.8}, n0 = {}, masses {mass_ok}", layer.plan.n0));
    }
    let fields = [
        TestVectorField::radial_bump(1.0, 0.0, 5.0).unwrap(),
        TestVectorField::polynomial_bump(0.0, 5.0, vec![pt(0, [1, 0, 2, 0], 0.3), pt(3, [0, 0, 0, 3], 0.1)]).unwrap(),
        TestVectorField::polynomial_bump(0.5, 4.5, vec![pt(1, [0, 1, 0, 0], 1.0), pt(3, [0, 0, 1, 1], 0.1)]).unwrap(),
    ];
    let base = LayerPlan::new(params).map_err(fail)?;
    let mut worst = 0.0f64;
    for m in base.n0..=base.n0 + 3 {
        let mut plan = base.clone();
        plan.set_truncation(m).map_err(fail)?;
        let ((a, big_r), (b, small_r), k) = plan.telescoped(m);
        let layer = layer_from_plan(LayerSystem::A, plan).map_err(fail)?;
        for field in &fields {
            let fv = layer.varifold.first_variation(field, &spec).map_err(fail)?;
            let ba_ = boundary_functional_k(big_r, k, field, &spec).map_err(fail)?;
            let bb = boundary_functional_k(small_r, k, field, &spec).map_err(fail)?;
            let rhs = a * ba_.value - b * bb.value;
            // V_m is the finite sum itself, so the tail term of the report does not apply.
            let rounding = 1e-13 * (fv.value.abs() + (a * ba_.value).abs() + (b * bb.value).abs());
            let tol = fv.quadrature_error_estimate + a * ba_.error + b * bb.error + rounding;
            worst = worst.max((fv.value - rhs).abs() / tol);
        }
    }
    ok &= worst <= 1.0;
    notes.push(format!("telescoped m = n0..n0+3: worst gap/error = {worst:.2e}"));
    check(ok, notes.join("; "))
}

fn full_fields() -> Vec<TestVectorField> {
    let p = |r: f64, terms: Vec<PolyTerm>| TestVectorField::polynomial_bump(0.0, r, terms).unwrap();
    vec![
        TestVectorField::radial_bump(1.0, 0.0, 1.5).unwrap(),
        TestVectorField::radial_bump(-0.7, 0.0, 3.0).unwrap(),
        p(1.2, vec![pt(0, [1, 0, 0, 0], 1.0), pt(3, [0, 0, 0, 1], -0.5)]),
        p(2.5, vec![pt(1, [0, 1, 0, 0], 0.8), pt(2, [1, 0, 1, 0], 0.3)]),
        p(0.9, vec![pt(0, [3, 0, 0, 0], 1.0), pt(2, [0, 0, 1, 0], 0.4)]),
        p(1.7, vec![pt(2, [0, 0, 1, 0], 1.0), pt(0, [0, 2, 0, 0], 0.5)]),
        p(0.6, vec![pt(3, [0, 0, 0, 1], 2.0), pt(1, [1, 1, 0, 0], -0.8)]),
        p(2.0, vec![pt(0, [1, 0, 0, 0], 0.5), pt(1, [0, 1, 0, 0], 0.5), pt(2, [0, 0, 1, 0], -1.0)]),
        p(1.0, vec![pt(1, [0, 3, 0, 0], 1.0), pt(3, [0, 2, 0, 1], 0.6)]),
        p(3.5, vec![pt(0, [1, 0, 0, 0], 0.2), pt(3, [1, 0, 0, 1], 0.3)]),
    ]
}

fn c8_full() -> Outcome {
    let full = build_full(&FullVarifoldParams::new(Variant::Nonconical)).map_err(fail)?;
    let truncations = [4, 6, 8];
    let table = stationarity_suite(&full, &full_fields(), &truncations, &shell_spec()).map_err(fail)?;
    let decreasing = (0..10).all(|f| table.for_field(f).windows(2).all(|w| w[1].bound < w[0].bound));
    let worst = table.rows.iter().map(|r| r.residual / r.bound).fold(0.0, f64::max);

    let radii: Vec<f64> = (2..=8)
        .flat_map(|n| {
            let (a, b) = (full.params.r1(n), full.params.r4(n));
            [b, (a * b).sqrt()]
        })
        .collect();
    let prof = full_density_profile(&full, &radii).map_err(fail)?;
    let (lo, hi) = prof.limit_band.ok_or("no band at the deepest radius")?;
    let target = full.c_inf.value * PI;
    let limit_ok = prof.limit_estimate >= lo && prof.limit_estimate <= hi && target >= lo && target <= hi;
    check(
        table.all_pass() && decreasing && prof.within_bands() && limit_ok,
        format!(
            "30 rows pass: {}, worst residual/bound {worst:.2}, bounds decreasing: {decreasing}; densities in bands: {}; θ² ≈ {:.6} vs C∞π = {target:.6} in [{lo:.5}, {hi:.5}]",
            table.all_pass(),
            prof.within_bands(),
            prof.limit_estimate
        ),
    )
}

fn c9_certificates() -> Outcome {
    let spec = QuadratureSpec {
        order: [6, 6],
        subdivisions: [1, 2],
        circle_nodes: 32,
        orbit_nodes: 32,
        ..Default::default()
    };
    let est = epsilon0_estimate(100).map_err(fail)?;
    let mut ok = est.value > 0.0 && est.spread < 1e-6;
    let mut notes = vec![format!("ε₀ = {:.9} (spread {:.1e})", est.value, est.spread)];

    let full = build_full(&FullVarifoldParams::new(Variant::Nonconical)).map_err(fail)?;
    let cert = nonconical_certificate(&full, 3, &spec).map_err(fail)?;
    let floor = 0.99 * 1.5 * PI * full.c_inf.value;
    let eps = (est.value / 2.0).min(FullVarifoldParams::epsilon(6));
    let masses_ok = cert.scales.iter().all(|s| s.mass >= floor);
    let disjoint = cert.scales.iter().all(|s| s.report.overlap[0] == 0.0);
    ok &= cert.verdict == Verdict::NonConicalEvidence && masses_ok && disjoint && (cert.epsilon - eps).abs() <= 1e-15;
    notes.push(format!(
        "nonconical i=3: {} (masses {:.4}, {:.4} vs floor {floor:.4}, ε = {:.3e})",
        cert.verdict.name(),
        cert.scales[0].mass,
        cert.scales[1].mass,
        cert.epsilon
    ));

    let conical = build_full(&FullVarifoldParams::new(Variant::Conical)).map_err(fail)?;
    let cert = distinct_tangents_certificate(&conical, 2, &spec).map_err(fail)?;
    ok &= cert.verdict == Verdict::DistinctTangentsEvidence;
    notes.push(format!("conical i=2: {}", cert.verdict.name()));

    let cert = planar_control_certificate(3, &spec).map_err(fail)?;
    ok &= cert.verdict == Verdict::Inconclusive;
    notes.push(format!("planar control: {}", cert.verdict.name()));
    check(ok, notes.join("; "))
}

fn c10_scaling() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let full: Varifold = build_full(&FullVarifoldParams::new(Variant::Nonconical)).map_err(fail)?.varifold;
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let lambda = 2f64.powf(rng.random_range(-4.0..4.0));
        let a = 2f64.powf(rng.random_range(-5.0..3.0));
        let b = a * rng.random_range(1.01..4.0);
        let lhs = full.pushforward_scale(&Vec4::zeros(), lambda).map_err(fail)?.mass_in(a, b).map_err(fail)?;
        let rhs = full.mass_in(lambda * a, lambda * b).map_err(fail)? / (lambda * lambda);
        worst = worst.max((lhs - rhs).abs() / rhs);
    }

    let params = LayerParams::new(1.0, 2.0, 3.0, 4.0, 0.2).map_err(fail)?;
    let layer = build_layer(LayerSystem::A, &params).map_err(fail)?;
    let r = 2.5;
    let mut decay_ok = true;
    let mut last = f64::INFINITY;
    let mut slope = 0.0f64;
    for j in 1..=8 {
        let h = 10f64.powi(-j);
        let m = layer.varifold.mass_in(r - h, r + h).map_err(fail)?;
        let bound = (1.0 + params.epsilon) * PI * ((r + h).powi(2) - (r - h).powi(2));
        decay_ok &= m <= bound && m < last;
        slope = slope.max(m / h);
        last = m;
    }
    decay_ok &= slope <= (1.0 + params.epsilon) * 4.0 * PI * r;
    check(
        worst <= 1e-12 && decay_ok,
        format!("50 (λ, a, b): worst rel gap {worst:.2e}; sphere r=2.5 mass/h ≤ {slope:.4}, linear decay: {decay_ok}"),
    )
}

fn main() {
    type Criterion = (&'static str, Duration, fn() -> Outcome);
    let criteria: [Criterion; 10] = [
        ("minimality", Duration::from_secs(10), c1_minimality),
        ("matrix/metric identities", Duration::from_secs(1), c2_identities),
        ("ring mass", Duration::from_secs(30), c3_ring_mass),
        ("two-rings identity", Duration::from_secs(5), c4_two_rings),
        ("ring first variation", Duration::from_secs(120), c5_ring_variation),
        ("mini-layer", Duration::from_secs(300), c6_mini_layer),
        ("layer", Duration::from_secs(600), c7_layer),
        ("full nonconical varifold", Duration::from_secs(1200), c8_full),
        ("certificates", Duration::from_secs(1200), c9_certificates),
        ("scaling law", Duration::from_secs(60), c10_scaling),
    ];
    let mut failed = 0;
    for (i, (name, limit, run)) in criteria.into_iter().enumerate() {
        let t = Instant::now();
        let out = run();
        let took = t.elapsed();
        let in_time = took <= limit;
        let (pass, detail) = match out {
            Ok(d) => (in_time, d),
            Err(d) => (false, d),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "{} {:>2} {name}: {detail} [{:.2} s of {} s]",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            took.as_secs_f64(),
            limit.as_secs()
        );
    }
    println!("acceptance: {} of 10 criteria pass", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
