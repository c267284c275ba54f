//! Check suites behind `verify` and `variation`. Every suite takes its
//! construction parameters from the scenario when the scenario holds that
//! construction and falls back to the built-in defaults otherwise.

use std::f64::consts::{FRAC_PI_4, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use r4varifold::analysis::{full_density_profile, ring_boundary_variation, stationarity_suite};
use r4varifold::constructions::{
    build_full, build_layer, build_mini_layer, build_nonrectifiable_range, build_ring, build_v00, family_boundary_flux,
    layer_from_plan, FullVarifold, FullVarifoldParams, LayerParams, LayerPlan, LayerSystem, MiniLayerParams,
};
use r4varifold::field::{FieldFamily, PolyTerm, TestVectorField};
use r4varifold::geom4::{clifford_rotation, j12, j13, j_matrix, swap23, Plane2};
use r4varifold::minimal_surface::{
    b_mat, b_prime, evaluate, mean_curvature, ode_residual, profile, CurvatureMode, SurfaceParams,
};
use r4varifold::quadrature::Estimate;
use r4varifold::varifold::{boundary_functional_k, Varifold};
use r4varifold::{Mat4, Vec4};

use crate::report::Check;
use crate::scenario::{Construction, Scenario};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    All,
    Geom,
    Surface,
    Ring,
    MiniLayer,
    Layer,
    Full,
}

impl Suite {
    pub const EACH: [Suite; 6] = [Suite::Geom, Suite::Surface, Suite::Ring, Suite::MiniLayer, Suite::Layer, Suite::Full];

    pub fn name(self) -> &'static str {
        match self {
            Suite::All => "all",
            Suite::Geom => "geom",
            Suite::Surface => "surface",
            Suite::Ring => "ring",
            Suite::MiniLayer => "minilayer",
            Suite::Layer => "layer",
            Suite::Full => "full",
        }
    }
}

impl std::str::FromStr for Suite {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        [Suite::All]
            .into_iter()
            .chain(Suite::EACH)
            .find(|x| x.name() == s)
            .ok_or_else(|| format!("unknown suite {s} (all|geom|surface|ring|minilayer|layer|full)"))
    }
}

#[derive(Debug, Default)]
pub struct SuiteOutput {
    pub checks: Vec<Check>,
    pub details: serde_json::Map<String, serde_json::Value>,
}

impl SuiteOutput {
    fn merge(&mut self, prefix: &str, other: SuiteOutput) {
        for mut c in other.checks {
            c.name = format!("{prefix}: {}", c.name);
            self.checks.push(c);
        }
        self.details.insert(prefix.into(), serde_json::Value::Object(other.details));
    }
}

pub fn run_suite(suite: Suite, sc: &Scenario, truncation: Option<&[i32]>) -> Result<SuiteOutput, CliError> {
    let one = |s: Suite| -> Result<SuiteOutput, CliError> {
        match s {
            Suite::Geom => Ok(geom()),
            Suite::Surface => surface(sc),
            Suite::Ring => ring(sc),
            Suite::MiniLayer => mini_layer(sc),
            Suite::Layer => layer(sc, truncation),
            Suite::Full => full(sc, truncation),
            Suite::All => unreachable!("expanded below"),
        }
    };
    let list: Vec<Suite> = if suite == Suite::All { Suite::EACH.to_vec() } else { vec![suite] };
    let mut out = SuiteOutput::default();
    for s in list {
        out.merge(s.name(), one(s)?);
    }
    Ok(out)
}

fn max_abs(m: Mat4) -> f64 {
    m.abs().max()
}

fn geom() -> SuiteOutput {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let id = Mat4::identity();
    let j01 = j_matrix(0.0, 1.0);
    let mut worst = [0.0f64; 6];
    for _ in 0..1000 {
        let beta: f64 = rng.random_range(-10.0..10.0);
        let (b, bp) = (b_mat(beta), b_prime(beta));
        worst[0] = worst[0].max(max_abs(b.transpose() * b - id));
        worst[1] = worst[1].max(max_abs(bp.transpose() * bp - id));
        worst[2] = worst[2].max(max_abs(b.transpose() * bp - j01));
        worst[3] = worst[3].max(max_abs(bp - j01 * b));
        let (a, c, phi): (f64, f64, f64) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(0.0..7.0));
        let q = clifford_rotation(phi);
        worst[4] = worst[4].max(max_abs(q * j_matrix(a, c) - j_matrix(a, c) * q));
        let u = Vec4::from_fn(|_, _| rng.random_range(-1.0..1.0));
        let v = Vec4::from_fn(|_, _| rng.random_range(-1.0..1.0));
        if let Ok(p) = Plane2::from_vectors(&u, &v) {
            worst[5] = worst[5].max(p.idempotency_defect()).max(p.frame_defect());
        }
    }
    let s = swap23();
    let mut checks = vec![
        Check::le("B^T B = I", worst[0], 1e-12),
        Check::le("B'^T B' = I", worst[1], 1e-12),
        Check::le("B^T B' = J(0,1)", worst[2], 1e-12),
        Check::le("B' = J(0,1) B", worst[3], 1e-12),
        Check::le("Clifford rotation commutes with J(a,b)", worst[4], 1e-12),
        Check::le("plane projector idempotent with orthonormal frame", worst[5], 1e-12),
    ];
    checks.push(Check::le("J13^2 = -I", max_abs(j13() * j13() + id), 1e-15));
    checks.push(Check::le("J12^2 = -I", max_abs(j12() * j12() + id), 1e-15));
    checks.push(Check::le("swap23 J13 swap23 = J12", max_abs(s * j13() * s - j12()), 1e-15));
    SuiteOutput {
        checks,
        details: serde_json::Map::from_iter([("random_points".to_string(), json!(1000))]),
    }
}

pub fn ring_of(sc: &Scenario) -> (f64, f64, f64, f64) {
    match sc.construction {
        Construction::Ring { d, alpha0, t1, t2 } => (d, alpha0, t1, t2),
        _ => match Construction::default_for("ring") {
            Some(Construction::Ring { d, alpha0, t1, t2 }) => (d, alpha0, t1, t2),
            _ => unreachable!("ring default"),
        },
    }
}

fn surface(sc: &Scenario) -> Result<SuiteOutput, CliError> {
    let (d, alpha0, _, _) = ring_of(sc);
    let p = SurfaceParams::new(d, alpha0)?;
    let n = 30;
    let lim = FRAC_PI_4 - 0.01;
    let (mut h_max, mut ode_max, mut fd_max, mut metric_max) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for j in 0..n {
        let alpha = alpha0 - lim + 2.0 * lim * j as f64 / (n - 1) as f64;
        let pr = profile(&p, alpha)?;
        ode_max = ode_max.max(ode_residual(&p, alpha)? / (pr.r * pr.r));
        let g = pr.dr * pr.dr + pr.r * pr.r;
        for l in 0..n {
            let beta = 2.0 * PI * l as f64 / n as f64;
            let h = mean_curvature(&p, alpha, beta, CurvatureMode::Analytic)?;
            h_max = h_max.max(h.norm());
            if (j + l) % 3 == 0 {
                let fd = mean_curvature(&p, alpha, beta, CurvatureMode::FiniteDifference { h: 1e-4 })?;
                fd_max = fd_max.max((fd - h).norm());
            }
            let s = evaluate(&p, alpha, beta)?;
            metric_max = metric_max
                .max((s.du_dalpha.norm_squared() - g).abs() / g)
                .max(s.du_dalpha.dot(&s.du_dbeta).abs() / g)
                .max((s.du_dbeta.norm_squared() - pr.r * pr.r).abs() / g);
        }
    }
    Ok(SuiteOutput {
        checks: vec![
            Check::le("|H| (analytic)", h_max, 1e-10),
            Check::le("|r r'' - 3r'^2 - 2r^2| / r^2", ode_max, 1e-10),
            Check::le("|H_fd - H| at h = 1e-4", fd_max, 1e-6),
            Check::le("metric g11 = r'^2 + r^2, g12 = 0, g22 = r^2", metric_max, 1e-12),
        ],
        details: serde_json::Map::from_iter([
            ("d".to_string(), json!(d)),
            ("alpha0".to_string(), json!(alpha0)),
            ("grid".to_string(), json!(n * n)),
        ]),
    })
}

fn ring(sc: &Scenario) -> Result<SuiteOutput, CliError> {
    let (d, alpha0, t1, t2) = ring_of(sc);
    let ring = build_ring(d, alpha0, t1, t2)?;
    let exact = PI * d * ((2.0 * (t2 - alpha0)).tan() - (2.0 * (t1 - alpha0)).tan());
    let q = ring.mass_by_quadrature(&sc.quad)?;
    let mut checks = vec![Check::le("mass: |quadrature - closed form| / closed form", (q.value - exact).abs() / exact, 1e-8)];
    let sub = Scenario {
        construction: Construction::Ring { d, alpha0, t1, t2 },
        ..sc.clone()
    };
    checks.extend(variation_checks(&sub, None, None)?);
    Ok(SuiteOutput {
        checks,
        details: serde_json::Map::from_iter([
            ("mass_quadrature".to_string(), json!(q.value)),
            ("mass_closed_form".to_string(), json!(exact)),
        ]),
    })
}

fn mini_layer_of(sc: &Scenario) -> Construction {
    match &sc.construction {
        c @ Construction::MiniLayer { .. } => c.clone(),
        _ => Construction::default_for("minilayer").expect("known kind"),
    }
}

fn mini_layer(sc: &Scenario) -> Result<SuiteOutput, CliError> {
    let c = mini_layer_of(sc);
    let Construction::MiniLayer { which, k, gamma, r2 } = c else {
        unreachable!("mini-layer construction")
    };
    let p = MiniLayerParams::new(k, gamma, r2)?;
    let v: Varifold = build_mini_layer(which, &p)?.into();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..20 {
        let mut s = [rng.random_range(p.r1()..p.r2), rng.random_range(p.r1()..p.r2)];
        s.sort_by(f64::total_cmp);
        let (lo, hi) = p.mass_bounds(s[0], s[1]);
        let m = v.mass_in(s[0], s[1])?;
        // Positive when m leaves [lo, hi].
        worst = worst.max((lo - m) / lo).max((m - hi) / hi);
    }
    let mut checks = vec![Check::le("mass bounds at 20 sub-annuli (max relative excess)", worst, 0.0)];
    let sub = Scenario {
        construction: c,
        ..sc.clone()
    };
    checks.extend(variation_checks(&sub, None, None)?);
    Ok(SuiteOutput {
        checks,
        details: serde_json::Map::from_iter([
            ("r1".to_string(), json!(p.r1())),
            ("epsilon".to_string(), json!(p.epsilon())),
        ]),
    })
}

fn layer_of(sc: &Scenario) -> Construction {
    match &sc.construction {
        c @ Construction::Layer { .. } => c.clone(),
        _ => Construction::default_for("layer").expect("known kind"),
    }
}

fn layer(sc: &Scenario, truncation: Option<&[i32]>) -> Result<SuiteOutput, CliError> {
    let c = layer_of(sc);
    let Construction::Layer { system, radii, epsilon } = c else {
        unreachable!("layer construction")
    };
    let params = LayerParams::new(radii[0], radii[1], radii[2], radii[3], epsilon)?;
    let layer = build_layer(system, &params)?;
    let lc = layer.c();
    let tail = layer.varifold.tail_mass();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..20 {
        let mut s = [rng.random_range(radii[0]..radii[3]), rng.random_range(radii[0]..radii[3])];
        s.sort_by(f64::total_cmp);
        let area = PI * (s[1] * s[1] - s[0] * s[0]);
        let m = layer.varifold.mass_in(s[0], s[1])?;
        let (lo, hi) = ((1.0 - epsilon) * area, (1.0 + epsilon) * area);
        worst = worst.max((lo - m - tail) / lo).max((m - hi) / hi);
    }
    let mut checks = vec![
        Check::gt("c > 1 - epsilon", lc, 1.0 - epsilon),
        Check::lt("c < 1", lc, 1.0),
        Check::lt("mass within (1 ± epsilon) area at 20 sub-annuli (max relative excess)", worst, 0.0),
    ];
    let sub = Scenario {
        construction: c,
        ..sc.clone()
    };
    checks.extend(variation_checks(&sub, truncation, None)?);
    Ok(SuiteOutput {
        checks,
        details: serde_json::Map::from_iter([
            ("c".to_string(), json!(lc)),
            ("n0".to_string(), json!(layer.plan.n0)),
            ("tail_mass".to_string(), json!(tail)),
        ]),
    })
}

pub fn full_params(sc: &Scenario) -> FullVarifoldParams {
    match sc.construction {
        Construction::Full {
            variant,
            window,
            tail_tolerance,
        } => FullVarifoldParams {
            variant,
            window,
            tail_tolerance,
        },
        _ => FullVarifoldParams::new(r4varifold::constructions::Variant::Nonconical),
    }
}

/// Three truncation depths spread over the window: 4, 6, 8 for window 12.
pub fn default_truncations(window: i32) -> Vec<i32> {
    let mut t = vec![window / 3, window / 2, 2 * window / 3];
    t.dedup();
    t
}

fn full(sc: &Scenario, truncation: Option<&[i32]>) -> Result<SuiteOutput, CliError> {
    let params = full_params(sc);
    let full = build_full(&params)?;
    let sub = Scenario {
        construction: Construction::Full {
            variant: params.variant,
            window: params.window,
            tail_tolerance: params.tail_tolerance,
        },
        ..sc.clone()
    };
    let mut checks = variation_checks(&sub, truncation, Some(&full))?;
    let top = (params.window - 1).min(8);
    let radii: Vec<f64> = (2..=top)
        .flat_map(|n| {
            let (a, b) = (params.r1(n), params.r4(n));
            [b, (a * b).sqrt()]
        })
        .collect();
    let mut details = serde_json::Map::new();
    details.insert("c_inf".into(), serde_json::to_value(&full.c_inf).expect("serializable"));
    if !radii.is_empty() {
        let prof = full_density_profile(&full, &radii)?;
        checks.push(Check::flag(format!("density ratios in bands at {} radii", radii.len()), prof.within_bands()));
        if let Some((lo, hi)) = prof.limit_band {
            let target = full.c_inf.value * PI;
            checks.push(Check::flag(
                "theta^2 estimate and C_inf pi inside the deepest band",
                (lo..=hi).contains(&prof.limit_estimate) && (lo..=hi).contains(&target),
            ));
        }
        details.insert("density".into(), serde_json::to_value(&prof).expect("serializable"));
    }
    Ok(SuiteOutput { checks, details })
}

/// X ↦ Q X(Q·) for Q = swap23, written in the same field family. The first
/// variation of Q#V at X equals that of V at the transformed field.
pub fn swap23_field(f: &FieldFamily) -> FieldFamily {
    let sw = |i: usize| match i {
        1 => 2,
        2 => 1,
        i => i,
    };
    let perm = |v: &[f64; 4]| [v[0], v[2], v[1], v[3]];
    match f {
        FieldFamily::RadialBump { .. } => f.clone(),
        FieldFamily::DirectionalBump {
            center,
            radius,
            direction,
        } => FieldFamily::DirectionalBump {
            center: perm(center),
            radius: *radius,
            direction: perm(direction),
        },
        FieldFamily::PolynomialBump { profile, terms } => FieldFamily::PolynomialBump {
            profile: *profile,
            terms: terms
                .iter()
                .map(|t| PolyTerm {
                    component: sw(t.component),
                    exponents: [t.exponents[0], t.exponents[2], t.exponents[1], t.exponents[3]],
                    coeff: t.coeff,
                })
                .collect(),
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariationRow {
    pub field: usize,
    pub truncation: Option<i64>,
    pub value: f64,
    pub expected: f64,
    pub tolerance: f64,
}

impl VariationRow {
    pub fn check(&self) -> Check {
        let mut name = format!("field {}", self.field);
        if let Some(t) = self.truncation {
            name += &format!(" truncation {t}");
        }
        name += ": |dV(X) - expected|";
        Check::le(name, (self.value - self.expected).abs(), self.tolerance)
    }
}

fn rounding(parts: &[f64]) -> f64 {
    1e-13 * parts.iter().map(|x| x.abs()).sum::<f64>()
}

fn two_sided(value: f64, quad_err: f64, a: f64, ba: Estimate, b: f64, bb: Estimate) -> (f64, f64) {
    let expected = a * ba.value - b * bb.value;
    let tol = quad_err + a.abs() * ba.error + b.abs() * bb.error + rounding(&[value, a * ba.value, b * bb.value]);
    (expected, tol)
}

/// δV(X) against the closed-form boundary expression of the scenario's
/// construction, for each selected field and truncation.
pub fn variation_rows(
    sc: &Scenario,
    truncation: Option<&[i32]>,
    prebuilt: Option<&FullVarifold>,
) -> Result<Vec<VariationRow>, CliError> {
    let fields = sc.test_fields()?;
    let spec = &sc.quad;
    let mut rows = Vec::new();
    let row = |field: usize, truncation: Option<i64>, value: f64, expected: f64, tolerance: f64| VariationRow {
        field,
        truncation,
        value,
        expected,
        tolerance,
    };
    match &sc.construction {
        &Construction::Ring { d, alpha0, t1, t2 } => {
            let ring = build_ring(d, alpha0, t1, t2)?;
            let v: Varifold = ring.clone().into();
            for (i, x) in fields.iter().enumerate() {
                let fv = v.first_variation(x, spec)?;
                let b = ring_boundary_variation(&ring, x, spec)?;
                let tol = (1e-5 * b.value.abs()).max(fv.combined_error() + b.error);
                rows.push(row(i, None, fv.value, b.value, tol));
            }
        }
        &Construction::V00 { r1, r2, k } => {
            let v: Varifold = build_v00(r1, r2, k)?.into();
            for (i, x) in fields.iter().enumerate() {
                let fv = v.first_variation(x, spec)?;
                let (bo, bi) = (boundary_functional_k(r2, k, x, spec)?, boundary_functional_k(r1, k, x, spec)?);
                let (e, tol) = two_sided(fv.value, fv.combined_error(), 1.0, bo, 1.0, bi);
                rows.push(row(i, None, fv.value, e, tol));
            }
        }
        &Construction::MiniLayer { which, k, gamma, r2 } => {
            let p = MiniLayerParams::new(k, gamma, r2)?;
            let v: Varifold = build_mini_layer(which, &p)?.into();
            let (ca, ka, cb, kb) = match which {
                1 => (p.big_c_tilde(), 2 * k, p.small_c_tilde(), k),
                _ => (p.big_c(), k, p.small_c(), 2 * k),
            };
            for (i, x) in fields.iter().enumerate() {
                let fv = v.first_variation(x, spec)?;
                let (bo, bi) = (boundary_functional_k(p.r2, ka, x, spec)?, boundary_functional_k(p.r1(), kb, x, spec)?);
                let (e, tol) = two_sided(fv.value, fv.combined_error(), ca, bo, cb, bi);
                rows.push(row(i, None, fv.value, e, tol));
            }
        }
        &Construction::Layer { system, radii, epsilon } => {
            let params = LayerParams::new(radii[0], radii[1], radii[2], radii[3], epsilon)?;
            let base = LayerPlan::new(params)?;
            let ms: Vec<u32> = match truncation {
                Some(ts) => ts
                    .iter()
                    .map(|&t| u32::try_from(t).map_err(|_| CliError::Parse(format!("layer truncation {t} must be ≥ 0"))))
                    .collect::<Result<_, _>>()?,
                None => vec![base.n0],
            };
            for m in ms {
                let mut plan = base.clone();
                plan.set_truncation(m)?;
                let ((a, big_r), (b, small_r), k) = plan.telescoped(m);
                let layer = layer_from_plan(system, plan)?;
                for (i, x) in fields.iter().enumerate() {
                    let fv = layer.varifold.first_variation(x, spec)?;
                    // System B is the swap23 image of system A; the boundary
                    // circles are those of A, so the field is pulled back.
                    let y = match system {
                        LayerSystem::A => x.clone(),
                        LayerSystem::B => TestVectorField::new(swap23_field(x.family()))?,
                    };
                    let (bo, bi) = (boundary_functional_k(big_r, k, &y, spec)?, boundary_functional_k(small_r, k, &y, spec)?);
                    // The finite V_m has no omitted tail, so only the quadrature error counts.
                    let (e, tol) = two_sided(fv.value, fv.quadrature_error_estimate, a, bo, b, bi);
                    rows.push(row(i, Some(m as i64), fv.value, e, tol));
                }
            }
        }
        &Construction::Nonrectifiable { sequence, lo, hi } => {
            let v: Varifold = build_nonrectifiable_range(sequence, lo, hi)?.into();
            for (i, x) in fields.iter().enumerate() {
                let fv = v.first_variation(x, spec)?;
                let top = family_boundary_flux(sequence.radius(hi), x, spec);
                let bottom = family_boundary_flux(sequence.radius(lo), x, spec);
                let tol = fv.combined_error() + top.error + bottom.error + 1e-12 * (top.scale + bottom.scale);
                rows.push(row(i, None, fv.value, top.value - bottom.value, tol));
            }
        }
        Construction::Full { .. } => {
            let params = full_params(sc);
            let owned;
            let full = match prebuilt {
                Some(f) => f,
                None => {
                    owned = build_full(&params)?;
                    &owned
                }
            };
            let ts = truncation.map(<[i32]>::to_vec).unwrap_or_else(|| default_truncations(params.window));
            let table = stationarity_suite(full, &fields, &ts, spec)?;
            for r in table.rows {
                // The exact value is a boundary functional bounded by the
                // boundary term, so the check is |δV| ≤ bound.
                rows.push(row(r.field, r.truncation.map(i64::from), r.residual, 0.0, r.bound));
            }
        }
    }
    Ok(rows)
}

fn variation_checks(sc: &Scenario, truncation: Option<&[i32]>, prebuilt: Option<&FullVarifold>) -> Result<Vec<Check>, CliError> {
    Ok(variation_rows(sc, truncation, prebuilt)?.iter().map(VariationRow::check).collect())
}
