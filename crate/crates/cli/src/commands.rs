//! One function per subcommand. Each returns a report and, for
//! `mass-profile` and `export-mesh`, the text artifact; `main` decides where
//! they are written.

use std::f64::consts::PI;
use std::str::FromStr;

use serde::Serialize;
use serde_json::json;

use r4varifold::analysis::{
    band_classify, distinct_tangents_certificate, full_density_profile, nonconical_certificate,
    planar_control_certificate, ConicityCertificate, Verdict, PURITY_TOL,
};
use r4varifold::constructions::{
    build_full, build_layer, build_mini_layer, build_nonrectifiable_range, build_ring, build_v00, FullVarifoldParams,
    LayerParams, MiniLayerParams, Variant,
};
use r4varifold::minimal_surface::profile;
use r4varifold::varifold::Varifold;
use r4varifold::Vec4;

use crate::mesh::{ring_mesh, to_obj, Projection};
use crate::report::{Check, Report};
use crate::scenario::{Construction, Scenario};
use crate::suites::{full_params, ring_of, run_suite, variation_rows, Suite};
use crate::CliError;

pub struct Outcome {
    pub report: Report,
    pub artifact: Option<String>,
}

impl Outcome {
    fn report(report: Report) -> Outcome {
        Outcome { report, artifact: None }
    }
}

pub fn build_varifold(c: &Construction) -> Result<Varifold, CliError> {
    Ok(match *c {
        Construction::Ring { d, alpha0, t1, t2 } => build_ring(d, alpha0, t1, t2)?.into(),
        Construction::V00 { r1, r2, k } => build_v00(r1, r2, k)?.into(),
        Construction::MiniLayer { which, k, gamma, r2 } => build_mini_layer(which, &MiniLayerParams::new(k, gamma, r2)?)?.into(),
        Construction::Layer { system, radii, epsilon } => {
            build_layer(system, &LayerParams::new(radii[0], radii[1], radii[2], radii[3], epsilon)?)?.varifold
        }
        Construction::Nonrectifiable { sequence, lo, hi } => build_nonrectifiable_range(sequence, lo, hi)?.into(),
        Construction::Full {
            variant,
            window,
            tail_tolerance,
        } => {
            build_full(&FullVarifoldParams {
                variant,
                window,
                tail_tolerance,
            })?
            .varifold
        }
    })
}

pub fn verify(sc: &Scenario, suite: Suite, truncation: Option<&[i32]>) -> Result<Outcome, CliError> {
    let out = run_suite(suite, sc, truncation)?;
    let mut details = out.details;
    details.insert("suite".into(), json!(suite.name()));
    Ok(Outcome::report(Report::new(
        "verify",
        sc.serialize(),
        out.checks,
        serde_json::Value::Object(details),
    )))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileRow {
    pub r: f64,
    pub mass: f64,
    pub ratio: f64,
    pub lower_band: Option<f64>,
    pub upper_band: Option<f64>,
}

/// Relative slack on the band ends for rounding in the closed forms.
const BAND_ROUNDING: f64 = 1e-12;

/// `steps + 1` radii from r_min to r_max, evenly spaced or geometric.
pub fn profile_radii(r_min: f64, r_max: f64, steps: usize, log: bool) -> Result<Vec<f64>, CliError> {
    if steps == 0 {
        return Err(CliError::Parse("mass-profile needs steps ≥ 1".into()));
    }
    if !(r_min > 0.0 && r_min <= r_max && r_max.is_finite()) {
        return Err(CliError::Parse(format!("mass-profile needs 0 < r-min ≤ r-max, got {r_min}, {r_max}")));
    }
    Ok((0..=steps)
        .map(|i| {
            let t = i as f64 / steps as f64;
            match i {
                0 => r_min,
                i if i == steps => r_max,
                _ if log => r_min * (r_max / r_min).powf(t),
                _ => r_min + (r_max - r_min) * t,
            }
        })
        .collect())
}

/// Band on μ(A₀^r) (not yet divided by r²) and the mass that truncation may
/// have dropped, for constructions with closed-form bounds.
fn mass_band(c: &Construction, r: f64, tail: f64) -> Result<Option<(f64, f64, f64)>, CliError> {
    Ok(match *c {
        Construction::V00 { r1, r2, .. } => {
            let s = r.clamp(r1, r2);
            let m = PI * (s * s - r1 * r1);
            Some((m, m, 0.0))
        }
        Construction::MiniLayer { k, gamma, r2, .. } => {
            let p = MiniLayerParams::new(k, gamma, r2)?;
            let s = r.clamp(p.r1(), p.r2);
            if s > p.r1() {
                let (lo, hi) = p.mass_bounds(p.r1(), s);
                Some((lo, hi, 0.0))
            } else {
                Some((0.0, 0.0, 0.0))
            }
        }
        Construction::Layer { radii, epsilon, .. } => {
            let s = r.clamp(radii[0], radii[3]);
            let area = PI * (s * s - radii[0] * radii[0]);
            Some(((1.0 - epsilon) * area, (1.0 + epsilon) * area, tail))
        }
        _ => None,
    })
}

pub fn mass_profile(sc: &Scenario, r_min: f64, r_max: f64, steps: usize, log: bool) -> Result<Outcome, CliError> {
    let radii = profile_radii(r_min, r_max, steps, log)?;
    let mut rows = Vec::with_capacity(radii.len());
    let mut outside = 0usize;
    let mut details = serde_json::Map::new();
    if let Construction::Full { .. } = sc.construction {
        let full = build_full(&full_params(sc))?;
        let prof = full_density_profile(&full, &radii)?;
        for (j, &r) in radii.iter().enumerate() {
            let ratio = prof.ratios[j];
            let (lo, hi) = prof.bands[j].expect("full profile has bands");
            if !(ratio + prof.truncation_slack[j] >= lo * (1.0 - BAND_ROUNDING) && ratio <= hi * (1.0 + BAND_ROUNDING)) {
                outside += 1;
            }
            rows.push(ProfileRow {
                r,
                mass: ratio * r * r,
                ratio,
                lower_band: Some(lo),
                upper_band: Some(hi),
            });
        }
        details.insert("limit_estimate".into(), json!(prof.limit_estimate));
        details.insert("c_inf".into(), serde_json::to_value(&full.c_inf).expect("serializable"));
    } else {
        let v = build_varifold(&sc.construction)?;
        let tail = v.tail_mass();
        for &r in &radii {
            let mass = v.mass_in(0.0, r)?;
            let ratio = mass / (r * r);
            let band = mass_band(&sc.construction, r, tail)?;
            if let Some((lo, hi, slack)) = band {
                if !(mass + slack >= lo * (1.0 - BAND_ROUNDING) && mass <= hi * (1.0 + BAND_ROUNDING)) {
                    outside += 1;
                }
            }
            rows.push(ProfileRow {
                r,
                mass,
                ratio,
                lower_band: band.map(|b| b.0 / (r * r)),
                upper_band: band.map(|b| b.1 / (r * r)),
            });
        }
    }
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    for row in &rows {
        w.serialize(row).map_err(|e| CliError::Io(e.into()))?;
    }
    let csv = String::from_utf8(w.into_inner().map_err(|e| CliError::Io(e.into_error()))?).expect("csv is utf-8");
    let banded = rows.iter().filter(|r| r.lower_band.is_some()).count();
    details.insert("rows".into(), serde_json::to_value(&rows).expect("serializable"));
    details.insert("banded_rows".into(), json!(banded));
    let checks = vec![Check::le(format!("rows outside their band ({banded} banded)"), outside as f64, 0.0)];
    Ok(Outcome {
        report: Report::new("mass-profile", sc.serialize(), checks, serde_json::Value::Object(details)),
        artifact: Some(csv),
    })
}

pub fn variation(sc: &Scenario, field: Option<usize>, truncation: Option<&[i32]>) -> Result<Outcome, CliError> {
    let mut sc = sc.clone();
    if let Some(i) = field {
        if i >= sc.fields.len() {
            return Err(CliError::Parse(format!("field {i} not in the scenario ({} fields)", sc.fields.len())));
        }
        sc.fields = vec![sc.fields[i].clone()];
    }
    if sc.fields.is_empty() {
        return Err(CliError::Parse("variation needs at least one field".into()));
    }
    let rows = variation_rows(&sc, truncation, None)?;
    let checks = rows.iter().map(|r| r.check()).collect();
    let details = json!({
        "construction": sc.construction.kind(),
        "rows": rows,
    });
    Ok(Outcome::report(Report::new("variation", sc.serialize(), checks, details)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlowupRow {
    pub lambda: f64,
    /// μ of the blow-up in the annulus.
    pub mass: f64,
    /// μ of the unscaled varifold in the same annulus.
    pub base_mass: f64,
    /// λ⁻² μ(V, A_{λa}^{λb}).
    pub rescaled_mass: f64,
    pub band_fractions: Option<BandFractions>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandFractions {
    pub epsilon: f64,
    pub j13: f64,
    pub j12: f64,
}

pub fn blowup(sc: &Scenario, lambdas: &[f64], annulus: (f64, f64), bands: Option<f64>) -> Result<Outcome, CliError> {
    let (a, b) = annulus;
    if !(a >= 0.0 && a < b && b.is_finite()) {
        return Err(CliError::Parse(format!("annulus needs 0 ≤ a < b, got {a}, {b}")));
    }
    if lambdas.is_empty() || lambdas.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
        return Err(CliError::Parse("scales must be positive and finite".into()));
    }
    let v = build_varifold(&sc.construction)?;
    let base_mass = v.mass_in(a, b)?;
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    for &lambda in lambdas {
        let blown = v.pushforward_scale(&Vec4::zeros(), lambda)?;
        let mass = blown.mass_in(a, b)?;
        let rescaled = v.mass_in(lambda * a, lambda * b)? / (lambda * lambda);
        checks.push(Check::le(
            format!("lambda {lambda}: |mass - lambda^-2 mass(V, lambda A)| / mass"),
            (mass - rescaled).abs() / rescaled.abs().max(f64::MIN_POSITIVE),
            1e-12,
        ));
        let band_fractions = match bands {
            Some(eps) => {
                let rep = band_classify(&blown, annulus, &[eps], &sc.quad)?;
                Some(BandFractions {
                    epsilon: eps,
                    j13: rep.fraction(r4varifold::geom4::BandKind::J13, 0),
                    j12: rep.fraction(r4varifold::geom4::BandKind::J12, 0),
                })
            }
            None => None,
        };
        rows.push(BlowupRow {
            lambda,
            mass,
            base_mass,
            rescaled_mass: rescaled,
            band_fractions,
        });
    }
    let details = json!({ "annulus": [a, b], "rows": rows });
    Ok(Outcome::report(Report::new("blowup", sc.serialize(), checks, details)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertVariant {
    Nonconical,
    Conical,
    /// The flat control, which must come out inconclusive.
    Planar,
}

impl FromStr for CertVariant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "nonconical" => Ok(CertVariant::Nonconical),
            "conical" => Ok(CertVariant::Conical),
            "planar" => Ok(CertVariant::Planar),
            _ => Err(format!("unknown certificate variant {s} (nonconical|conical|planar)")),
        }
    }
}

pub fn certify(sc: &Scenario, variant: CertVariant, i: u32) -> Result<Outcome, CliError> {
    let spec = &sc.quad;
    let params_for = |v: Variant| match sc.construction {
        Construction::Full { variant, .. } if variant == v => full_params(sc),
        _ => FullVarifoldParams::new(v),
    };
    let (cert, expected): (ConicityCertificate, Verdict) = match variant {
        CertVariant::Nonconical => (
            nonconical_certificate(&build_full(&params_for(Variant::Nonconical))?, i, spec)?,
            Verdict::NonConicalEvidence,
        ),
        CertVariant::Conical => (
            distinct_tangents_certificate(&build_full(&params_for(Variant::Conical))?, i, spec)?,
            Verdict::DistinctTangentsEvidence,
        ),
        CertVariant::Planar => (planar_control_certificate(i, spec)?, Verdict::Inconclusive),
    };
    let mut checks = vec![Check::flag(format!("verdict {} (expected {})", cert.verdict.name(), expected.name()), cert.verdict == expected)];
    if variant != CertVariant::Planar {
        for s in &cert.scales {
            checks.push(Check::ge(format!("lambda {:e}: mass vs floor", s.lambda), s.mass, cert.mass_floor));
            checks.push(Check::ge(
                format!("lambda {:e}: fraction in the {} band", s.lambda, s.expected.name()),
                s.in_band_fraction,
                1.0 - PURITY_TOL,
            ));
        }
        checks.push(Check::lt("epsilon below epsilon0", cert.epsilon, cert.epsilon0_used));
    }
    let details = json!({ "i": i, "certificate": cert });
    Ok(Outcome::report(Report::new("certify", sc.serialize(), checks, details)))
}

pub fn export_mesh(
    sc: &Scenario,
    ring: Option<[f64; 4]>,
    resolution: usize,
    projection: Projection,
) -> Result<Outcome, CliError> {
    let [d, alpha0, t1, t2] = ring.unwrap_or_else(|| {
        let r = ring_of(sc);
        [r.0, r.1, r.2, r.3]
    });
    let mesh = ring_mesh(d, alpha0, t1, t2, resolution)?;
    let side = mesh.side();
    let params = r4varifold::minimal_surface::SurfaceParams::new(d, alpha0)?;
    let mut seam = 0.0f64;
    let mut norm_gap = 0.0f64;
    for (row, &a) in mesh.alphas.iter().enumerate() {
        let r = profile(&params, a)?.r;
        seam = seam.max((mesh.vertex(row, 0) - mesh.vertex(row, side - 1)).norm());
        for col in 0..side {
            norm_gap = norm_gap.max((mesh.vertex(row, col).norm() - r).abs() / r);
        }
    }
    let header = format!(
        "r4varifold ring d={d:?} alpha0={alpha0:?} t=({t1:?}, {t2:?}) resolution={resolution} projection={}",
        match projection {
            Projection::DropAxis(k) => format!("drop-axis x{k}"),
            Projection::Stereographic => "stereographic".into(),
            Projection::None => "none".into(),
        }
    );
    let obj = to_obj(&mesh, projection, &header);
    let checks = vec![
        Check::le(
            "vertex count - (resolution + 1)^2",
            (mesh.vertices.len() as f64 - (side * side) as f64).abs(),
            0.0,
        ),
        Check::le("seam gap between first and last column", seam, 0.0),
        Check::le("max | |x| - r(alpha) | / r(alpha)", norm_gap, 1e-12),
    ];
    let details = json!({
        "vertices": mesh.vertices.len(),
        "faces": resolution * resolution,
        "ring": [d, alpha0, t1, t2],
    });
    Ok(Outcome {
        report: Report::new("export-mesh", sc.serialize(), checks, details),
        artifact: Some(obj),
    })
}
