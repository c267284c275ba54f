//! Density profiles, stationarity residuals, blow-ups, direction-band
//! classification and the finite-scale conicity certificates.
//!
//! Certificates are evidence at the sampled scales only: convergence of the
//! blow-ups is not checked.

use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::Serialize;

use crate::constructions::{FullVarifold, FullVarifoldParams, Variant};
use crate::error::{domain, Error, Result};
use crate::field::TestVectorField;
use crate::geom4::{band_achieved_unit, epsilon0_estimate, BandKind, Vec4};
use crate::minimal_surface::evaluate;
use crate::quadrature::{integrate_interval, Estimate, QuadratureSpec};
use crate::varifold::{coordinate_plane, FirstVariationReport, PatchVarifold, PlanarAnnulusVarifold, Varifold};

const TWO_PI: f64 = 2.0 * PI;

/// ∫_{∂ at t2} X·η dH¹ − ∫_{∂ at t1} X·η dH¹ with η the unit vector along
/// ∂U/∂α and dH¹ = r(t) dβ: the first variation of a ring from its boundary
/// circles alone.
pub fn ring_boundary_variation(ring: &PatchVarifold, field: &TestVectorField, spec: &QuadratureSpec) -> Result<Estimate> {
    let (t1, t2) = ring.alpha_range();
    let params = ring.params;
    let circle = |t: f64| -> Result<Estimate> {
        let f = |beta: f64| {
            let p = evaluate(&params, t, beta).expect("checked above");
            let eta = p.du_dalpha.normalize();
            field.eval(&p.position).dot(&eta) * p.du_dbeta.norm()
        };
        let r = evaluate(&params, t, 0.0)?.position.norm();
        let spec = spec.resolving([TWO_PI * r; 2], field.angular_feature());
        Ok(integrate_interval(&f, 0.0, TWO_PI, &spec))
    };
    let outer = circle(t2)?;
    let inner = circle(t1)?;
    Ok(Estimate {
        value: outer.value - inner.value,
        error: outer.error + inner.error,
        scale: outer.scale + inner.scale,
    } * ring.weight)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityProfile {
    pub radii: Vec<f64>,
    /// μ(A₀^r)/r² of the represented measure.
    pub ratios: Vec<f64>,
    /// Mass possibly missing below the truncation window, divided by r².
    pub truncation_slack: Vec<f64>,
    /// Certified [lower, upper] per radius, when known.
    pub bands: Vec<Option<(f64, f64)>>,
    pub shells: Vec<Option<i32>>,
    /// Ratio at the smallest radius, as the estimate of θ²(V, 0).
    pub limit_estimate: f64,
    pub limit_band: Option<(f64, f64)>,
}

impl DensityProfile {
    /// Every ratio inside its band, allowing for the truncation slack.
    pub fn within_bands(&self) -> bool {
        self.ratios
            .iter()
            .zip(&self.truncation_slack)
            .zip(&self.bands)
            .all(|((r, s), b)| match b {
                Some((lo, hi)) => r + s >= *lo && r <= hi,
                None => true,
            })
    }
}

fn smallest(radii: &[f64]) -> Result<usize> {
    if radii.is_empty() {
        return domain("density profile needs at least one radius");
    }
    if let Some(r) = radii.iter().find(|r| !(**r > 0.0)) {
        return domain(format!("density radii must be positive, got {r}"));
    }
    Ok((0..radii.len())
        .min_by(|&a, &b| radii[a].total_cmp(&radii[b]))
        .expect("nonempty"))
}

/// Ratios μ(A₀^r)/r² without bands.
pub fn density_profile(v: &Varifold, radii: &[f64]) -> Result<DensityProfile> {
    let i0 = smallest(radii)?;
    let ratios = radii
        .iter()
        .map(|&r| Ok(v.mass_in(0.0, r)? / (r * r)))
        .collect::<Result<Vec<f64>>>()?;
    Ok(DensityProfile {
        radii: radii.to_vec(),
        limit_estimate: ratios[i0],
        ratios,
        truncation_slack: vec![0.0; radii.len()],
        bands: vec![None; radii.len()],
        shells: vec![None; radii.len()],
        limit_band: None,
    })
}

/// Ratios of a full shell varifold with the bands
/// C⁽∞⁾(1 − ε⁽ⁿ⁾)π ≤ μ(A₀^R)/R² ≤ C⁽ⁿ⁾(1 + ε⁽ⁿ⁾)π.
pub fn full_density_profile(full: &FullVarifold, radii: &[f64]) -> Result<DensityProfile> {
    let mut prof = density_profile(&full.varifold, radii)?;
    for (j, &r) in radii.iter().enumerate() {
        let (n, lo, hi) = full.density_band(r)?;
        prof.bands[j] = Some((lo, hi));
        prof.shells[j] = Some(n);
        let inside: f64 = full
            .shells
            .iter()
            .filter(|s| s.radii().0 < r)
            .map(|s| s.coefficient * s.layer.varifold.tail_mass())
            .sum();
        prof.truncation_slack[j] = (full.inner_tail + inside) / (r * r);
    }
    let i0 = smallest(radii)?;
    prof.limit_band = prof.bands[i0];
    Ok(prof)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationarityRow {
    pub field: usize,
    /// Innermost shell kept; `None` for a plain varifold.
    pub truncation: Option<i32>,
    pub residual: f64,
    pub quadrature_error: f64,
    /// ‖X‖_{C¹} times the omitted mass.
    pub truncation_bound: f64,
    /// Bound on the boundary functional left at the innermost kept radius.
    pub boundary_term: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationarityTable {
    pub rows: Vec<StationarityRow>,
}

impl StationarityTable {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn for_field(&self, field: usize) -> Vec<&StationarityRow> {
        self.rows.iter().filter(|r| r.field == field).collect()
    }
}

/// |δV(X)| against the combined quadrature and truncation error of the
/// varifold itself (no boundary is expected).
pub fn stationarity_check(v: &Varifold, field: &TestVectorField, spec: &QuadratureSpec) -> Result<StationarityRow> {
    let rep = v.first_variation(field, spec)?;
    Ok(row(0, None, &rep, 0.0))
}

fn row(field: usize, truncation: Option<i32>, rep: &FirstVariationReport, boundary: f64) -> StationarityRow {
    let bound = rep.combined_error() + boundary;
    StationarityRow {
        field,
        truncation,
        residual: rep.value.abs(),
        quadrature_error: rep.quadrature_error_estimate,
        truncation_bound: rep.truncation_error_bound,
        boundary_term: boundary,
        bound,
        pass: rep.value.abs() <= bound,
    }
}

/// Residuals of Σ_{n=−N}^{t} C⁽ⁿ⁾V⁽ⁿ⁾ for every field and every innermost
/// shell t. The exact value is −C⁽ᵗ⁺¹⁾ B_{R1⁽ᵗ⁾,∞}(X), bounded by
/// C⁽ᵗ⁺¹⁾ 2π (R1⁽ᵗ⁾)² sup‖DX‖ because the torus average of N vanishes.
/// Each shell is integrated once and the truncations are prefix sums.
pub fn stationarity_suite(
    full: &FullVarifold,
    fields: &[TestVectorField],
    truncations: &[i32],
    spec: &QuadratureSpec,
) -> Result<StationarityTable> {
    let w = full.params.window;
    if let Some(t) = truncations.iter().find(|t| t.abs() > w) {
        return Err(Error::Window(format!("truncation {t} outside the shell window ±{w}")));
    }
    let mut rows = Vec::new();
    for (fi, field) in fields.iter().enumerate() {
        let (lo, hi) = field.radial_support();
        if hi >= full.outer_radius() {
            return Err(Error::Window(format!(
                "field support radius {hi} reaches the outer window radius {}",
                full.outer_radius()
            )));
        }
        let per_shell = full
            .shells
            .iter()
            .map(|s| {
                let (a, b) = s.radii();
                if b <= lo || a >= hi {
                    return Ok(FirstVariationReport {
                        value: 0.0,
                        quadrature_error_estimate: 0.0,
                        truncation_error_bound: 0.0,
                    });
                }
                let r = s.layer.varifold.first_variation(field, spec)?;
                let c = s.coefficient;
                Ok(FirstVariationReport {
                    value: c * r.value,
                    quadrature_error_estimate: c * r.quadrature_error_estimate,
                    truncation_error_bound: c * r.truncation_error_bound,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        for &t in truncations {
            let mut acc = FirstVariationReport {
                value: 0.0,
                quadrature_error_estimate: 0.0,
                truncation_error_bound: 0.0,
            };
            for (s, r) in full.shells.iter().zip(&per_shell) {
                if s.n <= t {
                    acc.value += r.value;
                    acc.quadrature_error_estimate += r.quadrature_error_estimate;
                    acc.truncation_error_bound += r.truncation_error_bound;
                }
            }
            let rho = full.params.r1(t);
            let boundary = if rho > lo && rho < hi {
                full.coefficient(t + 1)? * TWO_PI * rho * rho * field.sup_jacobian()
            } else {
                0.0
            };
            rows.push(row(fi, Some(t), &acc, boundary));
        }
    }
    Ok(StationarityTable { rows })
}

/// η_{x0,λ#}V for each λ.
pub fn blowup_sample(v: &Varifold, x0: &Vec4, lambdas: &[f64]) -> Result<Vec<Varifold>> {
    lambdas.iter().map(|&l| v.pushforward_scale(x0, l)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandReport {
    pub annulus: (f64, f64),
    pub epsilon_grid: Vec<f64>,
    /// Sum of sample weights.
    pub total_mass: f64,
    pub mass_j13: Vec<f64>,
    pub mass_j12: Vec<f64>,
    /// Mass whose plane lies in both bands at ε.
    pub overlap: Vec<f64>,
    pub samples: usize,
}

impl BandReport {
    pub fn mass_in_band(&self, kind: BandKind) -> &[f64] {
        match kind {
            BandKind::J13 => &self.mass_j13,
            BandKind::J12 => &self.mass_j12,
        }
    }

    pub fn fraction(&self, kind: BandKind, i: usize) -> f64 {
        if self.total_mass > 0.0 {
            self.mass_in_band(kind)[i] / self.total_mass
        } else {
            0.0
        }
    }
}

/// Quadrature-weighted mass of V ⌐ G₂(A_{s1}^{s2}) whose (x, S) lies in
/// G^ε_{rad,J13} and G^ε_{rad,J12}, for every ε of the grid.
pub fn band_classify(v: &Varifold, annulus: (f64, f64), epsilon_grid: &[f64], spec: &QuadratureSpec) -> Result<BandReport> {
    let (s1, s2) = annulus;
    if !(s1 > 0.0 && s1 < s2 && s2.is_finite()) {
        return domain(format!("band classification needs 0 < s1 < s2 < ∞, got {s1}, {s2}"));
    }
    let g = epsilon_grid.len();
    let mut rep = BandReport {
        annulus,
        epsilon_grid: epsilon_grid.to_vec(),
        total_mass: 0.0,
        mass_j13: vec![0.0; g],
        mass_j12: vec![0.0; g],
        overlap: vec![0.0; g],
        samples: 0,
    };
    v.for_each_sample(s1, s2, spec, &mut |s| {
        let n = s.x / s.x.norm();
        let a13 = band_achieved_unit(&n, &s.u, &s.v, BandKind::J13);
        let a12 = band_achieved_unit(&n, &s.u, &s.v, BandKind::J12);
        rep.total_mass += s.weight;
        rep.samples += 1;
        for (i, &eps) in epsilon_grid.iter().enumerate() {
            let (in13, in12) = (a13 <= eps, a12 <= eps);
            if in13 {
                rep.mass_j13[i] += s.weight;
            }
            if in12 {
                rep.mass_j12[i] += s.weight;
            }
            if in13 && in12 {
                rep.overlap[i] += s.weight;
            }
        }
    })?;
    Ok(rep)
}

/// Minimum over 100 cone directions of the band-disjointness threshold,
/// computed once per process.
pub fn epsilon0() -> Result<f64> {
    static CELL: OnceLock<std::result::Result<f64, Error>> = OnceLock::new();
    CELL.get_or_init(|| epsilon0_estimate(100).map(|e| e.value)).clone()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    NonConicalEvidence,
    DistinctTangentsEvidence,
    Inconclusive,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::NonConicalEvidence => "non-conical-evidence",
            Verdict::DistinctTangentsEvidence => "distinct-tangents-evidence",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

/// Share of the sampled mass allowed outside the expected band.
pub const PURITY_TOL: f64 = 1e-9;
/// Slack on the (3π/2) C⁽∞⁾ mass floor.
pub const MASS_FLOOR_SLACK: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaleEvidence {
    pub lambda: f64,
    pub expected: BandKind,
    /// Closed-form mass of the blow-up in the annulus.
    pub mass: f64,
    pub in_band_fraction: f64,
    pub other_band_fraction: f64,
    pub report: BandReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConicityCertificate {
    pub annulus: (f64, f64),
    pub epsilon: f64,
    pub epsilon0_used: f64,
    pub mass_floor: f64,
    pub scales: Vec<ScaleEvidence>,
    pub verdict: Verdict,
    /// Why the verdict is inconclusive, or sanity notes.
    pub reasons: Vec<String>,
    pub note: String,
}

const FINITE_SCALE_NOTE: &str = "evidence at the sampled scales; convergence of the blow-ups is not certified";

fn inconclusive(annulus: (f64, f64), reason: String) -> ConicityCertificate {
    ConicityCertificate {
        annulus,
        epsilon: 0.0,
        epsilon0_used: 0.0,
        mass_floor: 0.0,
        scales: Vec::new(),
        verdict: Verdict::Inconclusive,
        reasons: vec![reason],
        note: FINITE_SCALE_NOTE.into(),
    }
}

/// Blow up V about 0 at two scales and classify both in one annulus. The
/// verdict is `success` only when each blow-up is pure in its expected band,
/// the two expected bands differ and are disjoint at ε (ε < ε₀), and both
/// masses clear the floor.
#[allow(clippy::too_many_arguments)]
pub fn compare_scales(
    v: &Varifold,
    scales: [(f64, BandKind); 2],
    annulus: (f64, f64),
    epsilon: f64,
    epsilon0: f64,
    mass_floor: f64,
    success: Verdict,
    spec: &QuadratureSpec,
) -> Result<ConicityCertificate> {
    let mut reasons = Vec::new();
    let mut evidence = Vec::new();
    for (lambda, expected) in scales {
        let blown = v.pushforward_scale(&Vec4::zeros(), lambda)?;
        let mass = blown.mass_in(annulus.0, annulus.1)?;
        let report = band_classify(&blown, annulus, &[epsilon], spec)?;
        let in_band = report.fraction(expected, 0);
        let other = report.fraction(expected.other(), 0);
        if in_band < 1.0 - PURITY_TOL {
            reasons.push(format!("scale {lambda:e}: only {in_band} of the mass in the {} band", expected.name()));
        }
        if other > PURITY_TOL {
            reasons.push(format!("scale {lambda:e}: {other} of the mass in the {} band", expected.other().name()));
        }
        if report.overlap[0] > 0.0 {
            reasons.push(format!("scale {lambda:e}: bands overlap at ε = {epsilon}"));
        }
        if !(mass >= mass_floor) {
            reasons.push(format!("scale {lambda:e}: mass {mass} below floor {mass_floor}"));
        }
        evidence.push(ScaleEvidence {
            lambda,
            expected,
            mass,
            in_band_fraction: in_band,
            other_band_fraction: other,
            report,
        });
    }
    if scales[0].1 == scales[1].1 {
        reasons.push("both scales expect the same band".into());
    }
    if !(epsilon < epsilon0) {
        reasons.push(format!("ε = {epsilon} is not below ε₀ = {epsilon0}"));
    }
    Ok(ConicityCertificate {
        annulus,
        epsilon,
        epsilon0_used: epsilon0,
        mass_floor,
        scales: evidence,
        verdict: if reasons.is_empty() { success } else { Verdict::Inconclusive },
        reasons,
        note: FINITE_SCALE_NOTE.into(),
    })
}

/// Blow-ups at λ = 4^{-i} and λ/2 over A_{R1⁽⁰⁾}^{R4⁽⁰⁾}: shells 2i (J13) and
/// 2i + 1 (J12) land on the same annulus.
pub fn nonconical_certificate(full: &FullVarifold, i: u32, spec: &QuadratureSpec) -> Result<ConicityCertificate> {
    let p = &full.params;
    let annulus = (p.r1(0), p.r4(0));
    if p.variant != Variant::Nonconical {
        return Ok(inconclusive(annulus, "input is not the nonconical variant".into()));
    }
    let (n_a, n_b) = (2 * i as i32, 2 * i as i32 + 1);
    if i == 0 || n_b > p.window {
        return Ok(inconclusive(
            annulus,
            format!("shells {n_a} and {n_b} must lie in the window ±{} with i ≥ 1", p.window),
        ));
    }
    let eps0 = epsilon0()?;
    let epsilon = (eps0 / 2.0).min(FullVarifoldParams::epsilon(n_a));
    let lambda = 4f64.powi(-(i as i32));
    let floor = (1.0 - MASS_FLOOR_SLACK) * 1.5 * PI * full.c_inf.lower;
    compare_scales(
        &full.varifold,
        [(lambda, FullVarifoldParams::band(n_a)), (lambda / 2.0, FullVarifoldParams::band(n_b))],
        annulus,
        epsilon,
        eps0,
        floor,
        Verdict::NonConicalEvidence,
        spec,
    )
}

/// The nonconical test run on the flat cone span{e1,e3} with unit density.
/// A plane is its own blow-up, so the verdict must be inconclusive.
pub fn planar_control_certificate(i: u32, spec: &QuadratureSpec) -> Result<ConicityCertificate> {
    let p = FullVarifoldParams::new(Variant::Nonconical);
    let plane: Varifold = PlanarAnnulusVarifold::new(1.0, coordinate_plane(0, 2), 0.0, f64::INFINITY)?.into();
    let (n_a, n_b) = (2 * i as i32, 2 * i as i32 + 1);
    let eps0 = epsilon0()?;
    let lambda = 4f64.powi(-(i as i32));
    compare_scales(
        &plane,
        [(lambda, FullVarifoldParams::band(n_a)), (lambda / 2.0, FullVarifoldParams::band(n_b))],
        (p.r1(0), p.r4(0)),
        (eps0 / 2.0).min(FullVarifoldParams::epsilon(n_a)),
        eps0,
        (1.0 - MASS_FLOOR_SLACK) * 1.5 * PI,
        Verdict::NonConicalEvidence,
        spec,
    )
}

/// Blow-ups at λᵢ = i R1⁽²ⁱ⁾ and λ̃ᵢ = i R1⁽²ⁱ⁺¹⁾ over A₁².
pub fn distinct_tangents_certificate(full: &FullVarifold, i: u32, spec: &QuadratureSpec) -> Result<ConicityCertificate> {
    let p = &full.params;
    let annulus = (1.0, 2.0);
    if p.variant != Variant::Conical {
        return Ok(inconclusive(annulus, "input is not the conical variant".into()));
    }
    let (n_a, n_b) = (2 * i as i32, 2 * i as i32 + 1);
    if i == 0 || n_b > p.window {
        return Ok(inconclusive(
            annulus,
            format!("shells {n_a} and {n_b} must lie in the window ±{} with i ≥ 1", p.window),
        ));
    }
    let eps0 = epsilon0()?;
    let epsilon = (eps0 / 2.0).min(FullVarifoldParams::epsilon(n_a));
    let fi = i as f64;
    let (lambda, lambda_t) = (fi * p.r1(n_a), fi * p.r1(n_b));
    let floor = (1.0 - MASS_FLOOR_SLACK) * 1.5 * PI * full.c_inf.lower;
    let mut cert = compare_scales(
        &full.varifold,
        [(lambda, FullVarifoldParams::band(n_a)), (lambda_t, FullVarifoldParams::band(n_b))],
        annulus,
        epsilon,
        eps0,
        floor,
        Verdict::DistinctTangentsEvidence,
        spec,
    )?;
    for (n, l) in [(n_a, lambda), (n_b, lambda_t)] {
        let (a, b) = (p.r1(n) / l, p.r4(n) / l);
        cert.reasons.push(format!("shell {n}: R1/λ = {a}, R4/λ = {b:e}"));
        if !(a < annulus.0 && b > annulus.1) {
            cert.reasons.push(format!("shell {n} does not cover the annulus at this i"));
            cert.verdict = Verdict::Inconclusive;
        }
    }
    Ok(cert)
}
