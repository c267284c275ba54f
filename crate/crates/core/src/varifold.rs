//! Varifolds as expression trees over three kinds of leaves (surface patches
//! of U^{d,a0}, plane annuli, and circle families of plane annuli), combined
//! by Clifford-rotation orbits, weighted sums, similarity pushforwards and
//! restriction to annuli.
//!
//! Queries carry a radial window in the local coordinates of the node they
//! reach. Windows come either from a restriction (exact) or from the support
//! of a test field (a superset is harmless since the integrand vanishes).

use std::f64::consts::{FRAC_PI_4, PI};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::field::TestVectorField;
use crate::geom4::{clifford_rotation, e, Mat4, Plane2, Vec4};
use crate::minimal_surface::{area_element, metric, unit_frame, ProfileAngle, SurfaceParams, DOMAIN_MARGIN};
use crate::quadrature::{
    cells_for, gl_rule, integrate_interval, integrate_rect, pairwise_sum, periodic_from_values, sum_estimates,
    Estimate, QuadratureSpec,
};

pub use crate::field::div_s;

const TWO_PI: f64 = 2.0 * PI;

/// World position of a local point: (q·y − shift)/scale; masses pick up
/// scale⁻².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Placement {
    pub q: Mat4,
    pub shift: Vec4,
    pub scale: f64,
}

impl Placement {
    pub fn identity() -> Self {
        Placement {
            q: Mat4::identity(),
            shift: Vec4::zeros(),
            scale: 1.0,
        }
    }

    pub fn orthogonal(q: Mat4) -> Self {
        Placement { q, ..Self::identity() }
    }

    /// self ∘ inner.
    pub fn compose(&self, inner: &Placement) -> Placement {
        Placement {
            q: self.q * inner.q,
            shift: self.q * inner.shift + self.shift * inner.scale,
            scale: self.scale * inner.scale,
        }
    }

    fn rotated(&self, phi: f64) -> Placement {
        Placement {
            q: self.q * clifford_rotation(phi),
            ..*self
        }
    }

    pub fn point(&self, y: &Vec4) -> Vec4 {
        (self.q * y - self.shift) / self.scale
    }

    pub fn direction(&self, v: &Vec4) -> Vec4 {
        self.q * v
    }

    pub fn density(&self) -> f64 {
        1.0 / (self.scale * self.scale)
    }

    fn is_linear(&self) -> bool {
        self.shift == Vec4::zeros()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Window {
    lo: f64,
    hi: f64,
    /// Set once a restriction has narrowed the window.
    exact: bool,
}

impl Window {
    fn all() -> Self {
        Window {
            lo: 0.0,
            hi: f64::INFINITY,
            exact: false,
        }
    }

    fn is_empty(&self) -> bool {
        !(self.lo < self.hi)
    }

    fn meets(&self, ext: (f64, f64)) -> bool {
        !self.is_empty() && ext.0 < self.hi && ext.1 > self.lo
    }

    /// Window in the inner coordinates of a placement.
    fn pull_back(&self, p: &Placement) -> Result<Window> {
        if p.is_linear() {
            return Ok(Window {
                lo: self.lo * p.scale,
                hi: self.hi * p.scale,
                exact: self.exact,
            });
        }
        if self.exact {
            return Err(Error::Unsupported(
                "restriction to an annulus through a translated placement".into(),
            ));
        }
        let s = p.shift.norm();
        Ok(Window {
            lo: (self.lo * p.scale - s).max(0.0),
            hi: self.hi * p.scale + s,
            exact: false,
        })
    }

    fn restricted(&self, lo: f64, hi: f64) -> Window {
        Window {
            lo: self.lo.max(lo),
            hi: self.hi.min(hi),
            exact: true,
        }
    }
}

/// Quadrature node of a varifold: world point, orthonormal tangent frame and
/// the mass it carries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub x: Vec4,
    pub u: Vec4,
    pub v: Vec4,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FirstVariationReport {
    pub value: f64,
    pub quadrature_error_estimate: f64,
    pub truncation_error_bound: f64,
}

impl FirstVariationReport {
    pub fn combined_error(&self) -> f64 {
        self.quadrature_error_estimate + self.truncation_error_bound
    }
}

/// Sub-surface of U^{d,a0} with relative angles side·(π/4 − edge), edge in
/// [edge_lo, edge_lo + width]. The width is stored separately so rings a few
/// ulps of edge_lo wide keep their exact measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PatchPiece {
    pub side: f64,
    pub edge_lo: f64,
    pub width: f64,
}

impl PatchPiece {
    fn edge_hi(&self) -> f64 {
        self.edge_lo + self.width
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchVarifold {
    pub weight: f64,
    pub params: SurfaceParams,
    pieces: Vec<PatchPiece>,
}

fn radius_at_edge(d: f64, e: f64) -> f64 {
    (d / (2.0 * e).sin()).sqrt()
}

/// Edge at which the profile reaches radius rho (0 for rho = ∞, π/4 inside
/// the vertex radius).
fn edge_at_radius(d: f64, rho: f64) -> f64 {
    if rho == f64::INFINITY {
        return 0.0;
    }
    let q = d / (rho * rho);
    if q >= 1.0 {
        FRAC_PI_4
    } else {
        0.5 * q.asin()
    }
}

/// √(ρ⁴ − d²) without cancellation near the vertex.
fn root(d: f64, rho: f64) -> f64 {
    let r2 = rho * rho;
    ((r2 - d).max(0.0) * (r2 + d)).sqrt()
}

impl PatchVarifold {
    /// Patch over the absolute angle range t1 < a < t2.
    pub fn new(weight: f64, params: SurfaceParams, t1: f64, t2: f64) -> Result<Self> {
        let lim = FRAC_PI_4 - DOMAIN_MARGIN;
        let (s1, s2) = (t1 - params.alpha0, t2 - params.alpha0);
        if !(s1 < s2) || !(s1 > -lim) || !(s2 < lim) {
            return domain(format!(
                "ring range ({t1}, {t2}) must satisfy a0 - π/4 < t1 < t2 < a0 + π/4 with a0 = {}",
                params.alpha0
            ));
        }
        let mut pieces = Vec::new();
        if s1 < 0.0 {
            let hi = s2.min(0.0);
            pieces.push(PatchPiece {
                side: -1.0,
                edge_lo: FRAC_PI_4 + s1,
                width: hi - s1,
            });
        }
        if s2 > 0.0 {
            let lo = s1.max(0.0);
            pieces.push(PatchPiece {
                side: 1.0,
                edge_lo: FRAC_PI_4 - s2,
                width: s2 - lo,
            });
        }
        Self::from_pieces(weight, params, pieces)
    }

    /// Patch on one side of the vertex, edges in [edge_lo, edge_lo + width].
    pub fn from_edges(weight: f64, params: SurfaceParams, side: f64, edge_lo: f64, width: f64) -> Result<Self> {
        Self::from_pieces(weight, params, vec![PatchPiece { side, edge_lo, width }])
    }

    fn from_pieces(weight: f64, params: SurfaceParams, pieces: Vec<PatchPiece>) -> Result<Self> {
        if !(weight > 0.0) || !weight.is_finite() {
            return domain("patch weight must be positive");
        }
        for p in &pieces {
            if p.side.abs() != 1.0 || !(p.edge_lo >= DOMAIN_MARGIN) || !(p.width > 0.0) || p.edge_hi() > FRAC_PI_4 {
                return domain(format!("invalid patch piece {p:?}"));
            }
        }
        Ok(PatchVarifold { weight, params, pieces })
    }

    pub fn pieces(&self) -> &[PatchPiece] {
        &self.pieces
    }

    /// (t1, t2) in absolute angle.
    pub fn alpha_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for p in &self.pieces {
            for e in [p.edge_lo, p.edge_hi()] {
                let a = self.params.alpha_at(ProfileAngle::from_edge(p.side, e));
                lo = lo.min(a);
                hi = hi.max(a);
            }
        }
        (lo, hi)
    }

    pub fn radial_extent(&self) -> (f64, f64) {
        let d = self.params.d;
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        for p in &self.pieces {
            lo = lo.min(radius_at_edge(d, p.edge_hi()));
            hi = hi.max(radius_at_edge(d, p.edge_lo));
        }
        (lo, hi)
    }

    /// Mass of one piece inside lo ≤ ‖x‖ ≤ hi.
    fn piece_mass(&self, p: &PatchPiece, lo: f64, hi: f64) -> f64 {
        let d = self.params.d;
        let r_in = radius_at_edge(d, p.edge_hi());
        let r_out = radius_at_edge(d, p.edge_lo);
        if lo <= r_in && hi >= r_out {
            let (e0, e1) = (p.edge_lo, p.edge_hi());
            return PI * d * (2.0 * p.width).sin() / ((2.0 * e0).sin() * (2.0 * e1).sin());
        }
        let a = lo.max(r_in);
        let b = hi.min(r_out);
        if !(a < b) {
            return 0.0;
        }
        // √(ρ⁴ − d²) = d cot 2e, exact at the piece's own ends.
        let g = |rho: f64, end: f64, e: f64| if rho == end { d / (2.0 * e).tan() } else { root(d, rho) };
        let ga = g(a, r_in, p.edge_hi());
        let gb = g(b, r_out, p.edge_lo);
        PI * (b - a) * (b + a) * (b * b + a * a) / (gb + ga)
    }

    fn mass_window(&self, lo: f64, hi: f64) -> f64 {
        self.weight * self.pieces.iter().map(|p| self.piece_mass(p, lo, hi)).sum::<f64>()
    }

    /// Closed-form mass π d (tan 2(t2 − a0) − tan 2(t1 − a0)), times weight.
    pub fn mass(&self) -> f64 {
        self.mass_window(0.0, f64::INFINITY)
    }

    /// Independent check of `mass`: √(g11 g22) integrated over (a, b).
    pub fn mass_by_quadrature(&self, spec: &QuadratureSpec) -> Result<Estimate> {
        let (t1, t2) = self.alpha_range();
        let params = self.params;
        let f = |a: f64, b: f64| {
            let g = metric(&params, a, b).expect("alpha inside the patch");
            (g.g11 * g.g22).sqrt()
        };
        let lim = FRAC_PI_4 - DOMAIN_MARGIN;
        let t1 = t1.max(params.alpha0 - lim);
        let t2 = t2.min(params.alpha0 + lim);
        Ok(integrate_rect(&f, (t1, t2), (0.0, TWO_PI), spec) * self.weight)
    }

    /// Edge sub-interval of a piece whose radii fall in [lo, hi], as
    /// offsets from edge_lo.
    fn piece_span(&self, p: &PatchPiece, lo: f64, hi: f64) -> Option<(f64, f64)> {
        let d = self.params.d;
        let r_in = radius_at_edge(d, p.edge_hi());
        let r_out = radius_at_edge(d, p.edge_lo);
        if lo <= r_in && hi >= r_out {
            return Some((0.0, p.width));
        }
        if r_out <= lo || r_in >= hi {
            return None;
        }
        let u0 = if hi < r_out { (edge_at_radius(d, hi) - p.edge_lo).max(0.0) } else { 0.0 };
        let u1 = if lo > r_in { (edge_at_radius(d, lo) - p.edge_lo).min(p.width) } else { p.width };
        (u0 < u1).then_some((u0, u1))
    }

    /// Local point, unit tangent frame and area element at edge offset u.
    fn node(&self, p: &PatchPiece, u: f64, beta: f64) -> (Vec4, Vec4, Vec4, f64) {
        let e = p.edge_lo + u;
        let ang = ProfileAngle::from_edge(p.side, e);
        let (n, ta, tb) = unit_frame(&self.params, ang, beta);
        (n * self.params.radius(ang), ta, tb, area_element(&self.params, ang))
    }

    fn first_variation(&self, field: &TestVectorField, pl: &Placement, win: Window, spec: &QuadratureSpec) -> Estimate {
        let w = self.weight * pl.density();
        let mut parts = Vec::new();
        for p in &self.pieces {
            let Some((u0, u1)) = self.piece_span(p, win.lo, win.hi) else { continue };
            let f = |u: f64, beta: f64| {
                let (x, ta, tb, area) = self.node(p, u, beta);
                let dx = field.jacobian(&pl.point(&x));
                let (a, b) = (pl.direction(&ta), pl.direction(&tb));
                area * (a.dot(&(dx * a)) + b.dot(&(dx * b)))
            };
            let spec = match field.angular_feature() {
                Some(_) => spec.resolving(self.piece_lengths(p, (u0, u1), pl.scale), field.angular_feature()),
                None => spec.clone(),
            };
            parts.push(integrate_rect(&f, (u0, u1), (0.0, TWO_PI), &spec) * w);
        }
        sum_estimates(&parts)
    }

    /// Physical (profile arc, widest parallel circle) lengths of a piece.
    fn piece_lengths(&self, p: &PatchPiece, (u0, u1): (f64, f64), scale: f64) -> [f64; 2] {
        const N: usize = 16;
        let xs: Vec<Vec4> = (0..=N)
            .map(|i| self.node(p, u0 + (u1 - u0) * i as f64 / N as f64, 0.0).0)
            .collect();
        let arc: f64 = xs.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
        let r = xs.iter().map(|x| x.norm()).fold(0.0, f64::max);
        [arc / scale, TWO_PI * r / scale]
    }

    fn for_each_sample(&self, pl: &Placement, win: Window, spec: &QuadratureSpec, f: &mut dyn FnMut(&Sample)) {
        let w = self.weight * pl.density();
        for p in &self.pieces {
            let Some((u0, u1)) = self.piece_span(p, win.lo, win.hi) else { continue };
            tensor_nodes((u0, u1), (0.0, TWO_PI), spec, |u, beta, wt| {
                let (x, ta, tb, area) = self.node(p, u, beta);
                f(&Sample {
                    x: pl.point(&x),
                    u: pl.direction(&ta),
                    v: pl.direction(&tb),
                    weight: w * wt * area,
                });
            });
        }
    }

    fn scaled(&self, lambda: f64) -> PatchVarifold {
        PatchVarifold {
            params: SurfaceParams {
                d: self.params.d / (lambda * lambda),
                alpha0: self.params.alpha0,
            },
            ..self.clone()
        }
    }
}

/// Fixed tensor Gauss-Legendre nodes on the uniform initial grid of `spec`.
fn tensor_nodes(x: (f64, f64), y: (f64, f64), spec: &QuadratureSpec, mut f: impl FnMut(f64, f64, f64)) {
    let [sx, sy] = spec.subdivisions;
    let rx = gl_rule(spec.order[0]);
    let ry = gl_rule(spec.order[1]);
    let hx = (x.1 - x.0) / sx as f64;
    let hy = (y.1 - y.0) / sy as f64;
    for i in 0..sx {
        let cx = x.0 + hx * (i as f64 + 0.5);
        for &(ti, wi) in rx {
            let px = cx + 0.5 * hx * ti;
            for j in 0..sy {
                let cy = y.0 + hy * (j as f64 + 0.5);
                for &(tj, wj) in ry {
                    f(px, cy + 0.5 * hy * tj, 0.25 * hx * hy * wi * wj);
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanarAnnulusVarifold {
    pub weight: f64,
    pub plane: Plane2,
    pub r_inner: f64,
    pub r_outer: f64,
}

impl PlanarAnnulusVarifold {
    pub fn new(weight: f64, plane: Plane2, r_inner: f64, r_outer: f64) -> Result<Self> {
        if !(weight > 0.0) || !weight.is_finite() {
            return domain("annulus weight must be positive");
        }
        if !(r_inner >= 0.0 && r_inner < r_outer) {
            return domain(format!("annulus radii must satisfy 0 ≤ r_inner < r_outer, got {r_inner}, {r_outer}"));
        }
        Ok(PlanarAnnulusVarifold {
            weight,
            plane,
            r_inner,
            r_outer,
        })
    }

    fn clip(&self, win: Window) -> (f64, f64) {
        (self.r_inner.max(win.lo), self.r_outer.min(win.hi))
    }

    fn mass_window(&self, win: Window) -> f64 {
        let (a, b) = self.clip(win);
        if !(a < b) {
            return 0.0;
        }
        self.weight * PI * (b - a) * (b + a)
    }

    fn first_variation(&self, field: &TestVectorField, pl: &Placement, win: Window, spec: &QuadratureSpec) -> Result<Estimate> {
        let (a, b) = self.clip(win);
        if !(a < b) {
            return Ok(Estimate::default());
        }
        if !b.is_finite() {
            return Err(Error::Window("unbounded annulus needs a compactly supported field".into()));
        }
        Ok(annulus_first_variation(&self.plane, field, pl, (a, b), spec) * self.weight)
    }

    fn for_each_sample(&self, pl: &Placement, win: Window, spec: &QuadratureSpec, f: &mut dyn FnMut(&Sample)) -> Result<()> {
        let (a, b) = self.clip(win);
        if !(a < b) {
            return Ok(());
        }
        if !b.is_finite() {
            return Err(Error::Window("cannot sample an unbounded annulus".into()));
        }
        let (u, v) = self.plane.frame();
        let (uw, vw) = (pl.direction(&u), pl.direction(&v));
        let w = self.weight * pl.density();
        tensor_nodes((a, b), (0.0, TWO_PI), spec, |rho, th, wt| {
            let (s, c) = th.sin_cos();
            f(&Sample {
                x: pl.point(&((u * c + v * s) * rho)),
                u: uw,
                v: vw,
                weight: w * wt * rho,
            });
        });
        Ok(())
    }
}

/// ∫ div_S X over the plane annulus a ≤ ρ ≤ b, in polar coordinates.
fn annulus_first_variation(plane: &Plane2, field: &TestVectorField, pl: &Placement, (a, b): (f64, f64), spec: &QuadratureSpec) -> Estimate {
    let (u, v) = plane.frame();
    let (uw, vw) = (pl.direction(&u), pl.direction(&v));
    let f = |rho: f64, th: f64| {
        let (s, c) = th.sin_cos();
        let dx = field.jacobian(&pl.point(&((u * c + v * s) * rho)));
        rho * (uw.dot(&(dx * uw)) + vw.dot(&(dx * vw)))
    };
    let spec = spec.resolving([(b - a) / pl.scale, TWO_PI * b / pl.scale], field.angular_feature());
    integrate_rect(&f, (a, b), (0.0, TWO_PI), &spec) * pl.density()
}

/// Plane of the g1 family (which = 1) or g2 family (which = 2) at angle φ.
pub fn family_plane(which: u8, phi: f64) -> Plane2 {
    let (s, c) = phi.sin_cos();
    match which {
        1 => Plane2::from_orthonormal(Vec4::new(c, s, 0.0, 0.0), Vec4::new(0.0, 0.0, c, s)),
        _ => Plane2::from_orthonormal(Vec4::new(c, 0.0, s, 0.0), Vec4::new(0.0, c, 0.0, s)),
    }
}

/// φ_{i,r,s#}(H¹ × L²): plane annuli over the unit circle of parameters.
/// Total mass 2π·π(s² − r²)·weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FamilyVarifold {
    pub which: u8,
    pub r_inner: f64,
    pub r_outer: f64,
    pub weight: f64,
}

impl FamilyVarifold {
    pub fn new(which: u8, r_inner: f64, r_outer: f64, weight: f64) -> Result<Self> {
        if which != 1 && which != 2 {
            return domain("family must be 1 or 2");
        }
        if !(r_inner >= 0.0 && r_inner < r_outer) || !(weight > 0.0) {
            return domain(format!("invalid family radii ({r_inner}, {r_outer}) or weight {weight}"));
        }
        Ok(FamilyVarifold {
            which,
            r_inner,
            r_outer,
            weight,
        })
    }

    fn clip(&self, win: Window) -> (f64, f64) {
        (self.r_inner.max(win.lo), self.r_outer.min(win.hi))
    }

    fn mass_window(&self, win: Window) -> f64 {
        let (a, b) = self.clip(win);
        if !(a < b) {
            return 0.0;
        }
        self.weight * TWO_PI * PI * (b - a) * (b + a)
    }

    fn first_variation(&self, field: &TestVectorField, pl: &Placement, win: Window, spec: &QuadratureSpec) -> Result<Estimate> {
        let (a, b) = self.clip(win);
        if !(a < b) {
            return Ok(Estimate::default());
        }
        if !b.is_finite() {
            return Err(Error::Window("unbounded family needs a compactly supported field".into()));
        }
        if field.is_rotation_invariant() && pl.is_linear() {
            let one = annulus_first_variation(&family_plane(self.which, 0.0), field, pl, (a, b), spec);
            return Ok(one * (TWO_PI * self.weight));
        }
        let n = spec.circle_nodes;
        let nodes: Vec<Estimate> = (0..n)
            .into_par_iter()
            .map(|j| annulus_first_variation(&family_plane(self.which, TWO_PI * j as f64 / n as f64), field, pl, (a, b), spec))
            .collect();
        let vals: Vec<f64> = nodes.iter().map(|e| e.value).collect();
        let trap = periodic_from_values(&vals);
        let h = TWO_PI / n as f64;
        let inner = sum_estimates(&nodes) * h;
        let unresolved = unresolved_penalty(n, TWO_PI * b / pl.scale, field, inner.scale);
        Ok(Estimate {
            value: trap.value,
            error: trap.error + inner.error + unresolved,
            scale: inner.scale,
        } * self.weight)
    }

    fn for_each_sample(&self, pl: &Placement, win: Window, spec: &QuadratureSpec, f: &mut dyn FnMut(&Sample)) -> Result<()> {
        let n = spec.circle_nodes;
        for j in 0..n {
            let plane = family_plane(self.which, TWO_PI * j as f64 / n as f64);
            let atom = PlanarAnnulusVarifold::new(self.weight * TWO_PI / n as f64, plane, self.r_inner, self.r_outer)?;
            atom.for_each_sample(pl, win, spec, f)?;
        }
        Ok(())
    }
}

/// Σ_{i<count} (R̃_{phase + 2πi/count})_# base for the Clifford rotation R̃.
#[derive(Debug, Clone, PartialEq)]
pub struct Orbit {
    pub base: Box<Varifold>,
    pub count: u64,
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarifoldSum {
    terms: Vec<(f64, Varifold)>,
    pub truncation_index: i64,
    /// Upper bound on the mass omitted by truncation inside the ball of
    /// radius `outer_limit`.
    pub tail_mass_bound: f64,
    /// Queries reaching beyond this radius are outside the represented part.
    pub outer_limit: f64,
    extent: (f64, f64),
}

impl VarifoldSum {
    pub fn new(terms: Vec<(f64, Varifold)>) -> Result<Self> {
        if let Some((c, _)) = terms.iter().find(|(c, _)| !(*c > 0.0) || !c.is_finite()) {
            return domain(format!("sum coefficients must be positive, got {c}"));
        }
        let extent = terms.iter().fold((f64::INFINITY, 0.0f64), |acc, (_, v)| {
            let e = v.radial_extent();
            (acc.0.min(e.0), acc.1.max(e.1))
        });
        Ok(VarifoldSum {
            terms,
            truncation_index: 0,
            tail_mass_bound: 0.0,
            outer_limit: f64::INFINITY,
            extent,
        })
    }

    pub fn with_truncation(mut self, index: i64, tail_mass_bound: f64) -> Self {
        self.truncation_index = index;
        self.tail_mass_bound = tail_mass_bound;
        self
    }

    pub fn with_outer_limit(mut self, r: f64) -> Self {
        self.outer_limit = r;
        self
    }

    pub fn terms(&self) -> &[(f64, Varifold)] {
        &self.terms
    }

    fn check_window(&self, win: Window) -> Result<()> {
        if win.hi > self.outer_limit * (1.0 + 1e-12) {
            return Err(Error::Window(format!(
                "query radius {} exceeds the represented radius {}",
                win.hi, self.outer_limit
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Moved {
    pub inner: Box<Varifold>,
    pub placement: Placement,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Restricted {
    pub inner: Box<Varifold>,
    pub r_inner: f64,
    pub r_outer: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Varifold {
    Patch(PatchVarifold),
    Annulus(PlanarAnnulusVarifold),
    Family(FamilyVarifold),
    Orbit(Orbit),
    Sum(VarifoldSum),
    Moved(Moved),
    Restricted(Restricted),
}

impl From<PatchVarifold> for Varifold {
    fn from(v: PatchVarifold) -> Self {
        Varifold::Patch(v)
    }
}
impl From<PlanarAnnulusVarifold> for Varifold {
    fn from(v: PlanarAnnulusVarifold) -> Self {
        Varifold::Annulus(v)
    }
}
impl From<FamilyVarifold> for Varifold {
    fn from(v: FamilyVarifold) -> Self {
        Varifold::Family(v)
    }
}
impl From<VarifoldSum> for Varifold {
    fn from(v: VarifoldSum) -> Self {
        Varifold::Sum(v)
    }
}

fn check_region(s1: f64, s2: f64) -> Result<()> {
    if !(s1 >= 0.0) || !(s1 <= s2) {
        return domain(format!("annulus radii must satisfy 0 ≤ s1 ≤ s2, got {s1}, {s2}"));
    }
    Ok(())
}

impl Varifold {
    pub fn orbit(base: Varifold, count: u64, phase: f64) -> Result<Varifold> {
        if count == 0 {
            return domain("orbit needs at least one member");
        }
        Ok(Varifold::Orbit(Orbit {
            base: Box::new(base),
            count,
            phase,
        }))
    }

    /// Radii (inner, outer) containing the support, in local coordinates.
    pub fn radial_extent(&self) -> (f64, f64) {
        match self {
            Varifold::Patch(p) => p.radial_extent(),
            Varifold::Annulus(a) => (a.r_inner, a.r_outer),
            Varifold::Family(f) => (f.r_inner, f.r_outer),
            Varifold::Orbit(o) => o.base.radial_extent(),
            Varifold::Sum(s) => s.extent,
            Varifold::Moved(m) => {
                let (lo, hi) = m.inner.radial_extent();
                let p = &m.placement;
                let s = p.shift.norm();
                (((lo - s) / p.scale).max(0.0), (hi + s) / p.scale)
            }
            Varifold::Restricted(r) => {
                let (lo, hi) = r.inner.radial_extent();
                (lo.max(r.r_inner), hi.min(r.r_outer))
            }
        }
    }

    /// Mass of the represented (truncated) measure.
    pub fn mass(&self) -> Result<f64> {
        self.mass_window(Window::all())
    }

    /// μ(A_{s1}^{s2}) = V(G₂({s1 ≤ ‖x‖ ≤ s2})).
    pub fn mass_in(&self, s1: f64, s2: f64) -> Result<f64> {
        check_region(s1, s2)?;
        self.mass_window(Window {
            lo: s1,
            hi: s2,
            exact: true,
        })
    }

    fn mass_window(&self, win: Window) -> Result<f64> {
        if !win.meets(self.radial_extent()) {
            return Ok(0.0);
        }
        match self {
            Varifold::Patch(p) => Ok(p.mass_window(win.lo, win.hi)),
            Varifold::Annulus(a) => Ok(a.mass_window(win)),
            Varifold::Family(f) => Ok(f.mass_window(win)),
            Varifold::Orbit(o) => Ok(o.count as f64 * o.base.mass_window(win)?),
            Varifold::Sum(s) => {
                s.check_window(win)?;
                let parts = s
                    .terms
                    .iter()
                    .map(|(c, v)| Ok(c * v.mass_window(win)?))
                    .collect::<Result<Vec<f64>>>()?;
                Ok(pairwise_sum(&parts))
            }
            Varifold::Moved(m) => {
                let full = win.lo == 0.0 && win.hi == f64::INFINITY;
                if !m.placement.is_linear() && !full {
                    return Err(Error::Unsupported(
                        "annulus mass of a translated varifold (annuli are centred at 0)".into(),
                    ));
                }
                let inner = if full { win } else { win.pull_back(&m.placement)? };
                Ok(m.placement.density() * m.inner.mass_window(inner)?)
            }
            Varifold::Restricted(r) => r.inner.mass_window(win.restricted(r.r_inner, r.r_outer)),
        }
    }

    /// Certified bound on the mass omitted by truncations anywhere in the tree.
    pub fn tail_mass(&self) -> f64 {
        match self {
            Varifold::Patch(_) | Varifold::Annulus(_) | Varifold::Family(_) => 0.0,
            Varifold::Orbit(o) => o.count as f64 * o.base.tail_mass(),
            Varifold::Sum(s) => s.tail_mass_bound + s.terms.iter().map(|(c, v)| c * v.tail_mass()).sum::<f64>(),
            Varifold::Moved(m) => m.placement.density() * m.inner.tail_mass(),
            Varifold::Restricted(r) => r.inner.tail_mass(),
        }
    }

    /// δV(X) = ∫ div_S X dV(x, S) by adaptive quadrature, with the truncation
    /// bound c1_norm_bound(X) · tail mass.
    pub fn first_variation(&self, field: &TestVectorField, spec: &QuadratureSpec) -> Result<FirstVariationReport> {
        spec.validate()?;
        let (lo, hi) = field.radial_support();
        let win = Window { lo, hi, exact: false };
        let est = self.fv(field, &Placement::identity(), win, spec)?;
        Ok(FirstVariationReport {
            value: est.value,
            quadrature_error_estimate: est.error,
            truncation_error_bound: field.c1_norm_bound() * self.tail_mass(),
        })
    }

    fn fv(&self, field: &TestVectorField, pl: &Placement, win: Window, spec: &QuadratureSpec) -> Result<Estimate> {
        if !win.meets(self.radial_extent()) {
            return Ok(Estimate::default());
        }
        match self {
            Varifold::Patch(p) => Ok(p.first_variation(field, pl, win, spec)),
            Varifold::Annulus(a) => a.first_variation(field, pl, win, spec),
            Varifold::Family(f) => f.first_variation(field, pl, win, spec),
            Varifold::Orbit(o) => orbit_first_variation(o, field, pl, win, spec),
            Varifold::Sum(s) => {
                s.check_window(win)?;
                let parts = s
                    .terms
                    .par_iter()
                    .map(|(c, v)| Ok(v.fv(field, pl, win, spec)? * *c))
                    .collect::<Result<Vec<Estimate>>>()?;
                Ok(sum_estimates(&parts))
            }
            Varifold::Moved(m) => {
                let inner = win.pull_back(&m.placement)?;
                m.inner.fv(field, &pl.compose(&m.placement), inner, spec)
            }
            Varifold::Restricted(r) => r.inner.fv(field, pl, win.restricted(r.r_inner, r.r_outer), spec),
        }
    }

    /// Visit the fixed (non-adaptive) quadrature nodes of the measure inside
    /// s1 ≤ ‖x‖ ≤ s2. Orbits with more than `orbit_nodes` members are
    /// represented by that many equally spaced members, reweighted.
    pub fn for_each_sample(&self, s1: f64, s2: f64, spec: &QuadratureSpec, f: &mut dyn FnMut(&Sample)) -> Result<()> {
        check_region(s1, s2)?;
        let win = Window {
            lo: s1,
            hi: s2,
            exact: true,
        };
        self.samples(&Placement::identity(), win, spec, f)
    }

    fn samples(&self, pl: &Placement, win: Window, spec: &QuadratureSpec, f: &mut dyn FnMut(&Sample)) -> Result<()> {
        if !win.meets(self.radial_extent()) {
            return Ok(());
        }
        match self {
            Varifold::Patch(p) => {
                p.for_each_sample(pl, win, spec, f);
                Ok(())
            }
            Varifold::Annulus(a) => a.for_each_sample(pl, win, spec, f),
            Varifold::Family(fam) => fam.for_each_sample(pl, win, spec, f),
            Varifold::Orbit(o) => {
                let k = o.count.min(spec.orbit_nodes as u64);
                let reweight = o.count as f64 / k as f64;
                for j in 0..k {
                    let node = pl.rotated(o.phase + TWO_PI * j as f64 / k as f64);
                    let mut g = |s: &Sample| f(&Sample { weight: s.weight * reweight, ..*s });
                    o.base.samples(&node, win, spec, &mut g)?;
                }
                Ok(())
            }
            Varifold::Sum(s) => {
                s.check_window(win)?;
                for (c, v) in &s.terms {
                    let mut g = |smp: &Sample| f(&Sample { weight: smp.weight * c, ..*smp });
                    v.samples(pl, win, spec, &mut g)?;
                }
                Ok(())
            }
            Varifold::Moved(m) => {
                let inner = win.pull_back(&m.placement)?;
                m.inner.samples(&pl.compose(&m.placement), inner, spec, f)
            }
            Varifold::Restricted(r) => r.inner.samples(pl, win.restricted(r.r_inner, r.r_outer), spec, f),
        }
    }

    /// η_{x0,λ#}V for η(y) = (y − x0)/λ, normalised so that
    /// mass(out, A) = λ⁻² mass(V, x0 + λA). About the origin the geometric
    /// parameters are rescaled in closed form.
    pub fn pushforward_scale(&self, x0: &Vec4, lambda: f64) -> Result<Varifold> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return domain(format!("scale must be positive, got {lambda}"));
        }
        if *x0 == Vec4::zeros() {
            return Ok(self.scaled(lambda));
        }
        Ok(Varifold::Moved(Moved {
            inner: Box::new(self.clone()),
            placement: Placement {
                q: Mat4::identity(),
                shift: *x0,
                scale: lambda,
            },
        }))
    }

    fn scaled(&self, lambda: f64) -> Varifold {
        if lambda == 1.0 {
            return self.clone();
        }
        match self {
            Varifold::Patch(p) => Varifold::Patch(p.scaled(lambda)),
            Varifold::Annulus(a) => Varifold::Annulus(PlanarAnnulusVarifold {
                r_inner: a.r_inner / lambda,
                r_outer: a.r_outer / lambda,
                ..a.clone()
            }),
            Varifold::Family(f) => Varifold::Family(FamilyVarifold {
                r_inner: f.r_inner / lambda,
                r_outer: f.r_outer / lambda,
                ..*f
            }),
            Varifold::Orbit(o) => Varifold::Orbit(Orbit {
                base: Box::new(o.base.scaled(lambda)),
                ..o.clone()
            }),
            Varifold::Sum(s) => Varifold::Sum(VarifoldSum {
                terms: s.terms.iter().map(|(c, v)| (*c, v.scaled(lambda))).collect(),
                truncation_index: s.truncation_index,
                tail_mass_bound: s.tail_mass_bound / (lambda * lambda),
                outer_limit: s.outer_limit / lambda,
                extent: (s.extent.0 / lambda, s.extent.1 / lambda),
            }),
            Varifold::Moved(m) => {
                if m.placement.is_linear() {
                    Varifold::Moved(Moved {
                        inner: Box::new(m.inner.scaled(lambda)),
                        placement: m.placement,
                    })
                } else {
                    Varifold::Moved(Moved {
                        inner: m.inner.clone(),
                        placement: Placement {
                            scale: m.placement.scale * lambda,
                            ..m.placement
                        },
                    })
                }
            }
            Varifold::Restricted(r) => Varifold::Restricted(Restricted {
                inner: Box::new(r.inner.scaled(lambda)),
                r_inner: r.r_inner / lambda,
                r_outer: r.r_outer / lambda,
            }),
        }
    }

    /// Pushforward by an orthogonal map q.
    pub fn transformed(&self, q: &Mat4) -> Varifold {
        Varifold::Moved(Moved {
            inner: Box::new(self.clone()),
            placement: Placement::orthogonal(*q),
        })
    }

    /// V ⌐ G₂(A_{s1}^{s2}).
    pub fn restrict(&self, s1: f64, s2: f64) -> Result<Varifold> {
        check_region(s1, s2)?;
        Ok(Varifold::Restricted(Restricted {
            inner: Box::new(self.clone()),
            r_inner: s1,
            r_outer: s2,
        }))
    }
}

/// Σ cᵢVᵢ with positive coefficients.
pub fn add(terms: Vec<(f64, Varifold)>) -> Result<Varifold> {
    Ok(Varifold::Sum(VarifoldSum::new(terms)?))
}

/// Initial number of sampled orbit members before doubling.
const ORBIT_START: usize = 32;

/// Even starting member count for a sampled orbit whose points travel at
/// most `reach` in one turn: spacing below half the field's angular feature
/// when the cap allows.
fn orbit_start(cap: usize, reach: f64, field: &TestVectorField) -> usize {
    let need = field.angular_feature().map_or(0, |f| cells_for(reach, f));
    (ORBIT_START.max(need).min(cap) & !1).max(2)
}

/// Error charged when `nodes` equally spaced samples along a loop of length
/// `reach` cannot resolve the field: the whole scale, since a bump may fall
/// between samples.
fn unresolved_penalty(nodes: usize, reach: f64, field: &TestVectorField, scale: f64) -> f64 {
    match field.angular_feature() {
        Some(f) if reach / nodes as f64 > 0.5 * f => scale,
        _ => 0.0,
    }
}

fn orbit_first_variation(o: &Orbit, field: &TestVectorField, pl: &Placement, win: Window, spec: &QuadratureSpec) -> Result<Estimate> {
    if field.is_rotation_invariant() && pl.is_linear() {
        return Ok(o.base.fv(field, &pl.rotated(o.phase), win, spec)? * o.count as f64);
    }
    let node = |phi: f64| o.base.fv(field, &pl.rotated(o.phase + phi), win, spec);
    if o.count <= spec.orbit_nodes as u64 {
        let k = o.count as usize;
        let parts = (0..k)
            .into_par_iter()
            .map(|i| node(TWO_PI * i as f64 / k as f64))
            .collect::<Result<Vec<Estimate>>>()?;
        return Ok(sum_estimates(&parts));
    }
    // Equally spaced members, doubled until the K and K/2 sums agree.
    let cap = spec.orbit_nodes.max(2);
    let reach = TWO_PI * o.base.radial_extent().1.min(win.hi) / pl.scale;
    let mut k = orbit_start(cap, reach, field);
    let mut vals = (0..k)
        .into_par_iter()
        .map(|j| node(TWO_PI * j as f64 / k as f64))
        .collect::<Result<Vec<Estimate>>>()?;
    let count = o.count as f64;
    loop {
        let sum = sum_estimates(&vals);
        let half: Vec<Estimate> = vals.iter().step_by(2).copied().collect();
        let coarse = sum_estimates(&half).value * (count / (k / 2) as f64);
        let fine = sum * (count / k as f64);
        let alias = (fine.value - coarse).abs();
        if alias <= spec.target_rel_error * fine.scale || 2 * k > cap {
            return Ok(Estimate {
                error: fine.error + alias + unresolved_penalty(k, reach, field, fine.scale),
                ..fine
            });
        }
        let odd = (0..k)
            .into_par_iter()
            .map(|j| node(TWO_PI * (2 * j + 1) as f64 / (2 * k) as f64))
            .collect::<Result<Vec<Estimate>>>()?;
        vals = vals.into_iter().zip(odd).flat_map(|(a, b)| [a, b]).collect();
        k *= 2;
    }
}

/// ∫_{S(ρ, α)} X·N dH¹ with S(ρ, α) = {ρ B(β) A(α)}.
fn circle_flux(rho: f64, alpha: f64, field: &TestVectorField, spec: &QuadratureSpec) -> Estimate {
    let f = |beta: f64| {
        let n = crate::minimal_surface::ba(alpha, beta);
        field.eval(&(n * rho)).dot(&n) * rho
    };
    let spec = spec.resolving([TWO_PI * rho; 2], field.angular_feature());
    integrate_interval(&f, 0.0, TWO_PI, &spec)
}

/// B_{ρ,k}(X) = (1/k) Σ_{i=1}^{k} ∫_{S(ρ, 2iπ/k)} X·N dH¹. For k beyond
/// `orbit_nodes` the circle average is sampled like a rotation orbit.
pub fn boundary_functional_k(rho: f64, k: u64, field: &TestVectorField, spec: &QuadratureSpec) -> Result<Estimate> {
    if !(rho > 0.0) || k == 0 {
        return domain(format!("boundary functional needs rho > 0 and k ≥ 1, got {rho}, {k}"));
    }
    let (lo, hi) = field.radial_support();
    if rho <= lo || rho >= hi {
        return Ok(Estimate::default());
    }
    if field.is_rotation_invariant() {
        return Ok(circle_flux(rho, 0.0, field, spec));
    }
    let flux = |alpha: f64| circle_flux(rho, alpha, field, spec);
    if k <= spec.orbit_nodes as u64 {
        let parts: Vec<Estimate> = (1..=k).into_par_iter().map(|i| flux(TWO_PI * i as f64 / k as f64)).collect();
        return Ok(sum_estimates(&parts) * (1.0 / k as f64));
    }
    let cap = spec.orbit_nodes.max(2);
    let reach = TWO_PI * rho;
    let mut n = orbit_start(cap, reach, field);
    let mut vals: Vec<Estimate> = (0..n).into_par_iter().map(|j| flux(TWO_PI * j as f64 / n as f64)).collect();
    loop {
        let fine = sum_estimates(&vals) * (1.0 / n as f64);
        let half: Vec<Estimate> = vals.iter().step_by(2).copied().collect();
        let coarse = sum_estimates(&half).value / (n / 2) as f64;
        let alias = (fine.value - coarse).abs();
        if alias <= spec.target_rel_error * fine.scale || 2 * n > cap {
            return Ok(Estimate {
                error: fine.error + alias + unresolved_penalty(n, reach, field, fine.scale),
                ..fine
            });
        }
        let odd: Vec<Estimate> = (0..n)
            .into_par_iter()
            .map(|j| flux(TWO_PI * (2 * j + 1) as f64 / (2 * n) as f64))
            .collect();
        vals = vals.into_iter().zip(odd).flat_map(|(a, b)| [a, b]).collect();
        n *= 2;
    }
}

/// B_{ρ,∞}(X) = (ρ/2π) ∫∫ X·N da db over the torus F((ρS¹) × S¹), the
/// k → ∞ limit of B_{ρ,k}.
pub fn boundary_functional_inf(rho: f64, field: &TestVectorField, spec: &QuadratureSpec) -> Result<Estimate> {
    if !(rho > 0.0) {
        return domain(format!("boundary functional needs rho > 0, got {rho}"));
    }
    let (lo, hi) = field.radial_support();
    if rho <= lo || rho >= hi {
        return Ok(Estimate::default());
    }
    if field.is_rotation_invariant() {
        return Ok(circle_flux(rho, 0.0, field, spec));
    }
    let f = |a: f64, b: f64| {
        let n = crate::minimal_surface::ba(a, b);
        field.eval(&(n * rho)).dot(&n)
    };
    let spec = spec.resolving([TWO_PI * rho; 2], field.angular_feature());
    Ok(integrate_rect(&f, (0.0, TWO_PI), (0.0, TWO_PI), &spec) * (rho / TWO_PI))
}

/// ρ(d, r1, r2) with √(r2⁴−d²) − √(r1⁴−d²) = (r2²−r1²)/√(1−d²/ρ⁴).
pub fn mean_value_rho(d: f64, r1: f64, r2: f64) -> Result<f64> {
    let (a, b) = if r1 < r2 { (r1, r2) } else { (r2, r1) };
    if !(d >= 0.0) || a == b || !(d.sqrt() <= a) {
        return domain(format!("mean value radius needs √d ≤ min(r1, r2) and r1 ≠ r2, got d={d}, r1={r1}, r2={r2}"));
    }
    // √(1 − d²/ρ⁴) = (√(b⁴−d²) + √(a⁴−d²))/(b² + a²) =: q.
    let q = (root(d, b) + root(d, a)) / (b * b + a * a);
    let one_minus_q2 = (1.0 - q) * (1.0 + q);
    if !(one_minus_q2 > 0.0) {
        return Ok(a);
    }
    let rho = (d / one_minus_q2.sqrt()).sqrt();
    Ok(rho.clamp(a, b))
}

/// Plane span{e_i, e_j} for 0-based indices.
pub fn coordinate_plane(i: usize, j: usize) -> Plane2 {
    Plane2::from_orthonormal(e(i), e(j))
}
