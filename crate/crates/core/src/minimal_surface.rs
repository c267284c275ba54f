//! The minimal surfaces U^{d,a0}(a, b) = r(a) B(b) A(a) with
//! r(a) = sqrt(d / cos 2(a - a0)).

use std::f64::consts::{FRAC_PI_4, PI};

use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::geom4::{band_achieved, j13, j_matrix, BandKind, Mat4, Plane2, Vec4};

/// Rejection margin at the edge |a - a0| = π/4 where r blows up.
pub const DOMAIN_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SurfaceParams {
    pub d: f64,
    pub alpha0: f64,
}

impl SurfaceParams {
    pub fn new(d: f64, alpha0: f64) -> Result<Self> {
        if !(d > 0.0) || !d.is_finite() || !alpha0.is_finite() {
            return domain(format!("surface needs d > 0 and finite alpha0, got d={d}, alpha0={alpha0}"));
        }
        Ok(SurfaceParams { d, alpha0 })
    }

    fn check(&self, alpha: f64) -> Result<ProfileAngle> {
        let s = alpha - self.alpha0;
        if !(s.abs() < FRAC_PI_4 - DOMAIN_MARGIN) {
            return domain(format!("outside profile domain: |alpha - alpha0| = {}", s.abs()));
        }
        Ok(ProfileAngle::from_offset(s))
    }

    /// Parameter alpha at a relative angle.
    pub fn alpha_at(&self, ang: ProfileAngle) -> f64 {
        self.alpha0 + ang.offset()
    }

    /// r(a) = sqrt(d / cos 2s).
    pub fn radius(&self, ang: ProfileAngle) -> f64 {
        (self.d / ang.cos2()).sqrt()
    }
}

/// Relative angle s = a - a0 stored as side·(π/4 - edge).
///
/// Rings in deep mini-layers sit within 1e-9 of the singular edge and are
/// 1e-17 wide in a; the edge distance keeps full relative precision there
/// where a - a0 would not.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfileAngle {
    pub side: f64,
    pub edge: f64,
}

impl ProfileAngle {
    pub fn from_offset(s: f64) -> Self {
        ProfileAngle {
            side: if s < 0.0 { -1.0 } else { 1.0 },
            edge: FRAC_PI_4 - s.abs(),
        }
    }

    pub fn from_edge(side: f64, edge: f64) -> Self {
        ProfileAngle { side, edge }
    }

    pub fn offset(&self) -> f64 {
        self.side * (FRAC_PI_4 - self.edge)
    }

    /// cos 2s = sin 2·edge.
    pub fn cos2(&self) -> f64 {
        (2.0 * self.edge).sin()
    }

    /// sin 2s, exact zero at the vertex.
    pub fn sin2(&self) -> f64 {
        self.side * (2.0 * (FRAC_PI_4 - self.edge)).sin()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Profile {
    pub r: f64,
    pub dr: f64,
    pub ddr: f64,
}

pub(crate) fn profile_at(params: &SurfaceParams, ang: ProfileAngle) -> Profile {
    let c = ang.cos2();
    let sn = ang.sin2();
    let sd = params.d.sqrt();
    let r = sd / c.sqrt();
    let dr = sd * c.powf(-1.5) * sn;
    let ddr = sd * (3.0 * c.powf(-2.5) * sn * sn + 2.0 / c.sqrt());
    Profile { r, dr, ddr }
}

/// r, r', r'' in closed form.
pub fn profile(params: &SurfaceParams, alpha: f64) -> Result<Profile> {
    let ang = params.check(alpha)?;
    Ok(profile_at(params, ang))
}

pub fn a_vec(alpha: f64) -> Vec4 {
    Vec4::new(alpha.cos(), alpha.sin(), 0.0, 0.0)
}

pub fn a_prime(alpha: f64) -> Vec4 {
    Vec4::new(-alpha.sin(), alpha.cos(), 0.0, 0.0)
}

pub fn b_mat(beta: f64) -> Mat4 {
    j_matrix(beta.cos(), beta.sin())
}

/// B'(b) = J(0,1) B(b).
pub fn b_prime(beta: f64) -> Mat4 {
    j_matrix(-beta.sin(), beta.cos())
}

/// B(b) A(a) written out.
pub fn ba(alpha: f64, beta: f64) -> Vec4 {
    let (sa, ca) = alpha.sin_cos();
    let (sb, cb) = beta.sin_cos();
    Vec4::new(ca * cb, sa * cb, ca * sb, sa * sb)
}

/// B(b) A'(a) written out.
pub fn ba_prime(alpha: f64, beta: f64) -> Vec4 {
    let (sa, ca) = alpha.sin_cos();
    let (sb, cb) = beta.sin_cos();
    Vec4::new(-sa * cb, ca * cb, -sa * sb, ca * sb)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SurfacePoint {
    pub alpha: f64,
    pub beta: f64,
    pub position: Vec4,
    pub du_dalpha: Vec4,
    pub du_dbeta: Vec4,
}

pub fn evaluate(params: &SurfaceParams, alpha: f64, beta: f64) -> Result<SurfacePoint> {
    let ang = params.check(alpha)?;
    let p = profile_at(params, ang);
    let n = ba(alpha, beta);
    let np = ba_prime(alpha, beta);
    Ok(SurfacePoint {
        alpha,
        beta,
        position: n * p.r,
        du_dalpha: n * p.dr + np * p.r,
        du_dbeta: j13() * n * p.r,
    })
}

/// Unit tangent frame (co-normal direction, circle direction) at a relative
/// angle. The co-normal is B(sin 2s A + cos 2s A').
pub(crate) fn unit_frame(params: &SurfaceParams, ang: ProfileAngle, beta: f64) -> (Vec4, Vec4, Vec4) {
    let alpha = params.alpha_at(ang);
    let n = ba(alpha, beta);
    let np = ba_prime(alpha, beta);
    let t_alpha = n * ang.sin2() + np * ang.cos2();
    let t_beta = Vec4::new(-n[2], -n[3], n[0], n[1]);
    (n, t_alpha, t_beta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricTensor {
    pub g11: f64,
    pub g12: f64,
    pub g22: f64,
}

pub fn metric(params: &SurfaceParams, alpha: f64, _beta: f64) -> Result<MetricTensor> {
    let p = profile(params, alpha)?;
    Ok(MetricTensor {
        g11: p.dr * p.dr + p.r * p.r,
        g12: 0.0,
        g22: p.r * p.r,
    })
}

/// Area element sqrt(g11 g22) = d / cos² 2s.
pub(crate) fn area_element(params: &SurfaceParams, ang: ProfileAngle) -> f64 {
    let c = ang.cos2();
    params.d / (c * c)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CurvatureMode {
    Analytic,
    FiniteDifference { h: f64 },
}

fn normal_part(w: &Vec4, t1: &Vec4, t2: &Vec4) -> Vec4 {
    let e1 = t1.normalize();
    let t2p = t2 - e1 * e1.dot(t2);
    let e2 = t2p.normalize();
    w - e1 * e1.dot(w) - e2 * e2.dot(w)
}

/// (g^11 U_aa + g^22 U_bb) with its tangential part removed.
pub fn mean_curvature(params: &SurfaceParams, alpha: f64, beta: f64, mode: CurvatureMode) -> Result<Vec4> {
    let ang = params.check(alpha)?;
    match mode {
        CurvatureMode::Analytic => {
            let p = profile_at(params, ang);
            let n = ba(alpha, beta);
            let np = ba_prime(alpha, beta);
            let u_a = n * p.dr + np * p.r;
            let u_b = j13() * n * p.r;
            let u_aa = n * (p.ddr - p.r) + np * (2.0 * p.dr);
            let u_bb = -n * p.r;
            let w = u_aa / (p.dr * p.dr + p.r * p.r) + u_bb / (p.r * p.r);
            Ok(normal_part(&w, &u_a, &u_b))
        }
        CurvatureMode::FiniteDifference { h } => {
            let r = |a: f64| (params.d / (2.0 * (a - params.alpha0)).cos()).sqrt();
            fd_mean_curvature(|a, b| ba(a, b) * r(a), alpha, beta, h)
        }
    }
}

/// Central-difference mean curvature of an arbitrary orthogonal
/// parametrization. Used as the oracle for the closed form and for
/// perturbed negative controls.
pub fn fd_mean_curvature(u: impl Fn(f64, f64) -> Vec4, alpha: f64, beta: f64, h: f64) -> Result<Vec4> {
    if !(h > 0.0) {
        return domain("finite-difference step must be positive");
    }
    let u0 = u(alpha, beta);
    let (uap, uam) = (u(alpha + h, beta), u(alpha - h, beta));
    let (ubp, ubm) = (u(alpha, beta + h), u(alpha, beta - h));
    let u_a = (uap - uam) / (2.0 * h);
    let u_b = (ubp - ubm) / (2.0 * h);
    let u_aa = (uap - u0 * 2.0 + uam) / (h * h);
    let u_bb = (ubp - u0 * 2.0 + ubm) / (h * h);
    let g11 = u_a.dot(&u_a);
    let g22 = u_b.dot(&u_b);
    let w = u_aa / g11 + u_bb / g22;
    if !w.iter().all(|x| x.is_finite()) {
        return Err(Error::Numerical("finite-difference stencil left the domain".into()));
    }
    Ok(normal_part(&w, &u_a, &u_b))
}

/// |r r'' - 3 r'² - 2 r²|.
pub fn ode_residual(params: &SurfaceParams, alpha: f64) -> Result<f64> {
    let p = profile(params, alpha)?;
    Ok((p.r * p.ddr - 3.0 * p.dr * p.dr - 2.0 * p.r * p.r).abs())
}

/// Unit vector along dU/da.
pub fn conormal(params: &SurfaceParams, alpha: f64, beta: f64) -> Result<Vec4> {
    let ang = params.check(alpha)?;
    Ok(unit_frame(params, ang, beta).1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoRingsGap {
    pub gap: Vec4,
    /// 2 sin 2(a - a1) N(U).
    pub expected: Vec4,
    /// |U^{d,a1}(a,b) - U^{d,a2}(a,b)|.
    pub position_mismatch: f64,
}

/// Co-normal difference of the two surfaces with vertices a1 and a2 along
/// the circle where they touch, midway between the vertices.
pub fn two_rings_gap(d: f64, alpha1: f64, alpha2: f64, alpha: f64, beta: f64) -> Result<TwoRingsGap> {
    let s1 = alpha - alpha1;
    let s2 = alpha2 - alpha;
    if (s1 - s2).abs() > 1e-12 * (1.0 + s1.abs()) || !(0.0..FRAC_PI_4).contains(&s1) {
        return domain(format!("two rings need a - a1 = a2 - a in [0, pi/4), got {s1} and {s2}"));
    }
    let p1 = SurfaceParams::new(d, alpha1)?;
    let p2 = SurfaceParams::new(d, alpha2)?;
    let x1 = evaluate(&p1, alpha, beta)?;
    let x2 = evaluate(&p2, alpha, beta)?;
    let gap = conormal(&p1, alpha, beta)? - conormal(&p2, alpha, beta)?;
    let expected = x1.position.normalize() * (2.0 * (2.0 * s1).sin());
    Ok(TwoRingsGap {
        gap,
        expected,
        position_mismatch: (x1.position - x2.position).norm(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TangentPlane {
    pub plane: Plane2,
    /// 2 cos 2(a - a0).
    pub band_bound: f64,
    /// Achieved ε of the J13 band at this point.
    pub achieved: f64,
}

pub fn tangent_plane(params: &SurfaceParams, alpha: f64, beta: f64) -> Result<TangentPlane> {
    let ang = params.check(alpha)?;
    let pt = evaluate(params, alpha, beta)?;
    let plane = Plane2::from_vectors(&pt.du_dalpha, &pt.du_dbeta)?;
    let achieved = band_achieved(&pt.position, &plane, BandKind::J13)?;
    Ok(TangentPlane {
        plane,
        band_bound: 2.0 * ang.cos2(),
        achieved,
    })
}

/// n equispaced points of the circle rho·B(b)A(a), b = 2πj/n.
pub fn circle_points(rho: f64, alpha: f64, n: usize) -> Vec<Vec4> {
    (0..n)
        .map(|j| ba(alpha, 2.0 * PI * j as f64 / n as f64) * rho)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom4::e;
    use std::f64::consts::FRAC_PI_8;

    fn p(d: f64, a0: f64) -> SurfaceParams {
        SurfaceParams::new(d, a0).unwrap()
    }

    #[test]
    fn profile_examples() {
        let pr = profile(&p(1.0, 0.0), 0.0).unwrap();
        assert_eq!((pr.r, pr.dr), (1.0, 0.0));
        assert!((pr.ddr - 2.0).abs() < 1e-15);
        assert_eq!(profile(&p(4.0, 0.0), 0.0).unwrap().r, 2.0);
        let r = profile(&p(1.0, 0.0), FRAC_PI_8).unwrap().r;
        assert!((r - 2f64.powf(0.25)).abs() < 1e-15);
        assert!(profile(&p(1.0, 0.0), FRAC_PI_4).is_err());
    }

    #[test]
    fn sqrt_formula() {
        let par = p(2.5, 0.3);
        let a = 0.3 + 0.6;
        let pr = profile(&par, a).unwrap();
        let want = par.d.sqrt() * (2.0 * 0.6f64).cos().powf(-1.5);
        assert!(((pr.dr * pr.dr + pr.r * pr.r).sqrt() - want).abs() < 1e-12 * want);
    }

    #[test]
    fn evaluate_examples() {
        let pt = evaluate(&p(1.0, 0.0), 0.0, 0.0).unwrap();
        assert_eq!(pt.position, e(0));
        assert!((pt.du_dalpha - e(1)).norm() < 1e-15);
        assert!((pt.du_dbeta - e(2)).norm() < 1e-15);
        let pt = evaluate(&p(1.0, 0.0), 0.0, PI / 2.0).unwrap();
        assert!((pt.position - e(2)).norm() < 1e-15);
        let a = evaluate(&p(1.3, 0.2), 0.5, 0.9).unwrap();
        let b = evaluate(&p(1.3, 0.2), 0.5, 0.9 + 2.0 * PI).unwrap();
        assert!((a.position - b.position).norm() < 1e-14);
    }

    #[test]
    fn metric_examples() {
        let g = metric(&p(1.0, 0.0), 0.0, 0.3).unwrap();
        assert_eq!((g.g11, g.g12, g.g22), (1.0, 0.0, 1.0));
        let g = metric(&p(1.0, 0.0), FRAC_PI_8, 0.0).unwrap();
        assert!((g.g22 - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn curvature_and_ode() {
        let par = p(3.0, 0.4);
        let a = 0.4 + FRAC_PI_8;
        assert!(mean_curvature(&par, a, 1.1, CurvatureMode::Analytic).unwrap().norm() < 1e-10);
        let fd = mean_curvature(&par, a, 1.1, CurvatureMode::FiniteDifference { h: 1e-4 }).unwrap();
        assert!(fd.norm() < 1e-6, "{}", fd.norm());
        let res = ode_residual(&par, a).unwrap();
        let r = profile(&par, a).unwrap().r;
        assert!(res / (r * r) < 1e-10);
        assert!(ode_residual(&p(1.0, 0.0), 0.0).unwrap() < 1e-12);
    }

    #[test]
    fn wrong_profiles_are_not_minimal() {
        let par = p(1.0, 0.0);
        let bad_ode = |a: f64| {
            // r = sqrt(d / cos(a - a0)) and its exact derivatives.
            let c = a.cos();
            let r = c.powf(-0.5);
            let dr = 0.5 * c.powf(-1.5) * a.sin();
            let ddr = 0.75 * c.powf(-2.5) * a.sin().powi(2) + 0.5 * c.powf(-0.5);
            (r * ddr - 3.0 * dr * dr - 2.0 * r * r).abs()
        };
        assert!(bad_ode(0.3) > 1e-3);
        let perturbed = |a: f64, b: f64| {
            let r = (par.d / (2.0 * a).cos()).sqrt() * (1.0 + 0.01 * a.sin());
            ba(a, b) * r
        };
        let worst = (0..20)
            .map(|i| {
                let a = -0.6 + 0.06 * i as f64;
                fd_mean_curvature(perturbed, a, 0.2, 1e-4).unwrap().norm()
            })
            .fold(0.0, f64::max);
        assert!(worst > 1e-3, "{worst}");
    }

    #[test]
    fn conormal_examples() {
        let c = conormal(&p(1.0, 0.0), 0.0, 0.0).unwrap();
        assert!((c - e(1)).norm() < 1e-15);
        let c = conormal(&p(2.0, 1.0), 1.3, 2.0).unwrap();
        assert!((c.norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn two_rings_examples() {
        let g = two_rings_gap(1.0, 0.3, 0.3, 0.3, 0.4).unwrap();
        assert!(g.gap.norm() < 1e-15);
        let g = two_rings_gap(1.0, 0.0, FRAC_PI_8, FRAC_PI_8 / 2.0, 0.0).unwrap();
        let want = g.expected;
        assert!((g.gap - want).norm() < 1e-10);
        assert!((want.norm() - 2.0 * FRAC_PI_8.sin()).abs() < 1e-14);
        assert!(g.position_mismatch < 1e-14);
        assert!(two_rings_gap(1.0, 0.0, 0.3, 0.1, 0.0).is_err());
    }

    #[test]
    fn tangent_plane_examples() {
        let t = tangent_plane(&p(1.0, 0.0), 0.0, 0.0).unwrap();
        let want = Plane2::from_vectors(&e(1), &e(2)).unwrap();
        assert!(t.plane.distance(&want) < 1e-14);
        assert_eq!(t.band_bound, 2.0);
        let a = FRAC_PI_4 - 1e-3;
        let t = tangent_plane(&p(1.0, 0.0), a, 0.7).unwrap();
        assert!(t.achieved <= t.band_bound + 1e-10);
        assert!(t.band_bound < 0.0041);
    }

    #[test]
    fn circle_examples() {
        let c = circle_points(1.0, 0.0, 4);
        let want = [e(0), e(2), -e(0), -e(2)];
        for (a, b) in c.iter().zip(want.iter()) {
            assert!((a - b).norm() < 1e-15);
        }
        let c = circle_points(2.0, PI / 2.0, 1);
        assert!((c[0] - e(1) * 2.0).norm() < 1e-15);
    }

    #[test]
    fn edge_representation_matches_offset() {
        let par = p(0.7, -0.2);
        let s = 0.5;
        let a = ProfileAngle::from_offset(s);
        assert!((a.offset() - s).abs() < 1e-16);
        let p1 = profile_at(&par, a);
        let p2 = profile(&par, -0.2 + s).unwrap();
        assert!((p1.r - p2.r).abs() < 1e-14);
        let (_, ta, tb) = unit_frame(&par, a, 0.4);
        let pt = evaluate(&par, -0.2 + s, 0.4).unwrap();
        assert!((ta - pt.du_dalpha.normalize()).norm() < 1e-14);
        assert!((tb - pt.du_dbeta.normalize()).norm() < 1e-14);
    }
}
