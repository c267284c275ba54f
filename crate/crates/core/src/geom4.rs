//! Linear algebra on R^4 and the Grassmannian G(4,2).

use std::f64::consts::{FRAC_PI_2, PI};

use argmin::core::{CostFunction, Executor, State};
use argmin::solver::neldermead::NelderMead;
use nalgebra::{Matrix4, SymmetricEigen, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{domain, Error, Result};

pub type Vec4 = Vector4<f64>;
pub type Mat4 = Matrix4<f64>;

pub const IDENTITY_TOL: f64 = 1e-12;
pub const SEARCH_TOL: f64 = 1e-10;

pub fn e(i: usize) -> Vec4 {
    let mut v = Vec4::zeros();
    v[i] = 1.0;
    v
}

/// F((a,b),(c,d)) = (ac, bc, ad, bd).
pub fn f_map(ab: (f64, f64), cd: (f64, f64)) -> Vec4 {
    let (a, b) = ab;
    let (c, d) = cd;
    Vec4::new(a * c, b * c, a * d, b * d)
}

pub type ParamPair = ((f64, f64), (f64, f64));

/// All parameter pairs with |(a,b)| = t mapping onto `x`.
///
/// Since |F(p,q)| = |p||q|, fixing |p| = t forces |q| = |x|/t and the
/// component moduli follow from x1²+x3² = a²|q|² and x1²+x2² = c²|p|².
/// Sign choices are filtered by evaluating F.
pub fn f_preimage(x: &Vec4, t: f64) -> Result<Vec<ParamPair>> {
    let nx = x.norm();
    if nx == 0.0 {
        return domain("preimage family undefined at origin");
    }
    if !(t > 0.0) || !t.is_finite() {
        return domain(format!("preimage scale must be positive, got {t}"));
    }
    let a = t / nx * (x[0] * x[0] + x[2] * x[2]).sqrt();
    let b = t / nx * (x[1] * x[1] + x[3] * x[3]).sqrt();
    let c = (x[0] * x[0] + x[1] * x[1]).sqrt() / t;
    let d = (x[2] * x[2] + x[3] * x[3]).sqrt() / t;
    let tol = IDENTITY_TOL * nx.max(1.0);
    let mut out: Vec<ParamPair> = Vec::new();
    for mask in 0..16u8 {
        let sg = |bit: u8| if mask & (1 << bit) == 0 { 1.0 } else { -1.0 };
        let cand = ((sg(0) * a, sg(1) * b), (sg(2) * c, sg(3) * d));
        if (f_map(cand.0, cand.1) - x).norm() <= tol && !out.contains(&cand) {
            out.push(cand);
        }
    }
    Ok(out)
}

/// J(a,b) = a I + b J(0,1), where J(0,1) sends e1 -> e3 and e2 -> e4.
pub fn j_matrix(a: f64, b: f64) -> Mat4 {
    #[rustfmt::skip]
    let m = Mat4::new(
        a, 0.0, -b, 0.0,
        0.0, a, 0.0, -b,
        b, 0.0, a, 0.0,
        0.0, b, 0.0, a,
    );
    m
}

pub fn j13() -> Mat4 {
    j_matrix(0.0, 1.0)
}

/// Rotation by a right angle in the (x1,x2) and (x3,x4) planes.
pub fn j12() -> Mat4 {
    #[rustfmt::skip]
    let m = Mat4::new(
        0.0, -1.0, 0.0, 0.0,
        1.0, 0.0, 0.0, 0.0,
        0.0, 0.0, 0.0, -1.0,
        0.0, 0.0, 1.0, 0.0,
    );
    m
}

/// Coordinate exchange x2 <-> x3. Conjugates J13 into J12.
pub fn swap23() -> Mat4 {
    #[rustfmt::skip]
    let m = Mat4::new(
        1.0, 0.0, 0.0, 0.0,
        0.0, 0.0, 1.0, 0.0,
        0.0, 1.0, 0.0, 0.0,
        0.0, 0.0, 0.0, 1.0,
    );
    m
}

/// Rotation by `phi` in the (x1,x2) and (x3,x4) planes simultaneously.
/// It maps g1(a,b) to g1 of the rotated pair and commutes with every J(a,b).
pub fn clifford_rotation(phi: f64) -> Mat4 {
    let (s, c) = phi.sin_cos();
    #[rustfmt::skip]
    let m = Mat4::new(
        c, -s, 0.0, 0.0,
        s, c, 0.0, 0.0,
        0.0, 0.0, c, -s,
        0.0, 0.0, s, c,
    );
    m
}

/// An oriented orthonormal frame of a 2-plane together with its projector.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane2 {
    u: Vec4,
    v: Vec4,
    proj: Mat4,
}

impl Plane2 {
    /// Gram-Schmidt on (a, b); the first frame vector gets its
    /// largest-magnitude component positive.
    pub fn from_vectors(a: &Vec4, b: &Vec4) -> Result<Self> {
        let na = a.norm();
        if !(na > 0.0) || !na.is_finite() {
            return Err(Error::Degenerate("degenerate span".into()));
        }
        let mut u = a / na;
        let w = b - u * u.dot(b);
        let nw = w.norm();
        if !(nw > 1e-14 * b.norm().max(na)) {
            return Err(Error::Degenerate("degenerate span".into()));
        }
        let mut v = w / nw;
        let imax = u.iamax();
        if u[imax] < 0.0 {
            u = -u;
            v = -v;
        }
        Ok(Self::from_orthonormal(u, v))
    }

    /// Trusts that (u, v) is orthonormal.
    pub fn from_orthonormal(u: Vec4, v: Vec4) -> Self {
        let proj = u * u.transpose() + v * v.transpose();
        Plane2 { u, v, proj }
    }

    pub fn frame(&self) -> (Vec4, Vec4) {
        (self.u, self.v)
    }

    pub fn projection(&self) -> &Mat4 {
        &self.proj
    }

    /// Operator norm of the difference of projectors.
    pub fn distance(&self, other: &Plane2) -> f64 {
        let diff = self.proj - other.proj;
        SymmetricEigen::new(diff)
            .eigenvalues
            .iter()
            .fold(0.0f64, |m, x| m.max(x.abs()))
    }

    /// Image under an orthogonal map.
    pub fn transformed(&self, q: &Mat4) -> Plane2 {
        Plane2::from_orthonormal(q * self.u, q * self.v)
    }

    pub fn frame_defect(&self) -> f64 {
        let a = (self.u.norm() - 1.0).abs();
        let b = (self.v.norm() - 1.0).abs();
        a.max(b).max(self.u.dot(&self.v).abs())
    }

    pub fn idempotency_defect(&self) -> f64 {
        (self.proj * self.proj - self.proj).abs().max()
    }
}

fn unit_pair(p: (f64, f64)) -> Result<(f64, f64)> {
    let n = p.0.hypot(p.1);
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::Degenerate("degenerate span".into()));
    }
    Ok((p.0 / n, p.1 / n))
}

/// g1(a,b) = span{a e1 + b e2, a e3 + b e4}.
pub fn span_g1(ab: (f64, f64)) -> Result<Plane2> {
    let (a, b) = unit_pair(ab)?;
    Plane2::from_vectors(&Vec4::new(a, b, 0.0, 0.0), &Vec4::new(0.0, 0.0, a, b))
}

/// g2(c,d) = span{c e1 + d e3, c e2 + d e4}.
pub fn span_g2(cd: (f64, f64)) -> Result<Plane2> {
    let (c, d) = unit_pair(cd)?;
    Plane2::from_vectors(&Vec4::new(c, 0.0, d, 0.0), &Vec4::new(0.0, c, 0.0, d))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpanComparison {
    pub distinct: bool,
    /// Operator norm of the projector difference.
    pub margin: f64,
    /// Numerical rank of the 4x4 matrix whose columns are both frames.
    pub stacked_rank: usize,
}

pub fn spans_distinct(p: &Plane2, q: &Plane2, tol: f64) -> SpanComparison {
    let margin = p.distance(q);
    let (pu, pv) = p.frame();
    let (qu, qv) = q.frame();
    let stacked = Mat4::from_columns(&[pu, pv, qu, qv]);
    let sv = stacked.singular_values();
    let smax = sv.max();
    let stacked_rank = sv.iter().filter(|&&s| s > 1e-10 * smax).count();
    SpanComparison {
        distinct: margin > tol,
        margin,
        stacked_rank,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum BandKind {
    J13,
    J12,
}

impl BandKind {
    pub fn matrix(self) -> Mat4 {
        match self {
            BandKind::J13 => j13(),
            BandKind::J12 => j12(),
        }
    }

    pub fn other(self) -> BandKind {
        match self {
            BandKind::J13 => BandKind::J12,
            BandKind::J12 => BandKind::J13,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BandKind::J13 => "J13",
            BandKind::J12 => "J12",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DirectionBand {
    pub kind: BandKind,
    pub epsilon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BandFit {
    pub achieved: f64,
    pub member: bool,
}

/// Coefficients of <u, n> and <v, m> as functions of the frame angle for
/// both orientations: u = cos t e + sin t f, v = s(-sin t e + cos t f).
fn band_sinusoids(n: &Vec4, m: &Vec4, e: &Vec4, f: &Vec4) -> [((f64, f64), (f64, f64)); 2] {
    let (a1, b1) = (e.dot(n), f.dot(n));
    let (em, fm) = (e.dot(m), f.dot(m));
    [((a1, b1), (fm, -em)), ((a1, b1), (-fm, em))]
}

/// argmax over t of min(p.0 cos t + p.1 sin t, q.0 cos t + q.1 sin t).
///
/// The minimum of two sinusoids peaks either at the peak of one of them or
/// where they cross, so four candidate angles suffice.
fn maxmin_sinusoids(p: (f64, f64), q: (f64, f64)) -> (f64, f64) {
    let eval = |t: f64| {
        let (s, c) = t.sin_cos();
        (p.0 * c + p.1 * s).min(q.0 * c + q.1 * s)
    };
    let mut best = (f64::NEG_INFINITY, 0.0);
    let mut cands = vec![p.1.atan2(p.0), q.1.atan2(q.0)];
    let (da, db) = (p.0 - q.0, p.1 - q.1);
    if da != 0.0 || db != 0.0 {
        let t = (-da).atan2(db);
        cands.push(t);
        cands.push(t + PI);
    }
    for t in cands {
        let v = eval(t);
        if v > best.0 {
            best = (v, t);
        }
    }
    best
}

/// Smallest max(|u - N(x)|, |v - D N(x)|) over orthonormal frames (u, v) of `s`.
pub fn band_achieved(x: &Vec4, s: &Plane2, kind: BandKind) -> Result<f64> {
    let nx = x.norm();
    if nx == 0.0 {
        return domain("band membership undefined at origin");
    }
    let n = x / nx;
    Ok(band_achieved_unit(&n, &s.u, &s.v, kind))
}

/// Same as [`band_achieved`] for a unit direction and an orthonormal frame.
///
/// The optimal frame comes from the inner products; the distances are then
/// taken from the vectors themselves, which keeps planes exactly in the band
/// at ~1e-16 instead of the √(2 − 2⟨u,n⟩) ~ 1e-8 floor.
pub fn band_achieved_unit(n: &Vec4, e: &Vec4, f: &Vec4, kind: BandKind) -> f64 {
    let m = kind.matrix() * n;
    let mut best = f64::INFINITY;
    for (orient, (p, q)) in [1.0, -1.0].into_iter().zip(band_sinusoids(n, &m, e, f)) {
        let (_, t) = maxmin_sinusoids(p, q);
        let (st, ct) = t.sin_cos();
        let u = e * ct + f * st;
        let v = (f * ct - e * st) * orient;
        best = best.min((u - n).norm().max((v - m).norm()));
    }
    best
}

pub fn band_membership(x: &Vec4, s: &Plane2, band: DirectionBand) -> Result<BandFit> {
    let achieved = band_achieved(x, s, band.kind)?;
    Ok(BandFit {
        achieved,
        member: achieved <= band.epsilon,
    })
}

/// Oracle for [`band_achieved`]: 720-point sweep over the frame angle and
/// both orientations, then golden-section refinement of the best bracket.
pub fn band_achieved_sweep(x: &Vec4, s: &Plane2, kind: BandKind) -> Result<f64> {
    let nx = x.norm();
    if nx == 0.0 {
        return domain("band membership undefined at origin");
    }
    let n = x / nx;
    let m = kind.matrix() * n;
    let (e, f) = s.frame();
    let obj = |t: f64, flip: f64| {
        let (sn, cs) = t.sin_cos();
        let u = e * cs + f * sn;
        let v = (f * cs - e * sn) * flip;
        (u - n).norm().max((v - m).norm())
    };
    const STEPS: usize = 720;
    let h = 2.0 * PI / STEPS as f64;
    let mut best = f64::INFINITY;
    for flip in [1.0, -1.0] {
        let vals: Vec<f64> = (0..STEPS).map(|i| obj(i as f64 * h, flip)).collect();
        for i in 0..STEPS {
            let prev = vals[(i + STEPS - 1) % STEPS];
            let next = vals[(i + 1) % STEPS];
            if vals[i] <= prev && vals[i] <= next {
                let t = i as f64 * h;
                best = best.min(golden_min(|t| obj(t, flip), t - h, t + h, SEARCH_TOL));
            }
        }
    }
    Ok(best)
}

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    f(0.5 * (a + b)).min(fc).min(fd)
}

struct BandGap {
    n: Vec4,
    basis: Mat4,
}

impl BandGap {
    fn plane(&self, p: &[f64]) -> Option<(Vec4, Vec4)> {
        let q = |i: usize| self.basis.column(i).into_owned();
        let a = q(0) + q(2) * p[0] + q(3) * p[1];
        let b = q(1) + q(2) * p[2] + q(3) * p[3];
        let na = a.norm();
        let u = a / na;
        let w = b - u * u.dot(&b);
        let nw = w.norm();
        if !(nw > 1e-12) {
            return None;
        }
        Some((u, w / nw))
    }

    fn value(&self, p: &[f64]) -> f64 {
        match self.plane(p) {
            Some((u, v)) => band_achieved_unit(&self.n, &u, &v, BandKind::J13)
                .max(band_achieved_unit(&self.n, &u, &v, BandKind::J12)),
            None => 4.0,
        }
    }
}

impl CostFunction for BandGap {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        Ok(self.value(p))
    }
}

fn random_orthogonal(rng: &mut ChaCha8Rng) -> Mat4 {
    let m = Mat4::from_fn(|_, _| rng.random_range(-1.0..1.0));
    m.qr().q()
}

fn nelder_mead(cost: BandGap, start: &[f64], size: f64) -> Result<(Vec<f64>, f64, BandGap)> {
    let mut simplex = vec![start.to_vec()];
    for i in 0..start.len() {
        let mut p = start.to_vec();
        p[i] += size;
        simplex.push(p);
    }
    let solver = NelderMead::new(simplex)
        .with_sd_tolerance(1e-16)
        .map_err(|e| Error::Numerical(e.to_string()))?;
    let res = Executor::new(cost, solver)
        .configure(|s| s.max_iters(3000))
        .run()
        .map_err(|e| Error::Numerical(e.to_string()))?;
    let best = res.state().get_best_param().cloned().unwrap_or_else(|| start.to_vec());
    let val = res.state().get_best_cost();
    let problem = res
        .problem
        .problem
        .ok_or_else(|| Error::Numerical("optimizer lost its problem".into()))?;
    Ok((best, val, problem))
}

/// Largest ε for which the J13 and J12 bands at `w` are disjoint.
///
/// The bands meet at ε exactly when some plane is within ε of both, so the
/// threshold is min over planes of max(achieved_J13, achieved_J12). That
/// minimum is found by multistart Nelder-Mead in graph coordinates around
/// random base planes, restarting each run from its own best point.
pub fn epsilon0_at(w: &Vec4, seed: u64) -> Result<f64> {
    let nw = w.norm();
    if nw == 0.0 {
        return domain("band disjointness undefined at origin");
    }
    let n = w / nw;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = f64::INFINITY;
    for _ in 0..6 {
        let mut cost = BandGap {
            n,
            basis: random_orthogonal(&mut rng),
        };
        let mut p = vec![0.0; 4];
        let mut val = cost.value(&p);
        for size in [0.5, 0.1, 0.02, 1e-3, 1e-5] {
            let (np, nv, back) = nelder_mead(cost, &p, size)?;
            cost = back;
            if nv <= val {
                p = np;
                val = nv;
            }
        }
        best = best.min(val);
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Epsilon0Estimate {
    /// Minimum over sampled directions.
    pub value: f64,
    /// max - min over sampled directions.
    pub spread: f64,
    pub per_direction: Vec<f64>,
}

/// Points of the unit Clifford torus F(S^1 x S^1)/|F|, starting with e1.
pub fn clifford_directions(samples: usize, seed: u64) -> Vec<Vec4> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![e(0)];
    while out.len() < samples {
        let a: f64 = rng.random_range(0.0..2.0 * PI);
        let b: f64 = rng.random_range(0.0..2.0 * PI);
        out.push(f_map(a.sin_cos().rev(), b.sin_cos().rev()));
    }
    out
}

trait Rev {
    fn rev(self) -> (f64, f64);
}

impl Rev for (f64, f64) {
    fn rev(self) -> (f64, f64) {
        (self.1, self.0)
    }
}

/// Estimate of the band-disjointness radius over directions on the cone.
///
/// Directions are drawn from the image of F. On that set the torus action
/// (a,b,c,d) -> rotations commuting with both J's is transitive, so the
/// threshold is the same everywhere; off the cone it is not (on the +1
/// eigenspace of J13 J12 the two bands coincide).
pub fn epsilon0_estimate(samples: usize) -> Result<Epsilon0Estimate> {
    if samples == 0 {
        return domain("epsilon0 estimate needs at least one direction");
    }
    let dirs = clifford_directions(samples, 0x5eed_0e50);
    let per_direction = dirs
        .iter()
        .enumerate()
        .map(|(i, w)| epsilon0_at(w, 1000 + i as u64))
        .collect::<Result<Vec<_>>>()?;
    let lo = per_direction.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = per_direction.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(lo > 0.0) {
        return Err(Error::Numerical(format!("epsilon0 estimate {lo} is not positive")));
    }
    Ok(Epsilon0Estimate {
        value: lo,
        spread: hi - lo,
        per_direction,
    })
}

/// Angle in [0, π/2] between a unit vector and a plane.
pub fn angle_to_plane(w: &Vec4, s: &Plane2) -> f64 {
    let p = s.projection() * w;
    let c = (p.norm() / w.norm()).min(1.0);
    c.acos().min(FRAC_PI_2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f_map_examples() {
        assert_eq!(f_map((1.0, 0.0), (1.0, 0.0)), e(0));
        assert_eq!(f_map((0.0, 1.0), (1.0, 0.0)), e(1));
        let v = f_map((2.0, 1.0), (3.0, -1.0));
        assert_eq!(v, Vec4::new(6.0, 3.0, -2.0, -1.0));
        assert!((v.norm() - 5f64.sqrt() * 10f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn preimage_examples() {
        let p = f_preimage(&e(0), 1.0).unwrap();
        assert!(p.contains(&((1.0, 0.0), (1.0, 0.0))));
        let p = f_preimage(&e(0), 2.0).unwrap();
        assert!(p.contains(&((2.0, 0.0), (0.5, 0.0))));
        let x = Vec4::new(0.5, 0.5, 0.5, 0.5);
        let p = f_preimage(&x, 1.0).unwrap();
        assert!(!p.is_empty());
        for (ab, cd) in p {
            assert!((f_map(ab, cd) - x).norm() < 1e-12);
        }
        assert!(f_preimage(&Vec4::zeros(), 1.0).is_err());
    }

    #[test]
    fn preimage_of_non_unit_point() {
        let x = f_map((0.3, -1.2), (2.0, 0.7));
        let p = f_preimage(&x, 0.8).unwrap();
        assert!(!p.is_empty());
        for (ab, cd) in p {
            assert!((ab.0.hypot(ab.1) - 0.8).abs() < 1e-12);
            assert!((f_map(ab, cd) - x).norm() < 1e-12 * x.norm());
        }
    }

    #[test]
    fn j_matrix_examples() {
        assert_eq!(j_matrix(1.0, 0.0), Mat4::identity());
        let j = j_matrix(0.0, 1.0);
        assert_eq!(j * e(0), e(2));
        assert_eq!(j * e(1), e(3));
        assert!((j * j + Mat4::identity()).abs().max() < 1e-15);
        let b = j_matrix(0.7f64.cos(), 0.7f64.sin());
        assert!((b.transpose() * b - Mat4::identity()).abs().max() < 1e-14);
    }

    #[test]
    fn j12_action() {
        let j = j12();
        assert_eq!(j * e(0), e(1));
        assert_eq!(j * e(1), -e(0));
        assert_eq!(j * e(2), e(3));
        assert_eq!(j * e(3), -e(2));
        let s = swap23();
        assert!((s * j13() * s - j12()).abs().max() < 1e-15);
    }

    #[test]
    fn span_examples() {
        let g = span_g1((1.0, 0.0)).unwrap();
        let want = Plane2::from_vectors(&e(0), &e(2)).unwrap();
        assert!(g.distance(&want) < 1e-15);
        let g = span_g2((1.0, 0.0)).unwrap();
        let want = Plane2::from_vectors(&e(0), &e(1)).unwrap();
        assert!(g.distance(&want) < 1e-15);
        let a = span_g1((3.0, 4.0)).unwrap();
        let b = span_g1((0.6, 0.8)).unwrap();
        assert!((a.projection() - b.projection()).abs().max() < 1e-12);
        assert!(span_g1((0.0, 0.0)).is_err());
    }

    #[test]
    fn canonical_sign() {
        let p = Plane2::from_vectors(&(-e(1) * 3.0), &e(0)).unwrap();
        let (u, _) = p.frame();
        assert_eq!(u, e(1));
    }

    #[test]
    fn distinct_examples() {
        let g = span_g1((1.0, 0.0)).unwrap();
        let c = spans_distinct(&g, &g, IDENTITY_TOL);
        assert!(!c.distinct);
        assert!(c.margin < 1e-15);
        assert_eq!(c.stacked_rank, 2);
        let h = span_g2((1.0, 0.0)).unwrap();
        let c = spans_distinct(&g, &h, IDENTITY_TOL);
        assert!(c.distinct);
        assert_eq!(c.stacked_rank, 3);
    }

    #[test]
    fn band_examples() {
        let s13 = Plane2::from_vectors(&e(0), &e(2)).unwrap();
        assert!(band_achieved(&e(0), &s13, BandKind::J13).unwrap() < 1e-15);
        let s12 = Plane2::from_vectors(&e(0), &e(1)).unwrap();
        assert!(band_achieved(&e(0), &s12, BandKind::J13).unwrap() > 0.1);
        assert!(band_achieved(&e(0), &s12, BandKind::J12).unwrap() < 1e-15);
        let s23 = Plane2::from_vectors(&e(1), &e(2)).unwrap();
        let a = band_achieved(&e(0), &s23, BandKind::J13).unwrap();
        let b = band_achieved_sweep(&e(0), &s23, BandKind::J13).unwrap();
        assert!((a - b).abs() < 1e-9, "{a} {b}");
        // u must be orthogonal to e1, so |u - e1| = sqrt 2 while v = e3 is free.
        assert!((a - 2f64.sqrt()).abs() < 1e-12);
        assert!(band_achieved(&Vec4::zeros(), &s23, BandKind::J13).is_err());
    }

    #[test]
    fn epsilon0_at_e1() {
        let v = epsilon0_at(&e(0), 7).unwrap();
        assert!((v - 0.642_079_001_877_47).abs() < 1e-9, "{v}");
    }

    #[test]
    fn epsilon0_rejects_zero_samples() {
        assert!(epsilon0_estimate(0).is_err());
    }

    #[test]
    fn bands_coincide_off_the_cone() {
        // (e1 + e4)/sqrt 2 lies in the +1 eigenspace of J13 J12 where J12 w = -J13 w.
        let w = (e(0) + e(3)) / 2f64.sqrt();
        let m = j13() * w;
        let s = Plane2::from_vectors(&w, &m).unwrap();
        assert!(band_achieved(&w, &s, BandKind::J13).unwrap() < 1e-12);
        assert!(band_achieved(&w, &s, BandKind::J12).unwrap() < 1e-12);
    }
}
