//! Compactly supported test vector fields with analytic Jacobians.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::geom4::{Mat4, Plane2, Vec4};

/// Standard bump exp(1 - 1/(1 - s²)) on (-1, 1), normalised to peak 1.
pub fn bump(s: f64) -> (f64, f64) {
    if s.abs() >= 1.0 {
        return (0.0, 0.0);
    }
    let q = 1.0 - s * s;
    let b = (1.0 - 1.0 / q).exp();
    (b, -2.0 * s * b / (q * q))
}

/// exp(-1/s) for s > 0 and its derivative.
fn flat(s: f64) -> (f64, f64) {
    if s <= 0.0 {
        (0.0, 0.0)
    } else {
        let f = (-1.0 / s).exp();
        (f, f / (s * s))
    }
}

/// Smooth step from 0 at s ≤ 0 to 1 at s ≥ 1.
pub fn smooth_step(s: f64) -> (f64, f64) {
    if s <= 0.0 {
        return (0.0, 0.0);
    }
    if s >= 1.0 {
        return (1.0, 0.0);
    }
    let (a, da) = flat(s);
    let (b, db) = flat(1.0 - s);
    let den = a + b;
    (a / den, (da * b + a * db) / (den * den))
}

/// Radial profile φ(‖x‖) with compact support in [r_in, r_out].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case")]
pub enum RadialProfile {
    /// Bump rescaled to (r_in, r_out); with r_in = 0 it is centred at the
    /// origin and reaches 0 at r_out.
    Bump { r_in: f64, r_out: f64 },
    /// Equal to 1 on [p_in, p_out], smooth steps down to 0 at r_in and r_out.
    Plateau { r_in: f64, p_in: f64, p_out: f64, r_out: f64 },
}

impl RadialProfile {
    pub fn bump(r_in: f64, r_out: f64) -> Self {
        RadialProfile::Bump { r_in, r_out }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            RadialProfile::Bump { r_in, r_out } => r_in >= 0.0 && r_out > r_in && r_out.is_finite(),
            RadialProfile::Plateau { r_in, p_in, p_out, r_out } => {
                r_in >= 0.0 && p_in > r_in && p_out >= p_in && r_out > p_out && r_out.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            domain(format!("invalid radial profile {self:?}"))
        }
    }

    pub fn support(&self) -> (f64, f64) {
        match *self {
            RadialProfile::Bump { r_in, r_out } | RadialProfile::Plateau { r_in, r_out, .. } => (r_in, r_out),
        }
    }

    /// (φ(t), φ'(t)).
    pub fn eval(&self, t: f64) -> (f64, f64) {
        match *self {
            RadialProfile::Bump { r_in, r_out } => {
                if r_in == 0.0 {
                    let (b, db) = bump(t / r_out);
                    (b, db / r_out)
                } else {
                    let w = r_out - r_in;
                    let (b, db) = bump((2.0 * t - r_in - r_out) / w);
                    (b, 2.0 * db / w)
                }
            }
            RadialProfile::Plateau { r_in, p_in, p_out, r_out } => {
                if t <= p_in {
                    if r_in == 0.0 {
                        return (1.0, 0.0);
                    }
                    let (s, ds) = smooth_step((t - r_in) / (p_in - r_in));
                    (s, ds / (p_in - r_in))
                } else if t <= p_out {
                    (1.0, 0.0)
                } else {
                    let (s, ds) = smooth_step((r_out - t) / (r_out - p_out));
                    (s, -ds / (r_out - p_out))
                }
            }
        }
    }
}

/// One monomial coeff·x^exponents in component `component` of P.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolyTerm {
    pub component: usize,
    pub exponents: [u8; 4],
    pub coeff: f64,
}

impl PolyTerm {
    fn degree(&self) -> u32 {
        self.exponents.iter().map(|&e| e as u32).sum()
    }

    fn value(&self, x: &Vec4) -> f64 {
        let mut v = self.coeff;
        for i in 0..4 {
            v *= x[i].powi(self.exponents[i] as i32);
        }
        v
    }

    fn partial(&self, x: &Vec4, j: usize) -> f64 {
        let ej = self.exponents[j];
        if ej == 0 {
            return 0.0;
        }
        let mut v = self.coeff * ej as f64;
        for i in 0..4 {
            let e = if i == j { ej - 1 } else { self.exponents[i] };
            v *= x[i].powi(e as i32);
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum FieldFamily {
    /// X(x) = amplitude · φ(‖x‖) · x.
    RadialBump { amplitude: f64, profile: RadialProfile },
    /// X(x) = b(‖x − center‖/radius) · direction.
    DirectionalBump { center: [f64; 4], radius: f64, direction: [f64; 4] },
    /// X(x) = φ(‖x‖) · P(x) with P of degree at most 3.
    PolynomialBump { profile: RadialProfile, terms: Vec<PolyTerm> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FieldFamily", into = "FieldFamily")]
pub struct TestVectorField {
    family: FieldFamily,
    sup_value: f64,
    sup_jacobian: f64,
}

impl TryFrom<FieldFamily> for TestVectorField {
    type Error = crate::Error;
    fn try_from(f: FieldFamily) -> Result<Self> {
        TestVectorField::new(f)
    }
}

impl From<TestVectorField> for FieldFamily {
    fn from(f: TestVectorField) -> FieldFamily {
        f.family
    }
}

/// Maximum of a continuous g on [a, b]: dense sampling, then golden-section
/// refinement around the best sample.
fn sup_1d(g: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    const N: usize = 4096;
    let h = (b - a) / N as f64;
    let mut best = (a, g(a));
    for i in 1..=N {
        let t = a + h * i as f64;
        let v = g(t);
        if v > best.1 {
            best = (t, v);
        }
    }
    let (mut lo, mut hi) = ((best.0 - h).max(a), (best.0 + h).min(b));
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let m1 = hi - phi * (hi - lo);
        let m2 = lo + phi * (hi - lo);
        if g(m1) > g(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
        if hi - lo < 1e-14 * (1.0 + b.abs()) {
            break;
        }
    }
    let v = g(0.5 * (lo + hi)).max(best.1);
    v * (1.0 + 1e-9)
}

fn bump_slope_bound() -> f64 {
    sup_1d(&|s| bump(s).1.abs(), 0.0, 1.0)
}

impl TestVectorField {
    pub fn new(family: FieldFamily) -> Result<Self> {
        let (sup_value, sup_jacobian) = match &family {
            FieldFamily::RadialBump { amplitude, profile } => {
                profile.validate()?;
                if !amplitude.is_finite() {
                    return domain("amplitude must be finite");
                }
                let (a, b) = profile.support();
                let v = sup_1d(&|t| profile.eval(t).0 * t, a, b);
                let j = sup_1d(
                    &|t| {
                        let (p, dp) = profile.eval(t);
                        (3.0 * p * p + (p + dp * t).powi(2)).sqrt()
                    },
                    a,
                    b,
                );
                (amplitude.abs() * v, amplitude.abs() * j)
            }
            FieldFamily::DirectionalBump { center, radius, direction } => {
                if !(*radius > 0.0) || center.iter().chain(direction).any(|c| !c.is_finite()) {
                    return domain("directional bump needs radius > 0 and finite vectors");
                }
                let n = Vec4::from(*direction).norm();
                (n, n * bump_slope_bound() / radius)
            }
            FieldFamily::PolynomialBump { profile, terms } => {
                profile.validate()?;
                if let Some(t) = terms.iter().find(|t| t.component > 3 || t.degree() > 3 || !t.coeff.is_finite()) {
                    return domain(format!("polynomial term out of range: {t:?}"));
                }
                let pbound = |t: f64| {
                    let mut p = [0.0; 4];
                    let mut dp = [[0.0; 4]; 4];
                    for term in terms {
                        let deg = term.degree() as i32;
                        p[term.component] += term.coeff.abs() * t.powi(deg);
                        for (j, &e) in term.exponents.iter().enumerate() {
                            if e > 0 {
                                dp[term.component][j] += term.coeff.abs() * e as f64 * t.powi(deg - 1);
                            }
                        }
                    }
                    let pn = p.iter().map(|v| v * v).sum::<f64>().sqrt();
                    let dn = dp.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
                    (pn, dn)
                };
                let (a, b) = profile.support();
                let v = sup_1d(&|t| profile.eval(t).0 * pbound(t).0, a, b);
                let j = sup_1d(
                    &|t| {
                        let (p, dp) = profile.eval(t);
                        let (pn, dn) = pbound(t);
                        p * dn + dp.abs() * pn
                    },
                    a,
                    b,
                );
                (v, j)
            }
        };
        Ok(TestVectorField {
            family,
            sup_value,
            sup_jacobian,
        })
    }

    pub fn radial_bump(amplitude: f64, r_in: f64, r_out: f64) -> Result<Self> {
        Self::new(FieldFamily::RadialBump {
            amplitude,
            profile: RadialProfile::bump(r_in, r_out),
        })
    }

    pub fn directional_bump(center: Vec4, radius: f64, direction: Vec4) -> Result<Self> {
        Self::new(FieldFamily::DirectionalBump {
            center: center.into(),
            radius,
            direction: direction.into(),
        })
    }

    pub fn polynomial_bump(r_in: f64, r_out: f64, terms: Vec<PolyTerm>) -> Result<Self> {
        Self::new(FieldFamily::PolynomialBump {
            profile: RadialProfile::bump(r_in, r_out),
            terms,
        })
    }

    pub fn family(&self) -> &FieldFamily {
        &self.family
    }

    /// Radii (inner, outer) such that X vanishes outside inner ≤ ‖x‖ ≤ outer.
    pub fn radial_support(&self) -> (f64, f64) {
        match &self.family {
            FieldFamily::RadialBump { profile, .. } | FieldFamily::PolynomialBump { profile, .. } => profile.support(),
            FieldFamily::DirectionalBump { center, radius, .. } => {
                let c = Vec4::from(*center).norm();
                ((c - radius).max(0.0), c + radius)
            }
        }
    }

    /// X(Qx) = Q X(x) for every orthogonal Q, so integrals over rotated
    /// copies of a varifold agree.
    pub fn is_rotation_invariant(&self) -> bool {
        matches!(self.family, FieldFamily::RadialBump { .. })
    }

    /// Length scale of angular variation: the ball radius of a directional
    /// bump. Radial and polynomial bumps vary in angle only through
    /// polynomials of degree at most 3.
    pub fn angular_feature(&self) -> Option<f64> {
        match &self.family {
            FieldFamily::DirectionalBump { radius, .. } => Some(*radius),
            _ => None,
        }
    }

    pub fn support_radius(&self) -> f64 {
        self.radial_support().1
    }

    pub fn sup_value(&self) -> f64 {
        self.sup_value
    }

    pub fn sup_jacobian(&self) -> f64 {
        self.sup_jacobian
    }

    /// sup‖X‖ + √2·sup‖DX‖_F, which dominates sup|div_S X| + sup‖X‖ for
    /// every plane S.
    pub fn c1_norm_bound(&self) -> f64 {
        self.sup_value + std::f64::consts::SQRT_2 * self.sup_jacobian
    }

    pub fn eval(&self, x: &Vec4) -> Vec4 {
        self.eval_with_jacobian(x).0
    }

    pub fn jacobian(&self, x: &Vec4) -> Mat4 {
        self.eval_with_jacobian(x).1
    }

    pub fn eval_with_jacobian(&self, x: &Vec4) -> (Vec4, Mat4) {
        match &self.family {
            FieldFamily::RadialBump { amplitude, profile } => {
                let t = x.norm();
                let (p, dp) = profile.eval(t);
                if p == 0.0 && dp == 0.0 {
                    return (Vec4::zeros(), Mat4::zeros());
                }
                let mut m = Mat4::identity() * p;
                if t > 0.0 {
                    m += x * x.transpose() * (dp / t);
                }
                (x * (amplitude * p), m * *amplitude)
            }
            FieldFamily::DirectionalBump { center, radius, direction } => {
                let y = x - Vec4::from(*center);
                let t = y.norm();
                let (b, db) = bump(t / radius);
                let v = Vec4::from(*direction);
                let m = if t > 0.0 && db != 0.0 {
                    v * y.transpose() * (db / (radius * t))
                } else {
                    Mat4::zeros()
                };
                (v * b, m)
            }
            FieldFamily::PolynomialBump { profile, terms } => {
                let t = x.norm();
                let (p, dp) = profile.eval(t);
                if p == 0.0 && dp == 0.0 {
                    return (Vec4::zeros(), Mat4::zeros());
                }
                let mut poly = Vec4::zeros();
                let mut dpoly = Mat4::zeros();
                for term in terms {
                    poly[term.component] += term.value(x);
                    for j in 0..4 {
                        dpoly[(term.component, j)] += term.partial(x, j);
                    }
                }
                let mut m = dpoly * p;
                if t > 0.0 {
                    m += poly * x.transpose() * (dp / t);
                }
                (poly * p, m)
            }
        }
    }
}

/// Tangential divergence tr(P_S · DX(x)) = Σ wᵀ DX w over an orthonormal frame.
pub fn div_s(field: &TestVectorField, x: &Vec4, s: &Plane2) -> f64 {
    let (u, v) = s.frame();
    div_frame(&field.jacobian(x), &u, &v)
}

pub(crate) fn div_frame(dx: &Mat4, u: &Vec4, v: &Vec4) -> f64 {
    u.dot(&(dx * u)) + v.dot(&(dx * v))
}
