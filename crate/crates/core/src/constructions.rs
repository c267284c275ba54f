//! Builders: rings, V00, mini-layers V1/V2, layers (systems A and B), the
//! alternating plane-family varifold and the full shell varifolds.
//!
//! Mini-layer parameters are stored through δ = π/4 − γ. Deep layers have
//! δ ~ 1e-8 and ring widths π/k ~ 1e-17, so every constant is computed from
//! δ and h = π/k directly and the infinite products of the layer are summed
//! as logarithms with `ln_1p`.

use std::f64::consts::{FRAC_PI_4, FRAC_PI_8, PI};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::field::TestVectorField;
use crate::geom4::{swap23, BandKind};
use crate::minimal_surface::{SurfaceParams, DOMAIN_MARGIN};
use crate::quadrature::{integrate_rect, Estimate, QuadratureSpec};
use crate::varifold::{coordinate_plane, FamilyVarifold, PatchVarifold, PlanarAnnulusVarifold, Varifold, VarifoldSum};

const TWO_PI: f64 = 2.0 * PI;

pub fn build_ring(d: f64, alpha0: f64, t1: f64, t2: f64) -> Result<PatchVarifold> {
    PatchVarifold::new(1.0, SurfaceParams::new(d, alpha0)?, t1, t2)
}

/// (1/k) Σ_i of the span{e1,e3} annulus rotated by 2πi/k.
pub fn build_v00(r1: f64, r2: f64, k: u64) -> Result<VarifoldSum> {
    VarifoldSum::new(vec![(1.0 / k as f64, v00_orbit(r1, r2, k)?)])
}

fn v00_orbit(r1: f64, r2: f64, k: u64) -> Result<Varifold> {
    if !(r1 > 0.0 && r1 < r2) || k == 0 {
        return domain(format!("V00 needs 0 < r1 < r2 and k ≥ 1, got r1={r1}, r2={r2}, k={k}"));
    }
    let base = PlanarAnnulusVarifold::new(1.0, coordinate_plane(0, 2), r1, r2)?;
    Varifold::orbit(base.into(), k, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiniLayerParams {
    pub k: u64,
    /// π/4 − γ.
    pub delta: f64,
    pub r2: f64,
}

impl MiniLayerParams {
    pub fn new(k: u64, gamma: f64, r2: f64) -> Result<Self> {
        Self::from_delta(k, FRAC_PI_4 - gamma, r2)
    }

    pub fn from_delta(k: u64, delta: f64, r2: f64) -> Result<Self> {
        if k <= 20 {
            return domain(format!("mini-layer needs k > 20, got {k}"));
        }
        if !(DOMAIN_MARGIN..FRAC_PI_8).contains(&delta) {
            return domain(format!("mini-layer needs γ ∈ (π/8, π/4), got π/4 − {delta}"));
        }
        if !(r2 > 0.0) || !r2.is_finite() {
            return domain(format!("mini-layer needs r2 > 0, got {r2}"));
        }
        Ok(MiniLayerParams { k, delta, r2 })
    }

    pub fn gamma(&self) -> f64 {
        FRAC_PI_4 - self.delta
    }

    /// π/k.
    pub fn h(&self) -> f64 {
        PI / self.k as f64
    }

    /// ln σ with σ² = cos 2γ / cos 2(γ − π/k) = sin 2δ / sin(2δ + 2h).
    pub fn ln_sigma(&self) -> f64 {
        ln_sigma(self.delta, self.h())
    }

    pub fn sigma(&self) -> f64 {
        self.ln_sigma().exp()
    }

    pub fn r1(&self) -> f64 {
        self.r2 * self.sigma()
    }

    /// 2 cos 2(γ − π/k).
    pub fn epsilon(&self) -> f64 {
        2.0 * (2.0 * (self.delta + self.h())).sin()
    }

    /// r2² cos 2γ, the d of every ring.
    pub fn d(&self) -> f64 {
        self.r2 * self.r2 * (2.0 * self.delta).sin()
    }

    /// C̃ = 4 sin 2γ.
    pub fn big_c_tilde(&self) -> f64 {
        4.0 * (2.0 * self.delta).cos()
    }

    /// c̃ = 4 sin(2γ − π/k) cos(π/k); also C.
    pub fn small_c_tilde(&self) -> f64 {
        let h = self.h();
        4.0 * (2.0 * self.delta + h).cos() * h.cos()
    }

    pub fn big_c(&self) -> f64 {
        self.small_c_tilde()
    }

    /// c = 4 sin 2(γ − π/k).
    pub fn small_c(&self) -> f64 {
        4.0 * (2.0 * (self.delta + self.h())).cos()
    }

    /// sin 2(γ − π/k).
    pub fn sin_two_gamma_shift(&self) -> f64 {
        (2.0 * (self.delta + self.h())).cos()
    }

    /// Admissible mass range of either mini-layer over A_{s1}^{s2}.
    pub fn mass_bounds(&self, s1: f64, s2: f64) -> (f64, f64) {
        let s = self.sin_two_gamma_shift();
        let area = PI * (s2 - s1) * (s2 + s1);
        (4.0 * s * area, 4.0 / s * area)
    }

    /// Coefficient of V00 in V1 (2 sin 2γ) or V2 (2 sin 2(γ − π/k)).
    pub fn v00_weight(&self, which: u8) -> f64 {
        match which {
            1 => 2.0 * (2.0 * self.delta).cos(),
            _ => 2.0 * self.sin_two_gamma_shift(),
        }
    }
}

fn ln_sigma(delta: f64, h: f64) -> f64 {
    let two_d = 2.0 * delta;
    // sin(2δ + 2h)/sin 2δ = 1 − 2 sin²h + cot 2δ sin 2h.
    let x = -2.0 * h.sin().powi(2) + (2.0 * h).sin() / two_d.tan();
    -0.5 * x.ln_1p()
}

/// ln(c̃/C̃) = ln[cos(2δ + h) cos h / cos 2δ].
fn ln_ratio_tilde(delta: f64, h: f64) -> f64 {
    let hv = -2.0 * (0.5 * h).sin().powi(2);
    hv.ln_1p() + (hv - (2.0 * delta).tan() * h.sin()).ln_1p()
}

/// ln(c/C) = ln[cos(2δ + 2h) / (cos(2δ + h) cos h)].
fn ln_ratio_plain(delta: f64, h: f64) -> f64 {
    let hv = -2.0 * (0.5 * h).sin().powi(2);
    (hv - (2.0 * delta + h).tan() * h.sin()).ln_1p() - hv.ln_1p()
}

/// (1/k)V01 + 2 sin 2γ V00 (which = 1) or (1/k)V02 + 2 sin 2(γ − π/k) V00
/// (which = 2), each ring family written as a k-fold Clifford orbit of one
/// pair of adjacent rings.
pub fn build_mini_layer(which: u8, p: &MiniLayerParams) -> Result<VarifoldSum> {
    let (k, h, g) = (p.k, p.h(), p.gamma());
    let d = p.d();
    let (a0, b0) = match which {
        1 => (h - g, h + g),
        2 => (-g, g),
        _ => return domain(format!("mini-layer index must be 1 or 2, got {which}")),
    };
    let ring_a = PatchVarifold::from_edges(1.0, SurfaceParams::new(d, a0)?, 1.0, p.delta, h)?;
    let ring_b = PatchVarifold::from_edges(1.0, SurfaceParams::new(d, b0)?, -1.0, p.delta, h)?;
    let pair = VarifoldSum::new(vec![(1.0, ring_a.into()), (1.0, ring_b.into())])?;
    let kf = k as f64;
    VarifoldSum::new(vec![
        (1.0 / kf, Varifold::orbit(pair.into(), k, 0.0)?),
        (p.v00_weight(which) / kf, v00_orbit(p.r1(), p.r2, k)?),
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LayerSystem {
    /// Bands around (N, J13 N).
    A,
    /// Coordinates x2 and x3 exchanged; bands around (N, J12 N).
    B,
}

impl LayerSystem {
    pub fn band(self) -> BandKind {
        match self {
            LayerSystem::A => BandKind::J13,
            LayerSystem::B => BandKind::J12,
        }
    }
}

pub const DEFAULT_TAIL_TOLERANCE: f64 = 1e-8;
pub const N0_CAP: u32 = 40;
/// Last level whose orbit size 100·2^(m+1) still fits in u64.
pub const MAX_LEVEL: u32 = 56;
/// Levels summed for the infinite products; terms decay like 2^{-n/2}.
const PRODUCT_LEVELS: u32 = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
    pub r4: f64,
    pub epsilon: f64,
    /// Truncate once the omitted mass is below this fraction of π(R4² − R1²).
    pub tail_tolerance: f64,
}

impl LayerParams {
    pub fn new(r1: f64, r2: f64, r3: f64, r4: f64, epsilon: f64) -> Result<Self> {
        let p = LayerParams {
            r1,
            r2,
            r3,
            r4,
            epsilon,
            tail_tolerance: DEFAULT_TAIL_TOLERANCE,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.r1 > 0.0 && self.r1 < self.r2 && self.r2 < self.r3 && self.r3 < self.r4 && self.r4.is_finite();
        if !ok {
            return domain(format!(
                "layer needs 0 < R1 < R2 < R3 < R4 < ∞, got {}, {}, {}, {}",
                self.r1, self.r2, self.r3, self.r4
            ));
        }
        if !(self.epsilon > 0.0) {
            return domain(format!("layer needs ε > 0, got {}", self.epsilon));
        }
        if !(self.tail_tolerance > 0.0) {
            return domain("tail tolerance must be positive");
        }
        Ok(())
    }
}

/// k⁽ⁿ⁾ = 100·2ⁿ as a float (products run past the u64 range).
pub fn level_k(n: u32) -> f64 {
    100.0 * 2f64.powi(n as i32)
}

/// δ⁽ⁿ⁾ = π/4 − γ⁽ⁿ⁾ = π/√k⁽ⁿ⁾.
pub fn level_delta(n: u32) -> f64 {
    PI / level_k(n).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LayerLevel {
    pub n: u32,
    pub k: u64,
    pub delta: f64,
    /// r⁽ⁿ⁾ (outer radius of the V2 mini-layer of this level).
    pub r_small: f64,
    /// R⁽ⁿ⁾ (inner radius of the V1 mini-layer).
    pub r_big: f64,
    /// c1 c2,n / C.
    pub weight_v2: f64,
    /// c1,n+1 / C̃.
    pub weight_v1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct N0Conditions {
    pub n: u32,
    pub epsilon_n: bool,
    pub sinus: bool,
    pub m_bound: bool,
    pub c1_range: bool,
    pub c2_range: bool,
    pub sigma_range: bool,
}

impl N0Conditions {
    pub fn all(&self) -> bool {
        self.epsilon_n && self.sinus && self.m_bound && self.c1_range && self.c2_range && self.sigma_range
    }

    fn failing(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        for (ok, name) in [
            (self.epsilon_n, "ε_n < ε"),
            (self.sinus, "sin 2(γ−π/k) > 1 − ε/3"),
            (self.m_bound, "M < 1 + ε"),
            (self.c1_range, "c1 ∈ (1−ε/3, 1)"),
            (self.c2_range, "c2 ∈ (1−ε/3, 1)"),
            (self.sigma_range, "σ ∈ (max(R1/R2, R3/R4), 1)"),
        ] {
            if !ok {
                out.push(name);
            }
        }
        out
    }
}

/// Everything about a layer that does not need geometry: n0, the infinite
/// products, radii and weights per level, the truncation level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerPlan {
    pub params: LayerParams,
    pub n0: u32,
    pub m: u32,
    pub c1: f64,
    pub c2: f64,
    pub c: f64,
    pub sigma: f64,
    pub big_m: f64,
    /// r⁽ⁿ⁰⁾ and R⁽ⁿ⁰⁾, the radii of the central V00.
    pub v00_radii: (f64, f64),
    pub levels: Vec<LayerLevel>,
    pub tail_mass_bound: f64,
    #[serde(skip)]
    ln_sigma: Vec<f64>,
    #[serde(skip)]
    ln_tilde: Vec<f64>,
    #[serde(skip)]
    ln_plain: Vec<f64>,
}

/// Σ_{j ≥ n} xs[j] (suffix sums, smallest terms first).
fn suffix_sums(xs: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; xs.len() + 1];
    for j in (0..xs.len()).rev() {
        out[j] = out[j + 1] + xs[j];
    }
    out
}

/// The n0 conditions at level `mp`, with c1, c2 and σ given as logarithms
/// (their distance from 1 drops below f64 resolution for small ε).
fn conditions(n: u32, eps: f64, sigma_lo: f64, mp: &MiniLayerParams, [l1, l2, ls]: [f64; 3]) -> N0Conditions {
    let s = mp.sin_two_gamma_shift();
    let lo = (-eps / 3.0).ln_1p();
    N0Conditions {
        n,
        epsilon_n: mp.epsilon() < eps,
        sinus: s > 1.0 - eps / 3.0,
        m_bound: 1.0 / mp.big_c() * 4.0 / s < 1.0 + eps,
        c1_range: l1 > lo && l1 < 0.0,
        c2_range: l2 > lo && l2 < 0.0,
        sigma_range: ls > sigma_lo.ln() && ls < 0.0,
    }
}

impl LayerPlan {
    pub fn new(params: LayerParams) -> Result<Self> {
        params.validate()?;
        let levels = PRODUCT_LEVELS as usize;
        let mut ls = vec![0.0; levels];
        let mut lt = vec![0.0; levels];
        let mut lp = vec![0.0; levels];
        for n in 1..levels {
            let (delta, h) = (level_delta(n as u32), PI / level_k(n as u32));
            ls[n] = ln_sigma(delta, h);
            lt[n] = ln_ratio_tilde(delta, h);
            lp[n] = ln_ratio_plain(delta, h);
        }
        let (ss, st, sp) = (suffix_sums(&ls), suffix_sums(&lt), suffix_sums(&lp));
        let eps = params.epsilon;
        let sigma_lo = (params.r1 / params.r2).max(params.r3 / params.r4);
        let mut last = None;
        for n in 1..=N0_CAP {
            let i = n as usize;
            let mp = MiniLayerParams::from_delta(level_k(n) as u64, level_delta(n), 1.0)?;
            let s = mp.sin_two_gamma_shift();
            let big_m = 1.0 / mp.big_c() * 4.0 / s;
            let (c1, c2, sigma) = (st[i].exp(), sp[i].exp(), ss[i].exp());
            let cond = conditions(n, eps, sigma_lo, &mp, [st[i], sp[i], ss[i]]);
            if cond.all() {
                let mut plan = LayerPlan {
                    params,
                    n0: n,
                    m: n,
                    c1,
                    c2,
                    c: c1 * c2,
                    sigma,
                    big_m,
                    v00_radii: (params.r1 / sigma, params.r4 * sigma),
                    levels: Vec::new(),
                    tail_mass_bound: 0.0,
                    ln_sigma: ss,
                    ln_tilde: st,
                    ln_plain: lp,
                };
                plan.choose_truncation()?;
                return Ok(plan);
            }
            last = Some(cond);
        }
        let cond = last.expect("cap is at least one");
        Err(Error::Numerical(format!(
            "no admissible n0 ≤ {N0_CAP} for ε = {eps}; failing at n = {}: {}",
            cond.n,
            cond.failing().join(", ")
        )))
    }

    /// Conditions of the n0 search evaluated at one n, for diagnostics.
    pub fn conditions_at(params: &LayerParams, n: u32) -> Result<N0Conditions> {
        let tail = |f: fn(f64, f64) -> f64| -> f64 {
            (n..PRODUCT_LEVELS).map(|j| f(level_delta(j), PI / level_k(j))).rev().sum()
        };
        let mp = MiniLayerParams::from_delta(level_k(n) as u64, level_delta(n), 1.0)?;
        let sigma_lo = (params.r1 / params.r2).max(params.r3 / params.r4);
        let logs = [tail(ln_ratio_tilde), tail(ln_ratio_plain), tail(ln_sigma)];
        Ok(conditions(n, params.epsilon, sigma_lo, &mp, logs))
    }

    /// Σ_{j ≥ n} ln σ_j.
    fn tail_ln_sigma(&self, n: u32) -> f64 {
        self.ln_sigma[n as usize]
    }

    /// r⁽ⁿ⁾ = R1 / Π_{j≥n} σ_j.
    pub fn r_small(&self, n: u32) -> f64 {
        self.params.r1 * (-self.tail_ln_sigma(n)).exp()
    }

    /// R⁽ⁿ⁾ = R4 Π_{j≥n} σ_j.
    pub fn r_big(&self, n: u32) -> f64 {
        self.params.r4 * self.tail_ln_sigma(n).exp()
    }

    /// c1,n = Π_{j≥n} c̃/C̃.
    pub fn c1_from(&self, n: u32) -> f64 {
        self.ln_tilde[n as usize].exp()
    }

    /// c2,n = Π_{j=n0}^{n−1} c/C.
    pub fn c2_upto(&self, n: u32) -> f64 {
        let s: f64 = (self.n0..n).map(|j| self.ln_plain[j as usize]).sum();
        s.exp()
    }

    /// Upper bound M π[(r⁽ᵐ⁺¹⁾)² − R1² + R4² − (R⁽ᵐ⁺¹⁾)²] on mass(V − V_m).
    pub fn tail_bound_after(&self, m: u32) -> f64 {
        let l = self.tail_ln_sigma(m + 1);
        let p = &self.params;
        let inner = p.r1 * p.r1 * (-2.0 * l).exp_m1();
        let outer = -p.r4 * p.r4 * (2.0 * l).exp_m1();
        self.big_m * PI * (inner + outer)
    }

    fn choose_truncation(&mut self) -> Result<()> {
        let p = self.params;
        let shell = PI * (p.r4 - p.r1) * (p.r4 + p.r1);
        let mut m = self.n0;
        while self.tail_bound_after(m) >= p.tail_tolerance * shell && m < MAX_LEVEL {
            m += 1;
        }
        self.set_truncation(m)
    }

    /// Keep the levels n0..=m.
    pub fn set_truncation(&mut self, m: u32) -> Result<()> {
        if m < self.n0 || m > MAX_LEVEL {
            return domain(format!("truncation level must lie in [{}, {MAX_LEVEL}], got {m}", self.n0));
        }
        self.m = m;
        self.tail_mass_bound = self.tail_bound_after(m);
        self.levels = (self.n0..=m).map(|n| self.level(n)).collect();
        Ok(())
    }

    fn level(&self, n: u32) -> LayerLevel {
        let delta = level_delta(n);
        let mp = MiniLayerParams {
            k: level_k(n) as u64,
            delta,
            r2: 1.0,
        };
        LayerLevel {
            n,
            k: mp.k,
            delta,
            r_small: self.r_small(n),
            r_big: self.r_big(n),
            weight_v2: self.c1 * self.c2_upto(n) / mp.big_c(),
            weight_v1: self.c1_from(n + 1) / mp.big_c_tilde(),
        }
    }

    /// Coefficients and radii of δV_m = a·B_{R(m+1),k(m+1)} − b·B_{r(m+1),k(m+1)}:
    /// ((a, R⁽ᵐ⁺¹⁾), (b, r⁽ᵐ⁺¹⁾), k⁽ᵐ⁺¹⁾).
    pub fn telescoped(&self, m: u32) -> ((f64, f64), (f64, f64), u64) {
        (
            (self.c1_from(m + 1), self.r_big(m + 1)),
            (self.c1 * self.c2_upto(m + 1), self.r_small(m + 1)),
            level_k(m + 1) as u64,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub system: LayerSystem,
    pub plan: LayerPlan,
    pub varifold: Varifold,
}

impl Layer {
    /// c with δV = B_{R4,∞} − c B_{R1,∞}.
    pub fn c(&self) -> f64 {
        self.plan.c
    }
}

/// Σₙ (c1 c2,n / C) V2⁽ⁿ⁾ + c1 V00 + Σₙ (c1,n+1 / C̃) V1⁽ⁿ⁾ for n0 ≤ n ≤ m.
pub fn build_layer(system: LayerSystem, params: &LayerParams) -> Result<Layer> {
    layer_from_plan(system, LayerPlan::new(*params)?)
}

pub fn layer_from_plan(system: LayerSystem, plan: LayerPlan) -> Result<Layer> {
    let (v0_in, v0_out) = plan.v00_radii;
    let k0 = level_k(plan.n0) as u64;
    let mut terms = vec![(plan.c1 / k0 as f64, v00_orbit(v0_in, v0_out, k0)?)];
    for lv in &plan.levels {
        let v2 = MiniLayerParams::from_delta(lv.k, lv.delta, lv.r_small)?;
        let v1 = MiniLayerParams::from_delta(lv.k, lv.delta, plan.r_big(lv.n + 1))?;
        terms.push((lv.weight_v2, build_mini_layer(2, &v2)?.into()));
        terms.push((lv.weight_v1, build_mini_layer(1, &v1)?.into()));
    }
    let sum = VarifoldSum::new(terms)?.with_truncation(plan.m as i64, plan.tail_mass_bound);
    let varifold = match system {
        LayerSystem::A => sum.into(),
        LayerSystem::B => Varifold::from(sum).transformed(&swap23()),
    };
    Ok(Layer { system, plan, varifold })
}

/// Generators of the radius sequences rᵢ, i ∈ ℤ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RadiusSequence {
    /// rᵢ = 2ⁱ.
    Geometric,
    /// rᵢ = 2^{sign(i)(2^{|i|} − 1)}: doubly exponential in both directions.
    DoublyExponential,
}

impl RadiusSequence {
    pub fn radius(self, i: i32) -> f64 {
        match self {
            RadiusSequence::Geometric => 2f64.powi(i),
            RadiusSequence::DoublyExponential => {
                let e = 2f64.powi(i.abs()) - 1.0;
                2f64.powf(e * i.signum() as f64)
            }
        }
    }
}

/// Alternating family shells: [r_j, r_{j+1}] carries V_{1,·,·} for even j
/// and V_{2,·,·} for odd j. `radii[0]` is r_{first}.
pub fn build_nonrectifiable(radii: &[f64], first: i32) -> Result<VarifoldSum> {
    if radii.len() < 2 {
        return domain("need at least two radii");
    }
    if radii.windows(2).any(|w| !(w[0] < w[1])) || !(radii[0] > 0.0) {
        return domain("radii must be positive and strictly increasing");
    }
    let terms = radii
        .windows(2)
        .enumerate()
        .map(|(j, w)| {
            let which = if (first + j as i32).rem_euclid(2) == 0 { 1 } else { 2 };
            Ok((1.0, FamilyVarifold::new(which, w[0], w[1], 1.0)?.into()))
        })
        .collect::<Result<Vec<_>>>()?;
    VarifoldSum::new(terms)
}

/// Shells j ∈ [i_lo, i_hi) of a generated sequence.
pub fn build_nonrectifiable_range(seq: RadiusSequence, i_lo: i32, i_hi: i32) -> Result<VarifoldSum> {
    if i_hi <= i_lo {
        return domain("empty index range");
    }
    let radii: Vec<f64> = (i_lo..=i_hi).map(|i| seq.radius(i)).collect();
    build_nonrectifiable(&radii, i_lo)
}

/// ∫_{S¹} ∫_{ρS¹ ⊂ P_φ} X·x/ρ dℓ dφ, the outward boundary flux of either
/// plane family through the sphere of radius ρ. Both families sweep the
/// torus ρF(S¹ × S¹) with the same measure.
pub fn family_boundary_flux(rho: f64, field: &TestVectorField, spec: &QuadratureSpec) -> Estimate {
    let f = |t: f64, p: f64| {
        let (st, ct) = t.sin_cos();
        let (sp, cp) = p.sin_cos();
        let u = crate::geom4::f_map((ct, st), (cp, sp));
        field.eval(&(u * rho)).dot(&u) * rho
    };
    let spec = spec.resolving([TWO_PI * rho; 2], field.angular_feature());
    integrate_rect(&f, (0.0, TWO_PI), (0.0, TWO_PI), &spec)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    Nonconical,
    Conical,
}

pub const DEFAULT_WINDOW_NONCONICAL: i32 = 12;
/// 2^{-n³} squared leaves the f64 range beyond n = 7.
pub const DEFAULT_WINDOW_CONICAL: i32 = 6;
/// Shells beyond the window used to estimate C⁽∞⁾.
const C_INF_SHELLS: i32 = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FullVarifoldParams {
    pub variant: Variant,
    /// Shells n ∈ [−window, window].
    pub window: i32,
    pub tail_tolerance: f64,
}

impl FullVarifoldParams {
    pub fn new(variant: Variant) -> Self {
        FullVarifoldParams {
            variant,
            window: match variant {
                Variant::Nonconical => DEFAULT_WINDOW_NONCONICAL,
                Variant::Conical => DEFAULT_WINDOW_CONICAL,
            },
            tail_tolerance: DEFAULT_TAIL_TOLERANCE,
        }
    }

    pub fn with_window(mut self, window: i32) -> Self {
        self.window = window;
        self
    }

    /// ε⁽ⁿ⁾ = 1/(4(n² + 1)).
    pub fn epsilon(n: i32) -> f64 {
        let n = n as f64;
        1.0 / (4.0 * (n * n + 1.0))
    }

    pub fn r1(&self, n: i32) -> f64 {
        match self.variant {
            Variant::Nonconical => 2f64.powi(-n),
            Variant::Conical => 2f64.powi(-(n * n * n)),
        }
    }

    pub fn r4(&self, n: i32) -> f64 {
        self.r1(n - 1)
    }

    pub fn layer_params(&self, n: i32) -> Result<LayerParams> {
        let eps = Self::epsilon(n);
        let (r1, r4) = (self.r1(n), self.r4(n));
        let mut p = LayerParams::new(r1, (1.0 + eps) * r1, (1.0 - eps) * r4, r4, eps)?;
        p.tail_tolerance = self.tail_tolerance;
        Ok(p)
    }

    /// D_n: J13 for even n, J12 for odd n.
    pub fn band(n: i32) -> BandKind {
        Self::system(n).band()
    }

    pub fn system(n: i32) -> LayerSystem {
        if n.rem_euclid(2) == 0 {
            LayerSystem::A
        } else {
            LayerSystem::B
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window < 1 {
            return domain(format!("truncation window must be ≥ 1, got {}", self.window));
        }
        if self.variant == Variant::Conical && self.window > 7 {
            return domain("conical radii 2^{-n³} leave the f64 range for |n| > 7");
        }
        if !(self.tail_tolerance > 0.0) {
            return domain("tail tolerance must be positive");
        }
        Ok(())
    }
}

/// c⁽ⁿ⁾ depends only on ε⁽ⁿ⁾ and the radius ratios, which are the same for
/// both variants.
pub fn shell_constant(n: i32) -> Result<f64> {
    let eps = FullVarifoldParams::epsilon(n);
    Ok(LayerPlan::new(LayerParams::new(1.0, 1.0 + eps, 2.0 * (1.0 - eps), 2.0, eps)?)?.c)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Shell {
    pub n: i32,
    pub epsilon: f64,
    pub band: BandKind,
    /// C⁽ⁿ⁾.
    pub coefficient: f64,
    pub layer: Layer,
}

impl Shell {
    pub fn radii(&self) -> (f64, f64) {
        (self.layer.plan.params.r1, self.layer.plan.params.r4)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CInfinity {
    /// C⁽ᴹ⁾ for the last computed shell M; an upper bound.
    pub value: f64,
    /// C⁽ᴹ⁾ (1 − Σ_{n>M} ε⁽ⁿ⁾), certified lower bound.
    pub lower: f64,
    pub shells_used: i32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FullVarifold {
    pub params: FullVarifoldParams,
    pub shells: Vec<Shell>,
    pub c_inf: CInfinity,
    /// Σ_n C⁽ⁿ⁾ V⁽ⁿ⁾ over the window.
    pub varifold: Varifold,
    /// Bound on the mass of the omitted shells n > window (all inside the
    /// ball of radius R1⁽ᴺ⁾): C⁽ᴺ⁺¹⁾ 2π (R1⁽ᴺ⁾)².
    pub inner_tail: f64,
}

impl FullVarifold {
    pub fn shell(&self, n: i32) -> Option<&Shell> {
        self.shells.iter().find(|s| s.n == n)
    }

    /// C⁽ⁿ⁾ for any n with a computable layer.
    pub fn coefficient(&self, n: i32) -> Result<f64> {
        if let Some(s) = self.shell(n) {
            return Ok(s.coefficient);
        }
        coefficient(n)
    }

    pub fn outer_radius(&self) -> f64 {
        self.params.r4(-self.params.window)
    }

    pub fn inner_radius(&self) -> f64 {
        self.params.r1(self.params.window)
    }

    /// Certified range of μ(A₀^R)/R² from the density estimate, using the
    /// shell n with R1⁽ⁿ⁾ < R ≤ R4⁽ⁿ⁾.
    pub fn density_band(&self, radius: f64) -> Result<(i32, f64, f64)> {
        let n = self.shell_of(radius)?;
        let eps = FullVarifoldParams::epsilon(n);
        let c_n = self.coefficient(n)?;
        Ok((n, self.c_inf.lower * (1.0 - eps) * PI, c_n * (1.0 + eps) * PI))
    }

    /// n with R1⁽ⁿ⁾ < R ≤ R4⁽ⁿ⁾ inside the window.
    pub fn shell_of(&self, radius: f64) -> Result<i32> {
        let w = self.params.window;
        if !(radius > self.inner_radius() && radius <= self.outer_radius()) {
            return Err(Error::Window(format!(
                "radius {radius} outside the represented range ({}, {}]",
                self.inner_radius(),
                self.outer_radius()
            )));
        }
        Ok((-w..=w)
            .find(|&n| self.params.r1(n) < radius && radius <= self.params.r4(n))
            .expect("window covers the range"))
    }
}

/// C⁽⁰⁾ = 1, C⁽ⁿ⁾ = Π_{j<n} c⁽ʲ⁾ (n > 0), Π_{n≤j<0} 1/c⁽ʲ⁾ (n < 0).
pub fn coefficient(n: i32) -> Result<f64> {
    let mut ln = 0.0;
    if n > 0 {
        for j in 0..n {
            ln += shell_constant(j)?.ln();
        }
    } else {
        for j in n..0 {
            ln -= shell_constant(j)?.ln();
        }
    }
    Ok(ln.exp())
}

pub fn build_full(params: &FullVarifoldParams) -> Result<FullVarifold> {
    params.validate()?;
    let w = params.window;
    // c⁽ⁿ⁾ for the window, then further out for C⁽∞⁾ until the n0 search
    // runs out of levels.
    let mut consts = (-w..=w).map(shell_constant).collect::<Result<Vec<f64>>>()?;
    let mut top = w;
    while top < C_INF_SHELLS {
        match shell_constant(top + 1) {
            Ok(c) => {
                consts.push(c);
                top += 1;
            }
            Err(_) if top > w => break,
            Err(e) => return Err(e),
        }
    }
    let c_of = |n: i32| consts[(n + w) as usize];
    let mut ln_c = std::collections::BTreeMap::new();
    ln_c.insert(0, 0.0);
    let mut acc = 0.0;
    for n in 1..=top + 1 {
        acc += c_of(n - 1).ln();
        ln_c.insert(n, acc);
    }
    acc = 0.0;
    for n in (-w..0).rev() {
        acc -= c_of(n).ln();
        ln_c.insert(n, acc);
    }
    let c_top = ln_c[&(top + 1)].exp();
    // Σ_{n>top} ε⁽ⁿ⁾ ≤ 1/(4 top).
    let eps_tail = 1.0 / (4.0 * top as f64);
    let c_inf = CInfinity {
        value: c_top,
        lower: c_top * (1.0 - eps_tail),
        shells_used: top + 1,
    };

    let shells = (-w..=w)
        .map(|n| {
            let layer = layer_from_plan(FullVarifoldParams::system(n), LayerPlan::new(params.layer_params(n)?)?)?;
            Ok(Shell {
                n,
                epsilon: FullVarifoldParams::epsilon(n),
                band: FullVarifoldParams::band(n),
                coefficient: ln_c[&n].exp(),
                layer,
            })
        })
        .collect::<Result<Vec<Shell>>>()?;
    let r_in = params.r1(w);
    let inner_tail = ln_c[&(w + 1)].exp() * TWO_PI * r_in * r_in;
    let terms = shells.iter().map(|s| (s.coefficient, s.layer.varifold.clone())).collect();
    let varifold = VarifoldSum::new(terms)?
        .with_truncation(w as i64, inner_tail)
        .with_outer_limit(params.r4(-w))
        .into();
    Ok(FullVarifold {
        params: *params,
        shells,
        c_inf,
        varifold,
        inner_tail,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sigma_example() {
        let p = MiniLayerParams::new(100, FRAC_PI_4 - PI / 10.0, 1.0).unwrap();
        // σ² = sin(π/5) / sin(π/5 + π/50), evaluated directly.
        let direct = ((PI / 5.0).sin() / (PI / 5.0 + PI / 50.0).sin()).sqrt();
        assert_relative_eq!(p.sigma(), direct, max_relative = 1e-14);
        assert!((p.sigma() - 0.9603).abs() < 5e-5);
    }

    #[test]
    fn constants_match_gamma_forms() {
        for &(k, g) in &[(24u64, 0.5), (32, 0.6), (100, FRAC_PI_4 - PI / 10.0)] {
            let p = MiniLayerParams::new(k, g, 2.0).unwrap();
            let h = PI / k as f64;
            assert_relative_eq!(p.big_c_tilde(), 4.0 * (2.0 * g).sin(), max_relative = 1e-13);
            assert_relative_eq!(p.small_c_tilde(), 4.0 * (2.0 * g - h).sin() * h.cos(), max_relative = 1e-13);
            assert_relative_eq!(p.small_c(), 4.0 * (2.0 * (g - h)).sin(), max_relative = 1e-13);
            assert_relative_eq!(p.epsilon(), 2.0 * (2.0 * (g - h)).cos(), max_relative = 1e-13);
            let sigma = ((2.0 * g).cos() / (2.0 * (g - h)).cos()).sqrt();
            assert_relative_eq!(p.sigma(), sigma, max_relative = 1e-13);
            assert!(p.small_c() <= p.big_c_tilde());
            let ln_t = (p.small_c_tilde() / p.big_c_tilde()).ln();
            let ln_p = (p.small_c() / p.big_c()).ln();
            assert_relative_eq!(ln_ratio_tilde(p.delta, h), ln_t, max_relative = 1e-10);
            assert_relative_eq!(ln_ratio_plain(p.delta, h), ln_p, max_relative = 1e-10);
        }
    }

    #[test]
    fn mini_layer_rejects_bad_params() {
        assert!(MiniLayerParams::new(20, 0.6, 1.0).is_err());
        assert!(MiniLayerParams::new(24, 0.3, 1.0).is_err());
        assert!(MiniLayerParams::new(24, FRAC_PI_4, 1.0).is_err());
        assert!(MiniLayerParams::new(24, 0.6, -1.0).is_err());
    }

    #[test]
    fn mini_layer_radii_and_ring_count() {
        let p = MiniLayerParams::new(24, 0.6, 2.0).unwrap();
        for which in [1, 2] {
            let v = build_mini_layer(which, &p).unwrap();
            let (lo, hi) = Varifold::from(v.clone()).radial_extent();
            assert_relative_eq!(lo, p.r1(), max_relative = 1e-12);
            assert_relative_eq!(hi, p.r2, max_relative = 1e-12);
            match &v.terms()[0].1 {
                Varifold::Orbit(o) => {
                    assert_eq!(o.count, 24);
                    match o.base.as_ref() {
                        Varifold::Sum(s) => assert_eq!(s.terms().len(), 2),
                        other => panic!("unexpected base {other:?}"),
                    }
                }
                other => panic!("unexpected term {other:?}"),
            }
        }
    }

    #[test]
    fn v00_mass_exact() {
        let v: Varifold = build_v00(1.0, 2.0, 4).unwrap().into();
        assert_relative_eq!(v.mass().unwrap(), 3.0 * PI, max_relative = 1e-15);
        assert_relative_eq!(v.mass_in(1.2, 1.7).unwrap(), PI * (1.7f64.powi(2) - 1.2f64.powi(2)), max_relative = 1e-14);
    }

    #[test]
    fn ring_example_mass() {
        let r = build_ring(1.0, 0.0, 0.0, PI / 8.0).unwrap();
        assert_relative_eq!(r.mass(), PI, max_relative = 1e-14);
    }

    #[test]
    fn layer_plan_conditions() {
        let plan = LayerPlan::new(LayerParams::new(1.0, 2.0, 3.0, 4.0, 0.2).unwrap()).unwrap();
        assert!(plan.c > 0.8 && plan.c < 1.0);
        let cond = LayerPlan::conditions_at(&plan.params, plan.n0).unwrap();
        assert!(cond.all());
        if plan.n0 > 1 {
            assert!(!LayerPlan::conditions_at(&plan.params, plan.n0 - 1).unwrap().all());
        }
        assert_relative_eq!(plan.r_small(plan.n0), 1.0 / plan.sigma, max_relative = 1e-14);
        assert_relative_eq!(plan.r_big(plan.n0), 4.0 * plan.sigma, max_relative = 1e-14);
        // Radii recursions r⁽ⁿ⁺¹⁾ = σₙ r⁽ⁿ⁾ and R⁽ⁿ⁺¹⁾ = R⁽ⁿ⁾/σₙ.
        for n in plan.n0..plan.n0 + 5 {
            let s = ln_sigma(level_delta(n), PI / level_k(n)).exp();
            assert_relative_eq!(plan.r_small(n + 1), s * plan.r_small(n), max_relative = 1e-13);
            assert_relative_eq!(plan.r_big(n + 1), plan.r_big(n) / s, max_relative = 1e-13);
        }
        assert!(plan.tail_mass_bound < plan.params.tail_tolerance * PI * 15.0);
    }

    #[test]
    fn layer_products_against_direct_products() {
        let plan = LayerPlan::new(LayerParams::new(1.0, 2.0, 3.0, 4.0, 0.2).unwrap()).unwrap();
        // Direct products over 150 levels of the ratios written in δ, where
        // the γ-form would cancel catastrophically for deep levels.
        let (mut c1, mut c2, mut s) = (1.0f64, 1.0f64, 1.0f64);
        for n in plan.n0..150 {
            let k = level_k(n);
            let (d, h) = (PI / k.sqrt(), PI / k);
            c1 *= (2.0 * d + h).cos() * h.cos() / (2.0 * d).cos();
            c2 *= (2.0 * d + 2.0 * h).cos() / ((2.0 * d + h).cos() * h.cos());
            s *= ((2.0 * d).sin() / (2.0 * d + 2.0 * h).sin()).sqrt();
        }
        assert_relative_eq!(plan.c1, c1, max_relative = 1e-9);
        assert_relative_eq!(plan.c2, c2, max_relative = 1e-9);
        assert_relative_eq!(plan.sigma, s, max_relative = 1e-9);
    }

    #[test]
    fn layer_no_n0_reports_condition() {
        let err = LayerPlan::new(LayerParams::new(1.0, 1.0 + 1e-12, 2.0, 3.0, 1e-12).unwrap()).unwrap_err();
        match err {
            Error::Numerical(msg) => assert!(msg.contains("ε_n < ε"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn full_params_radii() {
        let p = FullVarifoldParams::new(Variant::Nonconical);
        for n in -3..4 {
            assert_eq!(p.r4(n), 2.0 * p.r1(n));
        }
        let c = FullVarifoldParams::new(Variant::Conical);
        for i in 1..4 {
            let n = 2 * i;
            let ratio = c.r4(n) / c.r1(n);
            assert_eq!(ratio, 2f64.powi(n * n * n - (n - 1) * (n - 1) * (n - 1)));
        }
        assert!(FullVarifoldParams::new(Variant::Conical).with_window(8).validate().is_err());
        assert_eq!(FullVarifoldParams::band(4), BandKind::J13);
        assert_eq!(FullVarifoldParams::band(-3), BandKind::J12);
    }

    #[test]
    fn nonrectifiable_checks_monotone() {
        assert!(build_nonrectifiable(&[1.0, 2.0, 1.5], 0).is_err());
        let v = build_nonrectifiable_range(RadiusSequence::Geometric, -2, 3).unwrap();
        assert_eq!(v.terms().len(), 5);
        match (&v.terms()[0].1, &v.terms()[1].1) {
            (Varifold::Family(a), Varifold::Family(b)) => {
                assert_eq!((a.which, b.which), (1, 2));
                assert_eq!(a.r_outer, b.r_inner);
            }
            _ => panic!("expected families"),
        }
        assert_eq!(RadiusSequence::DoublyExponential.radius(0), 1.0);
        assert_eq!(RadiusSequence::DoublyExponential.radius(2), 8.0);
        assert_eq!(RadiusSequence::DoublyExponential.radius(-2), 0.125);
    }
}
