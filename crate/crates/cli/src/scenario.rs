//! Scenario files: one `key = value` per line, `#` starts a comment, keys are
//! dotted (`section.name` or `field.<index>.name`). See the README for the
//! full key list.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use r4varifold::constructions::{FullVarifoldParams, LayerSystem, RadiusSequence, Variant, DEFAULT_TAIL_TOLERANCE};
use r4varifold::field::{FieldFamily, PolyTerm, RadialProfile, TestVectorField};
use r4varifold::quadrature::QuadratureSpec;

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum Construction {
    Ring { d: f64, alpha0: f64, t1: f64, t2: f64 },
    V00 { r1: f64, r2: f64, k: u64 },
    MiniLayer { which: u8, k: u64, gamma: f64, r2: f64 },
    Layer { system: LayerSystem, radii: [f64; 4], epsilon: f64 },
    Nonrectifiable { sequence: RadiusSequence, lo: i32, hi: i32 },
    Full { variant: Variant, window: i32, tail_tolerance: f64 },
}

impl Construction {
    pub fn kind(&self) -> &'static str {
        match self {
            Construction::Ring { .. } => "ring",
            Construction::V00 { .. } => "v00",
            Construction::MiniLayer { .. } => "minilayer",
            Construction::Layer { .. } => "layer",
            Construction::Nonrectifiable { .. } => "nonrectifiable",
            Construction::Full { .. } => "full",
        }
    }

    pub fn default_for(kind: &str) -> Option<Construction> {
        Some(match kind {
            "ring" => Construction::Ring {
                d: 1.0,
                alpha0: 0.0,
                t1: 0.0,
                t2: std::f64::consts::FRAC_PI_8,
            },
            "v00" => Construction::V00 { r1: 1.0, r2: 2.0, k: 24 },
            "minilayer" => Construction::MiniLayer {
                which: 1,
                k: 24,
                gamma: 0.6,
                r2: 1.0,
            },
            "layer" => Construction::Layer {
                system: LayerSystem::A,
                radii: [1.0, 2.0, 3.0, 4.0],
                epsilon: 0.2,
            },
            "nonrectifiable" => Construction::Nonrectifiable {
                sequence: RadiusSequence::Geometric,
                lo: -3,
                hi: 3,
            },
            "full" => {
                let p = FullVarifoldParams::new(Variant::Nonconical);
                Construction::Full {
                    variant: p.variant,
                    window: p.window,
                    tail_tolerance: p.tail_tolerance,
                }
            }
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub construction: Construction,
    pub quad: QuadratureSpec,
    pub fields: Vec<FieldFamily>,
    pub output: Option<String>,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            construction: Construction::default_for("full").expect("known kind"),
            quad: QuadratureSpec::default(),
            fields: vec![FieldFamily::RadialBump {
                amplitude: 1.0,
                profile: RadialProfile::bump(0.0, 1.5),
            }],
            output: None,
        }
    }
}

impl Scenario {
    pub fn test_fields(&self) -> Result<Vec<TestVectorField>, CliError> {
        self.fields
            .iter()
            .enumerate()
            .map(|(i, f)| TestVectorField::new(f.clone()).map_err(|e| CliError::Parse(format!("field.{i}: {e}"))))
            .collect()
    }

    pub fn parse(text: &str) -> Result<Scenario, CliError> {
        let mut keys: BTreeMap<String, (usize, String)> = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Parse(format!("line {}: expected key = value", n + 1)))?;
            let k = k.trim().to_string();
            if k.is_empty() {
                return Err(CliError::Parse(format!("line {}: empty key", n + 1)));
            }
            if keys.insert(k.clone(), (n + 1, v.trim().to_string())).is_some() {
                return Err(CliError::Parse(format!("line {}: duplicate key {k}", n + 1)));
            }
        }
        let mut r = Reader { keys };
        let s = r.scenario()?;
        if let Some((k, (line, _))) = r.keys.iter().next() {
            return Err(CliError::Parse(format!(
                "line {line}: unknown key {k} for construction {}",
                s.construction.kind()
            )));
        }
        Ok(s)
    }

    /// Canonical text form; `parse(serialize(s)) == s`.
    pub fn serialize(&self) -> String {
        let mut o = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(o, "{k} = {v}");
        };
        kv("construction", self.construction.kind().into());
        match &self.construction {
            Construction::Ring { d, alpha0, t1, t2 } => {
                kv("ring.d", num(*d));
                kv("ring.alpha0", num(*alpha0));
                kv("ring.t1", num(*t1));
                kv("ring.t2", num(*t2));
            }
            Construction::V00 { r1, r2, k } => {
                kv("v00.r1", num(*r1));
                kv("v00.r2", num(*r2));
                kv("v00.k", k.to_string());
            }
            Construction::MiniLayer { which, k, gamma, r2 } => {
                kv("minilayer.which", which.to_string());
                kv("minilayer.k", k.to_string());
                kv("minilayer.gamma", num(*gamma));
                kv("minilayer.r2", num(*r2));
            }
            Construction::Layer { system, radii, epsilon } => {
                kv("layer.system", format!("{system:?}"));
                kv("layer.radii", list(radii));
                kv("layer.epsilon", num(*epsilon));
            }
            Construction::Nonrectifiable { sequence, lo, hi } => {
                kv("nonrectifiable.sequence", sequence_name(*sequence).into());
                kv("nonrectifiable.lo", lo.to_string());
                kv("nonrectifiable.hi", hi.to_string());
            }
            Construction::Full {
                variant,
                window,
                tail_tolerance,
            } => {
                kv("full.variant", variant_name(*variant).into());
                kv("full.window", window.to_string());
                kv("full.tail_tolerance", num(*tail_tolerance));
            }
        }
        let q = &self.quad;
        kv("quad.order", format!("{},{}", q.order[0], q.order[1]));
        kv("quad.subdivisions", format!("{},{}", q.subdivisions[0], q.subdivisions[1]));
        kv("quad.adaptive", q.adaptive.to_string());
        kv("quad.tol", num(q.target_rel_error));
        kv("quad.max_cells", q.max_cells.to_string());
        kv("quad.circle_nodes", q.circle_nodes.to_string());
        kv("quad.orbit_nodes", q.orbit_nodes.to_string());
        kv("fields", self.fields.len().to_string());
        for (i, f) in self.fields.iter().enumerate() {
            let key = |name: &str| format!("field.{i}.{name}");
            let profile = |kv: &mut dyn FnMut(&str, String), p: &RadialProfile| match *p {
                RadialProfile::Bump { r_in, r_out } => {
                    kv(&key("r_in"), num(r_in));
                    kv(&key("r_out"), num(r_out));
                }
                RadialProfile::Plateau { r_in, p_in, p_out, r_out } => {
                    kv(&key("r_in"), num(r_in));
                    kv(&key("p_in"), num(p_in));
                    kv(&key("p_out"), num(p_out));
                    kv(&key("r_out"), num(r_out));
                }
            };
            match f {
                FieldFamily::RadialBump { amplitude, profile: p } => {
                    kv(&key("kind"), "radial".into());
                    kv(&key("amplitude"), num(*amplitude));
                    profile(&mut kv, p);
                }
                FieldFamily::DirectionalBump {
                    center,
                    radius,
                    direction,
                } => {
                    kv(&key("kind"), "directional".into());
                    kv(&key("center"), list(center));
                    kv(&key("radius"), num(*radius));
                    kv(&key("direction"), list(direction));
                }
                FieldFamily::PolynomialBump { profile: p, terms } => {
                    kv(&key("kind"), "polynomial".into());
                    profile(&mut kv, p);
                    let t: Vec<String> = terms
                        .iter()
                        .map(|t| {
                            let e = t.exponents;
                            format!("{}:{}{}{}{}:{}", t.component, e[0], e[1], e[2], e[3], num(t.coeff))
                        })
                        .collect();
                    kv(&key("terms"), t.join(";"));
                }
            }
        }
        if let Some(p) = &self.output {
            kv("output.path", p.clone());
        }
        o
    }
}

fn num(x: f64) -> String {
    // Debug prints the shortest string that reads back to the same bits.
    format!("{x:?}")
}

fn list(xs: &[f64]) -> String {
    xs.iter().map(|x| num(*x)).collect::<Vec<_>>().join(",")
}

pub fn variant_name(v: Variant) -> &'static str {
    match v {
        Variant::Nonconical => "nonconical",
        Variant::Conical => "conical",
    }
}

pub fn parse_variant(s: &str) -> Result<Variant, CliError> {
    match s {
        "nonconical" => Ok(Variant::Nonconical),
        "conical" => Ok(Variant::Conical),
        _ => Err(CliError::Parse(format!("unknown variant {s} (nonconical|conical)"))),
    }
}

fn sequence_name(s: RadiusSequence) -> &'static str {
    match s {
        RadiusSequence::Geometric => "geometric",
        RadiusSequence::DoublyExponential => "doubly-exponential",
    }
}

struct Reader {
    keys: BTreeMap<String, (usize, String)>,
}

impl Reader {
    fn take<T: FromStr>(&mut self, key: &str, default: T) -> Result<T, CliError> {
        match self.keys.remove(key) {
            None => Ok(default),
            Some((line, v)) => v
                .parse()
                .map_err(|_| CliError::Parse(format!("line {line}: cannot read {key} = {v}"))),
        }
    }

    fn take_with<T>(&mut self, key: &str, default: T, f: impl Fn(&str) -> Option<T>) -> Result<T, CliError> {
        match self.keys.remove(key) {
            None => Ok(default),
            Some((line, v)) => f(&v).ok_or_else(|| CliError::Parse(format!("line {line}: cannot read {key} = {v}"))),
        }
    }

    fn required(&mut self, key: &str) -> Result<String, CliError> {
        self.keys
            .remove(key)
            .map(|(_, v)| v)
            .ok_or_else(|| CliError::Parse(format!("missing key {key}")))
    }

    fn scenario(&mut self) -> Result<Scenario, CliError> {
        let kind = self.take("construction", "full".to_string())?;
        let base = Construction::default_for(&kind)
            .ok_or_else(|| CliError::Parse(format!("unknown construction {kind}")))?;
        let construction = match base {
            Construction::Ring { d, alpha0, t1, t2 } => Construction::Ring {
                d: self.take("ring.d", d)?,
                alpha0: self.take("ring.alpha0", alpha0)?,
                t1: self.take("ring.t1", t1)?,
                t2: self.take("ring.t2", t2)?,
            },
            Construction::V00 { r1, r2, k } => Construction::V00 {
                r1: self.take("v00.r1", r1)?,
                r2: self.take("v00.r2", r2)?,
                k: self.take("v00.k", k)?,
            },
            Construction::MiniLayer { which, k, gamma, r2 } => Construction::MiniLayer {
                which: self.take("minilayer.which", which)?,
                k: self.take("minilayer.k", k)?,
                gamma: self.take("minilayer.gamma", gamma)?,
                r2: self.take("minilayer.r2", r2)?,
            },
            Construction::Layer { system, radii, epsilon } => Construction::Layer {
                system: self.take_with("layer.system", system, |s| match s {
                    "A" => Some(LayerSystem::A),
                    "B" => Some(LayerSystem::B),
                    _ => None,
                })?,
                radii: self.take_with("layer.radii", radii, |s| floats(s).and_then(|v| v.try_into().ok()))?,
                epsilon: self.take("layer.epsilon", epsilon)?,
            },
            Construction::Nonrectifiable { sequence, lo, hi } => Construction::Nonrectifiable {
                sequence: self.take_with("nonrectifiable.sequence", sequence, |s| match s {
                    "geometric" => Some(RadiusSequence::Geometric),
                    "doubly-exponential" => Some(RadiusSequence::DoublyExponential),
                    _ => None,
                })?,
                lo: self.take("nonrectifiable.lo", lo)?,
                hi: self.take("nonrectifiable.hi", hi)?,
            },
            Construction::Full { .. } => {
                let variant = self.take_with("full.variant", Variant::Nonconical, |s| parse_variant(s).ok())?;
                let d = FullVarifoldParams::new(variant);
                Construction::Full {
                    variant,
                    window: self.take("full.window", d.window)?,
                    tail_tolerance: self.take("full.tail_tolerance", DEFAULT_TAIL_TOLERANCE)?,
                }
            }
        };
        let d = QuadratureSpec::default();
        let pair = |s: &str| -> Option<[usize; 2]> {
            let v: Vec<usize> = s.split(',').map(|x| x.trim().parse().ok()).collect::<Option<_>>()?;
            v.try_into().ok()
        };
        let quad = QuadratureSpec {
            order: self.take_with("quad.order", d.order, pair)?,
            subdivisions: self.take_with("quad.subdivisions", d.subdivisions, pair)?,
            adaptive: self.take("quad.adaptive", d.adaptive)?,
            target_rel_error: self.take("quad.tol", d.target_rel_error)?,
            max_cells: self.take("quad.max_cells", d.max_cells)?,
            circle_nodes: self.take("quad.circle_nodes", d.circle_nodes)?,
            orbit_nodes: self.take("quad.orbit_nodes", d.orbit_nodes)?,
        };
        quad.validate().map_err(|e| CliError::Parse(format!("quad: {e}")))?;

        let explicit = self.keys.keys().any(|k| k.starts_with("field."));
        let count: Option<usize> = self.keys.contains_key("fields").then(|| self.take("fields", 0)).transpose()?;
        let mut fields = Vec::new();
        while self.keys.contains_key(&format!("field.{}.kind", fields.len())) {
            fields.push(self.field(fields.len())?);
        }
        match count {
            Some(n) if n != fields.len() => {
                return Err(CliError::Parse(format!("fields = {n} but {} field entries given", fields.len())));
            }
            None if !explicit => fields = Scenario::default().fields,
            _ => {}
        }
        let output = self.keys.remove("output.path").map(|(_, v)| v);
        Ok(Scenario {
            construction,
            quad,
            fields,
            output,
        })
    }

    fn profile(&mut self, i: usize) -> Result<RadialProfile, CliError> {
        let r_in = self.take(&format!("field.{i}.r_in"), 0.0)?;
        let r_out: f64 = self.required(&format!("field.{i}.r_out"))?.parse().map_err(|_| bad(i, "r_out"))?;
        let p_in = self.keys.remove(&format!("field.{i}.p_in"));
        let p_out = self.keys.remove(&format!("field.{i}.p_out"));
        Ok(match (p_in, p_out) {
            (None, None) => RadialProfile::bump(r_in, r_out),
            (Some((_, a)), Some((_, b))) => RadialProfile::Plateau {
                r_in,
                p_in: a.parse().map_err(|_| bad(i, "p_in"))?,
                p_out: b.parse().map_err(|_| bad(i, "p_out"))?,
                r_out,
            },
            _ => return Err(CliError::Parse(format!("field.{i}: p_in and p_out come together"))),
        })
    }

    fn field(&mut self, i: usize) -> Result<FieldFamily, CliError> {
        let kind = self.required(&format!("field.{i}.kind"))?;
        let vec4 = |s: &str| floats(s).and_then(|v| <[f64; 4]>::try_from(v).ok());
        let f = match kind.as_str() {
            "radial" => FieldFamily::RadialBump {
                amplitude: self.take(&format!("field.{i}.amplitude"), 1.0)?,
                profile: self.profile(i)?,
            },
            "directional" => FieldFamily::DirectionalBump {
                center: vec4(&self.required(&format!("field.{i}.center"))?).ok_or_else(|| bad(i, "center"))?,
                radius: self.required(&format!("field.{i}.radius"))?.parse().map_err(|_| bad(i, "radius"))?,
                direction: vec4(&self.required(&format!("field.{i}.direction"))?).ok_or_else(|| bad(i, "direction"))?,
            },
            "polynomial" => {
                let profile = self.profile(i)?;
                let terms = self.required(&format!("field.{i}.terms"))?;
                FieldFamily::PolynomialBump {
                    profile,
                    terms: terms
                        .split(';')
                        .map(|t| poly_term(t.trim()))
                        .collect::<Option<Vec<_>>>()
                        .ok_or_else(|| bad(i, "terms"))?,
                }
            }
            _ => return Err(CliError::Parse(format!("field.{i}.kind: unknown kind {kind}"))),
        };
        TestVectorField::new(f.clone()).map_err(|e| CliError::Parse(format!("field.{i}: {e}")))?;
        Ok(f)
    }
}

fn bad(i: usize, name: &str) -> CliError {
    CliError::Parse(format!("field.{i}.{name}: cannot read value"))
}

fn floats(s: &str) -> Option<Vec<f64>> {
    s.split(',').map(|x| x.trim().parse().ok()).collect()
}

/// `component:e1e2e3e4:coeff`, e.g. `0:1020:0.5` for 0.5·x1·x3² e1.
fn poly_term(s: &str) -> Option<PolyTerm> {
    let mut it = s.split(':');
    let component = it.next()?.trim().parse().ok()?;
    let e = it.next()?.trim();
    let coeff = it.next()?.trim().parse().ok()?;
    if it.next().is_some() || e.len() != 4 {
        return None;
    }
    let mut exponents = [0u8; 4];
    for (slot, ch) in exponents.iter_mut().zip(e.chars()) {
        *slot = ch.to_digit(10)? as u8;
    }
    Some(PolyTerm {
        component,
        exponents,
        coeff,
    })
}
