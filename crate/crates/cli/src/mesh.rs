//! Ring surfaces as quad meshes. Rows follow α from t1 to t2, columns follow
//! β over [0, 2π]; the last column repeats the first so the β seam closes.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::str::FromStr;

use r4varifold::constructions::build_ring;
use r4varifold::minimal_surface::evaluate;
use r4varifold::Vec4;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Projection {
    /// Drop coordinate `axis` (1-based) and keep the other three.
    DropAxis(usize),
    /// |x| times the stereographic image of x/|x| from e4.
    Stereographic,
    /// Keep all four coordinates (`v4` lines).
    None,
}

impl FromStr for Projection {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "drop-axis" => Ok(Projection::DropAxis(4)),
            "stereographic" => Ok(Projection::Stereographic),
            "none" => Ok(Projection::None),
            _ => Err(format!("unknown projection {s} (drop-axis|stereographic|none)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RingMesh {
    pub resolution: usize,
    pub alphas: Vec<f64>,
    /// Row-major, (resolution + 1)² vertices.
    pub vertices: Vec<Vec4>,
}

impl RingMesh {
    pub fn side(&self) -> usize {
        self.resolution + 1
    }

    pub fn vertex(&self, row: usize, col: usize) -> &Vec4 {
        &self.vertices[row * self.side() + col]
    }
}

pub fn ring_mesh(d: f64, alpha0: f64, t1: f64, t2: f64, resolution: usize) -> Result<RingMesh, CliError> {
    if resolution == 0 {
        return Err(CliError::Parse("mesh resolution must be at least 1".into()));
    }
    let ring = build_ring(d, alpha0, t1, t2).map_err(|e| CliError::Parse(format!("ring spec: {e}")))?;
    let n = resolution;
    let alphas: Vec<f64> = (0..=n)
        .map(|i| if i == n { t2 } else { t1 + (t2 - t1) * i as f64 / n as f64 })
        .collect();
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for &a in &alphas {
        let row_start = vertices.len();
        for j in 0..n {
            let beta = 2.0 * PI * j as f64 / n as f64;
            vertices.push(evaluate(&ring.params, a, beta)?.position);
        }
        vertices.push(vertices[row_start]);
    }
    Ok(RingMesh {
        resolution,
        alphas,
        vertices,
    })
}

fn project(x: &Vec4, p: Projection) -> Vec<f64> {
    match p {
        Projection::None => x.iter().copied().collect(),
        Projection::DropAxis(k) => (0..4).filter(|&i| i + 1 != k).map(|i| x[i]).collect(),
        Projection::Stereographic => {
            let r = x.norm();
            let u = x / r;
            (0..3).map(|i| r * u[i] / (1.0 - u[3])).collect()
        }
    }
}

/// OBJ text: `v x y z` (or `v4 x1 x2 x3 x4` for `Projection::None`) and
/// 1-based `f i j k l` quads.
pub fn to_obj(mesh: &RingMesh, projection: Projection, header: &str) -> String {
    let mut o = String::new();
    for line in header.lines() {
        let _ = writeln!(o, "# {line}");
    }
    let tag = if projection == Projection::None { "v4" } else { "v" };
    for x in &mesh.vertices {
        let c: Vec<String> = project(x, projection).iter().map(|v| v.to_string()).collect();
        let _ = writeln!(o, "{tag} {}", c.join(" "));
    }
    let side = mesh.side();
    for i in 0..mesh.resolution {
        for j in 0..mesh.resolution {
            let v = |r: usize, c: usize| r * side + c + 1;
            let _ = writeln!(o, "f {} {} {} {}", v(i, j), v(i + 1, j), v(i + 1, j + 1), v(i, j + 1));
        }
    }
    o
}
