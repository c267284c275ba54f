//! Tensor Gauss-Legendre cubature with an embedded error estimate.
//!
//! Each cell is integrated with an order-n rule and an order-n/2 rule; the
//! difference is the cell's error estimate. Adaptive mode splits the cell
//! with the largest estimate into four until the summed estimate drops below
//! `target_rel_error` times the integral of |f|. Cell values are reduced by
//! pairwise summation in creation order, so results do not depend on
//! scheduling.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::num::NonZeroUsize;
use std::ops::{Add, AddAssign, Mul};
use std::sync::{Mutex, OnceLock};

use gauss_quad::GaussLegendre;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    /// Gauss-Legendre order per axis.
    pub order: [usize; 2],
    /// Initial uniform cells per axis.
    pub subdivisions: [usize; 2],
    pub adaptive: bool,
    pub target_rel_error: f64,
    /// Cap on cells per adaptive integral.
    pub max_cells: usize,
    /// Trapezoid nodes for continuous circle families.
    pub circle_nodes: usize,
    /// Cap on sampled members of a discrete rotation orbit; orbits with
    /// fewer members are summed exactly.
    pub orbit_nodes: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            order: [16, 16],
            subdivisions: [1, 4],
            adaptive: true,
            target_rel_error: 1e-10,
            max_cells: 2048,
            circle_nodes: 256,
            orbit_nodes: 256,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.order.iter().any(|&o| o < 2) {
            return domain("quadrature order must be at least 2");
        }
        if self.subdivisions.iter().any(|&s| s < 1) {
            return domain("quadrature subdivisions must be at least 1");
        }
        if !(self.target_rel_error > 0.0) {
            return domain("target_rel_error must be positive");
        }
        if self.circle_nodes < 2 || self.orbit_nodes < 2 {
            return domain("circle_nodes and orbit_nodes must be at least 2");
        }
        if self.max_cells < 1 {
            return domain("max_cells must be at least 1");
        }
        Ok(())
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.target_rel_error = tol;
        self
    }

    /// Raise the initial grid so no cell is longer than half of `feature`
    /// along either axis, given the physical length of each axis. A bump
    /// that falls between the nodes of the first grid is invisible to the
    /// adaptive error estimate.
    pub fn resolving(&self, lengths: [f64; 2], feature: Option<f64>) -> QuadratureSpec {
        let mut s = self.clone();
        if let Some(f) = feature {
            for (sub, len) in s.subdivisions.iter_mut().zip(lengths) {
                *sub = (*sub).max(cells_for(len, f));
            }
        }
        s
    }
}

/// Most initial cells per axis requested by [`QuadratureSpec::resolving`].
pub const MAX_RESOLVING_CELLS: usize = 256;

/// Equal parts of `length` needed to keep each part below feature/2.
pub fn cells_for(length: f64, feature: f64) -> usize {
    if !(feature > 0.0 && length > 0.0) {
        return 1;
    }
    let n = (2.0 * length / feature).ceil();
    if n < MAX_RESOLVING_CELLS as f64 {
        (n as usize).max(1)
    } else {
        MAX_RESOLVING_CELLS
    }
}

/// Value with an error estimate and the integral of |f| as a scale.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub scale: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate {
            value,
            error: 0.0,
            scale: value.abs(),
        }
    }
}

impl Add for Estimate {
    type Output = Estimate;
    fn add(self, o: Estimate) -> Estimate {
        Estimate {
            value: self.value + o.value,
            error: self.error + o.error,
            scale: self.scale + o.scale,
        }
    }
}

impl AddAssign for Estimate {
    fn add_assign(&mut self, o: Estimate) {
        *self = *self + o;
    }
}

impl Mul<f64> for Estimate {
    type Output = Estimate;
    fn mul(self, c: f64) -> Estimate {
        Estimate {
            value: self.value * c,
            error: self.error * c.abs(),
            scale: self.scale * c.abs(),
        }
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1], cached per order.
pub fn gl_rule(n: usize) -> &'static [(f64, f64)] {
    type Rules = HashMap<usize, &'static [(f64, f64)]>;
    static CACHE: OnceLock<Mutex<Rules>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap_or_else(|p| p.into_inner());
    guard.entry(n).or_insert_with(|| {
        let rule = GaussLegendre::new(NonZeroUsize::new(n.max(1)).unwrap());
        let v: Vec<(f64, f64)> = rule.iter().map(|(x, w)| (*x, *w)).collect();
        Box::leak(v.into_boxed_slice())
    })
}

pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => {
            let (a, b) = xs.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

pub fn sum_estimates(xs: &[Estimate]) -> Estimate {
    let v: Vec<f64> = xs.iter().map(|e| e.value).collect();
    Estimate {
        value: pairwise_sum(&v),
        error: xs.iter().map(|e| e.error).sum(),
        scale: xs.iter().map(|e| e.scale).sum(),
    }
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    x: (f64, f64),
    y: (f64, f64),
    est: Estimate,
    /// Whether the x-direction dominates the error estimate.
    split_x: bool,
}

fn tensor(f: &dyn Fn(f64, f64) -> f64, x: (f64, f64), y: (f64, f64), nx: usize, ny: usize) -> (f64, f64) {
    let rx = gl_rule(nx);
    let ry = gl_rule(ny);
    let (hx, mx) = (0.5 * (x.1 - x.0), 0.5 * (x.1 + x.0));
    let (hy, my) = (0.5 * (y.1 - y.0), 0.5 * (y.1 + y.0));
    let mut acc = 0.0;
    let mut abs = 0.0;
    for &(xi, wi) in rx {
        let px = mx + hx * xi;
        let mut row = 0.0;
        let mut row_abs = 0.0;
        for &(yj, wj) in ry {
            let v = f(px, my + hy * yj);
            row += wj * v;
            row_abs += wj * v.abs();
        }
        acc += wi * row;
        abs += wi * row_abs;
    }
    let jac = hx * hy;
    (acc * jac, abs * jac.abs())
}

fn eval_cell(f: &dyn Fn(f64, f64) -> f64, x: (f64, f64), y: (f64, f64), order: [usize; 2]) -> Cell {
    let (hi, abs) = tensor(f, x, y, order[0], order[1]);
    let (lo_x, _) = tensor(f, x, y, (order[0] / 2).max(1), order[1]);
    let (lo_y, _) = tensor(f, x, y, order[0], (order[1] / 2).max(1));
    let (ex, ey) = ((hi - lo_x).abs(), (hi - lo_y).abs());
    Cell {
        x,
        y,
        est: Estimate {
            value: hi,
            error: ex + ey,
            scale: abs,
        },
        split_x: ex >= ey,
    }
}

struct Ranked {
    err: f64,
    id: usize,
}

impl PartialEq for Ranked {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Ranked {}
impl PartialOrd for Ranked {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Ranked {
    fn cmp(&self, o: &Self) -> Ordering {
        self.err.total_cmp(&o.err).then_with(|| o.id.cmp(&self.id))
    }
}

/// Integral of f over [x.0, x.1] x [y.0, y.1].
///
/// Each cell estimates its error separately along x and y by halving the
/// order in one direction; refinement bisects the worst cell along its worse
/// axis, so kinks along coordinate lines are resolved without refining the
/// other direction.
pub fn integrate_rect(f: &dyn Fn(f64, f64) -> f64, x: (f64, f64), y: (f64, f64), spec: &QuadratureSpec) -> Estimate {
    if x.1 <= x.0 || y.1 <= y.0 {
        return Estimate::default();
    }
    let [sx, sy] = spec.subdivisions;
    let mut cells: Vec<Option<Cell>> = Vec::with_capacity(sx * sy);
    for i in 0..sx {
        let xa = x.0 + (x.1 - x.0) * i as f64 / sx as f64;
        let xb = if i + 1 == sx { x.1 } else { x.0 + (x.1 - x.0) * (i + 1) as f64 / sx as f64 };
        for j in 0..sy {
            let ya = y.0 + (y.1 - y.0) * j as f64 / sy as f64;
            let yb = if j + 1 == sy { y.1 } else { y.0 + (y.1 - y.0) * (j + 1) as f64 / sy as f64 };
            cells.push(Some(eval_cell(f, (xa, xb), (ya, yb), spec.order)));
        }
    }
    if spec.adaptive {
        refine(f, &mut cells, spec);
    }
    let live: Vec<Estimate> = cells.iter().flatten().map(|c| c.est).collect();
    sum_estimates(&live)
}

fn refine(f: &dyn Fn(f64, f64) -> f64, cells: &mut Vec<Option<Cell>>, spec: &QuadratureSpec) {
    let mut heap: BinaryHeap<Ranked> = cells
        .iter()
        .enumerate()
        .map(|(id, c)| Ranked {
            err: c.as_ref().map_or(0.0, |c| c.est.error),
            id,
        })
        .collect();
    let mut err: f64 = cells.iter().flatten().map(|c| c.est.error).sum();
    let mut scale: f64 = cells.iter().flatten().map(|c| c.est.scale).sum();
    let mut live = cells.len();
    while err > spec.target_rel_error * scale && live < spec.max_cells {
        let Some(top) = heap.pop() else { break };
        let Some(cell) = cells[top.id].take() else { continue };
        let (lo, hi) = if cell.split_x { cell.x } else { cell.y };
        let mid = 0.5 * (lo + hi);
        if !(mid > lo && mid < hi) {
            // Cell is at floating-point resolution; keep it without its estimate.
            err -= cell.est.error;
            cells[top.id] = Some(cell);
            continue;
        }
        err -= cell.est.error;
        scale -= cell.est.scale;
        for half in [(lo, mid), (mid, hi)] {
            let (x, y) = if cell.split_x { (half, cell.y) } else { (cell.x, half) };
            let c = eval_cell(f, x, y, spec.order);
            err += c.est.error;
            scale += c.est.scale;
            heap.push(Ranked {
                err: c.est.error,
                id: cells.len(),
            });
            cells.push(Some(c));
        }
        live += 1;
    }
}

/// Integral of f over [a, b] with the same adaptive scheme in one variable.
pub fn integrate_interval(f: &dyn Fn(f64) -> f64, a: f64, b: f64, spec: &QuadratureSpec) -> Estimate {
    integrate_1d(f, a, b, spec)
}

fn integrate_1d(f: &dyn Fn(f64) -> f64, a: f64, b: f64, spec: &QuadratureSpec) -> Estimate {
    if b <= a {
        return Estimate::default();
    }
    let n = spec.subdivisions[0].max(spec.subdivisions[1]);
    let order = spec.order[0];
    let rule = |x: (f64, f64), o: usize| {
        let (h, m) = (0.5 * (x.1 - x.0), 0.5 * (x.1 + x.0));
        let mut acc = 0.0;
        let mut abs = 0.0;
        for &(t, w) in gl_rule(o) {
            let v = f(m + h * t);
            acc += w * v;
            abs += w * v.abs();
        }
        (acc * h, abs * h)
    };
    let cell = |x: (f64, f64)| {
        let (hi, abs) = rule(x, order);
        let (lo, _) = rule(x, (order / 2).max(1));
        (x, Estimate { value: hi, error: (hi - lo).abs(), scale: abs })
    };
    let mut cells: Vec<Option<((f64, f64), Estimate)>> = (0..n)
        .map(|i| {
            let xa = a + (b - a) * i as f64 / n as f64;
            let xb = if i + 1 == n { b } else { a + (b - a) * (i + 1) as f64 / n as f64 };
            Some(cell((xa, xb)))
        })
        .collect();
    if spec.adaptive {
        let mut heap: BinaryHeap<Ranked> = cells
            .iter()
            .enumerate()
            .map(|(id, c)| Ranked { err: c.unwrap().1.error, id })
            .collect();
        let mut err: f64 = cells.iter().flatten().map(|c| c.1.error).sum();
        let mut scale: f64 = cells.iter().flatten().map(|c| c.1.scale).sum();
        let mut live = cells.len();
        while err > spec.target_rel_error * scale && live < spec.max_cells {
            let Some(top) = heap.pop() else { break };
            let Some((x, est)) = cells[top.id] else { continue };
            let xm = 0.5 * (x.0 + x.1);
            if !(xm > x.0 && xm < x.1) {
                continue;
            }
            cells[top.id] = None;
            err -= est.error;
            scale -= est.scale;
            for half in [(x.0, xm), (xm, x.1)] {
                let c = cell(half);
                err += c.1.error;
                scale += c.1.scale;
                heap.push(Ranked { err: c.1.error, id: cells.len() });
                cells.push(Some(c));
            }
            live += 1;
        }
    }
    let live: Vec<Estimate> = cells.iter().flatten().map(|c| c.1).collect();
    sum_estimates(&live)
}

/// Trapezoid rule for a 2π-periodic integrand on n nodes, with the n/2-node
/// difference as error estimate. Nodes are 2πj/n + offset.
pub fn trapezoid_periodic(f: &(dyn Fn(f64) -> f64 + Sync), n: usize, offset: f64) -> Estimate {
    let n = n.max(2);
    let vals: Vec<f64> = (0..n)
        .map(|j| f(offset + 2.0 * std::f64::consts::PI * j as f64 / n as f64))
        .collect();
    periodic_from_values(&vals)
}

pub(crate) fn periodic_from_values(vals: &[f64]) -> Estimate {
    let n = vals.len();
    let h = 2.0 * std::f64::consts::PI / n as f64;
    let full = pairwise_sum(vals) * h;
    let abs: f64 = vals.iter().map(|v| v.abs()).sum::<f64>() * h;
    let error = if n.is_multiple_of(2) {
        let even: Vec<f64> = vals.iter().step_by(2).cloned().collect();
        (full - pairwise_sum(&even) * 2.0 * h).abs()
    } else {
        0.0
    };
    Estimate { value: full, error, scale: abs }
}
