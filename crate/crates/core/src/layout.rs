//! Three-circle configurations in the Poincaré disk: construction from
//! curvatures, vertex fans glued along shared tangency points, and SVG output.
//!
//! A generalized circle is the zero set of `F(z) = a|z|^2 - 2 Re(conj(b) z) + c`
//! normalized so that `|b|^2 - a c = 1`. The side `F < 0` holds the center, and
//! then the geodesic curvature is `(a - c) / 2`.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::hypgeom::{self, GeomError, Regime};
use crate::nerve::Nerve;
use crate::quad;

pub type Point = C64;

/// Points this close to the unit circle are treated as ideal.
const IDEAL_TOL: f64 = 1e-12;
/// Tolerance on `k` for the horocycle and geodesic kinds.
const KIND_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LayoutError {
    #[error("curvature {0} is negative or not finite")]
    BadCurvature(f64),
    #[error("the two points coincide")]
    CoincidentPoints,
    #[error("no circle of curvature {k} passes through points at distance {distance}")]
    Unrealizable { k: f64, distance: f64 },
    #[error("vertex {0} has zero curvature and no common center")]
    DegenerateCenter(usize),
    #[error("vertex {0} is not in the nerve")]
    BadVertex(usize),
    #[error("curvature vector has {got} entries, nerve has {expected} vertices")]
    WrongLength { expected: usize, got: usize },
    #[error(transparent)]
    Geometry(#[from] GeomError),
}

type M2 = [[C64; 2]; 2];

fn mul(x: &M2, y: &M2) -> M2 {
    let mut out = [[C64::new(0.0, 0.0); 2]; 2];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, e) in row.iter_mut().enumerate() {
            *e = x[i][0] * y[0][j] + x[i][1] * y[1][j];
        }
    }
    out
}

fn adjoint(x: &M2) -> M2 {
    [[x[0][0].conj(), x[1][0].conj()], [x[0][1].conj(), x[1][1].conj()]]
}

/// Orientation-preserving isometry of the disk, `z -> (p z + q) / (r z + s)`
/// with determinant 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mobius {
    m: M2,
}

impl Mobius {
    pub fn identity() -> Mobius {
        let (o, z) = (C64::new(1.0, 0.0), C64::new(0.0, 0.0));
        Mobius { m: [[o, z], [z, o]] }
    }

    /// `z -> (z - p) / (1 - conj(p) z)`, sending `p` to the origin. Its
    /// derivative at `p` is real and positive.
    pub fn to_origin(p: Point) -> Mobius {
        let s = 1.0 / (1.0 - p.norm_sqr()).sqrt();
        Mobius { m: [[C64::new(s, 0.0), -p * s], [-p.conj() * s, C64::new(s, 0.0)]] }
    }

    /// Rotation about the origin by `phi`.
    pub fn rotation(phi: f64) -> Mobius {
        let h = C64::from_polar(1.0, 0.5 * phi);
        let z = C64::new(0.0, 0.0);
        Mobius { m: [[h, z], [z, h.conj()]] }
    }

    pub fn apply(&self, z: Point) -> Point {
        (self.m[0][0] * z + self.m[0][1]) / (self.m[1][0] * z + self.m[1][1])
    }

    /// `next` after `self`.
    pub fn then(&self, next: &Mobius) -> Mobius {
        Mobius { m: mul(&next.m, &self.m) }
    }

    pub fn inverse(&self) -> Mobius {
        let m = &self.m;
        Mobius { m: [[m[1][1], -m[0][1]], [-m[1][0], m[0][0]]] }
    }
}

/// Hyperbolic distance between two points of the open disk.
pub fn distance(z: Point, w: Point) -> f64 {
    let r = (z - w).norm() / (C64::new(1.0, 0.0) - w.conj() * z).norm();
    2.0 * r.min(1.0).atanh()
}

pub fn poincare_to_klein(z: Point) -> Point {
    z * (2.0 / (1.0 + z.norm_sqr()))
}

pub fn klein_to_poincare(x: Point) -> Point {
    x / (1.0 + (1.0 - x.norm_sqr()).max(0.0).sqrt())
}

pub fn is_ideal(z: Point) -> bool {
    z.norm() >= 1.0 - IDEAL_TOL
}

fn lorentz(x: [f64; 3], y: [f64; 3]) -> f64 {
    x[0] * y[0] + x[1] * y[1] - x[2] * y[2]
}

/// Euclidean description of a generalized circle in the disk picture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Euclidean {
    Circle { center: Point, radius: f64 },
    /// The line `Re(conj(normal) z) = offset`, with `|normal| = 1`.
    Line { normal: C64, offset: f64 },
}

/// Center of a generalized circle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Center {
    Point(Point),
    Ideal(Point),
    /// The axis geodesic of a hypercycle; a geodesic is its own axis.
    Axis(DiskCircle),
}

/// A generalized circle, stored as its normalized Hermitian form. The sign of
/// the form also fixes the branch of a hypercycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiskCircle {
    pub a: f64,
    pub b: C64,
    pub c: f64,
}

impl DiskCircle {
    fn normalized(a: f64, b: C64, c: f64) -> DiskCircle {
        let q = (b.norm_sqr() - a * c).sqrt();
        DiskCircle { a: a / q, b: b / q, c: c / q }
    }

    pub fn value(&self, z: Point) -> f64 {
        self.a * z.norm_sqr() - 2.0 * (self.b.conj() * z).re + self.c
    }

    /// `dF/dx + i dF/dy`; points away from the center side.
    pub fn gradient(&self, z: Point) -> C64 {
        2.0 * (self.a * z - self.b)
    }

    pub fn curvature(&self) -> f64 {
        0.5 * (self.a - self.c).abs() / (self.b.norm_sqr() - self.a * self.c).sqrt()
    }

    pub fn kind(&self) -> Regime {
        let k = self.curvature();
        if k < KIND_TOL {
            Regime::Geodesic
        } else if (k - 1.0).abs() < KIND_TOL {
            Regime::Horocycle
        } else if k < 1.0 {
            Regime::Hypercycle
        } else {
            Regime::Circle
        }
    }

    /// The circle as `{x in H : <x, n> = r}` on the hyperboloid.
    pub fn plane(&self) -> ([f64; 3], f64) {
        ([-self.b.re, -self.b.im, -0.5 * (self.a + self.c)], 0.5 * (self.a - self.c))
    }

    pub fn from_plane(n: [f64; 3], r: f64) -> DiskCircle {
        DiskCircle::normalized(r - n[2], C64::new(-n[0], -n[1]), -n[2] - r)
    }

    /// Image under `m`.
    pub fn pushed(&self, m: &Mobius) -> DiskCircle {
        let n = m.inverse().m;
        let h: M2 = [[C64::new(self.a, 0.0), -self.b], [-self.b.conj(), C64::new(self.c, 0.0)]];
        let g = mul(&adjoint(&n), &mul(&h, &n));
        DiskCircle::normalized(g[0][0].re, -g[0][1], g[1][1].re)
    }

    pub fn euclidean(&self) -> Euclidean {
        let scale = self.b.norm() + self.c.abs();
        if self.a.abs() <= 1e-14 * scale {
            let nb = self.b.norm();
            Euclidean::Line { normal: self.b / nb, offset: 0.5 * self.c / nb }
        } else {
            let center = self.b / self.a;
            Euclidean::Circle { center, radius: (self.b.norm_sqr() - self.a * self.c).sqrt() / self.a.abs() }
        }
    }

    pub fn center(&self) -> Center {
        let (n, _) = self.plane();
        match self.kind() {
            Regime::Circle => Center::Point(klein_to_poincare(C64::new(n[0] / n[2], n[1] / n[2]))),
            Regime::Horocycle => {
                let p = C64::new(n[0], n[1]);
                Center::Ideal(p / p.norm() * n[2].signum())
            }
            Regime::Hypercycle => Center::Axis(DiskCircle::from_plane(n, 0.0)),
            Regime::Geodesic => Center::Axis(*self),
        }
    }

    /// Points where the curve meets the unit circle.
    pub fn boundary_points(&self) -> Option<[Point; 2]> {
        let nb = self.b.norm();
        let cos = (self.a + self.c) / (2.0 * nb);
        if cos.abs() > 1.0 {
            return None;
        }
        let (arg, half) = (self.b.arg(), cos.acos());
        Some([C64::from_polar(1.0, arg - half), C64::from_polar(1.0, arg + half)])
    }

    /// Largest coefficient difference to another circle.
    pub fn distance_to(&self, o: &DiskCircle) -> f64 {
        (self.a - o.a).abs().max((self.b - o.b).norm()).max((self.c - o.c).abs())
    }
}

/// Sides of a directed geodesic `p -> q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Arc of a generalized circle from `from` through `mid` to `to`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arc {
    pub from: Point,
    pub mid: Point,
    pub to: Point,
}

impl Arc {
    // the arc is the image of [0, 1] under u -> (from (1 - u) + c to u) / (1 - u + c u)
    fn coefficient(&self) -> C64 {
        (self.mid - self.from) / (self.to - self.mid)
    }

    pub fn point(&self, u: f64) -> Point {
        let c = self.coefficient();
        (self.from * (1.0 - u) + c * self.to * u) / (1.0 - u + c * u)
    }

    pub fn derivative(&self, u: f64) -> C64 {
        let c = self.coefficient();
        let den = 1.0 + (c - 1.0) * u;
        c * (self.to - self.from) / (den * den)
    }

    pub fn transformed(&self, m: &Mobius) -> Arc {
        Arc { from: m.apply(self.from), mid: m.apply(self.mid), to: m.apply(self.to) }
    }

    /// Interior points at evenly spaced parameters.
    pub fn samples(&self, n: usize) -> Vec<Point> {
        (0..n).map(|i| self.point((i as f64 + 0.5) / n as f64)).collect()
    }

    /// Hyperbolic length by Gauss-Legendre quadrature; infinite if an
    /// endpoint is ideal.
    pub fn hyperbolic_length(&self) -> f64 {
        if is_ideal(self.from) || is_ideal(self.to) {
            return f64::INFINITY;
        }
        quad::composite(16, 16)
            .iter()
            .map(|&(u, w)| w * 2.0 * self.derivative(u).norm() / (1.0 - self.point(u).norm_sqr()))
            .sum()
    }
}

fn geodesic_frame(p: Point, q: Point) -> (Mobius, f64) {
    let to_p = Mobius::to_origin(p);
    let q1 = to_p.apply(q);
    let r = q1.norm();
    // tanh(d / 4) from tanh(d / 2)
    let a = r / (1.0 + (1.0 - r * r).sqrt());
    let shift = Mobius::to_origin(C64::new(a, 0.0));
    let m = to_p.then(&Mobius::rotation(-q1.arg())).then(&shift);
    (m, a)
}

/// The generalized circle of curvature `k` through `p` and `q` with its center
/// on `side` of the directed geodesic `p -> q`, and its arc from `p` to `q`
/// on the other side.
pub fn arc_through(p: Point, q: Point, k: f64, side: Side) -> Result<(DiskCircle, Arc), LayoutError> {
    if !(k >= 0.0) || !k.is_finite() {
        return Err(LayoutError::BadCurvature(k));
    }
    let d = distance(p, q);
    if d == 0.0 {
        return Err(LayoutError::CoincidentPoints);
    }
    // frame with p = -a, q = a
    let (m, a) = geodesic_frame(p, q);
    let inv = 2.0 * k / (1.0 + a * a);
    let t = a * inv;
    if t > 1.0 + 1e-12 {
        return Err(LayoutError::Unrealizable { k, distance: d });
    }
    let s = if side == Side::Left { 1.0 } else { -1.0 };
    let yr = (1.0 - t * t).max(0.0).sqrt();
    let local = DiskCircle::normalized(inv, C64::new(0.0, s * yr), -a * a * inv);
    let mid = C64::new(0.0, -s * a * t / (1.0 + yr));
    let back = m.inverse();
    Ok((local.pushed(&back), Arc { from: p, mid: back.apply(mid), to: q }))
}

pub fn circle_from_two_points_and_curvature(p: Point, q: Point, k: f64, side: Side) -> Result<DiskCircle, LayoutError> {
    arc_through(p, q, k, side).map(|r| r.0)
}

// geodesic through a point of `circle`, tangent to it there and on the far side
fn tangent_geodesic(circle: &DiskCircle, z: Point) -> DiskCircle {
    let t = Mobius::to_origin(z);
    let local = circle.pushed(&t);
    let b = -local.b / local.b.norm();
    DiskCircle { a: 0.0, b, c: 0.0 }.pushed(&t.inverse())
}

// point of the geodesic nearest to z
fn foot(axis: &DiskCircle, z: Point) -> Point {
    let t = Mobius::to_origin(z);
    let w = match axis.pushed(&t).euclidean() {
        Euclidean::Line { normal, offset } => normal * offset,
        Euclidean::Circle { center, radius } => center * (1.0 - radius / center.norm()),
    };
    t.inverse().apply(w)
}

/// Vertex of the circle-packed triangle at one circle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Vertex {
    Point(Point),
    Ideal(Point),
    /// Segment on the axis between the feet of the two edges.
    Segment(Point, Point),
}

/// A realized three-circle configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigurationLayout {
    pub curvatures: [f64; 3],
    pub circles: [DiskCircle; 3],
    /// `[t12, t23, t31]`: circle `i` passes through `tangency[i + 2]` and `tangency[i]`.
    pub tangency: [Point; 3],
    /// Arc of circle `i` from `tangency[i + 2]` to `tangency[i]`; together
    /// they bound the dual triangle counterclockwise.
    pub arcs: [Arc; 3],
    pub vertices: [Vertex; 3],
}

impl ConfigurationLayout {
    pub fn transformed(&self, m: &Mobius) -> ConfigurationLayout {
        let map_vertex = |v: &Vertex| match *v {
            Vertex::Point(p) => Vertex::Point(m.apply(p)),
            Vertex::Ideal(p) => Vertex::Ideal(m.apply(p)),
            Vertex::Segment(p, q) => Vertex::Segment(m.apply(p), m.apply(q)),
        };
        ConfigurationLayout {
            curvatures: self.curvatures,
            circles: self.circles.map(|c| c.pushed(m)),
            tangency: self.tangency.map(|t| m.apply(t)),
            arcs: self.arcs.map(|a| a.transformed(m)),
            vertices: self.vertices.map(|v| map_vertex(&v)),
        }
    }
}

fn vertex_of(circle: &DiskCircle, p: Point, q: Point) -> Vertex {
    match circle.center() {
        Center::Point(c) => Vertex::Point(c),
        Center::Ideal(c) => Vertex::Ideal(c),
        Center::Axis(axis) => {
            if circle.kind() == Regime::Geodesic {
                Vertex::Segment(p, q)
            } else {
                Vertex::Segment(foot(&axis, p), foot(&axis, q))
            }
        }
    }
}

fn assemble(k: [f64; 3], circles: [DiskCircle; 3], tangency: [Point; 3], arcs: [Arc; 3]) -> ConfigurationLayout {
    let vertices = [0, 1, 2].map(|i| vertex_of(&circles[i], tangency[(i + 2) % 3], tangency[i]));
    ConfigurationLayout { curvatures: k, circles, tangency, arcs, vertices }
}

// at most one zero: every tangency point is finite
fn finite_layout(k: [f64; 3]) -> Result<ConfigurationLayout, LayoutError> {
    let gaps = hypgeom::triangle_chords(k)?;
    let [d1, d2, d3] = gaps;
    let cos = ((1.0 + d1) * (1.0 + d2) - (1.0 + d3)) / (d1 * (2.0 + d1) * d2 * (2.0 + d2)).sqrt();
    if cos.abs() > 1.0 + 1e-9 {
        return Err(LayoutError::Unrealizable { k: k[0], distance: hypgeom::gap_to_distance(d3) });
    }
    let alpha = cos.clamp(-1.0, 1.0).acos();
    let t12 = C64::new(0.0, 0.0);
    let t23 = C64::new((d2 / (2.0 + d2)).sqrt(), 0.0);
    let t31 = C64::from_polar((d1 / (2.0 + d1)).sqrt(), alpha);
    let tangency = [t12, t23, t31];
    let mut circles = [DiskCircle { a: 0.0, b: C64::new(1.0, 0.0), c: 0.0 }; 3];
    let mut arcs = [Arc { from: t12, mid: t12, to: t12 }; 3];
    for i in 0..3 {
        let (c, a) = arc_through(tangency[(i + 2) % 3], tangency[i], k[i], Side::Right)?;
        circles[i] = c;
        arcs[i] = a;
    }
    Ok(assemble(k, circles, tangency, arcs))
}

fn midway(base: Point, ideal: Point) -> Point {
    let t = Mobius::to_origin(base);
    t.inverse().apply(t.apply(ideal) * 0.5)
}

// k[0] = k[2] = 0 < k[1]: t31 is ideal
fn one_ideal_layout(k: [f64; 3]) -> Result<ConfigurationLayout, LayoutError> {
    let gap = 2.0 / (k[1] * k[1]);
    let t12 = C64::new(0.0, 0.0);
    let t23 = C64::new((gap / (2.0 + gap)).sqrt(), 0.0);
    let (c2, arc2) = arc_through(t12, t23, k[1], Side::Right)?;
    let c1 = tangent_geodesic(&c2, t12);
    let c3 = tangent_geodesic(&c2, t23);
    let (e1, e3) = match (c1.boundary_points(), c3.boundary_points()) {
        (Some(e1), Some(e3)) => (e1, e3),
        _ => return Err(LayoutError::Unrealizable { k: 0.0, distance: f64::INFINITY }),
    };
    let mut best = (f64::INFINITY, e1[0], e3[0]);
    for p in e1 {
        for q in e3 {
            if (p - q).norm() < best.0 {
                best = ((p - q).norm(), p, q);
            }
        }
    }
    if best.0 > 1e-6 {
        return Err(LayoutError::Unrealizable { k: 0.0, distance: f64::INFINITY });
    }
    let s = best.1 + best.2;
    let t31 = s / s.norm();
    let arcs = [
        Arc { from: t31, mid: midway(t12, t31), to: t12 },
        arc2,
        Arc { from: t23, mid: midway(t23, t31), to: t31 },
    ];
    Ok(assemble(k, [c1, c2, c3], [t12, t23, t31], arcs))
}

fn ideal_triangle() -> ConfigurationLayout {
    let tangency = [7.0, 11.0, 3.0].map(|s: f64| C64::from_polar(1.0, s * PI / 6.0));
    let mut circles = [DiskCircle { a: 0.0, b: C64::new(1.0, 0.0), c: 0.0 }; 3];
    let mut arcs = [Arc { from: tangency[0], mid: tangency[0], to: tangency[0] }; 3];
    for i in 0..3 {
        let (p, q) = (tangency[(i + 2) % 3], tangency[i]);
        let (u, v) = ([p.re, p.im, 1.0], [q.re, q.im, 1.0]);
        let cross = [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]];
        let mut g = DiskCircle::from_plane([cross[0], cross[1], -cross[2]], 0.0);
        if g.value(C64::new(0.0, 0.0)) < 0.0 {
            g = DiskCircle { a: -g.a, b: -g.b, c: -g.c };
        }
        // point nearest the origin
        let mid = g.b / g.b.norm() * (g.b.norm() - (g.b.norm_sqr() - g.a * g.a).sqrt()) / g.a;
        circles[i] = g;
        arcs[i] = Arc { from: p, mid, to: q };
    }
    assemble([0.0; 3], circles, tangency, arcs)
}

/// Realizes the configuration with curvatures `k`. With at most one zero,
/// `t12` sits at the origin and `t23` on the positive real axis. Two zeros
/// make their common tangency point ideal; the frame then puts the finite
/// pair in those positions. Three zeros give an ideal triangle with its
/// vertices at the cube roots of `i`.
pub fn realize_triangle(k: [f64; 3]) -> Result<ConfigurationLayout, LayoutError> {
    for &x in &k {
        if !(x >= 0.0) || !x.is_finite() {
            return Err(LayoutError::BadCurvature(x));
        }
    }
    let zeros = k.iter().filter(|&&x| x == 0.0).count();
    match zeros {
        0 | 1 => finite_layout(k),
        2 => {
            let m = (0..3).find(|&i| k[i] != 0.0).expect("one nonzero");
            // rotated labels: original index o sits at (o - m + 1) mod 3
            let rot = |o: usize| (o + 4 - m) % 3;
            let local = one_ideal_layout([0.0, k[m], 0.0])?;
            let circles = [0, 1, 2].map(|o| local.circles[rot(o)]);
            let arcs = [0, 1, 2].map(|o| local.arcs[rot(o)]);
            let tangency = [0, 1, 2].map(|o| local.tangency[rot(o)]);
            let vertices = [0, 1, 2].map(|o| local.vertices[rot(o)]);
            Ok(ConfigurationLayout { curvatures: k, circles, tangency, arcs, vertices })
        }
        _ => Ok(ideal_triangle()),
    }
}

// null vector of a 3x4 system by cofactors
fn null_vector(rows: [[f64; 4]; 3]) -> [f64; 4] {
    let det3 = |c: [usize; 3]| {
        let m = |r: usize, j: usize| rows[r][c[j]];
        m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) - m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0))
            + m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0))
    };
    [det3([1, 2, 3]), -det3([0, 2, 3]), det3([0, 1, 3]), -det3([0, 1, 2])]
}

/// The generalized circle through three points.
pub fn circle_through_three(p: [Point; 3]) -> DiskCircle {
    let rows = p.map(|z| [z.norm_sqr(), -2.0 * z.re, -2.0 * z.im, 1.0]);
    let v = null_vector(rows);
    let mut c = DiskCircle::normalized(v[0], C64::new(v[1], v[2]), v[3]);
    if c.a - c.c < 0.0 {
        c = DiskCircle { a: -c.a, b: -c.b, c: -c.c };
    }
    c
}

/// Curvature of the generalized circle through `points`, by the
/// hyperboloid/Klein formula: the center is fitted to the first three points
/// and the curvature evaluated at each of the rest.
pub fn measure_curvature(points: &[Point]) -> Vec<f64> {
    assert!(points.len() > 3, "need a fit triple and at least one probe");
    // homogeneous hyperboloid lift (2z, 1 + |z|^2) with weight 1 - |z|^2
    let lift = |z: Point| ([2.0 * z.re, 2.0 * z.im, 1.0 + z.norm_sqr()], 1.0 - z.norm_sqr());
    let rows = [0, 1, 2].map(|i| {
        let (x, w) = lift(points[i]);
        [x[0], x[1], -x[2], -w]
    });
    let v = null_vector(rows);
    let n = [v[0], v[1], v[2]];
    points[3..]
        .iter()
        .map(|&z| {
            let (x, _) = lift(z);
            let cz = lorentz(n, x);
            cz.abs() / (cz * cz - lorentz(n, n) * lorentz(x, x)).sqrt()
        })
        .collect()
}

/// Recenters at the center of the orthocircle, which lies inside the dual
/// triangle. `None` when the orthocircle is a horocycle (two or more zeros).
pub fn recentered(layout: &ConfigurationLayout) -> Option<(Mobius, ConfigurationLayout)> {
    if layout.tangency.iter().any(|&t| is_ideal(t)) {
        return None;
    }
    match circle_through_three(layout.tangency).center() {
        Center::Point(c) => {
            let m = Mobius::to_origin(c);
            Some((m, layout.transformed(&m)))
        }
        _ => None,
    }
}

/// Coefficients `lam[m][i]` with `t_ij = lam[m][i] x_i + lam[m][j] x_j` in
/// the Klein model, `m` the third index and `x_i` the projected centers,
/// after recentering. `lam[m][m]` is unused and zero.
pub fn ceva_coefficients(layout: &ConfigurationLayout) -> Option<[[f64; 3]; 3]> {
    let (_, l) = recentered(layout)?;
    let x = l.circles.map(|c| {
        let (n, _) = c.plane();
        C64::new(n[0] / n[2], n[1] / n[2])
    });
    let mut lam = [[0.0; 3]; 3];
    for i in 0..3 {
        let (j, m) = ((i + 1) % 3, (i + 2) % 3);
        let t = poincare_to_klein(l.tangency[i]);
        let e = x[i] - x[j];
        let li = ((t - x[j]).conj() * e).re / e.norm_sqr();
        lam[m][i] = li;
        lam[m][j] = 1.0 - li;
    }
    Some(lam)
}

/// `|lam_1^2 lam_2^3 lam_3^1 - lam_1^3 lam_3^2 lam_2^1|`.
pub fn ceva_defect(lam: &[[f64; 3]; 3]) -> f64 {
    (lam[0][1] * lam[1][2] * lam[2][0] - lam[0][2] * lam[2][1] * lam[1][0]).abs()
}

/// One face of a vertex fan, with `vertices[0]` the fan center.
#[derive(Debug, Clone, PartialEq)]
pub struct FanFace {
    pub face: usize,
    pub vertices: [usize; 3],
    pub layout: ConfigurationLayout,
}

/// The faces around `v`, counterclockwise, each glued to the previous one
/// along their shared tangency point on `C_v`. The first face keeps its
/// canonical placement. The fan is left open after the last face.
pub fn vertex_fan(k: &[f64], g: &Nerve, v: usize) -> Result<Vec<FanFace>, LayoutError> {
    if k.len() != g.num_vertices() {
        return Err(LayoutError::WrongLength { expected: g.num_vertices(), got: k.len() });
    }
    if v >= g.num_vertices() {
        return Err(LayoutError::BadVertex(v));
    }
    if k[v] == 0.0 {
        return Err(LayoutError::DegenerateCenter(v));
    }
    let mut out: Vec<FanFace> = Vec::new();
    for &f in g.vertex_faces(v) {
        let face = g.faces()[f];
        let c = (0..3).find(|&i| face[i] == v).expect("v is in its faces");
        let vertices = [face[c], face[(c + 1) % 3], face[(c + 2) % 3]];
        let mut layout = realize_triangle(vertices.map(|u| k[u]))?;
        if let Some(prev) = out.last() {
            let p0 = prev.layout.tangency[2];
            let g0 = prev.layout.circles[0].gradient(p0);
            let p1 = layout.tangency[0];
            let g1 = layout.circles[0].gradient(p1);
            let m = Mobius::to_origin(p1)
                .then(&Mobius::rotation(g0.arg() - g1.arg()))
                .then(&Mobius::to_origin(p0).inverse());
            layout = layout.transformed(&m);
        }
        out.push(FanFace { face: f, vertices, layout });
    }
    Ok(out)
}

/// Total geodesic curvature of the center circle measured from the fan:
/// curvature fitted to each `C_v` arc times its quadrature length.
pub fn fan_total_curvature(fan: &[FanFace]) -> f64 {
    fan.iter()
        .map(|f| {
            // fit near the origin, where the lift is well conditioned
            let arc = f.layout.arcs[0].transformed(&Mobius::to_origin(f.layout.arcs[0].mid));
            let mut pts = arc.samples(5);
            pts.insert(0, arc.from);
            pts.insert(1, arc.mid);
            let ks = measure_curvature(&pts);
            let k = ks.iter().sum::<f64>() / ks.len() as f64;
            k * arc.hyperbolic_length()
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvgOptions {
    /// Width and height in pixels.
    pub size: u32,
    pub stroke_width: f64,
    pub shade_dual: bool,
    pub draw_centers: bool,
    pub draw_tangency: bool,
}

impl Default for SvgOptions {
    fn default() -> Self {
        SvgOptions { size: 600, stroke_width: 0.004, shade_dual: true, draw_centers: false, draw_tangency: true }
    }
}

fn f6(x: f64) -> String {
    let s = format!("{:.6}", x);
    if s == "-0.000000" {
        "0.000000".to_string()
    } else {
        s
    }
}

// svg coordinates flip y
fn xy(z: Point) -> String {
    format!("{} {}", f6(z.re), f6(-z.im))
}

fn circumcircle(p: Point, q: Point, r: Point) -> Option<(Point, f64)> {
    let (b, c) = (q - p, r - p);
    let d = 2.0 * (b.re * c.im - b.im * c.re);
    if d.abs() < 1e-300 {
        return None;
    }
    let u = C64::new(
        c.im * b.norm_sqr() - b.im * c.norm_sqr(),
        b.re * c.norm_sqr() - c.re * b.norm_sqr(),
    ) / d;
    let rad = u.norm();
    if rad > 1e4 {
        None
    } else {
        Some((p + u, rad))
    }
}

fn arc_command(arc: &Arc) -> String {
    match circumcircle(arc.from, arc.mid, arc.to) {
        None => format!("L {} ", xy(arc.to)),
        Some((center, rad)) => {
            let flip = |z: Point| C64::new(z.re, -z.im);
            let (p, m, q, c) = (flip(arc.from), flip(arc.mid), flip(arc.to), flip(center));
            let cross = |u: C64, v: C64| u.re * v.im - u.im * v.re;
            let sweep = (cross(m - p, q - m) > 0.0) as u8;
            // major arc iff the center is on the same side of the chord as mid
            let large = (cross(q - p, m - p) * cross(q - p, c - p) > 0.0) as u8;
            format!("A {} {} 0 {} {} {} ", f6(rad), f6(rad), large, sweep, xy(arc.to))
        }
    }
}

fn draw_circle(out: &mut String, c: &DiskCircle, stroke: &str, width: f64) {
    match c.euclidean() {
        Euclidean::Circle { center, radius } if radius < 1e3 => {
            let _ = writeln!(
                out,
                "<circle cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"{}\"/>",
                f6(center.re),
                f6(-center.im),
                f6(radius),
                stroke,
                f6(width)
            );
        }
        _ => {
            if let Some([p, q]) = c.boundary_points() {
                let _ = writeln!(
                    out,
                    "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{}\" stroke-width=\"{}\"/>",
                    f6(p.re),
                    f6(-p.im),
                    f6(q.re),
                    f6(-q.im),
                    stroke,
                    f6(width)
                );
            }
        }
    }
}

fn dot(out: &mut String, z: Point, r: f64, fill: &str) {
    let _ = writeln!(out, "<circle cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"{}\"/>", f6(z.re), f6(-z.im), f6(r), fill);
}

/// Deterministic SVG of the unit disk with the given configurations.
pub fn render_svg(layouts: &[ConfigurationLayout], opts: &SvgOptions) -> String {
    let w = opts.stroke_width;
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{0}\" height=\"{0}\" viewBox=\"-1.050000 -1.050000 2.100000 2.100000\">",
        opts.size
    );
    out.push_str("<defs><clipPath id=\"disk\"><circle cx=\"0\" cy=\"0\" r=\"1\"/></clipPath></defs>\n");
    out.push_str("<g clip-path=\"url(#disk)\">\n");
    for l in layouts {
        if opts.shade_dual {
            let mut d = format!("M {} ", xy(l.tangency[0]));
            for i in [1, 2, 0] {
                d.push_str(&arc_command(&l.arcs[i]));
            }
            let _ = writeln!(out, "<path d=\"{}Z\" fill=\"#d9d9d9\" stroke=\"none\"/>", d);
        }
        for c in &l.circles {
            draw_circle(&mut out, c, "#1f4e79", w);
        }
        if opts.draw_centers {
            for (c, v) in l.circles.iter().zip(&l.vertices) {
                match *v {
                    Vertex::Point(p) => dot(&mut out, p, 2.0 * w, "#a0301e"),
                    Vertex::Ideal(p) => dot(&mut out, p, 3.0 * w, "#a0301e"),
                    Vertex::Segment(p, q) => {
                        if let Center::Axis(axis) = c.center() {
                            if c.kind() != Regime::Geodesic {
                                draw_circle(&mut out, &axis, "#a0301e", 0.5 * w);
                            }
                        }
                        if !is_ideal(p) && !is_ideal(q) && distance(p, q) > 0.0 {
                            if let Ok((_, arc)) = arc_through(p, q, 0.0, Side::Left) {
                                let _ = writeln!(
                                    out,
                                    "<path d=\"M {} {}\" fill=\"none\" stroke=\"#a0301e\" stroke-width=\"{}\"/>",
                                    xy(p),
                                    arc_command(&arc).trim_end(),
                                    f6(2.0 * w)
                                );
                            }
                        }
                    }
                }
            }
        }
    }
    out.push_str("</g>\n");
    let _ = writeln!(
        out,
        "<circle cx=\"0.000000\" cy=\"0.000000\" r=\"1.000000\" fill=\"none\" stroke=\"black\" stroke-width=\"{}\"/>",
        f6(w)
    );
    if opts.draw_tangency {
        for l in layouts {
            for &t in &l.tangency {
                dot(&mut out, t, 2.5 * w, "black");
            }
        }
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nerve::{octahedron, tetrahedron};

    fn close(a: Point, b: Point, tol: f64) -> bool {
        (a - b).norm() < tol
    }

    #[test]
    fn mobius_inverse_and_distance() {
        let m = Mobius::to_origin(C64::new(0.3, -0.4)).then(&Mobius::rotation(1.1));
        let z = C64::new(-0.2, 0.5);
        assert!(close(m.inverse().apply(m.apply(z)), z, 1e-15));
        let w = C64::new(0.6, 0.1);
        assert!((distance(m.apply(z), m.apply(w)) - distance(z, w)).abs() < 1e-13);
        assert!((distance(C64::new(0.0, 0.0), C64::new(0.5, 0.0)) - 2.0 * 0.5f64.atanh()).abs() < 1e-15);
    }

    #[test]
    fn circle_at_origin() {
        // Euclidean radius tanh(r/2) about 0 has curvature coth r
        let rho: f64 = 0.4;
        let c = DiskCircle::normalized(1.0, C64::new(0.0, 0.0), -rho * rho);
        let r = 2.0 * rho.atanh();
        assert!((c.curvature() - 1.0 / r.tanh()).abs() < 1e-14);
        assert_eq!(c.kind(), Regime::Circle);
        assert!(c.value(C64::new(0.0, 0.0)) < 0.0);
        match c.center() {
            Center::Point(p) => assert!(p.norm() < 1e-15),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn two_point_circle() {
        let (p, q) = (C64::new(-0.1, 0.2), C64::new(0.3, 0.25));
        for &k in &[0.0, 0.3, 1.0, 1.7] {
            let (l, arc_l) = arc_through(p, q, k, Side::Left).unwrap();
            let (r, _) = arc_through(p, q, k, Side::Right).unwrap();
            for c in [&l, &r] {
                assert!(c.value(p).abs() < 1e-13 && c.value(q).abs() < 1e-13);
                assert!((c.curvature() - k).abs() < 1e-12);
            }
            assert!(l.value(arc_l.mid).abs() < 1e-13);
            let mut pts = vec![p, arc_l.mid, q];
            pts.extend(arc_l.samples(5));
            for m in measure_curvature(&pts) {
                assert!((m - k).abs() < 1e-9, "{m} vs {k}");
            }
            // mirror images across the geodesic through p and q
            let f = Mobius::to_origin(p);
            let (lf, rf) = (l.pushed(&f), r.pushed(&f));
            let phi = f.apply(q).arg();
            let (lr, rr) = (lf.pushed(&Mobius::rotation(-phi)), rf.pushed(&Mobius::rotation(-phi)));
            let mirrored = DiskCircle { a: rr.a, b: rr.b.conj(), c: rr.c };
            assert!(lr.distance_to(&mirrored) < 1e-12);
        }
        let (g1, _) = arc_through(p, q, 0.0, Side::Left).unwrap();
        let (g2, _) = arc_through(p, q, 0.0, Side::Right).unwrap();
        assert!(g1.distance_to(&DiskCircle { a: -g2.a, b: -g2.b, c: -g2.c }) < 1e-12);
    }

    #[test]
    fn center_lies_on_requested_side() {
        let (p, q) = (C64::new(0.0, 0.0), C64::new(0.2, 0.0));
        let (c, _) = arc_through(p, q, 3.0, Side::Left).unwrap();
        match c.center() {
            Center::Point(z) => assert!(z.im > 0.0),
            other => panic!("{other:?}"),
        }
        let too_far = arc_through(p, C64::new(0.5, 0.0), 3.0, Side::Left);
        assert!(matches!(too_far, Err(LayoutError::Unrealizable { .. })));
        assert!(matches!(arc_through(p, p, 1.0, Side::Left), Err(LayoutError::CoincidentPoints)));
    }

    fn check_layout(l: &ConfigurationLayout) {
        let k = l.curvatures;
        let gaps = hypgeom::triangle_chords(k).ok();
        for i in 0..3 {
            let (p, q) = (l.tangency[(i + 2) % 3], l.tangency[i]);
            let c = &l.circles[i];
            assert!(c.value(p).abs() < 1e-10 && c.value(q).abs() < 1e-10, "circle {i} misses its points");
            assert!((c.curvature() - k[i]).abs() < 1e-10);
            if let Some(gaps) = gaps {
                let want = hypgeom::gap_to_distance(gaps[i]);
                assert!((distance(p, q) - want).abs() < 1e-9);
            }
            // external tangency at finite points
            let t = l.tangency[i];
            if !is_ideal(t) {
                let (gi, gj) = (l.circles[i].gradient(t), l.circles[(i + 1) % 3].gradient(t));
                assert!((gi / gj).arg().abs() > PI - 1e-9, "circles {i} and {} not externally tangent", (i + 1) % 3);
            }
        }
    }

    #[test]
    fn horocycle_triple() {
        let l = realize_triangle([1.0; 3]).unwrap();
        check_layout(&l);
        for c in &l.circles {
            assert_eq!(c.kind(), Regime::Horocycle);
            // internally tangent to the unit circle
            match c.euclidean() {
                Euclidean::Circle { center, radius } => assert!((center.norm() + radius - 1.0).abs() < 1e-12),
                other => panic!("{other:?}"),
            }
        }
        for i in 0..3 {
            let d = distance(l.tangency[i], l.tangency[(i + 1) % 3]);
            assert!((d - 1.5f64.acosh()).abs() < 1e-12);
        }
        assert!(matches!(l.vertices[0], Vertex::Ideal(_)));
    }

    #[test]
    fn proper_circles_and_mixed() {
        for k in [[2.0, 2.0, 2.0], [0.3, 1.0, 4.0], [0.0, 0.5, 2.0], [5.0, 0.0, 0.01]] {
            let l = realize_triangle(k).unwrap();
            check_layout(&l);
            let lam = ceva_coefficients(&l).unwrap();
            assert!(ceva_defect(&lam) < 1e-12);
            for m in 0..3 {
                for i in 0..3 {
                    if i != m && k.iter().all(|&x| x > 0.0) {
                        assert!(lam[m][i] > 0.0 && lam[m][i] < 1.0, "{k:?} {lam:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn ideal_points() {
        let l = realize_triangle([0.0, 0.0, 0.0]).unwrap();
        for t in l.tangency {
            assert!(is_ideal(t));
        }
        for (i, c) in l.circles.iter().enumerate() {
            assert_eq!(c.kind(), Regime::Geodesic);
            assert!(c.value(l.tangency[i]).abs() < 1e-12);
            assert!(c.value(l.tangency[(i + 2) % 3]).abs() < 1e-12);
        }
        for k in [[0.0, 0.0, 1.5], [0.0, 0.7, 0.0], [2.0, 0.0, 0.0]] {
            let l = realize_triangle(k).unwrap();
            check_layout(&l);
            assert_eq!(l.tangency.iter().filter(|t| is_ideal(**t)).count(), 1);
        }
    }

    #[test]
    fn orthocircle_matches_closed_form() {
        for k in [[1.0, 1.0, 1.0], [0.3, 2.0, 0.7], [0.0, 1.0, 3.0]] {
            let l = realize_triangle(k).unwrap();
            let c = circle_through_three(l.tangency);
            assert!((c.curvature() - hypgeom::orthocircle_curvature(k).unwrap()).abs() < 1e-10);
        }
    }

    #[test]
    fn fans_glue() {
        let g = tetrahedron();
        let fan = vertex_fan(&[1.0; 4], &g, 0).unwrap();
        assert_eq!(fan.len(), 3);
        assert_eq!(fan[0].layout, realize_triangle([1.0; 3]).unwrap());
        for w in fan.windows(2) {
            assert!(close(w[0].layout.tangency[2], w[1].layout.tangency[0], 1e-9));
            assert!(w[0].layout.circles[0].distance_to(&w[1].layout.circles[0]) < 1e-9);
            assert!(w[0].layout.circles[2].distance_to(&w[1].layout.circles[1]) < 1e-9);
            assert!(close(w[0].layout.arcs[0].from, w[1].layout.arcs[0].to, 1e-9));
        }
        let t = crate::solver::total_curvature_map(&[1.0; 4], &g).unwrap();
        assert!((fan_total_curvature(&fan) - t[0]).abs() < 1e-8);

        let g = octahedron();
        let k = [0.4, 2.0, 0.0, 1.3, 0.7, 3.0];
        let t = crate::solver::total_curvature_map(&k, &g).unwrap();
        for v in [0, 1, 3, 5] {
            let fan = vertex_fan(&k, &g, v).unwrap();
            assert!((fan_total_curvature(&fan) - t[v]).abs() < 1e-8, "vertex {v}");
        }
        assert_eq!(vertex_fan(&k, &g, 2), Err(LayoutError::DegenerateCenter(2)));
    }

    #[test]
    fn svg_is_deterministic() {
        let empty = render_svg(&[], &SvgOptions::default());
        assert!(empty.contains("r=\"1.000000\""));
        assert!(!empty.contains("<path"));
        let l = vec![realize_triangle([1.0, 0.5, 2.0]).unwrap(), realize_triangle([0.0; 3]).unwrap()];
        let opts = SvgOptions { draw_centers: true, ..SvgOptions::default() };
        let a = render_svg(&l, &opts);
        assert_eq!(a, render_svg(&l, &opts));
        assert!(a.starts_with("<?xml") && a.ends_with("</svg>\n"));
    }
}
