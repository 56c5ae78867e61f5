//! The space of admissible targets: the functions `eta^I`, membership, and
//! feasible-flow certificates (coherent systems of corner values).

use std::f64::consts::PI;

use thiserror::Error;

use crate::flow::{self, BoundedArc};
use crate::nerve::Nerve;

/// Largest vertex count accepted by exhaustive subset enumeration.
pub const ENUMERATION_CAP: usize = 24;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolytopeError {
    #[error("empty vertex subset")]
    EmptySubset,
    #[error("{0} vertices exceed the enumeration cap of {ENUMERATION_CAP}")]
    TooManyVertices(usize),
    #[error("target has {got} entries, nerve has {expected} vertices")]
    WrongLength { expected: usize, got: usize },
    #[error("target entry {0} is not a finite number")]
    NonFinite(usize),
    #[error("vertex {0} out of range")]
    BadVertex(usize),
    #[error("zero pattern of the target does not match the stratum at vertex {0}")]
    BadStratum(usize),
    #[error("target is not in the closed polytope")]
    NotMember,
    #[error("flow solver found no feasible flow for a member target")]
    FlowFailed,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Witness {
    /// Nonempty subset with `eta^I <= 0`.
    Subset(Vec<usize>),
    NegativeEntry(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Interior,
    /// Zero set of the target; all `eta^I` positive.
    Boundary(Vec<usize>),
    Outside(Witness),
}

impl Verdict {
    pub fn is_member(&self) -> bool {
        !matches!(self, Verdict::Outside(_))
    }
}

fn check_target(t: &[f64], g: &Nerve) -> Result<(), PolytopeError> {
    if t.len() != g.num_vertices() {
        return Err(PolytopeError::WrongLength { expected: g.num_vertices(), got: t.len() });
    }
    if let Some(v) = t.iter().position(|x| !x.is_finite()) {
        return Err(PolytopeError::NonFinite(v));
    }
    Ok(())
}

/// `eta^I(T) = pi |F_I| - sum_{i in I} T_i`.
pub fn eta(subset: &[usize], t: &[f64], g: &Nerve) -> Result<f64, PolytopeError> {
    if subset.is_empty() {
        return Err(PolytopeError::EmptySubset);
    }
    if let Some(&v) = subset.iter().find(|&&v| v >= g.num_vertices() || v >= t.len()) {
        return Err(PolytopeError::BadVertex(v));
    }
    let mut sorted = subset.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let s: f64 = sorted.iter().map(|&v| t[v]).sum();
    Ok(PI * g.faces_incident(&sorted).len() as f64 - s)
}

// Visits every nonempty subset of `items` in Gray-code order with its face
// count |F_I| and value sum. Bit b of the mask stands for items[b].
fn for_each_subset(items: &[usize], values: &[f64], g: &Nerve, mut visit: impl FnMut(u32, usize, f64)) {
    let n = items.len();
    assert!(n <= ENUMERATION_CAP);
    let mut count = vec![0u32; g.num_faces()];
    let mut covered = 0usize;
    let mut sum = 0.0;
    let mut mask = 0u32;
    for i in 1u64..(1u64 << n) {
        let b = i.trailing_zeros() as usize;
        let v = items[b];
        let adding = mask & (1 << b) == 0;
        mask ^= 1 << b;
        for &f in g.vertex_faces(v) {
            if adding {
                count[f] += 1;
                if count[f] == 1 {
                    covered += 1;
                }
            } else {
                count[f] -= 1;
                if count[f] == 0 {
                    covered -= 1;
                }
            }
        }
        // recompute the sum from scratch now and then to stop drift
        if i % 4096 == 0 {
            sum = (0..n).filter(|&c| mask & (1 << c) != 0).map(|c| values[items[c]]).sum();
        } else if adding {
            sum += values[v];
        } else {
            sum -= values[v];
        }
        visit(mask, covered, sum);
    }
}

// Lexicographic order of subsets read as increasing vertex lists.
fn lex_less(a: u32, b: u32) -> bool {
    let diff = a ^ b;
    if diff == 0 {
        return false;
    }
    let d = diff.trailing_zeros();
    let above = |m: u32| d < 31 && (m >> (d + 1)) != 0;
    if a & (1 << d) != 0 {
        above(b)
    } else {
        !above(a)
    }
}

fn mask_to_vec(items: &[usize], mask: u32) -> Vec<usize> {
    (0..items.len()).filter(|&c| mask & (1 << c) != 0).map(|c| items[c]).collect()
}

/// Membership of `t` in the target polytope, its partial boundary, or neither.
pub fn classify(t: &[f64], g: &Nerve) -> Result<Verdict, PolytopeError> {
    check_target(t, g)?;
    if let Some(v) = t.iter().position(|&x| x < 0.0) {
        return Ok(Verdict::Outside(Witness::NegativeEntry(v)));
    }
    if g.num_vertices() > ENUMERATION_CAP {
        return Err(PolytopeError::TooManyVertices(g.num_vertices()));
    }
    let items: Vec<usize> = (0..g.num_vertices()).collect();
    let mut witness: Option<u32> = None;
    for_each_subset(&items, t, g, |mask, nf, sum| {
        if PI * nf as f64 - sum <= 0.0 && witness.is_none_or(|w| lex_less(mask, w)) {
            witness = Some(mask);
        }
    });
    if let Some(w) = witness {
        return Ok(Verdict::Outside(Witness::Subset(mask_to_vec(&items, w))));
    }
    let zeros: Vec<usize> = (0..t.len()).filter(|&v| t[v] == 0.0).collect();
    Ok(if zeros.is_empty() { Verdict::Interior } else { Verdict::Boundary(zeros) })
}

/// What an arc of the flow network stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArcKind {
    /// hub -> v
    Vertex(usize),
    /// v -> f
    Corner { vertex: usize, face: usize },
    /// f -> hub
    Face(usize),
}

#[derive(Debug, Clone)]
pub struct FlowNetwork {
    /// Vertices off the stratum, in node order.
    pub vertices: Vec<usize>,
    /// Faces with a vertex off the stratum, in node order after the vertices.
    pub faces: Vec<usize>,
    pub kinds: Vec<ArcKind>,
    pub arcs: Vec<BoundedArc>,
    pub delta: f64,
    pub epsilon: f64,
}

impl FlowNetwork {
    pub fn num_nodes(&self) -> usize {
        self.vertices.len() + self.faces.len() + 1
    }

    pub fn hub(&self) -> usize {
        self.num_nodes() - 1
    }
}

fn check_stratum(t: &[f64], stratum: &[usize], g: &Nerve) -> Result<Vec<bool>, PolytopeError> {
    check_target(t, g)?;
    let mut on = vec![false; g.num_vertices()];
    for &v in stratum {
        if v >= g.num_vertices() {
            return Err(PolytopeError::BadVertex(v));
        }
        on[v] = true;
    }
    for v in 0..g.num_vertices() {
        if (t[v] == 0.0) != on[v] {
            return Err(PolytopeError::BadStratum(v));
        }
    }
    Ok(on)
}

/// The flow network for target `t` on the stratum `stratum`.
///
/// Infinite bounds are made finite: corner arcs are capped at `pi |F|` and face
/// arcs get lower bound 0. Neither change excludes a feasible flow.
pub fn build_flow_network(
    t: &[f64],
    stratum: &[usize],
    g: &Nerve,
    delta: f64,
    epsilon: f64,
) -> Result<FlowNetwork, PolytopeError> {
    let on = check_stratum(t, stratum, g)?;
    let vertices: Vec<usize> = (0..g.num_vertices()).filter(|&v| !on[v]).collect();
    let faces = g.faces_incident(&vertices);
    let mut vnode = vec![usize::MAX; g.num_vertices()];
    for (i, &v) in vertices.iter().enumerate() {
        vnode[v] = i;
    }
    let mut fnode = vec![usize::MAX; g.num_faces()];
    for (i, &f) in faces.iter().enumerate() {
        fnode[f] = vertices.len() + i;
    }
    let hub = vertices.len() + faces.len();
    let cap = PI * g.num_faces() as f64;
    let mut kinds = Vec::new();
    let mut arcs = Vec::new();
    for &v in &vertices {
        kinds.push(ArcKind::Vertex(v));
        arcs.push(BoundedArc { from: hub, to: vnode[v], lower: t[v], upper: t[v] });
    }
    for &v in &vertices {
        for &f in g.vertex_faces(v) {
            kinds.push(ArcKind::Corner { vertex: v, face: f });
            arcs.push(BoundedArc { from: vnode[v], to: fnode[f], lower: delta, upper: cap });
        }
    }
    for &f in &faces {
        kinds.push(ArcKind::Face(f));
        arcs.push(BoundedArc { from: fnode[f], to: hub, lower: 0.0, upper: PI - epsilon });
    }
    Ok(FlowNetwork { vertices, faces, kinds, arcs, delta, epsilon })
}

/// A flow satisfying conservation and all arc bounds, if one exists.
pub fn feasible_flow(n: &FlowNetwork) -> Option<Vec<f64>> {
    flow::feasible_circulation(n.num_nodes(), &n.arcs)
}

/// `delta = epsilon`, half the tightest of the three admissibility bounds.
pub fn choose_parameters(t: &[f64], stratum: &[usize], g: &Nerve) -> Result<(f64, f64), PolytopeError> {
    let on = check_stratum(t, stratum, g)?;
    let vbar: Vec<usize> = (0..g.num_vertices()).filter(|&v| !on[v]).collect();
    if vbar.len() > ENUMERATION_CAP {
        return Err(PolytopeError::TooManyVertices(vbar.len()));
    }
    if vbar.iter().any(|&v| t[v] < 0.0) {
        return Err(PolytopeError::NotMember);
    }
    let mut bound = PI / 4.0;
    if !vbar.is_empty() {
        let min_m = vbar.iter().map(|&v| t[v]).fold(f64::INFINITY, f64::min);
        let max_deg = vbar.iter().map(|&v| g.vertex_faces(v).len()).max().unwrap_or(1);
        let mut m = f64::INFINITY;
        for_each_subset(&vbar, t, g, |_, nf, sum| {
            m = m.min((PI * nf as f64 - sum) / nf as f64);
        });
        if !(m > 0.0) {
            return Err(PolytopeError::NotMember);
        }
        bound = bound.min(min_m / max_deg as f64).min(m / 3.0);
    }
    let d = bound / 2.0;
    Ok((d, d))
}

/// Membership decided by the flow network alone. Members use
/// [`choose_parameters`]; when that fails, `delta = epsilon` come from the
/// degree and `pi / 4` bounds only. A feasible flow for any positive
/// parameters implies membership, and shrinking them only relaxes the
/// network, so infeasibility there rules out every admissible choice.
pub fn flow_membership(t: &[f64], g: &Nerve) -> Result<bool, PolytopeError> {
    check_target(t, g)?;
    if t.iter().any(|&x| x < 0.0) {
        return Ok(false);
    }
    let stratum: Vec<usize> = (0..t.len()).filter(|&v| t[v] == 0.0).collect();
    let (delta, epsilon) = match choose_parameters(t, &stratum, g) {
        Ok(p) => p,
        Err(PolytopeError::NotMember) => {
            let vbar: Vec<usize> = (0..t.len()).filter(|&v| t[v] > 0.0).collect();
            let min_m = vbar.iter().map(|&v| t[v]).fold(f64::INFINITY, f64::min);
            let max_deg = vbar.iter().map(|&v| g.vertex_faces(v).len()).max().unwrap_or(1);
            let d = (PI / 4.0).min(min_m / max_deg as f64) / 2.0;
            (d, d)
        }
        Err(e) => return Err(e),
    };
    let net = build_flow_network(t, &stratum, g, delta, epsilon)?;
    Ok(feasible_flow(&net).is_some())
}

/// Per-corner values `T_v^f`, one per incidence of a vertex and a face.
#[derive(Debug, Clone, PartialEq)]
pub struct CoherentSystem {
    /// `(face, vertex, value)` sorted by face then vertex.
    pub corners: Vec<(usize, usize, f64)>,
    pub stratum: Vec<usize>,
    pub delta: f64,
    pub epsilon: f64,
}

impl CoherentSystem {
    /// Sum of corner values at each vertex.
    pub fn vertex_sums(&self, num_vertices: usize) -> Vec<f64> {
        let mut out = vec![0.0; num_vertices];
        for &(_, v, x) in &self.corners {
            out[v] += x;
        }
        out
    }

    /// Sum of corner values in each face.
    pub fn face_sums(&self, num_faces: usize) -> Vec<f64> {
        let mut out = vec![0.0; num_faces];
        for &(f, _, x) in &self.corners {
            out[f] += x;
        }
        out
    }
}

/// A coherent system whose vertex sums reproduce `t`, from a feasible flow.
pub fn coherent_certificate(t: &[f64], g: &Nerve) -> Result<CoherentSystem, PolytopeError> {
    let stratum = match classify(t, g)? {
        Verdict::Interior => Vec::new(),
        Verdict::Boundary(i) => i,
        Verdict::Outside(_) => return Err(PolytopeError::NotMember),
    };
    let (delta, epsilon) = choose_parameters(t, &stratum, g)?;
    let net = build_flow_network(t, &stratum, g, delta, epsilon)?;
    let phi = feasible_flow(&net).ok_or(PolytopeError::FlowFailed)?;
    let mut corners = Vec::with_capacity(3 * g.num_faces());
    for (f, face) in g.faces().iter().enumerate() {
        let mut vs = *face;
        vs.sort_unstable();
        for v in vs {
            corners.push((f, v, 0.0));
        }
    }
    for (kind, x) in net.kinds.iter().zip(&phi) {
        if let ArcKind::Corner { vertex, face } = *kind {
            let slot = corners.iter_mut().find(|c| c.0 == face && c.1 == vertex).expect("corner exists");
            slot.2 = *x;
        }
    }
    Ok(CoherentSystem { corners, stratum, delta, epsilon })
}
