//! Combinatorics of a simple triangulation of a closed oriented surface.

use std::collections::{BTreeSet, HashMap};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NerveError {
    #[error("no faces given")]
    Empty,
    #[error("face {face} is invalid: {reason}")]
    BadFace { face: usize, reason: String },
    #[error("faces {0} and {1} have the same vertices")]
    DuplicateFace(usize, usize),
    #[error("edge ({0}, {1}) lies in {2} faces, expected 2")]
    NonManifoldEdge(usize, usize, usize),
    #[error("edge ({0}, {1}) is traversed twice in the same direction")]
    OrientationMismatch(usize, usize),
    #[error("vertex {0} lies in no face")]
    IsolatedVertex(usize),
    #[error("the faces around vertex {0} do not form a single disk")]
    NonManifoldVertex(usize),
    #[error("the surface is not connected")]
    Disconnected,
}

/// Ordered pair of consecutive vertices in a face: `face[corner] -> face[corner + 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HalfEdge {
    pub tail: usize,
    pub head: usize,
    pub face: usize,
}

#[derive(Debug, Clone)]
pub struct Nerve {
    num_vertices: usize,
    faces: Vec<[usize; 3]>,
    edges: Vec<(usize, usize)>,
    edge_index: HashMap<(usize, usize), usize>,
    // half-edge id is 3 * face + corner
    twin: Vec<usize>,
    half_edge_edge: Vec<usize>,
    vertex_faces: Vec<Vec<usize>>,
}

fn half_edge_id(face: usize, corner: usize) -> usize {
    3 * face + corner
}

impl Nerve {
    pub fn new(num_vertices: usize, faces: Vec<[usize; 3]>) -> Result<Nerve, NerveError> {
        if faces.is_empty() {
            return Err(NerveError::Empty);
        }
        let mut seen_triples: HashMap<[usize; 3], usize> = HashMap::new();
        for (fi, f) in faces.iter().enumerate() {
            for &v in f {
                if v >= num_vertices {
                    return Err(NerveError::BadFace { face: fi, reason: format!("vertex {v} out of range") });
                }
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(NerveError::BadFace { face: fi, reason: "repeated vertex".into() });
            }
            let mut key = *f;
            key.sort_unstable();
            if let Some(&prev) = seen_triples.get(&key) {
                return Err(NerveError::DuplicateFace(prev, fi));
            }
            seen_triples.insert(key, fi);
        }

        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edge_faces: HashMap<(usize, usize), usize> = HashMap::new();
        for (fi, f) in faces.iter().enumerate() {
            for c in 0..3 {
                let (a, b) = (f[c], f[(c + 1) % 3]);
                if directed.insert((a, b), half_edge_id(fi, c)).is_some() {
                    return Err(NerveError::OrientationMismatch(a.min(b), a.max(b)));
                }
                *edge_faces.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        let mut edges: Vec<(usize, usize)> = edge_faces.keys().copied().collect();
        edges.sort_unstable();
        for &(a, b) in &edges {
            let n = edge_faces[&(a, b)];
            if n != 2 {
                return Err(NerveError::NonManifoldEdge(a, b, n));
            }
        }
        let edge_index: HashMap<(usize, usize), usize> =
            edges.iter().enumerate().map(|(i, &e)| (e, i)).collect();

        let mut twin = vec![0; 3 * faces.len()];
        let mut half_edge_edge = vec![0; 3 * faces.len()];
        for (fi, f) in faces.iter().enumerate() {
            for c in 0..3 {
                let (a, b) = (f[c], f[(c + 1) % 3]);
                // edge count 2 with distinct directions guarantees the reverse exists
                twin[half_edge_id(fi, c)] = directed[&(b, a)];
                half_edge_edge[half_edge_id(fi, c)] = edge_index[&(a.min(b), a.max(b))];
            }
        }

        let mut vertex_faces = vec![Vec::new(); num_vertices];
        for (fi, f) in faces.iter().enumerate() {
            for &v in f {
                vertex_faces[v].push(fi);
            }
        }
        let mut nerve = Nerve { num_vertices, faces, edges, edge_index, twin, half_edge_edge, vertex_faces };
        for v in 0..num_vertices {
            if nerve.vertex_faces[v].is_empty() {
                return Err(NerveError::IsolatedVertex(v));
            }
            let ring = nerve.rotate_around(v);
            if ring.len() != nerve.vertex_faces[v].len() {
                return Err(NerveError::NonManifoldVertex(v));
            }
            nerve.vertex_faces[v] = ring;
        }
        if nerve.face_components(&BTreeSet::new()).len() != 1 {
            return Err(NerveError::Disconnected);
        }
        Ok(nerve)
    }

    // faces around v in counterclockwise order, starting from the lowest face id
    fn rotate_around(&self, v: usize) -> Vec<usize> {
        let start = self.vertex_faces[v][0];
        let mut out = vec![start];
        let mut f = start;
        loop {
            let c = self.corner_of(f, v);
            // half-edge entering v in f is (f[c-1] -> v); its twin leaves v in the next face
            let incoming = half_edge_id(f, (c + 2) % 3);
            f = self.twin[incoming] / 3;
            if f == start {
                break;
            }
            out.push(f);
            if out.len() > self.vertex_faces[v].len() {
                break;
            }
        }
        out
    }

    fn corner_of(&self, f: usize, v: usize) -> usize {
        self.faces[f].iter().position(|&x| x == v).expect("vertex in face")
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    /// Edges as `(u, v)` with `u < v`, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_id(&self, u: usize, v: usize) -> Option<usize> {
        self.edge_index.get(&(u.min(v), u.max(v))).copied()
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.num_vertices as i64 - self.edges.len() as i64 + self.faces.len() as i64
    }

    pub fn genus(&self) -> i64 {
        (2 - self.euler_characteristic()) / 2
    }

    /// Faces containing `v`, counterclockwise around it.
    pub fn vertex_faces(&self, v: usize) -> &[usize] {
        &self.vertex_faces[v]
    }

    pub fn half_edges(&self) -> Vec<HalfEdge> {
        (0..3 * self.faces.len()).map(|h| self.half_edge(h)).collect()
    }

    fn half_edge(&self, id: usize) -> HalfEdge {
        let (f, c) = (id / 3, id % 3);
        HalfEdge { tail: self.faces[f][c], head: self.faces[f][(c + 1) % 3], face: f }
    }

    fn half_edge_index(&self, h: &HalfEdge) -> Option<usize> {
        let f = self.faces.get(h.face)?;
        (0..3).find(|&c| f[c] == h.tail && f[(c + 1) % 3] == h.head).map(|c| half_edge_id(h.face, c))
    }

    /// The half-edge over the same edge with the opposite orientation.
    ///
    /// Panics if `h` is not a half-edge of this nerve.
    pub fn sigma(&self, h: &HalfEdge) -> HalfEdge {
        let id = self.half_edge_index(h).expect("half-edge belongs to the nerve");
        self.half_edge(self.twin[id])
    }

    /// `F_I`: faces with at least one vertex in `subset`, sorted.
    pub fn faces_incident(&self, subset: &[usize]) -> Vec<usize> {
        let mut mark = vec![false; self.faces.len()];
        for &v in subset {
            for &f in &self.vertex_faces[v] {
                mark[f] = true;
            }
        }
        (0..self.faces.len()).filter(|&f| mark[f]).collect()
    }

    /// `E^0(k)`: edges with both endpoint curvatures zero.
    pub fn degenerate_edges(&self, k: &[f64]) -> Vec<(usize, usize)> {
        self.edges.iter().copied().filter(|&(a, b)| k[a] == 0.0 && k[b] == 0.0).collect()
    }

    /// The two half-edges over each degenerate edge, in edge order.
    pub fn spike_pairing(&self, k: &[f64]) -> Vec<(HalfEdge, HalfEdge)> {
        self.degenerate_edges(k)
            .into_iter()
            .map(|(a, b)| {
                let h = (0..3 * self.faces.len())
                    .map(|id| self.half_edge(id))
                    .find(|h| h.tail == a && h.head == b)
                    .expect("edge has a half-edge in each direction");
                (h, self.sigma(&h))
            })
            .collect()
    }

    // faces grouped by connectivity across edges not in `cut`
    fn face_components(&self, cut: &BTreeSet<usize>) -> Vec<Vec<usize>> {
        let n = self.faces.len();
        let mut comp = vec![usize::MAX; n];
        let mut out = Vec::new();
        for s in 0..n {
            if comp[s] != usize::MAX {
                continue;
            }
            let id = out.len();
            let mut stack = vec![s];
            let mut members = Vec::new();
            comp[s] = id;
            while let Some(f) = stack.pop() {
                members.push(f);
                for c in 0..3 {
                    let h = half_edge_id(f, c);
                    if cut.contains(&self.half_edge_edge[h]) {
                        continue;
                    }
                    let g = self.twin[h] / 3;
                    if comp[g] == usize::MAX {
                        comp[g] = id;
                        stack.push(g);
                    }
                }
            }
            members.sort_unstable();
            out.push(members);
        }
        out
    }

    /// Boundary structure of the surface cut along `E^0(k)`.
    pub fn crowned_boundaries(&self, k: &[f64]) -> CutSurface {
        let cut: BTreeSet<usize> =
            self.degenerate_edges(k).iter().map(|&(a, b)| self.edge_index[&(a, b)]).collect();
        let components = self.face_components(&cut);
        let mut face_comp = vec![0; self.faces.len()];
        for (ci, c) in components.iter().enumerate() {
            for &f in c {
                face_comp[f] = ci;
            }
        }
        let mut used = vec![false; 3 * self.faces.len()];
        let mut crowns = Vec::new();
        for start in 0..3 * self.faces.len() {
            if used[start] || !cut.contains(&self.half_edge_edge[start]) {
                continue;
            }
            let mut cycle = Vec::new();
            let mut h = start;
            loop {
                used[h] = true;
                cycle.push(self.half_edge(h));
                // turn around the head, keeping the face on the left, until the next cut edge
                let mut n = half_edge_id(h / 3, (h % 3 + 1) % 3);
                while !cut.contains(&self.half_edge_edge[n]) {
                    let t = self.twin[n];
                    n = half_edge_id(t / 3, (t % 3 + 1) % 3);
                }
                h = n;
                if h == start {
                    break;
                }
            }
            crowns.push(CrownedBoundary::from_cycle(cycle, face_comp[start / 3]));
        }
        CutSurface { components, crowns }
    }

    /// Partition of the vertices by the type of their circle.
    pub fn classify_vertices(&self, k: &[f64]) -> VertexClasses {
        let mut c = VertexClasses::default();
        for (v, &kv) in k.iter().enumerate().take(self.num_vertices) {
            if kv == 0.0 {
                c.geodesic.push(v);
            } else if kv < 1.0 {
                c.hypercycle.push(v);
            } else if kv == 1.0 {
                c.cusp.push(v);
            } else {
                c.cone.push(v);
            }
        }
        c
    }
}

/// A cycle of complete geodesics, consecutive ones tangent at ideal points.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrownedBoundary {
    /// Vertices whose circles are the boundary geodesics, in boundary order.
    pub geodesics: Vec<usize>,
    /// Boundary half-edges; the cut surface lies on their left.
    pub half_edges: Vec<HalfEdge>,
    /// Index into [`CutSurface::components`].
    pub component: usize,
}

impl CrownedBoundary {
    fn from_cycle(mut cycle: Vec<HalfEdge>, component: usize) -> CrownedBoundary {
        let best = (0..cycle.len())
            .min_by_key(|&r| cycle[r..].iter().chain(&cycle[..r]).map(|h| h.tail).collect::<Vec<_>>())
            .unwrap_or(0);
        cycle.rotate_left(best);
        CrownedBoundary { geodesics: cycle.iter().map(|h| h.tail).collect(), half_edges: cycle, component }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CutSurface {
    /// Connected components of the cut surface as sorted face lists.
    pub components: Vec<Vec<usize>>,
    pub crowns: Vec<CrownedBoundary>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VertexClasses {
    /// `0 < k < 1`
    pub hypercycle: Vec<usize>,
    /// `k = 1`
    pub cusp: Vec<usize>,
    /// `k > 1`
    pub cone: Vec<usize>,
    /// `k = 0`
    pub geodesic: Vec<usize>,
}

/// Boundary of the tetrahedron.
pub fn tetrahedron() -> Nerve {
    Nerve::new(4, vec![[0, 1, 2], [0, 2, 3], [0, 3, 1], [1, 3, 2]]).expect("valid fixture")
}

/// Boundary of the octahedron: poles 0 and 5, equator 1..4.
pub fn octahedron() -> Nerve {
    Nerve::new(
        6,
        vec![[0, 1, 2], [0, 2, 3], [0, 3, 4], [0, 4, 1], [5, 2, 1], [5, 3, 2], [5, 4, 3], [5, 1, 4]],
    )
    .expect("valid fixture")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tetrahedron_counts() {
        let g = tetrahedron();
        assert_eq!((g.num_vertices(), g.num_edges(), g.num_faces()), (4, 6, 4));
        assert_eq!(g.euler_characteristic(), 2);
        assert_eq!(g.genus(), 0);
    }

    #[test]
    fn octahedron_counts() {
        let g = octahedron();
        assert_eq!((g.num_edges(), g.num_faces()), (12, 8));
        assert_eq!(g.euler_characteristic(), 2);
    }

    #[test]
    fn torus_is_accepted() {
        // 7-vertex triangulation of the torus
        let mut faces = Vec::new();
        for i in 0..7 {
            faces.push([i, (i + 1) % 7, (i + 3) % 7]);
            faces.push([i, (i + 3) % 7, (i + 2) % 7]);
        }
        let g = Nerve::new(7, faces).unwrap();
        assert_eq!(g.euler_characteristic(), 0);
        assert_eq!(g.genus(), 1);
    }

    #[test]
    fn rejections() {
        assert!(matches!(Nerve::new(3, vec![[0, 1, 2]]), Err(NerveError::NonManifoldEdge(..))));
        assert!(matches!(Nerve::new(3, vec![]), Err(NerveError::Empty)));
        assert!(matches!(Nerve::new(3, vec![[0, 1, 1]]), Err(NerveError::BadFace { .. })));
        assert!(matches!(Nerve::new(3, vec![[0, 1, 5]]), Err(NerveError::BadFace { .. })));
        assert!(matches!(
            Nerve::new(4, vec![[0, 1, 2], [0, 2, 1], [0, 1, 2], [1, 3, 2]]),
            Err(NerveError::OrientationMismatch(..)) | Err(NerveError::DuplicateFace(..))
        ));
        // flip one tetrahedron face
        assert!(matches!(
            Nerve::new(4, vec![[0, 2, 1], [0, 2, 3], [0, 3, 1], [1, 3, 2]]),
            Err(NerveError::OrientationMismatch(..))
        ));
        assert!(matches!(
            Nerve::new(5, vec![[0, 1, 2], [0, 2, 3], [0, 3, 1], [1, 3, 2]]),
            Err(NerveError::IsolatedVertex(4))
        ));
        // two tetrahedra sharing only vertex 0
        let mut faces = vec![[0, 1, 2], [0, 2, 3], [0, 3, 1], [1, 3, 2]];
        faces.extend([[0, 4, 5], [0, 5, 6], [0, 6, 4], [4, 6, 5]]);
        assert!(matches!(Nerve::new(7, faces), Err(NerveError::NonManifoldVertex(0))));
        // two disjoint tetrahedra
        let mut faces = vec![[0, 1, 2], [0, 2, 3], [0, 3, 1], [1, 3, 2]];
        faces.extend([[4, 5, 6], [4, 6, 7], [4, 7, 5], [5, 7, 6]]);
        assert!(matches!(Nerve::new(8, faces), Err(NerveError::Disconnected)));
    }

    #[test]
    fn sigma_example() {
        let g = tetrahedron();
        let s = g.sigma(&HalfEdge { tail: 0, head: 1, face: 0 });
        assert_eq!(s, HalfEdge { tail: 1, head: 0, face: 2 });
        for h in g.half_edges() {
            let s = g.sigma(&h);
            assert_eq!(g.sigma(&s), h);
            assert_ne!(s.face, h.face);
            assert_eq!((s.tail, s.head), (h.head, h.tail));
        }
        assert_eq!(g.half_edges().len(), 2 * g.num_edges());
    }

    #[test]
    fn incidence() {
        let g = tetrahedron();
        assert_eq!(g.faces_incident(&[0]), vec![0, 1, 2]);
        assert_eq!(g.faces_incident(&[1, 3]).len(), 4);
        assert!(g.faces_incident(&[]).is_empty());
    }

    #[test]
    fn vertex_rings_are_ccw() {
        let g = octahedron();
        for v in 0..6 {
            let ring = g.vertex_faces(v);
            assert_eq!(ring.len(), 4);
            for w in 0..ring.len() {
                let (f, n) = (g.faces()[ring[w]], g.faces()[ring[(w + 1) % ring.len()]]);
                let c = f.iter().position(|&x| x == v).unwrap();
                let cn = n.iter().position(|&x| x == v).unwrap();
                // the vertex after v in the next face is the vertex before v in this one
                assert_eq!(n[(cn + 1) % 3], f[(c + 2) % 3]);
            }
        }
    }

    #[test]
    fn degenerate_edges_examples() {
        let g = tetrahedron();
        assert_eq!(g.degenerate_edges(&[0.0, 0.0, 0.0, 1.0]), vec![(0, 1), (0, 2), (1, 2)]);
        assert!(g.degenerate_edges(&[1.0; 4]).is_empty());
        assert_eq!(g.degenerate_edges(&[0.0, 1.0, 0.0, 1.0]), vec![(0, 2)]);
    }

    #[test]
    fn spikes() {
        let g = tetrahedron();
        let p = g.spike_pairing(&[0.0, 0.0, 0.0, 1.0]);
        assert_eq!(p.len(), 3);
        let mut seen = BTreeSet::new();
        for (a, b) in &p {
            assert_eq!(g.sigma(a), *b);
            assert!(seen.insert(*a) && seen.insert(*b));
        }
        assert!(g.spike_pairing(&[1.0; 4]).is_empty());
    }

    #[test]
    fn tetrahedron_crowns() {
        let g = tetrahedron();
        let cs = g.crowned_boundaries(&[0.0, 0.0, 0.0, 0.5]);
        assert_eq!(cs.components, vec![vec![0], vec![1, 2, 3]]);
        assert_eq!(cs.crowns.len(), 2);
        assert_eq!(cs.crowns[0].geodesics, vec![0, 1, 2]);
        assert_eq!(cs.crowns[0].component, 0);
        assert_eq!(cs.crowns[1].geodesics, vec![0, 2, 1]);
        assert_eq!(cs.crowns[1].component, 1);
        let none = g.crowned_boundaries(&[1.0; 4]);
        assert_eq!(none.components.len(), 1);
        assert!(none.crowns.is_empty());
    }

    #[test]
    fn classes() {
        let g = tetrahedron();
        let c = g.classify_vertices(&[0.5, 1.0, 2.0, 3.0]);
        assert_eq!((c.hypercycle, c.cusp, c.cone, c.geodesic), (vec![0], vec![1], vec![2, 3], vec![]));
        assert_eq!(g.classify_vertices(&[0.0; 4]).geodesic, vec![0, 1, 2, 3]);
        assert_eq!(g.classify_vertices(&[1.0; 4]).cusp, vec![0, 1, 2, 3]);
    }
}
