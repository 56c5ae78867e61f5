//! Seeded invariant suites across all modules.
//!
//! Each check draws from its own generator seeded by the suite seed and the
//! check's position, so results do not depend on the thread count.

use std::f64::consts::PI;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::hypgeom::{self, GeomError};
use crate::layout::{self, Mobius, Point};
use crate::nerve::{self, Nerve};
use crate::polytope::{self, Verdict};
use crate::solver::{self, FlowOptions, LogCoordinates, NewtonOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Quick,
    Full,
}

impl Suite {
    fn scale(self) -> usize {
        match self {
            Suite::Quick => 1,
            Suite::Full => 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

type Outcome = Result<String, String>;
type Check = fn(&mut ChaCha8Rng, usize) -> Outcome;

/// The registered checks, in report order.
pub const CHECKS: &[(&str, Check)] = &[
    ("spot-values", spot_values),
    ("gauss-bonnet-bound", |rng, s| gauss_bonnet_bound(&hypgeom::triangle_total_curvatures, rng, s)),
    ("zero-section", zero_section),
    ("permutation-equivariance", permutation_equivariance),
    ("horocycle-seam", horocycle_seam),
    ("jacobian-symmetry", jacobian_symmetry),
    ("large-curvature-limits", large_curvature_limits),
    ("nerve-structure", nerve_structure),
    ("crowned-boundaries", crowned_boundaries),
    ("membership-oracle", membership_oracle),
    ("certificate-validity", certificate_validity),
    ("hessian-definite", hessian_definite),
    ("forward-inverse", forward_inverse),
    ("flow-newton-agreement", flow_newton_agreement),
    ("flow-lyapunov", flow_lyapunov),
    ("layout-fidelity", layout_fidelity),
    ("fan-consistency", fan_consistency),
    ("ceva-identity", ceva_identity),
    ("isometry-invariance", isometry_invariance),
];

fn check_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Runs one registered check by index.
pub fn run_check(index: usize, suite: Suite, seed: u64) -> CheckReport {
    let (name, f) = CHECKS[index];
    let mut rng = ChaCha8Rng::seed_from_u64(check_seed(seed, index));
    let start = Instant::now();
    let out = f(&mut rng, suite.scale());
    let seconds = start.elapsed().as_secs_f64();
    let (passed, detail) = match out {
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    CheckReport { name, passed, detail, seconds }
}

/// Runs every check on up to `threads` workers. Reports come back in
/// registration order.
pub fn run_suite(suite: Suite, seed: u64, threads: usize) -> Vec<CheckReport> {
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<CheckReport>>> = Mutex::new(vec![None; CHECKS.len()]);
    std::thread::scope(|scope| {
        for _ in 0..threads.clamp(1, CHECKS.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= CHECKS.len() {
                    break;
                }
                let r = run_check(i, suite, seed);
                slots.lock().expect("no worker panicked")[i] = Some(r);
            });
        }
    });
    slots.into_inner().expect("no worker panicked").into_iter().map(|r| r.expect("every check ran")).collect()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn geom<T>(r: Result<T, GeomError>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

/// Random curvature triple: log-uniform in `[1e-6, 1e2]`, each entry zero with probability `p_zero`.
fn random_triple(rng: &mut ChaCha8Rng, p_zero: f64) -> [f64; 3] {
    [0; 3].map(|_| if rng.gen_bool(p_zero) { 0.0 } else { log_uniform(rng, 1e-6, 1e2) })
}

fn fixtures() -> Vec<(&'static str, Nerve)> {
    vec![("tetrahedron", nerve::tetrahedron()), ("octahedron", nerve::octahedron()), ("torus7", torus7())]
}

/// Seven-vertex triangulation of the torus.
fn torus7() -> Nerve {
    let faces = (0..7).flat_map(|i| [[i, (i + 1) % 7, (i + 3) % 7], [i, (i + 3) % 7, (i + 2) % 7]]).collect();
    Nerve::new(7, faces).expect("valid fixture")
}

fn random_k(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

fn spot_values(_: &mut ChaCha8Rng, _: usize) -> Outcome {
    let t = geom(hypgeom::triangle_total_curvatures([1.0; 3]))?;
    ensure(t.iter().all(|x| (x - 1.0).abs() < 1e-12), || format!("T(1,1,1) = {t:?}"))?;
    let kp = geom(hypgeom::orthocircle_curvature([1.0; 3]))?;
    ensure((kp - 2.0).abs() < 1e-12, || format!("k_P(1,1,1) = {kp}"))?;
    let kp0 = geom(hypgeom::orthocircle_curvature([0.0; 3]))?;
    ensure((kp0 - 1.0).abs() < 1e-12, || format!("k_P(0,0,0) = {kp0}"))?;
    let s3 = 3f64.sqrt();
    let t = geom(hypgeom::triangle_total_curvatures([s3; 3]))?;
    let exact = 1.5f64.sqrt() * (2.0f64 / 3.0).acos();
    ensure((t[0] - exact).abs() < 1e-12, || format!("T(sqrt3) = {} vs {exact}", t[0]))?;
    // horocycle arc between points at distance d has length 2 sinh(d/2)
    let a = geom(hypgeom::arc_length(1.0, 2f64.acosh()))?;
    ensure((a.length - 2f64.sqrt()).abs() < 1e-12, || format!("horocycle length {}", a.length))?;
    // geodesic sides of the all-zero triangle are infinite, totals vanish
    let z = geom(hypgeom::triangle_total_curvatures([0.0; 3]))?;
    ensure(z == [0.0; 3], || format!("T(0,0,0) = {z:?}"))?;
    Ok("6 closed forms".into())
}

/// Gauss-Bonnet: `0 <= T_1 + T_2 + T_3 < pi`, with equality to zero only at
/// the origin. Takes the triangle map so a broken map can be checked to fail.
pub fn gauss_bonnet_bound(
    map: &dyn Fn([f64; 3]) -> Result<[f64; 3], GeomError>,
    rng: &mut ChaCha8Rng,
    scale: usize,
) -> Outcome {
    let n = 20_000 * scale;
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let k = if i == 0 { [0.0; 3] } else { random_triple(rng, 0.05) };
        let t = geom(map(k))?;
        let s: f64 = t.iter().sum();
        ensure((0.0..PI).contains(&s), || format!("k = {k:?}: sum {s}"))?;
        ensure((s == 0.0) == (k == [0.0; 3]), || format!("k = {k:?}: sum {s}"))?;
        worst = worst.max(s);
    }
    Ok(format!("{n} triples, max sum {worst:.15}"))
}

fn zero_section(rng: &mut ChaCha8Rng, scale: usize) -> Outcome {
    let n = 5000 * scale;
    for _ in 0..n {
        let k = random_triple(rng, 0.3);
        let t = geom(hypgeom::triangle_total_curvatures(k))?;
        for i in 0..3 {
            ensure((t[i] == 0.0) == (k[i] == 0.0) && t[i] >= 0.0, || format!("k = {k:?}, T = {t:?}"))?;
        }
    }
    Ok(format!("{n} triples"))
}

fn permutation_equivariance(rng: &mut ChaCha8Rng, scale: usize) -> Outcome {
    const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let n = 2000 * scale;
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let k = random_triple(rng, 0.1);
        let t = geom(hypgeom::triangle_total_curvatures(k))?;
        for p in PERMS {
            let tp = geom(hypgeom::triangle_total_curvatures(p.map(|i| k[i])))?;
            for j in 0..3 {
                worst = worst.max((tp[j] - t[p[j]]).abs());
            }
        }
    }
    ensure(worst <= 1e-12, || format!("max deviation {worst:e}"))?;
    Ok(format!("{n} triples, max deviation {worst:e}"))
}

fn horocycle_seam(rng: &mut ChaCha8Rng, scale: usize) -> Outcome {
    let n = 50 * scale;
    let h = 1e-4;
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let (k2, k3) = if i == 0 { (1.0, 1.0) } else { (rng.gen_range(0.1..5.0), rng.gen_range(0.1..5.0)) };
        let f = |x: f64| geom(hypgeom::triangle_total_curvatures([x, k2, k3])).map(|t| t[0]);
        let right = (-3.0 * f(1.0)? + 4.0 * f(1.0 + h)? - f(1.0 + 2.0 * h)?) / (2.0 * h);
        let left = (3.0 * f(1.0)? - 4.0 * f(1.0 - h)? + f(1.0 - 2.0 * h)?) / (2.0 * h);
        worst = worst.max((right - left).abs());
        for j in -20..=20 {
            let x = 1.0 + j as f64 * 5e-11;
            ensure(f(x)?.is_finite(), || format!("T_1({x}, {k2}, {k3}) not finite"))?;
        }
    }
    ensure(worst < 1e-5, || format!("one-sided quotients differ by {worst:e}"))?;
    Ok(format!("{n} seams, max quotient gap {worst:e}"))
}

fn fd_log_jacobian(k: [f64; 3], h: f64) -> Result<[[f64; 3]; 3], String> {
    let mut out = [[0.0; 3]; 3];
    for j in 0..3 {
        if k[j] == 0.0 {
            continue;
        }
        let (mut kp, mut km) = (k, k);
        kp[j] *= h.exp();
        km[j] *= (-h).exp();
        let (tp, tm) = (geom(hypgeom::triangle_total_curvatures(kp))?, geom(hypgeom::triangle_total_curvatures(km))?);
        for i in 0..3 {
            out[i][j] = (tp[i] - tm[i]) / (2.0 * h);
        }
    }
    Ok(out)
}

fn jacobian_symmetry(rng: &mut ChaCha8Rng, scale: usize) -> Outcome {
    let n = 100 * scale;
    let (mut asym, mut vs_fd, mut closed): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let mut k = [0; 3].map(|_| log_uniform(rng, 0.1, 10.0));
        if i % 4 == 0 {
            k[2] = 0.0;
        }
        let fd = fd_log_jacobian(k, 1e-5)?;
        let j = geom(hypgeom::log_jacobian(k))?;
        for a in 0..3 {
            for b in 0..3 {
                if a != b {
                    asym = asym.max((fd[a][b] - fd[b][a]).abs());
                }
                if k[a] > 0.0 && k[b] > 0.0 {
                    vs_fd = vs_fd.max((fd[a][b] - j[a][b]).abs() / (1.0 + j[a][b].abs()));
                }
            }
        }
        if k[2] == 0.0 {
            // side arc of circle 1 between circle 2 and the geodesic
            let l1 = |x: f64| geom(hypgeom::triangle_arcs([k[0], x, 0.0])).map(|a| a.arcs[0].length);
            let hk = 1e-6 * k[1];
            let fd_l = (l1(k[1] + hk)? - l1(k[1] - hk)?) / (2.0 * hk);
            let exact = -1.0 / ((k[0] + k[1]) * (1.0 + k[0] * k[1]).sqrt());
            closed = closed.max((fd_l - exact).abs());
        }
    }
    ensure(asym < 1e-7, || format!("asymmetry {asym:e}"))?;
    ensure(vs_fd < 1e-6, || format!("analytic vs difference {vs_fd:e}"))?;
    ensure(closed < 1e-7, || format!("one-zero closed form {closed:e}"))?;
    Ok(format!("{n} triples, asymmetry {asym:e}, analytic {vs_fd:e}, closed form {closed:e}"))
}

fn large_curvature_limits(rng: &mut ChaCha8Rng, scale: usize) -> Outcome {
    let n = 5 * scale;
    for _ in 0..n {
        let (a, b) = (rng.gen_range(0.5..2.0), rng.gen_range(0.5..2.0));
        let mut prev = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
        for e in 2..=8 {
            let big = 10f64.powi(e);
            let one = geom(hypgeom::triangle_total_curvatures([big, a, b]))?;
            let two = geom(hypgeom::triangle_total_curvatures([big, big, a]))?;
            let gaps = ((PI - one[0]).abs(), (PI - two[0] - two[1]).abs(), two[2]);
            ensure(gaps.0 < prev.0 && gaps.1 < prev.1 && gaps.2 < prev.2, || {
                format!("not approaching the limit at k = 1e{e} ({a}, {b}): {gaps:?}")
            })?;
            prev = gaps;
        }
        ensure(prev.0 < 1e-3 && prev.1 < 1e-6 && prev.2 < 1e-6, || format!("limits at 1e8: {prev:?}"))?;
    }
    Ok(format!("{n} pairs, k up to 1e8"))
}

fn nerve_structure(rng: &mut ChaCha8Rng, scale: usize) -> Outcome {
    for (name, g) in fixtures() {
        let hs = g.half_edges();
        ensure(hs.len() == 2 * g.num_edges() && hs.len() == 3 * g.num_faces(), || format!("{name}: counts"))?;
        for h in &hs {
            let s = g.sigma(h);
            ensure(g.sigma(&s) == *h && s.face != h.face, || format!("{name}: sigma at {h:?}"))?;
            ensure(s.tail == h.head && s.head == h.tail, || format!("{name}: sigma endpoints at {h:?}"))?;
        }
        ensure(g.euler_characteristic() == 2 - 2 * g.genus(), || format!("{name}: Euler"))?;
        let all: Vec<usize> = (0..g.num_vertices()).collect();
        ensure(g.faces_incident(&all).len() == g.num_faces(), || format!("{name}: F_V"))?;
        for _ in 0..20 * scale {
            let a: Vec<usize> = all.iter().copied().filter(|_| rng.gen_bool(0.4)).collect();
            let mut b = a.clone();
            b.extend(all.iter().copied().filter(|v| !a.contains(v) && rng.gen_bool(0.5)));
            ensure(g.faces_incident(&a).len() <= g.faces_incident(&b).len(), || format!("{name}: F_I not monotone"))?;
        }
        for v in 0..g.num_vertices() {
            let ring = g.vertex_faces(v);
            for (i, &f) in ring.iter().enumerate() {
                let next = g.faces()[ring[(i + 1) % ring.len()]];
                let shared = g.faces()[f].iter().filter(|u| **u != v && next.contains(u)).count();
                ensure(shared == 1, || format!("{name}: ring of {v} breaks after face {f}"))?;
            }
        }
    }
    ensure(torus7().genus() == 1, || "torus genus".into())?;
    Ok("tetrahedron, octahedron, 7-vertex torus".into())
}

fn crowned_boundaries(rng: &mut ChaCha8Rng, scale: usize) -> Outcome {
    let g = nerve::tetrahedron();
    let cut = g.crowned_boundaries(&[0.0, 0.0, 0.0, 1.0]);
    ensure(cut.components.len() == 2, || format!("tetrahedron components {:?}", cut.components))?;
    ensure(cut.crowns.len() == 2 && cut.crowns.iter().all(|c| c.geodesics.len() == 3), || {
        format!("tetrahedron crowns {:?}", cut.crowns)
    })?;
    let mut n = 0;
    for (name, g) in fixtures() {
        let none = g.crowned_boundaries(&vec![1.0; g.num_vertices()]);
        ensure(none.crowns.is_empty() && none.components.len() == 1, || format!("{name}: positive k has crowns"))?;
        for _ in 0..20 * scale {
            let k: Vec<f64> = (0..g.num_vertices()).map(|_| if rng.gen_bool(0.5) { 0.0 } else { 1.0 }).collect();
            let degenerate = g.degenerate_edges(&k);
            let pairs = g.spike_pairing(&k);
            ensure(pairs.len() == degenerate.len(), || format!("{name} {k:?}: {} pairs", pairs.len()))?;
            for (a, b) in &pairs {
                ensure(g.sigma(a) == *b, || format!("{name} {k:?}: pair {a:?} {b:?} not sigma-related"))?;
            }
            let cut = g.crowned_boundaries(&k);
            let total: usize = cut.components.iter().map(Vec::len).sum();
            ensure(total == g.num_faces(), || format!("{name} {k:?}: components miss faces"))?;
            let edges: usize = cut.crowns.iter().map(|c| c.half_edges.len()).sum();
            ensure(edges == 2 * degenerate.len(), || format!("{name} {k:?}: crowns use {edges} half-edges"))?;
            for c in &cut.crowns {
                for (i, h) in c.half_edges.iter().enumerate() {
                    let next = c.half_edges[(i + 1) % c.half_edges.len()];
                    ensure(k[h.tail] == 0.0 && k[h.head] == 0.0, || format!("{name} {k:?}: crown edge {h:?}"))?;
                    ensure(h.head == next.tail, || format!("{name} {k:?}: crown breaks at {h:?}"))?;
                }
            }
            n += 1;
        }
    }
    Ok(format!("fixed tetrahedron case and {n} random zero patterns"))
}

/// Random targets near and across the boundary of the polytope.
fn random_target(rng: &mut ChaCha8Rng, g: &Nerve) -> Result<Vec<f64>, String> {
    let n = g.num_vertices();
    let mut k = random_k(rng, n, 0.05, 5.0);
    for x in k.iter_mut() {
        if rng.gen_bool(0.2) {
            *x = 0.0;
        }
    }
    let mut t = geom(solver::total_curvature_map(&k, g))?;
    match rng.gen_range(0..3) {
        0 => {}
        1 => {
            let s = rng.gen_range(0.5..1.6);
            t.iter_mut().for_each(|x| *x *= s);
        }
        _ => t = (0..n).map(|_| rng.gen_range(0.0..3.5)).collect(),
    }
    Ok(t)
}

fn membership_oracle(rng: &mut ChaCha8Rng, scale: usize) -> Outcome {
    let mut counts = [0usize; 3];
    for g in [nerve::tetrahedron(), nerve::octahedron()] {
        for _ in 0..50 * scale {
            let t = random_target(rng, &g)?;
            let verdict = polytope::classify(&t, &g).map_err(|e| e.to_string())?;
            let flow = polytope::flow_membership(&t, &g).map_err(|e| e.to_string())?;
            ensure(verdict.is_member() == flow, || format!("T = {t:?}: {verdict:?} vs flow {flow}"))?;
            counts[match verdict {
                Verdict::Interior => 0,
                Verdict::Boundary(_) => 1,
                Verdict::Outside(_) => 2,
            }] += 1;
        }
    }
    Ok(format!("interior {}, boundary {}, outside {}", counts[0], counts[1], counts[2]))
}

fn certificate_validity(rng: &mut ChaCha8Rng, scale: usize) -> Outcome {
    let mut n = 0;
    for g in [nerve::tetrahedron(), nerve::octahedron()] {
        while n < 25 * scale * (1 + (g.num_vertices() == 6) as usize) {
            let t = random_target(rng, &g)?;
            if !polytope::classify(&t, &g).map_err(|e| e.to_string())?.is_member() {
                continue;
            }
            let cert = polytope::coherent_certificate(&t, &g).map_err(|e| format!("T = {t:?}: {e}"))?;
            let sums = cert.face_sums(g.num_faces());
            ensure(sums.iter().all(|&s| s < PI), || format!("T = {t:?}: face sums {sums:?}"))?;
            let psi = cert.vertex_sums(g.num_vertices());
            let err = psi.iter().zip(&t).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            ensure(err < 1e-9, || format!("T = {t:?}: vertex sums off by {err:e}"))?;
            for &(_, v, x) in &cert.corners {
                ensure(x >= 0.0 && (t[v] != 0.0 || x == 0.0), || format!("T = {t:?}: corner at {v} is {x}"))?;
            }
            n += 1;
        }
    }
    Ok(format!("{n} certificates"))
}

fn hessian_definite(rng: &mut ChaCha8Rng, scale: usize) -> Outcome {
    let mut worst: f64 = 0.0;
    for (_, g) in fixtures() {
        for _ in 0..5 * scale {
            let mut kv = random_k(rng, g.num_vertices(), 0.1, 5.0);
            if rng.gen_bool(0.5) {
                kv[0] = 0.0;
            }
            let s = LogCoordinates::from_curvatures(&kv);
            let h = geom(solver::hessian(&s, &g))?;
            let min = h.clone().symmetric_eigen().eigenvalues.min();
            ensure(min > 0.0, || format!("k = {kv:?}: min eigenvalue {min:e}"))?;
            worst = worst.max((&h - h.transpose()).amax());
        }
    }
    ensure(worst < 1e-12, || format!("asymmetry {worst:e}"))?;
    Ok(format!("asymmetry {worst:e}"))
}

fn forward_inverse(rng: &mut ChaCha8Rng, scale: usize) -> Outcome {
    let mut worst: f64 = 0.0;
    for g in [nerve::tetrahedron(), nerve::octahedron()] {
        for i in 0..4 * scale {
            let mut k = random_k(rng, g.num_vertices(), 0.1, 5.0);
            if i % 2 == 1 {
                let v = rng.gen_range(0..k.len());
                k[v] = 0.0;
            }
            let t = geom(solver::total_curvature_map(&k, &g))?;
            let r = solver::newton_solve(&t, &g, None, NewtonOptions::default()).map_err(|e| format!("k = {k:?}: {e}"))?;
            let tol = solver::default_tolerance(&r.stratum);
            ensure(r.residual < tol, || format!("k = {k:?}: residual {:e}", r.residual))?;
            let err = r.k.iter().zip(&k).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            ensure(err < 1e-6, || format!("k = {k:?}: recovered with error {err:e}"))?;
            worst = worst.max(err);
        }
    }
    Ok(format!("max recovery error {worst:e}"))
}

fn flow_newton_agreement(rng: &mut ChaCha8Rng, scale: usize) -> Outcome {
    let mut worst: f64 = 0.0;
    let g = nerve::tetrahedron();
    for _ in 0..2 * scale {
        let k = random_k(rng, 4, 0.2, 3.0);
        let t = geom(solver::total_curvature_map(&k, &g))?;
        let n = solver::newton_solve(&t, &g, None, NewtonOptions::default()).map_err(|e| e.to_string())?;
        let f = solver::ricci_flow(&[1.0; 4], &t, &g, FlowOptions::default()).map_err(|e| e.to_string())?;
        let err = n.k.iter().zip(&f.last().k).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        ensure(err < 1e-6, || format!("k = {k:?}: flow and Newton differ by {err:e}"))?;
        worst = worst.max(err);
    }
    Ok(format!("max disagreement {worst:e}"))
}

fn flow_lyapunov(rng: &mut ChaCha8Rng, _: usize) -> Outcome {
    let g = nerve::octahedron();
    let k = random_k(rng, 6, 0.2, 3.0);
    let t = geom(solver::total_curvature_map(&k, &g))?;
    let opts = FlowOptions { track_energy: true, ..FlowOptions::default() };
    let traj = solver::ricci_flow(&[1.0; 6], &t, &g, opts).map_err(|e| e.to_string())?;
    let mut worst = f64::NEG_INFINITY;
    for w in traj.samples.windows(2) {
        ensure(w[1].k.iter().all(|&x| x > 0.0), || format!("k left the positive orthant at t = {}", w[1].t))?;
        if let (Some(a), Some(b)) = (w[0].energy, w[1].energy) {
            worst = worst.max(b - a);
        }
    }
    ensure(worst <= 1e-9, || format!("energy increased by {worst:e}"))?;
    Ok(format!("{} samples, worst step {worst:e}", traj.samples.len()))
}

// curvature of an arc fitted near the origin, as in the fan measurement
fn fitted_curvature(arc: &layout::Arc) -> Vec<f64> {
    let a = arc.transformed(&Mobius::to_origin(arc.mid));
    let mut pts = vec![a.point(0.1), a.point(0.5), a.point(0.9)];
    pts.extend(a.samples(5));
    layout::measure_curvature(&pts)
}

fn layout_fidelity(rng: &mut ChaCha8Rng, scale: usize) -> Outcome {
    let n = 200 * scale;
    let (mut wk, mut wd): (f64, f64) = (0.0, 0.0);
    for _ in 0..n {
        let k = [0; 3].map(|_| if rng.gen_bool(0.05) { 0.0 } else { rng.gen_range(0.0..5.0) });
        let l = layout::realize_triangle(k).map_err(|e| format!("k = {k:?}: {e}"))?;
        for i in 0..3 {
            for m in fitted_curvature(&l.arcs[i]) {
                wk = wk.max((m - k[i]).abs() / k[i].max(1.0));
            }
            let c = l.circles[i].curvature();
            wk = wk.max((c - k[i]).abs() / k[i].max(1.0));
            let (p, q) = (l.tangency[(i + 2) % 3], l.tangency[i]);
            if !layout::is_ideal(p) && !layout::is_ideal(q) {
                let gap = 2.0 / ((k[i] + k[(i + 1) % 3]) * (k[i] + k[(i + 2) % 3]));
                wd = wd.max((layout::distance(p, q) - hypgeom::gap_to_distance(gap)).abs());
            }
        }
    }
    ensure(wk < 1e-8, || format!("curvature error {wk:e}"))?;
    ensure(wd < 1e-9, || format!("distance error {wd:e}"))?;
    Ok(format!("{n} triples, curvature {wk:e}, distance {wd:e}"))
}

fn fan_consistency(rng: &mut ChaCha8Rng, scale: usize) -> Outcome {
    let mut worst: f64 = 0.0;
    let mut glue: f64 = 0.0;
    for (_, g) in fixtures() {
        for _ in 0..10 * scale {
            let k = random_k(rng, g.num_vertices(), 0.01, 5.0);
            let t = geom(solver::total_curvature_map(&k, &g))?;
            for v in 0..g.num_vertices() {
                let fan = layout::vertex_fan(&k, &g, v).map_err(|e| e.to_string())?;
                worst = worst.max((layout::fan_total_curvature(&fan) - t[v]).abs());
                for w in fan.windows(2) {
                    // consecutive faces share the center circle and one neighbor circle
                    let (a, b) = (&w[0].layout, &w[1].layout);
                    glue = glue.max((a.tangency[2] - b.tangency[0]).norm());
                    for (c, arc) in [(&a.circles[0], &b.arcs[0]), (&a.circles[2], &b.arcs[1])] {
                        for z in arc.samples(4) {
                            glue = glue.max((c.value(z) / c.gradient(z).norm()).abs());
                        }
                    }
                }
            }
        }
    }
    ensure(worst < 1e-8, || format!("fan total off by {worst:e}"))?;
    ensure(glue < 1e-8, || format!("gluing mismatch {glue:e}"))?;
    Ok(format!("total {worst:e}, gluing {glue:e}"))
}

fn ceva_identity(rng: &mut ChaCha8Rng, scale: usize) -> Outcome {
    let n = 500 * scale;
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let k = [0; 3].map(|_| rng.gen_range(0.01..5.0));
        let l = layout::realize_triangle(k).map_err(|e| e.to_string())?;
        let lam = layout::ceva_coefficients(&l).ok_or_else(|| format!("k = {k:?}: no recentering"))?;
        for (m, row) in lam.iter().enumerate() {
            for (i, &x) in row.iter().enumerate() {
                ensure(i == m || (x > 0.0 && x < 1.0), || format!("k = {k:?}: lambda {lam:?}"))?;
            }
        }
        worst = worst.max(layout::ceva_defect(&lam));
    }
    ensure(worst < 1e-9, || format!("Ceva defect {worst:e}"))?;
    Ok(format!("{n} triples, defect {worst:e}"))
}

fn isometry_invariance(rng: &mut ChaCha8Rng, scale: usize) -> Outcome {
    let n = 200 * scale;
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let k = [0; 3].map(|_| rng.gen_range(0.05..5.0));
        let l = layout::realize_triangle(k).map_err(|e| e.to_string())?;
        let p = Point::from_polar(rng.gen_range(0.0..0.7), rng.gen_range(0.0..2.0 * PI));
        let m = Mobius::to_origin(p).then(&Mobius::rotation(rng.gen_range(0.0..2.0 * PI)));
        let moved = l.transformed(&m);
        for i in 0..3 {
            let c = moved.circles[i].curvature();
            worst = worst.max((c - k[i]).abs() / k[i].max(1.0));
            let (a, b) = (l.tangency[i], l.tangency[(i + 1) % 3]);
            let (ma, mb) = (moved.tangency[i], moved.tangency[(i + 1) % 3]);
            worst = worst.max((layout::distance(a, b) - layout::distance(ma, mb)).abs());
            let on = moved.circles[i].value(moved.tangency[i]) / moved.circles[i].gradient(moved.tangency[i]).norm();
            worst = worst.max(on.abs());
        }
    }
    ensure(worst < 1e-9, || format!("isometry changed the configuration by {worst:e}"))?;
    Ok(format!("{n} configurations, {worst:e}"))
}
