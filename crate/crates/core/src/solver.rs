//! The inverse problem: curvatures realizing a prescribed total-curvature
//! target, by the combinatorial Ricci flow or by Newton's method on the
//! convex energy whose gradient is `Phi(k) - T`.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::hypgeom::{self, GeomError};
use crate::nerve::Nerve;
use crate::polytope::{self, PolytopeError, Verdict, Witness};
use crate::quad;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("target is outside the admissible region: {0:?}")]
    OutsideTarget(Witness),
    #[error("initial curvatures vanish at vertex {0} where the target is positive")]
    StratumMismatch(usize),
    #[error("vector has {got} entries, nerve has {expected} vertices")]
    WrongLength { expected: usize, got: usize },
    #[error("initial curvature at vertex {0} is negative or not finite")]
    BadInitial(usize),
    #[error("no convergence within {0} iterations")]
    MaxIterations(usize),
    #[error("line search failed at iteration {0}")]
    LineSearch(usize),
    #[error("flow did not converge before t = {0}")]
    Timeout(f64),
    #[error(transparent)]
    Polytope(#[from] PolytopeError),
    #[error(transparent)]
    Geometry(#[from] GeomError),
}

/// `Phi(k)`: total geodesic curvature at each vertex, summed over its faces.
pub fn total_curvature_map(k: &[f64], g: &Nerve) -> Result<Vec<f64>, GeomError> {
    let mut out = vec![0.0; g.num_vertices()];
    for f in g.faces() {
        let t = hypgeom::triangle_total_curvatures([k[f[0]], k[f[1]], k[f[2]]])?;
        for c in 0..3 {
            out[f[c]] += t[c];
        }
    }
    Ok(out)
}

/// Log coordinates `S_v = ln k_v` on the vertices off a frozen set.
#[derive(Debug, Clone, PartialEq)]
pub struct LogCoordinates {
    /// Vertices whose curvature is held at 0.
    pub frozen: Vec<usize>,
    /// Vertices carrying a coordinate, increasing.
    pub free: Vec<usize>,
    pub s: Vec<f64>,
}

impl LogCoordinates {
    /// Coordinates of `k`, freezing exactly its zero entries.
    pub fn from_curvatures(k: &[f64]) -> LogCoordinates {
        let frozen = (0..k.len()).filter(|&v| k[v] == 0.0).collect();
        let free: Vec<usize> = (0..k.len()).filter(|&v| k[v] != 0.0).collect();
        let s = free.iter().map(|&v| k[v].ln()).collect();
        LogCoordinates { frozen, free, s }
    }

    /// The base point `S = 0` on the stratum of `frozen`.
    pub fn origin(n: usize, frozen: &[usize]) -> LogCoordinates {
        let free: Vec<usize> = (0..n).filter(|v| !frozen.contains(v)).collect();
        let s = vec![0.0; free.len()];
        LogCoordinates { frozen: frozen.to_vec(), free, s }
    }

    pub fn with_values(&self, s: Vec<f64>) -> LogCoordinates {
        LogCoordinates { frozen: self.frozen.clone(), free: self.free.clone(), s }
    }

    pub fn curvatures(&self, n: usize) -> Vec<f64> {
        let mut k = vec![0.0; n];
        for (&v, &x) in self.free.iter().zip(&self.s) {
            k[v] = x.exp();
        }
        k
    }
}

/// Gradient of the energy: `T_v(k) - T_hat_v` on the free vertices.
pub fn energy_gradient(s: &LogCoordinates, target: &[f64], g: &Nerve) -> Result<Vec<f64>, GeomError> {
    let t = total_curvature_map(&s.curvatures(g.num_vertices()), g)?;
    Ok(s.free.iter().map(|&v| t[v] - target[v]).collect())
}

// shared by the energy and by line-search differences
fn line_integral(
    from: &LogCoordinates,
    to: &[f64],
    target: &[f64],
    g: &Nerve,
    rule: &[(f64, f64)],
) -> Result<f64, GeomError> {
    let dir: Vec<f64> = to.iter().zip(&from.s).map(|(b, a)| b - a).collect();
    let mut acc = 0.0;
    for &(x, w) in rule {
        let p: Vec<f64> = from.s.iter().zip(&dir).map(|(a, d)| a + x * d).collect();
        let grad = energy_gradient(&from.with_values(p), target, g)?;
        acc += w * grad.iter().zip(&dir).map(|(a, b)| a * b).sum::<f64>();
    }
    Ok(acc)
}

fn energy_rule() -> Vec<(f64, f64)> {
    quad::composite(10, 24)
}

/// The convex energy, as the line integral of its gradient from `S = 0` on
/// the same stratum. Defined up to this choice of base point.
pub fn energy(s: &LogCoordinates, target: &[f64], g: &Nerve) -> Result<f64, GeomError> {
    let base = LogCoordinates::origin(g.num_vertices(), &s.frozen);
    line_integral(&base, &s.s, target, g, &energy_rule())
}

/// Hessian of the energy in log coordinates, assembled face by face.
pub fn hessian(s: &LogCoordinates, g: &Nerve) -> Result<DMatrix<f64>, GeomError> {
    let k = s.curvatures(g.num_vertices());
    let mut index = vec![usize::MAX; g.num_vertices()];
    for (i, &v) in s.free.iter().enumerate() {
        index[v] = i;
    }
    let n = s.free.len();
    let mut h = DMatrix::zeros(n, n);
    for f in g.faces() {
        let j = hypgeom::log_jacobian([k[f[0]], k[f[1]], k[f[2]]])?;
        for a in 0..3 {
            for b in 0..3 {
                let (ia, ib) = (index[f[a]], index[f[b]]);
                if ia != usize::MAX && ib != usize::MAX {
                    h[(ia, ib)] += j[a][b];
                }
            }
        }
    }
    Ok(h)
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// `||Phi(k) - T_hat||_inf` over vertices with positive target-or-curvature,
/// excluding the given stratum.
pub fn residual(k: &[f64], target: &[f64], g: &Nerve, stratum: &[usize]) -> Result<f64, GeomError> {
    let t = total_curvature_map(k, g)?;
    Ok((0..k.len()).filter(|v| !stratum.contains(v)).fold(0.0, |m, v| m.max((t[v] - target[v]).abs())))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Flow,
    Newton,
    Auto,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Flow => "flow",
            Method::Newton => "newton",
            Method::Auto => "auto",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub k: Vec<f64>,
    pub residual: f64,
    pub stratum: Vec<usize>,
    pub steps: usize,
    /// The method that produced `k`.
    pub method: Method,
}

/// Residual tolerance used when none is given.
pub fn default_tolerance(stratum: &[usize]) -> f64 {
    if stratum.is_empty() {
        1e-10
    } else {
        1e-8
    }
}

// zero set of an admissible target
fn target_stratum(target: &[f64], g: &Nerve) -> Result<Vec<usize>, SolveError> {
    match polytope::classify(target, g)? {
        Verdict::Interior => Ok(Vec::new()),
        Verdict::Boundary(i) => Ok(i),
        Verdict::Outside(w) => Err(SolveError::OutsideTarget(w)),
    }
}

fn check_initial(k0: &[f64], stratum: &[usize], g: &Nerve) -> Result<(), SolveError> {
    if k0.len() != g.num_vertices() {
        return Err(SolveError::WrongLength { expected: g.num_vertices(), got: k0.len() });
    }
    for (v, &x) in k0.iter().enumerate() {
        if !(x >= 0.0) || !x.is_finite() {
            return Err(SolveError::BadInitial(v));
        }
        if x == 0.0 && !stratum.contains(&v) {
            return Err(SolveError::StratumMismatch(v));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    /// Residual tolerance; `None` picks 1e-10 in the interior and 1e-8 on a stratum.
    pub tol: Option<f64>,
    pub max_iterations: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions { tol: None, max_iterations: 100 }
    }
}

/// Damped Newton minimization of the energy on the stratum of the target.
pub fn newton_solve(
    target: &[f64],
    g: &Nerve,
    k0: Option<&[f64]>,
    opts: NewtonOptions,
) -> Result<SolveResult, SolveError> {
    let stratum = target_stratum(target, g)?;
    let n = g.num_vertices();
    let tol = opts.tol.unwrap_or_else(|| default_tolerance(&stratum));
    let mut start = match k0 {
        Some(k) => {
            check_initial(k, &stratum, g)?;
            k.to_vec()
        }
        None => vec![1.0; n],
    };
    for &v in &stratum {
        start[v] = 0.0;
    }
    let mut s = LogCoordinates::from_curvatures(&start);
    let segment_rule = quad::gauss_legendre(12);
    for it in 0..opts.max_iterations {
        let grad = energy_gradient(&s, target, g)?;
        let r = sup_norm(&grad);
        if r < tol {
            return Ok(SolveResult { k: s.curvatures(n), residual: r, stratum, steps: it, method: Method::Newton });
        }
        let h = hessian(&s, g)?;
        let gv = DVector::from_column_slice(&grad);
        let chol = h.clone().cholesky().or_else(|| {
            let m = h.clone() + DMatrix::identity(h.nrows(), h.ncols()) * 1e-12;
            m.cholesky()
        });
        let step: Vec<f64> = match chol {
            Some(c) => (-c.solve(&gv)).iter().copied().collect(),
            None => grad.iter().map(|x| -x).collect(),
        };
        let slope: f64 = grad.iter().zip(&step).map(|(a, b)| a * b).sum();
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..=60 {
            let trial: Vec<f64> = s.s.iter().zip(&step).map(|(a, d)| a + alpha * d).collect();
            // energy difference along the segment, exact for a gradient field
            let de = line_integral(&s, &trial, target, g, &segment_rule)?;
            if de <= 1e-4 * alpha * slope {
                s = s.with_values(trial);
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            return Err(SolveError::LineSearch(it));
        }
    }
    let grad = energy_gradient(&s, target, g)?;
    let r = sup_norm(&grad);
    if r < tol {
        return Ok(SolveResult {
            k: s.curvatures(n),
            residual: r,
            stratum,
            steps: opts.max_iterations,
            method: Method::Newton,
        });
    }
    Err(SolveError::MaxIterations(opts.max_iterations))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowOptions {
    pub dt0: f64,
    /// Per-step error target on `S = ln k`, i.e. relative error on `k`.
    pub step_tol: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    /// Residual tolerance; `None` picks 1e-10 in the interior and 1e-8 on a stratum.
    pub tol: Option<f64>,
    pub k_floor: f64,
    pub t_max: f64,
    /// Evaluate the energy at every accepted step.
    pub track_energy: bool,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions {
            dt0: 0.01,
            step_tol: 1e-8,
            dt_min: 1e-6,
            dt_max: 1.0,
            tol: None,
            k_floor: 1e-6,
            t_max: 1e6,
            track_energy: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowSample {
    pub t: f64,
    pub k: Vec<f64>,
    pub totals: Vec<f64>,
    pub residual: f64,
    /// Energy on the current stratum, when tracked.
    pub energy: Option<f64>,
    /// Vertices frozen at 0 when the sample was taken.
    pub frozen: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    Timeout,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowTrajectory {
    pub samples: Vec<FlowSample>,
    pub termination: Termination,
    /// Zero set of the target.
    pub stratum: Vec<usize>,
    /// `(t, v)` for each vertex snapped to 0.
    pub snaps: Vec<(f64, usize)>,
}

impl FlowTrajectory {
    pub fn last(&self) -> &FlowSample {
        self.samples.last().expect("trajectory has a sample")
    }
}

fn rk4(s: &LogCoordinates, y: &[f64], dt: f64, target: &[f64], g: &Nerve) -> Result<Vec<f64>, GeomError> {
    let field = |p: &[f64]| -> Result<Vec<f64>, GeomError> {
        Ok(energy_gradient(&s.with_values(p.to_vec()), target, g)?.into_iter().map(|x| -x).collect())
    };
    let add = |a: &[f64], b: &[f64], c: f64| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x + c * y).collect() };
    let k1 = field(y)?;
    let k2 = field(&add(y, &k1, 0.5 * dt))?;
    let k3 = field(&add(y, &k2, 0.5 * dt))?;
    let k4 = field(&add(y, &k3, dt))?;
    Ok((0..y.len()).map(|i| y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect())
}

/// Integrates `dS_v/dt = -(T_v - T_hat_v)` with step-doubling RK4.
///
/// Target vertices with `T_hat_v = 0` are snapped to `k_v = 0` once their
/// curvature is below `k_floor` and still decreasing, and the residual on the
/// other vertices is below `tol`. Near a stratum `T_v` is about `c k_v` and
/// `k_v` decays like `1/(c t)`, so a threshold on `T_v` itself would need
/// `t ~ 1/tol`. The run stops when every such vertex is snapped and the
/// residual is below `tol`, or at `t_max`.
pub fn ricci_flow(k0: &[f64], target: &[f64], g: &Nerve, opts: FlowOptions) -> Result<FlowTrajectory, SolveError> {
    let stratum = target_stratum(target, g)?;
    check_initial(k0, &stratum, g)?;
    let n = g.num_vertices();
    let tol = opts.tol.unwrap_or_else(|| default_tolerance(&stratum));
    let mut s = LogCoordinates::from_curvatures(k0);
    let mut t = 0.0;
    let mut dt = opts.dt0.clamp(opts.dt_min, opts.dt_max);
    let mut samples = Vec::new();
    let mut snaps = Vec::new();
    loop {
        let k = s.curvatures(n);
        let totals = total_curvature_map(&k, g)?;
        let res = (0..n).filter(|v| !stratum.contains(v)).fold(0.0f64, |m, v| m.max((totals[v] - target[v]).abs()));
        let e = if opts.track_energy { Some(energy(&s, target, g)?) } else { None };
        samples.push(FlowSample { t, k: k.clone(), totals: totals.clone(), residual: res, energy: e, frozen: s.frozen.clone() });

        let pending: Vec<usize> = stratum.iter().copied().filter(|v| !s.frozen.contains(v)).collect();
        let ready: Vec<usize> = pending
            .iter()
            .copied()
            .filter(|&v| res < tol && k[v] < opts.k_floor && totals[v] > 0.0)
            .collect();
        if !ready.is_empty() {
            let mut kk = k.clone();
            for &v in &ready {
                kk[v] = 0.0;
                snaps.push((t, v));
            }
            s = LogCoordinates::from_curvatures(&kk);
            continue;
        }
        if pending.is_empty() && res < tol {
            return Ok(FlowTrajectory { samples, termination: Termination::Converged, stratum, snaps });
        }
        if t >= opts.t_max {
            return Ok(FlowTrajectory { samples, termination: Termination::Timeout, stratum, snaps });
        }

        loop {
            let h = dt.min(opts.t_max - t).max(opts.dt_min.min(opts.t_max - t));
            let full = rk4(&s, &s.s, h, target, g)?;
            let half = rk4(&s, &s.s, 0.5 * h, target, g)?;
            let two = rk4(&s, &half, 0.5 * h, target, g)?;
            let err = two
                .iter()
                .zip(&full)
                .map(|(a, b)| (a - b).abs() / 15.0 / a.abs().max(1.0))
                .fold(0.0, f64::max);
            let grow = if err == 0.0 { 5.0 } else { (0.9 * (opts.step_tol / err).powf(0.2)).clamp(0.2, 5.0) };
            if err <= opts.step_tol || h <= opts.dt_min {
                let next: Vec<f64> = two.iter().zip(&full).map(|(a, b)| a + (a - b) / 15.0).collect();
                s = s.with_values(next);
                t += h;
                dt = (h * grow).clamp(opts.dt_min, opts.dt_max);
                break;
            }
            dt = (h * grow).clamp(opts.dt_min, opts.dt_max);
        }
    }
}

/// Dispatches to the requested method. `Auto` runs Newton and falls back to
/// the flow if Newton fails.
pub fn solve(
    target: &[f64],
    g: &Nerve,
    method: Method,
    k0: Option<&[f64]>,
    newton: NewtonOptions,
    flow: FlowOptions,
) -> Result<SolveResult, SolveError> {
    let stratum = target_stratum(target, g)?;
    let run_flow = || -> Result<SolveResult, SolveError> {
        let start: Vec<f64> = match k0 {
            Some(k) => k.to_vec(),
            None => vec![1.0; g.num_vertices()],
        };
        let traj = ricci_flow(&start, target, g, flow)?;
        let last = traj.last();
        if traj.termination == Termination::Timeout {
            return Err(SolveError::Timeout(last.t));
        }
        Ok(SolveResult {
            k: last.k.clone(),
            residual: last.residual,
            stratum: stratum.clone(),
            steps: traj.samples.len() - 1,
            method: Method::Flow,
        })
    };
    match method {
        Method::Newton => newton_solve(target, g, k0, newton),
        Method::Flow => run_flow(),
        Method::Auto => match newton_solve(target, g, k0, newton) {
            Ok(r) => Ok(r),
            Err(SolveError::LineSearch(_)) | Err(SolveError::MaxIterations(_)) => run_flow(),
            Err(e) => Err(e),
        },
    }
}

/// `k` with `3 T(k, k, k) = t` per vertex of the tetrahedron, by bisection on
/// the symmetric triangle.
pub fn symmetric_tetrahedron_root(t: f64) -> f64 {
    let f = |k: f64| 3.0 * hypgeom::triangle_total_curvatures([k, k, k]).expect("valid")[0] - t;
    let (mut lo, mut hi) = (1e-12, 1.0);
    while f(hi) < 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-16 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}
