//! Scalar geometry of generalized circles and of three mutually tangent ones.
//!
//! A generalized circle of geodesic curvature `k` is a circle (`k > 1`), a
//! horocycle (`k = 1`), a hypercycle (`0 < k < 1`) or a geodesic (`k = 0`).
//! Everything here is a pure function of its arguments.

use std::f64::consts::PI;

use thiserror::Error;

/// Curvatures above this are clamped before evaluation.
pub const CURVATURE_CAP: f64 = 1e8;

/// Below this value of `|K D|` the arc length is taken from its series at `k = 1`.
pub const SERIES_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeomError {
    #[error("distance must be positive, got {0}")]
    NonPositiveDistance(f64),
    #[error("no circle of curvature {k} has a chord of gap {gap}: inner angle would exceed pi")]
    RegimeError { k: f64, gap: f64 },
    #[error("chord of arc {0} is infinite: both tangency points are ideal")]
    InfiniteChord(usize),
    #[error("curvature {0} is zero, log coordinate undefined")]
    DegenerateInput(usize),
    #[error("curvature must be a nonnegative finite number, got {0}")]
    BadCurvature(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    Geodesic,
    Hypercycle,
    Horocycle,
    Circle,
}

impl Regime {
    pub fn of(k: f64) -> Regime {
        if k == 0.0 {
            Regime::Geodesic
        } else if k < 1.0 {
            Regime::Hypercycle
        } else if k == 1.0 {
            Regime::Horocycle
        } else {
            Regime::Circle
        }
    }
}

/// Inner angle, length and total geodesic curvature of one arc.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArcQuantities {
    pub theta: f64,
    pub length: f64,
    pub total: f64,
}

/// `cosh d - 1` without cancellation for small `d`.
pub fn chord_gap(d: f64) -> f64 {
    let s = (0.5 * d).sinh();
    2.0 * s * s
}

/// Inverse of [`chord_gap`].
pub fn gap_to_distance(gap: f64) -> f64 {
    // acosh(1 + D) = 2 asinh(sqrt(D / 2))
    2.0 * (0.5 * gap).sqrt().asinh()
}

/// `acosh(1 + x)` for `x >= 0`, accurate for small `x` and safe for huge `x`.
fn acosh1p(x: f64) -> f64 {
    if x > 1e8 {
        // log domain: acosh(y) = ln(2y) - 1/(4y^2) - ...
        let y = 1.0 + x;
        (2.0f64).ln() + y.ln() - 0.25 / (y * y)
    } else {
        2.0 * (0.5 * x).sqrt().asinh()
    }
}

fn check_curvature(k: f64) -> Result<f64, GeomError> {
    if !(k >= 0.0) || !k.is_finite() {
        return Err(GeomError::BadCurvature(k));
    }
    if k > CURVATURE_CAP {
        log::warn!("curvature {k} capped at {CURVATURE_CAP}");
        return Ok(CURVATURE_CAP);
    }
    Ok(k)
}

// l(k, D) / sqrt(2D) near k = 1 as a series in y = K D.
fn series_factor(y: f64) -> f64 {
    1.0 - y / 12.0 + 3.0 * y * y / 160.0 - 5.0 * y * y * y / 896.0
}

fn series_factor_prime(y: f64) -> f64 {
    -1.0 / 12.0 + 3.0 * y / 80.0 - 15.0 * y * y / 896.0
}

/// Arc quantities from curvature and chord gap `D = cosh d - 1`.
pub fn arc_from_gap(k: f64, gap: f64) -> Result<ArcQuantities, GeomError> {
    let k = check_curvature(k)?;
    if !(gap > 0.0) {
        return Err(GeomError::NonPositiveDistance(gap));
    }
    if k == 0.0 {
        let d = acosh1p(gap);
        return Ok(ArcQuantities { theta: d, length: d, total: 0.0 });
    }
    let big_k = (1.0 - k) * (1.0 + k);
    let y = big_k * gap;
    if y.abs() < SERIES_THRESHOLD {
        let length = (2.0 * gap).sqrt() * series_factor(y);
        let theta = length * big_k.abs().sqrt();
        return Ok(ArcQuantities { theta, length, total: k * length });
    }
    let theta = if big_k < 0.0 {
        if 1.0 + y < -1.0 - 1e-12 {
            return Err(GeomError::RegimeError { k, gap });
        }
        // cos theta = 1 + y, i.e. sin(theta / 2) = sqrt(-y / 2)
        2.0 * (-0.5 * y).sqrt().min(1.0).asin()
    } else {
        acosh1p(y)
    };
    let length = theta / big_k.abs().sqrt();
    Ok(ArcQuantities { theta, length, total: k * length })
}

/// Arc length and total geodesic curvature of an arc of curvature `k` whose
/// endpoints are at hyperbolic distance `d`.
pub fn arc_length(k: f64, d: f64) -> Result<ArcQuantities, GeomError> {
    if !(d > 0.0) {
        return Err(GeomError::NonPositiveDistance(d));
    }
    arc_from_gap(k, chord_gap(d))
}

/// Partial derivatives `(dl/dk, dl/dD)` of the arc length at `(k, D)`.
pub fn arc_length_partials(k: f64, gap: f64) -> Result<(f64, f64), GeomError> {
    let arc = arc_from_gap(k, gap)?;
    let big_k = (1.0 - k) * (1.0 + k);
    let y = big_k * gap;
    let dl_dd = 1.0 / (gap * (2.0 + y)).sqrt();
    let dl_dk = if y.abs() < SERIES_THRESHOLD {
        -2.0 * k * gap * (2.0 * gap).sqrt() * series_factor_prime(y)
    } else {
        (k / big_k) * (arc.length - 2.0 * (gap / (2.0 + y)).sqrt())
    };
    Ok((dl_dk, dl_dd))
}

/// Chord gaps `D_i` of the three arcs of a three-circle configuration.
///
/// Arc `i` runs on circle `i` between its tangency points with the other two.
pub fn triangle_chords(k: [f64; 3]) -> Result<[f64; 3], GeomError> {
    let mut out = [0.0; 3];
    for i in 0..3 {
        let (j, l) = ((i + 1) % 3, (i + 2) % 3);
        let den = (k[i] + k[j]) * (k[i] + k[l]);
        if den == 0.0 {
            return Err(GeomError::InfiniteChord(i));
        }
        out[i] = 2.0 / den;
    }
    Ok(out)
}

fn clamp_triangle(k: [f64; 3]) -> Result<[f64; 3], GeomError> {
    Ok([check_curvature(k[0])?, check_curvature(k[1])?, check_curvature(k[2])?])
}

/// Per-arc data of a triangle, including the geodesic side length when a
/// circle has degenerated (`k_i = 0`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriangleArcs {
    pub arcs: [ArcQuantities; 3],
}

fn triangle_arc(k: [f64; 3], i: usize) -> ArcQuantities {
    let (j, l) = ((i + 1) % 3, (i + 2) % 3);
    if k[i] == 0.0 {
        let len = if k[j] > 0.0 && k[l] > 0.0 {
            acosh1p(2.0 / (k[j] * k[l]))
        } else {
            f64::INFINITY
        };
        return ArcQuantities { theta: len, length: len, total: 0.0 };
    }
    let gap = 2.0 / ((k[i] + k[j]) * (k[i] + k[l]));
    match arc_from_gap(k[i], gap) {
        Ok(a) => a,
        // the chord always satisfies 1 + K D >= -1 up to rounding
        Err(_) => {
            let big_k = (1.0 - k[i]) * (1.0 + k[i]);
            let length = PI / big_k.abs().sqrt();
            ArcQuantities { theta: PI, length, total: k[i] * length }
        }
    }
}

/// Arc data for all three circles. Inputs must be nonnegative.
pub fn triangle_arcs(k: [f64; 3]) -> Result<TriangleArcs, GeomError> {
    let k = clamp_triangle(k)?;
    Ok(TriangleArcs { arcs: [triangle_arc(k, 0), triangle_arc(k, 1), triangle_arc(k, 2)] })
}

/// Total geodesic curvatures `(T_1, T_2, T_3)` of the arcs bounding the dual
/// triangle. Continuous on all of `[0, inf)^3`.
pub fn triangle_total_curvatures(k: [f64; 3]) -> Result<[f64; 3], GeomError> {
    let a = triangle_arcs(k)?;
    Ok([a.arcs[0].total, a.arcs[1].total, a.arcs[2].total])
}

/// Curvature of the circle through the three tangency points.
pub fn orthocircle_curvature(k: [f64; 3]) -> Result<f64, GeomError> {
    let k = clamp_triangle(k)?;
    Ok((k[0] * k[1] + k[1] * k[2] + k[2] * k[0] + 1.0).sqrt())
}

/// `dT_i/dk_j` for all pairs. Finite wherever each circle with positive
/// curvature has a finite chord.
pub fn triangle_partials(k: [f64; 3]) -> Result<[[f64; 3]; 3], GeomError> {
    let k = clamp_triangle(k)?;
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        if k[i] == 0.0 {
            // T_i vanishes identically on k_i = 0; dT_i/dk_i is the side length
            out[i][i] = triangle_arc(k, i).length;
            continue;
        }
        let (j, l) = ((i + 1) % 3, (i + 2) % 3);
        let (sij, sil) = (k[i] + k[j], k[i] + k[l]);
        let gap = 2.0 / (sij * sil);
        let arc = triangle_arc(k, i);
        let (dl_dk, dl_dd) = arc_length_partials(k[i], gap)?;
        let dd_di = -gap * (1.0 / sij + 1.0 / sil);
        out[i][i] = arc.length + k[i] * (dl_dk + dl_dd * dd_di);
        out[i][j] = k[i] * dl_dd * (-gap / sij);
        out[i][l] = k[i] * dl_dd * (-gap / sil);
    }
    Ok(out)
}

/// `dT_i/dS_j` with `S = ln k`, with rows and columns of zero curvatures set
/// to zero. This is the per-face Hessian block of the energy on a stratum.
pub fn log_jacobian(k: [f64; 3]) -> Result<[[f64; 3]; 3], GeomError> {
    let p = triangle_partials(k)?;
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            if k[i] > 0.0 && k[j] > 0.0 {
                out[i][j] = p[i][j] * k[j].min(CURVATURE_CAP);
            }
        }
    }
    Ok(out)
}

/// `J[i][j] = dT_i/dS_j` where `S_j = ln k_j`. All curvatures must be positive.
pub fn triangle_jacobian(k: [f64; 3]) -> Result<[[f64; 3]; 3], GeomError> {
    for (i, &ki) in k.iter().enumerate() {
        if ki == 0.0 {
            return Err(GeomError::DegenerateInput(i));
        }
    }
    log_jacobian(k)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn horocycle_arc() {
        let a = arc_length(1.0, 2.0f64.acosh()).unwrap();
        assert!(close(a.length, 2.0f64.sqrt(), 1e-14));
        assert_eq!(a.length, a.total);
    }

    #[test]
    fn geodesic_arc() {
        let a = arc_length(0.0, 0.7).unwrap();
        assert!(close(a.theta, 0.7, 1e-15));
        assert!(close(a.length, 0.7, 1e-15));
        assert_eq!(a.total, 0.0);
    }

    #[test]
    fn circle_arc_two_thirds_pi() {
        // cosh d = 1.5 so D = 0.5
        let a = arc_from_gap(2.0, 0.5).unwrap();
        assert!(close(a.theta, 2.0 * PI / 3.0, 1e-14));
        assert!(close(a.length, 2.0 * PI / (3.0 * 3.0f64.sqrt()), 1e-14));
        assert!(close(a.total, 4.0 * PI / (3.0 * 3.0f64.sqrt()), 1e-14));
        assert!(close(a.total, 2.4184, 1e-4));
        let b = arc_length(2.0, 1.5f64.acosh()).unwrap();
        assert!(close(a.total, b.total, 1e-13));
    }

    #[test]
    fn bad_inputs() {
        assert!(matches!(arc_length(1.0, 0.0), Err(GeomError::NonPositiveDistance(_))));
        assert!(matches!(arc_length(1.0, -1.0), Err(GeomError::NonPositiveDistance(_))));
        // coth r = 2 gives diameter 2r = ln 3
        assert!(arc_length(2.0, 3.0f64.ln() * 0.999).is_ok());
        assert!(matches!(arc_length(2.0, 3.0f64.ln() * 1.01), Err(GeomError::RegimeError { .. })));
        assert!(arc_length(-0.5, 1.0).is_err());
    }

    #[test]
    fn partials_closed_forms() {
        let (dk, _) = arc_length_partials(1.0, 2.0).unwrap();
        assert!(close(dk, 2.0 / 3.0, 1e-14));
        let (_, dd) = arc_length_partials(0.5, 1.0).unwrap();
        assert!(close(dd, 1.0 / 2.75f64.sqrt(), 1e-15));
    }

    #[test]
    fn partials_match_finite_differences() {
        for &(k, gap) in &[(0.3, 0.8), (0.5, 1.0), (0.999, 2.0), (1.0, 1.3), (1.2, 0.4), (3.0, 0.1)] {
            let (dk, dd) = arc_length_partials(k, gap).unwrap();
            let h = 1e-6;
            let fk = (arc_from_gap(k + h, gap).unwrap().length - arc_from_gap(k - h, gap).unwrap().length)
                / (2.0 * h);
            let fd = (arc_from_gap(k, gap + h).unwrap().length - arc_from_gap(k, gap - h).unwrap().length)
                / (2.0 * h);
            assert!((dk - fk).abs() <= 1e-6 * dk.abs().max(1.0), "{k} {gap}: {dk} vs {fk}");
            assert!((dd - fd).abs() <= 1e-6 * dd.abs().max(1.0), "{k} {gap}: {dd} vs {fd}");
        }
    }

    #[test]
    fn series_switch_is_seamless() {
        // just inside and just outside the threshold
        let gap = 1.0;
        for &k in &[1.0 - 4.9e-7, 1.0 - 5.1e-7, 1.0 + 4.9e-7, 1.0 + 5.1e-7] {
            let a = arc_from_gap(k, gap).unwrap().length;
            let big_k: f64 = 1.0 - k * k;
            let exact = if big_k > 0.0 {
                (1.0 + big_k * gap).acosh() / big_k.sqrt()
            } else {
                (1.0 + big_k * gap).acos() / (-big_k).sqrt()
            };
            assert!((a - exact).abs() < 1e-9, "{k}: {a} vs {exact}");
        }
    }

    #[test]
    fn chords() {
        assert_eq!(triangle_chords([1.0, 1.0, 1.0]).unwrap(), [0.5, 0.5, 0.5]);
        assert_eq!(triangle_chords([0.0, 1.0, 1.0]).unwrap(), [2.0, 1.0, 1.0]);
        assert!(matches!(triangle_chords([0.0, 0.0, 1.0]), Err(GeomError::InfiniteChord(_))));
    }

    #[test]
    fn totals_spot_values() {
        let t = triangle_total_curvatures([1.0, 1.0, 1.0]).unwrap();
        for x in t {
            assert!(close(x, 1.0, 1e-15));
        }
        assert_eq!(triangle_total_curvatures([0.0; 3]).unwrap(), [0.0; 3]);
        let s = 3.0f64.sqrt();
        let t = triangle_total_curvatures([s, s, s]).unwrap();
        let expected = 1.5f64.sqrt() * (2.0f64 / 3.0).acos();
        for x in t {
            assert!(close(x, expected, 1e-13));
            assert!(close(x, 1.030_094_540_766_214, 1e-13));
        }
    }

    #[test]
    fn horocycle_formula() {
        for &(a, b) in &[(0.3, 2.0), (0.0, 1.0), (5.0, 0.7)] {
            let t = triangle_total_curvatures([1.0, a, b]).unwrap();
            assert!(close(t[0], 2.0 / ((a + 1.0) * (b + 1.0)).sqrt(), 1e-14));
        }
    }

    #[test]
    fn degenerate_side_length() {
        let a = triangle_arcs([0.0, 2.0, 0.5]).unwrap();
        assert_eq!(a.arcs[0].total, 0.0);
        assert!(close(a.arcs[0].length, 3.0f64.acosh(), 1e-14));
    }

    #[test]
    fn large_curvature_limits() {
        // pi - T_1 ~ 2 sqrt(2 / k_1); 40-digit reference values
        let refs = [(1e3, 3.052166352047912), (1e4, 3.113308869263901), (1e6, 3.13876422693802)];
        let mut last = f64::INFINITY;
        for (k1, r) in refs {
            let t = triangle_total_curvatures([k1, 1.0, 1.0]).unwrap();
            assert!(close(t[0], r, 1e-9), "{k1}: {}", t[0]);
            assert!(PI - t[0] < last);
            last = PI - t[0];
        }
        let t = triangle_total_curvatures([1e6, 1.0, 1.0]).unwrap();
        assert!(t[1] < 1e-2 && t[2] < 1e-2);
        let t = triangle_total_curvatures([1e6, 1e6, 1.0]).unwrap();
        assert!((t[0] + t[1] - PI).abs() < 1e-3);
        assert!(t[2] < 1e-3);
    }

    #[test]
    fn orthocircle() {
        assert_eq!(orthocircle_curvature([1.0, 1.0, 1.0]).unwrap(), 2.0);
        assert_eq!(orthocircle_curvature([0.0, 0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(orthocircle_curvature([7.5, 0.0, 0.0]).unwrap(), 1.0);
    }

    #[test]
    fn jacobian_fd_at_ones() {
        let k = [1.0, 1.0, 1.0];
        let j = triangle_jacobian(k).unwrap();
        let h: f64 = 1e-5;
        for c in 0..3 {
            let mut kp = k;
            let mut km = k;
            kp[c] *= h.exp();
            km[c] *= (-h).exp();
            let tp = triangle_total_curvatures(kp).unwrap();
            let tm = triangle_total_curvatures(km).unwrap();
            for r in 0..3 {
                let fd = (tp[r] - tm[r]) / (2.0 * h);
                assert!((fd - j[r][c]).abs() < 1e-6, "{r}{c}: {fd} vs {}", j[r][c]);
            }
        }
    }

    #[test]
    fn jacobian_rejects_zero() {
        assert!(matches!(triangle_jacobian([1.0, 0.0, 2.0]), Err(GeomError::DegenerateInput(1))));
    }

    #[test]
    fn one_zero_cross_partials() {
        for &(a, b) in &[(0.4, 1.7), (2.0, 3.0), (1.0, 1.0)] {
            let p = triangle_partials([a, b, 0.0]).unwrap();
            let closed = -1.0 / ((a + b) * (1.0 + a * b).sqrt());
            assert!(close(p[0][1] / a, closed, 1e-13));
            assert!(close(p[1][0] / b, closed, 1e-13));
        }
    }
}
