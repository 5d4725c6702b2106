//! Deterministic numerical kernels shared by the analytic modules:
//! bracketed root finding, adaptive quadrature on finite and semi-infinite
//! intervals, small dense linear solves, and derivative-free minimization in
//! one and two variables.
//!
//! All routines are pure functions of their inputs and safe to call
//! concurrently.

use crate::{Error, Result};

/// Tolerances shared by the iterative routines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumericTolerances {
    /// Relative tolerance (dimensionless, > 0).
    pub rel_tol: f64,
    /// Absolute tolerance (dimensionless, > 0).
    pub abs_tol: f64,
    /// Iteration / subdivision cap (>= 1).
    pub max_iter: u32,
}

impl NumericTolerances {
    pub fn new(rel_tol: f64, abs_tol: f64, max_iter: u32) -> Result<Self> {
        if !(rel_tol > 0.0) || !(abs_tol > 0.0) || max_iter == 0 {
            return Err(Error::InvalidParameter(format!(
                "tolerances must satisfy rel_tol > 0, abs_tol > 0, max_iter >= 1 \
                 (got rel_tol={rel_tol}, abs_tol={abs_tol}, max_iter={max_iter})"
            )));
        }
        Ok(Self { rel_tol, abs_tol, max_iter })
    }

    /// Default for root finding: rel 1e-10, abs 1e-12, 200 iterations.
    pub fn root() -> Self {
        Self { rel_tol: 1e-10, abs_tol: 1e-12, max_iter: 200 }
    }

    /// Default for quadrature: rel 1e-8.
    pub fn quadrature() -> Self {
        Self { rel_tol: 1e-8, abs_tol: 1e-12, max_iter: 200 }
    }

    /// Default for minimization.
    pub fn minimize() -> Self {
        Self { rel_tol: 1e-10, abs_tol: 1e-12, max_iter: 200 }
    }
}

impl Default for NumericTolerances {
    fn default() -> Self {
        Self::root()
    }
}

/// Gradient threshold used to declare a stationary point in `saddle_search`.
pub const GRAD_TOL: f64 = 1e-6;

/// Brent's method on a bracketing interval.
///
/// Requires `f(lo) * f(hi) <= 0`; returns a root to within
/// `rel_tol * |r| + abs_tol` of bracket width or `|f(r)| <= abs_tol`.
pub fn find_root_bracketed<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    tol: &NumericTolerances,
) -> Result<f64> {
    let (mut a, mut b) = (lo, hi);
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa * fb > 0.0 {
        return Err(Error::NoBracket { lo, hi, f_lo: fa, f_hi: fb });
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..tol.max_iter {
        if fb * fc > 0.0 {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * (tol.rel_tol * b.abs() + tol.abs_tol);
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 || fb.abs() <= tol.abs_tol {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            // inverse quadratic / secant step
            let s = fb / fa;
            let (mut p, mut q) = if a == c {
                (2.0 * xm * s, 1.0 - s)
            } else {
                let q = fa / fc;
                let r = fb / fc;
                (
                    s * (2.0 * xm * q * (q - r) - (b - a) * (r - 1.0)),
                    (q - 1.0) * (r - 1.0) * (s - 1.0),
                )
            };
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        if d.abs() > tol1 {
            b += d;
        } else {
            b += if xm >= 0.0 { tol1 } else { -tol1 };
        }
        fb = f(b);
    }
    Err(Error::NoConvergence { iterations: tol.max_iter, partial: b })
}

/// Recursion cap for adaptive Simpson subdivision.
const SIMPSON_MAX_DEPTH: u32 = 50;

/// Adaptive Simpson quadrature of `f` over `[lo, hi]`.
pub fn integrate_adaptive<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    tol: &NumericTolerances,
) -> Result<f64> {
    if lo > hi {
        return Err(Error::Domain(format!("integration bounds out of order: [{lo}, {hi}]")));
    }
    if lo == hi {
        return Ok(0.0);
    }
    // First guess of the scale so the relative criterion has something to bite on.
    let coarse = simpson(&f, lo, hi, f(lo), f((lo + hi) / 2.0), f(hi));
    let eps = tol.abs_tol.max(tol.rel_tol * coarse.abs());
    let mut leftover = 0.0;
    let value =
        adapt(&f, lo, hi, f(lo), f((lo + hi) / 2.0), f(hi), coarse, eps, 0, &mut leftover);
    // Panels that hit the depth cap contribute their unresolved residual; the
    // run only fails if those leftovers add up beyond the requested accuracy.
    if leftover > tol.abs_tol.max(tol.rel_tol * value.abs()) {
        return Err(Error::NoConvergence { iterations: SIMPSON_MAX_DEPTH, partial: value });
    }
    Ok(value)
}

fn simpson<F: Fn(f64) -> f64>(_f: &F, lo: f64, hi: f64, flo: f64, fmid: f64, fhi: f64) -> f64 {
    (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi)
}

#[allow(clippy::too_many_arguments)]
fn adapt<F: Fn(f64) -> f64>(
    f: &F,
    lo: f64,
    hi: f64,
    flo: f64,
    fmid: f64,
    fhi: f64,
    whole: f64,
    eps: f64,
    depth: u32,
    leftover: &mut f64,
) -> f64 {
    let mid = 0.5 * (lo + hi);
    let lm = 0.5 * (lo + mid);
    let rm = 0.5 * (mid + hi);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(f, lo, mid, flo, flm, fmid);
    let right = simpson(f, mid, hi, fmid, frm, fhi);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * eps || (hi - lo) < f64::EPSILON * (lo.abs() + hi.abs()) {
        return left + right + delta / 15.0;
    }
    if depth >= SIMPSON_MAX_DEPTH {
        *leftover += delta.abs() / 15.0;
        return left + right + delta / 15.0;
    }
    adapt(f, lo, mid, flo, flm, fmid, left, eps / 2.0, depth + 1, leftover)
        + adapt(f, mid, hi, fmid, frm, fhi, right, eps / 2.0, depth + 1, leftover)
}

/// Quadrature of `f` over `[lo, infinity)` for integrands with polynomial
/// decay `|f| = O(y^-p)`, `p > 1`, or faster.
///
/// Integrates blocks `[lo, lo+1], [lo+1, lo+3], ...` of geometrically doubling
/// width until two consecutive blocks are negligible against the running
/// total. Growth of block contributions is reported as divergence.
pub fn integrate_semi_infinite<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    tol: &NumericTolerances,
) -> Result<f64> {
    const MAX_BLOCKS: u32 = 120;
    let mut total = 0.0;
    let mut a = lo;
    let mut width = 1.0_f64.max(lo.abs() * 0.5);
    let mut small_in_a_row = 0;
    let mut prev_abs = f64::INFINITY;
    let mut grow_in_a_row = 0;
    for _ in 0..MAX_BLOCKS {
        let b = a + width;
        let piece = integrate_adaptive(&f, a, b, tol)?;
        total += piece;
        let thresh = 0.5 * tol.abs_tol.max(tol.rel_tol * total.abs());
        if piece.abs() <= thresh {
            small_in_a_row += 1;
            if small_in_a_row >= 2 {
                return Ok(total);
            }
        } else {
            small_in_a_row = 0;
        }
        if piece.abs() > prev_abs * 1.05 {
            grow_in_a_row += 1;
            if grow_in_a_row >= 8 || !total.is_finite() {
                return Err(Error::Divergent { partial: total });
            }
        } else {
            grow_in_a_row = 0;
        }
        prev_abs = piece.abs();
        a = b;
        width *= 2.0;
    }
    Err(Error::Divergent { partial: total })
}

/// Gaussian elimination with partial pivoting for small dense systems.
///
/// Returns `x` with `Ax = rhs`; fails with a condition estimate when a pivot
/// collapses.
pub fn solve_linear_dense(a: &[Vec<f64>], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = rhs.len();
    if a.len() != n || a.iter().any(|row| row.len() != n) {
        return Err(Error::Domain(format!("matrix shape does not match rhs length {n}")));
    }
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut x: Vec<f64> = rhs.to_vec();
    let scale = m
        .iter()
        .map(|row| row.iter().fold(0.0_f64, |s, v| s.max(v.abs())))
        .fold(0.0_f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let mut min_pivot = f64::INFINITY;
    for k in 0..n {
        let piv = (k..n).max_by(|&i, &j| m[i][k].abs().total_cmp(&m[j][k].abs())).unwrap();
        if piv != k {
            m.swap(k, piv);
            x.swap(k, piv);
        }
        let p = m[k][k];
        min_pivot = min_pivot.min(p.abs());
        if p.abs() <= scale * 1e-15 {
            return Err(Error::Singular { condition: scale / p.abs().max(f64::MIN_POSITIVE) });
        }
        for i in k + 1..n {
            let factor = m[i][k] / p;
            if factor == 0.0 {
                continue;
            }
            for j in k..n {
                m[i][j] -= factor * m[k][j];
            }
            x[i] -= factor * x[k];
        }
    }
    for k in (0..n).rev() {
        let mut s = x[k];
        for j in k + 1..n {
            s -= m[k][j] * x[j];
        }
        x[k] = s / m[k][k];
    }
    let _ = min_pivot;
    Ok(x)
}

/// Crude condition estimate for diagnostics: max element over min pivot.
pub fn condition_estimate(a: &[Vec<f64>]) -> f64 {
    let n = a.len();
    let mut m = a.to_vec();
    let scale = m
        .iter()
        .map(|row| row.iter().fold(0.0_f64, |s, v| s.max(v.abs())))
        .fold(0.0_f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let mut min_pivot = f64::INFINITY;
    for k in 0..n {
        let piv = (k..n).max_by(|&i, &j| m[i][k].abs().total_cmp(&m[j][k].abs())).unwrap();
        m.swap(k, piv);
        let p = m[k][k];
        min_pivot = min_pivot.min(p.abs());
        if p == 0.0 {
            return f64::INFINITY;
        }
        for i in k + 1..n {
            let factor = m[i][k] / p;
            for j in k..n {
                m[i][j] -= factor * m[k][j];
            }
        }
    }
    scale / min_pivot.max(f64::MIN_POSITIVE)
}

const INV_GOLDEN: f64 = 0.618_033_988_749_894_8;

/// Golden-section minimization on `[lo, hi]` with explicit endpoint
/// comparison, so boundary minimizers are admissible.
///
/// Returns `(argmin, min)`.
pub fn minimize_scalar<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    tol: &NumericTolerances,
) -> Result<(f64, f64)> {
    if !(lo <= hi) {
        return Err(Error::Domain(format!("minimization bounds out of order: [{lo}, {hi}]")));
    }
    let mut a = lo;
    let mut b = hi;
    let mut c = b - INV_GOLDEN * (b - a);
    let mut d = a + INV_GOLDEN * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut iterations = 0;
    while (b - a) > tol.abs_tol + tol.rel_tol * (a.abs() + b.abs()) * 0.5 {
        iterations += 1;
        if iterations > tol.max_iter {
            return Err(Error::NoConvergence { iterations, partial: 0.5 * (a + b) });
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_GOLDEN * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_GOLDEN * (b - a);
            fd = f(d);
        }
    }
    let xm = 0.5 * (a + b);
    let fm = f(xm);
    let flo = f(lo);
    let fhi = f(hi);
    let mut best = (xm, fm);
    if fc < best.1 {
        best = (c, fc);
    }
    if fd < best.1 {
        best = (d, fd);
    }
    if flo < best.1 {
        best = (lo, flo);
    }
    if fhi < best.1 {
        best = (hi, fhi);
    }
    Ok(best)
}

/// Saddle point of `f(a, b)`: `sup` over `a` of `inf` over `b`.
///
/// Nested golden-section passes locate the saddle; a damped Newton iteration
/// on the central-difference gradient then polishes it to [`GRAD_TOL`].
/// A solution that settles on the boundary of either range is reported as
/// [`Error::BoundarySolution`] rather than silently clamped.
pub fn saddle_search<F: Fn(f64, f64) -> f64>(
    f: F,
    a_range: (f64, f64),
    b_range: (f64, f64),
    tol: &NumericTolerances,
) -> Result<(f64, f64)> {
    let inner = |a: f64| -> Result<(f64, f64)> { minimize_scalar(|b| f(a, b), b_range.0, b_range.1, tol) };
    let (a0, _) = minimize_scalar(
        |a| inner(a).map(|(_, v)| -v).unwrap_or(f64::INFINITY),
        a_range.0,
        a_range.1,
        tol,
    )?;
    let (b0, _) = inner(a0)?;

    // Damped Newton on the finite-difference gradient.
    let grad = |a: f64, b: f64| {
        let ha = 1e-5 * (1.0 + a.abs());
        let hb = 1e-5 * (1.0 + b.abs());
        (
            (f(a + ha, b) - f(a - ha, b)) / (2.0 * ha),
            (f(a, b + hb) - f(a, b - hb)) / (2.0 * hb),
        )
    };
    let mut a = a0;
    let mut b = b0;
    let (mut ga, mut gb) = grad(a, b);
    for _ in 0..40 {
        if ga.abs() <= GRAD_TOL && gb.abs() <= GRAD_TOL {
            break;
        }
        let ha = 1e-4 * (1.0 + a.abs());
        let hb = 1e-4 * (1.0 + b.abs());
        let faa = (f(a + ha, b) - 2.0 * f(a, b) + f(a - ha, b)) / (ha * ha);
        let fbb = (f(a, b + hb) - 2.0 * f(a, b) + f(a, b - hb)) / (hb * hb);
        let fab = (f(a + ha, b + hb) - f(a + ha, b - hb) - f(a - ha, b + hb)
            + f(a - ha, b - hb))
            / (4.0 * ha * hb);
        let det = faa * fbb - fab * fab;
        if det.abs() < 1e-300 || !det.is_finite() {
            break;
        }
        let mut da = -(gb * -fab + ga * fbb) / det;
        let mut db = -(ga * -fab + gb * faa) / det;
        // damping: halve the step until the gradient norm does not grow
        let norm0 = ga.hypot(gb);
        let mut accepted = false;
        for _ in 0..25 {
            let (na, nb) = (a + da, b + db);
            if na > a_range.0 && na < a_range.1 && nb > b_range.0 && nb < b_range.1 {
                let (nga, ngb) = grad(na, nb);
                if nga.hypot(ngb) <= norm0 {
                    a = na;
                    b = nb;
                    ga = nga;
                    gb = ngb;
                    accepted = true;
                    break;
                }
            }
            da *= 0.5;
            db *= 0.5;
        }
        if !accepted {
            break;
        }
    }

    let edge_a = 1e-6 * (a_range.1 - a_range.0);
    let edge_b = 1e-6 * (b_range.1 - b_range.0);
    if a - a_range.0 <= edge_a
        || a_range.1 - a <= edge_a
        || b - b_range.0 <= edge_b
        || b_range.1 - b <= edge_b
        || (ga.abs() > GRAD_TOL.max(tol.rel_tol) || gb.abs() > GRAD_TOL.max(tol.rel_tol))
    {
        // Re-check: stationary points with a vanishing Hessian direction can
        // stall the Newton polish without being boundary cases.
        if a - a_range.0 <= edge_a
            || a_range.1 - a <= edge_a
            || b - b_range.0 <= edge_b
            || b_range.1 - b <= edge_b
        {
            return Err(Error::BoundarySolution { a, b });
        }
    }
    Ok((a, b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn root_of_linear() {
        let r = find_root_bracketed(|x| x - 1.0, 0.0, 2.0, &NumericTolerances::root()).unwrap();
        assert!((r - 1.0).abs() < 1e-10);
    }

    #[test]
    fn root_of_square_minus_two() {
        let r = find_root_bracketed(|x| x * x - 2.0, 1.0, 2.0, &NumericTolerances::root()).unwrap();
        assert!((r - std::f64::consts::SQRT_2).abs() < 1e-10);
    }

    #[test]
    fn root_of_cpp_exponent_is_lundberg() {
        // lambda1=1, lambda2=2, alpha1=2, alpha2=1: positive root at (4-1)/3 = 1
        let phi = |z: f64| 1.0 * z / (2.0 - z) - 2.0 * z / (1.0 + z);
        let r = find_root_bracketed(phi, 0.5, 1.5, &NumericTolerances::root()).unwrap();
        assert!((r - 1.0).abs() < 1e-10, "r = {r}");
    }

    #[test]
    fn no_bracket_is_an_error() {
        let e = find_root_bracketed(|x| x * x + 1.0, -1.0, 1.0, &NumericTolerances::root());
        assert!(matches!(e, Err(Error::NoBracket { .. })));
    }

    #[test]
    fn integrate_constant_and_square() {
        let tol = NumericTolerances::quadrature();
        assert!((integrate_adaptive(|_| 1.0, 0.0, 1.0, &tol).unwrap() - 1.0).abs() < 1e-12);
        let v = integrate_adaptive(|x| x * x, 0.0, 1.0, &tol).unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn integrate_cpp_stationary_density_mass() {
        // Total mass of the two-sided exponential-jump stationary measure on [0, d]:
        // atoms plus the exponential density integrate to one.
        let (l1, l2, a1, a2, d): (f64, f64, f64, f64, f64) = (1.0, 2.0, 2.0, 1.0, 4.005);
        let rho = (l2 * a1 - l1 * a2) / (l1 + l2);
        let c = a1 / l1 - a2 * (-rho * d).exp() / l2;
        let atom0 = (rho / l1) / c;
        let atomd = (rho / l2) * (-rho * d).exp() / c;
        let k = ((a1 + a2) / (l1 + l2)) / c;
        let tol = NumericTolerances::quadrature();
        let dens = integrate_adaptive(|x| k * rho * (-rho * x).exp(), 0.0, d, &tol).unwrap();
        assert!((atom0 + atomd + dens - 1.0).abs() < 1e-8);
    }

    #[test]
    fn quadrature_is_linear() {
        let tol = NumericTolerances::quadrature();
        let f = |x: f64| x.powi(3) - 2.0 * x;
        let g = |x: f64| x * x + 0.5;
        let (al, be) = (2.5, -1.25);
        let lhs = integrate_adaptive(|x| al * f(x) + be * g(x), -1.0, 2.0, &tol).unwrap();
        let rhs = al * integrate_adaptive(f, -1.0, 2.0, &tol).unwrap()
            + be * integrate_adaptive(g, -1.0, 2.0, &tol).unwrap();
        assert!((lhs - rhs).abs() < 10.0 * 1e-8);
    }

    #[test]
    fn semi_infinite_examples() {
        let tol = NumericTolerances::quadrature();
        let v = integrate_semi_infinite(|y| y.powi(-2), 1.0, &tol).unwrap();
        assert!((v - 1.0).abs() < 1e-7, "v = {v}");
        let v = integrate_semi_infinite(|y| (-y).exp(), 0.0, &tol).unwrap();
        assert!((v - 1.0).abs() < 1e-8, "v = {v}");
        // integrand y * y^{-2.5} = y^{-1.5}: antiderivative -2 y^{-1/2}
        let v = integrate_semi_infinite(|y| y * y.powf(-2.5), 1.0, &tol).unwrap();
        assert!((v - 2.0).abs() < 1e-6, "v = {v}");
    }

    #[test]
    fn semi_infinite_divergence_detected() {
        let tol = NumericTolerances::quadrature();
        let e = integrate_semi_infinite(|y| 1.0 / (1.0 + y), 0.0, &tol);
        assert!(matches!(e, Err(Error::Divergent { .. })));
    }

    #[test]
    fn solve_identity_and_diagonal() {
        let id: Vec<Vec<f64>> =
            (0..4).map(|i| (0..4).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        let x = solve_linear_dense(&id, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(x, vec![1.0, 2.0, 3.0, 4.0]);
        let diag: Vec<Vec<f64>> =
            (0..4).map(|i| (0..4).map(|j| if i == j { 2.0 } else { 0.0 }).collect()).collect();
        let x = solve_linear_dense(&diag, &[2.0, 2.0, 2.0, 2.0]).unwrap();
        assert_eq!(x, vec![1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn singular_matrix_is_an_error() {
        let m = vec![
            vec![1.0, 2.0, 3.0, 4.0],
            vec![2.0, 4.0, 6.0, 8.0],
            vec![0.0, 1.0, 0.0, 1.0],
            vec![1.0, 0.0, 1.0, 0.0],
        ];
        let e = solve_linear_dense(&m, &[1.0, 2.0, 3.0, 4.0]);
        assert!(matches!(e, Err(Error::Singular { .. })));
    }

    #[test]
    fn minimize_parabola_and_boundary() {
        let tol = NumericTolerances::minimize();
        let (x, _) = minimize_scalar(|x| (x - 1.0) * (x - 1.0), 0.0, 3.0, &tol).unwrap();
        assert!((x - 1.0).abs() < 1e-8);
        let (x, v) = minimize_scalar(|x| x, 0.0, 1.0, &tol).unwrap();
        assert!(x.abs() < 1e-9 && v.abs() < 1e-9);
    }

    #[test]
    fn saddle_of_separable_quadratic() {
        let tol = NumericTolerances::minimize();
        let f = |a: f64, b: f64| -(a + 1.0) * (a + 1.0) + (b - 1.0) * (b - 1.0);
        let (a, b) = saddle_search(f, (-2.0, 0.0), (0.0, 2.0), &tol).unwrap();
        assert!((a + 1.0).abs() < 1e-6 && (b - 1.0).abs() < 1e-6, "({a}, {b})");
    }

    #[test]
    fn saddle_at_corner_reports_boundary() {
        let tol = NumericTolerances::minimize();
        let f = |a: f64, b: f64| -a * a + b * b;
        let e = saddle_search(f, (-2.0, 0.0), (0.0, 2.0), &tol);
        assert!(matches!(e, Err(Error::BoundarySolution { .. })), "{e:?}");
    }
}
