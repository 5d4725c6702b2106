//! Discounted-regime analytics for the jump-diffusion model with running cost
//! `x^2 / 2`: the four real roots of `phi(z) = eps`, the exit-transform
//! matrix built from them, and the stopping-game payoff `M(a, b)` whose
//! saddle point gives the optimal barriers.

use crate::models::{JumpDiffusionTwoExp, LevyModel, Quotes};
use crate::numerics::{self, NumericTolerances};
use crate::{Error, Result};

/// The four real roots of `phi(z) = eps`, ordered
/// `rho2 < -alpha2 < rho1 < 0 < rho3 < alpha1 < rho4`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuarticRoots {
    pub rho1: f64,
    pub rho2: f64,
    pub rho3: f64,
    pub rho4: f64,
}

impl QuarticRoots {
    pub fn as_array(&self) -> [f64; 4] {
        [self.rho1, self.rho2, self.rho3, self.rho4]
    }

    fn check_ordering(&self, alpha1: f64, alpha2: f64) -> Result<()> {
        if self.rho2 < -alpha2
            && -alpha2 < self.rho1
            && self.rho1 < 0.0
            && 0.0 < self.rho3
            && self.rho3 < alpha1
            && alpha1 < self.rho4
        {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "root ordering violated: rho2={} < -alpha2={} < rho1={} < 0 < rho3={} < alpha1={} < rho4={}",
                self.rho2, -alpha2, self.rho1, self.rho3, alpha1, self.rho4
            )))
        }
    }
}

/// Locate the four roots of `phi(z) = eps` by bracketed search in the four
/// intervals cut out by the poles `-alpha2`, `alpha1` and the origin.
///
/// The exponent diverges to `+inf` on the inner side of each pole and grows
/// like the Gaussian term at `±inf`, so each interval brackets exactly one
/// root once the brackets are pushed close enough to the poles (inner) or far
/// enough out (outer, geometric growth from `|pole| + 1`).
pub fn roots_phi_eq_eps(model: &JumpDiffusionTwoExp, eps: f64) -> Result<QuarticRoots> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("eps must be positive (got {eps})")));
    }
    let lm = LevyModel::JumpDiffusion(*model);
    let g = |z: f64| crate::models::char_exponent(&lm, z).unwrap_or(f64::INFINITY) - eps;
    let (a1, a2) = (model.alpha1, model.alpha2);
    let tol = NumericTolerances::root();

    // The jump term blows up to +inf approaching a pole from the origin side
    // and to -inf from the outer side; shrink toward the pole until the
    // required sign shows up.
    let near_pole = |pole: f64, dir: f64, want_positive: bool| -> Result<f64> {
        let mut delta = 0.5 * (pole.abs() + 1.0);
        for _ in 0..400 {
            let z = pole + dir * delta;
            let v = g(z);
            if v.is_finite() && ((v > 0.0) == want_positive) {
                return Ok(z);
            }
            delta *= 0.5;
        }
        Err(Error::NoConvergence { iterations: 400, partial: pole })
    };
    // inner roots: g ~ -eps < 0 at the origin, +inf at the poles' inner side
    let z_neg_inner = near_pole(-a2, 1.0, true)?;
    let rho1 = numerics::find_root_bracketed(&g, z_neg_inner.min(-1e-16), -1e-16, &tol)?;
    let z_pos_inner = near_pole(a1, -1.0, true)?;
    let rho3 = numerics::find_root_bracketed(&g, 1e-16, z_pos_inner.max(1e-16), &tol)?;

    // outer roots: g < 0 just outside a pole, > 0 far out (Gaussian growth);
    // expand geometrically from |pole| + 1
    let outer_root = |pole: f64, dir: f64| -> Result<f64> {
        let start = near_pole(pole, dir, false)?;
        let mut span = pole.abs() + 1.0;
        for _ in 0..60 {
            let z = pole + dir * span;
            if g(z) > 0.0 {
                return numerics::find_root_bracketed(&g, start.min(z), start.max(z), &tol);
            }
            if span > 1e6 {
                break;
            }
            span *= 2.0;
        }
        Err(Error::NoConvergence { iterations: 60, partial: pole + dir * span })
    };
    let rho2 = outer_root(-a2, -1.0)?;
    let rho4 = outer_root(a1, 1.0)?;

    let roots = QuarticRoots { rho1, rho2, rho3, rho4 };
    roots.check_ordering(a1, a2)?;
    for r in roots.as_array() {
        if g(r).abs() <= 1e-9 {
            continue;
        }
        // A root sitting within float precision of a pole cannot satisfy an
        // absolute residual bound (the exponent is arbitrarily steep there);
        // a sign change across a few-ulp window certifies it instead.
        let h = 8.0 * f64::EPSILON * (1.0 + r.abs());
        let (gl, gr) = (g(r - h), g(r + h));
        if !(gl.is_finite() && gr.is_finite() && gl * gr <= 0.0) {
            return Err(Error::NoConvergence { iterations: tol.max_iter, partial: r });
        }
    }
    Ok(roots)
}

/// The 4x4 exit-transform matrix at barriers `a < b`.
///
/// Columns carry the roots in the order `(rho3, rho4, rho1, rho2)`; rows are
/// the plain exponentials, the `1/(alpha1 - rho)` weights, the shifted
/// exponentials, and the `1/(alpha2 + rho)` weights.
pub fn build_n_matrix(
    model: &JumpDiffusionTwoExp,
    roots: &QuarticRoots,
    a: f64,
    b: f64,
) -> Result<Vec<Vec<f64>>> {
    if !(a < b) {
        return Err(Error::Domain(format!("barriers out of order: a = {a} must be < b = {b}")));
    }
    let (a1, a2) = (model.alpha1, model.alpha2);
    let QuarticRoots { rho1, rho2, rho3, rho4 } = *roots;
    let w = a - b; // negative band width
    let e = f64::exp;
    Ok(vec![
        vec![1.0, 1.0, e(-rho1 * w), e(-rho2 * w)],
        vec![
            1.0 / (a1 - rho3),
            1.0 / (a1 - rho4),
            e(-rho1 * w) / (a1 - rho1),
            e(-rho2 * w) / (a1 - rho2),
        ],
        vec![e(rho3 * w), e(rho4 * w), 1.0, 1.0],
        vec![
            e(rho3 * w) / (a2 + rho3),
            e(rho4 * w) / (a2 + rho4),
            1.0 / (a2 + rho1),
            1.0 / (a2 + rho2),
        ],
    ])
}

/// Evaluator for the stopping-game payoff `M(a, b)` with the roots computed
/// once per `(model, eps)` and reused across barrier pairs.
#[derive(Debug, Clone)]
pub struct DynkinEvaluator {
    pub model: JumpDiffusionTwoExp,
    pub eps: f64,
    pub quotes: Quotes,
    pub roots: QuarticRoots,
}

impl DynkinEvaluator {
    pub fn new(model: JumpDiffusionTwoExp, eps: f64, quotes: Quotes) -> Result<Self> {
        let roots = roots_phi_eq_eps(&model, eps)?;
        Ok(Self { model, eps, quotes, roots })
    }

    /// `M(a, b)` for `a < 0 < b`: the value, started from zero, of the game
    /// that pays the discounted running slope `X_s` until the first barrier
    /// crossing, `-q_u` on a lower crossing and `+q_d` on an upper one.
    pub fn payoff(&self, a: f64, b: f64) -> Result<f64> {
        if !(a < 0.0 && 0.0 < b) {
            return Err(Error::Domain(format!(
                "payoff requires a < 0 < b (got a = {a}, b = {b})"
            )));
        }
        let m = &self.model;
        let eps = self.eps;
        let mu = m.mean();
        let (a1, a2) = (m.alpha1, m.alpha2);
        let (qu, qd) = (self.quotes.q_u, self.quotes.q_d);
        let n = build_n_matrix(m, &self.roots, a, b)?;
        let cond = numerics::condition_estimate(&n);
        if cond > 1e12 {
            return Err(Error::Singular { condition: cond });
        }
        let ie = 1.0 / eps;
        let ie2 = ie * ie;
        let rhs = vec![
            -ie2 * mu - ie * b + qd,
            -(ie2 * mu + ie / a1 + ie * b - qd) / a1,
            -ie2 * mu - ie * a - qu,
            -(ie2 * mu - ie / a2 + ie * a + qu) / a2,
        ];
        let x = numerics::solve_linear_dense(&n, &rhs)?;
        let QuarticRoots { rho1, rho2, rho3, rho4 } = self.roots;
        let pre = [(-rho3 * b).exp(), (-rho4 * b).exp(), (-rho1 * a).exp(), (-rho2 * a).exp()];
        let dot: f64 = pre.iter().zip(&x).map(|(p, v)| p * v).sum();
        Ok(dot + mu * ie2)
    }
}

/// One-shot payoff evaluation (computes the roots first).
pub fn dynkin_payoff_m(
    model: &JumpDiffusionTwoExp,
    eps: f64,
    quotes: &Quotes,
    a: f64,
    b: f64,
) -> Result<f64> {
    DynkinEvaluator::new(*model, eps, quotes.clone())?.payoff(a, b)
}
