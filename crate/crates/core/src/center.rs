//! Scalar center return map `psi^{m,n}_t(y) = mu0^n [lambda0^m (y + dy) + t]`
//! and the search for parameters where two itineraries share the fixed
//! point `y+`.

use std::fmt;

use thiserror::Error;

use crate::cycle::SimpleCycle;
use crate::perturbation::{retune_center, shift_family, PerturbError, UnfoldedCycle};
use crate::scalar::{int_pow, scaled_pow, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CenterError {
    #[error(
        "no parameters with |t| < {eps} and m <= {m_max}; best residual {best_residual:e} (at |t| < eps), smallest |t| {best_t:e} (at residual within tolerance)"
    )]
    NoSolution {
        eps: f64,
        m_max: usize,
        best_residual: f64,
        best_t: f64,
    },
    #[error("invalid solver input: {0}")]
    Input(String),
    #[error(transparent)]
    Perturb(#[from] PerturbError),
}

/// `psi^{m,n}_t(y)` of the unfolded model. Long words are evaluated in log
/// space.
pub fn psi<T: Scalar>(model: &UnfoldedCycle<T>, m: usize, n: usize, y: T) -> T {
    psi_raw(
        model.lambda0(),
        model.mu0(),
        model.base.delta_y(),
        model.t,
        m,
        n,
        y,
    )
}

pub(crate) fn psi_raw<T: Scalar>(lambda0: T, mu0: T, dy: T, t: T, m: usize, n: usize, y: T) -> T {
    if m + n <= 64 {
        return int_pow(mu0, n) * (int_pow(lambda0, m) * (y + dy) + t);
    }
    let a = y + dy;
    let lin = if a == T::zero() {
        T::zero()
    } else {
        let mag = (T::count(n) * mu0.ln() + T::count(m) * lambda0.ln() + a.abs().ln()).exp();
        if a < T::zero() {
            -mag
        } else {
            mag
        }
    };
    lin + scaled_pow(t, mu0, n)
}

/// Slope of `psi^{m,n}_t`, i.e. `mu0^n lambda0^m`.
pub fn psi_multiplier<T: Scalar>(model: &UnfoldedCycle<T>, m: usize, n: usize) -> T {
    if m + n <= 64 {
        int_pow(model.mu0(), n) * int_pow(model.lambda0(), m)
    } else {
        (T::count(n) * model.mu0().ln() + T::count(m) * model.lambda0().ln()).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CenterFixedPoint<T> {
    pub y: T,
    pub multiplier: T,
    pub repelling: bool,
}

/// Unique fixed point of `psi^{m,n}_t`; `None` in the neutral case.
pub fn psi_fixed_point<T: Scalar>(
    model: &UnfoldedCycle<T>,
    m: usize,
    n: usize,
) -> Option<CenterFixedPoint<T>> {
    let k = psi_multiplier(model, m, n);
    if k == T::one() || !k.is_finite() {
        return None;
    }
    // psi(y) = k y + psi(0)
    let offset = psi(model, m, n, T::zero());
    Some(CenterFixedPoint {
        y: offset / (T::one() - k),
        multiplier: k,
        repelling: k > T::one(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// `lambda0 = lambda`, `mu0 = mu`.
    Pinned,
    /// `mu0 = mu`, `lambda0` solved.
    LambdaSolve,
    /// `mu0` moved on a grid, `lambda0` solved.
    MuGrid,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Pinned => "pinned",
            Strategy::LambdaSolve => "lambda-solve",
            Strategy::MuGrid => "mu-grid",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSolution<T> {
    pub lambda0: T,
    pub mu0: T,
    pub t: T,
    pub m: usize,
    pub n: usize,
    pub nprime: usize,
    /// `psi^{m+1,n}_t(y+) - y+` and `psi^{m,n'}_t(y+) - y+`.
    pub residuals: (T, T),
    /// `mu0^{n'} lambda0^m`.
    pub expansion: T,
    pub strategy: Strategy,
}

impl<T: Scalar> ParameterSolution<T> {
    /// The retuned and unfolded model this solution lives in.
    pub fn unfold(&self, base: &SimpleCycle<T>) -> Result<UnfoldedCycle<T>, CenterError> {
        let tuned = retune_center(base, self.lambda0, self.mu0)?;
        Ok(shift_family(&tuned, self.t)?)
    }

    /// Re-checks every invariant with `psi` on the given base model.
    pub fn verify(&self, base: &SimpleCycle<T>, eps: T) -> Result<(), String> {
        let model = UnfoldedCycle::new(
            crate::perturbation::retune_unchecked(base, self.lambda0, self.mu0),
            self.t,
        );
        let y = base.y_plus;
        let r1 = psi(&model, self.m + 1, self.n, y) - y;
        let r2 = psi(&model, self.m, self.nprime, y) - y;
        let tol = T::residual_tol();
        let mut bad = Vec::new();
        if r1.abs() > tol || r2.abs() > tol {
            bad.push(format!("residuals {r1:e}, {r2:e}"));
        }
        if (self.lambda0 - base.lambda()).abs() >= eps
            || (self.mu0 - base.mu()).abs() >= eps
            || self.t.abs() >= eps
        {
            bad.push("closeness".into());
        }
        if self.n >= self.nprime {
            bad.push("n >= n'".into());
        }
        if psi_multiplier(&model, self.m, self.nprime) <= T::one() {
            bad.push("center not expanding".into());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(bad.join(", "))
        }
    }
}

struct Search<'a, T> {
    base: &'a SimpleCycle<T>,
    eps: T,
    best_residual: f64,
    best_t: f64,
}

impl<T: Scalar> Search<'_, T> {
    fn y_plus(&self) -> T {
        self.base.y_plus
    }

    /// `y- = y+ + dy`; must be negative for any solution with `n < n'`.
    fn big_y(&self) -> T {
        self.base.y_minus
    }

    /// Full candidate check; `t` comes from the second condition.
    fn try_candidate(
        &mut self,
        lambda0: T,
        mu0: T,
        m: usize,
        n: usize,
        np: usize,
        strategy: Strategy,
    ) -> Option<ParameterSolution<T>> {
        let yp = self.y_plus();
        let t = scaled_pow(yp, T::one() / mu0, np) - scaled_pow(self.big_y(), lambda0, m);
        let dy = self.base.delta_y();
        let r1 = psi_raw(lambda0, mu0, dy, t, m + 1, n, yp) - yp;
        let r2 = psi_raw(lambda0, mu0, dy, t, m, np, yp) - yp;
        let res = r1.abs().max(r2.abs());
        if t.abs() < self.eps {
            self.best_residual = self.best_residual.min(res.as_f64());
        }
        if res <= T::residual_tol() {
            self.best_t = self.best_t.min(t.abs().as_f64());
        }
        let expansion = psi_raw(lambda0, mu0, T::zero(), T::zero(), m, np, T::one());
        let ok = res <= T::residual_tol()
            && t.abs() < self.eps
            && (lambda0 - self.base.lambda()).abs() < self.eps
            && (mu0 - self.base.mu()).abs() < self.eps
            && n < np
            && expansion > T::one();
        if !ok {
            return None;
        }
        if strategy != Strategy::Pinned && retune_center(self.base, lambda0, mu0).is_err() {
            return None;
        }
        Some(ParameterSolution {
            lambda0,
            mu0,
            t,
            m,
            n,
            nprime: np,
            residuals: (r1, r2),
            expansion,
            strategy,
        })
    }

    /// `ln(y+ (mu^-n - mu^-(n+gap)))`.
    fn lhs(&self, mu0: T, n: usize, gap: usize) -> T {
        self.y_plus().ln() - T::count(n) * mu0.ln()
            + (T::one() - (-T::count(gap) * mu0.ln()).exp()).ln()
    }

    /// `ln(|Y| lambda^m (1 - lambda))`.
    fn rhs(&self, lambda0: T, m: usize) -> T {
        self.big_y().abs().ln() + T::count(m) * lambda0.ln() + (T::one() - lambda0).ln()
    }

    /// Range of `n` (for a fixed gap) whose left side lies in `[lo, hi]`.
    fn n_range(&self, mu0: T, gap: usize, lo: T, hi: T) -> (usize, usize) {
        // lhs(n) = lhs(0) - n ln mu, decreasing in n
        let l0 = self.lhs(mu0, 0, gap);
        let ln_mu = mu0.ln();
        let first = ((l0 - hi) / ln_mu).ceil().max(T::one());
        let last = ((l0 - lo) / ln_mu).floor();
        let to_usize = |v: T| v.to_usize().unwrap_or(usize::MAX);
        if last < first {
            (1, 0)
        } else {
            (to_usize(first), to_usize(last))
        }
    }

    fn pinned(&mut self, m: usize) -> Option<ParameterSolution<T>> {
        let (lambda, mu) = (self.base.lambda(), self.base.mu());
        let target = self.rhs(lambda, m);
        let slack = T::lit(1e-6);
        for gap in 1..4 * m {
            let (lo, hi) = self.n_range(mu, gap, target - slack, target + slack);
            for n in lo..=hi.min(4 * m - gap) {
                if let Some(s) = self.try_candidate(lambda, mu, m, n, n + gap, Strategy::Pinned) {
                    return Some(s);
                }
            }
        }
        None
    }

    /// Solves for `lambda0` in the eps-window at fixed `mu0`.
    fn lambda_solve(
        &mut self,
        m: usize,
        mu0: T,
        strategy: Strategy,
    ) -> Option<ParameterSolution<T>> {
        let lambda = self.base.lambda();
        let tiny = T::lit(1e-9);
        let lo = (lambda - self.eps).max(tiny);
        let hi = (lambda + self.eps).min(T::one() - tiny);
        if !(lo < hi) {
            return None;
        }
        let peak = T::count(m) / T::count(m + 1);
        let pieces: Vec<(T, T)> = if lo < peak && peak < hi {
            vec![(lo, peak), (peak, hi)]
        } else {
            vec![(lo, hi)]
        };
        for gap in 1..4 * m {
            for &(a, b) in &pieces {
                let (ra, rb) = (self.rhs(a, m), self.rhs(b, m));
                let (rlo, rhi) = (ra.min(rb), ra.max(rb));
                let (nlo, nhi) = self.n_range(mu0, gap, rlo, rhi);
                for n in nlo..=nhi.min(4 * m - gap) {
                    let target = self.lhs(mu0, n, gap);
                    let Some(lambda0) = self.bisect(m, target, a, b) else {
                        continue;
                    };
                    if let Some(s) = self.try_candidate(lambda0, mu0, m, n, n + gap, strategy) {
                        return Some(s);
                    }
                }
            }
        }
        None
    }

    /// Root of `rhs(lambda, m) = target` on a monotone piece `[a, b]`.
    fn bisect(&self, m: usize, target: T, a: T, b: T) -> Option<T> {
        let g = |l: T| self.rhs(l, m) - target;
        let (mut a, mut b) = (a, b);
        let (mut ga, gb) = (g(a), g(b));
        if ga == T::zero() {
            return Some(a);
        }
        if gb == T::zero() {
            return Some(b);
        }
        if (ga > T::zero()) == (gb > T::zero()) {
            return None;
        }
        for _ in 0..200 {
            let mid = a + (b - a) / T::lit(2.0);
            if mid <= a || mid >= b {
                break;
            }
            let gm = g(mid);
            if gm == T::zero() {
                return Some(mid);
            }
            if (gm > T::zero()) == (ga > T::zero()) {
                a = mid;
                ga = gm;
            } else {
                b = mid;
            }
        }
        Some(if g(a).abs() < g(b).abs() { a } else { b })
    }
}

/// Finds `(lambda0, mu0, t, m, n, n')` with both `psi^{m+1,n}_t(y+) = y+`
/// and `psi^{m,n'}_t(y+) = y+`, all three parameters within `eps` of
/// `(lambda, mu, 0)`, and an expanding `(m, n')` itinerary.
///
/// Strategies are tried in order (pinned, lambda-solve, mu-grid); within a
/// strategy the first hit in the order `(m, n' - n, n)` is returned.
pub fn solve_parameters<T: Scalar>(
    base: &SimpleCycle<T>,
    eps: T,
    m_max: usize,
) -> Result<ParameterSolution<T>, CenterError> {
    if !(eps > T::zero()) {
        return Err(CenterError::Input(format!(
            "eps must be positive, got {eps}"
        )));
    }
    if base.y_plus <= T::zero() || base.y_minus >= T::zero() {
        return Err(CenterError::Input("need y+ > 0 > y-".into()));
    }
    let mut search = Search {
        base,
        eps,
        best_residual: f64::INFINITY,
        best_t: f64::INFINITY,
    };
    for m in 1..=m_max {
        if let Some(s) = search.pinned(m) {
            return Ok(s);
        }
    }
    let mu = base.mu();
    for m in 1..=m_max {
        if let Some(s) = search.lambda_solve(m, mu, Strategy::LambdaSolve) {
            return Ok(s);
        }
    }
    for m in 1..=m_max {
        for k in [-7i32, -6, -5, -4, -3, -2, -1, 1, 2, 3, 4, 5, 6, 7] {
            let mu0 = mu + eps * T::lit(f64::from(k) / 8.0);
            if mu0 <= T::one() {
                continue;
            }
            if let Some(s) = search.lambda_solve(m, mu0, Strategy::MuGrid) {
                return Ok(s);
            }
        }
    }
    Err(CenterError::NoSolution {
        eps: eps.as_f64(),
        m_max,
        best_residual: search.best_residual,
        best_t: search.best_t,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perturbation::UnfoldedCycle;

    fn reference(t: f64) -> UnfoldedCycle<f64> {
        UnfoldedCycle::new(SimpleCycle::reference(), t)
    }

    #[test]
    fn psi_examples() {
        assert_eq!(psi(&reference(0.0), 0, 0, 0.3), 0.3 - 2.0);
        assert!((psi(&reference(0.1), 2, 1, 1.0) + 0.3).abs() < 1e-15);
        let t = 3.0 * 2f64.powi(-11);
        assert_eq!(psi(&reference(t), 11, 10, 1.0), 1.0);
    }

    #[test]
    fn log_space_branch_agrees_with_direct() {
        let u = reference(0.01);
        let direct = 2f64.powi(40) * (0.5f64.powi(30) * (0.3 - 2.0) + 0.01);
        let logged = psi(&u, 30, 40, 0.3);
        assert!((direct - logged).abs() <= 1e-12 * direct.abs());
    }

    #[test]
    fn fixed_points() {
        let fp = psi_fixed_point(&reference(0.1), 2, 1).unwrap();
        assert!((fp.y + 1.6).abs() < 1e-14);
        assert!(!fp.repelling);
        assert!(psi_fixed_point(&reference(0.0), 1, 1).is_none());
        let fp = psi_fixed_point(&reference(0.0), 3, 1).unwrap();
        let k = 0.25;
        assert!((fp.y - k * -2.0 / (1.0 - k)).abs() < 1e-15);
    }

    #[test]
    fn reference_solution_is_closed_form() {
        let base = SimpleCycle::<f64>::reference();
        let s = solve_parameters(&base, 0.01, 50).unwrap();
        assert_eq!((s.m, s.n, s.nprime), (8, 8, 9));
        assert_eq!((s.lambda0, s.mu0, s.strategy), (0.5, 2.0, Strategy::Pinned));
        assert_eq!(s.t, 3.0 * 2f64.powi(-9));
        assert_eq!(s.residuals, (0.0, 0.0));
        assert_eq!(s.expansion, 2.0);
        s.verify(&base, 0.01).unwrap();
    }

    #[test]
    fn budget_too_small_fails_explicitly() {
        let base = SimpleCycle::<f64>::reference();
        match solve_parameters(&base, 0.01, 2) {
            Err(CenterError::NoSolution { m_max, best_t, .. }) => {
                assert_eq!(m_max, 2);
                assert!(best_t.is_finite() && best_t >= 0.01, "{best_t}");
            }
            other => panic!("expected failure, got {other:?}"),
        }
    }

    #[test]
    fn huge_eps_still_has_tiny_residuals() {
        let base = SimpleCycle::<f64>::reference();
        let s = solve_parameters(&base, 10.0, 10).unwrap();
        assert!(s.residuals.0.abs() <= 1e-10 && s.residuals.1.abs() <= 1e-10);
        s.verify(&base, 10.0).unwrap();
    }
}
