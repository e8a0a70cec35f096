//! Joint density of the number of claims until classical ruin, the ruin
//! time, and the deficit at ruin — the building block of the delay recursion.

use crate::error::{Error, Result};
use crate::model::{ln_factorial, poisson_pmf, ClaimDistribution, ModelParams};
use crate::numerics::Tolerance;

/// How the joint density is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalStrategy {
    /// Exponential-claims closed forms.
    ClosedForm,
    /// Direct quadrature of the defining integrals (any claim law).
    Quadrature,
}

/// Evaluator for `w_u(k, t, y)`, the joint density of ruin at time `t` with
/// `k` claims and deficit `y`, plus its time marginal `w_u(k, y)`.
#[derive(Debug, Clone)]
pub struct ClassicalRuinDensity {
    params: ModelParams,
    strategy: EvalStrategy,
    tol: Tolerance,
}

/// Trapezoid refinement with node reuse: doubles the panel count until two
/// refinements agree to `rel_tol`, then Richardson-extrapolates. Smooth
/// integrands only.
fn refined_trapezoid<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    start_panels: usize,
    rel_tol: f64,
) -> f64 {
    if b <= a {
        return 0.0;
    }
    let mut n = start_panels.max(16);
    let mut h = (b - a) / n as f64;
    let mut acc = 0.5 * (f(a) + f(b));
    for i in 1..n {
        acc += f(a + i as f64 * h);
    }
    let mut prev = acc * h;
    for _ in 0..6 {
        // add midpoints of the current panels
        let mut mid = 0.0;
        for i in 0..n {
            mid += f(a + (i as f64 + 0.5) * h);
        }
        let cur = 0.5 * prev + 0.5 * h * mid;
        n *= 2;
        h *= 0.5;
        if (cur - prev).abs() <= rel_tol * cur.abs() + f64::MIN_POSITIVE {
            return cur + (cur - prev) / 3.0;
        }
        prev = cur;
    }
    prev
}

impl ClassicalRuinDensity {
    /// Picks the closed form for exponential claims, quadrature otherwise.
    pub fn new(params: ModelParams) -> Self {
        let strategy = if params.claims.is_exponential() {
            EvalStrategy::ClosedForm
        } else {
            EvalStrategy::Quadrature
        };
        ClassicalRuinDensity {
            params,
            strategy,
            tol: Tolerance::default(),
        }
    }

    /// Forces a strategy; `ClosedForm` is only available for exponential
    /// claims. Quadrature on exponential claims is the cross-validation path.
    pub fn with_strategy(params: ModelParams, strategy: EvalStrategy) -> Result<Self> {
        if strategy == EvalStrategy::ClosedForm && !params.claims.is_exponential() {
            return Err(Error::InvalidParameter(
                "closed-form evaluation requires exponential claims".into(),
            ));
        }
        Ok(ClassicalRuinDensity {
            params,
            strategy,
            tol: Tolerance::default(),
        })
    }

    pub fn with_tolerance(mut self, tol: Tolerance) -> Self {
        self.tol = tol;
        self
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn strategy(&self) -> EvalStrategy {
        self.strategy
    }

    fn dist(&self) -> &ClaimDistribution {
        &self.params.claims
    }

    /// Time factor of the exponential closed form:
    /// `w_u(k,t,y) = g_coef(u,k,t) * exp(-mu*y)`.
    pub(crate) fn g_coef(&self, u: f64, k: usize, t: f64) -> f64 {
        let mu = self
            .dist()
            .exp_rate()
            .expect("closed form needs exponential claims");
        let (lambda, c) = (self.params.lambda, self.params.c);
        let beta = lambda + mu * c;
        if t < 0.0 || k == 0 {
            return 0.0;
        }
        if k == 1 {
            return lambda * mu * (-beta * t - mu * u).exp();
        }
        if t == 0.0 {
            return 0.0;
        }
        let kf = k as f64;
        let ln = kf * (lambda.ln() + mu.ln())
            + (kf * u + c * t).ln()
            + (kf - 2.0) * (u + c * t).ln()
            + (kf - 1.0) * t.ln()
            - beta * t
            - mu * u
            - ln_factorial(k)
            - ln_factorial(k - 1);
        ln.exp()
    }

    /// Time-marginal factor of the exponential closed form:
    /// `w_u(k,y) = i_coef(u,k) * exp(-mu*y)`. All terms of the binomial
    /// expansion of `(u+ct)^{k-2}` are positive, so the sum is stable.
    pub(crate) fn i_coef(&self, u: f64, k: usize) -> f64 {
        let mu = self
            .dist()
            .exp_rate()
            .expect("closed form needs exponential claims");
        let (lambda, c) = (self.params.lambda, self.params.c);
        let beta = lambda + mu * c;
        if k == 0 {
            return 0.0;
        }
        if k == 1 {
            return lambda * mu * (-mu * u).exp() / beta;
        }
        let kf = k as f64;
        let ln_pref = kf * (lambda.ln() + mu.ln()) - mu * u - ln_factorial(k) - ln_factorial(k - 1);
        if u == 0.0 {
            // only the j = k-2 term of the expansion survives
            let ln = ln_pref + (kf - 1.0) * c.ln() + ln_factorial(2 * k - 2)
                - (2.0 * kf - 1.0) * beta.ln();
            return ln.exp();
        }
        // sum_j C(k-2,j) u^{k-2-j} c^j [ k u Gamma(k+j) / beta^{k+j}
        //                               + c Gamma(k+j+1) / beta^{k+j+1} ]
        let mut ln_terms = Vec::with_capacity(2 * (k - 1));
        for j in 0..=(k - 2) {
            let jf = j as f64;
            let ln_c_kj = ln_factorial(k - 2) - ln_factorial(j) - ln_factorial(k - 2 - j);
            let common = ln_pref + ln_c_kj + (kf - 2.0 - jf) * u.ln() + jf * c.ln();
            ln_terms.push(common + (kf * u).ln() + ln_gamma_usize(k + j) - (kf + jf) * beta.ln());
            ln_terms
                .push(common + c.ln() + ln_gamma_usize(k + j + 1) - (kf + jf + 1.0) * beta.ln());
        }
        log_sum_exp(&ln_terms)
    }

    /// Joint density from zero initial reserve.
    pub fn w0(&self, k: usize, t: f64, y: f64) -> f64 {
        self.wu(0.0, k, t, y)
    }

    /// Joint density from reserve `u`.
    pub fn wu(&self, u: f64, k: usize, t: f64, y: f64) -> f64 {
        if k == 0 || t < 0.0 || y < 0.0 {
            return 0.0;
        }
        match self.strategy {
            EvalStrategy::ClosedForm => {
                let mu = self.dist().exp_rate().unwrap();
                self.g_coef(u, k, t) * (-mu * y).exp()
            }
            EvalStrategy::Quadrature => self.wu_quadrature(u, k, t, y),
        }
    }

    fn wu_quadrature(&self, u: f64, k: usize, t: f64, y: f64) -> f64 {
        let (lambda, c) = (self.params.lambda, self.params.c);
        let dist = self.dist();
        let rel = (self.tol.rel * 1e-2).max(1e-12);
        // first term: k-th claim at t causes the ruin directly
        let reach = u + c * t;
        let direct = if k == 1 {
            // zero-fold convolution is the atom at 0: the integrand sifts to
            // x = u + c t (for u = 0 the x/(ct) weight is 1 there)
            lambda * (-lambda * t).exp() * dist.pdf(reach + y)
        } else {
            let arrivals = lambda * poisson_pmf(k - 1, lambda * t);
            let integrand = |x: f64| {
                let base = dist.conv_density(k - 1, reach - x) * dist.pdf(x + y);
                if u == 0.0 {
                    base * x / (c * t)
                } else {
                    base
                }
            };
            arrivals * refined_trapezoid(&integrand, 0.0, reach, 200, rel)
        };
        if u == 0.0 || k == 1 {
            return direct;
        }
        // correction: paths whose surplus returned to the diagonal before t
        let mut correction = 0.0;
        for j in 1..k {
            let inner = |s: f64| {
                if s <= 0.0 {
                    return 0.0;
                }
                poisson_pmf(j, lambda * s)
                    * dist.conv_density(j, u + c * s)
                    * self.wu_quadrature(0.0, k - j, t - s, y)
            };
            correction += refined_trapezoid(&inner, 0.0, t, 128, rel.max(1e-9));
        }
        direct - c * correction
    }

    /// Time marginal `w_u(k, y) = integral of w_u(k, t, y) over t`.
    pub fn wu_marginal(&self, u: f64, k: usize, y: f64) -> Result<f64> {
        if k == 0 {
            return Ok(0.0);
        }
        match self.strategy {
            EvalStrategy::ClosedForm => {
                let mu = self.dist().exp_rate().unwrap();
                Ok(self.i_coef(u, k) * (-mu * y).exp())
            }
            EvalStrategy::Quadrature => {
                let t_max = self.certified_time_horizon(k)?;
                Ok(refined_trapezoid(
                    &|t| self.wu_quadrature(u, k, t, y),
                    0.0,
                    t_max,
                    256,
                    (self.tol.rel * 0.1).max(1e-10),
                ))
            }
        }
    }

    /// Smallest horizon where the rigorous envelope
    /// `w_u(k,t,y) <= lambda * pois(k-1, lambda t) * sup f` (the k-th arrival
    /// density times the largest deficit density) certifies remaining mass
    /// below `tol.tail_mass`.
    fn certified_time_horizon(&self, k: usize) -> Result<f64> {
        let lambda = self.params.lambda;
        let sup_f = self.dist().sup_pdf();
        let mut t = (k as f64 + 10.0 * (k as f64).sqrt() + 10.0) / lambda;
        for _ in 0..60 {
            // tail of the k-th arrival time (Erlang(k, lambda)) at t
            let mut erlang_tail = 0.0;
            let mut term = (-lambda * t).exp();
            for j in 0..k {
                erlang_tail += term;
                term *= lambda * t / (j as f64 + 1.0);
            }
            if sup_f * erlang_tail < self.tol.tail_mass {
                return Ok(t);
            }
            t *= 2.0;
        }
        Err(Error::Truncation(format!(
            "cannot certify time tail below {} for k = {k}",
            self.tol.tail_mass
        )))
    }

    /// `P(N at classical ruin = k, ruin happens)`, i.e. the double integral
    /// of the joint density over time and deficit.
    pub fn ruin_mass(&self, u: f64, k: usize) -> Result<f64> {
        if k == 0 {
            return Ok(0.0);
        }
        match self.strategy {
            EvalStrategy::ClosedForm => {
                let mu = self.dist().exp_rate().unwrap();
                Ok(self.i_coef(u, k) / mu)
            }
            EvalStrategy::Quadrature => {
                // deficit tail: w_u(k, y) <= lambda * sup f^{k..} * tail of f
                // beyond y; truncate where the claim tail is negligible
                let mut y_max = 10.0 * self.dist().mean();
                for _ in 0..60 {
                    if self.params.lambda * self.dist().tail(y_max) < self.tol.tail_mass {
                        break;
                    }
                    y_max *= 2.0;
                }
                Ok(refined_trapezoid(
                    &|y| self.wu_marginal(u, k, y).unwrap_or(0.0),
                    0.0,
                    y_max,
                    64,
                    (self.tol.rel * 0.1).max(1e-8),
                ))
            }
        }
    }

    /// Partial classical-ruin mass `sum_{k<=k_max} ruin_mass(u, k)`.
    pub fn ruin_mass_partial(&self, u: f64, k_max: usize) -> Result<f64> {
        let mut acc = 0.0;
        for k in 1..=k_max {
            acc += self.ruin_mass(u, k)?;
        }
        Ok(acc)
    }

    /// Classical ruin probability in closed form (exponential claims only):
    /// `(lambda / (c mu)) exp(-(mu - lambda/c) u)`.
    pub fn ruin_probability(&self, u: f64) -> Option<f64> {
        let mu = self.dist().exp_rate()?;
        let (lambda, c) = (self.params.lambda, self.params.c);
        Some(lambda / (c * mu) * (-(mu - lambda / c) * u).exp())
    }

    /// Sums `ruin_mass(0, k)` until the added term is negligible; for
    /// exponential claims the terms follow a Catalan-number recurrence and
    /// the limit is the classical ruin probability from zero.
    pub fn total_ruin_mass_from_zero(&self) -> Result<f64> {
        let mu = self.dist().exp_rate().ok_or_else(|| {
            Error::InvalidParameter("series summation needs exponential claims".into())
        })?;
        let (lambda, c) = (self.params.lambda, self.params.c);
        let beta = lambda + mu * c;
        // term_k = I_k(0)/mu; ratio term_{k+1}/term_k = 2(2k-1)/(k+1) *
        // lambda mu c / beta^2
        let mut term = self.i_coef(0.0, 1) / mu;
        let mut acc = 0.0;
        let mut k = 1usize;
        while term > acc * 1e-16 + 1e-300 {
            acc += term;
            let kf = k as f64;
            term *= 2.0 * (2.0 * kf - 1.0) / (kf + 1.0) * lambda * mu * c / (beta * beta);
            k += 1;
            if k > 100_000 {
                return Err(Error::Truncation("Catalan series did not converge".into()));
            }
        }
        Ok(acc)
    }
}

fn ln_gamma_usize(n: usize) -> f64 {
    ln_factorial(n - 1)
}

fn log_sum_exp(ln_terms: &[f64]) -> f64 {
    let m = ln_terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return 0.0;
    }
    let s: f64 = ln_terms.iter().map(|&l| (l - m).exp()).sum();
    (m + s.ln()).exp()
}
