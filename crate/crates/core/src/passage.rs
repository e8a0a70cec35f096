//! Joint law of the first upward passage time of a level `y` from 0 and the
//! number of claims by then, including the no-claim atom at `t = y/c` and
//! the Laplace-transform identity used as its correctness oracle.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{
    ln_factorial, poisson_tail, solve_lundberg, AtomDensity, ClaimDistribution, DensityPart,
    ModelParams,
};
use crate::numerics::simpson;

/// Density in `t` of reaching a level `y` above the start for the first time
/// with exactly `k >= 1` claims on the way, under premium rate `c`:
/// `lambda^k / k! * y * t^{k-1} * e^{-lambda t} * f^{k*}(ct - y)` on
/// `t > y/c`. At `t = y/c` the right-limit is returned (nonzero for `k = 1`
/// when the claim density does not vanish at 0), which is what one-sided
/// quadratures over the support need. Shared by every first-passage
/// computation in the crate.
pub(crate) fn upcross_density(
    lambda: f64,
    c: f64,
    claims: &ClaimDistribution,
    y: f64,
    k: usize,
    t: f64,
) -> f64 {
    if k == 0 || y <= 0.0 || t < y / c || t <= 0.0 {
        return 0.0;
    }
    let kf = k as f64;
    let weight = (kf * lambda.ln() - ln_factorial(k) + (kf - 1.0) * t.ln() - lambda * t).exp();
    weight * y * claims.conv_density(k, c * t - y)
}

/// Law of `(tau_y^+, N_{tau_y^+})`: the first time the surplus started at 0
/// reaches level `y`, jointly with the claim count by then. The `k = 0`
/// branch is an atom at `y/c` of mass `e^{-lambda y / c}`; every `k >= 1`
/// branch is a density supported on `t > y/c`.
#[derive(Debug, Clone)]
pub struct PassageLaw {
    params: ModelParams,
    y: f64,
}

impl PassageLaw {
    pub fn new(params: &ModelParams, y: f64) -> Result<Self> {
        if !(y >= 0.0) || !y.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "passage level y = {y} must be >= 0"
            )));
        }
        Ok(PassageLaw {
            params: params.clone(),
            y,
        })
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    /// The no-claim branch: deterministic crossing at `y/c`, reached with
    /// probability `e^{-lambda y / c}`.
    pub fn atom(&self) -> (f64, f64) {
        let t = self.y / self.params.c;
        (t, (-self.params.lambda * t).exp())
    }

    /// Density of reaching the level at time `t` with exactly `k` claims:
    /// `lambda^k / k! * y * t^{k-1} * e^{-lambda t} * f^{k*}(ct - y)` for
    /// `t > y/c`, and 0 otherwise. `k = 0` has no continuous part.
    pub fn v_density(&self, k: usize, t: f64) -> f64 {
        upcross_density(
            self.params.lambda,
            self.params.c,
            &self.params.claims,
            self.y,
            k,
            t,
        )
    }

    /// Full branch-`k` law as atoms plus continuous part.
    pub fn law(&self, k: usize) -> Result<AtomDensity> {
        if k == 0 {
            let (t, mass) = self.atom();
            return AtomDensity::pure_atom(t, mass);
        }
        let this = self.clone();
        AtomDensity::new(
            Vec::new(),
            DensityPart::Func(Arc::new(move |t| this.v_density(k, t))),
        )
    }

    /// Discounted, claim-weighted total mass
    /// `atom * r^0 e^{-delta y/c} + sum_k r^k  integral e^{-delta t} v(k, t) dt`,
    /// truncated with certified bounds. `delta = 0, r = 1` gives the plain
    /// normalization (1 under the net profit condition).
    fn weighted_mass(&self, delta: f64, r: f64, tol: f64) -> Result<f64> {
        if self.y == 0.0 {
            return Ok(1.0);
        }
        let horizon = self.certified_horizon(delta, tol)?;
        let k_max = self.certified_claim_count(r, horizon, tol)?;
        let (t_atom, atom_mass) = self.atom();
        let mut acc = atom_mass * (-delta * t_atom).exp() /* r^0 */;
        for k in 1..=k_max {
            let rk = r.powi(k as i32);
            if rk == 0.0 {
                break;
            }
            acc += rk * self.branch_integral(k, delta, horizon);
        }
        Ok(acc)
    }

    /// Discounted mass of branch `k >= 1` up to `horizon`: the branch is a
    /// bump near `t_min + k * mean_gap`, so panels concentrate there and the
    /// far tail is swept coarsely.
    fn branch_integral(&self, k: usize, delta: f64, horizon: f64) -> f64 {
        let t_min = self.y / self.params.c;
        let mean_gap = self.params.claims.mean() / self.params.c + 1.0 / self.params.lambda;
        let f = |t: f64| (-delta * t).exp() * self.v_density(k, t);
        let kf = k as f64;
        let bump_end = (t_min + (kf + 12.0 * kf.sqrt() + 4.0) * mean_gap).min(horizon);
        let mut mass = simpson(f, t_min, bump_end, 4_000);
        if bump_end < horizon {
            mass += simpson(f, bump_end, horizon, 2_000);
        }
        mass
    }

    /// Probability that the level is first reached with exactly `k` claims:
    /// the crossing atom for `k = 0`, otherwise the integral of
    /// [`PassageLaw::v_density`] over a certified horizon.
    pub fn branch_mass(&self, k: usize) -> Result<f64> {
        if self.y == 0.0 {
            return Ok(if k == 0 { 1.0 } else { 0.0 });
        }
        if k == 0 {
            return Ok(self.atom().1);
        }
        let horizon = self.certified_horizon(0.0, 1e-12)?;
        Ok(self.branch_integral(k, 0.0, horizon))
    }

    /// Horizon T with `P(passage > T) <= e^{theta y} e^{-rate(theta) T}`
    /// below `tol`; `rate(theta) = theta c - lambda (E e^{theta X} - 1)` is
    /// maximized over a small grid of `theta` with `E e^{theta X}` finite.
    fn certified_horizon(&self, delta: f64, tol: f64) -> Result<f64> {
        let (lambda, c) = (self.params.lambda, self.params.c);
        let y = self.y;
        // exponential moment E e^{theta X} by closed form or table
        let mgf = |theta: f64| -> Option<f64> {
            match self.params.claims.exp_rate() {
                Some(mu) => {
                    if theta < mu {
                        Some(mu / (mu - theta))
                    } else {
                        None
                    }
                }
                None => {
                    // laplace(-theta); finite because the table is bounded
                    self.params.claims.laplace(-theta).ok()
                }
            }
        };
        let mut best_rate = delta; // discounting alone already decays
        let mut best_theta = 0.0;
        for i in 1..200 {
            let theta = i as f64 * 0.01;
            match mgf(theta) {
                Some(m) if m.is_finite() => {
                    let rate = theta * c - lambda * (m - 1.0) + delta;
                    if rate > best_rate {
                        best_rate = rate;
                        best_theta = theta;
                    }
                }
                _ => break,
            }
        }
        if best_rate <= 0.0 {
            return Err(Error::Truncation(
                "no exponential decay rate certifies the passage-time tail".into(),
            ));
        }
        // e^{theta y} e^{-rate T} <= tol
        let t = (best_theta * y - tol.ln()) / best_rate;
        Ok(t.max(2.0 * y / c + 1.0))
    }

    /// Claim-count cutoff K with `sum_{k>K} r^k  integral_0^T v <= r^K P(N_T > K)`
    /// below `tol` (each branch mass is at most the probability of that many
    /// arrivals by T).
    fn certified_claim_count(&self, r: f64, horizon: f64, tol: f64) -> Result<usize> {
        let mean = self.params.lambda * horizon;
        let mut k = mean.ceil() as usize + 5;
        for _ in 0..200 {
            let bound = r.powi(k as i32) * poisson_tail(k, mean);
            if bound < tol {
                return Ok(k);
            }
            k += (mean.sqrt().ceil() as usize).max(8);
        }
        Err(Error::Truncation(format!(
            "claim-count series tail cannot be certified below {tol}"
        )))
    }

    /// Total passage probability by any time:
    /// `e^{-lambda y/c} + sum_k integral v(k, t) dt`; equals 1 under the net
    /// profit condition.
    pub fn total_mass(&self, tail_tol: f64) -> Result<f64> {
        self.weighted_mass(0.0, 1.0, tail_tol)
    }

    /// Both sides of the transform identity: the numerically integrated
    /// `lhs = integral e^{-delta t} sum_k r^k v_y(k, dt)` and the closed form
    /// `rhs = e^{-rho y}` with `rho` the nonnegative fundamental root.
    pub fn transform_check(&self, delta: f64, r: f64) -> Result<(f64, f64)> {
        if !(delta > 0.0 || r < 1.0) {
            // delta = 0, r = 1 is the plain normalization; both sides are 1
            // but the k-sum margins are thinner, so keep the precondition.
            let lhs = self.total_mass(1e-10)?;
            return Ok((lhs, 1.0));
        }
        let rho = solve_lundberg(
            &self.params.claims,
            self.params.c,
            self.params.lambda,
            delta,
            r,
        )?;
        let lhs = self.weighted_mass(delta, r, 1e-10)?;
        Ok((lhs, (-rho * self.y).exp()))
    }
}
