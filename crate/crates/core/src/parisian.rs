//! Joint law of the ruin time under a delay-`d` ruin rule and the number of
//! claims at ruin.
//!
//! Ruin is declared once the surplus has stayed strictly below zero for a
//! full window of length `d`; the ruin instant is the window's end. The
//! solver computes, for each claim count `n`, the defective density
//! `w(n, t)` of ruin at time `t` with `n` claims, its running integral, the
//! total probability `p(n)`, and a deficit-extended variant `w(n, t, x)`.
//!
//! The decomposition behind every quantity: either the first excursion below
//! zero is fatal (it reaches length `d`), or it ends early at an up-crossing
//! and the process restarts from level zero. Fatal first excursions give a
//! closed "first excursion" term; early recoveries give a renewal
//! convolution of a completed-excursion density against the level-zero
//! solution of lower claim order, which makes the recursion explicit in `n`.

use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma_lr;

use crate::classical::ClassicalRuinDensity;
use crate::error::{Error, Result};
use crate::model::{ln_factorial, poisson_pmf, ModelParams};
use crate::numerics::{richardson, simpson, DensityGrid, QuadRule, Tolerance};
use crate::passage::upcross_density;

/// Values above this (negative) threshold are clamped to zero when grids are
/// assembled; anything below it is reported as an error.
const NEGATIVE_CLAMP: f64 = -1e-12;

/// Target for the neglected time tail when the grid horizon is defaulted.
const GRID_TAIL_TARGET: f64 = 1e-8;

/// Half-panel counts for the fixed Simpson quadratures of the setup
/// coefficients and pointwise renewal evaluations. The window coefficients
/// are computed once per solver and feed every density value, so they get
/// the densest rule.
const HP_WINDOW: usize = 512;
const HP_UPCROSS: usize = 48;
const HP_RENEWAL: usize = 64;

/// Discretization profile.
///
/// `PaperFaithful` reproduces the published reference tables: coarse step,
/// right-rectangle sums everywhere (which biases cumulative values low by
/// roughly one step's worth of density). `Accurate` uses a fine step,
/// trapezoid sums seeded with exact right-limits at `t = d`, and one
/// Richardson extrapolation for cumulative values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    PaperFaithful,
    Accurate,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::PaperFaithful => "paper-faithful",
            Mode::Accurate => "accurate",
        }
    }

    fn rule(&self) -> QuadRule {
        match self {
            Mode::PaperFaithful => QuadRule::RightRectangle,
            Mode::Accurate => QuadRule::Trapezoid,
        }
    }

    fn default_step(&self) -> f64 {
        match self {
            Mode::PaperFaithful => 0.1,
            Mode::Accurate => 0.0125,
        }
    }
}

/// Solver configuration. `t_max`/`step` default per mode and claim kind.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub mode: Mode,
    /// Largest claim count solved for.
    pub n_max: usize,
    /// Grid horizon; defaults to `d` plus a span certified by the one-claim
    /// overshoot envelope.
    pub t_max: Option<f64>,
    /// Grid step; defaults to 0.1 (paper-faithful) or 0.0125 (accurate),
    /// coarsened to 0.05 for tabulated claims.
    pub step: Option<f64>,
    pub tol: Tolerance,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            mode: Mode::Accurate,
            n_max: 20,
            t_max: None,
            step: None,
            tol: Tolerance::default(),
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<()> {
        if self.n_max == 0 || self.n_max > 64 {
            return Err(Error::InvalidParameter(format!(
                "n_max = {} must lie in 1..=64",
                self.n_max
            )));
        }
        if let Some(s) = self.step {
            if !(s > 0.0) || !s.is_finite() {
                return Err(Error::InvalidParameter(format!("step = {s} must be > 0")));
            }
        }
        if let Some(t) = self.t_max {
            if !t.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "t_max = {t} must be finite"
                )));
            }
        }
        self.tol.validate()
    }
}

#[derive(Debug, Clone, Copy)]
struct Geometry {
    step: f64,
    t_max: f64,
    cells: usize,
}

/// Closed-form setup coefficients available for exponential claims.
///
/// `a[k]` is the exponentially weighted probability that an excursion
/// entered with deficit `y ~ e^{-mu y} dy` survives the whole window with
/// exactly `k` claims inside it; `j[k]` is its `y < cd` part, where an early
/// up-crossing is possible; `q[k]` is the total mass of the
/// completed-excursion kernel `nu_k`.
#[derive(Debug, Clone)]
struct ExpCoeffs {
    mu: f64,
    beta: f64,
    a: Vec<f64>,
    /// Kept alongside `a` for diagnostics; exercised by the unit tests.
    #[cfg_attr(not(test), allow(dead_code))]
    j: Vec<f64>,
    q: Vec<f64>,
}

/// Tabulated-claims working tables: the classical joint ruin densities
/// `W(k, t, y)` on a shared `(t, y)` lattice with `y`-step equal to
/// `c * step` so that up-crossing shifts stay on the lattice, plus the
/// window-survival kernel sampled on the `y` lattice.
struct TabTables {
    step: f64,
    cells: usize,
    ystep: f64,
    ny: usize,
    /// `[k-1][l * (ny+1) + iy]`, row `l = 0` holding the `t -> 0` limit.
    w0: Vec<Vec<f64>>,
    wu: Option<Vec<Vec<f64>>>,
    /// `skern[k-1][iy]` = window-survival probability with `k` claims.
    skern: Vec<Vec<f64>>,
}

impl TabTables {
    fn idx(&self, l: usize, iy: usize) -> usize {
        l * (self.ny + 1) + iy
    }

    fn level(&self, at_u: bool) -> &[Vec<f64>] {
        match (&self.wu, at_u) {
            (Some(w), true) => w,
            _ => &self.w0,
        }
    }

    fn at(&self, at_u: bool, k: usize, l: usize, iy: usize) -> f64 {
        self.level(at_u)[k - 1][self.idx(l, iy)]
    }

    /// Linear interpolation across rows at time-lag `lag`.
    fn at_lag(&self, at_u: bool, k: usize, lag: f64, iy: usize) -> f64 {
        let pos = (lag / self.step).clamp(0.0, self.cells as f64);
        let l0 = pos.floor() as usize;
        if l0 >= self.cells {
            return self.at(at_u, k, self.cells, iy);
        }
        let frac = pos - l0 as f64;
        (1.0 - frac) * self.at(at_u, k, l0, iy) + frac * self.at(at_u, k, l0 + 1, iy)
    }

    /// Bilinear interpolation in `(lag, y)`.
    fn at_lag_y(&self, at_u: bool, k: usize, lag: f64, y: f64) -> f64 {
        let posy = y / self.ystep;
        if posy < 0.0 || posy > self.ny as f64 {
            return 0.0;
        }
        let iy0 = (posy.floor() as usize).min(self.ny - 1);
        let fy = posy - iy0 as f64;
        (1.0 - fy) * self.at_lag(at_u, k, lag, iy0) + fy * self.at_lag(at_u, k, lag, iy0 + 1)
    }
}

/// Probability of ruin carrying exactly `n` claims, from level zero and from
/// the configured initial surplus.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityTable {
    pub from_zero: Vec<f64>,
    pub from_u: Vec<f64>,
}

/// Probability, given an excursion entered with deficit `y`, that the
/// surplus stays below zero through the whole window of length `d` while
/// exactly `k` claims arrive inside it. Inclusion–exclusion over the first
/// up-crossing; exact for any claim law.
fn stay_below_kernel(p: &ModelParams, k: usize, y: f64) -> f64 {
    let (lambda, c, d) = (p.lambda, p.c, p.d);
    if y <= 0.0 {
        // entering at the boundary recovers immediately
        return 0.0;
    }
    let claims = &p.claims;
    let mut b = poisson_pmf(k, lambda * d) * claims.conv_tail(k, c * d - y);
    if y < c * d {
        let s0 = y / c;
        b -= (-lambda * s0).exp()
            * poisson_pmf(k, lambda * (d - s0))
            * claims.conv_tail(k, c * (d - s0));
        for m in 1..k {
            b -= simpson(
                |s| {
                    upcross_density(lambda, c, claims, y, m, s)
                        * poisson_pmf(k - m, lambda * (d - s))
                        * claims.conv_tail(k - m, c * (d - s))
                },
                s0,
                d,
                HP_UPCROSS,
            );
        }
    }
    b
}

/// Density in the window-end deficit `x` of the event underlying
/// [`stay_below_kernel`], continuous part only (`k = 0` carries an atom at
/// `y = cd + x` that callers sift analytically).
fn stay_below_end_deficit_kernel(p: &ModelParams, k: usize, y: f64, x: f64) -> f64 {
    let (lambda, c, d) = (p.lambda, p.c, p.d);
    if y <= 0.0 {
        return 0.0;
    }
    let claims = &p.claims;
    let mut b = poisson_pmf(k, lambda * d) * claims.conv_density(k, x + c * d - y);
    if y < c * d {
        let s0 = y / c;
        b -= (-lambda * s0).exp()
            * poisson_pmf(k, lambda * (d - s0))
            * claims.conv_density(k, x + c * (d - s0));
        for m in 1..k {
            b -= simpson(
                |s| {
                    upcross_density(lambda, c, claims, y, m, s)
                        * poisson_pmf(k - m, lambda * (d - s))
                        * claims.conv_density(k - m, x + c * (d - s))
                },
                s0,
                d,
                HP_UPCROSS,
            );
        }
    }
    b
}

/// Solver for the joint claim-count/ruin-time law.
pub struct ParisianSolver {
    params: ModelParams,
    config: SolverConfig,
    classical: ClassicalRuinDensity,
    exp: Option<ExpCoeffs>,
    tab_cache: Mutex<Option<Arc<TabTables>>>,
}

impl std::fmt::Debug for ParisianSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ParisianSolver")
            .field("params", &self.params)
            .field("config", &self.config)
            .finish()
    }
}

impl ParisianSolver {
    pub fn new(params: &ModelParams, config: SolverConfig) -> Result<Self> {
        params.validate()?;
        config.validate()?;
        let classical = ClassicalRuinDensity::new(params.clone()).with_tolerance(config.tol);
        let exp = build_exp_coeffs(params, config.n_max);
        Ok(ParisianSolver {
            params: params.clone(),
            config,
            classical,
            exp,
            tab_cache: Mutex::new(None),
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    fn geometry(&self) -> Result<Geometry> {
        let p = &self.params;
        let mut default_step = self.config.mode.default_step();
        if !p.claims.is_exponential() {
            // classical-density tables dominate the cost for tabulated claims
            default_step = default_step.max(0.05);
        }
        let step = self.config.step.unwrap_or(default_step);
        let t_max_raw = self.config.t_max.unwrap_or(p.d + self.default_span());
        if t_max_raw <= p.d + step {
            return Err(Error::InvalidParameter(format!(
                "t_max = {t_max_raw} leaves no room above the window end d = {}",
                p.d
            )));
        }
        let cells = (((t_max_raw - p.d) / step) - 1e-9).ceil().max(2.0) as usize;
        if cells > 2_000_000 {
            return Err(Error::InvalidParameter(format!(
                "grid of {cells} cells is unreasonably large; raise step or lower t_max"
            )));
        }
        Ok(Geometry {
            step,
            t_max: p.d + cells as f64 * step,
            cells,
        })
    }

    /// Horizon span beyond `d` at which the one-claim overshoot envelope
    /// `lambda e^{-(c/mean) s}` drops below the grid tail target.
    fn default_span(&self) -> f64 {
        let mean = self.params.claims.mean();
        let rate = self.params.c / mean;
        let span = (self.params.lambda / (rate * GRID_TAIL_TARGET)).ln() / rate;
        span.max(5.0 * mean).max(4.0 * self.params.d).max(1.0)
    }

    /// First-excursion density: ruin at `t` with `n` claims where the very
    /// first excursion below zero is the fatal one.
    pub fn w_first(&self, n: usize, t: f64) -> f64 {
        assert!(
            n >= 1 && n <= self.config.n_max,
            "n = {n} outside 1..={}",
            self.config.n_max
        );
        if t <= self.params.d {
            return 0.0;
        }
        let lag = t - self.params.d;
        let v = match &self.exp {
            Some(exp) => self.first_excursion_exp(exp, self.params.u, n, lag),
            None => {
                let tabs = self.tab_tables().expect("tabulated setup failed");
                self.tab_first_excursion(&tabs, self.params.u > 0.0, n, lag)
            }
        };
        v.max(0.0)
    }

    /// Density at `z` of the first excursion below zero completing early
    /// (before reaching length `d`) with `m` claims incurred so far.
    pub fn excursion_renewal_density(&self, m: usize, z: f64) -> f64 {
        assert!(m >= 1, "claim order must be at least 1");
        match &self.exp {
            Some(exp) => self.renewal_point_exp(exp, self.params.u, m, z),
            None => {
                let tabs = self.tab_tables().expect("tabulated setup failed");
                let at_u = self.params.u > 0.0;
                // linear interpolation of the precomputed lattice column
                let col = self.tab_varpi_column(&tabs, at_u, m);
                let pos = (z / tabs.step).clamp(0.0, tabs.cells as f64);
                let l0 = (pos.floor() as usize).min(tabs.cells.saturating_sub(1));
                let frac = pos - l0 as f64;
                (1.0 - frac) * col[l0] + frac * col[l0 + 1]
            }
        }
    }

    /// Solves for orders `1..=n_max` on the configured grid: level-zero
    /// first, then the configured level on top of the level-zero solution.
    pub fn solve(&self) -> Result<ParisianSolution> {
        let geo = self.geometry()?;
        match &self.exp {
            Some(exp) => self.solve_exponential(exp, &geo),
            None => self.solve_tabulated(&geo),
        }
    }

    /// Claim-count ruin probabilities. Exponential claims use the exact
    /// coefficient recursion; tabulated claims integrate the solved grids
    /// over the configured horizon (a documented truncation).
    pub fn probabilities(&self) -> Result<ProbabilityTable> {
        match &self.exp {
            Some(exp) => {
                let (p0, pu) = self.prob_tables_exp(exp);
                Ok(ProbabilityTable {
                    from_zero: p0,
                    from_u: pu,
                })
            }
            None => {
                let sol = self.solve()?;
                Ok(ProbabilityTable {
                    from_zero: sol.p0.clone(),
                    from_u: sol.pu.clone(),
                })
            }
        }
    }

    /// Deficit-extended solution: grids of `w(n, t, x)` for each requested
    /// window-end deficit `x`.
    pub fn solve_deficit(&self, xs: &[f64]) -> Result<DeficitSolution> {
        if xs.is_empty() {
            return Err(Error::InvalidParameter(
                "no deficit levels requested".into(),
            ));
        }
        for &x in xs {
            if !(x >= 0.0) || !x.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "deficit level {x} must be >= 0"
                )));
            }
        }
        let geo = self.geometry()?;
        let rule = self.config.mode.rule();
        let u = self.params.u;
        let mut w0 = Vec::with_capacity(xs.len());
        let mut wu = Vec::with_capacity(xs.len());
        match &self.exp {
            Some(exp) => {
                let varpi0 = self.renewal_table_exp(exp, 0.0, &geo);
                let varpi_u = if u > 0.0 {
                    Some(self.renewal_table_exp(exp, u, &geo))
                } else {
                    None
                };
                for &x in xs {
                    let ax = self.deficit_coeffs_exp(exp, x);
                    let h0 = |n: usize, lag: f64| self.first_excursion_with(exp, 0.0, &ax, n, lag);
                    let chain0 =
                        self.renewal_chain(&geo, rule, &varpi0, &h0, None, "w0 deficit")?;
                    let chain_u = match &varpi_u {
                        Some(vu) => {
                            let hu =
                                |n: usize, lag: f64| self.first_excursion_with(exp, u, &ax, n, lag);
                            Some(self.renewal_chain(
                                &geo,
                                rule,
                                vu,
                                &hu,
                                Some(&chain0),
                                "wu deficit",
                            )?)
                        }
                        None => None,
                    };
                    let g0 = self.chain_to_grids(&geo, rule, &chain0)?;
                    let gu = match chain_u {
                        Some(cu) => self.chain_to_grids(&geo, rule, &cu)?,
                        None => g0.clone(),
                    };
                    w0.push(g0);
                    wu.push(gu);
                }
            }
            None => {
                let tabs = self.tab_tables()?;
                let varpi0 = self.tab_varpi_table(&tabs, false);
                let varpi_u = if u > 0.0 {
                    Some(self.tab_varpi_table(&tabs, true))
                } else {
                    None
                };
                for &x in xs {
                    let h0 = |n: usize, lag: f64| {
                        self.tab_first_excursion_deficit(&tabs, false, n, lag, x)
                    };
                    let chain0 =
                        self.renewal_chain(&geo, rule, &varpi0, &h0, None, "w0 deficit")?;
                    let chain_u = match &varpi_u {
                        Some(vu) => {
                            let hu = |n: usize, lag: f64| {
                                self.tab_first_excursion_deficit(&tabs, true, n, lag, x)
                            };
                            Some(self.renewal_chain(
                                &geo,
                                rule,
                                vu,
                                &hu,
                                Some(&chain0),
                                "wu deficit",
                            )?)
                        }
                        None => None,
                    };
                    let g0 = self.chain_to_grids(&geo, rule, &chain0)?;
                    let gu = match chain_u {
                        Some(cu) => self.chain_to_grids(&geo, rule, &cu)?,
                        None => g0.clone(),
                    };
                    w0.push(g0);
                    wu.push(gu);
                }
            }
        }
        Ok(DeficitSolution {
            mode: self.config.mode,
            u,
            d: self.params.d,
            xs: xs.to_vec(),
            w0,
            wu,
        })
    }

    /// Independent assembly of the order-`n` density used as a cross-check
    /// on [`ParisianSolver::solve`]: instead of tabulating the
    /// completed-excursion density and convolving on the lattice, it builds
    /// running convolutions of the classical one-excursion coefficients with
    /// the level-zero solution and applies the excursion kernels through
    /// continuous Simpson quadrature. Exponential claims only.
    pub fn density_alt(&self, n: usize) -> Result<DensityGrid> {
        let exp = self.exp.as_ref().ok_or_else(|| {
            Error::InvalidParameter("alternate assembly requires exponential claims".into())
        })?;
        if n == 0 || n > self.config.n_max {
            return Err(Error::InvalidParameter(format!(
                "n = {n} outside 1..={}",
                self.config.n_max
            )));
        }
        let geo = self.geometry()?;
        let mut chain: Vec<DensityGrid> = Vec::new();
        for j in 1..n {
            let g = self.alt_order(exp, &geo, 0.0, j, &chain)?;
            chain.push(g);
        }
        self.alt_order(exp, &geo, self.params.u, n, &chain)
    }

    // ---- exponential backend ------------------------------------------------

    fn first_excursion_exp(&self, exp: &ExpCoeffs, u: f64, n: usize, lag: f64) -> f64 {
        self.first_excursion_with(exp, u, &exp.a, n, lag)
    }

    fn first_excursion_with(
        &self,
        _exp: &ExpCoeffs,
        u: f64,
        weights: &[f64],
        n: usize,
        lag: f64,
    ) -> f64 {
        let mut s = 0.0;
        for k in 0..n {
            let g = self.classical.g_coef(u, n - k, lag);
            if g != 0.0 {
                s += g * weights[k];
            }
        }
        s
    }

    /// Completed-excursion kernel `nu_k(s)`: density that an excursion
    /// entered with the stationary exponential deficit ends at an
    /// up-crossing after `s < d` with `k` claims inside it. `k = 0` is the
    /// claim-free slope `c e^{-beta s}`.
    fn nu_kernel(&self, exp: &ExpCoeffs, k: usize, s: f64) -> f64 {
        if s < 0.0 {
            return 0.0;
        }
        let (lambda, c) = (self.params.lambda, self.params.c);
        if k == 0 {
            // claim-free slope; right-limit c at s = 0
            return c * (-exp.beta * s).exp();
        }
        if s == 0.0 {
            return 0.0;
        }
        (k as f64 * (lambda.ln() + exp.mu.ln())
            + (k as f64 + 1.0) * c.ln()
            + 2.0 * k as f64 * s.ln()
            - exp.beta * s
            - ln_factorial(k)
            - ln_factorial(k + 1))
        .exp()
    }

    fn renewal_point_exp(&self, exp: &ExpCoeffs, u: f64, m: usize, z: f64) -> f64 {
        if z <= 0.0 {
            return 0.0;
        }
        let smax = self.params.d.min(z);
        if smax <= 0.0 {
            return 0.0;
        }
        let mut acc = 0.0;
        for k in 0..m {
            acc += simpson(
                |s| self.nu_kernel(exp, k, s) * self.classical.g_coef(u, m - k, z - s),
                0.0,
                smax,
                HP_RENEWAL,
            );
        }
        acc
    }

    fn renewal_table_exp(&self, exp: &ExpCoeffs, u: f64, geo: &Geometry) -> Vec<Vec<f64>> {
        (1..self.config.n_max)
            .map(|m| {
                (0..=geo.cells)
                    .into_par_iter()
                    .map(|l| self.renewal_point_exp(exp, u, m, l as f64 * geo.step))
                    .collect()
            })
            .collect()
    }

    fn solve_exponential(&self, exp: &ExpCoeffs, geo: &Geometry) -> Result<ParisianSolution> {
        let rule = self.config.mode.rule();
        let u = self.params.u;
        let varpi0 = self.renewal_table_exp(exp, 0.0, geo);
        let h0 = |n: usize, lag: f64| self.first_excursion_exp(exp, 0.0, n, lag);
        let chain0 = self.renewal_chain(geo, rule, &varpi0, &h0, None, "w0")?;
        let chain_u = if u > 0.0 {
            let varpi_u = self.renewal_table_exp(exp, u, geo);
            let hu = |n: usize, lag: f64| self.first_excursion_exp(exp, u, n, lag);
            Some(self.renewal_chain(geo, rule, &varpi_u, &hu, Some(&chain0), "wu")?)
        } else {
            None
        };
        let w0 = self.chain_to_grids(geo, rule, &chain0)?;
        let wu = match chain_u {
            Some(cu) => self.chain_to_grids(geo, rule, &cu)?,
            None => w0.clone(),
        };
        let (p0, pu) = self.prob_tables_exp(exp);
        Ok(ParisianSolution {
            mode: self.config.mode,
            u,
            d: self.params.d,
            step: geo.step,
            t_max: geo.t_max,
            w0,
            wu,
            p0,
            pu,
        })
    }

    fn prob_tables_exp(&self, exp: &ExpCoeffs) -> (Vec<f64>, Vec<f64>) {
        let n_max = self.config.n_max;
        let i0: Vec<f64> = (1..=n_max).map(|k| self.classical.i_coef(0.0, k)).collect();
        let p0 = prob_chain(&i0, &exp.a, &exp.q, None, n_max);
        let pu = if self.params.u > 0.0 {
            let iu: Vec<f64> = (1..=n_max)
                .map(|k| self.classical.i_coef(self.params.u, k))
                .collect();
            prob_chain(&iu, &exp.a, &exp.q, Some(&p0), n_max)
        } else {
            p0.clone()
        };
        (p0, pu)
    }

    /// Window-survival weights extended by the window-end deficit `x`:
    /// `a_x[k]` replaces `a[k]` in the first-excursion sum.
    fn deficit_coeffs_exp(&self, exp: &ExpCoeffs, x: f64) -> Vec<f64> {
        let p = &self.params;
        let (mu, cd) = (exp.mu, p.c * p.d);
        let n_max = self.config.n_max;
        let mut out = Vec::with_capacity(n_max);
        for k in 0..n_max {
            // deep-entry branch (y >= cd): end deficit x needs claim sum
            // x + cd - y, which integrates in closed form
            let ln_pow = if k == 0 {
                0.0
            } else if x == 0.0 {
                f64::NEG_INFINITY
            } else {
                k as f64 * (mu * x).ln() - ln_factorial(k)
            };
            let deep = poisson_pmf(k, p.lambda * p.d) * (ln_pow - mu * (cd + x)).exp();
            let shallow = if k == 0 || p.d == 0.0 {
                0.0
            } else {
                simpson(
                    |y| (-mu * y).exp() * stay_below_end_deficit_kernel(p, k, y, x),
                    0.0,
                    cd,
                    HP_WINDOW,
                )
            };
            out.push(deep + shallow);
        }
        out
    }

    // ---- shared lattice renewal ---------------------------------------------

    /// Order-by-order assembly of `w(n, t) = h(n, t) + sum_m varpi_m (*)
    /// w_0(n - m, t)` on the lattice. `base` supplies the level-zero chain
    /// when assembling a positive starting level; `None` makes the chain
    /// self-referential (level zero itself).
    fn renewal_chain<H: Fn(usize, f64) -> f64 + Sync>(
        &self,
        geo: &Geometry,
        rule: QuadRule,
        varpi: &[Vec<f64>],
        h: &H,
        base: Option<&[(f64, Vec<f64>)]>,
        label: &str,
    ) -> Result<Vec<(f64, Vec<f64>)>> {
        let n_max = self.config.n_max;
        let step = geo.step;
        let mut chain: Vec<(f64, Vec<f64>)> = Vec::with_capacity(n_max);
        for n in 1..=n_max {
            let mut values: Vec<f64> = {
                let lower: &[(f64, Vec<f64>)] = match base {
                    Some(b) => b,
                    None => &chain,
                };
                (0..geo.cells)
                    .into_par_iter()
                    .map(|i| {
                        let lag = (i + 1) as f64 * step;
                        let mut v = h(n, lag);
                        for m in 1..n {
                            let (w_anchor, w_vals) = &lower[n - m - 1];
                            v += lattice_conv(&varpi[m - 1], *w_anchor, w_vals, i, step, rule);
                        }
                        v
                    })
                    .collect()
            };
            let mut anchor = h(n, 0.0);
            clamp_value(&mut anchor, || format!("{label} anchor n={n}"))?;
            for (i, v) in values.iter_mut().enumerate() {
                clamp_value(v, || {
                    format!("{label} n={n} t={}", self.params.d + (i + 1) as f64 * step)
                })?;
            }
            chain.push((anchor, values));
        }
        Ok(chain)
    }

    fn chain_to_grids(
        &self,
        geo: &Geometry,
        rule: QuadRule,
        chain: &[(f64, Vec<f64>)],
    ) -> Result<Vec<DensityGrid>> {
        chain
            .iter()
            .map(|(anchor, values)| {
                Ok(DensityGrid::from_values(
                    self.params.d,
                    geo.t_max,
                    geo.step,
                    rule,
                    values.clone(),
                )?
                .with_anchor(*anchor))
            })
            .collect()
    }

    // ---- alternate assembly (cross-check route) ------------------------------

    fn alt_order(
        &self,
        exp: &ExpCoeffs,
        geo: &Geometry,
        u: f64,
        n: usize,
        w0chain: &[DensityGrid],
    ) -> Result<DensityGrid> {
        let d = self.params.d;
        let step = geo.step;
        let cells = geo.cells;
        // running convolutions C[a][b](tau) = int G_a(u, s) w_0(b, tau - s) ds
        // over the first-excursion start s, on the tau lattice
        let mut conv: Vec<Vec<Vec<f64>>> = Vec::new();
        for a in 1..n {
            let mut row = Vec::new();
            for b in 1..=(n - a) {
                let w = &w0chain[b - 1];
                let table: Vec<f64> = (0..=cells)
                    .into_par_iter()
                    .map(|i| {
                        if i == 0 {
                            return 0.0;
                        }
                        let mut acc = 0.5 * self.classical.g_coef(u, a, 0.0) * w_at(w, i);
                        for t1 in 1..i {
                            acc += self.classical.g_coef(u, a, t1 as f64 * step) * w_at(w, i - t1);
                        }
                        acc += 0.5 * self.classical.g_coef(u, a, i as f64 * step) * w.anchor();
                        acc * step
                    })
                    .collect();
                row.push(table);
            }
            conv.push(row);
        }
        let conv_interp = |a: usize, b: usize, tau: f64| -> f64 {
            if tau <= d {
                return 0.0;
            }
            let pos = ((tau - d) / step).min(cells as f64);
            let i0 = (pos.floor() as usize).min(cells - 1);
            let frac = pos - i0 as f64;
            let t = &conv[a - 1][b - 1];
            (1.0 - frac) * t[i0] + frac * t[i0 + 1]
        };
        let values: Vec<f64> = (0..cells)
            .into_par_iter()
            .map(|i| {
                let lag = (i + 1) as f64 * step;
                let t = d + lag;
                let mut v = self.first_excursion_exp(exp, u, n, lag);
                let smax = d.min(lag);
                for m in 1..n {
                    for k in 0..m {
                        v += simpson(
                            |s| self.nu_kernel(exp, k, s) * conv_interp(m - k, n - m, t - s),
                            0.0,
                            smax,
                            HP_RENEWAL,
                        );
                    }
                }
                v
            })
            .collect();
        let mut values = values;
        for (i, v) in values.iter_mut().enumerate() {
            clamp_value(v, || {
                format!("alternate n={n} t={}", d + (i + 1) as f64 * step)
            })?;
        }
        let mut anchor = self.first_excursion_exp(exp, u, n, 0.0);
        clamp_value(&mut anchor, || format!("alternate anchor n={n}"))?;
        Ok(
            DensityGrid::from_values(d, geo.t_max, step, QuadRule::Trapezoid, values)?
                .with_anchor(anchor),
        )
    }

    // ---- tabulated backend ----------------------------------------------------

    fn tab_tables(&self) -> Result<Arc<TabTables>> {
        let mut guard = self.tab_cache.lock().expect("table cache poisoned");
        if let Some(t) = guard.as_ref() {
            return Ok(Arc::clone(t));
        }
        let geo = self.geometry()?;
        let built = Arc::new(self.build_tab_tables(&geo)?);
        *guard = Some(Arc::clone(&built));
        Ok(built)
    }

    fn build_tab_tables(&self, geo: &Geometry) -> Result<TabTables> {
        let p = &self.params;
        let claims = &p.claims;
        let (c, lambda, u, d) = (p.c, p.lambda, p.u, p.d);
        let ystep = c * geo.step;
        // cover the window height plus the claim tail that still matters
        let mut extent = 0.0;
        while claims.tail(extent) > 1e-7 && extent < 1e4 {
            extent += ystep;
        }
        let ny = (((c * d + extent) / ystep).ceil() as usize).max(4);
        let cells = geo.cells;
        let n_max = self.config.n_max;
        let build_level = |level_u: f64, base: Option<&Vec<Vec<f64>>>| -> Result<Vec<Vec<f64>>> {
            let mut tables = Vec::with_capacity(n_max);
            for k in 1..=n_max {
                let rows: Vec<Vec<f64>> = (0..=cells)
                    .into_par_iter()
                    .map(|l| {
                        let t = l as f64 * geo.step;
                        (0..=ny)
                            .map(|iy| {
                                let y = iy as f64 * ystep;
                                match base {
                                    // level zero: classical density as-is
                                    None => self.classical.w0(k, t, y),
                                    Some(w0) => {
                                        let mut v = classical_direct(p, level_u, k, t, y);
                                        // subtract paths that dipped below
                                        // zero before t, claim order shared
                                        // with the level-zero table
                                        for j in 1..k {
                                            let w = &w0[k - j - 1];
                                            let mut acc = 0.0;
                                            for a in 1..l {
                                                let s = a as f64 * geo.step;
                                                acc += poisson_pmf(j, lambda * s)
                                                    * claims.conv_density(j, level_u + c * s)
                                                    * w[(l - a) * (ny + 1) + iy];
                                            }
                                            if l > 0 {
                                                let s = l as f64 * geo.step;
                                                acc += 0.5
                                                    * poisson_pmf(j, lambda * s)
                                                    * claims.conv_density(j, level_u + c * s)
                                                    * w[iy];
                                            }
                                            v -= c * acc * geo.step;
                                        }
                                        v
                                    }
                                }
                            })
                            .collect()
                    })
                    .collect();
                tables.push(rows.into_iter().flatten().collect());
            }
            Ok(tables)
        };
        let w0 = build_level(0.0, None)?;
        let wu = if u > 0.0 {
            Some(build_level(u, Some(&w0))?)
        } else {
            None
        };
        let skern: Vec<Vec<f64>> = (1..n_max.max(2))
            .map(|k| {
                (0..=ny)
                    .into_par_iter()
                    .map(|iy| stay_below_kernel(p, k, iy as f64 * ystep))
                    .collect()
            })
            .collect();
        Ok(TabTables {
            step: geo.step,
            cells,
            ystep,
            ny,
            w0,
            wu,
            skern,
        })
    }

    /// First-excursion density from the `(t, y)` tables: weight the
    /// classical entry-deficit density by the window-survival kernel.
    fn tab_first_excursion(&self, tabs: &TabTables, at_u: bool, n: usize, lag: f64) -> f64 {
        let p = &self.params;
        let cd = p.c * p.d;
        // claim-free window: entry deficit beyond the window height
        let mut total = (-p.lambda * p.d).exp() * self.tab_y_tail(tabs, at_u, n, lag, cd);
        for k in 1..n {
            total += self.tab_y_kernel(tabs, at_u, n - k, lag, k);
        }
        total
    }

    /// `int_{from}^{ymax} W(ord, lag, y) dy` with a split first cell.
    fn tab_y_tail(&self, tabs: &TabTables, at_u: bool, ord: usize, lag: f64, from: f64) -> f64 {
        let ystep = tabs.ystep;
        let iy0 = (from / ystep - 1e-9).ceil().max(0.0) as usize;
        if iy0 > tabs.ny {
            return 0.0;
        }
        let mut acc = 0.0;
        for iy in iy0..tabs.ny {
            acc += 0.5
                * (tabs.at_lag(at_u, ord, lag, iy) + tabs.at_lag(at_u, ord, lag, iy + 1))
                * ystep;
        }
        let head = iy0 as f64 * ystep - from;
        if head > 1e-12 {
            let w_from = tabs.at_lag_y(at_u, ord, lag, from);
            acc += 0.5 * (w_from + tabs.at_lag(at_u, ord, lag, iy0)) * head;
        }
        acc
    }

    /// `int_0^{ymax} W(ord, lag, y) S_k(y) dy` on the shared `y` lattice.
    fn tab_y_kernel(&self, tabs: &TabTables, at_u: bool, ord: usize, lag: f64, k: usize) -> f64 {
        let sk = &tabs.skern[k - 1];
        let mut acc = 0.0;
        for iy in 0..tabs.ny {
            let f0 = tabs.at_lag(at_u, ord, lag, iy) * sk[iy];
            let f1 = tabs.at_lag(at_u, ord, lag, iy + 1) * sk[iy + 1];
            acc += 0.5 * (f0 + f1) * tabs.ystep;
        }
        acc
    }

    /// Deficit-extended first-excursion density for tabulated claims.
    fn tab_first_excursion_deficit(
        &self,
        tabs: &TabTables,
        at_u: bool,
        n: usize,
        lag: f64,
        x: f64,
    ) -> f64 {
        let p = &self.params;
        let cd = p.c * p.d;
        // claim-free window: the end deficit pins the entry deficit at cd + x
        let mut total = (-p.lambda * p.d).exp() * tabs.at_lag_y(at_u, n, lag, cd + x);
        for k in 1..n {
            let mut acc = 0.0;
            for iy in 0..tabs.ny {
                let y0 = iy as f64 * tabs.ystep;
                let y1 = y0 + tabs.ystep;
                let f0 =
                    tabs.at_lag(at_u, n - k, lag, iy) * stay_below_end_deficit_kernel(p, k, y0, x);
                let f1 = tabs.at_lag(at_u, n - k, lag, iy + 1)
                    * stay_below_end_deficit_kernel(p, k, y1, x);
                acc += 0.5 * (f0 + f1) * tabs.ystep;
            }
            total += acc;
        }
        total
    }

    /// Completed-excursion density on the lattice for tabulated claims:
    /// entry deficit integrated against the claim-free up-crossing atom and
    /// the in-excursion first-up-crossing densities.
    fn tab_varpi_table(&self, tabs: &TabTables, at_u: bool) -> Vec<Vec<f64>> {
        (1..self.config.n_max)
            .map(|m| self.tab_varpi_column(tabs, at_u, m))
            .collect()
    }

    fn tab_varpi_column(&self, tabs: &TabTables, at_u: bool, m: usize) -> Vec<f64> {
        let p = &self.params;
        let (lambda, c, d) = (p.lambda, p.c, p.d);
        let step = tabs.step;
        (0..=tabs.cells)
            .into_par_iter()
            .map(|l| {
                let z = l as f64 * step;
                if z <= 0.0 {
                    return 0.0;
                }
                // claim-free up-crossing: duration y/c, lattice-aligned
                let ymax = (c * d).min(c * z);
                let iyfull = ((ymax / tabs.ystep) - 1e-9).floor().max(0.0) as usize;
                let iyfull = iyfull.min(tabs.ny).min(l);
                let mut acc = 0.0;
                for iy in 0..iyfull {
                    let f0 = (-lambda * iy as f64 * step).exp() * tabs.at(at_u, m, l - iy, iy);
                    let f1 = (-lambda * (iy + 1) as f64 * step).exp()
                        * tabs.at(at_u, m, l - iy - 1, iy + 1);
                    acc += 0.5 * (f0 + f1) * tabs.ystep;
                }
                let rest = ymax - iyfull as f64 * tabs.ystep;
                if rest > 1e-12 && iyfull < tabs.ny.min(l) {
                    let f0 = (-lambda * iyfull as f64 * step).exp()
                        * tabs.at(at_u, m, l - iyfull, iyfull);
                    let f1 =
                        (-lambda * ymax / c).exp() * tabs.at_lag_y(at_u, m, z - ymax / c, ymax);
                    acc += 0.5 * (f0 + f1) * rest;
                }
                // up-crossing after k >= 1 claims inside the excursion
                for k in 1..m {
                    acc += self.tab_upcross_conv(tabs, at_u, m - k, k, l);
                }
                acc
            })
            .collect()
    }

    /// `int_0^{min(d, z)} [int_y v_y(k, s) W(j, z - s, y) dy] ds` over the
    /// shared lattices.
    fn tab_upcross_conv(&self, tabs: &TabTables, at_u: bool, j: usize, k: usize, l: usize) -> f64 {
        let p = &self.params;
        let step = tabs.step;
        let z = l as f64 * step;
        let smax = p.d.min(z);
        let afull = ((smax / step) - 1e-9).floor().max(0.0) as usize;
        let afull = afull.min(l);
        let inner = |s: f64, lag: f64| -> f64 {
            let mut acc = 0.0;
            for iy in 0..tabs.ny {
                let y0 = iy as f64 * tabs.ystep;
                let y1 = y0 + tabs.ystep;
                let f0 = upcross_density(p.lambda, p.c, &p.claims, y0, k, s)
                    * tabs.at_lag(at_u, j, lag, iy);
                let f1 = upcross_density(p.lambda, p.c, &p.claims, y1, k, s)
                    * tabs.at_lag(at_u, j, lag, iy + 1);
                acc += 0.5 * (f0 + f1) * tabs.ystep;
            }
            acc
        };
        let mut acc = 0.0;
        let mut prev = 0.0; // s = 0 integrand vanishes
        for a in 1..=afull {
            let s = a as f64 * step;
            let cur = inner(s, z - s);
            acc += 0.5 * (prev + cur) * step;
            prev = cur;
        }
        let rest = smax - afull as f64 * step;
        if rest > 1e-12 {
            let cur = inner(smax, z - smax);
            acc += 0.5 * (prev + cur) * rest;
        }
        acc
    }

    fn solve_tabulated(&self, geo: &Geometry) -> Result<ParisianSolution> {
        let tabs = self.tab_tables()?;
        let rule = self.config.mode.rule();
        let u = self.params.u;
        let varpi0 = self.tab_varpi_table(&tabs, false);
        let h0 = |n: usize, lag: f64| self.tab_first_excursion(&tabs, false, n, lag);
        let chain0 = self.renewal_chain(geo, rule, &varpi0, &h0, None, "w0")?;
        let chain_u = if u > 0.0 {
            let varpi_u = self.tab_varpi_table(&tabs, true);
            let hu = |n: usize, lag: f64| self.tab_first_excursion(&tabs, true, n, lag);
            Some(self.renewal_chain(geo, rule, &varpi_u, &hu, Some(&chain0), "wu")?)
        } else {
            None
        };
        let w0 = self.chain_to_grids(geo, rule, &chain0)?;
        let wu = match chain_u {
            Some(cu) => self.chain_to_grids(geo, rule, &cu)?,
            None => w0.clone(),
        };
        // horizon-truncated claim-count masses
        let p0: Vec<f64> = w0.iter().map(|g| g.integrate_to(g.t1())).collect();
        let pu: Vec<f64> = wu.iter().map(|g| g.integrate_to(g.t1())).collect();
        Ok(ParisianSolution {
            mode: self.config.mode,
            u,
            d: self.params.d,
            step: geo.step,
            t_max: geo.t_max,
            w0,
            wu,
            p0,
            pu,
        })
    }
}

/// Direct (no-dip) part of the classical joint density for a positive
/// starting level.
fn classical_direct(p: &ModelParams, u: f64, k: usize, t: f64, y: f64) -> f64 {
    let (lambda, c) = (p.lambda, p.c);
    if k == 1 {
        return lambda * (-lambda * t).exp() * p.claims.pdf(u + c * t + y);
    }
    if t <= 0.0 {
        return 0.0;
    }
    let weight =
        (k as f64 * lambda.ln() + (k as f64 - 1.0) * t.ln() - lambda * t - ln_factorial(k - 1))
            .exp();
    let hi = u + c * t;
    weight
        * simpson(
            |x| p.claims.conv_density(k - 1, hi - x) * p.claims.pdf(x + y),
            0.0,
            hi,
            128,
        )
}

fn build_exp_coeffs(params: &ModelParams, n_max: usize) -> Option<ExpCoeffs> {
    let mu = params.claims.exp_rate()?;
    let (lambda, c, d) = (params.lambda, params.c, params.d);
    let beta = params.beta()?;
    let mut j = vec![0.0; n_max];
    for (k, jk) in j.iter_mut().enumerate().skip(1) {
        *jk = simpson(
            |y| (-mu * y).exp() * stay_below_kernel(params, k, y),
            0.0,
            c * d,
            HP_WINDOW,
        );
    }
    let a: Vec<f64> = (0..n_max)
        .map(|k| poisson_pmf(k, lambda * d) * (-mu * c * d).exp() / mu + j[k])
        .collect();
    let q: Vec<f64> = (0..n_max.saturating_sub(1))
        .map(|k| {
            let bd = beta * d;
            if bd <= 0.0 {
                return 0.0;
            }
            let reg = gamma_lr(2.0 * k as f64 + 1.0, bd);
            if reg <= 0.0 {
                return 0.0;
            }
            (k as f64 * (lambda.ln() + mu.ln()) + (k as f64 + 1.0) * c.ln()
                - ln_factorial(k)
                - ln_factorial(k + 1)
                + ln_factorial(2 * k)
                + reg.ln()
                - (2.0 * k as f64 + 1.0) * beta.ln())
            .exp()
        })
        .collect();
    Some(ExpCoeffs { mu, beta, a, j, q })
}

/// Claim-count probability recursion shared by the zero and positive levels:
/// first-excursion masses plus completed-excursion restarts against the
/// level-zero table.
fn prob_chain(i: &[f64], a: &[f64], q: &[f64], base: Option<&[f64]>, n_max: usize) -> Vec<f64> {
    let mut p = vec![0.0; n_max + 1];
    for n in 1..=n_max {
        let mut s = 0.0;
        for k in 0..n {
            s += a[k] * i[n - k - 1];
        }
        for m in 1..n {
            for k in 0..=(n - m - 1) {
                let rest = n - m - k;
                match base {
                    Some(b) => s += i[m - 1] * q[k] * b[rest - 1],
                    None => s += i[m - 1] * q[k] * p[rest],
                }
            }
        }
        p[n] = s;
    }
    p.remove(0);
    p
}

/// `w` value at lattice offset `j` from the grid start, `j = 0` meaning the
/// right-limit anchor.
fn w_at(w: &DensityGrid, j: usize) -> f64 {
    if j == 0 {
        w.anchor()
    } else {
        w.values()[j - 1]
    }
}

/// Lattice convolution `int_0^{(i+1) step} varpi(z) w(t - z) dz` where both
/// factors live on the same lattice and `t` is node `i` of `w`'s grid.
fn lattice_conv(
    varpi: &[f64],
    w_anchor: f64,
    w_vals: &[f64],
    i: usize,
    step: f64,
    rule: QuadRule,
) -> f64 {
    let top = i + 1;
    let w_off = |j: usize| if j == 0 { w_anchor } else { w_vals[j - 1] };
    let mut acc = 0.0;
    match rule {
        QuadRule::RightRectangle => {
            for l in 1..=top {
                acc += varpi[l] * w_off(top - l);
            }
        }
        QuadRule::Trapezoid => {
            acc += 0.5 * varpi[0] * w_off(top);
            for l in 1..top {
                acc += varpi[l] * w_off(top - l);
            }
            acc += 0.5 * varpi[top] * w_off(0);
        }
    }
    acc * step
}

fn clamp_value<F: Fn() -> String>(v: &mut f64, location: F) -> Result<()> {
    if *v < 0.0 {
        if *v < NEGATIVE_CLAMP {
            return Err(Error::NegativeDensity {
                value: *v,
                location: location(),
            });
        }
        *v = 0.0;
    }
    Ok(())
}

/// Solved joint law on a grid: per-order densities at level zero and at the
/// configured level, with claim-count probabilities.
#[derive(Debug, Clone)]
pub struct ParisianSolution {
    mode: Mode,
    u: f64,
    d: f64,
    step: f64,
    t_max: f64,
    w0: Vec<DensityGrid>,
    wu: Vec<DensityGrid>,
    p0: Vec<f64>,
    pu: Vec<f64>,
}

impl ParisianSolution {
    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn u(&self) -> f64 {
        self.u
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn n_max(&self) -> usize {
        self.wu.len()
    }

    fn check_n(&self, n: usize) {
        assert!(
            n >= 1 && n <= self.n_max(),
            "claim order {n} outside 1..={}",
            self.n_max()
        );
    }

    /// Density grid of ruin with `n` claims from the configured level.
    pub fn grid(&self, n: usize) -> &DensityGrid {
        self.check_n(n);
        &self.wu[n - 1]
    }

    /// Density grid of ruin with `n` claims from level zero.
    pub fn grid_at_zero(&self, n: usize) -> &DensityGrid {
        self.check_n(n);
        &self.w0[n - 1]
    }

    pub fn density(&self, n: usize, t: f64) -> f64 {
        self.grid(n).value_at(t)
    }

    pub fn density_at_zero(&self, n: usize, t: f64) -> f64 {
        self.grid_at_zero(n).value_at(t)
    }

    /// Probability of ruin by time `t` with exactly `n` claims, integrated
    /// under the solution's mode: plain right-rectangle sums when
    /// paper-faithful, trapezoid plus one Richardson step when accurate.
    pub fn cumulative(&self, n: usize, t: f64) -> f64 {
        cumulative_of(self.grid(n), self.mode, t)
    }

    pub fn cumulative_at_zero(&self, n: usize, t: f64) -> f64 {
        cumulative_of(self.grid_at_zero(n), self.mode, t)
    }

    /// Total probability of ruin with exactly `n` claims from the
    /// configured level.
    pub fn probability(&self, n: usize) -> f64 {
        self.check_n(n);
        self.pu[n - 1]
    }

    pub fn probability_at_zero(&self, n: usize) -> f64 {
        self.check_n(n);
        self.p0[n - 1]
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.pu
    }

    pub fn probabilities_at_zero(&self) -> &[f64] {
        &self.p0
    }

    /// CSV rows `n,t,w0d,wud` over every order and node.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,t,w0d,wud\n");
        for n in 1..=self.n_max() {
            let g0 = &self.w0[n - 1];
            let gu = &self.wu[n - 1];
            for i in 0..g0.len() {
                out.push_str(&format!(
                    "{},{:.6},{:.8e},{:.8e}\n",
                    n,
                    g0.node(i),
                    g0.values()[i],
                    gu.values()[i]
                ));
            }
        }
        out
    }

    /// JSON document with one entry per claim order.
    pub fn to_json(&self) -> serde_json::Value {
        let orders: Vec<serde_json::Value> = (1..=self.n_max())
            .map(|n| {
                let g0 = &self.w0[n - 1];
                let gu = &self.wu[n - 1];
                serde_json::json!({
                    "n": n,
                    "anchor_w0d": g0.anchor(),
                    "anchor_wud": gu.anchor(),
                    "t": (0..g0.len()).map(|i| g0.node(i)).collect::<Vec<f64>>(),
                    "w0d": g0.values(),
                    "wud": gu.values(),
                    "p0": self.p0[n - 1],
                    "pu": self.pu[n - 1],
                })
            })
            .collect();
        serde_json::json!({
            "mode": self.mode.as_str(),
            "u": self.u,
            "d": self.d,
            "step": self.step,
            "t_max": self.t_max,
            "orders": orders,
        })
    }
}

fn cumulative_of(grid: &DensityGrid, mode: Mode, t: f64) -> f64 {
    match mode {
        Mode::PaperFaithful => grid.integrate_to(t),
        Mode::Accurate => {
            let fine = grid.integrate_to(t);
            let coarse = coarse_trapezoid(grid, t);
            richardson(coarse, fine, 2)
        }
    }
}

/// Trapezoid sum at doubled step sharing the fine rule's remainder, used as
/// the coarse member of the Richardson pair.
fn coarse_trapezoid(g: &DensityGrid, t: f64) -> f64 {
    let t = t.min(g.t1());
    if t <= g.t0() || g.is_empty() {
        return 0.0;
    }
    let step2 = 2.0 * g.step();
    let whole2 = (((t - g.t0()) / step2) + 1e-9).floor() as usize;
    let whole2 = whole2.min(g.len() / 2);
    let mut acc = 0.0;
    let mut left = g.anchor();
    for j in 0..whole2 {
        let right = g.values()[2 * j + 1];
        acc += 0.5 * (left + right) * step2;
        left = right;
    }
    let edge = g.t0() + whole2 as f64 * step2;
    acc + (g.integrate_to(t) - g.integrate_to(edge))
}

/// Deficit-extended solution: for each requested end deficit `x`, grids of
/// `w(n, t, x)` at level zero and at the configured level.
#[derive(Debug, Clone)]
pub struct DeficitSolution {
    mode: Mode,
    u: f64,
    d: f64,
    xs: Vec<f64>,
    w0: Vec<Vec<DensityGrid>>,
    wu: Vec<Vec<DensityGrid>>,
}

impl DeficitSolution {
    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn u(&self) -> f64 {
        self.u
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn n_max(&self) -> usize {
        self.wu.first().map_or(0, Vec::len)
    }

    /// Grid of `w(n, t, x)` for deficit index `xi` at the configured level.
    pub fn grid(&self, xi: usize, n: usize) -> &DensityGrid {
        &self.wu[xi][n - 1]
    }

    pub fn grid_at_zero(&self, xi: usize, n: usize) -> &DensityGrid {
        &self.w0[xi][n - 1]
    }

    pub fn density(&self, xi: usize, n: usize, t: f64) -> f64 {
        self.grid(xi, n).value_at(t)
    }

    /// CSV rows `n,t,x,w0d,wud`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,t,x,w0d,wud\n");
        for n in 1..=self.n_max() {
            for (xi, &x) in self.xs.iter().enumerate() {
                let g0 = &self.w0[xi][n - 1];
                let gu = &self.wu[xi][n - 1];
                for i in 0..g0.len() {
                    out.push_str(&format!(
                        "{},{:.6},{:.6},{:.8e},{:.8e}\n",
                        n,
                        g0.node(i),
                        x,
                        g0.values()[i],
                        gu.values()[i]
                    ));
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ClaimDistribution;
    use proptest::prelude::*;
    use std::sync::OnceLock;

    fn params(u: f64, c: f64, d: f64) -> ModelParams {
        ModelParams::new(u, c, 1.0, ClaimDistribution::exponential(1.0).unwrap(), d).unwrap()
    }

    fn config(mode: Mode, n_max: usize, t_max: f64, step: f64) -> SolverConfig {
        SolverConfig {
            mode,
            n_max,
            t_max: Some(t_max),
            step: Some(step),
            tol: Tolerance::default(),
        }
    }

    fn assert_rel(got: f64, want: f64, rel: f64, what: &str) {
        let denom = want.abs().max(1e-300);
        assert!(
            ((got - want) / denom).abs() < rel,
            "{what}: got {got:.17e}, want {want:.17e} (rel err {:.2e})",
            ((got - want) / denom).abs()
        );
    }

    // piecewise closed forms for the level-zero densities of orders 2 and 3
    fn w2_closed(lambda: f64, mu: f64, c: f64, d: f64, t: f64) -> f64 {
        let beta = lambda + mu * c;
        if t <= d {
            0.0
        } else if t <= 2.0 * d {
            lambda
                * lambda
                * (-beta * t).exp()
                * (mu * c * (t - d) * (t - d) + d + mu * c * d * d / 2.0)
        } else {
            lambda * lambda * (-beta * t).exp() * (mu * c * t * t / 2.0 + d - mu * c * d * d / 2.0)
        }
    }

    fn w3_closed(lambda: f64, mu: f64, c: f64, d: f64, t: f64) -> f64 {
        let beta = lambda + mu * c;
        let (c2, m2) = (c * c, mu * mu);
        let poly = if t <= d {
            return 0.0;
        } else if t <= 2.0 * d {
            (3.0 * c2 * m2 * t.powi(4) - 12.0 * c2 * d * m2 * t.powi(3)
                + (12.0 * c * d * mu + 24.0 * c2 * d * d * m2) * t * t
                - (24.0 * c * d * d * mu + 24.0 * c2 * d.powi(3) * m2) * t
                + 6.0 * d * d
                + 16.0 * c * d.powi(3) * mu
                + 10.0 * c2 * d.powi(4) * m2)
                / 12.0
        } else if t <= 3.0 * d {
            (c2 * m2 * t.powi(4)
                + 12.0 * c2 * d * m2 * t.powi(3)
                + (12.0 * c * d * mu - 60.0 * c2 * d * d * m2) * t * t
                + 112.0 * c2 * d.powi(3) * m2 * t
                + 12.0 * d * d
                - 16.0 * c * d.powi(3) * mu
                - 76.0 * c2 * d.powi(4) * m2)
                / 24.0
        } else {
            (2.0 * c2 * m2 * t.powi(4)
                + (12.0 * c * d * mu - 6.0 * c2 * d * d * m2) * t * t
                + 4.0 * c2 * d.powi(3) * m2 * t
                + 12.0 * d * d
                - 16.0 * c * d.powi(3) * mu
                + 5.0 * c2 * d.powi(4) * m2)
                / 24.0
        };
        lambda.powi(3) * (-beta * t).exp() * poly
    }

    fn solve_c12() -> &'static ParisianSolution {
        static SOL: OnceLock<ParisianSolution> = OnceLock::new();
        SOL.get_or_init(|| {
            let p = params(0.0, 1.2, 2.0);
            ParisianSolver::new(&p, config(Mode::Accurate, 4, 9.0, 0.0125))
                .unwrap()
                .solve()
                .unwrap()
        })
    }

    #[test]
    fn one_claim_density_is_exact() {
        // 1. single-claim ruin density is lambda e^{-beta t} e^{-mu u}
        for &(u, c) in &[(0.0, 1.2), (0.0, 2.0), (2.0, 1.2), (1.0, 2.0)] {
            let p = params(u, c, 2.0);
            let solver = ParisianSolver::new(&p, config(Mode::Accurate, 2, 8.0, 0.025)).unwrap();
            let sol = solver.solve().unwrap();
            let beta = 1.0 + c;
            let g = sol.grid(1);
            for i in (0..g.len()).step_by(37) {
                let t = g.node(i);
                let want = (-beta * t - u).exp();
                assert_rel(g.values()[i], want, 1e-12, "w(1, t)");
            }
            assert_rel(
                g.anchor(),
                (-beta * 2.0 - u).exp(),
                1e-12,
                "w(1, d+) anchor",
            );
            // the first excursion is the only route for a single claim
            assert_rel(
                solver.w_first(1, 3.0),
                (-beta * 3.0 - u).exp(),
                1e-12,
                "w_first(1,3)",
            );
        }
    }

    #[test]
    fn second_order_matches_closed_polynomial() {
        // 2. order-2 density against its piecewise closed form
        let sol = solve_c12();
        let g = sol.grid(2);
        assert_rel(g.value_at(3.0), 0.0076180610102682031, 1e-6, "w(2,3) c=1.2");
        for i in 0..g.len() {
            let t = g.node(i);
            let want = w2_closed(1.0, 1.0, 1.2, 2.0, t);
            assert!(
                (g.values()[i] - want).abs() < 1e-7 + 1e-5 * want,
                "w(2,{t}) = {} vs closed {want}",
                g.values()[i]
            );
        }
        // anchor equals the closed right-limit at t = d
        let anchor_want = w2_closed(1.0, 1.0, 1.2, 2.0, 2.0 + 1e-13);
        assert_rel(g.anchor(), anchor_want, 1e-10, "w(2, d+) anchor");
    }

    #[test]
    fn third_order_matches_closed_polynomial() {
        // 3. order-3 density across all three polynomial branches
        let sol = solve_c12();
        let g = sol.grid(3);
        assert_rel(g.value_at(3.0), 0.01735829615911112, 3e-6, "w(3,3) c=1.2");
        assert_rel(g.value_at(5.0), 0.0013184356347709283, 3e-6, "w(3,5) c=1.2");
        assert_rel(
            g.value_at(6.5),
            0.00013364253260012846,
            3e-6,
            "w(3,6.5) c=1.2",
        );
        for i in 0..g.len() {
            let t = g.node(i);
            let want = w3_closed(1.0, 1.0, 1.2, 2.0, t);
            assert!(
                (g.values()[i] - want).abs() < 1e-7 + 3e-5 * want,
                "w(3,{t}) = {} vs closed {want}",
                g.values()[i]
            );
        }
    }

    #[test]
    fn closed_polynomials_at_premium_two() {
        // 4. same closed forms at c = 2
        let p = params(0.0, 2.0, 2.0);
        let sol = ParisianSolver::new(&p, config(Mode::Accurate, 3, 8.0, 0.0125))
            .unwrap()
            .solve()
            .unwrap();
        assert_rel(
            sol.density(2, 3.0),
            0.000987278432693436,
            1e-6,
            "w(2,3) c=2",
        );
        assert_rel(sol.density(3, 5.0), 5.7968489735096e-5, 3e-6, "w(3,5) c=2");
        for i in (0..sol.grid(2).len()).step_by(11) {
            let t = sol.grid(2).node(i);
            let want = w2_closed(1.0, 1.0, 2.0, 2.0, t);
            assert!((sol.grid(2).values()[i] - want).abs() < 1e-7 + 1e-5 * want);
        }
    }

    #[test]
    fn positive_level_point_values() {
        // 5. positive starting level, both orders, against frozen references
        let p = params(1.0, 2.0, 2.0);
        let sol = ParisianSolver::new(&p, config(Mode::Accurate, 3, 8.0, 0.0125))
            .unwrap()
            .solve()
            .unwrap();
        assert_rel(sol.density(2, 3.0), 0.000408599367862364, 1e-5, "w_1(2,3)");
        assert_rel(sol.density(2, 5.0), 2.92591927927418e-6, 1e-5, "w_1(2,5)");
        assert_rel(sol.density(3, 3.0), 0.00149441435468179, 1e-5, "w_1(3,3)");
        assert_rel(sol.density(3, 5.0), 2.66051908898782e-5, 1e-5, "w_1(3,5)");
        // 9 e^{-10} exactly
        assert_rel(
            sol.density(2, 3.0),
            9.0 * (-10.0f64).exp(),
            1e-5,
            "w_1(2,3) closed",
        );
    }

    #[test]
    fn first_excursion_frozen_values() {
        // 6. first-excursion density at both premium rates
        let p = params(0.0, 1.2, 2.0);
        let s = ParisianSolver::new(&p, config(Mode::Accurate, 4, 9.0, 0.05)).unwrap();
        assert_rel(
            s.w_first(2, 3.0),
            0.0068018401877394671,
            1e-8,
            "h(2,3) c=1.2",
        );
        assert_rel(
            s.w_first(3, 5.0),
            0.00067808905208397377,
            1e-8,
            "h(3,5) c=1.2",
        );
        let p2 = params(0.0, 2.0, 2.0);
        let s2 = ParisianSolver::new(&p2, config(Mode::Accurate, 4, 9.0, 0.05)).unwrap();
        assert_rel(s2.w_first(2, 3.0), 0.000863868628606757, 1e-8, "h(2,3) c=2");
        assert_eq!(s2.w_first(2, 1.8), 0.0, "no ruin before the window ends");
    }

    #[test]
    fn renewal_density_frozen_values() {
        // 7. completed-excursion density; the order-1 case is exactly
        //    c z e^{-beta z} for z <= d
        let p = params(0.0, 1.2, 2.0);
        let s = ParisianSolver::new(&p, config(Mode::Accurate, 4, 9.0, 0.05)).unwrap();
        assert_rel(
            s.excursion_renewal_density(1, 1.5),
            0.06638970132223201,
            1e-9,
            "varpi(1, 1.5) c=1.2",
        );
        assert_rel(
            s.excursion_renewal_density(2, 3.0),
            0.01110060318639081,
            1e-8,
            "varpi(2, 3) c=1.2",
        );
        let p2 = params(0.0, 2.0, 2.0);
        let s2 = ParisianSolver::new(&p2, config(Mode::Accurate, 4, 9.0, 0.05)).unwrap();
        assert_rel(
            s2.excursion_renewal_density(1, 1.5),
            0.0333269896147269,
            1e-9,
            "varpi(1, 1.5) c=2",
        );
    }

    #[test]
    fn window_coefficients_frozen_values() {
        // 8. shallow-entry window coefficients at c=2: J_1 = 4 e^{-6}
        let p = params(0.0, 2.0, 2.0);
        let s = ParisianSolver::new(&p, config(Mode::Accurate, 4, 9.0, 0.05)).unwrap();
        let exp = s.exp.as_ref().unwrap();
        assert_rel(exp.j[1], 0.0099150087066654337, 1e-9, "J_1");
        assert_rel(exp.j[2], 0.02644002321777449, 1e-9, "J_2");
        assert_rel(exp.j[3], 0.031948361388144175, 1e-9, "J_3");
        assert_rel(exp.a[1], 6.0 * (-6.0f64).exp(), 1e-9, "A_1 = 6 e^{-6}");
    }

    #[test]
    fn probability_recursion_frozen_values() {
        // 9. claim-count probabilities at c = 2 for several levels
        let mk = |u: f64| {
            let p = params(u, 2.0, 2.0);
            ParisianSolver::new(&p, config(Mode::Accurate, 3, 8.0, 0.05))
                .unwrap()
                .probabilities()
                .unwrap()
        };
        let t0 = mk(0.0);
        assert_rel(t0.from_zero[0], 0.00082625072555545281, 1e-12, "p_0(1)");
        assert_rel(
            t0.from_zero[0],
            (-6.0f64).exp() / 3.0,
            1e-12,
            "p_0(1) closed",
        );
        assert_rel(t0.from_zero[1], 0.0053242717711830419, 1e-10, "p_0(2)");
        assert_rel(mk(1.0).from_u[1], 0.0020600103422226491, 1e-10, "p_1(2)");
        assert_rel(mk(5.0).from_u[1], 4.5153383664205831e-5, 1e-10, "p_5(2)");
        assert_rel(mk(10.0).from_u[1], 3.6676064746948994e-7, 1e-10, "p_10(2)");
    }

    #[test]
    fn probability_matches_grid_integral() {
        // 10. the closed recursion agrees with integrating the density
        let p = params(0.0, 2.0, 2.0);
        let sol = ParisianSolver::new(&p, config(Mode::Accurate, 3, 12.0, 0.0125))
            .unwrap()
            .solve()
            .unwrap();
        for n in 1..=3 {
            let grid_mass = sol.cumulative(n, sol.t_max());
            let closed = sol.probability(n);
            assert!(
                (grid_mass - closed).abs() < 2e-6 * closed.max(1e-6),
                "n={n}: grid {grid_mass} vs closed {closed}"
            );
        }
    }

    #[test]
    fn paper_faithful_cumulative_reproduces_reference_digits() {
        // 11. coarse right-rectangle sums match the published 6-digit values
        let p = params(0.0, 1.2, 2.0);
        let sol = ParisianSolver::new(&p, config(Mode::PaperFaithful, 1, 7.0, 0.1))
            .unwrap()
            .solve()
            .unwrap();
        let printed = [0.00443641, 0.00492798, 0.00498245, 0.00498848, 0.00498915];
        for (idx, want) in printed.iter().enumerate() {
            let t = 3.0 + idx as f64;
            let got = sol.cumulative(1, t);
            assert!(
                (got - want).abs() < 5e-9,
                "psi(1,{t}) = {got:.10} vs printed {want}"
            );
        }
        let p2 = params(2.0, 1.2, 2.0);
        let sol2 = ParisianSolver::new(&p2, config(Mode::PaperFaithful, 1, 7.0, 0.1))
            .unwrap()
            .solve()
            .unwrap();
        let printed2 = [
            0.000600403,
            0.000666929,
            0.00067430063,
            0.000675117398,
            0.000675207899,
        ];
        for (idx, want) in printed2.iter().enumerate() {
            let t = 3.0 + idx as f64;
            let got = sol2.cumulative(1, t);
            assert!(
                (got - want).abs() < 5e-10 + 1e-6 * want,
                "psi_2(1,{t}) = {got:.12} vs printed {want}"
            );
        }
    }

    #[test]
    fn accurate_cumulative_values() {
        // 12. fine trapezoid + Richardson against exact integrals
        let sol = solve_c12();
        let beta = 2.2f64;
        let psi13 = ((-beta * 2.0).exp() - (-beta * 3.0).exp()) / beta;
        assert_rel(sol.cumulative(1, 3.0), psi13, 1e-8, "psi(1,3) accurate");
        assert_rel(
            sol.cumulative(2, 3.0),
            0.022877986901300137,
            1e-6,
            "psi(2,3)",
        );
        assert_rel(
            sol.cumulative(2, 7.0),
            0.027301854813832374,
            1e-6,
            "psi(2,7)",
        );
        assert_rel(sol.cumulative(3, 7.0), 0.0537775403013, 2e-5, "psi(3,7)");
    }

    #[test]
    fn paper_mode_understates_cumulative_by_one_step_bias() {
        // 13. the documented coarse-grid bias at n = 1, t = 3 is about 11%
        let p = params(0.0, 1.2, 2.0);
        let paper = ParisianSolver::new(&p, config(Mode::PaperFaithful, 1, 7.0, 0.1))
            .unwrap()
            .solve()
            .unwrap()
            .cumulative(1, 3.0);
        let accurate = solve_c12().cumulative(1, 3.0);
        let bias = (accurate - paper) / accurate;
        assert!(bias > 0.09 && bias < 0.12, "relative bias {bias}");
    }

    #[test]
    fn two_path_agreement() {
        // 14. lattice-convolution route vs continuous-kernel route
        for &u in &[0.0, 1.0] {
            let p = params(u, 1.2, 2.0);
            let solver = ParisianSolver::new(&p, config(Mode::Accurate, 4, 8.0, 0.0125)).unwrap();
            let sol = solver.solve().unwrap();
            for n in 1..=4 {
                let alt = solver.density_alt(n).unwrap();
                let main = sol.grid(n);
                let mut sup = 0.0f64;
                for i in 0..main.len() {
                    sup = sup.max((main.values()[i] - alt.values()[i]).abs());
                }
                assert!(sup < 1e-5, "u={u}, n={n}: sup gap {sup:.2e}");
            }
        }
    }

    #[test]
    fn deficit_extension_point_values() {
        // 15. deficit-extended density: order 1 factorizes exactly, order 2
        //     hit a frozen reference
        let p = params(0.0, 1.2, 2.0);
        let solver = ParisianSolver::new(&p, config(Mode::Accurate, 2, 7.0, 0.0125)).unwrap();
        let def = solver.solve_deficit(&[0.7]).unwrap();
        assert_rel(
            def.density(0, 1, 3.0),
            0.000675538775193844,
            1e-10,
            "w(1,3,0.7)",
        );
        assert_rel(
            def.density(0, 2, 3.0),
            0.00337769387596922,
            1e-4,
            "w(2,3,0.7)",
        );
    }

    #[test]
    fn deficit_slices_integrate_to_the_marginal() {
        // 16. integrating w(n, t, x) over x recovers w(n, t)
        let p = params(0.0, 1.2, 2.0);
        let solver = ParisianSolver::new(&p, config(Mode::Accurate, 2, 6.0, 0.025)).unwrap();
        let step = 0.125;
        let xs: Vec<f64> = (0..=160).map(|i| i as f64 * step).collect();
        let def = solver.solve_deficit(&xs).unwrap();
        let sol = solver.solve().unwrap();
        for &t in &[3.0, 4.5] {
            for n in 1..=2 {
                // Simpson weights over the even number of x cells
                let mut acc = def.density(0, n, t) + def.density(xs.len() - 1, n, t);
                for xi in 1..xs.len() - 1 {
                    acc += if xi % 2 == 1 { 4.0 } else { 2.0 } * def.density(xi, n, t);
                }
                acc *= step / 3.0;
                let want = sol.density(n, t);
                assert_rel(acc, want, 2e-4, "deficit marginal");
            }
        }
    }

    #[test]
    fn zero_window_reduces_to_classical_ruin() {
        // 17. d = 0 collapses the delay rule onto classical ruin
        let p = params(1.0, 2.0, 0.0);
        let solver = ParisianSolver::new(&p, config(Mode::Accurate, 3, 6.0, 0.025)).unwrap();
        let sol = solver.solve().unwrap();
        let cls = ClassicalRuinDensity::new(p.clone());
        for n in 1..=3 {
            for &t in &[0.5, 1.0, 3.0] {
                let want = cls.g_coef(1.0, n, t); // marginal over the deficit: G_n / mu
                assert_rel(sol.density(n, t), want, 1e-9, "d=0 density");
            }
            let want_p = cls.ruin_mass(1.0, n).unwrap();
            assert_rel(sol.probability(n), want_p, 1e-11, "d=0 probability");
        }
    }

    #[test]
    fn csv_and_json_round_trip_shape() {
        // 18. serialization carries every order and node
        let sol = {
            let p = params(1.0, 2.0, 2.0);
            ParisianSolver::new(&p, config(Mode::Accurate, 2, 4.0, 0.5))
                .unwrap()
                .solve()
                .unwrap()
        };
        let csv = sol.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("n,t,w0d,wud"));
        let body: Vec<&str> = lines.collect();
        assert_eq!(body.len(), 2 * sol.grid(1).len());
        let first: Vec<&str> = body[0].split(',').collect();
        assert_eq!(first[0], "1");
        assert!((first[1].parse::<f64>().unwrap() - 2.5).abs() < 1e-12);
        assert!(first[3].parse::<f64>().unwrap() > 0.0);
        let json = sol.to_json();
        assert_eq!(json["orders"].as_array().unwrap().len(), 2);
        assert_eq!(json["mode"], "accurate");
        assert_eq!(json["orders"][0]["n"], 1);
    }

    #[test]
    fn config_validation_rejects_bad_input() {
        // 19. configuration errors
        let p = params(0.0, 2.0, 2.0);
        let bad = SolverConfig {
            n_max: 0,
            ..SolverConfig::default()
        };
        assert!(ParisianSolver::new(&p, bad).is_err());
        let bad_step = SolverConfig {
            step: Some(-0.1),
            ..SolverConfig::default()
        };
        assert!(ParisianSolver::new(&p, bad_step).is_err());
        let bad_t = SolverConfig {
            t_max: Some(1.0), // below the window end d = 2
            ..SolverConfig::default()
        };
        assert!(ParisianSolver::new(&p, bad_t).unwrap().solve().is_err());
    }

    #[test]
    fn tabulated_backend_matches_exponential_reference() {
        // 20. tabulated-claims pipeline against the closed exponential
        //     backend at smoke accuracy
        let table = ClaimDistribution::tabulated_from_fn(|x| (-x).exp(), 0.01, 25.0).unwrap();
        let pt = ModelParams::new(0.0, 2.0, 1.0, table, 1.0).unwrap();
        let pe = params(0.0, 2.0, 1.0);
        let loose = Tolerance::new(1e-9, 1e-5, 1e-10).unwrap();
        let cfg = SolverConfig {
            mode: Mode::Accurate,
            n_max: 3,
            t_max: Some(4.0),
            step: Some(0.05),
            tol: loose,
        };
        let st = ParisianSolver::new(&pt, cfg.clone()).unwrap();
        let se = ParisianSolver::new(&pe, cfg).unwrap();
        let sol_t = st.solve().unwrap();
        let sol_e = se.solve().unwrap();
        for n in 1..=3 {
            for &t in &[1.5, 2.0, 3.0] {
                let got = sol_t.density(n, t);
                let want = sol_e.density(n, t);
                assert!(
                    (got - want).abs() < 0.03 * want.max(1e-4),
                    "n={n}, t={t}: tabulated {got} vs exponential {want}"
                );
            }
        }
    }

    #[test]
    fn tabulated_positive_level_smoke() {
        // 21. positive level with tabulated claims
        let table = ClaimDistribution::tabulated_from_fn(|x| (-x).exp(), 0.01, 25.0).unwrap();
        let pt = ModelParams::new(0.5, 2.0, 1.0, table, 1.0).unwrap();
        let pe = params(0.5, 2.0, 1.0);
        let loose = Tolerance::new(1e-9, 1e-5, 1e-10).unwrap();
        let cfg = SolverConfig {
            mode: Mode::Accurate,
            n_max: 2,
            t_max: Some(3.5),
            step: Some(0.05),
            tol: loose,
        };
        let sol_t = ParisianSolver::new(&pt, cfg.clone())
            .unwrap()
            .solve()
            .unwrap();
        let sol_e = ParisianSolver::new(&pe, cfg).unwrap().solve().unwrap();
        for n in 1..=2 {
            for &t in &[1.5, 2.5] {
                let got = sol_t.density(n, t);
                let want = sol_e.density(n, t);
                assert!(
                    (got - want).abs() < 0.04 * want.max(1e-4),
                    "n={n}, t={t}: tabulated {got} vs exponential {want}"
                );
            }
        }
    }

    fn prop_solution() -> &'static ParisianSolution {
        static SOL: OnceLock<ParisianSolution> = OnceLock::new();
        SOL.get_or_init(|| {
            let p = params(1.0, 2.0, 1.5);
            ParisianSolver::new(&p, config(Mode::Accurate, 5, 7.0, 0.025))
                .unwrap()
                .solve()
                .unwrap()
        })
    }

    #[test]
    fn probabilities_bounded_by_classical_ruin() {
        // 22. the claim-count masses stack below the classical ruin
        //     probability
        let sol = prop_solution();
        let total: f64 = sol.probabilities().iter().sum();
        let classical = ClassicalRuinDensity::new(params(1.0, 2.0, 1.5))
            .ruin_probability(1.0)
            .unwrap();
        assert!(
            total > 0.0 && total < classical,
            "{total} vs classical {classical}"
        );
        for n in 1..=sol.n_max() {
            assert!(sol.probability(n) > 0.0);
            assert!(sol.cumulative(n, sol.t_max()) <= sol.probability(n) * (1.0 + 1e-6));
        }
    }

    proptest! {
        #[test]
        fn density_nonnegative_cumulative_monotone(
            n in 1usize..=5,
            lo in 1.6f64..6.0,
            span in 0.05f64..1.0,
        ) {
            let sol = prop_solution();
            let hi = (lo + span).min(7.0);
            prop_assert!(sol.density(n, lo) >= 0.0);
            prop_assert!(sol.cumulative(n, hi) + 1e-15 >= sol.cumulative(n, lo));
        }
    }
}
