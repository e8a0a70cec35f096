//! Monte Carlo validation engine.
//!
//! Simulates the surplus process exactly (no time discretization): claim
//! epochs are the only events, and within an excursion below zero both the
//! recovery time and the window-completion instant are available in closed
//! form. Ruin is declared the first time an excursion below zero reaches age
//! `d`; the path records the claim count so far, the ruin instant, and the
//! deficit at the window's end.
//!
//! Every path draws from its own counter-based RNG stream derived from
//! `(seed, path index)`, and all tallies are integer counts merged
//! commutatively, so results are bit-identical across thread schedules.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::ModelParams;

/// Simulation configuration.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub params: ModelParams,
    pub paths: u64,
    /// Paths still running at the horizon are counted as unruined. Defaults
    /// to `d` plus fifty claim means, far past where the ruin densities of
    /// low claim orders carry mass.
    pub horizon: Option<f64>,
    pub seed: u64,
}

impl SimConfig {
    pub fn new(params: &ModelParams, paths: u64, seed: u64) -> Self {
        SimConfig {
            params: params.clone(),
            paths,
            horizon: None,
            seed,
        }
    }

    pub fn effective_horizon(&self) -> f64 {
        self.horizon
            .unwrap_or_else(|| self.params.d + 50.0 * self.params.claims.mean())
    }

    fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.paths == 0 {
            return Err(Error::InvalidParameter("paths must be at least 1".into()));
        }
        let h = self.effective_horizon();
        if !(h > self.params.d) || !h.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "horizon {h} must exceed the window length d = {}",
                self.params.d
            )));
        }
        Ok(())
    }
}

/// A binomial proportion with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MCEstimate {
    pub value: f64,
    pub stderr: f64,
    pub count: u64,
    pub paths: u64,
}

impl MCEstimate {
    fn from_count(count: u64, paths: u64) -> Self {
        let value = count as f64 / paths as f64;
        let stderr = (value * (1.0 - value) / paths as f64).sqrt();
        MCEstimate {
            value,
            stderr,
            count,
            paths,
        }
    }

    /// Whether `target` lies within `sigmas` standard errors.
    pub fn within(&self, target: f64, sigmas: f64) -> bool {
        (self.value - target).abs() <= sigmas * self.stderr.max(1e-12)
    }
}

/// Joint tallies from a simulation run.
#[derive(Debug, Clone)]
pub struct JointEstimate {
    pub paths: u64,
    pub horizon: f64,
    /// Probability of ruin (any claim count) by the horizon.
    pub ruin_prob: MCEstimate,
    /// `claim_counts[n-1]` = probability of ruin carrying exactly `n`
    /// claims.
    pub claim_counts: Vec<MCEstimate>,
    /// `cumulative[n-1][i]` = probability of ruin by `t_edges[i]` with `n`
    /// claims.
    pub cumulative: Vec<Vec<MCEstimate>>,
    /// `deficit[n-1][i]` = probability of ruin with `n` claims and window-end
    /// deficit in `[x_edges[i], x_edges[i+1])`.
    pub deficit: Vec<Vec<MCEstimate>>,
    /// Ruined paths whose claim count exceeded the requested range.
    pub beyond_n_max: u64,
    /// Paths not ruined by the horizon.
    pub not_ruined: u64,
}

impl JointEstimate {
    pub fn claim_count(&self, n: usize) -> &MCEstimate {
        &self.claim_counts[n - 1]
    }
}

#[derive(Clone)]
struct Tally {
    ruined: u64,
    beyond: u64,
    not_ruined: u64,
    counts: Vec<u64>,
    time_hist: Vec<Vec<u64>>,
    deficit_hist: Vec<Vec<u64>>,
}

impl Tally {
    fn new(n_max: usize, nt: usize, nx: usize) -> Self {
        Tally {
            ruined: 0,
            beyond: 0,
            not_ruined: 0,
            counts: vec![0; n_max],
            time_hist: vec![vec![0; nt]; n_max],
            deficit_hist: vec![vec![0; nx]; n_max],
        }
    }

    fn add(&mut self, outcome: Option<(u64, f64, f64)>, t_edges: &[f64], x_edges: &[f64]) {
        let Some((n, r, x)) = outcome else {
            self.not_ruined += 1;
            return;
        };
        self.ruined += 1;
        let n = n as usize;
        if n == 0 || n > self.counts.len() {
            self.beyond += 1;
            return;
        }
        self.counts[n - 1] += 1;
        for (i, &edge) in t_edges.iter().enumerate() {
            if r <= edge {
                self.time_hist[n - 1][i] += 1;
            }
        }
        if x_edges.len() >= 2 {
            if let Some(bin) = x_edges.windows(2).position(|e| x >= e[0] && x < e[1]) {
                self.deficit_hist[n - 1][bin] += 1;
            }
        }
    }

    fn merge(mut self, other: Tally) -> Tally {
        self.ruined += other.ruined;
        self.beyond += other.beyond;
        self.not_ruined += other.not_ruined;
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        for (ra, rb) in self.time_hist.iter_mut().zip(&other.time_hist) {
            for (a, b) in ra.iter_mut().zip(rb) {
                *a += b;
            }
        }
        for (ra, rb) in self.deficit_hist.iter_mut().zip(&other.deficit_hist) {
            for (a, b) in ra.iter_mut().zip(rb) {
                *a += b;
            }
        }
        self
    }
}

/// One exact path. Returns `Some((claims at ruin, ruin time, end deficit))`
/// or `None` if the path outlives the horizon (including mid-excursion, when
/// the window would complete past it).
pub fn simulate_path<R: Rng + ?Sized>(
    p: &ModelParams,
    horizon: f64,
    rng: &mut R,
) -> Option<(u64, f64, f64)> {
    let (c, lambda, d) = (p.c, p.lambda, p.d);
    let mut t = 0.0; // time of the last claim (or start)
    let mut v = p.u; // surplus right after it
    let mut n: u64 = 0;
    let mut exc_start: Option<f64> = None;
    loop {
        let gap = -(1.0 - rng.gen::<f64>()).ln() / lambda;
        let t_next = t + gap;
        if let Some(e0) = exc_start {
            let ruin_at = e0 + d;
            let recovery = t + (-v) / c;
            // the window completes if neither the drift recovery nor a claim
            // (which only deepens the excursion) preempts it
            if ruin_at < recovery && ruin_at <= t_next {
                if ruin_at > horizon {
                    return None;
                }
                let x = -(v + c * (ruin_at - t));
                return Some((n, ruin_at, x));
            }
        }
        if t_next > horizon {
            return None;
        }
        let v_before = v + c * (t_next - t);
        if v_before >= 0.0 {
            exc_start = None;
        }
        v = v_before - p.claims.sample(rng);
        n += 1;
        if v < 0.0 && exc_start.is_none() {
            exc_start = Some(t_next);
        }
        t = t_next;
    }
}

fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Runs the full joint estimation: claim-count ruin probabilities for
/// `n = 1..=n_max`, cumulative probabilities at each `t_edges` entry, and a
/// window-end deficit histogram over consecutive `x_edges` bins.
pub fn estimate_joint(
    cfg: &SimConfig,
    n_max: usize,
    t_edges: &[f64],
    x_edges: &[f64],
) -> Result<JointEstimate> {
    cfg.validate()?;
    if n_max == 0 {
        return Err(Error::InvalidParameter("n_max must be at least 1".into()));
    }
    for w in t_edges.windows(2) {
        if !(w[0] < w[1]) {
            return Err(Error::InvalidParameter(
                "t_edges must be strictly increasing".into(),
            ));
        }
    }
    for w in x_edges.windows(2) {
        if !(w[0] < w[1]) {
            return Err(Error::InvalidParameter(
                "x_edges must be strictly increasing".into(),
            ));
        }
    }
    let horizon = cfg.effective_horizon();
    let nx = x_edges.len().saturating_sub(1);
    let tally = (0..cfg.paths)
        .into_par_iter()
        .fold(
            || Tally::new(n_max, t_edges.len(), nx),
            |mut tally, i| {
                let mut rng = path_rng(cfg.seed, i);
                tally.add(
                    simulate_path(&cfg.params, horizon, &mut rng),
                    t_edges,
                    x_edges,
                );
                tally
            },
        )
        .reduce(|| Tally::new(n_max, t_edges.len(), nx), Tally::merge);
    let paths = cfg.paths;
    Ok(JointEstimate {
        paths,
        horizon,
        ruin_prob: MCEstimate::from_count(tally.ruined, paths),
        claim_counts: tally
            .counts
            .iter()
            .map(|&c| MCEstimate::from_count(c, paths))
            .collect(),
        cumulative: tally
            .time_hist
            .iter()
            .map(|row| {
                row.iter()
                    .map(|&c| MCEstimate::from_count(c, paths))
                    .collect()
            })
            .collect(),
        deficit: tally
            .deficit_hist
            .iter()
            .map(|row| {
                row.iter()
                    .map(|&c| MCEstimate::from_count(c, paths))
                    .collect()
            })
            .collect(),
        beyond_n_max: tally.beyond,
        not_ruined: tally.not_ruined,
    })
}

/// First-passage check: probability that the surplus, started at zero,
/// first reaches level `y` with exactly `k` claims incurred, for
/// `k = 0..=k_max`. Passage is certain under the net-profit condition; the
/// horizon only guards against unbounded loops.
pub fn estimate_passage(
    params: &ModelParams,
    y: f64,
    paths: u64,
    k_max: usize,
    horizon: f64,
    seed: u64,
) -> Result<Vec<MCEstimate>> {
    params.validate()?;
    if !(y >= 0.0) || !y.is_finite() {
        return Err(Error::InvalidParameter(format!("level {y} must be >= 0")));
    }
    if paths == 0 {
        return Err(Error::InvalidParameter("paths must be at least 1".into()));
    }
    let counts = (0..paths)
        .into_par_iter()
        .fold(
            || vec![0u64; k_max + 2],
            |mut acc, i| {
                let mut rng = path_rng(seed, i);
                let mut t = 0.0;
                let mut claim_sum = 0.0;
                let mut k = 0usize;
                loop {
                    let hit = (y + claim_sum) / params.c;
                    let t_next = t - (1.0 - rng.gen::<f64>()).ln() / params.lambda;
                    if hit <= t_next {
                        if hit <= horizon && k <= k_max {
                            acc[k] += 1;
                        } else {
                            acc[k_max + 1] += 1; // censored
                        }
                        break;
                    }
                    if t_next > horizon {
                        acc[k_max + 1] += 1;
                        break;
                    }
                    claim_sum += params.claims.sample(&mut rng);
                    k += 1;
                    t = t_next;
                }
                acc
            },
        )
        .reduce(
            || vec![0u64; k_max + 2],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(&b) {
                    *x += y;
                }
                a
            },
        );
    Ok(counts[..=k_max]
        .iter()
        .map(|&c| MCEstimate::from_count(c, paths))
        .collect())
}
