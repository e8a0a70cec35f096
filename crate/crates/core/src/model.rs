//! Model parameters, claim-size distributions, and k-fold convolution
//! machinery.

use std::fmt;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;
use std::sync::{Arc, RwLock};

use rand::Rng;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::numerics::DensityGrid;

/// ln(k!)
pub(crate) fn ln_factorial(k: usize) -> f64 {
    ln_gamma(k as f64 + 1.0)
}

/// Poisson pmf `e^{-mean} mean^k / k!`, valid for any `mean >= 0`.
pub(crate) fn poisson_pmf(k: usize, mean: f64) -> f64 {
    if mean < 0.0 {
        return 0.0;
    }
    if mean == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    (k as f64 * mean.ln() - mean - ln_factorial(k)).exp()
}

/// Upper bound on `P(Poisson(mean) > k)`; summed until the added term is
/// negligible, so the result is exact up to ~1e-16 relative.
pub(crate) fn poisson_tail(k: usize, mean: f64) -> f64 {
    if mean <= 0.0 {
        return 0.0;
    }
    let mut term = poisson_pmf(k + 1, mean);
    let mut acc = 0.0;
    let mut j = k + 1;
    loop {
        acc += term;
        j += 1;
        term *= mean / j as f64;
        if term < acc * 1e-18 + 1e-320 || j > k + 10_000 {
            break;
        }
    }
    acc
}

const CONV_TAIL_CUTOFF: f64 = 1e-12;

/// A measure on `[0, inf)`: a finite set of atoms plus an absolutely
/// continuous part. Zero-fold convolutions and the no-claim branch of the
/// first-passage law are pure atoms and must never be smeared into spikes.
#[derive(Clone)]
pub struct AtomDensity {
    pub atoms: Vec<(f64, f64)>,
    pub density: DensityPart,
}

/// Continuous part of an [`AtomDensity`].
#[derive(Clone)]
pub enum DensityPart {
    None,
    Grid(DensityGrid),
    Func(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for DensityPart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DensityPart::None => write!(f, "DensityPart::None"),
            DensityPart::Grid(g) => write!(f, "DensityPart::Grid({} cells)", g.len()),
            DensityPart::Func(_) => write!(f, "DensityPart::Func(..)"),
        }
    }
}

impl fmt::Debug for AtomDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AtomDensity")
            .field("atoms", &self.atoms)
            .field("density", &self.density)
            .finish()
    }
}

impl AtomDensity {
    /// A single atom and no continuous part.
    pub fn pure_atom(location: f64, mass: f64) -> Result<Self> {
        let a = AtomDensity {
            atoms: vec![(location, mass)],
            density: DensityPart::None,
        };
        a.validate()?;
        Ok(a)
    }

    pub fn new(atoms: Vec<(f64, f64)>, density: DensityPart) -> Result<Self> {
        let a = AtomDensity { atoms, density };
        a.validate()?;
        Ok(a)
    }

    pub fn validate(&self) -> Result<()> {
        for &(loc, mass) in &self.atoms {
            if !(loc >= 0.0) || !loc.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "atom location {loc} invalid"
                )));
            }
            if !(mass >= 0.0) || !mass.is_finite() {
                return Err(Error::InvalidParameter(format!("atom mass {mass} invalid")));
            }
        }
        for (i, &(a, _)) in self.atoms.iter().enumerate() {
            for &(b, _) in &self.atoms[i + 1..] {
                if (a - b).abs() <= f64::EPSILON * a.abs().max(b.abs()).max(1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "duplicate atom location {a}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Continuous-part density at `t` (atoms excluded).
    pub fn density_at(&self, t: f64) -> f64 {
        match &self.density {
            DensityPart::None => 0.0,
            DensityPart::Grid(g) => g.value_at(t),
            DensityPart::Func(f) => f(t),
        }
    }

    pub fn atom_mass(&self) -> f64 {
        self.atoms.iter().map(|&(_, m)| m).sum()
    }

    /// Total mass given the integral of the continuous part, checked against
    /// the sub-probability bound `1 + tol`.
    pub fn check_subprobability(&self, density_integral: f64, tol: f64) -> Result<f64> {
        let total = self.atom_mass() + density_integral;
        if total > 1.0 + tol {
            return Err(Error::InvalidParameter(format!(
                "measure mass {total} exceeds 1 + {tol}"
            )));
        }
        Ok(total)
    }
}

/// Claim-size law: closed-form exponential, or a density tabulated on a
/// uniform grid (loaded from CSV or sampled from a callable).
#[derive(Debug, Clone)]
pub enum ClaimDistribution {
    Exponential { mu: f64 },
    Tabulated(Arc<TabulatedClaims>),
}

/// Density table on `x = 0, step, 2*step, ...` with lazily extended k-fold
/// convolution tables.
pub struct TabulatedClaims {
    step: f64,
    pdf: Vec<f64>,
    cdf: Vec<f64>,
    mean: f64,
    sup_pdf: f64,
    /// convs[k-1] is the k-fold convolution; built on demand.
    convs: RwLock<Vec<Arc<ConvTable>>>,
}

impl fmt::Debug for TabulatedClaims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TabulatedClaims")
            .field("step", &self.step)
            .field("points", &self.pdf.len())
            .field("mean", &self.mean)
            .finish()
    }
}

#[derive(Debug, Clone)]
struct ConvTable {
    pdf: Vec<f64>,
    /// trapezoid cumulative of `pdf`
    cum: Vec<f64>,
    total: f64,
    sup: f64,
}

impl ConvTable {
    fn build(pdf: Vec<f64>, step: f64) -> Self {
        let mut cum = Vec::with_capacity(pdf.len());
        let mut acc = 0.0;
        cum.push(0.0);
        for i in 1..pdf.len() {
            acc += 0.5 * (pdf[i - 1] + pdf[i]) * step;
            cum.push(acc);
        }
        let total = *cum.last().unwrap_or(&0.0);
        let sup = pdf.iter().cloned().fold(0.0f64, f64::max);
        ConvTable {
            pdf,
            cum,
            total,
            sup,
        }
    }

    fn lookup(table: &[f64], step: f64, x: f64) -> f64 {
        if x < 0.0 || table.is_empty() {
            return 0.0;
        }
        let s = x / step;
        let i = s.floor() as usize;
        if i + 1 >= table.len() {
            return if i < table.len() {
                table[table.len() - 1]
            } else {
                0.0
            };
        }
        let frac = s - i as f64;
        table[i] + (table[i + 1] - table[i]) * frac
    }
}

/// Trapezoid convolution of two uniform tables anchored at 0.
fn conv_tables(a: &[f64], b: &[f64], step: f64) -> Vec<f64> {
    let n = a.len() + b.len() - 1;
    let mut out = vec![0.0; n];
    for (i, o) in out.iter_mut().enumerate().skip(1) {
        let lo = (i + 1).saturating_sub(b.len());
        let hi = i.min(a.len() - 1);
        let mut acc = 0.0;
        for j in lo..=hi {
            let w = if j == 0 || j == i { 0.5 } else { 1.0 };
            acc += w * a[j] * b[i - j];
        }
        *o = acc * step;
    }
    out
}

impl TabulatedClaims {
    fn new(step: f64, mut pdf: Vec<f64>) -> Result<Arc<Self>> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::ClaimTable(format!(
                "grid step must be > 0, got {step}"
            )));
        }
        if pdf.len() < 3 {
            return Err(Error::ClaimTable("need at least 3 grid points".into()));
        }
        if let Some(v) = pdf.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::ClaimTable(format!(
                "density values must be finite and >= 0, got {v}"
            )));
        }
        let trapz: f64 = pdf.windows(2).map(|w| 0.5 * (w[0] + w[1]) * step).sum();
        if (trapz - 1.0).abs() > 1e-3 {
            return Err(Error::ClaimTable(format!(
                "density integrates to {trapz}, not a probability density"
            )));
        }
        // Renormalize so the table integrates to 1 exactly under its own
        // trapezoid rule; downstream mass identities rely on it.
        for v in &mut pdf {
            *v /= trapz;
        }
        let mut cdf = Vec::with_capacity(pdf.len());
        let mut acc = 0.0;
        cdf.push(0.0);
        for i in 1..pdf.len() {
            acc += 0.5 * (pdf[i - 1] + pdf[i]) * step;
            cdf.push(acc);
        }
        let mean: f64 = pdf
            .iter()
            .enumerate()
            .map(|(i, &f)| i as f64 * step * f)
            .enumerate()
            .map(|(i, xf)| {
                // trapezoid weights on x*f(x)
                if i == 0 || i == pdf.len() - 1 {
                    0.5 * xf
                } else {
                    xf
                }
            })
            .sum::<f64>()
            * step;
        let sup_pdf = pdf.iter().cloned().fold(0.0f64, f64::max);
        let base = ConvTable::build(pdf.clone(), step);
        Ok(Arc::new(TabulatedClaims {
            step,
            pdf,
            cdf,
            mean,
            sup_pdf,
            convs: RwLock::new(vec![Arc::new(base)]),
        }))
    }

    fn conv_table(&self, k: usize) -> Arc<ConvTable> {
        debug_assert!(k >= 1);
        {
            let convs = self.convs.read().unwrap();
            if convs.len() >= k {
                return convs[k - 1].clone();
            }
        }
        let mut convs = self.convs.write().unwrap();
        while convs.len() < k {
            let prev = convs.last().unwrap();
            let next = conv_tables(&prev.pdf, &self.pdf, self.step);
            convs.push(Arc::new(ConvTable::build(next, self.step)));
        }
        convs[k - 1].clone()
    }

    /// Largest tabulated x.
    pub fn x_max(&self) -> f64 {
        (self.pdf.len() - 1) as f64 * self.step
    }

    pub fn step(&self) -> f64 {
        self.step
    }
}

impl ClaimDistribution {
    pub fn exponential(mu: f64) -> Result<Self> {
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "exponential claim rate must be > 0, got {mu}"
            )));
        }
        Ok(ClaimDistribution::Exponential { mu })
    }

    /// Tabulates a density callable on `x = 0, step, ..., x_max`.
    pub fn tabulated_from_fn<F: Fn(f64) -> f64>(f: F, step: f64, x_max: f64) -> Result<Self> {
        if !(x_max > step) {
            return Err(Error::ClaimTable(format!(
                "x_max {x_max} must exceed step {step}"
            )));
        }
        let n = (x_max / step).round() as usize;
        let pdf: Vec<f64> = (0..=n).map(|i| f(i as f64 * step)).collect();
        Ok(ClaimDistribution::Tabulated(TabulatedClaims::new(
            step, pdf,
        )?))
    }

    /// Tabulates density values given at `x = x0, x0+step, ...`; `x0` must be
    /// a whole number of steps (the missing prefix is zero-filled).
    pub fn tabulated(x0: f64, step: f64, values: Vec<f64>) -> Result<Self> {
        if x0 < 0.0 {
            return Err(Error::ClaimTable(format!(
                "claim sizes are nonnegative, x0 = {x0}"
            )));
        }
        let lead = x0 / step;
        if (lead - lead.round()).abs() > 1e-6 {
            return Err(Error::ClaimTable(format!(
                "x0 = {x0} is not a whole number of steps of {step}"
            )));
        }
        let mut pdf = vec![0.0; lead.round() as usize];
        pdf.extend(values);
        Ok(ClaimDistribution::Tabulated(TabulatedClaims::new(
            step, pdf,
        )?))
    }

    /// Reads a two-column `x, f(x)` CSV with strictly increasing, uniformly
    /// spaced x. A non-numeric first line is treated as a header.
    pub fn tabulated_from_csv<R: Read>(reader: R) -> Result<Self> {
        let buf = BufReader::new(reader);
        let mut xs: Vec<f64> = Vec::new();
        let mut fs: Vec<f64> = Vec::new();
        for (lineno, line) in buf.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let mut parts = trimmed.split(',').map(str::trim);
            let (a, b) = match (parts.next(), parts.next()) {
                (Some(a), Some(b)) => (a, b),
                _ => {
                    return Err(Error::ClaimTable(format!(
                        "line {}: expected two comma-separated columns",
                        lineno + 1
                    )))
                }
            };
            match (a.parse::<f64>(), b.parse::<f64>()) {
                (Ok(x), Ok(f)) => {
                    xs.push(x);
                    fs.push(f);
                }
                _ if xs.is_empty() => continue, // header row
                _ => {
                    return Err(Error::ClaimTable(format!(
                        "line {}: cannot parse '{trimmed}'",
                        lineno + 1
                    )))
                }
            }
        }
        if xs.len() < 3 {
            return Err(Error::ClaimTable("need at least 3 data rows".into()));
        }
        let step = xs[1] - xs[0];
        if !(step > 0.0) {
            return Err(Error::ClaimTable(
                "x column must be strictly increasing".into(),
            ));
        }
        for w in xs.windows(2) {
            let dx = w[1] - w[0];
            if dx <= 0.0 {
                return Err(Error::ClaimTable(
                    "x column must be strictly increasing".into(),
                ));
            }
            if (dx - step).abs() > 1e-6 * step {
                return Err(Error::ClaimTable(format!(
                    "x column must be uniformly spaced: step {step} vs {dx}"
                )));
            }
        }
        Self::tabulated(xs[0], step, fs)
    }

    pub fn tabulated_from_csv_path<P: AsRef<Path>>(path: P) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::tabulated_from_csv(file)
    }

    /// Default tabulation parameters: `step = 0.01 * mean`, truncated where
    /// the tail drops below 1e-12.
    pub fn default_table_grid(mean: f64, tail: impl Fn(f64) -> f64) -> (f64, f64) {
        let step = 0.01 * mean;
        let mut x_max = mean;
        while tail(x_max) >= CONV_TAIL_CUTOFF && x_max < 1e6 * mean {
            x_max += mean;
        }
        // snap to a whole number of steps
        let n = (x_max / step).ceil();
        (step, n * step)
    }

    pub fn is_exponential(&self) -> bool {
        matches!(self, ClaimDistribution::Exponential { .. })
    }

    pub fn exp_rate(&self) -> Option<f64> {
        match self {
            ClaimDistribution::Exponential { mu } => Some(*mu),
            ClaimDistribution::Tabulated(_) => None,
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        match self {
            ClaimDistribution::Exponential { mu } => mu * (-mu * x).exp(),
            ClaimDistribution::Tabulated(t) => ConvTable::lookup(&t.pdf, t.step, x),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        match self {
            ClaimDistribution::Exponential { mu } => -(-mu * x).exp_m1(),
            ClaimDistribution::Tabulated(t) => {
                if x >= t.x_max() {
                    1.0
                } else {
                    ConvTable::lookup(&t.cdf, t.step, x).min(1.0)
                }
            }
        }
    }

    /// `P(X > x)`; nonincreasing, 1 at x <= 0.
    pub fn tail(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 1.0;
        }
        match self {
            ClaimDistribution::Exponential { mu } => (-mu * x).exp(),
            ClaimDistribution::Tabulated(_) => (1.0 - self.cdf(x)).max(0.0),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            ClaimDistribution::Exponential { mu } => 1.0 / mu,
            ClaimDistribution::Tabulated(t) => t.mean,
        }
    }

    pub fn sup_pdf(&self) -> f64 {
        match self {
            ClaimDistribution::Exponential { mu } => *mu,
            ClaimDistribution::Tabulated(t) => t.sup_pdf,
        }
    }

    /// Mass of the atomic part of the k-fold convolution (1 for k = 0, the
    /// unit atom at the origin; 0 otherwise).
    pub fn conv_atom_mass(&self, k: usize) -> f64 {
        if k == 0 {
            1.0
        } else {
            0.0
        }
    }

    /// Density of `X_1 + ... + X_k` at `x` (continuous part only; the k = 0
    /// law is the unit atom at 0 and is exposed through `conv_atom_mass` /
    /// `conv_law` so consumers handle it exactly).
    pub fn conv_density(&self, k: usize, x: f64) -> f64 {
        if k == 0 || x < 0.0 {
            return 0.0;
        }
        match self {
            ClaimDistribution::Exponential { mu } => {
                if x == 0.0 {
                    return if k == 1 { *mu } else { 0.0 };
                }
                let ln =
                    k as f64 * mu.ln() + (k as f64 - 1.0) * x.ln() - mu * x - ln_factorial(k - 1);
                ln.exp()
            }
            ClaimDistribution::Tabulated(t) => {
                let table = t.conv_table(k);
                ConvTable::lookup(&table.pdf, t.step, x)
            }
        }
    }

    /// `P(X_1 + ... + X_k > x)`; for k = 0 this is 1 for x < 0 and 0
    /// otherwise (the empty sum is 0).
    pub fn conv_tail(&self, k: usize, x: f64) -> f64 {
        if k == 0 {
            return if x < 0.0 { 1.0 } else { 0.0 };
        }
        if x <= 0.0 {
            return 1.0;
        }
        match self {
            ClaimDistribution::Exponential { mu } => {
                let mut term = (-mu * x).exp();
                let mut acc = 0.0;
                for j in 0..k {
                    acc += term;
                    term *= mu * x / (j as f64 + 1.0);
                }
                acc.min(1.0)
            }
            ClaimDistribution::Tabulated(t) => {
                let table = t.conv_table(k);
                if x >= (table.pdf.len() - 1) as f64 * t.step {
                    return 0.0;
                }
                (table.total - ConvTable::lookup(&table.cum, t.step, x)).max(0.0)
            }
        }
    }

    /// Full k-fold convolution law as atoms plus continuous part.
    pub fn conv_law(&self, k: usize) -> AtomDensity {
        if k == 0 {
            return AtomDensity::pure_atom(0.0, 1.0).expect("unit atom is valid");
        }
        let dist = self.clone();
        AtomDensity {
            atoms: Vec::new(),
            density: DensityPart::Func(Arc::new(move |x| dist.conv_density(k, x))),
        }
    }

    /// `sup_x f^{k*}(x)`, used in truncation envelopes.
    pub fn conv_sup(&self, k: usize) -> f64 {
        if k == 0 {
            return 0.0;
        }
        match self {
            ClaimDistribution::Exponential { mu } => {
                if k == 1 {
                    *mu
                } else {
                    // mode at (k-1)/mu
                    let m = k as f64 - 1.0;
                    (mu.ln() + m * m.ln() - m - ln_factorial(k - 1)).exp()
                }
            }
            ClaimDistribution::Tabulated(t) => t.conv_table(k).sup,
        }
    }

    /// Laplace transform of the claim density at `s >= 0`.
    pub fn laplace(&self, s: f64) -> Result<f64> {
        match self {
            ClaimDistribution::Exponential { mu } => {
                if s <= -*mu {
                    return Err(Error::InvalidParameter(format!(
                        "laplace transform diverges at s = {s} <= -mu"
                    )));
                }
                Ok(mu / (mu + s))
            }
            ClaimDistribution::Tabulated(t) => {
                let mut acc = 0.0;
                for (i, &f) in t.pdf.iter().enumerate() {
                    let x = i as f64 * t.step;
                    let w = if i == 0 || i == t.pdf.len() - 1 {
                        0.5
                    } else {
                        1.0
                    };
                    acc += w * f * (-s * x).exp();
                }
                let v = acc * t.step;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::RootNotBracketed(format!(
                        "transform evaluation failed at s = {s}"
                    )))
                }
            }
        }
    }

    /// Draws one claim size.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            ClaimDistribution::Exponential { mu } => {
                let u: f64 = rng.gen();
                -(1.0 - u).ln() / mu
            }
            ClaimDistribution::Tabulated(t) => {
                let total = *t.cdf.last().unwrap();
                let target: f64 = rng.gen::<f64>() * total;
                let i = t.cdf.partition_point(|&c| c < target);
                if i == 0 {
                    return 0.0;
                }
                let (lo, hi) = (t.cdf[i - 1], t.cdf[i]);
                let frac = if hi > lo {
                    (target - lo) / (hi - lo)
                } else {
                    1.0
                };
                (i as f64 - 1.0 + frac) * t.step
            }
        }
    }
}

/// Parameters of the surplus process `U(t) = u + c t - S(t)` with Poisson
/// claim arrivals of rate `lambda` and Parisian delay `d`.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub u: f64,
    pub c: f64,
    pub lambda: f64,
    pub claims: ClaimDistribution,
    pub d: f64,
}

impl ModelParams {
    pub fn new(u: f64, c: f64, lambda: f64, claims: ClaimDistribution, d: f64) -> Result<Self> {
        let p = ModelParams {
            u,
            c,
            lambda,
            claims,
            d,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.u >= 0.0) || !self.u.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "initial reserve u = {} must be >= 0",
                self.u
            )));
        }
        if !(self.c > 0.0) || !self.c.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "premium rate c = {} must be > 0",
                self.c
            )));
        }
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "claim intensity lambda = {} must be > 0",
                self.lambda
            )));
        }
        if !(self.d >= 0.0) || !self.d.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "delay d = {} must be >= 0",
                self.d
            )));
        }
        let load = self.lambda * self.claims.mean();
        // 1e-9 slack absorbs trapezoid error in tabulated means; exponential
        // means are exact, so the condition is enforced strictly there.
        let slack = if self.claims.is_exponential() {
            0.0
        } else {
            1e-9 * self.c.max(1.0)
        };
        if self.c <= load - slack {
            return Err(Error::NetProfit { c: self.c, load });
        }
        Ok(())
    }

    /// `lambda + mu * c` for exponential claims; the common exponent rate of
    /// every closed form.
    pub(crate) fn beta(&self) -> Option<f64> {
        self.claims.exp_rate().map(|mu| self.lambda + mu * self.c)
    }

    /// Same params with a different initial reserve (validation preserved:
    /// `u` does not interact with the net profit condition).
    pub fn with_u(&self, u: f64) -> Result<Self> {
        ModelParams::new(u, self.c, self.lambda, self.claims.clone(), self.d)
    }
}

/// Solves the fundamental equation `lambda + delta - c s = lambda r fhat(s)`
/// for its unique nonnegative root.
///
/// Exponential claims reduce to the quadratic
/// `c s^2 + s (c mu - lambda - delta) - mu (lambda + delta - lambda r) = 0`;
/// other claims use bisection on `[0, (lambda+delta)/c]`, where the left side
/// is positive at 0 (given `delta > 0` or `r < 1`) and negative once
/// `lambda + delta - c s < 0`.
pub fn solve_lundberg(
    dist: &ClaimDistribution,
    c: f64,
    lambda: f64,
    delta: f64,
    r: f64,
) -> Result<f64> {
    if !(c > 0.0) || !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need c > 0 and lambda > 0, got c={c}, lambda={lambda}"
        )));
    }
    if !(delta >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "discount delta = {delta} must be >= 0"
        )));
    }
    if !(r > 0.0 && r <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "weight r = {r} must be in (0, 1]"
        )));
    }
    if delta == 0.0 && r == 1.0 {
        // s = 0 solves exactly; under net profit it is the unique
        // nonnegative root.
        return Ok(0.0);
    }
    if let ClaimDistribution::Exponential { mu } = dist {
        let b = c * mu - lambda - delta;
        let m = mu * (lambda + delta - lambda * r);
        let disc = (b * b + 4.0 * c * m).sqrt();
        // stable positive root of c s^2 + b s - m = 0
        let root = if b >= 0.0 {
            2.0 * m / (b + disc)
        } else {
            (disc - b) / (2.0 * c)
        };
        return Ok(root);
    }
    let g = |s: f64| -> Result<f64> { Ok(lambda + delta - c * s - lambda * r * dist.laplace(s)?) };
    let mut lo = 0.0;
    let mut hi = (lambda + delta) / c;
    let glo = g(lo)?;
    let ghi = g(hi)?;
    if !(glo > 0.0) || !(ghi < 0.0) {
        return Err(Error::RootNotBracketed(format!(
            "fundamental equation not bracketed on [0, {hi}]: g(0)={glo}, g(hi)={ghi}"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}
