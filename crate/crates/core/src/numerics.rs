//! Uniform grids, quadrature, interpolation, and truncation certification
//! shared by the analytic modules.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, gamma_ur};

use crate::error::{Error, Result};

/// Quadrature scheme attached to a grid or requested from [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuadRule {
    /// Sum of `f(right endpoint) * step` over uniform subintervals.
    RightRectangle,
    /// Composite trapezoid rule.
    Trapezoid,
}

/// Absolute / relative comparison tolerances plus the bound used when
/// truncating semi-infinite integrals and series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub tail_mass: f64,
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64, tail_mass: f64) -> Result<Self> {
        let t = Tolerance {
            abs,
            rel,
            tail_mass,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("abs", self.abs),
            ("rel", self.rel),
            ("tail_mass", self.tail_mass),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "tolerance.{name} must be finite and > 0, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// `|got - want| <= abs + rel * |want|`.
    pub fn close(&self, got: f64, want: f64) -> bool {
        (got - want).abs() <= self.abs + self.rel * want.abs()
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            abs: 1e-9,
            rel: 1e-7,
            tail_mass: 1e-10,
        }
    }
}

/// A density sampled on a uniform grid over `(t0, t1]`.
///
/// `values[i]` is the density at the right endpoint `t0 + (i+1)*step`; the
/// open left end carries no stored node. `anchor` is the right-limit of the
/// density at `t0`, used only to interpolate inside the first cell — many
/// densities handled here are zero on `[0, t0]` but jump at `t0+`, and
/// interpolating the first cell from 0 instead of the jump value would bias
/// every convolution against the grid by O(step).
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    t0: f64,
    t1: f64,
    step: f64,
    values: Vec<f64>,
    rule: QuadRule,
    anchor: f64,
}

impl DensityGrid {
    /// Number of cells implied by the bounds; errors unless `(t1-t0)/step`
    /// is an integer up to 1e-6 of a step.
    fn cell_count(t0: f64, t1: f64, step: f64) -> Result<usize> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "grid step must be > 0, got {step}"
            )));
        }
        if !(t1 > t0) {
            return Err(Error::InvalidParameter(format!(
                "grid needs t1 > t0, got t0={t0}, t1={t1}"
            )));
        }
        let raw = (t1 - t0) / step;
        let n = raw.round();
        if (raw - n).abs() > 1e-6 {
            return Err(Error::InvalidParameter(format!(
                "grid span {}..{} is not a whole number of steps of {step}",
                t0, t1
            )));
        }
        Ok(n as usize)
    }

    /// Builds a grid by evaluating `f` at every right endpoint.
    pub fn fill<F: Fn(f64) -> f64>(
        t0: f64,
        t1: f64,
        step: f64,
        rule: QuadRule,
        f: F,
    ) -> Result<Self> {
        let n = Self::cell_count(t0, t1, step)?;
        let mut values = Vec::with_capacity(n);
        for i in 0..n {
            let t = t0 + (i as f64 + 1.0) * step;
            let v = f(t);
            if !v.is_finite() {
                return Err(Error::Quadrature(format!(
                    "non-finite grid value {v} at t={t}"
                )));
            }
            values.push(v);
        }
        Ok(DensityGrid {
            t0,
            t1,
            step,
            values,
            rule,
            anchor: 0.0,
        })
    }

    /// Wraps precomputed right-endpoint values; their count must equal
    /// `round((t1-t0)/step)`.
    pub fn from_values(
        t0: f64,
        t1: f64,
        step: f64,
        rule: QuadRule,
        values: Vec<f64>,
    ) -> Result<Self> {
        let n = Self::cell_count(t0, t1, step)?;
        if values.len() != n {
            return Err(Error::InvalidParameter(format!(
                "grid expects {n} values for span {t0}..{t1} step {step}, got {}",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Quadrature(format!("non-finite grid value {v}")));
        }
        Ok(DensityGrid {
            t0,
            t1,
            step,
            values,
            rule,
            anchor: 0.0,
        })
    }

    /// Sets the right-limit of the density at `t0`.
    pub fn with_anchor(mut self, anchor: f64) -> Self {
        self.anchor = anchor;
        self
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t1(&self) -> f64 {
        self.t1
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn rule(&self) -> QuadRule {
        self.rule
    }

    pub fn anchor(&self) -> f64 {
        self.anchor
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Right endpoint of cell `i`.
    pub fn node(&self, i: usize) -> f64 {
        self.t0 + (i as f64 + 1.0) * self.step
    }

    /// `(node, value)` pairs in grid order.
    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(|(i, &v)| (self.node(i), v))
    }

    /// Linear interpolation inside `[t0, t1]`, 0 outside. The first cell
    /// interpolates between `anchor` and `values[0]`.
    pub fn value_at(&self, t: f64) -> f64 {
        interp_linear(self, t)
    }

    /// Integral of the grid density over `(t0, t]` under the grid's own rule
    /// (`t` clipped to `[t0, t1]`). Partial last cells use the same rule
    /// restricted to the covered fraction.
    pub fn integrate_to(&self, t: f64) -> f64 {
        let t = t.min(self.t1);
        if t <= self.t0 || self.values.is_empty() {
            return 0.0;
        }
        let whole = ((t - self.t0) / self.step + 1e-9).floor() as usize;
        let whole = whole.min(self.values.len());
        let mut acc = 0.0;
        match self.rule {
            QuadRule::RightRectangle => {
                for i in 0..whole {
                    acc += self.values[i];
                }
                acc *= self.step;
                if whole < self.values.len() {
                    let frac = t - (self.t0 + whole as f64 * self.step);
                    if frac > 1e-9 * self.step {
                        acc += frac * self.values[whole];
                    }
                }
            }
            QuadRule::Trapezoid => {
                let mut left = self.anchor;
                for i in 0..whole {
                    acc += 0.5 * (left + self.values[i]);
                    left = self.values[i];
                }
                acc *= self.step;
                if whole < self.values.len() {
                    let frac = t - (self.t0 + whole as f64 * self.step);
                    if frac > 1e-9 * self.step {
                        let right = self.value_at(t);
                        acc += 0.5 * (left + right) * frac;
                    }
                }
            }
        }
        acc
    }

    /// Cumulative integral at every node.
    pub fn cumulative(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.values.len());
        let mut acc = 0.0;
        match self.rule {
            QuadRule::RightRectangle => {
                for &v in &self.values {
                    acc += v * self.step;
                    out.push(acc);
                }
            }
            QuadRule::Trapezoid => {
                let mut left = self.anchor;
                for &v in &self.values {
                    acc += 0.5 * (left + v) * self.step;
                    left = v;
                    out.push(acc);
                }
            }
        }
        out
    }

    /// Largest stored value magnitude (sup norm).
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Applies `f` to every stored value (anchor included).
    pub fn map<F: Fn(f64) -> f64>(mut self, f: F) -> Self {
        for v in &mut self.values {
            *v = f(*v);
        }
        self.anchor = f(self.anchor);
        self
    }
}

/// Linear interpolation of a grid density: exact at nodes, `anchor` at `t0`,
/// 0 strictly outside `[t0, t1]`.
pub fn interp_linear(grid: &DensityGrid, t: f64) -> f64 {
    if t < grid.t0 || t > grid.t1 + 1e-12 * grid.step || grid.values.is_empty() {
        return 0.0;
    }
    let s = (t - grid.t0) / grid.step;
    // Cell index: node i sits at s = i+1.
    let i = s.floor() as usize;
    if i >= grid.values.len() {
        return grid.values[grid.values.len() - 1];
    }
    let frac = s - i as f64;
    let left = if i == 0 {
        grid.anchor
    } else {
        grid.values[i - 1]
    };
    left + (grid.values[i] - left) * frac
}

/// Integrates a callable over `[a, b]` with a uniform step close to `step`
/// (the span is split into `round((b-a)/step)` equal cells, at least one).
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    rule: QuadRule,
    step: f64,
) -> Result<f64> {
    if !(step > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "integration step must be > 0, got {step}"
        )));
    }
    if b < a {
        return Err(Error::InvalidParameter(format!(
            "integration needs a <= b, got {a} > {b}"
        )));
    }
    if a == b {
        return Ok(0.0);
    }
    let n = (((b - a) / step).round() as usize).max(1);
    let h = (b - a) / n as f64;
    let eval = |t: f64| -> Result<f64> {
        let v = f(t);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Quadrature(format!(
                "non-finite integrand value {v} at t={t}"
            )))
        }
    };
    let mut acc = 0.0;
    match rule {
        QuadRule::RightRectangle => {
            for i in 1..=n {
                acc += eval(a + i as f64 * h)?;
            }
            acc *= h;
        }
        QuadRule::Trapezoid => {
            acc += 0.5 * (eval(a)? + eval(b)?);
            for i in 1..n {
                acc += eval(a + i as f64 * h)?;
            }
            acc *= h;
        }
    }
    Ok(acc)
}

/// Composite Simpson rule with `2*half_panels` cells; used internally where
/// smooth integrands need better than O(step^2) without refinement loops.
pub(crate) fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, half_panels: usize) -> f64 {
    if b <= a {
        return 0.0;
    }
    let n = 2 * half_panels.max(1);
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// Richardson extrapolation of two estimates of the same integral computed
/// at steps `h` and `h/2` with error order `order`.
pub fn richardson(coarse: f64, fine: f64, order: u32) -> f64 {
    let f = (1u64 << order) as f64;
    fine + (fine - coarse) / (f - 1.0)
}

/// Envelope `coef * t^power * exp(-rate*t)` dominating an integrand tail.
#[derive(Debug, Clone, Copy)]
pub struct DecayEnvelope {
    pub coef: f64,
    pub rate: f64,
    pub power: f64,
}

/// Rigorous upper bound on the envelope's integral over `[t_from, inf)` via
/// the upper incomplete gamma function.
pub fn certify_tail(env: DecayEnvelope, t_from: f64) -> Result<f64> {
    let DecayEnvelope { coef, rate, power } = env;
    if !(rate > 0.0) || !rate.is_finite() {
        return Err(Error::Truncation(format!(
            "cannot certify a tail with non-positive decay rate {rate}"
        )));
    }
    if !(coef >= 0.0) || !power.is_finite() || power < 0.0 {
        return Err(Error::Truncation(format!(
            "tail envelope needs coef >= 0 and power >= 0, got coef={coef}, power={power}"
        )));
    }
    if coef == 0.0 {
        return Ok(0.0);
    }
    let t_from = t_from.max(0.0);
    if power == 0.0 {
        return Ok(coef * (-rate * t_from).exp() / rate);
    }
    // integral = coef * Gamma(power+1, rate*t_from) / rate^(power+1)
    let a = power + 1.0;
    let upper = gamma(a) * gamma_ur(a, rate * t_from);
    Ok(coef * upper / rate.powf(a))
}

/// Fixed-shape pairwise sum; order-insensitive reduction for statistics.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }
}
