//! Separable sparsity penalties and their proximal operators.
//!
//! Each penalty `g(x) = sum_i p(x_i)` is built from a one-dimensional,
//! even, locally Lipschitz, Clarke-regular piece `p`:
//!
//! - `Zero`:  `p = 0`
//! - `L1`:   `p(t) = lambda * |t|`
//! - `MCP`:  `p(t) = lambda*|t| - t^2/(2 beta)` for `|t| <= beta*lambda`,
//!   constant `beta*lambda^2/2` beyond (`beta > 1`)
//! - `SCAD`: linear with slope `lambda` up to `lambda`, quadratic blend on
//!   `[lambda, a*lambda]`, constant `lambda^2 (a+1)/2` beyond (`a > 2`)
//!
//! Proximal points minimize `p(y) + (y - v)^2 / (2 gamma)`. All pieces are
//! quadratic, so the minimizer is found by exact candidate enumeration: the
//! stationary point of each smooth piece clipped to that piece, plus the
//! piece boundaries (plus the interval endpoints for the box-constrained
//! variant). For nonconvex penalties with large steps the objective can have
//! several global minimizers; ties are broken toward the smallest `|y|`, so
//! the set-valued prox becomes a deterministic selection. The unconstrained
//! operator is odd by construction (negative inputs are mirrored).

use serde::{Deserialize, Serialize};

use crate::geometry::HyperRect;
use crate::vecmath::check_dim;
use crate::{Error, Result};

/// Separable penalty, applied coordinate-wise and summed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Penalty {
    Zero,
    L1 { lambda: f64 },
    Mcp { lambda: f64, beta: f64 },
    Scad { lambda: f64, a: f64 },
}

/// Per-coordinate closed interval of Clarke subgradients.
#[derive(Debug, Clone, PartialEq)]
pub struct SubgradientInterval {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl SubgradientInterval {
    pub fn coord(&self, i: usize) -> (f64, f64) {
        (self.lo[i], self.hi[i])
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda >= 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("lambda={lambda} must be nonnegative")))
    }
}

impl Penalty {
    pub fn l1(lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        Ok(Self::L1 { lambda })
    }

    /// MCP with concavity parameter `beta > 1`.
    pub fn mcp(lambda: f64, beta: f64) -> Result<Self> {
        check_lambda(lambda)?;
        if !(beta > 1.0 && beta.is_finite()) {
            return Err(Error::InvalidParameter(format!("MCP beta={beta} must exceed 1")));
        }
        Ok(Self::Mcp { lambda, beta })
    }

    /// SCAD with knot parameter `a > 2`.
    pub fn scad(lambda: f64, a: f64) -> Result<Self> {
        check_lambda(lambda)?;
        if !(a > 2.0 && a.is_finite()) {
            return Err(Error::InvalidParameter(format!("SCAD a={a} must exceed 2")));
        }
        Ok(Self::Scad { lambda, a })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Zero => Ok(()),
            Self::L1 { lambda } => check_lambda(lambda),
            Self::Mcp { lambda, beta } => {
                Self::mcp(lambda, beta)?;
                Ok(())
            }
            Self::Scad { lambda, a } => {
                Self::scad(lambda, a)?;
                Ok(())
            }
        }
    }

    /// One-dimensional penalty value `p(t)`.
    pub fn value_1d(&self, t: f64) -> f64 {
        let u = t.abs();
        match *self {
            Self::Zero => 0.0,
            Self::L1 { lambda } => lambda * u,
            Self::Mcp { lambda, beta } => {
                if u <= beta * lambda {
                    lambda * u - t * t / (2.0 * beta)
                } else {
                    0.5 * beta * lambda * lambda
                }
            }
            Self::Scad { lambda, a } => {
                if u <= lambda {
                    lambda * u
                } else if u <= a * lambda {
                    (2.0 * a * lambda * u - t * t - lambda * lambda) / (2.0 * (a - 1.0))
                } else {
                    0.5 * lambda * lambda * (a + 1.0)
                }
            }
        }
    }

    /// `g(x) = sum_i p(x_i)`.
    pub fn value(&self, x: &[f64]) -> f64 {
        x.iter().map(|t| self.value_1d(*t)).sum()
    }

    /// Clarke interval of `p` at `t`: the singleton derivative where `p` is
    /// differentiable, `[-lambda, lambda]` at the kink `t = 0`.
    pub fn clarke_1d(&self, t: f64) -> (f64, f64) {
        match *self {
            Self::Zero => (0.0, 0.0),
            Self::L1 { lambda } => {
                if t == 0.0 {
                    (-lambda, lambda)
                } else {
                    let d = lambda * t.signum();
                    (d, d)
                }
            }
            Self::Mcp { lambda, beta } => {
                if t == 0.0 {
                    (-lambda, lambda)
                } else if t.abs() <= beta * lambda {
                    let d = lambda * t.signum() - t / beta;
                    (d, d)
                } else {
                    (0.0, 0.0)
                }
            }
            Self::Scad { lambda, a } => {
                if t == 0.0 {
                    (-lambda, lambda)
                } else {
                    let u = t.abs();
                    let d = if u <= lambda {
                        lambda
                    } else if u <= a * lambda {
                        (a * lambda - u) / (a - 1.0)
                    } else {
                        0.0
                    };
                    (d * t.signum(), d * t.signum())
                }
            }
        }
    }

    /// Clarke subdifferential of the separable penalty at `x`.
    pub fn clarke_interval(&self, x: &[f64]) -> SubgradientInterval {
        let mut lo = Vec::with_capacity(x.len());
        let mut hi = Vec::with_capacity(x.len());
        for t in x {
            let (l, h) = self.clarke_1d(*t);
            lo.push(l);
            hi.push(h);
        }
        SubgradientInterval { lo, hi }
    }

    /// Prox objective `p(y) + (y - v)^2 / (2 gamma)`.
    fn objective_1d(&self, y: f64, v: f64, gamma: f64) -> f64 {
        let d = y - v;
        self.value_1d(y) + d * d / (2.0 * gamma)
    }

    /// Candidate minimizers of the prox objective on the nonnegative axis,
    /// for `v >= 0`: stationary points of each smooth piece clipped to the
    /// piece, plus the piece boundaries. Pieces whose quadratic coefficient
    /// is not positive have their minimum at a boundary, which is included.
    fn candidates_nonneg(&self, v: f64, gamma: f64, out: &mut Vec<f64>) {
        out.push(0.0);
        match *self {
            Self::Zero => out.push(v),
            Self::L1 { lambda } => out.push((v - gamma * lambda).max(0.0)),
            Self::Mcp { lambda, beta } => {
                let knot = beta * lambda;
                out.push(knot);
                let denom = 1.0 - gamma / beta;
                if denom > 0.0 {
                    out.push(((v - gamma * lambda) / denom).clamp(0.0, knot));
                }
                out.push(v.max(knot));
            }
            Self::Scad { lambda, a } => {
                out.push(lambda);
                out.push(a * lambda);
                out.push((v - gamma * lambda).clamp(0.0, lambda));
                let denom = a - 1.0 - gamma;
                if denom > 0.0 {
                    let s = ((a - 1.0) * v - gamma * a * lambda) / denom;
                    out.push(s.clamp(lambda, a * lambda));
                }
                out.push(v.max(a * lambda));
            }
        }
    }

    /// All candidate minimizers over the full line, both signs.
    fn candidates_full(&self, v: f64, gamma: f64, out: &mut Vec<f64>) {
        out.push(0.0);
        match *self {
            Self::Zero => out.push(v),
            Self::L1 { lambda } => {
                out.push((v - gamma * lambda).max(0.0));
                out.push((v + gamma * lambda).min(0.0));
            }
            Self::Mcp { lambda, beta } => {
                let knot = beta * lambda;
                out.push(knot);
                out.push(-knot);
                let denom = 1.0 - gamma / beta;
                if denom > 0.0 {
                    out.push(((v - gamma * lambda) / denom).clamp(0.0, knot));
                    out.push(((v + gamma * lambda) / denom).clamp(-knot, 0.0));
                }
                out.push(v.max(knot));
                out.push(v.min(-knot));
            }
            Self::Scad { lambda, a } => {
                for k in [lambda, a * lambda] {
                    out.push(k);
                    out.push(-k);
                }
                out.push((v - gamma * lambda).clamp(0.0, lambda));
                out.push((v + gamma * lambda).clamp(-lambda, 0.0));
                let denom = a - 1.0 - gamma;
                if denom > 0.0 {
                    let sp = ((a - 1.0) * v - gamma * a * lambda) / denom;
                    out.push(sp.clamp(lambda, a * lambda));
                    let sm = ((a - 1.0) * v + gamma * a * lambda) / denom;
                    out.push(sm.clamp(-a * lambda, -lambda));
                }
                out.push(v.max(a * lambda));
                out.push(v.min(-a * lambda));
            }
        }
    }

    /// Minimal-objective candidate; exact ties go to the smallest `|y|`.
    fn select(&self, cands: &[f64], v: f64, gamma: f64) -> f64 {
        let mut best_y = cands[0];
        let mut best_obj = self.objective_1d(best_y, v, gamma);
        for &y in &cands[1..] {
            let obj = self.objective_1d(y, v, gamma);
            if obj < best_obj || (obj == best_obj && y.abs() < best_y.abs()) {
                best_y = y;
                best_obj = obj;
            }
        }
        best_y
    }

    /// One-dimensional proximal point `prox_{gamma p}(v)`. Odd in `v`;
    /// a zero result is always the canonical `+0.0`.
    pub fn prox_1d(&self, v: f64, gamma: f64) -> f64 {
        assert!(gamma > 0.0, "prox step gamma must be positive");
        if v < 0.0 || (v == 0.0 && v.is_sign_negative()) {
            let y = -self.prox_1d(-v, gamma);
            return if y == 0.0 { 0.0 } else { y };
        }
        let mut cands = Vec::with_capacity(8);
        self.candidates_nonneg(v, gamma, &mut cands);
        self.select(&cands, v, gamma)
    }

    /// One-dimensional box-constrained proximal point over `[lo, hi]`:
    /// the unconstrained candidates clipped to the interval, plus both
    /// endpoints. Correct for the nonconvex penalties, where composing the
    /// unconstrained prox with a clamp would not be.
    pub fn prox_box_1d(&self, v: f64, gamma: f64, lo: f64, hi: f64) -> f64 {
        assert!(gamma > 0.0, "prox step gamma must be positive");
        assert!(lo < hi, "box interval must be nondegenerate");
        let mut cands = Vec::with_capacity(16);
        self.candidates_full(v, gamma, &mut cands);
        for c in cands.iter_mut() {
            *c = c.clamp(lo, hi);
        }
        cands.push(lo);
        cands.push(hi);
        self.select(&cands, v, gamma)
    }

    /// Coordinate-wise proximal point of the separable penalty.
    pub fn prox(&self, v: &[f64], gamma: f64) -> Vec<f64> {
        v.iter().map(|vi| self.prox_1d(*vi, gamma)).collect()
    }

    /// Coordinate-wise proximal point of `g + indicator(K)`.
    pub fn prox_box(&self, v: &[f64], gamma: f64, rect: &HyperRect) -> Result<Vec<f64>> {
        check_dim(rect.dim(), v.len())?;
        Ok(v.iter()
            .enumerate()
            .map(|(i, vi)| self.prox_box_1d(*vi, gamma, rect.lower()[i], rect.upper()[i]))
            .collect())
    }
}
