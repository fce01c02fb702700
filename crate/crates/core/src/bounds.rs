//! Explicit Esseen-type bounds on `Δ_n` for a concrete instance.
//!
//! Every bound has the shape `total = constant_used * bracket`, where the
//! bracket is a sum of nonnegative terms recorded separately in the report.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dist::{DistMatrix, DistSpec, GFunction, Moment};
use crate::error::{Error, Result};
use crate::matrix::CoefficientMatrix;
use crate::numeric;

/// `A_0` for the third-moment inequality.
pub const DEFAULT_A0: f64 = 447.0;

/// Coefficient matrix, cell laws and the variance `B_n` of the statistic.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    c: CoefficientMatrix,
    y: DistMatrix,
    b_n: f64,
}

/// `B_n = (1/(n-1)) sum c_ij^2 + (1/n) sum sigma_ij^2`; must be positive.
pub fn compute_bn(c: &CoefficientMatrix, y: &DistMatrix) -> Result<f64> {
    let n = c.n();
    y.validate(n)?;
    let noise = numeric::sum(y.cells(n).map(|(_, _, s)| s.variance())) / n as f64;
    let b = c.variance_term() + noise;
    if b > 0.0 && b.is_finite() {
        Ok(b)
    } else {
        Err(Error::DegenerateInstance(b))
    }
}

impl Instance {
    pub fn new(c: CoefficientMatrix, y: DistMatrix) -> Result<Self> {
        let b_n = compute_bn(&c, &y)?;
        Ok(Instance { c, y, b_n })
    }

    pub fn n(&self) -> usize {
        self.c.n()
    }

    pub fn c(&self) -> &CoefficientMatrix {
        &self.c
    }

    pub fn y(&self) -> &DistMatrix {
        &self.y
    }

    pub fn b_n(&self) -> f64 {
        self.b_n
    }

    pub fn spec(&self, i: usize, j: usize) -> &DistSpec {
        self.y.get(i, j)
    }

    /// `(1/n) * sum f(c_ij, Y_ij)` over all cells.
    pub(crate) fn cell_mean<F>(&self, f: F) -> f64
    where
        F: Fn(f64, &DistSpec) -> f64,
    {
        let n = self.n();
        numeric::sum(self.y.cells(n).map(|(i, j, s)| f(self.c.get(i, j), s))) / n as f64
    }

    /// `(1/n) * sum f(Y_ij)` with a fallible per-cell moment.
    fn cell_mean_try<F>(&self, f: F) -> Result<f64>
    where
        F: Fn(usize, usize, &DistSpec) -> Result<f64>,
    {
        let n = self.n();
        let values = self
            .y
            .cells(n)
            .map(|(i, j, s)| f(i, j, s))
            .collect::<Result<Vec<f64>>>()?;
        Ok(numeric::sum(values) / n as f64)
    }
}

/// Absolute constants of the bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub a0: f64,
    pub a: f64,
}

/// `max{1810, 198 a0 + 5}`.
pub fn remark_a(a0: f64) -> f64 {
    (198.0 * a0 + 5.0).max(1810.0)
}

impl Default for Constants {
    fn default() -> Self {
        Constants {
            a0: DEFAULT_A0,
            a: remark_a(DEFAULT_A0),
        }
    }
}

impl Constants {
    pub fn new(a0: f64, a: f64) -> Result<Self> {
        if !(a0.is_finite() && a0 > 0.0) {
            return Err(Error::InvalidParameter(format!("a0 must be > 0, got {a0}")));
        }
        if !(a.is_finite() && a >= 1810.0) {
            return Err(Error::InvalidParameter(format!("a must be >= 1810, got {a}")));
        }
        Ok(Constants { a0, a })
    }

    /// Constants with the given `a0` and the matching default `a`.
    pub fn from_a0(a0: f64) -> Result<Self> {
        Self::new(a0, remark_a(a0))
    }
}

/// The intermediate constant `A_1` assembled from the truncation argument,
/// with the Φ-scale term taken at `1/√(2πe)`.
pub fn a1_exact(a0: f64, rho_sqrt: f64) -> f64 {
    let rho = rho_sqrt * rho_sqrt;
    let two_pi = 2.0 * std::f64::consts::PI;
    let degenerate = 36.0 / (1.0 - rho);
    let main = 1.0
        + a0 * 192.0 / rho.powf(1.5)
        + 1.0 / (two_pi.sqrt() * rho_sqrt)
        + 36.0 / ((two_pi * std::f64::consts::E).sqrt() * rho_sqrt * (1.0 + rho_sqrt));
    degenerate.max(main)
}

/// `A_1` with the published rounded coefficients 0.4 and 5.3.
pub fn a1_rounded(a0: f64, rho_sqrt: f64) -> f64 {
    let rho = rho_sqrt * rho_sqrt;
    let degenerate = 36.0 / (1.0 - rho);
    let main = 1.0 + a0 * 192.0 / rho.powf(1.5) + 0.4 / rho_sqrt + 5.3 / (rho_sqrt * (1.0 + rho_sqrt));
    degenerate.max(main)
}

/// Cap of `g(x) = min(|x|, cap)`: a number, or `√B_n` of the instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cap {
    SqrtBn,
    Value(f64),
}

/// User-facing weight function; resolved against an instance before use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GSpec {
    PowerDelta(f64),
    MinAbsCap(Cap),
}

impl GSpec {
    pub fn resolve(&self, b_n: f64) -> GFunction {
        match *self {
            GSpec::PowerDelta(d) => GFunction::PowerDelta(d),
            GSpec::MinAbsCap(Cap::SqrtBn) => GFunction::MinAbsCap(b_n.sqrt()),
            GSpec::MinAbsCap(Cap::Value(c)) => GFunction::MinAbsCap(c),
        }
    }
}

impl fmt::Display for GSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GSpec::PowerDelta(d) => write!(f, "power:{d}"),
            GSpec::MinAbsCap(Cap::SqrtBn) => f.write_str("min"),
            GSpec::MinAbsCap(Cap::Value(c)) => write!(f, "min:{c}"),
        }
    }
}

/// Parses `power:D`, `min`, `min:bn` or `min:X`.
impl FromStr for GSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("cannot parse g {s:?}; expected power:D, min or min:X"));
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k, Some(a)),
            None => (s, None),
        };
        match (kind, arg) {
            ("power", Some(d)) => Ok(GSpec::PowerDelta(d.parse().map_err(|_| bad())?)),
            ("min", None) | ("min", Some("bn")) => Ok(GSpec::MinAbsCap(Cap::SqrtBn)),
            ("min", Some(c)) => Ok(GSpec::MinAbsCap(Cap::Value(c.parse().map_err(|_| bad())?))),
            _ => Err(bad()),
        }
    }
}

impl Serialize for GSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for GSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

const G_GRID_POINTS: usize = 1000;

/// Check `g > 0`, `g` nondecreasing and `x / g(x)` nondecreasing on a
/// log-spaced grid over `[1e-6, 1e6]`, after checking parameter ranges.
pub fn validate_g(g: &GFunction) -> Result<()> {
    match *g {
        GFunction::PowerDelta(d) if !(d > 0.0 && d <= 1.0) => {
            return Err(Error::InvalidParameter(format!("delta must lie in (0, 1], got {d}")));
        }
        GFunction::MinAbsCap(c) if !(c.is_finite() && c > 0.0) => {
            return Err(Error::InvalidParameter(format!("cap must be > 0, got {c}")));
        }
        _ => {}
    }
    let (lo, hi) = (1e-6f64.ln(), 1e6f64.ln());
    let step = (hi - lo) / (G_GRID_POINTS - 1) as f64;
    let mut prev: Option<(f64, f64, f64)> = None;
    for k in 0..G_GRID_POINTS {
        let x = (lo + step * k as f64).exp();
        let gx = g.eval(x);
        if !(gx > 0.0) {
            return Err(Error::InvalidG {
                x_lo: x,
                x_hi: x,
                reason: "g is not positive",
            });
        }
        let ratio = x / gx;
        if let Some((px, pg, pr)) = prev {
            let slack = 1e-12;
            if gx < pg * (1.0 - slack) {
                return Err(Error::InvalidG {
                    x_lo: px,
                    x_hi: x,
                    reason: "g decreases",
                });
            }
            if ratio < pr * (1.0 - slack) {
                return Err(Error::InvalidG {
                    x_lo: px,
                    x_hi: x,
                    reason: "x/g(x) decreases",
                });
            }
        }
        prev = Some((x, gx, ratio));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Theorem {
    /// Third-moment inequality with `A_0`.
    #[serde(rename = "A")]
    A,
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
    #[serde(rename = "3")]
    Three,
    #[serde(rename = "lindeberg")]
    Lindeberg,
}

impl fmt::Display for Theorem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Theorem::A => "A",
            Theorem::One => "1",
            Theorem::Two => "2",
            Theorem::Three => "3",
            Theorem::Lindeberg => "lindeberg",
        })
    }
}

impl FromStr for Theorem {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" | "a" => Ok(Theorem::A),
            "1" => Ok(Theorem::One),
            "2" => Ok(Theorem::Two),
            "3" => Ok(Theorem::Three),
            "lindeberg" | "L" => Ok(Theorem::Lindeberg),
            _ => Err(Error::InvalidParameter(format!(
                "unknown theorem {s:?}; expected A, 1, 2, 3 or lindeberg"
            ))),
        }
    }
}

/// Bracket terms; only those used by the given bound are present.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct BoundTerms {
    /// `(1/(B^{3/2} n)) sum E|c_ij + Y_ij|^3`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mixed_term: Option<f64>,
    /// `(1/(B^{3/2} n)) sum |c_ij|^3`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_term: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_term: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta_term: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g_term: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lyapunov_term: Option<f64>,
    /// Lindeberg replacement of the beta term.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lindeberg_term: Option<f64>,
}

impl BoundTerms {
    fn values(&self) -> impl Iterator<Item = f64> {
        [
            self.mixed_term,
            self.c_term,
            self.alpha_term,
            self.beta_term,
            self.g_term,
            self.lyapunov_term,
            self.lindeberg_term,
        ]
        .into_iter()
        .flatten()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub theorem: Theorem,
    pub constants: Constants,
    /// The multiplier actually applied: `a0`, `a` or `2a`.
    pub constant_used: f64,
    pub b_n: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    pub terms: BoundTerms,
    pub bracket: f64,
    pub total: f64,
}

impl BoundReport {
    fn assemble(theorem: Theorem, k: Constants, constant_used: f64, b_n: f64, terms: BoundTerms) -> Self {
        let bracket = terms.values().sum::<f64>();
        BoundReport {
            theorem,
            constants: k,
            constant_used,
            b_n,
            g: None,
            delta: None,
            eps: None,
            terms,
            bracket,
            total: constant_used * bracket,
        }
    }
}

fn c_term(inst: &Instance) -> f64 {
    inst.c().third_term() / inst.b_n().powf(1.5)
}

/// `A_0 / (B^{3/2} n) * sum E|c_ij + Y_ij|^3`; rejects infinite third moments.
pub fn bound_theorem_a(inst: &Instance, k: Constants) -> Result<BoundReport> {
    let num = inst.cell_mean_try(|i, j, s| match s.mixed_abs_third(inst.c().get(i, j)) {
        Moment::Finite(v) => Ok(v),
        Moment::Infinite => Err(Error::InfiniteThirdMoment { row: i, col: j }),
    })?;
    let terms = BoundTerms {
        mixed_term: Some(num / inst.b_n().powf(1.5)),
        ..Default::default()
    };
    Ok(BoundReport::assemble(Theorem::A, k, k.a0, inst.b_n(), terms))
}

/// `A * (c-term + alpha-term + beta-term)` with cuts at `√B_n`.
pub fn bound_theorem_1(inst: &Instance, k: Constants) -> BoundReport {
    let b = inst.b_n();
    let cut = b.sqrt();
    let alpha = inst.cell_mean(|_, s| s.alpha(cut));
    let beta = inst.cell_mean(|_, s| s.beta(cut));
    let terms = BoundTerms {
        c_term: Some(c_term(inst)),
        alpha_term: Some(alpha / b),
        beta_term: Some(beta / b.powf(1.5)),
        ..Default::default()
    };
    BoundReport::assemble(Theorem::One, k, k.a, b, terms)
}

fn g_bracket(inst: &Instance, g: &GFunction) -> Result<(f64, f64)> {
    validate_g(g)?;
    let b = inst.b_n();
    let gm = inst.cell_mean_try(|_, _, s| s.g_moment(g))?;
    Ok((c_term(inst), gm / (b * g.eval(b.sqrt()))))
}

/// `2A * (c-term + sum g_ij / (B g(√B) n))`.
pub fn bound_theorem_2(inst: &Instance, g: GSpec, k: Constants) -> Result<BoundReport> {
    let resolved = g.resolve(inst.b_n());
    let (c, gt) = g_bracket(inst, &resolved)?;
    let terms = BoundTerms {
        c_term: Some(c),
        g_term: Some(gt),
        ..Default::default()
    };
    let mut r = BoundReport::assemble(Theorem::Two, k, 2.0 * k.a, inst.b_n(), terms);
    r.g = Some(g.to_string());
    Ok(r)
}

/// Lyapunov form: identical arithmetic to [`bound_theorem_2`] with `g = |x|^delta`.
pub fn bound_theorem_3(inst: &Instance, delta: f64, k: Constants) -> Result<BoundReport> {
    let (c, gt) = g_bracket(inst, &GFunction::PowerDelta(delta))?;
    let terms = BoundTerms {
        c_term: Some(c),
        lyapunov_term: Some(gt),
        ..Default::default()
    };
    let mut r = BoundReport::assemble(Theorem::Three, k, 2.0 * k.a, inst.b_n(), terms);
    r.delta = Some(delta);
    Ok(r)
}

/// Theorem-1 bracket with the beta term replaced by
/// `(1/(B n)) sum [E Y^2 1{|Y| >= eps √B} + eps sigma^2]`.
pub fn bound_lindeberg_form(inst: &Instance, eps: f64, k: Constants) -> Result<BoundReport> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter(format!("eps must lie in (0, 1), got {eps}")));
    }
    let b = inst.b_n();
    let cut = b.sqrt();
    let alpha = inst.cell_mean(|_, s| s.alpha(cut));
    let lind = inst.cell_mean(|_, s| s.alpha(eps * cut) + eps * s.variance());
    let terms = BoundTerms {
        c_term: Some(c_term(inst)),
        alpha_term: Some(alpha / b),
        lindeberg_term: Some(lind / b),
        ..Default::default()
    };
    let mut r = BoundReport::assemble(Theorem::Lindeberg, k, k.a, b, terms);
    r.eps = Some(eps);
    Ok(r)
}

/// Parameters selecting one bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundRequest {
    pub theorem: Theorem,
    pub g: GSpec,
    pub delta: f64,
    pub eps: f64,
}

impl Default for BoundRequest {
    fn default() -> Self {
        BoundRequest {
            theorem: Theorem::One,
            g: GSpec::MinAbsCap(Cap::SqrtBn),
            delta: 1.0,
            eps: 0.5,
        }
    }
}

pub fn compute_bound(inst: &Instance, req: &BoundRequest, k: Constants) -> Result<BoundReport> {
    match req.theorem {
        Theorem::A => bound_theorem_a(inst, k),
        Theorem::One => Ok(bound_theorem_1(inst, k)),
        Theorem::Two => bound_theorem_2(inst, req.g, k),
        Theorem::Three => bound_theorem_3(inst, req.delta, k),
        Theorem::Lindeberg => bound_lindeberg_form(inst, req.eps, k),
    }
}
