//! Strictly increasing curves on the real line normalized to pass through the
//! origin, with optional jump discontinuities.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Iteration cap for bisection.
pub const MAX_BISECTION_STEPS: usize = 200;

/// Default tolerance on the utility scale.
pub const UTILITY_TOL: f64 = 1e-12;

/// Continuous strictly increasing base shapes.
#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Identity,
    Linear(f64),
    /// Knots `(x, y)` with strictly increasing coordinates; end slopes are
    /// extended to infinity.
    PiecewiseLinear(Vec<(f64, f64)>),
    /// (1 − e^{−a x}) / a.
    Exponential(f64),
    /// sign(x)·|x|^γ.
    Power(f64),
    /// x ↦ output · inner(input · x).
    Scaled {
        input: f64,
        output: f64,
        inner: Box<MonotoneCurve>,
    },
}

/// A jump of height `size` at `at`; the curve takes `theta` of the jump at
/// the abscissa itself, so `theta < 1` leaves a right discontinuity and
/// `theta > 0` a left one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jump {
    pub at: f64,
    pub size: f64,
    pub theta: f64,
}

impl Jump {
    fn step(&self, x: f64) -> f64 {
        if x < self.at {
            0.0
        } else if x > self.at {
            self.size
        } else {
            self.theta * self.size
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneCurve {
    shape: Shape,
    jumps: Vec<Jump>,
}

/// Result of inverting a curve: `gap` is set when the target lies strictly
/// inside a jump, in which case `x` is the jump abscissa.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Preimage {
    pub x: f64,
    pub gap: bool,
}

impl MonotoneCurve {
    pub fn new(shape: Shape) -> Result<Self> {
        match &shape {
            Shape::Identity => {}
            Shape::Linear(k) => positive("linear slope", *k)?,
            Shape::Exponential(a) => {
                if !a.is_finite() || *a == 0.0 {
                    return Err(Error::InvalidCurve(format!(
                        "exponential parameter must be finite and nonzero, got {a}"
                    )));
                }
            }
            Shape::Power(g) => positive("power exponent", *g)?,
            Shape::PiecewiseLinear(pts) => {
                if pts.len() < 2 {
                    return Err(Error::InvalidCurve(
                        "piecewise-linear curve needs at least two knots".into(),
                    ));
                }
                for w in pts.windows(2) {
                    if !(w[0].0 < w[1].0) || !(w[0].1 < w[1].1) {
                        return Err(Error::InvalidCurve(format!(
                            "knots ({}, {}) and ({}, {}) are not strictly increasing",
                            w[0].0, w[0].1, w[1].0, w[1].1
                        )));
                    }
                }
                if pts.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
                    return Err(Error::InvalidCurve("knots must be finite".into()));
                }
                let at0 = pl_eval(pts, 0.0);
                if at0 != 0.0 {
                    return Err(Error::InvalidCurve(format!(
                        "piecewise-linear curve takes value {at0} at 0"
                    )));
                }
            }
            Shape::Scaled {
                input,
                output,
                ..
            } => {
                positive("input scale", *input)?;
                positive("output scale", *output)?;
            }
        }
        Ok(Self {
            shape,
            jumps: Vec::new(),
        })
    }

    pub fn identity() -> Self {
        Self {
            shape: Shape::Identity,
            jumps: Vec::new(),
        }
    }

    pub fn linear(slope: f64) -> Result<Self> {
        Self::new(Shape::Linear(slope))
    }

    pub fn exponential(a: f64) -> Result<Self> {
        Self::new(Shape::Exponential(a))
    }

    pub fn power(gamma: f64) -> Result<Self> {
        Self::new(Shape::Power(gamma))
    }

    pub fn piecewise_linear(points: Vec<(f64, f64)>) -> Result<Self> {
        Self::new(Shape::PiecewiseLinear(points))
    }

    /// x ↦ output · self(input · x). Unit factors return the curve itself.
    pub fn scaled(&self, input: f64, output: f64) -> Result<Self> {
        positive("input scale", input)?;
        positive("output scale", output)?;
        if input == 1.0 && output == 1.0 {
            return Ok(self.clone());
        }
        if let Shape::Scaled {
            input: i0,
            output: o0,
            inner,
        } = &self.shape
        {
            return inner.scaled(i0 * input, o0 * output);
        }
        Self::new(Shape::Scaled {
            input,
            output,
            inner: Box::new(self.clone()),
        })
    }

    /// Adds a jump. Jumps cannot be attached to a scaled curve (attach them
    /// to the inner curve instead) and abscissae must be distinct.
    pub fn with_jump(mut self, at: f64, size: f64, theta: f64) -> Result<Self> {
        if matches!(self.shape, Shape::Scaled { .. }) {
            return Err(Error::InvalidCurve(
                "jumps must be attached to the inner curve of a scaled curve".into(),
            ));
        }
        if !at.is_finite() {
            return Err(Error::InvalidCurve(format!("jump abscissa {at} is not finite")));
        }
        positive("jump size", size)?;
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::InvalidCurve(format!("jump fraction {theta} not in [0, 1]")));
        }
        if self.jumps.iter().any(|j| j.at == at) {
            return Err(Error::InvalidCurve(format!("two jumps at {at}")));
        }
        self.jumps.push(Jump { at, size, theta });
        self.jumps.sort_by(|a, b| a.at.total_cmp(&b.at));
        Ok(self)
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn jumps(&self) -> &[Jump] {
        &self.jumps
    }

    /// All jump abscissae of the curve, including those of a scaled inner
    /// curve, sorted.
    pub fn jump_points(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.jumps.iter().map(|j| j.at).collect();
        if let Shape::Scaled { input, inner, .. } = &self.shape {
            out.extend(inner.jump_points().into_iter().map(|c| c / input));
        }
        out.sort_by(f64::total_cmp);
        out
    }

    pub fn is_continuous(&self) -> bool {
        self.jump_points().is_empty()
    }

    fn jump_total(&self, x: f64) -> f64 {
        self.jumps.iter().map(|j| j.step(x)).sum()
    }

    fn base(&self, x: f64) -> f64 {
        match &self.shape {
            Shape::Identity => x,
            Shape::Linear(k) => k * x,
            Shape::PiecewiseLinear(pts) => pl_eval(pts, x),
            Shape::Exponential(a) => -(-a * x).exp_m1() / a,
            Shape::Power(g) => x.signum() * x.abs().powf(*g),
            Shape::Scaled {
                input,
                output,
                inner,
            } => output * inner.eval(input * x),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        if self.jumps.is_empty() {
            return self.base(x);
        }
        self.base(x) + self.jump_total(x) - self.jump_total(0.0)
    }

    /// Limits from the left and the right at `x`.
    pub fn limits(&self, x: f64) -> (f64, f64) {
        let mut left = self.base(x) - self.jump_total(0.0);
        let mut right = left;
        for j in &self.jumps {
            if j.at < x {
                left += j.size;
                right += j.size;
            } else if j.at == x {
                right += j.size;
            }
        }
        if let Shape::Scaled {
            input,
            output,
            inner,
        } = &self.shape
        {
            // base(x) above already used the inner value at x; replace it by
            // the one-sided limits
            let v = output * inner.eval(input * x);
            let (il, ir) = inner.limits(input * x);
            left += output * il - v;
            right += output * ir - v;
        }
        (left, right)
    }

    /// Whether the right limit at `x` exceeds the value.
    pub fn is_right_discontinuous(&self, x: f64) -> bool {
        let (_, r) = self.limits(x);
        r > self.eval(x)
    }

    /// Whether the value at `x` exceeds the left limit.
    pub fn is_left_discontinuous(&self, x: f64) -> bool {
        let (l, _) = self.limits(x);
        self.eval(x) > l
    }

    /// Bounds of the range as (inf, sup); infinite bounds are unattained.
    pub fn range(&self) -> (f64, f64) {
        match &self.shape {
            Shape::Exponential(a) if *a > 0.0 => {
                (f64::NEG_INFINITY, 1.0 / a + self.far_jump_offset())
            }
            Shape::Exponential(a) => (1.0 / a - self.jump_total(0.0), f64::INFINITY),
            Shape::Scaled { output, inner, .. } => {
                let (lo, hi) = inner.range();
                (output * lo, output * hi)
            }
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    fn far_jump_offset(&self) -> f64 {
        self.jumps.iter().map(|j| j.size).sum::<f64>() - self.jump_total(0.0)
    }

    fn range_error(&self, y: f64) -> Error {
        let (lo, hi) = self.range();
        let bound = if hi.is_finite() {
            format!("bounded above by {hi}")
        } else if lo.is_finite() {
            format!("bounded below by {lo}")
        } else {
            "unbounded".into()
        };
        Error::Range { value: y, bound }
    }

    /// Inverse of the continuous base shape; `None` when `y` is outside its
    /// range.
    fn base_inverse(&self, y: f64) -> Result<Option<f64>> {
        Ok(match &self.shape {
            Shape::Identity => Some(y),
            Shape::Linear(k) => Some(y / k),
            Shape::PiecewiseLinear(pts) => Some(pl_inverse(pts, y)),
            Shape::Exponential(a) => {
                let arg = -a * y;
                if arg > -1.0 {
                    let x = -arg.ln_1p() / a;
                    x.is_finite().then_some(x)
                } else {
                    None
                }
            }
            Shape::Power(_) => Some(bisect_increasing(|x| self.base(x), y)?),
            Shape::Scaled {
                input,
                output,
                inner,
            } => match inner.invert(y / output, 0.0) {
                Ok(p) => Some(p.x / input),
                Err(Error::Range { .. }) => None,
                Err(e) => return Err(e),
            },
        })
    }

    /// Finds x with curve(x) = y. Closed form for identity, linear,
    /// piecewise-linear and exponential shapes, bisection for power shapes.
    /// A target strictly inside a jump returns the jump abscissa with `gap`
    /// set when the residual exceeds `tol`.
    pub fn invert(&self, y: f64, tol: f64) -> Result<Preimage> {
        if !y.is_finite() {
            return Err(self.range_error(y));
        }
        if let Shape::Scaled {
            input,
            output,
            inner,
        } = &self.shape
        {
            let p = inner.invert(y / output, tol / output).map_err(|e| match e {
                Error::Range { .. } => self.range_error(y),
                other => other,
            })?;
            return Ok(Preimage {
                x: p.x / input,
                gap: p.gap,
            });
        }
        if self.jumps.is_empty() {
            let x = self.base_inverse(y)?.ok_or_else(|| self.range_error(y))?;
            return Ok(Preimage { x, gap: false });
        }
        let base0 = self.jump_total(0.0);
        let mut offset = -base0;
        for k in 0..=self.jumps.len() {
            let lo = if k == 0 { f64::NEG_INFINITY } else { self.jumps[k - 1].at };
            let hi = self.jumps.get(k).map_or(f64::INFINITY, |j| j.at);
            if let Some(x) = self.base_inverse(y - offset)? {
                if x > lo && x < hi {
                    return Ok(Preimage { x, gap: false });
                }
            }
            if let Some(j) = self.jumps.get(k) {
                let left = self.base(j.at) + offset;
                let right = left + j.size;
                if y >= left && y <= right {
                    let gap = (self.eval(j.at) - y).abs() > tol;
                    return Ok(Preimage { x: j.at, gap });
                }
                offset += j.size;
            }
        }
        Err(self.range_error(y))
    }

    /// Shorthand for [`MonotoneCurve::invert`] returning the abscissa only.
    pub fn inverse(&self, y: f64) -> Result<f64> {
        self.invert(y, UTILITY_TOL).map(|p| p.x)
    }
}

fn positive(what: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidCurve(format!("{what} must be positive and finite, got {v}")))
    }
}

fn pl_eval(pts: &[(f64, f64)], x: f64) -> f64 {
    let n = pts.len();
    let k = match pts.iter().position(|p| p.0 >= x) {
        Some(0) => 1,
        Some(k) => k,
        None => n - 1,
    };
    let (x0, y0) = pts[k - 1];
    let (x1, y1) = pts[k];
    if x == x0 {
        return y0;
    }
    if x == x1 {
        return y1;
    }
    y0 + (y1 - y0) / (x1 - x0) * (x - x0)
}

fn pl_inverse(pts: &[(f64, f64)], y: f64) -> f64 {
    let n = pts.len();
    let k = match pts.iter().position(|p| p.1 >= y) {
        Some(0) => 1,
        Some(k) => k,
        None => n - 1,
    };
    let (x0, y0) = pts[k - 1];
    let (x1, y1) = pts[k];
    if y == y0 {
        return x0;
    }
    if y == y1 {
        return x1;
    }
    x0 + (x1 - x0) / (y1 - y0) * (y - y0)
}

/// Solves f(x) = y for a continuous strictly increasing f. The bracket
/// starts at [−1, 1] and doubles until it straddles the target; bisection
/// then runs until the bracket cannot shrink further or the step cap is hit.
pub fn bisect_increasing(f: impl Fn(f64) -> f64, y: f64) -> Result<f64> {
    let (lo, hi) = bracket(|x| f(x) >= y)?;
    Ok(bisect_threshold(|x| f(x) >= y, lo, hi))
}

/// Finds lo < hi with `!above(lo)` and `above(hi)` for a monotone predicate,
/// doubling the symmetric bracket [−1, 1].
pub fn bracket(above: impl Fn(f64) -> bool) -> Result<(f64, f64)> {
    let mut lo = -1.0f64;
    let mut hi = 1.0f64;
    for _ in 0..1100 {
        let a = above(lo);
        let b = above(hi);
        if !a && b {
            return Ok((lo, hi));
        }
        if a {
            hi = lo;
            lo *= 2.0;
        } else {
            lo = hi;
            hi *= 2.0;
        }
        if !lo.is_finite() || !hi.is_finite() {
            break;
        }
    }
    Err(Error::Bracket(
        "no sign change found while expanding the bracket".into(),
    ))
}

/// Narrows [lo, hi] (with `!above(lo)`, `above(hi)`) to the threshold of a
/// monotone predicate.
pub fn bisect_threshold(above: impl Fn(f64) -> bool, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..MAX_BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if above(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

impl fmt::Display for MonotoneCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.shape {
            Shape::Identity => write!(f, "identity")?,
            Shape::Linear(k) => write!(f, "linear({k})")?,
            Shape::Exponential(a) => write!(f, "exp({a})")?,
            Shape::Power(g) => write!(f, "power({g})")?,
            Shape::PiecewiseLinear(pts) => {
                write!(f, "pl(")?;
                for (k, (x, y)) in pts.iter().enumerate() {
                    if k > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "({x}, {y})")?;
                }
                write!(f, ")")?;
            }
            Shape::Scaled {
                input,
                output,
                inner,
            } => write!(f, "scaled({input}, {output}, {inner})")?,
        }
        for j in &self.jumps {
            write!(f, " + jump({}, {}, {})", j.at, j.size, j.theta)?;
        }
        Ok(())
    }
}

/// A parse failure with the byte offset where it occurred.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveParseError {
    pub offset: usize,
    pub message: String,
}

impl FromStr for MonotoneCurve {
    type Err = CurveParseError;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let mut p = Parser { src: s, pos: 0 };
        let c = p.curve()?;
        p.skip_ws();
        if p.pos != s.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(c)
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn error(&self, message: &str) -> CurveParseError {
        CurveParseError {
            offset: self.pos,
            message: message.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.rest().starts_with(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn eat(&mut self, tok: &str) -> bool {
        self.skip_ws();
        if self.rest().starts_with(tok) {
            self.pos += tok.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: &str) -> std::result::Result<(), CurveParseError> {
        if self.eat(tok) {
            Ok(())
        } else {
            Err(self.error(&format!("expected `{tok}`")))
        }
    }

    fn ident(&mut self) -> &'a str {
        self.skip_ws();
        let start = self.pos;
        while self
            .rest()
            .starts_with(|c: char| c.is_ascii_alphanumeric() || c == '_')
        {
            self.pos += 1;
        }
        &self.src[start..self.pos]
    }

    fn number(&mut self) -> std::result::Result<f64, CurveParseError> {
        self.skip_ws();
        let start = self.pos;
        while self
            .rest()
            .starts_with(|c: char| c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '+'))
        {
            self.pos += 1;
        }
        let text = &self.src[start..self.pos];
        text.parse::<f64>().map_err(|_| CurveParseError {
            offset: start,
            message: format!("invalid number `{text}`"),
        })
    }

    fn curve(&mut self) -> std::result::Result<MonotoneCurve, CurveParseError> {
        let start = {
            self.skip_ws();
            self.pos
        };
        let name = self.ident();
        let built = match name {
            "identity" => Ok(MonotoneCurve::identity()),
            "linear" | "exp" | "power" => {
                self.expect("(")?;
                let v = self.number()?;
                self.expect(")")?;
                match name {
                    "linear" => MonotoneCurve::linear(v),
                    "exp" => MonotoneCurve::exponential(v),
                    _ => MonotoneCurve::power(v),
                }
            }
            "pl" => {
                self.expect("(")?;
                let mut pts = Vec::new();
                loop {
                    self.expect("(")?;
                    let x = self.number()?;
                    self.expect(",")?;
                    let y = self.number()?;
                    self.expect(")")?;
                    pts.push((x, y));
                    if !self.eat(",") {
                        break;
                    }
                }
                self.expect(")")?;
                MonotoneCurve::piecewise_linear(pts)
            }
            "scaled" => {
                self.expect("(")?;
                let input = self.number()?;
                self.expect(",")?;
                let output = self.number()?;
                self.expect(",")?;
                let inner = self.curve()?;
                self.expect(")")?;
                positive("input scale", input)
                    .and(positive("output scale", output))
                    .map(|_| MonotoneCurve {
                        shape: Shape::Scaled {
                            input,
                            output,
                            inner: Box::new(inner),
                        },
                        jumps: Vec::new(),
                    })
            }
            "" => {
                return Err(self.error("expected a curve"));
            }
            other => {
                return Err(CurveParseError {
                    offset: start,
                    message: format!("unknown curve kind `{other}`"),
                })
            }
        };
        let mut curve = built.map_err(|e| CurveParseError {
            offset: start,
            message: e.to_string(),
        })?;
        loop {
            let save = self.pos;
            if !self.eat("+") {
                break;
            }
            let at_kw = self.pos;
            if self.ident() != "jump" {
                self.pos = save;
                break;
            }
            self.expect("(")?;
            let at = self.number()?;
            self.expect(",")?;
            let size = self.number()?;
            self.expect(",")?;
            let theta = self.number()?;
            self.expect(")")?;
            curve = curve
                .with_jump(at, size, theta)
                .map_err(|e| CurveParseError {
                    offset: at_kw,
                    message: e.to_string(),
                })?;
        }
        Ok(curve)
    }
}
