//! Propensity expression trees: evaluation, symbolic differentiation,
//! simplification and printing.

use std::fmt;

use thiserror::Error;

/// Error raised while evaluating an expression at a concrete state.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("0 raised to non-positive exponent {exponent}")]
    ZeroToNonPositive { exponent: f64 },
    #[error("expression evaluated to a non-finite value")]
    NonFinite,
}

/// Expression tree over species counts and rate parameters.
///
/// Species and parameter references are stored by index into the owning
/// network's declaration order, so evaluation is just array lookups.
/// `PowLn` never comes out of the parser; it is produced by differentiation
/// of `base ^ exponent` terms and denotes `base^exponent * ln(base)` with the
/// limit convention `0^a * ln(0) = 0` for `a > 0`.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Species(usize),
    Param(usize),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    PowLn(Box<Expr>, Box<Expr>),
}

impl Expr {
    /// Evaluates the expression with species counts promoted to reals.
    pub fn eval(&self, state: &[u64], params: &[f64]) -> Result<f64, EvalError> {
        let v = self.eval_inner(state, params)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite)
        }
    }

    fn eval_inner(&self, state: &[u64], params: &[f64]) -> Result<f64, EvalError> {
        Ok(match self {
            Expr::Const(c) => *c,
            Expr::Species(i) => state[*i] as f64,
            Expr::Param(i) => params[*i],
            Expr::Add(a, b) => a.eval_inner(state, params)? + b.eval_inner(state, params)?,
            Expr::Sub(a, b) => a.eval_inner(state, params)? - b.eval_inner(state, params)?,
            Expr::Mul(a, b) => a.eval_inner(state, params)? * b.eval_inner(state, params)?,
            Expr::Div(a, b) => {
                let d = b.eval_inner(state, params)?;
                if d == 0.0 {
                    return Err(EvalError::DivisionByZero);
                }
                a.eval_inner(state, params)? / d
            }
            Expr::Pow(a, b) => {
                let base = a.eval_inner(state, params)?;
                let exp = b.eval_inner(state, params)?;
                pow_checked(base, exp)?
            }
            Expr::PowLn(a, b) => {
                let base = a.eval_inner(state, params)?;
                let exp = b.eval_inner(state, params)?;
                if base == 0.0 {
                    if exp > 0.0 {
                        0.0
                    } else {
                        return Err(EvalError::ZeroToNonPositive { exponent: exp });
                    }
                } else {
                    pow_checked(base, exp)? * base.ln()
                }
            }
            Expr::Neg(a) => -a.eval_inner(state, params)?,
        })
    }

    /// Symbolic derivative with respect to the parameter at `theta`.
    ///
    /// Species references are constants here: the derivative is taken at a
    /// frozen state. The result is simplified, so mass-action propensities
    /// `theta * m(x)` differentiate to exactly `m(x)`.
    pub fn derivative(&self, theta: usize) -> Expr {
        self.derivative_raw(theta).simplified()
    }

    fn derivative_raw(&self, theta: usize) -> Expr {
        match self {
            Expr::Const(_) | Expr::Species(_) => Expr::Const(0.0),
            Expr::Param(i) => Expr::Const(if *i == theta { 1.0 } else { 0.0 }),
            Expr::Add(a, b) => Expr::Add(
                Box::new(a.derivative_raw(theta)),
                Box::new(b.derivative_raw(theta)),
            ),
            Expr::Sub(a, b) => Expr::Sub(
                Box::new(a.derivative_raw(theta)),
                Box::new(b.derivative_raw(theta)),
            ),
            Expr::Mul(a, b) => Expr::Add(
                Box::new(Expr::Mul(Box::new(a.derivative_raw(theta)), b.clone())),
                Box::new(Expr::Mul(a.clone(), Box::new(b.derivative_raw(theta)))),
            ),
            Expr::Div(a, b) => Expr::Div(
                Box::new(Expr::Sub(
                    Box::new(Expr::Mul(Box::new(a.derivative_raw(theta)), b.clone())),
                    Box::new(Expr::Mul(a.clone(), Box::new(b.derivative_raw(theta)))),
                )),
                Box::new(Expr::Mul(b.clone(), b.clone())),
            ),
            // d(u^v) = v * u^(v-1) * du  +  u^v * ln(u) * dv
            Expr::Pow(u, v) => {
                let du = u.derivative_raw(theta);
                let dv = v.derivative_raw(theta);
                let power_rule = Expr::Mul(
                    Box::new(Expr::Mul(
                        v.clone(),
                        Box::new(Expr::Pow(
                            u.clone(),
                            Box::new(Expr::Sub(v.clone(), Box::new(Expr::Const(1.0)))),
                        )),
                    )),
                    Box::new(du),
                );
                let exponent_rule = Expr::Mul(
                    Box::new(Expr::PowLn(u.clone(), v.clone())),
                    Box::new(dv),
                );
                Expr::Add(Box::new(power_rule), Box::new(exponent_rule))
            }
            Expr::PowLn(_, _) => {
                unreachable!("PowLn only appears in derivative output, which is not re-differentiated")
            }
            Expr::Neg(a) => Expr::Neg(Box::new(a.derivative_raw(theta))),
        }
    }

    /// Constant folding plus the usual algebraic identities (`x*0`, `x*1`,
    /// `x+0`, `x^1`, ...). Used to keep derivative trees small since they are
    /// evaluated in simulation inner loops.
    // Guards spelled as `c == 0.0` stay guards: matching float literal
    // patterns directly is its own lint and loses the -0.0 case.
    #[allow(clippy::redundant_guards)]
    pub fn simplified(&self) -> Expr {
        match self {
            Expr::Const(_) | Expr::Species(_) | Expr::Param(_) => self.clone(),
            Expr::Add(a, b) => match (a.simplified(), b.simplified()) {
                (Expr::Const(x), Expr::Const(y)) => Expr::Const(x + y),
                (Expr::Const(c), e) | (e, Expr::Const(c)) if c == 0.0 => e,
                (x, y) => Expr::Add(Box::new(x), Box::new(y)),
            },
            Expr::Sub(a, b) => match (a.simplified(), b.simplified()) {
                (Expr::Const(x), Expr::Const(y)) => Expr::Const(x - y),
                (e, Expr::Const(c)) if c == 0.0 => e,
                (Expr::Const(c), e) if c == 0.0 => Expr::Neg(Box::new(e)).simplified_neg(),
                (x, y) => Expr::Sub(Box::new(x), Box::new(y)),
            },
            Expr::Mul(a, b) => match (a.simplified(), b.simplified()) {
                (Expr::Const(x), Expr::Const(y)) => Expr::Const(x * y),
                (Expr::Const(c), _) | (_, Expr::Const(c)) if c == 0.0 => Expr::Const(0.0),
                (Expr::Const(c), e) | (e, Expr::Const(c)) if c == 1.0 => e,
                (x, y) => Expr::Mul(Box::new(x), Box::new(y)),
            },
            Expr::Div(a, b) => match (a.simplified(), b.simplified()) {
                (Expr::Const(x), Expr::Const(y)) if y != 0.0 => Expr::Const(x / y),
                (Expr::Const(c), _) if c == 0.0 => Expr::Const(0.0),
                (e, Expr::Const(c)) if c == 1.0 => e,
                (x, y) => Expr::Div(Box::new(x), Box::new(y)),
            },
            Expr::Pow(a, b) => match (a.simplified(), b.simplified()) {
                (Expr::Const(x), Expr::Const(y)) if !(x == 0.0 && y <= 0.0) => {
                    Expr::Const(x.powf(y))
                }
                (e, Expr::Const(c)) if c == 1.0 => e,
                (x, y) => Expr::Pow(Box::new(x), Box::new(y)),
            },
            Expr::PowLn(a, b) => Expr::PowLn(Box::new(a.simplified()), Box::new(b.simplified())),
            Expr::Neg(a) => Expr::Neg(Box::new(a.simplified())).simplified_neg(),
        }
    }

    fn simplified_neg(self) -> Expr {
        if let Expr::Neg(inner) = &self {
            match inner.as_ref() {
                Expr::Const(c) => return Expr::Const(-c),
                Expr::Neg(e) => return e.as_ref().clone(),
                _ => {}
            }
        }
        self
    }

    /// True for a literal zero constant; identifies propensities whose
    /// derivative vanishes identically so kernels can skip them.
    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Const(c) if *c == 0.0)
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(_, _) | Expr::Sub(_, _) => 1,
            Expr::Mul(_, _) | Expr::Div(_, _) | Expr::PowLn(_, _) => 2,
            Expr::Neg(_) => 3,
            Expr::Pow(_, _) => 4,
            Expr::Const(_) | Expr::Species(_) | Expr::Param(_) => 5,
        }
    }

    /// Renders the expression with names resolved through the given tables,
    /// inserting parentheses only where precedence requires them.
    pub fn render(&self, species: &[String], params: &[String]) -> String {
        let mut out = String::new();
        self.render_into(&mut out, species, params);
        out
    }

    fn render_into(&self, out: &mut String, species: &[String], params: &[String]) {
        use fmt::Write;
        let child = |e: &Expr, out: &mut String, parens_eq: bool| {
            let need = e.precedence() < self.precedence()
                || (parens_eq && e.precedence() == self.precedence());
            if need {
                out.push('(');
            }
            e.render_into(out, species, params);
            if need {
                out.push(')');
            }
        };
        match self {
            Expr::Const(c) => {
                if *c < 0.0 {
                    let _ = write!(out, "({})", c);
                } else {
                    let _ = write!(out, "{}", c);
                }
            }
            Expr::Species(i) => out.push_str(&species[*i]),
            Expr::Param(i) => out.push_str(&params[*i]),
            Expr::Add(a, b) => {
                child(a, out, false);
                out.push_str(" + ");
                child(b, out, false);
            }
            Expr::Sub(a, b) => {
                child(a, out, false);
                out.push_str(" - ");
                child(b, out, true);
            }
            Expr::Mul(a, b) => {
                child(a, out, false);
                out.push('*');
                child(b, out, false);
            }
            Expr::Div(a, b) => {
                child(a, out, false);
                out.push('/');
                child(b, out, true);
            }
            Expr::Pow(a, b) => {
                child(a, out, true);
                out.push('^');
                child(b, out, false);
            }
            Expr::PowLn(a, b) => {
                child(a, out, true);
                out.push('^');
                child(b, out, true);
                out.push_str("*ln(");
                a.render_into(out, species, params);
                out.push(')');
            }
            Expr::Neg(a) => {
                out.push('-');
                child(a, out, true);
            }
        }
    }
}

fn pow_checked(base: f64, exp: f64) -> Result<f64, EvalError> {
    if base == 0.0 {
        if exp > 0.0 {
            Ok(0.0)
        } else {
            Err(EvalError::ZeroToNonPositive { exponent: exp })
        }
    } else {
        Ok(base.powf(exp))
    }
}
