//! Scalar expressions for the pieces `f_minus`, `f_plus` and the slow law `g`.
//!
//! Expressions are parsed once and are immutable afterwards. They can be
//! evaluated either as plain `f64` values or as [`Jet3`] values carrying every
//! partial derivative in `(x, y)` up to total order three.

mod jet;
mod parse;

use std::fmt;

use thiserror::Error;

pub use jet::Jet3;
pub use parse::{parse_expression, ParseError};

/// The four names an expression may refer to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variable {
    X,
    Y,
    Lambda,
    Eps,
}

impl Variable {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "x" => Some(Variable::X),
            "y" => Some(Variable::Y),
            "lambda" => Some(Variable::Lambda),
            "eps" => Some(Variable::Eps),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variable::X => "x",
            Variable::Y => "y",
            Variable::Lambda => "lambda",
            Variable::Eps => "eps",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Function {
    Sin,
    Cos,
    Exp,
    Tanh,
    Sqrt,
}

impl Function {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "sin" => Some(Function::Sin),
            "cos" => Some(Function::Cos),
            "exp" => Some(Function::Exp),
            "tanh" => Some(Function::Tanh),
            "sqrt" => Some(Function::Sqrt),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Function::Sin => "sin",
            Function::Cos => "cos",
            Function::Exp => "exp",
            Function::Tanh => "tanh",
            Function::Sqrt => "sqrt",
        }
    }

    /// Value and first three derivatives at `a`.
    fn derivatives(self, a: f64) -> Result<[f64; 4], EvalError> {
        Ok(match self {
            Function::Sin => {
                let (s, c) = a.sin_cos();
                [s, c, -s, -c]
            }
            Function::Cos => {
                let (s, c) = a.sin_cos();
                [c, -s, -c, s]
            }
            Function::Exp => {
                let e = a.exp();
                [e, e, e, e]
            }
            Function::Tanh => {
                let t = a.tanh();
                let sech2 = 1.0 - t * t;
                [t, sech2, -2.0 * t * sech2, sech2 * (6.0 * t * t - 2.0)]
            }
            Function::Sqrt => {
                if a <= 0.0 {
                    return Err(EvalError::Domain {
                        operation: "sqrt",
                        detail: format!("derivative of sqrt undefined at {a}"),
                    });
                }
                let s = a.sqrt();
                [s, 0.5 / s, -0.25 / (a * s), 0.375 / (a * a * s)]
            }
        })
    }

    fn apply(self, a: f64) -> Result<f64, EvalError> {
        match self {
            Function::Sin => Ok(a.sin()),
            Function::Cos => Ok(a.cos()),
            Function::Exp => Ok(a.exp()),
            Function::Tanh => Ok(a.tanh()),
            Function::Sqrt => {
                if a < 0.0 {
                    Err(EvalError::Domain {
                        operation: "sqrt",
                        detail: format!("sqrt of negative argument {a}"),
                    })
                } else {
                    Ok(a.sqrt())
                }
            }
        }
    }
}

/// Abstract syntax tree of a scalar expression.
#[derive(Debug, Clone, PartialEq)]
pub enum Expression {
    Literal(f64),
    Var(Variable),
    Neg(Box<Expression>),
    Binary(BinOp, Box<Expression>, Box<Expression>),
    /// Integer power with a literal, non-negative exponent.
    Pow(Box<Expression>, u32),
    Call(Function, Box<Expression>),
}

/// Values bound to the reserved variables during evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Bindings {
    pub x: f64,
    pub y: f64,
    pub lambda: f64,
    pub eps: f64,
}

impl Bindings {
    pub fn new(x: f64, y: f64, lambda: f64, eps: f64) -> Self {
        Self { x, y, lambda, eps }
    }

    fn get(&self, var: Variable) -> f64 {
        match var {
            Variable::X => self.x,
            Variable::Y => self.y,
            Variable::Lambda => self.lambda,
            Variable::Eps => self.eps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("domain error in {operation}: {detail}")]
    Domain {
        operation: &'static str,
        detail: String,
    },
}

impl Expression {
    pub fn parse(source: &str) -> Result<Self, ParseError> {
        parse_expression(source)
    }

    pub fn lit(value: f64) -> Self {
        Expression::Literal(value)
    }

    pub fn var(var: Variable) -> Self {
        Expression::Var(var)
    }

    pub fn binary(op: BinOp, lhs: Expression, rhs: Expression) -> Self {
        Expression::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn neg(inner: Expression) -> Self {
        Expression::Neg(Box::new(inner))
    }

    pub fn pow(base: Expression, exponent: u32) -> Self {
        Expression::Pow(Box::new(base), exponent)
    }

    pub fn call(function: Function, arg: Expression) -> Self {
        Expression::Call(function, Box::new(arg))
    }

    /// True if the variable occurs anywhere in the tree.
    pub fn mentions(&self, var: Variable) -> bool {
        match self {
            Expression::Literal(_) => false,
            Expression::Var(v) => *v == var,
            Expression::Neg(e) | Expression::Pow(e, _) | Expression::Call(_, e) => e.mentions(var),
            Expression::Binary(_, a, b) => a.mentions(var) || b.mentions(var),
        }
    }

    pub fn evaluate(&self, bindings: &Bindings) -> Result<f64, EvalError> {
        let value = self.eval_raw(bindings)?;
        if value.is_finite() {
            Ok(value)
        } else {
            Err(EvalError::Domain {
                operation: "evaluate",
                detail: format!("non-finite result {value}"),
            })
        }
    }

    fn eval_raw(&self, b: &Bindings) -> Result<f64, EvalError> {
        Ok(match self {
            Expression::Literal(v) => *v,
            Expression::Var(v) => b.get(*v),
            Expression::Neg(e) => -e.eval_raw(b)?,
            Expression::Binary(op, lhs, rhs) => {
                let l = lhs.eval_raw(b)?;
                let r = rhs.eval_raw(b)?;
                match op {
                    BinOp::Add => l + r,
                    BinOp::Sub => l - r,
                    BinOp::Mul => l * r,
                    BinOp::Div => {
                        if r == 0.0 {
                            return Err(EvalError::Domain {
                                operation: "division",
                                detail: "division by zero".into(),
                            });
                        }
                        l / r
                    }
                }
            }
            Expression::Pow(base, n) => powi(base.eval_raw(b)?, *n),
            Expression::Call(f, arg) => f.apply(arg.eval_raw(b)?)?,
        })
    }

    /// Value together with all partials in `(x, y)` up to third order.
    pub fn evaluate_jet(&self, bindings: &Bindings) -> Result<Jet3, EvalError> {
        let jet = self.jet_raw(bindings)?;
        if jet.coefficients().iter().all(|c| c.is_finite()) {
            Ok(jet)
        } else {
            Err(EvalError::Domain {
                operation: "evaluate_jet",
                detail: "non-finite derivative".into(),
            })
        }
    }

    fn jet_raw(&self, b: &Bindings) -> Result<Jet3, EvalError> {
        Ok(match self {
            Expression::Literal(v) => Jet3::constant(*v),
            Expression::Var(Variable::X) => Jet3::variable_x(b.x),
            Expression::Var(Variable::Y) => Jet3::variable_y(b.y),
            Expression::Var(v) => Jet3::constant(b.get(*v)),
            Expression::Neg(e) => -e.jet_raw(b)?,
            Expression::Binary(op, lhs, rhs) => {
                let l = lhs.jet_raw(b)?;
                let r = rhs.jet_raw(b)?;
                match op {
                    BinOp::Add => l + r,
                    BinOp::Sub => l - r,
                    BinOp::Mul => l * r,
                    BinOp::Div => {
                        if r.value() == 0.0 {
                            return Err(EvalError::Domain {
                                operation: "division",
                                detail: "division by zero".into(),
                            });
                        }
                        l * r.recip()
                    }
                }
            }
            Expression::Pow(base, n) => base.jet_raw(b)?.powi(*n),
            Expression::Call(f, arg) => {
                let a = arg.jet_raw(b)?;
                if *f == Function::Sqrt && a.value() < 0.0 {
                    return Err(EvalError::Domain {
                        operation: "sqrt",
                        detail: format!("sqrt of negative argument {}", a.value()),
                    });
                }
                a.compose(f.derivatives(a.value())?)
            }
        })
    }
}

fn powi(base: f64, n: u32) -> f64 {
    let mut acc = 1.0;
    let mut b = base;
    let mut e = n;
    while e > 0 {
        if e & 1 == 1 {
            acc *= b;
        }
        b *= b;
        e >>= 1;
    }
    acc
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(self, f)
    }
}

// Binding strength used by the printer: +- 1, */ 2, unary minus 3, ^ 4, atoms 5.
fn strength(expr: &Expression) -> u8 {
    match expr {
        Expression::Binary(op, _, _) => op.precedence(),
        Expression::Neg(_) => 3,
        Expression::Pow(_, _) => 4,
        Expression::Literal(_) | Expression::Var(_) | Expression::Call(_, _) => 5,
    }
}

fn write_wrapped(expr: &Expression, parens: bool, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if parens {
        f.write_str("(")?;
        write_expr(expr, f)?;
        f.write_str(")")
    } else {
        write_expr(expr, f)
    }
}

fn write_expr(expr: &Expression, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match expr {
        Expression::Literal(v) => write!(f, "{v}"),
        Expression::Var(v) => f.write_str(v.name()),
        Expression::Neg(inner) => {
            f.write_str("-")?;
            write_wrapped(inner, strength(inner) < 3, f)
        }
        Expression::Binary(op, lhs, rhs) => {
            let p = op.precedence();
            write_wrapped(lhs, strength(lhs) < p, f)?;
            write!(f, " {} ", op.symbol())?;
            write_wrapped(rhs, strength(rhs) <= p, f)
        }
        Expression::Pow(base, n) => {
            write_wrapped(base, strength(base) < 5, f)?;
            write!(f, "^{n}")
        }
        Expression::Call(func, arg) => {
            write!(f, "{}(", func.name())?;
            write_expr(arg, f)?;
            f.write_str(")")
        }
    }
}
