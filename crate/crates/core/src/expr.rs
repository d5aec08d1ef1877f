//! Closed-form expressions over `x1..xn`.
//!
//! Used for coefficient fields, chart maps and test functions. Derivatives are
//! symbolic, so anything built from expressions gets exact jets.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Sin,
    Cos,
    Tan,
    Sqrt,
    Sinh,
    Cosh,
    Tanh,
    Atan,
    Abs,
    Sign,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "exp" => Func::Exp,
            "log" | "ln" => Func::Log,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "sqrt" => Func::Sqrt,
            "sinh" => Func::Sinh,
            "cosh" => Func::Cosh,
            "tanh" => Func::Tanh,
            "atan" => Func::Atan,
            "abs" => Func::Abs,
            "sign" => Func::Sign,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Sqrt => "sqrt",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Tanh => "tanh",
            Func::Atan => "atan",
            Func::Abs => "abs",
            Func::Sign => "sign",
        }
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Exp => v.exp(),
            Func::Log => v.ln(),
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Tan => v.tan(),
            Func::Sqrt => v.sqrt(),
            Func::Sinh => v.sinh(),
            Func::Cosh => v.cosh(),
            Func::Tanh => v.tanh(),
            Func::Atan => v.atan(),
            Func::Abs => v.abs(),
            Func::Sign => {
                if v > 0.0 {
                    1.0
                } else if v < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Expression tree. Subtrees are shared, so cloning is cheap.
#[derive(Debug, Clone)]
pub enum Expr {
    Num(f64),
    /// Zero-based variable index (`x1` is `Var(0)`).
    Var(usize),
    Neg(Arc<Expr>),
    Add(Arc<Expr>, Arc<Expr>),
    Sub(Arc<Expr>, Arc<Expr>),
    Mul(Arc<Expr>, Arc<Expr>),
    Div(Arc<Expr>, Arc<Expr>),
    Pow(Arc<Expr>, Arc<Expr>),
    Call(Func, Arc<Expr>),
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let mut p = Parser {
            chars: src.char_indices().collect(),
            pos: 0,
            len: src.len(),
        };
        let e = p.expr()?;
        p.skip_ws();
        if p.pos < p.chars.len() {
            return Err(p.err("unexpected trailing input"));
        }
        Ok(e)
    }

    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    pub fn var(i: usize) -> Expr {
        Expr::Var(i)
    }

    pub fn as_num(&self) -> Option<f64> {
        match self {
            Expr::Num(v) => Some(*v),
            _ => None,
        }
    }

    fn is_num(&self, v: f64) -> bool {
        matches!(self, Expr::Num(x) if *x == v)
    }

    /// Highest variable index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Num(_) => None,
            Expr::Var(i) => Some(*i),
            Expr::Neg(a) | Expr::Call(_, a) => a.max_var(),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b) => match (a.max_var(), b.max_var()) {
                (Some(x), Some(y)) => Some(x.max(y)),
                (x, y) => x.or(y),
            },
        }
    }

    pub fn is_constant(&self) -> bool {
        self.max_var().is_none()
    }

    /// Evaluate at `x`. Variables beyond `x.len()` evaluate to NaN.
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Var(i) => x.get(*i).copied().unwrap_or(f64::NAN),
            Expr::Neg(a) => -a.eval(x),
            Expr::Add(a, b) => a.eval(x) + b.eval(x),
            Expr::Sub(a, b) => a.eval(x) - b.eval(x),
            Expr::Mul(a, b) => a.eval(x) * b.eval(x),
            Expr::Div(a, b) => a.eval(x) / b.eval(x),
            Expr::Pow(a, b) => {
                let base = a.eval(x);
                match b.as_ref() {
                    Expr::Num(k) if k.fract() == 0.0 && k.abs() < 64.0 => base.powi(*k as i32),
                    _ => base.powf(b.eval(x)),
                }
            }
            Expr::Call(f, a) => f.apply(a.eval(x)),
        }
    }

    /// Symbolic partial derivative with respect to variable `i`.
    pub fn diff(&self, i: usize) -> Expr {
        match self {
            Expr::Num(_) => Expr::Num(0.0),
            Expr::Var(j) => Expr::Num(if *j == i { 1.0 } else { 0.0 }),
            Expr::Neg(a) => neg(a.diff(i)),
            Expr::Add(a, b) => add(a.diff(i), b.diff(i)),
            Expr::Sub(a, b) => sub(a.diff(i), b.diff(i)),
            Expr::Mul(a, b) => add(
                mul(a.diff(i), (**b).clone()),
                mul((**a).clone(), b.diff(i)),
            ),
            Expr::Div(a, b) => {
                let (a, b) = ((**a).clone(), (**b).clone());
                let da = a.diff(i);
                let db = b.diff(i);
                if db.is_num(0.0) {
                    div(da, b)
                } else {
                    div(
                        sub(mul(da, b.clone()), mul(a, db)),
                        pow(b, Expr::Num(2.0)),
                    )
                }
            }
            Expr::Pow(a, b) => {
                let (base, exp) = ((**a).clone(), (**b).clone());
                if let Some(k) = exp.as_num() {
                    let db = base.diff(i);
                    mul(
                        mul(Expr::Num(k), pow(base, Expr::Num(k - 1.0))),
                        db,
                    )
                } else {
                    // d(a^b) = a^b (b' ln a + b a'/a)
                    let da = base.diff(i);
                    let dexp = exp.diff(i);
                    let term = add(
                        mul(dexp, call(Func::Log, base.clone())),
                        div(mul(exp.clone(), da), base.clone()),
                    );
                    mul(pow(base, exp), term)
                }
            }
            Expr::Call(f, a) => {
                let inner = (**a).clone();
                let da = inner.diff(i);
                if da.is_num(0.0) {
                    return Expr::Num(0.0);
                }
                let outer = match f {
                    Func::Exp => call(Func::Exp, inner),
                    Func::Log => div(Expr::Num(1.0), inner),
                    Func::Sin => call(Func::Cos, inner),
                    Func::Cos => neg(call(Func::Sin, inner)),
                    Func::Tan => div(Expr::Num(1.0), pow(call(Func::Cos, inner), Expr::Num(2.0))),
                    Func::Sqrt => div(Expr::Num(0.5), call(Func::Sqrt, inner)),
                    Func::Sinh => call(Func::Cosh, inner),
                    Func::Cosh => call(Func::Sinh, inner),
                    Func::Tanh => sub(
                        Expr::Num(1.0),
                        pow(call(Func::Tanh, inner), Expr::Num(2.0)),
                    ),
                    Func::Atan => div(
                        Expr::Num(1.0),
                        add(Expr::Num(1.0), pow(inner, Expr::Num(2.0))),
                    ),
                    Func::Abs => call(Func::Sign, inner),
                    Func::Sign => Expr::Num(0.0),
                };
                mul(outer, da)
            }
        }
    }

    /// Replace every `Var(i)` by `vars[i]`. Unlisted variables stay as they are.
    pub fn substitute(&self, vars: &[Expr]) -> Expr {
        match self {
            Expr::Num(v) => Expr::Num(*v),
            Expr::Var(i) => vars.get(*i).cloned().unwrap_or(Expr::Var(*i)),
            Expr::Neg(a) => neg(a.substitute(vars)),
            Expr::Add(a, b) => add(a.substitute(vars), b.substitute(vars)),
            Expr::Sub(a, b) => sub(a.substitute(vars), b.substitute(vars)),
            Expr::Mul(a, b) => mul(a.substitute(vars), b.substitute(vars)),
            Expr::Div(a, b) => div(a.substitute(vars), b.substitute(vars)),
            Expr::Pow(a, b) => pow(a.substitute(vars), b.substitute(vars)),
            Expr::Call(f, a) => call(*f, a.substitute(vars)),
        }
    }

    /// Replace a single variable.
    pub fn with_var(&self, i: usize, value: Expr) -> Expr {
        let n = self.max_var().map_or(0, |m| m + 1).max(i + 1);
        let vars: Vec<Expr> = (0..n)
            .map(|j| if j == i { value.clone() } else { Expr::Var(j) })
            .collect();
        self.substitute(&vars)
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(..) => 3,
            Expr::Pow(..) => 4,
            Expr::Num(v) if *v < 0.0 => 3,
            _ => 5,
        }
    }
}

// Smart constructors. They fold constants and drop neutral elements so that
// repeated differentiation does not blow up.

pub fn add(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Num(x), Expr::Num(y)) => Expr::Num(x + y),
        (Expr::Num(x), _) if *x == 0.0 => b,
        (_, Expr::Num(y)) if *y == 0.0 => a,
        (_, Expr::Neg(inner)) => sub(a, (**inner).clone()),
        _ => Expr::Add(Arc::new(a), Arc::new(b)),
    }
}

pub fn sub(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Num(x), Expr::Num(y)) => Expr::Num(x - y),
        (_, Expr::Num(y)) if *y == 0.0 => a,
        (Expr::Num(x), _) if *x == 0.0 => neg(b),
        (_, Expr::Neg(inner)) => add(a, (**inner).clone()),
        _ => Expr::Sub(Arc::new(a), Arc::new(b)),
    }
}

pub fn mul(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Num(x), Expr::Num(y)) => Expr::Num(x * y),
        (Expr::Num(x), _) | (_, Expr::Num(x)) if *x == 0.0 => Expr::Num(0.0),
        (Expr::Num(x), _) if *x == 1.0 => b,
        (_, Expr::Num(y)) if *y == 1.0 => a,
        (Expr::Num(x), _) if *x == -1.0 => neg(b),
        (_, Expr::Num(y)) if *y == -1.0 => neg(a),
        (_, Expr::Num(_)) => Expr::Mul(Arc::new(b), Arc::new(a)),
        (Expr::Neg(x), Expr::Neg(y)) => mul((**x).clone(), (**y).clone()),
        (Expr::Neg(x), _) => neg(mul((**x).clone(), b)),
        (_, Expr::Neg(y)) => neg(mul(a, (**y).clone())),
        _ => Expr::Mul(Arc::new(a), Arc::new(b)),
    }
}

pub fn div(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Num(x), Expr::Num(y)) if *y != 0.0 => Expr::Num(x / y),
        (Expr::Num(x), _) if *x == 0.0 => Expr::Num(0.0),
        (_, Expr::Num(y)) if *y == 1.0 => a,
        (_, Expr::Num(y)) if *y == -1.0 => neg(a),
        (Expr::Neg(x), _) => neg(div((**x).clone(), b)),
        _ => Expr::Div(Arc::new(a), Arc::new(b)),
    }
}

pub fn pow(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Num(x), Expr::Num(y)) => Expr::Num(x.powf(*y)),
        (_, Expr::Num(y)) if *y == 0.0 => Expr::Num(1.0),
        (_, Expr::Num(y)) if *y == 1.0 => a,
        _ => Expr::Pow(Arc::new(a), Arc::new(b)),
    }
}

pub fn neg(a: Expr) -> Expr {
    match a {
        Expr::Num(x) => Expr::Num(-x),
        Expr::Neg(inner) => (*inner).clone(),
        other => Expr::Neg(Arc::new(other)),
    }
}

pub fn call(f: Func, a: Expr) -> Expr {
    if let Expr::Num(v) = a {
        return Expr::Num(f.apply(v));
    }
    Expr::Call(f, Arc::new(a))
}

impl std::ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        add(self, rhs)
    }
}

impl std::ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        sub(self, rhs)
    }
}

impl std::ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        mul(self, rhs)
    }
}

impl std::ops::Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        div(self, rhs)
    }
}

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        neg(self)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let wrap = |f: &mut fmt::Formatter<'_>, e: &Expr, min: u8| {
            if e.precedence() < min {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        };
        match self {
            Expr::Num(v) => {
                if v.fract() == 0.0 && v.abs() < 1e15 {
                    write!(f, "{}", *v as i64)
                } else {
                    write!(f, "{v:?}")
                }
            }
            Expr::Var(i) => write!(f, "x{}", i + 1),
            Expr::Neg(a) => {
                write!(f, "-")?;
                wrap(f, a, 4)
            }
            Expr::Add(a, b) => {
                wrap(f, a, 1)?;
                write!(f, " + ")?;
                wrap(f, b, 2)
            }
            Expr::Sub(a, b) => {
                wrap(f, a, 1)?;
                write!(f, " - ")?;
                wrap(f, b, 2)
            }
            Expr::Mul(a, b) => {
                wrap(f, a, 2)?;
                write!(f, "*")?;
                wrap(f, b, 3)
            }
            Expr::Div(a, b) => {
                wrap(f, a, 2)?;
                write!(f, "/")?;
                wrap(f, b, 3)
            }
            Expr::Pow(a, b) => {
                wrap(f, a, 5)?;
                write!(f, "^")?;
                wrap(f, b, 4)
            }
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

struct Parser {
    chars: Vec<(usize, char)>,
    pos: usize,
    len: usize,
}

impl Parser {
    fn column(&self) -> usize {
        self.chars.get(self.pos).map_or(self.len, |c| c.0) + 1
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            column: self.column(),
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].1.is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).map(|c| c.1)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = add(lhs, self.term()?);
            } else if self.eat('-') {
                lhs = sub(lhs, self.term()?);
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = mul(lhs, self.unary()?);
            } else if self.eat('/') {
                lhs = div(lhs, self.unary()?);
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat('-') {
            return Ok(neg(self.unary()?));
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    // `^` is right associative and binds tighter than unary minus: -x^2 = -(x^2).
    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.eat('^') {
            let exp = self.unary()?;
            return Ok(pow(base, exp));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek() {
            None => Err(self.err("unexpected end of input")),
            Some('(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(')') {
                    return Err(self.err("expected `)`"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.ident(),
            Some(c) => Err(self.err(format!("unexpected character `{c}`"))),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        let mut end = self.pos;
        let mut seen_exp = false;
        while end < self.chars.len() {
            let c = self.chars[end].1;
            if c.is_ascii_digit() || c == '.' {
                end += 1;
            } else if (c == 'e' || c == 'E') && !seen_exp {
                // only treat as exponent when followed by a digit or sign+digit
                let next = self.chars.get(end + 1).map(|c| c.1);
                let next2 = self.chars.get(end + 2).map(|c| c.1);
                let ok = matches!(next, Some(d) if d.is_ascii_digit())
                    || (matches!(next, Some('+') | Some('-'))
                        && matches!(next2, Some(d) if d.is_ascii_digit()));
                if !ok {
                    break;
                }
                seen_exp = true;
                end += 2;
            } else {
                break;
            }
        }
        let text: String = self.chars[start..end].iter().map(|c| c.1).collect();
        let v: f64 = text
            .parse()
            .map_err(|_| self.err(format!("malformed number `{text}`")))?;
        self.pos = end;
        Ok(Expr::Num(v))
    }

    fn ident(&mut self) -> Result<Expr> {
        let start = self.pos;
        let mut end = self.pos;
        while end < self.chars.len()
            && (self.chars[end].1.is_ascii_alphanumeric() || self.chars[end].1 == '_')
        {
            end += 1;
        }
        let name: String = self.chars[start..end].iter().map(|c| c.1).collect();
        self.pos = end;
        if let Some(f) = Func::from_name(&name) {
            if !self.eat('(') {
                self.pos = start;
                return Err(self.err(format!("function `{name}` needs parentheses")));
            }
            let arg = self.expr()?;
            if !self.eat(')') {
                return Err(self.err("expected `)`"));
            }
            return Ok(call(f, arg));
        }
        match name.as_str() {
            "pi" => return Ok(Expr::Num(std::f64::consts::PI)),
            "e" => return Ok(Expr::Num(std::f64::consts::E)),
            _ => {}
        }
        if let Some(idx) = name.strip_prefix('x') {
            if let Ok(k) = idx.parse::<usize>() {
                if k >= 1 {
                    return Ok(Expr::Var(k - 1));
                }
            }
        }
        self.pos = start;
        Err(self.err(format!("unknown identifier `{name}`")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(s: &str, x: &[f64]) -> f64 {
        Expr::parse(s).unwrap().eval(x)
    }

    #[test]
    fn parses_precedence() {
        assert_eq!(ev("1 + 2*3", &[]), 7.0);
        assert_eq!(ev("-2^2", &[]), -4.0);
        assert_eq!(ev("2^3^2", &[]), 512.0);
        assert_eq!(ev("(1+2)*3", &[]), 9.0);
        assert_eq!(ev("x1*x2 - x1/x2", &[2.0, 4.0]), 7.5);
        assert!((ev("sin(pi/2) + log(e)", &[]) - 2.0).abs() < 1e-15);
        assert_eq!(ev("1e-3*1000", &[]), 1.0);
        assert_eq!(ev("2^-1", &[]), 0.5);
    }

    #[test]
    fn rejects_garbage() {
        for s in ["1 +", "foo(1)", "x0", "sin 1", "(1", "1 2", "3 $"] {
            assert!(matches!(Expr::parse(s), Err(Error::Parse { .. })), "{s}");
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let srcs = [
            "sin(x1)*exp(x2)",
            "x1^3 - 2*x1*x2 + x2^2",
            "atan(x2/x1) + sqrt(x1^2 + x2^2)",
            "x1^x2",
            "tanh(x1) / (1 + x2^2)",
            "cosh(x1)*log(x2)",
        ];
        let p = [0.7, 1.3];
        for s in srcs {
            let e = Expr::parse(s).unwrap();
            for i in 0..2 {
                let d = e.diff(i).eval(&p);
                let h = 1e-6;
                let mut xp = p;
                let mut xm = p;
                xp[i] += h;
                xm[i] -= h;
                let fd = (e.eval(&xp) - e.eval(&xm)) / (2.0 * h);
                assert!((d - fd).abs() < 1e-7 * (1.0 + d.abs()), "{s} d{i}: {d} vs {fd}");
            }
        }
    }

    #[test]
    fn display_round_trips() {
        for s in ["x1 - (x2 - 3)", "-(x1^2)", "x1/(x2*x1)", "exp(-x1^2/2)", "2^(x1 + 1)"] {
            let e = Expr::parse(s).unwrap();
            let again = Expr::parse(&e.to_string()).unwrap();
            let p = [0.3, -1.7];
            assert!((e.eval(&p) - again.eval(&p)).abs() < 1e-14, "{s} -> {e}");
        }
    }

    #[test]
    fn substitute_composes() {
        let e = Expr::parse("x1^2 + x2").unwrap();
        let s = e.substitute(&[Expr::parse("x2 + 1").unwrap(), Expr::num(3.0)]);
        assert_eq!(s.eval(&[0.0, 2.0]), 12.0);
        assert_eq!(e.with_var(1, Expr::num(0.0)).eval(&[3.0]), 9.0);
    }
}
