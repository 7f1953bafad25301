//! A small arithmetic expression language for field definitions.
//!
//! Grammar:
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' unary)?
//! atom    := number | name | name '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! Names resolve to chart coordinates, caller-supplied parameters, or the
//! constant `pi`. Functions: `exp`, `log` (alias `ln`), `sin`, `cos`, `tan`,
//! `sqrt`, `pow(a, b)`.
//!
//! ```
//! use cartan_core::expr::Expr;
//! let e = Expr::parse("pow(t, 2/3) * exp(-x)", &["t", "x"], &[]).unwrap();
//! let v = e.eval(&[8.0, 0.0]);
//! assert!((v - 4.0).abs() < 1e-12);
//! ```

use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::jet::{Jet, JetCtx};
use crate::math;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Sin,
    Cos,
    Tan,
    Sqrt,
    Pow,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Num(f64),
    Var(usize),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

/// A parsed expression bound to a list of coordinate names.
#[derive(Clone, Debug, PartialEq)]
pub struct Expr {
    root: Node,
    nvars: usize,
    source: String,
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Name(String),
    Op(char),
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>> {
    let b = src.as_bytes();
    let mut i = 0;
    let mut out = Vec::new();
    while i < b.len() {
        let c = b[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < b.len() && ((b[i] as char).is_ascii_digit() || b[i] == b'.') {
                i += 1;
            }
            if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
                let mut j = i + 1;
                if j < b.len() && (b[j] == b'+' || b[j] == b'-') {
                    j += 1;
                }
                if j < b.len() && (b[j] as char).is_ascii_digit() {
                    i = j;
                    while i < b.len() && (b[i] as char).is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text = &src[start..i];
            let v: f64 = text
                .parse()
                .map_err(|_| Error::Parse { pos: start, msg: format!("bad number `{text}`") })?;
            out.push((start, Tok::Num(v)));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < b.len() && ((b[i] as char).is_ascii_alphanumeric() || b[i] == b'_') {
                i += 1;
            }
            out.push((start, Tok::Name(src[start..i].to_string())));
        } else if "+-*/^(),".contains(c) {
            out.push((i, Tok::Op(c)));
            i += 1;
        } else {
            return Err(Error::Parse { pos: i, msg: format!("unexpected character `{c}`") });
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
    vars: &'a [&'a str],
    params: &'a [(&'a str, f64)],
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.1)
    }

    fn here(&self) -> usize {
        self.toks.get(self.pos).map(|t| t.0).unwrap_or(self.end)
    }

    fn err<T>(&self, msg: &str) -> Result<T> {
        Err(Error::Parse { pos: self.here(), msg: msg.to_string() })
    }

    fn eat(&mut self, op: char) -> bool {
        if self.peek() == Some(&Tok::Op(op)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = fold(Node::Add(Box::new(lhs), Box::new(self.term()?)));
            } else if self.eat('-') {
                lhs = fold(Node::Sub(Box::new(lhs), Box::new(self.term()?)));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = fold(Node::Mul(Box::new(lhs), Box::new(self.unary()?)));
            } else if self.eat('/') {
                lhs = fold(Node::Div(Box::new(lhs), Box::new(self.unary()?)));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Node> {
        if self.eat('-') {
            return Ok(fold(Node::Neg(Box::new(self.unary()?))));
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.eat('^') {
            let e = self.unary()?;
            return Ok(fold(Node::Pow(Box::new(base), Box::new(e))));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Node::Num(v))
            }
            Some(Tok::Op('(')) => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(')') {
                    return self.err("expected `)`");
                }
                Ok(e)
            }
            Some(Tok::Name(name)) => {
                self.pos += 1;
                if self.eat('(') {
                    let f = match name.as_str() {
                        "exp" => Func::Exp,
                        "log" | "ln" => Func::Log,
                        "sin" => Func::Sin,
                        "cos" => Func::Cos,
                        "tan" => Func::Tan,
                        "sqrt" => Func::Sqrt,
                        "pow" => Func::Pow,
                        _ => return self.err(&format!("unknown function `{name}`")),
                    };
                    let mut args = Vec::new();
                    if !self.eat(')') {
                        loop {
                            args.push(self.expr()?);
                            if self.eat(')') {
                                break;
                            }
                            if !self.eat(',') {
                                return self.err("expected `,` or `)`");
                            }
                        }
                    }
                    let want = if f == Func::Pow { 2 } else { 1 };
                    if args.len() != want {
                        return self.err(&format!("`{name}` takes {want} argument(s)"));
                    }
                    return Ok(fold(Node::Call(f, args)));
                }
                if let Some(i) = self.vars.iter().position(|v| *v == name) {
                    return Ok(Node::Var(i));
                }
                if let Some((_, v)) = self.params.iter().find(|(p, _)| *p == name) {
                    return Ok(Node::Num(*v));
                }
                if name == "pi" {
                    return Ok(Node::Num(math::PI));
                }
                self.pos -= 1;
                self.err(&format!("unknown name `{name}`"))
            }
            Some(Tok::Op(c)) => self.err(&format!("unexpected `{c}`")),
            None => self.err("unexpected end of expression"),
        }
    }
}

fn fold(n: Node) -> Node {
    if n.is_const() {
        Node::Num(n.eval_f64(&[]))
    } else {
        n
    }
}

impl Node {
    pub fn is_const(&self) -> bool {
        match self {
            Node::Num(_) => true,
            Node::Var(_) => false,
            Node::Neg(a) => a.is_const(),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) | Node::Pow(a, b) => {
                a.is_const() && b.is_const()
            }
            Node::Call(_, args) => args.iter().all(Node::is_const),
        }
    }

    fn eval_f64(&self, x: &[f64]) -> f64 {
        match self {
            Node::Num(v) => *v,
            Node::Var(i) => x[*i],
            Node::Neg(a) => -a.eval_f64(x),
            Node::Add(a, b) => a.eval_f64(x) + b.eval_f64(x),
            Node::Sub(a, b) => a.eval_f64(x) - b.eval_f64(x),
            Node::Mul(a, b) => a.eval_f64(x) * b.eval_f64(x),
            Node::Div(a, b) => a.eval_f64(x) / b.eval_f64(x),
            Node::Pow(a, b) => pow_f64(a.eval_f64(x), b.eval_f64(x)),
            Node::Call(f, args) => {
                let a = args[0].eval_f64(x);
                match f {
                    Func::Exp => math::exp(a),
                    Func::Log => math::ln(a),
                    Func::Sin => math::sin(a),
                    Func::Cos => math::cos(a),
                    Func::Tan => math::tan(a),
                    Func::Sqrt => math::sqrt(a),
                    Func::Pow => pow_f64(a, args[1].eval_f64(x)),
                }
            }
        }
    }

    fn eval_jet(&self, x: &[Jet], lay: &JetCtx) -> Jet {
        match self {
            Node::Num(v) => Jet::constant(lay, *v),
            Node::Var(i) => x[*i].clone(),
            Node::Neg(a) => -a.eval_jet(x, lay),
            Node::Add(a, b) => a.eval_jet(x, lay) + b.eval_jet(x, lay),
            Node::Sub(a, b) => a.eval_jet(x, lay) - b.eval_jet(x, lay),
            Node::Mul(a, b) => {
                if let Node::Num(c) = **a {
                    return b.eval_jet(x, lay) * c;
                }
                if let Node::Num(c) = **b {
                    return a.eval_jet(x, lay) * c;
                }
                a.eval_jet(x, lay) * b.eval_jet(x, lay)
            }
            Node::Div(a, b) => {
                if let Node::Num(c) = **b {
                    return a.eval_jet(x, lay) * (1.0 / c);
                }
                a.eval_jet(x, lay) / b.eval_jet(x, lay)
            }
            Node::Pow(a, b) => pow_jet(a, b, x, lay),
            Node::Call(f, args) => {
                if *f == Func::Pow {
                    return pow_jet(&args[0], &args[1], x, lay);
                }
                let a = args[0].eval_jet(x, lay);
                match f {
                    Func::Exp => a.exp(),
                    Func::Log => a.ln(),
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Tan => a.tan(),
                    Func::Sqrt => a.sqrt(),
                    Func::Pow => unreachable!(),
                }
            }
        }
    }
}

fn pow_f64(a: f64, b: f64) -> f64 {
    if b == (b as i32) as f64 && math::abs(b) <= 64.0 {
        math::powi(a, b as i32)
    } else {
        math::powf(a, b)
    }
}

fn pow_jet(a: &Node, b: &Node, x: &[Jet], lay: &JetCtx) -> Jet {
    if let Node::Num(e) = *b {
        return a.eval_jet(x, lay).powf(e);
    }
    (b.eval_jet(x, lay) * a.eval_jet(x, lay).ln()).exp()
}

impl Expr {
    /// Parses `src` with the given coordinate names and named constants.
    pub fn parse(src: &str, vars: &[&str], params: &[(&str, f64)]) -> Result<Expr> {
        let toks = lex(src)?;
        let mut p = Parser { toks, pos: 0, end: src.len(), vars, params };
        let root = p.expr()?;
        if p.pos != p.toks.len() {
            return p.err("trailing input");
        }
        Ok(Expr { root, nvars: vars.len(), source: src.to_string() })
    }

    /// Parses an expression that must not reference any coordinate.
    pub fn constant(src: &str) -> Result<f64> {
        let e = Expr::parse(src, &[], &[])?;
        Ok(e.eval(&[]))
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn is_const(&self) -> bool {
        self.root.is_const()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.root.eval_f64(x)
    }

    pub fn eval_jet(&self, x: &[Jet], lay: &JetCtx) -> Jet {
        self.root.eval_jet(x, lay)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::JetLayout;

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(Expr::constant("2 + 3 * 4").unwrap(), 14.0);
        assert_eq!(Expr::constant("2 ^ 3 ^ 2").unwrap(), 512.0);
        assert_eq!(Expr::constant("-2 ^ 2").unwrap(), -4.0);
        assert_eq!(Expr::constant("(1 - 4) / 2").unwrap(), -1.5);
        assert!((Expr::constant("2/3").unwrap() - 2.0 / 3.0).abs() < 1e-16);
        assert!((Expr::constant("1e-3 * 2.5E2").unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn names_and_params() {
        let e = Expr::parse("m * r + sin(pi / 2)", &["r"], &[("m", 3.0)]).unwrap();
        assert_eq!(e.eval(&[2.0]), 7.0);
        assert!(matches!(Expr::parse("q + 1", &["r"], &[]), Err(Error::Parse { pos: 0, .. })));
        assert!(Expr::parse("sin(1, 2)", &[], &[]).is_err());
        assert!(Expr::parse("(1 + 2", &[], &[]).is_err());
        assert!(Expr::parse("1 + 2)", &[], &[]).is_err());
        assert!(Expr::parse("1 $ 2", &[], &[]).is_err());
    }

    #[test]
    fn jet_evaluation_matches_analytic_partials() {
        let e = Expr::parse("pow(t, 2/3) * log(x) + x ^ t", &["t", "x"], &[]).unwrap();
        let lay = JetLayout::new(2, 2);
        let (t, x) = (2.0f64, 1.5f64);
        let j = e.eval_jet(&Jet::seed(&lay, &[t, x]), &lay);
        assert!((j.value() - e.eval(&[t, x])).abs() < 1e-14);
        let dt = (2.0 / 3.0) * t.powf(-1.0 / 3.0) * x.ln() + x.powf(t) * x.ln();
        assert!((j.d1(0) - dt).abs() < 1e-13);
        let dx = t.powf(2.0 / 3.0) / x + t * x.powf(t - 1.0);
        assert!((j.d1(1) - dx).abs() < 1e-13);
    }
}
