//! Scaling rules `c * n^a * log(n)^b`, optionally rounded.
//!
//! Accepted syntax: numbers, `n`, `log(n)`, `sqrt(n)`, `^` with a numeric
//! (possibly signed or parenthesised) exponent, `*`, `/`, parentheses, and
//! an outer `ceil(...)`, `floor(...)` or `round(...)`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rounding {
    Ceil,
    Floor,
    Round,
}

/// `coef * n^n_pow * ln(n)^log_pow`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Monomial {
    pub coef: f64,
    pub n_pow: f64,
    pub log_pow: f64,
}

impl Monomial {
    const ONE: Monomial = Monomial { coef: 1.0, n_pow: 0.0, log_pow: 0.0 };

    fn mul(self, o: Monomial) -> Monomial {
        Monomial { coef: self.coef * o.coef, n_pow: self.n_pow + o.n_pow, log_pow: self.log_pow + o.log_pow }
    }

    fn powf(self, e: f64) -> Monomial {
        Monomial { coef: self.coef.powf(e), n_pow: self.n_pow * e, log_pow: self.log_pow * e }
    }

    pub fn eval(&self, n: usize) -> f64 {
        let n = n as f64;
        let mut v = self.coef * n.powf(self.n_pow);
        if self.log_pow != 0.0 {
            v *= n.ln().powf(self.log_pow);
        }
        v
    }

    /// Growth order `(a, b)`; compares lexicographically as `n^a log(n)^b`.
    pub fn order(&self) -> (f64, f64) {
        (self.n_pow, self.log_pow)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Rule {
    text: String,
    mono: Monomial,
    rounding: Option<Rounding>,
}

impl TryFrom<String> for Rule {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Rule> for String {
    fn from(r: Rule) -> String {
        r.text
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

impl std::str::FromStr for Rule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut p = Parser { src: s, chars: s.char_indices().peekable() };
        let (mono, rounding) = p.rule()?;
        Ok(Rule { text: s.trim().to_string(), mono, rounding })
    }
}

impl Rule {
    pub fn monomial(&self) -> Monomial {
        self.mono
    }

    pub fn rounding(&self) -> Option<Rounding> {
        self.rounding
    }

    /// Unrounded value at `n`.
    pub fn raw(&self, n: usize) -> f64 {
        self.mono.eval(n)
    }

    /// Value at `n` with the rule's own rounding, if any.
    pub fn eval(&self, n: usize) -> f64 {
        let v = self.raw(n);
        match self.rounding {
            Some(Rounding::Ceil) => v.ceil(),
            Some(Rounding::Floor) => v.floor(),
            Some(Rounding::Round) => v.round(),
            None => v,
        }
    }

    /// Integer value at `n`; unrounded rules are rounded up.
    pub fn eval_int(&self, n: usize) -> Result<usize> {
        let v = match self.rounding {
            None => self.raw(n).ceil(),
            Some(_) => self.eval(n),
        };
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::config(format!("rule '{}' gives {v} at n = {n}", self.text)));
        }
        Ok(v as usize)
    }
}

struct Parser<'a> {
    src: &'a str,
    chars: std::iter::Peekable<std::str::CharIndices<'a>>,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> Error {
        Error::config(format!("bad rule '{}': {msg}", self.src))
    }

    fn skip_ws(&mut self) {
        while self.chars.next_if(|(_, c)| c.is_whitespace()).is_some() {}
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.peek().map(|&(_, c)| c)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.chars.next();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.err(&format!("expected '{c}'")))
        }
    }

    fn ident(&mut self) -> String {
        self.skip_ws();
        let mut s = String::new();
        while let Some((_, c)) = self.chars.next_if(|(_, c)| c.is_ascii_alphabetic()) {
            s.push(c);
        }
        s
    }

    fn number(&mut self) -> Result<f64> {
        self.skip_ws();
        let mut s = String::new();
        while let Some((_, c)) = self.chars.next_if(|(_, c)| c.is_ascii_digit() || *c == '.' || *c == 'e' || *c == 'E') {
            s.push(c);
            if (c == 'e' || c == 'E') && matches!(self.chars.peek(), Some((_, '-' | '+'))) {
                s.push(self.chars.next().unwrap().1);
            }
        }
        s.parse().map_err(|_| self.err(&format!("invalid number '{s}'")))
    }

    fn rule(&mut self) -> Result<(Monomial, Option<Rounding>)> {
        let save = self.chars.clone();
        let rounding = match self.ident().as_str() {
            "ceil" => Some(Rounding::Ceil),
            "floor" => Some(Rounding::Floor),
            "round" => Some(Rounding::Round),
            _ => {
                self.chars = save;
                None
            }
        };
        let m = if rounding.is_some() {
            self.expect('(')?;
            let m = self.product()?;
            self.expect(')')?;
            m
        } else {
            self.product()?
        };
        if self.peek().is_some() {
            return Err(self.err("trailing input"));
        }
        if !(m.coef.is_finite() && m.coef > 0.0 && m.n_pow.is_finite() && m.log_pow.is_finite()) {
            return Err(self.err("coefficient must be positive and finite"));
        }
        Ok((m, rounding))
    }

    fn product(&mut self) -> Result<Monomial> {
        let mut m = self.power()?;
        loop {
            if self.eat('*') {
                m = m.mul(self.power()?);
            } else if self.eat('/') {
                m = m.mul(self.power()?.powf(-1.0));
            } else {
                return Ok(m);
            }
        }
    }

    fn power(&mut self) -> Result<Monomial> {
        let base = self.atom()?;
        if self.eat('^') {
            Ok(base.powf(self.exponent()?))
        } else {
            Ok(base)
        }
    }

    fn exponent(&mut self) -> Result<f64> {
        if self.eat('(') {
            let e = self.exponent_sum()?;
            self.expect(')')?;
            Ok(e)
        } else {
            let neg = self.eat('-');
            let v = self.number()?;
            Ok(if neg { -v } else { v })
        }
    }

    /// Signed sums of numbers, as in `(3 + 1.5)`.
    fn exponent_sum(&mut self) -> Result<f64> {
        let mut total = 0.0;
        let mut sign = if self.eat('-') { -1.0 } else { 1.0 };
        loop {
            total += sign * self.number()?;
            if self.eat('+') {
                sign = 1.0;
            } else if self.eat('-') {
                sign = -1.0;
            } else {
                return Ok(total);
            }
        }
    }

    fn atom(&mut self) -> Result<Monomial> {
        match self.peek() {
            Some('(') => {
                self.chars.next();
                let m = self.product()?;
                self.expect(')')?;
                Ok(m)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => Ok(Monomial { coef: self.number()?, ..Monomial::ONE }),
            Some(c) if c.is_ascii_alphabetic() => {
                let name = self.ident();
                match name.as_str() {
                    "n" => Ok(Monomial { n_pow: 1.0, ..Monomial::ONE }),
                    "log" | "ln" | "sqrt" => {
                        self.expect('(')?;
                        if self.ident() != "n" {
                            return Err(self.err(&format!("{name}() takes only n")));
                        }
                        self.expect(')')?;
                        Ok(if name == "sqrt" {
                            Monomial { n_pow: 0.5, ..Monomial::ONE }
                        } else {
                            Monomial { log_pow: 1.0, ..Monomial::ONE }
                        })
                    }
                    _ => Err(self.err(&format!("unknown name '{name}'"))),
                }
            }
            _ => Err(self.err("expected a number, n, log(n) or sqrt(n)")),
        }
    }
}

/// Sparsity regime of a `rho_n` rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regime", rename_all = "snake_case")]
pub enum Regime {
    /// `rho_n` constant.
    Dense,
    /// `rho_n ~ n^(-2 gamma)` up to log factors, `0 < gamma < 1/2`.
    Sparse { gamma: f64 },
    /// `rho_n ~ log(n)^(3 + beta) / n`, `beta > 0`.
    UltraSparse { beta: f64 },
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Regime::Dense => write!(f, "dense"),
            Regime::Sparse { gamma } => write!(f, "sparse (gamma = {gamma})"),
            Regime::UltraSparse { beta } => write!(f, "ultra-sparse (beta = {beta})"),
        }
    }
}

pub fn classify_rho(rule: &Rule) -> Result<Regime> {
    let (a, b) = rule.monomial().order();
    if a == 0.0 && b == 0.0 {
        Ok(Regime::Dense)
    } else if a < 0.0 && a > -1.0 {
        Ok(Regime::Sparse { gamma: -a / 2.0 })
    } else if a == -1.0 && b > 3.0 {
        Ok(Regime::UltraSparse { beta: b - 3.0 })
    } else {
        Err(Error::config(format!(
            "rho rule '{rule}' is not dense (constant), sparse (n^-2g, 0 < g < 1/2) or ultra-sparse (log(n)^(3+b)/n, b > 0)"
        )))
    }
}

/// Checks that the `k` rule lets blocks grow fast enough for the regime:
/// `k` nondecreasing, `k = o(n)`, and `h^2 rho_n / log n -> infinity` with
/// `h = n / k`. Returns advisory notes for admissible but slow schedules.
pub fn check_growth(k_rule: &Rule, rho_rule: &Rule) -> Result<Vec<String>> {
    let regime = classify_rho(rho_rule)?;
    let (ka, kb) = k_rule.monomial().order();
    let (ra, rb) = rho_rule.monomial().order();
    let mut notes = Vec::new();
    if ka < 0.0 || (ka == 0.0 && kb < 0.0) {
        return Err(Error::config(format!("k rule '{k_rule}' decreases in n")));
    }
    if ka == 0.0 && kb == 0.0 {
        notes.push(format!("k rule '{k_rule}' is bounded; the blockmodel bias will not vanish"));
    }
    // h^2 rho / log n = n^(2 - 2 ka + ra) log(n)^(-2 kb + rb - 1)
    let growth = (2.0 - 2.0 * ka + ra, -2.0 * kb + rb - 1.0);
    if !(growth.0 > 0.0 || (growth.0 == 0.0 && growth.1 > 0.0)) {
        return Err(Error::config(format!(
            "k rule '{k_rule}' grows too fast for the {regime} regime: block sizes h = n/k need h^2 rho_n / log n -> infinity"
        )));
    }
    if regime == Regime::Dense && ka > 0.75 {
        notes.push(format!("k rule '{k_rule}' exceeds n^(3/4); expect slow convergence"));
    }
    Ok(notes)
}
