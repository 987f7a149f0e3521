//! Polynomial output functions and their expression grammar:
//!
//! ```text
//! expr   := ['-'] term (('+' | '-') term)*
//! term   := coef ('*' factor)* | factor ('*' factor)*
//! factor := IDENT ('^' UINT)?
//! coef   := decimal
//! ```
//!
//! `IDENT` is a species name or a positional alias `x1..xd`.

use crate::error::{Error, Result};

pub const MAX_TOTAL_DEGREE: u32 = 8;

/// A function of the state (possibly θ-dependent) with its θ-derivative.
pub trait StateFunction: Sync {
    fn value(&self, x: &[i64], theta: f64) -> Result<(f64, f64)>;
}

#[derive(Clone, Debug, PartialEq)]
pub struct Monomial {
    pub coefficient: f64,
    pub exponents: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputFunction {
    pub terms: Vec<Monomial>,
    dim: usize,
}

impl OutputFunction {
    pub fn new(dim: usize, terms: Vec<Monomial>) -> Result<Self> {
        for t in &terms {
            if t.exponents.len() != dim {
                return Err(Error::Value(format!(
                    "monomial has {} exponents, expected {dim}",
                    t.exponents.len()
                )));
            }
            let deg: u32 = t.exponents.iter().sum();
            if deg > MAX_TOTAL_DEGREE {
                return Err(Error::Value(format!(
                    "total degree {deg} exceeds {MAX_TOTAL_DEGREE}"
                )));
            }
            if !t.coefficient.is_finite() {
                return Err(Error::Value("non-finite coefficient".into()));
            }
        }
        Ok(Self { terms, dim })
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        Self::new(
            dim,
            vec![Monomial {
                coefficient: c,
                exponents: vec![0; dim],
            }],
        )
        .expect("constant is valid")
    }

    /// The `i`-th coordinate (0-based).
    pub fn coordinate(dim: usize, i: usize) -> Self {
        let mut exponents = vec![0; dim];
        exponents[i] = 1;
        Self::new(
            dim,
            vec![Monomial {
                coefficient: 1.0,
                exponents,
            }],
        )
        .expect("coordinate is valid")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> u32 {
        self.terms
            .iter()
            .map(|t| t.exponents.iter().sum())
            .max()
            .unwrap_or(0)
    }

    pub fn eval(&self, x: &[i64]) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                t.exponents
                    .iter()
                    .zip(x)
                    .filter(|(&p, _)| p > 0)
                    .fold(t.coefficient, |acc, (&p, &xi)| {
                        acc * (xi as f64).powi(p as i32)
                    })
            })
            .sum()
    }
}

impl StateFunction for OutputFunction {
    fn value(&self, x: &[i64], _theta: f64) -> Result<(f64, f64)> {
        if x.len() != self.dim {
            return Err(Error::Value(format!(
                "output of dimension {} applied to a state of dimension {}",
                self.dim,
                x.len()
            )));
        }
        Ok((self.eval(x), 0.0))
    }
}

pub fn parse_output_expr(text: &str, species: &[String]) -> Result<OutputFunction> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
        species,
    };
    p.skip_ws();
    if p.pos >= p.src.len() {
        return Err(p.error("empty expression"));
    }
    let mut terms = Vec::new();
    let mut sign = 1.0;
    if p.eat(b'-') {
        sign = -1.0;
    } else {
        p.eat(b'+');
    }
    loop {
        let mut term = p.term()?;
        term.coefficient *= sign;
        terms.push(term);
        if p.eat(b'+') {
            sign = 1.0;
        } else if p.eat(b'-') {
            sign = -1.0;
        } else if p.pos >= p.src.len() {
            break;
        } else {
            return Err(p.error("expected `+`, `-` or end of input"));
        }
    }
    OutputFunction::new(species.len(), terms)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    species: &'a [String],
}

impl Parser<'_> {
    fn error(&self, message: &str) -> Error {
        Error::Expr {
            message: message.to_string(),
            position: self.pos,
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn eat(&mut self, c: u8) -> bool {
        self.skip_ws();
        if self.src.get(self.pos) == Some(&c) {
            self.pos += 1;
            self.skip_ws();
            true
        } else {
            false
        }
    }

    fn term(&mut self) -> Result<Monomial> {
        let mut mono = Monomial {
            coefficient: 1.0,
            exponents: vec![0; self.species.len()],
        };
        match self.src.get(self.pos) {
            Some(c) if c.is_ascii_digit() || *c == b'.' => mono.coefficient = self.number()?,
            _ => self.factor(&mut mono)?,
        }
        while self.eat(b'*') {
            self.factor(&mut mono)?;
        }
        Ok(mono)
    }

    fn number(&mut self) -> Result<f64> {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_digit() || self.src[self.pos] == b'.')
        {
            self.pos += 1;
        }
        // optional exponent part
        if self.pos < self.src.len() && matches!(self.src[self.pos], b'e' | b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < self.src.len() && matches!(self.src[self.pos], b'+' | b'-') {
                self.pos += 1;
            }
            let digits = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if digits == self.pos {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        let v = text.parse::<f64>().map_err(|_| Error::Expr {
            message: format!("invalid number `{text}`"),
            position: start,
        })?;
        self.skip_ws();
        Ok(v)
    }

    fn factor(&mut self, mono: &mut Monomial) -> Result<()> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        if start == self.pos || self.src[start].is_ascii_digit() {
            self.pos = start;
            return Err(self.error("expected species name"));
        }
        let ident = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        let index = self.resolve(ident)?;
        let mut power = 1u32;
        if self.eat(b'^') {
            let s = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if s == self.pos {
                return Err(self.error("expected unsigned integer exponent"));
            }
            power = std::str::from_utf8(&self.src[s..self.pos])
                .expect("ascii")
                .parse()
                .map_err(|_| Error::Expr {
                    message: "exponent too large".into(),
                    position: s,
                })?;
        }
        self.skip_ws();
        mono.exponents[index] = mono.exponents[index].saturating_add(power);
        Ok(())
    }

    fn resolve(&self, ident: &str) -> Result<usize> {
        if let Some(i) = self.species.iter().position(|s| s == ident) {
            return Ok(i);
        }
        if let Some(n) = ident
            .strip_prefix('x')
            .and_then(|r| r.parse::<usize>().ok())
        {
            if (1..=self.species.len()).contains(&n) {
                return Ok(n - 1);
            }
        }
        Err(Error::UnknownSpecies(ident.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn species() -> Vec<String> {
        vec!["S1".into(), "S2".into(), "S3".into()]
    }

    #[test]
    fn positional_alias() {
        let f = parse_output_expr("x3", &species()).unwrap();
        assert_eq!(f, OutputFunction::coordinate(3, 2));
        assert_eq!(f.eval(&[1, 2, 9]), 9.0);
    }

    #[test]
    fn two_term_polynomial() {
        let f = parse_output_expr("2*S1 - 0.5*S2^2", &species()).unwrap();
        assert_eq!(f.terms.len(), 2);
        assert_eq!(f.terms[1].coefficient, -0.5);
        assert_eq!(f.terms[1].exponents, vec![0, 2, 0]);
        assert_eq!(f.eval(&[3, 4, 0]), 6.0 - 8.0);
        assert_eq!(f.degree(), 2);
    }

    #[test]
    fn constants_and_products() {
        let s = species();
        assert_eq!(parse_output_expr("7", &s).unwrap().eval(&[5, 5, 5]), 7.0);
        assert_eq!(
            parse_output_expr("-S1*S2 + 1.5e1", &s)
                .unwrap()
                .eval(&[2, 3, 0]),
            9.0
        );
        assert_eq!(
            parse_output_expr("x1^2*x2", &s).unwrap().eval(&[2, 3, 0]),
            12.0
        );
    }

    #[test]
    fn errors() {
        let s = species();
        assert!(matches!(parse_output_expr("x9", &s), Err(Error::UnknownSpecies(n)) if n == "x9"));
        assert!(matches!(parse_output_expr("", &s), Err(Error::Expr { .. })));
        assert!(matches!(
            parse_output_expr("S1 +", &s),
            Err(Error::Expr { .. })
        ));
        assert!(matches!(
            parse_output_expr("S1 S2", &s),
            Err(Error::Expr { position: 3, .. })
        ));
        assert!(matches!(
            parse_output_expr("S1^9", &s),
            Err(Error::Value(_))
        ));
    }
}
