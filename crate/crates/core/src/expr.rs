//! Tiny parser for one-variable rational expressions with integer
//! coefficients, e.g. `1/s`, `(s-1)/s^2`, `3*t^2 + 1`. The symbol `g` stands
//! for the chosen generator of the residue field extension.

use crate::poly::Poly;
use crate::witt::Ring;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(i64),
    Var(String),
    Op(char),
}

fn lex(s: &str) -> Result<Vec<Tok>, String> {
    let cs: Vec<char> = s.chars().collect();
    let mut i = 0;
    let mut out = Vec::new();
    while i < cs.len() {
        let c = cs[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() {
            let st = i;
            while i < cs.len() && cs[i].is_ascii_digit() {
                i += 1;
            }
            let v: String = cs[st..i].iter().collect();
            out.push(Tok::Num(v.parse().map_err(|e| format!("bad number {v}: {e}"))?));
        } else if c.is_alphabetic() || c == '_' {
            let st = i;
            while i < cs.len() && (cs[i].is_alphanumeric() || cs[i] == '_') {
                i += 1;
            }
            out.push(Tok::Var(cs[st..i].iter().collect()));
        } else if "+-*/^()".contains(c) {
            out.push(Tok::Op(c));
            i += 1;
        } else {
            return Err(format!("unexpected character '{c}'"));
        }
    }
    Ok(out)
}

/// A fraction `num/den` of polynomials.
#[derive(Clone, Debug, PartialEq)]
pub struct Rational {
    pub num: Poly,
    pub den: Poly,
}

struct Parser<'a> {
    toks: Vec<Tok>,
    pos: usize,
    var: &'a str,
    ring: &'a Ring,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn add(&self, a: Rational, b: Rational, sign: i64) -> Rational {
        let r = self.ring;
        let bn = if sign < 0 { b.num.neg(r) } else { b.num };
        Rational { num: a.num.mul(r, &b.den).add(r, &bn.mul(r, &a.den)), den: a.den.mul(r, &b.den) }
    }

    fn expr(&mut self) -> Result<Rational, String> {
        let mut acc = self.term()?;
        while let Some(Tok::Op(c)) = self.peek() {
            let c = *c;
            if c != '+' && c != '-' {
                break;
            }
            self.pos += 1;
            let t = self.term()?;
            acc = self.add(acc, t, if c == '+' { 1 } else { -1 });
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<Rational, String> {
        let r = self.ring;
        let mut acc = self.unary()?;
        while let Some(Tok::Op(c)) = self.peek() {
            let c = *c;
            if c != '*' && c != '/' {
                break;
            }
            self.pos += 1;
            let f = self.unary()?;
            acc = if c == '*' {
                Rational { num: acc.num.mul(r, &f.num), den: acc.den.mul(r, &f.den) }
            } else {
                if f.num.is_zero() {
                    return Err("division by zero".into());
                }
                Rational { num: acc.num.mul(r, &f.den), den: acc.den.mul(r, &f.num) }
            };
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<Rational, String> {
        if let Some(Tok::Op('-')) = self.peek() {
            self.pos += 1;
            let v = self.unary()?;
            return Ok(Rational { num: v.num.neg(self.ring), den: v.den });
        }
        self.power()
    }

    fn power(&mut self) -> Result<Rational, String> {
        let r = self.ring;
        let base = self.atom()?;
        if let Some(Tok::Op('^')) = self.peek() {
            self.pos += 1;
            let neg = matches!(self.peek(), Some(Tok::Op('-')));
            if neg {
                self.pos += 1;
            }
            let e = match self.toks.get(self.pos) {
                Some(Tok::Num(v)) => *v as u32,
                _ => return Err("exponent must be an integer".into()),
            };
            self.pos += 1;
            let (n, d) = (base.num.pow(r, e), base.den.pow(r, e));
            return Ok(if neg { Rational { num: d, den: n } } else { Rational { num: n, den: d } });
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Rational, String> {
        let r = self.ring;
        let t = self.peek().cloned().ok_or("unexpected end of expression")?;
        self.pos += 1;
        match t {
            Tok::Num(v) => Ok(Rational { num: Poly::from_ints(r, &[v]), den: Poly::one(r) }),
            Tok::Var(name) => {
                if name == self.var {
                    Ok(Rational { num: Poly::x(r), den: Poly::one(r) })
                } else if name == "g" {
                    Ok(Rational { num: Poly::constant(r, r.gen()), den: Poly::one(r) })
                } else {
                    Err(format!("unknown variable '{name}' (expected '{}')", self.var))
                }
            }
            Tok::Op('(') => {
                let e = self.expr()?;
                match self.peek() {
                    Some(Tok::Op(')')) => {
                        self.pos += 1;
                        Ok(e)
                    }
                    _ => Err("missing ')'".into()),
                }
            }
            Tok::Op(c) => Err(format!("unexpected '{c}'")),
        }
    }
}

pub fn parse_rational(ring: &Ring, var: &str, s: &str) -> Result<Rational, String> {
    let toks = lex(s)?;
    let mut p = Parser { toks, pos: 0, var, ring };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(format!("trailing input in '{s}'"));
    }
    if e.den.is_zero() {
        return Err("zero denominator".into());
    }
    Ok(e)
}

/// Parses a polynomial expression; fails if a genuine denominator remains.
pub fn parse_poly(ring: &Ring, var: &str, s: &str) -> Result<Poly, String> {
    let e = parse_rational(ring, var, s)?;
    let (q, rem) = e.num.divrem(ring, &e.den);
    if !rem.is_zero() {
        return Err(format!("'{s}' is not a polynomial"));
    }
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::witt::WittRing;

    #[test]
    fn parses_fractions() {
        let r = WittRing::new(5, 2, 1, &[0, 1]).unwrap();
        let e = parse_rational(&r, "s", "1/s").unwrap();
        assert_eq!(e.num, Poly::one(&r));
        assert_eq!(e.den, Poly::x(&r));
        let p = parse_poly(&r, "t", "(t-1)*(t+1) + 2*t^3").unwrap();
        assert_eq!(p, Poly::from_ints(&r, &[-1, 0, 1, 2]));
        assert!(parse_poly(&r, "t", "1/t").is_err());
        assert!(parse_rational(&r, "t", "x+1").is_err());
    }
}
