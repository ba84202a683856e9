//! Parser for the small monomial/sum grammar used in experiment configs:
//!
//! ```text
//! poly   := sign? term (sign term)*
//! term   := INT factor* | factor+
//! factor := 'f' INT '.g' INT ('^' INT)?
//! ```
//!
//! Products are written by juxtaposition, e.g. `2 f1.g0^2 f2.g0 - 1`.

use num_complex::Complex64;

use super::{GenId, NcError, NcPolynomial, Word};

struct Cursor<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, NcError> {
        Err(NcError::Parse {
            pos: self.pos,
            msg: msg.into(),
        })
    }

    fn int(&mut self) -> Result<u64, NcError> {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return self.err("expected an integer");
        }
        std::str::from_utf8(&self.src[start..self.pos])
            .unwrap()
            .parse()
            .or_else(|_| self.err("integer out of range"))
    }

    fn expect(&mut self, lit: &[u8]) -> Result<(), NcError> {
        if self.src[self.pos..].starts_with(lit) {
            self.pos += lit.len();
            Ok(())
        } else {
            self.err(format!("expected `{}`", String::from_utf8_lossy(lit)))
        }
    }

    fn generator(&mut self) -> Result<GenId, NcError> {
        self.expect(b"f")?;
        let factor = self.int()?;
        self.expect(b".g")?;
        let index = self.int()?;
        let factor = u16::try_from(factor).or_else(|_| self.err("factor label too large"))?;
        let index = u32::try_from(index).or_else(|_| self.err("generator index too large"))?;
        Ok(GenId::new(factor, index))
    }

    fn term(&mut self) -> Result<(Word, i64), NcError> {
        let mut coeff: i64 = 1;
        let mut seen = false;
        if matches!(self.peek(), Some(b'0'..=b'9')) {
            coeff = i64::try_from(self.int()?).or_else(|_| self.err("coefficient too large"))?;
            seen = true;
        }
        let mut letters = Vec::new();
        while self.peek() == Some(b'f') {
            let g = self.generator()?;
            let mut power = 1;
            if self.peek() == Some(b'^') {
                self.pos += 1;
                self.skip_ws();
                power = self.int()?;
                if power > 64 {
                    return self.err("exponent too large");
                }
            }
            letters.extend(std::iter::repeat_n(g, power as usize));
            seen = true;
        }
        if !seen {
            return self.err("expected a coefficient or a generator");
        }
        Ok((Word::from_letters(letters), coeff))
    }
}

pub fn parse_polynomial(s: &str) -> Result<NcPolynomial, NcError> {
    let mut cur = Cursor {
        src: s.as_bytes(),
        pos: 0,
    };
    let mut poly = NcPolynomial::zero();
    let mut sign = 1i64;
    match cur.peek() {
        None => return cur.err("empty polynomial"),
        Some(b'-') => {
            sign = -1;
            cur.pos += 1;
        }
        Some(b'+') => cur.pos += 1,
        _ => {}
    }
    loop {
        let (w, c) = cur.term()?;
        poly.add_term(w, Complex64::new((sign * c) as f64, 0.0));
        match cur.peek() {
            None => break,
            Some(b'+') => sign = 1,
            Some(b'-') => sign = -1,
            Some(_) => return cur.err("expected `+`, `-` or end of input"),
        }
        cur.pos += 1;
    }
    Ok(poly)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(letters: &[(u16, u32)]) -> Word {
        Word::from_letters(letters.iter().map(|&(f, i)| GenId::new(f, i)))
    }

    #[test]
    fn parses_powers_and_juxtaposition() {
        let p = parse_polynomial("2 f1.g0^2 f2.g0 - f1.g0 + 3").unwrap();
        assert_eq!(p.num_terms(), 3);
        assert_eq!(p.coefficient(&w(&[(1, 0), (1, 0), (2, 0)])).re, 2.0);
        assert_eq!(p.coefficient(&w(&[(1, 0)])).re, -1.0);
        assert_eq!(p.coefficient(&Word::unit()).re, 3.0);
    }

    #[test]
    fn leading_minus_and_like_terms() {
        let p = parse_polynomial("-f1.g0 f2.g1 + 2 f1.g0 f2.g1").unwrap();
        assert_eq!(p.num_terms(), 1);
        assert_eq!(p.coefficient(&w(&[(1, 0), (2, 1)])).re, 1.0);
    }

    #[test]
    fn rejects_garbage() {
        for bad in ["", "f1", "f1.g", "x", "2 +", "f1.g0 ^", "f1.g0 * f2.g0"] {
            assert!(parse_polynomial(bad).is_err(), "{bad:?} should not parse");
        }
    }

    #[test]
    fn display_round_trips() {
        for s in ["f1.g0^4", "2 f1.g0^2 f2.g0 - f1.g0 + 3", "-1", "f0.g1 f1.g0 f0.g1"] {
            let p = parse_polynomial(s).unwrap();
            let again = parse_polynomial(&p.to_string()).unwrap();
            assert_eq!(p, again, "{s}");
        }
    }
}
