//! Reader for the list/dict literals models return: JSON, or Python-style
//! with single quotes, `True`/`False`/`None` and trailing commas.

use serde_json::{Map, Number, Value};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LiteralError {
    pub offset: usize,
    pub message: String,
}

/// Parses one literal starting at byte `start` of `text`. Returns the value
/// and the byte offset just past it; trailing text is left to the caller.
pub fn parse_at(text: &str, start: usize) -> Result<(Value, usize), LiteralError> {
    let mut p = Parser {
        s: text.as_bytes(),
        text,
        i: start,
        depth: 0,
    };
    let v = p.value()?;
    Ok((v, p.i))
}

const MAX_DEPTH: usize = 64;

struct Parser<'a> {
    s: &'a [u8],
    text: &'a str,
    i: usize,
    depth: usize,
}

impl Parser<'_> {
    fn err<T>(&self, message: impl Into<String>) -> Result<T, LiteralError> {
        Err(LiteralError {
            offset: self.i,
            message: message.into(),
        })
    }

    fn peek(&self) -> Option<u8> {
        self.s.get(self.i).copied()
    }

    fn ws(&mut self) {
        while matches!(self.peek(), Some(b' ' | b'\t' | b'\n' | b'\r')) {
            self.i += 1;
        }
    }

    fn value(&mut self) -> Result<Value, LiteralError> {
        self.ws();
        match self.peek() {
            None => self.err("unexpected end of input"),
            Some(b'[') => self.list(),
            Some(b'{') => self.dict(),
            Some(q @ (b'"' | b'\'')) => self.string(q).map(Value::String),
            Some(b'-' | b'+' | b'0'..=b'9' | b'.') => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.word(),
            Some(_) => self.err("unexpected character"),
        }
    }

    fn enter(&mut self) -> Result<(), LiteralError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return self.err("nesting too deep");
        }
        Ok(())
    }

    fn list(&mut self) -> Result<Value, LiteralError> {
        self.enter()?;
        self.i += 1;
        let mut out = Vec::new();
        loop {
            self.ws();
            if self.peek() == Some(b']') {
                self.i += 1;
                break;
            }
            out.push(self.value()?);
            self.ws();
            match self.peek() {
                Some(b',') => self.i += 1,
                Some(b']') => {
                    self.i += 1;
                    break;
                }
                _ => return self.err("expected `,` or `]`"),
            }
        }
        self.depth -= 1;
        Ok(Value::Array(out))
    }

    fn dict(&mut self) -> Result<Value, LiteralError> {
        self.enter()?;
        self.i += 1;
        let mut out = Map::new();
        loop {
            self.ws();
            let key = match self.peek() {
                Some(b'}') => {
                    self.i += 1;
                    break;
                }
                Some(q @ (b'"' | b'\'')) => self.string(q)?,
                _ => return self.err("expected a quoted key"),
            };
            self.ws();
            if self.peek() != Some(b':') {
                return self.err("expected `:`");
            }
            self.i += 1;
            let v = self.value()?;
            out.insert(key, v);
            self.ws();
            match self.peek() {
                Some(b',') => self.i += 1,
                Some(b'}') => {
                    self.i += 1;
                    break;
                }
                _ => return self.err("expected `,` or `}`"),
            }
        }
        self.depth -= 1;
        Ok(Value::Object(out))
    }

    fn string(&mut self, quote: u8) -> Result<String, LiteralError> {
        self.i += 1;
        let mut out = String::new();
        loop {
            let start = self.i;
            while let Some(c) = self.peek() {
                if c == quote || c == b'\\' || c == b'\n' {
                    break;
                }
                self.i += 1;
            }
            // quote, backslash and newline are ASCII, so this is a char boundary
            out.push_str(&self.text[start..self.i]);
            match self.peek() {
                None | Some(b'\n') => return self.err("unterminated string"),
                Some(c) if c == quote => {
                    self.i += 1;
                    return Ok(out);
                }
                _ => {
                    self.i += 1;
                    let Some(e) = self.peek() else {
                        return self.err("unterminated escape");
                    };
                    self.i += 1;
                    match e {
                        b'n' => out.push('\n'),
                        b't' => out.push('\t'),
                        b'r' => out.push('\r'),
                        b'b' => out.push('\u{8}'),
                        b'f' => out.push('\u{c}'),
                        b'/' => out.push('/'),
                        b'\\' => out.push('\\'),
                        b'"' => out.push('"'),
                        b'\'' => out.push('\''),
                        b'u' => out.push(self.unicode_escape()?),
                        _ => return self.err("unknown escape"),
                    }
                }
            }
        }
    }

    fn hex4(&mut self) -> Result<u32, LiteralError> {
        let Some(h) = self.text.get(self.i..self.i + 4) else {
            return self.err("short \\u escape");
        };
        let v = u32::from_str_radix(h, 16).or_else(|_| self.err("bad \\u escape"))?;
        self.i += 4;
        Ok(v)
    }

    fn unicode_escape(&mut self) -> Result<char, LiteralError> {
        let hi = self.hex4()?;
        if (0xD800..0xDC00).contains(&hi) {
            if self.text.get(self.i..self.i + 2) != Some("\\u") {
                return self.err("unpaired surrogate");
            }
            self.i += 2;
            let lo = self.hex4()?;
            if !(0xDC00..0xE000).contains(&lo) {
                return self.err("unpaired surrogate");
            }
            let c = 0x10000 + ((hi - 0xD800) << 10) + (lo - 0xDC00);
            return char::from_u32(c).map_or_else(|| self.err("bad code point"), Ok);
        }
        char::from_u32(hi).map_or_else(|| self.err("bad code point"), Ok)
    }

    fn number(&mut self) -> Result<Value, LiteralError> {
        let start = self.i;
        while matches!(
            self.peek(),
            Some(b'-' | b'+' | b'.' | b'e' | b'E' | b'0'..=b'9')
        ) {
            self.i += 1;
        }
        let t = &self.text[start..self.i];
        let t = t.strip_prefix('+').unwrap_or(t);
        if let Ok(n) = t.parse::<i64>() {
            return Ok(Value::Number(n.into()));
        }
        match t.parse::<f64>().ok().and_then(Number::from_f64) {
            Some(n) => Ok(Value::Number(n)),
            None => {
                self.i = start;
                self.err(format!("bad number `{t}`"))
            }
        }
    }

    fn word(&mut self) -> Result<Value, LiteralError> {
        let start = self.i;
        while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == b'_') {
            self.i += 1;
        }
        match &self.text[start..self.i] {
            "true" | "True" => Ok(Value::Bool(true)),
            "false" | "False" => Ok(Value::Bool(false)),
            "null" | "None" => Ok(Value::Null),
            w => {
                let w = w.to_string();
                self.i = start;
                self.err(format!("unexpected word `{w}`"))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn parse(s: &str) -> Result<Value, LiteralError> {
        parse_at(s, 0).map(|(v, _)| v)
    }

    #[test]
    fn json_and_python_forms_agree() {
        let j = parse(r#"[{"action": "Open the drawer", "n": 2, "ok": true}]"#).unwrap();
        let p = parse("[{'action': 'Open the drawer', 'n': 2, 'ok': True,},]").unwrap();
        assert_eq!(j, p);
        assert_eq!(j, json!([{"action": "Open the drawer", "n": 2, "ok": true}]));
    }

    #[test]
    fn escapes() {
        assert_eq!(parse(r"'it\'s'").unwrap(), json!("it's"));
        assert_eq!(parse(r#""a\"b\né😀""#).unwrap(), json!("a\"b\né😀"));
        assert_eq!(parse(r#""café au lait""#).unwrap(), json!("café au lait"));
        assert_eq!(parse("\"naïve\"").unwrap(), json!("naïve"));
    }

    #[test]
    fn numbers() {
        assert_eq!(parse("-12").unwrap(), json!(-12));
        assert_eq!(parse("12.5").unwrap(), json!(12.5));
        assert_eq!(parse("1e2").unwrap(), json!(100.0));
        assert!(parse("1.2.3").is_err());
    }

    #[test]
    fn reports_position_and_stops_at_end() {
        let e = parse("[1, 2").unwrap_err();
        assert_eq!(e.offset, 5);
        let (v, end) = parse_at("xx [1] trailing", 3).unwrap();
        assert_eq!(v, json!([1]));
        assert_eq!(end, 6);
        assert!(parse("[{'a' 1}]").is_err());
        assert!(parse("'open").is_err());
        assert!(parse("maybe").is_err());
    }

    #[test]
    fn deep_nesting_is_an_error_not_a_crash() {
        let s = "[".repeat(10_000);
        assert!(parse(&s).is_err());
    }
}
