//! Plain `key = value` system descriptions.
//!
//! ```text
//! n = 4
//! states = x1 x2 x3 x4
//! params =
//! f = 0, x1^2 + x2, 1, x1*x4
//! g1 = x4^2+1, (x3-2*x1)*(x4^2+1), 0, (x1^2+x2)*(x4^2+1)
//! g2 = 0, 0, 1, 0
//! ```
//!
//! Optional keys: `chart`, `beta` (row-major), `h1`, `h2`,
//! `box = lo hi, lo hi, …`, `param_values = J=0.1 L=0.3`, and for simulation
//! `inputs = v1(t), v2(t)` and `z0 = …`. `#` starts a comment.

use std::collections::BTreeMap;
use std::path::Path;

use thiserror::Error;

use crate::symx::{parse, Expr, SymError, Symbol, SymbolTable};
use crate::system::{SpecError, SystemSpec};

#[derive(Debug, Error)]
pub enum SpecFileError {
    #[error("line {line}, column {col}: {message}")]
    Parse {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("missing required key `{0}`")]
    Missing(&'static str),
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

const KEYS: [&str; 15] = [
    "n", "states", "params", "f", "g1", "g2", "chart", "beta", "h1", "h2", "box", "param_values", "inputs", "z0", "name",
];

struct Entry {
    line: usize,
    /// Byte column (0-based) where the value starts.
    col: usize,
    value: String,
}

impl Entry {
    fn err(&self, offset: usize, message: impl Into<String>) -> SpecFileError {
        SpecFileError::Parse {
            line: self.line,
            col: self.col + offset + 1,
            message: message.into(),
        }
    }

    /// Comma-separated items outside parentheses, with their offsets.
    fn items(&self) -> Vec<(usize, &str)> {
        let mut out = Vec::new();
        let mut depth = 0i32;
        let mut start = 0;
        for (i, c) in self.value.char_indices() {
            match c {
                '(' => depth += 1,
                ')' => depth -= 1,
                ',' if depth == 0 => {
                    out.push((start, &self.value[start..i]));
                    start = i + 1;
                }
                _ => {}
            }
        }
        out.push((start, &self.value[start..]));
        out.into_iter()
            .filter(|(_, s)| !s.trim().is_empty() || self.value.contains(','))
            .collect()
    }

    fn words(&self) -> Vec<(usize, &str)> {
        let mut out = Vec::new();
        let mut start = None;
        for (i, c) in self.value.char_indices().chain(std::iter::once((self.value.len(), ' '))) {
            let sep = c.is_whitespace() || c == ',';
            match (start, sep) {
                (None, false) => start = Some(i),
                (Some(s), true) => {
                    out.push((s, &self.value[s..i]));
                    start = None;
                }
                _ => {}
            }
        }
        out
    }

    fn exprs(&self, table: &SymbolTable) -> Result<Vec<Expr>, SpecFileError> {
        self.items()
            .into_iter()
            .map(|(off, s)| {
                if s.trim().is_empty() {
                    return Err(self.err(off, "empty expression"));
                }
                parse(s, table).map_err(|e| match e {
                    SymError::Syntax { offset, message } => self.err(off + offset, message),
                    SymError::Undeclared { name, offset } => {
                        self.err(off + offset, format!("undeclared identifier `{name}`"))
                    }
                    other => self.err(off, other.to_string()),
                })
            })
            .collect()
    }

    fn numbers(&self, text: &str, off: usize) -> Result<Vec<f64>, SpecFileError> {
        let mut out = Vec::new();
        let mut pos = 0;
        for w in text.split_whitespace() {
            let at = text[pos..].find(w).map_or(pos, |p| p + pos);
            pos = at + w.len();
            out.push(
                w.parse::<f64>()
                    .map_err(|_| self.err(off + at, format!("expected a number, found `{w}`")))?,
            );
        }
        Ok(out)
    }
}

fn entries(text: &str) -> Result<BTreeMap<String, Entry>, SpecFileError> {
    let mut map = BTreeMap::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let body = raw.split('#').next().unwrap_or("");
        if body.trim().is_empty() {
            continue;
        }
        let Some(eq) = body.find('=') else {
            return Err(SpecFileError::Parse {
                line,
                col: 1,
                message: "expected `key = value`".into(),
            });
        };
        let key = body[..eq].trim();
        if !KEYS.contains(&key) {
            return Err(SpecFileError::Parse {
                line,
                col: body.find(key).unwrap_or(0) + 1,
                message: format!("unknown key `{key}`"),
            });
        }
        if map.contains_key(key) {
            return Err(SpecFileError::Parse {
                line,
                col: 1,
                message: format!("duplicate key `{key}`"),
            });
        }
        let value = &body[eq + 1..];
        map.insert(
            key.to_string(),
            Entry {
                line,
                col: eq + 1,
                value: value.to_string(),
            },
        );
    }
    Ok(map)
}

/// Parses and validates a system description. Parameters without a value
/// get deterministic values drawn from `seed`.
pub fn parse_spec(text: &str, seed: u64) -> Result<SystemSpec, SpecFileError> {
    let e = entries(text)?;
    let get = |k: &'static str| e.get(k).ok_or(SpecFileError::Missing(k));
    let states: Vec<String> = get("states")?.words().into_iter().map(|(_, w)| w.to_string()).collect();
    let params: Vec<String> = e
        .get("params")
        .map(|p| p.words().into_iter().map(|(_, w)| w.to_string()).collect())
        .unwrap_or_default();
    let n_entry = get("n")?;
    let n: usize = n_entry
        .value
        .trim()
        .parse()
        .map_err(|_| n_entry.err(0, "`n` must be a positive integer"))?;
    if n != states.len() {
        return Err(n_entry.err(
            0,
            format!("n = {n} but {} states are declared", states.len()),
        ));
    }
    let mut seen = std::collections::BTreeSet::new();
    for name in states.iter().chain(&params) {
        if crate::symx::Func::from_name(name).is_some() || name == "t" {
            return Err(get("states")?.err(0, format!("`{name}` is reserved")));
        }
        if !seen.insert(name.clone()) {
            return Err(get("states")?.err(0, format!("`{name}` is declared twice")));
        }
    }
    let s_refs: Vec<&str> = states.iter().map(String::as_str).collect();
    let p_refs: Vec<&str> = params.iter().map(String::as_str).collect();
    let table = SymbolTable::new(&s_refs, &p_refs);

    let mut values = BTreeMap::new();
    if let Some(pv) = e.get("param_values") {
        for (off, w) in pv.words() {
            let Some((k, v)) = w.split_once('=') else {
                return Err(pv.err(off, format!("expected `name=value`, found `{w}`")));
            };
            if !params.iter().any(|p| p == k) {
                return Err(pv.err(off, format!("`{k}` is not a declared parameter")));
            }
            let v: f64 = v
                .parse()
                .map_err(|_| pv.err(off + k.len() + 1, format!("expected a number, found `{v}`")))?;
            values.insert(Symbol::new(k), v);
        }
    }

    let vector = |k: &'static str, len: usize| -> Result<Option<Vec<Expr>>, SpecFileError> {
        let Some(en) = e.get(k) else { return Ok(None) };
        let v = en.exprs(&table)?;
        if v.len() != len {
            return Err(SpecError::Dimension {
                what: format!("{k} (line {})", en.line),
                expected: len,
                got: v.len(),
            }
            .into());
        }
        Ok(Some(v))
    };
    let f = vector("f", n)?.ok_or(SpecFileError::Missing("f"))?;
    let g1 = vector("g1", n)?.ok_or(SpecFileError::Missing("g1"))?;
    let g2 = vector("g2", n)?.ok_or(SpecFileError::Missing("g2"))?;
    let mut spec = SystemSpec::new(table.clone(), values, f, g1, g2, seed)?;
    spec.chart = vector("chart", n)?;
    spec.beta = vector("beta", 4)?.map(|b| [b[0].clone(), b[1].clone(), b[2].clone(), b[3].clone()]);
    spec.h1 = vector("h1", 1)?.map(|mut v| v.remove(0));
    spec.h2 = vector("h2", 1)?.map(|mut v| v.remove(0));

    if let Some(b) = e.get("box") {
        let mut bounds = Vec::new();
        for (off, item) in b.items() {
            let nums = b.numbers(item, off)?;
            if nums.len() != 2 || nums[0] >= nums[1] {
                return Err(b.err(off, "each box entry is `lo hi` with lo < hi"));
            }
            bounds.push((nums[0], nums[1]));
        }
        if bounds.len() != n {
            return Err(SpecError::Dimension {
                what: format!("box (line {})", b.line),
                expected: n,
                got: bounds.len(),
            }
            .into());
        }
        spec.sample_box = Some(bounds);
    }
    if let Some(z) = e.get("z0") {
        let mut v = Vec::new();
        for (off, item) in z.items() {
            let nums = z.numbers(item, off)?;
            if nums.len() != 1 {
                return Err(z.err(off, "expected one number per entry"));
            }
            v.push(nums[0]);
        }
        if v.len() != n {
            return Err(SpecError::Dimension {
                what: format!("z0 (line {})", z.line),
                expected: n,
                got: v.len(),
            }
            .into());
        }
        spec.z0 = Some(v);
    }
    if let Some(inp) = e.get("inputs") {
        let t_table = SymbolTable::new(&["t"], &[]);
        let v = inp.exprs(&t_table)?;
        if v.len() != 2 {
            return Err(SpecError::Dimension {
                what: format!("inputs (line {})", inp.line),
                expected: 2,
                got: v.len(),
            }
            .into());
        }
        spec.inputs = Some((v[0].clone(), v[1].clone()));
    }
    Ok(spec)
}

pub fn load_spec(path: &Path, seed: u64) -> Result<SystemSpec, SpecFileError> {
    let text = std::fs::read_to_string(path).map_err(|source| SpecFileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_spec(&text, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    const EX1: &str = "\
n = 4
states = x1 x2 x3 x4
params =
f = 0, x1^2 + x2, 1, x1*x4
g1 = x4^2+1, (x3-2*x1)*(x4^2+1), 0, (x1^2+x2)*(x4^2+1)
g2 = 0, 0, 1, 0
";

    #[test]
    fn four_state_loads() {
        let s = parse_spec(EX1, 0).unwrap();
        assert_eq!(s.n(), 4);
        assert_eq!(s.g1.comps[1].to_string(), parse("(x3-2*x1)*(x4^2+1)", &s.symbols).map(|e| crate::symx::normalize(&e)).unwrap().to_string());
    }

    #[test]
    fn dimension_mismatch() {
        let bad = EX1.replace("g1 = x4^2+1, ", "g1 = ");
        assert!(matches!(
            parse_spec(&bad, 0),
            Err(SpecFileError::Spec(SpecError::Dimension { expected: 4, got: 3, .. }))
        ));
    }

    #[test]
    fn undeclared_symbol_has_location() {
        let bad = EX1.replace("f = 0, x1^2", "f = 0, y^2");
        match parse_spec(&bad, 0) {
            Err(SpecFileError::Parse { line, col, message }) => {
                assert_eq!(line, 4);
                assert_eq!(col, 8);
                assert!(message.contains("`y`"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn optional_keys() {
        let text = format!(
            "{EX1}chart = x4, x1^2+x2, x3, x1\nbeta = 1/(x4^2+1), 0, 0, 1\nbox = -1 1, -2 2, -1 1, -1 1\ninputs = 1, sin(t)\nz0 = 0.1, 0.1, 0, 0.1\n"
        );
        let s = parse_spec(&text, 0).unwrap();
        assert_eq!(s.chart.unwrap().len(), 4);
        assert!(s.beta.unwrap()[3].is_one());
        assert_eq!(s.sample_box.unwrap()[1], (-2.0, 2.0));
        assert_eq!(s.z0.unwrap()[0], 0.1);
        assert!(s.inputs.is_some());
    }

    #[test]
    fn parameters() {
        let text = "n = 2\nstates = a b\nparams = k m\nparam_values = k=0.25\nf = k*a, m*b\ng1 = 1, 0\ng2 = 0, 1\n";
        let s = parse_spec(text, 3).unwrap();
        assert_eq!(s.param_values[&Symbol::new("k")], 0.25);
        let m = s.param_values[&Symbol::new("m")];
        assert!((0.5..2.0).contains(&m));
        assert_eq!(s.user_bound, vec![Symbol::new("k")]);
        assert!(parse_spec(&text.replace("k=0.25", "q=1"), 0).is_err());
    }

    #[test]
    fn unknown_key() {
        assert!(matches!(
            parse_spec(&format!("{EX1}colour = red\n"), 0),
            Err(SpecFileError::Parse { line: 7, .. })
        ));
    }
}
