//! `--at "x=0.1,0.2;y=1,0"`: an explicit support element.
//!
//! Parts are separated by `;`, coordinates by `,` and/or whitespace. Each
//! part is `x=...` or `y=...`, in either order, each at most once.

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub struct At {
    pub x: Vec<f64>,
    pub y: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AtError(String);

impl fmt::Display for AtError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "--at: {}", self.0)
    }
}

impl std::error::Error for AtError {}

fn coords(name: &str, text: &str) -> Result<Vec<f64>, AtError> {
    let vals: Result<Vec<f64>, _> = text
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| AtError(format!("'{t}' in {name} is not a finite number")))
        })
        .collect();
    let vals = vals?;
    if vals.is_empty() {
        return Err(AtError(format!("{name} has no coordinates")));
    }
    Ok(vals)
}

pub fn parse_at(s: &str) -> Result<At, AtError> {
    let mut x = None;
    let mut y = None;
    for part in s.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let (key, val) = part
            .split_once('=')
            .ok_or_else(|| AtError(format!("expected 'x=...' or 'y=...', found '{part}'")))?;
        let slot = match key.trim() {
            "x" => &mut x,
            "y" => &mut y,
            other => return Err(AtError(format!("unknown part '{other}' (expected x or y)"))),
        };
        if slot.is_some() {
            return Err(AtError(format!("'{}' given twice", key.trim())));
        }
        *slot = Some(coords(key.trim(), val)?);
    }
    let x = x.ok_or_else(|| AtError("missing 'x=...'".into()))?;
    if let Some(y) = &y {
        if y.len() != x.len() {
            return Err(AtError(format!(
                "x has {} coordinates but y has {}",
                x.len(),
                y.len()
            )));
        }
        if y.iter().all(|&v| v == 0.0) {
            return Err(AtError("y must be nonzero".into()));
        }
    }
    Ok(At { x, y })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepts_documented_forms() {
        let a = parse_at("x=0.1,0.2;y=1,0").unwrap();
        assert_eq!(a.x, vec![0.1, 0.2]);
        assert_eq!(a.y, Some(vec![1.0, 0.0]));
        let b = parse_at(" y = 1 2 ; x = 0, 0 ;").unwrap();
        assert_eq!(b.x, vec![0.0, 0.0]);
        assert_eq!(parse_at("x=1e-3").unwrap().y, None);
    }

    #[test]
    fn rejects_malformed() {
        for bad in [
            "",
            "y=1,0",
            "x=1;x=2",
            "x=1,a",
            "x=1,2;y=1",
            "z=1",
            "x=1;y=0",
            "x=",
            "x=nan",
            "x 1",
        ] {
            assert!(parse_at(bad).is_err(), "{bad}");
        }
    }
}
