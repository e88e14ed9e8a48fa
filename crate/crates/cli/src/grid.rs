//! Parameter grids: a scalar, an explicit array, or a `start:stop:step` string.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

const MAX_POINTS: usize = 1_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridRepr<f64>", into = "Vec<f64>")]
pub struct Grid(pub Vec<f64>);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridRepr<usize>", into = "Vec<usize>")]
pub struct IntGrid(pub Vec<usize>);

#[derive(Deserialize)]
#[serde(untagged)]
enum GridRepr<T> {
    One(T),
    Many(Vec<T>),
    Text(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridError(String);

impl fmt::Display for GridError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for GridError {}

fn decimals(s: &str) -> usize {
    let mantissa = s.split(['e', 'E']).next().unwrap_or(s);
    mantissa.split_once('.').map_or(0, |(_, frac)| frac.len())
}

fn parse_f64(s: &str) -> Result<f64, GridError> {
    let x: f64 = s.trim().parse().map_err(|_| GridError(format!("not a number: {s:?}")))?;
    if !x.is_finite() {
        return Err(GridError(format!("not finite: {s:?}")));
    }
    Ok(x)
}

impl FromStr for Grid {
    type Err = GridError;

    /// `"a:b:h"` is inclusive of `b` and each value is rounded to the number of
    /// decimals written in the pattern, so `-2:2:0.05` yields exact decimal
    /// literals. Comma-separated lists are also accepted.
    fn from_str(s: &str) -> Result<Self, GridError> {
        let s = s.trim();
        if s.contains(':') {
            let parts: Vec<&str> = s.split(':').collect();
            if parts.len() != 3 {
                return Err(GridError(format!("expected start:stop:step, got {s:?}")));
            }
            let (a, b, h) = (parse_f64(parts[0])?, parse_f64(parts[1])?, parse_f64(parts[2])?);
            if h <= 0.0 || b < a {
                return Err(GridError(format!("need step > 0 and start <= stop in {s:?}")));
            }
            let count = ((b - a) / h + 1e-9).floor() as usize + 1;
            if count > MAX_POINTS {
                return Err(GridError(format!("{s:?} has {count} points")));
            }
            let digits = parts.iter().map(|p| decimals(p.trim())).max().unwrap_or(0);
            let values = (0..count)
                .map(|k| {
                    let x = a + k as f64 * h;
                    let x: f64 = format!("{x:.digits$}").parse().unwrap();
                    if x == 0.0 {
                        0.0
                    } else {
                        x
                    }
                })
                .collect();
            return Ok(Grid(values));
        }
        let values = s.split(',').map(parse_f64).collect::<Result<Vec<_>, _>>()?;
        Grid::try_from(values)
    }
}

impl TryFrom<Vec<f64>> for Grid {
    type Error = GridError;

    fn try_from(values: Vec<f64>) -> Result<Self, GridError> {
        if values.is_empty() {
            return Err(GridError("grid is empty".into()));
        }
        if values.iter().any(|x| !x.is_finite()) {
            return Err(GridError("grid values must be finite".into()));
        }
        Ok(Grid(values))
    }
}

impl TryFrom<GridRepr<f64>> for Grid {
    type Error = GridError;

    fn try_from(r: GridRepr<f64>) -> Result<Self, GridError> {
        match r {
            GridRepr::One(x) => Grid::try_from(vec![x]),
            GridRepr::Many(v) => Grid::try_from(v),
            GridRepr::Text(s) => s.parse(),
        }
    }
}

impl From<Grid> for Vec<f64> {
    fn from(g: Grid) -> Self {
        g.0
    }
}

fn parse_usize(s: &str) -> Result<usize, GridError> {
    s.trim().parse().map_err(|_| GridError(format!("not a non-negative integer: {s:?}")))
}

impl FromStr for IntGrid {
    type Err = GridError;

    /// `"a:b"` or `"a:b:h"` (inclusive), or a comma-separated list.
    fn from_str(s: &str) -> Result<Self, GridError> {
        let s = s.trim();
        if s.contains(':') {
            let parts = s.split(':').map(parse_usize).collect::<Result<Vec<_>, _>>()?;
            let (a, b, h) = match parts[..] {
                [a, b] => (a, b, 1),
                [a, b, h] => (a, b, h),
                _ => return Err(GridError(format!("expected start:stop[:step], got {s:?}"))),
            };
            if h == 0 || b < a {
                return Err(GridError(format!("need step > 0 and start <= stop in {s:?}")));
            }
            return IntGrid::try_from((a..=b).step_by(h).collect::<Vec<_>>());
        }
        let values = s.split(',').map(parse_usize).collect::<Result<Vec<_>, _>>()?;
        IntGrid::try_from(values)
    }
}

impl TryFrom<Vec<usize>> for IntGrid {
    type Error = GridError;

    fn try_from(values: Vec<usize>) -> Result<Self, GridError> {
        if values.is_empty() {
            return Err(GridError("grid is empty".into()));
        }
        if values.len() > MAX_POINTS {
            return Err(GridError(format!("grid has {} points", values.len())));
        }
        Ok(IntGrid(values))
    }
}

impl TryFrom<GridRepr<usize>> for IntGrid {
    type Error = GridError;

    fn try_from(r: GridRepr<usize>) -> Result<Self, GridError> {
        match r {
            GridRepr::One(x) => IntGrid::try_from(vec![x]),
            GridRepr::Many(v) => IntGrid::try_from(v),
            GridRepr::Text(s) => s.parse(),
        }
    }
}

impl From<IntGrid> for Vec<usize> {
    fn from(g: IntGrid) -> Self {
        g.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        let g: Grid = "-2:2:0.05".parse().unwrap();
        assert_eq!(g.0.len(), 81);
        assert_eq!(g.0[0], -2.0);
        assert_eq!(g.0[40], 0.0);
        assert_eq!(g.0[41], 0.05);
        assert_eq!(g.0[80], 2.0);
        assert!(g.0.iter().zip(g.0.iter().rev()).all(|(a, b)| *a == -*b));
        let g: Grid = "0.2:1.8:0.05".parse().unwrap();
        assert_eq!((g.0.len(), g.0[32]), (33, 1.8));
        assert_eq!("1.5".parse::<Grid>().unwrap().0, vec![1.5]);
        assert_eq!("0.1, 0.3".parse::<Grid>().unwrap().0, vec![0.1, 0.3]);
        assert!("1:0:0.1".parse::<Grid>().is_err());
        assert!("0:1:0".parse::<Grid>().is_err());
        assert!("0:1".parse::<Grid>().is_err());
        assert!("x".parse::<Grid>().is_err());
    }

    #[test]
    fn integer_ranges() {
        assert_eq!("8:13".parse::<IntGrid>().unwrap().0, vec![8, 9, 10, 11, 12, 13]);
        assert_eq!("6,8,10".parse::<IntGrid>().unwrap().0, vec![6, 8, 10]);
        assert_eq!("6:12:2".parse::<IntGrid>().unwrap().0, vec![6, 8, 10, 12]);
        assert!("-1".parse::<IntGrid>().is_err());
    }

    #[test]
    fn json_forms() {
        let g: Grid = serde_json::from_str("[0.1, 0.2]").unwrap();
        assert_eq!(g.0, vec![0.1, 0.2]);
        let g: Grid = serde_json::from_str("0.5").unwrap();
        assert_eq!(g.0, vec![0.5]);
        let g: Grid = serde_json::from_str("\"0:1:0.5\"").unwrap();
        assert_eq!(g.0, vec![0.0, 0.5, 1.0]);
        assert!(serde_json::from_str::<Grid>("[]").is_err());
        let n: IntGrid = serde_json::from_str("\"2:4\"").unwrap();
        assert_eq!(n.0, vec![2, 3, 4]);
        assert_eq!(serde_json::to_string(&n).unwrap(), "[2,3,4]");
    }
}
