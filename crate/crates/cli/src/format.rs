//! JSON game files. Rationals are written as `"p/q"` strings; decimals are read exactly.

use std::path::Path;

use num::{BigInt, Signed, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;

use stopgame_core::payoff::time_tuples;
use stopgame_core::{FilteredSpace, PayoffField, Real, StopGameError, StoppingTime, TimeGrid};

use crate::error::{CliError, CliResult};

/// Parses `"p/q"`, an integer, or a decimal with optional exponent, exactly.
pub fn parse_rational(text: &str) -> Result<Real, String> {
    let t = text.trim();
    if let Some((p, q)) = t.split_once('/') {
        let p: BigInt = p.trim().parse().map_err(|_| format!("bad numerator in {text:?}"))?;
        let q: BigInt = q.trim().parse().map_err(|_| format!("bad denominator in {text:?}"))?;
        if q.is_zero() {
            return Err(format!("zero denominator in {text:?}"));
        }
        return Ok(Real::new(p, q));
    }
    parse_decimal(t).ok_or_else(|| format!("not a rational number: {text:?}"))
}

fn parse_decimal(t: &str) -> Option<Real> {
    let (mantissa, exp) = match t.find(['e', 'E']) {
        Some(i) => (&t[..i], t[i + 1..].parse::<i64>().ok()?),
        None => (t, 0),
    };
    let (neg, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let joined = format!("{int_part}{frac}");
    let n: BigInt = if joined.is_empty() { BigInt::zero() } else { joined.parse().ok()? };
    let scale = exp - frac.len() as i64;
    if scale.unsigned_abs() > 1000 {
        return None;
    }
    let ten = BigInt::from(10);
    let power = num::pow(ten, scale.unsigned_abs() as usize);
    let value = if scale >= 0 { Real::from_integer(n * power) } else { Real::new(n, power) };
    Some(if neg { -value } else { value })
}

pub fn rational_from_value(v: &Value) -> Result<Real, String> {
    match v {
        Value::String(s) => parse_rational(s),
        Value::Number(n) => parse_rational(&n.to_string()),
        other => Err(format!("expected a rational, found {other}")),
    }
}

/// A rational that serializes as `"p/q"` (or `"p"` for integers).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rat(pub Real);

impl Serialize for Rat {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0.to_string())
    }
}

impl<'de> Deserialize<'de> for Rat {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Value::deserialize(d)?;
        rational_from_value(&v).map(Rat).map_err(D::Error::custom)
    }
}

pub fn rats(xs: &[Real]) -> Vec<Rat> {
    xs.iter().cloned().map(Rat).collect()
}

/// On-disk layout of a game.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameSpecFile {
    pub grid: Vec<Rat>,
    pub weights: Vec<Rat>,
    pub partitions: Vec<Vec<Vec<usize>>>,
    /// Per player, nested arrays indexed `[t_1]...[t_N][outcome]`.
    pub payoffs: Vec<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<Vec<usize>>,
    pub epsilon: Rat,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<Rat>,
}

/// A validated game.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Game {
    pub space: FilteredSpace,
    pub payoffs: Vec<PayoffField>,
    pub start: StoppingTime,
    pub epsilon: Real,
    pub h: Option<Real>,
}

impl Game {
    pub fn players(&self) -> usize {
        self.payoffs.len()
    }

    pub fn from_file(file: GameSpecFile) -> CliResult<Game> {
        let grid = TimeGrid::new(file.grid.into_iter().map(|r| r.0).collect())
            .map_err(|e| CliError::Validation(vec![format!("grid: {e}")]))?;
        let weights = file.weights.into_iter().map(|r| r.0).collect();
        let space = FilteredSpace::new(grid, weights, file.partitions).map_err(|e| match e {
            StopGameError::InvalidSpace(vs) => CliError::Validation(vs.iter().map(|v| v.to_string()).collect()),
            other => CliError::Validation(vec![other.to_string()]),
        })?;
        let players = file.payoffs.len();
        if players == 0 {
            return Err(CliError::Parse("payoffs: no players".into()));
        }
        let (times, n) = (space.num_times(), space.num_outcomes());
        let mut dims = vec![times; players];
        dims.push(n);
        let mut payoffs = Vec::with_capacity(players);
        for (i, tensor) in file.payoffs.iter().enumerate() {
            let mut data = Vec::new();
            flatten(tensor, &dims, &mut vec![i], &mut data)?;
            payoffs.push(PayoffField::new(players, times, n, data)?);
        }

        let mut problems = Vec::new();
        for (i, u) in payoffs.iter().enumerate() {
            if let Some(t) = u.check_adapted(&space).first() {
                problems.push(format!("adaptedness: payoff of player {i} at times {t:?} depends on unrevealed information"));
            }
        }
        let start = StoppingTime(file.start.unwrap_or_else(|| vec![0; n]));
        if start.values().len() != n || start.values().iter().any(|&k| k >= times) {
            problems.push(format!("start: expected {n} grid indices below {times}"));
        } else if !space.is_stopping_time(start.values()) {
            problems.push("start: not a stopping time".into());
        }
        if !file.epsilon.0.is_positive() {
            problems.push("epsilon: must be positive".into());
        }
        if let Some(h) = &file.h {
            if !h.0.is_positive() {
                problems.push("h: must be positive".into());
            }
        }
        if !problems.is_empty() {
            return Err(CliError::Validation(problems));
        }
        Ok(Game { space, payoffs, start, epsilon: file.epsilon.0, h: file.h.map(|r| r.0) })
    }

    pub fn to_file(&self) -> GameSpecFile {
        let times = self.space.num_times();
        let n = self.space.num_outcomes();
        let players = self.players();
        let payoffs = self
            .payoffs
            .iter()
            .map(|u| {
                let leaves: Vec<Value> = time_tuples(players, times)
                    .flat_map(|t| (0..n).map(move |w| (t.clone(), w)))
                    .map(|(t, w)| Value::String(u.get(&t, w).to_string()))
                    .collect();
                nest(leaves, &vec![times; players])
            })
            .collect();
        let start = self.start.values();
        GameSpecFile {
            grid: rats(self.space.grid().points()),
            weights: rats(self.space.weights()),
            partitions: self.space.partitions().to_vec(),
            payoffs,
            start: if start.iter().all(|&k| k == 0) { None } else { Some(start.to_vec()) },
            epsilon: Rat(self.epsilon.clone()),
            h: self.h.clone().map(Rat),
        }
    }
}

fn index_path(path: &[usize]) -> String {
    let (player, rest) = path.split_first().expect("player index");
    let mut out = format!("payoffs[{player}]");
    for k in rest {
        out.push_str(&format!("[{k}]"));
    }
    out
}

fn flatten(v: &Value, dims: &[usize], path: &mut Vec<usize>, out: &mut Vec<Real>) -> CliResult<()> {
    let Some((&len, rest)) = dims.split_first() else {
        let x = rational_from_value(v).map_err(|e| CliError::Parse(format!("{}: {e}", index_path(path))))?;
        out.push(x);
        return Ok(());
    };
    let arr = v
        .as_array()
        .ok_or_else(|| CliError::Parse(format!("{}: expected an array of {len} entries", index_path(path))))?;
    if arr.len() > len {
        return Err(CliError::Parse(format!("{}: {} entries, expected {len}", index_path(path), arr.len())));
    }
    for k in 0..len {
        path.push(k);
        match arr.get(k) {
            Some(child) => flatten(child, rest, path, out)?,
            None => return Err(CliError::Parse(format!("missing entry {}", index_path(path)))),
        }
        path.pop();
    }
    Ok(())
}

/// Rebuilds nested arrays from row-major leaves; the last axis is the outcome.
fn nest(leaves: Vec<Value>, outer: &[usize]) -> Value {
    let Some((&len, rest)) = outer.split_first() else {
        return Value::Array(leaves);
    };
    let chunk = leaves.len() / len;
    let mut it = leaves.into_iter();
    Value::Array((0..len).map(|_| nest(it.by_ref().take(chunk).collect(), rest)).collect())
}

pub fn parse_game(text: &str) -> CliResult<Game> {
    let file: GameSpecFile = serde_json::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
    Game::from_file(file)
}

/// One top-level field per line and one payoff tensor per line.
pub fn emit_game(game: &Game) -> String {
    let value = serde_json::to_value(game.to_file()).expect("serializable");
    let Value::Object(map) = value else { unreachable!("game files are objects") };
    let fields: Vec<String> = map
        .iter()
        .map(|(key, v)| match (key.as_str(), v) {
            ("payoffs", Value::Array(players)) => {
                let rows: Vec<String> = players.iter().map(|p| format!("    {p}")).collect();
                format!("  \"payoffs\": [\n{}\n  ]", rows.join(",\n"))
            }
            _ => format!("  {}: {v}", Value::String(key.clone())),
        })
        .collect();
    format!("{{\n{}\n}}\n", fields.join(",\n"))
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

pub fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.display().to_string(), source })
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|source| CliError::Io { path: path.display().to_string(), source })
}

pub fn read_game(path: &Path) -> CliResult<Game> {
    parse_game(&read_text(path)?)
}
