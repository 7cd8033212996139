//! JSON input schemas (towers, complete-intersection classes, fans,
//! degree values) and the shared output serialization for q-series and
//! rationals.
//!
//! Input conventions:
//! - tower: `{"stages":[{"fiber_dim":2},{"fiber_dim":3,"twists":[[-1],[-2],[-3]]}]}`
//!   (twist rows optional for stage 1, row `j` has one integer per
//!   earlier stage);
//! - classes: `{"classes":[[3,0],[-3,2]]}`;
//! - fan: `{"rank":2,"rays":[[1,0],[0,1],[-1,-1]],"max_cones":[[0,1],[1,2],[0,2]],
//!   "deg":["1/2","1/2","1/2"]}` with degree values as rational strings
//!   or `[re, im]` pairs.
//!
//! Output conventions: a q-series is `{"q_order": N, "coeffs": [...]}`
//! (`q_order` null when the series is an exact polynomial), with exact
//! coefficients as `{"num":"<decimal>","den":"<decimal>"}` and complex
//! ones as `[re, im]`.

use std::fs;
use std::path::Path;

use num_bigint::BigInt;
use num_traits::ToPrimitive;
use serde::Deserialize;
use serde_json::{json, Value};

use resitor::bott::{BottTower, Stage};
use resitor::qseries::QSeries;
use resitor::scalar::{Rat, C64};
use resitor::toric::{DegreeValue, Fan};

use crate::CliError;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TowerFile {
    stages: Vec<StageFile>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StageFile {
    fiber_dim: usize,
    #[serde(default)]
    twists: Option<Vec<Vec<i64>>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CiFile {
    classes: Vec<Vec<i64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FanFile {
    rank: usize,
    rays: Vec<Vec<i64>>,
    max_cones: Vec<Vec<usize>>,
    #[serde(default)]
    deg: Option<Vec<Value>>,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path, what: &str) -> Result<T, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("cannot read {what} file {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::input(format!("invalid {what} file {}: {e}", path.display())))
}

/// Load and validate a tower description.
pub fn load_tower(path: &Path) -> Result<BottTower, CliError> {
    let file: TowerFile = read_json(path, "tower")?;
    let mut stages = Vec::new();
    for (k, s) in file.stages.iter().enumerate() {
        if s.fiber_dim == 0 {
            return Err(CliError::input(format!("stage {}: fiber_dim must be at least 1", k + 1)));
        }
        let twists = match &s.twists {
            None => vec![vec![0i64; k]; s.fiber_dim],
            Some(rows) => {
                if rows.len() != s.fiber_dim {
                    return Err(CliError::input(format!(
                        "stage {}: expected {} twist rows (one per fiber dimension), got {}",
                        k + 1,
                        s.fiber_dim,
                        rows.len()
                    )));
                }
                for (j, row) in rows.iter().enumerate() {
                    if row.len() != k {
                        return Err(CliError::input(format!(
                            "stage {}, twist row {}: expected {} entries (one per earlier stage), got {}",
                            k + 1,
                            j + 1,
                            k,
                            row.len()
                        )));
                    }
                }
                rows.clone()
            }
        };
        stages.push(Stage { fiber_dim: s.fiber_dim, twists });
    }
    BottTower::new(stages).map_err(CliError::from)
}

/// Load complete-intersection classes and check them against a tower.
pub fn load_classes(path: &Path, tower: &BottTower) -> Result<Vec<Vec<i64>>, CliError> {
    let file: CiFile = read_json(path, "classes")?;
    for (i, class) in file.classes.iter().enumerate() {
        if class.len() != tower.nvars() {
            return Err(CliError::input(format!(
                "class {}: expected {} coefficients (one per tower stage), got {}",
                i + 1,
                tower.nvars(),
                class.len()
            )));
        }
    }
    Ok(file.classes)
}

/// Load a fan and its optional per-ray degree values.
pub fn load_fan(path: &Path) -> Result<(Fan, Option<Vec<DegreeValue>>), CliError> {
    let file: FanFile = read_json(path, "fan")?;
    let fan = Fan::new(file.rank, file.rays, file.max_cones).map_err(CliError::from)?;
    let deg = match file.deg {
        None => None,
        Some(values) => {
            let mut out = Vec::with_capacity(values.len());
            for (i, v) in values.iter().enumerate() {
                out.push(parse_degree_value(v).map_err(|e| {
                    CliError::input(format!("deg[{i}]: {}", e.message))
                })?);
            }
            Some(out)
        }
    };
    Ok((fan, deg))
}

/// Parse one degree value: a rational string like `"1/2"` or a complex
/// `[re, im]` pair.
pub fn parse_degree_value(v: &Value) -> Result<DegreeValue, CliError> {
    match v {
        Value::String(s) => Ok(DegreeValue::Rational(parse_rat(s)?)),
        Value::Array(parts) if parts.len() == 2 => {
            let re = parts[0]
                .as_f64()
                .ok_or_else(|| CliError::input("complex degree entries must be numbers"))?;
            let im = parts[1]
                .as_f64()
                .ok_or_else(|| CliError::input("complex degree entries must be numbers"))?;
            Ok(DegreeValue::Complex(C64::new(re, im)))
        }
        _ => Err(CliError::input(
            "degree values must be rational strings like \"1/2\" or [re, im] pairs",
        )),
    }
}

/// Parse a rational from `"p/q"` or a plain integer string.
pub fn parse_rat(s: &str) -> Result<Rat, CliError> {
    let s = s.trim();
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let num: BigInt = num
        .parse()
        .map_err(|_| CliError::input(format!("invalid rational {s:?}: bad numerator")))?;
    let den: BigInt = den
        .parse()
        .map_err(|_| CliError::input(format!("invalid rational {s:?}: bad denominator")))?;
    if den == BigInt::from(0) {
        return Err(CliError::input(format!("invalid rational {s:?}: zero denominator")));
    }
    Ok(Rat::new(num, den))
}

/// Parse a monomial like `"u1^2 u2"` (1-based variables, implicit
/// exponent 1) into an exponent vector of length `nvars`.
pub fn parse_monomial(s: &str, nvars: usize) -> Result<Vec<i32>, CliError> {
    let mut exps = vec![0i32; nvars];
    for token in s.split_whitespace() {
        let rest = token.strip_prefix('u').ok_or_else(|| {
            CliError::input(format!("monomial factor {token:?} must look like u<k> or u<k>^<e>"))
        })?;
        let (idx, exp) = match rest.split_once('^') {
            Some((i, e)) => (i, e),
            None => (rest, "1"),
        };
        let idx: usize = idx
            .parse()
            .map_err(|_| CliError::input(format!("monomial factor {token:?}: bad variable index")))?;
        let exp: i32 = exp
            .parse()
            .map_err(|_| CliError::input(format!("monomial factor {token:?}: bad exponent")))?;
        if idx == 0 || idx > nvars {
            return Err(CliError::input(format!(
                "monomial factor {token:?}: variable index out of range 1..={nvars}"
            )));
        }
        if exp < 0 {
            return Err(CliError::input(format!(
                "monomial factor {token:?}: exponents must be nonnegative"
            )));
        }
        exps[idx - 1] += exp;
    }
    Ok(exps)
}

/// Format a rational for human-readable output.
pub fn format_rat(r: &Rat) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Format a complex number for human-readable output.
pub fn format_c64(c: &C64) -> String {
    if c.im == 0.0 {
        format!("{}", c.re)
    } else if c.im < 0.0 {
        format!("{}{}i", c.re, c.im)
    } else {
        format!("{}+{}i", c.re, c.im)
    }
}

/// JSON form of a rational: `{"num":"...","den":"..."}` as decimal strings.
pub fn rat_json(r: &Rat) -> Value {
    json!({ "num": r.numer().to_string(), "den": r.denom().to_string() })
}

/// JSON form of an exact q-series.
pub fn qseries_rat_json(s: &QSeries<Rat>) -> Value {
    let order = s.trunc_order();
    let upto = order.unwrap_or_else(|| s.coeffs().len().saturating_sub(1) as u32);
    let coeffs: Vec<Value> = (0..=upto).map(|k| rat_json(&s.coeff(k))).collect();
    json!({ "q_order": order, "coeffs": coeffs })
}

/// JSON form of a floating-point q-series (coefficients as `[re, im]`).
pub fn qseries_c64_json(s: &QSeries<C64>) -> Value {
    let order = s.trunc_order();
    let upto = order.unwrap_or_else(|| s.coeffs().len().saturating_sub(1) as u32);
    let coeffs: Vec<Value> = (0..=upto)
        .map(|k| {
            let c = s.coeff(k);
            json!([c.re, c.im])
        })
        .collect();
    json!({ "q_order": order, "coeffs": coeffs })
}

/// Human-readable lines for an exact q-series: one `q^k: value` per
/// coefficient through the certified order.
pub fn series_rat_lines(s: &QSeries<Rat>) -> Vec<String> {
    let upto = s.trunc_order().unwrap_or_else(|| s.coeffs().len().saturating_sub(1) as u32);
    let mut lines: Vec<String> =
        (0..=upto).map(|k| format!("q^{k}: {}", format_rat(&s.coeff(k)))).collect();
    match s.trunc_order() {
        Some(n) => lines.push(format!("(certified through q^{n})")),
        None => lines.push("(exact polynomial)".to_string()),
    }
    lines
}

/// Human-readable lines for a floating-point q-series.
pub fn series_c64_lines(s: &QSeries<C64>) -> Vec<String> {
    let upto = s.trunc_order().unwrap_or_else(|| s.coeffs().len().saturating_sub(1) as u32);
    let mut lines: Vec<String> =
        (0..=upto).map(|k| format!("q^{k}: {}", format_c64(&s.coeff(k)))).collect();
    match s.trunc_order() {
        Some(n) => lines.push(format!("(certified through q^{n})")),
        None => lines.push("(exact polynomial)".to_string()),
    }
    lines
}

/// Absolute value of a rational (for max-deviation reporting).
pub fn rat_abs(r: &Rat) -> Rat {
    if r < &Rat::new(BigInt::from(0), BigInt::from(1)) {
        -r.clone()
    } else {
        r.clone()
    }
}

/// Modulus of a complex coefficient.
pub fn c64_abs(c: &C64) -> f64 {
    (c.re * c.re + c.im * c.im).sqrt()
}

/// Convert a rational to `f64`, erroring on overflow.
pub fn rat_to_f64(r: &Rat) -> Result<f64, CliError> {
    r.to_f64().ok_or_else(|| CliError::input("rational value overflows f64"))
}
