//! Command-line driver: parse tower/fan/class configurations from JSON,
//! run pairings, genus computations, toric forms, and verification
//! suites, and emit results as text and machine-readable JSON.
//!
//! Exit codes: 0 success, 2 verification failed, 3 summation not
//! stabilized or window budget exhausted, 4 invalid input.

mod json;
mod verify;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use resitor::bott::{
    genus_ci, pairing_normal_form, pairing_residue, solve_string_pairs, solve_string_single,
    string_check,
};
use resitor::driver::BudgetConfig;
use resitor::ilseries::ILSeries;
use resitor::qseries::QSeries;
use resitor::scalar::{Coeff, Rat};
use resitor::theta::{ahat_f_jet, elliptic_half_f_jet, l_f_jet, todd_f_jet, witten_f_jet};
use resitor::toric::{
    fan_for_tower, toric_form_lattice_exact, toric_form_lattice_numeric, toric_form_theta_exact,
    toric_form_theta_numeric, DegreeValue, Fan, LatticeMethod,
};
use resitor::Result as CoreResult;

use crate::json::{
    format_rat, load_classes, load_fan, load_tower, parse_monomial, parse_rat, qseries_c64_json,
    qseries_rat_json, rat_json, series_c64_lines, series_rat_lines,
};

/// An error carrying the process exit code it maps to.
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        CliError { code: 4, message: message.into() }
    }
}

impl From<resitor::Error> for CliError {
    fn from(e: resitor::Error) -> Self {
        let code = match &e {
            resitor::Error::NotStabilized { .. } | resitor::Error::BudgetExceeded { .. } => 3,
            _ => 4,
        };
        CliError { code, message: e.to_string() }
    }
}

#[derive(Parser)]
#[command(
    name = "resitor",
    version,
    about = "Exact iterated-residue engine: pairings, genera, and toric q-series for projective-bundle towers"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Pair a monomial against the fundamental class of a tower, by both
    /// the residue and the normal-form route (they must agree).
    Pair {
        /// Tower description (JSON).
        #[arg(long)]
        tower: PathBuf,
        /// Monomial like "u1^2 u2" (1-based variables).
        #[arg(long)]
        monomial: String,
        /// Write a JSON result here as well.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Evaluate a multiplicative genus of a tower or of a complete
    /// intersection inside it.
    Genus {
        #[arg(long)]
        tower: PathBuf,
        /// Complete-intersection classes (JSON); omit for the tower itself.
        #[arg(long)]
        ci: Option<PathBuf>,
        /// Which characteristic series to use.
        #[arg(long, value_enum)]
        series: SeriesKind,
        /// q-order for the q-dependent series (ignored by the constant ones).
        #[arg(long, default_value_t = 0)]
        q_order: u32,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Compute the q-series attached to a fan and per-ray degree values.
    ToricForm {
        /// Fan description (JSON, may carry "deg" values).
        #[arg(long, conflicts_with = "tower")]
        fan: Option<PathBuf>,
        /// Build the fan of this tower instead (enables the theta route).
        #[arg(long)]
        tower: Option<PathBuf>,
        /// Comma-separated per-ray degree values (rationals); default 1/2 everywhere.
        #[arg(long)]
        deg: Option<String>,
        #[arg(long, value_enum)]
        method: MethodKind,
        #[arg(long)]
        q_order: u32,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Check the string conditions (even first Chern class, vanishing
    /// first-Pontryagin pushforward) for a complete intersection.
    StringCheck {
        #[arg(long)]
        tower: PathBuf,
        #[arg(long)]
        ci: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Search for complete-intersection classes satisfying the string
    /// conditions in a two-stage twisted tower.
    SolveString {
        /// Base fiber dimension.
        #[arg(long)]
        n1: usize,
        /// Second-stage fiber dimension.
        #[arg(long)]
        n2: usize,
        /// Comma-separated twisting degrees, e.g. "1,2,3".
        #[arg(long)]
        fiber_degrees: String,
        /// Search box half-width for class coefficients.
        #[arg(long)]
        bound: i64,
        /// Number of classes to cut out (1 or 2).
        #[arg(long, default_value_t = 2)]
        classes: u32,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run a named verification: both sides printed, PASS/FAIL verdict,
    /// max coefficient deviation.
    Verify {
        #[command(subcommand)]
        check: VerifyCmd,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SeriesKind {
    Todd,
    Ahat,
    L,
    EllipticHalf,
    Witten,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodKind {
    Lattice,
    Theta,
}

#[derive(Subcommand)]
enum VerifyCmd {
    /// Twisted double sum vs. the divisor-power series.
    DoubleSum {
        #[arg(long, default_value_t = 24)]
        q_order: u32,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Hirzebruch lattice forms vs. closed-form theta predictions.
    HirzebruchForms {
        #[arg(long, default_value_t = 8)]
        q_order: u32,
        /// Comma-separated twist parameters.
        #[arg(long, default_value = "0,1,2,3")]
        k_values: String,
        /// Four comma-separated rational degree values in ray order.
        #[arg(long, default_value = "1/3,1/5,1/7,2/7")]
        alphas: String,
        #[arg(long, default_value_t = 1e-8)]
        tolerance: f64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Rank-4 bundle lattice forms vs. closed-form theta predictions.
    BundleForms {
        #[arg(long, default_value_t = 6)]
        q_order: u32,
        /// Semicolon-separated twist pairs, e.g. "0,0;1,0;1,1;2,1".
        #[arg(long, default_value = "0,0;1,0;1,1;2,1")]
        jk: String,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Vanishing of the (1,3,4)-bundle-over-the-line toric form.
    ToricVanishing {
        #[arg(long, default_value_t = 6)]
        q_order: u32,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// String certificate and Witten-type genus vanishing for the
    /// bidegree-(3,0),(-3,2) intersection in the (1,2,3)-twisted tower.
    WittenVanishing {
        #[arg(long, default_value_t = 10)]
        q_order: u32,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Residue order-dependence witness (1 vs 0).
    OrderDependence {
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Constant-series genus equals 1 on random towers.
    ToddOne {
        #[arg(long, default_value_t = 20)]
        count: u32,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn budget_from_env() -> Result<BudgetConfig, CliError> {
    match std::env::var("RESITOR_MAX_BUDGET") {
        Ok(raw) => {
            let max_slack: i64 = raw.trim().parse().map_err(|_| {
                CliError::input(format!("RESITOR_MAX_BUDGET must be a positive integer, got {raw:?}"))
            })?;
            if max_slack < 1 {
                return Err(CliError::input("RESITOR_MAX_BUDGET must be at least 1"));
            }
            Ok(BudgetConfig { max_slack })
        }
        Err(_) => Ok(BudgetConfig::default()),
    }
}

fn write_output(path: &Option<PathBuf>, value: &Value) -> Result<(), CliError> {
    if let Some(path) = path {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::input(format!("cannot serialize output: {e}")))?;
        text.push('\n');
        fs::write(path, text).map_err(|e| {
            CliError::input(format!("cannot write output file {}: {e}", path.display()))
        })?;
    }
    Ok(())
}

fn parse_i64_list(s: &str, what: &str) -> Result<Vec<i64>, CliError> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<i64>()
                .map_err(|_| CliError::input(format!("invalid {what} entry {t:?}")))
        })
        .collect()
}

fn parse_jk_list(s: &str) -> Result<Vec<(i64, i64)>, CliError> {
    s.split(';')
        .map(|pair| {
            let parts = parse_i64_list(pair, "twist pair")?;
            if parts.len() != 2 {
                return Err(CliError::input(format!(
                    "twist pair {pair:?} must have exactly two entries"
                )));
            }
            Ok((parts[0], parts[1]))
        })
        .collect()
}

fn run_pair(tower: &PathBuf, monomial: &str, output: &Option<PathBuf>) -> Result<bool, CliError> {
    let tower = load_tower(tower)?;
    let exps = parse_monomial(monomial, tower.nvars())?;
    let p: ILSeries<Rat> = ILSeries::monomial(tower.nvars(), &exps, Rat::one());
    let cfg = budget_from_env()?;
    let via_residue = pairing_residue(&tower, &p, &cfg).map_err(CliError::from)?;
    let via_normal_form = pairing_normal_form(&tower, &p);
    let agree = via_residue == via_normal_form;
    println!("pairing (residue route):     {}", format_rat(&via_residue));
    println!("pairing (normal-form route): {}", format_rat(&via_normal_form));
    if !agree {
        println!("routes disagree — internal inconsistency");
    }
    write_output(
        output,
        &json!({
            "pairing": rat_json(&via_residue),
            "routes_agree": agree,
        }),
    )?;
    Ok(agree)
}

fn run_genus(
    tower_path: &PathBuf,
    ci: &Option<PathBuf>,
    series: SeriesKind,
    q_order: u32,
    output: &Option<PathBuf>,
) -> Result<(), CliError> {
    let tower = load_tower(tower_path)?;
    let classes = match ci {
        Some(path) => load_classes(path, &tower)?,
        None => Vec::new(),
    };
    let cfg = budget_from_env()?;

    match series {
        SeriesKind::Todd | SeriesKind::Ahat | SeriesKind::L => {
            let family = move |ord: u32| -> CoreResult<Vec<Rat>> {
                match series {
                    SeriesKind::Todd => Ok(todd_f_jet(ord as usize)),
                    SeriesKind::Ahat => Ok(ahat_f_jet(ord as usize)),
                    SeriesKind::L => l_f_jet(ord as usize),
                    _ => unreachable!(),
                }
            };
            let value = genus_ci(&tower, &family, &classes, &cfg).map_err(CliError::from)?;
            println!("{}", format_rat(&value));
            write_output(output, &json!({ "value": rat_json(&value) }))?;
        }
        SeriesKind::EllipticHalf | SeriesKind::Witten => {
            let family = move |ord: u32| -> CoreResult<Vec<QSeries<Rat>>> {
                match series {
                    SeriesKind::EllipticHalf => elliptic_half_f_jet(ord as usize, q_order),
                    SeriesKind::Witten => witten_f_jet(ord as usize, q_order),
                    _ => unreachable!(),
                }
            };
            let value = genus_ci(&tower, &family, &classes, &cfg).map_err(CliError::from)?;
            for line in series_rat_lines(&value) {
                println!("{line}");
            }
            write_output(output, &json!({ "series": qseries_rat_json(&value) }))?;
        }
    }
    Ok(())
}

fn run_toric_form(
    fan_path: &Option<PathBuf>,
    tower_path: &Option<PathBuf>,
    deg_flag: &Option<String>,
    method: MethodKind,
    q_order: u32,
    output: &Option<PathBuf>,
) -> Result<(), CliError> {
    let (fan, deg_from_file): (Fan, Option<Vec<DegreeValue>>) = match (fan_path, tower_path) {
        (Some(path), None) => load_fan(path)?,
        (None, Some(path)) => {
            let tower = load_tower(path)?;
            (fan_for_tower(&tower).map_err(CliError::from)?, None)
        }
        _ => {
            return Err(CliError::input("pass exactly one of --fan or --tower"));
        }
    };

    let deg: Vec<DegreeValue> = match (deg_flag, deg_from_file) {
        (Some(s), _) => s
            .split(',')
            .map(|t| parse_rat(t).map(DegreeValue::Rational))
            .collect::<Result<_, _>>()?,
        (None, Some(d)) => d,
        (None, None) => {
            vec![DegreeValue::Rational(Rat::from_ratio(1, 2)); fan.rays().len()]
        }
    };
    if deg.len() != fan.rays().len() {
        return Err(CliError::input(format!(
            "need {} degree values (one per ray), got {}",
            fan.rays().len(),
            deg.len()
        )));
    }
    let exact = deg.iter().all(DegreeValue::is_half_period);
    let cfg = budget_from_env()?;

    if exact {
        let series = match method {
            MethodKind::Lattice => {
                toric_form_lattice_exact(&fan, q_order, LatticeMethod::Auto)
                    .map_err(CliError::from)?
            }
            MethodKind::Theta => {
                toric_form_theta_exact(&fan, q_order, &cfg).map_err(CliError::from)?
            }
        };
        for line in series_rat_lines(&series) {
            println!("{line}");
        }
        write_output(output, &json!({ "series": qseries_rat_json(&series) }))?;
    } else {
        let series = match method {
            MethodKind::Lattice => {
                toric_form_lattice_numeric(&fan, &deg, q_order, LatticeMethod::Auto)
                    .map_err(CliError::from)?
            }
            MethodKind::Theta => {
                toric_form_theta_numeric(&fan, &deg, q_order, &cfg).map_err(CliError::from)?
            }
        };
        for line in series_c64_lines(&series) {
            println!("{line}");
        }
        write_output(output, &json!({ "series": qseries_c64_json(&series) }))?;
    }
    Ok(())
}

fn run_string_check(
    tower_path: &PathBuf,
    ci: &PathBuf,
    output: &Option<PathBuf>,
) -> Result<bool, CliError> {
    let tower = load_tower(tower_path)?;
    let classes = load_classes(ci, &tower)?;
    let check = string_check(&tower, &classes);
    println!("first Chern class even: {}", check.c1_even);
    println!(
        "first Pontryagin pushforward vanishes: {}",
        check.p1_pushforward_vanishes
    );
    println!(
        "string conditions: {}",
        if check.certified() { "CERTIFIED" } else { "NOT CERTIFIED" }
    );
    write_output(
        output,
        &json!({
            "c1_even": check.c1_even,
            "p1_pushforward_vanishes": check.p1_pushforward_vanishes,
            "certified": check.certified(),
        }),
    )?;
    Ok(check.certified())
}

fn run_solve_string(
    n1: usize,
    n2: usize,
    fiber_degrees: &str,
    bound: i64,
    classes: u32,
    output: &Option<PathBuf>,
) -> Result<(), CliError> {
    let degrees = parse_i64_list(fiber_degrees, "fiber degree")?;
    if degrees.len() != n2 {
        return Err(CliError::input(format!(
            "expected {n2} fiber degrees (one per second-stage dimension), got {}",
            degrees.len()
        )));
    }
    let solutions_json: Value;
    match classes {
        1 => {
            let sols = solve_string_single(n1, n2, &degrees, bound).map_err(CliError::from)?;
            for s in &sols {
                println!("class ({}, {})", s[0], s[1]);
            }
            println!("{} solution(s) with coefficients bounded by {bound}", sols.len());
            solutions_json = json!(sols);
        }
        2 => {
            let sols = solve_string_pairs(n1, n2, &degrees, bound);
            for s in &sols {
                println!(
                    "classes ({}, {}) and ({}, {})",
                    s[0][0], s[0][1], s[1][0], s[1][1]
                );
            }
            println!("{} solution(s) with coefficients bounded by {bound}", sols.len());
            solutions_json = json!(sols);
        }
        _ => return Err(CliError::input("--classes must be 1 or 2")),
    }
    write_output(output, &json!({ "solutions": solutions_json }))?;
    Ok(())
}

fn run_verify(check: &VerifyCmd) -> Result<bool, CliError> {
    let cfg = budget_from_env()?;
    let (report, output) = match check {
        VerifyCmd::DoubleSum { q_order, output } => (verify::verify_double_sum(*q_order)?, output),
        VerifyCmd::HirzebruchForms { q_order, k_values, alphas, tolerance, output } => {
            let ks = parse_i64_list(k_values, "twist parameter")?;
            let alpha_list: Vec<Rat> =
                alphas.split(',').map(parse_rat).collect::<Result<_, _>>()?;
            let alpha_arr: [Rat; 4] = alpha_list.try_into().map_err(|_| {
                CliError::input("--alphas needs exactly four rational values")
            })?;
            (verify::verify_hirzebruch_forms(*q_order, &ks, &alpha_arr, *tolerance)?, output)
        }
        VerifyCmd::BundleForms { q_order, jk, output } => {
            let jks = parse_jk_list(jk)?;
            (verify::verify_bundle_forms(*q_order, &jks)?, output)
        }
        VerifyCmd::ToricVanishing { q_order, output } => (verify::verify_toric_vanishing(*q_order)?, output),
        VerifyCmd::WittenVanishing { q_order, output } => {
            (verify::verify_witten_vanishing(*q_order, &cfg)?, output)
        }
        VerifyCmd::OrderDependence { output } => {
            (verify::verify_order_dependence(&cfg)?, output)
        }
        VerifyCmd::ToddOne { count, seed, output } => {
            (verify::verify_todd_one(*count, *seed, &cfg)?, output)
        }
    };
    for line in &report.lines {
        println!("{line}");
    }
    write_output(output, &report.json)?;
    Ok(report.pass)
}

fn run(cli: &Cli) -> Result<bool, CliError> {
    match &cli.cmd {
        Cmd::Pair { tower, monomial, output } => run_pair(tower, monomial, output),
        Cmd::Genus { tower, ci, series, q_order, output } => {
            run_genus(tower, ci, *series, *q_order, output).map(|()| true)
        }
        Cmd::ToricForm { fan, tower, deg, method, q_order, output } => {
            run_toric_form(fan, tower, deg, *method, *q_order, output).map(|()| true)
        }
        Cmd::StringCheck { tower, ci, output } => run_string_check(tower, ci, output),
        Cmd::SolveString { n1, n2, fiber_degrees, bound, classes, output } => {
            run_solve_string(*n1, *n2, fiber_degrees, *bound, *classes, output).map(|()| true)
        }
        Cmd::Verify { check } => run_verify(check),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 4,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(u8::try_from(e.code).unwrap_or(4))
        }
    }
}
