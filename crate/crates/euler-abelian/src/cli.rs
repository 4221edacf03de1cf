//! Command line front end.
//!
//! Every subcommand reads flags (optionally merged with a JSON `--config`
//! file), runs the corresponding library routine, and prints a single JSON
//! document (or CSV where supported) to stdout. Outputs are byte-identical
//! for identical argv and seed. Exit codes: 0 success, 1 parse error,
//! 2 validation failure, 3 resource guard tripped.

use std::ffi::OsString;
use std::io::Read;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::abelianize::{
    conjecture_probe, exact_moment, hull_brute_force, hull_contains_zero, spectrum, tilde,
    AbelianError, AdmissibleFunction, Spectrum,
};
use crate::euler::{
    angle_counts, coordinate_specs, forward, inverse, membership_defect, random_interior,
    shift_identity_residual, CoordKind, EulerAngles, EulerError, Group, ShiftKind,
};
use crate::exact::{rational_string, CyclotomicNumber, ExactError, ExactScalar, Rational};
use crate::finite_type::{
    expand, symbolic_entries, EntryPolynomial, FiniteTypeError, FiniteTypeFunction,
};
use crate::generators::{
    ad_relation_residual, det, exp_generator, lambda, matrix_from_json, matrix_to_json,
    trace_pairing, unitarity_defect, GeneratorError,
};
use crate::haar::{
    density, density_from_jacobian, level_mass_exact, mc_integrate, normalization,
    quad_integrate, sample, HaarError,
};

/// A terminal failure: message for stderr plus process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn parse(msg: impl Into<String>) -> Self {
        Failure {
            code: 1,
            message: msg.into(),
        }
    }

    fn validation(msg: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: msg.into(),
        }
    }
}

impl From<ExactError> for Failure {
    fn from(e: ExactError) -> Self {
        let code = match e {
            ExactError::DegreeGuard(_) | ExactError::PrecisionOverflow { .. } => 3,
            ExactError::NonInvertible => 2,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<EulerError> for Failure {
    fn from(e: EulerError) -> Self {
        Failure {
            code: 2,
            message: e.to_string(),
        }
    }
}

impl From<GeneratorError> for Failure {
    fn from(e: GeneratorError) -> Self {
        Failure {
            code: 2,
            message: e.to_string(),
        }
    }
}

impl From<HaarError> for Failure {
    fn from(e: HaarError) -> Self {
        let code = match e {
            HaarError::RankTooLarge { .. } | HaarError::DimensionTooLarge { .. } => 3,
            _ => 2,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<FiniteTypeError> for Failure {
    fn from(e: FiniteTypeError) -> Self {
        match e {
            FiniteTypeError::TermGuard(_) => Failure {
                code: 3,
                message: e.to_string(),
            },
            FiniteTypeError::Exact(inner) => inner.into(),
            _ => Failure {
                code: 2,
                message: e.to_string(),
            },
        }
    }
}

impl From<AbelianError> for Failure {
    fn from(e: AbelianError) -> Self {
        match e {
            AbelianError::TermGuard(_) => Failure {
                code: 3,
                message: e.to_string(),
            },
            AbelianError::Parse(_) => Failure {
                code: 1,
                message: e.to_string(),
            },
            AbelianError::Exact(inner) => inner.into(),
            AbelianError::FiniteType(inner) => inner.into(),
            AbelianError::Haar(inner) => inner.into(),
            _ => Failure {
                code: 2,
                message: e.to_string(),
            },
        }
    }
}

#[derive(Parser)]
#[command(
    name = "euler-abelian",
    version,
    about = "Euler coordinates, Haar moments, and abelianized probes for SU(N) and SO(N)",
    disable_help_subcommand = true
)]
struct Cli {
    /// JSON config file; keys mirror the long flags, explicit flags win.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<String>,

    /// Decimal digits for float shadows of exact values.
    #[arg(long, global = true, value_name = "D")]
    digits: Option<u32>,

    /// Output format (json everywhere; csv for sample and spectrum).
    #[arg(long, global = true, value_name = "FMT")]
    format: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct GroupArgs {
    /// Group family: su or so.
    #[arg(long)]
    group: Option<String>,

    /// Rank N.
    #[arg(long)]
    n: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the parametrization at explicit angles.
    Param {
        #[command(flatten)]
        grp: GroupArgs,
        /// Comma separated flat angle list: all phi, then psi, then omega.
        #[arg(long, value_name = "LIST")]
        angles: String,
    },
    /// Recover angles from a group element.
    Invert {
        #[command(flatten)]
        grp: GroupArgs,
        /// Matrix JSON: file path, inline JSON, or "-" for stdin.
        /// Accepts param output directly.
        #[arg(long, value_name = "SRC")]
        input: String,
    },
    /// Draw Haar distributed angle sets.
    Sample {
        #[command(flatten)]
        grp: GroupArgs,
        /// Number of draws.
        #[arg(long)]
        samples: Option<u64>,
        /// RNG seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Integrate an entry polynomial over the group.
    Integrate {
        #[command(flatten)]
        grp: GroupArgs,
        /// Entry polynomial, e.g. "u11*cu11" or "2 u12^2 - 1/3 u21".
        #[arg(long, value_name = "POLY")]
        entry_poly: String,
        /// Integration method: mc or quad.
        #[arg(long)]
        method: Option<String>,
        /// Monte Carlo sample count.
        #[arg(long)]
        samples: Option<u64>,
        /// RNG seed for the mc method.
        #[arg(long)]
        seed: Option<u64>,
        /// Quadrature orders, one value or comma list per coordinate.
        #[arg(long, value_name = "LIST")]
        orders: Option<String>,
    },
    /// Rewrite an entry polynomial as an admissible torus function.
    Tilde {
        #[command(flatten)]
        grp: GroupArgs,
        /// Entry polynomial to expand before substitution.
        #[arg(long, value_name = "POLY")]
        entry_poly: Option<String>,
        /// Finite type function JSON (file, inline, or "-").
        #[arg(long, value_name = "SRC")]
        input: Option<String>,
    },
    /// Exponent spectrum of an admissible function.
    Spectrum {
        #[command(flatten)]
        grp: GroupArgs,
        /// Entry polynomial to expand and substitute first.
        #[arg(long, value_name = "POLY")]
        entry_poly: Option<String>,
        /// Admissible function JSON (file, inline, or "-").
        #[arg(long, value_name = "SRC")]
        input: Option<String>,
    },
    /// Convex hull membership of the origin with exact certificate.
    Hull {
        /// Spectrum JSON (file, inline, or "-").
        #[arg(long, value_name = "SRC")]
        input: String,
    },
    /// Run the abelian moment probe on an entry polynomial.
    Probe {
        #[command(flatten)]
        grp: GroupArgs,
        /// Entry polynomial to probe.
        #[arg(long, value_name = "POLY")]
        entry_poly: String,
        /// Largest power to test.
        #[arg(long)]
        pmax: Option<u32>,
    },
    /// Exact normalization constants with published comparison.
    Constants {
        #[command(flatten)]
        grp: GroupArgs,
    },
    /// Re-run module invariant checks.
    Verify {
        /// Rank bound for the randomized checks.
        #[arg(long)]
        n: Option<usize>,
        /// Which suite: all, exact, generators, euler, haar, finite-type, abelianize.
        #[arg(long)]
        suite: Option<String>,
        /// RNG seed for the randomized checks.
        #[arg(long)]
        seed: Option<u64>,
    },
}

/// Config file keys mirror the long flags.
#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    group: Option<String>,
    n: Option<usize>,
    seed: Option<u64>,
    samples: Option<u64>,
    pmax: Option<u32>,
    digits: Option<u32>,
    method: Option<String>,
    orders: Option<String>,
    format: Option<String>,
    suite: Option<String>,
}

fn load_config(path: Option<&str>) -> Result<ConfigFile, Failure> {
    let Some(path) = path else {
        return Ok(ConfigFile::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::parse(format!("cannot read config {path}: {e}")))?;
    serde_json::from_str(&text).map_err(|e| Failure::parse(format!("bad config {path}: {e}")))
}

/// Resolved global options after merging flags over config.
struct Globals {
    cfg: ConfigFile,
    digits: u32,
    format: OutputFormat,
}

#[derive(PartialEq, Clone, Copy)]
enum OutputFormat {
    Json,
    Csv,
}

fn resolve_globals(cli: &Cli) -> Result<Globals, Failure> {
    let cfg = load_config(cli.config.as_deref())?;
    let digits = cli.digits.or(cfg.digits).unwrap_or(12);
    if digits == 0 || digits > 15 {
        return Err(Failure::validation(format!(
            "digits must be between 1 and 15, got {digits}"
        )));
    }
    let format = match cli.format.as_deref().or(cfg.format.as_deref()) {
        None | Some("json") => OutputFormat::Json,
        Some("csv") => OutputFormat::Csv,
        Some(other) => {
            return Err(Failure::validation(format!(
                "unknown format {other:?}, expected json or csv"
            )))
        }
    };
    Ok(Globals {
        cfg,
        digits,
        format,
    })
}

fn resolve_group(grp: &GroupArgs, cfg: &ConfigFile) -> Result<(Group, usize), Failure> {
    let name = grp
        .group
        .as_deref()
        .or(cfg.group.as_deref())
        .ok_or_else(|| Failure::parse("missing --group"))?;
    let group = match name.to_ascii_lowercase().as_str() {
        "su" => Group::Su,
        "so" => Group::So,
        other => return Err(Failure::parse(format!("unknown group {other:?}"))),
    };
    let n = grp
        .n
        .or(cfg.n)
        .ok_or_else(|| Failure::parse("missing --n"))?;
    if n < 2 {
        return Err(Failure::validation(format!(
            "rank must be at least 2, got {n}"
        )));
    }
    Ok((group, n))
}

fn read_source(src: &str) -> Result<String, Failure> {
    if src == "-" {
        let mut buf = String::new();
        std::io::stdin()
            .read_to_string(&mut buf)
            .map_err(|e| Failure::parse(format!("cannot read stdin: {e}")))?;
        return Ok(buf);
    }
    let trimmed = src.trim_start();
    if trimmed.starts_with('{') || trimmed.starts_with('[') {
        return Ok(src.to_string());
    }
    std::fs::read_to_string(src).map_err(|e| Failure::parse(format!("cannot read {src}: {e}")))
}

fn parse_json_source(src: &str) -> Result<Value, Failure> {
    let text = read_source(src)?;
    serde_json::from_str(&text).map_err(|e| Failure::parse(format!("bad JSON input: {e}")))
}

fn parse_floats(list: &str) -> Result<Vec<f64>, Failure> {
    list.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Failure::parse(format!("bad float {:?}", s.trim())))
        })
        .collect()
}

fn parse_orders(list: &str) -> Result<Vec<usize>, Failure> {
    list.split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| Failure::parse(format!("bad order {:?}", s.trim())))
        })
        .collect()
}

fn parse_entry_poly(src: &str) -> Result<EntryPolynomial, Failure> {
    EntryPolynomial::parse(src)
        .ok_or_else(|| Failure::parse(format!("cannot parse entry polynomial {src:?}")))
}

/// Exact value rendered with text form, structured form, and float shadow.
fn scalar_json(x: &ExactScalar, digits: u32) -> Result<Value, Failure> {
    let (re, im) = x.to_complex(digits)?;
    Ok(json!({
        "text": x.display_string(),
        "exact": x.to_json(),
        "float": [re, im],
    }))
}

fn complex_json(z: Complex64) -> Value {
    json!([z.re, z.im])
}

fn group_label(group: Group) -> &'static str {
    match group {
        Group::Su => "su",
        Group::So => "so",
    }
}

fn coordinate_names(group: Group, n: usize) -> Vec<String> {
    coordinate_specs(group, n)
        .iter()
        .map(|s| {
            let base = match s.kind {
                CoordKind::Phi => "phi",
                CoordKind::Psi => "psi",
                CoordKind::Omega => "omega",
            };
            format!("{base}{}", s.index)
        })
        .collect()
}

fn angles_from_flat(group: Group, n: usize, flat: &[f64]) -> Result<EulerAngles, Failure> {
    let (np, ns, no) = angle_counts(group, n);
    if flat.len() != np + ns + no {
        return Err(Failure::validation(format!(
            "expected {} angles for {}({n}), got {}",
            np + ns + no,
            group_label(group),
            flat.len()
        )));
    }
    let phi = flat[..np].to_vec();
    let psi = flat[np..np + ns].to_vec();
    let omega = flat[np + ns..].to_vec();
    Ok(EulerAngles::new(group, n, phi, psi, omega)?)
}

fn require_json(format: OutputFormat, what: &str) -> Result<(), Failure> {
    if format == OutputFormat::Csv {
        return Err(Failure::validation(format!(
            "{what} does not support csv output"
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------- commands

fn cmd_param(g: &Globals, grp: &GroupArgs, angles: &str) -> Result<String, Failure> {
    require_json(g.format, "param")?;
    let (group, n) = resolve_group(grp, &g.cfg)?;
    let flat = parse_floats(angles)?;
    let a = angles_from_flat(group, n, &flat)?;
    let m = forward(&a);
    let out = json!({
        "group": group_label(group),
        "n": n,
        "matrix": matrix_to_json(&m),
        "unitarity_defect": unitarity_defect(&m),
        "membership_defect": membership_defect(group, &m),
        "det": complex_json(det(&m)),
        "warnings": a.range_warnings(),
    });
    Ok(pretty(&out))
}

fn cmd_invert(g: &Globals, grp: &GroupArgs, input: &str) -> Result<String, Failure> {
    require_json(g.format, "invert")?;
    let (group, n) = resolve_group(grp, &g.cfg)?;
    let v = parse_json_source(input)?;
    let mv = v.get("matrix").unwrap_or(&v);
    let m = matrix_from_json(mv).ok_or_else(|| Failure::parse("bad matrix JSON"))?;
    let a = inverse(group, n, &m)?;
    let back = forward(&a);
    let mut err: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            err = err.max((back[(i, j)] - m[(i, j)]).norm());
        }
    }
    let out = json!({
        "group": group_label(group),
        "n": n,
        "angles": a.to_json(),
        "roundtrip_error": err,
    });
    Ok(pretty(&out))
}

fn cmd_sample(
    g: &Globals,
    grp: &GroupArgs,
    samples: Option<u64>,
    seed: Option<u64>,
) -> Result<String, Failure> {
    let (group, n) = resolve_group(grp, &g.cfg)?;
    let count = samples.or(g.cfg.samples).unwrap_or(1);
    let seed = seed.or(g.cfg.seed).unwrap_or(0);
    if count == 0 {
        return Err(Failure::validation("need at least one sample"));
    }
    if count > 1_000_000 {
        return Err(Failure {
            code: 3,
            message: format!("sample count {count} above the 1000000 guard"),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: Vec<EulerAngles> = (0..count).map(|_| sample(group, n, &mut rng)).collect();
    match g.format {
        OutputFormat::Json => {
            let out = json!({
                "group": group_label(group),
                "n": n,
                "seed": seed,
                "samples": draws.iter().map(|a| a.to_json()).collect::<Vec<_>>(),
            });
            Ok(pretty(&out))
        }
        OutputFormat::Csv => {
            let mut lines = vec![coordinate_names(group, n).join(",")];
            for a in &draws {
                let row: Vec<String> = a
                    .phi
                    .iter()
                    .chain(a.psi.iter())
                    .chain(a.omega.iter())
                    .map(|x| format!("{x}"))
                    .collect();
                lines.push(row.join(","));
            }
            Ok(lines.join("\n"))
        }
    }
}

fn cmd_integrate(
    g: &Globals,
    grp: &GroupArgs,
    entry_poly: &str,
    method: Option<&str>,
    samples: Option<u64>,
    seed: Option<u64>,
    orders: Option<&str>,
) -> Result<String, Failure> {
    require_json(g.format, "integrate")?;
    let (group, n) = resolve_group(grp, &g.cfg)?;
    let poly = parse_entry_poly(entry_poly)?;
    let f = expand(&poly, group, n)?;
    let eval = f.evaluator();
    let method = method
        .or(g.cfg.method.as_deref())
        .unwrap_or("mc")
        .to_string();
    let mut out = json!({
        "group": group_label(group),
        "n": n,
        "entry_poly": entry_poly,
        "method": method,
    });
    match method.as_str() {
        "mc" => {
            let samples = samples.or(g.cfg.samples).unwrap_or(100_000);
            let seed = seed.or(g.cfg.seed).unwrap_or(0);
            let (value, stderr) = mc_integrate(|a| eval(a), group, n, samples, seed)?;
            out["samples"] = json!(samples);
            out["seed"] = json!(seed);
            out["value"] = complex_json(value);
            out["stderr"] = json!(stderr);
        }
        "quad" => {
            let orders = match orders.or(g.cfg.orders.as_deref()) {
                Some(list) => parse_orders(list)?,
                None => vec![16],
            };
            let value = quad_integrate(|a| eval(a), group, n, &orders)?;
            out["orders"] = json!(orders);
            out["value"] = complex_json(value);
        }
        other => {
            return Err(Failure::validation(format!(
                "unknown method {other:?}, expected mc or quad"
            )))
        }
    }
    Ok(pretty(&out))
}

/// Shared input path for tilde and spectrum: entry polynomial or JSON.
fn admissible_input(
    g: &Globals,
    grp: &GroupArgs,
    entry_poly: Option<&str>,
    input: Option<&str>,
    accept_admissible: bool,
) -> Result<AdmissibleFunction, Failure> {
    match (entry_poly, input) {
        (Some(poly), None) => {
            let (group, n) = resolve_group(grp, &g.cfg)?;
            let f = expand(&parse_entry_poly(poly)?, group, n)?;
            Ok(tilde(&f)?)
        }
        (None, Some(src)) => {
            let v = parse_json_source(src)?;
            if accept_admissible && v.get("z_vars").is_some() {
                return Ok(AdmissibleFunction::from_json(&v)?);
            }
            let (group, n) = resolve_group(grp, &g.cfg)?;
            let f = FiniteTypeFunction::from_json(group, n, &v)
                .ok_or_else(|| Failure::parse("bad finite type function JSON"))?;
            Ok(tilde(&f)?)
        }
        _ => Err(Failure::parse(
            "provide exactly one of --entry-poly or --input",
        )),
    }
}

fn cmd_tilde(
    g: &Globals,
    grp: &GroupArgs,
    entry_poly: Option<&str>,
    input: Option<&str>,
) -> Result<String, Failure> {
    require_json(g.format, "tilde")?;
    let af = admissible_input(g, grp, entry_poly, input, false)?;
    Ok(pretty(&af.to_json()))
}

fn cmd_spectrum(
    g: &Globals,
    grp: &GroupArgs,
    entry_poly: Option<&str>,
    input: Option<&str>,
) -> Result<String, Failure> {
    let af = admissible_input(g, grp, entry_poly, input, true)?;
    let s = spectrum(&af);
    match g.format {
        OutputFormat::Json => Ok(pretty(&s.to_json())),
        OutputFormat::Csv => {
            let mut lines = Vec::new();
            let header: Vec<String> = (1..=s.dim).map(|i| format!("m{i}")).collect();
            lines.push(header.join(","));
            for p in &s.points {
                let row: Vec<String> = p.iter().map(rational_string).collect();
                lines.push(row.join(","));
            }
            Ok(lines.join("\n"))
        }
    }
}

fn cmd_hull(g: &Globals, input: &str) -> Result<String, Failure> {
    require_json(g.format, "hull")?;
    let v = parse_json_source(input)?;
    let s = Spectrum::from_json(&v)?;
    let verdict = hull_contains_zero(&s)?;
    let out = json!({
        "dim": s.dim,
        "points": s.points.len(),
        "contains_zero": verdict.contains_zero(),
        "certificate": verdict.to_json(),
    });
    Ok(pretty(&out))
}

fn cmd_probe(
    g: &Globals,
    grp: &GroupArgs,
    entry_poly: &str,
    pmax: Option<u32>,
) -> Result<String, Failure> {
    require_json(g.format, "probe")?;
    let (group, n) = resolve_group(grp, &g.cfg)?;
    let pmax = pmax.or(g.cfg.pmax).unwrap_or(3);
    let f = expand(&parse_entry_poly(entry_poly)?, group, n)?;
    let report = conjecture_probe(&f, pmax)?;
    let mut out = report.to_json();
    out["entry_poly"] = json!(entry_poly);
    Ok(pretty(&out))
}

fn cmd_constants(g: &Globals, grp: &GroupArgs) -> Result<String, Failure> {
    require_json(g.format, "constants")?;
    let (group, n) = resolve_group(grp, &g.cfg)?;
    let report = normalization(group, n)?;
    let mut levels = Vec::new();
    for lv in &report.levels {
        levels.push(json!({
            "level": lv.level,
            "computed": scalar_json(&lv.computed, g.digits)?,
            "published": scalar_json(&lv.published, g.digits)?,
            "ratio": scalar_json(&lv.ratio, g.digits)?,
        }));
    }
    let out = json!({
        "group": group_label(group),
        "n": n,
        "levels": levels,
        "total_computed": scalar_json(&report.total_computed, g.digits)?,
        "total_published": scalar_json(&report.total_published, g.digits)?,
        "total_ratio": scalar_json(&report.total_ratio, g.digits)?,
    });
    Ok(pretty(&out))
}

// ------------------------------------------------------------------ verify

struct Check {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn check(name: &'static str, pass: bool, detail: String) -> Check {
    Check { name, pass, detail }
}

fn residual_check(name: &'static str, residual: f64, tol: f64) -> Check {
    check(
        name,
        residual.is_finite() && residual < tol,
        format!("max residual {residual:.3e}, tolerance {tol:.1e}"),
    )
}

fn random_cyclotomic(rng: &mut ChaCha8Rng) -> CyclotomicNumber {
    let mut x = CyclotomicNumber::zero();
    for _ in 0..3 {
        let num: i64 = rng.gen_range(-4..5);
        let den: i64 = rng.gen_range(1..5);
        let ord: i64 = rng.gen_range(1..9);
        let pow: i64 = rng.gen_range(0..ord);
        let coeff = CyclotomicNumber::from_rational(Rational::new(num.into(), den.into()));
        let root =
            CyclotomicNumber::root_of_unity(&Rational::new(pow.into(), ord.into())).unwrap();
        x = x.try_add(&coeff.try_mul(&root).unwrap()).unwrap();
    }
    x
}

fn suite_exact(seed: u64) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x45584143);
    let mut checks = Vec::new();

    // Ring laws on random cyclotomic numbers.
    let mut law_ok = true;
    let mut detail = String::from("distributivity and inverses on 40 random triples");
    for _ in 0..40 {
        let a = random_cyclotomic(&mut rng);
        let b = random_cyclotomic(&mut rng);
        let c = random_cyclotomic(&mut rng);
        let lhs = a.try_add(&b).unwrap().try_mul(&c).unwrap();
        let rhs = a
            .try_mul(&c)
            .unwrap()
            .try_add(&b.try_mul(&c).unwrap())
            .unwrap();
        if lhs != rhs {
            law_ok = false;
            detail = "distributivity failed".into();
            break;
        }
        if !b.is_zero() {
            let binv = b.try_inv().unwrap();
            if !b.try_mul(&binv).unwrap().is_one() {
                law_ok = false;
                detail = "multiplicative inverse failed".into();
                break;
            }
        }
    }
    checks.push(check("cyclotomic-ring-laws", law_ok, detail));

    // Canonical collapse of redundant roots.
    let z6 = CyclotomicNumber::root_of_unity(&Rational::new(1.into(), 6.into())).unwrap();
    let z3 = CyclotomicNumber::root_of_unity(&Rational::new(1.into(), 3.into())).unwrap();
    let collapsed = CyclotomicNumber::one().try_add(&z3).unwrap();
    checks.push(check(
        "root-identity-collapse",
        z6 == collapsed,
        "1 + zeta(1/3) reduces to zeta(1/6)".into(),
    ));

    // Float embedding respects products within certified digits.
    let mut hom_res: f64 = 0.0;
    for _ in 0..25 {
        let q1 = Rational::new(rng.gen_range(1i64..8).into(), rng.gen_range(9i64..14).into());
        let q2 = Rational::new(rng.gen_range(1i64..8).into(), rng.gen_range(9i64..14).into());
        let a = ExactScalar::pi_term(1, CyclotomicNumber::root_of_unity(&q1).unwrap());
        let b = ExactScalar::pi_term(0, CyclotomicNumber::root_of_unity(&q2).unwrap());
        let prod = a.try_mul(&b).unwrap().to_complex(10).unwrap();
        let fa = a.to_complex(10).unwrap();
        let fb = b.to_complex(10).unwrap();
        let za = Complex64::new(fa.0, fa.1);
        let zb = Complex64::new(fb.0, fb.1);
        hom_res = hom_res.max((Complex64::new(prod.0, prod.1) - za * zb).norm());
    }
    checks.push(residual_check("float-embedding-product", hom_res, 1e-8));

    // Guards trip instead of looping or losing precision.
    let deg = CyclotomicNumber::root_of_unity(&Rational::new(1.into(), 1_000_003.into()));
    checks.push(check(
        "degree-guard-trips",
        matches!(deg, Err(ExactError::DegreeGuard(_))),
        "root order above the guard is rejected".into(),
    ));
    let huge = ExactScalar::pi_term(40, CyclotomicNumber::one());
    checks.push(check(
        "precision-guard-trips",
        matches!(huge.to_complex(15), Err(ExactError::PrecisionOverflow { .. })),
        "uncertifiable digit request is rejected".into(),
    ));
    checks
}

fn suite_generators(n: usize, seed: u64) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x47454e53);
    let mut checks = Vec::new();
    let n = n.max(3);

    // Pairing matrix: diagonal with the expected values.
    let dim = n * n - 1;
    let mut pair_ok = true;
    let mut detail = format!("pairing over the {dim} basis elements at rank {n}");
    'outer: for j in 1..=dim {
        for k in 1..=dim {
            let v = match trace_pairing(n, j, k) {
                Ok(v) => v,
                Err(e) => {
                    pair_ok = false;
                    detail = e.to_string();
                    break 'outer;
                }
            };
            let expected = if j != k {
                0.0
            } else {
                let mut diag = -2.0;
                for m in 2..=n {
                    if j == m * m - 1 {
                        diag = -((m * (m - 1)) as f64);
                    }
                }
                diag
            };
            if (v - expected).abs() > 1e-12 {
                pair_ok = false;
                detail = format!("pairing ({j},{k}) = {v}, expected {expected}");
                break 'outer;
            }
        }
    }
    checks.push(check("trace-pairing-diagonal", pair_ok, detail));

    // Closed-form exponentials match the truncated series.
    let mut exp_res: f64 = 0.0;
    for j in [3usize, n * n - 1] {
        for _ in 0..5 {
            let t = rng.gen_range(-1.5..1.5);
            let closed = exp_generator(n, j, t).unwrap();
            let gen = lambda(n, j).unwrap();
            let mut series = nalgebra::DMatrix::<Complex64>::identity(n, n);
            let mut term = nalgebra::DMatrix::<Complex64>::identity(n, n);
            for k in 1..60 {
                term = (&term * &gen) * Complex64::new(t / k as f64, 0.0);
                series += &term;
            }
            for r in 0..n {
                for c in 0..n {
                    exp_res = exp_res.max((closed[(r, c)] - series[(r, c)]).norm());
                }
            }
        }
    }
    checks.push(residual_check("exponential-closed-form", exp_res, 1e-10));

    // Adjoint dressing relations.
    let mut ad_res: f64 = 0.0;
    let mut ad_err = None;
    for rank in 3..=n {
        for q in 2..rank {
            for rel in [1u8, 2] {
                let pair = (rng.gen_range(0.0..1.5), rng.gen_range(0.0..1.5));
                match ad_relation_residual(rel, 0, q, rank, pair) {
                    Ok(r) => ad_res = ad_res.max(r),
                    Err(e) => ad_err = Some(e.to_string()),
                }
            }
            for p in (q + 1)..rank {
                for rel in [3u8, 4] {
                    let pair = (rng.gen_range(0.0..1.5), rng.gen_range(0.0..1.5));
                    match ad_relation_residual(rel, p, q, rank, pair) {
                        Ok(r) => ad_res = ad_res.max(r),
                        Err(e) => ad_err = Some(e.to_string()),
                    }
                }
            }
        }
    }
    match ad_err {
        Some(msg) => checks.push(check("adjoint-dressing-relations", false, msg)),
        None => checks.push(residual_check("adjoint-dressing-relations", ad_res, 1e-12)),
    }
    checks
}

fn suite_euler(n: usize, seed: u64) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x45554c52);
    let mut checks = Vec::new();

    // Membership and inversion round trip on random interior angles.
    let mut mem_res: f64 = 0.0;
    let mut rt_res: f64 = 0.0;
    for group in [Group::Su, Group::So] {
        for rank in 2..=n {
            for _ in 0..20 {
                let a = random_interior(group, rank, &mut rng);
                let m = forward(&a);
                mem_res = mem_res.max(membership_defect(group, &m));
                let b = inverse(group, rank, &m).unwrap();
                let back = forward(&b);
                for i in 0..rank {
                    for j in 0..rank {
                        rt_res = rt_res.max((back[(i, j)] - m[(i, j)]).norm());
                    }
                }
            }
        }
    }
    checks.push(residual_check("forward-membership", mem_res, 1e-10));
    checks.push(residual_check("inverse-round-trip", rt_res, 1e-9));

    // Shift identities for the unitary recursion.
    let mut shift_res: f64 = 0.0;
    for kind in ShiftKind::ALL {
        for rank in kind.min_rank()..=n.max(kind.min_rank()) {
            for _ in 0..5 {
                let a = random_interior(Group::Su, rank, &mut rng);
                let z = rng.gen_range(-3.0..3.0);
                shift_res = shift_res.max(shift_identity_residual(kind, rank, z, &a).unwrap());
            }
        }
    }
    checks.push(residual_check("shift-identities", shift_res, 1e-12));

    // Coordinate layout is internally consistent.
    let mut layout_ok = true;
    let mut detail = String::from("spec list length matches angle counts");
    for group in [Group::Su, Group::So] {
        for rank in 2..=n {
            let (np, ns, no) = angle_counts(group, rank);
            if coordinate_specs(group, rank).len() != np + ns + no {
                layout_ok = false;
                detail = format!("layout mismatch for {}({rank})", group_label(group));
            }
        }
    }
    checks.push(check("coordinate-layout", layout_ok, detail));
    checks
}

/// |top-left entry|^2 via the forward map, used by the MC check.
fn abs2_entry(a: &EulerAngles) -> f64 {
    forward(a)[(0, 0)].norm_sqr()
}

fn suite_haar(n: usize, seed: u64) -> Vec<Check> {
    let mut checks = Vec::new();

    // Exact normalization: computed constant times level mass is one.
    let mut norm_ok = true;
    let mut detail = String::from("computed constant times level mass is exactly one");
    for group in [Group::Su, Group::So] {
        let top = if group == Group::So { n + 1 } else { n };
        for rank in 2..=top {
            let report = match normalization(group, rank) {
                Ok(r) => r,
                Err(e) => {
                    norm_ok = false;
                    detail = e.to_string();
                    continue;
                }
            };
            for lv in &report.levels {
                let mass = level_mass_exact(group, lv.level);
                let prod = lv.computed.try_mul(&mass).unwrap();
                if !prod.is_one() {
                    norm_ok = false;
                    detail = format!(
                        "level {} of {}({rank}) does not normalize",
                        lv.level,
                        group_label(group)
                    );
                }
            }
        }
    }
    checks.push(check("normalization-exact", norm_ok, detail));

    // First Schur moment via Monte Carlo.
    let mut mc_ok = true;
    let mut mc_detail = String::new();
    for (group, rank) in [(Group::Su, 2), (Group::Su, 3), (Group::So, 3)] {
        let rank = rank.min(n.max(2));
        let (value, stderr) = mc_integrate(
            |a| Complex64::new(abs2_entry(a), 0.0),
            group,
            rank,
            20_000,
            seed,
        )
        .unwrap();
        let expect = 1.0 / rank as f64;
        let dev = (value.re - expect).abs();
        if dev > 5.0 * stderr + 1e-12 {
            mc_ok = false;
        }
        mc_detail = format!("last deviation {dev:.3e} at stderr {stderr:.3e}");
    }
    checks.push(check("mc-schur-moment", mc_ok, mc_detail));

    // Deterministic streams.
    let a1 = mc_integrate(
        |a| Complex64::new(abs2_entry(a), 0.0),
        Group::Su,
        2,
        1000,
        seed,
    )
    .unwrap();
    let a2 = mc_integrate(
        |a| Complex64::new(abs2_entry(a), 0.0),
        Group::Su,
        2,
        1000,
        seed,
    )
    .unwrap();
    checks.push(check(
        "mc-determinism",
        a1 == a2,
        "same seed gives bit-identical results".into(),
    ));

    // Quadrature agrees with exact low-rank moments.
    let su2 = symbolic_entries(Group::Su, 2).unwrap();
    let e11 = su2[0][0].evaluator();
    let q = quad_integrate(
        |a| {
            let m = e11(a).norm_sqr();
            Complex64::new(m * m, 0.0)
        },
        Group::Su,
        2,
        &[48],
    )
    .unwrap();
    checks.push(residual_check(
        "quad-low-rank-moment",
        (q.re - 1.0 / 3.0).abs(),
        1e-6,
    ));

    // Jacobian route density matches the direct product form.
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x4a41434f);
    let mut ratio_spread: f64 = 0.0;
    for (group, rank) in [(Group::Su, 2), (Group::So, 3)] {
        let mut ratios = Vec::new();
        for _ in 0..10 {
            let a = random_interior(group, rank, &mut rng);
            let d = density(group, rank, &a);
            let dj = density_from_jacobian(group, rank, &a).unwrap();
            if dj.abs() > 1e-300 {
                ratios.push(d / dj);
            }
        }
        let mean: f64 = ratios.iter().sum::<f64>() / ratios.len() as f64;
        for r in &ratios {
            ratio_spread = ratio_spread.max((r - mean).abs() / mean.abs());
        }
    }
    checks.push(residual_check("jacobian-density-ratio", ratio_spread, 1e-8));
    checks
}

fn suite_finite_type(n: usize, seed: u64) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x46545950);
    let mut checks = Vec::new();

    // Symbolic entries match the numeric forward map.
    let mut ent_res: f64 = 0.0;
    for group in [Group::Su, Group::So] {
        for rank in 2..=n.min(4) {
            let table = symbolic_entries(group, rank).unwrap();
            for _ in 0..5 {
                let a = random_interior(group, rank, &mut rng);
                let m = forward(&a);
                for (i, row) in table.iter().enumerate() {
                    for (j, f) in row.iter().enumerate() {
                        ent_res = ent_res.max((f.eval(&a) - m[(i, j)]).norm());
                    }
                }
            }
        }
    }
    checks.push(residual_check("symbolic-entries-forward", ent_res, 1e-12));

    // Row orthonormality holds exactly at the symbolic level.
    let mut ortho_ok = true;
    let mut detail = String::from("rows of the symbolic matrix are exactly orthonormal");
    for (group, rank) in [(Group::Su, 2), (Group::Su, 3), (Group::So, 3)] {
        let table = symbolic_entries(group, rank).unwrap();
        for i in 0..rank {
            for j in 0..rank {
                let mut acc = FiniteTypeFunction::zero(group, rank);
                for k in 0..rank {
                    let prod = table[i][k].try_mul(&table[j][k].conj()).unwrap();
                    acc = acc.try_add(&prod).unwrap();
                }
                let acc = acc.normalize().unwrap();
                let ok = if i == j {
                    acc.num_terms() == 1 && !acc.is_zero()
                } else {
                    acc.is_zero()
                };
                if !ok {
                    ortho_ok = false;
                    detail = format!(
                        "row pair ({i},{j}) of {}({rank}) failed",
                        group_label(group)
                    );
                }
            }
        }
    }
    checks.push(check("row-orthonormality-exact", ortho_ok, detail));

    // Conjugation commutes with evaluation.
    let mut conj_res: f64 = 0.0;
    let poly = EntryPolynomial::parse("u11*u12 - 1/3 cu21^2").unwrap();
    let f = expand(&poly, Group::Su, 3).unwrap();
    let fc = f.conj();
    for _ in 0..10 {
        let a = random_interior(Group::Su, 3, &mut rng);
        conj_res = conj_res.max((fc.eval(&a) - f.eval(&a).conj()).norm());
    }
    checks.push(residual_check("conjugation-evaluation", conj_res, 1e-12));
    checks
}

fn suite_abelianize(n: usize, seed: u64) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x41424c4e);
    let mut checks = Vec::new();
    let _ = n;

    // Torus substitution preserves values.
    let mut sub_res: f64 = 0.0;
    for (group, rank, poly) in [
        (Group::Su, 2, "u11*cu12"),
        (Group::Su, 3, "u12^2 + 1/2 u23*cu11"),
        (Group::So, 3, "u11^2 - u22"),
    ] {
        let f = expand(&EntryPolynomial::parse(poly).unwrap(), group, rank).unwrap();
        let af = tilde(&f).unwrap();
        for _ in 0..10 {
            let a = random_interior(group, rank, &mut rng);
            sub_res = sub_res.max((af.eval_angles(&a) - f.eval(&a)).norm());
        }
    }
    checks.push(residual_check("tilde-substitution", sub_res, 1e-12));

    // The unit integrates to exactly one via the theta route.
    let mut unit_ok = true;
    let mut detail = String::from("exact moment of 1 is exactly 1");
    for group in [Group::Su, Group::So] {
        for rank in 2..=3 {
            let one = AdmissibleFunction::constant(group, rank, ExactScalar::one());
            for p in [1u32, 3] {
                match exact_moment(&one, p) {
                    Ok(v) if v.is_one() => {}
                    Ok(v) => {
                        unit_ok = false;
                        detail = format!(
                            "unit moment of {}({rank}) returned {}",
                            group_label(group),
                            v.display_string()
                        );
                    }
                    Err(e) => {
                        unit_ok = false;
                        detail = e.to_string();
                    }
                }
            }
        }
    }
    checks.push(check("unit-moment-exact", unit_ok, detail));

    // Exact moments agree with Monte Carlo estimates.
    let mut mom_ok = true;
    let mut mom_detail = String::new();
    for (group, rank, poly) in [(Group::Su, 2, "u11*cu11"), (Group::So, 3, "u11^2")] {
        let f = expand(&EntryPolynomial::parse(poly).unwrap(), group, rank).unwrap();
        let af = tilde(&f).unwrap();
        let exact = exact_moment(&af, 1).unwrap().to_complex(12).unwrap();
        let eval = f.evaluator();
        let (mc, stderr) = mc_integrate(|a| eval(a), group, rank, 20_000, seed).unwrap();
        let dev = (mc - Complex64::new(exact.0, exact.1)).norm();
        if dev > 5.0 * stderr + 1e-9 {
            mom_ok = false;
        }
        mom_detail = format!("last deviation {dev:.3e} at stderr {stderr:.3e}");
    }
    checks.push(check("moment-mc-agreement", mom_ok, mom_detail));

    // Hull verdicts carry certificates and match brute force.
    let mut hull_ok = true;
    let mut hull_detail = String::from("30 random spectra certified and cross-checked");
    for _ in 0..30 {
        let dim = rng.gen_range(1usize..=3);
        let count = rng.gen_range(1usize..=6);
        let mut points = Vec::new();
        for _ in 0..count {
            let p: Vec<Rational> = (0..dim)
                .map(|_| {
                    Rational::new(
                        rng.gen_range(-3i64..=3).into(),
                        rng.gen_range(1i64..=2).into(),
                    )
                })
                .collect();
            points.push(p);
        }
        let s = Spectrum { dim, points };
        let verdict = match hull_contains_zero(&s) {
            Ok(v) => v,
            Err(e) => {
                hull_ok = false;
                hull_detail = e.to_string();
                break;
            }
        };
        let brute = hull_brute_force(&s).unwrap();
        if verdict.contains_zero() != brute {
            hull_ok = false;
            hull_detail = "verdict disagrees with subset enumeration".into();
            break;
        }
    }
    checks.push(check("hull-certificates", hull_ok, hull_detail));

    // Probe statuses on the canonical examples.
    let u12 = expand(&EntryPolynomial::parse("u12").unwrap(), Group::Su, 2).unwrap();
    let report = conjecture_probe(&u12, 4).unwrap();
    checks.push(check(
        "probe-off-diagonal",
        report.status.label() == "conjecture-consistent",
        format!("status {}", report.status.label()),
    ));
    let one = FiniteTypeFunction::one(Group::Su, 2);
    let report = conjecture_probe(&one, 2).unwrap();
    checks.push(check(
        "probe-constant",
        report.status.label() == "hypothesis not satisfied",
        format!("status {}", report.status.label()),
    ));
    checks
}

fn cmd_verify(
    g: &Globals,
    n: Option<usize>,
    suite: Option<&str>,
    seed: Option<u64>,
) -> Result<String, Failure> {
    require_json(g.format, "verify")?;
    let n = n.or(g.cfg.n).unwrap_or(3);
    if n < 2 {
        return Err(Failure::validation(format!(
            "rank must be at least 2, got {n}"
        )));
    }
    let seed = seed.or(g.cfg.seed).unwrap_or(0);
    let suite = suite
        .or(g.cfg.suite.as_deref())
        .unwrap_or("all")
        .to_string();
    let mut sections: Vec<(&str, Vec<Check>)> = Vec::new();
    let want = |name: &str| suite == "all" || suite == name;
    if want("exact") {
        sections.push(("exact", suite_exact(seed)));
    }
    if want("generators") {
        sections.push(("generators", suite_generators(n, seed)));
    }
    if want("euler") {
        sections.push(("euler", suite_euler(n, seed)));
    }
    if want("haar") {
        sections.push(("haar", suite_haar(n, seed)));
    }
    if want("finite-type") {
        sections.push(("finite-type", suite_finite_type(n, seed)));
    }
    if want("abelianize") {
        sections.push(("abelianize", suite_abelianize(n, seed)));
    }
    if sections.is_empty() {
        return Err(Failure::validation(format!(
            "unknown suite {suite:?}; expected all, exact, generators, euler, haar, finite-type, or abelianize"
        )));
    }
    let mut all_pass = true;
    let mut out_sections = Vec::new();
    for (name, checks) in &sections {
        let mut rows = Vec::new();
        for c in checks {
            all_pass &= c.pass;
            rows.push(json!({
                "check": c.name,
                "pass": c.pass,
                "detail": c.detail,
            }));
        }
        out_sections.push(json!({ "suite": name, "checks": rows }));
    }
    let out = json!({
        "n": n,
        "seed": seed,
        "pass": all_pass,
        "sections": out_sections,
    });
    let rendered = pretty(&out);
    if all_pass {
        Ok(rendered)
    } else {
        Err(Failure {
            code: 2,
            message: rendered,
        })
    }
}

// ---------------------------------------------------------------- dispatch

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("JSON rendering cannot fail")
}

/// Run the CLI on explicit argv, returning stdout text or a failure.
pub fn run<I, T>(argv: I) -> Result<String, Failure>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => Ok(e.to_string()),
                _ => Err(Failure::parse(e.to_string())),
            }
        }
    };
    let g = resolve_globals(&cli)?;
    match &cli.command {
        Command::Param { grp, angles } => cmd_param(&g, grp, angles),
        Command::Invert { grp, input } => cmd_invert(&g, grp, input),
        Command::Sample { grp, samples, seed } => cmd_sample(&g, grp, *samples, *seed),
        Command::Integrate {
            grp,
            entry_poly,
            method,
            samples,
            seed,
            orders,
        } => cmd_integrate(
            &g,
            grp,
            entry_poly,
            method.as_deref(),
            *samples,
            *seed,
            orders.as_deref(),
        ),
        Command::Tilde {
            grp,
            entry_poly,
            input,
        } => cmd_tilde(&g, grp, entry_poly.as_deref(), input.as_deref()),
        Command::Spectrum {
            grp,
            entry_poly,
            input,
        } => cmd_spectrum(&g, grp, entry_poly.as_deref(), input.as_deref()),
        Command::Hull { input } => cmd_hull(&g, input),
        Command::Probe {
            grp,
            entry_poly,
            pmax,
        } => cmd_probe(&g, grp, entry_poly, *pmax),
        Command::Constants { grp } => cmd_constants(&g, grp),
        Command::Verify { n, suite, seed } => cmd_verify(&g, *n, suite.as_deref(), *seed),
    }
}

/// Process entry point used by the binary. A closed stdout (downstream
/// consumer stopped reading) is not an error.
pub fn run_main() -> ExitCode {
    use std::io::Write;
    match run(std::env::args_os()) {
        Ok(text) => {
            let mut out = std::io::stdout().lock();
            let _ = writeln!(out, "{text}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            let mut err = std::io::stderr().lock();
            let _ = writeln!(err, "{}", f.message);
            ExitCode::from(f.code)
        }
    }
}
