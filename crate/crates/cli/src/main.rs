#![allow(clippy::neg_cmp_op_on_partial_ord)]
//! `sphex`: hypothesis checks, chamber volumes, identity and variation
//! reports for sphere arrangements.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use sphex_core::arrangement::{set_label, ArrangementSpec};
use sphex_core::identities::{self, IdentityReport};
use sphex_core::restricted::SphereModel;
use sphex_core::variation::{self, FdOptions, VariationReport};
use sphex_core::volume::{chamber_data, chamber_volume_mc, closed_form_volume};
use sphex_core::{cayley_menger, Arrangement, Chamber, ConfigMatrix, ConfigSpec, Error, Param, Rng, Truth};

const SCHEMA: &str = "sphex/1";

#[derive(Parser, Debug)]
#[command(name = "sphex", version, about = "Checks and volume variations for arrangements of n+1 spheres in R^n")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sign conditions on every subset of spheres.
    Check(Common),
    /// Volume of a chamber, or area on the unit sphere.
    Volume(VolumeArgs),
    /// Verify one of the identities.
    Identity(IdentityArgs),
    /// Finite differences against the variation formulas.
    Variation(VariationArgs),
}

#[derive(Args, Debug)]
struct Common {
    /// Arrangement JSON (centers and radii, or squared radii and distances).
    #[arg(long, required_unless_present = "params", conflicts_with = "params")]
    input: Option<PathBuf>,
    /// Arrangement JSON in the squared radius and distance form.
    #[arg(long)]
    params: Option<PathBuf>,
    /// Chamber signs, '-' inside and '+' outside, one per sphere.
    #[arg(long, allow_hyphen_values = true)]
    chamber: Option<String>,
    #[arg(long, default_value_t = 1_000_000, value_parser = clap::value_parser!(u64).range(1..))]
    samples: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-4)]
    eps: f64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run Monte Carlo batches on one thread.
    #[arg(long)]
    sequential: bool,
}

#[derive(Args, Debug)]
struct VolumeArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value_t = Model::Euclidean)]
    model: Model,
    /// Also report every face measure.
    #[arg(long)]
    faces: bool,
    /// Monte Carlo even where a closed form exists.
    #[arg(long)]
    mc: bool,
}

#[derive(Args, Debug)]
struct IdentityArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum)]
    which: Which,
    /// Random points for lemma5.
    #[arg(long, default_value_t = 100)]
    points: usize,
    /// Sampled points per face for prop4.
    #[arg(long, default_value_t = 20)]
    trials: usize,
}

#[derive(Args, Debug)]
struct VariationArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value_t = Model::Euclidean)]
    model: Model,
    /// Parameter such as r2:1, rho2:1,2, a:1,0 or a:1,2; repeatable. Default: all.
    #[arg(long = "param")]
    param: Vec<String>,
    /// Paired Monte Carlo differences even where a closed form exists.
    #[arg(long)]
    mc: bool,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum Format {
    Json,
    Csv,
    Text,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum Model {
    Euclidean,
    Sphere,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum Which {
    #[value(name = "thmI")]
    ThmI,
    #[value(name = "thmII")]
    ThmII,
    #[value(name = "lemma5")]
    Lemma5,
    #[value(name = "prop4")]
    Prop4,
    #[value(name = "prop6")]
    Prop6,
    #[value(name = "gaussbonnet")]
    GaussBonnet,
    #[value(name = "decomposition")]
    Decomposition,
}

impl Which {
    fn name(self) -> &'static str {
        match self {
            Which::ThmI => "thmI",
            Which::ThmII => "thmII",
            Which::Lemma5 => "lemma5",
            Which::Prop4 => "prop4",
            Which::Prop6 => "prop6",
            Which::GaussBonnet => "gaussbonnet",
            Which::Decomposition => "decomposition",
        }
    }
}

struct Failure {
    code: u8,
    kind: &'static str,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let (code, kind) = match &e {
            Error::InvalidInput(_) | Error::NonPositiveRadius { .. } => (1, "input"),
            Error::Hypothesis(_) | Error::EmptyIntersection { .. } => (2, "hypothesis"),
            Error::Indeterminate(_) => (3, "indeterminate"),
            _ => (4, "numerical"),
        };
        Failure { code, kind, message: e.to_string() }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: 1, kind: "usage", message: message.into() }
}

struct Outcome {
    json: Value,
    csv: String,
    text: String,
    code: u8,
}

fn truth_code(t: Truth) -> u8 {
    match t {
        Truth::True => 0,
        Truth::False => 2,
        Truth::Indeterminate => 3,
    }
}

fn truth_str(t: Truth) -> &'static str {
    match t {
        Truth::True => "true",
        Truth::False => "false",
        Truth::Indeterminate => "indeterminate",
    }
}

fn rng(c: &Common) -> Rng {
    let r = Rng::new(c.seed);
    if c.sequential {
        r.sequential()
    } else {
        r
    }
}

fn read(path: &PathBuf) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))
}

fn load_arrangement(c: &Common) -> Result<Arrangement, Failure> {
    let (path, params_only) = match (&c.input, &c.params) {
        (Some(p), _) => (p, false),
        (None, Some(p)) => (p, true),
        (None, None) => return Err(usage("--input or --params is required")),
    };
    let spec: ArrangementSpec =
        serde_json::from_str(&read(path)?).map_err(|e| usage(format!("cannot parse {}: {e}", path.display())))?;
    if params_only && matches!(spec, ArrangementSpec::Centers { .. }) {
        return Err(usage("--params expects radii_sq and dist_sq"));
    }
    Ok(spec.build()?)
}

/// A configuration matrix given directly, or derived from an arrangement
/// whose last sphere is the unit sphere at the origin.
fn load_config(c: &Common) -> Result<ConfigMatrix, Failure> {
    let path = c.input.as_ref().or(c.params.as_ref()).ok_or_else(|| usage("--input is required"))?;
    let text = read(path)?;
    if let Ok(spec) = serde_json::from_str::<ConfigSpec>(&text) {
        return Ok(spec.build()?);
    }
    let a = load_arrangement(c)?;
    Ok(cayley_menger::config_matrix(&a)?.config)
}

fn chamber(c: &Common, len: usize) -> Result<Chamber, Failure> {
    match &c.chamber {
        Some(s) => Ok(Chamber::parse(s, len)?),
        None => Ok(Chamber::all_inside(len)),
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn cmd_check(c: &Common) -> Result<Outcome, Failure> {
    let a = load_arrangement(c)?;
    let h = a.check_hypotheses();
    let verdict = h.verdict();
    let undecided: Vec<String> = h.indeterminate_subsets().iter().map(|s| set_label(&s.set)).collect();
    let subsets: Vec<Value> = h
        .subsets
        .iter()
        .map(|s| {
            json!({
                "set": set_label(&s.set),
                "b0": s.b0,
                "b0_star": s.b0_star,
                "b0_sign": s.b0_sign,
                "b0_star_sign": s.b0_star_sign,
            })
        })
        .collect();
    let json = json!({
        "schema": SCHEMA,
        "command": "check",
        "n": a.n(),
        "h1": h.h1,
        "h1_prime": h.h1_prime,
        "h2": h.h2,
        "verdict": verdict,
        "indeterminate": undecided,
        "vertex_coords": h.vertex_coords,
        "subsets": subsets,
    });
    let mut csv = String::from("set,b0,b0_star,b0_sign,b0_star_sign\n");
    for s in &h.subsets {
        let _ = writeln!(
            csv,
            "{},{:e},{:e},{},{}",
            csv_field(&set_label(&s.set)),
            s.b0,
            s.b0_star,
            json!(s.b0_sign).as_str().unwrap_or(""),
            json!(s.b0_star_sign).as_str().unwrap_or("")
        );
    }
    let mut text = format!(
        "H1 {}\nH1' {}\nH2 {}\nverdict {}\n",
        truth_str(h.h1),
        truth_str(h.h1_prime),
        truth_str(h.h2),
        truth_str(verdict)
    );
    if !undecided.is_empty() {
        let _ = writeln!(text, "indeterminate {}", undecided.join(" "));
    }
    Ok(Outcome { json, csv, text, code: truth_code(verdict) })
}

#[derive(Serialize)]
struct FaceRow {
    set: String,
    value: f64,
    std_error: f64,
    exact: bool,
}

fn cmd_volume(args: &VolumeArgs) -> Result<Outcome, Failure> {
    let c = &args.common;
    let r = rng(c);
    let (label, est, faces) = match args.model {
        Model::Euclidean => {
            let a = load_arrangement(c)?;
            let ch = chamber(c, a.len())?;
            if args.faces {
                let d = chamber_data(&a, &ch, c.samples, &r)?;
                let faces = d
                    .faces
                    .iter()
                    .map(|(s, v)| FaceRow { set: set_label(s), value: v.value, std_error: v.std_error, exact: v.exact })
                    .collect();
                (ch.to_string(), d.volume, faces)
            } else {
                let est = match closed_form_volume(&a, &ch) {
                    Some(v) if !args.mc => sphex_core::VolumeEstimate::exact(v),
                    _ => chamber_volume_mc(&a, &ch, c.samples, &r)?,
                };
                (ch.to_string(), est, Vec::new())
            }
        }
        Model::Sphere => {
            let m = SphereModel::new(&load_config(c)?)?;
            let ch = chamber(c, m.dim())?;
            let est = if m.dim() == 3 && ch.is_all_inside() && !args.mc {
                sphex_core::VolumeEstimate::exact(m.gauss_bonnet_area()?)
            } else {
                m.region_volume_mc(&ch, c.samples, &r)?
            };
            (ch.to_string(), est, Vec::new())
        }
    };
    let mut json = json!({
        "schema": SCHEMA,
        "command": "volume",
        "chamber": label,
        "value": est.value,
        "std_error": est.std_error,
        "samples": est.samples,
        "exact": est.exact,
    });
    if args.faces {
        json["faces"] = json!(faces);
    }
    let mut csv = String::from("set,value,std_error,exact\n");
    let _ = writeln!(csv, "chamber,{:e},{:e},{}", est.value, est.std_error, est.exact);
    for f in &faces {
        let _ = writeln!(csv, "{},{:e},{:e},{}", csv_field(&f.set), f.value, f.std_error, f.exact);
    }
    let mut text = format!(
        "chamber {label}\nvolume {} +- {} ({})\n",
        est.value,
        est.std_error,
        if est.exact { "exact".to_string() } else { format!("{} samples", est.samples) }
    );
    for f in &faces {
        let _ = writeln!(text, "face {} {} +- {}", f.set, f.value, f.std_error);
    }
    Ok(Outcome { json, csv, text, code: 0 })
}

fn identity_reports(args: &IdentityArgs) -> Result<Vec<IdentityReport>, Failure> {
    let c = &args.common;
    let r = rng(c);
    if args.which == Which::GaussBonnet {
        let m = SphereModel::new(&load_config(c)?)?;
        return Ok(vec![identities::check_gauss_bonnet_n3(&m, c.samples, &r)?]);
    }
    let a = load_arrangement(c)?;
    let n = a.n();
    Ok(match args.which {
        Which::ThmI => match &c.chamber {
            Some(s) => {
                let ch = Chamber::parse(s, a.len())?;
                if ch.is_all_inside() {
                    vec![identities::check_theorem_i(&a, c.samples, &r)?]
                } else {
                    vec![identities::check_chamber_identity(&a, &ch, c.samples, &r)?]
                }
            }
            None => vec![identities::check_theorem_i(&a, c.samples, &r)?],
        },
        Which::ThmII => vec![identities::check_theorem_ii(&a, c.samples, &r)?],
        Which::Lemma5 => identities::check_lemma5_random(&a, args.points, c.seed)?,
        Which::Prop4 => {
            let mut out = Vec::new();
            for mask in 1u32..(1 << (n + 1)) {
                let set: Vec<usize> = (0..=n).filter(|j| mask & (1 << j) != 0).collect();
                if set.len() <= n {
                    out.push(identities::check_prop4_residue(&a, &set, args.trials, &r.substream(mask as u64))?);
                }
            }
            out
        }
        Which::Prop6 => (0..=n).map(|j| identities::check_prop6_values(&a, j)).collect::<Result<_, _>>()?,
        Which::Decomposition => {
            let mut out = vec![
                identities::check_decomposition(&a, c.samples, &r.substream(1))?,
                identities::check_cell_closure(&a, c.samples, &r.substream(2))?,
            ];
            out.extend(identities::check_cell_volumes(&a, c.samples, &r.substream(3))?);
            out
        }
        Which::GaussBonnet => unreachable!(),
    })
}

fn cmd_identity(args: &IdentityArgs) -> Result<Outcome, Failure> {
    let reports = identity_reports(args)?;
    let status = reports.iter().fold(Truth::True, |acc, r| acc.and(r.status()));
    let passed = reports.iter().filter(|r| r.pass).count();
    let json = json!({
        "schema": SCHEMA,
        "command": "identity",
        "which": args.which.name(),
        "passed": passed,
        "total": reports.len(),
        "status": status,
        "reports": reports,
    });
    let mut csv = String::from("name,lhs,lhs_std_error,rhs,residual,tolerance,pass,hypotheses\n");
    let mut text = String::new();
    for r in &reports {
        let _ = writeln!(
            csv,
            "{},{:e},{:e},{:e},{:e},{:e},{},{}",
            csv_field(&r.name),
            r.lhs,
            r.lhs_std_error,
            r.rhs,
            r.residual,
            r.tolerance,
            r.pass,
            truth_str(r.hypotheses)
        );
        let _ = writeln!(
            text,
            "{} {} lhs {} rhs {} residual {:e} tolerance {:e}",
            if r.pass { "PASS" } else { "FAIL" },
            r.name,
            r.lhs,
            r.rhs,
            r.residual,
            r.tolerance
        );
        for t in &r.terms {
            let _ = writeln!(text, "  {} {} +- {}", t.label, t.value, t.std_error);
        }
    }
    let _ = writeln!(text, "{passed}/{} passed", reports.len());
    Ok(Outcome { json, csv, text, code: truth_code(status) })
}

enum Row {
    Ok(VariationReport),
    Err(String, Failure),
}

fn variation_rows(args: &VariationArgs) -> Result<(String, Vec<Row>), Failure> {
    let c = &args.common;
    if !(c.eps > 0.0) {
        return Err(usage("--eps must be positive"));
    }
    let r = rng(c);
    let opts = FdOptions { eps: c.eps, samples: c.samples, monte_carlo: args.mc };
    let pick = |all: Vec<Param>| -> Result<Vec<Param>, Failure> {
        if args.param.is_empty() || args.param.iter().any(|p| p == "all") {
            return Ok(all);
        }
        args.param
            .iter()
            .map(|p| {
                let key = Param::parse(p)?;
                if all.contains(&key) {
                    Ok(key)
                } else {
                    Err(usage(format!("parameter {p} does not apply to this model")))
                }
            })
            .collect()
    };
    let mut rows = Vec::new();
    match args.model {
        Model::Euclidean => {
            let a = load_arrangement(c)?;
            let ch = chamber(c, a.len())?;
            let keys = pick(a.params().keys())?;
            let (form, _) = variation::db_volume_form(&a, &ch, c.samples, &r.substream(1))?;
            for (i, key) in keys.into_iter().enumerate() {
                let res = variation::verify_variation_fd(&a, &ch, &form, key, &opts, &r.substream(1000 + i as u64));
                rows.push(match res {
                    Ok(v) => Row::Ok(v),
                    Err(e) => Row::Err(key.to_string(), e.into()),
                });
            }
            Ok((ch.to_string(), rows))
        }
        Model::Sphere => {
            let m = load_config(c)?;
            let keys = pick(m.params().keys())?;
            let form = variation::da_volume_form(&m, c.samples, &r.substream(1))?;
            for (i, key) in keys.into_iter().enumerate() {
                let res = variation::verify_variation_fd_sphere(&m, &form, key, &opts, &r.substream(1000 + i as u64));
                rows.push(match res {
                    Ok(v) => Row::Ok(v),
                    Err(e) => Row::Err(key.to_string(), e.into()),
                });
            }
            Ok(("-".repeat(m.n()), rows))
        }
    }
}

fn cmd_variation(args: &VariationArgs) -> Result<Outcome, Failure> {
    let (label, rows) = variation_rows(args)?;
    let mut code = 0;
    let mut out = Vec::new();
    let mut csv = String::from("parameter,fd_value,fd_std_error,formula_value,formula_std_error,residual,tolerance,pass,error\n");
    let mut text = String::new();
    for row in &rows {
        match row {
            Row::Ok(v) => {
                if !v.pass {
                    code = code.max(2);
                }
                out.push(json!(v));
                let _ = writeln!(
                    csv,
                    "{},{:e},{:e},{:e},{:e},{:e},{:e},{},",
                    csv_field(&v.parameter),
                    v.fd_value,
                    v.fd_std_error,
                    v.formula_value,
                    v.formula_std_error,
                    v.residual,
                    v.tolerance,
                    v.pass
                );
                let _ = writeln!(
                    text,
                    "{} {} fd {} formula {} residual {:e} tolerance {:e}",
                    if v.pass { "PASS" } else { "FAIL" },
                    v.parameter,
                    v.fd_value,
                    v.formula_value,
                    v.residual,
                    v.tolerance
                );
            }
            Row::Err(p, f) => {
                code = code.max(f.code);
                out.push(json!({"parameter": p, "error": {"kind": f.kind, "message": f.message}, "pass": false}));
                let _ = writeln!(csv, "{},,,,,,,false,{}", csv_field(p), csv_field(&f.message));
                let _ = writeln!(text, "ERROR {p} {}", f.message);
            }
        }
    }
    let json = json!({
        "schema": SCHEMA,
        "command": "variation",
        "model": if args.model == Model::Euclidean { "euclidean" } else { "sphere" },
        "chamber": label,
        "eps": args.common.eps,
        "rows": out,
    });
    Ok(Outcome { json, csv, text, code })
}

fn emit(out: Option<&PathBuf>, body: &str) -> Result<(), Failure> {
    match out {
        Some(p) => std::fs::write(p, body).map_err(|e| usage(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

fn render(format: Format, o: &Outcome) -> String {
    match format {
        Format::Json => format!("{}\n", serde_json::to_string_pretty(&o.json).expect("serializable report")),
        Format::Csv => o.csv.clone(),
        Format::Text => o.text.clone(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let (name, common) = match &cli.command {
        Command::Check(c) => ("check", c),
        Command::Volume(v) => ("volume", &v.common),
        Command::Identity(i) => ("identity", &i.common),
        Command::Variation(v) => ("variation", &v.common),
    };
    let result = match &cli.command {
        Command::Check(c) => cmd_check(c),
        Command::Volume(v) => cmd_volume(v),
        Command::Identity(i) => cmd_identity(i),
        Command::Variation(v) => cmd_variation(v),
    };
    let (body, code) = match result {
        Ok(o) => (render(common.format, &o), o.code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            let body = match common.format {
                Format::Json => format!(
                    "{}\n",
                    serde_json::to_string_pretty(&json!({
                        "schema": SCHEMA,
                        "command": name,
                        "error": {"kind": f.kind, "message": f.message},
                    }))
                    .expect("serializable error")
                ),
                Format::Csv => format!("error\n{}\n", csv_field(&f.message)),
                Format::Text => String::new(),
            };
            (body, f.code)
        }
    };
    if let Err(f) = emit(common.out.as_ref(), &body) {
        eprintln!("error: {}", f.message);
        return ExitCode::from(f.code);
    }
    ExitCode::from(code)
}
