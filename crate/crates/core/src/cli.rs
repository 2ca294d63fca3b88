//! Command-line front end.
//!
//! Every subcommand reads JSON inputs, prints a one-line summary and emits a
//! JSON report carrying the seed. Exit codes: 0 on success, 1 on bad input,
//! 2 when a bound fails to hold.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::calculus::{
    bilinear_image, cartesian_product, compose, embed, localize_vanishing, BilinearMap,
};
use crate::error::{LipError, Result};
use crate::expr::ExprSpec;
use crate::flow::{
    confinement_check, flow_jacobian, flow_jet, flow_space_lipschitz_check, integrate, time_space_check,
    FieldFile, FlowGrid, VectorField,
};
use crate::inverse::{
    constant_rank_decompose, inverse_jet, perturbation_rank_check, solve_local_inverse, DecomposeOptions,
    InverseProblem, ProblemFile,
};
use crate::jet::{certify, LipJet, Pairing};
use crate::smooth::ExprMap;
use crate::tensor::{verify_norm_properties, NormFamily};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "LIPJET_THREADS";

#[derive(Debug, Parser)]
#[command(name = "lipjet", version, about = "Certified Lip-γ jet calculus")]
struct Cli {
    /// Seed for every randomized sample; recorded in the report.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Write the JSON report here instead of standard output.
    #[arg(long, global = true)]
    report: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Certify a jet file.
    Certify {
        #[arg(long)]
        jet: PathBuf,
        /// Certify at this grade instead of the file's (must not exceed it).
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long, default_value = "linf")]
        norm: String,
        /// Fail with exit code 2 when the certified constant exceeds this.
        #[arg(long)]
        bound: Option<f64>,
    },
    /// Embed a jet into a lower grade and check the embedding constant.
    Embed {
        #[arg(long)]
        jet: PathBuf,
        #[arg(long)]
        gamma_prime: f64,
        #[arg(long, default_value = "linf")]
        norm: String,
        #[arg(long)]
        out_jet: Option<PathBuf>,
    },
    /// Cartesian product or bilinear image of two jets on one cloud.
    Product {
        #[arg(long)]
        left: PathBuf,
        #[arg(long)]
        right: PathBuf,
        #[arg(long, value_enum, default_value_t = ProductKind::Cartesian)]
        kind: ProductKind,
        /// Block pairing for the cartesian product.
        #[arg(long, default_value = "linf")]
        pairing: String,
        /// Bilinear map file `{dim_f, dim_g, dim_h, coeffs}`; defaults to the inner product.
        #[arg(long)]
        bilinear: Option<PathBuf>,
        #[arg(long, default_value = "linf")]
        norm: String,
        #[arg(long)]
        bound: Option<f64>,
        #[arg(long)]
        out_jet: Option<PathBuf>,
    },
    /// Compose two jets whose clouds are aligned.
    Compose {
        #[arg(long)]
        outer: PathBuf,
        #[arg(long)]
        inner: PathBuf,
        #[arg(long, default_value = "linf")]
        norm: String,
        #[arg(long)]
        bound: Option<f64>,
        #[arg(long)]
        out_jet: Option<PathBuf>,
    },
    /// Local estimate near a point where every level vanishes.
    Estimate {
        #[arg(long)]
        jet: PathBuf,
        /// Coordinates of the base point, which must belong to the cloud.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x0: Vec<f64>,
        #[arg(long)]
        gamma_prime: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value = "linf")]
        norm: String,
    },
    /// Solve φ(x) = y near x0 for each target.
    Invert {
        /// Problem file `{phi, x0, M1, M2, alpha, gamma}`.
        #[arg(long)]
        problem: PathBuf,
        /// Targets, `;`-separated, coordinates `,`-separated.
        #[arg(long, allow_hyphen_values = true)]
        targets: String,
        #[arg(long, default_value_t = 1e-13)]
        tol: f64,
        /// Lattice size per axis for the inner-ball check (0 skips it).
        #[arg(long, default_value_t = 0)]
        ball_samples: usize,
        /// Also build and certify the inverse jet on the targets.
        #[arg(long)]
        jet: bool,
    },
    /// Rank stability of a matrix-valued jet, or the constant-rank normal form of a map.
    Rank {
        /// Matrix-valued jet (row-major) for the perturbation check.
        #[arg(long, conflicts_with = "map")]
        jet: Option<PathBuf>,
        /// Map file `{phi, x0, rows, cols, gamma}` for the normal form.
        #[arg(long)]
        map: Option<PathBuf>,
        #[arg(long)]
        shape: Option<String>,
        /// Index of the base point in the jet's cloud.
        #[arg(long, default_value_t = 0)]
        x0: usize,
        #[arg(long, value_delimiter = ',')]
        rows: Vec<usize>,
        #[arg(long, value_delimiter = ',')]
        cols: Vec<usize>,
        #[arg(long)]
        m1: Option<f64>,
        #[arg(long)]
        m2: Option<f64>,
    },
    /// Integrate a field and check the flow bounds.
    Flow {
        /// Field file `{dim, coords, box, gamma}`.
        #[arg(long)]
        field: PathBuf,
        #[arg(long = "T")]
        t: f64,
        #[arg(long, value_enum, default_value_t = FlowCheck::All)]
        check: FlowCheck,
        /// Centre of the working ball; defaults to the box centre.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x0: Vec<f64>,
        #[arg(long, default_value_t = 0.5)]
        r: f64,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        /// Random pairs (space check) or space-time samples (time-space check).
        #[arg(long, default_value_t = 20)]
        pairs: usize,
        /// Write the trajectory from x0 to T as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Verify the declared properties of a norm family.
    CheckNorms {
        #[arg(long, default_value = "linf")]
        norm: String,
        #[arg(long, default_value_t = 3)]
        dim: usize,
        #[arg(long, default_value_t = 3)]
        k_max: usize,
        #[arg(long, default_value_t = 200)]
        samples: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ProductKind {
    Cartesian,
    Bilinear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FlowCheck {
    SpaceLipschitz,
    TimeSpace,
    Confinement,
    Jacobian,
    Jet,
    All,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Certify { .. } => "certify",
            Command::Embed { .. } => "embed",
            Command::Product { .. } => "product",
            Command::Compose { .. } => "compose",
            Command::Estimate { .. } => "estimate",
            Command::Invert { .. } => "invert",
            Command::Rank { .. } => "rank",
            Command::Flow { .. } => "flow",
            Command::CheckNorms { .. } => "check-norms",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Status {
    Ok,
    CertificationFailure,
    InputError,
}

#[derive(Serialize)]
struct Report<'a> {
    command: &'a str,
    seed: u64,
    status: Status,
    summary: &'a str,
    #[serde(skip_serializing_if = "Value::is_null")]
    result: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

struct Outcome {
    passed: bool,
    summary: String,
    result: Value,
}

impl Outcome {
    fn new(passed: bool, summary: String, result: impl Serialize) -> Result<Self> {
        Ok(Self {
            passed,
            summary,
            result: serde_json::to_value(result)?,
        })
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path, what: &str) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| LipError::Parse(format!("{}: cannot read {what}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| {
        LipError::Parse(format!(
            "{}: {what}, line {} column {}: {e}",
            path.display(),
            e.line(),
            e.column()
        ))
    })
}

fn family(spec: &str) -> Result<NormFamily> {
    spec.parse()
}

fn write_jet(jet: &LipJet, path: &Option<PathBuf>) -> Result<()> {
    match path {
        Some(p) => jet.write(p),
        None => Ok(()),
    }
}

fn within(value: f64, bound: Option<f64>) -> bool {
    bound.is_none_or(|b| value <= b)
}

fn parse_points(s: &str) -> Result<Vec<Vec<f64>>> {
    s.split(';')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            p.split(',')
                .map(|c| c.trim().parse::<f64>().map_err(|e| LipError::Parse(format!("target '{p}': {e}"))))
                .collect()
        })
        .collect()
}

#[derive(Debug, Deserialize)]
struct MapFile {
    phi: Vec<ExprSpec>,
    x0: Vec<f64>,
    rows: Vec<usize>,
    cols: Vec<usize>,
    gamma: f64,
}

fn dispatch(cmd: &Command, seed: u64) -> Result<Outcome> {
    match cmd {
        Command::Certify { jet, gamma, norm, bound } => {
            let mut j = LipJet::read(jet)?;
            if let Some(g) = gamma {
                if *g > j.gamma() {
                    return Err(LipError::invalid(format!("γ = {g} exceeds the jet's grade {}", j.gamma())));
                }
                j = j.truncate(*g)?;
            }
            let c = certify(&j, &family(norm)?)?;
            let summary = format!("M = {:e} at γ = {} over {} points", c.m, c.gamma, c.points);
            Outcome::new(within(c.m, *bound), summary, json!({ "certificate": c, "bound": bound }))
        }
        Command::Embed { jet, gamma_prime, norm, out_jet } => {
            let e = embed(&LipJet::read(jet)?, *gamma_prime, &family(norm)?)?;
            write_jet(&e.jet, out_jet)?;
            let summary = format!("M' = {:e} ≤ {:e}: {}", e.certificate.m, e.bound, e.holds);
            Outcome::new(e.holds, summary, &e)
        }
        Command::Product { left, right, kind, pairing, bilinear, norm, bound, out_jet } => {
            let (f, g) = (LipJet::read(left)?, LipJet::read(right)?);
            let fam = family(norm)?;
            let (jet, op_norm) = match kind {
                ProductKind::Cartesian => (cartesian_product(&f, &g, pairing.parse::<Pairing>()?)?, None),
                ProductKind::Bilinear => {
                    let b = match bilinear {
                        Some(p) => read_json::<BilinearMap>(p, "bilinear map")?,
                        None => BilinearMap::inner_product(f.dim_out()),
                    };
                    (bilinear_image(&b, &f, &g, &fam)?, Some(b.norm(fam.kind())))
                }
            };
            write_jet(&jet, out_jet)?;
            let c = certify(&jet, &fam)?;
            let (mf, mg) = (certify(&f, &fam)?.m, certify(&g, &fam)?.m);
            let denom = op_norm.unwrap_or(1.0) * mf * mg;
            let realized = if denom > 0.0 { c.m / denom } else { 0.0 };
            let summary = format!("M = {:e}, realized constant {realized:e}", c.m);
            Outcome::new(
                within(c.m, *bound),
                summary,
                json!({ "certificate": c, "left_m": mf, "right_m": mg, "operator_norm": op_norm,
                        "realized_constant": realized, "bound": bound }),
            )
        }
        Command::Compose { outer, inner, norm, bound, out_jet } => {
            let fam = family(norm)?;
            let c = compose(&LipJet::read(outer)?, &LipJet::read(inner)?, &fam, &fam)?;
            write_jet(&c.jet, out_jet)?;
            let summary = format!("M = {:e}, realized constant {:e}", c.certificate.m, c.realized_constant);
            Outcome::new(within(c.certificate.m, *bound), summary, json!({ "composition": c, "bound": bound }))
        }
        Command::Estimate { jet, x0, gamma_prime, delta, norm } => {
            let j = LipJet::read(jet)?;
            let idx = j
                .find_point(x0)
                .ok_or_else(|| LipError::invalid(format!("x0 = {x0:?} is not a point of the jet")))?;
            let e = localize_vanishing(&j, idx, *gamma_prime, *delta, &family(norm)?)?;
            let summary = format!("local norm {:e} ≤ {:e}: {}", e.local, e.bound, e.holds);
            Outcome::new(e.holds, summary, &e)
        }
        Command::Invert { problem, targets, tol, ball_samples, jet } => {
            let file: ProblemFile = read_json(problem, "problem file")?;
            let prob = InverseProblem::from_file(&file)?;
            let ys = parse_points(targets)?;
            let solutions = ys
                .iter()
                .map(|y| solve_local_inverse(&prob, y, *tol))
                .collect::<Result<Vec<_>>>()?;
            let ball = (*ball_samples > 0).then(|| prob.check_inner_ball(*ball_samples)).transpose()?;
            let inverse = if *jet {
                let ij = inverse_jet(&prob, ys.clone(), *tol)?;
                let c = certify(&ij.jet, &NormFamily::ellinf())?;
                Some(json!({ "inverse": ij, "certificate": c }))
            } else {
                None
            };
            let contraction_ok = solutions.iter().all(|s| s.max_contraction <= 0.5);
            let passed = contraction_ok && ball.as_ref().is_none_or(|b| b.passed);
            let worst = solutions.iter().map(|s| s.residual).fold(0.0, f64::max);
            let summary = format!("{} targets solved, worst residual {worst:e}, radius {:e}", ys.len(), prob.radius());
            Outcome::new(
                passed,
                summary,
                json!({ "radius": prob.radius(), "alpha": prob.alpha(), "solutions": solutions,
                        "inner_ball": ball, "inverse_jet": inverse }),
            )
        }
        Command::Rank { jet, map, shape, x0, rows, cols, m1, m2 } => {
            if let Some(path) = map {
                let f: MapFile = read_json(path, "map file")?;
                let comps = f.phi.iter().map(ExprSpec::to_expr).collect::<Result<Vec<_>>>()?;
                let phi = ExprMap::new(f.x0.len(), comps)?;
                let d = constant_rank_decompose(&phi, &f.x0, &f.rows, &f.cols, f.gamma, DecomposeOptions::default())?;
                let summary = format!(
                    "rank {} normal form error {:e} on {} samples",
                    d.rank(),
                    d.report.max_error,
                    d.report.samples_used
                );
                return Outcome::new(d.report.passed, summary, &d.report);
            }
            let path = jet.as_ref().ok_or_else(|| LipError::invalid("rank needs --jet or --map"))?;
            let j = LipJet::read(path)?;
            let (m, p) = match shape {
                Some(s) => {
                    let (a, b) = s
                        .split_once('x')
                        .ok_or_else(|| LipError::Parse(format!("shape '{s}' should read ROWSxCOLS")))?;
                    let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| LipError::Parse(format!("shape '{s}': {e}")));
                    (parse(a)?, parse(b)?)
                }
                None => {
                    let n = (j.dim_out() as f64).sqrt().round() as usize;
                    (n, n)
                }
            };
            let m2 = m2.ok_or_else(|| LipError::invalid("the perturbation check needs --m2"))?;
            let c = perturbation_rank_check(&j, (m, p), *x0, rows, cols, *m1, m2)?;
            let summary = format!(
                "δ = {:e}, {} points checked, max deviation {:e} vs {:e}",
                c.delta, c.points_checked, c.max_deviation, c.allowed_deviation
            );
            Outcome::new(c.passed, summary, &c)
        }
        Command::Flow { field, t, check, x0, r, tol, pairs, csv } => {
            let file: FieldFile = read_json(field, "field file")?;
            let a = VectorField::from_file(&file)?;
            let x0 = if x0.is_empty() {
                a.bounds().iter().map(|[lo, hi]| 0.5 * (lo + hi)).collect()
            } else {
                x0.clone()
            };
            if x0.len() != a.dim() {
                return Err(LipError::dims(format!("x0 has {} coordinates, the field lives on R^{}", x0.len(), a.dim())));
            }
            flow_command(&a, &x0, *t, *r, *tol, *check, *pairs, csv.as_deref(), seed)
        }
        Command::CheckNorms { norm, dim, k_max, samples } => {
            let rep = verify_norm_properties(&family(norm)?, *dim, *k_max, *samples, seed)?;
            let failed: Vec<&str> = rep.checks.iter().filter(|c| !c.passed).map(|c| c.property.as_str()).collect();
            let summary = if failed.is_empty() {
                format!("{} properties verified", rep.checks.len())
            } else {
                format!("failed: {}", failed.join(", "))
            };
            Outcome::new(rep.all_passed(), summary, &rep)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn flow_command(
    a: &VectorField,
    x0: &[f64],
    t: f64,
    r: f64,
    tol: f64,
    check: FlowCheck,
    pairs: usize,
    csv: Option<&Path>,
    seed: u64,
) -> Result<Outcome> {
    if !(t > 0.0 && r > 0.0) {
        return Err(LipError::invalid("need T > 0 and r > 0"));
    }
    let norms = a.measure(41)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let point = |rng: &mut ChaCha8Rng| -> Vec<f64> { x0.iter().map(|c| c + rng.gen_range(-r..=r)).collect() };
    let want = |c: FlowCheck| check == c || check == FlowCheck::All;
    let mut results = serde_json::Map::new();
    let mut passed = true;
    let mut lines = Vec::new();
    if want(FlowCheck::SpaceLipschitz) {
        let ps: Vec<(Vec<f64>, Vec<f64>)> = (0..pairs).map(|_| (point(&mut rng), point(&mut rng))).collect();
        let c = flow_space_lipschitz_check(a, &norms, &[t, -t], &ps, tol)?;
        passed &= c.passed;
        lines.push(format!("space-lipschitz margin {:e}", c.margin));
        results.insert("space_lipschitz".into(), serde_json::to_value(&c)?);
    }
    if want(FlowCheck::TimeSpace) {
        let ss: Vec<(f64, Vec<f64>)> = (0..pairs).map(|_| (rng.gen_range(-t..=t), point(&mut rng))).collect();
        let c = time_space_check(a, &norms, &ss, tol)?;
        passed &= c.passed;
        lines.push(format!("time-space margin {:e}", c.margin));
        results.insert("time_space".into(), serde_json::to_value(&c)?);
    }
    if want(FlowCheck::Confinement) {
        let c = confinement_check(a, &norms, x0, r, t, 5, tol)?;
        passed &= c.passed;
        lines.push(format!("confinement margin {:e}", c.margin));
        results.insert("confinement".into(), serde_json::to_value(&c)?);
    }
    if want(FlowCheck::Jacobian) {
        let js = flow_jacobian(a, x0, &[t, -t], tol)?;
        let ok = js.iter().all(|s| {
            (0..a.dim()).all(|i| {
                let col: Vec<f64> = (0..a.dim()).map(|r| s.jacobian.get(r, i)).collect();
                crate::tensor::NormKind::LInf.lq(&col) <= (s.t.abs() * norms.lip1).exp() + 10.0 * tol
            })
        });
        passed &= ok;
        lines.push(format!("jacobian columns within e^(|t| Lip1): {ok}"));
        results.insert("jacobian".into(), json!({ "samples": js, "passed": ok }));
    }
    if want(FlowCheck::Jet) && a.gamma() > 1.0 {
        let fj = flow_jet(a, x0, r, t, FlowGrid::default(), tol)?;
        let ok = fj.checks.iter().all(|c| c.passed);
        passed &= ok;
        lines.push(format!("flow jet M = {:e}", fj.certificate.m));
        results.insert("jet".into(), serde_json::to_value(&fj)?);
    }
    results.insert("norms".into(), serde_json::to_value(norms)?);
    if let Some(path) = csv {
        let tr = integrate(a.map(), x0, t, tol)?;
        tr.write_csv(std::fs::File::create(path)?)?;
        results.insert("trajectory_steps".into(), json!(tr.accepted));
    }
    Outcome::new(passed, lines.join("; "), Value::Object(results))
}

fn configure_threads() {
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok()) {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

fn emit(report: &Report, path: &Option<PathBuf>) -> std::io::Result<()> {
    let text = serde_json::to_string_pretty(report).map_err(std::io::Error::other)? + "\n";
    match path {
        Some(p) => {
            std::fs::write(p, text)?;
            println!("{}: {}", report.command, report.summary);
        }
        None => print!("{text}"),
    }
    Ok(())
}

/// Runs the CLI on `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    configure_threads();
    let name = cli.command.name();
    let (status, summary, result, error) = match dispatch(&cli.command, cli.seed) {
        Ok(o) if o.passed => (Status::Ok, o.summary, o.result, None),
        Ok(o) => (Status::CertificationFailure, o.summary, o.result, None),
        Err(e) if e.is_certification_failure() => (Status::CertificationFailure, e.to_string(), Value::Null, Some(e.to_string())),
        Err(e) => {
            eprintln!("error: {e}");
            (Status::InputError, e.to_string(), Value::Null, Some(e.to_string()))
        }
    };
    let report = Report {
        command: name,
        seed: cli.seed,
        status,
        summary: &summary,
        result,
        error,
    };
    if let Err(e) = emit(&report, &cli.report) {
        eprintln!("error: cannot write report: {e}");
        return 1;
    }
    match status {
        Status::Ok => 0,
        Status::InputError => 1,
        Status::CertificationFailure => 2,
    }
}
