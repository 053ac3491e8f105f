//! `nonlocal-ist`: evaluate closed-form solutions, run direct scattering,
//! reconstruct from scattering data, evaluate trace formulas and verify
//! fields against their equations.
//!
//! Exit codes: 0 on success, 2 when a verification check fails, 1 on usage
//! or domain errors.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde_json::{json, Value};

use nonlocal_ist::closed_form::{make, Family, FieldSolution, SolutionId};
use nonlocal_ist::direct_scattering::{scattering_coeffs, PotentialSample};
use nonlocal_ist::inverse_reflectionless::Reconstructor;
use nonlocal_ist::model_config::{parse_real, EquationKind, EquationSpec, SymmetryCase};
use nonlocal_ist::scattering_data::{unit_norming, ScatteringData};
use nonlocal_ist::spectral_plane::{CutTopology, SpectralPoint};
use nonlocal_ist::verify::{self, Field, Grid, Reconstructed, VerificationReport};
use nonlocal_ist::IstError;

#[derive(Parser)]
#[command(name = "nonlocal-ist", version, about = "Inverse scattering for nonlocal reverse space-time Gordon and NLS equations")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sample a closed-form solution q (and s for the Gordon equations) on a grid.
    Eval(EvalArgs),
    /// Sample a, ā, b, b̄ on the continuous spectrum and locate eigenvalues.
    Scatter(ScatterArgs),
    /// Rebuild q (and s) on a grid from reflectionless scattering data.
    Reconstruct(ReconstructArgs),
    /// Evaluate a′(z_j), ā′(z̄_j) from the trace formula and check the product constraint.
    Trace(TraceArgs),
    /// Certify a closed-form or reconstructed field against its equation.
    Verify(VerifyArgs),
    /// Closed form → direct scattering → reconstruction, reporting the deviation.
    Roundtrip(RoundtripArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct OutArgs {
    /// Output file; stdout when absent. A `.meta.json` sidecar is written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Args)]
struct SolutionArgs {
    /// Solution family slug, e.g. sinh-dark1, nls-case2-two.
    #[arg(long)]
    family: Option<String>,
    /// Equation config file (key = value or JSON); supplies q0, θ₊, α and β.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "2", value_parser = real)]
    q0: f64,
    #[arg(long = "theta-plus", default_value = "pi/3", value_parser = real, allow_hyphen_values = true)]
    theta_plus: f64,
    #[arg(long, default_value = "1", value_parser = real, allow_hyphen_values = true)]
    alpha: f64,
    /// Spatial-phase rate; used by the spatial boundary-condition families.
    #[arg(long, default_value = "0.5", value_parser = real, allow_hyphen_values = true)]
    beta: f64,
    /// Second eigenvalue modulus of the two-soliton families.
    #[arg(long, default_value = "4", value_parser = real)]
    q1: f64,
    #[arg(long, default_value_t = 1, allow_hyphen_values = true)]
    d1: i8,
    #[arg(long, default_value_t = -1, allow_hyphen_values = true)]
    d2: i8,
}

#[derive(Args)]
struct GridArgs {
    /// `xlo:xhi:dx,tlo:thi:dt`
    #[arg(long, default_value = "-6:6:0.1,-4:4:0.1", allow_hyphen_values = true)]
    grid: String,
    /// Finite-difference step.
    #[arg(long, default_value = "1e-3", value_parser = real)]
    h: f64,
    /// Points closer than this to a singular set are excluded.
    #[arg(long, default_value = "0.1", value_parser = real)]
    margin: f64,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    sol: SolutionArgs,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct ScatterArgs {
    /// Without a family the constant background of the configured equation is scattered.
    #[command(flatten)]
    sol: SolutionArgs,
    /// Real-axis samples `lo:hi:step`.
    #[arg(long, default_value = "-10:10:0.05", allow_hyphen_values = true)]
    xi: String,
    /// Samples on the circle |z| = q0 (imaginary-cut cases only).
    #[arg(long, default_value_t = 64)]
    circle: usize,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct DataSpecArgs {
    /// Scattering data JSON.
    #[arg(long)]
    data: PathBuf,
    /// Equation config file; otherwise built from --kind, --alpha and --beta.
    #[arg(long)]
    config: Option<PathBuf>,
    /// sinh-gordon, sine-gordon or rst-nls.
    #[arg(long)]
    kind: Option<String>,
    /// Required for the Gordon equations; fixed by the background for RST-NLS.
    #[arg(long, value_parser = real, allow_hyphen_values = true)]
    alpha: Option<f64>,
    #[arg(long, default_value = "0", value_parser = real, allow_hyphen_values = true)]
    beta: f64,
}

#[derive(Args)]
struct ReconstructArgs {
    #[command(flatten)]
    src: DataSpecArgs,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct TraceArgs {
    /// sinh0, sinhpi, sinepi or sine0.
    #[arg(long)]
    case: String,
    /// Upper-region eigenvalues separated by `;`, each `r@phase` or `a+bi`.
    #[arg(long, allow_hyphen_values = true)]
    eigs: String,
    #[arg(long = "theta-plus", value_parser = real, allow_hyphen_values = true)]
    theta_plus: f64,
    /// Background amplitude; defaults to |z₁|.
    #[arg(long, value_parser = real)]
    q0: Option<f64>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    sol: SolutionArgs,
    /// Verify the reconstruction from this scattering data JSON instead of a closed form.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Equation kind for --data.
    #[arg(long)]
    kind: Option<String>,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct RoundtripArgs {
    #[command(flatten)]
    sol: SolutionArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// Largest accepted |q_reconstructed − q_closed|.
    #[arg(long, default_value = "1e-5", value_parser = real)]
    tol: f64,
    #[command(flatten)]
    out: OutArgs,
}

fn real(s: &str) -> std::result::Result<f64, String> {
    parse_real(s)
}

fn pair(z: C64) -> Value {
    json!([z.re, z.im])
}

/// Shortest round-trip text, in exponent form for very small or large magnitudes.
fn num(v: f64) -> String {
    let m = v.abs();
    if m != 0.0 && m.is_finite() && !(1e-4..1e16).contains(&m) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn axis(spec: &str, what: &str) -> Result<(f64, f64, f64)> {
    let parts: Vec<&str> = spec.split(':').collect();
    let [lo, hi, step] = parts.as_slice() else {
        bail!("{what} axis '{spec}' is not lo:hi:step");
    };
    let p = |s: &str| parse_real(s).map_err(|e| anyhow!("{what} axis: {e}"));
    let (lo, hi, step) = (p(lo)?, p(hi)?, p(step)?);
    if !(hi > lo && step > 0.0) {
        bail!("{what} axis '{spec}' needs lo < hi and step > 0");
    }
    Ok((lo, hi, step))
}

fn parse_grid(g: &GridArgs) -> Result<Grid> {
    let (x, t) = g.grid.split_once(',').ok_or_else(|| anyhow!("grid '{}' is not x-axis,t-axis", g.grid))?;
    let (x_lo, x_hi, dx) = axis(x, "x")?;
    let (t_lo, t_hi, dt) = axis(t, "t")?;
    let grid = Grid { x_lo, x_hi, t_lo, t_hi, dx, dt, hx: g.h, ht: g.h, exclusion_margin: g.margin };
    grid.validate()?;
    Ok(grid)
}

fn grid_meta(g: &GridArgs) -> Value {
    json!({ "grid": g.grid, "h": g.h, "margin": g.margin })
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn spec_from_config(path: &Path) -> Result<EquationSpec> {
    Ok(EquationSpec::from_config_str(&read(path)?)?)
}

impl SolutionArgs {
    fn id(&self) -> Result<SolutionId> {
        let slug = self.family.as_deref().ok_or_else(|| anyhow!("--family is required"))?;
        let family = Family::from_slug(slug)?;
        if family.is_two_soliton() {
            for d in [self.d1, self.d2] {
                if d.abs() != 1 {
                    bail!("--d1 and --d2 must be 1 or -1");
                }
            }
            Ok(SolutionId::two(family, self.d1, self.d2, self.q1))
        } else {
            Ok(SolutionId::one(family))
        }
    }

    fn spec_for(&self, id: &SolutionId) -> Result<EquationSpec> {
        let (q0, th, al, be) = match &self.config {
            Some(p) => {
                let c = spec_from_config(p)?;
                if c.kind != id.family.kind() {
                    bail!("config equation {} does not match family {}", c.kind.name(), id.family.slug());
                }
                (c.q0, c.theta_plus, c.alpha, c.beta)
            }
            None => (self.q0, self.theta_plus, self.alpha, self.beta),
        };
        let spec = id.spec(q0, th, al, be);
        spec.validate()?;
        Ok(spec)
    }

    fn solution(&self) -> Result<(SolutionId, EquationSpec, FieldSolution)> {
        let id = self.id()?;
        let spec = self.spec_for(&id)?;
        let sol = make(&id, &spec)?;
        Ok((id, spec, sol))
    }
}

fn parse_kind(s: &str) -> Result<EquationKind> {
    Ok(serde_json::from_value(Value::String(s.trim().to_string()))
        .map_err(|_| anyhow!("unknown kind '{s}' (sinh-gordon, sine-gordon, rst-nls)"))?)
}

/// The equation whose symmetry case, q0 and θ₊ are those of the data.
fn spec_for_data(data: &ScatteringData, kind: EquationKind, alpha: Option<f64>, beta: f64) -> Result<EquationSpec> {
    let case = data.case;
    let alpha = match (kind, alpha) {
        (EquationKind::RstNls, _) => EquationSpec::rst_nls(case.sigma(), data.q0, data.theta_plus, case.phase_sum()).alpha,
        (_, Some(a)) => a,
        (_, None) => bail!("--alpha is required for the Gordon equations"),
    };
    let spec = EquationSpec {
        kind,
        sigma: case.sigma(),
        q0: data.q0,
        theta_plus: data.theta_plus,
        theta_minus: case.theta_minus(data.theta_plus),
        alpha,
        beta,
    };
    spec.validate()?;
    Ok(spec)
}

fn load_reconstruction(src: &DataSpecArgs) -> Result<(ScatteringData, EquationSpec, Reconstructor)> {
    let data = ScatteringData::from_json(&read(&src.data)?)?;
    let spec = match (&src.config, &src.kind) {
        (Some(p), _) => spec_from_config(p)?,
        (None, Some(k)) => spec_for_data(&data, parse_kind(k)?, src.alpha, src.beta)?,
        (None, None) => bail!("reconstruction needs --config or --kind"),
    };
    let rec = Reconstructor::new(&data, &spec)?;
    Ok((data, spec, rec))
}

fn csv_text(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| anyhow!("{e}"))?)?)
}

/// Body to --out (with a metadata sidecar) or stdout.
fn emit(out: &Option<PathBuf>, body: &str, meta: Value) -> Result<()> {
    match out {
        Some(path) => {
            fs::write(path, body).with_context(|| format!("writing {}", path.display()))?;
            let side = path.with_extension("meta.json");
            let text = serde_json::to_string_pretty(&meta)? + "\n";
            fs::write(&side, text).with_context(|| format!("writing {}", side.display()))?;
        }
        None => std::io::stdout().write_all(body.as_bytes())?,
    }
    Ok(())
}

fn json_text(v: &Value) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

/// x, t, q and s on every grid point, row-major in t.
fn field_table(f: &dyn Field, grid: &Grid) -> Result<Vec<(f64, f64, C64, Option<C64>)>> {
    let xs = grid.xs();
    let rows: Vec<Result<Vec<(f64, f64, C64, Option<C64>)>>> = grid
        .ts()
        .par_iter()
        .map(|&t| {
            let s = verify::s_samples(f, &xs, t, grid.exclusion_margin)?;
            Ok(xs
                .iter()
                .zip(s)
                .map(|(&x, s)| (x, t, f.q(x, t).unwrap_or(C64::new(f64::NAN, f64::NAN)), s))
                .collect())
        })
        .collect();
    let mut out = Vec::new();
    for r in rows {
        out.extend(r?);
    }
    Ok(out)
}

fn write_field(table: &[(f64, f64, C64, Option<C64>)], out: &OutArgs, meta: Value) -> Result<()> {
    let body = match out.format {
        Format::Csv => csv_text(
            &["x", "t", "re_q", "im_q", "abs_q", "re_s", "im_s"],
            table.iter().map(|&(x, t, q, s)| {
                vec![num(x), num(t), num(q.re), num(q.im), num(q.norm()), opt_num(s.map(|s| s.re)), opt_num(s.map(|s| s.im))]
            }),
        )?,
        Format::Json => json_text(&json!({
            "x": table.iter().map(|p| p.0).collect::<Vec<_>>(),
            "t": table.iter().map(|p| p.1).collect::<Vec<_>>(),
            "q": table.iter().map(|p| pair(p.2)).collect::<Vec<_>>(),
            "s": table.iter().map(|p| p.3.map_or(Value::Null, pair)).collect::<Vec<_>>(),
        }))?,
    };
    emit(&out.out, &body, meta)
}

fn cmd_eval(a: &EvalArgs) -> Result<bool> {
    let (id, spec, sol) = a.sol.solution()?;
    let grid = parse_grid(&a.grid)?;
    let table = field_table(&sol, &grid)?;
    let s_source = if !spec.kind.is_gordon() {
        "none"
    } else if sol.has_closed_s() {
        "closed form"
    } else {
        "quadrature"
    };
    let meta = json!({
        "verb": "eval",
        "solution": id,
        "spec": spec,
        "grid": grid_meta(&a.grid),
        "points": table.len(),
        "s": s_source,
    });
    write_field(&table, &a.out, meta)?;
    Ok(true)
}

struct Sample {
    contour: &'static str,
    z: C64,
    a: C64,
    abar: C64,
    b: C64,
    bbar: C64,
    unitarity: f64,
}

fn cmd_scatter(a: &ScatterArgs) -> Result<bool> {
    let (label, p) = match &a.sol.family {
        Some(_) => {
            let (id, _, sol) = a.sol.solution()?;
            (json!(id), PotentialSample::from_solution(&sol)?)
        }
        None => {
            let path = a.sol.config.as_ref().ok_or_else(|| anyhow!("scatter needs --family or --config"))?;
            (json!("background"), PotentialSample::uniform_background(spec_from_config(path)?, 20.0)?)
        }
    };
    let q0 = p.spec.q0;
    let (lo, hi, step) = axis(&a.xi, "xi")?;
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    let mut pts: Vec<(&'static str, C64)> = (0..=n).map(|i| ("real", C64::from(lo + i as f64 * step))).collect();
    if p.topology == CutTopology::ImaginaryCut {
        let m = a.circle.max(1) as f64;
        pts.extend((0..a.circle).map(|k| ("circle", C64::from_polar(q0, std::f64::consts::TAU * (k as f64 + 0.5) / m))));
    }
    let results: Vec<Option<Sample>> = pts
        .par_iter()
        .map(|&(contour, z)| {
            let zp = SpectralPoint::new(z, q0, p.topology).ok()?;
            let w = scattering_coeffs(&p, &zp, 0.0).ok()?;
            Some(Sample { contour, z, a: w.a, abar: w.abar, b: w.b, bbar: w.bbar, unitarity: w.unitarity_defect })
        })
        .collect();
    let skipped = results.iter().filter(|r| r.is_none()).count();
    let samples: Vec<Sample> = results.into_iter().flatten().collect();
    let data = ScatteringData::from_potential(&p)?;
    let data_json: Value = serde_json::from_str(&data.to_json()?)?;
    for z in &data.zeros {
        eprintln!("eigenvalue {} {:+}i", z.re, z.im);
    }
    if skipped > 0 {
        eprintln!("{skipped} contour point(s) skipped at branch points or integrator failures");
    }
    let body = match a.out.format {
        Format::Csv => csv_text(
            &["contour", "re_z", "im_z", "re_a", "im_a", "re_abar", "im_abar", "re_b", "im_b", "re_bbar", "im_bbar", "unitarity"],
            samples.iter().map(|s| {
                vec![
                    s.contour.to_string(),
                    num(s.z.re),
                    num(s.z.im),
                    num(s.a.re),
                    num(s.a.im),
                    num(s.abar.re),
                    num(s.abar.im),
                    num(s.b.re),
                    num(s.b.im),
                    num(s.bbar.re),
                    num(s.bbar.im),
                    num(s.unitarity),
                ]
            }),
        )?,
        Format::Json => json_text(&json!({
            "samples": samples.iter().map(|s| json!({
                "contour": s.contour,
                "z": pair(s.z),
                "a": pair(s.a),
                "abar": pair(s.abar),
                "b": pair(s.b),
                "bbar": pair(s.bbar),
                "unitarity": s.unitarity,
            })).collect::<Vec<_>>(),
            "scattering_data": data_json,
        }))?,
    };
    let meta = json!({
        "verb": "scatter",
        "potential": label,
        "spec": p.spec,
        "xi": a.xi,
        "circle": if p.topology == CutTopology::ImaginaryCut { a.circle } else { 0 },
        "skipped": skipped,
        "scattering_data": data_json,
    });
    emit(&a.out.out, &body, meta)?;
    Ok(true)
}

fn cmd_reconstruct(a: &ReconstructArgs) -> Result<bool> {
    let (data, spec, rec) = load_reconstruction(&a.src)?;
    let grid = parse_grid(&a.grid)?;
    let field = Reconstructed { rec, sets: Vec::new(), label: "reconstruction".into() };
    let table = field_table(&field, &grid)?;
    let meta = json!({
        "verb": "reconstruct",
        "data": a.src.data.display().to_string(),
        "spec": spec,
        "eigenvalues": data.zeros.iter().map(|&z| pair(z)).collect::<Vec<_>>(),
        "grid": grid_meta(&a.grid),
        "points": table.len(),
    });
    write_field(&table, &a.out, meta)?;
    Ok(true)
}

/// `r@phase` or a Cartesian literal such as `-0.5+2i`.
fn parse_eig(s: &str) -> Result<C64> {
    let s = s.trim();
    if let Some((r, ph)) = s.split_once('@') {
        let r = parse_real(r).map_err(|e| anyhow!("eigenvalue '{s}': {e}"))?;
        let ph = parse_real(ph).map_err(|e| anyhow!("eigenvalue '{s}': {e}"))?;
        return Ok(C64::from_polar(r, ph));
    }
    s.replace(' ', "").parse::<C64>().map_err(|_| anyhow!("eigenvalue '{s}' is neither r@phase nor a+bi"))
}

fn cmd_trace(a: &TraceArgs) -> Result<bool> {
    let case = SymmetryCase::parse(&a.case)?;
    let zeros = a.eigs.split(';').filter(|s| !s.trim().is_empty()).map(parse_eig).collect::<Result<Vec<_>>>()?;
    let first = zeros.first().ok_or_else(|| anyhow!("--eigs lists no eigenvalue"))?;
    let q0 = a.q0.unwrap_or(first.norm());
    let b = vec![unit_norming(case); zeros.len()];
    let data = ScatteringData::new(case, q0, a.theta_plus, zeros, b)?;
    let report = match data.validate() {
        Ok(r) => r,
        Err(IstError::ConstraintViolated(d)) => {
            eprintln!("product constraint violated: relative defect {d:e} (no admissible trace formula)");
            return Ok(false);
        }
        Err(e) => return Err(e.into()),
    };
    let ap = data.a_primes()?;
    let abp = data.abar_primes()?;
    let (sign, defect) = (report.sign, report.defect);
    let body = match a.format {
        Format::Csv => {
            let rows: Vec<Vec<String>> = (0..data.len())
                .map(|j| {
                    let (z, zb) = (data.zeros[j], data.zeros_bar[j]);
                    vec![
                        (j + 1).to_string(),
                        num(z.re),
                        num(z.im),
                        num(ap[j].re),
                        num(ap[j].im),
                        num(zb.re),
                        num(zb.im),
                        num(abp[j].re),
                        num(abp[j].im),
                    ]
                })
                .collect();
            let mut t = csv_text(
                &["j", "re_z", "im_z", "re_a_prime", "im_a_prime", "re_zbar", "im_zbar", "re_abar_prime", "im_abar_prime"],
                rows,
            )?;
            t.push_str(&format!("# constraint sign {sign:+} defect {defect:e}\n"));
            t
        }
        Format::Json => json_text(&json!({
            "case": case.name(),
            "q0": q0,
            "theta_plus": data.theta_plus,
            "zeros": data.zeros.iter().map(|&z| pair(z)).collect::<Vec<_>>(),
            "zeros_bar": data.zeros_bar.iter().map(|&z| pair(z)).collect::<Vec<_>>(),
            "a_prime": ap.iter().map(|&z| pair(z)).collect::<Vec<_>>(),
            "abar_prime": abp.iter().map(|&z| pair(z)).collect::<Vec<_>>(),
            "constraint": { "sign": sign, "defect": defect },
        }))?,
    };
    std::io::stdout().write_all(body.as_bytes())?;
    Ok(true)
}

fn report_body(r: &VerificationReport, format: Format) -> Result<String> {
    match format {
        Format::Csv => csv_text(
            &["check", "value", "tol", "pass"],
            r.checks.iter().map(|c| vec![c.name.clone(), num(c.value), num(c.tol), c.pass.to_string()]),
        ),
        Format::Json => Ok(r.to_json() + "\n"),
    }
}

fn cmd_verify(a: &VerifyArgs) -> Result<bool> {
    let grid = parse_grid(&a.grid)?;
    let (report, source) = match &a.data {
        Some(path) => {
            let src = DataSpecArgs {
                data: path.clone(),
                config: a.sol.config.clone(),
                kind: a.kind.clone(),
                alpha: Some(a.sol.alpha),
                beta: a.sol.beta,
            };
            let (_, _, rec) = load_reconstruction(&src)?;
            let f = Reconstructed { rec, sets: Vec::new(), label: "reconstruction".into() };
            (verify::verify_field(&f, &grid)?, json!(path.display().to_string()))
        }
        None => {
            let (id, _, sol) = a.sol.solution()?;
            (verify::verify_solution(&sol, &grid)?, json!(id))
        }
    };
    eprint!("{}", report.table());
    eprintln!("{}", if report.pass() { "PASS" } else { "FAIL" });
    let meta = json!({ "verb": "verify", "source": source, "grid": grid_meta(&a.grid), "pass": report.pass() });
    emit(&a.out.out, &report_body(&report, a.out.format)?, meta)?;
    Ok(report.pass())
}

fn cmd_roundtrip(a: &RoundtripArgs) -> Result<bool> {
    let (id, spec, sol) = a.sol.solution()?;
    let grid = parse_grid(&a.grid)?;
    let p = PotentialSample::from_solution(&sol)?;
    let data = ScatteringData::from_potential(&p)?;
    let rec = Reconstructor::new(&data, &spec)?;
    let xs = grid.xs();
    let rows: Vec<Result<Vec<(f64, f64, C64, C64)>>> = grid
        .ts()
        .par_iter()
        .map(|&t| {
            xs.iter()
                .filter(|&&x| sol.singular_distance(x, t) >= grid.exclusion_margin)
                .map(|&x| Ok((x, t, sol.eval_q(x, t), rec.q(x, t)?)))
                .collect()
        })
        .collect();
    let mut table = Vec::new();
    for r in rows {
        table.extend(r?);
    }
    let dev = table.iter().map(|p| (p.3 - p.2).norm()).fold(0.0f64, f64::max);
    let ok = dev <= a.tol;
    eprintln!("{} eigenvalue(s); max |q_rec − q| = {dev:e} (tol {:e}) {}", data.len(), a.tol, if ok { "PASS" } else { "FAIL" });
    let summary = json!({
        "solution": id,
        "eigenvalues": data.zeros.iter().map(|&z| pair(z)).collect::<Vec<_>>(),
        "b": data.b.iter().map(|&z| pair(z)).collect::<Vec<_>>(),
        "max_deviation": dev,
        "tol": a.tol,
        "points": table.len(),
        "pass": ok,
    });
    let body = match a.out.format {
        Format::Csv => csv_text(
            &["x", "t", "re_q", "im_q", "re_q_rec", "im_q_rec", "abs_diff"],
            table.iter().map(|&(x, t, q, r)| vec![num(x), num(t), num(q.re), num(q.im), num(r.re), num(r.im), num((r - q).norm())]),
        )?,
        Format::Json => json_text(&summary)?,
    };
    let mut meta = summary;
    meta["verb"] = json!("roundtrip");
    meta["grid"] = grid_meta(&a.grid);
    emit(&a.out.out, &body, meta)?;
    Ok(ok)
}

fn run(cli: &Cli) -> Result<bool> {
    match &cli.cmd {
        Cmd::Eval(a) => cmd_eval(a),
        Cmd::Scatter(a) => cmd_scatter(a),
        Cmd::Reconstruct(a) => cmd_reconstruct(a),
        Cmd::Trace(a) => cmd_trace(a),
        Cmd::Verify(a) => cmd_verify(a),
        Cmd::Roundtrip(a) => cmd_roundtrip(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    nonlocal_ist::init_threads_from_env();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
