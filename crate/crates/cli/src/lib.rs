//! `zwalk` command line: each subcommand runs one pipeline stage and writes JSON or CSV.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use zwalk_core::contfrac::{self, DEFAULT_MAX_DEPTH, DEFAULT_TOL};
use zwalk_core::kmcg::{self, CONSTANT_TOL, FORCE_TOL};
use zwalk_core::polynomials::{PolynomialFamily, PotentialCoefficients};
use zwalk_core::spectral::{self, Mat2, MatrixMeasure};
use zwalk_core::{
    build_q, build_s, build_t, conjugate_family, darboux, example_spectrum, factorize, potentials, Factors, Order,
    WalkSpec, ZwalkError,
};

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VERIFY: i32 = 2;
pub const EXIT_PRECONDITION: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "zwalk", version, about = "Random walks on the integers: factorizations, Darboux transforms, spectra")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Continued-fraction limits H and H'.
    Limits {
        #[command(flatten)]
        io: Io,
        #[arg(long, default_value_t = DEFAULT_MAX_DEPTH)]
        depth: usize,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
    },
    /// Stochastic UL or LU factors on a window.
    Factorize {
        #[command(flatten)]
        io: Io,
        #[command(flatten)]
        fac: Fac,
    },
    /// Darboux transform of the walk.
    Darboux {
        #[command(flatten)]
        io: Io,
        #[command(flatten)]
        fac: Fac,
    },
    /// Coefficient tables of a polynomial family.
    Polys {
        #[command(flatten)]
        io: Io,
        #[arg(long, value_enum)]
        family: FamilyArg,
        #[arg(long, default_value_t = 10)]
        window: i64,
        /// Free parameter; required for s, t, qtilde and qhat.
        #[arg(long)]
        param: Option<f64>,
    },
    /// Spectral matrix of a constant or force walk.
    Spectrum {
        #[command(flatten)]
        io: Io,
        #[command(flatten)]
        sampling: Sampling,
    },
    /// Spectral matrix of a Darboux transform.
    SpectrumDarboux {
        #[command(flatten)]
        io: Io,
        #[command(flatten)]
        fac: Fac,
        #[command(flatten)]
        sampling: Sampling,
    },
    /// Karlin-McGregor integrals against exact matrix powers.
    Verify {
        #[command(flatten)]
        io: Io,
        #[command(flatten)]
        check: Check,
        /// Verify the Darboux transform at this parameter instead of the walk itself.
        #[arg(long)]
        param: Option<f64>,
        #[arg(long, value_enum, default_value_t = OrderArg::Ul)]
        order: OrderArg,
    },
    /// Monte Carlo estimate of the n-step distribution.
    Simulate {
        #[command(flatten)]
        io: Io,
        #[arg(long, default_value_t = 0)]
        start: i64,
        #[arg(long, default_value_t = 10)]
        steps: u32,
        #[arg(long, default_value_t = 100_000)]
        paths: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the worked examples end to end.
    ReproducePaper {
        #[arg(long, value_parser = ["4.1", "4.2"])]
        example: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        nodes: Option<usize>,
    },
}

#[derive(Args, Debug)]
struct Io {
    #[arg(long)]
    spec: PathBuf,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Quadrature nodes; ZWALK_NODES or 512 when absent.
    #[arg(long)]
    nodes: Option<usize>,
}

#[derive(Args, Debug)]
struct Fac {
    #[arg(long, value_enum)]
    order: OrderArg,
    #[arg(long)]
    param: f64,
    #[arg(long, default_value_t = 20)]
    window: i64,
}

#[derive(Args, Debug)]
struct Sampling {
    /// Density samples across the support.
    #[arg(long, default_value_t = 200)]
    samples: usize,
}

#[derive(Args, Debug)]
struct Check {
    #[arg(long, default_value_t = 5)]
    max_index: i64,
    #[arg(long, default_value_t = 10)]
    max_steps: u32,
    /// Absolute tolerance; 1e-8 for constant walks and 1e-7 otherwise when absent.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Json,
    Csv,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum OrderArg {
    Ul,
    Lu,
}

impl From<OrderArg> for Order {
    fn from(o: OrderArg) -> Order {
        match o {
            OrderArg::Ul => Order::Ul,
            OrderArg::Lu => Order::Lu,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum FamilyArg {
    Q,
    S,
    T,
    Qtilde,
    Qhat,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Math(ZwalkError),
    Verify(String),
}

impl From<ZwalkError> for Failure {
    fn from(e: ZwalkError) -> Self {
        match e {
            ZwalkError::InvalidSpec(_) => Failure::Usage(e.to_string()),
            e if e.is_precondition() => Failure::Math(e),
            e => Failure::Verify(e.to_string()),
        }
    }
}

/// Result of a subcommand: the document to write, CSV rows, a summary and pass/fail.
struct Output {
    doc: Value,
    csv: Option<String>,
    summary: String,
    pass: bool,
}

#[derive(Serialize)]
struct Provenance {
    spec_sha256: String,
    param: Option<f64>,
    window: Option<i64>,
    nodes: Option<usize>,
    version: &'static str,
}

struct Loaded {
    spec: WalkSpec,
    hash: String,
}

fn sha(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn load(path: &Path) -> Result<Loaded, Failure> {
    let bytes = std::fs::read(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
    let text = String::from_utf8(bytes.clone()).map_err(|_| Failure::Usage("spec is not UTF-8".into()))?;
    Ok(Loaded { spec: WalkSpec::from_json(&text)?, hash: sha(&bytes) })
}

fn canonical(spec: &WalkSpec) -> Loaded {
    let text = serde_json::to_string(spec).expect("specs serialize");
    Loaded { spec: spec.clone(), hash: sha(text.as_bytes()) }
}

fn nodes_or_default(n: Option<usize>) -> usize {
    n.filter(|&n| n > 0).unwrap_or_else(spectral::default_nodes)
}

fn mat(m: &Mat2) -> [[f64; 2]; 2] {
    [[m[(0, 0)], m[(0, 1)]], [m[(1, 0)], m[(1, 1)]]]
}

fn csv_mat(m: &Mat2) -> String {
    format!("{},{},{},{}", m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)])
}

const MAT_HEADER: &str = "entry_11,entry_12,entry_21,entry_22";

fn limits(spec: &WalkSpec, depth: usize, tol: f64) -> Result<Output, Failure> {
    let l = contfrac::limits(spec, tol, depth)?;
    Ok(Output {
        doc: json!({
            "H": l.h,
            "Hprime": l.h_prime,
            "converged_after": l.converged_after,
            "bracketed": l.bracketed,
        }),
        csv: Some(format!("H,Hprime\n{},{}\n", l.h, l.h_prime)),
        summary: format!("H = {}, H' = {}", l.h, l.h_prime),
        pass: true,
    })
}

fn factor_rows(f: &Factors) -> String {
    let mut out = String::from("n,x,y,s,r\n");
    let (lo, hi) = f.window();
    for n in lo..=hi {
        let (x, y, s, r) = match f {
            Factors::Ul(u) => (u.x(n), u.y(n), u.s(n), u.r(n)),
            Factors::Lu(l) => (l.x(n), l.y(n), l.s(n), l.r(n)),
        };
        let _ = writeln!(out, "{n},{x},{y},{s},{r}");
    }
    out
}

fn factorize_cmd(spec: &WalkSpec, fac: &Fac) -> Result<Output, Failure> {
    let f = factorize(spec, fac.order.into(), fac.param, fac.window)?;
    let residual = match &f {
        Factors::Ul(u) => u.residual,
        Factors::Lu(l) => l.residual,
    };
    Ok(Output {
        doc: json!({ "factors": f }),
        csv: Some(factor_rows(&f)),
        summary: format!("{:?} factors on [{}, {}], residual {:e}", f.order(), -fac.window, fac.window, residual),
        pass: true,
    })
}

fn walk_rows(spec: &WalkSpec) -> Result<String, Failure> {
    let (lo, hi) = spec.window().unwrap_or((0, -1));
    let mut out = String::from("n,a,b,c\n");
    for n in lo..=hi {
        let q = spec.coeff(n)?;
        let _ = writeln!(out, "{n},{},{},{}", q.a, q.b, q.c);
    }
    Ok(out)
}

fn darboux_cmd(spec: &WalkSpec, fac: &Fac) -> Result<Output, Failure> {
    let f = factorize(spec, fac.order.into(), fac.param, fac.window)?;
    let d = darboux(spec, &f)?;
    let (lo, hi) = d.window();
    let changed = (lo..=hi)
        .filter(|&n| {
            let (q, o) = (d.coeff(n).unwrap(), spec.coeff(n).unwrap());
            (q.a - o.a).abs().max((q.b - o.b).abs()).max((q.c - o.c).abs()) > 1e-12
        })
        .count();
    Ok(Output {
        doc: json!({ "walk": d.spec, "order": d.order, "param": d.param, "rows_changed": changed }),
        csv: Some(walk_rows(&d.spec)?),
        summary: format!("{:?} Darboux walk on [{lo}, {hi}], {changed} rows differ from the source", d.order),
        pass: true,
    })
}

fn family_rows(fam: &PolynomialFamily<f64>) -> String {
    let mut out = String::from("n,alpha,power,coefficient\n");
    for n in fam.lo..=fam.hi {
        for (alpha, p) in fam.row(n).iter().enumerate() {
            for (k, c) in p.coeffs.iter().enumerate() {
                let _ = writeln!(out, "{n},{},{k},{c}", alpha + 1);
            }
        }
    }
    out
}

fn polys_cmd(spec: &WalkSpec, family: FamilyArg, window: i64, param: Option<f64>) -> Result<Output, Failure> {
    let need = || param.ok_or_else(|| Failure::Usage(format!("--param is required for family {family:?}")));
    let fam = match family {
        FamilyArg::Q => {
            if param.is_some() {
                return Err(Failure::Usage("--param is not used by family q".into()));
            }
            build_q(spec, window)?
        }
        FamilyArg::S | FamilyArg::Qtilde => {
            let q = build_q(spec, window + 1)?;
            let Factors::Ul(u) = factorize(spec, Order::Ul, need()?, window + 2)? else { unreachable!() };
            let s = build_s(&u, &q)?;
            if family == FamilyArg::S { s } else { conjugate_family(&s)? }
        }
        FamilyArg::T | FamilyArg::Qhat => {
            let q = build_q(spec, window + 1)?;
            let Factors::Lu(l) = factorize(spec, Order::Lu, need()?, window + 2)? else { unreachable!() };
            let t = build_t(&l, &q)?;
            if family == FamilyArg::T { t } else { conjugate_family(&t)? }
        }
    };
    Ok(Output {
        summary: format!("{:?} family, rows [{}, {}]", fam.tag, fam.lo, fam.hi),
        csv: Some(family_rows(&fam)),
        doc: json!({ "family": fam }),
        pass: true,
    })
}

fn atom_json(m: &MatrixMeasure) -> Value {
    Value::Array(
        m.atoms
            .iter()
            .map(|a| json!({ "at": a.at, "order": a.order, "mass": mat(&a.effective_mass()) }))
            .collect(),
    )
}

fn spectrum_doc(m: &MatrixMeasure, samples: usize, nodes: usize) -> Result<(Value, String), Failure> {
    let (lo, hi) = m.support();
    let mut rows = format!("x,{MAT_HEADER}\n");
    let mut dens = Vec::with_capacity(samples);
    for k in 0..samples {
        let x = lo + (hi - lo) * (k as f64 + 0.5) / samples as f64;
        let d = m.density(x);
        let _ = writeln!(rows, "{x},{}", csv_mat(&d));
        dens.push(json!({ "x": x, "density": mat(&d) }));
    }
    let m0 = spectral::moment(m, 0, nodes)?.value;
    let m_inv = match spectral::moment(m, -1, nodes) {
        Ok(v) => json!(mat(&v.value)),
        Err(ZwalkError::DivergentMoment(_)) => Value::Null,
        Err(e) => return Err(e.into()),
    };
    let m_inv_regular = spectral::regular_inverse_moment(m, nodes).ok().map(|v| mat(&v));
    let recurrence = spectral::classify_recurrence(m).ok();
    Ok((
        json!({
            "support": [lo, hi],
            "exponents": [m.ac.left, m.ac.right],
            "density": dens,
            "atoms": atom_json(m),
            "moment_0": mat(&m0),
            "moment_minus_1": m_inv,
            "moment_minus_1_without_origin": m_inv_regular,
            "recurrence": recurrence,
        }),
        rows,
    ))
}

fn spectrum_cmd(spec: &WalkSpec, samples: usize, nodes: usize) -> Result<Output, Failure> {
    let m = example_spectrum(spec)?;
    let (doc, rows) = spectrum_doc(&m, samples, nodes)?;
    let (lo, hi) = m.support();
    Ok(Output {
        summary: format!("support [{lo:.6}, {hi:.6}], {} atoms", m.atoms.len()),
        doc,
        csv: Some(rows),
        pass: true,
    })
}

fn spectrum_darboux_cmd(spec: &WalkSpec, fac: &Fac, samples: usize, nodes: usize) -> Result<Output, Failure> {
    let f = factorize(spec, fac.order.into(), fac.param, fac.window)?;
    let m = spectral::darboux_spectrum(&example_spectrum(spec)?, &f, nodes)?;
    let (doc, rows) = spectrum_doc(&m, samples, nodes)?;
    let (lo, hi) = m.support();
    Ok(Output {
        summary: format!("{:?} Darboux spectrum, support [{lo:.6}, {hi:.6}], {} atoms", f.order(), m.atoms.len()),
        doc,
        csv: Some(rows),
        pass: true,
    })
}

/// Spectrum, polynomial family, potentials and walk to run Karlin-McGregor on.
pub struct Pipeline {
    pub measure: MatrixMeasure,
    pub family: PolynomialFamily<f64>,
    pub pot: PotentialCoefficients,
    pub walk: WalkSpec,
}

pub fn pipeline(spec: &WalkSpec, darboux_at: Option<(Order, f64)>, rows: i64, reach: i64, nodes: usize) -> zwalk_core::Result<Pipeline> {
    let measure = example_spectrum(spec)?;
    match darboux_at {
        None => Ok(Pipeline {
            measure,
            family: build_q(spec, rows + 1)?,
            pot: potentials(spec, rows + 1)?,
            walk: spec.clone(),
        }),
        Some((order, p)) => {
            let f = factorize(spec, order, p, reach.max(rows + 2) + 1)?;
            let d = darboux(spec, &f)?;
            let q = build_q(spec, rows + 1)?;
            let family = match &f {
                Factors::Ul(u) => conjugate_family(&build_s(u, &q)?)?,
                Factors::Lu(l) => conjugate_family(&build_t(l, &q)?)?,
            };
            Ok(Pipeline {
                measure: spectral::darboux_spectrum(&measure, &f, nodes)?,
                family,
                pot: potentials(&d.spec, rows)?,
                walk: d.spec,
            })
        }
    }
}

fn default_tol(spec: &WalkSpec) -> f64 {
    match spec {
        WalkSpec::Constant { .. } => CONSTANT_TOL,
        _ => FORCE_TOL,
    }
}

fn verify_report(spec: &WalkSpec, check: &Check, darboux_at: Option<(Order, f64)>, nodes: usize) -> Result<kmcg::VerificationReport, Failure> {
    let reach = check.max_index + check.max_steps as i64;
    let p = pipeline(spec, darboux_at, check.max_index, reach, nodes)?;
    let tol = check.tol.unwrap_or_else(|| default_tol(spec));
    Ok(kmcg::verify(&p.measure, &p.family, &p.pot, &p.walk, check.max_index, check.max_steps, tol, nodes)?)
}

fn verify_cmd(spec: &WalkSpec, check: &Check, darboux_at: Option<(Order, f64)>, nodes: usize) -> Result<Output, Failure> {
    let r = verify_report(spec, check, darboux_at, nodes)?;
    let mut rows = String::from("i,j,n,km,oracle,abs_error\n");
    for e in &r.entries {
        let _ = writeln!(rows, "{},{},{},{},{},{}", e.i, e.j, e.n, e.km, e.oracle, e.abs_error);
    }
    Ok(Output {
        summary: format!(
            "{} entries, max error {:e}, tolerance {:e}: {}",
            r.entries.len(),
            r.max_error,
            r.tol,
            if r.pass { "pass" } else { "FAIL" }
        ),
        pass: r.pass,
        csv: Some(rows),
        doc: json!({ "report": r }),
    })
}

fn simulate_cmd(spec: &WalkSpec, start: i64, steps: u32, paths: u64, seed: u64) -> Result<Output, Failure> {
    let r = kmcg::simulate(spec, start, steps, paths, seed)?;
    let mut rows = String::from("j,count,estimate,std_error\n");
    for s in &r.states {
        let _ = writeln!(rows, "{},{},{},{}", s.j, s.count, s.estimate, s.std_error);
    }
    Ok(Output {
        summary: format!("{paths} paths from {start} over {steps} steps, {} states reached", r.states.len()),
        csv: Some(rows),
        doc: json!({ "simulation": r }),
        pass: true,
    })
}

fn factor_table(f: &Factors) -> Value {
    let (lo, hi) = f.window();
    let rows: Vec<Value> = (lo..=hi)
        .map(|n| match f {
            Factors::Ul(u) => json!({ "n": n, "x": u.x(n), "y": u.y(n), "s": u.s(n), "r": u.r(n) }),
            Factors::Lu(l) => json!({ "n": n, "x": l.x(n), "y": l.y(n), "s": l.s(n), "r": l.r(n) }),
        })
        .collect();
    Value::Array(rows)
}

fn max_deviation(spec: &WalkSpec, d: &WalkSpec) -> Result<f64, Failure> {
    let (lo, hi) = d.window().unwrap_or((0, -1));
    let mut worst: f64 = 0.0;
    for n in lo..=hi {
        let (q, o) = (d.coeff(n)?, spec.coeff(n)?);
        worst = worst.max((q.a - o.a).abs()).max((q.b - o.b).abs()).max((q.c - o.c).abs());
    }
    Ok(worst)
}

fn samples(m: &MatrixMeasure, count: usize) -> Value {
    let (lo, hi) = m.support();
    Value::Array(
        (0..count)
            .map(|k| {
                let x = lo + (hi - lo) * (k as f64 + 0.5) / count as f64;
                json!({ "x": x, "density": mat(&m.density(x)) })
            })
            .collect(),
    )
}

const EXAMPLE_CHECK: Check = Check { max_index: 5, max_steps: 10, tol: None };

fn constant_example(spec: &WalkSpec, nodes: usize) -> Result<Output, Failure> {
    let WalkSpec::Constant { a, b, c } = *spec else { unreachable!() };
    let l = contfrac::limits(spec, DEFAULT_TOL, DEFAULT_MAX_DEPTH)?;
    let ul = factorize(spec, Order::Ul, l.h, 10)?;
    let mut invariance = Vec::new();
    let mut worst: f64 = 0.0;
    for (order, p) in [(Order::Ul, l.h), (Order::Ul, l.h_prime), (Order::Lu, l.h), (Order::Lu, l.h_prime)] {
        let d = darboux(spec, &factorize(spec, order, p, 16)?)?;
        let dev = max_deviation(spec, &d.spec)?;
        worst = worst.max(dev);
        invariance.push(json!({ "order": order, "param": p, "max_deviation": dev }));
    }
    let m = example_spectrum(spec)?;
    let m_inv = spectral::moment(&m, -1, nodes)?.value;
    let closed = spectral::constant_inverse_moment(a, b, c)?;
    let report = verify_report(spec, &EXAMPLE_CHECK, None, nodes)?;
    let pass = worst <= 1e-12 && (m_inv - closed).abs().max() <= 1e-9 && report.pass;
    Ok(Output {
        summary: format!(
            "constant walk: H = {:.10}, H' = {:.10}, invariance {worst:.1e}, KM max error {:.1e}: {}",
            l.h,
            l.h_prime,
            report.max_error,
            if pass { "pass" } else { "FAIL" }
        ),
        doc: json!({
            "walk": spec,
            "H": l.h,
            "Hprime": l.h_prime,
            "factors_at_H": factor_table(&ul),
            "invariance": invariance,
            "spectrum": { "support": m.support(), "atoms": atom_json(&m), "density": samples(&m, 50) },
            "moment_minus_1": { "quadrature": mat(&m_inv), "closed_form": mat(&closed) },
            "verification": report,
            "pass": pass,
        }),
        csv: None,
        pass,
    })
}

fn force_example(spec: &WalkSpec, nodes: usize) -> Result<Output, Failure> {
    let WalkSpec::Force { a, c } = *spec else { unreachable!() };
    let l = contfrac::limits(spec, DEFAULT_TOL, DEFAULT_MAX_DEPTH)?;
    let y0 = 1.0 - 2.0 * a;
    let f = factorize(spec, Order::Ul, y0, 16)?;
    let d = darboux(spec, &f)?;
    let changed: Vec<Value> = {
        let (lo, hi) = d.window();
        (lo..=hi)
            .filter_map(|n| {
                let (q, o) = (d.coeff(n).ok()?, spec.coeff(n).ok()?);
                let dev = (q.a - o.a).abs().max((q.b - o.b).abs()).max((q.c - o.c).abs());
                (dev > 1e-12).then(|| json!({ "n": n, "before": o, "after": q }))
            })
            .collect()
    };
    let m = example_spectrum(spec)?;
    // atoms at 0 excluded, as in the Geronimus step
    let m_inv = spectral::regular_inverse_moment(&m, nodes)?;
    let closed = spectral::force_inverse_moment(a, c).ok();
    let t = spectral::darboux_spectrum(&m, &f, nodes)?;
    let mut transformed = json!({ "support": t.support(), "atoms": atom_json(&t), "density": samples(&t, 50) });
    let mut pass = changed.len() == 1;
    if (a + c - 0.5).abs() < 1e-15 {
        let e = spectral::half_force_expansion(a)?;
        let (lo, hi) = t.support();
        let dens = spectral::grid_distance(lo, hi, 200, |x| t.density(x), |x| e.density(x));
        let jump = (t.point_mass_at(1.0) - e.jump).abs().max();
        pass &= dens <= 1e-9 && jump <= 1e-9;
        transformed["closed_form"] = json!({ "jump_at_1": mat(&e.jump), "density_distance": dens, "jump_distance": jump });
    }
    let original = verify_report(spec, &EXAMPLE_CHECK, None, nodes)?;
    let transformed_report = verify_report(spec, &EXAMPLE_CHECK, Some((Order::Ul, y0)), nodes)?;
    pass &= original.pass && transformed_report.pass;
    Ok(Output {
        summary: format!(
            "force walk: H = {:.10}, H' = {:.10}, {} row(s) changed at y0 = {y0}, KM max errors {:.1e} / {:.1e}: {}",
            l.h,
            l.h_prime,
            changed.len(),
            original.max_error,
            transformed_report.max_error,
            if pass { "pass" } else { "FAIL" }
        ),
        doc: json!({
            "walk": spec,
            "H": l.h,
            "Hprime": l.h_prime,
            "y0": y0,
            "factors": factor_table(&f),
            "darboux_changes": changed,
            "spectrum": { "support": m.support(), "atoms": atom_json(&m), "density": samples(&m, 50) },
            "moment_minus_1": { "quadrature": mat(&m_inv), "closed_form": closed.as_ref().map(mat) },
            "darboux_spectrum": transformed,
            "verification": original,
            "darboux_verification": transformed_report,
            "pass": pass,
        }),
        csv: None,
        pass,
    })
}

fn write_out(out: &Option<PathBuf>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn emit(mut o: Output, prov: Provenance, out: &Option<PathBuf>, format: Format) -> Result<bool, Failure> {
    let text = match format {
        Format::Json => {
            o.doc["provenance"] = serde_json::to_value(&prov).expect("provenance serializes");
            let mut s = serde_json::to_string_pretty(&o.doc).expect("output serializes");
            s.push('\n');
            s
        }
        Format::Csv => o.csv.take().ok_or_else(|| Failure::Usage("this subcommand has no CSV form".into()))?,
    };
    write_out(out, &text)?;
    eprintln!("zwalk: {}", o.summary);
    Ok(o.pass)
}

fn prov(hash: String, param: Option<f64>, window: Option<i64>, nodes: Option<usize>) -> Provenance {
    Provenance { spec_sha256: hash, param, window, nodes, version: env!("CARGO_PKG_VERSION") }
}

fn dispatch(cmd: Command) -> Result<bool, Failure> {
    match cmd {
        Command::Limits { io, depth, tol } => {
            let l = load(&io.spec)?;
            emit(limits(&l.spec, depth, tol)?, prov(l.hash, None, None, None), &io.out, io.format)
        }
        Command::Factorize { io, fac } => {
            let l = load(&io.spec)?;
            let o = factorize_cmd(&l.spec, &fac)?;
            emit(o, prov(l.hash, Some(fac.param), Some(fac.window), None), &io.out, io.format)
        }
        Command::Darboux { io, fac } => {
            let l = load(&io.spec)?;
            let o = darboux_cmd(&l.spec, &fac)?;
            emit(o, prov(l.hash, Some(fac.param), Some(fac.window), None), &io.out, io.format)
        }
        Command::Polys { io, family, window, param } => {
            let l = load(&io.spec)?;
            let o = polys_cmd(&l.spec, family, window, param)?;
            emit(o, prov(l.hash, param, Some(window), None), &io.out, io.format)
        }
        Command::Spectrum { io, sampling } => {
            let l = load(&io.spec)?;
            let nodes = nodes_or_default(io.nodes);
            let o = spectrum_cmd(&l.spec, sampling.samples, nodes)?;
            emit(o, prov(l.hash, None, None, Some(nodes)), &io.out, io.format)
        }
        Command::SpectrumDarboux { io, fac, sampling } => {
            let l = load(&io.spec)?;
            let nodes = nodes_or_default(io.nodes);
            let o = spectrum_darboux_cmd(&l.spec, &fac, sampling.samples, nodes)?;
            emit(o, prov(l.hash, Some(fac.param), Some(fac.window), Some(nodes)), &io.out, io.format)
        }
        Command::Verify { io, check, param, order } => {
            let l = load(&io.spec)?;
            let nodes = nodes_or_default(io.nodes);
            let o = verify_cmd(&l.spec, &check, param.map(|p| (order.into(), p)), nodes)?;
            emit(o, prov(l.hash, param, Some(check.max_index), Some(nodes)), &io.out, io.format)
        }
        Command::Simulate { io, start, steps, paths, seed } => {
            let l = load(&io.spec)?;
            let o = simulate_cmd(&l.spec, start, steps, paths, seed)?;
            emit(o, prov(l.hash, None, None, None), &io.out, io.format)
        }
        Command::ReproducePaper { example, out, nodes } => {
            let nodes = nodes_or_default(nodes);
            let (l, o) = if example == "4.1" {
                let l = canonical(&WalkSpec::constant(0.125, 0.75, 0.125)?);
                let o = constant_example(&l.spec, nodes)?;
                (l, o)
            } else {
                let l = canonical(&WalkSpec::force(0.125, 0.375)?);
                let o = force_example(&l.spec, nodes)?;
                (l, o)
            };
            let param = o.doc.get("y0").and_then(Value::as_f64);
            emit(o, prov(l.hash, param, None, Some(nodes)), &out, Format::Json)
        }
    }
}

/// Parse `argv`, run one subcommand and return the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(true) => 0,
        Ok(false) => EXIT_VERIFY,
        Err(Failure::Usage(m)) => {
            eprintln!("zwalk: usage error: {m}");
            EXIT_USAGE
        }
        Err(Failure::Verify(m)) => {
            eprintln!("zwalk: verification failed: {m}");
            EXIT_VERIFY
        }
        Err(Failure::Math(e)) => {
            eprintln!("zwalk: precondition failed: {e}");
            EXIT_PRECONDITION
        }
    }
}
