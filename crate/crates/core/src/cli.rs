//! Command-line harness. `run` never panics on bad input and maps failures to
//! exit codes: 0 success, 1 failed contract or certificate, 2 usage or config.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};

use crate::catalog::{self, IDS};
use crate::config::{Format, RunConfig};
use crate::domination::{domination_scan, Classification};
use crate::error::{Error, Result};
use crate::flow::{integrate, io::write_orbit_csv};
use crate::flowbox::{build_chart, chart_differential_checks, decay_demo, realize_rotation, RealizeParams};
use crate::lyapunov::{oseledets_splitting, upper_exponent, write_exponent_csv, ExponentRow};
use crate::perturb::{build_bumps, certificate_report, Universal};
use crate::poincare::cocycle_blocks;
use crate::sampling::{sample_region, SurfaceRegion};
use crate::symplectic::Box4;

/// Residual above which a chart is reported as failed.
pub const CHART_TOL: f64 = 1e-6;

#[derive(Parser, Debug)]
#[command(name = "hamflow", version, about = "Hamiltonian flows, transversal cocycles and local perturbations on R^4")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Integrate an orbit with its tangent map.
    Integrate(Opts),
    /// Upper Lyapunov exponent of the transversal cocycle.
    Exponents(Opts),
    /// Finite-time Oseledets directions.
    Splitting(Opts),
    /// m-domination ratios along an orbit.
    Dominate(Opts),
    /// Exponent and domination class for points sampled on an energy surface.
    SurfaceScan(Opts),
    /// Certificate of the bump-rotation perturbation.
    PerturbVerify(Opts),
    /// Residuals of a flowbox chart.
    FlowboxVerify(Opts),
    /// Rotation of the transversal cocycle at a regular point.
    Realize(Opts),
    /// Direction exchange and exponent decay on unit cocycle blocks.
    ExchangeDemo(Opts),
    /// List the named systems.
    Catalog(Opts),
}

#[derive(Args, Debug, Default)]
struct Opts {
    /// key=value file; flags override its entries.
    #[arg(long)]
    config: Option<std::path::PathBuf>,
    #[arg(long)]
    system: Option<String>,
    #[arg(long = "T", visible_alias = "t", allow_hyphen_values = true)]
    t: Option<String>,
    #[arg(long)]
    dt: Option<String>,
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    energy_tol: Option<String>,
    #[arg(long)]
    m: Option<String>,
    #[arg(long)]
    m_max: Option<String>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    energy: Option<String>,
    #[arg(long, visible_alias = "x", allow_hyphen_values = true)]
    y0: Option<String>,
    #[arg(long)]
    half_width: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    r: Option<String>,
    #[arg(long)]
    nu: Option<String>,
    #[arg(long)]
    epsilon: Option<String>,
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    radius: Option<String>,
    #[arg(long)]
    kappa: Option<String>,
    #[arg(long)]
    gamma: Option<String>,
    #[arg(long)]
    delta: Option<String>,
    #[arg(long)]
    alpha0: Option<String>,
    #[arg(long)]
    out: Option<String>,
    /// csv or plot-data.
    #[arg(long)]
    format: Option<String>,
    /// Worker threads for scans; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Omit the timestamp comment from written tables.
    #[arg(long)]
    no_timestamp: bool,
}

impl Opts {
    fn overrides(&self) -> Vec<(&'static str, &String)> {
        let pairs: [(&'static str, &Option<String>); 24] = [
            ("system", &self.system),
            ("t", &self.t),
            ("dt", &self.dt),
            ("method", &self.method),
            ("energy_tol", &self.energy_tol),
            ("m", &self.m),
            ("m_max", &self.m_max),
            ("n", &self.n),
            ("seed", &self.seed),
            ("energy", &self.energy),
            ("y0", &self.y0),
            ("half_width", &self.half_width),
            ("alpha", &self.alpha),
            ("r", &self.r),
            ("nu", &self.nu),
            ("epsilon", &self.epsilon),
            ("grid", &self.grid),
            ("radius", &self.radius),
            ("kappa", &self.kappa),
            ("gamma", &self.gamma),
            ("delta", &self.delta),
            ("alpha0", &self.alpha0),
            ("out", &self.out),
            ("format", &self.format),
        ];
        pairs.into_iter().filter_map(|(k, v)| v.as_ref().map(|v| (k, v))).collect()
    }
}

fn resolve(operation: &str, opts: &Opts) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    let mut seed_given = opts.seed.is_some();
    if let Some(path) = &opts.config {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg = RunConfig::from_text(&text)?;
        seed_given |= text.lines().any(|l| l.trim_start().starts_with("seed"));
    }
    for (k, v) in opts.overrides() {
        cfg.set(k, v)?;
    }
    if !seed_given {
        if let Ok(s) = std::env::var("HAMFLOW_SEED") {
            cfg.set("seed", &s)?;
        }
    }
    cfg.operation = operation.to_string();
    Ok(cfg)
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Parameter(_) => 2,
        _ => 1,
    }
}

/// Tabular output in either CSV or whitespace-separated plot data.
struct Table {
    format: Format,
    stamp: bool,
}

impl Table {
    fn header(&self, out: &mut dyn Write, cols: &[&str]) -> Result<()> {
        if self.stamp {
            let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
            writeln!(out, "# generated unix={secs}")?;
        }
        match self.format {
            Format::Csv => writeln!(out, "{}", cols.join(","))?,
            Format::PlotData => writeln!(out, "# {}", cols.join(" "))?,
        }
        Ok(())
    }

    /// Re-emits a CSV table produced elsewhere in this table's format.
    fn csv(&self, out: &mut dyn Write, produce: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        produce(&mut buf)?;
        let text = String::from_utf8(buf).map_err(|e| Error::Config(format!("table is not UTF-8: {e}")))?;
        let mut lines = text.lines();
        if let Some(head) = lines.next() {
            self.header(out, &head.split(',').collect::<Vec<_>>())?;
        }
        for l in lines {
            let cells: Vec<String> = l.split(',').map(str::to_string).collect();
            self.row(out, &cells)?;
        }
        Ok(())
    }

    fn row(&self, out: &mut dyn Write, cells: &[String]) -> Result<()> {
        let sep = match self.format {
            Format::Csv => ",",
            Format::PlotData => " ",
        };
        writeln!(out, "{}", cells.join(sep))?;
        Ok(())
    }
}

fn e(v: f64) -> String {
    format!("{v:e}")
}

struct Ctx<'a> {
    cfg: RunConfig,
    table: Table,
    stdout: &'a mut (dyn Write + Send),
}

impl Ctx<'_> {
    /// Writes `body` to the configured file, or to stdout when none is set.
    fn emit(&mut self, body: impl FnOnce(&Table, &mut dyn Write) -> Result<()>) -> Result<()> {
        match &self.cfg.out {
            Some(path) => {
                let mut w = BufWriter::new(File::create(path)?);
                body(&self.table, &mut w)?;
                w.flush()?;
            }
            None => body(&self.table, self.stdout)?,
        }
        Ok(())
    }

    fn summary(&mut self, line: &str) -> Result<()> {
        if self.cfg.out.is_some() {
            writeln!(self.stdout, "{line}")?;
        } else {
            eprintln!("{line}");
        }
        Ok(())
    }
}

fn cmd_integrate(ctx: &mut Ctx) -> Result<()> {
    let sys = catalog::system(&ctx.cfg.system)?;
    let icfg = ctx.cfg.integrator()?;
    let seg = integrate(&sys, &ctx.cfg.y0, ctx.cfg.t, &icfg)?;
    let last = *seg.last();
    let drift = (sys.energy(&last.y)? - sys.energy(&ctx.cfg.y0)?).abs();
    ctx.emit(|t, w| t.csv(w, |b| write_orbit_csv(b, &sys, &seg)))?;
    ctx.summary(&format!(
        "integrate system={} T={} steps={} energy_drift={drift:e} sympl_residual={:e}",
        sys.id,
        ctx.cfg.t,
        seg.states.len() - 1,
        last.symplectic_residual()
    ))
}

fn cmd_exponents(ctx: &mut Ctx) -> Result<()> {
    let sys = catalog::system(&ctx.cfg.system)?;
    let est = upper_exponent(&sys, &ctx.cfg.y0, ctx.cfg.t, &ctx.cfg.integrator()?)?;
    let rows = [ExponentRow { index: 0, base: ctx.cfg.y0, estimate: Some(est) }];
    let (seed, t) = (ctx.cfg.seed, ctx.cfg.t);
    ctx.emit(|tb, w| tb.csv(w, |b| write_exponent_csv(b, seed, t, &rows)))?;
    ctx.summary(&format!("exponents system={} T={t} lambda_plus={}", sys.id, est.lambda_plus))
}

fn cmd_splitting(ctx: &mut Ctx) -> Result<()> {
    let sys = catalog::system(&ctx.cfg.system)?;
    let s = oseledets_splitting(&sys, &ctx.cfg.y0, ctx.cfg.t, &ctx.cfg.integrator()?)?;
    ctx.emit(|_, w| {
        writeln!(w, "n_plus={},{}", s.n_plus[0], s.n_plus[1])?;
        writeln!(w, "n_minus={},{}", s.n_minus[0], s.n_minus[1])?;
        writeln!(w, "angle={}", s.angle)?;
        writeln!(w, "exponent={}", s.exponent)?;
        Ok(())
    })?;
    ctx.summary(&format!("splitting system={} angle={} exponent={}", sys.id, s.angle, s.exponent))
}

fn cmd_dominate(ctx: &mut Ctx) -> Result<()> {
    let sys = catalog::system(&ctx.cfg.system)?;
    let r = domination_scan(&sys, &ctx.cfg.y0, ctx.cfg.m, ctx.cfg.t, &ctx.cfg.integrator()?)?;
    ctx.emit(|t, w| {
        t.header(w, &["k", "ratio"])?;
        for (k, v) in r.ratios.iter().enumerate() {
            t.row(w, &[k.to_string(), e(*v)])?;
        }
        Ok(())
    })?;
    ctx.summary(&format!("dominate system={} m={} class={:?} worst={}", sys.id, r.m, r.classification, r.worst))
}

fn cmd_surface_scan(ctx: &mut Ctx) -> Result<()> {
    let sys = catalog::system(&ctx.cfg.system)?;
    let icfg = ctx.cfg.integrator()?;
    let c = &ctx.cfg;
    let region = SurfaceRegion::new(c.energy, Box4::around(&c.y0, c.half_width));
    let cols = ["index", "x1", "x2", "x3", "x4", "lambda_plus", "m", "class"];
    let points = match sample_region(&sys, &region, c.n, c.seed) {
        Ok(s) => s.points,
        Err(Error::EmptyLevelSet { .. } | Error::EmptySample) => {
            eprintln!("warning: no points on the energy surface in the region");
            ctx.emit(|t, w| t.header(w, &cols))?;
            return ctx.summary("surface-scan rows=0");
        }
        Err(err) => return Err(err),
    };
    let (t_total, m_max) = (c.t, c.m_max);
    use rayon::prelude::*;
    let rows: Vec<Vec<String>> = points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let mut row = vec![i.to_string(), e(p[0]), e(p[1]), e(p[2]), e(p[3])];
            match upper_exponent(&sys, p, t_total, &icfg) {
                Ok(est) => row.push(e(est.lambda_plus)),
                Err(Error::Escape { .. }) => {
                    row.extend(["".into(), "".into(), "escaped".into()]);
                    return row;
                }
                Err(_) => {
                    row.extend(["".into(), "".into(), "error".into()]);
                    return row;
                }
            }
            let mut class = ("".to_string(), "Z-candidate".to_string());
            // A window longer than the scan cannot be tested.
            let m_top = m_max.min((t_total + 1e-9).floor().max(0.0) as u32);
            for m in 1..=m_top {
                match domination_scan(&sys, p, m, t_total, &icfg) {
                    Ok(r) if r.classification == Classification::Dominated(m) => {
                        class = (m.to_string(), format!("D({m})"));
                        break;
                    }
                    Ok(r) if r.trivial => break,
                    Ok(_) => {}
                    Err(Error::Escape { .. }) => {
                        class = ("".into(), "escaped".into());
                        break;
                    }
                    Err(_) => {
                        class = ("".into(), "error".into());
                        break;
                    }
                }
            }
            row.extend([class.0, class.1]);
            row
        })
        .collect();
    let dominated = rows.iter().filter(|r| r[7].starts_with('D')).count();
    ctx.emit(|t, w| {
        t.header(w, &cols)?;
        for r in &rows {
            t.row(w, r)?;
        }
        Ok(())
    })?;
    ctx.summary(&format!("surface-scan system={} rows={} dominated={dominated}", sys.id, rows.len()))
}

fn cmd_perturb_verify(ctx: &mut Ctx) -> Result<()> {
    let c = &ctx.cfg;
    let profile = build_bumps(c.r, c.nu, Universal::default())?.with_alpha(c.alpha)?;
    let cert = certificate_report(&profile, c.epsilon, c.grid, &c.integrator()?)?;
    let text = cert.to_key_values();
    ctx.emit(|_, w| Ok(w.write_all(text.as_bytes())?))?;
    if let Some(v) = cert.violations().into_iter().next() {
        return Err(v);
    }
    ctx.summary(&format!("perturb-verify c0={} c1={} c2={} c_u={} ok", cert.c0, cert.c1, cert.c2, cert.c_u))
}

fn cmd_flowbox_verify(ctx: &mut Ctx) -> Result<()> {
    let sys = catalog::system(&ctx.cfg.system)?;
    let chart = build_chart(&sys, &ctx.cfg.y0, ctx.cfg.radius, &ctx.cfg.integrator()?)?;
    let r = chart_differential_checks(&chart, ctx.cfg.n.max(1), ctx.cfg.seed);
    let radius = chart.radius;
    ctx.emit(|_, w| {
        writeln!(w, "radius={radius}")?;
        writeln!(w, "sympl_residual={}", r.sympl_residual)?;
        writeln!(w, "conj_residual={}", r.conj_residual)?;
        writeln!(w, "field_residual={}", r.field_residual)?;
        writeln!(w, "n_samples={}", r.n_samples)?;
        Ok(())
    })?;
    for (name, v) in [("sympl_residual", r.sympl_residual), ("conj_residual", r.conj_residual), ("field_residual", r.field_residual)] {
        if !(v <= CHART_TOL) {
            return Err(Error::Certificate { bound: name.into(), value: v, limit: CHART_TOL });
        }
    }
    ctx.summary(&format!("flowbox-verify system={} radius={radius} ok", sys.id))
}

fn cmd_realize(ctx: &mut Ctx) -> Result<()> {
    let sys = catalog::system(&ctx.cfg.system)?;
    let c = &ctx.cfg;
    let params = RealizeParams {
        alpha: c.alpha,
        r: c.r,
        epsilon: c.epsilon,
        kappa: c.kappa,
        gamma: c.gamma,
        seed: c.seed,
        ..RealizeParams::default()
    };
    let (tilde, cert) = realize_rotation(&sys, &c.y0, &params, &c.integrator()?)?;
    let text = cert.to_key_values();
    ctx.emit(|_, w| Ok(w.write_all(format!("system={}\n{text}", tilde.id).as_bytes())?))?;
    if cert.rotation_error > cert.gamma {
        return Err(Error::Certificate { bound: "rotation error".into(), value: cert.rotation_error, limit: cert.gamma });
    }
    if cert.kappa_fraction > cert.kappa {
        return Err(Error::Certificate { bound: "kappa fraction".into(), value: cert.kappa_fraction, limit: cert.kappa });
    }
    ctx.summary(&format!(
        "realize system={} r={} rotation_error={:e} kappa_fraction={}",
        tilde.id, cert.r, cert.rotation_error, cert.kappa_fraction
    ))
}

fn cmd_exchange_demo(ctx: &mut Ctx) -> Result<()> {
    let sys = catalog::system(&ctx.cfg.system)?;
    let icfg = ctx.cfg.integrator()?;
    let c = &ctx.cfg;
    let count = (c.t.abs() - 1e-9).ceil().max(1.0) as usize;
    let blocks: Vec<_> = cocycle_blocks(&sys, &c.y0, count, 1.0, &icfg)?.iter().map(|b| b.phi).collect();
    let split = oseledets_splitting(&sys, &c.y0, c.t.min(10.0), &icfg)?;
    let d = decay_demo(&blocks, &split.n_plus, &split.n_minus, c.delta, c.alpha0)?;
    ctx.emit(|t, w| {
        t.header(w, &["block", "angle"])?;
        for (k, a) in d.angles.iter().enumerate() {
            t.row(w, &[k.to_string(), e(*a)])?;
        }
        Ok(())
    })?;
    ctx.summary(&format!(
        "exchange-demo system={} t={count} raw={} value={} start={} m={} hypothesis_held={}",
        sys.id, d.raw, d.value, d.start, d.m, d.hypothesis_held
    ))
}

fn cmd_catalog(ctx: &mut Ctx) -> Result<()> {
    ctx.emit(|_, w| {
        for id in IDS {
            writeln!(w, "{id}")?;
        }
        Ok(())
    })
}

fn dispatch(cmd: Cmd, stdout: &mut (dyn Write + Send)) -> Result<()> {
    let (name, opts, f): (&str, Opts, fn(&mut Ctx) -> Result<()>) = match cmd {
        Cmd::Integrate(o) => ("integrate", o, cmd_integrate),
        Cmd::Exponents(o) => ("exponents", o, cmd_exponents),
        Cmd::Splitting(o) => ("splitting", o, cmd_splitting),
        Cmd::Dominate(o) => ("dominate", o, cmd_dominate),
        Cmd::SurfaceScan(o) => ("surface-scan", o, cmd_surface_scan),
        Cmd::PerturbVerify(o) => ("perturb-verify", o, cmd_perturb_verify),
        Cmd::FlowboxVerify(o) => ("flowbox-verify", o, cmd_flowbox_verify),
        Cmd::Realize(o) => ("realize", o, cmd_realize),
        Cmd::ExchangeDemo(o) => ("exchange-demo", o, cmd_exchange_demo),
        Cmd::Catalog(o) => ("catalog", o, cmd_catalog),
    };
    let cfg = resolve(name, &opts)?;
    let table = Table { format: cfg.format, stamp: !opts.no_timestamp };
    let mut ctx = Ctx { cfg, table, stdout };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| f(&mut ctx))
}

/// Runs the harness on `argv` (program name first) and returns the exit code.
pub fn run<I, S>(argv: I, stdout: &mut (dyn Write + Send)) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(err) => {
            let code = if err.use_stderr() { 2 } else { 0 };
            let text = err.render().to_string();
            if code == 0 {
                let _ = write!(stdout, "{text}");
            } else {
                eprint!("{text}");
            }
            return code;
        }
    };
    let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| dispatch(cli.cmd, stdout)));
    match result {
        Ok(Ok(())) => 0,
        Ok(Err(err)) => {
            match &err {
                Error::Certificate { bound, value, limit } => {
                    eprintln!("error: certificate bound {bound:?} violated: {value:e} > {limit:e}")
                }
                _ => eprintln!("error: {err}"),
            }
            exit_code(&err)
        }
        Err(_) => {
            eprintln!("error: internal failure");
            1
        }
    }
}
