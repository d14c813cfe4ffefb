//! Batch front end: argument parsing, JSON/CSV artifacts and exit codes.
//!
//! Every subcommand produces one JSON document (printed to stdout and, with
//! `--out DIR`, written to `DIR/<command>.json`) and optionally a CSV table
//! (`DIR/<command>.csv`). Floats are written with 17 significant digits.
//!
//! Exit codes: 0 all checks passed, 1 a numerical check failed, 2 usage error,
//! 3 runtime failure (I/O, breakdown of a numerical routine).
//!
//! CSV columns, in order:
//! - catalog: r, s, n, gl3, gl2, clifford, tau_skew, block, pass
//! - kernel: p, q_re, q_im, bessel_re, bessel_im, gbar_re, gbar_im
//! - specfun: nu, v, j, y, h, ode_j, ode_y, ode_h
//! - pair / verify-fs: seed, value_re, value_im, reference_re, reference_im, rel_err, est_error
//! - verify-nonexistence: flow_nodes, max_residual
//! - report: section, passed

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Number, Value};

use crate::clifford_catalog::{self, build_module, catalog, validate_module, Signature};
use crate::error::Error;
use crate::group_core::GroupStructure;
use crate::kernel_eval::{gamma_const, gbar_residual, kernel_q_lm, kernel_q_lm_bessel, KernelSelector};
use crate::nonexistence_witness::{
    build_witness, certify_kernel_residual, nonsolvability_report, residual_at_nodes, WitnessConfig,
    DELTA_PHI_TOL, RESIDUAL_TOL,
};
use crate::pairing::{
    pair_k_with, pair_mr_with, pair_offcone, pair_second_form_with, pseudo_pair_n2, KBudget, MrBudget,
    PairingResult, SecondBudget,
};
use crate::poly::C64;
use crate::schwartz_testfn::{probe, shell, GaussPoly, TestFnSpec};
use crate::specfun::{bessel_j, bessel_y, ode_residuals, struve_h, HalfIntOrder};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "UHYPER_THREADS";

pub const FS_TOL: f64 = 1e-3;
pub const FS_TOL_HEAVISIDE: f64 = 1e-2;
pub const CONE_SUPPORT_TOL: f64 = 1e-6;
pub const CONE_MATCH_TOL: f64 = 1e-3;
pub const KERNEL_TOL: f64 = 1e-10;
pub const GBAR_TOL: f64 = 1e-8;
pub const ODE_TOL: f64 = 1e-6;
pub const DOUBLING_DROP: f64 = 100.0;

/// Parameters shared by the subcommands. Loaded from `--config FILE` (JSON,
/// missing fields take their defaults); `--seed` overrides the file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub probes: usize,
    /// None selects KBudget::for_s.
    pub k_budget: Option<KBudget>,
    pub mr_budget: MrBudget,
    pub second_budget: SecondBudget,
    pub offcone_nodes: usize,
    pub flow_nodes: usize,
    pub grid_xi: usize,
    pub grid_eta: usize,
    pub gbar_points: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            probes: 3,
            k_budget: None,
            mr_budget: MrBudget::default(),
            second_budget: SecondBudget::default(),
            offcone_nodes: 8,
            flow_nodes: 64,
            grid_xi: 7,
            grid_eta: 5,
            gbar_points: 100,
        }
    }
}

impl RunConfig {
    fn k_budget(&self, s: usize) -> KBudget {
        self.k_budget.unwrap_or_else(|| KBudget::for_s(s))
    }
}

#[derive(Debug, Parser)]
#[command(name = "uhyper", version, about = "Fundamental solutions of ultra-hyperbolic operators on pseudo H-type groups")]
pub struct Cli {
    /// JSON file with a RunConfig.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory receiving <command>.json and <command>.csv.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for probe test functions and random sample points.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub cmd: Cmd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Rep {
    /// Fourier-side kernel q^{lambda,mu}.
    K,
    /// Iterated integral on the Heisenberg-type group (n = 2, s = 1).
    Mr,
    /// Second form with the tau integral done first (n = 2, lambda = 1).
    Second,
    /// Smooth kernel off the cone 4|z| >= |P(x)|.
    Offcone,
    /// The (P - i0)^{-1} counterexample pairing (n = 2).
    Pseudo,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// List shipped signatures with validation residuals.
    Catalog,
    /// Algebra checks for one signature.
    Validate {
        /// r,s or r,s,n.
        #[arg(long)]
        sig: String,
        #[arg(long, default_value_t = 200)]
        samples: usize,
    },
    /// Tabulate q^{lambda,mu} along P(xi) at fixed theta.
    Kernel {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        s: usize,
        #[arg(long, default_value = "1,0")]
        selector: String,
        /// Comma separated theta; defaults to (1, ..., 1).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        theta: Option<Vec<f64>>,
        #[arg(long, default_value_t = -10.0, allow_hyphen_values = true)]
        p_min: f64,
        #[arg(long, default_value_t = 10.0, allow_hyphen_values = true)]
        p_max: f64,
        #[arg(long, default_value_t = 41)]
        points: usize,
    },
    /// Tabulate J, Y, H with ODE residuals.
    Specfun {
        /// Half-integer orders.
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.0, 0.5, 1.0, 1.5])]
        nu: Vec<f64>,
        #[arg(long, default_value_t = 0.1)]
        v_min: f64,
        #[arg(long, default_value_t = 20.0)]
        v_max: f64,
        #[arg(long, default_value_t = 40)]
        points: usize,
    },
    /// Pair a fundamental solution with one test function.
    Pair {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        s: usize,
        #[arg(long, value_enum, default_value_t = Rep::K)]
        rep: Rep,
        #[arg(long, default_value = "1,0")]
        selector: String,
        /// JSON TestFnSpec; otherwise a probe built from --probe or the seed.
        #[arg(long)]
        testfn: Option<PathBuf>,
        #[arg(long)]
        probe: Option<u64>,
        /// Pair Delta_{0,s} phi and compare with phi(0).
        #[arg(long)]
        apply_delta: bool,
        #[arg(long, default_value_t = FS_TOL)]
        tol: f64,
    },
    /// delta reproduction pair_K(Delta phi) = phi(0) on probe functions.
    VerifyFs {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        s: usize,
        #[arg(long, default_value = "1,0")]
        selector: String,
        #[arg(long)]
        probes: Option<usize>,
        /// Defaults to 1e-3, or 1e-2 for the heaviside selector.
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Support and off-cone smoothness checks.
    VerifyCone {
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        s: usize,
    },
    /// Kernel witness for r > 0 and the resulting non-solvability data.
    VerifyNonexistence {
        /// r,s or r,s,n.
        #[arg(long, default_value = "1,1")]
        sig: String,
        /// Centre of the bump; defaults to (2, 1, 0, ..., 0).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        eta0: Option<Vec<f64>>,
        #[arg(long, default_value_t = 0.5)]
        delta: f64,
        #[arg(long)]
        flow_nodes: Option<usize>,
    },
    /// Run the fast checks of every module and summarise.
    Report,
}

/// Result of one subcommand.
#[derive(Debug, Clone)]
pub struct Artifact {
    pub name: String,
    pub json: Value,
    pub csv: Option<Table>,
    pub passed: bool,
}

#[derive(Debug, Clone, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(cols: &[&str]) -> Self {
        Self { header: cols.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        // writing into a Vec cannot fail
        w.write_record(&self.header).expect("in-memory csv");
        for r in &self.rows {
            w.write_record(r).expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("csv of utf-8 fields")
    }
}

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NonSPDQuadraticForm | Error::SingularAffineMap => Failure::Runtime(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

type R<T> = std::result::Result<T, Failure>;

/// 17 significant digits.
pub fn fmt17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

/// Rewrites every non-integer number of `v` with 17 significant digits.
pub fn canonical(v: Value) -> Value {
    match v {
        Value::Number(n) if !(n.is_i64() || n.is_u64()) => match n.as_f64() {
            Some(x) if x.is_finite() => Value::Number(Number::from_string_unchecked(fmt17(x))),
            _ => Value::Null,
        },
        Value::Array(a) => Value::Array(a.into_iter().map(canonical).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, x)| (k, canonical(x))).collect()),
        other => other,
    }
}

fn cj(z: C64) -> Value {
    json!({"re": z.re, "im": z.im})
}

fn pr_json(p: &PairingResult) -> Value {
    json!({"value": cj(p.value), "est_error": p.est_error, "node_budget": p.node_budget})
}

fn sig_json(sig: Signature) -> Value {
    json!({"r": sig.r, "s": sig.s, "n": sig.n})
}

fn usage<T>(msg: impl Into<String>) -> R<T> {
    Err(Failure::Usage(msg.into()))
}

/// "r,s" or "r,s,n"; without n the smallest catalog n is used.
pub fn parse_sig(text: &str) -> R<Signature> {
    let parts: std::result::Result<Vec<usize>, _> = text.split(',').map(|p| p.trim().parse::<usize>()).collect();
    let parts = match parts {
        Ok(p) => p,
        Err(_) => return usage(format!("cannot parse signature '{text}'")),
    };
    match parts.as_slice() {
        [r, s, n] => Ok(Signature::new(*r, *s, *n)),
        [r, s] => catalog()
            .into_iter()
            .filter(|g| g.r == *r && g.s == *s)
            .min_by_key(|g| g.n)
            .ok_or_else(|| Failure::Usage(format!("no catalog entry with r = {r}, s = {s}"))),
        _ => usage(format!("signature '{text}' must be r,s or r,s,n")),
    }
}

fn catalog_sig(sig: Signature) -> R<Signature> {
    if catalog().contains(&sig) {
        Ok(sig)
    } else {
        Err(Error::UnknownSignature { r: sig.r, s: sig.s, n: sig.n }.into())
    }
}

fn load_config(path: Option<&Path>) -> R<RunConfig> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))
        }
    }
}

fn set_threads() -> R<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v.trim().parse().map_err(|_| Failure::Usage(format!("{THREADS_ENV}='{v}' is not a count")))?;
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

/// Entry point; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run_cli(&cli) {
        Ok(a) => {
            if a.passed {
                EXIT_OK
            } else {
                EXIT_CHECK_FAILED
            }
        }
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            EXIT_USAGE
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            EXIT_RUNTIME
        }
    }
}

fn run_cli(cli: &Cli) -> R<Artifact> {
    set_threads()?;
    let mut cfg = load_config(cli.config.as_deref())?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let art = execute(&cli.cmd, &cfg)?;
    let text = serde_json::to_string_pretty(&art.json).map_err(|e| Failure::Runtime(e.to_string()))?;
    let mut stdout = std::io::stdout().lock();
    match writeln!(stdout, "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => return Err(Failure::Runtime(e.to_string())),
        _ => {}
    }
    if let Some(dir) = &cli.out {
        fs::create_dir_all(dir).map_err(|e| Failure::Runtime(format!("{}: {e}", dir.display())))?;
        let jp = dir.join(format!("{}.json", art.name));
        fs::write(&jp, format!("{text}\n")).map_err(|e| Failure::Runtime(format!("{}: {e}", jp.display())))?;
        if let Some(t) = &art.csv {
            let cp = dir.join(format!("{}.csv", art.name));
            fs::write(&cp, t.render()).map_err(|e| Failure::Runtime(format!("{}: {e}", cp.display())))?;
        }
    }
    Ok(art)
}

/// Runs one subcommand without touching stdout or the file system.
pub fn execute(cmd: &Cmd, cfg: &RunConfig) -> R<Artifact> {
    let mut art = match cmd {
        Cmd::Catalog => cmd_catalog()?,
        Cmd::Validate { sig, samples } => cmd_validate(parse_sig(sig)?, *samples, cfg)?,
        Cmd::Kernel { n, s, selector, theta, p_min, p_max, points } => {
            let th = theta.clone().unwrap_or_else(|| vec![1.0; *s]);
            cmd_kernel(Signature::new(0, *s, *n), &KernelSelector::parse(selector)?, &th, *p_min, *p_max, *points)?
        }
        Cmd::Specfun { nu, v_min, v_max, points } => cmd_specfun(nu, *v_min, *v_max, *points)?,
        Cmd::Pair { n, s, rep, selector, testfn, probe: pseed, apply_delta, tol } => {
            let sig = Signature::new(0, *s, *n);
            let (phi, seed) = match testfn {
                Some(p) => {
                    let text = fs::read_to_string(p).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?;
                    let spec: TestFnSpec =
                        serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?;
                    (spec.build()?, None)
                }
                None => {
                    let sd = pseed.unwrap_or(cfg.seed);
                    (probe(sig.dim(), sd), Some(sd))
                }
            };
            cmd_pair(sig, *rep, &KernelSelector::parse(selector)?, &phi, seed, *apply_delta, *tol, cfg)?
        }
        Cmd::VerifyFs { n, s, selector, probes, tol } => {
            let sel = KernelSelector::parse(selector)?;
            let t = tol.unwrap_or(if matches!(sel, KernelSelector::HeavisideSign) { FS_TOL_HEAVISIDE } else { FS_TOL });
            verify_fs(Signature::new(0, *s, *n), &sel, probes.unwrap_or(cfg.probes), t, cfg)?
        }
        Cmd::VerifyCone { n, s } => verify_cone(Signature::new(0, *s, *n), cfg)?,
        Cmd::VerifyNonexistence { sig, eta0, delta, flow_nodes } => {
            let sig = catalog_sig(parse_sig(sig)?)?;
            let eta0 = eta0.clone().unwrap_or_else(|| default_eta0(sig));
            verify_nonexistence(sig, eta0, *delta, flow_nodes.unwrap_or(cfg.flow_nodes), cfg)?
        }
        Cmd::Report => report(cfg)?,
    };
    if let Value::Object(o) = &mut art.json {
        o.insert("passed".into(), Value::Bool(art.passed));
        o.insert("config".into(), serde_json::to_value(cfg).map_err(|e| Failure::Runtime(e.to_string()))?);
    }
    art.json = canonical(art.json);
    Ok(art)
}

fn default_eta0(sig: Signature) -> Vec<f64> {
    let mut e = vec![0.0; sig.dim_z()];
    e[0] = 2.0;
    if e.len() > 1 {
        e[1] = 1.0;
    }
    e
}

pub fn cmd_catalog() -> R<Artifact> {
    let mut t = Table::new(&["r", "s", "n", "gl3", "gl2", "clifford", "tau_skew", "block", "pass"]);
    let mut entries = Vec::new();
    let mut ok = true;
    for sig in catalog() {
        let rep = validate_module(&build_module(sig)?);
        ok &= rep.pass;
        t.push(vec![
            sig.r.to_string(),
            sig.s.to_string(),
            sig.n.to_string(),
            fmt17(rep.gl3),
            fmt17(rep.gl2),
            fmt17(rep.clifford),
            fmt17(rep.tau_skew),
            fmt17(rep.block),
            rep.pass.to_string(),
        ]);
        entries.push(json!({"sig": sig_json(sig), "report": rep}));
    }
    Ok(Artifact {
        name: "catalog".into(),
        json: json!({"command": "catalog", "tolerance": clifford_catalog::TOL, "entries": entries}),
        csv: Some(t),
        passed: ok,
    })
}

/// Module identities plus random-eta checks of rho(eta)^2 = -<eta,eta> I,
/// (tau Omega)^2 = -<eta,eta>/4 I and, for timelike eta, the spectrum
/// of tau Omega(eta), which is {+-i sqrt<eta,eta>/2} with n copies each.
pub fn cmd_validate(sig: Signature, samples: usize, cfg: &RunConfig) -> R<Artifact> {
    let sig = catalog_sig(sig)?;
    let m = build_module(sig)?;
    let rep = validate_module(&m);
    let g = GroupStructure::new(m);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let d = sig.dim_v();
    let id = DMatrix::<f64>::identity(d, d);
    let (mut sq, mut om, mut eig) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..samples {
        let mut eta: Vec<f64> = (0..sig.dim_z()).map(|_| rng.random_range(-2.0..2.0)).collect();
        let f = sig.form(&eta);
        let r = g.rho(&eta)?;
        sq = sq.max((&r * &r + &id * f).amax());
        let to = &g.module.tau * g.omega(&eta)?;
        om = om.max((&to * &to + &id * (f / 4.0)).amax());
        if sig.r > 0 {
            eta[0] += 3.0 * eta[0].signum().max(0.0) + 3.0;
            let f = sig.form(&eta);
            if f > 0.0 {
                let to = &g.module.tau * g.omega(&eta)?;
                let ev = to.complex_eigenvalues();
                let mut pos = 0;
                for z in ev.iter() {
                    eig = eig.max(z.re.abs()).max((z.im.abs() - f.sqrt() / 2.0).abs());
                    pos += (z.im > 0.0) as usize;
                }
                if pos != sig.n {
                    eig = f64::INFINITY;
                }
            }
        }
    }
    let passed = rep.pass && sq <= clifford_catalog::TOL && om <= clifford_catalog::TOL && eig <= 1e-10;
    Ok(Artifact {
        name: "validate".into(),
        json: json!({
            "command": "validate",
            "sig": sig_json(sig),
            "module": rep,
            "samples": samples,
            "rho_square_residual": sq,
            "tau_omega_square_residual": om,
            "eigenvalue_residual": eig,
            "tolerance": clifford_catalog::TOL,
            "eigenvalue_tolerance": 1e-10,
        }),
        csv: None,
        passed,
    })
}

fn xi_for_p(n: usize, p: f64) -> Vec<f64> {
    let mut xi = vec![0.0; 2 * n];
    if p >= 0.0 {
        xi[0] = p.sqrt();
    } else {
        xi[n] = (-p).sqrt();
    }
    xi
}

pub fn cmd_kernel(sig: Signature, sel: &KernelSelector, theta: &[f64], p_min: f64, p_max: f64, points: usize) -> R<Artifact> {
    if points < 2 || p_max <= p_min {
        return usage("kernel needs points >= 2 and p_max > p_min");
    }
    if theta.len() != sig.s {
        return Err(Error::DimensionMismatch { expected: sig.s, got: theta.len() }.into());
    }
    let target = gamma_const(sig.n, sig.s);
    let mut t = Table::new(&["p", "q_re", "q_im", "bessel_re", "bessel_im", "gbar_re", "gbar_im"]);
    let (mut dq, mut dg) = (0.0f64, 0.0f64);
    for k in 0..points {
        let p = p_min + (p_max - p_min) * k as f64 / (points - 1) as f64;
        let xi = xi_for_p(sig.n, p);
        let q = kernel_q_lm(sig, &xi, theta, *sel)?;
        let qb = kernel_q_lm_bessel(sig, &xi, theta, *sel)?;
        let gb = gbar_residual(sig, &xi, theta)?;
        dq = dq.max((q - qb).norm() / q.norm().max(1.0));
        dg = dg.max((gb - target).norm());
        t.push(vec![fmt17(p), fmt17(q.re), fmt17(q.im), fmt17(qb.re), fmt17(qb.im), fmt17(gb.re), fmt17(gb.im)]);
    }
    Ok(Artifact {
        name: "kernel".into(),
        json: json!({
            "command": "kernel",
            "sig": sig_json(sig),
            "selector": format!("{sel:?}"),
            "theta": theta,
            "points": points,
            "max_rel_diff_bessel_form": dq,
            "bessel_tolerance": KERNEL_TOL,
            "gbar_target": target,
            "max_gbar_deviation": dg,
            "gbar_tolerance": GBAR_TOL,
        }),
        csv: Some(t),
        passed: dq <= KERNEL_TOL && dg <= GBAR_TOL,
    })
}

/// Largest deviation of gbar_residual from (2 pi)^{-(n+s/2)} at random points.
pub fn gbar_check(sig: Signature, points: usize, seed: u64) -> R<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let target = gamma_const(sig.n, sig.s);
    let mut dev = 0.0f64;
    for _ in 0..points {
        let xi: Vec<f64> = (0..2 * sig.n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let th: Vec<f64> = (0..sig.s).map(|_| rng.random_range(0.1..2.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
        dev = dev.max((gbar_residual(sig, &xi, &th)? - target).norm());
    }
    Ok(dev)
}

pub fn cmd_specfun(nus: &[f64], v_min: f64, v_max: f64, points: usize) -> R<Artifact> {
    if points < 2 || v_min <= 0.0 || v_max <= v_min {
        return usage("specfun needs points >= 2 and 0 < v_min < v_max");
    }
    let mut t = Table::new(&["nu", "v", "j", "y", "h", "ode_j", "ode_y", "ode_h"]);
    let mut worst = 0.0f64;
    for &nu in nus {
        let two = (2.0 * nu).round();
        if nu < 0.0 || (two - 2.0 * nu).abs() > 1e-12 {
            return usage(format!("order {nu} is not a non-negative half integer"));
        }
        let o = HalfIntOrder::new(two as u32);
        for k in 0..points {
            let v = v_min + (v_max - v_min) * k as f64 / (points - 1) as f64;
            let (j, y, h) = (bessel_j(o, v), bessel_y(o, v)?, struve_h(o, v));
            let r = ode_residuals(o, v, (v / 100.0).min(1e-2))?;
            // residuals are relative to the size of the terms they balance
            let scale = (v * v + nu * nu).max(1.0);
            for (res, f) in r.iter().zip([j, y, h]) {
                worst = worst.max(res.abs() / (scale * f.abs().max(1.0)));
            }
            t.push(vec![fmt17(nu), fmt17(v), fmt17(j), fmt17(y), fmt17(h), fmt17(r[0]), fmt17(r[1]), fmt17(r[2])]);
        }
    }
    Ok(Artifact {
        name: "specfun".into(),
        json: json!({
            "command": "specfun",
            "orders": nus,
            "v_min": v_min,
            "v_max": v_max,
            "points": points,
            "max_scaled_ode_residual": worst,
            "tolerance": ODE_TOL,
        }),
        csv: Some(t),
        passed: worst <= ODE_TOL,
    })
}

fn rel(a: C64, b: C64) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

fn pair_row(seed: Option<u64>, v: C64, reference: Option<C64>, est: f64) -> Vec<String> {
    let r = reference.unwrap_or(C64::new(f64::NAN, f64::NAN));
    vec![
        seed.map(|s| s.to_string()).unwrap_or_default(),
        fmt17(v.re),
        fmt17(v.im),
        fmt17(r.re),
        fmt17(r.im),
        fmt17(reference.map(|r| rel(v, r)).unwrap_or(f64::NAN)),
        fmt17(est),
    ]
}

const PAIR_COLS: [&str; 7] = ["seed", "value_re", "value_im", "reference_re", "reference_im", "rel_err", "est_error"];

#[allow(clippy::too_many_arguments)]
pub fn cmd_pair(
    sig: Signature,
    rep: Rep,
    sel: &KernelSelector,
    phi: &GaussPoly,
    seed: Option<u64>,
    apply_delta: bool,
    tol: f64,
    cfg: &RunConfig,
) -> R<Artifact> {
    if phi.dim != sig.dim() {
        return Err(Error::DimensionMismatch { expected: sig.dim(), got: phi.dim }.into());
    }
    let needs_group = apply_delta || rep == Rep::Pseudo;
    let group = if needs_group { Some(GroupStructure::from_signature(catalog_sig(sig)?)?) } else { None };
    let arg = match (&group, apply_delta) {
        (Some(g), true) => g.apply_delta_rs(phi)?,
        _ => phi.clone(),
    };
    let phi0 = phi.evaluate(&vec![0.0; phi.dim]);
    let mut t = Table::new(&PAIR_COLS);
    let (value, est, extra) = match rep {
        Rep::K => {
            let r = pair_k_with(sig, &arg, *sel, cfg.k_budget(sig.s))?;
            (r.value, r.est_error, pr_json(&r))
        }
        Rep::Mr => {
            if sig.s != 1 {
                return Err(Error::RequiresSOne.into());
            }
            let r = pair_mr_with(&arg, cfg.mr_budget)?;
            (r.value, r.est_error, pr_json(&r))
        }
        Rep::Second => {
            let r = pair_second_form_with(sig, &arg, cfg.second_budget)?;
            (r.value, r.est_error, pr_json(&r))
        }
        Rep::Offcone => {
            let r = pair_offcone(sig, &arg, cfg.offcone_nodes)?;
            (r.value, r.est_error, pr_json(&r))
        }
        Rep::Pseudo => {
            let g = group.as_ref().expect("group built for pseudo");
            let d = g.apply_delta_rs(phi)?;
            let (lhs, rhs) = pseudo_pair_n2(sig, phi, &d)?;
            let r = rel(lhs, rhs);
            t.push(pair_row(seed, lhs, Some(rhs), f64::NAN));
            return Ok(Artifact {
                name: "pair".into(),
                json: json!({
                    "command": "pair",
                    "rep": "pseudo",
                    "sig": sig_json(sig),
                    "seed": seed,
                    "lhs": cj(lhs),
                    "rhs": cj(rhs),
                    "rel_err": r,
                    "tolerance": tol,
                }),
                csv: Some(t),
                passed: r <= tol,
            });
        }
    };
    let reference = apply_delta.then_some(phi0);
    t.push(pair_row(seed, value, reference, est));
    let r = reference.map(|p| rel(value, p));
    Ok(Artifact {
        name: "pair".into(),
        json: json!({
            "command": "pair",
            "rep": format!("{rep:?}").to_lowercase(),
            "sig": sig_json(sig),
            "selector": format!("{sel:?}"),
            "seed": seed,
            "apply_delta": apply_delta,
            "result": extra,
            "phi_at_0": cj(phi0),
            "rel_err": r,
            "tolerance": tol,
        }),
        csv: Some(t),
        passed: r.is_none_or(|x| x <= tol) && est.is_finite(),
    })
}

pub fn verify_fs(sig: Signature, sel: &KernelSelector, probes: usize, tol: f64, cfg: &RunConfig) -> R<Artifact> {
    let sig = catalog_sig(sig)?;
    if sig.r != 0 {
        return Err(Error::RequiresRZero.into());
    }
    let g = GroupStructure::from_signature(sig)?;
    let budget = cfg.k_budget(sig.s);
    let mut t = Table::new(&PAIR_COLS);
    let mut items = Vec::new();
    let mut worst = 0.0f64;
    for k in 0..probes as u64 {
        let seed = cfg.seed + k;
        let phi = probe(sig.dim(), seed);
        let r = pair_k_with(sig, &g.apply_delta_rs(&phi)?, *sel, budget)?;
        let phi0 = phi.evaluate(&vec![0.0; phi.dim]);
        let e = rel(r.value, phi0);
        worst = worst.max(e);
        t.push(pair_row(Some(seed), r.value, Some(phi0), r.est_error));
        items.push(json!({"seed": seed, "pairing": pr_json(&r), "phi_at_0": cj(phi0), "rel_err": e}));
    }
    Ok(Artifact {
        name: "verify-fs".into(),
        json: json!({
            "command": "verify-fs",
            "sig": sig_json(sig),
            "selector": format!("{sel:?}"),
            "budget": budget,
            "probes": items,
            "max_rel_err": worst,
            "tolerance": tol,
        }),
        csv: Some(t),
        passed: worst <= tol,
    })
}

/// Support check (n = 2, s = 1 only): the iterated integral samples phi only
/// where |z| >= |P(x)|/4, so a function concentrated in 4|z| < |P(x)| pairs to
/// almost nothing. The scale is the pairing of the same x-profile with a wide
/// z-profile (same sup norm), which does reach the support.
///
/// Off-cone check: a narrow Gaussian at x = (3, 0, ...), z = (1/2, 0, ...),
/// where |P| = 9 and 4|z| = 2, paired with the smooth kernel and with pair_K.
pub fn verify_cone(sig: Signature, cfg: &RunConfig) -> R<Artifact> {
    if sig.r != 0 {
        return Err(Error::RequiresRZero.into());
    }
    let (n, s) = (sig.n, sig.s);
    let mut passed = true;
    let support = if n == 2 && s == 1 {
        let off = shell(2, 1, 12, 0.1, 0.2, 0.0);
        let wide = shell(2, 1, 12, 0.1, 3.0, 0.0);
        let mr = pair_mr_with(&off, cfg.mr_budget)?;
        let k_off = pair_k_with(sig, &off, KernelSelector::HeavisideSign, cfg.k_budget(1))?;
        let k_wide = pair_k_with(sig, &wide, KernelSelector::HeavisideSign, cfg.k_budget(1))?;
        let scale = k_wide.value.norm();
        let ratio = mr.value.norm() / scale;
        passed &= ratio <= CONE_SUPPORT_TOL;
        json!({
            "test_function": "|x'|^24 exp(-|x'|^2/2 - |x''|^2/0.02 - z^2/(2 c^2))",
            "c_concentrated": 0.2,
            "c_wide": 3.0,
            "mr_concentrated": pr_json(&mr),
            "pair_k_concentrated": pr_json(&k_off),
            "scale_pair_k_wide": pr_json(&k_wide),
            "ratio": ratio,
            "tolerance": CONE_SUPPORT_TOL,
        })
    } else {
        Value::Null
    };
    let mut centre = vec![0.0; sig.dim()];
    centre[0] = 3.0;
    centre[2 * n] = 0.5;
    let phi = GaussPoly::isotropic(0.2, &centre);
    let off = pair_offcone(sig, &phi, cfg.offcone_nodes)?;
    let k = pair_k_with(sig, &phi, KernelSelector::plus(), cfg.k_budget(s))?;
    let e = rel(off.value, k.value);
    passed &= e <= CONE_MATCH_TOL;
    Ok(Artifact {
        name: "verify-cone".into(),
        json: json!({
            "command": "verify-cone",
            "sig": sig_json(sig),
            "support": support,
            "offcone": {
                "centre": centre,
                "sigma": 0.2,
                "smooth_kernel": pr_json(&off),
                "pair_k": pr_json(&k),
                "rel_err": e,
                "tolerance": CONE_MATCH_TOL,
            },
        }),
        csv: None,
        passed,
    })
}

pub fn verify_nonexistence(sig: Signature, eta0: Vec<f64>, delta: f64, flow_nodes: usize, cfg: &RunConfig) -> R<Artifact> {
    if sig.r == 0 {
        return usage("the witness needs r > 0");
    }
    let g = GroupStructure::from_signature(sig)?;
    let mut wc = WitnessConfig::new(sig, eta0, delta);
    wc.flow_nodes = flow_nodes;
    wc.grid_xi = cfg.grid_xi;
    wc.grid_eta = cfg.grid_eta;
    let w = build_witness(&g, wc.clone())?;
    let residual = certify_kernel_residual(&w)?;
    let mut t = Table::new(&["flow_nodes", "max_residual"]);
    let mut m = 8;
    let mut coarse = f64::NAN;
    while m < flow_nodes {
        let r = residual_at_nodes(&w, m)?;
        t.push(vec![m.to_string(), fmt17(r)]);
        if 2 * m == flow_nodes {
            coarse = r;
        }
        m *= 2;
    }
    t.push(vec![flow_nodes.to_string(), fmt17(residual.max_residual)]);
    if coarse.is_nan() {
        coarse = residual_at_nodes(&w, flow_nodes / 2)?;
    }
    let drop = coarse / residual.max_residual.max(f64::MIN_POSITIVE);
    let ns = nonsolvability_report(&w)?;
    let passed = residual.passed && drop >= DOUBLING_DROP && ns.passed;
    Ok(Artifact {
        name: "verify-nonexistence".into(),
        json: json!({
            "command": "verify-nonexistence",
            "witness": wc,
            "residual": residual,
            "residual_tolerance": RESIDUAL_TOL,
            "doubling": {"coarse_nodes": flow_nodes / 2, "coarse": coarse, "fine": residual.max_residual, "drop": drop, "required_drop": DOUBLING_DROP},
            "nonsolvability": ns,
            "delta_phi_tolerance": DELTA_PHI_TOL,
        }),
        csv: Some(t),
        passed,
    })
}

/// Fast checks of every module.
pub fn report(cfg: &RunConfig) -> R<Artifact> {
    let mut sections = serde_json::Map::new();
    let mut t = Table::new(&["section", "passed"]);
    let mut all = true;
    let mut add = |name: &str, a: Artifact| {
        all &= a.passed;
        t.push(vec![name.to_string(), a.passed.to_string()]);
        sections.insert(name.to_string(), a.json);
    };
    add("catalog", cmd_catalog()?);
    add("specfun", cmd_specfun(&[0.0, 0.5, 1.0, 1.5], 0.1, 20.0, 40)?);
    let mut gb = Vec::new();
    let mut gb_ok = true;
    for (n, s) in [(1, 2), (2, 1), (2, 2)] {
        let dev = gbar_check(Signature::new(0, s, n), cfg.gbar_points, cfg.seed)?;
        gb_ok &= dev <= GBAR_TOL;
        gb.push(json!({"n": n, "s": s, "points": cfg.gbar_points, "max_deviation": dev}));
    }
    add("gbar", Artifact { name: "gbar".into(), json: json!({"checks": gb, "tolerance": GBAR_TOL}), csv: None, passed: gb_ok });
    add("fs_2_2", verify_fs(Signature::new(0, 2, 2), &KernelSelector::plus(), 1, FS_TOL, cfg)?);
    add("fs_2_1_heaviside", verify_fs(Signature::new(0, 1, 2), &KernelSelector::HeavisideSign, 1, FS_TOL_HEAVISIDE, cfg)?);
    add("cone", verify_cone(Signature::new(0, 1, 2), cfg)?);
    let sig = Signature::new(1, 1, 2);
    add("nonexistence", verify_nonexistence(sig, default_eta0(sig), 0.5, cfg.flow_nodes, cfg)?);
    Ok(Artifact {
        name: "report".into(),
        json: json!({"command": "report", "sections": sections}),
        csv: Some(t),
        passed: all,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits() {
        assert_eq!(fmt17(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt17(-2.5), "-2.5000000000000000e0");
        let v = canonical(json!({"a": 1, "b": [0.5, f64::NAN], "c": {"d": 1e-300}}));
        assert_eq!(
            serde_json::to_string(&v).unwrap(),
            r#"{"a":1,"b":[5.0000000000000000e-1,null],"c":{"d":1.0000000000000000e-300}}"#
        );
    }

    #[test]
    fn signatures() {
        assert_eq!(parse_sig("1,1").unwrap(), Signature::new(1, 1, 2));
        assert_eq!(parse_sig("0, 2").unwrap(), Signature::new(0, 2, 2));
        assert_eq!(parse_sig("0,1,3").unwrap(), Signature::new(0, 1, 3));
        assert!(matches!(parse_sig("5,5"), Err(Failure::Usage(_))));
        assert!(matches!(parse_sig("a,b"), Err(Failure::Usage(_))));
        assert!(matches!(catalog_sig(Signature::new(0, 2, 1)), Err(Failure::Usage(_))));
    }

    #[test]
    fn csv_quoting() {
        let mut t = Table::new(&["name", "value"]);
        t.push(vec!["a,b".into(), "1".into()]);
        assert_eq!(t.render(), "name,value\n\"a,b\",1\n");
    }

    #[test]
    fn exit_codes() {
        assert_eq!(run(["uhyper", "catalog"]), EXIT_OK);
        assert_eq!(run(["uhyper", "frobnicate"]), EXIT_USAGE);
        assert_eq!(run(["uhyper", "verify-fs", "--n", "1", "--s", "2"]), EXIT_USAGE);
    }
}
