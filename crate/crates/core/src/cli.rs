//! Batch front end: config parsing, spectral sweeps, spatial evaluation,
//! validation and the algebra self-check.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{
    decompose, multiply_in_basis, product_table_residuals, realize_basis, BasisCoefficients, Mat3,
    SpectralPoint,
};
use crate::elastic::{
    assemble_g_elastic, assemble_u_elastic, elastic_interface_residuals, solve_elastic_spectral,
    ElasticLayerCoefficients, ElasticSpectralSolution, SourceKind,
};
use crate::hankel::{spatial_green, QuadratureSpec, Which};
use crate::maxwell::{
    assemble_ge, em_interface_residuals, solve_em_spectral, EmSpectralSolution,
};
use crate::oracle::{oracle_elastic_full, oracle_em_full};
use crate::stack::{LayerStack, Material, ProblemKind};
use crate::{Direction, Error};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SINGULAR: i32 = 3;
pub const EXIT_QUADRATURE: i32 = 4;

#[derive(Parser, Debug)]
#[command(name = "lmgf", version, about = "Layered-media Green's functions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Args, Debug, Clone)]
pub struct CommonArgs {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output path; overrides the config's `output.path`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Abort on the first singular or non-convergent sample.
    #[arg(long, global = true)]
    pub strict: bool,
    /// Selfcheck: also print the 9x9 per-pair residual table.
    #[arg(long, global = true)]
    pub verbose: bool,
    /// Seed for the randomized selfcheck samples.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (0 = rayon default).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// Scale all reaction coefficients by `1 + PERTURB` before validating.
    #[arg(long, global = true, hide = true)]
    pub perturb: Option<f64>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Spectral coefficients and tensors over a k_rho sweep.
    Spectral,
    /// Spatial Green's function at target points.
    Spatial,
    /// Residual, radiation, symmetry and oracle checks.
    Validate,
    /// Product-table and decomposition checks; needs no config.
    Selfcheck,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Problem {
    Maxwell,
    ElasticTensor,
    ElasticVector,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Field {
    #[default]
    E,
    H,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum MaterialConfig {
    Em { eps: f64, mu: f64 },
    Solid { rho: f64, lambda: f64, mu: f64 },
    Fluid { rho: f64, lambda: f64 },
    Vacuum,
}

impl MaterialConfig {
    fn build(&self) -> crate::Result<Material> {
        match *self {
            MaterialConfig::Em { eps, mu } => Material::em(eps, mu),
            MaterialConfig::Solid { rho, lambda, mu } => Material::solid(rho, lambda, mu),
            MaterialConfig::Fluid { rho, lambda } => Material::fluid(rho, lambda),
            MaterialConfig::Vacuum => Ok(Material::Vacuum),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StackConfig {
    pub interfaces: Vec<f64>,
    pub materials: Vec<MaterialConfig>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub z: f64,
    #[serde(default)]
    pub x: f64,
    #[serde(default)]
    pub y: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Linspace {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KRho {
    List(Vec<f64>),
    Linspace { linspace: Linspace },
}

impl KRho {
    pub fn values(&self) -> Vec<f64> {
        match self {
            KRho::List(v) => v.clone(),
            KRho::Linspace { linspace: l } => match l.count {
                0 => Vec::new(),
                1 => vec![l.start],
                n => (0..n)
                    .map(|i| l.start + (l.stop - l.start) * i as f64 / (n - 1) as f64)
                    .collect(),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub k_rho: KRho,
    #[serde(default)]
    pub alpha: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetsConfig {
    #[serde(default)]
    pub z: Vec<f64>,
    #[serde(default)]
    pub points: Vec<[f64; 3]>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub problem: Problem,
    pub omega: f64,
    #[serde(default)]
    pub loss: f64,
    pub stack: StackConfig,
    pub source: SourceConfig,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub targets: TargetsConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub quadrature: Option<QuadratureSpec>,
    /// Spatial Maxwell output: electric or magnetic tensor.
    #[serde(default)]
    pub field: Field,
}

/// Config problems; always exit code 2.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// A validated configuration with its stack built.
#[derive(Clone, Debug)]
pub struct Run {
    pub config: RunConfig,
    pub stack: LayerStack,
}

pub fn parse_config(text: &str) -> Result<Run, ConfigError> {
    let config: RunConfig =
        serde_json::from_str(text).map_err(|e| ConfigError(format!("config: {e}")))?;
    if config.schema_version != 1 {
        return Err(ConfigError(format!(
            "config: unsupported schema_version {} (expected 1)",
            config.schema_version
        )));
    }
    if !(config.omega.is_finite() && config.omega > 0.0) {
        return Err(ConfigError(format!("config: omega must be positive, got {}", config.omega)));
    }
    let materials = config
        .stack
        .materials
        .iter()
        .map(MaterialConfig::build)
        .collect::<crate::Result<Vec<_>>>()
        .map_err(|e| ConfigError(format!("config: stack.materials: {e}")))?;
    let stack = LayerStack::new(config.stack.interfaces.clone(), materials)
        .and_then(|s| s.with_loss(config.loss))
        .map_err(|e| ConfigError(format!("config: stack: {e}")))?;
    let expected = match config.problem {
        Problem::Maxwell => ProblemKind::Maxwell,
        _ => ProblemKind::Elastic,
    };
    if stack.kind() != expected {
        return Err(ConfigError(format!(
            "config: problem {:?} does not match {:?} materials",
            config.problem,
            stack.kind()
        )));
    }
    stack
        .locate_layer(config.source.z)
        .map_err(|e| ConfigError(format!("config: source.z: {e}")))?;
    if let Some(sweep) = &config.sweep {
        if let KRho::Linspace { linspace } = &sweep.k_rho {
            if !(linspace.start.is_finite() && linspace.stop.is_finite()) {
                return Err(ConfigError("config: sweep.k_rho.linspace must be finite".into()));
            }
        }
        if sweep.k_rho.values().iter().any(|k| !(k.is_finite() && *k >= 0.0)) {
            return Err(ConfigError("config: sweep.k_rho values must be finite and >= 0".into()));
        }
    }
    if let Some(q) = &config.quadrature {
        q.resolve(stack.max_abs_k(config.omega))
            .map_err(|e| ConfigError(format!("config: quadrature: {e}")))?;
    }
    Ok(Run { config, stack })
}

/// Output table: header plus rows of numeric cells (NaN marks a flagged
/// value) with one status string per row.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub leading: Vec<&'static str>,
    pub values: Vec<String>,
    pub rows: Vec<Row>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub leading: Vec<f64>,
    pub status: &'static str,
    pub values: Vec<f64>,
}

impl Table {
    pub fn header(&self) -> Vec<String> {
        let mut h: Vec<String> = self.leading.iter().map(|s| s.to_string()).collect();
        h.push("status".into());
        h.extend(self.values.iter().cloned());
        h
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.header().join(",");
        s.push('\n');
        for row in &self.rows {
            let mut cells: Vec<String> = row.leading.iter().map(|v| fmt_num(*v)).collect();
            cells.push(row.status.to_string());
            cells.extend(row.values.iter().map(|v| fmt_num(*v)));
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    pub fn to_json(&self) -> String {
        let header = self.header();
        let rows: Vec<serde_json::Value> = self
            .rows
            .iter()
            .map(|row| {
                let mut map = serde_json::Map::new();
                let mut names = header.iter();
                for v in &row.leading {
                    map.insert(names.next().unwrap().clone(), json_num(*v));
                }
                map.insert(names.next().unwrap().clone(), row.status.into());
                for v in &row.values {
                    map.insert(names.next().unwrap().clone(), json_num(*v));
                }
                serde_json::Value::Object(map)
            })
            .collect();
        let mut s = serde_json::to_string_pretty(&rows).expect("rows serialize");
        s.push('\n');
        s
    }
}

fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else {
        format!("{v:.16e}")
    }
}

fn json_num(v: f64) -> serde_json::Value {
    serde_json::Number::from_f64(v).map_or(serde_json::Value::Null, serde_json::Value::Number)
}

fn complex_names(prefix: &str, names: &[&str]) -> Vec<String> {
    names
        .iter()
        .flat_map(|n| [format!("{prefix}{n}_re"), format!("{prefix}{n}_im")])
        .collect()
}

const TENSOR_ENTRIES: [&str; 9] = ["11", "12", "13", "21", "22", "23", "31", "32", "33"];

fn tensor_names(prefix: &str) -> Vec<String> {
    complex_names(prefix, &TENSOR_ENTRIES)
}

fn push_complex(out: &mut Vec<f64>, c: Complex64) {
    out.push(c.re);
    out.push(c.im);
}

fn push_tensor(out: &mut Vec<f64>, m: &Mat3) {
    for r in 0..3 {
        for c in 0..3 {
            push_complex(out, m[(r, c)]);
        }
    }
}

/// Column names of the spectral output for a problem.
pub fn spectral_columns(problem: Problem) -> Vec<String> {
    match problem {
        Problem::Maxwell => {
            let mut v = complex_names("", &["b1", "b2", "b3"]);
            v.extend(complex_names("c", &["1", "2", "3", "4", "5"]));
            v.extend(tensor_names("ge"));
            v
        }
        Problem::ElasticTensor => {
            let mut v = complex_names("c", &["1", "2", "3", "4", "5"]);
            v.extend(tensor_names("g"));
            v
        }
        Problem::ElasticVector => {
            let mut v = complex_names("c", &["2", "3", "7"]);
            v.extend(complex_names("u", &["1", "2", "3"]));
            v
        }
    }
}

/// Column names of the spatial output.
pub fn spatial_columns() -> Vec<String> {
    tensor_names("g")
}

/// Outcome of one sample: values, or a flagged failure.
enum Sample {
    Ok(Vec<f64>, &'static str),
    Failed(&'static str, Error),
}

fn spectral_sample(run: &Run, k_rho: f64, z: f64) -> Sample {
    let cfg = &run.config;
    let point = SpectralPoint::from_polar(k_rho, cfg.sweep.as_ref().map_or(0.0, |s| s.alpha));
    let z_src = cfg.source.z;
    let result = (|| -> crate::Result<(Vec<f64>, &'static str)> {
        let mut v = Vec::new();
        let mut status = "ok";
        match cfg.problem {
            Problem::Maxwell => {
                let sol = solve_em_spectral(&run.stack, cfg.omega, k_rho, z_src)?;
                let ch = sol.channels(z)?;
                push_complex(&mut v, ch.b1.value());
                push_complex(&mut v, ch.b2.value());
                push_complex(&mut v, ch.b3.value());
                let tensor = assemble_ge(&sol, z)?;
                match tensor.coefficients(sol.degenerate_threshold()) {
                    Ok(c) => (0..5).for_each(|w| push_complex(&mut v, c.c[w])),
                    Err(_) => {
                        status = "degenerate";
                        v.extend([f64::NAN; 10]);
                    }
                }
                push_tensor(&mut v, &tensor.realize(&point));
            }
            Problem::ElasticTensor => {
                let sol =
                    solve_elastic_spectral(&run.stack, cfg.omega, k_rho, z_src, SourceKind::Tensor)?;
                let tensor = assemble_g_elastic(&sol, z)?;
                match tensor.coefficients(sol.degenerate_threshold()) {
                    Ok(c) => (0..5).for_each(|w| push_complex(&mut v, c.c[w])),
                    Err(_) => {
                        status = "degenerate";
                        v.extend([f64::NAN; 10]);
                    }
                }
                push_tensor(&mut v, &tensor.realize(&point));
            }
            Problem::ElasticVector => {
                let sol =
                    solve_elastic_spectral(&run.stack, cfg.omega, k_rho, z_src, SourceKind::Vector)?;
                let vector = assemble_u_elastic(&sol, z)?;
                match vector.coefficients(sol.degenerate_threshold()) {
                    Ok(c) => [c.c2, c.c3, c.c7].iter().for_each(|x| push_complex(&mut v, *x)),
                    Err(_) => {
                        status = "degenerate";
                        v.extend([f64::NAN; 6]);
                    }
                }
                let u = vector.realize(&point);
                (0..3).for_each(|i| push_complex(&mut v, u[i]));
            }
        }
        Ok((v, status))
    })();
    match result {
        Ok((v, s)) => Sample::Ok(v, s),
        Err(e @ (Error::SingularSystem { .. } | Error::BranchPoint { .. })) => {
            Sample::Failed("singular", e)
        }
        Err(e) => Sample::Failed("error", e),
    }
}

/// Failure that stops a command with a given exit code.
#[derive(Debug, Clone, PartialEq)]
pub struct Abort {
    pub code: i32,
    pub message: String,
}

fn with_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    if threads == 0 {
        return f();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

/// Spectral sweep: one row per `(k_rho, z)`, in input order.
pub fn spectral_table(run: &Run, strict: bool, threads: usize) -> Result<(Table, Vec<String>), Abort> {
    let cfg = &run.config;
    let sweep = cfg.sweep.as_ref().ok_or_else(|| Abort {
        code: EXIT_CONFIG,
        message: "config: spectral needs a `sweep`".into(),
    })?;
    if cfg.targets.z.is_empty() && !cfg.targets.points.is_empty() {
        return Err(Abort {
            code: EXIT_CONFIG,
            message: "config: spectral needs `targets.z`".into(),
        });
    }
    let jobs: Vec<(f64, f64)> = sweep
        .k_rho
        .values()
        .into_iter()
        .flat_map(|k| cfg.targets.z.iter().map(move |&z| (k, z)))
        .collect();
    let samples: Vec<Sample> = with_pool(threads, || {
        jobs.par_iter().map(|&(k, z)| spectral_sample(run, k, z)).collect()
    });
    let columns = spectral_columns(cfg.problem);
    let mut rows = Vec::with_capacity(jobs.len());
    let mut warnings = Vec::new();
    for (&(k, z), sample) in jobs.iter().zip(samples) {
        match sample {
            Sample::Ok(values, status) => rows.push(Row {
                leading: vec![k, z],
                status,
                values,
            }),
            Sample::Failed(status, e) => {
                if status == "error" {
                    return Err(Abort {
                        code: EXIT_CONFIG,
                        message: format!("k_rho = {k}, z = {z}: {e}"),
                    });
                }
                if strict {
                    return Err(Abort {
                        code: EXIT_SINGULAR,
                        message: format!("k_rho = {k}, z = {z}: {e}"),
                    });
                }
                warnings.push(format!("warning: k_rho = {k}, z = {z}: {e}"));
                rows.push(Row {
                    leading: vec![k, z],
                    status,
                    values: vec![f64::NAN; columns.len()],
                });
            }
        }
    }
    Ok((
        Table {
            leading: vec!["k_rho", "z"],
            values: columns,
            rows,
        },
        warnings,
    ))
}

/// Spatial evaluation: one row per target point, in input order.
pub fn spatial_table(run: &Run, strict: bool, threads: usize) -> Result<(Table, Vec<String>), Abort> {
    let cfg = &run.config;
    let spec = cfg.quadrature.unwrap_or_default();
    let which = match (cfg.problem, cfg.field) {
        (Problem::Maxwell, Field::E) => Which::Ge,
        (Problem::Maxwell, Field::H) => Which::Gh,
        (Problem::ElasticTensor, _) => Which::Elastic,
        (Problem::ElasticVector, _) => Which::ElasticVector,
    };
    let source = [cfg.source.x, cfg.source.y, cfg.source.z];
    let stack = run.stack.clone();
    let results: Vec<crate::Result<Mat3>> = with_pool(threads, || {
        cfg.targets
            .points
            .par_iter()
            .map(|&p| spatial_green(&stack, cfg.omega, source, p, which, &spec))
            .collect()
    });
    let columns = spatial_columns();
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    for (p, r) in cfg.targets.points.iter().zip(results) {
        match r {
            Ok(m) => {
                let mut v = Vec::new();
                push_tensor(&mut v, &m);
                rows.push(Row {
                    leading: p.to_vec(),
                    status: "ok",
                    values: v,
                });
            }
            Err(e) => {
                let (status, code) = match e {
                    Error::NonConvergent { .. } => ("nonconvergent", EXIT_QUADRATURE),
                    Error::SingularSystem { .. } | Error::BranchPoint { .. } => {
                        ("singular", EXIT_SINGULAR)
                    }
                    _ => {
                        return Err(Abort {
                            code: EXIT_CONFIG,
                            message: format!("target {p:?}: {e}"),
                        })
                    }
                };
                if strict {
                    return Err(Abort {
                        code,
                        message: format!("target {p:?}: {e}"),
                    });
                }
                warnings.push(format!("warning: target {p:?}: {e}"));
                rows.push(Row {
                    leading: p.to_vec(),
                    status,
                    values: vec![f64::NAN; columns.len()],
                });
            }
        }
    }
    Ok((
        Table {
            leading: vec!["x", "y", "z"],
            values: columns,
            rows,
        },
        warnings,
    ))
}

/// One named validation check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    fn new(name: &str, value: f64, threshold: f64) -> Self {
        Check {
            name: name.into(),
            value,
            threshold,
            passed: value <= threshold,
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{:<28} max = {:.3e}  threshold = {:.1e}  {}",
            self.name,
            self.value,
            self.threshold,
            if self.passed { "PASS" } else { "FAIL" }
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

const RESIDUAL_TOL: f64 = 1e-10;
const B3_TOL: f64 = 1e-6;
const SYMMETRY_TOL: f64 = 1e-12;
const ORACLE_TOL: f64 = 1e-9;
const CONDITION_GATE: f64 = 1e8;

fn rotation(beta: f64) -> Mat3 {
    let (s, c) = beta.sin_cos();
    let r = |v: f64| Complex64::new(v, 0.0);
    Mat3::new(r(c), r(-s), r(0.0), r(s), r(c), r(0.0), r(0.0), r(0.0), r(1.0))
}

fn rel_diff(a: &Mat3, b: &Mat3) -> f64 {
    let s = a.norm().max(b.norm());
    if s == 0.0 {
        0.0
    } else {
        (a - b).norm() / s
    }
}

enum Solved {
    Em(EmSpectralSolution),
    Elastic(ElasticSpectralSolution),
}

/// Validation suite over the configured sweep and depths. Singular samples
/// are skipped with a warning.
pub fn validate(run: &Run, perturb: Option<f64>) -> Result<ValidationReport, Abort> {
    let cfg = &run.config;
    let sweep = cfg.sweep.as_ref().ok_or_else(|| Abort {
        code: EXIT_CONFIG,
        message: "config: validate needs a `sweep`".into(),
    })?;
    let stack = &run.stack;
    let omega = cfg.omega;
    let z_src = cfg.source.z;
    let alpha = sweep.alpha;
    let mut depths: Vec<f64> = cfg.targets.z.clone();
    if depths.is_empty() {
        depths = default_depths(stack, z_src);
    }
    let mut residual = 0.0f64;
    let mut radiation = 0.0f64;
    let mut b3 = 0.0f64;
    let mut symmetry = 0.0f64;
    let mut oracle = 0.0f64;
    let mut oracle_count = 0usize;
    let mut warnings = Vec::new();
    let wavelength = 2.0 * std::f64::consts::PI / stack.max_abs_k(omega);
    for k_rho in sweep.k_rho.values() {
        let point = SpectralPoint::from_polar(k_rho, alpha);
        let solved = match cfg.problem {
            Problem::Maxwell => solve_em_spectral(stack, omega, k_rho, z_src).map(Solved::Em),
            Problem::ElasticTensor => {
                solve_elastic_spectral(stack, omega, k_rho, z_src, SourceKind::Tensor)
                    .map(Solved::Elastic)
            }
            Problem::ElasticVector => {
                solve_elastic_spectral(stack, omega, k_rho, z_src, SourceKind::Vector)
                    .map(Solved::Elastic)
            }
        };
        let solved = match solved {
            Ok(s) => s,
            Err(e @ (Error::SingularSystem { .. } | Error::BranchPoint { .. })) => {
                warnings.push(format!("warning: k_rho = {k_rho}: {e}; skipped"));
                continue;
            }
            Err(e) => {
                return Err(Abort {
                    code: EXIT_CONFIG,
                    message: format!("k_rho = {k_rho}: {e}"),
                })
            }
        };
        let fail = |e: Error| Abort {
            code: EXIT_CONFIG,
            message: format!("k_rho = {k_rho}: {e}"),
        };
        let condition;
        match &solved {
            Solved::Em(sol) => {
                let sol = match perturb {
                    Some(p) => sol.perturbed(p),
                    None => sol.clone(),
                };
                condition = sol.condition();
                for report in em_interface_residuals(&sol, &point).map_err(fail)? {
                    residual = residual.max(report.max());
                }
                let last = sol.num_layers() - 1;
                radiation = radiation
                    .max(sol.b1_r(0, Direction::Down).norm())
                    .max(sol.b2_r(0, Direction::Down).norm())
                    .max(sol.b1_r(last, Direction::Up).norm())
                    .max(sol.b2_r(last, Direction::Up).norm());
                b3 = b3.max(b3_identity(stack, omega, k_rho, z_src, wavelength, &sol).map_err(fail)?);
            }
            Solved::Elastic(sol) => {
                let sol = match perturb {
                    Some(p) => sol.perturbed(p),
                    None => sol.clone(),
                };
                condition = sol.condition();
                for report in elastic_interface_residuals(&sol).map_err(fail)? {
                    residual = residual.max(report.max());
                }
                let coeffs = sol.coefficients();
                let top = coeffs[0].direction(Direction::Down);
                let bottom = coeffs[coeffs.len() - 1].direction(Direction::Up);
                for c in top.iter().chain(&bottom) {
                    radiation = radiation.max(c.norm());
                }
            }
        }
        for &z in &depths {
            let beta = 1.234;
            let rotated = SpectralPoint::from_polar(k_rho, alpha + beta);
            let tensor = |p: &SpectralPoint| -> crate::Result<Mat3> {
                Ok(match &solved {
                    Solved::Em(sol) => assemble_ge(sol, z)?.realize(p),
                    Solved::Elastic(sol) if sol.kind == SourceKind::Tensor => {
                        assemble_g_elastic(sol, z)?.realize(p)
                    }
                    Solved::Elastic(sol) => {
                        let mut m = Mat3::zeros();
                        m.set_column(0, &assemble_u_elastic(sol, z)?.realize(p));
                        m
                    }
                })
            };
            let (g0, g1) = match (tensor(&point), tensor(&rotated)) {
                (Ok(a), Ok(b)) => (a, b),
                (Err(Error::TargetInVacuum { .. }), _) => continue,
                (Err(e), _) | (_, Err(e)) => return Err(fail(e)),
            };
            let r = rotation(beta);
            let expected = match cfg.problem {
                Problem::ElasticVector => r * g0,
                _ => r * g0 * r.transpose(),
            };
            symmetry = symmetry.max(rel_diff(&g1, &expected));
            if condition >= CONDITION_GATE {
                warnings.push(format!(
                    "warning: k_rho = {k_rho}: condition {condition:.1e} above gate; oracle skipped"
                ));
                continue;
            }
            let full = match cfg.problem {
                Problem::Maxwell => oracle_em_full(stack, omega, &point, z_src),
                Problem::ElasticTensor => oracle_elastic_full(stack, omega, &point, z_src, false),
                Problem::ElasticVector => oracle_elastic_full(stack, omega, &point, z_src, true),
            };
            match full.and_then(|o| Ok((o.field(z)?, o.amplitude_scale()))) {
                Ok((o, scale)) => {
                    let s = scale.max(g0.norm()).max(o.norm());
                    if s > 0.0 {
                        oracle = oracle.max((g0 - o).norm() / s);
                    }
                    oracle_count += 1;
                }
                Err(e @ (Error::SingularSystem { .. } | Error::BranchPoint { .. })) => {
                    warnings.push(format!("warning: k_rho = {k_rho}: oracle {e}; skipped"));
                }
                Err(e) => return Err(fail(e)),
            }
        }
    }
    let mut checks = vec![
        Check::new("interface residual", residual, RESIDUAL_TOL),
        Check::new("radiation coefficients", radiation, 0.0),
    ];
    if cfg.problem == Problem::Maxwell {
        checks.push(Check::new("b3 = -dz' b2", b3, B3_TOL));
    }
    checks.push(Check::new("rotational covariance", symmetry, SYMMETRY_TOL));
    checks.push(Check::new("oracle agreement", oracle, ORACLE_TOL));
    if oracle_count == 0 {
        warnings.push("warning: no oracle comparisons were made".into());
    }
    Ok(ValidationReport { checks, warnings })
}

/// One depth inside each non-vacuum layer, avoiding the source.
fn default_depths(stack: &LayerStack, z_src: f64) -> Vec<f64> {
    let d = stack.interfaces();
    let mut out = Vec::new();
    for t in 0..stack.num_layers() {
        if stack.materials()[t] == Material::Vacuum {
            continue;
        }
        let z = match (t.checked_sub(1).map(|i| d[i]), d.get(t).copied()) {
            (None, None) => z_src + 1.0,
            (None, Some(lo)) => lo + 0.5,
            (Some(hi), None) => hi - 0.5,
            (Some(hi), Some(lo)) => 0.5 * (hi + lo),
        };
        out.push(if z == z_src { z + 0.25 * (z - d.first().copied().unwrap_or(0.0)).abs().max(0.1) } else { z });
    }
    out
}

/// Largest relative gap between the analytic `b3` amplitudes and the
/// central difference `-(b2(z'+h) - b2(z'-h))/(2h)`.
fn b3_identity(
    stack: &LayerStack,
    omega: f64,
    k_rho: f64,
    z_src: f64,
    wavelength: f64,
    sol: &EmSpectralSolution,
) -> crate::Result<f64> {
    let h = 1e-5 * wavelength;
    let plus = solve_em_spectral(stack, omega, k_rho, z_src + h)?;
    let minus = solve_em_spectral(stack, omega, k_rho, z_src - h)?;
    if plus.source_layer != sol.source_layer || minus.source_layer != sol.source_layer {
        return Ok(0.0);
    }
    let mut scale = 0.0f64;
    let mut worst = 0.0f64;
    for t in 0..sol.num_layers() {
        for dir in Direction::BOTH {
            let fd = -(plus.b2_r(t, dir) - minus.b2_r(t, dir)) / (2.0 * h);
            scale = scale.max(sol.b3_r(t, dir).norm());
            worst = worst.max((fd - sol.b3_r(t, dir)).norm());
        }
    }
    Ok(if scale == 0.0 { worst } else { worst / scale })
}

/// Results of the built-in algebra suite.
#[derive(Clone, Debug, PartialEq)]
pub struct SelfCheck {
    pub checks: Vec<Check>,
    /// `pair_max[u][v]`: largest scaled residual of `J_u J_v`.
    pub pair_max: [[f64; 9]; 9],
}

pub fn selfcheck(seed: u64) -> SelfCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pair_max = [[0.0f64; 9]; 9];
    let mut table = 0.0f64;
    for _ in 0..200 {
        let p = SpectralPoint::from_cartesian(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
        let scale = 1.0 + p.k_rho.powi(4);
        let res = product_table_residuals(&p);
        for u in 0..9 {
            for v in 0..9 {
                let r = res[u][v] / scale;
                pair_max[u][v] = pair_max[u][v].max(r);
                table = table.max(r);
            }
        }
    }
    let mut closure = 0.0f64;
    let mut agreement = 0.0f64;
    let mut round_trip = 0.0f64;
    let random_c = |rng: &mut ChaCha8Rng| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    for _ in 0..100 {
        let k_rho = 10f64.powf(rng.gen_range(-3.0..3.0));
        let p = SpectralPoint::from_polar(k_rho, rng.gen_range(0.0..std::f64::consts::TAU));
        let a = BasisCoefficients::restricted(std::array::from_fn(|_| random_c(&mut rng)));
        let b = BasisCoefficients::restricted(std::array::from_fn(|_| random_c(&mut rng)));
        let prod = multiply_in_basis(&a, &b, Complex64::new(p.k_rho_sq(), 0.0));
        if !prod.restricted || prod.c[5..].iter().any(|c| *c != Complex64::new(0.0, 0.0)) {
            closure = f64::INFINITY;
        }
        let full_a = BasisCoefficients::new(std::array::from_fn(|_| random_c(&mut rng)));
        let full_b = BasisCoefficients::new(std::array::from_fn(|_| random_c(&mut rng)));
        if (1e-1..=1e1).contains(&k_rho) {
            let direct = decompose(&(full_a.realize(&p) * full_b.realize(&p)), &p);
            let table_prod = multiply_in_basis(&full_a, &full_b, Complex64::new(p.k_rho_sq(), 0.0));
            if let Ok(d) = direct {
                let diff: f64 = (0..9).map(|w| (d.c[w] - table_prod.c[w]).norm_sqr()).sum::<f64>().sqrt();
                agreement = agreement.max(diff / table_prod.norm().max(f64::MIN_POSITIVE));
            }
        }
        let back = decompose(&full_a.realize(&p), &p)
            .map_or(f64::INFINITY, |d| weighted_rel_diff(&d, &full_a, &p));
        round_trip = round_trip.max(back);
    }
    SelfCheck {
        checks: vec![
            Check::new("product table", table, 1e-13),
            Check::new("restricted ring closure", closure, 0.0),
            Check::new("table vs decompose", agreement, 1e-11),
            Check::new("decompose round trip", round_trip, 1e-12),
        ],
        pair_max,
    }
}

/// Coefficient difference with channel `w` weighted by `|J_w|`, the norm in
/// which realization is well conditioned.
pub fn weighted_rel_diff(a: &BasisCoefficients, b: &BasisCoefficients, p: &SpectralPoint) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for w in 0..9 {
        let s = realize_basis(w + 1, p).norm_squared();
        num += (a.c[w] - b.c[w]).norm_sqr() * s;
        den += b.c[w].norm_sqr() * s;
    }
    (num / den).sqrt()
}

fn read_run(common: &CommonArgs) -> Result<Run, Abort> {
    let path = common.config.as_ref().ok_or_else(|| Abort {
        code: EXIT_CONFIG,
        message: "--config is required".into(),
    })?;
    let text = std::fs::read_to_string(path).map_err(|e| Abort {
        code: EXIT_CONFIG,
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    parse_config(&text).map_err(|e| Abort {
        code: EXIT_CONFIG,
        message: e.0,
    })
}

fn write_output(common: &CommonArgs, run: &Run, text: &str) -> Result<(), Abort> {
    let path = common.out.clone().or_else(|| run.config.output.path.clone());
    match path {
        Some(p) => std::fs::write(&p, text).map_err(|e| Abort {
            code: EXIT_CONFIG,
            message: format!("cannot write {}: {e}", p.display()),
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn render(table: &Table, format: Format) -> String {
    match format {
        Format::Csv => table.to_csv(),
        Format::Json => table.to_json(),
    }
}

fn execute(cli: &Cli) -> Result<i32, Abort> {
    let common = &cli.common;
    match cli.command {
        Command::Selfcheck => {
            let report = selfcheck(common.seed);
            if common.verbose {
                let mut s = String::from("max scaled residual per pair (row u, column v)\n");
                for row in &report.pair_max {
                    for v in row {
                        let _ = write!(s, " {v:9.2e}");
                    }
                    s.push('\n');
                }
                print!("{s}");
            }
            for c in &report.checks {
                println!("{}", c.line());
            }
            Ok(if report.checks.iter().all(|c| c.passed) {
                EXIT_OK
            } else {
                EXIT_VALIDATION
            })
        }
        Command::Spectral | Command::Spatial => {
            let run = read_run(common)?;
            let (table, warnings) = if cli.command == Command::Spectral {
                spectral_table(&run, common.strict, common.threads)?
            } else {
                spatial_table(&run, common.strict, common.threads)?
            };
            for w in &warnings {
                eprintln!("{w}");
            }
            write_output(common, &run, &render(&table, run.config.output.format))?;
            Ok(EXIT_OK)
        }
        Command::Validate => {
            let run = read_run(common)?;
            let report = with_pool(common.threads, || validate(&run, common.perturb))?;
            for w in &report.warnings {
                eprintln!("{w}");
            }
            for c in &report.checks {
                println!("{}", c.line());
            }
            if common.out.is_some() || run.config.output.path.is_some() {
                let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
                text.push('\n');
                write_output(common, &run, &text)?;
            }
            Ok(if report.passed() { EXIT_OK } else { EXIT_VALIDATION })
        }
    }
}

/// Parse arguments and run; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_CONFIG,
            };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(abort) => {
            eprintln!("error: {}", abort.message);
            abort.code
        }
    }
}

/// Radiation-zero view used by tests: prohibited-direction coefficients of
/// the outermost layers.
pub fn prohibited_coefficients(coeffs: &[ElasticLayerCoefficients]) -> Vec<Complex64> {
    let mut v = coeffs[0].direction(Direction::Down);
    v.extend(coeffs[coeffs.len() - 1].direction(Direction::Up));
    v
}
