//! Run configuration, result serialization and image output.
//!
//! Configs and results are JSON, histories and raw fields are CSV, images are
//! binary PGM. Everything here works in `f64`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::diagnostics::DiagnosticsReport;
use crate::error::{Error, Result};
use crate::grid::{Container, Field, Grid, Shape, Support};
use crate::optimizer::{
    Certificate, HistoryRow, InitialSupport, OptimizeConfig, OptimizeResult, Strategy,
};
use crate::spectral::{EigenOptions, Objective};
use crate::theory::{thresholds_with_constant, PenaltyKind, PenaltyParams, Thresholds};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ContainerSpec {
    /// Side length of the cube `[0, side]^n`.
    Box(f64),
    /// Radius of the ball inscribed in `[0, 2r]^n`.
    Ball(f64),
}

impl ContainerSpec {
    pub fn to_container(self) -> Container<f64> {
        match self {
            ContainerSpec::Box(side) => Container::Box { side },
            ContainerSpec::Ball(radius) => Container::Ball { radius },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsBase {
    Eps1,
    Eps0,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelativeEps {
    pub fraction_of: EpsBase,
    pub factor: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EpsSpec {
    Value(f64),
    Relative(RelativeEps),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InitSpec {
    Ball {
        #[serde(default = "default_volume_factor")]
        volume_factor: f64,
    },
    FullContainer,
    /// Field CSV as written by [`write_field_csv`]; nonzero values are active.
    File(PathBuf),
}

fn default_volume_factor() -> f64 {
    1.5
}

impl Default for InitSpec {
    fn default() -> Self {
        InitSpec::Ball {
            volume_factor: default_volume_factor(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnosticsSpec {
    pub enabled: bool,
    pub monotonicity_pairs: usize,
    pub profile_radius: Option<f64>,
    pub gamma_tol: Option<f64>,
    pub density_alpha: f64,
    pub scale_factor: f64,
    pub scale_tol: f64,
}

impl Default for DiagnosticsSpec {
    fn default() -> Self {
        DiagnosticsSpec {
            enabled: true,
            monotonicity_pairs: 4,
            profile_radius: None,
            gamma_tol: None,
            density_alpha: 0.5,
            scale_factor: 0.5,
            scale_tol: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dim: usize,
    pub omega0: f64,
    pub container: ContainerSpec,
    #[serde(default = "defaults::cells_per_side")]
    pub cells_per_side: usize,
    /// Defaults to `0.9 · eps1`.
    #[serde(default)]
    pub eps: Option<EpsSpec>,
    #[serde(default)]
    pub penalty: PenaltyKind,
    #[serde(default)]
    pub objective: Objective,
    #[serde(default)]
    pub strategy: Strategy,
    #[serde(default)]
    pub init: InitSpec,
    #[serde(default = "defaults::sweep_size")]
    pub sweep_size: usize,
    #[serde(default = "defaults::tol")]
    pub tol: f64,
    #[serde(default = "defaults::max_iter")]
    pub max_iter: usize,
    #[serde(default = "defaults::max_outer")]
    pub max_outer: usize,
    #[serde(default = "defaults::stall_limit")]
    pub stall_limit: usize,
    #[serde(default)]
    pub seed: u64,
    /// Replaces the computed symmetrization constant.
    #[serde(default)]
    pub c_n: Option<f64>,
    #[serde(default = "defaults::output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub diagnostics: DiagnosticsSpec,
    /// Shape used by the `solve` command; defaults to a centered ball of volume ω₀.
    #[serde(default)]
    pub shape: Option<Shape<f64>>,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

mod defaults {
    use std::path::PathBuf;

    pub fn cells_per_side() -> usize {
        128
    }
    pub fn sweep_size() -> usize {
        12
    }
    pub fn tol() -> f64 {
        1e-8
    }
    pub fn max_iter() -> usize {
        10_000
    }
    pub fn max_outer() -> usize {
        200
    }
    pub fn stall_limit() -> usize {
        5
    }
    pub fn output_dir() -> PathBuf {
        PathBuf::from("out")
    }
}

/// Everything needed to run the optimizer, derived from a [`RunConfig`].
#[derive(Clone, Debug)]
pub struct Prepared {
    pub grid: Arc<Grid<f64>>,
    pub params: PenaltyParams<f64>,
    pub thresholds: Thresholds<f64>,
    pub optimize: OptimizeConfig<f64>,
}

impl RunConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        parse_config(text, Path::new("<config>"))
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=4).contains(&self.dim) {
            return Err(Error::Config(format!(
                "dim must be between 1 and 4, got {}",
                self.dim
            )));
        }
        if self.cells_per_side < 2 {
            return Err(Error::Config(format!(
                "cells_per_side must be at least 2, got {}",
                self.cells_per_side
            )));
        }
        let size = match self.container {
            ContainerSpec::Box(s) | ContainerSpec::Ball(s) => s,
        };
        if !(size > 0.0 && size.is_finite()) {
            return Err(Error::Config(format!(
                "container size must be positive, got {size}"
            )));
        }
        if !(self.omega0 > 0.0 && self.omega0.is_finite()) {
            return Err(Error::Config(format!(
                "omega0 must be positive, got {}",
                self.omega0
            )));
        }
        let measure = self.container.to_container().measure(self.dim);
        if !(self.omega0 < 0.9 * measure) {
            return Err(Error::Config(format!(
                "omega0 = {} must be below 0.9 x container measure = {} (measure {measure})",
                self.omega0,
                0.9 * measure
            )));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        if let Some(EpsSpec::Value(e)) | Some(EpsSpec::Relative(RelativeEps { factor: e, .. })) =
            self.eps
        {
            if !(e > 0.0 && e.is_finite()) {
                return Err(Error::Config(format!("eps must be positive, got {e}")));
            }
        }
        if let InitSpec::Ball { volume_factor } = self.init {
            if !(volume_factor > 0.0) {
                return Err(Error::Config(format!(
                    "init volume_factor must be positive, got {volume_factor}"
                )));
            }
        }
        Ok(())
    }

    /// The penalty parameter with relative forms resolved.
    pub fn resolved_eps(&self) -> Result<f64> {
        let base = thresholds_with_constant(self.dim, self.omega0, 1.0, self.c_n)?;
        Ok(match self.eps {
            None => 0.9 * base.eps1,
            Some(EpsSpec::Value(e)) => e,
            Some(EpsSpec::Relative(r)) => {
                r.factor
                    * match r.fraction_of {
                        EpsBase::Eps1 => base.eps1,
                        EpsBase::Eps0 => base.eps0,
                    }
            }
        })
    }

    pub fn eigen_options(&self) -> EigenOptions<f64> {
        EigenOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            ..EigenOptions::default()
        }
    }

    pub fn resolve_path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn output_paths(&self) -> OutputPaths {
        OutputPaths::new(self.resolve_path(&self.output_dir))
    }

    pub fn build_grid(&self) -> Result<Arc<Grid<f64>>> {
        Grid::build(self.dim, self.cells_per_side, self.container.to_container())
    }

    pub fn prepare(&self) -> Result<Prepared> {
        self.validate()?;
        let grid = self.build_grid()?;
        let eps = self.resolved_eps()?;
        let params = PenaltyParams::new(self.penalty, eps, self.omega0)?;
        let thresholds = thresholds_with_constant(self.dim, self.omega0, eps, self.c_n)?;
        let init = match &self.init {
            InitSpec::Ball { volume_factor } => InitialSupport::Ball {
                volume_factor: *volume_factor,
            },
            InitSpec::FullContainer => InitialSupport::FullContainer,
            InitSpec::File(p) => {
                InitialSupport::Explicit(read_support_csv(&self.resolve_path(p), &grid)?)
            }
        };
        let mut optimize = OptimizeConfig::new(grid.clone(), params);
        optimize.objective = self.objective;
        optimize.strategy = self.strategy;
        optimize.init = init;
        optimize.sweep_size = self.sweep_size;
        optimize.eigen = self.eigen_options();
        optimize.max_outer = self.max_outer;
        optimize.stall_limit = self.stall_limit;
        optimize.seed = self.seed;
        optimize.validate()?;
        Ok(Prepared {
            grid,
            params,
            thresholds,
            optimize,
        })
    }
}

fn parse_config(text: &str, path: &Path) -> Result<RunConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let inner = e.inner();
        if inner.is_syntax() || inner.is_eof() {
            let source = serde_json::from_str::<Value>(text)
                .err()
                .unwrap_or_else(|| e.into_inner());
            Error::Json {
                path: path.to_path_buf(),
                source,
            }
        } else {
            Error::Config(format!(
                "{}: field `{}`: {}",
                path.display(),
                e.path(),
                inner
            ))
        }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn read_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut cfg = parse_config(&text, path)?;
    cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(cfg)
}

#[derive(Clone, Debug)]
pub struct OutputPaths {
    pub dir: PathBuf,
}

impl OutputPaths {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        OutputPaths { dir: dir.into() }
    }
    pub fn history(&self) -> PathBuf {
        self.dir.join("history.csv")
    }
    pub fn result(&self) -> PathBuf {
        self.dir.join("result.json")
    }
    pub fn support_image(&self) -> PathBuf {
        self.dir.join("support.pgm")
    }
    pub fn field_image(&self) -> PathBuf {
        self.dir.join("abs_u.pgm")
    }
    pub fn field_csv(&self) -> PathBuf {
        self.dir.join("field.csv")
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
    }
    fs::write(path, bytes).map_err(io_err(path))
}

/// Fixed-point rendering with 12 significant digits.
pub fn format_sig12(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (11 - magnitude).max(0) as usize;
    // rounding may carry into a new digit (9.99..→10.0); one more pass settles it
    let s = format!("{:.*}", decimals, x);
    let rounded: f64 = s.parse().unwrap_or(x);
    let m2 = rounded.abs().log10().floor() as i32;
    if m2 != magnitude {
        format!("{:.*}", (11 - m2).max(0) as usize, x)
    } else {
        s
    }
}

pub fn history_csv(history: &[HistoryRow<f64>]) -> String {
    let mut out = String::from("iter,I,lambda,volume,moved_cells\n");
    for r in history {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.iteration,
            format_sig12(r.value),
            format_sig12(r.lambda),
            format_sig12(r.volume),
            r.moved_cells
        );
    }
    out
}

pub fn write_history_csv(path: &Path, history: &[HistoryRow<f64>]) -> Result<()> {
    write_file(path, history_csv(history).as_bytes())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PgmScale {
    /// Value mapped to 0.
    pub min: f64,
    /// Value mapped to 255.
    pub max: f64,
}

/// Binary PGM of the `N × N` nodes with indices `0..N` on the first two axes
/// (the last node on each axis lies on the container boundary). Top row is
/// the largest `y`; 3-D grids are cut at the middle `z` slice.
pub fn pgm_bytes(grid: &Grid<f64>, values: &[f64]) -> (Vec<u8>, PgmScale) {
    let n = grid.cells_per_side();
    let dim = grid.dim();
    let (width, height) = if dim == 1 { (n, 1) } else { (n, n) };
    let mut multi = vec![0isize; dim];
    if dim >= 3 {
        for m in multi.iter_mut().skip(2) {
            *m = (n / 2) as isize;
        }
    }
    let mut pixels = Vec::with_capacity(width * height);
    for row in 0..height {
        for col in 0..width {
            multi[0] = col as isize;
            if dim >= 2 {
                multi[1] = (height - 1 - row) as isize;
            }
            let idx = grid
                .linear_index(&multi)
                .expect("pixel inside the node array");
            pixels.push(values[idx]);
        }
    }
    let min = pixels.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = pixels.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut bytes = format!("P5\n{width} {height}\n255\n").into_bytes();
    let range = max - min;
    bytes.extend(pixels.iter().map(|&v| {
        if range > 0.0 {
            (255.0 * (v - min) / range).round() as u8
        } else if v != 0.0 {
            255
        } else {
            0
        }
    }));
    (bytes, PgmScale { min, max })
}

pub fn write_pgm(path: &Path, grid: &Grid<f64>, values: &[f64]) -> Result<PgmScale> {
    let (bytes, scale) = pgm_bytes(grid, values);
    write_file(path, &bytes)?;
    Ok(scale)
}

const AXES: [&str; 4] = ["x", "y", "z", "w"];
const INDICES: [&str; 4] = ["i", "j", "k", "l"];

pub fn field_csv(field: &Field<f64>) -> String {
    let grid = field.grid();
    let dim = grid.dim();
    let mut out = String::new();
    let header: Vec<&str> = INDICES[..dim]
        .iter()
        .chain(&AXES[..dim])
        .copied()
        .chain(["u"])
        .collect();
    out.push_str(&header.join(","));
    out.push('\n');
    let mut p = vec![0.0; dim];
    for (idx, &u) in field.values().iter().enumerate() {
        grid.position_into(idx, &mut p);
        for a in 0..dim {
            let _ = write!(out, "{},", grid.axis_index(idx, a));
        }
        for x in &p {
            let _ = write!(out, "{x},");
        }
        let _ = writeln!(out, "{u}");
    }
    out
}

pub fn write_field_csv(path: &Path, field: &Field<f64>) -> Result<()> {
    write_file(path, field_csv(field).as_bytes())
}

/// Reads a field CSV and returns the support of its nonzero values.
pub fn read_support_csv(path: &Path, grid: &Arc<Grid<f64>>) -> Result<Support<f64>> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let dim = grid.dim();
    let bad = |line: usize, what: &str| Error::Config(format!("{}:{line}: {what}", path.display()));
    let mut active = vec![false; grid.node_count()];
    for (k, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 2 * dim + 1 {
            return Err(bad(
                k + 1,
                &format!("expected {} columns, found {}", 2 * dim + 1, cols.len()),
            ));
        }
        let mut multi = Vec::with_capacity(dim);
        for c in &cols[..dim] {
            multi.push(
                c.trim()
                    .parse::<isize>()
                    .map_err(|_| bad(k + 1, "bad node index"))?,
            );
        }
        let u: f64 = cols[2 * dim]
            .trim()
            .parse()
            .map_err(|_| bad(k + 1, "bad value"))?;
        let idx = grid
            .linear_index(&multi)
            .ok_or_else(|| bad(k + 1, "node index outside the grid"))?;
        if u != 0.0 {
            active[idx] = true;
        }
    }
    Support::from_active(grid.clone(), active)
}

/// What a full optimization run writes.
pub struct RunRecord<'a> {
    pub config: &'a RunConfig,
    pub thresholds: &'a Thresholds<f64>,
    pub result: &'a OptimizeResult<f64>,
    pub certificate: &'a Certificate<f64>,
    pub report: Option<&'a DiagnosticsReport<f64>>,
}

/// The deterministic part of the result JSON.
pub fn result_payload(record: &RunRecord<'_>, images: &[(&str, PgmScale)]) -> Value {
    let r = record.result;
    let images: serde_json::Map<String, Value> = images
        .iter()
        .map(|(name, scale)| (name.to_string(), json!(scale)))
        .collect();
    json!({
        "config": record.config,
        "thresholds": record.thresholds,
        "penalty": r.penalty,
        "result": {
            "i_eps": r.i_eps,
            "lambda": r.eig.lambda,
            "volume": r.volume,
            "converged": r.converged,
            "stop_reason": r.stop_reason,
            "clipping_flag": r.clipping_flag,
            "outer_iterations": r.history.last().map(|h| h.iteration).unwrap_or(0),
            "eigen_residual": r.eig.residual,
            "eigen_iterations": r.eig.iterations,
            "objective": r.objective,
            "cells_per_side": r.support.grid().cells_per_side(),
            "active": r.support.indices(),
        },
        "history": r.history,
        "certificate": record.certificate,
        "diagnostics": record.report,
        "images": images,
    })
}

pub fn write_outputs(record: &RunRecord<'_>, paths: &OutputPaths) -> Result<Value> {
    let r = record.result;
    let grid = r.support.grid();
    write_history_csv(&paths.history(), &r.history)?;
    let indicator: Vec<f64> = r
        .support
        .active()
        .iter()
        .map(|&a| if a { 1.0 } else { 0.0 })
        .collect();
    let support_scale = write_pgm(&paths.support_image(), grid, &indicator)?;
    let abs_u: Vec<f64> = r.eig.field.values().iter().map(|u| u.abs()).collect();
    let field_scale = write_pgm(&paths.field_image(), grid, &abs_u)?;
    write_field_csv(&paths.field_csv(), &r.eig.field)?;
    let payload = result_payload(
        record,
        &[("support", support_scale), ("abs_u", field_scale)],
    );
    let doc = json!({ "payload": payload, "metadata": metadata() });
    let text = serde_json::to_string_pretty(&doc).map_err(|source| Error::Json {
        path: paths.result(),
        source,
    })?;
    write_file(&paths.result(), text.as_bytes())?;
    Ok(doc)
}

fn metadata() -> Value {
    let created = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    json!({
        "created_unix": created,
        "version": env!("CARGO_PKG_VERSION"),
        "threads": rayon::current_num_threads(),
    })
}

/// A result JSON read back from disk.
#[derive(Clone, Debug)]
pub struct StoredResult {
    pub config: RunConfig,
    pub lambda: f64,
    pub volume: f64,
    pub i_eps: f64,
    pub active: Vec<usize>,
    pub payload: Value,
}

impl StoredResult {
    pub fn support(&self) -> Result<Support<f64>> {
        let grid = self.config.build_grid()?;
        Support::from_indices(grid, &self.active)
    }
}

pub fn read_result(path: &Path) -> Result<StoredResult> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let doc: Value = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    let missing = |what: &str| Error::Config(format!("{}: missing `{what}`", path.display()));
    let payload = doc
        .get("payload")
        .ok_or_else(|| missing("payload"))?
        .clone();
    let mut config: RunConfig = serde_json::from_value(
        payload
            .get("config")
            .ok_or_else(|| missing("payload.config"))?
            .clone(),
    )
    .map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    config.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let result = payload
        .get("result")
        .ok_or_else(|| missing("payload.result"))?;
    let num = |key: &str| {
        result
            .get(key)
            .and_then(Value::as_f64)
            .ok_or_else(|| missing(&format!("payload.result.{key}")))
    };
    let active = result
        .get("active")
        .and_then(Value::as_array)
        .ok_or_else(|| missing("payload.result.active"))?
        .iter()
        .map(|v| {
            v.as_u64()
                .map(|x| x as usize)
                .ok_or_else(|| missing("integer active index"))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(StoredResult {
        lambda: num("lambda")?,
        volume: num("volume")?,
        i_eps: num("i_eps")?,
        active,
        config,
        payload,
    })
}
