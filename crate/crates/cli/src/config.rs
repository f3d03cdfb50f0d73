//! Experiment configuration: one TOML file with `material`, `law`, `solver`
//! and `sweep` sections.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub material: MaterialConfig,
    #[serde(default)]
    pub law: LawConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    /// Written into manifests only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run: Option<RunInfo>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MaterialConfig {
    Inclusion {
        #[serde(default = "d20")]
        background: f64,
        #[serde(default = "d100")]
        contrast: f64,
        #[serde(default = "d03")]
        radius: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        resolution: Option<usize>,
    },
    Laminate {
        #[serde(default = "d5")]
        low: f64,
        #[serde(default = "d15")]
        high: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        resolution: Option<usize>,
    },
    CustomRaster {
        dim: usize,
        base_file: PathBuf,
        perturbation_file: PathBuf,
    },
    /// Piecewise-constant 1D cell, pieces `[length, a, c]` left to right.
    Oned {
        pieces: Vec<[f64; 3]>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        resolution: Option<usize>,
    },
}

fn d20() -> f64 {
    20.0
}
fn d100() -> f64 {
    100.0
}
fn d03() -> f64 {
    0.3
}
fn d5() -> f64 {
    5.0
}
fn d15() -> f64 {
    15.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LawConfig {
    #[serde(default = "default_law")]
    pub kind: String,
    #[serde(default = "default_eta")]
    pub eta: Vec<f64>,
    /// Custom laws: `[order, location, derivative, weight]` rows.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terms: Option<Vec<[f64; 4]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub moments: Option<MomentsConfig>,
}

fn default_law() -> String {
    "bernoulli".into()
}
fn default_eta() -> Vec<f64> {
    vec![0.1]
}

impl Default for LawConfig {
    fn default() -> Self {
        Self { kind: default_law(), eta: default_eta(), terms: None, bound: None, moments: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentsConfig {
    pub mean_b0: f64,
    pub var_b0: f64,
    pub mean_b0_sq: f64,
    #[serde(default)]
    pub mean_r0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_per_cell")]
    pub per_cell: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_preconditioner")]
    pub preconditioner: String,
    #[serde(default = "default_diagonal")]
    pub diagonal: String,
}

fn default_per_cell() -> usize {
    10
}
fn default_tolerance() -> f64 {
    1e-10
}
fn default_max_iterations() -> usize {
    20_000
}
fn default_preconditioner() -> String {
    "fourier".into()
}
fn default_diagonal() -> String {
    "main".into()
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            per_cell: default_per_cell(),
            tolerance: default_tolerance(),
            max_iterations: default_max_iterations(),
            preconditioner: default_preconditioner(),
            diagonal: default_diagonal(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default = "default_cells")]
    pub cells: Vec<usize>,
    #[serde(default = "default_realizations")]
    pub realizations: usize,
    #[serde(default)]
    pub seed: u64,
    /// Highest expansion order computed by `expand` and `figure` (1 or 2).
    #[serde(default = "default_order")]
    pub order: u32,
    /// `defect`, `corrector` or `both`.
    #[serde(default = "default_route")]
    pub route: String,
    #[serde(default = "default_max_pair_cells")]
    pub max_pair_cells: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair_budget: Option<usize>,
    /// Truncation size of `t_i`; defaults to the largest swept size.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<usize>,
    /// Runs above desk scale are refused unless set.
    #[serde(default)]
    pub allow_large: bool,
    #[serde(default)]
    pub export_correctors: bool,
    /// Matrix entry reported by `figure` (zero-based row, column).
    #[serde(default)]
    pub entry: [usize; 2],
}

fn default_cells() -> Vec<usize> {
    vec![5]
}
fn default_realizations() -> usize {
    40
}
fn default_order() -> u32 {
    2
}
fn default_route() -> String {
    "both".into()
}
fn default_max_pair_cells() -> usize {
    25
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            cells: default_cells(),
            realizations: default_realizations(),
            seed: 0,
            order: default_order(),
            route: default_route(),
            max_pair_cells: default_max_pair_cells(),
            pair_budget: None,
            truncation: None,
            allow_large: false,
            export_correctors: false,
            entry: [0, 0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunInfo {
    pub command: String,
    pub version: String,
}

impl Config {
    pub fn parse(source: &str, origin: &Path) -> Result<Self, CliError> {
        let mut config: Config = toml::from_str(source).map_err(|e| {
            let line = e.span().map(|s| source[..s.start].lines().count().max(1));
            CliError::Config { path: origin.to_path_buf(), line, message: e.message().to_string() }
        })?;
        if let MaterialConfig::CustomRaster { base_file, perturbation_file, .. } = &mut config.material {
            let dir = origin.parent().unwrap_or(Path::new("."));
            for f in [base_file, perturbation_file] {
                if f.is_relative() {
                    *f = dir.join(&*f);
                }
                if let Ok(abs) = f.canonicalize() {
                    *f = abs;
                }
            }
        }
        config.validate(source, origin)?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let source = std::fs::read_to_string(path).map_err(|e| CliError::Config {
            path: path.to_path_buf(),
            line: None,
            message: format!("cannot read: {e}"),
        })?;
        Self::parse(&source, path)
    }

    fn validate(&self, source: &str, origin: &Path) -> Result<(), CliError> {
        let fail = |section: &str, key: &str, message: String| CliError::Config {
            path: origin.to_path_buf(),
            line: locate(source, section, key),
            message,
        };
        if self.sweep.cells.is_empty() || self.sweep.cells.contains(&0) {
            return Err(fail("sweep", "cells", "cells must list positive supercell sizes".into()));
        }
        if self.sweep.cells.windows(2).any(|w| w[0] >= w[1]) {
            return Err(fail("sweep", "cells", "cells must be strictly ascending".into()));
        }
        if self.sweep.realizations == 0 {
            return Err(fail("sweep", "realizations", "at least one realization is required".into()));
        }
        if !(1..=2).contains(&self.sweep.order) {
            return Err(fail("sweep", "order", format!("order {} is not 1 or 2", self.sweep.order)));
        }
        if !["defect", "corrector", "both"].contains(&self.sweep.route.as_str()) {
            return Err(fail("sweep", "route", format!("unknown route '{}'", self.sweep.route)));
        }
        if self.law.eta.is_empty() || self.law.eta.iter().any(|e| !(0.0..=1.0).contains(e)) {
            return Err(fail("law", "eta", "eta values must lie in [0, 1]".into()));
        }
        if self.solver.per_cell == 0 {
            return Err(fail("solver", "per_cell", "per_cell must be positive".into()));
        }
        if !(self.solver.tolerance > 0.0) {
            return Err(fail("solver", "tolerance", "tolerance must be positive".into()));
        }
        if !["fourier", "jacobi", "identity"].contains(&self.solver.preconditioner.as_str()) {
            return Err(fail("solver", "preconditioner", format!("unknown preconditioner '{}'", self.solver.preconditioner)));
        }
        if !["main", "anti"].contains(&self.solver.diagonal.as_str()) {
            return Err(fail("solver", "diagonal", format!("unknown diagonal '{}'", self.solver.diagonal)));
        }
        if self.sweep.entry.iter().any(|&e| e >= self.dim()) {
            return Err(fail("sweep", "entry", format!("entry {:?} outside a {}-dimensional tensor", self.sweep.entry, self.dim())));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match &self.material {
            MaterialConfig::Oned { .. } => 1,
            MaterialConfig::CustomRaster { dim, .. } => *dim,
            _ => 2,
        }
    }

    /// TOML text of the configuration tagged with the command that ran it.
    pub fn manifest(&self, command: &str) -> Result<String, CliError> {
        let mut m = self.clone();
        m.run = Some(RunInfo { command: command.into(), version: env!("CARGO_PKG_VERSION").into() });
        toml::to_string(&m).map_err(|e| CliError::Io(format!("cannot serialize manifest: {e}")))
    }
}

/// Line of `key` inside `[section]`, or of the section header.
pub(crate) fn locate(source: &str, section: &str, key: &str) -> Option<usize> {
    let header = format!("[{section}]");
    let mut inside = false;
    let mut header_line = None;
    for (n, line) in source.lines().enumerate() {
        let t = line.trim();
        if t.starts_with('[') {
            inside = t == header;
            if inside {
                header_line = Some(n + 1);
            }
            continue;
        }
        if inside && t.split('=').next().map(str::trim) == Some(key) {
            return Some(n + 1);
        }
    }
    header_line
}

pub type Pixel = [[f64; 2]; 2];

/// Whitespace-separated row-major pixel tensors (`d²` numbers per pixel).
pub fn parse_raster(text: &str, dim: usize) -> Result<(usize, Vec<Pixel>), String> {
    let values = text
        .split_whitespace()
        .map(|w| w.parse::<f64>().map_err(|_| format!("not a number: '{w}'")))
        .collect::<Result<Vec<_>, _>>()?;
    let per = dim * dim;
    if values.is_empty() || values.len() % per != 0 {
        return Err(format!("{} values do not split into {dim}x{dim} tensors", values.len()));
    }
    let pixels = values.len() / per;
    let r = (pixels as f64).powf(1.0 / dim as f64).round() as usize;
    if r.pow(dim as u32) != pixels {
        return Err(format!("{pixels} pixels do not form a square raster"));
    }
    let tensors = values
        .chunks(per)
        .map(|c| {
            let mut t = [[0.0; 2]; 2];
            for a in 0..dim {
                for b in 0..dim {
                    t[a][b] = c[a * dim + b];
                }
            }
            t
        })
        .collect();
    Ok((r, tensors))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_missing_sections() {
        let c = Config::parse("[material]\nkind = \"inclusion\"\n", Path::new("x.toml")).unwrap();
        assert_eq!(c.solver.per_cell, 10);
        assert_eq!(c.law.kind, "bernoulli");
        assert_eq!(c.sweep.realizations, 40);
        assert!(matches!(c.material, MaterialConfig::Inclusion { radius, .. } if radius == 0.3));
    }

    #[test]
    fn errors_carry_lines() {
        let src = "[material]\nkind = \"inclusion\"\n\n[sweep]\ncells = [5, 3]\n";
        match Config::parse(src, Path::new("x.toml")) {
            Err(CliError::Config { line: Some(5), .. }) => {}
            other => panic!("{other:?}"),
        }
        let src = "[material]\nkind = \"inclusion\"\nradiuss = 0.2\n";
        match Config::parse(src, Path::new("x.toml")) {
            Err(CliError::Config { line: Some(_), .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn manifest_round_trips() {
        let src = "[material]\nkind = \"laminate\"\n[law]\nkind = \"clipped-gaussian\"\neta = [0.05, 0.1]\n[sweep]\ncells = [3, 5]\nseed = 9\n";
        let c = Config::parse(src, Path::new("x.toml")).unwrap();
        let text = c.manifest("expand").unwrap();
        let back = Config::parse(&text, Path::new("m.toml")).unwrap();
        assert_eq!(back.run.as_ref().unwrap().command, "expand");
        let mut stripped = back.clone();
        stripped.run = None;
        assert_eq!(stripped, c);
    }

    #[test]
    fn raster_parsing() {
        let (r, t) = parse_raster("1 0 0 1\n2 0 0 2\n3 0 0 3\n4 0 0 4", 2).unwrap();
        assert_eq!(r, 2);
        assert_eq!(t[3], [[4.0, 0.0], [0.0, 4.0]]);
        assert!(parse_raster("1 2 3", 2).is_err());
        assert!(parse_raster("1 2 3 x", 1).is_err());
    }
}
