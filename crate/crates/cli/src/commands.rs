//! Subcommand pipelines. Each returns the CSV files it produced; nothing here
//! touches the filesystem except raster loading.

use std::fmt::Write;
use std::path::Path;
use std::sync::Arc;

use weakhom_core::corrector_route::{first_order_moment_route, second_order_moment_route, solve_s_i, solve_t_i};
use weakhom_core::defect::{sweep, CellData, ExpansionResult, SweepOptions};
use weakhom_core::fem::{Diagonal, PeriodicMesh, PreconditionerKind, SolverOptions};
use weakhom_core::law::{builtin_law_named, ExpansionTerm, LawMoments, PerturbationLaw, PointMassExpansion, DEFAULT_BOUND};
use weakhom_core::material::{make_inclusion_material, make_laminate_material, Material, PeriodicTensorField};
use weakhom_core::oned::{oned_table, OneDMaterial};
use weakhom_core::periodic::EffectiveTensor;
use weakhom_core::quadrature::Integrator;
use weakhom_core::stochastic::{above_desk_scale, sweep_mc, workload, McReport};
use weakhom_core::tensor::Tensor;

use crate::config::{locate, parse_raster, Config, MaterialConfig};
use crate::csv::{num, opt, Table};
use crate::error::{numerical, CliError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Periodic,
    Expand,
    Mc,
    Oned,
    Figure,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Periodic => "periodic",
            Command::Expand => "expand",
            Command::Mc => "mc",
            Command::Oned => "oned",
            Command::Figure => "figure",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        [Command::Periodic, Command::Expand, Command::Mc, Command::Oned, Command::Figure]
            .into_iter()
            .find(|c| c.name() == name)
    }
}

/// Files produced by a pipeline, plus a human-readable summary.
#[derive(Debug, Clone, Default)]
pub struct Output {
    pub files: Vec<(String, String)>,
    pub summary: String,
    pub warnings: Vec<String>,
    /// Set when results were written but a budget cap cut the computation short.
    pub budget: Option<String>,
}

/// Material, law and discretization resolved from a config.
pub struct Setup {
    pub material: Material,
    pub law: PerturbationLaw,
    pub options: SolverOptions,
    pub unit_mesh: PeriodicMesh,
    pub oned: Option<OneDMaterial>,
}

impl Setup {
    pub fn new(config: &Config, origin: &Path, source: &str) -> Result<Self, CliError> {
        let fail = |section: &str, key: &str, message: String| CliError::Config {
            path: origin.to_path_buf(),
            line: locate(source, section, key),
            message,
        };
        let per_cell = config.solver.per_cell;
        let mut oned = None;
        let material = match &config.material {
            MaterialConfig::Inclusion { background, contrast, radius, resolution } => {
                make_inclusion_material(*background, *contrast, *radius, resolution.unwrap_or(per_cell))
            }
            MaterialConfig::Laminate { low, high, resolution } => make_laminate_material(*low, *high, resolution.unwrap_or(per_cell)),
            MaterialConfig::CustomRaster { dim, base_file, perturbation_file } => {
                let read = |p: &Path, key: &str| -> Result<(usize, Vec<Tensor>), CliError> {
                    let text = std::fs::read_to_string(p).map_err(|e| fail("material", key, format!("{}: {e}", p.display())))?;
                    let (r, px) = parse_raster(&text, *dim).map_err(|e| fail("material", key, format!("{}: {e}", p.display())))?;
                    Ok((r, px.into_iter().map(Tensor).collect()))
                };
                let (rb, base) = read(base_file, "base_file")?;
                let (rc, pert) = read(perturbation_file, "perturbation_file")?;
                if rb != rc {
                    return Err(fail("material", "perturbation_file", format!("raster sizes differ: {rb} and {rc}")));
                }
                PeriodicTensorField::new_general(*dim, rb, base)
                    .and_then(|b| Ok((b, PeriodicTensorField::new_general(*dim, rc, pert)?)))
                    .and_then(|(b, c)| Material::new(b, c))
            }
            MaterialConfig::Oned { pieces, resolution } => {
                OneDMaterial::new(pieces.iter().map(|p| (p[0], p[1], p[2])).collect()).and_then(|m| {
                    let mat = m.to_material(resolution.unwrap_or(per_cell));
                    oned = Some(m);
                    mat
                })
            }
        }
        .map_err(|e| fail("material", "kind", e.to_string()))?;

        let law = build_law(config).map_err(|e| fail("law", "kind", e))?;
        let eta_max = config.law.eta.iter().copied().fold(0.0, f64::max);
        let range = law.amplitude_range(eta_max).map_err(|e| fail("law", "eta", e.to_string()))?;
        material
            .bounds(range)
            .map_err(|e| fail("material", "kind", format!("not coercive over amplitudes [{}, {}]: {e}", range.lo, range.hi)))?;

        let options = SolverOptions {
            tolerance: config.solver.tolerance,
            max_iterations: config.solver.max_iterations,
            preconditioner: match config.solver.preconditioner.as_str() {
                "jacobi" => PreconditionerKind::Jacobi,
                "identity" => PreconditionerKind::Identity,
                _ => PreconditionerKind::Fourier,
            },
        };
        let diagonal = if config.solver.diagonal == "anti" { Diagonal::Anti } else { Diagonal::Main };
        let unit_mesh = PeriodicMesh::with_diagonal(config.dim(), 1, per_cell, diagonal).map_err(|e| fail("solver", "per_cell", e.to_string()))?;
        Ok(Self { material, law, options, unit_mesh, oned })
    }

    pub fn cell(&self) -> Result<Arc<CellData>, CliError> {
        CellData::with_mesh(&self.material, &self.unit_mesh, self.options).map(Arc::new).map_err(numerical("periodic_homog"))
    }
}

fn build_law(config: &Config) -> Result<PerturbationLaw, String> {
    let law = &config.law;
    if law.kind != "custom" {
        if law.terms.is_some() || law.moments.is_some() || law.bound.is_some() {
            return Err(format!("terms, bound and moments only apply to custom laws, not '{}'", law.kind));
        }
        return builtin_law_named(&law.kind).map_err(|e| e.to_string());
    }
    let terms = law.terms.as_ref().ok_or("custom laws need a terms list")?;
    let mut order1 = Vec::new();
    let mut order2 = Vec::new();
    for t in terms {
        let [order, location, derivative, weight] = *t;
        if derivative < 0.0 || derivative.fract() != 0.0 {
            return Err(format!("derivative order {derivative} is not a non-negative integer"));
        }
        let term = ExpansionTerm::new(location, derivative as u32, weight);
        if order == 1.0 {
            order1.push(term);
        } else if order == 2.0 {
            order2.push(term);
        } else {
            return Err(format!("expansion order {order} is not 1 or 2"));
        }
    }
    let expansion = PointMassExpansion::new(law.bound.unwrap_or(DEFAULT_BOUND), order1, order2).map_err(|e| e.to_string())?;
    let moments = law.moments.map(|m| LawMoments { mean_b0: m.mean_b0, var_b0: m.var_b0, mean_b0_sq: m.mean_b0_sq, mean_r0: m.mean_r0 });
    let support = expansion.location_range();
    PerturbationLaw::custom(expansion, moments, support).map_err(|e| e.to_string())
}

/// `A e_i·e_j` rows for every `(i, j)`.
fn entries(t: &EffectiveTensor) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
    (0..t.dim).flat_map(move |i| (0..t.dim).map(move |j| (i, j, t.get(j, i))))
}

fn format_matrix(t: &Tensor, dim: usize) -> String {
    let mut s = String::new();
    for r in 0..dim {
        let row: Vec<String> = (0..dim).map(|c| format!("{:>16.10}", t.0[r][c])).collect();
        let _ = writeln!(s, "  {}", row.join(" "));
    }
    s
}

pub fn periodic(config: &Config, setup: &Setup) -> Result<Output, CliError> {
    let cell = setup.cell()?;
    let t = cell.periodic.tensor;
    let mut table = Table::new("periodic", &["quantity", "i", "j", "value"]).meta("material", material_name(config)).meta("per_cell", config.solver.per_cell);
    let voigt = EffectiveTensor::new(t.dim, t.voigt.unwrap_or(Tensor::ZERO), t.provenance);
    let reuss = EffectiveTensor::new(t.dim, t.reuss.unwrap_or(Tensor::ZERO), t.provenance);
    for (name, m) in [("periodic", &t), ("voigt", &voigt), ("reuss", &reuss)] {
        for (i, j, v) in entries(m) {
            table.push(vec![name.into(), i.to_string(), j.to_string(), num(v)]);
        }
    }
    let mut out = Output { summary: format!("periodic tensor:\n{}", format_matrix(&t.entries, t.dim)), ..Default::default() };
    out.files.push(("periodic.csv".into(), table.render()));
    if config.sweep.export_correctors {
        let mesh = cell.unit_mesh;
        let n = mesh.nodes_per_axis();
        for (i, w) in cell.periodic.correctors.iter().enumerate() {
            let mut text = String::new();
            for row in w.values().chunks(n) {
                let line: Vec<String> = row.iter().map(|v| num(*v)).collect();
                let _ = writeln!(text, "{}", line.join(" "));
            }
            out.files.push((format!("corrector_w{i}.txt"), text));
        }
    }
    Ok(out)
}

fn material_name(config: &Config) -> &'static str {
    match config.material {
        MaterialConfig::Inclusion { .. } => "inclusion",
        MaterialConfig::Laminate { .. } => "laminate",
        MaterialConfig::CustomRaster { .. } => "custom-raster",
        MaterialConfig::Oned { .. } => "oned",
    }
}

fn defect_sweep(config: &Config, setup: &Setup, cell: Arc<CellData>) -> Result<ExpansionResult, CliError> {
    let options = SweepOptions {
        second_order: config.sweep.order >= 2,
        max_pair_cells: config.sweep.max_pair_cells,
        pair_budget: config.sweep.pair_budget,
    };
    sweep(cell, &config.sweep.cells, setup.law.expansion(), options).map_err(numerical("defect_expansion"))
}

fn truncation_note(result: &ExpansionResult) -> Option<String> {
    let cut: Vec<String> = result
        .second
        .iter()
        .filter(|(_, s)| s.truncated)
        .map(|(n, s)| format!("N={n} used {} of {} pair offsets", s.per_offset.len(), s.offsets_total))
        .collect();
    (!cut.is_empty()).then(|| format!("pair sums truncated by pair_budget: {}", cut.join("; ")))
}

pub fn expand(config: &Config, setup: &Setup, origin: &Path, source: &str) -> Result<Output, CliError> {
    let route = config.sweep.route.as_str();
    let moments = setup.law.moments().ok();
    if route == "corrector" && moments.is_none() {
        return Err(CliError::Config {
            path: origin.to_path_buf(),
            line: locate(source, "sweep", "route"),
            message: format!("law '{}' has no moment data for the corrector route", setup.law.name()),
        });
    }
    let cell = setup.cell()?;
    let meta = |t: Table| t.meta("material", material_name(config)).meta("law", setup.law.name()).meta("per_cell", config.solver.per_cell);
    let mut values = meta(Table::new("expand", &["provenance", "N", "i", "j", "order", "value"]));
    let mut diag = meta(Table::new(
        "expand",
        &["provenance", "order", "N", "successive_difference", "offsets_used", "offsets_total", "truncated", "outer_layer_ratio"],
    ));
    for (i, j, v) in entries(&cell.periodic.tensor) {
        values.push(vec!["periodic".into(), "1".into(), i.to_string(), j.to_string(), "0".into(), num(v)]);
    }
    let mut out = Output::default();
    if route != "corrector" {
        let result = defect_sweep(config, setup, cell.clone())?;
        for (k, (n, t)) in result.sizes.iter().zip(&result.first).enumerate() {
            for (i, j, v) in entries(t) {
                values.push(vec![t.provenance.tag().into(), n.to_string(), i.to_string(), j.to_string(), "1".into(), num(v)]);
            }
            let d = if k == 0 { None } else { Some(result.first_differences[k - 1]) };
            diag.push(vec![t.provenance.tag().into(), "1".into(), n.to_string(), opt(d), String::new(), String::new(), String::new(), String::new()]);
        }
        for (k, (n, s)) in result.second.iter().enumerate() {
            for (i, j, v) in entries(&s.tensor) {
                values.push(vec![s.tensor.provenance.tag().into(), n.to_string(), i.to_string(), j.to_string(), "2".into(), num(v)]);
            }
            let d = if k == 0 { None } else { Some(result.second_differences[k - 1]) };
            diag.push(vec![
                s.tensor.provenance.tag().into(),
                "2".into(),
                n.to_string(),
                opt(d),
                s.per_offset.len().to_string(),
                s.offsets_total.to_string(),
                s.truncated.to_string(),
                String::new(),
            ]);
        }
        if config.sweep.order >= 2 && result.second.is_empty() {
            out.warnings.push(format!("no size is within max_pair_cells = {}; second order skipped", config.sweep.max_pair_cells));
        }
        out.budget = truncation_note(&result);
        let _ = writeln!(out.summary, "defect route: {} sizes, {} with second order", result.sizes.len(), result.second.len());
    }
    if route != "defect" {
        match moments {
            Some(m) => corrector_rows(config, &cell, &m, &mut values, &mut diag, &mut out)?,
            None => out.warnings.push(format!("corrector route skipped: law '{}' has no moment data", setup.law.name())),
        }
    }
    out.files.push(("expansion.csv".into(), values.render()));
    out.files.push(("expansion_diagnostics.csv".into(), diag.render()));
    Ok(out)
}

fn corrector_rows(config: &Config, cell: &CellData, moments: &LawMoments, values: &mut Table, diag: &mut Table, out: &mut Output) -> Result<(), CliError> {
    let n = config.sweep.truncation.unwrap_or(*config.sweep.cells.last().expect("validated"));
    let first = first_order_moment_route(cell, moments.mean_b0);
    for (i, j, v) in entries(&first) {
        values.push(vec![first.provenance.tag().into(), n.to_string(), i.to_string(), j.to_string(), "1".into(), num(v)]);
    }
    diag.push(vec![first.provenance.tag().into(), "1".into(), n.to_string(), String::new(), String::new(), String::new(), String::new(), String::new()]);
    if config.sweep.order >= 2 {
        let err = numerical("corrector_route");
        let dim = cell.dim();
        let t = (0..dim).map(|i| solve_t_i(cell, i, n)).collect::<Result<Vec<_>, _>>().map_err(&err)?;
        let s = (0..dim).map(|i| solve_s_i(cell, i)).collect::<Result<Vec<_>, _>>().map_err(&err)?;
        let second = second_order_moment_route(cell, moments, &t, &s, &[]).map_err(&err)?;
        for (i, j, v) in entries(&second) {
            values.push(vec![second.provenance.tag().into(), n.to_string(), i.to_string(), j.to_string(), "2".into(), num(v)]);
        }
        let ratio = t.iter().map(|c| if c.total_norm > 0.0 { c.outer_layer_norm / c.total_norm } else { 0.0 }).fold(0.0, f64::max);
        diag.push(vec![second.provenance.tag().into(), "2".into(), n.to_string(), String::new(), String::new(), String::new(), String::new(), num(ratio)]);
    }
    let _ = writeln!(out.summary, "corrector route: truncation N={n}");
    Ok(())
}

fn check_scale(config: &Config, sizes: &[usize]) -> Result<Vec<String>, CliError> {
    let runs = config.sweep.realizations * config.law.eta.len();
    if !above_desk_scale(config.dim(), config.solver.per_cell, sizes, runs) {
        return Ok(Vec::new());
    }
    let work = workload(config.dim(), config.solver.per_cell, sizes, runs);
    let message = format!("Monte Carlo sweep needs about {work:.1e} unknown-solves, above desk scale");
    if config.sweep.allow_large {
        Ok(vec![format!("{message}; running because allow_large is set")])
    } else {
        Err(CliError::Budget { module: "stochastic_ref", message: format!("{message}; set allow_large = true in [sweep] to run it") })
    }
}

fn mc_reports(config: &Config, setup: &Setup, cell: &CellData, eta: f64) -> Result<(Vec<McReport>, Vec<f64>), CliError> {
    sweep_mc(cell, &setup.law, eta, &config.sweep.cells, config.sweep.realizations, config.sweep.seed).map_err(numerical("stochastic_ref"))
}

pub fn mc(config: &Config, setup: &Setup) -> Result<Output, CliError> {
    let mut out = Output { warnings: check_scale(config, &config.sweep.cells)?, ..Default::default() };
    let cell = setup.cell()?;
    let meta = |t: Table| {
        t.meta("material", material_name(config))
            .meta("law", setup.law.name())
            .meta("per_cell", config.solver.per_cell)
            .meta("realizations", config.sweep.realizations)
            .meta("seed", config.sweep.seed)
    };
    let mut per = meta(Table::new("mc", &["eta", "N", "realization", "i", "j", "value"]));
    let mut agg = meta(Table::new("mc", &["eta", "N", "i", "j", "mean", "min", "max"]));
    let mut diag = meta(Table::new("mc", &["eta", "N", "successive_mean_difference", "max_duality_gap", "within_voigt_reuss", "max_entry_over_beta"]));
    for &eta in &config.law.eta {
        let (reports, diffs) = mc_reports(config, setup, &cell, eta)?;
        let range = setup.law.support(eta).map_err(numerical("stochastic_ref"))?;
        let beta = setup.material.bounds(range).map_err(numerical("material_model"))?.beta;
        for (k, r) in reports.iter().enumerate() {
            for z in &r.realizations {
                for (i, j, v) in entries(&z.tensor) {
                    per.push(vec![num(eta), r.cells.to_string(), z.index.to_string(), i.to_string(), j.to_string(), num(v)]);
                }
            }
            let dim = cell.dim();
            for i in 0..dim {
                for j in 0..dim {
                    agg.push(vec![num(eta), r.cells.to_string(), i.to_string(), j.to_string(), num(r.mean.0[j][i]), num(r.min.0[j][i]), num(r.max.0[j][i])]);
                }
            }
            let d = if k == 0 { None } else { Some(diffs[k - 1]) };
            let ratio = r.realizations.iter().map(|z| z.tensor.max_abs()).fold(0.0, f64::max) / beta;
            diag.push(vec![
                num(eta),
                r.cells.to_string(),
                opt(d),
                num(r.max_duality_gap()),
                r.within_bounds(1e-12).to_string(),
                num(ratio),
            ]);
        }
        let _ = writeln!(out.summary, "eta={eta}: {} sizes x {} realizations", reports.len(), config.sweep.realizations);
    }
    out.files.push(("mc_realizations.csv".into(), per.render()));
    out.files.push(("mc_aggregate.csv".into(), agg.render()));
    out.files.push(("mc_diagnostics.csv".into(), diag.render()));
    Ok(out)
}

pub fn oned(config: &Config, setup: &Setup, origin: &Path, source: &str) -> Result<Output, CliError> {
    let m = setup.oned.as_ref().ok_or_else(|| CliError::Config {
        path: origin.to_path_buf(),
        line: locate(source, "material", "kind"),
        message: "the oned command needs kind = \"oned\" in [material]".into(),
    })?;
    let rows = oned_table(m, &setup.law, &config.law.eta, &Integrator::default()).map_err(numerical("oned_oracle"))?;
    let mut table = Table::new("oned", &["eta", "a_star", "first", "second", "exact", "residual", "residual_over_eta2"]).meta("law", setup.law.name());
    let mut summary = format!("{:>8} {:>14} {:>14} {:>14} {:>14} {:>12}\n", "eta", "a*", "a1*", "a2*", "exact", "residual");
    for r in &rows {
        let scaled = if r.eta > 0.0 { Some(r.residual / (r.eta * r.eta)) } else { None };
        table.push(vec![num(r.eta), num(r.orders.a_star), num(r.orders.first), num(r.orders.second), num(r.exact), num(r.residual), opt(scaled)]);
        let _ = writeln!(
            summary,
            "{:>8} {:>14.10} {:>14.10} {:>14.10} {:>14.10} {:>12.3e}",
            r.eta, r.orders.a_star, r.orders.first, r.orders.second, r.exact, r.residual
        );
    }
    Ok(Output { files: vec![("oned.csv".into(), table.render())], summary, ..Default::default() })
}

pub fn figure(config: &Config, setup: &Setup) -> Result<Output, CliError> {
    let mut out = Output { warnings: check_scale(config, &config.sweep.cells)?, ..Default::default() };
    let cell = setup.cell()?;
    let expansion = defect_sweep(config, setup, cell.clone())?;
    out.budget = truncation_note(&expansion);
    let [r, c] = config.sweep.entry;
    let periodic = cell.periodic.tensor.get(r, c);
    let mut table = Table::new("figure", &["eta", "N", "periodic", "first_order", "second_order", "mc_mean", "mc_min", "mc_max"])
        .meta("material", material_name(config))
        .meta("law", setup.law.name())
        .meta("per_cell", config.solver.per_cell)
        .meta("realizations", config.sweep.realizations)
        .meta("seed", config.sweep.seed)
        .meta("entry", format!("{r} {c}"));
    for &eta in &config.law.eta {
        let (reports, _) = mc_reports(config, setup, &cell, eta)?;
        for ((n, first), report) in expansion.sizes.iter().zip(&expansion.first).zip(&reports) {
            let first_order = periodic + eta * first.get(r, c);
            // beyond the pair cap the largest computed second order stands in
            let second = expansion.second.iter().rev().find(|(m, _)| m <= n).map(|(_, s)| first_order + eta * eta * s.tensor.get(r, c));
            table.push(vec![
                num(eta),
                n.to_string(),
                num(periodic),
                num(first_order),
                opt(second),
                num(report.mean.0[r][c]),
                num(report.min.0[r][c]),
                num(report.max.0[r][c]),
            ]);
        }
        let _ = writeln!(out.summary, "eta={eta}: {} sizes", reports.len());
    }
    out.files.push(("figure.csv".into(), table.render()));
    Ok(out)
}
