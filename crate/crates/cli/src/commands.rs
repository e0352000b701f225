use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use serde::Serialize;

use hho_core::analysis::{
    convergence_rates, flag_boundary_layer, flagged_region_reaches_boundary, solution_errors,
};
use hho_core::assembly::{assemble, solve, AssemblyOptions, HhoSolution, SolveOptions};
use hho_core::cases::ManufacturedCase;
use hho_core::checks::{run_suite, CheckOptions, Suite};
use hho_core::local::LocalOptions;
use hho_core::mesh::{build_rect_mesh, load_mesh, write_mesh, Mesh2D};

use crate::config::{CommonArgs, MeshSource, RunConfig};
use crate::error::CliError;
use crate::output::{
    companion, csv_header, to_csv, write_atomic, LayerCellRow, LayerRow, RateRow, SolveRow,
};

const SOLVE_COLUMNS: [&str; 9] = ["cells", "h", "k", "eps", "dofs", "energy_err", "l2_err", "cond", "runtime_ms"];

pub fn load(source: &MeshSource) -> Result<Mesh2D, CliError> {
    match source {
        MeshSource::Rect(n) => Ok(build_rect_mesh(*n)),
        MeshSource::File(p) => load_mesh(p).map_err(|err| CliError::Mesh { source_name: source.to_string(), err }),
    }
}

fn load_all(cfg: &RunConfig) -> Result<Vec<Mesh2D>, CliError> {
    cfg.meshes.iter().map(load).collect()
}

fn warn_on_domain_mismatch(mesh: &Mesh2D, source: &MeshSource, case: &ManufacturedCase) {
    let (area, expected) = (mesh.total_area(), case.domain.area());
    if (area - expected).abs() > 1e-6 * expected {
        eprintln!(
            "warning: mesh {source} has area {area:.6} but case '{}' is posed on a domain of area {expected:.6}",
            case.name
        );
    }
}

fn solve_one(mesh: &Mesh2D, cfg: &RunConfig, eps: f64, case: &ManufacturedCase) -> Result<(SolveRow, HhoSolution), CliError> {
    let start = Instant::now();
    let opts = AssemblyOptions { local: cfg.local_options(), serial: cfg.serial };
    let system = assemble(mesh, cfg.k, eps, case, &opts)?;
    let sol = solve(&system, &SolveOptions { solver: cfg.solver, ..Default::default() })?;
    let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
    let cond = match (cfg.cond, system.size()) {
        (Some(method), n) if n > 0 => Some(system.condition_number(method)?),
        _ => None,
    };
    let (energy_err, l2_err) = if case.has_exact() {
        let e = solution_errors(mesh, &sol, case, cfg.l2_field)?;
        (Some(e.energy()), Some(e.l2()))
    } else {
        (None, None)
    };
    let row = SolveRow {
        cells: mesh.num_cells(),
        h: mesh.h_max(),
        k: cfg.k,
        eps,
        dofs: system.size(),
        energy_err,
        l2_err,
        cond,
        runtime_ms,
    };
    Ok((row, sol))
}

fn emit(out: Option<&PathBuf>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => write_atomic(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn cmd_run(args: &CommonArgs) -> Result<(), CliError> {
    let cfg = RunConfig::resolve(args)?;
    if cfg.serial {
        hho_core::use_serial_execution();
    }
    if cfg.meshes.len() != 1 || cfg.eps.len() != 1 {
        return Err(CliError::Config("run takes exactly one mesh and one eps; use convergence for sweeps".into()));
    }
    let case = cfg.manufactured_case()?;
    let mesh = load(&cfg.meshes[0])?;
    warn_on_domain_mismatch(&mesh, &cfg.meshes[0], &case);
    let (row, _) = solve_one(&mesh, &cfg, cfg.eps[0], &case)?;
    emit(cfg.out.as_ref(), &to_csv(&[row]))
}

/// Rates between consecutive rows of one eps block, against `h` and against
/// `1/sqrt(dofs)`.
pub fn rate_rows(rows: &[SolveRow]) -> Vec<RateRow> {
    let h: Vec<f64> = rows.iter().map(|r| r.h).collect();
    let inv_sqrt_dofs: Vec<f64> = rows.iter().map(|r| 1.0 / (r.dofs as f64).sqrt()).collect();
    let col = |f: fn(&SolveRow) -> Option<f64>| rows.iter().map(|r| f(r).unwrap_or(f64::NAN)).collect::<Vec<_>>();
    let (e, l) = (col(|r| r.energy_err), col(|r| r.l2_err));
    let shift = |v: Vec<Option<f64>>| std::iter::once(None).chain(v).collect::<Vec<_>>();
    let (eh, lh) = (shift(convergence_rates(&h, &e)), shift(convergence_rates(&h, &l)));
    let (ed, ld) = (shift(convergence_rates(&inv_sqrt_dofs, &e)), shift(convergence_rates(&inv_sqrt_dofs, &l)));
    rows.iter()
        .enumerate()
        .map(|(i, r)| RateRow {
            eps: r.eps,
            cells: r.cells,
            h: r.h,
            dofs: r.dofs,
            energy_rate_h: eh[i],
            l2_rate_h: lh[i],
            energy_rate_sqrt_dofs: ed[i],
            l2_rate_sqrt_dofs: ld[i],
        })
        .collect()
}

/// Gnuplot blocks, one per eps: `sqrt(dofs) energy_err l2_err`.
fn sqrt_dofs_data(rows: &[SolveRow]) -> String {
    let mut out = String::from("# sqrt_dofs energy_err l2_err; one block per eps\n");
    let mut last: Option<f64> = None;
    for r in rows {
        if last != Some(r.eps) {
            if last.is_some() {
                out.push_str("\n\n");
            }
            out.push_str(&format!("# eps = {}\n", r.eps));
            last = Some(r.eps);
        }
        let fmt = |v: Option<f64>| v.map_or("nan".to_string(), |v| format!("{v:e}"));
        out.push_str(&format!("{} {} {}\n", (r.dofs as f64).sqrt(), fmt(r.energy_err), fmt(r.l2_err)));
    }
    out
}

fn fmt_rate(r: Option<f64>) -> String {
    r.map_or("-".into(), |v| format!("{v:.2}"))
}

pub fn cmd_convergence(args: &CommonArgs) -> Result<(), CliError> {
    let cfg = RunConfig::resolve(args)?;
    if cfg.serial {
        hho_core::use_serial_execution();
    }
    if cfg.meshes.len() < 2 {
        return Err(CliError::Config("convergence needs at least two meshes".into()));
    }
    let case = cfg.manufactured_case()?;
    if !case.has_exact() {
        return Err(CliError::Config(format!("case '{}' has no exact solution; use flag-layer", case.name)));
    }
    let meshes = load_all(&cfg)?;
    for (m, s) in meshes.iter().zip(&cfg.meshes) {
        warn_on_domain_mismatch(m, s, &case);
    }
    let mut rows = Vec::new();
    let mut rates = Vec::new();
    for &eps in &cfg.eps {
        let block = meshes
            .iter()
            .map(|m| solve_one(m, &cfg, eps, &case).map(|(r, _)| r))
            .collect::<Result<Vec<_>, _>>()?;
        rates.extend(rate_rows(&block));
        rows.extend(block);
    }

    eprintln!("{:>10} {:>8} {:>9} {:>11} {:>9} {:>9} {:>11} {:>9}", "eps", "cells", "dofs", "energy", "rate(h)", "rate(N)", "l2", "rate(h)");
    for (r, q) in rows.iter().zip(&rates) {
        eprintln!(
            "{:>10.1e} {:>8} {:>9} {:>11.3e} {:>9} {:>9} {:>11.3e} {:>9}",
            r.eps,
            r.cells,
            r.dofs,
            r.energy_err.unwrap_or(f64::NAN),
            fmt_rate(q.energy_rate_h),
            fmt_rate(q.energy_rate_sqrt_dofs),
            r.l2_err.unwrap_or(f64::NAN),
            fmt_rate(q.l2_rate_h)
        );
    }

    let table = if rows.is_empty() { csv_header(&SOLVE_COLUMNS) } else { to_csv(&rows) };
    match &cfg.out {
        Some(p) => {
            write_atomic(&companion(p, "_rates.csv"), &to_csv(&rates))?;
            write_atomic(&companion(p, "_sqrt_dofs.dat"), &sqrt_dofs_data(&rows))?;
            write_atomic(p, &table)
        }
        None => emit(None, &table),
    }
}

pub fn cmd_flag_layer(args: &CommonArgs) -> Result<(), CliError> {
    let cfg = RunConfig::resolve(args)?;
    if cfg.serial {
        hho_core::use_serial_execution();
    }
    let case = cfg.manufactured_case()?;
    let meshes = load_all(&cfg)?;
    let mut rows = Vec::new();
    let mut cells = Vec::new();
    for &eps in &cfg.eps {
        for (i, (mesh, source)) in meshes.iter().zip(&cfg.meshes).enumerate() {
            warn_on_domain_mismatch(mesh, source, &case);
            let (solve_row, sol) = solve_one(mesh, &cfg, eps, &case)?;
            let report = flag_boundary_layer(mesh, &sol, cfg.theta)?;
            let mut flagged = vec![false; mesh.num_cells()];
            report.flagged.iter().for_each(|&c| flagged[c] = true);
            for (c, cell) in mesh.cells.iter().enumerate() {
                cells.push(LayerCellRow {
                    mesh: i,
                    eps,
                    cell: c,
                    x: cell.centroid.x,
                    y: cell.centroid.y,
                    area: cell.area,
                    hessian: report.cell_values[c],
                    flagged: flagged[c],
                });
            }
            eprintln!(
                "eps={eps:<8} cells={:<7} max_hessian={:.4e} flagged_area={:.4e}",
                mesh.num_cells(),
                report.max_hessian,
                report.flagged_area
            );
            rows.push(LayerRow {
                cells: mesh.num_cells(),
                h: mesh.h_max(),
                k: cfg.k,
                eps,
                theta: cfg.theta,
                max_hessian: report.max_hessian,
                flagged_cells: report.flagged.len(),
                flagged_area: report.flagged_area,
                boundary_adjacent: flagged_region_reaches_boundary(mesh, &report.flagged),
                runtime_ms: solve_row.runtime_ms,
            });
        }
    }
    match &cfg.out {
        Some(p) => {
            write_atomic(&companion(p, "_cells.csv"), &to_csv(&cells))?;
            write_atomic(p, &to_csv(&rows))
        }
        None => emit(None, &to_csv(&rows)),
    }
}

#[derive(Args, Clone, Debug)]
pub struct CheckArgs {
    /// Which property suite to run: local, assembly, norms or all.
    #[arg(long, default_value = "all")]
    pub suite: String,
    /// Directory with the shipped `voronoi_64.msh` and `annulus_0.msh`.
    #[arg(long)]
    pub mesh_dir: Option<PathBuf>,
    /// Machine-readable JSON summary path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub serial: bool,
    /// Test hook: flip the orientation sign of one interior face of this cell.
    #[arg(long, hide = true)]
    pub flip_sign_in_cell: Option<usize>,
}

#[derive(Serialize)]
struct CheckSummary<'a> {
    suite: &'a str,
    passed: bool,
    failed: usize,
    total: usize,
    runtime_s: f64,
    checks: Vec<CheckEntry<'a>>,
}

#[derive(Serialize)]
struct CheckEntry<'a> {
    suite: &'a str,
    name: &'a str,
    passed: bool,
    value: Option<f64>,
    limit: Option<f64>,
    detail: &'a str,
}

pub fn cmd_check(args: &CheckArgs) -> Result<(), CliError> {
    let suite: Suite = args.suite.parse().map_err(|e: hho_core::HhoError| CliError::Config(e.to_string()))?;
    let mesh_dir = match &args.mesh_dir {
        Some(d) if !d.is_dir() => {
            return Err(CliError::Config(format!("mesh directory {} does not exist", d.display())))
        }
        Some(d) => Some(d.clone()),
        None => Some(PathBuf::from("meshes")).filter(|d| d.join("annulus_0.msh").is_file()),
    };
    if mesh_dir.is_none() {
        eprintln!("note: no mesh directory found; checks use generated rectangular meshes only");
    }
    let opts = CheckOptions {
        local: LocalOptions { flip_sign_in_cell: args.flip_sign_in_cell, ..Default::default() },
        mesh_dir,
    };
    if args.serial {
        hho_core::use_serial_execution();
    }
    let start = Instant::now();
    let results = run_suite(suite, &opts);
    let runtime_s = start.elapsed().as_secs_f64();
    for r in &results {
        println!(
            "{} {:<9} {:<36} value={:<11.3e} limit={:<9.1e} {}",
            if r.passed { "PASS" } else { "FAIL" },
            r.suite,
            r.name,
            r.value,
            r.limit,
            r.detail
        );
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    println!("{} of {} checks passed in {runtime_s:.1}s", results.len() - failed, results.len());
    if let Some(p) = &args.out {
        let finite = |v: f64| v.is_finite().then_some(v);
        let summary = CheckSummary {
            suite: &args.suite,
            passed: failed == 0,
            failed,
            total: results.len(),
            runtime_s,
            checks: results
                .iter()
                .map(|r| CheckEntry {
                    suite: r.suite,
                    name: &r.name,
                    passed: r.passed,
                    value: finite(r.value),
                    limit: finite(r.limit),
                    detail: &r.detail,
                })
                .collect(),
        };
        let json = serde_json::to_string_pretty(&summary).expect("check summary serializes");
        write_atomic(p, &(json + "\n"))?;
    }
    if failed > 0 {
        return Err(CliError::CheckFailed { failed, total: results.len() });
    }
    Ok(())
}

#[derive(Args, Clone, Debug)]
pub struct MeshArgs {
    /// Mesh source: `gen:rect:N` or a mesh file.
    #[arg(long)]
    pub mesh: String,
    /// Write the mesh in the native text format.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn cmd_mesh(args: &MeshArgs) -> Result<(), CliError> {
    let source = MeshSource::parse(&args.mesh, None)?;
    let mesh = load(&source)?;
    let curved = mesh.faces.iter().filter(|f| !f.is_straight()).count();
    let boundary = mesh.faces.iter().filter(|f| f.is_boundary()).count();
    println!("mesh            {source}");
    println!("cells           {}", mesh.num_cells());
    println!("faces           {} ({} interior, {} boundary, {} curved)", mesh.faces.len(), mesh.num_interior_faces(), boundary, curved);
    println!("vertices        {}", mesh.vertices.len());
    println!("h_max           {:.6e}", mesh.h_max());
    println!("area            {:.12}", mesh.total_area());
    if let Some(p) = &args.out {
        write_atomic(p, &write_mesh(&mesh))?;
    }
    Ok(())
}
