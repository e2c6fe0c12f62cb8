use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context};
use critdelay::commensurate::critical_delays_commensurate;
use critdelay::free_delay::{sweep, SweepConfig};
use critdelay::model::{self, build_heat_system, load_system, HeatParams};
use critdelay::scalar::{scalar_sweep, ScalarSystem};
use critdelay::DdeSystem;
use serde::Serialize;
use serde_json::json;

use crate::output::{commensurate_table, infinite_table, sweep_table, Cell, Table};
use crate::{Cli, Command, Format, SolveOpts};

/// Summary of one solving run.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub command: String,
    pub accepted: usize,
    pub rejected_by_reason: BTreeMap<String, usize>,
    pub infinite_modes: usize,
    pub wall_time: f64,
    /// The configuration in effect, with the residual bound resolved.
    pub config_echo: SweepConfig,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

/// Process exit code for an error: 2 for eigensolver failures, 1 otherwise.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    match err.downcast_ref::<critdelay::Error>() {
        Some(critdelay::Error::Solver(_)) => 2,
        _ => 1,
    }
}

impl SolveOpts {
    pub fn config(&self) -> SweepConfig {
        let d = SweepConfig::default();
        SweepConfig {
            delta: self.delta.unwrap_or(d.delta),
            p_max: self.pmax.unwrap_or(d.p_max),
            h_max: self.hmax.unwrap_or(d.h_max),
            unit_tol: self.unit_tol.unwrap_or(d.unit_tol),
            omega_tol: self.omega_tol.unwrap_or(d.omega_tol),
            residual_tol: self.residual_tol,
            rank_tol: self.rank_tol.unwrap_or(d.rank_tol),
            use_cayley: self.cayley,
            refine: !self.no_refine,
        }
    }
}

fn thread_count(flag: Option<usize>) -> anyhow::Result<Option<usize>> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var("CRITDELAY_THREADS") {
            Ok(s) if !s.trim().is_empty() => Some(
                s.trim()
                    .parse()
                    .with_context(|| format!("CRITDELAY_THREADS={s:?} is not a thread count"))?,
            ),
            _ => None,
        },
    };
    if n == Some(0) {
        bail!("thread count must be at least 1");
    }
    Ok(n)
}

fn with_threads<T: Send>(flag: Option<usize>, f: impl FnOnce() -> T + Send) -> anyhow::Result<T> {
    match thread_count(flag)? {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .context("building thread pool")?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

fn open_output(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_table(
    table: &Table,
    format: Format,
    meta: serde_json::Value,
    path: Option<&Path>,
) -> anyhow::Result<()> {
    let mut out = open_output(path)?;
    match format {
        Format::Csv => table.write_csv(&mut out)?,
        Format::Json => {
            let doc = json!({ "rows": table.json_rows(), "meta": meta });
            serde_json::to_writer_pretty(&mut out, &doc)?;
            writeln!(out)?;
        }
    }
    out.flush()?;
    Ok(())
}

fn side_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".infinite.csv");
    PathBuf::from(s)
}

fn finish(report: &RunReport, table: &Table, opts: &SolveOpts) -> anyhow::Result<()> {
    write_table(
        table,
        opts.format,
        serde_json::to_value(report)?,
        opts.output.as_deref(),
    )?;
    if let Some(path) = &opts.report {
        let text = serde_json::to_string_pretty(report)?;
        std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
    }
    let rejected: usize = report.rejected_by_reason.values().sum();
    eprintln!(
        "{}: {} points accepted, {} candidates rejected, {} infinite modes, {:.3} s",
        report.command, report.accepted, rejected, report.infinite_modes, report.wall_time
    );
    for (k, v) in &report.rejected_by_reason {
        eprintln!("  rejected ({k}): {v}");
    }
    for note in &report.notes {
        eprintln!("  note: {note}");
    }
    Ok(())
}

fn resolved(cfg: &SweepConfig, sys: &DdeSystem) -> SweepConfig {
    SweepConfig {
        residual_tol: Some(cfg.residual_tol_for(sys)),
        ..cfg.clone()
    }
}

fn cmd_sweep(model: &Path, opts: &SolveOpts) -> anyhow::Result<()> {
    let start = Instant::now();
    let sys = load_system(model)?;
    let cfg = opts.config();
    let out = with_threads(opts.threads, || sweep(&sys, &cfg))??;
    let table = sweep_table(sys.m(), &out.points);
    let mut notes = Vec::new();
    if out.points.is_empty() {
        notes.push("no critical points found".to_string());
    }
    if let Some(k) = out.reorder_hint {
        notes.push(format!(
            "A{} is singular but A{k} is not; relabeling the delays to put A{k} last removes the infinite eigenvalues",
            sys.m()
        ));
    }
    if !out.infinite_modes.is_empty() {
        let n = sys.n();
        let side = infinite_table(sys.m(), n, &out.infinite_modes);
        match &opts.output {
            Some(path) => {
                let p = side_path(path);
                write_table(&side, Format::Csv, json!(null), Some(&p))?;
                notes.push(format!(
                    "h_{}-independent modes written to {}",
                    sys.m(),
                    p.display()
                ));
            }
            None => {
                for mode in &out.infinite_modes {
                    notes.push(format!(
                        "h_{}-independent mode at phi = {:?}, omega = {:.6}",
                        sys.m(),
                        mode.phi,
                        mode.omega
                    ));
                }
            }
        }
    }
    let report = RunReport {
        command: "sweep".into(),
        accepted: out.points.len(),
        rejected_by_reason: out.stats.rejected.as_map().clone(),
        infinite_modes: out.infinite_modes.len(),
        wall_time: start.elapsed().as_secs_f64(),
        config_echo: resolved(&cfg, &sys),
        notes,
    };
    finish(&report, &table, opts)
}

fn cmd_commensurate(model: &Path, direction: &[i64], opts: &SolveOpts) -> anyhow::Result<()> {
    let start = Instant::now();
    let sys = load_system(model)?;
    let cfg = opts.config();
    let out = with_threads(opts.threads, || {
        critical_delays_commensurate(&sys, direction, &cfg)
    })??;
    let table = commensurate_table(sys.m(), &out.points);
    let mut notes = Vec::new();
    if out.points.is_empty() {
        notes.push("no critical points found".to_string());
    }
    if out.infinite_eigenvalues > 0 {
        notes.push(format!(
            "{} infinite eigenvalues skipped",
            out.infinite_eigenvalues
        ));
    }
    let report = RunReport {
        command: "commensurate".into(),
        accepted: out.points.len(),
        rejected_by_reason: out.rejected.as_map().clone(),
        infinite_modes: 0,
        wall_time: start.elapsed().as_secs_f64(),
        config_echo: resolved(&cfg, &sys),
        notes,
    };
    finish(&report, &table, opts)
}

fn cmd_scalar(coeffs: &[f64], opts: &SolveOpts) -> anyhow::Result<()> {
    let start = Instant::now();
    let sys = ScalarSystem::new(coeffs.to_vec())?;
    let cfg = opts.config();
    let points = with_threads(opts.threads, || scalar_sweep(&sys, &cfg))??;
    let table = sweep_table(sys.m(), &points);
    let report = RunReport {
        command: "scalar".into(),
        accepted: points.len(),
        rejected_by_reason: BTreeMap::new(),
        infinite_modes: 0,
        wall_time: start.elapsed().as_secs_f64(),
        config_echo: resolved(&cfg, &sys.to_system()),
        notes: if points.is_empty() {
            vec!["no critical points found".into()]
        } else {
            Vec::new()
        },
    };
    finish(&report, &table, opts)
}

#[derive(Debug, Default, Serialize)]
struct VerifySummary {
    checked: usize,
    passed: usize,
    failed: usize,
    malformed: usize,
    steady_state: usize,
    residual_tol: f64,
}

fn cmd_verify(
    model: &Path,
    candidates: &Path,
    residual_tol: Option<f64>,
    format: Format,
    output: Option<&Path>,
) -> anyhow::Result<()> {
    let sys = load_system(model)?;
    let m = sys.m();
    let tol = SweepConfig {
        residual_tol,
        ..Default::default()
    }
    .residual_tol_for(&sys);
    if !(tol.is_finite() && tol > 0.0) {
        bail!("residual tolerance must be positive");
    }
    let file =
        File::open(candidates).with_context(|| format!("opening {}", candidates.display()))?;
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(file);
    let header = reader
        .headers()
        .with_context(|| format!("reading header of {}", candidates.display()))?
        .clone();
    let column = |name: &str| -> anyhow::Result<usize> {
        header.iter().position(|h| h.trim() == name).ok_or_else(|| {
            critdelay::Error::Input(format!("{}: missing column {name}", candidates.display()))
                .into()
        })
    };
    let omega_col = column("omega")?;
    let h_cols: Vec<usize> = (1..=m)
        .map(|k| column(&format!("h_{k}")))
        .collect::<anyhow::Result<_>>()?;

    let mut table_header = vec!["line".to_string(), "omega".to_string()];
    table_header.extend((1..=m).map(|k| format!("h_{k}")));
    table_header.extend(["residual", "status"].map(String::from));
    let mut table = Table::new(table_header);
    let mut summary = VerifySummary {
        residual_tol: tol,
        ..Default::default()
    };

    for record in reader.records() {
        summary.checked += 1;
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                eprintln!("line {line}: {e}");
                summary.malformed += 1;
                let mut row = vec![Cell::Int(line as i64)];
                row.extend(std::iter::repeat_n(Cell::Empty, m + 2));
                row.push(Cell::Text("malformed".into()));
                table.rows.push(row);
                continue;
            }
        };
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |i: usize| -> Result<f64, String> {
            let raw = record
                .get(i)
                .ok_or_else(|| format!("missing field {}", header.get(i).unwrap_or("?")))?;
            raw.trim()
                .parse::<f64>()
                .map_err(|e| format!("{}: {raw:?}: {e}", header.get(i).unwrap_or("?")))
        };
        let parsed = field(omega_col).and_then(|w| {
            let hs = h_cols
                .iter()
                .map(|&c| field(c))
                .collect::<Result<Vec<f64>, String>>()?;
            let residual = model::residual_at(&sys, w, &hs).map_err(|e| e.to_string())?;
            Ok((w, hs, residual))
        });
        match parsed {
            Ok((omega, hs, residual)) => {
                let status = if omega == 0.0 {
                    summary.steady_state += 1;
                    eprintln!("line {line}: steady-state crossing, check det(A0 + sum Ak)");
                    "steady_state"
                } else if residual <= tol {
                    summary.passed += 1;
                    "pass"
                } else {
                    summary.failed += 1;
                    "fail"
                };
                let mut row = vec![Cell::Int(line as i64), Cell::Float(omega)];
                row.extend(hs.into_iter().map(Cell::Float));
                row.extend([Cell::Float(residual), Cell::Text(status.into())]);
                table.rows.push(row);
            }
            Err(msg) => {
                eprintln!("line {line}: {msg}");
                summary.malformed += 1;
                let mut row = vec![Cell::Int(line as i64)];
                row.extend(std::iter::repeat_n(Cell::Empty, m + 2));
                row.push(Cell::Text("malformed".into()));
                table.rows.push(row);
            }
        }
    }
    write_table(&table, format, serde_json::to_value(&summary)?, output)?;
    eprintln!(
        "verify: {} rows, {} pass, {} fail, {} malformed, {} steady-state (tolerance {:.3e})",
        summary.checked,
        summary.passed,
        summary.failed,
        summary.malformed,
        summary.steady_state,
        tol
    );
    Ok(())
}

fn cmd_gen_heat(
    n: usize,
    beta: f64,
    kappa: &[f64],
    positions: &[f64],
    output: Option<&Path>,
) -> anyhow::Result<()> {
    let params = HeatParams {
        beta,
        kappa: kappa.try_into().context("kappa takes three values")?,
        positions: positions
            .try_into()
            .context("positions takes three values")?,
    };
    let sys = build_heat_system(n, &params)?;
    match output {
        Some(path) => model::save_system(&sys, path)?,
        None => {
            let mut out = io::stdout().lock();
            out.write_all(model::format_system(&sys).as_bytes())?;
        }
    }
    Ok(())
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::Sweep { model, opts } => cmd_sweep(model, opts),
        Command::Commensurate {
            model,
            direction,
            opts,
        } => cmd_commensurate(model, direction, opts),
        Command::Scalar { coeffs, opts } => cmd_scalar(coeffs, opts),
        Command::Verify {
            model,
            candidates,
            residual_tol,
            format,
            output,
        } => cmd_verify(model, candidates, *residual_tol, *format, output.as_deref()),
        Command::GenHeat {
            n,
            beta,
            kappa,
            positions,
            output,
        } => cmd_gen_heat(*n, *beta, kappa, positions, output.as_deref()),
    }
}
