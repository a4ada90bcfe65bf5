//! Per-figure data files and a gnuplot script that renders them.
//!
//! Data files are CSV with the same provenance header as the result file and
//! live next to it: `<stem>_fig3_ax.csv`, `<stem>_fig3_ay.csv` (`fig4` for
//! DLM runs), `<stem>_fig5.csv`, optionally `<stem>_fig5_lab.csv`, and
//! `<stem>_fig6.csv` for Robertson sweeps. `<stem>_plot.gp` draws them all.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::manifest::{Experiment, ModelKind, RunManifest};
use crate::output::{render_csv, write_atomic, Provenance, Table, Value};
use crate::CliError;

/// Reads a lab-data CSV with header `phi,ozawa_lhs,product`; `#` lines are
/// comments.
pub fn read_lab_data(path: &Path) -> Result<Table, CliError> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let bad = |msg: String| {
        CliError::Usage(format!(
            "invalid value for '--lab-data' ({}): {msg}",
            path.display()
        ))
    };
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    let wanted = ["phi", "ozawa_lhs", "product"];
    let idx: Vec<usize> = wanted
        .iter()
        .map(|w| {
            headers
                .iter()
                .position(|h| h == *w)
                .ok_or_else(|| bad(format!("missing column '{w}'")))
        })
        .collect::<Result<_, _>>()?;
    let mut table = Table::new(wanted);
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| bad(e.to_string()))?;
        let row = idx
            .iter()
            .map(|&i| {
                let field = record.get(i).unwrap_or("");
                field
                    .parse::<f64>()
                    .map(Value::Float)
                    .map_err(|e| bad(format!("record {}: '{field}': {e}", line + 1)))
            })
            .collect::<Result<Vec<_>, _>>()?;
        table.push(row);
    }
    if table.rows.is_empty() {
        return Err(bad("no data rows".into()));
    }
    Ok(table)
}

fn sibling(output: &Path, suffix: &str) -> PathBuf {
    let stem = output
        .file_stem()
        .map_or_else(|| "spinsim".into(), |s| s.to_string_lossy().into_owned());
    output.with_file_name(format!("{stem}_{suffix}"))
}

fn file_name(p: &Path) -> String {
    p.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn renamed(table: &Table, pairs: &[(&str, &str)]) -> Table {
    let from: Vec<&str> = pairs.iter().map(|p| p.0).collect();
    let mut t = table.select(&from);
    t.columns = pairs.iter().map(|p| p.1.to_string()).collect();
    t
}

fn expectation_data(table: &Table, suffix: &str) -> Table {
    let names = ["s1", "s2", "s1s2"];
    let mut pairs = vec![("phi".to_string(), "phi".to_string())];
    for prefix in ["", "theory_", "stderr_"] {
        for n in names {
            pairs.push((format!("{prefix}{n}_{suffix}"), format!("{prefix}{n}")));
        }
    }
    let refs: Vec<(&str, &str)> = pairs
        .iter()
        .map(|(a, b)| (a.as_str(), b.as_str()))
        .collect();
    renamed(table, &refs)
}

/// Data for the expectation figure of the `a = x` or `a = y` run.
pub fn fig_expectations(table: &Table, moment: char) -> Table {
    expectation_data(table, &moment.to_string())
}

/// Error-disturbance data with the constant bound.
pub fn fig5(table: &Table) -> Table {
    renamed(
        table,
        &[
            ("phi", "phi"),
            ("ozawa_lhs", "ozawa_lhs"),
            ("heisenberg_product", "heisenberg_product"),
            ("bound", "bound"),
            ("theory_ozawa_lhs", "theory_ozawa_lhs"),
            ("theory_heisenberg_product", "theory_heisenberg_product"),
            ("stderr_ozawa_lhs", "stderr_ozawa_lhs"),
            ("stderr_heisenberg_product", "stderr_heisenberg_product"),
        ],
    )
}

/// Robertson data with the lower bound `a_z^2`.
pub fn fig6(table: &Table) -> Table {
    let mut t = Table::new([
        "az",
        "lhs",
        "rhs",
        "theory_lowerbound",
        "stderr_lhs",
        "stderr_rhs",
    ]);
    let src = table.select(&["az", "lhs", "rhs", "stderr_lhs", "stderr_rhs"]);
    for r in src.rows {
        let az = r[0].as_f64().unwrap_or(f64::NAN);
        t.push(vec![
            r[0].clone(),
            r[1].clone(),
            r[2].clone(),
            Value::Float(az * az),
            r[3].clone(),
            r[4].clone(),
        ]);
    }
    t
}

fn script_header(prov: &Provenance) -> String {
    let mut s = String::new();
    for line in prov.lines() {
        let _ = writeln!(s, "# {line}");
    }
    s.push_str("# run from this directory: gnuplot <this file>\n");
    s.push_str("set datafile separator \",\"\nset datafile missing \"NaN\"\nset key autotitle columnhead\n");
    s.push_str("set terminal pngcairo size 900,600\nset grid\n");
    s
}

fn expectation_script(s: &mut String, data: &str, png: &str, title: &str) {
    let _ = writeln!(
        s,
        "\nset output \"{png}\"\nset title \"{title}\"\nset xlabel \"phi (rad)\"\nset ylabel \"expectation\"\nset yrange [-1.1:1.1]\n\
         plot \"{data}\" using 1:2:8 with yerrorbars pt 7 ps 0.6 title \"<S1>\", \\\n\
         \x20    \"\" using 1:3:9 with yerrorbars pt 5 ps 0.6 title \"<S2>\", \\\n\
         \x20    \"\" using 1:4:10 with yerrorbars pt 9 ps 0.6 title \"<S1S2>\", \\\n\
         \x20    \"\" using 1:5 with lines title \"theory <S1>\", \\\n\
         \x20    \"\" using 1:6 with lines title \"theory <S2>\", \\\n\
         \x20    \"\" using 1:7 with lines title \"theory <S1S2>\""
    );
}

fn write_csv(
    path: PathBuf,
    table: &Table,
    prov: &Provenance,
    out: &mut Vec<PathBuf>,
) -> Result<(), CliError> {
    write_atomic(&path, &render_csv(table, prov))?;
    out.push(path);
    Ok(())
}

/// Writes the plot data files and script for `manifest`. Returns the paths
/// written.
pub fn emit_plot_data(
    manifest: &RunManifest,
    table: &Table,
    lab: Option<&Table>,
    prov: &Provenance,
) -> Result<Vec<PathBuf>, CliError> {
    if table.rows.is_empty() {
        return Err(CliError::Invariant("no rows to plot".into()));
    }
    let out = &manifest.output;
    let mut written = Vec::new();
    let mut script = script_header(prov);
    match &manifest.experiment {
        Experiment::UncertaintySweep { model, .. } => {
            let fig = match model.kind {
                ModelKind::Probabilistic => "fig3",
                ModelKind::Dlm => "fig4",
            };
            for m in ['x', 'y'] {
                let path = sibling(out, &format!("{fig}_a{m}.csv"));
                let png = file_name(&path.with_extension("png"));
                expectation_script(
                    &mut script,
                    &file_name(&path),
                    &png,
                    &format!("initial moment along {m}"),
                );
                write_csv(path, &fig_expectations(table, m), prov, &mut written)?;
            }
            let path = sibling(out, "fig5.csv");
            let data = file_name(&path);
            let png = file_name(&path.with_extension("png"));
            let _ = writeln!(
                script,
                "\nset output \"{png}\"\nset title \"error-disturbance relation\"\nset xlabel \"phi (rad)\"\nset ylabel \"\"\nset yrange [*:*]\n\
                 plot \"{data}\" using 1:2:7 with yerrorbars pt 7 ps 0.6 title \"simulated LHS\", \\\n\
                 \x20    \"\" using 1:3:8 with yerrorbars pt 5 ps 0.6 title \"simulated product\", \\\n\
                 \x20    \"\" using 1:4 with lines lw 2 title \"bound\", \\\n\
                 \x20    \"\" using 1:5 with lines title \"theory LHS\", \\\n\
                 \x20    \"\" using 1:6 with lines title \"theory product\"{}",
                if lab.is_some() {
                    let lab_name = file_name(&sibling(out, "fig5_lab.csv"));
                    format!(
                        ", \\\n     \"{lab_name}\" using 1:2 with points pt 6 title \"lab LHS\", \\\n     \"\" using 1:3 with points pt 4 title \"lab product\""
                    )
                } else {
                    String::new()
                }
            );
            write_csv(path, &fig5(table), prov, &mut written)?;
            if let Some(lab) = lab {
                write_csv(sibling(out, "fig5_lab.csv"), lab, prov, &mut written)?;
            }
        }
        Experiment::RobertsonSweep { .. } => {
            let path = sibling(out, "fig6.csv");
            let data = file_name(&path);
            let png = file_name(&path.with_extension("png"));
            let _ = writeln!(
                script,
                "\nset output \"{png}\"\nset title \"Robertson relation\"\nset xlabel \"a_z\"\nset yrange [-0.05:1.05]\n\
                 plot \"{data}\" using 1:2:5 with yerrorbars pt 7 ps 0.6 title \"(1-<sx>^2)(1-<sy>^2)\", \\\n\
                 \x20    \"\" using 1:3:6 with yerrorbars pt 5 ps 0.6 title \"<sz>^2\", \\\n\
                 \x20    \"\" using 1:4 with lines title \"a_z^2\""
            );
            write_csv(path, &fig6(table), prov, &mut written)?;
        }
        other => {
            return Err(CliError::Usage(format!(
                "'--emit-plots' is not supported by {}",
                other.name()
            )));
        }
    }
    let script_path = sibling(out, "plot.gp");
    write_atomic(&script_path, script.as_bytes())?;
    written.push(script_path);
    Ok(written)
}
