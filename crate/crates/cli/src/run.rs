//! Runs the experiment described by a manifest and turns the counts into
//! result tables.

use std::path::PathBuf;

use rayon::prelude::*;
use spinsim_core::experiments::{
    self, run_filtering_triple, run_robertson_sweep, run_uncertainty_sweep,
};
use spinsim_core::oracle::{self, ErrorDisturbance};
use spinsim_core::rng::derive_seed;
use spinsim_core::stats::{self, ExpectationEstimate};
use spinsim_core::{
    AnalyzerModel, CountTable, Expectations, FilteringTripleConfig, RobertsonRunConfig, Sign,
    TripleCountTable, UncertaintyRunConfig, Vec3,
};

use crate::manifest::{Experiment, Model, RunManifest};
use crate::output::{write_table, Provenance, Table, Value};
use crate::{plots, CliError};

const TAG_TRIPLE_PHI: u64 = 0x5452_5048;

pub fn provenance(manifest: &RunManifest) -> Provenance {
    Provenance {
        version: env!("CARGO_PKG_VERSION").to_string(),
        command: manifest.command_line(),
        seed: manifest.seed,
    }
}

/// Runs the experiment and writes the result file plus any plot files.
/// Returns the paths written, result file first.
pub fn execute(manifest: &RunManifest) -> Result<Vec<PathBuf>, CliError> {
    let lab = match &manifest.experiment {
        Experiment::UncertaintySweep {
            lab_data: Some(path),
            ..
        } => Some(plots::read_lab_data(path)?),
        _ => None,
    };
    let table = build_table(manifest)?;
    let prov = provenance(manifest);
    write_table(&manifest.output, &table, manifest.format, &prov)?;
    let mut written = vec![manifest.output.clone()];
    let emit = matches!(
        manifest.experiment,
        Experiment::UncertaintySweep {
            emit_plots: true,
            ..
        } | Experiment::RobertsonSweep {
            emit_plots: true,
            ..
        }
    );
    if emit {
        written.extend(plots::emit_plot_data(
            manifest,
            &table,
            lab.as_ref(),
            &prov,
        )?);
    }
    Ok(written)
}

/// Runs the experiment and returns its result table without writing it.
pub fn build_table(manifest: &RunManifest) -> Result<Table, CliError> {
    let seed = manifest.seed;
    match &manifest.experiment {
        Experiment::UncertaintySweep {
            n_events,
            model,
            grid,
            ..
        } => uncertainty_table(grid.points(), *n_events, *model, seed.expect("seeded")),
        Experiment::FilteringTriple {
            n_events,
            model,
            grid,
            initial_moment,
        } => triple_table(
            grid.points(),
            *n_events,
            *model,
            seed.expect("seeded"),
            initial_moment.0,
        ),
        Experiment::RobertsonSweep {
            n_events,
            model,
            az_step,
            ..
        } => robertson_table(
            experiments::az_grid(*az_step)?,
            *n_events,
            *model,
            seed.expect("seeded"),
        ),
        Experiment::OracleTable {
            grid,
            initial_moment,
        } => oracle_table(grid.points(), initial_moment.0),
    }
}

fn trailer(seed: u64, n_events: u64, model: AnalyzerModel) -> Vec<Value> {
    vec![
        seed.into(),
        n_events.into(),
        model.name().into(),
        model.gamma().into(),
    ]
}

const TRAILER: [&str; 4] = ["seed", "n_events", "model", "gamma"];

fn check_conservation(
    table: &CountTable,
    n_events: u64,
    phi: f64,
    label: &str,
) -> Result<(), CliError> {
    if table.emitted() != 4 * n_events || table.detected() + table.destroyed() != table.emitted() {
        return Err(CliError::Invariant(format!(
            "count table {label} at phi = {phi}: emitted {} != detected {} + destroyed {} (expected {})",
            table.emitted(),
            table.detected(),
            table.destroyed(),
            4 * n_events
        )));
    }
    Ok(())
}

fn estimate_or_nan(table: &CountTable) -> ExpectationEstimate {
    stats::estimate_expectations(table).unwrap_or(ExpectationEstimate {
        value: Expectations {
            s1: f64::NAN,
            s2: f64::NAN,
            s1s2: f64::NAN,
        },
        stderr: Expectations {
            s1: f64::NAN,
            s2: f64::NAN,
            s1s2: f64::NAN,
        },
        detected: 0,
    })
}

fn triplet(e: Expectations) -> [f64; 3] {
    [e.s1, e.s2, e.s1s2]
}

/// Column order of the `uncertainty-sweep` table.
pub fn uncertainty_columns() -> Vec<String> {
    let mut cols = vec!["phi".to_string()];
    let est = ["s1_x", "s2_x", "s1s2_x", "s1_y", "s2_y", "s1s2_y"];
    let ozawa = ["epsilon", "eta", "ozawa_lhs", "heisenberg_product"];
    cols.extend(est.iter().chain(&ozawa).map(|s| s.to_string()));
    cols.push("bound".into());
    cols.extend(est.iter().chain(&ozawa).map(|s| format!("theory_{s}")));
    cols.extend(est.iter().chain(&ozawa).map(|s| format!("stderr_{s}")));
    cols.extend(["detected_x", "destroyed_x", "detected_y", "destroyed_y"].map(String::from));
    cols.extend(TRAILER.map(String::from));
    cols
}

fn uncertainty_table(
    grid: Vec<f64>,
    n_events: u64,
    model: Model,
    seed: u64,
) -> Result<Table, CliError> {
    let cfg = UncertaintyRunConfig::new(grid, n_events, model.analyzer(), seed);
    let points = run_uncertainty_sweep(&cfg)?;
    let mut table = Table::new(uncertainty_columns());
    for p in &points {
        check_conservation(&p.table_x, n_events, p.phi, "a = x")?;
        check_conservation(&p.table_y, n_events, p.phi, "a = y")?;
        let ex = estimate_or_nan(&p.table_x);
        let ey = estimate_or_nan(&p.table_y);
        let rec = match stats::epsilon_eta_from_counts(&p.table_x, &p.table_y) {
            Ok(ee) => Some(stats::ozawa_check(&ee, 1.0, 1.0)),
            Err(_) => None,
        };
        let theory = oracle::theory_epsilon_eta(p.phi);
        let tx = oracle::expectations(Vec3::X, p.phi);
        let ty = oracle::expectations(Vec3::Y, p.phi);

        let mut row: Vec<Value> = vec![p.phi.into()];
        let nan = f64::NAN;
        row.extend(
            triplet(ex.value)
                .into_iter()
                .chain(triplet(ey.value))
                .map(Value::from),
        );
        let r = |f: fn(&stats::UncertaintyRecord) -> f64| rec.as_ref().map_or(nan, f);
        row.extend(
            [
                r(|r| r.epsilon),
                r(|r| r.eta),
                r(|r| r.ozawa_lhs),
                r(|r| r.heisenberg_product),
            ]
            .map(Value::from),
        );
        row.push(1.0.into());
        row.extend(triplet(tx).into_iter().chain(triplet(ty)).map(Value::from));
        row.extend(
            [
                theory.epsilon,
                theory.eta,
                oracle::ozawa_lhs_theory(p.phi),
                theory.heisenberg_product(),
            ]
            .map(Value::from),
        );
        row.extend(
            triplet(ex.stderr)
                .into_iter()
                .chain(triplet(ey.stderr))
                .map(Value::from),
        );
        row.extend(
            [
                r(|r| r.stderr_epsilon),
                r(|r| r.stderr_eta),
                r(|r| r.stderr_ozawa_lhs),
                r(|r| r.stderr_product),
            ]
            .map(Value::from),
        );
        row.extend(
            [
                p.table_x.detected(),
                p.table_x.destroyed(),
                p.table_y.detected(),
                p.table_y.destroyed(),
            ]
            .map(Value::from),
        );
        row.extend(trailer(seed, n_events, model.analyzer()));
        table.push(row);
    }
    Ok(table)
}

const TRIPLE_STATS: [&str; 7] = ["s1", "s2", "s3", "s1s2", "s1s3", "s2s3", "s1s2s3"];

fn triple_stats(mean: impl Fn(&dyn Fn(f64, f64, f64) -> f64) -> f64) -> [f64; 7] {
    [
        mean(&|a, _, _| a),
        mean(&|_, b, _| b),
        mean(&|_, _, c| c),
        mean(&|a, b, _| a * b),
        mean(&|a, _, c| a * c),
        mean(&|_, b, c| b * c),
        mean(&|a, b, c| a * b * c),
    ]
}

fn sign_label(s: Sign) -> char {
    match s {
        Sign::Plus => 'p',
        Sign::Minus => 'm',
    }
}

/// Column order of the `filtering-triple` table.
pub fn triple_columns() -> Vec<String> {
    let mut cols = vec!["phi".to_string()];
    cols.extend(TRIPLE_STATS.map(String::from));
    cols.extend(TRIPLE_STATS.map(|s| format!("theory_{s}")));
    cols.extend(TRIPLE_STATS.map(|s| format!("stderr_{s}")));
    for s1 in Sign::BOTH {
        for s2 in Sign::BOTH {
            for s3 in Sign::BOTH {
                cols.push(format!(
                    "n_{}{}{}",
                    sign_label(s1),
                    sign_label(s2),
                    sign_label(s3)
                ));
            }
        }
    }
    cols.extend(TRAILER.map(String::from));
    cols
}

/// Seed of the triple run at `phi`, derived from the master seed.
pub fn triple_seed(master: u64, phi: f64) -> u64 {
    derive_seed(master, &[TAG_TRIPLE_PHI, (phi + 0.0).to_bits()])
}

fn triple_table(
    grid: Vec<f64>,
    n_events: u64,
    model: Model,
    seed: u64,
    a: Vec3,
) -> Result<Table, CliError> {
    let moment = spinsim_core::MagneticMoment::normalized(a)?;
    let runs: Vec<(f64, TripleCountTable)> = grid
        .par_iter()
        .map(|&phi| {
            let cfg = FilteringTripleConfig::master(
                moment,
                phi,
                n_events,
                model.analyzer(),
                triple_seed(seed, phi),
            );
            run_filtering_triple(&cfg).map(|t| (phi, t))
        })
        .collect::<Result<_, _>>()?;
    let mut table = Table::new(triple_columns());
    for (phi, counts) in &runs {
        if counts.total() != counts.emitted || counts.emitted != n_events {
            return Err(CliError::Invariant(format!(
                "filtering triple at phi = {phi}: {} messengers in the beams, {} emitted",
                counts.total(),
                counts.emitted
            )));
        }
        let b = Vec3::in_plane(*phi);
        let dist = oracle::prob_triple(a, b, Vec3::Y, b)?;
        let sim = triple_stats(|f| counts.mean(f));
        let theory = triple_stats(|f| dist.mean(f));
        let mut row: Vec<Value> = vec![(*phi).into()];
        row.extend(sim.map(Value::from));
        row.extend(theory.map(Value::from));
        row.extend(sim.map(|m| Value::from(stats::sign_mean_stderr(m, n_events))));
        for s1 in Sign::BOTH {
            for s2 in Sign::BOTH {
                for s3 in Sign::BOTH {
                    row.push(counts.count(s1, s2, s3).into());
                }
            }
        }
        row.extend(trailer(seed, n_events, model.analyzer()));
        table.push(row);
    }
    Ok(table)
}

/// Column order of the `robertson-sweep` table.
pub fn robertson_columns() -> Vec<String> {
    let mut cols: Vec<String> = ["az", "a_x", "a_y"].map(String::from).to_vec();
    let est = ["sigma_x", "sigma_y", "sigma_z", "lhs", "rhs"];
    cols.extend(est.map(String::from));
    cols.extend(est.map(|s| format!("theory_{s}")));
    cols.extend(est.map(|s| format!("stderr_{s}")));
    cols.extend(
        [
            "passed_px",
            "passed_mx",
            "passed_py",
            "passed_my",
            "passed_pz",
            "passed_mz",
        ]
        .map(String::from),
    );
    cols.extend(TRAILER.map(String::from));
    cols
}

fn robertson_table(
    az_grid: Vec<f64>,
    n_events: u64,
    model: Model,
    seed: u64,
) -> Result<Table, CliError> {
    let mut cfg = RobertsonRunConfig::new(az_grid, n_events, seed);
    cfg.model = model.analyzer();
    let points = run_robertson_sweep(&cfg)?;
    let mut table = Table::new(robertson_columns());
    for p in &points {
        if p.passed.iter().flatten().any(|&c| c > n_events) {
            return Err(CliError::Invariant(format!(
                "robertson sweep at a_z = {}: more messengers passed than were emitted",
                p.az
            )));
        }
        let a = p.moment.vec();
        let (theory_lhs, theory_rhs) = oracle::robertson_theory(a);
        let (rec, nan) = (stats::robertson_from_point(p).ok(), f64::NAN);
        let r = |f: fn(&stats::RobertsonRecord) -> f64| rec.as_ref().map_or(nan, f);
        let mut row: Vec<Value> = [p.az, a.x, a.y].map(Value::from).to_vec();
        row.extend(
            [
                r(|r| r.sigma[0]),
                r(|r| r.sigma[1]),
                r(|r| r.sigma[2]),
                r(|r| r.lhs),
                r(|r| r.rhs),
            ]
            .map(Value::from),
        );
        row.extend([a.x, a.y, a.z, theory_lhs, theory_rhs].map(Value::from));
        row.extend(
            [
                r(|r| r.stderr_sigma[0]),
                r(|r| r.stderr_sigma[1]),
                r(|r| r.stderr_sigma[2]),
                r(|r| r.stderr_lhs),
                r(|r| r.stderr_rhs),
            ]
            .map(Value::from),
        );
        for axis in 0..3 {
            for s in Sign::BOTH {
                row.push(p.passed(axis, s).into());
            }
        }
        row.extend(trailer(seed, n_events, model.analyzer()));
        table.push(row);
    }
    Ok(table)
}

/// Column order of the `oracle-table` table.
pub fn oracle_columns() -> Vec<String> {
    [
        "phi",
        "p_pp",
        "p_pm",
        "p_mp",
        "p_mm",
        "s1",
        "s2",
        "s1s2",
        "epsilon",
        "eta",
        "sigma_a",
        "sigma_b",
        "ozawa_lhs",
        "heisenberg_product",
        "bound",
    ]
    .map(String::from)
    .to_vec()
}

fn oracle_table(grid: Vec<f64>, a: Vec3) -> Result<Table, CliError> {
    let mut table = Table::new(oracle_columns());
    for phi in grid {
        let dist = oracle::prob_detuned(a, phi)?;
        let e = oracle::expectations(a, phi);
        let ed: ErrorDisturbance = oracle::theory_epsilon_eta(phi);
        let mut row: Vec<Value> = vec![phi.into()];
        for s1 in Sign::BOTH {
            for s2 in Sign::BOTH {
                row.push(dist.get(s1, s2).into());
            }
        }
        row.extend(
            [
                e.s1,
                e.s2,
                e.s1s2,
                ed.epsilon,
                ed.eta,
                ed.sigma_a,
                ed.sigma_b,
                ed.ozawa_lhs(),
                ed.heisenberg_product(),
                1.0,
            ]
            .map(Value::from),
        );
        table.push(row);
    }
    Ok(table)
}
