use std::path::Path;

use mgcp_core::exec::map_indexed;
use mgcp_core::montecarlo::{
    mc_failure_survival, mc_sub_cov, mc_sub_mean, mc_tc_cov, mc_tc_mean, mc_tc_pmf, McConfig, McEstimate,
};
use mgcp_core::shock::{cause_probability, failure_subdensity, failure_survival, hazard_rate, QuadControl};
use mgcp_core::subordinator::{sub_cov, sub_lst, sub_mean};
use mgcp_core::timechanged::{tc_cov, tc_mean, tc_pgf, tc_pmf, tc_pmf_grid};
use mgcp_core::verify::{run_suite, Suite, VerifyOptions};

use crate::config::Setup;
use crate::table::{Cell, Table};
use crate::{CliError, SimTarget, SuiteArg};

/// A table plus diagnostics for stderr. `failure` turns into exit code 1
/// after the table has been written.
pub struct Outcome {
    pub table: Table,
    pub notes: Vec<String>,
    pub failure: Option<String>,
}

impl From<Table> for Outcome {
    fn from(table: Table) -> Self {
        Self {
            table,
            notes: Vec::new(),
            failure: None,
        }
    }
}

/// `start:stop:step`, inclusive of `stop` up to rounding.
pub fn parse_grid(text: &str) -> Result<Vec<f64>, CliError> {
    let bad = |why: &str| CliError::Argument(format!("grid `{text}`: {why}"));
    let parts: Vec<&str> = text.split(':').collect();
    let [start, stop, step] = parts[..] else {
        return Err(bad("expected start:stop:step"));
    };
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad(&format!("`{s}` is not a number")));
    let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
    if !(start >= 0.0) || !stop.is_finite() || stop < start {
        return Err(bad("need 0 ≤ start ≤ stop"));
    }
    if !(step > 0.0) || !step.is_finite() {
        return Err(bad("step must be positive"));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    if count > 1_000_000 {
        return Err(bad("more than a million points"));
    }
    Ok((0..count).map(|i| start + i as f64 * step).collect())
}

fn component(r: usize, q: usize) -> Result<usize, CliError> {
    if r == 0 || r > q {
        return Err(CliError::Argument(format!("component {r} outside 1..={q}")));
    }
    Ok(r - 1)
}

fn dimension(name: &str, v: &[impl Sized], q: usize) -> Result<(), CliError> {
    if v.len() != q {
        return Err(CliError::Argument(format!("--{name} has {} entries but the model has q = {q}", v.len())));
    }
    Ok(())
}

fn indexed(prefix: &str, q: usize) -> impl Iterator<Item = String> + '_ {
    (1..=q).map(move |i| format!("{prefix}{i}"))
}

pub fn pmf(s: &Setup, t: f64, max_total: u64) -> Result<Outcome, CliError> {
    let q = s.model.q();
    let grid = tc_pmf_grid(&s.model, max_total, t, &s.ctl, s.mc.execution)?;
    let mut table = Table::new(indexed("n", q).chain(["probability".into(), "tail_bound".into()]));
    for ((cell, &p), &b) in grid.cells.iter().zip(&grid.values).zip(&grid.bounds) {
        let mut row: Vec<Cell> = cell.iter().map(|&n| n.into()).collect();
        row.extend([p.into(), b.into()]);
        table.push(row);
    }
    // closing row: mass outside the listed states
    let mut row = vec![Cell::Empty; q];
    row.extend([(1.0 - grid.total()).max(0.0).into(), grid.tail_bound.into()]);
    table.push(row);
    Ok(table.into())
}

pub fn pgf(s: &Setup, u: &[f64], t: f64) -> Result<Outcome, CliError> {
    dimension("u", u, s.model.q())?;
    let v = tc_pgf(&s.model, u, t)?;
    let mut table = Table::new(indexed("u", u.len()).chain(["t".into(), "pgf".into()]));
    table.push(u.iter().map(|&x| x.into()).chain([t.into(), v.into()]).collect());
    Ok(table.into())
}

pub fn lst(s: &Setup, arg: &[f64], t: f64) -> Result<Outcome, CliError> {
    dimension("s", arg, s.model.q())?;
    let v = sub_lst(s.model.sub(), arg, t)?;
    let mut table = Table::new(indexed("s", arg.len()).chain(["t".into(), "lst".into()]));
    table.push(arg.iter().map(|&x| x.into()).chain([t.into(), v.into()]).collect());
    Ok(table.into())
}

pub fn survival(s: &Setup, grid: &[f64]) -> Result<Outcome, CliError> {
    let values = map_indexed(s.mc.execution, grid.len(), |i| failure_survival(&s.shock, grid[i], &s.ctl))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    let mut table = Table::new(["t", "survival", "tail_bound"]);
    for (t, v) in grid.iter().zip(&values) {
        table.push(vec![(*t).into(), v.value.into(), v.error_bound.into()]);
    }
    let mut outcome = Outcome::from(table);
    if let Some(w) = grid.windows(2).zip(values.windows(2)).find(|(_, v)| v[1].value > v[0].value + 1e-9) {
        outcome.failure = Some(format!(
            "survival increases between t = {} and t = {} ({} → {})",
            w.0[0], w.0[1], w.1[0].value, w.1[1].value
        ));
    }
    Ok(outcome)
}

pub fn write_plot_script(script: &Path, csv: &Path) -> Result<(), CliError> {
    let png = csv.with_extension("png");
    let body = format!(
        "import csv\n\
         import matplotlib.pyplot as plt\n\
         \n\
         with open({csv:?}) as f:\n    rows = list(csv.DictReader(f))\n\
         t = [float(r[\"t\"]) for r in rows]\n\
         s = [float(r[\"survival\"]) for r in rows]\n\
         plt.plot(t, s)\n\
         plt.xlabel(\"t\")\n\
         plt.ylabel(\"survival\")\n\
         plt.ylim(0, 1.02)\n\
         plt.savefig({png:?}, dpi=150)\n",
        csv = csv.display().to_string(),
        png = png.display().to_string(),
    );
    std::fs::write(script, body).map_err(|e| CliError::Io(format!("{}: {e}", script.display())))
}

pub fn hazard(s: &Setup, n: &[u64], r: usize, l: u64, t: f64) -> Result<Outcome, CliError> {
    let q = s.model.q();
    dimension("n", n, q)?;
    let ri = component(r, q)?;
    let h = hazard_rate(&s.model, n, ri, l, t, &s.ctl)?;
    let mut table = Table::new(
        indexed("n", q).chain(["r", "l", "t", "hazard", "tail_bound"].map(String::from)),
    );
    let mut row: Vec<Cell> = n.iter().map(|&x| x.into()).collect();
    row.extend([r.into(), l.into(), t.into(), h.value.into(), h.tail_bound.into()]);
    table.push(row);
    Ok(table.into())
}

pub fn subdensity(s: &Setup, grid: &[f64], r: Option<usize>) -> Result<Outcome, CliError> {
    let q = s.model.q();
    let comps: Vec<usize> = match r {
        Some(r) => vec![component(r, q)?],
        None => (0..q).collect(),
    };
    let mut table = Table::new(
        std::iter::once("t".to_string()).chain(comps.iter().map(|i| format!("subdensity{}", i + 1))),
    );
    let rows = map_indexed(s.mc.execution, grid.len(), |k| {
        comps
            .iter()
            .map(|&i| failure_subdensity(&s.shock, i, grid[k], &s.ctl))
            .collect::<Result<Vec<f64>, _>>()
    });
    for (t, vals) in grid.iter().zip(rows) {
        table.push(std::iter::once((*t).into()).chain(vals?.into_iter().map(Cell::from)).collect());
    }
    Ok(table.into())
}

pub fn cause(s: &Setup, r: Option<usize>) -> Result<Outcome, CliError> {
    let q = s.model.q();
    let comps: Vec<usize> = match r {
        Some(r) => vec![component(r, q)?],
        None => (0..q).collect(),
    };
    let quad = QuadControl::default();
    let mut table = Table::new(["r", "probability", "quadrature_error"]);
    let mut total = 0.0;
    for i in comps {
        let p = cause_probability(&s.shock, i, &quad, &s.ctl)?;
        total += p.value;
        table.push(vec![(i + 1).into(), p.value.into(), p.error.into()]);
    }
    let mut outcome = Outcome::from(table);
    if r.is_none() {
        outcome.notes.push(format!("note: cause probabilities sum to {total}"));
    }
    Ok(outcome)
}

fn estimate_row(table: &mut Table, quantity: String, t: f64, e: McEstimate, analytic: f64) {
    table.push(vec![
        quantity.into(),
        t.into(),
        e.value.into(),
        e.std_err.into(),
        e.n.into(),
        analytic.into(),
    ]);
}

pub fn simulate(s: &Setup, target: SimTarget, t: f64) -> Result<Outcome, CliError> {
    let q = s.model.q();
    let mut table = Table::new(["quantity", "t", "value", "std_err", "n", "analytic"]);
    // one stream family per quantity
    let mut k = 0u64;
    let mut next = || {
        k += 1;
        McConfig {
            seed: s.mc.seed.wrapping_add(k - 1),
            ..s.mc
        }
    };
    match target {
        SimTarget::Subordinator => {
            let sub = s.model.sub();
            for i in 0..q {
                let e = mc_sub_mean(sub, i, t, &next())?;
                estimate_row(&mut table, format!("mean[{}]", i + 1), t, e, sub_mean(sub, i, t)?);
            }
            for i in 0..q {
                for j in i..q {
                    let e = mc_sub_cov(sub, i, j, t, &next())?;
                    estimate_row(&mut table, format!("cov[{},{}]", i + 1, j + 1), t, e, sub_cov(sub, i, j, t)?);
                }
            }
        }
        SimTarget::Tc => {
            for i in 0..q {
                let e = mc_tc_mean(&s.model, i, t, &next())?;
                estimate_row(&mut table, format!("mean[{}]", i + 1), t, e, tc_mean(&s.model, i, t)?);
            }
            for i in 0..q {
                for j in i..q {
                    let e = mc_tc_cov(&s.model, i, j, t, &next())?;
                    let a = tc_cov(&s.model, i, j, t)?;
                    estimate_row(&mut table, format!("cov[{},{}]", i + 1, j + 1), t, e, a);
                }
            }
            let zero = vec![0; q];
            let e = mc_tc_pmf(&s.model, &zero, t, &next())?;
            estimate_row(&mut table, "pmf[0]".into(), t, e, tc_pmf(&s.model, &zero, t, &s.ctl)?.value);
        }
        SimTarget::Survival => {
            let e = mc_failure_survival(&s.shock, t, &next())?;
            estimate_row(&mut table, "survival".into(), t, e, failure_survival(&s.shock, t, &s.ctl)?.value);
        }
    }
    Ok(table.into())
}

pub fn verify(s: &Setup, suite: SuiteArg) -> Result<Outcome, CliError> {
    let suite = match suite {
        SuiteArg::All => Suite::All,
        SuiteArg::Analytic => Suite::Analytic,
        SuiteArg::Mc => Suite::Mc,
        SuiteArg::Pde => Suite::Pde,
        SuiteArg::Shock => Suite::Shock,
    };
    let opts = VerifyOptions {
        mc: s.mc,
        hazard_samples: s.mc.samples.saturating_mul(10),
        ctl: s.ctl,
        exec: s.mc.execution,
    };
    let checks = run_suite(suite, &opts)?;
    let mut table = Table::new(["suite", "check", "observed", "tolerance", "passed", "detail"]);
    for c in &checks {
        table.push(vec![
            c.suite.into(),
            c.name.clone().into(),
            c.observed.into(),
            c.tolerance.into(),
            c.passed.into(),
            c.detail.clone().into(),
        ]);
    }
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    let mut outcome = Outcome::from(table);
    outcome
        .notes
        .push(format!("{} of {} checks passed", checks.len() - failed.len(), checks.len()));
    if !failed.is_empty() {
        outcome.failure = Some(format!("{} check(s) failed: {}", failed.len(), failed.join("; ")));
    }
    Ok(outcome)
}
