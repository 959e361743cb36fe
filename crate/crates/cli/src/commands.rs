use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};

use covsel::constants::{HDiagnostics, HProblem, HSolution, PcsForm, VarianceMode};
use covsel::evaluation::{
    collect_rules, compare_with_constant_rules, format_table, run_experiment, to_csv, Experiment, ExperimentPlan,
    ExperimentReport, TableRow,
};
use covsel::problems::{benchmark_name, benchmark_problem, linear_oracle, BENCHMARK_COUNT};
use covsel::procedures::{ProcedureConfig, SimulationOracle};

use crate::cache::HCache;
use crate::config::{Problem, Procedure, RunConfig};
use crate::references::{self, FULL_REPLICATIONS, FULL_TEST_POINTS};

/// Settings shared by every command.
#[derive(Debug, Clone)]
pub struct Session {
    pub config: RunConfig,
    /// Directory relative paths in the config resolve against.
    pub base_dir: PathBuf,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub cache: HCache,
}

pub fn procedure_name(mode: VarianceMode) -> &'static str {
    match mode {
        VarianceMode::Hom => "FDHom",
        VarianceMode::Het => "FDHet",
    }
}

fn fmt_point(x: &[f64]) -> String {
    // drop the intercept
    let parts: Vec<String> = x[1..].iter().map(|v| format!("{v}")).collect();
    format!("({})", parts.join(", "))
}

fn h_problem(problem: &Problem, proc_: &Procedure, cfg: &RunConfig) -> HProblem {
    let mut p = HProblem::new(
        proc_.mode,
        proc_.form,
        problem.k(),
        proc_.n0,
        problem.design().clone(),
        proc_.alpha,
    )
    .with_distribution(problem.distribution().clone())
    .with_space(problem.space().clone());
    if let Some(s) = &cfg.scheme {
        p = p.with_scheme(s.clone());
    }
    p
}

pub fn format_solution(sol: &HSolution, form: PcsForm) -> String {
    let mut s = String::new();
    writeln!(s, "h = {:.4}", sol.h).unwrap();
    writeln!(s, "mode = {}", sol.mode).unwrap();
    writeln!(s, "form = {form}").unwrap();
    writeln!(s, "dof = {}", sol.dof).unwrap();
    writeln!(s, "achieved = {:.6}", sol.achieved).unwrap();
    match &sol.diagnostics {
        HDiagnostics::Expectation { nodes, mean_v } => {
            writeln!(s, "covariate_nodes = {nodes}").unwrap();
            writeln!(s, "mean_v = {mean_v:.6}").unwrap();
        }
        HDiagnostics::Minimum { x0, v_max } => {
            writeln!(s, "x0 = {}", fmt_point(x0)).unwrap();
            writeln!(s, "v_max = {v_max:.6}").unwrap();
        }
    }
    s
}

fn write_output(path: &Path, text: &str) -> anyhow::Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).with_context(|| format!("cannot create {}", parent.display()))?;
    }
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

impl Session {
    fn out_path(&self) -> Option<PathBuf> {
        self.out.clone().or_else(|| self.config.output.as_ref().map(|p| self.base_dir.join(p)))
    }

    fn solve(&self, problem: &Problem, proc_: &Procedure) -> anyhow::Result<(f64, Option<HSolution>)> {
        if let Some(h) = proc_.h {
            return Ok((h, None));
        }
        let sol = self.cache.solve(&h_problem(problem, proc_, &self.config))?;
        Ok((sol.h, Some(sol)))
    }

    pub fn solve_h(&self) -> anyhow::Result<String> {
        let problem = self.config.problem(&self.base_dir)?;
        let proc_ = self.config.procedure();
        let sol = self.cache.solve(&h_problem(&problem, &proc_, &self.config))?;
        let text = format_solution(&sol, proc_.form);
        if let Some(path) = self.out_path() {
            write_output(&path, &text)?;
        }
        Ok(text)
    }

    fn plan(&self, proc_: &Procedure, h: f64, replications: usize, test_points: usize) -> ExperimentPlan {
        ExperimentPlan {
            mode: proc_.mode,
            config: ProcedureConfig {
                alpha: proc_.alpha,
                delta: proc_.delta,
                n0: proc_.n0,
                form: proc_.form,
                mode: proc_.mode,
                h,
            },
            replications,
            test_points,
            master_seed: self.seed,
        }
    }

    pub fn run(&self) -> anyhow::Result<String> {
        let problem = self.config.problem(&self.base_dir)?;
        let proc_ = self.config.procedure();
        let (h, _) = self.solve(&problem, &proc_)?;
        let plan = self.plan(&proc_, h, self.config.replications(), self.config.test_points());
        let report = match &problem {
            Problem::Linear(p) => {
                let oracle = linear_oracle(p);
                run_experiment(&plan, Experiment::linear(&oracle, p))?
            }
            Problem::Markov(cs) => {
                let oracle = cs.oracle();
                run_experiment(
                    &plan,
                    Experiment {
                        oracle: &oracle,
                        truth: cs.as_ref(),
                        design: &cs.design,
                        space: Some(&cs.space),
                    },
                )?
            }
        };
        let row = row_of(problem.label(), proc_.mode, &report, None);
        let headers = TableRow::headers(false);
        let cells = vec![row.cells(false)];
        if let Some(path) = self.out_path() {
            write_output(&path, &to_csv(&headers, &cells)?)?;
            let rec_headers = ["replication", "total_samples", "good_fraction", "good_at_x0"];
            let recs: Vec<Vec<String>> = report
                .records
                .iter()
                .map(|r| {
                    vec![
                        r.replication.to_string(),
                        r.total_samples.to_string(),
                        format!("{:.6}", r.good_fraction),
                        r.good_at_x0.map_or("-".into(), |b| b.to_string()),
                    ]
                })
                .collect();
            write_output(&records_path(&path), &to_csv(&rec_headers, &recs)?)?;
        }
        let mut text = format_table(&headers, &cells);
        if let Some(x0) = &report.x0 {
            writeln!(text, "x0 = {}", fmt_point(x0)).unwrap();
        }
        writeln!(text, "pcs_e_se = {:.4}", report.pcs_e.se).unwrap();
        if let Some(p) = report.pcs_min {
            writeln!(text, "pcs_min_se = {:.4}", p.se).unwrap();
        }
        Ok(text)
    }

    pub fn reproduce(&self, table: u8, scale: f64) -> anyhow::Result<String> {
        if !(scale > 0.0 && scale <= 1.0) {
            bail!(covsel::Error::InvalidArgument(format!("scale must lie in (0, 1], got {scale}")));
        }
        let (form, refs) = match table {
            1 => (PcsForm::Expectation, &references::EXPECTATION),
            2 => (PcsForm::Minimum, &references::MINIMUM),
            _ => bail!(covsel::Error::InvalidArgument(format!("table must be 1 or 2, got {table}"))),
        };
        let replications = (scale * FULL_REPLICATIONS).ceil() as usize;
        let test_points = (scale * FULL_TEST_POINTS).ceil() as usize;
        let base = self.config.procedure();
        let mut rows = Vec::with_capacity(2 * BENCHMARK_COUNT);
        for (m, mode) in [VarianceMode::Hom, VarianceMode::Het].into_iter().enumerate() {
            for (id, reference) in refs.iter().enumerate() {
                let p = benchmark_problem(id)?;
                let proc_ = Procedure {
                    mode,
                    form,
                    h: None,
                    ..base
                };
                let problem = Problem::Linear(p);
                let (h, _) = self.solve(&problem, &proc_)?;
                let Problem::Linear(p) = problem else { unreachable!() };
                let oracle = linear_oracle(&p);
                let plan = self.plan(&proc_, h, replications, test_points);
                let report = run_experiment(&plan, Experiment::linear(&oracle, &p))?;
                let label = format!("({id}) {}", benchmark_name(id)?);
                rows.push(row_of(label, mode, &report, Some(reference[m])));
            }
        }
        let headers = TableRow::headers(true);
        let cells: Vec<Vec<String>> = rows.iter().map(|r| r.cells(true)).collect();
        if let Some(path) = self.out_path() {
            write_output(&path, &to_csv(&headers, &cells)?)?;
        }
        let mut text = String::new();
        writeln!(
            text,
            "target PCS form: {form}; R = {replications}, T = {test_points}, seed = {}",
            self.seed
        )
        .unwrap();
        text.push_str(&format_table(&headers, &cells));
        Ok(text)
    }

    pub fn case_study(&self) -> anyhow::Result<String> {
        let mut cfg = self.config.clone();
        if cfg.problem.is_none() {
            cfg.problem = Some(crate::config::ProblemConfig::Markov {
                params: None,
                params_file: None,
            });
        }
        let problem = cfg.problem(&self.base_dir)?;
        let Problem::Markov(cs) = &problem else {
            bail!(covsel::Error::InvalidArgument("case-study needs a Markov problem".into()));
        };
        let proc_ = cfg.procedure();
        let (h, _) = self.solve(&problem, &proc_)?;
        let plan = self.plan(&proc_, h, cfg.replications(), cfg.test_points());
        let oracle = cs.oracle();
        let rules = collect_rules(&plan, &oracle as &dyn SimulationOracle, &cs.design)?;
        let rep = compare_with_constant_rules(cs, &rules, proc_.delta, plan.test_points, self.seed)?;

        let headers = ["Rule", "Regimen", "PCS_E", "se", "E[QALYs]"];
        let cells = vec![
            vec![
                "personalized".into(),
                "x-dependent".into(),
                format!("{:.4}", rep.personalized.value),
                format!("{:.4}", rep.personalized.se),
                format!("{:.3}", rep.personalized_qalys.value),
            ],
            vec![
                "best at mean covariate".into(),
                rep.at_mean.name.clone(),
                format!("{:.4}", rep.at_mean.pcs.value),
                format!("{:.4}", rep.at_mean.pcs.se),
                format!("{:.3}", rep.at_mean.expected_qalys),
            ],
            vec![
                "best on average".into(),
                rep.on_average.name.clone(),
                format!("{:.4}", rep.on_average.pcs.value),
                format!("{:.4}", rep.on_average.pcs.se),
                format!("{:.3}", rep.on_average.expected_qalys),
            ],
        ];
        if let Some(path) = self.out_path() {
            write_output(&path, &to_csv(&headers, &cells)?)?;
        }
        let names: Vec<&str> = cs.model.params().regimens.iter().map(|r| r.name.as_str()).collect();
        let mut text = String::new();
        writeln!(
            text,
            "{} h = {h:.4}, delta = {}, n0 = {}, R = {}, T = {}",
            procedure_name(proc_.mode),
            proc_.delta,
            proc_.n0,
            plan.replications,
            plan.test_points
        )
        .unwrap();
        text.push_str(&format_table(&headers, &cells));
        writeln!(text, "E[max_i Y_i(X)] = {:.3}", rep.oracle_qalys).unwrap();
        writeln!(
            text,
            "E[max_i Y_i(X)] - E[Y_best-on-average(X)] = {:.4} (se {:.4})",
            rep.jensen_gap.value, rep.jensen_gap.se
        )
        .unwrap();
        let dominates = rep.advantage.value >= 0.0;
        writeln!(
            text,
            "personalized minus best constant PCS_E = {:+.4} (se {:.4}): {}",
            rep.advantage.value,
            rep.advantage.se,
            if dominates { "personalized rule is at least as good" } else { "WARNING: constant rule scored higher" }
        )
        .unwrap();
        if rep.near_ties.len() > 1 {
            let tied: Vec<&str> = rep.near_ties.iter().map(|&i| names[i]).collect();
            writeln!(text, "near ties: {} have expected QALYs within delta of each other", tied.join(", ")).unwrap();
        }
        Ok(text)
    }
}

fn records_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}-records.csv"))
}

fn row_of(problem: String, mode: VarianceMode, report: &ExperimentReport, reference: Option<covsel::evaluation::Reference>) -> TableRow {
    TableRow {
        problem,
        procedure: procedure_name(mode).into(),
        h: report.h,
        sample: report.mean_total_samples,
        pcs_e: report.pcs_e.value,
        pcs_min: report.pcs_min.map(|p| p.value),
        reference,
    }
}
