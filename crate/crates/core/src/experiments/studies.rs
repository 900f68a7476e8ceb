use rayon::prelude::*;
use serde::Serialize;

use super::config::{format_vec, ExperimentConfig, InitialControl, V0Choice};
use crate::dynamics::{ControlSignal, Prism, TimeGrid, Vec3};
use crate::error::{Error, Result};
use crate::objective::CostValue;
use crate::optimize::{
    gpm_optimize, ipmp_optimize, ControlProblem, Method, OptimizerReport, Status,
};

/// A finished optimizer run together with the configuration that produced it.
#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub config: ExperimentConfig,
    pub report: OptimizerReport,
}

fn optimize_with(problem: &ControlProblem, u0: &ControlSignal, cfg: &ExperimentConfig) -> Result<OptimizerReport> {
    match cfg.optimizer {
        Method::Gpm => gpm_optimize(problem, u0, &cfg.gpm),
        Method::Ipmp => ipmp_optimize(problem, u0, &cfg.ipmp),
    }
}

/// Runs the configured optimizer as is, ignoring `filter.match_v0`.
fn run_plain(cfg: &ExperimentConfig) -> Result<RunRecord> {
    let problem = cfg.problem()?;
    let u0 = cfg.initial_control(&problem.grid)?;
    let report = optimize_with(&problem, &u0, cfg)?;
    Ok(RunRecord {
        config: cfg.clone(),
        report,
    })
}

/// Value of a control at `t = 0`.
fn initial_value(report: &OptimizerReport) -> Vec3 {
    report.final_control.values[0]
}

/// Runs the configured optimizer.
///
/// With `filter.match_v0` the no-filter problem is optimized first and its
/// optimal control at `t = 0` becomes the filter's initial field; the returned
/// configuration records the value used.
pub fn run_optimization(cfg: &ExperimentConfig) -> Result<RunRecord> {
    if cfg.filter.enabled && cfg.filter.match_v0 {
        let baseline = run_plain(&cfg.with_gamma(None))?;
        let mut matched = cfg.clone();
        matched.filter.v0 = initial_value(&baseline.report);
        run_plain(&matched)
    } else {
        run_plain(cfg)
    }
}

/// One point of a 27-point initializer grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridInitializer {
    pub index: [usize; 3],
    pub value: Vec3,
}

/// Constant controls at `vertex + spacing · (1−i, 1−j, 1−k)` for
/// `i, j, k ∈ {0, 1, 2}`, clipped to the prism, with `k` varying fastest.
pub fn grid_initializers(vertex: Vec3, spacing: f64, prism: &Prism) -> Vec<GridInitializer> {
    let mut out = Vec::with_capacity(27);
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                let index = [i, j, k];
                let value = std::array::from_fn(|c| vertex[c] + spacing * (1.0 - index[c] as f64));
                out.push(GridInitializer {
                    index,
                    value: prism.clamp(value),
                });
            }
        }
    }
    out
}

pub fn grid_controls(vertex: Vec3, spacing: f64, prism: &Prism, grid: TimeGrid) -> Vec<ControlSignal> {
    grid_initializers(vertex, spacing, prism)
        .into_iter()
        .map(|g| ControlSignal::constant(grid, g.value))
        .collect()
}

/// One row of a γ sweep; `gamma = None` is the no-filter baseline.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub gamma: Option<f64>,
    pub v0: Option<Vec3>,
    pub cost: f64,
    pub status: Status,
    pub iterations: usize,
}

impl SweepRow {
    fn from_run(run: &RunRecord) -> Self {
        let filter = &run.config.filter;
        Self {
            gamma: filter.enabled.then_some(filter.gamma),
            v0: filter.enabled.then_some(filter.v0),
            cost: run.report.final_cost.value(),
            status: run.report.status,
            iterations: run.report.iterations,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GammaSweep {
    /// One row per γ, then the no-filter baseline.
    pub rows: Vec<SweepRow>,
    #[serde(skip)]
    pub runs: Vec<RunRecord>,
}

impl GammaSweep {
    pub fn baseline(&self) -> &SweepRow {
        self.rows.last().expect("sweep always has a baseline row")
    }
}

/// Optimizes the base configuration once per γ and once without a filter.
/// Runs that hit their iteration cap are kept and flagged by their status.
pub fn gamma_sweep(base: &ExperimentConfig, gammas: &[f64]) -> Result<GammaSweep> {
    let baseline = run_plain(&base.with_gamma(None))?;
    let v0 = if base.filter.match_v0 {
        initial_value(&baseline.report)
    } else {
        base.filter.v0
    };
    let mut runs: Vec<RunRecord> = gammas
        .par_iter()
        .map(|&g| {
            let mut cfg = base.with_gamma(Some(g));
            cfg.filter.v0 = v0;
            run_plain(&cfg)
        })
        .collect::<Result<_>>()?;
    runs.push(baseline);
    let rows = runs.iter().map(SweepRow::from_run).collect();
    Ok(GammaSweep { rows, runs })
}

/// `100 · (J_nofilter − J_filtered) / J_nofilter`.
pub fn yield_loss_percent(j_filtered: f64, j_nofilter: f64) -> f64 {
    100.0 * (j_nofilter - j_filtered) / j_nofilter
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct YieldLossRow {
    pub p: usize,
    pub u0_label: String,
    pub v0_label: String,
    pub v0: Vec3,
    pub gamma: f64,
    pub j_filtered: f64,
    pub j_nofilter: f64,
    pub loss_percent: f64,
    pub status: Status,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct YieldLossSummary {
    pub p: usize,
    pub u0_label: String,
    pub min_loss_percent: f64,
    pub max_loss_percent: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct YieldLossTable {
    pub rows: Vec<YieldLossRow>,
    pub summary: Vec<YieldLossSummary>,
    #[serde(skip)]
    pub runs: Vec<RunRecord>,
}

/// Yield loss of the filtered optimum against the no-filter optimum for
/// every proton count up to `yield_loss.p_max`, every initial control in
/// `yield_loss.u0s`, every initial field in `yield_loss.v0s` and every γ in
/// `sweep.gammas`.
pub fn yield_loss_table(base: &ExperimentConfig) -> Result<YieldLossTable> {
    let settings = &base.yield_loss;
    if let Some(u) = settings.u0s.iter().find(|u| !base.prism.contains(u)) {
        return Err(Error::InvalidConfig {
            key: "yield_loss.u0s".into(),
            reason: format!("{} lies outside the prism", format_vec(u)),
        });
    }
    let mut cells = Vec::new();
    for p in 1..=settings.p_max {
        let at_p = base.with_protons(p)?;
        for u0 in &settings.u0s {
            let mut cfg = at_p.clone();
            cfg.u0 = InitialControl::Constant(*u0);
            cfg.filter.match_v0 = false;
            cells.push(cfg);
        }
    }
    let baselines: Vec<RunRecord> = cells
        .par_iter()
        .map(|cfg| run_plain(&cfg.with_gamma(None)))
        .collect::<Result<_>>()?;

    let mut jobs = Vec::new();
    for (cell, baseline) in baselines.iter().enumerate() {
        for v0 in &settings.v0s {
            let value = match v0 {
                V0Choice::Fixed(v) => *v,
                V0Choice::Keyword(_) => initial_value(&baseline.report),
            };
            for &gamma in &base.sweep.gammas {
                let mut cfg = cells[cell].with_gamma(Some(gamma));
                cfg.filter.v0 = value;
                jobs.push((cell, v0.label(), cfg));
            }
        }
    }
    let filtered: Vec<RunRecord> = jobs
        .par_iter()
        .map(|(_, _, cfg)| run_plain(cfg))
        .collect::<Result<_>>()?;

    let u0_label = |cfg: &ExperimentConfig| match &cfg.u0 {
        InitialControl::Constant(v) => format_vec(v),
        _ => unreachable!("yield-loss cells use constant initial controls"),
    };
    let rows: Vec<YieldLossRow> = jobs
        .iter()
        .zip(&filtered)
        .map(|((cell, v0_label, cfg), run)| {
            let j_nofilter = baselines[*cell].report.final_cost.value();
            let j_filtered = run.report.final_cost.value();
            YieldLossRow {
                p: cfg.p,
                u0_label: u0_label(cfg),
                v0_label: v0_label.clone(),
                v0: cfg.filter.v0,
                gamma: cfg.filter.gamma,
                j_filtered,
                j_nofilter,
                loss_percent: yield_loss_percent(j_filtered, j_nofilter),
                status: run.report.status,
            }
        })
        .collect();
    let summary = cells
        .iter()
        .enumerate()
        .map(|(cell, cfg)| {
            let losses = jobs
                .iter()
                .zip(&rows)
                .filter(|((c, _, _), _)| *c == cell)
                .map(|(_, r)| r.loss_percent);
            let (min, max) = losses.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
            YieldLossSummary {
                p: cfg.p,
                u0_label: u0_label(cfg),
                min_loss_percent: min,
                max_loss_percent: max,
            }
        })
        .collect();
    let mut runs = baselines;
    runs.extend(filtered);
    Ok(YieldLossTable { rows, summary, runs })
}

/// Relative discrepancies between two controls and their costs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Discrepancy {
    /// `‖u₁ − u₂‖ / ‖u₁‖`, or the absolute distance when `‖u₁‖ = 0`.
    pub rel_ctrl: f64,
    /// `|J₁ − J₂| / |J₁|`, or the absolute gap when `J₁ = 0`.
    pub rel_cost: f64,
    pub ctrl_absolute: bool,
    pub cost_absolute: bool,
}

pub fn compare_controls(
    u1: &ControlSignal,
    u2: &ControlSignal,
    j1: CostValue,
    j2: CostValue,
) -> Result<Discrepancy> {
    if u1.grid != u2.grid {
        return Err(Error::GridMismatch("controls live on different grids".into()));
    }
    let norm = u1.l2_norm();
    let dist = u1.distance(u2);
    let gap = (j1.value() - j2.value()).abs();
    Ok(Discrepancy {
        rel_ctrl: if norm > 0.0 { dist / norm } else { dist },
        rel_cost: if j1.value() != 0.0 { gap / j1.value().abs() } else { gap },
        ctrl_absolute: norm == 0.0,
        cost_absolute: j1.value() == 0.0,
    })
}

/// Classification of a grid study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Outcome {
    /// Every run converged to the same control.
    Unique,
    /// Runs converged to more than one control.
    Multiple,
    /// At least one run ended in a cycle.
    Oscillating,
}

#[derive(Debug, Clone, Serialize)]
pub struct GridRun {
    pub family: usize,
    pub vertex: Vec3,
    pub index: [usize; 3],
    pub u0: Vec3,
    pub status: Status,
    pub iterations: usize,
    pub cost: f64,
    pub cycle_period: Option<usize>,
    /// Relative cost spread among the members of the detected cycle.
    pub cycle_gap: Option<f64>,
    /// Index into [`UniquenessReport::controls`].
    pub control_class: usize,
    #[serde(skip)]
    pub report: OptimizerReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct FamilySummary {
    pub vertex: Vec3,
    pub distinct_controls: usize,
    /// Run started from the grid vertex itself.
    pub representative: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct UniquenessReport {
    pub outcome: Outcome,
    pub runs: Vec<GridRun>,
    /// Distinct final controls, in order of first appearance.
    #[serde(skip)]
    pub controls: Vec<ControlSignal>,
    pub distinct_controls: usize,
    pub max_pairwise_ctrl: f64,
    pub max_pairwise_cost: f64,
    pub max_cycle_gap: Option<f64>,
    pub families: Vec<FamilySummary>,
    /// Discrepancy between the representatives of the first two families.
    pub cross_family: Option<Discrepancy>,
}

fn cycle_gap(report: &OptimizerReport) -> Option<f64> {
    let members = report.cycle_members.as_ref()?;
    let costs = members.iter().map(|m| m.cost);
    let (lo, hi) = costs.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| (lo.min(c), hi.max(c)));
    Some(if hi != 0.0 { (hi - lo) / hi.abs() } else { hi - lo })
}

/// Runs IPMP from every grid initializer around each vertex of
/// `grid_study.vertices`, with the filter, prism and settings of `base`.
pub fn uniqueness_study(base: &ExperimentConfig) -> Result<UniquenessReport> {
    let problem = base.problem()?;
    let spacing = base.grid_study.spacing;
    let starts: Vec<(usize, Vec3, GridInitializer)> = base
        .grid_study
        .vertices
        .iter()
        .enumerate()
        .flat_map(|(f, v)| {
            grid_initializers(*v, spacing, &base.prism)
                .into_iter()
                .map(move |g| (f, *v, g))
        })
        .collect();
    let reports: Vec<OptimizerReport> = starts
        .par_iter()
        .map(|(_, _, g)| {
            ipmp_optimize(&problem, &ControlSignal::constant(problem.grid, g.value), &base.ipmp)
        })
        .collect::<Result<_>>()?;

    let mut controls: Vec<ControlSignal> = Vec::new();
    let mut runs = Vec::with_capacity(reports.len());
    for ((family, vertex, g), report) in starts.into_iter().zip(reports) {
        let class = match controls.iter().position(|c| *c == report.final_control) {
            Some(c) => c,
            None => {
                controls.push(report.final_control.clone());
                controls.len() - 1
            }
        };
        runs.push(GridRun {
            family,
            vertex,
            index: g.index,
            u0: g.value,
            status: report.status,
            iterations: report.iterations,
            cost: report.final_cost.value(),
            cycle_period: report.cycle_members.as_ref().map(Vec::len),
            cycle_gap: cycle_gap(&report),
            control_class: class,
            report,
        });
    }

    let mut max_pairwise_ctrl: f64 = 0.0;
    let mut max_pairwise_cost: f64 = 0.0;
    for (a, ra) in runs.iter().enumerate() {
        for rb in &runs[a + 1..] {
            let d = compare_controls(
                &ra.report.final_control,
                &rb.report.final_control,
                ra.report.final_cost,
                rb.report.final_cost,
            )?;
            max_pairwise_ctrl = max_pairwise_ctrl.max(d.rel_ctrl);
            max_pairwise_cost = max_pairwise_cost.max(d.rel_cost);
        }
    }

    let families: Vec<FamilySummary> = base
        .grid_study
        .vertices
        .iter()
        .enumerate()
        .map(|(f, v)| {
            let mut classes: Vec<usize> = runs
                .iter()
                .filter(|r| r.family == f)
                .map(|r| r.control_class)
                .collect();
            classes.sort_unstable();
            classes.dedup();
            let representative = runs
                .iter()
                .position(|r| r.family == f && r.index == [1, 1, 1])
                .expect("every family has a center point");
            FamilySummary {
                vertex: *v,
                distinct_controls: classes.len(),
                representative,
            }
        })
        .collect();
    let cross_family = match families.as_slice() {
        [a, b, ..] => {
            let (ra, rb) = (&runs[a.representative].report, &runs[b.representative].report);
            Some(compare_controls(&ra.final_control, &rb.final_control, ra.final_cost, rb.final_cost)?)
        }
        _ => None,
    };
    let max_cycle_gap = runs
        .iter()
        .filter_map(|r| r.cycle_gap)
        .reduce(f64::max);
    let outcome = if runs.iter().any(|r| r.status == Status::Oscillating) {
        Outcome::Oscillating
    } else if controls.len() == 1 {
        Outcome::Unique
    } else {
        Outcome::Multiple
    };
    Ok(UniquenessReport {
        outcome,
        distinct_controls: controls.len(),
        controls,
        runs,
        max_pairwise_ctrl,
        max_pairwise_cost,
        max_cycle_gap,
        families,
        cross_family,
    })
}
