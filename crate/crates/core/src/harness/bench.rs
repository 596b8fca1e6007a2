//! Solve-time benchmark over repeated closed-loop runs.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::constraints::ConstraintStrategy;
use crate::error::{Error, Result};
use crate::sim::{run_scenario_with, OcpSolver, Scenario, SqpSolver};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyBench {
    pub strategy: String,
    /// False when every repetition failed to produce a timed solve.
    pub available: bool,
    pub inequality_count: usize,
    pub repetitions: usize,
    /// Timed solver calls.
    pub samples: usize,
    pub mean_ms: Option<f64>,
    pub median_ms: Option<f64>,
    pub p95_ms: Option<f64>,
    pub mean_iterations: Option<f64>,
    /// Run status of each repetition.
    pub statuses: Vec<String>,
    /// `(baseline − this)/baseline` on mean solve time.
    pub reduction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub baseline: String,
    pub horizon: usize,
    pub steps: usize,
    pub repetitions: usize,
    pub strategies: Vec<StrategyBench>,
}

pub const BENCH_HEADER: [&str; 10] = [
    "strategy",
    "available",
    "inequality_count",
    "samples",
    "mean_ms",
    "median_ms",
    "p95_ms",
    "mean_iterations",
    "reduction",
    "statuses",
];

/// Nearest-rank percentile of sorted data.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let rank = ((p * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

/// Benchmarks each strategy on `s`; the first strategy is the baseline.
///
/// Only the solver calls are timed. Runs are sequential on the calling
/// thread.
pub fn bench_with(
    s: &Scenario,
    strategies: &[ConstraintStrategy],
    repetitions: usize,
    make_solver: &dyn Fn(&Scenario) -> Box<dyn OcpSolver>,
) -> Result<BenchReport> {
    if repetitions < 3 {
        return Err(Error::Config(format!(
            "benchmarks need at least 3 repetitions, got {repetitions}"
        )));
    }
    if strategies.is_empty() {
        return Err(Error::Config(
            "benchmark needs at least one strategy".into(),
        ));
    }
    let mut rows = Vec::with_capacity(strategies.len());
    for &strategy in strategies {
        let scenario = s.clone().with_strategy(strategy);
        scenario.validate()?;
        let mut times = Vec::new();
        let mut iterations = Vec::new();
        let mut statuses = Vec::with_capacity(repetitions);
        for _ in 0..repetitions {
            let mut solver = make_solver(&scenario);
            match run_scenario_with(&scenario, solver.as_mut()) {
                Ok((log, outcome)) => {
                    times.extend(log.records.iter().map(|r| r.solve_time.as_secs_f64() * 1e3));
                    iterations.extend(log.records.iter().map(|r| r.iterations as f64));
                    statuses.push(outcome.status.to_string());
                }
                Err(e) => statuses.push(format!("error: {e}")),
            }
        }
        let available = !times.is_empty();
        let mut sorted = times.clone();
        sorted.sort_by(f64::total_cmp);
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        rows.push(StrategyBench {
            strategy: strategy.to_string(),
            available,
            inequality_count: strategy.inequality_count(s.horizon),
            repetitions,
            samples: times.len(),
            mean_ms: available.then(|| mean(&times)),
            median_ms: available.then(|| percentile(&sorted, 0.5)),
            p95_ms: available.then(|| percentile(&sorted, 0.95)),
            mean_iterations: available.then(|| mean(&iterations)),
            statuses,
            reduction: None,
        });
    }
    let base = rows[0].mean_ms;
    for row in &mut rows {
        row.reduction = match (base, row.mean_ms) {
            (Some(b), Some(c)) if b > 0.0 => Some((b - c) / b),
            _ => None,
        };
    }
    Ok(BenchReport {
        baseline: strategies[0].to_string(),
        horizon: s.horizon,
        steps: s.steps,
        repetitions,
        strategies: rows,
    })
}

pub fn bench(
    s: &Scenario,
    strategies: &[ConstraintStrategy],
    repetitions: usize,
) -> Result<BenchReport> {
    bench_with(s, strategies, repetitions, &|sc: &Scenario| {
        Box::new(SqpSolver::new(sc.solver))
    })
}

impl BenchReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(BENCH_HEADER)?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.strategies {
            w.write_record([
                r.strategy.clone(),
                r.available.to_string(),
                r.inequality_count.to_string(),
                r.samples.to_string(),
                opt(r.mean_ms),
                opt(r.median_ms),
                opt(r.p95_ms),
                opt(r.mean_iterations),
                opt(r.reduction),
                r.statuses.join(";"),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn get(&self, strategy: &str) -> Option<&StrategyBench> {
        self.strategies.iter().find(|r| r.strategy == strategy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentile_nearest_rank() {
        let v: Vec<f64> = (1..=20).map(f64::from).collect();
        assert_eq!(percentile(&v, 0.5), 10.0);
        assert_eq!(percentile(&v, 0.95), 19.0);
        assert_eq!(percentile(&[3.0], 0.95), 3.0);
    }

    #[test]
    fn repetition_floor() {
        let s = Scenario::braking_default();
        assert!(bench(&s, &[s.strategy], 2).is_err());
    }

    #[test]
    fn sample_count_and_self_reduction() {
        let mut s = Scenario::braking_default();
        s.steps = 10;
        let r = bench(&s, &[s.strategy, s.strategy], 3).unwrap();
        assert_eq!(r.strategies[0].samples, 30);
        assert_eq!(r.strategies[0].reduction, Some(0.0));
        assert!(r.strategies[1].reduction.is_some());
    }
}
