//! Running simulated sessions and writing learning curves.

use std::io::Write;
use std::ops::Range;
use std::path::Path;
use std::time::Instant;

use activeclust_core::engine::{CurvePoint, EngineConfig, OracleSource, Session};
use serde::{Deserialize, Serialize};

use crate::config::PreparedData;
use crate::error::{Error, Result};

/// Milliseconds since the clock was created, offset by `base`.
pub fn wall_clock(base: u64) -> impl FnMut() -> u64 {
    let start = Instant::now();
    move || base + start.elapsed().as_millis() as u64
}

/// Advances a simulated session to completion. Wall time continues from the
/// last recorded curve point, so resumed sessions keep a monotone clock.
pub fn run_session(session: &mut Session) -> Result<()> {
    if session.config().oracle == OracleSource::Interactive {
        return Err(Error::Config("run needs a simulated oracle".into()));
    }
    let base = session.curve().last().map_or(0, |p| p.wall_ms);
    session.advance(&mut wall_clock(base))?;
    Ok(())
}

pub fn run(data: &PreparedData, engine: &EngineConfig) -> Result<Session> {
    let mut session = data.session(engine)?;
    run_session(&mut session)?;
    Ok(session)
}

fn fmt_metric(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x}"))
}

pub fn write_curve_csv(mut out: impl Write, curve: &[CurvePoint]) -> std::io::Result<()> {
    writeln!(out, "queries,jcc,vmeasure,n_c,wall_ms")?;
    for p in curve {
        writeln!(out, "{},{},{},{},{}", p.queries_used, fmt_metric(p.jcc), fmt_metric(p.v_measure), p.n_c, p.wall_ms)?;
    }
    Ok(())
}

pub fn save_curve_csv(path: &Path, curve: &[CurvePoint]) -> Result<()> {
    let mut buf = Vec::new();
    write_curve_csv(&mut buf, curve).expect("writing to a Vec");
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Outcome of one seed in a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub seed: u64,
    pub curve: Vec<CurvePoint>,
    pub final_n_c: usize,
    pub queries_used: usize,
}

impl SeedRun {
    pub fn final_point(&self) -> Option<&CurvePoint> {
        self.curve.last()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub runs: Vec<SeedRun>,
    pub mean_jcc: Option<f64>,
    pub mean_v_measure: Option<f64>,
    pub mean_queries: f64,
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Option<Vec<f64>> = values.collect();
    v.filter(|v| !v.is_empty()).map(|v| v.iter().sum::<f64>() / v.len() as f64)
}

/// Runs one session per seed on worker threads. Results are in seed order
/// and do not depend on the thread count.
pub fn sweep(data: &PreparedData, engine: &EngineConfig, seeds: Range<u64>, threads: usize) -> Result<SweepSummary> {
    let seeds: Vec<u64> = seeds.collect();
    let threads = threads.clamp(1, seeds.len().max(1));
    let mut slots: Vec<Option<Result<SeedRun>>> = (0..seeds.len()).map(|_| None).collect();
    std::thread::scope(|scope| {
        for (chunk_seeds, chunk_slots) in seeds
            .chunks(seeds.len().div_ceil(threads).max(1))
            .zip(slots.chunks_mut(seeds.len().div_ceil(threads).max(1)))
        {
            scope.spawn(move || {
                for (&seed, slot) in chunk_seeds.iter().zip(chunk_slots) {
                    let cfg = EngineConfig { seed, ..engine.clone() };
                    *slot = Some(run(data, &cfg).map(|s| SeedRun {
                        seed,
                        curve: s.curve().to_vec(),
                        final_n_c: s.n_c(),
                        queries_used: s.queries_used(),
                    }));
                }
            });
        }
    });
    let runs = slots.into_iter().map(|s| s.expect("every seed ran")).collect::<Result<Vec<_>>>()?;
    Ok(SweepSummary {
        mean_jcc: mean(runs.iter().map(|r| r.final_point().and_then(|p| p.jcc))),
        mean_v_measure: mean(runs.iter().map(|r| r.final_point().and_then(|p| p.v_measure))),
        mean_queries: runs.iter().map(|r| r.queries_used as f64).sum::<f64>() / runs.len().max(1) as f64,
        runs,
    })
}

pub fn default_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::gaussian_blobs;
    use activeclust_core::engine::{ClusterCount, Strategy};
    use activeclust_core::similarity::gaussian_similarity;

    fn data() -> PreparedData {
        let ds = gaussian_blobs(3, 8, 2, 6.0, 1.0, 1);
        let w = gaussian_similarity(&ds, 2.0).unwrap();
        PreparedData::from_dataset(&ds, w)
    }

    #[test]
    fn csv_layout() {
        let curve = [CurvePoint { queries_used: 3, iteration: 1, jcc: Some(0.5), v_measure: None, n_c: 2, wall_ms: 7 }];
        let mut out = Vec::new();
        write_curve_csv(&mut out, &curve).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "queries,jcc,vmeasure,n_c,wall_ms\n3,0.5,,2,7\n");
    }

    #[test]
    fn sweep_is_independent_of_threads() {
        let d = data();
        let cfg = EngineConfig::new(Strategy::UrascN, ClusterCount::Known(3), 15, 0);
        let a = sweep(&d, &cfg, 0..4, 1).unwrap();
        let b = sweep(&d, &cfg, 0..4, 3).unwrap();
        assert_eq!(a.runs.len(), 4);
        for (x, y) in a.runs.iter().zip(&b.runs) {
            assert_eq!(x.seed, y.seed);
            assert!(x.curve.iter().zip(&y.curve).all(|(p, q)| p.same_result(q)));
        }
        assert_eq!(a.mean_jcc, b.mean_jcc);
    }

    #[test]
    fn interactive_config_rejected() {
        let d = data();
        let mut cfg = EngineConfig::new(Strategy::UrascN, ClusterCount::Known(3), 15, 0);
        cfg.oracle = OracleSource::Interactive;
        assert!(matches!(run(&d, &cfg), Err(Error::Config(_))));
    }
}
