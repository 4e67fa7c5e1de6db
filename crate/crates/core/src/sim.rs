//! Fixed-step run loop and its on-disk outputs.
//!
//! A run writes four files into its output directory:
//!
//! * `timeseries.csv`: one row per agent per emitted record,
//!   `t,i,m,gamma,centroid_err,px,py,rx,ry,phi` with `i` starting at 1;
//! * `globals.csv`: one row per emitted record, `t,V,J,mass_spread,consensus`;
//! * `snapshots.jsonl`: one JSON document per emitted record with the full
//!   state and a closed polyline for every sector;
//! * `meta.json`: configuration echo, total mass, generator, integrator,
//!   wall-clock time, event log and final status.
//!
//! Everything except `meta.json` is a pure function of the configuration.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use crate::config::{ConfigError, SimConfig};
use crate::dynamics::{CostKind, CoverageModel, DynamicsError, Event, LocalObservation};
use crate::field::{total_mass, FieldError};
use crate::metrics::{consensus_reached, coverage_cost, quadratic_sector_cost, MetricsRecord};
use crate::point::Point;
use crate::state::{AgentState, SwarmState, RNG_ALGORITHM};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_DYNAMICS: i32 = 2;

/// Boundary samples per full turn in snapshot polylines.
const POLYLINE_SAMPLES_PER_TURN: usize = 96;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    DynamicsError,
}

/// In-memory result of a run.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub records: Vec<MetricsRecord>,
    /// Consensus flag of each record.
    pub consensus: Vec<bool>,
    pub events: Vec<Event>,
    pub final_state: SwarmState,
    pub total_mass: f64,
    pub steps: usize,
    pub status: RunStatus,
}

impl RunSummary {
    pub fn last_record(&self) -> Option<&MetricsRecord> {
        self.records.last()
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("output error: {0}")]
    Io(#[from] io::Error),
    #[error("dynamics error at t = {time}: {error}")]
    Dynamics {
        error: DynamicsError,
        time: f64,
        summary: Box<RunSummary>,
    },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => EXIT_CONFIG,
            Self::Io(_) => EXIT_CONFIG,
            Self::Dynamics { .. } => EXIT_DYNAMICS,
        }
    }
}

/// What each emitted record exposes to an observer.
pub struct Emission<'a> {
    pub state: &'a SwarmState,
    pub record: &'a MetricsRecord,
    pub consensus: bool,
    pub model: &'a CoverageModel,
}

fn total_cost(
    model: &CoverageModel,
    state: &SwarmState,
    observations: &[LocalObservation],
) -> Result<f64, DynamicsError> {
    match model.cost {
        CostKind::Quadratic => Ok(state
            .agents
            .iter()
            .zip(observations)
            .map(|(a, o)| quadratic_sector_cost(&o.integrals, a.position))
            .sum()),
        CostKind::Generic(_) => coverage_cost(model, state),
    }
}

/// Number of steps and the time of step `k`: `t_k = k·dt`, with a shortened
/// last step landing exactly on `t_final`.
fn schedule(dt: f64, t_final: f64) -> (usize, impl Fn(usize) -> f64) {
    let steps = if t_final > 0.0 {
        ((t_final / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize
    } else {
        0
    };
    (
        steps,
        move |k: usize| {
            if k >= steps {
                t_final
            } else {
                k as f64 * dt
            }
        },
    )
}

/// Steps the configured model from its initial state, calling `on_emit` for
/// every emitted record. `model` overrides the one built from `config`.
pub fn simulate_with(
    config: &SimConfig,
    model: &CoverageModel,
    initial: SwarmState,
    mut on_emit: impl FnMut(Emission<'_>) -> io::Result<()>,
) -> Result<RunSummary, RunError> {
    let (steps, time_of) = schedule(config.integrator.dt, config.integrator.t_final);
    let total_mass = total_mass(
        &model.boundary,
        &model.density,
        Point::ORIGIN,
        &model.quadrature,
    )
    .unwrap_or(f64::NAN);
    let mut summary = RunSummary {
        records: Vec::new(),
        consensus: Vec::new(),
        events: Vec::new(),
        final_state: initial.clone(),
        total_mass,
        steps: 0,
        status: RunStatus::Completed,
    };
    let mut state = initial;
    state.time = 0.0;

    let fail = |mut summary: RunSummary, state: SwarmState, error: DynamicsError, time: f64| {
        if let DynamicsError::ReferenceEscaped { index, reference } = error {
            summary.events.push(Event::ReferenceEscaped {
                agent: index,
                time,
                reference,
            });
        }
        summary.final_state = state;
        summary.status = RunStatus::DynamicsError;
        RunError::Dynamics {
            error,
            time,
            summary: Box::new(summary),
        }
    };

    for k in 0..=steps {
        let t = state.time;
        let evaluation = match model.evaluate(&state) {
            Ok(e) => e,
            Err(e) => return Err(fail(summary, state, e, t)),
        };
        if k % config.emit_every == 0 || k == steps {
            let cost = match total_cost(model, &state, &evaluation.observations) {
                Ok(c) => c,
                Err(e) => return Err(fail(summary, state, e, t)),
            };
            let record = MetricsRecord::new(&state, &evaluation.observations, cost);
            let consensus = consensus_reached(&record, &config.consensus);
            on_emit(Emission {
                state: &state,
                record: &record,
                consensus,
                model,
            })?;
            summary.records.push(record);
            summary.consensus.push(consensus);
        }
        if k == steps {
            break;
        }
        let t_next = time_of(k + 1);
        let outcome = match model.advance(
            &state,
            &evaluation.rates,
            t_next - t,
            config.integrator.kind,
        ) {
            Ok(o) => o,
            Err(e) => return Err(fail(summary, state, e, t_next)),
        };
        summary.events.extend(outcome.events);
        state = outcome.state;
        state.time = t_next;
        summary.steps = k + 1;
    }
    summary.final_state = state;
    Ok(summary)
}

/// [`simulate_with`] on the model and initial state described by `config`.
pub fn simulate(
    config: &SimConfig,
    on_emit: impl FnMut(Emission<'_>) -> io::Result<()>,
) -> Result<RunSummary, RunError> {
    config.validate()?;
    let model = config.model()?;
    let initial = config.initial_state()?;
    simulate_with(config, &model, initial, on_emit)
}

/// Closed outline of sector `i`: reference, boundary arc, reference.
pub fn sector_polyline(
    model: &CoverageModel,
    state: &SwarmState,
    i: usize,
) -> Result<Vec<Point>, DynamicsError> {
    let sector = state.sector(i);
    let width = sector.width();
    let samples =
        ((width / std::f64::consts::TAU) * POLYLINE_SAMPLES_PER_TURN as f64).ceil() as usize + 1;
    let samples = samples.max(2);
    let mut line = Vec::with_capacity(samples + 2);
    line.push(sector.reference);
    for s in 0..samples {
        let angle = sector.phase_start + width * s as f64 / (samples - 1) as f64;
        let q = model
            .boundary
            .ray_boundary_point(sector.reference, angle)
            .map_err(|e| DynamicsError::Agent {
                index: i,
                source: FieldError::Geometry(e),
            })?;
        line.push(q);
    }
    line.push(sector.reference);
    Ok(line)
}

#[derive(Serialize)]
struct SnapshotAgent<'a> {
    i: usize,
    #[serde(flatten)]
    agent: &'a AgentState,
    sector: Vec<Point>,
}

#[derive(Serialize)]
struct Snapshot<'a> {
    t: f64,
    agents: Vec<SnapshotAgent<'a>>,
}

struct Writers {
    timeseries: BufWriter<File>,
    globals: BufWriter<File>,
    snapshots: BufWriter<File>,
}

impl Writers {
    fn create(out_dir: &Path) -> io::Result<Self> {
        std::fs::create_dir_all(out_dir)?;
        let open = |name: &str| File::create(out_dir.join(name)).map(BufWriter::new);
        let mut w = Self {
            timeseries: open("timeseries.csv")?,
            globals: open("globals.csv")?,
            snapshots: open("snapshots.jsonl")?,
        };
        writeln!(w.timeseries, "t,i,m,gamma,centroid_err,px,py,rx,ry,phi")?;
        writeln!(w.globals, "t,V,J,mass_spread,consensus")?;
        Ok(w)
    }

    fn emit(&mut self, e: Emission<'_>) -> io::Result<()> {
        let r = e.record;
        for (i, a) in e.state.agents.iter().enumerate() {
            writeln!(
                self.timeseries,
                "{},{},{},{},{},{},{},{},{},{}",
                r.time,
                i + 1,
                r.masses[i],
                r.gammas[i],
                r.centroid_errors[i],
                a.position.x,
                a.position.y,
                a.reference.x,
                a.reference.y,
                a.phase
            )?;
        }
        writeln!(
            self.globals,
            "{},{},{},{},{}",
            r.time, r.lyapunov, r.cost, r.mass_spread, e.consensus
        )?;
        let agents = e
            .state
            .agents
            .iter()
            .enumerate()
            .map(|(i, agent)| {
                let sector = sector_polyline(e.model, e.state, i)
                    .map_err(|err| io::Error::other(err.to_string()))?;
                Ok(SnapshotAgent {
                    i: i + 1,
                    agent,
                    sector,
                })
            })
            .collect::<io::Result<Vec<_>>>()?;
        serde_json::to_writer(&mut self.snapshots, &Snapshot { t: r.time, agents })?;
        writeln!(self.snapshots)?;
        Ok(())
    }

    fn finish(mut self) -> io::Result<()> {
        self.timeseries.flush()?;
        self.globals.flush()?;
        self.snapshots.flush()
    }
}

fn write_meta(
    out_dir: &Path,
    config: &SimConfig,
    summary: &RunSummary,
    wall_clock: f64,
    error: Option<String>,
) -> io::Result<()> {
    let meta = json!({
        "config": config,
        "total_mass": summary.total_mass,
        "rng": RNG_ALGORITHM,
        "integrator": {
            "kind": config.integrator.kind,
            "dt": config.integrator.dt,
            "t_final": config.integrator.t_final,
        },
        "steps": summary.steps,
        "records": summary.records.len(),
        "final_time": summary.final_state.time,
        "final_consensus": summary.consensus.last().copied().unwrap_or(false),
        "wall_clock_seconds": wall_clock,
        "events": summary.events,
        "status": summary.status,
        "error": error,
    });
    let mut f = BufWriter::new(File::create(out_dir.join("meta.json"))?);
    serde_json::to_writer_pretty(&mut f, &meta)?;
    writeln!(f)?;
    f.flush()
}

/// Runs `config` and writes every output file into `out_dir`.
pub fn run(config: &SimConfig, out_dir: &Path) -> Result<RunSummary, RunError> {
    config.validate()?;
    let model = config.model()?;
    let initial = config.initial_state()?;
    let mut writers = Writers::create(out_dir)?;
    let started = Instant::now();
    let result = simulate_with(config, &model, initial, |e| writers.emit(e));
    let wall_clock = started.elapsed().as_secs_f64();
    writers.finish()?;
    match &result {
        Ok(summary) => write_meta(out_dir, config, summary, wall_clock, None)?,
        Err(RunError::Dynamics { summary, error, .. }) => write_meta(
            out_dir,
            config,
            summary,
            wall_clock,
            Some(error.to_string()),
        )?,
        Err(_) => {}
    }
    result
}
