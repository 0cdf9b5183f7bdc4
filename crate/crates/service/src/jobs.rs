//! Analysis jobs: FIFO admission to a bounded worker pool, serialized state
//! transitions, artifacts on disk.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use terrablock_core::fusion::FusedCellTable;
use terrablock_core::pipeline::{fuse, FuseInputs, YieldSource};
use terrablock_core::raster::write_ascii_grid;
use terrablock_core::report::{emit_block_geojson, emit_report_json, run_analysis, AnalysisConfig};
use terrablock_core::soil::AttributeSchema;
use tokio::sync::Semaphore;

use crate::store::{load_job_sidecars, write_atomic, DatasetStore, Layout};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Pending,
    Running,
    Done,
    Failed,
}

impl JobState {
    fn can_become(self, next: JobState) -> bool {
        matches!(
            (self, next),
            (JobState::Pending, JobState::Running) | (JobState::Running, JobState::Done) | (JobState::Running, JobState::Failed)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobInputs {
    pub dem: String,
    pub soil: String,
    pub boundary: String,
    pub yields: Vec<String>,
}

/// Paths of a finished job's artifacts, relative to the data directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobResults {
    pub report: String,
    pub blocks: String,
    pub fused_table: String,
    /// Grid ids for elevation, slope, aspect and each season's yield.
    pub grids: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisJob {
    pub id: String,
    pub state: JobState,
    pub config: AnalysisConfig,
    pub schema: AttributeSchema,
    pub inputs: JobInputs,
    pub results: Option<JobResults>,
    pub error: Option<String>,
}

#[derive(Debug)]
pub struct JobManager {
    layout: Arc<Layout>,
    datasets: Arc<DatasetStore>,
    jobs: Mutex<HashMap<String, AnalysisJob>>,
    workers: Arc<Semaphore>,
}

impl JobManager {
    /// Jobs left pending or running by an earlier process are marked failed.
    /// With zero workers jobs are accepted but never start.
    pub fn open(layout: Arc<Layout>, datasets: Arc<DatasetStore>, workers: usize) -> std::io::Result<Self> {
        let mut jobs = HashMap::new();
        for mut job in load_job_sidecars::<AnalysisJob>(&layout)? {
            if matches!(job.state, JobState::Pending | JobState::Running) {
                job.state = JobState::Failed;
                job.error = Some("interrupted by a service restart".into());
                persist(&layout, &job)?;
            }
            jobs.insert(job.id.clone(), job);
        }
        Ok(Self {
            layout,
            datasets,
            jobs: Mutex::new(jobs),
            workers: Arc::new(Semaphore::new(workers)),
        })
    }

    pub fn get(&self, id: &str) -> Option<AnalysisJob> {
        self.jobs.lock().expect("job table").get(id).cloned()
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    /// Registers a pending job and queues it.
    pub fn submit(self: &Arc<Self>, config: AnalysisConfig, schema: AttributeSchema, inputs: JobInputs) -> std::io::Result<AnalysisJob> {
        let job = AnalysisJob {
            id: uuid::Uuid::new_v4().simple().to_string(),
            state: JobState::Pending,
            config,
            schema,
            inputs,
            results: None,
            error: None,
        };
        persist(&self.layout, &job)?;
        self.jobs.lock().expect("job table").insert(job.id.clone(), job.clone());
        let manager = Arc::clone(self);
        let id = job.id.clone();
        tokio::spawn(async move {
            // tokio's semaphore grants permits in request order
            let Ok(_permit) = manager.workers.clone().acquire_owned().await else {
                return;
            };
            if manager.transition(&id, JobState::Running, |_| {}).is_err() {
                return;
            }
            let worker = Arc::clone(&manager);
            let job_id = id.clone();
            let outcome = tokio::task::spawn_blocking(move || worker.execute(&job_id))
                .await
                .unwrap_or_else(|e| Err(format!("worker panicked: {e}")));
            let result = match outcome {
                Ok(results) => manager.transition(&id, JobState::Done, |j| j.results = Some(results)),
                Err(message) => {
                    tracing::warn!(job = %id, "analysis failed: {message}");
                    manager.transition(&id, JobState::Failed, |j| j.error = Some(message))
                }
            };
            if let Err(e) = result {
                tracing::error!(job = %id, "could not record job state: {e}");
            }
        });
        Ok(job)
    }

    fn transition(&self, id: &str, next: JobState, update: impl FnOnce(&mut AnalysisJob)) -> Result<(), String> {
        let mut jobs = self.jobs.lock().expect("job table");
        let job = jobs.get_mut(id).ok_or_else(|| format!("job {id} vanished"))?;
        if !job.state.can_become(next) {
            return Err(format!("illegal transition {:?} -> {:?}", job.state, next));
        }
        let mut updated = job.clone();
        updated.state = next;
        update(&mut updated);
        persist(&self.layout, &updated).map_err(|e| e.to_string())?;
        *job = updated;
        Ok(())
    }

    fn execute(&self, id: &str) -> Result<JobResults, String> {
        let job = self.get(id).ok_or_else(|| format!("job {id} vanished"))?;
        let load = |dataset: &str| -> Result<(String, Vec<u8>), String> {
            let handle = self.datasets.get(dataset).ok_or_else(|| format!("dataset {dataset} vanished"))?;
            let bytes = self.datasets.bytes(&handle).map_err(|e| e.to_string())?;
            Ok((handle.name, bytes))
        };
        let (_, dem) = load(&job.inputs.dem)?;
        let (_, soil) = load(&job.inputs.soil)?;
        let (_, boundary) = load(&job.inputs.boundary)?;
        let yields = job.inputs.yields.iter().map(|y| load(y)).collect::<Result<Vec<_>, _>>()?;
        let fused = fuse(&FuseInputs {
            dem: &dem,
            soil: &soil,
            boundary: &boundary,
            yields: yields
                .iter()
                .map(|(name, bytes)| YieldSource { name, bytes })
                .collect(),
            schema: job.schema.clone(),
            resolution_factor: job.config.resolution_factor,
        })
        .map_err(|e| e.to_string())?;

        // analyze the table as stored, exactly as the CLI reads it back
        let csv = fused.table.to_csv();
        let table = FusedCellTable::from_csv(&csv).map_err(|e| e.to_string())?;
        let (report, blocks) = run_analysis(&table, &job.config).map_err(|e| e.to_string())?;

        let io = |e: std::io::Error| e.to_string();
        let rel = |suffix: &str| format!("jobs/{id}.{suffix}");
        write_atomic(&self.layout.job_artifact(id, "fused.csv"), &csv).map_err(io)?;
        write_atomic(&self.layout.job_artifact(id, "report.json"), &emit_report_json(&report)).map_err(io)?;
        write_atomic(&self.layout.job_artifact(id, "blocks.geojson"), &emit_block_geojson(&blocks)).map_err(io)?;

        let mut grids = BTreeMap::new();
        let mut save_grid = |name: String, grid: &terrablock_core::Grid| -> Result<(), String> {
            // season labels are free text, so ids are positional
            let grid_id = format!("{id}-g{}", grids.len());
            write_atomic(&self.layout.grids().join(format!("{grid_id}.asc")), &write_ascii_grid(grid)).map_err(io)?;
            grids.insert(name, grid_id);
            Ok(())
        };
        save_grid("elevation".into(), &fused.dem)?;
        save_grid("slope".into(), &fused.derivatives.slope)?;
        save_grid("aspect".into(), &fused.derivatives.aspect)?;
        for y in &fused.yields {
            save_grid(format!("yield_{}", y.season), &y.grid)?;
        }
        Ok(JobResults {
            report: rel("report.json"),
            blocks: rel("blocks.geojson"),
            fused_table: rel("fused.csv"),
            grids,
        })
    }

    pub fn artifact(&self, job: &AnalysisJob, suffix: &str) -> std::io::Result<Vec<u8>> {
        fs::read(self.layout.job_artifact(&job.id, suffix))
    }
}

fn persist(layout: &Layout, job: &AnalysisJob) -> std::io::Result<()> {
    let bytes = serde_json::to_vec_pretty(job).expect("job serializes");
    write_atomic(&layout.jobs().join(format!("{}.json", job.id)), &bytes)
}
