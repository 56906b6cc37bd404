//! Background jobs: a bounded queue drained by a fixed set of workers.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use tokio::sync::mpsc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobKind {
    Evaluate,
    Automl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobStatus {
    Queued,
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobFailure {
    pub code: String,
    pub message: String,
}

impl JobFailure {
    pub fn new(code: &str, message: impl Into<String>) -> Self {
        Self { code: code.into(), message: message.into() }
    }
}

/// Client view of a job. `result` is present exactly when the job is done.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Job {
    pub job_id: String,
    pub kind: JobKind,
    pub status: JobStatus,
    pub progress: f64,
    pub created_at: String,
    pub started_at: Option<String>,
    pub finished_at: Option<String>,
    pub result: Option<Value>,
    pub error: Option<JobFailure>,
}

pub type JobWork = Box<dyn FnOnce(&Progress) -> Result<Value, JobFailure> + Send + 'static>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QueueFull;

type Jobs = Arc<Mutex<HashMap<String, Job>>>;

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// Progress reporter handed to a running job.
pub struct Progress {
    jobs: Jobs,
    job_id: String,
}

impl Progress {
    /// Records `fraction` of the work as complete. Values never go down and
    /// stay below 1 until the job finishes.
    pub fn set(&self, fraction: f64) {
        let mut jobs = self.jobs.lock().expect("job registry poisoned");
        if let Some(job) = jobs.get_mut(&self.job_id) {
            if job.status == JobStatus::Running && fraction.is_finite() {
                job.progress = job.progress.max(fraction.clamp(0.0, 0.99));
            }
        }
    }
}

pub struct JobRegistry {
    jobs: Jobs,
    sender: mpsc::Sender<(String, JobWork)>,
}

impl JobRegistry {
    /// Spawns `workers` worker tasks on the current tokio runtime.
    pub fn start(workers: usize, capacity: usize) -> Self {
        let (sender, receiver) = mpsc::channel::<(String, JobWork)>(capacity.max(1));
        let receiver = Arc::new(tokio::sync::Mutex::new(receiver));
        let jobs: Jobs = Arc::default();
        for _ in 0..workers.max(1) {
            let receiver = Arc::clone(&receiver);
            let jobs = Arc::clone(&jobs);
            tokio::spawn(async move {
                loop {
                    let next = receiver.lock().await.recv().await;
                    let Some((job_id, work)) = next else { break };
                    run_one(&jobs, job_id, work).await;
                }
            });
        }
        Self { jobs, sender }
    }

    pub fn submit(&self, kind: JobKind, work: JobWork) -> Result<String, QueueFull> {
        let job_id = uuid::Uuid::new_v4().simple().to_string();
        let job = Job {
            job_id: job_id.clone(),
            kind,
            status: JobStatus::Queued,
            progress: 0.0,
            created_at: now(),
            started_at: None,
            finished_at: None,
            result: None,
            error: None,
        };
        self.jobs.lock().expect("job registry poisoned").insert(job_id.clone(), job);
        if self.sender.try_send((job_id.clone(), work)).is_err() {
            self.jobs.lock().expect("job registry poisoned").remove(&job_id);
            return Err(QueueFull);
        }
        Ok(job_id)
    }

    pub fn get(&self, job_id: &str) -> Option<Job> {
        self.jobs.lock().expect("job registry poisoned").get(job_id).cloned()
    }

    /// Jobs waiting for a worker.
    pub fn queued(&self) -> usize {
        self.jobs.lock().expect("job registry poisoned").values().filter(|j| j.status == JobStatus::Queued).count()
    }
}

async fn run_one(jobs: &Jobs, job_id: String, work: JobWork) {
    {
        let mut map = jobs.lock().expect("job registry poisoned");
        let Some(job) = map.get_mut(&job_id) else { return };
        job.status = JobStatus::Running;
        job.started_at = Some(now());
    }
    let progress = Progress { jobs: Arc::clone(jobs), job_id: job_id.clone() };
    let outcome = tokio::task::spawn_blocking(move || work(&progress)).await.unwrap_or_else(|e| {
        let message = match e.try_into_panic() {
            Ok(payload) => payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into()),
            Err(e) => e.to_string(),
        };
        Err(JobFailure::new(crate::error::codes::INTERNAL, format!("job panicked: {message}")))
    });
    let mut map = jobs.lock().expect("job registry poisoned");
    let Some(job) = map.get_mut(&job_id) else { return };
    job.finished_at = Some(now());
    match outcome {
        Ok(result) => {
            job.status = JobStatus::Done;
            job.progress = 1.0;
            job.result = Some(result);
        }
        Err(failure) => {
            job.status = JobStatus::Failed;
            job.error = Some(failure);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::time::Duration;

    async fn wait(registry: &JobRegistry, id: &str) -> Job {
        for _ in 0..500 {
            let job = registry.get(id).unwrap();
            if matches!(job.status, JobStatus::Done | JobStatus::Failed) {
                return job;
            }
            tokio::time::sleep(Duration::from_millis(10)).await;
        }
        panic!("job {id} did not finish");
    }

    #[tokio::test(flavor = "multi_thread", worker_threads = 2)]
    async fn panics_fail_only_their_job() {
        let registry = JobRegistry::start(2, 8);
        let bad = registry.submit(JobKind::Evaluate, Box::new(|_| panic!("boom"))).unwrap();
        let good = registry
            .submit(
                JobKind::Automl,
                Box::new(|p| {
                    p.set(0.5);
                    Ok(serde_json::json!({"ok": true}))
                }),
            )
            .unwrap();
        let bad = wait(&registry, &bad).await;
        assert_eq!(bad.status, JobStatus::Failed);
        assert!(bad.error.unwrap().message.contains("boom"));
        assert!(bad.result.is_none());
        let good = wait(&registry, &good).await;
        assert_eq!((good.status, good.progress), (JobStatus::Done, 1.0));
        assert!(good.error.is_none());
    }

    #[tokio::test(flavor = "multi_thread", worker_threads = 2)]
    async fn full_queue_is_refused() {
        let registry = JobRegistry::start(1, 2);
        let (tx, rx) = std::sync::mpsc::channel::<()>();
        let rx = Mutex::new(rx);
        registry
            .submit(
                JobKind::Evaluate,
                Box::new(move |_| {
                    let _ = rx.lock().unwrap().recv_timeout(Duration::from_secs(5));
                    Ok(Value::Null)
                }),
            )
            .unwrap();
        // Let the worker pick up the blocking job so the queue is empty.
        for _ in 0..200 {
            if registry.queued() == 0 {
                break;
            }
            tokio::time::sleep(Duration::from_millis(5)).await;
        }
        let a = registry.submit(JobKind::Evaluate, Box::new(|_| Ok(Value::Null))).unwrap();
        registry.submit(JobKind::Evaluate, Box::new(|_| Ok(Value::Null))).unwrap();
        assert_eq!(registry.submit(JobKind::Evaluate, Box::new(|_| Ok(Value::Null))), Err(QueueFull));
        assert_eq!(registry.queued(), 2);
        tx.send(()).unwrap();
        assert_eq!(wait(&registry, &a).await.status, JobStatus::Done);
    }
}
