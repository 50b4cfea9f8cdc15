//! Scripted TCP trainer workers for protocol tests.

#![allow(dead_code)]

use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use gennet_core::fitness::{Endpoint, TrainSettings};
use gennet_core::fixtures::minimal_genome;
use gennet_core::{EvaluationRequest, EvaluationResult};

/// What the mock does with one request.
#[derive(Debug, Clone)]
pub enum Action {
    Reply { fitness: f64, delay: Duration },
    Fail(String),
    Hang,
    Garbage,
    WrongId,
}

pub fn reply(fitness: f64) -> Action {
    Action::Reply {
        fitness,
        delay: Duration::ZERO,
    }
}

pub fn reply_after(fitness: f64, millis: u64) -> Action {
    Action::Reply {
        fitness,
        delay: Duration::from_millis(millis),
    }
}

type Script = dyn Fn(&str, usize) -> Action + Send + Sync;

/// Request `id` and the zero-based attempt number the mock has seen for its base id.
#[derive(Default)]
pub struct Log {
    pub received: Mutex<Vec<String>>,
    pub completed: Mutex<Vec<String>>,
    in_flight: AtomicUsize,
    pub max_in_flight: AtomicUsize,
}

impl Log {
    pub fn received(&self) -> Vec<String> {
        self.received.lock().unwrap().clone()
    }

    pub fn completed(&self) -> Vec<String> {
        self.completed.lock().unwrap().clone()
    }

    pub fn max_in_flight(&self) -> usize {
        self.max_in_flight.load(Ordering::SeqCst)
    }
}

/// A listening mock worker. Every accepted connection handles each request on
/// its own thread, so several requests may be answered out of order.
pub struct MockWorker {
    pub addr: String,
    pub log: Arc<Log>,
}

/// Strips the retry suffix from a request id.
pub fn base_id(id: &str) -> &str {
    match id.rfind("-r") {
        Some(i) if id[i + 2..].chars().all(|c| c.is_ascii_digit()) && i + 2 < id.len() => &id[..i],
        _ => id,
    }
}

/// Index encoded in ids of the form `req-<i>`.
pub fn index_of(id: &str) -> usize {
    base_id(id).rsplit('-').next().and_then(|s| s.parse().ok()).unwrap_or(usize::MAX)
}

impl MockWorker {
    pub fn start(script: impl Fn(&str, usize) -> Action + Send + Sync + 'static) -> MockWorker {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap().to_string();
        let log = Arc::new(Log::default());
        let script: Arc<Script> = Arc::new(script);
        let shared = Arc::clone(&log);
        thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(stream) = stream else { return };
                let (log, script) = (Arc::clone(&shared), Arc::clone(&script));
                thread::spawn(move || serve(stream, &log, &script));
            }
        });
        MockWorker { addr, log }
    }

    pub fn endpoint(&self) -> Endpoint {
        Endpoint::Tcp(self.addr.clone())
    }
}

fn serve(stream: TcpStream, log: &Arc<Log>, script: &Arc<Script>) {
    let writer = Arc::new(Mutex::new(stream.try_clone().unwrap()));
    for line in BufReader::new(stream).lines() {
        let Ok(line) = line else { return };
        let request: EvaluationRequest = serde_json::from_str(&line).expect("client sent a valid request");
        let attempt = {
            let mut received = log.received.lock().unwrap();
            let attempt = received.iter().filter(|r| base_id(r) == base_id(&request.id)).count();
            received.push(request.id.clone());
            attempt
        };
        let now = log.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        log.max_in_flight.fetch_max(now, Ordering::SeqCst);

        let (log, script, writer) = (Arc::clone(log), Arc::clone(script), Arc::clone(&writer));
        thread::spawn(move || {
            let line = match script(&request.id, attempt) {
                Action::Reply { fitness, delay } => {
                    thread::sleep(delay);
                    serde_json::to_string(&EvaluationResult {
                        epochs_run: Some(1),
                        wall_seconds: Some(0.5),
                        ..EvaluationResult::ok(request.id.clone(), fitness)
                    })
                    .unwrap()
                }
                Action::Fail(message) => serde_json::to_string(&EvaluationResult::error(request.id.clone(), message)).unwrap(),
                Action::Hang => return,
                Action::Garbage => "this is not json".to_string(),
                Action::WrongId => serde_json::to_string(&EvaluationResult::ok("no-such-request", 0.5)).unwrap(),
            };
            log.in_flight.fetch_sub(1, Ordering::SeqCst);
            log.completed.lock().unwrap().push(request.id.clone());
            let mut w = writer.lock().unwrap();
            let _ = writeln!(w, "{line}");
            let _ = w.flush();
        });
    }
}

pub fn request(index: usize) -> EvaluationRequest {
    EvaluationRequest {
        id: format!("req-{index}"),
        genome: minimal_genome(10),
        dataset: "mnist".into(),
        train: TrainSettings::default(),
    }
}

pub fn requests(n: usize) -> Vec<EvaluationRequest> {
    (0..n).map(request).collect()
}
