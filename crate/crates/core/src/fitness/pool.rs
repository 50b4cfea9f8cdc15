//! Worker connections and the pool that fans evaluation requests out to them.
//!
//! A connection is either a child process (requests on its stdin, responses on
//! its stdout) or a TCP stream. Each connection has a reader thread that routes
//! response lines to waiting requests by id, so several requests may be in flight
//! on one connection and complete in any order.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{self, BufRead, BufReader, Write};
use std::net::{Shutdown, TcpStream};
use std::process::{Child, Command, Stdio};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{mpsc, Arc, Condvar, Mutex, MutexGuard};
use std::thread;
use std::time::Duration;

use tracing::{debug, warn};

use super::{EvaluationRequest, EvaluationResult};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum DispatchError {
    #[error("no response within {0:?}")]
    Timeout(Duration),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("protocol error: {0}")]
    Protocol(String),
}

impl DispatchError {
    /// Timeouts and broken transports are retried; protocol violations are not.
    pub fn is_retryable(&self) -> bool {
        matches!(self, DispatchError::Timeout(_) | DispatchError::Transport(_))
    }
}

/// Where a worker lives: a command line to spawn, or a TCP address.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Endpoint {
    Command(Vec<String>),
    Tcp(String),
}

impl FromStr for Endpoint {
    type Err = String;

    /// `tcp:HOST:PORT` and bare `HOST:PORT` are TCP addresses; anything else is a
    /// shell-quoted command line.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Some(addr) = s.strip_prefix("tcp:") {
            return Ok(Endpoint::Tcp(addr.to_string()));
        }
        let looks_like_addr = !s.contains(char::is_whitespace)
            && !s.contains('/')
            && s.rsplit_once(':').is_some_and(|(host, port)| !host.is_empty() && port.parse::<u16>().is_ok());
        if looks_like_addr {
            return Ok(Endpoint::Tcp(s.to_string()));
        }
        match shlex::split(s) {
            Some(argv) if !argv.is_empty() => Ok(Endpoint::Command(argv)),
            _ => Err(format!("cannot parse worker endpoint `{s}`")),
        }
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::Command(argv) => f.write_str(&shlex::try_join(argv.iter().map(String::as_str)).unwrap_or_default()),
            Endpoint::Tcp(addr) => write!(f, "tcp:{addr}"),
        }
    }
}

type Reply = Result<EvaluationResult, DispatchError>;

#[derive(Default)]
struct Inbox {
    pending: HashMap<String, mpsc::Sender<Reply>>,
    /// Ids whose caller gave up; late responses for them are dropped.
    expired: HashSet<String>,
    broken: Option<String>,
}

impl Inbox {
    fn poison(&mut self, reason: &str, err: impl Fn() -> DispatchError) {
        if self.broken.is_none() {
            self.broken = Some(reason.to_string());
        }
        for (_, tx) in self.pending.drain() {
            let _ = tx.send(Err(err()));
        }
    }
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

/// One live link to a worker.
pub(crate) struct Connection {
    label: String,
    writer: Mutex<Box<dyn Write + Send>>,
    inbox: Arc<Mutex<Inbox>>,
    child: Mutex<Option<Child>>,
    tcp: Option<TcpStream>,
}

impl Connection {
    fn open(endpoint: &Endpoint) -> io::Result<Connection> {
        match endpoint {
            Endpoint::Command(argv) => {
                let (program, args) = argv
                    .split_first()
                    .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "empty worker command"))?;
                let mut child = Command::new(program)
                    .args(args)
                    .stdin(Stdio::piped())
                    .stdout(Stdio::piped())
                    .stderr(Stdio::inherit())
                    .spawn()?;
                let stdin = child.stdin.take().expect("piped stdin");
                let stdout = child.stdout.take().expect("piped stdout");
                Ok(Connection::start(
                    endpoint.to_string(),
                    BufReader::new(stdout),
                    Box::new(stdin),
                    Some(child),
                    None,
                ))
            }
            Endpoint::Tcp(addr) => {
                let stream = TcpStream::connect(addr)?;
                stream.set_nodelay(true)?;
                let reader = BufReader::new(stream.try_clone()?);
                let writer = Box::new(stream.try_clone()?);
                Ok(Connection::start(endpoint.to_string(), reader, writer, None, Some(stream)))
            }
        }
    }

    fn start(
        label: String,
        reader: impl BufRead + Send + 'static,
        writer: Box<dyn Write + Send>,
        child: Option<Child>,
        tcp: Option<TcpStream>,
    ) -> Connection {
        let inbox = Arc::new(Mutex::new(Inbox::default()));
        let routed = Arc::clone(&inbox);
        let thread_label = label.clone();
        thread::Builder::new()
            .name(format!("gennet-reader {label}"))
            .spawn(move || read_loop(reader, &routed, &thread_label))
            .expect("spawn connection reader thread");
        Connection {
            label,
            writer: Mutex::new(writer),
            inbox,
            child: Mutex::new(child),
            tcp,
        }
    }

    fn is_broken(&self) -> bool {
        lock(&self.inbox).broken.is_some()
    }

    fn shutdown(&self, reason: &str) {
        lock(&self.inbox).poison(reason, || DispatchError::Transport(reason.to_string()));
        if let Some(stream) = &self.tcp {
            let _ = stream.shutdown(Shutdown::Both);
        }
        if let Some(mut child) = lock(&self.child).take() {
            let _ = child.kill();
            let _ = child.wait();
        }
    }

    fn request(&self, request: &EvaluationRequest, timeout: Duration) -> Reply {
        let (tx, rx) = mpsc::channel();
        {
            let mut inbox = lock(&self.inbox);
            if let Some(reason) = &inbox.broken {
                return Err(DispatchError::Transport(reason.clone()));
            }
            if inbox.pending.contains_key(&request.id) {
                return Err(DispatchError::Protocol(format!("request id {} already in flight", request.id)));
            }
            inbox.pending.insert(request.id.clone(), tx);
        }

        let mut line = serde_json::to_string(request).map_err(|e| DispatchError::Protocol(e.to_string()))?;
        line.push('\n');
        let written = {
            let mut w = lock(&self.writer);
            w.write_all(line.as_bytes()).and_then(|()| w.flush())
        };
        if let Err(e) = written {
            let reason = format!("write to {} failed: {e}", self.label);
            self.shutdown(&reason);
            return Err(DispatchError::Transport(reason));
        }
        debug!(id = %request.id, worker = %self.label, "request sent");

        match rx.recv_timeout(timeout) {
            Ok(reply) => reply,
            Err(mpsc::RecvTimeoutError::Timeout) => {
                let idle = {
                    let mut inbox = lock(&self.inbox);
                    if inbox.pending.remove(&request.id).is_none() {
                        // The reply raced the deadline and is already queued.
                        drop(inbox);
                        return rx.recv().unwrap_or(Err(DispatchError::Timeout(timeout)));
                    }
                    inbox.expired.insert(request.id.clone());
                    inbox.pending.is_empty()
                };
                if idle && self.child_attached() {
                    // A single-threaded worker stuck on this request would stall every
                    // later one; start over with a fresh process.
                    self.shutdown("worker recycled after timeout");
                }
                Err(DispatchError::Timeout(timeout))
            }
            Err(mpsc::RecvTimeoutError::Disconnected) => Err(DispatchError::Transport(format!(
                "connection to {} closed",
                self.label
            ))),
        }
    }

    fn child_attached(&self) -> bool {
        lock(&self.child).is_some()
    }
}

impl Drop for Connection {
    fn drop(&mut self) {
        self.shutdown("connection closed");
    }
}

fn read_loop(mut reader: impl BufRead, inbox: &Mutex<Inbox>, label: &str) {
    let mut line = String::new();
    loop {
        line.clear();
        match reader.read_line(&mut line) {
            Ok(0) => {
                let reason = format!("worker {label} closed the connection");
                lock(inbox).poison(&reason, || DispatchError::Transport(reason.clone()));
                return;
            }
            Ok(_) => {}
            Err(e) => {
                let reason = format!("read from {label} failed: {e}");
                lock(inbox).poison(&reason, || DispatchError::Transport(reason.clone()));
                return;
            }
        }
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        route_line(text, inbox, label);
        if lock(inbox).broken.is_some() {
            return;
        }
    }
}

fn route_line(text: &str, inbox: &Mutex<Inbox>, label: &str) {
    let value: serde_json::Value = match serde_json::from_str(text) {
        Ok(v) => v,
        Err(e) => {
            let reason = format!("malformed response line from {label}: {e}");
            warn!("{reason}");
            lock(inbox).poison(&reason, || DispatchError::Protocol(reason.clone()));
            return;
        }
    };
    let Some(id) = value.get("id").and_then(|v| v.as_str()).map(str::to_owned) else {
        let reason = format!("response from {label} carries no id");
        warn!("{reason}");
        lock(inbox).poison(&reason, || DispatchError::Protocol(reason.clone()));
        return;
    };

    let mut guard = lock(inbox);
    if let Some(tx) = guard.pending.remove(&id) {
        drop(guard);
        let reply = serde_json::from_value::<EvaluationResult>(value)
            .map_err(|e| DispatchError::Protocol(format!("malformed response for {id}: {e}")))
            .and_then(|r| {
                r.check()
                    .map_err(|e| DispatchError::Protocol(format!("invalid response for {id}: {e}")))?;
                Ok(r)
            });
        let _ = tx.send(reply);
    } else if guard.expired.remove(&id) {
        debug!(%id, "dropping late response");
    } else {
        let reason = format!("response id {id} from {label} matches no request in flight");
        warn!("{reason}");
        guard.poison(&reason, || DispatchError::Protocol(reason.clone()));
    }
}

/// Sends one request over a fresh connection and waits for its response.
/// A worker-reported failure comes back as `Ok` with `status = error`.
pub fn dispatch(request: &EvaluationRequest, worker: &Endpoint, timeout: Duration) -> Result<EvaluationResult, DispatchError> {
    let conn = Connection::open(worker)
        .map_err(|e| DispatchError::Transport(format!("cannot reach {worker}: {e}")))?;
    conn.request(request, timeout)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoolConfig {
    pub timeout: Duration,
    pub max_retries: u32,
    /// Requests one worker may hold at once. Trainer workers process requests
    /// serially, so anything above 1 only queues work inside the worker.
    pub max_in_flight_per_worker: usize,
}

impl Default for PoolConfig {
    fn default() -> Self {
        PoolConfig {
            timeout: Duration::from_secs(6 * 3600),
            max_retries: 1,
            max_in_flight_per_worker: 1,
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum PoolError {
    #[error("worker pool needs at least one worker")]
    NoWorkers,
    #[error("worker timeout must be positive")]
    ZeroTimeout,
    #[error("max_in_flight_per_worker must be positive")]
    ZeroCapacity,
}

struct Slot {
    endpoint: Endpoint,
    conn: Mutex<Option<Arc<Connection>>>,
}

/// Fixed set of workers with lazy (re)connection, first-available assignment and
/// per-request retry.
pub struct WorkerPool {
    slots: Vec<Slot>,
    config: PoolConfig,
    load: Mutex<Vec<usize>>,
    freed: Condvar,
}

struct Lease<'a> {
    pool: &'a WorkerPool,
    index: usize,
}

impl Drop for Lease<'_> {
    fn drop(&mut self) {
        lock(&self.pool.load)[self.index] -= 1;
        self.pool.freed.notify_one();
    }
}

impl WorkerPool {
    pub fn new(endpoints: Vec<Endpoint>, config: PoolConfig) -> Result<WorkerPool, PoolError> {
        if endpoints.is_empty() {
            return Err(PoolError::NoWorkers);
        }
        if config.timeout.is_zero() {
            return Err(PoolError::ZeroTimeout);
        }
        if config.max_in_flight_per_worker == 0 {
            return Err(PoolError::ZeroCapacity);
        }
        let load = Mutex::new(vec![0; endpoints.len()]);
        Ok(WorkerPool {
            slots: endpoints
                .into_iter()
                .map(|endpoint| Slot {
                    endpoint,
                    conn: Mutex::new(None),
                })
                .collect(),
            config,
            load,
            freed: Condvar::new(),
        })
    }

    pub fn config(&self) -> &PoolConfig {
        &self.config
    }

    pub fn endpoints(&self) -> impl Iterator<Item = &Endpoint> {
        self.slots.iter().map(|s| &s.endpoint)
    }

    fn acquire(&self) -> Lease<'_> {
        let mut load = lock(&self.load);
        loop {
            let free = load
                .iter()
                .enumerate()
                .filter(|(_, &n)| n < self.config.max_in_flight_per_worker)
                .min_by_key(|(i, &n)| (n, *i))
                .map(|(i, _)| i);
            if let Some(index) = free {
                load[index] += 1;
                return Lease { pool: self, index };
            }
            load = self.freed.wait(load).unwrap_or_else(|p| p.into_inner());
        }
    }

    fn connection(&self, index: usize) -> Result<Arc<Connection>, DispatchError> {
        let slot = &self.slots[index];
        let mut conn = lock(&slot.conn);
        if let Some(c) = conn.as_ref().filter(|c| !c.is_broken()) {
            return Ok(Arc::clone(c));
        }
        let fresh = Arc::new(
            Connection::open(&slot.endpoint)
                .map_err(|e| DispatchError::Transport(format!("cannot reach {}: {e}", slot.endpoint)))?,
        );
        *conn = Some(Arc::clone(&fresh));
        Ok(fresh)
    }

    /// Sends one request to the first available worker, retrying retryable
    /// failures up to `max_retries` times under fresh ids. Never fails: exhausted
    /// attempts come back as an error result.
    pub fn submit(&self, request: &EvaluationRequest) -> EvaluationResult {
        let mut attempt_request = request.clone();
        for attempt in 0..=self.config.max_retries {
            if attempt > 0 {
                attempt_request.id = format!("{}-r{attempt}", request.id);
            }
            let outcome = {
                let lease = self.acquire();
                self.connection(lease.index)
                    .and_then(|c| c.request(&attempt_request, self.config.timeout))
            };
            match outcome {
                Ok(result) => return result,
                Err(e) if e.is_retryable() && attempt < self.config.max_retries => {
                    warn!(id = %attempt_request.id, error = %e, "evaluation attempt failed, retrying");
                }
                Err(e) => {
                    warn!(id = %attempt_request.id, error = %e, "evaluation failed");
                    return EvaluationResult::error(attempt_request.id, e.to_string());
                }
            }
        }
        unreachable!("the final attempt always returns")
    }

    /// Evaluates every request with at most `parallelism` in flight. The output is
    /// index-aligned with `requests` whatever order the workers answer in.
    pub fn evaluate_batch(&self, requests: Vec<EvaluationRequest>, parallelism: usize) -> Vec<EvaluationResult> {
        let n = requests.len();
        let next = AtomicUsize::new(0);
        let results: Mutex<Vec<Option<EvaluationResult>>> = Mutex::new(vec![None; n]);
        thread::scope(|scope| {
            for _ in 0..parallelism.max(1).min(n) {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= n {
                        break;
                    }
                    let result = self.submit(&requests[i]);
                    lock(&results)[i] = Some(result);
                });
            }
        });
        results
            .into_inner()
            .unwrap_or_else(|p| p.into_inner())
            .into_iter()
            .map(|r| r.expect("every slot is filled"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_endpoints() {
        assert_eq!("tcp:localhost:9000".parse(), Ok(Endpoint::Tcp("localhost:9000".into())));
        assert_eq!("127.0.0.1:7000".parse(), Ok(Endpoint::Tcp("127.0.0.1:7000".into())));
        assert_eq!(
            "python3 -m gennet_worker --transport stdio".parse(),
            Ok(Endpoint::Command(vec![
                "python3".into(),
                "-m".into(),
                "gennet_worker".into(),
                "--transport".into(),
                "stdio".into()
            ]))
        );
        assert_eq!(
            "'/opt/my worker' --data 'a b'".parse(),
            Ok(Endpoint::Command(vec!["/opt/my worker".into(), "--data".into(), "a b".into()]))
        );
        assert!("".parse::<Endpoint>().is_err());
        assert!("'unterminated".parse::<Endpoint>().is_err());
    }

    #[test]
    fn endpoint_display_round_trips() {
        for text in ["tcp:host:1", "worker --flag 'x y'"] {
            let e: Endpoint = text.parse().unwrap();
            assert_eq!(e.to_string().parse::<Endpoint>().unwrap(), e);
        }
    }

    #[test]
    fn pool_rejects_bad_config() {
        assert_eq!(WorkerPool::new(vec![], PoolConfig::default()).err(), Some(PoolError::NoWorkers));
        let cfg = PoolConfig {
            timeout: Duration::ZERO,
            ..PoolConfig::default()
        };
        assert_eq!(
            WorkerPool::new(vec![Endpoint::Tcp("x:1".into())], cfg).err(),
            Some(PoolError::ZeroTimeout)
        );
    }

    #[test]
    fn unreachable_worker_yields_error_result() {
        let pool = WorkerPool::new(
            vec![Endpoint::Command(vec!["/nonexistent/gennet-worker".into()])],
            PoolConfig {
                max_retries: 2,
                ..PoolConfig::default()
            },
        )
        .unwrap();
        let request = EvaluationRequest {
            id: "x".into(),
            genome: crate::fixtures::minimal_genome(10),
            dataset: "mnist".into(),
            train: Default::default(),
        };
        let r = pool.submit(&request);
        assert!(!r.is_ok());
        assert_eq!(r.id, "x-r2");
        assert!(r.message.unwrap().contains("cannot reach"));
    }
}
