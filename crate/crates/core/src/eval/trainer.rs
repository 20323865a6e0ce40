//! Client for an external trainer process speaking the stdio wire protocol.

use super::protocol::{Hello, WireRequest, WireResponse};
use super::{EvalError, EvalRequest, Evaluator, FitnessReport};
use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

pub const TIMEOUT_ENV: &str = "OPENNAS_TRAINER_TIMEOUT_S";
pub const DEFAULT_TIMEOUT_S: u64 = 3600;

/// How long to wait for stderr to drain after the trainer closes stdout.
const STDERR_GRACE: Duration = Duration::from_secs(2);

/// Reads the per-request timeout from the environment, falling back to one hour.
pub fn timeout_from_env() -> Duration {
    let secs = std::env::var(TIMEOUT_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_TIMEOUT_S);
    Duration::from_secs(secs)
}

type Reply = Result<FitnessReport, EvalError>;

#[derive(Default)]
struct Router {
    pending: HashMap<u64, Sender<Reply>>,
    /// Set once the trainer's stdout has closed; holds the failure reason.
    closed: Option<EvalError>,
}

pub struct ExternTrainer {
    command: String,
    timeout: Duration,
    hello: Hello,
    child: Mutex<Child>,
    stdin: Mutex<ChildStdin>,
    router: Arc<Mutex<Router>>,
    stderr: Arc<Mutex<String>>,
    next_id: AtomicU64,
    expansion: Option<(bool, Option<f64>)>,
}

impl std::fmt::Debug for ExternTrainer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExternTrainer")
            .field("command", &self.command)
            .field("timeout", &self.timeout)
            .field("hello", &self.hello)
            .finish()
    }
}

impl ExternTrainer {
    /// Spawns `command` through `sh -c` and waits for its hello handshake.
    pub fn spawn(command: &str, timeout: Duration) -> Result<Self, EvalError> {
        let mut cmd = Command::new("sh");
        cmd.arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped());
        // Own process group, so that killing the trainer also reaches
        // whatever the shell started.
        #[cfg(unix)]
        std::os::unix::process::CommandExt::process_group(&mut cmd, 0);
        let mut child = cmd
            .spawn()
            .map_err(|e| EvalError::failure(format!("cannot spawn trainer `{command}`: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let stderr_pipe = child.stderr.take().expect("piped stderr");

        let stderr = Arc::new(Mutex::new(String::new()));
        let (stderr_done_tx, stderr_done_rx) = mpsc::channel::<()>();
        {
            let stderr = Arc::clone(&stderr);
            thread::spawn(move || {
                let mut reader = BufReader::new(stderr_pipe);
                let mut buf = [0u8; 4096];
                while let Ok(n) = reader.read(&mut buf) {
                    if n == 0 {
                        break;
                    }
                    stderr
                        .lock()
                        .unwrap()
                        .push_str(&String::from_utf8_lossy(&buf[..n]));
                }
                let _ = stderr_done_tx.send(());
            });
        }

        let router = Arc::new(Mutex::new(Router::default()));
        let (hello_tx, hello_rx) = mpsc::channel::<Option<String>>();
        {
            let router = Arc::clone(&router);
            let stderr = Arc::clone(&stderr);
            thread::spawn(move || {
                read_loop(stdout, hello_tx, &router);
                let _ = stderr_done_rx.recv_timeout(STDERR_GRACE);
                let diagnostics = stderr.lock().unwrap().clone();
                let reason = EvalError::Failure {
                    message: "trainer process closed its output".into(),
                    diagnostics,
                };
                let mut r = router.lock().unwrap();
                for (_, tx) in r.pending.drain() {
                    let _ = tx.send(Err(reason.clone()));
                }
                r.closed = Some(reason);
            });
        }

        let hello = match hello_rx.recv_timeout(timeout) {
            Ok(Some(line)) => Hello::parse(&line),
            Ok(None) | Err(RecvTimeoutError::Disconnected) => {
                let _ = child.wait();
                thread::sleep(Duration::from_millis(50));
                Err(EvalError::Failure {
                    message: "trainer exited before its handshake".into(),
                    diagnostics: stderr.lock().unwrap().clone(),
                })
            }
            Err(RecvTimeoutError::Timeout) => Err(EvalError::Timeout {
                seconds: timeout.as_secs(),
            }),
        };
        let hello = match hello {
            Ok(h) => h,
            Err(e) => {
                kill_tree(&mut child);
                return Err(e);
            }
        };

        Ok(Self {
            command: command.to_owned(),
            timeout,
            hello,
            child: Mutex::new(child),
            stdin: Mutex::new(stdin),
            router,
            stderr,
            next_id: AtomicU64::new(0),
            expansion: None,
        })
    }

    /// Materialize every architecture (BatchNorm after Conv, Dropout after FC)
    /// before it is sent.
    pub fn with_materialization(mut self, batch_norm: bool, dropout_rate: Option<f64>) -> Self {
        self.expansion = Some((batch_norm, dropout_rate));
        self
    }

    pub fn hello(&self) -> &Hello {
        &self.hello
    }

    pub fn command(&self) -> &str {
        &self.command
    }

    /// Everything the trainer has written to stderr so far.
    pub fn diagnostics(&self) -> String {
        self.stderr.lock().unwrap().clone()
    }

    fn kill(&self) {
        kill_tree(&mut self.child.lock().unwrap());
    }
}

fn kill_tree(child: &mut Child) {
    #[cfg(unix)]
    if let Ok(pid) = libc::pid_t::try_from(child.id()) {
        // SAFETY: plain syscall on the process group created at spawn.
        unsafe {
            libc::kill(-pid, libc::SIGKILL);
        }
    }
    let _ = child.kill();
    let _ = child.wait();
}

fn read_loop(
    stdout: impl Read,
    hello_tx: Sender<Option<String>>,
    router: &Mutex<Router>,
) {
    let mut lines = BufReader::new(stdout).lines();
    let first = lines.next().and_then(Result::ok);
    let got_hello = first.is_some();
    let _ = hello_tx.send(first);
    if !got_hello {
        return;
    }
    for line in lines {
        let Ok(line) = line else { break };
        if line.trim().is_empty() {
            continue;
        }
        // Non-protocol lines on stdout are ignored.
        let Ok(response) = WireResponse::parse(&line) else {
            continue;
        };
        let id = response.id();
        let reply = match response {
            WireResponse::Ok { report, .. } => Ok(report),
            WireResponse::Err { ref error, .. } => Err(EvalError::failure(error.clone())),
        };
        if let Some(tx) = router.lock().unwrap().pending.remove(&id) {
            let _ = tx.send(reply);
        }
    }
}

impl Evaluator for ExternTrainer {
    fn evaluate(&self, request: &EvalRequest) -> Result<FitnessReport, EvalError> {
        if request.epochs == 0 {
            return Err(EvalError::InvalidRequest("epochs must be >= 1".into()));
        }
        let id = self.next_id.fetch_add(1, Ordering::SeqCst);
        let rx: Receiver<Reply> = {
            let mut router = self.router.lock().unwrap();
            if let Some(reason) = &router.closed {
                return Err(reason.clone());
            }
            let (tx, rx) = mpsc::channel();
            router.pending.insert(id, tx);
            rx
        };

        let mut wire = WireRequest::evaluate(id, request);
        if let Some((bn, dropout)) = self.expansion {
            wire.architecture = wire.architecture.materialize(bn, dropout);
        }
        let line = wire.to_line();
        let write = {
            let mut stdin = self.stdin.lock().unwrap();
            writeln!(stdin, "{line}").and_then(|_| stdin.flush())
        };
        if let Err(e) = write {
            self.router.lock().unwrap().pending.remove(&id);
            // The reader thread may already have recorded a better reason.
            thread::sleep(Duration::from_millis(50));
            if let Some(reason) = &self.router.lock().unwrap().closed {
                return Err(reason.clone());
            }
            return Err(EvalError::Failure {
                message: format!("cannot write to trainer: {e}"),
                diagnostics: self.diagnostics(),
            });
        }

        match rx.recv_timeout(self.timeout) {
            Ok(reply) => reply,
            Err(RecvTimeoutError::Timeout) => {
                self.router.lock().unwrap().pending.remove(&id);
                self.kill();
                Err(EvalError::Timeout {
                    seconds: self.timeout.as_secs(),
                })
            }
            Err(RecvTimeoutError::Disconnected) => Err(EvalError::Failure {
                message: "trainer connection dropped".into(),
                diagnostics: self.diagnostics(),
            }),
        }
    }

    fn max_parallelism(&self) -> usize {
        self.hello.max_parallelism.max(1)
    }
}

impl Drop for ExternTrainer {
    fn drop(&mut self) {
        self.kill();
    }
}
