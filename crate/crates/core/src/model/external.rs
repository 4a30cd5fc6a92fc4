use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::process::{Child, Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{channel, Sender};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use super::wire::{Op, Request, Response};
use super::{CandidateList, DecodeParams, Integrator, ModelError, DEFAULT_TOKEN_CAP};
use crate::expr::{to_prefix, Expr, TokenSeq};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Transport {
    /// Shell command whose standard streams carry the protocol.
    Command(String),
    /// `host:port` of a listening backend.
    Tcp(String),
}

type Reply = Result<Response, ModelError>;

#[derive(Default)]
struct Pending {
    waiters: HashMap<String, Sender<Reply>>,
    /// Set once the stream is gone; later calls fail immediately.
    closed: Option<String>,
}

/// Client for an external model speaking the line protocol.
///
/// A reader thread routes responses to waiting callers by id, so calls may
/// be issued concurrently and answered in any order.
pub struct ExternalModel {
    writer: Mutex<Box<dyn Write + Send>>,
    pending: Arc<Mutex<Pending>>,
    next_id: AtomicU64,
    child: Mutex<Option<Child>>,
    token_cap: usize,
    timeout: Duration,
    label: String,
}

impl ExternalModel {
    pub fn connect(transport: &Transport) -> Result<Self, ModelError> {
        let unavailable = |e: std::io::Error| ModelError::ModelUnavailable(e.to_string());
        let (reader, writer, child, label): (Box<dyn Read + Send>, Box<dyn Write + Send>, _, _) =
            match transport {
                Transport::Command(cmd) => {
                    let mut child = Command::new("sh")
                        .arg("-c")
                        .arg(cmd)
                        .stdin(Stdio::piped())
                        .stdout(Stdio::piped())
                        .stderr(Stdio::inherit())
                        .spawn()
                        .map_err(unavailable)?;
                    let out = child.stdout.take().expect("piped stdout");
                    let inp = child.stdin.take().expect("piped stdin");
                    (Box::new(out), Box::new(inp), Some(child), format!("external(cmd={cmd})"))
                }
                Transport::Tcp(addr) => {
                    let s = TcpStream::connect(addr).map_err(unavailable)?;
                    let r = s.try_clone().map_err(unavailable)?;
                    (Box::new(r), Box::new(s), None, format!("external(tcp={addr})"))
                }
            };
        let pending = Arc::new(Mutex::new(Pending::default()));
        let routes = Arc::clone(&pending);
        thread::Builder::new()
            .name("model-reader".into())
            .spawn(move || read_loop(reader, routes))
            .map_err(unavailable)?;
        Ok(ExternalModel {
            writer: Mutex::new(writer),
            pending,
            next_id: AtomicU64::new(1),
            child: Mutex::new(child),
            token_cap: DEFAULT_TOKEN_CAP,
            timeout: Duration::from_secs(60),
            label,
        })
    }

    pub fn with_token_cap(mut self, cap: usize) -> Self {
        self.token_cap = cap;
        self
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    fn call(&self, mut req: Request) -> Result<Response, ModelError> {
        let id = self.next_id.fetch_add(1, Ordering::Relaxed).to_string();
        req.id = id.clone();
        let (tx, rx) = channel();
        {
            let mut p = self.pending.lock().unwrap();
            if let Some(reason) = &p.closed {
                return Err(ModelError::ModelUnavailable(reason.clone()));
            }
            p.waiters.insert(id.clone(), tx);
        }
        let line = serde_json::to_string(&req).expect("request serializes");
        let sent = {
            let mut w = self.writer.lock().unwrap();
            writeln!(w, "{line}").and_then(|_| w.flush())
        };
        if let Err(e) = sent {
            self.pending.lock().unwrap().waiters.remove(&id);
            return Err(ModelError::ModelUnavailable(e.to_string()));
        }
        let reply = rx.recv_timeout(self.timeout).unwrap_or_else(|_| {
            Err(ModelError::ModelUnavailable("no response within timeout".into()))
        });
        self.pending.lock().unwrap().waiters.remove(&id);
        let resp = reply?;
        if let Some(err) = resp.error {
            return Err(ModelError::ModelUnavailable(format!("backend error: {err}")));
        }
        if let Some(long) = resp.candidates.iter().find(|c| c.len() > self.token_cap) {
            return Err(ModelError::ResponseTooLarge {
                len: long.len(),
                cap: self.token_cap,
            });
        }
        Ok(resp)
    }
}

fn read_loop(reader: Box<dyn Read + Send>, pending: Arc<Mutex<Pending>>) {
    let reader = BufReader::new(reader);
    for line in reader.lines() {
        let Ok(line) = line else { break };
        if line.trim().is_empty() {
            continue;
        }
        let mut p = pending.lock().unwrap();
        match serde_json::from_str::<Response>(&line) {
            Ok(resp) => {
                if let Some(tx) = p.waiters.remove(&resp.id) {
                    let _ = tx.send(Ok(resp));
                }
            }
            Err(e) => {
                let id = serde_json::from_str::<serde_json::Value>(&line)
                    .ok()
                    .and_then(|v| v.get("id").and_then(|i| i.as_str().map(str::to_string)));
                let err = ModelError::MalformedResponse(e.to_string());
                match id {
                    Some(id) => {
                        if let Some(tx) = p.waiters.remove(&id) {
                            let _ = tx.send(Err(err));
                        }
                    }
                    // Unroutable garbage: every caller still waiting may
                    // have been its addressee.
                    None => {
                        for (_, tx) in p.waiters.drain() {
                            let _ = tx.send(Err(err.clone()));
                        }
                    }
                }
            }
        }
    }
    let mut p = pending.lock().unwrap();
    let reason = "model stream closed".to_string();
    for (_, tx) in p.waiters.drain() {
        let _ = tx.send(Err(ModelError::ModelUnavailable(reason.clone())));
    }
    p.closed = Some(reason);
}

impl Integrator for ExternalModel {
    fn propose(&self, problem: &Expr, params: &DecodeParams) -> Result<CandidateList, ModelError> {
        params.validate()?;
        let req = Request::new(String::new(), Op::Propose, to_prefix(problem).0, params);
        let resp = self.call(req)?;
        let cands = resp.candidates.into_iter().map(TokenSeq).collect();
        CandidateList::new(cands, resp.scores, params.k)
    }

    fn score(
        &self,
        problem: &Expr,
        candidate: &TokenSeq,
        params: &DecodeParams,
    ) -> Result<Option<f64>, ModelError> {
        let mut req = Request::new(String::new(), Op::Score, to_prefix(problem).0, params);
        req.candidate = Some(candidate.0.clone());
        let resp = self.call(req)?;
        match resp.scores.as_deref() {
            None | Some([]) => Ok(None),
            Some([s]) if *s > 0.0 && *s <= 1.0 => Ok(Some(*s)),
            Some(other) => Err(ModelError::MalformedResponse(format!(
                "score response must carry one value in (0, 1], got {other:?}"
            ))),
        }
    }

    fn describe(&self) -> String {
        self.label.clone()
    }
}

impl Drop for ExternalModel {
    fn drop(&mut self) {
        if let Some(mut c) = self.child.lock().unwrap().take() {
            let _ = c.kill();
            let _ = c.wait();
        }
    }
}
