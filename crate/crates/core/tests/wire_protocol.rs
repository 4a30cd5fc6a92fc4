use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use rand::Rng;
use symint::calculus::EquivConfig;
use symint::expr::{canonicalize, parse_infix, to_prefix, Expr, TokenSeq};
use symint::metrics::failure_indicator;
use symint::model::wire::{Op, Request, Response};
use symint::model::{DecodeParams, ExternalModel, FaultyModel, Integrator, ModelError, Transport};
use symint::oracle::FaultSpec;
use symint::problemgen::random_tree;
use symint::seed::rng_for;

/// Serves one connection on a fresh port. `handle` gets each request line
/// and a shared writer.
fn serve<F>(handle: F) -> String
where
    F: Fn(String, Arc<Mutex<TcpStream>>) + Send + Sync + 'static,
{
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        let writer = Arc::new(Mutex::new(stream.try_clone().unwrap()));
        let handle = Arc::new(handle);
        for line in BufReader::new(stream).lines() {
            let Ok(line) = line else { break };
            handle(line, Arc::clone(&writer));
        }
    });
    addr
}

fn send(w: &Mutex<TcpStream>, line: &str) {
    let mut w = w.lock().unwrap();
    let _ = writeln!(w, "{line}");
    let _ = w.flush();
}

fn connect(addr: &str) -> ExternalModel {
    ExternalModel::connect(&Transport::Tcp(addr.into()))
        .unwrap()
        .with_timeout(Duration::from_secs(10))
}

/// Answers with the in-process faulty model after a random delay, so
/// replies to concurrent requests come back out of order.
fn faulty_backend(spec: FaultSpec) -> String {
    let model = Arc::new(FaultyModel::new(spec));
    serve(move |line, w| {
        let model = Arc::clone(&model);
        thread::spawn(move || {
            let req: Request = serde_json::from_str(&line).unwrap();
            let delay = rng_for(&[symint::seed::hash_str(&req.id)]).random_range(0..4);
            thread::sleep(Duration::from_millis(delay));
            let problem: Expr = TokenSeq(req.prefix.clone()).parse().unwrap();
            let params = DecodeParams { k: req.k, beam: req.beam, ..DecodeParams::default() };
            let resp = match req.op {
                Op::Propose => {
                    let l = model.propose(&problem, &params).unwrap();
                    Response {
                        id: req.id,
                        candidates: l.candidates.into_iter().map(|c| c.0).collect(),
                        scores: l.scores,
                        error: None,
                    }
                }
                Op::Score => {
                    let c = TokenSeq(req.candidate.unwrap());
                    let s = model.score(&problem, &c, &params).unwrap();
                    Response { id: req.id, scores: s.map(|v| vec![v]), ..Response::default() }
                }
            };
            send(&w, &serde_json::to_string(&resp).unwrap());
        });
    })
}

#[test]
fn randomized_requests_match_in_process_model() {
    let spec = FaultSpec { seed: 3, ..FaultSpec::with_p(0.5) };
    let local = FaultyModel::new(spec.clone());
    let remote = connect(&faulty_backend(spec));
    let mut rng = rng_for(&[42]);
    let jobs: Vec<(Expr, bool, usize)> = (0..100)
        .map(|_| loop {
            let e = random_tree(rng.random_range(1..5), &mut rng);
            if canonicalize(&e).is_ok() {
                break (e, rng.random_bool(0.7), rng.random_range(1..=5));
            }
        })
        .collect();
    let cfg = EquivConfig::default();
    thread::scope(|s| {
        for chunk in jobs.chunks(13) {
            let (local, remote, cfg) = (&local, &remote, &cfg);
            s.spawn(move || {
                for (e, propose, k) in chunk {
                    let params = DecodeParams::with_k(*k);
                    if *propose {
                        let a = remote.propose(e, &params).unwrap();
                        let b = local.propose(e, &params).unwrap();
                        assert_eq!(a, b);
                        assert_eq!(failure_indicator(e, &a, *k, cfg), failure_indicator(e, &b, *k, cfg));
                    } else {
                        let c = to_prefix(&Expr::sin(Expr::X));
                        assert_eq!(remote.score(e, &c, &params).unwrap(), local.score(e, &c, &params).unwrap());
                    }
                }
            });
        }
    });
}

#[test]
fn replies_are_routed_by_id_when_reversed() {
    let held: Arc<Mutex<Vec<String>>> = Arc::default();
    let addr = serve(move |line, w| {
        let req: Request = serde_json::from_str(&line).unwrap();
        let mut h = held.lock().unwrap();
        h.push(req.id.clone());
        // Echo the problem back as the candidate, replying only once two
        // requests are waiting and answering the newer one first.
        if h.len() == 2 {
            for id in h.drain(..).rev() {
                let resp = Response { id: id.clone(), candidates: vec![vec!["INT+".into(), id]], ..Response::default() };
                send(&w, &serde_json::to_string(&resp).unwrap());
            }
        }
    });
    let m = connect(&addr);
    let params = DecodeParams::with_k(1);
    let (a, b) = thread::scope(|s| {
        let a = s.spawn(|| m.propose(&Expr::X, &params).unwrap());
        thread::sleep(Duration::from_millis(50));
        let b = s.spawn(|| m.propose(&Expr::X, &params).unwrap());
        (a.join().unwrap(), b.join().unwrap())
    });
    let ids = |l: &symint::model::CandidateList| l.candidates[0].0[1].clone();
    assert_eq!((ids(&a).as_str(), ids(&b).as_str()), ("1", "2"));
}

#[test]
fn malformed_oversized_and_error_replies() {
    let addr = serve(|line, w| {
        let req: Request = serde_json::from_str(&line).unwrap();
        let reply = match req.id.as_str() {
            "1" => format!(r#"{{"id":"{}","candidates":"x"}}"#, req.id),
            "2" => serde_json::to_string(&Response {
                id: req.id,
                candidates: vec![vec!["x".to_string(); 600]],
                ..Response::default()
            })
            .unwrap(),
            "3" => format!(r#"{{"id":"{}","error":"bad request"}}"#, req.id),
            "4" => format!(r#"{{"id":"{}","candidates":[["x"]],"scores":[0.9,0.8]}}"#, req.id),
            "5" => format!(r#"{{"id":"{}","scores":[1.5]}}"#, req.id),
            _ => format!(r#"{{"id":"{}","candidates":[["x"]]}}"#, req.id),
        };
        send(&w, &reply);
    });
    let m = connect(&addr);
    let params = DecodeParams::with_k(1);
    let x = Expr::X;
    assert!(matches!(m.propose(&x, &params), Err(ModelError::MalformedResponse(_))));
    assert!(matches!(m.propose(&x, &params), Err(ModelError::ResponseTooLarge { len: 600, cap: 512 })));
    assert!(matches!(m.propose(&x, &params), Err(ModelError::ModelUnavailable(s)) if s.contains("bad request")));
    assert!(matches!(m.propose(&x, &params), Err(ModelError::MalformedResponse(_))));
    assert!(matches!(m.score(&x, &to_prefix(&x), &params), Err(ModelError::MalformedResponse(_))));
    let ok = m.propose(&x, &params).unwrap();
    assert_eq!(ok.candidates, vec![TokenSeq::from_strs(&["x"])]);
}

#[test]
fn unroutable_garbage_fails_waiting_calls() {
    let addr = serve(|line, w| {
        if line.contains(r#""id":"1""#) {
            send(&w, "not json at all");
        } else {
            let req: Request = serde_json::from_str(&line).unwrap();
            send(&w, &format!(r#"{{"id":"{}","candidates":[["x"]]}}"#, req.id));
        }
    });
    let m = connect(&addr);
    let params = DecodeParams::with_k(1);
    assert!(matches!(m.propose(&Expr::X, &params), Err(ModelError::MalformedResponse(_))));
    assert!(m.propose(&Expr::X, &params).is_ok());
}

#[test]
fn closed_stream_is_unavailable() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        let mut r = BufReader::new(stream);
        let mut line = String::new();
        let _ = r.read_line(&mut line);
    });
    let m = connect(&addr);
    let params = DecodeParams::with_k(1);
    assert!(matches!(m.propose(&Expr::X, &params), Err(ModelError::ModelUnavailable(_))));
    assert!(matches!(m.propose(&Expr::X, &params), Err(ModelError::ModelUnavailable(_))));
}

#[test]
fn refused_connection_is_unavailable() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let r = ExternalModel::connect(&Transport::Tcp(format!("127.0.0.1:{port}")));
    assert!(matches!(r, Err(ModelError::ModelUnavailable(_))));
}

const PY_STUB: &str = r#"
import json, sys
CANDIDATE = ["mul", "INT+", "3", "x"]
for line in sys.stdin:
    try:
        req = json.loads(line)
    except ValueError:
        continue
    if "id" not in req:
        print(json.dumps({"id": "", "error": "missing id"}), flush=True)
        continue
    if req.get("op") == "score":
        out = {"id": req["id"], "scores": [0.25]}
    else:
        out = {"id": req["id"], "candidates": [CANDIDATE], "scores": [0.5]}
    print(json.dumps(out), flush=True)
"#;

fn python3() -> bool {
    std::process::Command::new("python3")
        .arg("-c")
        .arg("pass")
        .status()
        .is_ok_and(|s| s.success())
}

#[test]
fn python_child_process_stub() {
    if !python3() {
        eprintln!("python3 not available; skipping");
        return;
    }
    let dir = std::env::temp_dir().join(format!("symint-stub-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let script = dir.join("stub.py");
    std::fs::write(&script, PY_STUB).unwrap();
    let m = ExternalModel::connect(&Transport::Command(format!("python3 {}", script.display()))).unwrap();
    let params = DecodeParams::with_k(3);
    let problem = parse_infix("3*x^2").unwrap();
    let l = m.propose(&problem, &params).unwrap();
    assert_eq!(l.candidates, vec![TokenSeq::from_strs(&["mul", "INT+", "3", "x"])]);
    assert_eq!(l.scores, Some(vec![0.5]));
    assert_eq!(m.score(&problem, &l.candidates[0], &params).unwrap(), Some(0.25));
    // 3x is not an antiderivative of 3x^2.
    assert_eq!(failure_indicator(&problem, &l, 3, &EquivConfig::default()), 1);
    assert_eq!(failure_indicator(&parse_infix("3").unwrap(), &l, 1, &EquivConfig::default()), 0);
    drop(m);
    let _ = std::fs::remove_dir_all(dir);
}
