//! Helpers shared by the integration tests: a fake log-likelihood service
//! and a deterministic synthetic corpus.
#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;

use kgrank::Record;
use kgrank_core::{CandidateSet, DecodeMeta, DialogueExample, Speaker, Utterance};
use proptest::prelude::*;
use proptest::strategy::ValueTree;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use serde_json::{json, Value};

pub type Handler = dyn Fn(&str, &str, &[u8]) -> (u16, String) + Send + Sync;

/// Minimal HTTP/1.1 server answering each connection with one response.
pub struct FakeService {
    pub base: String,
    pub hits: Arc<AtomicUsize>,
}

impl FakeService {
    pub fn start(handler: impl Fn(&str, &str, &[u8]) -> (u16, String) + Send + Sync + 'static) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let base = format!("http://{}", listener.local_addr().unwrap());
        let hits = Arc::new(AtomicUsize::new(0));
        let handler: Arc<Handler> = Arc::new(handler);
        let counter = hits.clone();
        thread::spawn(move || {
            for stream in listener.incoming().flatten() {
                let h = handler.clone();
                let c = counter.clone();
                thread::spawn(move || serve(stream, &*h, &c));
            }
        });
        FakeService { base, hits }
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }
}

fn serve(stream: TcpStream, handler: &Handler, hits: &AtomicUsize) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut out = stream;
    loop {
        let mut request_line = String::new();
        if reader.read_line(&mut request_line).unwrap_or(0) == 0 {
            return;
        }
        let mut parts = request_line.split_whitespace();
        let method = parts.next().unwrap_or("").to_string();
        let path = parts.next().unwrap_or("").to_string();
        let mut len = 0usize;
        loop {
            let mut h = String::new();
            if reader.read_line(&mut h).unwrap_or(0) == 0 {
                return;
            }
            let h = h.trim_end();
            if h.is_empty() {
                break;
            }
            if let Some((k, v)) = h.split_once(':') {
                if k.eq_ignore_ascii_case("content-length") {
                    len = v.trim().parse().unwrap_or(0);
                }
            }
        }
        let mut body = vec![0u8; len];
        if reader.read_exact(&mut body).is_err() {
            return;
        }
        hits.fetch_add(1, Ordering::SeqCst);
        let (status, reply) = handler(&method, &path, &body);
        let reason = match status {
            200 => "OK",
            400 => "Bad Request",
            503 => "Service Unavailable",
            _ => "Error",
        };
        let resp = format!(
            "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\n\r\n{reply}",
            reply.len()
        );
        if out.write_all(resp.as_bytes()).is_err() {
            return;
        }
    }
}

fn neg_len(req: &Value) -> Option<f64> {
    let f = req.get("followup")?.as_str()?;
    Some(-(f.chars().count() as f64))
}

/// Implements the service protocol with log-likelihood = −(follow-up chars).
pub fn neg_length_handler(method: &str, path: &str, body: &[u8]) -> (u16, String) {
    let Ok(v) = serde_json::from_slice::<Value>(body) else {
        return (400, json!({"error": "bad json"}).to_string());
    };
    match (method, path) {
        ("POST", "/v1/loglik") => match neg_len(&v) {
            Some(x) => (200, json!({"log_likelihood": x}).to_string()),
            None => (400, "{}".into()),
        },
        ("POST", "/v1/loglik_batch") => {
            let Some(items) = v.as_array() else {
                return (400, "{}".into());
            };
            let out: Option<Vec<Value>> = items
                .iter()
                .map(|r| neg_len(r).map(|x| json!({"log_likelihood": x})))
                .collect();
            match out {
                Some(o) => (200, Value::Array(o).to_string()),
                None => (400, "{}".into()),
            }
        }
        _ => (404, "{}".into()),
    }
}

const VOCAB: [&str; 24] = [
    "river", "stone", "green", "runs", "music", "album", "singer", "band", "record", "years", "city", "famous",
    "known", "first", "world", "people", "game", "team", "played", "water", "north", "large", "often", "called",
];

pub fn sample<S: Strategy>(s: S, runner: &mut TestRunner) -> S::Value {
    s.new_tree(runner).unwrap().current()
}

pub fn runner(seed: u8) -> TestRunner {
    TestRunner::new_with_rng(Config::default(), TestRng::from_seed(RngAlgorithm::ChaCha, &[seed; 32]))
}

pub fn words(min: usize, max: usize) -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(VOCAB.to_vec()), min..=max).prop_map(|w| w.join(" "))
}

/// A candidate that is sometimes degenerate: an overlong token, a
/// repetition run, or punctuation only.
pub fn candidate() -> impl Strategy<Value = String> {
    prop_oneof![
        6 => words(1, 12),
        1 => (words(0, 5), "[a-z]{31,40}").prop_map(|(w, long)| format!("{w} {long}")),
        1 => (words(0, 4), prop::sample::select(VOCAB.to_vec())).prop_map(|(w, r)| format!("{w} {r} {r} {r}")),
        1 => Just("?!".to_string()),
    ]
}

pub fn example(id: &str, knowledge: String, gold: Option<String>) -> DialogueExample {
    DialogueExample {
        id: id.into(),
        topic: "synthetic".into(),
        knowledge,
        history: vec![
            Utterance::new(Speaker::User, "tell me something"),
            Utterance::new(Speaker::System, "what would you like to know"),
            Utterance::new(Speaker::User, "anything about the river"),
        ],
        gold_response: gold,
        turn_index: 2,
    }
}

pub fn record(line: usize, example: DialogueExample, candidates: Vec<String>) -> Record {
    let r = candidates.len();
    Record {
        line,
        example,
        pool: CandidateSet::new(candidates, DecodeMeta::beam(r)).unwrap(),
    }
}

/// `n` records with 1..=8 candidates each, fully determined by `seed`.
pub fn synthetic_corpus(n: usize, seed: u8) -> Vec<Record> {
    let mut rng = runner(seed);
    (0..n)
        .map(|i| {
            let knowledge = sample(words(5, 20), &mut rng);
            let gold = sample(words(3, 12), &mut rng);
            let cands = sample(prop::collection::vec(candidate(), 1..=8), &mut rng);
            record(i + 1, example(&format!("syn-{i}"), knowledge, Some(gold)), cands)
        })
        .collect()
}
