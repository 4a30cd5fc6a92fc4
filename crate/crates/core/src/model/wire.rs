//! Messages of the line-delimited JSON protocol spoken with external
//! model processes.
//!
//! Request:
//! `{"id", "op": "propose"|"score", "prefix", "k", "beam", "strategy",
//! "temperature", "candidate"}` with `candidate` present for `score` only.
//! Response: `{"id", "candidates", "scores", "error"}`; all but `id` are
//! optional. Responses may arrive in any order.

use serde::{Deserialize, Serialize};

use super::{DecodeParams, Strategy};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Op {
    Propose,
    Score,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub id: String,
    pub op: Op,
    pub prefix: Vec<String>,
    pub k: usize,
    pub beam: usize,
    pub strategy: Strategy,
    pub temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidate: Option<Vec<String>>,
}

impl Request {
    pub fn new(id: String, op: Op, prefix: Vec<String>, params: &DecodeParams) -> Self {
        Request {
            id,
            op,
            prefix,
            k: params.k,
            beam: params.beam,
            strategy: params.strategy,
            temperature: params.temperature,
            candidate: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub id: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub candidates: Vec<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_shape() {
        let mut r = Request::new("7".into(), Op::Score, vec!["x".into()], &DecodeParams::default());
        r.candidate = Some(vec!["INT+".into(), "1".into()]);
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        assert_eq!(v["op"], "score");
        assert_eq!(v["strategy"], "beam");
        assert_eq!(v["beam"], 10);
        assert_eq!(v["candidate"][0], "INT+");
        let p = Request::new("8".into(), Op::Propose, vec![], &DecodeParams::default());
        assert!(serde_json::to_value(&p).unwrap().get("candidate").is_none());
    }

    #[test]
    fn response_optional_fields() {
        let r: Response = serde_json::from_str(r#"{"id":"3"}"#).unwrap();
        assert!(r.candidates.is_empty() && r.scores.is_none() && r.error.is_none());
        let r: Response =
            serde_json::from_str(r#"{"id":"4","candidates":[["x"]],"scores":[0.5]}"#).unwrap();
        assert_eq!(r.candidates, vec![vec!["x".to_string()]]);
    }
}
