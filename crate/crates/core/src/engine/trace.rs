//! Formation traces and their line-oriented file format.
//!
//! ```text
//! # formation-trace v1
//! # request=t1-s1 outcome=served
//! 0 0 0 t1-s1 ue ues=waiting
//! 1 1 1 t1-s1 tenant tenant=t1 home=L1
//! ```
//!
//! Event lines carry `seq_no tick step request_id actor` followed by the
//! payload as space-separated `key=value` pairs, in insertion order.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::ids::RequestId;

pub const TRACE_HEADER: &str = "# formation-trace v1";

/// A step of the formation sequence, 0 through 15.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct StepId(u8);

impl StepId {
    pub const MAX: u8 = 15;

    pub const fn new(step: u8) -> Option<Self> {
        if step <= Self::MAX {
            Some(Self(step))
        } else {
            None
        }
    }

    pub const fn get(self) -> u8 {
        self.0
    }

    pub fn all() -> impl Iterator<Item = StepId> {
        (0..=Self::MAX).map(StepId)
    }
}

impl fmt::Display for StepId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Shorthand for step constants inside the crate.
pub(crate) const fn step(n: u8) -> StepId {
    match StepId::new(n) {
        Some(s) => s,
        None => panic!("step out of range"),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Actor {
    Tenant,
    CommServiceProvider,
    Csmf,
    NetworkProvider,
    Nsmf,
    UoNssmf,
    MnoNssmf,
    MnoNsmf,
    Nf,
    Ue,
}

impl Actor {
    pub const ALL: [Actor; 10] = [
        Actor::Tenant,
        Actor::CommServiceProvider,
        Actor::Csmf,
        Actor::NetworkProvider,
        Actor::Nsmf,
        Actor::UoNssmf,
        Actor::MnoNssmf,
        Actor::MnoNsmf,
        Actor::Nf,
        Actor::Ue,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Actor::Tenant => "tenant",
            Actor::CommServiceProvider => "comm-service-provider",
            Actor::Csmf => "csmf",
            Actor::NetworkProvider => "network-provider",
            Actor::Nsmf => "nsmf",
            Actor::UoNssmf => "uo-nssmf",
            Actor::MnoNssmf => "mno-nssmf",
            Actor::MnoNsmf => "mno-nsmf",
            Actor::Nf => "nf",
            Actor::Ue => "ue",
        }
    }
}

impl fmt::Display for Actor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Actor {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Actor::ALL.into_iter().find(|a| a.as_str() == s).ok_or(())
    }
}

/// Ordered flat `key=value` record.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Payload(Vec<(String, String)>);

impl Payload {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, key: &str, value: impl fmt::Display) -> Self {
        self.0.push((key.to_owned(), value.to_string()));
        self
    }

    pub fn with_list<T: fmt::Display>(self, key: &str, values: impl IntoIterator<Item = T>) -> Self {
        let joined = values.into_iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",");
        self.with(key, joined)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.0
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TraceEvent {
    pub seq_no: u64,
    pub tick: u64,
    pub step: StepId,
    pub request_id: RequestId,
    pub actor: Actor,
    pub payload: Payload,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "reason")]
pub enum Outcome {
    Served,
    Rejected(String),
    Failed(String),
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Served => f.write_str("served"),
            Outcome::Rejected(r) => write!(f, "rejected:{r}"),
            Outcome::Failed(r) => write!(f, "failed:{r}"),
        }
    }
}

impl FromStr for Outcome {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            None if s == "served" => Ok(Outcome::Served),
            Some(("rejected", r)) if !r.is_empty() => Ok(Outcome::Rejected(r.to_owned())),
            Some(("failed", r)) if !r.is_empty() => Ok(Outcome::Failed(r.to_owned())),
            _ => Err(format!("bad outcome {s:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FormationTrace {
    pub request_id: RequestId,
    pub events: Vec<TraceEvent>,
    pub outcome: Outcome,
}

impl FormationTrace {
    pub fn steps(&self) -> impl Iterator<Item = StepId> + '_ {
        self.events.iter().map(|e| e.step)
    }

    pub fn contains_step(&self, step: u8) -> bool {
        self.events.iter().any(|e| e.step.get() == step)
    }

    pub fn max_step(&self) -> Option<StepId> {
        self.steps().max()
    }

    /// Ticks from the first event to the last.
    pub fn duration_ticks(&self) -> u64 {
        match (self.events.first(), self.events.last()) {
            (Some(a), Some(b)) => b.tick - a.tick,
            _ => 0,
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(TRACE_HEADER);
        out.push('\n');
        let _ = writeln!(out, "# request={} outcome={}", self.request_id, self.outcome);
        for e in &self.events {
            let _ = write!(out, "{} {} {} {} {}", e.seq_no, e.tick, e.step, e.request_id, e.actor);
            for (k, v) in e.payload.entries() {
                let _ = write!(out, " {k}={v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, TraceError> {
        let mut lines = text.lines().enumerate();
        let bad = |line: usize, detail: String| TraceError::Malformed { line: line + 1, detail };
        match lines.next() {
            Some((_, l)) if l == TRACE_HEADER => {}
            _ => return Err(bad(0, "missing trace header".to_owned())),
        }
        let (hdr_no, hdr) = lines.next().ok_or_else(|| bad(1, "missing request line".to_owned()))?;
        let hdr = hdr.strip_prefix("# ").ok_or_else(|| bad(hdr_no, "expected '# request=...'".to_owned()))?;
        let mut request_id = None;
        let mut outcome = None;
        for token in hdr.split(' ') {
            match token.split_once('=') {
                Some(("request", v)) => request_id = Some(RequestId::new(v)),
                Some(("outcome", v)) => outcome = Some(v.parse().map_err(|e| bad(hdr_no, e))?),
                _ => return Err(bad(hdr_no, format!("unexpected header token {token:?}"))),
            }
        }
        let request_id = request_id.ok_or_else(|| bad(hdr_no, "missing request".to_owned()))?;
        let outcome = outcome.ok_or_else(|| bad(hdr_no, "missing outcome".to_owned()))?;

        let mut events = Vec::new();
        for (no, line) in lines {
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split(' ');
            let mut field = |name: &str| parts.next().ok_or_else(|| bad(no, format!("missing {name}")));
            let seq_no = field("seq_no")?.parse().map_err(|_| bad(no, "bad seq_no".to_owned()))?;
            let tick = field("tick")?.parse().map_err(|_| bad(no, "bad tick".to_owned()))?;
            let step_raw: u8 = field("step")?.parse().map_err(|_| bad(no, "bad step".to_owned()))?;
            let step = StepId::new(step_raw).ok_or_else(|| bad(no, format!("step {step_raw} out of range")))?;
            let request = RequestId::new(field("request_id")?);
            let actor_raw = field("actor")?;
            let actor = actor_raw.parse().map_err(|_| bad(no, format!("unknown actor {actor_raw:?}")))?;
            let mut payload = Payload::new();
            for kv in parts {
                let (k, v) = kv.split_once('=').ok_or_else(|| bad(no, format!("bad payload entry {kv:?}")))?;
                if k.is_empty() {
                    return Err(bad(no, "empty payload key".to_owned()));
                }
                payload = payload.with(k, v);
            }
            events.push(TraceEvent { seq_no, tick, step, request_id: request, actor, payload });
        }
        Ok(FormationTrace { request_id, events, outcome })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TraceError {
    #[error("malformed trace at line {line}: {detail}")]
    Malformed { line: usize, detail: String },
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> FormationTrace {
        FormationTrace {
            request_id: "r1".into(),
            outcome: Outcome::Rejected("expired".into()),
            events: vec![
                TraceEvent {
                    seq_no: 0,
                    tick: 3,
                    step: step(0),
                    request_id: "r1".into(),
                    actor: Actor::Ue,
                    payload: Payload::new().with("ues", "waiting"),
                },
                TraceEvent {
                    seq_no: 1,
                    tick: 4,
                    step: step(1),
                    request_id: "r1".into(),
                    actor: Actor::Tenant,
                    payload: Payload::new().with_list("nfs", Vec::<String>::new()).with("x", 1),
                },
            ],
        }
    }

    #[test]
    fn text_format_is_stable() {
        let text = sample().to_text();
        assert_eq!(
            text,
            "# formation-trace v1\n# request=r1 outcome=rejected:expired\n0 3 0 r1 ue ues=waiting\n1 4 1 r1 tenant nfs= x=1\n"
        );
        assert_eq!(FormationTrace::parse(&text).unwrap(), sample());
    }

    #[test]
    fn malformed_inputs() {
        assert!(FormationTrace::parse("").is_err());
        assert!(FormationTrace::parse("# formation-trace v1\n").is_err());
        let base = "# formation-trace v1\n# request=r1 outcome=served\n";
        assert!(FormationTrace::parse(&format!("{base}0 0 16 r1 ue\n")).is_err());
        assert!(FormationTrace::parse(&format!("{base}0 0 1 r1 robot\n")).is_err());
        assert!(FormationTrace::parse(&format!("{base}0 0 1 r1 ue novalue\n")).is_err());
        assert!(FormationTrace::parse(&format!("{base}x 0 1 r1 ue\n")).is_err());
        assert!(FormationTrace::parse("# formation-trace v1\n# request=r1 outcome=maybe\n").is_err());
    }

    proptest! {
        #[test]
        fn parse_inverts_to_text(
            events in prop::collection::vec((0u8..=15, 0usize..10, prop::collection::vec(("[a-z_]{1,6}", "[A-Za-z0-9,./:-]{0,8}"), 0..4)), 0..20),
            outcome in prop_oneof![Just(Outcome::Served), "[a-z_]{1,10}".prop_map(Outcome::Rejected), "[a-z_]{1,10}".prop_map(Outcome::Failed)],
        ) {
            let trace = FormationTrace {
                request_id: "req-1".into(),
                outcome,
                events: events.into_iter().enumerate().map(|(i, (s, a, kv))| TraceEvent {
                    seq_no: i as u64,
                    tick: i as u64 * 2,
                    step: StepId::new(s).unwrap(),
                    request_id: "req-1".into(),
                    actor: Actor::ALL[a],
                    payload: kv.into_iter().fold(Payload::new(), |p, (k, v)| p.with(&k, v)),
                }).collect(),
            };
            prop_assert_eq!(FormationTrace::parse(&trace.to_text()).unwrap(), trace);
        }
    }
}
