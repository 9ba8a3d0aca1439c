//! Replays recorded responses in order, with no network involved. Point it at
//! the audit directory of a previous run to reproduce that run's decisions
//! exactly, or hand it literal responses in tests.

use std::collections::VecDeque;
use std::fs;
use std::path::Path;
use std::sync::Mutex;

use crate::dsl::{
    parse_agent_response, parse_judge_response, parse_verification_response, AgentReply,
    VerificationVerdict,
};

use super::{JudgeVerdict, Policy, PolicyError, PolicyRequest, Proposals};

pub struct ReplayPolicy {
    responses: Mutex<VecDeque<String>>,
}

impl ReplayPolicy {
    pub fn from_responses<I, S>(responses: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        ReplayPolicy {
            responses: Mutex::new(responses.into_iter().map(Into::into).collect()),
        }
    }

    /// Loads the `call_*.response.txt` transcripts of an audited run. The
    /// call counter in the file names restores the original order.
    pub fn from_run_dir(dir: &Path) -> std::io::Result<Self> {
        let mut files: Vec<_> = fs::read_dir(dir)?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|path| {
                path.file_name()
                    .and_then(|name| name.to_str())
                    .is_some_and(|name| {
                        name.starts_with("call_") && name.ends_with(".response.txt")
                    })
            })
            .collect();
        files.sort();
        let responses = files
            .iter()
            .map(fs::read_to_string)
            .collect::<std::io::Result<VecDeque<_>>>()?;
        Ok(ReplayPolicy {
            responses: Mutex::new(responses),
        })
    }

    pub fn remaining(&self) -> usize {
        self.responses.lock().expect("replay queue lock").len()
    }

    fn next(&self) -> Result<String, PolicyError> {
        self.responses
            .lock()
            .expect("replay queue lock")
            .pop_front()
            .ok_or(PolicyError::ReplayExhausted)
    }
}

impl Policy for ReplayPolicy {
    fn name(&self) -> &str {
        "replay"
    }

    fn propose(&self, _request: &PolicyRequest) -> Result<Proposals, PolicyError> {
        Proposals::from_response(&self.next()?)
    }

    fn verify(&self, _request: &PolicyRequest) -> Result<VerificationVerdict, PolicyError> {
        Ok(parse_verification_response(&self.next()?)?)
    }

    fn select(&self, _request: &PolicyRequest) -> Result<AgentReply, PolicyError> {
        Ok(parse_agent_response(&self.next()?))
    }

    fn advance(&self, _request: &PolicyRequest) -> Result<AgentReply, PolicyError> {
        Ok(parse_agent_response(&self.next()?))
    }

    fn judge(&self, _request: &PolicyRequest) -> Result<JudgeVerdict, PolicyError> {
        let (passed, rationale) = parse_judge_response(&self.next()?)?;
        Ok(JudgeVerdict { passed, rationale })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{Action, Continuation};
    use crate::policy::RequestKind;

    fn empty_request(kind: RequestKind) -> PolicyRequest {
        PolicyRequest::new(kind, Vec::new())
    }

    #[test]
    fn replays_in_order_until_exhausted() {
        let policy = ReplayPolicy::from_responses([
            "\\boxed{click[0]}",
            "\\boxed{Yes} \\terminate{Continue} a panel opened",
        ]);
        assert_eq!(policy.remaining(), 2);

        let proposals = policy.propose(&empty_request(RequestKind::Propose)).unwrap();
        assert_eq!(proposals.sequences[0].actions, vec![Action::Click(0)]);

        let verdict = policy.verify(&empty_request(RequestKind::Verify)).unwrap();
        assert!(verdict.pass);
        assert_eq!(verdict.terminate, Continuation::Continue);

        let err = policy.propose(&empty_request(RequestKind::Propose)).unwrap_err();
        assert!(matches!(err, PolicyError::ReplayExhausted));
    }

    #[test]
    fn run_dir_transcripts_replay_in_call_order() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("call_0002_verify.response.txt"),
            "\\boxed{No} \\terminate{Complete}",
        )
        .unwrap();
        std::fs::write(
            dir.path().join("call_0001_propose.response.txt"),
            "\\boxed{enter[0][hi]}",
        )
        .unwrap();
        std::fs::write(dir.path().join("call_0001_propose.txt"), "prompt text").unwrap();

        let policy = ReplayPolicy::from_run_dir(dir.path()).unwrap();
        assert_eq!(policy.remaining(), 2, "prompt transcripts are not responses");
        let proposals = policy.propose(&empty_request(RequestKind::Propose)).unwrap();
        assert_eq!(
            proposals.sequences[0].actions,
            vec![Action::Enter(0, "hi".into())]
        );
        let verdict = policy.verify(&empty_request(RequestKind::Verify)).unwrap();
        assert!(!verdict.pass);
    }
}
