use serde::{Deserialize, Serialize};

/// Wire form of an audit request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditRequest {
    pub question: String,
    pub reference_answer: String,
    pub solution_text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditVerdict {
    pub quality: f64,
}

/// Grades a submitted solution with a quality in `[0, 1]`.
///
/// Implementations backed by remote judges must still present this
/// synchronous contract to the engine.
pub trait Auditor: Send + Sync {
    fn judge(&self, question: &str, reference_answer: &str, solution_text: &str) -> f64;

    fn judge_request(&self, req: &AuditRequest) -> AuditVerdict {
        let q = self.judge(&req.question, &req.reference_answer, &req.solution_text);
        AuditVerdict {
            quality: q.clamp(0.0, 1.0),
        }
    }
}

/// Exact match after normalization.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExactMatchAuditor;

impl Auditor for ExactMatchAuditor {
    fn judge(&self, _question: &str, reference_answer: &str, solution_text: &str) -> f64 {
        let sol = normalize(solution_text);
        if !sol.is_empty() && sol == normalize(reference_answer) {
            1.0
        } else {
            0.0
        }
    }
}

/// Trim, lowercase, collapse whitespace, strip trailing punctuation.
pub fn normalize(s: &str) -> String {
    let collapsed = s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
    collapsed
        .trim_end_matches(|c: char| c.is_ascii_punctuation() && c != ')' && c != ']')
        .trim_end()
        .to_string()
}
