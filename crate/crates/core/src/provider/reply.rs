//! Parsing model replies against the JSON contracts the prompts ask for.
//!
//! A reply may be wrapped in whitespace or a single Markdown code fence.
//! Anything else around the JSON object is a parse failure.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::compose::{FactIssue, IssueType};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schema {
    NextQuestion,
    FactCheck,
    Tone,
    Dependency,
    PlainText,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DependencyStatus {
    Affected,
    Unaffected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependencyVerdict {
    pub question_id: u64,
    pub question: String,
    pub status: DependencyStatus,
    pub reasoning: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Parsed {
    NextQuestion { question: String, followup_needed: bool },
    FactCheck { passed: bool, issues: Vec<FactIssue> },
    Tone { tone: String, reasoning: String },
    Dependency { affected_questions: Vec<DependencyVerdict>, summary: String },
    PlainText { text: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuredReply {
    pub raw_text: String,
    pub parsed: Parsed,
}

/// Removes surrounding whitespace and one enclosing code fence.
pub fn strip_fences(raw: &str) -> &str {
    let trimmed = raw.trim();
    let Some(rest) = trimmed.strip_prefix("```") else {
        return trimmed;
    };
    let Some(body) = rest.strip_suffix("```") else {
        return trimmed;
    };
    // Drop an info string such as `json` on the opening line.
    let body = match body.find('\n') {
        Some(nl) if body[..nl].trim().chars().all(|c| c.is_ascii_alphanumeric()) => &body[nl + 1..],
        _ => body,
    };
    body.trim()
}

pub fn parse(schema: Schema, raw: &str) -> Result<Parsed, String> {
    if schema == Schema::PlainText {
        return Ok(Parsed::PlainText { text: raw.to_owned() });
    }
    let body = strip_fences(raw);
    let value: Value = serde_json::from_str(body).map_err(|e| format!("not a JSON object: {e}"))?;
    let obj = value.as_object().ok_or("reply is not a JSON object")?;

    match schema {
        Schema::NextQuestion => {
            let followup_needed = obj
                .get("followup_needed")
                .and_then(Value::as_bool)
                .ok_or("followup_needed must be a boolean")?;
            let question = match obj.get("question") {
                Some(Value::String(s)) => s.trim().to_owned(),
                Some(Value::Null) | None => String::new(),
                Some(_) => return Err("question must be a string".into()),
            };
            if followup_needed && question.is_empty() {
                return Err("followup_needed is true but question is empty".into());
            }
            Ok(Parsed::NextQuestion { question, followup_needed })
        }
        Schema::FactCheck => {
            let passed = obj
                .get("passed")
                .and_then(Value::as_bool)
                .ok_or("passed must be a boolean")?;
            let issues = match obj.get("issues") {
                None | Some(Value::Null) => Vec::new(),
                Some(Value::Array(items)) => items.iter().map(parse_issue).collect::<Result<_, _>>()?,
                Some(_) => return Err("issues must be an array".into()),
            };
            Ok(Parsed::FactCheck { passed, issues })
        }
        Schema::Tone => {
            let tone = obj
                .get("tone")
                .and_then(Value::as_str)
                .ok_or("tone must be a string")?
                .trim()
                .to_owned();
            let reasoning = obj.get("reasoning").and_then(Value::as_str).unwrap_or_default().to_owned();
            Ok(Parsed::Tone { tone, reasoning })
        }
        Schema::Dependency => {
            let items = obj
                .get("affectedQuestions")
                .and_then(Value::as_array)
                .ok_or("affectedQuestions must be an array")?;
            let affected_questions = items.iter().map(parse_verdict).collect::<Result<_, _>>()?;
            let summary = obj.get("summary").and_then(Value::as_str).unwrap_or_default().to_owned();
            Ok(Parsed::Dependency { affected_questions, summary })
        }
        Schema::PlainText => unreachable!(),
    }
}

fn parse_issue(value: &Value) -> Result<FactIssue, String> {
    let obj = value.as_object().ok_or("issue is not an object")?;
    let kind = obj.get("type").and_then(Value::as_str).ok_or("issue type missing")?;
    let issue_type = match kind.trim().to_lowercase().as_str() {
        "missing" => IssueType::Missing,
        "inconsistent" => IssueType::Inconsistent,
        "inaccurate" => IssueType::Inaccurate,
        "unsupported" => IssueType::Unsupported,
        other => return Err(format!("unknown issue type {other:?}")),
    };
    let detail = obj.get("detail").and_then(Value::as_str).unwrap_or_default().trim().to_owned();
    if detail.is_empty() {
        return Err("issue detail is empty".into());
    }
    let qa_reference = match obj.get("qa_reference") {
        Some(Value::String(s)) => s.clone(),
        Some(Value::Null) | None => String::new(),
        Some(other) => other.to_string(),
    };
    Ok(FactIssue { issue_type, detail, qa_reference })
}

fn parse_verdict(value: &Value) -> Result<DependencyVerdict, String> {
    let obj = value.as_object().ok_or("verdict is not an object")?;
    let question_id = match obj.get("questionId") {
        Some(Value::Number(n)) => n.as_u64().ok_or("questionId must be a non-negative integer")?,
        Some(Value::String(s)) => s
            .trim()
            .trim_start_matches(['Q', 'q'])
            .parse()
            .map_err(|_| format!("questionId {s:?} is not numeric"))?,
        _ => return Err("questionId missing".into()),
    };
    let status = match obj.get("status").and_then(Value::as_str).map(|s| s.trim().to_uppercase()) {
        Some(s) if s == "AFFECTED" => DependencyStatus::Affected,
        Some(s) if s == "UNAFFECTED" => DependencyStatus::Unaffected,
        _ => return Err("status must be AFFECTED or UNAFFECTED".into()),
    };
    Ok(DependencyVerdict {
        question_id,
        question: obj.get("question").and_then(Value::as_str).unwrap_or_default().to_owned(),
        status,
        reasoning: obj.get("reasoning").and_then(Value::as_str).unwrap_or_default().to_owned(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fences_are_tolerated() {
        let raw = "```json\n{\"question\":\"Who?\",\"followup_needed\":true}\n```\n";
        assert_eq!(
            parse(Schema::NextQuestion, raw).unwrap(),
            Parsed::NextQuestion { question: "Who?".into(), followup_needed: true }
        );
        assert_eq!(strip_fences("```\n{}\n```"), "{}");
        assert_eq!(strip_fences("  {}  "), "{}");
    }

    #[test]
    fn prose_around_json_is_rejected() {
        assert!(parse(Schema::NextQuestion, "Sure! {\"question\":\"a\",\"followup_needed\":true}").is_err());
        assert!(parse(Schema::NextQuestion, "I think we are done.").is_err());
    }

    #[test]
    fn followup_needs_a_question() {
        assert!(parse(Schema::NextQuestion, r#"{"question":"","followup_needed":true}"#).is_err());
        assert!(parse(Schema::NextQuestion, r#"{"question":"","followup_needed":false}"#).is_ok());
    }

    #[test]
    fn fact_check_issues() {
        let raw = r#"{"passed":false,"issues":[{"type":"Missing","detail":"no date","qa_reference":"Q2"}]}"#;
        let Parsed::FactCheck { passed, issues } = parse(Schema::FactCheck, raw).unwrap() else {
            panic!()
        };
        assert!(!passed);
        assert_eq!(issues[0].issue_type, IssueType::Missing);
        assert!(parse(Schema::FactCheck, r#"{"passed":false,"issues":[{"type":"wrong","detail":"x"}]}"#).is_err());
    }

    #[test]
    fn dependency_ids_accept_strings() {
        let raw = r#"{"affectedQuestions":[{"questionId":"Q3","question":"q","status":"affected","reasoning":"r"},{"questionId":4,"status":"UNAFFECTED"}],"summary":"s"}"#;
        let Parsed::Dependency { affected_questions, .. } = parse(Schema::Dependency, raw).unwrap() else {
            panic!()
        };
        assert_eq!(affected_questions[0].question_id, 3);
        assert_eq!(affected_questions[0].status, DependencyStatus::Affected);
        assert_eq!(affected_questions[1].status, DependencyStatus::Unaffected);
    }
}
