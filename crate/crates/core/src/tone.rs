//! The fourteen-tone schema used for classification and drafting.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ToneLabel {
    Formal,
    Informal,
    Friendly,
    Diplomatic,
    Urgent,
    Concerned,
    Optimistic,
    Curious,
    Encouraging,
    Surprised,
    Cooperative,
    Empathetic,
    Apologetic,
    Assertive,
}

#[derive(Debug, Deserialize)]
struct ToneDefinition {
    name: String,
    description: String,
}

const DEFINITIONS_JSON: &str = include_str!("../data/tones.json");

fn definitions() -> &'static HashMap<String, String> {
    static DEFS: OnceLock<HashMap<String, String>> = OnceLock::new();
    DEFS.get_or_init(|| {
        let list: Vec<ToneDefinition> = serde_json::from_str(DEFINITIONS_JSON).expect("tones.json is valid");
        list.into_iter().map(|d| (d.name, d.description)).collect()
    })
}

impl ToneLabel {
    pub const ALL: [ToneLabel; 14] = [
        ToneLabel::Formal,
        ToneLabel::Informal,
        ToneLabel::Friendly,
        ToneLabel::Diplomatic,
        ToneLabel::Urgent,
        ToneLabel::Concerned,
        ToneLabel::Optimistic,
        ToneLabel::Curious,
        ToneLabel::Encouraging,
        ToneLabel::Surprised,
        ToneLabel::Cooperative,
        ToneLabel::Empathetic,
        ToneLabel::Apologetic,
        ToneLabel::Assertive,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ToneLabel::Formal => "formal",
            ToneLabel::Informal => "informal",
            ToneLabel::Friendly => "friendly",
            ToneLabel::Diplomatic => "diplomatic",
            ToneLabel::Urgent => "urgent",
            ToneLabel::Concerned => "concerned",
            ToneLabel::Optimistic => "optimistic",
            ToneLabel::Curious => "curious",
            ToneLabel::Encouraging => "encouraging",
            ToneLabel::Surprised => "surprised",
            ToneLabel::Cooperative => "cooperative",
            ToneLabel::Empathetic => "empathetic",
            ToneLabel::Apologetic => "apologetic",
            ToneLabel::Assertive => "assertive",
        }
    }

    /// Definitional paragraph for the tone.
    pub fn description(self) -> &'static str {
        definitions()
            .get(self.name())
            .map(String::as_str)
            .expect("every tone has a definition")
    }

    /// Name-and-definition list injected into the classification prompt.
    pub fn category_listing() -> String {
        ToneLabel::ALL
            .iter()
            .map(|t| format!("- {}: {}", t.name(), t.description()))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

impl fmt::Display for ToneLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownTone(pub String);

impl fmt::Display for UnknownTone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown tone {:?}", self.0)
    }
}

impl std::error::Error for UnknownTone {}

impl FromStr for ToneLabel {
    type Err = UnknownTone;

    /// Case-insensitive; surrounding whitespace and punctuation are ignored.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s
            .trim()
            .trim_matches(|c: char| !c.is_alphanumeric())
            .to_lowercase();
        ToneLabel::ALL
            .into_iter()
            .find(|t| t.name() == key)
            .ok_or_else(|| UnknownTone(s.to_owned()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fourteen_tones_with_definitions() {
        assert_eq!(definitions().len(), 14);
        for tone in ToneLabel::ALL {
            assert!(!tone.description().is_empty());
            assert_eq!(tone.name().parse::<ToneLabel>().unwrap(), tone);
        }
    }

    #[test]
    fn parsing_is_lenient_about_case() {
        assert_eq!("Apologetic".parse::<ToneLabel>().unwrap(), ToneLabel::Apologetic);
        assert_eq!(" URGENT ".parse::<ToneLabel>().unwrap(), ToneLabel::Urgent);
        assert!("sarcastic".parse::<ToneLabel>().is_err());
    }

    #[test]
    fn descriptions_are_verbatim() {
        assert!(ToneLabel::Apologetic.description().starts_with("An apologetic tone takes responsibility"));
        assert!(ToneLabel::category_listing().contains("- assertive: An assertive tone"));
    }
}
