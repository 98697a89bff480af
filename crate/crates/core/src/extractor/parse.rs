use serde::{Deserialize, Serialize};

use super::prompt::PromptConfig;
use crate::triplet::{dedup_triplets, normalize_text, DiseaseTriplet};

/// Placeholders a model may emit for a missing severity or location.
const ABSENT_MARKERS: &[&str] = &["none", "n/a", "na", "null", "-", "unknown", "unspecified"];

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseOutcome {
    pub triplets: Vec<DiseaseTriplet>,
    /// Non-empty lines that did not yield a triplet.
    pub skipped_lines: usize,
}

fn strip_list_marker(line: &str) -> &str {
    let line = line.trim();
    for bullet in ["- ", "* ", "• "] {
        if let Some(rest) = line.strip_prefix(bullet) {
            return rest.trim_start();
        }
    }
    let digits = line.bytes().take_while(u8::is_ascii_digit).count();
    if digits > 0 {
        let rest = &line[digits..];
        if let Some(r) = rest.strip_prefix(". ").or_else(|| rest.strip_prefix(") ")) {
            return r.trim_start();
        }
    }
    line
}

fn optional_field(raw: &str) -> Option<String> {
    let norm = normalize_text(raw);
    if norm.is_empty() || ABSENT_MARKERS.contains(&norm.as_str()) {
        None
    } else {
        Some(norm)
    }
}

/// Parse a model response in the line grammar. Total: arbitrary text never
/// fails, it only adds to `skipped_lines`.
pub fn parse_llm_response(response_text: &str, config: &PromptConfig) -> ParseOutcome {
    let delim = config.output_grammar.delimiter;
    let mut triplets = Vec::new();
    let mut skipped = 0;
    for raw in response_text.lines() {
        let line = strip_list_marker(raw);
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(delim).collect();
        if fields.len() != 3 {
            skipped += 1;
            continue;
        }
        let severity = optional_field(fields[0]);
        let location = optional_field(fields[1]);
        match DiseaseTriplet::new(severity.as_deref(), location.as_deref(), fields[2]) {
            Ok(t) => triplets.push(t),
            Err(_) => skipped += 1,
        }
    }
    let mut triplets = dedup_triplets(triplets);
    triplets.truncate(config.max_triplets);
    ParseOutcome {
        triplets,
        skipped_lines: skipped,
    }
}

/// Inverse of [`parse_llm_response`] for valid triplet lists.
pub fn render_response(triplets: &[DiseaseTriplet]) -> String {
    triplets
        .iter()
        .map(DiseaseTriplet::to_pipe)
        .collect::<Vec<_>>()
        .join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(s: Option<&str>, l: Option<&str>, c: &str) -> DiseaseTriplet {
        DiseaseTriplet::new(s, l, c).unwrap()
    }

    #[test]
    fn parses_two_lines() {
        let out = parse_llm_response(
            "mild|left-sided|pneumonia\n||pleural effusion",
            &PromptConfig::default(),
        );
        assert_eq!(
            out.triplets,
            vec![
                t(Some("mild"), Some("left-sided"), "pneumonia"),
                t(None, None, "pleural effusion")
            ]
        );
        assert_eq!(out.skipped_lines, 0);
    }

    #[test]
    fn missing_category_is_dropped_and_counted() {
        let out = parse_llm_response("severe|right|", &PromptConfig::default());
        assert!(out.triplets.is_empty());
        assert_eq!(out.skipped_lines, 1);
    }

    #[test]
    fn empty_input() {
        let out = parse_llm_response("", &PromptConfig::default());
        assert_eq!(out, ParseOutcome::default());
    }

    #[test]
    fn tolerates_chatter_bullets_and_placeholders() {
        let out = parse_llm_response(
            "Here are the findings:\n- Moderate | none | Pleural Effusions\n2. ||Atelectasis\n```",
            &PromptConfig::default(),
        );
        assert_eq!(
            out.triplets,
            vec![t(Some("moderate"), None, "pleural effusion"), t(None, None, "atelectasis")]
        );
        assert_eq!(out.skipped_lines, 2);
    }

    #[test]
    fn dedups_and_caps() {
        let config = PromptConfig {
            max_triplets: 2,
            ..PromptConfig::default()
        };
        let out = parse_llm_response("||a\n||A\n||b\n||c", &config);
        assert_eq!(out.triplets, vec![t(None, None, "a"), t(None, None, "b")]);
    }

    #[test]
    fn wrong_field_count_is_skipped() {
        let out = parse_llm_response("a|b\na|b|c|d", &PromptConfig::default());
        assert!(out.triplets.is_empty());
        assert_eq!(out.skipped_lines, 2);
    }
}
