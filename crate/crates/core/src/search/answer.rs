use std::collections::BTreeSet;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::query::{AnswerType, Query};
use crate::medner::Gazetteer;
use crate::text::{raw_tokens, sentence_spans};

pub const DEFAULT_ANSWER_THRESHOLD: f64 = 0.25;

/// Type-match factor applied to whole-sentence candidates when the query
/// expects a typed answer.
pub const UNTYPED_FALLBACK_FACTOR: f64 = 0.5;

/// A highlighted span inside a passage. Offsets are byte offsets into the
/// passage text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerSpan {
    pub char_start: usize,
    pub char_end: usize,
    pub text: String,
    pub confidence: f64,
}

const UNITS: &str = r"(?:seconds?|minutes?|hours?|days?|weeks?|months?|years?)";

fn temporal_patterns() -> &'static [Regex] {
    static RE: OnceLock<Vec<Regex>> = OnceLock::new();
    RE.get_or_init(|| {
        let range = format!(
            r"(?i)\b\d+(?:\.\d+)?(?:\s*(?:-|–|to|and)\s*\d+(?:\.\d+)?)?\s*{UNITS}\b"
        );
        let relative = format!(r"(?i)\b(?:the\s+)?(?:a\s+few\s+|several\s+)?{UNITS}\s+(?:before|after|prior\s+to|following)\s+\w+(?:\s+\w+)?");
        let ordinal = format!(r"(?i)\b(?:the\s+)?(?:first|second|third|fourth|fifth|last|final|\d+(?:st|nd|rd|th))\s+{UNITS}\b");
        [
            range.as_str(),
            relative.as_str(),
            ordinal.as_str(),
            r"(?i)\b(?:jan(?:uary)?|feb(?:ruary)?|mar(?:ch)?|apr(?:il)?|may|june?|july?|aug(?:ust)?|sep(?:tember)?|oct(?:ober)?|nov(?:ember)?|dec(?:ember)?)\.?\s+(?:\d{1,2},?\s+)?\d{4}\b",
            r"\b\d{4}-\d{2}-\d{2}\b",
            r"\b(?:19|20)\d{2}\b",
        ]
        .iter()
        .map(|p| Regex::new(p).expect("valid temporal pattern"))
        .collect()
    })
}

fn quantity_patterns() -> &'static [Regex] {
    static RE: OnceLock<Vec<Regex>> = OnceLock::new();
    RE.get_or_init(|| {
        [
            r"\b\d+(?:[.,]\d+)*\s*(?:%|percent\b|per\s+cent\b)",
            r"(?i)\b\d+(?:[.,]\d+)*\s*(?:mg|g|kg|µg|mcg|ml|l|mm|cm|m|iu|patients|cases|deaths|people|persons|individuals|subjects|participants|children|adults|samples|copies|fold|times)\b",
            r"(?i)\b\d+(?:[.,]\d+)*\s+(?:thousand|million|billion)\b",
        ]
        .iter()
        .map(|p| Regex::new(p).expect("valid quantity pattern"))
        .collect()
    })
}

struct Candidate {
    start: usize,
    end: usize,
    type_match: f64,
}

fn regex_candidates(patterns: &[Regex], text: &str) -> Vec<Candidate> {
    patterns
        .iter()
        .flat_map(|re| re.find_iter(text))
        .map(|m| Candidate {
            start: m.start(),
            end: m.end(),
            type_match: 1.0,
        })
        .collect()
}

/// Pick the best typed span in `passage` for the query.
///
/// Candidates are scored by the type-match factor times the fraction of the
/// query's focus terms found in the sentence containing the candidate. The
/// best candidate is returned when its score reaches `threshold`; ties go to
/// the earliest, then longest, span.
pub fn extract_answer(
    query: &Query,
    passage: &str,
    gazetteer: Option<&Gazetteer>,
    threshold: f64,
) -> Option<AnswerSpan> {
    let focus: BTreeSet<&str> = query.focus_terms.iter().map(String::as_str).collect();
    if focus.is_empty() {
        return None;
    }
    let sentences = sentence_spans(passage);
    let overlap: Vec<f64> = sentences
        .iter()
        .map(|&(s, e)| {
            let present: BTreeSet<String> = raw_tokens(&passage[s..e]).into_iter().map(|t| t.text).collect();
            focus.iter().filter(|f| present.contains(**f)).count() as f64 / focus.len() as f64
        })
        .collect();
    let sentence_of = |pos: usize| sentences.iter().position(|&(s, e)| pos >= s && pos < e);

    let mut candidates = match query.answer_type {
        AnswerType::Temporal => regex_candidates(temporal_patterns(), passage),
        AnswerType::Quantity => regex_candidates(quantity_patterns(), passage),
        AnswerType::EntityCategory(cat) => gazetteer
            .map(|g| {
                g.extract(passage)
                    .into_iter()
                    .filter(|m| m.category == cat)
                    .map(|m| Candidate {
                        start: m.char_start,
                        end: m.char_end,
                        type_match: 1.0,
                    })
                    .collect()
            })
            .unwrap_or_default(),
        AnswerType::Definition | AnswerType::None => Vec::new(),
    };
    let sentence_factor = match query.answer_type {
        AnswerType::Definition | AnswerType::None => 1.0,
        _ => UNTYPED_FALLBACK_FACTOR,
    };
    candidates.extend(sentences.iter().map(|&(s, e)| Candidate {
        start: s,
        end: e,
        type_match: sentence_factor,
    }));

    let mut best: Option<(f64, &Candidate)> = None;
    for c in &candidates {
        let Some(si) = sentence_of(c.start) else { continue };
        let score = c.type_match * overlap[si];
        let better = match best {
            None => true,
            Some((bs, bc)) => {
                score > bs || (score == bs && (c.start < bc.start || (c.start == bc.start && c.end > bc.end)))
            }
        };
        if better {
            best = Some((score, c));
        }
    }
    let (score, c) = best?;
    if score <= 0.0 || score < threshold {
        return None;
    }
    Some(AnswerSpan {
        char_start: c.start,
        char_end: c.end,
        text: passage[c.start..c.end].to_string(),
        confidence: score,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::Analyzer;

    fn query(raw: &str) -> Query {
        Query::parse(raw, None, BTreeSet::new(), Some(&gaz()), &Analyzer::default()).unwrap()
    }

    fn gaz() -> Gazetteer {
        Gazetteer::from_tsv(
            "ribavirin\tRX011\tMedication\nhiv protease inhibitors\tRX020\tMedication\n\
             corticosteroids\tRX021\tMedication\npneumonia\tMC002\tMedicalCondition\n",
        )
        .unwrap()
    }

    #[test]
    fn temporal_span_for_incubation_question() {
        let q = query("What is the incubation period of the virus?");
        let p = "Cases were reviewed. The virus had a median incubation period of 5-6 days in this cohort.";
        let a = extract_answer(&q, p, None, DEFAULT_ANSWER_THRESHOLD).unwrap();
        assert_eq!(a.text, "5-6 days");
        assert_eq!(&p[a.char_start..a.char_end], "5-6 days");
        assert!((a.confidence - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ranges_with_to_are_temporal() {
        let q = query("How long is the incubation?");
        let a = extract_answer(&q, "Incubation lasts 3 to 14 days.", None, 0.25).unwrap();
        assert_eq!(a.text, "3 to 14 days");
    }

    #[test]
    fn zero_overlap_means_no_answer() {
        let q = query("What is the incubation period of the virus?");
        assert!(extract_answer(&q, "Masks were distributed in 2020 over 3 days.", None, 0.25).is_none());
    }

    #[test]
    fn medication_question_picks_first_medication_mention() {
        let q = query("Which medications were most beneficial in the 2002 SARS outbreak?");
        let p = "Patients developed pneumonia. During the 2002 SARS outbreak treatment included ribavirin, \
                 HIV protease inhibitors, corticosteroids.";
        let a = extract_answer(&q, p, Some(&gaz()), 0.25).unwrap();
        assert_eq!(a.text, "ribavirin");
        assert!((a.confidence - 0.6).abs() < 1e-12);
    }

    #[test]
    fn quantity_spans() {
        let q = query("How many patients died of pneumonia?");
        let a = extract_answer(&q, "Of the cohort, 42 patients died of pneumonia.", None, 0.25).unwrap();
        assert_eq!(a.text, "42 patients");
    }

    #[test]
    fn definition_returns_best_sentence() {
        let q = query("What is a coronavirus?");
        let p = "Masks help. A coronavirus is an enveloped RNA virus. Vaccines exist.";
        let a = extract_answer(&q, p, None, 0.25).unwrap();
        assert_eq!(a.text, "A coronavirus is an enveloped RNA virus.");
    }
}
