use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::GenerationError;
use crate::corpus::{HDS_MAX, HDS_MIN};

/// Fixed system message sent with every generation request.
pub const SYSTEM_MESSAGE: &str = "You generate natural Japanese spoken monologues.";

/// User-message template. `{written_text}`, `{style_name}`,
/// `{style_description}` and `{score}` are substituted at render time.
pub const USER_TEMPLATE: &str = "Convert the written Japanese text into an ORAL monologue.
Do NOT copy sentences. Keep only the meaning.

Written text:
---
{written_text}
---

Target style: {style_name}
Style description: {style_description}

Adapt fluency based on Hasegawa Dementia Scale score = {score}:
- 28-30: fluent, well-structured, richer vocabulary
- 25-27: mild hesitations, slightly simpler sentences
- 22-24: slower rhythm, simpler phrasing, occasional hesitations,
         slightly vague or less detailed expression

Constraints:
- Produce a monologue between 150 and 1300 Japanese characters.
- Add natural speech markers (e.g., etto, sono, ano)
- Avoid near-duplicates
- Output ONLY the monologue.";

/// The seven stylistic configurations, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Style {
    Conversational,
    Emotional,
    Fragmented,
    Storytelling,
    Concise,
    Humorous,
    StructuralParaphrase,
}

impl Style {
    pub const ALL: [Style; 7] = [
        Style::Conversational,
        Style::Emotional,
        Style::Fragmented,
        Style::Storytelling,
        Style::Concise,
        Style::Humorous,
        Style::StructuralParaphrase,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Style::Conversational => "conversational",
            Style::Emotional => "emotional",
            Style::Fragmented => "fragmented",
            Style::Storytelling => "storytelling",
            Style::Concise => "concise",
            Style::Humorous => "humorous",
            Style::StructuralParaphrase => "structural_paraphrase",
        }
    }

    /// Description string injected into the prompt.
    pub fn description(self) -> &'static str {
        match self {
            Style::Conversational => "Fluent conversational retelling, natural and relaxed tone.",
            Style::Emotional => "More emotional and reflective, slight introspection.",
            Style::Fragmented => {
                "Spoken style with short segments, occasional breaks in rhythm, but still clear and coherent."
            }
            Style::Storytelling => "Chronological story-like narration with light details.",
            Style::Concise => "Simplified, concise spoken Japanese with short sentences.",
            Style::Humorous => "Slightly humorous or playful, with light jokes or witty expressions.",
            Style::StructuralParaphrase => {
                "Preserves meaning and information density while reorganising sentence structure using similar vocabulary."
            }
        }
    }

    pub fn spec(self) -> StyleSpec {
        StyleSpec {
            style: self,
            description: self.description(),
        }
    }
}

impl fmt::Display for Style {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Style {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Style::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| format!("unknown style {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StyleSpec {
    pub style: Style,
    pub description: &'static str,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FluencyBand {
    /// 28–30
    High,
    /// 25–27
    Mid,
    /// 22–24
    Low,
}

impl FluencyBand {
    pub fn description(self) -> &'static str {
        match self {
            FluencyBand::High => "fluent, well-structured, richer vocabulary",
            FluencyBand::Mid => "mild hesitations, slightly simpler sentences",
            FluencyBand::Low => {
                "slower rhythm, simpler phrasing, occasional hesitations, slightly vague or less detailed expression"
            }
        }
    }

    pub fn score_range(self) -> (i32, i32) {
        match self {
            FluencyBand::High => (28, 30),
            FluencyBand::Mid => (25, 27),
            FluencyBand::Low => (22, 24),
        }
    }
}

pub fn fluency_band(hds_score: i32) -> Result<FluencyBand, GenerationError> {
    match hds_score {
        28..=30 => Ok(FluencyBand::High),
        25..=27 => Ok(FluencyBand::Mid),
        22..=24 => Ok(FluencyBand::Low),
        other => Err(GenerationError::ScoreOutOfRange(other)),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedPrompt {
    pub system: String,
    pub user: String,
}

impl RenderedPrompt {
    /// Content hash identifying this exact request.
    pub fn hash(&self) -> String {
        prompt_hash(&self.system, &self.user)
    }
}

pub fn prompt_hash(system: &str, user: &str) -> String {
    crate::hashing::sha256_hex_parts(&[system.as_bytes(), user.as_bytes()])
}

pub fn render_prompt(written_text: &str, hds_score: i32, style: Style) -> Result<RenderedPrompt, GenerationError> {
    if written_text.trim().is_empty() {
        return Err(GenerationError::EmptyWrittenText);
    }
    if !(HDS_MIN..=HDS_MAX).contains(&hds_score) {
        return Err(GenerationError::ScoreOutOfRange(hds_score));
    }
    // Single left-to-right pass so placeholder-like text inside the
    // narrative is never re-substituted.
    let mut user = String::with_capacity(USER_TEMPLATE.len() + written_text.len());
    let mut rest = USER_TEMPLATE;
    while let Some(start) = rest.find('{') {
        user.push_str(&rest[..start]);
        let tail = &rest[start..];
        let end = tail.find('}').expect("template braces are balanced");
        match &tail[1..end] {
            "written_text" => user.push_str(written_text),
            "style_name" => user.push_str(style.name()),
            "style_description" => user.push_str(style.description()),
            "score" => user.push_str(&hds_score.to_string()),
            other => unreachable!("unknown placeholder {other}"),
        }
        rest = &tail[end + 1..];
    }
    user.push_str(rest);
    Ok(RenderedPrompt {
        system: SYSTEM_MESSAGE.to_string(),
        user,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bands_partition_valid_range() {
        assert_eq!(fluency_band(29).unwrap(), FluencyBand::High);
        assert_eq!(fluency_band(25).unwrap(), FluencyBand::Mid);
        assert_eq!(fluency_band(22).unwrap(), FluencyBand::Low);
        for s in HDS_MIN..=HDS_MAX {
            let b = fluency_band(s).unwrap();
            let (lo, hi) = b.score_range();
            assert!((lo..=hi).contains(&s));
        }
        assert!(fluency_band(21).is_err());
        assert!(fluency_band(31).is_err());
    }

    #[test]
    fn band_descriptions_appear_in_template() {
        for b in [FluencyBand::High, FluencyBand::Mid] {
            assert!(USER_TEMPLATE.contains(b.description()));
        }
    }

    #[test]
    fn styles_round_trip_by_name() {
        for s in Style::ALL {
            assert_eq!(s.name().parse::<Style>().unwrap(), s);
            let json = serde_json::to_string(&s).unwrap();
            assert_eq!(json, format!("\"{}\"", s.name()));
        }
        assert!("poetic".parse::<Style>().is_err());
    }

    #[test]
    fn styles_differ_only_in_style_lines() {
        let a = render_prompt("孫が来ました。", 27, Style::Concise).unwrap();
        let b = render_prompt("孫が来ました。", 27, Style::Humorous).unwrap();
        let diff: Vec<_> = a
            .user
            .lines()
            .zip(b.user.lines())
            .filter(|(x, y)| x != y)
            .map(|(x, _)| x.to_string())
            .collect();
        assert_eq!(diff.len(), 2);
        assert!(diff[0].starts_with("Target style: "));
        assert!(diff[1].starts_with("Style description: "));
        assert_eq!(a.system, b.system);
    }

    #[test]
    fn braces_in_narrative_are_left_alone() {
        let p = render_prompt("{score} {style_name}", 30, Style::Emotional).unwrap();
        assert!(p.user.contains("---\n{score} {style_name}\n---"));
        assert!(p.user.contains("score = 30:"));
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(render_prompt(" ", 25, Style::Concise), Err(GenerationError::EmptyWrittenText)));
        assert!(matches!(render_prompt("x", 40, Style::Concise), Err(GenerationError::ScoreOutOfRange(40))));
    }

    #[test]
    fn render_is_pure() {
        let a = render_prompt("同じ文章", 24, Style::Storytelling).unwrap();
        let b = render_prompt("同じ文章", 24, Style::Storytelling).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
