use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusionReason {
    ImageBased,
    SyllableBased,
    Crossword,
    GrammarPractice,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "class", content = "reason", rename_all = "snake_case")]
pub enum ExerciseClass {
    Translatable,
    Excluded(ExclusionReason),
}

/// What is known about an exercise before deciding whether to translate it.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExerciseMeta {
    pub exercise_type: String,
    pub has_images_only: bool,
    pub is_crossword: bool,
    pub subject: String,
    pub is_grammar_drill: bool,
    /// Editorial opt-out for anything the other rules do not cover.
    pub manual_exclusion: bool,
}

fn normalized(label: &str) -> String {
    label
        .trim()
        .to_lowercase()
        .chars()
        .map(|c| if c == '-' || c == ' ' { '_' } else { c })
        .collect()
}

/// Crosswords first, then image-only, syllable, grammar drills and manual
/// exclusions. Everything else is translatable.
pub fn classify_exercise(meta: &ExerciseMeta) -> ExerciseClass {
    let kind = normalized(&meta.exercise_type);
    let reason = if meta.is_crossword || kind.contains("crossword") {
        Some(ExclusionReason::Crossword)
    } else if meta.has_images_only || kind.starts_with("image") || kind.contains("picture") {
        Some(ExclusionReason::ImageBased)
    } else if kind.contains("syllable") {
        Some(ExclusionReason::SyllableBased)
    } else if meta.is_grammar_drill || kind.contains("grammar") {
        Some(ExclusionReason::GrammarPractice)
    } else if meta.manual_exclusion {
        Some(ExclusionReason::Other)
    } else {
        None
    };
    reason.map_or(ExerciseClass::Translatable, ExerciseClass::Excluded)
}
