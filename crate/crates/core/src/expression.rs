//! Parsing a raw expression into concept tokens.
//!
//! An [`Expression`] keeps the raw text and the noun, verb and adjective
//! words found in it. Everything else (determiners, pronouns, prepositions,
//! auxiliaries) is dropped. Tagging goes through the [`PosTagger`] trait so a
//! model-backed tagger can be swapped in; [`LexiconTagger`] is the bundled
//! rule-and-lexicon fallback and is good enough for short English slogans.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExpressionError {
    #[error("expression is empty")]
    EmptyExpression,
    #[error("no part-of-speech tagger available: {0}")]
    TaggerUnavailable(String),
    #[error("token index {index} out of range for {len} tokens")]
    IndexOutOfRange { index: usize, len: usize },
}

/// The three word classes a concept can belong to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartOfSpeech {
    Noun,
    Verb,
    Adjective,
}

impl fmt::Display for PartOfSpeech {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PartOfSpeech::Noun => "noun",
            PartOfSpeech::Verb => "verb",
            PartOfSpeech::Adjective => "adjective",
        })
    }
}

/// Character offsets `[start, end)` into the raw expression.
///
/// Offsets count Unicode scalar values, not bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    /// Slices `text` by character offsets. Returns `None` if the span does
    /// not fit.
    pub fn slice<'a>(&self, text: &'a str) -> Option<&'a str> {
        if self.start > self.end {
            return None;
        }
        let mut indices = text.char_indices().map(|(i, _)| i).chain(std::iter::once(text.len()));
        let start = indices.nth(self.start)?;
        let end = if self.end == self.start {
            start
        } else {
            indices.nth(self.end - self.start - 1)?
        };
        Some(&text[start..end])
    }

    fn overlaps(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConceptToken {
    pub surface: String,
    pub pos: PartOfSpeech,
    pub span: Span,
    pub selected: bool,
}

impl ConceptToken {
    /// Lowercased form used for dedup and cache keys. Display keeps `surface`.
    pub fn normal_form(&self) -> String {
        self.surface.to_lowercase()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Expression {
    pub raw: String,
    pub tokens: Vec<ConceptToken>,
    /// One-sentence hidden meaning, filled in once inferred.
    #[serde(default)]
    pub theme: Option<String>,
}

impl Expression {
    /// Tokens currently marked as selected, in textual order.
    pub fn selected(&self) -> impl Iterator<Item = &ConceptToken> {
        self.tokens.iter().filter(|t| t.selected)
    }

    /// Surface forms of the selected tokens.
    pub fn selected_concepts(&self) -> Vec<String> {
        self.selected().map(|t| t.surface.clone()).collect()
    }

    /// True if `concept` (case-insensitive) names a selected token.
    pub fn is_selected(&self, concept: &str) -> bool {
        let needle = concept.to_lowercase();
        self.selected().any(|t| t.normal_form() == needle)
    }

    /// Checks the span invariants: every span lies within `raw`, reproduces
    /// its token's surface, and no two spans overlap.
    pub fn check_invariants(&self) -> bool {
        let mut seen = HashSet::new();
        for (i, tok) in self.tokens.iter().enumerate() {
            if tok.span.slice(&self.raw) != Some(tok.surface.as_str()) {
                return false;
            }
            if !seen.insert((tok.surface.as_str(), tok.span)) {
                return false;
            }
            if self.tokens[..i].iter().any(|o| o.span.overlaps(&tok.span)) {
                return false;
            }
        }
        true
    }
}

/// Word class assigned by a tagger. `Other` covers every class that is not
/// a concept candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WordClass {
    Concept(PartOfSpeech),
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggedWord {
    pub surface: String,
    pub span: Span,
    pub class: WordClass,
}

/// Part-of-speech tagging provider.
pub trait PosTagger: Send + Sync {
    fn tag(&self, text: &str) -> Result<Vec<TaggedWord>, ExpressionError>;
}

/// Parses `text` into an [`Expression`] whose tokens are the noun, verb and
/// adjective words of the input in textual order, none selected.
pub fn parse_expression(text: &str, tagger: &dyn PosTagger) -> Result<Expression, ExpressionError> {
    if text.trim().is_empty() {
        return Err(ExpressionError::EmptyExpression);
    }
    let mut tokens: Vec<ConceptToken> = Vec::new();
    for word in tagger.tag(text)? {
        let WordClass::Concept(pos) = word.class else {
            continue;
        };
        if word.span.slice(text) != Some(word.surface.as_str()) {
            return Err(ExpressionError::TaggerUnavailable(format!(
                "tagger returned span {:?} that does not match '{}'",
                word.span, word.surface
            )));
        }
        if tokens.iter().any(|t| t.span == word.span) {
            continue;
        }
        tokens.push(ConceptToken {
            surface: word.surface,
            pos,
            span: word.span,
            selected: false,
        });
    }
    tokens.sort_by_key(|t| t.span.start);
    Ok(Expression {
        raw: text.to_string(),
        tokens,
        theme: None,
    })
}

/// Returns a copy of `expr` with exactly the tokens at `picks` selected.
pub fn select_concepts(expr: &Expression, picks: &[usize]) -> Result<Expression, ExpressionError> {
    let len = expr.tokens.len();
    if let Some(&index) = picks.iter().find(|&&i| i >= len) {
        return Err(ExpressionError::IndexOutOfRange { index, len });
    }
    let mut out = expr.clone();
    for (i, tok) in out.tokens.iter_mut().enumerate() {
        tok.selected = picks.contains(&i);
    }
    Ok(out)
}

/// Splits text into word spans. Letters, digits, apostrophes and inner
/// hyphens stay together, so `well-being` is one word.
pub fn split_words(text: &str) -> Vec<(String, Span)> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if !chars[i].is_alphanumeric() {
            i += 1;
            continue;
        }
        let start = i;
        while i < chars.len() {
            let c = chars[i];
            let joins = (c == '-' || c == '\'' || c == '\u{2019}')
                && i + 1 < chars.len()
                && chars[i + 1].is_alphanumeric()
                && i > start;
            if c.is_alphanumeric() || joins {
                i += 1;
            } else {
                break;
            }
        }
        let surface: String = chars[start..i].iter().collect();
        out.push((surface, Span::new(start, i)));
    }
    out
}

/// Rule-and-lexicon tagger for short English expressions.
///
/// Closed-class words come from a fixed list. Open-class words are looked up
/// in a small lexicon, then resolved by suffix and by neighbouring words
/// (a word after a determiner is nominal, a word after a modal is a verb, an
/// `-s` word following a subject noun is a verb).
#[derive(Debug, Default, Clone)]
pub struct LexiconTagger;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Guess {
    Function(Function),
    Noun,
    Verb,
    Adjective,
    Adverb,
    Ambiguous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Function {
    Determiner,
    Preposition,
    Auxiliary,
    Modal,
    Pronoun,
    Conjunction,
    Infinitive,
}

const DETERMINERS: &[&str] = &[
    "a", "an", "the", "this", "that", "these", "those", "my", "your", "his", "her", "its", "our", "their", "every",
    "each", "some", "any", "no", "all", "both", "another", "such", "what", "which", "whose", "much", "many", "few",
    "more", "most",
];
const PREPOSITIONS: &[&str] = &[
    "of", "in", "on", "at", "by", "for", "with", "without", "from", "into", "onto", "over", "under", "about", "like",
    "as", "than", "through", "between", "among", "against", "toward", "towards", "upon", "within", "across", "behind",
    "beyond", "after", "before", "around", "during", "off", "out", "up", "down", "via", "per",
];
const AUXILIARIES: &[&str] = &[
    "is", "are", "was", "were", "be", "been", "being", "am", "do", "does", "did", "has", "have", "had", "isn't",
    "aren't", "wasn't", "weren't", "don't", "doesn't", "didn't", "it's",
];
const MODALS: &[&str] = &[
    "can", "could", "will", "would", "shall", "should", "may", "might", "must", "cannot", "can't", "won't",
];
const PRONOUNS: &[&str] = &[
    "i",
    "you",
    "he",
    "she",
    "it",
    "we",
    "they",
    "me",
    "him",
    "us",
    "them",
    "myself",
    "yourself",
    "itself",
    "ourselves",
    "themselves",
    "who",
    "whom",
    "something",
    "nothing",
    "everything",
    "anything",
    "someone",
    "everyone",
    "nobody",
    "mine",
    "yours",
    "ours",
    "theirs",
];
const CONJUNCTIONS: &[&str] = &[
    "and", "or", "but", "nor", "so", "yet", "if", "because", "while", "when", "where", "although", "though", "unless",
    "until", "whether", "then",
];
const ADVERBS: &[&str] = &[
    "not", "very", "too", "also", "just", "only", "never", "always", "often", "still", "even", "here", "there", "now",
    "again", "ever", "always", "soon", "almost", "quite", "rather", "together", "away",
];

const NOUNS: &[&str] = &[
    "knowledge",
    "hope",
    "life",
    "body",
    "soul",
    "mind",
    "heart",
    "mirror",
    "book",
    "books",
    "death",
    "welcome",
    "time",
    "love",
    "money",
    "health",
    "exercise",
    "vitamins",
    "vitamin",
    "world",
    "earth",
    "planet",
    "war",
    "peace",
    "freedom",
    "power",
    "truth",
    "light",
    "fire",
    "water",
    "heat",
    "pepper",
    "sauce",
    "smoke",
    "smoking",
    "dream",
    "dreams",
    "future",
    "past",
    "memory",
    "friendship",
    "family",
    "home",
    "nature",
    "change",
    "climate",
    "pollution",
    "energy",
    "growth",
    "success",
    "failure",
    "fear",
    "anger",
    "joy",
    "happiness",
    "beauty",
    "idea",
    "ideas",
    "education",
    "learning",
    "warming",
    "coffee",
    "music",
    "art",
    "city",
    "ocean",
    "sea",
    "sun",
    "moon",
    "star",
    "stars",
    "tree",
    "trees",
    "forest",
    "road",
    "journey",
    "path",
    "window",
    "door",
    "key",
    "bridge",
    "wall",
    "seed",
    "seeds",
    "work",
    "rest",
    "sleep",
    "food",
    "fuel",
    "spring",
    "winter",
    "summer",
    "autumn",
    "data",
    "privacy",
    "technology",
    "story",
];
const VERBS: &[&str] = &[
    "guides",
    "guide",
    "fuels",
    "fuel",
    "feeds",
    "builds",
    "grows",
    "makes",
    "breaks",
    "kills",
    "saves",
    "heals",
    "opens",
    "shapes",
    "drives",
    "protect",
    "protects",
    "save",
    "grow",
    "heal",
    "open",
    "build",
    "break",
    "kill",
    "make",
    "bring",
    "brings",
    "lights",
    "burns",
    "burn",
    "changes",
    "leads",
    "lead",
    "reflects",
    "reflect",
    "warms",
    "warm",
    "keeps",
    "keep",
    "gives",
    "give",
    "takes",
    "take",
    "nourishes",
    "nourish",
    "inspire",
    "inspires",
    "connects",
    "connect",
    "beware",
    "think",
    "thinks",
    "speak",
    "speaks",
    "speaks",
    "matters",
    "matter",
    "lasts",
];
const ADJECTIVES: &[&str] = &[
    "global", "warm", "cold", "hot", "good", "bad", "new", "old", "great", "small", "big", "little", "dark", "bright",
    "green", "red", "blue", "white", "black", "free", "deep", "strong", "weak", "happy", "sad", "true", "false",
    "clean", "dirty", "fast", "slow", "digital", "social", "natural", "human", "public", "private", "modern",
    "healthy", "aware", "fresh", "sweet", "bitter", "rich", "poor", "safe", "wild", "quiet", "loud", "pure", "open",
    "fragile", "brave", "wise", "golden", "silent", "endless", "eternal",
];

fn lookup(word: &str) -> Guess {
    let w = word.to_lowercase();
    let w = w.as_str();
    let in_list = |list: &[&str]| list.contains(&w);
    if in_list(DETERMINERS) {
        return Guess::Function(Function::Determiner);
    }
    if w == "to" {
        return Guess::Function(Function::Infinitive);
    }
    if in_list(AUXILIARIES) {
        return Guess::Function(Function::Auxiliary);
    }
    if in_list(MODALS) {
        return Guess::Function(Function::Modal);
    }
    if in_list(PRONOUNS) {
        return Guess::Function(Function::Pronoun);
    }
    if in_list(CONJUNCTIONS) {
        return Guess::Function(Function::Conjunction);
    }
    if in_list(PREPOSITIONS) {
        return Guess::Function(Function::Preposition);
    }
    if in_list(ADVERBS) {
        return Guess::Adverb;
    }
    let (n, v, a) = (in_list(NOUNS), in_list(VERBS), in_list(ADJECTIVES));
    match (n, v, a) {
        (true, false, false) => return Guess::Noun,
        (false, true, false) => return Guess::Verb,
        (false, false, true) => return Guess::Adjective,
        (false, false, false) => {}
        _ => return Guess::Ambiguous,
    }
    suffix_guess(w)
}

fn suffix_guess(w: &str) -> Guess {
    const ADJ_SUFFIXES: &[&str] = &["ous", "ful", "ive", "able", "ible", "al", "ic", "less", "ish", "ary"];
    const NOUN_SUFFIXES: &[&str] = &[
        "tion", "sion", "ment", "ness", "ity", "ship", "ance", "ence", "ism", "hood", "dom", "er", "or", "ist",
    ];
    if w.contains('-') {
        return Guess::Adjective;
    }
    if w.len() > 4 && w.ends_with("ly") {
        return Guess::Adverb;
    }
    if NOUN_SUFFIXES.iter().any(|s| w.len() > s.len() + 2 && w.ends_with(s)) {
        return Guess::Noun;
    }
    if ADJ_SUFFIXES.iter().any(|s| w.len() > s.len() + 2 && w.ends_with(s)) {
        return Guess::Adjective;
    }
    if w.len() > 4 && (w.ends_with("ing") || w.ends_with("ed") || w.ends_with("ize") || w.ends_with("ise")) {
        return Guess::Ambiguous;
    }
    if w.chars().all(|c| c.is_ascii_digit()) {
        return Guess::Function(Function::Determiner);
    }
    Guess::Ambiguous
}

impl LexiconTagger {
    fn resolve(words: &[(String, Span)]) -> Vec<WordClass> {
        let guesses: Vec<Guess> = words.iter().map(|(w, _)| lookup(w)).collect();
        let mut classes = Vec::with_capacity(words.len());
        for (i, guess) in guesses.iter().enumerate() {
            let prev = i.checked_sub(1).map(|j| resolved_prev(&guesses, &classes, j));
            let next = guesses.get(i + 1).copied();
            let word = words[i].0.to_lowercase();
            let class = match guess {
                Guess::Function(_) | Guess::Adverb => WordClass::Other,
                Guess::Noun => {
                    if matches!(prev, Some(Prev::Subject)) && word.ends_with('s') && is_verb_form(&word) {
                        WordClass::Concept(PartOfSpeech::Verb)
                    } else {
                        WordClass::Concept(PartOfSpeech::Noun)
                    }
                }
                Guess::Verb => match prev {
                    Some(Prev::Determiner) | Some(Prev::Adjective) => WordClass::Concept(PartOfSpeech::Noun),
                    _ => WordClass::Concept(PartOfSpeech::Verb),
                },
                Guess::Adjective => WordClass::Concept(PartOfSpeech::Adjective),
                Guess::Ambiguous => resolve_ambiguous(&word, prev, next),
            };
            classes.push(class);
        }
        classes
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Prev {
    Determiner,
    Adjective,
    Subject,
    Modal,
    Auxiliary,
    Preposition,
    Verb,
    Other,
}

fn resolved_prev(guesses: &[Guess], classes: &[WordClass], j: usize) -> Prev {
    match guesses[j] {
        Guess::Function(Function::Determiner) => Prev::Determiner,
        Guess::Function(Function::Modal) | Guess::Function(Function::Infinitive) => Prev::Modal,
        Guess::Function(Function::Auxiliary) => Prev::Auxiliary,
        Guess::Function(Function::Preposition) => Prev::Preposition,
        Guess::Function(Function::Pronoun) => Prev::Subject,
        _ => match classes[j] {
            WordClass::Concept(PartOfSpeech::Adjective) => Prev::Adjective,
            WordClass::Concept(PartOfSpeech::Noun) => Prev::Subject,
            WordClass::Concept(PartOfSpeech::Verb) => Prev::Verb,
            WordClass::Other => Prev::Other,
        },
    }
}

fn is_verb_form(word: &str) -> bool {
    VERBS.contains(&word)
}

fn resolve_ambiguous(word: &str, prev: Option<Prev>, next: Option<Guess>) -> WordClass {
    use PartOfSpeech::*;
    let class = match prev {
        Some(Prev::Modal) => Verb,
        Some(Prev::Determiner) | Some(Prev::Adjective) | Some(Prev::Preposition) => {
            let modifies = next.is_some_and(|n| matches!(n, Guess::Noun | Guess::Ambiguous));
            if modifies && (word.ends_with("ed") || ADJECTIVES.contains(&word)) {
                Adjective
            } else {
                Noun
            }
        }
        Some(Prev::Auxiliary) => {
            if word.ends_with("ing") || word.ends_with("ed") {
                Verb
            } else {
                Adjective
            }
        }
        Some(Prev::Subject) => {
            if word.ends_with('s') || word.ends_with("ed") {
                Verb
            } else {
                Noun
            }
        }
        Some(Prev::Verb) | Some(Prev::Other) => Noun,
        None => {
            if word.ends_with("ed") {
                Adjective
            } else {
                Noun
            }
        }
    };
    WordClass::Concept(class)
}

impl PosTagger for LexiconTagger {
    fn tag(&self, text: &str) -> Result<Vec<TaggedWord>, ExpressionError> {
        let words = split_words(text);
        let classes = Self::resolve(&words);
        Ok(words
            .into_iter()
            .zip(classes)
            .map(|((surface, span), class)| TaggedWord { surface, span, class })
            .collect())
    }
}
