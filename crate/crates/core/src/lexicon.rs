//! Pronouncing-dictionary parsing and phoneme-to-viseme labeling.
//!
//! Dictionary text follows the CMU Pronouncing Dictionary conventions:
//! `;;;` comment lines, `WORD  PH1 PH2 ...` entries and `WORD(n)` for
//! alternate pronunciations. The newer lowercase, single-space layout with
//! trailing `# comment` annotations is accepted as well.
//!
//! The viseme table maps each stress-free ARPAbet phoneme to one of
//! [`VISEME_COUNT`] groups; its text format is one `NAME: PH PH ...` line per
//! group, with `#` comments.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::VISEME_COUNT;

/// The table shipped with the crate.
pub const SHIPPED_VISEME_TABLE: &str = include_str!("../data/visemes.txt");

/// An ARPAbet symbol without its stress digit.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Phoneme(String);

impl Phoneme {
    pub fn new(symbol: &str) -> Result<Self> {
        if symbol.is_empty() || !symbol.bytes().all(|b| b.is_ascii_uppercase()) {
            return Err(Error::InvalidToken(symbol.to_string()));
        }
        Ok(Self(symbol.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Phoneme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Removes trailing stress digits: `EH1` → `EH`.
pub fn strip_stress(token: &str) -> Result<Phoneme> {
    let stripped = token.trim_end_matches(|c: char| c.is_ascii_digit());
    if stripped.is_empty() {
        return Err(Error::InvalidToken(token.to_string()));
    }
    Phoneme::new(&stripped.to_ascii_uppercase()).map_err(|_| Error::InvalidToken(token.to_string()))
}

/// Word → pronunciation variants, each a list of raw phoneme tokens
/// (stress digits kept).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PronouncingLexicon {
    entries: BTreeMap<String, Vec<Vec<String>>>,
}

impl PronouncingLexicon {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn variants(&self, word: &str) -> Option<&[Vec<String>]> {
        self.entries.get(word).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[Vec<String>])> {
        self.entries.iter().map(|(w, v)| (w.as_str(), v.as_slice()))
    }

    /// Writes the lexicon back out in the classic `WORD  PH ...` layout.
    pub fn to_dictionary_text(&self) -> String {
        let mut out = String::new();
        for (word, variants) in &self.entries {
            for (n, phonemes) in variants.iter().enumerate() {
                out.push_str(word);
                if n > 0 {
                    out.push_str(&format!("({n})"));
                }
                out.push(' ');
                for p in phonemes {
                    out.push(' ');
                    out.push_str(p);
                }
                out.push('\n');
            }
        }
        out
    }
}

fn parse_error(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Parses dictionary text. Line numbers in errors are 1-based.
pub fn parse_pronouncing_dictionary(text: &str) -> Result<PronouncingLexicon> {
    let mut entries: BTreeMap<String, Vec<Vec<String>>> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with(";;;") {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let key = tokens.next().unwrap_or_default();
        let phonemes: Vec<String> = tokens
            .take_while(|t| *t != "#")
            .map(str::to_string)
            .collect();
        if phonemes.is_empty() {
            return Err(parse_error(line_no, format!("entry `{key}` has no phonemes")));
        }
        if let Some(bad) = phonemes
            .iter()
            .find(|p| !p.bytes().all(|b| b.is_ascii_alphanumeric()) || p.bytes().all(|b| b.is_ascii_digit()))
        {
            return Err(parse_error(line_no, format!("malformed phoneme `{bad}`")));
        }

        let (word, numbered) = match key.find('(') {
            Some(open) if key.ends_with(')') && open > 0 => {
                let index = &key[open + 1..key.len() - 1];
                index
                    .parse::<u32>()
                    .map_err(|_| parse_error(line_no, format!("unparsable variant index in `{key}`")))?;
                (&key[..open], true)
            }
            _ => (key, false),
        };
        let variants = entries.entry(word.to_uppercase()).or_default();
        if numbered {
            variants.push(phonemes);
        } else {
            variants.insert(0, phonemes);
        }
    }
    Ok(PronouncingLexicon { entries })
}

/// Index of a viseme group, `0..18`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VisemeId(u8);

impl VisemeId {
    pub fn new(index: usize) -> Result<Self> {
        if index >= VISEME_COUNT {
            return Err(Error::Index {
                index,
                classes: VISEME_COUNT,
            });
        }
        Ok(Self(index as u8))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VisemeGroup {
    pub name: String,
    pub phonemes: Vec<Phoneme>,
}

/// Total mapping from the listed phonemes to exactly 18 viseme groups.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VisemeTable {
    groups: Vec<VisemeGroup>,
    mapping: BTreeMap<Phoneme, VisemeId>,
    source: String,
}

impl VisemeTable {
    /// The table compiled into the crate.
    pub fn shipped() -> Self {
        load_viseme_table(SHIPPED_VISEME_TABLE, "<shipped visemes.txt>")
            .expect("shipped viseme table is valid")
    }

    pub fn groups(&self) -> &[VisemeGroup] {
        &self.groups
    }

    pub fn name(&self, id: VisemeId) -> &str {
        &self.groups[id.index()].name
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn lookup(&self, phoneme: &Phoneme) -> Result<VisemeId> {
        self.mapping
            .get(phoneme)
            .copied()
            .ok_or_else(|| Error::MappingGap(phoneme.to_string()))
    }

    pub fn phonemes(&self) -> impl Iterator<Item = &Phoneme> {
        self.mapping.keys()
    }
}

/// Parses the `NAME: PH PH ...` table format.
pub fn load_viseme_table(text: &str, source: &str) -> Result<VisemeTable> {
    let mut groups = Vec::new();
    let mut mapping: BTreeMap<Phoneme, VisemeId> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or_default().trim();
        if line.is_empty() {
            continue;
        }
        let (name, members) = line
            .split_once(':')
            .ok_or_else(|| parse_error(line_no, "expected `NAME: PH PH ...`"))?;
        let name = name.trim();
        if name.is_empty() {
            return Err(parse_error(line_no, "empty group name"));
        }
        let id = groups.len();
        let mut phonemes = Vec::new();
        for token in members.split_whitespace() {
            let phoneme = Phoneme::new(token).map_err(|_| {
                parse_error(line_no, format!("`{token}` is not a stress-free ARPAbet symbol"))
            })?;
            if let Some(previous) = mapping.get(&phoneme) {
                let first = groups
                    .get(previous.index())
                    .map_or_else(|| name.to_string(), |g: &VisemeGroup| g.name.clone());
                return Err(Error::TableConflict {
                    phoneme: phoneme.to_string(),
                    first,
                    second: name.to_string(),
                });
            }
            // ids beyond 17 are only reachable in a table that is about to
            // fail the arity check
            mapping.insert(phoneme.clone(), VisemeId(id.min(u8::MAX as usize) as u8));
            phonemes.push(phoneme);
        }
        if phonemes.is_empty() {
            return Err(Error::EmptyGroup(name.to_string()));
        }
        groups.push(VisemeGroup {
            name: name.to_string(),
            phonemes,
        });
    }
    if groups.len() != VISEME_COUNT {
        return Err(Error::TableArity {
            expected: VISEME_COUNT,
            found: groups.len(),
        });
    }
    Ok(VisemeTable {
        groups,
        mapping,
        source: source.to_string(),
    })
}

/// Which pronunciation variants to use for a word.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantPolicy {
    /// The dictionary's primary (unnumbered) pronunciation.
    #[default]
    First,
    /// Every variant; multi-hot labels take the union.
    All,
}

/// Uppercases a query word. ASCII letters plus the apostrophes, hyphens and
/// periods that appear inside dictionary headwords (`A.D.`, `ANGLO-SAXON`).
pub fn normalize_word(word: &str) -> Result<String> {
    let trimmed = word.trim();
    if trimmed.is_empty()
        || !trimmed.chars().all(|c| c.is_ascii_alphabetic() || matches!(c, '\'' | '-' | '.'))
        || !trimmed.chars().any(|c| c.is_ascii_alphabetic())
    {
        return Err(Error::InvalidWord(word.to_string()));
    }
    Ok(trimmed.to_ascii_uppercase())
}

/// Stress-stripped pronunciations of `word`: one sequence under
/// [`VariantPolicy::First`], all variants under [`VariantPolicy::All`].
pub fn word_to_phonemes(
    lexicon: &PronouncingLexicon,
    word: &str,
    policy: VariantPolicy,
) -> Result<Vec<Vec<Phoneme>>> {
    let key = normalize_word(word)?;
    let variants = lexicon
        .variants(&key)
        .ok_or_else(|| Error::OutOfVocabulary(key.clone()))?;
    let take = match policy {
        VariantPolicy::First => 1,
        VariantPolicy::All => variants.len(),
    };
    variants
        .iter()
        .take(take)
        .map(|tokens| tokens.iter().map(|t| strip_stress(t)).collect())
        .collect()
}

/// Element-wise table lookup; repeated visemes are kept.
pub fn phonemes_to_visemes(table: &VisemeTable, phonemes: &[Phoneme]) -> Result<Vec<VisemeId>> {
    phonemes.iter().map(|p| table.lookup(p)).collect()
}

/// 18-dim 0/1 vector marking which visemes occur.
pub fn multi_hot<'a>(ids: impl IntoIterator<Item = &'a VisemeId>) -> [u8; VISEME_COUNT] {
    let mut out = [0u8; VISEME_COUNT];
    for id in ids {
        out[id.index()] = 1;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordVisemeLabel {
    pub word: String,
    /// Primary pronunciation, stress stripped.
    pub phonemes: Vec<Phoneme>,
    /// Visemes of the primary pronunciation.
    pub viseme_sequence: Vec<VisemeId>,
    /// Union over the pronunciations selected by the variant policy.
    pub multi_hot: [u8; VISEME_COUNT],
}

pub fn word_to_multihot(
    table: &VisemeTable,
    lexicon: &PronouncingLexicon,
    word: &str,
    policy: VariantPolicy,
) -> Result<WordVisemeLabel> {
    let variants = word_to_phonemes(lexicon, word, policy)?;
    let mapped: Vec<Vec<VisemeId>> = variants
        .iter()
        .map(|p| phonemes_to_visemes(table, p))
        .collect::<Result<_>>()?;
    let multi_hot = multi_hot(mapped.iter().flatten());
    let mut variants = variants.into_iter();
    let mut mapped = mapped.into_iter();
    Ok(WordVisemeLabel {
        word: normalize_word(word)?,
        phonemes: variants.next().unwrap_or_default(),
        viseme_sequence: mapped.next().unwrap_or_default(),
        multi_hot,
    })
}

/// Phonemes used in `lexicon` that the table cannot map.
pub fn unmapped_phonemes(table: &VisemeTable, lexicon: &PronouncingLexicon) -> Result<BTreeSet<String>> {
    let mut gaps = BTreeSet::new();
    for (_, variants) in lexicon.iter() {
        for token in variants.iter().flatten() {
            let phoneme = strip_stress(token)?;
            if table.lookup(&phoneme).is_err() {
                gaps.insert(phoneme.to_string());
            }
        }
    }
    Ok(gaps)
}
