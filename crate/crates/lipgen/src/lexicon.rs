//! Dictionary and viseme-table loading, and JSON-lines label export.

use std::io::Write;
use std::path::Path;

use lipgen_core::lexicon::{self, PronouncingLexicon, VisemeTable, WordVisemeLabel};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;

/// The CMU Pronouncing Dictionary (see `data/CMUDICT-LICENSE`).
pub const BUNDLED_DICTIONARY: &str = include_str!("../data/cmudict.dict");

pub fn load_lexicon(path: Option<&Path>) -> Result<PronouncingLexicon> {
    match path {
        Some(p) => lexicon::parse_pronouncing_dictionary(&io::read_text(p)?).map_err(|e| Error::format(p, e)),
        None => Ok(lexicon::parse_pronouncing_dictionary(BUNDLED_DICTIONARY)?),
    }
}

pub fn load_viseme_table(path: Option<&Path>) -> Result<VisemeTable> {
    match path {
        Some(p) => {
            let text = io::read_text(p)?;
            lexicon::load_viseme_table(&text, &p.display().to_string()).map_err(|e| Error::format(p, e))
        }
        None => Ok(VisemeTable::shipped()),
    }
}

/// One exported line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelRecord {
    pub word: String,
    pub phonemes: Vec<String>,
    /// Viseme group indices of the primary pronunciation.
    pub visemes: Vec<u8>,
    pub multi_hot: Vec<u8>,
}

impl From<&WordVisemeLabel> for LabelRecord {
    fn from(label: &WordVisemeLabel) -> Self {
        Self {
            word: label.word.clone(),
            phonemes: label.phonemes.iter().map(|p| p.as_str().to_owned()).collect(),
            visemes: label.viseme_sequence.iter().map(|v| v.index() as u8).collect(),
            multi_hot: label.multi_hot.to_vec(),
        }
    }
}

pub fn write_jsonl<T: Serialize>(out: &mut impl Write, records: impl IntoIterator<Item = T>) -> std::io::Result<()> {
    for record in records {
        serde_json::to_writer(&mut *out, &record)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use lipgen_core::lexicon::VariantPolicy;

    #[test]
    fn bundled_dictionary_parses_and_maps() {
        let lex = load_lexicon(None).unwrap();
        assert!(lex.len() > 100_000);
        let table = load_viseme_table(None).unwrap();
        assert!(lexicon::unmapped_phonemes(&table, &lex).unwrap().is_empty());
        let label = lexicon::word_to_multihot(&table, &lex, "hello", VariantPolicy::First).unwrap();
        let record = LabelRecord::from(&label);
        assert_eq!(record.word, "HELLO");
        assert_eq!(record.multi_hot.len(), 18);
        let mut out = Vec::new();
        write_jsonl(&mut out, [&record]).unwrap();
        let back: LabelRecord = serde_json::from_slice(out.strip_suffix(b"\n").unwrap()).unwrap();
        assert_eq!(back, record);
    }
}
