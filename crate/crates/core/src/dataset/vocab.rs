use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SOS: usize = 0;
pub const EOS: usize = 1;
pub const PAD: usize = 2;
pub const EMPTY: usize = 3;
const RESERVED: [&str; 4] = ["<sos>", "<eos>", "<pad>", "<empty>"];

/// Closed word vocabulary: reserved tokens first, then words in
/// lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    tokens: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

pub fn tokenize(phrase: &str) -> impl Iterator<Item = String> + '_ {
    phrase.split_whitespace().map(str::to_lowercase)
}

impl Vocab {
    pub fn build<'a>(phrases: impl IntoIterator<Item = &'a str>) -> Result<Self> {
        let words: BTreeSet<String> = phrases.into_iter().flat_map(tokenize).collect();
        if words.is_empty() {
            return Err(Error::Usage("cannot build a vocabulary from an empty corpus".into()));
        }
        let tokens = RESERVED.iter().map(|s| s.to_string()).chain(words).collect();
        Vocab::from_tokens(tokens)
    }

    fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < RESERVED.len() || tokens[..RESERVED.len()] != RESERVED {
            return Err(Error::Schema("vocabulary must start with the reserved tokens".into()));
        }
        let index: HashMap<String, usize> = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        if index.len() != tokens.len() {
            return Err(Error::Schema("vocabulary has duplicate tokens".into()));
        }
        Ok(Vocab { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    /// Token ids of `phrase` followed by `<eos>`.
    pub fn encode(&self, phrase: &str) -> Result<Vec<usize>> {
        let mut ids = tokenize(phrase)
            .map(|w| self.id(&w).ok_or_else(|| Error::Usage(format!("word `{w}` is not in the vocabulary"))))
            .collect::<Result<Vec<_>>>()?;
        ids.push(EOS);
        Ok(ids)
    }

    /// Joins words up to the first `<eos>`, skipping other reserved tokens.
    pub fn decode(&self, ids: &[usize]) -> String {
        ids.iter()
            .take_while(|&&i| i != EOS)
            .filter(|&&i| i >= RESERVED.len())
            .filter_map(|&i| self.token(i))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

impl TryFrom<Vec<String>> for Vocab {
    type Error = Error;
    fn try_from(tokens: Vec<String>) -> Result<Self> {
        Vocab::from_tokens(tokens)
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.tokens
    }
}
