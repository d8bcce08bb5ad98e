use std::collections::{BTreeSet, HashMap};

pub type TokenId = u32;

pub const PAD: TokenId = 0;
pub const UNK: TokenId = 1;
pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";

/// Token ↔ id map. Ids 0 and 1 are PAD and UNK; the rest follow the
/// lexicographic order of the corpus tokens.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    to_id: HashMap<String, TokenId>,
    tokens: Vec<String>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::from_tokens(std::iter::empty::<String>())
    }
}

impl Vocabulary {
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let sorted: BTreeSet<String> = tokens
            .into_iter()
            .map(Into::into)
            .filter(|t| t != PAD_TOKEN && t != UNK_TOKEN)
            .collect();
        let mut list = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
        list.extend(sorted);
        let to_id = list.iter().enumerate().map(|(i, t)| (t.clone(), i as TokenId)).collect();
        Self { to_id, tokens: list }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.len() <= 2
    }

    pub fn id(&self, token: &str) -> TokenId {
        self.to_id.get(token).copied().unwrap_or(UNK)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.to_id.contains_key(token)
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    /// Non-reserved tokens in id order.
    pub fn words(&self) -> impl Iterator<Item = (TokenId, &str)> {
        self.tokens.iter().enumerate().skip(2).map(|(i, t)| (i as TokenId, t.as_str()))
    }
}

/// Lowercases, splits on whitespace and detaches every `,` and `.` as its
/// own token.
pub fn split_words(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for word in text.to_lowercase().split_whitespace() {
        let mut cur = String::new();
        for ch in word.chars() {
            if ch == ',' || ch == '.' {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
                out.push(ch.to_string());
            } else {
                cur.push(ch);
            }
        }
        if !cur.is_empty() {
            out.push(cur);
        }
    }
    out
}

pub fn tokenize(text: &str, vocab: &Vocabulary) -> Vec<TokenId> {
    split_words(text).iter().map(|w| vocab.id(w)).collect()
}

/// Space-joined token strings; unknown ids render as `<unk>`.
pub fn detokenize(ids: &[TokenId], vocab: &Vocabulary) -> String {
    ids.iter().map(|&i| vocab.token(i).unwrap_or(UNK_TOKEN)).collect::<Vec<_>>().join(" ")
}

/// All distinct tokens of the corpus, sorted after PAD/UNK.
pub fn build_vocab<S: AsRef<str>>(corpus: &[S]) -> Vocabulary {
    Vocabulary::from_tokens(corpus.iter().flat_map(|t| split_words(t.as_ref())))
}
