//! Tokenization, vocabulary construction and token vectors.
//!
//! Token vectors come either from a word2vec-style text file (frozen) or from
//! a randomly initialized table that is trained together with the classifier.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub const DEFAULT_MAX_SEQ_LEN: usize = 128;
pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";

/// Bound of the uniform initializer used for table rows.
pub const INIT_BOUND: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    pub tokens: Vec<String>,
    pub source_id: String,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tokenizer {
    pub max_seq_len: usize,
}

impl Default for Tokenizer {
    fn default() -> Self {
        Self { max_seq_len: DEFAULT_MAX_SEQ_LEN }
    }
}

impl Tokenizer {
    pub fn new(max_seq_len: usize) -> Self {
        Self { max_seq_len }
    }

    /// Lowercases, splits on whitespace and emits every punctuation
    /// character as its own token. Keeps at most `max_seq_len` tokens.
    pub fn tokenize(&self, source_id: &str, text: &str) -> Result<TokenSequence> {
        let mut tokens = Vec::new();
        'words: for word in text.split_whitespace() {
            let mut cur = String::new();
            for ch in word.chars().flat_map(char::to_lowercase) {
                if is_punctuation(ch) {
                    if !cur.is_empty() {
                        tokens.push(std::mem::take(&mut cur));
                    }
                    tokens.push(ch.to_string());
                } else {
                    cur.push(ch);
                }
                if tokens.len() >= self.max_seq_len {
                    break 'words;
                }
            }
            if !cur.is_empty() {
                tokens.push(cur);
            }
            if tokens.len() >= self.max_seq_len {
                break;
            }
        }
        tokens.truncate(self.max_seq_len);
        if tokens.is_empty() {
            return Err(Error::EmptyText);
        }
        Ok(TokenSequence { tokens, source_id: source_id.to_string() })
    }
}

/// Tokenizes with the default maximum length.
pub fn tokenize(text: &str) -> Result<TokenSequence> {
    Tokenizer::default().tokenize("", text)
}

fn is_punctuation(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(c,
            '\u{00A1}' | '\u{00A7}' | '\u{00AB}' | '\u{00B6}' | '\u{00B7}' | '\u{00BB}' | '\u{00BF}'
            | '\u{037E}' | '\u{0387}'
            | '\u{2010}'..='\u{2027}'
            | '\u{2030}'..='\u{205E}'
            | '\u{3001}'..='\u{3003}'
            | '\u{3008}'..='\u{3011}'
            | '\u{FF01}'..='\u{FF0F}'
            | '\u{FF1A}'..='\u{FF20}')
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for Vocabulary {
    fn from(tokens: Vec<String>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self { tokens, index }
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.tokens
    }
}

impl Vocabulary {
    /// Builds a vocabulary with `PAD`, `UNK` and every token seen at least
    /// `min_count` times, ordered by descending count then lexicographically.
    pub fn build<'a, I>(corpus: I, min_count: usize) -> Result<Self>
    where
        I: IntoIterator<Item = &'a TokenSequence>,
    {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        let mut docs = 0usize;
        for seq in corpus {
            docs += 1;
            for t in &seq.tokens {
                *counts.entry(t.as_str()).or_default() += 1;
            }
        }
        if docs == 0 {
            return Err(Error::EmptyCorpus);
        }
        let min_count = min_count.max(1);
        let mut kept: Vec<(&str, usize)> = counts
            .into_iter()
            .filter(|&(t, c)| c >= min_count && t != PAD_TOKEN && t != UNK_TOKEN)
            .collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        let mut tokens = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
        tokens.extend(kept.into_iter().map(|(t, _)| t.to_string()));
        Ok(tokens.into())
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Index of `token`, or [`UNK`] when absent.
    pub fn index_of(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, index: usize) -> Option<&str> {
        self.tokens.get(index).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn encode(&self, seq: &TokenSequence) -> Vec<usize> {
        seq.tokens.iter().map(|t| self.index_of(t)).collect()
    }
}

/// Convenience wrapper around [`Vocabulary::build`].
pub fn build_vocabulary(corpus: &[TokenSequence], min_count: usize) -> Result<Vocabulary> {
    Vocabulary::build(corpus, min_count)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingMode {
    FrozenPretrained,
    Trainable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingTable {
    pub matrix: Matrix,
    pub mode: EmbeddingMode,
}

impl EmbeddingTable {
    /// Seeded uniform table with an all-zero `PAD` row.
    pub fn trainable(vocab: &Vocabulary, dim: usize, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("embedding dimension must be positive".into()));
        }
        Ok(Self { matrix: init_matrix(vocab.len(), dim, seed), mode: EmbeddingMode::Trainable })
    }

    pub fn dim(&self) -> usize {
        self.matrix.cols()
    }

    pub fn len(&self) -> usize {
        self.matrix.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.rows() == 0
    }

    pub fn is_frozen(&self) -> bool {
        self.mode == EmbeddingMode::FrozenPretrained
    }

    /// Stacks the rows for `indices` into a `T × D` matrix.
    pub fn gather(&self, indices: &[usize]) -> Matrix {
        let dim = self.dim();
        let mut out = Matrix::zeros(indices.len(), dim);
        for (t, &ix) in indices.iter().enumerate() {
            out.row_mut(t).copy_from_slice(self.matrix.row(ix));
        }
        out
    }
}

fn init_matrix(rows: usize, dim: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = Matrix::uniform(rows, dim, INIT_BOUND, &mut rng);
    if rows > PAD {
        m.row_mut(PAD).fill(0.0);
    }
    m
}

/// Embedding-layer lookup: row `t` is the table row of token `t`.
pub fn lookup(seq: &TokenSequence, table: &EmbeddingTable, vocab: &Vocabulary) -> Result<Matrix> {
    if seq.is_empty() {
        return Err(Error::EmptySequence);
    }
    Ok(table.gather(&vocab.encode(seq)))
}

/// Vectors parsed from a word2vec-style text file, in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct PretrainedVectors {
    pub dim: usize,
    pub words: Vec<String>,
    pub vectors: Vec<Vec<f64>>,
}

impl PretrainedVectors {
    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines();
        let header = match lines.next() {
            Some(line) => line?,
            None => return Err(Error::Format { line: 1, msg: "missing header".into() }),
        };
        let mut parts = header.split_whitespace();
        let parse_header = |s: Option<&str>, what: &str| -> Result<usize> {
            s.and_then(|v| v.parse::<usize>().ok()).ok_or_else(|| Error::Format {
                line: 1,
                msg: format!("malformed header, expected `<count> <dim>`: bad {what}"),
            })
        };
        let count = parse_header(parts.next(), "count")?;
        let dim = parse_header(parts.next(), "dim")?;
        if parts.next().is_some() {
            return Err(Error::Format { line: 1, msg: "malformed header: trailing fields".into() });
        }
        if dim == 0 {
            return Err(Error::Format { line: 1, msg: "dimension must be positive".into() });
        }

        let mut words = Vec::with_capacity(count);
        let mut vectors = Vec::with_capacity(count);
        for (i, line) in lines.enumerate() {
            let line_no = i + 2;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split(' ').filter(|f| !f.is_empty());
            let word = fields.next().unwrap_or_default().to_string();
            let values = fields
                .map(|f| {
                    let v: f64 = f.parse().map_err(|_| Error::Format {
                        line: line_no,
                        msg: format!("invalid number {f:?}"),
                    })?;
                    if v.is_finite() {
                        Ok(v)
                    } else {
                        Err(Error::Format { line: line_no, msg: format!("non-finite value {f:?}") })
                    }
                })
                .collect::<Result<Vec<f64>>>()?;
            if values.len() != dim {
                return Err(Error::Format {
                    line: line_no,
                    msg: format!("expected {dim} components, found {}", values.len()),
                });
            }
            words.push(word);
            vectors.push(values);
        }
        if words.len() != count {
            return Err(Error::Format {
                line: words.len() + 2,
                msg: format!("header declares {count} vectors, found {}", words.len()),
            });
        }
        Ok(Self { dim, words, vectors })
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {}", self.words.len(), self.dim)?;
        for (word, v) in self.words.iter().zip(&self.vectors) {
            write!(w, "{word}")?;
            for x in v {
                write!(w, " {x}")?;
            }
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Aligns the file vectors with `vocab`. Tokens missing from the file
    /// (and `UNK`) keep their seeded initial row; `PAD` stays zero.
    pub fn to_table(&self, vocab: &Vocabulary, seed: u64) -> EmbeddingTable {
        let mut matrix = init_matrix(vocab.len(), self.dim, seed);
        let mut seen = vec![false; vocab.len()];
        for (word, v) in self.words.iter().zip(&self.vectors) {
            if let Some(ix) = vocab.get(word) {
                if ix == PAD || ix == UNK || seen[ix] {
                    continue;
                }
                seen[ix] = true;
                matrix.row_mut(ix).copy_from_slice(v);
            }
        }
        EmbeddingTable { matrix, mode: EmbeddingMode::FrozenPretrained }
    }
}

/// Loads a frozen table for `vocab` from a word2vec-style text file.
pub fn load_pretrained(path: &Path, vocab: &Vocabulary, seed: u64) -> Result<EmbeddingTable> {
    let file = std::fs::File::open(path)?;
    Ok(PretrainedVectors::read(BufReader::new(file))?.to_table(vocab, seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(tokens: &[&str]) -> TokenSequence {
        TokenSequence { tokens: tokens.iter().map(|s| s.to_string()).collect(), source_id: String::new() }
    }

    #[test]
    fn tokenize_splits_punctuation() {
        assert_eq!(tokenize("Great service!").unwrap().tokens, vec!["great", "service", "!"]);
    }

    #[test]
    fn tokenize_collapses_whitespace() {
        assert_eq!(tokenize("A  B").unwrap().tokens, vec!["a", "b"]);
    }

    #[test]
    fn tokenize_truncates() {
        let text = (0..200).map(|i| format!("w{i}")).collect::<Vec<_>>().join(" ");
        let toks = Tokenizer::new(128).tokenize("d", &text).unwrap().tokens;
        assert_eq!(toks.len(), 128);
        assert_eq!(toks[0], "w0");
        assert_eq!(toks[127], "w127");
    }

    #[test]
    fn tokenize_unicode_punctuation_and_case() {
        let toks = tokenize("Très «BIEN»… ¿Qué?").unwrap().tokens;
        assert_eq!(toks, vec!["très", "«", "bien", "»", "…", "¿", "qué", "?"]);
    }

    #[test]
    fn tokenize_rejects_blank() {
        assert!(matches!(tokenize(""), Err(Error::EmptyText)));
        assert!(matches!(tokenize(" \t\n "), Err(Error::EmptyText)));
    }

    #[test]
    fn vocabulary_frequency_order() {
        let corpus = [seq(&["a", "b"]), seq(&["a"])];
        let v = build_vocabulary(&corpus, 1).unwrap();
        assert_eq!(v.tokens(), &["<pad>", "<unk>", "a", "b"]);
        let v = build_vocabulary(&corpus, 2).unwrap();
        assert_eq!(v.tokens(), &["<pad>", "<unk>", "a"]);
    }

    #[test]
    fn vocabulary_ties_are_lexicographic() {
        let v = build_vocabulary(&[seq(&["y", "x"])], 1).unwrap();
        assert_eq!(v.index_of("x"), 2);
        assert_eq!(v.index_of("y"), 3);
        assert_eq!(v.index_of("zzz"), UNK);
    }

    #[test]
    fn vocabulary_empty_corpus() {
        assert!(matches!(build_vocabulary(&[], 1), Err(Error::EmptyCorpus)));
    }

    #[test]
    fn vocabulary_serde_roundtrip() {
        let v = build_vocabulary(&[seq(&["a", "b", "b"])], 1).unwrap();
        let json = serde_json::to_string(&v).unwrap();
        let back: Vocabulary = serde_json::from_str(&json).unwrap();
        assert_eq!(v, back);
    }

    fn vocab_abc() -> Vocabulary {
        build_vocabulary(&[seq(&["a", "b", "c", "a", "b", "a"])], 1).unwrap()
    }

    #[test]
    fn pretrained_header_contract() {
        let text = "3 4\na 1 2 3 4\nb 5 6 7 8\nzz 0 0 0 1\n";
        let pv = PretrainedVectors::read(text.as_bytes()).unwrap();
        assert_eq!(pv.dim, 4);
        let table = pv.to_table(&vocab_abc(), 3);
        assert_eq!(table.dim(), 4);
        assert_eq!(table.len(), 5);
        assert!(table.is_frozen());
        let v = vocab_abc();
        assert_eq!(table.matrix.row(v.index_of("a")), &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(table.matrix.row(v.index_of("b")), &[5.0, 6.0, 7.0, 8.0]);
        assert!(table.matrix.row(PAD).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn pretrained_missing_rows_are_seeded() {
        let text = "1 2\na 1 2\n";
        let pv = PretrainedVectors::read(text.as_bytes()).unwrap();
        let v = vocab_abc();
        let t1 = pv.to_table(&v, 11);
        let t2 = pv.to_table(&v, 11);
        let c = v.index_of("c");
        assert_eq!(t1.matrix.row(c), t2.matrix.row(c));
        assert!(t1.matrix.row(c).iter().all(|x| x.abs() <= INIT_BOUND));
        assert!(t1.matrix.row(UNK).iter().any(|&x| x != 0.0));
    }

    #[test]
    fn pretrained_short_line_reports_line_number() {
        let text = "2 4\na 1 2 3 4\nb 1 2 3\n";
        match PretrainedVectors::read(text.as_bytes()) {
            Err(Error::Format { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn pretrained_rejects_bad_header_and_nan() {
        assert!(matches!(
            PretrainedVectors::read("x 4\n".as_bytes()),
            Err(Error::Format { line: 1, .. })
        ));
        assert!(matches!(
            PretrainedVectors::read("1 2\na NaN 1\n".as_bytes()),
            Err(Error::Format { line: 2, .. })
        ));
        assert!(matches!(
            PretrainedVectors::read("1 2\na inf 1\n".as_bytes()),
            Err(Error::Format { line: 2, .. })
        ));
    }

    #[test]
    fn pretrained_write_read_roundtrip() {
        let pv = PretrainedVectors {
            dim: 2,
            words: vec!["a".into(), "b".into()],
            vectors: vec![vec![0.1, -1e-9], vec![3.25, 1.0 / 3.0]],
        };
        let mut buf = Vec::new();
        pv.write(&mut buf).unwrap();
        assert_eq!(PretrainedVectors::read(buf.as_slice()).unwrap(), pv);
    }

    #[test]
    fn lookup_rows_and_unknown() {
        let v = vocab_abc();
        let table = EmbeddingTable::trainable(&v, 16, 5).unwrap();
        let s = seq(&["a", "b", "c", "nope", "a"]);
        let m = lookup(&s, &table, &v).unwrap();
        assert_eq!(m.shape(), (5, 16));
        assert_eq!(m.row(0), table.matrix.row(v.index_of("a")));
        assert_eq!(m.row(3), table.matrix.row(UNK));
        assert!(matches!(lookup(&seq(&[]), &table, &v), Err(Error::EmptySequence)));
    }

    #[test]
    fn trainable_table_is_deterministic() {
        let v = vocab_abc();
        let a = EmbeddingTable::trainable(&v, 8, 42).unwrap();
        let b = EmbeddingTable::trainable(&v, 8, 42).unwrap();
        assert_eq!(serde_json::to_vec(&a).unwrap(), serde_json::to_vec(&b).unwrap());
        assert!(EmbeddingTable::trainable(&v, 0, 42).is_err());
    }
}
