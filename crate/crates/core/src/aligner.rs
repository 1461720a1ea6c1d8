//! IBM Model 1 lexicon training and per-sentence word alignment.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::segmenter::tokenize;

/// Default probability floor applied to the trained table.
pub const DEFAULT_FLOOR: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum AlignError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("pair {pair} has an empty side")]
    EmptySide { pair: usize },
    #[error("alignment dimensions differ: forward {forward:?}, reverse {reverse:?}")]
    DimensionMismatch {
        forward: (usize, usize),
        reverse: (usize, usize),
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> AlignError + '_ {
    move |source| AlignError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ParallelCorpus {
    pub pairs: Vec<(Vec<String>, Vec<String>)>,
}

impl ParallelCorpus {
    pub fn new(pairs: Vec<(Vec<String>, Vec<String>)>) -> Result<Self, AlignError> {
        if let Some(pair) = pairs.iter().position(|(s, t)| s.is_empty() || t.is_empty()) {
            return Err(AlignError::EmptySide { pair });
        }
        Ok(Self { pairs })
    }

    /// Builds a corpus from whitespace-separated sentence pairs.
    pub fn from_strs(pairs: &[(&str, &str)]) -> Result<Self, AlignError> {
        let words = |s: &str| s.split_whitespace().map(str::to_string).collect::<Vec<_>>();
        Self::new(pairs.iter().map(|(s, t)| (words(s), words(t))).collect())
    }

    /// Reads `src<TAB>tgt` lines; each side goes through the segment
    /// tokenizer. Blank lines are ignored.
    pub fn read_tsv(reader: impl BufRead) -> Result<Self, AlignError> {
        let mut pairs = Vec::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| AlignError::Parse {
                line: n + 1,
                message: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let Some((src, tgt)) = line.split_once('\t') else {
                return Err(AlignError::Parse {
                    line: n + 1,
                    message: "expected src<TAB>tgt".into(),
                });
            };
            let words = |s: &str| tokenize(s).into_iter().map(|t| t.text).collect::<Vec<_>>();
            pairs.push((words(src), words(tgt)));
        }
        Self::new(pairs).map_err(|e| match e {
            AlignError::EmptySide { pair } => AlignError::Parse {
                line: pair + 1,
                message: "empty side".into(),
            },
            other => other,
        })
    }

    pub fn load_tsv(path: &Path) -> Result<Self, AlignError> {
        let file = std::fs::File::open(path).map_err(io_error(path))?;
        Self::read_tsv(std::io::BufReader::new(file))
    }

    pub fn swapped(&self) -> Self {
        Self {
            pairs: self.pairs.iter().map(|(s, t)| (t.clone(), s.clone())).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

fn fold(word: &str) -> String {
    word.to_lowercase()
}

/// Translation probabilities t(tgt | src). The NULL source word is the key
/// `None`. Words are stored case-folded.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LexiconTable {
    rows: BTreeMap<Option<String>, BTreeMap<String, f64>>,
    floor: f64,
}

impl LexiconTable {
    pub fn new(floor: f64) -> Self {
        Self {
            rows: BTreeMap::new(),
            floor,
        }
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn insert(&mut self, src: Option<&str>, tgt: &str, prob: f64) {
        self.rows
            .entry(src.map(fold))
            .or_default()
            .insert(fold(tgt), prob);
    }

    /// Stored probability, or `None` when the pair was never observed.
    pub fn get(&self, src: Option<&str>, tgt: &str) -> Option<f64> {
        let key = src.map(fold);
        self.rows.get(&key)?.get(&fold(tgt)).copied()
    }

    /// Smoothed probability: unobserved pairs get the floor.
    pub fn prob(&self, src: Option<&str>, tgt: &str) -> f64 {
        self.get(src, tgt).unwrap_or(self.floor)
    }

    pub fn row(&self, src: Option<&str>) -> Option<&BTreeMap<String, f64>> {
        self.rows.get(&src.map(fold))
    }

    pub fn rows(&self) -> impl Iterator<Item = (Option<&str>, &BTreeMap<String, f64>)> {
        self.rows.iter().map(|(k, v)| (k.as_deref(), v))
    }

    pub fn row_sum(&self, src: Option<&str>) -> f64 {
        self.row(src).map_or(0.0, |r| r.values().sum())
    }

    /// Renormalizes every row to sum to one.
    pub fn normalize(&mut self) {
        for row in self.rows.values_mut() {
            let total: f64 = row.values().sum();
            if total > 0.0 {
                row.values_mut().for_each(|p| *p /= total);
            }
        }
    }

    /// `src<TAB>tgt<TAB>prob`, sorted by source then descending
    /// probability. The NULL word is written as `NULL`.
    pub fn write_tsv(&self, mut out: impl Write) -> std::io::Result<()> {
        for (src, row) in &self.rows {
            let mut entries: Vec<_> = row.iter().collect();
            entries.sort_by(|a, b| b.1.total_cmp(a.1).then_with(|| a.0.cmp(b.0)));
            for (tgt, p) in entries {
                writeln!(out, "{}\t{}\t{}", src.as_deref().unwrap_or("NULL"), tgt, p)?;
            }
        }
        Ok(())
    }

    pub fn save_tsv(&self, path: &Path) -> Result<(), AlignError> {
        let mut buf = Vec::new();
        self.write_tsv(&mut buf).map_err(io_error(path))?;
        std::fs::write(path, buf).map_err(io_error(path))
    }

    pub fn read_tsv(reader: impl BufRead, floor: f64) -> Result<Self, AlignError> {
        let mut table = Self::new(floor);
        for (n, line) in reader.lines().enumerate() {
            let parse = |message: &str| AlignError::Parse {
                line: n + 1,
                message: message.to_string(),
            };
            let line = line.map_err(|e| parse(&e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            let [src, tgt, p] = cols[..] else {
                return Err(parse("expected src<TAB>tgt<TAB>prob"));
            };
            let p: f64 = p.trim().parse().map_err(|_| parse("probability is not a number"))?;
            if !(0.0..=1.0).contains(&p) {
                return Err(parse("probability outside [0, 1]"));
            }
            table.insert((src != "NULL").then_some(src), tgt, p);
        }
        Ok(table)
    }

    pub fn load_tsv(path: &Path, floor: f64) -> Result<Self, AlignError> {
        let file = std::fs::File::open(path).map_err(io_error(path))?;
        Self::read_tsv(std::io::BufReader::new(file), floor)
    }
}

/// Lexicon plus the corpus log-likelihood before the first iteration and
/// after each one.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub lexicon: LexiconTable,
    pub log_likelihoods: Vec<f64>,
}

pub fn train_model1(
    corpus: &ParallelCorpus,
    iterations: usize,
    floor: f64,
) -> Result<LexiconTable, AlignError> {
    Ok(train_model1_traced(corpus, iterations, floor)?.lexicon)
}

/// EM training. Source sentences get a NULL word at position 0; the table
/// starts uniform over the target words each source word co-occurs with.
/// The floor is applied once to the final table, so the traced
/// likelihoods belong to the plain EM iterates.
pub fn train_model1_traced(
    corpus: &ParallelCorpus,
    iterations: usize,
    floor: f64,
) -> Result<TrainedModel, AlignError> {
    if corpus.is_empty() {
        return Err(AlignError::EmptyCorpus);
    }
    let iterations = iterations.max(1);

    // integer ids over sorted vocabularies; source id 0 is NULL
    let src_vocab: BTreeSet<String> = corpus.pairs.iter().flat_map(|(s, _)| s.iter().map(|w| fold(w))).collect();
    let tgt_vocab: BTreeSet<String> = corpus.pairs.iter().flat_map(|(_, t)| t.iter().map(|w| fold(w))).collect();
    let src_words: Vec<Option<String>> =
        std::iter::once(None).chain(src_vocab.into_iter().map(Some)).collect();
    let tgt_words: Vec<String> = tgt_vocab.into_iter().collect();
    let src_id: BTreeMap<&str, usize> = src_words
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, w)| (w.as_deref().unwrap(), i))
        .collect();
    let tgt_id: BTreeMap<&str, usize> = tgt_words.iter().enumerate().map(|(i, w)| (w.as_str(), i)).collect();
    let sentences: Vec<(Vec<usize>, Vec<usize>)> = corpus
        .pairs
        .iter()
        .map(|(s, t)| {
            let src = std::iter::once(0).chain(s.iter().map(|w| src_id[fold(w).as_str()])).collect();
            let tgt = t.iter().map(|w| tgt_id[fold(w).as_str()]).collect();
            (src, tgt)
        })
        .collect();

    let mut t: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); src_words.len()];
    for (src, tgt) in &sentences {
        for &e in src {
            for &f in tgt {
                t[e].insert(f, 0.0);
            }
        }
    }
    for row in &mut t {
        let uniform = 1.0 / row.len() as f64;
        row.values_mut().for_each(|p| *p = uniform);
    }

    let mut log_likelihoods = Vec::with_capacity(iterations + 1);
    for _ in 0..iterations {
        let mut counts: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); src_words.len()];
        let mut ll = 0.0;
        for (src, tgt) in &sentences {
            for &f in tgt {
                let z: f64 = src.iter().map(|&e| t[e][&f]).sum();
                ll += (z / src.len() as f64).ln();
                for &e in src {
                    *counts[e].entry(f).or_insert(0.0) += t[e][&f] / z;
                }
            }
        }
        log_likelihoods.push(ll);
        for (e, row) in counts.into_iter().enumerate() {
            let total: f64 = row.values().sum();
            for (f, c) in row {
                t[e].insert(f, c / total);
            }
        }
    }
    log_likelihoods.push(corpus_log_likelihood(&sentences, &t));

    let mut lexicon = LexiconTable::new(floor);
    for (e, row) in t.iter().enumerate() {
        let total: f64 = row.values().map(|&p| p.max(floor)).sum();
        let key = src_words[e].clone();
        let out = lexicon.rows.entry(key).or_default();
        for (&f, &p) in row {
            out.insert(tgt_words[f].clone(), p.max(floor) / total);
        }
    }
    Ok(TrainedModel {
        lexicon,
        log_likelihoods,
    })
}

fn corpus_log_likelihood(sentences: &[(Vec<usize>, Vec<usize>)], t: &[BTreeMap<usize, f64>]) -> f64 {
    sentences
        .iter()
        .flat_map(|(src, tgt)| {
            tgt.iter().map(move |&f| {
                let z: f64 = src.iter().map(|&e| t[e][&f]).sum();
                (z / src.len() as f64).ln()
            })
        })
        .sum()
}

/// One alignment link. `src == None` is the NULL word, written as -1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Link {
    pub src: Option<usize>,
    pub tgt: usize,
}

impl Link {
    pub fn new(src: usize, tgt: usize) -> Self {
        Self { src: Some(src), tgt }
    }

    pub fn null(tgt: usize) -> Self {
        Self { src: None, tgt }
    }
}

impl Serialize for Link {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let src = self.src.map_or(-1, |i| i as i64);
        (src, self.tgt).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Link {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let (src, tgt): (i64, usize) = Deserialize::deserialize(d)?;
        match src {
            -1 => Ok(Link::null(tgt)),
            i if i >= 0 => Ok(Link::new(i as usize, tgt)),
            _ => Err(serde::de::Error::custom("source index below -1")),
        }
    }
}

impl fmt::Display for Link {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.src {
            Some(i) => write!(f, "{i}-{}", self.tgt),
            None => write!(f, "-1-{}", self.tgt),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AlignmentLinks {
    pub links: BTreeSet<Link>,
    pub src_len: usize,
    pub tgt_len: usize,
}

impl AlignmentLinks {
    pub fn new(src_len: usize, tgt_len: usize) -> Self {
        Self {
            links: BTreeSet::new(),
            src_len,
            tgt_len,
        }
    }

    pub fn from_pairs(src_len: usize, tgt_len: usize, pairs: &[(usize, usize)]) -> Self {
        let mut a = Self::new(src_len, tgt_len);
        a.links.extend(pairs.iter().map(|&(i, j)| Link::new(i, j)));
        a
    }

    pub fn diagonal(len: usize) -> Self {
        let pairs: Vec<_> = (0..len).map(|i| (i, i)).collect();
        Self::from_pairs(len, len, &pairs)
    }

    pub fn insert(&mut self, link: Link) {
        self.links.insert(link);
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn contains(&self, src: usize, tgt: usize) -> bool {
        self.links.contains(&Link::new(src, tgt))
    }

    /// Target indices linked to `src`, ascending.
    pub fn targets_of(&self, src: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .links
            .iter()
            .filter(|l| l.src == Some(src))
            .map(|l| l.tgt)
            .collect();
        out.sort_unstable();
        out
    }

    /// Links with the NULL word removed.
    pub fn real_links(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.links.iter().filter_map(|l| l.src.map(|i| (i, l.tgt)))
    }

    /// True when all indices are in bounds and every target index has
    /// exactly one link.
    pub fn is_complete(&self) -> bool {
        let mut seen = vec![0usize; self.tgt_len];
        for l in &self.links {
            if l.tgt >= self.tgt_len || l.src.is_some_and(|i| i >= self.src_len) {
                return false;
            }
            seen[l.tgt] += 1;
        }
        seen.iter().all(|&n| n == 1)
    }

    pub fn in_bounds(&self) -> bool {
        self.links
            .iter()
            .all(|l| l.tgt < self.tgt_len && l.src.is_none_or(|i| i < self.src_len))
    }

    /// Source and target swapped; NULL links are dropped.
    pub fn swapped(&self) -> Self {
        let mut out = Self::new(self.tgt_len, self.src_len);
        out.links.extend(self.real_links().map(|(i, j)| Link::new(j, i)));
        out
    }

    /// Space-separated `i-j` pairs without NULL links.
    pub fn to_pharaoh(&self) -> String {
        self.real_links()
            .map(|(i, j)| format!("{i}-{j}"))
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn parse_pharaoh(line: &str, src_len: usize, tgt_len: usize) -> Result<Self, String> {
        let mut out = Self::new(src_len, tgt_len);
        for pair in line.split_whitespace() {
            let (i, j) = pair
                .split_once('-')
                .and_then(|(i, j)| Some((i.parse().ok()?, j.parse().ok()?)))
                .ok_or_else(|| format!("bad link `{pair}`"))?;
            out.insert(Link::new(i, j));
        }
        if !out.in_bounds() {
            return Err("link index out of bounds".into());
        }
        Ok(out)
    }
}

/// Links each target token to its most probable source token. Ties go to
/// the smallest source index and the NULL word only wins when strictly
/// more probable than every real token. A target word no candidate has
/// ever been seen with links to NULL.
pub fn viterbi_align<S: AsRef<str>, T: AsRef<str>>(
    src: &[S],
    tgt: &[T],
    lexicon: &LexiconTable,
) -> AlignmentLinks {
    let mut out = AlignmentLinks::new(src.len(), tgt.len());
    for (j, f) in tgt.iter().enumerate() {
        let f = f.as_ref();
        let observed = src.iter().any(|e| lexicon.get(Some(e.as_ref()), f).is_some())
            || lexicon.get(None, f).is_some();
        if !observed {
            out.insert(Link::null(j));
            continue;
        }
        let mut best: Option<(usize, f64)> = None;
        for (i, e) in src.iter().enumerate() {
            let p = lexicon.prob(Some(e.as_ref()), f);
            if best.is_none_or(|(_, b)| p > b) {
                best = Some((i, p));
            }
        }
        let null = lexicon.prob(None, f);
        match best {
            Some((i, p)) if p >= null => out.insert(Link::new(i, j)),
            _ => out.insert(Link::null(j)),
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Symmetrization {
    #[default]
    Intersection,
    Union,
}

/// Combines a forward alignment with a reverse one given in swapped index
/// order. NULL links are not carried over.
pub fn symmetrize(
    forward: &AlignmentLinks,
    reverse: &AlignmentLinks,
    method: Symmetrization,
) -> Result<AlignmentLinks, AlignError> {
    if forward.src_len != reverse.tgt_len || forward.tgt_len != reverse.src_len {
        return Err(AlignError::DimensionMismatch {
            forward: (forward.src_len, forward.tgt_len),
            reverse: (reverse.src_len, reverse.tgt_len),
        });
    }
    let back = reverse.swapped();
    let fwd = forward.swapped().swapped();
    let links = match method {
        Symmetrization::Intersection => fwd.links.intersection(&back.links).copied().collect(),
        Symmetrization::Union => fwd.links.union(&back.links).copied().collect(),
    };
    Ok(AlignmentLinks {
        links,
        src_len: forward.src_len,
        tgt_len: forward.tgt_len,
    })
}
