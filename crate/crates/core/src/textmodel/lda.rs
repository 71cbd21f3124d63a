//! Latent Dirichlet allocation fitted by collapsed Gibbs sampling.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::corpus::{Corpus, Vocabulary};
use crate::error::{Error, Result};
use crate::numcore::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LdaParams {
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub sweeps: usize,
}

impl LdaParams {
    /// Symmetric priors α = 50/K, β = 0.01.
    pub fn with_topics(k: usize, sweeps: usize) -> Self {
        Self {
            k,
            alpha: 50.0 / k as f64,
            beta: 0.01,
            sweeps,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::InvalidHyperparameter(format!("K = {} (need ≥ 2)", self.k)));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidHyperparameter(format!("alpha = {}", self.alpha)));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidHyperparameter(format!("beta = {}", self.beta)));
        }
        Ok(())
    }
}

/// Count tables and token assignments of a fitted model.
///
/// Invariants: `Σ_w topic_word[k][w] = topic_totals[k]`,
/// `Σ_k doc_topic[d][k] = len(doc d)`, and the assignments reproduce every
/// count.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicModel {
    k: usize,
    alpha: f64,
    beta: f64,
    vocab: Vocabulary,
    topic_word: Vec<u32>,
    topic_totals: Vec<u32>,
    doc_topic: Vec<u32>,
    assignments: Vec<Vec<u32>>,
    doc_words: Vec<Vec<u32>>,
    doc_owners: Vec<String>,
    seed: u64,
    sweeps: usize,
}

impl TopicModel {
    /// Rebuilds a model from token ids and their topic assignments,
    /// recomputing every count table.
    pub fn from_assignments(
        params: LdaParams,
        vocab: Vocabulary,
        doc_words: Vec<Vec<u32>>,
        assignments: Vec<Vec<u32>>,
        doc_owners: Vec<String>,
        seed: u64,
    ) -> Result<Self> {
        params.validate()?;
        let (k, v) = (params.k, vocab.len());
        if doc_words.len() != assignments.len() || doc_words.len() != doc_owners.len() {
            return Err(Error::LengthMismatch {
                left: doc_words.len(),
                right: assignments.len(),
            });
        }
        let mut topic_word = vec![0u32; k * v];
        let mut topic_totals = vec![0u32; k];
        let mut doc_topic = vec![0u32; doc_words.len() * k];
        for (d, (words, zs)) in doc_words.iter().zip(&assignments).enumerate() {
            if words.len() != zs.len() {
                return Err(Error::LengthMismatch {
                    left: words.len(),
                    right: zs.len(),
                });
            }
            for (&w, &z) in words.iter().zip(zs) {
                let (w, z) = (w as usize, z as usize);
                if w >= v || z >= k {
                    return Err(Error::InvalidParams(format!(
                        "token {w} / topic {z} out of range in document {d}"
                    )));
                }
                topic_word[z * v + w] += 1;
                topic_totals[z] += 1;
                doc_topic[d * k + z] += 1;
            }
        }
        Ok(Self {
            k,
            alpha: params.alpha,
            beta: params.beta,
            vocab,
            topic_word,
            topic_totals,
            doc_topic,
            assignments,
            doc_words,
            doc_owners,
            seed,
            sweeps: params.sweeps,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn n_docs(&self) -> usize {
        self.doc_words.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn sweeps(&self) -> usize {
        self.sweeps
    }

    pub fn doc_owners(&self) -> &[String] {
        &self.doc_owners
    }

    pub fn topic_word(&self, k: usize, w: usize) -> u32 {
        self.topic_word[k * self.vocab.len() + w]
    }

    pub fn topic_total(&self, k: usize) -> u32 {
        self.topic_totals[k]
    }

    pub fn doc_topic(&self, d: usize, k: usize) -> u32 {
        self.doc_topic[d * self.k + k]
    }

    pub fn assignments(&self, d: usize) -> &[u32] {
        &self.assignments[d]
    }

    /// Smoothed topic-word probability φ_{k,w}.
    pub fn phi(&self, k: usize, w: usize) -> f64 {
        let v = self.vocab.len() as f64;
        (self.topic_word(k, w) as f64 + self.beta) / (self.topic_totals[k] as f64 + v * self.beta)
    }

    /// Ids of the `n` most probable words of topic `k` (ties by id).
    pub fn top_words(&self, k: usize, n: usize) -> Vec<usize> {
        let mut ids: Vec<usize> = (0..self.vocab.len()).collect();
        ids.sort_by(|&a, &b| self.topic_word(k, b).cmp(&self.topic_word(k, a)).then(a.cmp(&b)));
        ids.truncate(n);
        ids
    }

    /// Recomputes every count table from the assignments and compares.
    pub fn counts_consistent(&self) -> bool {
        let rebuilt = TopicModel::from_assignments(
            LdaParams {
                k: self.k,
                alpha: self.alpha,
                beta: self.beta,
                sweeps: self.sweeps,
            },
            self.vocab.clone(),
            self.doc_words.clone(),
            self.assignments.clone(),
            self.doc_owners.clone(),
            self.seed,
        );
        let Ok(r) = rebuilt else { return false };
        let totals_ok = (0..self.k).all(|k| {
            (0..self.vocab.len()).map(|w| self.topic_word(k, w)).sum::<u32>() == self.topic_totals[k]
        });
        let docs_ok = (0..self.n_docs()).all(|d| {
            (0..self.k).map(|k| self.doc_topic(d, k)).sum::<u32>() as usize == self.doc_words[d].len()
        });
        totals_ok
            && docs_ok
            && r.topic_word == self.topic_word
            && r.topic_totals == self.topic_totals
            && r.doc_topic == self.doc_topic
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = TopicModelFile::from(self);
        std::fs::write(path, serde_json::to_string(&file)? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file: TopicModelFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        file.try_into()
    }
}

/// Collapsed Gibbs sampler over a corpus.
pub struct GibbsSampler<'c> {
    corpus: &'c Corpus,
    params: LdaParams,
    rng: Rng,
    seed: u64,
    z: Vec<Vec<u32>>,
    topic_word: Vec<u32>,
    topic_totals: Vec<u32>,
    doc_topic: Vec<u32>,
    probs: Vec<f64>,
    sweeps_done: usize,
}

impl<'c> GibbsSampler<'c> {
    /// Draws uniform random initial assignments.
    pub fn new(corpus: &'c Corpus, params: LdaParams, seed: u64) -> Result<Self> {
        params.validate()?;
        if corpus.n_tokens() == 0 {
            return Err(Error::EmptyCorpus);
        }
        let (k, v) = (params.k, corpus.vocab.len());
        let mut rng = Rng::new(seed);
        let mut topic_word = vec![0u32; k * v];
        let mut topic_totals = vec![0u32; k];
        let mut doc_topic = vec![0u32; corpus.docs.len() * k];
        let mut z = Vec::with_capacity(corpus.docs.len());
        for (d, doc) in corpus.docs.iter().enumerate() {
            let mut zd = Vec::with_capacity(doc.len());
            for &w in doc {
                let t = rng.below(k);
                topic_word[t * v + w] += 1;
                topic_totals[t] += 1;
                doc_topic[d * k + t] += 1;
                zd.push(t as u32);
            }
            z.push(zd);
        }
        Ok(Self {
            corpus,
            params,
            rng,
            seed,
            z,
            topic_word,
            topic_totals,
            doc_topic,
            probs: vec![0.0; k],
            sweeps_done: 0,
        })
    }

    /// Normalised full conditional of token `i` in document `d`, with that
    /// token's own assignment removed from the counts.
    pub fn conditional(&self, d: usize, i: usize) -> Vec<f64> {
        let (k, v) = (self.params.k, self.corpus.vocab.len());
        let w = self.corpus.docs[d][i];
        let own = self.z[d][i] as usize;
        let vbeta = v as f64 * self.params.beta;
        let mut p: Vec<f64> = (0..k)
            .map(|t| {
                let minus = (t == own) as u32;
                let ndk = (self.doc_topic[d * k + t] - minus) as f64;
                let nkw = (self.topic_word[t * v + w] - minus) as f64;
                let nk = (self.topic_totals[t] - minus) as f64;
                (ndk + self.params.alpha) * (nkw + self.params.beta) / (nk + vbeta)
            })
            .collect();
        let s: f64 = p.iter().sum();
        p.iter_mut().for_each(|x| *x /= s);
        p
    }

    /// One pass over every token in corpus order.
    pub fn sweep(&mut self) {
        let (k, v) = (self.params.k, self.corpus.vocab.len());
        let vbeta = v as f64 * self.params.beta;
        for (d, doc) in self.corpus.docs.iter().enumerate() {
            for (i, &w) in doc.iter().enumerate() {
                let old = self.z[d][i] as usize;
                self.topic_word[old * v + w] -= 1;
                self.topic_totals[old] -= 1;
                self.doc_topic[d * k + old] -= 1;

                let mut total = 0.0;
                for t in 0..k {
                    let p = (self.doc_topic[d * k + t] as f64 + self.params.alpha)
                        * (self.topic_word[t * v + w] as f64 + self.params.beta)
                        / (self.topic_totals[t] as f64 + vbeta);
                    total += p;
                    self.probs[t] = total;
                }
                let u = self.rng.uniform() * total;
                let new = self.probs.iter().position(|&c| u < c).unwrap_or(k - 1);

                self.topic_word[new * v + w] += 1;
                self.topic_totals[new] += 1;
                self.doc_topic[d * k + new] += 1;
                self.z[d][i] = new as u32;
            }
        }
        self.sweeps_done += 1;
    }

    /// Snapshot of the current state as a model.
    pub fn model(&self) -> TopicModel {
        TopicModel {
            k: self.params.k,
            alpha: self.params.alpha,
            beta: self.params.beta,
            vocab: self.corpus.vocab.clone(),
            topic_word: self.topic_word.clone(),
            topic_totals: self.topic_totals.clone(),
            doc_topic: self.doc_topic.clone(),
            assignments: self.z.clone(),
            doc_words: self
                .corpus
                .docs
                .iter()
                .map(|d| d.iter().map(|&w| w as u32).collect())
                .collect(),
            doc_owners: self.corpus.owners.clone(),
            seed: self.seed,
            sweeps: self.sweeps_done,
        }
    }
}

/// Fits LDA with `params.sweeps` Gibbs sweeps after random initialisation.
pub fn lda_fit(corpus: &Corpus, params: LdaParams, seed: u64) -> Result<TopicModel> {
    let mut sampler = GibbsSampler::new(corpus, params, seed)?;
    for _ in 0..params.sweeps {
        sampler.sweep();
    }
    Ok(sampler.model())
}

/// exp(−mean log p(w | d)) over the model's own documents, where
/// p(w | d) = Σ_k θ_{d,k} φ_{k,w} with θ = (N_dk + α)/(len d + Kα).
/// `corpus` must hold the documents the model was fitted on, in order.
pub fn perplexity(model: &TopicModel, corpus: &Corpus) -> Result<f64> {
    if corpus.docs.len() != model.n_docs() {
        return Err(Error::dims(
            "perplexity",
            format!("{} documents vs {} in the model", corpus.docs.len(), model.n_docs()),
        ));
    }
    let docs = map_to_model(model, corpus)?;
    let thetas = (0..model.n_docs()).map(|d| {
        (0..model.k)
            .map(|t| model.doc_topic(d, t) as f64)
            .collect::<Vec<f64>>()
    });
    perplexity_from_counts(model, &docs, thetas)
}

/// Perplexity of unseen documents; each document's topic counts come from
/// [`lda_infer`] with seed `seed + doc index`.
pub fn heldout_perplexity(model: &TopicModel, corpus: &Corpus, sweeps: usize, seed: u64) -> Result<f64> {
    let docs = map_to_model(model, corpus)?;
    let mut thetas = Vec::with_capacity(docs.len());
    for (d, doc) in corpus.docs.iter().enumerate() {
        let words: Vec<&str> = doc.iter().map(|&w| corpus.vocab.word(w)).collect();
        let inf = lda_infer(model, &words, sweeps, seed.wrapping_add(d as u64));
        thetas.push(inf.doc_topic.iter().map(|&c| c as f64).collect());
    }
    perplexity_from_counts(model, &docs, thetas.into_iter())
}

fn map_to_model(model: &TopicModel, corpus: &Corpus) -> Result<Vec<Vec<usize>>> {
    corpus
        .docs
        .iter()
        .map(|doc| {
            doc.iter()
                .map(|&w| {
                    let word = corpus.vocab.word(w);
                    model.vocab.id(word).ok_or_else(|| Error::UnknownToken(word.to_string()))
                })
                .collect()
        })
        .collect()
}

fn perplexity_from_counts(
    model: &TopicModel,
    docs: &[Vec<usize>],
    doc_topic_counts: impl Iterator<Item = Vec<f64>>,
) -> Result<f64> {
    let k = model.k as f64;
    let mut log_sum = 0.0;
    let mut n = 0usize;
    for (doc, counts) in docs.iter().zip(doc_topic_counts) {
        let denom = doc.len() as f64 + k * model.alpha;
        let theta: Vec<f64> = counts.iter().map(|c| (c + model.alpha) / denom).collect();
        for &w in doc {
            let p: f64 = theta.iter().enumerate().map(|(t, th)| th * model.phi(t, w)).sum();
            log_sum += p.ln();
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::EmptyCorpus);
    }
    Ok((-log_sum / n as f64).exp())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Inference {
    /// Topic of each in-vocabulary token, in document order.
    pub assignments: Vec<usize>,
    pub doc_topic: Vec<u32>,
    /// Tokens absent from the model vocabulary.
    pub skipped: usize,
}

/// Folds a new document into a fitted model: Gibbs sampling over its
/// tokens with the topic-word distributions held fixed.
pub fn lda_infer<S: AsRef<str>>(model: &TopicModel, doc: &[S], sweeps: usize, seed: u64) -> Inference {
    let k = model.k;
    let words: Vec<usize> = doc.iter().filter_map(|w| model.vocab.id(w.as_ref())).collect();
    let skipped = doc.len() - words.len();
    let mut rng = Rng::new(seed);
    let mut z: Vec<usize> = words.iter().map(|_| rng.below(k)).collect();
    let mut counts = vec![0u32; k];
    for &t in &z {
        counts[t] += 1;
    }
    let phi: Vec<Vec<f64>> = words
        .iter()
        .map(|&w| (0..k).map(|t| model.phi(t, w)).collect())
        .collect();
    let mut cum = vec![0.0; k];
    for _ in 0..sweeps {
        for i in 0..words.len() {
            counts[z[i]] -= 1;
            let mut total = 0.0;
            for t in 0..k {
                total += (counts[t] as f64 + model.alpha) * phi[i][t];
                cum[t] = total;
            }
            let u = rng.uniform() * total;
            let new = cum.iter().position(|&c| u < c).unwrap_or(k - 1);
            counts[new] += 1;
            z[i] = new;
        }
    }
    Inference {
        assignments: z,
        doc_topic: counts,
        skipped,
    }
}

/// Share of a patient's tokens assigned to each topic, over all their notes.
pub fn topic_vectorize<A: AsRef<[usize]>>(k: usize, patient_id: &str, docs: &[A]) -> Result<Vec<f64>> {
    let mut counts = vec![0usize; k];
    let mut total = 0usize;
    for doc in docs {
        for &t in doc.as_ref() {
            if t >= k {
                return Err(Error::InvalidParams(format!("topic {t} out of range for K = {k}")));
            }
            counts[t] += 1;
            total += 1;
        }
    }
    if total == 0 {
        return Err(Error::NoNotes(vec![patient_id.to_string()]));
    }
    Ok(counts.into_iter().map(|c| c as f64 / total as f64).collect())
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TopicModelFile {
    k: usize,
    alpha: f64,
    beta: f64,
    vocabulary: Vec<String>,
    /// K × V, row-major.
    topic_word: Vec<u32>,
    topic_totals: Vec<u32>,
    /// D × K, row-major.
    doc_topic: Vec<u32>,
    doc_owners: Vec<String>,
    doc_words: Vec<Vec<u32>>,
    assignments: Vec<Vec<u32>>,
    seed: u64,
    sweeps: usize,
}

impl From<&TopicModel> for TopicModelFile {
    fn from(m: &TopicModel) -> Self {
        Self {
            k: m.k,
            alpha: m.alpha,
            beta: m.beta,
            vocabulary: m.vocab.words().to_vec(),
            topic_word: m.topic_word.clone(),
            topic_totals: m.topic_totals.clone(),
            doc_topic: m.doc_topic.clone(),
            doc_owners: m.doc_owners.clone(),
            doc_words: m.doc_words.clone(),
            assignments: m.assignments.clone(),
            seed: m.seed,
            sweeps: m.sweeps,
        }
    }
}

impl TryFrom<TopicModelFile> for TopicModel {
    type Error = Error;

    fn try_from(f: TopicModelFile) -> Result<Self> {
        let model = TopicModel::from_assignments(
            LdaParams {
                k: f.k,
                alpha: f.alpha,
                beta: f.beta,
                sweeps: f.sweeps,
            },
            Vocabulary::from_words(f.vocabulary)?,
            f.doc_words,
            f.assignments,
            f.doc_owners,
            f.seed,
        )?;
        if model.topic_word != f.topic_word
            || model.topic_totals != f.topic_totals
            || model.doc_topic != f.doc_topic
        {
            return Err(Error::InvalidParams(
                "stored counts disagree with stored assignments".into(),
            ));
        }
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    fn tiny_corpus() -> Corpus {
        let docs = vec![
            words("heart valve echo heart valve"),
            words("renal kidney dialysis renal"),
            words("heart echo kidney"),
        ];
        Corpus::from_tokens(vec!["a".into(), "b".into(), "c".into()], &docs).unwrap()
    }

    #[test]
    fn single_word_vocabulary_has_perplexity_one() {
        let c = Corpus::from_tokens(vec!["p".into(), "q".into()], &[words("x x x"), words("x x")]).unwrap();
        let m = lda_fit(&c, LdaParams::with_topics(3, 10), 1).unwrap();
        for t in 0..3 {
            assert_eq!(m.phi(t, 0), 1.0);
        }
        assert!((perplexity(&m, &c).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_sweeps_keeps_initialisation() {
        let c = tiny_corpus();
        let params = LdaParams::with_topics(2, 0);
        let m = lda_fit(&c, params, 8).unwrap();
        let s = GibbsSampler::new(&c, params, 8).unwrap();
        assert_eq!(m, s.model());
        assert!(m.counts_consistent());
        assert_eq!(m.sweeps(), 0);
    }

    #[test]
    fn uniform_phi_gives_perplexity_v() {
        // Every word once per topic: φ is uniform whatever β is.
        let c = Corpus::from_tokens(
            vec!["p".into(), "q".into()],
            &[words("a b c d"), words("a b c d")],
        )
        .unwrap();
        let m = TopicModel::from_assignments(
            LdaParams::with_topics(2, 0),
            c.vocab.clone(),
            vec![vec![0, 1, 2, 3], vec![0, 1, 2, 3]],
            vec![vec![0, 0, 0, 0], vec![1, 1, 1, 1]],
            c.owners.clone(),
            0,
        )
        .unwrap();
        assert!((perplexity(&m, &c).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn counts_stay_consistent_and_conditionals_normalised() {
        let c = tiny_corpus();
        let mut s = GibbsSampler::new(&c, LdaParams::with_topics(3, 0), 4).unwrap();
        for _ in 0..5 {
            s.sweep();
            assert!(s.model().counts_consistent());
            for d in 0..c.docs.len() {
                for i in 0..c.docs[d].len() {
                    let p = s.conditional(d, i);
                    assert!(p.iter().all(|&x| x > 0.0));
                    assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn fit_errors() {
        let empty = Corpus::from_tokens(vec!["p".into()], &[vec![]]).unwrap();
        assert!(matches!(
            lda_fit(&empty, LdaParams::with_topics(2, 1), 0),
            Err(Error::EmptyCorpus)
        ));
        let c = tiny_corpus();
        assert!(matches!(
            lda_fit(&c, LdaParams::with_topics(1, 1), 0),
            Err(Error::InvalidHyperparameter(_))
        ));
        let bad = LdaParams { beta: 0.0, ..LdaParams::with_topics(2, 1) };
        assert!(lda_fit(&c, bad, 0).is_err());
    }

    #[test]
    fn inference_edge_cases() {
        let c = tiny_corpus();
        let m = lda_fit(&c, LdaParams::with_topics(2, 20), 3).unwrap();
        let empty: [&str; 0] = [];
        let inf = lda_infer(&m, &empty, 10, 1);
        assert!(inf.assignments.is_empty());
        let doc = ["heart", "unknownword", "renal"];
        let a = lda_infer(&m, &doc, 10, 5);
        assert_eq!(a.skipped, 1);
        assert_eq!(a.assignments.len(), 2);
        assert_eq!(a, lda_infer(&m, &doc, 10, 5));
    }

    #[test]
    fn unknown_token_in_perplexity() {
        let c = tiny_corpus();
        let m = lda_fit(&c, LdaParams::with_topics(2, 2), 3).unwrap();
        let other = Corpus::from_tokens(
            vec!["a".into(), "b".into(), "c".into()],
            &[words("heart"), words("liver"), words("echo")],
        )
        .unwrap();
        assert!(matches!(perplexity(&m, &other), Err(Error::UnknownToken(w)) if w == "liver"));
    }

    #[test]
    fn vectorize_by_hand() {
        let v = topic_vectorize(2, "p", &[vec![0, 1, 1, 0], vec![1, 1, 0, 1, 1, 0]]).unwrap();
        assert_eq!(v, [0.4, 0.6]);
        assert_eq!(topic_vectorize(3, "p", &[vec![2, 2]]).unwrap(), [0.0, 0.0, 1.0]);
        let none: [Vec<usize>; 1] = [vec![]];
        assert!(matches!(topic_vectorize(3, "p9", &none), Err(Error::NoNotes(ids)) if ids == ["p9"]));
    }

    #[test]
    fn model_file_round_trip() {
        let c = tiny_corpus();
        let m = lda_fit(&c, LdaParams::with_topics(2, 5), 11).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("lda.json");
        m.save(&p).unwrap();
        assert_eq!(TopicModel::load(&p).unwrap(), m);
    }
}
