use serde::{Deserialize, Serialize};

use super::corpus::Note;
use crate::error::{Error, Result};
use crate::numcore::Rng;

/// Settings of the synthetic clinical-note generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoteSynthConfig {
    pub n_topics: usize,
    pub words_per_topic: usize,
    pub tokens_per_note: usize,
    pub max_notes_per_patient: usize,
    /// Share of patients who get no notes at all.
    pub missing_fraction: f64,
    /// Extra log-weight of topic 0 for patients with a positive 30d label.
    pub label_shift: f64,
    /// Probability that a sentence is a negated finding.
    pub negation_rate: f64,
}

impl Default for NoteSynthConfig {
    fn default() -> Self {
        Self {
            n_topics: 5,
            words_per_topic: 10,
            tokens_per_note: 40,
            max_notes_per_patient: 3,
            missing_fraction: 0.0,
            label_shift: 1.5,
            negation_rate: 0.1,
        }
    }
}

impl NoteSynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_topics == 0 || self.words_per_topic == 0 || self.tokens_per_note == 0 {
            return Err(Error::InvalidConfig("note generator sizes must be positive".into()));
        }
        if self.max_notes_per_patient == 0 {
            return Err(Error::InvalidConfig("max_notes_per_patient must be at least 1".into()));
        }
        for (name, p) in [("missing_fraction", self.missing_fraction), ("negation_rate", self.negation_rate)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidConfig(format!("{name} = {p} outside [0, 1]")));
            }
        }
        Ok(())
    }

    /// Word `w` of topic `t`, e.g. `k2w07`.
    pub fn word(t: usize, w: usize) -> String {
        format!("k{t}w{w:02}")
    }
}

/// Notes whose topic mixture leans towards topic 0 for patients who died
/// within 30 days. Sentences are ten tokens long and end with a period.
pub fn synth_notes(ids: &[String], labels_30d: Option<&[u8]>, cfg: &NoteSynthConfig, seed: u64) -> Result<Vec<Note>> {
    cfg.validate()?;
    if let Some(l) = labels_30d {
        if l.len() != ids.len() {
            return Err(Error::LengthMismatch {
                left: ids.len(),
                right: l.len(),
            });
        }
    }
    let mut rng = Rng::new(seed);
    let mut notes = Vec::new();
    for (i, id) in ids.iter().enumerate() {
        if rng.uniform() < cfg.missing_fraction {
            continue;
        }
        let positive = labels_30d.is_some_and(|l| l[i] == 1);
        let theta: Vec<f64> = (0..cfg.n_topics)
            .map(|t| {
                let shift = if t == 0 && positive { cfg.label_shift } else { 0.0 };
                (rng.normal() + shift).exp()
            })
            .collect();
        let n_notes = 1 + rng.below(cfg.max_notes_per_patient);
        for _ in 0..n_notes {
            let mut text = String::new();
            let mut in_sentence = 0;
            for _ in 0..cfg.tokens_per_note {
                if in_sentence == 0 && rng.uniform() < cfg.negation_rate {
                    text.push_str("denies ");
                }
                let t = rng.categorical(&theta);
                text.push_str(&NoteSynthConfig::word(t, rng.below(cfg.words_per_topic)));
                in_sentence += 1;
                if in_sentence == 10 {
                    text.push_str(". ");
                    in_sentence = 0;
                } else {
                    text.push(' ');
                }
            }
            notes.push(Note {
                patient_id: id.clone(),
                text: text.trim_end().to_string(),
            });
        }
    }
    Ok(notes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textmodel::preprocess_note;

    #[test]
    fn words_survive_preprocessing() {
        let w = NoteSynthConfig::word(3, 7);
        assert_eq!(preprocess_note(&w), [w]);
    }

    #[test]
    fn deterministic_and_complete() {
        let ids: Vec<String> = (0..20).map(|i| format!("P{i}")).collect();
        let cfg = NoteSynthConfig::default();
        let a = synth_notes(&ids, None, &cfg, 3).unwrap();
        assert_eq!(a, synth_notes(&ids, None, &cfg, 3).unwrap());
        for id in &ids {
            assert!(a.iter().any(|n| &n.patient_id == id));
        }
        let some_missing = NoteSynthConfig { missing_fraction: 0.5, ..cfg };
        let b = synth_notes(&ids, None, &some_missing, 3).unwrap();
        assert!(ids.iter().any(|id| !b.iter().any(|n| &n.patient_id == id)));
    }
}
