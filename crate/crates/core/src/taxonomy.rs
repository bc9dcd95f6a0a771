//! Class-name lists for the two classification tasks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Aspect categories of the insurance review corpus, in the canonical order.
pub const REVIEW_ASPECTS: [&str; 13] = [
    "Internet usage",
    "Global Management",
    "Loyalty",
    "Contract",
    "Financial",
    "Accessibility",
    "Reception",
    "Empathy",
    "Information provided",
    "Processing time",
    "Visibility",
    "Expert",
    "Repairing",
];

/// Training-split counts per aspect, aligned with [`REVIEW_ASPECTS`].
pub const REVIEW_ASPECT_TRAIN_COUNTS: [usize; 13] =
    [330, 2562, 1078, 347, 776, 730, 959, 1144, 1184, 1845, 603, 442, 427];

/// Validation-split counts per aspect, aligned with [`REVIEW_ASPECTS`].
pub const REVIEW_ASPECT_VALIDATION_COUNTS: [usize; 13] =
    [67, 525, 203, 61, 184, 129, 237, 184, 215, 379, 147, 92, 94];

pub const SENTIMENTS: [&str; 2] = ["Positive", "Negative"];

/// Training / validation counts for `Positive`, `Negative`.
pub const SENTIMENT_COUNTS: [(usize, usize); 2] = [(8254, 1664), (4173, 853)];

/// Total training / validation instances.
pub const TOTAL_INSTANCES: (usize, usize) = (6929, 1456);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Aspect,
    Sentiment,
}

impl Task {
    pub const ALL: [Task; 2] = [Task::Aspect, Task::Sentiment];

    pub fn name(self) -> &'static str {
        match self {
            Task::Aspect => "aspect",
            Task::Sentiment => "sentiment",
        }
    }
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Taxonomy {
    pub aspects: Vec<String>,
    pub sentiment: Vec<String>,
}

impl Default for Taxonomy {
    fn default() -> Self {
        Self {
            aspects: REVIEW_ASPECTS.iter().map(|s| s.to_string()).collect(),
            sentiment: SENTIMENTS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl Taxonomy {
    pub fn classes(&self, task: Task) -> &[String] {
        match task {
            Task::Aspect => &self.aspects,
            Task::Sentiment => &self.sentiment,
        }
    }

    pub fn num_classes(&self, task: Task) -> usize {
        self.classes(task).len()
    }

    pub fn validate(&self) -> Result<()> {
        for task in Task::ALL {
            let classes = self.classes(task);
            if classes.is_empty() {
                return Err(Error::Config(format!("taxonomy for {task} is empty")));
            }
            let mut seen = std::collections::HashSet::new();
            for c in classes {
                if !seen.insert(c) {
                    return Err(Error::Config(format!("duplicate {task} class {c:?}")));
                }
            }
        }
        Ok(())
    }

    /// Encodes class names as a binary vector for `task`.
    pub fn encode(&self, task: Task, names: &[String]) -> Result<Vec<u8>> {
        let classes = self.classes(task);
        let mut out = vec![0u8; classes.len()];
        for name in names {
            match classes.iter().position(|c| c == name) {
                Some(i) => out[i] = 1,
                None => {
                    return Err(Error::Taxonomy {
                        task: task.name().to_string(),
                        label: name.clone(),
                    })
                }
            }
        }
        Ok(out)
    }

    pub fn decode(&self, task: Task, values: &[u8]) -> Vec<String> {
        self.classes(task)
            .iter()
            .zip(values)
            .filter(|(_, &v)| v == 1)
            .map(|(c, _)| c.clone())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_counts_are_consistent() {
        assert_eq!(REVIEW_ASPECTS.len(), REVIEW_ASPECT_TRAIN_COUNTS.len());
        assert_eq!(REVIEW_ASPECT_TRAIN_COUNTS.iter().sum::<usize>(), 12427);
        assert_eq!(REVIEW_ASPECT_VALIDATION_COUNTS.iter().sum::<usize>(), 2517);
        // multi-label: label totals exceed instance totals
        assert!(REVIEW_ASPECT_TRAIN_COUNTS.iter().sum::<usize>() > TOTAL_INSTANCES.0);
        assert!(SENTIMENT_COUNTS[0].0 + SENTIMENT_COUNTS[1].0 > TOTAL_INSTANCES.0);
    }

    #[test]
    fn encode_two_aspects() {
        let t = Taxonomy::default();
        let v = t
            .encode(Task::Aspect, &["Loyalty".into(), "Contract".into()])
            .unwrap();
        assert_eq!(v.iter().filter(|&&b| b == 1).count(), 2);
        assert_eq!(v[2], 1);
        assert_eq!(v[3], 1);
        assert_eq!(t.decode(Task::Aspect, &v), vec!["Loyalty", "Contract"]);
    }

    #[test]
    fn unknown_aspect_rejected() {
        let t = Taxonomy::default();
        let err = t.encode(Task::Aspect, &["Pricing".into()]).unwrap_err();
        assert!(matches!(err, Error::Taxonomy { .. }));
    }

    #[test]
    fn duplicate_class_is_config_error() {
        let t = Taxonomy {
            aspects: vec!["a".into(), "a".into()],
            sentiment: vec!["p".into()],
        };
        assert!(t.validate().is_err());
    }
}
