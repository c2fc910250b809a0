use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Query label used by schedule normalization.
pub const SKIP: &str = "SKIP";
/// Response label paired with [`SKIP`].
pub const ACK: &str = "ACK";

/// A finite, ordered set of opaque labels.
///
/// Symbols are referred to by their position everywhere in the crate; labels
/// only matter for display and file formats.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Space {
    labels: Vec<String>,
}

impl Space {
    pub fn new<I, S>(labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(Error::InvalidParameter("a space needs at least one label".into()));
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(Error::InvalidParameter(format!("duplicate label {l:?}")));
            }
        }
        Ok(Space { labels })
    }

    /// Labels `"0"`, `"1"`, ..., `"n-1"`.
    pub fn numbered(n: usize) -> Self {
        assert!(n > 0, "a space needs at least one label");
        Space {
            labels: (0..n).map(|i| i.to_string()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label(&self, index: usize) -> &str {
        &self.labels[index]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn contains(&self, label: &str) -> bool {
        self.index_of(label).is_some()
    }

    /// Returns a copy with `label` appended, or an error if it already exists.
    pub fn with_reserved(&self, label: &str) -> Result<Self> {
        if self.contains(label) {
            return Err(Error::ReservedLabel(label.to_string()));
        }
        let mut labels = self.labels.clone();
        labels.push(label.to_string());
        Ok(Space { labels })
    }

    /// Ordered union of several spaces; first occurrence wins.
    pub fn union<'a>(spaces: impl IntoIterator<Item = &'a Space>) -> Self {
        let mut labels: Vec<String> = Vec::new();
        for s in spaces {
            for l in &s.labels {
                if !labels.contains(l) {
                    labels.push(l.clone());
                }
            }
        }
        Space { labels }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_duplicates_and_empty() {
        assert!(Space::new(["a", "b", "a"]).is_err());
        assert!(Space::new(Vec::<String>::new()).is_err());
    }

    #[test]
    fn reserved_label_is_refused_twice() {
        let s = Space::new(["x"]).unwrap().with_reserved(SKIP).unwrap();
        assert_eq!(s.index_of(SKIP), Some(1));
        assert!(matches!(s.with_reserved(SKIP), Err(Error::ReservedLabel(_))));
    }

    #[test]
    fn union_keeps_first_order() {
        let a = Space::new(["0", "1"]).unwrap();
        let b = Space::new(["1", "2"]).unwrap();
        assert_eq!(Space::union([&a, &b]).labels(), &["0", "1", "2"]);
    }
}
