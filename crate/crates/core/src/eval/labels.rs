use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Per-node label sets. Label ids are contiguous `0..label_count`; an empty
/// set marks an unlabeled node, which experiments ignore.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSet {
    labels: Vec<Vec<usize>>,
    names: Vec<String>,
}

impl LabelSet {
    /// `labels[i]` lists the label ids of node `i`; ids must be below
    /// `label_count`. Duplicates are removed.
    pub fn new(labels: Vec<Vec<usize>>, label_count: usize) -> Result<Self> {
        let names = (0..label_count).map(|l| l.to_string()).collect();
        Self::with_names(labels, names)
    }

    pub fn with_names(mut labels: Vec<Vec<usize>>, names: Vec<String>) -> Result<Self> {
        for (i, set) in labels.iter_mut().enumerate() {
            set.sort_unstable();
            set.dedup();
            if let Some(&l) = set.last() {
                if l >= names.len() {
                    return Err(Error::param(format!(
                        "node {i} has label {l} outside 0..{}",
                        names.len()
                    )));
                }
            }
        }
        Ok(LabelSet { labels, names })
    }

    /// One label per node.
    pub fn from_classes(classes: &[usize]) -> Result<Self> {
        let count = classes.iter().map(|&c| c + 1).max().unwrap_or(0);
        Self::new(classes.iter().map(|&c| vec![c]).collect(), count)
    }

    /// Reads `node<TAB>label[,label...]` lines (whitespace also separates
    /// the two fields) for the nodes in `node_ids`. Label ids are assigned in
    /// order of first appearance; unknown nodes are an error, nodes absent
    /// from the file stay unlabeled.
    pub fn load(path: impl AsRef<Path>, node_ids: &[String]) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let index: HashMap<&str, usize> = node_ids
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect();
        let mut label_ids: HashMap<String, usize> = HashMap::new();
        let mut names = Vec::new();
        let mut labels = vec![Vec::new(); node_ids.len()];
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |msg: String| Error::Parse {
                path: path.to_path_buf(),
                line: ln + 1,
                msg,
            };
            let mut fields = line.split_whitespace();
            let (Some(node), Some(list), None) = (fields.next(), fields.next(), fields.next())
            else {
                return Err(parse_err("expected `node<TAB>label[,label...]`".into()));
            };
            let &i = index
                .get(node)
                .ok_or_else(|| parse_err(format!("unknown node `{node}`")))?;
            for name in list.split(',').filter(|s| !s.is_empty()) {
                let id = *label_ids.entry(name.to_string()).or_insert_with(|| {
                    names.push(name.to_string());
                    names.len() - 1
                });
                labels[i].push(id);
            }
        }
        Self::with_names(labels, names)
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn label_count(&self) -> usize {
        self.names.len()
    }

    pub fn labels(&self, node: usize) -> &[usize] {
        &self.labels[node]
    }

    pub fn all(&self) -> &[Vec<usize>] {
        &self.labels
    }

    pub fn name(&self, label: usize) -> &str {
        &self.names[label]
    }

    pub fn labeled_nodes(&self) -> Vec<usize> {
        (0..self.n())
            .filter(|&i| !self.labels[i].is_empty())
            .collect()
    }

    /// Number of distinct labels that occur on at least one node.
    pub fn used_label_count(&self) -> usize {
        let mut seen = vec![false; self.label_count()];
        self.labels.iter().flatten().for_each(|&l| seen[l] = true);
        seen.iter().filter(|&&s| s).count()
    }
}
