//! Versioned JSON model files.
//!
//! Layout: a header (`format_version`, `kind`, `classes`, `class_values`,
//! `params`, `feature_schema_version`, `n_features`, `init`) followed by one
//! set of flat node arrays per tree. Leaves carry `feature = -1`; split nodes
//! carry an empty `value`. Floats are written in shortest round-trip form, so
//! a reload is bit-exact.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::dataset::ClassSet;
use super::ensemble::{EnsembleModel, HyperParams, ModelKind};
use super::tree::{Node, Tree};
use crate::error::{Error, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    kind: ModelKind,
    classes: Vec<String>,
    class_values: Vec<f64>,
    params: HyperParams,
    feature_schema_version: String,
    n_features: usize,
    init: Vec<f64>,
    trees: Vec<TreeArrays>,
}

#[derive(Serialize, Deserialize)]
struct TreeArrays {
    feature: Vec<i64>,
    threshold: Vec<f64>,
    left: Vec<i64>,
    right: Vec<i64>,
    value: Vec<Vec<f64>>,
}

impl From<&Tree> for TreeArrays {
    fn from(tree: &Tree) -> Self {
        let n = tree.nodes.len();
        let mut t = TreeArrays {
            feature: Vec::with_capacity(n),
            threshold: Vec::with_capacity(n),
            left: Vec::with_capacity(n),
            right: Vec::with_capacity(n),
            value: Vec::with_capacity(n),
        };
        for node in &tree.nodes {
            match node {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    t.feature.push(*feature as i64);
                    t.threshold.push(*threshold);
                    t.left.push(*left as i64);
                    t.right.push(*right as i64);
                    t.value.push(Vec::new());
                }
                Node::Leaf { value } => {
                    t.feature.push(-1);
                    t.threshold.push(0.0);
                    t.left.push(-1);
                    t.right.push(-1);
                    t.value.push(value.clone());
                }
            }
        }
        t
    }
}

impl TreeArrays {
    fn into_tree(self, n_features: usize, leaf_width: usize) -> std::result::Result<Tree, String> {
        let n = self.feature.len();
        if n == 0 {
            return Err("tree without nodes".into());
        }
        if [self.threshold.len(), self.left.len(), self.right.len(), self.value.len()]
            .iter()
            .any(|&l| l != n)
        {
            return Err("node arrays differ in length".into());
        }
        let mut nodes = Vec::with_capacity(n);
        for i in 0..n {
            let f = self.feature[i];
            if f < 0 {
                let value = self.value[i].clone();
                if value.len() != leaf_width || value.iter().any(|v| !v.is_finite()) {
                    return Err(format!("node {i}: bad leaf value"));
                }
                nodes.push(Node::Leaf { value });
            } else {
                let (l, r) = (self.left[i], self.right[i]);
                // Children follow their parent, which also rules out cycles.
                let child_ok = |c: i64| c > i as i64 && (c as usize) < n;
                if f as usize >= n_features || !child_ok(l) || !child_ok(r) || !self.threshold[i].is_finite() {
                    return Err(format!("node {i}: bad split"));
                }
                nodes.push(Node::Split {
                    feature: f as usize,
                    threshold: self.threshold[i],
                    left: l as usize,
                    right: r as usize,
                });
            }
        }
        Ok(Tree { nodes })
    }
}

pub fn model_to_json(model: &EnsembleModel) -> Result<String> {
    let file = ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        kind: model.kind,
        classes: model.classes.names.clone(),
        class_values: model.classes.values.clone(),
        params: model.params.clone(),
        feature_schema_version: model.feature_schema_version.clone(),
        n_features: model.n_features,
        init: model.init.clone(),
        trees: model.trees.iter().map(TreeArrays::from).collect(),
    };
    Ok(serde_json::to_string(&file)?)
}

pub fn model_from_json(text: &str, origin: &Path) -> Result<EnsembleModel> {
    let corrupt = |msg: String| Error::CorruptModel {
        path: origin.to_path_buf(),
        msg,
    };
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| corrupt(e.to_string()))?;
    match value.get("format_version").and_then(|v| v.as_u64()) {
        Some(v) if v == MODEL_FORMAT_VERSION as u64 => {}
        Some(v) => {
            return Err(Error::ModelVersion {
                found: v.to_string(),
                supported: MODEL_FORMAT_VERSION.to_string(),
            })
        }
        None => return Err(corrupt("missing format_version".into())),
    }
    let file: ModelFile = serde_json::from_value(value).map_err(|e| corrupt(e.to_string()))?;
    if file.classes.len() != file.class_values.len() || file.classes.is_empty() {
        return Err(corrupt("class names and values disagree".into()));
    }
    file.params.validate().map_err(|e| corrupt(e.to_string()))?;
    let k = file.classes.len();
    let (leaf_width, init_len) = match file.kind {
        ModelKind::GbClassifier => (1, k),
        ModelKind::GbRegressor => (1, 1),
        ModelKind::RfClassifier => (k, 0),
        ModelKind::RfRegressor => (1, 0),
    };
    if file.init.len() != init_len || file.init.iter().any(|v| !v.is_finite()) {
        return Err(corrupt("bad init scores".into()));
    }
    if file.trees.is_empty() && !file.kind.is_boosted() {
        return Err(corrupt("forest without trees".into()));
    }
    if file.kind == ModelKind::GbClassifier && !file.trees.len().is_multiple_of(k) {
        return Err(corrupt("boosted tree count is not a multiple of the class count".into()));
    }
    let n_features = file.n_features;
    let trees = file
        .trees
        .into_iter()
        .enumerate()
        .map(|(t, arrays)| arrays.into_tree(n_features, leaf_width).map_err(|m| corrupt(format!("tree {t}: {m}"))))
        .collect::<Result<Vec<_>>>()?;
    Ok(EnsembleModel {
        kind: file.kind,
        n_features,
        feature_schema_version: file.feature_schema_version,
        classes: ClassSet {
            names: file.classes,
            values: file.class_values,
        },
        params: file.params,
        init: file.init,
        trees,
    })
}

pub fn save_model(model: &EnsembleModel, path: &Path) -> Result<()> {
    let json = model_to_json(model)?;
    fs::write(path, json).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<EnsembleModel> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_json(&text, path)
}
