//! Self-describing JSON document for one heterogeneous graph:
//! `{nodes: [{id, type}], edges: [[u, v]], features: {type: {kind, alphabet?, rows}}, labels?, graph_label?}`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Number;

use super::{FeatureKind, FeatureMatrix, HeteroGraph, NodeId};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeDocument {
    pub id: NodeId,
    #[serde(rename = "type")]
    pub ty: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureDocument {
    pub kind: FeatureKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alphabet: Option<Vec<i64>>,
    pub rows: Vec<Vec<Number>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphDocument {
    pub nodes: Vec<NodeDocument>,
    pub edges: Vec<[NodeId; 2]>,
    #[serde(default)]
    pub features: BTreeMap<String, FeatureDocument>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<BTreeMap<NodeId, usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph_label: Option<usize>,
}

impl From<&FeatureMatrix> for FeatureDocument {
    fn from(m: &FeatureMatrix) -> Self {
        let rows = (0..m.n_rows())
            .map(|i| match m.discrete_row(i) {
                Some(row) => row.iter().map(|&v| Number::from(v)).collect(),
                None => m
                    .continuous_row(i)
                    .unwrap()
                    .iter()
                    .map(|&v| Number::from_f64(v).expect("feature cells are finite"))
                    .collect(),
            })
            .collect();
        Self {
            kind: m.kind(),
            alphabet: m.alphabet().map(<[i64]>::to_vec),
            rows,
        }
    }
}

impl FeatureDocument {
    pub fn to_matrix(&self, ty: &str) -> Result<FeatureMatrix> {
        let width = self.rows.first().map_or(0, Vec::len);
        let bad = |reason: String| Error::Parse {
            context: format!("features.{ty}"),
            reason,
        };
        match self.kind {
            FeatureKind::Discrete => {
                let rows = self
                    .rows
                    .iter()
                    .map(|r| {
                        r.iter()
                            .map(|v| v.as_i64().ok_or_else(|| bad(format!("non-integer cell {v}"))))
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<Vec<_>>>()?;
                match &self.alphabet {
                    Some(a) => FeatureMatrix::discrete(a.clone(), width, rows),
                    None => FeatureMatrix::discrete_inferred(width, rows),
                }
                .map_err(|e| bad(e.to_string()))
            }
            FeatureKind::Continuous => {
                let rows = self
                    .rows
                    .iter()
                    .map(|r| r.iter().map(|v| v.as_f64().unwrap_or(f64::NAN)).collect())
                    .collect();
                FeatureMatrix::continuous(width, rows).map_err(|e| bad(e.to_string()))
            }
        }
    }
}

impl From<HeteroGraph> for GraphDocument {
    fn from(g: HeteroGraph) -> Self {
        GraphDocument::from(&g)
    }
}

impl From<&HeteroGraph> for GraphDocument {
    fn from(g: &HeteroGraph) -> Self {
        Self {
            nodes: g
                .nodes()
                .iter()
                .map(|n| NodeDocument {
                    id: n.id,
                    ty: n.ty.clone(),
                })
                .collect(),
            edges: g.edges().iter().map(|&(u, v)| [u, v]).collect(),
            features: g
                .features()
                .iter()
                .map(|(ty, m)| (ty.clone(), FeatureDocument::from(m)))
                .collect(),
            labels: (!g.labels().is_empty()).then(|| g.labels().clone()),
            graph_label: g.graph_label(),
        }
    }
}

impl TryFrom<GraphDocument> for HeteroGraph {
    type Error = Error;

    fn try_from(doc: GraphDocument) -> Result<Self> {
        let mut g = HeteroGraph::new();
        for n in &doc.nodes {
            g.add_node(n.id, &n.ty)?;
        }
        for &[u, v] in &doc.edges {
            g.add_edge(u, v)?;
        }
        for (ty, f) in &doc.features {
            g.set_features(ty, f.to_matrix(ty)?)?;
        }
        for (&id, &c) in doc.labels.iter().flatten() {
            g.set_label(id, c)?;
        }
        g.set_graph_label(doc.graph_label);
        g.validate()?;
        Ok(g)
    }
}

impl Serialize for HeteroGraph {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        GraphDocument::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for HeteroGraph {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let doc = GraphDocument::deserialize(d)?;
        HeteroGraph::try_from(doc).map_err(serde::de::Error::custom)
    }
}

/// Parse one graph document.
pub fn load_hetero_graph(bytes: &[u8]) -> Result<HeteroGraph> {
    let doc: GraphDocument = serde_json::from_slice(bytes).map_err(|e| Error::Parse {
        context: format!("line {} column {}", e.line(), e.column()),
        reason: e.to_string(),
    })?;
    HeteroGraph::try_from(doc)
}

/// Pretty-printed graph document.
pub fn write_hetero_graph(g: &HeteroGraph) -> Result<String> {
    Ok(serde_json::to_string_pretty(&GraphDocument::from(g))?)
}
