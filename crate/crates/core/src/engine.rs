//! Session-based recommendation by two-hop expansion and in-degree ranking.
//!
//! For a seed object `m` the engine collects the kernels whose sessions
//! contain `m` (first expansion), then every object those kernels point at
//! (second expansion). Each candidate is scored by its incoming edges and
//! the candidates are sorted by descending score with `m` removed.
//!
//! Three extensions share the same pipeline:
//!
//! * **Weighted**: every edge contributes its kernel class weight instead of 1.
//! * **ThreeLayer**: one more kernel/object layer is added, single-object
//!   sessions are pruned, and the remaining objects are scored.
//! * **Pathway**: a sequence of seeds is scored by summing per-seed scores.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::graph::{GraphError, KernelIx, NodeId, ObjectIx, SessionGraph};
use crate::par::{self, Execution};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum EngineError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("unknown objects in pathway: {}", join_ids(.0))]
    UnknownPathwayObjects(Vec<NodeId>),
    #[error("pathway is empty")]
    EmptyPathway,
    #[error("weighted variant requires class weights")]
    MissingWeights,
    #[error("invalid class weight for `{class}`: {value}")]
    InvalidWeight { class: String, value: String },
    #[error("k must be at least 1")]
    InvalidCutoff,
    #[error("unrecognised {what} `{value}`")]
    Parse { what: &'static str, value: String },
}

fn join_ids(ids: &[NodeId]) -> String {
    ids.iter().map(|id| id.to_string()).collect::<Vec<_>>().join(", ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    #[default]
    Base,
    Weighted,
    ThreeLayer,
    Pathway,
}

impl FromStr for Variant {
    type Err = EngineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "base" => Ok(Variant::Base),
            "weighted" => Ok(Variant::Weighted),
            "three-layer" | "three_layer" | "threelayer" => Ok(Variant::ThreeLayer),
            "pathway" => Ok(Variant::Pathway),
            _ => Err(EngineError::Parse {
                what: "variant",
                value: s.to_string(),
            }),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Base => "base",
            Variant::Weighted => "weighted",
            Variant::ThreeLayer => "three_layer",
            Variant::Pathway => "pathway",
        })
    }
}

/// Which edges count towards a candidate's in-degree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegreeScope {
    /// Only edges from the seed's sessions: the co-session count.
    #[default]
    Subgraph,
    /// Every edge in the graph.
    Global,
}

impl FromStr for DegreeScope {
    type Err = EngineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "subgraph" => Ok(DegreeScope::Subgraph),
            "global" => Ok(DegreeScope::Global),
            _ => Err(EngineError::Parse {
                what: "scope",
                value: s.to_string(),
            }),
        }
    }
}

impl fmt::Display for DegreeScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DegreeScope::Subgraph => "subgraph",
            DegreeScope::Global => "global",
        })
    }
}

/// Per-class edge weights. Classes not listed weigh 1.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<String, f64>", into = "BTreeMap<String, f64>")]
pub struct ClassWeights {
    weights: BTreeMap<String, f64>,
}

impl ClassWeights {
    pub fn new(weights: impl IntoIterator<Item = (String, f64)>) -> Result<Self, EngineError> {
        let mut map = BTreeMap::new();
        for (class, value) in weights {
            if !(value.is_finite() && value >= 0.0) {
                return Err(EngineError::InvalidWeight {
                    class,
                    value: value.to_string(),
                });
            }
            map.insert(class, value);
        }
        Ok(ClassWeights { weights: map })
    }

    pub fn get(&self, class_id: &str) -> f64 {
        self.weights.get(class_id).copied().unwrap_or(1.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.weights.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

impl TryFrom<BTreeMap<String, f64>> for ClassWeights {
    type Error = EngineError;

    fn try_from(map: BTreeMap<String, f64>) -> Result<Self, Self::Error> {
        ClassWeights::new(map)
    }
}

impl From<ClassWeights> for BTreeMap<String, f64> {
    fn from(w: ClassWeights) -> Self {
        w.weights
    }
}

/// Parses `K1=1,K2=0.5`.
impl FromStr for ClassWeights {
    type Err = EngineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut pairs = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (class, value) = part.split_once('=').ok_or_else(|| EngineError::Parse {
                what: "weight",
                value: part.to_string(),
            })?;
            let class = class.trim().to_string();
            let value: f64 = value.trim().parse().map_err(|_| EngineError::InvalidWeight {
                class: class.clone(),
                value: value.trim().to_string(),
            })?;
            pairs.push((class, value));
        }
        ClassWeights::new(pairs)
    }
}

impl fmt::Display for ClassWeights {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.iter().map(|(c, w)| format!("{c}={}", Score(w))).collect();
        f.write_str(&parts.join(","))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RecommendParams {
    #[serde(default)]
    pub variant: Variant,
    #[serde(default)]
    pub scope: DegreeScope,
    #[serde(default)]
    pub weights: Option<ClassWeights>,
    /// Optional cutoff; the full sorted list when absent.
    #[serde(default)]
    pub k: Option<usize>,
}

impl RecommendParams {
    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    pub fn with_scope(mut self, scope: DegreeScope) -> Self {
        self.scope = scope;
        self
    }

    pub fn with_weights(mut self, weights: ClassWeights) -> Self {
        self.weights = Some(weights);
        self
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k = Some(k);
        self
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if self.k == Some(0) {
            return Err(EngineError::InvalidCutoff);
        }
        if self.variant == Variant::Weighted && self.weights.is_none() {
            return Err(EngineError::MissingWeights);
        }
        Ok(())
    }

    /// Weight per class slot of `g`, or `None` when every edge counts 1.
    fn class_weights(&self, g: &SessionGraph) -> Result<Option<Vec<f64>>, EngineError> {
        self.validate()?;
        let weights = match (self.variant, &self.weights) {
            (Variant::Base, _) | (_, None) => return Ok(None),
            (_, Some(w)) => w,
        };
        Ok(Some(g.classes().iter().map(|c| weights.get(&c.class_id)).collect()))
    }
}

/// Non-negative ranking score. Integral values print without a fraction.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Deserialize)]
#[serde(transparent)]
pub struct Score(pub f64);

impl Score {
    pub fn value(self) -> f64 {
        self.0
    }

    fn as_integer(self) -> Option<u64> {
        (self.0.fract() == 0.0 && self.0 >= 0.0 && self.0 < 9.0e15).then_some(self.0 as u64)
    }
}

impl fmt::Display for Score {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.as_integer() {
            Some(i) => write!(f, "{i}"),
            None => write!(f, "{}", self.0),
        }
    }
}

impl Serialize for Score {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self.as_integer() {
            Some(i) => serializer.serialize_u64(i),
            None => serializer.serialize_f64(self.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub object: NodeId,
    pub score: Score,
}

/// What a vector was computed for. A pathway keeps repeated elements; each
/// occurrence contributed its own score map.
#[derive(Debug, Clone, PartialEq)]
pub enum Seed {
    Object(NodeId),
    Pathway(Vec<NodeId>),
}

impl Seed {
    pub fn objects(&self) -> &[NodeId] {
        match self {
            Seed::Object(id) => std::slice::from_ref(id),
            Seed::Pathway(ids) => ids,
        }
    }
}

/// Ranked recommendations: scores non-increasing, ties by ascending object
/// id, seed objects never present.
#[derive(Debug, Clone, PartialEq)]
pub struct RecommendationVector {
    pub seed: Seed,
    pub entries: Vec<Entry>,
    pub params: RecommendParams,
}

impl RecommendationVector {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn objects(&self) -> impl Iterator<Item = &NodeId> {
        self.entries.iter().map(|e| &e.object)
    }
}

/// The seed's sessions and, after [`expand_two`], everything they reach.
#[derive(Debug, Clone)]
pub struct Neighborhood<'g> {
    graph: &'g SessionGraph,
    seed: ObjectIx,
    kernels: Vec<KernelIx>,
    candidate_edges: Vec<(KernelIx, ObjectIx)>,
    candidates: Vec<ObjectIx>,
}

impl<'g> Neighborhood<'g> {
    pub fn seed(&self) -> &'g NodeId {
        self.graph.object_id(self.seed)
    }

    /// Kernels holding an edge to the seed, ascending.
    pub fn kernels(&self) -> Vec<&'g NodeId> {
        self.kernels.iter().map(|&k| self.graph.kernel_id(k)).collect()
    }

    /// Every edge leaving one of [`Self::kernels`].
    pub fn candidate_edges(&self) -> Vec<(&'g NodeId, &'g NodeId)> {
        self.candidate_edges
            .iter()
            .map(|&(k, o)| (self.graph.kernel_id(k), self.graph.object_id(o)))
            .collect()
    }

    /// Targets of [`Self::candidate_edges`], ascending; includes the seed.
    pub fn candidates(&self) -> Vec<&'g NodeId> {
        self.candidates.iter().map(|&o| self.graph.object_id(o)).collect()
    }
}

/// Scores keyed by object, including the seed itself.
#[derive(Debug, Clone)]
pub struct ScoreMap<'g> {
    graph: &'g SessionGraph,
    scores: HashMap<ObjectIx, f64>,
}

impl<'g> ScoreMap<'g> {
    fn new(graph: &'g SessionGraph) -> Self {
        ScoreMap {
            graph,
            scores: HashMap::new(),
        }
    }

    pub fn get(&self, object: &NodeId) -> Option<f64> {
        self.graph.object_ix(object).and_then(|ix| self.scores.get(&ix).copied())
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&'g NodeId, f64)> + '_ {
        self.scores.iter().map(|(&o, &s)| (self.graph.object_id(o), s))
    }

    fn add(&mut self, object: ObjectIx, amount: f64) {
        *self.scores.entry(object).or_insert(0.0) += amount;
    }

    /// Adds `other` into `self`.
    fn absorb(&mut self, other: &ScoreMap<'_>) {
        let mut keys: Vec<_> = other.scores.iter().collect();
        keys.sort_unstable_by_key(|(o, _)| **o);
        for (&o, &s) in keys {
            self.add(o, s);
        }
    }

    /// Sorts by descending score then ascending id, drops `exclude` and zero
    /// scores, and truncates to `k`.
    pub fn rank(&self, exclude: &[NodeId], k: Option<usize>) -> Vec<Entry> {
        let excluded: HashSet<ObjectIx> = exclude.iter().filter_map(|id| self.graph.object_ix(id)).collect();
        let mut ranked: Vec<(ObjectIx, f64)> = self
            .scores
            .iter()
            .filter(|(o, s)| **s > 0.0 && !excluded.contains(o))
            .map(|(&o, &s)| (o, s))
            .collect();
        // Object indices follow id order, so comparing indices breaks ties by id.
        let cmp = |a: &(ObjectIx, f64), b: &(ObjectIx, f64)| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0));
        if let Some(k) = k {
            if k < ranked.len() {
                ranked.select_nth_unstable_by(k, cmp);
                ranked.truncate(k);
            }
        }
        ranked.sort_unstable_by(cmp);
        ranked
            .into_iter()
            .map(|(o, s)| Entry {
                object: self.graph.object_id(o).clone(),
                score: Score(s),
            })
            .collect()
    }
}

/// Ranks arbitrary `(object, score)` pairs with the engine's ordering rules.
pub fn rank(scores: impl IntoIterator<Item = (NodeId, f64)>, exclude: &BTreeSet<NodeId>, k: Option<usize>) -> Vec<Entry> {
    let mut ranked: Vec<(NodeId, f64)> = scores
        .into_iter()
        .filter(|(o, s)| *s > 0.0 && !exclude.contains(o))
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    if let Some(k) = k {
        ranked.truncate(k);
    }
    ranked
        .into_iter()
        .map(|(object, s)| Entry { object, score: Score(s) })
        .collect()
}

/// First expansion: the kernels whose sessions contain `m`.
pub fn expand_one<'g>(g: &'g SessionGraph, m: &NodeId) -> Result<Neighborhood<'g>, EngineError> {
    let seed = g.object_ix(m).ok_or_else(|| GraphError::UnknownObject(m.clone()))?;
    Ok(Neighborhood {
        graph: g,
        seed,
        kernels: g.kernels_of_ix(seed).collect(),
        candidate_edges: Vec::new(),
        candidates: Vec::new(),
    })
}

/// Second expansion: every edge leaving the first-layer kernels.
pub fn expand_two<'g>(g: &'g SessionGraph, mut nb: Neighborhood<'g>) -> Neighborhood<'g> {
    nb.candidate_edges.clear();
    for &k in &nb.kernels {
        nb.candidate_edges.extend(g.objects_of_ix(k).map(|o| (k, o)));
    }
    let mut candidates: Vec<ObjectIx> = nb.candidate_edges.iter().map(|&(_, o)| o).collect();
    candidates.sort_unstable();
    candidates.dedup();
    nb.candidates = candidates;
    nb
}

/// Incoming steps of every candidate in `nb`.
pub fn score_candidates<'g>(
    g: &'g SessionGraph,
    nb: &Neighborhood<'g>,
    params: &RecommendParams,
) -> Result<ScoreMap<'g>, EngineError> {
    let weights = params.class_weights(g)?;
    let weight = |k: KernelIx| weights.as_ref().map_or(1.0, |w| w[g.kernel_class_slot(k)]);
    let mut scores = ScoreMap::new(g);
    match params.scope {
        DegreeScope::Subgraph => {
            for &(k, o) in &nb.candidate_edges {
                scores.add(o, weight(k));
            }
        }
        DegreeScope::Global => {
            for &o in &nb.candidates {
                scores.add(o, g.kernels_of_ix(o).map(weight).sum());
            }
        }
    }
    Ok(scores)
}

/// Recommendations for a single seed object. Dispatches on
/// `params.variant`; `Pathway` treats `m` as a one-element pathway.
pub fn recommend(g: &SessionGraph, m: &NodeId, params: &RecommendParams) -> Result<RecommendationVector, EngineError> {
    match params.variant {
        Variant::Base | Variant::Weighted => {
            let scores = seed_scores(g, m, params)?;
            Ok(RecommendationVector {
                seed: Seed::Object(m.clone()),
                entries: scores.rank(std::slice::from_ref(m), params.k),
                params: params.clone(),
            })
        }
        Variant::ThreeLayer => recommend_three_layer(g, m, params),
        Variant::Pathway => recommend_pathway(g, std::slice::from_ref(m), params),
    }
}

fn seed_scores<'g>(g: &'g SessionGraph, m: &NodeId, params: &RecommendParams) -> Result<ScoreMap<'g>, EngineError> {
    let nb = expand_two(g, expand_one(g, m)?);
    score_candidates(g, &nb, params)
}

/// Adds a third kernel/object layer around the seed, prunes single-object
/// sessions (by full-graph out-degree), and scores what remains.
pub fn recommend_three_layer(
    g: &SessionGraph,
    m: &NodeId,
    params: &RecommendParams,
) -> Result<RecommendationVector, EngineError> {
    let weights = params.class_weights(g)?;
    let weight = |k: KernelIx| weights.as_ref().map_or(1.0, |w| w[g.kernel_class_slot(k)]);
    let nb = expand_two(g, expand_one(g, m)?);

    let mut outer: Vec<KernelIx> = nb.candidates.iter().flat_map(|&o| g.kernels_of_ix(o)).collect();
    outer.sort_unstable();
    outer.dedup();
    outer.retain(|&k| g.out_degree_ix(k) > 1);

    let mut scores = ScoreMap::new(g);
    match params.scope {
        DegreeScope::Subgraph => {
            for &k in &outer {
                let w = weight(k);
                for o in g.objects_of_ix(k) {
                    scores.add(o, w);
                }
            }
        }
        DegreeScope::Global => {
            let mut reached: Vec<ObjectIx> = outer.iter().flat_map(|&k| g.objects_of_ix(k)).collect();
            reached.sort_unstable();
            reached.dedup();
            for o in reached {
                scores.add(o, g.kernels_of_ix(o).map(weight).sum());
            }
        }
    }
    Ok(RecommendationVector {
        seed: Seed::Object(m.clone()),
        entries: scores.rank(std::slice::from_ref(m), params.k),
        params: params.clone(),
    })
}

/// Scores a sequence of viewed objects by summing each element's score
/// map. Repeated elements contribute once per occurrence.
pub fn recommend_pathway(
    g: &SessionGraph,
    pathway: &[NodeId],
    params: &RecommendParams,
) -> Result<RecommendationVector, EngineError> {
    recommend_pathway_with(g, pathway, params, Execution::default())
}

pub fn recommend_pathway_with(
    g: &SessionGraph,
    pathway: &[NodeId],
    params: &RecommendParams,
    exec: Execution,
) -> Result<RecommendationVector, EngineError> {
    if pathway.is_empty() {
        return Err(EngineError::EmptyPathway);
    }
    let unknown: Vec<NodeId> = pathway.iter().filter(|m| g.object_ix(m).is_none()).cloned().collect();
    if !unknown.is_empty() {
        return Err(EngineError::UnknownPathwayObjects(unknown));
    }
    params.validate()?;
    let per_seed = par::map_collect(pathway, exec, |m| seed_scores(g, m, params));
    // Summed in pathway order so floating totals do not depend on scheduling.
    let mut total = ScoreMap::new(g);
    for scores in per_seed {
        total.absorb(&scores?);
    }
    Ok(RecommendationVector {
        seed: Seed::Pathway(pathway.to_vec()),
        entries: total.rank(pathway, params.k),
        params: params.clone(),
    })
}

/// Pre-exclusion scores for `m` (the seed's own score included).
pub fn raw_scores<'g>(g: &'g SessionGraph, m: &NodeId, params: &RecommendParams) -> Result<ScoreMap<'g>, EngineError> {
    seed_scores(g, m, params)
}
