//! A/B effectiveness measurement.
//!
//! Every served recommendation is logged as an [`ActionRecord`]: which
//! algorithm served it, the seed object, the vector shown and the object the
//! user picked. [`efficiency`] is the fraction of an algorithm's impressions
//! whose picked object appeared in the served vector. Algorithms are
//! assigned uniformly at random per impression.
//!
//! Live traffic is replaced by [`simulate`], which drives the same log
//! format from a pluggable [`UserModel`] and a seeded RNG.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::IndexedRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::engine::{rank, recommend, EngineError, Entry, RecommendParams, RecommendationVector, Score, Seed};
use crate::graph::{GraphError, NodeId, SessionGraph};
use crate::par::{map_collect, Execution};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("no records for algorithm `{0}`")]
    NoRecordsForAlgorithm(String),
    #[error("no recommenders to choose from")]
    EmptyHandleList,
    #[error("duplicate recommender id `{0}`")]
    DuplicateHandle(String),
    #[error("simulation needs at least one step")]
    ZeroSteps,
    #[error("graph has no objects")]
    EmptyGraph,
    #[error("invalid action record: {0}")]
    InvalidRecord(String),
    #[error("object id `{0}` contains `|` and cannot be logged")]
    UnencodableId(String),
    #[error("action log line {line}: {reason}")]
    BadLogRow { line: u64, reason: String },
    #[error("unknown {what} `{value}`")]
    Unknown { what: &'static str, value: String },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<GraphError> for EvalError {
    fn from(e: GraphError) -> Self {
        EvalError::Engine(e.into())
    }
}

/// Iverson bracket: 1 when `condition` holds, else 0.
pub fn iverson(condition: bool) -> u64 {
    u64::from(condition)
}

/// One served impression and the user's reaction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionRecord {
    algorithm_id: String,
    seed_object: NodeId,
    recommended: Vec<NodeId>,
    chosen: NodeId,
}

impl ActionRecord {
    pub fn new(
        algorithm_id: impl Into<String>,
        seed_object: NodeId,
        recommended: Vec<NodeId>,
        chosen: NodeId,
    ) -> Result<Self, EvalError> {
        let algorithm_id = algorithm_id.into();
        if algorithm_id.is_empty() {
            return Err(EvalError::InvalidRecord("empty algorithm id".into()));
        }
        let mut seen = HashSet::with_capacity(recommended.len());
        if let Some(dup) = recommended.iter().find(|id| !seen.insert(*id)) {
            return Err(EvalError::InvalidRecord(format!("duplicate recommended object {dup}")));
        }
        Ok(ActionRecord {
            algorithm_id,
            seed_object,
            recommended,
            chosen,
        })
    }

    pub fn algorithm_id(&self) -> &str {
        &self.algorithm_id
    }

    pub fn seed_object(&self) -> &NodeId {
        &self.seed_object
    }

    pub fn recommended(&self) -> &[NodeId] {
        &self.recommended
    }

    pub fn chosen(&self) -> &NodeId {
        &self.chosen
    }

    /// Whether the chosen object is among the first `k` recommended (all of
    /// them when `k` is `None`).
    pub fn is_hit(&self, k: Option<usize>) -> bool {
        let shown = k.map_or(self.recommended.len(), |k| k.min(self.recommended.len()));
        self.recommended[..shown].contains(&self.chosen)
    }
}

const LOG_HEADER: [&str; 4] = ["algorithm_id", "seed_object", "recommended", "chosen"];

/// Ordered sequence of impressions.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ActionLog {
    records: Vec<ActionRecord>,
}

impl ActionLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, record: ActionRecord) {
        self.records.push(record);
    }

    pub fn records(&self) -> &[ActionRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn filter(&self, keep: impl Fn(&ActionRecord) -> bool) -> ActionLog {
        ActionLog {
            records: self.records.iter().filter(|r| keep(r)).cloned().collect(),
        }
    }

    /// Distinct algorithm ids, ascending.
    pub fn algorithms(&self) -> Vec<&str> {
        let mut ids: Vec<&str> = self.records.iter().map(|r| r.algorithm_id.as_str()).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Writes `algorithm_id,seed_object,recommended,chosen` with the
    /// recommended ids joined by `|`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), EvalError> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(LOG_HEADER)?;
        for r in &self.records {
            let ids = std::iter::once(&r.seed_object).chain(&r.recommended).chain([&r.chosen]);
            if let Some(bad) = ids.into_iter().find(|id| id.raw().contains('|')) {
                return Err(EvalError::UnencodableId(bad.raw().to_string()));
            }
            let recommended: Vec<&str> = r.recommended.iter().map(NodeId::raw).collect();
            w.write_record([
                r.algorithm_id.as_str(),
                r.seed_object.raw(),
                recommended.join("|").as_str(),
                r.chosen.raw(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self, EvalError> {
        let mut reader = csv::ReaderBuilder::new().from_reader(input);
        let headers = reader.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != LOG_HEADER {
            return Err(EvalError::BadLogRow {
                line: 1,
                reason: format!("expected header `{}`", LOG_HEADER.join(",")),
            });
        }
        let mut log = ActionLog::new();
        for row in reader.records() {
            let row = row?;
            let line = row.position().map_or(0, |p| p.line());
            let bad = |reason: String| EvalError::BadLogRow { line, reason };
            let object = |raw: &str| NodeId::object(raw).map_err(|e| bad(e.to_string()));
            let recommended = match &row[2] {
                "" => Vec::new(),
                list => list.split('|').map(object).collect::<Result<Vec<_>, _>>()?,
            };
            let record = ActionRecord::new(&row[0], object(&row[1])?, recommended, object(&row[3])?)
                .map_err(|e| bad(e.to_string()))?;
            log.push(record);
        }
        Ok(log)
    }

    pub fn save(&self, path: &Path) -> Result<(), EvalError> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, EvalError> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

/// Exact hit ratio of one algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Efficiency {
    pub hits: u64,
    pub impressions: u64,
}

impl Efficiency {
    pub fn ratio(&self) -> f64 {
        self.hits as f64 / self.impressions as f64
    }

    /// Rational equality, `1/2 == 2/4`.
    pub fn same_ratio(&self, other: &Efficiency) -> bool {
        u128::from(self.hits) * u128::from(other.impressions) == u128::from(other.hits) * u128::from(self.impressions)
    }
}

impl fmt::Display for Efficiency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{} = {}", self.hits, self.impressions, self.ratio())
    }
}

/// Hits over impressions for `algorithm_id`, optionally counting only the
/// first `k` recommended objects as shown.
pub fn efficiency(log: &ActionLog, algorithm_id: &str, k: Option<usize>) -> Result<Efficiency, EvalError> {
    let mut hits = 0;
    let mut impressions = 0;
    for r in log.records() {
        let same = r.algorithm_id == algorithm_id;
        impressions += iverson(same);
        hits += iverson(same && r.is_hit(k));
    }
    if impressions == 0 {
        return Err(EvalError::NoRecordsForAlgorithm(algorithm_id.to_string()));
    }
    Ok(Efficiency { hits, impressions })
}

/// [`efficiency`] for every algorithm present in the log.
pub fn efficiency_table(log: &ActionLog, k: Option<usize>) -> BTreeMap<String, Efficiency> {
    log.algorithms()
        .into_iter()
        .map(|id| (id.to_string(), efficiency(log, id, k).expect("id taken from the log")))
        .collect()
}

/// Anything that can serve a vector for a seed object.
pub trait Recommender: Send + Sync {
    fn recommend(&self, g: &SessionGraph, seed: &NodeId, rng: &mut dyn RngCore) -> Result<RecommendationVector, EngineError>;
}

/// The session-graph engine with fixed parameters.
#[derive(Debug, Clone, Default)]
pub struct SessionRecommender {
    pub params: RecommendParams,
}

impl Recommender for SessionRecommender {
    fn recommend(&self, g: &SessionGraph, seed: &NodeId, _rng: &mut dyn RngCore) -> Result<RecommendationVector, EngineError> {
        recommend(g, seed, &self.params)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RandomBaseline {
    pub k: usize,
}

impl Recommender for RandomBaseline {
    fn recommend(&self, g: &SessionGraph, seed: &NodeId, rng: &mut dyn RngCore) -> Result<RecommendationVector, EngineError> {
        baseline_random(g, seed, self.k, rng)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PopularityBaseline {
    pub k: usize,
}

impl Recommender for PopularityBaseline {
    fn recommend(&self, g: &SessionGraph, seed: &NodeId, _rng: &mut dyn RngCore) -> Result<RecommendationVector, EngineError> {
        baseline_popularity(g, seed, self.k)
    }
}

fn baseline_params(k: usize) -> RecommendParams {
    RecommendParams {
        k: Some(k),
        ..RecommendParams::default()
    }
}

/// `k` distinct objects other than `m`, drawn uniformly. Scores count down
/// from `k` so the draw order is the ranking.
pub fn baseline_random(
    g: &SessionGraph,
    m: &NodeId,
    k: usize,
    rng: &mut dyn RngCore,
) -> Result<RecommendationVector, EngineError> {
    if k == 0 {
        return Err(EngineError::InvalidCutoff);
    }
    let seed = g.object_ix(m).ok_or_else(|| GraphError::UnknownObject(m.clone()))?;
    let others = g.object_count() - 1;
    let amount = k.min(others);
    let entries = rand::seq::index::sample(rng, others, amount)
        .into_iter()
        .enumerate()
        .map(|(i, pick)| {
            // skip over the seed's slot
            let ix = if pick >= seed.index() { pick + 1 } else { pick };
            Entry {
                object: g.objects()[ix].clone(),
                score: Score((amount - i) as f64),
            }
        })
        .collect();
    Ok(RecommendationVector {
        seed: Seed::Object(m.clone()),
        entries,
        params: baseline_params(k),
    })
}

/// Top-`k` objects other than `m` by full-graph in-degree.
pub fn baseline_popularity(g: &SessionGraph, m: &NodeId, k: usize) -> Result<RecommendationVector, EngineError> {
    if k == 0 {
        return Err(EngineError::InvalidCutoff);
    }
    if g.object_ix(m).is_none() {
        return Err(GraphError::UnknownObject(m.clone()).into());
    }
    let scores = g
        .objects()
        .iter()
        .map(|o| (o.clone(), g.in_degree(o).unwrap_or_default() as f64));
    let exclude = [m.clone()].into();
    Ok(RecommendationVector {
        seed: Seed::Object(m.clone()),
        entries: rank(scores, &exclude, Some(k)),
        params: baseline_params(k),
    })
}

/// A named recommender taking part in an experiment.
pub struct RecommenderHandle {
    pub id: String,
    pub recommender: Box<dyn Recommender>,
}

impl RecommenderHandle {
    pub fn new(id: impl Into<String>, recommender: impl Recommender + 'static) -> Self {
        RecommenderHandle {
            id: id.into(),
            recommender: Box::new(recommender),
        }
    }
}

impl fmt::Debug for RecommenderHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RecommenderHandle").field("id", &self.id).finish_non_exhaustive()
    }
}

/// Builds a handle from a well-known name: `ars`, `ars-global`,
/// `ars-three-layer`, `ars-weighted`, `popularity`, `random`.
pub fn builtin_handle(name: &str, params: &RecommendParams, baseline_k: usize) -> Result<RecommenderHandle, EvalError> {
    use crate::engine::{DegreeScope, Variant};
    let ars = |variant: Variant, scope: DegreeScope| SessionRecommender {
        params: RecommendParams {
            variant,
            scope,
            ..params.clone()
        },
    };
    let handle = match name {
        "ars" => RecommenderHandle::new(name, ars(Variant::Base, DegreeScope::Subgraph)),
        "ars-global" => RecommenderHandle::new(name, ars(Variant::Base, DegreeScope::Global)),
        "ars-three-layer" => RecommenderHandle::new(name, ars(Variant::ThreeLayer, params.scope)),
        "ars-weighted" => {
            let r = ars(Variant::Weighted, params.scope);
            r.params.validate()?;
            RecommenderHandle::new(name, r)
        }
        "popularity" => RecommenderHandle::new(name, PopularityBaseline { k: baseline_k }),
        "random" => RecommenderHandle::new(name, RandomBaseline { k: baseline_k }),
        _ => {
            return Err(EvalError::Unknown {
                what: "algorithm",
                value: name.to_string(),
            })
        }
    };
    Ok(handle)
}

/// Checks ids are unique and the list is non-empty.
pub fn check_handles(handles: &[RecommenderHandle]) -> Result<(), EvalError> {
    if handles.is_empty() {
        return Err(EvalError::EmptyHandleList);
    }
    let mut seen = HashSet::new();
    for h in handles {
        if !seen.insert(h.id.as_str()) {
            return Err(EvalError::DuplicateHandle(h.id.clone()));
        }
    }
    Ok(())
}

/// Picks one handle with probability `1/n`.
pub fn assign_algorithm<'h>(handles: &'h [RecommenderHandle], rng: &mut dyn RngCore) -> Result<&'h RecommenderHandle, EvalError> {
    handles.choose(rng).ok_or(EvalError::EmptyHandleList)
}

/// How a simulated user picks a seed and reacts to a vector.
pub trait UserModel: Send + Sync {
    fn pick_seed<'g>(&self, g: &'g SessionGraph, rng: &mut dyn RngCore) -> &'g NodeId {
        g.objects().choose(rng).expect("non-empty graph")
    }

    fn choose(&self, g: &SessionGraph, seed: &NodeId, recommended: &[NodeId], rng: &mut dyn RngCore) -> NodeId;
}

/// Built-in user models.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuiltinUser {
    /// Takes the first recommendation; a random object when shown nothing.
    Oracle,
    /// Always picks an object that was not recommended.
    Adversarial,
    /// Picks any object uniformly.
    Uniform,
    /// Follows one of the seed's sessions to a co-occurring object.
    Session,
}

impl FromStr for BuiltinUser {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "oracle" => Ok(BuiltinUser::Oracle),
            "adversarial" => Ok(BuiltinUser::Adversarial),
            "uniform" => Ok(BuiltinUser::Uniform),
            "session" => Ok(BuiltinUser::Session),
            _ => Err(EvalError::Unknown {
                what: "user model",
                value: s.to_string(),
            }),
        }
    }
}

fn uniform_object(g: &SessionGraph, rng: &mut dyn RngCore) -> NodeId {
    g.objects().choose(rng).expect("non-empty graph").clone()
}

impl UserModel for BuiltinUser {
    fn choose(&self, g: &SessionGraph, seed: &NodeId, recommended: &[NodeId], rng: &mut dyn RngCore) -> NodeId {
        match self {
            BuiltinUser::Oracle => recommended.first().cloned().unwrap_or_else(|| uniform_object(g, rng)),
            BuiltinUser::Adversarial => {
                let shown: HashSet<&NodeId> = recommended.iter().collect();
                let outside: Vec<&NodeId> = g.objects().iter().filter(|o| !shown.contains(o)).collect();
                // the seed is never recommended, so `outside` is non-empty
                (*outside.choose(rng).unwrap_or(&seed)).clone()
            }
            BuiltinUser::Uniform => uniform_object(g, rng),
            BuiltinUser::Session => {
                let Some(ix) = g.object_ix(seed) else {
                    return uniform_object(g, rng);
                };
                let kernels: Vec<_> = g.kernels_of_ix(ix).collect();
                let Some(&k) = kernels.choose(rng) else {
                    return uniform_object(g, rng);
                };
                let peers: Vec<_> = g.objects_of_ix(k).filter(|&o| o != ix).collect();
                match peers.choose(rng) {
                    Some(&o) => g.object_id(o).clone(),
                    None => uniform_object(g, rng),
                }
            }
        }
    }
}

/// Runs `steps` simulated impressions: pick a seed, assign an algorithm
/// uniformly, serve its vector, let the user choose, log it.
pub fn simulate(
    g: &SessionGraph,
    handles: &[RecommenderHandle],
    user: &dyn UserModel,
    steps: usize,
    rng: &mut dyn RngCore,
) -> Result<ActionLog, EvalError> {
    if steps == 0 {
        return Err(EvalError::ZeroSteps);
    }
    check_handles(handles)?;
    if g.object_count() == 0 {
        return Err(EvalError::EmptyGraph);
    }
    let mut log = ActionLog::new();
    for _ in 0..steps {
        let seed = user.pick_seed(g, rng).clone();
        let handle = assign_algorithm(handles, rng)?;
        let vector = handle.recommender.recommend(g, &seed, rng)?;
        let recommended: Vec<NodeId> = vector.entries.into_iter().map(|e| e.object).collect();
        let chosen = user.choose(g, &seed, &recommended, rng);
        log.push(ActionRecord::new(handle.id.clone(), seed, recommended, chosen)?);
    }
    Ok(log)
}

/// Independent simulations, one per RNG seed, each driven by its own
/// `ChaCha8Rng`. Output order follows `seeds`.
pub fn simulate_many(
    g: &SessionGraph,
    handles: &[RecommenderHandle],
    user: &dyn UserModel,
    steps: usize,
    seeds: &[u64],
    exec: Execution,
) -> Vec<Result<ActionLog, EvalError>> {
    map_collect(seeds, exec, |&s| {
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        simulate(g, handles, user, steps, &mut rng)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{f1, obj};

    fn rec(alg: &str, seed: &str, recommended: &[&str], chosen: &str) -> ActionRecord {
        ActionRecord::new(alg, obj(seed), recommended.iter().map(|o| obj(o)).collect(), obj(chosen)).unwrap()
    }

    fn four_record_log() -> ActionLog {
        let mut log = ActionLog::new();
        log.push(rec("ars", "a", &["b", "c"], "b"));
        log.push(rec("ars", "a", &["b", "c"], "c"));
        log.push(rec("ars", "d", &["e"], "e"));
        log.push(rec("ars", "b", &["a"], "d"));
        log.push(rec("popularity", "a", &["b"], "d"));
        log
    }

    #[test]
    fn iverson_bracket() {
        assert_eq!(iverson(true), 1);
        assert_eq!(iverson(false), 0);
    }

    #[test]
    fn three_of_four() {
        let e = efficiency(&four_record_log(), "ars", None).unwrap();
        assert_eq!((e.hits, e.impressions), (3, 4));
        assert_eq!(e.ratio(), 0.75);
        assert_eq!(e.to_string(), "3/4 = 0.75");
    }

    #[test]
    fn all_hits() {
        let mut log = ActionLog::new();
        log.push(rec("x", "a", &["b"], "b"));
        assert_eq!(efficiency(&log, "x", None).unwrap().ratio(), 1.0);
    }

    #[test]
    fn absent_algorithm() {
        assert!(matches!(
            efficiency(&four_record_log(), "nope", None),
            Err(EvalError::NoRecordsForAlgorithm(_))
        ));
    }

    #[test]
    fn cutoff_limits_hits() {
        let log = four_record_log();
        assert_eq!(efficiency(&log, "ars", Some(1)).unwrap().hits, 2);
        assert_eq!(efficiency(&log, "ars", Some(2)).unwrap().hits, 3);
    }

    #[test]
    fn empty_vector_counts_as_impression() {
        let mut log = ActionLog::new();
        log.push(rec("x", "a", &[], "b"));
        log.push(rec("x", "a", &["b"], "b"));
        assert_eq!(efficiency(&log, "x", None).unwrap(), Efficiency { hits: 1, impressions: 2 });
    }

    #[test]
    fn record_invariants() {
        assert!(ActionRecord::new("", obj("a"), vec![], obj("b")).is_err());
        assert!(ActionRecord::new("x", obj("a"), vec![obj("b"), obj("b")], obj("b")).is_err());
    }

    #[test]
    fn log_csv_roundtrip() {
        let mut log = four_record_log();
        log.push(rec("ars", "a", &[], "q,uoted"));
        let mut buf = Vec::new();
        log.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("algorithm_id,seed_object,recommended,chosen\nars,a,b|c,b\n"));
        assert_eq!(ActionLog::read_csv(buf.as_slice()).unwrap(), log);
    }

    #[test]
    fn pipe_in_id_is_refused() {
        let mut log = ActionLog::new();
        log.push(rec("ars", "a", &["b|c"], "b"));
        assert!(matches!(log.write_csv(Vec::new()), Err(EvalError::UnencodableId(_))));
    }

    #[test]
    fn bad_log_header() {
        let err = ActionLog::read_csv("alg,seed\n".as_bytes()).unwrap_err();
        assert!(matches!(err, EvalError::BadLogRow { line: 1, .. }));
    }

    #[test]
    fn single_handle_always_chosen() {
        let handles = [RecommenderHandle::new("only", PopularityBaseline { k: 3 })];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            assert_eq!(assign_algorithm(&handles, &mut rng).unwrap().id, "only");
        }
        assert!(matches!(assign_algorithm(&[], &mut rng), Err(EvalError::EmptyHandleList)));
    }

    #[test]
    fn assignment_is_roughly_uniform() {
        let handles = [
            RecommenderHandle::new("a", PopularityBaseline { k: 3 }),
            RecommenderHandle::new("b", RandomBaseline { k: 3 }),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let n = 10_000;
        let a = (0..n)
            .filter(|_| assign_algorithm(&handles, &mut rng).unwrap().id == "a")
            .count();
        let freq = a as f64 / n as f64;
        assert!((0.45..=0.55).contains(&freq), "{freq}");
    }

    #[test]
    fn duplicate_handle_ids() {
        let handles = [
            RecommenderHandle::new("a", PopularityBaseline { k: 3 }),
            RecommenderHandle::new("a", RandomBaseline { k: 3 }),
        ];
        assert!(matches!(check_handles(&handles), Err(EvalError::DuplicateHandle(_))));
    }

    #[test]
    fn popularity_on_f1() {
        let g = f1();
        let v = baseline_popularity(&g, &obj("a"), 10).unwrap();
        let ids: Vec<_> = v.objects().map(|o| o.raw().to_string()).collect();
        assert_eq!(ids, ["b", "c", "d", "e"]);
        assert_eq!(v.entries[0].score, Score(2.0));
        assert!(baseline_popularity(&g, &obj("zz"), 3).is_err());
    }

    #[test]
    fn random_baseline() {
        let g = f1();
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            baseline_random(&g, &obj("c"), 3, &mut rng).unwrap()
        };
        assert_eq!(draw(5), draw(5));
        let v = draw(5);
        assert_eq!(v.len(), 3);
        assert!(v.objects().all(|o| o.raw() != "c"));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let all = baseline_random(&g, &obj("a"), 100, &mut rng).unwrap();
        let mut ids: Vec<_> = all.objects().map(|o| o.raw().to_string()).collect();
        ids.sort();
        assert_eq!(ids, ["b", "c", "d", "e"]);
    }

    fn handles() -> Vec<RecommenderHandle> {
        vec![
            builtin_handle("ars", &RecommendParams::default(), 3).unwrap(),
            builtin_handle("popularity", &RecommendParams::default(), 3).unwrap(),
            builtin_handle("random", &RecommendParams::default(), 3).unwrap(),
        ]
    }

    #[test]
    fn simulate_zero_steps() {
        let g = f1();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(
            simulate(&g, &handles(), &BuiltinUser::Uniform, 0, &mut rng),
            Err(EvalError::ZeroSteps)
        ));
    }

    #[test]
    fn oracle_user_always_hits_nonempty() {
        let g = f1();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let log = simulate(&g, &handles(), &BuiltinUser::Oracle, 300, &mut rng).unwrap();
        let served = log.filter(|r| !r.recommended().is_empty());
        for (_, e) in efficiency_table(&served, None) {
            assert_eq!(e.hits, e.impressions);
        }
    }

    #[test]
    fn adversarial_user_never_hits() {
        let g = f1();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let log = simulate(&g, &handles(), &BuiltinUser::Adversarial, 300, &mut rng).unwrap();
        for (_, e) in efficiency_table(&log, None) {
            assert_eq!(e.hits, 0);
        }
    }

    #[test]
    fn simulation_is_reproducible() {
        let g = f1();
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            let mut buf = Vec::new();
            simulate(&g, &handles(), &BuiltinUser::Session, 100, &mut rng)
                .unwrap()
                .write_csv(&mut buf)
                .unwrap();
            buf
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn many_runs_match_single_runs() {
        let g = f1();
        let hs = handles();
        let par = simulate_many(&g, &hs, &BuiltinUser::Uniform, 50, &[1, 2, 3], Execution::Parallel);
        let seq = simulate_many(&g, &hs, &BuiltinUser::Uniform, 50, &[1, 2, 3], Execution::Sequential);
        for (p, s) in par.into_iter().zip(seq) {
            assert_eq!(p.unwrap(), s.unwrap());
        }
    }

    #[test]
    fn denominators_sum_to_log_length() {
        let g = f1();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let log = simulate(&g, &handles(), &BuiltinUser::Uniform, 200, &mut rng).unwrap();
        let total: u64 = efficiency_table(&log, None).values().map(|e| e.impressions).sum();
        assert_eq!(total as usize, log.len());
    }

    #[test]
    fn unknown_names() {
        assert!("psychic".parse::<BuiltinUser>().is_err());
        assert!(builtin_handle("magic", &RecommendParams::default(), 3).is_err());
        assert!(builtin_handle("ars-weighted", &RecommendParams::default(), 3).is_err());
    }
}
