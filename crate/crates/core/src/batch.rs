//! Many independent recommendations over one frozen graph.

use crate::engine::{recommend, EngineError, RecommendParams, RecommendationVector};
use crate::graph::{NodeId, SessionGraph};
use crate::par::{map_collect, Execution};

/// Runs [`recommend`] for every seed. Output order follows `seeds`.
pub fn batch_recommend(
    g: &SessionGraph,
    seeds: &[NodeId],
    params: &RecommendParams,
    exec: Execution,
) -> Vec<Result<RecommendationVector, EngineError>> {
    map_collect(seeds, exec, |m| recommend(g, m, params))
}

/// Recommendations for every object of `g`, in object id order.
pub fn recommend_all(
    g: &SessionGraph,
    params: &RecommendParams,
    exec: Execution,
) -> Result<Vec<RecommendationVector>, EngineError> {
    batch_recommend(g, g.objects(), params, exec).into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{f1, obj};

    #[test]
    fn batch_matches_single_calls() {
        let g = f1();
        let params = RecommendParams::default();
        let seeds = [obj("a"), obj("d"), obj("zz")];
        let out = batch_recommend(&g, &seeds, &params, Execution::Parallel);
        assert_eq!(out[0].as_ref().unwrap(), &recommend(&g, &obj("a"), &params).unwrap());
        assert_eq!(out[1].as_ref().unwrap().len(), 1);
        assert!(out[2].is_err());
    }

    #[test]
    fn all_objects_both_ways() {
        let g = f1();
        let params = RecommendParams::default();
        let seq = recommend_all(&g, &params, Execution::Sequential).unwrap();
        let par = recommend_all(&g, &params, Execution::Parallel).unwrap();
        assert_eq!(seq, par);
        assert_eq!(seq.len(), 5);
    }
}
