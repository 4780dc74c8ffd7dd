//! Synthetic session graphs with exact node and edge counts.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore};

use crate::graph::{GraphBuilder, GraphError, KernelClass, NodeId, SessionGraph};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum SynthError {
    #[error("class `{class_id}`: {edges} edges cannot cover {kernels} kernels")]
    TooFewEdges { class_id: String, kernels: usize, edges: usize },
    #[error("class `{class_id}`: {edges} edges exceed {kernels} kernels x {objects} objects")]
    TooManyEdges {
        class_id: String,
        kernels: usize,
        objects: usize,
        edges: usize,
    },
    #[error("{edges} edges cannot reach {objects} objects")]
    UncoverableObjects { objects: usize, edges: usize },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassSpec {
    pub class_id: String,
    pub kernels: usize,
    pub edges: usize,
}

/// Target shape of a generated graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntheticSpec {
    pub objects: usize,
    pub classes: Vec<ClassSpec>,
}

impl SyntheticSpec {
    /// A week of traffic in a mid-sized web shop: 1733 products, 2056 visits
    /// with 7459 product views, 314 orders with 964 order items.
    pub fn shop_week() -> Self {
        SyntheticSpec {
            objects: 1733,
            classes: vec![
                ClassSpec {
                    class_id: "K1".into(),
                    kernels: 2056,
                    edges: 7459,
                },
                ClassSpec {
                    class_id: "K2".into(),
                    kernels: 314,
                    edges: 964,
                },
            ],
        }
    }

    /// A random feasible shape with at most `max_objects` objects and
    /// `max_kernels` kernels spread over one to three classes.
    pub fn random(rng: &mut dyn RngCore, max_objects: usize, max_kernels: usize) -> Self {
        let objects = rng.random_range(2..=max_objects.max(2));
        let total_kernels = rng.random_range(1..=max_kernels.max(1));
        let class_count = rng.random_range(1..=3usize).min(total_kernels);
        let mut split: Vec<usize> = vec![1; class_count];
        for _ in class_count..total_kernels {
            split[rng.random_range(0..class_count)] += 1;
        }
        let mut classes: Vec<ClassSpec> = split
            .into_iter()
            .enumerate()
            .map(|(i, kernels)| {
                let cap = kernels * objects;
                let edges = (kernels + rng.random_range(0..=kernels * 4)).min(cap);
                ClassSpec {
                    class_id: format!("K{}", i + 1),
                    kernels,
                    edges,
                }
            })
            .collect();
        let mut deficit = objects.saturating_sub(classes.iter().map(|c| c.edges).sum());
        for c in classes.iter_mut() {
            let room = c.kernels * objects - c.edges;
            let add = room.min(deficit);
            c.edges += add;
            deficit -= add;
        }
        SyntheticSpec { objects, classes }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        for c in &self.classes {
            if c.edges < c.kernels {
                return Err(SynthError::TooFewEdges {
                    class_id: c.class_id.clone(),
                    kernels: c.kernels,
                    edges: c.edges,
                });
            }
            if c.edges > c.kernels * self.objects {
                return Err(SynthError::TooManyEdges {
                    class_id: c.class_id.clone(),
                    kernels: c.kernels,
                    objects: self.objects,
                    edges: c.edges,
                });
            }
        }
        let edges: usize = self.classes.iter().map(|c| c.edges).sum();
        if edges < self.objects {
            return Err(SynthError::UncoverableObjects {
                objects: self.objects,
                edges,
            });
        }
        Ok(())
    }
}

/// Generates a valid graph matching `spec` exactly. Objects are named
/// `1..=objects`; kernels `1..=kernels` within their class.
pub fn generate(spec: &SyntheticSpec, rng: &mut dyn RngCore) -> Result<SessionGraph, SynthError> {
    spec.validate()?;
    let mut builder = GraphBuilder::new(spec.classes.iter().map(|c| KernelClass::new(c.class_id.clone(), "synthetic")))?;
    let objects: Vec<NodeId> = (1..=spec.objects)
        .map(|i| NodeId::object(i.to_string()))
        .collect::<Result<_, _>>()?;

    // One slot per edge: (class, kernel). Every kernel owns at least one.
    let mut slots: Vec<(usize, usize)> = Vec::new();
    for (c, class) in spec.classes.iter().enumerate() {
        slots.extend((0..class.kernels).map(|k| (c, k)));
        slots.extend((class.kernels..class.edges).map(|_| (c, rng.random_range(0..class.kernels))));
    }
    slots.shuffle(rng);

    let mut uncovered: Vec<usize> = (0..spec.objects).collect();
    uncovered.shuffle(rng);
    let mut sessions: Vec<Vec<HashSet<usize>>> = spec.classes.iter().map(|c| vec![HashSet::new(); c.kernels]).collect();
    for (c, mut k) in slots {
        // fall back to another kernel when this one already holds everything
        while sessions[c][k].len() == spec.objects {
            k = rng.random_range(0..spec.classes[c].kernels);
        }
        let object = match uncovered.pop() {
            Some(o) => o,
            None => loop {
                let o = rng.random_range(0..spec.objects);
                if !sessions[c][k].contains(&o) {
                    break o;
                }
            },
        };
        sessions[c][k].insert(object);
    }

    for (c, class) in spec.classes.iter().enumerate() {
        for (k, members) in sessions[c].iter().enumerate() {
            let kernel = NodeId::kernel(class.class_id.clone(), (k + 1).to_string())?;
            let mut members: Vec<usize> = members.iter().copied().collect();
            members.sort_unstable();
            for o in members {
                builder.add_edge(&kernel, &class.class_id, &objects[o])?;
            }
        }
    }
    Ok(builder.freeze())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exact_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let spec = SyntheticSpec {
            objects: 40,
            classes: vec![
                ClassSpec {
                    class_id: "A".into(),
                    kernels: 30,
                    edges: 90,
                },
                ClassSpec {
                    class_id: "B".into(),
                    kernels: 5,
                    edges: 12,
                },
            ],
        };
        let g = generate(&spec, &mut rng).unwrap();
        let s = g.stats();
        assert!(g.is_valid());
        assert_eq!((s.objects, s.kernels, s.edges), (40, 35, 102));
        assert_eq!(s.class("B").unwrap().edges, 12);
    }

    #[test]
    fn saturated_class() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let spec = SyntheticSpec {
            objects: 3,
            classes: vec![ClassSpec {
                class_id: "A".into(),
                kernels: 2,
                edges: 6,
            }],
        };
        assert_eq!(generate(&spec, &mut rng).unwrap().edge_count(), 6);
    }

    #[test]
    fn infeasible_specs() {
        let one = |kernels, edges, objects| SyntheticSpec {
            objects,
            classes: vec![ClassSpec {
                class_id: "A".into(),
                kernels,
                edges,
            }],
        };
        assert!(matches!(one(3, 2, 5).validate(), Err(SynthError::TooFewEdges { .. })));
        assert!(matches!(one(1, 6, 5).validate(), Err(SynthError::TooManyEdges { .. })));
        assert!(matches!(one(2, 3, 5).validate(), Err(SynthError::UncoverableObjects { .. })));
    }

    #[test]
    fn random_specs_are_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let spec = SyntheticSpec::random(&mut rng, 60, 80);
            spec.validate().unwrap();
            let g = generate(&spec, &mut rng).unwrap();
            assert!(g.is_valid());
        }
    }
}
