//! Small hand-built graphs used by tests, examples and the acceptance suite.

use crate::graph::{GraphBuilder, KernelClass, NodeId, SessionGraph};

/// Object id shorthand. Panics on an empty id.
pub fn obj(raw: &str) -> NodeId {
    NodeId::object(raw).expect("non-empty object id")
}

/// Kernel id shorthand. Panics on an empty id.
pub fn kernel(class_id: &str, raw: &str) -> NodeId {
    NodeId::kernel(class_id, raw).expect("non-empty kernel id")
}

/// Builds a frozen graph from `(class, kernel, objects)` rows.
pub fn graph_from(classes: &[&str], sessions: &[(&str, &str, &[&str])]) -> SessionGraph {
    let mut b = GraphBuilder::new(classes.iter().map(|c| KernelClass::new(*c, ""))).expect("distinct classes");
    for (class, k, objects) in sessions {
        let kid = kernel(class, k);
        for o in *objects {
            b.add_edge(&kid, class, &obj(o)).expect("valid edge");
        }
    }
    b.freeze()
}

/// Five objects, four kernels, eight edges:
///
/// ```text
/// K1: j1 -> {a, b}   j2 -> {a, b}   j4 -> {d, e}
/// K2: j3 -> {a, c}
/// ```
pub fn f1() -> SessionGraph {
    graph_from(
        &["K1", "K2"],
        &[
            ("K1", "j1", &["a", "b"]),
            ("K1", "j2", &["a", "b"]),
            ("K2", "j3", &["a", "c"]),
            ("K1", "j4", &["d", "e"]),
        ],
    )
}

/// Nine objects `o1..o9`, six kernels `j1..j6`, one class `K`.
///
/// Sessions of `o3` are `j2`, `j4`, `j5`; their objects are `o2..o9`.
/// Keeps every explicitly listed edge of the worked example, including
/// `j2 -> o2` and `j6 -> o6`, and adds `j3 -> {o4, o8}` as the completion.
pub fn worked_example() -> SessionGraph {
    graph_from(
        &["K"],
        &[
            ("K", "j1", &["o1", "o2", "o5"]),
            ("K", "j2", &["o2", "o3", "o4", "o5", "o9"]),
            ("K", "j3", &["o4", "o8"]),
            ("K", "j4", &["o2", "o3", "o6", "o7"]),
            ("K", "j5", &["o2", "o3", "o8"]),
            ("K", "j6", &["o1", "o6"]),
        ],
    )
}

/// Variant of [`worked_example`] without `j2 -> o2` and `j6 -> o6`. On this
/// graph the full-graph in-degrees of `o2..o9` are 3, 3, 2, 2, 1, 1, 2, 1
/// for o3, o2, o4, o5, o6, o7, o8, o9.
pub fn worked_example_degree_table() -> SessionGraph {
    graph_from(
        &["K"],
        &[
            ("K", "j1", &["o1", "o2", "o5"]),
            ("K", "j2", &["o3", "o4", "o5", "o9"]),
            ("K", "j3", &["o4", "o8"]),
            ("K", "j4", &["o2", "o3", "o6", "o7"]),
            ("K", "j5", &["o2", "o3", "o8"]),
            ("K", "j6", &["o1"]),
        ],
    )
}
