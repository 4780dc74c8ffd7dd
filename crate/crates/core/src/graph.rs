//! Bipartite session graph.
//!
//! Kernels (session contexts such as site visits or purchase orders) hold
//! directed edges to objects (recommendable items). Every kernel belongs to
//! exactly one [`KernelClass`]. Graphs are assembled through a
//! [`GraphBuilder`] and then frozen into an immutable [`SessionGraph`] that
//! is cheap to query from many threads at once.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

/// Namespace shared by every object id.
pub const OBJECT_NAMESPACE: &str = "obj";

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("duplicate kernel class `{0}`")]
    DuplicateClass(String),
    #[error("unknown kernel class `{0}`")]
    UnknownClass(String),
    #[error("kernel {kernel} is registered under class `{registered}`, not `{requested}`")]
    ClassConflict {
        kernel: NodeId,
        registered: String,
        requested: String,
    },
    #[error("{id} is not a {expected:?} node")]
    KindMismatch { id: NodeId, expected: NodeKind },
    #[error("node ids must be non-empty")]
    EmptyId,
    #[error("unknown object {0}")]
    UnknownObject(NodeId),
    #[error("unknown kernel {0}")]
    UnknownKernel(NodeId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NodeKind {
    Kernel,
    Object,
}

/// Namespaced node identity.
///
/// Source systems reuse bare numeric ids across tables, so the kind and
/// namespace are part of the identity. A kernel's namespace is its class id;
/// objects all live in [`OBJECT_NAMESPACE`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId {
    kind: NodeKind,
    namespace: String,
    raw: String,
}

impl NodeId {
    pub fn object(raw: impl Into<String>) -> Result<Self, GraphError> {
        Self::new(NodeKind::Object, OBJECT_NAMESPACE, raw)
    }

    pub fn kernel(class_id: impl Into<String>, raw: impl Into<String>) -> Result<Self, GraphError> {
        Self::new(NodeKind::Kernel, class_id, raw)
    }

    fn new(kind: NodeKind, namespace: impl Into<String>, raw: impl Into<String>) -> Result<Self, GraphError> {
        let raw = raw.into();
        let namespace = namespace.into();
        if raw.is_empty() || namespace.is_empty() {
            return Err(GraphError::EmptyId);
        }
        Ok(NodeId { kind, namespace, raw })
    }

    pub fn kind(&self) -> NodeKind {
        self.kind
    }

    pub fn namespace(&self) -> &str {
        &self.namespace
    }

    pub fn raw(&self) -> &str {
        &self.raw
    }

    pub fn is_object(&self) -> bool {
        self.kind == NodeKind::Object
    }

    pub fn is_kernel(&self) -> bool {
        self.kind == NodeKind::Kernel
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            NodeKind::Object => f.write_str(&self.raw),
            NodeKind::Kernel => write!(f, "{}:{}", self.namespace, self.raw),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelClass {
    pub class_id: String,
    #[serde(default)]
    pub description: String,
}

impl KernelClass {
    pub fn new(class_id: impl Into<String>, description: impl Into<String>) -> Self {
        KernelClass {
            class_id: class_id.into(),
            description: description.into(),
        }
    }
}

/// Mutable build-phase graph. Single writer; call [`GraphBuilder::freeze`]
/// once all edges are in.
#[derive(Debug, Clone, Default)]
pub struct GraphBuilder {
    classes: Vec<KernelClass>,
    class_index: HashMap<String, usize>,
    kernels: HashMap<NodeId, usize>,
    objects: HashSet<NodeId>,
    edges: HashSet<(NodeId, NodeId)>,
}

impl GraphBuilder {
    pub fn new(classes: impl IntoIterator<Item = KernelClass>) -> Result<Self, GraphError> {
        let mut builder = GraphBuilder::default();
        for class in classes {
            if builder.class_index.contains_key(&class.class_id) {
                return Err(GraphError::DuplicateClass(class.class_id));
            }
            builder.class_index.insert(class.class_id.clone(), builder.classes.len());
            builder.classes.push(class);
        }
        Ok(builder)
    }

    pub fn classes(&self) -> &[KernelClass] {
        &self.classes
    }

    pub fn has_class(&self, class_id: &str) -> bool {
        self.class_index.contains_key(class_id)
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Inserts `kernel -> object`. Returns `false` when the edge already
    /// existed (edges are a set).
    pub fn add_edge(&mut self, kernel: &NodeId, class_id: &str, object: &NodeId) -> Result<bool, GraphError> {
        if !object.is_object() {
            return Err(GraphError::KindMismatch {
                id: object.clone(),
                expected: NodeKind::Object,
            });
        }
        self.register_kernel(kernel, class_id)?;
        self.objects.insert(object.clone());
        Ok(self.edges.insert((kernel.clone(), object.clone())))
    }

    /// Registers a kernel without edges. The first registration fixes the
    /// kernel's class.
    pub fn register_kernel(&mut self, kernel: &NodeId, class_id: &str) -> Result<(), GraphError> {
        if !kernel.is_kernel() {
            return Err(GraphError::KindMismatch {
                id: kernel.clone(),
                expected: NodeKind::Kernel,
            });
        }
        let class = *self
            .class_index
            .get(class_id)
            .ok_or_else(|| GraphError::UnknownClass(class_id.to_string()))?;
        match self.kernels.get(kernel) {
            Some(&existing) if existing != class => Err(GraphError::ClassConflict {
                kernel: kernel.clone(),
                registered: self.classes[existing].class_id.clone(),
                requested: class_id.to_string(),
            }),
            Some(_) => Ok(()),
            None if kernel.namespace() != class_id => Err(GraphError::ClassConflict {
                kernel: kernel.clone(),
                registered: kernel.namespace().to_string(),
                requested: class_id.to_string(),
            }),
            None => {
                self.kernels.insert(kernel.clone(), class);
                Ok(())
            }
        }
    }

    /// Registers an object without edges.
    pub fn register_object(&mut self, object: &NodeId) -> Result<(), GraphError> {
        if !object.is_object() {
            return Err(GraphError::KindMismatch {
                id: object.clone(),
                expected: NodeKind::Object,
            });
        }
        self.objects.insert(object.clone());
        Ok(())
    }

    /// Ends the build phase. Nodes are re-indexed in ascending id order, so
    /// index order and id order agree in the frozen graph.
    pub fn freeze(self) -> SessionGraph {
        let mut objects: Vec<NodeId> = self.objects.into_iter().collect();
        objects.sort_unstable();
        let object_index: HashMap<NodeId, ObjectIx> = objects
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), ObjectIx(i as u32)))
            .collect();

        let mut kernels: Vec<(NodeId, usize)> = self.kernels.into_iter().collect();
        kernels.sort_unstable();
        let kernel_index: HashMap<NodeId, KernelIx> = kernels
            .iter()
            .enumerate()
            .map(|(i, (id, _))| (id.clone(), KernelIx(i as u32)))
            .collect();

        let mut pairs: Vec<(KernelIx, ObjectIx)> = self
            .edges
            .iter()
            .map(|(k, o)| (kernel_index[k], object_index[o]))
            .collect();
        pairs.sort_unstable();

        let out = Csr::from_sorted(kernels.len(), pairs.iter().map(|&(k, o)| (k.0, o.0)));
        let mut reversed: Vec<(u32, u32)> = pairs.iter().map(|&(k, o)| (o.0, k.0)).collect();
        reversed.sort_unstable();
        let incoming = Csr::from_sorted(objects.len(), reversed.into_iter());

        let (kernels, kernel_class): (Vec<NodeId>, Vec<usize>) = kernels.into_iter().unzip();
        let mut graph = SessionGraph {
            classes: self.classes,
            objects,
            object_index,
            kernels,
            kernel_class,
            kernel_index,
            out,
            incoming,
            report: ValidationReport::default(),
        };
        graph.report = graph.validate();
        graph
    }
}

/// Dense index of an object inside a frozen graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ObjectIx(pub(crate) u32);

/// Dense index of a kernel inside a frozen graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct KernelIx(pub(crate) u32);

impl ObjectIx {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl KernelIx {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

// Compressed adjacency: row r owns targets[offsets[r]..offsets[r + 1]].
#[derive(Debug, Clone)]
struct Csr {
    offsets: Vec<usize>,
    targets: Vec<u32>,
}

impl Csr {
    fn from_sorted(rows: usize, pairs: impl Iterator<Item = (u32, u32)>) -> Self {
        let mut offsets = vec![0usize; rows + 1];
        let mut targets = Vec::new();
        for (row, target) in pairs {
            offsets[row as usize + 1] += 1;
            targets.push(target);
        }
        for r in 0..rows {
            offsets[r + 1] += offsets[r];
        }
        Csr { offsets, targets }
    }

    fn row(&self, r: usize) -> &[u32] {
        &self.targets[self.offsets[r]..self.offsets[r + 1]]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "node", rename_all = "snake_case")]
pub enum Violation {
    /// A kernel with no outgoing edge.
    KernelWithoutObjects(String),
    /// An object with no incoming edge.
    ObjectWithoutKernels(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::KernelWithoutObjects(id) => write!(f, "kernel {id} has no objects"),
            Violation::ObjectWithoutKernels(id) => write!(f, "object {id} has no kernels"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    /// Declared classes that ended up with no kernels. Informational only.
    pub empty_classes: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassStats {
    pub class_id: String,
    pub kernels: usize,
    pub edges: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphStats {
    pub objects: usize,
    pub kernels: usize,
    pub edges: usize,
    pub classes: Vec<ClassStats>,
}

impl GraphStats {
    pub fn class(&self, class_id: &str) -> Option<&ClassStats> {
        self.classes.iter().find(|c| c.class_id == class_id)
    }
}

impl fmt::Display for GraphStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "objects={} kernels={} edges={}", self.objects, self.kernels, self.edges)?;
        for class in &self.classes {
            writeln!(f, "  class {}: kernels={} edges={}", class.class_id, class.kernels, class.edges)?;
        }
        Ok(())
    }
}

/// The star subgraph of one kernel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Session<'g> {
    pub kernel: &'g NodeId,
    /// Ascending, distinct.
    pub objects: Vec<&'g NodeId>,
}

/// Frozen, immutable session graph.
#[derive(Debug, Clone)]
pub struct SessionGraph {
    classes: Vec<KernelClass>,
    objects: Vec<NodeId>,
    object_index: HashMap<NodeId, ObjectIx>,
    kernels: Vec<NodeId>,
    kernel_class: Vec<usize>,
    kernel_index: HashMap<NodeId, KernelIx>,
    out: Csr,
    incoming: Csr,
    report: ValidationReport,
}

impl SessionGraph {
    pub fn classes(&self) -> &[KernelClass] {
        &self.classes
    }

    pub fn object_count(&self) -> usize {
        self.objects.len()
    }

    pub fn kernel_count(&self) -> usize {
        self.kernels.len()
    }

    pub fn edge_count(&self) -> usize {
        self.out.targets.len()
    }

    /// Report computed at freeze time.
    pub fn validation(&self) -> &ValidationReport {
        &self.report
    }

    pub fn is_valid(&self) -> bool {
        self.report.is_valid()
    }

    /// Recomputes the structural checks. Always equal to [`Self::validation`].
    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        for (k, id) in self.kernels.iter().enumerate() {
            if self.out.row(k).is_empty() {
                report.violations.push(Violation::KernelWithoutObjects(id.to_string()));
            }
        }
        for (o, id) in self.objects.iter().enumerate() {
            if self.incoming.row(o).is_empty() {
                report.violations.push(Violation::ObjectWithoutKernels(id.to_string()));
            }
        }
        let mut populated = vec![false; self.classes.len()];
        for &c in &self.kernel_class {
            populated[c] = true;
        }
        report.empty_classes = self
            .classes
            .iter()
            .zip(populated)
            .filter(|(_, p)| !p)
            .map(|(c, _)| c.class_id.clone())
            .collect();
        report
    }

    /// All objects in ascending id order.
    pub fn objects(&self) -> &[NodeId] {
        &self.objects
    }

    /// All kernels in ascending id order.
    pub fn kernels(&self) -> &[NodeId] {
        &self.kernels
    }

    pub fn object_ix(&self, id: &NodeId) -> Option<ObjectIx> {
        self.object_index.get(id).copied()
    }

    pub fn kernel_ix(&self, id: &NodeId) -> Option<KernelIx> {
        self.kernel_index.get(id).copied()
    }

    pub fn object_id(&self, ix: ObjectIx) -> &NodeId {
        &self.objects[ix.index()]
    }

    pub fn kernel_id(&self, ix: KernelIx) -> &NodeId {
        &self.kernels[ix.index()]
    }

    pub fn kernel_class(&self, ix: KernelIx) -> &str {
        &self.classes[self.kernel_class[ix.index()]].class_id
    }

    pub(crate) fn kernel_class_slot(&self, ix: KernelIx) -> usize {
        self.kernel_class[ix.index()]
    }

    /// Kernels pointing at `ix`, ascending.
    pub fn kernels_of_ix(&self, ix: ObjectIx) -> impl ExactSizeIterator<Item = KernelIx> + '_ {
        self.incoming.row(ix.index()).iter().map(|&k| KernelIx(k))
    }

    /// Objects of kernel `ix`, ascending.
    pub fn objects_of_ix(&self, ix: KernelIx) -> impl ExactSizeIterator<Item = ObjectIx> + '_ {
        self.out.row(ix.index()).iter().map(|&o| ObjectIx(o))
    }

    pub fn in_degree_ix(&self, ix: ObjectIx) -> usize {
        self.incoming.row(ix.index()).len()
    }

    pub fn out_degree_ix(&self, ix: KernelIx) -> usize {
        self.out.row(ix.index()).len()
    }

    fn require_object(&self, id: &NodeId) -> Result<ObjectIx, GraphError> {
        self.object_ix(id).ok_or_else(|| GraphError::UnknownObject(id.clone()))
    }

    fn require_kernel(&self, id: &NodeId) -> Result<KernelIx, GraphError> {
        self.kernel_ix(id).ok_or_else(|| GraphError::UnknownKernel(id.clone()))
    }

    /// Kernels holding an edge to `object`, ascending.
    pub fn kernels_of(&self, object: &NodeId) -> Result<Vec<&NodeId>, GraphError> {
        let ix = self.require_object(object)?;
        Ok(self.kernels_of_ix(ix).map(|k| self.kernel_id(k)).collect())
    }

    pub fn objects_of(&self, kernel: &NodeId) -> Result<Session<'_>, GraphError> {
        let ix = self.require_kernel(kernel)?;
        Ok(Session {
            kernel: self.kernel_id(ix),
            objects: self.objects_of_ix(ix).map(|o| self.object_id(o)).collect(),
        })
    }

    pub fn in_degree(&self, object: &NodeId) -> Result<usize, GraphError> {
        Ok(self.in_degree_ix(self.require_object(object)?))
    }

    pub fn out_degree(&self, kernel: &NodeId) -> Result<usize, GraphError> {
        Ok(self.out_degree_ix(self.require_kernel(kernel)?))
    }

    pub fn contains_edge(&self, kernel: &NodeId, object: &NodeId) -> bool {
        match (self.kernel_ix(kernel), self.object_ix(object)) {
            (Some(k), Some(o)) => self.out.row(k.index()).binary_search(&o.0).is_ok(),
            _ => false,
        }
    }

    /// Every edge as `(kernel, object)`, ordered by kernel then object.
    pub fn edges(&self) -> impl Iterator<Item = (&NodeId, &NodeId)> + '_ {
        (0..self.kernels.len()).flat_map(move |k| {
            self.out
                .row(k)
                .iter()
                .map(move |&o| (&self.kernels[k], &self.objects[o as usize]))
        })
    }

    pub fn stats(&self) -> GraphStats {
        let mut classes: Vec<ClassStats> = self
            .classes
            .iter()
            .map(|c| ClassStats {
                class_id: c.class_id.clone(),
                kernels: 0,
                edges: 0,
            })
            .collect();
        for (k, &c) in self.kernel_class.iter().enumerate() {
            classes[c].kernels += 1;
            classes[c].edges += self.out.row(k).len();
        }
        GraphStats {
            objects: self.objects.len(),
            kernels: self.kernels.len(),
            edges: self.edge_count(),
            classes,
        }
    }
}
