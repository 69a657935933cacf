//! Recursive partitioning of embedding space into listing clusters.
//!
//! A binary tree is grown by repeatedly bisecting node members with 2-means;
//! a split is rejected when either child would fall below the minimum leaf
//! size or the depth limit would be exceeded. Listings are then assigned to
//! the deepest ancestor node holding at least a threshold number of
//! listings, which yields clusters of roughly the threshold size.

mod capture;
mod size_rule;
mod tree;

pub use capture::{demand_capture_report, CaptureFilters, DemandCaptureReport, OVER_THRESHOLDS};
pub use size_rule::{
    compare_cluster_sizes, mde_adjusted, size_rule_table, SizeDecision, SizeRuleOutcome,
    SizeRuleRow, SizeRuleTable,
};
pub use tree::{
    build_partition_tree, build_partition_tree_points, PartitionTree, TreeNode,
    DEFAULT_MAX_DEPTH, DEFAULT_MIN_LEAF,
};

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use crate::error::{Error, Result};

/// Listing-to-cluster mapping produced by cutting a partition tree at a
/// size threshold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterAssignment {
    /// listing id -> cluster id (stable tree-path strings such as "0.1.0").
    pub clusters: BTreeMap<String, String>,
    pub threshold: usize,
    /// cluster id -> member count.
    pub sizes: BTreeMap<String, usize>,
}

impl ClusterAssignment {
    pub fn n_clusters(&self) -> usize {
        self.sizes.len()
    }

    pub fn cluster_of(&self, listing_id: &str) -> Option<&str> {
        self.clusters.get(listing_id).map(String::as_str)
    }

    /// cluster id -> sorted member listing ids.
    pub fn members(&self) -> BTreeMap<&str, Vec<&str>> {
        let mut out: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for (listing, cluster) in &self.clusters {
            out.entry(cluster.as_str()).or_default().push(listing.as_str());
        }
        out
    }
}

/// Cuts the tree at `threshold`: every listing maps to its deepest ancestor
/// with at least `threshold` members. If even the root is smaller than the
/// threshold, the root is the single fallback cluster.
pub fn assign_clusters(tree: &PartitionTree, threshold: usize) -> Result<ClusterAssignment> {
    if threshold < 1 {
        return Err(Error::Domain("threshold must be >= 1".into()));
    }
    let mut clusters = BTreeMap::new();
    let mut sizes = BTreeMap::new();
    assign_node(tree, tree.root(), threshold, &mut clusters, &mut sizes);
    Ok(ClusterAssignment { clusters, threshold, sizes })
}

fn assign_node(
    tree: &PartitionTree,
    node: usize,
    threshold: usize,
    clusters: &mut BTreeMap<String, String>,
    sizes: &mut BTreeMap<String, usize>,
) {
    let n = tree.node(node);
    let qualifying_children: Vec<usize> = n
        .children
        .iter()
        .copied()
        .filter(|&c| tree.node(c).members.len() >= threshold)
        .collect();

    // Members under non-qualifying children (or held directly at a leaf)
    // stay at this node; qualifying children recurse.
    let mut here: Vec<&str> = Vec::new();
    if n.children.is_empty() {
        here.extend(n.members.iter().map(String::as_str));
    } else {
        for &c in &n.children {
            if qualifying_children.contains(&c) {
                assign_node(tree, c, threshold, clusters, sizes);
            } else {
                here.extend(tree.node(c).members.iter().map(String::as_str));
            }
        }
    }
    if !here.is_empty() {
        let id = tree.path_id(node);
        sizes.insert(id.clone(), here.len());
        for listing in here {
            clusters.insert(listing.to_string(), id.clone());
        }
    }
}

/// Persists a cluster assignment as CSV (listing_id, cluster_id).
pub fn save_clusters(assignment: &ClusterAssignment, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    w.write_record(["listing_id", "cluster_id"])
        .map_err(|e| Error::schema(None, e.to_string()))?;
    for (listing, cluster) in &assignment.clusters {
        w.write_record([listing.as_str(), cluster.as_str()])
            .map_err(|e| Error::schema(None, e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path.display().to_string(), e))
}

/// Loads a cluster assignment CSV. The threshold is not stored in the file;
/// callers pass the value the file was produced with (0 when unknown).
pub fn load_clusters(path: &Path, threshold: usize) -> Result<ClusterAssignment> {
    let file = File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut reader = csv::Reader::from_reader(BufReader::new(file));
    let mut clusters = BTreeMap::new();
    let mut sizes: BTreeMap<String, usize> = BTreeMap::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| Error::schema(i + 1, e.to_string()))?;
        let listing = row.get(0).ok_or_else(|| Error::schema(i + 1, "missing listing_id"))?;
        let cluster = row.get(1).ok_or_else(|| Error::schema(i + 1, "missing cluster_id"))?;
        if clusters.insert(listing.to_string(), cluster.to_string()).is_some() {
            return Err(Error::schema(i + 1, format!("duplicate listing `{listing}`")));
        }
        *sizes.entry(cluster.to_string()).or_insert(0) += 1;
    }
    Ok(ClusterAssignment { clusters, threshold, sizes })
}
