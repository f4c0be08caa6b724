//! Topic clustering with a resolution-parameterized quality function,
//! optimized by smart local moving (local moving, per-cluster refinement,
//! aggregation into a reduced network, recursion).
//!
//! Quality of a partition is
//!
//! ```text
//! Q = Σ_{i≠j, same topic} (a_ij − γ)
//! ```
//!
//! over ordered pairs of documents, with `a_ij = 0` for unlinked pairs.
//! Residual documents belong to no topic and contribute nothing.

mod network;
mod partition;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use self::partition::{apply_min_size, MinSizeReport, Partition, TopicId, RESIDUAL_LABEL};
use self::network::Network;
use crate::citegraph::CitationGraph;
use crate::error::{Error, Result};

/// Moves must improve quality by more than this to be taken.
const MIN_GAIN: f64 = 1e-12;

/// Resolution suited to a citation graph of roughly 48 million documents.
pub const REFERENCE_RESOLUTION: f64 = 3e-5;

pub const DEFAULT_MIN_SIZE: usize = 50;

fn check_resolution(resolution: f64) -> Result<()> {
    if resolution > 0.0 && resolution.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "resolution must be positive, got {resolution}"
        )))
    }
}

/// Evaluates `Q` for `p` on `g`. Every node of `g` must be labelled in `p`.
pub fn quality(g: &CitationGraph, p: &Partition, resolution: f64) -> Result<f64> {
    check_resolution(resolution)?;
    let mut labels = Vec::with_capacity(g.node_count());
    for id in g.ids() {
        match p.label(id) {
            Some(label) => labels.push(label),
            None => {
                return Err(Error::InvalidParameter(format!(
                    "partition does not label document {id}"
                )))
            }
        }
    }
    let mut sizes = vec![0usize; p.topic_count()];
    let mut linked = 0.0;
    for (node, label) in labels.iter().enumerate() {
        let Some(topic) = label else { continue };
        sizes[*topic as usize] += 1;
        for other in g.neighbors(node) {
            if labels[other as usize] == Some(*topic) {
                linked += g.weight(node, other as usize);
            }
        }
    }
    let pairs: f64 = sizes.iter().map(|&n| (n * n.saturating_sub(1)) as f64).sum();
    Ok(linked - resolution * pairs)
}

/// One sweep-until-stable run of local moving. Returns whether any node moved.
fn local_moving(net: &Network, labels: &mut [u32], resolution: f64, rng: &mut ChaCha8Rng) -> bool {
    let n = net.len();
    if n <= 1 {
        return false;
    }
    let mut cluster_size = vec![0.0; n];
    let mut members = vec![0usize; n];
    for (node, &c) in labels.iter().enumerate() {
        cluster_size[c as usize] += net.size[node];
        members[c as usize] += 1;
    }
    let mut empty: Vec<u32> = (0..n as u32).filter(|&c| members[c as usize] == 0).collect();
    empty.sort_unstable_by(|a, b| b.cmp(a));

    let mut link = vec![0.0f64; n];
    let mut touched: Vec<u32> = Vec::new();
    let mut order: Vec<usize> = (0..n).collect();
    let mut changed = false;

    loop {
        order.shuffle(rng);
        let mut moved = false;
        for &node in &order {
            let current = labels[node];
            let s = net.size[node];

            for (j, w) in net.edges_of(node) {
                let c = labels[j];
                if link[c as usize] == 0.0 {
                    touched.push(c);
                }
                link[c as usize] += w;
            }

            cluster_size[current as usize] -= s;
            members[current as usize] -= 1;
            if members[current as usize] == 0 {
                // node is alone: staying is the same as a fresh topic
                cluster_size[current as usize] = 0.0;
            }

            let score = |c: u32, cluster_size: &[f64], link: &[f64]| {
                link[c as usize] - 2.0 * resolution * s * cluster_size[c as usize]
            };
            let mut best = current;
            let mut best_score = score(current, &cluster_size, &link);
            touched.sort_unstable();
            for &c in &touched {
                if c == current {
                    continue;
                }
                let sc = score(c, &cluster_size, &link);
                if sc > best_score + MIN_GAIN {
                    best = c;
                    best_score = sc;
                }
            }
            if best_score < -MIN_GAIN && members[current as usize] > 0 {
                // a fresh topic (score 0) beats every existing option
                best = *empty.last().expect("an empty cluster exists while a node shares one");
            }

            for &c in &touched {
                link[c as usize] = 0.0;
            }
            touched.clear();

            if best != current {
                if members[current as usize] == 0 {
                    empty.push(current);
                    empty.sort_unstable_by(|a, b| b.cmp(a));
                }
                if members[best as usize] == 0 {
                    let pos = empty.iter().position(|&c| c == best).expect("tracked empty cluster");
                    empty.remove(pos);
                }
                labels[node] = best;
                moved = true;
                changed = true;
            }
            cluster_size[labels[node] as usize] += s;
            members[labels[node] as usize] += 1;
        }
        if !moved {
            break;
        }
    }
    changed
}

/// Relabels clusters densely in order of first appearance; returns the count.
fn renumber(labels: &mut [u32]) -> usize {
    let mut map = vec![u32::MAX; labels.len()];
    let mut next = 0u32;
    for c in labels.iter_mut() {
        if map[*c as usize] == u32::MAX {
            map[*c as usize] = next;
            next += 1;
        }
        *c = map[*c as usize];
    }
    next as usize
}

fn smart_local_moving(net: &Network, labels: &mut [u32], resolution: f64, rng: &mut ChaCha8Rng) {
    if net.len() <= 1 {
        return;
    }
    local_moving(net, labels, resolution, rng);
    let n_clusters = renumber(labels);
    if n_clusters == net.len() {
        return;
    }

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_clusters];
    for (node, &c) in labels.iter().enumerate() {
        members[c as usize].push(node);
    }
    let seeds: Vec<u64> = (0..n_clusters).map(|_| rng.random()).collect();

    // Refinement: local moving inside each cluster, starting from singletons.
    let refined: Vec<Vec<u32>> = members
        .par_iter()
        .zip(seeds.par_iter())
        .map_init(
            || vec![u32::MAX; net.len()],
            |local, (nodes, &seed)| {
                let sub = net.subnetwork(nodes, local);
                let mut sub_labels: Vec<u32> = (0..nodes.len() as u32).collect();
                let mut sub_rng = ChaCha8Rng::seed_from_u64(seed);
                local_moving(&sub, &mut sub_labels, resolution, &mut sub_rng);
                renumber(&mut sub_labels);
                sub_labels
            },
        )
        .collect();

    let mut refined_labels = vec![0u32; net.len()];
    let mut reduced_labels = Vec::new();
    let mut offset = 0u32;
    for (c, (nodes, sub)) in members.iter().zip(&refined).enumerate() {
        let count = sub.iter().map(|&l| l + 1).max().unwrap_or(0);
        for (&node, &l) in nodes.iter().zip(sub) {
            refined_labels[node] = offset + l;
        }
        reduced_labels.extend(std::iter::repeat_n(c as u32, count as usize));
        offset += count;
    }
    if offset as usize == net.len() {
        // refinement split everything back to singletons; nothing to aggregate
        return;
    }

    let reduced = net.aggregate(&refined_labels, offset as usize);
    smart_local_moving(&reduced, &mut reduced_labels, resolution, rng);
    for l in labels.iter_mut().zip(&refined_labels) {
        *l.0 = reduced_labels[*l.1 as usize];
    }
}

/// Partitions `g` by maximizing `Q` at `resolution`.
///
/// Iterates full smart-local-moving cycles until one fails to improve quality
/// or `max_iterations` is reached, then finishes with node-level local moving
/// so no single document can improve `Q` by moving. Degree-0 documents go to
/// the residual group.
pub fn cluster(g: &CitationGraph, resolution: f64, seed: u64, max_iterations: usize) -> Result<Partition> {
    check_resolution(resolution)?;
    let active: Vec<usize> = (0..g.node_count()).filter(|&n| g.degree(n) > 0).collect();
    let net = Network::from_graph(g, &active);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels: Vec<u32> = (0..net.len() as u32).collect();
    let mut best = net.quality(&labels, resolution);

    for _ in 0..max_iterations {
        smart_local_moving(&net, &mut labels, resolution, &mut rng);
        let q = net.quality(&labels, resolution);
        let improved = q > best + MIN_GAIN;
        best = best.max(q);
        if !improved {
            break;
        }
    }
    local_moving(&net, &mut labels, resolution, &mut rng);

    let mut group = vec![None; g.node_count()];
    for (&node, &label) in active.iter().zip(&labels) {
        group[node] = Some(label);
    }
    let mut p = Partition::from_groups(
        g.ids()
            .iter()
            .cloned()
            .zip(group),
    );
    p.resolution = Some(resolution);
    p.quality = Some(quality(g, &p, resolution)?);
    Ok(p)
}

/// Runs [`cluster`] once per seed and keeps the highest-quality partition
/// (earliest seed on ties).
pub fn cluster_best_of(
    g: &CitationGraph,
    resolution: f64,
    seeds: impl IntoIterator<Item = u64>,
    max_iterations: usize,
) -> Result<Partition> {
    let mut best: Option<Partition> = None;
    for seed in seeds {
        let p = cluster(g, resolution, seed, max_iterations)?;
        let better = match &best {
            None => true,
            Some(b) => p.quality.unwrap_or(f64::MIN) > b.quality.unwrap_or(f64::MIN),
        };
        if better {
            best = Some(p);
        }
    }
    best.ok_or_else(|| Error::InvalidParameter("at least one seed is required".into()))
}

/// Largest quality gain any single document could obtain by moving to another
/// existing topic or to a fresh one. Non-positive means `p` is a node-level
/// local optimum. Residual documents are treated as singletons.
pub fn best_single_move_gain(g: &CitationGraph, p: &Partition, resolution: f64) -> Result<f64> {
    check_resolution(resolution)?;
    let labels: Vec<Option<TopicId>> = g.ids().iter().map(|id| p.topic_of(id)).collect();
    let mut sizes = vec![0.0f64; p.topic_count()];
    for l in labels.iter().flatten() {
        sizes[*l as usize] += 1.0;
    }
    let mut best = f64::NEG_INFINITY;
    for node in 0..g.node_count() {
        let neighbors = g.neighbors(node);
        let link_to = |topic: TopicId| -> f64 {
            neighbors
                .iter()
                .filter(|&&j| labels[j as usize] == Some(topic))
                .map(|&j| g.weight(node, j as usize) + g.weight(j as usize, node))
                .sum()
        };
        let stay = match labels[node] {
            Some(t) => link_to(t) - 2.0 * resolution * (sizes[t as usize] - 1.0),
            None => 0.0,
        };
        // fresh topic
        if labels[node].is_some() {
            best = best.max(-stay);
        }
        for t in 0..p.topic_count() as TopicId {
            if Some(t) == labels[node] {
                continue;
            }
            let join = link_to(t) - 2.0 * resolution * sizes[t as usize];
            best = best.max(join - stay);
        }
    }
    Ok(best)
}
