//! Topic map: a top-n similarity graph laid out with a seeded force-directed
//! scheme, plus dominant-field labels per topic.
//!
//! The layout runs an annealed phase with capped displacements, optionally
//! cuts the longest edges, then finishes with energy-monitored gradient steps
//! so the recorded energy never increases during the final phase.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bm25::TopicSimilarity;
use crate::clusterer::{Partition, TopicId};
use crate::corpus::{csv_writer, DocumentSet, FieldMap};
use crate::error::{Error, Result};

pub const UNKNOWN_FIELD: &str = "UNKNOWN";
pub const DEFAULT_TOP_N: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityGraph {
    pub nodes: Vec<TopicId>,
    /// (a, b, sim) with `a < b`, ascending.
    pub edges: Vec<(TopicId, TopicId, f64)>,
}

/// Keeps each topic's `top_n` strongest similarities (ties by lower partner id)
/// and takes the union over topics. `topics` adds nodes without similarities.
pub fn build_similarity_graph(
    sims: &[TopicSimilarity],
    topics: impl IntoIterator<Item = TopicId>,
    top_n: usize,
) -> Result<SimilarityGraph> {
    if top_n < 1 {
        return Err(Error::InvalidParameter("top_n must be at least 1".into()));
    }
    let mut incident: BTreeMap<TopicId, Vec<(f64, TopicId)>> = BTreeMap::new();
    let mut nodes: BTreeSet<TopicId> = topics.into_iter().collect();
    for s in sims {
        if s.topic_a == s.topic_b {
            continue;
        }
        incident.entry(s.topic_a).or_default().push((s.sim, s.topic_b));
        incident.entry(s.topic_b).or_default().push((s.sim, s.topic_a));
        nodes.insert(s.topic_a);
        nodes.insert(s.topic_b);
    }
    let mut kept: BTreeMap<(TopicId, TopicId), f64> = BTreeMap::new();
    for (&topic, list) in incident.iter_mut() {
        list.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
        for &(sim, other) in list.iter().take(top_n) {
            kept.insert((topic.min(other), topic.max(other)), sim);
        }
    }
    Ok(SimilarityGraph {
        nodes: nodes.into_iter().collect(),
        edges: kept.into_iter().map(|((a, b), s)| (a, b, s)).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayoutOptions {
    pub seed: u64,
    pub iterations: usize,
    /// Fraction of the longest edges removed before cooling; 0 disables cutting.
    pub edge_cut: f64,
}

impl Default for LayoutOptions {
    fn default() -> Self {
        LayoutOptions {
            seed: 1,
            iterations: 500,
            edge_cut: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    /// (topic, x, y) with coordinates in [0, 1].
    pub positions: Vec<(TopicId, f64, f64)>,
    /// Energy after each step of the final phase.
    pub energy_trace: Vec<f64>,
}

const SOFTENING: f64 = 1e-3;
const GRAVITY: f64 = 0.05;

struct Forces<'a> {
    edges: &'a [(usize, usize, f64)],
    n: usize,
}

impl Forces<'_> {
    /// Attraction `w·d³/3` per edge, repulsion `−½·ln(d² + ε²)` per pair,
    /// gravity `g·|x|²/2` per node.
    fn energy(&self, pos: &[[f64; 2]]) -> f64 {
        let mut e = 0.0;
        for &(a, b, w) in self.edges {
            let d = dist(pos[a], pos[b]);
            e += w * d.powi(3) / 3.0;
        }
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                let dx = pos[i][0] - pos[j][0];
                let dy = pos[i][1] - pos[j][1];
                e -= 0.5 * (dx * dx + dy * dy + SOFTENING * SOFTENING).ln();
            }
            e += 0.5 * GRAVITY * (pos[i][0].powi(2) + pos[i][1].powi(2));
        }
        e
    }

    /// Negative energy gradient per node.
    fn forces(&self, pos: &[[f64; 2]], adjacency: &[Vec<(usize, f64)>]) -> Vec<[f64; 2]> {
        (0..self.n)
            .into_par_iter()
            .map(|i| {
                let mut f = [-GRAVITY * pos[i][0], -GRAVITY * pos[i][1]];
                for j in 0..self.n {
                    if j == i {
                        continue;
                    }
                    let dx = pos[i][0] - pos[j][0];
                    let dy = pos[i][1] - pos[j][1];
                    let r2 = dx * dx + dy * dy + SOFTENING * SOFTENING;
                    f[0] += dx / r2;
                    f[1] += dy / r2;
                }
                for &(j, w) in &adjacency[i] {
                    let dx = pos[i][0] - pos[j][0];
                    let dy = pos[i][1] - pos[j][1];
                    let d = (dx * dx + dy * dy).sqrt();
                    f[0] -= w * d * dx;
                    f[1] -= w * d * dy;
                }
                f
            })
            .collect()
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn adjacency(n: usize, edges: &[(usize, usize, f64)]) -> Vec<Vec<(usize, f64)>> {
    let mut adj = vec![Vec::new(); n];
    for &(a, b, w) in edges {
        adj[a].push((b, w));
        adj[b].push((a, w));
    }
    adj
}

/// Seeded force-directed layout; deterministic for a given graph and options.
pub fn layout(graph: &SimilarityGraph, opts: &LayoutOptions) -> Result<Layout> {
    let n = graph.nodes.len();
    if n == 0 {
        return Err(Error::InvalidParameter("layout needs at least one topic".into()));
    }
    if n == 1 {
        return Ok(Layout {
            positions: vec![(graph.nodes[0], 0.5, 0.5)],
            energy_trace: Vec::new(),
        });
    }
    let index: BTreeMap<TopicId, usize> = graph.nodes.iter().enumerate().map(|(i, &t)| (t, i)).collect();
    let max_sim = graph.edges.iter().map(|e| e.2).fold(0.0, f64::max);
    let mut edges: Vec<(usize, usize, f64)> = graph
        .edges
        .iter()
        .filter(|e| e.2 > 0.0)
        .map(|&(a, b, s)| (index[&a], index[&b], s / max_sim))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let spread = (n as f64).sqrt();
    let mut pos: Vec<[f64; 2]> = (0..n)
        .map(|_| [rng.random_range(-spread..spread), rng.random_range(-spread..spread)])
        .collect();

    let anneal_steps = opts.iterations * 4 / 5;
    let final_steps = opts.iterations - anneal_steps;
    let mut adj = adjacency(n, &edges);

    let t0 = spread * 0.5;
    for step in 0..anneal_steps {
        if opts.edge_cut > 0.0 && step == anneal_steps / 2 && !edges.is_empty() {
            edges = cut_long_edges(&edges, &pos, opts.edge_cut);
            adj = adjacency(n, &edges);
        }
        let temperature = t0 * (1.0 - step as f64 / anneal_steps as f64) + 1e-3;
        let forces = Forces { edges: &edges, n }.forces(&pos, &adj);
        for (p, f) in pos.iter_mut().zip(&forces) {
            let norm = (f[0] * f[0] + f[1] * f[1]).sqrt();
            if norm > 0.0 {
                let scale = norm.min(temperature) / norm;
                p[0] += f[0] * scale;
                p[1] += f[1] * scale;
            }
        }
    }

    let model = Forces { edges: &edges, n };
    let mut energy = model.energy(&pos);
    let mut step_size = 0.05;
    let mut trace = Vec::with_capacity(final_steps);
    for _ in 0..final_steps {
        let forces = model.forces(&pos, &adj);
        loop {
            let trial: Vec<[f64; 2]> = pos
                .iter()
                .zip(&forces)
                .map(|(p, f)| [p[0] + step_size * f[0], p[1] + step_size * f[1]])
                .collect();
            let e = model.energy(&trial);
            if e <= energy {
                pos = trial;
                energy = e;
                step_size *= 1.2;
                break;
            }
            step_size *= 0.5;
            if step_size < 1e-12 {
                break;
            }
        }
        trace.push(energy);
    }

    let (min_x, max_x) = min_max(pos.iter().map(|p| p[0]));
    let (min_y, max_y) = min_max(pos.iter().map(|p| p[1]));
    let range = (max_x - min_x).max(max_y - min_y);
    let positions = graph
        .nodes
        .iter()
        .zip(&pos)
        .map(|(&t, p)| {
            if range > 0.0 {
                (t, (p[0] - min_x) / range, (p[1] - min_y) / range)
            } else {
                (t, 0.5, 0.5)
            }
        })
        .collect();
    Ok(Layout {
        positions,
        energy_trace: trace,
    })
}

fn min_max(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// Drops the longest `fraction` of edges, never isolating a node that still had edges.
fn cut_long_edges(edges: &[(usize, usize, f64)], pos: &[[f64; 2]], fraction: f64) -> Vec<(usize, usize, f64)> {
    let mut degree = BTreeMap::new();
    for &(a, b, _) in edges {
        *degree.entry(a).or_insert(0usize) += 1;
        *degree.entry(b).or_insert(0usize) += 1;
    }
    let mut order: Vec<usize> = (0..edges.len()).collect();
    order.sort_by(|&i, &j| {
        let di = dist(pos[edges[i].0], pos[edges[i].1]);
        let dj = dist(pos[edges[j].0], pos[edges[j].1]);
        dj.total_cmp(&di).then_with(|| i.cmp(&j))
    });
    let budget = (edges.len() as f64 * fraction.clamp(0.0, 1.0)).floor() as usize;
    let mut removed = vec![false; edges.len()];
    let mut cut = 0;
    for i in order {
        if cut == budget {
            break;
        }
        let (a, b, _) = edges[i];
        if degree[&a] > 1 && degree[&b] > 1 {
            removed[i] = true;
            *degree.get_mut(&a).unwrap() -= 1;
            *degree.get_mut(&b).unwrap() -= 1;
            cut += 1;
        }
    }
    edges
        .iter()
        .zip(removed)
        .filter(|(_, r)| !r)
        .map(|(e, _)| *e)
        .collect()
}

/// Modal field of each topic's member journals (ties alphabetical);
/// topics without a mapped journal get [`UNKNOWN_FIELD`].
pub fn assign_fields(docs: &DocumentSet, p: &Partition, field_map: &FieldMap) -> BTreeMap<TopicId, String> {
    let mut counts: Vec<BTreeMap<&str, usize>> = vec![BTreeMap::new(); p.topic_count()];
    for d in docs {
        let (Some(t), Some(field)) = (
            p.topic_of(&d.doc_id),
            d.journal_id.as_deref().and_then(|j| field_map.field_of(j)),
        ) else {
            continue;
        };
        *counts[t as usize].entry(field).or_insert(0) += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(t, c)| {
            // BTreeMap order is alphabetical, so the first maximum wins ties
            let field = c
                .into_iter()
                .fold(None::<(&str, usize)>, |best, (f, n)| match best {
                    Some((_, bn)) if bn >= n => best,
                    _ => Some((f, n)),
                })
                .map_or(UNKNOWN_FIELD.to_string(), |(f, _)| f.to_string());
            (t as TopicId, field)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapNode {
    pub topic_id: TopicId,
    pub x: f64,
    pub y: f64,
    pub field: String,
    pub size: usize,
}

pub fn map_nodes(layout: &Layout, fields: &BTreeMap<TopicId, String>, sizes: &BTreeMap<TopicId, usize>) -> Vec<MapNode> {
    layout
        .positions
        .iter()
        .map(|&(topic_id, x, y)| MapNode {
            topic_id,
            x,
            y,
            field: fields.get(&topic_id).cloned().unwrap_or_else(|| UNKNOWN_FIELD.to_string()),
            size: sizes.get(&topic_id).copied().unwrap_or(0),
        })
        .collect()
}

/// Writes `topic_id,x,y,field,size`.
pub fn save_map(path: &Path, nodes: &[MapNode]) -> Result<()> {
    let mut w = csv_writer(path)?;
    for node in nodes {
        w.serialize(node)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_similarities(path: &Path) -> Result<Vec<TopicSimilarity>> {
    crate::corpus::read_csv(path)
}

pub fn save_similarities(path: &Path, sims: &[TopicSimilarity]) -> Result<()> {
    let mut w = csv_writer(path)?;
    for s in sims {
        w.serialize(s)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sim(a: TopicId, b: TopicId, s: f64) -> TopicSimilarity {
        TopicSimilarity {
            topic_a: a,
            topic_b: b,
            sim: s,
        }
    }

    #[test]
    fn complete_triangle_survives() {
        let g = build_similarity_graph(&[sim(0, 1, 1.0), sim(0, 2, 2.0), sim(1, 2, 3.0)], [], 5).unwrap();
        assert_eq!(g.edges.len(), 3);
    }

    #[test]
    fn top_one_on_chain() {
        // 0-1: 4, 1-2: 3, 2-3: 2, 3-4: 1
        let sims = [sim(0, 1, 4.0), sim(1, 2, 3.0), sim(2, 3, 2.0), sim(3, 4, 1.0)];
        let g = build_similarity_graph(&sims, [], 1).unwrap();
        let kept: Vec<(TopicId, TopicId)> = g.edges.iter().map(|e| (e.0, e.1)).collect();
        assert_eq!(kept, vec![(0, 1), (1, 2), (2, 3), (3, 4)]);
        assert!(build_similarity_graph(&sims, [], 0).is_err());
    }

    #[test]
    fn single_node_is_centered() {
        let g = SimilarityGraph {
            nodes: vec![7],
            edges: vec![],
        };
        let l = layout(&g, &LayoutOptions::default()).unwrap();
        assert_eq!(l.positions, vec![(7, 0.5, 0.5)]);
    }

    #[test]
    fn deterministic_and_normalized() {
        let sims: Vec<TopicSimilarity> = (0..9).map(|i| sim(i, i + 1, 1.0 + i as f64)).collect();
        let g = build_similarity_graph(&sims, [], 3).unwrap();
        let opts = LayoutOptions {
            seed: 9,
            iterations: 200,
            edge_cut: 0.2,
        };
        let a = layout(&g, &opts).unwrap();
        let b = layout(&g, &opts).unwrap();
        assert_eq!(a, b);
        for &(_, x, y) in &a.positions {
            assert!((0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y));
        }
        assert!(a.energy_trace.windows(2).all(|w| w[1] <= w[0]));
    }
}
