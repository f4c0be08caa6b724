use crate::citegraph::CitationGraph;

/// Undirected weighted network with node sizes, the working representation
/// of the optimizer. Each original document has size 1; aggregated nodes carry
/// the number of documents they stand for.
#[derive(Debug, Clone)]
pub(crate) struct Network {
    pub size: Vec<f64>,
    pub offsets: Vec<usize>,
    pub neighbors: Vec<u32>,
    pub weights: Vec<f64>,
}

impl Network {
    /// Symmetrizes the citation graph over `nodes` (graph indices), summing the
    /// two ordered-pair weights of every linked pair.
    pub fn from_graph(g: &CitationGraph, nodes: &[usize]) -> Self {
        let mut local = vec![u32::MAX; g.node_count()];
        for (i, &node) in nodes.iter().enumerate() {
            local[node] = i as u32;
        }
        let mut offsets = Vec::with_capacity(nodes.len() + 1);
        offsets.push(0);
        let mut neighbors = Vec::new();
        let mut weights = Vec::new();
        for &node in nodes {
            let k_node = g.degree(node) as f64;
            for other in g.neighbors(node) {
                let j = local[other as usize];
                if j == u32::MAX {
                    continue;
                }
                let k_other = g.degree(other as usize) as f64;
                neighbors.push(j);
                weights.push(1.0 / k_other + 1.0 / k_node);
            }
            offsets.push(neighbors.len());
        }
        Network {
            size: vec![1.0; nodes.len()],
            offsets,
            neighbors,
            weights,
        }
    }

    pub fn len(&self) -> usize {
        self.size.len()
    }

    pub fn edges_of(&self, node: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.offsets[node]..self.offsets[node + 1];
        self.neighbors[range.clone()]
            .iter()
            .zip(&self.weights[range])
            .map(|(&j, &w)| (j as usize, w))
    }

    /// Induced subnetwork on `members` (local indices of this network).
    pub fn subnetwork(&self, members: &[usize], local: &mut [u32]) -> Network {
        for (i, &m) in members.iter().enumerate() {
            local[m] = i as u32;
        }
        let mut offsets = Vec::with_capacity(members.len() + 1);
        offsets.push(0);
        let mut neighbors = Vec::new();
        let mut weights = Vec::new();
        let mut size = Vec::with_capacity(members.len());
        for &m in members {
            size.push(self.size[m]);
            for (j, w) in self.edges_of(m) {
                let lj = local[j];
                if lj != u32::MAX {
                    neighbors.push(lj);
                    weights.push(w);
                }
            }
            offsets.push(neighbors.len());
        }
        for &m in members {
            local[m] = u32::MAX;
        }
        Network {
            size,
            offsets,
            neighbors,
            weights,
        }
    }

    /// Collapses each cluster into one node. Labels must be dense in `0..n_clusters`.
    pub fn aggregate(&self, labels: &[u32], n_clusters: usize) -> Network {
        let mut size = vec![0.0; n_clusters];
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_clusters];
        for (node, &c) in labels.iter().enumerate() {
            size[c as usize] += self.size[node];
            members[c as usize].push(node);
        }
        let mut offsets = Vec::with_capacity(n_clusters + 1);
        offsets.push(0);
        let mut neighbors = Vec::new();
        let mut weights = Vec::new();
        let mut acc = vec![0.0f64; n_clusters];
        let mut touched: Vec<u32> = Vec::new();
        for (c, nodes) in members.iter().enumerate() {
            for &node in nodes {
                for (j, w) in self.edges_of(node) {
                    let d = labels[j];
                    if d as usize == c {
                        continue;
                    }
                    if acc[d as usize] == 0.0 {
                        touched.push(d);
                    }
                    acc[d as usize] += w;
                }
            }
            touched.sort_unstable();
            for &d in &touched {
                neighbors.push(d);
                weights.push(acc[d as usize]);
                acc[d as usize] = 0.0;
            }
            touched.clear();
            offsets.push(neighbors.len());
        }
        Network {
            size,
            offsets,
            neighbors,
            weights,
        }
    }

    /// Quality of a clustering on this network, excluding the constant
    /// internal weight of aggregated nodes.
    pub fn quality(&self, labels: &[u32], resolution: f64) -> f64 {
        let n_clusters = labels.iter().map(|&c| c as usize + 1).max().unwrap_or(0);
        let mut cluster_size = vec![0.0; n_clusters];
        let mut self_pairs = vec![0.0; n_clusters];
        let mut internal = 0.0;
        for node in 0..self.len() {
            let c = labels[node] as usize;
            cluster_size[c] += self.size[node];
            self_pairs[c] += self.size[node];
            for (j, w) in self.edges_of(node) {
                if labels[j] as usize == c && j > node {
                    internal += w;
                }
            }
        }
        let penalty: f64 = cluster_size
            .iter()
            .zip(&self_pairs)
            .map(|(n, s)| n * n - s)
            .sum();
        internal - resolution * penalty
    }
}
