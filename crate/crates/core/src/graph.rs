//! Areal adjacency structure and the intrinsic CAR prior kernel.
//!
//! Weights are binary: `w_ij = 1` when regions `i` and `j` share a border.
//! The graph is validated once at construction (symmetric, no self-loops,
//! no islands) and is immutable afterwards, so it can be shared freely
//! between concurrently running chains.

use std::collections::{BTreeSet, HashMap};
use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct AdjacencyGraph {
    region_ids: Vec<String>,
    index: HashMap<String, usize>,
    neighbors: Vec<Vec<usize>>,
}

impl AdjacencyGraph {
    /// Builds a graph from region labels and undirected edges given by index.
    ///
    /// Repeated edges and reversed duplicates collapse to a single edge.
    pub fn from_edges(region_ids: Vec<String>, edges: &[(usize, usize)]) -> Result<Self> {
        let index = index_regions(&region_ids)?;
        let n = region_ids.len();
        let mut sets = vec![BTreeSet::new(); n];
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::Shape(format!(
                    "edge ({a}, {b}) out of range for {n} regions"
                )));
            }
            if a == b {
                return Err(Error::SelfLoop(region_ids[a].clone()));
            }
            sets[a].insert(b);
            sets[b].insert(a);
        }
        let neighbors = sets.into_iter().map(|s| s.into_iter().collect()).collect();
        Self::validated(region_ids, index, neighbors)
    }

    /// Builds a graph from a dense 0/1 matrix, rejecting asymmetric input.
    pub fn from_matrix(region_ids: Vec<String>, matrix: &[Vec<u8>]) -> Result<Self> {
        let index = index_regions(&region_ids)?;
        let n = region_ids.len();
        if matrix.len() != n || matrix.iter().any(|row| row.len() != n) {
            return Err(Error::Shape(format!("adjacency matrix must be {n}x{n}")));
        }
        let mut neighbors = vec![Vec::new(); n];
        for i in 0..n {
            for j in 0..n {
                let w = matrix[i][j];
                if w > 1 {
                    return Err(Error::Domain(format!(
                        "weight {w} between {} and {} is not binary",
                        region_ids[i], region_ids[j]
                    )));
                }
                if w != matrix[j][i] {
                    return Err(Error::Asymmetric(
                        region_ids[i].clone(),
                        region_ids[j].clone(),
                    ));
                }
                if w == 1 {
                    if i == j {
                        return Err(Error::SelfLoop(region_ids[i].clone()));
                    }
                    neighbors[i].push(j);
                }
            }
        }
        Self::validated(region_ids, index, neighbors)
    }

    /// Rook-adjacency lattice with ids `R00C00` .. in row-major order.
    pub fn lattice(rows: usize, cols: usize) -> Result<Self> {
        if rows * cols < 2 {
            return Err(Error::Domain("lattice needs at least two cells".into()));
        }
        let ids = (0..rows)
            .flat_map(|r| (0..cols).map(move |c| lattice_id(r, c)))
            .collect();
        let mut edges = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                let k = r * cols + c;
                if c + 1 < cols {
                    edges.push((k, k + 1));
                }
                if r + 1 < rows {
                    edges.push((k, k + cols));
                }
            }
        }
        Self::from_edges(ids, &edges)
    }

    fn validated(
        region_ids: Vec<String>,
        index: HashMap<String, usize>,
        neighbors: Vec<Vec<usize>>,
    ) -> Result<Self> {
        if region_ids.is_empty() {
            return Err(Error::Domain("graph has no regions".into()));
        }
        if let Some(i) = neighbors.iter().position(Vec::is_empty) {
            return Err(Error::Island(region_ids[i].clone()));
        }
        let graph = Self {
            region_ids,
            index,
            neighbors,
        };
        let components = graph.n_components();
        if components > 1 {
            log::warn!(
                "adjacency graph has {components} connected components; \
                 a single global sum-to-zero constraint is applied"
            );
        }
        Ok(graph)
    }

    pub fn n_regions(&self) -> usize {
        self.region_ids.len()
    }

    pub fn region_ids(&self) -> &[String] {
        &self.region_ids
    }

    pub fn region_index(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    /// `w_{i+}`, the number of neighbours of region `i`.
    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.neighbors.iter().map(Vec::len).collect()
    }

    pub fn n_edges(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Undirected edges with `i < j`, in ascending order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.neighbors
            .iter()
            .enumerate()
            .flat_map(|(i, nb)| nb.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
    }

    pub fn n_components(&self) -> usize {
        let n = self.n_regions();
        let mut seen = vec![false; n];
        let mut count = 0;
        let mut stack = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            count += 1;
            seen[start] = true;
            stack.push(start);
            while let Some(v) = stack.pop() {
                for &u in &self.neighbors[v] {
                    if !seen[u] {
                        seen[u] = true;
                        stack.push(u);
                    }
                }
            }
        }
        count
    }

    /// Mean of `phi` over the neighbours of region `i`.
    pub fn neighbor_mean(&self, phi: &[f64], i: usize) -> f64 {
        let nb = &self.neighbors[i];
        nb.iter().map(|&j| phi[j]).sum::<f64>() / nb.len() as f64
    }

    /// `S(phi) = sum_i sum_{j<i} w_ij (phi_i - phi_j)^2`.
    pub fn car_pairwise_sum(&self, phi: &[f64]) -> f64 {
        debug_assert_eq!(phi.len(), self.n_regions());
        self.edges()
            .map(|(i, j)| {
                let d = phi[i] - phi[j];
                d * d
            })
            .sum()
    }

    /// Log of the unnormalized CAR density: `(I/2) log tau - (tau/2) S(phi)`.
    pub fn car_log_kernel(&self, phi: &[f64], tau: f64) -> Result<f64> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::Domain(format!("CAR precision must be positive, got {tau}")));
        }
        if phi.len() != self.n_regions() {
            return Err(Error::Shape(format!(
                "phi has length {}, graph has {} regions",
                phi.len(),
                self.n_regions()
            )));
        }
        let half_n = self.n_regions() as f64 / 2.0;
        Ok(half_n * tau.ln() - 0.5 * tau * self.car_pairwise_sum(phi))
    }

    /// Writes the graph as a `from,to` edge list.
    pub fn write_edge_list<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["from", "to"])?;
        // declaration rows fix the region order on read-back
        for id in &self.region_ids {
            w.write_record([id.as_str(), ""])?;
        }
        for (i, j) in self.edges() {
            w.write_record([&self.region_ids[i], &self.region_ids[j]])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn lattice_id(row: usize, col: usize) -> String {
    format!("R{row:02}C{col:02}")
}

fn index_regions(ids: &[String]) -> Result<HashMap<String, usize>> {
    let mut index = HashMap::with_capacity(ids.len());
    for (i, id) in ids.iter().enumerate() {
        if index.insert(id.clone(), i).is_some() {
            return Err(Error::DuplicateRegion(id.clone()));
        }
    }
    Ok(index)
}

/// Loads an adjacency file.
///
/// Two layouts are accepted: an edge list with header `from,to`, or a square
/// matrix whose header row and first column carry the region ids. In the edge
/// list a row with an empty `to` declares a region without adding an edge.
pub fn load_adjacency<P: AsRef<Path>>(path: P) -> Result<AdjacencyGraph> {
    let file = std::fs::File::open(path.as_ref())?;
    read_adjacency(file)
}

pub fn read_adjacency<R: Read>(input: R) -> Result<AdjacencyGraph> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(input);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    if header.len() == 2 && header[0] == "from" && header[1] == "to" {
        read_edge_list(reader)
    } else {
        read_matrix(header, reader)
    }
}

fn read_edge_list<R: Read>(mut reader: csv::Reader<R>) -> Result<AdjacencyGraph> {
    let mut ids: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut edges = Vec::new();
    let mut intern = |id: &str, ids: &mut Vec<String>| -> usize {
        *index.entry(id.to_owned()).or_insert_with(|| {
            ids.push(id.to_owned());
            ids.len() - 1
        })
    };
    for record in reader.records() {
        let record = record?;
        let from = record.get(0).unwrap_or_default();
        let to = record.get(1).unwrap_or_default();
        if from.is_empty() {
            return Err(Error::Parse("edge list row with empty `from`".into()));
        }
        let a = intern(from, &mut ids);
        if !to.is_empty() {
            let b = intern(to, &mut ids);
            edges.push((a, b));
        }
    }
    AdjacencyGraph::from_edges(ids, &edges)
}

fn read_matrix<R: Read>(header: Vec<String>, mut reader: csv::Reader<R>) -> Result<AdjacencyGraph> {
    if header.len() < 2 {
        return Err(Error::Parse(
            "adjacency header must be `from,to` or a matrix header row".into(),
        ));
    }
    let ids: Vec<String> = header[1..].to_vec();
    let n = ids.len();
    let mut rows: Vec<Option<Vec<u8>>> = vec![None; n];
    let col_index = index_regions(&ids)?;
    for record in reader.records() {
        let record = record?;
        let id = record.get(0).unwrap_or_default();
        let i = *col_index
            .get(id)
            .ok_or_else(|| Error::UnknownRegion(id.to_owned()))?;
        if rows[i].is_some() {
            return Err(Error::DuplicateRegion(id.to_owned()));
        }
        let row = record
            .iter()
            .skip(1)
            .map(|v| {
                v.parse::<u8>()
                    .map_err(|_| Error::Parse(format!("non-binary weight `{v}` in row {id}")))
            })
            .collect::<Result<Vec<u8>>>()?;
        rows[i] = Some(row);
    }
    let matrix = rows
        .into_iter()
        .enumerate()
        .map(|(i, r)| r.ok_or_else(|| Error::Parse(format!("missing matrix row for {}", ids[i]))))
        .collect::<Result<Vec<_>>>()?;
    AdjacencyGraph::from_matrix(ids, &matrix)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn ids(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    fn path3() -> AdjacencyGraph {
        AdjacencyGraph::from_edges(ids(&["A", "B", "C"]), &[(0, 1), (1, 2)]).unwrap()
    }

    fn cycle(n: usize) -> AdjacencyGraph {
        let names: Vec<String> = (0..n).map(|i| format!("v{i}")).collect();
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        AdjacencyGraph::from_edges(names, &edges).unwrap()
    }

    #[test]
    fn edge_list_degrees() {
        let g = read_adjacency("from,to\nA,B\nB,C\n".as_bytes()).unwrap();
        assert_eq!(g.n_regions(), 3);
        assert_eq!(g.degrees(), vec![1, 2, 1]);
    }

    #[test]
    fn reversed_duplicate_edges_collapse() {
        let g = read_adjacency("from,to\nA,B\nB,A\nA,B\n".as_bytes()).unwrap();
        let h = read_adjacency("from,to\nA,B\n".as_bytes()).unwrap();
        assert_eq!(g, h);
        assert_eq!(g.n_edges(), 1);
    }

    #[test]
    fn isolated_region_is_named() {
        let err = read_adjacency("from,to\nA,B\nB,C\nD,\n".as_bytes()).unwrap_err();
        match err {
            Error::Island(id) => assert_eq!(id, "D"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn self_loop_rejected() {
        let err = read_adjacency("from,to\nA,B\nB,B\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::SelfLoop(id) if id == "B"));
    }

    #[test]
    fn matrix_layout_and_asymmetry() {
        let ok = read_adjacency("region,A,B,C\nA,0,1,0\nB,1,0,1\nC,0,1,0\n".as_bytes()).unwrap();
        assert_eq!(ok, path3());
        let bad = read_adjacency("region,A,B,C\nA,0,1,0\nB,0,0,1\nC,0,1,0\n".as_bytes());
        assert!(matches!(bad, Err(Error::Asymmetric(..))));
        let dup = read_adjacency("region,A,A\nA,0,1\nA,1,0\n".as_bytes());
        assert!(matches!(dup, Err(Error::DuplicateRegion(_))));
    }

    #[test]
    fn disconnected_graph_is_accepted() {
        let g = AdjacencyGraph::from_edges(ids(&["A", "B", "C", "D"]), &[(0, 1), (2, 3)]).unwrap();
        assert_eq!(g.n_components(), 2);
    }

    #[test]
    fn neighbor_mean_examples() {
        assert_abs_diff_eq!(path3().neighbor_mean(&[1.0, 0.0, 3.0], 1), 2.0);
        assert_abs_diff_eq!(cycle(4).neighbor_mean(&[1.0, 2.0, 3.0, 4.0], 0), 3.0);
        let g = AdjacencyGraph::lattice(3, 4).unwrap();
        let c = vec![-0.7; 12];
        for i in 0..12 {
            assert_abs_diff_eq!(g.neighbor_mean(&c, i), -0.7);
        }
    }

    #[test]
    fn pairwise_sum_examples() {
        let edge = AdjacencyGraph::from_edges(ids(&["A", "B"]), &[(0, 1)]).unwrap();
        assert_eq!(edge.car_pairwise_sum(&[1.0, -1.0]), 4.0);
        assert_eq!(cycle(3).car_pairwise_sum(&[0.0, 1.0, 2.0]), 6.0);
        assert_eq!(cycle(5).car_pairwise_sum(&[2.5; 5]), 0.0);
    }

    #[test]
    fn log_kernel_examples() {
        let edge = AdjacencyGraph::from_edges(ids(&["A", "B"]), &[(0, 1)]).unwrap();
        assert_abs_diff_eq!(
            edge.car_log_kernel(&[1.0, -1.0], 2.0).unwrap(),
            2f64.ln() - 4.0,
            epsilon = 1e-14
        );
        let g = cycle(6);
        assert_abs_diff_eq!(
            g.car_log_kernel(&[0.3; 6], 0.5).unwrap(),
            3.0 * 0.5f64.ln(),
            epsilon = 1e-14
        );
        assert!(matches!(g.car_log_kernel(&[0.0; 6], 0.0), Err(Error::Domain(_))));
        assert!(matches!(g.car_log_kernel(&[0.0; 6], -1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn lattice_shape() {
        let g = AdjacencyGraph::lattice(10, 10).unwrap();
        assert_eq!(g.n_regions(), 100);
        assert_eq!(g.n_edges(), 180);
        assert_eq!(g.degree(0), 2);
        assert_eq!(g.degree(11), 4);
        assert_eq!(g.region_ids()[11], "R01C01");
    }

    #[test]
    fn edge_list_round_trip() {
        let g = AdjacencyGraph::lattice(3, 3).unwrap();
        let mut buf = Vec::new();
        g.write_edge_list(&mut buf).unwrap();
        assert_eq!(read_adjacency(buf.as_slice()).unwrap(), g);
    }

    fn arb_graph_and_phi() -> impl Strategy<Value = (AdjacencyGraph, Vec<f64>)> {
        (3usize..9)
            .prop_flat_map(|n| {
                let extra = proptest::collection::vec((0..n, 0..n), 0..2 * n);
                let phi = proptest::collection::vec(-5.0f64..5.0, n);
                (Just(n), extra, phi)
            })
            .prop_map(|(n, extra, phi)| {
                // a spanning path guarantees no islands
                let mut edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1)).collect();
                edges.extend(extra.into_iter().filter(|(a, b)| a != b));
                let names = (0..n).map(|i| format!("r{i}")).collect();
                (AdjacencyGraph::from_edges(names, &edges).unwrap(), phi)
            })
    }

    proptest! {
        #[test]
        fn pairwise_sum_matches_full_double_loop((g, phi) in arb_graph_and_phi()) {
            let n = g.n_regions();
            let mut w = vec![vec![0.0; n]; n];
            for (i, j) in g.edges() {
                w[i][j] = 1.0;
                w[j][i] = 1.0;
            }
            let mut ordered = 0.0;
            for i in 0..n {
                for j in 0..n {
                    ordered += w[i][j] * (phi[i] - phi[j]).powi(2);
                }
            }
            let s = g.car_pairwise_sum(&phi);
            prop_assert!((s - ordered / 2.0).abs() <= 1e-10 * (1.0 + s));
            let tau = 1.7;
            let kernel = g.car_log_kernel(&phi, tau).unwrap();
            let direct = n as f64 / 2.0 * tau.ln() - tau / 2.0 * ordered / 2.0;
            prop_assert!((kernel - direct).abs() <= 1e-9 * (1.0 + direct.abs()));
        }

        #[test]
        fn pairwise_sum_translation_invariant((g, phi) in arb_graph_and_phi(), c in -10.0f64..10.0) {
            let shifted: Vec<f64> = phi.iter().map(|p| p + c).collect();
            let a = g.car_pairwise_sum(&phi);
            let b = g.car_pairwise_sum(&shifted);
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a));
            prop_assert!(a >= 0.0);
        }

        #[test]
        fn degree_identity((g, _phi) in arb_graph_and_phi()) {
            prop_assert_eq!(g.degrees().iter().sum::<usize>(), 2 * g.n_edges());
        }

        #[test]
        fn pairwise_sum_permutation_invariant((g, phi) in arb_graph_and_phi(), seed in any::<u64>()) {
            let n = g.n_regions();
            // deterministic shuffle from the seed
            let mut perm: Vec<usize> = (0..n).collect();
            let mut s = seed | 1;
            for k in (1..n).rev() {
                s ^= s << 13; s ^= s >> 7; s ^= s << 17;
                perm.swap(k, (s % (k as u64 + 1)) as usize);
            }
            let names = (0..n).map(|i| format!("p{i}")).collect();
            let edges: Vec<_> = g.edges().map(|(i, j)| (perm[i], perm[j])).collect();
            let h = AdjacencyGraph::from_edges(names, &edges).unwrap();
            let mut permuted = vec![0.0; n];
            for i in 0..n {
                permuted[perm[i]] = phi[i];
            }
            let a = g.car_pairwise_sum(&phi);
            let b = h.car_pairwise_sum(&permuted);
            prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a));
        }
    }
}
