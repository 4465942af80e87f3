//! Sparse undirected measurement graph with a directed-edge index, plus the
//! line-oriented text formats for graphs and label vectors.

use crate::error::{Error, Result};
use std::collections::HashSet;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

/// One undirected edge carrying a scalar measurement. Always stored with
/// `i < j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub s: f64,
}

/// Immutable sparse undirected graph whose edges carry one measurement each.
///
/// Undirected edge `e` induces two directed edges with stable ids: `2e`
/// (from `edges[e].i` to `edges[e].j`) and `2e + 1` (the reverse). The
/// reverse of directed id `d` is always `d ^ 1`.
#[derive(Debug, Clone)]
pub struct MeasurementGraph {
    n: usize,
    edges: Vec<Edge>,
    /// Per node: `(neighbor id, undirected edge id)` in insertion order.
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl MeasurementGraph {
    /// Builds a graph from an edge list. Endpoint order within a pair is
    /// normalized to `i < j`.
    ///
    /// # Errors
    /// [`Error::InvalidArgument`] on self-loops, duplicate pairs, or
    /// out-of-range endpoints; non-finite measurements are rejected.
    pub fn new(n: usize, edge_list: Vec<(usize, usize, f64)>) -> Result<Self> {
        let mut edges = Vec::with_capacity(edge_list.len());
        let mut adjacency = vec![Vec::new(); n];
        let mut seen = HashSet::with_capacity(edge_list.len());
        for (a, b, s) in edge_list {
            if a == b {
                return Err(Error::InvalidArgument(format!("self-loop at node {a}")));
            }
            if a >= n || b >= n {
                return Err(Error::InvalidArgument(format!(
                    "edge ({a},{b}) outside 0..{n}"
                )));
            }
            if !s.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "non-finite measurement on edge ({a},{b})"
                )));
            }
            let (i, j) = if a < b { (a, b) } else { (b, a) };
            if !seen.insert((i, j)) {
                return Err(Error::InvalidArgument(format!("duplicate edge ({i},{j})")));
            }
            let e = edges.len();
            edges.push(Edge { i, j, s });
            adjacency[i].push((j, e));
            adjacency[j].push((i, e));
        }
        Ok(MeasurementGraph {
            n,
            edges,
            adjacency,
        })
    }

    /// Number of items (nodes), including isolated ones.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of undirected edges.
    pub fn m(&self) -> usize {
        self.edges.len()
    }

    /// All edges, indexed by undirected edge id.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Neighbors of `i` as `(neighbor id, undirected edge id)`.
    pub fn neighbors(&self, i: usize) -> &[(usize, usize)] {
        &self.adjacency[i]
    }

    /// Degree of node `i`.
    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    /// Undirected edge id underlying directed id `d`.
    #[inline]
    pub fn edge_of(&self, d: usize) -> usize {
        d >> 1
    }

    /// Reverse orientation of directed id `d`.
    #[inline]
    pub fn reverse(&self, d: usize) -> usize {
        d ^ 1
    }

    /// Source node of directed id `d`.
    #[inline]
    pub fn tail(&self, d: usize) -> usize {
        let e = &self.edges[d >> 1];
        if d & 1 == 0 {
            e.i
        } else {
            e.j
        }
    }

    /// Destination node of directed id `d`.
    #[inline]
    pub fn head(&self, d: usize) -> usize {
        let e = &self.edges[d >> 1];
        if d & 1 == 0 {
            e.j
        } else {
            e.i
        }
    }

    /// Directed id of the orientation of edge `e` that points **into** node
    /// `to` (one endpoint of `e`).
    #[inline]
    pub fn directed_into(&self, e: usize, to: usize) -> usize {
        if self.edges[e].j == to {
            2 * e
        } else {
            2 * e + 1
        }
    }
}

/// Writes the graph in the line-oriented text format: a header `n m k`
/// followed by one `i j s` line per edge (0-based ids). Measurements are
/// written in shortest round-trip decimal form, which preserves up to 17
/// significant digits exactly.
pub fn write_graph<W: Write>(w: &mut W, graph: &MeasurementGraph, k: usize) -> Result<()> {
    writeln!(w, "{} {} {}", graph.n(), graph.m(), k)?;
    for e in graph.edges() {
        writeln!(w, "{} {} {}", e.i, e.j, e.s)?;
    }
    Ok(())
}

/// Parses the text format produced by [`write_graph`]. Returns the graph and
/// the group count `k` recorded in the header.
pub fn read_graph<R: BufRead>(r: R) -> Result<(MeasurementGraph, usize)> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| parse_err(1, "missing header"))??;
    let head: Vec<&str> = header.split_whitespace().collect();
    if head.len() != 3 {
        return Err(parse_err(1, "header must be `n m k`"));
    }
    let n: usize = parse_field(head[0], 1, "n")?;
    let m: usize = parse_field(head[1], 1, "m")?;
    let k: usize = parse_field(head[2], 1, "k")?;
    let mut edge_list = Vec::with_capacity(m);
    for (idx, line) in lines.enumerate() {
        let line = line?;
        let lineno = idx + 2;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 3 {
            return Err(parse_err(lineno, "edge line must be `i j s`"));
        }
        let i: usize = parse_field(f[0], lineno, "i")?;
        let j: usize = parse_field(f[1], lineno, "j")?;
        let s: f64 = parse_field(f[2], lineno, "s")?;
        edge_list.push((i, j, s));
    }
    if edge_list.len() != m {
        return Err(parse_err(
            0,
            &format!("header promised {m} edges, found {}", edge_list.len()),
        ));
    }
    let graph = MeasurementGraph::new(n, edge_list)
        .map_err(|e| parse_err(0, &format!("inconsistent edge list: {e}")))?;
    Ok((graph, k))
}

/// Writes one 1-based integer label per line.
pub fn write_labels<W: Write>(w: &mut W, labels: &[u32]) -> Result<()> {
    for l in labels {
        writeln!(w, "{l}")?;
    }
    Ok(())
}

/// Parses a labels file: one positive integer per line.
pub fn read_labels<R: BufRead>(r: R) -> Result<Vec<u32>> {
    let mut labels = Vec::new();
    for (idx, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let l: u32 = parse_field(line.trim(), idx + 1, "label")?;
        if l == 0 {
            return Err(parse_err(idx + 1, "labels are 1-based"));
        }
        labels.push(l);
    }
    Ok(labels)
}

/// File-path convenience wrapper around [`write_graph`].
pub fn write_graph_file<P: AsRef<Path>>(path: P, graph: &MeasurementGraph, k: usize) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    write_graph(&mut w, graph, k)
}

/// File-path convenience wrapper around [`read_graph`].
pub fn read_graph_file<P: AsRef<Path>>(path: P) -> Result<(MeasurementGraph, usize)> {
    read_graph(BufReader::new(std::fs::File::open(path)?))
}

/// File-path convenience wrapper around [`write_labels`].
pub fn write_labels_file<P: AsRef<Path>>(path: P, labels: &[u32]) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    write_labels(&mut w, labels)
}

/// File-path convenience wrapper around [`read_labels`].
pub fn read_labels_file<P: AsRef<Path>>(path: P) -> Result<Vec<u32>> {
    read_labels(BufReader::new(std::fs::File::open(path)?))
}

fn parse_err(line: usize, msg: &str) -> Error {
    Error::Parse {
        line,
        msg: msg.to_string(),
    }
}

fn parse_field<T: std::str::FromStr>(text: &str, line: usize, what: &str) -> Result<T> {
    text.parse()
        .map_err(|_| parse_err(line, &format!("cannot parse {what} from `{text}`")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn directed_ids_follow_the_two_e_convention() {
        let g = MeasurementGraph::new(3, vec![(0, 1, 0.5), (2, 1, -0.25)]).unwrap();
        assert_eq!(g.m(), 2);
        // Second edge was normalized to (1, 2).
        assert_eq!(g.edges()[1].i, 1);
        assert_eq!(g.tail(2), 1);
        assert_eq!(g.head(2), 2);
        assert_eq!(g.tail(3), 2);
        assert_eq!(g.reverse(2), 3);
        assert_eq!(g.directed_into(1, 1), 3);
        assert_eq!(g.directed_into(1, 2), 2);
    }

    #[test]
    fn rejects_loops_and_duplicates() {
        assert!(MeasurementGraph::new(3, vec![(1, 1, 0.0)]).is_err());
        assert!(MeasurementGraph::new(3, vec![(0, 1, 0.0), (1, 0, 2.0)]).is_err());
        assert!(MeasurementGraph::new(2, vec![(0, 3, 0.0)]).is_err());
    }

    #[test]
    fn text_round_trip_is_exact() {
        let g = MeasurementGraph::new(
            4,
            vec![
                (0, 1, 0.123456789012345678),
                (1, 2, -1.0 / 3.0),
                (0, 3, 1e-300),
            ],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_graph(&mut buf, &g, 2).unwrap();
        let (g2, k) = read_graph(&buf[..]).unwrap();
        assert_eq!(k, 2);
        assert_eq!(g2.n(), g.n());
        for (a, b) in g.edges().iter().zip(g2.edges()) {
            assert_eq!(a.i, b.i);
            assert_eq!(a.j, b.j);
            assert_eq!(a.s.to_bits(), b.s.to_bits());
        }
    }
}
