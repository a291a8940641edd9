//! Sampled labelled objects and label-level operations.
//!
//! A [`Structure`] is the value produced by the samplers: an abstract
//! weighted atom, a set object, a partition composite carrying its label
//! blocks, a plane tree in depth-first outdegree encoding, or a labelled
//! graph. Composites store the blocks as an ordered partition of `[n]`
//! (labels are 1-based); inner shapes are canonical representatives and the
//! labelled object is recovered by the block label sets.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{precondition, unsupported, Result};

/// A sampled object.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Structure {
    /// An abstract atom-species object of the given size.
    Atom { size: usize },
    /// The derived-species placeholder; contributes zero to the size.
    Star,
    /// A set object; for the plain set species the children are atoms,
    /// derived set objects additionally hold one [`Structure::Star`].
    Set { children: Vec<Structure> },
    /// An outer structure whose slots carry the component structures; the
    /// blocks form an ordered partition of the label set.
    Composite {
        outer: Box<Structure>,
        components: Vec<Component>,
    },
    /// A plane tree as the outdegree list of its depth-first vertex order.
    Tree { outdegs: Vec<usize> },
    /// A labelled simple graph on vertices `0..n` (labels local).
    Graph { n: usize, edges: Vec<(usize, usize)> },
}

/// One component of a composite: its global label block plus inner shape.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Component {
    /// Sorted labels from the composite's ground set.
    pub labels: Vec<usize>,
    pub inner: Structure,
}

impl Structure {
    pub fn size(&self) -> usize {
        match self {
            Structure::Atom { size } => *size,
            Structure::Star => 0,
            Structure::Set { children } => children.iter().map(Structure::size).sum(),
            Structure::Composite { components, .. } => {
                components.iter().map(|c| c.labels.len()).sum()
            }
            Structure::Tree { outdegs } => outdegs.len(),
            Structure::Graph { n, .. } => *n,
        }
    }

    /// Number of components of a composite (or of a set object's children).
    pub fn component_count(&self) -> Option<usize> {
        match self {
            Structure::Composite { components, .. } => Some(components.len()),
            Structure::Set { children } => Some(
                children
                    .iter()
                    .filter(|c| !matches!(c, Structure::Star))
                    .count(),
            ),
            _ => None,
        }
    }

    /// Validity of a depth-first outdegree encoding: the degrees sum to
    /// `n - 1` and every proper prefix sum stays at or above its length.
    pub fn valid_outdeg_sequence(outdegs: &[usize]) -> bool {
        let n = outdegs.len();
        if n == 0 {
            return false;
        }
        let mut sum = 0usize;
        for (k, d) in outdegs.iter().enumerate() {
            sum += d;
            if k + 1 < n && sum < k + 1 {
                return false;
            }
        }
        sum == n - 1
    }
}

/// Apply a uniformly random permutation to the labelled parts of a
/// structure. Unlabelled parts (plane trees, abstract atoms) are returned
/// unchanged; graphs get their vertex set permuted and composites get their
/// label blocks pushed through the permutation.
pub fn relabel_uniform<R: Rng + ?Sized>(s: &Structure, rng: &mut R) -> Structure {
    match s {
        Structure::Graph { n, edges } => {
            let mut perm: Vec<usize> = (0..*n).collect();
            perm.shuffle(rng);
            let mut new_edges: Vec<(usize, usize)> = edges
                .iter()
                .map(|&(u, v)| {
                    let (a, b) = (perm[u], perm[v]);
                    (a.min(b), a.max(b))
                })
                .collect();
            new_edges.sort_unstable();
            Structure::Graph {
                n: *n,
                edges: new_edges,
            }
        }
        Structure::Composite { outer, components } => {
            let n = s.size();
            let mut perm: Vec<usize> = (1..=n).collect();
            perm.shuffle(rng);
            let components = components
                .iter()
                .map(|c| {
                    let mut labels: Vec<usize> = c.labels.iter().map(|&l| perm[l - 1]).collect();
                    labels.sort_unstable();
                    Component {
                        labels,
                        inner: c.inner.clone(),
                    }
                })
                .collect();
            Structure::Composite {
                outer: outer.clone(),
                components,
            }
        }
        other => other.clone(),
    }
}

/// Remove one uniformly chosen maximal component from a composite.
///
/// Returns the remainder (outer object derived: the removed slot becomes a
/// star placeholder; remaining labels mapped order-preservingly onto
/// `[n - removed]`) together with the removed component's size.
pub fn fragment<R: Rng + ?Sized>(s: &Structure, rng: &mut R) -> Result<(Structure, usize)> {
    let Structure::Composite { outer, components } = s else {
        return Err(precondition("fragment needs a composite structure"));
    };
    if components.is_empty() {
        return Err(precondition("fragment needs at least one component"));
    }
    let max_size = components.iter().map(|c| c.labels.len()).max().unwrap();
    let maximal: Vec<usize> = components
        .iter()
        .enumerate()
        .filter(|(_, c)| c.labels.len() == max_size)
        .map(|(i, _)| i)
        .collect();
    let chosen = maximal[rng.gen_range(0..maximal.len())];

    // Order-preserving relabelling of the remaining labels onto [n - max].
    let mut kept_labels: Vec<usize> = components
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != chosen)
        .flat_map(|(_, c)| c.labels.iter().copied())
        .collect();
    kept_labels.sort_unstable();
    let rank = |l: usize| kept_labels.binary_search(&l).unwrap() + 1;

    let rest_components: Vec<Component> = components
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != chosen)
        .map(|(_, c)| Component {
            labels: c.labels.iter().map(|&l| rank(l)).collect(),
            inner: c.inner.clone(),
        })
        .collect();

    let derived_outer = match &**outer {
        Structure::Set { children } => {
            let mut kids: Vec<Structure> = children.clone();
            match kids
                .iter()
                .position(|c| matches!(c, Structure::Atom { .. }))
            {
                Some(slot) => kids[slot] = Structure::Star,
                None => return Err(unsupported("set outer with no atom slot to star")),
            }
            Structure::Set { children: kids }
        }
        _ => {
            return Err(unsupported(
                "fragment supports set-family outer structures",
            ))
        }
    };

    Ok((
        Structure::Composite {
            outer: Box::new(derived_outer),
            components: rest_components,
        },
        max_size,
    ))
}

/// Canonical key of the isomorphism type of a structure.
///
/// Plane trees are canonicalized as rooted unordered trees, tree-graphs via
/// centroid rooting, and general graphs by brute force over vertex
/// permutations up to 8 vertices (general graph canonicalization is out of
/// scope; small instances are all the diagnostics need).
pub fn type_key(s: &Structure) -> Result<Vec<u8>> {
    match s {
        Structure::Atom { size } => {
            let mut k = vec![b'A'];
            k.extend_from_slice(&(*size as u64).to_be_bytes());
            Ok(k)
        }
        Structure::Star => Ok(vec![b'*']),
        Structure::Set { children } => {
            let mut keys: Vec<Vec<u8>> = children.iter().map(type_key).collect::<Result<_>>()?;
            keys.sort();
            let mut k = vec![b'S'];
            for ck in keys {
                k.extend_from_slice(&ck);
                k.push(b';');
            }
            Ok(k)
        }
        Structure::Composite { outer, components } => {
            let mut keys: Vec<Vec<u8>> = components
                .iter()
                .map(|c| type_key(&c.inner))
                .collect::<Result<_>>()?;
            keys.sort();
            let mut k = vec![b'C'];
            k.extend_from_slice(&type_key(outer)?);
            k.push(b'|');
            for ck in keys {
                k.extend_from_slice(&ck);
                k.push(b';');
            }
            Ok(k)
        }
        Structure::Tree { outdegs } => {
            if !Structure::valid_outdeg_sequence(outdegs) {
                return Err(precondition("invalid outdegree sequence"));
            }
            Ok(rooted_tree_key(outdegs))
        }
        Structure::Graph { n, edges } => graph_key(*n, edges),
    }
}

/// AHU canonical code of the rooted unordered tree behind a DFS outdegree
/// sequence.
fn rooted_tree_key(outdegs: &[usize]) -> Vec<u8> {
    fn code(outdegs: &[usize], pos: &mut usize) -> Vec<u8> {
        let d = outdegs[*pos];
        *pos += 1;
        let mut children: Vec<Vec<u8>> = (0..d).map(|_| code(outdegs, pos)).collect();
        children.sort();
        let mut out = vec![b'('];
        for c in children {
            out.extend_from_slice(&c);
        }
        out.push(b')');
        out
    }
    let mut pos = 0;
    let mut k = vec![b'T'];
    k.extend_from_slice(&code(outdegs, &mut pos));
    k
}

fn graph_key(n: usize, edges: &[(usize, usize)]) -> Result<Vec<u8>> {
    if n == 0 {
        return Ok(vec![b'G']);
    }
    // Trees get a centroid-rooted AHU code at any size.
    if edges.len() + 1 == n {
        if let Some(key) = tree_graph_key(n, edges) {
            return Ok(key);
        }
    }
    if n > 8 {
        return Err(unsupported(
            "canonical form for general graphs beyond 8 vertices",
        ));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best: Option<Vec<(usize, usize)>> = None;
    permute_all(&mut perm, 0, &mut |p| {
        let mut mapped: Vec<(usize, usize)> = edges
            .iter()
            .map(|&(u, v)| {
                let (a, b) = (p[u], p[v]);
                (a.min(b), a.max(b))
            })
            .collect();
        mapped.sort_unstable();
        if best.as_ref().map_or(true, |b| mapped < *b) {
            best = Some(mapped);
        }
    });
    let mut k = vec![b'G'];
    k.extend_from_slice(&(n as u64).to_be_bytes());
    for (u, v) in best.unwrap_or_default() {
        k.extend_from_slice(&(u as u32).to_be_bytes());
        k.extend_from_slice(&(v as u32).to_be_bytes());
    }
    Ok(k)
}

fn permute_all(perm: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
    if k == perm.len() {
        f(perm);
        return;
    }
    for i in k..perm.len() {
        perm.swap(k, i);
        permute_all(perm, k + 1, f);
        perm.swap(k, i);
    }
}

/// Canonical code of a free (unrooted) tree given as a graph: root at the
/// centroid, minimum code over the at most two centroids.
fn tree_graph_key(n: usize, edges: &[(usize, usize)]) -> Option<Vec<u8>> {
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(u, v) in edges {
        if u >= n || v >= n {
            return None;
        }
        adj[u].push(v);
        adj[v].push(u);
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0usize];
    seen[0] = true;
    let mut count = 1;
    while let Some(v) = stack.pop() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                count += 1;
                stack.push(w);
            }
        }
    }
    if count != n {
        return None;
    }
    let centroids = tree_centroids(&adj);
    let mut best: Option<Vec<u8>> = None;
    for root in centroids {
        let code = ahu_from_adj(&adj, root, usize::MAX);
        if best.as_ref().map_or(true, |b| code < *b) {
            best = Some(code);
        }
    }
    let mut k = vec![b'F'];
    k.extend_from_slice(&best?);
    Some(k)
}

fn tree_centroids(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    if n == 1 {
        return vec![0];
    }
    let mut degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut layer: Vec<usize> = (0..n).filter(|&v| degree[v] <= 1).collect();
    let mut removed = vec![false; n];
    let mut remaining = n;
    while remaining > 2 {
        let mut next = Vec::new();
        for &v in &layer {
            removed[v] = true;
            remaining -= 1;
            for &w in &adj[v] {
                if !removed[w] {
                    degree[w] -= 1;
                    if degree[w] == 1 {
                        next.push(w);
                    }
                }
            }
        }
        layer = next;
    }
    (0..n).filter(|&v| !removed[v]).collect()
}

fn ahu_from_adj(adj: &[Vec<usize>], v: usize, parent: usize) -> Vec<u8> {
    let mut children: Vec<Vec<u8>> = adj[v]
        .iter()
        .filter(|&&w| w != parent)
        .map(|&w| ahu_from_adj(adj, w, v))
        .collect();
    children.sort();
    let mut out = vec![b'('];
    for c in children {
        out.extend_from_slice(&c);
    }
    out.push(b')');
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn rng(seed: u64) -> ChaCha12Rng {
        ChaCha12Rng::seed_from_u64(seed)
    }

    #[test]
    fn sizes() {
        assert_eq!(Structure::Atom { size: 3 }.size(), 3);
        assert_eq!(Structure::Star.size(), 0);
        let t = Structure::Tree {
            outdegs: vec![2, 0, 0],
        };
        assert_eq!(t.size(), 3);
    }

    #[test]
    fn outdeg_validity() {
        assert!(Structure::valid_outdeg_sequence(&[2, 0, 0]));
        assert!(Structure::valid_outdeg_sequence(&[1, 1, 0]));
        assert!(Structure::valid_outdeg_sequence(&[0]));
        assert!(!Structure::valid_outdeg_sequence(&[0, 1]));
        assert!(!Structure::valid_outdeg_sequence(&[2, 0]));
        assert!(!Structure::valid_outdeg_sequence(&[]));
    }

    #[test]
    fn relabel_single_vertex_graph_fixed() {
        let g = Structure::Graph { n: 1, edges: vec![] };
        let mut r = rng(1);
        assert_eq!(relabel_uniform(&g, &mut r), g);
    }

    #[test]
    fn relabel_empty_structure_fixed() {
        let s = Structure::Set { children: vec![] };
        let mut r = rng(2);
        assert_eq!(relabel_uniform(&s, &mut r), s);
    }

    #[test]
    fn relabel_path_uniform_over_relabellings() {
        // path 0-1-2: the middle vertex is equally likely to be any label
        let g = Structure::Graph {
            n: 3,
            edges: vec![(0, 1), (1, 2)],
        };
        let mut counts = [0usize; 3];
        let mut r = rng(42);
        let m = 6000;
        for _ in 0..m {
            let h = relabel_uniform(&g, &mut r);
            let Structure::Graph { edges, .. } = &h else { panic!() };
            let mid = if edges[0].0 == edges[1].0 || edges[0].0 == edges[1].1 {
                edges[0].0
            } else {
                edges[0].1
            };
            counts[mid] += 1;
        }
        // chi-square over 3 cells, df = 2, crit(0.999) = 13.8
        let expect = m as f64 / 3.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expect).powi(2) / expect)
            .sum();
        assert!(chi2 < 13.8, "chi2 = {chi2}, counts = {counts:?}");
    }

    #[test]
    fn relabel_preserves_type() {
        let g = Structure::Graph {
            n: 4,
            edges: vec![(0, 1), (1, 2), (2, 3)],
        };
        let key = type_key(&g).unwrap();
        let mut r = rng(7);
        for _ in 0..50 {
            let h = relabel_uniform(&g, &mut r);
            assert_eq!(type_key(&h).unwrap(), key);
        }
    }

    fn two_atom_composite(sizes: (usize, usize)) -> Structure {
        let total = sizes.0 + sizes.1;
        let first: Vec<usize> = (1..=sizes.0).collect();
        let second: Vec<usize> = (sizes.0 + 1..=total).collect();
        Structure::Composite {
            outer: Box::new(Structure::Set {
                children: vec![Structure::Atom { size: 1 }, Structure::Atom { size: 1 }],
            }),
            components: vec![
                Component {
                    labels: first,
                    inner: Structure::Atom { size: sizes.0 },
                },
                Component {
                    labels: second,
                    inner: Structure::Atom { size: sizes.1 },
                },
            ],
        }
    }

    #[test]
    fn fragment_unique_maximum() {
        // components of sizes (3, 1): rest always has size 1
        let comp = two_atom_composite((3, 1));
        let mut r = rng(3);
        let (rest, removed) = fragment(&comp, &mut r).unwrap();
        assert_eq!(removed, 3);
        assert_eq!(rest.size(), 1);
        let Structure::Composite { components, outer } = &rest else { panic!() };
        assert_eq!(components[0].labels, vec![1]); // order-preserving: 4 -> 1
        let Structure::Set { children } = &**outer else { panic!() };
        assert_eq!(
            children
                .iter()
                .filter(|c| matches!(c, Structure::Star))
                .count(),
            1
        );
    }

    #[test]
    fn fragment_single_component() {
        let comp = Structure::Composite {
            outer: Box::new(Structure::Set {
                children: vec![Structure::Atom { size: 1 }],
            }),
            components: vec![Component {
                labels: vec![1, 2],
                inner: Structure::Atom { size: 2 },
            }],
        };
        let mut r = rng(5);
        let (rest, removed) = fragment(&comp, &mut r).unwrap();
        assert_eq!(removed, 2);
        assert_eq!(rest.size(), 0);
    }

    #[test]
    fn fragment_tie_rule_uniform() {
        // equal sizes (3, 3) with distinguishable inner shapes: each
        // component must be removed with equal frequency over the seeds
        let comp = Structure::Composite {
            outer: Box::new(Structure::Set {
                children: vec![Structure::Atom { size: 1 }, Structure::Atom { size: 1 }],
            }),
            components: vec![
                Component {
                    labels: vec![1, 2, 3],
                    inner: Structure::Tree {
                        outdegs: vec![2, 0, 0],
                    },
                },
                Component {
                    labels: vec![4, 5, 6],
                    inner: Structure::Tree {
                        outdegs: vec![1, 1, 0],
                    },
                },
            ],
        };
        let total = 400usize;
        let mut star_survived = 0usize;
        for seed in 0..total as u64 {
            let mut r = rng(seed);
            let (rest, removed) = fragment(&comp, &mut r).unwrap();
            assert_eq!(removed, 3);
            assert_eq!(rest.size(), 3);
            let Structure::Composite { components, .. } = &rest else { panic!() };
            assert_eq!(components.len(), 1);
            assert_eq!(components[0].labels, vec![1, 2, 3]); // order-preserving
            if components[0].inner
                == (Structure::Tree {
                    outdegs: vec![2, 0, 0],
                })
            {
                star_survived += 1;
            }
        }
        assert!(
            (140..=260).contains(&star_survived),
            "tie rule unbalanced: {star_survived}/{total}"
        );
    }

    #[test]
    fn fragment_rejects_empty() {
        let comp = Structure::Composite {
            outer: Box::new(Structure::Set { children: vec![] }),
            components: vec![],
        };
        assert!(fragment(&comp, &mut rng(0)).is_err());
    }

    #[test]
    fn tree_keys_distinguish_shapes() {
        let star = Structure::Tree {
            outdegs: vec![2, 0, 0],
        };
        let path = Structure::Tree {
            outdegs: vec![1, 1, 0],
        };
        assert_ne!(type_key(&star).unwrap(), type_key(&path).unwrap());
        // plane order must not matter
        let a = Structure::Tree {
            outdegs: vec![2, 1, 0, 0],
        };
        let b = Structure::Tree {
            outdegs: vec![2, 0, 1, 0],
        };
        assert_eq!(type_key(&a).unwrap(), type_key(&b).unwrap());
    }

    #[test]
    fn free_tree_keys_by_centroid() {
        let p1 = Structure::Graph {
            n: 3,
            edges: vec![(0, 1), (1, 2)],
        };
        let p2 = Structure::Graph {
            n: 3,
            edges: vec![(0, 2), (1, 2)],
        };
        assert_eq!(type_key(&p1).unwrap(), type_key(&p2).unwrap());
        let path4 = Structure::Graph {
            n: 4,
            edges: vec![(0, 1), (1, 2), (2, 3)],
        };
        let star4 = Structure::Graph {
            n: 4,
            edges: vec![(0, 1), (0, 2), (0, 3)],
        };
        assert_ne!(type_key(&path4).unwrap(), type_key(&star4).unwrap());
    }

    #[test]
    fn graph_keys_brute_force() {
        let g1 = Structure::Graph {
            n: 4,
            edges: vec![(0, 1), (1, 2), (0, 2), (2, 3)],
        };
        let g2 = Structure::Graph {
            n: 4,
            edges: vec![(3, 1), (1, 0), (3, 0), (0, 2)],
        };
        assert_eq!(type_key(&g1).unwrap(), type_key(&g2).unwrap());
        let square = Structure::Graph {
            n: 4,
            edges: vec![(0, 1), (1, 2), (2, 3), (0, 3)],
        };
        assert_ne!(type_key(&g1).unwrap(), type_key(&square).unwrap());
    }
}
