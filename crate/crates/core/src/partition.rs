//! Edge-separator partitioning and the interior/interface reordering.
//!
//! After partitioning, every vertex with a neighbour in another subdomain is
//! an interface unknown; all others are interior. The global ordering lists
//! interior unknowns of subdomains `1..p` first, then interface unknowns of
//! subdomains `1..p`:
//!
//! ```text
//!     | B_1             E_1                 |
//!     |     ...              ...            |
//!     |         B_p                  E_p    |
//!     | E_1^T           C_1   E_12 ...      |
//!     |     ...         ...   ...           |
//!     |         E_p^T   E_p1  ...     C_p   |
//! ```

use std::collections::VecDeque;
use std::ops::Range;

use crate::error::{check_len, Error, Result};
use crate::sparse::{Csr, SparseSym};

/// Assignment of vertices to subdomains.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    p: usize,
    assign: Vec<usize>,
    seed: u64,
}

impl Partition {
    /// Builds a partition from an explicit assignment.
    pub fn from_assignment(p: usize, assign: Vec<usize>) -> Result<Self> {
        let mut sizes = vec![0usize; p];
        for &a in &assign {
            if a >= p {
                return Err(Error::InvalidArgument(format!(
                    "subdomain id {a} out of range for p = {p}"
                )));
            }
            sizes[a] += 1;
        }
        if let Some(empty) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::InvalidArgument(format!("subdomain {empty} is empty")));
        }
        Ok(Self {
            p,
            assign,
            seed: 0,
        })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn assign(&self) -> &[usize] {
        &self.assign
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.p];
        for &a in &self.assign {
            s[a] += 1;
        }
        s
    }

    /// Vertices of each subdomain, ascending.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut m = vec![Vec::new(); self.p];
        for (v, &a) in self.assign.iter().enumerate() {
            m[a].push(v);
        }
        m
    }
}

/// Partitions the adjacency graph of `a` into `p` parts by recursive BFS
/// bisection from pseudo-peripheral vertices.
///
/// Parts are labelled in order of their smallest vertex. `seed` selects the
/// BFS root among the two ends of each pseudo-peripheral pair.
pub fn partition_graph(a: &SparseSym, p: usize, seed: u64) -> Result<Partition> {
    let n = a.n();
    if p == 0 {
        return Err(Error::InvalidArgument("p must be at least 1".into()));
    }
    if p > n {
        return Err(Error::InvalidArgument(format!(
            "cannot split {n} vertices into {p} parts"
        )));
    }
    let mut assign = vec![0usize; n];
    let mut ws = Workspace::new(n);
    bisect(a, (0..n).collect(), p, 0, seed, &mut assign, &mut ws);

    // Canonical labels: part containing the smallest vertex comes first.
    let mut relabel = vec![usize::MAX; p];
    let mut next = 0;
    for &part in &assign {
        if relabel[part] == usize::MAX {
            relabel[part] = next;
            next += 1;
        }
    }
    for part in assign.iter_mut() {
        *part = relabel[*part];
    }
    Ok(Partition { p, assign, seed })
}

struct Workspace {
    in_set: Vec<bool>,
    level: Vec<usize>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        Self {
            in_set: vec![false; n],
            level: vec![usize::MAX; n],
        }
    }
}

fn bisect(
    a: &SparseSym,
    vertices: Vec<usize>,
    parts: usize,
    first_label: usize,
    seed: u64,
    assign: &mut [usize],
    ws: &mut Workspace,
) {
    if parts == 1 {
        for v in vertices {
            assign[v] = first_label;
        }
        return;
    }
    let left_parts = parts / 2;
    let len = vertices.len();
    let target = (len * left_parts / parts).clamp(left_parts, len - (parts - left_parts));

    let order = bfs_order(a, &vertices, seed, ws);
    let mut left: Vec<usize> = order[..target].to_vec();
    let mut right: Vec<usize> = order[target..].to_vec();
    left.sort_unstable();
    right.sort_unstable();
    bisect(a, left, left_parts, first_label, seed, assign, ws);
    bisect(a, right, parts - left_parts, first_label + left_parts, seed, assign, ws);
}

/// BFS visiting order of the subgraph induced by `vertices` (ascending),
/// component by component, each rooted at a pseudo-peripheral vertex.
fn bfs_order(a: &SparseSym, vertices: &[usize], seed: u64, ws: &mut Workspace) -> Vec<usize> {
    for &v in vertices {
        ws.in_set[v] = true;
        ws.level[v] = usize::MAX;
    }
    let mut visited_total = Vec::with_capacity(vertices.len());
    let mut done = vec![false; 0];
    done.resize(vertices.len(), false);
    let mut cursor = 0;
    let index_of = |v: usize| vertices.binary_search(&v).unwrap();
    while visited_total.len() < vertices.len() {
        while done[cursor] {
            cursor += 1;
        }
        let start = vertices[cursor];
        let root = pseudo_peripheral(a, start, seed, ws);
        let comp = bfs(a, root, ws);
        for &v in &comp {
            done[index_of(v)] = true;
        }
        visited_total.extend(comp);
    }
    for &v in vertices {
        ws.in_set[v] = false;
        ws.level[v] = usize::MAX;
    }
    visited_total
}

/// Plain BFS inside the active set; neighbours in ascending index order.
/// Leaves `ws.level` set for the visited component.
fn bfs(a: &SparseSym, root: usize, ws: &mut Workspace) -> Vec<usize> {
    let mut order = vec![root];
    let mut seen = vec![root];
    ws.level[root] = 0;
    let mut queue = VecDeque::from([root]);
    while let Some(u) = queue.pop_front() {
        let lu = ws.level[u];
        for w in a.neighbors(u) {
            if ws.in_set[w] && ws.level[w] == usize::MAX {
                ws.level[w] = lu + 1;
                order.push(w);
                seen.push(w);
                queue.push_back(w);
            }
        }
    }
    for v in seen {
        ws.level[v] = usize::MAX;
    }
    order
}

fn levels_of(a: &SparseSym, root: usize, ws: &mut Workspace) -> (usize, Vec<usize>) {
    let mut depth = vec![(root, 0usize)];
    ws.level[root] = 0;
    let mut queue = VecDeque::from([root]);
    let mut ecc = 0;
    while let Some(u) = queue.pop_front() {
        let lu = ws.level[u];
        ecc = ecc.max(lu);
        for w in a.neighbors(u) {
            if ws.in_set[w] && ws.level[w] == usize::MAX {
                ws.level[w] = lu + 1;
                depth.push((w, lu + 1));
                queue.push_back(w);
            }
        }
    }
    let last: Vec<usize> = depth.iter().filter(|d| d.1 == ecc).map(|d| d.0).collect();
    for (v, _) in depth {
        ws.level[v] = usize::MAX;
    }
    (ecc, last)
}

/// George-Liu pseudo-peripheral search. Returns one end of the final pair
/// chosen by `seed`.
fn pseudo_peripheral(a: &SparseSym, start: usize, seed: u64, ws: &mut Workspace) -> usize {
    let active_degree =
        |v: usize, ws: &Workspace| a.neighbors(v).filter(|&w| ws.in_set[w]).count();
    let mut root = start;
    let (mut ecc, mut last) = levels_of(a, root, ws);
    loop {
        let far = *last
            .iter()
            .min_by_key(|&&v| (active_degree(v, ws), v))
            .expect("nonempty last level");
        let (e2, l2) = levels_of(a, far, ws);
        if e2 > ecc {
            root = far;
            ecc = e2;
            last = l2;
        } else {
            return if seed % 2 == 0 { far } else { root };
        }
    }
}

/// One subdomain of a [`DistributedMatrix`].
#[derive(Debug, Clone)]
pub struct Subdomain {
    /// Original indices of interior unknowns, ascending.
    pub interior: Vec<usize>,
    /// Original indices of interface unknowns, ascending.
    pub interface: Vec<usize>,
    /// Interior block `B_i` (`d_i x d_i`).
    pub b: SparseSym,
    /// Interior-to-interface coupling `E_i` (`d_i x s_i`).
    pub e: Csr,
    /// Local interface block `C_i` (`s_i x s_i`).
    pub c: SparseSym,
    /// Couplings `E_ij` (`s_i x s_j`) to neighbouring subdomains `j`.
    pub couplings: Vec<(usize, Csr)>,
    /// Position of `u_i` inside the interior vector `u`.
    pub u_range: Range<usize>,
    /// Position of `y_i` inside the interface vector `y`.
    pub y_range: Range<usize>,
}

impl Subdomain {
    pub fn d(&self) -> usize {
        self.interior.len()
    }

    pub fn s(&self) -> usize {
        self.interface.len()
    }
}

/// The partitioned, reordered matrix with every block extracted.
#[derive(Debug, Clone)]
pub struct DistributedMatrix {
    subdomains: Vec<Subdomain>,
    /// `order[new] = old`.
    order: Vec<usize>,
    /// `position[old] = new`.
    position: Vec<usize>,
    permuted: SparseSym,
    c: SparseSym,
    m: usize,
    s: usize,
}

/// Direction for [`DistributedMatrix::permute_vector`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Original ordering to `(u, y)` ordering.
    Forward,
    /// `(u, y)` ordering back to the original one.
    Inverse,
}

/// Classifies unknowns, reorders the matrix and extracts all blocks.
pub fn build_distributed(a: &SparseSym, part: &Partition) -> Result<DistributedMatrix> {
    check_len(a.n(), part.assign().len())?;
    let n = a.n();
    let p = part.p();
    let assign = part.assign();
    let members = part.members();

    let mut interiors = Vec::with_capacity(p);
    let mut interfaces = Vec::with_capacity(p);
    for verts in &members {
        let (mut int, mut ifc) = (Vec::new(), Vec::new());
        for &v in verts {
            if a.neighbors(v).any(|w| assign[w] != assign[v]) {
                ifc.push(v);
            } else {
                int.push(v);
            }
        }
        int.sort_unstable();
        ifc.sort_unstable();
        interiors.push(int);
        interfaces.push(ifc);
    }

    let m: usize = interiors.iter().map(Vec::len).sum();
    let s: usize = interfaces.iter().map(Vec::len).sum();
    let order: Vec<usize> = interiors
        .iter()
        .flatten()
        .chain(interfaces.iter().flatten())
        .copied()
        .collect();
    let mut position = vec![0; n];
    for (new, &old) in order.iter().enumerate() {
        position[old] = new;
    }
    let permuted = a.permute(&order);
    let c = permuted.principal(&(m..n).collect::<Vec<_>>());

    let mut subdomains = Vec::with_capacity(p);
    let (mut uoff, mut yoff) = (0, 0);
    for i in 0..p {
        let int = &interiors[i];
        let ifc = &interfaces[i];
        let csr = a.as_csr();
        let b = SparseSym::from_csr_unchecked(csr.extract(int, int));
        let e = csr.extract(int, ifc);
        let ci = SparseSym::from_csr_unchecked(csr.extract(ifc, ifc));
        let mut couplings = Vec::new();
        for (j, other) in interfaces.iter().enumerate() {
            if j == i || ifc.is_empty() || other.is_empty() {
                continue;
            }
            let eij = csr.extract(ifc, other);
            if eij.nnz() > 0 {
                couplings.push((j, eij));
            }
        }
        subdomains.push(Subdomain {
            interior: int.clone(),
            interface: ifc.clone(),
            b,
            e,
            c: ci,
            couplings,
            u_range: uoff..uoff + int.len(),
            y_range: yoff..yoff + ifc.len(),
        });
        uoff += int.len();
        yoff += ifc.len();
    }

    Ok(DistributedMatrix {
        subdomains,
        order,
        position,
        permuted,
        c,
        m,
        s,
    })
}

impl DistributedMatrix {
    pub fn p(&self) -> usize {
        self.subdomains.len()
    }

    pub fn n(&self) -> usize {
        self.order.len()
    }

    /// Number of interior unknowns.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of interface unknowns.
    pub fn s(&self) -> usize {
        self.s
    }

    pub fn subdomains(&self) -> &[Subdomain] {
        &self.subdomains
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn position(&self) -> &[usize] {
        &self.position
    }

    /// `P A P^T` in `(u, y)` ordering.
    pub fn permuted(&self) -> &SparseSym {
        &self.permuted
    }

    /// Global interface matrix `C`.
    pub fn c(&self) -> &SparseSym {
        &self.c
    }

    /// Subdomain owning each interface unknown, indexed by position in `y`.
    pub fn interface_owner(&self) -> Vec<usize> {
        let mut owner = vec![0; self.s];
        for (i, sd) in self.subdomains.iter().enumerate() {
            for k in sd.y_range.clone() {
                owner[k] = i;
            }
        }
        owner
    }

    pub fn permute_vector(&self, x: &[f64], direction: Direction) -> Result<Vec<f64>> {
        check_len(self.n(), x.len())?;
        Ok(match direction {
            Direction::Forward => self.order.iter().map(|&o| x[o]).collect(),
            Direction::Inverse => self.position.iter().map(|&p| x[p]).collect(),
        })
    }

    /// `C` assembled from the `C_i` and `E_ij` blocks.
    pub fn assemble_c(&self) -> SparseSym {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.s];
        for sd in &self.subdomains {
            let y0 = sd.y_range.start;
            for r in 0..sd.s() {
                let (cols, vals) = sd.c.row(r);
                rows[y0 + r].extend(cols.iter().zip(vals).map(|(&c, &v)| (y0 + c, v)));
                for (j, eij) in &sd.couplings {
                    let yj = self.subdomains[*j].y_range.start;
                    let (cols, vals) = eij.row(r);
                    rows[y0 + r].extend(cols.iter().zip(vals).map(|(&c, &v)| (yj + c, v)));
                }
            }
        }
        SparseSym::from_csr_unchecked(Csr::from_rows(self.s, rows))
    }

    /// The full reordered matrix assembled from all blocks.
    pub fn reassemble(&self) -> SparseSym {
        let n = self.n();
        let m = self.m;
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for sd in &self.subdomains {
            let u0 = sd.u_range.start;
            let y0 = m + sd.y_range.start;
            for r in 0..sd.d() {
                let (cols, vals) = sd.b.row(r);
                rows[u0 + r].extend(cols.iter().zip(vals).map(|(&c, &v)| (u0 + c, v)));
                let (cols, vals) = sd.e.row(r);
                for (&c, &v) in cols.iter().zip(vals) {
                    rows[u0 + r].push((y0 + c, v));
                    rows[y0 + c].push((u0 + r, v));
                }
            }
        }
        let c = self.assemble_c();
        for r in 0..self.s {
            let (cols, vals) = c.row(r);
            rows[m + r].extend(cols.iter().zip(vals).map(|(&cc, &v)| (m + cc, v)));
        }
        SparseSym::from_csr_unchecked(Csr::from_rows(n, rows))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::gen_laplacian;

    fn path(n: usize) -> SparseSym {
        SparseSym::tridiag(n, -1.0, 2.0)
    }

    #[test]
    fn single_part() {
        let a = gen_laplacian(&[5, 5], 0.0).unwrap();
        let part = partition_graph(&a, 1, 0).unwrap();
        assert!(part.assign().iter().all(|&x| x == 0));
    }

    #[test]
    fn path_bisection_is_contiguous() {
        let part = partition_graph(&path(8), 2, 0).unwrap();
        assert_eq!(part.assign(), &[0, 0, 0, 0, 1, 1, 1, 1]);
    }

    #[test]
    fn grid_four_parts_balanced_and_deterministic() {
        let a = gen_laplacian(&[4, 4], 0.0).unwrap();
        let p1 = partition_graph(&a, 4, 7).unwrap();
        let p2 = partition_graph(&a, 4, 7).unwrap();
        assert_eq!(p1, p2);
        for s in p1.sizes() {
            assert!((3..=5).contains(&s), "size {s} outside 25% tolerance");
        }
        assert_eq!(p1.sizes(), vec![4, 4, 4, 4]);
    }

    #[test]
    fn too_many_parts() {
        assert!(partition_graph(&path(3), 4, 0).is_err());
    }

    #[test]
    fn disconnected_graph() {
        let a = SparseSym::identity(6);
        let part = partition_graph(&a, 3, 0).unwrap();
        assert_eq!(part.sizes(), vec![2, 2, 2]);
    }

    #[test]
    fn identity_has_no_interface() {
        let a = SparseSym::identity(5);
        let part = partition_graph(&a, 2, 0).unwrap();
        let d = build_distributed(&a, &part).unwrap();
        assert_eq!(d.s(), 0);
        assert_eq!(d.c().n(), 0);
        assert_eq!(d.m(), 5);
    }

    fn path4() -> DistributedMatrix {
        let a = path(4);
        let part = Partition::from_assignment(2, vec![0, 0, 1, 1]).unwrap();
        build_distributed(&a, &part).unwrap()
    }

    #[test]
    fn path_hand_extraction() {
        let d = path4();
        let sd = d.subdomains();
        assert_eq!(sd[0].interface, vec![1]);
        assert_eq!(sd[1].interface, vec![2]);
        assert_eq!(sd[0].b.to_dense().data(), &[2.0]);
        assert_eq!(sd[1].b.to_dense().data(), &[2.0]);
        assert_eq!(sd[0].e.to_dense().data(), &[-1.0]);
        assert_eq!(sd[1].e.to_dense().data(), &[-1.0]);
        assert_eq!(d.c().to_dense().data(), &[2.0, -1.0, -1.0, 2.0]);
        assert_eq!(sd[0].couplings.len(), 1);
        assert_eq!(sd[0].couplings[0].1.to_dense().data(), &[-1.0]);
    }

    #[test]
    fn permute_vector_path() {
        let d = path4();
        let x = [1.0, 2.0, 3.0, 4.0];
        let f = d.permute_vector(&x, Direction::Forward).unwrap();
        assert_eq!(f, vec![1.0, 4.0, 2.0, 3.0]);
        assert_eq!(d.permute_vector(&f, Direction::Inverse).unwrap(), x.to_vec());
        assert!(d.permute_vector(&x[..2], Direction::Forward).is_err());
    }

    #[test]
    fn identity_permutation_leaves_vector() {
        let a = SparseSym::identity(3);
        let part = partition_graph(&a, 1, 0).unwrap();
        let d = build_distributed(&a, &part).unwrap();
        let x = [3.0, -1.0, 2.0];
        assert_eq!(d.permute_vector(&x, Direction::Forward).unwrap(), x.to_vec());
    }

    #[test]
    fn laplacian_block_structure() {
        let a = gen_laplacian(&[30, 30], 0.0).unwrap();
        let part = partition_graph(&a, 4, 0).unwrap();
        let d = build_distributed(&a, &part).unwrap();
        let pa = d.permuted();
        // Off-diagonal B blocks vanish.
        for (i, si) in d.subdomains().iter().enumerate() {
            for r in si.u_range.clone() {
                for &c in pa.row(r).0 {
                    if c < d.m() {
                        assert!(si.u_range.contains(&c), "B_{i} couples to another B");
                    } else {
                        assert!(si.y_range.contains(&(c - d.m())), "E_{i} leaves its subdomain");
                    }
                }
            }
        }
        assert_eq!(&d.reassemble(), pa);
        assert_eq!(&d.assemble_c(), d.c());
    }
}
