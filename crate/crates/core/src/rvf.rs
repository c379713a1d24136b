//! Random verifiable functions: samplers of input/output pairs whose inputs
//! are uniform over the domain, classical verifiers, and an enumeration of
//! the domain onto a computational basis.
//!
//! Three families are provided:
//! * `graph_iso`: inputs are pairs of isomorphic graphs `(G₀, G₁)` with `v`
//!   vertices and `e` edges, outputs are permutations `σ` of the vertices with
//!   `σ(G₀) = G₁`;
//! * `factoring`: inputs are products `p·q` of two primes with exactly `bits`
//!   bits, outputs the sorted factor pair;
//! * `toy`: the identity on `{0, …, n−1}`, for scenario-level experiments at
//!   a chosen dimension.

use std::collections::HashMap;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest vertex count for which graph domains are enumerated.
pub const MAX_VERTICES: usize = 6;
/// Largest prime size for the factoring family.
pub const MAX_BITS: u32 = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum RvfKind {
    GraphIso { vertices: usize, edges: usize },
    Factoring { bits: u32 },
    Toy { n: usize },
}

impl RvfKind {
    pub fn name(&self) -> &'static str {
        match self {
            RvfKind::GraphIso { .. } => "graph_iso",
            RvfKind::Factoring { .. } => "factoring",
            RvfKind::Toy { .. } => "toy",
        }
    }
}

/// Undirected simple graph; edges are stored as a bitmask over vertex pairs
/// `(a, b)`, `a < b`, in lexicographic order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Graph {
    vertices: usize,
    mask: u64,
}

impl Graph {
    pub fn from_edges(vertices: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut mask = 0u64;
        for &(a, b) in edges {
            if a == b || a >= vertices || b >= vertices {
                return Err(Error::Malformed(format!("edge ({a}, {b}) on {vertices} vertices")));
            }
            let bit = 1u64 << slot(vertices, a.min(b), a.max(b));
            if mask & bit != 0 {
                return Err(Error::Malformed(format!("duplicate edge ({a}, {b})")));
            }
            mask |= bit;
        }
        Ok(Self { vertices, mask })
    }

    pub fn vertices(&self) -> usize {
        self.vertices
    }

    pub fn edge_count(&self) -> usize {
        self.mask.count_ones() as usize
    }

    /// Edges as sorted vertex pairs, in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let v = self.vertices;
        let mut out = Vec::with_capacity(self.edge_count());
        for a in 0..v {
            for b in a + 1..v {
                if self.mask & (1u64 << slot(v, a, b)) != 0 {
                    out.push((a, b));
                }
            }
        }
        out
    }

    /// `σ(G)`: relabels vertex `a` as `σ[a]`.
    pub fn permuted(&self, sigma: &[usize]) -> Graph {
        let v = self.vertices;
        let mut mask = 0u64;
        for (a, b) in self.edges() {
            let (x, y) = (sigma[a], sigma[b]);
            mask |= 1u64 << slot(v, x.min(y), x.max(y));
        }
        Graph { vertices: v, mask }
    }
}

impl Serialize for Graph {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.edges().serialize(s)
    }
}

fn slot(v: usize, a: usize, b: usize) -> usize {
    // pairs (0,1)..(0,v-1),(1,2).. in order
    a * v - a * (a + 1) / 2 + (b - a - 1)
}

fn slot_pairs(v: usize) -> Vec<(usize, usize)> {
    (0..v).flat_map(|a| (a + 1..v).map(move |b| (a, b))).collect()
}

/// An element of a function's domain.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum RvfInput {
    Graphs { g0: Graph, g1: Graph },
    Composite(u64),
    Symbol(usize),
}

/// An element of a function's codomain.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum RvfOutput {
    Permutation(Vec<usize>),
    Factors([u64; 2]),
    Symbol(usize),
}

/// A sampled `(q, f(q))`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RvfPair {
    pub input: RvfInput,
    pub output: RvfOutput,
}

fn factorial(k: usize) -> usize {
    (1..=k).product()
}

/// Rank of a permutation in lexicographic order.
pub fn lehmer_rank(perm: &[usize]) -> usize {
    let len = perm.len();
    let mut rank = 0;
    for i in 0..len {
        let smaller = perm[i + 1..].iter().filter(|&&x| x < perm[i]).count();
        rank += smaller * factorial(len - 1 - i);
    }
    rank
}

/// Inverse of [`lehmer_rank`].
pub fn lehmer_unrank(len: usize, mut rank: usize) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..len).collect();
    let mut out = Vec::with_capacity(len);
    for i in 0..len {
        let f = factorial(len - 1 - i);
        out.push(pool.remove(rank / f));
        rank %= f;
    }
    out
}

fn is_permutation(p: &[usize], len: usize) -> bool {
    let mut seen = vec![false; len];
    p.len() == len && p.iter().all(|&x| x < len && !std::mem::replace(&mut seen[x], true))
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

fn check_graph_params(v: usize, e: usize) -> Result<()> {
    if v == 0 || v > MAX_VERTICES {
        return Err(Error::InvalidParameter(format!(
            "graph_iso needs 1 ≤ v ≤ {MAX_VERTICES}, got {v}"
        )));
    }
    let slots = v * (v - 1) / 2;
    if e > slots {
        return Err(Error::InvalidParameter(format!(
            "graph_iso: {e} edges do not fit on {v} vertices (max {slots})"
        )));
    }
    Ok(())
}

fn random_graph<R: Rng + ?Sized>(v: usize, e: usize, rng: &mut R) -> Graph {
    let slots = v * (v - 1) / 2;
    let mask = index::sample(rng, slots, e)
        .into_iter()
        .fold(0u64, |m, s| m | (1u64 << s));
    Graph { vertices: v, mask }
}

/// Whether `sigma` is the lexicographically first isomorphism `g0 → sigma(g0)`.
fn is_canonical(g0: &Graph, sigma: &[usize]) -> bool {
    let v = g0.vertices;
    let g1 = g0.permuted(sigma);
    let rank = lehmer_rank(sigma);
    !(0..rank).any(|r| g0.permuted(&lehmer_unrank(v, r)) == g1)
}

/// Samples `((G₀, σ(G₀)), σ)`: `G₀` uniform among graphs with `e` edges,
/// `σ` uniform, kept only when `σ` is the lexicographically first
/// isomorphism from `G₀` to `σ(G₀)`. Acceptance happens with probability
/// `1/|Aut(G₀)|`, which makes the pair uniform over all isomorphic pairs and
/// the output a function of the input.
pub fn graph_iso_sample<R: Rng + ?Sized>(v: usize, e: usize, rng: &mut R) -> Result<RvfPair> {
    check_graph_params(v, e)?;
    loop {
        let mut sigma: Vec<usize> = (0..v).collect();
        sigma.shuffle(rng);
        let g0 = random_graph(v, e, rng);
        if is_canonical(&g0, &sigma) {
            return Ok(graph_pair(g0, sigma));
        }
    }
}

/// Test hook: samples with a fixed permutation, redrawing `G₀` until the
/// permutation is canonical for it. Fails if no graph admits it within a
/// bounded number of draws.
pub fn graph_iso_sample_with<R: Rng + ?Sized>(
    v: usize,
    e: usize,
    sigma: &[usize],
    rng: &mut R,
) -> Result<RvfPair> {
    check_graph_params(v, e)?;
    if !is_permutation(sigma, v) {
        return Err(Error::Malformed(format!("{sigma:?} is not a permutation of {v}")));
    }
    for _ in 0..10_000 {
        let g0 = random_graph(v, e, rng);
        if is_canonical(&g0, sigma) {
            return Ok(graph_pair(g0, sigma.to_vec()));
        }
    }
    Err(Error::InvalidParameter(format!("{sigma:?} is never canonical for v={v}, e={e}")))
}

fn graph_pair(g0: Graph, sigma: Vec<usize>) -> RvfPair {
    let g1 = g0.permuted(&sigma);
    RvfPair {
        input: RvfInput::Graphs { g0, g1 },
        output: RvfOutput::Permutation(sigma),
    }
}

/// Primes with exactly `bits` bits.
pub fn primes_with_bits(bits: u32) -> Vec<u64> {
    if bits == 0 || bits > 32 {
        return Vec::new();
    }
    let lo = 1u64 << (bits - 1);
    let hi = 1u64 << bits;
    let mut sieve = vec![true; hi as usize];
    sieve[0] = false;
    if hi > 1 {
        sieve[1] = false;
    }
    let mut i = 2usize;
    while i * i < hi as usize {
        if sieve[i] {
            (i * i..hi as usize).step_by(i).for_each(|j| sieve[j] = false);
        }
        i += 1;
    }
    (lo..hi).filter(|&p| sieve[p as usize]).collect()
}

fn check_bits(bits: u32) -> Result<()> {
    if !(2..=MAX_BITS).contains(&bits) {
        return Err(Error::InvalidParameter(format!(
            "factoring needs 2 ≤ bits ≤ {MAX_BITS}, got {bits}"
        )));
    }
    Ok(())
}

fn sample_factors<R: Rng + ?Sized>(primes: &[u64], rng: &mut R) -> RvfPair {
    loop {
        let p = primes[rng.random_range(0..primes.len())];
        let q = primes[rng.random_range(0..primes.len())];
        // unordered pairs with p ≠ q are drawn twice as often as squares
        if p == q || rng.random_bool(0.5) {
            let (a, b) = (p.min(q), p.max(q));
            return RvfPair {
                input: RvfInput::Composite(a * b),
                output: RvfOutput::Factors([a, b]),
            };
        }
    }
}

/// Samples `(p·q, (p, q))` uniformly over products of two primes of exactly
/// `bits` bits, factors sorted.
pub fn factoring_sample<R: Rng + ?Sized>(bits: u32, rng: &mut R) -> Result<RvfPair> {
    check_bits(bits)?;
    Ok(sample_factors(&primes_with_bits(bits), rng))
}

fn is_prime(x: u64) -> bool {
    if x < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= x {
        if x % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

fn bit_length(x: u64) -> u32 {
    64 - x.leading_zeros()
}

#[derive(Clone, Debug)]
struct GraphDomain {
    vertices: usize,
    edges: usize,
    graphs: Vec<Graph>,
    graph_index: HashMap<u64, usize>,
    /// members of each graph's isomorphism class, as sorted graph indices
    class_members: Vec<Vec<usize>>,
    class_of: Vec<usize>,
    rank_in_class: Vec<usize>,
    offset: Vec<usize>,
    /// lexicographically first isomorphism rank, per encoded pair
    canonical: Vec<usize>,
}

impl GraphDomain {
    fn new(v: usize, e: usize) -> Result<Self> {
        check_graph_params(v, e)?;
        let slots = slot_pairs(v).len();
        let graphs: Vec<Graph> = (0u64..(1u64 << slots))
            .filter(|m| m.count_ones() as usize == e)
            .map(|mask| Graph { vertices: v, mask })
            .collect();
        debug_assert_eq!(graphs.len(), binomial(slots, e));
        let graph_index: HashMap<u64, usize> =
            graphs.iter().enumerate().map(|(i, g)| (g.mask, i)).collect();
        let perms: Vec<Vec<usize>> = (0..factorial(v)).map(|r| lehmer_unrank(v, r)).collect();

        let mut class_of = vec![usize::MAX; graphs.len()];
        let mut class_members: Vec<Vec<usize>> = Vec::new();
        for i in 0..graphs.len() {
            if class_of[i] != usize::MAX {
                continue;
            }
            let mut members: Vec<usize> = perms
                .iter()
                .map(|p| graph_index[&graphs[i].permuted(p).mask])
                .collect();
            members.sort_unstable();
            members.dedup();
            for &m in &members {
                class_of[m] = class_members.len();
            }
            class_members.push(members);
        }
        let mut rank_in_class = vec![0; graphs.len()];
        for members in &class_members {
            for (r, &m) in members.iter().enumerate() {
                rank_in_class[m] = r;
            }
        }
        let mut offset = Vec::with_capacity(graphs.len());
        let mut total = 0;
        for i in 0..graphs.len() {
            offset.push(total);
            total += class_members[class_of[i]].len();
        }
        let mut canonical = vec![usize::MAX; total];
        for (i, g0) in graphs.iter().enumerate() {
            for (r, p) in perms.iter().enumerate() {
                let j = graph_index[&g0.permuted(p).mask];
                let slot = &mut canonical[offset[i] + rank_in_class[j]];
                if *slot == usize::MAX {
                    *slot = r;
                }
            }
        }
        Ok(Self {
            vertices: v,
            edges: e,
            graphs,
            graph_index,
            class_members,
            class_of,
            rank_in_class,
            offset,
            canonical,
        })
    }

    fn size(&self) -> usize {
        self.canonical.len()
    }

    fn encode(&self, g0: &Graph, g1: &Graph) -> Result<usize> {
        let lookup = |g: &Graph| {
            if g.vertices != self.vertices {
                return Err(Error::Malformed(format!(
                    "graph on {} vertices, expected {}",
                    g.vertices, self.vertices
                )));
            }
            self.graph_index
                .get(&g.mask)
                .copied()
                .ok_or_else(|| Error::InvalidParameter(format!("graph does not have {} edges", self.edges)))
        };
        let (i, j) = (lookup(g0)?, lookup(g1)?);
        if self.class_of[i] != self.class_of[j] {
            return Err(Error::InvalidParameter("graphs are not isomorphic".into()));
        }
        Ok(self.offset[i] + self.rank_in_class[j])
    }

    fn decode(&self, index: usize) -> Result<(Graph, Graph)> {
        if index >= self.size() {
            return Err(Error::IndexOutOfRange {
                index,
                dim: self.size(),
            });
        }
        let i = self.offset.partition_point(|&o| o <= index) - 1;
        let j = self.class_members[self.class_of[i]][index - self.offset[i]];
        Ok((self.graphs[i], self.graphs[j]))
    }
}

#[derive(Clone, Debug)]
struct FactorDomain {
    bits: u32,
    primes: Vec<u64>,
    /// sorted by product
    semiprimes: Vec<(u64, [u64; 2])>,
}

impl FactorDomain {
    fn new(bits: u32) -> Result<Self> {
        check_bits(bits)?;
        let primes = primes_with_bits(bits);
        let mut semiprimes: Vec<(u64, [u64; 2])> = primes
            .iter()
            .enumerate()
            .flat_map(|(i, &p)| primes[i..].iter().map(move |&q| (p * q, [p, q])))
            .collect();
        semiprimes.sort_unstable();
        Ok(Self {
            bits,
            primes,
            semiprimes,
        })
    }

    fn index_of(&self, product: u64) -> Option<usize> {
        self.semiprimes.binary_search_by_key(&product, |s| s.0).ok()
    }
}

#[derive(Clone, Debug)]
enum Domain {
    Graph(GraphDomain),
    Factor(FactorDomain),
    Toy(usize),
}

/// A random verifiable function with its enumerated domain and codomain.
#[derive(Clone, Debug)]
pub struct RvfInstance {
    kind: RvfKind,
    domain: Domain,
}

impl RvfInstance {
    pub fn new(kind: RvfKind) -> Result<Self> {
        let domain = match kind {
            RvfKind::GraphIso { vertices, edges } => Domain::Graph(GraphDomain::new(vertices, edges)?),
            RvfKind::Factoring { bits } => Domain::Factor(FactorDomain::new(bits)?),
            RvfKind::Toy { n } => Domain::Toy(n),
        };
        let instance = Self { kind, domain };
        if instance.domain_size() < 2 {
            return Err(Error::InvalidParameter(format!(
                "{kind:?} has {} input(s); at least 2 are needed",
                instance.domain_size()
            )));
        }
        Ok(instance)
    }

    pub fn kind(&self) -> RvfKind {
        self.kind
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    /// `n = |S|`.
    pub fn domain_size(&self) -> usize {
        match &self.domain {
            Domain::Graph(g) => g.size(),
            Domain::Factor(f) => f.semiprimes.len(),
            Domain::Toy(n) => *n,
        }
    }

    /// `m`, the dimension of the output register.
    pub fn output_size(&self) -> usize {
        match &self.domain {
            Domain::Graph(g) => factorial(g.vertices),
            Domain::Factor(f) => f.semiprimes.len(),
            Domain::Toy(n) => *n,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> RvfPair {
        match &self.domain {
            Domain::Graph(g) => {
                graph_iso_sample(g.vertices, g.edges, rng).expect("parameters validated at construction")
            }
            Domain::Factor(f) => sample_factors(&f.primes, rng),
            Domain::Toy(n) => {
                let q = rng.random_range(0..*n);
                RvfPair {
                    input: RvfInput::Symbol(q),
                    output: RvfOutput::Symbol(q),
                }
            }
        }
    }

    /// Classical check that `y` is a valid output for `q`. Inputs or outputs
    /// of the wrong shape are errors, not `false`.
    pub fn verify(&self, q: &RvfInput, y: &RvfOutput) -> Result<bool> {
        match (&self.domain, q, y) {
            (Domain::Graph(d), RvfInput::Graphs { g0, g1 }, RvfOutput::Permutation(sigma)) => {
                if g0.vertices != d.vertices || g1.vertices != d.vertices {
                    return Err(Error::Malformed("graph vertex count mismatch".into()));
                }
                if !is_permutation(sigma, d.vertices) {
                    return Err(Error::Malformed(format!("{sigma:?} is not a permutation")));
                }
                Ok(g0.edge_count() == d.edges && g0.permuted(sigma) == *g1)
            }
            (Domain::Factor(d), RvfInput::Composite(n), RvfOutput::Factors([a, b])) => {
                if *a == 0 || *b == 0 || *n == 0 {
                    return Err(Error::Malformed("zero is not a valid factor or composite".into()));
                }
                let sized = |x: u64| bit_length(x) == d.bits && is_prime(x);
                Ok(a <= b && sized(*a) && sized(*b) && a.checked_mul(*b) == Some(*n))
            }
            (Domain::Toy(n), RvfInput::Symbol(q), RvfOutput::Symbol(y)) => {
                if q >= n || y >= n {
                    return Err(Error::Malformed(format!("symbol outside 0..{n}")));
                }
                Ok(q == y)
            }
            _ => Err(Error::Malformed(format!(
                "input/output shapes do not belong to {}",
                self.name()
            ))),
        }
    }

    /// Basis index of `q` in `[0, n)`.
    pub fn encode(&self, q: &RvfInput) -> Result<usize> {
        match (&self.domain, q) {
            (Domain::Graph(d), RvfInput::Graphs { g0, g1 }) => d.encode(g0, g1),
            (Domain::Factor(d), RvfInput::Composite(x)) => d
                .index_of(*x)
                .ok_or_else(|| Error::InvalidParameter(format!("{x} is not in the domain"))),
            (Domain::Toy(n), RvfInput::Symbol(x)) if x < n => Ok(*x),
            (Domain::Toy(n), RvfInput::Symbol(x)) => Err(Error::IndexOutOfRange { index: *x, dim: *n }),
            _ => Err(Error::Malformed(format!("input does not belong to {}", self.name()))),
        }
    }

    pub fn decode(&self, index: usize) -> Result<RvfInput> {
        let n = self.domain_size();
        if index >= n {
            return Err(Error::IndexOutOfRange { index, dim: n });
        }
        Ok(match &self.domain {
            Domain::Graph(d) => {
                let (g0, g1) = d.decode(index)?;
                RvfInput::Graphs { g0, g1 }
            }
            Domain::Factor(d) => RvfInput::Composite(d.semiprimes[index].0),
            Domain::Toy(_) => RvfInput::Symbol(index),
        })
    }

    /// Basis index of an output in `[0, m)`.
    pub fn encode_output(&self, y: &RvfOutput) -> Result<usize> {
        match (&self.domain, y) {
            (Domain::Graph(d), RvfOutput::Permutation(p)) if is_permutation(p, d.vertices) => {
                Ok(lehmer_rank(p))
            }
            (Domain::Factor(d), RvfOutput::Factors([a, b])) => {
                match a.checked_mul(*b).and_then(|x| d.index_of(x)) {
                    Some(i) if d.semiprimes[i].1 == [*a, *b] => Ok(i),
                    _ => Err(Error::InvalidParameter(format!("({a}, {b}) is not an output"))),
                }
            }
            (Domain::Toy(n), RvfOutput::Symbol(y)) if y < n => Ok(*y),
            _ => Err(Error::Malformed(format!("output does not belong to {}", self.name()))),
        }
    }

    pub fn decode_output(&self, index: usize) -> Result<RvfOutput> {
        let m = self.output_size();
        if index >= m {
            return Err(Error::IndexOutOfRange { index, dim: m });
        }
        Ok(match &self.domain {
            Domain::Graph(d) => RvfOutput::Permutation(lehmer_unrank(d.vertices, index)),
            Domain::Factor(d) => RvfOutput::Factors(d.semiprimes[index].1),
            Domain::Toy(_) => RvfOutput::Symbol(index),
        })
    }

    /// Output index computed by the honest function on input index `q`.
    pub fn f_index(&self, q: usize) -> Result<usize> {
        let n = self.domain_size();
        if q >= n {
            return Err(Error::IndexOutOfRange { index: q, dim: n });
        }
        Ok(match &self.domain {
            Domain::Graph(d) => d.canonical[q],
            Domain::Factor(_) | Domain::Toy(_) => q,
        })
    }

    /// `f` on every input index.
    pub fn f_table(&self) -> Vec<usize> {
        (0..self.domain_size())
            .map(|q| self.f_index(q).expect("index in range"))
            .collect()
    }

    /// Encodes a sampled pair as `(input index, output index)`.
    pub fn encode_pair(&self, pair: &RvfPair) -> Result<(usize, usize)> {
        Ok((self.encode(&pair.input)?, self.encode_output(&pair.output)?))
    }

    /// Classical verification on basis indices.
    pub fn verify_indices(&self, q: usize, y: usize) -> Result<bool> {
        self.verify(&self.decode(q)?, &self.decode_output(y)?)
    }
}
