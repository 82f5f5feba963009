//! Shuffle coalgebra words, symmetric polynomials in fiber covectors, and
//! degree-raising homomorphisms with their derivation extensions.
//!
//! Letters are fiber covector indices `0..dim`. Words are flat sequences,
//! symmetric monomials are sorted multisets; both carry exact scalar or
//! series coefficients.
//!
//! Invariants:
//! * shuffle product is commutative and associative (tested exhaustively on
//!   random words up to degree 6);
//! * symmetrization followed by projection is the identity on symmetric
//!   polynomials, with coefficients exactly preserved;
//! * extending a degree-raising homomorphism to a derivation obeys the
//!   Leibniz rule, and the commutator of two extensions is the extension of
//!   the induced bracket.

use crate::num::GaussianRational;
use crate::series::{TruncSeries, VarSpec, RELIABLE_EXACT};
use std::collections::BTreeMap;

/// Exact factorial as a scalar.
pub fn factorial_q(k: usize) -> GaussianRational {
    let mut f = GaussianRational::one();
    for i in 2..=k {
        f.scale_int(i as i64);
    }
    f
}

/// Product of multiplicity factorials of a sorted multiset — the size of
/// its stabilizer inside the symmetric group.
pub fn multiset_stabilizer(m: &[u8]) -> GaussianRational {
    let mut acc = GaussianRational::one();
    let mut run = 0usize;
    for i in 0..m.len() {
        run += 1;
        if i + 1 == m.len() || m[i + 1] != m[i] {
            let f = factorial_q(run);
            acc = acc.mul(&f);
            run = 0;
        }
    }
    acc
}

/// Remove one occurrence of `letter` from a sorted multiset.
pub fn multiset_remove(m: &[u8], letter: u8) -> Vec<u8> {
    let pos = m.iter().position(|&x| x == letter).expect("letter present");
    let mut out = m.to_vec();
    out.remove(pos);
    out
}

/// Merge two sorted multisets.
pub fn multiset_merge(a: &[u8], b: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    out.extend_from_slice(a);
    out.extend_from_slice(b);
    out.sort_unstable();
    out
}

/// All sorted multisets of the given size over letters `0..dim`,
/// enumerated in lexicographic order.
pub fn sorted_multisets(dim: u8, size: usize) -> Vec<Vec<u8>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(size);
    fn rec(dim: u8, start: u8, left: usize, cur: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        if left == 0 {
            out.push(cur.clone());
            return;
        }
        for letter in start..dim {
            cur.push(letter);
            rec(dim, letter, left - 1, cur, out);
            cur.pop();
        }
    }
    rec(dim, 0, size, &mut cur, &mut out);
    out
}

// ---------------------------------------------------------------------------
// Tensor words under shuffle
// ---------------------------------------------------------------------------

/// A linear combination of tensor words in letters `0..dim`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TensorWord {
    pub dim: usize,
    pub terms: BTreeMap<Vec<u8>, GaussianRational>,
}

impl TensorWord {
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            terms: BTreeMap::new(),
        }
    }

    pub fn word(dim: usize, letters: Vec<u8>, c: GaussianRational) -> Self {
        let mut t = Self::zero(dim);
        t.accumulate(letters, c);
        t
    }

    fn accumulate(&mut self, w: Vec<u8>, c: GaussianRational) {
        if c.is_zero() {
            return;
        }
        debug_assert!(w.iter().all(|&l| (l as usize) < self.dim));
        use std::collections::btree_map::Entry;
        match self.terms.entry(w) {
            Entry::Vacant(e) => {
                e.insert(c);
            }
            Entry::Occupied(mut e) => {
                *e.get_mut() += &c;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let mut out = self.clone();
        for (w, c) in &other.terms {
            out.accumulate(w.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let mut out = self.clone();
        for (w, c) in &other.terms {
            out.accumulate(w.clone(), GaussianRational::zero() - c.clone());
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Shuffle product: bilinear extension of the sum over all interleavings
    /// of two basis words.
    pub fn shuffle(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let mut out = Self::zero(self.dim);
        for (a, ca) in &self.terms {
            for (b, cb) in &other.terms {
                let c = ca.mul(cb);
                for merged in interleavings(a, b) {
                    out.accumulate(merged, c.clone());
                }
            }
        }
        out
    }
}

/// All interleavings of `a` and `b` preserving the internal order of each.
fn interleavings(a: &[u8], b: &[u8]) -> Vec<Vec<u8>> {
    if a.is_empty() {
        return vec![b.to_vec()];
    }
    if b.is_empty() {
        return vec![a.to_vec()];
    }
    let mut out = Vec::new();
    for mut tail in interleavings(&a[1..], b) {
        tail.insert(0, a[0]);
        out.push(tail);
    }
    for mut tail in interleavings(a, &b[1..]) {
        tail.insert(0, b[0]);
        out.push(tail);
    }
    out
}

// ---------------------------------------------------------------------------
// Symmetric polynomials in the fiber covectors
// ---------------------------------------------------------------------------

/// A polynomial in fiber covectors with exact scalar coefficients, truncated
/// at a reliable degree. Monomials are sorted multisets of letters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymPoly {
    pub dim: usize,
    /// Degrees above this are unknown and never stored.
    pub reliable: i64,
    pub terms: BTreeMap<Vec<u8>, GaussianRational>,
}

impl SymPoly {
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            reliable: RELIABLE_EXACT,
            terms: BTreeMap::new(),
        }
    }

    pub fn monomial(dim: usize, mut m: Vec<u8>, c: GaussianRational) -> Self {
        m.sort_unstable();
        let mut p = Self::zero(dim);
        p.accumulate(m, c);
        p
    }

    pub fn with_reliable(mut self, r: i64) -> Self {
        self.reliable = r.min(RELIABLE_EXACT);
        self.terms.retain(|m, _| (m.len() as i64) <= self.reliable);
        self
    }

    fn accumulate(&mut self, m: Vec<u8>, c: GaussianRational) {
        if c.is_zero() || (m.len() as i64) > self.reliable {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(m) {
            Entry::Vacant(e) => {
                e.insert(c);
            }
            Entry::Occupied(mut e) => {
                *e.get_mut() += &c;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let mut out = Self {
            dim: self.dim,
            reliable: self.reliable.min(other.reliable),
            terms: BTreeMap::new(),
        };
        for (m, c) in self.terms.iter().chain(other.terms.iter()) {
            out.accumulate(m.clone(), c.clone());
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    fn valuation(&self) -> i64 {
        self.terms
            .keys()
            .map(|m| m.len() as i64)
            .min()
            .unwrap_or(RELIABLE_EXACT)
    }

    /// Symmetric product with window rule `min(r_a + val_b, r_b + val_a)`.
    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        if self.is_zero() || other.is_zero() {
            return Self::zero(self.dim);
        }
        let reliable = (self.reliable.saturating_add(other.valuation()))
            .min(other.reliable.saturating_add(self.valuation()))
            .min(RELIABLE_EXACT);
        let mut out = Self {
            dim: self.dim,
            reliable,
            terms: BTreeMap::new(),
        };
        for (a, ca) in &self.terms {
            for (b, cb) in &other.terms {
                out.accumulate(multiset_merge(a, b), ca.mul(cb));
            }
        }
        out
    }
}

/// All permutations of a slice, with repetition (length factorial many).
fn permutations(m: &[u8]) -> Vec<Vec<u8>> {
    if m.len() <= 1 {
        return vec![m.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..m.len() {
        let mut rest = m.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

/// Symmetrization inclusion: a degree-k monomial goes to the sum of all k!
/// letter orderings (repeated letters produce multiplicities).
pub fn sym_include(p: &SymPoly) -> TensorWord {
    let mut out = TensorWord::zero(p.dim);
    for (m, c) in &p.terms {
        for w in permutations(m) {
            out.accumulate(w, c.clone());
        }
    }
    out
}

/// Symmetrization projection: a word of length k maps to `1/k!` times its
/// underlying multiset. Left inverse of [`sym_include`].
pub fn sym_project(w: &TensorWord) -> SymPoly {
    let mut out = SymPoly::zero(w.dim);
    for (word, c) in &w.terms {
        let k = word.len();
        let mut sorted = word.clone();
        sorted.sort_unstable();
        let scale = factorial_q(k).inv();
        out.accumulate(sorted, c.mul(&scale));
    }
    out
}

// ---------------------------------------------------------------------------
// Degree-raising homomorphisms and their derivation extensions
// ---------------------------------------------------------------------------

/// A fiberwise map sending each degree-one covector to a homogeneous
/// degree-`n` symmetric polynomial with series coefficients:
/// generator `l` maps to the sum of `entries[(l, m)] * u^m` over multisets
/// `m` of size `n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HomTensor {
    pub n: usize,
    pub dim: usize,
    pub spec: VarSpec,
    pub entries: BTreeMap<(u8, Vec<u8>), TruncSeries>,
}

impl HomTensor {
    pub fn zero(n: usize, dim: usize, spec: VarSpec) -> Self {
        Self {
            n,
            dim,
            spec,
            entries: BTreeMap::new(),
        }
    }

    pub fn set(&mut self, l: u8, mut m: Vec<u8>, s: TruncSeries) {
        assert_eq!(m.len(), self.n, "input multiset size");
        assert_eq!(s.spec, self.spec, "entry series layout");
        m.sort_unstable();
        if s.is_zero() {
            self.entries.remove(&(l, m));
        } else {
            self.entries.insert((l, m), s);
        }
    }

    pub fn get(&self, l: u8, m: &[u8]) -> TruncSeries {
        self.entries
            .get(&(l, m.to_vec()))
            .cloned()
            .unwrap_or_else(|| TruncSeries::zero(self.spec))
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        assert_eq!(self.dim, other.dim);
        let mut out = self.clone();
        for ((l, m), s) in &other.entries {
            let cur = out.get(*l, m);
            out.set(*l, m.clone(), cur.add(s));
        }
        out
    }

    pub fn neg(&self) -> Self {
        let mut out = self.clone();
        for s in out.entries.values_mut() {
            *s = s.neg();
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    /// Minimal base windows across entries, the honest window of anything
    /// this tensor touches.
    pub fn min_reliable(&self) -> [i64; 3] {
        let mut w = [RELIABLE_EXACT; 3];
        for s in self.entries.values() {
            for g in 0..3 {
                w[g] = w[g].min(s.reliable[g]);
            }
        }
        w
    }

    /// Leibniz action on one fiber monomial: returns the list of
    /// `(new multiset, series factor)` contributions.
    pub fn apply_monomial(&self, m: &[u8]) -> Vec<(Vec<u8>, TruncSeries)> {
        let mut out: BTreeMap<Vec<u8>, TruncSeries> = BTreeMap::new();
        let mut seen: Vec<u8> = Vec::new();
        for &v in m {
            if seen.contains(&v) {
                continue;
            }
            seen.push(v);
            let mult = m.iter().filter(|&&x| x == v).count() as i64;
            let rest = multiset_remove(m, v);
            for ((l, mu), s) in &self.entries {
                if *l != v {
                    continue;
                }
                let key = multiset_merge(&rest, mu);
                let mut contrib = s.clone();
                contrib = contrib.scale(&GaussianRational::from_int(mult));
                out.entry(key)
                    .and_modify(|acc| *acc = acc.add(&contrib))
                    .or_insert(contrib);
            }
        }
        out.into_iter().filter(|(_, s)| !s.is_zero()).collect()
    }

    /// The bracket induced on generators by the commutator of the two
    /// derivation extensions: `[a, b](u_l) = a~(b(u_l)) - b~(a(u_l))`.
    pub fn bracket(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let n = self.n + other.n - 1;
        let mut out = Self::zero(n, self.dim, self.spec);
        for l in 0..self.dim as u8 {
            // a~(b(u_l))
            for ((bl, bm), bs) in &other.entries {
                if *bl != l {
                    continue;
                }
                for (m2, s2) in self.apply_monomial(bm) {
                    let cur = out.get(l, &m2);
                    out.set(l, m2, cur.add(&bs.mul(&s2)));
                }
            }
            // - b~(a(u_l))
            for ((al, am), as_) in &self.entries {
                if *al != l {
                    continue;
                }
                for (m2, s2) in other.apply_monomial(am) {
                    let cur = out.get(l, &m2);
                    out.set(l, m2, cur.sub(&as_.mul(&s2)));
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::GaussianRational as Q;

    #[test]
    fn shuffle_singletons() {
        // x ⧢ y = xy + yx
        let x = TensorWord::word(2, vec![0], Q::one());
        let y = TensorWord::word(2, vec![1], Q::one());
        let s = x.shuffle(&y);
        assert_eq!(s.terms.len(), 2);
        assert_eq!(s.terms[&vec![0, 1]], Q::one());
        assert_eq!(s.terms[&vec![1, 0]], Q::one());
    }

    #[test]
    fn shuffle_counts_interleavings() {
        // (01) ⧢ (2) has the three insertions of letter 2.
        let a = TensorWord::word(3, vec![0, 1], Q::one());
        let b = TensorWord::word(3, vec![2], Q::one());
        let s = a.shuffle(&b);
        assert_eq!(s.terms.len(), 3);
        for w in [vec![2, 0, 1], vec![0, 2, 1], vec![0, 1, 2]] {
            assert_eq!(s.terms[&w], Q::one());
        }
    }

    #[test]
    fn include_square_doubles() {
        // v·v includes as 2 v⊗v
        let p = SymPoly::monomial(1, vec![0, 0], Q::one());
        let w = sym_include(&p);
        assert_eq!(w.terms[&vec![0, 0]], Q::from_int(2));
    }

    #[test]
    fn project_after_include_is_identity() {
        let p = SymPoly::monomial(2, vec![0, 0, 1], Q::from_ratio(3, 7));
        let q = sym_project(&sym_include(&p));
        assert_eq!(q.terms, p.terms);
    }

    #[test]
    fn derivation_on_power() {
        // R: u -> u^2 in one letter extends to u^k -> k u^{k+1}.
        let spec = VarSpec::base(0);
        let mut h = HomTensor::zero(2, 1, spec);
        h.set(0, vec![0, 0], TruncSeries::one(spec));
        for k in 1..6usize {
            let out = h.apply_monomial(&vec![0; k]);
            assert_eq!(out.len(), 1);
            let (m, s) = &out[0];
            assert_eq!(m, &vec![0; k + 1]);
            assert_eq!(s.constant_term(), Q::from_int(k as i64));
        }
    }
}
