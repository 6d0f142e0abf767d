//! Permutations, non-crossing partitions and asymptotic moment sums.
//!
//! Non-crossing partitions of `{1..p}` are handled as geodesic permutations:
//! `β` is geodesic when `#(β) + #(β⁻¹γ) = p + 1`, where `#` counts cycles
//! and `γ = (1 2 … p)` is the full cycle.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use itertools::Itertools;
use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Pow, Zero};

use crate::error::{Error, Result};
use crate::graph::Marginal;

/// Largest `p` accepted by the enumeration routines (`Cat(8) = 1430`).
pub const MAX_P: usize = 8;

/// A permutation of `{0..p-1}` in one-line notation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation(Vec<u8>);

impl Permutation {
    pub fn from_images(images: Vec<u8>) -> Result<Self> {
        let mut seen = vec![false; images.len()];
        for &i in &images {
            let i = i as usize;
            if i >= images.len() || seen[i] {
                return Err(Error::Validation(format!("{images:?} is not a permutation")));
            }
            seen[i] = true;
        }
        Ok(Permutation(images))
    }

    pub fn identity(p: usize) -> Self {
        Permutation((0..p as u8).collect())
    }

    /// The full cycle `i -> i + 1 (mod p)`.
    pub fn full_cycle(p: usize) -> Self {
        Permutation((0..p).map(|i| ((i + 1) % p) as u8).collect())
    }

    pub fn degree(&self) -> usize {
        self.0.len()
    }

    pub fn images(&self) -> &[u8] {
        &self.0
    }

    pub fn apply(&self, i: usize) -> usize {
        self.0[i] as usize
    }

    /// `self ∘ other`, i.e. `other` first.
    pub fn compose(&self, other: &Permutation) -> Permutation {
        Permutation(other.0.iter().map(|&i| self.0[i as usize]).collect())
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0u8; self.0.len()];
        for (i, &j) in self.0.iter().enumerate() {
            inv[j as usize] = i as u8;
        }
        Permutation(inv)
    }

    pub fn cycles(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.0.len()];
        let mut out = Vec::new();
        for start in 0..self.0.len() {
            if seen[start] {
                continue;
            }
            let mut cycle = Vec::new();
            let mut i = start;
            while !seen[i] {
                seen[i] = true;
                cycle.push(i);
                i = self.0[i] as usize;
            }
            out.push(cycle);
        }
        out
    }

    /// `#(σ)`, the number of cycles.
    pub fn cycle_count(&self) -> usize {
        self.cycles().len()
    }

    /// Length `p - #(σ)`: the minimal number of transpositions.
    pub fn length(&self) -> usize {
        self.degree() - self.cycle_count()
    }

    pub fn is_geodesic(&self) -> bool {
        let p = self.degree();
        let gamma = Permutation::full_cycle(p);
        self.cycle_count() + self.inverse().compose(&gamma).cycle_count() == p + 1
    }

    /// Blocks of the partition given by the cycles, each sorted.
    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let mut blocks: Vec<Vec<usize>> = self
            .cycles()
            .into_iter()
            .map(|mut c| {
                c.sort_unstable();
                c
            })
            .collect();
        blocks.sort();
        blocks
    }
}

impl fmt::Display for Permutation {
    /// Cycle notation on `{1..p}`, fixed points included.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in self.cycles() {
            write!(f, "({})", c.iter().map(|i| i + 1).join(" "))?;
        }
        Ok(())
    }
}

fn check_p(p: usize) -> Result<()> {
    if p == 0 || p > MAX_P {
        return Err(Error::Guard(format!("p = {p} outside the enumeration range 1..={MAX_P}")));
    }
    Ok(())
}

fn nc_cache() -> &'static [OnceLock<Vec<Permutation>>; MAX_P + 1] {
    static CACHE: OnceLock<[OnceLock<Vec<Permutation>>; MAX_P + 1]> = OnceLock::new();
    CACHE.get_or_init(|| std::array::from_fn(|_| OnceLock::new()))
}

/// All geodesic permutations of degree `p`, in lexicographic one-line order.
pub fn enumerate_nc(p: usize) -> Result<Vec<Permutation>> {
    check_p(p)?;
    Ok(nc_cache()[p]
        .get_or_init(|| {
            (0..p as u8)
                .permutations(p)
                .map(Permutation)
                .filter(Permutation::is_geodesic)
                .collect()
        })
        .clone())
}

/// `counts[k]` = number of non-crossing partitions of `{1..p}` with `k` blocks.
pub fn block_count_histogram(p: usize) -> Result<Vec<u64>> {
    let mut hist = vec![0u64; p + 1];
    for sigma in enumerate_nc(p)? {
        hist[sigma.cycle_count()] += 1;
    }
    Ok(hist)
}

/// Whether every block of `a` lies inside a block of `b`.
pub fn refines(a: &Permutation, b: &Permutation) -> bool {
    let cb = b.cycles();
    let mut owner = vec![0usize; b.degree()];
    for (k, c) in cb.iter().enumerate() {
        for &i in c {
            owner[i] = k;
        }
    }
    a.cycles().iter().all(|c| c.iter().all(|&i| owner[i] == owner[c[0]]))
}

/// Geodesic order: `a ≤ b` when `|a| + |a⁻¹b| = |b|`.
pub fn geodesic_leq(a: &Permutation, b: &Permutation) -> bool {
    a.length() + a.inverse().compose(b).length() == b.length()
}

/// Number of multichains `σ_1 ≤ … ≤ σ_len` in `NC(p)` under refinement.
pub fn count_multichains(p: usize, length: usize) -> Result<u64> {
    if length == 0 {
        return Err(Error::Validation("multichain length must be at least 1".into()));
    }
    let elems = enumerate_nc(p)?;
    let n = elems.len();
    let below: Vec<Vec<usize>> =
        (0..n).map(|j| (0..n).filter(|&i| refines(&elems[i], &elems[j])).collect()).collect();
    let mut ending = vec![1u64; n];
    for _ in 1..length {
        ending = (0..n).map(|j| below[j].iter().map(|&i| ending[i]).sum()).collect();
    }
    Ok(ending.iter().sum())
}

/// `binom((length+1)p, p) / (length·p + 1)`.
pub fn fuss_catalan(p: usize, length: usize) -> BigUint {
    binomial((length + 1) * p, p) / BigUint::from(length * p + 1)
}

pub fn catalan(p: usize) -> BigUint {
    fuss_catalan(p, 1)
}

fn binomial(n: usize, k: usize) -> BigUint {
    let mut acc = BigUint::one();
    for i in 0..k {
        acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    acc
}

/// `Cat(p)^k`, the ceiling on the size of any admissible permutation set.
pub fn catalan_bound(p: usize, k: usize) -> Result<BigUint> {
    if p == 0 || k == 0 {
        return Err(Error::Validation("catalan_bound needs p, k >= 1".into()));
    }
    Ok(Pow::pow(catalan(p), k as u32))
}

/// Graphs whose admissible permutation sets are known in closed form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NcCase {
    SingleLoop,
    BlackHole,
    Oxygen,
}

impl FromStr for NcCase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single_loop" => Ok(NcCase::SingleLoop),
            "black_hole" => Ok(NcCase::BlackHole),
            "oxygen" => Ok(NcCase::Oxygen),
            other => Err(Error::Unsupported(format!("no permutation set for case '{other}'"))),
        }
    }
}

/// The permutation tuples (one entry per vertex, document order) whose sum
/// gives the leading moment coefficient for the listed graphs.
pub fn case_b(case: NcCase, p: usize) -> Result<Vec<Vec<Permutation>>> {
    let nc = enumerate_nc(p)?;
    let id = Permutation::identity(p);
    let gamma = Permutation::full_cycle(p);
    Ok(match case {
        NcCase::SingleLoop => nc.into_iter().map(|s| vec![s]).collect(),
        // id = β1 ≤ β2 ≤ β3 = γ: the middle element ranges over NC(p)
        NcCase::BlackHole => nc.into_iter().map(|s| vec![id.clone(), s, gamma.clone()]).collect(),
        // id ≤ β1 = β2 ≤ γ
        NcCase::Oxygen => nc.into_iter().map(|s| vec![s.clone(), s]).collect(),
    })
}

fn ratio_power(base: &BigInt, exp: i64) -> BigRational {
    let r = BigRational::from_integer(base.clone());
    if exp >= 0 {
        Pow::pow(r, exp as u32)
    } else {
        Pow::pow(r.recip(), (-exp) as u32)
    }
}

/// Evaluates the leading coefficient of `E Tr ρ_S^p` (the factor multiplying
/// `N^{-X(p-1)}`) as a sum over the tuples in `b`. Dimension factors are
/// products of leg ratios: `d_{S_i}` over surviving legs of vertex `i`,
/// `d_{T_i}` over traced legs, `d_{C_i}` over all its legs and `d_{E_ij}` over
/// edges joining `i` and `j`.
pub fn moment_from_b(b: &[Vec<Permutation>], marginal: &Marginal, p: usize) -> Result<BigRational> {
    let g = marginal.graph();
    let k = g.vertex_count();
    let prod = |legs: &mut dyn Iterator<Item = usize>| -> BigInt {
        legs.map(|l| BigInt::from(g.legs()[l].ratio)).product()
    };
    let d_s: Vec<BigInt> =
        (0..k).map(|v| prod(&mut g.legs_of(v).iter().copied().filter(|&l| !marginal.is_traced(l)))).collect();
    let d_t: Vec<BigInt> =
        (0..k).map(|v| prod(&mut g.legs_of(v).iter().copied().filter(|&l| marginal.is_traced(l)))).collect();
    let d_c: Vec<BigInt> = (0..k).map(|v| prod(&mut g.legs_of(v).iter().copied())).collect();
    let mut d_e = vec![vec![BigInt::one(); k]; k];
    for e in g.edges().iter().filter(|e| !e.is_loop()) {
        let (i, j) = (e.u.min(e.v), e.u.max(e.v));
        d_e[i][j] *= BigInt::from(e.ratio);
    }

    let gamma_inv = Permutation::full_cycle(p).inverse();
    let pi = p as i64;
    let mut total = BigRational::zero();
    for (n, tuple) in b.iter().enumerate() {
        if tuple.len() != k {
            return Err(Error::Validation(format!(
                "tuple {n} has {} permutations for {k} vertices",
                tuple.len()
            )));
        }
        if let Some(bad) = tuple.iter().find(|beta| beta.degree() != p) {
            return Err(Error::Validation(format!(
                "tuple {n} holds a permutation of degree {} (expected {p})",
                bad.degree()
            )));
        }
        let mut term = BigRational::one();
        for i in 0..k {
            term *= ratio_power(&d_s[i], gamma_inv.compose(&tuple[i]).cycle_count() as i64);
            term *= ratio_power(&d_t[i], tuple[i].cycle_count() as i64);
            term *= ratio_power(&d_c[i], -pi);
            for j in i + 1..k {
                let c = tuple[i].inverse().compose(&tuple[j]).cycle_count() as i64;
                term *= ratio_power(&d_e[i][j], c - pi);
            }
        }
        total += term;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{resolve_trace, Graph, TraceSpec};

    /// Brute force over all of S_p, independent of the cached enumeration.
    fn geodesic_count_bruteforce(p: usize) -> usize {
        let gamma = Permutation::full_cycle(p);
        (0..p as u8)
            .permutations(p)
            .filter(|v| {
                let b = Permutation(v.clone());
                b.cycle_count() + b.inverse().compose(&gamma).cycle_count() == p + 1
            })
            .count()
    }

    #[test]
    fn cycle_counts() {
        assert_eq!(Permutation::identity(5).cycle_count(), 5);
        assert_eq!(Permutation::full_cycle(5).cycle_count(), 1);
        assert_eq!(Permutation::full_cycle(3).to_string(), "(1 2 3)");
        assert!(Permutation::from_images(vec![0, 0]).is_err());
    }

    #[test]
    fn nc_counts() {
        assert_eq!(enumerate_nc(1).unwrap(), vec![Permutation::identity(1)]);
        assert_eq!(geodesic_count_bruteforce(3), 5);
        assert_eq!(enumerate_nc(3).unwrap().len(), 5);
        assert_eq!(geodesic_count_bruteforce(6), 132);
        assert_eq!(enumerate_nc(6).unwrap().len(), 132);
        assert!(enumerate_nc(0).is_err());
        assert!(enumerate_nc(9).is_err());
    }

    #[test]
    fn nc_is_lexicographic() {
        let nc = enumerate_nc(4).unwrap();
        assert!(nc.windows(2).all(|w| w[0] < w[1]));
        // (1 3)(2 4) is the only crossing pairing of four points
        let crossing = Permutation::from_images(vec![2, 3, 0, 1]).unwrap();
        assert!(!nc.contains(&crossing));
        assert_eq!(nc.len(), 14);
    }

    #[test]
    fn multichain_examples() {
        for p in 1..=5 {
            assert_eq!(BigUint::from(count_multichains(p, 1).unwrap()), catalan(p));
        }
        assert_eq!(count_multichains(2, 2).unwrap(), 3);
        assert_eq!(count_multichains(3, 2).unwrap(), 12);
        assert!(count_multichains(3, 0).is_err());
    }

    #[test]
    fn multichains_bruteforce() {
        // all pairs in NC(3)^2 with the refinement test
        let nc = enumerate_nc(3).unwrap();
        let pairs = nc.iter().cartesian_product(nc.iter()).filter(|(a, b)| refines(a, b)).count();
        assert_eq!(pairs, 12);
    }

    #[test]
    fn refinement_matches_geodesic_order() {
        for p in 1..=6 {
            let nc = enumerate_nc(p).unwrap();
            for a in &nc {
                for b in &nc {
                    assert_eq!(refines(a, b), geodesic_leq(a, b), "p={p} a={a} b={b}");
                }
            }
        }
    }

    #[test]
    fn catalan_bounds() {
        assert_eq!(catalan_bound(1, 7).unwrap(), BigUint::one());
        assert_eq!(catalan_bound(3, 2).unwrap(), BigUint::from(25u32));
        let black_hole = case_b(NcCase::BlackHole, 4).unwrap().len();
        assert_eq!(BigUint::from(black_hole), catalan(4));
        assert!(BigUint::from(black_hole) <= catalan_bound(4, 3).unwrap());
    }

    #[test]
    fn case_sets() {
        assert_eq!(case_b(NcCase::BlackHole, 2).unwrap().len(), 2);
        let oxygen = case_b(NcCase::Oxygen, 2).unwrap();
        assert_eq!(oxygen.len(), 2);
        assert!(oxygen.iter().all(|t| t[0] == t[1]));
        for case in [NcCase::SingleLoop, NcCase::BlackHole, NcCase::Oxygen] {
            assert_eq!(case_b(case, 1).unwrap().len(), 1);
        }
        assert!(matches!("triangle".parse::<NcCase>(), Err(Error::Unsupported(_))));
    }

    fn black_hole(d1: u32, d2: u32, traced: [usize; 2]) -> Marginal {
        let g = Graph::new(["V1", "V2", "V3"], [(0, 1, d1), (1, 2, d2)]).unwrap();
        resolve_trace(&g, &TraceSpec::Legs(traced.into())).unwrap()
    }

    fn rational(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn black_hole_case_one_coefficient() {
        // d1^{-2p} d2^2 Σ_{σ∈NC(p)} (d1/d2)^{2#σ}
        for (d1, d2) in [(1, 2), (2, 3), (3, 1)] {
            let m = black_hole(d1, d2, [0, 1]);
            for p in 1..=5 {
                let b = case_b(NcCase::BlackHole, p).unwrap();
                let got = moment_from_b(&b, &m, p).unwrap();
                let mut expected = BigRational::zero();
                for sigma in enumerate_nc(p).unwrap() {
                    expected += Pow::pow(rational(d1 as i64 * d1 as i64, d2 as i64 * d2 as i64), sigma.cycle_count() as u32);
                }
                expected *= Pow::pow(rational(1, d1 as i64), 2 * p as u32) * rational(d2 as i64 * d2 as i64, 1);
                assert_eq!(got, expected, "d=({d1},{d2}) p={p}");
            }
        }
    }

    #[test]
    fn black_hole_case_two_coefficient() {
        // (d1 d2)^{1-p} times the number of chains
        let m = black_hole(2, 3, [0, 2]);
        for p in 1..=5 {
            let b = case_b(NcCase::BlackHole, p).unwrap();
            let got = moment_from_b(&b, &m, p).unwrap();
            let chains = BigRational::from_integer(BigInt::from(b.len()));
            assert_eq!(got, Pow::pow(rational(1, 6), (p - 1) as u32) * chains);
        }
    }

    #[test]
    fn oxygen_matches_black_hole() {
        let g = Graph::new(["V1", "V2"], [(0, 1, 1), (0, 1, 2)]).unwrap();
        let case1 = resolve_trace(&g, &TraceSpec::Legs([0, 1].into())).unwrap();
        let case2 = resolve_trace(&g, &TraceSpec::Legs([0, 3].into())).unwrap();
        for p in 1..=5 {
            let b = case_b(NcCase::Oxygen, p).unwrap();
            let bh = case_b(NcCase::BlackHole, p).unwrap();
            assert_eq!(moment_from_b(&b, &case1, p).unwrap(), moment_from_b(&bh, &black_hole(1, 2, [0, 1]), p).unwrap());
            assert_eq!(moment_from_b(&b, &case2, p).unwrap(), moment_from_b(&bh, &black_hole(1, 2, [0, 2]), p).unwrap());
        }
    }

    #[test]
    fn unit_ratios_count_tuples() {
        let m = black_hole(1, 1, [0, 1]);
        for p in 1..=6 {
            let b = case_b(NcCase::BlackHole, p).unwrap();
            assert_eq!(moment_from_b(&b, &m, p).unwrap(), BigRational::from_integer(BigInt::from(b.len())));
        }
    }

    #[test]
    fn trace_normalization() {
        let m = black_hole(3, 2, [0, 2]);
        let b = case_b(NcCase::BlackHole, 1).unwrap();
        assert_eq!(moment_from_b(&b, &m, 1).unwrap(), BigRational::one());
    }

    #[test]
    fn arity_errors() {
        let m = black_hole(1, 1, [0, 1]);
        let b = case_b(NcCase::Oxygen, 2).unwrap();
        assert!(matches!(moment_from_b(&b, &m, 2), Err(Error::Validation(_))));
        let b = case_b(NcCase::BlackHole, 3).unwrap();
        assert!(matches!(moment_from_b(&b, &m, 2), Err(Error::Validation(_))));
    }
}
