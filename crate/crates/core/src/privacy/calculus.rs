use std::cmp::Ordering;
use std::collections::BTreeMap;

use num_traits::{One, Zero};
use rayon::prelude::*;

use super::{Epsilon, EpsilonResult, Instance, Mechanism, PrivacyError, Witness};
use crate::dltts::{Dltts, StateId, DELTA, RESPONSE};
use crate::metrics::{hamming, MetricContext};
use crate::scalar::{Scalar, FLOAT_TOLERANCE};
use crate::Rational;

/// Output sets are enumerated exhaustively up to this many outputs.
pub const MAX_ENUMERATED_OUTPUTS: usize = 20;

/// How far apart two inputs are, for ε budgets that scale with distance.
#[derive(Clone, Debug)]
pub enum Adjacency<'a> {
    /// Generalized Hamming distance between the input tuples.
    Hamming,
    /// `ρ` between the input tuples.
    Rho(MetricContext<'a>),
    /// Distances given by name; looked up in either order.
    Table(BTreeMap<(String, String), Rational>),
}

impl Adjacency<'_> {
    pub fn distance(&self, a: &Instance, b: &Instance) -> Result<Rational, PrivacyError> {
        let uncomparable = || PrivacyError::Uncomparable(a.name.clone(), b.name.clone());
        match self {
            Adjacency::Table(t) => t
                .get(&(a.name.clone(), b.name.clone()))
                .or_else(|| t.get(&(b.name.clone(), a.name.clone())))
                .cloned()
                .ok_or_else(|| PrivacyError::NoDistance(a.name.clone(), b.name.clone())),
            Adjacency::Hamming => {
                let (x, y) = tuples(a, b)?;
                hamming(x, y)
                    .map(|n| Rational::from_integer(n.into()))
                    .ok_or_else(uncomparable)
            }
            Adjacency::Rho(ctx) => {
                let (x, y) = tuples(a, b)?;
                ctx.distance::<Rational>(x, y)?.ok_or_else(uncomparable)
            }
        }
    }
}

fn tuples<'a>(
    a: &'a Instance,
    b: &'a Instance,
) -> Result<(&'a crate::schema::Tuple, &'a crate::schema::Tuple), PrivacyError> {
    let x = a.tuple.as_ref().ok_or_else(|| PrivacyError::NoTuple(a.name.clone()))?;
    let y = b.tuple.as_ref().ok_or_else(|| PrivacyError::NoTuple(b.name.clone()))?;
    Ok((x, y))
}

/// `ln(num/den)`, exact when the scalar is.
fn log_of<S: Scalar>(num: &S, den: &S, scale: Rational) -> Epsilon {
    match (num.to_rational(), den.to_rational()) {
        (Some(n), Some(d)) => Epsilon::scaled_ln(scale, n / d),
        _ => Epsilon::Real(crate::scalar::ratio_to_f64(&scale) * (num.to_f64() / den.to_f64()).ln()),
    }
}

/// `p ≤ e^ε · q`.
fn within<S: Scalar>(p: &S, q: &S, eps: &Epsilon) -> bool {
    if eps.is_unbounded() || *p <= S::zero() {
        return true;
    }
    if *q <= S::zero() {
        return false;
    }
    if let (Some(e), Some(p), Some(q)) = (eps.exp_exact(), p.to_rational(), q.to_rational()) {
        return p <= e * q;
    }
    p.to_f64().ln() - q.to_f64().ln() <= eps.to_f64() + FLOAT_TOLERANCE
}

/// The least ε with which `v` and `v'` are indistinguishable on `alpha`.
pub fn min_indist_epsilon<S: Scalar>(
    m: &Mechanism<S>,
    v: &str,
    w: &str,
    alpha: &str,
) -> Result<EpsilonResult, PrivacyError> {
    let (p, q) = (m.prob(v, alpha)?, m.prob(w, alpha)?);
    Ok(pair_result(&p, &q, Rational::one(), v, w, alpha))
}

fn pair_result<S: Scalar>(p: &S, q: &S, scale: Rational, v: &str, w: &str, alpha: &str) -> EpsilonResult {
    let witness = Some(Witness {
        left: v.to_string(),
        right: w.to_string(),
        outputs: vec![alpha.to_string()],
    });
    let zero = S::zero();
    let epsilon = match (p.is_zero(), q.is_zero()) {
        (true, true) => {
            return EpsilonResult {
                epsilon: Epsilon::zero(),
                witness,
                both_zero: true,
            }
        }
        (true, false) | (false, true) => Epsilon::Unbounded,
        _ if *p >= *q && *q > zero => log_of(p, q, scale),
        _ => log_of(q, p, scale),
    };
    EpsilonResult {
        epsilon,
        witness,
        both_zero: false,
    }
}

/// Both `p ≤ e^ε p'` and `p' ≤ e^ε p` on `alpha`.
pub fn is_eps_indistinguishable<S: Scalar>(
    m: &Mechanism<S>,
    v: &str,
    w: &str,
    alpha: &str,
    eps: &Epsilon,
) -> Result<bool, PrivacyError> {
    let (p, q) = (m.prob(v, alpha)?, m.prob(w, alpha)?);
    Ok(within(&p, &q, eps) && within(&q, &p, eps))
}

/// `|ln(p/p')| / dist(v, v')` under the given adjacency.
pub fn min_eps_scaled_indist<S: Scalar>(
    m: &Mechanism<S>,
    v: &str,
    w: &str,
    alpha: &str,
    adjacency: &Adjacency<'_>,
) -> Result<EpsilonResult, PrivacyError> {
    let (a, b) = (&m.inputs()[m.input_index(v)?], &m.inputs()[m.input_index(w)?]);
    let dist = adjacency.distance(a, b)?;
    let (p, q) = (m.prob(v, alpha)?, m.prob(w, alpha)?);
    if dist.is_zero() {
        let mut out = pair_result(&p, &q, Rational::one(), v, w, alpha);
        if p != q {
            out.epsilon = Epsilon::Unbounded;
        }
        return Ok(out);
    }
    Ok(pair_result(&p, &q, Rational::one() / dist, v, w, alpha))
}

/// [`min_eps_scaled_indist`] with `ρ` as the distance.
pub fn min_eps_rho_indist<S: Scalar>(
    m: &Mechanism<S>,
    v: &str,
    w: &str,
    alpha: &str,
    ctx: MetricContext<'_>,
) -> Result<EpsilonResult, PrivacyError> {
    min_eps_scaled_indist(m, v, w, alpha, &Adjacency::Rho(ctx))
}

/// Best ratio found so far for one ordered pair; `ratio == None` is unbounded.
#[derive(Clone, Debug)]
struct Candidate<S> {
    ratio: Option<(S, S)>,
    scale: Rational,
    left: usize,
    right: usize,
    mask: u32,
}

impl<S: Scalar> Candidate<S> {
    fn epsilon(&self) -> Epsilon {
        match &self.ratio {
            None => Epsilon::Unbounded,
            Some((n, d)) => log_of(n, d, self.scale.clone()),
        }
    }

    fn cmp(&self, other: &Self) -> Ordering {
        match (&self.ratio, &other.ratio) {
            (Some((n1, d1)), Some((n2, d2))) if self.scale == other.scale => {
                // n1/d1 vs n2/d2 with positive denominators
                (n1.clone() * d2.clone())
                    .partial_cmp(&(n2.clone() * d1.clone()))
                    .unwrap_or(Ordering::Equal)
            }
            _ => self.epsilon().compare(&other.epsilon()),
        }
    }

    fn into_result<T: Scalar>(self, m: &Mechanism<T>) -> EpsilonResult {
        let outputs = (0..m.outputs().len())
            .filter(|o| self.mask & (1 << o) != 0)
            .map(|o| m.outputs()[o].clone())
            .collect();
        EpsilonResult {
            epsilon: self.epsilon(),
            witness: Some(Witness {
                left: m.inputs()[self.left].name.clone(),
                right: m.inputs()[self.right].name.clone(),
                outputs,
            }),
            both_zero: false,
        }
    }
}

/// `Prob[M(i) ∈ S]` for every output set `S`, indexed by bitmask.
fn subset_sums<S: Scalar>(row: &[S]) -> Vec<S> {
    let mut sums = vec![S::zero(); 1 << row.len()];
    for mask in 1usize..sums.len() {
        let low = mask.trailing_zeros() as usize;
        sums[mask] = sums[mask & (mask - 1)].clone() + row[low].clone();
    }
    sums
}

/// Largest `Prob[M(i) ∈ S] / Prob[M(j) ∈ S]` over all nonempty `S`.
fn worst_set<S: Scalar>(m: &Mechanism<S>, i: usize, j: usize, scale: Rational) -> Option<Candidate<S>> {
    let (a, b) = (subset_sums(m.row(i)), subset_sums(m.row(j)));
    let mut best: Option<Candidate<S>> = None;
    for mask in 1..a.len() {
        let (num, den) = (&a[mask], &b[mask]);
        if num.is_zero() {
            continue;
        }
        let cand = Candidate {
            ratio: (!den.is_zero()).then(|| (num.clone(), den.clone())),
            scale: scale.clone(),
            left: i,
            right: j,
            mask: mask as u32,
        };
        if best.as_ref().is_none_or(|b| cand.cmp(b) == Ordering::Greater) {
            best = Some(cand);
        }
        if best.as_ref().is_some_and(|b| b.ratio.is_none()) {
            break;
        }
    }
    best
}

fn check_size<S: Scalar>(m: &Mechanism<S>) -> Result<(), PrivacyError> {
    if m.outputs().len() > MAX_ENUMERATED_OUTPUTS {
        return Err(PrivacyError::TooManyOutputs(m.outputs().len()));
    }
    Ok(())
}

fn pick<S: Scalar>(found: Vec<Candidate<S>>) -> Option<Candidate<S>> {
    found
        .into_iter()
        .reduce(|a, b| if b.cmp(&a) == Ordering::Greater { b } else { a })
}

/// The least ε for which the mechanism is ε-LDP: every pair of inputs that
/// can give a common answer, every set of answers.
pub fn min_ldp_epsilon<S: Scalar>(m: &Mechanism<S>) -> Result<EpsilonResult, PrivacyError> {
    check_size(m)?;
    let n = m.inputs().len();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| {
            i != j
                && m.row(i)
                    .iter()
                    .zip(m.row(j))
                    .any(|(p, q)| *p > S::zero() && *q > S::zero())
        })
        .collect();
    let found: Vec<Candidate<S>> = pairs
        .par_iter()
        .filter_map(|&(i, j)| worst_set(m, i, j, Rational::one()))
        .collect();
    Ok(pick(found).map_or_else(EpsilonResult::zero, |c| c.into_result(m)))
}

fn resolve_pairs<S: Scalar>(
    m: &Mechanism<S>,
    pairs: Option<&[(String, String)]>,
) -> Result<Vec<(usize, usize)>, PrivacyError> {
    match pairs {
        Some(ps) => ps
            .iter()
            .map(|(a, b)| Ok((m.input_index(a)?, m.input_index(b)?)))
            .collect(),
        None => {
            let n = m.inputs().len();
            Ok((0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect())
        }
    }
}

/// The least ε such that `Prob[M(D) ∈ S] ≤ e^{ε·dist(D, D')} Prob[M(D') ∈ S]`
/// for every listed pair (all pairs by default), both ways round.
pub fn min_dp_epsilon<S: Scalar>(
    m: &Mechanism<S>,
    adjacency: &Adjacency<'_>,
    pairs: Option<&[(String, String)]>,
) -> Result<EpsilonResult, PrivacyError> {
    check_size(m)?;
    let pairs = resolve_pairs(m, pairs)?;
    let dists = pairs
        .iter()
        .map(|&(i, j)| adjacency.distance(&m.inputs()[i], &m.inputs()[j]))
        .collect::<Result<Vec<_>, _>>()?;
    let found: Vec<Candidate<S>> = pairs
        .par_iter()
        .zip(&dists)
        .flat_map_iter(|(&(i, j), d)| {
            [(i, j), (j, i)].into_iter().filter_map(move |(a, b)| {
                if d.is_zero() {
                    let same = m.row(a) == m.row(b);
                    return (!same).then(|| Candidate {
                        ratio: None,
                        scale: Rational::one(),
                        left: a,
                        right: b,
                        mask: 0,
                    });
                }
                worst_set(m, a, b, Rational::one() / d.clone())
            })
        })
        .collect();
    Ok(pick(found).map_or_else(EpsilonResult::zero, |c| c.into_result(m)))
}

/// Whether the mechanism meets `Prob[M(D) ∈ S] ≤ e^{ε·dist} Prob[M(D') ∈ S]`
/// at the given ε.
pub fn check_dp<S: Scalar>(
    m: &Mechanism<S>,
    adjacency: &Adjacency<'_>,
    pairs: Option<&[(String, String)]>,
    eps: &Epsilon,
) -> Result<bool, PrivacyError> {
    check_size(m)?;
    for (i, j) in resolve_pairs(m, pairs)? {
        let d = adjacency.distance(&m.inputs()[i], &m.inputs()[j])?;
        let budget = match eps {
            Epsilon::Unbounded => return Ok(true),
            Epsilon::Log { scale, ratio } => Epsilon::scaled_ln(scale.clone() * d, ratio.clone()),
            Epsilon::Real(x) => Epsilon::Real(x * crate::scalar::ratio_to_f64(&d)),
        };
        let (a, b) = (subset_sums(m.row(i)), subset_sums(m.row(j)));
        for mask in 1..a.len() {
            if !within(&a[mask], &b[mask], &budget) || !within(&b[mask], &a[mask], &budget) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Groups the branches leaving `state` (by target) into classes of inputs
/// that are ε-indistinguishable on `alpha`, closed transitively.
pub fn epsilon_equivalent_labels<S: Scalar>(
    dltts: &Dltts<S>,
    state: &str,
    alpha: &str,
    eps: &Epsilon,
) -> Result<Vec<Vec<StateId>>, PrivacyError> {
    let m = Mechanism::from_branches(dltts, state, alpha)?;
    let targets: Vec<StateId> = dltts
        .outgoing(state)
        .filter(|t| t.action != DELTA && t.action != RESPONSE)
        .flat_map(|t| t.branches.iter().map(|b| b.to.clone()))
        .collect();
    let n = targets.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for i in 0..n {
        for j in i + 1..n {
            let (vi, vj) = (&m.inputs()[i].name, &m.inputs()[j].name);
            if is_eps_indistinguishable(&m, vi, vj, alpha, eps)? {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                parent[ri.max(rj)] = ri.min(rj);
            }
        }
    }
    let mut classes: BTreeMap<usize, Vec<StateId>> = BTreeMap::new();
    for (i, t) in targets.into_iter().enumerate() {
        let root = find(&mut parent, i);
        classes.entry(root).or_default().push(t);
    }
    Ok(classes.into_values().collect())
}
