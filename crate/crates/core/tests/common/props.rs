//! Randomized checks shared by the property tests and the acceptance run.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use dltts::attack::multiset_compare;
use dltts::dltts::{Branch, Dltts, DlttsBuilder, ExternalBases, Knowledge, Label, Tag};
use dltts::metrics::{d_eucl, d_nom, d_num, d_wp, hamming, IntervalMeasureMode, MetricContext};
use dltts::privacy::{min_ldp_epsilon, Epsilon, Instance, Mechanism};
use dltts::schema::{load_schema, load_table, Cell, Signature, TaxonomyTree, Tuple, TuplePattern, Value};
use dltts::{Rational, Scalar};
use proptest::prelude::*;
use proptest::test_runner::TestRunner;

pub const CASES: u32 = 10_000;

fn cfg() -> ProptestConfig {
    ProptestConfig {
        cases: CASES,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

fn check<S: Strategy>(strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String> {
    TestRunner::new(cfg()).run(&strategy, test).map_err(|e| e.to_string())
}

fn r(n: i64, d: i64) -> Rational {
    Rational::from_ratio(n, d)
}

fn zero() -> Rational {
    r(0, 1)
}

fn assert_metric(d: impl Fn(usize, usize) -> Rational, n: usize) -> Result<(), TestCaseError> {
    for i in 0..n {
        prop_assert_eq!(d(i, i), zero());
        for j in 0..n {
            let dij = d(i, j);
            prop_assert!(dij >= zero() && dij <= r(1, 1));
            prop_assert_eq!(&dij, &d(j, i));
            if i != j {
                prop_assert!(dij > zero(), "distinct points at distance 0");
            }
            for k in 0..n {
                prop_assert!(d(i, k) <= dij.clone() + d(j, k), "triangle {i} {j} {k}");
            }
        }
    }
    Ok(())
}

fn atom_set() -> impl Strategy<Value = BTreeSet<String>> {
    prop::collection::btree_set(prop::sample::select(vec!["a", "b", "c", "d", "e", "f"]), 1..=6)
        .prop_map(|s| s.into_iter().map(String::from).collect())
}

fn numerval() -> impl Strategy<Value = Value> {
    prop_oneof![
        (0i64..=100).prop_map(Value::int),
        (0i64..=100, 0i64..=100)
            .prop_filter("proper interval", |(a, b)| a != b)
            .prop_map(|(a, b)| Value::interval(a.min(b), a.max(b)).unwrap()),
    ]
}

/// Child → parent edges of a random tree on `n0..n{k}` rooted at `n0`.
fn tree() -> impl Strategy<Value = TaxonomyTree> {
    (1usize..30)
        .prop_flat_map(|n| prop::collection::vec(any::<prop::sample::Index>(), n))
        .prop_map(|picks| {
            let parent = picks
                .iter()
                .enumerate()
                .map(|(i, p)| (format!("n{}", i + 1), format!("n{}", p.index(i + 1))))
                .collect();
            TaxonomyTree::new("T", "n0", parent).unwrap()
        })
}

fn dedup<T: PartialEq>(mut v: Vec<T>) -> Vec<T> {
    let mut out = Vec::new();
    while let Some(x) = v.pop() {
        if !out.contains(&x) {
            out.push(x);
        }
    }
    out
}

pub fn nominal_distance_is_a_metric() -> Result<(), String> {
    check(prop::collection::vec(atom_set(), 3), |sets| {
        let sets = dedup(sets);
        assert_metric(|i, j| d_nom::<Rational>(&sets[i], &sets[j]).unwrap(), sets.len())
    })
}

pub fn integer_set_distance_is_a_metric() -> Result<(), String> {
    check(prop::collection::vec(numerval(), 3), |vals| {
        let vals = dedup(vals);
        assert_metric(
            |i, j| d_num::<Rational>(&vals[i], &vals[j], IntervalMeasureMode::IntegerSet).unwrap(),
            vals.len(),
        )
    })
}

pub fn euclidean_distance_is_a_metric() -> Result<(), String> {
    check((prop::collection::vec(-50i64..50, 3), 100i64..200), |(xs, d)| {
        let xs: Vec<Rational> = dedup(xs).into_iter().map(|x| r(x, 7)).collect();
        let d = r(d, 7);
        assert_metric(|i, j| d_eucl::<Rational>(&xs[i], &xs[j], &d).unwrap(), xs.len())
    })
}

pub fn wu_palmer_distance_is_a_metric() -> Result<(), String> {
    check(
        (tree(), prop::collection::vec(any::<prop::sample::Index>(), 3)),
        |(t, picks)| {
            let nodes: Vec<String> = t.nodes().map(String::from).collect();
            let chosen = dedup(picks.iter().map(|p| nodes[p.index(nodes.len())].clone()).collect());
            assert_metric(|i, j| d_wp::<Rational>(&t, &chosen[i], &chosen[j]).unwrap(), chosen.len())
        },
    )
}

const MIXED: &str = r#"
[[column]]
name = "Name"
class = "nominal"
group = "identifier"

[[column]]
name = "Age"
class = "numerval"
group = "quasi-identifier"

[[column]]
name = "Salary"
class = "numerical"
group = "quasi-identifier"
normalizer = "100"

[[column]]
name = "Ailment"
class = "taxoral"
group = "sensitive"
taxonomy = "Ailment"

[[taxonomy]]
name = "Ailment"
root = "Ailment"
[taxonomy.parent]
Heart-Disease = "Ailment"
Viral-Infection = "Ailment"
Flu = "Viral-Infection"
CoVid = "Viral-Infection"
"#;

fn mixed_tuple(sig: &Signature) -> impl Strategy<Value = Tuple> {
    let cols = sig.columns().to_vec();
    (
        atom_set(),
        numerval(),
        0i64..=100,
        prop::sample::select(vec!["Ailment", "Heart-Disease", "Viral-Infection", "Flu", "CoVid"]),
    )
        .prop_map(move |(name, age, salary, ailment)| {
            let name = Value::set(name.iter().map(String::as_str)).unwrap();
            Tuple::new(
                cols.clone(),
                vec![name, age, Value::number(r(salary, 1)), Value::taxon(ailment)],
            )
        })
}

fn sig_strategy() -> (Signature, impl Strategy<Value = (Tuple, Tuple)>) {
    let sig = load_schema(MIXED).unwrap().signature;
    let pair = (mixed_tuple(&sig), mixed_tuple(&sig));
    (sig, pair)
}

pub fn rho_is_bounded_by_hamming() -> Result<(), String> {
    let (sig, pairs) = sig_strategy();
    let ctx = MetricContext::new(&sig, IntervalMeasureMode::IntegerSet);
    check(pairs, |(t, u)| {
        let h = hamming(&t, &u).expect("same signature");
        let rho: Rational = ctx
            .rho(std::slice::from_ref(&t), std::slice::from_ref(&u))
            .unwrap()
            .expect("comparable");
        prop_assert!(rho <= r(h as i64, 1), "rho {} > d_h {}", rho, h);
        Ok(())
    })
}

/// M ≻ N iff M ≠ N and every element of N \ M is dominated by some
/// element of M \ N.
fn dershowitz_manna(m: &[i64], n: &[i64]) -> Ordering {
    let count = |xs: &[i64]| {
        let mut c: BTreeMap<i64, i64> = BTreeMap::new();
        for x in xs {
            *c.entry(*x).or_default() += 1;
        }
        c
    };
    let (cm, cn) = (count(m), count(n));
    let diff = |a: &BTreeMap<i64, i64>, b: &BTreeMap<i64, i64>| -> Vec<i64> {
        a.iter()
            .filter(|(k, v)| **v > *b.get(k).unwrap_or(&0))
            .map(|(k, _)| *k)
            .collect()
    };
    let (m_minus_n, n_minus_m) = (diff(&cm, &cn), diff(&cn, &cm));
    let greater = |big: &[i64], small: &[i64]| small.iter().all(|y| big.iter().any(|x| x > y));
    if cm == cn {
        Ordering::Equal
    } else if greater(&m_minus_n, &n_minus_m) {
        Ordering::Greater
    } else if greater(&n_minus_m, &m_minus_n) {
        Ordering::Less
    } else {
        panic!("multisets over a total order are always comparable");
    }
}

pub fn multiset_order_matches_dershowitz_manna() -> Result<(), String> {
    let pairs = (1usize..=5).prop_flat_map(|k| (prop::collection::vec(0i64..6, k), prop::collection::vec(0i64..6, k)));
    check(pairs, |(m, n)| {
        let as_q = |xs: &[i64]| xs.iter().map(|x| r(*x, 4)).collect::<Vec<_>>();
        prop_assert_eq!(multiset_compare(&as_q(&m), &as_q(&n)), dershowitz_manna(&m, &n));
        prop_assert_eq!(multiset_compare(&as_q(&n), &as_q(&m)), dershowitz_manna(&m, &n).reverse());
        Ok(())
    })
}

/// Largest `P(S|x) / P(S|x')` over non-empty output sets and input pairs
/// that can give a common answer; `None` means unbounded.
fn ldp_oracle(rows: &[Vec<Rational>]) -> Option<Rational> {
    let outs = rows[0].len();
    let mut best = r(1, 1);
    for x in rows {
        for y in rows {
            if !(0..outs).any(|k| x[k] > zero() && y[k] > zero()) {
                continue;
            }
            for mask in 1u32..(1 << outs) {
                let sum = |row: &[Rational]| {
                    (0..outs)
                        .filter(|k| mask & (1 << k) != 0)
                        .fold(zero(), |a, k| a + row[k].clone())
                };
                let (p, q) = (sum(x), sum(y));
                if p > zero() && q == zero() {
                    return None;
                }
                if q > zero() && p.clone() / q.clone() > best {
                    best = p / q;
                }
            }
        }
    }
    Some(best)
}

fn mechanism_rows() -> impl Strategy<Value = Vec<Vec<Rational>>> {
    (1usize..=4, 1usize..=4).prop_flat_map(|(n, k)| {
        prop::collection::vec(
            prop::collection::vec(0i64..5, k).prop_filter("non-zero row", |w| w.iter().any(|x| *x > 0)),
            n,
        )
        .prop_map(|rows| {
            rows.into_iter()
                .map(|w| {
                    let total: i64 = w.iter().sum();
                    w.iter().map(|x| r(*x, total)).collect()
                })
                .collect()
        })
    })
}

pub fn ldp_matches_exhaustive_search() -> Result<(), String> {
    check(mechanism_rows(), |rows| {
        let inputs = (0..rows.len()).map(|i| Instance::named(format!("x{i}"))).collect();
        let outputs = (0..rows[0].len()).map(|k| format!("y{k}")).collect();
        let m = Mechanism::new(inputs, outputs, rows.clone()).unwrap();
        let got = min_ldp_epsilon(&m).unwrap().epsilon;
        match ldp_oracle(&rows) {
            None => prop_assert_eq!(got, Epsilon::Unbounded),
            Some(ratio) => prop_assert_eq!(got.compare(&Epsilon::ln(ratio)), Ordering::Equal),
        }
        Ok(())
    })
}

const SMALL: &str = r#"
[[column]]
name = "Name"
class = "nominal"
group = "identifier"

[[column]]
name = "Dept"
class = "nominal"
group = "quasi-identifier"

[[column]]
name = "Ailment"
class = "taxoral"
group = "sensitive"
taxonomy = "Ailment"

[[taxonomy]]
name = "Ailment"
root = "Ailment"
[taxonomy.parent]
Cancer = "Ailment"
Viral-Infection = "Ailment"
Flu = "Viral-Infection"
CoVid = "Viral-Infection"
"#;

const NAMES: [&str; 3] = ["Ann", "Bob", "Cy"];
const DEPTS: [&str; 2] = ["Maths", "Physics"];
const AILMENTS: [&str; 5] = ["Ailment", "Cancer", "Viral-Infection", "Flu", "CoVid"];

fn cell(pick: usize, options: &[&str], taxon: bool) -> Cell {
    match pick.checked_sub(1).and_then(|i| options.get(i)) {
        None => Cell::Any,
        Some(v) if taxon => Cell::Is(Value::taxon(*v)),
        Some(v) => Cell::Is(Value::atom(*v)),
    }
}

fn fact() -> impl Strategy<Value = TuplePattern> {
    (0usize..=3, 0usize..=2, 0usize..=5).prop_map(|(n, d, a)| {
        TuplePattern::positive(vec![cell(n, &NAMES, false), cell(d, &DEPTS, false), cell(a, &AILMENTS, true)])
    })
}

fn base_rows() -> impl Strategy<Value = Vec<(usize, usize, usize)>> {
    prop::collection::vec((0usize..3, 0usize..2, 0usize..5), 0..=4)
}

fn externals(sig: &Signature, rows: &[(usize, usize, usize)]) -> ExternalBases {
    let mut csv = String::from("Name,Dept,Ailment\n");
    for (n, d, a) in rows {
        csv.push_str(&format!("{},{},{}\n", NAMES[*n], DEPTS[*d], AILMENTS[*a]));
    }
    ExternalBases {
        relations: vec![load_table("base", &csv, sig, None).unwrap()],
        counts: Vec::new(),
    }
}

pub fn saturation_is_a_closure() -> Result<(), String> {
    let sig = load_schema(SMALL).unwrap().signature;
    let input = (
        base_rows(),
        prop::collection::vec(fact(), 0..=3),
        prop::collection::vec(fact(), 0..=2),
    );
    check(input, |(rows, facts, extra)| {
        let ext = externals(&sig, &rows);
        let k = Knowledge::new(&sig, &ext);
        let small = Tag::new(facts.clone());
        let big = Tag::new(facts.into_iter().chain(extra));
        let once = k.saturate(&small).unwrap();
        prop_assert!(small.is_subset(&once));
        prop_assert_eq!(&k.saturate(&once).unwrap(), &once);
        prop_assert!(once.is_subset(&k.saturate(&big).unwrap()));
        Ok(())
    })
}

/// Child state, weight and label of one branch.
type Kid = (usize, i64, Label);

/// A random tree-shaped system: each state's children split over one or
/// more transitions with positive weights.
fn system() -> impl Strategy<Value = Dltts<Rational>> {
    (2usize..10)
        .prop_flat_map(|n| {
            (
                prop::collection::vec(any::<prop::sample::Index>(), n - 1),
                prop::collection::vec(1i64..4, n - 1),
                prop::collection::vec(0usize..2, n - 1),
                prop::collection::vec(fact(), n - 1),
                prop::collection::vec(any::<bool>(), n - 1),
            )
        })
        .prop_map(|(parents, weights, groups, facts, tagged)| {
            let sig = load_schema(SMALL).unwrap().signature;
            let mut groups_of: BTreeMap<(usize, usize), Vec<Kid>> = BTreeMap::new();
            for i in 0..parents.len() {
                let child = i + 1;
                let mut label = Label::text(format!("q{child}"));
                if tagged[i] {
                    label = label.with_fact(facts[i].clone());
                }
                groups_of
                    .entry((parents[i].index(child), groups[i]))
                    .or_default()
                    .push((child, weights[i], label));
            }
            let mut b = DlttsBuilder::new("s0");
            for ((from, g), kids) in groups_of {
                let total: i64 = kids.iter().map(|k| k.1).sum();
                let branches = kids
                    .into_iter()
                    .map(|(c, w, l)| Branch::new(format!("s{c}"), r(w, total), l))
                    .collect();
                b = b.transition(format!("s{from}"), format!("a{g}"), branches);
            }
            let ext = ExternalBases::default();
            b.build_with(&Knowledge::new(&sig, &ext)).unwrap()
        })
}

type Mutation = fn(&mut Dltts<Rational>);

fn mutations() -> Vec<(&'static str, Mutation)> {
    vec![
        ("probability sum", |d| {
            let b = &mut d.transitions_mut()[0].branches[0];
            b.prob = b.prob.clone() * r(2, 1);
        }),
        ("zero probability", |d| d.transitions_mut()[0].branches[0].prob = zero()),
        ("unknown target", |d| d.transitions_mut()[0].branches[0].to = "ghost".into()),
        ("repeated successor", |d| {
            let t = &mut d.transitions_mut()[0];
            let dup = t.branches[0].clone();
            t.branches.push(dup);
        }),
        ("empty transition", |d| d.transitions_mut()[0].branches.clear()),
        ("same successors", |d| {
            let mut t = d.transitions()[0].clone();
            t.action.push('\'');
            d.transitions_mut().push(t);
        }),
        ("stop has outgoing", |d| {
            let mut t = d.transitions()[0].clone();
            t.from = d.stop().to_string();
            d.transitions_mut().push(t);
        }),
        ("stop has tag", |d| {
            let stop = d.stop().to_string();
            d.info_mut(&stop).unwrap().tag = Some(Tag::top());
        }),
        ("initial tag", |d| {
            let init = d.initial().to_string();
            let extra = TuplePattern::positive(vec![Cell::Any; 3]);
            d.info_mut(&init).unwrap().tag = Some(Tag::new([extra]));
        }),
        ("loose tag", |d| {
            let to = d.transitions()[0].branches[0].to.clone();
            let extra = TuplePattern::positive(vec![Cell::Is(Value::atom("Zed")), Cell::Any, Cell::Any]);
            let info = d.info_mut(&to).unwrap();
            info.tag.as_mut().unwrap().insert(extra.clone());
            info.saturated.as_mut().unwrap().insert(extra);
        }),
        ("saturation shrinks", |d| {
            let to = d.transitions()[0].branches[0].to.clone();
            let extra = TuplePattern::positive(vec![Cell::Is(Value::atom("Zed")), Cell::Any, Cell::Any]);
            d.info_mut(&to).unwrap().tag.as_mut().unwrap().insert(extra);
        }),
    ]
}

pub fn validate_accepts_built_systems_and_rejects_mutants() -> Result<(), String> {
    check(system(), |d| {
        prop_assert_eq!(d.validate(), vec![]);
        for (name, mutate) in mutations() {
            let mut m = d.clone();
            mutate(&mut m);
            prop_assert!(!m.validate().is_empty(), "mutation '{}' went unnoticed", name);
        }
        Ok(())
    })
}
