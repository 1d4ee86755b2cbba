use pathstar::rasp::{Machine, OpKind, Predicate, Seq};
use proptest::collection::vec;
use proptest::prelude::*;

const PREDICATES: [Predicate; 5] =
    [Predicate::Equals, Predicate::NotEquals, Predicate::Less, Predicate::Greater, Predicate::True];

fn pair(len: usize) -> impl Strategy<Value = (Vec<i64>, Vec<i64>, Vec<i64>)> {
    (vec(-3i64..4, len), vec(-3i64..4, len), vec(-50i64..50, len))
}

proptest! {
    #[test]
    fn causal_containment_random((k, q, _) in (1usize..12).prop_flat_map(pair), p in 0usize..5) {
        let (k, q) = (Seq::new(k), Seq::new(q));
        let mut m = Machine::new();
        let full = m.select(&k, &q, PREDICATES[p], false).unwrap();
        let causal = m.select(&k, &q, PREDICATES[p], true).unwrap();
        for qi in 0..k.len() {
            for kj in 0..k.len() {
                prop_assert_eq!(causal.get(qi, kj), full.get(qi, kj) && kj <= qi);
            }
        }
    }

    #[test]
    fn kqv_is_mean_of_select((k, q, v) in (1usize..12).prop_flat_map(pair), p in 0usize..5, causal in any::<bool>(), default in -99i64..0) {
        let (k, q, v) = (Seq::new(k), Seq::new(q), Seq::new(v));
        let mut a = Machine::new();
        let one = a.kqv(&k, &q, &v, PREDICATES[p], default, causal).unwrap();
        let mut b = Machine::new();
        let sel = b.select(&k, &q, PREDICATES[p], causal).unwrap();
        let two = b.aggr_mean(&sel, &v, default).unwrap();
        prop_assert_eq!(one, two);
        prop_assert_eq!(a.trace().attention_ops(), 1);
    }

    #[test]
    fn permutation_aggregation_is_exact(perm in Just((0..10i64).collect::<Vec<_>>()).prop_shuffle(), v in vec(-1000i64..1000, 10)) {
        // key j selected by query i iff perm[i] == j
        let mut m = Machine::new();
        let idx = m.indices(&Seq::new(v.clone()));
        let out = m.kqv(&idx, &Seq::new(perm.clone()), &Seq::new(v.clone()), Predicate::Equals, -99, false).unwrap();
        let expect: Vec<i64> = perm.iter().map(|&j| v[j as usize]).collect();
        prop_assert_eq!(out.values(), expect.as_slice());
        prop_assert_eq!(m.trace().truncations(), 0);
    }

    #[test]
    fn sel_width_counts_selected_keys((k, q, _) in (1usize..12).prop_flat_map(pair), p in 0usize..5, causal in any::<bool>()) {
        let (k, q) = (Seq::new(k), Seq::new(q));
        let mut m = Machine::new();
        let sel = m.select(&k, &q, PREDICATES[p], causal).unwrap();
        let w = m.sel_width(&sel);
        for qi in 0..k.len() {
            prop_assert_eq!(w[qi] as usize, sel.row(qi).iter().filter(|&&b| b).count());
        }
    }
}

#[test]
fn mean_truncates_toward_zero() {
    let mut m = Machine::new();
    let k = Seq::from([1, 1, 1]);
    let q = Seq::from([1, 1, 1]);
    let out = m.kqv(&k, &q, &Seq::from([-3, -4, 0]), Predicate::Equals, 0, false).unwrap();
    // -7 / 3 = -2.33 -> -2
    assert_eq!(out, Seq::from([-2, -2, -2]));
    assert_eq!(m.trace().truncations(), 3);
    assert_eq!(m.trace().count(OpKind::AggrMean), 1);
}

#[test]
fn trace_shape_depends_only_on_length() {
    fn program(m: &mut Machine, x: &Seq) -> Seq {
        let idx = m.indices(x);
        let sel = m.select(x, x, Predicate::Equals, false).unwrap();
        let w = m.sel_width(&sel);
        let once = m.equals(&w, &m.full(x, 1)).unwrap();
        let next = m.offset(&idx, 1);
        let y = m.kqv(&idx, &next, x, Predicate::Equals, -99, true).unwrap();
        m.where_(&once, &y, x).unwrap()
    }
    let kinds = |x: Vec<i64>| {
        let mut m = Machine::new();
        program(&mut m, &Seq::new(x));
        m.trace().records().iter().map(|r| (r.kind, r.causal)).collect::<Vec<_>>()
    };
    assert_eq!(kinds(vec![1, 2, 3, 4]), kinds(vec![9, 9, 9, 9]));
}
