use proptest::prelude::*;

use linmon::connectivity::{StrongEdge, Witness};
use linmon::counts::gaussian_binomial;
use linmon::deltagraph::{Edge, TraceStep};
use linmon::matspace::idempotent_of;
use linmon::textfmt::{parse_edges, parse_trace, write_edges, write_trace, EdgeBlock};
use linmon::{make_field, Field, Mat};

const QS: [u32; 7] = [2, 3, 4, 5, 7, 8, 9];

fn field_of(i: usize) -> Field {
    make_field(QS[i % QS.len()], None).unwrap()
}

prop_compose! {
    fn mat_in(max_rows: usize, max_cols: usize)
        (fi in 0..QS.len(), rows in 1..=max_rows, cols in 1..=max_cols)
        (entries in prop::collection::vec(0..QS[fi] as u8, rows * cols), fi in Just(fi), rows in Just(rows), cols in Just(cols))
        -> Mat
    {
        Mat::new(&field_of(fi), rows, cols, entries).unwrap()
    }
}

prop_compose! {
    fn square_triple(max: usize)
        (fi in 0..QS.len(), n in 1..=max)
        (a in prop::collection::vec(0..QS[fi] as u8, n * n),
         b in prop::collection::vec(0..QS[fi] as u8, n * n),
         c in prop::collection::vec(0..QS[fi] as u8, n * n),
         fi in Just(fi), n in Just(n))
        -> (Mat, Mat, Mat)
    {
        let f = field_of(fi);
        (Mat::new(&f, n, n, a).unwrap(), Mat::new(&f, n, n, b).unwrap(), Mat::new(&f, n, n, c).unwrap())
    }
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn field_axioms(fi in 0..QS.len(), a in 0u32..16, b in 0u32..16, c in 0u32..16) {
        let f = field_of(fi);
        let q = f.q();
        let (a, b, c) = (f.elem(a % q).unwrap(), f.elem(b % q).unwrap(), f.elem(c % q).unwrap());
        prop_assert_eq!(f.mul(a, f.add(b, c)), f.add(f.mul(a, b), f.mul(a, c)));
        prop_assert_eq!(f.add(a, f.neg(a)), f.elem(0).unwrap());
        prop_assert_eq!(f.sub(f.add(a, b), b), a);
        if a.code() != 0 {
            prop_assert_eq!(f.mul(a, f.inv(a).unwrap()), f.elem(1).unwrap());
        }
    }

    #[test]
    fn rre_is_idempotent_and_keeps_row_space(m in mat_in(5, 7)) {
        let e = m.rre();
        prop_assert!(e.is_rre());
        prop_assert_eq!(e.rre(), e.clone());
        prop_assert!(e.row_space_equal(&m));
        prop_assert_eq!(e.rank(), m.rank());
        prop_assert_eq!(m.transpose().rank(), m.rank());
    }

    #[test]
    fn text_and_code_round_trip(m in mat_in(4, 4)) {
        prop_assert_eq!(Mat::parse_text(m.field(), &m.to_text()).unwrap(), m.clone());
        if m.rows() * m.cols() <= 9 {
            let back = Mat::from_value_code(m.field(), m.rows(), m.cols(), m.value_code());
            prop_assert_eq!(back, m);
        }
    }

    #[test]
    fn matmul_associates((a, b, c) in square_triple(4)) {
        let left = a.matmul(&b).unwrap().matmul(&c).unwrap();
        let right = a.matmul(&b.matmul(&c).unwrap()).unwrap();
        prop_assert_eq!(left, right);
        prop_assert!(a.matmul(&b).unwrap().rank() <= a.rank().min(b.rank()));
    }

    #[test]
    fn inverse_round_trips((a, _, _) in square_triple(4)) {
        let id = Mat::identity(a.field(), a.rows());
        match a.inverse() {
            Ok(inv) => {
                prop_assert_eq!(a.rank(), a.rows());
                prop_assert_eq!(a.matmul(&inv).unwrap(), id.clone());
                prop_assert_eq!(inv.matmul(&a).unwrap(), id);
            }
            Err(_) => prop_assert!(a.rank() < a.rows()),
        }
    }

    #[test]
    fn idempotent_of_lands_in_the_right_class(
        fi in 0..4usize,
        x in prop::collection::vec(0u8..16, 8),
        y in prop::collection::vec(0u8..16, 8),
    ) {
        let f = field_of(fi);
        let q = f.q() as u8;
        let x = Mat::new(&f, 4, 2, x.into_iter().map(|v| v % q).collect()).unwrap();
        let y = Mat::new(&f, 2, 4, y.into_iter().map(|v| v % q).collect()).unwrap();
        match idempotent_of(&x, &y) {
            Ok(e) => {
                prop_assert_eq!(e.matmul(&e).unwrap(), e.clone());
                prop_assert_eq!(e.rank(), 2);
                prop_assert!(e.row_space_equal(&y));
                prop_assert!(e.col_space_equal(&x));
            }
            Err(_) => prop_assert!(y.matmul(&x).unwrap().rank() < 2),
        }
    }

    #[test]
    fn gaussian_symmetry_and_pascal(q in prop::sample::select(vec![2u64, 3, 4, 5, 7, 8, 9]), n in 1u32..12, r in 0u32..12) {
        prop_assume!(r <= n);
        let g = gaussian_binomial(n, r, q).unwrap();
        prop_assert_eq!(g.clone(), gaussian_binomial(n, n - r, q).unwrap());
        if r >= 1 && r < n {
            let pascal = gaussian_binomial(n - 1, r - 1, q).unwrap()
                + num_bigint::BigUint::from(q).pow(r) * gaussian_binomial(n - 1, r, q).unwrap();
            prop_assert_eq!(g, pascal);
        }
    }

    #[test]
    fn trace_text_round_trips(steps in prop::collection::vec((any::<u32>(), any::<u32>(), any::<u32>(), any::<u32>()), 0..40)) {
        let trace: Vec<TraceStep> = steps
            .into_iter()
            .map(|(a, b, c, d)| TraceStep { new: Edge { x: a, y: b }, via: Edge { x: c, y: d } })
            .collect();
        prop_assert_eq!(parse_trace(&write_trace(&trace)).unwrap(), trace);
    }

    #[test]
    fn edge_text_round_trips(
        m in mat_in(3, 3),
        edges in prop::collection::vec((any::<u32>(), any::<u32>(), any::<u32>(), any::<u32>(), any::<bool>(), any::<u32>()), 0..30),
    ) {
        let edges = edges
            .into_iter()
            .map(|(a, b, c, d, row, w)| StrongEdge {
                a: (a, b),
                b: (c, d),
                witness: if row { Witness::Row(w) } else { Witness::Col(w) },
            })
            .collect();
        let blocks = vec![EdgeBlock { value: m.clone(), edges }];
        prop_assert_eq!(parse_edges(m.field(), &write_edges(&blocks)).unwrap(), blocks);
    }

    #[test]
    fn parsers_never_panic(text in "\\PC{0,200}") {
        let f = make_field(4, None).unwrap();
        let _ = parse_trace(&text);
        let _ = parse_edges(&f, &text);
        let _ = Mat::parse_text(&f, &text);
        let _ = linmon::textfmt::PresentationFile::parse(&text);
    }
}
