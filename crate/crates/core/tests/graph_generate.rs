//! The planted-instance generator and the graph text format.

use proptest::prelude::*;
use spclust::generate::sample_instance;
use spclust::graph::{read_graph, read_labels, write_graph, write_labels, MeasurementGraph};
use spclust::model::ModelParams;
use spclust::Error;

#[test]
fn mean_degree_concentrates_on_alpha() {
    // With edge probability alpha/n the average degree 2m/n concentrates on
    // alpha; at n = 20000 its standard deviation is about 0.022, so 0.15 is
    // a > 6-sigma allowance.
    let params = ModelParams::censored(2, 5.0, 0.1).unwrap();
    let inst = sample_instance(&params, 20_000, 7).unwrap();
    let mean_degree = 2.0 * inst.graph.m() as f64 / inst.graph.n() as f64;
    assert!(
        (mean_degree - 5.0).abs() < 0.15,
        "mean degree {mean_degree}"
    );
}

#[test]
fn edges_are_simple_and_normalized() {
    let params = ModelParams::censored(3, 6.0, 0.2).unwrap();
    let inst = sample_instance(&params, 400, 11).unwrap();
    let mut seen = std::collections::HashSet::new();
    for e in inst.graph.edges() {
        assert!(e.i < e.j, "endpoints normalized to i < j");
        assert!(e.j < inst.graph.n());
        assert!(seen.insert((e.i, e.j)), "duplicate pair {:?}", (e.i, e.j));
    }
}

#[test]
fn truth_labels_are_one_based_and_roughly_uniform() {
    let k = 4;
    let n = 8000;
    let params = ModelParams::censored(k, 3.0, 0.1).unwrap();
    let inst = sample_instance(&params, n, 23).unwrap();
    let mut counts = vec![0usize; k + 1];
    for &t in &inst.truth {
        assert!((1..=k as u32).contains(&t));
        counts[t as usize] += 1;
    }
    for c in &counts[1..] {
        // Each group mass is n/k = 2000 with sd ~ 39; allow ~5 sigma.
        let dev = (*c as f64 - n as f64 / k as f64).abs();
        assert!(dev < 200.0, "group count {c}");
    }
}

#[test]
fn sign_flip_fractions_match_flip_probability() {
    let eps = 0.1;
    let params = ModelParams::censored(2, 8.0, eps).unwrap();
    let inst = sample_instance(&params, 5000, 31).unwrap();
    let (mut same, mut same_pos, mut diff, mut diff_neg) = (0, 0, 0, 0);
    for e in inst.graph.edges() {
        if inst.truth[e.i] == inst.truth[e.j] {
            same += 1;
            if e.s > 0.0 {
                same_pos += 1;
            }
        } else {
            diff += 1;
            if e.s < 0.0 {
                diff_neg += 1;
            }
        }
    }
    let frac_same_pos = same_pos as f64 / same as f64;
    let frac_diff_neg = diff_neg as f64 / diff as f64;
    assert!(same > 5000 && diff > 5000, "both edge types present");
    assert!((frac_same_pos - (1.0 - eps)).abs() < 0.02, "{frac_same_pos}");
    assert!((frac_diff_neg - (1.0 - eps)).abs() < 0.02, "{frac_diff_neg}");
}

#[test]
fn generation_is_deterministic_in_seed() {
    let params = ModelParams::gaussian_pair(2, 4.0, 1.5, 0.0, 1.0).unwrap();
    let a = sample_instance(&params, 300, 99).unwrap();
    let b = sample_instance(&params, 300, 99).unwrap();
    assert_eq!(a.truth, b.truth);
    assert_eq!(a.graph.m(), b.graph.m());
    for (ea, eb) in a.graph.edges().iter().zip(b.graph.edges()) {
        assert_eq!((ea.i, ea.j), (eb.i, eb.j));
        assert_eq!(ea.s.to_bits(), eb.s.to_bits());
    }
    let c = sample_instance(&params, 300, 100).unwrap();
    let differs = a.graph.m() != c.graph.m()
        || a.truth != c.truth
        || a.graph
            .edges()
            .iter()
            .zip(c.graph.edges())
            .any(|(x, y)| (x.i, x.j) != (y.i, y.j) || x.s != y.s);
    assert!(differs, "different seeds should give different instances");
}

#[test]
fn alpha_above_n_is_rejected() {
    let params = ModelParams::censored(2, 10.0, 0.1).unwrap();
    assert!(matches!(
        sample_instance(&params, 5, 1),
        Err(Error::InvalidRate { .. })
    ));
}

#[test]
fn graph_text_round_trip_is_bit_exact() {
    let params = ModelParams::gaussian_pair(3, 5.0, 1.5, 0.0, 1.0).unwrap();
    let inst = sample_instance(&params, 200, 5).unwrap();
    let mut buf = Vec::new();
    write_graph(&mut buf, &inst.graph, 3).unwrap();
    let (back, k) = read_graph(&buf[..]).unwrap();
    assert_eq!(k, 3);
    assert_eq!(back.n(), inst.graph.n());
    assert_eq!(back.m(), inst.graph.m());
    for (ea, eb) in inst.graph.edges().iter().zip(back.edges()) {
        assert_eq!((ea.i, ea.j), (eb.i, eb.j));
        assert_eq!(ea.s.to_bits(), eb.s.to_bits(), "measurement round trip");
    }
}

#[test]
fn labels_text_round_trip() {
    let labels = vec![1u32, 2, 2, 3, 1];
    let mut buf = Vec::new();
    write_labels(&mut buf, &labels).unwrap();
    assert_eq!(read_labels(&buf[..]).unwrap(), labels);
}

#[test]
fn malformed_graph_files_are_rejected_with_line_info() {
    let cases: &[(&str, &str)] = &[
        ("", "missing header"),
        ("3 1\n0 1 1.0\n", "header"),
        ("3 2\n0 1 1.0\n", "header"),
        ("3 1 2\n0 1\n", "line 2"),
        ("3 1 2\n0 one 1.0\n", "line 2"),
        ("3 2 2\n0 1 1.0\n", "promised 2"),
        ("3 1 2\n1 1 1.0\n", "self-loop"),
        ("3 2 2\n0 1 1.0\n1 0 -1.0\n", "duplicate"),
        ("2 1 2\n0 5 1.0\n", "outside"),
    ];
    for (text, needle) in cases {
        match read_graph(text.as_bytes()) {
            Err(e @ Error::Parse { .. }) => {
                let shown = e.to_string();
                assert!(
                    shown.contains(needle),
                    "input {text:?}: message {shown:?} lacks {needle:?}"
                );
            }
            other => panic!("input {text:?}: expected parse error, got {other:?}"),
        }
    }
}

#[test]
fn zero_label_is_rejected() {
    assert!(matches!(
        read_labels("1\n0\n".as_bytes()),
        Err(Error::Parse { .. })
    ));
}

#[test]
fn directed_id_conventions() {
    let g = MeasurementGraph::new(4, vec![(0, 1, 1.0), (1, 2, -1.0), (0, 3, 0.5)]).unwrap();
    for e in 0..g.m() {
        let fwd = 2 * e;
        let rev = 2 * e + 1;
        assert_eq!(g.reverse(fwd), rev);
        assert_eq!(g.reverse(rev), fwd);
        assert_eq!(g.edge_of(fwd), e);
        assert_eq!(g.edge_of(rev), e);
        assert_eq!(g.tail(fwd), g.edges()[e].i);
        assert_eq!(g.head(fwd), g.edges()[e].j);
        assert_eq!(g.tail(rev), g.edges()[e].j);
        assert_eq!(g.head(rev), g.edges()[e].i);
        assert_eq!(g.directed_into(e, g.head(fwd)), fwd);
        assert_eq!(g.directed_into(e, g.head(rev)), rev);
    }
    assert_eq!(g.degree(0), 2);
    assert_eq!(g.degree(2), 1);
    let nb: Vec<usize> = g.neighbors(0).iter().map(|&(j, _)| j).collect();
    assert_eq!(nb, vec![1, 3]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// Rate-0 graphs are edgeless and rate-1 graphs are complete.
    #[test]
    fn extreme_rates_give_extreme_graphs(n in 3usize..9, seed in 0u64..500) {
        let empty = ModelParams::censored(2, 0.0, 0.1).unwrap();
        let inst = sample_instance(&empty, n, seed).unwrap();
        prop_assert_eq!(inst.graph.m(), 0);

        let full = ModelParams::censored(2, n as f64, 0.1).unwrap();
        let inst = sample_instance(&full, n, seed).unwrap();
        prop_assert_eq!(inst.graph.m(), n * (n - 1) / 2);
    }

    /// Every generated instance satisfies the structural graph invariants.
    #[test]
    fn generated_graphs_are_simple(n in 2usize..40, alpha in 0.0f64..6.0, seed in 0u64..10_000) {
        prop_assume!(alpha <= n as f64);
        let params = ModelParams::censored(2, alpha, 0.1).unwrap();
        let inst = sample_instance(&params, n, seed).unwrap();
        let mut seen = std::collections::HashSet::new();
        for e in inst.graph.edges() {
            prop_assert!(e.i < e.j && e.j < n);
            prop_assert!(seen.insert((e.i, e.j)));
            prop_assert!(e.s == 1.0 || e.s == -1.0);
        }
        prop_assert_eq!(inst.truth.len(), n);
    }
}
