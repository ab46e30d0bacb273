use std::collections::HashSet;

use dsm_core::deterministic::{DeterministicMethod, Direction};
use dsm_core::evaluator::{is_acyclic, score_permutation};
use dsm_core::ga::{order_crossover, pmx_crossover, run_ga, shuffle_mutation, GaPreset};
use dsm_core::model::random_case;
use dsm_core::solution_base::SolutionSource;
use dsm_core::{
    anonymize_ids, brute_force_optimum, build_adjacency, network_metrics, score_sequence, AdjacencyMatrix, DsmCase,
    SamplingPolicy, Sequence, SolutionBase,
};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn arb_matrix(max_n: usize) -> impl Strategy<Value = AdjacencyMatrix> {
    (2..=max_n).prop_flat_map(|n| {
        proptest::collection::vec(any::<bool>(), n * n).prop_map(move |bits| {
            let edges: Vec<(usize, usize)> =
                (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).filter(|&(i, j)| i != j && bits[i * n + j]).collect();
            AdjacencyMatrix::from_index_edges(n, &edges).unwrap()
        })
    })
}

fn arb_perm(n: usize) -> impl Strategy<Value = Vec<usize>> {
    Just((0..n).collect::<Vec<_>>()).prop_shuffle()
}

fn arb_matrix_and_perm(max_n: usize) -> impl Strategy<Value = (AdjacencyMatrix, Vec<usize>)> {
    arb_matrix(max_n).prop_flat_map(|m| {
        let n = m.n();
        (Just(m), arb_perm(n))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn reversal_splits_every_edge(case in arb_matrix_and_perm(12)) {
        let (m, perm) = case;
        let rev: Vec<usize> = perm.iter().rev().copied().collect();
        prop_assert_eq!(score_permutation(&m, &perm) + score_permutation(&m, &rev), m.edge_count());
    }

    #[test]
    fn score_bounded_by_edge_count(case in arb_matrix_and_perm(12)) {
        let (m, perm) = case;
        prop_assert!(score_permutation(&m, &perm) <= m.edge_count());
    }

    #[test]
    fn relabeling_preserves_scores(case in arb_matrix_and_perm(9), seed in any::<u64>()) {
        let (m, perm) = case;
        let ids: Vec<String> = m.ids().iter().map(|i| i.to_string()).collect();
        let id_refs: Vec<&str> = ids.iter().map(String::as_str).collect();
        let edges: Vec<(&str, &str)> = m.edge_indices().iter().map(|&(i, j)| (id_refs[i], id_refs[j])).collect();
        let case = DsmCase::from_ids(&id_refs, &edges).unwrap();
        let (anon, mapping) = anonymize_ids(&case, seed);
        let anon_m = build_adjacency(&anon);
        let seq = Sequence::from_indices(&m, &perm);
        let anon_seq = Sequence(mapping.apply(seq.ids()));
        prop_assert_eq!(score_sequence(&m, &seq).unwrap(), score_sequence(&anon_m, &anon_seq).unwrap());
        let (opt, _) = brute_force_optimum(&m).unwrap();
        let (anon_opt, _) = brute_force_optimum(&anon_m).unwrap();
        prop_assert_eq!(opt, anon_opt);
    }

    #[test]
    fn optimum_zero_iff_acyclic(m in arb_matrix(7)) {
        let (opt, seq) = brute_force_optimum(&m).unwrap();
        prop_assert_eq!(opt.0 == 0, is_acyclic(&m));
        prop_assert_eq!(score_sequence(&m, &seq).unwrap(), opt);
    }

    #[test]
    fn brute_force_is_a_lower_bound(case in arb_matrix_and_perm(8), seed in any::<u64>()) {
        let (m, perm) = case;
        let (opt, _) = brute_force_optimum(&m).unwrap();
        prop_assert!(opt.0 <= score_permutation(&m, &perm));
        for method in DeterministicMethod::ALL {
            for dir in [Direction::Descending, Direction::Ascending] {
                if let Ok(r) = method.run(&m, dir, seed) {
                    prop_assert!(opt <= score_sequence(&m, &r.order).unwrap());
                }
            }
        }
    }

    #[test]
    fn deterministic_orders_are_permutations(m in arb_matrix(12), seed in any::<u64>()) {
        for method in DeterministicMethod::ALL {
            if let Ok(r) = method.run(&m, Direction::Descending, seed) {
                let got: HashSet<_> = r.order.ids().iter().collect();
                prop_assert_eq!(r.order.len(), m.n());
                prop_assert_eq!(got, m.ids().iter().collect::<HashSet<_>>());
            }
        }
    }

    #[test]
    fn metrics_ignore_node_order(seed in any::<u64>(), n in 3usize..10) {
        let case = random_case(n, 0.3, seed);
        let mut nodes = case.nodes().to_vec();
        nodes.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 0x5a5a));
        let mut edges = case.edges().to_vec();
        edges.reverse();
        let shuffled = DsmCase::new(nodes, edges, case.description(), None).unwrap();
        let a = network_metrics(&case);
        let b = network_metrics(&shuffled);
        prop_assert_eq!(a.diameter, b.diameter);
        prop_assert!((a.density - b.density).abs() < 1e-12);
        prop_assert!((a.clustering_coefficient - b.clustering_coefficient).abs() < 1e-12);
        prop_assert!((a.average_path_length - b.average_path_length).abs() < 1e-12);
    }

    #[test]
    fn sampling_is_distinct_and_keeps_the_best(
        m in arb_matrix(8), k_p in 1usize..6, k_q in 0usize..6, count in 1usize..25, seed in any::<u64>()
    ) {
        let mut base = SolutionBase::new(m.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut perm: Vec<usize> = (0..m.n()).collect();
        for it in 0..count {
            perm.shuffle(&mut rng);
            base.insert_sequence(Sequence::from_indices(&m, &perm), it, SolutionSource::InitialRandom).unwrap();
        }
        let sample = base.sample_for_prompt(SamplingPolicy::new(k_p, k_q).unwrap(), seed).unwrap();
        let k = base.unique_count();
        prop_assert_eq!(sample.len(), k_p.min(k) + k_q.min(k.saturating_sub(k_p)));
        let distinct: HashSet<_> = sample.iter().map(|r| &r.sequence).collect();
        prop_assert_eq!(distinct.len(), sample.len());
        prop_assert_eq!(&sample.last().unwrap().sequence, &base.best().unwrap().sequence);
        prop_assert!(sample.windows(2).all(|w| w[0].score >= w[1].score));
    }

    #[test]
    fn variation_operators_keep_permutations(perms in (2usize..15).prop_flat_map(|n| (arb_perm(n), arb_perm(n))), seed in any::<u64>()) {
        let (p1, p2) = perms;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sorted = p1.clone();
        sorted.sort_unstable();
        for (c1, c2) in [order_crossover(&p1, &p2, &mut rng).unwrap(), pmx_crossover(&p1, &p2, &mut rng).unwrap()] {
            for mut c in [c1, c2] {
                shuffle_mutation(&mut c, 0.3, &mut rng);
                c.sort_unstable();
                prop_assert_eq!(&c, &sorted);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn ga_never_beats_the_optimum(m in arb_matrix(7), seed in any::<u64>()) {
        let mut cfg = GaPreset::Balanced.config(seed);
        cfg.generations = 30;
        let out = run_ga(&m, &cfg).unwrap();
        let (opt, _) = brute_force_optimum(&m).unwrap();
        prop_assert!(out.best.score >= opt);
        prop_assert_eq!(score_sequence(&m, &out.best.sequence).unwrap(), out.best.score);
        prop_assert!(out.convergence.windows(2).all(|w| w[1].best_score <= w[0].best_score));
        prop_assert_eq!(out.convergence.last().unwrap().unique_count, out.unique_count);
    }
}
