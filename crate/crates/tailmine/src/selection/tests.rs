use super::*;
use proptest::prelude::*;

fn matrix(ids: &[&str], columns: &[&str], rows: &[&[f64]]) -> SignalMatrix {
    SignalMatrix::new(
        ids.iter().map(|s| s.to_string()).collect(),
        columns.iter().map(|s| s.to_string()).collect(),
        rows.iter().map(|r| r.to_vec()).collect(),
    )
    .unwrap()
}

/// Independent oracle: the literal all-pairs dominance filter, written
/// without reference to the library's front implementations.
fn brute_force_front(points: &[Vec<f64>]) -> Vec<usize> {
    let mut front = Vec::new();
    for i in 0..points.len() {
        let mut dominated = false;
        for j in 0..points.len() {
            if i == j {
                continue;
            }
            let weakly_greater = points[j]
                .iter()
                .zip(&points[i])
                .all(|(&jv, &iv)| iv <= jv);
            let strictly_somewhere = points[j]
                .iter()
                .zip(&points[i])
                .any(|(&jv, &iv)| iv < jv);
            if weakly_greater && strictly_somewhere {
                dominated = true;
                break;
            }
        }
        if !dominated {
            front.push(i);
        }
    }
    front
}

fn random_points(rng: &mut rand_chacha::ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
    use rand::Rng;
    (0..n)
        .map(|_| {
            (0..d)
                .map(|_| {
                    // Coarse grid keeps ties and duplicated vectors common.
                    let v: f64 = rng.random_range(0..8) as f64;
                    v / 2.0
                })
                .collect()
        })
        .collect()
}

#[test]
fn dominates_definition() {
    assert!(dominates(&[2.0, 3.0], &[1.0, 2.0]));
    assert!(!dominates(&[2.0, 3.0], &[2.0, 3.0])); // irreflexive: no strict coordinate
    assert!(!dominates(&[2.0, 1.0], &[1.0, 2.0])); // incomparable
    assert!(!dominates(&[1.0, 2.0], &[2.0, 1.0]));
    assert!(dominates(&[2.0, 2.0], &[2.0, 1.0])); // weak + one strict
}

#[test]
#[should_panic(expected = "dominance is undefined")]
fn dominates_rejects_dimension_mismatch() {
    dominates(&[1.0, 2.0], &[1.0]);
}

#[test]
fn front_drops_only_dominated_points() {
    let m = matrix(
        &["a", "b", "c", "d"],
        &["s1", "s2"],
        &[&[0.0, 1.0], &[1.0, 0.0], &[0.5, 0.5], &[0.0, 0.0]],
    );
    let front = pareto_front(&m).unwrap();
    let want: BTreeSet<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
    assert_eq!(front, want);
}

#[test]
fn identical_points_all_front() {
    let m = matrix(
        &["a", "b", "c"],
        &["s1", "s2"],
        &[&[1.0, 1.0], &[1.0, 1.0], &[1.0, 1.0]],
    );
    assert_eq!(pareto_front(&m).unwrap().len(), 3);
}

#[test]
fn one_signal_front_is_the_argmax_set() {
    let m = matrix(
        &["a", "b", "c", "d"],
        &["s"],
        &[&[3.0], &[1.0], &[3.0], &[2.0]],
    );
    let front = pareto_front(&m).unwrap();
    let want: BTreeSet<String> = ["a", "c"].iter().map(|s| s.to_string()).collect();
    assert_eq!(front, want);
}

#[test]
fn empty_matrix_is_an_error() {
    let m = SignalMatrix::new(vec![], vec!["s".into()], vec![]).unwrap();
    assert!(matches!(pareto_front(&m), Err(SelectionError::EmptyMatrix)));
    assert!(matches!(
        pareto_mine(&m, 1, 0),
        Err(SelectionError::EmptyMatrix)
    ));
}

#[test]
fn fast_2d_path_matches_oracle_on_adversarial_ties() {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    for n in [1usize, 2, 3, 17, 64] {
        for _ in 0..50 {
            let points = random_points(&mut rng, n, 2);
            assert_eq!(
                pareto_front_indices(&points),
                brute_force_front(&points),
                "points {points:?}"
            );
        }
    }
}

#[test]
fn layers_are_a_peel_decomposition() {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    for d in [1usize, 2, 3] {
        let points = random_points(&mut rng, 40, d);
        let layers = pareto_layers(&points);
        let total: usize = layers.iter().map(|l| l.len()).sum();
        assert_eq!(total, points.len());

        // No point dominates another within its layer.
        for layer in &layers {
            for &i in layer {
                for &j in layer {
                    assert!(!dominates(&points[i], &points[j]));
                }
            }
        }
        // Every point in layer k>0 is dominated by some point in layer k-1.
        for k in 1..layers.len() {
            for &i in &layers[k] {
                assert!(
                    layers[k - 1].iter().any(|&j| dominates(&points[j], &points[i])),
                    "layer {k} point {i} undominated by layer {}",
                    k - 1
                );
            }
        }
    }
}

/// Layered structure mirroring the worked two-signal illustration: an outer
/// front of four points, a second front of three once it is removed, and one
/// fully dominated point behind both.
fn two_layer_matrix() -> SignalMatrix {
    matrix(
        &["y1", "y2", "y3", "y4", "g1", "g2", "g3", "b1"],
        &["s1", "s2"],
        &[
            &[0.0, 9.0],
            &[5.0, 7.0],
            &[7.0, 5.0],
            &[9.0, 0.0],
            &[1.0, 6.0],
            &[4.0, 4.0],
            &[6.0, 1.0],
            &[0.0, 0.0],
        ],
    )
}

#[test]
fn budget_equal_to_front_takes_exactly_the_front() {
    let m = two_layer_matrix();
    let mined = pareto_mine(&m, 4, 123).unwrap();
    let want: BTreeSet<String> = ["y1", "y2", "y3", "y4"].iter().map(|s| s.to_string()).collect();
    assert_eq!(mined.id_set(), want);
    assert!(mined.items.iter().all(|item| item.layer == 0));
}

#[test]
fn overflow_budget_samples_from_next_layer() {
    let m = two_layer_matrix();
    let greens: BTreeSet<String> = ["g1", "g2", "g3"].iter().map(|s| s.to_string()).collect();
    let yellow: BTreeSet<String> = ["y1", "y2", "y3", "y4"].iter().map(|s| s.to_string()).collect();

    let mut sampled_greens = BTreeSet::new();
    for seed in 0..16 {
        let mined = pareto_mine(&m, 6, seed).unwrap();
        assert_eq!(mined.items.len(), 6);
        let selected = mined.id_set();
        assert!(yellow.is_subset(&selected));
        let layer1: Vec<_> = mined.items.iter().filter(|i| i.layer == 1).collect();
        assert_eq!(layer1.len(), 2);
        for item in layer1 {
            assert!(greens.contains(&item.example_id));
            sampled_greens.insert(item.example_id.clone());
        }
        // The dominated point behind both fronts is never reachable here.
        assert!(!selected.contains("b1"));
    }
    // Uniform sampling over the oversized layer reaches every green.
    assert_eq!(sampled_greens, greens);
}

#[test]
fn mutually_incomparable_points_fill_without_sampling() {
    let m = matrix(
        &["a", "b", "c", "d", "e", "f"],
        &["s1", "s2"],
        &[
            &[0.0, 5.0],
            &[1.0, 4.0],
            &[2.0, 3.0],
            &[3.0, 2.0],
            &[4.0, 1.0],
            &[5.0, 0.0],
        ],
    );
    let mined = pareto_mine(&m, 6, 0).unwrap();
    assert_eq!(mined.items.len(), 6);
    assert!(mined.items.iter().all(|item| item.layer == 0));
}

#[test]
fn oversized_budget_returns_layered_population() {
    let m = two_layer_matrix();
    let mined = pareto_mine(&m, 100, 5).unwrap();
    assert_eq!(mined.items.len(), 8);
    assert_eq!(mined.budget, 100);
    let layers: Vec<u32> = mined.items.iter().map(|i| i.layer).collect();
    let mut sorted = layers.clone();
    sorted.sort_unstable();
    assert_eq!(layers, sorted, "layers nondecreasing");
    assert_eq!(mined.items.iter().filter(|i| i.layer == 2).count(), 1);
    assert_eq!(mined.items.last().unwrap().example_id, "b1");
}

#[test]
fn mining_is_deterministic_per_seed() {
    let m = two_layer_matrix();
    let a = pareto_mine(&m, 6, 42).unwrap();
    let b = pareto_mine(&m, 6, 42).unwrap();
    assert_eq!(a, b);
    let csv_a = {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.csv");
        write_mined_csv(&a, &path).unwrap();
        std::fs::read(&path).unwrap()
    };
    let csv_b = {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.csv");
        write_mined_csv(&b, &path).unwrap();
        std::fs::read(&path).unwrap()
    };
    assert_eq!(csv_a, csv_b);
}

#[test]
fn top_k_orders_by_score() {
    let m = matrix(&["a", "b", "c"], &["s"], &[&[3.0], &[2.0], &[1.0]]);
    let mined = top_k(&m, "s", 2, 0).unwrap();
    let ids: Vec<_> = mined.ids().collect();
    assert_eq!(ids, ["a", "b"]);
    assert_eq!(mined.items[0].rank, 0);
    assert_eq!(mined.items[1].rank, 1);
}

#[test]
fn top_k_breaks_ties_deterministically_per_seed() {
    let m = matrix(&["a", "b", "c"], &["s"], &[&[1.0], &[1.0], &[1.0]]);
    let first = top_k(&m, "s", 2, 9).unwrap();
    let second = top_k(&m, "s", 2, 9).unwrap();
    assert_eq!(first, second);
    assert_eq!(first.items.len(), 2);

    // Across many seeds every id shows up: the tie rule really samples.
    let mut seen = BTreeSet::new();
    for seed in 0..32 {
        for id in top_k(&m, "s", 2, seed).unwrap().ids() {
            seen.insert(id.to_string());
        }
    }
    assert_eq!(seen.len(), 3);
}

#[test]
fn top_k_saturates_at_population() {
    let m = matrix(&["a", "b"], &["s"], &[&[2.0], &[1.0]]);
    let mined = top_k(&m, "s", 10, 0).unwrap();
    assert_eq!(mined.items.len(), 2);
}

#[test]
fn top_k_unknown_column_is_an_error() {
    let m = matrix(&["a"], &["s"], &[&[1.0]]);
    assert!(matches!(
        top_k(&m, "nope", 1, 0),
        Err(SelectionError::Scoring(ScoringError::UnknownColumn(_)))
    ));
}

#[test]
fn budget_zero_is_rejected_everywhere() {
    let m = matrix(&["a"], &["s"], &[&[1.0]]);
    assert!(matches!(pareto_mine(&m, 0, 0), Err(SelectionError::BudgetZero)));
    assert!(matches!(top_k(&m, "s", 0, 0), Err(SelectionError::BudgetZero)));
}

#[test]
fn single_column_pareto_equals_top_k() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    for trial in 0..60 {
        let n = rng.random_range(1..40);
        let ids: Vec<String> = (0..n).map(|i| format!("e{i}")).collect();
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| vec![rng.random_range(0..6) as f64])
            .collect();
        let m = SignalMatrix::new(ids, vec!["s".into()], rows).unwrap();
        let budget = rng.random_range(1..=n + 2);
        let seed = rng.random::<u64>();
        let pareto = pareto_mine(&m, budget, seed).unwrap();
        let topk = top_k(&m, "s", budget, seed).unwrap();
        assert_eq!(pareto.id_set(), topk.id_set(), "trial {trial}");
    }
}

#[test]
fn linear_combine_single_column_is_its_znorm() {
    let m = matrix(&["a", "b", "c"], &["s"], &[&[1.0], &[2.0], &[3.0]]);
    let combined = linear_combine(&m).unwrap();
    let values = combined.matrix.column_values("combined").unwrap();
    let std = (2.0f64 / 3.0).sqrt();
    assert!((values[0] - (-1.0 / std)).abs() < 1e-12);
    assert!((values[1] - 0.0).abs() < 1e-12);
    assert!((values[2] - (1.0 / std)).abs() < 1e-12);
    assert!(combined.degenerate_columns.is_empty());
}

#[test]
fn equal_columns_preserve_the_common_ranking() {
    let m = matrix(
        &["a", "b", "c"],
        &["s1", "s2"],
        &[&[1.0, 1.0], &[3.0, 3.0], &[2.0, 2.0]],
    );
    let combined = linear_combine(&m).unwrap();
    let values = combined.matrix.column_values("combined").unwrap();
    assert!(values[1] > values[2] && values[2] > values[0]);
}

#[test]
fn anti_correlated_columns_cancel_to_zero() {
    let m = matrix(
        &["a", "b", "c"],
        &["s1", "s2"],
        &[&[1.0, 3.0], &[2.0, 2.0], &[3.0, 1.0]],
    );
    // Hand check: z-scores of [1,2,3] are (-1.2247, 0, 1.2247); the second
    // column is their negation, so the averages vanish.
    let z = 1.0 / (2.0f64 / 3.0).sqrt();
    assert!((z - 1.224_744_871_391_589).abs() < 1e-12);
    let combined = linear_combine(&m).unwrap();
    for value in combined.matrix.column_values("combined").unwrap() {
        assert!(value.abs() < 1e-12);
    }
}

#[test]
fn constant_column_is_warned_and_zeroed() {
    let m = matrix(
        &["a", "b"],
        &["s1", "s2"],
        &[&[5.0, 1.0], &[5.0, 2.0]],
    );
    let combined = linear_combine(&m).unwrap();
    assert_eq!(combined.degenerate_columns, ["s1"]);
    let values = combined.matrix.column_values("combined").unwrap();
    assert!(values[1] > values[0]); // s2 still ranks
}

#[test]
fn grouping_collapses_and_expands() {
    let m = matrix(
        &["a1", "a2", "b1"],
        &["s"],
        &[&[1.0], &[5.0], &[3.0]],
    );
    let groups: BTreeMap<String, String> = [
        ("a1".to_string(), "A".to_string()),
        ("a2".to_string(), "A".to_string()),
    ]
    .into_iter()
    .collect();
    let (units, members) = collapse_by_group(&m, &groups).unwrap();
    assert_eq!(units.example_ids(), ["A", "b1"]);
    assert_eq!(units.column_values("s").unwrap(), vec![5.0, 3.0]);

    let mined = top_k(&units, "s", 1, 0).unwrap();
    let expanded = expand_groups(&mined, &members);
    let ids: BTreeSet<_> = expanded.ids().map(|s| s.to_string()).collect();
    assert_eq!(ids.len(), 2);
    assert!(ids.contains("a1") && ids.contains("a2"));
}

#[test]
fn mined_csv_round_trips() {
    let m = two_layer_matrix();
    let mined = pareto_mine(&m, 6, 42).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mined.csv");
    write_mined_csv(&mined, &path).unwrap();
    let back = read_mined_csv(&path).unwrap();
    assert_eq!(back.items, mined.items);
    assert_eq!(back.method, mined.method);
    assert_eq!(back.seed, mined.seed);
}

proptest! {
    /// The production front (including the 2-d fast path) agrees with the
    /// brute-force all-pairs filter.
    #[test]
    fn front_matches_brute_force(
        seed in 0u64..500,
        n in 1usize..60,
        d in 1usize..4,
    ) {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let points = random_points(&mut rng, n, d);
        prop_assert_eq!(pareto_front_indices(&points), brute_force_front(&points));
    }

    /// Strictly increasing per-column transforms leave the layer
    /// decomposition unchanged.
    #[test]
    fn layers_invariant_under_monotone_transforms(seed in 0u64..200) {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let points = random_points(&mut rng, 30, 2);
        let transformed: Vec<Vec<f64>> = points
            .iter()
            .map(|p| vec![p[0].powi(3), p[1].exp()])
            .collect();
        prop_assert_eq!(pareto_layers(&points), pareto_layers(&transformed));
    }

    /// Pareto mining respects budget, layer monotonicity, and per-layer
    /// non-domination on arbitrary instances.
    #[test]
    fn mined_sets_are_wellformed(seed in 0u64..200, n in 1usize..40, budget in 1usize..50) {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let points = random_points(&mut rng, n, 3);
        let ids: Vec<String> = (0..n).map(|i| format!("e{i}")).collect();
        let m = SignalMatrix::new(
            ids,
            vec!["a".into(), "b".into(), "c".into()],
            points.clone(),
        )
        .unwrap();
        let mined = pareto_mine(&m, budget, seed).unwrap();
        prop_assert_eq!(mined.items.len(), budget.min(n));

        let unique: BTreeSet<_> = mined.ids().collect();
        prop_assert_eq!(unique.len(), mined.items.len());

        let layers: Vec<u32> = mined.items.iter().map(|i| i.layer).collect();
        let mut sorted = layers.clone();
        sorted.sort_unstable();
        prop_assert_eq!(layers, sorted);
    }
}
