mod common;

use std::collections::HashMap;

use lexalign::alignment::{
    align, alignment_strength, draw_non_identity, permutation_distribution, prototype_matrix, relative_alignment,
    rowwise_alignment, similarity_matrix, view_similarity, RankedPair, SimilarityMatrix,
};
use lexalign::data::{subsample, Modality};
use lexalign::rng::SplitMix64;
use lexalign::Error;
use proptest::prelude::*;

fn random_rows(rng: &mut SplitMix64, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| common::gaussian_vec(rng, d)).collect()
}

fn full(m: &SimilarityMatrix) -> Vec<Vec<f64>> {
    (0..m.n()).map(|i| (0..m.n()).map(|j| m.get(i, j)).collect()).collect()
}

fn random_perm(rng: &mut SplitMix64, n: usize) -> Vec<usize> {
    rng.permutation(n)
}

#[test]
fn cosine_matrix_matches_direct_formula() {
    let mut rng = SplitMix64::new(101);
    for _ in 0..100 {
        let d = 1 + rng.below(20) as usize;
        let rows = random_rows(&mut rng, 6, d);
        let m = similarity_matrix(&rows, None).unwrap();
        for i in 0..6 {
            assert_eq!(m.get(i, i), 1.0);
            for j in 0..6 {
                assert_eq!(m.get(i, j), m.get(j, i));
                assert!((-1.0..=1.0).contains(&m.get(i, j)));
                if i != j {
                    assert!((m.get(i, j) - common::naive_cosine(&rows[i], &rows[j])).abs() < 1e-12);
                }
            }
        }
    }
}

#[test]
fn cosine_matrix_examples() {
    let eye = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
    let m = similarity_matrix(&eye, None).unwrap();
    assert_eq!(full(&m), eye);
    let m = similarity_matrix(&[vec![0.3, -1.2], vec![0.6, -2.4], vec![1.0, 1.0]], None).unwrap();
    assert!((m.get(0, 1) - 1.0).abs() < 1e-15);
}

#[test]
fn zero_prototype_is_named() {
    let mut rng = SplitMix64::new(102);
    let mut s = common::random_system(&mut rng, 4, 2, 3, (2, 2));
    s.words[2].linguistic_exemplars = vec![vec![1.0, -2.0, 0.5], vec![-1.0, 2.0, -0.5]];
    match view_similarity(&s.full_view(), Modality::Linguistic).unwrap_err() {
        Error::ZeroNorm { word, modality } => {
            assert_eq!(word, "word2");
            assert_eq!(modality, Modality::Linguistic);
        }
        other => panic!("{other}"),
    }
}

#[test]
fn prototypes_are_view_centroids() {
    let mut rng = SplitMix64::new(103);
    let s = common::random_system(&mut rng, 5, 4, 3, (1, 1));
    let p = prototype_matrix(&s.full_view(), Modality::Visual).unwrap();
    for (row, w) in p.iter().zip(&s.words) {
        assert_eq!(row, &w.visual_exemplars[0]);
    }

    let s = common::random_system(&mut rng, 5, 4, 3, (6, 6));
    let v = subsample(&s, 4, 2, 11).unwrap();
    let p = prototype_matrix(&v, Modality::Visual).unwrap();
    for (i, row) in p.iter().enumerate() {
        let sel = v.selected(i, Modality::Visual);
        for c in 0..4 {
            let oracle = sel.iter().map(|&k| s.words[i].visual_exemplars[k][c]).sum::<f64>() / 4.0;
            assert!((row[c] - oracle).abs() < 1e-12);
        }
    }
}

#[test]
fn alignment_matches_rank_correlation_oracle() {
    let mut rng = SplitMix64::new(104);
    for _ in 0..200 {
        let n = 5 + rng.below(26) as usize;
        let sv = similarity_matrix(&random_rows(&mut rng, n, 8), None).unwrap();
        let sl = similarity_matrix(&random_rows(&mut rng, n, 5), None).unwrap();
        let oracle = common::naive_spearman(&common::upper(&full(&sv)), &common::upper(&full(&sl)));
        assert!((alignment_strength(&sv, &sl).unwrap() - oracle).abs() < 1e-12);
    }
}

#[test]
fn alignment_with_ties_matches_oracle() {
    // Duplicated prototypes produce tied similarities.
    let mut rng = SplitMix64::new(105);
    for _ in 0..100 {
        let n = 5 + rng.below(8) as usize;
        let mut rv = random_rows(&mut rng, n, 3);
        let mut rl = random_rows(&mut rng, n, 3);
        rv[1] = rv[0].clone();
        rl[n - 1] = rl[2].iter().map(|x| 2.0 * x).collect();
        let sv = similarity_matrix(&rv, None).unwrap();
        let sl = similarity_matrix(&rl, None).unwrap();
        let oracle = common::naive_spearman(&common::upper(&full(&sv)), &common::upper(&full(&sl)));
        assert!((alignment_strength(&sv, &sl).unwrap() - oracle).abs() < 1e-12);
    }
}

#[test]
fn alignment_extremes() {
    let mut rng = SplitMix64::new(106);
    let sv = similarity_matrix(&random_rows(&mut rng, 7, 4), None).unwrap();
    assert_eq!(alignment_strength(&sv, &sv).unwrap(), 1.0);
    // Strictly increasing maps of [-1, 1] onto itself.
    let bent = SimilarityMatrix::from_values(7, sv.values().iter().map(|x| (x * x * x + x) / 2.0).collect(), None)
        .unwrap();
    assert_eq!(alignment_strength(&sv, &bent).unwrap(), 1.0);
    let flipped = SimilarityMatrix::from_values(
        7,
        full(&sv)
            .iter()
            .enumerate()
            .flat_map(|(i, r)| r.iter().enumerate().map(move |(j, &x)| if i == j { 1.0 } else { -x }))
            .collect(),
        None,
    )
    .unwrap();
    assert_eq!(alignment_strength(&sv, &flipped).unwrap(), -1.0);
    for i in 0..7 {
        assert_eq!(rowwise_alignment(&sv, &sv, i).unwrap(), 1.0);
        assert_eq!(rowwise_alignment(&sv, &flipped, i).unwrap(), -1.0);
    }

    let flat = SimilarityMatrix::from_values(3, vec![1.0, 0.2, 0.2, 0.2, 1.0, 0.2, 0.2, 0.2, 1.0], None).unwrap();
    let sv3 = similarity_matrix(&random_rows(&mut rng, 3, 4), None).unwrap();
    assert!(matches!(alignment_strength(&sv3, &flat), Err(Error::UndefinedCorrelation(_))));
    let sv2 = similarity_matrix(&random_rows(&mut rng, 2, 4), None).unwrap();
    assert!(alignment_strength(&sv2, &sv2).is_err());
    assert!(alignment_strength(&sv, &sv3).is_err());
    assert!(rowwise_alignment(&sv3, &sv3, 0).is_err());
}

#[test]
fn rowwise_matches_oracle() {
    let mut rng = SplitMix64::new(107);
    for _ in 0..100 {
        let sv = similarity_matrix(&random_rows(&mut rng, 6, 3), None).unwrap();
        let sl = similarity_matrix(&random_rows(&mut rng, 6, 3), None).unwrap();
        let (fv, fl) = (full(&sv), full(&sl));
        for i in 0..6 {
            let drop = |r: &Vec<f64>| -> Vec<f64> { r.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, &x)| x).collect() };
            let oracle = common::naive_spearman(&drop(&fv[i]), &drop(&fl[i]));
            assert_eq!(drop(&fv[i]).len(), 5);
            assert!((rowwise_alignment(&sv, &sl, i).unwrap() - oracle).abs() < 1e-12);
        }
    }
}

#[test]
fn fast_permuted_rho_equals_relabelled_recomputation() {
    let mut rng = SplitMix64::new(108);
    for _ in 0..100 {
        let n = 3 + rng.below(20) as usize;
        let sv = similarity_matrix(&random_rows(&mut rng, n, 4), None).unwrap();
        let sl = similarity_matrix(&random_rows(&mut rng, n, 4), None).unwrap();
        let ranked = RankedPair::new(&sv, &sl).unwrap();
        for _ in 0..10 {
            let p = random_perm(&mut rng, n);
            let slow = common::naive_spearman(&common::upper(&full(&sv)), &common::upper(&full(&sl.permuted(&p))));
            assert!((ranked.rho(&p) - slow).abs() < 1e-12);
        }
    }
}

#[test]
fn three_categories_draw_each_non_identity_permutation_equally() {
    let mut counts: HashMap<Vec<usize>, usize> = HashMap::new();
    for i in 0..10_000 {
        let mut rng = SplitMix64::stream(0xFEED, i);
        *counts.entry(draw_non_identity(&mut rng, 3)).or_default() += 1;
    }
    assert_eq!(counts.len(), 5);
    assert!(!counts.contains_key(&vec![0, 1, 2]));
    for (p, c) in &counts {
        let f = *c as f64 / 10_000.0;
        assert!((f - 0.2).abs() <= 0.015, "{p:?}: {f}");
    }
}

#[test]
fn permuted_samples_use_per_sample_streams() {
    let mut rng = SplitMix64::new(109);
    let sv = similarity_matrix(&random_rows(&mut rng, 9, 4), None).unwrap();
    let sl = similarity_matrix(&random_rows(&mut rng, 9, 4), None).unwrap();
    let ranked = RankedPair::new(&sv, &sl).unwrap();
    let rhos = permutation_distribution(&sv, &sl, 300, 42).unwrap();
    assert_eq!(rhos.len(), 300);
    for (i, r) in rhos.iter().enumerate() {
        let p = draw_non_identity(&mut SplitMix64::stream(42, i as u64), 9);
        assert_eq!(*r, ranked.rho(&p));
    }
    // Prefix stability: more samples only append.
    assert_eq!(&permutation_distribution(&sv, &sl, 500, 42).unwrap()[..300], &rhos[..]);
    assert_ne!(permutation_distribution(&sv, &sl, 300, 43).unwrap(), rhos);
    assert!(permutation_distribution(&sv, &sl, 0, 42).is_err());
}

#[test]
fn permutation_samples_do_not_depend_on_thread_count() {
    let mut rng = SplitMix64::new(110);
    let sv = similarity_matrix(&random_rows(&mut rng, 25, 6), None).unwrap();
    let sl = similarity_matrix(&random_rows(&mut rng, 25, 6), None).unwrap();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| align(&sv, &sl, 2000, 7).unwrap())
    };
    let (a, b) = (run(1), run(4));
    assert_eq!(a, b);
    assert_eq!(
        a.relative_strength,
        a.permuted_rhos.iter().filter(|&&r| r < a.rho_true).count() as f64 / 2000.0
    );
}

#[test]
fn true_mapping_beats_any_transposition_of_itself() {
    let mut rng = SplitMix64::new(111);
    let sv = similarity_matrix(&random_rows(&mut rng, 8, 5), None).unwrap();
    let ranked = RankedPair::new(&sv, &sv).unwrap();
    for a in 0..8 {
        for b in a + 1..8 {
            let mut p: Vec<usize> = (0..8).collect();
            p.swap(a, b);
            assert!(ranked.rho(&p) < 1.0);
        }
    }
}

#[test]
fn relative_alignment_counts_strictly_lower() {
    let s: Vec<f64> = (0..1001).map(|i| i as f64 / 1000.0).collect();
    assert_eq!(relative_alignment(2.0, &s).unwrap(), 1.0);
    assert_eq!(relative_alignment(-1.0, &s).unwrap(), 0.0);
    assert_eq!(relative_alignment(0.5, &s).unwrap(), 500.0 / 1001.0);
    assert_eq!(relative_alignment(0.3, &[0.3, 0.3, 0.1]).unwrap(), 1.0 / 3.0);
    assert!(relative_alignment(0.3, &[]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn relabelling_both_modalities_changes_nothing(seed in any::<u64>(), n in 3usize..25) {
        let mut rng = SplitMix64::new(seed);
        let sv = similarity_matrix(&random_rows(&mut rng, n, 4), None).unwrap();
        let sl = similarity_matrix(&random_rows(&mut rng, n, 6), None).unwrap();
        let p = random_perm(&mut rng, n);
        prop_assert_eq!(
            alignment_strength(&sv, &sl).unwrap(),
            alignment_strength(&sv.permuted(&p), &sl.permuted(&p)).unwrap()
        );
    }

    #[test]
    fn alignment_is_bounded_and_symmetric(seed in any::<u64>(), n in 3usize..20) {
        let mut rng = SplitMix64::new(seed);
        let sv = similarity_matrix(&random_rows(&mut rng, n, 3), None).unwrap();
        let sl = similarity_matrix(&random_rows(&mut rng, n, 3), None).unwrap();
        let r = alignment_strength(&sv, &sl).unwrap();
        prop_assert!((-1.0..=1.0).contains(&r));
        prop_assert_eq!(r, alignment_strength(&sl, &sv).unwrap());
    }

    #[test]
    fn align_is_reproducible(seed in any::<u64>(), n_perms in 1usize..200) {
        let mut rng = SplitMix64::new(seed);
        let sv = similarity_matrix(&random_rows(&mut rng, 6, 3), None).unwrap();
        let sl = similarity_matrix(&random_rows(&mut rng, 6, 3), None).unwrap();
        let a = align(&sv, &sl, n_perms, seed).unwrap();
        prop_assert_eq!(a.permuted_rhos.len(), n_perms);
        prop_assert!((0.0..=1.0).contains(&a.relative_strength));
        prop_assert_eq!(a, align(&sv, &sl, n_perms, seed).unwrap());
    }
}
