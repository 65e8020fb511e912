use gdrkit_core::augment::{apply_plan, fundus_aug, AugConfig, TransformKind};
use gdrkit_core::bench::auc_ovr_macro;
use gdrkit_core::bench::metrics::binary_auc;
use gdrkit_core::dcr::{dcr_weights, DcrTable, DomainClassCounts, OccurrenceProbs};
use gdrkit_core::image::{hsv_to_rgb, inscribed_circle_mask, rgb_to_hsv};
use gdrkit_core::losses::{cross_entropy, dahloss_combine, ntxent, softmax, EmbeddingBatch, LogitsBatch};
use gdrkit_core::rng::RngStream;
use gdrkit_core::ImageRgb;
use proptest::prelude::*;

fn image(seed: u64, w: usize, h: usize) -> ImageRgb {
    let mut rng = RngStream::new(seed);
    ImageRgb::from_fn(w, h, |_, _| [rng.uniform(), rng.uniform(), rng.uniform()])
        .unwrap()
        .with_mask(inscribed_circle_mask(w, h))
        .unwrap()
}

fn counts_strategy() -> impl Strategy<Value = (usize, Vec<u64>)> {
    (1usize..5).prop_flat_map(|nd| (Just(nd), prop::collection::vec(0u64..50, nd * 5)))
        .prop_filter("some sample", |(_, c)| c.iter().any(|&v| v > 0))
}

fn table(nd: usize, counts: &[u64], beta: f64) -> DcrTable {
    let domains = (0..nd).map(|d| format!("d{d}")).collect();
    DcrTable::from_counts(&DomainClassCounts::new(domains, 5, counts.to_vec()).unwrap(), beta).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn augmentation_stays_in_unit_range(seed in any::<u64>(), p in 0.0f64..=1.0, w in 8usize..24, h in 8usize..24) {
        let img = image(seed, w, h);
        let cfg = AugConfig::default().with_probability(p);
        let (out, plan) = fundus_aug(&img, &cfg, &mut RngStream::new(seed ^ 0x55));
        prop_assert!(out.data().iter().all(|v| (0.0..=1.0).contains(v)));
        prop_assert_eq!((out.width(), out.height()), (w, h));
        let replay = apply_plan(&img, &plan);
        prop_assert_eq!(replay.data(), out.data());
    }

    #[test]
    fn each_transform_at_identity_is_near_noop(seed in any::<u64>(), k in 0usize..9) {
        let img = image(seed, 16, 12);
        let mut cfg = AugConfig::default().with_identity_ranges().with_probability(0.0);
        cfg.setting_mut(TransformKind::ALL[k]).probability = 1.0;
        let (out, _) = fundus_aug(&img, &cfg, &mut RngStream::new(seed));
        for (a, b) in out.data().iter().zip(img.data()) {
            prop_assert!((a - b).abs() <= 1e-4);
        }
    }

    #[test]
    fn zero_probability_is_exact_identity(seed in any::<u64>()) {
        let img = image(seed, 12, 12);
        let (out, plan) = fundus_aug(&img, &AugConfig::default().with_probability(0.0), &mut RngStream::new(seed));
        prop_assert_eq!(out.data(), img.data());
        prop_assert_eq!(plan.applied().count(), 0);
    }

    #[test]
    fn dcr_dispersion_nondecreasing_in_beta((nd, counts) in counts_strategy(), b1 in 0.0f64..=1.0, b2 in 0.0f64..=1.0) {
        let (lo, hi) = if b1 <= b2 { (b1, b2) } else { (b2, b1) };
        prop_assert!(table(nd, &counts, lo).dispersion() <= table(nd, &counts, hi).dispersion() * (1.0 + 1e-12));
    }

    #[test]
    fn dcr_weights_scale_free((nd, counts) in counts_strategy(), beta in 0.0f64..=1.0, k in 2u64..7) {
        let a = table(nd, &counts, beta);
        let scaled: Vec<u64> = counts.iter().map(|c| c * k).collect();
        let b = table(nd, &scaled, beta);
        for (x, y) in a.w.iter().zip(&b.w) {
            prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
        }
    }

    #[test]
    fn rarer_pairs_weigh_more((nd, counts) in counts_strategy(), beta in 0.01f64..=1.0) {
        let t = table(nd, &counts, beta);
        for i in 0..counts.len() {
            for j in 0..counts.len() {
                if counts[i] > 0 && counts[j] > 0 && counts[i] < counts[j] {
                    prop_assert!(t.w[i] > t.w[j]);
                }
            }
        }
    }

    #[test]
    fn ce_invariant_to_row_permutation_and_shift(seed in any::<u64>(), rows in 1usize..8, shift in -5.0f64..5.0) {
        let c = 4;
        let mut rng = RngStream::new(seed);
        let logits: Vec<f64> = (0..rows * c).map(|_| rng.normal() * 3.0).collect();
        let labels: Vec<usize> = (0..rows).map(|_| rng.below(c)).collect();
        let weights: Vec<f64> = (0..rows).map(|_| 0.1 + rng.uniform()).collect();
        let base = cross_entropy(&LogitsBatch::new(c, logits.clone(), labels.clone(), weights.clone()).unwrap()).unwrap();
        let shifted: Vec<f64> = logits.iter().map(|z| z + shift).collect();
        let s = cross_entropy(&LogitsBatch::new(c, shifted, labels.clone(), weights.clone()).unwrap()).unwrap();
        prop_assert!((base.loss - s.loss).abs() <= 1e-10);
        let perm: Vec<usize> = (0..rows).rev().collect();
        let pl: Vec<f64> = perm.iter().flat_map(|&r| logits[r * c..(r + 1) * c].to_vec()).collect();
        let p = cross_entropy(&LogitsBatch::new(
            c,
            pl,
            perm.iter().map(|&r| labels[r]).collect(),
            perm.iter().map(|&r| weights[r]).collect(),
        ).unwrap()).unwrap();
        prop_assert!((base.loss - p.loss).abs() <= 1e-12 * base.loss.abs().max(1.0));
        // gradient rows sum to zero
        for row in base.grad.chunks(c) {
            prop_assert!(row.iter().sum::<f64>().abs() <= 1e-12);
        }
    }

    #[test]
    fn ntxent_within_bounds(seed in any::<u64>(), n in 1usize..6, tau in 0.05f64..1.0) {
        let d = 4;
        let mut rng = RngStream::new(seed);
        let strong: Vec<f64> = (0..n * d).map(|_| rng.normal()).collect();
        let weak: Vec<f64> = (0..n * d).map(|_| rng.normal()).collect();
        let batch = EmbeddingBatch::normalized(d, strong, weak).unwrap();
        let out = ntxent(&batch, tau).unwrap();
        prop_assert!(out.loss >= 0.0 && out.loss.is_finite());
        prop_assert!(out.loss <= 2.0 / tau + ((2 * n - 1) as f64).ln() + 1e-9);
    }

    #[test]
    fn hybrid_endpoints(seed in any::<u64>()) {
        let mut rng = RngStream::new(seed);
        let sup = cross_entropy(&LogitsBatch::unweighted(3, (0..6).map(|_| rng.normal()).collect(), vec![0, 2]).unwrap()).unwrap();
        let scon = ntxent(&EmbeddingBatch::normalized(2, (0..4).map(|_| rng.normal()).collect(), (0..4).map(|_| rng.normal()).collect()).unwrap(), 0.1).unwrap();
        prop_assert_eq!(dahloss_combine(&sup, &scon, 0.0).unwrap().loss, sup.loss);
        prop_assert_eq!(dahloss_combine(&sup, &scon, 1.0).unwrap().loss, scon.loss);
    }

    #[test]
    fn auc_matches_pairwise_count(seed in any::<u64>(), n in 2usize..40) {
        let mut rng = RngStream::new(seed);
        let mut pos: Vec<bool> = (0..n).map(|_| rng.bernoulli(0.5)).collect();
        pos[0] = true;
        pos[1] = false;
        let scores: Vec<f64> = (0..n).map(|_| (rng.uniform() * 5.0).floor()).collect();
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for i in 0..n {
            for j in 0..n {
                if pos[i] && !pos[j] {
                    pairs += 1.0;
                    wins += if scores[i] > scores[j] { 1.0 } else if scores[i] == scores[j] { 0.5 } else { 0.0 };
                }
            }
        }
        prop_assert!((binary_auc(&scores, &pos).unwrap() - wins / pairs).abs() <= 1e-12);
    }

    #[test]
    fn macro_auc_invariant_to_sample_order(seed in any::<u64>(), n in 6usize..30) {
        let c = 3;
        let mut rng = RngStream::new(seed);
        let mut labels: Vec<usize> = (0..n).map(|_| rng.below(c)).collect();
        labels[..3].copy_from_slice(&[0, 1, 2]);
        let raw: Vec<f64> = (0..n * c).map(|_| rng.normal()).collect();
        let scores: Vec<f64> = raw.chunks(c).flat_map(softmax).collect();
        let a = auc_ovr_macro(&scores, &labels, c).unwrap();
        prop_assert!((0.0..=1.0).contains(&a));
        let rev_scores: Vec<f64> = scores.chunks(c).rev().flatten().copied().collect();
        let rev_labels: Vec<usize> = labels.iter().rev().copied().collect();
        prop_assert!((a - auc_ovr_macro(&rev_scores, &rev_labels, c).unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn hsv_round_trip(r in 0.0f64..=1.0, g in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let back = hsv_to_rgb(rgb_to_hsv([r, g, b]));
        for (x, y) in back.iter().zip([r, g, b]) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }
}

#[test]
fn dcr_hand_example() {
    let probs = OccurrenceProbs {
        domains: vec!["d".into()],
        n_classes: 2,
        q: vec![0.75, 0.25],
    };
    let w = dcr_weights(&probs, 1.0).unwrap().w;
    assert!((w[0] - 4.0 / 3.0).abs() < 1e-12);
    assert!((w[1] - 4.0).abs() < 1e-12);
}
