use ndarray::{Array1, Array2};
use proptest::prelude::*;

use mieeg::augment::{augment_set, AugmentConfig};
use mieeg::classify::mdn_classify;
use mieeg::data::{read_binary, read_csv, split_dataset, stratified_subsample, write_binary, write_csv, CsvOptions, Epoch, EpochSet, SplitSpec};
use mieeg::metrics::{classwise_metrics, confusion, divergence, kappa_balanced, paired_ttest};
use mieeg::network::{parse_structure, render_structure};
use mieeg::seed;
use mieeg::walsh::{build_walsh, class_targets, hamming, WalshCodebook};

fn labeled_set(counts: &[usize], channels: usize, samples: usize, fill: f64) -> EpochSet<f64> {
    let mut epochs = Vec::new();
    for (k, &n) in counts.iter().enumerate() {
        for i in 0..n {
            let data = Array2::from_shape_fn((channels, samples), |(c, t)| fill * (i + c * 7 + t * 3) as f64 + k as f64);
            epochs.push(Epoch::new(format!("s{k}"), k + 1, 128.0, data));
        }
    }
    EpochSet::new(epochs, counts.len()).unwrap()
}

fn set_from(values: &[f64], labels: &[usize], channels: usize, samples: usize) -> EpochSet<f64> {
    let per = channels * samples;
    let epochs = labels
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            let data = Array2::from_shape_vec((channels, samples), values[i * per..(i + 1) * per].to_vec()).unwrap();
            Epoch::new("p", l, 250.0, data)
        })
        .collect();
    EpochSet::partial(epochs, 3).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn split_is_a_stratified_partition(counts in prop::collection::vec(2usize..170, 2..4), seed in any::<u64>()) {
        let total: usize = counts.iter().sum();
        prop_assume!((4..=500).contains(&total));
        let set = labeled_set(&counts, 1, 2, 0.0);
        let split = split_dataset(&set, &SplitSpec { seed, ..SplitSpec::default() }).unwrap();
        let mut all: Vec<usize> = split.train.iter().chain(&split.validation).chain(&split.test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..total).collect::<Vec<_>>());
        let labels = set.labels();
        for (k, &n) in counts.iter().enumerate() {
            let in_class = |idx: &[usize]| idx.iter().filter(|&&i| labels[i] == k + 1).count();
            let test = n * 2 / 10;
            let val = (n - test) / 10;
            prop_assert_eq!(in_class(&split.test), test);
            prop_assert_eq!(in_class(&split.validation), val);
            prop_assert_eq!(in_class(&split.train), n - test - val);
        }
    }

    #[test]
    fn subsample_is_an_exact_subset(counts in prop::collection::vec(2usize..60, 2..4), frac in 0.05f64..1.0, seed in any::<u64>()) {
        let set = labeled_set(&counts, 1, 2, 0.0);
        let pool: Vec<usize> = (0..set.len()).collect();
        let total = ((set.len() as f64 * frac) as usize).max(1);
        let picked = stratified_subsample(&set, &pool, total, seed).unwrap();
        prop_assert_eq!(picked.len(), total);
        prop_assert!(picked.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(picked.iter().all(|&i| i < set.len()));
    }

    #[test]
    fn binary_round_trip(
        labels in prop::collection::vec(1usize..=3, 1..12),
        channels in 1usize..4,
        samples in 1usize..20,
        seed in any::<u64>(),
    ) {
        use rand::Rng as _;
        let mut rng = seed::rng(seed);
        // Samples are stored as f32, so draw values f32 can hold exactly.
        let values: Vec<f64> = (0..labels.len() * channels * samples).map(|_| rng.random_range(-1e3f32..1e3) as f64).collect();
        let set = set_from(&values, &labels, channels, samples);
        let mut buf = Vec::new();
        write_binary(&set, &mut buf).unwrap();
        let back: EpochSet<f64> = read_binary(buf.as_slice()).unwrap();
        prop_assert_eq!(back.labels(), set.labels());
        prop_assert_eq!(back.fingerprint(), set.fingerprint());

        let epochs32 = set.iter().map(|e| Epoch::new(e.subject_id.clone(), e.label, e.sampling_rate, e.data.mapv(|v| v as f32))).collect();
        let set32 = EpochSet::partial(epochs32, 3).unwrap();
        let mut buf = Vec::new();
        write_binary(&set32, &mut buf).unwrap();
        let back32: EpochSet<f32> = read_binary(buf.as_slice()).unwrap();
        prop_assert_eq!(back32.fingerprint(), set32.fingerprint());
    }

    #[test]
    fn csv_round_trip(labels in prop::collection::vec(1usize..=3, 1..8), channels in 1usize..4, samples in 1usize..10, seed in any::<u64>()) {
        use rand::Rng as _;
        let mut rng = seed::rng(seed);
        let values: Vec<f64> = (0..labels.len() * channels * samples).map(|_| rng.random_range(-50.0..50.0)).collect();
        let set = set_from(&values, &labels, channels, samples);
        let mut buf = Vec::new();
        write_csv(&set, &mut buf).unwrap();
        let opts = CsvOptions { sampling_rate: 250.0, num_classes: Some(3) };
        let back: EpochSet<f64> = read_csv(buf.as_slice(), &opts).unwrap();
        prop_assert_eq!(back.labels(), set.labels());
        for (a, b) in back.iter().zip(set.iter()) {
            prop_assert_eq!(&a.data, &b.data);
        }
    }

    #[test]
    fn augmentation_multiplies_the_set(n in 1usize..30, copies in 0usize..5, samples in 2usize..40, seed in any::<u64>()) {
        let set = labeled_set(&[n, 1], 2, samples, 0.01);
        let cfg = AugmentConfig { copies_per_epoch: copies, seed, ..AugmentConfig::default() };
        let out = augment_set(&set, &cfg).unwrap();
        prop_assert_eq!(out.len(), set.len() * (1 + copies));
        prop_assert_eq!(out.count_origin(true), set.len() * copies);
        prop_assert_eq!(&out.epochs()[..set.len()], set.epochs());
        prop_assert_eq!(out.class_counts(), set.class_counts().iter().map(|c| c * (1 + copies)).collect::<Vec<_>>());
    }

    #[test]
    fn walsh_rows_are_equidistant(log_m in 1u32..8, a in any::<prop::sample::Index>(), b in any::<prop::sample::Index>()) {
        let m = 1usize << log_m;
        let w = build_walsh(m).unwrap();
        let (i, j) = (a.index(m), b.index(m));
        let d = hamming(&w.row(i).to_vec(), &w.row(j).to_vec()).unwrap();
        prop_assert_eq!(d, if i == j { 0 } else { m / 2 });
        prop_assert!(w.row(0).iter().all(|&v| v == 1));
    }

    #[test]
    fn mdn_picks_the_first_nearest_row(log_m in 2u32..6, c_frac in 0.0f64..1.0, steps in prop::collection::vec(0u8..5, 32)) {
        let m = 1usize << log_m;
        let c = 2 + ((m - 3) as f64 * c_frac) as usize;
        let book = WalshCodebook::new(m, c).unwrap();
        let ofe: Vec<f64> = steps[..m].iter().map(|&s| s as f64 * 0.25).collect();
        let got = mdn_classify(&ofe, &book).unwrap();
        let dist = |k: usize| -> f64 {
            class_targets(m, c).unwrap()[k - 1].iter().zip(&ofe).map(|(&r, o)| (o - r as f64).powi(2)).sum()
        };
        for k in 1..=c {
            prop_assert!(dist(got) <= dist(k));
            if k < got {
                prop_assert!(dist(k) > dist(got));
            }
        }
    }

    #[test]
    fn ttest_is_antisymmetric(pairs in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 2..40)) {
        let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let ab = paired_ttest(&a, &b).unwrap();
        let ba = paired_ttest(&b, &a).unwrap();
        prop_assert!((ab.p_value - ba.p_value).abs() <= 1e-12);
        prop_assert!(ab.t == -ba.t || (ab.t.is_nan() && ba.t.is_nan()));
        prop_assert!((0.0..=1.0).contains(&ab.p_value));
        prop_assert_eq!(ab.df, a.len() - 1);
    }

    #[test]
    fn divergence_ignores_scale_and_order(seed in any::<u64>(), scale in 0.01f64..100.0) {
        use rand::seq::SliceRandom;
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = seed::rng(seed);
        let (n, d) = (30, 3);
        let labels: Vec<usize> = (0..2 * n).map(|i| 1 + i / n).collect();
        let feats = Array2::from_shape_fn((2 * n, d), |(i, j)| {
            let v: f64 = StandardNormal.sample(&mut rng);
            v + if i >= n && j == 0 { 1.5 } else { 0.0 }
        });
        let base = divergence(&feats, &labels, 2).unwrap();
        prop_assert!(base >= 0.0);
        let scaled = divergence(&(&feats * scale), &labels, 2).unwrap();
        prop_assert!((scaled - base).abs() <= 1e-8 * base.max(1.0));
        let mut order: Vec<usize> = (0..2 * n).collect();
        order.shuffle(&mut rng);
        let shuffled = feats.select(ndarray::Axis(0), &order);
        let relabeled: Vec<usize> = order.iter().map(|&i| labels[i]).collect();
        let permuted = divergence(&shuffled, &relabeled, 2).unwrap();
        prop_assert!((permuted - base).abs() <= 1e-8 * base.max(1.0));
    }

    #[test]
    fn confusion_counts_every_prediction(pairs in prop::collection::vec((1usize..=4, 1usize..=4), 1..200)) {
        let (preds, truth): (Vec<usize>, Vec<usize>) = pairs.iter().copied().unzip();
        let cm = confusion(&preds, &truth, 4).unwrap();
        prop_assert_eq!(cm.total(), pairs.len() as u64);
        let hits = pairs.iter().filter(|(p, t)| p == t).count();
        prop_assert_eq!(cm.correct(), hits as u64);
        let report = classwise_metrics(&cm);
        prop_assert!((report.kappa - kappa_balanced(hits as f64 / pairs.len() as f64, 4)).abs() < 1e-12);
        for m in &report.classes {
            for v in [m.ppv, m.npv, m.sensitivity, m.f_measure] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }

    #[test]
    fn structure_text_round_trips(planes in prop::collection::vec(1usize..12, 3..6), k in 1usize..6) {
        // Every block pools, so the last kernel is the length left after the pools.
        let input_len = 1usize << (planes.len() - 1);
        let mut blocks: Vec<String> = planes.windows(2).map(|w| format!("{},{k},{}", w[0], w[1])).collect();
        let last = *planes.last().unwrap();
        blocks.push(format!("{last},1,{last}"));
        let text = blocks.join(" / ");
        let spec = parse_structure(&text, planes[0], input_len, last).unwrap();
        prop_assert_eq!(render_structure(&spec), text);
        prop_assert_eq!(*spec.lengths().unwrap().last().unwrap(), 1);
    }
}

#[test]
fn kappa_anchors() {
    for c in 2..=8 {
        assert!(kappa_balanced(1.0 / c as f64, c).abs() < 1e-15);
        assert!((kappa_balanced(1.0, c) - 1.0).abs() < 1e-15);
    }
}

#[test]
fn class_targets_skip_the_constant_row() {
    let w = build_walsh(16).unwrap();
    let t = class_targets(16, 4).unwrap();
    for (k, row) in t.iter().enumerate() {
        assert_eq!(row.as_slice(), w.row(k + 1).to_vec().as_slice());
    }
    let ones = Array1::<u8>::ones(16);
    assert!(t.iter().all(|r| r.as_slice() != ones.as_slice().unwrap()));
}
