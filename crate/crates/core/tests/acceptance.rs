//! Acceptance suite. Prints one `PASS`/`FAIL` line per criterion. Exits
//! non-zero if a criterion fails that is not listed in `KNOWN_RED`, or if a
//! listed one starts passing.
//!
//! Pinned tolerances:
//! - kappa pairs: |round(kappa, printed decimals) - printed| <= 0.002
//! - t-test: p < 1e-10 and within 10x of 2.33e-12; quadrature oracle |dp| <= 1e-10
//! - gradients: |a - n| / max(|a|, |n|, 1e-6) <= 1e-4, central step 1e-6
//! - augmentation: spectra 1e-9 relative to the channel's peak bin, pre-noise means <= 1e-9
//! - CSP: whitening 1e-8, identical classes 0.5 +- 1e-6
//! - divergence: zero case <= 1e-9, linear invariance 1e-6 relative

use std::process::ExitCode;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use ndarray::{Array1, Array2, Array3, Axis};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use mieeg::augment::{augment_epoch_traced, augment_set, substream, AugmentConfig};
use mieeg::classify::{mdn_classify, MdnClassifier, Member, MetaScheme, SchemeKind};
use mieeg::data::{generate_synthetic, Epoch, EpochSet, Origin, SyntheticSpec};
use mieeg::experiment::{run_experiment_on, Augmentation, CspSettings, ExperimentPlan, ExperimentReport, Transform};
use mieeg::metrics::{divergence, kappa_balanced, paired_ttest};
use mieeg::network::*;
use mieeg::preprocess::{apply_filter_bank, class_covariance, csp_pair, fit_csp, CspScheme, FilterBankSpec};
use mieeg::seed;
use mieeg::walsh::{build_walsh, class_targets, hamming, WalshCodebook};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

fn normal(rng: &mut seed::Rng) -> f64 {
    StandardNormal.sample(rng)
}

// 1

const W8: [[u8; 8]; 8] = [
    [1, 1, 1, 1, 1, 1, 1, 1],
    [1, 0, 1, 0, 1, 0, 1, 0],
    [1, 1, 0, 0, 1, 1, 0, 0],
    [1, 0, 0, 1, 1, 0, 0, 1],
    [1, 1, 1, 1, 0, 0, 0, 0],
    [1, 0, 1, 0, 0, 1, 0, 1],
    [1, 1, 0, 0, 0, 0, 1, 1],
    [1, 0, 0, 1, 0, 1, 1, 0],
];

fn walsh_fidelity() -> Outcome {
    let t = Instant::now();
    let w = build_walsh(8).unwrap();
    let w8_ok = (0..8).all(|i| (0..8).all(|j| w[[i, j]] == W8[i][j]));
    let mut pairs = 0;
    let mut bad = 0;
    for m in [2, 4, 8, 16, 32, 64] {
        let w = build_walsh(m).unwrap();
        for i in 0..m {
            for j in i + 1..m {
                pairs += 1;
                let (a, b) = (w.row(i).to_vec(), w.row(j).to_vec());
                if hamming(&a, &b).unwrap() != m / 2 {
                    bad += 1;
                }
            }
        }
    }
    let rw = class_targets(16, 2).unwrap();
    let rw1: Vec<u8> = [1, 0].repeat(8);
    let rw2: Vec<u8> = [1, 1, 0, 0].repeat(4);
    let fig_ok = rw == vec![rw1, rw2];
    let el = t.elapsed();
    outcome(
        w8_ok && bad == 0 && fig_ok && within(el, 1.0),
        format!("W_8 match {w8_ok}; {pairs} row pairs, {bad} off M/2; RW_1/RW_2 {fig_ok}; {:.3}s", el.as_secs_f64()),
    )
}

// 2

fn weight_counts() -> Outcome {
    let s1 = parse_structure("2,7,40 / 40,7,40 / 40,7,40 / 40,7,40 / 40,16,16", 2, 251, 16).unwrap();
    let divfe = count_weights(&s1, 2);
    let conv = |in_planes, k, out_planes| Conv2dLayer {
        in_planes,
        kernel_h: k,
        kernel_w: k,
        out_planes,
    };
    let alex_conv = count_conv2d_weights(&[
        conv(3, 11, 96),
        conv(96, 5, 256),
        conv(256, 3, 192),
        conv(192, 3, 192),
        conv(192, 3, 128),
    ]);
    let dense = |inputs, outputs| DenseLayer { inputs, outputs };
    let alex_dense = count_dense_weights(&[dense(13 * 13 * 128, 2048), dense(2048, 2048), dense(2048, 2)]);
    outcome(
        divfe == 44_432 && alex_conv == 1_644_576 && alex_dense == 48_500_736,
        format!("S1 {divfe}, AlexNet conv {alex_conv}, dense {alex_dense}"),
    )
}

// 3

// group, classes, then `accuracy(kappa)` cells; the last cell of each row is the mean.
const KAPPA_ROWS: &str = "
4 2 96.3(0.926)
8 4 96.5(0.953)
12 2 88.6(0.772)
20 2 100(1.0) 100(1.0) 92.8(0.86) 100(1.0) 100(1.0) 98.5(0.97)
20 2 96.4(0.93) 96.4(0.93) 91.0(0.82) 96.4(0.93) 96.4(0.93) 95.3(0.906)
20 2 98.1(0.96) 100(1.0) 87.2(0.74) 98.2(0.86) 98.2(0.86) 96.3(0.926)
20 2 85.4(0.71) 60.0(0.2) 65.4(0.31) 83.6(0.67) 72.7(0.45) 73.4(0.468)
21 4 95.8(0.944)
21 4 45.1(0.268)
21 4 96.5(0.953)
21 4 55.7(0.410)
22 2 95.3(0.91) 78.5(0.57) 73.7(0.47) 92.3(0.85) 96.0(0.92) 88.8(0.78) 82.9(0.66) 78.7(0.57) 80.0(0.60) 85.1(0.702)
22 2 62.7(0.25) 61.9(0.24) 57.7(0.15) 82.6(0.65) 88.4(0.77) 77.1(0.54) 70.2(0.40) 68.0(0.36) 67.5(0.35) 70.6(0.413)
22 2 95.0(0.9) 79.5(0.59) 82.9(0.66) 98.0(0.96) 91.4(0.83) 93.5(0.87) 90.6(0.81) 86.3(0.73) 80.5(0.61) 88.6(0.772)
22 2 67.5(0.35) 69.2(0.38) 65.7(0.31) 87.7(0.75) 63.8(0.28) 65.6(0.31) 60.4(0.21) 70.4(0.41) 66.6(0.33) 68.5(0.370)
23 4 79.1(0.721)
23 4 45.3(0.270)
23 4 79.3(0.724)
23 4 49.1(0.322)
";

fn kappa_pairs() -> Outcome {
    let mut total = 0;
    let mut misses = Vec::new();
    for line in KAPPA_ROWS.lines().filter(|l| !l.trim().is_empty()) {
        let mut tok = line.split_whitespace();
        let group = tok.next().unwrap();
        let classes: usize = tok.next().unwrap().parse().unwrap();
        for cell in tok {
            let (acc, kappa) = cell.trim_end_matches(')').split_once('(').unwrap();
            let decimals = kappa.split_once('.').map_or(0, |(_, f)| f.len()) as i32;
            let printed: f64 = kappa.parse().unwrap();
            let acc: f64 = acc.parse().unwrap();
            let scale = 10f64.powi(decimals);
            let computed = (kappa_balanced(acc / 100.0, classes) * scale).round() / scale;
            total += 1;
            if (computed - printed).abs() > 0.002 {
                misses.push(format!("g{group} {acc}({kappa}) -> {:.3}", kappa_balanced(acc / 100.0, classes)));
            }
        }
    }
    let detail = if misses.is_empty() {
        format!("{total}/{total} pairs")
    } else {
        format!("{}/{total} pairs; off: {}", total - misses.len(), misses.join(", "))
    };
    outcome(misses.is_empty(), detail)
}

// 4

const NTS_A: [f64; 26] = [
    98.1, 100.0, 87.2, 98.2, 98.2, // III/IVa
    98.3, 94.3, 96.9, // III/IIIa
    95.0, 79.5, 82.9, 98.0, 91.4, 93.5, 90.6, 86.3, 80.5, // IV/IIb
    90.0, 65.4, 91.6, 71.4, 60.7, 65.1, 88.9, 91.5, 89.0, // IV/IIa
];
const NTS_NA: [f64; 26] = [
    85.4, 60.0, 65.4, 83.6, 72.7, //
    67.7, 54.2, 45.4, //
    67.5, 69.2, 65.7, 87.7, 63.8, 65.6, 60.4, 70.4, 66.6, //
    60.9, 34.5, 67.5, 41.8, 36.4, 44.1, 41.3, 59.8, 56.0,
];

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, eps: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if depth == 0 || (left + right - whole).abs() <= 15.0 * eps {
        return left + right + (left + right - whole) / 15.0;
    }
    simpson(f, a, m, fa, flm, fm, left, eps / 2.0, depth - 1) + simpson(f, m, b, fm, frm, fb, right, eps / 2.0, depth - 1)
}

fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson(f, a, b, fa, fm, fb, whole, 1e-15, 40)
}

/// Two-tailed Student-t tail by quadrature. With x = sqrt(df) tan(theta) the
/// density is proportional to cos^(df-1)(theta) on [-pi/2, pi/2].
fn t_tail_quadrature(t: f64, df: f64) -> f64 {
    let f = |th: f64| th.cos().powf(df - 1.0);
    let half = std::f64::consts::FRAC_PI_2;
    let th = (t.abs() / df.sqrt()).atan();
    integrate(&f, th, half) / integrate(&f, 0.0, half)
}

fn paired_t() -> Outcome {
    let r = paired_ttest(&NTS_A, &NTS_NA).unwrap();
    let reference = 2.33e-12;
    let ratio = r.p_value / reference;
    let reference_ok = r.p_value < 1e-10 && (0.1..=10.0).contains(&ratio);

    let mut rng = seed::rng(404);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let n = rng.random_range(3..=30);
        let shift = rng.random_range(-1.5..1.5);
        let a: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
        let b: Vec<f64> = a.iter().map(|x| x + shift + 0.8 * normal(&mut rng)).collect();
        let res = paired_ttest(&a, &b).unwrap();
        worst = worst.max((res.p_value - t_tail_quadrature(res.t, res.df as f64)).abs());
    }
    outcome(
        reference_ok && worst <= 1e-10,
        format!(
            "26 subjects: t={:.3} df={} p={:.3e} ({ratio:.2}x printed); quadrature max |dp|={worst:.1e}",
            r.t, r.df, r.p_value
        ),
    )
}

// 5

const FD_STEP: f64 = 1e-6;

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

fn random3(rng: &mut seed::Rng, dim: (usize, usize, usize)) -> Array3<f64> {
    Array3::from_shape_fn(dim, |_| normal(rng))
}

/// Max relative error of `analytic` against central differences of `loss`
/// with respect to every element of `x`.
fn fd_check<D: ndarray::Dimension>(
    x: &mut ndarray::Array<f64, D>,
    analytic: &ndarray::Array<f64, D>,
    loss: &mut dyn FnMut(&ndarray::Array<f64, D>) -> f64,
) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..x.len() {
        let orig = x.as_slice().unwrap()[i];
        x.as_slice_mut().unwrap()[i] = orig + FD_STEP;
        let up = loss(x);
        x.as_slice_mut().unwrap()[i] = orig - FD_STEP;
        let down = loss(x);
        x.as_slice_mut().unwrap()[i] = orig;
        let numeric = (up - down) / (2.0 * FD_STEP);
        worst = worst.max(rel_err(analytic.as_slice().unwrap()[i], numeric));
    }
    worst
}

fn dot3(a: &Array3<f64>, b: &Array3<f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn layer_checks(rng: &mut seed::Rng) -> Vec<(&'static str, f64)> {
    let mut out = Vec::new();

    for (name, padding) in [("conv same", Padding::Same), ("conv valid", Padding::Valid)] {
        let mut x = random3(rng, (2, 3, 9));
        let mut w = random3(rng, (4, 3, 5));
        let mut b = Array1::from_shape_fn(4, |_| normal(rng));
        let y = conv1d_forward(&x, &w, &b, padding).unwrap();
        let r = random3(rng, y.dim());
        let g = conv1d_backward(&x, &w, padding, &r);
        let (w0, b0, x0) = (w.clone(), b.clone(), x.clone());
        let ex = fd_check(&mut x, &g.input, &mut |x| dot3(&conv1d_forward(x, &w0, &b0, padding).unwrap(), &r));
        let ew = fd_check(&mut w, &g.weights, &mut |w| dot3(&conv1d_forward(&x0, w, &b0, padding).unwrap(), &r));
        let eb = fd_check(&mut b, &g.bias, &mut |b| dot3(&conv1d_forward(&x0, &w0, b, padding).unwrap(), &r));
        out.push((name, ex.max(ew).max(eb)));
    }

    // Keep inputs away from the kink so the finite difference is smooth.
    let mut x = random3(rng, (2, 3, 8)).mapv(|v| if v.abs() < 0.05 { v + 0.1 } else { v });
    let r = random3(rng, x.dim());
    let g = relu_backward(&relu(&x), &r);
    out.push(("relu", fd_check(&mut x, &g, &mut |x| dot3(&relu(x), &r))));

    let mut x = random3(rng, (2, 3, 9));
    let (y, idx) = maxpool_forward(&x);
    let r = random3(rng, y.dim());
    let g = maxpool_backward(&r, &idx, 9);
    out.push(("maxpool", fd_check(&mut x, &g, &mut |x| dot3(&maxpool_forward(x).0, &r))));

    let mut bn = BatchNorm::<f64>::new(3);
    bn.gamma = Array1::from_shape_fn(3, |_| 1.0 + 0.5 * normal(rng));
    bn.beta = Array1::from_shape_fn(3, |_| normal(rng));
    bn.running_mean = Array1::from_shape_fn(3, |_| normal(rng));
    bn.running_var = Array1::from_shape_fn(3, |_| 0.5 + rng.random::<f64>());
    for (name, mode) in [("batchnorm train", Mode::Train), ("batchnorm eval", Mode::Eval)] {
        let mut x = random3(rng, (4, 3, 6));
        let r = random3(rng, x.dim());
        let fwd = |x: &Array3<f64>, bn: &BatchNorm<f64>| batchnorm_forward(x, &mut bn.clone(), mode).unwrap();
        let (_, cache) = fwd(&x, &bn);
        let g = batchnorm_backward(&cache, &bn.gamma, &r);
        let ex = fd_check(&mut x, &g.input, &mut |x| dot3(&fwd(x, &bn).0, &r));
        let mut gamma = bn.gamma.clone();
        let eg = fd_check(&mut gamma, &g.gamma, &mut |gm| {
            let mut b2 = bn.clone();
            b2.gamma = gm.clone();
            dot3(&fwd(&x, &b2).0, &r)
        });
        let mut beta = bn.beta.clone();
        let eb = fd_check(&mut beta, &g.beta, &mut |bt| {
            let mut b2 = bn.clone();
            b2.beta = bt.clone();
            dot3(&fwd(&x, &b2).0, &r)
        });
        out.push((name, ex.max(eg).max(eb)));
    }

    // Same seed, same mask: the layer is linear in x for a fixed draw.
    let mut x = random3(rng, (2, 3, 8));
    let r = random3(rng, x.dim());
    let drop = |x: &Array3<f64>| dropout_forward(x, 0.3, Mode::Train, &mut seed::rng(11));
    let mask = drop(&x).1.unwrap();
    out.push(("dropout", fd_check(&mut x, &(&r * &mask), &mut |x| dot3(&drop(x).0, &r))));
    out
}

fn composite_check(rng: &mut seed::Rng) -> f64 {
    let spec = parse_structure("2,3,3 / 3,3,4 / 4,4,4", 2, 16, 4).unwrap().with_regularization(true, 0.0);
    let mut net = Network::<f64>::new(spec, 5).unwrap();
    for b in &mut net.params.blocks {
        b.bias.mapv_inplace(|_| 0.1 * normal(rng));
        if let Some(bn) = &mut b.batch_norm {
            let p = bn.gamma.len();
            bn.gamma = Array1::from_shape_fn(p, |_| 1.0 + 0.3 * normal(rng));
            bn.beta = Array1::from_shape_fn(p, |_| 0.3 * normal(rng));
            bn.running_mean = Array1::from_shape_fn(p, |_| 0.2 * normal(rng));
            bn.running_var = Array1::from_shape_fn(p, |_| 0.5 + rng.random::<f64>());
        }
    }
    let x = random3(rng, (3, 2, 16));
    let targets = Array2::from_shape_fn((3, 4), |_| if rng.random::<bool>() { 1.0 } else { 0.0 });
    let (_, grads) = net.loss_and_gradients(&x, &targets, Mode::Eval, None).unwrap();
    let loss = |n: &mut Network<f64>| n.loss_and_gradients(&x, &targets, Mode::Eval, None).unwrap().0;

    let mut worst: f64 = 0.0;
    for (bi, g) in grads.iter().enumerate() {
        let mut probe = |get: &dyn Fn(&mut Network<f64>) -> &mut [f64], analytic: &[f64]| {
            for (i, &a) in analytic.iter().enumerate() {
                let orig = get(&mut net)[i];
                get(&mut net)[i] = orig + FD_STEP;
                let up = loss(&mut net);
                get(&mut net)[i] = orig - FD_STEP;
                let down = loss(&mut net);
                get(&mut net)[i] = orig;
                worst = worst.max(rel_err(a, (up - down) / (2.0 * FD_STEP)));
            }
        };
        probe(&|n| n.params.blocks[bi].weights.as_slice_mut().unwrap(), g.weights.as_slice().unwrap());
        probe(&|n| n.params.blocks[bi].bias.as_slice_mut().unwrap(), g.bias.as_slice().unwrap());
        if let (Some(gg), Some(gb)) = (&g.gamma, &g.beta) {
            probe(
                &|n| n.params.blocks[bi].batch_norm.as_mut().unwrap().gamma.as_slice_mut().unwrap(),
                gg.as_slice().unwrap(),
            );
            probe(
                &|n| n.params.blocks[bi].batch_norm.as_mut().unwrap().beta.as_slice_mut().unwrap(),
                gb.as_slice().unwrap(),
            );
        }
    }
    worst
}

fn gradients() -> Outcome {
    let t = Instant::now();
    let mut rng = seed::rng(55);
    let layers = layer_checks(&mut rng);
    let composite = composite_check(&mut rng);
    let el = t.elapsed();
    let layer_worst = layers.iter().map(|l| l.1).fold(0.0, f64::max);
    let parts: Vec<String> = layers.iter().map(|(n, e)| format!("{n} {e:.1e}")).collect();
    outcome(
        layer_worst <= 1e-4 && composite <= 1e-4 && within(el, 30.0),
        format!("{}; 3-block net {composite:.1e}; {:.2}s", parts.join(", "), el.as_secs_f64()),
    )
}

// 6

/// Magnitude spectrum by direct summation.
fn dft_magnitudes(x: &[f64], cos: &[f64], sin: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..n)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (t, &v) in x.iter().enumerate() {
                let idx = (k * t) % n;
                re += v * cos[idx];
                im -= v * sin[idx];
            }
            re.hypot(im)
        })
        .collect()
}

fn augmentation() -> Outcome {
    let t = Instant::now();
    let (inputs, channels, n) = (1000, 2, 64);
    let mut rng = seed::rng(66);
    let epochs: Vec<Epoch<f64>> = (0..inputs)
        .map(|i| {
            let offsets: Vec<f64> = (0..channels).map(|_| 3.0 * normal(&mut rng)).collect();
            let data = Array2::from_shape_fn((channels, n), |(c, _)| offsets[c] + normal(&mut rng));
            Epoch::new("s", 1 + i % 2, 128.0, data)
        })
        .collect();
    let set = EpochSet::new(epochs, 2).unwrap();
    let cfg = AugmentConfig {
        seed: 6,
        ..AugmentConfig::default()
    };
    let out = augment_set(&set, &cfg).unwrap();
    let again = augment_set(&set, &cfg).unwrap();
    let count_ok = out.len() == 10 * inputs && out.count_origin(true) == 9 * inputs;
    let identical = out == again;

    let cos: Vec<f64> = (0..n).map(|k| (2.0 * std::f64::consts::PI * k as f64 / n as f64).cos()).collect();
    let sin: Vec<f64> = (0..n).map(|k| (2.0 * std::f64::consts::PI * k as f64 / n as f64).sin()).collect();
    let (mut scale_lo, mut scale_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut worst_mean, mut worst_spec): (f64, f64) = (0.0, 0.0);
    let mut trace_mismatch = 0;
    let mut copies = vec![0usize; inputs];
    for ep in out.iter().skip(inputs) {
        let Origin::Augmented { source, scale, .. } = ep.origin else {
            trace_mismatch += 1;
            continue;
        };
        scale_lo = scale_lo.min(scale);
        scale_hi = scale_hi.max(scale);
        let copy = copies[source];
        copies[source] += 1;
        let trace = augment_epoch_traced(&set.epochs()[source], &cfg, &mut substream(cfg.seed, source, copy));
        if trace.output.data != ep.data || trace.scale != scale {
            trace_mismatch += 1;
        }
        for c in 0..channels {
            let pre = trace.pre_noise.data.row(c).to_vec();
            worst_mean = worst_mean.max((pre.iter().sum::<f64>() / n as f64).abs());
            let before = dft_magnitudes(&trace.zero_meaned.data.row(c).to_vec(), &cos, &sin);
            let after = dft_magnitudes(&pre, &cos, &sin);
            let peak = before.iter().fold(0.0f64, |m, &v| m.max(v)) * scale;
            for (b, a) in before.iter().zip(&after) {
                worst_spec = worst_spec.max((a - b * scale).abs() / peak);
            }
        }
    }
    let el = t.elapsed();
    let scale_ok = scale_lo >= 0.2 && scale_hi <= 5.0;
    outcome(
        count_ok && identical && scale_ok && trace_mismatch == 0 && worst_mean <= 1e-9 && worst_spec <= 1e-9 && within(el, 60.0),
        format!(
            "{inputs} -> {} epochs; scales [{scale_lo:.3}, {scale_hi:.3}]; spectrum {worst_spec:.1e}; pre-noise mean {worst_mean:.1e}; replay mismatches {trace_mismatch}; reseeded identical {identical}; {:.1}s",
            out.len(),
            el.as_secs_f64()
        ),
    )
}

// 7 and 9

const E2E_STRUCTURE: &str = "4,7,8 / 8,7,8 / 8,7,8 / 8,7,8 / 8,16,16";

struct EndToEnd {
    full_a: ExperimentReport,
    capped_a: ExperimentReport,
    capped_na: ExperimentReport,
    elapsed: Duration,
}

fn end_to_end() -> &'static EndToEnd {
    static RUN: OnceLock<EndToEnd> = OnceLock::new();
    RUN.get_or_init(|| {
        let t = Instant::now();
        let set = generate_synthetic::<f32>(&SyntheticSpec::lateralized(2, 100, 4, 250, 250.0, 0.5, 7)).unwrap();
        let plan = |augment, cap, patience| ExperimentPlan {
            transform: Transform::Nts,
            augment,
            structure: E2E_STRUCTURE.into(),
            dropout: 0.1,
            train: TrainConfig {
                max_iterations: 200,
                patience,
                ..TrainConfig::default()
            },
            max_train_epochs: cap,
            n_runs: 5,
            master_seed: 1,
            ..ExperimentPlan::default()
        };
        let full_a = run_experiment_on(&plan(Augmentation::A, None, 20), &set).unwrap();
        let capped_a = run_experiment_on(&plan(Augmentation::A, Some(20), 20), &set).unwrap();
        let capped_na = run_experiment_on(&plan(Augmentation::Na, Some(20), 20), &set).unwrap();
        EndToEnd {
            full_a,
            capped_a,
            capped_na,
            elapsed: t.elapsed(),
        }
    })
}

fn accuracies(r: &ExperimentReport) -> Vec<Option<f64>> {
    r.runs.iter().map(|x| x.metrics.as_ref().map(|m| m.accuracy)).collect()
}

fn synthetic_end_to_end() -> Outcome {
    let e = end_to_end();
    let full = accuracies(&e.full_a);
    let complete = full.iter().all(Option::is_some);
    let mean = e.full_a.aggregate.mean_accuracy;
    let iters_ok = e
        .full_a
        .runs
        .iter()
        .filter_map(|r| r.metrics.as_ref())
        .all(|m| m.training.iter().all(|t| t.stop_iteration <= 200));
    let a = accuracies(&e.capped_a);
    let na = accuracies(&e.capped_na);
    let wins = a.iter().zip(&na).filter(|(a, n)| matches!((a, n), (Some(a), Some(n)) if a >= n)).count();
    let fmt = |v: &[Option<f64>]| v.iter().map(|x| x.map_or("err".into(), |x| format!("{x:.2}"))).collect::<Vec<_>>().join(" ");
    outcome(
        complete && mean >= 0.95 && iters_ok && wins >= 4 && within(e.elapsed, 600.0),
        format!(
            "NTS-A mean {mean:.3} [{}]; capped A [{}] vs NA [{}], A>=NA in {wins}/5; {:.0}s",
            fmt(&full),
            fmt(&a),
            fmt(&na),
            e.elapsed.as_secs_f64()
        ),
    )
}

fn divergence_behavior() -> Outcome {
    let mut rng = seed::rng(99);
    let (n, d) = (40, 5);
    let base = Array2::from_shape_fn((n, d), |_| normal(&mut rng));
    let mean = base.mean_axis(Axis(0)).unwrap();
    // Class 2 mirrors class 1 through its mean, so both class means coincide.
    let mirrored = base.mapv(|v| -v) + &(&mean * 2.0);
    let same_means = ndarray::concatenate(Axis(0), &[base.view(), mirrored.view()]).unwrap();
    let labels: Vec<usize> = (0..2 * n).map(|i| 1 + i / n).collect();
    let zero = divergence(&same_means, &labels, 2).unwrap().abs();

    let labels3: Vec<usize> = (0..3 * n).map(|i| 1 + i / n).collect();
    let feats = Array2::from_shape_fn((3 * n, d), |(i, j)| normal(&mut rng) + if j == i / n { 2.0 } else { 0.0 });
    let a = Array2::from_shape_fn((d, d), |(i, j)| if i == j { 1.0 } else { 0.0 } + 0.4 * normal(&mut rng));
    let before = divergence(&feats, &labels3, 3).unwrap();
    let after = divergence(&feats.dot(&a.t()), &labels3, 3).unwrap();
    let invariance = (after - before).abs() / before.abs();

    let e = end_to_end();
    let pairs: Vec<(f64, f64)> = e
        .full_a
        .runs
        .iter()
        .filter_map(|r| r.metrics.as_ref())
        .filter_map(|m| Some((m.training[0].initial_divergence?, m.training[0].final_divergence?)))
        .collect();
    let rises = pairs.iter().filter(|(i, f)| f > i).count();
    let shown: Vec<String> = pairs.iter().map(|(i, f)| format!("{i:.2}->{f:.1}")).collect();
    outcome(
        zero <= 1e-9 && invariance <= 1e-6 && rises >= 4,
        format!(
            "coincident means {zero:.1e}; linear map {invariance:.1e}; rises in {rises}/5 [{}]",
            shown.join(" ")
        ),
    )
}

// 8

fn planted_set(rng: &mut seed::Rng, e: usize, per_class: usize, n: usize) -> EpochSet<f64> {
    let mix = Array2::from_shape_fn((e, e), |(i, j)| if i == j { 1.0 } else { 0.0 } + 0.5 * normal(rng));
    let sd = |class: usize, k: usize| match (class, k) {
        (1, 0) | (2, 5) => 2.0,
        (1, 5) | (2, 0) => 0.5,
        _ => 1.0,
    };
    let mut epochs = Vec::new();
    for class in 1..=2 {
        for _ in 0..per_class {
            let s = Array2::from_shape_fn((e, n), |(k, _)| sd(class, k) * normal(rng));
            epochs.push(Epoch::new("planted", class, 100.0, mix.dot(&s)));
        }
    }
    EpochSet::new(epochs, 2).unwrap()
}

fn quad(w: ndarray::ArrayView1<f64>, c: &Array2<f64>) -> f64 {
    w.dot(&c.dot(&w))
}

fn csp_properties() -> Outcome {
    let t = Instant::now();
    let mut rng = seed::rng(88);
    let set = planted_set(&mut rng, 6, 40, 200);
    let c1 = class_covariance(&set, &[1]).unwrap();
    let c2 = class_covariance(&set, &[2]).unwrap();
    let pair = csp_pair(&c1, &c2).unwrap();
    let top = pair.filters.row(0);
    let top_ratio = quad(top, &c1) / quad(top, &c2);
    let best_channel = (0..6).map(|i| c1[[i, i]] / c2[[i, i]]).fold(f64::NEG_INFINITY, f64::max);

    let w = &pair.filters;
    let white = w.dot(&(&c1 + &c2)).dot(&w.t());
    let whitening = white
        .indexed_iter()
        .map(|((i, j), &v)| (v - if i == j { 1.0 } else { 0.0 }).abs())
        .fold(0.0, f64::max);

    let class1: Vec<Epoch<f64>> = set.iter().filter(|e| e.label == 1).cloned().collect();
    let twins: Vec<Epoch<f64>> =
        class1.iter().cloned().chain(class1.iter().map(|e| Epoch { label: 2, ..e.clone() })).collect();
    let twins = EpochSet::new(twins, 2).unwrap();
    let same = csp_pair(&class_covariance(&twins, &[1]).unwrap(), &class_covariance(&twins, &[2]).unwrap()).unwrap();
    let half = same.values.iter().map(|v| (v - 0.5).abs()).fold(0.0, f64::max);

    let fingerprint = fingerprint_guard();
    let el = t.elapsed();
    outcome(
        top_ratio >= best_channel && whitening <= 1e-8 && half <= 1e-6 && fingerprint.is_ok() && within(el, 30.0),
        format!(
            "top ratio {top_ratio:.3} vs best channel {best_channel:.3}; whitening {whitening:.1e}; identical classes {half:.1e}; fingerprint {}; {:.1}s",
            fingerprint.unwrap_or_else(|e| e),
            el.as_secs_f64()
        ),
    )
}

/// The model records the filtered training fingerprint, which no held-out
/// view of the data shares, and a TS run completes its own data-flow checks.
fn fingerprint_guard() -> Result<String, String> {
    let set = generate_synthetic::<f64>(&SyntheticSpec::lateralized(2, 30, 4, 250, 250.0, 1.0, 8)).unwrap();
    let bank = FilterBankSpec::default();
    let train = set.subset(&(0..40).collect::<Vec<_>>()).unwrap();
    let filtered_train = train.try_map(|e| apply_filter_bank(e, &bank)).unwrap();
    let filtered_all = set.try_map(|e| apply_filter_bank(e, &bank)).unwrap();
    let model = fit_csp(&filtered_train, 1, CspScheme::TwoClass, &bank).unwrap();
    if model.fitted_on != filtered_train.fingerprint() {
        return Err("model does not carry the training fingerprint".into());
    }
    if model.fitted_on == filtered_all.fingerprint() || model.fitted_on == train.fingerprint() {
        return Err("fingerprint does not distinguish the training partition".into());
    }
    let plan = ExperimentPlan {
        transform: Transform::Ts,
        csp: Some(CspSettings {
            m: 1,
            bank,
            scheme: None,
        }),
        structure: "2,7,4 / 4,7,4 / 4,7,4 / 4,7,4 / 4,16,16".into(),
        train: TrainConfig {
            max_iterations: 2,
            ..TrainConfig::default()
        },
        n_runs: 1,
        master_seed: 3,
        ..ExperimentPlan::default()
    };
    let report = run_experiment_on(&plan, &set).map_err(|e| e.to_string())?;
    match &report.runs[0].error {
        Some(e) => Err(e.clone()),
        None => Ok("ok".into()),
    }
}

// 10

fn brute_force_class(ofe: &[f64], targets: &[Vec<u8>]) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (k, t) in targets.iter().enumerate() {
        let d: f64 = ofe.iter().zip(t).map(|(o, &r)| (o - r as f64).powi(2)).sum();
        if d < best.0 {
            best = (d, k + 1);
        }
    }
    best.1
}

fn mdn_equivalence() -> Outcome {
    let mut rng = seed::rng(1010);
    let mut disagree = 0;
    let mut ties = 0;
    for _ in 0..10_000 {
        let m = [4, 8, 16][rng.random_range(0..3)];
        let c = rng.random_range(2..m);
        let book = WalshCodebook::new(m, c).unwrap();
        let targets = class_targets(m, c).unwrap();
        // Quarter steps are exact in binary, so ties are exact too.
        let ofe: Vec<f64> = (0..m).map(|_| rng.random_range(0..5) as f64 * 0.25).collect();
        let d: Vec<f64> = targets.iter().map(|t| ofe.iter().zip(t).map(|(o, &r)| (o - r as f64).powi(2)).sum()).collect();
        let min = d.iter().cloned().fold(f64::INFINITY, f64::min);
        if d.iter().filter(|&&v| v == min).count() > 1 {
            ties += 1;
        }
        if mdn_classify(&ofe, &book).unwrap() != brute_force_class(&ofe, &targets) {
            disagree += 1;
        }
    }

    let spec = parse_structure("2,5,4 / 4,5,4 / 4,4,16", 2, 16, 16).unwrap().with_regularization(true, 0.0);
    let net = Network::<f64>::new(spec, 21).unwrap();
    let clf = MdnClassifier::<f64>::new(WalshCodebook::new(16, 2).unwrap());
    let member = || vec![Member { classes: vec![1, 2], extractor: net.clone() }];
    let single = MetaScheme::new(SchemeKind::Single, 2, member()).unwrap();
    let ovo = MetaScheme::new(SchemeKind::Ovo, 2, member()).unwrap();
    let mut ovo_diff = 0;
    let mut votes = [0usize; 2];
    for _ in 0..1000 {
        let amp = 0.1 + 3.0 * rng.random::<f64>();
        let x = Array2::from_shape_fn((2, 16), |_| amp * normal(&mut rng));
        let s = single.predict(&x, &clf).unwrap();
        votes[s - 1] += 1;
        if ovo.predict(&x, &clf).unwrap() != s {
            ovo_diff += 1;
        }
    }
    outcome(
        disagree == 0 && ovo_diff == 0,
        format!(
            "10000 OFE vectors ({ties} with tied minima), {disagree} disagreements; OVO vs single on 1000 fixtures: {ovo_diff} differ (classes {}/{})",
            votes[0], votes[1]
        ),
    )
}

/// Criteria that fail for reasons outside the implementation, with the reason.
const KNOWN_RED: &[(usize, &str)] = &[(
    3,
    "a two-class row prints 98.2 (0.86) twice; balanced kappa of 98.2% is 0.964 and the same rows give mean 96.3 (0.926)",
)];

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("walsh fidelity", walsh_fidelity),
        ("weight-count arithmetic", weight_counts),
        ("kappa pairing", kappa_pairs),
        ("paired t-test", paired_t),
        ("gradient correctness", gradients),
        ("augmentation properties", augmentation),
        ("end-to-end synthetic", synthetic_end_to_end),
        ("csp properties", csp_properties),
        ("divergence behavior", divergence_behavior),
        ("mdn equivalence", mdn_equivalence),
    ];
    // The end-to-end run dominates; start it first so the rest overlap with it.
    let results: Vec<Outcome> = std::thread::scope(|s| {
        s.spawn(end_to_end);
        let handles: Vec<_> = criteria.iter().map(|(_, f)| s.spawn(f)).collect();
        handles.into_iter().map(|h| h.join().expect("criterion panicked")).collect()
    });
    let mut failed = 0;
    let mut unexpected = 0;
    for (i, ((name, _), r)) in criteria.iter().zip(&results).enumerate() {
        let known = KNOWN_RED.iter().find(|(n, _)| *n == i + 1);
        let tag = if r.pass { "PASS" } else { "FAIL" };
        println!("[{tag}] {:>2}. {name}: {}", i + 1, r.detail);
        if let Some((_, why)) = known {
            println!("        known red: {why}");
        }
        failed += usize::from(!r.pass);
        unexpected += usize::from(r.pass == known.is_some());
    }
    println!(
        "acceptance: {}/{} criteria pass, {} known red, {unexpected} unexpected",
        criteria.len() - failed,
        criteria.len(),
        KNOWN_RED.len()
    );
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
