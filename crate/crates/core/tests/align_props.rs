use drawpass_core::align::{
    apply_path, dtw, dtw_multichannel, sw_dtw, sw_dtw_multichannel, CostMatrix, DtwConfig,
    StepWeights,
};
use drawpass_core::TimeFunctionSet;
use drawpass_oracles::{
    brute_force_dtw, enumerate_paths, min_over_paths, squared_cost, windowed_cost,
};
use proptest::prelude::*;

fn triangle(l: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..=2 * l)
        .map(|k| (l + 1) as f64 - (k as f64 - l as f64).abs())
        .collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / s).collect()
}

// Unnormalized triangular weights and their sum. Oracle sums over these
// integer-valued costs are exact, so exact ties stay tied.
fn triangle_int(l: usize) -> (Vec<f64>, f64) {
    let raw: Vec<f64> = (0..=2 * l)
        .map(|k| (l + 1) as f64 - (k as f64 - l as f64).abs())
        .collect();
    let s = raw.iter().sum();
    (raw, s)
}

fn all_sequences(max_len: usize) -> Vec<Vec<f64>> {
    let mut out = vec![];
    for len in 1..=max_len {
        for code in 0..3usize.pow(len as u32) {
            let mut c = code;
            out.push(
                (0..len)
                    .map(|_| {
                        let v = (c % 3) as f64;
                        c /= 3;
                        v
                    })
                    .collect(),
            );
        }
    }
    out
}

#[test]
fn exhaustive_short_sequences_match_path_enumeration() {
    let seqs = all_sequences(4);
    let plain = DtwConfig::plain();
    let sw = DtwConfig::default();
    let (wts, scale) = triangle_int(2);
    let tables: Vec<Vec<_>> = (1..=4)
        .flat_map(|n| (1..=4).map(move |m| (n, m)))
        .map(|(n, m)| enumerate_paths(n, m))
        .collect();
    for a in &seqs {
        for b in &seqs {
            let paths = &tables[(a.len() - 1) * 4 + b.len() - 1];
            let cost = squared_cost(&[a.clone()], &[b.clone()]);
            let (acc, w) = min_over_paths(paths, &cost, [1.0; 3]);
            let got = dtw(a, b, &plain).unwrap().normalized_distance;
            assert!(
                (got - acc / w).abs() <= 1e-12,
                "dtw {a:?} {b:?}: {got} vs {}",
                acc / w
            );

            let (acc, w) = min_over_paths(paths, &windowed_cost(&cost, &wts), [1.0; 3]);
            let want = acc / w / scale;
            let got = sw_dtw(a, b, &sw).unwrap().normalized_distance;
            assert!(
                (got - want).abs() <= 1e-12,
                "sw-dtw {a:?} {b:?}: {got} vs {want}"
            );
        }
    }
}

#[test]
fn windowed_cost_matches_oracle() {
    let a = [0.3, -1.2, 2.0, 0.0, 0.7];
    let b = [1.0, 0.1, -0.4, 2.2];
    let base = squared_cost(&[a.to_vec()], &[b.to_vec()]);
    for l in 0..=3 {
        let w = triangle(l);
        let want = windowed_cost(&base, &w);
        let got = CostMatrix::squared(&a, &b).windowed(&w);
        for (i, row) in want.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                assert!((got.get(i, j) - v).abs() < 1e-12);
            }
        }
    }
}

fn seq(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0u8..3, 1..=max_len).prop_map(|v| v.into_iter().map(f64::from).collect())
}

fn real_seq(min_len: usize, max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, min_len..=max_len)
}

fn channels(
    len: std::ops::RangeInclusive<usize>,
    c: usize,
) -> impl Strategy<Value = TimeFunctionSet> {
    len.prop_flat_map(move |n| prop::collection::vec(prop::collection::vec(-2.0f64..2.0, n), c))
        .prop_map(|ch| TimeFunctionSet::from_channels(ch).unwrap())
}

proptest! {
    #[test]
    fn dp_equals_brute_force_up_to_length_six(a in seq(6), b in seq(6)) {
        let cost = squared_cost(&[a.clone()], &[b.clone()]);
        let want = brute_force_dtw(&cost, [1.0; 3]);
        let got = dtw(&a, &b, &DtwConfig::plain()).unwrap();
        prop_assert!((got.normalized_distance - want.normalized()).abs() <= 1e-12);
        prop_assert_eq!(&got.pairs, &want.pairs);
    }

    #[test]
    fn weighted_steps_match_brute_force(
        a in seq(5),
        b in seq(5),
        h in 0.5f64..2.0,
        d in 0.5f64..2.0,
        v in 0.5f64..2.0,
    ) {
        let cost = squared_cost(&[a.clone()], &[b.clone()]);
        let (acc, w) = min_over_paths(&enumerate_paths(a.len(), b.len()), &cost, [h, d, v]);
        let cfg = DtwConfig {
            step_weights: StepWeights { horizontal: h, diagonal: d, vertical: v },
            ..DtwConfig::plain()
        };
        let got = dtw(&a, &b, &cfg).unwrap();
        prop_assert!((got.normalized_distance - acc / w).abs() <= 1e-12);
    }

    #[test]
    fn sw_dp_equals_brute_force(a in seq(6), b in seq(6), l in 1usize..3) {
        let cfg = DtwConfig::with_window(l);
        let (wts, scale) = triangle_int(l);
        let cost = windowed_cost(&squared_cost(&[a.clone()], &[b.clone()]), &wts);
        let (acc, w) = min_over_paths(&enumerate_paths(a.len(), b.len()), &cost, [1.0; 3]);
        let got = sw_dtw(&a, &b, &cfg).unwrap();
        prop_assert!((got.normalized_distance - acc / w / scale).abs() <= 1e-12);
    }

    #[test]
    fn self_distance_is_zero(a in real_seq(1, 40), l in 0usize..4) {
        prop_assert_eq!(dtw(&a, &a, &DtwConfig::plain()).unwrap().normalized_distance, 0.0);
        let p = sw_dtw(&a, &a, &DtwConfig::with_window(l)).unwrap();
        prop_assert_eq!(p.normalized_distance, 0.0);
    }

    #[test]
    fn symmetric_under_equal_step_weights(a in real_seq(1, 30), b in real_seq(1, 30), hv in 0.5f64..2.0) {
        let cfg = DtwConfig {
            step_weights: StepWeights { horizontal: hv, diagonal: 1.0, vertical: hv },
            ..DtwConfig::with_window(2)
        };
        let ab = dtw(&a, &b, &cfg).unwrap();
        let ba = dtw(&b, &a, &cfg).unwrap();
        prop_assert!((ab.accumulated - ba.accumulated).abs() <= 1e-9 * (1.0 + ab.accumulated));
        prop_assert!((ab.normalized_distance - ba.normalized_distance).abs() <= 1e-9);
        let ab = sw_dtw(&a, &b, &cfg).unwrap();
        let ba = sw_dtw(&b, &a, &cfg).unwrap();
        prop_assert!((ab.normalized_distance - ba.normalized_distance).abs() <= 1e-9);
    }

    #[test]
    fn paths_are_legal_and_cover_both_ends(a in real_seq(1, 30), b in real_seq(1, 30)) {
        let p = sw_dtw(&a, &b, &DtwConfig::default()).unwrap();
        prop_assert!(p.is_legal(a.len(), b.len()));
        prop_assert_eq!(p.pairs[0], (0, 0));
        prop_assert_eq!(*p.pairs.last().unwrap(), (a.len() - 1, b.len() - 1));
        prop_assert!(p.len() >= a.len().max(b.len()) && p.len() <= a.len() + b.len() - 1);
    }

    #[test]
    fn multichannel_identity_and_symmetry(a in channels(1..=20, 3), b in channels(1..=20, 3)) {
        let cfg = DtwConfig::default();
        prop_assert_eq!(dtw_multichannel(&a, &a, &cfg).unwrap().normalized_distance, 0.0);
        prop_assert_eq!(sw_dtw_multichannel(&a, &a, &cfg).unwrap().normalized_distance, 0.0);
        let ab = dtw_multichannel(&a, &b, &cfg).unwrap().normalized_distance;
        let ba = dtw_multichannel(&b, &a, &cfg).unwrap().normalized_distance;
        prop_assert!((ab - ba).abs() <= 1e-9);
        prop_assert!(ab >= 0.0);
    }

    #[test]
    fn multichannel_equals_brute_force(a in channels(1..=5, 2), b in channels(1..=5, 2)) {
        let cost = squared_cost(a.channels(), b.channels());
        let want = brute_force_dtw(&cost, [1.0; 3]);
        let got = dtw_multichannel(&a, &b, &DtwConfig::plain()).unwrap();
        prop_assert!((got.normalized_distance - want.normalized()).abs() <= 1e-12);
    }

    #[test]
    fn applied_path_has_path_length(a in channels(2..=15, 2), b in channels(2..=15, 2)) {
        let p = sw_dtw_multichannel(&a, &b, &DtwConfig::default()).unwrap();
        let (x, y) = apply_path(&a, &b, &p).unwrap();
        prop_assert_eq!(x.len(), p.len());
        prop_assert_eq!(y.len(), p.len());
        for (k, &(n, m)) in p.pairs.iter().enumerate() {
            prop_assert_eq!(x.value(1, k), a.value(1, n));
            prop_assert_eq!(y.value(0, k), b.value(0, m));
        }
    }
}
