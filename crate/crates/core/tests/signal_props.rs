use drawpass_core::signal::{
    extract_time_functions, prepare, resample_uniform, Point, SampleSource, StrokeSample,
    CHANNEL_NAMES, NUM_CHANNELS,
};
use proptest::prelude::*;

fn sample_strategy() -> impl Strategy<Value = StrokeSample> {
    let stroke = prop::collection::vec((-8.0f64..8.0, -8.0f64..8.0, 3.0f64..20.0), 7..18);
    (
        prop::collection::vec(stroke, 1..4),
        0.0f64..500.0,
        10.0f64..300.0,
    )
        .prop_map(|(strokes, x0, gap)| {
            let mut t = 0.0;
            let (mut x, mut y) = (x0, 200.0);
            let strokes = strokes
                .into_iter()
                .map(|s| {
                    t += gap;
                    s.into_iter()
                        .map(|(dx, dy, dt)| {
                            x += dx;
                            y += dy;
                            t += dt;
                            Point::new(x, y, t)
                        })
                        .collect()
                })
                .collect();
            StrokeSample {
                user_id: "p".into(),
                session: 1,
                label: "Q".into(),
                repetition: 1,
                source: SampleSource::Synthetic,
                strokes,
            }
        })
}

fn map_points(s: &StrokeSample, f: impl Fn(Point) -> Point) -> StrokeSample {
    StrokeSample {
        strokes: s
            .strokes
            .iter()
            .map(|st| st.iter().map(|p| f(*p)).collect())
            .collect(),
        ..s.clone()
    }
}

fn central(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    (0..n)
        .map(|i| match i {
            0 => xs[1] - xs[0],
            i if i == n - 1 => xs[n - 1] - xs[n - 2],
            i => (xs[i + 1] - xs[i - 1]) / 2.0,
        })
        .collect()
}

fn assert_close(a: &[f64], b: &[f64], tol: f64, what: &str) -> Result<(), TestCaseError> {
    prop_assert_eq!(a.len(), b.len());
    for (k, (x, y)) in a.iter().zip(b).enumerate() {
        prop_assert!(
            (x - y).abs() <= tol * (1.0 + x.abs()),
            "{} at {}: {} vs {}",
            what,
            k,
            x,
            y
        );
    }
    Ok(())
}

// Channels whose definitions are dimensionless.
const DIMENSIONLESS: [usize; 7] = [2, 14, 15, 17, 18, 19, 20];

proptest! {
    #[test]
    fn channels_have_equal_length_and_finite_values(s in sample_strategy()) {
        let tf = extract_time_functions(&s).unwrap();
        prop_assert_eq!(tf.num_channels(), NUM_CHANNELS);
        prop_assert_eq!(tf.len(), s.point_count());
        prop_assert!(tf.channels().iter().all(|c| c.len() == tf.len() && c.iter().all(|v| v.is_finite())));
        prop_assert_eq!(tf.channel_names().unwrap(), &CHANNEL_NAMES);
        let n = tf.len() as f64;
        for c in 0..2 {
            prop_assert!((tf.channel(c).iter().sum::<f64>() / n).abs() < 1e-9);
        }
    }

    #[test]
    fn translation_leaves_every_channel_unchanged(s in sample_strategy(), dx in -300.0f64..300.0, dy in -300.0f64..300.0) {
        let a = extract_time_functions(&s).unwrap();
        let b = extract_time_functions(&map_points(&s, |p| Point::new(p.x + dx, p.y + dy, p.t))).unwrap();
        for c in 0..NUM_CHANNELS {
            assert_close(a.channel(c), b.channel(c), 1e-9, CHANNEL_NAMES[c])?;
        }
    }

    #[test]
    fn uniform_scaling_leaves_dimensionless_channels_unchanged(s in sample_strategy(), k in 0.2f64..5.0) {
        let a = extract_time_functions(&s).unwrap();
        let b = extract_time_functions(&map_points(&s, |p| Point::new(p.x * k, p.y * k, p.t))).unwrap();
        for c in DIMENSIONLESS {
            assert_close(a.channel(c), b.channel(c), 1e-9, CHANNEL_NAMES[c])?;
        }
    }

    #[test]
    fn derivative_channels_difference_the_base_channels(s in sample_strategy()) {
        let tf = extract_time_functions(&s).unwrap();
        for c in 0..6 {
            let want = central(tf.channel(c));
            prop_assert_eq!(tf.channel(c + 6), want.as_slice(), "channel {}", c + 7);
        }
        for (d, base) in [(12, 6), (13, 7), (16, 15)] {
            let want = central(tf.channel(base));
            prop_assert_eq!(tf.channel(d), want.as_slice(), "channel {}", d + 1);
        }
    }

    #[test]
    fn sine_and_cosine_follow_the_angle(s in sample_strategy()) {
        let tf = extract_time_functions(&s).unwrap();
        for n in 0..tf.len() {
            let a = tf.value(15, n);
            prop_assert_eq!(tf.value(17, n), a.sin());
            prop_assert_eq!(tf.value(18, n), a.cos());
        }
    }

    #[test]
    fn extraction_is_deterministic(s in sample_strategy()) {
        let a = prepare(&s, 1000.0).unwrap();
        let b = prepare(&s.clone(), 1000.0).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn resampling_keeps_strokes_and_uniform_grid(s in sample_strategy(), rate in 50.0f64..250.0) {
        let r = resample_uniform(&s, rate).unwrap();
        prop_assert_eq!(r.strokes.len(), s.strokes.len());
        let dt = 1000.0 / rate;
        for (orig, st) in s.strokes.iter().zip(&r.strokes) {
            prop_assert_eq!(st[0], orig[0]);
            let span = orig.last().unwrap().t - orig[0].t;
            if span < dt {
                // too short for one grid step: the two endpoints survive
                prop_assert_eq!(st.len(), 2);
                continue;
            }
            for w in st.windows(2) {
                prop_assert!(((w[1].t - w[0].t) - dt).abs() < 1e-6);
            }
            prop_assert!(st.last().unwrap().t <= orig.last().unwrap().t + 1e-9);
        }
        // coarse grids may drop below the sample minimum, but never break ordering
        if r.point_count() >= 7 {
            prop_assert!(r.validate().is_ok());
        }
        for w in r.strokes.windows(2) {
            prop_assert!(w[1][0].t >= w[0].last().unwrap().t);
        }
    }

    #[test]
    fn prepared_channels_are_standardized(s in sample_strategy()) {
        let tf = prepare(&s, 1000.0).unwrap();
        let n = tf.len() as f64;
        for c in 2..NUM_CHANNELS {
            let ch = tf.channel(c);
            let mean = ch.iter().sum::<f64>() / n;
            let var = ch.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            prop_assert!(mean.abs() < 1e-9);
            prop_assert!(var.abs() < 1e-9 || (var - 1.0).abs() < 1e-9, "{} variance {}", CHANNEL_NAMES[c], var);
        }
    }
}
