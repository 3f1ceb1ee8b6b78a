use microgest::signal::rectify;
use microgest::synth::{generate_dataset, generate_stream, SynthConfig};
use proptest::prelude::*;

fn rms(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v * v, n + 1));
    (sum / n.max(1) as f64).sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn streams_honor_their_configuration(
        seed in any::<u64>(),
        classes in 1usize..=6,
        per_class in 1usize..=4,
        snr_db in 0.5f64..20.0,
        min_ms in 100.0f64..400.0,
        span_ms in 0.0f64..400.0,
    ) {
        let cfg = SynthConfig {
            classes,
            actions_per_class: per_class,
            snr_db,
            action_duration_ms: (min_ms, min_ms + span_ms),
            ..SynthConfig::default()
        };
        let s = generate_stream::<f64>(&cfg, seed).unwrap();
        prop_assert_eq!(s.labels.len(), classes * per_class);
        for c in 0..classes {
            prop_assert_eq!(s.labels.iter().filter(|l| l.class_id == c).count(), per_class);
        }

        let lo = (min_ms * 2.0).round() as usize;
        let hi = ((min_ms + span_ms) * 2.0).round() as usize;
        for w in s.labels.windows(2) {
            prop_assert!(w[0].offset <= w[1].onset);
        }
        for l in &s.labels {
            prop_assert!(l.offset <= s.signal.len());
            prop_assert!((lo..=hi).contains(&(l.offset - l.onset)));
        }

        let rect = rectify(&s.signal);
        let mut inside = vec![false; s.signal.len()];
        for l in &s.labels {
            inside[l.onset..l.offset].iter_mut().for_each(|v| *v = true);
        }
        let pick = |want: bool| {
            rect.channels()
                .iter()
                .flat_map(|ch| ch.iter().zip(&inside).filter(move |(_, &i)| i == want).map(|(&v, _)| v))
                .collect::<Vec<f64>>()
        };
        prop_assert!(rms(pick(true).into_iter()) > rms(pick(false).into_iter()));

        prop_assert_eq!(generate_stream::<f64>(&cfg, seed).unwrap(), s);
    }

    #[test]
    fn dataset_splits_are_stratified_and_disjoint(seed in any::<u64>(), split in 0.2f64..0.8) {
        let cfg = SynthConfig { classes: 3, actions_per_class: 8, ..SynthConfig::default() };
        let d = generate_dataset::<f64>(&cfg, seed, split).unwrap();
        let per_class = (split * 8.0).round() as usize;
        for c in 0..3 {
            prop_assert_eq!(d.train.iter().filter(|s| s.class_id == c).count(), per_class);
            prop_assert_eq!(d.test.iter().filter(|s| s.class_id == c).count(), 8 - per_class);
        }
        for a in &d.train {
            prop_assert!(d.test.iter().all(|b| b.onset != a.onset));
        }
    }
}
