//! Randomized invariants over generated signals.

use proptest::prelude::*;
use sepkit_core::filterbank::{Filterbank, Window};
use sepkit_core::masking::{oracle_masks, OracleMaskKind};
use sepkit_core::signal::{make_mixture, power_db, SourceSet, Waveform};
use sepkit_core::transform::{encode, from_polar, polar, Mask};

fn waveform_strategy(len: core::ops::Range<usize>) -> impl Strategy<Value = Waveform> {
    prop::collection::vec(-1.0f64..1.0, len)
        .prop_filter("need a nonzero signal", |v| v.iter().any(|x| x.abs() > 1e-3))
        .prop_map(|v| Waveform::new(v, 8000).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn amplifying_a_signal_shifts_its_power_in_decibels(
        w in waveform_strategy(32..512),
        gain in 0.05f64..20.0,
    ) {
        let louder = Waveform::new(
            w.samples.iter().map(|v| gain * v).collect(),
            w.sample_rate_hz,
        ).unwrap();
        let expect = power_db(&w).unwrap() + 20.0 * gain.log10();
        prop_assert!((power_db(&louder).unwrap() - expect).abs() < 1e-9);
    }

    #[test]
    fn mixtures_equal_the_sum_of_their_rescaled_sources(
        a in waveform_strategy(64..256),
        b in prop::collection::vec(-1.0f64..1.0, 64..256),
        snr in -10.0f64..10.0,
    ) {
        let n = a.len().min(b.len());
        let a = Waveform::new(a.samples[..n].to_vec(), 8000).unwrap();
        let b = Waveform::new(b[..n].to_vec(), 8000).unwrap();
        prop_assume!(b.samples.iter().any(|x| x.abs() > 1e-3));
        let sources = SourceSet::new(vec![a, b]).unwrap();
        let (mixture, rescaled) = make_mixture(&sources, &[snr], None, None).unwrap();
        for t in 0..n {
            let sum = rescaled[0].samples[t] + rescaled[1].samples[t];
            prop_assert!((mixture.samples[t] - sum).abs() < 1e-12);
        }
    }

    #[test]
    fn encoding_commutes_with_scaling(
        w in waveform_strategy(80..400),
        gain in -4.0f64..4.0,
    ) {
        let fb = Filterbank::stft(32, 16, Window::SqrtHann).unwrap();
        let scaled = Waveform::new(
            w.samples.iter().map(|v| gain * v).collect(),
            w.sample_rate_hz,
        ).unwrap();
        let base = encode(&fb, &w).unwrap();
        let lifted = encode(&fb, &scaled).unwrap();
        for (x, y) in base.frames().iter().zip(lifted.frames()) {
            prop_assert!((gain * x - y).norm() < 1e-9);
        }
    }

    #[test]
    fn polar_decomposition_round_trips(w in waveform_strategy(64..300)) {
        let fb = Filterbank::stft(16, 8, Window::Hann).unwrap();
        let rep = encode(&fb, &w).unwrap();
        let (mag, phase) = polar(&rep);
        let back = from_polar(&rep, &mag, &phase).unwrap();
        for (x, y) in rep.frames().iter().zip(back.frames()) {
            prop_assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn binary_masks_partition_every_cell(
        a in waveform_strategy(100..300),
        b in prop::collection::vec(-1.0f64..1.0, 100..300),
    ) {
        let n = a.len().min(b.len());
        let a = Waveform::new(a.samples[..n].to_vec(), 8000).unwrap();
        let b = Waveform::new(b[..n].to_vec(), 8000).unwrap();
        prop_assume!(b.samples.iter().any(|x| x.abs() > 1e-3));
        let fb = Filterbank::stft(32, 16, Window::SqrtHann).unwrap();
        let reps = vec![encode(&fb, &a).unwrap(), encode(&fb, &b).unwrap()];
        let masks = oracle_masks(&reps, OracleMaskKind::Ibm).unwrap();
        let cells = reps[0].n_channels() * reps[0].n_frames();
        for c in 0..cells {
            let total: f64 = masks
                .iter()
                .map(|m| match m {
                    Mask::Magnitude(v) => v.values()[c],
                    Mask::Complex { .. } => unreachable!("oracle masks are real"),
                })
                .sum();
            prop_assert_eq!(total, 1.0);
        }
    }
}
